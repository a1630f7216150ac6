//! CSV and JSON file formats.
//!
//! * coefficients: header `cheb_coeffs,a,b`, one coefficient per line, the
//!   interval repeated on every line;
//! * single columns: header `node`, `degree` or `value`;
//! * spline value dump: header `element_index,cc_point,value`;
//! * study tables: header `N,dof,nn_size,nn_depth,error_L2,error_H1,error_Linf,wall_time_s`;
//! * networks and error reports: JSON via serde.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::cheb::ChebSeries;
use crate::error::{data, structural, Error, Result};
use crate::spline::{Mesh, PiecewiseCheb};
use crate::studies::StudyRecord;

/// Header of the study table.
pub const STUDY_HEADER: [&str; 8] =
    ["N", "dof", "nn_size", "nn_depth", "error_L2", "error_H1", "error_Linf", "wall_time_s"];

/// Relative tolerance when matching dumped CC points against a mesh.
const POINT_TOL: f64 = 1e-12;

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn check_header<R: Read>(rdr: &mut csv::Reader<R>, expect: &[&str]) -> Result<()> {
    let h = rdr.headers()?;
    if h.len() != expect.len() || h.iter().zip(expect).any(|(a, b)| a != *b) {
        return structural(format!("expected header '{}', found '{}'", expect.join(","), h.iter().collect::<Vec<_>>().join(",")));
    }
    Ok(())
}

fn parse<T: std::str::FromStr>(s: &str, what: &str, line: usize) -> Result<T> {
    s.parse().map_err(|_| Error::Data(format!("line {line}: cannot parse {what} '{s}'")))
}

pub fn write_coeffs<W: Write>(w: W, s: &ChebSeries) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["cheb_coeffs", "a", "b"])?;
    let (a, b) = s.interval();
    for c in s.coeffs() {
        wtr.write_record([c.to_string(), a.to_string(), b.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

/// Reads a coefficient file; `a, b` may be left empty after the first line.
pub fn read_coeffs<R: Read>(r: R) -> Result<ChebSeries> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).flexible(true).from_reader(r);
    check_header(&mut rdr, &["cheb_coeffs", "a", "b"])?;
    let mut coeffs = Vec::new();
    let mut interval: Option<(f64, f64)> = None;
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        coeffs.push(parse::<f64>(rec.get(0).unwrap_or(""), "coefficient", line)?);
        let a = rec.get(1).filter(|s| !s.is_empty());
        let b = rec.get(2).filter(|s| !s.is_empty());
        if let (Some(a), Some(b)) = (a, b) {
            let ab = (parse(a, "a", line)?, parse(b, "b", line)?);
            match interval {
                None => interval = Some(ab),
                Some(prev) if prev != ab => return data(format!("line {line}: interval changes")),
                _ => {}
            }
        }
    }
    let (a, b) = interval.ok_or_else(|| Error::Structural("coefficient file has no interval".into()))?;
    ChebSeries::new(coeffs, a, b)
}

pub fn write_column<W: Write, T: ToString>(w: W, header: &str, values: &[T]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record([header])?;
    for v in values {
        wtr.write_record([v.to_string()])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_column<R: Read, T: std::str::FromStr>(r: R, header: &str) -> Result<Vec<T>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &[header])?;
    rdr.records()
        .enumerate()
        .map(|(k, rec)| parse(rec?.get(0).unwrap_or(""), header, k + 2))
        .collect()
}

/// Mesh from a node file and a degree file.
pub fn read_mesh<R1: Read, R2: Read>(nodes: R1, degrees: R2) -> Result<Mesh> {
    Mesh::new(read_column(nodes, "node")?, read_column(degrees, "degree")?)
}

pub fn write_values<W: Write>(w: W, v: &PiecewiseCheb) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["element_index", "cc_point", "value"])?;
    let pts = v.mesh().cc_points();
    for (i, (p, vals)) in pts.iter().zip(v.element_values()).enumerate() {
        for (x, y) in p.iter().zip(vals) {
            wtr.write_record([i.to_string(), x.to_string(), y.to_string()])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Per-element samples from a value dump, checked against the mesh's CC points.
pub fn read_values<R: Read>(r: R, mesh: &Mesh) -> Result<Vec<Vec<f64>>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &["element_index", "cc_point", "value"])?;
    let pts = mesh.cc_points();
    let mut out: Vec<Vec<f64>> = vec![Vec::new(); mesh.n_elements()];
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let i: usize = parse(rec.get(0).unwrap_or(""), "element index", line)?;
        let x: f64 = parse(rec.get(1).unwrap_or(""), "cc point", line)?;
        let y: f64 = parse(rec.get(2).unwrap_or(""), "value", line)?;
        if i >= out.len() {
            return structural(format!("line {line}: element {i} is not in the mesh"));
        }
        let j = out[i].len();
        let Some(&expect) = pts[i].get(j) else {
            return structural(format!("element {i} expects {} values", pts[i].len()));
        };
        if (x - expect).abs() > POINT_TOL * 1f64.max(expect.abs()) {
            return structural(format!("line {line}: point {x} is not CC point {j} ({expect}) of element {i}"));
        }
        out[i].push(y);
    }
    for (i, v) in out.iter().enumerate() {
        if v.len() != pts[i].len() {
            return structural(format!("element {i} expects {} values, got {}", pts[i].len(), v.len()));
        }
    }
    Ok(out)
}

pub fn write_study<W: Write>(w: W, records: &[StudyRecord]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(STUDY_HEADER)?;
    for r in records {
        wtr.write_record([
            r.n.to_string(),
            r.dof.to_string(),
            r.nn_size.to_string(),
            r.nn_depth.to_string(),
            r.error_l2.to_string(),
            r.error_h1.to_string(),
            r.error_linf.to_string(),
            r.wall_time_s.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_study<R: Read>(r: R) -> Result<Vec<StudyRecord>> {
    let mut rdr = reader(r);
    check_header(&mut rdr, &STUDY_HEADER)?;
    let mut out = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = k + 2;
        let f = |i: usize| rec.get(i).unwrap_or("");
        out.push(StudyRecord {
            n: parse(f(0), "N", line)?,
            dof: parse(f(1), "dof", line)?,
            nn_size: parse(f(2), "nn_size", line)?,
            nn_depth: parse(f(3), "nn_depth", line)?,
            error_l2: parse(f(4), "error_L2", line)?,
            error_h1: parse(f(5), "error_H1", line)?,
            error_linf: parse(f(6), "error_Linf", line)?,
            wall_time_s: parse(f(7), "wall_time_s", line)?,
        });
    }
    Ok(out)
}

pub fn save_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn load_json<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
}

pub fn open(path: impl AsRef<Path>) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path)?))
}

pub fn create(path: impl AsRef<Path>) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}
