//! Command-line front end: coefficients, emulation, studies and round trips.

use std::fmt;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cheb2relu::cheb::{cc_grid, cc_interpolate};
use cheb2relu::expr::Builtin;
use cheb2relu::io;
use cheb2relu::nn::NeuralNetwork;
use cheb2relu::roundtrip::round_trip;
use cheb2relu::sobolev::Target;
use cheb2relu::spline::{build_spline_emulator, sample_to_spline, spline_report, Mesh, PiecewiseCheb};
use cheb2relu::studies::{
    geometric_mesh, run_free_knot_study, run_hp_study, run_p_version_study, EpsRule, HpOptions, Reference,
    SingularTarget, Study,
};
use cheb2relu::Error;
use clap::{Args, Parser, Subcommand};

/// R² a hp fit must reach for the study to succeed.
const HP_MIN_R2: f64 = 0.98;

#[derive(Parser)]
#[command(name = "cheb2relu", version, about = "Chebyshev expansions and piecewise polynomials as ReLU networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Chebyshev coefficients of the Clenshaw–Curtis interpolant.
    Coeffs(CoeffsArgs),
    /// Build the ReLU emulator of a continuous piecewise polynomial.
    Emulate(EmulateArgs),
    /// Convergence studies.
    #[command(subcommand)]
    Study(StudyCommand),
    /// Extract the expansion of a network and re-emulate it.
    Roundtrip(RoundtripArgs),
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["samples", "expr"]))]
struct CoeffsArgs {
    #[arg(long)]
    degree: usize,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true, default_values_t = [-1.0, 1.0])]
    interval: Vec<f64>,
    /// CSV with header `value` holding the samples at the CC points, largest x first.
    #[arg(long)]
    samples: Option<PathBuf>,
    /// Built-in expression: T<k>, sin2pix, runge, xpow<a> or absx.
    #[arg(long)]
    expr: Option<String>,
    /// Output file; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
#[command(group = clap::ArgGroup::new("source").required(true).args(["values", "expr"]))]
struct EmulateArgs {
    /// CSV with header `node`.
    #[arg(long)]
    mesh: PathBuf,
    /// CSV with header `degree`.
    #[arg(long)]
    degrees: PathBuf,
    /// CSV with header `element_index,cc_point,value`.
    #[arg(long)]
    values: Option<PathBuf>,
    #[arg(long)]
    expr: Option<String>,
    #[arg(long)]
    eps: f64,
    /// Network JSON.
    #[arg(long)]
    out: PathBuf,
    /// Error report JSON; defaults to `<out>.report.json`.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Subcommand)]
enum StudyCommand {
    /// Fixed uniform mesh, increasing polynomial degree.
    PVersion(PVersionArgs),
    /// Geometric meshes with linearly increasing degrees.
    Hp(HpArgs),
    /// The hp splines emulated at a list of tolerances.
    FreeKnot(FreeKnotArgs),
}

#[derive(Args)]
struct PVersionArgs {
    #[arg(long, default_value = "sin2pix")]
    expr: String,
    /// Number of uniform elements on (0, 1).
    #[arg(long = "N", default_value_t = 4)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    pmin: usize,
    #[arg(long, default_value_t = 12)]
    pmax: usize,
    /// Exponent s̄ in ε = (Np)^(−s̄).
    #[arg(long, default_value_t = 8.0)]
    s_bar: f64,
    /// Study CSV; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Clone)]
struct HpMesh {
    /// Exponent of the target x^α − x.
    #[arg(long, default_value_t = 0.6)]
    alpha: f64,
    #[arg(long, default_value_t = 0.5)]
    sigma: f64,
    /// Slope μ of the degree vector.
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    #[arg(long, default_value_t = 1.0)]
    gevrey_delta: f64,
    #[arg(long = "Nmin", default_value_t = 1)]
    n_min: usize,
    #[arg(long = "Nmax", default_value_t = 10)]
    n_max: usize,
    /// Rate c in ε = exp(−cN); defaults to α log(1/σ).
    #[arg(long)]
    c: Option<f64>,
    /// Gevrey weight β of the target, enables the μ₀ check together with --du.
    #[arg(long, requires = "du")]
    beta: Option<f64>,
    #[arg(long, requires = "beta")]
    du: Option<f64>,
}

impl HpMesh {
    fn options(&self) -> Result<HpOptions, CliError> {
        if self.n_min == 0 || self.n_min > self.n_max {
            return Err(CliError::Usage(format!("need 1 <= Nmin <= Nmax, got {}..{}", self.n_min, self.n_max)));
        }
        let mut opts = HpOptions::sweep(self.alpha, self.sigma, self.mu, self.gevrey_delta, self.n_min..=self.n_max)
            .map_err(CliError::from_flags)?;
        opts.c = self.c;
        opts.gevrey = self.beta.zip(self.du);
        Ok(opts)
    }
}

#[derive(Args)]
struct HpArgs {
    #[command(flatten)]
    mesh: HpMesh,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Fit summary JSON.
    #[arg(long)]
    fit: Option<PathBuf>,
}

#[derive(Args)]
struct FreeKnotArgs {
    #[command(flatten)]
    mesh: HpMesh,
    /// Tolerances applied to every mesh; defaults to the hp rule exp(−cN).
    #[arg(long, value_delimiter = ',')]
    eps: Vec<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct RoundtripArgs {
    #[arg(long)]
    net: PathBuf,
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    degrees: PathBuf,
    #[arg(long)]
    eps: f64,
    /// Round-trip report JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Where to store the re-emulated network.
    #[arg(long)]
    out_net: Option<PathBuf>,
}

enum CliError {
    Usage(String),
    Input(String),
    Bound(String),
}

impl CliError {
    /// Errors from values given on the command line.
    fn from_flags(e: Error) -> Self {
        match e {
            Error::Parameter(m) => CliError::Usage(m),
            e => CliError::Input(e.to_string()),
        }
    }

    fn input(e: Error) -> Self {
        CliError::Input(e.to_string())
    }

    fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Input(_) => 3,
            CliError::Bound(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Bound(m) => write!(f, "bound check failed: {m}"),
        }
    }
}

type CliResult = Result<(), CliError>;

fn builtin(name: &str) -> Result<Builtin, CliError> {
    name.parse().map_err(CliError::from_flags)
}

fn write_output(out: Option<&Path>, f: impl FnOnce(&mut dyn Write) -> cheb2relu::Result<()>) -> CliResult {
    match out {
        Some(p) => {
            let mut w = io::create(p).map_err(CliError::input)?;
            f(&mut w).map_err(CliError::input)?;
            w.flush().map_err(|e| CliError::Input(e.to_string()))
        }
        None => {
            let stdout = std::io::stdout();
            let mut lock = stdout.lock();
            f(&mut lock).map_err(CliError::input)
        }
    }
}

fn coeffs(a: CoeffsArgs) -> CliResult {
    let (lo, hi) = (a.interval[0], a.interval[1]);
    let grid = cc_grid(a.degree, lo, hi).map_err(CliError::from_flags)?;
    let values: Vec<f64> = match (&a.samples, &a.expr) {
        (Some(path), _) => {
            let v: Vec<f64> = io::read_column(io::open(path).map_err(CliError::input)?, "value").map_err(CliError::input)?;
            if v.len() != a.degree + 1 {
                return Err(CliError::Usage(format!(
                    "--samples holds {} values, expected p+1 = {} for --degree {}",
                    v.len(),
                    a.degree + 1,
                    a.degree
                )));
            }
            v
        }
        (None, Some(e)) => {
            let f = builtin(e)?;
            grid.points().iter().map(|&x| f.value(x)).collect()
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let s = cc_interpolate(&values, &grid).map_err(CliError::input)?;
    write_output(a.out.as_deref(), |w| io::write_coeffs(w, &s))
}

fn load_mesh(mesh: &Path, degrees: &Path) -> Result<Mesh, CliError> {
    let nodes = io::open(mesh).map_err(CliError::input)?;
    let degs = io::open(degrees).map_err(CliError::input)?;
    io::read_mesh(nodes, degs).map_err(CliError::input)
}

fn failed_checks(checks: &[cheb2relu::sobolev::BoundCheck]) -> Option<String> {
    let bad: Vec<String> = checks
        .iter()
        .filter(|c| !c.satisfied)
        .map(|c| format!("{} ({:.3e} > {:.3e})", c.name, c.lhs, c.rhs))
        .collect();
    (!bad.is_empty()).then(|| bad.join("; "))
}

fn emulate(a: EmulateArgs) -> CliResult {
    let mesh = load_mesh(&a.mesh, &a.degrees)?;
    let v = match (&a.values, &a.expr) {
        (Some(path), _) => {
            let vals = io::read_values(io::open(path).map_err(CliError::input)?, &mesh).map_err(CliError::input)?;
            PiecewiseCheb::from_element_values(mesh, &vals).map_err(CliError::input)?
        }
        (None, Some(e)) => {
            let f = builtin(e)?;
            sample_to_spline(&|x| f.value(x), &mesh).map_err(CliError::input)?
        }
        (None, None) => unreachable!("clap requires a source"),
    };
    let net = build_spline_emulator(&v, a.eps).map_err(CliError::from_flags)?;
    let report = spline_report(&v, &net, a.eps).map_err(CliError::input)?;
    io::save_json(&a.out, &net).map_err(CliError::input)?;
    let report_path = a.report.unwrap_or_else(|| a.out.with_extension("report.json"));
    io::save_json(&report_path, &report).map_err(CliError::input)?;
    let m = net.metrics();
    eprintln!("network: depth {}, size {}, written to {}", m.depth, m.size, a.out.display());
    match failed_checks(&report.bound_checks) {
        Some(bad) => Err(CliError::Bound(bad)),
        None => Ok(()),
    }
}

fn finish_study(study: &Study, out: Option<&Path>) -> CliResult {
    for w in &study.warnings {
        log::warn!("{w}");
        eprintln!("warning: {w}");
    }
    write_output(out, |w| io::write_study(w, &study.records))?;
    match failed_checks(&study.checks) {
        Some(bad) => Err(CliError::Bound(bad)),
        None => Ok(()),
    }
}

fn p_version(a: PVersionArgs) -> CliResult {
    if a.pmin == 0 || a.pmin > a.pmax {
        return Err(CliError::Usage(format!("need 1 <= pmin <= pmax, got {}..{}", a.pmin, a.pmax)));
    }
    let f = builtin(&a.expr)?;
    let ps: Vec<usize> = (a.pmin..=a.pmax).collect();
    let study = run_p_version_study(&f, a.s_bar, a.n, &ps, EpsRule::Algebraic { s_bar: a.s_bar })
        .map_err(CliError::from_flags)?;
    if let Some((name, fit)) = study.fits.first() {
        eprintln!("{name}: slope {:.4}, R² {:.4}", fit.slope, fit.r2);
    }
    finish_study(&study, a.out.as_deref())
}

fn hp(a: HpArgs) -> CliResult {
    let opts = a.mesh.options()?;
    let study = run_hp_study(&opts, None).map_err(CliError::from_flags)?;
    finish_study(&study, a.out.as_deref())?;
    let fits: Vec<serde_json::Value> = study
        .fits
        .iter()
        .map(|(name, f)| serde_json::json!({ "fit": name, "slope": f.slope, "intercept": f.intercept, "r2": f.r2 }))
        .collect();
    for (name, f) in &study.fits {
        eprintln!("{name}: slope {:.4}, R² {:.4}", f.slope, f.r2);
    }
    if let Some(p) = &a.fit {
        io::save_json(p, &fits).map_err(CliError::input)?;
    }
    match study.fits.first() {
        Some((_, f)) if f.slope < 0.0 && f.r2 >= HP_MIN_R2 => Ok(()),
        Some((name, f)) => Err(CliError::Bound(format!("{name}: slope {:.4}, R² {:.4}", f.slope, f.r2))),
        None => Err(CliError::Bound("fewer than two meshes, no fit".into())),
    }
}

fn free_knot(a: FreeKnotArgs) -> CliResult {
    let opts = a.mesh.options()?;
    let u = SingularTarget { alpha: opts.alpha };
    let reference = Reference::Target { f: &u, singular: Some(opts.alpha) };
    let mut all = Study::default();
    for spec in &opts.specs {
        let mesh = geometric_mesh(spec).map_err(CliError::from_flags)?;
        let v = sample_to_spline(&|x| u.value(x), &mesh).map_err(CliError::input)?;
        let eps = if a.eps.is_empty() { vec![(-opts.rate(spec.sigma) * spec.n as f64).exp()] } else { a.eps.clone() };
        let s = run_free_knot_study(&v, &eps, &reference).map_err(CliError::from_flags)?;
        all.records.extend(s.records);
        all.checks.extend(s.checks);
    }
    finish_study(&all, a.out.as_deref())
}

fn roundtrip(a: RoundtripArgs) -> CliResult {
    let net: NeuralNetwork = io::load_json(&a.net).map_err(CliError::input)?;
    let mesh = load_mesh(&a.mesh, &a.degrees)?;
    let rt = round_trip(&net, &mesh, a.eps).map_err(CliError::from_flags)?;
    eprintln!(
        "coefficients {:?}, largest gap to sampled {:.3e}, eps~ {:.3e}",
        rt.extraction, rt.sampled_gap, rt.eps_tilde
    );
    if let (Some(p), Some(n)) = (&a.out_net, &rt.network) {
        io::save_json(p, n).map_err(CliError::input)?;
    }
    match &a.out {
        Some(p) => io::save_json(p, &rt).map_err(CliError::input)?,
        None => write_output(None, |w| {
            serde_json::to_writer_pretty(&mut *w, &rt)?;
            Ok(writeln!(w)?)
        })?,
    }
    match failed_checks(&rt.report.bound_checks) {
        Some(bad) => Err(CliError::Bound(bad)),
        None => Ok(()),
    }
}

fn init_threads() -> CliResult {
    let Ok(v) = std::env::var("CHEB2RELU_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("CHEB2RELU_THREADS = '{v}' is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = init_threads().and_then(|()| match cli.command {
        Command::Coeffs(a) => coeffs(a),
        Command::Emulate(a) => emulate(a),
        Command::Study(StudyCommand::PVersion(a)) => p_version(a),
        Command::Study(StudyCommand::Hp(a)) => hp(a),
        Command::Study(StudyCommand::FreeKnot(a)) => free_knot(a),
        Command::Roundtrip(a) => roundtrip(a),
    });
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
