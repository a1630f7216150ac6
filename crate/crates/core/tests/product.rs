use cheb2relu::product::{build_product, product_constants, ProductSpec};
use proptest::prelude::*;

const OFFSET: f64 = 0.381_966_011_250_105_1;

fn grid(n: usize, kappa: f64, shift: f64) -> Vec<f64> {
    (0..n).map(|i| kappa * (-1.0 + 2.0 * (i as f64 + shift) / (n - 1) as f64)).collect()
}

fn max_value_error(delta: f64, kappa: f64) -> f64 {
    let net = build_product(&ProductSpec::new(delta, kappa).unwrap());
    let g = grid(513, kappa, 0.0);
    let pts: Vec<f64> = g.iter().flat_map(|&a| g.iter().flat_map(move |&b| [a, b])).collect();
    let out = net.realize_batch(&pts).unwrap();
    pts.chunks(2).zip(&out).map(|(p, r)| (p[0] * p[1] - r).abs()).fold(0.0, f64::max)
}

#[test]
fn value_error_on_dense_grid() {
    for kappa in [1.0, 2.0] {
        for delta in [1e-2, 1e-3, 1e-4, 1e-6] {
            let e = max_value_error(delta, kappa);
            assert!(e <= delta, "δ={delta} κ={kappa}: {e}");
        }
    }
}

#[test]
fn partial_derivatives_on_offset_grid() {
    for kappa in [1.0, 2.0] {
        for delta in [1e-2, 1e-4] {
            let net = build_product(&ProductSpec::new(delta, kappa).unwrap());
            // distinct irrational offsets keep a ± b off the dyadic breakpoints
            let ga: Vec<f64> = grid(101, kappa, OFFSET).into_iter().filter(|x| x.abs() < kappa).collect();
            let gb: Vec<f64> = grid(101, kappa, OFFSET * OFFSET).into_iter().filter(|x| x.abs() < kappa).collect();
            let pts: Vec<f64> = ga.iter().flat_map(|&a| gb.iter().flat_map(move |&b| [a, b])).collect();
            let da: Vec<f64> = pts.chunks(2).flat_map(|_| [1.0, 0.0]).collect();
            let db: Vec<f64> = pts.chunks(2).flat_map(|_| [0.0, 1.0]).collect();
            let (_, pa) = net.realize_batch_directional(&pts, &da).unwrap();
            let (_, pb) = net.realize_batch_directional(&pts, &db).unwrap();
            for (k, p) in pts.chunks(2).enumerate() {
                assert!((p[1] - pa[k]).abs() <= delta, "∂a at {p:?}: {}", pa[k]);
                assert!((p[0] - pb[k]).abs() <= delta, "∂b at {p:?}: {}", pb[k]);
            }
        }
    }
}

#[test]
fn exact_zero_and_unit_identities() {
    for kappa in [1.0, 2.0, 3.5] {
        for delta in [0.3, 1e-2, 1e-5] {
            let net = build_product(&ProductSpec::new(delta, kappa).unwrap());
            for b in grid(257, kappa, 0.0) {
                assert_eq!(net.realize(&[b, 0.0]).unwrap()[0], 0.0);
                assert_eq!(net.realize(&[0.0, b]).unwrap()[0], 0.0);
                for s in [1.0, -1.0] {
                    let tol = 1e-12 * kappa;
                    assert!((net.realize(&[s, b]).unwrap()[0] - s * b).abs() <= tol, "a={s} b={b}");
                    assert!((net.realize(&[b, s]).unwrap()[0] - s * b).abs() <= tol, "b={b} a={s}");
                }
            }
        }
    }
    let net = build_product(&ProductSpec::new(1e-3, 1.0).unwrap());
    assert!((net.realize(&[1.0, 0.37]).unwrap()[0] - 0.37).abs() <= 1e-12);
    assert_eq!(net.realize(&[0.93, 0.0]).unwrap()[0], 0.0);
}

#[test]
fn constants_are_delta_independent() {
    let c = product_constants();
    assert_eq!(c, product_constants());
    for v in [c.c_l, c.c_l_prime, c.c_m, c.c_m_prime, c.c_fi, c.c_la] {
        assert!(v > 0.0);
    }
}

#[test]
fn depth_and_size_sweep() {
    let c = product_constants();
    for kappa in [1.0, 2.0, 5.0] {
        let mut prev: Option<usize> = None;
        for k in 2..=20 {
            let delta = 2f64.powi(-k);
            let m = build_product(&ProductSpec::new(delta, kappa).unwrap()).metrics();
            let log = (kappa.max(1.0) / delta).log2();
            assert!(m.depth as f64 <= c.c_l * log + c.c_l_prime, "κ={kappa} k={k}: L={}", m.depth);
            assert!(m.size as f64 <= c.c_m * log + c.c_m_prime, "κ={kappa} k={k}: M={}", m.size);
            assert!(m.size_first as f64 <= c.c_fi && m.size_last as f64 <= c.c_la);
            if let Some(p) = prev {
                assert!(m.size - p <= c.c_m as usize);
            }
            prev = Some(m.size);
        }
    }
}

#[test]
fn rejects_bad_parameters() {
    for (d, k) in [(0.0, 1.0), (0.5, 1.0), (-1e-3, 1.0), (1e-3, 0.0), (1e-3, -2.0), (f64::NAN, 1.0)] {
        assert!(matches!(ProductSpec::new(d, k), Err(cheb2relu::Error::Parameter(_))), "{d} {k}");
    }
}

proptest! {
    #[test]
    fn error_within_delta(a in -2.0f64..2.0, b in -2.0f64..2.0, e in 1u32..12) {
        let delta = 10f64.powf(-(e as f64) / 2.0).min(0.4);
        let net = build_product(&ProductSpec::new(delta, 2.0).unwrap());
        let r = net.realize(&[a, b]).unwrap()[0];
        prop_assert!((a * b - r).abs() <= delta);
        let (_, da) = net.realize_directional(&[a, b], &[1.0, 0.0]).unwrap();
        prop_assume!(da[0].is_finite());
        prop_assert!((b - da[0]).abs() <= delta + 1e-12);
    }
}
