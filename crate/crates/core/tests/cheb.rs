mod common;

use cheb2relu::cheb::{cc_grid, cc_interpolate, coeff_tail_sum, lebesgue_constant, ChebSeries};
use common::{cheb_t, eval_direct, ls_coeffs, max_abs, random_coeffs, uniform};
use gauss_quad::legendre::GaussLegendre;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = max_abs(b.iter().copied()).max(1.0);
    max_abs(a.iter().zip(b).map(|(x, y)| x - y)) / scale
}

#[test]
fn evaluation_examples() {
    assert_eq!(ChebSeries::reference(vec![0.0, 0.0, 1.0]).unwrap().eval(0.5), -0.5);
    assert!((ChebSeries::reference(vec![0.0, 0.0, 0.0, 1.0]).unwrap().eval(0.5) + 1.0).abs() < 1e-15);
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let t2 = ChebSeries::reference(vec![0.0, 0.0, 1.0]).unwrap();
    let t4 = ChebSeries::reference(vec![0.0, 0.0, 0.0, 0.0, 1.0]).unwrap();
    for _ in 0..100 {
        let x = rng.gen_range(-1.0..1.0);
        assert!((t4.eval(x) - (2.0 * t2.eval(x) * t2.eval(x) - 1.0)).abs() < 1e-13);
    }
    // evaluation on a mapped interval agrees with the direct sum
    let c = random_coeffs(&mut rng, 12);
    let s = ChebSeries::new(c.clone(), 0.25, 3.0).unwrap();
    for x in uniform(0.25, 3.0, 50) {
        assert!((s.eval(x) - eval_direct(&c, 0.25, 3.0, x)).abs() < 1e-12);
    }
}

#[test]
fn grid_examples() {
    assert_eq!(cc_grid(2, -1.0, 1.0).unwrap().points(), &[1.0, 0.0, -1.0]);
    assert_eq!(cc_grid(1, 0.0, 1.0).unwrap().points(), &[1.0, 0.0]);
    assert!((cc_grid(4, -1.0, 1.0).unwrap().points()[1] - 0.5f64.sqrt()).abs() < 1e-15);
    assert!(cc_grid(0, -1.0, 1.0).is_err());
    assert!(cc_grid(3, 1.0, 1.0).is_err());
    for p in 1..40 {
        let g = cc_grid(p, -0.3, 2.0).unwrap();
        assert!(g.points().windows(2).all(|w| w[0] > w[1]));
    }
}

#[test]
fn interpolation_matches_least_squares_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for _ in 0..20 {
        let c = random_coeffs(&mut rng, 16);
        let (a, b) = (-1.0, 1.0);
        let fine = cc_grid(32, a, b).unwrap();
        let ys: Vec<f64> = fine.points().iter().map(|&x| eval_direct(&c, a, b, x)).collect();
        let oracle = ls_coeffs(fine.points(), &ys, 16, a, b);
        let g = cc_grid(16, a, b).unwrap();
        let vals: Vec<f64> = g.points().iter().map(|&x| eval_direct(&c, a, b, x)).collect();
        let s = cc_interpolate(&vals, &g).unwrap();
        assert!(rel_gap(s.coeffs(), &oracle) <= 1e-10);
    }
}

#[test]
fn interpolation_examples() {
    let g = cc_grid(3, -1.0, 1.0).unwrap();
    let vals: Vec<f64> = g.points().iter().map(|&x| cheb_t(3, x)).collect();
    let s = cc_interpolate(&vals, &g).unwrap();
    assert!(rel_gap(s.coeffs(), &[0.0, 0.0, 0.0, 1.0]) < 1e-14);
    let s = cc_interpolate(&[2.5; 6], &cc_grid(5, 0.0, 1.0).unwrap()).unwrap();
    assert!(rel_gap(s.coeffs(), &[2.5, 0.0, 0.0, 0.0, 0.0, 0.0]) < 1e-15);
    assert!(matches!(cc_interpolate(&[1.0; 3], &g), Err(cheb2relu::Error::Structural(_))));
    assert!(cc_interpolate(&[1.0, f64::NAN, 0.0, 1.0], &g).is_err());
}

#[test]
fn aliasing_of_next_degree() {
    for p in 2..20 {
        let g = cc_grid(p, -1.0, 1.0).unwrap();
        let vals: Vec<f64> = g.points().iter().map(|&x| cheb_t(p + 1, x)).collect();
        let s = cc_interpolate(&vals, &g).unwrap();
        let oracle = ls_coeffs(g.points(), &vals, p, -1.0, 1.0);
        assert!(rel_gap(s.coeffs(), &oracle) < 1e-10);
        let mut alias = vec![0.0; p + 1];
        alias[p - 1] = 1.0;
        assert!(rel_gap(s.coeffs(), &alias) < 1e-12, "p={p}: {:?}", s.coeffs());
    }
}

#[test]
fn lebesgue_constants() {
    assert!((lebesgue_constant(1).unwrap() - 1.0).abs() < 1e-12);
    assert!((lebesgue_constant(2).unwrap() - 1.25).abs() < 1e-6);
    for p in 1..=100 {
        let l = lebesgue_constant(p).unwrap();
        let bound = 2.0 / std::f64::consts::PI * ((p + 1) as f64).ln() + 1.0;
        assert!(l >= 1.0 - 1e-12 && l <= bound, "p={p}: {l} > {bound}");
    }
}

#[test]
fn tail_sum_examples() {
    for p in 2..10 {
        let mut c = vec![0.0; p + 1];
        c[p] = 1.0;
        let s = ChebSeries::reference(c).unwrap();
        assert_eq!(coeff_tail_sum(&s), 1.0);
        assert!(1.0 <= (p as f64).powi(4) * s.sup_norm_estimate());
    }
    assert_eq!(coeff_tail_sum(&ChebSeries::reference(vec![3.0, -2.0]).unwrap()), 0.0);
}

#[test]
fn derivative_series() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let c = random_coeffs(&mut rng, 9);
    let s = ChebSeries::new(c.clone(), 1.0, 4.0).unwrap();
    let d = s.derivative();
    let h = 1e-6;
    for x in uniform(1.1, 3.9, 40) {
        let fd = (eval_direct(&c, 1.0, 4.0, x + h) - eval_direct(&c, 1.0, 4.0, x - h)) / (2.0 * h);
        assert!((d.eval(x) - fd).abs() < 1e-6);
    }
}

fn l2_norm(s: &ChebSeries) -> f64 {
    let gl = GaussLegendre::new(64).unwrap();
    gl.as_node_weight_pairs().iter().map(|&(x, w)| w * s.eval(x).powi(2)).sum::<f64>().sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn projection_is_identity(c in prop::collection::vec(-1.0f64..1.0, 2..40), a in -3.0f64..3.0, len in 0.01f64..5.0) {
        let s = ChebSeries::new(c.clone(), a, a + len).unwrap();
        let g = cc_grid(c.len() - 1, a, a + len).unwrap();
        let vals: Vec<f64> = g.points().iter().map(|&x| s.eval(x)).collect();
        let back = cc_interpolate(&vals, &g).unwrap();
        prop_assert!(rel_gap(back.coeffs(), &c) <= 1e-10);
        for (x, v) in g.points().iter().zip(&vals) {
            prop_assert!((back.eval(*x) - v).abs() <= 1e-10 * v.abs().max(1.0));
        }
    }

    #[test]
    fn markov_inequality(c in prop::collection::vec(-1.0f64..1.0, 2..22)) {
        let p = (c.len() - 1) as f64;
        let s = ChebSeries::reference(c).unwrap();
        prop_assert!(s.derivative().sup_norm_estimate() <= p * p * s.sup_norm_estimate() * (1.0 + 1e-6));
    }

    #[test]
    fn inverse_inequality(c in prop::collection::vec(-1.0f64..1.0, 1..30)) {
        let p = (c.len() - 1) as f64;
        let s = ChebSeries::reference(c).unwrap();
        prop_assert!(s.sup_norm_estimate() <= (3.0 * p * p).max(0.5).sqrt() * l2_norm(&s) * (1.0 + 1e-9));
    }

    #[test]
    fn tail_sum_bounded_by_sup(c in prop::collection::vec(-1.0f64..1.0, 3..34)) {
        let p = (c.len() - 1) as f64;
        let s = ChebSeries::reference(c).unwrap();
        prop_assert!(coeff_tail_sum(&s) <= p.powi(4) * s.sup_norm_estimate());
    }
}
