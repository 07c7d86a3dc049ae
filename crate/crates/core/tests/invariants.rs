//! Property-based invariants of structures, tensors, jets and geodesics.
//!
//! Every property runs under the fixed seeds 42, 43 and 44.

use finsler::catalog;
use finsler::diffcalc::partial;
use finsler::{cartan_tensor, fundamental_tensor, integrate_geodesic, parse, FinslerStructure, Integrator};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};

const SEEDS: [u64; 3] = [42, 43, 44];

fn run_seeded<S: Strategy>(strategy: S, test: impl Fn(S::Value) -> Result<(), TestCaseError>) {
    for seed in SEEDS {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&seed.to_le_bytes());
        let rng = TestRng::from_seed(RngAlgorithm::ChaCha, &bytes);
        let config = Config {
            cases: 64,
            failure_persistence: None,
            ..Config::default()
        };
        let mut runner = TestRunner::new_with_rng(config, rng);
        if let Err(e) = runner.run(&strategy, &test) {
            panic!("seed {seed}: {e}");
        }
    }
}

/// Points of the pond disk `|x| < 2.9`.
fn pond_point() -> impl Strategy<Value = Vec<f64>> {
    (0.0..2.9f64, 0.0..std::f64::consts::TAU).prop_map(|(r, a)| vec![r * a.cos(), r * a.sin()])
}

fn fiber(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n).prop_filter("nonzero", |y| y.iter().map(|v| v * v).sum::<f64>() > 1e-2)
}

/// Closed-form navigation norm for a Euclidean background and wind `W`.
fn navigation_norm(w: &[f64], y: &[f64]) -> f64 {
    let lambda = 1.0 - w.iter().map(|v| v * v).sum::<f64>();
    let wy: f64 = w.iter().zip(y).map(|(a, b)| a * b).sum();
    let yy: f64 = y.iter().map(|v| v * v).sum();
    ((lambda * yy + wy * wy).sqrt() - wy) / lambda
}

fn pond_wind(x: &[f64]) -> Vec<f64> {
    vec![x[1] / 3.0, -x[0] / 3.0]
}

#[test]
fn pond_matches_navigation_closed_form() {
    let s = catalog::pond();
    run_seeded((pond_point(), fiber(2)), |(x, y)| {
        let expected = navigation_norm(&pond_wind(&x), &y);
        let got = s.eval(&x, &y);
        prop_assert!(
            (got - expected).abs() <= 1e-12 * expected.max(1.0),
            "{got} vs {expected}"
        );
        Ok(())
    });
}

#[test]
fn pond_unit_sphere_is_shifted_circle() {
    let s = catalog::pond();
    run_seeded((pond_point(), 0.0..std::f64::consts::TAU), |(x, a)| {
        let w = pond_wind(&x);
        let v = [a.cos() + w[0], a.sin() + w[1]];
        prop_assert!((s.eval(&x, &v) - 1.0).abs() < 1e-12);
        Ok(())
    });
}

#[test]
fn norm_is_positively_homogeneous() {
    let structures: Vec<FinslerStructure> = vec![catalog::pond(), catalog::euclidean(3)];
    for s in &structures {
        let n = s.dim();
        let point = if n == 2 {
            pond_point().boxed()
        } else {
            prop::collection::vec(-2.0..2.0f64, 3).boxed()
        };
        run_seeded((point, fiber(n), 0.05..20.0f64), |(x, y, lambda)| {
            let scaled: Vec<f64> = y.iter().map(|v| lambda * v).collect();
            let lhs = s.eval(&x, &scaled);
            let rhs = lambda * s.eval(&x, &y);
            prop_assert!((lhs - rhs).abs() <= 1e-12 * rhs.max(1.0));
            Ok(())
        });
    }
}

#[test]
fn fundamental_tensor_invariants() {
    let s = catalog::pond();
    run_seeded((pond_point(), fiber(2), 0.1..10.0f64), |(x, y, lambda)| {
        let g = fundamental_tensor(&s, &x, &y).unwrap();
        let f = s.eval(&x, &y);
        prop_assert!((g.inner(&y, &y) - f * f).abs() <= 1e-10 * (f * f).max(1.0));
        let det = g.g[(0, 0)] * g.g[(1, 1)] - g.g[(0, 1)] * g.g[(1, 0)];
        prop_assert!(g.g[(0, 0)] > 0.0 && det > 0.0);
        prop_assert!((g.g[(0, 1)] - g.g[(1, 0)]).abs() < 1e-12);

        let scaled: Vec<f64> = y.iter().map(|v| lambda * v).collect();
        let gs = fundamental_tensor(&s, &x, &scaled).unwrap();
        prop_assert!((&gs.g - &g.g).amax() < 1e-9);
        Ok(())
    });
}

#[test]
fn cartan_tensor_is_symmetric_and_annihilates_y() {
    let s = catalog::pond();
    run_seeded((pond_point(), fiber(2)), |(x, y)| {
        let c = cartan_tensor(&s, &x, &y).unwrap().c;
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    prop_assert!((c.get(i, j, k) - c.get(j, i, k)).abs() < 1e-12);
                    prop_assert!((c.get(i, j, k) - c.get(i, k, j)).abs() < 1e-12);
                }
                let contracted: f64 = (0..2).map(|m| c.get(m, i, j) * y[m]).sum();
                prop_assert!(contracted.abs() < 1e-9);
            }
        }
        Ok(())
    });
}

#[test]
fn jet_partials_match_hand_derivatives() {
    let expr = parse("x1^3*x2 + sin(x2)*x1", 2).unwrap();
    let field = finsler::BaseExpr { expr, n: 2 };
    run_seeded((-2.0..2.0f64, -2.0..2.0f64), |(a, b)| {
        let z = [a, b];
        let cases = [
            (vec![0], 3.0 * a * a * b + b.sin()),
            (vec![1], a.powi(3) + a * b.cos()),
            (vec![0, 0], 6.0 * a * b),
            (vec![0, 1], 3.0 * a * a + b.cos()),
            (vec![1, 1], -a * b.sin()),
            (vec![0, 0, 1], 6.0 * a),
            (vec![1, 1, 1], -a * b.cos()),
            (vec![0, 1, 1, 1], -b.cos()),
        ];
        for (index, expected) in cases {
            let got = partial(&field, &z, &index).unwrap();
            prop_assert!(
                (got - expected).abs() <= 1e-10 * expected.abs().max(1.0),
                "{index:?}: {got} vs {expected}"
            );
        }
        Ok(())
    });
}

#[test]
fn euclidean_geodesics_are_straight_lines() {
    let s = catalog::euclidean(2);
    run_seeded((prop::collection::vec(-1.0..1.0f64, 2), fiber(2)), |(x0, y0)| {
        let path = integrate_geodesic(&s, &x0, &y0, 1.0, Integrator::Rk4 { step: 1e-2 }).unwrap();
        for p in &path.samples {
            for i in 0..2 {
                prop_assert!((p.x[i] - (x0[i] + p.t * y0[i])).abs() < 1e-10);
            }
        }
        Ok(())
    });
}
