use std::sync::Arc;

use proptest::prelude::*;

use cocycle_lab::config::ScenarioConfig;
use cocycle_lab::field::rotation;
use cocycle_lab::flag::{block_decompose, jordan_flag, Flag};
use cocycle_lab::growth::{growth_report, GrowthKind, GrowthOptions, Verdict};
use cocycle_lab::linalg::Mat;
use cocycle_lab::lyapunov::lyapunov_spectrum;
use cocycle_lab::scenarios::{near_identity_field, run_scenario, Scenario};
use cocycle_lab::spd::invariant_metric;
use cocycle_lab::{Cocycle, HyperbolicAutomorphism, LeafKind, LeafPair, LeafSelector, MatrixField, TorusPoint};

fn cat() -> Arc<HyperbolicAutomorphism> {
    Arc::new(HyperbolicAutomorphism::cat_map())
}

fn constant(a: Mat) -> Cocycle {
    Cocycle::new(cat(), Arc::new(MatrixField::constant(a).unwrap()))
}

fn point() -> impl Strategy<Value = TorusPoint> {
    (0.0f64..1.0, 0.0f64..1.0).prop_map(|(a, b)| TorusPoint::new(&[a, b]))
}

/// Well-conditioned invertible 2×2 matrices.
fn conditioned() -> impl Strategy<Value = Mat> {
    prop::array::uniform4(-1.0f64..1.0)
        .prop_map(|v| Mat::from_row_slice(2, 2, &v) * 0.4 + Mat::identity(2, 2))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn base_steps_compose_exactly(x in point(), a in -200i64..200, b in -200i64..200) {
        let sys = HyperbolicAutomorphism::cat_map();
        prop_assert_eq!(sys.step(&sys.step(&x, a), b), sys.step(&x, a + b));
    }

    #[test]
    fn chart_orbits_contract(x in point(), t in -0.1f64..0.1, n in 1i64..=30) {
        let sys = HyperbolicAutomorphism::cat_map();
        let u = sys.direction_coords(LeafSelector::stable(0)).unwrap();
        let pair = LeafPair::new(x, LeafKind::Stable, &u * 0.0, &u * t);
        let len = pair.advanced(&sys, n).length();
        prop_assert!(len <= sys.nu().powi(n as i32) * t.abs() * (1.0 + 1e-9));
    }

    #[test]
    fn cocycle_identity(x in point(), a in -1000i64..=1000, b in -1000i64..=1000) {
        let coc = Cocycle::new(cat(), Arc::new(near_identity_field()));
        let whole = coc.iterate(&x, a + b).unwrap();
        let parts = coc.iterate(&coc.base.step(&x, a), b).unwrap() * coc.iterate(&x, a).unwrap();
        prop_assert!((&whole - &parts).norm() <= 1e-9 * whole.norm(), "{}", (&whole - &parts).norm() / whole.norm());
    }

    #[test]
    fn constant_iterates_are_powers(a in conditioned(), n in 0usize..40) {
        let it = constant(a.clone()).iterate(&TorusPoint::new(&[0.3, 0.9]), n as i64).unwrap();
        let pow = a.pow(n as u32);
        prop_assert!((&it - &pow).norm() <= 1e-12 * pow.norm());
    }

    #[test]
    fn fiber_bunching_is_monotone_in_beta(s in 1.0f64..2.5, b1 in 0.05f64..1.0, b2 in 0.05f64..1.0) {
        // ν < 1, so the tested product can only shrink as β grows
        let (lo, hi) = if b1 <= b2 { (b1, b2) } else { (b2, b1) };
        let coc = constant(Mat::from_row_slice(2, 2, &[s, 0.3, 0.0, 1.0 / s]));
        let at = |beta: f64| growth_report(&coc, GrowthKind::FiberBunching, &GrowthOptions { beta, samples: 2, ..Default::default() }).unwrap();
        let (r_lo, r_hi) = (at(lo), at(hi));
        prop_assert!(r_hi.theta_hat <= r_lo.theta_hat * (1.0 + 1e-12));
        if r_lo.verdict == Verdict::Pass {
            prop_assert_eq!(r_hi.verdict, Verdict::Pass);
        }
    }

    #[test]
    fn lyapunov_spectrum_is_conjugation_invariant(h in conditioned(), a in 1.5f64..3.0, b in 0.2f64..0.6, x in point()) {
        let d = Mat::from_row_slice(2, 2, &[a, 0.0, 0.0, b]);
        let conj = &h * &d * h.clone().try_inverse().unwrap();
        let s = lyapunov_spectrum(&constant(conj), &x, 10_000, 1).unwrap();
        prop_assert!((s[0] - a.ln()).abs() < 1e-6 && (s[1] - b.ln()).abs() < 1e-6, "{s:?}");
    }

    #[test]
    fn jordan_flag_ignores_scaling(theta in 0.1f64..3.0, rho in 0.5f64..2.0, c in 0.1f64..10.0, h in conditioned()) {
        let mut a = Mat::zeros(3, 3);
        a.view_mut((0, 0), (2, 2)).copy_from(&rotation(theta));
        a[(2, 2)] = 1.0;
        a[(0, 2)] = 0.7;
        let mut hh = Mat::identity(3, 3);
        hh.view_mut((1, 1), (2, 2)).copy_from(&h);
        let a = &hh * a * hh.clone().try_inverse().unwrap() * rho;
        let (f1, r1) = jordan_flag(&a).unwrap();
        let (f2, r2) = jordan_flag(&(&a * c)).unwrap();
        prop_assert!(f1.max_angle_to(&f2) < 1e-10);
        prop_assert!((r2 / r1 - c).abs() < 1e-10 * c);
    }

    #[test]
    fn block_reassembly(v in prop::array::uniform9(-1.0f64..1.0), x in point()) {
        let mut a = Mat::zeros(3, 3);
        for i in 0..3 {
            for j in i..3 {
                a[(i, j)] = v[3 * i + j];
            }
            a[(i, i)] += 2.0;
        }
        let flag = Flag::from_columns(&Mat::identity(3, 3), &[1, 2, 3]).unwrap();
        let dec = block_decompose(&constant(a.clone()), Arc::new(flag), None, 4, 0).unwrap();
        prop_assert!((dec.reassemble(&x) - &a).amax() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    #[test]
    fn metric_residual_does_not_grow(theta in 0.1f64..3.0, h in conditioned(), x in point()) {
        let a = &h * rotation(theta) * h.clone().try_inverse().unwrap();
        let coc = constant(a);
        let short = invariant_metric(&coc, &x, 8, 200).unwrap();
        let long = invariant_metric(&coc, &x, 32, 200).unwrap();
        prop_assert!(long.invariance_residual <= short.invariance_residual + 1e-9);
        prop_assert!(long.radius + 1e-9 >= short.radius);
    }

    #[test]
    fn scenario_output_is_deterministic(seed in any::<u64>()) {
        let mut cfg = ScenarioConfig::default();
        cfg.seed = seed;
        cfg.holonomy.samples = 4;
        cfg.pw.samples = 40;
        for sc in [Scenario::HolonomyVerify, Scenario::PwDemo] {
            let serial = run_scenario(sc, &cfg, true).unwrap();
            let again = run_scenario(sc, &cfg, true).unwrap();
            let parallel = run_scenario(sc, &cfg, false).unwrap();
            for ((p, q), r) in serial.tables.iter().zip(&again.tables).zip(&parallel.tables) {
                prop_assert_eq!(p.to_csv().unwrap(), q.to_csv().unwrap());
                prop_assert_eq!(p.to_csv().unwrap(), r.to_csv().unwrap());
            }
            prop_assert_eq!(&serial.checks, &again.checks);
        }
    }
}
