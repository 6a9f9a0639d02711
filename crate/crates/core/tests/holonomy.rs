use std::sync::Arc;

use cocycle_lab::base::LeafOrbit;
use cocycle_lab::holonomy::{
    holonomy_pair, holonomy_property_suite, stable_holonomy, unstable_holonomy, HolonomyOptions,
};
use cocycle_lab::linalg::{spectral_norm, Mat};
use cocycle_lab::{Cocycle, HyperbolicAutomorphism, LabError, LeafKind, LeafPair, LeafSelector, MatrixField, TorusPoint};

fn near_identity() -> Cocycle {
    let f = MatrixField::constant(Mat::identity(2, 2))
        .unwrap()
        .with_term(&[1, 0], Mat::from_row_slice(2, 2, &[0.1, 0.05, -0.02, 0.03]), Mat::zeros(2, 2))
        .unwrap()
        .with_term(&[0, 1], Mat::zeros(2, 2), Mat::from_row_slice(2, 2, &[0.0, 0.08, 0.04, -0.06]))
        .unwrap();
    Cocycle::new(Arc::new(HyperbolicAutomorphism::cat_map()), Arc::new(f))
}

fn constant(a: Mat) -> Cocycle {
    Cocycle::new(Arc::new(HyperbolicAutomorphism::cat_map()), Arc::new(MatrixField::constant(a).unwrap()))
}

/// (A^N_y)^{-1} A^N_x by direct products along the leaf orbit.
fn brute(coc: &Cocycle, pair: &LeafPair, n: usize) -> Mat {
    let mut orbit = LeafOrbit::new(&coc.base, pair.anchor.clone(), pair.kind, vec![pair.from.clone(), pair.to.clone()]);
    let mut ax = Mat::identity(2, 2);
    let mut ay = Mat::identity(2, 2);
    for _ in 0..n {
        ax = coc.eval(&orbit.point(0)) * ax;
        ay = coc.eval(&orbit.point(1)) * ay;
        orbit.step_by(1);
    }
    ay.try_inverse().unwrap() * ax
}

#[test]
fn constant_generator_gives_identity() {
    let coc = constant(cocycle_lab::field::rotation(0.4) * 1.3);
    let x = TorusPoint::new(&[0.2, 0.7]);
    let y = coc.base.leaf_point(&x, LeafSelector::stable(0), 0.2).unwrap();
    let h = stable_holonomy(&coc, &x, &y, &HolonomyOptions::default()).unwrap();
    assert!((h.matrix - Mat::identity(2, 2)).norm() < 1e-14);
    let y = coc.base.leaf_point(&x, LeafSelector::unstable(0), -0.2).unwrap();
    let h = unstable_holonomy(&coc, &x, &y, &HolonomyOptions::default()).unwrap();
    assert!((h.matrix - Mat::identity(2, 2)).norm() < 1e-14);
}

#[test]
fn strongly_non_conformal_constant_does_not_converge() {
    let coc = constant(Mat::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 0.5])));
    let x = TorusPoint::new(&[0.2, 0.7]);
    let y = coc.base.leaf_point(&x, LeafSelector::stable(0), 0.1).unwrap();
    let err = stable_holonomy(&coc, &x, &y, &HolonomyOptions::default()).unwrap_err();
    assert!(matches!(err, LabError::NoConvergence { .. }));
}

#[test]
fn equal_points_give_exact_identity() {
    let coc = near_identity();
    let x = TorusPoint::new(&[0.31, 0.92]);
    let h = unstable_holonomy(&coc, &x, &x, &HolonomyOptions::default()).unwrap();
    assert_eq!(h.matrix, Mat::identity(2, 2));
}

#[test]
fn matches_longer_brute_product_and_holder_bound() {
    let coc = near_identity();
    let opts = HolonomyOptions::default();
    for (i, t) in [0.05, -0.05, 0.2].into_iter().enumerate() {
        let x = TorusPoint::new(&[0.13 * i as f64 + 0.05, 0.77]);
        let y = coc.base.leaf_point(&x, LeafSelector::stable(0), t).unwrap();
        let h = stable_holonomy(&coc, &x, &y, &opts).unwrap();
        let pair = LeafPair::from_points(&coc.base, &x, &y, LeafKind::Stable).unwrap();
        let b = brute(&coc, &pair, h.n_used + 20);
        assert!(spectral_norm(&(&h.matrix - b)) < 10.0 * opts.tol, "t = {t}");
        // analytic cocycle: ‖H − Id‖ ≤ c·|t| with c of order the generator's gradient
        assert!(spectral_norm(&(h.matrix - Mat::identity(2, 2))) <= 5.0 * t.abs());
    }
}

#[test]
fn unstable_holonomy_is_stable_holonomy_of_time_reversal() {
    let coc = near_identity();
    let rev = coc.time_reversed().unwrap();
    let opts = HolonomyOptions::default().to_noise_floor();
    let x = TorusPoint::new(&[0.61, 0.08]);
    let y = coc.base.leaf_point(&x, LeafSelector::unstable(0), 0.15).unwrap();
    let hu = unstable_holonomy(&coc, &x, &y, &opts).unwrap();
    let hs = stable_holonomy(&rev, &x, &y, &opts).unwrap();
    assert!(spectral_norm(&(hu.matrix - hs.matrix)) < 1e-9);
}

#[test]
fn schedule_independence() {
    let coc = near_identity();
    let x = TorusPoint::new(&[0.4, 0.4]);
    let c = coc.base.direction_coords(LeafSelector::stable(0)).unwrap() * 0.1;
    let pair = LeafPair::new(x, LeafKind::Stable, c.clone() * 0.0, c);
    let loose = HolonomyOptions { tol: 1e-10, ..Default::default() };
    let a = holonomy_pair(&coc, &pair, &loose).unwrap();
    // a shifted schedule: conjugate the holonomy of the advanced pair back by (H3)
    let moved = pair.advanced(&coc.base, 3);
    let hm = holonomy_pair(&coc, &moved, &loose.to_noise_floor()).unwrap();
    let (ax, ay) = cocycle_lab::holonomy::pair_iterates(&coc, &pair, 3);
    let b = ay.try_inverse().unwrap() * hm.matrix * ax;
    assert!(spectral_norm(&(a.matrix - b)) < 10.0 * loose.tol);
}

#[test]
fn suite_on_constant_cocycle_is_exact() {
    let coc = constant(cocycle_lab::field::rotation(0.9));
    let r = holonomy_property_suite(&coc, 5, &HolonomyOptions::default(), 3, true).unwrap();
    assert!(r.h2_max < 1e-12 && r.h3_max < 1e-12);
    assert!(r.h4_slope.is_none());
}

#[test]
fn suite_on_near_identity_cocycle() {
    let coc = near_identity();
    let opts = HolonomyOptions::default();
    let r = holonomy_property_suite(&coc, 50, &opts, 11, false).unwrap();
    assert!(r.h2_max < 10.0 * opts.tol, "{}", r.h2_max);
    assert!(r.h3_max < 10.0 * opts.tol, "{}", r.h3_max);
    assert!(r.h4_slope.unwrap() >= 0.9);
}
