use std::sync::Arc;

use cocycle_lab::field::{rotation, TwistedCoboundary};
use cocycle_lab::holonomy::HolonomyOptions;
use cocycle_lab::linalg::{Mat, Vector};
use cocycle_lab::transport::{ParamSpace, TransportSection};
use cocycle_lab::twisted::{
    solve_twisted_coboundary, trajectory_sum, twisted_difference, twisted_holonomy_apply, twisted_invariance_residual,
    Section, VectorAsSection,
};
use cocycle_lab::{Cocycle, HyperbolicAutomorphism, LabError, LeafSelector, MatrixField, TorusPoint, VectorField, VectorSection};

fn cat() -> Arc<HyperbolicAutomorphism> {
    Arc::new(HyperbolicAutomorphism::cat_map())
}

fn constant_twist(m: Mat) -> Cocycle {
    Cocycle::new(cat(), Arc::new(MatrixField::constant(m).unwrap()))
}

fn near_identity_twist() -> Cocycle {
    let f = MatrixField::constant(rotation(0.3))
        .unwrap()
        .with_term(&[1, 1], Mat::from_row_slice(2, 2, &[0.05, 0.02, 0.0, -0.03]), Mat::zeros(2, 2))
        .unwrap();
    Cocycle::new(cat(), Arc::new(f))
}

fn analytic_phi() -> Arc<dyn VectorSection> {
    Arc::new(
        VectorField::constant(&[0.1, -0.2])
            .with_term(&[1, 0], &[0.3, 0.0], &[0.0, 0.2])
            .with_term(&[0, 1], &[0.0, -0.1], &[0.15, 0.05]),
    )
}

#[test]
fn trajectory_sums_match_closed_forms() {
    let x = TorusPoint::new(&[0.3, 0.4]);
    let v = [1.5, -0.5];
    let phi = VectorField::constant(&v);
    let id = constant_twist(Mat::identity(2, 2));
    assert_eq!(trajectory_sum(&id, &VectorField::zero(2), &x, 9).unwrap(), Vector::zeros(2));
    assert!((trajectory_sum(&id, &phi, &x, 7).unwrap() - Vector::from_row_slice(&v) * 7.0).norm() < 1e-13);
    let two = constant_twist(Mat::identity(2, 2) * 2.0);
    for n in 1..20 {
        let want = Vector::from_row_slice(&v) * (2.0 - 2f64.powi(1 - n));
        assert!((trajectory_sum(&two, &phi, &x, n as usize).unwrap() - want).norm() < 1e-13);
    }
}

#[test]
fn forward_series_limit_and_failure() {
    let x = TorusPoint::new(&[0.3, 0.4]);
    let phi = VectorField::constant(&[1.0, 2.0]);
    let opts = HolonomyOptions::default();
    let eta = solve_twisted_coboundary(&constant_twist(Mat::identity(2, 2) * 2.0), &phi, &x, &opts).unwrap();
    assert!((eta - Vector::from_row_slice(&[2.0, 4.0])).norm() < 1e-9);
    assert_eq!(solve_twisted_coboundary(&constant_twist(rotation(0.5)), &VectorField::zero(2), &x, &opts).unwrap(), Vector::zeros(2));
    let err = solve_twisted_coboundary(&constant_twist(rotation(0.5)), &phi, &x, &opts).unwrap_err();
    assert!(matches!(err, LabError::NoConvergence { .. }));
}

#[test]
fn forward_solution_satisfies_equation() {
    // dominated twist: F = 2·R(x)-ish, so (F^n)^{-1} decays
    let f = MatrixField::constant(rotation(0.2) * 2.0)
        .unwrap()
        .with_term(&[1, 0], Mat::from_row_slice(2, 2, &[0.1, 0.0, 0.05, 0.0]), Mat::zeros(2, 2))
        .unwrap();
    let twist = Cocycle::new(cat(), Arc::new(f));
    let phi = analytic_phi();
    let opts = HolonomyOptions::default();
    for i in 0..5 {
        let x = TorusPoint::new(&[0.17 * i as f64, 0.31 + 0.1 * i as f64]);
        let fx = twist.base.step(&x, 1);
        let a = solve_twisted_coboundary(&twist, phi.as_ref(), &x, &opts).unwrap();
        let b = solve_twisted_coboundary(&twist, phi.as_ref(), &fx, &opts).unwrap();
        let r = phi.eval(&x) - &a + twist.eval_inv(&x) * b;
        assert!(r.norm() < 10.0 * opts.tol, "{}", r.norm());
    }
}

#[test]
fn twisted_differences_vanish_trivially_and_compose() {
    let twist = near_identity_twist();
    let opts = HolonomyOptions::default();
    let x = TorusPoint::new(&[0.21, 0.64]);
    let dir = LeafSelector::stable(0);
    assert_eq!(twisted_difference(&twist, analytic_phi(), &x, &x, &opts).unwrap(), Vector::zeros(2));
    let y = twist.base.leaf_point(&x, dir, 0.07).unwrap();
    let zero: Arc<dyn VectorSection> = Arc::new(VectorField::zero(2));
    assert!(twisted_difference(&twist, zero, &x, &y, &opts).unwrap().norm() == 0.0);
    let z = twist.base.leaf_point(&x, dir, -0.11).unwrap();
    // Φ_{z,x} = Φ_{y,x} + H_{y,x} Φ_{z,y}
    let phi = analytic_phi();
    let zx = twisted_difference(&twist, phi.clone(), &x, &z, &opts).unwrap();
    let yx = twisted_difference(&twist, phi.clone(), &x, &y, &opts).unwrap();
    let zy = twisted_difference(&twist, phi.clone(), &y, &z, &opts).unwrap();
    let hyx = cocycle_lab::holonomy::stable_holonomy(&twist, &y, &x, &opts.to_noise_floor()).unwrap();
    assert!((zx - yx - hyx.matrix * zy).norm() < 10.0 * opts.tol);
}

#[test]
fn twisted_holonomies_compose() {
    let twist = near_identity_twist();
    let opts = HolonomyOptions::default();
    let phi = analytic_phi();
    let dir = LeafSelector::stable(0);
    let x = TorusPoint::new(&[0.83, 0.12]);
    let v = Vector::from_row_slice(&[0.4, -1.1]);
    assert!((twisted_holonomy_apply(&twist, phi.clone(), &x, &x, &v, &opts).unwrap() - &v).norm() == 0.0);
    let y = twist.base.leaf_point(&x, dir, 0.13).unwrap();
    let z = twist.base.leaf_point(&x, dir, 0.02).unwrap();
    let via = twisted_holonomy_apply(&twist, phi.clone(), &y, &z, &twisted_holonomy_apply(&twist, phi.clone(), &x, &y, &v, &opts).unwrap(), &opts).unwrap();
    let direct = twisted_holonomy_apply(&twist, phi.clone(), &x, &z, &v, &opts).unwrap();
    assert!((via - direct).norm() < 10.0 * opts.tol);
    let zero: Arc<dyn VectorSection> = Arc::new(VectorField::zero(2));
    let plain = cocycle_lab::holonomy::stable_holonomy(&twist, &x, &y, &opts.to_noise_floor()).unwrap();
    assert!((twisted_holonomy_apply(&twist, zero, &x, &y, &v, &opts).unwrap() - plain.matrix * &v).norm() < 1e-14);
}

#[test]
fn untwisted_periodic_obstruction_vanishes() {
    // F = Id, d = 1: a coboundary u − u∘f sums to zero over a periodic orbit
    let base = cat();
    let u: Arc<dyn VectorSection> = Arc::new(VectorField::constant(&[0.0]).with_term(&[1, 2], &[0.7], &[0.2]));
    let id: Arc<dyn cocycle_lab::Generator> = Arc::new(MatrixField::constant(Mat::identity(1, 1)).unwrap());
    let phi = TwistedCoboundary { base: base.clone(), twist: id.clone(), eta: u };
    let twist = Cocycle::new(base.clone(), id);
    let p = TorusPoint::new(&[0.25, 0.5]);
    let period = (1..30).find(|&n| base.step(&p, n) == p).unwrap();
    let s = trajectory_sum(&twist, &phi, &p, period as usize).unwrap();
    assert!(s.norm() < 1e-12, "{s}");
}

fn rotation_coboundary_setup() -> (Cocycle, Arc<dyn Section>, Arc<dyn VectorSection>) {
    let base = cat();
    let r: Arc<dyn cocycle_lab::Generator> = Arc::new(MatrixField::constant(rotation(0.9)).unwrap());
    let eta0: Arc<dyn VectorSection> = Arc::new(
        VectorField::constant(&[0.5, 0.0])
            .with_term(&[1, 0], &[0.3, 0.1], &[0.0, 0.2])
            .with_term(&[1, -1], &[0.0, 0.2], &[0.1, 0.0]),
    );
    let phi: Arc<dyn VectorSection> = Arc::new(TwistedCoboundary { base: base.clone(), twist: r.clone(), eta: eta0.clone() });
    (Cocycle::new(base, r), Arc::new(VectorAsSection(phi)), eta0)
}

#[test]
fn transport_solution_for_rotation_twist() {
    let (twist, phi, eta0) = rotation_coboundary_setup();
    let opts = HolonomyOptions::default();
    let mut params = ParamSpace::new();
    let eta = TransportSection::solve(twist.clone(), phi.clone(), TorusPoint::new(&[0.37, 0.59]), &mut params, &opts).unwrap();
    assert_eq!(params.count(), 0);
    let pts = cocycle_lab::sampling::sample_points(2, 30, 5, 9);
    for x in &pts {
        let ex = eta.eval(x).unwrap();
        let efx = eta.eval(&twist.base.step(x, 1)).unwrap();
        let r = phi.eval(x).unwrap() - &ex + twist.eval_inv(x) * efx;
        assert!(r.norm() < 1e-9, "{}", r.norm());
        // the rotation has no fixed vectors, so the solution is unique
        assert!((ex.column(0) - eta0.eval(x)).norm() < 1e-9);
    }
    let rep = twisted_invariance_residual(&twist, phi.as_ref(), &eta, 30, &opts, 3, false).unwrap();
    assert!(rep.max_residual < 1e-8, "{}", rep.max_residual);
    assert!(rep.holder_slope.unwrap() >= 0.9);
}

#[test]
fn identity_twist_leaves_constants_free() {
    let base = cat();
    let id: Arc<dyn cocycle_lab::Generator> = Arc::new(MatrixField::constant(Mat::identity(2, 2)).unwrap());
    let eta0: Arc<dyn VectorSection> = Arc::new(VectorField::constant(&[0.0, 0.0]).with_term(&[2, 1], &[0.3, 0.1], &[0.0, 0.2]));
    let phi: Arc<dyn VectorSection> = Arc::new(TwistedCoboundary { base: base.clone(), twist: id.clone(), eta: eta0.clone() });
    let phi: Arc<dyn Section> = Arc::new(VectorAsSection(phi));
    let twist = Cocycle::new(base, id);
    let mut params = ParamSpace::new();
    let x0 = TorusPoint::new(&[0.1, 0.8]);
    let eta = TransportSection::solve(twist.clone(), phi.clone(), x0, &mut params, &HolonomyOptions::default()).unwrap();
    assert_eq!(params.count(), 2);
    let theta = params.solve();
    for x in cocycle_lab::sampling::sample_points(2, 10, 1, 1) {
        let ex = eta.eval(&x).unwrap() * &theta;
        let efx = eta.eval(&twist.base.step(&x, 1)).unwrap() * &theta;
        let r = phi.eval(&x).unwrap().column(0) - &ex + efx;
        assert!(r.norm() < 1e-9);
    }
}
