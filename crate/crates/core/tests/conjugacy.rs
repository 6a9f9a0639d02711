use std::sync::Arc;
use std::time::Instant;

use cocycle_lab::conjugacy::{
    conjugacy_residual, exponent_match_check, inductive_block_solve, intertwining_residual, ConjugacySection, SolveOptions,
};
use cocycle_lab::field::{rotation, Conjugated};
use cocycle_lab::flag::{block_decompose, jordan_flag, Flag};
use cocycle_lab::holonomy::HolonomyOptions;
use cocycle_lab::linalg::Mat;
use cocycle_lab::{Cocycle, Generator, HyperbolicAutomorphism, LabError, MatrixField, TorusPoint};

fn cat() -> Arc<HyperbolicAutomorphism> {
    Arc::new(HyperbolicAutomorphism::cat_map())
}

fn constant(a: Mat) -> Cocycle {
    Cocycle::new(cat(), Arc::new(MatrixField::constant(a).unwrap()))
}

fn jordan(d: usize) -> Mat {
    Mat::from_fn(d, d, |i, j| if i == j || j == i + 1 { 1.0 } else { 0.0 })
}

fn rot_plus_one(rho: f64, theta: f64) -> Mat {
    let mut a = Mat::zeros(3, 3);
    a.view_mut((0, 0), (2, 2)).copy_from(&rotation(theta));
    a[(2, 2)] = 1.0;
    a * rho
}

/// C₀ = exp(Q N(x) Qᵀ) with N strictly block upper triangular in the flag basis.
fn unipotent_c0(flag: &Flag, amp: f64) -> MatrixField {
    let q = flag.basis(flag.levels() - 1).clone();
    let d = q.nrows();
    let start: Vec<usize> = std::iter::once(0).chain(flag.dims().iter().copied()).collect();
    let level = |r: usize| start.iter().rposition(|&s| s <= r).unwrap();
    let mut field = MatrixField::constant(Mat::identity(d, d)).unwrap();
    let modes: [&[i64]; 3] = [&[1, 0], &[0, 1], &[1, -1]];
    for (t, k) in modes.iter().enumerate() {
        let pattern = |phase: f64| {
            Mat::from_fn(d, d, |r, c| if level(r) < level(c) { amp * (phase + 0.3 * (r + 2 * c + t) as f64).sin() } else { 0.0 })
        };
        let (p, s) = (&q * pattern(1.0) * q.transpose(), &q * pattern(2.5) * q.transpose());
        field = field.with_term(k, p, s).unwrap();
    }
    field
}

fn conjugated(a: &Mat, c0: Arc<dyn Generator>) -> Cocycle {
    let base = cat();
    let ga: Arc<dyn Generator> = Arc::new(MatrixField::constant(a.clone()).unwrap());
    Cocycle::new(base.clone(), Arc::new(Conjugated { base, a: ga, c: c0 }))
}

#[test]
fn jordan_flag_examples() {
    let (flag, rho) = jordan_flag(&rotation(0.7)).unwrap();
    assert_eq!(flag.levels(), 1);
    assert!((rho - 1.0).abs() < 1e-12);
    let (flag, rho) = jordan_flag(&Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).unwrap();
    assert_eq!(flag.dims(), &[1, 2]);
    assert!((rho - 1.0).abs() < 1e-12);
    assert!((flag.basis(0)[(0, 0)].abs() - 1.0).abs() < 1e-12);
    let err = jordan_flag(&Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0])).unwrap_err();
    assert!(matches!(err, LabError::MultipleModuli { .. }));
}

#[test]
fn jordan_flag_of_rotation_plus_line() {
    let a = rot_plus_one(1.05, 0.9);
    let (flag, rho) = jordan_flag(&a).unwrap();
    assert!((rho - 1.05).abs() < 1e-12);
    assert_eq!(flag.levels(), 2);
    for i in 0..flag.levels() {
        let v = flag.basis(i);
        assert!((&a * v - v * (v.transpose() * &a * v)).amax() < 1e-12);
    }
}

#[test]
fn flag_round_trips_through_toml() {
    let (flag, _) = jordan_flag(&jordan(3)).unwrap();
    let text = toml::to_string(&flag).unwrap();
    let back: Flag = toml::from_str(&text).unwrap();
    assert!(flag.max_angle_to(&back) < 1e-12);
}

#[test]
fn jordan_blocks_read_off_the_matrix() {
    let a = Mat::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0]);
    let (flag, _) = jordan_flag(&a).unwrap();
    let dec = block_decompose(&constant(a.clone()), Arc::new(flag), None, 16, 0).unwrap();
    let x = TorusPoint::new(&[0.3, 0.1]);
    let b = dec.blocks(&x);
    assert!((b[0][0][(0, 0)] - 1.0).abs() < 1e-12);
    assert!((b[1][1][(0, 0)] - 1.0).abs() < 1e-12);
    assert!((b[0][1][(0, 0)].abs() - 1.0).abs() < 1e-12);
    assert!(b[1][0][(0, 0)].abs() < 1e-12);
    assert!(dec.triangularity_residual() < 1e-12);

    let r = rotation(0.3) * 2.0;
    let dec = block_decompose(&constant(r.clone()), Arc::new(Flag::trivial(2)), None, 4, 0).unwrap();
    assert!((&dec.blocks(&x)[0][0] - r).amax() < 1e-14);
}

#[test]
fn block_triangular_reassembly() {
    let a = Mat::from_row_slice(4, 4, &[
        1.2, -0.3, 0.7, 0.1, //
        0.4, 0.9, -0.2, 0.5, //
        0.0, 0.0, 1.5, 0.8, //
        0.0, 0.0, 0.0, -0.6,
    ]);
    let e = Mat::identity(4, 4);
    let flag = Flag::from_columns(&e, &[2, 3, 4]).unwrap();
    let metric = Mat::from_row_slice(4, 4, &[2.0, 0.3, 0.0, 0.1, 0.3, 1.0, 0.2, 0.0, 0.0, 0.2, 1.5, 0.0, 0.1, 0.0, 0.0, 1.0]);
    for g in [None, Some(&metric)] {
        let dec = block_decompose(&constant(a.clone()), Arc::new(flag.clone()), g, 16, 1).unwrap();
        assert!(dec.triangularity_residual() < 1e-12);
        let x = TorusPoint::new(&[0.6, 0.2]);
        assert!((dec.reassemble(&x) - &a).amax() < 1e-12);
        let p = dec.projections(&x);
        let sum = p.iter().fold(Mat::zeros(4, 4), |s, q| s + q);
        assert!((sum - Mat::identity(4, 4)).amax() < 1e-10);
        assert!((&p[0] * &p[2]).amax() < 1e-10);
    }
}

#[test]
fn non_invariant_flag_is_rejected() {
    let flag = Flag::from_columns(&Mat::identity(2, 2), &[1, 2]).unwrap();
    let err = block_decompose(&constant(rotation(0.4)), Arc::new(flag), None, 4, 0).unwrap_err();
    assert!(matches!(err, LabError::NotInvariant { index: 1, .. }));
}

#[test]
fn equal_cocycles_give_identity() {
    let a = jordan(2);
    let (flag, _) = jordan_flag(&a).unwrap();
    let flag = Arc::new(flag);
    let da = Arc::new(block_decompose(&constant(a.clone()), flag.clone(), None, 8, 0).unwrap());
    let db = Arc::new(block_decompose(&constant(a.clone()), flag, None, 8, 0).unwrap());
    let id: Vec<Arc<dyn Generator>> = (0..2).map(|_| Arc::new(MatrixField::constant(Mat::identity(1, 1)).unwrap()) as _).collect();
    let c = inductive_block_solve(da, db, id, &SolveOptions::default()).unwrap();
    for x in cocycle_lab::sampling::sample_points(2, 5, 3, 3) {
        assert!((c.eval(&x).unwrap() - Mat::identity(2, 2)).amax() < 1e-9);
    }
}

fn solve_case(a: &Mat, amp: f64) -> (Cocycle, Cocycle, ConjugacySection, Arc<dyn Generator>) {
    let (flag, _) = jordan_flag(a).unwrap();
    let c0: Arc<dyn Generator> = Arc::new(unipotent_c0(&flag, amp));
    let ca = constant(a.clone());
    let cb = conjugated(a, c0.clone());
    let flag = Arc::new(flag);
    let da = Arc::new(block_decompose(&ca, flag.clone(), None, 16, 0).unwrap());
    let db = Arc::new(block_decompose(&cb, flag, None, 16, 0).unwrap());
    let diag: Vec<Arc<dyn Generator>> = da
        .block_dims()
        .iter()
        .map(|&n| Arc::new(MatrixField::constant(Mat::identity(n, n)).unwrap()) as _)
        .collect();
    let c = inductive_block_solve(da, db, diag, &SolveOptions::default()).unwrap();
    (ca, cb, c, c0)
}

#[test]
fn jordan_two_conjugacy_is_recovered() {
    let (ca, cb, c, _) = solve_case(&jordan(2), 0.1);
    let rep = conjugacy_residual(&ca, &cb, &c, 30, 77, false).unwrap();
    assert!(rep.max_residual < 10.0 * HolonomyOptions::default().tol, "{rep:?}");
}

#[test]
fn jordan_three_conjugacy_is_recovered() {
    let t = Instant::now();
    let (ca, cb, c, _) = solve_case(&jordan(3), 0.1);
    let rep = conjugacy_residual(&ca, &cb, &c, 30, 78, false).unwrap();
    assert!(rep.max_residual < 10.0 * HolonomyOptions::default().tol, "{rep:?}");
    eprintln!("jordan 3: {rep:?} in {:?}", t.elapsed());
}

#[test]
fn rotation_plus_line_conjugacy_and_intertwining() {
    let t = Instant::now();
    let (ca, cb, c, c0) = solve_case(&rot_plus_one(1.05, 0.9), 0.15);
    let rep = conjugacy_residual(&ca, &cb, &c, 30, 79, false).unwrap();
    assert!(rep.max_residual < 1e-8, "{rep:?}");
    let opts = HolonomyOptions::default();
    let it = intertwining_residual(&ca, &cb, &c, 20, &opts, 80, false).unwrap();
    assert!(it.max_residual < 1e-7, "{it:?}");
    let known = ConjugacySection::Closed(c0);
    assert!(conjugacy_residual(&ca, &cb, &known, 30, 79, false).unwrap().max_residual < 1e-12);
    assert!(intertwining_residual(&ca, &cb, &known, 20, &opts, 80, false).unwrap().max_residual < 10.0 * opts.tol);
    let wrong = intertwining_residual(&ca, &cb, &ConjugacySection::identity(3), 20, &opts, 80, false).unwrap();
    assert!(wrong.max_residual > 1e-3);
    eprintln!("rotation ⊕ 1: {rep:?} {it:?} in {:?}", t.elapsed());
}

#[test]
fn conjugacy_residual_examples() {
    let a = jordan(2);
    let ca = constant(a.clone());
    let id = ConjugacySection::identity(2);
    assert_eq!(conjugacy_residual(&ca, &ca, &id, 10, 0, true).unwrap().max_residual, 0.0);
    let (flag, _) = jordan_flag(&a).unwrap();
    let c0: Arc<dyn Generator> = Arc::new(unipotent_c0(&flag, 0.2));
    let cb = conjugated(&a, c0);
    let rep = conjugacy_residual(&ca, &cb, &id, 10, 0, true).unwrap();
    let x = cocycle_lab::sampling::sample_points(2, 1, 0, cocycle_lab::sampling::STREAM_POINTS).remove(0);
    let direct = (cb.eval(&x) - ca.eval(&x)).norm() / cb.eval(&x).norm();
    assert!(rep.max_residual >= direct - 1e-15 && rep.max_residual > 0.0);
}

#[test]
fn singular_conjugacy_is_reported() {
    let ca = constant(jordan(2));
    let sing = ConjugacySection::Closed(Arc::new(ScaledId(1e-13)));
    let err = conjugacy_residual(&ca, &ca, &sing, 3, 0, true).unwrap_err();
    assert!(matches!(err, LabError::SingularC { .. }));
}

struct ScaledId(f64);

impl Generator for ScaledId {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, _x: &TorusPoint) -> Mat {
        Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, self.0])
    }
}

#[test]
fn exponent_match_examples() {
    let x = TorusPoint::new(&[0.41, 0.27]);
    let a = Mat::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 0.5]);
    let ca = constant(a.clone());
    let rep = exponent_match_check(&ca, &ca, &ConjugacySection::identity(2), &x, 2000).unwrap();
    assert_eq!(rep.max_discrepancy, 0.0);

    let c0: Arc<dyn Generator> = Arc::new(
        MatrixField::constant(Mat::identity(2, 2))
            .unwrap()
            .with_term(&[1, 0], Mat::from_row_slice(2, 2, &[0.1, 0.2, -0.1, 0.05]), Mat::from_row_slice(2, 2, &[0.0, 0.1, 0.1, 0.0]))
            .unwrap(),
    );
    let cb = conjugated(&a, c0.clone());
    let rep = exponent_match_check(&ca, &cb, &ConjugacySection::Closed(c0.clone()), &x, 10_000).unwrap();
    assert!(rep.max_discrepancy < 5e-3, "{rep:?}");
    assert!((rep.exponents_a[0] - 2f64.ln()).abs() < 1e-12 && (rep.exponents_a[1] + 2f64.ln()).abs() < 1e-12);

    let r = rotation(0.8);
    let cr = constant(r.clone());
    let rep = exponent_match_check(&cr, &conjugated(&r, c0.clone()), &ConjugacySection::Closed(c0), &x, 10_000).unwrap();
    assert!(rep.exponents_a.iter().chain(&rep.exponents_b).all(|e| e.abs() < 5e-3), "{rep:?}");
}
