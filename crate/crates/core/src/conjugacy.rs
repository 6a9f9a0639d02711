//! Conjugacies between block-triangular cocycles: the inductive off-diagonal
//! solve, and residual checks for conjugacy, holonomy intertwining and
//! Lyapunov exponents.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::base::{HyperbolicAutomorphism, LeafKind, LeafOrbit, LeafPair, LeafSelector, TorusPoint};
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::field::Generator;
use crate::flag::BlockDecomposition;
use crate::growth::{growth_report, GrowthKind, GrowthOptions, Verdict};
use crate::holonomy::{holonomy_pair, HolonomyOptions};
use crate::linalg::{condition_number, kron, Mat, Vector};
use crate::sampling::{map_samples, rng_for, sample_points, STREAM_LEAF, STREAM_POINTS};
use crate::transport::{ParamSpace, TransportSection};
use crate::twisted::{pad_cols, Section};

const SINGULAR_COND: f64 = 1e12;

/// x ↦ C(x), either in closed form or assembled from solved blocks.
#[derive(Clone)]
pub enum ConjugacySection {
    Closed(Arc<dyn Generator>),
    Composite(Arc<SolvedConjugacy>),
}

impl std::fmt::Debug for ConjugacySection {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConjugacySection::Closed(_) => f.write_str("ConjugacySection::Closed"),
            ConjugacySection::Composite(s) => write!(f, "ConjugacySection::Composite({} params)", s.theta.len() - 1),
        }
    }
}

impl ConjugacySection {
    pub fn identity(d: usize) -> Self {
        ConjugacySection::Closed(Arc::new(crate::field::MatrixField::constant(Mat::identity(d, d)).expect("identity")))
    }

    pub fn eval(&self, x: &TorusPoint) -> Result<Mat> {
        match self {
            ConjugacySection::Closed(g) => Ok(g.eval(x)),
            ConjugacySection::Composite(s) => s.eval(x),
        }
    }
}

/// Off-diagonal blocks solved as parameter-affine sections, plus the chosen parameters.
pub struct SolvedConjugacy {
    dec_a: Arc<BlockDecomposition>,
    dec_b: Arc<BlockDecomposition>,
    blocks: Vec<Vec<Option<Arc<dyn Section>>>>,
    theta: Vector,
    constraint_residual: f64,
}

impl SolvedConjugacy {
    /// Number of free parameters left by the stage solves.
    pub fn param_count(&self) -> usize {
        self.theta.len() - 1
    }

    /// Largest violation of the collected parameter constraints at the chosen θ.
    pub fn constraint_residual(&self) -> f64 {
        self.constraint_residual
    }

    /// The block C^{j,i}(x), j ≤ i.
    pub fn block(&self, j: usize, i: usize, x: &TorusPoint) -> Result<Mat> {
        let dims = self.dec_b.block_dims();
        let dims_a = self.dec_a.block_dims();
        match &self.blocks[j][i] {
            Some(s) => {
                let v = pad_cols(&s.eval(x)?, self.theta.len()) * &self.theta;
                Ok(Mat::from_column_slice(dims[j], dims_a[i], v.as_slice()))
            }
            None => Ok(Mat::zeros(dims[j], dims_a[i])),
        }
    }

    pub fn eval(&self, x: &TorusPoint) -> Result<Mat> {
        let k = self.blocks.len();
        let mut grid = Vec::with_capacity(k);
        for j in 0..k {
            let mut row = Vec::with_capacity(k);
            for i in 0..k {
                row.push(self.block(j, i, x)?);
            }
            grid.push(row);
        }
        let (ua, ub) = (self.dec_a.complements(x), self.dec_b.complements(x));
        let d = ua[0].nrows();
        let mut out = Mat::zeros(d, d);
        for (j, row) in grid.iter().enumerate() {
            for (i, c) in row.iter().enumerate() {
                out += &ub[j] * c * ua[i].transpose() * self.dec_a.metric();
            }
        }
        Ok(out)
    }
}

/// vec(L X R) = (Rᵀ ⊗ L) vec X, applied to each parameter column.
fn sandwich(l: &Mat, v: &Mat, r: &Mat) -> Mat {
    kron(&r.transpose(), l) * v
}

/// F_x = (A^{ii}_x)^{−ᵀ} ⊗ B^{jj}_x on column-major vec(L(U^i, U^j)).
struct KronTwist {
    a: Arc<dyn Generator>,
    b: Arc<dyn Generator>,
}

impl Generator for KronTwist {
    fn dim(&self) -> usize {
        self.a.dim() * self.b.dim()
    }

    fn eval(&self, x: &TorusPoint) -> Mat {
        kron(&self.a.eval_inv(x).transpose(), &self.b.eval(x))
    }

    fn eval_inv(&self, x: &TorusPoint) -> Mat {
        kron(&self.a.eval(x).transpose(), &self.b.eval_inv(x))
    }

    fn is_constant(&self) -> bool {
        self.a.is_constant() && self.b.is_constant()
    }
}

/// A generator's values as a one-column vec section.
struct GeneratorSection(Arc<dyn Generator>, usize);

impl Section for GeneratorSection {
    fn rows(&self) -> usize {
        self.1 * self.1
    }

    fn cols(&self) -> usize {
        1
    }

    fn eval(&self, x: &TorusPoint) -> Result<Mat> {
        let m = self.0.eval(x);
        Ok(Mat::from_column_slice(m.len(), 1, m.as_slice()))
    }
}

/// D_x = (B^{jj}_x)^{-1} [Σ_{m=j}^{i−1} C^{jm}_{fx} A^{mi}_x − Σ_{m=j+1}^{i} B^{jm}_x C^{mi}_x].
struct StageForcing {
    dec_a: Arc<BlockDecomposition>,
    dec_b: Arc<BlockDecomposition>,
    known: Vec<Vec<Option<Arc<dyn Section>>>>,
    j: usize,
    i: usize,
    cols: usize,
}

impl StageForcing {
    fn combine(
        &self,
        x: &TorusPoint,
        c_fx: &dyn Fn(usize) -> Mat,
        c_x: &dyn Fn(usize) -> Mat,
    ) -> Mat {
        let (j, i) = (self.j, self.i);
        let a = self.dec_a.blocks(x);
        let b = self.dec_b.blocks(x);
        let dims_b = self.dec_b.block_dims();
        let mut acc = Mat::zeros(dims_b[j] * a[i][i].ncols(), self.cols);
        for m in j..i {
            acc += sandwich(&Mat::identity(dims_b[j], dims_b[j]), &pad_cols(&c_fx(m), self.cols), &a[m][i]);
        }
        for m in j + 1..=i {
            acc -= sandwich(&b[j][m], &pad_cols(&c_x(m), self.cols), &Mat::identity(a[i][i].ncols(), a[i][i].ncols()));
        }
        let b_inv = b[j][j].clone().try_inverse().expect("diagonal block is invertible");
        sandwich(&b_inv, &acc, &Mat::identity(a[i][i].ncols(), a[i][i].ncols()))
    }
}

impl Section for StageForcing {
    fn rows(&self) -> usize {
        self.dec_b.block_dims()[self.j] * self.dec_a.block_dims()[self.i]
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn eval(&self, x: &TorusPoint) -> Result<Mat> {
        let fx = self.dec_a.cocycle().base.step(x, 1);
        let (j, i) = (self.j, self.i);
        let mut at_fx = Vec::new();
        for m in j..i {
            at_fx.push(self.known[j][m].as_ref().expect("solved earlier").eval(&fx)?);
        }
        let mut at_x = Vec::new();
        for m in j + 1..=i {
            at_x.push(self.known[m][i].as_ref().expect("solved earlier").eval(x)?);
        }
        Ok(self.combine(x, &|m| at_fx[m - j].clone(), &|m| at_x[m - j - 1].clone()))
    }

    fn eval_leg(&self, sys: &HyperbolicAutomorphism, pair: &LeafPair, lo: i64, hi: i64) -> Result<(Vec<Mat>, Vec<Mat>)> {
        let (j, i) = (self.j, self.i);
        // C^{jm} one step ahead, C^{mi} in place
        let mut ahead = Vec::new();
        for m in j..i {
            ahead.push(self.known[j][m].as_ref().expect("solved earlier").eval_leg(sys, pair, lo, hi + 1)?);
        }
        let mut here = Vec::new();
        for m in j + 1..=i {
            here.push(self.known[m][i].as_ref().expect("solved earlier").eval_leg(sys, pair, lo, hi)?);
        }
        let mut orbit = LeafOrbit::new(sys, pair.anchor.clone(), pair.kind, vec![pair.from.clone(), pair.to.clone()]);
        orbit.step_by(lo);
        let mut out = (Vec::new(), Vec::new());
        for (n, _) in (lo..=hi).enumerate() {
            for slot in 0..2 {
                let x = orbit.point(slot);
                let pick = |v: &(Vec<Mat>, Vec<Mat>), k: usize| if slot == 0 { v.0[k].clone() } else { v.1[k].clone() };
                let val = self.combine(&x, &|m| pick(&ahead[m - j], n + 1), &|m| pick(&here[m - j - 1], n));
                if slot == 0 {
                    out.0.push(val);
                } else {
                    out.1.push(val);
                }
            }
            orbit.step_by(1);
        }
        Ok(out)
    }
}

/// Options for [`inductive_block_solve`].
#[derive(Clone, Debug)]
pub struct SolveOptions {
    /// Target conjugacy residual is 10·tol; holonomies are computed to tol/100.
    pub tol: f64,
    pub n_max: usize,
    /// Reference point for the transport solves.
    pub reference: TorusPoint,
    /// Extra points at which stage equations constrain free parameters.
    pub check_points: usize,
    pub seed: u64,
    pub serial: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            n_max: 2000,
            reference: TorusPoint::new(&[std::f64::consts::FRAC_1_PI, std::f64::consts::E / 10.0]),
            check_points: 3,
            seed: 0,
            serial: false,
        }
    }
}

impl SolveOptions {
    pub fn holonomy(&self) -> HolonomyOptions {
        HolonomyOptions { tol: self.tol * 0.01, n_max: self.n_max, ..HolonomyOptions::default() }
    }
}

fn check_twist_bounded(twist: &Cocycle, opts: &SolveOptions) -> Result<()> {
    let g = GrowthOptions { n_max: 32, samples: 8, seed: opts.seed, serial: opts.serial, ..GrowthOptions::default() };
    let rep = growth_report(twist, GrowthKind::Bounded, &g)?;
    if rep.verdict != Verdict::Pass {
        return Err(LabError::TwistNotBounded { norm: rep.k_hat });
    }
    Ok(())
}

/// Solves C^{j,i} for j < i stage by stage (i ascending, then ℓ = i − j ascending),
/// given the diagonal conjugacies C^{i,i} in block coordinates.
pub fn inductive_block_solve(
    dec_a: Arc<BlockDecomposition>,
    dec_b: Arc<BlockDecomposition>,
    diagonal: Vec<Arc<dyn Generator>>,
    opts: &SolveOptions,
) -> Result<ConjugacySection> {
    let dims_a = dec_a.block_dims();
    let dims_b = dec_b.block_dims();
    if dims_a != dims_b {
        return Err(LabError::InvalidArgument(format!("block sizes differ: {dims_a:?} vs {dims_b:?}")));
    }
    let k = dims_a.len();
    if diagonal.len() != k {
        return Err(LabError::DimensionMismatch { expected: k, got: diagonal.len() });
    }
    let mut known: Vec<Vec<Option<Arc<dyn Section>>>> = vec![vec![None; k]; k];
    for (i, c) in diagonal.into_iter().enumerate() {
        if c.dim() != dims_a[i] {
            return Err(LabError::DimensionMismatch { expected: dims_a[i], got: c.dim() });
        }
        known[i][i] = Some(Arc::new(GeneratorSection(c, dims_a[i])));
    }
    let base = dec_a.cocycle().base.clone();
    let diag_a: Vec<_> = (0..k).map(|i| dec_a.diagonal_generator(i)).collect();
    let diag_b: Vec<_> = (0..k).map(|i| dec_b.diagonal_generator(i)).collect();
    let mut params = ParamSpace::new();
    for i in 0..k {
        for l in 1..=i {
            let j = i - l;
            let twist = Cocycle::new(base.clone(), Arc::new(KronTwist { a: diag_a[i].clone(), b: diag_b[j].clone() }));
            check_twist_bounded(&twist, opts)?;
            let forcing: Arc<dyn Section> = Arc::new(StageForcing {
                dec_a: dec_a.clone(),
                dec_b: dec_b.clone(),
                known: known.clone(),
                j,
                i,
                cols: 1 + params.count(),
            });
            let eta = TransportSection::solve(twist.clone(), forcing.clone(), opts.reference.clone(), &mut params, &opts.holonomy())?;
            if params.count() > 0 {
                let pts = sample_points(base.dim(), opts.check_points, opts.seed ^ (1000 + (j * k + i) as u64), STREAM_POINTS);
                let cols = 1 + params.count();
                let rows = map_samples(&pts, opts.serial, |_, x| -> Result<Mat> {
                    let fx = base.step(x, 1);
                    let r = pad_cols(&forcing.eval(x)?, cols) - pad_cols(&eta.eval(x)?, cols)
                        + twist.eval_inv(x) * pad_cols(&eta.eval(&fx)?, cols);
                    Ok(r)
                });
                for r in rows {
                    for row in r?.row_iter() {
                        params.constrain(row.iter().copied().collect());
                    }
                }
            }
            known[j][i] = Some(Arc::new(eta));
        }
    }
    let theta = params.solve();
    let constraint_residual = params
        .constraints()
        .iter()
        .map(|row| row.iter().zip(theta.iter()).map(|(a, t)| a * t).sum::<f64>().abs())
        .fold(0.0, f64::max);
    Ok(ConjugacySection::Composite(Arc::new(SolvedConjugacy { dec_a, dec_b, blocks: known, theta, constraint_residual })))
}

#[derive(Clone, Debug, Serialize)]
pub struct ConjugacyReport {
    pub samples: usize,
    pub max_residual: f64,
    pub max_condition: f64,
}

/// max over samples of ‖B_x − C(fx) A_x C(x)^{-1}‖ / ‖B_x‖.
pub fn conjugacy_residual(a: &Cocycle, b: &Cocycle, c: &ConjugacySection, samples: usize, seed: u64, serial: bool) -> Result<ConjugacyReport> {
    let pts = sample_points(a.base.dim(), samples, seed, STREAM_POINTS);
    let rows = map_samples(&pts, serial, |_, x| -> Result<(f64, f64)> {
        let cx = c.eval(x)?;
        let cond = condition_number(&cx);
        if !(cond <= SINGULAR_COND) {
            return Err(LabError::SingularC { cond });
        }
        let cfx = c.eval(&a.base.step(x, 1))?;
        let bx = b.eval(x);
        let pred = cfx * a.eval(x) * cx.try_inverse().expect("condition checked");
        Ok(((&bx - pred).norm() / bx.norm(), cond))
    });
    let mut rep = ConjugacyReport { samples, max_residual: 0.0, max_condition: 0.0 };
    for r in rows {
        let (res, cond) = r?;
        rep.max_residual = rep.max_residual.max(res);
        rep.max_condition = rep.max_condition.max(cond);
    }
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct IntertwiningReport {
    pub pairs: usize,
    pub max_residual: f64,
}

/// max over sampled leaf pairs of both kinds of ‖H^B_{x,y} − C(y) H^A_{x,y} C(x)^{-1}‖.
pub fn intertwining_residual(
    a: &Cocycle,
    b: &Cocycle,
    c: &ConjugacySection,
    samples: usize,
    opts: &HolonomyOptions,
    seed: u64,
    serial: bool,
) -> Result<IntertwiningReport> {
    let sys = &a.base;
    let idx: Vec<usize> = (0..samples).collect();
    let rows = map_samples(&idx, serial, |_, &s| -> Result<f64> {
        let mut rng = rng_for(seed, STREAM_LEAF, s as u64);
        let x = crate::sampling::uniform_point(&mut rng, sys.dim());
        let mut worst: f64 = 0.0;
        for kind in [LeafKind::Stable, LeafKind::Unstable] {
            let t: f64 = rng.gen_range(-0.1..0.1);
            let sel = LeafSelector { kind, direction_index: 0 };
            let y = sys.leaf_point(&x, sel, t)?;
            let pair = LeafPair::from_points(sys, &x, &y, kind)?;
            let ha = holonomy_pair(a, &pair, opts)?.matrix;
            let hb = holonomy_pair(b, &pair, opts)?.matrix;
            let cx_inv = c.eval(&x)?.try_inverse().ok_or(LabError::SingularC { cond: f64::INFINITY })?;
            worst = worst.max((hb - c.eval(&y)? * ha * cx_inv).norm());
        }
        Ok(worst)
    });
    let mut rep = IntertwiningReport { pairs: samples, max_residual: 0.0 };
    for r in rows {
        rep.max_residual = rep.max_residual.max(r?);
    }
    Ok(rep)
}

#[derive(Clone, Debug, Serialize)]
pub struct ExponentMatchReport {
    pub n_steps: usize,
    /// Forward exponents of the basis vectors e_k under A.
    pub exponents_a: Vec<f64>,
    /// Forward exponents of C(x)e_k under B.
    pub exponents_b: Vec<f64>,
    pub max_discrepancy: f64,
}

/// Forward exponents n^{-1} ln‖A^n_x u‖ of each column u of `vectors`.
///
/// The transposed product (A^n)ᵀ is QR-factorized from the right, which gives
/// the exponents λ_i with directions q_i; a vector's exponent is the largest
/// λ_i over the directions it has a non-negligible component along.
pub fn vector_exponents(coc: &Cocycle, x: &TorusPoint, vectors: &Mat, n_steps: usize) -> Result<Vec<f64>> {
    if n_steps == 0 {
        return Err(LabError::InvalidArgument("n_steps must be positive".into()));
    }
    let d = coc.dim();
    let mut mats = Vec::with_capacity(n_steps);
    let mut p = x.clone();
    for _ in 0..n_steps {
        mats.push(coc.eval(&p));
        p = coc.base.step(&p, 1);
    }
    let mut q = Mat::identity(d, d);
    let mut logs = vec![0.0; d];
    for m in mats.iter().rev() {
        let qr = (m.transpose() * &q).qr();
        let r = qr.r();
        for (i, l) in logs.iter_mut().enumerate() {
            let v = r[(i, i)].abs();
            if v == 0.0 {
                return Err(LabError::Degenerate { step: n_steps });
            }
            *l += v.ln();
        }
        q = qr.q();
        if !q.iter().all(|v| v.is_finite()) {
            return Err(LabError::Overflow { steps: n_steps as i64 });
        }
    }
    let lambda: Vec<f64> = logs.iter().map(|l| l / n_steps as f64).collect();
    Ok(vectors
        .column_iter()
        .map(|u| {
            let u = u.normalize();
            let comps = q.transpose() * u;
            (0..d).filter(|&i| comps[i].abs() > 1e-8).map(|i| lambda[i]).fold(f64::NEG_INFINITY, f64::max)
        })
        .collect())
}

/// Compares the forward exponent of e_k under A with that of C(x)e_k under B.
pub fn exponent_match_check(a: &Cocycle, b: &Cocycle, c: &ConjugacySection, x: &TorusPoint, n_steps: usize) -> Result<ExponentMatchReport> {
    let d = a.dim();
    let cx = c.eval(x)?;
    let cond = condition_number(&cx);
    if !(cond <= SINGULAR_COND) {
        return Err(LabError::SingularC { cond });
    }
    let exponents_a = vector_exponents(a, x, &Mat::identity(d, d), n_steps)?;
    let exponents_b = vector_exponents(b, x, &cx, n_steps)?;
    let max_discrepancy = exponents_a.iter().zip(&exponents_b).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
    Ok(ExponentMatchReport { n_steps, exponents_a, exponents_b, max_discrepancy })
}
