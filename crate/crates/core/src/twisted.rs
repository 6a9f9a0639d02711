//! Twisted trajectory sums, twisted holonomies and the twisted cohomological
//! equation φ(x) = η(x) − F_x^{-1} η(fx).
//!
//! Sections may be affine in a parameter vector θ: a value is a matrix whose
//! column 0 is the constant part and column j the coefficient of θ_j.

use std::sync::Arc;

use serde::Serialize;

use crate::base::{HyperbolicAutomorphism, LeafKind, LeafOrbit, LeafPair, LeafSelector, TorusPoint};
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::field::VectorSection;
use crate::holonomy::{holonomy_pair, HolonomyMap, HolonomyOptions, SeriesMonitor, NOISE_FACTOR};
use crate::linalg::{linear_fit, Mat, Vector};
use crate::sampling::{map_samples, rng_for, uniform_point, STREAM_LEAF};

/// A (possibly parameter-affine) section x ↦ η(x) ∈ R^{rows × cols}.
pub trait Section: Send + Sync {
    fn rows(&self) -> usize;

    fn cols(&self) -> usize;

    fn eval(&self, x: &TorusPoint) -> Result<Mat>;

    /// Values at f^j(from) and f^j(to), j = lo..=hi, along the chart orbits of `pair`.
    fn eval_leg(&self, sys: &HyperbolicAutomorphism, pair: &LeafPair, lo: i64, hi: i64) -> Result<(Vec<Mat>, Vec<Mat>)> {
        let mut orbit = LeafOrbit::new(sys, pair.anchor.clone(), pair.kind, vec![pair.from.clone(), pair.to.clone()]);
        orbit.step_by(lo);
        let mut a = Vec::with_capacity((hi - lo + 1).max(0) as usize);
        let mut b = Vec::with_capacity(a.capacity());
        for j in lo..=hi {
            a.push(self.eval(&orbit.point(0))?);
            b.push(self.eval(&orbit.point(1))?);
            if j < hi {
                orbit.step_by(1);
            }
        }
        Ok((a, b))
    }
}

/// Pads with zero columns up to `cols`.
pub fn pad_cols(m: &Mat, cols: usize) -> Mat {
    if m.ncols() >= cols {
        return m.clone();
    }
    let mut out = Mat::zeros(m.nrows(), cols);
    out.view_mut((0, 0), (m.nrows(), m.ncols())).copy_from(m);
    out
}

/// A plain vector section viewed as a one-column [`Section`].
pub struct VectorAsSection(pub Arc<dyn VectorSection>);

impl Section for VectorAsSection {
    fn rows(&self) -> usize {
        self.0.dim()
    }

    fn cols(&self) -> usize {
        1
    }

    fn eval(&self, x: &TorusPoint) -> Result<Mat> {
        let v = self.0.eval(x);
        Ok(Mat::from_column_slice(v.len(), 1, v.as_slice()))
    }
}

/// Φ^n(x) = Σ_{k<n} (F^k_x)^{-1} φ(f^k x).
pub fn trajectory_sum(twist: &Cocycle, phi: &dyn VectorSection, x: &TorusPoint, n: usize) -> Result<Vector> {
    let d = twist.dim();
    let mut inv = Mat::identity(d, d);
    let mut sum = Vector::zeros(d);
    let mut z = x.clone();
    for k in 0..n {
        sum += &inv * phi.eval(&z);
        inv *= twist.eval_inv(&z);
        if !(inv.amax() <= crate::cocycle::OVERFLOW_NORM) {
            return Err(LabError::Overflow { steps: k as i64 + 1 });
        }
        z = twist.base.step(&z, 1);
    }
    Ok(sum)
}

/// ℋ_{from,to}(v) = H v + Φ.
#[derive(Clone, Debug)]
pub struct TwistedHolonomy {
    pub linear: HolonomyMap,
    pub offset: Mat,
    pub n_used: usize,
}

impl TwistedHolonomy {
    pub fn apply(&self, v: &Mat) -> Mat {
        let cols = v.ncols().max(self.offset.ncols());
        &self.linear.matrix * pad_cols(v, cols) + pad_cols(&self.offset, cols)
    }

    pub fn apply_vector(&self, v: &Vector) -> Vector {
        let m = self.apply(&Mat::from_column_slice(v.len(), 1, v.as_slice()));
        m.column(0).into_owned()
    }

    pub fn offset_vector(&self) -> Vector {
        self.offset.column(0).into_owned()
    }
}

/// Steps after which the pair's leaf separation drops below 1e-16.
pub(crate) fn geometric_horizon(sys: &HyperbolicAutomorphism, pair: &LeafPair) -> usize {
    let len = pair.length();
    if len == 0.0 {
        return 0;
    }
    let rate = sys.leaf_rate(pair.kind);
    ((1e-16 / len).ln() / rate.ln()).ceil().max(1.0) as usize
}

/// Twisted holonomy of (F, φ) from `pair.from` to `pair.to`.
///
/// Stable: Φ = Σ_{k≥0} [(F^k_to)^{-1}φ(f^k to) − H (F^k_from)^{-1}φ(f^k from)].
/// Unstable: Φ = −Σ_{k≥1} [F^k_{f^{-k}to}φ(f^{-k}to) − H F^k_{f^{-k}from}φ(f^{-k}from)].
pub fn twisted_holonomy_pair(twist: &Cocycle, phi: &dyn Section, pair: &LeafPair, opts: &HolonomyOptions) -> Result<TwistedHolonomy> {
    let sys = &twist.base;
    let rows = phi.rows();
    if rows != twist.dim() {
        return Err(LabError::DimensionMismatch { expected: twist.dim(), got: rows });
    }
    let h = holonomy_pair(twist, pair, &opts.to_noise_floor())?;
    if pair.from == pair.to {
        return Ok(TwistedHolonomy { linear: h, offset: Mat::zeros(rows, phi.cols()), n_used: 0 });
    }
    let horizon = geometric_horizon(sys, pair);
    let hn = h.matrix.norm();
    let mut budget = (horizon + 8).min(opts.n_max);
    loop {
        let (lo, hi) = match pair.kind {
            LeafKind::Stable => (0, budget as i64 - 1),
            LeafKind::Unstable => (-(budget as i64), -1),
        };
        let (vf, vt) = phi.eval_leg(sys, pair, lo, hi)?;
        let mut orbit = LeafOrbit::new(sys, pair.anchor.clone(), pair.kind, vec![pair.from.clone(), pair.to.clone()]);
        let d = rows;
        let mut pf = Mat::identity(d, d);
        let mut pt = Mat::identity(d, d);
        let mut sum = Mat::zeros(rows, phi.cols());
        let mut mon = SeriesMonitor::new(opts.tol);
        for k in 0..budget {
            let (a, b) = match pair.kind {
                LeafKind::Stable => {
                    let (zf, zt) = (orbit.point(0), orbit.point(1));
                    let a = &pt * &vt[k];
                    let b = &pf * &vf[k];
                    pt *= twist.eval_inv(&zt);
                    pf *= twist.eval_inv(&zf);
                    orbit.step_by(1);
                    (a, b)
                }
                LeafKind::Unstable => {
                    orbit.step_by(-1);
                    let (zf, zt) = (orbit.point(0), orbit.point(1));
                    pt *= twist.eval(&zt);
                    pf *= twist.eval(&zf);
                    let idx = budget - 1 - k;
                    (-(&pt * &vt[idx]), -(&pf * &vf[idx]))
                }
            };
            let (na, nb) = (pad_cols(&a, sum.ncols()), pad_cols(&b, sum.ncols()));
            let term = &na - &h.matrix * &nb;
            let noise = NOISE_FACTOR * (na.norm() + hn * nb.norm());
            sum += &term;
            mon.push(term.norm(), noise);
            let drowned = k + 1 >= horizon && mon.last() <= 1e-6 * (1.0 + sum.norm());
            if mon.converged() || drowned {
                return Ok(TwistedHolonomy { linear: h, offset: sum, n_used: k + 1 });
            }
            if !(mon.last() <= 1e12) {
                return Err(LabError::NoConvergence { n_max: k + 1 });
            }
        }
        if budget >= opts.n_max {
            return Err(LabError::NoConvergence { n_max: opts.n_max });
        }
        budget = (budget * 2).min(opts.n_max);
    }
}

/// Φ^s_{y,x} ∈ E_x = lim Φ^n(x) − H^s_{y,x} Φ^n(y), for y on the local stable leaf of x.
pub fn twisted_difference(
    twist: &Cocycle,
    phi: Arc<dyn VectorSection>,
    x: &TorusPoint,
    y: &TorusPoint,
    opts: &HolonomyOptions,
) -> Result<Vector> {
    let pair = LeafPair::from_points(&twist.base, x, y, LeafKind::Stable)?.reversed();
    Ok(twisted_holonomy_pair(twist, &VectorAsSection(phi), &pair, opts)?.offset_vector())
}

/// ℋ^s_{x,y}(v) = H^s_{x,y} v + Φ^s_{x,y}.
pub fn twisted_holonomy_apply(
    twist: &Cocycle,
    phi: Arc<dyn VectorSection>,
    x: &TorusPoint,
    y: &TorusPoint,
    v: &Vector,
    opts: &HolonomyOptions,
) -> Result<Vector> {
    let pair = LeafPair::from_points(&twist.base, x, y, LeafKind::Stable)?;
    Ok(twisted_holonomy_pair(twist, &VectorAsSection(phi), &pair, opts)?.apply_vector(v))
}

/// η(x) = lim Φ^n(x), valid when (F^n)^{-1} decays.
pub fn solve_twisted_coboundary(
    twist: &Cocycle,
    phi: &dyn VectorSection,
    x: &TorusPoint,
    opts: &HolonomyOptions,
) -> Result<Vector> {
    let d = twist.dim();
    let mut inv = Mat::identity(d, d);
    let mut sum = Vector::zeros(d);
    let mut z = x.clone();
    let mut mon = SeriesMonitor::new(opts.tol);
    for _ in 0..opts.n_max {
        let term = &inv * phi.eval(&z);
        sum += &term;
        mon.push(term.norm(), NOISE_FACTOR * sum.norm());
        if mon.converged() {
            return Ok(sum);
        }
        inv *= twist.eval_inv(&z);
        z = twist.base.step(&z, 1);
    }
    Err(LabError::NoConvergence { n_max: opts.n_max })
}

#[derive(Clone, Debug, Serialize)]
pub struct InvarianceReport {
    pub samples: usize,
    pub max_residual: f64,
    pub holder_slope: Option<f64>,
}

pub const INVARIANCE_SCALES: [f64; 6] = [0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625];

/// max ‖η(y) − ℋ_{x,y} η(x)‖ over sampled stable-leaf pairs, and the
/// log-log slope of ‖η(x) − η(y)‖ against leaf distance.
pub fn twisted_invariance_residual(
    twist: &Cocycle,
    phi: &dyn Section,
    eta: &dyn Section,
    samples: usize,
    opts: &HolonomyOptions,
    seed: u64,
    serial: bool,
) -> Result<InvarianceReport> {
    let sys = &twist.base;
    let u = sys.direction_coords(LeafSelector::stable(0))?;
    let idx: Vec<usize> = (0..samples).collect();
    let per = map_samples(&idx, serial, |i, _| -> Result<(f64, Vec<f64>)> {
        use rand::Rng;
        let mut rng = rng_for(seed, STREAM_LEAF, i as u64);
        let x = uniform_point(&mut rng, sys.dim());
        let t: f64 = rng.gen_range(-0.2..0.2);
        let zero = &u * 0.0;
        let ex = eta.eval(&x)?;
        let pair = LeafPair::new(x.clone(), LeafKind::Stable, zero.clone(), &u * t);
        let th = twisted_holonomy_pair(twist, phi, &pair, opts)?;
        let ey = eta.eval(&pair.target(sys))?;
        let resid = (&ey - th.apply(&ex)).norm();
        let mut diffs = Vec::with_capacity(INVARIANCE_SCALES.len());
        for s in INVARIANCE_SCALES {
            let p = LeafPair::new(x.clone(), LeafKind::Stable, zero.clone(), &u * s);
            diffs.push((eta.eval(&p.target(sys))? - &ex).norm());
        }
        Ok((resid, diffs))
    });
    let mut max_residual = 0.0f64;
    let mut dmax = vec![0.0f64; INVARIANCE_SCALES.len()];
    for p in per {
        let (r, d) = p?;
        max_residual = max_residual.max(r);
        for (m, v) in dmax.iter_mut().zip(d) {
            *m = m.max(v);
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = INVARIANCE_SCALES
        .iter()
        .zip(&dmax)
        .filter(|(_, &v)| v > 1e-13)
        .map(|(s, v)| (s.ln(), v.ln()))
        .unzip();
    Ok(InvarianceReport { samples, max_residual, holder_slope: linear_fit(&xs, &ys).map(|f| f.0) })
}
