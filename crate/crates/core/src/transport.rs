//! Solutions of the twisted cohomological equation obtained by transporting
//! a reference value along stable/unstable paths with twisted holonomies.
//!
//! For a uniformly bounded twist the continuous solution is invariant under
//! twisted holonomies, so η(x) = ℋ_path η(x₀). The value at x₀ is fixed by the
//! equation at x₀ itself; directions it leaves free become parameters, and
//! unsatisfiable components become linear constraints on the parameters.

use std::sync::{Arc, Mutex};

use crate::base::{chart_point, HyperbolicAutomorphism, LeafKind, LeafOrbit, LeafPair, TorusPoint};
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::holonomy::HolonomyOptions;
use crate::linalg::{Mat, Vector};
use crate::twisted::{pad_cols, twisted_holonomy_pair, Section};

const RANK_THRESHOLD: f64 = 1e-7;

/// Free parameters θ and the linear constraints a₀ + a·θ = 0 collected on them.
#[derive(Debug, Default)]
pub struct ParamSpace {
    count: usize,
    constraints: Vec<Vec<f64>>,
}

impl ParamSpace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// Reserves k parameters; returns the index of the first one.
    pub fn add(&mut self, k: usize) -> usize {
        let first = self.count;
        self.count += k;
        first
    }

    /// A row [a₀, a₁, …] meaning a₀ + Σ a_j θ_j = 0.
    pub fn constrain(&mut self, row: Vec<f64>) {
        self.constraints.push(row);
    }

    pub fn constraints(&self) -> &[Vec<f64>] {
        &self.constraints
    }

    /// Minimum-norm least-squares θ; returns [1; θ].
    pub fn solve(&self) -> Vector {
        let n = self.count;
        let mut out = Vector::zeros(n + 1);
        out[0] = 1.0;
        if n == 0 || self.constraints.is_empty() {
            return out;
        }
        let m = self.constraints.len();
        let a = Mat::from_fn(m, n, |i, j| self.constraints[i].get(j + 1).copied().unwrap_or(0.0));
        let b = Vector::from_fn(m, |i, _| -self.constraints[i][0]);
        let scale = a.amax().max(1.0);
        let svd = a.svd(true, true);
        let theta = svd.solve(&b, RANK_THRESHOLD * scale).expect("both factors computed");
        out.rows_mut(1, n).copy_from(&theta);
        out
    }
}

/// Legs of the stable-then-unstable path from x₀ to x, each at most `max_piece` long.
pub fn su_path(sys: &HyperbolicAutomorphism, x0: &TorusPoint, x: &TorusPoint, max_piece: f64) -> Vec<LeafPair> {
    let d = x.wrapped_diff(x0);
    let (cs, cu) = sys.split_displacement(&d);
    let mut legs = Vec::new();
    let mut push = |anchor: &TorusPoint, kind: LeafKind, c: &Vector| {
        let len = c.norm();
        if len == 0.0 {
            return;
        }
        let pieces = (len / max_piece).ceil().max(1.0) as usize;
        for i in 0..pieces {
            let from = c * (i as f64 / pieces as f64);
            let to = c * ((i + 1) as f64 / pieces as f64);
            legs.push(LeafPair::new(anchor.clone(), kind, from, to));
        }
    };
    push(x0, LeafKind::Stable, &cs);
    let w = chart_point(sys, x0, LeafKind::Stable, &cs);
    push(&w, LeafKind::Unstable, &cu);
    legs
}

/// η as an evaluator: twisted-holonomy transport of a reference value from x₀.
pub struct TransportSection {
    twist: Cocycle,
    phi: Arc<dyn Section>,
    x0: TorusPoint,
    value0: Mat,
    opts: HolonomyOptions,
    max_piece: f64,
    cache: Mutex<Option<(TorusPoint, Mat)>>,
}

impl TransportSection {
    /// Solves the equation at x₀ and registers new parameters/constraints.
    pub fn solve(
        twist: Cocycle,
        phi: Arc<dyn Section>,
        x0: TorusPoint,
        params: &mut ParamSpace,
        opts: &HolonomyOptions,
    ) -> Result<Self> {
        let rows = twist.dim();
        if phi.rows() != rows {
            return Err(LabError::DimensionMismatch { expected: rows, got: phi.rows() });
        }
        let max_piece = (twist.base.leaf_radius() * 0.6).min(0.25);
        let mut sec = TransportSection {
            twist,
            phi,
            x0,
            value0: Mat::zeros(rows, 1),
            opts: opts.clone(),
            max_piece,
            cache: Mutex::new(None),
        };
        let cols = 1 + params.count();
        let fx0 = sec.twist.base.step(&sec.x0, 1);
        // transport of (M, b): start from the identity on an auxiliary block
        let (m1, b1) = sec.transport_affine(&sec.x0.clone(), &fx0)?;
        let f0_inv = sec.twist.eval_inv(&sec.x0);
        let g = Mat::identity(rows, rows) - &f0_inv * &m1;
        let rhs = pad_cols(&sec.phi.eval(&sec.x0)?, cols) + &f0_inv * pad_cols(&b1, cols);
        let svd = g.clone().svd(true, true);
        let u = svd.u.as_ref().expect("computed");
        let vt = svd.v_t.as_ref().expect("computed");
        let smax = svd.singular_values.max().max(1.0);
        let mut value = Mat::zeros(rows, cols);
        let mut kernel = Vec::new();
        for (i, &s) in svd.singular_values.iter().enumerate() {
            let ui = u.column(i);
            let vi = vt.row(i).transpose();
            if s > RANK_THRESHOLD * smax {
                value += &vi * (ui.transpose() * &rhs) / s;
            } else {
                kernel.push(vi);
                let row: Vec<f64> = (ui.transpose() * &rhs).iter().copied().collect();
                params.constrain(row);
            }
        }
        let first = params.add(kernel.len());
        let mut value = pad_cols(&value, cols + kernel.len());
        for (j, v) in kernel.iter().enumerate() {
            value.set_column(1 + first + j, v);
        }
        sec.value0 = value;
        Ok(sec)
    }

    pub fn reference_point(&self) -> &TorusPoint {
        &self.x0
    }

    pub fn reference_value(&self) -> &Mat {
        &self.value0
    }

    /// (M, b) with η(x) = M η(x₀) + b along the path from `from` to `to`.
    fn transport_affine(&self, from: &TorusPoint, to: &TorusPoint) -> Result<(Mat, Mat)> {
        let rows = self.twist.dim();
        let mut m = Mat::identity(rows, rows);
        let mut b = Mat::zeros(rows, self.phi.cols());
        for leg in su_path(&self.twist.base, from, to, self.max_piece) {
            let th = twisted_holonomy_pair(&self.twist, self.phi.as_ref(), &leg, &self.opts)?;
            m = &th.linear.matrix * m;
            b = th.apply(&b);
        }
        Ok((m, b))
    }
}

impl Section for TransportSection {
    fn rows(&self) -> usize {
        self.twist.dim()
    }

    fn cols(&self) -> usize {
        self.value0.ncols()
    }

    fn eval(&self, x: &TorusPoint) -> Result<Mat> {
        if let Some((p, v)) = self.cache.lock().expect("cache lock").as_ref() {
            if p == x {
                return Ok(v.clone());
            }
        }
        let (m, b) = self.transport_affine(&self.x0, x)?;
        let cols = self.cols();
        let v = &m * &self.value0 + pad_cols(&b, cols);
        *self.cache.lock().expect("cache lock") = Some((x.clone(), v.clone()));
        Ok(v)
    }

    fn eval_leg(&self, sys: &HyperbolicAutomorphism, pair: &LeafPair, lo: i64, hi: i64) -> Result<(Vec<Mat>, Vec<Mat>)> {
        let cols = self.cols();
        let start = self.eval(&pair.source(sys))?;
        let th = twisted_holonomy_pair(&self.twist, self.phi.as_ref(), pair, &self.opts)?;
        let end = pad_cols(&th.apply(&start), cols);
        let (plo, phi_hi) = (lo.min(0), hi.max(0));
        let (pf, pt) = self.phi.eval_leg(sys, pair, plo, phi_hi)?;
        let at = |v: &Vec<Mat>, j: i64| pad_cols(&v[(j - plo) as usize], cols);
        let mut out = [Vec::new(), Vec::new()];
        for (slot, (init, vals)) in [(start, &pf), (end, &pt)].into_iter().enumerate() {
            let mut orbit = LeafOrbit::new(sys, pair.anchor.clone(), pair.kind, vec![pair.from.clone(), pair.to.clone()]);
            let mut fwd = vec![init.clone()];
            for j in 0..hi.max(0) {
                let z = orbit.point(slot);
                let prev = fwd.last().unwrap();
                fwd.push(self.twist.eval(&z) * (prev - at(vals, j)));
                orbit.step_by(1);
            }
            let mut orbit = LeafOrbit::new(sys, pair.anchor.clone(), pair.kind, vec![pair.from.clone(), pair.to.clone()]);
            let mut bwd = vec![init];
            for j in (lo.min(0)..0).rev() {
                orbit.step_by(-1);
                let z = orbit.point(slot);
                let prev = bwd.last().unwrap();
                bwd.push(at(vals, j) + self.twist.eval_inv(&z) * prev);
            }
            let mut all: Vec<Mat> = bwd.into_iter().skip(1).rev().collect();
            all.extend(fwd);
            let offset = -lo.min(0);
            out[slot] = ((lo + offset) as usize..=(hi + offset) as usize).map(|i| all[i].clone()).collect();
        }
        let [a, b] = out;
        Ok((a, b))
    }
}
