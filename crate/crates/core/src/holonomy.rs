//! Stable and unstable holonomies H_{x,y} = lim (A^n_y)^{-1} A^n_x.

use serde::Serialize;

use crate::base::{LeafKind, LeafOrbit, LeafPair, LeafSelector, TorusPoint};
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::linalg::{linear_fit, spectral_norm, Mat};
use crate::sampling::{map_samples, rng_for, uniform_point, STREAM_LEAF};

pub(crate) const NOISE_FACTOR: f64 = 16.0 * f64::EPSILON;
const BUNCHING_BLOWUP: f64 = 1e12;

#[derive(Clone, Debug)]
pub struct HolonomyOptions {
    pub tol: f64,
    pub n_max: usize,
    pub beta: f64,
    /// Require ‖A^n‖·‖(A^n)^{-1}‖·rate^{βn} < 1 before accepting, and abort when it explodes.
    pub check_bunching: bool,
}

impl Default for HolonomyOptions {
    fn default() -> Self {
        HolonomyOptions { tol: 1e-10, n_max: 2000, beta: 1.0, check_bunching: true }
    }
}

impl HolonomyOptions {
    /// Runs every series down to rounding noise.
    pub fn to_noise_floor(&self) -> Self {
        HolonomyOptions { tol: 0.0, ..self.clone() }
    }
}

/// Convergence monitor for series whose increments decay geometrically
/// until they drown in rounding noise.
#[derive(Debug, Default)]
pub(crate) struct SeriesMonitor {
    incs: Vec<f64>,
    noise: Vec<f64>,
    tol: f64,
}

impl SeriesMonitor {
    pub fn new(tol: f64) -> Self {
        SeriesMonitor { incs: Vec::new(), noise: Vec::new(), tol }
    }

    pub fn push(&mut self, inc: f64, noise: f64) {
        self.incs.push(inc);
        self.noise.push(noise);
    }

    pub fn last(&self) -> f64 {
        self.incs.last().copied().unwrap_or(0.0)
    }

    pub fn total_noise(&self) -> f64 {
        self.noise.iter().sum()
    }

    pub fn converged(&self) -> bool {
        let n = self.incs.len();
        if n < 3 {
            return false;
        }
        let recent: f64 = self.incs[n - 3..].iter().sum();
        if recent <= self.noise[n - 3..].iter().sum::<f64>() {
            return true;
        }
        if self.tol > 0.0 && n >= 6 {
            let prev: f64 = self.incs[n - 6..n - 3].iter().sum();
            if prev > 0.0 {
                let theta = (recent / prev).powf(1.0 / 3.0);
                if theta < 0.95 && recent * theta / (1.0 - theta) < self.tol {
                    return true;
                }
            }
        }
        false
    }
}

#[derive(Clone, Debug)]
pub struct HolonomyMap {
    pub source: TorusPoint,
    pub target: TorusPoint,
    pub matrix: Mat,
    pub kind: LeafKind,
    pub n_used: usize,
    /// Last increment norm.
    pub residual: f64,
    /// Accumulated rounding-noise estimate for `matrix`.
    pub noise: f64,
}

/// Holonomy from `pair.from` to `pair.to` along their common local leaf.
pub fn holonomy_pair(coc: &Cocycle, pair: &LeafPair, opts: &HolonomyOptions) -> Result<HolonomyMap> {
    let sys = &coc.base;
    let d = coc.dim();
    let kind = pair.kind;
    let source = pair.source(sys);
    let target = pair.target(sys);
    if pair.from == pair.to {
        return Ok(HolonomyMap { source, target, matrix: Mat::identity(d, d), kind, n_used: 0, residual: 0.0, noise: 0.0 });
    }
    let rate = sys.leaf_rate(kind).powf(opts.beta);
    let mut orbit = LeafOrbit::new(sys, pair.anchor.clone(), kind, vec![pair.from.clone(), pair.to.clone()]);
    let id = Mat::identity(d, d);
    let mut h = id.clone();
    // stable: px = A^n_x, px_inv = (A^n_x)^{-1}, py = (A^n_y)^{-1}
    // unstable: px = (A^{-n}_x)^{-1}, px_inv = A^{-n}_x, py = (A^{-n}_y)^{-1}
    let mut px = id.clone();
    let mut px_inv = id.clone();
    let mut py = id;
    let mut mon = SeriesMonitor::new(opts.tol);
    for n in 0..opts.n_max {
        if kind == LeafKind::Unstable {
            orbit.step_by(-1);
        }
        let (xs, ys) = (orbit.point(0), orbit.point(1));
        let ax = coc.eval(&xs);
        let ay = coc.eval(&ys);
        let diff = &ax - &ay;
        let sum_a = ax.norm() + ay.norm();
        let (inc, noise) = match kind {
            LeafKind::Stable => {
                let left = &py * coc.eval_inv(&ys);
                let inc = &left * diff * &px;
                let noise = NOISE_FACTOR * left.norm() * sum_a * px.norm();
                py = left;
                px_inv *= coc.eval_inv(&xs);
                px = ax * px;
                (inc, noise)
            }
            LeafKind::Unstable => {
                let right = coc.eval_inv(&xs) * &px_inv;
                let inc = &py * (-diff) * &right;
                let noise = NOISE_FACTOR * py.norm() * sum_a * right.norm();
                py *= ay;
                px *= ax;
                px_inv = right;
                (inc, noise)
            }
        };
        if kind == LeafKind::Stable {
            orbit.step_by(1);
        }
        h += &inc;
        mon.push(inc.norm(), noise);
        let q = spectral_norm(&px) * spectral_norm(&px_inv) * rate.powi(n as i32 + 1);
        if opts.check_bunching && !(q <= BUNCHING_BLOWUP) {
            return Err(LabError::NoConvergence { n_max: n + 1 });
        }
        if mon.converged() && (!opts.check_bunching || q < 1.0) {
            return Ok(HolonomyMap {
                source,
                target,
                matrix: h,
                kind,
                n_used: n + 1,
                residual: mon.last(),
                noise: mon.total_noise(),
            });
        }
    }
    Err(LabError::NoConvergence { n_max: opts.n_max })
}

pub fn stable_holonomy(coc: &Cocycle, x: &TorusPoint, y: &TorusPoint, opts: &HolonomyOptions) -> Result<HolonomyMap> {
    holonomy_pair(coc, &LeafPair::from_points(&coc.base, x, y, LeafKind::Stable)?, opts)
}

pub fn unstable_holonomy(coc: &Cocycle, x: &TorusPoint, y: &TorusPoint, opts: &HolonomyOptions) -> Result<HolonomyMap> {
    holonomy_pair(coc, &LeafPair::from_points(&coc.base, x, y, LeafKind::Unstable)?, opts)
}

/// (A^n at pair.from, A^n at pair.to) along the chart orbits, n ≥ 0.
pub fn pair_iterates(coc: &Cocycle, pair: &LeafPair, n: usize) -> (Mat, Mat) {
    let d = coc.dim();
    let mut orbit = LeafOrbit::new(&coc.base, pair.anchor.clone(), pair.kind, vec![pair.from.clone(), pair.to.clone()]);
    let (mut a, mut b) = (Mat::identity(d, d), Mat::identity(d, d));
    for _ in 0..n {
        a = coc.eval(&orbit.point(0)) * a;
        b = coc.eval(&orbit.point(1)) * b;
        orbit.step_by(1);
    }
    (a, b)
}

#[derive(Clone, Debug, Serialize)]
pub struct PropertyRow {
    pub property: String,
    pub samples: usize,
    pub max_residual: f64,
    pub fitted_slope: Option<f64>,
    pub n_max: usize,
    pub verdict: String,
}

#[derive(Clone, Debug)]
pub struct HolonomySuiteReport {
    pub samples: usize,
    pub h2_max: f64,
    pub h3_max: f64,
    /// None when every ‖H − Id‖ is zero.
    pub h4_slope: Option<f64>,
    pub max_n_used: usize,
    pub rows: Vec<PropertyRow>,
}

pub const H4_SCALES: [f64; 7] = [0.1, 0.05, 0.025, 0.0125, 0.00625, 0.003125, 0.0015625];

/// Checks composition, equivariance and Hölder closeness to the identity
/// on sampled stable-leaf triples.
pub fn holonomy_property_suite(
    coc: &Cocycle,
    samples: usize,
    opts: &HolonomyOptions,
    seed: u64,
    serial: bool,
) -> Result<HolonomySuiteReport> {
    let sys = &coc.base;
    let u = sys.direction_coords(LeafSelector::stable(0))?;
    let r = 0.1f64.min(sys.leaf_radius() / 2.0);
    let idx: Vec<usize> = (0..samples).collect();
    let per = map_samples(&idx, serial, |i, _| -> Result<(f64, f64, Vec<f64>, usize)> {
        use rand::Rng;
        let mut rng = rng_for(seed, STREAM_LEAF, i as u64);
        let x = uniform_point(&mut rng, sys.dim());
        let ty: f64 = rng.gen_range(-r..r);
        let tz: f64 = rng.gen_range(-r..r);
        let zero = u.clone() * 0.0;
        let (cy, cz) = (&u * ty, &u * tz);
        let pair = |a: &crate::linalg::Vector, b: &crate::linalg::Vector| {
            LeafPair::new(x.clone(), LeafKind::Stable, a.clone(), b.clone())
        };
        let hxy = holonomy_pair(coc, &pair(&zero, &cy), opts)?;
        let hyz = holonomy_pair(coc, &pair(&cy, &cz), opts)?;
        let hxz = holonomy_pair(coc, &pair(&zero, &cz), opts)?;
        let hxx = holonomy_pair(coc, &pair(&zero, &zero), opts)?;
        let h2 = spectral_norm(&(&hyz.matrix * &hxy.matrix - &hxz.matrix))
            .max(spectral_norm(&(hxx.matrix - Mat::identity(coc.dim(), coc.dim()))));
        let mut h3 = 0.0f64;
        let base_pair = pair(&zero, &cy);
        for n in 1..=5usize {
            let moved = base_pair.advanced(sys, n as i64);
            let hn = holonomy_pair(coc, &moved, opts)?;
            let (ax, ay) = pair_iterates(coc, &base_pair, n);
            let ay_inv = ay.try_inverse().ok_or(LabError::Degenerate { step: n })?;
            h3 = h3.max(spectral_norm(&(&hxy.matrix - ay_inv * hn.matrix * ax)));
        }
        let mut h4 = Vec::with_capacity(H4_SCALES.len());
        for s in H4_SCALES {
            let h = holonomy_pair(coc, &pair(&zero, &(&u * s)), opts)?;
            h4.push(spectral_norm(&(h.matrix - Mat::identity(coc.dim(), coc.dim()))));
        }
        Ok((h2, h3, h4, hxy.n_used.max(hyz.n_used).max(hxz.n_used)))
    });
    let mut h2_max = 0.0f64;
    let mut h3_max = 0.0f64;
    let mut h4_max = vec![0.0f64; H4_SCALES.len()];
    let mut max_n_used = 0;
    for p in per {
        let (h2, h3, h4, n) = p?;
        h2_max = h2_max.max(h2);
        h3_max = h3_max.max(h3);
        max_n_used = max_n_used.max(n);
        for (m, v) in h4_max.iter_mut().zip(h4) {
            *m = m.max(v);
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = H4_SCALES
        .iter()
        .zip(&h4_max)
        .filter(|(_, &v)| v > 1e-13)
        .map(|(s, v)| (s.ln(), v.ln()))
        .unzip();
    let h4_slope = linear_fit(&xs, &ys).map(|f| f.0);
    let bound = 10.0 * opts.tol.max(1e-12);
    let verdict = |ok: bool| if ok { "pass" } else { "fail" }.to_string();
    let rows = vec![
        PropertyRow {
            property: "H2_composition".into(),
            samples,
            max_residual: h2_max,
            fitted_slope: None,
            n_max: opts.n_max,
            verdict: verdict(h2_max < bound),
        },
        PropertyRow {
            property: "H3_equivariance".into(),
            samples,
            max_residual: h3_max,
            fitted_slope: None,
            n_max: opts.n_max,
            verdict: verdict(h3_max < bound),
        },
        PropertyRow {
            property: "H4_holder".into(),
            samples,
            max_residual: h4_max.iter().copied().fold(0.0, f64::max),
            fitted_slope: h4_slope,
            n_max: opts.n_max,
            verdict: verdict(h4_slope.is_none_or(|s| s >= opts.beta - 0.1)),
        },
    ];
    Ok(HolonomySuiteReport { samples, h2_max, h3_max, h4_slope, max_n_used, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monitor_accepts_exact_zeros_and_rejects_flat_series() {
        let mut m = SeriesMonitor::new(1e-10);
        for _ in 0..3 {
            m.push(0.0, 0.0);
        }
        assert!(m.converged());
        let mut m = SeriesMonitor::new(1e-10);
        for _ in 0..50 {
            m.push(1e-3, 1e-18);
        }
        assert!(!m.converged());
    }

    #[test]
    fn monitor_extrapolates_geometric_tail() {
        let mut m = SeriesMonitor::new(1e-10);
        let mut k = 0;
        while !m.converged() {
            m.push(0.5f64.powi(k), 0.0);
            k += 1;
        }
        // tail after the last pushed term is 2^{-(k-1)}·1 < tol·(a little)
        assert!(0.5f64.powi(k - 1) < 1e-10);
    }
}
