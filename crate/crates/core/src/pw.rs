//! The upper-triangular pair A_x = [[a, b], [0, 1]], B_x = [[a, 0], [0, 1]].
//!
//! A conjugacy of the form C = [[1, c], [0, 1]] with B_x = C(fx) A_x C(x)^{-1}
//! exists exactly when b(x) = a(x) c(x) − c(fx). With ∫ log a < 0 the backward
//! series c(x) = −Σ_{k≥1} a(f^{-1}x)⋯a(f^{-(k−1)}x) · b(f^{-k}x) converges at
//! almost every point but not uniformly: along periodic orbits with positive
//! mean of log a its partial sums grow exponentially.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::Serialize;

use crate::base::{HyperbolicAutomorphism, TorusPoint};
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::field::Generator;
use crate::linalg::Mat;
use crate::sampling::{map_samples, sample_points, STREAM_MISC, STREAM_POINTS};

/// a(x) = exp(α + ε cos 2πx₁), b(x) = sin 2πx₁.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct PwParams {
    pub alpha: f64,
    pub epsilon: f64,
}

impl Default for PwParams {
    fn default() -> Self {
        PwParams { alpha: -0.2, epsilon: 1.0 }
    }
}

impl PwParams {
    pub fn log_a(&self, x: &TorusPoint) -> f64 {
        self.alpha + self.epsilon * (TAU * x.coords()[0]).cos()
    }

    pub fn a(&self, x: &TorusPoint) -> f64 {
        self.log_a(x).exp()
    }

    pub fn b(&self, x: &TorusPoint) -> f64 {
        x.phase(&[1, 0]).sin()
    }
}

struct PwGenerator {
    params: PwParams,
    with_b: bool,
}

impl Generator for PwGenerator {
    fn dim(&self) -> usize {
        2
    }

    fn eval(&self, x: &TorusPoint) -> Mat {
        let b = if self.with_b { self.params.b(x) } else { 0.0 };
        Mat::from_row_slice(2, 2, &[self.params.a(x), b, 0.0, 1.0])
    }
}

/// The cocycles (A, B).
pub fn pw_cocycles(base: Arc<HyperbolicAutomorphism>, params: PwParams) -> (Cocycle, Cocycle) {
    (
        Cocycle::new(base.clone(), Arc::new(PwGenerator { params, with_b: true })),
        Cocycle::new(base, Arc::new(PwGenerator { params, with_b: false })),
    )
}

/// The conjugacy candidate [[1, c], [0, 1]].
pub fn pw_conjugacy(c: f64) -> Mat {
    Mat::from_row_slice(2, 2, &[1.0, c, 0.0, 1.0])
}

/// Partial sums S_0 = 0, S_1, …, S_n of the backward series at x.
pub fn pw_partial_sums(sys: &HyperbolicAutomorphism, params: PwParams, x: &TorusPoint, n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut prod = 1.0;
    let mut sum = 0.0;
    let mut z = x.clone();
    for _ in 0..n {
        z = sys.step(&z, -1);
        sum -= prod * params.b(&z);
        prod *= params.a(&z);
        out.push(sum);
    }
    out
}

/// Monte Carlo estimate of ∫ log a dm.
pub fn mean_log_a(params: PwParams, m: usize, count: usize, seed: u64) -> f64 {
    let pts = sample_points(m, count, seed, STREAM_MISC);
    pts.iter().map(|x| params.log_a(x)).sum::<f64>() / count as f64
}

/// Dyadic points (all periodic, stepped exactly) whose orbit has positive mean
/// of log a and where b does not vanish identically; returns (point, period, mean).
pub fn periodic_probes(sys: &HyperbolicAutomorphism, params: PwParams, max_log2_den: u32) -> Vec<(TorusPoint, usize, f64)> {
    let m = sys.dim();
    let den = 1u64 << max_log2_den;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    let total = (den as usize).pow(m as u32);
    for idx in 0..total {
        let mut rest = idx;
        let raw: Vec<u64> = (0..m)
            .map(|_| {
                let k = (rest % den as usize) as u64;
                rest /= den as usize;
                k << (64 - max_log2_den)
            })
            .collect();
        let p = TorusPoint::from_raw(raw);
        if seen.contains(&p) {
            continue;
        }
        let mut orbit = vec![p.clone()];
        let mut z = sys.step(&p, 1);
        while z != p {
            orbit.push(z.clone());
            z = sys.step(&z, 1);
        }
        let mean = orbit.iter().map(|z| params.log_a(z)).sum::<f64>() / orbit.len() as f64;
        let b_max = orbit.iter().map(|z| params.b(z).abs()).fold(0.0, f64::max);
        let period = orbit.len();
        seen.extend(orbit);
        if mean > 0.0 && b_max > 1e-12 {
            out.push((p, period, mean));
        }
    }
    out
}

#[derive(Clone, Debug, Serialize)]
pub struct PwPoint {
    pub index: usize,
    pub x1: f64,
    pub x2: f64,
    pub probe: bool,
    pub converged: bool,
    /// max over m ∈ [n/2, n] of |S_m − S_n|.
    pub tail_variation: f64,
    pub value: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct PwReport {
    pub samples: usize,
    pub probes: usize,
    pub n_max: usize,
    pub mean_log_a: f64,
    pub converged_fraction: f64,
    /// (n, max over samples of |S_n|).
    pub sup_curve: Vec<(usize, f64)>,
    pub points: Vec<PwPoint>,
}

impl PwReport {
    pub fn sup_at(&self, n: usize) -> Option<f64> {
        self.sup_curve.iter().find(|p| p.0 == n).map(|p| p.1)
    }
}

/// Sample set: the periodic probes followed by uniform points, `samples` in total.
pub fn pw_sample_points(sys: &HyperbolicAutomorphism, params: PwParams, samples: usize, seed: u64) -> Vec<(TorusPoint, bool)> {
    let probes = periodic_probes(sys, params, 4);
    let mut pts: Vec<(TorusPoint, bool)> = probes.into_iter().take(samples / 20).map(|(p, _, _)| (p, true)).collect();
    let rest = samples - pts.len();
    pts.extend(sample_points(sys.dim(), rest, seed, STREAM_POINTS).into_iter().map(|p| (p, false)));
    pts
}

/// Partial sums up to n_max at every sample; convergence means the tail
/// variation over [n_max/2, n_max] is below `tol`.
pub fn pw_demo(
    sys: &HyperbolicAutomorphism,
    params: PwParams,
    samples: usize,
    n_max: usize,
    tol: f64,
    seed: u64,
    serial: bool,
) -> Result<PwReport> {
    if samples == 0 || n_max < 2 {
        return Err(LabError::InvalidArgument("pw_demo needs samples > 0 and n_max ≥ 2".into()));
    }
    let pts = pw_sample_points(sys, params, samples, seed);
    let sums = map_samples(&pts, serial, |_, (x, _)| pw_partial_sums(sys, params, x, n_max));
    let mut sup = vec![0.0f64; n_max + 1];
    let mut points = Vec::with_capacity(pts.len());
    for (index, ((x, probe), s)) in pts.iter().zip(&sums).enumerate() {
        for (acc, v) in sup.iter_mut().zip(s) {
            *acc = acc.max(v.abs());
        }
        let last = s[n_max];
        let tail_variation = s[n_max / 2..].iter().map(|v| (v - last).abs()).fold(0.0, f64::max);
        let c = x.coords();
        points.push(PwPoint {
            index,
            x1: c[0],
            x2: c[1],
            probe: *probe,
            converged: tail_variation.is_finite() && tail_variation < tol,
            tail_variation,
            value: last,
        });
    }
    let converged = points.iter().filter(|p| p.converged).count();
    let mut grid: Vec<usize> = (0..=n_max).step_by((n_max / 20).max(1)).skip(1).collect();
    if grid.last() != Some(&n_max) {
        grid.push(n_max);
    }
    Ok(PwReport {
        samples: pts.len(),
        probes: pts.iter().filter(|p| p.1).count(),
        n_max,
        mean_log_a: mean_log_a(params, sys.dim(), 100_000, seed),
        converged_fraction: converged as f64 / pts.len() as f64,
        sup_curve: grid.into_iter().map(|n| (n, sup[n])).collect(),
        points,
    })
}
