//! Hölder exponents of sections along leaves from log-log regression.

use rand::Rng;
use serde::Serialize;

use crate::base::{HyperbolicAutomorphism, LeafSelector, TorusPoint};
use crate::error::{LabError, Result};
use crate::linalg::{linear_fit, Mat};
use crate::sampling::{map_samples, rng_for, uniform_point, STREAM_LEAF};

/// Differences at or below this are treated as rounding noise.
pub const NOISE_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, Serialize)]
pub struct HolderEstimate {
    pub beta_hat: f64,
    pub r_squared: f64,
    /// (t, max over samples of ‖s(x) − s(y_t)‖) for every scale kept in the fit.
    pub points: Vec<(f64, f64)>,
}

/// Geometric scales t₀·2^{-j}, j < count.
pub fn geometric_scales(t0: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| t0 * 0.5f64.powi(j as i32)).collect()
}

/// Regresses log max ‖s(x) − s(leaf_point(x, t))‖ on log t.
pub fn holder_exponent_estimate(
    section: &(dyn Fn(&TorusPoint) -> Result<Mat> + Sync),
    sys: &HyperbolicAutomorphism,
    leaf: LeafSelector,
    x_samples: usize,
    scales: &[f64],
    seed: u64,
    serial: bool,
) -> Result<HolderEstimate> {
    if scales.len() < 4 {
        return Err(LabError::InvalidArgument("need at least 4 scales".into()));
    }
    let (lo, hi) = scales.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &t| (l.min(t.abs()), h.max(t.abs())));
    if lo <= 0.0 || hi / lo < 100.0 {
        return Err(LabError::InvalidArgument("scales must span at least two decades".into()));
    }
    if hi > sys.leaf_radius() {
        return Err(LabError::LeafRadiusExceeded { t: hi, radius: sys.leaf_radius() });
    }
    let idx: Vec<usize> = (0..x_samples).collect();
    let rows = map_samples(&idx, serial, |_, &s| -> Result<Vec<f64>> {
        let mut rng = rng_for(seed, STREAM_LEAF, s as u64);
        let x = uniform_point(&mut rng, sys.dim());
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let base = section(&x)?;
        scales
            .iter()
            .map(|&t| Ok((section(&sys.leaf_point(&x, leaf, sign * t)?)? - &base).norm()))
            .collect()
    });
    let mut worst = vec![0.0f64; scales.len()];
    for r in rows {
        for (w, v) in worst.iter_mut().zip(r?) {
            *w = w.max(v);
        }
    }
    let points: Vec<(f64, f64)> = scales.iter().copied().zip(worst).filter(|&(_, v)| v > NOISE_FLOOR).collect();
    if points.len() < 2 {
        return Err(LabError::InsufficientSignal);
    }
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let (beta_hat, _, r_squared) = linear_fit(&xs, &ys).ok_or(LabError::InsufficientSignal)?;
    Ok(HolderEstimate { beta_hat, r_squared, points })
}
