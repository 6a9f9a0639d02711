//! Finite-range certificates for fiber bunching, domination, boundedness and
//! quasiconformality.

use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use crate::base::TorusPoint;
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::field::{Generator, Scaled};
use crate::linalg::{linear_fit, spectral_norm};
use crate::sampling::{map_samples, sample_points, STREAM_POINTS};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthKind {
    FiberBunching,
    Dominated,
    Bounded,
    Quasiconformal,
}

impl GrowthKind {
    pub fn name(self) -> &'static str {
        match self {
            GrowthKind::FiberBunching => "fiber_bunching",
            GrowthKind::Dominated => "dominated",
            GrowthKind::Bounded => "bounded",
            GrowthKind::Quasiconformal => "quasiconformal",
        }
    }

    fn geometric(self) -> bool {
        matches!(self, GrowthKind::FiberBunching | GrowthKind::Dominated)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inconclusive,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Clone, Debug)]
pub struct GrowthOptions {
    pub beta: f64,
    pub n_max: usize,
    pub samples: usize,
    pub seed: u64,
    pub margin: f64,
    pub serial: bool,
}

impl Default for GrowthOptions {
    fn default() -> Self {
        GrowthOptions { beta: 1.0, n_max: 64, samples: 16, seed: 0, margin: 0.02, serial: false }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthReport {
    pub kind: GrowthKind,
    pub beta: f64,
    pub n_max: usize,
    pub samples: usize,
    pub theta_hat: f64,
    #[serde(rename = "K_hat")]
    pub k_hat: f64,
    pub verdict: Verdict,
    /// Slope of log(running sup) against log n over the upper half of the range.
    pub growth_slope: f64,
}

impl GrowthReport {
    pub const CSV_HEADER: &'static str = "kind,beta,n_max,samples,theta_hat,K_hat,verdict";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.12e},{:.12e},{}",
            self.kind.name(),
            self.beta,
            self.n_max,
            self.samples,
            self.theta_hat,
            self.k_hat,
            self.verdict
        )
    }
}

fn validate(opts: &GrowthOptions) -> Result<()> {
    if opts.n_max < 16 {
        return Err(LabError::InvalidArgument("n_max must be at least 16".into()));
    }
    if opts.samples == 0 {
        return Err(LabError::InvalidArgument("samples must be at least 1".into()));
    }
    if !(opts.beta > 0.0 && opts.beta <= 1.0) {
        return Err(LabError::InvalidArgument("beta must lie in (0, 1]".into()));
    }
    Ok(())
}

/// Tested quantity per n for one sample and one time direction.
fn profile(coc: &Cocycle, x: &TorusPoint, kind: GrowthKind, opts: &GrowthOptions, backward: bool) -> Result<Vec<f64>> {
    let path = coc.iterate_path(x, opts.n_max, backward)?;
    let rate = if backward { 1.0 / coc.base.nu_hat() } else { coc.base.nu() };
    Ok(path
        .iter()
        .enumerate()
        .map(|(n, (fwd, inv))| {
            let base = rate.powf(opts.beta * n as f64);
            match kind {
                GrowthKind::FiberBunching => spectral_norm(fwd) * spectral_norm(inv) * base,
                GrowthKind::Dominated => spectral_norm(inv) * base,
                GrowthKind::Bounded => spectral_norm(fwd),
                GrowthKind::Quasiconformal => spectral_norm(fwd) * spectral_norm(inv),
            }
        })
        .collect())
}

/// Estimates θ and K for the requested growth hypothesis on sampled points.
pub fn growth_report(coc: &Cocycle, kind: GrowthKind, opts: &GrowthOptions) -> Result<GrowthReport> {
    validate(opts)?;
    let pts = sample_points(coc.base.dim(), opts.samples, opts.seed, STREAM_POINTS);
    let profiles = map_samples(&pts, opts.serial, |_, x| -> Result<[Vec<f64>; 2]> {
        Ok([profile(coc, x, kind, opts, false)?, profile(coc, x, kind, opts, true)?])
    });
    let mut running = vec![0.0f64; opts.n_max + 1];
    for p in profiles {
        for dir in p? {
            for (r, v) in running.iter_mut().zip(dir) {
                *r = r.max(v);
            }
        }
    }
    let n_max = opts.n_max;
    let top = running[n_max];
    for n in 1..=n_max {
        running[n] = running[n].max(running[n - 1]);
    }
    let growth_slope = {
        let (xs, ys): (Vec<f64>, Vec<f64>) =
            (n_max / 2..=n_max).map(|n| ((n as f64).ln(), running[n].max(f64::MIN_POSITIVE).ln())).unzip();
        linear_fit(&xs, &ys).map(|f| f.0).unwrap_or(0.0)
    };
    let (theta_hat, k_hat, verdict) = if kind.geometric() {
        let theta = top.powf(1.0 / n_max as f64);
        let k = (0..=n_max).map(|n| running[n] / theta.powi(n as i32)).fold(0.0, f64::max);
        let verdict = if theta < 1.0 - opts.margin {
            Verdict::Pass
        } else if theta > 1.0 + opts.margin {
            Verdict::Fail
        } else {
            Verdict::Inconclusive
        };
        (theta, k, verdict)
    } else {
        let k = running[n_max];
        let half = running[n_max / 2];
        let verdict = if k.is_finite() && (k - half) <= 1e-3 * half { Verdict::Pass } else { Verdict::Fail };
        (k.powf(1.0 / n_max as f64), k, verdict)
    };
    Ok(GrowthReport { kind, beta: opts.beta, n_max, samples: opts.samples, theta_hat, k_hat, verdict, growth_slope })
}

/// Sup of ‖A^n‖·‖(A^n)⁻¹‖ over samples and |n| ≤ n_max.
pub fn quasiconformal_distortion(coc: &Cocycle, opts: &GrowthOptions) -> Result<GrowthReport> {
    growth_report(coc, GrowthKind::Quasiconformal, opts)
}

/// Log-log slope of ‖(ψA)^n_x‖ over the upper dyadic n-range, maximized over samples.
pub fn polynomial_growth_degree(
    coc: &Cocycle,
    psi: Arc<dyn Generator>,
    n_max: usize,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    if n_max < 64 {
        return Err(LabError::InvalidArgument("n_max must be at least 64".into()));
    }
    if psi.dim() != 1 {
        return Err(LabError::DimensionMismatch { expected: 1, got: psi.dim() });
    }
    let scaled = Cocycle::new(coc.base.clone(), Arc::new(Scaled { psi, a: coc.generator.clone() }));
    let mut ns = Vec::new();
    let mut n = n_max;
    while n >= n_max / 8 && n >= 1 {
        ns.push(n);
        n /= 2;
    }
    ns.reverse();
    let pts = sample_points(coc.base.dim(), samples.max(1), seed, STREAM_POINTS);
    let mut best: Option<(f64, f64)> = None;
    for x in &pts {
        let path = scaled.iterate_path(x, n_max, false)?;
        let xs: Vec<f64> = ns.iter().map(|&n| (n as f64).ln()).collect();
        let ys: Vec<f64> = ns.iter().map(|&n| spectral_norm(&path[n].0).ln()).collect();
        let (slope, intercept, _) = linear_fit(&xs, &ys).expect("at least two dyadic points");
        if best.is_none_or(|(s, _)| slope > s) {
            best = Some((slope, intercept.exp()));
        }
    }
    Ok(best.expect("at least one sample"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::base::HyperbolicAutomorphism;
    use crate::field::MatrixField;
    use crate::linalg::Mat;

    fn constant(a: Mat) -> Cocycle {
        Cocycle::new(Arc::new(HyperbolicAutomorphism::cat_map()), Arc::new(MatrixField::constant(a).unwrap()))
    }

    #[test]
    fn rotation_is_bounded_by_one() {
        let r = growth_report(&constant(crate::field::rotation(0.7)), GrowthKind::Bounded, &GrowthOptions::default())
            .unwrap();
        assert!((r.k_hat - 1.0).abs() < 1e-12);
        assert_eq!(r.verdict, Verdict::Pass);
    }

    #[test]
    fn small_n_max_rejected() {
        let opts = GrowthOptions { n_max: 8, ..Default::default() };
        assert!(growth_report(&constant(Mat::identity(2, 2)), GrowthKind::Bounded, &opts).is_err());
    }
}
