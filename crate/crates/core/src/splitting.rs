//! Invariant splittings E¹ ⊕ … ⊕ E^ℓ of perturbations of a constant cocycle
//! with separated eigenvalue moduli, by forward/backward power iteration.

use serde::Serialize;

use crate::base::TorusPoint;
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::linalg::{max_principal_angle, Mat};
use crate::lyapunov::lyapunov_spectrum;
use crate::sampling::{map_samples, sample_points, STREAM_POINTS};

const RANK_ANGLE: f64 = 1e-6;

/// Eigenvalue-modulus groups ρ₁ < … < ρ_ℓ of a constant matrix with their multiplicities.
pub fn modulus_groups(a: &Mat, margin: f64) -> Vec<(f64, usize)> {
    let mut moduli: Vec<f64> = a.clone().complex_eigenvalues().iter().map(|z| z.norm()).collect();
    moduli.sort_by(|p, q| p.partial_cmp(q).unwrap());
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for r in moduli {
        match groups.last_mut() {
            Some((rho, n)) if r <= *rho * (1.0 + margin) => {
                *rho = (*rho * *n as f64 + r) / (*n + 1) as f64;
                *n += 1;
            }
            _ => groups.push((r, 1)),
        }
    }
    groups
}

/// Orthonormal Q whose leading columns span the most expanded directions of
/// P = F_last ⋯ F_first, found by QR-factorizing Pᵀ from the right, together
/// with the accumulated log growth of each column.
fn growth_frame(factors: &[Mat]) -> (Mat, Vec<f64>) {
    let d = factors[0].nrows();
    // a fixed generic start so that no direction is missed
    let mut q = Mat::from_fn(d, d, |i, j| ((i * 7 + j * 13 + 1) as f64).sin()).qr().q();
    let mut logs = vec![0.0; d];
    for f in factors.iter().rev() {
        let qr = (f.transpose() * &q).qr();
        let r = qr.r();
        for (i, l) in logs.iter_mut().enumerate() {
            *l += r[(i, i)].abs().ln();
        }
        q = qr.q();
    }
    (q, logs)
}

/// Basis of U ∩ V from principal vectors with angle below the rank threshold.
fn intersect(u: &Mat, v: &Mat, expected: usize) -> Result<Mat> {
    let svd = (u.transpose() * v).svd(true, false);
    let uu = svd.u.expect("requested");
    let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
    idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
    let rank = idx.iter().filter(|&&i| svd.singular_values[i].min(1.0).acos() < RANK_ANGLE).count();
    if rank != expected {
        return Err(LabError::GapTooSmall { ratio: rank as f64 / expected.max(1) as f64 });
    }
    let mut out = Mat::zeros(u.nrows(), expected);
    for (c, &i) in idx.iter().take(expected).enumerate() {
        out.set_column(c, &(u * uu.column(i)));
    }
    Ok(out)
}

/// The splitting at x, slowest block first.
pub fn splitting_at(coc: &Cocycle, x: &TorusPoint, dims: &[usize], n_power: usize) -> Result<Vec<Mat>> {
    let d = coc.dim();
    if n_power == 0 || dims.iter().sum::<usize>() != d {
        return Err(LabError::InvalidArgument("splitting needs n_power > 0 and block sizes summing to d".into()));
    }
    let mut fwd = Vec::with_capacity(n_power);
    let mut bwd = Vec::with_capacity(n_power);
    let (mut p, mut q) = (x.clone(), x.clone());
    for _ in 0..n_power {
        fwd.push(coc.eval(&p));
        p = coc.base.step(&p, 1);
        q = coc.base.step(&q, -1);
        bwd.push(coc.eval_inv(&q));
    }
    let (qf, lf) = growth_frame(&fwd);
    let (qb, lb) = growth_frame(&bwd);
    if lf.iter().chain(&lb).any(|l| !l.is_finite()) {
        return Err(LabError::Overflow { steps: n_power as i64 });
    }
    // forward frame: fastest group first; backward frame: slowest group first
    for (logs, order) in [(&lf, dims.iter().rev().copied().collect::<Vec<_>>()), (&lb, dims.to_vec())] {
        let mut edge = 0;
        for w in order.windows(2) {
            edge += w[0];
            let ratio = (logs[edge - 1] - logs[edge]).exp();
            if ratio < 2.0 {
                return Err(LabError::GapTooSmall { ratio });
            }
        }
    }
    let mut blocks = Vec::with_capacity(dims.len());
    let mut below = 0;
    for &di in dims {
        // forward filtration E¹⊕…⊕Eⁱ and backward filtration Eⁱ⊕…⊕E^ℓ
        let slow = below + di;
        let f = qf.columns(d - slow, slow).into_owned();
        let g = qb.columns(below, d - below).into_owned();
        blocks.push(if slow == d {
            g
        } else if below == 0 {
            f
        } else {
            intersect(&f, &g, di)?
        });
        below += di;
    }
    Ok(blocks)
}

#[derive(Clone, Debug, Serialize)]
pub struct SplittingReport {
    pub samples: usize,
    pub n_power: usize,
    /// ρ_i of the unperturbed matrix, ascending.
    pub moduli: Vec<f64>,
    pub dims: Vec<usize>,
    /// max over samples of the angle between B_x Eⁱ_x and Eⁱ_{fx}.
    pub invariance_residual: f64,
    /// max over samples and blocks of the angle to the unperturbed Eⁱ.
    pub max_angle_to_reference: f64,
    /// Mean Lyapunov exponent of B on each block (from the spectrum at the first sample).
    pub block_exponents: Vec<f64>,
}

/// Computes the B-invariant splitting near the eigen-splitting of the constant matrix `a`.
pub fn invariant_splitting(
    b: &Cocycle,
    a: &Mat,
    n_power: usize,
    samples: usize,
    seed: u64,
    serial: bool,
) -> Result<SplittingReport> {
    let groups = modulus_groups(a, 1e-8);
    if groups.len() < 2 {
        return Err(LabError::GapTooSmall { ratio: 1.0 });
    }
    let dims: Vec<usize> = groups.iter().map(|g| g.1).collect();
    let reference = Cocycle::new(b.base.clone(), std::sync::Arc::new(crate::field::MatrixField::constant(a.clone())?));
    let origin = TorusPoint::origin(b.base.dim());
    let unperturbed = splitting_at(&reference, &origin, &dims, n_power)?;
    let pts = sample_points(b.base.dim(), samples, seed, STREAM_POINTS);
    let rows = map_samples(&pts, serial, |_, x| -> Result<(f64, f64)> {
        let ex = splitting_at(b, x, &dims, n_power)?;
        let efx = splitting_at(b, &b.base.step(x, 1), &dims, n_power)?;
        let bx = b.eval(x);
        let mut inv: f64 = 0.0;
        let mut dist: f64 = 0.0;
        for i in 0..dims.len() {
            inv = inv.max(max_principal_angle(&(&bx * &ex[i]), &efx[i]));
            dist = dist.max(max_principal_angle(&ex[i], &unperturbed[i]));
        }
        Ok((inv, dist))
    });
    let mut report = SplittingReport {
        samples,
        n_power,
        moduli: groups.iter().map(|g| g.0).collect(),
        dims: dims.clone(),
        invariance_residual: 0.0,
        max_angle_to_reference: 0.0,
        block_exponents: Vec::new(),
    };
    for r in rows {
        let (inv, dist) = r?;
        report.invariance_residual = report.invariance_residual.max(inv);
        report.max_angle_to_reference = report.max_angle_to_reference.max(dist);
    }
    let x0 = pts.first().cloned().unwrap_or(origin);
    let mut spectrum = lyapunov_spectrum(b, &x0, 10_000, 1)?;
    spectrum.reverse();
    let mut at = 0;
    for &di in &dims {
        report.block_exponents.push(spectrum[at..at + di].iter().sum::<f64>() / di as f64);
        at += di;
    }
    Ok(report)
}
