use crate::base::TorusPoint;
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::linalg::Mat;

/// Lyapunov spectrum along the orbit of x by QR re-orthogonalization.
///
/// A transient of n_steps/10 steps aligns the frame with the Oseledets
/// filtration before averaging starts; the average is over n_steps steps.
pub fn lyapunov_spectrum(coc: &Cocycle, x: &TorusPoint, n_steps: usize, qr_period: usize) -> Result<Vec<f64>> {
    if n_steps < 1000 {
        return Err(LabError::InvalidArgument("n_steps must be at least 1000".into()));
    }
    if qr_period == 0 {
        return Err(LabError::InvalidArgument("qr_period must be at least 1".into()));
    }
    let d = coc.dim();
    let transient = n_steps / 10;
    let mut q = Mat::identity(d, d);
    let mut sums = vec![0.0f64; d];
    let mut z = x.clone();
    let total = transient + n_steps;
    let mut since = 0;
    for step in 0..total {
        q = coc.eval(&z) * q;
        z = coc.base.step(&z, 1);
        since += 1;
        if since == qr_period || step + 1 == transient || step + 1 == total {
            since = 0;
            let qr = q.clone().qr();
            let r = qr.r();
            let mut qm = qr.q();
            for i in 0..d {
                let rii = r[(i, i)];
                if rii == 0.0 || !rii.is_finite() {
                    return Err(LabError::Degenerate { step });
                }
                if rii < 0.0 {
                    qm.column_mut(i).neg_mut();
                }
                if step >= transient {
                    sums[i] += rii.abs().ln();
                }
            }
            q = qm;
        }
    }
    let mut out: Vec<f64> = sums.iter().map(|s| s / n_steps as f64).collect();
    out.sort_by(|a, b| b.partial_cmp(a).unwrap());
    Ok(out)
}
