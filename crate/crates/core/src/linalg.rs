//! Small dense helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};

use crate::error::{LabError, Result};

pub type Mat = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn spectral_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().max()
}

/// Ratio of extreme singular values; infinite for singular input.
pub fn condition_number(m: &Mat) -> f64 {
    if m.is_empty() {
        return 1.0;
    }
    let s = m.clone().singular_values();
    let lo = s.min();
    if lo <= 0.0 {
        f64::INFINITY
    } else {
        s.max() / lo
    }
}

pub fn inverse(m: &Mat) -> Result<Mat> {
    m.clone()
        .try_inverse()
        .ok_or(LabError::SingularC { cond: f64::INFINITY })
}

/// Relative difference ‖a − b‖ / max(‖b‖, tiny) in the spectral norm.
pub fn rel_diff(a: &Mat, b: &Mat) -> f64 {
    spectral_norm(&(a - b)) / spectral_norm(b).max(f64::MIN_POSITIVE)
}

/// Orthonormal basis for the column span, via thin QR.
pub fn orthonormalize(m: &Mat) -> Mat {
    let k = m.ncols();
    let q = m.clone().qr().q();
    q.columns(0, k).into_owned()
}

/// Cosines of the principal angles between two column spans (orthonormal inputs).
pub fn principal_cosines(a: &Mat, b: &Mat) -> Vec<f64> {
    if a.ncols() == 0 || b.ncols() == 0 {
        return Vec::new();
    }
    let s = (a.transpose() * b).singular_values();
    let mut v: Vec<f64> = s.iter().map(|c| c.min(1.0)).collect();
    v.sort_by(|x, y| y.partial_cmp(x).unwrap());
    v
}

/// Largest principal angle (radians) between two subspaces of equal dimension,
/// from the sine ‖(I − BBᵀ)A‖ so that small angles keep full precision.
pub fn max_principal_angle(a: &Mat, b: &Mat) -> f64 {
    if a.ncols() != b.ncols() || a.ncols() == 0 {
        return std::f64::consts::FRAC_PI_2;
    }
    let (a, b) = (orthonormalize(a), orthonormalize(b));
    spectral_norm(&(&a - &b * (b.transpose() * &a))).min(1.0).asin()
}

/// Symmetric eigen-decomposition applied to the eigenvalues by `g`.
pub fn sym_fn(m: &Mat, g: impl Fn(f64) -> f64) -> Mat {
    let sym = (m + m.transpose()) * 0.5;
    let e = sym.symmetric_eigen();
    let d = Mat::from_diagonal(&e.eigenvalues.map(g));
    &e.eigenvectors * d * e.eigenvectors.transpose()
}

/// Affine-invariant distance ‖log(A^{-1/2} B A^{-1/2})‖_F between SPD matrices.
pub fn spd_distance(a: &Mat, b: &Mat) -> f64 {
    let ais = sym_fn(a, |l| 1.0 / l.sqrt());
    let m = &ais * b * &ais;
    let sym = (&m + m.transpose()) * 0.5;
    sym.symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|l| l.ln().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Ordinary least squares y ≈ slope·x + intercept, returning (slope, intercept, r²).
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Option<(f64, f64, f64)> {
    let n = xs.len();
    if n < 2 || ys.len() != n {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    Some((slope, intercept, r2))
}

/// Kronecker product.
pub fn kron(a: &Mat, b: &Mat) -> Mat {
    a.kronecker(b)
}

/// Column-major flattening of a matrix into a vector.
pub fn vec_of(m: &Mat) -> Vector {
    Vector::from_column_slice(m.as_slice())
}

pub fn unvec(v: &Vector, rows: usize, cols: usize) -> Mat {
    Mat::from_column_slice(rows, cols, v.as_slice())
}
