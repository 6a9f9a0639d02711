//! Invariant Riemannian metrics of bounded cocycles as circumcenters of orbits
//! in the cone of symmetric positive definite matrices.

use serde::Serialize;

use crate::base::TorusPoint;
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::linalg::{spd_distance, sym_fn, Mat, Vector};

const BOUND: f64 = 1e6;

/// A fiber metric: a symmetric positive definite matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdPoint(Mat);

impl SpdPoint {
    pub fn new(m: Mat) -> Result<Self> {
        if !m.is_square() {
            return Err(LabError::InvalidArgument("metric must be square".into()));
        }
        if (&m - m.transpose()).amax() > 1e-12 * m.amax().max(1.0) {
            return Err(LabError::InvalidArgument("metric must be symmetric".into()));
        }
        let sym = (&m + m.transpose()) * 0.5;
        if sym.clone().symmetric_eigen().eigenvalues.min() <= 0.0 {
            return Err(LabError::InvalidArgument("metric must be positive definite".into()));
        }
        Ok(SpdPoint(sym))
    }

    pub fn matrix(&self) -> &Mat {
        &self.0
    }

    pub fn distance(&self, other: &SpdPoint) -> f64 {
        spd_distance(&self.0, &other.0)
    }

    /// Pullback Aᵀ g A.
    pub fn pullback(&self, a: &Mat) -> SpdPoint {
        let m = a.transpose() * &self.0 * a;
        SpdPoint((&m + m.transpose()) * 0.5)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricReport {
    #[serde(skip)]
    pub metric: Mat,
    /// dist(A_xᵀ g(fx) A_x, g(x)).
    pub invariance_residual: f64,
    /// Circumradius of the orbit at x.
    pub radius: f64,
    pub n_range: usize,
}

/// Symmetric matrix ↔ vector with the Frobenius inner product.
fn sym_to_vec(m: &Mat) -> Vector {
    let d = m.nrows();
    let mut v = Vec::with_capacity(d * (d + 1) / 2);
    for i in 0..d {
        v.push(m[(i, i)]);
        for j in i + 1..d {
            v.push(m[(i, j)] * std::f64::consts::SQRT_2);
        }
    }
    Vector::from_vec(v)
}

fn vec_to_sym(v: &Vector, d: usize) -> Mat {
    let mut m = Mat::zeros(d, d);
    let mut k = 0;
    for i in 0..d {
        m[(i, i)] = v[k];
        k += 1;
        for j in i + 1..d {
            let x = v[k] / std::f64::consts::SQRT_2;
            m[(i, j)] = x;
            m[(j, i)] = x;
            k += 1;
        }
    }
    m
}

struct Ball {
    center: Vector,
    r2: f64,
}

/// Smallest ball through the given points (in their affine hull).
fn circumball(pts: &[Vector], idx: &[usize], dim: usize) -> Ball {
    match idx.len() {
        0 => Ball { center: Vector::zeros(dim), r2: -1.0 },
        1 => Ball { center: pts[idx[0]].clone(), r2: 0.0 },
        n => {
            let p0 = &pts[idx[0]];
            let q: Vec<Vector> = idx[1..].iter().map(|&i| &pts[i] - p0).collect();
            let g = Mat::from_fn(n - 1, n - 1, |i, j| q[i].dot(&q[j]));
            let rhs = Vector::from_fn(n - 1, |i, _| 0.5 * q[i].norm_squared());
            let alpha = g.svd(true, true).solve(&rhs, 1e-14 * rhs.amax().max(f64::MIN_POSITIVE)).expect("factors computed");
            let mut center = p0.clone();
            for (a, qi) in alpha.iter().zip(&q) {
                center += qi * *a;
            }
            let r2 = idx.iter().map(|&i| (&pts[i] - &center).norm_squared()).fold(0.0, f64::max);
            Ball { center, r2 }
        }
    }
}

fn welzl(pts: &[Vector], n: usize, boundary: &mut Vec<usize>, dim: usize) -> Ball {
    if n == 0 || boundary.len() == dim + 1 {
        return circumball(pts, boundary, dim);
    }
    let ball = welzl(pts, n - 1, boundary, dim);
    let p = &pts[n - 1];
    if ball.r2 >= 0.0 && (p - &ball.center).norm_squared() <= ball.r2 * (1.0 + 1e-12) + 1e-300 {
        return ball;
    }
    boundary.push(n - 1);
    let ball = welzl(pts, n - 1, boundary, dim);
    boundary.pop();
    ball
}

/// Euclidean minimal enclosing ball (Welzl), points visited in a fixed scrambled order.
fn min_enclosing_ball(points: &[Vector]) -> Ball {
    let dim = points[0].len();
    let mut order: Vec<usize> = (0..points.len()).collect();
    // deterministic scramble: multiplicative stride coprime to the length
    let n = order.len();
    let stride = (1..).map(|k| 7919 * k + 1).find(|s| gcd(*s, n) == 1).unwrap();
    for (i, o) in order.iter_mut().enumerate() {
        *o = (i * stride) % n;
    }
    let pts: Vec<Vector> = order.iter().map(|&i| points[i].clone()).collect();
    welzl(&pts, pts.len(), &mut Vec::new(), dim)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Affine-invariant circumcenter of SPD matrices: subgradient steps toward the
/// farthest point (step 1/(t+1)), then minimal enclosing balls in the tangent
/// space at the current center until it stops moving.
pub fn spd_circumcenter(points: &[Mat], iterations: usize) -> Result<(Mat, f64)> {
    let d = points.first().ok_or_else(|| LabError::InvalidArgument("no points".into()))?.nrows();
    let mut c = Mat::identity(d, d);
    let log_at = |c: &Mat, p: &Mat| -> Mat {
        let cis = sym_fn(c, |l| 1.0 / l.sqrt());
        sym_fn(&(&cis * p * &cis), f64::ln)
    };
    let exp_at = |c: &Mat, h: &Mat| -> Mat {
        let cs = sym_fn(c, f64::sqrt);
        let m = &cs * sym_fn(h, f64::exp) * &cs;
        (&m + m.transpose()) * 0.5
    };
    for t in 0..iterations {
        let far = points
            .iter()
            .map(|p| (spd_distance(&c, p), p))
            .max_by(|a, b| a.0.partial_cmp(&b.0).unwrap())
            .unwrap();
        let step = log_at(&c, far.1) / (t as f64 + 1.0);
        if step.norm() < 1e-8 {
            break;
        }
        c = exp_at(&c, &step);
    }
    for _ in 0..100 {
        let tangent: Vec<Vector> = points.iter().map(|p| sym_to_vec(&log_at(&c, p))).collect();
        let ball = min_enclosing_ball(&tangent);
        let h = vec_to_sym(&ball.center, d);
        c = exp_at(&c, &h);
        if h.norm() < 1e-14 {
            break;
        }
    }
    let radius = points.iter().map(|p| spd_distance(&c, p)).fold(0.0, f64::max);
    Ok((c, radius))
}

fn metric_at(coc: &Cocycle, x: &TorusPoint, n_range: usize, iterations: usize) -> Result<(Mat, f64)> {
    let mut pts = vec![Mat::identity(coc.dim(), coc.dim())];
    for backward in [false, true] {
        for (fwd, _) in coc.iterate_path(x, n_range, backward)?.into_iter().skip(1) {
            let g = fwd.transpose() * &fwd;
            let norm = g.norm();
            if !(norm <= BOUND) {
                return Err(LabError::NotBounded { norm });
            }
            pts.push((&g + g.transpose()) * 0.5);
        }
    }
    spd_circumcenter(&pts, iterations)
}

/// Circumcenter of {(A^n_x)ᵀ A^n_x : |n| ≤ n_range} and its invariance residual.
pub fn invariant_metric(coc: &Cocycle, x: &TorusPoint, n_range: usize, iterations: usize) -> Result<MetricReport> {
    let (g, radius) = metric_at(coc, x, n_range, iterations)?;
    let fx = coc.base.step(x, 1);
    let (gf, _) = metric_at(coc, &fx, n_range, iterations)?;
    let a = coc.eval(x);
    let pulled = a.transpose() * gf * &a;
    let invariance_residual = spd_distance(&pulled, &g);
    Ok(MetricReport { metric: g, invariance_residual, radius, n_range })
}
