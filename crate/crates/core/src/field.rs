//! Matrix- and vector-valued fields on the torus.

use std::f64::consts::TAU;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::base::{HyperbolicAutomorphism, TorusPoint};
use crate::error::{LabError, Result};
use crate::linalg::{Mat, Vector};

/// A map x ↦ A(x) ∈ GL(d, R).
pub trait Generator: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &TorusPoint) -> Mat;

    fn eval_inv(&self, x: &TorusPoint) -> Mat {
        self.eval(x).try_inverse().expect("generator values are invertible")
    }

    fn is_constant(&self) -> bool {
        false
    }
}

/// A map x ↦ φ(x) ∈ R^d.
pub trait VectorSection: Send + Sync {
    fn dim(&self) -> usize;

    fn eval(&self, x: &TorusPoint) -> Vector;
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FourierTermSpec {
    pub k: Vec<i64>,
    #[serde(rename = "P", default)]
    pub p: Vec<f64>,
    #[serde(rename = "Q", default)]
    pub q: Vec<f64>,
}

/// Serialized form of a [`MatrixField`]; matrices are row-major.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixFieldSpec {
    pub dimension: usize,
    pub constant_factor: Vec<f64>,
    #[serde(default)]
    pub terms: Vec<FourierTermSpec>,
}

#[derive(Clone, Debug)]
struct FourierTerm {
    k: Vec<i64>,
    p: Mat,
    q: Mat,
}

/// C₀ · exp(Σ_k P_k cos 2πk·x + Q_k sin 2πk·x).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "MatrixFieldSpec", into = "MatrixFieldSpec")]
pub struct MatrixField {
    c0: Mat,
    c0_inv: Mat,
    terms: Vec<FourierTerm>,
}

fn square(d: usize, v: &[f64], what: &str) -> Result<Mat> {
    if v.len() != d * d {
        return Err(LabError::config(what, format!("expected {} entries, got {}", d * d, v.len())));
    }
    Ok(Mat::from_row_slice(d, d, v))
}

fn row_major(m: &Mat) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl TryFrom<MatrixFieldSpec> for MatrixField {
    type Error = LabError;

    fn try_from(s: MatrixFieldSpec) -> Result<Self> {
        let d = s.dimension;
        if d == 0 {
            return Err(LabError::config("dimension", "must be positive"));
        }
        let c0 = square(d, &s.constant_factor, "constant_factor")?;
        let mut terms = Vec::with_capacity(s.terms.len());
        for (i, t) in s.terms.iter().enumerate() {
            let p = if t.p.is_empty() { Mat::zeros(d, d) } else { square(d, &t.p, &format!("terms[{i}].P"))? };
            let q = if t.q.is_empty() { Mat::zeros(d, d) } else { square(d, &t.q, &format!("terms[{i}].Q"))? };
            terms.push(FourierTerm { k: t.k.clone(), p, q });
        }
        MatrixField::build(c0, terms)
    }
}

impl From<MatrixField> for MatrixFieldSpec {
    fn from(f: MatrixField) -> Self {
        MatrixFieldSpec {
            dimension: f.c0.nrows(),
            constant_factor: row_major(&f.c0),
            terms: f
                .terms
                .iter()
                .map(|t| FourierTermSpec { k: t.k.clone(), p: row_major(&t.p), q: row_major(&t.q) })
                .collect(),
        }
    }
}

impl MatrixField {
    fn build(c0: Mat, terms: Vec<FourierTerm>) -> Result<Self> {
        let c0_inv = c0
            .clone()
            .try_inverse()
            .ok_or_else(|| LabError::config("constant_factor", "matrix is singular"))?;
        Ok(MatrixField { c0, c0_inv, terms })
    }

    pub fn constant(c0: Mat) -> Result<Self> {
        Self::build(c0, Vec::new())
    }

    /// Adds P cos 2πk·x + Q sin 2πk·x to the exponent.
    pub fn with_term(mut self, k: &[i64], p: Mat, q: Mat) -> Result<Self> {
        let d = self.dim();
        if p.shape() != (d, d) || q.shape() != (d, d) {
            return Err(LabError::DimensionMismatch { expected: d, got: p.nrows() });
        }
        self.terms.push(FourierTerm { k: k.to_vec(), p, q });
        Ok(self)
    }

    pub fn constant_factor(&self) -> &Mat {
        &self.c0
    }

    pub fn spec(&self) -> MatrixFieldSpec {
        self.clone().into()
    }

    pub fn exponent(&self, x: &TorusPoint) -> Mat {
        let d = self.dim();
        let mut m = Mat::zeros(d, d);
        for t in &self.terms {
            let ph = TAU * x.phase(&t.k);
            m += &t.p * ph.cos() + &t.q * ph.sin();
        }
        m
    }
}

impl Generator for MatrixField {
    fn dim(&self) -> usize {
        self.c0.nrows()
    }

    fn eval(&self, x: &TorusPoint) -> Mat {
        if self.terms.is_empty() {
            return self.c0.clone();
        }
        &self.c0 * self.exponent(x).exp()
    }

    fn eval_inv(&self, x: &TorusPoint) -> Mat {
        if self.terms.is_empty() {
            return self.c0_inv.clone();
        }
        (-self.exponent(x)).exp() * &self.c0_inv
    }

    fn is_constant(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorTermSpec {
    pub k: Vec<i64>,
    #[serde(default)]
    pub cos: Vec<f64>,
    #[serde(default)]
    pub sin: Vec<f64>,
}

/// v₀ + Σ_k a_k cos 2πk·x + b_k sin 2πk·x.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VectorField {
    pub dimension: usize,
    pub constant: Vec<f64>,
    #[serde(default)]
    pub terms: Vec<VectorTermSpec>,
}

impl VectorField {
    pub fn constant(v: &[f64]) -> Self {
        VectorField { dimension: v.len(), constant: v.to_vec(), terms: Vec::new() }
    }

    pub fn zero(d: usize) -> Self {
        Self::constant(&vec![0.0; d])
    }

    pub fn with_term(mut self, k: &[i64], cos: &[f64], sin: &[f64]) -> Self {
        self.terms.push(VectorTermSpec { k: k.to_vec(), cos: cos.to_vec(), sin: sin.to_vec() });
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.constant.len() != self.dimension {
            return Err(LabError::config("constant", "length differs from dimension"));
        }
        for (i, t) in self.terms.iter().enumerate() {
            for (name, v) in [("cos", &t.cos), ("sin", &t.sin)] {
                if !v.is_empty() && v.len() != self.dimension {
                    return Err(LabError::config(format!("terms[{i}].{name}"), "length differs from dimension"));
                }
            }
        }
        Ok(())
    }
}

impl VectorSection for VectorField {
    fn dim(&self) -> usize {
        self.dimension
    }

    fn eval(&self, x: &TorusPoint) -> Vector {
        let mut v = Vector::from_column_slice(&self.constant);
        for t in &self.terms {
            let ph = TAU * x.phase(&t.k);
            let (s, c) = ph.sin_cos();
            for i in 0..self.dimension {
                v[i] += t.cos.get(i).copied().unwrap_or(0.0) * c + t.sin.get(i).copied().unwrap_or(0.0) * s;
            }
        }
        v
    }
}

/// x ↦ C(fx) · A(x) · C(x)⁻¹.
pub struct Conjugated {
    pub base: Arc<HyperbolicAutomorphism>,
    pub a: Arc<dyn Generator>,
    pub c: Arc<dyn Generator>,
}

impl Generator for Conjugated {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn eval(&self, x: &TorusPoint) -> Mat {
        let fx = self.base.step(x, 1);
        self.c.eval(&fx) * self.a.eval(x) * self.c.eval_inv(x)
    }

    fn eval_inv(&self, x: &TorusPoint) -> Mat {
        let fx = self.base.step(x, 1);
        self.c.eval(x) * self.a.eval_inv(x) * self.c.eval_inv(&fx)
    }

    fn is_constant(&self) -> bool {
        self.a.is_constant() && self.c.is_constant()
    }
}

/// Generator of the inverse cocycle over f⁻¹: x ↦ A(f⁻¹x)⁻¹.
pub struct TimeReversed {
    pub base: Arc<HyperbolicAutomorphism>,
    pub a: Arc<dyn Generator>,
}

impl Generator for TimeReversed {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn eval(&self, x: &TorusPoint) -> Mat {
        self.a.eval_inv(&self.base.step(x, -1))
    }

    fn eval_inv(&self, x: &TorusPoint) -> Mat {
        self.a.eval(&self.base.step(x, -1))
    }

    fn is_constant(&self) -> bool {
        self.a.is_constant()
    }
}

/// x ↦ ψ(x) A(x) for a scalar field ψ.
pub struct Scaled {
    pub psi: Arc<dyn Generator>,
    pub a: Arc<dyn Generator>,
}

impl Generator for Scaled {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn eval(&self, x: &TorusPoint) -> Mat {
        self.a.eval(x) * self.psi.eval(x)[(0, 0)]
    }

    fn eval_inv(&self, x: &TorusPoint) -> Mat {
        self.a.eval_inv(x) * self.psi.eval_inv(x)[(0, 0)]
    }

    fn is_constant(&self) -> bool {
        self.a.is_constant() && self.psi.is_constant()
    }
}

/// φ(x) = η(x) − F(x)^{-1} η(fx): a twisted coboundary with known solution η.
pub struct TwistedCoboundary {
    pub base: Arc<HyperbolicAutomorphism>,
    pub twist: Arc<dyn Generator>,
    pub eta: Arc<dyn VectorSection>,
}

impl VectorSection for TwistedCoboundary {
    fn dim(&self) -> usize {
        self.eta.dim()
    }

    fn eval(&self, x: &TorusPoint) -> Vector {
        let fx = self.base.step(x, 1);
        self.eta.eval(x) - self.twist.eval_inv(x) * self.eta.eval(&fx)
    }
}

/// Rotation of the plane by angle θ.
pub fn rotation(theta: f64) -> Mat {
    let (s, c) = theta.sin_cos();
    Mat::from_row_slice(2, 2, &[c, -s, s, c])
}
