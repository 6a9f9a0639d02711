use std::sync::Arc;

use crate::base::{HyperbolicAutomorphism, TorusPoint};
use crate::error::{LabError, Result};
use crate::field::Generator;
use crate::linalg::Mat;

pub const OVERFLOW_NORM: f64 = 1e300;

/// A generator bound to a base system.
#[derive(Clone)]
pub struct Cocycle {
    pub base: Arc<HyperbolicAutomorphism>,
    pub generator: Arc<dyn Generator>,
}

impl std::fmt::Debug for Cocycle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Cocycle").field("dim", &self.dim()).field("base", &self.base.matrix()).finish()
    }
}

impl Cocycle {
    pub fn new(base: Arc<HyperbolicAutomorphism>, generator: Arc<dyn Generator>) -> Self {
        Cocycle { base, generator }
    }

    pub fn dim(&self) -> usize {
        self.generator.dim()
    }

    pub fn eval(&self, x: &TorusPoint) -> Mat {
        self.generator.eval(x)
    }

    pub fn eval_inv(&self, x: &TorusPoint) -> Mat {
        self.generator.eval_inv(x)
    }

    /// A_x^n; for n < 0 the inverse of A^{|n|} at f^n x.
    pub fn iterate(&self, x: &TorusPoint, n: i64) -> Result<Mat> {
        let d = self.dim();
        let mut p = Mat::identity(d, d);
        if n >= 0 {
            let mut z = x.clone();
            for k in 0..n {
                p = self.eval(&z) * p;
                check(&p, k + 1)?;
                z = self.base.step(&z, 1);
            }
        } else {
            // A^{-n}_x = A(f^{-n}x)^{-1} ⋯ A(f^{-1}x)^{-1}
            let mut z = x.clone();
            for k in 0..-n {
                z = self.base.step(&z, -1);
                p = self.eval_inv(&z) * p;
                check(&p, -(k + 1))?;
            }
        }
        Ok(p)
    }

    /// (A_x^n)^{-1} formed directly as a product of inverses.
    pub fn iterate_inv(&self, x: &TorusPoint, n: i64) -> Result<Mat> {
        let d = self.dim();
        let mut p = Mat::identity(d, d);
        if n >= 0 {
            let mut z = x.clone();
            for k in 0..n {
                p *= self.eval_inv(&z);
                check(&p, k + 1)?;
                z = self.base.step(&z, 1);
            }
        } else {
            let mut z = x.clone();
            for k in 0..-n {
                z = self.base.step(&z, -1);
                p *= self.eval(&z);
                check(&p, -(k + 1))?;
            }
        }
        Ok(p)
    }

    /// Forward and inverse iterates for n = 0..=n_max, in one pass.
    pub fn iterate_path(&self, x: &TorusPoint, n_max: usize, backward: bool) -> Result<Vec<(Mat, Mat)>> {
        let d = self.dim();
        let mut fwd = Mat::identity(d, d);
        let mut inv = Mat::identity(d, d);
        let mut out = Vec::with_capacity(n_max + 1);
        out.push((fwd.clone(), inv.clone()));
        let mut z = x.clone();
        for k in 1..=n_max as i64 {
            if backward {
                z = self.base.step(&z, -1);
                fwd = self.eval_inv(&z) * fwd;
                inv *= self.eval(&z);
            } else {
                fwd = self.eval(&z) * fwd;
                inv *= self.eval_inv(&z);
                z = self.base.step(&z, 1);
            }
            let steps = if backward { -k } else { k };
            check(&fwd, steps)?;
            check(&inv, steps)?;
            out.push((fwd.clone(), inv.clone()));
        }
        Ok(out)
    }

    /// The inverse cocycle over f⁻¹, x ↦ A(f⁻¹x)⁻¹.
    pub fn time_reversed(&self) -> Result<Cocycle> {
        let inv_base = HyperbolicAutomorphism::new(&self.base.inverse_matrix())?
            .with_leaf_radius(self.base.leaf_radius())?;
        Ok(Cocycle {
            base: Arc::new(inv_base),
            generator: Arc::new(crate::field::TimeReversed { base: self.base.clone(), a: self.generator.clone() }),
        })
    }
}

fn check(p: &Mat, steps: i64) -> Result<()> {
    let n = p.amax();
    if !(n <= OVERFLOW_NORM) {
        return Err(LabError::Overflow { steps });
    }
    Ok(())
}
