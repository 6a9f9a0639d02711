//! Invariant flags {0} = V⁰ ⊂ V¹ ⊂ … ⊂ Vᵏ = Rᵈ and the block-triangular
//! decomposition of a cocycle that preserves one.

use std::sync::Arc;

use nalgebra::linalg::Schur;
use serde::{Deserialize, Serialize};

use crate::base::TorusPoint;
use crate::cocycle::Cocycle;
use crate::error::{LabError, Result};
use crate::field::Generator;
use crate::linalg::{max_principal_angle, orthonormalize, Mat};
use crate::sampling::{sample_points, STREAM_MISC};

const INVARIANCE_TOL: f64 = 1e-8;

/// A flag given by orthonormal bases of its subspaces.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FlagSpec", into = "FlagSpec")]
pub struct Flag {
    dims: Vec<usize>,
    bases: Vec<Mat>,
}

/// Text form of a [`Flag`]: each basis as a list of rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlagSpec {
    pub dimensions: Vec<usize>,
    pub bases: Vec<Vec<Vec<f64>>>,
}

impl TryFrom<FlagSpec> for Flag {
    type Error = LabError;

    fn try_from(spec: FlagSpec) -> Result<Self> {
        let bases = spec
            .bases
            .iter()
            .map(|rows| {
                let r = rows.len();
                let c = rows.first().map_or(0, Vec::len);
                if rows.iter().any(|row| row.len() != c) {
                    return Err(LabError::InvalidArgument("ragged basis matrix".into()));
                }
                Ok(Mat::from_fn(r, c, |i, j| rows[i][j]))
            })
            .collect::<Result<Vec<_>>>()?;
        let flag = Flag::new(bases)?;
        if flag.dims != spec.dimensions {
            return Err(LabError::InvalidArgument("dimensions do not match bases".into()));
        }
        Ok(flag)
    }
}

impl From<Flag> for FlagSpec {
    fn from(f: Flag) -> Self {
        let bases = f
            .bases
            .iter()
            .map(|b| b.row_iter().map(|r| r.iter().copied().collect()).collect())
            .collect();
        FlagSpec { dimensions: f.dims, bases }
    }
}

impl Flag {
    /// Builds a flag from bases of V¹, …, Vᵏ; the last one must span Rᵈ.
    pub fn new(bases: Vec<Mat>) -> Result<Self> {
        let d = bases.first().map(|b| b.nrows()).ok_or_else(|| LabError::InvalidArgument("empty flag".into()))?;
        let mut dims = Vec::with_capacity(bases.len());
        let mut out: Vec<Mat> = Vec::with_capacity(bases.len());
        for b in &bases {
            if b.nrows() != d {
                return Err(LabError::DimensionMismatch { expected: d, got: b.nrows() });
            }
            let q = orthonormalize(b);
            if let Some(prev) = out.last() {
                if q.ncols() <= prev.ncols() {
                    return Err(LabError::InvalidArgument("flag dimensions must increase".into()));
                }
                // previous subspace must sit inside this one
                let resid = (prev - &q * (q.transpose() * prev)).amax();
                if resid > 1e-10 {
                    return Err(LabError::InvalidArgument(format!("flag is not nested (residual {resid:.2e})")));
                }
            }
            dims.push(q.ncols());
            out.push(q);
        }
        if *dims.last().unwrap() != d {
            return Err(LabError::InvalidArgument("last flag subspace must be the whole space".into()));
        }
        Ok(Flag { dims, bases: out })
    }

    /// The flag {0} ⊂ Rᵈ.
    pub fn trivial(d: usize) -> Self {
        Flag { dims: vec![d], bases: vec![Mat::identity(d, d)] }
    }

    /// Flag spanned by leading columns of an orthonormal Q.
    pub fn from_columns(q: &Mat, dims: &[usize]) -> Result<Self> {
        Flag::new(dims.iter().map(|&k| q.columns(0, k).into_owned()).collect())
    }

    pub fn levels(&self) -> usize {
        self.dims.len()
    }

    pub fn dim(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    /// Orthonormal basis of Vⁱ, i = 1..=k (index 0 is V¹).
    pub fn basis(&self, i: usize) -> &Mat {
        &self.bases[i]
    }

    /// Largest principal angle between corresponding subspaces.
    pub fn max_angle_to(&self, other: &Flag) -> f64 {
        if self.dims != other.dims {
            return std::f64::consts::FRAC_PI_2;
        }
        self.bases.iter().zip(&other.bases).map(|(a, b)| max_principal_angle(a, b)).fold(0.0, f64::max)
    }
}

/// A flag depending on the base point.
pub trait FlagField: Send + Sync {
    fn flag_at(&self, x: &TorusPoint) -> Flag;

    fn is_constant(&self) -> bool {
        false
    }
}

impl FlagField for Flag {
    fn flag_at(&self, _x: &TorusPoint) -> Flag {
        self.clone()
    }

    fn is_constant(&self) -> bool {
        true
    }
}

/// The flag of ρ⁻¹A from its real Schur form, with ρ the common eigenvalue modulus.
///
/// Every diagonal block of the Schur form (1×1 or a 2×2 complex pair) is one
/// level of the flag.
pub fn jordan_flag(a: &Mat) -> Result<(Flag, f64)> {
    if !a.is_square() || a.nrows() == 0 {
        return Err(LabError::InvalidArgument("jordan_flag needs a nonempty square matrix".into()));
    }
    let d = a.nrows();
    let moduli: Vec<f64> = a.clone().complex_eigenvalues().iter().map(|z| z.norm()).collect();
    let max = moduli.iter().copied().fold(0.0, f64::max);
    let min = moduli.iter().copied().fold(f64::INFINITY, f64::min);
    if min == 0.0 || (max - min) > 1e-8 * max {
        return Err(LabError::MultipleModuli { min, max });
    }
    let rho = moduli.iter().sum::<f64>() / d as f64;
    let scale = a.amax();
    let (q, t) = Schur::new(a / scale).unpack();
    let tiny = 1e-12 * t.amax();
    let mut dims = Vec::new();
    let mut k = 0;
    while k < d {
        k += if k + 1 < d && t[(k + 1, k)].abs() > tiny { 2 } else { 1 };
        dims.push(k);
    }
    Ok((Flag::from_columns(&q, &dims)?, rho))
}

/// Bases U^i of V^i ⊖ V^{i−1}, orthonormal for the metric g = L Lᵀ.
fn complements(flag: &Flag, chol_l: &Mat) -> Vec<Mat> {
    let lt = chol_l.transpose();
    let lt_inv = lt.clone().try_inverse().expect("metric is positive definite");
    let mut out = Vec::with_capacity(flag.levels());
    let mut acc: Option<Mat> = None;
    for i in 0..flag.levels() {
        let w = &lt * flag.basis(i);
        let resid = match &acc {
            Some(q) => &w - q * (q.transpose() * &w),
            None => w,
        };
        let need = flag.dims[i] - acc.as_ref().map_or(0, |q| q.ncols());
        let svd = resid.svd(true, false);
        let u = svd.u.expect("requested");
        let mut idx: Vec<usize> = (0..svd.singular_values.len()).collect();
        idx.sort_by(|&a, &b| svd.singular_values[b].partial_cmp(&svd.singular_values[a]).unwrap());
        let mut ui = Mat::zeros(u.nrows(), need);
        for (c, &j) in idx.iter().take(need).enumerate() {
            ui.set_column(c, &u.column(j));
        }
        acc = Some(match acc {
            Some(q) => {
                let mut joined = Mat::zeros(q.nrows(), q.ncols() + need);
                joined.columns_mut(0, q.ncols()).copy_from(&q);
                joined.columns_mut(q.ncols(), need).copy_from(&ui);
                joined
            }
            None => ui.clone(),
        });
        out.push(&lt_inv * ui);
    }
    out
}

/// Blocks A^{j,i} = P^j ∘ A|_{U^i} of a cocycle with respect to an invariant flag.
///
/// Blocks are indexed from 0 and expressed in the bases U^i, so A^{j,i}_x is
/// the matrix U^{jᵀ}_{fx} g A_x U^i_x.
pub struct BlockDecomposition {
    cocycle: Cocycle,
    flag: Arc<dyn FlagField>,
    metric: Mat,
    chol_l: Mat,
    constant: Option<Vec<Mat>>,
    triangularity: f64,
}

impl std::fmt::Debug for BlockDecomposition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BlockDecomposition")
            .field("block_dims", &self.block_dims())
            .field("triangularity", &self.triangularity)
            .finish()
    }
}

/// Checks invariance of the flag at sampled points and builds the decomposition.
pub fn block_decompose(
    coc: &Cocycle,
    flag: Arc<dyn FlagField>,
    metric: Option<&Mat>,
    samples: usize,
    seed: u64,
) -> Result<BlockDecomposition> {
    let d = coc.dim();
    let metric = metric.cloned().unwrap_or_else(|| Mat::identity(d, d));
    if metric.nrows() != d {
        return Err(LabError::DimensionMismatch { expected: d, got: metric.nrows() });
    }
    let chol_l = metric
        .clone()
        .cholesky()
        .ok_or_else(|| LabError::InvalidArgument("metric is not positive definite".into()))?
        .l();
    let probe = flag.flag_at(&TorusPoint::origin(coc.base.dim()));
    if probe.dim() != d {
        return Err(LabError::DimensionMismatch { expected: d, got: probe.dim() });
    }
    let constant = flag.is_constant().then(|| complements(&probe, &chol_l));
    let mut dec = BlockDecomposition { cocycle: coc.clone(), flag, metric, chol_l, constant, triangularity: 0.0 };
    for x in sample_points(coc.base.dim(), samples, seed, STREAM_MISC) {
        let fx = coc.base.step(&x, 1);
        let (vx, vfx) = (dec.flag.flag_at(&x), dec.flag.flag_at(&fx));
        let a = coc.eval(&x);
        let scale = a.norm().max(f64::MIN_POSITIVE);
        for i in 0..vx.levels() - 1 {
            let img = &a * vx.basis(i);
            let q = vfx.basis(i);
            let residual = (&img - q * (q.transpose() * &img)).norm() / scale;
            if residual > INVARIANCE_TOL {
                return Err(LabError::NotInvariant { x: x.coords(), index: i + 1, residual });
            }
        }
        let k = vx.levels();
        for i in 0..k {
            for j in i + 1..k {
                dec.triangularity = dec.triangularity.max(dec.block(j, i, &x).norm());
            }
        }
    }
    Ok(dec)
}

impl BlockDecomposition {
    pub fn levels(&self) -> usize {
        self.constant.as_ref().map_or_else(|| self.flag.flag_at(&TorusPoint::origin(self.cocycle.base.dim())).levels(), Vec::len)
    }

    /// dim U^i for each level.
    pub fn block_dims(&self) -> Vec<usize> {
        self.complements(&TorusPoint::origin(self.cocycle.base.dim())).iter().map(|u| u.ncols()).collect()
    }

    pub fn cocycle(&self) -> &Cocycle {
        &self.cocycle
    }

    pub fn metric(&self) -> &Mat {
        &self.metric
    }

    /// Largest sampled ‖A^{j,i}‖ with j > i.
    pub fn triangularity_residual(&self) -> f64 {
        self.triangularity
    }

    pub fn complements(&self, x: &TorusPoint) -> Vec<Mat> {
        match &self.constant {
            Some(c) => c.clone(),
            None => complements(&self.flag.flag_at(x), &self.chol_l),
        }
    }

    /// P^j = U^j U^{jᵀ} g.
    pub fn projections(&self, x: &TorusPoint) -> Vec<Mat> {
        self.complements(x).iter().map(|u| u * u.transpose() * &self.metric).collect()
    }

    pub fn block(&self, j: usize, i: usize, x: &TorusPoint) -> Mat {
        let fx = self.cocycle.base.step(x, 1);
        let (ux, ufx) = (self.complements(x), self.complements(&fx));
        ufx[j].transpose() * &self.metric * self.cocycle.eval(x) * &ux[i]
    }

    /// All blocks at x as a k×k grid.
    pub fn blocks(&self, x: &TorusPoint) -> Vec<Vec<Mat>> {
        let fx = self.cocycle.base.step(x, 1);
        let (ux, ufx) = (self.complements(x), self.complements(&fx));
        let a = self.cocycle.eval(x);
        ufx.iter().map(|uj| ux.iter().map(|ui| uj.transpose() * &self.metric * &a * ui).collect()).collect()
    }

    /// Σ_{j,i} U^j_{fx} A^{j,i}_x U^{iᵀ}_x g, which reproduces A_x.
    pub fn reassemble(&self, x: &TorusPoint) -> Mat {
        let fx = self.cocycle.base.step(x, 1);
        let (ux, ufx) = (self.complements(x), self.complements(&fx));
        let blocks = self.blocks(x);
        let d = self.cocycle.dim();
        let mut out = Mat::zeros(d, d);
        for (j, row) in blocks.iter().enumerate() {
            for (i, b) in row.iter().enumerate() {
                out += &ufx[j] * b * ux[i].transpose() * &self.metric;
            }
        }
        out
    }

    /// Maps block coordinates back: Σ U^j_{y} M^{j,i} U^{iᵀ}_x g.
    pub fn embed(&self, blocks: &[Vec<Mat>], x: &TorusPoint, y: &TorusPoint) -> Mat {
        let (ux, uy) = (self.complements(x), self.complements(y));
        let d = self.cocycle.dim();
        let mut out = Mat::zeros(d, d);
        for (j, row) in blocks.iter().enumerate() {
            for (i, b) in row.iter().enumerate() {
                out += &uy[j] * b * ux[i].transpose() * &self.metric;
            }
        }
        out
    }

    /// The diagonal block A^{i,i} as a generator (its inverse is the block of A⁻¹).
    pub fn diagonal_generator(self: &Arc<Self>, i: usize) -> Arc<dyn Generator> {
        Arc::new(DiagonalBlock { dec: self.clone(), i })
    }
}

struct DiagonalBlock {
    dec: Arc<BlockDecomposition>,
    i: usize,
}

impl Generator for DiagonalBlock {
    fn dim(&self) -> usize {
        self.dec.block_dims()[self.i]
    }

    fn eval(&self, x: &TorusPoint) -> Mat {
        self.dec.block(self.i, self.i, x)
    }

    fn eval_inv(&self, x: &TorusPoint) -> Mat {
        let fx = self.dec.cocycle.base.step(x, 1);
        let (ux, ufx) = (self.dec.complements(x), self.dec.complements(&fx));
        ux[self.i].transpose() * &self.dec.metric * self.dec.cocycle.eval_inv(x) * &ufx[self.i]
    }

    fn is_constant(&self) -> bool {
        self.dec.constant.is_some() && self.dec.cocycle.generator.is_constant()
    }
}
