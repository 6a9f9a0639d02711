//! Hyperbolic toral automorphisms and their stable/unstable leaf geometry.
//!
//! Points are stored as 64-bit fixed-point fractions, so the integer matrix
//! acts on them exactly: `step` is a bijection of the 2^-64 grid and
//! `step(step(x, a), b) == step(x, a + b)` holds bit for bit.

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::linalg::{Mat, Vector};

const TWO_64: f64 = 18_446_744_073_709_551_616.0;
const TWO_M53: f64 = 1.0 / 9_007_199_254_740_992.0;

pub const DEFAULT_LEAF_RADIUS: f64 = 0.4;

fn frac_to_raw(v: f64) -> u64 {
    if !v.is_finite() {
        return 0;
    }
    ((v * TWO_64).round() as i128) as u64
}

fn raw_to_frac(r: u64) -> f64 {
    (r >> 11) as f64 * TWO_M53
}

/// A point of T^m = R^m / Z^m.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TorusPoint {
    raw: Vec<u64>,
}

impl TorusPoint {
    /// Reduces arbitrary real coordinates mod 1.
    pub fn new(coords: &[f64]) -> Self {
        TorusPoint { raw: coords.iter().map(|&c| frac_to_raw(c)).collect() }
    }

    pub fn origin(m: usize) -> Self {
        TorusPoint { raw: vec![0; m] }
    }

    pub fn from_raw(raw: Vec<u64>) -> Self {
        TorusPoint { raw }
    }

    pub fn raw(&self) -> &[u64] {
        &self.raw
    }

    pub fn dim(&self) -> usize {
        self.raw.len()
    }

    /// Coordinates in [0, 1).
    pub fn coords(&self) -> Vec<f64> {
        self.raw.iter().map(|&r| raw_to_frac(r)).collect()
    }

    /// x + v mod 1.
    pub fn translate(&self, v: &[f64]) -> Self {
        TorusPoint {
            raw: self.raw.iter().zip(v).map(|(&r, &d)| r.wrapping_add(frac_to_raw(d))).collect(),
        }
    }

    /// k·x mod 1, computed exactly on the fixed-point grid.
    pub fn phase(&self, k: &[i64]) -> f64 {
        let acc = self
            .raw
            .iter()
            .zip(k)
            .fold(0u64, |a, (&r, &ki)| a.wrapping_add((ki as u64).wrapping_mul(r)));
        raw_to_frac(acc)
    }

    /// The representative of self − other with every coordinate in [−1/2, 1/2).
    pub fn wrapped_diff(&self, other: &TorusPoint) -> Vec<f64> {
        self.raw
            .iter()
            .zip(&other.raw)
            .map(|(&a, &b)| (a.wrapping_sub(b) as i64) as f64 / TWO_64)
            .collect()
    }

    /// Flat torus distance: Euclidean distance to the nearest integer translate.
    pub fn distance(&self, other: &TorusPoint) -> f64 {
        self.wrapped_diff(other).iter().map(|d| d * d).sum::<f64>().sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LeafKind {
    Stable,
    Unstable,
}

impl LeafKind {
    /// Time direction in which this leaf contracts.
    pub fn contracting_direction(self) -> i64 {
        match self {
            LeafKind::Stable => 1,
            LeafKind::Unstable => -1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LeafKind::Stable => "stable",
            LeafKind::Unstable => "unstable",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LeafSelector {
    pub kind: LeafKind,
    pub direction_index: usize,
}

impl LeafSelector {
    pub fn stable(direction_index: usize) -> Self {
        LeafSelector { kind: LeafKind::Stable, direction_index }
    }

    pub fn unstable(direction_index: usize) -> Self {
        LeafSelector { kind: LeafKind::Unstable, direction_index }
    }
}

/// An L-invariant subspace with orthonormal basis Q and restriction R = QᵀLQ.
#[derive(Clone, Debug)]
pub struct InvariantSubspace {
    pub basis: Mat,
    pub restricted: Mat,
    pub restricted_inv: Mat,
    /// Unit eigen-directions (columns), first nonzero component positive.
    pub directions: Mat,
    /// Moduli of the eigenvalues of L on this subspace.
    pub moduli: Vec<f64>,
}

impl InvariantSubspace {
    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }
}

#[derive(Clone, Debug)]
pub struct HyperbolicAutomorphism {
    m: usize,
    matrix: Vec<i64>,
    inverse: Vec<i64>,
    stable: InvariantSubspace,
    unstable: InvariantSubspace,
    nu: f64,
    nu_hat: f64,
    leaf_radius: f64,
}

fn bareiss_det(a: &[i64], m: usize) -> i128 {
    if m == 0 {
        return 1;
    }
    let mut w: Vec<i128> = a.iter().map(|&v| v as i128).collect();
    let mut sign = 1i128;
    let mut prev = 1i128;
    for k in 0..m - 1 {
        if w[k * m + k] == 0 {
            match (k + 1..m).find(|&r| w[r * m + k] != 0) {
                Some(r) => {
                    for c in 0..m {
                        w.swap(k * m + c, r * m + c);
                    }
                    sign = -sign;
                }
                None => return 0,
            }
        }
        for i in k + 1..m {
            for j in k + 1..m {
                w[i * m + j] = (w[i * m + j] * w[k * m + k] - w[i * m + k] * w[k * m + j]) / prev;
            }
        }
        prev = w[k * m + k];
    }
    sign * w[m * m - 1]
}

fn adjugate(a: &[i64], m: usize) -> Vec<i64> {
    if m == 1 {
        return vec![1];
    }
    let mut adj = vec![0i64; m * m];
    for i in 0..m {
        for j in 0..m {
            let minor: Vec<i64> = (0..m)
                .filter(|&r| r != i)
                .flat_map(|r| (0..m).filter(move |&c| c != j).map(move |c| a[r * m + c]))
                .collect();
            let cof = bareiss_det(&minor, m - 1) * if (i + j) % 2 == 0 { 1 } else { -1 };
            adj[j * m + i] = cof as i64;
        }
    }
    adj
}

fn int_to_mat(a: &[i64], m: usize) -> Mat {
    Mat::from_row_iterator(m, m, a.iter().map(|&v| v as f64))
}

fn sign_normalize(v: &mut Vector) {
    let n = v.norm();
    if n > 0.0 {
        *v /= n;
    }
    if let Some(first) = v.iter().find(|c| c.abs() > 1e-14) {
        if *first < 0.0 {
            v.neg_mut();
        }
    }
}

/// Dominant k-dimensional invariant subspace of `op` by orthogonal iteration.
fn dominant_subspace(op: &Mat, k: usize) -> Mat {
    let m = op.nrows();
    let mut q = Mat::from_fn(m, k, |i, j| {
        let s = ((i * 7 + j * 13 + 3) as f64 * 0.618_033_988_749_895).fract();
        if i == j { 1.0 + s } else { s - 0.5 }
    });
    q = crate::linalg::orthonormalize(&q);
    for _ in 0..20_000 {
        let next = crate::linalg::orthonormalize(&(op * &q));
        let resid = (op * &next - &next * (next.transpose() * op * &next)).norm();
        q = next;
        if resid < 1e-14 * op.norm() {
            break;
        }
    }
    q
}

fn build_subspace(lf: &Mat, op: &Mat, k: usize) -> InvariantSubspace {
    let basis = dominant_subspace(op, k);
    let restricted = basis.transpose() * lf * &basis;
    let restricted_inv = restricted.clone().try_inverse().expect("restriction of L is invertible");
    let eig = restricted.complex_eigenvalues();
    let mut moduli: Vec<f64> = eig.iter().map(|z| z.norm()).collect();
    moduli.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let all_real = eig.iter().all(|z| z.im.abs() <= 1e-12 * z.norm().max(1.0));
    let mut reals: Vec<f64> = eig.iter().map(|z| z.re).collect();
    reals.sort_by(|a, b| b.abs().partial_cmp(&a.abs()).unwrap().then(b.partial_cmp(a).unwrap()));
    let distinct = reals.windows(2).all(|w| (w[0] - w[1]).abs() > 1e-9);
    let mut directions = Mat::zeros(lf.nrows(), k);
    for c in 0..k {
        let mut v: Vector = if all_real && distinct {
            let shifted = &restricted - Mat::identity(k, k) * reals[c];
            let svd = shifted.svd(false, true);
            let vt = svd.v_t.expect("requested");
            let (imin, _) = svd
                .singular_values
                .iter()
                .enumerate()
                .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap();
            &basis * vt.row(imin).transpose()
        } else {
            basis.column(c).into_owned()
        };
        sign_normalize(&mut v);
        directions.set_column(c, &v);
    }
    InvariantSubspace { basis, restricted, restricted_inv, directions, moduli }
}

impl HyperbolicAutomorphism {
    /// Validates a square integer matrix and computes its eigendata.
    pub fn new(entries: &[Vec<i64>]) -> Result<Self> {
        let m = entries.len();
        if m == 0 || entries.iter().any(|r| r.len() != m) {
            return Err(LabError::InvalidArgument("matrix must be square and nonempty".into()));
        }
        let matrix: Vec<i64> = entries.iter().flatten().copied().collect();
        let det = bareiss_det(&matrix, m);
        if det.abs() != 1 {
            return Err(LabError::NotUnimodular { det: det as i64 });
        }
        let adj = adjugate(&matrix, m);
        let inverse: Vec<i64> = adj.iter().map(|&v| v * det as i64).collect();
        let lf = int_to_mat(&matrix, m);
        let lf_inv = int_to_mat(&inverse, m);
        let moduli: Vec<f64> = lf.clone().complex_eigenvalues().iter().map(|z| z.norm()).collect();
        if let Some(&bad) = moduli.iter().find(|&&r| (r - 1.0).abs() < 1e-9) {
            return Err(LabError::NotHyperbolic { modulus: bad });
        }
        let s = moduli.iter().filter(|&&r| r < 1.0).count();
        let u = m - s;
        let stable = build_subspace(&lf, &lf_inv, s);
        let unstable = build_subspace(&lf, &lf, u);
        let nu = moduli.iter().copied().filter(|&r| r < 1.0).fold(0.0, f64::max);
        let nu_hat = moduli.iter().copied().filter(|&r| r > 1.0).fold(f64::INFINITY, f64::min);
        Ok(HyperbolicAutomorphism {
            m,
            matrix,
            inverse,
            stable,
            unstable,
            nu,
            nu_hat,
            leaf_radius: DEFAULT_LEAF_RADIUS,
        })
    }

    /// The cat map [[2,1],[1,1]].
    pub fn cat_map() -> Self {
        Self::new(&[vec![2, 1], vec![1, 1]]).expect("cat map is hyperbolic")
    }

    pub fn with_leaf_radius(mut self, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius <= 0.5) {
            return Err(LabError::InvalidArgument(format!("leaf radius {radius} outside (0, 0.5]")));
        }
        self.leaf_radius = radius;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> Vec<Vec<i64>> {
        self.matrix.chunks(self.m).map(|r| r.to_vec()).collect()
    }

    pub fn inverse_matrix(&self) -> Vec<Vec<i64>> {
        self.inverse.chunks(self.m).map(|r| r.to_vec()).collect()
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn nu_hat(&self) -> f64 {
        self.nu_hat
    }

    pub fn leaf_radius(&self) -> f64 {
        self.leaf_radius
    }

    pub fn subspace(&self, kind: LeafKind) -> &InvariantSubspace {
        match kind {
            LeafKind::Stable => &self.stable,
            LeafKind::Unstable => &self.unstable,
        }
    }

    /// Contraction rate of `kind` leaves in their contracting time direction.
    pub fn leaf_rate(&self, kind: LeafKind) -> f64 {
        match kind {
            LeafKind::Stable => self.nu,
            LeafKind::Unstable => 1.0 / self.nu_hat,
        }
    }

    fn apply(&self, mat: &[i64], x: &[u64]) -> Vec<u64> {
        let m = self.m;
        (0..m)
            .map(|i| {
                (0..m).fold(0u64, |acc, j| acc.wrapping_add((mat[i * m + j] as u64).wrapping_mul(x[j])))
            })
            .collect()
    }

    /// L^n x mod 1.
    pub fn step(&self, x: &TorusPoint, n: i64) -> TorusPoint {
        let mat = if n >= 0 { &self.matrix } else { &self.inverse };
        let mut raw = x.raw.clone();
        for _ in 0..n.unsigned_abs() {
            raw = self.apply(mat, &raw);
        }
        TorusPoint { raw }
    }

    /// x + t·v for the selected unit eigen-direction v.
    pub fn leaf_point(&self, x: &TorusPoint, leaf: LeafSelector, t: f64) -> Result<TorusPoint> {
        if t.abs() > self.leaf_radius {
            return Err(LabError::LeafRadiusExceeded { t, radius: self.leaf_radius });
        }
        let v = self.direction(leaf)?;
        Ok(x.translate((v * t).as_slice()))
    }

    pub fn direction(&self, leaf: LeafSelector) -> Result<Vector> {
        let sub = self.subspace(leaf.kind);
        if leaf.direction_index >= sub.dim() {
            return Err(LabError::InvalidArgument(format!(
                "direction index {} but the {} space has dimension {}",
                leaf.direction_index,
                leaf.kind.name(),
                sub.dim()
            )));
        }
        Ok(sub.directions.column(leaf.direction_index).into_owned())
    }

    /// Chart coordinates c with y = x + Q c on the local `kind` leaf of x.
    pub fn leaf_coords(&self, x: &TorusPoint, y: &TorusPoint, kind: LeafKind) -> Result<Vector> {
        let d = Vector::from_vec(y.wrapped_diff(x));
        let q = &self.subspace(kind).basis;
        let c = q.transpose() * &d;
        let residual = (&d - q * &c).norm();
        if residual > 1e-9 {
            return Err(LabError::LeafMismatch { residual });
        }
        if c.norm() > self.leaf_radius + 1e-12 {
            return Err(LabError::LeafRadiusExceeded { t: c.norm(), radius: self.leaf_radius });
        }
        Ok(c)
    }

    /// Chart coordinates of t·v for a leaf direction.
    pub fn direction_coords(&self, leaf: LeafSelector) -> Result<Vector> {
        let v = self.direction(leaf)?;
        Ok(self.subspace(leaf.kind).basis.transpose() * v)
    }

    /// Splits a displacement into stable and unstable chart coordinates.
    pub fn split_displacement(&self, d: &[f64]) -> (Vector, Vector) {
        let s = self.stable.dim();
        let mut q = Mat::zeros(self.m, self.m);
        q.view_mut((0, 0), (self.m, s)).copy_from(&self.stable.basis);
        q.view_mut((0, s), (self.m, self.m - s)).copy_from(&self.unstable.basis);
        let c = q.lu().solve(&Vector::from_column_slice(d)).expect("stable and unstable spaces span");
        (c.rows(0, s).into_owned(), c.rows(s, self.m - s).into_owned())
    }
}

/// Two points on one local leaf, x + Q·from and x + Q·to, carried along
/// their orbits in chart form: f^n(x + Q c) = f^n(x) + Q R^n c.
#[derive(Clone, Debug)]
pub struct LeafPair {
    pub anchor: TorusPoint,
    pub kind: LeafKind,
    pub from: Vector,
    pub to: Vector,
}

impl LeafPair {
    pub fn new(anchor: TorusPoint, kind: LeafKind, from: Vector, to: Vector) -> Self {
        LeafPair { anchor, kind, from, to }
    }

    /// The pair (x, y) with y = x + Q c; fails if y is not on x's local leaf.
    pub fn from_points(sys: &HyperbolicAutomorphism, x: &TorusPoint, y: &TorusPoint, kind: LeafKind) -> Result<Self> {
        let c = sys.leaf_coords(x, y, kind)?;
        Ok(LeafPair { anchor: x.clone(), kind, from: Vector::zeros(c.len()), to: c })
    }

    pub fn source(&self, sys: &HyperbolicAutomorphism) -> TorusPoint {
        chart_point(sys, &self.anchor, self.kind, &self.from)
    }

    pub fn target(&self, sys: &HyperbolicAutomorphism) -> TorusPoint {
        chart_point(sys, &self.anchor, self.kind, &self.to)
    }

    pub fn reversed(&self) -> Self {
        LeafPair { anchor: self.anchor.clone(), kind: self.kind, from: self.to.clone(), to: self.from.clone() }
    }

    /// Leaf distance between the two points.
    pub fn length(&self) -> f64 {
        (&self.to - &self.from).norm()
    }

    /// The pair moved n steps along the base: (f^n x, f^n y).
    pub fn advanced(&self, sys: &HyperbolicAutomorphism, n: i64) -> Self {
        let mut orbit = LeafOrbit::new(sys, self.anchor.clone(), self.kind, vec![self.from.clone(), self.to.clone()]);
        orbit.step_by(n);
        let mut offs = orbit.offsets;
        let to = offs.pop().unwrap();
        let from = offs.pop().unwrap();
        LeafPair { anchor: orbit.anchor, kind: self.kind, from, to }
    }
}

pub fn chart_point(sys: &HyperbolicAutomorphism, anchor: &TorusPoint, kind: LeafKind, c: &Vector) -> TorusPoint {
    if c.iter().all(|&v| v == 0.0) {
        return anchor.clone();
    }
    let d = &sys.subspace(kind).basis * c;
    anchor.translate(d.as_slice())
}

/// Several points of one local leaf followed together along the base dynamics.
#[derive(Clone, Debug)]
pub struct LeafOrbit<'a> {
    sys: &'a HyperbolicAutomorphism,
    pub kind: LeafKind,
    pub anchor: TorusPoint,
    pub offsets: Vec<Vector>,
    pub time: i64,
}

impl<'a> LeafOrbit<'a> {
    pub fn new(sys: &'a HyperbolicAutomorphism, anchor: TorusPoint, kind: LeafKind, offsets: Vec<Vector>) -> Self {
        LeafOrbit { sys, kind, anchor, offsets, time: 0 }
    }

    pub fn point(&self, i: usize) -> TorusPoint {
        chart_point(self.sys, &self.anchor, self.kind, &self.offsets[i])
    }

    pub fn step_by(&mut self, n: i64) {
        let sub = self.sys.subspace(self.kind);
        let r = if n >= 0 { &sub.restricted } else { &sub.restricted_inv };
        for _ in 0..n.unsigned_abs() {
            for c in self.offsets.iter_mut() {
                if c.iter().any(|&v| v != 0.0) {
                    *c = r * &*c;
                }
            }
        }
        self.anchor = self.sys.step(&self.anchor, n);
        self.time += n;
    }
}
