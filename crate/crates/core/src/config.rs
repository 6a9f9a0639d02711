//! Scenario configuration read from TOML.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::base::HyperbolicAutomorphism;
use crate::error::{LabError, Result};
use crate::field::{MatrixField, MatrixFieldSpec, VectorField};

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_beta")]
    pub beta: f64,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub base: BaseConfig,
    #[serde(default)]
    pub generators: BTreeMap<String, MatrixFieldSpec>,
    #[serde(default)]
    pub holonomy: HolonomyConfig,
    #[serde(default)]
    pub twist: TwistConfig,
    #[serde(default)]
    pub pw: PwConfig,
    #[serde(default)]
    pub one_exponent: OneExponentConfig,
    #[serde(default)]
    pub perturbation: PerturbationConfig,
}

fn default_beta() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseConfig {
    pub matrix: Vec<Vec<i64>>,
    #[serde(default = "default_leaf_radius")]
    pub leaf_radius: f64,
}

fn default_leaf_radius() -> f64 {
    0.4
}

impl Default for BaseConfig {
    fn default() -> Self {
        BaseConfig { matrix: vec![vec![2, 1], vec![1, 1]], leaf_radius: default_leaf_radius() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolonomyConfig {
    /// Name of the cocycle generator; a built-in near-identity field when absent.
    pub generator: Option<String>,
    pub samples: usize,
    pub tol: f64,
    pub n_max: usize,
    pub composition_max: f64,
    pub equivariance_max: f64,
    pub slope_min: f64,
}

impl Default for HolonomyConfig {
    fn default() -> Self {
        HolonomyConfig {
            generator: None,
            samples: 50,
            tol: 1e-10,
            n_max: 2000,
            composition_max: 1e-8,
            equivariance_max: 1e-8,
            slope_min: 0.9,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwistConfig {
    /// Twist generator; a constant rotation when absent.
    pub generator: Option<String>,
    pub rotation_angle: f64,
    /// Known solution η; φ = η − F^{-1} η∘f.
    pub eta: Option<VectorField>,
    pub samples: usize,
    pub tol: f64,
    pub n_max: usize,
    pub equation_max: f64,
    pub invariance_max: f64,
}

impl Default for TwistConfig {
    fn default() -> Self {
        TwistConfig {
            generator: None,
            rotation_angle: 0.9,
            eta: None,
            samples: 30,
            tol: 1e-10,
            n_max: 2000,
            equation_max: 1e-9,
            invariance_max: 1e-8,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PwConfig {
    pub alpha: f64,
    pub epsilon: f64,
    pub samples: usize,
    pub n_max: Vec<usize>,
    pub tol: f64,
    /// Required fraction of converged samples at the largest n_max.
    pub min_fraction: f64,
    /// Required ratio of the sup of partial sums between the largest and smallest n_max.
    pub growth_factor: f64,
}

impl Default for PwConfig {
    fn default() -> Self {
        PwConfig {
            alpha: -0.2,
            epsilon: 1.0,
            samples: 1000,
            n_max: vec![200, 400],
            tol: 1e-6,
            min_fraction: 0.95,
            growth_factor: 2.0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OneExponentConfig {
    /// Constant matrix A; 1.05·(rotation ⊕ 1) when absent.
    pub matrix: Option<Vec<Vec<f64>>>,
    pub rho: f64,
    pub angle: f64,
    /// Conjugacy C₀; a unipotent field adapted to the flag of A when absent.
    pub conjugacy: Option<String>,
    pub amplitude: f64,
    pub samples: usize,
    pub tol: f64,
    pub n_max: usize,
    pub conjugacy_max: f64,
    pub intertwining_max: f64,
    /// Minimum accepted Hölder slope of the solved conjugacy.
    pub holder_min: f64,
}

impl Default for OneExponentConfig {
    fn default() -> Self {
        OneExponentConfig {
            matrix: None,
            rho: 1.05,
            angle: 0.9,
            conjugacy: None,
            amplitude: 0.15,
            samples: 30,
            tol: 1e-10,
            n_max: 2000,
            conjugacy_max: 1e-8,
            intertwining_max: 1e-7,
            holder_min: 0.9,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerturbationConfig {
    /// Unperturbed constant matrix A.
    pub matrix: Vec<Vec<f64>>,
    /// Perturbed cocycle B; A·exp(ε·Fourier) when absent.
    pub generator: Option<String>,
    pub epsilon: f64,
    pub n_power: usize,
    pub samples: usize,
    pub max_angle: f64,
    pub invariance_max: f64,
    /// Allowed distance of block exponents from ln ρ_i.
    pub exponent_tol: f64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            matrix: vec![vec![2.0, 0.0], vec![0.0, 0.5]],
            generator: None,
            epsilon: 0.01,
            n_power: 40,
            samples: 20,
            max_angle: 0.1,
            invariance_max: 1e-6,
            exponent_tol: 0.02,
        }
    }
}

fn positive(path: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(LabError::config(path, format!("must be positive, got {v}")))
    }
}

fn nonzero(path: &str, v: usize) -> Result<()> {
    if v > 0 {
        Ok(())
    } else {
        Err(LabError::config(path, "must be at least 1"))
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str, path: &Path) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| LabError::config(path.display().to_string(), e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text, path)
    }

    /// Canonical TOML text, used for hashing.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        positive("beta", self.beta)?;
        positive("base.leaf_radius", self.base.leaf_radius)?;
        self.base_system()?;
        for (name, spec) in &self.generators {
            MatrixField::try_from(spec.clone()).map_err(|e| LabError::config(format!("generators.{name}"), e.to_string()))?;
        }
        let check_name = |path: &str, name: &Option<String>| -> Result<()> {
            match name {
                Some(n) if !self.generators.contains_key(n) => {
                    Err(LabError::config(path, format!("unknown generator '{n}'")))
                }
                _ => Ok(()),
            }
        };
        check_name("holonomy.generator", &self.holonomy.generator)?;
        check_name("twist.generator", &self.twist.generator)?;
        check_name("one_exponent.conjugacy", &self.one_exponent.conjugacy)?;
        check_name("perturbation.generator", &self.perturbation.generator)?;
        positive("holonomy.tol", self.holonomy.tol)?;
        nonzero("holonomy.samples", self.holonomy.samples)?;
        nonzero("holonomy.n_max", self.holonomy.n_max)?;
        positive("holonomy.composition_max", self.holonomy.composition_max)?;
        positive("holonomy.equivariance_max", self.holonomy.equivariance_max)?;
        positive("holonomy.slope_min", self.holonomy.slope_min)?;
        positive("twist.tol", self.twist.tol)?;
        positive("twist.equation_max", self.twist.equation_max)?;
        positive("twist.invariance_max", self.twist.invariance_max)?;
        nonzero("twist.samples", self.twist.samples)?;
        nonzero("twist.n_max", self.twist.n_max)?;
        if let Some(eta) = &self.twist.eta {
            eta.validate().map_err(|e| LabError::config("twist.eta", e.to_string()))?;
        }
        positive("pw.tol", self.pw.tol)?;
        nonzero("pw.samples", self.pw.samples)?;
        positive("pw.min_fraction", self.pw.min_fraction)?;
        positive("pw.growth_factor", self.pw.growth_factor)?;
        if self.pw.n_max.is_empty() || self.pw.n_max.iter().any(|&n| n < 2) {
            return Err(LabError::config("pw.n_max", "needs at least one value ≥ 2"));
        }
        if !self.pw.alpha.is_finite() || !self.pw.epsilon.is_finite() {
            return Err(LabError::config("pw.alpha", "must be finite"));
        }
        positive("one_exponent.rho", self.one_exponent.rho)?;
        positive("one_exponent.tol", self.one_exponent.tol)?;
        nonzero("one_exponent.samples", self.one_exponent.samples)?;
        nonzero("one_exponent.n_max", self.one_exponent.n_max)?;
        positive("one_exponent.conjugacy_max", self.one_exponent.conjugacy_max)?;
        positive("one_exponent.intertwining_max", self.one_exponent.intertwining_max)?;
        positive("one_exponent.holder_min", self.one_exponent.holder_min)?;
        positive("one_exponent.amplitude", self.one_exponent.amplitude)?;
        if let Some(m) = &self.one_exponent.matrix {
            square("one_exponent.matrix", m)?;
        }
        square("perturbation.matrix", &self.perturbation.matrix)?;
        positive("perturbation.epsilon", self.perturbation.epsilon)?;
        positive("perturbation.max_angle", self.perturbation.max_angle)?;
        positive("perturbation.invariance_max", self.perturbation.invariance_max)?;
        positive("perturbation.exponent_tol", self.perturbation.exponent_tol)?;
        nonzero("perturbation.n_power", self.perturbation.n_power)?;
        nonzero("perturbation.samples", self.perturbation.samples)?;
        Ok(())
    }

    pub fn base_system(&self) -> Result<Arc<HyperbolicAutomorphism>> {
        let sys = HyperbolicAutomorphism::new(&self.base.matrix)
            .and_then(|s| s.with_leaf_radius(self.base.leaf_radius))
            .map_err(|e| LabError::config("base.matrix", e.to_string()))?;
        Ok(Arc::new(sys))
    }

    pub fn generator(&self, name: &str) -> Result<MatrixField> {
        let spec = self
            .generators
            .get(name)
            .ok_or_else(|| LabError::config("generators", format!("unknown generator '{name}'")))?;
        MatrixField::try_from(spec.clone())
    }
}

fn square(path: &str, m: &[Vec<f64>]) -> Result<()> {
    if m.is_empty() || m.iter().any(|r| r.len() != m.len()) {
        return Err(LabError::config(path, "must be a nonempty square matrix"));
    }
    if m.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LabError::config(path, "entries must be finite"));
    }
    Ok(())
}

/// Row-major nested lists to a matrix.
pub fn matrix_from_rows(rows: &[Vec<f64>]) -> crate::linalg::Mat {
    crate::linalg::Mat::from_fn(rows.len(), rows.first().map_or(0, Vec::len), |i, j| rows[i][j])
}
