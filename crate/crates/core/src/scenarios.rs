//! The named experiments run by the `cocycle-lab` binary.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::base::LeafSelector;
use crate::cocycle::Cocycle;
use crate::config::{matrix_from_rows, ScenarioConfig};
use crate::conjugacy::{conjugacy_residual, inductive_block_solve, intertwining_residual, SolveOptions};
use crate::error::{LabError, Result};
use crate::field::{rotation, Conjugated, Generator, MatrixField, TwistedCoboundary, VectorField, VectorSection};
use crate::flag::{block_decompose, jordan_flag, Flag};
use crate::holder::{geometric_scales, holder_exponent_estimate};
use crate::holonomy::{holonomy_property_suite, HolonomyOptions};
use crate::linalg::Mat;
use crate::pw::{mean_log_a, pw_demo, PwParams};
use crate::report::{fmt_f64, fmt_opt, CheckRow, ScenarioOutcome, Table};
use crate::sampling::{sample_points, STREAM_MISC};
use crate::splitting::invariant_splitting;
use crate::transport::{ParamSpace, TransportSection};
use crate::twisted::{twisted_invariance_residual, Section, VectorAsSection};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Scenario {
    PwDemo,
    OneExponent,
    Perturbation,
    HolonomyVerify,
    TwistVerify,
}

impl Scenario {
    pub const ALL: [Scenario; 5] =
        [Scenario::PwDemo, Scenario::OneExponent, Scenario::Perturbation, Scenario::HolonomyVerify, Scenario::TwistVerify];

    pub fn name(self) -> &'static str {
        match self {
            Scenario::PwDemo => "pw-demo",
            Scenario::OneExponent => "one-exponent",
            Scenario::Perturbation => "perturbation",
            Scenario::HolonomyVerify => "holonomy-verify",
            Scenario::TwistVerify => "twist-verify",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scenario {
    type Err = LabError;

    fn from_str(s: &str) -> Result<Self> {
        Scenario::ALL
            .into_iter()
            .find(|sc| sc.name() == s)
            .ok_or_else(|| LabError::InvalidArgument(format!("unknown scenario '{s}'")))
    }
}

/// Runs a scenario; check failures are reported in the outcome, not as errors.
pub fn run_scenario(scenario: Scenario, cfg: &ScenarioConfig, serial: bool) -> Result<ScenarioOutcome> {
    cfg.validate()?;
    let (checks, tables) = match scenario {
        Scenario::PwDemo => run_pw(cfg, serial)?,
        Scenario::OneExponent => run_one_exponent(cfg, serial)?,
        Scenario::Perturbation => run_perturbation(cfg, serial)?,
        Scenario::HolonomyVerify => run_holonomy(cfg, serial)?,
        Scenario::TwistVerify => run_twist(cfg, serial)?,
    };
    Ok(ScenarioOutcome { scenario: scenario.name().into(), checks, tables })
}

type Parts = (Vec<CheckRow>, Vec<Table>);

/// I + Σ small Fourier terms, bunched over the cat map.
pub fn near_identity_field() -> MatrixField {
    MatrixField::constant(Mat::identity(2, 2))
        .expect("identity is invertible")
        .with_term(&[1, 0], Mat::from_row_slice(2, 2, &[0.1, 0.05, -0.02, 0.03]), Mat::zeros(2, 2))
        .expect("2x2 term")
        .with_term(&[0, 1], Mat::zeros(2, 2), Mat::from_row_slice(2, 2, &[0.0, 0.08, 0.04, -0.06]))
        .expect("2x2 term")
}

/// Default known solution of the twisted equation.
pub fn default_eta() -> VectorField {
    VectorField::constant(&[0.5, 0.0])
        .with_term(&[1, 0], &[0.3, 0.1], &[0.0, 0.2])
        .with_term(&[1, -1], &[0.0, 0.2], &[0.1, 0.0])
}

/// exp(Q N(x) Qᵀ) with N strictly block upper triangular in the flag basis Q,
/// so that the conjugated cocycle keeps the flag invariant.
pub fn unipotent_conjugacy(flag: &Flag, amplitude: f64) -> Result<MatrixField> {
    let q = flag.basis(flag.levels() - 1).clone();
    let d = q.nrows();
    let start: Vec<usize> = std::iter::once(0).chain(flag.dims().iter().copied()).collect();
    let level = |r: usize| start.iter().rposition(|&s| s <= r).unwrap_or(0);
    let mut field = MatrixField::constant(Mat::identity(d, d))?;
    let modes: [&[i64]; 3] = [&[1, 0], &[0, 1], &[1, -1]];
    for (t, k) in modes.iter().enumerate() {
        let pattern = |phase: f64| {
            Mat::from_fn(d, d, |r, c| {
                if level(r) < level(c) {
                    amplitude * (phase + 0.3 * (r + 2 * c + t) as f64).sin()
                } else {
                    0.0
                }
            })
        };
        let (p, s) = (&q * pattern(1.0) * q.transpose(), &q * pattern(2.5) * q.transpose());
        field = field.with_term(k, p, s)?;
    }
    Ok(field)
}

/// ρ·(R_θ ⊕ 1).
pub fn rotation_plus_line(rho: f64, angle: f64) -> Mat {
    let mut a = Mat::zeros(3, 3);
    a.view_mut((0, 0), (2, 2)).copy_from(&rotation(angle));
    a[(2, 2)] = 1.0;
    a * rho
}

/// A·exp(ε(P cos 2πx₁ + Q sin 2π(x₁ + x₂))) with fixed P, Q of unit scale.
pub fn perturbed_constant(a: &Mat, epsilon: f64) -> Result<MatrixField> {
    let d = a.nrows();
    let p = Mat::from_fn(d, d, |i, j| epsilon * ((i * d + j) as f64 + 0.5).cos());
    let q = Mat::from_fn(d, d, |i, j| epsilon * ((i + 2 * j) as f64 + 1.5).sin());
    MatrixField::constant(a.clone())?.with_term(&[1, 0], p, Mat::zeros(d, d))?.with_term(&[1, 1], Mat::zeros(d, d), q)
}

fn named_or(cfg: &ScenarioConfig, name: &Option<String>, fallback: impl FnOnce() -> Result<MatrixField>) -> Result<MatrixField> {
    match name {
        Some(n) => cfg.generator(n),
        None => fallback(),
    }
}

fn run_holonomy(cfg: &ScenarioConfig, serial: bool) -> Result<Parts> {
    let h = &cfg.holonomy;
    let field = named_or(cfg, &h.generator, || Ok(near_identity_field()))?;
    let coc = Cocycle::new(cfg.base_system()?, Arc::new(field));
    let opts = HolonomyOptions { tol: h.tol, n_max: h.n_max, beta: cfg.beta, check_bunching: true };
    let rep = holonomy_property_suite(&coc, h.samples, &opts, cfg.seed, serial)?;
    let checks = vec![
        CheckRow::new("composition", rep.samples, Some(rep.h2_max), None, rep.h2_max < h.composition_max),
        CheckRow::new("equivariance", rep.samples, Some(rep.h3_max), None, rep.h3_max < h.equivariance_max),
        CheckRow::new(
            "holder",
            rep.samples,
            None,
            rep.h4_slope,
            rep.h4_slope.is_some_and(|s| s >= h.slope_min),
        ),
    ];
    let mut t = Table::new("properties", &["property", "samples", "max_residual", "fitted_slope", "n_max", "verdict"]);
    for r in &rep.rows {
        t.push(vec![
            r.property.clone(),
            r.samples.to_string(),
            fmt_f64(r.max_residual),
            fmt_opt(r.fitted_slope),
            r.n_max.to_string(),
            r.verdict.clone(),
        ]);
    }
    Ok((checks, vec![t]))
}

fn run_twist(cfg: &ScenarioConfig, serial: bool) -> Result<Parts> {
    let tc = &cfg.twist;
    let base = cfg.base_system()?;
    let field = named_or(cfg, &tc.generator, || MatrixField::constant(rotation(tc.rotation_angle)))?;
    let d = field.constant_factor().nrows();
    let eta0 = tc.eta.clone().unwrap_or_else(default_eta);
    if eta0.dimension != d {
        return Err(LabError::config("twist.eta", format!("dimension {} does not match the twist dimension {d}", eta0.dimension)));
    }
    let gen: Arc<dyn Generator> = Arc::new(field);
    let eta0: Arc<dyn VectorSection> = Arc::new(eta0);
    let phi: Arc<dyn VectorSection> = Arc::new(TwistedCoboundary { base: base.clone(), twist: gen.clone(), eta: eta0.clone() });
    let phi: Arc<dyn Section> = Arc::new(VectorAsSection(phi));
    let twist = Cocycle::new(base.clone(), gen);
    let opts = HolonomyOptions { tol: tc.tol, n_max: tc.n_max, beta: cfg.beta, check_bunching: true };
    let mut params = ParamSpace::new();
    let x0 = SolveOptions::default().reference;
    let eta = TransportSection::solve(twist.clone(), phi.clone(), x0, &mut params, &opts)?;
    let theta = params.solve();
    let pts = sample_points(base.dim(), tc.samples, cfg.seed, STREAM_MISC);
    let mut table = Table::new("points", &["index", "x1", "x2", "equation_residual", "distance_to_known"]);
    let mut eq_max = 0.0f64;
    let mut known_max = 0.0f64;
    for (i, x) in pts.iter().enumerate() {
        let ex = eta.eval(x)? * &theta;
        let efx = eta.eval(&base.step(x, 1))? * &theta;
        let r = (phi.eval(x)?.column(0) - &ex + twist.eval_inv(x) * efx).norm();
        let k = (&ex - eta0.eval(x)).norm();
        eq_max = eq_max.max(r);
        known_max = known_max.max(k);
        let c = x.coords();
        table.push(vec![i.to_string(), fmt_f64(c[0]), fmt_f64(c[1]), fmt_f64(r), fmt_f64(k)]);
    }
    let inv = twisted_invariance_residual(&twist, phi.as_ref(), &eta, tc.samples, &opts, cfg.seed, serial)?;
    let checks = vec![
        CheckRow::new("equation", tc.samples, Some(eq_max), None, eq_max < tc.equation_max),
        CheckRow::new("invariance", inv.samples, Some(inv.max_residual), inv.holder_slope, inv.max_residual < tc.invariance_max),
    ];
    let mut summary = Table::new("solution", &["free_parameters", "constraint_rows", "max_distance_to_known"]);
    summary.push(vec![params.count().to_string(), params.constraints().len().to_string(), fmt_f64(known_max)]);
    Ok((checks, vec![table, summary]))
}

fn run_pw(cfg: &ScenarioConfig, serial: bool) -> Result<Parts> {
    let pc = &cfg.pw;
    let sys = cfg.base_system()?;
    let params = PwParams { alpha: pc.alpha, epsilon: pc.epsilon };
    let mut runs: Vec<usize> = pc.n_max.clone();
    runs.sort_unstable();
    runs.dedup();
    let mut curve = Table::new("sup_curve", &["n_max", "n", "sup_abs_partial_sum"]);
    let mut reports = Vec::with_capacity(runs.len());
    for &n in &runs {
        let rep = pw_demo(&sys, params, pc.samples, n, pc.tol, cfg.seed, serial)?;
        for &(k, s) in &rep.sup_curve {
            curve.push(vec![n.to_string(), k.to_string(), fmt_f64(s)]);
        }
        reports.push(rep);
    }
    let last = reports.last().expect("at least one run");
    let first = &reports[0];
    let mut points = Table::new("points", &["index", "x1", "x2", "periodic_probe", "converged", "tail_variation", "value"]);
    for p in &last.points {
        points.push(vec![
            p.index.to_string(),
            fmt_f64(p.x1),
            fmt_f64(p.x2),
            p.probe.to_string(),
            p.converged.to_string(),
            fmt_f64(p.tail_variation),
            fmt_f64(p.value),
        ]);
    }
    let mut fractions = Table::new("convergence", &["n_max", "samples", "probes", "converged_fraction", "final_sup"]);
    for r in &reports {
        fractions.push(vec![
            r.n_max.to_string(),
            r.samples.to_string(),
            r.probes.to_string(),
            fmt_f64(r.converged_fraction),
            fmt_opt(r.sup_at(r.n_max)),
        ]);
    }
    let mean = mean_log_a(params, sys.dim(), 100_000, cfg.seed);
    let s_first = first.sup_at(first.n_max).unwrap_or(0.0);
    let s_last = last.sup_at(last.n_max).unwrap_or(0.0);
    let ratio = if s_first > 0.0 { s_last / s_first } else { f64::INFINITY };
    let mut checks = vec![
        CheckRow::new("mean_log_a", 100_000, None, Some(mean), mean < 0.0),
        CheckRow::new("convergence_fraction", last.samples, None, Some(last.converged_fraction), last.converged_fraction >= pc.min_fraction),
    ];
    if reports.len() > 1 {
        checks.push(CheckRow::new("sup_growth", last.samples, Some(s_last), Some(ratio), ratio >= pc.growth_factor));
    }
    Ok((checks, vec![points, curve, fractions]))
}

fn run_one_exponent(cfg: &ScenarioConfig, serial: bool) -> Result<Parts> {
    let oc = &cfg.one_exponent;
    let base = cfg.base_system()?;
    let a = match &oc.matrix {
        Some(rows) => matrix_from_rows(rows),
        None => rotation_plus_line(oc.rho, oc.angle),
    };
    let d = a.nrows();
    let (flag, rho) = jordan_flag(&a)?;
    let c0 = named_or(cfg, &oc.conjugacy, || unipotent_conjugacy(&flag, oc.amplitude))?;
    if c0.constant_factor().nrows() != d {
        return Err(LabError::config("one_exponent.conjugacy", format!("expected a {d}x{d} field")));
    }
    let ga: Arc<dyn Generator> = Arc::new(MatrixField::constant(a.clone())?);
    let ca = Cocycle::new(base.clone(), ga.clone());
    let cb = Cocycle::new(base.clone(), Arc::new(Conjugated { base: base.clone(), a: ga, c: Arc::new(c0) }));
    let flag = Arc::new(flag);
    let levels = flag.levels();
    let da = Arc::new(block_decompose(&ca, flag.clone(), None, 16, cfg.seed)?);
    let db = Arc::new(block_decompose(&cb, flag, None, 16, cfg.seed)?);
    let diag: Vec<Arc<dyn Generator>> = da
        .block_dims()
        .iter()
        .map(|&n| MatrixField::constant(Mat::identity(n, n)).map(|f| Arc::new(f) as Arc<dyn Generator>))
        .collect::<Result<_>>()?;
    let opts = SolveOptions { tol: oc.tol, n_max: oc.n_max, seed: cfg.seed, serial, ..SolveOptions::default() };
    let c = inductive_block_solve(da, db.clone(), diag, &opts)?;
    // fresh samples, independent of those used by the solve
    let fresh = cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let conj = conjugacy_residual(&ca, &cb, &c, oc.samples, fresh, serial)?;
    let hol = HolonomyOptions { tol: oc.tol, n_max: oc.n_max, beta: cfg.beta, check_bunching: true };
    let inter = intertwining_residual(&ca, &cb, &c, oc.samples, &hol, fresh, serial)?;
    let section = |x: &crate::base::TorusPoint| c.eval(x);
    let scales = geometric_scales(0.1, 8);
    let holder = holder_exponent_estimate(&section, &base, LeafSelector::stable(0), oc.samples, &scales, fresh, serial);
    let beta_hat = holder.as_ref().ok().map(|h| h.beta_hat);
    let checks = vec![
        CheckRow::new("conjugacy", conj.samples, Some(conj.max_residual), None, conj.max_residual < oc.conjugacy_max),
        CheckRow::new("intertwining", inter.pairs, Some(inter.max_residual), None, inter.max_residual < oc.intertwining_max),
        CheckRow::new("holder", oc.samples, None, beta_hat, beta_hat.is_some_and(|b| b >= oc.holder_min)),
    ];
    let mut structure = Table::new("structure", &["dimension", "modulus", "flag_levels", "block_dims", "triangularity_residual", "max_condition"]);
    structure.push(vec![
        d.to_string(),
        fmt_f64(rho),
        levels.to_string(),
        db.block_dims().iter().map(|n| n.to_string()).collect::<Vec<_>>().join(" "),
        fmt_f64(db.triangularity_residual()),
        fmt_f64(conj.max_condition),
    ]);
    let mut scaling = Table::new("holder_scales", &["t", "max_difference"]);
    if let Ok(h) = &holder {
        for &(t, v) in &h.points {
            scaling.push(vec![fmt_f64(t), fmt_f64(v)]);
        }
    }
    Ok((checks, vec![structure, scaling]))
}

fn run_perturbation(cfg: &ScenarioConfig, serial: bool) -> Result<Parts> {
    let pc = &cfg.perturbation;
    let base = cfg.base_system()?;
    let a = matrix_from_rows(&pc.matrix);
    let field = named_or(cfg, &pc.generator, || perturbed_constant(&a, pc.epsilon))?;
    if field.constant_factor().nrows() != a.nrows() {
        return Err(LabError::config("perturbation.generator", "dimension differs from perturbation.matrix"));
    }
    let b = Cocycle::new(base, Arc::new(field));
    let rep = invariant_splitting(&b, &a, pc.n_power, pc.samples, cfg.seed, serial)?;
    let mut checks = vec![
        CheckRow::new("splitting_invariance", rep.samples, Some(rep.invariance_residual), None, rep.invariance_residual < pc.invariance_max),
        CheckRow::new("splitting_angle", rep.samples, Some(rep.max_angle_to_reference), None, rep.max_angle_to_reference < pc.max_angle),
    ];
    let mut blocks = Table::new("blocks", &["block", "dimension", "modulus", "log_modulus", "exponent", "deviation"]);
    for (i, ((&rho, &dim), &ex)) in rep.moduli.iter().zip(&rep.dims).zip(&rep.block_exponents).enumerate() {
        let dev = (ex - rho.ln()).abs();
        blocks.push(vec![i.to_string(), dim.to_string(), fmt_f64(rho), fmt_f64(rho.ln()), fmt_f64(ex), fmt_f64(dev)]);
        checks.push(CheckRow::new(&format!("block_{i}_exponent"), 1, Some(dev), Some(ex), dev < pc.exponent_tol));
    }
    Ok((checks, vec![blocks]))
}
