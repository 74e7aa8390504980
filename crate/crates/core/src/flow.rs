//! Method-of-lines integration of the normalized perturbed flow
//!
//! ```text
//! du/dt = (σ₂(W) − ν₁e^{(ε−4)u} − ν₂)/σ₁(W) + μ e^{−2u} + m ,
//! ```
//!
//! the weight-reduced form of
//! du/dt = e^{−2u}(σ₂(g) − ν₁e^{εu} − ν₂e^{4u})/σ₁(g) + μe^{−2u} + m, where
//! the normalization m makes ∫σ₁(g)·(du/dt)·dv(g) = 0, so the continuous
//! flow preserves ∫σ₁(g)dv(g) while driving the metric toward solutions of
//! the perturbed Euler–Lagrange equation.
//!
//! Time stepping is classical explicit RK4 with the parabolic CFL
//! dt = dt_safety·h²/max(∂F/∂w_ψψ); the diffusivity is positive exactly when
//! the gradient matrix of the quotient operator is, which is what makes the
//! equation parabolic. Global coefficients are refreshed at every RK stage
//! by default. After each accepted step the conserved integral ∫σ₁dv is
//! restored exactly by a constant shift of u — the flow's own normalization
//! direction — which leaves W, ℰ, ℰ_ε and all membership flags untouched.

use std::fmt;
use std::io::Write as IoWrite;
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::functionals::{
    integrals, perturb_coeffs, perturbed_residual_sup, report_with_field, FunctionalReport,
    FunctionalsError,
};
use crate::sphere::{schouten_field, ConformalFactor, Grid, SphereError};
use crate::util::fmt17;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("initial state not in C_1: min sigma_1(W) = {min_sigma1}")]
    NotInCone { min_sigma1: f64 },
    #[error("step rejected {attempts} times at t = {t}; last dt = {dt}")]
    RetryExhausted { t: f64, dt: f64, attempts: u32 },
    #[error("non-finite value encountered at t = {t}")]
    Overflow { t: f64 },
    #[error("parabolicity lost at t = {t}: max diffusivity = {diffusivity}")]
    ParabolicityLost { t: f64, diffusivity: f64 },
    #[error("invalid flow config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Functionals(#[from] FunctionalsError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
}

/// Integration parameters.
#[derive(Debug, Clone, Serialize)]
pub struct FlowConfig {
    pub eps: f64,
    /// CFL fraction of the explicit stability limit, in (0, 1].
    pub dt_safety: f64,
    pub t_max: f64,
    /// Convergence threshold on the sup-norm Euler–Lagrange residual.
    pub residual_tol: f64,
    /// Abort threshold on min σ₁(W); the cones are open, so 0 means strict.
    pub cone_floor: f64,
    /// Refresh ν₁, ν₂, μ, m at every RK stage (default) or freeze them at
    /// the step's start state.
    pub recompute_coeffs_per_stage: bool,
}

impl FlowConfig {
    pub fn new(eps: f64) -> FlowConfig {
        FlowConfig {
            eps,
            dt_safety: 0.4,
            t_max: 200.0,
            residual_tol: 1e-7,
            cone_floor: 0.0,
            recompute_coeffs_per_stage: true,
        }
    }

    pub fn validate(&self) -> Result<(), FlowError> {
        if !(self.eps > 0.0 && self.eps < 1.0) {
            return Err(FlowError::InvalidConfig(format!("eps = {} not in (0,1)", self.eps)));
        }
        if !(self.dt_safety > 0.0 && self.dt_safety <= 1.0) {
            return Err(FlowError::InvalidConfig(format!(
                "dt_safety = {} not in (0,1]",
                self.dt_safety
            )));
        }
        if !(self.t_max > 0.0) {
            return Err(FlowError::InvalidConfig(format!("t_max = {} not positive", self.t_max)));
        }
        if !(self.residual_tol > 0.0) {
            return Err(FlowError::InvalidConfig(format!(
                "residual_tol = {} not positive",
                self.residual_tol
            )));
        }
        if self.cone_floor < 0.0 {
            return Err(FlowError::InvalidConfig(format!(
                "cone_floor = {} negative",
                self.cone_floor
            )));
        }
        Ok(())
    }
}

/// Snapshot of the flow at one time.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub t: f64,
    pub cf: ConformalFactor,
    pub report: FunctionalReport,
    pub last_dt: f64,
    pub last_m: f64,
}

impl FlowState {
    pub fn new(cf: ConformalFactor, eps: f64) -> Result<FlowState, FlowError> {
        let sf = schouten_field(&cf);
        let report = report_with_field(&cf, &sf, eps).map_err(|e| match e {
            FunctionalsError::NotInCone { min_sigma1 } => FlowError::NotInCone { min_sigma1 },
            other => FlowError::Functionals(other),
        })?;
        Ok(FlowState { t: 0.0, cf, report, last_dt: 0.0, last_m: 0.0 })
    }
}

/// Result of evaluating the flow right-hand side at one state.
#[derive(Debug, Clone)]
pub struct RhsEval {
    pub rhs: Vec<f64>,
    /// The normalization constant m(g).
    pub m: f64,
    /// max over nodes of ∂F/∂w_ψψ — the dt controller's diffusivity.
    pub max_diffusivity: f64,
    pub min_sigma1w: f64,
    /// ∫ e^{−2u} σ₁(g) (F_g + μ)² dv(g) / (k·A): the closed-form dℰ_ε/dt.
    pub deeps_dt_formula: f64,
    /// sup |F_g + μ|: the perturbed Euler–Lagrange residual.
    pub residual: f64,
}

struct FrozenCoeffs {
    nu1: f64,
    nu2: f64,
    mu: f64,
    m: f64,
}

enum StageReject {
    ConeExit,
    Overflow,
    Parabolicity(f64),
}

/// Shared stage evaluation. With `frozen` the global coefficients (and m)
/// are taken as given; otherwise they are recomputed from this state.
fn eval_stage(
    cf: &ConformalFactor,
    eps: f64,
    cone_floor: f64,
    frozen: Option<&FrozenCoeffs>,
) -> Result<RhsEval, StageReject> {
    let sf = schouten_field(cf);
    let n = sf.len();
    let min_s1w = sf.min_sigma1();
    if !min_s1w.is_finite() {
        return Err(StageReject::Overflow);
    }
    if min_s1w <= cone_floor {
        return Err(StageReject::ConeExit);
    }
    let g = integrals(cf, &sf, eps);
    let (nu1, nu2, mu, kcoef, a, eeps) = match frozen {
        Some(f) => (f.nu1, f.nu2, f.mu, f64::NAN, f64::NAN, f64::NAN),
        None => {
            let c = perturb_coeffs(&g, eps);
            (c.nu1, c.nu2, c.mu, c.kcoef, c.a, c.eeps)
        }
    };

    let u = cf.u();
    let w = cf.grid().weights();
    let mut pointwise = Vec::with_capacity(n);
    let mut num_m = 0.0; // ∫ σ₁(g) (pointwise part) dv(g)
    let mut num_d = 0.0; // ∫ e^{−2u} σ₁(g) (F_g + μ)² dv(g)
    let mut max_fpsi = f64::NEG_INFINITY;
    let mut residual = 0.0f64;
    for i in 0..n {
        let s1 = sf.sigma1_at(i);
        let s2 = sf.sigma2_at(i);
        let emu = sf.emu[i];
        let em2u = emu * emu;
        let eepsu = (eps * u[i]).exp();
        let nubar = nu1 * eepsu * em2u * em2u + nu2; // ν₁ e^{(ε−4)u} + ν₂
        let p = (s2 - nubar) / s1 + mu * em2u;
        pointwise.push(p);

        // σ₁(g)·dv(g) weight reduces to e^{−u}σ₁(W)·dv₀.
        let s1dv = w[i] * emu * s1;
        num_m += s1dv * p;
        // e^{−2u}σ₁(g)(F_g+μ)²dv(g) = e^{u}σ₁(W)·(e^{2u}p)²·e^{−4u}... with
        // F_g + μ = e^{2u}·p this is w·e^{u}σ₁(W)p².
        num_d += w[i] * sf.eu[i] * s1 * p * p;

        let e2u = sf.eu[i] * sf.eu[i];
        residual = residual.max((e2u * p).abs());

        // ∂F/∂w_ψψ = (σ₁T^ψψ − σ₂ + ν̄)/σ₁², T^ψψ = 2λ_τ.
        let fpsi = (s1 * 2.0 * sf.lam_tau[i] - s2 + nubar) / (s1 * s1);
        max_fpsi = max_fpsi.max(fpsi);
    }
    if !(num_m.is_finite() && num_d.is_finite()) {
        return Err(StageReject::Overflow);
    }
    if !(max_fpsi > 0.0) {
        return Err(StageReject::Parabolicity(max_fpsi));
    }
    let m = match frozen {
        Some(f) => f.m,
        None => -num_m / g.i1,
    };
    let deeps = if frozen.is_some() { f64::NAN } else { eeps * num_d / (kcoef * a) };
    let rhs = pointwise.iter().map(|p| p + m).collect();
    Ok(RhsEval { rhs, m, max_diffusivity: max_fpsi, min_sigma1w: min_s1w, deeps_dt_formula: deeps, residual })
}

/// Evaluate the flow right-hand side (with fresh global coefficients).
pub fn flow_rhs(cf: &ConformalFactor, eps: f64) -> Result<RhsEval, FlowError> {
    let sf = schouten_field(cf);
    let m = sf.min_sigma1();
    match eval_stage(cf, eps, f64::NEG_INFINITY, None) {
        Ok(e) => {
            if m <= 0.0 {
                Err(FlowError::NotInCone { min_sigma1: m })
            } else {
                Ok(e)
            }
        }
        Err(StageReject::Overflow) => Err(FlowError::Overflow { t: f64::NAN }),
        Err(StageReject::Parabolicity(d)) => {
            Err(FlowError::ParabolicityLost { t: f64::NAN, diffusivity: d })
        }
        Err(StageReject::ConeExit) => Err(FlowError::NotInCone { min_sigma1: m }),
    }
}

pub(crate) struct StepInfo {
    pub residual: f64,
    pub min_sigma1w: f64,
    pub rejected_attempts: u32,
}

fn try_rk4(
    cf0: &ConformalFactor,
    dt: f64,
    eps: f64,
    cone_floor: f64,
    frozen: Option<&FrozenCoeffs>,
) -> Result<Vec<f64>, StageReject> {
    let grid = Arc::clone(cf0.grid());
    let n = cf0.u().len();
    let stage = |u: Vec<f64>| ConformalFactor::from_samples(Arc::clone(&grid), u).unwrap();

    let k1 = eval_stage(cf0, eps, cone_floor, frozen)?.rhs;
    let u2: Vec<f64> = (0..n).map(|i| cf0.u()[i] + 0.5 * dt * k1[i]).collect();
    let k2 = eval_stage(&stage(u2), eps, cone_floor, frozen)?.rhs;
    let u3: Vec<f64> = (0..n).map(|i| cf0.u()[i] + 0.5 * dt * k2[i]).collect();
    let k3 = eval_stage(&stage(u3), eps, cone_floor, frozen)?.rhs;
    let u4: Vec<f64> = (0..n).map(|i| cf0.u()[i] + dt * k3[i]).collect();
    let k4 = eval_stage(&stage(u4), eps, cone_floor, frozen)?.rhs;

    let u_new: Vec<f64> = (0..n)
        .map(|i| cf0.u()[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect();
    if u_new.iter().any(|x| !x.is_finite()) {
        return Err(StageReject::Overflow);
    }
    Ok(u_new)
}

/// Advance one accepted RK4 step. Rejected stages halve dt up to 20 times.
pub fn step(state: &FlowState, config: &FlowConfig) -> Result<FlowState, FlowError> {
    config.validate()?;
    Ok(step_internal(state, config, state.report.I1)?.0)
}

pub(crate) fn step_internal(
    state: &FlowState,
    config: &FlowConfig,
    i1_target: f64,
) -> Result<(FlowState, StepInfo), FlowError> {
    let eps = config.eps;
    // The dt controller needs any in-cone state; the cone_floor policy is
    // enforced on the RK stages, so a floor violation surfaces as rejected
    // steps rather than an immediate error.
    let min0 = schouten_field(&state.cf).min_sigma1();
    if min0 <= 0.0 {
        return Err(FlowError::NotInCone { min_sigma1: min0 });
    }
    let eval0 = match eval_stage(&state.cf, eps, f64::NEG_INFINITY, None) {
        Ok(e) => e,
        Err(StageReject::ConeExit) => unreachable!("floor disabled for the controller"),
        Err(StageReject::Overflow) => return Err(FlowError::Overflow { t: state.t }),
        Err(StageReject::Parabolicity(d)) => {
            return Err(FlowError::ParabolicityLost { t: state.t, diffusivity: d })
        }
    };

    let h = state.cf.grid().h();
    let mut dt = config.dt_safety * h * h / eval0.max_diffusivity;

    let frozen = if config.recompute_coeffs_per_stage {
        None
    } else {
        Some(FrozenCoeffs {
            nu1: state.report.nu1,
            nu2: state.report.nu2,
            mu: state.report.mu,
            m: eval0.m,
        })
    };

    let mut attempts: u32 = 0;
    loop {
        match try_rk4(&state.cf, dt, eps, config.cone_floor, frozen.as_ref()) {
            Ok(u_raw) => {
                let cf_raw =
                    ConformalFactor::from_samples(Arc::clone(state.cf.grid()), u_raw)?;
                let sf_raw = schouten_field(&cf_raw);
                let g_raw = integrals(&cf_raw, &sf_raw, eps);
                // Exact restoration of the conserved integral along the
                // constant (normalization) direction: I1(u + c) = e^{−c}I1(u).
                let shift = (g_raw.i1 / i1_target).ln();
                let cf_new = cf_raw.shifted(shift);
                let sf_new = schouten_field(&cf_new);
                let report = report_with_field(&cf_new, &sf_new, eps)?;
                let residual = perturbed_residual_sup(&cf_new, &sf_new, &report);
                let info = StepInfo {
                    residual,
                    min_sigma1w: sf_new.min_sigma1(),
                    rejected_attempts: attempts,
                };
                let next = FlowState {
                    t: state.t + dt,
                    cf: cf_new,
                    report,
                    last_dt: dt,
                    last_m: eval0.m,
                };
                return Ok((next, info));
            }
            Err(StageReject::ConeExit) => {
                attempts += 1;
                if attempts >= 20 {
                    return Err(FlowError::RetryExhausted { t: state.t, dt, attempts });
                }
                dt *= 0.5;
            }
            Err(StageReject::Overflow) => return Err(FlowError::Overflow { t: state.t }),
            Err(StageReject::Parabolicity(d)) => {
                return Err(FlowError::ParabolicityLost { t: state.t, diffusivity: d })
            }
        }
    }
}

/// Termination classification of a run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Verdict {
    Converged,
    TimedOut,
    Aborted(String),
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Converged => write!(f, "converged"),
            Verdict::TimedOut => write!(f, "timed-out"),
            Verdict::Aborted(r) => write!(f, "aborted: {r}"),
        }
    }
}

/// One recorded sample of the evolution.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TimeSeriesRow {
    pub t: f64,
    pub Eeps: f64,
    pub E: f64,
    pub I1: f64,
    pub I2: f64,
    pub vol: f64,
    pub min_sigma1W: f64,
    pub residual: f64,
    pub m: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub mu: f64,
    pub kcoef: f64,
    pub dt: f64,
    pub dEeps_dt_formula: f64,
    pub dEeps_dt_numeric: f64,
}

/// Recorded evolution with strictly increasing t. Long runs are thinned to a
/// bounded number of rows (the first and final states are always kept);
/// per-step diagnostics are accumulated in [`FlowStats`] regardless.
#[derive(Debug, Clone, Default)]
pub struct TimeSeries {
    rows: Vec<TimeSeriesRow>,
}

impl TimeSeries {
    pub const COLUMNS: [&'static str; 16] = [
        "t",
        "Eeps",
        "E",
        "I1",
        "I2",
        "vol",
        "min_sigma1W",
        "residual",
        "m",
        "nu1",
        "nu2",
        "mu",
        "kcoef",
        "dt",
        "dEeps_dt_formula",
        "dEeps_dt_numeric",
    ];

    pub fn rows(&self) -> &[TimeSeriesRow] {
        &self.rows
    }

    pub fn write_csv<W: IoWrite>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "{}", Self::COLUMNS.join(","))?;
        for r in &self.rows {
            let vals = [
                r.t,
                r.Eeps,
                r.E,
                r.I1,
                r.I2,
                r.vol,
                r.min_sigma1W,
                r.residual,
                r.m,
                r.nu1,
                r.nu2,
                r.mu,
                r.kcoef,
                r.dt,
                r.dEeps_dt_formula,
                r.dEeps_dt_numeric,
            ];
            let line: Vec<String> = vals.iter().map(|v| fmt17(*v)).collect();
            writeln!(out, "{}", line.join(","))?;
        }
        Ok(())
    }
}

/// Per-step aggregates over a whole run.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FlowStats {
    pub steps: u64,
    pub rejected_attempts: u64,
    pub i1_initial: f64,
    /// max over steps of |I1(t) − I1(0)|/I1(0).
    pub i1_max_drift_rel: f64,
    /// min over steps of ℰ_ε(t_{j+1}) − ℰ_ε(t_j).
    pub eeps_min_step_delta: f64,
    /// Steps with ℰ_ε decreasing by more than 1e-9.
    pub monotonicity_violations: u64,
    pub min_sigma1w_overall: f64,
    pub final_residual: f64,
}

#[derive(Debug)]
pub struct FlowOutcome {
    pub verdict: Verdict,
    pub series: TimeSeries,
    pub state: FlowState,
    pub stats: FlowStats,
}

const MAX_SERIES_ROWS: usize = 200_000;

fn make_row(state: &FlowState, eval: &RhsEval, prev: Option<&TimeSeriesRow>) -> TimeSeriesRow {
    let numeric = match prev {
        Some(p) if state.t > p.t => (state.report.Eeps - p.Eeps) / (state.t - p.t),
        // No earlier sample: report the closed form.
        _ => eval.deeps_dt_formula,
    };
    TimeSeriesRow {
        t: state.t,
        Eeps: state.report.Eeps,
        E: state.report.E,
        I1: state.report.I1,
        I2: state.report.I2,
        vol: state.report.vol,
        min_sigma1W: eval.min_sigma1w,
        residual: eval.residual,
        m: eval.m,
        nu1: state.report.nu1,
        nu2: state.report.nu2,
        mu: state.report.mu,
        kcoef: state.report.kcoef,
        dt: state.last_dt,
        dEeps_dt_formula: eval.deeps_dt_formula,
        dEeps_dt_numeric: numeric,
    }
}

/// Integrate from cf0 until the Euler–Lagrange residual drops below
/// `residual_tol` (Converged), `t_max` is reached (TimedOut), or the step
/// machinery gives up (Aborted, with the partial series for diagnosis).
pub fn run(cf0: ConformalFactor, config: &FlowConfig) -> Result<FlowOutcome, FlowError> {
    config.validate()?;
    let mut state = FlowState::new(cf0, config.eps)?;
    let eval0 = flow_rhs(&state.cf, config.eps)?;

    let mut stats = FlowStats {
        steps: 0,
        rejected_attempts: 0,
        i1_initial: state.report.I1,
        i1_max_drift_rel: 0.0,
        eeps_min_step_delta: f64::INFINITY,
        monotonicity_violations: 0,
        min_sigma1w_overall: eval0.min_sigma1w,
        final_residual: eval0.residual,
    };

    let mut series = TimeSeries::default();
    series.rows.push(make_row(&state, &eval0, None));

    if eval0.residual <= config.residual_tol {
        return Ok(FlowOutcome { verdict: Verdict::Converged, series, state, stats });
    }

    let i1_target = state.report.I1;
    let mut stride: u64 = 1;
    let mut last_recorded_step: u64 = 0;
    let mut verdict;
    loop {
        if state.t >= config.t_max {
            verdict = Verdict::TimedOut;
            break;
        }
        let prev_eeps = state.report.Eeps;
        match step_internal(&state, config, i1_target) {
            Ok((next, info)) => {
                stats.steps += 1;
                stats.rejected_attempts += info.rejected_attempts as u64;
                let delta = next.report.Eeps - prev_eeps;
                stats.eeps_min_step_delta = stats.eeps_min_step_delta.min(delta);
                if delta < -1e-9 {
                    stats.monotonicity_violations += 1;
                }
                let drift = (next.report.I1 - i1_target).abs() / i1_target.abs();
                stats.i1_max_drift_rel = stats.i1_max_drift_rel.max(drift);
                stats.min_sigma1w_overall = stats.min_sigma1w_overall.min(info.min_sigma1w);
                stats.final_residual = info.residual;
                state = next;

                let converged = info.residual <= config.residual_tol;
                if converged || stats.steps - last_recorded_step >= stride {
                    if let Ok(ev) = eval_stage(&state.cf, config.eps, f64::NEG_INFINITY, None) {
                        let prev = series.rows.last().cloned();
                        series.rows.push(make_row(&state, &ev, prev.as_ref()));
                        last_recorded_step = stats.steps;
                        if series.rows.len() >= MAX_SERIES_ROWS {
                            // Thin to half, doubling the stride; keeps the
                            // first row and strict monotonicity in t.
                            let kept: Vec<TimeSeriesRow> = series
                                .rows
                                .iter()
                                .cloned()
                                .enumerate()
                                .filter(|(i, _)| i % 2 == 0)
                                .map(|(_, r)| r)
                                .collect();
                            series.rows = kept;
                            stride *= 2;
                        }
                    }
                }
                if converged {
                    verdict = Verdict::Converged;
                    break;
                }
            }
            Err(e) => {
                verdict = Verdict::Aborted(e.to_string());
                break;
            }
        }
    }

    // Make sure the final state is on record.
    let record_final = series
        .rows
        .last()
        .map(|r| r.t < state.t)
        .unwrap_or(true);
    if record_final {
        if let Ok(ev) = eval_stage(&state.cf, config.eps, f64::NEG_INFINITY, None) {
            let prev = series.rows.last().cloned();
            series.rows.push(make_row(&state, &ev, prev.as_ref()));
        }
    }

    if let Verdict::Aborted(_) = verdict {
        // keep verdict as-is; callers dump the checkpoint for diagnosis
    } else if state.t >= config.t_max && stats.final_residual > config.residual_tol {
        verdict = Verdict::TimedOut;
    }

    Ok(FlowOutcome { verdict, series, state, stats })
}

/// Per-ε summary of a sweep run.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize)]
pub struct EpsSweepRow {
    pub eps: f64,
    pub verdict: String,
    pub converged: bool,
    pub t_final: f64,
    pub steps: u64,
    pub Eeps_final: f64,
    pub E_final: f64,
    pub empirical_C0: f64,
    /// (2/(C₀ε))^ε / (3(1−ε)) with the empirical C₀.
    pub lemma6_bound: f64,
    pub bound_ok: bool,
    pub residual_final: f64,
    pub i1_drift_rel: f64,
    pub eeps_min_step_delta: f64,
    pub min_sigma1w: f64,
    pub in_C1eps_final: bool,
}

/// Converged energies per ε, the Lemma-6 style bound with the empirical C₀,
/// and the trend of ℰ toward its limit.
#[allow(non_snake_case)]
#[derive(Debug, Clone, Serialize)]
pub struct EpsSweepReport {
    pub rows: Vec<EpsSweepRow>,
    pub all_converged: bool,
    pub max_E: f64,
    pub E_trend: Vec<f64>,
}

pub fn lemma6_bound(c0: f64, eps: f64) -> f64 {
    (2.0 / (c0 * eps)).powf(eps) / (3.0 * (1.0 - eps))
}

/// Run the flow once per ε from the same initial data.
pub fn eps_sweep(
    cf0: &ConformalFactor,
    eps_list: &[f64],
    base: &FlowConfig,
) -> Result<(EpsSweepReport, Vec<FlowOutcome>), FlowError> {
    let mut rows = Vec::with_capacity(eps_list.len());
    let mut outcomes = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let mut config = base.clone();
        config.eps = eps;
        let outcome = run(cf0.clone(), &config)?;
        let c0 = crate::functionals::lemma4_bounds(&outcome.state.cf).empirical_c0;
        let bound = lemma6_bound(c0, eps);
        rows.push(EpsSweepRow {
            eps,
            verdict: outcome.verdict.to_string(),
            converged: outcome.verdict == Verdict::Converged,
            t_final: outcome.state.t,
            steps: outcome.stats.steps,
            Eeps_final: outcome.state.report.Eeps,
            E_final: outcome.state.report.E,
            empirical_C0: c0,
            lemma6_bound: bound,
            bound_ok: outcome.state.report.Eeps <= bound,
            residual_final: outcome.stats.final_residual,
            i1_drift_rel: outcome.stats.i1_max_drift_rel,
            eeps_min_step_delta: outcome.stats.eeps_min_step_delta,
            min_sigma1w: outcome.stats.min_sigma1w_overall,
            in_C1eps_final: outcome.state.report.in_C1eps,
        });
        outcomes.push(outcome);
    }
    let all_converged = rows.iter().all(|r| r.converged);
    let max_e = rows.iter().map(|r| r.E_final).fold(f64::NEG_INFINITY, f64::max);
    let e_trend = rows.iter().map(|r| r.E_final).collect();
    Ok((
        EpsSweepReport { rows, all_converged, max_E: max_e, E_trend: e_trend },
        outcomes,
    ))
}

#[derive(Debug, Error, PartialEq)]
pub enum CheckpointError {
    #[error("checkpoint line {line}: {msg}")]
    Malformed { line: usize, msg: String },
    #[error("checkpoint missing key '{0}'")]
    MissingKey(String),
}

/// Self-describing text record of config, time and the u samples; decimal
/// fields carry 17 significant digits so the round-trip is bit exact.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub config: FlowConfig,
    pub t: f64,
    pub last_dt: f64,
    pub last_m: f64,
    pub n_cells: usize,
    pub u: Vec<f64>,
}

impl Checkpoint {
    pub fn from_state(state: &FlowState, config: &FlowConfig) -> Checkpoint {
        Checkpoint {
            config: config.clone(),
            t: state.t,
            last_dt: state.last_dt,
            last_m: state.last_m,
            n_cells: state.cf.grid().n_cells(),
            u: state.cf.u().to_vec(),
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# sigma2 flow checkpoint v1\n");
        s.push_str(&format!("eps={}\n", fmt17(self.config.eps)));
        s.push_str(&format!("dt_safety={}\n", fmt17(self.config.dt_safety)));
        s.push_str(&format!("t_max={}\n", fmt17(self.config.t_max)));
        s.push_str(&format!("residual_tol={}\n", fmt17(self.config.residual_tol)));
        s.push_str(&format!("cone_floor={}\n", fmt17(self.config.cone_floor)));
        s.push_str(&format!(
            "recompute_coeffs_per_stage={}\n",
            self.config.recompute_coeffs_per_stage
        ));
        s.push_str(&format!("t={}\n", fmt17(self.t)));
        s.push_str(&format!("last_dt={}\n", fmt17(self.last_dt)));
        s.push_str(&format!("last_m={}\n", fmt17(self.last_m)));
        s.push_str(&format!("n_cells={}\n", self.n_cells));
        let u: Vec<String> = self.u.iter().map(|x| fmt17(*x)).collect();
        s.push_str(&format!("u={}\n", u.join(" ")));
        s
    }

    pub fn parse(text: &str) -> Result<Checkpoint, CheckpointError> {
        let mut kv = std::collections::HashMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or(CheckpointError::Malformed {
                line: idx + 1,
                msg: "expected key=value".into(),
            })?;
            kv.insert(k.to_string(), (idx + 1, v.to_string()));
        }
        let get = |k: &str| -> Result<(usize, String), CheckpointError> {
            kv.get(k).cloned().ok_or_else(|| CheckpointError::MissingKey(k.to_string()))
        };
        let f = |k: &str| -> Result<f64, CheckpointError> {
            let (line, v) = get(k)?;
            v.parse().map_err(|_| CheckpointError::Malformed {
                line,
                msg: format!("bad float '{v}' for {k}"),
            })
        };
        let (bline, bval) = get("recompute_coeffs_per_stage")?;
        let recompute = match bval.as_str() {
            "true" => true,
            "false" => false,
            other => {
                return Err(CheckpointError::Malformed {
                    line: bline,
                    msg: format!("bad bool '{other}'"),
                })
            }
        };
        let (nline, nval) = get("n_cells")?;
        let n_cells: usize = nval.parse().map_err(|_| CheckpointError::Malformed {
            line: nline,
            msg: format!("bad integer '{nval}'"),
        })?;
        let (uline, uval) = get("u")?;
        let u: Result<Vec<f64>, _> = uval.split_whitespace().map(|t| t.parse::<f64>()).collect();
        let u = u.map_err(|_| CheckpointError::Malformed {
            line: uline,
            msg: "bad float in u samples".into(),
        })?;
        if u.len() != n_cells {
            return Err(CheckpointError::Malformed {
                line: uline,
                msg: format!("expected {n_cells} samples, got {}", u.len()),
            });
        }
        Ok(Checkpoint {
            config: FlowConfig {
                eps: f("eps")?,
                dt_safety: f("dt_safety")?,
                t_max: f("t_max")?,
                residual_tol: f("residual_tol")?,
                cone_floor: f("cone_floor")?,
                recompute_coeffs_per_stage: recompute,
            },
            t: f("t")?,
            last_dt: f("last_dt")?,
            last_m: f("last_m")?,
            n_cells,
            u,
        })
    }

    /// Rebuild a flow state (report recomputed from the samples).
    pub fn restore(&self) -> Result<(FlowState, FlowConfig), FlowError> {
        let grid = Grid::new(self.n_cells)?;
        let cf = ConformalFactor::from_samples(grid, self.u.clone())?;
        let mut state = FlowState::new(cf, self.config.eps)?;
        state.t = self.t;
        state.last_dt = self.last_dt;
        state.last_m = self.last_m;
        Ok((state, self.config.clone()))
    }
}
