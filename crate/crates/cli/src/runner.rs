//! Experiment orchestration and file emission.
//!
//! Every command writes its artifacts under an output directory:
//! `report.json` (with a `timestamp_unix_ms` field; everything else is
//! deterministic for a fixed config and seed), `timeseries.csv` with
//! 17-significant-digit decimals, and flow checkpoints as self-describing
//! text. Exit codes: 0 = pass, 1 = check failure (non-convergence or a
//! violated inequality), 2 = usage/config/environment error.

use std::fs;
use std::io::Write as IoWrite;
use std::path::Path;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use thiserror::Error;

use sigma2_core::curvature::{
    quotient_f, quotient_gradient, quotient_hessian_form, SymMatrix3,
};
use sigma2_core::flow::{
    eps_sweep, run, Checkpoint, EpsSweepReport, FlowConfig, FlowError, FlowOutcome, FlowStats,
    Verdict,
};
use sigma2_core::functionals::FunctionalReport;
use sigma2_core::sphere::{
    curvatures_of_g, schouten_field, warped_sigma, ConformalFactor, Grid, SphereError,
};
use sigma2_core::util::{fmt17, SplitMix64};

use crate::audit::{audit, AuditError, AuditParams, AuditReport};
use crate::config::{ConfigError, Scenario};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Flow(#[from] FlowError),
    #[error(transparent)]
    Audit(#[from] AuditError),
    #[error(transparent)]
    Sphere(#[from] SphereError),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

fn timestamp_ms() -> u128 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[derive(Serialize)]
struct RunReportFile<'a> {
    timestamp_unix_ms: u128,
    scenario: &'a Scenario,
    eps: f64,
    verdict: String,
    t_final: f64,
    steps: u64,
    stats: &'a FlowStats,
    final_report: &'a FunctionalReport,
}

/// Flat CSV form of a functional report, one header and one row, field
/// names exactly as in the type.
fn write_report_csv(path: &Path, rep: &FunctionalReport) -> Result<(), CliError> {
    let mut f = fs::File::create(path)?;
    writeln!(
        f,
        "vol,I1,I2,I4,Ieps,umax,E,Eeps,r2,s,nu1,nu2,mu,kcoef,in_C1,in_C1eps,eps"
    )?;
    writeln!(
        f,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        fmt17(rep.vol),
        fmt17(rep.I1),
        fmt17(rep.I2),
        fmt17(rep.I4),
        fmt17(rep.Ieps),
        fmt17(rep.umax),
        fmt17(rep.E),
        fmt17(rep.Eeps),
        fmt17(rep.r2),
        fmt17(rep.s),
        fmt17(rep.nu1),
        fmt17(rep.nu2),
        fmt17(rep.mu),
        fmt17(rep.kcoef),
        rep.in_C1,
        rep.in_C1eps,
        fmt17(rep.eps),
    )?;
    Ok(())
}

fn flow_config(scenario: &Scenario, eps: f64) -> FlowConfig {
    let mut c = FlowConfig::new(eps);
    c.dt_safety = scenario.dt_safety;
    c.t_max = scenario.t_max;
    c.residual_tol = scenario.residual_tol;
    c
}

fn initial_factor(scenario: &Scenario) -> Result<ConformalFactor, CliError> {
    let grid = Grid::new(scenario.grid_n)?;
    Ok(ConformalFactor::from_coefficients(Arc::clone(&grid), &scenario.coeffs))
}

fn write_flow_artifacts(
    dir: &Path,
    outcome: &FlowOutcome,
    config: &FlowConfig,
    suffix: &str,
) -> Result<(), CliError> {
    let mut csv = fs::File::create(dir.join(format!("timeseries{suffix}.csv")))?;
    outcome.series.write_csv(&mut csv)?;
    let cp = Checkpoint::from_state(&outcome.state, config);
    let name = match outcome.verdict {
        Verdict::Aborted(_) => format!("checkpoint-abort{suffix}.txt"),
        _ => format!("checkpoint-final{suffix}.txt"),
    };
    fs::write(dir.join(name), cp.to_text())?;
    Ok(())
}

/// `run`: integrate one scenario at its single ε.
pub fn cmd_run(scenario: &Scenario, out_dir: &Path, quiet: bool) -> Result<i32, CliError> {
    if scenario.eps_list.len() != 1 {
        return Err(CliError::Usage(
            "run expects a single eps; use the sweep subcommand for lists".into(),
        ));
    }
    let eps = scenario.eps_list[0];
    fs::create_dir_all(out_dir)?;
    let config = flow_config(scenario, eps);
    let outcome = run(initial_factor(scenario)?, &config)?;
    write_flow_artifacts(out_dir, &outcome, &config, "")?;
    write_report_csv(&out_dir.join("report.csv"), &outcome.state.report)?;
    write_json(
        &out_dir.join("report.json"),
        &RunReportFile {
            timestamp_unix_ms: timestamp_ms(),
            scenario,
            eps,
            verdict: outcome.verdict.to_string(),
            t_final: outcome.state.t,
            steps: outcome.stats.steps,
            stats: &outcome.stats,
            final_report: &outcome.state.report,
        },
    )?;
    if !quiet {
        println!(
            "run '{}': {} at t = {:.6}, steps = {}, E = {:.12}, residual = {:.3e}",
            scenario.name,
            outcome.verdict,
            outcome.state.t,
            outcome.stats.steps,
            outcome.state.report.E,
            outcome.stats.final_residual,
        );
    }
    Ok(if outcome.verdict == Verdict::Converged { 0 } else { 1 })
}

#[derive(Serialize)]
struct SweepReportFile<'a> {
    timestamp_unix_ms: u128,
    scenario: &'a Scenario,
    sweep: &'a EpsSweepReport,
}

/// `sweep`: one flow per ε from the same initial data.
pub fn cmd_sweep(
    scenario: &Scenario,
    eps_override: Option<Vec<f64>>,
    out_dir: &Path,
    quiet: bool,
) -> Result<i32, CliError> {
    let mut scenario = scenario.clone();
    if let Some(eps) = eps_override {
        scenario.eps_list = eps;
        scenario.validate()?;
    }
    fs::create_dir_all(out_dir)?;
    let base = flow_config(&scenario, scenario.eps_list[0]);
    let (sweep, outcomes) = eps_sweep(&initial_factor(&scenario)?, &scenario.eps_list, &base)?;
    for (idx, outcome) in outcomes.iter().enumerate() {
        let mut config = base.clone();
        config.eps = scenario.eps_list[idx];
        write_flow_artifacts(out_dir, outcome, &config, &format!("-eps{idx}"))?;
    }
    write_json(
        &out_dir.join("report.json"),
        &SweepReportFile { timestamp_unix_ms: timestamp_ms(), scenario: &scenario, sweep: &sweep },
    )?;
    if !quiet {
        for r in &sweep.rows {
            println!(
                "eps = {:<8}: {} t = {:<10.3} Eeps = {:<14.6e} E = {:.12} bound = {:.6} ({})",
                r.eps,
                r.verdict,
                r.t_final,
                r.Eeps_final,
                r.E_final,
                r.lemma6_bound,
                if r.bound_ok { "ok" } else { "exceeded" },
            );
        }
    }
    Ok(if sweep.all_converged { 0 } else { 1 })
}

#[derive(Serialize)]
struct AuditReportFile<'a> {
    timestamp_unix_ms: u128,
    audit: &'a AuditReport,
}

fn write_audit_csv(path: &Path, report: &AuditReport) -> Result<(), CliError> {
    let mut f = fs::File::create(path)?;
    writeln!(
        f,
        "seed,in_C1,in_C1eps,E,dlt_lhs,dlt_rhs,identity_residual,J,J2,lemma4_upper_ok,empirical_C0,j2_exceeds_round,nu1_over_mu,lemma3i_bound,lemma3i_ok"
    )?;
    for s in &report.samples {
        writeln!(
            f,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.seed,
            s.in_C1,
            s.in_C1eps,
            fmt17(s.E),
            fmt17(s.dlt_lhs),
            fmt17(s.dlt_rhs),
            fmt17(s.identity_residual),
            fmt17(s.J),
            fmt17(s.J2),
            s.lemma4_upper_ok,
            fmt17(s.empirical_C0),
            s.j2_exceeds_round,
            fmt17(s.nu1_over_mu),
            fmt17(s.lemma3i_bound),
            s.lemma3i_ok.map(|b| b.to_string()).unwrap_or_else(|| "na".into()),
        )?;
    }
    Ok(())
}

/// `audit`: deterministic random-metric inequality audit.
pub fn cmd_audit(params: &AuditParams, out_dir: &Path, quiet: bool) -> Result<i32, CliError> {
    fs::create_dir_all(out_dir)?;
    let report = audit(params)?;
    write_json(
        &out_dir.join("report.json"),
        &AuditReportFile { timestamp_unix_ms: timestamp_ms(), audit: &report },
    )?;
    write_audit_csv(&out_dir.join("audit.csv"), &report)?;
    if !quiet {
        println!(
            "audit: {} samples, max E = {:.12}, {} in C1eps, {} violations",
            report.summary.n_samples,
            report.summary.max_E,
            report.summary.n_in_C1eps,
            report.summary.violations.len(),
        );
        for v in &report.summary.violations {
            println!("  violation: {v}");
        }
    }
    Ok(if report.summary.violations.is_empty() { 0 } else { 1 })
}

#[derive(Serialize)]
struct CheckLine {
    name: String,
    pass: bool,
    detail: String,
}

#[derive(Serialize)]
struct ChecksFile {
    timestamp_unix_ms: u128,
    checks: Vec<CheckLine>,
}

fn emit_checks(
    checks: Vec<CheckLine>,
    out_dir: Option<&Path>,
    quiet: bool,
) -> Result<i32, CliError> {
    let all_pass = checks.iter().all(|c| c.pass);
    if !quiet {
        for c in &checks {
            println!("{} {}: {}", if c.pass { "PASS" } else { "FAIL" }, c.name, c.detail);
        }
    }
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)?;
        write_json(&dir.join("report.json"), &ChecksFile { timestamp_unix_ms: timestamp_ms(), checks })?;
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn random_sym(rng: &mut SplitMix64, scale: f64) -> SymMatrix3 {
    SymMatrix3::new(
        rng.next_in(-scale, scale),
        rng.next_in(-scale, scale),
        rng.next_in(-scale, scale),
        rng.next_in(-scale, scale),
        rng.next_in(-scale, scale),
        rng.next_in(-scale, scale),
    )
}

fn random_gamma1(rng: &mut SplitMix64) -> SymMatrix3 {
    let w = random_sym(rng, 1.0);
    let target = rng.next_in(0.3, 3.0);
    let shift = (target - w.trace()) / 3.0;
    SymMatrix3::new(w.w11 + shift, w.w12, w.w13, w.w22 + shift, w.w23, w.w33 + shift)
}

/// `oracle-check`: derivative closed forms vs central finite differences,
/// and the two independent curvature routes against each other.
pub fn cmd_oracle_check(out_dir: Option<&Path>, quiet: bool) -> Result<i32, CliError> {
    let mut checks = Vec::new();
    let h = 1e-5;

    let mut rng = SplitMix64::new(0xacc_e55);
    let mut worst_grad = 0.0f64;
    let mut worst_hess = 0.0f64;
    for case in 0..100 {
        let w = random_gamma1(&mut rng);
        let r = random_sym(&mut rng, 1.0);
        let nu = if case % 2 == 0 { 0.0 } else { rng.next_in(0.1, 2.0) };

        let analytic = quotient_gradient(&w, nu).unwrap().dot(&r);
        let fp = quotient_f(&w.add(&r.scaled(h)), nu).unwrap();
        let fm = quotient_f(&w.add(&r.scaled(-h)), nu).unwrap();
        let numeric = (fp - fm) / (2.0 * h);
        worst_grad =
            worst_grad.max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0));

        let hess = quotient_hessian_form(&w, &r).unwrap();
        let gp = quotient_gradient(&w.add(&r.scaled(h)), 0.0).unwrap().dot(&r);
        let gm = quotient_gradient(&w.add(&r.scaled(-h)), 0.0).unwrap().dot(&r);
        let hess_fd = (gp - gm) / (2.0 * h);
        worst_hess =
            worst_hess.max((hess - hess_fd).abs() / hess.abs().max(hess_fd.abs()).max(1.0));
    }
    checks.push(CheckLine {
        name: "quotient-gradient-vs-fd".into(),
        pass: worst_grad < 1e-6,
        detail: format!("worst relative deviation {worst_grad:.3e} over 100 cases (step 1e-5)"),
    });
    checks.push(CheckLine {
        name: "quotient-hessian-vs-fd".into(),
        pass: worst_hess < 1e-6,
        detail: format!("worst relative deviation {worst_hess:.3e} over 100 cases (step 1e-5)"),
    });

    let n = 1024;
    let cf = ConformalFactor::from_coefficients(Grid::new(n)?, &[0.0, 0.3]);
    let sf = schouten_field(&cf);
    let (s1a, s2a) = curvatures_of_g(&sf, &cf);
    let (s1b, s2b) = warped_sigma(&cf);
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max((s1a[i] - s1b[i]).abs() / s1a[i].abs().max(s1b[i].abs()));
        worst = worst.max((s2a[i] - s2b[i]).abs() / s2a[i].abs().max(s2b[i].abs()));
    }
    checks.push(CheckLine {
        name: "curvature-two-routes".into(),
        pass: worst < 1e-4,
        detail: format!("max relative deviation {worst:.3e} at n = {n} for u = 0.3 cos psi"),
    });

    emit_checks(checks, out_dir, quiet)
}

/// `refine`: O(h²) decay of the two-route disagreement across doublings.
pub fn cmd_refine(out_dir: Option<&Path>, quiet: bool) -> Result<i32, CliError> {
    let grids = [128usize, 256, 512, 1024];
    let mut errs = Vec::new();
    for &n in &grids {
        let cf = ConformalFactor::from_coefficients(Grid::new(n)?, &[0.0, 0.3]);
        let sf = schouten_field(&cf);
        let (s1a, s2a) = curvatures_of_g(&sf, &cf);
        let (s1b, s2b) = warped_sigma(&cf);
        let mut worst = 0.0f64;
        for i in 0..n {
            worst = worst.max((s1a[i] - s1b[i]).abs() / s1a[i].abs().max(s1b[i].abs()));
            worst = worst.max((s2a[i] - s2b[i]).abs() / s2a[i].abs().max(s2b[i].abs()));
        }
        errs.push(worst);
    }
    let mut checks = Vec::new();
    for k in 0..grids.len() - 1 {
        let ratio = errs[k] / errs[k + 1];
        checks.push(CheckLine {
            name: format!("refine-{}-to-{}", grids[k], grids[k + 1]),
            pass: (3.0..6.0).contains(&ratio),
            detail: format!(
                "error {:.3e} -> {:.3e}, ratio {ratio:.2} (O(h^2) target 4)",
                errs[k],
                errs[k + 1]
            ),
        });
    }
    emit_checks(checks, out_dir, quiet)
}
