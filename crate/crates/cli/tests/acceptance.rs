//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! per clause before asserting.
//!
//! Two clauses probe regimes where the perturbed functional ℰ_ε is negative
//! on this conformal class (the admissibility condition
//! ∫e^{εu}dv(g) > ε(∫σ₁dv)^{3−ε} fails on the unit round class for
//! ε ≳ 7.6e-4, a scale-invariant threshold): the per-step monotonicity of
//! ℰ_ε at ε = 0.05 and the linear ε-rate of the coefficient limits across
//! {1e-2, 1e-3, 1e-4}. Those clauses are asserted as stated and fail
//! honestly; the companion `supplementary_*` tests demonstrate both
//! properties in the admissible regime ε < 7.6e-4, where their hypotheses
//! hold.

use std::f64::consts::PI;
use std::sync::{Mutex, MutexGuard};
use std::time::Instant;

use sigma2_cli::audit::{audit, AuditParams};
use sigma2_core::curvature::{
    quotient_f, quotient_gradient, quotient_hessian_form, SymMatrix3,
};
use sigma2_core::flow::{eps_sweep, flow_rhs, run, step, FlowConfig, FlowState, Verdict};
use sigma2_core::functionals::{coefficient_limits, dlt_sides, report};
use sigma2_core::sphere::{
    curvatures_of_g, schouten_field, warped_sigma, ConformalFactor, Grid,
};
use sigma2_core::util::SplitMix64;

/// The runtime clauses measure wall time, so the criteria run one at a
/// time regardless of the harness thread count.
static SERIAL: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    SERIAL.lock().unwrap_or_else(|poisoned| poisoned.into_inner())
}

struct Clauses {
    criterion: &'static str,
    rows: Vec<(String, bool, String)>,
}

impl Clauses {
    fn new(criterion: &'static str) -> Self {
        Clauses { criterion, rows: Vec::new() }
    }

    fn check(&mut self, label: &str, pass: bool, detail: String) {
        self.rows.push((label.to_string(), pass, detail));
    }

    fn finish(mut self, started: Instant, cap_seconds: f64) {
        let elapsed = started.elapsed().as_secs_f64();
        self.rows.push((
            format!("runtime < {cap_seconds} s"),
            elapsed < cap_seconds,
            format!("{elapsed:.2} s"),
        ));
        let mut failed = Vec::new();
        for (label, pass, detail) in &self.rows {
            println!(
                "[{}] {} {}: {}",
                self.criterion,
                if *pass { "PASS" } else { "FAIL" },
                label,
                detail
            );
            if !*pass {
                failed.push(label.clone());
            }
        }
        assert!(failed.is_empty(), "{}: failed clauses: {}", self.criterion, failed.join("; "));
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

#[test]
fn criterion_1_round_sphere_anchors() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut c = Clauses::new("criterion 1: round anchors");
    let cf = ConformalFactor::constant(Grid::new(256).unwrap(), 0.0);
    let rep = report(&cf, 0.05).unwrap();
    let pi2 = PI * PI;

    c.check("vol = 2pi^2", rel(rep.vol, 2.0 * pi2) < 1e-10, format!("{:.15e}", rep.vol));
    c.check("I1 = 3pi^2", rel(rep.I1, 3.0 * pi2) < 1e-10, format!("{:.15e}", rep.I1));
    c.check("I2 = (3/2)pi^2", rel(rep.I2, 1.5 * pi2) < 1e-10, format!("{:.15e}", rep.I2));
    c.check("E = 1/3", rel(rep.E, 1.0 / 3.0) < 1e-10, format!("{:.15e}", rep.E));

    let d = dlt_sides(&cf);
    let tol = 1e-10 * PI.powi(4);
    c.check(
        "almost-Schur sides vanish",
        d.lhs.abs() < tol && d.rhs.abs() < tol,
        format!("lhs {:.3e}, rhs {:.3e}", d.lhs, d.rhs),
    );
    c.finish(t0, 1.0);
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

#[test]
fn criterion_2_hessian_and_gradient_vs_finite_differences() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut c = Clauses::new("criterion 2: derivative closed forms");
    let h = 1e-5;
    let mut rng = SplitMix64::new(0xc2_c2c2);
    let mut worst_grad = 0.0f64;
    let mut worst_hess = 0.0f64;
    for case in 0..100 {
        let w = random_gamma1(&mut rng);
        let r = random_sym(&mut rng, 1.0);
        let nu = if case % 2 == 0 { 0.0 } else { rng.next_in(0.1, 2.0) };

        // Gradient: central differences of the quotient itself.
        let analytic = quotient_gradient(&w, nu).unwrap().dot(&r);
        let fp = quotient_f(&w.add(&r.scaled(h)), nu).unwrap();
        let fm = quotient_f(&w.add(&r.scaled(-h)), nu).unwrap();
        let numeric = (fp - fm) / (2.0 * h);
        worst_grad = worst_grad
            .max((analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1.0));

        // Hessian: central differences of the gradient contraction.
        let hess = quotient_hessian_form(&w, &r).unwrap();
        let gp = quotient_gradient(&w.add(&r.scaled(h)), 0.0).unwrap().dot(&r);
        let gm = quotient_gradient(&w.add(&r.scaled(-h)), 0.0).unwrap().dot(&r);
        let hess_fd = (gp - gm) / (2.0 * h);
        worst_hess =
            worst_hess.max((hess - hess_fd).abs() / hess.abs().max(hess_fd.abs()).max(1.0));
    }
    c.check(
        "gradient matches FD (step 1e-5) to 1e-6",
        worst_grad < 1e-6,
        format!("worst relative {worst_grad:.3e} over 100 cases"),
    );
    c.check(
        "hessian form matches FD (step 1e-5) to 1e-6",
        worst_hess < 1e-6,
        format!("worst relative {worst_hess:.3e} over 100 cases"),
    );
    c.finish(t0, 1.0);
}

fn two_route_worst(n: usize) -> f64 {
    let cf = ConformalFactor::from_coefficients(Grid::new(n).unwrap(), &[0.0, 0.3]);
    let sf = schouten_field(&cf);
    let (s1a, s2a) = curvatures_of_g(&sf, &cf);
    let (s1b, s2b) = warped_sigma(&cf);
    let mut worst = 0.0f64;
    for i in 0..n {
        worst = worst.max((s1a[i] - s1b[i]).abs() / s1a[i].abs().max(s1b[i].abs()));
        worst = worst.max((s2a[i] - s2b[i]).abs() / s2a[i].abs().max(s2b[i].abs()));
    }
    worst
}

#[test]
fn criterion_3_curvature_oracle_agreement() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut c = Clauses::new("criterion 3: curvature oracle");
    let e256 = two_route_worst(256);
    let e512 = two_route_worst(512);
    let e1024 = two_route_worst(1024);
    c.check(
        "max relative error < 1e-4 at n = 1024",
        e1024 < 1e-4,
        format!("{e1024:.3e}"),
    );
    let r1 = e256 / e512;
    let r2 = e512 / e1024;
    c.check(
        "error halves x4 per grid doubling",
        (3.0..6.0).contains(&r1) && (3.0..6.0).contains(&r2),
        format!("errors {e256:.3e} -> {e512:.3e} -> {e1024:.3e}, ratios {r1:.2}, {r2:.2}"),
    );
    c.finish(t0, 5.0);
}

#[test]
fn criterion_4_almost_schur_audit() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut c = Clauses::new("criterion 4: almost-Schur audit");
    let params = AuditParams::default(); // 100 samples, amplitude 0.3, n = 256
    let rep = audit(&params).unwrap();

    let mut worst_gap = f64::NEG_INFINITY;
    let mut worst_idrel = 0.0f64;
    for s in &rep.samples {
        let scale = s.dlt_lhs.abs().max(s.dlt_rhs.abs()).max(1.0);
        worst_gap = worst_gap.max((s.dlt_lhs - s.dlt_rhs) / scale);
        worst_idrel = worst_idrel.max(s.identity_residual / scale);
    }
    c.check(
        "lhs <= rhs + 1e-8 scale on every sample",
        worst_gap <= 1e-8,
        format!("worst (lhs-rhs)/scale = {worst_gap:.3e}"),
    );
    c.check(
        "identity residual <= 1e-8 scale",
        worst_idrel <= 1e-8,
        format!("worst relative residual {worst_idrel:.3e}"),
    );
    c.check(
        "E <= 1/3 + 1e-6 on every sample",
        rep.summary.max_E <= 1.0 / 3.0 + 1e-6,
        format!("max E = {:.12}", rep.summary.max_E),
    );
    c.check(
        "no recorded violations",
        rep.summary.violations.is_empty(),
        format!("{:?}", rep.summary.violations),
    );
    c.finish(t0, 30.0);
}

#[test]
fn criterion_5_flow_benchmark() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut c = Clauses::new("criterion 5: flow benchmark");
    let cf0 = ConformalFactor::from_coefficients(Grid::new(256).unwrap(), &[0.0, 0.2]);
    let mut config = FlowConfig::new(0.05);
    config.t_max = 400.0;
    let outcome = run(cf0, &config).unwrap();

    c.check(
        "converges with residual <= 1e-7",
        outcome.verdict == Verdict::Converged && outcome.stats.final_residual <= 1e-7,
        format!(
            "{} at t = {:.3} after {} steps, residual {:.3e}",
            outcome.verdict, outcome.state.t, outcome.stats.steps, outcome.stats.final_residual
        ),
    );
    c.check(
        "I1 relative drift <= 1e-6",
        outcome.stats.i1_max_drift_rel <= 1e-6,
        format!("max drift {:.3e}", outcome.stats.i1_max_drift_rel),
    );
    c.check(
        "E_eps nondecreasing up to -1e-9 per step",
        outcome.stats.eeps_min_step_delta >= -1e-9,
        format!(
            "min step delta {:.3e} ({} decreasing steps); E_eps = {:.4} < 0 at eps = 0.05: \
             the admissibility condition B > 0 fails on this class for eps >~ 7.6e-4, and the \
             flow then decreases E_eps (see supplementary_monotone_flow_in_admissible_regime)",
            outcome.stats.eeps_min_step_delta,
            outcome.stats.monotonicity_violations,
            outcome.state.report.Eeps,
        ),
    );
    c.check(
        "min sigma1(W) > 0 throughout",
        outcome.stats.min_sigma1w_overall > 0.0,
        format!("min {:.4}", outcome.stats.min_sigma1w_overall),
    );
    c.check(
        "final E <= 1/3 + 1e-6",
        outcome.state.report.E <= 1.0 / 3.0 + 1e-6,
        format!("E = {:.12}", outcome.state.report.E),
    );
    c.finish(t0, 120.0);
}

#[test]
fn criterion_6_eps_sweep() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut c = Clauses::new("criterion 6: eps sweep");
    let cf0 = ConformalFactor::from_coefficients(Grid::new(256).unwrap(), &[0.0, 0.2]);
    let mut base = FlowConfig::new(0.05);
    base.t_max = 600.0;
    let (sweep, _) = eps_sweep(&cf0, &[0.2, 0.1, 0.05, 0.025], &base).unwrap();

    for r in &sweep.rows {
        println!(
            "[criterion 6] eps = {:<6}: {} t = {:<9.3} steps = {:<8} Eeps = {:<13.6e} E = {:.12} bound = {:.6}",
            r.eps, r.verdict, r.t_final, r.steps, r.Eeps_final, r.E_final, r.lemma6_bound
        );
    }
    c.check(
        "all eps converge",
        sweep.all_converged,
        format!("verdicts: {:?}", sweep.rows.iter().map(|r| r.verdict.clone()).collect::<Vec<_>>()),
    );
    c.check(
        "converged E_eps <= (2/(C0 eps))^eps / (3(1-eps)) with empirical C0",
        sweep.rows.iter().all(|r| r.bound_ok),
        sweep
            .rows
            .iter()
            .map(|r| format!("eps {}: {:.4e} <= {:.4}", r.eps, r.Eeps_final, r.lemma6_bound))
            .collect::<Vec<_>>()
            .join("; "),
    );
    c.check(
        "converged E values trend to a limit <= 1/3 + 1e-6",
        sweep.max_E <= 1.0 / 3.0 + 1e-6,
        format!("E trend {:?}, max {:.12}", sweep.E_trend, sweep.max_E),
    );
    c.finish(t0, 600.0);
}

#[test]
fn criterion_7_fixed_point_exactness() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut c = Clauses::new("criterion 7: fixed points");
    let mut worst_rhs = 0.0f64;
    let mut worst_move = 0.0f64;
    for constant in [0.0, 0.4, -0.7] {
        let cf0 = ConformalFactor::constant(Grid::new(256).unwrap(), constant);
        let eval = flow_rhs(&cf0, 0.05).unwrap();
        worst_rhs = worst_rhs.max(eval.rhs.iter().fold(0.0f64, |a, x| a.max(x.abs())));
        let state = FlowState::new(cf0, 0.05).unwrap();
        let next = step(&state, &FlowConfig::new(0.05)).unwrap();
        for i in 0..state.cf.u().len() {
            worst_move = worst_move.max((next.cf.u()[i] - state.cf.u()[i]).abs());
        }
    }
    c.check(
        "flow rhs sup-norm <= 1e-12 at constants",
        worst_rhs <= 1e-12,
        format!("worst {worst_rhs:.3e} over u in {{0, 0.4, -0.7}}"),
    );
    c.check(
        "one RK4 step moves no node more than 1e-12",
        worst_move <= 1e-12,
        format!("worst move {worst_move:.3e}"),
    );
    c.finish(t0, 5.0);
}

#[test]
fn criterion_8_coefficient_limits() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut c = Clauses::new("criterion 8: coefficient limits");
    let cf0 = ConformalFactor::from_coefficients(Grid::new(256).unwrap(), &[0.0, 0.2]);
    let eps_list = [1e-2, 1e-3, 1e-4];
    let rows = coefficient_limits(&cf0, &eps_list).unwrap();
    for r in &rows {
        println!(
            "[criterion 8] eps = {:<7}: |nu1-3r2| = {:<11.4e} |mu-2s| = {:<11.4e} |nu2| = {:<11.4e} in_C1eps = {}",
            r.eps, r.dev_nu1, r.dev_mu, r.abs_nu2, r.in_C1eps
        );
    }
    for (label, devs) in [
        ("nu1 -> 3 r2", rows.iter().map(|r| r.dev_nu1).collect::<Vec<_>>()),
        ("mu -> 2 s", rows.iter().map(|r| r.dev_mu).collect::<Vec<_>>()),
        ("nu2 -> 0", rows.iter().map(|r| r.abs_nu2).collect::<Vec<_>>()),
    ] {
        let r1 = devs[0] / devs[1];
        let r2 = devs[1] / devs[2];
        let pass = (5.0..20.0).contains(&r1) && (5.0..20.0).contains(&r2);
        let membership_note = if rows.iter().any(|r| !r.in_C1eps) {
            "; B changes sign across this eps range on the unit round class \
             (threshold ~7.6e-4), so the asymptotic linear rate cannot show here \
             (see supplementary_coefficient_limits_in_admissible_regime)"
        } else {
            ""
        };
        c.check(
            &format!("{label} linear rate across {{1e-2, 1e-3, 1e-4}}"),
            pass,
            format!("deviations {devs:?}, successive ratios {r1:.2}, {r2:.2}{membership_note}"),
        );
    }

    // Bound nu1/mu <= 1/(eps I1^{2-eps}) on every audited sample lying in
    // C_{1,eps} — the hypothesis of the inequality.
    let mut detail = Vec::new();
    let mut all_ok = true;
    for &eps in &eps_list {
        let params = AuditParams { eps, n_samples: 100, ..Default::default() };
        let rep = audit(&params).unwrap();
        let members = rep.samples.iter().filter(|s| s.in_C1eps).count();
        let violations =
            rep.samples.iter().filter(|s| s.lemma3i_ok == Some(false)).count();
        all_ok &= violations == 0;
        detail.push(format!(
            "eps {eps}: {members}/100 admissible, {violations} violations"
        ));
    }
    c.check(
        "nu1/mu <= 1/(eps I1^(2-eps)) on every admissible audited sample",
        all_ok,
        detail.join("; "),
    );
    c.finish(t0, 120.0);
}

/// Companion to criterion 5: in the admissible regime (ε below the
/// ~7.6e-4 threshold of this class) ℰ_ε is positive and the flow increases
/// it monotonically, with a nonnegative closed-form derivative that matches
/// the numeric difference quotient.
#[test]
fn supplementary_monotone_flow_in_admissible_regime() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut c = Clauses::new("supplementary: monotone flow at eps = 5e-4");
    let cf0 = ConformalFactor::from_coefficients(Grid::new(256).unwrap(), &[0.0, 0.2]);
    let mut config = FlowConfig::new(5e-4);
    config.t_max = 0.5;
    let outcome = run(cf0, &config).unwrap();

    c.check(
        "state stays admissible (in C_1eps)",
        outcome.state.report.in_C1eps,
        format!("B-dependent E_eps = {:.6e}", outcome.state.report.Eeps),
    );
    c.check(
        "E_eps positive",
        outcome.state.report.Eeps > 0.0,
        format!("{:.6e}", outcome.state.report.Eeps),
    );
    c.check(
        "E_eps nondecreasing per step",
        outcome.stats.eeps_min_step_delta >= -1e-12,
        format!("min step delta {:.3e} over {} steps", outcome.stats.eeps_min_step_delta, outcome.stats.steps),
    );
    c.check(
        "closed-form dE_eps/dt >= 0 on every recorded row",
        outcome.series.rows().iter().all(|r| r.dEeps_dt_formula >= 0.0),
        format!("{} rows", outcome.series.rows().len()),
    );
    let h = PI / 256.0;
    let mut worst = 0.0f64;
    for r in outcome.series.rows().iter().skip(1) {
        let gap = (r.dEeps_dt_numeric - r.dEeps_dt_formula).abs();
        let allowed = 0.05 * (r.dt + h * h) * (outcome.state.report.Eeps.abs() + 1.0);
        worst = worst.max(gap / allowed);
    }
    c.check(
        "numeric derivative matches formula within C (dt + h^2) scale",
        worst <= 1.0,
        format!("worst gap / allowance = {worst:.3}"),
    );
    c.finish(t0, 60.0);
}

/// Companion to criterion 8: with all three ε below the admissibility
/// threshold the deviations decay linearly (successive ratios ≈ the ε
/// ratios).
#[test]
fn supplementary_coefficient_limits_in_admissible_regime() {
    let _guard = serial();
    let t0 = Instant::now();
    let mut c = Clauses::new("supplementary: coefficient limits below threshold");
    let cf0 = ConformalFactor::from_coefficients(Grid::new(256).unwrap(), &[0.0, 0.2]);
    let rows = coefficient_limits(&cf0, &[1e-4, 5e-5, 2.5e-5]).unwrap();
    c.check(
        "all eps admissible",
        rows.iter().all(|r| r.in_C1eps),
        format!("{:?}", rows.iter().map(|r| r.in_C1eps).collect::<Vec<_>>()),
    );
    for (label, devs) in [
        ("nu1 -> 3 r2", rows.iter().map(|r| r.dev_nu1).collect::<Vec<_>>()),
        ("mu -> 2 s", rows.iter().map(|r| r.dev_mu).collect::<Vec<_>>()),
        ("nu2 -> 0", rows.iter().map(|r| r.abs_nu2).collect::<Vec<_>>()),
    ] {
        let r1 = devs[0] / devs[1];
        let r2 = devs[1] / devs[2];
        c.check(
            &format!("{label} halves with eps"),
            (1.6..2.6).contains(&r1) && (1.6..2.6).contains(&r2),
            format!("deviations {devs:?}, ratios {r1:.2}, {r2:.2}"),
        );
    }
    c.finish(t0, 10.0);
}
