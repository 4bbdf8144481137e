//! One function per subcommand. Each returns the report lines, an optional
//! CSV table and, for checks, the reason it failed.

use siggame_core::cheaptalk::{self, CheapTalkError, QuantizerDecoder, QuantizerEncoder, QuantizerPolicy, SolveOptions, SolveOutcome};
use siggame_core::montecarlo::{self, CostEstimate, McOptions, SimError};
use siggame_core::nash::{self, AffinePolicyProfile, IterationOptions, NashError, Regime};
use siggame_core::policy::{ConstantDecoder, ZeroEncoder};
use siggame_core::selftest;
use siggame_core::stackelberg::scalar::{self, PowerOptions};
use siggame_core::stackelberg::vector::{self, DpOptions, ZetaRule};
use siggame_core::stackelberg::StackelbergError;
use siggame_core::{Decoder, Encoder, Execution, GameSpec};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::output::{num, nums, Table};

#[derive(Debug, Error)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Input(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CommandError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CommandError::Config(_) | CommandError::Input(_) => 2,
            CommandError::NoConvergence(_) => 3,
            CommandError::Verification(_) => 4,
        }
    }
}

impl From<CheapTalkError> for CommandError {
    fn from(e: CheapTalkError) -> Self {
        match e {
            CheapTalkError::Verification { .. } => CommandError::Verification(e.to_string()),
            other => CommandError::Input(other.to_string()),
        }
    }
}

impl From<NashError> for CommandError {
    fn from(e: NashError) -> Self {
        match e {
            NashError::Diverged { .. } | NashError::Singular { .. } | NashError::UnboundedBelow { .. } => {
                CommandError::NoConvergence(e.to_string())
            }
            other => CommandError::Input(other.to_string()),
        }
    }
}

impl From<StackelbergError> for CommandError {
    fn from(e: StackelbergError) -> Self {
        match e {
            StackelbergError::NoConvergence { .. } => CommandError::NoConvergence(e.to_string()),
            other => CommandError::Input(other.to_string()),
        }
    }
}

impl From<SimError> for CommandError {
    fn from(e: SimError) -> Self {
        CommandError::Input(e.to_string())
    }
}

#[derive(Debug, Default)]
pub struct Outcome {
    pub report: Vec<String>,
    pub table: Option<Table>,
    /// Set when a check ran to completion and failed.
    pub failure: Option<String>,
}

impl Outcome {
    fn line(&mut self, key: &str, value: impl AsRef<str>) {
        self.report.push(format!("{key} = {}", value.as_ref()));
    }
}

fn execution(cfg: &RunConfig) -> Result<Execution, CommandError> {
    match cfg.solver.execution.as_str() {
        "parallel" => Ok(Execution::Parallel),
        "sequential" => Ok(Execution::Sequential),
        other => Err(ConfigError::Invalid(format!("unknown execution `{other}`")).into()),
    }
}

fn solve_options(cfg: &RunConfig) -> SolveOptions {
    SolveOptions {
        tol: cfg.solver.tol,
        max_iters: cfg.solver.max_iters,
        certificate_tol: cfg.solver.certificate_tol,
    }
}

fn power_options(cfg: &RunConfig) -> PowerOptions {
    PowerOptions {
        p_max: cfg.solver.p_max,
        grad_tol: cfg.solver.grad_tol,
        max_iters: cfg.solver.max_iters.min(100_000),
    }
}

fn dp_options(cfg: &RunConfig) -> Result<DpOptions, CommandError> {
    let rule = match cfg.solver.dp_rule.as_str() {
        "penalized" => ZetaRule::Penalized,
        "unit_budget" => ZetaRule::UnitBudget,
        other => return Err(ConfigError::Invalid(format!("unknown dp_rule `{other}`")).into()),
    };
    Ok(DpOptions {
        rule,
        tol: cfg.solver.dp_tol,
        max_sweeps: cfg.solver.max_sweeps,
        ..DpOptions::default()
    })
}

fn nash_options(cfg: &RunConfig) -> IterationOptions {
    IterationOptions {
        max_iters: cfg.solver.max_iters.min(1_000_000),
        tol: cfg.solver.tol,
        damping: cfg.solver.damping,
    }
}

fn mc_options(cfg: &RunConfig) -> Result<McOptions, CommandError> {
    Ok(McOptions {
        chunks: cfg.simulate.chunks,
        execution: execution(cfg)?,
        ..McOptions::new(cfg.simulate.samples, cfg.simulate.seed)
    })
}

fn quantizer_rows(table: &mut Table, stage: Option<usize>, policy: &QuantizerPolicy) {
    for (i, &a) in policy.boundaries().iter().enumerate() {
        let mut row = Vec::with_capacity(4);
        if let Some(k) = stage {
            row.push(k.to_string());
        }
        row.extend([num(a), num(policy.actions()[i]), num(policy.actions()[i + 1])]);
        table.push(row);
    }
}

pub fn cheaptalk_solve(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let spec = cfg.spec()?;
    if spec.is_signaling() {
        return Err(ConfigError::Invalid("cheap talk needs a game without a channel".into()).into());
    }
    let source = cfg.scalar_source()?;
    let b = cfg.scalar_bias()?;
    let opts = solve_options(cfg);
    let mut out = Outcome::default();
    if spec.horizon > 1 {
        let eq = cheaptalk::solve_repeated_iid(&source, b, spec.horizon, cfg.cheaptalk.bins, spec.discount, &opts)?;
        let mut table = Table::new(&["stage", "boundary", "action_left", "action_right"]);
        for (k, p) in eq.stages.iter().enumerate() {
            quantizer_rows(&mut table, Some(k), p);
        }
        out.line("bins", eq.stages[0].bins().to_string());
        out.line("boundaries", nums(eq.stages[0].boundaries()));
        out.line("actions", nums(eq.stages[0].actions()));
        out.line("stage_cost_classes", eq.classes.len().to_string());
        out.line("J_e", num(eq.j_e));
        out.line("J_d", num(eq.j_d));
        out.table = Some(table);
        return Ok(out);
    }
    let bins = match cfg.cheaptalk.bins {
        Some(k) => k,
        None => cheaptalk::max_bins(&source, b, &opts)?,
    };
    let mut table = Table::new(&["boundary", "action_left", "action_right"]);
    if cfg.solver.starts > 1 {
        let found = cheaptalk::solve_multistart(&source, b, bins, cfg.solver.starts, cfg.solver.seed, &opts, execution(cfg)?)?;
        if found.is_empty() {
            return Err(CommandError::NoConvergence(format!("no {bins}-bin equilibrium from {} starts", cfg.solver.starts)));
        }
        let mut table = Table::new(&["equilibrium", "boundary", "action_left", "action_right"]);
        for (i, p) in found.iter().enumerate() {
            quantizer_rows(&mut table, Some(i), p);
        }
        out.line("bins", bins.to_string());
        out.line("equilibria", found.len().to_string());
        out.table = Some(table);
        return Ok(out);
    }
    match cheaptalk::solve_quantized(&source, b, bins, &opts)? {
        SolveOutcome::Found {
            policy,
            certificate,
            iterations,
        } => {
            out.line("bins", bins.to_string());
            out.line("boundaries", nums(policy.boundaries()));
            out.line("actions", nums(policy.actions()));
            out.line("min_gap", num(certificate.min_gap));
            out.line("J_e", num(certificate.j_e));
            out.line("J_d", num(certificate.j_d));
            out.line("iterations", iterations.to_string());
            quantizer_rows(&mut table, None, &policy);
            out.table = Some(table);
            Ok(out)
        }
        SolveOutcome::NoSolution(c) => Err(CommandError::NoConvergence(format!(
            "no {bins}-bin equilibrium: {} after {} iterations",
            c.reason, c.iterations
        ))),
    }
}

pub fn cheaptalk_verify(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let source = cfg.scalar_source()?;
    let b = cfg.scalar_bias()?;
    let policy = QuantizerPolicy::new(cfg.cheaptalk.boundaries.clone(), cfg.cheaptalk.actions.clone())?;
    let cert = cheaptalk::verify_equilibrium(&policy, &source, b, cfg.solver.certificate_tol)?;
    let mut out = Outcome::default();
    let mut table = Table::new(&["quantity", "value"]);
    let rows = [
        ("centroid_residual", num(cert.centroid_residual)),
        ("indifference_residual", num(cert.indifference_residual)),
        ("min_gap", num(cert.min_gap)),
        ("separation_ok", cert.separation_ok.to_string()),
        ("J_e", num(cert.j_e)),
        ("J_d", num(cert.j_d)),
        ("passes", cert.passes().to_string()),
    ];
    for (k, v) in rows {
        out.line(k, &v);
        table.push(vec![k.into(), v]);
    }
    out.table = Some(table);
    if !cert.passes() {
        out.failure = Some("policy is not an equilibrium at the given tolerance".into());
    }
    Ok(out)
}

fn comparison_rows(out: &mut Outcome, table: &mut Table, est: &CostEstimate, theory: Option<(f64, f64)>) {
    let cmp = theory.map(|(je, jd)| montecarlo::compare_to_theory(est, je, jd));
    let rows = [
        ("J_e", est.mean_je, est.se_je, theory.map(|t| t.0), cmp.map(|c| c.z_je)),
        ("J_d", est.mean_jd, est.se_jd, theory.map(|t| t.1), cmp.map(|c| c.z_jd)),
    ];
    for (name, mean, se, th, z) in rows {
        let th_s = th.map_or(String::new(), num);
        let z_s = z.map_or(String::new(), num);
        out.line(&format!("{name}_mean"), num(mean));
        out.line(&format!("{name}_se"), num(se));
        if let (Some(t), Some(z)) = (th, z) {
            out.line(&format!("{name}_theory"), num(t));
            out.line(&format!("{name}_z"), num(z));
        }
        table.push(vec![name.into(), num(mean), num(se), th_s, z_s]);
    }
    if let Some(c) = cmp {
        out.line("within_3se", c.passed().to_string());
        if !c.passed() {
            out.failure = Some(format!("estimate outside the 3 SE band (z_je {}, z_jd {})", num(c.z_je), num(c.z_jd)));
        }
    }
}

pub fn cheaptalk_stackelberg(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let spec = cfg.spec()?;
    let sol = cheaptalk::stackelberg_cheaptalk(&spec)?;
    let est = montecarlo::estimate(&spec, &sol.encoder, &sol.decoder, &mc_options(cfg)?)?;
    let mut out = Outcome::default();
    out.line("policy", "fully revealing");
    let mut table = Table::new(&["quantity", "mean", "se", "theory", "z"]);
    comparison_rows(&mut out, &mut table, &est, Some((sol.j_e, sol.j_d)));
    out.table = Some(table);
    Ok(out)
}

pub fn nash_classify2(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let spec = cfg.spec()?;
    let r = nash::classify_two_stage(&spec)?;
    let regime = match r.regime {
        Regime::NoInformativeAffine => "no_informative_affine",
        Regime::SecondMessageUnused => "second_message_unused",
        Regime::ConditionallyInformative => "conditionally_informative",
    };
    let informative = match r.informative {
        Some(true) => "true",
        Some(false) => "false",
        None => "undetermined",
    };
    let (lo, hi) = r.thresholds.window.map_or((String::new(), String::new()), |(a, b)| (num(a), num(b)));
    let mut out = Outcome::default();
    out.line("regime", regime);
    out.line("informative", informative);
    out.line("q0", num(r.thresholds.q0));
    out.line("q1", num(r.thresholds.q1));
    out.line("sigma2_M1", num(r.thresholds.sigma_m1));
    match r.thresholds.window {
        Some((a, b)) => out.line("lambda_window", format!("({}, {})", num(a), num(b))),
        None => out.line("lambda_window", "empty (sigma2_M1 < 4 b^2)"),
    }
    out.line("at_boundary", r.at_boundary.to_string());
    let mut table = Table::new(&[
        "lambda",
        "q0",
        "q1",
        "window_low",
        "window_high",
        "regime",
        "informative",
        "at_boundary",
    ]);
    table.push(vec![
        num(spec.lambda),
        num(r.thresholds.q0),
        num(r.thresholds.q1),
        lo,
        hi,
        regime.into(),
        informative.into(),
        r.at_boundary.to_string(),
    ]);
    out.table = Some(table);
    Ok(out)
}

pub fn nash_iterate(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let spec = cfg.spec()?;
    let opts = nash_options(cfg);
    let results = if cfg.solver.starts > 1 {
        nash::multistart_iteration(&spec, cfg.solver.starts, cfg.solver.seed, &opts, execution(cfg)?)?
    } else {
        let n = spec.source_dim();
        vec![nash::best_response_iteration(&spec, &AffinePolicyProfile::memoryless(spec.horizon, n, 1.0), &opts)]
    };
    let mut out = Outcome::default();
    let mut table = Table::new(&["start", "converged", "iterations", "J_e", "J_d", "informative", "max_encoder_slope"]);
    let mut first_error = None;
    let mut converged = 0;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(sol) => {
                converged += 1;
                if converged == 1 {
                    out.line("J_e", num(sol.j_e));
                    out.line("J_d", num(sol.j_d));
                    out.line("informative", sol.informative.to_string());
                    out.line("iterations", sol.iterations.to_string());
                    out.line("decoder_residual", num(sol.decoder_residual));
                    out.line("encoder_residual", num(sol.encoder_residual));
                }
                table.push(vec![
                    i.to_string(),
                    "true".into(),
                    sol.iterations.to_string(),
                    num(sol.j_e),
                    num(sol.j_d),
                    sol.informative.to_string(),
                    num(sol.profile.max_encoder_slope()),
                ]);
            }
            Err(e @ NashError::Diverged { .. }) => {
                table.push(vec![i.to_string(), "false".into(), String::new(), String::new(), String::new(), String::new(), String::new()]);
                first_error.get_or_insert(e);
            }
            Err(e) => return Err(e.into()),
        }
    }
    out.line("converged_starts", converged.to_string());
    if converged == 0 {
        return Err(first_error.map_or_else(|| CommandError::NoConvergence("no starts".into()), Into::into));
    }
    out.table = Some(table);
    Ok(out)
}

pub fn stackelberg_power(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let spec = cfg.spec()?;
    let sol = scalar::optimize_power(&spec, &power_options(cfg))?;
    let b2 = spec.bias.norm_squared();
    let mut out = Outcome::default();
    out.line("lambda_star", num(scalar::informativeness_threshold(&spec)?));
    out.line("informative", sol.informative.to_string());
    out.line("capped", sol.capped.to_string());
    out.line("J_lower", num(sol.j_lower));
    out.line("P", nums(&sol.power));
    out.line("Delta", nums(&sol.trace.delta));
    out.line("encoder_gain", nums(&sol.encoder_gains));
    out.line("decoder_gain", nums(&sol.decoder_gains));
    let mut table = Table::new(&["stage", "P", "Delta", "C_hat", "C", "cost"]);
    for k in 0..spec.horizon {
        let cost = spec.stage_weight(k) * (sol.trace.delta[k] + spec.lambda * sol.power[k] + b2);
        table.push(vec![
            k.to_string(),
            num(sol.power[k]),
            num(sol.trace.delta[k]),
            num(sol.trace.c_hat[k]),
            num(sol.trace.c[k]),
            num(cost),
        ]);
    }
    out.table = Some(table);
    Ok(out)
}

pub fn stackelberg_thresholds(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let spec = cfg.spec()?;
    let finite = scalar::informativeness_threshold(&spec)?;
    let mut out = Outcome::default();
    let mut table = Table::new(&["quantity", "value"]);
    out.line("lambda_star", num(finite));
    table.push(vec!["lambda_star".into(), num(finite)]);
    if spec.discount.is_some() {
        let text = match scalar::discounted_threshold(&spec)? {
            Some(t) => num(t),
            None => "not_applicable".into(),
        };
        out.line("lambda_star_discounted", &text);
        table.push(vec!["lambda_star_discounted".into(), text]);
    }
    out.line("informative_possible", (spec.lambda < finite).to_string());
    out.table = Some(table);
    Ok(out)
}

pub fn stackelberg_dp(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let spec = cfg.spec()?;
    let sol = vector::backward_dp(&spec, &dp_options(cfg)?)?;
    let powers = sol.powers();
    let mut out = Outcome::default();
    out.line("V_0", num(sol.value()));
    out.line("sweeps", sol.sweeps.to_string());
    for (k, st) in sol.stages.iter().enumerate() {
        out.line(&format!("K_{k} diag"), nums(st.k.diagonal().as_slice()));
    }
    out.line("P", nums(&powers));
    for w in &sol.warnings {
        out.report.push(format!("warning: {w}"));
    }
    let n = spec.source_dim();
    let mut table = Table::new(&["stage", "mode", "K_diag", "L_diag", "Sigma_tilde_diag", "zeta", "P"]);
    for (k, st) in sol.stages.iter().enumerate() {
        for i in 0..n {
            // slot of source mode i in the sorted order
            let slot = (0..n).find(|&j| st.u[(i, j)] == 1.0).unwrap_or(i);
            let zeta = if slot < st.zeta.nrows() { st.zeta[(slot, slot)] } else { 0.0 };
            table.push(vec![
                k.to_string(),
                i.to_string(),
                num(st.k[(i, i)]),
                num(st.l[(i, i)]),
                num(st.sigma_tilde[(i, i)]),
                num(zeta),
                num(powers[k]),
            ]);
        }
    }
    out.table = Some(table);
    Ok(out)
}

/// Encoder, decoder and theoretical `(J_e, J_d)` for the configured policy.
type Profile = (Box<dyn Encoder>, Box<dyn Decoder>, Option<(f64, f64)>);

fn simulated_profile(cfg: &RunConfig, spec: &GameSpec) -> Result<Profile, CommandError> {
    match cfg.simulate.policy.as_str() {
        "stackelberg_scalar" => {
            let sol = scalar::optimize_power(spec, &power_options(cfg))?;
            let p = sol.policy();
            Ok((Box::new(p.clone()), Box::new(p), Some((sol.j_lower, sol.j_d))))
        }
        "stackelberg_dp" => {
            let sol = vector::backward_dp(spec, &dp_options(cfg)?)?;
            let jd = sol
                .error_covariances()?
                .iter()
                .zip(&sol.stages)
                .map(|(e, s)| s.weight * e.trace())
                .sum();
            let p = sol.policy()?;
            Ok((Box::new(p.clone()), Box::new(p), Some((sol.value(), jd))))
        }
        "revealing" => {
            let sol = cheaptalk::stackelberg_cheaptalk(spec)?;
            Ok((Box::new(sol.encoder), Box::new(sol.decoder), Some((sol.j_e, sol.j_d))))
        }
        "babbling" => {
            let dec = ConstantDecoder::prior_mean(spec);
            let enc = ZeroEncoder {
                dim: spec.channel.as_ref().map_or(1, |c| c.dim()),
            };
            Ok((Box::new(enc), Box::new(dec), None))
        }
        "quantized" => {
            let source = cfg.scalar_source()?;
            let b = cfg.scalar_bias()?;
            let opts = solve_options(cfg);
            let eq = cheaptalk::solve_repeated_iid(&source, b, spec.horizon, cfg.cheaptalk.bins, spec.discount, &opts)?;
            Ok((
                Box::new(QuantizerEncoder { stages: eq.stages.clone() }),
                Box::new(QuantizerDecoder { stages: eq.stages }),
                Some((eq.j_e, eq.j_d)),
            ))
        }
        "nash" => {
            let n = spec.source_dim();
            let sol = nash::best_response_iteration(
                spec,
                &AffinePolicyProfile::memoryless(spec.horizon, n, 1.0),
                &nash_options(cfg),
            )?;
            Ok((Box::new(sol.profile.clone()), Box::new(sol.profile), Some((sol.j_e, sol.j_d))))
        }
        other => Err(ConfigError::Invalid(format!("unknown simulate.policy `{other}`")).into()),
    }
}

pub fn simulate(cfg: &RunConfig) -> Result<Outcome, CommandError> {
    let spec = cfg.spec()?;
    let (enc, dec, theory) = simulated_profile(cfg, &spec)?;
    let est = montecarlo::estimate(&spec, enc.as_ref(), dec.as_ref(), &mc_options(cfg)?)?;
    let mut out = Outcome::default();
    out.line("policy", &cfg.simulate.policy);
    out.line("samples", est.samples.to_string());
    out.line("seed", est.seed.to_string());
    let mut table = Table::new(&["quantity", "mean", "se", "theory", "z"]);
    comparison_rows(&mut out, &mut table, &est, theory);
    out.table = Some(table);
    Ok(out)
}

pub fn selftest() -> Outcome {
    let checks = selftest::run_all();
    let mut out = Outcome::default();
    let mut table = Table::new(&["check", "passed", "detail"]);
    for c in &checks {
        out.line(c.name, format!("{} ({})", if c.passed { "pass" } else { "FAIL" }, c.detail));
        table.push(vec![c.name.into(), c.passed.to_string(), c.detail.clone()]);
    }
    let failed: Vec<_> = checks.iter().filter(|c| !c.passed).map(|c| c.name).collect();
    if !failed.is_empty() {
        out.failure = Some(format!("failed checks: {}", failed.join(", ")));
    }
    out.table = Some(table);
    out
}
