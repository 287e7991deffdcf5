//! Subcommands. Each writes its CSV artifacts plus `manifest.txt` into the
//! output directory and returns `key=value` report lines.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use clap::ValueEnum;

use radinv_core::analysis::{
    admissible_samples, choose_beta, manufactured_elliptic, manufactured_parabolic, rate_study, select_alpha,
    select_alpha_with, stability_ratio, vsc_constant, AlphaRule, RateStudyResult, Scenario, StabilityMode,
};
use radinv_core::elliptic::EllipticProblem;
use radinv_core::grid::norm;
use radinv_core::inverse::{make_measurement, minimize, DataMode, ForwardModel, System, TikhonovConfig};
use radinv_core::parabolic::{ParabolicProblem, TimeSeries};
use radinv_core::{BoundaryValues, NormKind, ScalarField};

use crate::config::{extend_to_boundary, ExperimentConfig, ScenarioKind};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Command {
    /// Solve the forward problem and write the state.
    Forward,
    /// Reconstruct q from one synthetic measurement.
    Invert,
    /// Sweep the noise level and fit convergence slopes.
    Rates,
    /// Estimate the source-condition constant on admissible samples.
    VscCheck,
    /// Evaluate stability ratios on admissible samples.
    StabilityCheck,
    /// Write the spectral coefficients of q_dagger − q_star.
    SpectralInfo,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Forward => "forward",
            Command::Invert => "invert",
            Command::Rates => "rates",
            Command::VscCheck => "vsc-check",
            Command::StabilityCheck => "stability-check",
            Command::SpectralInfo => "spectral-info",
        }
    }
}

pub type Report = Vec<(String, String)>;

fn push(report: &mut Report, key: &str, value: impl ToString) {
    report.push((key.to_string(), value.to_string()));
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn write_field(dir: &Path, name: &str, field: &ScalarField) -> Result<()> {
    let mut w = create(dir, name)?;
    field.write_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn write_manifest(dir: &Path, command: Command, config: &ExperimentConfig, report: &Report) -> Result<()> {
    let mut w = create(dir, "manifest.txt")?;
    writeln!(w, "command={}", command.name())?;
    writeln!(w, "seed={}", config.seed)?;
    writeln!(w, "radinv_version={}", env!("CARGO_PKG_VERSION"))?;
    writeln!(w, "core_version={}", radinv_core::VERSION)?;
    for (k, v) in config.echo() {
        writeln!(w, "config.{k}={v}")?;
    }
    for (k, v) in report {
        writeln!(w, "result.{k}={v}")?;
    }
    w.flush()?;
    Ok(())
}

/// Runs `command` and writes its artifacts into `out`.
pub fn run(command: Command, config: &ExperimentConfig, out: &Path) -> Result<Report> {
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let report = dispatch(command, config, out).with_context(|| format!("{} failed", command.name()))?;
    write_manifest(out, command, config, &report)?;
    Ok(report)
}

fn dispatch(command: Command, config: &ExperimentConfig, out: &Path) -> Result<Report> {
    if config.scenario == ScenarioKind::Manufactured {
        return match command {
            Command::Forward => forward_manufactured(config, out),
            other => bail!(
                "the manufactured scenario only supports `forward`, not `{}`",
                other.name()
            ),
        };
    }
    match config.system {
        System::Elliptic => with_scenario(command, config, &elliptic_scenario(config)?, out),
        System::Parabolic => with_scenario(command, config, &parabolic_scenario(config)?, out),
    }
}

fn with_scenario<M: ForwardModel>(
    command: Command,
    config: &ExperimentConfig,
    scenario: &Scenario<M>,
    out: &Path,
) -> Result<Report> {
    match command {
        Command::Forward => forward(config, scenario, out),
        Command::Invert => invert(config, scenario, out),
        Command::Rates => rates(config, scenario, out),
        Command::VscCheck => vsc_check(config, scenario, out),
        Command::StabilityCheck => stability_check(config, scenario, out),
        Command::SpectralInfo => spectral_info(scenario, out),
    }
}

fn conductivity(config: &ExperimentConfig) -> Result<ScalarField> {
    match &config.fields.conductivity {
        Some(a) => extend_to_boundary(a),
        None => Ok(config.preset.conductivity_field(&config.grid)),
    }
}

fn source(config: &ExperimentConfig) -> ScalarField {
    config
        .fields
        .source
        .clone()
        .unwrap_or_else(|| ScalarField::constant(&config.grid, config.preset.source))
}

fn truth_and_prior(config: &ExperimentConfig) -> Result<(ScalarField, ScalarField)> {
    let q_dagger = match &config.fields.q_dagger {
        Some(q) => q.clone(),
        None => config.preset.q_dagger(&config.grid, config.kappa)?,
    };
    let q_star = config
        .fields
        .q_star
        .clone()
        .unwrap_or_else(|| config.preset.q_star(&config.grid));
    Ok((q_dagger, q_star))
}

pub fn elliptic_scenario(config: &ExperimentConfig) -> Result<Scenario<EllipticProblem>> {
    let grid = &config.grid;
    let problem = EllipticProblem::new(
        conductivity(config)?,
        source(config),
        BoundaryValues::constant(grid, config.preset.boundary),
    )?;
    let (q_dagger, q_star) = truth_and_prior(config)?;
    Ok(Scenario::new(problem, config.admissible_set(), config.kappa, q_dagger, q_star)?)
}

pub fn parabolic_scenario(config: &ExperimentConfig) -> Result<Scenario<ParabolicProblem>> {
    let grid = &config.grid;
    let time = config.time.expect("parabolic configs carry time settings");
    let g = BoundaryValues::constant(grid, config.preset.boundary);
    let u0 = config
        .fields
        .initial_state
        .clone()
        .unwrap_or_else(|| ScalarField::constant(grid, config.preset.boundary));
    let problem = ParabolicProblem::new(
        conductivity(config)?,
        TimeSeries::Constant(source(config)),
        TimeSeries::Constant(g.clone()),
        u0.with_boundary(g)?,
        time.t_final,
        time.nt,
    )?
    .with_window(time.window.0, time.window.1)?;
    if !problem.is_compatible() {
        eprintln!(
            "warning: initial state and boundary data disagree at the boundary by {:.3e}",
            problem.compatibility_defect()
        );
    }
    let (q_dagger, q_star) = truth_and_prior(config)?;
    Ok(Scenario::new(problem, config.admissible_set(), config.kappa, q_dagger, q_star)?)
}

fn forward_manufactured(config: &ExperimentConfig, out: &Path) -> Result<Report> {
    let n = config.grid.n();
    let (state, exact) = match config.system {
        System::Elliptic => {
            let (p, q, exact) = manufactured_elliptic(n)?;
            (p.solve(&q)?, exact)
        }
        System::Parabolic => {
            let time = config.time.expect("parabolic configs carry time settings");
            let (p, q, exact) = manufactured_parabolic(n, time.nt, time.t_final)?;
            (p.march(&q)?.last().clone(), exact)
        }
    };
    write_field(out, "state.csv", &state)?;
    let err = &state - &exact;
    let mut report = Report::new();
    push(&mut report, "max_error", err.max_abs());
    push(&mut report, "l2_error", norm(&err, NormKind::L2));
    Ok(report)
}

fn final_state<M: ForwardModel>(scenario: &Scenario<M>, q: &ScalarField) -> Result<ScalarField> {
    // the last observed frame in value mode is the final state
    let state = scenario.model().simulate(q)?;
    let obs = scenario.model().observe(&state, DataMode::Value);
    match obs.frames.last() {
        Some(radinv_core::inverse::Frame::Nodal(u)) => Ok(u.clone()),
        _ => bail!("no observed state"),
    }
}

fn forward<M: ForwardModel>(config: &ExperimentConfig, scenario: &Scenario<M>, out: &Path) -> Result<Report> {
    let state = final_state(scenario, scenario.q_dagger())?;
    write_field(out, "state.csv", &state)?;
    write_field(out, "q_dagger.csv", scenario.q_dagger())?;
    let mut report = Report::new();
    push(&mut report, "system", config.system);
    push(&mut report, "c0", scenario.c0());
    push(&mut report, "state_min", state.min());
    push(&mut report, "state_max", state.max());
    Ok(report)
}

fn alpha_for(config: &ExperimentConfig, mode: DataMode) -> Result<f64> {
    match config.alpha {
        Some(a) => Ok(a),
        None => Ok(select_alpha_with(config.kappa, mode, config.system, config.margin, config.alpha_rule)?),
    }
}

fn invert<M: ForwardModel>(config: &ExperimentConfig, scenario: &Scenario<M>, out: &Path) -> Result<Report> {
    let alpha = alpha_for(config, config.data_mode)?;
    let beta = match config.beta {
        Some(b) => b,
        None if config.delta > 0.0 => choose_beta(config.delta, alpha)?,
        None => bail!("beta: required when delta = 0"),
    };
    let model = scenario.model();
    let set = scenario.admissible_set();
    let measurement = make_measurement(model, scenario.truth(), config.data_mode, config.delta, config.seed)?;
    let tikhonov = TikhonovConfig::new(beta, scenario.q_star().clone(), set)?.with_optimizer(config.optimizer);
    let result = minimize(model, &measurement, &tikhonov, set, scenario.q_star())?;
    write_field(out, "q_rec.csv", &result.q)?;
    let mut w = create(out, "history.csv")?;
    result.write_history_csv(&mut w)?;
    w.flush()?;

    let gap = 0.5 * norm(&(&result.q - scenario.q_star()), NormKind::L2).powi(2) - scenario.prior_gap();
    let bound = config.delta * config.delta / (2.0 * beta);
    let mut report = Report::new();
    push(&mut report, "alpha", alpha);
    push(&mut report, "beta", beta);
    push(&mut report, "delta", config.delta);
    push(&mut report, "iterations", result.iterations);
    push(&mut report, "stop_reason", result.stop_reason);
    push(&mut report, "objective", result.objective);
    push(&mut report, "discrepancy", result.discrepancy());
    push(&mut report, "err_q_l2", norm(&(&result.q - scenario.q_dagger()), NormKind::L2));
    push(&mut report, "comparison_lhs", gap);
    push(&mut report, "comparison_rhs", bound);
    Ok(report)
}

fn rates<M: ForwardModel>(config: &ExperimentConfig, scenario: &Scenario<M>, out: &Path) -> Result<Report> {
    let alpha = alpha_for(config, config.data_mode)?;
    let study = rate_study(scenario, config.data_mode, &config.deltas, alpha, config.seed, config.optimizer)?;
    write_rates(&study, out)?;
    let mut report = Report::new();
    push(&mut report, "alpha", alpha);
    push(&mut report, "kappa", config.kappa);
    if let Some(f) = study.q_fit {
        push(&mut report, "q_slope", f.slope);
    }
    if let Some(f) = study.state_fit {
        push(&mut report, "state_slope", f.slope);
    }
    push(&mut report, "excluded", study.excluded);
    push(&mut report, "inconclusive", study.inconclusive);
    push(
        &mut report,
        "comparison_holds",
        study.rows.iter().all(|r| r.comparison.holds),
    );
    Ok(report)
}

fn write_rates(study: &RateStudyResult, out: &Path) -> Result<()> {
    let mut w = create(out, "rates.csv")?;
    study.write_rows_csv(&mut w)?;
    w.flush()?;
    let mut w = create(out, "rates_summary.csv")?;
    study.write_summary_csv(&mut w)?;
    w.flush()?;
    Ok(())
}

fn vsc_check<M: ForwardModel>(config: &ExperimentConfig, scenario: &Scenario<M>, out: &Path) -> Result<Report> {
    let samples = admissible_samples(scenario, config.samples, config.seed)?;
    let mode = config.data_mode;
    let mut rules = vec![AlphaRule::Standard];
    if config.system == System::Parabolic {
        rules.push(AlphaRule::Alternative);
    }
    let mut w = create(out, "vsc.csv")?;
    writeln!(w, "kappa,alpha_rule,alpha,constant,argmax")?;
    let mut report = Report::new();
    for rule in rules {
        let alpha = match config.alpha {
            Some(a) => a,
            None => select_alpha_with(config.kappa, mode, config.system, config.margin, rule)?,
        };
        let est = vsc_constant(&samples, scenario, alpha, mode)?;
        let argmax = est.argmax.map_or_else(|| "none".to_string(), |i| i.to_string());
        writeln!(w, "{},{rule},{alpha},{},{argmax}", config.kappa, est.constant)?;
        push(&mut report, &format!("alpha_{rule}"), alpha);
        push(&mut report, &format!("constant_{rule}"), est.constant);
    }
    w.flush()?;
    push(&mut report, "elliptic_alpha", select_alpha(config.kappa, mode, System::Elliptic, config.margin)?);
    push(&mut report, "source_size", scenario.source_size()?);
    Ok(report)
}

fn stability_check<M: ForwardModel>(
    config: &ExperimentConfig,
    scenario: &Scenario<M>,
    out: &Path,
) -> Result<Report> {
    let samples = admissible_samples(scenario, config.samples, config.seed)?;
    let modes: Vec<StabilityMode> = StabilityMode::ALL
        .into_iter()
        .filter(|m| m.system() == config.system)
        .collect();
    let mut w = create(out, "stability.csv")?;
    writeln!(w, "sample,mode,ratio")?;
    let mut report = Report::new();
    for mode in modes {
        let mut worst: f64 = 0.0;
        for (i, q) in samples.iter().enumerate() {
            let ratio = stability_ratio(q, scenario, config.epsilon, mode)?;
            writeln!(w, "{i},{mode},{ratio}")?;
            worst = worst.max(ratio);
        }
        push(&mut report, &format!("max_{mode}"), worst);
    }
    w.flush()?;
    Ok(report)
}

fn spectral_info<M: ForwardModel>(scenario: &Scenario<M>, out: &Path) -> Result<Report> {
    let basis = scenario.basis();
    let coefficients = basis.analyze(&(scenario.q_dagger() - scenario.q_star()))?;
    let mut w = create(out, "spectral.csv")?;
    writeln!(w, "k,l,mu,coefficient")?;
    for rank in 0..scenario.grid().len() {
        let (k, l) = basis.mode(rank);
        writeln!(w, "{k},{l},{},{}", basis.eigenvalue(k, l), coefficients.get(k, l))?;
    }
    w.flush()?;
    let mut report = Report::new();
    push(&mut report, "modes", scenario.grid().len());
    push(&mut report, "mu_min", basis.mu_min());
    push(&mut report, "mu_max", basis.mu_max());
    push(&mut report, "source_size", scenario.source_size()?);
    Ok(report)
}
