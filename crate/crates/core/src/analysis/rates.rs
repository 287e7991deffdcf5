use std::io::Write;

use rayon::prelude::*;

use super::{choose_beta, Scenario};
use crate::error::{invalid, Result};
use crate::grid::{norm, NormKind};
use crate::inverse::{make_measurement, minimize, DataMode, ForwardModel, OptimizerOptions, StopReason, TikhonovConfig};

/// Least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn fit_line(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return invalid("fit needs matching sample counts");
    }
    if x.len() < 2 {
        return invalid("fit needs at least two points");
    }
    let len = x.len() as f64;
    let mx = x.iter().sum::<f64>() / len;
    let my = y.iter().sum::<f64>() / len;
    let sxx: f64 = x.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = y.iter().map(|y| (y - my).powi(2)).sum();
    if sxx == 0.0 {
        return invalid("fit needs distinct abscissae");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(LinearFit { slope, intercept, r2 })
}

/// Slope of `log err` against `log δ`.
pub fn fit_log_log(deltas: &[f64], errors: &[f64]) -> Result<LinearFit> {
    if deltas.iter().chain(errors).any(|v| !(*v > 0.0)) {
        return invalid("log-log fit needs positive data");
    }
    let lx: Vec<f64> = deltas.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = errors.iter().map(|v| v.ln()).collect();
    fit_line(&lx, &ly)
}

/// Check of `½‖q_rec − q*‖² − ½‖q† − q*‖² ≤ δ²/(2β)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Relative slack of the comparison check, measured against
/// `δ²/(2β) + ½‖q† − q*‖²`.
pub const COMPARISON_SLACK: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct RateRow {
    pub delta: f64,
    pub beta: f64,
    pub err_q_l2: f64,
    pub err_state: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
    pub comparison: ComparisonCheck,
}

#[derive(Debug, Clone)]
pub struct RateStudyResult {
    pub alpha: f64,
    pub kappa: f64,
    pub mode: DataMode,
    /// Sorted by decreasing `δ`.
    pub rows: Vec<RateRow>,
    pub q_fit: Option<LinearFit>,
    pub state_fit: Option<LinearFit>,
    pub excluded: usize,
    pub inconclusive: bool,
}

impl RateStudyResult {
    pub fn all_converged(&self) -> bool {
        self.rows.iter().all(|r| r.converged)
    }

    pub fn write_rows_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "delta,beta,err_q_l2,err_state,iters,converged")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.delta, r.beta, r.err_q_l2, r.err_state, r.iterations, r.converged
            )?;
        }
        Ok(())
    }

    pub fn write_summary_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let field = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| v.to_string());
        writeln!(w, "alpha,kappa,q_slope,state_slope,q_slope_r2,state_slope_r2")?;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            self.alpha,
            self.kappa,
            field(self.q_fit.map(|f| f.slope)),
            field(self.state_fit.map(|f| f.slope)),
            field(self.q_fit.map(|f| f.r2)),
            field(self.state_fit.map(|f| f.r2)),
        )?;
        Ok(())
    }
}

/// Norm the state error is reported in: the energy seminorm for gradient
/// data, L² for value data (time-integrated over the window when the
/// state is time dependent).
pub fn state_error_norm(mode: DataMode) -> NormKind {
    match mode {
        DataMode::Gradient => NormKind::H1Semi,
        DataMode::Value => NormKind::L2,
    }
}

/// Runs one inversion per noise level with `β = δ^{2−α}`, starting from
/// `q*` with the same noise seed at every level, and fits the log-log
/// slopes of the `q` and state errors over the converged runs. Inversions
/// run in parallel; rows come back in input order.
pub fn rate_study<M: ForwardModel>(
    scenario: &Scenario<M>,
    mode: DataMode,
    deltas: &[f64],
    alpha: f64,
    seed: u64,
    optimizer: OptimizerOptions,
) -> Result<RateStudyResult> {
    if deltas.len() < 4 {
        return invalid("a rate study needs at least four noise levels");
    }
    if deltas.windows(2).any(|w| !(w[1] < w[0])) || deltas.iter().any(|d| !(*d > 0.0)) {
        return invalid("noise levels must be positive and strictly decreasing");
    }
    let model = scenario.model();
    let set = scenario.admissible_set();
    let prior_gap = scenario.prior_gap();
    let kind = state_error_norm(mode);
    let rows = deltas
        .par_iter()
        .map(|&delta| -> Result<RateRow> {
            let beta = choose_beta(delta, alpha)?;
            let measurement = make_measurement(model, scenario.truth(), mode, delta, seed)?;
            let config = TikhonovConfig::new(beta, scenario.q_star().clone(), set)?.with_optimizer(optimizer);
            let result = minimize(model, &measurement, &config, set, scenario.q_star())?;
            let state = model.simulate(&result.q)?;
            let lhs = 0.5 * norm(&(&result.q - scenario.q_star()), NormKind::L2).powi(2) - prior_gap;
            let rhs = delta * delta / (2.0 * beta);
            Ok(RateRow {
                delta,
                beta,
                err_q_l2: norm(&(&result.q - scenario.q_dagger()), NormKind::L2),
                err_state: model.state_distance(&state, scenario.truth(), kind),
                iterations: result.iterations,
                converged: result.converged,
                stop_reason: result.stop_reason,
                comparison: ComparisonCheck {
                    lhs,
                    rhs,
                    holds: lhs <= rhs + COMPARISON_SLACK * (rhs + prior_gap),
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let used: Vec<&RateRow> = rows.iter().filter(|r| r.converged).collect();
    let excluded = rows.len() - used.len();
    let ds: Vec<f64> = used.iter().map(|r| r.delta).collect();
    let fit = |errs: Vec<f64>| if used.len() >= 2 { fit_log_log(&ds, &errs).ok() } else { None };
    let q_fit = fit(used.iter().map(|r| r.err_q_l2).collect());
    let state_fit = fit(used.iter().map(|r| r.err_state).collect());
    Ok(RateStudyResult {
        alpha,
        kappa: scenario.kappa(),
        mode,
        rows,
        q_fit,
        state_fit,
        excluded,
        inconclusive: excluded >= 2,
    })
}

/// `count` noise levels spaced geometrically from `largest` down to
/// `smallest`.
pub fn geometric_deltas(largest: f64, smallest: f64, count: usize) -> Result<Vec<f64>> {
    if !(largest > smallest && smallest > 0.0) || count < 2 {
        return invalid("need largest > smallest > 0 and at least two levels");
    }
    let ratio = (smallest / largest).ln() / (count - 1) as f64;
    Ok((0..count)
        .map(|i| match i {
            0 => largest,
            i if i + 1 == count => smallest,
            i => largest * (ratio * i as f64).exp(),
        })
        .collect())
}
