//! Tikhonov reconstruction of `q` from interior data.
//!
//! The objective is `½‖B u(q) − z^δ‖² + (β/2)‖q − q*‖²_h`, where `B` observes
//! either the edge gradient or the nodal values of the state (over the
//! measurement window for the parabolic system). Its gradient is computed
//! exactly at the discrete level with one forward and one adjoint solve, and
//! the objective is minimized over the box `q_lo ≤ q ≤ q_hi` by projected
//! gradient descent with an Armijo search along the projection arc.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::elliptic::{AdjointSource, EllipticProblem};
use crate::error::{invalid, Error, Result};
use crate::grid::{self, inner_product, norm, EdgeVectorField, Grid, NormKind, ScalarField};
use crate::parabolic::{ParabolicProblem, StateTrajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum System {
    Elliptic,
    Parabolic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DataMode {
    /// Noisy gradient `∇z^δ`, misfit in the edge L² norm.
    Gradient,
    /// Noisy values `z^δ`, misfit in L².
    Value,
}

impl FromStr for System {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "elliptic" => Ok(Self::Elliptic),
            "parabolic" => Ok(Self::Parabolic),
            other => invalid(format!("unknown system `{other}` (expected elliptic or parabolic)")),
        }
    }
}

impl FromStr for DataMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gradient" => Ok(Self::Gradient),
            "value" => Ok(Self::Value),
            other => invalid(format!("unknown data mode `{other}` (expected gradient or value)")),
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Elliptic => "elliptic",
            Self::Parabolic => "parabolic",
        })
    }
}

impl fmt::Display for DataMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Gradient => "gradient",
            Self::Value => "value",
        })
    }
}

/// One observed snapshot.
#[derive(Debug, Clone, PartialEq)]
pub enum Frame {
    Edge(EdgeVectorField),
    Nodal(ScalarField),
}

impl Frame {
    fn sq_norm(&self) -> f64 {
        match self {
            Frame::Edge(e) => e.inner(e).expect("same grid"),
            Frame::Nodal(u) => inner_product(u, u).expect("same grid"),
        }
    }

    fn combine(&self, other: &Frame, f: impl Fn(f64, f64) -> f64) -> Result<Frame> {
        match (self, other) {
            (Frame::Edge(a), Frame::Edge(b)) => Ok(Frame::Edge(a.zip_with(b, f)?)),
            (Frame::Nodal(a), Frame::Nodal(b)) => Ok(Frame::Nodal(a.zip_with(b, f)?)),
            _ => invalid("cannot combine gradient and value frames"),
        }
    }

    pub fn as_adjoint_source(&self) -> AdjointSource<'_> {
        match self {
            Frame::Edge(e) => AdjointSource::Gradient(e),
            Frame::Nodal(u) => AdjointSource::Value(u),
        }
    }

    fn mode(&self) -> DataMode {
        match self {
            Frame::Edge(_) => DataMode::Gradient,
            Frame::Nodal(_) => DataMode::Value,
        }
    }
}

/// Snapshots at the given time levels with quadrature weight `weight`
/// (`1` for the elliptic system, `Δt` for the parabolic one). The norm is
/// `sqrt(weight · Σ ‖frame‖²)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Observation {
    pub frames: Vec<Frame>,
    pub levels: Vec<usize>,
    pub weight: f64,
}

impl Observation {
    pub fn norm(&self) -> f64 {
        (self.weight * self.frames.iter().map(Frame::sq_norm).sum::<f64>()).sqrt()
    }

    fn check_compatible(&self, other: &Observation) -> Result<()> {
        if self.levels != other.levels || self.frames.len() != other.frames.len() {
            return invalid("observations cover different time levels");
        }
        Ok(())
    }

    pub fn difference(&self, other: &Observation) -> Result<Observation> {
        self.check_compatible(other)?;
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| a.combine(b, |x, y| x - y))
            .collect::<Result<_>>()?;
        Ok(Observation {
            frames,
            levels: self.levels.clone(),
            weight: self.weight,
        })
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &Observation) -> Result<Observation> {
        self.check_compatible(other)?;
        let frames = self
            .frames
            .iter()
            .zip(&other.frames)
            .map(|(a, b)| a.combine(b, |x, y| x + c * y))
            .collect::<Result<_>>()?;
        Ok(Observation {
            frames,
            levels: self.levels.clone(),
            weight: self.weight,
        })
    }

    pub fn mode(&self) -> Option<DataMode> {
        self.frames.first().map(Frame::mode)
    }
}

/// A discretized forward map `q ↦ u(q)` with the observation and adjoint
/// machinery the Tikhonov functional needs.
pub trait ForwardModel: Sync {
    type State: Clone + Send + Sync;

    fn system(&self) -> System;

    fn grid(&self) -> &Grid;

    fn simulate(&self, q: &ScalarField) -> Result<Self::State>;

    fn observe(&self, state: &Self::State, mode: DataMode) -> Observation;

    /// L² gradient density of `½‖B u(q) − z‖²` at `q`, given the residual
    /// `B u(q) − z`.
    fn misfit_gradient(
        &self,
        q: &ScalarField,
        state: &Self::State,
        residual: &Observation,
    ) -> Result<ScalarField>;

    /// Distance between two states in the given spatial norm, integrated
    /// over the measurement window for time-dependent states.
    fn state_distance(&self, a: &Self::State, b: &Self::State, kind: NormKind) -> f64;

    /// `min |u|` over the nodes (and window levels) the data cover.
    fn state_floor(&self, state: &Self::State) -> f64;
}

fn observe_frame(u: &ScalarField, mode: DataMode) -> Frame {
    match mode {
        DataMode::Gradient => Frame::Edge(grid::gradient(u)),
        DataMode::Value => Frame::Nodal(u.clone().into_interior()),
    }
}

impl ForwardModel for EllipticProblem {
    type State = ScalarField;

    fn system(&self) -> System {
        System::Elliptic
    }

    fn grid(&self) -> &Grid {
        EllipticProblem::grid(self)
    }

    fn simulate(&self, q: &ScalarField) -> Result<ScalarField> {
        self.solve(q)
    }

    fn observe(&self, state: &ScalarField, mode: DataMode) -> Observation {
        Observation {
            frames: vec![observe_frame(state, mode)],
            levels: vec![0],
            weight: 1.0,
        }
    }

    fn misfit_gradient(
        &self,
        q: &ScalarField,
        state: &ScalarField,
        residual: &Observation,
    ) -> Result<ScalarField> {
        let frame = residual
            .frames
            .first()
            .ok_or_else(|| Error::InvalidArgument("empty residual".into()))?;
        let p = self.solve_adjoint(q, frame.as_adjoint_source())?;
        state.zip_with(&p, |u, p| -u * p)
    }

    fn state_distance(&self, a: &ScalarField, b: &ScalarField, kind: NormKind) -> f64 {
        norm(&(a - b), kind)
    }

    fn state_floor(&self, state: &ScalarField) -> f64 {
        state.values().iter().fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

impl ForwardModel for ParabolicProblem {
    type State = StateTrajectory;

    fn system(&self) -> System {
        System::Parabolic
    }

    fn grid(&self) -> &Grid {
        ParabolicProblem::grid(self)
    }

    fn simulate(&self, q: &ScalarField) -> Result<StateTrajectory> {
        self.march(q)
    }

    fn observe(&self, state: &StateTrajectory, mode: DataMode) -> Observation {
        let levels = self.window_levels();
        Observation {
            frames: levels.iter().map(|&m| observe_frame(state.level(m), mode)).collect(),
            levels,
            weight: self.dt(),
        }
    }

    fn misfit_gradient(
        &self,
        q: &ScalarField,
        state: &StateTrajectory,
        residual: &Observation,
    ) -> Result<ScalarField> {
        let sources: Vec<_> = residual
            .levels
            .iter()
            .zip(&residual.frames)
            .map(|(&m, f)| (m, f.as_adjoint_source()))
            .collect();
        let adjoint = self.march_adjoint(q, &sources)?;
        let dt = self.dt();
        let mut density = vec![0.0; self.grid().len()];
        for m in 0..self.steps() {
            let u = state.level(m + 1).values();
            let p = adjoint.level(m).values();
            for ((d, u), p) in density.iter_mut().zip(u).zip(p) {
                *d -= dt * u * p;
            }
        }
        ScalarField::from_values(self.grid(), density)
    }

    fn state_distance(&self, a: &StateTrajectory, b: &StateTrajectory, kind: NormKind) -> f64 {
        let dt = self.dt();
        self.window_levels()
            .into_iter()
            .map(|m| norm(&(a.level(m) - b.level(m)), kind).powi(2) * dt)
            .sum::<f64>()
            .sqrt()
    }

    fn state_floor(&self, state: &StateTrajectory) -> f64 {
        self.window_levels()
            .into_iter()
            .flat_map(|m| state.level(m).values().to_vec())
            .fold(f64::INFINITY, |m, v| m.min(v.abs()))
    }
}

/// Box constraint `q_lo ≤ q ≤ q_hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmissibleSet {
    q_lo: f64,
    q_hi: f64,
}

impl AdmissibleSet {
    pub fn new(q_lo: f64, q_hi: f64) -> Result<Self> {
        if !(0.0 < q_lo && q_lo < q_hi && q_hi.is_finite()) {
            return invalid(format!("admissible bounds need 0 < q_lo < q_hi, got [{q_lo}, {q_hi}]"));
        }
        Ok(Self { q_lo, q_hi })
    }

    pub fn lower(&self) -> f64 {
        self.q_lo
    }

    pub fn upper(&self) -> f64 {
        self.q_hi
    }

    pub fn contains(&self, q: &ScalarField) -> bool {
        q.values().iter().all(|&v| self.q_lo <= v && v <= self.q_hi)
    }

    /// Nodewise clamp into `[q_lo, q_hi]`.
    pub fn project(&self, q: &ScalarField) -> ScalarField {
        q.map(|v| v.clamp(self.q_lo, self.q_hi))
    }
}

pub fn project_admissible(q: &ScalarField, set: &AdmissibleSet) -> ScalarField {
    set.project(q)
}

#[derive(Debug, Clone)]
pub struct Measurement {
    pub system: System,
    pub mode: DataMode,
    pub data: Observation,
    pub delta: f64,
}

impl Measurement {
    /// `‖exact − data‖` in the measurement norm.
    pub fn discrepancy(&self, exact: &Observation) -> Result<f64> {
        Ok(exact.difference(&self.data)?.norm())
    }
}

fn noise_frame(template: &Frame, rng: &mut ChaCha8Rng) -> Frame {
    let mut draw = || -> f64 { StandardNormal.sample(rng) };
    match template {
        Frame::Edge(e) => {
            let mut out = EdgeVectorField::zeros(e.grid());
            out.components_mut().for_each(|c| *c = draw());
            Frame::Edge(out)
        }
        Frame::Nodal(u) => {
            let mut out = ScalarField::zeros(u.grid());
            out.values_mut().iter_mut().for_each(|c| *c = draw());
            Frame::Nodal(out)
        }
    }
}

/// Observes `truth` and adds `δ·ξ/‖ξ‖` for a seeded Gaussian field `ξ`, so
/// the discrepancy equals `delta` up to rounding.
pub fn make_measurement<M: ForwardModel>(
    model: &M,
    truth: &M::State,
    mode: DataMode,
    delta: f64,
    seed: u64,
) -> Result<Measurement> {
    if !(delta >= 0.0) || !delta.is_finite() {
        return invalid(format!("noise level must be nonnegative, got {delta}"));
    }
    let exact = model.observe(truth, mode);
    let data = if delta == 0.0 {
        exact
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Observation {
            frames: exact.frames.iter().map(|f| noise_frame(f, &mut rng)).collect(),
            levels: exact.levels.clone(),
            weight: exact.weight,
        };
        exact.axpy(delta / noise.norm(), &noise)?
    };
    Ok(Measurement {
        system: model.system(),
        mode,
        data,
        delta,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerOptions {
    pub max_iters: usize,
    /// Relative tolerance on the projected-gradient norm.
    pub grad_tol: f64,
    /// Sufficient-decrease fraction.
    pub armijo: f64,
    pub backtrack: f64,
    pub initial_step: f64,
    pub max_backtracks: usize,
}

impl Default for OptimizerOptions {
    fn default() -> Self {
        Self {
            max_iters: 500,
            grad_tol: 1e-8,
            armijo: 1e-4,
            backtrack: 0.5,
            initial_step: 1.0,
            max_backtracks: 60,
        }
    }
}

impl OptimizerOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.grad_tol > 0.0) {
            return invalid("grad_tol must be positive");
        }
        if !(0.0 < self.armijo && self.armijo < 1.0) {
            return invalid("armijo fraction must lie in (0, 1)");
        }
        if !(0.0 < self.backtrack && self.backtrack < 1.0) {
            return invalid("backtrack factor must lie in (0, 1)");
        }
        if !(self.initial_step > 0.0) {
            return invalid("initial step must be positive");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TikhonovConfig {
    pub beta: f64,
    pub q_star: ScalarField,
    pub optimizer: OptimizerOptions,
}

impl TikhonovConfig {
    pub fn new(beta: f64, q_star: ScalarField, set: &AdmissibleSet) -> Result<Self> {
        let cfg = Self {
            beta,
            q_star,
            optimizer: OptimizerOptions::default(),
        };
        cfg.validate(set)?;
        Ok(cfg)
    }

    pub fn with_optimizer(mut self, optimizer: OptimizerOptions) -> Self {
        self.optimizer = optimizer;
        self
    }

    pub fn validate(&self, set: &AdmissibleSet) -> Result<()> {
        if !(self.beta > 0.0) || !self.beta.is_finite() {
            return invalid(format!("beta must be positive, got {}", self.beta));
        }
        if !set.contains(&self.q_star) {
            return invalid("prior q_star lies outside the admissible set");
        }
        self.optimizer.validate()
    }
}

/// Objective value with the pieces it was assembled from.
#[derive(Debug, Clone)]
pub struct Evaluation<S> {
    pub state: S,
    pub residual: Observation,
    pub misfit: f64,
    pub penalty: f64,
}

impl<S> Evaluation<S> {
    pub fn objective(&self) -> f64 {
        self.misfit + self.penalty
    }
}

pub fn evaluate<M: ForwardModel>(
    model: &M,
    q: &ScalarField,
    measurement: &Measurement,
    config: &TikhonovConfig,
) -> Result<Evaluation<M::State>> {
    let state = model.simulate(q)?;
    let residual = model.observe(&state, measurement.mode).difference(&measurement.data)?;
    let misfit = 0.5 * residual.norm().powi(2);
    let dq = q - &config.q_star;
    let penalty = 0.5 * config.beta * inner_product(&dq, &dq)?;
    Ok(Evaluation {
        state,
        residual,
        misfit,
        penalty,
    })
}

pub fn objective<M: ForwardModel>(
    model: &M,
    q: &ScalarField,
    measurement: &Measurement,
    config: &TikhonovConfig,
) -> Result<f64> {
    Ok(evaluate(model, q, measurement, config)?.objective())
}

fn gradient_at<M: ForwardModel>(
    model: &M,
    q: &ScalarField,
    eval: &Evaluation<M::State>,
    config: &TikhonovConfig,
) -> Result<ScalarField> {
    let beta = config.beta;
    let mut g = if eval.misfit == 0.0 {
        ScalarField::zeros(q.grid())
    } else {
        model.misfit_gradient(q, &eval.state, &eval.residual)?
    };
    for ((g, &q), &qs) in g.values_mut().iter_mut().zip(q.values()).zip(config.q_star.values()) {
        *g += beta * (q - qs);
    }
    Ok(g)
}

/// Exact gradient of the discrete objective in `(·,·)_h`: nodal density
/// `−u p + β(q − q*)` (summed over time steps for the parabolic system).
pub fn gradient<M: ForwardModel>(
    model: &M,
    q: &ScalarField,
    measurement: &Measurement,
    config: &TikhonovConfig,
) -> Result<ScalarField> {
    let eval = evaluate(model, q, measurement, config)?;
    gradient_at(model, q, &eval, config)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    LineSearchFailure,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Converged => "converged",
            StopReason::MaxIterations => "max-iterations",
            StopReason::LineSearchFailure => "line-search failure",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub objective: f64,
    pub misfit: f64,
    pub proj_grad_norm: f64,
}

#[derive(Debug, Clone)]
pub struct InversionResult {
    pub q: ScalarField,
    pub history: Vec<IterationRecord>,
    pub objective: f64,
    pub misfit: f64,
    pub proj_grad_norm: f64,
    /// Absolute stopping threshold on the projected-gradient norm.
    pub tolerance: f64,
    pub iterations: usize,
    pub converged: bool,
    pub stop_reason: StopReason,
}

impl InversionResult {
    /// Data discrepancy `‖B u(q) − z^δ‖`.
    pub fn discrepancy(&self) -> f64 {
        (2.0 * self.misfit).sqrt()
    }

    pub fn write_history_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "iter,objective,misfit,proj_grad_norm")?;
        for r in &self.history {
            writeln!(w, "{},{},{},{}", r.iter, r.objective, r.misfit, r.proj_grad_norm)?;
        }
        Ok(())
    }
}

fn l2(u: &ScalarField) -> f64 {
    norm(u, NormKind::L2)
}

/// Projected gradient descent from `q0`.
///
/// Trial steps after the first use the Barzilai–Borwein length
/// `‖Δq‖²/(Δq, Δg)`; every accepted step satisfies
/// `J(q⁺) ≤ J(q) + c (g, q⁺ − q)_h` with `q⁺ = P_K(q − s g)`, so the
/// objective history is nonincreasing. Stops when
/// `‖P_K(q − g) − q‖ ≤ grad_tol · (1 + ‖P_K(q₀ − g₀) − q₀‖)`.
pub fn minimize<M: ForwardModel>(
    model: &M,
    measurement: &Measurement,
    config: &TikhonovConfig,
    set: &AdmissibleSet,
    q0: &ScalarField,
) -> Result<InversionResult> {
    config.validate(set)?;
    if !set.contains(q0) {
        return invalid("initial guess lies outside the admissible set");
    }
    let opts = config.optimizer;
    let mut q = q0.clone().into_interior();
    let mut eval = evaluate(model, &q, measurement, config)?;
    let mut g = gradient_at(model, &q, &eval, config)?;
    let proj_grad = |q: &ScalarField, g: &ScalarField| l2(&(&set.project(&q.axpy(-1.0, g).unwrap()) - q));
    let mut pg = proj_grad(&q, &g);
    let tolerance = opts.grad_tol * (1.0 + pg);
    let mut history = Vec::new();
    let mut step = opts.initial_step;
    let mut iterations = 0;
    let stop_reason = loop {
        history.push(IterationRecord {
            iter: iterations,
            objective: eval.objective(),
            misfit: eval.misfit,
            proj_grad_norm: pg,
        });
        if pg <= tolerance {
            break StopReason::Converged;
        }
        if iterations >= opts.max_iters {
            break StopReason::MaxIterations;
        }
        let j0 = eval.objective();
        let mut trial = step;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let candidate = set.project(&q.axpy(-trial, &g)?);
            let d = &candidate - &q;
            let predicted = inner_product(&g, &d)?;
            let cand_eval = evaluate(model, &candidate, measurement, config)?;
            if cand_eval.objective() <= j0 + opts.armijo * predicted {
                accepted = Some((candidate, cand_eval));
                break;
            }
            trial *= opts.backtrack;
        }
        let Some((q_next, eval_next)) = accepted else {
            break StopReason::LineSearchFailure;
        };
        let g_next = gradient_at(model, &q_next, &eval_next, config)?;
        let s = &q_next - &q;
        let y = &g_next - &g;
        let sy = inner_product(&s, &y)?;
        let ss = inner_product(&s, &s)?;
        step = if sy > 0.0 { (ss / sy).clamp(1e-12, 1e12) } else { trial * 2.0 };
        q = q_next;
        eval = eval_next;
        g = g_next;
        pg = proj_grad(&q, &g);
        iterations += 1;
    };
    Ok(InversionResult {
        q,
        objective: eval.objective(),
        misfit: eval.misfit,
        proj_grad_norm: pg,
        tolerance,
        iterations,
        converged: stop_reason == StopReason::Converged,
        stop_reason,
        history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BoundaryValues;

    fn problem(n: usize) -> EllipticProblem {
        let g = Grid::new(n).unwrap();
        EllipticProblem::new(
            ScalarField::from_fn_with_boundary(&g, |_, _| 1.0),
            ScalarField::constant(&g, 10.0),
            BoundaryValues::constant(&g, 2.0),
        )
        .unwrap()
    }

    #[test]
    fn admissible_projection() {
        let set = AdmissibleSet::new(0.5, 2.0).unwrap();
        let g = Grid::new(2).unwrap();
        let q = ScalarField::from_values(&g, vec![3.0, 1.0, 0.1, 2.0]).unwrap();
        let p = project_admissible(&q, &set);
        assert_eq!(p.values(), &[2.0, 1.0, 0.5, 2.0]);
        assert_eq!(project_admissible(&p, &set), p);
        assert!(AdmissibleSet::new(0.0, 1.0).is_err());
        assert!(AdmissibleSet::new(2.0, 1.0).is_err());
    }

    #[test]
    fn measurement_discrepancy_is_exact() {
        for mode in [DataMode::Gradient, DataMode::Value] {
            let p = problem(7);
            let g = *p.grid();
            let u = p.solve(&ScalarField::constant(&g, 1.0)).unwrap();
            let exact = p.observe(&u, mode);
            let m0 = make_measurement(&p, &u, mode, 0.0, 1).unwrap();
            assert_eq!(m0.data, exact);
            for delta in [1e-3, 0.1, 2.0] {
                let a = make_measurement(&p, &u, mode, delta, 1).unwrap();
                let b = make_measurement(&p, &u, mode, delta, 2).unwrap();
                assert!((a.discrepancy(&exact).unwrap() - delta).abs() <= 1e-12 * delta.max(1.0));
                assert!((b.discrepancy(&exact).unwrap() - delta).abs() <= 1e-12 * delta.max(1.0));
                assert_ne!(a.data, b.data);
            }
            assert!(make_measurement(&p, &u, mode, -1.0, 1).is_err());
        }
    }

    #[test]
    fn objective_special_cases() {
        let p = problem(6);
        let g = *p.grid();
        let set = AdmissibleSet::new(0.5, 3.0).unwrap();
        let q_true = ScalarField::from_fn(&g, |x, y| 1.5 + 0.5 * x * y);
        let q_star = ScalarField::constant(&g, 1.5);
        let u = p.solve(&q_true).unwrap();
        let clean = make_measurement(&p, &u, DataMode::Gradient, 0.0, 0).unwrap();
        let cfg = TikhonovConfig::new(0.3, q_star.clone(), &set).unwrap();
        let d = &q_true - &q_star;
        let expected = 0.15 * inner_product(&d, &d).unwrap();
        assert!((objective(&p, &q_true, &clean, &cfg).unwrap() - expected).abs() < 1e-14);

        let cfg_true = TikhonovConfig::new(0.3, q_true.clone(), &set).unwrap();
        assert_eq!(objective(&p, &q_true, &clean, &cfg_true).unwrap(), 0.0);
        let zero_grad = gradient(&p, &q_true, &clean, &cfg_true).unwrap();
        assert!(zero_grad.max_abs() <= 1e-12);

        let mut no_reg = cfg_true.clone();
        no_reg.beta = 0.0;
        for mode in [DataMode::Gradient, DataMode::Value] {
            let noisy = make_measurement(&p, &u, mode, 0.05, 4).unwrap();
            let j = objective(&p, &q_true, &noisy, &no_reg).unwrap();
            assert!((j - 0.5 * 0.05 * 0.05).abs() < 1e-14);
        }

        // exact fit: only the penalty gradient remains
        let gq = gradient(&p, &q_true, &clean, &cfg).unwrap();
        let expect = d.scaled(0.3);
        assert!((&gq - &expect).max_abs() < 1e-14);
    }

    #[test]
    fn noiseless_start_at_truth_converges_immediately() {
        let p = problem(5);
        let g = *p.grid();
        let set = AdmissibleSet::new(0.5, 3.0).unwrap();
        let q = ScalarField::constant(&g, 1.2);
        let u = p.solve(&q).unwrap();
        let m = make_measurement(&p, &u, DataMode::Gradient, 0.0, 0).unwrap();
        let cfg = TikhonovConfig::new(1.0, q.clone(), &set).unwrap();
        let res = minimize(&p, &m, &cfg, &set, &q).unwrap();
        assert!(res.converged);
        assert_eq!(res.iterations, 0);
    }

    #[test]
    fn config_validation() {
        let g = Grid::new(3).unwrap();
        let set = AdmissibleSet::new(0.5, 3.0).unwrap();
        assert!(TikhonovConfig::new(0.0, ScalarField::constant(&g, 1.0), &set).is_err());
        assert!(TikhonovConfig::new(1.0, ScalarField::constant(&g, 4.0), &set).is_err());
        let bad = OptimizerOptions {
            armijo: 1.5,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    fn parabolic(n: usize, nt: usize) -> ParabolicProblem {
        let g = Grid::new(n).unwrap();
        let bv = BoundaryValues::constant(&g, 1.0);
        ParabolicProblem::new(
            ScalarField::from_fn_with_boundary(&g, |x, y| 1.0 + 0.3 * x * y),
            crate::parabolic::TimeSeries::Constant(ScalarField::from_fn(&g, |x, _| 5.0 + x)),
            crate::parabolic::TimeSeries::Constant(bv.clone()),
            ScalarField::constant(&g, 1.0).with_boundary(bv).unwrap(),
            0.5,
            nt,
        )
        .unwrap()
    }

    fn direction(g: &Grid, seed: u64) -> ScalarField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut v = ScalarField::zeros(g);
        v.values_mut().iter_mut().for_each(|c| *c = StandardNormal.sample(&mut rng));
        v
    }

    fn fd_check<M: ForwardModel>(model: &M, mode: DataMode, directions: u64) -> f64 {
        let g = *model.grid();
        let set = AdmissibleSet::new(0.1, 10.0).unwrap();
        let q_true = ScalarField::from_fn(&g, |x, y| 1.0 + 0.5 * (3.0 * x).sin() * y);
        let truth = model.simulate(&q_true).unwrap();
        let m = make_measurement(model, &truth, mode, 0.05, 11).unwrap();
        let cfg = TikhonovConfig::new(0.01, ScalarField::constant(&g, 1.0), &set).unwrap();
        let q = ScalarField::from_fn(&g, |x, y| 1.4 - 0.3 * x + 0.2 * y * y);
        let grad = gradient(model, &q, &m, &cfg).unwrap();
        let mut worst: f64 = 0.0;
        for s in 0..directions {
            let v = direction(&g, s);
            let eps = 1e-5;
            let jp = objective(model, &q.axpy(eps, &v).unwrap(), &m, &cfg).unwrap();
            let jm = objective(model, &q.axpy(-eps, &v).unwrap(), &m, &cfg).unwrap();
            let fd = (jp - jm) / (2.0 * eps);
            let an = inner_product(&grad, &v).unwrap();
            worst = worst.max((fd - an).abs() / an.abs().max(1e-12));
        }
        worst
    }

    #[test]
    fn elliptic_gradient_matches_finite_differences() {
        let p = problem(15);
        for mode in [DataMode::Gradient, DataMode::Value] {
            let err = fd_check(&p, mode, 20);
            assert!(err <= 1e-4, "{mode}: {err}");
        }
    }

    #[test]
    fn parabolic_gradient_matches_finite_differences() {
        let p = parabolic(5, 8);
        for mode in [DataMode::Gradient, DataMode::Value] {
            let err = fd_check(&p, mode, 20);
            assert!(err <= 1e-4, "{mode}: {err}");
        }
    }

    #[test]
    fn noiseless_inversion_recovers_truth() {
        let p = problem(7);
        let g = *p.grid();
        let set = AdmissibleSet::new(0.2, 5.0).unwrap();
        let q_true = ScalarField::from_fn(&g, |x, y| 1.0 + 0.5 * x * y);
        let q_star = ScalarField::constant(&g, 1.0);
        let u = p.solve(&q_true).unwrap();
        let m = make_measurement(&p, &u, DataMode::Gradient, 0.0, 0).unwrap();
        let mut prev = f64::INFINITY;
        for beta in [1e-2, 1e-4, 1e-6] {
            let cfg = TikhonovConfig::new(beta, q_star.clone(), &set).unwrap();
            let res = minimize(&p, &m, &cfg, &set, &q_star).unwrap();
            assert!(res.converged, "{beta}: {:?}", res.stop_reason);
            let err = l2(&(&res.q - &q_true));
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 0.02, "{prev}");
    }

    #[test]
    fn history_is_monotone_and_iterates_admissible() {
        let p = parabolic(6, 8);
        let g = *p.grid();
        let set = AdmissibleSet::new(0.5, 1.5).unwrap();
        let q_true = ScalarField::from_fn(&g, |x, _| 0.2 + 2.0 * x);
        let truth = p.march(&q_true).unwrap();
        let m = make_measurement(&p, &truth, DataMode::Value, 0.01, 3).unwrap();
        let cfg = TikhonovConfig::new(1e-3, ScalarField::constant(&g, 1.0), &set).unwrap();
        let res = minimize(&p, &m, &cfg, &set, &ScalarField::constant(&g, 1.0)).unwrap();
        assert!(set.contains(&res.q));
        for w in res.history.windows(2) {
            assert!(w[1].objective <= w[0].objective);
        }
        assert_eq!(res.history.len(), res.iterations + 1);
        let mut csv = Vec::new();
        res.write_history_csv(&mut csv).unwrap();
        let text = String::from_utf8(csv).unwrap();
        assert!(text.starts_with("iter,objective,misfit,proj_grad_norm\n0,"));
    }

    #[test]
    fn rejects_inadmissible_start() {
        let p = problem(4);
        let g = *p.grid();
        let set = AdmissibleSet::new(0.5, 3.0).unwrap();
        let u = p.solve(&ScalarField::constant(&g, 1.0)).unwrap();
        let m = make_measurement(&p, &u, DataMode::Value, 0.0, 0).unwrap();
        let cfg = TikhonovConfig::new(1.0, ScalarField::constant(&g, 1.0), &set).unwrap();
        assert!(minimize(&p, &m, &cfg, &set, &ScalarField::constant(&g, 4.0)).is_err());
    }
}
