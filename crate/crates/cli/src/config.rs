//! Experiment configuration: a strict TOML file resolved into validated
//! core types.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use radinv_core::analysis::{choose_beta, AlphaRule, PresetParams, DEFAULT_EPSILON, DEFAULT_MARGIN};
use radinv_core::inverse::{AdmissibleSet, DataMode, OptimizerOptions, System};
use radinv_core::spectral::check_kappa;
use radinv_core::{BoundaryValues, Grid, ScalarField};

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawTime {
    pub t_final: Option<f64>,
    pub nt: Option<usize>,
    pub window: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawPreset {
    pub conductivity: Option<f64>,
    pub source: Option<f64>,
    pub boundary: Option<f64>,
    pub prior: Option<f64>,
    pub amplitude: Option<f64>,
    pub q_lo: Option<f64>,
    pub q_hi: Option<f64>,
    pub truth_seed: Option<u64>,
}

/// Grid CSV files overriding preset fields. Relative paths resolve against
/// the directory of the config file.
#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawFields {
    pub q_dagger: Option<PathBuf>,
    pub q_star: Option<PathBuf>,
    pub conductivity: Option<PathBuf>,
    pub source: Option<PathBuf>,
    pub initial_state: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawOptimizer {
    pub max_iters: Option<usize>,
    pub grad_tol: Option<f64>,
    pub armijo: Option<f64>,
    pub backtrack: Option<f64>,
    pub initial_step: Option<f64>,
    pub max_backtracks: Option<usize>,
}

/// The file format as written by users.
#[derive(Debug, Clone, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub system: String,
    pub data_mode: Option<String>,
    pub n: usize,
    pub scenario: Option<String>,
    pub kappa: Option<f64>,
    pub seed: Option<u64>,
    pub delta: Option<f64>,
    pub beta: Option<f64>,
    pub deltas: Option<Vec<f64>>,
    pub margin: Option<f64>,
    pub alpha_rule: Option<String>,
    pub alpha: Option<f64>,
    pub epsilon: Option<f64>,
    pub samples: Option<usize>,
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub time: RawTime,
    #[serde(default)]
    pub preset: RawPreset,
    #[serde(default)]
    pub fields: RawFields,
    #[serde(default)]
    pub optimizer: RawOptimizer,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Preset test problem with a seeded truth of regularity `kappa`.
    Standard,
    /// Known closed-form solution, for forward checks.
    Manufactured,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeSettings {
    pub t_final: f64,
    pub nt: usize,
    pub window: (f64, f64),
}

/// Fields loaded from files, each already checked against the grid.
#[derive(Debug, Clone, Default)]
pub struct FieldOverrides {
    pub q_dagger: Option<ScalarField>,
    pub q_star: Option<ScalarField>,
    pub conductivity: Option<ScalarField>,
    pub source: Option<ScalarField>,
    pub initial_state: Option<ScalarField>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub system: System,
    pub data_mode: DataMode,
    pub grid: Grid,
    pub scenario: ScenarioKind,
    pub kappa: f64,
    pub seed: u64,
    pub delta: f64,
    pub beta: Option<f64>,
    pub deltas: Vec<f64>,
    pub margin: f64,
    pub alpha_rule: AlphaRule,
    pub alpha: Option<f64>,
    pub epsilon: f64,
    pub samples: usize,
    pub output: Option<PathBuf>,
    pub time: Option<TimeSettings>,
    pub preset: PresetParams,
    pub fields: FieldOverrides,
    pub optimizer: OptimizerOptions,
    /// The parsed file, kept for the run manifest.
    pub raw: RawConfig,
}

pub const DEFAULT_KAPPA: f64 = 2.0;
pub const DEFAULT_DELTA: f64 = 0.01;
pub const DEFAULT_SAMPLES: usize = 50;
pub const DEFAULT_NT: usize = 32;

pub fn default_deltas() -> Vec<f64> {
    radinv_core::analysis::geometric_deltas(1e-1, 1e-3, 6).expect("valid defaults")
}

fn positive(key: &str, v: f64) -> Result<f64> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        bail!("{key}: must be positive and finite, got {v}")
    }
}

fn load_field(key: &str, grid: &Grid, base: &Path, path: &Path) -> Result<ScalarField> {
    let full = if path.is_absolute() { path.to_path_buf() } else { base.join(path) };
    let file = File::open(&full).with_context(|| format!("{key}: cannot open {}", full.display()))?;
    ScalarField::read_csv(grid, BufReader::new(file)).with_context(|| format!("{key}: {}", full.display()))
}

/// Boundary values copied from the nearest interior node.
pub fn extend_to_boundary(field: &ScalarField) -> Result<ScalarField> {
    let grid = *field.grid();
    let n = grid.n();
    let boundary = BoundaryValues {
        west: (0..n).map(|j| field.at(0, j)).collect(),
        east: (0..n).map(|j| field.at(n - 1, j)).collect(),
        south: (0..n).map(|i| field.at(i, 0)).collect(),
        north: (0..n).map(|i| field.at(i, n - 1)).collect(),
    };
    Ok(field.clone().with_boundary(boundary)?)
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base).with_context(|| format!("invalid config {}", path.display()))
}

pub fn parse_config_str(text: &str, base: &Path) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| anyhow!("{}", e.to_string().trim_end()))?;
    resolve(raw, base)
}

fn resolve(raw: RawConfig, base: &Path) -> Result<ExperimentConfig> {
    let system: System = raw.system.parse().map_err(|e| anyhow!("system: {e}"))?;
    let data_mode: DataMode = match &raw.data_mode {
        Some(s) => s.parse().map_err(|e| anyhow!("data_mode: {e}"))?,
        None => DataMode::Gradient,
    };
    let grid = Grid::new(raw.n).map_err(|e| anyhow!("n: {e}"))?;
    let scenario = match raw.scenario.as_deref().unwrap_or("standard") {
        "standard" => ScenarioKind::Standard,
        "manufactured" => ScenarioKind::Manufactured,
        other => bail!("scenario: unknown preset `{other}` (expected standard or manufactured)"),
    };
    let kappa = raw.kappa.unwrap_or(DEFAULT_KAPPA);
    check_kappa(kappa).map_err(|e| anyhow!("kappa: {e}"))?;

    let delta = raw.delta.unwrap_or(DEFAULT_DELTA);
    if !(delta >= 0.0 && delta.is_finite()) {
        bail!("delta: must be nonnegative, got {delta}");
    }
    let beta = raw.beta.map(|b| positive("beta", b)).transpose()?;
    let deltas = raw.deltas.clone().unwrap_or_else(default_deltas);
    if deltas.len() < 4 {
        bail!("deltas: a rate study needs at least four noise levels");
    }
    if deltas.iter().any(|d| !(*d > 0.0)) || deltas.windows(2).any(|w| !(w[1] < w[0])) {
        bail!("deltas: must be positive and strictly decreasing");
    }
    let margin = raw.margin.unwrap_or(DEFAULT_MARGIN);
    if !(0.0 < margin && margin < 1.0) {
        bail!("margin: must lie in (0, 1), got {margin}");
    }
    let alpha_rule: AlphaRule = match &raw.alpha_rule {
        Some(s) => s.parse().map_err(|e| anyhow!("alpha_rule: {e}"))?,
        None => AlphaRule::Standard,
    };
    if let Some(a) = raw.alpha {
        choose_beta(1.0, a).map_err(|e| anyhow!("alpha: {e}"))?;
    }
    let epsilon = raw.epsilon.unwrap_or(DEFAULT_EPSILON);
    if !(0.0 < epsilon && epsilon < 0.5) {
        bail!("epsilon: must lie in (0, 1/2), got {epsilon}");
    }
    let samples = raw.samples.unwrap_or(DEFAULT_SAMPLES);
    if samples == 0 {
        bail!("samples: must be at least 1");
    }

    let defaults = PresetParams::default();
    let p = &raw.preset;
    let preset = PresetParams {
        conductivity: positive("preset.conductivity", p.conductivity.unwrap_or(defaults.conductivity))?,
        source: p.source.unwrap_or(defaults.source),
        boundary: p.boundary.unwrap_or(defaults.boundary),
        prior: p.prior.unwrap_or(defaults.prior),
        amplitude: p.amplitude.unwrap_or(defaults.amplitude),
        q_lo: p.q_lo.unwrap_or(defaults.q_lo),
        q_hi: p.q_hi.unwrap_or(defaults.q_hi),
        seed: p.truth_seed.unwrap_or(defaults.seed),
        t_final: raw.time.t_final.unwrap_or(defaults.t_final),
    };
    let set = AdmissibleSet::new(preset.q_lo, preset.q_hi).map_err(|e| anyhow!("preset.q_lo/q_hi: {e}"))?;

    let time = match system {
        System::Elliptic => {
            if raw.time.t_final.is_some() || raw.time.nt.is_some() || raw.time.window.is_some() {
                bail!("time: only meaningful for the parabolic system");
            }
            None
        }
        System::Parabolic => {
            let t_final = positive("time.t_final", preset.t_final)?;
            let nt = raw.time.nt.unwrap_or(DEFAULT_NT);
            if nt == 0 {
                bail!("time.nt: need at least one step");
            }
            let window = match raw.time.window {
                Some([a, b]) => {
                    if !(0.0 <= a && a < b && b <= t_final) {
                        bail!("time.window: need 0 <= start < end <= t_final, got [{a}, {b}]");
                    }
                    (a, b)
                }
                None => (t_final / 2.0, t_final),
            };
            Some(TimeSettings { t_final, nt, window })
        }
    };

    let f = &raw.fields;
    let load = |key: &str, p: &Option<PathBuf>| p.as_ref().map(|p| load_field(key, &grid, base, p)).transpose();
    let fields = FieldOverrides {
        q_dagger: load("fields.q_dagger", &f.q_dagger)?,
        q_star: load("fields.q_star", &f.q_star)?,
        conductivity: load("fields.conductivity", &f.conductivity)?,
        source: load("fields.source", &f.source)?,
        initial_state: load("fields.initial_state", &f.initial_state)?,
    };
    if fields.initial_state.is_some() && system == System::Elliptic {
        bail!("fields.initial_state: only meaningful for the parabolic system");
    }
    if let Some(a) = &fields.conductivity {
        if !(a.min() > 0.0) {
            bail!("fields.conductivity: must be positive, minimum is {}", a.min());
        }
    }
    match &fields.q_star {
        Some(q) if !set.contains(q) => bail!(
            "fields.q_star: prior leaves the admissible set [{}, {}] (range {}..{})",
            set.lower(),
            set.upper(),
            q.min(),
            q.max()
        ),
        None if !(set.lower() <= preset.prior && preset.prior <= set.upper()) => bail!(
            "preset.prior: q_star = {} lies outside the admissible set [{}, {}]",
            preset.prior,
            set.lower(),
            set.upper()
        ),
        _ => {}
    }
    if let Some(q) = &fields.q_dagger {
        if !set.contains(q) {
            bail!("fields.q_dagger: leaves the admissible set [{}, {}]", set.lower(), set.upper());
        }
    }

    let d = OptimizerOptions::default();
    let o = &raw.optimizer;
    let optimizer = OptimizerOptions {
        max_iters: o.max_iters.unwrap_or(d.max_iters),
        grad_tol: o.grad_tol.unwrap_or(d.grad_tol),
        armijo: o.armijo.unwrap_or(d.armijo),
        backtrack: o.backtrack.unwrap_or(d.backtrack),
        initial_step: o.initial_step.unwrap_or(d.initial_step),
        max_backtracks: o.max_backtracks.unwrap_or(d.max_backtracks),
    };
    optimizer.validate().map_err(|e| anyhow!("optimizer: {e}"))?;

    Ok(ExperimentConfig {
        system,
        data_mode,
        grid,
        scenario,
        kappa,
        seed: raw.seed.unwrap_or(0),
        delta,
        beta,
        deltas,
        margin,
        alpha_rule,
        alpha: raw.alpha,
        epsilon,
        samples,
        output: raw.output.clone(),
        time,
        preset,
        fields,
        optimizer,
        raw,
    })
}

impl ExperimentConfig {
    pub fn admissible_set(&self) -> AdmissibleSet {
        AdmissibleSet::new(self.preset.q_lo, self.preset.q_hi).expect("validated at load")
    }

    /// Flat `key=value` echo of the file as parsed, sorted by key.
    pub fn echo(&self) -> Vec<(String, String)> {
        let value = toml::Value::try_from(&self.raw).expect("config serializes");
        let mut out = Vec::new();
        flatten("", &value, &mut out);
        out.sort();
        out
    }
}

fn flatten(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(t) => {
            for (k, v) in t {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        toml::Value::String(s) => out.push((prefix.to_string(), s.clone())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}
