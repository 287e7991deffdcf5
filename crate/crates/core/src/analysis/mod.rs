//! Parameter choice, empirical stability and source-condition constants,
//! convergence-rate sweeps and the `L^p` interpolation bound.

mod rates;
mod scenario;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

pub use rates::{
    fit_line, fit_log_log, geometric_deltas, rate_study, state_error_norm, ComparisonCheck, LinearFit,
    RateRow, RateStudyResult, COMPARISON_SLACK,
};
pub use scenario::{
    manufactured_elliptic, manufactured_parabolic, standard_elliptic, standard_parabolic, PresetParams,
    Scenario, PRESET_KAPPAS,
};

use crate::error::{invalid, Error, Result};
use crate::grid::{inner_product, norm, NormKind, ScalarField};
use crate::inverse::{AdmissibleSet, DataMode, ForwardModel, System};
use crate::spectral::{check_kappa, SpectralBasis};

pub const DEFAULT_MARGIN: f64 = 0.05;

/// Default `ε` in the `H^{−1−ε}` stability probes.
pub const DEFAULT_EPSILON: f64 = 0.25;

/// Which exponent the parabolic system uses for `κ ≤ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AlphaRule {
    /// `2κ/(1+κ)` for gradient data and `κ/(1+κ)` for value data, as in the
    /// elliptic case.
    #[default]
    Standard,
    /// `2κ/(1+2κ)` for gradient data and `κ/(1+2κ)` for value data.
    Alternative,
}

impl FromStr for AlphaRule {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "alternative" => Ok(Self::Alternative),
            other => invalid(format!("unknown alpha rule `{other}` (expected standard or alternative)")),
        }
    }
}

impl fmt::Display for AlphaRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Standard => "standard",
            Self::Alternative => "alternative",
        })
    }
}

/// Source-condition exponent `α` for regularity `κ`, a fraction `margin`
/// below the supremum when `κ ≤ 1`.
pub fn select_alpha(kappa: f64, mode: DataMode, system: System, margin: f64) -> Result<f64> {
    select_alpha_with(kappa, mode, system, margin, AlphaRule::Standard)
}

pub fn select_alpha_with(
    kappa: f64,
    mode: DataMode,
    system: System,
    margin: f64,
    rule: AlphaRule,
) -> Result<f64> {
    check_kappa(kappa)?;
    if !(0.0 < margin && margin < 1.0) {
        return invalid(format!("margin must lie in (0, 1), got {margin}"));
    }
    if kappa > 1.0 {
        return Ok(match mode {
            DataMode::Gradient => 1.0,
            DataMode::Value => 0.5,
        });
    }
    let denominator = match (system, rule) {
        (System::Parabolic, AlphaRule::Alternative) => 1.0 + 2.0 * kappa,
        _ => 1.0 + kappa,
    };
    let bound = match mode {
        DataMode::Gradient => 2.0 * kappa / denominator,
        DataMode::Value => kappa / denominator,
    };
    Ok((1.0 - margin) * bound)
}

/// A-priori rule `β = δ^{2−α}`.
pub fn choose_beta(delta: f64, alpha: f64) -> Result<f64> {
    if !(delta > 0.0) || !delta.is_finite() {
        return invalid(format!("noise level must be positive, got {delta}"));
    }
    if !(0.0 < alpha && alpha <= 1.0) {
        return invalid(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    Ok(delta.powf(2.0 - alpha))
}

/// Checks `‖q − q_ref‖_{L^p} ≤ (2q̄)^{(p−2)/p} ‖q − q_ref‖_{L²}^{2/p}`.
pub fn lp_bound_check(q: &ScalarField, q_ref: &ScalarField, set: &AdmissibleSet, p: f64) -> Result<bool> {
    if !(p >= 2.0) || !p.is_finite() {
        return invalid(format!("exponent must be finite and at least 2, got {p}"));
    }
    q.grid().check_same(q_ref.grid())?;
    if !set.contains(q) || !set.contains(q_ref) {
        return invalid("both fields must lie in the admissible set");
    }
    let d = q - q_ref;
    let h2 = d.grid().h().powi(2);
    let lp = (h2 * d.values().iter().map(|v| v.abs().powf(p)).sum::<f64>()).powf(1.0 / p);
    let l2 = norm(&d, NormKind::L2);
    let bound = (2.0 * set.upper()).powf((p - 2.0) / p) * l2.powf(2.0 / p);
    Ok(lp <= bound * (1.0 + 1e-12))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityMode {
    /// `H^{−1−ε}` error over the `H¹` state difference.
    GradientH1,
    /// `H^{−1−ε}` error over the square root of the `L²` state difference.
    ValueSqrtL2,
    /// Same as `GradientH1` with the state norm integrated over the window.
    ParabolicH1,
    /// Same as `ValueSqrtL2` with the state norm integrated over the window.
    ParabolicSqrtL2,
}

impl StabilityMode {
    pub const ALL: [StabilityMode; 4] = [
        StabilityMode::GradientH1,
        StabilityMode::ValueSqrtL2,
        StabilityMode::ParabolicH1,
        StabilityMode::ParabolicSqrtL2,
    ];

    pub fn system(self) -> System {
        match self {
            Self::GradientH1 | Self::ValueSqrtL2 => System::Elliptic,
            Self::ParabolicH1 | Self::ParabolicSqrtL2 => System::Parabolic,
        }
    }

    fn state_norm(self) -> NormKind {
        match self {
            Self::GradientH1 | Self::ParabolicH1 => NormKind::H1,
            Self::ValueSqrtL2 | Self::ParabolicSqrtL2 => NormKind::L2,
        }
    }

    fn takes_root(self) -> bool {
        matches!(self, Self::ValueSqrtL2 | Self::ParabolicSqrtL2)
    }
}

impl fmt::Display for StabilityMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::GradientH1 => "gradient_h1",
            Self::ValueSqrtL2 => "value_sqrt_l2",
            Self::ParabolicH1 => "parabolic_h1",
            Self::ParabolicSqrtL2 => "parabolic_sqrt_l2",
        })
    }
}

/// `‖q − q†‖_{H^{−1−ε}}` divided by the mode's state-difference norm.
pub fn stability_ratio<M: ForwardModel>(
    q: &ScalarField,
    scenario: &Scenario<M>,
    epsilon: f64,
    mode: StabilityMode,
) -> Result<f64> {
    if !(0.0 < epsilon && epsilon < 0.5) {
        return invalid(format!("epsilon must lie in (0, 1/2), got {epsilon}"));
    }
    if mode.system() != scenario.model().system() {
        return invalid(format!("{mode} probes need a {} problem", mode.system()));
    }
    let diff = q - scenario.q_dagger();
    if diff.max_abs() == 0.0 {
        return Err(Error::Undefined("stability ratio at q = q_dagger".into()));
    }
    let numerator = scenario.basis().fractional_norm(&diff, -(1.0 + epsilon) / 2.0)?;
    let state = scenario.model().simulate(q)?;
    let distance = scenario.model().state_distance(&state, scenario.truth(), mode.state_norm());
    let denominator = if mode.takes_root() { distance.sqrt() } else { distance };
    if denominator == 0.0 {
        return Err(Error::Undefined("state difference vanishes for q != q_dagger".into()));
    }
    Ok(numerator / denominator)
}

/// Smallest constant making the source condition hold on the samples.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VscEstimate {
    pub constant: f64,
    /// Sample attaining the maximum, if any sample had positive excess.
    pub argmax: Option<usize>,
}

/// Per-sample excess `(q† − q*, q† − q) − ¼‖q − q†‖²` divided by
/// `‖u(q) − u(q†)‖^α`, maximized over samples. The state norm is `H¹`
/// for gradient data and `L²` for value data, integrated over the window
/// in the parabolic case. Samples run in parallel.
pub fn vsc_constant<M: ForwardModel>(
    samples: &[ScalarField],
    scenario: &Scenario<M>,
    alpha: f64,
    mode: DataMode,
) -> Result<VscEstimate> {
    if samples.is_empty() {
        return invalid("need at least one sample");
    }
    if !(alpha > 0.0 && alpha <= 1.0) {
        return invalid(format!("alpha must lie in (0, 1], got {alpha}"));
    }
    let kind = match mode {
        DataMode::Gradient => NormKind::H1,
        DataMode::Value => NormKind::L2,
    };
    let gap = scenario.q_dagger() - scenario.q_star();
    let ratios = samples
        .par_iter()
        .enumerate()
        .map(|(index, q)| -> Result<f64> {
            let step = scenario.q_dagger() - q;
            let excess = inner_product(&gap, &step)? - 0.25 * inner_product(&step, &step)?;
            if excess <= 0.0 {
                return Ok(0.0);
            }
            let state = scenario.model().simulate(q)?;
            let distance = scenario.model().state_distance(&state, scenario.truth(), kind);
            if distance == 0.0 {
                return Err(Error::VscViolation { sample: index, excess });
            }
            Ok(excess / distance.powf(alpha))
        })
        .collect::<Result<Vec<_>>>()?;
    let (argmax, constant) = ratios
        .iter()
        .copied()
        .enumerate()
        .fold((None, 0.0), |(arg, best), (i, r)| if r > best { (Some(i), r) } else { (arg, best) });
    Ok(VscEstimate { constant, argmax })
}

/// Regularity of the random directions in [`admissible_samples`].
pub const SAMPLE_DIRECTION_KAPPA: f64 = 2.0;

/// Deterministic admissible samples `P_K(q† + t·w)` around the truth with
/// log-spaced radii `t ∈ [10^{-2}, 1]`. Even samples move along a smooth
/// random direction, odd samples along a blend of that direction with
/// `q* − q†`, so that the source-condition excess is positive for part of
/// the set. Directions depend only on the seed and mode indices, so the
/// same samples are drawn, up to resolution, on every grid.
pub fn admissible_samples<M: ForwardModel>(
    scenario: &Scenario<M>,
    count: usize,
    seed: u64,
) -> Result<Vec<ScalarField>> {
    let basis = SpectralBasis::new(scenario.grid());
    let toward_prior = scenario.q_star() - scenario.q_dagger();
    let gap_size = norm(&toward_prior, NormKind::L2);
    let set = scenario.admissible_set();
    (0..count)
        .map(|s| {
            let fraction = if count > 1 { s as f64 / (count - 1) as f64 } else { 1.0 };
            let t = 10f64.powf(-2.0 + 2.0 * fraction);
            let mut w = basis.random_regular_field(SAMPLE_DIRECTION_KAPPA, seed.wrapping_add(s as u64), 1.0)?;
            if s % 2 == 1 && gap_size > 0.0 {
                w = w.scaled(0.5).axpy(1.0 / gap_size, &toward_prior)?;
            }
            Ok(set.project(&scenario.q_dagger().axpy(t, &w)?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn alpha_examples() {
        let e = System::Elliptic;
        assert_eq!(select_alpha(2.0, DataMode::Gradient, e, DEFAULT_MARGIN).unwrap(), 1.0);
        assert_eq!(select_alpha(2.0, DataMode::Value, e, DEFAULT_MARGIN).unwrap(), 0.5);
        let a = select_alpha(0.4, DataMode::Gradient, e, 0.05).unwrap();
        assert!((a - 0.542857142857).abs() < 1e-9, "{a}");
        let v = select_alpha(0.4, DataMode::Value, e, 0.05).unwrap();
        assert!((v - a / 2.0).abs() < 1e-15);
        assert!(matches!(
            select_alpha(0.5, DataMode::Gradient, e, 0.05),
            Err(Error::ExcludedKappa)
        ));
        assert!(select_alpha(1.0, DataMode::Gradient, e, 0.0).is_err());
    }

    #[test]
    fn parabolic_alpha_rules() {
        let p = System::Parabolic;
        let standard = select_alpha(0.8, DataMode::Gradient, p, 0.05).unwrap();
        assert_eq!(standard, select_alpha(0.8, DataMode::Gradient, System::Elliptic, 0.05).unwrap());
        let alt = select_alpha_with(0.8, DataMode::Gradient, p, 0.05, AlphaRule::Alternative).unwrap();
        assert!((alt - 0.95 * 1.6 / 2.6).abs() < 1e-15);
        let alt_v = select_alpha_with(0.8, DataMode::Value, p, 0.05, AlphaRule::Alternative).unwrap();
        assert!((alt_v - 0.95 * 0.8 / 2.6).abs() < 1e-15);
        // the override only affects the parabolic system and κ ≤ 1
        let ell = select_alpha_with(0.8, DataMode::Gradient, System::Elliptic, 0.05, AlphaRule::Alternative);
        assert_eq!(ell.unwrap(), standard);
        assert_eq!(
            select_alpha_with(3.0, DataMode::Gradient, p, 0.05, AlphaRule::Alternative).unwrap(),
            1.0
        );
    }

    #[test]
    fn beta_rule() {
        assert!((choose_beta(0.01, 1.0).unwrap() - 0.01).abs() < 1e-16);
        assert!((choose_beta(0.01, 0.5).unwrap() - 1e-3).abs() < 1e-16);
        let mut prev = f64::INFINITY;
        for alpha in [1.0, 0.5, 0.1, 1e-3, 1e-9] {
            let b = choose_beta(0.01, alpha).unwrap();
            assert!(b < prev);
            prev = b;
        }
        assert!((prev - 1e-4).abs() < 1e-12);
        assert!(choose_beta(0.0, 1.0).is_err());
        assert!(choose_beta(0.1, 0.0).is_err());
        assert!(choose_beta(0.1, 1.5).is_err());
    }

    #[test]
    fn lp_bound_cases() {
        let g = crate::Grid::new(9).unwrap();
        let set = AdmissibleSet::new(0.5, 3.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut draw = || {
            ScalarField::from_values(&g, (0..g.len()).map(|_| rng.random_range(0.5..=3.0)).collect()).unwrap()
        };
        for _ in 0..20 {
            let (a, b) = (draw(), draw());
            for p in [2.0, 4.0, 10.0] {
                assert!(lp_bound_check(&a, &b, &set, p).unwrap());
            }
            assert!(lp_bound_check(&a, &a, &set, 4.0).unwrap());
        }
        let a = draw();
        assert!(lp_bound_check(&a, &a, &set, 1.5).is_err());
        assert!(lp_bound_check(&a.map(|v| v + 10.0), &a, &set, 2.0).is_err());
    }

    #[test]
    fn vsc_trivial_samples() {
        let s = standard_elliptic(7, 2.0).unwrap();
        let est = vsc_constant(&[s.q_dagger().clone()], &s, 1.0, DataMode::Gradient).unwrap();
        assert_eq!(est.constant, 0.0);
        assert_eq!(est.argmax, None);

        // at q = q* the excess is ¾‖q† − q*‖²
        let gap = s.q_dagger() - s.q_star();
        let u_star = s.model().solve(s.q_star()).unwrap();
        let expected = 0.75 * inner_product(&gap, &gap).unwrap() / norm(&(&u_star - s.truth()), NormKind::H1);
        let samples = vec![s.q_dagger().clone(), s.q_star().clone()];
        let est = vsc_constant(&samples, &s, 1.0, DataMode::Gradient).unwrap();
        assert!((est.constant - expected).abs() <= 1e-12 * expected);
        assert_eq!(est.argmax, Some(1));
        assert!(vsc_constant(&[], &s, 1.0, DataMode::Gradient).is_err());
    }

    #[test]
    fn stability_ratio_linearization_limit() {
        let s = standard_elliptic(15, 2.0).unwrap();
        let w = SpectralBasis::new(s.grid()).random_regular_field(2.0, 3, 1.0).unwrap();
        let at = |t: f64| {
            let q = s.q_dagger().axpy(t, &w).unwrap();
            stability_ratio(&q, &s, DEFAULT_EPSILON, StabilityMode::GradientH1).unwrap()
        };
        let (r3, r4) = (at(1e-3), at(1e-4));
        assert!((r3 / r4 - 1.0).abs() < 0.05, "{r3} {r4}");
        assert!(matches!(
            stability_ratio(&s.q_dagger().clone(), &s, DEFAULT_EPSILON, StabilityMode::GradientH1),
            Err(Error::Undefined(_))
        ));
        assert!(stability_ratio(&at_q(&s), &s, DEFAULT_EPSILON, StabilityMode::ParabolicH1).is_err());
        assert!(stability_ratio(&at_q(&s), &s, 0.6, StabilityMode::GradientH1).is_err());
    }

    fn at_q<M: ForwardModel>(s: &Scenario<M>) -> ScalarField {
        s.q_dagger().map(|v| v + 0.1)
    }

    #[test]
    fn samples_are_admissible_and_deterministic() {
        let s = standard_elliptic(15, 0.8).unwrap();
        let a = admissible_samples(&s, 50, 1).unwrap();
        let b = admissible_samples(&s, 50, 1).unwrap();
        assert_eq!(a.len(), 50);
        assert!(a.iter().all(|q| s.admissible_set().contains(q)));
        assert_eq!(a, b);
        assert!(a.iter().all(|q| q != s.q_dagger()));
    }
}
