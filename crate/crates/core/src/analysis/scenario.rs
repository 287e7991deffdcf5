use std::f64::consts::PI;

use crate::elliptic::EllipticProblem;
use crate::error::{invalid, Result};
use crate::grid::{inner_product, BoundaryValues, Grid, ScalarField};
use crate::inverse::{AdmissibleSet, ForwardModel};
use crate::parabolic::{ParabolicProblem, TimeSeries};
use crate::spectral::{check_kappa, SpectralBasis};

/// A forward model together with a ground truth `q†`, a prior `q*` and the
/// admissible box, with the positivity floor `c₀ = min |u(q†)|` computed
/// over the observed nodes.
#[derive(Debug, Clone)]
pub struct Scenario<M: ForwardModel> {
    model: M,
    set: AdmissibleSet,
    kappa: f64,
    q_dagger: ScalarField,
    q_star: ScalarField,
    truth: M::State,
    c0: f64,
    basis: SpectralBasis,
}

impl<M: ForwardModel> Scenario<M> {
    pub fn new(
        model: M,
        set: AdmissibleSet,
        kappa: f64,
        q_dagger: ScalarField,
        q_star: ScalarField,
    ) -> Result<Self> {
        check_kappa(kappa)?;
        let grid = *model.grid();
        grid.check_same(q_dagger.grid())?;
        grid.check_same(q_star.grid())?;
        if !set.contains(&q_dagger) {
            return invalid(format!(
                "q_dagger leaves the admissible set [{}, {}] (range {}..{})",
                set.lower(),
                set.upper(),
                q_dagger.min(),
                q_dagger.max()
            ));
        }
        if !set.contains(&q_star) {
            return invalid(format!(
                "q_star leaves the admissible set [{}, {}] (range {}..{})",
                set.lower(),
                set.upper(),
                q_star.min(),
                q_star.max()
            ));
        }
        let truth = model.simulate(&q_dagger)?;
        let c0 = model.state_floor(&truth);
        if !(c0 > 0.0) {
            return invalid("the true state vanishes somewhere on the observed region");
        }
        Ok(Self {
            model,
            set,
            kappa,
            q_dagger: q_dagger.into_interior(),
            q_star: q_star.into_interior(),
            truth,
            c0,
            basis: SpectralBasis::new(&grid),
        })
    }

    pub fn model(&self) -> &M {
        &self.model
    }

    pub fn grid(&self) -> &Grid {
        self.model.grid()
    }

    pub fn admissible_set(&self) -> &AdmissibleSet {
        &self.set
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn q_dagger(&self) -> &ScalarField {
        &self.q_dagger
    }

    pub fn q_star(&self) -> &ScalarField {
        &self.q_star
    }

    pub fn truth(&self) -> &M::State {
        &self.truth
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn basis(&self) -> &SpectralBasis {
        &self.basis
    }

    /// `‖q† − q*‖` in `D(A^{κ/2})`.
    pub fn source_size(&self) -> Result<f64> {
        self.basis
            .fractional_norm(&(&self.q_dagger - &self.q_star), self.kappa / 2.0)
    }

    /// `½‖q† − q*‖²`.
    pub fn prior_gap(&self) -> f64 {
        let d = &self.q_dagger - &self.q_star;
        0.5 * inner_product(&d, &d).expect("same grid")
    }
}

/// Parameters of the shipped test problem: constant conductivity, source
/// and boundary data chosen so that the state stays well away from zero,
/// a constant prior, and a truth `q† = q* + w` with `w` a seeded field of
/// regularity `κ` and L² size `amplitude`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PresetParams {
    pub conductivity: f64,
    pub source: f64,
    pub boundary: f64,
    pub prior: f64,
    pub amplitude: f64,
    pub q_lo: f64,
    pub q_hi: f64,
    pub seed: u64,
    pub t_final: f64,
}

impl Default for PresetParams {
    fn default() -> Self {
        Self {
            conductivity: 1.0,
            source: 20.0,
            boundary: 5.0,
            prior: 2.0,
            amplitude: 0.5,
            q_lo: 0.2,
            q_hi: 5.0,
            seed: 7,
            t_final: 0.1,
        }
    }
}

/// Regularity indices of the shipped presets.
pub const PRESET_KAPPAS: [f64; 3] = [0.3, 0.8, 2.0];

impl PresetParams {
    pub fn admissible_set(&self) -> Result<AdmissibleSet> {
        AdmissibleSet::new(self.q_lo, self.q_hi)
    }

    pub fn conductivity_field(&self, grid: &Grid) -> ScalarField {
        let a = self.conductivity;
        ScalarField::from_fn_with_boundary(grid, |_, _| a)
    }

    pub fn q_star(&self, grid: &Grid) -> ScalarField {
        ScalarField::constant(grid, self.prior)
    }

    pub fn q_dagger(&self, grid: &Grid, kappa: f64) -> Result<ScalarField> {
        let w = SpectralBasis::new(grid).random_regular_field(kappa, self.seed, self.amplitude)?;
        Ok(w.map(|v| v + self.prior))
    }

    pub fn elliptic_problem(&self, grid: &Grid) -> Result<EllipticProblem> {
        EllipticProblem::new(
            self.conductivity_field(grid),
            ScalarField::constant(grid, self.source),
            BoundaryValues::constant(grid, self.boundary),
        )
    }

    /// Starts from the boundary value, so the initial state is compatible.
    pub fn parabolic_problem(&self, grid: &Grid, nt: usize) -> Result<ParabolicProblem> {
        let g = BoundaryValues::constant(grid, self.boundary);
        ParabolicProblem::new(
            self.conductivity_field(grid),
            TimeSeries::Constant(ScalarField::constant(grid, self.source)),
            TimeSeries::Constant(g.clone()),
            ScalarField::constant(grid, self.boundary).with_boundary(g)?,
            self.t_final,
            nt,
        )
    }

    pub fn elliptic(&self, n: usize, kappa: f64) -> Result<Scenario<EllipticProblem>> {
        let grid = Grid::new(n)?;
        Scenario::new(
            self.elliptic_problem(&grid)?,
            self.admissible_set()?,
            kappa,
            self.q_dagger(&grid, kappa)?,
            self.q_star(&grid),
        )
    }

    pub fn parabolic(&self, n: usize, nt: usize, kappa: f64) -> Result<Scenario<ParabolicProblem>> {
        let grid = Grid::new(n)?;
        Scenario::new(
            self.parabolic_problem(&grid, nt)?,
            self.admissible_set()?,
            kappa,
            self.q_dagger(&grid, kappa)?,
            self.q_star(&grid),
        )
    }
}

pub fn standard_elliptic(n: usize, kappa: f64) -> Result<Scenario<EllipticProblem>> {
    PresetParams::default().elliptic(n, kappa)
}

pub fn standard_parabolic(n: usize, nt: usize, kappa: f64) -> Result<Scenario<ParabolicProblem>> {
    PresetParams::default().parabolic(n, nt, kappa)
}

fn sine_bump(x: f64, y: f64) -> f64 {
    (PI * x).sin() * (PI * y).sin()
}

/// Known-solution elliptic problem: `a = 1`, `q = 1`, zero boundary data and
/// `u = sin(πx) sin(πy)`. Returns the problem, `q` and the exact solution.
pub fn manufactured_elliptic(n: usize) -> Result<(EllipticProblem, ScalarField, ScalarField)> {
    let grid = Grid::new(n)?;
    let problem = EllipticProblem::new(
        ScalarField::from_fn_with_boundary(&grid, |_, _| 1.0),
        ScalarField::from_fn(&grid, |x, y| (2.0 * PI * PI + 1.0) * sine_bump(x, y)),
        BoundaryValues::zeros(&grid),
    )?;
    Ok((
        problem,
        ScalarField::constant(&grid, 1.0),
        ScalarField::from_fn(&grid, sine_bump),
    ))
}

/// Known-solution parabolic problem on `(0, t_final]`: `a = 1`, `q = 1`,
/// `u = e^{−t} sin(πx) sin(πy)`. Returns the problem, `q` and the exact
/// final state.
pub fn manufactured_parabolic(
    n: usize,
    nt: usize,
    t_final: f64,
) -> Result<(ParabolicProblem, ScalarField, ScalarField)> {
    let grid = Grid::new(n)?;
    let dt = t_final / nt as f64;
    let forcing = (0..=nt)
        .map(|m| {
            let decay = (-(m as f64) * dt).exp();
            ScalarField::from_fn(&grid, |x, y| 2.0 * PI * PI * decay * sine_bump(x, y))
        })
        .collect();
    let problem = ParabolicProblem::new(
        ScalarField::from_fn_with_boundary(&grid, |_, _| 1.0),
        TimeSeries::PerLevel(forcing),
        TimeSeries::Constant(BoundaryValues::zeros(&grid)),
        ScalarField::from_fn_with_boundary(&grid, sine_bump),
        t_final,
        nt,
    )?;
    let exact = ScalarField::from_fn(&grid, |x, y| (-t_final).exp() * sine_bump(x, y));
    Ok((problem, ScalarField::constant(&grid, 1.0), exact))
}
