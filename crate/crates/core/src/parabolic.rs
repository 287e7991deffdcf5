//! Backward-Euler time stepping for `∂ₜu − ∇·(a∇u) + qu = f`, `u(0) = u₀`,
//! `u = g` on the boundary, and the matching backward-in-time adjoint.

use crate::elliptic::AdjointSource;
use crate::error::{invalid, Result};
use crate::grid::{BoundaryValues, Grid, ScalarField};
use crate::linalg::{reaction_shift, Diffusion};

/// Data given per time level `0..=nt` or held constant.
#[derive(Debug, Clone)]
pub enum TimeSeries<T> {
    Constant(T),
    PerLevel(Vec<T>),
}

impl<T> TimeSeries<T> {
    pub fn at(&self, level: usize) -> &T {
        match self {
            TimeSeries::Constant(v) => v,
            TimeSeries::PerLevel(v) => &v[level],
        }
    }

    fn check_levels(&self, nt: usize, what: &str) -> Result<()> {
        if let TimeSeries::PerLevel(v) = self {
            if v.len() != nt + 1 {
                return invalid(format!("{what} needs {} levels, got {}", nt + 1, v.len()));
            }
        }
        Ok(())
    }

    fn iter(&self) -> Box<dyn Iterator<Item = &T> + '_> {
        match self {
            TimeSeries::Constant(v) => Box::new(std::iter::once(v)),
            TimeSeries::PerLevel(v) => Box::new(v.iter()),
        }
    }
}

/// Measurement window `(start, end]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeWindow {
    pub start: f64,
    pub end: f64,
}

impl TimeWindow {
    /// Whether time level `m` (at `t = m·Δt`) lies in the window.
    pub fn contains_level(&self, level: usize, dt: f64, t_final: f64) -> bool {
        let eps = 1e-12 * t_final;
        let t = level as f64 * dt;
        t > self.start + eps && t <= self.end + eps
    }
}

/// States `u⁰ … u^{nt}` (or adjoint levels) on a uniform time grid.
#[derive(Debug, Clone)]
pub struct StateTrajectory {
    dt: f64,
    levels: Vec<ScalarField>,
}

impl StateTrajectory {
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn levels(&self) -> &[ScalarField] {
        &self.levels
    }

    pub fn level(&self, m: usize) -> &ScalarField {
        &self.levels[m]
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn last(&self) -> &ScalarField {
        self.levels.last().expect("trajectory has at least one level")
    }
}

#[derive(Debug, Clone)]
pub struct ParabolicProblem {
    a: ScalarField,
    diffusion: Diffusion,
    forcing: TimeSeries<ScalarField>,
    boundary: TimeSeries<BoundaryValues>,
    u0: ScalarField,
    t_final: f64,
    nt: usize,
    window: TimeWindow,
}

/// Tolerance for the corner compatibility of `u₀` with `g(0)`.
pub const COMPATIBILITY_TOLERANCE: f64 = 1e-8;

impl ParabolicProblem {
    /// Builds the problem with the default window `(T/2, T]`.
    pub fn new(
        a: ScalarField,
        forcing: TimeSeries<ScalarField>,
        boundary: TimeSeries<BoundaryValues>,
        u0: ScalarField,
        t_final: f64,
        nt: usize,
    ) -> Result<Self> {
        let grid = *a.grid();
        if nt == 0 {
            return invalid("need at least one time step");
        }
        if !(t_final > 0.0) || !t_final.is_finite() {
            return invalid(format!("final time must be positive, got {t_final}"));
        }
        forcing.check_levels(nt, "forcing")?;
        boundary.check_levels(nt, "boundary data")?;
        for f in forcing.iter() {
            grid.check_same(f.grid())?;
        }
        for g in boundary.iter() {
            if g.len_per_side() != grid.n() {
                return invalid("boundary data does not match the grid");
            }
        }
        grid.check_same(u0.grid())?;
        let diffusion = Diffusion::new(&a)?;
        Ok(Self {
            a,
            diffusion,
            forcing,
            boundary,
            u0,
            t_final,
            nt,
            window: TimeWindow {
                start: 0.5 * t_final,
                end: t_final,
            },
        })
    }

    pub fn with_window(mut self, start: f64, end: f64) -> Result<Self> {
        if !(0.0 <= start && start < end && end <= self.t_final) {
            return invalid(format!(
                "window ({start}, {end}] must satisfy 0 <= start < end <= T = {}",
                self.t_final
            ));
        }
        self.window = TimeWindow { start, end };
        if self.window_levels().is_empty() {
            return invalid("measurement window contains no time level");
        }
        Ok(self)
    }

    pub fn grid(&self) -> &Grid {
        self.a.grid()
    }

    pub fn conductivity(&self) -> &ScalarField {
        &self.a
    }

    pub fn initial_state(&self) -> &ScalarField {
        &self.u0
    }

    pub fn t_final(&self) -> f64 {
        self.t_final
    }

    pub fn steps(&self) -> usize {
        self.nt
    }

    pub fn dt(&self) -> f64 {
        self.t_final / self.nt as f64
    }

    pub fn window(&self) -> TimeWindow {
        self.window
    }

    /// Time levels `m` with `t_a < mΔt ≤ t_b`.
    pub fn window_levels(&self) -> Vec<usize> {
        (0..=self.nt)
            .filter(|&m| self.window.contains_level(m, self.dt(), self.t_final))
            .collect()
    }

    /// Largest mismatch between the boundary values of `u₀` and `g(0)`.
    pub fn compatibility_defect(&self) -> f64 {
        let g0 = self.boundary.at(0);
        match self.u0.boundary() {
            Some(b) => b.max_abs_diff(g0),
            None => g0.max_abs(),
        }
    }

    pub fn is_compatible(&self) -> bool {
        self.compatibility_defect() <= COMPATIBILITY_TOLERANCE
    }

    fn step_shift(&self, q: &ScalarField) -> Result<Vec<f64>> {
        self.grid().check_same(q.grid())?;
        let inv_dt = 1.0 / self.dt();
        Ok(reaction_shift(q)?.into_iter().map(|s| s + inv_dt).collect())
    }

    /// `(I/Δt + L_q) u^{m+1} = u^m/Δt + f^{m+1}` with `u^{m+1} = g^{m+1}` on
    /// the boundary.
    pub fn march(&self, q: &ScalarField) -> Result<StateTrajectory> {
        let shift = self.step_shift(q)?;
        let inv_dt = 1.0 / self.dt();
        let mut levels = Vec::with_capacity(self.nt + 1);
        levels.push(self.u0.clone());
        let mut x = self.u0.values().to_vec();
        for m in 0..self.nt {
            let prev = &levels[m];
            let g = self.boundary.at(m + 1);
            let mut rhs: Vec<f64> = prev
                .values()
                .iter()
                .zip(self.forcing.at(m + 1).values())
                .map(|(u, f)| u * inv_dt + f)
                .collect();
            self.diffusion.add_boundary_rhs(g, &mut rhs);
            self.diffusion.solve(&shift, &rhs, &mut x)?;
            levels.push(ScalarField::from_values(self.grid(), x.clone())?.with_boundary(g.clone())?);
        }
        Ok(StateTrajectory {
            dt: self.dt(),
            levels,
        })
    }

    /// Linearized march in direction `dq`: `w⁰ = 0`,
    /// `(I/Δt + L_q) w^{m+1} = w^m/Δt − dq·u^{m+1}`.
    pub fn march_sensitivity(
        &self,
        q: &ScalarField,
        states: &StateTrajectory,
        dq: &ScalarField,
    ) -> Result<StateTrajectory> {
        let shift = self.step_shift(q)?;
        let inv_dt = 1.0 / self.dt();
        let mut levels = vec![ScalarField::zeros(self.grid())];
        let mut x = vec![0.0; self.grid().len()];
        for m in 0..self.nt {
            let rhs: Vec<f64> = levels[m]
                .values()
                .iter()
                .zip(dq.values().iter().zip(states.level(m + 1).values()))
                .map(|(w, (d, u))| w * inv_dt - d * u)
                .collect();
            self.diffusion.solve(&shift, &rhs, &mut x)?;
            levels.push(ScalarField::from_values(self.grid(), x.clone())?);
        }
        Ok(StateTrajectory {
            dt: self.dt(),
            levels,
        })
    }

    /// Backward recursion `p^{nt} = 0`,
    /// `(I/Δt + L_q) p^m = p^{m+1}/Δt + s^{m+1}` for `m = nt−1 … 0`, where
    /// `s^k` is the assembled source attached to forward level `k`. Level `m`
    /// of the result is therefore the multiplier of the step `m → m+1`, and
    /// the data-misfit gradient density is `−Δt Σ_m u^{m+1} p^m`.
    pub fn march_adjoint(
        &self,
        q: &ScalarField,
        sources: &[(usize, AdjointSource<'_>)],
    ) -> Result<StateTrajectory> {
        let shift = self.step_shift(q)?;
        let inv_dt = 1.0 / self.dt();
        let len = self.grid().len();
        let mut assembled: Vec<Option<Vec<f64>>> = vec![None; self.nt + 1];
        for (level, src) in sources {
            if !self.window.contains_level(*level, self.dt(), self.t_final) {
                return invalid(format!("residual at level {level} lies outside the measurement window"));
            }
            let v = src.assemble(self.grid())?;
            match &mut assembled[*level] {
                Some(acc) => acc.iter_mut().zip(v).for_each(|(a, b)| *a += b),
                slot => *slot = Some(v),
            }
        }
        let mut levels = vec![ScalarField::zeros(self.grid()); self.nt + 1];
        let mut x = vec![0.0; len];
        for m in (0..self.nt).rev() {
            let mut rhs: Vec<f64> = levels[m + 1].values().iter().map(|p| p * inv_dt).collect();
            if let Some(s) = &assembled[m + 1] {
                rhs.iter_mut().zip(s).for_each(|(r, s)| *r += s);
            }
            self.diffusion.solve(&shift, &rhs, &mut x)?;
            levels[m] = ScalarField::from_values(self.grid(), x.clone())?;
        }
        Ok(StateTrajectory {
            dt: self.dt(),
            levels,
        })
    }
}
