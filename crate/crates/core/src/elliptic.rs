//! Forward and adjoint solvers for `−∇·(a∇u) + qu = f` in the unit square
//! with Dirichlet data `u = g`.

use crate::error::{invalid, Result};
use crate::grid::{neg_div, BoundaryValues, EdgeVectorField, Grid, ScalarField};
use crate::linalg::{reaction_shift, Diffusion};

/// Right-hand side of an adjoint solve, one per data mode.
#[derive(Debug, Clone, Copy)]
pub enum AdjointSource<'a> {
    /// Edge residual `∇u − ∇z`; enters through its weak divergence.
    Gradient(&'a EdgeVectorField),
    /// Nodal residual `u − z`.
    Value(&'a ScalarField),
}

impl AdjointSource<'_> {
    pub(crate) fn assemble(&self, grid: &Grid) -> Result<Vec<f64>> {
        match self {
            AdjointSource::Gradient(r) => {
                grid.check_same(r.grid())?;
                Ok(neg_div(r).values().to_vec())
            }
            AdjointSource::Value(r) => {
                grid.check_same(r.grid())?;
                Ok(r.values().to_vec())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct EllipticProblem {
    a: ScalarField,
    f: ScalarField,
    g: BoundaryValues,
    diffusion: Diffusion,
}

impl EllipticProblem {
    /// `a` needs explicit boundary values and a positive lower bound.
    pub fn new(a: ScalarField, f: ScalarField, g: BoundaryValues) -> Result<Self> {
        a.grid().check_same(f.grid())?;
        if g.len_per_side() != a.grid().n() {
            return invalid("boundary data does not match the grid");
        }
        let diffusion = Diffusion::new(&a)?;
        Ok(Self { a, f, g, diffusion })
    }

    pub fn grid(&self) -> &Grid {
        self.a.grid()
    }

    pub fn conductivity(&self) -> &ScalarField {
        &self.a
    }

    pub fn source(&self) -> &ScalarField {
        &self.f
    }

    pub fn boundary(&self) -> &BoundaryValues {
        &self.g
    }

    /// Discrete solution with closure `g`.
    pub fn solve(&self, q: &ScalarField) -> Result<ScalarField> {
        self.grid().check_same(q.grid())?;
        let shift = reaction_shift(q)?;
        let mut rhs = self.f.values().to_vec();
        self.diffusion.add_boundary_rhs(&self.g, &mut rhs);
        let mut x = vec![0.0; rhs.len()];
        self.diffusion.solve(&shift, &rhs, &mut x)?;
        ScalarField::from_values(self.grid(), x)?.with_boundary(self.g.clone())
    }

    /// Solves `L_q w = rhs` with homogeneous boundary data.
    pub fn solve_homogeneous(&self, q: &ScalarField, rhs: &ScalarField) -> Result<ScalarField> {
        self.grid().check_same(q.grid())?;
        self.grid().check_same(rhs.grid())?;
        let shift = reaction_shift(q)?;
        let mut x = vec![0.0; rhs.values().len()];
        self.diffusion.solve(&shift, rhs.values(), &mut x)?;
        ScalarField::from_values(self.grid(), x)
    }

    /// `L_q u` at interior nodes, including the closure values of `u`.
    pub fn apply_operator(&self, q: &ScalarField, u: &ScalarField) -> Result<ScalarField> {
        let shift = reaction_shift(q)?;
        let mut out = vec![0.0; u.values().len()];
        self.diffusion.apply(&shift, u.values(), &mut out);
        if let Some(b) = u.boundary() {
            let mut bnd = vec![0.0; out.len()];
            self.diffusion.add_boundary_rhs(b, &mut bnd);
            out.iter_mut().zip(bnd).for_each(|(o, b)| *o -= b);
        }
        ScalarField::from_values(self.grid(), out)
    }

    /// Derivative of `u(q)` in direction `dq`: `L_q w = −dq·u`, `w = 0` on
    /// the boundary.
    pub fn solve_sensitivity(
        &self,
        q: &ScalarField,
        u: &ScalarField,
        dq: &ScalarField,
    ) -> Result<ScalarField> {
        let rhs = dq.zip_with(u, |d, u| -d * u)?;
        self.solve_homogeneous(q, &rhs)
    }

    /// Adjoint state `p` with `(a∇p, ∇φ) + (qp, φ) = ⟨source, φ⟩` for every
    /// zero-closure `φ`, using the transpose of the forward stencil.
    pub fn solve_adjoint(&self, q: &ScalarField, source: AdjointSource<'_>) -> Result<ScalarField> {
        let rhs = ScalarField::from_values(self.grid(), source.assemble(self.grid())?)?;
        self.solve_homogeneous(q, &rhs)
    }
}
