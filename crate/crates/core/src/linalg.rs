//! Jacobi-preconditioned conjugate gradients and the variable-coefficient
//! five-point operator shared by the elliptic and parabolic solvers.

use crate::error::{invalid, Error, Result};
use crate::grid::{BoundaryValues, Grid, ScalarField};

pub const CG_RELATIVE_TOLERANCE: f64 = 1e-12;

/// Residual bound every accepted solve must meet.
pub const ACCEPTED_RELATIVE_RESIDUAL: f64 = 1e-10;

/// Rounding slack under which slightly negative `q` is clamped to zero.
pub const NEGATIVE_Q_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy)]
pub struct CgOutcome {
    pub iterations: usize,
    pub relative_residual: f64,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for SPD `A` given as a matrix-free product. `x` holds
/// the initial guess on entry.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    diagonal: &[f64],
    b: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let len = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(CgOutcome {
            iterations: 0,
            relative_residual: 0.0,
        });
    }
    let mut ax = vec![0.0; len];
    apply(x, &mut ax);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut z: Vec<f64> = r.iter().zip(diagonal).map(|(r, d)| r / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; len];
    let mut iterations = 0;
    let mut res = dot(&r, &r).sqrt() / b_norm;
    while res > rel_tol && iterations < max_iter {
        apply(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let step = rz / pap;
        for k in 0..len {
            x[k] += step * p[k];
            r[k] -= step * ap[k];
        }
        for k in 0..len {
            z[k] = r[k] / diagonal[k];
        }
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        rz = rz_next;
        for k in 0..len {
            p[k] = z[k] + beta * p[k];
        }
        iterations += 1;
        res = dot(&r, &r).sqrt() / b_norm;
    }
    // confirm against the true residual, which the recurrence can drift from
    apply(x, &mut ax);
    let true_res = b
        .iter()
        .zip(&ax)
        .map(|(b, a)| (b - a) * (b - a))
        .sum::<f64>()
        .sqrt()
        / b_norm;
    if true_res > ACCEPTED_RELATIVE_RESIDUAL {
        return Err(Error::SolveFailed {
            iterations,
            residual: true_res,
        });
    }
    Ok(CgOutcome {
        iterations,
        relative_residual: true_res,
    })
}

/// `−∇·(a∇·)` on the interior with arithmetic edge averages of `a`,
/// acting on zero-closure vectors. Boundary data enter through
/// [`Diffusion::add_boundary_rhs`].
#[derive(Debug, Clone)]
pub struct Diffusion {
    grid: Grid,
    ax: Vec<f64>,
    ay: Vec<f64>,
}

impl Diffusion {
    /// `a` must carry explicit boundary values and be positive everywhere.
    pub fn new(a: &ScalarField) -> Result<Self> {
        let grid = *a.grid();
        let boundary = match a.boundary() {
            Some(b) => b,
            None => return invalid("conductivity needs explicit boundary values"),
        };
        let a_min = a.min().min(boundary.min());
        if !(a_min > 0.0) {
            return invalid(format!("conductivity must be positive, minimum is {a_min}"));
        }
        let n = grid.n();
        let mut ax = vec![0.0; grid.x_edge_count()];
        let mut ay = vec![0.0; grid.y_edge_count()];
        for ie in 0..=n {
            for j in 0..n {
                ax[ie * n + j] = 0.5 * (a.extended(ie, j + 1) + a.extended(ie + 1, j + 1));
            }
        }
        for i in 0..n {
            for je in 0..=n {
                ay[i * (n + 1) + je] = 0.5 * (a.extended(i + 1, je) + a.extended(i + 1, je + 1));
            }
        }
        Ok(Self { grid, ax, ay })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// `out = (−∇·(a∇) + diag(shift)) x` with homogeneous boundary values.
    pub fn apply(&self, shift: &[f64], x: &[f64], out: &mut [f64]) {
        let n = self.grid.n();
        let inv_h2 = 1.0 / (self.grid.h() * self.grid.h());
        for i in 0..n {
            for j in 0..n {
                let k = i * n + j;
                let u = x[k];
                let (aw, ae) = (self.ax[i * n + j], self.ax[(i + 1) * n + j]);
                let (as_, an) = (self.ay[i * (n + 1) + j], self.ay[i * (n + 1) + j + 1]);
                let uw = if i > 0 { x[k - n] } else { 0.0 };
                let ue = if i + 1 < n { x[k + n] } else { 0.0 };
                let us = if j > 0 { x[k - 1] } else { 0.0 };
                let un = if j + 1 < n { x[k + 1] } else { 0.0 };
                out[k] = inv_h2 * (aw * (u - uw) + ae * (u - ue) + as_ * (u - us) + an * (u - un))
                    + shift[k] * u;
            }
        }
    }

    pub fn diagonal(&self, shift: &[f64]) -> Vec<f64> {
        let n = self.grid.n();
        let inv_h2 = 1.0 / (self.grid.h() * self.grid.h());
        let mut d = Vec::with_capacity(self.grid.len());
        for i in 0..n {
            for j in 0..n {
                let s = self.ax[i * n + j]
                    + self.ax[(i + 1) * n + j]
                    + self.ay[i * (n + 1) + j]
                    + self.ay[i * (n + 1) + j + 1];
                d.push(inv_h2 * s + shift[i * n + j]);
            }
        }
        d
    }

    /// Adds the eliminated Dirichlet neighbours `a_e g / h²` to `rhs`.
    pub fn add_boundary_rhs(&self, g: &BoundaryValues, rhs: &mut [f64]) {
        let n = self.grid.n();
        let inv_h2 = 1.0 / (self.grid.h() * self.grid.h());
        for j in 0..n {
            rhs[j] += inv_h2 * self.ax[j] * g.west[j];
            rhs[(n - 1) * n + j] += inv_h2 * self.ax[n * n + j] * g.east[j];
        }
        for i in 0..n {
            rhs[i * n] += inv_h2 * self.ay[i * (n + 1)] * g.south[i];
            rhs[i * n + n - 1] += inv_h2 * self.ay[i * (n + 1) + n] * g.north[i];
        }
    }

    /// Solves `(−∇·(a∇) + diag(shift)) x = rhs` in place of the guess `x`.
    pub fn solve(&self, shift: &[f64], rhs: &[f64], x: &mut [f64]) -> Result<CgOutcome> {
        let diag = self.diagonal(shift);
        let max_iter = 20 * self.grid.len().max(5);
        conjugate_gradient(
            |v, out| self.apply(shift, v, out),
            &diag,
            rhs,
            x,
            CG_RELATIVE_TOLERANCE,
            max_iter,
        )
    }
}

/// Validates `q ≥ 0`, clamping rounding-level negatives.
pub fn reaction_shift(q: &ScalarField) -> Result<Vec<f64>> {
    let mut out = Vec::with_capacity(q.values().len());
    for &v in q.values() {
        if v.is_nan() || v < -NEGATIVE_Q_SLACK {
            return invalid(format!("radiativity must be nonnegative, found {v}"));
        }
        out.push(v.max(0.0));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cg_solves_small_spd_system() {
        // [[4,1],[1,3]] x = [1,2] → x = [1/11, 7/11]
        let apply = |x: &[f64], out: &mut [f64]| {
            out[0] = 4.0 * x[0] + x[1];
            out[1] = x[0] + 3.0 * x[1];
        };
        let mut x = vec![0.0; 2];
        let out = conjugate_gradient(apply, &[4.0, 3.0], &[1.0, 2.0], &mut x, 1e-14, 10).unwrap();
        assert!((x[0] - 1.0 / 11.0).abs() < 1e-14);
        assert!((x[1] - 7.0 / 11.0).abs() < 1e-14);
        assert!(out.iterations <= 2);
    }

    #[test]
    fn cg_reports_failure() {
        let apply = |x: &[f64], out: &mut [f64]| {
            for (o, v) in out.iter_mut().zip(x) {
                *o = *v;
            }
            out[0] += 100.0 * x[1];
            out[1] += 100.0 * x[0];
        };
        let mut x = vec![0.0; 3];
        let err = conjugate_gradient(apply, &[1.0; 3], &[1.0, 2.0, 3.0], &mut x, 1e-14, 1).unwrap_err();
        assert!(matches!(err, Error::SolveFailed { iterations: 1, .. }));
    }

    #[test]
    fn negative_q_beyond_slack_rejected() {
        let g = Grid::new(2).unwrap();
        let q = ScalarField::from_values(&g, vec![1.0, -1e-13, 0.0, 2.0]).unwrap();
        assert_eq!(reaction_shift(&q).unwrap()[1], 0.0);
        let bad = ScalarField::from_values(&g, vec![1.0, -1e-6, 0.0, 2.0]).unwrap();
        assert!(reaction_shift(&bad).is_err());
    }

    #[test]
    fn conductivity_without_boundary_rejected() {
        let g = Grid::new(3).unwrap();
        assert!(Diffusion::new(&ScalarField::constant(&g, 1.0)).is_err());
        let neg = ScalarField::from_fn_with_boundary(&g, |x, _| x - 0.5);
        assert!(Diffusion::new(&neg).is_err());
    }
}
