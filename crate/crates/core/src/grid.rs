//! Uniform grid on the unit square, nodal and edge fields, and the
//! staggered difference operators.
//!
//! Interior nodes are `(x_i, y_j) = ((i+1)h, (j+1)h)` for 0-based
//! `i, j < n`, stored row-major with `i` outer. Gradients live on edge
//! midpoints and are forward differences, so the weak divergence
//! [`neg_div`] is the exact adjoint of [`gradient`] under the weighted
//! inner products `(u, v)_h = h² Σ u v` (nodes) and the same sum over edges.

use std::fmt;
use std::io::{BufRead, Write};
use std::ops::{Add, Mul, Sub};
use std::str::FromStr;

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return invalid("grid needs at least one interior node per axis");
        }
        Ok(Self {
            n,
            h: 1.0 / (n as f64 + 1.0),
        })
    }

    /// Interior nodes per axis.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Number of interior nodes.
    pub fn len(&self) -> usize {
        self.n * self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        i * self.n + j
    }

    /// Coordinate of the 0-based interior index along either axis.
    #[inline]
    pub fn coord(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h
    }

    pub fn x_edge_count(&self) -> usize {
        (self.n + 1) * self.n
    }

    pub fn y_edge_count(&self) -> usize {
        self.n * (self.n + 1)
    }

    pub fn check_same(&self, other: &Grid) -> Result<()> {
        if self.n != other.n {
            return Err(Error::GridMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }
}

/// Dirichlet values on the four sides, each indexed along the side by the
/// 0-based interior index of the other axis. Corners are never referenced
/// by the five-point stencil, so they are not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryValues {
    pub west: Vec<f64>,
    pub east: Vec<f64>,
    pub south: Vec<f64>,
    pub north: Vec<f64>,
}

impl BoundaryValues {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Grid, c: f64) -> Self {
        let side = vec![c; grid.n()];
        Self {
            west: side.clone(),
            east: side.clone(),
            south: side.clone(),
            north: side,
        }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let t: Vec<f64> = (0..n).map(|k| grid.coord(k)).collect();
        Self {
            west: t.iter().map(|&y| f(0.0, y)).collect(),
            east: t.iter().map(|&y| f(1.0, y)).collect(),
            south: t.iter().map(|&x| f(x, 0.0)).collect(),
            north: t.iter().map(|&x| f(x, 1.0)).collect(),
        }
    }

    pub fn len_per_side(&self) -> usize {
        self.west.len()
    }

    pub fn sides(&self) -> [&[f64]; 4] {
        [&self.west, &self.east, &self.south, &self.north]
    }

    pub fn max_abs(&self) -> f64 {
        self.sides()
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    pub fn min(&self) -> f64 {
        self.sides()
            .iter()
            .flat_map(|s| s.iter())
            .fold(f64::INFINITY, |m, &v| m.min(v))
    }

    pub fn max_abs_diff(&self, other: &BoundaryValues) -> f64 {
        self.sides()
            .iter()
            .zip(other.sides().iter())
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if self.sides().iter().any(|s| s.len() != grid.n()) {
            return invalid(format!(
                "boundary arrays must hold {} values per side",
                grid.n()
            ));
        }
        Ok(())
    }
}

/// How a nodal field continues onto the boundary nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Closure {
    /// Homogeneous Dirichlet: the field vanishes on the boundary.
    Zero,
    /// Explicit Dirichlet values.
    Dirichlet(BoundaryValues),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    grid: Grid,
    values: Vec<f64>,
    closure: Closure,
}

impl ScalarField {
    pub fn zeros(grid: &Grid) -> Self {
        Self::constant(grid, 0.0)
    }

    /// Constant interior values with the implicit-zero closure.
    pub fn constant(grid: &Grid, c: f64) -> Self {
        Self {
            grid: *grid,
            values: vec![c; grid.len()],
            closure: Closure::Zero,
        }
    }

    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "field needs {} values, got {}",
                grid.len(),
                values.len()
            ));
        }
        Ok(Self {
            grid: *grid,
            values,
            closure: Closure::Zero,
        })
    }

    /// Samples `f` at the interior nodes; implicit-zero closure.
    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let n = grid.n();
        let mut values = Vec::with_capacity(grid.len());
        for i in 0..n {
            for j in 0..n {
                values.push(f(grid.coord(i), grid.coord(j)));
            }
        }
        Self {
            grid: *grid,
            values,
            closure: Closure::Zero,
        }
    }

    /// Samples `f` at interior and boundary nodes.
    pub fn from_fn_with_boundary(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let boundary = BoundaryValues::from_fn(grid, &f);
        Self::from_fn(grid, f).with_closure(Closure::Dirichlet(boundary))
    }

    pub fn with_boundary(self, boundary: BoundaryValues) -> Result<Self> {
        boundary.check(&self.grid)?;
        Ok(self.with_closure(Closure::Dirichlet(boundary)))
    }

    fn with_closure(mut self, closure: Closure) -> Self {
        self.closure = closure;
        self
    }

    /// Drops any explicit boundary values.
    pub fn into_interior(self) -> Self {
        self.with_closure(Closure::Zero)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn closure(&self) -> &Closure {
        &self.closure
    }

    pub fn boundary(&self) -> Option<&BoundaryValues> {
        match &self.closure {
            Closure::Zero => None,
            Closure::Dirichlet(b) => Some(b),
        }
    }

    pub fn has_zero_closure(&self) -> bool {
        matches!(self.closure, Closure::Zero)
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Value at extended index `(ei, ej)` in `0..=n+1`, where `0` and
    /// `n+1` address the boundary.
    #[inline]
    pub fn extended(&self, ei: usize, ej: usize) -> f64 {
        let n = self.grid.n();
        if (1..=n).contains(&ei) && (1..=n).contains(&ej) {
            return self.values[self.grid.index(ei - 1, ej - 1)];
        }
        match &self.closure {
            Closure::Zero => 0.0,
            Closure::Dirichlet(b) => {
                if ei == 0 {
                    b.west[ej - 1]
                } else if ei == n + 1 {
                    b.east[ej - 1]
                } else if ej == 0 {
                    b.south[ei - 1]
                } else {
                    b.north[ei - 1]
                }
            }
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            closure: Closure::Zero,
        }
    }

    /// Nodewise combination of interior values; the result has the
    /// implicit-zero closure.
    pub fn zip_with(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        Ok(Self {
            grid: self.grid,
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            closure: Closure::Zero,
        })
    }

    /// Interior difference `self − other`; boundary values cancel when the
    /// closures agree, so the difference is returned with the zero closure.
    pub fn difference(&self, other: &ScalarField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c·other` on interior values, keeping `self`'s closure.
    pub fn axpy(&self, c: f64, other: &ScalarField) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let mut out = self.clone();
        for (o, &v) in out.values.iter_mut().zip(&other.values) {
            *o += c * v;
        }
        Ok(out)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Writes the interior values as `i,j,value` with 1-based indices.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "i,j,value")?;
        let n = self.grid.n();
        for i in 0..n {
            for j in 0..n {
                writeln!(w, "{},{},{}", i + 1, j + 1, self.at(i, j))?;
            }
        }
        Ok(())
    }

    /// Reads the `i,j,value` format. Every interior node must appear
    /// exactly once; the result has the implicit-zero closure.
    pub fn read_csv<R: BufRead>(grid: &Grid, r: R) -> Result<Self> {
        let n = grid.n();
        let mut values = vec![f64::NAN; grid.len()];
        let mut seen = vec![false; grid.len()];
        let mut lines = r.lines();
        let header = lines.next().transpose()?;
        if header.as_deref().map(str::trim) != Some("i,j,value") {
            return Err(Error::Parse("expected header `i,j,value`".into()));
        }
        for (lineno, line) in lines.enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let parts: Vec<&str> = line.split(',').collect();
            let bad = || Error::Parse(format!("line {}: malformed row `{line}`", lineno + 2));
            if parts.len() != 3 {
                return Err(bad());
            }
            let i: usize = parts[0].trim().parse().map_err(|_| bad())?;
            let j: usize = parts[1].trim().parse().map_err(|_| bad())?;
            let v: f64 = parts[2].trim().parse().map_err(|_| bad())?;
            if !(1..=n).contains(&i) || !(1..=n).contains(&j) {
                return Err(Error::Parse(format!(
                    "line {}: index ({i},{j}) outside 1..={n}",
                    lineno + 2
                )));
            }
            let k = grid.index(i - 1, j - 1);
            if seen[k] {
                return Err(Error::Parse(format!(
                    "line {}: duplicate node ({i},{j})",
                    lineno + 2
                )));
            }
            seen[k] = true;
            values[k] = v;
        }
        if let Some(k) = seen.iter().position(|s| !s) {
            return Err(Error::Parse(format!(
                "missing node ({},{})",
                k / n + 1,
                k % n + 1
            )));
        }
        Self::from_values(grid, values)
    }
}

impl Add for &ScalarField {
    type Output = ScalarField;
    fn add(self, rhs: &ScalarField) -> ScalarField {
        self.zip_with(rhs, |a, b| a + b).expect("grid mismatch")
    }
}

impl Sub for &ScalarField {
    type Output = ScalarField;
    fn sub(self, rhs: &ScalarField) -> ScalarField {
        self.difference(rhs).expect("grid mismatch")
    }
}

impl Mul<&ScalarField> for f64 {
    type Output = ScalarField;
    fn mul(self, rhs: &ScalarField) -> ScalarField {
        rhs.scaled(self)
    }
}

/// Edge-midpoint vector field. `x[ie * n + j]` is the x-component on the
/// edge between extended columns `ie` and `ie + 1` (`ie` in `0..=n`) in
/// interior row `j`; `y[i * (n + 1) + je]` likewise for horizontal edges.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeVectorField {
    grid: Grid,
    x: Vec<f64>,
    y: Vec<f64>,
}

impl EdgeVectorField {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: *grid,
            x: vec![0.0; grid.x_edge_count()],
            y: vec![0.0; grid.y_edge_count()],
        }
    }

    pub fn from_components(grid: &Grid, x: Vec<f64>, y: Vec<f64>) -> Result<Self> {
        if x.len() != grid.x_edge_count() || y.len() != grid.y_edge_count() {
            return invalid(format!(
                "edge field needs {} x- and {} y-components, got {} and {}",
                grid.x_edge_count(),
                grid.y_edge_count(),
                x.len(),
                y.len()
            ));
        }
        Ok(Self { grid: *grid, x, y })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn x_mut(&mut self) -> &mut [f64] {
        &mut self.x
    }

    pub fn y_mut(&mut self) -> &mut [f64] {
        &mut self.y
    }

    pub fn components_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.x.iter_mut().chain(self.y.iter_mut())
    }

    pub fn components(&self) -> impl Iterator<Item = &f64> {
        self.x.iter().chain(self.y.iter())
    }

    pub fn zip_with(
        &self,
        other: &EdgeVectorField,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Self> {
        self.grid.check_same(&other.grid)?;
        let comb = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self {
            grid: self.grid,
            x: comb(&self.x, &other.x),
            y: comb(&self.y, &other.y),
        })
    }

    pub fn difference(&self, other: &EdgeVectorField) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            grid: self.grid,
            x: self.x.iter().map(|v| c * v).collect(),
            y: self.y.iter().map(|v| c * v).collect(),
        }
    }

    /// `h² Σ` over all edges of the componentwise product.
    pub fn inner(&self, other: &EdgeVectorField) -> Result<f64> {
        self.grid.check_same(&other.grid)?;
        let h2 = self.grid.h() * self.grid.h();
        let sx: f64 = self.x.iter().zip(&other.x).map(|(a, b)| a * b).sum();
        let sy: f64 = self.y.iter().zip(&other.y).map(|(a, b)| a * b).sum();
        Ok(h2 * (sx + sy))
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).expect("same grid").sqrt()
    }
}

/// `(u, v)_h = h² Σ u v` over interior nodes.
pub fn inner_product(u: &ScalarField, v: &ScalarField) -> Result<f64> {
    u.grid.check_same(&v.grid)?;
    let h = u.grid.h();
    Ok(h * h * u.values.iter().zip(&v.values).map(|(a, b)| a * b).sum::<f64>())
}

/// Forward differences across every edge, using the closure values on
/// boundary-adjacent edges.
pub fn gradient(u: &ScalarField) -> EdgeVectorField {
    let grid = u.grid;
    let n = grid.n();
    let inv_h = 1.0 / grid.h();
    let mut out = EdgeVectorField::zeros(&grid);
    for ie in 0..=n {
        for j in 0..n {
            out.x[ie * n + j] = (u.extended(ie + 1, j + 1) - u.extended(ie, j + 1)) * inv_h;
        }
    }
    for i in 0..n {
        for je in 0..=n {
            out.y[i * (n + 1) + je] = (u.extended(i + 1, je + 1) - u.extended(i + 1, je)) * inv_h;
        }
    }
    out
}

/// Weak divergence: the adjoint of [`gradient`] restricted to zero-closure
/// fields, `(r, ∇φ)_edges = (neg_div(r), φ)_h`.
pub fn neg_div(r: &EdgeVectorField) -> ScalarField {
    let grid = r.grid;
    let n = grid.n();
    let inv_h = 1.0 / grid.h();
    let mut values = vec![0.0; grid.len()];
    for i in 0..n {
        for j in 0..n {
            let west = r.x[i * n + j];
            let east = r.x[(i + 1) * n + j];
            let south = r.y[i * (n + 1) + j];
            let north = r.y[i * (n + 1) + j + 1];
            values[grid.index(i, j)] = (west - east + south - north) * inv_h;
        }
    }
    ScalarField {
        grid,
        values,
        closure: Closure::Zero,
    }
}

/// Five-point discrete `−Δ` including the closure values.
pub fn neg_div_gradient(u: &ScalarField) -> ScalarField {
    neg_div(&gradient(u))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormKind {
    L2,
    H1,
    H1Semi,
}

impl FromStr for NormKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l2" => Ok(Self::L2),
            "h1" => Ok(Self::H1),
            "h1_semi" | "h1semi" => Ok(Self::H1Semi),
            other => invalid(format!("unknown norm mode `{other}`")),
        }
    }
}

impl fmt::Display for NormKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::L2 => "L2",
            Self::H1 => "H1",
            Self::H1Semi => "H1_semi",
        })
    }
}

pub fn norm(u: &ScalarField, kind: NormKind) -> f64 {
    let l2_sq = || inner_product(u, u).expect("same grid");
    let semi_sq = || {
        let g = gradient(u);
        g.inner(&g).expect("same grid")
    };
    match kind {
        NormKind::L2 => l2_sq().sqrt(),
        NormKind::H1Semi => semi_sq().sqrt(),
        NormKind::H1 => (l2_sq() + semi_sq()).sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: &Grid, rng: &mut ChaCha8Rng) -> ScalarField {
        let v = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        ScalarField::from_values(grid, v).unwrap()
    }

    #[test]
    fn build_grid_examples() {
        let g = Grid::new(3).unwrap();
        assert_eq!(g.h(), 0.25);
        assert_eq!(g.len(), 9);
        let g1 = Grid::new(1).unwrap();
        assert_eq!((g1.coord(0), g1.coord(0)), (0.5, 0.5));
        assert!(Grid::new(0).is_err());
        for n in 1..200 {
            let g = Grid::new(n).unwrap();
            assert!((g.h() * (n as f64 + 1.0) - 1.0).abs() <= 1e-15);
        }
    }

    #[test]
    fn inner_product_examples() {
        let g = Grid::new(3).unwrap();
        let one = ScalarField::constant(&g, 1.0);
        assert_eq!(inner_product(&one, &one).unwrap(), 0.5625);
        assert_eq!(inner_product(&one, &ScalarField::zeros(&g)).unwrap(), 0.0);
        let other = ScalarField::zeros(&Grid::new(4).unwrap());
        assert!(matches!(
            inner_product(&one, &other),
            Err(Error::GridMismatch { .. })
        ));
    }

    #[test]
    fn first_sine_mode_is_normalized() {
        let g = Grid::new(7).unwrap();
        let pi = std::f64::consts::PI;
        let e1 = ScalarField::from_fn(&g, |x, y| 2.0 * (pi * x).sin() * (pi * y).sin());
        assert!((inner_product(&e1, &e1).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gradient_of_linear_field_is_exact() {
        let g = Grid::new(6).unwrap();
        let u = ScalarField::from_fn_with_boundary(&g, |x, _| x);
        let d = gradient(&u);
        assert!(d.x().iter().all(|&v| (v - 1.0).abs() < 1e-12));
        assert!(d.y().iter().all(|&v| v.abs() < 1e-12));
        let zero = gradient(&ScalarField::zeros(&g));
        assert!(zero.components().all(|&v| v == 0.0));
    }

    #[test]
    fn summation_by_parts_small_grid() {
        let g = Grid::new(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let u = random_field(&g, &mut rng);
        let v = random_field(&g, &mut rng);
        let lhs = gradient(&u).inner(&gradient(&v)).unwrap();
        let rhs = inner_product(&u, &neg_div_gradient(&v)).unwrap();
        assert!((lhs - rhs).abs() < 1e-13, "{lhs} vs {rhs}");
    }

    #[test]
    fn summation_by_parts_many_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [3, 5, 9] {
            let g = Grid::new(n).unwrap();
            for _ in 0..100 {
                let u = random_field(&g, &mut rng);
                let v = random_field(&g, &mut rng);
                let lhs = gradient(&u).inner(&gradient(&v)).unwrap();
                let rhs = inner_product(&u, &neg_div_gradient(&v)).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + lhs.abs()));
            }
        }
    }

    #[test]
    fn weak_divergence_is_adjoint_of_gradient() {
        let g = Grid::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let u = random_field(&g, &mut rng);
        let r = EdgeVectorField::from_components(
            &g,
            (0..g.x_edge_count()).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..g.y_edge_count()).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )
        .unwrap();
        let lhs = r.inner(&gradient(&u)).unwrap();
        let rhs = inner_product(&neg_div(&r), &u).unwrap();
        assert!((lhs - rhs).abs() < 1e-13);
    }

    #[test]
    fn gradient_is_linear() {
        let g = Grid::new(5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let u = random_field(&g, &mut rng);
            let v = random_field(&g, &mut rng);
            let (a, b) = (rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0));
            let combo = &u.scaled(a) + &v.scaled(b);
            let lhs = gradient(&combo);
            let rhs = gradient(&u)
                .scaled(a)
                .zip_with(&gradient(&v).scaled(b), |p, q| p + q)
                .unwrap();
            assert!(lhs
                .components()
                .zip(rhs.components())
                .all(|(p, q)| (p - q).abs() < 1e-13 * (1.0 + p.abs())));
        }
    }

    #[test]
    fn norms_of_constants() {
        let g = Grid::new(3).unwrap();
        let z = ScalarField::zeros(&g);
        for k in [NormKind::L2, NormKind::H1, NormKind::H1Semi] {
            assert_eq!(norm(&z, k), 0.0);
        }
        let c = ScalarField::constant(&g, -2.0);
        let expected = 2.0 * (g.h() * g.h() * 9.0_f64).sqrt();
        assert!((norm(&c, NormKind::L2) - expected).abs() < 1e-15);
        assert!("bogus".parse::<NormKind>().is_err());
        assert_eq!("H1_semi".parse::<NormKind>().unwrap(), NormKind::H1Semi);
    }

    #[test]
    fn inner_product_positive_definite() {
        let g = Grid::new(4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let u = random_field(&g, &mut rng);
            let v = random_field(&g, &mut rng);
            assert!(inner_product(&u, &u).unwrap() > 0.0);
            assert_eq!(
                inner_product(&u, &v).unwrap(),
                inner_product(&v, &u).unwrap()
            );
        }
    }

    #[test]
    fn csv_roundtrip_and_errors() {
        let g = Grid::new(3).unwrap();
        let u = ScalarField::from_fn(&g, |x, y| x * 0.3 - y / 7.0);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = ScalarField::read_csv(&g, buf.as_slice()).unwrap();
        assert_eq!(back, u);
        assert!(ScalarField::read_csv(&g, "i,j,value\n1,1,0.5\n".as_bytes()).is_err());
        assert!(ScalarField::read_csv(&g, "a,b\n".as_bytes()).is_err());
        assert!(ScalarField::read_csv(&g, "i,j,value\n4,1,0.5\n".as_bytes()).is_err());
    }
}
