//! Eigenbasis of the five-point Dirichlet Laplacian.
//!
//! The normalized eigenvectors are `e_{k,l}(x_i, y_j) = 2 sin(kπx_i) sin(lπy_j)`
//! with eigenvalues `μ_{k,l} = (4/h²)(sin²(kπh/2) + sin²(lπh/2))`, orthonormal
//! in `(·,·)_h`. Coefficients are computed with a type-I discrete sine
//! transform backed by an FFT of length `2(n+1)`.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};

use crate::error::{invalid, Error, Result};
use crate::grid::{Grid, ScalarField};

/// Excess exponent for [`SpectralBasis::random_regular_field`]: coefficients
/// decay like `μ^{-(κ+1+η)/2}`, which in two dimensions places the field in
/// `D(A^{κ/2})` with little room to spare.
pub const REGULARITY_EXCESS: f64 = 0.1;

/// Unnormalized DST-I, `S[k] = Σ_{i=1}^{n} x_i sin(πki/(n+1))`.
#[derive(Clone)]
struct SineTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl SineTransform {
    fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(2 * (n + 1));
        Self { n, fft }
    }

    fn apply(&self, data: &mut [f64], buf: &mut [Complex<f64>]) {
        let n = self.n;
        let m = n + 1;
        buf[0] = Complex::new(0.0, 0.0);
        buf[m] = Complex::new(0.0, 0.0);
        for i in 0..n {
            buf[i + 1] = Complex::new(data[i], 0.0);
            buf[2 * m - 1 - i] = Complex::new(-data[i], 0.0);
        }
        self.fft.process(buf);
        for k in 0..n {
            data[k] = -0.5 * buf[k + 1].im;
        }
    }
}

/// Coefficients `c_{k,l} = (u, e_{k,l})_h`, stored at `(k−1)·n + (l−1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralCoefficients {
    grid: Grid,
    values: Vec<f64>,
}

impl SpectralCoefficients {
    pub fn from_values(grid: &Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return invalid(format!(
                "expected {} spectral coefficients, got {}",
                grid.len(),
                values.len()
            ));
        }
        Ok(Self {
            grid: *grid,
            values,
        })
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

    /// Coefficient of mode `(k, l)` with 1-based wavenumbers.
    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.values[(k - 1) * self.grid.n() + (l - 1)]
    }
}

#[derive(Clone)]
pub struct SpectralBasis {
    grid: Grid,
    eigenvalues: Vec<f64>,
    order: Vec<usize>,
    dst: SineTransform,
}

impl std::fmt::Debug for SpectralBasis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralBasis")
            .field("grid", &self.grid)
            .field("mu_min", &self.mu_min())
            .field("mu_max", &self.mu_max())
            .finish()
    }
}

/// One-dimensional stencil eigenvalue `(4/h²) sin²(kπh/2)`.
pub fn stencil_eigenvalue_1d(grid: &Grid, k: usize) -> f64 {
    let h = grid.h();
    let s = (k as f64 * PI * h / 2.0).sin();
    4.0 / (h * h) * s * s
}

impl SpectralBasis {
    pub fn new(grid: &Grid) -> Self {
        let n = grid.n();
        let one_d: Vec<f64> = (1..=n).map(|k| stencil_eigenvalue_1d(grid, k)).collect();
        let mut eigenvalues = Vec::with_capacity(grid.len());
        for k in 0..n {
            for l in 0..n {
                eigenvalues.push(one_d[k] + one_d[l]);
            }
        }
        let mut order: Vec<usize> = (0..grid.len()).collect();
        // stable sort keeps (k, l) lexicographic order among ties
        order.sort_by(|&a, &b| eigenvalues[a].total_cmp(&eigenvalues[b]));
        Self {
            grid: *grid,
            eigenvalues,
            order,
            dst: SineTransform::new(n),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// Eigenvalues in `(k, l)` layout.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, k: usize, l: usize) -> f64 {
        self.eigenvalues[(k - 1) * self.grid.n() + (l - 1)]
    }

    /// Storage indices sorted by nondecreasing eigenvalue.
    pub fn sorted_indices(&self) -> &[usize] {
        &self.order
    }

    /// `(k, l)` wavenumbers (1-based) of the `rank`-th smallest eigenvalue.
    pub fn mode(&self, rank: usize) -> (usize, usize) {
        let idx = self.order[rank];
        let n = self.grid.n();
        (idx / n + 1, idx % n + 1)
    }

    pub fn mu_min(&self) -> f64 {
        self.eigenvalues[self.order[0]]
    }

    pub fn mu_max(&self) -> f64 {
        self.eigenvalues[*self.order.last().expect("nonempty grid")]
    }

    /// Normalized eigenvector of mode `(k, l)`.
    pub fn eigenvector(&self, k: usize, l: usize) -> ScalarField {
        ScalarField::from_fn(&self.grid, |x, y| {
            2.0 * (k as f64 * PI * x).sin() * (l as f64 * PI * y).sin()
        })
    }

    /// Double sine sum along both axes, in place.
    fn sine_sum_2d(&self, data: &mut [f64]) {
        let n = self.grid.n();
        let mut buf = vec![Complex::new(0.0, 0.0); 2 * (n + 1)];
        for row in data.chunks_mut(n) {
            self.dst.apply(row, &mut buf);
        }
        let mut col = vec![0.0; n];
        for j in 0..n {
            for i in 0..n {
                col[i] = data[i * n + j];
            }
            self.dst.apply(&mut col, &mut buf);
            for i in 0..n {
                data[i * n + j] = col[i];
            }
        }
    }

    pub fn analyze(&self, u: &ScalarField) -> Result<SpectralCoefficients> {
        self.grid.check_same(u.grid())?;
        if let Some(b) = u.boundary() {
            if b.max_abs() != 0.0 {
                return Err(Error::NotDirichlet(
                    "field carries nonzero boundary values".into(),
                ));
            }
        }
        let h = self.grid.h();
        let mut data = u.values().to_vec();
        self.sine_sum_2d(&mut data);
        let scale = 2.0 * h * h;
        data.iter_mut().for_each(|c| *c *= scale);
        Ok(SpectralCoefficients {
            grid: self.grid,
            values: data,
        })
    }

    pub fn synthesize(&self, c: &SpectralCoefficients) -> Result<ScalarField> {
        self.grid.check_same(c.grid())?;
        let mut data = c.values.clone();
        self.sine_sum_2d(&mut data);
        data.iter_mut().for_each(|v| *v *= 2.0);
        ScalarField::from_values(&self.grid, data)
    }

    /// `sqrt(Σ μ^{2θ} c²)`, i.e. `‖A^θ u‖₀`. Negative `θ` gives the dual
    /// norms: `‖·‖_{H^{-s}}` is `θ = −s/2`.
    pub fn fractional_norm(&self, u: &ScalarField, theta: f64) -> Result<f64> {
        let c = self.analyze(u)?;
        Ok(self.weighted_norm(&c, theta))
    }

    pub fn weighted_norm(&self, c: &SpectralCoefficients, theta: f64) -> f64 {
        c.values
            .iter()
            .zip(&self.eigenvalues)
            .map(|(&c, &mu)| mu.powf(2.0 * theta) * c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Keeps the modes with `μ < λ` (ties are dropped). `λ = +∞` is the
    /// identity; `λ ≤ μ_min` gives the zero field.
    pub fn project_below(&self, u: &ScalarField, lambda: f64) -> Result<ScalarField> {
        if lambda.is_nan() || lambda <= 0.0 {
            return invalid(format!("projection level must be positive, got {lambda}"));
        }
        let mut c = self.analyze(u)?;
        for (c, &mu) in c.values.iter_mut().zip(&self.eigenvalues) {
            if mu >= lambda {
                *c = 0.0;
            }
        }
        self.synthesize(&c)
    }

    /// Field with coefficients `s_{k,l} μ^{-(κ+1+η)/2}` rescaled to L² norm
    /// `amplitude`. Each sign `s_{k,l}` depends only on `(seed, k, l)`, so the
    /// same seed yields consistent low modes on every grid.
    pub fn random_regular_field(&self, kappa: f64, seed: u64, amplitude: f64) -> Result<ScalarField> {
        check_kappa(kappa)?;
        let n = self.grid.n();
        let exponent = -(kappa + 1.0 + REGULARITY_EXCESS) / 2.0;
        let mut values = Vec::with_capacity(self.grid.len());
        for k in 1..=n {
            for l in 1..=n {
                let mu = self.eigenvalue(k, l);
                values.push(mode_sign(seed, k, l) * mu.powf(exponent));
            }
        }
        let norm = values.iter().map(|c| c * c).sum::<f64>().sqrt();
        values.iter_mut().for_each(|c| *c *= amplitude / norm);
        self.synthesize(&SpectralCoefficients {
            grid: self.grid,
            values,
        })
    }
}

fn mode_sign(seed: u64, k: usize, l: usize) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((k as u64) << 32) | l as u64);
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}

/// Rejects regularity indices outside `κ > 0, κ ≠ 1/2`.
pub fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0) || !kappa.is_finite() {
        return invalid(format!("kappa must be positive and finite, got {kappa}"));
    }
    if (kappa - 0.5).abs() < 1e-12 {
        return Err(Error::ExcludedKappa);
    }
    Ok(())
}
