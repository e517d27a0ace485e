//! Uniform time grids, node-sampled trajectories, trapezoid antiderivatives
//! and a second-order difference operator.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg;

/// Uniform grid `t_n = n·T/N`, `n = 0..=N`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid {
    horizon: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(horizon: f64, steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidGrid("step count must be at least 1".into()));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::InvalidGrid(format!("horizon {horizon} must be positive")));
        }
        Ok(Self { horizon, steps })
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.steps as f64
    }

    pub fn node(&self, n: usize) -> f64 {
        if n == self.steps {
            self.horizon
        } else {
            n as f64 * self.dt()
        }
    }

    pub fn nodes(&self) -> impl Iterator<Item = f64> + '_ {
        (0..=self.steps).map(|n| self.node(n))
    }

    pub fn len(&self) -> usize {
        self.steps + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn same_as(&self, other: &TimeGrid) -> bool {
        self.steps == other.steps
            && (self.horizon - other.horizon).abs() <= 1e-12 * self.horizon.abs().max(1.0)
    }
}

/// Coefficient vectors sampled at every grid node.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    grid: TimeGrid,
    values: Vec<DVector<f64>>,
}

impl Trajectory {
    pub fn new(grid: TimeGrid, values: Vec<DVector<f64>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::dims(grid.len(), values.len(), "trajectory node count"));
        }
        let m = values[0].len();
        if let Some(bad) = values.iter().find(|v| v.len() != m) {
            return Err(Error::dims(m, bad.len(), "trajectory vector length"));
        }
        Ok(Self { grid, values })
    }

    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(f64) -> DVector<f64>) -> Result<Self> {
        Self::new(grid, grid.nodes().map(&mut f).collect())
    }

    pub fn zeros(grid: TimeGrid, dim: usize) -> Self {
        Self {
            grid,
            values: vec![DVector::zeros(dim); grid.len()],
        }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[DVector<f64>] {
        &self.values
    }

    pub fn into_values(self) -> Vec<DVector<f64>> {
        self.values
    }

    pub fn at(&self, n: usize) -> &DVector<f64> {
        &self.values[n]
    }

    pub fn last(&self) -> &DVector<f64> {
        self.values.last().expect("trajectory is never empty")
    }

    /// Linear interpolation between nodes; clamped to `[0, T]`.
    pub fn interpolate(&self, t: f64) -> DVector<f64> {
        let dt = self.grid.dt();
        let s = (t / dt).clamp(0.0, self.grid.steps as f64);
        let n = (s.floor() as usize).min(self.grid.steps - 1);
        let theta = s - n as f64;
        if theta == 0.0 {
            return self.values[n].clone();
        }
        &self.values[n] * (1.0 - theta) + &self.values[n + 1] * theta
    }

    /// Sub-vector `[offset, offset+len)` of every node value.
    pub fn block(&self, offset: usize, len: usize) -> Trajectory {
        Trajectory {
            grid: self.grid,
            values: self
                .values
                .iter()
                .map(|v| v.rows(offset, len).into_owned())
                .collect(),
        }
    }

    pub fn map(&self, mut f: impl FnMut(f64, &DVector<f64>) -> DVector<f64>) -> Trajectory {
        Trajectory {
            grid: self.grid,
            values: self
                .grid
                .nodes()
                .zip(&self.values)
                .map(|(t, v)| f(t, v))
                .collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &Trajectory,
        mut f: impl FnMut(&DVector<f64>, &DVector<f64>) -> DVector<f64>,
    ) -> Result<Trajectory> {
        self.check_compatible(other)?;
        Ok(Trajectory {
            grid: self.grid,
            values: self.values.iter().zip(&other.values).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn sub(&self, other: &Trajectory) -> Result<Trajectory> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scale(&self, s: f64) -> Trajectory {
        self.map(|_, v| v * s)
    }

    /// `max_n √(u_nᵀ·gram·u_n)`.
    pub fn max_norm(&self, gram: &DMatrix<f64>) -> f64 {
        self.values
            .iter()
            .map(|v| linalg::gram_norm(v, gram))
            .fold(0.0, f64::max)
    }

    /// `max_n u_nᵀ·gram·u_n`.
    pub fn max_energy(&self, gram: &DMatrix<f64>) -> f64 {
        self.values
            .iter()
            .map(|v| linalg::gram_norm_sq(v, gram))
            .fold(0.0, f64::max)
    }

    /// Trapezoid-in-time `L²(I; ·)` norm for the given Gram matrix.
    pub fn l2_norm(&self, gram: &DMatrix<f64>) -> f64 {
        let sq: Vec<f64> = self.values.iter().map(|v| linalg::gram_norm_sq(v, gram)).collect();
        trapezoid_sum(&sq, self.grid.dt()).max(0.0).sqrt()
    }

    /// Largest absolute entry over all nodes.
    pub fn max_abs(&self) -> f64 {
        self.values
            .iter()
            .map(linalg::inf_norm_vec)
            .fold(0.0, f64::max)
    }

    fn check_compatible(&self, other: &Trajectory) -> Result<()> {
        if !self.grid.same_as(&other.grid) {
            return Err(Error::GridMismatch(format!(
                "{} vs {} steps",
                self.grid.steps, other.grid.steps
            )));
        }
        if self.dim() != other.dim() {
            return Err(Error::dims(self.dim(), other.dim(), "trajectory dimension"));
        }
        Ok(())
    }
}

pub(crate) fn trapezoid_sum(samples: &[f64], dt: f64) -> f64 {
    match samples {
        [] => 0.0,
        [_] => 0.0,
        [first, inner @ .., last] => dt * (0.5 * (first + last) + inner.iter().sum::<f64>()),
    }
}

/// `(R_g v)(t_n) = g + ∫₀^{t_n} v` with the cumulative trapezoid rule.
pub fn antiderivative(v: &Trajectory, seed: &DVector<f64>) -> Result<Trajectory> {
    if seed.len() != v.dim() {
        return Err(Error::dims(v.dim(), seed.len(), "antiderivative seed"));
    }
    let half_dt = 0.5 * v.grid.dt();
    let mut values = Vec::with_capacity(v.values.len());
    let mut acc = seed.clone();
    values.push(acc.clone());
    for pair in v.values.windows(2) {
        acc += (&pair[0] + &pair[1]) * half_dt;
        values.push(acc.clone());
    }
    Ok(Trajectory { grid: v.grid, values })
}

/// `R_{u_m} ∘ ⋯ ∘ R_{u_n} v` for `seeds = [u_m, …, u_n]`; `v` itself when
/// the seed list is empty. The last seed is applied first.
pub fn compose_antiderivatives(v: &Trajectory, seeds: &[DVector<f64>]) -> Result<Trajectory> {
    let mut out = v.clone();
    for seed in seeds.iter().rev() {
        out = antiderivative(&out, seed)?;
    }
    Ok(out)
}

/// Centred differences inside, second-order one-sided stencils at both ends.
pub fn fd_time_derivative(u: &Trajectory) -> Result<Trajectory> {
    let n = u.grid.steps;
    if n < 2 {
        return Err(Error::InvalidGrid(format!(
            "finite differences need at least 2 steps, got {n}"
        )));
    }
    let dt = u.grid.dt();
    let x = &u.values;
    let mut values = Vec::with_capacity(n + 1);
    values.push((&x[0] * -3.0 + &x[1] * 4.0 - &x[2]) / (2.0 * dt));
    for i in 1..n {
        values.push((&x[i + 1] - &x[i - 1]) / (2.0 * dt));
    }
    values.push((&x[n] * 3.0 - &x[n - 1] * 4.0 + &x[n - 2]) / (2.0 * dt));
    Ok(Trajectory { grid: u.grid, values })
}
