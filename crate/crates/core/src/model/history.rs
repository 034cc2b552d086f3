//! History segments: functions on the delay window `[-tau, 0]`.

use crate::error::{Error, Result};
use crate::numerics::{hermite, hermite_deriv};

/// Read access to a history window `theta -> u(t + theta)`.
///
/// `span` is how far back the window reaches; views over full trajectories
/// report `f64::INFINITY`.
pub trait Segment {
    fn dim(&self) -> usize;
    fn span(&self) -> f64;
    fn eval_into(&self, theta: f64, out: &mut [f64]);

    fn eval(&self, theta: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(theta, &mut out);
        out
    }
}

/// The constant segment `theta -> value`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstSegment(pub Vec<f64>);

impl Segment for ConstSegment {
    fn dim(&self) -> usize {
        self.0.len()
    }
    fn span(&self) -> f64 {
        f64::INFINITY
    }
    fn eval_into(&self, _theta: f64, out: &mut [f64]) {
        out.copy_from_slice(&self.0);
    }
}

/// Segment backed by a closure.
pub struct FnSegment<F> {
    dim: usize,
    span: f64,
    f: F,
}

impl<F: Fn(f64, &mut [f64])> FnSegment<F> {
    pub fn new(dim: usize, span: f64, f: F) -> Self {
        Self { dim, span, f }
    }
}

impl<F: Fn(f64, &mut [f64])> Segment for FnSegment<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn span(&self) -> f64 {
        self.span
    }
    fn eval_into(&self, theta: f64, out: &mut [f64]) {
        (self.f)(theta, out)
    }
}

/// Sampled history on `[-tau, 0]` with piecewise cubic Hermite evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct HistorySegment {
    dim: usize,
    grid: Vec<f64>,
    values: Vec<f64>,
    derivs: Vec<f64>,
}

impl HistorySegment {
    /// Build from sample times (local, ending at 0) and per-sample values.
    /// Derivatives are estimated with second-order finite differences.
    pub fn from_samples(grid: Vec<f64>, values: Vec<Vec<f64>>) -> Result<Self> {
        let dim = values.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || grid.len() != values.len() {
            return Err(Error::InvalidModel("history needs one non-empty value per sample".into()));
        }
        Self::check_grid(&grid)?;
        if values.iter().any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: values.iter().map(Vec::len).find(|&l| l != dim).unwrap() });
        }
        let flat: Vec<f64> = values.concat();
        let derivs = fd_derivatives(&grid, &flat, dim);
        Ok(Self { dim, grid, values: flat, derivs })
    }

    /// Sample `f` (and its derivative `df`) on `n` equal intervals of `[-tau, 0]`.
    pub fn from_fn<F, D>(dim: usize, tau: f64, n: usize, f: F, df: D) -> Self
    where
        F: Fn(f64, &mut [f64]),
        D: Fn(f64, &mut [f64]),
    {
        let n = if tau > 0.0 { n.max(1) } else { 0 };
        let grid: Vec<f64> = (0..=n)
            .map(|k| if n == 0 { 0.0 } else { -tau + tau * k as f64 / n as f64 })
            .collect();
        let mut values = vec![0.0; grid.len() * dim];
        let mut derivs = vec![0.0; grid.len() * dim];
        for (k, &th) in grid.iter().enumerate() {
            f(th, &mut values[k * dim..(k + 1) * dim]);
            df(th, &mut derivs[k * dim..(k + 1) * dim]);
        }
        Self { dim, grid, values, derivs }
    }

    pub fn constant(tau: f64, value: &[f64]) -> Self {
        let v = value.to_vec();
        let dim = v.len();
        Self::from_fn(dim, tau, 1, move |_, out| out.copy_from_slice(&v), |_, out| out.fill(0.0))
    }

    fn check_grid(grid: &[f64]) -> Result<()> {
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidModel("history grid must be strictly increasing".into()));
        }
        let last = *grid.last().unwrap();
        if last.abs() > 1e-12 * (1.0 + grid[0].abs()) {
            return Err(Error::InvalidModel("history grid must end at theta = 0".into()));
        }
        Ok(())
    }

    pub fn tau(&self) -> f64 {
        -self.grid[0]
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn value_at(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn deriv_at(&self, k: usize) -> &[f64] {
        &self.derivs[k * self.dim..(k + 1) * self.dim]
    }

    fn locate(&self, theta: f64) -> usize {
        let n = self.grid.len();
        match self.grid.partition_point(|&g| g <= theta) {
            0 => 0,
            p if p >= n => n - 2,
            p => p - 1,
        }
    }

    pub fn deriv_into(&self, theta: f64, out: &mut [f64]) {
        if self.grid.len() == 1 {
            out.copy_from_slice(self.deriv_at(0));
            return;
        }
        let k = self.locate(theta);
        let h = self.grid[k + 1] - self.grid[k];
        let s = (theta - self.grid[k]) / h;
        let (y0, y1, d0, d1) = (self.value_at(k), self.value_at(k + 1), self.deriv_at(k), self.deriv_at(k + 1));
        for i in 0..self.dim {
            out[i] = hermite_deriv(s, h, y0[i], y1[i], d0[i], d1[i]);
        }
    }
}

impl Segment for HistorySegment {
    fn dim(&self) -> usize {
        self.dim
    }

    fn span(&self) -> f64 {
        self.tau()
    }

    fn eval_into(&self, theta: f64, out: &mut [f64]) {
        if self.grid.len() == 1 {
            out.copy_from_slice(self.value_at(0));
            return;
        }
        let k = self.locate(theta);
        if theta == self.grid[k] {
            out.copy_from_slice(self.value_at(k));
            return;
        }
        let h = self.grid[k + 1] - self.grid[k];
        let s = (theta - self.grid[k]) / h;
        let (y0, y1, d0, d1) = (self.value_at(k), self.value_at(k + 1), self.deriv_at(k), self.deriv_at(k + 1));
        for i in 0..self.dim {
            out[i] = hermite(s, h, y0[i], y1[i], d0[i], d1[i]);
        }
    }
}

fn fd_derivatives(grid: &[f64], values: &[f64], dim: usize) -> Vec<f64> {
    let n = grid.len();
    let mut d = vec![0.0; values.len()];
    if n == 1 {
        return d;
    }
    if n == 2 {
        let h = grid[1] - grid[0];
        for i in 0..dim {
            let s = (values[dim + i] - values[i]) / h;
            d[i] = s;
            d[dim + i] = s;
        }
        return d;
    }
    // three-point Lagrange derivative at each node
    let lagrange = |x: [f64; 3], y: [f64; 3], at: f64| {
        let l0 = ((at - x[1]) + (at - x[2])) / ((x[0] - x[1]) * (x[0] - x[2]));
        let l1 = ((at - x[0]) + (at - x[2])) / ((x[1] - x[0]) * (x[1] - x[2]));
        let l2 = ((at - x[0]) + (at - x[1])) / ((x[2] - x[0]) * (x[2] - x[1]));
        l0 * y[0] + l1 * y[1] + l2 * y[2]
    };
    for k in 0..n {
        let c = k.clamp(1, n - 2);
        let x = [grid[c - 1], grid[c], grid[c + 1]];
        for i in 0..dim {
            let y = [values[(c - 1) * dim + i], values[c * dim + i], values[(c + 1) * dim + i]];
            d[k * dim + i] = lagrange(x, y, grid[k]);
        }
    }
    d
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproduces_samples_exactly() {
        let grid: Vec<f64> = vec![-1.0, -0.7, -0.3, -0.1, 0.0];
        let values: Vec<Vec<f64>> = grid.iter().map(|t: &f64| vec![t.sin(), t * t]).collect();
        let seg = HistorySegment::from_samples(grid.clone(), values.clone()).unwrap();
        for (t, v) in grid.iter().zip(&values) {
            assert_eq!(&seg.eval(*t), v);
        }
        assert!((seg.span() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn from_fn_is_fourth_order() {
        let err = |n: usize| {
            let seg = HistorySegment::from_fn(1, 2.0, n, |t, o| o[0] = t.exp(), |t, o| o[0] = t.exp());
            (0..200)
                .map(|k| {
                    let t = -2.0 + 2.0 * (k as f64 + 0.37) / 200.0;
                    (seg.eval(t)[0] - t.exp()).abs()
                })
                .fold(0.0, f64::max)
        };
        let ratio = err(10) / err(20);
        assert!(ratio > 14.0, "ratio {ratio}");
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(HistorySegment::from_samples(vec![-1.0, -1.0, 0.0], vec![vec![0.0]; 3]).is_err());
        assert!(HistorySegment::from_samples(vec![-1.0, -0.5], vec![vec![0.0]; 2]).is_err());
    }

    #[test]
    fn zero_length_segment() {
        let seg = HistorySegment::constant(0.0, &[0.25]);
        assert_eq!(seg.eval(0.0), vec![0.25]);
        assert_eq!(seg.span(), 0.0);
    }
}
