//! Travelling-wave profiles `u(t, x) = psi(t + x / c)`.
//!
//! In the variable `s = t + x / c` the profile solves
//! `eps^2 d_i psi_i'' - psi_i' + f_i(psi_s) = 0` with `eps = 1 / c` and the
//! same delay window `[-tau, 0]` as the diffusion-free system. Bounded
//! solutions are fixed points of the two-sided exponential-kernel operator
//! built from the roots `alpha < 0 < beta` of `eps^2 d z^2 - z - 1 = 0`.

mod solve;
mod verify;

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::{linearization_at_zero, Model, Segment};
use crate::numerics::{hermite, hermite_deriv};
use crate::output::{numbered, write_csv};
use crate::spectrum::{count_roots_rect, root_continuation, CharProblem, Rect, SpectrumReport};

pub use solve::{picard_step, refit_tail, solve_profile};
pub use verify::{residual, verify_front, weighted_distance, FrontReport, Residual};

/// `alpha(eps) = (1 - sqrt(1 + 4 eps^2)) / (2 eps^2)` for unit diffusion;
/// tends to `-1` as `eps -> 0`.
pub fn alpha(eps: f64, d: f64) -> f64 {
    let e2 = eps * eps * d;
    // rationalized to avoid cancellation for small eps
    -2.0 / (1.0 + (1.0 + 4.0 * e2).sqrt())
}

/// `beta(eps) = (1 + sqrt(1 + 4 eps^2)) / (2 eps^2)`.
pub fn beta(eps: f64, d: f64) -> f64 {
    let e2 = eps * eps * d;
    (1.0 + (1.0 + 4.0 * e2).sqrt()) / (2.0 * e2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveParams {
    pub c: f64,
    pub epsilon: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub lambda0: f64,
    pub lambda_eps: f64,
    pub v1_eps: Vec<f64>,
    /// Weight exponent of the norm `max(sup|y|, sup_{t<=0} e^{-mu t}|y(t)|)`.
    pub mu: f64,
    pub diffusion: Vec<f64>,
    /// Row-major `Df(0)(e^{lambda(eps) .})`, mapping the tail vector to the
    /// reaction part of the left-tail source.
    pub tail_symbol: Vec<f64>,
}

impl WaveParams {
    /// `sqrt(1 + 4 eps^2 d_i) = eps^2 d_i (beta_i - alpha_i)`.
    pub fn wronskian(&self, i: usize) -> f64 {
        (1.0 + 4.0 * self.epsilon * self.epsilon * self.diffusion[i]).sqrt()
    }
}

/// Kernel exponents, `lambda(eps)`, `v1(eps)` and the weight `mu` for speed `c`.
pub fn wave_params(model: &dyn Model, c: f64, spectrum: &SpectrumReport, tol: &Tolerances) -> Result<WaveParams> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::InvalidModel(format!("speed must be positive, got {c}")));
    }
    let eps = 1.0 / c;
    let lin = linearization_at_zero(model);
    let d = model.diffusion().to_vec();
    let base = CharProblem::with_diffusion(lin.clone(), 0.0, d.clone())?;
    let lambda0 = spectrum.lambda0;
    let (lambda_eps, v1_eps) = match spectrum.at_epsilon(eps) {
        Some(p) => (p.1, p.2.clone()),
        None => {
            let (l, v, _) = root_continuation(&base.at_epsilon(eps)?, lambda0, tol)?;
            (l, v)
        }
    };
    let mu = choose_mu(&base, lambda0, tol)?;
    let sym = lin.symbol(Complex64::new(lambda_eps, 0.0));
    let n = d.len();
    let tail_symbol = (0..n * n).map(|k| sym[(k / n, k % n)].re).collect();
    Ok(WaveParams {
        c,
        epsilon: eps,
        alpha: d.iter().map(|&di| alpha(eps, di)).collect(),
        beta: d.iter().map(|&di| beta(eps, di)).collect(),
        lambda0,
        lambda_eps,
        v1_eps,
        mu,
        diffusion: d,
        tail_symbol,
    })
}

/// `lambda0 / 2`, moved if a characteristic root has real part within
/// `0.05 lambda0` of it.
fn choose_mu(base: &CharProblem, lambda0: f64, tol: &Tolerances) -> Result<f64> {
    let y = 2.0 * base.kernel().norm() + 1.0;
    let band = 0.05 * lambda0;
    for frac in [0.5, 0.4, 0.6, 0.3, 0.7, 0.2, 0.8] {
        let mu = frac * lambda0;
        let rect = Rect::new(mu - band, mu + band, -y, y);
        if count_roots_rect(base, &rect, tol)? == 0 {
            return Ok(mu);
        }
    }
    Err(Error::StripCount { count: 1, epsilon: 0.0 })
}

/// Left tail `amplitude e^{lambda t} v` used for `t < T-`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeftTail {
    pub amplitude: f64,
    pub lambda: f64,
    pub v: Vec<f64>,
}

impl LeftTail {
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let a = self.amplitude * (self.lambda * t).exp();
        for (o, v) in out.iter_mut().zip(&self.v) {
            *o = a * v;
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProfileDiagnostics {
    pub iterations: usize,
    pub contraction_ratios: Vec<f64>,
    pub final_change: f64,
    pub converged: bool,
    /// Relative mismatch between the tail and `psi(T-)`.
    pub tail_mismatch: f64,
    /// `|psi(T+) - K|`.
    pub right_gap: f64,
}

/// Grid function `psi` on `[T-, T+]` with tails on both sides.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub(crate) dim: usize,
    pub(crate) t0: f64,
    pub(crate) h: f64,
    pub(crate) psi: Vec<f64>,
    pub(crate) dpsi: Vec<f64>,
    pub(crate) tail: LeftTail,
    pub(crate) k: Vec<f64>,
    pub c: f64,
    pub diagnostics: ProfileDiagnostics,
}

impl WaveProfile {
    /// Sample `f` and `df` on `n` nodes `t0 + k h`.
    pub fn from_fn<F, D>(c: f64, t0: f64, h: f64, n: usize, tail: LeftTail, k: Vec<f64>, f: F, df: D) -> Result<Self>
    where
        F: Fn(f64, &mut [f64]),
        D: Fn(f64, &mut [f64]),
    {
        let dim = k.len();
        if dim == 0 || tail.v.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: tail.v.len() });
        }
        if n < 2 || !(h > 0.0) {
            return Err(Error::InvalidModel("profile grid needs at least two nodes and a positive step".into()));
        }
        let mut psi = vec![0.0; n * dim];
        let mut dpsi = vec![0.0; n * dim];
        for j in 0..n {
            let t = t0 + j as f64 * h;
            f(t, &mut psi[j * dim..(j + 1) * dim]);
            df(t, &mut dpsi[j * dim..(j + 1) * dim]);
        }
        Ok(Self { dim, t0, h, psi, dpsi, tail, k, c, diagnostics: ProfileDiagnostics::default() })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.psi.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn t_minus(&self) -> f64 {
        self.t0
    }

    pub fn t_plus(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn time(&self, j: usize) -> f64 {
        self.t0 + j as f64 * self.h
    }

    pub fn value(&self, j: usize) -> &[f64] {
        &self.psi[j * self.dim..(j + 1) * self.dim]
    }

    pub fn deriv(&self, j: usize) -> &[f64] {
        &self.dpsi[j * self.dim..(j + 1) * self.dim]
    }

    pub fn tail(&self) -> &LeftTail {
        &self.tail
    }

    pub fn equilibrium(&self) -> &[f64] {
        &self.k
    }

    /// Overwrite one node (test hook).
    pub fn set_value(&mut self, j: usize, value: &[f64]) {
        self.psi[j * self.dim..(j + 1) * self.dim].copy_from_slice(value);
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let x = (t - self.t0) / self.h;
        let j = (x.floor().max(0.0) as usize).min(self.len() - 2);
        (j, (t - self.time(j)) / self.h)
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if t < self.t0 {
            self.tail.eval_into(t, out);
        } else if t >= self.t_plus() {
            out.copy_from_slice(&self.k);
        } else {
            let (j, s) = self.locate(t);
            let (y0, y1, d0, d1) = (self.value(j), self.value(j + 1), self.deriv(j), self.deriv(j + 1));
            for i in 0..self.dim {
                out[i] = hermite(s, self.h, y0[i], y1[i], d0[i], d1[i]);
            }
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn deriv_into(&self, t: f64, out: &mut [f64]) {
        if t < self.t0 {
            self.tail.eval_into(t, out);
            out.iter_mut().for_each(|x| *x *= self.tail.lambda);
        } else if t >= self.t_plus() {
            out.fill(0.0);
        } else {
            let (j, s) = self.locate(t);
            let (y0, y1, d0, d1) = (self.value(j), self.value(j + 1), self.deriv(j), self.deriv(j + 1));
            for i in 0..self.dim {
                out[i] = hermite_deriv(s, self.h, y0[i], y1[i], d0[i], d1[i]);
            }
        }
    }

    pub fn segment_at(&self, t: f64) -> ProfileSegment<'_> {
        ProfileSegment { profile: self, t }
    }

    /// CSV with columns `t,psi_1..psi_N,dpsi_1..dpsi_N`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> =
            std::iter::once("t".to_string()).chain(numbered("psi", self.dim)).chain(numbered("dpsi", self.dim)).collect();
        let rows = (0..self.len()).map(|j| {
            let mut row = vec![self.time(j)];
            row.extend_from_slice(self.value(j));
            row.extend_from_slice(self.deriv(j));
            row
        });
        write_csv(path, &header, rows)
    }
}

pub struct ProfileSegment<'a> {
    profile: &'a WaveProfile,
    t: f64,
}

impl Segment for ProfileSegment<'_> {
    fn dim(&self) -> usize {
        self.profile.dim
    }
    fn span(&self) -> f64 {
        f64::INFINITY
    }
    fn eval_into(&self, theta: f64, out: &mut [f64]) {
        self.profile.eval_into(self.t + theta, out)
    }
}
