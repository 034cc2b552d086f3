use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{HistorySegment, Segment};
use crate::numerics::{hermite, hermite_deriv};
use crate::output::{numbered, write_csv};

/// Exponential seed `c0 e^{lambda0 (t - t_ref)} v`; also the analytic
/// extension of a heteroclinic to the left of its grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seed {
    pub c0: f64,
    pub lambda0: f64,
    pub v: Vec<f64>,
    pub t_ref: f64,
}

impl Seed {
    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        let a = self.c0 * (self.lambda0 * (t - self.t_ref)).exp();
        for (o, v) in out.iter_mut().zip(&self.v) {
            *o = a * v;
        }
    }
}

/// Solution on a uniform grid `t_k = t_start + k h` with Hermite dense
/// output. Before `t_start` it is the initial history (or the seed, when
/// present); after the last node it is held constant.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub(crate) dim: usize,
    pub(crate) t_start: f64,
    pub(crate) h: f64,
    pub(crate) values: Vec<f64>,
    pub(crate) derivs: Vec<f64>,
    pub(crate) history: HistorySegment,
    pub(crate) seed: Option<Seed>,
    /// Distance to `K` reached when the run was declared converged.
    pub converged_to_k: Option<f64>,
}

impl Trajectory {
    /// Build from node data; the history before the first node is constant.
    pub fn from_nodes(t_start: f64, h: f64, values: &[Vec<f64>], derivs: &[Vec<f64>]) -> Result<Self> {
        let dim = values.first().map(Vec::len).unwrap_or(0);
        if dim == 0 || values.len() != derivs.len() {
            return Err(Error::InvalidModel("trajectory needs matching, non-empty values and derivatives".into()));
        }
        if values.iter().chain(derivs).any(|v| v.len() != dim) {
            return Err(Error::DimensionMismatch { expected: dim, got: 0 });
        }
        if !(h > 0.0) {
            return Err(Error::InvalidModel(format!("grid step must be positive, got {h}")));
        }
        Ok(Self {
            dim,
            t_start,
            h,
            values: values.concat(),
            derivs: derivs.concat(),
            history: HistorySegment::constant(0.0, &values[0]),
            seed: None,
            converged_to_k: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step(&self) -> f64 {
        self.h
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.time(self.len() - 1)
    }

    pub fn time(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.h
    }

    pub fn value(&self, k: usize) -> &[f64] {
        &self.values[k * self.dim..(k + 1) * self.dim]
    }

    pub fn deriv(&self, k: usize) -> &[f64] {
        &self.derivs[k * self.dim..(k + 1) * self.dim]
    }

    pub fn last_value(&self) -> &[f64] {
        self.value(self.len() - 1)
    }

    pub fn seed(&self) -> Option<&Seed> {
        self.seed.as_ref()
    }

    pub fn history(&self) -> &HistorySegment {
        &self.history
    }

    /// Overwrite one node (test hook for positivity checks).
    pub fn set_value(&mut self, k: usize, value: &[f64]) {
        self.values[k * self.dim..(k + 1) * self.dim].copy_from_slice(value);
    }

    /// Time-translate by `dt`: the new trajectory at `t + dt` equals the old
    /// one at `t`.
    pub fn shifted(mut self, dt: f64) -> Self {
        self.t_start += dt;
        if let Some(seed) = &mut self.seed {
            seed.t_ref += dt;
        }
        self
    }

    fn locate(&self, t: f64) -> (usize, f64) {
        let n = self.len();
        let x = (t - self.t_start) / self.h;
        let k = (x.floor().max(0.0) as usize).min(n.saturating_sub(2));
        (k, t - self.time(k))
    }

    pub fn eval_into(&self, t: f64, out: &mut [f64]) {
        if t < self.t_start {
            match &self.seed {
                Some(seed) => seed.eval_into(t, out),
                None => self.history.eval_into((t - self.t_start).max(-self.history.tau()), out),
            }
            return;
        }
        let n = self.len();
        if n == 1 || t >= self.t_end() {
            out.copy_from_slice(self.last_value());
            return;
        }
        let (k, s) = self.locate(t);
        let (y0, y1, d0, d1) = (self.value(k), self.value(k + 1), self.deriv(k), self.deriv(k + 1));
        for i in 0..self.dim {
            out[i] = hermite(s / self.h, self.h, y0[i], y1[i], d0[i], d1[i]);
        }
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(t, &mut out);
        out
    }

    pub fn deriv_into(&self, t: f64, out: &mut [f64]) {
        if t < self.t_start {
            match &self.seed {
                Some(seed) => {
                    seed.eval_into(t, out);
                    out.iter_mut().for_each(|x| *x *= seed.lambda0);
                }
                None => self.history.deriv_into((t - self.t_start).max(-self.history.tau()), out),
            }
            return;
        }
        let n = self.len();
        if n == 1 || t >= self.t_end() {
            out.fill(0.0);
            return;
        }
        let (k, s) = self.locate(t);
        let (y0, y1, d0, d1) = (self.value(k), self.value(k + 1), self.deriv(k), self.deriv(k + 1));
        for i in 0..self.dim {
            out[i] = hermite_deriv(s / self.h, self.h, y0[i], y1[i], d0[i], d1[i]);
        }
    }

    /// The history window `theta -> u(t + theta)`.
    pub fn segment_at(&self, t: f64) -> TrajectorySegment<'_> {
        TrajectorySegment { traj: self, t }
    }

    /// CSV with columns `t,u_1..u_N,du_1..du_N`.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header: Vec<String> =
            std::iter::once("t".to_string()).chain(numbered("u", self.dim)).chain(numbered("du", self.dim)).collect();
        let rows = (0..self.len()).map(|k| {
            let mut row = Vec::with_capacity(1 + 2 * self.dim);
            row.push(self.time(k));
            row.extend_from_slice(self.value(k));
            row.extend_from_slice(self.deriv(k));
            row
        });
        write_csv(path, &header, rows)
    }
}

pub struct TrajectorySegment<'a> {
    traj: &'a Trajectory,
    t: f64,
}

impl Segment for TrajectorySegment<'_> {
    fn dim(&self) -> usize {
        self.traj.dim
    }
    fn span(&self) -> f64 {
        f64::INFINITY
    }
    fn eval_into(&self, theta: f64, out: &mut [f64]) {
        self.traj.eval_into(self.t + theta, out)
    }
}
