use std::path::Path;

use rayon::prelude::*;
use serde::Serialize;

use super::PdeConfig;
use crate::error::{Error, Result};
use crate::model::{Model, Segment};
use crate::output::{numbered, write_csv, write_json};

const BLOCK: usize = 256;
const BLOW_UP: f64 = 1e8;

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    /// Point-major values `u_i(x_j)` at index `j * dim + i`.
    pub values: Vec<f64>,
}

/// Stored snapshots of a run on the grid `x_j = j dx`, `j = 0..nx`.
#[derive(Debug, Clone)]
pub struct FieldRecord {
    pub dim: usize,
    pub nx: usize,
    pub dx: f64,
    pub dt: f64,
    pub diffusion: Vec<f64>,
    pub snapshots: Vec<Snapshot>,
    /// Smallest value seen at any step.
    pub min_value: f64,
}

#[derive(Serialize)]
struct Manifest<'a> {
    times: Vec<f64>,
    dx: f64,
    dt: f64,
    bc: &'a str,
    d: &'a [f64],
    files: Vec<String>,
}

impl FieldRecord {
    pub fn x(&self, j: usize) -> f64 {
        j as f64 * self.dx
    }

    pub fn length(&self) -> f64 {
        self.x(self.nx - 1)
    }

    /// One CSV per snapshot (`x,u_1..u_N`) plus `manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let header: Vec<String> = std::iter::once("x".to_string()).chain(numbered("u", self.dim)).collect();
        let mut files = Vec::with_capacity(self.snapshots.len());
        for (k, snap) in self.snapshots.iter().enumerate() {
            let name = format!("snapshot_{k:04}.csv");
            let rows = (0..self.nx).map(|j| {
                let mut row = Vec::with_capacity(1 + self.dim);
                row.push(self.x(j));
                row.extend_from_slice(&snap.values[j * self.dim..(j + 1) * self.dim]);
                row
            });
            write_csv(&dir.join(&name), &header, rows)?;
            files.push(name);
        }
        let manifest = Manifest {
            times: self.snapshots.iter().map(|s| s.t).collect(),
            dx: self.dx,
            dt: self.dt,
            bc: "neumann",
            d: &self.diffusion,
            files,
        };
        write_json(&dir.join("manifest.json"), &manifest)
    }
}

/// Trailing time slices `t_n - k dt`, `k = 0..len`, newest first.
struct Ring {
    slices: Vec<Vec<f64>>,
    head: usize,
    dt: f64,
}

impl Ring {
    fn slice(&self, k: usize) -> &[f64] {
        &self.slices[(self.head + k) % self.slices.len()]
    }

    fn push(&mut self, values: Vec<f64>) {
        let n = self.slices.len();
        self.head = (self.head + n - 1) % n;
        self.slices[self.head] = values;
    }

    /// Cubic Lagrange interpolation in time at `t_n - lag` for the values of
    /// point-major block `[start, start + out.len())`.
    fn interp(&self, start: usize, lag: f64, out: &mut [f64]) {
        let p = lag / self.dt;
        let last = self.slices.len() - 4;
        let m0 = (p.floor() as isize - 1).clamp(0, last as isize) as usize;
        let q = p - m0 as f64;
        let w = [
            -(q - 1.0) * (q - 2.0) * (q - 3.0) / 6.0,
            q * (q - 2.0) * (q - 3.0) / 2.0,
            -q * (q - 1.0) * (q - 3.0) / 2.0,
            q * (q - 1.0) * (q - 2.0) / 6.0,
        ];
        out.fill(0.0);
        for (m, wm) in w.iter().enumerate() {
            let s = &self.slice(m0 + m)[start..start + out.len()];
            for (o, v) in out.iter_mut().zip(s) {
                *o += wm * v;
            }
        }
    }
}

/// History at one grid point seen from a Runge–Kutta stage `ahead` past
/// `t_n`: linear between `u_n` and the stage value on `[t_n, t_n + ahead]`,
/// cubic in the stored slices before `t_n`.
struct PointSegment<'a> {
    ring: &'a Ring,
    start: usize,
    base: &'a [f64],
    stage: &'a [f64],
    ahead: f64,
}

impl Segment for PointSegment<'_> {
    fn dim(&self) -> usize {
        self.base.len()
    }
    fn span(&self) -> f64 {
        f64::INFINITY
    }
    fn eval_into(&self, theta: f64, out: &mut [f64]) {
        let r = self.ahead + theta;
        if r >= 0.0 {
            if self.ahead > 0.0 {
                let w = r / self.ahead;
                for ((o, b), s) in out.iter_mut().zip(self.base).zip(self.stage) {
                    *o = b + w * (s - b);
                }
            } else {
                out.copy_from_slice(self.stage);
            }
        } else {
            self.ring.interp(self.start, -r, out);
        }
    }
}

struct Stepper<'a> {
    model: &'a dyn Model,
    dim: usize,
    nx: usize,
    inv_dx2: f64,
    diffusion: Vec<f64>,
}

impl Stepper<'_> {
    /// `D u_xx + f` at stage values `stage`, zero-flux ends via mirrored
    /// ghost points.
    fn rhs(&self, ring: &Ring, stage: &[f64], ahead: f64, out: &mut [f64]) {
        let (dim, nx) = (self.dim, self.nx);
        let base = ring.slice(0);
        out.par_chunks_mut(BLOCK * dim).enumerate().for_each(|(b, chunk)| {
            let mut f = vec![0.0; dim];
            for (local, o) in chunk.chunks_mut(dim).enumerate() {
                let j = b * BLOCK + local;
                let left = if j == 0 { 1 } else { j - 1 };
                let right = if j + 1 == nx { nx - 2 } else { j + 1 };
                let seg = PointSegment {
                    ring,
                    start: j * dim,
                    base: &base[j * dim..(j + 1) * dim],
                    stage: &stage[j * dim..(j + 1) * dim],
                    ahead,
                };
                self.model.eval(&seg, &mut f);
                for i in 0..dim {
                    let lap = (stage[left * dim + i] - 2.0 * stage[j * dim + i] + stage[right * dim + i]) * self.inv_dx2;
                    o[i] = self.diffusion[i] * lap + f[i];
                }
            }
        });
    }
}

fn axpy(base: &[f64], a: f64, k: &[f64], out: &mut [f64]) {
    out.par_iter_mut().zip(base.par_iter().zip(k.par_iter())).for_each(|(o, (b, k))| *o = b + a * k);
}

/// Evolve from the history `initial(theta, x, out)` on `[0, length]` to
/// `cfg.t_end` with RK4 in time and centred differences in space.
pub fn simulate(
    model: &dyn Model,
    initial: &(dyn Fn(f64, f64, &mut [f64]) + Sync),
    length: f64,
    cfg: &PdeConfig,
) -> Result<FieldRecord> {
    cfg.check(model)?;
    let dim = model.dim();
    let nx = (length / cfg.dx).round() as usize + 1;
    if nx < 3 {
        return Err(Error::Config(format!("domain length {length} holds fewer than 3 grid points")));
    }
    let dt = cfg.dt;
    let depth = (model.tau() / dt).ceil() as usize + 4;
    let slice_at = |theta: f64| -> Vec<f64> {
        let mut v = vec![0.0; nx * dim];
        v.par_chunks_mut(dim).enumerate().for_each(|(j, o)| initial(theta, j as f64 * cfg.dx, o));
        v
    };
    let mut ring = Ring { slices: (0..depth).map(|k| slice_at(-(k as f64) * dt)).collect(), head: 0, dt };
    let stepper = Stepper { model, dim, nx, inv_dx2: 1.0 / (cfg.dx * cfg.dx), diffusion: model.diffusion().to_vec() };

    let steps = (cfg.t_end / dt).round() as usize;
    let mut min_value = ring.slice(0).iter().copied().fold(f64::INFINITY, f64::min);
    let mut snapshots = vec![Snapshot { t: 0.0, values: ring.slice(0).to_vec() }];
    let size = nx * dim;
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; size], vec![0.0; size], vec![0.0; size], vec![0.0; size]);
    let mut stage = vec![0.0; size];
    for n in 0..steps {
        let un = ring.slice(0).to_vec();
        stepper.rhs(&ring, &un, 0.0, &mut k1);
        axpy(&un, 0.5 * dt, &k1, &mut stage);
        stepper.rhs(&ring, &stage, 0.5 * dt, &mut k2);
        axpy(&un, 0.5 * dt, &k2, &mut stage);
        stepper.rhs(&ring, &stage, 0.5 * dt, &mut k3);
        axpy(&un, dt, &k3, &mut stage);
        stepper.rhs(&ring, &stage, dt, &mut k4);
        let mut next = un;
        next.par_iter_mut().enumerate().for_each(|(m, u)| *u += dt / 6.0 * (k1[m] + 2.0 * (k2[m] + k3[m]) + k4[m]));
        let t = (n + 1) as f64 * dt;
        let (lo, hi) = next.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        if !(lo.is_finite() && hi.is_finite()) || lo.abs().max(hi.abs()) > BLOW_UP {
            return Err(Error::BlowUp { t, norm: lo.abs().max(hi.abs()) });
        }
        min_value = min_value.min(lo);
        let store = (n + 1) % cfg.snapshot_stride == 0 || n + 1 == steps;
        if store {
            snapshots.push(Snapshot { t, values: next.clone() });
        }
        ring.push(next);
    }
    Ok(FieldRecord { dim, nx, dx: cfg.dx, dt, diffusion: stepper.diffusion, snapshots, min_value })
}
