//! Method of steps with classical RK4 and Hermite dense output.

use super::trajectory::{Seed, Trajectory};
use crate::error::{Error, Result};
use crate::model::{HistorySegment, Model, Segment};
use crate::numerics::max_norm;

const BLOW_UP: f64 = 1e8;

/// History window for an RK stage at `t_n + c h`. Times up to `t_n` come
/// from the trajectory; times inside the current step from the quadratic
/// through `u_n`, slope `k1` and the stage value.
struct StageSegment<'a> {
    traj: &'a Trajectory,
    t: f64,
    t_n: f64,
    u_n: &'a [f64],
    k1: &'a [f64],
    stage: &'a [f64],
}

impl Segment for StageSegment<'_> {
    fn dim(&self) -> usize {
        self.traj.dim()
    }
    fn span(&self) -> f64 {
        f64::INFINITY
    }
    fn eval_into(&self, theta: f64, out: &mut [f64]) {
        let s = self.t + theta;
        let span = self.t - self.t_n;
        if s <= self.t_n || span <= 0.0 {
            self.traj.eval_into(s, out);
            return;
        }
        let sigma = s - self.t_n;
        let r = (sigma / span) * (sigma / span);
        for i in 0..out.len() {
            let curv = self.stage[i] - self.u_n[i] - self.k1[i] * span;
            out[i] = self.u_n[i] + self.k1[i] * sigma + curv * r;
        }
    }
}

/// Stepper that grows a [`Trajectory`] one RK4 step at a time.
pub struct Integrator<'m> {
    model: &'m dyn Model,
    traj: Trajectory,
    // slope at the newest node is provisional until the next step starts
    provisional: bool,
}

impl<'m> Integrator<'m> {
    pub fn new(model: &'m dyn Model, initial: HistorySegment, seed: Option<Seed>, t_start: f64, h: f64) -> Result<Self> {
        let n = model.dim();
        if initial.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: initial.dim() });
        }
        let tau = model.tau();
        if (initial.tau() - tau).abs() > 1e-9 * (1.0 + tau) {
            return Err(Error::SegmentTooShort { span: initial.tau(), tau });
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::InvalidModel(format!("step must be positive, got {h}")));
        }
        if tau > 0.0 && h > tau {
            return Err(Error::StepTooLarge { h, tau });
        }
        let u0 = initial.eval(0.0);
        let mut d0 = vec![0.0; n];
        initial.deriv_into(0.0, &mut d0);
        let traj = Trajectory {
            dim: n,
            t_start,
            h,
            values: u0,
            derivs: d0,
            history: initial,
            seed,
            converged_to_k: None,
        };
        Ok(Self { model, traj, provisional: true })
    }

    pub fn trajectory(&self) -> &Trajectory {
        &self.traj
    }

    pub fn into_trajectory(mut self) -> Trajectory {
        self.fix_last_slope();
        self.traj
    }

    pub fn t(&self) -> f64 {
        self.traj.t_end()
    }

    pub fn current(&self) -> &[f64] {
        self.traj.last_value()
    }

    fn fix_last_slope(&mut self) {
        if self.provisional {
            let t = self.traj.t_end();
            let mut f = vec![0.0; self.traj.dim];
            self.model.eval(&self.traj.segment_at(t), &mut f);
            let k = self.traj.len() - 1;
            self.traj.derivs[k * self.traj.dim..].copy_from_slice(&f);
            self.provisional = false;
        }
    }

    pub fn step(&mut self) -> Result<()> {
        let n = self.traj.dim;
        let h = self.traj.h;
        let t_n = self.traj.t_end();
        let last = self.traj.len() - 1;
        if self.provisional && last > 0 {
            // slope of the quadratic through u_{n-1}, d_{n-1}, u_n
            for i in 0..n {
                let (a, b, da) = (self.traj.values[(last - 1) * n + i], self.traj.values[last * n + i], self.traj.derivs[(last - 1) * n + i]);
                self.traj.derivs[last * n + i] = 2.0 * (b - a) / h - da;
            }
        }
        let u_n = self.traj.last_value().to_vec();
        let mut k1 = vec![0.0; n];
        self.model.eval(&self.traj.segment_at(t_n), &mut k1);
        self.traj.derivs[last * n..].copy_from_slice(&k1);
        self.provisional = false;

        let mut stage = vec![0.0; n];
        let mut k2 = vec![0.0; n];
        let mut k3 = vec![0.0; n];
        let mut k4 = vec![0.0; n];
        let eval_stage = |c: f64, slope: &[f64], out: &mut [f64], stage: &mut Vec<f64>| {
            for i in 0..n {
                stage[i] = u_n[i] + c * h * slope[i];
            }
            let seg = StageSegment { traj: &self.traj, t: t_n + c * h, t_n, u_n: &u_n, k1: &k1, stage };
            self.model.eval(&seg, out);
        };
        eval_stage(0.5, &k1, &mut k2, &mut stage);
        eval_stage(0.5, &k2, &mut k3, &mut stage);
        eval_stage(1.0, &k3, &mut k4, &mut stage);
        let next: Vec<f64> = (0..n).map(|i| u_n[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect();
        let norm = max_norm(&next);
        if !norm.is_finite() || norm > BLOW_UP {
            return Err(Error::BlowUp { t: t_n + h, norm });
        }
        self.traj.values.extend_from_slice(&next);
        self.traj.derivs.extend_from_slice(&k4);
        self.provisional = true;
        Ok(())
    }
}

/// Integrate `u'(t) = f(u_t)` from `t = 0` with history `initial` on
/// `[-tau, 0]` up to (at least) `t_end`.
pub fn integrate_dde(model: &dyn Model, initial: &HistorySegment, t_end: f64, h: f64) -> Result<Trajectory> {
    let mut it = Integrator::new(model, initial.clone(), None, 0.0, h)?;
    let steps = (t_end / h - 1e-9).ceil().max(0.0) as usize;
    for _ in 0..steps {
        it.step()?;
    }
    Ok(it.into_trajectory())
}
