//! Evidence checks for (H1)–(H3). None of these are proofs: (H2)(ii) and
//! (H3) are falsification-style samplers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::history::{ConstSegment, FnSegment, HistorySegment, Segment};
use super::Model;
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::heteroclinic::integrate_dde;
use crate::numerics::max_norm;

#[derive(Debug, Clone, Serialize)]
pub struct H1Report {
    pub ok: bool,
    pub k_positive: bool,
    pub residual_zero: f64,
    pub residual_k: f64,
    pub scale: f64,
}

/// `f(0) = f(K) = 0` with `K > 0`.
pub fn check_h1(model: &dyn Model, tol: &Tolerances) -> H1Report {
    let n = model.dim();
    let k = model.equilibrium();
    let mut out = vec![0.0; n];
    model.eval(&ConstSegment(vec![0.0; n]), &mut out);
    let residual_zero = max_norm(&out);
    model.eval(&ConstSegment(k.to_vec()), &mut out);
    let residual_k = max_norm(&out);
    let half: Vec<f64> = k.iter().map(|x| 0.5 * x).collect();
    model.eval(&ConstSegment(half), &mut out);
    let scale = max_norm(&out);
    let k_positive = k.iter().all(|&x| x > 0.0);
    let bound = tol.eval_tol * (1.0 + scale);
    let ok = k_positive && residual_zero.is_finite() && residual_k.is_finite() && residual_zero <= bound && residual_k <= bound;
    H1Report { ok, k_positive, residual_zero, residual_k, scale }
}

/// Search for `beta` with `f_i(phi) + beta phi_i(0) >= -tol` over sampled
/// segments `0 <= phi <= m`. Returns `None` when a sample needs
/// `beta > beta_max` or fails with `phi_i(0) = 0`.
pub fn positivity_margin(model: &dyn Model, m: f64, tol: &Tolerances, seed: u64) -> Result<Option<f64>> {
    if !(m.is_finite() && m > 0.0) {
        return Err(Error::InvalidModel(format!("positivity bound M must be positive, got {m}")));
    }
    let n = model.dim();
    let tau = model.tau();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut needed: f64 = 0.0;
    let mut f = vec![0.0; n];
    let mut now = vec![0.0; n];
    for k in 0..tol.positivity_samples {
        let shape = SampleShape::draw(&mut rng, n, k, tau > 0.0);
        let seg = shape.segment(m, tau);
        model.eval(&seg, &mut f);
        seg.eval_into(0.0, &mut now);
        for i in 0..n {
            let slack = tol.eval_tol * (1.0 + f[i].abs());
            if now[i] > 0.0 {
                needed = needed.max(-(f[i] + slack) / now[i]);
            } else if f[i] < -slack {
                return Ok(None);
            }
        }
        if needed > tol.beta_max {
            return Ok(None);
        }
    }
    Ok(Some(needed.max(f64::MIN_POSITIVE)))
}

/// Sampled segment families on `[-tau, 0]` with values in `[0, m]`.
#[derive(Debug, Clone)]
struct SampleShape {
    kind: usize,
    // per component: (level a, level b, frequency, phase)
    params: Vec<(f64, f64, f64, f64)>,
}

impl SampleShape {
    fn draw(rng: &mut ChaCha8Rng, n: usize, k: usize, delayed: bool) -> Self {
        let kind = if delayed { k % 5 } else { 0 };
        let params = (0..n)
            .map(|_| {
                let mut a: f64 = rng.gen();
                if rng.gen_bool(0.15) {
                    a = 0.0;
                } else if rng.gen_bool(0.15) {
                    a = 1.0;
                }
                (a, rng.gen(), rng.gen_range(0.5..12.0), rng.gen_range(0.0..std::f64::consts::TAU))
            })
            .collect();
        Self { kind, params }
    }

    fn segment(&self, m: f64, tau: f64) -> FnSegment<impl Fn(f64, &mut [f64]) + '_> {
        let tau_eff = tau.max(1e-300);
        FnSegment::new(self.params.len(), tau, move |theta: f64, out: &mut [f64]| {
            let s = (-theta / tau_eff).clamp(0.0, 1.0); // 0 at theta = 0, 1 at -tau
            for (o, &(a, b, w, p)) in out.iter_mut().zip(&self.params) {
                *o = m * match self.kind {
                    0 => a,
                    1 => a + (b - a) * s,
                    2 => a * (0.5 + 0.5 * (w * s + p).sin()),
                    3 => b * s,
                    _ => (a * (1.0 - s) + b * s) * (0.75 + 0.25 * (w * s).cos()),
                };
            }
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct H3Report {
    pub runs: usize,
    pub converged: usize,
    pub max_final_distance: f64,
    pub final_distances: Vec<f64>,
    pub horizon: f64,
    pub ok: bool,
}

/// Integrate random positive histories with `phi(0) > 0` and check that each
/// ends within `h3_tol` of `K`.
pub fn h3_evidence(model: &dyn Model, tol: &Tolerances, seed: u64) -> Result<H3Report> {
    let n = model.dim();
    let tau = model.tau();
    let upper = model.upper_box();
    let horizon = tol.h3_horizon * tau.max(1.0);
    let h = tol.het_step.unwrap_or(if tau > 0.0 { tau / 40.0 } else { 0.01 });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shapes: Vec<SampleShape> = (0..tol.h3_runs).map(|k| SampleShape::draw(&mut rng, n, k, tau > 0.0)).collect();
    let k = model.equilibrium().to_vec();
    let distances: Vec<f64> = shapes
        .par_iter()
        .map(|shape| {
            let raw = shape.segment(1.0, tau);
            let hist = HistorySegment::from_fn(
                n,
                tau,
                64,
                |theta, out| {
                    raw.eval_into(theta, out);
                    let floor = if theta == 0.0 { 0.05 } else { 0.0 };
                    for (o, u) in out.iter_mut().zip(&upper) {
                        *o = u * (*o).max(floor);
                    }
                },
                |_, out| out.fill(0.0),
            );
            match integrate_dde(model, &hist, horizon, h) {
                Ok(traj) => {
                    let last = traj.last_value();
                    last.iter().zip(&k).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
                }
                Err(_) => f64::INFINITY,
            }
        })
        .collect();
    let converged = distances.iter().filter(|&&d| d <= tol.h3_tol).count();
    let max_final_distance = distances.iter().copied().fold(0.0, f64::max);
    Ok(H3Report { runs: distances.len(), converged, max_final_distance, final_distances: distances, horizon, ok: converged == tol.h3_runs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelayKernel, LinearModel, LogisticDistributed};

    fn linear(weight: f64, theta: f64, k: f64) -> LinearModel {
        LinearModel::new("lin", DelayKernel::point_mass(1.0, theta, weight).unwrap(), vec![k], vec![1.0]).unwrap()
    }

    #[test]
    fn h1_passes_for_logistic_and_fails_for_bad_k() {
        let tol = Tolerances::default();
        let m = LogisticDistributed::fisher_kpp_delay(1.0, 1.0, 1.0).unwrap();
        let r = check_h1(&m, &tol);
        assert!(r.ok, "{r:?}");
        let bad = linear(1.0, 0.0, 0.5);
        let r = check_h1(&bad, &tol);
        assert!(!r.ok);
        assert!((r.residual_k - 0.5).abs() < 1e-15);
        let r = check_h1(&linear(-1.0, 0.0, -1.0), &tol);
        assert!(!r.k_positive && !r.ok);
    }

    #[test]
    fn margin_for_linear_decay_is_exact() {
        let tol = Tolerances::default();
        let a = 0.75;
        let beta = positivity_margin(&linear(-a, 0.0, 0.0), 3.0, &tol, 1).unwrap().unwrap();
        assert!((beta - a).abs() < 1e-9, "{beta}");
    }

    #[test]
    fn margin_for_logistic_is_within_analytic_bound() {
        let tol = Tolerances::default();
        let m = LogisticDistributed::fisher_kpp_delay(1.0, 1.0, 1.0).unwrap();
        let beta = positivity_margin(&m, 2.0, &tol, 7).unwrap().unwrap();
        // f(phi) >= phi(0) (1 - |L| M) gives beta = 1; 2 suffices
        assert!(beta <= 2.0 && beta > 0.5, "{beta}");
    }

    #[test]
    fn margin_fails_for_pure_delayed_decay() {
        let tol = Tolerances::default();
        assert_eq!(positivity_margin(&linear(-1.0, -1.0, 0.0), 1.0, &tol, 3).unwrap(), None);
        assert!(positivity_margin(&linear(-1.0, -1.0, 0.0), 0.0, &tol, 3).is_err());
    }
}
