//! The heteroclinic connection `0 -> K` of `u'(t) = f(u_t)`, computed by
//! seeding on the unstable eigendirection and integrating forward.

mod integrate;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::{HistorySegment, Model};
use crate::numerics::{least_squares, linear_fit, max_norm};
use crate::spectrum::SpectrumReport;

pub use integrate::{integrate_dde, Integrator};
pub use trajectory::{Seed, Trajectory, TrajectorySegment};

/// Default step: `tau / 40`, or `0.01` without delay.
pub fn default_step(model: &dyn Model, tol: &Tolerances) -> f64 {
    tol.het_step.unwrap_or(if model.tau() > 0.0 { model.tau() / 40.0 } else { 0.01 })
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Seed `c0 e^{lambda0 theta} v`, integrate until `u` stays within `tol_k`
/// of `K` for a trailing window, then shift time so that `|u(0)| = |K| / 2`.
pub fn compute_heteroclinic(model: &dyn Model, spectrum: &SpectrumReport, tol: &Tolerances) -> Result<Trajectory> {
    if !spectrum.positive {
        return Err(Error::Hypothesis(format!("eigenvector {:?} is not positive", spectrum.eigvec)));
    }
    let n = model.dim();
    let k = model.equilibrium().to_vec();
    let k_norm = max_norm(&k);
    if !(k_norm > 0.0) {
        return Err(Error::Hypothesis("no positive equilibrium K".into()));
    }
    let tau = model.tau();
    let h = default_step(model, tol);
    let lambda0 = spectrum.lambda0;
    let v = spectrum.eigvec.clone();
    let c0 = tol.seed_amp * k_norm / max_norm(&v);
    let seed = Seed { c0, lambda0, v: v.clone(), t_ref: 0.0 };
    let samples = ((tau / h).ceil() as usize + 1).max(2);
    let history = HistorySegment::from_fn(
        n,
        tau,
        samples,
        |theta, out| seed.eval_into(theta, out),
        |theta, out| {
            seed.eval_into(theta, out);
            out.iter_mut().for_each(|x| *x *= lambda0);
        },
    );
    let mut it = Integrator::new(model, history, Some(seed), 0.0, h)?;
    let unit = tau.max(1.0);
    let t_max = tol.t_max * unit;
    let window = tol.k_window * unit;
    let upper = tol.box_factor * k_norm;
    let floor = -1e-12 * k_norm;
    let mut last_far = 0.0;
    loop {
        it.step()?;
        let t = it.t();
        let u = it.current();
        if u.iter().any(|&x| x < floor || x > upper) {
            return Err(Error::LeftBox { t, upper });
        }
        let d = distance(u, &k);
        if d > tol.tol_k {
            last_far = t;
        } else if t - last_far >= window {
            break;
        }
        if t >= t_max {
            return Err(Error::NoConvergenceToK { t_max, distance: d });
        }
    }
    let mut traj = it.into_trajectory();
    traj.converged_to_k = Some(distance(traj.last_value(), &k));
    let t_half = first_crossing(&traj, 0.5 * k_norm)
        .ok_or_else(|| Error::FitRejected("trajectory never reaches |K| / 2".into()))?;
    Ok(traj.shifted(-t_half))
}

/// First time the max-norm of `traj` reaches `level`, refined by bisection
/// on the dense output.
pub fn first_crossing(traj: &Trajectory, level: f64) -> Option<f64> {
    let k = (0..traj.len()).find(|&k| max_norm(traj.value(k)) >= level)?;
    if k == 0 {
        return Some(traj.time(0));
    }
    let (mut a, mut b) = (traj.time(k - 1), traj.time(k));
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if max_norm(&traj.eval(m)) >= level {
            b = m;
        } else {
            a = m;
        }
    }
    Some(0.5 * (a + b))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub lambda_fit: f64,
    pub c_fit: f64,
    pub v_fit: Vec<f64>,
    pub remainder_slope: f64,
    pub window: [f64; 2],
    pub nodes: usize,
}

/// Window `[t_start, t_lin]` on which `|u| <= linear_regime * |K|`.
pub fn linear_window(traj: &Trajectory, k_norm: f64, tol: &Tolerances) -> Option<(f64, f64)> {
    let end = first_crossing(traj, tol.linear_regime * k_norm)?;
    let start = traj.t_start();
    (end > start).then_some((start, end))
}

/// Fit `u(t) ~ c e^{lambda t} v` on the grid nodes of a window inside the
/// linear regime.
pub fn fit_decay(traj: &Trajectory, window: (f64, f64), k_norm: f64, tol: &Tolerances) -> Result<DecayFit> {
    let (a, b) = window;
    let nodes: Vec<usize> = (0..traj.len()).filter(|&k| traj.time(k) >= a && traj.time(k) <= b).collect();
    let ts: Vec<f64> = nodes.iter().map(|&k| traj.time(k)).collect();
    let vals: Vec<&[f64]> = nodes.iter().map(|&k| traj.value(k)).collect();
    if vals.iter().any(|u| max_norm(u) > tol.linear_regime * k_norm * (1.0 + 1e-9)) {
        return Err(Error::FitRejected("window leaves the linear regime".into()));
    }
    fit_exponential(&ts, &vals)
}

/// Exponential fit on samples `(t_k, u_k)`.
///
/// The exponent comes from `log|u| ~ a + lambda t + b e^{lambda t}`, which
/// absorbs the quadratic remainder; the amplitudes from
/// `u_i e^{-lambda t} ~ a_i + b_i e^{lambda t}`.
pub fn fit_exponential(ts: &[f64], vals: &[&[f64]]) -> Result<DecayFit> {
    if ts.len() < 50 {
        return Err(Error::FitRejected(format!("window holds {} nodes, need 50", ts.len())));
    }
    let window = [ts[0], ts[ts.len() - 1]];
    let norms: Vec<f64> = vals.iter().map(|u| max_norm(u)).collect();
    if norms.iter().any(|&x| !(x > 0.0)) || norms.windows(2).any(|w| w[1] < w[0] * (1.0 - 1e-9)) {
        return Err(Error::FitRejected("log-norm is not monotone on the window".into()));
    }
    let logs: Vec<f64> = norms.iter().map(|x| x.ln()).collect();
    let ones = vec![1.0; ts.len()];
    let mut lambda = linear_fit(ts, &logs).slope;
    for _ in 0..4 {
        let e: Vec<f64> = ts.iter().map(|t| (lambda * t).exp()).collect();
        let coef = least_squares(&[ones.clone(), ts.to_vec(), e], &logs).ok_or_else(|| Error::FitRejected("singular fit".into()))?;
        lambda = coef[1];
    }
    let n = vals[0].len();
    let e: Vec<f64> = ts.iter().map(|t| (lambda * t).exp()).collect();
    let mut amp = vec![0.0; n];
    for (i, a_i) in amp.iter_mut().enumerate() {
        let y: Vec<f64> = vals.iter().zip(ts).map(|(u, t)| u[i] * (-lambda * t).exp()).collect();
        let coef = least_squares(&[ones.clone(), e.clone()], &y).ok_or_else(|| Error::FitRejected("singular fit".into()))?;
        *a_i = coef[0];
    }
    let c_fit = max_norm(&amp);
    if !(c_fit > 0.0) {
        return Err(Error::FitRejected("zero amplitude".into()));
    }
    let v_fit: Vec<f64> = amp.iter().map(|x| x / c_fit).collect();
    let (mut rt, mut rl) = (Vec::new(), Vec::new());
    for (u, &t) in vals.iter().zip(ts) {
        let base = c_fit * (lambda * t).exp();
        let r = u.iter().zip(&v_fit).map(|(u, v)| (u - base * v).abs()).fold(0.0, f64::max);
        if r > 0.0 {
            rt.push(t);
            rl.push(r.ln());
        }
    }
    let remainder_slope = if rt.len() >= 2 { linear_fit(&rt, &rl).slope } else { f64::INFINITY };
    Ok(DecayFit { lambda_fit: lambda, c_fit, v_fit, remainder_slope, window, nodes: ts.len() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityReport {
    pub positive: bool,
    /// `(t, component, value)` of the first non-positive sample.
    pub first_violation: Option<(f64, usize, f64)>,
}

/// Strict positivity at every node and Hermite midpoint.
pub fn check_positive(traj: &Trajectory) -> PositivityReport {
    let mut mid = vec![0.0; traj.dim()];
    for k in 0..traj.len() {
        let mut probes = vec![(traj.time(k), traj.value(k).to_vec())];
        if k + 1 < traj.len() {
            let t = traj.time(k) + 0.5 * traj.step();
            traj.eval_into(t, &mut mid);
            probes.push((t, mid.clone()));
        }
        for (t, u) in probes {
            if let Some((i, &x)) = u.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
                return PositivityReport { positive: false, first_violation: Some((t, i, x)) };
            }
        }
    }
    PositivityReport { positive: true, first_violation: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Chemostat, LogisticDistributed};
    use crate::spectrum::spectrum_report;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn logistic_heteroclinic_matches_closed_form() {
        let m = LogisticDistributed::fisher_kpp_delay(1.0, 0.0, 1.0).unwrap();
        let s = spectrum_report(&m, &[], &tol()).unwrap();
        let tr = compute_heteroclinic(&m, &s, &tol()).unwrap();
        // gauge puts u(0) = 1/2, so t0 = 0
        let err = (0..tr.len()).map(|k| (tr.value(k)[0] - 1.0 / (1.0 + (-tr.time(k)).exp())).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
        assert!(check_positive(&tr).positive);
        let (a, b) = linear_window(&tr, 1.0, &tol()).unwrap();
        let fit = fit_decay(&tr, (a, b), 1.0, &tol()).unwrap();
        assert!((fit.lambda_fit - 1.0).abs() < 1e-3);
        assert!(fit.remainder_slope >= 1.9, "{}", fit.remainder_slope);
    }

    #[test]
    fn delayed_fisher_decay() {
        let m = LogisticDistributed::fisher_kpp_delay(1.0, 1.0, 1.0).unwrap();
        let s = spectrum_report(&m, &[], &tol()).unwrap();
        let tr = compute_heteroclinic(&m, &s, &tol()).unwrap();
        assert!(check_positive(&tr).positive);
        let (a, b) = linear_window(&tr, 1.0, &tol()).unwrap();
        let fit = fit_decay(&tr, (a, b), 1.0, &tol()).unwrap();
        assert!((fit.lambda_fit - 1.0).abs() < 1e-2, "{fit:?}");
        assert!(fit.remainder_slope >= 1.5, "{fit:?}");
        assert!(tr.converged_to_k.unwrap() <= 1e-8);
    }

    #[test]
    fn chemostat_heteroclinic_is_positive() {
        let m = Chemostat::new(1.0, 2.0, 0.2, 3.0, 1.0, 1.0, 1.0).unwrap();
        let s = spectrum_report(&m, &[], &tol()).unwrap();
        let tr = compute_heteroclinic(&m, &s, &tol()).unwrap();
        assert!(check_positive(&tr).positive);
        for k in 0..tr.len() {
            let (big_s, _) = m.to_original(tr.value(k));
            assert!(big_s > 0.0 && big_s < 2.0);
        }
        let d = distance(tr.last_value(), m.equilibrium());
        assert!(d <= 1e-8);
    }

    #[test]
    fn injected_negative_node_is_found() {
        let m = LogisticDistributed::fisher_kpp_delay(1.0, 0.0, 1.0).unwrap();
        let s = spectrum_report(&m, &[], &tol()).unwrap();
        let mut tr = compute_heteroclinic(&m, &s, &tol()).unwrap();
        tr.set_value(100, &[-1e-3]);
        let r = check_positive(&tr);
        assert!(!r.positive);
        let (t, i, _) = r.first_violation.unwrap();
        assert_eq!(i, 0);
        assert!(t <= tr.time(100) && t >= tr.time(99));
    }

    #[test]
    fn pure_exponential_fit_is_exact() {
        let (lam, c) = (0.8, 1e-4);
        let vals: Vec<Vec<f64>> = (0..200).map(|k| vec![c * (lam * (k as f64 * 0.02 - 10.0)).exp()]).collect();
        let ders: Vec<Vec<f64>> = vals.iter().map(|v| vec![lam * v[0]]).collect();
        let tr = Trajectory::from_nodes(-10.0, 0.02, &vals, &ders).unwrap();
        let fit = fit_decay(&tr, (-10.0, -6.0), 1.0, &tol()).unwrap();
        assert!((fit.lambda_fit - lam).abs() < 1e-10);
        assert!((fit.c_fit - c).abs() < 1e-12);
    }
}
