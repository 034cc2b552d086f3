//! Residual, positivity and left-tail checks of a computed profile.

use serde::{Deserialize, Serialize};

use super::{WaveParams, WaveProfile};
use crate::config::Tolerances;
use crate::heteroclinic::{fit_exponential, Trajectory};
use crate::model::Model;
use crate::numerics::max_norm;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    /// `sup |eps^2 d psi'' - psi' + f(psi_t)|` over interior nodes.
    pub sup: f64,
    /// `1 + sup |f(psi_t)|`.
    pub scale: f64,
    pub scaled: f64,
}

/// Profile-equation residual with centred differences for `psi'` and
/// `psi''`.
pub fn residual(psi: &WaveProfile, model: &dyn Model, params: &WaveParams) -> Residual {
    let dim = psi.dim;
    let h = psi.h;
    let e2 = params.epsilon * params.epsilon;
    let mut f = vec![0.0; dim];
    let (mut sup, mut fmax): (f64, f64) = (0.0, 0.0);
    for j in 1..psi.len() - 1 {
        model.eval(&psi.segment_at(psi.time(j)), &mut f);
        let (a, b, c) = (psi.value(j - 1), psi.value(j), psi.value(j + 1));
        for i in 0..dim {
            let d2 = (c[i] - 2.0 * b[i] + a[i]) / (h * h);
            let d1 = (c[i] - a[i]) / (2.0 * h);
            sup = sup.max((e2 * params.diffusion[i] * d2 - d1 + f[i]).abs());
            fmax = fmax.max(f[i].abs());
        }
    }
    let scale = 1.0 + fmax;
    Residual { sup, scale, scaled: sup / scale }
}

/// Acceptance bound `max(5e-4, 10 h^2 scale)` for a converged profile.
pub fn residual_bound(h: f64, scale: f64) -> f64 {
    (10.0 * h * h * scale).max(5e-4)
}

/// `max(sup|psi - u*|, sup_{t<=0} e^{-mu t} |psi - u*|)` over the profile
/// grid, with `u*` extended by its seed to the left.
pub fn weighted_distance(psi: &WaveProfile, hetero: &Trajectory, mu: f64) -> f64 {
    let mut u = vec![0.0; psi.dim];
    let mut out: f64 = 0.0;
    for j in 0..psi.len() {
        let t = psi.time(j);
        hetero.eval_into(t, &mut u);
        let w = if t < 0.0 { (-mu * t).exp() } else { 1.0 };
        let d = psi.value(j).iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out = out.max(w * d);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontReport {
    pub c: f64,
    pub positive: bool,
    /// `(t, component, value)` of the first non-positive sample.
    pub first_violation: Option<(f64, usize, f64)>,
    pub monotone_left: bool,
    pub lambda_eps: f64,
    pub lambda_fit: f64,
    pub lambda_rel_err: f64,
    pub v1_eps: Vec<f64>,
    pub v1_fit: Vec<f64>,
    pub v1_angle_deg: f64,
    /// `max |psi' - lambda(eps) psi| / |psi|` on the linear window.
    pub claim1_ratio: f64,
    pub remainder_slope: f64,
    pub window: [f64; 2],
    pub residual: f64,
    pub contraction_ratios: Vec<f64>,
    pub iterations: usize,
    pub ok: bool,
}

fn angle_deg(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    (dot / (na * nb)).clamp(-1.0, 1.0).acos().to_degrees()
}

/// Positivity (nodes, midpoints and left tail), monotonicity and decay on
/// the linear window `|psi| <= linear_regime |K|`.
pub fn verify_front(psi: &WaveProfile, model: &dyn Model, params: &WaveParams, tol: &Tolerances) -> FrontReport {
    let dim = psi.dim;
    let mut first_violation = None;
    if !(psi.tail.amplitude > 0.0 && psi.tail.v.iter().all(|&v| v > 0.0)) {
        let i = psi.tail.v.iter().position(|&v| !(v > 0.0)).unwrap_or(0);
        first_violation = Some((f64::NEG_INFINITY, i, psi.tail.amplitude * psi.tail.v[i]));
    }
    let mut mid = vec![0.0; dim];
    'scan: for j in 0..psi.len() {
        if first_violation.is_some() {
            break;
        }
        let t = psi.time(j);
        if let Some((i, &x)) = psi.value(j).iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
            first_violation = Some((t, i, x));
            break 'scan;
        }
        if j + 1 < psi.len() {
            psi.eval_into(t + 0.5 * psi.h, &mut mid);
            if let Some((i, &x)) = mid.iter().enumerate().find(|(_, &x)| !(x > 0.0)) {
                first_violation = Some((t + 0.5 * psi.h, i, x));
                break 'scan;
            }
        }
    }
    let positive = first_violation.is_none();

    let limit = tol.linear_regime * max_norm(&psi.k);
    let nodes: Vec<usize> = (0..psi.len()).take_while(|&j| max_norm(psi.value(j)) <= limit).collect();
    let ts: Vec<f64> = nodes.iter().map(|&j| psi.time(j)).collect();
    let vals: Vec<&[f64]> = nodes.iter().map(|&j| psi.value(j)).collect();
    let monotone_left = !nodes.is_empty() && nodes.iter().all(|&j| psi.deriv(j).iter().all(|&d| d > 0.0));
    let claim1_ratio = nodes
        .iter()
        .flat_map(|&j| {
            psi.value(j).iter().zip(psi.deriv(j)).map(|(u, d)| (d - params.lambda_eps * u).abs() / u.abs()).collect::<Vec<_>>()
        })
        .fold(0.0, f64::max);
    let fit = fit_exponential(&ts, &vals).ok();
    let (lambda_fit, v1_fit, remainder_slope) = match &fit {
        Some(f) => (f.lambda_fit, f.v_fit.clone(), f.remainder_slope),
        None => (f64::NAN, vec![f64::NAN; dim], f64::NAN),
    };
    let lambda_rel_err = ((lambda_fit - params.lambda_eps) / params.lambda_eps).abs();
    let v1_angle_deg = angle_deg(&v1_fit, &params.v1_eps);
    let res = residual(psi, model, params);
    let ok = positive && monotone_left && lambda_rel_err <= 0.02 && v1_angle_deg <= 2.0 && claim1_ratio <= 0.02;
    FrontReport {
        c: params.c,
        positive,
        first_violation,
        monotone_left,
        lambda_eps: params.lambda_eps,
        lambda_fit,
        lambda_rel_err,
        v1_eps: params.v1_eps.clone(),
        v1_fit,
        v1_angle_deg,
        claim1_ratio,
        remainder_slope,
        window: [ts.first().copied().unwrap_or(f64::NAN), ts.last().copied().unwrap_or(f64::NAN)],
        residual: res.sup,
        contraction_ratios: psi.diagnostics.contraction_ratios.clone(),
        iterations: psi.diagnostics.iterations,
        ok,
    }
}
