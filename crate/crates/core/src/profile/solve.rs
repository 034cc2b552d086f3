//! Picard iteration of the two-sided exponential-kernel operator.

use rayon::prelude::*;

use super::{verify, LeftTail, ProfileDiagnostics, WaveParams, WaveProfile};
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::heteroclinic::Trajectory;
use crate::model::{ConstSegment, Model};
use crate::numerics::{max_norm, phi1, phi_w};

/// Relative gap between the left tail and the first grid value.
pub(crate) fn tail_mismatch(psi: &WaveProfile) -> f64 {
    let mut tail = vec![0.0; psi.dim];
    psi.tail.eval_into(psi.t0, &mut tail);
    let scale = max_norm(&tail);
    let gap = psi.value(0).iter().zip(&tail).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    if scale > 0.0 {
        gap / scale
    } else if gap == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

/// One application of
/// `psi_i(t) = [int_{-inf}^t e^{alpha_i (t-s)} g_i(s) ds + int_t^inf e^{beta_i (t-s)} g_i(s) ds] / sqrt(1 + 4 eps^2 d_i)`
/// with `g = psi + f(psi_s)`. On the grid `g` is piecewise linear and the
/// hat functions are integrated against the exponentials exactly; the left
/// tail contributes in closed form and the right tail is the constant `K`.
pub fn picard_step(psi: &WaveProfile, model: &dyn Model, params: &WaveParams, tol: &Tolerances) -> Result<WaveProfile> {
    let mismatch = tail_mismatch(psi);
    if mismatch > tol.tail_match {
        return Err(Error::StaleTail { mismatch });
    }
    let dim = psi.dim;
    let n = psi.len();
    let h = psi.h;
    let mut g = vec![0.0; n * dim];
    g.par_chunks_mut(dim).enumerate().for_each(|(j, out)| {
        model.eval(&psi.segment_at(psi.time(j)), out);
        for (o, p) in out.iter_mut().zip(psi.value(j)) {
            *o += p;
        }
    });
    let mut g_right = vec![0.0; dim];
    model.eval(&ConstSegment(psi.k.clone()), &mut g_right);
    for (o, k) in g_right.iter_mut().zip(&psi.k) {
        *o += k;
    }
    let tail_at = psi.tail.amplitude * (psi.tail.lambda * psi.t0).exp();
    let v = &psi.tail.v;
    let tail_source: Vec<f64> =
        (0..dim).map(|i| v[i] + (0..dim).map(|j| params.tail_symbol[i * dim + j] * v[j]).sum::<f64>()).collect();

    let mut next = psi.clone();
    let mut ia = vec![0.0; n];
    let mut ib = vec![0.0; n];
    for i in 0..dim {
        let (a, b) = (params.alpha[i], params.beta[i]);
        let w = params.wronskian(i);

        let x = a * h;
        let ea = x.exp();
        let w0 = h * phi_w(x);
        let w1 = h * phi1(x) - w0;
        ia[0] = tail_at * tail_source[i] / (psi.tail.lambda - a);
        for j in 0..n - 1 {
            ia[j + 1] = ea * ia[j] + w0 * g[j * dim + i] + w1 * g[(j + 1) * dim + i];
        }

        let y = -b * h;
        let eb = y.exp();
        let v1 = h * phi_w(y);
        let v0 = h * phi1(y) - v1;
        ib[n - 1] = g_right[i] / b;
        for j in (0..n - 1).rev() {
            ib[j] = eb * ib[j + 1] + v0 * g[j * dim + i] + v1 * g[(j + 1) * dim + i];
        }

        for j in 0..n {
            next.psi[j * dim + i] = (ia[j] + ib[j]) / w;
            next.dpsi[j * dim + i] = (a * ia[j] + b * ib[j]) / w;
        }
    }
    Ok(next)
}

/// Least-squares fit of `a_i e^{lambda(eps) t}` per component on the first
/// stretch of the grid; the tail stores `|a| e^{lambda t} a / |a|`.
/// Returns the remaining mismatch at `T-`.
pub fn refit_tail(psi: &mut WaveProfile, params: &WaveParams) -> f64 {
    let lambda = params.lambda_eps;
    let width = (5.0 * psi.h).max(2.0 / lambda);
    let dim = psi.dim;
    let mut num = vec![0.0; dim];
    let mut den = 0.0;
    for j in 0..psi.len() {
        let t = psi.time(j);
        if t > psi.t0 + width {
            break;
        }
        let e = (lambda * t).exp();
        for (n, u) in num.iter_mut().zip(psi.value(j)) {
            *n += u * e;
        }
        den += e * e;
    }
    let a: Vec<f64> = num.iter().map(|n| if den > 0.0 { n / den } else { 0.0 }).collect();
    let amplitude = max_norm(&a);
    let v = if amplitude > 0.0 { a.iter().map(|x| x / amplitude).collect() } else { params.v1_eps.clone() };
    psi.tail = LeftTail { amplitude, lambda, v };
    tail_mismatch(psi)
}

/// First time `|psi|` reaches `level`.
fn crossing(psi: &WaveProfile, level: f64) -> Option<f64> {
    let j = (0..psi.len()).find(|&j| max_norm(psi.value(j)) >= level)?;
    if j == 0 {
        return Some(psi.t0);
    }
    let (mut a, mut b) = (psi.time(j - 1), psi.time(j));
    for _ in 0..60 {
        let m = 0.5 * (a + b);
        if max_norm(&psi.eval(m)) >= level {
            b = m;
        } else {
            a = m;
        }
    }
    Some(0.5 * (a + b))
}

/// `t -> psi(t + s)` resampled on the same grid.
fn shifted(psi: &WaveProfile, s: f64) -> WaveProfile {
    let mut out = psi.clone();
    let dim = psi.dim;
    for j in 0..psi.len() {
        let t = psi.time(j) + s;
        psi.eval_into(t, &mut out.psi[j * dim..(j + 1) * dim]);
        psi.deriv_into(t, &mut out.dpsi[j * dim..(j + 1) * dim]);
    }
    out.tail.amplitude *= (psi.tail.lambda * s).exp();
    out
}

/// Fix the translation gauge `|psi(0)| = |K| / 2`.
fn recenter(psi: WaveProfile) -> Result<WaveProfile> {
    let level = 0.5 * max_norm(&psi.k);
    let t_star = crossing(&psi, level).ok_or_else(|| Error::FitRejected("profile never reaches |K| / 2".into()))?;
    if t_star.abs() < 1e-15 {
        return Ok(psi);
    }
    Ok(shifted(&psi, t_star))
}

/// `max(sup|a - b|, sup_{t <= 0} e^{-mu t} |a - b|)` over grid nodes.
pub(crate) fn weighted_change(a: &WaveProfile, b: &WaveProfile, mu: f64) -> f64 {
    let mut out: f64 = 0.0;
    for j in 0..a.len() {
        let t = a.time(j);
        let w = if t < 0.0 { (-mu * t).exp() } else { 1.0 };
        let d = a.value(j).iter().zip(b.value(j)).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        out = out.max(w * d);
    }
    out
}

/// Grid bounds from the heteroclinic: `T-` where its seed amplitude falls
/// to `left_cut |K|`, `T+` past the point where it settles within
/// `right_cut` of `K`.
fn grid_bounds(model: &dyn Model, hetero: &Trajectory, tol: &Tolerances) -> (f64, f64) {
    let k = model.equilibrium();
    let k_norm = max_norm(k);
    let t_minus = match hetero.seed() {
        Some(seed) => {
            let start = seed.c0 * max_norm(&seed.v);
            seed.t_ref + (tol.left_cut * k_norm / start).ln() / seed.lambda0
        }
        None => hetero.t_start(),
    }
    .min(hetero.t_start());
    let far = (0..hetero.len())
        .rev()
        .find(|&j| hetero.value(j).iter().zip(k).any(|(u, kk)| (u - kk).abs() > tol.right_cut))
        .map(|j| hetero.time(j))
        .unwrap_or(0.0);
    let unit = model.tau().max(1.0);
    let t_plus = far + (5.0 * unit).max(0.2 * (far - t_minus));
    (t_minus, t_plus)
}

/// Solve for the profile at speed `c`, starting from the heteroclinic
/// rescaled in time so that its left tail decays at `lambda(eps)`.
pub fn solve_profile(model: &dyn Model, hetero: &Trajectory, params: &WaveParams, tol: &Tolerances) -> Result<WaveProfile> {
    let k = model.equilibrium().to_vec();
    let h = tol.profile_step;
    let kappa = params.lambda_eps / params.lambda0;
    let (t_minus, t_plus) = grid_bounds(model, hetero, tol);
    let (t_minus, t_plus) = (t_minus / kappa, t_plus / kappa);
    let n = ((t_plus - t_minus) / h).ceil() as usize + 1;
    let placeholder = LeftTail { amplitude: 0.0, lambda: params.lambda_eps, v: params.v1_eps.clone() };
    let mut cur = WaveProfile::from_fn(params.c, t_minus, h, n, placeholder, k, |t, o| hetero.eval_into(kappa * t, o), |t, o| {
        hetero.deriv_into(kappa * t, o);
        o.iter_mut().for_each(|x| *x *= kappa);
    })?;
    refit_tail(&mut cur, params);

    let mut diag = ProfileDiagnostics::default();
    let mut prev: Option<f64> = None;
    let mut streak = 0;
    for iteration in 1..=tol.k_max {
        let mut next = picard_step(&cur, model, params, tol)?;
        refit_tail(&mut next, params);
        let next = recenter(next)?;
        let change = weighted_change(&next, &cur, params.mu);
        if !change.is_finite() {
            return Err(Error::NonContraction { ratio: f64::INFINITY, iteration });
        }
        if let Some(p) = prev {
            let ratio = if p > 0.0 { change / p } else { 0.0 };
            diag.contraction_ratios.push(ratio);
            if ratio >= 1.0 {
                streak += 1;
                if streak >= tol.non_contraction_streak {
                    return Err(Error::NonContraction { ratio, iteration });
                }
            } else {
                streak = 0;
            }
        }
        prev = Some(change);
        cur = next;
        diag.iterations = iteration;
        diag.final_change = change;
        if change <= tol.tol_fix {
            diag.converged = true;
            break;
        }
    }
    if !diag.converged {
        return Err(Error::IterationLimit { k_max: tol.k_max, change: diag.final_change });
    }
    diag.tail_mismatch = tail_mismatch(&cur);
    diag.right_gap = cur.value(cur.len() - 1).iter().zip(&cur.k).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    cur.diagnostics = diag;
    let r = verify::residual(&cur, model, params);
    let bound = verify::residual_bound(h, r.scale);
    if r.sup > bound {
        return Err(Error::ResidualTooLarge { residual: r.sup, bound });
    }
    Ok(cur)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DelayKernel, LinearModel};

    fn params_for(model: &dyn Model, c: f64, lambda: f64) -> WaveParams {
        let eps = 1.0 / c;
        let d = model.diffusion().to_vec();
        WaveParams {
            c,
            epsilon: eps,
            alpha: d.iter().map(|&x| super::super::alpha(eps, x)).collect(),
            beta: d.iter().map(|&x| super::super::beta(eps, x)).collect(),
            lambda0: lambda,
            lambda_eps: lambda,
            v1_eps: vec![1.0],
            mu: 0.5 * lambda,
            diffusion: d,
            tail_symbol: vec![0.0],
        }
    }

    fn flat(c: f64, value: f64, k: f64) -> WaveProfile {
        let tail = LeftTail { amplitude: 0.0, lambda: 1.0, v: vec![1.0] };
        WaveProfile::from_fn(c, -5.0, 0.01, 1001, tail, vec![k], |_, o| o[0] = value, |_, o| o[0] = 0.0).unwrap()
    }

    #[test]
    fn constants_are_fixed_points() {
        let m = LinearModel::new("z", DelayKernel::zero(1, 1.0), vec![1.0], vec![1.0]).unwrap();
        let p = params_for(&m, 3.0, 1.0);
        let tol = Tolerances { tail_match: f64::INFINITY, ..Tolerances::default() };
        let mut prof = flat(3.0, 1.0, 1.0);
        prof.tail = LeftTail { amplitude: 1.0, lambda: 1e-300, v: vec![1.0] };
        let mut p1 = p.clone();
                p1.lambda_eps = 1e-300;
        let out = picard_step(&prof, &m, &p1, &tol).unwrap();
        for j in 0..out.len() {
            assert!((out.value(j)[0] - 1.0).abs() < 1e-12, "{j} {}", out.value(j)[0]);
            assert!(out.deriv(j)[0].abs() < 1e-10);
        }
        let zero = flat(3.0, 0.0, 0.0);
        let out = picard_step(&zero, &m, &p, &tol).unwrap();
        assert!(out.psi.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn linear_model_maps_eigenfunction_to_itself() {
        // f(phi) = b phi(0): e^{lambda t} is a fixed point iff eps^2 lambda^2 - lambda + b = 0
        let (b, c) = (1.0, 4.0);
        let m = LinearModel::new("g", DelayKernel::point_mass(0.0, 0.0, b).unwrap(), vec![0.0], vec![1.0]).unwrap();
        let e2 = 1.0 / (c * c);
        let lambda = (1.0 - (1.0 - 4.0 * e2 * b).sqrt()) / (2.0 * e2);
        let mut p = params_for(&m, c, lambda);
        p.tail_symbol = vec![b];
        let tail = LeftTail { amplitude: 1.0, lambda, v: vec![1.0] };
        let h = 0.005;
        let prof = WaveProfile::from_fn(c, -8.0, h, 1601, tail, vec![(lambda * 0.0).exp()], |t, o| o[0] = (lambda * t).exp(), |t, o| {
            o[0] = lambda * (lambda * t).exp()
        })
        .unwrap();
        let out = picard_step(&prof, &m, &p, &Tolerances::default()).unwrap();
        // away from the right truncation the image reproduces e^{lambda t}
        for j in 0..1000 {
            let t = out.time(j);
            let want = (lambda * t).exp();
            assert!((out.value(j)[0] - want).abs() < 1e-5 * want, "{t}");
        }
    }

    #[test]
    fn stale_tail_is_rejected() {
        let m = LinearModel::new("z", DelayKernel::zero(1, 1.0), vec![1.0], vec![1.0]).unwrap();
        let p = params_for(&m, 3.0, 1.0);
        let prof = flat(3.0, 0.5, 1.0);
        assert!(matches!(picard_step(&prof, &m, &p, &Tolerances::default()), Err(Error::StaleTail { .. })));
    }
}
