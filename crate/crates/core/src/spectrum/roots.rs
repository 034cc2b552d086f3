//! Dominant real root at `eps = 0` and its continuation in `eps`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::winding::{count_roots_rect, Rect};
use super::CharProblem;
use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::{linearization_at_zero, Model};

const HOMOTOPY_STEPS: usize = 8;
const NEWTON_ITERS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripCount {
    pub rect: Rect,
    pub epsilon: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominantRoot {
    pub lambda0: f64,
    pub v: Vec<f64>,
    pub simple: bool,
    pub dominant: bool,
    /// `v > 0` componentwise.
    pub positive: bool,
    pub strip_counts: Vec<StripCount>,
}

/// One point `(eps, lambda(eps), v1(eps))` of the continuation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaEps(pub f64, pub f64, pub Vec<f64>);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub lambda0: f64,
    pub eigvec: Vec<f64>,
    pub simple: bool,
    pub dominant: bool,
    pub positive: bool,
    pub strip_counts: Vec<StripCount>,
    pub lambda_of_eps: Vec<LambdaEps>,
}

impl SpectrumReport {
    /// The continuation point at `eps`, if it was computed.
    pub fn at_epsilon(&self, eps: f64) -> Option<&LambdaEps> {
        self.lambda_of_eps.iter().find(|p| (p.0 - eps).abs() <= 1e-15 * (1.0 + eps))
    }
}

/// Null vector of a (numerically) singular real matrix: right singular
/// vector of the smallest singular value, unit max-norm, largest entry
/// positive.
pub fn null_vector(m: &DMatrix<Complex64>) -> Vec<f64> {
    let real = m.map(|c| c.re);
    let svd = real.svd(false, true);
    let vt = svd.v_t.expect("requested v_t");
    let k = svd.singular_values.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).map(|(i, _)| i).unwrap_or(0);
    let mut v: Vec<f64> = vt.row(k).iter().copied().collect();
    let (imax, amax) = v.iter().enumerate().max_by(|a, b| a.1.abs().total_cmp(&b.1.abs())).map(|(i, x)| (i, x.abs())).unwrap();
    let sign = if v[imax] < 0.0 { -1.0 } else { 1.0 };
    for x in &mut v {
        *x *= sign / amax;
    }
    v
}

fn real_det(p: &CharProblem, x: f64) -> f64 {
    p.charpoly(Complex64::new(x, 0.0)).re
}

fn newton_real(p: &CharProblem, mut z: f64, lo: f64, hi: f64, tol: f64) -> f64 {
    for _ in 0..NEWTON_ITERS {
        let zc = Complex64::new(z, 0.0);
        let d = p.charpoly_deriv(zc).re;
        if d == 0.0 || !d.is_finite() {
            break;
        }
        let step = p.charpoly(zc).re / d;
        let next = z - step;
        if !(next >= lo && next <= hi) {
            break;
        }
        z = next;
        if step.abs() <= tol * (1.0 + z.abs()) {
            break;
        }
    }
    z
}

fn strip_height(kernel_norm: f64) -> f64 {
    2.0 * kernel_norm + 1.0
}

/// Largest real root of `det Delta_0` in `[lo, hi]`, with simplicity and
/// dominance certified by root counts.
pub fn dominant_real_root(problem: &CharProblem, lo: f64, hi: f64, tol: &Tolerances) -> Result<DominantRoot> {
    if problem.epsilon() != 0.0 {
        return Err(Error::InvalidModel("dominant_real_root works at epsilon = 0".into()));
    }
    if !(lo >= 0.0 && hi > lo) {
        return Err(Error::InvalidModel(format!("bad search interval [{lo}, {hi}]")));
    }
    let n = tol.scan_points.max(2);
    let xs: Vec<f64> = (0..=n).map(|k| lo + (hi - lo) * k as f64 / n as f64).collect();
    let vals: Vec<f64> = xs.iter().map(|&x| real_det(problem, x)).collect();
    let mut bracket = None;
    for k in (0..n).rev() {
        if vals[k + 1] == 0.0 {
            bracket = Some((xs[k + 1], xs[k + 1]));
            break;
        }
        if vals[k].signum() != vals[k + 1].signum() {
            bracket = Some((xs[k], xs[k + 1]));
            break;
        }
    }
    let (mut a, mut b) = bracket.ok_or(Error::NoRealRoot { lo, hi })?;
    let mut fa = real_det(problem, a);
    while b - a > tol.root_tol * (1.0 + a.abs()) {
        let m = 0.5 * (a + b);
        let fm = real_det(problem, m);
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let guess = 0.5 * (a + b);
    let lambda0 = newton_real(problem, guess, guess - 1e-6 * (1.0 + guess), guess + 1e-6 * (1.0 + guess), tol.root_tol);
    let z0 = Complex64::new(lambda0, 0.0);
    let v = null_vector(&problem.char_matrix(z0));

    let norm = problem.kernel().norm();
    let scale = lambda0.max(1e-3);
    let small = Rect::around(z0, 0.05 * scale);
    let small_count = count_roots_rect(problem, &small, tol)?;
    let dprime = problem.charpoly_deriv(z0).norm();
    let simple = small_count == 1 && dprime > 1e-10 * problem.det_scale(z0) / scale;
    if !simple {
        return Err(Error::NotSimple { lambda0, count: small_count });
    }
    let y = strip_height(norm);
    let big = Rect::new(lambda0 - tol.strip_left * scale, (2.0 * lambda0).max(norm + 1.0), -y, y);
    let big_count = count_roots_rect(problem, &big, tol)?;
    if big_count != 1 {
        return Err(Error::DominanceFailed { count: big_count });
    }
    let positive = v.iter().all(|&x| x > 0.0);
    Ok(DominantRoot {
        lambda0,
        v,
        simple,
        dominant: true,
        positive,
        strip_counts: vec![
            StripCount { rect: small, epsilon: 0.0, count: small_count },
            StripCount { rect: big, epsilon: 0.0, count: big_count },
        ],
    })
}

fn newton_complex(p: &CharProblem, mut z: Complex64, tol: f64) -> Option<Complex64> {
    for _ in 0..NEWTON_ITERS {
        let d = p.charpoly_deriv(z);
        if d.norm() == 0.0 || !d.norm().is_finite() {
            return None;
        }
        let step = p.charpoly(z) / d;
        z -= step;
        if !z.norm().is_finite() {
            return None;
        }
        if step.norm() <= tol * (1.0 + z.norm()) {
            return Some(z);
        }
    }
    None
}

/// `lambda(eps)` and `v1(eps)`, reached from `lambda0` by Newton along an
/// `eps` homotopy, then certified unique in the strip
/// `[lambda0 - delta, lambda0 + delta1] x [-(2|L|+1), 2|L|+1]`.
pub fn root_continuation(problem: &CharProblem, lambda0: f64, tol: &Tolerances) -> Result<(f64, Vec<f64>, StripCount)> {
    let eps = problem.epsilon();
    if !(eps > 0.0) {
        return Err(Error::InvalidModel("continuation needs epsilon > 0".into()));
    }
    if eps > tol.eps_max {
        return Err(Error::StripCount { count: 0, epsilon: eps });
    }
    let mut z = Complex64::new(lambda0, 0.0);
    for k in 1..=HOMOTOPY_STEPS {
        let e = eps * (k as f64 / HOMOTOPY_STEPS as f64);
        let p = problem.at_epsilon(e)?;
        z = newton_complex(&p, z, tol.root_tol)
            .ok_or_else(|| Error::NewtonDiverged(format!("continuation stalled at epsilon = {e}")))?;
    }
    let residual = problem.charpoly(z).norm();
    if residual > 1e-12 * problem.det_scale(z).max(1.0) || z.im.abs() > 1e-9 * (1.0 + z.re.abs()) {
        return Err(Error::NewtonDiverged(format!("residual {residual:e} at z = {z}")));
    }
    let lambda = z.re;
    let scale = lambda0.max(1e-3);
    let y = strip_height(problem.kernel().norm());
    let rect = Rect::new(lambda0 - tol.strip_left * scale, lambda0 + tol.strip_right * scale, -y, y);
    let count = count_roots_rect(problem, &rect, tol)?;
    if count != 1 || !rect.contains(Complex64::new(lambda, 0.0)) {
        return Err(Error::StripCount { count, epsilon: eps });
    }
    let v = null_vector(&problem.char_matrix(Complex64::new(lambda, 0.0)));
    Ok((lambda, v, StripCount { rect, epsilon: eps, count }))
}

/// Continue `lambda0` to each `eps` in the list (processed independently).
pub fn continuation_sweep(base: &CharProblem, lambda0: f64, eps: &[f64], tol: &Tolerances) -> Result<Vec<(LambdaEps, StripCount)>> {
    eps.iter()
        .map(|&e| {
            let (l, v, strip) = root_continuation(&base.at_epsilon(e)?, lambda0, tol)?;
            Ok((LambdaEps(e, l, v), strip))
        })
        .collect()
}

/// Full spectrum stage for a model: dominant root of the linearization at
/// zero and its continuation to `eps = 1/c` for every requested speed.
pub fn spectrum_report(model: &dyn Model, speeds: &[f64], tol: &Tolerances) -> Result<SpectrumReport> {
    let kernel = linearization_at_zero(model);
    let hi = kernel.norm() + 1.0;
    let base = CharProblem::with_diffusion(kernel, 0.0, model.diffusion().to_vec())?;
    let dom = dominant_real_root(&base, 0.0, hi, tol)?;
    let mut strip_counts = dom.strip_counts.clone();
    let mut lambda_of_eps = Vec::new();
    for &c in speeds {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::InvalidModel(format!("speed must be positive, got {c}")));
        }
        let (point, strip) = continuation_sweep(&base, dom.lambda0, &[1.0 / c], tol)?.remove(0);
        strip_counts.push(strip);
        lambda_of_eps.push(point);
    }
    Ok(SpectrumReport {
        lambda0: dom.lambda0,
        eigvec: dom.v,
        simple: dom.simple,
        dominant: dom.dominant,
        positive: dom.positive,
        strip_counts,
        lambda_of_eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linearization_at_k, Chemostat, DelayKernel, LogisticDistributed};

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn scalar_growth_is_dominant() {
        let p = CharProblem::new(DelayKernel::point_mass(1.0, 0.0, 1.0).unwrap(), 0.0).unwrap();
        let d = dominant_real_root(&p, 0.0, 2.0, &tol()).unwrap();
        assert!((d.lambda0 - 1.0).abs() < 1e-12);
        assert_eq!(d.v, vec![1.0]);
        assert!(d.simple && d.dominant && d.positive);
    }

    #[test]
    fn chemostat_lambda0_and_eigenvector() {
        let chem = Chemostat::new(1.0, 2.0, 0.2, 3.0, 1.0, 1.0, 1.0).unwrap();
        let r = spectrum_report(&chem, &[], &tol()).unwrap();
        // bisection oracle on (x + D) e^{(x + D) tau} = f(S0)
        let h = |x: f64| (x + 1.0) * ((x + 1.0) * 0.2).exp() - 2.0;
        let (mut a, mut b) = (0.0, 2.0);
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if h(m) > 0.0 {
                b = m
            } else {
                a = m
            }
        }
        assert!((r.lambda0 - a).abs() < 1e-10, "{} vs {a}", r.lambda0);
        assert!((r.lambda0 - 0.486).abs() < 1e-3);
        let v1 = 2.0 / (a + 1.0);
        let expect = if v1 > 1.0 { [1.0, 1.0 / v1] } else { [v1, 1.0] };
        assert!((r.eigvec[0] - expect[0]).abs() < 1e-9 && (r.eigvec[1] - expect[1]).abs() < 1e-9, "{:?}", r.eigvec);
        assert!(r.positive);
    }

    #[test]
    fn logistic_at_k_has_no_positive_root() {
        let m = LogisticDistributed::fisher_kpp_delay(1.0, 1.0, 1.0).unwrap();
        let p = CharProblem::new(linearization_at_k(&m), 0.0).unwrap();
        assert!(matches!(dominant_real_root(&p, 0.0, 5.0, &tol()), Err(Error::NoRealRoot { .. })));
    }

    #[test]
    fn fisher_continuation_matches_quadratic() {
        let m = LogisticDistributed::fisher_kpp_delay(1.0, 1.0, 1.0).unwrap();
        let r = spectrum_report(&m, &[3.0, 6.0], &tol()).unwrap();
        let c: f64 = 3.0;
        let want = c * (c - (c * c - 4.0).sqrt()) / 2.0;
        assert!((r.lambda_of_eps[0].1 - want).abs() < 1e-10);
        assert!((r.lambda_of_eps[0].1 - 1.14590).abs() < 1e-5);
        assert_eq!(r.lambda_of_eps[0].2, vec![1.0]);
        assert!(r.strip_counts.iter().all(|s| s.count == 1));
    }

    #[test]
    fn continuation_rejects_large_epsilon() {
        let m = LogisticDistributed::fisher_kpp_delay(1.0, 1.0, 1.0).unwrap();
        assert!(spectrum_report(&m, &[0.5], &tol()).is_err());
    }

    #[test]
    fn chemostat_continuation_solves_reduced_equation() {
        let chem = Chemostat::new(1.0, 2.0, 0.2, 3.0, 1.0, 1.0, 1.0).unwrap();
        let c: f64 = 15.0;
        let r = spectrum_report(&chem, &[c], &tol()).unwrap();
        let e2 = 1.0 / (c * c);
        let g = |z: f64| e2 * z * z - z - 1.0 + (-(1.0 + z) * 0.2).exp() * 2.0;
        let l = r.lambda_of_eps[0].1;
        assert!(g(l).abs() < 1e-11, "{}", g(l));
        assert!(r.lambda_of_eps[0].2.iter().all(|&x| x > 0.0));
    }
}
