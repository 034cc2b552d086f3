//! Root counting in rectangles by the argument principle.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::CharProblem;
use crate::config::Tolerances;
use crate::error::{Error, Result};

const INITIAL_EDGE_SAMPLES: usize = 32;
const MAX_DEPTH: u32 = 40;
const MAX_ARG_STEP: f64 = PI / 3.0;
const NUDGE_RETRIES: usize = 3;

/// Closed rectangle `[re0, re1] x [im0, im1]` in the complex plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub re: [f64; 2],
    pub im: [f64; 2],
}

impl Rect {
    pub fn new(re0: f64, re1: f64, im0: f64, im1: f64) -> Self {
        Self { re: [re0, re1], im: [im0, im1] }
    }

    /// Square of half-width `r` centred at `z`.
    pub fn around(z: Complex64, r: f64) -> Self {
        Self::new(z.re - r, z.re + r, z.im - r, z.im + r)
    }

    fn inflated(&self, by: f64) -> Self {
        Self::new(self.re[0] - by, self.re[1] + by, self.im[0] - by, self.im[1] + by)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re[0] && z.re <= self.re[1] && z.im >= self.im[0] && z.im <= self.im[1]
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re[0], self.im[0]),
            Complex64::new(self.re[1], self.im[0]),
            Complex64::new(self.re[1], self.im[1]),
            Complex64::new(self.re[0], self.im[1]),
        ]
    }

    fn size(&self) -> f64 {
        (self.re[1] - self.re[0]) + (self.im[1] - self.im[0])
    }
}

struct Winding {
    turns: f64,
    min_abs: f64,
    max_abs: f64,
}

enum Failure {
    NonFinite,
    TooDeep,
}

fn winding(f: &dyn Fn(Complex64) -> Complex64, rect: &Rect, samples: usize) -> std::result::Result<Winding, Failure> {
    let corners = rect.corners();
    let mut total = 0.0;
    let mut min_abs = f64::INFINITY;
    let mut max_abs: f64 = 0.0;
    let mut track = |v: Complex64| -> std::result::Result<Complex64, Failure> {
        let a = v.norm();
        if !a.is_finite() {
            return Err(Failure::NonFinite);
        }
        min_abs = min_abs.min(a);
        max_abs = max_abs.max(a);
        Ok(v)
    };
    for e in 0..4 {
        let (a, b) = (corners[e], corners[(e + 1) % 4]);
        let mut prev_z = a;
        let mut prev_f = track(f(a))?;
        for k in 1..=samples {
            let z = a + (b - a) * (k as f64 / samples as f64);
            let fz = track(f(z))?;
            // adaptive refinement of [prev_z, z]
            let mut stack = vec![(prev_z, prev_f, z, fz, 0u32)];
            while let Some((za, fa, zb, fb, depth)) = stack.pop() {
                let d = (fb / fa).arg();
                if d.abs() <= MAX_ARG_STEP && fa.norm() > 0.0 && fb.norm() > 0.0 {
                    total += d;
                    continue;
                }
                if depth >= MAX_DEPTH {
                    return Err(Failure::TooDeep);
                }
                let zm = (za + zb) * 0.5;
                let fm = track(f(zm))?;
                // left half is processed first
                stack.push((zm, fm, zb, fb, depth + 1));
                stack.push((za, fa, zm, fm, depth + 1));
            }
            prev_z = z;
            prev_f = fz;
        }
    }
    Ok(Winding { turns: total / (2.0 * PI), min_abs, max_abs })
}

/// Number of zeros of `det Delta` inside `rect`, counted with multiplicity.
pub fn count_roots_rect(problem: &CharProblem, rect: &Rect, tol: &Tolerances) -> Result<usize> {
    let f = |z: Complex64| problem.charpoly(z);
    count_zeros(&f, rect, tol)
}

/// Argument-principle count for any function analytic on a neighbourhood
/// of `rect`.
pub(crate) fn count_zeros(f: &dyn Fn(Complex64) -> Complex64, rect: &Rect, tol: &Tolerances) -> Result<usize> {
    if !(rect.re[0] < rect.re[1] && rect.im[0] < rect.im[1]) {
        return Err(Error::InvalidModel(format!("degenerate rectangle {rect:?}")));
    }
    let step = tol.rect_nudge * (1.0 + rect.size());
    let mut last = f64::NAN;
    for attempt in 0..=NUDGE_RETRIES {
        let r = rect.inflated(step * attempt as f64);
        let coarse = winding(f, &r, INITIAL_EDGE_SAMPLES);
        let fine = winding(f, &r, 2 * INITIAL_EDGE_SAMPLES);
        match (coarse, fine) {
            (Ok(a), Ok(b)) => {
                let near_zero = a.min_abs <= 1e-13 * a.max_abs || b.min_abs <= 1e-13 * b.max_abs;
                let n = b.turns.round();
                last = b.turns;
                if !near_zero && (a.turns - b.turns).abs() <= tol.winding_tol && (b.turns - n).abs() <= tol.winding_tol {
                    if n < 0.0 {
                        return Err(Error::WindingNotConverged { estimate: b.turns });
                    }
                    return Ok(n as usize);
                }
            }
            (Err(Failure::NonFinite), _) | (_, Err(Failure::NonFinite)) => {
                return Err(Error::WindingNotConverged { estimate: f64::NAN })
            }
            _ => {}
        }
    }
    if last.is_nan() {
        Err(Error::BoundaryZero { retries: NUDGE_RETRIES })
    } else {
        Err(Error::WindingNotConverged { estimate: last })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::DelayKernel;

    fn tol() -> Tolerances {
        Tolerances::default()
    }

    #[test]
    fn polynomial_counts() {
        let f = |z: Complex64| (z - 1.0) * (z - 2.0) * (z - 2.0) * (z + Complex64::new(0.0, 3.0));
        assert_eq!(count_zeros(&f, &Rect::new(0.0, 3.0, -1.0, 1.0), &tol()).unwrap(), 3);
        assert_eq!(count_zeros(&f, &Rect::new(0.0, 1.5, -1.0, 1.0), &tol()).unwrap(), 1);
        assert_eq!(count_zeros(&f, &Rect::new(-1.0, 3.0, -4.0, 1.0), &tol()).unwrap(), 4);
        assert_eq!(count_zeros(&f, &Rect::new(3.5, 4.0, -1.0, 1.0), &tol()).unwrap(), 0);
    }

    #[test]
    fn root_on_boundary_is_nudged() {
        let f = |z: Complex64| z - 1.0;
        assert_eq!(count_zeros(&f, &Rect::new(1.0, 2.0, -1.0, 1.0), &tol()).unwrap(), 1);
    }

    #[test]
    fn characteristic_counts() {
        let growth = CharProblem::new(DelayKernel::point_mass(0.0, 0.0, 1.0).unwrap(), 0.0).unwrap();
        assert_eq!(count_roots_rect(&growth, &Rect::new(0.5, 2.0, -10.0, 10.0), &tol()).unwrap(), 1);
        let eps = growth.at_epsilon(0.1).unwrap();
        assert_eq!(count_roots_rect(&eps, &Rect::new(0.5, 120.0, -10.0, 10.0), &tol()).unwrap(), 2);
        let neg = CharProblem::new(DelayKernel::point_mass(1.0, -1.0, -1.0).unwrap(), 0.0).unwrap();
        assert_eq!(count_roots_rect(&neg, &Rect::new(-0.2, 2.0, -2.0, 2.0), &tol()).unwrap(), 0);
        // lambda + e^{-lambda} = 0 has its first pair at Re ~ -0.318, Im ~ +-1.337
        assert_eq!(count_roots_rect(&neg, &Rect::new(-0.5, 2.0, -2.0, 2.0), &tol()).unwrap(), 2);
    }
}
