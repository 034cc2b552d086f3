//! Characteristic matrices of the linearized delay and profile equations.
//!
//! `Delta_eps(z) = eps^2 z^2 diag(d) - z I + L(e^{z .} I)`. At `eps = 0` this
//! is the characteristic matrix of `u'(t) = L u_t`. Only the zero set of the
//! determinant matters; its sign is never inspected by root logic.

mod roots;
mod winding;

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::DelayKernel;

pub use roots::{
    continuation_sweep, dominant_real_root, null_vector, root_continuation, spectrum_report, DominantRoot, LambdaEps,
    SpectrumReport, StripCount,
};
pub use winding::{count_roots_rect, Rect};

#[derive(Debug, Clone)]
pub struct CharProblem {
    kernel: DelayKernel,
    epsilon: f64,
    diffusion: Vec<f64>,
}

impl CharProblem {
    pub fn new(kernel: DelayKernel, epsilon: f64) -> Result<Self> {
        let n = kernel.dim();
        Self::with_diffusion(kernel, epsilon, vec![1.0; n])
    }

    pub fn with_diffusion(kernel: DelayKernel, epsilon: f64, diffusion: Vec<f64>) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon >= 0.0) {
            return Err(Error::InvalidModel(format!("epsilon must be non-negative, got {epsilon}")));
        }
        if diffusion.len() != kernel.dim() {
            return Err(Error::DimensionMismatch { expected: kernel.dim(), got: diffusion.len() });
        }
        if diffusion.iter().any(|&d| !(d > 0.0 && d.is_finite())) {
            return Err(Error::InvalidModel("diffusion coefficients must be positive".into()));
        }
        Ok(Self { kernel, epsilon, diffusion })
    }

    pub fn kernel(&self) -> &DelayKernel {
        &self.kernel
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }

    pub fn dim(&self) -> usize {
        self.kernel.dim()
    }

    /// Same kernel and diffusion at a different epsilon.
    pub fn at_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::with_diffusion(self.kernel.clone(), epsilon, self.diffusion.clone())
    }

    pub fn char_matrix(&self, z: Complex64) -> DMatrix<Complex64> {
        let mut m = self.kernel.symbol(z);
        let e2 = self.epsilon * self.epsilon;
        for i in 0..self.dim() {
            m[(i, i)] += e2 * self.diffusion[i] * z * z - z;
        }
        m
    }

    pub fn char_matrix_deriv(&self, z: Complex64) -> DMatrix<Complex64> {
        let mut m = self.kernel.symbol_deriv(z);
        let e2 = self.epsilon * self.epsilon;
        for i in 0..self.dim() {
            m[(i, i)] += 2.0 * e2 * self.diffusion[i] * z - 1.0;
        }
        m
    }

    pub fn charpoly(&self, z: Complex64) -> Complex64 {
        self.char_matrix(z).determinant()
    }

    /// `d/dz det Delta(z)` as the sum of determinants with one row
    /// differentiated.
    pub fn charpoly_deriv(&self, z: Complex64) -> Complex64 {
        let m = self.char_matrix(z);
        let dm = self.char_matrix_deriv(z);
        (0..self.dim())
            .map(|i| {
                let mut a = m.clone();
                a.set_row(i, &dm.row(i));
                a.determinant()
            })
            .sum()
    }

    /// Hadamard bound on `|det Delta(z)|`, used to scale residuals.
    pub fn det_scale(&self, z: Complex64) -> f64 {
        let m = self.char_matrix(z);
        (0..m.nrows()).map(|i| m.row(i).iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt().max(1e-300)).product()
    }

    /// The `2N x 2N` first-order matrix
    /// `[[s I, -I], [eps^-2 D^-1 L(e^{s .}), s I - eps^-2 D^-1]]`, for which
    /// `det Delta_eps(s) = eps^{2N} det(D) det D_eps(s)`.
    pub fn first_order_matrix(&self, s: Complex64) -> Result<DMatrix<Complex64>> {
        if self.epsilon <= 0.0 {
            return Err(Error::InvalidModel("first-order form needs epsilon > 0".into()));
        }
        let n = self.dim();
        let e2 = self.epsilon * self.epsilon;
        let sym = self.kernel.symbol(s);
        let mut m = DMatrix::<Complex64>::zeros(2 * n, 2 * n);
        for i in 0..n {
            m[(i, i)] = s;
            m[(i, n + i)] = Complex64::new(-1.0, 0.0);
            let scale = 1.0 / (e2 * self.diffusion[i]);
            for j in 0..n {
                m[(n + i, j)] = sym[(i, j)] * scale;
            }
            m[(n + i, n + i)] = s - scale;
        }
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{linearization_at_zero, Chemostat};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn scalar_growth_root() {
        let p = CharProblem::new(DelayKernel::point_mass(0.0, 0.0, 1.5).unwrap(), 0.0).unwrap();
        assert!(p.charpoly(c(1.5)).norm() < 1e-15);
        let p = p.at_epsilon(0.2).unwrap();
        let e2: f64 = 0.04;
        for z in [0.3, 1.0, 2.5] {
            let expect = e2 * z * z - z + 1.5;
            assert!((p.charpoly(c(z)).re - expect).abs() < 1e-14);
        }
        let disc = (1.0 - 4.0 * e2 * 1.5_f64).sqrt();
        for root in [(1.0 - disc) / (2.0 * e2), (1.0 + disc) / (2.0 * e2)] {
            assert!(p.charpoly(c(root)).norm() < 1e-12 * root * root);
        }
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let chem = Chemostat::new(1.0, 2.0, 0.2, 3.0, 1.0, 1.0, 2.0).unwrap();
        let p = CharProblem::with_diffusion(linearization_at_zero(&chem), 0.3, vec![1.0, 2.0]).unwrap();
        let z = Complex64::new(0.4, 0.7);
        let h = 1e-6;
        let fd = (p.charpoly(z + h) - p.charpoly(z - h)) / (2.0 * h);
        assert!((fd - p.charpoly_deriv(z)).norm() < 1e-7 * (1.0 + fd.norm()));
    }

    #[test]
    fn chemostat_determinant_factorizes() {
        let (d, tau, fs0, d1, d2) = (1.0, 0.2, 2.0, 1.3, 0.7);
        let chem = Chemostat::new(d, 2.0, tau, 3.0, 1.0, d1, d2).unwrap();
        assert!((chem.uptake(2.0) - fs0).abs() < 1e-14);
        let eps: f64 = 0.35;
        let p = CharProblem::with_diffusion(linearization_at_zero(&chem), eps, vec![d1, d2]).unwrap();
        let e2 = eps * eps;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let z = Complex64::new(rng.gen_range(-1.0..3.0), rng.gen_range(-2.0..2.0));
            let a = e2 * d1 * z * z - z - d;
            let b = e2 * d2 * z * z - z - d + (-(z + d) * tau).exp() * fs0;
            let want = a * b;
            assert!((p.charpoly(z) - want).norm() < 1e-12 * (1.0 + want.norm()));
        }
    }

    #[test]
    fn first_order_determinant_identity() {
        let chem = Chemostat::new(1.0, 2.0, 0.2, 3.0, 1.0, 1.0, 1.5).unwrap();
        let p = CharProblem::with_diffusion(linearization_at_zero(&chem), 0.4, vec![1.0, 1.5]).unwrap();
        let s = Complex64::new(0.3, -1.1);
        let lhs = p.charpoly(s);
        let rhs = p.first_order_matrix(s).unwrap().determinant() * 0.4_f64.powi(4) * 1.5;
        assert!((lhs - rhs).norm() < 1e-10 * lhs.norm());
        assert!(p.at_epsilon(0.0).unwrap().first_order_matrix(s).is_err());
    }
}
