//! Matrix-valued delay kernels: finitely many point masses plus a
//! piecewise-polynomial density on `[-tau, 0]`.
//!
//! A kernel represents the bounded linear operator
//! `L(phi) = sum_j W_j phi(theta_j) + \int density(theta) phi(theta) dtheta`.
//! Densities are stored in the local variable `u = theta - start` of each
//! piece so that `L(e^{z .} I)` has an exact closed form.

use nalgebra::DMatrix;
use num_complex::Complex64;
use smallvec::SmallVec;

use super::history::Segment;
use crate::error::{Error, Result};
use crate::numerics::gauss_legendre;

const THETA_TOL: f64 = 1e-12;
const NORM_NODES: usize = 64;

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub theta: f64,
    pub weight: DMatrix<f64>,
}

/// `density(theta) = sum_k coeffs[k] * (theta - start)^k` on `[start, end]`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPiece {
    pub start: f64,
    pub end: f64,
    pub coeffs: Vec<DMatrix<f64>>,
}

impl DensityPiece {
    pub fn at(&self, theta: f64) -> DMatrix<f64> {
        let u = theta - self.start;
        let mut acc = DMatrix::zeros(self.coeffs[0].nrows(), self.coeffs[0].ncols());
        for c in self.coeffs.iter().rev() {
            acc = acc * u + c;
        }
        acc
    }
}

#[derive(Debug, Clone)]
pub struct DelayKernel {
    dim: usize,
    tau: f64,
    atoms: Vec<Atom>,
    density: Vec<DensityPiece>,
    quad_order: usize,
    // density weights folded onto Gauss nodes: (theta_q, w_q * density(theta_q))
    quad: Vec<(f64, DMatrix<f64>)>,
}

impl PartialEq for DelayKernel {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.tau == other.tau
            && self.atoms == other.atoms
            && self.density == other.density
            && self.quad_order == other.quad_order
    }
}

impl DelayKernel {
    pub const DEFAULT_QUAD_ORDER: usize = 8;

    pub fn new(dim: usize, tau: f64, atoms: Vec<Atom>, density: Vec<DensityPiece>, quad_order: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidKernel("dimension must be positive".into()));
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidKernel(format!("tau must be non-negative, got {tau}")));
        }
        if quad_order == 0 {
            return Err(Error::InvalidKernel("quadrature order must be positive".into()));
        }
        let mut merged: Vec<Atom> = Vec::with_capacity(atoms.len());
        for atom in atoms {
            check_matrix(&atom.weight, dim)?;
            if !(atom.theta >= -tau - THETA_TOL && atom.theta <= THETA_TOL) {
                return Err(Error::InvalidKernel(format!("atom at {} outside [-{tau}, 0]", atom.theta)));
            }
            let theta = atom.theta.clamp(-tau, 0.0);
            match merged.iter_mut().find(|a| (a.theta - theta).abs() <= THETA_TOL) {
                Some(existing) => existing.weight += &atom.weight,
                None => merged.push(Atom { theta, weight: atom.weight }),
            }
        }
        merged.sort_by(|a, b| a.theta.total_cmp(&b.theta));
        for piece in &density {
            if piece.coeffs.is_empty() {
                return Err(Error::InvalidKernel("density piece without coefficients".into()));
            }
            for c in &piece.coeffs {
                check_matrix(c, dim)?;
            }
            if !(piece.start < piece.end) || piece.start < -tau - THETA_TOL || piece.end > THETA_TOL {
                return Err(Error::InvalidKernel(format!(
                    "density piece [{}, {}] must be a non-empty subinterval of [-{tau}, 0]",
                    piece.start, piece.end
                )));
            }
        }
        let mut kernel = Self { dim, tau, atoms: merged, density, quad_order, quad: Vec::new() };
        kernel.quad = kernel.build_quadrature();
        Ok(kernel)
    }

    /// Scalar kernel with a single point mass.
    pub fn point_mass(tau: f64, theta: f64, weight: f64) -> Result<Self> {
        Self::new(1, tau, vec![Atom { theta, weight: DMatrix::from_element(1, 1, weight) }], vec![], Self::DEFAULT_QUAD_ORDER)
    }

    pub fn zero(dim: usize, tau: f64) -> Self {
        Self::new(dim, tau, vec![], vec![], Self::DEFAULT_QUAD_ORDER).expect("zero kernel is well formed")
    }

    fn build_quadrature(&self) -> Vec<(f64, DMatrix<f64>)> {
        let (x, w) = gauss_legendre(self.quad_order);
        let mut quad = Vec::new();
        for piece in &self.density {
            let half = 0.5 * (piece.end - piece.start);
            let mid = 0.5 * (piece.end + piece.start);
            for (xq, wq) in x.iter().zip(&w) {
                let theta = mid + half * xq;
                quad.push((theta, piece.at(theta) * (wq * half)));
            }
        }
        quad
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn density(&self) -> &[DensityPiece] {
        &self.density
    }

    pub fn quad_order(&self) -> usize {
        self.quad_order
    }

    /// `L(phi)` with dimension and span checks.
    pub fn apply(&self, segment: &dyn Segment) -> Result<Vec<f64>> {
        if segment.dim() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: segment.dim() });
        }
        if segment.span() < self.tau * (1.0 - 1e-12) {
            return Err(Error::SegmentTooShort { span: segment.span(), tau: self.tau });
        }
        let mut out = vec![0.0; self.dim];
        self.apply_into(segment, &mut out);
        Ok(out)
    }

    /// Unchecked `L(phi)`, written into `out`.
    pub fn apply_into(&self, segment: &dyn Segment, out: &mut [f64]) {
        out.fill(0.0);
        let mut buf: SmallVec<[f64; 8]> = SmallVec::from_elem(0.0, self.dim);
        let nodes = self.atoms.iter().map(|a| (a.theta, &a.weight)).chain(self.quad.iter().map(|(t, w)| (*t, w)));
        for (theta, w) in nodes {
            segment.eval_into(theta, &mut buf);
            for j in 0..self.dim {
                let phi = buf[j];
                if phi != 0.0 {
                    for i in 0..self.dim {
                        out[i] += w[(i, j)] * phi;
                    }
                }
            }
        }
    }

    /// `L(e^{z .} I)`; the density part is integrated in closed form.
    pub fn symbol(&self, z: Complex64) -> DMatrix<Complex64> {
        let mut m = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for atom in &self.atoms {
            let e = (z * atom.theta).exp();
            m.zip_apply(&atom.weight, |acc, w| *acc += e * w);
        }
        for piece in &self.density {
            let len = piece.end - piece.start;
            let moments = exp_moments(z, len, piece.coeffs.len() - 1);
            let shift = (z * piece.start).exp();
            for (c, mk) in piece.coeffs.iter().zip(&moments) {
                let f = shift * mk;
                m.zip_apply(c, |acc, w| *acc += f * w);
            }
        }
        m
    }

    /// `d/dz L(e^{z .} I) = L(theta e^{z theta} I)`.
    pub fn symbol_deriv(&self, z: Complex64) -> DMatrix<Complex64> {
        let mut m = DMatrix::<Complex64>::zeros(self.dim, self.dim);
        for atom in &self.atoms {
            let e = (z * atom.theta).exp() * atom.theta;
            m.zip_apply(&atom.weight, |acc, w| *acc += e * w);
        }
        for piece in &self.density {
            let len = piece.end - piece.start;
            let moments = exp_moments(z, len, piece.coeffs.len());
            let shift = (z * piece.start).exp();
            for (k, c) in piece.coeffs.iter().enumerate() {
                // theta = start + u
                let f = shift * (moments[k] * piece.start + moments[k + 1]);
                m.zip_apply(c, |acc, w| *acc += f * w);
            }
        }
        m
    }

    /// `L(1)`, the kernel applied to constant unit columns.
    pub fn total_mass(&self) -> DMatrix<f64> {
        self.symbol(Complex64::new(0.0, 0.0)).map(|c| c.re)
    }

    /// Operator norm bound in the max norm: atom row-sum norms plus the
    /// integrated row-sum norm of the density.
    pub fn norm(&self) -> f64 {
        let row_norm = |m: &DMatrix<f64>| (0..m.nrows()).map(|i| m.row(i).iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max);
        let mut total: f64 = self.atoms.iter().map(|a| row_norm(&a.weight)).sum();
        let (x, w) = gauss_legendre(NORM_NODES);
        for piece in &self.density {
            let half = 0.5 * (piece.end - piece.start);
            let mid = 0.5 * (piece.end + piece.start);
            total += x.iter().zip(&w).map(|(xq, wq)| wq * half * row_norm(&piece.at(mid + half * xq))).sum::<f64>();
        }
        total
    }

    /// True when every atom weight and sampled density entry is non-negative.
    pub fn is_positive(&self) -> bool {
        let atoms_ok = self.atoms.iter().all(|a| a.weight.iter().all(|&w| w >= 0.0));
        let density_ok = self.density.iter().all(|p| {
            (0..=64).all(|k| {
                let theta = p.start + (p.end - p.start) * k as f64 / 64.0;
                p.at(theta).iter().all(|&w| w >= 0.0)
            })
        });
        atoms_ok && density_ok
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.weight.iter().all(|&w| w == 0.0))
            && self.density.iter().all(|p| p.coeffs.iter().all(|c| c.iter().all(|&w| w == 0.0)))
    }

    pub fn scaled(&self, s: f64) -> Self {
        let atoms = self.atoms.iter().map(|a| Atom { theta: a.theta, weight: &a.weight * s }).collect();
        let density = self
            .density
            .iter()
            .map(|p| DensityPiece { start: p.start, end: p.end, coeffs: p.coeffs.iter().map(|c| c * s).collect() })
            .collect();
        Self::new(self.dim, self.tau, atoms, density, self.quad_order).expect("scaling preserves validity")
    }

    /// Sum of two kernels of equal dimension; the horizon is the larger one.
    pub fn sum(&self, other: &Self) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other.dim });
        }
        let atoms = self.atoms.iter().chain(&other.atoms).cloned().collect();
        let density = self.density.iter().chain(&other.density).cloned().collect();
        Self::new(self.dim, self.tau.max(other.tau), atoms, density, self.quad_order.max(other.quad_order))
    }

    /// Left-multiply every weight by a fixed matrix (`M L`).
    pub fn premultiplied(&self, m: &DMatrix<f64>) -> Self {
        let atoms = self.atoms.iter().map(|a| Atom { theta: a.theta, weight: m * &a.weight }).collect();
        let density = self
            .density
            .iter()
            .map(|p| DensityPiece { start: p.start, end: p.end, coeffs: p.coeffs.iter().map(|c| m * c).collect() })
            .collect();
        Self::new(self.dim, self.tau, atoms, density, self.quad_order).expect("premultiplication preserves validity")
    }
}

fn check_matrix(m: &DMatrix<f64>, dim: usize) -> Result<()> {
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: m.nrows().max(m.ncols()) });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidKernel("non-finite weight".into()));
    }
    Ok(())
}

/// `M_k = \int_0^len u^k e^{z u} du` for `k = 0..=degree`.
pub(crate) fn exp_moments(z: Complex64, len: f64, degree: usize) -> Vec<Complex64> {
    let x = z * len;
    let threshold = (degree as f64 + 2.0).max(3.0);
    let mut out = Vec::with_capacity(degree + 1);
    if x.norm() < threshold {
        for k in 0..=degree {
            // sum_j x^j / (j! (k + j + 1)) * len^{k+1}
            let mut term = Complex64::new(1.0, 0.0);
            let mut sum = term / (k as f64 + 1.0);
            for j in 1..200 {
                term *= x / j as f64;
                let add = term / (k + j + 1) as f64;
                sum += add;
                if add.norm() < 1e-18 * sum.norm() {
                    break;
                }
            }
            out.push(sum * len.powi(k as i32 + 1));
        }
    } else {
        let e = x.exp();
        let mut prev = (e - 1.0) / z;
        out.push(prev);
        for k in 1..=degree {
            let next = (e * len.powi(k as i32) - prev * k as f64) / z;
            out.push(next);
            prev = next;
        }
    }
    out
}
