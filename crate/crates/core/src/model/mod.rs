//! Delay kernels, history segments, reaction functionals and the
//! hypothesis checkers that gate the rest of the pipeline.

pub mod builtin;
pub mod file;
pub mod history;
pub mod hypotheses;
pub mod kernel;

pub use builtin::{linearization_at_k, linearization_at_zero, Chemostat, LinearModel, LogisticDistributed};
pub use file::ModelSpec;
pub use history::{ConstSegment, FnSegment, HistorySegment, Segment};
pub use kernel::{Atom, DelayKernel, DensityPiece};

/// A nonlinear functional `f: C([-tau, 0]; R^N) -> R^N` with equilibria `0`
/// and `K > 0`.
///
/// Implementations are immutable; every method is a pure function of its
/// inputs.
pub trait Model: Send + Sync + std::fmt::Debug {
    fn name(&self) -> &str;
    fn dim(&self) -> usize;
    fn tau(&self) -> f64;
    /// The positive equilibrium `K`.
    fn equilibrium(&self) -> &[f64];
    /// Diffusion coefficients `d_i` of the reaction-diffusion system.
    fn diffusion(&self) -> &[f64];
    fn eval(&self, segment: &dyn Segment, out: &mut [f64]);
    /// `Df(phi)` as a delay kernel.
    fn jacobian_at(&self, segment: &dyn Segment) -> DelayKernel;
    fn params(&self) -> serde_json::Value;

    /// Upper corner of the box random positive histories are drawn from.
    fn upper_box(&self) -> Vec<f64> {
        self.equilibrium().iter().map(|k| 2.0 * k.abs().max(1e-12)).collect()
    }

    fn k_norm(&self) -> f64 {
        crate::numerics::max_norm(self.equilibrium())
    }
}

/// The closed set of models the toolkit knows how to build from a file.
#[derive(Debug, Clone)]
pub enum ModelKind {
    Linear(LinearModel),
    Logistic(LogisticDistributed),
    Chemostat(Chemostat),
}

impl ModelKind {
    pub fn as_model(&self) -> &dyn Model {
        match self {
            ModelKind::Linear(m) => m,
            ModelKind::Logistic(m) => m,
            ModelKind::Chemostat(m) => m,
        }
    }
}

impl Model for ModelKind {
    fn name(&self) -> &str {
        self.as_model().name()
    }
    fn dim(&self) -> usize {
        self.as_model().dim()
    }
    fn tau(&self) -> f64 {
        self.as_model().tau()
    }
    fn equilibrium(&self) -> &[f64] {
        self.as_model().equilibrium()
    }
    fn diffusion(&self) -> &[f64] {
        self.as_model().diffusion()
    }
    fn eval(&self, segment: &dyn Segment, out: &mut [f64]) {
        self.as_model().eval(segment, out)
    }
    fn jacobian_at(&self, segment: &dyn Segment) -> DelayKernel {
        self.as_model().jacobian_at(segment)
    }
    fn params(&self) -> serde_json::Value {
        self.as_model().params()
    }
    fn upper_box(&self) -> Vec<f64> {
        self.as_model().upper_box()
    }
}
