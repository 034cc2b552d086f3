//! Built-in reaction functionals.

use nalgebra::DMatrix;
use serde_json::json;

use super::history::{ConstSegment, Segment};
use super::kernel::{Atom, DelayKernel};
use super::Model;
use crate::error::{Error, Result};

/// `f(phi) = L phi`, with a user-supplied equilibrium `K`.
#[derive(Debug, Clone)]
pub struct LinearModel {
    name: String,
    kernel: DelayKernel,
    equilibrium: Vec<f64>,
    diffusion: Vec<f64>,
}

impl LinearModel {
    pub fn new(name: impl Into<String>, kernel: DelayKernel, equilibrium: Vec<f64>, diffusion: Vec<f64>) -> Result<Self> {
        let n = kernel.dim();
        if equilibrium.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: equilibrium.len() });
        }
        check_diffusion(&diffusion, n)?;
        Ok(Self { name: name.into(), kernel, equilibrium, diffusion })
    }

    pub fn kernel(&self) -> &DelayKernel {
        &self.kernel
    }
}

impl Model for LinearModel {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        self.kernel.dim()
    }
    fn tau(&self) -> f64 {
        self.kernel.tau()
    }
    fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }
    fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }
    fn eval(&self, segment: &dyn Segment, out: &mut [f64]) {
        self.kernel.apply_into(segment, out)
    }
    fn jacobian_at(&self, _segment: &dyn Segment) -> DelayKernel {
        self.kernel.clone()
    }
    fn params(&self) -> serde_json::Value {
        json!({ "kind": "linear", "norm": self.kernel.norm() })
    }
}

/// Generalised logistic law `f(phi) = b phi(0) [1 - L phi]` with a positive
/// kernel `L`; the positive equilibrium is `K = 1 / L(1)`.
#[derive(Debug, Clone)]
pub struct LogisticDistributed {
    name: String,
    b: f64,
    kernel: DelayKernel,
    equilibrium: Vec<f64>,
    diffusion: Vec<f64>,
    params: serde_json::Value,
}

impl LogisticDistributed {
    pub fn new(b: f64, kernel: DelayKernel) -> Result<Self> {
        if kernel.dim() != 1 {
            return Err(Error::InvalidModel("logistic_distributed is scalar".into()));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::InvalidModel(format!("growth rate b must be positive, got {b}")));
        }
        if !kernel.is_positive() || kernel.is_zero() {
            return Err(Error::InvalidModel("logistic_distributed needs a nonzero positive kernel L".into()));
        }
        let mass = kernel.total_mass()[(0, 0)];
        let tau = kernel.tau();
        let params = json!({ "kind": "logistic_distributed", "b": b, "tau": tau, "L1": mass, "b_tau": b * tau });
        Ok(Self { name: "logistic_distributed".into(), b, kernel, equilibrium: vec![1.0 / mass], diffusion: vec![1.0], params })
    }

    /// Single discrete delay: `f(phi) = b phi(0) [1 - phi(-tau) / K]`.
    /// `tau = 0` gives the classical logistic/KPP nonlinearity.
    pub fn fisher_kpp_delay(b: f64, tau: f64, k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 0.0) {
            return Err(Error::InvalidModel(format!("carrying capacity K must be positive, got {k}")));
        }
        let kernel = DelayKernel::point_mass(tau, -tau, 1.0 / k)?;
        let mut model = Self::new(b, kernel)?;
        model.name = "fisher_kpp_delay".into();
        model.params = json!({ "kind": "fisher_kpp_delay", "b": b, "tau": tau, "K": k, "b_tau": b * tau });
        Ok(model)
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn kernel(&self) -> &DelayKernel {
        &self.kernel
    }

    /// Product `b * tau` and whether the global-attractivity condition
    /// `b tau <= 3/2` holds.
    pub fn attractivity_condition(&self) -> (f64, bool) {
        let bt = self.b * self.kernel.tau();
        (bt, bt <= 1.5)
    }
}

impl Model for LogisticDistributed {
    fn name(&self) -> &str {
        &self.name
    }
    fn dim(&self) -> usize {
        1
    }
    fn tau(&self) -> f64 {
        self.kernel.tau()
    }
    fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }
    fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }
    fn eval(&self, segment: &dyn Segment, out: &mut [f64]) {
        let mut lphi = [0.0];
        self.kernel.apply_into(segment, &mut lphi);
        let mut now = [0.0];
        segment.eval_into(0.0, &mut now);
        out[0] = self.b * now[0] * (1.0 - lphi[0]);
    }
    fn jacobian_at(&self, segment: &dyn Segment) -> DelayKernel {
        // Df(phi) psi = b psi(0) (1 - L phi) - b phi(0) L psi
        let mut lphi = [0.0];
        self.kernel.apply_into(segment, &mut lphi);
        let mut now = [0.0];
        segment.eval_into(0.0, &mut now);
        let local = DelayKernel::new(
            1,
            self.kernel.tau(),
            vec![Atom { theta: 0.0, weight: DMatrix::from_element(1, 1, self.b * (1.0 - lphi[0])) }],
            vec![],
            self.kernel.quad_order(),
        )
        .expect("atom at zero is valid");
        local.sum(&self.kernel.scaled(-self.b * now[0])).expect("same dimension")
    }
    fn params(&self) -> serde_json::Value {
        self.params.clone()
    }
}

/// Chemostat with delayed growth response in washout-shifted coordinates
/// `s = S0 - S`:
///
/// ```text
/// s'(t) = -D s(t) + F(S0 - s(t)) u(t)
/// u'(t) = e^{-D tau} F(S0 - s(t - tau)) u(t - tau) - D u(t)
/// ```
///
/// with Michaelis–Menten uptake `F(S) = m S / (a + S)`. For `S < 0` the
/// uptake is continued linearly with slope `m / a`, keeping `F` increasing
/// and finite on the whole line.
#[derive(Debug, Clone)]
pub struct Chemostat {
    pub dilution: f64,
    pub s0: f64,
    pub tau: f64,
    pub m: f64,
    pub a: f64,
    diffusion: Vec<f64>,
    equilibrium: Vec<f64>,
    survival: Option<(f64, f64)>,
}

impl Chemostat {
    pub fn new(dilution: f64, s0: f64, tau: f64, m: f64, a: f64, d1: f64, d2: f64) -> Result<Self> {
        for (name, v) in [("D", dilution), ("S0", s0), ("m", m), ("a", a), ("d1", d1), ("d2", d2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidModel(format!("chemostat parameter {name} must be positive, got {v}")));
            }
        }
        if !(tau.is_finite() && tau >= 0.0) {
            return Err(Error::InvalidModel(format!("chemostat delay must be non-negative, got {tau}")));
        }
        let mut model = Self { dilution, s0, tau, m, a, diffusion: vec![d1, d2], equilibrium: vec![0.0, 0.0], survival: None };
        model.survival = model.survival_state();
        if let Some((s_bar, u_bar)) = model.survival {
            model.equilibrium = vec![s0 - s_bar, u_bar];
        }
        Ok(model)
    }

    pub fn uptake(&self, s: f64) -> f64 {
        if s >= 0.0 {
            self.m * s / (self.a + s)
        } else {
            self.m / self.a * s
        }
    }

    pub fn uptake_deriv(&self, s: f64) -> f64 {
        if s >= 0.0 {
            self.m * self.a / ((self.a + s) * (self.a + s))
        } else {
            self.m / self.a
        }
    }

    /// `D e^{D tau}`, the uptake level the survival state must reach.
    pub fn washout_threshold(&self) -> f64 {
        self.dilution * (self.dilution * self.tau).exp()
    }

    /// `(S_bar, u_bar) = (F^{-1}(D e^{D tau}), e^{-D tau} (S0 - S_bar))` in
    /// original coordinates, when `F(S0) > D e^{D tau}`.
    pub fn survival_state(&self) -> Option<(f64, f64)> {
        let y = self.washout_threshold();
        if self.uptake(self.s0) <= y || y >= self.m {
            return None;
        }
        let s_bar = self.a * y / (self.m - y);
        Some((s_bar, (-self.dilution * self.tau).exp() * (self.s0 - s_bar)))
    }

    /// Map shifted coordinates `(s, u)` back to `(S, u)`.
    pub fn to_original(&self, state: &[f64]) -> (f64, f64) {
        (self.s0 - state[0], state[1])
    }
}

impl Model for Chemostat {
    fn name(&self) -> &str {
        "chemostat"
    }
    fn dim(&self) -> usize {
        2
    }
    fn tau(&self) -> f64 {
        self.tau
    }
    fn equilibrium(&self) -> &[f64] {
        &self.equilibrium
    }
    fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }
    fn eval(&self, segment: &dyn Segment, out: &mut [f64]) {
        let mut now = [0.0; 2];
        let mut lag = [0.0; 2];
        segment.eval_into(0.0, &mut now);
        segment.eval_into(-self.tau, &mut lag);
        let d = self.dilution;
        out[0] = -d * now[0] + self.uptake(self.s0 - now[0]) * now[1];
        out[1] = (-d * self.tau).exp() * self.uptake(self.s0 - lag[0]) * lag[1] - d * now[1];
    }
    fn jacobian_at(&self, segment: &dyn Segment) -> DelayKernel {
        let mut now = [0.0; 2];
        let mut lag = [0.0; 2];
        segment.eval_into(0.0, &mut now);
        segment.eval_into(-self.tau, &mut lag);
        let d = self.dilution;
        let decay = (-d * self.tau).exp();
        let w0 = DMatrix::from_row_slice(
            2,
            2,
            &[-d - self.uptake_deriv(self.s0 - now[0]) * now[1], self.uptake(self.s0 - now[0]), 0.0, -d],
        );
        let w_tau = DMatrix::from_row_slice(
            2,
            2,
            &[0.0, 0.0, -decay * self.uptake_deriv(self.s0 - lag[0]) * lag[1], decay * self.uptake(self.s0 - lag[0])],
        );
        DelayKernel::new(
            2,
            self.tau,
            vec![Atom { theta: 0.0, weight: w0 }, Atom { theta: -self.tau, weight: w_tau }],
            vec![],
            DelayKernel::DEFAULT_QUAD_ORDER,
        )
        .expect("chemostat atoms are valid")
    }
    fn params(&self) -> serde_json::Value {
        json!({
            "kind": "chemostat",
            "D": self.dilution,
            "S0": self.s0,
            "tau": self.tau,
            "m": self.m,
            "a": self.a,
            "d1": self.diffusion[0],
            "d2": self.diffusion[1],
            "f_S0": self.uptake(self.s0),
            "threshold": self.washout_threshold(),
            "survival": self.survival.map(|(s, u)| vec![s, u]),
        })
    }
    fn upper_box(&self) -> Vec<f64> {
        vec![self.s0, 2.0 * self.equilibrium[1].max(1e-12)]
    }
}

fn check_diffusion(d: &[f64], n: usize) -> Result<()> {
    if d.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: d.len() });
    }
    if d.iter().any(|&x| !(x.is_finite() && x > 0.0)) {
        return Err(Error::InvalidModel("diffusion coefficients must be positive".into()));
    }
    Ok(())
}

/// Linearisation `Df(0)`.
pub fn linearization_at_zero(model: &dyn Model) -> DelayKernel {
    model.jacobian_at(&ConstSegment(vec![0.0; model.dim()]))
}

/// Linearisation `Df(K)`.
pub fn linearization_at_k(model: &dyn Model) -> DelayKernel {
    model.jacobian_at(&ConstSegment(model.equilibrium().to_vec()))
}
