//! JSON model definition files.
//!
//! ```json
//! {
//!   "name": "hutchinson",
//!   "N": 1,
//!   "tau": 1.0,
//!   "kernel": {
//!     "atoms": [[-1.0, [[1.0]]]],
//!     "density": [{ "start": -1.0, "end": 0.0, "coeffs": [[[0.5]], [[0.25]]] }],
//!     "quad_order": 8
//!   },
//!   "builtin": { "kind": "logistic_distributed", "params": { "b": 1.0 } }
//! }
//! ```
//!
//! * `kernel.atoms` lists `[theta, W]` pairs, `W` an `N x N` row-major matrix.
//! * `kernel.density` pieces hold matrix coefficients of the polynomial in
//!   the local variable `theta - start`.
//! * `builtin` selects `fisher_kpp_delay` (`b`, `tau`, `K`),
//!   `logistic_distributed` (`b`; `L` is `kernel`) or `chemostat`
//!   (`D`, `S0`, `tau`, `m`, `a`, `d1`, `d2`).
//! * Without `builtin` the model is linear, `f(phi) = L phi`, with optional
//!   equilibrium `K` (default zero) and `diffusion` (default ones).
//!
//! Unknown fields are rejected.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::builtin::{Chemostat, LinearModel, LogisticDistributed};
use super::kernel::{Atom, DelayKernel, DensityPiece};
use super::ModelKind;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    pub name: String,
    #[serde(rename = "N")]
    pub n: usize,
    pub tau: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<KernelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<BuiltinSpec>,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diffusion: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default)]
    pub atoms: Vec<(f64, Vec<Vec<f64>>)>,
    #[serde(default)]
    pub density: Vec<DensitySpec>,
    #[serde(default = "default_quad_order")]
    pub quad_order: usize,
}

fn default_quad_order() -> usize {
    DelayKernel::DEFAULT_QUAD_ORDER
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensitySpec {
    pub start: f64,
    pub end: f64,
    pub coeffs: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum BuiltinSpec {
    FisherKppDelay(FisherParams),
    LogisticDistributed(LogisticParams),
    Chemostat(ChemostatParams),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FisherParams {
    pub b: f64,
    pub tau: f64,
    #[serde(rename = "K", default = "one")]
    pub k: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticParams {
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChemostatParams {
    #[serde(rename = "D")]
    pub dilution: f64,
    #[serde(rename = "S0")]
    pub s0: f64,
    pub tau: f64,
    pub m: f64,
    pub a: f64,
    #[serde(default = "one")]
    pub d1: f64,
    #[serde(default = "one")]
    pub d2: f64,
}

fn one() -> f64 {
    1.0
}

fn matrix(rows: &[Vec<f64>], n: usize) -> Result<DMatrix<f64>> {
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(Error::InvalidKernel(format!("weight matrices must be {n} x {n}")));
    }
    Ok(DMatrix::from_row_iterator(n, n, rows.iter().flatten().copied()))
}

impl KernelSpec {
    pub fn build(&self, n: usize, tau: f64) -> Result<DelayKernel> {
        let atoms = self
            .atoms
            .iter()
            .map(|(theta, w)| Ok(Atom { theta: *theta, weight: matrix(w, n)? }))
            .collect::<Result<Vec<_>>>()?;
        let density = self
            .density
            .iter()
            .map(|d| {
                Ok(DensityPiece {
                    start: d.start,
                    end: d.end,
                    coeffs: d.coeffs.iter().map(|c| matrix(c, n)).collect::<Result<Vec<_>>>()?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        DelayKernel::new(n, tau, atoms, density, self.quad_order)
    }
}

impl ModelSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<ModelKind> {
        if self.n == 0 {
            return Err(Error::Config("N must be positive".into()));
        }
        if !(self.tau.is_finite() && self.tau >= 0.0) {
            return Err(Error::Config(format!("tau must be non-negative, got {}", self.tau)));
        }
        let expect_n = |n: usize| {
            if self.n != n {
                Err(Error::Config(format!("builtin model has N = {n}, file says {}", self.n)))
            } else {
                Ok(())
            }
        };
        let expect_tau = |tau: f64| {
            if (self.tau - tau).abs() > 1e-12 * (1.0 + tau) {
                Err(Error::Config(format!("builtin delay {tau} disagrees with top-level tau {}", self.tau)))
            } else {
                Ok(())
            }
        };
        let model = match &self.builtin {
            Some(BuiltinSpec::FisherKppDelay(p)) => {
                expect_n(1)?;
                expect_tau(p.tau)?;
                self.no_extras(true)?;
                ModelKind::Logistic(LogisticDistributed::fisher_kpp_delay(p.b, p.tau, p.k)?)
            }
            Some(BuiltinSpec::LogisticDistributed(p)) => {
                expect_n(1)?;
                self.no_extras(false)?;
                let kernel = self
                    .kernel
                    .as_ref()
                    .ok_or_else(|| Error::Config("logistic_distributed needs `kernel` (the operator L)".into()))?
                    .build(1, self.tau)?;
                ModelKind::Logistic(LogisticDistributed::new(p.b, kernel)?)
            }
            Some(BuiltinSpec::Chemostat(p)) => {
                expect_n(2)?;
                expect_tau(p.tau)?;
                self.no_extras(true)?;
                ModelKind::Chemostat(Chemostat::new(p.dilution, p.s0, p.tau, p.m, p.a, p.d1, p.d2)?)
            }
            None => {
                let kernel = self
                    .kernel
                    .as_ref()
                    .ok_or_else(|| Error::Config("a model without `builtin` needs `kernel`".into()))?
                    .build(self.n, self.tau)?;
                let k = self.equilibrium.clone().unwrap_or_else(|| vec![0.0; self.n]);
                let d = self.diffusion.clone().unwrap_or_else(|| vec![1.0; self.n]);
                ModelKind::Linear(LinearModel::new(self.name.clone(), kernel, k, d)?)
            }
        };
        Ok(model)
    }

    fn no_extras(&self, kernel_forbidden: bool) -> Result<()> {
        if kernel_forbidden && self.kernel.is_some() {
            return Err(Error::Config("this builtin derives its own kernel; remove `kernel`".into()));
        }
        if self.equilibrium.is_some() || self.diffusion.is_some() {
            return Err(Error::Config("`K` and `diffusion` only apply to linear models".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Model;

    #[test]
    fn parses_fisher_builtin() {
        let spec = ModelSpec::from_json(
            r#"{"name":"f","N":1,"tau":1.0,"builtin":{"kind":"fisher_kpp_delay","params":{"b":1.0,"tau":1.0,"K":1.0}}}"#,
        )
        .unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.name(), "fisher_kpp_delay");
        assert_eq!(m.equilibrium(), &[1.0]);
    }

    #[test]
    fn parses_distributed_kernel() {
        let spec = ModelSpec::from_json(
            r#"{"name":"d","N":1,"tau":1.0,
                "kernel":{"atoms":[[-0.5,[[0.5]]]],"density":[{"start":-1.0,"end":0.0,"coeffs":[[[0.5]]]}]},
                "builtin":{"kind":"logistic_distributed","params":{"b":1.0}}}"#,
        )
        .unwrap();
        let m = spec.build().unwrap();
        assert!((m.equilibrium()[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_unknown_fields_and_mismatches() {
        assert!(ModelSpec::from_json(r#"{"name":"x","N":1,"tau":1.0,"colour":"red"}"#).is_err());
        assert!(ModelSpec::from_json(
            r#"{"name":"f","N":1,"tau":1.0,"builtin":{"kind":"fisher_kpp_delay","params":{"b":1.0,"tau":1.0,"q":1}}}"#
        )
        .is_err());
        let spec = ModelSpec::from_json(
            r#"{"name":"f","N":2,"tau":1.0,"builtin":{"kind":"fisher_kpp_delay","params":{"b":1.0,"tau":1.0}}}"#,
        )
        .unwrap();
        assert!(spec.build().is_err());
        let spec = ModelSpec::from_json(
            r#"{"name":"f","N":1,"tau":2.0,"builtin":{"kind":"fisher_kpp_delay","params":{"b":1.0,"tau":1.0}}}"#,
        )
        .unwrap();
        assert!(spec.build().is_err());
    }

    #[test]
    fn linear_model_from_kernel() {
        let spec = ModelSpec::from_json(r#"{"name":"lin","N":1,"tau":1.0,"kernel":{"atoms":[[-1.0,[[-1.0]]]]},"K":[0.5]}"#)
            .unwrap();
        let m = spec.build().unwrap();
        assert_eq!(m.equilibrium(), &[0.5]);
        let round = serde_json::to_string(&spec).unwrap();
        assert_eq!(ModelSpec::from_json(&round).unwrap(), spec);
    }
}
