//! Method-of-lines simulation of `u_t = D u_xx + f(u_t(., x))` on `[0, X]`
//! with zero-flux ends, used to cross-check computed profiles.

mod field;
mod front;

use serde::{Deserialize, Serialize};

pub use field::{simulate, FieldRecord, Snapshot};
pub use front::{front_position, speed_regression, translation_error, FrontSeries, SpeedFit, TranslationError};

use crate::error::{Error, Result};
use crate::model::Model;
use crate::profile::WaveProfile;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PdeConfig {
    pub dx: f64,
    pub dt: f64,
    /// Domain length `X`; `None` picks `40 max(1, c t_end / 5)`.
    pub length: Option<f64>,
    pub t_end: f64,
    /// Steps between stored snapshots.
    pub snapshot_stride: usize,
    /// Front level as a fraction of `|K|`.
    pub level: f64,
    /// Component whose crossing defines the front.
    pub component: usize,
}

impl Default for PdeConfig {
    fn default() -> Self {
        Self { dx: 0.05, dt: 0.001, length: None, t_end: 5.0, snapshot_stride: 100, level: 0.5, component: 0 }
    }
}

impl PdeConfig {
    pub fn domain_length(&self, c: f64) -> f64 {
        self.length.unwrap_or(40.0 * (c * self.t_end / 5.0).max(1.0))
    }

    /// Stability and delay-resolution checks on `dt`.
    pub fn check(&self, model: &dyn Model) -> Result<()> {
        if !(self.dx > 0.0 && self.dt > 0.0 && self.t_end >= 0.0 && self.snapshot_stride > 0) {
            return Err(Error::Config("pde needs dx > 0, dt > 0, t_end >= 0 and snapshot_stride > 0".into()));
        }
        let dmax = model.diffusion().iter().fold(0.0_f64, |m, &d| m.max(d));
        let mut bound = if dmax > 0.0 { 0.4 * self.dx * self.dx / dmax } else { f64::INFINITY };
        if model.tau() > 0.0 {
            bound = bound.min(model.tau() / 8.0);
        }
        if self.dt > bound * (1.0 + 1e-12) {
            return Err(Error::Cfl { dt: self.dt, bound });
        }
        Ok(())
    }
}

/// Outcome of evolving a profile-initialised field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub c: f64,
    pub length: f64,
    pub x0: f64,
    pub speed: f64,
    pub r2: f64,
    /// Shift-minimised L2 error at `t_end`.
    pub l2_error: f64,
    /// `l2_error / (|K| sqrt(X))`.
    pub relative_error: f64,
    pub shift: f64,
    /// Same error against a profile moving 10% too fast.
    pub wrong_speed_error: f64,
    pub min_value: f64,
    pub ok: bool,
}

/// Initial history `u(theta, x) = psi(theta + (x - x0) / c)`.
pub fn profile_history<'a>(psi: &'a WaveProfile, x0: f64) -> impl Fn(f64, f64, &mut [f64]) + Sync + 'a {
    let c = psi.c;
    move |theta, x, out| psi.eval_into(theta + (x - x0) / c, out)
}

/// Evolve `psi` as initial data to `t_end`; measure front speed and the
/// translation error against `psi` moving at speed `c`.
pub fn validate_profile(model: &dyn Model, psi: &WaveProfile, cfg: &PdeConfig) -> Result<(ValidationReport, FieldRecord, FrontSeries)> {
    let c = psi.c;
    let length = cfg.domain_length(c);
    let x0 = 0.5 * length + 0.5 * c * cfg.t_end;
    let record = simulate(model, &profile_history(psi, x0), length, cfg)?;
    let k_norm = model.k_norm();
    let level = cfg.level * model.equilibrium()[cfg.component];
    let series = front_position(&record, level, cfg.component)?;
    let fit = speed_regression(&series, length / 3.0, 2.0 * length / 3.0, 0.0)?;
    let last = record.snapshots.last().expect("simulate stores the final slice");
    let te = translation_error(&record, last, psi, c, x0)?;
    let wrong = translation_error(&record, last, psi, 1.1 * c, x0)?;
    let relative_error = te.l2 / (k_norm * length.sqrt());
    let ok = relative_error <= 1e-2 && (fit.speed - c).abs() <= 0.05 * c && record.min_value >= -1e-10;
    let report = ValidationReport {
        c,
        length,
        x0,
        speed: fit.speed,
        r2: fit.r2,
        l2_error: te.l2,
        relative_error,
        shift: te.shift,
        wrong_speed_error: wrong.l2,
        min_value: record.min_value,
        ok,
    };
    Ok((report, record, series))
}
