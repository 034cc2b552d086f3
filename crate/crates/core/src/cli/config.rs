//! Run configuration: a model definition plus a `pipeline` section.
//!
//! ```json
//! {
//!   "name": "fisher", "N": 1, "tau": 1.0,
//!   "builtin": { "kind": "fisher_kpp_delay", "params": { "b": 1.0, "tau": 1.0 } },
//!   "pipeline": {
//!     "speeds": [4.0, 6.0, 10.0],
//!     "validate_speed": 6.0,
//!     "seed": 0,
//!     "out": "out",
//!     "write_upstream": true,
//!     "tolerances": { "profile_step": 0.01 },
//!     "pde": { "dx": 0.05, "dt": 0.001, "t_end": 5.0 }
//!   }
//! }
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::Tolerances;
use crate::error::{Error, Result};
use crate::model::{ModelKind, ModelSpec};
use crate::pde::PdeConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Pipeline {
    pub speeds: Vec<f64>,
    /// Speed simulated by `validate`; defaults to the first entry of `speeds`.
    pub validate_speed: Option<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
    /// Also write the artifacts of upstream stages a command recomputes.
    pub write_upstream: bool,
    pub tolerances: Tolerances,
    pub pde: PdeConfig,
}

impl Default for Pipeline {
    fn default() -> Self {
        Self {
            speeds: Vec::new(),
            validate_speed: None,
            seed: 0,
            out: None,
            write_upstream: true,
            tolerances: Tolerances::default(),
            pde: PdeConfig::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub pipeline: Pipeline,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let mut value: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let obj = value.as_object_mut().ok_or_else(|| Error::Config("config must be a JSON object".into()))?;
        let pipeline = match obj.remove("pipeline") {
            Some(p) => serde_json::from_value(p).map_err(|e| Error::Config(format!("pipeline: {e}")))?,
            None => Pipeline::default(),
        };
        let model: ModelSpec = serde_json::from_value(value).map_err(|e| Error::Config(format!("model: {e}")))?;
        let cfg = Self { model, pipeline };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.pipeline.tolerances.validate()?;
        if let Some(c) = self.pipeline.speeds.iter().chain(&self.pipeline.validate_speed).find(|c| !(c.is_finite() && **c > 0.0)) {
            return Err(Error::Config(format!("speeds must be positive, got {c}")));
        }
        let pde = &self.pipeline.pde;
        if !(pde.dx > 0.0 && pde.dt > 0.0 && pde.t_end > 0.0 && pde.snapshot_stride > 0 && pde.level > 0.0 && pde.level < 1.0) {
            return Err(Error::Config("pde needs dx, dt, t_end > 0, snapshot_stride > 0 and level in (0, 1)".into()));
        }
        if pde.length.is_some_and(|x| !(x > 0.0)) {
            return Err(Error::Config("pde.length must be positive".into()));
        }
        Ok(())
    }

    pub fn build_model(&self) -> Result<ModelKind> {
        self.model.build().map_err(|e| match e {
            Error::Config(_) => e,
            other => Error::Config(other.to_string()),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FISHER: &str = r#"{"name": "f", "N": 1, "tau": 1.0,
        "builtin": {"kind": "fisher_kpp_delay", "params": {"b": 1.0, "tau": 1.0}}"#;

    #[test]
    fn pipeline_section_is_optional() {
        let cfg = RunConfig::from_json(&format!("{FISHER}}}")).unwrap();
        assert_eq!(cfg.pipeline, Pipeline::default());
        let cfg = RunConfig::from_json(&format!(r#"{FISHER}, "pipeline": {{"speeds": [6.0], "tolerances": {{"k_max": 50}}}}}}"#)).unwrap();
        assert_eq!(cfg.pipeline.speeds, vec![6.0]);
        assert_eq!(cfg.pipeline.tolerances.k_max, 50);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(&format!(r#"{FISHER}, "extra": 1}}"#)).is_err());
        assert!(RunConfig::from_json(&format!(r#"{FISHER}, "pipeline": {{"sped": [1.0]}}}}"#)).is_err());
        assert!(RunConfig::from_json(&format!(r#"{FISHER}, "pipeline": {{"tolerances": {{"tol": 1.0}}}}}}"#)).is_err());
    }

    #[test]
    fn non_positive_values_are_rejected() {
        assert!(RunConfig::from_json(&format!(r#"{FISHER}, "pipeline": {{"speeds": [-1.0]}}}}"#)).is_err());
        assert!(RunConfig::from_json(&format!(r#"{FISHER}, "pipeline": {{"tolerances": {{"tol_fix": 0.0}}}}}}"#)).is_err());
    }
}
