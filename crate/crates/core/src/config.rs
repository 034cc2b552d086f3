//! Numerical tolerances and defaults shared by every stage.
//!
//! All knobs live in [`Tolerances`]; the CLI config may override any field.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative tolerance for evaluating f at equilibria.
    pub eval_tol: f64,

    /// Segments drawn by the (H2)(ii) falsification sampler.
    pub positivity_samples: usize,
    /// Largest margin the positivity sampler accepts.
    pub beta_max: f64,

    /// Random initial histories used as (H3) evidence.
    pub h3_runs: usize,
    /// Distance to K the (H3) runs must reach.
    pub h3_tol: f64,
    /// Horizon of an (H3) run in units of max(tau, 1).
    pub h3_horizon: f64,

    /// Newton / bisection tolerance on the dominant real root.
    pub root_tol: f64,
    /// Sign-scan points used to bracket real roots.
    pub scan_points: usize,
    /// Accepted distance of the winding estimate from an integer.
    pub winding_tol: f64,
    /// Relative nudge applied to a rectangle whose boundary hits a zero.
    pub rect_nudge: f64,
    /// Left strip margin as a fraction of lambda0.
    pub strip_left: f64,
    /// Right strip margin as a fraction of lambda0.
    pub strip_right: f64,
    /// Largest epsilon the continuation accepts.
    pub eps_max: f64,

    /// Heteroclinic seed amplitude as a fraction of |K|.
    pub seed_amp: f64,
    /// Distance to K that marks the heteroclinic as converged.
    pub tol_k: f64,
    /// Trailing window (in units of max(tau, 1)) over which tol_k must hold.
    pub k_window: f64,
    /// Integration horizon in units of max(tau, 1).
    pub t_max: f64,
    /// Heteroclinic step; `None` picks tau/40 (0.01 without delay).
    pub het_step: Option<f64>,
    /// Upper edge of the positivity box in units of |K|.
    pub box_factor: f64,

    /// Grid step of the wave profile.
    pub profile_step: f64,
    /// Stopping tolerance on the weighted-norm change.
    pub tol_fix: f64,
    /// Iteration cap of the fixed-point solver.
    pub k_max: usize,
    /// Consecutive non-contracting iterations tolerated.
    pub non_contraction_streak: usize,
    /// Left truncation: tail amplitude at T- relative to |K|.
    pub left_cut: f64,
    /// Right truncation: distance to K at T+.
    pub right_cut: f64,
    /// Relative mismatch tolerated between the left tail and psi(T-).
    pub tail_match: f64,
    /// Linear-regime threshold as a fraction of |K|.
    pub linear_regime: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            eval_tol: 1e-10,
            positivity_samples: 1000,
            beta_max: 1e6,
            h3_runs: 20,
            h3_tol: 1e-6,
            h3_horizon: 200.0,
            root_tol: 1e-12,
            scan_points: 4000,
            winding_tol: 0.25,
            rect_nudge: 1e-3,
            strip_left: 0.1,
            strip_right: 1.0,
            eps_max: 0.5,
            seed_amp: 1e-4,
            tol_k: 1e-8,
            k_window: 5.0,
            t_max: 200.0,
            het_step: None,
            box_factor: 100.0,
            profile_step: 0.01,
            tol_fix: 1e-9,
            k_max: 500,
            non_contraction_streak: 5,
            left_cut: 1e-6,
            right_cut: 1e-8,
            tail_match: 5e-2,
            linear_regime: 1e-2,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("eval_tol", self.eval_tol),
            ("beta_max", self.beta_max),
            ("h3_tol", self.h3_tol),
            ("h3_horizon", self.h3_horizon),
            ("root_tol", self.root_tol),
            ("winding_tol", self.winding_tol),
            ("rect_nudge", self.rect_nudge),
            ("strip_left", self.strip_left),
            ("strip_right", self.strip_right),
            ("eps_max", self.eps_max),
            ("seed_amp", self.seed_amp),
            ("tol_k", self.tol_k),
            ("k_window", self.k_window),
            ("t_max", self.t_max),
            ("box_factor", self.box_factor),
            ("profile_step", self.profile_step),
            ("tol_fix", self.tol_fix),
            ("left_cut", self.left_cut),
            ("right_cut", self.right_cut),
            ("tail_match", self.tail_match),
            ("linear_regime", self.linear_regime),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::Config(format!("tolerance `{name}` must be positive, got {value}")));
            }
        }
        if let Some(h) = self.het_step {
            if !(h.is_finite() && h > 0.0) {
                return Err(Error::Config(format!("het_step must be positive, got {h}")));
            }
        }
        if self.winding_tol >= 0.5 {
            return Err(Error::Config("winding_tol must be below 0.5".into()));
        }
        if self.positivity_samples == 0 || self.scan_points < 2 || self.k_max == 0 {
            return Err(Error::Config("sample counts must be positive".into()));
        }
        Ok(())
    }
}
