use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{FieldRecord, Snapshot};
use crate::error::{Error, Result};
use crate::numerics::{golden_min, linear_fit};
use crate::output::write_csv;
use crate::profile::WaveProfile;

/// Largest spatial shift the translation fit may apply.
const MAX_SHIFT: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontSeries {
    pub t: Vec<f64>,
    pub x: Vec<f64>,
}

impl FrontSeries {
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let header = ["t".to_string(), "x_front".to_string()];
        write_csv(path, &header, self.t.iter().zip(&self.x).map(|(&t, &x)| vec![t, x]))
    }
}

/// Leftmost crossing of `level` by component `component`, linearly
/// interpolated, for every snapshot.
pub fn front_position(record: &FieldRecord, level: f64, component: usize) -> Result<FrontSeries> {
    let dim = record.dim;
    if component >= dim {
        return Err(Error::DimensionMismatch { expected: dim, got: component + 1 });
    }
    let mut series = FrontSeries { t: Vec::new(), x: Vec::new() };
    for snap in &record.snapshots {
        let u = |j: usize| snap.values[j * dim + component];
        let j = (0..record.nx).find(|&j| u(j) >= level).filter(|&j| j > 0);
        let j = j.ok_or(Error::NoCrossing { level, t: snap.t })?;
        let (a, b) = (u(j - 1), u(j));
        series.t.push(snap.t);
        series.x.push(record.x(j - 1) + (level - a) / (b - a) * record.dx);
    }
    Ok(series)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedFit {
    /// `-dx_front/dt`: positive for fronts moving towards `x = 0`.
    pub speed: f64,
    pub r2: f64,
    pub points: usize,
}

/// Regression of the front position on time over the samples with
/// `t >= t_from` and `x_front` in `[x_lo, x_hi]`.
pub fn speed_regression(series: &FrontSeries, x_lo: f64, x_hi: f64, t_from: f64) -> Result<SpeedFit> {
    let (ts, xs): (Vec<f64>, Vec<f64>) =
        series.t.iter().zip(&series.x).filter(|(&t, &x)| t >= t_from && x >= x_lo && x <= x_hi).map(|(&t, &x)| (t, x)).unzip();
    if ts.len() < 3 {
        return Err(Error::NoCrossing { level: f64::NAN, t: t_from });
    }
    let fit = linear_fit(&ts, &xs);
    Ok(SpeedFit { speed: -fit.slope, r2: fit.r_squared, points: ts.len() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TranslationError {
    pub l2: f64,
    /// Spatial shift of the best fit, within `[-1, 1]`.
    pub shift: f64,
}

/// `min_s |u(t, .) - psi((speed t + x - x0 + s) / c)|_{L2}` over
/// `|s| <= 1`, where `u(0, x) = psi((x - x0) / c)`.
pub fn translation_error(record: &FieldRecord, snap: &Snapshot, psi: &WaveProfile, speed: f64, x0: f64) -> Result<TranslationError> {
    let c = psi.c;
    let dim = record.dim;
    let arg = |x: f64, s: f64| (speed * snap.t + x - x0 + s) / c;
    let (lo, hi) = (arg(0.0, MAX_SHIFT), arg(record.length(), -MAX_SHIFT));
    if !(lo < 0.0 && hi > 0.0) {
        return Err(Error::WindowNotCovered(format!("profile arguments [{lo}, {hi}] miss the front")));
    }
    let mut buf = vec![0.0; dim];
    let mut dist = |s: f64| {
        let mut sum = 0.0;
        for j in 0..record.nx {
            psi.eval_into(arg(record.x(j), s), &mut buf);
            let w = if j == 0 || j + 1 == record.nx { 0.5 } else { 1.0 };
            for i in 0..dim {
                let d = snap.values[j * dim + i] - buf[i];
                sum += w * d * d;
            }
        }
        (sum * record.dx).sqrt()
    };
    let (shift, l2) = golden_min(&mut dist, -MAX_SHIFT, MAX_SHIFT, 1e-8);
    Ok(TranslationError { l2, shift })
}
