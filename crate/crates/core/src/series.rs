//! Sampled g2(tau) curves and their post-processing.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::error::{Error, Result};

/// The engine that produced a curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Analytic,
    Regression,
    Wfmc,
}

impl Engine {
    pub fn as_str(self) -> &'static str {
        match self {
            Engine::Analytic => "analytic",
            Engine::Regression => "regression",
            Engine::Wfmc => "wfmc",
        }
    }
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Engine {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "analytic" => Ok(Engine::Analytic),
            "regression" => Ok(Engine::Regression),
            "wfmc" => Ok(Engine::Wfmc),
            other => Err(Error::param(
                "engine",
                format!("`{other}` is not one of analytic, regression, wfmc"),
            )),
        }
    }
}

/// Values below zero by less than this are treated as roundoff and clamped.
const NEGATIVE_ROUNDOFF: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationSeries {
    tau: Vec<f64>,
    values: Vec<f64>,
    stderr: Option<Vec<f64>>,
    source: Engine,
    metadata: BTreeMap<String, String>,
}

impl CorrelationSeries {
    pub fn new(tau: Vec<f64>, values: Vec<f64>, stderr: Option<Vec<f64>>, source: Engine) -> Result<Self> {
        validate_grid(&tau)?;
        if values.len() != tau.len() {
            return Err(Error::DimensionMismatch {
                expected: tau.len(),
                found: values.len(),
            });
        }
        if let Some(se) = &stderr {
            if se.len() != tau.len() {
                return Err(Error::DimensionMismatch {
                    expected: tau.len(),
                    found: se.len(),
                });
            }
        }
        let mut values = values;
        for v in values.iter_mut() {
            if !v.is_finite() || *v < -NEGATIVE_ROUNDOFF {
                return Err(Error::param("values", format!("g2 value {v} is not finite and nonnegative")));
            }
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(CorrelationSeries {
            tau,
            values,
            stderr,
            source,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn stderr(&self) -> Option<&[f64]> {
        self.stderr.as_deref()
    }

    pub fn source(&self) -> Engine {
        self.source
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.tau.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau.is_empty()
    }

    /// Linear interpolation; `None` outside the grid.
    pub fn value_at(&self, t: f64) -> Option<f64> {
        interpolate(&self.tau, &self.values, t)
    }

    pub fn stderr_at(&self, t: f64) -> Option<f64> {
        self.stderr.as_ref().and_then(|se| interpolate(&self.tau, se, t))
    }

    /// First delay at which the curve rises through `level` (linear interpolation).
    pub fn first_crossing(&self, level: f64) -> Option<f64> {
        if self.values.first().is_none_or(|&v| v >= level) {
            return None;
        }
        self.values.windows(2).zip(self.tau.windows(2)).find_map(|(v, t)| {
            (v[0] < level && v[1] >= level)
                .then(|| t[0] + (level - v[0]) / (v[1] - v[0]) * (t[1] - t[0]))
        })
    }

    /// Width of the symmetric interval `(-tau_c, tau_c)` on which g2 stays
    /// below `level`, using that g2 is even in `tau`.
    pub fn antibunching_window(&self, level: f64) -> Option<f64> {
        self.first_crossing(level).map(|t| 2.0 * t)
    }
}

pub(crate) fn validate_grid(tau: &[f64]) -> Result<()> {
    if tau.is_empty() {
        return Err(Error::param("tau", "grid is empty"));
    }
    if tau.iter().any(|t| !t.is_finite() || *t < 0.0) {
        return Err(Error::param("tau", "delays must be finite and nonnegative"));
    }
    if tau.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("tau", "grid must be strictly ascending"));
    }
    Ok(())
}

pub(crate) fn interpolate(x: &[f64], y: &[f64], t: f64) -> Option<f64> {
    let first = *x.first()?;
    let last = *x.last()?;
    if t < first || t > last {
        return None;
    }
    let k = x.partition_point(|&v| v < t);
    if k < x.len() && x[k] == t {
        return Some(y[k]);
    }
    let (x0, x1) = (x[k - 1], x[k]);
    Some(y[k - 1] + (t - x0) / (x1 - x0) * (y[k] - y[k - 1]))
}

/// Evenly spaced grid `start, start + step, ...` of `count` points.
pub fn uniform_grid(start: f64, stop: f64, count: usize) -> Result<Vec<f64>> {
    if count == 0 {
        return Err(Error::param("steps", "must be at least 1"));
    }
    if count == 1 {
        return Ok(vec![start]);
    }
    if !(stop > start) {
        return Err(Error::param("stop", "must exceed start"));
    }
    let h = (stop - start) / (count - 1) as f64;
    Ok((0..count)
        .map(|k| if k + 1 == count { stop } else { start + h * k as f64 })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PowerLaw {
    pub exponent: f64,
    /// `A` in `g2 = A (gamma tau)^p`.
    pub prefactor: f64,
    pub points: usize,
}

/// Least-squares fit of `ln g2` against `ln(gamma tau)` over `gamma tau` in `window`.
pub fn short_time_exponent(series: &CorrelationSeries, gamma: f64, window: (f64, f64)) -> Result<PowerLaw> {
    let pts: Vec<(f64, f64)> = series
        .tau()
        .iter()
        .zip(series.values())
        .map(|(&t, &v)| (gamma * t, v))
        .filter(|&(x, _)| x >= window.0 && x <= window.1)
        .collect();
    if pts.len() < 5 {
        return Err(Error::FitWindowTooNarrow { points: pts.len() });
    }
    if let Some(&(x, v)) = pts.iter().find(|(x, v)| *v <= 0.0 || *x <= 0.0) {
        return Err(Error::param(
            "fit_window",
            format!("nonpositive sample g2({x}) = {v} inside the window"),
        ));
    }
    let n = pts.len() as f64;
    let (sx, sy) = pts
        .iter()
        .fold((0.0, 0.0), |(a, b), &(x, v)| (a + x.ln(), b + v.ln()));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, v)| {
        let dx = x.ln() - mx;
        (a + dx * dx, b + dx * (v.ln() - my))
    });
    let exponent = sxy / sxx;
    Ok(PowerLaw {
        exponent,
        prefactor: (my - exponent * mx).exp(),
        points: pts.len(),
    })
}
