//! g2(0) maps over the (detuning, loss) plane.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear::newton_real2;
use crate::models::CavityNetwork;
use crate::parallel::{map_indexed, Execution};
use crate::perturbative::{correlation_amplitude, g2_zero_analytic};
use crate::series::Engine;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepGrid {
    pub delta_values: Vec<f64>,
    pub gamma_values: Vec<f64>,
    /// `g2[gamma_index][delta_index]`.
    pub g2: Vec<Vec<f64>>,
    pub engine: Engine,
    pub metadata: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridMinimum {
    pub gamma_index: usize,
    pub delta_index: usize,
    pub delta: f64,
    pub gamma: f64,
    pub value: f64,
}

fn check_axis(name: &str, v: &[f64]) -> Result<()> {
    if v.is_empty() {
        return Err(Error::param(name, "axis is empty"));
    }
    if v.iter().any(|x| !x.is_finite()) || v.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param(name, "axis must be finite and strictly ascending"));
    }
    Ok(())
}

impl SweepGrid {
    pub fn new(delta_values: Vec<f64>, gamma_values: Vec<f64>, g2: Vec<Vec<f64>>, engine: Engine) -> Result<Self> {
        check_axis("delta", &delta_values)?;
        check_axis("gamma", &gamma_values)?;
        if g2.len() != gamma_values.len() {
            return Err(Error::DimensionMismatch {
                expected: gamma_values.len(),
                found: g2.len(),
            });
        }
        for row in &g2 {
            if row.len() != delta_values.len() {
                return Err(Error::DimensionMismatch {
                    expected: delta_values.len(),
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::param("g2", "grid values must be finite and nonnegative"));
            }
        }
        Ok(SweepGrid {
            delta_values,
            gamma_values,
            g2,
            engine,
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn argmin(&self) -> GridMinimum {
        let mut best = GridMinimum {
            gamma_index: 0,
            delta_index: 0,
            delta: self.delta_values[0],
            gamma: self.gamma_values[0],
            value: f64::INFINITY,
        };
        for (gi, row) in self.g2.iter().enumerate() {
            for (di, &v) in row.iter().enumerate() {
                if v < best.value {
                    best = GridMinimum {
                        gamma_index: gi,
                        delta_index: di,
                        delta: self.delta_values[di],
                        gamma: self.gamma_values[gi],
                        value: v,
                    };
                }
            }
        }
        best
    }

    /// Largest spacing of each axis, `(delta, gamma)`.
    pub fn cell_size(&self) -> (f64, f64) {
        let step = |v: &[f64]| v.windows(2).map(|w| w[1] - w[0]).fold(0.0, f64::max);
        (step(&self.delta_values), step(&self.gamma_values))
    }

    /// Whether `(delta, gamma)` is within one grid cell of the grid minimum.
    pub fn minimum_within_one_cell(&self, delta: f64, gamma: f64) -> bool {
        let m = self.argmin();
        let (dd, dg) = self.cell_size();
        (m.delta - delta).abs() <= dd * (1.0 + 1e-9) && (m.gamma - gamma).abs() <= dg * (1.0 + 1e-9)
    }

    /// Rows as `(gamma, delta, g2)` in gamma-major order.
    pub fn rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.gamma_values.iter().enumerate().flat_map(move |(gi, &g)| {
            self.delta_values.iter().enumerate().map(move |(di, &d)| (g, d, self.g2[gi][di]))
        })
    }
}

/// Analytic signal-site g2(0) with every site retuned to `(delta, gamma)`.
pub fn analytic_sweep(network: &CavityNetwork, deltas: &[f64], gammas: &[f64], exec: Execution) -> Result<SweepGrid> {
    check_axis("delta", deltas)?;
    check_axis("gamma", gammas)?;
    if gammas.iter().any(|g| *g <= 0.0) {
        return Err(Error::param("gamma", "loss rates must be positive"));
    }
    let nd = deltas.len();
    let cells = map_indexed(nd * gammas.len(), exec, |k| {
        let (gi, di) = (k / nd, k % nd);
        g2_zero_analytic(&network.retuned(deltas[di], gammas[gi]))
    });
    let cells = cells.into_iter().collect::<Result<Vec<f64>>>()?;
    let g2 = cells.chunks(nd).map(|c| c.to_vec()).collect();
    Ok(SweepGrid::new(deltas.to_vec(), gammas.to_vec(), g2, Engine::Analytic)?.with_meta("network", network.name()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RefinedMinimum {
    pub delta: f64,
    pub gamma: f64,
    pub value: f64,
}

/// Continues from the grid minimum to the nearby exact zero of the analytic
/// g2(0), solving `Re A = Im A = 0` for the complex amplitude `A(delta, gamma)`.
pub fn refine_minimum(network: &CavityNetwork, grid: &SweepGrid) -> Result<RefinedMinimum> {
    let m = grid.argmin();
    let s = network.signal_site();
    let amp = |d: f64, g: f64| correlation_amplitude(&network.retuned(d, g), s, s, 0.0);
    let (delta, gamma) = newton_real2(amp, m.delta, m.gamma)?;
    if !(gamma > 0.0) {
        return Err(Error::NonConvergence {
            iterations: 0,
            residual: f64::NAN,
        });
    }
    let value = g2_zero_analytic(&network.retuned(delta, gamma))?;
    Ok(RefinedMinimum { delta, gamma, value })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{preset_llpb_four_cavity, FourCavityParams};
    use crate::series::uniform_grid;

    #[test]
    fn grid_minimum_near_zero_pair() {
        let net = preset_llpb_four_cavity(FourCavityParams::llpb()).unwrap();
        let deltas = uniform_grid(-0.03, 0.03, 121).unwrap();
        let gammas = uniform_grid(0.9, 1.1, 81).unwrap();
        let grid = analytic_sweep(&net, &deltas, &gammas, Execution::Sequential).unwrap();
        let m = grid.argmin();
        assert!((m.delta - 0.0095).abs() < 1e-12 && (m.gamma - 1.0).abs() < 1e-12, "{m:?}");
        assert!(grid.minimum_within_one_cell(0.009571, 1.0));
        let r = refine_minimum(&net, &grid).unwrap();
        assert!((r.delta - 0.00962038).abs() < 1e-6 && (r.gamma - 0.99996172).abs() < 1e-6);
        assert!(r.value < 1e-20);
    }

    #[test]
    fn execution_modes_agree() {
        let net = preset_llpb_four_cavity(FourCavityParams::llpb()).unwrap();
        let deltas = uniform_grid(-0.01, 0.01, 7).unwrap();
        let gammas = uniform_grid(0.95, 1.05, 5).unwrap();
        let a = analytic_sweep(&net, &deltas, &gammas, Execution::Sequential).unwrap();
        let b = analytic_sweep(&net, &deltas, &gammas, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows().count(), 35);
        let (g, d, _) = a.rows().nth(8).unwrap();
        assert_eq!((g, d), (gammas[1], deltas[1]));
    }

    #[test]
    fn shape_is_validated() {
        assert!(SweepGrid::new(vec![0.0, 1.0], vec![1.0], vec![vec![1.0]], Engine::Analytic).is_err());
        assert!(SweepGrid::new(vec![1.0, 0.0], vec![1.0], vec![vec![1.0, 1.0]], Engine::Analytic).is_err());
        assert!(SweepGrid::new(vec![0.0], vec![1.0], vec![vec![-1.0]], Engine::Analytic).is_err());
    }
}
