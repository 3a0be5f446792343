//! Discrepancy reports between correlation curves from different engines.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::series::{interpolate, CorrelationSeries, Engine};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointDiscrepancy {
    pub tau: f64,
    pub reference: f64,
    pub candidate: f64,
    pub difference: f64,
    /// `difference / sqrt(se_ref^2 + se_cand^2)` when either curve carries errors.
    pub z_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Discrepancy {
    pub reference: Engine,
    pub candidate: Engine,
    pub sup_norm: f64,
    pub rms: f64,
    pub max_abs_z: Option<f64>,
    pub points: Vec<PointDiscrepancy>,
}

impl Discrepancy {
    pub fn within(&self, tolerance: f64) -> bool {
        self.sup_norm < tolerance
    }
}

/// Compares `candidate` against `reference` on the reference delays that lie
/// inside the candidate's range (linear interpolation off-grid).
pub fn compare(reference: &CorrelationSeries, candidate: &CorrelationSeries) -> Result<Discrepancy> {
    let mut points = Vec::new();
    for (k, &t) in reference.tau().iter().enumerate() {
        let Some(c) = interpolate(candidate.tau(), candidate.values(), t) else {
            continue;
        };
        let r = reference.values()[k];
        let se_r = reference.stderr().map(|s| s[k]).unwrap_or(0.0);
        let se_c = candidate.stderr().and_then(|s| interpolate(candidate.tau(), s, t)).unwrap_or(0.0);
        let se = (se_r * se_r + se_c * se_c).sqrt();
        let has_errors = reference.stderr().is_some() || candidate.stderr().is_some();
        let difference = c - r;
        points.push(PointDiscrepancy {
            tau: t,
            reference: r,
            candidate: c,
            difference,
            z_score: (has_errors && se > 0.0).then(|| difference / se),
        });
    }
    if points.len() < 2 && !(points.len() == 1 && reference.len() == 1) {
        return Err(Error::IncompatibleSeries(format!(
            "only {} reference delays fall inside the candidate grid [{}, {}]",
            points.len(),
            candidate.tau()[0],
            candidate.tau()[candidate.len() - 1]
        )));
    }
    let sup_norm = points.iter().map(|p| p.difference.abs()).fold(0.0, f64::max);
    let rms = (points.iter().map(|p| p.difference * p.difference).sum::<f64>() / points.len() as f64).sqrt();
    let max_abs_z = points
        .iter()
        .filter_map(|p| p.z_score.map(f64::abs))
        .reduce(f64::max);
    Ok(Discrepancy {
        reference: reference.source(),
        candidate: candidate.source(),
        sup_norm,
        rms,
        max_abs_z,
        points,
    })
}

/// Every other series against the first.
pub fn compare_all(series: &[CorrelationSeries]) -> Result<Vec<Discrepancy>> {
    if series.len() < 2 {
        return Err(Error::IncompatibleSeries("at least two series are needed".into()));
    }
    series[1..].iter().map(|s| compare(&series[0], s)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(tau: Vec<f64>, v: Vec<f64>, se: Option<Vec<f64>>, e: Engine) -> CorrelationSeries {
        CorrelationSeries::new(tau, v, se, e).unwrap()
    }

    #[test]
    fn identical_inputs() {
        let a = series(vec![0.0, 1.0, 2.0], vec![0.1, 0.5, 0.9], None, Engine::Analytic);
        let d = compare(&a, &a).unwrap();
        assert_eq!(d.sup_norm, 0.0);
        assert_eq!(d.rms, 0.0);
        assert_eq!(d.max_abs_z, None);
    }

    #[test]
    fn interpolated_grids_and_z_scores() {
        let a = series(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 1.0], None, Engine::Analytic);
        let b = series(vec![0.0, 1.0], vec![0.1, 1.1], Some(vec![0.05, 0.05]), Engine::Wfmc);
        let d = compare(&a, &b).unwrap();
        assert_eq!(d.points.len(), 3);
        assert!((d.sup_norm - 0.1).abs() < 1e-15);
        assert!((d.max_abs_z.unwrap() - 2.0).abs() < 1e-12);
        assert!(!d.within(0.05) && d.within(0.2));
    }

    #[test]
    fn disjoint_grids_are_rejected() {
        let a = series(vec![0.0, 1.0], vec![0.0, 1.0], None, Engine::Analytic);
        let b = series(vec![2.0, 3.0], vec![0.0, 1.0], None, Engine::Analytic);
        assert!(matches!(compare(&a, &b), Err(Error::IncompatibleSeries(_))));
        assert!(compare_all(&[a]).is_err());
    }
}
