//! Quantum-trajectory (wavefunction Monte Carlo) solver.
//!
//! Trajectories propagate `psi~ = S psi` under `K~` of a shifted unraveling
//! (`L' = L + beta`, `H' = H + (beta/2i) sum (L - L^dagger)`), jump when the
//! weighted norm falls to a uniform threshold, and are sampled at fixed
//! intervals. Two-time correlators collapse a sampled state with `a_j` and
//! follow the collapsed state as a fresh trajectory over the delay grid.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{annihilation_on, FockConfig};
use crate::lindblad::{JumpChannel, LindbladProblem};
use crate::models::CavityNetwork;
use crate::ode::{Dopri5, OdeOptions};
use crate::parallel::{map_indexed, Execution};
use crate::series::{validate_grid, CorrelationSeries, Engine};
use crate::sparse::CsrMatrix;

/// Relative time resolution of jump localization.
const JUMP_TIME_TOL: f64 = 1e-12;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryConfig {
    pub beta: f64,
    pub n_traj: usize,
    pub t_relax: f64,
    pub t_record: f64,
    /// Spacing of steady-state samples; `None` means `1/gamma_min`.
    pub sample_interval: Option<f64>,
    pub seed: u64,
    pub ode: OdeOptions,
    pub fock: FockConfig,
    /// Warn when the truncation-edge population exceeds this fraction of the norm.
    pub top_fock_warn: f64,
    pub execution: Execution,
}

impl TrajectoryConfig {
    pub fn new(fock: FockConfig) -> Self {
        TrajectoryConfig {
            beta: 0.1,
            n_traj: 10,
            t_relax: 100.0,
            t_record: 1000.0,
            sample_interval: None,
            seed: 0,
            ode: OdeOptions::default(),
            fock,
            top_fock_warn: 1e-6,
            execution: Execution::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_traj == 0 {
            return Err(Error::param("n_traj", "must be at least 1"));
        }
        if !(self.t_relax > 0.0) || !(self.t_record > 0.0) {
            return Err(Error::param("t_relax", "relaxation and recording times must be positive"));
        }
        if !(self.beta >= 0.0) || !self.beta.is_finite() {
            return Err(Error::param("beta", "must be finite and nonnegative"));
        }
        if let Some(dt) = self.sample_interval {
            if !(dt > 0.0) {
                return Err(Error::param("sample_interval", "must be positive"));
            }
        }
        Ok(())
    }
}

/// `L' = L + beta`, `H' = H + (beta / 2i) sum_k (L_k - L_k^dagger)`.
pub fn unravel_transform(problem: &LindbladProblem, beta: f64) -> Result<LindbladProblem> {
    if !(beta >= 0.0) {
        return Err(Error::param("beta", "must be nonnegative"));
    }
    if beta == 0.0 {
        return Ok(problem.clone());
    }
    let d = problem.dimension();
    let shift = CsrMatrix::identity(d).scale(Complex64::new(beta, 0.0));
    let mut h = problem.hamiltonian_csr().clone();
    let mut jumps = Vec::with_capacity(problem.jumps().len());
    for ch in problem.jumps() {
        let anti = ch.op.sub(&ch.op.adjoint())?;
        h = h.add(&anti.scale(Complex64::new(0.0, -beta / 2.0)))?;
        jumps.push(JumpChannel {
            site: ch.site,
            op: ch.op.add(&shift)?,
        });
    }
    LindbladProblem::from_parts(
        problem.basis().clone(),
        h,
        jumps,
        problem.scaling().clone(),
        problem.relax_rate(),
    )
}

/// Per-trajectory diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub index: usize,
    pub seed: u64,
    pub jump_times: Vec<f64>,
    pub jump_channels: Vec<usize>,
    /// Jumps inside the delayed (collapsed) evolutions.
    pub delayed_jumps: usize,
    pub samples: usize,
    /// Largest truncation-edge population fraction seen at a sample.
    pub max_top_fock: f64,
    /// Largest `|norm^2 - u| / u` at a located jump.
    pub max_threshold_mismatch: f64,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryHistory {
    pub record: TrajectoryRecord,
    pub sample_times: Vec<f64>,
    /// `<n_i>` of the normalized state, `[sample][site]`.
    pub occupations: Vec<Vec<f64>>,
}

/// Collapse-and-follow request: collapse with `a_j`, measure `n_i` on `taus`.
#[derive(Debug, Clone, Copy)]
struct Probe<'a> {
    j: usize,
    i: usize,
    taus: &'a [f64],
}

struct Sums {
    numerator: Vec<f64>,
}

struct TrajectoryEngine<'a> {
    problem: &'a LindbladProblem,
    gen: CsrMatrix,
    jumps: &'a [CsrMatrix],
    weights: &'a [f64],
    edge: Vec<bool>,
    numbers: Vec<&'a [f64]>,
    opts: OdeOptions,
}

fn rng_for(seed: u64, index: usize, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ index as u64);
    rng.set_stream(stream);
    rng
}

/// Uniform draw on the open interval (0, 1).
fn open_unit(rng: &mut ChaCha8Rng) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

struct Segment {
    jumps: Vec<(f64, usize)>,
    mismatch: f64,
    steps: usize,
}

impl<'a> TrajectoryEngine<'a> {
    fn new(problem: &'a LindbladProblem, opts: OdeOptions) -> Result<Self> {
        let basis = problem.basis();
        let n = basis.n_sites();
        let numbers = (0..n)
            .map(|i| problem.number_diagonal(i))
            .collect::<Result<Vec<_>>>()?;
        Ok(TrajectoryEngine {
            problem,
            gen: problem.k_scaled().scale(Complex64::new(0.0, -1.0)),
            jumps: problem.jumps_scaled(),
            weights: problem.scaling().weights(),
            edge: (0..basis.dimension()).map(|b| basis.at_truncation_edge(b)).collect(),
            numbers,
            opts,
        })
    }

    fn norm_sqr(&self, psi: &[Complex64]) -> f64 {
        psi.iter().zip(self.weights).map(|(v, w)| v.norm_sqr() * w).sum()
    }

    fn normalize(&self, psi: &mut [Complex64]) {
        let n = self.norm_sqr(psi).sqrt();
        psi.iter_mut().for_each(|v| *v /= n);
    }

    fn occupation(&self, psi: &[Complex64], site: usize) -> f64 {
        psi.iter()
            .zip(self.weights)
            .zip(self.numbers[site])
            .map(|((v, w), n)| v.norm_sqr() * w * n)
            .sum::<f64>()
            / self.norm_sqr(psi)
    }

    fn top_fock(&self, psi: &[Complex64]) -> f64 {
        let top: f64 = psi
            .iter()
            .zip(self.weights)
            .zip(&self.edge)
            .filter(|(_, e)| **e)
            .map(|((v, w), _)| v.norm_sqr() * w)
            .sum();
        top / self.norm_sqr(psi)
    }

    /// Applies channel `k` chosen with probability proportional to `||L'_k psi||^2`.
    fn jump(&self, psi: &mut Vec<Complex64>, rng: &mut ChaCha8Rng) -> usize {
        let candidates: Vec<Vec<Complex64>> = self.jumps.iter().map(|l| l.matvec(psi)).collect();
        let probs: Vec<f64> = candidates.iter().map(|v| self.norm_sqr(v)).collect();
        let total: f64 = probs.iter().sum();
        let mut r = rng.random::<f64>() * total;
        let mut k = probs.len() - 1;
        for (idx, p) in probs.iter().enumerate() {
            if r < *p {
                k = idx;
                break;
            }
            r -= p;
        }
        *psi = candidates.into_iter().nth(k).expect("channel index in range");
        self.normalize(psi);
        k
    }

    /// Evolves `psi` from `t0` to `t1` with jumps; `threshold` is the
    /// pending draw and is updated in place.
    fn propagate(
        &self,
        psi: &mut Vec<Complex64>,
        t0: f64,
        t1: f64,
        threshold: &mut f64,
        rng: &mut ChaCha8Rng,
        ode: &mut Option<Dopri5>,
    ) -> Result<Segment> {
        let mut seg = Segment {
            jumps: Vec::new(),
            mismatch: 0.0,
            steps: 0,
        };
        if t1 <= t0 {
            return Ok(seg);
        }
        let gen = &self.gen;
        let mut rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| gen.matvec_into(y, dy);
        let solver = match ode {
            Some(s) => {
                s.set_state(t0, psi);
                s
            }
            None => ode.insert(Dopri5::new(t0, psi.clone(), self.opts)?),
        };
        let before = solver.steps();
        let mut probe_buf = vec![czero(); psi.len()];
        while solver.t() < t1 {
            solver.step(&mut rhs, t1)?;
            if self.norm_sqr(solver.y()) > *threshold {
                continue;
            }
            // Bisect inside the last step for norm^2 == threshold.
            let (mut lo, mut hi) = (0.0f64, 1.0f64);
            let span = solver.t() - solver.t_prev();
            let tol = JUMP_TIME_TOL * solver.t().abs().max(1.0);
            while (hi - lo) * span > tol {
                let mid = 0.5 * (lo + hi);
                solver.probe(&mut rhs, mid, &mut probe_buf);
                if self.norm_sqr(&probe_buf) > *threshold {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            solver.probe(&mut rhs, hi, &mut probe_buf);
            let t_jump = solver.t_prev() + hi * span;
            seg.mismatch = seg.mismatch.max((self.norm_sqr(&probe_buf) - *threshold).abs() / *threshold);
            psi.copy_from_slice(&probe_buf);
            let k = self.jump(psi, rng);
            seg.jumps.push((t_jump, k));
            *threshold = open_unit(rng);
            solver.set_state(t_jump, psi);
        }
        psi.copy_from_slice(solver.y());
        seg.steps = solver.steps() - before;
        Ok(seg)
    }

    fn run(
        &self,
        config: &TrajectoryConfig,
        index: usize,
        dt: f64,
        probe: Option<Probe<'_>>,
    ) -> Result<(TrajectoryHistory, Option<Sums>)> {
        let d = self.problem.dimension();
        let mut rng = rng_for(config.seed, index, 0);
        let mut psi = vec![czero(); d];
        psi[0] = Complex64::new(1.0, 0.0);
        let mut threshold = open_unit(&mut rng);
        let mut ode = None;
        let mut record = TrajectoryRecord {
            index,
            seed: config.seed ^ index as u64,
            jump_times: Vec::new(),
            jump_channels: Vec::new(),
            delayed_jumps: 0,
            samples: 0,
            max_top_fock: 0.0,
            max_threshold_mismatch: 0.0,
            steps: 0,
        };
        let absorb = |rec: &mut TrajectoryRecord, seg: Segment, main: bool| {
            if main {
                for (t, k) in seg.jumps {
                    rec.jump_times.push(t);
                    rec.jump_channels.push(k);
                }
            } else {
                rec.delayed_jumps += seg.jumps.len();
            }
            rec.max_threshold_mismatch = rec.max_threshold_mismatch.max(seg.mismatch);
            rec.steps += seg.steps;
        };
        let seg = self.propagate(&mut psi, 0.0, config.t_relax, &mut threshold, &mut rng, &mut ode)?;
        absorb(&mut record, seg, true);
        let n_sites = self.numbers.len();
        let n_samples = (config.t_record / dt).floor() as usize + 1;
        let mut sample_times = Vec::with_capacity(n_samples);
        let mut occupations = Vec::with_capacity(n_samples);
        let mut sums = probe.map(|p| Sums {
            numerator: vec![0.0; p.taus.len()],
        });
        let mut sub_ode = None;
        let collapse = match probe {
            Some(p) => Some(self.problem.scaling().transform(&annihilation_on(self.problem.basis(), p.j)?.to_csr())),
            None => None,
        };
        let mut t = config.t_relax;
        for m in 0..n_samples {
            let ts = config.t_relax + m as f64 * dt;
            let seg = self.propagate(&mut psi, t, ts, &mut threshold, &mut rng, &mut ode)?;
            absorb(&mut record, seg, true);
            t = ts;
            sample_times.push(ts);
            occupations.push((0..n_sites).map(|i| self.occupation(&psi, i)).collect::<Vec<_>>());
            record.max_top_fock = record.max_top_fock.max(self.top_fock(&psi));
            record.samples += 1;
            if let (Some(p), Some(s)) = (probe, sums.as_mut()) {
                let w = occupations[m][p.j];
                if w <= 0.0 {
                    continue;
                }
                let mut phi = collapse.as_ref().expect("built with the probe").matvec(&psi);
                self.normalize(&mut phi);
                let mut sub_rng = rng_for(config.seed, index, m as u64 + 1);
                let mut sub_threshold = open_unit(&mut sub_rng);
                let mut tau_prev = 0.0;
                for (k, &tau) in p.taus.iter().enumerate() {
                    let seg = self.propagate(&mut phi, tau_prev, tau, &mut sub_threshold, &mut sub_rng, &mut sub_ode)?;
                    absorb(&mut record, seg, false);
                    tau_prev = tau;
                    s.numerator[k] += w * self.occupation(&phi, p.i);
                }
            }
        }
        if record.max_top_fock > config.top_fock_warn {
            log::warn!(
                "trajectory {index}: truncation-edge population {:.3e} exceeds {:.1e}; raise the Fock cutoffs",
                record.max_top_fock,
                config.top_fock_warn
            );
        }
        Ok((
            TrajectoryHistory {
                record,
                sample_times,
                occupations,
            },
            sums,
        ))
    }
}

fn sample_interval(problem: &LindbladProblem, config: &TrajectoryConfig) -> Result<f64> {
    match config.sample_interval {
        Some(dt) => Ok(dt),
        None if problem.relax_rate() > 0.0 => Ok(1.0 / problem.relax_rate()),
        None => Err(Error::param("sample_interval", "no loss rate to set the default spacing")),
    }
}

/// One trajectory of an (already shifted) problem, sampled on the recording window.
pub fn run_trajectory(problem: &LindbladProblem, config: &TrajectoryConfig, index: usize) -> Result<TrajectoryHistory> {
    config.validate()?;
    let dt = sample_interval(problem, config)?;
    let engine = TrajectoryEngine::new(problem, config.ode)?;
    Ok(engine.run(config, index, dt, None)?.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleResult {
    #[serde(skip)]
    pub series: CorrelationSeries,
    /// Ensemble mean `<n_i>` per site and its standard error across trajectories.
    pub occupations: Vec<f64>,
    pub occupation_stderr: Vec<f64>,
    pub collapse_site: usize,
    pub measure_site: usize,
    pub beta: f64,
    pub sample_interval: f64,
    pub trajectories: Vec<TrajectoryRecord>,
    pub max_top_fock: f64,
}

impl EnsembleResult {
    pub fn g2_zero(&self) -> Option<(f64, f64)> {
        (self.series.tau().first() == Some(&0.0)).then(|| {
            (
                self.series.values()[0],
                self.series.stderr().map(|s| s[0]).unwrap_or(0.0),
            )
        })
    }
}

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Ensemble g2_ij(tau) on the signal site of `network` (`i = j = s`).
pub fn ensemble_g2(network: &CavityNetwork, config: &TrajectoryConfig, taus: &[f64]) -> Result<EnsembleResult> {
    let s = network.signal_site();
    ensemble_g2_pair(network, config, s, s, taus)
}

/// Ensemble g2 for collapse site `j` and measured site `i`.
pub fn ensemble_g2_pair(
    network: &CavityNetwork,
    config: &TrajectoryConfig,
    j: usize,
    i: usize,
    taus: &[f64],
) -> Result<EnsembleResult> {
    config.validate()?;
    validate_grid(taus)?;
    let base = LindbladProblem::new(network, &config.fock)?;
    base.basis().check_site(j)?;
    base.basis().check_site(i)?;
    let problem = unravel_transform(&base, config.beta)?;
    let dt = sample_interval(&problem, config)?;
    let engine = TrajectoryEngine::new(&problem, config.ode)?;
    let probe = Probe { j, i, taus };
    let runs = map_indexed(config.n_traj, config.execution, |k| engine.run(config, k, dt, Some(probe)));
    let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

    let n_sites = network.n_sites();
    let per_traj_n: Vec<Vec<f64>> = runs
        .iter()
        .map(|(h, _)| {
            let m = h.occupations.len() as f64;
            (0..n_sites)
                .map(|site| h.occupations.iter().map(|o| o[site]).sum::<f64>() / m)
                .collect()
        })
        .collect();
    let mut occupations = Vec::with_capacity(n_sites);
    let mut occupation_stderr = Vec::with_capacity(n_sites);
    for site in 0..n_sites {
        let xs: Vec<f64> = per_traj_n.iter().map(|v| v[site]).collect();
        let (m, se) = mean_and_stderr(&xs);
        occupations.push(m);
        occupation_stderr.push(se);
    }
    let floor = 10.0 * f64::EPSILON * problem.scaling().s().powi(2);
    for site in [i, j] {
        if !(occupations[site] > floor) {
            return Err(Error::UndefinedCorrelation {
                site,
                value: occupations[site],
            });
        }
    }
    let total_samples: f64 = runs.iter().map(|(h, _)| h.record.samples as f64).sum();
    let denom = occupations[i] * occupations[j];
    let mut values = Vec::with_capacity(taus.len());
    let mut stderr = Vec::with_capacity(taus.len());
    for k in 0..taus.len() {
        let pooled: f64 = runs
            .iter()
            .map(|(_, s)| s.as_ref().map(|s| s.numerator[k]).unwrap_or(0.0))
            .sum::<f64>()
            / total_samples;
        values.push(pooled / denom);
        let per: Vec<f64> = runs
            .iter()
            .zip(&per_traj_n)
            .map(|((h, s), n)| {
                let num = s.as_ref().map(|s| s.numerator[k]).unwrap_or(0.0) / h.record.samples as f64;
                num / (n[i] * n[j])
            })
            .collect();
        let se = mean_and_stderr(&per).1;
        stderr.push(if se.is_finite() { se } else { 0.0 });
    }
    let trajectories: Vec<TrajectoryRecord> = runs.into_iter().map(|(h, _)| h.record).collect();
    let max_top_fock = trajectories.iter().map(|r| r.max_top_fock).fold(0.0, f64::max);
    let series = CorrelationSeries::new(taus.to_vec(), values, Some(stderr), Engine::Wfmc)?
        .with_meta("beta", config.beta)
        .with_meta("n_traj", config.n_traj)
        .with_meta("t_relax", config.t_relax)
        .with_meta("t_record", config.t_record)
        .with_meta("sample_interval", dt)
        .with_meta("sample_interval_assumption", "collapse samples every 1/gamma_min unless configured")
        .with_meta("seed", config.seed)
        .with_meta("max_top_fock", max_top_fock);
    Ok(EnsembleResult {
        series,
        occupations,
        occupation_stderr,
        collapse_site: j,
        measure_site: i,
        beta: config.beta,
        sample_interval: dt,
        trajectories,
        max_top_fock,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OccupationPoint {
    pub drive: f64,
    pub n_signal: f64,
    pub n_signal_stderr: f64,
    pub g2_zero: f64,
    pub stderr: f64,
}

/// Signal occupation and g2(0) for each drive amplitude.
pub fn occupation_sweep(network: &CavityNetwork, drives: &[f64], config: &TrajectoryConfig) -> Result<Vec<OccupationPoint>> {
    if drives.is_empty() {
        return Err(Error::param("drives", "list is empty"));
    }
    let s = network.signal_site();
    drives
        .iter()
        .map(|&f| {
            if !(f > 0.0) {
                return Err(Error::param("drives", "amplitudes must be positive"));
            }
            let net = network.clone().with_drive_amplitude(Complex64::new(f, 0.0));
            let r = ensemble_g2(&net, config, &[0.0])?;
            let (g, se) = r.g2_zero().expect("grid starts at zero");
            Ok(OccupationPoint {
                drive: f,
                n_signal: r.occupations[s],
                n_signal_stderr: r.occupation_stderr[s],
                g2_zero: g,
                stderr: se,
            })
        })
        .collect()
}
