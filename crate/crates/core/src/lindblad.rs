//! Lindblad evolution, steady states and quantum-regression correlators.
//!
//! States are propagated in photon-number graded coordinates
//! `rho~ = S rho S` with `S = diag(s^-N)` (see [`PhotonScaling`]). The map
//! preserves the Lindblad form with `K~ = S K S^-1` and `L~ = S L S^-1`, so
//! all kernels below act on `rho~` directly; only traces and expectation
//! values pick up the weights `s^(N_a + N_b)`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hilbert::{
    annihilation_on, hamiltonian_csr, DensityMatrix, FockBasis, FockConfig, OperatorMatrix, PhotonScaling,
};
use crate::models::CavityNetwork;
use crate::ode::{Dopri5, OdeOptions};
use crate::series::{validate_grid, CorrelationSeries, Engine};
use crate::sparse::CsrMatrix;

/// Largest Liouville-space dimension (`d^2`) accepted by the direct solver.
pub const LINEAR_SOLVE_LIMIT: usize = 4096;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// A collapse operator, tagged with the site it empties when it has one.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpChannel {
    pub site: Option<usize>,
    pub op: CsrMatrix,
}

#[derive(Debug, Clone)]
pub struct LindbladProblem {
    basis: FockBasis,
    scaling: PhotonScaling,
    hamiltonian: CsrMatrix,
    jumps: Vec<JumpChannel>,
    relax_rate: f64,
    k_eff: CsrMatrix,
    gen_scaled: CsrMatrix,
    k_scaled: CsrMatrix,
    jumps_scaled: Vec<CsrMatrix>,
    numbers: Vec<Vec<f64>>,
}

impl LindbladProblem {
    /// Drive included, one channel `sqrt(gamma_i) a_i` per lossy site.
    pub fn new(network: &CavityNetwork, config: &FockConfig) -> Result<Self> {
        let basis = FockBasis::new(config)?;
        let hamiltonian = hamiltonian_csr(network, &basis, false, true)?;
        let mut jumps = Vec::new();
        for (site, &g) in network.loss().iter().enumerate() {
            if g > 0.0 {
                let a = annihilation_on(&basis, site)?.to_csr();
                jumps.push(JumpChannel {
                    site: Some(site),
                    op: a.scale(Complex64::new(g.sqrt(), 0.0)),
                });
            }
        }
        let scaling = PhotonScaling::for_drive(&basis, network.drive_amplitude());
        let relax = network.loss().iter().copied().filter(|&g| g > 0.0).fold(f64::INFINITY, f64::min);
        Self::from_parts(basis, hamiltonian, jumps, scaling, if relax.is_finite() { relax } else { 0.0 })
    }

    /// `relax_rate` sets the time unit of steady-state searches (zero if none).
    pub fn from_parts(
        basis: FockBasis,
        hamiltonian: CsrMatrix,
        jumps: Vec<JumpChannel>,
        scaling: PhotonScaling,
        relax_rate: f64,
    ) -> Result<Self> {
        let d = basis.dimension();
        if hamiltonian.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: hamiltonian.dim(),
            });
        }
        if scaling.weights().len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: scaling.weights().len(),
            });
        }
        let mut k_eff = hamiltonian.clone();
        for ch in &jumps {
            if ch.op.dim() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    found: ch.op.dim(),
                });
            }
            let ll = ch.op.adjoint().matmul(&ch.op)?;
            k_eff = k_eff.add(&ll.scale(Complex64::new(0.0, -0.5)))?;
        }
        let k_scaled = scaling.transform(&k_eff);
        let gen_scaled = k_scaled.scale(Complex64::new(0.0, -1.0));
        let jumps_scaled = jumps.iter().map(|ch| scaling.transform(&ch.op)).collect();
        let numbers = (0..basis.n_sites())
            .map(|i| (0..d).map(|b| basis.occupation_at(b, i) as f64).collect())
            .collect();
        Ok(LindbladProblem {
            basis,
            scaling,
            hamiltonian,
            jumps,
            relax_rate,
            k_eff,
            gen_scaled,
            k_scaled,
            jumps_scaled,
            numbers,
        })
    }

    pub fn dimension(&self) -> usize {
        self.basis.dimension()
    }

    pub fn basis(&self) -> &FockBasis {
        &self.basis
    }

    pub fn scaling(&self) -> &PhotonScaling {
        &self.scaling
    }

    pub fn relax_rate(&self) -> f64 {
        self.relax_rate
    }

    /// Rate that sets the attainable derivative floor of an integrated state.
    pub fn rate_scale(&self) -> f64 {
        let rows = (0..self.dimension()).map(|r| self.k_scaled.row(r).map(|(_, v)| v.norm()).sum::<f64>());
        rows.fold(self.relax_rate, f64::max)
    }

    pub fn hamiltonian(&self) -> OperatorMatrix {
        OperatorMatrix::from_csr(self.hamiltonian.clone(), (0..self.basis.n_sites()).collect())
    }

    pub fn hamiltonian_csr(&self) -> &CsrMatrix {
        &self.hamiltonian
    }

    pub fn jumps(&self) -> &[JumpChannel] {
        &self.jumps
    }

    /// `H - (i/2) sum_k L_k^dagger L_k`.
    pub fn effective_hamiltonian(&self) -> &CsrMatrix {
        &self.k_eff
    }

    pub(crate) fn k_scaled(&self) -> &CsrMatrix {
        &self.k_scaled
    }

    pub(crate) fn jumps_scaled(&self) -> &[CsrMatrix] {
        &self.jumps_scaled
    }

    /// Diagonal of `n_site` over the basis.
    pub fn number_diagonal(&self, site: usize) -> Result<&[f64]> {
        self.basis.check_site(site)?;
        Ok(&self.numbers[site])
    }

    /// `rho~ = S rho S`.
    pub fn to_scaled(&self, rho: &DensityMatrix) -> Result<Vec<Complex64>> {
        let d = self.dimension();
        if rho.dimension() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: rho.dimension(),
            });
        }
        let s = self.scaling.s();
        let e = rho.entries();
        Ok((0..d * d)
            .map(|k| {
                let (a, b) = (k / d, k % d);
                let n = (self.scaling.photons(a) + self.scaling.photons(b)) as i32;
                e[k] * s.powi(-n)
            })
            .collect())
    }

    pub fn from_scaled(&self, scaled: &[Complex64]) -> Result<DensityMatrix> {
        let d = self.dimension();
        let s = self.scaling.s();
        let data = scaled
            .iter()
            .enumerate()
            .map(|(k, v)| {
                let (a, b) = (k / d, k % d);
                v * s.powi((self.scaling.photons(a) + self.scaling.photons(b)) as i32)
            })
            .collect();
        DensityMatrix::from_entries(d, data)
    }

    pub(crate) fn weighted_trace(&self, scaled: &[Complex64]) -> Complex64 {
        let d = self.dimension();
        (0..d).map(|a| scaled[a * d + a] * self.scaling.weight(a)).sum()
    }

    /// `tr(n_site rho)` from a scaled state.
    pub(crate) fn weighted_number(&self, scaled: &[Complex64], site: usize) -> f64 {
        let d = self.dimension();
        let n = &self.numbers[site];
        (0..d).map(|a| scaled[a * d + a].re * n[a] * self.scaling.weight(a)).sum()
    }

    /// Kernel for Hermitian `rho~`: `X + X^dagger + sum L rho L^dagger` with `X = -i K~ rho`.
    pub(crate) fn rhs_hermitian(&self, rho: &[Complex64], out: &mut [Complex64], work: &mut Workspace) {
        let d = self.dimension();
        sparse_times_dense(&self.gen_scaled, rho, &mut work.x, d);
        for r in 0..d {
            for c in 0..d {
                out[r * d + c] = work.x[r * d + c] + work.x[c * d + r].conj();
            }
        }
        self.add_jump_terms(rho, out, work);
    }

    fn add_jump_terms(&self, rho: &[Complex64], out: &mut [Complex64], work: &mut Workspace) {
        let d = self.dimension();
        for l in &self.jumps_scaled {
            // Y = L rho; W = Y^dagger = rho^dagger L^dagger; L rho L^dagger = L W.
            sparse_times_dense(l, rho, &mut work.y, d);
            for r in 0..d {
                for c in 0..d {
                    work.w[r * d + c] = work.y[c * d + r].conj();
                }
            }
            for r in 0..d {
                let (cols, vals) = l.row_parts(r);
                let orow = &mut out[r * d..(r + 1) * d];
                for (&k, &v) in cols.iter().zip(vals) {
                    let wrow = &work.w[k * d..(k + 1) * d];
                    for (o, w) in orow.iter_mut().zip(wrow) {
                        *o += v * w;
                    }
                }
            }
        }
    }

    /// General kernel on scaled coordinates (no Hermiticity assumed).
    pub(crate) fn rhs_general(&self, rho: &[Complex64], out: &mut [Complex64], work: &mut Workspace) {
        let d = self.dimension();
        sparse_times_dense(&self.gen_scaled, rho, &mut work.x, d);
        // rho A^dagger = (A rho^dagger)^dagger
        for r in 0..d {
            for c in 0..d {
                work.w[r * d + c] = rho[c * d + r].conj();
            }
        }
        sparse_times_dense(&self.gen_scaled, &work.w, &mut work.y, d);
        for r in 0..d {
            for c in 0..d {
                out[r * d + c] = work.x[r * d + c] + work.y[c * d + r].conj();
            }
        }
        for l in &self.jumps_scaled {
            sparse_times_dense(l, rho, &mut work.x, d);
            // (L rho) L^dagger = (L (L rho)^dagger)^dagger
            for r in 0..d {
                for c in 0..d {
                    work.w[r * d + c] = work.x[c * d + r].conj();
                }
            }
            sparse_times_dense(l, &work.w, &mut work.y, d);
            for r in 0..d {
                for c in 0..d {
                    out[r * d + c] += work.y[c * d + r].conj();
                }
            }
        }
    }
}

fn sparse_times_dense(a: &CsrMatrix, m: &[Complex64], out: &mut [Complex64], d: usize) {
    for r in 0..d {
        let orow = &mut out[r * d..(r + 1) * d];
        orow.iter_mut().for_each(|v| *v = czero());
        let (cols, vals) = a.row_parts(r);
        for (&k, &v) in cols.iter().zip(vals) {
            let mrow = &m[k * d..(k + 1) * d];
            for (o, x) in orow.iter_mut().zip(mrow) {
                *o += v * x;
            }
        }
    }
}

pub(crate) struct Workspace {
    x: Vec<Complex64>,
    y: Vec<Complex64>,
    w: Vec<Complex64>,
}

impl Workspace {
    pub(crate) fn new(d: usize) -> Self {
        Workspace {
            x: vec![czero(); d * d],
            y: vec![czero(); d * d],
            w: vec![czero(); d * d],
        }
    }
}

/// `d rho/dt = -i[H, rho] + sum_k (L_k rho L_k^dagger - {L_k^dagger L_k, rho}/2)`.
pub fn lindblad_rhs(problem: &LindbladProblem, rho: &DensityMatrix) -> Result<DensityMatrix> {
    let d = problem.dimension();
    if rho.dimension() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: rho.dimension(),
        });
    }
    let e = rho.entries();
    let mut out = vec![czero(); d * d];
    let k = &problem.k_eff;
    for r in 0..d {
        for (c, v) in k.row(r) {
            for col in 0..d {
                out[r * d + col] += Complex64::new(0.0, -1.0) * v * e[c * d + col];
            }
        }
    }
    // + i rho K^dagger: (rho K^dagger)_{r,c} = sum_k rho_{r,k} conj(K_{c,k})
    for c in 0..d {
        for (kk, v) in k.row(c) {
            for r in 0..d {
                out[r * d + c] += Complex64::new(0.0, 1.0) * e[r * d + kk] * v.conj();
            }
        }
    }
    for ch in &problem.jumps {
        let l = &ch.op;
        for (r, k1, v1) in l.triplets() {
            for (c, k2, v2) in l.triplets() {
                out[r * d + c] += v1 * e[k1 * d + k2] * v2.conj();
            }
        }
    }
    DensityMatrix::from_entries(d, out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SteadyStateMethod {
    Integrate,
    LinearSolve,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyStateOptions {
    pub method: SteadyStateMethod,
    pub ode: OdeOptions,
    /// Stop when `max |d rho~/dt| < tolerance * rate * max |rho~|`, with
    /// `rate` the larger of the slowest loss rate and the row-sum norm of `K~`.
    pub tolerance: f64,
    /// Minimum and maximum integration time in units of `1/relax_rate`.
    pub min_time: f64,
    pub max_time: f64,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        SteadyStateOptions {
            method: SteadyStateMethod::Integrate,
            ode: OdeOptions::default(),
            tolerance: 1e-10,
            min_time: 20.0,
            max_time: 1000.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: DensityMatrix,
    scaled: Vec<Complex64>,
    /// Integration time used (zero for the direct solve).
    pub time: f64,
    /// `max |d rho~/dt| / (rate * max |rho~|)` at the returned state.
    pub residual: f64,
}

impl SteadyState {
    pub fn scaled(&self) -> &[Complex64] {
        &self.scaled
    }
}

fn max_abs(v: &[Complex64]) -> f64 {
    v.iter().map(|x| x.norm()).fold(0.0, f64::max)
}

fn hermitize(v: &mut [Complex64], d: usize) {
    for r in 0..d {
        for c in r..d {
            let m = (v[r * d + c] + v[c * d + r].conj()) * 0.5;
            v[r * d + c] = m;
            v[c * d + r] = m.conj();
        }
    }
}

pub fn steady_state(problem: &LindbladProblem, method: SteadyStateMethod) -> Result<DensityMatrix> {
    Ok(steady_state_with(problem, &SteadyStateOptions { method, ..Default::default() }, None)?.rho)
}

/// Steady state from `initial` (vacuum by default) or by the direct solve.
pub fn steady_state_with(
    problem: &LindbladProblem,
    opts: &SteadyStateOptions,
    initial: Option<&DensityMatrix>,
) -> Result<SteadyState> {
    if !(problem.relax_rate > 0.0) {
        return Err(Error::param("loss", "a steady state needs at least one lossy site"));
    }
    let d = problem.dimension();
    let mut work = Workspace::new(d);
    let mut deriv = vec![czero(); d * d];
    let (mut scaled, time) = match opts.method {
        SteadyStateMethod::Integrate => {
            let y0 = match initial {
                Some(rho) => problem.to_scaled(rho)?,
                None => problem.to_scaled(&DensityMatrix::vacuum(d))?,
            };
            let mut ode = Dopri5::new(0.0, y0, opts.ode)?;
            let mut rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| problem.rhs_hermitian(y, dy, &mut work);
            let unit = 1.0 / problem.relax_rate;
            let rate = problem.rate_scale();
            let mut t = 0.0;
            loop {
                t += unit;
                ode.advance_to(&mut rhs, t)?;
                if t + 0.5 * unit >= opts.min_time * unit {
                    rhs(t, ode.y(), &mut deriv);
                    let residual = max_abs(&deriv) / (rate * max_abs(ode.y()));
                    if residual < opts.tolerance {
                        break;
                    }
                    if t >= opts.max_time * unit {
                        return Err(Error::SteadyStateNotConverged { time: t, residual });
                    }
                }
            }
            (ode.y().to_vec(), t)
        }
        SteadyStateMethod::LinearSolve => (solve_generator(problem)?, 0.0),
    };
    hermitize(&mut scaled, d);
    let tr = problem.weighted_trace(&scaled).re;
    scaled.iter_mut().for_each(|v| *v /= tr);
    problem.rhs_hermitian(&scaled, &mut deriv, &mut work);
    let residual = max_abs(&deriv) / (problem.rate_scale() * max_abs(&scaled));
    Ok(SteadyState {
        rho: problem.from_scaled(&scaled)?,
        scaled,
        time,
        residual,
    })
}

fn solve_generator(problem: &LindbladProblem) -> Result<Vec<Complex64>> {
    let d = problem.dimension();
    let n = d * d;
    if n > LINEAR_SOLVE_LIMIT {
        return Err(Error::LiouvilleTooLarge {
            limit: LINEAR_SOLVE_LIMIT,
            found: n,
        });
    }
    let mut work = Workspace::new(d);
    let mut m = DMatrix::<Complex64>::zeros(n, n);
    let mut unit = vec![czero(); n];
    let mut col = vec![czero(); n];
    for k in 0..n {
        unit[k] = Complex64::new(1.0, 0.0);
        problem.rhs_general(&unit, &mut col, &mut work);
        unit[k] = czero();
        for (r, v) in col.iter().enumerate() {
            m[(r, k)] = *v;
        }
    }
    // The vacuum population equation is redundant; trade it for the trace.
    let mut rhs = DVector::<Complex64>::zeros(n);
    for c in 0..n {
        m[(0, c)] = czero();
    }
    for a in 0..d {
        m[(0, a * d + a)] = Complex64::new(problem.scaling.weight(a), 0.0);
    }
    rhs[0] = Complex64::new(1.0, 0.0);
    let sol = m.lu().solve(&rhs).ok_or(Error::SingularGenerator)?;
    if sol.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularGenerator);
    }
    Ok(sol.iter().copied().collect())
}

/// Propagates `rho` over `t` and returns the state at the end.
pub fn evolve(problem: &LindbladProblem, rho: &DensityMatrix, t: f64, opts: OdeOptions) -> Result<DensityMatrix> {
    let d = problem.dimension();
    let mut work = Workspace::new(d);
    let mut ode = Dopri5::new(0.0, problem.to_scaled(rho)?, opts)?;
    let mut rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| problem.rhs_general(y, dy, &mut work);
    if t > 0.0 {
        ode.advance_to(&mut rhs, t)?;
    }
    problem.from_scaled(ode.y())
}

/// `tr(n_i rho)` for every site.
pub fn occupations(problem: &LindbladProblem, ss: &SteadyState) -> Vec<f64> {
    (0..problem.basis.n_sites())
        .map(|i| problem.weighted_number(&ss.scaled, i))
        .collect()
}

fn occupation_floor() -> f64 {
    10.0 * f64::EPSILON
}

fn checked_occupation(problem: &LindbladProblem, ss: &SteadyState, site: usize) -> Result<f64> {
    problem.basis.check_site(site)?;
    let n = problem.weighted_number(&ss.scaled, site);
    // Occupations scale like F^2; compare against the graded scale.
    if !(n > occupation_floor() * problem.scaling.s().powi(2)) {
        return Err(Error::UndefinedCorrelation { site, value: n });
    }
    Ok(n)
}

/// `<a_j^dagger a_i^dagger a_i a_j> / (n_i n_j)` read off the steady state directly.
pub fn static_g2(problem: &LindbladProblem, ss: &SteadyState, j: usize, i: usize) -> Result<f64> {
    let ni = checked_occupation(problem, ss, i)?;
    let nj = checked_occupation(problem, ss, j)?;
    let aj = annihilation_on(&problem.basis, j)?;
    let ai = annihilation_on(&problem.basis, i)?;
    let op = aj.adjoint().matmul(&ai.adjoint())?.matmul(&ai)?.matmul(&aj)?;
    Ok(ss.rho.expectation(&op)?.re / (ni * nj))
}

/// Quantum-regression g2_ij(tau): collapse site `j` of the steady state,
/// evolve under the same generator, read `n_i`.
pub fn regression_g2(
    problem: &LindbladProblem,
    ss: &SteadyState,
    j: usize,
    i: usize,
    taus: &[f64],
    opts: OdeOptions,
) -> Result<CorrelationSeries> {
    validate_grid(taus)?;
    let ni = checked_occupation(problem, ss, i)?;
    let nj = checked_occupation(problem, ss, j)?;
    let d = problem.dimension();
    let a = problem.scaling.transform(&annihilation_on(&problem.basis, j)?.to_csr());
    let mut tmp = vec![czero(); d * d];
    sparse_times_dense(&a, &ss.scaled, &mut tmp, d);
    let mut adj = vec![czero(); d * d];
    for r in 0..d {
        for c in 0..d {
            adj[r * d + c] = tmp[c * d + r].conj();
        }
    }
    let mut sigma = vec![czero(); d * d];
    sparse_times_dense(&a, &adj, &mut sigma, d);
    // sigma = a rho a^dagger, kept at unit weighted trace; linearity restores the scale.
    let norm = problem.weighted_trace(&sigma).re;
    sigma.iter_mut().for_each(|v| *v /= norm);
    let mut work = Workspace::new(d);
    let mut ode = Dopri5::new(0.0, sigma, opts)?;
    let mut rhs = |_t: f64, y: &[Complex64], dy: &mut [Complex64]| problem.rhs_hermitian(y, dy, &mut work);
    let mut values = Vec::with_capacity(taus.len());
    for &t in taus {
        if t > ode.t() {
            ode.advance_to(&mut rhs, t)?;
        }
        values.push(problem.weighted_number(ode.y(), i) * norm / (ni * nj));
    }
    Ok(CorrelationSeries::new(taus.to_vec(), values, None, Engine::Regression)?
        .with_meta("collapse_site", j)
        .with_meta("measure_site", i)
        .with_meta("n_i", ni)
        .with_meta("n_j", nj))
}
