//! Single-particle spectra, Green's functions and dark-state root finding.
//!
//! The resolvent convention is `G(z) = (z I + [J])^-1`, so the poles sit at
//! `z = -eps_n`. Networks with site-dependent `z_i` are handled by writing
//! `z_i = z + o_i` with offsets `o_i` measured from the reference
//! `Delta_0 - i gamma_min / 2` (the same reference used by
//! [`CavityNetwork::retuned`]).

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::models::CavityNetwork;
use crate::perturbative::FirstOrder;

const POLE_GUARD: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 100;
const SPDS_RESIDUAL: f64 = 1e-10;
/// Roots with `|Im z|` below this (relative) describe lossless operation.
const LOSS_FLOOR: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    eigenvalues: Vec<f64>,
    eigenvectors: DMatrix<f64>,
}

impl SpectralData {
    pub fn n(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Columns are the eigenmodes.
    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    /// Component of mode `mode` on site `site`.
    pub fn phi(&self, site: usize, mode: usize) -> f64 {
        self.eigenvectors[(site, mode)]
    }

    pub fn reconstruct(&self) -> DMatrix<f64> {
        let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(self.eigenvalues.clone()));
        &self.eigenvectors * d * self.eigenvectors.transpose()
    }

    pub fn spectral_radius(&self) -> f64 {
        self.eigenvalues.iter().map(|e| e.abs()).fold(0.0, f64::max)
    }
}

/// Eigenvalues ascending; each eigenvector's first non-negligible component is positive.
pub fn eigendecompose(couplings: &[Vec<f64>]) -> Result<SpectralData> {
    let n = couplings.len();
    let m = DMatrix::from_fn(n, n, |r, c| couplings[r][c]);
    let scale = m.amax().max(1.0);
    for r in 0..n {
        if couplings[r].len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: couplings[r].len(),
            });
        }
        for c in 0..n {
            if (m[(r, c)] - m[(c, r)]).abs() > 1e-12 * scale {
                return Err(Error::InvalidCoupling { row: r, col: c });
            }
        }
    }
    let eig = SymmetricEigen::new(m);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vecs = DMatrix::zeros(n, n);
    let mut vals = Vec::with_capacity(n);
    for (col, &k) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        if let Some(first) = v.iter().find(|x| x.abs() > 1e-10) {
            if *first < 0.0 {
                v = -v;
            }
        }
        vecs.set_column(col, &v);
        vals.push(eig.eigenvalues[k]);
    }
    Ok(SpectralData {
        eigenvalues: vals,
        eigenvectors: vecs,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreenEvaluation {
    pub z: Complex64,
    pub matrix: DMatrix<Complex64>,
}

impl GreenEvaluation {
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.matrix[(i, j)]
    }

    /// `max |(zI + J + diag(offsets)) G - I|` relative to `max |G|`.
    pub fn resolvent_residual(&self, couplings: &[Vec<f64>], offsets: &[Complex64]) -> f64 {
        let n = couplings.len();
        let h = DMatrix::from_fn(n, n, |r, c| {
            let diag = if r == c { self.z + offsets[r] } else { Complex64::new(0.0, 0.0) };
            diag + couplings[r][c]
        });
        let prod = h * &self.matrix - DMatrix::<Complex64>::identity(n, n);
        let scale = self.matrix.iter().map(|v| v.norm()).fold(0.0, f64::max).max(1.0);
        prod.iter().map(|v| v.norm()).fold(0.0, f64::max) / scale
    }
}

fn check_poles(z: Complex64, spectral: &SpectralData) -> Result<()> {
    for &e in spectral.eigenvalues() {
        let d = (z + e).norm();
        if d <= POLE_GUARD {
            return Err(Error::PoleProximity { z, distance: d });
        }
    }
    Ok(())
}

/// `G = sum_n |phi_n><phi_n| / (z + eps_n)`.
pub fn green_single(z: Complex64, spectral: &SpectralData) -> Result<GreenEvaluation> {
    check_poles(z, spectral)?;
    let n = spectral.n();
    let inv: Vec<Complex64> = spectral.eigenvalues().iter().map(|&e| 1.0 / (z + e)).collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| {
        (0..n)
            .map(|m| inv[m] * (spectral.phi(i, m) * spectral.phi(j, m)))
            .sum()
    });
    Ok(GreenEvaluation { z, matrix })
}

/// Site offsets `z_i - z_ref`; all zero for uniform networks.
pub fn site_offsets(network: &CavityNetwork) -> Vec<Complex64> {
    let zref = reference_z(network);
    network
        .complex_detunings()
        .into_iter()
        .map(|zi| zi - zref)
        .collect()
}

pub fn reference_z(network: &CavityNetwork) -> Complex64 {
    Complex64::new(network.detuning()[0], -0.5 * network.min_loss())
}

/// `G(z) = (z I + diag(offsets) + J)^-1` by LU; valid for any network.
pub fn green_direct(network: &CavityNetwork, z: Complex64) -> Result<GreenEvaluation> {
    let n = network.n_sites();
    let off = site_offsets(network);
    let h = DMatrix::from_fn(n, n, |r, c| {
        let d = if r == c { z + off[r] } else { Complex64::new(0.0, 0.0) };
        d + network.coupling(r, c)
    });
    let matrix = h.lu().try_inverse().ok_or(Error::PoleProximity { z, distance: 0.0 })?;
    Ok(GreenEvaluation { z, matrix })
}

/// Two-photon propagator on the tensor basis `|a, b>`, with the second slot
/// carrying the time evolution:
/// `G2[(a,b),(c,e)](tau) = sum_mn phi_m(a) phi_n(b) phi_m(c) phi_n(e) e^{-i eps_n tau} / (2z + eps_m + eps_n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoPhotonGreen {
    n: usize,
    pub z: Complex64,
    pub tau: f64,
    data: Vec<Complex64>,
}

impl TwoPhotonGreen {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn element(&self, a: usize, b: usize, c: usize, e: usize) -> Complex64 {
        let n = self.n;
        self.data[((a * n + b) * n + c) * n + e]
    }

    /// `G2_ijkk(tau) = sum_mn phi_n(i) phi_m(j) phi_m(k) phi_n(k) e^{-i eps_n tau} / (2z + eps_m + eps_n)`:
    /// `j` is the collapsed site and `i` the site read out a time `tau` later.
    pub fn ijkk(&self, i: usize, j: usize, k: usize) -> Complex64 {
        self.element(j, i, k, k)
    }
}

pub fn green_two_photon(z: Complex64, spectral: &SpectralData, tau: f64) -> Result<TwoPhotonGreen> {
    let n = spectral.n();
    let eps = spectral.eigenvalues();
    let mut w = vec![Complex64::new(0.0, 0.0); n * n];
    for m in 0..n {
        for nn in 0..n {
            let den = 2.0 * z + eps[m] + eps[nn];
            if den.norm() <= POLE_GUARD {
                return Err(Error::PoleProximity {
                    z,
                    distance: den.norm() / 2.0,
                });
            }
            w[m * n + nn] = Complex64::new(0.0, -eps[nn] * tau).exp() / den;
        }
    }
    let mut data = vec![Complex64::new(0.0, 0.0); n * n * n * n];
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                for e in 0..n {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for m in 0..n {
                        let pm = spectral.phi(a, m) * spectral.phi(c, m);
                        if pm == 0.0 {
                            continue;
                        }
                        for nn in 0..n {
                            acc += w[m * n + nn] * (pm * spectral.phi(b, nn) * spectral.phi(e, nn));
                        }
                    }
                    data[((a * n + b) * n + c) * n + e] = acc;
                }
            }
        }
    }
    Ok(TwoPhotonGreen { n, z, tau, data })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootMethod {
    DysonEstimate,
    NewtonRefined,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DysonCandidate {
    pub z: Complex64,
    /// Orders `(p, q)` of the two lowest nonvanishing `1/z^p` terms used.
    pub orders: (u32, u32),
    /// `Im z < 0`, i.e. the root corresponds to a positive loss rate.
    pub loss_compatible: bool,
    /// `-Im z` exceeds the largest coupling.
    pub exceeds_coupling: bool,
}

/// Candidate dark-state roots from the two lowest nonvanishing orders of
/// `G_sd(z) = sum_p (-1)^(p-1) (J^(p-1))_sd / z^p`, truncated at `1/z^4`.
pub fn dyson_spds_estimate(network: &CavityNetwork) -> Result<Vec<DysonCandidate>> {
    let n = network.n_sites();
    let (d, s) = (network.drive_site(), network.signal_site());
    if !(2..=4).contains(&n) {
        return Err(Error::UnsupportedTopology(format!(
            "closed-form Dyson roots cover 2 to 4 sites, got {n}"
        )));
    }
    if d == s {
        return Err(Error::UnsupportedTopology(
            "drive and signal sites coincide".into(),
        ));
    }
    let j = DMatrix::from_fn(n, n, |r, c| network.coupling(r, c));
    let jmax = network.max_coupling();
    let mut power = DMatrix::<f64>::identity(n, n);
    let mut coeffs = Vec::new();
    for p in 1..=4u32 {
        let sign = if p % 2 == 1 { 1.0 } else { -1.0 };
        let c = sign * power[(s, d)];
        if c.abs() > 1e-13 * jmax.powi(p as i32 - 1).max(f64::MIN_POSITIVE) {
            coeffs.push((p, c));
        }
        power = &power * &j;
    }
    if coeffs.len() < 2 {
        return Ok(Vec::new());
    }
    let (p, cp) = coeffs[0];
    let (q, cq) = coeffs[1];
    let order = (q - p) as i32;
    let rhs = Complex64::new(-cq / cp, 0.0);
    let r = rhs.norm().powf(1.0 / order as f64);
    let theta = rhs.arg();
    let mut out: Vec<DysonCandidate> = (0..order)
        .map(|k| {
            let ang = (theta + 2.0 * std::f64::consts::PI * k as f64) / order as f64;
            let z = Complex64::from_polar(r, ang);
            let z = Complex64::new(snap(z.re, r), snap(z.im, r));
            DysonCandidate {
                z,
                orders: (p, q),
                loss_compatible: z.im < 0.0,
                exceeds_coupling: -z.im > jmax,
            }
        })
        .collect();
    out.sort_by(|a, b| a.z.im.total_cmp(&b.z.im).then(a.z.re.total_cmp(&b.z.re)));
    Ok(out)
}

fn snap(x: f64, scale: f64) -> f64 {
    if x.abs() < 1e-14 * scale {
        0.0
    } else {
        x
    }
}

/// `-i sqrt(k) J` for mirror-symmetric four-site rings.
pub fn crude_spds_estimate(network: &CavityNetwork) -> Option<Complex64> {
    network
        .mirror_ring_params()
        .map(|p| Complex64::new(0.0, -p.k.sqrt() * p.j))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SpdsRoot {
    pub z_star: Complex64,
    pub residual: f64,
    pub method: RootMethod,
    pub iterations: usize,
    pub loss_compatible: bool,
}

impl SpdsRoot {
    /// Loss rate `-2 Im z` and detuning `Re z` of the root.
    pub fn operating_point(&self) -> (f64, f64) {
        (self.z_star.re, -2.0 * self.z_star.im)
    }
}

/// Newton iteration with central-difference derivative and deflation by
/// previously found roots.
pub fn newton_deflated<F>(f: F, guess: Complex64, found: &[Complex64]) -> Result<(Complex64, usize)>
where
    F: Fn(Complex64) -> Result<Complex64>,
{
    let g = |z: Complex64| -> Result<Complex64> {
        let mut v = f(z)?;
        for r in found {
            v /= z - r;
        }
        Ok(v)
    };
    let mut z = guess;
    let mut residual = f64::INFINITY;
    for it in 0..NEWTON_MAX_ITER {
        let fz = g(z)?;
        residual = fz.norm();
        if residual == 0.0 {
            return Ok((z, it));
        }
        let h = 1e-6 * z.norm().max(1.0);
        let df = (g(z + h)? - g(z - h)?) / (2.0 * h);
        if df.norm() < 1e-300 || !df.is_finite() {
            return Err(Error::DerivativeUnderflow { z });
        }
        let step = fz / df;
        z -= step;
        if step.norm() <= 1e-15 * z.norm().max(1e-3) {
            return Ok((z, it + 1));
        }
    }
    Err(Error::NonConvergence {
        iterations: NEWTON_MAX_ITER,
        residual,
    })
}

/// Newton iteration for a zero of a complex function of two real parameters.
pub(crate) fn newton_real2<F>(f: F, x0: f64, y0: f64) -> Result<(f64, f64)>
where
    F: Fn(f64, f64) -> Result<Complex64>,
{
    let (mut x, mut y) = (x0, y0);
    let mut residual = f64::INFINITY;
    for it in 0..NEWTON_MAX_ITER {
        let v = f(x, y)?;
        residual = v.norm();
        if residual < 1e-13 {
            return Ok((x, y));
        }
        let hx = 1e-6 * x.abs().max(1.0);
        let hy = 1e-6 * y.abs().max(1.0);
        let fx = (f(x + hx, y)? - f(x - hx, y)?) / (2.0 * hx);
        let fy = (f(x, y + hy)? - f(x, y - hy)?) / (2.0 * hy);
        let det = fx.re * fy.im - fy.re * fx.im;
        if det.abs() < 1e-300 {
            return Err(Error::NonConvergence { iterations: it, residual });
        }
        let dx = (v.re * fy.im - fy.re * v.im) / det;
        let dy = (fx.re * v.im - v.re * fx.im) / det;
        x -= dx;
        y -= dy;
        if dx.abs() <= 1e-14 * x.abs().max(1e-3) && dy.abs() <= 1e-14 * y.abs().max(1e-3) {
            return Ok((x, y));
        }
    }
    Err(Error::NonConvergence {
        iterations: NEWTON_MAX_ITER,
        residual,
    })
}

/// `G_sd(z)` with the network's site offsets.
pub fn green_sd(network: &CavityNetwork, z: Complex64) -> Result<Complex64> {
    Ok(green_direct(network, z)?.get(network.signal_site(), network.drive_site()))
}

pub fn find_spds_zero(network: &CavityNetwork, guess: Complex64) -> Result<SpdsRoot> {
    find_spds_zero_deflated(network, guess, &[])
}

pub fn find_spds_zero_deflated(
    network: &CavityNetwork,
    guess: Complex64,
    found: &[Complex64],
) -> Result<SpdsRoot> {
    let f = |z: Complex64| green_sd(network, z);
    let (z, iterations) = newton_deflated(f, guess, found)?;
    let residual = f(z)?.norm();
    if residual >= SPDS_RESIDUAL {
        return Err(Error::NonConvergence {
            iterations,
            residual,
        });
    }
    Ok(SpdsRoot {
        z_star: z,
        residual,
        method: RootMethod::NewtonRefined,
        iterations,
        loss_compatible: z.im < -LOSS_FLOOR * z.norm().max(1.0),
    })
}

/// Numerator of `f_ss(z)`: `G_sd^2 - 2 alpha sum_k G_kd^2 G2_sskk(0)` (with
/// cross-Kerr terms when present), evaluated at reference detuning `z`.
pub fn fss_numerator(network: &CavityNetwork, z: Complex64) -> Result<Complex64> {
    let off = site_offsets(network);
    let zs: Vec<Complex64> = off.iter().map(|o| z + o).collect();
    let fo = FirstOrder::with_detunings(network, &zs)?;
    Ok(fo.numerator(network.signal_site()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FssZeros {
    /// Refined dark-state root of `G_sd`, the double pole of `f_ss`.
    pub pole: Complex64,
    /// Crude pole `-i sqrt(k) J` (mirror rings only).
    pub crude_pole: Option<Complex64>,
    /// `(sqrt(38)/16) sqrt(alpha gamma) e^{-i pi/4}` at the self-consistent loss rate.
    pub delta_z_closed: Option<Complex64>,
    /// `(sqrt(19)/8) k^(1/4) sqrt(alpha J) e^{-i pi/4}`.
    pub delta_z_closed_k: Option<Complex64>,
    /// Loss rate `gamma` solving `gamma = -2 Im(z_0 + delta_z(gamma))`.
    pub closed_gamma: Option<f64>,
    pub closed_pair: Option<[Complex64; 2]>,
    pub refined_pair: [Complex64; 2],
    pub refined_residuals: [f64; 2],
}

/// `delta_z(gamma)` of the closed form and the loss rate at which the upper
/// zero `z_0 + delta_z` sits, with `z_0 = -i sqrt(k) J`.
pub fn closed_form_delta_z(k: f64, j: f64, alpha: f64) -> (Complex64, f64) {
    let phase = Complex64::from_polar(1.0, -std::f64::consts::FRAC_PI_4);
    let pref = 38f64.sqrt() / 16.0;
    let gamma0 = 2.0 * k.sqrt() * j;
    let mut gamma = gamma0;
    for _ in 0..200 {
        let next = gamma0 + 2f64.sqrt() * pref * (alpha * gamma).sqrt();
        if (next - gamma).abs() <= 1e-16 * next {
            gamma = next;
            break;
        }
        gamma = next;
    }
    (phase * (pref * (alpha * gamma).sqrt()), gamma)
}

pub fn fss_zeros(network: &CavityNetwork) -> Result<FssZeros> {
    let alpha = network.kerr();
    if alpha == 0.0 && network.cross_kerr().is_empty() {
        return Err(Error::param(
            "alpha",
            "zero nonlinearity: the zeros of f_ss collapse onto the pole",
        ));
    }
    let ring = network.mirror_ring_params();
    let seed = match crude_spds_estimate(network) {
        Some(z) => z,
        None => dyson_spds_estimate(network)?
            .into_iter()
            .find(|c| c.loss_compatible)
            .map(|c| c.z)
            .ok_or_else(|| Error::UnsupportedTopology("no loss-compatible dark-state seed".into()))?,
    };
    let pole = find_spds_zero(network, seed)?.z_star;

    let (dz_closed, dz_k, closed_gamma) = match ring {
        Some(p) => {
            let (dz, g) = closed_form_delta_z(p.k, p.j, alpha);
            let dzk = Complex64::from_polar(
                19f64.sqrt() / 8.0 * p.k.powf(0.25) * (alpha * p.j).sqrt(),
                -std::f64::consts::FRAC_PI_4,
            );
            (Some(dz), Some(dzk), Some(g))
        }
        None => (None, None, None),
    };
    let crude_pole = crude_spds_estimate(network);
    let closed_pair = match (crude_pole, dz_closed) {
        (Some(z0), Some(dz)) => Some([z0 + dz, z0 - dz]),
        _ => None,
    };
    // Seed the refinement around the exact pole; the offset magnitude follows
    // the closed form when available and sqrt(alpha * scale) otherwise.
    let dz_seed = dz_closed.unwrap_or_else(|| {
        Complex64::from_polar(
            (alpha * pole.norm()).sqrt(),
            -std::f64::consts::FRAC_PI_4,
        )
    });
    let f = |z: Complex64| fss_numerator(network, z);
    let (z1, _) = newton_deflated(f, pole + dz_seed, &[])?;
    let (z2, _) = newton_deflated(f, pole - dz_seed, &[z1])?;
    let refined_residuals = [f(z1)?.norm(), f(z2)?.norm()];
    Ok(FssZeros {
        pole,
        crude_pole,
        delta_z_closed: dz_closed,
        delta_z_closed_k: dz_k,
        closed_gamma,
        closed_pair,
        refined_pair: [z1, z2],
        refined_residuals,
    })
}
