//! Cavity-network data model and the canonical parameter presets.
//!
//! Sites are indexed from 0. In the four-cavity presets site 0 is driven and
//! site 1 is the signal cavity.

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::perturbative;

/// Drive amplitude used when a preset is built without an explicit one.
pub const DEFAULT_DRIVE: f64 = 1e-5;

pub const DEFAULT_DRIVE_ASSUMPTION: &str =
    "drive amplitude F_d defaults to 1e-5; the reference calculations do not state it";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RateUnit {
    /// Dimensionless rates measured in units of a reference loss rate.
    #[serde(rename = "gamma")]
    Gamma,
    #[serde(rename = "ueV")]
    MicroElectronVolt,
}

impl RateUnit {
    pub fn label(self) -> &'static str {
        match self {
            RateUnit::Gamma => "gamma",
            RateUnit::MicroElectronVolt => "ueV",
        }
    }
}

/// Density-density coupling `2 strength n_i n_j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossKerr {
    pub i: usize,
    pub j: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CavityNetwork {
    name: String,
    couplings: Vec<Vec<f64>>,
    detuning: Vec<f64>,
    loss: Vec<f64>,
    kerr: f64,
    cross_kerr: Vec<CrossKerr>,
    drive_site: usize,
    drive_amplitude: Complex64,
    signal_site: usize,
    units: RateUnit,
    assumptions: Vec<String>,
}

impl CavityNetwork {
    /// Linear, undriven network with drive and signal on site 0.
    pub fn new(couplings: Vec<Vec<f64>>, detuning: Vec<f64>, loss: Vec<f64>) -> Result<Self> {
        let net = CavityNetwork {
            name: "custom".into(),
            couplings,
            detuning,
            loss,
            kerr: 0.0,
            cross_kerr: Vec::new(),
            drive_site: 0,
            drive_amplitude: Complex64::new(0.0, 0.0),
            signal_site: 0,
            units: RateUnit::Gamma,
            assumptions: Vec::new(),
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.couplings.len();
        if n == 0 {
            return Err(Error::param("couplings", "network needs at least one site"));
        }
        for (r, row) in self.couplings.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() || (r == c && v != 0.0) || v != self.couplings[c][r] {
                    return Err(Error::InvalidCoupling { row: r, col: c });
                }
            }
        }
        for (name, v) in [("detuning", &self.detuning), ("loss", &self.loss)] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: v.len(),
                });
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::param(name, "entries must be finite"));
            }
        }
        if self.loss.iter().any(|&g| g < 0.0) {
            return Err(Error::param("loss", "loss rates must be nonnegative"));
        }
        if !self.kerr.is_finite() {
            return Err(Error::param("kerr", "must be finite"));
        }
        for site in [self.drive_site, self.signal_site] {
            if site >= n {
                return Err(Error::SiteOutOfRange { site, n_sites: n });
            }
        }
        for ck in &self.cross_kerr {
            for site in [ck.i, ck.j] {
                if site >= n {
                    return Err(Error::SiteOutOfRange { site, n_sites: n });
                }
            }
            if ck.i == ck.j {
                return Err(Error::param("cross_kerr", "pair must join distinct sites"));
            }
        }
        Ok(())
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_kerr(mut self, alpha: f64) -> Self {
        self.kerr = alpha;
        self
    }

    pub fn with_cross_kerr(mut self, pairs: Vec<CrossKerr>) -> Result<Self> {
        self.cross_kerr = pairs;
        self.validate()?;
        Ok(self)
    }

    pub fn with_drive(mut self, site: usize, amplitude: Complex64) -> Result<Self> {
        self.drive_site = site;
        self.drive_amplitude = amplitude;
        self.validate()?;
        Ok(self)
    }

    pub fn with_drive_amplitude(mut self, amplitude: Complex64) -> Self {
        self.drive_amplitude = amplitude;
        self
    }

    pub fn with_signal(mut self, site: usize) -> Result<Self> {
        self.signal_site = site;
        self.validate()?;
        Ok(self)
    }

    pub fn with_units(mut self, units: RateUnit) -> Self {
        self.units = units;
        self
    }

    pub fn with_assumption(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        if !self.assumptions.contains(&note) {
            self.assumptions.push(note);
        }
        self
    }

    /// Uniform detuning `delta` on every site.
    pub fn with_detuning(mut self, delta: f64) -> Self {
        self.detuning.iter_mut().for_each(|d| *d = delta);
        self
    }

    /// Moves the operating point to `(delta, gamma)`.
    ///
    /// Detuning offsets relative to site 0 and loss in excess of the smallest
    /// site loss are preserved.
    pub fn retuned(&self, delta: f64, gamma: f64) -> Self {
        let d0 = self.detuning[0];
        let gmin = self.loss.iter().copied().fold(f64::INFINITY, f64::min);
        let mut out = self.clone();
        out.detuning = self.detuning.iter().map(|d| delta + (d - d0)).collect();
        out.loss = self.loss.iter().map(|g| gamma + (g - gmin)).collect();
        out
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_sites(&self) -> usize {
        self.couplings.len()
    }

    pub fn couplings(&self) -> &[Vec<f64>] {
        &self.couplings
    }

    pub fn coupling(&self, i: usize, j: usize) -> f64 {
        self.couplings[i][j]
    }

    pub fn detuning(&self) -> &[f64] {
        &self.detuning
    }

    pub fn loss(&self) -> &[f64] {
        &self.loss
    }

    pub fn kerr(&self) -> f64 {
        self.kerr
    }

    pub fn cross_kerr(&self) -> &[CrossKerr] {
        &self.cross_kerr
    }

    pub fn drive_site(&self) -> usize {
        self.drive_site
    }

    pub fn drive_amplitude(&self) -> Complex64 {
        self.drive_amplitude
    }

    pub fn signal_site(&self) -> usize {
        self.signal_site
    }

    pub fn units(&self) -> RateUnit {
        self.units
    }

    pub fn assumptions(&self) -> &[String] {
        &self.assumptions
    }

    /// `z_i = Delta_i - i gamma_i / 2`.
    pub fn complex_detuning(&self, site: usize) -> Complex64 {
        Complex64::new(self.detuning[site], -0.5 * self.loss[site])
    }

    pub fn complex_detunings(&self) -> Vec<Complex64> {
        (0..self.n_sites()).map(|i| self.complex_detuning(i)).collect()
    }

    /// The common `z` when every site has the same detuning and loss.
    pub fn uniform_z(&self) -> Option<Complex64> {
        let z0 = self.complex_detuning(0);
        (1..self.n_sites())
            .all(|i| self.complex_detuning(i) == z0)
            .then_some(z0)
    }

    pub fn min_loss(&self) -> f64 {
        self.loss.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_coupling(&self) -> f64 {
        self.couplings
            .iter()
            .flatten()
            .map(|v| v.abs())
            .fold(0.0, f64::max)
    }

    /// Recovers `(k, J, J')` when the couplings have the mirror-symmetric ring
    /// form `J_01 = J'/k`, `J_12 = J_03 = J`, `J_23 = J'` with no diagonals,
    /// uniform `z`, drive on site 0 and signal on site 1.
    pub fn mirror_ring_params(&self) -> Option<FourCavityParams> {
        if self.n_sites() != 4 || self.drive_site != 0 || self.signal_site != 1 {
            return None;
        }
        let z = self.uniform_z()?;
        let c = &self.couplings;
        let (j01, j12, j03, j23) = (c[0][1], c[1][2], c[0][3], c[2][3]);
        if c[0][2] != 0.0 || c[1][3] != 0.0 || j12 != j03 || j01 <= 0.0 || j12 <= 0.0 || j23 <= 0.0 {
            return None;
        }
        Some(FourCavityParams {
            k: j23 / j01,
            j: j12,
            j_prime: j23,
            alpha: self.kerr,
            delta: z.re,
            gamma: -2.0 * z.im,
        })
    }
}

/// Delta minimizing the single-cavity g2(0) at fixed `(alpha, gamma)`.
pub fn conventional_delta_min(alpha: f64, gamma: f64) -> f64 {
    -(alpha - (alpha * alpha + gamma * gamma).sqrt()) / 2.0
}

pub fn preset_conventional(alpha: f64, delta: f64, gamma: f64, drive: f64) -> Result<CavityNetwork> {
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    Ok(CavityNetwork::new(vec![vec![0.0]], vec![delta], vec![gamma])?
        .with_name("conventional")
        .with_kerr(alpha)
        .with_drive_amplitude(Complex64::new(drive, 0.0)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum UpbMode {
    /// Root of `z^3 = -alpha J^2 / 2` in the lower half plane.
    Asymptotic,
    /// Exact zero of the first-order analytic g2(0), seeded from the asymptotic root.
    Exact,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct UpbOperatingPoint {
    pub mode: UpbMode,
    pub j: f64,
    pub delta: f64,
    pub gamma: f64,
    pub asymptotic_j: f64,
    pub asymptotic_delta: f64,
}

/// Asymptotic two-cavity UPB point: `|z| = gamma/sqrt(3)`, `Delta = |z|/2`,
/// `J = sqrt(2 |z|^3 / alpha)`.
pub fn upb_asymptotic(alpha: f64, gamma: f64) -> Result<(f64, f64)> {
    if !(alpha > 0.0) {
        return Err(Error::param("alpha", "must be positive"));
    }
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    let r = gamma / 3f64.sqrt();
    Ok(((2.0 * r.powi(3) / alpha).sqrt(), r / 2.0))
}

fn dimer(j: f64, delta: f64, gamma: f64, alpha: f64) -> Result<CavityNetwork> {
    CavityNetwork::new(
        vec![vec![0.0, j], vec![j, 0.0]],
        vec![delta; 2],
        vec![gamma; 2],
    )
    .map(|n| n.with_kerr(alpha))
}

pub fn preset_upb_two_cavity(
    alpha: f64,
    gamma: f64,
    mode: UpbMode,
) -> Result<(CavityNetwork, UpbOperatingPoint)> {
    let (aj, ad) = upb_asymptotic(alpha, gamma)?;
    let (j, delta) = match mode {
        UpbMode::Asymptotic => (aj, ad),
        UpbMode::Exact => refine_upb(alpha, gamma, aj, ad)?,
    };
    let net = dimer(j, delta, gamma, alpha)?
        .with_name("upb-two-cavity")
        .with_drive_amplitude(Complex64::new(DEFAULT_DRIVE, 0.0))
        .with_assumption(DEFAULT_DRIVE_ASSUMPTION);
    Ok((
        net,
        UpbOperatingPoint {
            mode,
            j,
            delta,
            gamma,
            asymptotic_j: aj,
            asymptotic_delta: ad,
        },
    ))
}

/// Newton iteration in `(J, Delta)` on the complex g2 amplitude at tau = 0.
fn refine_upb(alpha: f64, gamma: f64, j0: f64, d0: f64) -> Result<(f64, f64)> {
    let amp = |j: f64, d: f64| -> Result<Complex64> {
        perturbative::correlation_amplitude(&dimer(j, d, gamma, alpha)?, 0, 0, 0.0)
    };
    crate::linear::newton_real2(amp, j0, d0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FourCavityParams {
    pub k: f64,
    pub j: f64,
    pub j_prime: f64,
    pub alpha: f64,
    pub delta: f64,
    pub gamma: f64,
}

impl FourCavityParams {
    /// The `k = 16` long-lived blockade configuration.
    pub fn llpb() -> Self {
        FourCavityParams {
            k: 16.0,
            j: 0.1227,
            j_prime: 0.02454,
            alpha: 0.001227,
            delta: 0.009571,
            gamma: 1.0,
        }
    }

    /// The `k = 4` configuration used for drive-strength sweeps.
    pub fn occupation_sweep() -> Self {
        FourCavityParams {
            k: 4.0,
            j: 0.5386,
            j_prime: 0.5386,
            alpha: 0.0194,
            delta: 0.0652,
            gamma: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.k > 0.0) {
            return Err(Error::param("k", "must be positive"));
        }
        for (name, v) in [
            ("J", self.j),
            ("J_prime", self.j_prime),
            ("alpha", self.alpha),
            ("gamma", self.gamma),
        ] {
            if !(v >= 0.0) {
                return Err(Error::param(name, "must be nonnegative"));
            }
        }
        if !self.delta.is_finite() {
            return Err(Error::param("delta", "must be finite"));
        }
        Ok(())
    }
}

fn ring_couplings(j01: f64, j12: f64, j23: f64, j03: f64) -> Vec<Vec<f64>> {
    let mut c = vec![vec![0.0; 4]; 4];
    for (a, b, v) in [(0, 1, j01), (1, 2, j12), (2, 3, j23), (0, 3, j03)] {
        c[a][b] = v;
        c[b][a] = v;
    }
    c
}

pub fn preset_llpb_four_cavity(params: FourCavityParams) -> Result<CavityNetwork> {
    params.validate()?;
    CavityNetwork::new(
        ring_couplings(params.j_prime / params.k, params.j, params.j_prime, params.j),
        vec![params.delta; 4],
        vec![params.gamma; 4],
    )?
    .with_name("llpb-four-cavity")
    .with_kerr(params.alpha)
    .with_drive(0, Complex64::new(DEFAULT_DRIVE, 0.0))?
    .with_signal(1)
    .map(|n| n.with_assumption(DEFAULT_DRIVE_ASSUMPTION))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhotonicRingParams {
    /// Ring radius (um).
    pub radius: f64,
    /// Waveguide width (um).
    pub width: f64,
    /// Waveguide thickness (um).
    pub thickness: f64,
    pub n_core: f64,
    pub n_clad: f64,
    /// Nonlinear index (um^2/W).
    pub n2: f64,
    /// Vacuum wavelength (nm).
    pub wavelength: f64,
    /// Rates below in ueV.
    pub gamma: f64,
    pub gamma_in: f64,
    pub gamma_out: f64,
    pub j: f64,
    pub j_prime: f64,
    pub j_dprime: f64,
}

impl PhotonicRingParams {
    /// Silicon-carbide microring pair. `J` is a tuning knob; 1 ueV is a placeholder.
    pub fn sic_reference() -> Self {
        PhotonicRingParams {
            radius: 3.0,
            width: 0.8,
            thickness: 0.35,
            n_core: 2.45,
            n_clad: 1.44,
            n2: 4.8e-6,
            wavelength: 1550.0,
            gamma: 5.0,
            gamma_in: 2.5,
            gamma_out: 2.5,
            j: 1.0,
            j_prime: 0.2,
            j_dprime: 0.02,
        }
    }

    /// `2 pi R w t` in um^3.
    pub fn mode_volume(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.radius * self.width * self.thickness
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("radius", self.radius),
            ("width", self.width),
            ("thickness", self.thickness),
            ("n_core", self.n_core),
            ("n_clad", self.n_clad),
            ("n2", self.n2),
            ("wavelength", self.wavelength),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be positive"));
            }
        }
        for (name, v) in [
            ("gamma", self.gamma),
            ("gamma_in", self.gamma_in),
            ("gamma_out", self.gamma_out),
            ("J", self.j),
            ("J_prime", self.j_prime),
            ("J_dprime", self.j_dprime),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::param(name, "must be nonnegative"));
            }
        }
        Ok(())
    }
}

const SPEED_OF_LIGHT: f64 = 2.997_924_58e8;
const PLANCK_EV_NM: f64 = 1_239.841_984;
const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Kerr coefficient `c (hbar w)^2 n2 / (n^2 V)` in ueV.
pub fn estimate_kerr(params: &PhotonicRingParams) -> Result<f64> {
    params.validate()?;
    let v = params.mode_volume() * 1e-18;
    if v <= 0.0 {
        return Err(Error::param("mode_volume", "must be positive"));
    }
    let photon_energy = PLANCK_EV_NM / params.wavelength * ELEMENTARY_CHARGE;
    let n2 = params.n2 * 1e-12;
    let alpha_joule = SPEED_OF_LIGHT * photon_energy * photon_energy * n2
        / (params.n_core * params.n_core * v);
    Ok(alpha_joule / ELEMENTARY_CHARGE * 1e6)
}

/// Two counter-propagating-mode rings: sites 0, 1 are ring one (driven, read
/// out), sites 2, 3 ring two. Detuning starts at zero.
pub fn preset_two_ring_photonic(params: &PhotonicRingParams, drive: f64) -> Result<CavityNetwork> {
    params.validate()?;
    let alpha = estimate_kerr(params)?;
    let outer = params.gamma + params.gamma_in + params.gamma_out;
    CavityNetwork::new(
        ring_couplings(params.j_dprime, params.j, params.j_prime, params.j),
        vec![0.0; 4],
        vec![outer, outer, params.gamma, params.gamma],
    )?
    .with_name("two-ring-photonic")
    .with_kerr(alpha)
    .with_units(RateUnit::MicroElectronVolt)
    .with_cross_kerr(vec![
        CrossKerr { i: 0, j: 1, strength: alpha },
        CrossKerr { i: 2, j: 3, strength: alpha },
    ])?
    .with_drive(0, Complex64::new(drive, 0.0))?
    .with_signal(1)
}
