//! Weak-drive analytics to first order in the Kerr coupling.
//!
//! With `h = [J] + diag(z_i)` and `psi = h^-1 |d>` (the drive amplitude
//! cancels in every normalized quantity), the two-photon steady state in the
//! tensor basis is `psi (x) psi / sqrt2 - C` with
//! `C = (h (+) h)^-1 V psi (x) psi / sqrt2` and `V` the two-photon interaction
//! (`2 alpha` on `|k,k>`, `2 alpha_x` on cross-Kerr pairs). Collapsing site
//! `j` and reading site `i` after a delay gives the amplitude
//! `1 - sqrt2 (e^{-i h tau} C_j)_i / (psi_i psi_j)`, whose modulus squared is
//! g2_ij(tau).

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linear::{eigendecompose, green_single, green_two_photon, FssZeros};
use crate::models::{preset_upb_two_cavity, CavityNetwork, FourCavityParams, UpbMode, UpbOperatingPoint};
use crate::series::{validate_grid, CorrelationSeries, Engine};

const DARK_STATE_TOL: f64 = 1e-14;

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub(crate) struct FirstOrder {
    n: usize,
    h: DMatrix<Complex64>,
    psi: DVector<Complex64>,
    corr: DMatrix<Complex64>,
}

impl FirstOrder {
    pub(crate) fn new(network: &CavityNetwork) -> Result<Self> {
        Self::with_detunings(network, &network.complex_detunings())
    }

    pub(crate) fn with_detunings(network: &CavityNetwork, zs: &[Complex64]) -> Result<Self> {
        network.validate()?;
        let n = network.n_sites();
        let h = DMatrix::from_fn(n, n, |r, c| {
            let d = if r == c { zs[r] } else { czero() };
            d + network.coupling(r, c)
        });
        let lu = h.clone().lu();
        let mut psi = DVector::zeros(n);
        psi[network.drive_site()] = Complex64::new(1.0, 0.0);
        if !lu.solve_mut(&mut psi) {
            return Err(Error::PoleProximity {
                z: zs[0],
                distance: 0.0,
            });
        }
        let nn = n * n;
        let h2 = DMatrix::from_fn(nn, nn, |r, c| {
            let (a, b) = (r / n, r % n);
            let (x, y) = (c / n, c % n);
            let mut v = czero();
            if b == y {
                v += h[(a, x)];
            }
            if a == x {
                v += h[(b, y)];
            }
            v
        });
        let mut rhs = DVector::zeros(nn);
        let s2 = std::f64::consts::SQRT_2;
        for k in 0..n {
            rhs[k * n + k] = psi[k] * psi[k] * (2.0 * network.kerr() / s2);
        }
        for ck in network.cross_kerr() {
            let v = psi[ck.i] * psi[ck.j] * (2.0 * ck.strength / s2);
            rhs[ck.i * n + ck.j] += v;
            rhs[ck.j * n + ck.i] += v;
        }
        if !h2.lu().solve_mut(&mut rhs) {
            return Err(Error::PoleProximity {
                z: zs[0],
                distance: 0.0,
            });
        }
        let corr = DMatrix::from_fn(n, n, |a, b| rhs[a * n + b]);
        Ok(FirstOrder { n, h, psi, corr })
    }

    fn check_pair(&self, i: usize, j: usize) -> Result<Complex64> {
        for s in [i, j] {
            if s >= self.n {
                return Err(Error::SiteOutOfRange {
                    site: s,
                    n_sites: self.n,
                });
            }
        }
        let scale = self.psi.iter().map(|v| v.norm_sqr()).fold(0.0, f64::max);
        let den = self.psi[i] * self.psi[j];
        if den.norm() <= DARK_STATE_TOL * scale {
            return Err(Error::DarkStateSingularity);
        }
        Ok(den)
    }

    pub(crate) fn amplitudes(&self, i: usize, j: usize, taus: &[f64]) -> Result<Vec<Complex64>> {
        let den = self.check_pair(i, j)?;
        let cj = self.corr.row(j).transpose();
        let s2 = std::f64::consts::SQRT_2;
        Ok(taus
            .iter()
            .map(|&t| {
                let evolved = if t == 0.0 {
                    cj[i]
                } else {
                    let u = (&self.h * Complex64::new(0.0, -t)).exp();
                    (u.row(i) * &cj)[0]
                };
                Complex64::new(1.0, 0.0) - evolved * s2 / den
            })
            .collect())
    }

    /// `psi_s^2 f_ss(z)`, analytic in `z` and free of the dark-state pole.
    pub(crate) fn numerator(&self, s: usize) -> Complex64 {
        self.psi[s] * self.psi[s] - self.corr[(s, s)] * std::f64::consts::SQRT_2
    }
}

/// Complex amplitude whose modulus squared is `g2_ij(tau)`.
pub fn correlation_amplitude(network: &CavityNetwork, i: usize, j: usize, tau: f64) -> Result<Complex64> {
    Ok(FirstOrder::new(network)?.amplitudes(i, j, &[tau])?[0])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Route {
    /// Eigenmode sums over `(z + eps_n)^-1` and `(2z + eps_m + eps_n)^-1`; uniform `z`, self-Kerr only.
    Spectral,
    /// Direct solves with `h = [J] + diag(z_i)`; any network.
    Direct,
}

fn require_loss(network: &CavityNetwork) -> Result<()> {
    if network.loss().iter().any(|&g| g <= 0.0) {
        return Err(Error::param("loss", "every site needs a positive loss rate for a steady state"));
    }
    Ok(())
}

/// The route [`g2_tau_analytic`] uses for `network`.
pub fn default_route(network: &CavityNetwork) -> Route {
    if network.uniform_z().is_some() && network.cross_kerr().is_empty() {
        Route::Spectral
    } else {
        Route::Direct
    }
}

/// g2_ij on a delay grid. `j` is the site detected first.
pub fn g2_pair(network: &CavityNetwork, i: usize, j: usize, taus: &[f64], route: Route) -> Result<Vec<f64>> {
    require_loss(network)?;
    match route {
        Route::Direct => Ok(FirstOrder::new(network)?
            .amplitudes(i, j, taus)?
            .into_iter()
            .map(|a| a.norm_sqr())
            .collect()),
        Route::Spectral => spectral_pair(network, i, j, taus),
    }
}

fn spectral_pair(network: &CavityNetwork, i: usize, j: usize, taus: &[f64]) -> Result<Vec<f64>> {
    let z = network
        .uniform_z()
        .ok_or_else(|| Error::param("route", "the spectral route needs a uniform complex detuning"))?;
    if !network.cross_kerr().is_empty() {
        return Err(Error::param("route", "the spectral route covers self-Kerr terms only"));
    }
    let n = network.n_sites();
    for s in [i, j] {
        if s >= n {
            return Err(Error::SiteOutOfRange { site: s, n_sites: n });
        }
    }
    let d = network.drive_site();
    let sp = eigendecompose(network.couplings())?;
    let g = green_single(z, &sp)?;
    let den = g.get(i, d) * g.get(j, d);
    let scale = (0..n).map(|k| g.get(k, d).norm_sqr()).fold(0.0, f64::max);
    if den.norm() <= DARK_STATE_TOL * scale {
        return Err(Error::DarkStateSingularity);
    }
    let alpha = network.kerr();
    taus.iter()
        .map(|&t| {
            let g2 = green_two_photon(z, &sp, t)?;
            let sum: Complex64 = (0..n).map(|k| g.get(k, d).powi(2) * g2.ijkk(i, j, k)).sum();
            let phase = (Complex64::new(0.0, -1.0) * z * t).exp();
            Ok((Complex64::new(1.0, 0.0) - phase * sum * (2.0 * alpha) / den).norm_sqr())
        })
        .collect()
}

/// Signal-site g2(tau) from the first-order analytic formula.
pub fn g2_tau_analytic(network: &CavityNetwork, taus: &[f64]) -> Result<CorrelationSeries> {
    validate_grid(taus)?;
    let s = network.signal_site();
    let route = default_route(network);
    let values = g2_pair(network, s, s, taus, route)?;
    Ok(CorrelationSeries::new(taus.to_vec(), values, None, Engine::Analytic)?
        .with_meta("formula", "first-order-green-function")
        .with_meta("route", format!("{route:?}").to_lowercase()))
}

/// g2_ss(0) at the network's own operating point.
pub fn g2_zero_analytic(network: &CavityNetwork) -> Result<f64> {
    let s = network.signal_site();
    Ok(g2_pair(network, s, s, &[0.0], default_route(network))?[0])
}

/// Fock amplitude of a two-photon basis state `a_i^dagger a_j^dagger |0>`,
/// normalized (`|1_i 1_j>` for `i < j`, `|2_i>` for `i == j`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PairAmplitude {
    pub i: usize,
    pub j: usize,
    pub amplitude: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct WeakDriveSteadyState {
    pub one_photon: Vec<Complex64>,
    /// Unordered pairs `i <= j` in lexicographic order.
    pub two_photon: Vec<PairAmplitude>,
    pub occupations: Vec<f64>,
}

impl WeakDriveSteadyState {
    pub fn pair(&self, i: usize, j: usize) -> Complex64 {
        let (a, b) = if i <= j { (i, j) } else { (j, i) };
        self.two_photon
            .iter()
            .find(|p| p.i == a && p.j == b)
            .map(|p| p.amplitude)
            .unwrap_or_else(czero)
    }
}

/// One- and two-photon steady-state amplitudes to first order in the Kerr terms.
pub fn steady_state_weak_drive(network: &CavityNetwork) -> Result<WeakDriveSteadyState> {
    require_loss(network)?;
    let fo = FirstOrder::new(network)?;
    let f = network.drive_amplitude();
    let n = fo.n;
    let one: Vec<Complex64> = fo.psi.iter().map(|p| -f * p).collect();
    let s2 = std::f64::consts::SQRT_2;
    let mut two = Vec::new();
    for i in 0..n {
        for j in i..n {
            let t = one[i] * one[j] / s2 - fo.corr[(i, j)] * f * f;
            let amp = if i == j { t } else { t * s2 };
            two.push(PairAmplitude { i, j, amplitude: amp });
        }
    }
    let occupations = one.iter().map(|c| c.norm_sqr()).collect();
    Ok(WeakDriveSteadyState {
        one_photon: one,
        two_photon: two,
        occupations,
    })
}

/// Exact single-cavity result `|1 - alpha/(alpha + z) e^{-i z tau}|^2`.
pub fn g2_conventional_closed(alpha: f64, delta: f64, gamma: f64, taus: &[f64]) -> Result<CorrelationSeries> {
    if !(gamma > 0.0) {
        return Err(Error::param("gamma", "must be positive"));
    }
    validate_grid(taus)?;
    let z = Complex64::new(delta, -gamma / 2.0);
    let r = alpha / (alpha + z);
    let values = taus
        .iter()
        .map(|&t| (Complex64::new(1.0, 0.0) - r * (Complex64::new(0.0, -1.0) * z * t).exp()).norm_sqr())
        .collect();
    Ok(CorrelationSeries::new(taus.to_vec(), values, None, Engine::Analytic)?
        .with_meta("formula", "conventional-closed"))
}

/// `(1 - e^{-gamma tau/2} cos(Delta tau) cos(J tau))^2` at the two-cavity operating point.
pub fn g2_upb_closed(alpha: f64, gamma: f64, taus: &[f64]) -> Result<(CorrelationSeries, UpbOperatingPoint)> {
    validate_grid(taus)?;
    if alpha > 0.1 * gamma {
        log::warn!("two-cavity closed form assumes alpha << gamma (alpha/gamma = {})", alpha / gamma);
    }
    let (_, op) = preset_upb_two_cavity(alpha, gamma, UpbMode::Exact)?;
    let values = taus
        .iter()
        .map(|&t| (1.0 - (-gamma * t / 2.0).exp() * (op.delta * t).cos() * (op.j * t).cos()).powi(2))
        .collect();
    let series = CorrelationSeries::new(taus.to_vec(), values, None, Engine::Analytic)?
        .with_meta("formula", "two-cavity-closed")
        .with_meta("J", op.j)
        .with_meta("delta", op.delta);
    Ok((series, op))
}

/// Closed-form g2_22(tau) of the mirror-symmetric ring near its dark state,
/// evaluated at `z = -i sqrt(k) J + (sqrt19/8) k^(1/4) sqrt(alpha J) e^{-i pi/4}`.
pub fn g2_llpb_closed(params: &FourCavityParams, taus: &[f64]) -> Result<CorrelationSeries> {
    params.validate()?;
    validate_grid(taus)?;
    if params.j_prime > 0.3 * params.j {
        log::warn!("ring closed form assumes J' << J (J'/J = {})", params.j_prime / params.j);
    }
    let FourCavityParams { k, j, j_prime: jp, alpha, .. } = *params;
    let z0 = Complex64::new(0.0, -k.sqrt() * j);
    let dz = Complex64::from_polar(19f64.sqrt() / 8.0 * k.powf(0.25) * (alpha * j).sqrt(), -std::f64::consts::FRAC_PI_4);
    let z = z0 + dz;
    let r = jp * jp / j;
    let values = taus
        .iter()
        .map(|&t| {
            let cos_term = 16.0 * j * t * (3.0 * k + 10.0) + 304.0 / k.sqrt() - 3.0 * r * t * k * k;
            let sin_term = 3.0 * (48.0 - 16.0 * k + r * t * k.powf(1.5) + jp * jp / (j * j) * k * k);
            let s = k.sqrt() / 304.0 * ((j * t).cos() * cos_term + (j * t).sin() * sin_term);
            (Complex64::new(1.0, 0.0) - (Complex64::new(0.0, -1.0) * z * t).exp() * s).norm_sqr()
        })
        .collect();
    Ok(CorrelationSeries::new(taus.to_vec(), values, None, Engine::Analytic)?
        .with_meta("formula", "ring-closed")
        .with_meta("z", z))
}

/// Moves a uniform network onto the `z` of a refined zero.
pub fn at_zero(network: &CavityNetwork, zeros: &FssZeros, branch: usize) -> CavityNetwork {
    let z = zeros.refined_pair[branch];
    network.retuned(z.re, -2.0 * z.im)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hilbert::{hamiltonian_csr, FockBasis, FockConfig};
    use crate::linear::fss_zeros;
    use crate::models::{preset_conventional, preset_llpb_four_cavity, FourCavityParams};
    use crate::series::uniform_grid;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn single_cavity_one_photon_amplitude() {
        let net = preset_conventional(0.0, 0.0, 1.0, 1e-5).unwrap();
        let ss = steady_state_weak_drive(&net).unwrap();
        assert!((ss.one_photon[0] - c(0.0, -2e-5)).norm() < 1e-20);
        assert!((ss.occupations[0] - 4e-10).abs() < 1e-24);
    }

    #[test]
    fn linear_two_photon_part_factorizes() {
        let net = preset_llpb_four_cavity(FourCavityParams::llpb()).unwrap().with_kerr(0.0);
        let ss = steady_state_weak_drive(&net).unwrap();
        for i in 0..4 {
            for j in i..4 {
                let p = ss.one_photon[i] * ss.one_photon[j];
                let expect = if i == j { p / 2f64.sqrt() } else { p };
                assert!((ss.pair(i, j) - expect).norm() <= 1e-12 * expect.norm().max(1e-30));
            }
        }
    }

    /// Photon-number recursion `psi^(k) = -F H_k^-1 a_d^dagger psi^(k-1)` in
    /// the truncated Fock space with the exact Kerr term.
    fn fock_recursion(net: &CavityNetwork) -> (Vec<Complex64>, Vec<Vec<Complex64>>) {
        let n = net.n_sites();
        let basis = FockBasis::new(&FockConfig::uniform(n, 3).unwrap()).unwrap();
        let h = hamiltonian_csr(net, &basis, true, false).unwrap();
        let f = net.drive_amplitude();
        let d = net.drive_site();
        let sector = |np: u32| -> Vec<usize> { (0..basis.dimension()).filter(|&b| basis.total_photons(b) == np).collect() };
        let s1 = sector(1);
        let s2 = sector(2);
        let solve = |states: &[usize], rhs: Vec<Complex64>| -> Vec<Complex64> {
            let m = DMatrix::from_fn(states.len(), states.len(), |r, cc| h.get(states[r], states[cc]));
            let v = m.lu().solve(&DVector::from_vec(rhs)).unwrap();
            v.iter().copied().collect()
        };
        let rhs1: Vec<Complex64> = s1.iter().map(|&b| if basis.occupation_at(b, d) == 1 { -f } else { czero() }).collect();
        let psi1 = solve(&s1, rhs1);
        let mut full1 = vec![czero(); basis.dimension()];
        for (k, &b) in s1.iter().enumerate() {
            full1[b] = psi1[k];
        }
        let rhs2: Vec<Complex64> = s2
            .iter()
            .map(|&b| {
                let nd = basis.occupation_at(b, d);
                if nd == 0 {
                    return czero();
                }
                let src = b - basis.stride(d);
                -f * (nd as f64).sqrt() * full1[src]
            })
            .collect();
        let psi2 = solve(&s2, rhs2);
        let one: Vec<Complex64> = (0..n).map(|i| full1[basis.stride(i)]).collect();
        let mut two = vec![vec![czero(); n]; n];
        for (k, &b) in s2.iter().enumerate() {
            let occ = basis.occupation(b);
            let sites: Vec<usize> = (0..n).flat_map(|i| std::iter::repeat_n(i, occ[i])).collect();
            two[sites[0]][sites[1]] = psi2[k];
        }
        (one, two)
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn first_order_matches_fock_recursion() {
        let alpha = 1e-6;
        let net = preset_llpb_four_cavity(FourCavityParams { alpha, ..FourCavityParams::llpb() }).unwrap();
        let ss = steady_state_weak_drive(&net).unwrap();
        let (one, two) = fock_recursion(&net);
        for i in 0..4 {
            assert!((ss.one_photon[i] - one[i]).norm() < 1e-12 * one[i].norm().max(1e-12));
            for j in i..4 {
                let exact = two[i][j];
                let lin = net.clone().with_kerr(0.0);
                let base = steady_state_weak_drive(&lin).unwrap().pair(i, j);
                // The Kerr correction itself must agree to first order.
                let corr_exact = exact - base;
                let corr_first = ss.pair(i, j) - base;
                let scale = base.norm();
                assert!((corr_exact - corr_first).norm() < 1e-4 * corr_exact.norm() + 1e-15 * scale, "({i},{j})");
            }
        }
    }

    #[test]
    fn routes_agree_on_reference_ring() {
        let net = preset_llpb_four_cavity(FourCavityParams::llpb()).unwrap();
        let taus = uniform_grid(0.0, 20.0, 81).unwrap();
        for (i, j) in [(1, 1), (0, 1), (1, 0), (2, 3)] {
            let a = g2_pair(&net, i, j, &taus, Route::Spectral).unwrap();
            let b = g2_pair(&net, i, j, &taus, Route::Direct).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9 * x.max(1.0), "({i},{j}): {x} vs {y}");
            }
        }
    }

    #[test]
    fn zero_at_refined_operating_point() {
        let net = preset_llpb_four_cavity(FourCavityParams::llpb()).unwrap();
        let zeros = fss_zeros(&net).unwrap();
        let at = at_zero(&net, &zeros, 0);
        assert!(g2_zero_analytic(&at).unwrap() < 1e-6);
    }

    #[test]
    fn conventional_matches_closed_form_at_small_alpha() {
        let taus = uniform_grid(0.0, 10.0, 51).unwrap();
        let alpha = 1e-5;
        let net = preset_conventional(alpha, 0.3, 1.0, 1e-5).unwrap();
        let a = g2_tau_analytic(&net, &taus).unwrap();
        let b = g2_conventional_closed(alpha, 0.3, 1.0, &taus).unwrap();
        for (x, y) in a.values().iter().zip(b.values()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn conventional_closed_values() {
        let s = g2_conventional_closed(10.0, 0.0, 1.0, &[0.0]).unwrap();
        assert!((s.values()[0] - 0.25 / 100.25).abs() < 1e-15);
        assert!((s.values()[0] - 0.0024938).abs() < 1e-7);
        let big = g2_conventional_closed(1e6, 0.0, 1.0, &[0.0, 1.0, 3.0]).unwrap();
        for (t, v) in big.tau().iter().zip(big.values()) {
            assert!((v - (1.0 - (-t / 2.0f64).exp()).powi(2)).abs() < 1e-6);
        }
    }

    #[test]
    fn upb_closed_form_shape() {
        let taus = uniform_grid(0.0, 0.2, 2001).unwrap();
        let (s, op) = g2_upb_closed(0.001227, 1.0, &taus).unwrap();
        assert_eq!(s.values()[0], 0.0);
        let quarter = std::f64::consts::FRAC_PI_2 / op.j;
        assert!((quarter - 0.0889).abs() < 5e-4);
        let v = s.value_at(quarter).unwrap();
        assert!((v - 1.0).abs() < 1e-3, "{v}");
        for (t, v) in s.tau().iter().zip(s.values()) {
            let env = (1.0 - (-t / 2.0f64).exp()).powi(2);
            assert!(*v >= env - 1e-12 || (op.delta * t).cos() * (op.j * t).cos() < 0.0);
        }
    }

    #[test]
    fn ring_closed_form_limits() {
        let p = FourCavityParams::llpb();
        let s = g2_llpb_closed(&p, &[0.0, 0.01, 0.02]).unwrap();
        assert!(s.values()[0] < 1e-6);
        let gamma = 2.0 * p.k.sqrt() * p.j;
        let quartic = (gamma * 0.02f64).powi(4) / 64.0;
        assert!(s.values()[2] < 50.0 * quartic.max(1e-8));
    }

    #[test]
    fn dark_state_is_reported() {
        let net = preset_llpb_four_cavity(FourCavityParams::llpb()).unwrap();
        let root = crate::linear::find_spds_zero(&net, c(0.0, -0.49)).unwrap();
        let at = net.retuned(root.z_star.re, -2.0 * root.z_star.im);
        assert!(matches!(g2_zero_analytic(&at), Err(Error::DarkStateSingularity)));
    }

    #[test]
    fn tails_return_to_one() {
        let taus = [40.0];
        let nets = [
            preset_llpb_four_cavity(FourCavityParams::llpb()).unwrap(),
            preset_llpb_four_cavity(FourCavityParams::occupation_sweep()).unwrap(),
            preset_conventional(0.01, 0.02, 1.0, 1e-5).unwrap(),
        ];
        for net in nets {
            let v = g2_tau_analytic(&net, &taus).unwrap().values()[0];
            assert!((v - 1.0).abs() < 1e-3, "{}: {v}", net.name());
        }
    }

    proptest! {
        #[test]
        fn linear_networks_are_coherent(k in 1.0f64..20.0, j in 0.01f64..1.0, jp in 0.01f64..1.0, delta in -0.5f64..0.5, gamma in 0.2f64..2.0, i in 0usize..4, jj in 0usize..4) {
            let net = preset_llpb_four_cavity(FourCavityParams { k, j, j_prime: jp, alpha: 0.0, delta, gamma }).unwrap();
            let taus = [0.0, 0.7, 3.0];
            for route in [Route::Spectral, Route::Direct] {
                for v in g2_pair(&net, i, jj, &taus, route).unwrap() {
                    prop_assert!((v - 1.0).abs() < 1e-12);
                }
            }
        }

        #[test]
        fn single_cavity_first_order_accuracy(alpha in 1e-4f64..0.05, delta in -1.0f64..1.0, t in 0.0f64..10.0) {
            let net = preset_conventional(alpha, delta, 1.0, 1e-5).unwrap();
            let a = g2_tau_analytic(&net, &[t]).unwrap().values()[0];
            let b = g2_conventional_closed(alpha, delta, 1.0, &[t]).unwrap().values()[0];
            prop_assert!((a - b).abs() / b < 10.0 * alpha);
        }

        #[test]
        fn values_nonnegative(delta in -0.05f64..0.05, gamma in 0.8f64..1.2, t in 0.0f64..30.0) {
            let net = preset_llpb_four_cavity(FourCavityParams::llpb()).unwrap().retuned(delta, gamma);
            if let Ok(s) = g2_tau_analytic(&net, &[t]) {
                prop_assert!(s.values()[0] >= 0.0);
            }
        }
    }
}
