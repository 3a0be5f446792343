//! Acceptance suite: one PASS/FAIL line per primary criterion.
//!
//! Runs as a plain binary so the report is always printed. Failing criteria
//! make the process exit nonzero only when `ACCEPTANCE_STRICT=1`.

use std::time::Instant;

use blockade_core::compare::compare;
use blockade_core::hilbert::{DensityMatrix, FockConfig};
use blockade_core::lindblad::{
    evolve, regression_g2, static_g2, steady_state_with, LindbladProblem, SteadyStateOptions,
};
use blockade_core::linear::{
    closed_form_delta_z, crude_spds_estimate, dyson_spds_estimate, find_spds_zero, fss_zeros, green_direct,
    site_offsets,
};
use blockade_core::models::{
    preset_conventional, preset_llpb_four_cavity, preset_two_ring_photonic, preset_upb_two_cavity, CavityNetwork,
    FourCavityParams, PhotonicRingParams, UpbMode,
};
use blockade_core::ode::OdeOptions;
use blockade_core::parallel::Execution;
use blockade_core::perturbative::{at_zero, g2_conventional_closed, g2_tau_analytic};
use blockade_core::series::{short_time_exponent, uniform_grid, CorrelationSeries};
use blockade_core::sweep::{analytic_sweep, refine_minimum};
use blockade_core::wfmc::{ensemble_g2, occupation_sweep, EnsembleResult, TrajectoryConfig};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const LLPB_DELTA: f64 = 0.009571;
const WINDOW_TARGET: f64 = 8.0;
const WINDOW_TOL: f64 = 0.15;
const RATIO_TARGET: f64 = 90.0;
const RATIO_TOL: f64 = 0.20;
const DYSON_ORACLE: f64 = -0.5206;
const CRUDE_ORACLE: f64 = -0.4908;
const DELTA_Z_TARGET: f64 = 0.009548;

struct Report {
    passed: usize,
    failed: usize,
}

impl Report {
    fn line(&mut self, name: &str, pass: bool, detail: String) {
        if pass {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        println!("{} {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    }

    fn note(&self, detail: String) {
        println!("     note: {detail}");
    }
}

fn within_rel(x: f64, target: f64, tol: f64) -> bool {
    ((x - target) / target).abs() <= tol
}

fn llpb() -> CavityNetwork {
    preset_llpb_four_cavity(FourCavityParams::llpb()).unwrap()
}

fn llpb_wfmc(beta: f64, taus: &[f64]) -> EnsembleResult {
    let cfg = TrajectoryConfig {
        beta,
        ..TrajectoryConfig::new(FockConfig::uniform(4, 3).unwrap())
    };
    ensemble_g2(&llpb(), &cfg, taus).unwrap()
}

fn llpb_point(r: &mut Report, wfmc: &EnsembleResult) {
    let net = llpb();
    let deltas = uniform_grid(-0.03, 0.03, 121).unwrap();
    let gammas = uniform_grid(0.9, 1.1, 81).unwrap();
    let t = Instant::now();
    let grid = analytic_sweep(&net, &deltas, &gammas, Execution::default()).unwrap();
    let sweep_time = t.elapsed().as_secs_f64();
    let m = grid.argmin();
    let refined = refine_minimum(&net, &grid).unwrap();
    let (g0, se) = wfmc.g2_zero().unwrap();
    let in_cell = grid.minimum_within_one_cell(LLPB_DELTA, 1.0);
    let pass = in_cell && refined.value < 1e-4 && g0 < 0.05 && sweep_time < 60.0;
    r.line(
        "llpb-operating-point",
        pass,
        format!(
            "grid argmin (delta {:.4}, gamma {:.4}) within one cell: {in_cell}; refined minimum {:.3e} at ({:.6}, {:.6}); \
             grid-cell value {:.3e}; wfmc g2(0) {:.3e} +- {:.1e}; sweep {:.2} s",
            m.delta, m.gamma, refined.value, refined.delta, refined.gamma, m.value, g0, se, sweep_time
        ),
    );
}

fn antibunching_window(r: &mut Report, analytic: &CorrelationSeries, wfmc: &EnsembleResult) -> f64 {
    let wa = analytic.antibunching_window(0.5).unwrap_or(f64::NAN);
    let ww = wfmc.series.antibunching_window(0.5).unwrap_or(f64::NAN);
    let pass = within_rel(wa, WINDOW_TARGET, WINDOW_TOL) && within_rel(ww, WINDOW_TARGET, WINDOW_TOL);
    r.line(
        "antibunching-window",
        pass,
        format!("analytic {wa:.4}/gamma, wfmc {ww:.4}/gamma, target {WINDOW_TARGET} +- 15%"),
    );
    wa
}

fn window_ratio(r: &mut Report, llpb_window: f64) {
    let (upb, op) = preset_upb_two_cavity(0.001227, 1.0, UpbMode::Exact).unwrap();
    let taus = uniform_grid(0.0, 1.0, 4001).unwrap();
    let w = g2_tau_analytic(&upb, &taus).unwrap().antibunching_window(0.5).unwrap_or(f64::NAN);
    let ratio = llpb_window / w;
    r.line(
        "window-ratio",
        within_rel(ratio, RATIO_TARGET, RATIO_TOL),
        format!(
            "two-cavity window {w:.5}/gamma at J {:.3}, delta {:.4}; ratio {ratio:.1}, target {RATIO_TARGET} +- 20%",
            op.j, op.delta
        ),
    );
}

fn conventional(r: &mut Report) {
    let (alpha, delta, gamma) = (10.0, 0.02491, 1.0);
    let net = preset_conventional(alpha, delta, gamma, 1e-5).unwrap();
    let taus = uniform_grid(0.0, 10.0, 101).unwrap();
    let exact = g2_conventional_closed(alpha, delta, gamma, &taus).unwrap();
    let fock = FockConfig::uniform(1, 5).unwrap();

    let problem = LindbladProblem::new(&net, &fock).unwrap();
    let ss = steady_state_with(&problem, &SteadyStateOptions::default(), None).unwrap();
    let reg = regression_g2(&problem, &ss, 0, 0, &taus, OdeOptions::default()).unwrap();
    let cfg = TrajectoryConfig::new(fock);
    let traj = ensemble_g2(&net, &cfg, &taus).unwrap();

    let d_reg = compare(&exact, &reg).unwrap();
    let d_traj = compare(&exact, &traj.series).unwrap();
    let g0_formula = (delta * delta + gamma * gamma / 4.0) / ((delta + alpha).powi(2) + gamma * gamma / 4.0);
    let rel = |x: f64| ((x - g0_formula) / g0_formula).abs();
    let (rel_reg, rel_traj) = (rel(reg.values()[0]), rel(traj.g2_zero().unwrap().0));
    let pass = d_reg.within(0.05) && d_traj.within(0.05) && rel_reg < 1e-3 && rel_traj < 1e-3;
    r.line(
        "conventional-blockade",
        pass,
        format!(
            "sup-norm regression {:.2e}, wfmc {:.2e}; g2(0) relative error regression {rel_reg:.2e}, wfmc {rel_traj:.2e}",
            d_reg.sup_norm, d_traj.sup_norm
        ),
    );
}

fn quartic_law(r: &mut Report) {
    let taus = uniform_grid(0.0, 0.3, 301).unwrap();
    let net = llpb();
    let zeros = fss_zeros(&net).unwrap();
    let at = at_zero(&net, &zeros, 0);
    let gamma = at.loss()[0];
    let fit_l = short_time_exponent(&g2_tau_analytic(&at, &taus).unwrap(), gamma, (0.05, 0.3)).unwrap();
    let fit_preset = short_time_exponent(&g2_tau_analytic(&net, &taus).unwrap(), 1.0, (0.05, 0.3)).unwrap();

    let (upb, _) = preset_upb_two_cavity(0.001227, 1.0, UpbMode::Exact).unwrap();
    let fit_u = short_time_exponent(&g2_tau_analytic(&upb, &taus).unwrap(), 1.0, (0.05, 0.3)).unwrap();
    let conv = g2_conventional_closed(10.0, 0.02491, 1.0, &taus).unwrap();
    let fit_c = short_time_exponent(&conv, 1.0, (0.05, 0.3)).unwrap();

    let ratio = fit_l.prefactor * 64.0;
    let pass = (fit_l.exponent - 4.0).abs() <= 0.2
        && (0.5..=2.0).contains(&ratio)
        && (fit_u.exponent - 2.0).abs() <= 0.2
        && (fit_c.exponent - 2.0).abs() <= 0.2;
    r.line(
        "short-time-quartic-law",
        pass,
        format!(
            "ring exponent {:.3}, prefactor {:.3e} (x{ratio:.2} of 1/64); two-cavity exponent {:.3}; conventional exponent {:.3}",
            fit_l.exponent, fit_l.prefactor, fit_u.exponent, fit_c.exponent
        ),
    );
    r.note(format!(
        "ring fit taken at the refined zero (gamma {gamma:.6}); at the nominal preset point the exponent is {:.3}",
        fit_preset.exponent
    ));
}

fn spds_root(r: &mut Report) {
    let net = llpb();
    let crude = crude_spds_estimate(&net).unwrap();
    let root = find_spds_zero(&net, crude).unwrap();
    let dyson = dyson_spds_estimate(&net)
        .unwrap()
        .into_iter()
        .filter(|c| c.loss_compatible)
        .min_by(|a, b| (a.z - root.z_star).norm().total_cmp(&(b.z - root.z_star).norm()))
        .unwrap();
    let g = green_direct(&net, root.z_star).unwrap().get(1, 0).norm();
    let oracle = Complex64::new(0.0, DYSON_ORACLE);
    let dev_dyson = (root.z_star - oracle).norm() / oracle.norm();
    let dev_crude = (Complex64::new(0.0, CRUDE_ORACLE) - root.z_star).norm() / root.z_star.norm();
    let dyson_matches_oracle = (dyson.z - oracle).norm() < 5e-5;
    let pass = g < 1e-10 && dev_dyson <= 0.15 && dev_crude <= 0.10 && dyson_matches_oracle;
    r.line(
        "spds-root",
        pass,
        format!(
            "refined {:.6}{:+.6}i, |G_21| {g:.1e}; dyson {:.4}i ({:.1}% off refined); crude {:.4}i ({:.1}% off)",
            root.z_star.re,
            root.z_star.im,
            dyson.z.im,
            100.0 * dev_dyson,
            crude.im,
            100.0 * dev_crude
        ),
    );
}

fn delta_z(r: &mut Report) {
    let p = FourCavityParams::llpb();
    let (dz, gamma) = closed_form_delta_z(p.k, p.j, p.alpha);
    let re = dz.re.abs();
    let pass = (re - DELTA_Z_TARGET).abs() <= 1e-6 && within_rel(re, LLPB_DELTA, 3e-3);
    r.line(
        "delta-z-consistency",
        pass,
        format!(
            "|Re dz| {re:.7} (self-consistent gamma {gamma:.6}), target {DELTA_Z_TARGET} +- 1e-6; {:.3}% from {LLPB_DELTA}",
            100.0 * (re - LLPB_DELTA).abs() / LLPB_DELTA
        ),
    );
}

fn property_suite(r: &mut Report) {
    let taus = uniform_grid(0.0, 20.0, 41).unwrap();
    let linear_presets: Vec<CavityNetwork> = vec![
        preset_conventional(10.0, 0.02491, 1.0, 1e-5).unwrap().with_kerr(0.0),
        preset_upb_two_cavity(0.001227, 1.0, UpbMode::Exact).unwrap().0.with_kerr(0.0),
        llpb().with_kerr(0.0),
        preset_llpb_four_cavity(FourCavityParams::occupation_sweep()).unwrap().with_kerr(0.0),
        preset_two_ring_photonic(&PhotonicRingParams::sic_reference(), 1e-5)
            .unwrap()
            .with_kerr(0.0)
            .with_cross_kerr(Vec::new())
            .unwrap(),
    ];
    let coherent = linear_presets
        .iter()
        .flat_map(|n| g2_tau_analytic(n, &taus).unwrap().values().to_vec())
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);

    let net = llpb();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let resolvent = (0..50)
        .map(|_| {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-2.0..-0.05));
            green_direct(&net, z).unwrap().resolvent_residual(net.couplings(), &site_offsets(&net))
        })
        .fold(0.0, f64::max);

    let small = preset_conventional(0.5, 0.1, 1.0, 0.3).unwrap();
    let problem = LindbladProblem::new(&small, &FockConfig::uniform(1, 6).unwrap()).unwrap();
    let rho = evolve(&problem, &DensityMatrix::vacuum(problem.dimension()), 30.0, OdeOptions::default()).unwrap();
    let trace_drift = (rho.trace() - 1.0).norm();
    let herm = rho.hermiticity_deviation();

    let ring = preset_llpb_four_cavity(FourCavityParams::llpb()).unwrap();
    let rp = LindbladProblem::new(&ring, &FockConfig::new(vec![3, 3, 3, 2]).unwrap()).unwrap();
    let ss = steady_state_with(&rp, &SteadyStateOptions::default(), None).unwrap();
    let reg = regression_g2(&rp, &ss, 1, 1, &[0.0, 1.0], OdeOptions::default()).unwrap();
    let st = static_g2(&rp, &ss, 1, 1).unwrap();
    let reg_gap = (reg.values()[0] - st).abs() / st.max(f64::MIN_POSITIVE);

    let tail_taus = [0.0, 40.0, 60.0];
    let tail = g2_tau_analytic(&ring, &tail_taus).unwrap().values()[1..]
        .iter()
        .map(|v| (v - 1.0).abs())
        .fold(0.0, f64::max);

    let pass = coherent < 1e-12 && resolvent < 1e-10 && trace_drift < 1e-9 && herm < 1e-12 && reg_gap < 1e-9 && tail < 1e-6;
    r.line(
        "property-suite",
        pass,
        format!(
            "linear presets max|g2-1| {coherent:.1e}; resolvent residual {resolvent:.1e}; trace drift {trace_drift:.1e}, \
             hermiticity {herm:.1e}; regression tau=0 relative gap {reg_gap:.1e}; tail max|g2-1| {tail:.1e}"
        ),
    );
}

fn unraveling(r: &mut Report, shifted: &EnsembleResult) {
    let plain = llpb_wfmc(0.0, &[0.0]);
    let (a, sa) = shifted.g2_zero().unwrap();
    let (b, sb) = plain.g2_zero().unwrap();
    let combined = (sa * sa + sb * sb).sqrt();
    let jumps: usize = plain.trajectories.iter().map(|t| t.jump_times.len()).sum();
    r.line(
        "unraveling-invariance",
        (a - b).abs() <= 3.0 * combined,
        format!(
            "beta 0.1: {a:.4e} +- {sa:.1e}; beta 0: {b:.4e} +- {sb:.1e} ({jumps} jumps); |diff| {:.2} combined SE",
            (a - b).abs() / combined
        ),
    );
}

fn occupation(r: &mut Report) {
    let drives = [0.001, 0.00316, 0.01, 0.0316, 0.1];
    let cfg = TrajectoryConfig::new(FockConfig::new(vec![5, 4, 4, 4]).unwrap());
    let run = |p: FourCavityParams| {
        let net = preset_llpb_four_cavity(p).unwrap();
        occupation_sweep(&net, &drives, &cfg).unwrap()
    };
    let fmt = |pts: &[blockade_core::wfmc::OccupationPoint]| {
        pts.iter()
            .map(|p| format!("{:.6e}", p.g2_zero))
            .collect::<Vec<_>>()
            .join(", ")
    };
    let monotone = |pts: &[blockade_core::wfmc::OccupationPoint]| pts.windows(2).all(|w| w[1].g2_zero >= w[0].g2_zero);

    let pts = run(FourCavityParams::occupation_sweep());
    r.line(
        "occupation-monotonicity",
        monotone(&pts),
        format!("F_d {drives:?} -> g2(0) [{}]", fmt(&pts)),
    );
    let alt = run(FourCavityParams {
        gamma: 2.0,
        ..FourCavityParams::occupation_sweep()
    });
    r.note(format!(
        "same preset at gamma 2 (Im z = -1, where its f_ss zero sits at the preset detuning): g2(0) [{}], nondecreasing: {}",
        fmt(&alt),
        monotone(&alt)
    ));
}

fn main() {
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut r = Report { passed: 0, failed: 0 };
    let t = Instant::now();

    let taus = uniform_grid(0.0, 12.0, 121).unwrap();
    let analytic = g2_tau_analytic(&llpb(), &taus).unwrap();
    let shifted = llpb_wfmc(0.1, &taus);

    llpb_point(&mut r, &shifted);
    let w = antibunching_window(&mut r, &analytic, &shifted);
    window_ratio(&mut r, w);
    conventional(&mut r);
    quartic_law(&mut r);
    spds_root(&mut r);
    delta_z(&mut r);
    property_suite(&mut r);
    unraveling(&mut r, &shifted);
    occupation(&mut r);

    println!(
        "acceptance: {} passed, {} failed ({:.0} s)",
        r.passed,
        r.failed,
        t.elapsed().as_secs_f64()
    );
    if r.failed > 0 && std::env::var("ACCEPTANCE_STRICT").is_ok_and(|v| v == "1") {
        std::process::exit(1);
    }
}
