//! Subcommand implementations. Each returns the finished manifest.

use std::path::PathBuf;

use blockade_core::compare::compare_all;
use blockade_core::hilbert::FockConfig;
use blockade_core::lindblad::{
    occupations, regression_g2, static_g2, steady_state_with, LindbladProblem, SteadyStateOptions,
};
use blockade_core::linear::{crude_spds_estimate, dyson_spds_estimate, find_spds_zero, fss_zeros};
use blockade_core::models::CavityNetwork;
use blockade_core::ode::OdeOptions;
use blockade_core::parallel::{map_indexed, Execution};
use blockade_core::perturbative::{g2_conventional_closed, g2_tau_analytic, g2_zero_analytic, steady_state_weak_drive};
use blockade_core::series::{CorrelationSeries, Engine};
use blockade_core::sweep::{analytic_sweep, refine_minimum, SweepGrid};
use blockade_core::wfmc::{ensemble_g2, occupation_sweep, OccupationPoint, TrajectoryConfig};
use num_complex::Complex64;
use serde_json::{json, Value};

use crate::config::{EngineKind, Preset, RunConfig};
use crate::error::CliError;
use crate::output::{
    describe_network, manifest_path, num, read_series, series_rows, Manifest, OutputDir, OCCUPATION_HEADER,
    SWEEP_HEADER, TAU_HEADER,
};

const CLOSED_FORM_ASSUMPTION: &str =
    "analytic curve for the single Kerr cavity uses the closed form exact in alpha, not the first-order engine";
const SAMPLE_ASSUMPTION: &str = "trajectory sample interval defaults to 1/gamma_min when not configured";

pub struct Context {
    pub config: RunConfig,
    pub engine: Option<EngineKind>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: OutputDir,
}

impl Context {
    fn engine_or(&self, default: EngineKind) -> EngineKind {
        self.engine.or(self.config.engine.kind).unwrap_or(default)
    }

    fn manifest(&self, command: &str, engine: Option<EngineKind>, network: Option<&CavityNetwork>) -> Manifest {
        let mut m = Manifest::new(command, engine.map(Engine::from));
        m.set("config", serde_json::to_value(&self.config).expect("config serializes"));
        m.set("seed", json!(self.seed.or(self.config.trajectory.seed)));
        if let Some(net) = network {
            m.set("network", describe_network(net));
            for a in net.assumptions() {
                m.assume(a.clone());
            }
        }
        m
    }

    fn finish(&self, m: Manifest, base: &str) -> Result<Value, CliError> {
        let (_, value) = m.finish(self.threads);
        self.out.write_json(&format!("{base}.manifest.json"), &value)?;
        Ok(value)
    }
}

fn engine_err(context: &str) -> impl Fn(blockade_core::Error) -> CliError + '_ {
    move |e| CliError::engine(context, e)
}

fn trajectory_meta(m: &mut Manifest, cfg: &TrajectoryConfig) {
    m.set(
        "trajectory",
        json!({
            "beta": cfg.beta,
            "n_traj": cfg.n_traj,
            "t_relax": cfg.t_relax,
            "t_record": cfg.t_record,
            "sample_interval": cfg.sample_interval,
            "seed": cfg.seed,
            "fock": cfg.fock.cutoffs(),
        }),
    );
    if cfg.sample_interval.is_none() {
        m.assume(SAMPLE_ASSUMPTION);
    }
}

fn steady(problem: &LindbladProblem) -> Result<blockade_core::lindblad::SteadyState, CliError> {
    steady_state_with(problem, &SteadyStateOptions::default(), None).map_err(engine_err("steady state"))
}

fn problem(net: &CavityNetwork, fock: &FockConfig) -> Result<LindbladProblem, CliError> {
    LindbladProblem::new(net, fock).map_err(engine_err("master equation"))
}

pub fn model(ctx: &Context) -> Result<Value, CliError> {
    let net = ctx.config.network()?;
    let mut m = ctx.manifest("model", None, Some(&net));
    let mut report = json!({ "network": describe_network(&net) });
    match g2_zero_analytic(&net) {
        Ok(g) => report["g2_zero_first_order"] = json!(g),
        Err(e) => report["g2_zero_first_order_error"] = json!(e.to_string()),
    }
    report["weak_drive_occupations"] = steady_state_weak_drive(&net)
        .map(|w| json!(w.occupations))
        .unwrap_or(Value::Null);
    let base = format!("{}_model", ctx.config.stem());
    m.set("outputs", json!([format!("{base}.json")]));
    report["manifest_sha256"] = json!(m.hash());
    ctx.out.write_json(&format!("{base}.json"), &report)?;
    ctx.finish(m, &base)
}

pub fn spds(ctx: &Context) -> Result<Value, CliError> {
    let net = ctx.config.network()?;
    let mut m = ctx.manifest("spds", None, Some(&net));
    let dyson = dyson_spds_estimate(&net).map_err(engine_err("dyson estimate"))?;
    let crude = crude_spds_estimate(&net);
    let seed = crude
        .or_else(|| dyson.iter().find(|c| c.loss_compatible).map(|c| c.z))
        .ok_or_else(|| CliError::Config("network has no loss-compatible dark-state estimate".into()))?;
    let root = find_spds_zero(&net, seed).map_err(engine_err("dark-state root"))?;
    let zeros = if net.kerr() != 0.0 || !net.cross_kerr().is_empty() {
        Some(fss_zeros(&net).map_err(engine_err("f_ss zeros"))?)
    } else {
        None
    };
    let (delta, gamma) = root.operating_point();
    let base = format!("{}_spds", ctx.config.stem());
    m.set("outputs", json!([format!("{base}.json")]));
    let report = json!({
        "complex_format": "[re, im]",
        "network": net.name(),
        "dyson": dyson,
        "crude": crude,
        "refined": root,
        "operating_point": { "delta": delta, "gamma": gamma },
        "zeros": zeros,
        "manifest_sha256": m.hash(),
    });
    ctx.out.write_json(&format!("{base}.json"), &report)?;
    ctx.finish(m, &base)
}

pub fn g2tau(ctx: &Context) -> Result<Value, CliError> {
    let net = ctx.config.network()?;
    let taus = ctx.config.taus()?;
    let kind = ctx.engine_or(EngineKind::Analytic);
    let mut m = ctx.manifest("g2tau", Some(kind), Some(&net));
    let series: CorrelationSeries = match kind {
        EngineKind::Analytic if ctx.config.model.preset == Preset::Conventional => {
            m.assume(CLOSED_FORM_ASSUMPTION);
            g2_conventional_closed(net.kerr(), net.detuning()[0], net.loss()[0], &taus)
                .map_err(engine_err("closed form"))?
        }
        EngineKind::Analytic => g2_tau_analytic(&net, &taus).map_err(engine_err("analytic g2"))?,
        EngineKind::Regression => {
            let fock = ctx.config.fock(&net)?;
            m.set("fock", json!(fock.cutoffs()));
            let p = problem(&net, &fock)?;
            let ss = steady(&p)?;
            let s = net.signal_site();
            regression_g2(&p, &ss, s, s, &taus, OdeOptions::default()).map_err(engine_err("regression"))?
        }
        EngineKind::Wfmc => {
            let cfg = ctx.config.trajectory(&net, ctx.seed)?;
            trajectory_meta(&mut m, &cfg);
            ensemble_g2(&net, &cfg, &taus).map_err(engine_err("trajectories"))?.series
        }
    };
    m.set("series_metadata", json!(series.metadata()));
    let base = format!("{}_g2tau_{}", ctx.config.stem(), Engine::from(kind));
    m.set("outputs", json!([format!("{base}.csv")]));
    ctx.out.write_csv(&format!("{base}.csv"), &m.hash(), &TAU_HEADER, &series_rows(&series))?;
    ctx.finish(m, &base)
}

pub fn sweep(ctx: &Context) -> Result<Value, CliError> {
    let net = ctx.config.network()?;
    let (deltas, gammas) = ctx.config.sweep_axes()?;
    let kind = ctx.engine_or(EngineKind::Analytic);
    let mut m = ctx.manifest("sweep", Some(kind), Some(&net));
    let grid = match kind {
        EngineKind::Analytic => analytic_sweep(&net, &deltas, &gammas, Execution::Parallel).map_err(engine_err("sweep"))?,
        EngineKind::Regression => {
            let fock = ctx.config.fock(&net)?;
            m.set("fock", json!(fock.cutoffs()));
            let nd = deltas.len();
            let s = net.signal_site();
            let cells = map_indexed(nd * gammas.len(), Execution::Parallel, |k| {
                let cell = net.retuned(deltas[k % nd], gammas[k / nd]);
                let p = LindbladProblem::new(&cell, &fock)?;
                let ss = steady_state_with(&p, &SteadyStateOptions::default(), None)?;
                static_g2(&p, &ss, s, s)
            });
            let cells = cells.into_iter().collect::<Result<Vec<f64>, _>>().map_err(engine_err("sweep cell"))?;
            let g2 = cells.chunks(nd).map(|c| c.to_vec()).collect();
            SweepGrid::new(deltas.clone(), gammas.clone(), g2, Engine::Regression).map_err(engine_err("sweep"))?
        }
        EngineKind::Wfmc => {
            return Err(CliError::Config(
                "engine: sweeps support `analytic` and `regression`; use `g2tau` for trajectories".into(),
            ))
        }
    };
    let min = grid.argmin();
    let (dd, dg) = grid.cell_size();
    let refined = match kind {
        EngineKind::Analytic => match refine_minimum(&net, &grid) {
            Ok(r) => json!(r),
            Err(e) => {
                log::warn!("refinement from the grid minimum failed: {e}");
                Value::Null
            }
        },
        _ => Value::Null,
    };
    let base = format!("{}_sweep_{}", ctx.config.stem(), grid.engine);
    m.set("outputs", json!([format!("{base}.csv"), format!("{base}.json")]));
    let hash = m.hash();
    let rows: Vec<Vec<String>> = grid.rows().map(|(g, d, v)| vec![num(g), num(d), num(v)]).collect();
    ctx.out.write_csv(&format!("{base}.csv"), &hash, &SWEEP_HEADER, &rows)?;
    let summary = json!({
        "grid_minimum": min,
        "cell_size": { "delta": dd, "gamma": dg },
        "refined_minimum": refined,
        "manifest_sha256": hash,
    });
    ctx.out.write_json(&format!("{base}.json"), &summary)?;
    ctx.finish(m, &base)
}

pub fn occupation(ctx: &Context) -> Result<Value, CliError> {
    let net = ctx.config.network()?;
    let drives = ctx.config.occupation.drives.clone();
    if drives.is_empty() || drives.iter().any(|f| !(*f > 0.0 && f.is_finite())) {
        return Err(CliError::Config("occupation.drives must be a nonempty list of positive amplitudes".into()));
    }
    let kind = ctx.engine_or(EngineKind::Wfmc);
    let mut m = ctx.manifest("occupation", Some(kind), Some(&net));
    let s = net.signal_site();
    let points: Vec<OccupationPoint> = match kind {
        EngineKind::Wfmc => {
            let cfg = ctx.config.trajectory(&net, ctx.seed)?;
            trajectory_meta(&mut m, &cfg);
            occupation_sweep(&net, &drives, &cfg).map_err(engine_err("occupation sweep"))?
        }
        EngineKind::Regression => {
            let fock = ctx.config.fock(&net)?;
            m.set("fock", json!(fock.cutoffs()));
            drives
                .iter()
                .map(|&f| {
                    let p = problem(&net.clone().with_drive_amplitude(Complex64::new(f, 0.0)), &fock)?;
                    let ss = steady(&p)?;
                    Ok(OccupationPoint {
                        drive: f,
                        n_signal: occupations(&p, &ss)[s],
                        n_signal_stderr: 0.0,
                        g2_zero: static_g2(&p, &ss, s, s).map_err(engine_err("g2(0)"))?,
                        stderr: f64::NAN,
                    })
                })
                .collect::<Result<_, CliError>>()?
        }
        EngineKind::Analytic => drives
            .iter()
            .map(|&f| {
                let n = net.clone().with_drive_amplitude(Complex64::new(f, 0.0));
                Ok(OccupationPoint {
                    drive: f,
                    n_signal: steady_state_weak_drive(&n).map_err(engine_err("weak drive"))?.occupations[s],
                    n_signal_stderr: 0.0,
                    g2_zero: g2_zero_analytic(&n).map_err(engine_err("analytic g2"))?,
                    stderr: f64::NAN,
                })
            })
            .collect::<Result<_, CliError>>()?,
    };
    let base = format!("{}_occupation_{}", ctx.config.stem(), Engine::from(kind));
    m.set("outputs", json!([format!("{base}.csv")]));
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| {
            let se = if p.stderr.is_nan() { String::new() } else { num(p.stderr) };
            vec![num(p.drive), num(p.n_signal), num(p.g2_zero), se]
        })
        .collect();
    ctx.out.write_csv(&format!("{base}.csv"), &m.hash(), &OCCUPATION_HEADER, &rows)?;
    ctx.finish(m, &base)
}

pub fn compare(ctx: &Context, inputs: &[PathBuf], tolerance: Option<f64>) -> Result<Value, CliError> {
    let inputs: Vec<PathBuf> = if inputs.is_empty() {
        ctx.config.compare.inputs.clone()
    } else {
        inputs.to_vec()
    };
    if inputs.len() < 2 {
        return Err(CliError::Config("compare.inputs: at least two series are needed".into()));
    }
    let tolerance = tolerance.unwrap_or(ctx.config.compare.tolerance);
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(CliError::Config("compare.tolerance must be positive".into()));
    }
    let series = inputs.iter().map(|p| read_series(p)).collect::<Result<Vec<_>, _>>()?;
    let reports = compare_all(&series).map_err(engine_err("compare"))?;
    let pass = reports.iter().all(|d| d.within(tolerance));

    let mut m = ctx.manifest("compare", None, None);
    m.set("inputs", json!(inputs.iter().map(|p| p.display().to_string()).collect::<Vec<_>>()));
    m.set("input_manifests", json!(inputs.iter().map(|p| manifest_hash(p)).collect::<Vec<_>>()));
    m.set("tolerance", json!(tolerance));
    let base = ctx.config.output.stem.as_ref().map_or("compare".to_string(), |s| format!("{s}_compare"));
    m.set("outputs", json!([format!("{base}.json")]));
    let entries: Vec<Value> = reports
        .iter()
        .zip(&inputs[1..])
        .map(|(d, p)| {
            json!({
                "file": p.display().to_string(),
                "reference": d.reference,
                "candidate": d.candidate,
                "sup_norm": d.sup_norm,
                "rms": d.rms,
                "max_abs_z": d.max_abs_z,
                "pass": d.within(tolerance),
                "points": d.points,
            })
        })
        .collect();
    let report = json!({
        "reference_file": inputs[0].display().to_string(),
        "tolerance": tolerance,
        "pass": pass,
        "comparisons": entries,
        "manifest_sha256": m.hash(),
    });
    ctx.out.write_json(&format!("{base}.json"), &report)?;
    for (d, p) in reports.iter().zip(&inputs[1..]) {
        eprintln!(
            "{}: sup {:.3e}, rms {:.3e}, max |z| {} -> {}",
            p.display(),
            d.sup_norm,
            d.rms,
            d.max_abs_z.map(|z| format!("{z:.2}")).unwrap_or_else(|| "-".into()),
            if d.within(tolerance) { "ok" } else { "exceeds tolerance" }
        );
    }
    let manifest = ctx.finish(m, &base)?;
    if !pass {
        return Err(CliError::Tolerance(format!("sup-norm exceeds {tolerance}; see {base}.json")));
    }
    Ok(manifest)
}

fn manifest_hash(csv: &std::path::Path) -> Option<String> {
    let text = std::fs::read_to_string(manifest_path(csv)).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    v.get("manifest_sha256")?.as_str().map(str::to_string)
}
