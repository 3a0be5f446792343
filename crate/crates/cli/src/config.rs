//! TOML run configuration. Every table rejects unknown keys.

use std::path::{Path, PathBuf};

use blockade_core::hilbert::FockConfig;
use blockade_core::models::{
    preset_conventional, preset_llpb_four_cavity, preset_two_ring_photonic, preset_upb_two_cavity, CavityNetwork,
    FourCavityParams, PhotonicRingParams, UpbMode, DEFAULT_DRIVE,
};
use blockade_core::series::{uniform_grid, Engine};
use blockade_core::wfmc::TrajectoryConfig;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub engine: EngineConfig,
    #[serde(default)]
    pub tau: TauConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub occupation: OccupationConfig,
    #[serde(default)]
    pub trajectory: TrajectorySection,
    #[serde(default)]
    pub compare: CompareConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    #[default]
    Llpb,
    Occupation,
    Upb,
    Conventional,
    Photonic,
    Custom,
}

impl Preset {
    pub fn label(self) -> &'static str {
        match self {
            Preset::Llpb => "llpb",
            Preset::Occupation => "occupation",
            Preset::Upb => "upb",
            Preset::Conventional => "conventional",
            Preset::Photonic => "photonic",
            Preset::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpbChoice {
    #[default]
    Exact,
    Asymptotic,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    #[serde(default)]
    pub preset: Preset,
    pub k: Option<f64>,
    pub j: Option<f64>,
    pub j_prime: Option<f64>,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub gamma: Option<f64>,
    pub drive: Option<f64>,
    pub upb_mode: Option<UpbChoice>,
    pub couplings: Option<Vec<Vec<f64>>>,
    pub detuning: Option<Vec<f64>>,
    pub loss: Option<Vec<f64>>,
    pub drive_site: Option<usize>,
    pub signal_site: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EngineConfig {
    pub kind: Option<EngineKind>,
    /// Per-site Fock cutoffs (levels per site).
    pub fock: Option<Vec<usize>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EngineKind {
    Analytic,
    Regression,
    Wfmc,
}

impl From<EngineKind> for Engine {
    fn from(e: EngineKind) -> Engine {
        match e {
            EngineKind::Analytic => Engine::Analytic,
            EngineKind::Regression => Engine::Regression,
            EngineKind::Wfmc => Engine::Wfmc,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TauConfig {
    pub start: f64,
    pub stop: f64,
    pub steps: usize,
}

impl Default for TauConfig {
    fn default() -> Self {
        TauConfig {
            start: 0.0,
            stop: 12.0,
            steps: 121,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    pub delta_start: f64,
    pub delta_stop: f64,
    pub delta_steps: usize,
    pub gamma_start: f64,
    pub gamma_stop: f64,
    pub gamma_steps: usize,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            delta_start: -0.03,
            delta_stop: 0.03,
            delta_steps: 121,
            gamma_start: 0.9,
            gamma_stop: 1.1,
            gamma_steps: 81,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OccupationConfig {
    pub drives: Vec<f64>,
}

impl Default for OccupationConfig {
    fn default() -> Self {
        OccupationConfig {
            drives: vec![0.001, 0.00316, 0.01, 0.0316, 0.1],
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectorySection {
    pub beta: Option<f64>,
    pub n_traj: Option<usize>,
    pub t_relax: Option<f64>,
    pub t_record: Option<f64>,
    pub sample_interval: Option<f64>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CompareConfig {
    pub inputs: Vec<PathBuf>,
    pub tolerance: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            inputs: Vec::new(),
            tolerance: 0.05,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub stem: Option<String>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // Relative compare inputs resolve against the config file's directory.
        if let Some(dir) = path.parent() {
            for p in &mut cfg.compare.inputs {
                if p.is_relative() {
                    *p = dir.join(&*p);
                }
            }
        }
        Ok(cfg)
    }

    pub fn stem(&self) -> String {
        self.output
            .stem
            .clone()
            .unwrap_or_else(|| self.model.preset.label().to_string())
    }

    pub fn taus(&self) -> Result<Vec<f64>, CliError> {
        let t = &self.tau;
        if t.start < 0.0 {
            return Err(CliError::Config("tau.start: delays must be nonnegative".into()));
        }
        uniform_grid(t.start, t.stop, t.steps).map_err(|e| CliError::Config(format!("tau: {e}")))
    }

    pub fn sweep_axes(&self) -> Result<(Vec<f64>, Vec<f64>), CliError> {
        let s = &self.sweep;
        let d = uniform_grid(s.delta_start, s.delta_stop, s.delta_steps)
            .map_err(|e| CliError::Config(format!("sweep.delta_*: {e}")))?;
        let g = uniform_grid(s.gamma_start, s.gamma_stop, s.gamma_steps)
            .map_err(|e| CliError::Config(format!("sweep.gamma_*: {e}")))?;
        if s.gamma_start <= 0.0 {
            return Err(CliError::Config("sweep.gamma_start: loss rates must be positive".into()));
        }
        Ok((d, g))
    }

    pub fn network(&self) -> Result<CavityNetwork, CliError> {
        let m = &self.model;
        let allowed: &[&str] = match m.preset {
            Preset::Llpb | Preset::Occupation => &["k", "j", "j_prime", "alpha", "delta", "gamma", "drive"],
            Preset::Upb => &["alpha", "gamma", "drive", "upb_mode"],
            Preset::Conventional => &["alpha", "delta", "gamma", "drive"],
            Preset::Photonic => &["drive"],
            Preset::Custom => &[
                "couplings",
                "detuning",
                "loss",
                "alpha",
                "drive",
                "drive_site",
                "signal_site",
            ],
        };
        for key in m.set_keys() {
            if !allowed.contains(&key) {
                return Err(CliError::Config(format!(
                    "model.{key} does not apply to preset `{}`",
                    m.preset.label()
                )));
            }
        }
        let drive = m.drive.unwrap_or(DEFAULT_DRIVE);
        let net = match m.preset {
            Preset::Llpb | Preset::Occupation => {
                let base = if m.preset == Preset::Llpb {
                    FourCavityParams::llpb()
                } else {
                    FourCavityParams::occupation_sweep()
                };
                let p = FourCavityParams {
                    k: m.k.unwrap_or(base.k),
                    j: m.j.unwrap_or(base.j),
                    j_prime: m.j_prime.unwrap_or(base.j_prime),
                    alpha: m.alpha.unwrap_or(base.alpha),
                    delta: m.delta.unwrap_or(base.delta),
                    gamma: m.gamma.unwrap_or(base.gamma),
                };
                preset_llpb_four_cavity(p).map_err(model_err)?
            }
            Preset::Upb => {
                let mode = match m.upb_mode.unwrap_or_default() {
                    UpbChoice::Exact => UpbMode::Exact,
                    UpbChoice::Asymptotic => UpbMode::Asymptotic,
                };
                preset_upb_two_cavity(m.alpha.unwrap_or(0.001227), m.gamma.unwrap_or(1.0), mode)
                    .map_err(model_err)?
                    .0
            }
            Preset::Conventional => {
                preset_conventional(
                    m.alpha.unwrap_or(10.0),
                    m.delta.unwrap_or(0.02491),
                    m.gamma.unwrap_or(1.0),
                    drive,
                )
                .map_err(model_err)?
            }
            Preset::Photonic => preset_two_ring_photonic(&PhotonicRingParams::sic_reference(), drive).map_err(model_err)?,
            Preset::Custom => {
                let need = |v: &Option<Vec<_>>, key: &str| {
                    v.clone()
                        .ok_or_else(|| CliError::Config(format!("model.{key} is required for preset `custom`")))
                };
                let couplings = m
                    .couplings
                    .clone()
                    .ok_or_else(|| CliError::Config("model.couplings is required for preset `custom`".into()))?;
                let net = CavityNetwork::new(couplings, need(&m.detuning, "detuning")?, need(&m.loss, "loss")?)
                    .map_err(model_err)?
                    .with_name("custom")
                    .with_kerr(m.alpha.unwrap_or(0.0))
                    .with_drive(m.drive_site.unwrap_or(0), Complex64::new(drive, 0.0))
                    .map_err(model_err)?;
                net.with_signal(m.signal_site.unwrap_or(0)).map_err(model_err)?
            }
        };
        let net = match m.drive {
            Some(f) => net.with_drive_amplitude(Complex64::new(f, 0.0)),
            None => net,
        };
        net.validate().map_err(model_err)?;
        Ok(net)
    }

    pub fn fock(&self, network: &CavityNetwork) -> Result<FockConfig, CliError> {
        let n = network.n_sites();
        let cutoffs = match &self.engine.fock {
            Some(c) if c.len() != n => {
                return Err(CliError::Config(format!(
                    "engine.fock lists {} cutoffs for a {n}-site network",
                    c.len()
                )))
            }
            Some(c) => c.clone(),
            None => match self.model.preset {
                Preset::Occupation => vec![5, 4, 4, 4],
                _ if n == 1 => vec![5],
                _ if n == 2 => vec![4, 4],
                _ => vec![3; n],
            },
        };
        FockConfig::new(cutoffs).map_err(|e| CliError::Config(format!("engine.fock: {e}")))
    }

    pub fn trajectory(&self, network: &CavityNetwork, seed: Option<u64>) -> Result<TrajectoryConfig, CliError> {
        let t = &self.trajectory;
        let base = TrajectoryConfig::new(self.fock(network)?);
        let cfg = TrajectoryConfig {
            beta: t.beta.unwrap_or(base.beta),
            n_traj: t.n_traj.unwrap_or(base.n_traj),
            t_relax: t.t_relax.unwrap_or(base.t_relax),
            t_record: t.t_record.unwrap_or(base.t_record),
            sample_interval: t.sample_interval.or(base.sample_interval),
            seed: seed.or(t.seed).unwrap_or(base.seed),
            ..base
        };
        cfg.validate().map_err(|e| CliError::Config(format!("trajectory: {e}")))?;
        Ok(cfg)
    }
}

impl ModelConfig {
    fn set_keys(&self) -> Vec<&'static str> {
        let flags = [
            ("k", self.k.is_some()),
            ("j", self.j.is_some()),
            ("j_prime", self.j_prime.is_some()),
            ("alpha", self.alpha.is_some()),
            ("delta", self.delta.is_some()),
            ("gamma", self.gamma.is_some()),
            ("drive", self.drive.is_some()),
            ("upb_mode", self.upb_mode.is_some()),
            ("couplings", self.couplings.is_some()),
            ("detuning", self.detuning.is_some()),
            ("loss", self.loss.is_some()),
            ("drive_site", self.drive_site.is_some()),
            ("signal_site", self.signal_site.is_some()),
        ];
        flags.iter().filter(|(_, set)| *set).map(|(k, _)| *k).collect()
    }
}

fn model_err(e: blockade_core::Error) -> CliError {
    CliError::Config(format!("model: {e}"))
}
