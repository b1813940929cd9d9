//! `dynsys` and `efficiency`.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use symreg_core::constopt::OptConfig;
use symreg_core::dynsys::{
    default_starts, estimate_derivatives, fit_true_structure, fit_vector_field, lookup_system,
    ode_registry, r2_per_dimension, rollout_r2, simulate, simulate_steps, OdeSystem, SystemResult,
};
use symreg_core::engine::{simulate_efficiency, EfficiencyReport, EfficiencyTrial, EngineConfig};
use symreg_core::expr::to_infix;
use symreg_core::guidance::GuideSet;

use crate::config::{to_pretty, Guidance, Mode};
use crate::error::CliError;
use crate::output::write_file;
use crate::search::guides_for;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum FieldSource {
    /// Search every component with the evolutionary engine.
    Search,
    /// Keep the true equations and refit their constants.
    TrueStructure,
}

/// Configuration of `dynsys`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DynsysConfig {
    /// Systems to run; empty means the whole registry.
    pub systems: Vec<String>,
    pub source: FieldSource,
    /// State noise level before differentiation.
    pub noise: f64,
    pub window: usize,
    /// Rollout length in observations.
    pub horizon: usize,
    pub starts: usize,
    /// Recorded integration steps; the registry default when absent.
    pub steps: Option<usize>,
    pub mode: Mode,
    pub guidance: Guidance,
    pub engine: EngineConfig,
    pub opt: OptConfig,
    pub out: PathBuf,
}

impl Default for DynsysConfig {
    fn default() -> Self {
        DynsysConfig {
            systems: Vec::new(),
            source: FieldSource::Search,
            noise: 0.02,
            window: 7,
            horizon: 50,
            starts: 20,
            steps: None,
            mode: Mode::NoGuide,
            guidance: Guidance::default(),
            engine: EngineConfig::default(),
            opt: OptConfig::default(),
            out: PathBuf::from("out"),
        }
    }
}

/// Everything written for one system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemReport {
    #[serde(flatten)]
    pub result: SystemResult,
    pub equations: Vec<String>,
}

fn selected(cfg: &DynsysConfig) -> Result<Vec<OdeSystem>, CliError> {
    if cfg.systems.is_empty() {
        return Ok(ode_registry());
    }
    cfg.systems.iter().map(|s| Ok(lookup_system(s)?)).collect()
}

pub fn cmd_dynsys(cfg: &DynsysConfig) -> Result<(), CliError> {
    cfg.engine.validate()?;
    let systems = selected(cfg)?;
    let guides: Option<GuideSet> = match cfg.source {
        FieldSource::Search => Some(guides_for(cfg.mode, &cfg.guidance, cfg.engine.max_nodes)?),
        FieldSource::TrueStructure => None,
    };
    let opt = OptConfig {
        seed: cfg.engine.seed,
        ..cfg.opt.clone()
    };
    let mut reports = Vec::new();
    for sys in &systems {
        let traj = match cfg.steps {
            Some(n) => simulate_steps(sys, n)?,
            None => simulate(sys)?,
        };
        if traj.diverged {
            return Err(CliError::Internal(format!(
                "{} left the finite range during simulation",
                sys.name
            )));
        }
        let td = estimate_derivatives(&traj, cfg.window, cfg.noise, cfg.engine.seed)?;
        let field = match &guides {
            Some(g) => fit_vector_field(&td, &sys.name, &cfg.engine, g)?,
            None => fit_true_structure(&td, sys, &opt)?,
        };
        let (per_dim_r2, r2_mean) = r2_per_dimension(&td, &field)?;
        let starts = default_starts(traj.len(), cfg.horizon, cfg.starts);
        let r2_roll_50 = rollout_r2(&traj, &field, cfg.horizon, &starts)?;
        let mut csv = Vec::new();
        td.write_csv(&mut csv)?;
        write_file(&cfg.out.join(format!("{}_trajectory.csv", sys.name)), csv)?;
        reports.push(SystemReport {
            result: SystemResult {
                name: sys.name.clone(),
                per_dim_r2,
                r2_mean,
                r2_roll_50,
            },
            equations: field.iter().map(to_infix).collect(),
        });
    }
    write_file(&cfg.out.join("dynsys_config.json"), to_pretty(cfg))?;
    write_file(&cfg.out.join("results.json"), to_pretty(&reports))
}

/// Configuration of `efficiency`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EfficiencyConfig {
    pub trial: EfficiencyTrial,
    /// Sweep p ∈ {0.05, 0.1, 0.25, 0.5}, λ ∈ {1, 4, 16}, k ∈ {1, 3, 10}
    /// instead of the single trial.
    pub grid: bool,
    pub out: PathBuf,
}

impl Default for EfficiencyConfig {
    fn default() -> Self {
        EfficiencyConfig {
            trial: EfficiencyTrial::default(),
            grid: false,
            out: PathBuf::from("out"),
        }
    }
}

pub const GRID_P: [f64; 4] = [0.05, 0.1, 0.25, 0.5];
pub const GRID_LAMBDA: [u32; 3] = [1, 4, 16];
pub const GRID_K: [u32; 3] = [1, 3, 10];

/// Grid trials: `α` runs over the grid and `β` is the next grid value
/// (0.75 after 0.5), so every grid probability is checked as `α` and the
/// guided process is always the better one.
pub fn grid_trials(base: &EfficiencyTrial) -> Vec<EfficiencyTrial> {
    let mut out = Vec::new();
    for (i, &p) in GRID_P.iter().enumerate() {
        let beta = GRID_P.get(i + 1).copied().unwrap_or(0.75);
        for &lambda in &GRID_LAMBDA {
            for &k in &GRID_K {
                out.push(EfficiencyTrial {
                    alpha: p,
                    beta,
                    lambda,
                    k,
                    ..base.clone()
                });
            }
        }
    }
    out
}

pub fn cmd_efficiency(cfg: &EfficiencyConfig) -> Result<(), CliError> {
    let trials = if cfg.grid {
        grid_trials(&cfg.trial)
    } else {
        vec![cfg.trial.clone()]
    };
    let reports: Vec<EfficiencyReport> = trials
        .iter()
        .map(simulate_efficiency)
        .collect::<Result<_, _>>()?;
    write_file(&cfg.out.join("efficiency.json"), to_pretty(&reports))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_every_point() {
        let g = grid_trials(&EfficiencyTrial::default());
        assert_eq!(g.len(), 36);
        for p in GRID_P {
            assert_eq!(g.iter().filter(|t| t.alpha == p).count(), 9);
        }
        assert!(g.iter().all(|t| t.beta > t.alpha));
    }

    #[test]
    fn unknown_system_is_a_usage_error() {
        let cfg = DynsysConfig {
            systems: vec!["Nope".into()],
            ..DynsysConfig::default()
        };
        assert!(matches!(selected(&cfg), Err(CliError::Usage(_))));
    }
}
