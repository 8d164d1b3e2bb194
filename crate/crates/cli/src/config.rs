//! Experiment configuration files.

use std::path::Path;

use paoi_core::simulator::{DEFAULT_BATCHES, DEFAULT_PACKETS, DEFAULT_SEED};
use paoi_core::{Discipline, DistributionSpec, Threshold};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub system: Option<Discipline>,
    pub transmission: Option<DistributionSpec>,
    pub computation: Option<DistributionSpec>,
    pub policy: Option<PolicyConfig>,
    #[serde(default)]
    pub sim: SimSettings,
    pub sweep: Option<SweepSettings>,
    pub validate: Option<ValidateSettings>,
}

/// Policy as written in a config. A missing `theta` or `beta` asks the
/// optimizer for the best value in that class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolicyConfig {
    FixedThreshold {
        #[serde(default)]
        theta: Option<Threshold>,
    },
    RandomizedThreshold {
        theta_dist: DistributionSpec,
    },
    TransmissionAware {
        #[serde(default)]
        beta: Option<Threshold>,
    },
    MeanThreshold,
    Optimal,
}

impl PolicyConfig {
    pub fn name(&self) -> &'static str {
        match self {
            Self::FixedThreshold { .. } => "fixed_threshold",
            Self::RandomizedThreshold { .. } => "randomized_threshold",
            Self::TransmissionAware { .. } => "transmission_aware",
            Self::MeanThreshold => "mean_threshold",
            Self::Optimal => "optimal",
        }
    }

    pub fn needs_optimizer(&self) -> bool {
        matches!(
            self,
            Self::FixedThreshold { theta: None } | Self::TransmissionAware { beta: None } | Self::Optimal
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSettings {
    pub packets: usize,
    pub seed: u64,
    pub batches: usize,
}

impl Default for SimSettings {
    fn default() -> Self {
        Self {
            packets: DEFAULT_PACKETS,
            seed: DEFAULT_SEED,
            batches: DEFAULT_BATCHES,
        }
    }
}

fn default_total_mean() -> f64 {
    1.0
}

fn default_systems() -> Vec<Discipline> {
    vec![Discipline::NonPreemptive, Discipline::Preemptive]
}

fn default_sweep_policies() -> Vec<PolicyConfig> {
    vec![
        PolicyConfig::FixedThreshold { theta: None },
        PolicyConfig::TransmissionAware { beta: None },
        PolicyConfig::MeanThreshold,
    ]
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSettings {
    pub ratio_grid: Vec<f64>,
    #[serde(default = "default_total_mean")]
    pub total_mean: f64,
    #[serde(default = "default_systems")]
    pub systems: Vec<Discipline>,
    #[serde(default = "default_sweep_policies")]
    pub policies: Vec<PolicyConfig>,
    /// Also write a gnuplot script next to the output file.
    #[serde(default)]
    pub gnuplot: bool,
}

fn default_se_multiplier() -> f64 {
    3.0
}

fn default_analytic_tol() -> f64 {
    1e-8
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateSettings {
    /// Cases to check; the built-in matrix when absent.
    pub matrix: Option<Vec<ValidateCase>>,
    #[serde(default = "default_se_multiplier")]
    pub se_multiplier: f64,
    #[serde(default = "default_analytic_tol")]
    pub analytic_tol: f64,
}

impl Default for ValidateSettings {
    fn default() -> Self {
        Self {
            matrix: None,
            se_multiplier: default_se_multiplier(),
            analytic_tol: default_analytic_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidateCase {
    pub name: String,
    pub system: Discipline,
    pub transmission: DistributionSpec,
    pub computation: DistributionSpec,
    pub policy: PolicyConfig,
    /// Known value of the analytic PAoI, when there is one.
    #[serde(default)]
    pub expected: Option<f64>,
}

/// The system a single-run command works on.
#[derive(Debug, Clone, Copy)]
pub struct Experiment {
    pub system: Discipline,
    pub transmission: DistributionSpec,
    pub computation: DistributionSpec,
    pub policy: PolicyConfig,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::schema(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::schema(format!("config: {e}")))?;
        cfg.check()?;
        Ok(cfg)
    }

    fn check(&self) -> Result<(), CliError> {
        let s = &self.sim;
        if s.batches < 2 || s.packets < s.batches {
            return Err(CliError::schema(format!(
                "sim: need packets >= batches >= 2, got {} packets and {} batches",
                s.packets, s.batches
            )));
        }
        if let Some(sw) = &self.sweep {
            if sw.ratio_grid.is_empty() {
                return Err(CliError::schema("sweep.ratio_grid is empty"));
            }
            if let Some(r) = sw.ratio_grid.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
                return Err(CliError::schema(format!(
                    "sweep.ratio_grid entries must be > 0, got {r}"
                )));
            }
            if !(sw.total_mean.is_finite() && sw.total_mean > 0.0) {
                return Err(CliError::schema(format!(
                    "sweep.total_mean must be > 0, got {}",
                    sw.total_mean
                )));
            }
            if sw.systems.is_empty() || sw.policies.is_empty() {
                return Err(CliError::schema("sweep.systems and sweep.policies must be nonempty"));
            }
        }
        if let Some(v) = &self.validate {
            if !(v.se_multiplier >= 0.0) || !(v.analytic_tol >= 0.0) {
                return Err(CliError::schema("validate tolerances must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn with_overrides(mut self, packets: Option<usize>, seed: Option<u64>) -> Result<Self, CliError> {
        if let Some(n) = packets {
            self.sim.packets = n;
        }
        if let Some(s) = seed {
            self.sim.seed = s;
        }
        self.check()?;
        Ok(self)
    }

    /// The single experiment named by the top-level fields.
    pub fn experiment(&self) -> Result<Experiment, CliError> {
        let missing = |f: &str| CliError::schema(format!("config: missing field `{f}`"));
        Ok(Experiment {
            system: self.system.ok_or_else(|| missing("system"))?,
            transmission: self.transmission.ok_or_else(|| missing("transmission"))?,
            computation: self.computation.ok_or_else(|| missing("computation"))?,
            policy: self.policy.ok_or_else(|| missing("policy"))?,
        })
    }

    pub fn sweep(&self) -> Result<&SweepSettings, CliError> {
        self.sweep
            .as_ref()
            .ok_or_else(|| CliError::schema("config: the sweep command needs a `sweep` block"))
    }
}

/// `(E[T], E[C])` for ratio `r` at total mean `total`.
pub fn split_mean(total: f64, r: f64) -> (f64, f64) {
    (total * r / (1.0 + r), total / (1.0 + r))
}
