//! TOML run configuration. Every key has a default; `print-config` emits the
//! full resolved file.

use std::path::{Path, PathBuf};

use claimlot::claimsim::{DistributionSpec, Mode, SimMechanism, SimulationConfig, SweepGrid};
use claimlot::predict::{BootstrapConfig, ModelSpec, Schema, SubsetSampling, DEFAULT_REFERENCE_CAP};
use claimlot::uncertain::{Method, PoolMode, PoolWeights, StudyConfig, VarianceOptions, VoteMode};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    pub simulate: SimulateSection,
    pub allocate: AllocateSection,
    pub schema: Schema,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            seed: 0,
            simulate: SimulateSection::default(),
            allocate: AllocateSection::default(),
            schema: Schema::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    /// `family` or `family:param`.
    pub distributions: Vec<String>,
    pub selection_rates: Vec<f64>,
    /// `top_k`, `bf`, `unweighted` or `partial_bf:<k'/k>:<n'/n>`.
    pub mechanisms: Vec<String>,
    pub n: usize,
    pub m: usize,
    pub noise_sigma: f64,
    pub iterations: usize,
    pub mode: Mode,
    pub benefit: f64,
    /// Cross `kprime_rates` with `nprime_rates` and emit a frontier.
    pub sweep: bool,
    pub kprime_rates: Vec<f64>,
    pub nprime_rates: Vec<f64>,
}

impl Default for SimulateSection {
    fn default() -> Self {
        let grid = SweepGrid::default();
        Self {
            distributions: vec!["uniform".into(), "normal:0.15".into()],
            selection_rates: vec![0.25],
            mechanisms: vec!["top_k".into(), "bf".into()],
            n: 1000,
            m: 4,
            noise_sigma: 0.025,
            iterations: 1000,
            mode: Mode::Concurrent,
            benefit: 0.0,
            sweep: false,
            kprime_rates: grid.kprime_rates,
            nprime_rates: grid.nprime_rates,
        }
    }
}

impl SimulateSection {
    pub fn distributions(&self) -> Result<Vec<DistributionSpec>, CliError> {
        self.distributions
            .iter()
            .map(|d| d.parse().map_err(CliError::usage))
            .collect()
    }

    pub fn simulation_config(&self, selection_rate: f64) -> Result<SimulationConfig, CliError> {
        let mechanisms = self
            .mechanisms
            .iter()
            .map(|m| m.parse::<SimMechanism>().map_err(CliError::usage))
            .collect::<Result<Vec<_>, _>>()?;
        let cfg = SimulationConfig {
            n: self.n,
            selection_rate,
            iterations: self.iterations,
            m: self.m,
            noise_sigma: self.noise_sigma,
            mode: self.mode,
            benefit: self.benefit,
            mechanisms,
        };
        cfg.validate().map_err(CliError::usage)?;
        Ok(cfg)
    }

    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            kprime_rates: self.kprime_rates.clone(),
            nprime_rates: self.nprime_rates.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocateSection {
    /// CSV dataset; relative paths resolve against the config file.
    pub data: Option<PathBuf>,
    /// `lr`, `dt` or `rf`.
    pub models: Vec<String>,
    pub methods: Vec<Method>,
    pub selection_rates: Vec<f64>,
    pub alphas: Vec<f64>,
    pub kprime_rate: f64,
    /// Unset means `n' = k`.
    pub nprime_rate: Option<f64>,
    pub repetitions: usize,
    pub iterations: usize,
    pub train_ratio: f64,
    pub calibration_fraction: f64,
    pub bootstrap_b: usize,
    pub bootstrap_fraction: f64,
    pub bootstrap_sampling: SubsetSampling,
    pub vote_mode: VoteMode,
    pub pool_weights: PoolWeights,
    pub pool_mode: PoolMode,
    pub reference_cap: usize,
    pub retrain_ensemble: bool,
    /// Decision-makers for the SER tradeoff; below 2 skips it.
    pub ser_m: usize,
    pub ser_kprime_rates: Vec<f64>,
    pub ser_nprime_rates: Vec<f64>,
    pub tree_max_depth: usize,
    pub tree_min_leaf: usize,
    pub forest_trees: usize,
    pub lr_learning_rate: f64,
    pub lr_tol: f64,
    pub lr_max_iter: usize,
}

impl Default for AllocateSection {
    fn default() -> Self {
        let s = StudyConfig::default();
        Self {
            data: None,
            models: vec!["lr".into(), "rf".into(), "dt".into()],
            methods: s.methods,
            selection_rates: s.selection_rates,
            alphas: s.alphas,
            kprime_rate: s.kprime_rate,
            nprime_rate: s.nprime_rate,
            repetitions: s.repetitions,
            iterations: s.iterations,
            train_ratio: s.train_ratio,
            calibration_fraction: s.calibration_fraction,
            bootstrap_b: s.bootstrap.b,
            bootstrap_fraction: s.bootstrap.fraction,
            bootstrap_sampling: s.bootstrap.sampling,
            vote_mode: VoteMode::MainThreshold,
            pool_weights: PoolWeights::VoteFraction,
            pool_mode: PoolMode::Unweighted,
            reference_cap: DEFAULT_REFERENCE_CAP,
            retrain_ensemble: false,
            ser_m: 0,
            ser_kprime_rates: vec![0.25, 0.5, 0.75, 1.0],
            ser_nprime_rates: vec![0.3, 0.5, 0.75],
            tree_max_depth: 8,
            tree_min_leaf: 5,
            forest_trees: 25,
            lr_learning_rate: 0.1,
            lr_tol: 1e-6,
            lr_max_iter: 5000,
        }
    }
}

impl AllocateSection {
    fn model(&self, name: &str) -> Result<ModelSpec, CliError> {
        Ok(match ModelSpec::from_short_name(name).map_err(CliError::usage)? {
            ModelSpec::LogisticRegression { .. } => ModelSpec::LogisticRegression {
                learning_rate: self.lr_learning_rate,
                tol: self.lr_tol,
                max_iter: self.lr_max_iter,
            },
            ModelSpec::DecisionTree { .. } => ModelSpec::DecisionTree {
                max_depth: self.tree_max_depth,
                min_leaf: self.tree_min_leaf,
            },
            ModelSpec::RandomForest { max_features, .. } => ModelSpec::RandomForest {
                trees: self.forest_trees,
                max_depth: self.tree_max_depth,
                min_leaf: self.tree_min_leaf,
                max_features,
            },
        })
    }

    pub fn study_config(&self) -> Result<StudyConfig, CliError> {
        let cfg = StudyConfig {
            models: self.models.iter().map(|m| self.model(m)).collect::<Result<_, _>>()?,
            methods: self.methods.clone(),
            selection_rates: self.selection_rates.clone(),
            alphas: self.alphas.clone(),
            kprime_rate: self.kprime_rate,
            nprime_rate: self.nprime_rate,
            repetitions: self.repetitions,
            iterations: self.iterations,
            train_ratio: self.train_ratio,
            calibration_fraction: self.calibration_fraction,
            bootstrap: BootstrapConfig {
                b: self.bootstrap_b,
                fraction: self.bootstrap_fraction,
                sampling: self.bootstrap_sampling,
                ..BootstrapConfig::default()
            },
            variance: VarianceOptions {
                vote_mode: self.vote_mode,
                weights: self.pool_weights,
            },
            pool_mode: self.pool_mode,
            reference_cap: self.reference_cap,
            retrain_ensemble: self.retrain_ensemble,
        };
        cfg.validate().map_err(CliError::usage)?;
        Ok(cfg)
    }

    pub fn ser_grid(&self) -> SweepGrid {
        SweepGrid {
            kprime_rates: self.ser_kprime_rates.clone(),
            nprime_rates: self.ser_nprime_rates.clone(),
        }
    }
}

/// Reads `path`, or the defaults when no file is given. A relative
/// `allocate.data` is resolved against the file's directory.
pub fn load(path: Option<&Path>) -> Result<Config, CliError> {
    let Some(path) = path else {
        return Ok(Config::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg: Config =
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("invalid config {}: {e}", path.display())))?;
    if let (Some(data), Some(dir)) = (cfg.allocate.data.as_mut(), path.parent()) {
        if data.is_relative() {
            *data = dir.join(&*data);
        }
    }
    Ok(cfg)
}

pub fn render(cfg: &Config) -> String {
    toml::to_string(cfg).expect("config serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let text = render(&Config::default());
        let back: Config = toml::from_str(&text).unwrap();
        assert_eq!(back, Config::default());
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg: Config = toml::from_str("seed = 4\n[simulate]\nm = 2\n").unwrap();
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.simulate.m, 2);
        assert_eq!(cfg.simulate.n, 1000);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<Config>("[simulate]\nsize = 3\n").is_err());
    }

    #[test]
    fn study_config_maps_models() {
        let s = AllocateSection {
            models: vec!["rf".into()],
            forest_trees: 7,
            ..Default::default()
        };
        let cfg = s.study_config().unwrap();
        assert!(matches!(cfg.models[0], ModelSpec::RandomForest { trees: 7, .. }));
        let bad = AllocateSection {
            models: vec!["svm".into()],
            ..Default::default()
        };
        assert!(matches!(bad.study_config(), Err(CliError::Usage(_))));
    }
}
