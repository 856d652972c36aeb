//! Run configuration, persisted as `run.cfg` in every output directory.

use std::path::{Path, PathBuf};

use oddsmix::data::DEFAULT_BOOKMAKERS;
use oddsmix::mcmc::{SamplerConfig, Schedule};
use oddsmix::model::PriorConfig;
use oddsmix::odds::ProbMethod;
use oddsmix::predict::PredictConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const RUN_CONFIG_FILE: &str = "run.cfg";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub iterations: usize,
    pub burnin: usize,
    pub chains: usize,
    pub thin: usize,
    pub adapt_window: usize,
    pub target_accept: f64,
    pub schedule: Schedule,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        Self {
            iterations: d.n_iterations,
            burnin: d.n_burnin,
            chains: d.n_chains,
            thin: d.thin,
            adapt_window: d.adapt_window,
            target_accept: d.target_accept,
            schedule: d.schedule,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PredictSection {
    /// Keep every `thin`-th posterior draw for forecasts and replications.
    pub thin: usize,
    pub simulations: usize,
    /// Largest absolute goal difference tabulated by `ppc`.
    pub max_goal_difference: i32,
}

impl Default for PredictSection {
    fn default() -> Self {
        let d = PredictConfig::default();
        Self { thin: d.thin, simulations: d.n_simulations, max_goal_difference: 5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BetSection {
    /// Any of `a`, `b`, `never`, `all`.
    pub strategies: Vec<String>,
}

impl Default for BetSection {
    fn default() -> Self {
        Self { strategies: vec!["a".into(), "b".into()] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub league: String,
    /// Directory holding one CSV file per season; files are taken in name order.
    pub data_dir: PathBuf,
    pub method: ProbMethod,
    /// File stem of the test season; the last season when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_season: Option<String>,
    pub out_dir: PathBuf,
    pub seed: u64,
    pub use_test_odds: bool,
    pub only_positive_ev: bool,
    pub away_intercept: bool,
    pub bookmakers: Vec<String>,
    pub sampler: SamplerSection,
    pub priors: PriorConfig,
    pub predict: PredictSection,
    pub bet: BetSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            league: "league".into(),
            data_dir: PathBuf::from("data"),
            method: ProbMethod::Shin,
            test_season: None,
            out_dir: PathBuf::from("out"),
            seed: SamplerConfig::default().seed,
            use_test_odds: true,
            only_positive_ev: false,
            away_intercept: false,
            bookmakers: DEFAULT_BOOKMAKERS.iter().map(|s| s.to_string()).collect(),
            sampler: SamplerSection::default(),
            priors: PriorConfig::default(),
            predict: PredictSection::default(),
            bet: BetSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration serializes")
    }

    /// Writes the configuration into the output directory.
    pub fn persist(&self) -> Result<(), CliError> {
        std::fs::create_dir_all(&self.out_dir).map_err(|e| CliError::io(&self.out_dir, e))?;
        let path = self.out_dir.join(RUN_CONFIG_FILE);
        std::fs::write(&path, self.to_toml()).map_err(|e| CliError::io(&path, e))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.sampler_config().validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.priors.validate().map_err(CliError::Usage)?;
        if self.predict.thin == 0 || self.predict.simulations == 0 {
            return Err(CliError::Usage("predict.thin and predict.simulations must be positive".into()));
        }
        for s in &self.bet.strategies {
            self.strategy(s)?;
        }
        Ok(())
    }

    pub fn sampler_config(&self) -> SamplerConfig {
        let s = &self.sampler;
        SamplerConfig {
            n_iterations: s.iterations,
            n_burnin: s.burnin,
            n_chains: s.chains,
            seed: self.seed,
            thin: s.thin,
            adapt_window: s.adapt_window,
            target_accept: s.target_accept,
            schedule: s.schedule,
        }
    }

    pub fn predict_config(&self) -> PredictConfig {
        PredictConfig {
            use_test_odds: self.use_test_odds,
            thin: self.predict.thin,
            n_simulations: self.predict.simulations,
            seed: self.seed.wrapping_add(1),
        }
    }

    pub fn strategy(&self, name: &str) -> Result<oddsmix::betting::Strategy, CliError> {
        use oddsmix::betting::Strategy;
        match name.to_ascii_lowercase().as_str() {
            "a" => Ok(Strategy::A { only_positive_ev: self.only_positive_ev }),
            "b" => Ok(Strategy::B),
            "never" => Ok(Strategy::Never),
            "all" => Ok(Strategy::AllOutcomes),
            other => Err(CliError::Usage(format!("unknown strategy `{other}` (expected a, b, never or all)"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_round_trips() {
        let mut cfg = RunConfig::default();
        cfg.test_season = Some("2016".into());
        let back: RunConfig = toml::from_str(&cfg.to_toml()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg: RunConfig = toml::from_str("league = \"D1\"\n[sampler]\nchains = 2\n").unwrap();
        assert_eq!(cfg.sampler.chains, 2);
        assert_eq!(cfg.sampler.iterations, 5000);
        assert!(cfg.validate().is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("lague = \"D1\"").is_err());
    }
}
