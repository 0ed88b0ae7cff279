//! Run settings: a TOML file overlaid by command-line flags.

use std::path::PathBuf;
use std::str::FromStr;

use clap::Args;
use ratemig::events::Date;
use ratemig::{HalfLife, Method};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const OUT_DIR_ENV: &str = "RATEMIG_OUT_DIR";
pub const DEFAULT_OUT_DIR: &str = "ratemig-out";

/// A number or a string in the config file, kept as text until parsed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Number(f64),
    Text(String),
}

impl Scalar {
    fn text(&self) -> String {
        match self {
            Scalar::Number(v) => v.to_string(),
            Scalar::Text(s) => s.clone(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scale: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub events: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub half_life: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub as_of: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_start: Option<Scalar>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<f64>>,
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dates: Option<Vec<Scalar>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub generator: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gengen: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub issuers: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sim_horizon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub withdrawal_rate: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct Flags {
    /// TOML file with default settings; flags override it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Rating scale: a JSON file, or `notched` / `letter` for the built-in scales.
    #[arg(long, global = true)]
    pub scale: Option<String>,
    /// Event CSV.
    #[arg(long, global = true)]
    pub events: Option<String>,
    /// cohort, mle, weighted or smoothed.
    #[arg(long, global = true)]
    pub method: Option<String>,
    /// Half-life in years, or `inf`.
    #[arg(long, global = true)]
    pub half_life: Option<String>,
    /// Estimation date (window end): ISO date or decimal years.
    #[arg(long, global = true)]
    pub as_of: Option<String>,
    /// Window start: ISO date or decimal years.
    #[arg(long, global = true)]
    pub window_start: Option<String>,
    /// Curve horizons in years, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub horizons: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Simulation seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Roll dates, comma separated.
    #[arg(long, global = true, value_delimiter = ',')]
    pub dates: Option<Vec<String>>,
    /// Generator matrix JSON.
    #[arg(long, global = true)]
    pub generator: Option<String>,
    /// Gengen parameter JSON.
    #[arg(long, global = true)]
    pub gengen: Option<String>,
    /// Number of simulated issuers.
    #[arg(long, global = true)]
    pub issuers: Option<usize>,
    /// Simulated history length in years.
    #[arg(long, global = true)]
    pub sim_horizon: Option<f64>,
    /// Withdrawal intensity per year for simulated issuers.
    #[arg(long, global = true)]
    pub withdrawal_rate: Option<f64>,
    /// Smoother time scale.
    #[arg(long, global = true)]
    pub theta: Option<f64>,
    /// Iteration budget for each optimizer stage of the smoothed fit.
    #[arg(long, global = true)]
    pub max_iterations: Option<usize>,
}

impl RunConfig {
    pub fn load(flags: &Flags) -> Result<Self> {
        let mut config = match &flags.config {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
                toml::from_str(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?
            }
            None => RunConfig::default(),
        };
        config.overlay(flags);
        Ok(config)
    }

    fn overlay(&mut self, f: &Flags) {
        fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                slot.clone_from(v);
            }
        }
        let text = |v: &Option<String>| v.clone().map(Scalar::Text);
        set(&mut self.scale, &f.scale);
        set(&mut self.events, &f.events);
        set(&mut self.method, &f.method);
        set(&mut self.half_life, &text(&f.half_life));
        set(&mut self.as_of, &text(&f.as_of));
        set(&mut self.window_start, &text(&f.window_start));
        set(&mut self.horizons, &f.horizons);
        set(&mut self.seed, &f.seed);
        set(
            &mut self.dates,
            &f.dates
                .clone()
                .map(|d| d.into_iter().map(Scalar::Text).collect()),
        );
        set(&mut self.generator, &f.generator);
        set(&mut self.gengen, &f.gengen);
        set(&mut self.issuers, &f.issuers);
        set(&mut self.sim_horizon, &f.sim_horizon);
        set(&mut self.withdrawal_rate, &f.withdrawal_rate);
        set(&mut self.theta, &f.theta);
        set(&mut self.max_iterations, &f.max_iterations);
    }

    /// Flag, then the environment override, then the config file, then the default.
    pub fn out_dir(&self, flags: &Flags) -> PathBuf {
        flags
            .out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .or_else(|| self.out.clone())
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
    }

    pub fn require<'a, T>(value: &'a Option<T>, name: &str) -> Result<&'a T> {
        value
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("missing setting `{name}`")))
    }

    pub fn method(&self) -> Result<Method> {
        match &self.method {
            Some(m) => Method::from_str(m).map_err(CliError::config),
            None => Ok(Method::Mle),
        }
    }

    /// Required for the weighted and smoothed methods; infinite otherwise.
    pub fn half_life(&self, method: Method) -> Result<HalfLife> {
        match (&self.half_life, method) {
            (Some(h), _) => HalfLife::from_str(&h.text()).map_err(CliError::config),
            (None, Method::Weighted | Method::Smoothed) => Err(CliError::Config(format!(
                "method {method} needs `half_life`"
            ))),
            (None, _) => Ok(HalfLife::Infinite),
        }
    }

    pub fn date(value: &Option<Scalar>, name: &str) -> Result<Option<f64>> {
        value
            .as_ref()
            .map(|v| parse_date(&v.text(), name))
            .transpose()
    }

    pub fn dates(&self) -> Result<Vec<f64>> {
        Self::require(&self.dates, "dates")?
            .iter()
            .map(|d| parse_date(&d.text(), "dates"))
            .collect()
    }
}

fn parse_date(text: &str, name: &str) -> Result<f64> {
    Date::from_str(text.trim())
        .map(|d| d.years())
        .map_err(|e| CliError::Config(format!("`{name}`: {e}")))
}
