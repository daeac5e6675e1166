//! Flat `key = value` study configuration shared by the mse, kendall and
//! distribution studies.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::error::{LdError, Result};
use crate::estimators::{parse_alpha, EstimatorSpec, DEFAULT_BAYES_SAMPLES, DEFAULT_VOLUME_CAP};
use crate::measures::Measure;
use crate::tables::DirichletParams;

pub const MIN_MSE_REPLICATES: usize = 1_000;
pub const MIN_DISTRIBUTION_DRAWS: usize = 10_000;

/// Which marginal frequencies decide the Kendall bin of a table.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BinRule {
    /// Row-minor and column-minor frequencies both fall in the bin.
    Both,
    /// Only the row-minor frequency is used.
    Row,
    /// The smaller of the two minor frequencies is used.
    Min,
}

impl FromStr for BinRule {
    type Err = LdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "both" => Ok(BinRule::Both),
            "row" => Ok(BinRule::Row),
            "min" => Ok(BinRule::Min),
            other => Err(LdError::InvalidConfig(format!("unknown bin_rule '{other}' (both, row, min)"))),
        }
    }
}

impl BinRule {
    pub fn as_str(self) -> &'static str {
        match self {
            BinRule::Both => "both",
            BinRule::Row => "row",
            BinRule::Min => "min",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum StudyKind {
    Mse,
    Kendall,
    Distribution,
}

impl FromStr for StudyKind {
    type Err = LdError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mse" => Ok(StudyKind::Mse),
            "kendall" => Ok(StudyKind::Kendall),
            "distribution" => Ok(StudyKind::Distribution),
            other => Err(LdError::InvalidConfig(format!("unknown study kind '{other}'"))),
        }
    }
}

impl StudyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            StudyKind::Mse => "mse",
            StudyKind::Kendall => "kendall",
            StudyKind::Distribution => "distribution",
        }
    }
}

#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub prior: DirichletParams,
    pub sample_sizes: Vec<u64>,
    pub replicates: usize,
    pub seed: u64,
    pub estimators: Vec<EstimatorSpec>,
    pub measures: Vec<Measure>,
    /// Bin edges for the Kendall study, from 0 to 0.5.
    pub bins: Vec<f64>,
    pub bin_rule: BinRule,
    pub mc_samples: usize,
    /// Apply SNE, BE and VE to an eta measure only with the measure's own alpha.
    pub eta_matched_only: bool,
    pub volume_cap: u64,
    /// Table draws for the kendall and distribution studies.
    pub draws: usize,
    /// Paired samples kept for scatter output in the distribution study.
    pub scatter: usize,
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self::new(StudyKind::Mse)
    }
}

impl StudyConfig {
    /// Defaults for one study kind: prior 1 for mse, 1/2 otherwise.
    pub fn new(kind: StudyKind) -> Self {
        let base = Self {
            prior: DirichletParams::symmetric(1.0).expect("valid"),
            sample_sizes: vec![50, 100, 500],
            replicates: 10_000,
            seed: 1,
            estimators: ["ne", "sne:1", "sne:0.5", "be:1", "be:0.5", "ve"]
                .iter()
                .map(|s| s.parse().expect("valid"))
                .collect(),
            measures: Measure::parse_list("eta:1,eta:0.5,dprime,r,q", None).expect("valid"),
            bins: vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5],
            bin_rule: BinRule::Both,
            mc_samples: DEFAULT_BAYES_SAMPLES,
            eta_matched_only: true,
            volume_cap: DEFAULT_VOLUME_CAP,
            draws: 100_000,
            scatter: 2_000,
        };
        match kind {
            StudyKind::Mse => base,
            StudyKind::Kendall | StudyKind::Distribution => Self {
                prior: DirichletParams::symmetric(0.5).expect("valid"),
                measures: Measure::parse_list("eta:0.5,eta:1,dprime,r,q,mi", None).expect("valid"),
                ..base
            },
        }
    }
}

fn parse_list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<T>()
                .map_err(|_| LdError::InvalidConfig(format!("bad entry '{s}' for key '{key}'")))
        })
        .collect()
}

fn parse_scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse::<T>()
        .map_err(|_| LdError::InvalidConfig(format!("bad value '{value}' for key '{key}'")))
}

fn alpha_token(a: &DirichletParams) -> String {
    match a.symmetric_value() {
        Some(x) => format!("{x}"),
        None => a.values().map(|x| x.to_string()).join("/"),
    }
}

impl StudyConfig {
    /// Parses `key = value` lines; `#` starts a comment. Unset keys keep defaults.
    pub fn parse(kind: StudyKind, text: &str) -> Result<Self> {
        let mut cfg = Self::new(kind);
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| LdError::InvalidConfig(format!("line {}: expected key = value", lineno + 1)))?;
            cfg.set(key.trim(), value.trim())?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "prior_alpha" => self.prior = parse_alpha(value).map_err(|e| LdError::InvalidConfig(e.to_string()))?,
            "sample_sizes" => self.sample_sizes = parse_list(key, value)?,
            "replicates" => self.replicates = parse_scalar(key, value)?,
            "seed" => self.seed = parse_scalar(key, value)?,
            "estimators" => {
                self.estimators = value
                    .split(',')
                    .filter(|s| !s.trim().is_empty())
                    .map(|s| s.parse::<EstimatorSpec>())
                    .collect::<Result<_>>()?
            }
            "measures" => self.measures = Measure::parse_list(value, None)?,
            "bins" => self.bins = parse_list(key, value)?,
            "bin_rule" => self.bin_rule = value.parse()?,
            "mc_samples" => self.mc_samples = parse_scalar(key, value)?,
            "eta_matched_only" => self.eta_matched_only = parse_scalar(key, value)?,
            "volume_cap" => self.volume_cap = parse_scalar(key, value)?,
            "draws" => self.draws = parse_scalar(key, value)?,
            "scatter" => self.scatter = parse_scalar(key, value)?,
            other => return Err(LdError::InvalidConfig(format!("unknown key '{other}'"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.sample_sizes.is_empty() || self.sample_sizes.contains(&0) {
            return Err(LdError::InvalidConfig("sample_sizes must be a non-empty list of positive integers".into()));
        }
        if self.estimators.is_empty() {
            return Err(LdError::InvalidConfig("estimators must not be empty".into()));
        }
        if self.bins.len() < 2
            || self.bins[0] != 0.0
            || *self.bins.last().expect("non-empty") != 0.5
            || self.bins.windows(2).any(|w| !(w[1] > w[0]))
        {
            return Err(LdError::InvalidConfig(
                "bins must be strictly increasing edges from 0 to 0.5".into(),
            ));
        }
        Ok(())
    }

    /// Canonical text form; parsing it gives back an equivalent config.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: Vec<String>| v.join(",");
        let _ = writeln!(s, "prior_alpha = {}", alpha_token(&self.prior));
        let _ = writeln!(s, "sample_sizes = {}", join(self.sample_sizes.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(s, "replicates = {}", self.replicates);
        let _ = writeln!(s, "seed = {}", self.seed);
        let _ = writeln!(s, "estimators = {}", join(self.estimators.iter().map(|e| e.label()).collect()));
        let _ = writeln!(s, "measures = {}", join(self.measures.iter().map(|m| m.name()).collect()));
        let _ = writeln!(s, "bins = {}", join(self.bins.iter().map(|x| x.to_string()).collect()));
        let _ = writeln!(s, "bin_rule = {}", self.bin_rule.as_str());
        let _ = writeln!(s, "mc_samples = {}", self.mc_samples);
        let _ = writeln!(s, "eta_matched_only = {}", self.eta_matched_only);
        let _ = writeln!(s, "volume_cap = {}", self.volume_cap);
        let _ = writeln!(s, "draws = {}", self.draws);
        let _ = writeln!(s, "scatter = {}", self.scatter);
        s
    }

    pub fn prior_label(&self) -> String {
        alpha_token(&self.prior)
    }
}
