//! Flat `key=value` experiment configuration.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use ehrelay::{Params, Policy, SweepAxis, SweepValue};

use crate::CliError;

/// Keys accepted in config files and as flag overrides.
pub const KEYS: &[&str] = &[
    "policy",
    "mode",
    "snr_db",
    "n_relays",
    "levels",
    "alpha",
    "kappa",
    "rate",
    "noise",
    "mean_g",
    "mean_h",
    "slots",
    "warmup_slots",
    "seed",
    "mc_samples_per_state",
    "sweep_axis",
    "sweep_values",
    "out",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    Sim,
    DtmcProduct,
    DtmcMc,
    DtmcMarginal,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sim => "sim",
            Mode::DtmcProduct => "dtmc-product",
            Mode::DtmcMc => "dtmc-mc",
            Mode::DtmcMarginal => "dtmc-marginal",
        }
    }

    pub fn is_analysis(self) -> bool {
        self != Mode::Sim
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "sim" => Ok(Mode::Sim),
            "dtmc-product" => Ok(Mode::DtmcProduct),
            "dtmc-mc" => Ok(Mode::DtmcMc),
            "dtmc-marginal" => Ok(Mode::DtmcMarginal),
            other => Err(format!(
                "unknown mode `{other}` (expected sim, dtmc-product, dtmc-mc or dtmc-marginal)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub policy: Policy,
    pub mode: Mode,
    pub snr_db: f64,
    pub n_relays: usize,
    pub levels: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub rate: f64,
    pub noise: f64,
    pub mean_g: Option<Vec<f64>>,
    pub mean_h: Option<Vec<f64>>,
    pub slots: u64,
    pub warmup_slots: u64,
    pub seed: u64,
    pub mc_samples_per_state: u64,
    pub sweep_axis: Option<SweepAxis>,
    pub sweep_values: Vec<String>,
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            policy: Policy::Bars,
            mode: Mode::Sim,
            snr_db: 10.0,
            n_relays: 2,
            levels: 1,
            alpha: 1.0,
            kappa: 0.5,
            rate: 1.0,
            noise: 1.0,
            mean_g: None,
            mean_h: None,
            slots: 1_000_000,
            warmup_slots: 0,
            seed: 1,
            mc_samples_per_state: 100_000,
            sweep_axis: None,
            sweep_values: Vec::new(),
            out: None,
        }
    }
}

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, CliError>
where
    T::Err: fmt::Display,
{
    value.trim().parse::<T>().map_err(|e| CliError::Malformed {
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

/// Accepts plain integers and scientific shorthand such as `1e6`.
fn parse_count(key: &str, value: &str) -> Result<u64, CliError> {
    if let Ok(v) = value.trim().parse::<u64>() {
        return Ok(v);
    }
    let x: f64 = parse_num(key, value)?;
    if x >= 0.0 && x.fract() == 0.0 && x <= u64::MAX as f64 {
        Ok(x as u64)
    } else {
        Err(CliError::Malformed {
            key: key.into(),
            value: value.into(),
            reason: "expected a non-negative integer".into(),
        })
    }
}

fn parse_list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|v| parse_num(key, v)).collect()
}

impl ExperimentConfig {
    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "policy" => {
                self.policy = v.parse().map_err(|reason| CliError::Malformed {
                    key: key.into(),
                    value: v.into(),
                    reason,
                })?
            }
            "mode" => {
                self.mode = v.parse().map_err(|reason| CliError::Malformed {
                    key: key.into(),
                    value: v.into(),
                    reason,
                })?
            }
            "snr_db" => self.snr_db = parse_num(key, v)?,
            "n_relays" => self.n_relays = parse_count(key, v)? as usize,
            "levels" => self.levels = parse_count(key, v)? as usize,
            "alpha" => self.alpha = parse_num(key, v)?,
            "kappa" => self.kappa = parse_num(key, v)?,
            "rate" => self.rate = parse_num(key, v)?,
            "noise" => self.noise = parse_num(key, v)?,
            "mean_g" => self.mean_g = Some(parse_list(key, v)?),
            "mean_h" => self.mean_h = Some(parse_list(key, v)?),
            "slots" => self.slots = parse_count(key, v)?,
            "warmup_slots" => self.warmup_slots = parse_count(key, v)?,
            "seed" => self.seed = parse_count(key, v)?,
            "mc_samples_per_state" => self.mc_samples_per_state = parse_count(key, v)?,
            "sweep_axis" => {
                self.sweep_axis =
                    Some(v.parse().map_err(|e: ehrelay::Error| CliError::Malformed {
                        key: key.into(),
                        value: v.into(),
                        reason: e.to_string(),
                    })?)
            }
            "sweep_values" => {
                self.sweep_values = v
                    .split(',')
                    .map(|s| s.trim().to_string())
                    .filter(|s| !s.is_empty())
                    .collect()
            }
            "out" => self.out = Some(PathBuf::from(v)),
            other => return Err(CliError::UnknownKey(other.to_string())),
        }
        Ok(())
    }

    /// Scenario parameters for the current (unswept) values.
    pub fn params(&self) -> Result<Params, CliError> {
        let mut b = Params::builder()
            .relays(self.n_relays)
            .levels(self.levels)
            .rate(self.rate)
            .noise_power(self.noise)
            .snr_db(self.snr_db)
            .kappa(self.kappa)
            .alpha(self.alpha);
        if let Some(g) = &self.mean_g {
            b = b.mean_g(g.clone());
        }
        if let Some(h) = &self.mean_h {
            b = b.mean_h(h.clone());
        }
        b.build().map_err(|e| match e {
            ehrelay::Error::InvalidParameter { name, reason } => CliError::Invalid {
                key: config_key(name).into(),
                reason,
            },
            other => CliError::Model(other),
        })
    }

    /// Parsed sweep points; empty when no sweep is configured.
    pub fn sweep_points(&self) -> Result<Vec<SweepValue>, CliError> {
        let Some(axis) = self.sweep_axis else {
            return Ok(Vec::new());
        };
        self.sweep_values
            .iter()
            .map(|v| match axis {
                SweepAxis::Policy => {
                    v.parse::<Policy>()
                        .map(SweepValue::Policy)
                        .map_err(|reason| CliError::Malformed {
                            key: "sweep_values".into(),
                            value: v.clone(),
                            reason,
                        })
                }
                _ => parse_num::<f64>("sweep_values", v).map(SweepValue::Number),
            })
            .collect()
    }

    /// Checks everything that can be checked before running.
    pub fn validate(&self) -> Result<(), CliError> {
        let incompatible = |key: &str, reason: &str| {
            Err(CliError::Incompatible {
                key: key.into(),
                reason: reason.into(),
            })
        };
        if self.mode.is_analysis() && self.policy != Policy::Bars {
            return incompatible(
                "mode",
                "the Markov-chain analysis covers the bars policy only",
            );
        }
        match (self.sweep_axis, self.sweep_values.is_empty()) {
            (Some(_), true) => {
                return incompatible("sweep_values", "a sweep axis needs at least one value")
            }
            (None, false) => {
                return incompatible("sweep_axis", "sweep values given without an axis")
            }
            _ => {}
        }
        if self.sweep_axis == Some(SweepAxis::Policy) && self.mode.is_analysis() {
            return incompatible("sweep_axis", "policy sweeps need mode=sim");
        }
        if self.slots == 0 {
            return Err(CliError::Invalid {
                key: "slots".into(),
                reason: "must be >= 1".into(),
            });
        }
        if self.warmup_slots >= self.slots {
            return Err(CliError::Invalid {
                key: "warmup_slots".into(),
                reason: "must be below slots".into(),
            });
        }
        if self.mc_samples_per_state == 0 {
            return Err(CliError::Invalid {
                key: "mc_samples_per_state".into(),
                reason: "must be >= 1".into(),
            });
        }
        let points = self.sweep_points()?;
        if points.is_empty() {
            self.params()?;
        }
        for value in points {
            let mut point = self.clone();
            point.apply(value)?;
            point.params()?;
        }
        Ok(())
    }

    /// Applies one sweep value to the swept key.
    pub fn apply(&mut self, value: SweepValue) -> Result<(), CliError> {
        let axis = self.sweep_axis.expect("apply called without a sweep axis");
        self.set(axis.name(), &value.to_string())
    }
}

fn config_key(param: &str) -> &str {
    match param {
        "noise_power" => "noise",
        "source_power" => "snr_db",
        other => other,
    }
}

/// Parses `key=value` lines. Blank lines and `#` comments are skipped;
/// unknown keys are an error.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, CliError> {
    let mut config = ExperimentConfig::default();
    apply_text(&mut config, text)?;
    config.validate()?;
    Ok(config)
}

/// Applies `key=value` lines on top of an existing config without validating.
pub fn apply_text(config: &mut ExperimentConfig, text: &str) -> Result<(), CliError> {
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| CliError::Syntax {
            line: lineno + 1,
            text: raw.to_string(),
        })?;
        config.set(key.trim(), value)?;
    }
    Ok(())
}
