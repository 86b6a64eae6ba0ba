//! Runs one configured experiment (a single point or a sweep) and renders CSV.

use std::io::{self, Write};

use ehrelay::dtmc::{
    joint_matrix_mc, joint_matrix_product_form, marginal_product_outage, outage_probability,
    steady_state_with, SolverOptions, DEFAULT_STATE_CAP,
};
use ehrelay::simulator::{self, derive_seed};
use ehrelay::{Config, Matrix, Params, Policy};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Mode};
use crate::CliError;

pub const CSV_HEADER: &str =
    "policy,mode,snr_db,n_relays,levels,alpha,kappa,rate,p_out,ci_low,ci_high,slots,seed";

/// One CSV row. Analysis modes report `ci_low = ci_high = p_out`; `slots`
/// holds the per-state sample count for `dtmc-mc` and 0 for the closed forms.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub policy: Policy,
    pub mode: Mode,
    pub snr_db: f64,
    pub n_relays: usize,
    pub levels: usize,
    pub alpha: f64,
    pub kappa: f64,
    pub rate: f64,
    pub p_out: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub slots: u64,
    pub seed: u64,
}

impl ResultRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.policy,
            self.mode,
            format_sig(self.snr_db, 9),
            self.n_relays,
            self.levels,
            format_sig(self.alpha, 9),
            format_sig(self.kappa, 9),
            format_sig(self.rate, 9),
            format_sig(self.p_out, 9),
            format_sig(self.ci_low, 9),
            format_sig(self.ci_high, 9),
            self.slots,
            self.seed
        )
    }
}

/// `%.{digits}g`-style formatting: fixed notation for moderate exponents,
/// scientific otherwise, trailing zeros dropped.
pub fn format_sig(x: f64, digits: usize) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return format!("{x}");
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        format!("{}e{exp}", trim_zeros(mantissa))
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], mut out: W) -> io::Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for row in rows {
        writeln!(out, "{}", row.to_csv())?;
    }
    Ok(())
}

/// Point configs in sweep order with their seeds. A single point keeps the
/// base seed; sweep point `k` uses `derive_seed(seed, k)`.
pub fn expand_points(config: &ExperimentConfig) -> Result<Vec<(ExperimentConfig, u64)>, CliError> {
    let values = config.sweep_points()?;
    if values.is_empty() {
        return Ok(vec![(config.clone(), config.seed)]);
    }
    values
        .into_iter()
        .enumerate()
        .map(|(k, v)| {
            let mut point = config.clone();
            point.apply(v)?;
            Ok((point, derive_seed(config.seed, k as u64)))
        })
        .collect()
}

/// Rows in sweep order; independent of the worker count.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Vec<ResultRow>, CliError> {
    config.validate()?;
    let points = expand_points(config)?;
    points
        .par_iter()
        .map(|(point, seed)| evaluate(point, *seed))
        .collect()
}

/// Joint transition matrix of an analysis mode that builds one.
pub fn build_matrix(config: &ExperimentConfig, seed: u64) -> Result<Matrix, CliError> {
    let params = config.params()?;
    Ok(match config.mode {
        Mode::DtmcProduct => joint_matrix_product_form(&params, DEFAULT_STATE_CAP)?,
        Mode::DtmcMc => joint_matrix_mc(
            &params,
            config.mc_samples_per_state,
            seed,
            DEFAULT_STATE_CAP,
        )?,
        Mode::Sim | Mode::DtmcMarginal => {
            return Err(CliError::Incompatible {
                key: "mode".into(),
                reason: format!("mode {} has no joint transition matrix", config.mode),
            })
        }
    })
}

fn chain_outage(matrix: &Matrix, params: &Params) -> Result<f64, CliError> {
    let pi = steady_state_with(matrix, &SolverOptions::default())?;
    Ok(outage_probability(&pi, params)?)
}

fn evaluate(point: &ExperimentConfig, seed: u64) -> Result<ResultRow, CliError> {
    let params = point.params()?;
    let (p_out, ci_low, ci_high, slots) = match point.mode {
        Mode::Sim => {
            let sim = Config::new(params, point.policy)
                .slots(point.slots)
                .warmup(point.warmup_slots)
                .seed(seed);
            let est = simulator::run(&sim)?;
            (est.p_out, est.ci_low, est.ci_high, point.slots)
        }
        Mode::DtmcProduct => {
            let p = chain_outage(&build_matrix(point, seed)?, &params)?;
            (p, p, p, 0)
        }
        Mode::DtmcMc => {
            let p = chain_outage(&build_matrix(point, seed)?, &params)?;
            (p, p, p, point.mc_samples_per_state)
        }
        Mode::DtmcMarginal => {
            let p = marginal_product_outage(&params)?;
            (p, p, p, 0)
        }
    };
    Ok(ResultRow {
        policy: point.policy,
        mode: point.mode,
        snr_db: point.snr_db,
        n_relays: point.n_relays,
        levels: point.levels,
        alpha: point.alpha,
        kappa: point.kappa,
        rate: point.rate,
        p_out,
        ci_low,
        ci_high,
        slots,
        seed,
    })
}
