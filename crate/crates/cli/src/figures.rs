//! Canned sweeps reproducing the standard outage plots, one CSV per curve.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ehrelay::{Policy, SweepAxis};

use crate::config::{ExperimentConfig, Mode};
use crate::experiment::{run_experiment, write_csv};
use crate::format_sig;
use crate::CliError;

/// Slot count for curves whose outage stays above about `1e-4`.
pub const BASE_SLOTS: u64 = 1_000_000;
/// Slot count for curves that reach below `1e-4`.
pub const DEEP_SLOTS: u64 = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Figure {
    /// Outage against SNR for one and many levels.
    Fig2,
    /// Outage against harvesting efficiency.
    Fig3,
    /// Outage against battery capacity.
    Fig4,
    /// Policy comparison against SNR.
    Fig5,
}

impl Figure {
    pub const ALL: [Figure; 4] = [Figure::Fig2, Figure::Fig3, Figure::Fig4, Figure::Fig5];

    pub fn name(self) -> &'static str {
        match self {
            Figure::Fig2 => "fig2",
            Figure::Fig3 => "fig3",
            Figure::Fig4 => "fig4",
            Figure::Fig5 => "fig5",
        }
    }
}

impl fmt::Display for Figure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Figure {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        Figure::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| CliError::UnknownFigure(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FigureOptions {
    /// Overrides the per-curve slot count when set.
    pub slots: Option<u64>,
    pub seed: u64,
    pub mc_samples_per_state: u64,
}

impl Default for FigureOptions {
    fn default() -> Self {
        Self {
            slots: None,
            seed: 1,
            mc_samples_per_state: 100_000,
        }
    }
}

/// A named sweep.
#[derive(Debug, Clone)]
pub struct Curve {
    pub name: String,
    pub config: ExperimentConfig,
}

fn grid(from: i32, to: i32, step: i32, scale: f64) -> Vec<String> {
    (from..=to)
        .step_by(step as usize)
        .map(|k| format_sig(k as f64 / scale, 9))
        .collect()
}

fn snr_grid() -> Vec<String> {
    grid(0, 40, 5, 1.0)
}

fn kappa_grid() -> Vec<String> {
    grid(1, 10, 1, 10.0)
}

fn alpha_grid() -> Vec<String> {
    grid(2, 14, 1, 10.0)
}

struct Scenario {
    n_relays: usize,
    levels: usize,
    snr_db: f64,
    rate: f64,
    policy: Policy,
}

impl Scenario {
    fn config(
        &self,
        axis: SweepAxis,
        values: Vec<String>,
        mode: Mode,
        opts: &FigureOptions,
    ) -> ExperimentConfig {
        let deep = self.levels >= 10;
        ExperimentConfig {
            policy: self.policy,
            mode,
            snr_db: self.snr_db,
            n_relays: self.n_relays,
            levels: self.levels,
            rate: self.rate,
            slots: opts
                .slots
                .unwrap_or(if deep { DEEP_SLOTS } else { BASE_SLOTS }),
            seed: opts.seed,
            mc_samples_per_state: opts.mc_samples_per_state,
            sweep_axis: Some(axis),
            sweep_values: values,
            ..ExperimentConfig::default()
        }
    }

    /// Simulation curve plus the tractable analysis curves: the joint chain
    /// for one level, the marginal product for many.
    fn curves(
        &self,
        prefix: &str,
        axis: SweepAxis,
        values: Vec<String>,
        opts: &FigureOptions,
    ) -> Vec<Curve> {
        let mut modes = vec![Mode::Sim];
        if self.policy == Policy::Bars {
            match self.levels {
                1 => modes.extend([Mode::DtmcProduct, Mode::DtmcMc]),
                l if l >= 100 => modes.push(Mode::DtmcMarginal),
                _ => {}
            }
        }
        modes
            .into_iter()
            .map(|mode| Curve {
                name: format!("{prefix}_{}_{mode}", self.policy),
                config: self.config(axis, values.clone(), mode, opts),
            })
            .collect()
    }
}

/// Every curve of a figure, in output order.
pub fn curves(figure: Figure, opts: &FigureOptions) -> Vec<Curve> {
    let mut out = Vec::new();
    let bars = |n_relays, levels, snr_db, rate| Scenario {
        n_relays,
        levels,
        snr_db,
        rate,
        policy: Policy::Bars,
    };
    match figure {
        Figure::Fig2 => {
            for levels in [1, 100] {
                for n in [2, 3] {
                    let s = bars(n, levels, 10.0, 1.0);
                    out.extend(s.curves(
                        &format!("fig2_L{levels}_N{n}"),
                        SweepAxis::SnrDb,
                        snr_grid(),
                        opts,
                    ));
                }
            }
        }
        Figure::Fig3 => {
            for levels in [1, 10, 100] {
                for snr in [10.0, 20.0] {
                    let s = bars(3, levels, snr, 1.0);
                    out.extend(s.curves(
                        &format!("fig3_L{levels}_snr{snr}"),
                        SweepAxis::Kappa,
                        kappa_grid(),
                        opts,
                    ));
                }
            }
        }
        Figure::Fig4 => {
            for n in [2, 3, 4] {
                let s = bars(n, 100, 20.0, 2.0);
                out.extend(s.curves(&format!("fig4_N{n}"), SweepAxis::Alpha, alpha_grid(), opts));
            }
        }
        Figure::Fig5 => {
            for n in [2, 3] {
                for policy in [Policy::Bars, Policy::Csi, Policy::Benchmark] {
                    let s = Scenario {
                        n_relays: n,
                        levels: 10,
                        snr_db: 10.0,
                        rate: 1.0,
                        policy,
                    };
                    out.extend(s.curves(&format!("fig5_N{n}"), SweepAxis::SnrDb, snr_grid(), opts));
                }
            }
        }
    }
    out
}

/// Runs every curve of `figure` and writes `<curve>.csv` files into `out_dir`.
pub fn figures(
    figure: Figure,
    out_dir: &Path,
    opts: &FigureOptions,
) -> Result<Vec<PathBuf>, CliError> {
    fs::create_dir_all(out_dir).map_err(|source| CliError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    for curve in curves(figure, opts) {
        let rows = run_experiment(&curve.config)?;
        let path = out_dir.join(format!("{}.csv", curve.name));
        let io_err = |source| CliError::Io {
            path: path.clone(),
            source,
        };
        let file = fs::File::create(&path).map_err(io_err)?;
        write_csv(&rows, std::io::BufWriter::new(file)).map_err(io_err)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(snr_grid().len(), 9);
        assert_eq!(kappa_grid().first().map(String::as_str), Some("0.1"));
        assert_eq!(kappa_grid().len(), 10);
        assert_eq!(alpha_grid().last().map(String::as_str), Some("1.4"));
        assert_eq!(alpha_grid().len(), 13);
    }

    #[test]
    fn curve_sets_validate() {
        let opts = FigureOptions::default();
        for fig in Figure::ALL {
            let cs = curves(fig, &opts);
            assert!(!cs.is_empty());
            for c in &cs {
                c.config.validate().unwrap();
            }
        }
        let fig2 = curves(Figure::Fig2, &opts);
        assert!(fig2
            .iter()
            .any(|c| c.name == "fig2_L1_N2_bars_dtmc-product"));
        assert!(fig2
            .iter()
            .any(|c| c.name == "fig2_L100_N3_bars_dtmc-marginal"));
        assert!(fig2
            .iter()
            .filter(|c| c.config.levels == 100)
            .all(|c| c.config.slots == DEEP_SLOTS));
        assert!(curves(Figure::Fig5, &opts)
            .iter()
            .all(|c| c.config.mode == Mode::Sim));
        assert!("fig9".parse::<Figure>().is_err());
    }
}
