//! Decoding and forwarding sets and the relay-selection policies.

use std::fmt;
use std::str::FromStr;

use rand::Rng;

use crate::battery::BatteryLevel;
use crate::model::{ChannelDraw, SystemParams};
use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Policy {
    /// Best relay-to-destination channel among relays that decoded.
    Csi,
    /// Least harvested energy among relays that decoded and can afford to transmit.
    Bars,
    /// Least harvested energy among relays that decoded, battery ignored.
    Benchmark,
    /// Uniform choice among relays that decoded.
    Random,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Csi, Policy::Bars, Policy::Benchmark, Policy::Random];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Csi => "csi",
            Policy::Bars => "bars",
            Policy::Benchmark => "benchmark",
            Policy::Random => "random",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csi" => Ok(Policy::Csi),
            "bars" => Ok(Policy::Bars),
            "benchmark" => Ok(Policy::Benchmark),
            "random" => Ok(Policy::Random),
            other => Err(format!(
                "unknown policy `{other}` (expected csi, bars, benchmark or random)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    Forward,
    Harvest,
}

/// Result of one selection epoch.
///
/// `selected` is whichever relay the policy picked, even when that relay then
/// turns out to lack the energy to transmit (CSI, benchmark and random can do
/// this). Only a non-outage slot has a forwarder, and it is `selected`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SlotOutcome {
    pub selected: Option<usize>,
    pub outage: bool,
}

impl SlotOutcome {
    pub fn forwarder(&self) -> Option<usize> {
        if self.outage {
            None
        } else {
            self.selected
        }
    }

    pub fn action(&self, relay: usize) -> Action {
        if self.forwarder() == Some(relay) {
            Action::Forward
        } else {
            Action::Harvest
        }
    }

    pub fn actions(&self, n_relays: usize) -> Vec<Action> {
        (0..n_relays).map(|i| self.action(i)).collect()
    }
}

#[inline]
fn decodes<F: Real>(g: F, params: &SystemParams<F>) -> bool {
    g >= params.decode_gain()
}

#[inline]
fn can_transmit<F: Real>(h: F, level: BatteryLevel, params: &SystemParams<F>) -> bool {
    params.required_power(h) <= params.bounds().energy(level.index())
}

/// Relays whose received SNR `P g_i / N0` clears the threshold `T`.
pub fn decoding_set<F: Real>(draw: &ChannelDraw<F>, params: &SystemParams<F>) -> Vec<usize> {
    (0..draw.len())
        .filter(|&i| decodes(draw.g[i], params))
        .collect()
}

/// Decoding relays whose stored energy covers the required power `T / h_i`.
pub fn forwarding_set<F: Real>(
    draw: &ChannelDraw<F>,
    levels: &[BatteryLevel],
    params: &SystemParams<F>,
) -> Vec<usize> {
    (0..draw.len())
        .filter(|&i| decodes(draw.g[i], params) && can_transmit(draw.h[i], levels[i], params))
        .collect()
}

/// Index of the first extreme element under `better`, restricted to `eligible`.
#[inline]
fn pick<F: Real>(
    values: &[F],
    eligible: impl Fn(usize) -> bool,
    better: impl Fn(F, F) -> bool,
) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if eligible(i) && best.is_none_or(|b| better(v, values[b])) {
            best = Some(i);
        }
    }
    best
}

fn check_dims<F: Real>(
    draw: &ChannelDraw<F>,
    levels: &[BatteryLevel],
    params: &SystemParams<F>,
) -> Result<()> {
    let n = params.n_relays();
    for actual in [draw.g.len(), draw.h.len(), levels.len()] {
        if actual != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual,
            });
        }
    }
    if let Some(bad) = levels.iter().find(|l| l.index() > params.levels() + 1) {
        return Err(Error::LevelOutOfRange {
            level: bad.index(),
            max: params.levels() + 1,
        });
    }
    Ok(())
}

/// Runs one selection epoch. `rng` is consumed only by [`Policy::Random`].
/// Ties go to the lowest relay index.
pub fn select<F: Real, R: Rng + ?Sized>(
    policy: Policy,
    draw: &ChannelDraw<F>,
    levels: &[BatteryLevel],
    params: &SystemParams<F>,
    rng: &mut R,
) -> Result<SlotOutcome> {
    check_dims(draw, levels, params)?;
    Ok(select_unchecked(policy, draw, levels, params, rng))
}

pub(crate) fn select_unchecked<F: Real, R: Rng + ?Sized>(
    policy: Policy,
    draw: &ChannelDraw<F>,
    levels: &[BatteryLevel],
    params: &SystemParams<F>,
    rng: &mut R,
) -> SlotOutcome {
    let in_d = |i: usize| decodes(draw.g[i], params);
    // the harvest factor is common to all relays, but compare E_i itself so
    // kappa = 0 collapses to a tie like the energies do
    let energy_less = |a: F, b: F| params.harvested_energy(a) < params.harvested_energy(b);

    let selected = match policy {
        Policy::Bars => {
            let chosen = pick(
                &draw.g,
                |i| in_d(i) && can_transmit(draw.h[i], levels[i], params),
                energy_less,
            );
            return SlotOutcome {
                selected: chosen,
                outage: chosen.is_none(),
            };
        }
        Policy::Csi => pick(&draw.h, in_d, |a, b| a > b),
        Policy::Benchmark => pick(&draw.g, in_d, energy_less),
        Policy::Random => {
            let count = (0..draw.len()).filter(|&i| in_d(i)).count();
            if count == 0 {
                None
            } else {
                let k = rng.gen_range(0..count);
                (0..draw.len()).filter(|&i| in_d(i)).nth(k)
            }
        }
    };
    let outage = match selected {
        None => true,
        Some(i) => !can_transmit(draw.h[i], levels[i], params),
    };
    SlotOutcome { selected, outage }
}
