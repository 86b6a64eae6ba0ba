//! Slot-by-slot Monte Carlo of the relay batteries.
//!
//! One trajectory is strictly sequential: each slot draws fresh channels,
//! runs the selection policy, discharges the forwarder by `T / h` and charges
//! every other relay by `P g kappa`. Independent trajectories (sweep points,
//! replicas) run in parallel on rayon, each with its own derived seed.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::battery::{charge, discharge, BatteryLevel};
use crate::model::{sample_channels_into, ChannelDraw, SystemParams};
use crate::selection::{select, select_unchecked, Policy, SlotOutcome};
use crate::{Error, Real, Result};

/// Two-sided 99% normal quantile.
pub const Z_99: f64 = 2.576;

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig<F> {
    pub params: SystemParams<F>,
    pub policy: Policy,
    pub slots: u64,
    pub warmup_slots: u64,
    pub seed: u64,
    /// Starting level of every relay; `None` means full.
    pub initial_level: Option<usize>,
}

impl<F: Real> SimConfig<F> {
    /// One million slots, no warmup, seed 0, full batteries.
    pub fn new(params: SystemParams<F>, policy: Policy) -> Self {
        Self {
            params,
            policy,
            slots: 1_000_000,
            warmup_slots: 0,
            seed: 0,
            initial_level: None,
        }
    }

    pub fn slots(mut self, slots: u64) -> Self {
        self.slots = slots;
        self
    }

    pub fn warmup(mut self, warmup_slots: u64) -> Self {
        self.warmup_slots = warmup_slots;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn initial_level(mut self, level: usize) -> Self {
        self.initial_level = Some(level);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots == 0 {
            return Err(Error::InvalidParameter {
                name: "slots",
                reason: "must be >= 1".into(),
            });
        }
        if self.warmup_slots >= self.slots {
            return Err(Error::InvalidParameter {
                name: "warmup_slots",
                reason: format!("{} must be below slots ({})", self.warmup_slots, self.slots),
            });
        }
        if let Some(l) = self.initial_level {
            self.params.check_level(l)?;
        }
        Ok(())
    }

    pub fn counted_slots(&self) -> u64 {
        self.slots - self.warmup_slots
    }
}

/// Outage fraction over the counted slots with a normal-approximation 99%
/// interval. Slot indicators are Markov-dependent, so the interval is only
/// approximate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OutageEstimate {
    pub p_out: f64,
    pub std_err: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub outages: u64,
    pub counted_slots: u64,
    pub seed: u64,
}

impl OutageEstimate {
    pub fn from_counts(outages: u64, counted_slots: u64, seed: u64) -> Self {
        let n = counted_slots.max(1) as f64;
        let p = outages as f64 / n;
        let std_err = (p * (1.0 - p) / n).sqrt();
        Self {
            p_out: p,
            std_err,
            ci_low: (p - Z_99 * std_err).max(0.0),
            ci_high: (p + Z_99 * std_err).min(1.0),
            outages,
            counted_slots,
            seed,
        }
    }

    /// Pools several estimates, weighting each by its slot count. Keeps the
    /// first seed.
    pub fn merge(estimates: &[OutageEstimate]) -> Option<Self> {
        let first = estimates.first()?;
        let outages = estimates.iter().map(|e| e.outages).sum();
        let slots = estimates.iter().map(|e| e.counted_slots).sum();
        Some(Self::from_counts(outages, slots, first.seed))
    }

    /// Half-width of the 99% interval.
    pub fn half_width(&self) -> f64 {
        Z_99 * self.std_err
    }
}

impl fmt::Display for OutageEstimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "p_out={:.6e} [{:.6e}, {:.6e}] over {} slots (seed {})",
            self.p_out, self.ci_low, self.ci_high, self.counted_slots, self.seed
        )
    }
}

/// Applies one slot: the forwarder spends `T / h`, everyone else harvests
/// `P g kappa`. Returns the next levels and the slot outcome.
pub fn step<F: Real, R: rand::Rng + ?Sized>(
    levels: &[BatteryLevel],
    draw: &ChannelDraw<F>,
    policy: Policy,
    params: &SystemParams<F>,
    rng: &mut R,
) -> Result<(Vec<BatteryLevel>, SlotOutcome)> {
    let outcome = select(policy, draw, levels, params, rng)?;
    let mut next = levels.to_vec();
    apply_outcome(&mut next, draw, &outcome, params)?;
    Ok((next, outcome))
}

/// In-place [`step`] without dimension checks.
pub(crate) fn step_into<F: Real, R: rand::Rng + ?Sized>(
    levels: &mut [BatteryLevel],
    draw: &ChannelDraw<F>,
    policy: Policy,
    params: &SystemParams<F>,
    rng: &mut R,
) -> Result<SlotOutcome> {
    let outcome = select_unchecked(policy, draw, levels, params, rng);
    apply_outcome(levels, draw, &outcome, params)?;
    Ok(outcome)
}

fn apply_outcome<F: Real>(
    levels: &mut [BatteryLevel],
    draw: &ChannelDraw<F>,
    outcome: &SlotOutcome,
    params: &SystemParams<F>,
) -> Result<()> {
    let forwarder = outcome.forwarder();
    let bounds = params.bounds();
    for (i, level) in levels.iter_mut().enumerate() {
        *level = if forwarder == Some(i) {
            discharge(*level, params.required_power(draw.h[i]), bounds)?
        } else {
            charge(*level, params.harvested_energy(draw.g[i]), bounds)?
        };
    }
    Ok(())
}

/// A single battery trajectory that can be advanced slot by slot.
pub struct Trajectory<F> {
    params: SystemParams<F>,
    policy: Policy,
    levels: Vec<BatteryLevel>,
    draw: ChannelDraw<F>,
    rng: ChaCha8Rng,
}

impl<F: Real> Trajectory<F> {
    pub fn new(
        params: SystemParams<F>,
        policy: Policy,
        initial: &[BatteryLevel],
        seed: u64,
    ) -> Result<Self> {
        let n = params.n_relays();
        if initial.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: initial.len(),
            });
        }
        for l in initial {
            params.check_level(l.index())?;
        }
        Ok(Self {
            draw: ChannelDraw::zeros(n),
            levels: initial.to_vec(),
            rng: ChaCha8Rng::seed_from_u64(seed),
            params,
            policy,
        })
    }

    pub fn levels(&self) -> &[BatteryLevel] {
        &self.levels
    }

    pub fn advance(&mut self) -> Result<SlotOutcome> {
        sample_channels_into(&self.params, &mut self.rng, &mut self.draw);
        let outcome = select_unchecked(
            self.policy,
            &self.draw,
            &self.levels,
            &self.params,
            &mut self.rng,
        );
        apply_outcome(&mut self.levels, &self.draw, &outcome, &self.params)?;
        Ok(outcome)
    }
}

fn initial_levels<F: Real>(config: &SimConfig<F>) -> Vec<BatteryLevel> {
    let top = config.params.levels() + 1;
    let l = BatteryLevel::from_index(config.initial_level.unwrap_or(top));
    vec![l; config.params.n_relays()]
}

/// Runs one trajectory and reports the outage fraction after warmup.
pub fn run<F: Real>(config: &SimConfig<F>) -> Result<OutageEstimate> {
    config.validate()?;
    let mut traj = Trajectory::new(
        config.params.clone(),
        config.policy,
        &initial_levels(config),
        config.seed,
    )?;
    for _ in 0..config.warmup_slots {
        traj.advance()?;
    }
    let mut outages = 0u64;
    for _ in 0..config.counted_slots() {
        outages += traj.advance()?.outage as u64;
    }
    Ok(OutageEstimate::from_counts(
        outages,
        config.counted_slots(),
        config.seed,
    ))
}

/// Like [`run`], and also counts how often each joint battery state was
/// occupied at the start of a counted slot. States are indexed with relay 0
/// as the most significant digit in base `L + 2`.
pub fn run_with_occupancy<F: Real>(
    config: &SimConfig<F>,
    state_cap: usize,
) -> Result<(OutageEstimate, Vec<u64>)> {
    config.validate()?;
    let radix = config.params.states_per_relay();
    let n = config.params.n_relays();
    let states = radix
        .checked_pow(n as u32)
        .filter(|&s| s <= state_cap)
        .ok_or(Error::StateCapExceeded {
            states: radix.saturating_pow(n as u32),
            cap: state_cap,
        })?;
    let mut counts = vec![0u64; states];
    let mut traj = Trajectory::new(
        config.params.clone(),
        config.policy,
        &initial_levels(config),
        config.seed,
    )?;
    for _ in 0..config.warmup_slots {
        traj.advance()?;
    }
    let mut outages = 0u64;
    for _ in 0..config.counted_slots() {
        let idx = traj
            .levels()
            .iter()
            .fold(0usize, |acc, l| acc * radix + l.index());
        counts[idx] += 1;
        outages += traj.advance()?.outage as u64;
    }
    Ok((
        OutageEstimate::from_counts(outages, config.counted_slots(), config.seed),
        counts,
    ))
}

/// Runs `replicas` independent trajectories in parallel (seeds derived from
/// `config.seed`) and pools them.
pub fn run_replicated<F: Real>(config: &SimConfig<F>, replicas: usize) -> Result<OutageEstimate> {
    let replicas = replicas.max(1);
    let parts = (0..replicas)
        .into_par_iter()
        .map(|k| {
            let mut c = config.clone();
            c.seed = derive_seed(config.seed, k as u64);
            run(&c)
        })
        .collect::<Result<Vec<_>>>()?;
    let mut merged = OutageEstimate::merge(&parts).expect("at least one replica");
    merged.seed = config.seed;
    Ok(merged)
}

/// Deterministic per-stream seed (splitmix64 finalizer over the base seed
/// and the stream index).
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepAxis {
    SnrDb,
    Kappa,
    Alpha,
    Levels,
    NRelays,
    Rate,
    Policy,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::SnrDb => "snr_db",
            SweepAxis::Kappa => "kappa",
            SweepAxis::Alpha => "alpha",
            SweepAxis::Levels => "levels",
            SweepAxis::NRelays => "n_relays",
            SweepAxis::Rate => "rate",
            SweepAxis::Policy => "policy",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "snr_db" => SweepAxis::SnrDb,
            "kappa" => SweepAxis::Kappa,
            "alpha" => SweepAxis::Alpha,
            "levels" => SweepAxis::Levels,
            "n_relays" => SweepAxis::NRelays,
            "rate" => SweepAxis::Rate,
            "policy" => SweepAxis::Policy,
            other => return Err(Error::UnknownAxis(other.to_string())),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SweepValue {
    Number(f64),
    Policy(Policy),
}

impl From<f64> for SweepValue {
    fn from(x: f64) -> Self {
        SweepValue::Number(x)
    }
}

impl From<Policy> for SweepValue {
    fn from(p: Policy) -> Self {
        SweepValue::Policy(p)
    }
}

impl fmt::Display for SweepValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SweepValue::Number(x) => write!(f, "{x}"),
            SweepValue::Policy(p) => write!(f, "{p}"),
        }
    }
}

fn as_count(axis: SweepAxis, value: SweepValue) -> Result<usize> {
    match value {
        SweepValue::Number(x) if x >= 0.0 && x.fract() == 0.0 && x <= usize::MAX as f64 => {
            Ok(x as usize)
        }
        _ => Err(Error::BadSweepValue {
            axis: axis.name(),
            value: value.to_string(),
        }),
    }
}

fn uniform_mean<F: Real>(means: &[F], name: &'static str) -> Result<Vec<F>> {
    if means.iter().all(|m| *m == means[0]) {
        Ok(vec![means[0]])
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "relay count sweeps need identical per-relay means".into(),
        })
    }
}

/// Sets one swept parameter on a copy of `base`.
pub fn apply_axis<F: Real>(
    base: &SimConfig<F>,
    axis: SweepAxis,
    value: SweepValue,
) -> Result<SimConfig<F>> {
    let mut config = base.clone();
    let b = base.params.to_builder();
    let num = |v: SweepValue| match v {
        SweepValue::Number(x) => Ok(F::of(x)),
        SweepValue::Policy(_) => Err(Error::BadSweepValue {
            axis: axis.name(),
            value: v.to_string(),
        }),
    };
    config.params = match axis {
        SweepAxis::SnrDb => b
            .snr_db(num(value)?)
            .noise_power(base.params.noise_power())
            .build()?,
        SweepAxis::Kappa => b.kappa(num(value)?).build()?,
        SweepAxis::Alpha => b.alpha(num(value)?).build()?,
        SweepAxis::Rate => b.rate(num(value)?).build()?,
        SweepAxis::Levels => {
            if config.initial_level.is_some() {
                config.initial_level = None;
            }
            b.levels(as_count(axis, value)?).build()?
        }
        SweepAxis::NRelays => b
            .relays(as_count(axis, value)?)
            .mean_g(uniform_mean(base.params.mean_g(), "mean_g")?)
            .mean_h(uniform_mean(base.params.mean_h(), "mean_h")?)
            .build()?,
        SweepAxis::Policy => match value {
            SweepValue::Policy(p) => {
                config.policy = p;
                base.params.clone()
            }
            SweepValue::Number(_) => {
                return Err(Error::BadSweepValue {
                    axis: axis.name(),
                    value: value.to_string(),
                })
            }
        },
    };
    Ok(config)
}

/// One estimate per value, in the order given. Point `k` runs with seed
/// `derive_seed(base.seed, k)`.
pub fn run_sweep<F: Real>(
    base: &SimConfig<F>,
    axis: SweepAxis,
    values: &[SweepValue],
) -> Result<Vec<OutageEstimate>> {
    let configs = values
        .iter()
        .enumerate()
        .map(|(k, &v)| {
            let mut c = apply_axis(base, axis, v)?;
            c.seed = derive_seed(base.seed, k as u64);
            Ok(c)
        })
        .collect::<Result<Vec<_>>>()?;
    configs.par_iter().map(run).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn params(n: usize, levels: usize) -> SystemParams<f64> {
        SystemParams::builder()
            .relays(n)
            .levels(levels)
            .source_power(10.0)
            .build()
            .unwrap()
    }

    fn lv(v: &[usize]) -> Vec<BatteryLevel> {
        v.iter().map(|&l| BatteryLevel::from_index(l)).collect()
    }

    #[test]
    fn no_harvest_stays_empty() {
        let p = params(3, 2).to_builder().kappa(0.0).build().unwrap();
        let d = ChannelDraw::new(vec![3.0, 1.0, 2.0], vec![1.0, 1.0, 1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, out) = step(&lv(&[0, 0, 0]), &d, Policy::Bars, &p, &mut rng).unwrap();
        assert_eq!(next, lv(&[0, 0, 0]));
        assert!(out.outage);
    }

    #[test]
    fn single_relay_forwarding_drains() {
        let p = params(1, 1);
        let d = ChannelDraw::new(vec![1.0], vec![1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (next, out) = step(&lv(&[2]), &d, Policy::Bars, &p, &mut rng).unwrap();
        assert!(!out.outage);
        assert_eq!(next, lv(&[1]));
    }

    #[test]
    fn two_relay_trace() {
        // L = 1, B = 10, b = (0, 5, 10), T = 3, P kappa = 5.
        let p = params(2, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        // relay 0 at level 1 needs h >= 0.6; relay 1 is empty
        let d = ChannelDraw::new(vec![0.5, 1.2], vec![1.0, 4.0]).unwrap();
        let (next, out) = step(&lv(&[1, 0]), &d, Policy::Bars, &p, &mut rng).unwrap();
        assert_eq!(out.forwarder(), Some(0));
        // relay 0: 5 - 3 = 2 -> level 0; relay 1: 0 + 6 = 6 -> level 1
        assert_eq!(next, lv(&[0, 1]));
    }

    #[test]
    fn degenerate_kappa_zero_run() {
        let p = params(2, 1).to_builder().kappa(0.0).build().unwrap();
        let cfg = SimConfig::new(p, Policy::Bars)
            .slots(1_000_000)
            .warmup(10_000)
            .seed(4);
        let est = run(&cfg).unwrap();
        assert_eq!(est.p_out, 1.0);
        assert!(est.ci_low <= 1.0 && est.ci_high == 1.0);
        assert_eq!(est.counted_slots, 990_000);
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = SimConfig::new(params(2, 3), Policy::Csi)
            .slots(50_000)
            .seed(17);
        assert_eq!(run(&cfg).unwrap(), run(&cfg).unwrap());
        let other = cfg.clone().seed(18);
        assert_ne!(run(&cfg).unwrap(), run(&other).unwrap());
    }

    #[test]
    fn config_validation() {
        let base = SimConfig::new(params(1, 1), Policy::Bars);
        assert!(run(&base.clone().slots(0)).is_err());
        assert!(run(&base.clone().slots(10).warmup(10)).is_err());
        assert!(run(&base.clone().slots(10).initial_level(3)).is_err());
    }

    #[test]
    fn estimate_interval_is_clamped() {
        let e = OutageEstimate::from_counts(1, 10, 0);
        assert!(e.ci_low == 0.0 && e.ci_low <= e.p_out && e.p_out <= e.ci_high && e.ci_high <= 1.0);
        let m = OutageEstimate::merge(&[
            OutageEstimate::from_counts(10, 100, 1),
            OutageEstimate::from_counts(30, 300, 2),
        ])
        .unwrap();
        assert_eq!(m.p_out, 0.1);
        assert_eq!(m.counted_slots, 400);
        assert_eq!(m.seed, 1);
        assert!(OutageEstimate::merge(&[]).is_none());
    }

    #[test]
    fn sweep_basics() {
        let base = SimConfig::new(params(2, 1), Policy::Bars).slots(20_000);
        assert!(run_sweep(&base, SweepAxis::SnrDb, &[]).unwrap().is_empty());
        assert!("distance".parse::<SweepAxis>().is_err());
        let pol = run_sweep(
            &base,
            SweepAxis::Policy,
            &[Policy::Bars.into(), Policy::Csi.into()],
        )
        .unwrap();
        assert_eq!(pol.len(), 2);
        assert!(run_sweep(&base, SweepAxis::Levels, &[1.5.into()]).is_err());
        assert!(run_sweep(&base, SweepAxis::Kappa, &[Policy::Csi.into()]).is_err());
        let n = run_sweep(&base, SweepAxis::NRelays, &[1.0.into(), 3.0.into()]).unwrap();
        assert_eq!(n.len(), 2);
        let seeds: Vec<u64> = run_sweep(&base, SweepAxis::Alpha, &[0.5.into(), 1.0.into()])
            .unwrap()
            .iter()
            .map(|e| e.seed)
            .collect();
        assert_eq!(seeds, vec![derive_seed(0, 0), derive_seed(0, 1)]);
    }

    #[test]
    fn snr_sweep_decreases_with_many_levels() {
        let base = SimConfig::new(params(2, 100), Policy::Bars)
            .slots(1_000_000)
            .seed(3);
        let est = run_sweep(
            &base,
            SweepAxis::SnrDb,
            &[0.0.into(), 10.0.into(), 20.0.into()],
        )
        .unwrap();
        for w in est.windows(2) {
            assert!(
                w[1].p_out <= w[0].p_out + w[0].half_width() + w[1].half_width(),
                "{} then {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn disjoint_seeds_agree() {
        let base = SimConfig::new(params(2, 2), Policy::Bars)
            .slots(400_000)
            .warmup(1_000);
        let a = run_replicated(&base.clone().seed(1), 2).unwrap();
        let b = run_replicated(&base.clone().seed(2), 2).unwrap();
        assert!(
            (a.p_out - b.p_out).abs() <= a.half_width() + b.half_width(),
            "{a} vs {b}"
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn levels_stay_in_range_and_move_the_right_way(
            n in 1usize..5, levels in 1usize..12, snr in -5.0f64..35.0, kappa in 0.0f64..1.0,
            alpha in 0.1f64..2.0, seed in any::<u64>(), policy in 0usize..4,
        ) {
            let p = SystemParams::builder().relays(n).levels(levels).snr_db(snr).kappa(kappa).alpha(alpha).build().unwrap();
            let policy = Policy::ALL[policy];
            let mut traj = Trajectory::new(p.clone(), policy, &vec![BatteryLevel::full(p.bounds()); n], seed).unwrap();
            for _ in 0..2_000 {
                let before = traj.levels().to_vec();
                let out = traj.advance().unwrap();
                for (i, (a, b)) in before.iter().zip(traj.levels()).enumerate() {
                    prop_assert!(b.index() <= levels + 1);
                    if out.forwarder() == Some(i) {
                        prop_assert!(b < a);
                    } else {
                        prop_assert!(b >= a);
                    }
                }
            }
        }
    }
}
