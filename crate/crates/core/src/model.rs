//! Scenario parameters, Rayleigh channel draws and the per-relay mode
//! probabilities.
//!
//! Slot duration is normalized to one, so a relay's transmit power and the
//! energy it spends in a slot are the same number. That lets the forwarding
//! test compare stored energy `b_m` directly against the required power
//! `T / h`.

use rand::Rng;

use crate::battery::LevelBoundaries;
use crate::{Error, Real, Result};

/// Decoding threshold `2^(2R) - 1` for a two-hop half-duplex link at rate `R`.
pub fn decoding_threshold<F: Real>(rate: F) -> Result<F> {
    if !(rate >= F::zero()) || !rate.is_finite() {
        return Err(Error::InvalidParameter {
            name: "rate",
            reason: format!("must be finite and >= 0, got {rate}"),
        });
    }
    Ok(F::of(2.0).powf(F::of(2.0) * rate) - F::one())
}

/// CDF of an exponential random variable with the given mean.
///
/// `x <= 0` maps to 0 and `x = +inf` maps to 1.
pub fn exp_cdf<F: Real>(x: F, mean: F) -> Result<F> {
    if !(mean > F::zero()) || !mean.is_finite() {
        return Err(Error::InvalidParameter {
            name: "mean",
            reason: format!("must be finite and > 0, got {mean}"),
        });
    }
    Ok(cdf(x, mean))
}

#[inline]
pub(crate) fn cdf<F: Real>(x: F, mean: F) -> F {
    if x <= F::zero() {
        F::zero()
    } else if x == F::infinity() {
        F::one()
    } else {
        -(-x / mean).exp_m1()
    }
}

/// Converts an SNR in dB to a linear source power for the given noise power.
pub fn snr_db_to_power<F: Real>(snr_db: F, noise_power: F) -> F {
    noise_power * F::of(10.0).powf(snr_db / F::of(10.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum SourcePower<F> {
    Linear(F),
    Db(F),
}

/// Builder for [`SystemParams`].
///
/// Defaults follow the common evaluation setting: `R = 1`, `N0 = 1`, unit
/// channel means, `kappa = 0.5`, `alpha = 1`, SNR 10 dB, two relays, one
/// interior battery level.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParamsBuilder<F> {
    n_relays: usize,
    levels: usize,
    rate: F,
    power: SourcePower<F>,
    noise_power: F,
    kappa: F,
    alpha: F,
    mean_g: Option<Vec<F>>,
    mean_h: Option<Vec<F>>,
}

impl<F: Real> Default for SystemParamsBuilder<F> {
    fn default() -> Self {
        Self {
            n_relays: 2,
            levels: 1,
            rate: F::one(),
            power: SourcePower::Db(F::of(10.0)),
            noise_power: F::one(),
            kappa: F::of(0.5),
            alpha: F::one(),
            mean_g: None,
            mean_h: None,
        }
    }
}

impl<F: Real> SystemParamsBuilder<F> {
    pub fn relays(mut self, n: usize) -> Self {
        self.n_relays = n;
        self
    }

    pub fn levels(mut self, levels: usize) -> Self {
        self.levels = levels;
        self
    }

    pub fn rate(mut self, rate: F) -> Self {
        self.rate = rate;
        self
    }

    /// Source power on a linear scale.
    pub fn source_power(mut self, p: F) -> Self {
        self.power = SourcePower::Linear(p);
        self
    }

    /// Source power given as `P / N0` in dB; resolved against the noise
    /// power at build time.
    pub fn snr_db(mut self, snr_db: F) -> Self {
        self.power = SourcePower::Db(snr_db);
        self
    }

    pub fn noise_power(mut self, n0: F) -> Self {
        self.noise_power = n0;
        self
    }

    pub fn kappa(mut self, kappa: F) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn alpha(mut self, alpha: F) -> Self {
        self.alpha = alpha;
        self
    }

    /// Per-relay mean source-to-relay gain. A single entry is broadcast.
    pub fn mean_g(mut self, means: Vec<F>) -> Self {
        self.mean_g = Some(means);
        self
    }

    /// Per-relay mean relay-to-destination gain. A single entry is broadcast.
    pub fn mean_h(mut self, means: Vec<F>) -> Self {
        self.mean_h = Some(means);
        self
    }

    pub fn build(self) -> Result<SystemParams<F>> {
        let invalid = |name: &'static str, reason: String| Error::InvalidParameter { name, reason };
        if self.n_relays == 0 {
            return Err(invalid("n_relays", "need at least one relay".into()));
        }
        if self.levels == 0 {
            return Err(invalid(
                "levels",
                "need at least one quantization level".into(),
            ));
        }
        let threshold = decoding_threshold(self.rate)?;
        if !(self.noise_power > F::zero()) || !self.noise_power.is_finite() {
            return Err(invalid(
                "noise_power",
                format!("must be finite and > 0, got {}", self.noise_power),
            ));
        }
        let source_power = match self.power {
            SourcePower::Linear(p) => p,
            SourcePower::Db(db) => snr_db_to_power(db, self.noise_power),
        };
        if !(source_power > F::zero()) || !source_power.is_finite() {
            return Err(invalid(
                "source_power",
                format!("must be finite and > 0, got {source_power}"),
            ));
        }
        if !(self.kappa >= F::zero() && self.kappa <= F::one()) {
            return Err(invalid(
                "kappa",
                format!("must lie in [0, 1], got {}", self.kappa),
            ));
        }
        if !(self.alpha > F::zero()) || !self.alpha.is_finite() {
            return Err(invalid(
                "alpha",
                format!("must be finite and > 0, got {}", self.alpha),
            ));
        }
        let n = self.n_relays;
        let means = |name: &'static str, given: Option<Vec<F>>| -> Result<Vec<F>> {
            let v = match given {
                None => vec![F::one(); n],
                Some(v) if v.len() == 1 => vec![v[0]; n],
                Some(v) => v,
            };
            if v.len() != n {
                return Err(invalid(
                    name,
                    format!("expected {n} entries, got {}", v.len()),
                ));
            }
            if let Some(bad) = v.iter().find(|m| !(**m > F::zero()) || !m.is_finite()) {
                return Err(invalid(
                    name,
                    format!("means must be finite and > 0, got {bad}"),
                ));
            }
            Ok(v)
        };
        let mean_g = means("mean_g", self.mean_g)?;
        let mean_h = means("mean_h", self.mean_h)?;

        let capacity = self.alpha * source_power;
        let bounds = LevelBoundaries::uniform(self.levels, capacity)?;
        Ok(SystemParams {
            n_relays: n,
            levels: self.levels,
            rate: self.rate,
            source_power,
            noise_power: self.noise_power,
            kappa: self.kappa,
            alpha: self.alpha,
            mean_g,
            mean_h,
            threshold,
            capacity,
            decode_gain: threshold * self.noise_power / source_power,
            harvest_factor: source_power * self.kappa,
            bounds,
        })
    }
}

/// Validated scenario constants together with the quantities derived from
/// them (decoding threshold, battery capacity, level grid).
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams<F> {
    n_relays: usize,
    levels: usize,
    rate: F,
    source_power: F,
    noise_power: F,
    kappa: F,
    alpha: F,
    mean_g: Vec<F>,
    mean_h: Vec<F>,
    threshold: F,
    capacity: F,
    decode_gain: F,
    harvest_factor: F,
    bounds: LevelBoundaries<F>,
}

impl<F: Real> SystemParams<F> {
    pub fn builder() -> SystemParamsBuilder<F> {
        SystemParamsBuilder::default()
    }

    /// Builder preloaded with these parameters, for deriving variants.
    pub fn to_builder(&self) -> SystemParamsBuilder<F> {
        SystemParamsBuilder {
            n_relays: self.n_relays,
            levels: self.levels,
            rate: self.rate,
            power: SourcePower::Linear(self.source_power),
            noise_power: self.noise_power,
            kappa: self.kappa,
            alpha: self.alpha,
            mean_g: Some(self.mean_g.clone()),
            mean_h: Some(self.mean_h.clone()),
        }
    }

    pub fn n_relays(&self) -> usize {
        self.n_relays
    }

    /// Number of interior quantization levels `L`; a battery has `L + 2` states.
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn rate(&self) -> F {
        self.rate
    }

    pub fn source_power(&self) -> F {
        self.source_power
    }

    pub fn noise_power(&self) -> F {
        self.noise_power
    }

    pub fn kappa(&self) -> F {
        self.kappa
    }

    pub fn alpha(&self) -> F {
        self.alpha
    }

    pub fn mean_g(&self) -> &[F] {
        &self.mean_g
    }

    pub fn mean_h(&self) -> &[F] {
        &self.mean_h
    }

    /// `10 log10(P / N0)`.
    pub fn snr_db(&self) -> F {
        F::of(10.0) * (self.source_power / self.noise_power).log10()
    }

    /// Decoding threshold `T`.
    pub fn threshold(&self) -> F {
        self.threshold
    }

    /// Battery capacity `B = alpha * P`.
    pub fn capacity(&self) -> F {
        self.capacity
    }

    pub fn bounds(&self) -> &LevelBoundaries<F> {
        &self.bounds
    }

    /// Smallest source-to-relay gain that decodes: `T N0 / P`.
    pub fn decode_gain(&self) -> F {
        self.decode_gain
    }

    /// `P * kappa`; multiplied by `g` it gives the harvested energy.
    pub fn harvest_factor(&self) -> F {
        self.harvest_factor
    }

    pub fn harvested_energy(&self, g: F) -> F {
        self.harvest_factor * g
    }

    /// Minimum relay transmit power `T / h` for decoding at the destination.
    /// Zero whenever `T = 0`.
    pub fn required_power(&self, h: F) -> F {
        if self.threshold == F::zero() {
            F::zero()
        } else {
            self.threshold / h
        }
    }

    /// Smallest relay-to-destination gain a relay holding `stored` energy can
    /// serve: `T / stored`, with `T / 0 = +inf` for `T > 0` and `0` for `T = 0`.
    pub fn min_gain_for_energy(&self, stored: F) -> F {
        if self.threshold == F::zero() {
            F::zero()
        } else if stored <= F::zero() {
            F::infinity()
        } else {
            self.threshold / stored
        }
    }

    /// Number of battery states per relay, `L + 2`.
    pub fn states_per_relay(&self) -> usize {
        self.levels + 2
    }

    pub(crate) fn check_relay(&self, relay: usize) -> Result<()> {
        if relay >= self.n_relays {
            return Err(Error::RelayOutOfRange {
                index: relay,
                relays: self.n_relays,
            });
        }
        Ok(())
    }

    pub(crate) fn check_level(&self, level: usize) -> Result<()> {
        if level > self.levels + 1 {
            return Err(Error::LevelOutOfRange {
                level,
                max: self.levels + 1,
            });
        }
        Ok(())
    }
}

/// One slot's channel gain powers for every relay.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelDraw<F> {
    /// Source to relay.
    pub g: Vec<F>,
    /// Relay to destination.
    pub h: Vec<F>,
}

impl<F: Real> ChannelDraw<F> {
    pub fn new(g: Vec<F>, h: Vec<F>) -> Result<Self> {
        if g.len() != h.len() {
            return Err(Error::DimensionMismatch {
                expected: g.len(),
                actual: h.len(),
            });
        }
        for (name, v) in [("g", &g), ("h", &h)] {
            if let Some(bad) = v.iter().find(|x| !(**x >= F::zero()) || !x.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    reason: format!("gains must be finite and >= 0, got {bad}"),
                });
            }
        }
        Ok(Self { g, h })
    }

    pub(crate) fn zeros(n: usize) -> Self {
        Self {
            g: vec![F::zero(); n],
            h: vec![F::zero(); n],
        }
    }

    pub fn len(&self) -> usize {
        self.g.len()
    }

    pub fn is_empty(&self) -> bool {
        self.g.is_empty()
    }
}

#[inline]
fn exp_sample<F: Real, R: Rng + ?Sized>(rng: &mut R, mean: F) -> F {
    // u in [0, 1), so 1 - u is in (0, 1] and the log is finite.
    let u: f64 = rng.gen();
    -mean * F::of(-u).ln_1p()
}

/// Draws independent exponential gains for every relay by inverse-CDF
/// transform. Order: all `g` first, then all `h`.
pub fn sample_channels<F: Real, R: Rng + ?Sized>(
    params: &SystemParams<F>,
    rng: &mut R,
) -> ChannelDraw<F> {
    let mut draw = ChannelDraw::zeros(params.n_relays);
    sample_channels_into(params, rng, &mut draw);
    draw
}

/// Allocation-free variant of [`sample_channels`].
pub fn sample_channels_into<F: Real, R: Rng + ?Sized>(
    params: &SystemParams<F>,
    rng: &mut R,
    draw: &mut ChannelDraw<F>,
) {
    draw.g.resize(params.n_relays, F::zero());
    draw.h.resize(params.n_relays, F::zero());
    for (g, &mean) in draw.g.iter_mut().zip(&params.mean_g) {
        *g = exp_sample(rng, mean);
    }
    for (h, &mean) in draw.h.iter_mut().zip(&params.mean_h) {
        *h = exp_sample(rng, mean);
    }
}

/// `Pr[A_f(m)]`: relay `relay` at level `level` both decodes the source and
/// stores enough energy to reach the destination.
pub fn prob_forwarding<F: Real>(level: usize, relay: usize, params: &SystemParams<F>) -> Result<F> {
    params.check_level(level)?;
    params.check_relay(relay)?;
    Ok(forwarding(level, relay, params))
}

/// `Pr[A_c(m)]`, the complement of [`prob_forwarding`].
pub fn prob_charging<F: Real>(level: usize, relay: usize, params: &SystemParams<F>) -> Result<F> {
    params.check_level(level)?;
    params.check_relay(relay)?;
    Ok(charging(level, relay, params))
}

pub(crate) fn decodes<F: Real>(relay: usize, params: &SystemParams<F>) -> F {
    F::one() - cdf(params.decode_gain, params.mean_g[relay])
}

/// `F_h(T / b_m)`: the relay-to-destination link is too weak for the stored energy.
pub(crate) fn energy_short<F: Real>(level: usize, relay: usize, params: &SystemParams<F>) -> F {
    let stored = params.bounds.energy(level);
    cdf(params.min_gain_for_energy(stored), params.mean_h[relay])
}

pub(crate) fn forwarding<F: Real>(level: usize, relay: usize, params: &SystemParams<F>) -> F {
    decodes(relay, params) * (F::one() - energy_short(level, relay, params))
}

pub(crate) fn charging<F: Real>(level: usize, relay: usize, params: &SystemParams<F>) -> F {
    let short = energy_short(level, relay, params);
    short + (F::one() - short) * (F::one() - decodes(relay, params))
}
