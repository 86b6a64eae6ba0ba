//! Quantized battery: a uniform grid `b_0 = 0 < b_1 < ... < b_{L+1} = B` and
//! floor quantization, so level `l` covers stored energy in `[b_l, b_{l+1})`.
//! A relay at level `l` is credited with exactly `b_l` of usable energy.

use crate::{Error, Real, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LevelBoundaries<F> {
    b: Vec<F>,
}

impl<F: Real> LevelBoundaries<F> {
    /// `b_l = l * B / (L + 1)` for `l = 0..=L+1`, with the top boundary pinned to `B`.
    pub fn uniform(levels: usize, capacity: F) -> Result<Self> {
        if levels == 0 {
            return Err(Error::InvalidParameter {
                name: "levels",
                reason: "must be >= 1".into(),
            });
        }
        if !(capacity > F::zero()) || !capacity.is_finite() {
            return Err(Error::InvalidParameter {
                name: "capacity",
                reason: format!("must be finite and > 0, got {capacity}"),
            });
        }
        let denom = F::of((levels + 1) as f64);
        let mut b: Vec<F> = (0..=levels + 1)
            .map(|l| F::of(l as f64) * capacity / denom)
            .collect();
        b[levels + 1] = capacity;
        Ok(Self { b })
    }

    /// Interior level count `L`.
    pub fn levels(&self) -> usize {
        self.b.len() - 2
    }

    pub fn top(&self) -> usize {
        self.b.len() - 1
    }

    pub fn capacity(&self) -> F {
        self.b[self.b.len() - 1]
    }

    /// Grid spacing `b_1`.
    pub fn step(&self) -> F {
        self.b[1]
    }

    /// Energy credited to a level. Panics if the level is off the grid.
    #[inline]
    pub fn energy(&self, level: usize) -> F {
        self.b[level]
    }

    pub fn as_slice(&self) -> &[F] {
        &self.b
    }

    #[inline]
    pub(crate) fn quantize_unchecked(&self, energy: F) -> usize {
        let top = self.top();
        if energy >= self.b[top] {
            return top;
        }
        let guess = (energy / self.b[1])
            .floor()
            .to_usize()
            .unwrap_or(0)
            .min(top - 1);
        // nudge the floor estimate so it agrees with the stored boundaries
        let mut l = guess;
        while l > 0 && energy < self.b[l] {
            l -= 1;
        }
        while l + 1 < top && energy >= self.b[l + 1] {
            l += 1;
        }
        l
    }
}

/// Battery state index in `0..=L+1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct BatteryLevel(usize);

impl BatteryLevel {
    pub fn new<F: Real>(level: usize, bounds: &LevelBoundaries<F>) -> Result<Self> {
        if level > bounds.top() {
            return Err(Error::LevelOutOfRange {
                level,
                max: bounds.top(),
            });
        }
        Ok(Self(level))
    }

    pub const EMPTY: Self = Self(0);

    pub fn full<F: Real>(bounds: &LevelBoundaries<F>) -> Self {
        Self(bounds.top())
    }

    pub(crate) fn from_index(level: usize) -> Self {
        Self(level)
    }

    #[inline]
    pub fn index(self) -> usize {
        self.0
    }
}

impl From<BatteryLevel> for usize {
    fn from(level: BatteryLevel) -> usize {
        level.0
    }
}

/// Level holding `energy`; anything at or above capacity is full.
pub fn quantize<F: Real>(energy: F, bounds: &LevelBoundaries<F>) -> Result<BatteryLevel> {
    if !(energy >= F::zero()) {
        return Err(Error::NegativeEnergy(energy.as_f64()));
    }
    Ok(BatteryLevel(bounds.quantize_unchecked(energy)))
}

/// Adds harvested energy to the credited energy of `current`, clipping at full.
pub fn charge<F: Real>(
    current: BatteryLevel,
    harvested: F,
    bounds: &LevelBoundaries<F>,
) -> Result<BatteryLevel> {
    if !(harvested >= F::zero()) {
        return Err(Error::NegativeEnergy(harvested.as_f64()));
    }
    Ok(BatteryLevel(
        bounds.quantize_unchecked(bounds.energy(current.0) + harvested),
    ))
}

/// Spends `required` from the credited energy of `current`.
pub fn discharge<F: Real>(
    current: BatteryLevel,
    required: F,
    bounds: &LevelBoundaries<F>,
) -> Result<BatteryLevel> {
    let stored = bounds.energy(current.0);
    if !(required >= F::zero()) || required > stored {
        return Err(Error::InsufficientEnergy {
            stored: stored.as_f64(),
            required: required.as_f64(),
        });
    }
    Ok(BatteryLevel(bounds.quantize_unchecked(stored - required)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn grid() -> LevelBoundaries<f64> {
        LevelBoundaries::uniform(1, 10.0).unwrap()
    }

    fn lvl(l: usize) -> BatteryLevel {
        BatteryLevel(l)
    }

    #[test]
    fn uniform_grids() {
        assert_eq!(grid().as_slice(), &[0.0, 5.0, 10.0]);
        assert_eq!(
            LevelBoundaries::uniform(3, 1.0).unwrap().as_slice(),
            &[0.0, 0.25, 0.5, 0.75, 1.0]
        );
        for l in 1..50 {
            let b = LevelBoundaries::uniform(l, 0.7).unwrap();
            assert_eq!(b.capacity(), 0.7);
            assert_eq!(b.as_slice().len(), l + 2);
        }
        assert!(LevelBoundaries::uniform(0, 1.0).is_err());
    }

    #[test]
    fn quantize_edges() {
        let b = grid();
        assert_eq!(quantize(0.0, &b).unwrap(), lvl(0));
        assert_eq!(quantize(10.0, &b).unwrap(), lvl(2));
        assert_eq!(quantize(25.0, &b).unwrap(), lvl(2));
        assert_eq!(quantize(5.0, &b).unwrap(), lvl(1));
        assert_eq!(quantize(4.999999, &b).unwrap(), lvl(0));
        assert!(quantize(-1.0, &b).is_err());
    }

    #[test]
    fn quantize_fine_grid_scan() {
        let b = grid();
        for k in 0..=20_000 {
            let e = k as f64 * 0.001;
            let expected = if e < 5.0 {
                0
            } else if e < 10.0 {
                1
            } else {
                2
            };
            assert_eq!(quantize(e, &b).unwrap().index(), expected, "energy {e}");
        }
    }

    #[test]
    fn charge_examples() {
        let b = grid();
        assert_eq!(charge(lvl(1), 0.0, &b).unwrap(), lvl(1));
        assert_eq!(charge(lvl(0), 10.0, &b).unwrap(), lvl(2));
        assert_eq!(charge(lvl(0), 50.0, &b).unwrap(), lvl(2));
        assert_eq!(charge(lvl(1), 3.0, &b).unwrap(), lvl(1));
        assert!(charge(lvl(1), -1.0, &b).is_err());
    }

    #[test]
    fn discharge_examples() {
        let b = grid();
        assert_eq!(discharge(lvl(1), 0.0, &b).unwrap(), lvl(1));
        assert_eq!(discharge(lvl(1), 3.0, &b).unwrap(), lvl(0));
        assert_eq!(discharge(lvl(2), 3.0, &b).unwrap(), lvl(1));
        assert!(matches!(
            discharge(lvl(1), 5.5, &b),
            Err(Error::InsufficientEnergy { .. })
        ));
        assert!(discharge(lvl(0), 1e-9, &b).is_err());
    }

    proptest! {
        #[test]
        fn grid_membership(levels in 1usize..200, cap in 0.01f64..1e4, frac in 0.0f64..1.0) {
            let b = LevelBoundaries::uniform(levels, cap).unwrap();
            for l in 0..=levels {
                let (lo, hi) = (b.energy(l), b.energy(l + 1));
                let e = lo + frac * (hi - lo);
                if e < hi {
                    prop_assert_eq!(quantize(e, &b).unwrap().index(), l);
                }
                prop_assert_eq!(quantize(lo, &b).unwrap().index(), l);
            }
        }

        #[test]
        fn discharge_then_charge_never_gains(levels in 1usize..50, start in 0usize..52, frac in 0.0f64..1.0) {
            let b = LevelBoundaries::uniform(levels, 3.0).unwrap();
            let start = BatteryLevel(start.min(levels + 1));
            let amount = frac * b.energy(start.index());
            let down = discharge(start, amount, &b).unwrap();
            let back = charge(down, amount, &b).unwrap();
            prop_assert!(back <= start);
            prop_assert!(down.index() <= levels + 1 && back.index() <= levels + 1);
        }

        #[test]
        fn forwarding_discharge_drops(levels in 1usize..50, start in 1usize..52, t in 0.01f64..20.0, h in 0.0f64..10.0) {
            let b = LevelBoundaries::uniform(levels, 7.0).unwrap();
            let start = BatteryLevel(start.min(levels + 1));
            let stored = b.energy(start.index());
            // a relay only forwards when h >= T / b_m
            prop_assume!(h * stored >= t);
            let next = discharge(start, t / h, &b);
            prop_assume!(next.is_ok());
            prop_assert!(next.unwrap() < start);
        }
    }
}
