//! Closed-form battery transitions of one relay.
//!
//! A relay at level `m` forwards when it decodes (`g >= T N0 / P`) and its
//! stored energy covers the link (`h >= T / b_m`); otherwise it harvests
//! `P kappa g`. Every entry is the sum of a forwarding part (targets `n <= m`)
//! and a harvesting part (targets `n >= m`):
//!
//! * forwarding lands on `n` when `b_n <= b_m - T/h < b_{n+1}`, i.e.
//!   `T/(b_m - b_n) <= h < T/(b_m - b_{n+1})`, with the upper bound vacuous
//!   once `b_{n+1} >= b_m`;
//! * harvesting lands on `n` when `g` falls in the interval that moves
//!   `b_m + P kappa g` into `[b_n, b_{n+1})` (open-ended at the top level),
//!   and the harvesting event itself is `h < T/b_m`, or `h >= T/b_m` with
//!   `g` below the decoding threshold.
//!
//! The classical regimes map onto this as: stay put below full, empty to
//! full, empty to partial, drop from `m` to `n < m`, partial to full, partial
//! to higher partial, and full stays full. With `T = 0` forwarding costs
//! nothing and keeps the level.

use super::{MatrixMode, TransitionMatrix};
use crate::model::{cdf, charging, SystemParams};
use crate::{Real, Result};

struct RelayLaw<'a, F> {
    params: &'a SystemParams<F>,
    mean_g: F,
    mean_h: F,
}

impl<F: Real> RelayLaw<'_, F> {
    fn fg(&self, x: F) -> F {
        cdf(x, self.mean_g)
    }

    fn fh(&self, x: F) -> F {
        cdf(x, self.mean_h)
    }

    fn b(&self, l: usize) -> F {
        self.params.bounds().energy(l)
    }

    fn decode_prob(&self) -> F {
        F::one() - self.fg(self.params.decode_gain())
    }

    /// `F_h(T / b_m)`.
    fn short(&self, m: usize) -> F {
        self.fh(self.params.min_gain_for_energy(self.b(m)))
    }

    /// `Pr[T/h > gap]`, i.e. `F_h(T / gap)` for a positive gap.
    fn spend_more_than(&self, t: F, gap: F) -> F {
        if gap > F::zero() {
            self.fh(t / gap)
        } else if gap < F::zero() || t > F::zero() {
            F::one()
        } else {
            F::zero()
        }
    }

    /// Probability of forwarding from `m` and landing on `n`.
    fn forward_to(&self, m: usize, n: usize) -> F {
        if n > m {
            return F::zero();
        }
        let t = self.params.threshold();
        let top = self.params.levels() + 1;
        let (bm, bn) = (self.b(m), self.b(n));
        let bn1 = if n < top {
            self.b(n + 1)
        } else {
            F::infinity()
        };
        // Pr[b_m - T/h < b_{n+1}]
        let below_next = self.spend_more_than(t, bm - bn1);
        // Pr[b_m - T/h < b_n]
        let below_this = self.spend_more_than(t, bm - bn);
        // with b_n = 0 the lower bound already enforces h >= T / b_m
        self.decode_prob() * (below_next - below_this).max(F::zero())
    }

    /// Probability of harvesting at `m` and landing on `n`.
    fn harvest_to(&self, m: usize, n: usize) -> F {
        let top = self.params.levels() + 1;
        if n < m {
            return F::zero();
        }
        let c = self.params.harvest_factor();
        let lo = if n == m {
            F::zero()
        } else {
            (self.b(n) - self.b(m)) / c
        };
        let hi = if n == top {
            F::infinity()
        } else {
            (self.b(n + 1) - self.b(m)) / c
        };
        let tau = self.params.decode_gain();
        let short = self.short(m);
        let any_g = self.fg(hi) - self.fg(lo);
        let undecoded = (self.fg(hi.min(tau)) - self.fg(lo.min(tau))).max(F::zero());
        short * any_g + (F::one() - short) * undecoded
    }
}

/// Single-relay transition matrix of order `L + 2`.
pub fn per_relay_matrix<F: Real>(
    relay: usize,
    params: &SystemParams<F>,
) -> Result<TransitionMatrix<F>> {
    params.check_relay(relay)?;
    let law = RelayLaw {
        params,
        mean_g: params.mean_g()[relay],
        mean_h: params.mean_h()[relay],
    };
    let order = params.states_per_relay();
    let mut entries = Vec::with_capacity(order * order);
    for m in 0..order {
        for n in 0..order {
            entries.push(law.forward_to(m, n) + law.harvest_to(m, n));
        }
    }
    TransitionMatrix::new(order, entries, MatrixMode::PerRelay)
}

/// Transition entries exactly as the classical regime-by-regime formulas are
/// usually printed, without the corrections applied by [`per_relay_matrix`].
///
/// These rows generally do not sum to one (the harvesting branch of the
/// stay-put and partial-charge regimes lacks the `1 - F_h(T/b_m)` factor, and
/// the partial-charge regime uses `b_{n+1} - b_n` and `F_h(T/kappa)`). They are
/// returned as plain rows for side-by-side comparison only.
pub fn printed_per_relay_rows<F: Real>(
    relay: usize,
    params: &SystemParams<F>,
) -> Result<Vec<Vec<F>>> {
    params.check_relay(relay)?;
    let law = RelayLaw {
        params,
        mean_g: params.mean_g()[relay],
        mean_h: params.mean_h()[relay],
    };
    let top = params.levels() + 1;
    let t = params.threshold();
    let tn0 = t * params.noise_power();
    let kappa = params.kappa();
    let c = params.harvest_factor();
    let tau = params.decode_gain();
    let b = |l: usize| law.b(l);
    let ratio = |num: F, den: F| {
        if den == F::zero() {
            F::infinity()
        } else {
            num / den
        }
    };

    let mut rows = vec![vec![F::zero(); top + 1]; top + 1];
    for (m, row) in rows.iter_mut().enumerate() {
        for (n, cell) in row.iter_mut().enumerate() {
            *cell = if m == top && n == top {
                charging(top, relay, params)
            } else if m == n {
                let first = law.fg(b(1) / c) * law.fh(ratio(t, b(m)));
                let second = if tn0 < b(1) / kappa {
                    law.fg(tau)
                } else {
                    law.fg(b(1) / c)
                };
                first + second
            } else if m == 0 && n == top {
                F::one() - law.fg(params.alpha() / kappa)
            } else if m == 0 {
                law.fg(b(n + 1) / c) - law.fg(b(n) / c)
            } else if n < m {
                (F::one() - law.fg(tau))
                    * (law.fh(ratio(t, b(m) - b(n + 1))) - law.fh(ratio(t, b(m) - b(n))))
            } else if n == top {
                let room = params.alpha() * params.source_power() - b(m);
                let first = law.fh(ratio(t, b(m))) * (F::one() - law.fg(room / c));
                let second = if tn0 <= room / kappa {
                    F::zero()
                } else {
                    law.fg(tau) - law.fg(room / c)
                };
                first + second
            } else {
                let first =
                    law.fh(t / kappa) * (law.fg((b(n + 1) - b(n)) / c) - law.fg((b(n) - b(m)) / c));
                let second = if tn0 < (b(n) - b(m)) / kappa {
                    F::zero()
                } else if tn0 < (b(n + 1) - b(m)) / kappa {
                    law.fg(tau) - law.fg((b(n) - b(m)) / c)
                } else {
                    law.fg((b(n + 1) - b(m)) / c) - law.fg((b(n) - b(m)) / c)
                };
                first + second
            };
        }
    }
    Ok(rows)
}
