use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{per_relay_matrix, MatrixMode, TransitionMatrix};
use crate::battery::BatteryLevel;
use crate::model::{sample_channels_into, ChannelDraw, SystemParams};
use crate::selection::Policy;
use crate::simulator::{derive_seed, step_into};
use crate::{Error, Real, Result};

/// Largest joint state space the dense constructions will build. A dense
/// `f64` matrix at this order takes 128 MiB.
pub const DEFAULT_STATE_CAP: usize = 4096;

/// Battery levels of all relays, relay 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct JointState {
    pub levels: Vec<usize>,
}

impl JointState {
    /// Mixed-radix index with relay 0 as the most significant digit.
    pub fn flat_index(&self, radix: usize) -> usize {
        self.levels.iter().fold(0, |acc, &l| acc * radix + l)
    }

    pub fn from_index(mut index: usize, n_relays: usize, radix: usize) -> Self {
        let mut levels = vec![0; n_relays];
        for slot in levels.iter_mut().rev() {
            *slot = index % radix;
            index /= radix;
        }
        Self { levels }
    }
}

/// `(L + 2)^N`, or an error when that exceeds `cap`.
pub fn joint_state_count<F: Real>(params: &SystemParams<F>, cap: usize) -> Result<usize> {
    let radix = params.states_per_relay();
    let n = params.n_relays() as u32;
    match radix.checked_pow(n) {
        Some(s) if s <= cap => Ok(s),
        Some(s) => Err(Error::StateCapExceeded { states: s, cap }),
        None => Err(Error::StateCapExceeded {
            states: usize::MAX,
            cap,
        }),
    }
}

/// Joint matrix whose entries are products of per-relay entries, i.e. every
/// relay evolves by its own chain as if the others were absent.
pub fn joint_matrix_product_form<F: Real>(
    params: &SystemParams<F>,
    cap: usize,
) -> Result<TransitionMatrix<F>> {
    let states = joint_state_count(params, cap)?;
    let radix = params.states_per_relay();
    let n = params.n_relays();
    let singles = (0..n)
        .map(|i| per_relay_matrix(i, params))
        .collect::<Result<Vec<_>>>()?;

    let mut entries = vec![F::zero(); states * states];
    entries
        .par_chunks_mut(states)
        .enumerate()
        .for_each(|(j, row)| {
            let from = JointState::from_index(j, n, radix);
            // expand relay by relay: row starts as [1] and grows by a factor of radix
            let mut acc = vec![F::one()];
            for (i, m) in from.levels.iter().enumerate() {
                let single = singles[i].row(*m);
                acc = acc
                    .iter()
                    .flat_map(|&a| single.iter().map(move |&p| a * p))
                    .collect();
            }
            row.copy_from_slice(&acc);
        });
    TransitionMatrix::new(states, entries, MatrixMode::ProductForm)
}

/// Joint matrix estimated by pushing `samples_per_state` channel draws through
/// the actual BARS slot dynamics from every joint state. Row `j` uses the
/// stream `derive_seed(seed, j)`, so the result does not depend on thread
/// scheduling.
pub fn joint_matrix_mc<F: Real>(
    params: &SystemParams<F>,
    samples_per_state: u64,
    seed: u64,
    cap: usize,
) -> Result<TransitionMatrix<F>> {
    if samples_per_state == 0 {
        return Err(Error::InvalidParameter {
            name: "samples_per_state",
            reason: "must be >= 1".into(),
        });
    }
    let states = joint_state_count(params, cap)?;
    let radix = params.states_per_relay();
    let n = params.n_relays();
    let inv = F::one() / F::of(samples_per_state as f64);

    let mut entries = vec![F::zero(); states * states];
    entries
        .par_chunks_mut(states)
        .enumerate()
        .try_for_each(|(j, row)| -> Result<()> {
            let start: Vec<BatteryLevel> = JointState::from_index(j, n, radix)
                .levels
                .into_iter()
                .map(BatteryLevel::from_index)
                .collect();
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, j as u64));
            let mut draw = ChannelDraw::zeros(n);
            let mut levels = start.clone();
            let mut counts = vec![0u64; states];
            for _ in 0..samples_per_state {
                levels.copy_from_slice(&start);
                sample_channels_into(params, &mut rng, &mut draw);
                step_into(&mut levels, &draw, Policy::Bars, params, &mut rng)?;
                let k = levels.iter().fold(0, |acc, l| acc * radix + l.index());
                counts[k] += 1;
            }
            for (cell, c) in row.iter_mut().zip(counts) {
                *cell = F::of(c as f64) * inv;
            }
            Ok(())
        })?;
    TransitionMatrix::new(states, entries, MatrixMode::McJoint)
}
