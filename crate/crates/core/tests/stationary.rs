//! Long-run behaviour of the simulator against the battery chains.

use ehrelay::dtmc::{
    joint_matrix_mc, joint_matrix_product_form, marginal_product_outage, outage_probability,
    per_relay_matrix, steady_state, DEFAULT_STATE_CAP,
};
use ehrelay::simulator::{run_replicated, run_with_occupancy, Trajectory};
use ehrelay::{BatteryLevel, Config, Params, Policy};

const SLOTS: u64 = 1_000_000;
const WARMUP: u64 = 10_000;
const BATCHES: usize = 100;

fn params(n: usize) -> Params {
    Params::builder()
        .relays(n)
        .levels(1)
        .snr_db(10.0)
        .build()
        .unwrap()
}

/// Per-state occupancy frequencies and their batch-means standard errors
/// from one trajectory.
fn occupancy(p: &Params, seed: u64) -> (Vec<f64>, Vec<f64>, Vec<u64>) {
    let radix = p.states_per_relay();
    let states = radix.pow(p.n_relays() as u32);
    let full = vec![BatteryLevel::full(p.bounds()); p.n_relays()];
    let mut traj = Trajectory::new(p.clone(), Policy::Bars, &full, seed).unwrap();
    for _ in 0..WARMUP {
        traj.advance().unwrap();
    }
    let per_batch = (SLOTS - WARMUP) as usize / BATCHES;
    let mut batches = vec![vec![0u64; states]; BATCHES];
    let mut totals = vec![0u64; states];
    for batch in batches.iter_mut() {
        for _ in 0..per_batch {
            let idx = traj
                .levels()
                .iter()
                .fold(0, |acc, l| acc * radix + l.index());
            batch[idx] += 1;
            totals[idx] += 1;
            traj.advance().unwrap();
        }
    }
    let n = (per_batch * BATCHES) as f64;
    let freq: Vec<f64> = totals.iter().map(|&c| c as f64 / n).collect();
    let se = (0..states)
        .map(|s| {
            let var = batches
                .iter()
                .map(|b| (b[s] as f64 / per_batch as f64 - freq[s]).powi(2))
                .sum::<f64>()
                / (BATCHES - 1) as f64;
            (var / BATCHES as f64).sqrt()
        })
        .collect();
    (freq, se, totals)
}

#[test]
fn single_relay_occupancy_matches_chain() {
    let p = params(1);
    let pi = steady_state(&per_relay_matrix(0, &p).unwrap(), 1e-12)
        .unwrap()
        .pi;
    let (freq, se, _) = occupancy(&p, 17);
    for s in 0..3 {
        assert!(
            (freq[s] - pi[s]).abs() <= 3.0 * se[s],
            "state {s}: {} vs {} (se {})",
            freq[s],
            pi[s],
            se[s]
        );
    }
}

#[test]
fn two_relay_occupancy_matches_sampled_chain() {
    let p = params(2);
    // two independent sampled chains give a scale for the chain's own error
    let a = steady_state(
        &joint_matrix_mc(&p, 1_000_000, 1, DEFAULT_STATE_CAP).unwrap(),
        1e-12,
    )
    .unwrap()
    .pi;
    let b = steady_state(
        &joint_matrix_mc(&p, 1_000_000, 2, DEFAULT_STATE_CAP).unwrap(),
        1e-12,
    )
    .unwrap()
    .pi;
    let (freq, se, _) = occupancy(&p, 23);
    for s in 0..9 {
        let chain_se = (a[s] - b[s]).abs() / 2f64.sqrt();
        let sigma = (se[s].powi(2) + chain_se.powi(2)).sqrt();
        assert!(
            (freq[s] - a[s]).abs() <= 3.0 * sigma + 1e-12,
            "state {s}: {} vs {} (sigma {sigma})",
            freq[s],
            a[s]
        );
    }
    // the product form ignores the coupling through selection and is visibly off
    let product = steady_state(
        &joint_matrix_product_form(&p, DEFAULT_STATE_CAP).unwrap(),
        1e-12,
    )
    .unwrap()
    .pi;
    let gap = (0..9)
        .map(|s| (product[s] - freq[s]).abs())
        .fold(0.0, f64::max);
    assert!(gap > 0.01, "product form unexpectedly matches: {gap}");
}

#[test]
fn occupancy_run_counts_the_same_path() {
    let p = params(2);
    let config = Config::new(p.clone(), Policy::Bars)
        .slots(SLOTS)
        .warmup(WARMUP)
        .seed(23);
    let (est, counts) = run_with_occupancy(&config, DEFAULT_STATE_CAP).unwrap();
    let (_, _, totals) = occupancy(&p, 23);
    assert_eq!(counts, totals);
    assert_eq!(counts.iter().sum::<u64>(), est.counted_slots);
    assert!(run_with_occupancy(&config, 8).is_err());
}

#[test]
fn disjoint_seed_sets_agree() {
    let p = Params::builder()
        .relays(2)
        .levels(4)
        .snr_db(15.0)
        .build()
        .unwrap();
    let config = Config::new(p, Policy::Bars).slots(250_000).warmup(WARMUP);
    let a = run_replicated(&config.clone().seed(1000), 4).unwrap();
    let b = run_replicated(&config.seed(2000), 4).unwrap();
    assert_eq!(a.counted_slots, 4 * (250_000 - WARMUP));
    assert!(
        (a.p_out - b.p_out).abs() <= a.half_width() + b.half_width(),
        "{a} vs {b}"
    );
}

#[test]
fn single_relay_modes_coincide() {
    for levels in [1, 3, 6] {
        let p = Params::builder()
            .relays(1)
            .levels(levels)
            .snr_db(12.0)
            .kappa(0.7)
            .build()
            .unwrap();
        let per_relay = steady_state(&per_relay_matrix(0, &p).unwrap(), 1e-12).unwrap();
        let exact = outage_probability(&per_relay, &p).unwrap();
        let product = outage_probability(
            &steady_state(
                &joint_matrix_product_form(&p, DEFAULT_STATE_CAP).unwrap(),
                1e-12,
            )
            .unwrap(),
            &p,
        )
        .unwrap();
        let marginal = marginal_product_outage(&p).unwrap();
        let sampled = outage_probability(
            &steady_state(
                &joint_matrix_mc(&p, 200_000, 5, DEFAULT_STATE_CAP).unwrap(),
                1e-12,
            )
            .unwrap(),
            &p,
        )
        .unwrap();
        assert!((exact - product).abs() < 1e-12);
        assert!((exact - marginal).abs() < 1e-12);
        assert!(
            (exact - sampled).abs() < 5e-3,
            "L={levels}: {exact} vs sampled {sampled}"
        );
    }
}
