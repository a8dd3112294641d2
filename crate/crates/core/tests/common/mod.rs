//! Shared synthetic fixtures for the integration and acceptance suites.

use lrdetect::grid::{Branch, Bus, BusType, Generator, GridCase, LoadPoint};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Clustered transmission grid: `n_clusters` rings of `cluster_size` buses
/// chained by tie branches, one load per bus. Bus ids run sequentially
/// through the clusters, so load indices form contiguous per-cluster
/// blocks.
pub struct ClusterSpec {
    pub n_clusters: usize,
    pub cluster_size: usize,
    pub ring_rate: f64,
    pub tie_rate: f64,
    pub load_seed: u64,
    /// (bus id, p_min, p_max, cost); the generator at bus 1 is the slack.
    pub generators: Vec<(usize, f64, f64, f64)>,
}

pub fn clustered_case(spec: &ClusterSpec) -> GridCase {
    let n = spec.n_clusters * spec.cluster_size;
    let mut rng = ChaCha12Rng::seed_from_u64(spec.load_seed);
    let buses = (1..=n)
        .map(|id| Bus {
            id,
            bus_type: if id == 1 { BusType::Slack } else { BusType::Pq },
        })
        .collect();
    let mut branches = Vec::new();
    for c in 0..spec.n_clusters {
        let first = c * spec.cluster_size + 1;
        let last = (c + 1) * spec.cluster_size;
        for b in first..last {
            branches.push(Branch {
                from_bus: b,
                to_bus: b + 1,
                reactance: 0.08 + 0.01 * ((b % 5) as f64),
                rate_a: spec.ring_rate,
                in_service: true,
            });
        }
        if spec.cluster_size > 2 {
            branches.push(Branch {
                from_bus: last,
                to_bus: first,
                reactance: 0.1,
                rate_a: spec.ring_rate,
                in_service: true,
            });
        }
        if c + 1 < spec.n_clusters {
            branches.push(Branch {
                from_bus: last,
                to_bus: last + 1,
                reactance: 0.12,
                rate_a: spec.tie_rate,
                in_service: true,
            });
        }
    }
    let loads = (0..n)
        .map(|i| LoadPoint {
            index: i,
            bus: i + 1,
            base_mw: rng.random_range(30.0..120.0),
        })
        .collect();
    let generators = spec
        .generators
        .iter()
        .map(|&(bus, p_min, p_max, cost_linear)| Generator { bus, p_min, p_max, cost_linear })
        .collect();
    GridCase {
        base_mva: 100.0,
        buses,
        branches,
        generators,
        loads,
        slack_bus: 1,
    }
    .validated()
    .expect("clustered case is valid")
}

/// Ring-plus-chords meshed case for DC kernel checks.
pub fn meshed_case(n_buses: usize, seed: u64) -> GridCase {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let buses = (1..=n_buses)
        .map(|id| Bus {
            id,
            bus_type: if id == 1 { BusType::Slack } else { BusType::Pq },
        })
        .collect();
    let mut branches: Vec<Branch> = (1..=n_buses)
        .map(|b| Branch {
            from_bus: b,
            to_bus: if b == n_buses { 1 } else { b + 1 },
            reactance: rng.random_range(0.05..0.25),
            rate_a: 200.0,
            in_service: true,
        })
        .collect();
    for _ in 0..n_buses / 2 {
        let from = rng.random_range(1..=n_buses);
        let hop = rng.random_range(2..n_buses / 2 + 2);
        let to = (from + hop - 1) % n_buses + 1;
        if from != to {
            branches.push(Branch {
                from_bus: from,
                to_bus: to,
                reactance: rng.random_range(0.05..0.25),
                rate_a: 200.0,
                in_service: true,
            });
        }
    }
    let loads = (0..n_buses)
        .map(|i| LoadPoint {
            index: i,
            bus: i + 1,
            base_mw: rng.random_range(10.0..60.0),
        })
        .collect();
    let total: f64 = 35.0 * n_buses as f64;
    let generators = vec![
        Generator { bus: 1, p_min: 0.0, p_max: 2.0 * total, cost_linear: 1.0 },
        Generator { bus: n_buses / 3 + 1, p_min: 0.0, p_max: total, cost_linear: 3.0 },
        Generator { bus: 2 * n_buses / 3 + 1, p_min: 0.0, p_max: total, cost_linear: 6.0 },
    ];
    GridCase {
        base_mva: 100.0,
        buses,
        branches,
        generators,
        loads,
        slack_bus: 1,
    }
    .validated()
    .expect("meshed case is valid")
}

/// Balanced random injection vector (sums to zero) in case bus order.
pub fn balanced_injections(n_buses: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let mut inj: Vec<f64> = (0..n_buses).map(|_| rng.random_range(-80.0..80.0)).collect();
    let mean = inj.iter().sum::<f64>() / n_buses as f64;
    for v in inj.iter_mut() {
        *v -= mean;
    }
    inj
}
