#![allow(dead_code)]

use mcsc::model::{DestinationSet, FunctionSpec, LinkSpec, NodeSpec, ScenarioConfig, ServiceSpec, StreamSpec};
use mcsc::policy::PolicyParams;
use proptest::prelude::*;

/// Shape of a random small scenario.
#[derive(Debug, Clone)]
pub struct Small {
    pub nodes: usize,
    pub cpus: Vec<f64>,
    pub link_mbps: Vec<f64>,
    pub functions: Vec<(f64, f64)>,
    pub two_dests: bool,
    pub arrival_mbps: f64,
}

pub fn small_scenario() -> impl Strategy<Value = Small> {
    (2usize..=3)
        .prop_flat_map(|n| {
            (
                Just(n),
                prop::collection::vec(0.5f64..4.0, n),
                prop::collection::vec(2.0f64..40.0, n),
                prop::collection::vec((prop::sample::select(vec![0.5, 1.0, 2.0]), 2.0f64..20.0), 1..=2),
                any::<bool>(),
                0.0f64..6.0,
            )
        })
        .prop_map(|(nodes, cpus, link_mbps, functions, two_dests, arrival_mbps)| Small {
            nodes,
            cpus,
            link_mbps,
            functions,
            two_dests,
            arrival_mbps,
        })
}

fn name(i: usize) -> String {
    format!("n{i}")
}

/// A line (or triangle for three nodes) of bidirectional links, one service
/// from `n0` to the last node (and `n1` when two destinations are used).
pub fn config(s: &Small) -> ScenarioConfig {
    let nodes = (0..s.nodes)
        .map(|i| NodeSpec {
            name: name(i),
            cpus: s.cpus[i],
            cost_per_cpu_s: 0.5,
        })
        .collect();
    let mut pairs: Vec<(usize, usize)> = (1..s.nodes).map(|i| (i - 1, i)).collect();
    if s.nodes == 3 {
        pairs.push((0, 2));
    }
    let links = pairs
        .iter()
        .zip(&s.link_mbps)
        .map(|(&(a, b), &mbps)| LinkSpec {
            from: name(a),
            to: name(b),
            gbps: mbps * 1e-3,
            cost_per_gb: 1.0,
            bidirectional: true,
        })
        .collect();
    let mut members = vec![name(s.nodes - 1)];
    if s.two_dests {
        members.insert(0, name(1.min(s.nodes - 2).max(0)));
        if members[0] == members[1] {
            members[0] = name(0);
        }
    }
    ScenarioConfig {
        name: "random".into(),
        slot_ms: 1.0,
        packet_kb: 1.0,
        nodes,
        links,
        services: vec![ServiceSpec {
            name: "f".into(),
            functions: s
                .functions
                .iter()
                .map(|&(scaling, mbps_per_cpu)| FunctionSpec { scaling, mbps_per_cpu })
                .collect(),
        }],
        dest_sets: vec![DestinationSet {
            name: "D".into(),
            members,
        }],
        streams: vec![StreamSpec {
            sources: vec![name(0)],
            services: vec!["f".into()],
            dest_sets: vec!["D".into()],
        }],
        arrival_mbps: s.arrival_mbps,
        policy: PolicyParams::default(),
        horizon_slots: 1000,
        seed: 1,
    }
}

/// Deterministic counterpart of [`small_scenario`] for seeded loops.
pub fn random_small<R: rand::Rng>(rng: &mut R) -> Small {
    let nodes = rng.random_range(2..=3);
    let stages = rng.random_range(1..=2);
    Small {
        nodes,
        cpus: (0..nodes).map(|_| rng.random_range(0.5..4.0)).collect(),
        link_mbps: (0..nodes).map(|_| rng.random_range(2.0..40.0)).collect(),
        functions: (0..stages)
            .map(|_| ([0.5, 1.0, 2.0][rng.random_range(0..3)], rng.random_range(2.0..20.0)))
            .collect(),
        two_dests: rng.random_bool(0.7),
        arrival_mbps: rng.random_range(0.0..6.0),
    }
}
