//! Built-in named scenarios.
//!
//! Abilene numbering (1-based, as used in node names):
//! 1 Seattle, 2 Sunnyvale, 3 Los Angeles, 4 Denver, 5 Kansas City,
//! 6 Houston, 7 Chicago, 8 Indianapolis, 9 Atlanta, 10 Washington,
//! 11 New York. Sources are nodes 1–4 and destinations are drawn from 7–11.
//! The numbering is an assumption: the map does not print node indices.

use crate::error::{Error, Result};
use crate::model::{
    DestinationSet, FunctionSpec, LinkSpec, NodeSpec, ScenarioConfig, ServiceSpec, StreamSpec,
};
use crate::policy::PolicyParams;

pub const NAMES: &[&str] = &["abilene", "y-network", "chain2", "single"];

/// Resolves a built-in scenario by name.
pub fn by_name(name: &str) -> Result<ScenarioConfig> {
    match name {
        "abilene" => Ok(abilene()),
        "y-network" => Ok(y_network(10.0)),
        "chain2" => Ok(chain2()),
        "single" => Ok(single()),
        _ => Err(Error::UnknownName {
            kind: "scenario",
            name: name.to_string(),
        }),
    }
}

pub fn describe(name: &str) -> &'static str {
    match name {
        "abilene" => "11-node Abilene backbone, 2 services, 10 two-node destination sets, 80 streams",
        "y-network" => "s - p - {d1, d2} with 10 packets/slot arcs and a pass-through service",
        "chain2" => "two nodes joined by a bidirectional link, one service, D = 2",
        "single" => "one node, no links, one service processed and delivered in place",
        _ => "",
    }
}

const ABILENE_CITIES: [&str; 11] = [
    "Seattle",
    "Sunnyvale",
    "LosAngeles",
    "Denver",
    "KansasCity",
    "Houston",
    "Chicago",
    "Indianapolis",
    "Atlanta",
    "Washington",
    "NewYork",
];

/// Undirected Abilene links by 1-based node number.
const ABILENE_LINKS: [(usize, usize); 14] = [
    (1, 2),
    (1, 4),
    (2, 3),
    (2, 4),
    (3, 6),
    (4, 5),
    (5, 6),
    (5, 8),
    (6, 9),
    (7, 8),
    (7, 11),
    (8, 9),
    (9, 10),
    (10, 11),
];

fn abilene_name(n: usize) -> String {
    format!("{}-{}", n, ABILENE_CITIES[n - 1])
}

pub fn abilene() -> ScenarioConfig {
    let nodes = (1..=11)
        .map(|n| NodeSpec {
            name: abilene_name(n),
            cpus: 20.0,
            cost_per_cpu_s: 0.5,
        })
        .collect();
    let links = ABILENE_LINKS
        .iter()
        .map(|&(a, b)| LinkSpec {
            from: abilene_name(a),
            to: abilene_name(b),
            gbps: 10.0,
            cost_per_gb: 1.0,
            bidirectional: true,
        })
        .collect();
    let services = vec![
        ServiceSpec {
            name: "phi1".into(),
            functions: vec![
                FunctionSpec {
                    scaling: 1.0,
                    mbps_per_cpu: 300.0,
                },
                FunctionSpec {
                    scaling: 2.0,
                    mbps_per_cpu: 400.0,
                },
            ],
        },
        ServiceSpec {
            name: "phi2".into(),
            functions: vec![
                FunctionSpec {
                    scaling: 1.0 / 3.0,
                    mbps_per_cpu: 200.0,
                },
                FunctionSpec {
                    scaling: 0.5,
                    mbps_per_cpu: 100.0,
                },
            ],
        },
    ];
    let mut dest_sets = Vec::new();
    for a in 7..=11 {
        for b in a + 1..=11 {
            dest_sets.push(DestinationSet {
                name: format!("{{{a},{b}}}"),
                members: vec![abilene_name(a), abilene_name(b)],
            });
        }
    }
    let streams = vec![StreamSpec {
        sources: (1..=4).map(abilene_name).collect(),
        services: vec!["phi1".into(), "phi2".into()],
        dest_sets: dest_sets.iter().map(|d| d.name.clone()).collect(),
    }];
    ScenarioConfig {
        name: "abilene".into(),
        slot_ms: 1.0,
        packet_kb: 1.0,
        nodes,
        links,
        services,
        dest_sets,
        streams,
        arrival_mbps: 20.0,
        policy: PolicyParams::default(),
        horizon_slots: 200_000,
        seed: 1,
    }
}

/// Pass-through service on a Y: one source, one relay, two destinations.
/// Arc capacity is `kappa` packets per slot (1 ms slots, 1 kb packets).
/// Arcs run both ways so a remainder copy left at one destination can go
/// back through the relay; with one-way arcs it would be stranded there.
pub fn y_network(kappa: f64) -> ScenarioConfig {
    let node = |name: &str| NodeSpec {
        name: name.into(),
        cpus: 1000.0,
        cost_per_cpu_s: 0.0,
    };
    let arc = |from: &str, to: &str| LinkSpec {
        from: from.into(),
        to: to.into(),
        gbps: kappa * 1e-3,
        cost_per_gb: 1.0,
        bidirectional: true,
    };
    ScenarioConfig {
        name: "y-network".into(),
        slot_ms: 1.0,
        packet_kb: 1.0,
        nodes: vec![node("s"), node("p"), node("d1"), node("d2")],
        links: vec![arc("s", "p"), arc("p", "d1"), arc("p", "d2")],
        services: vec![ServiceSpec {
            name: "relay".into(),
            functions: vec![FunctionSpec {
                scaling: 1.0,
                mbps_per_cpu: 1000.0,
            }],
        }],
        dest_sets: vec![DestinationSet {
            name: "{d1,d2}".into(),
            members: vec!["d1".into(), "d2".into()],
        }],
        streams: vec![StreamSpec {
            sources: vec!["s".into()],
            services: vec!["relay".into()],
            dest_sets: vec!["{d1,d2}".into()],
        }],
        arrival_mbps: 0.5 * kappa,
        policy: PolicyParams::default(),
        horizon_slots: 50_000,
        seed: 1,
    }
}

/// Two nodes `a`, `b` joined by a bidirectional link; destinations `{a, b}`.
pub fn chain2() -> ScenarioConfig {
    ScenarioConfig {
        name: "chain2".into(),
        slot_ms: 1.0,
        packet_kb: 1.0,
        nodes: vec![
            NodeSpec {
                name: "a".into(),
                cpus: 2.0,
                cost_per_cpu_s: 0.5,
            },
            NodeSpec {
                name: "b".into(),
                cpus: 4.0,
                cost_per_cpu_s: 0.5,
            },
        ],
        links: vec![LinkSpec {
            from: "a".into(),
            to: "b".into(),
            gbps: 0.02,
            cost_per_gb: 1.0,
            bidirectional: true,
        }],
        services: vec![ServiceSpec {
            name: "f".into(),
            functions: vec![FunctionSpec {
                scaling: 2.0,
                mbps_per_cpu: 5.0,
            }],
        }],
        dest_sets: vec![DestinationSet {
            name: "{a,b}".into(),
            members: vec!["a".into(), "b".into()],
        }],
        streams: vec![StreamSpec {
            sources: vec!["a".into()],
            services: vec!["f".into()],
            dest_sets: vec!["{a,b}".into()],
        }],
        arrival_mbps: 3.0,
        policy: PolicyParams::default(),
        horizon_slots: 20_000,
        seed: 1,
    }
}

pub fn single() -> ScenarioConfig {
    ScenarioConfig {
        name: "single".into(),
        slot_ms: 1.0,
        packet_kb: 1.0,
        nodes: vec![NodeSpec {
            name: "a".into(),
            cpus: 1.0,
            cost_per_cpu_s: 1.0,
        }],
        links: vec![],
        services: vec![ServiceSpec {
            name: "f".into(),
            functions: vec![FunctionSpec {
                scaling: 1.0,
                mbps_per_cpu: 10.0,
            }],
        }],
        dest_sets: vec![DestinationSet {
            name: "{a}".into(),
            members: vec!["a".into()],
        }],
        streams: vec![StreamSpec {
            sources: vec!["a".into()],
            services: vec!["f".into()],
            dest_sets: vec!["{a}".into()],
        }],
        arrival_mbps: 5.0,
        policy: PolicyParams::default(),
        horizon_slots: 10_000,
        seed: 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_network;

    #[test]
    fn all_builtins_build() {
        for name in NAMES {
            let cfg = by_name(name).unwrap();
            build_network::<f64>(&cfg).unwrap();
            build_network::<f32>(&cfg).unwrap();
        }
        assert!(by_name("nope").is_err());
    }

    #[test]
    fn abilene_streams() {
        let m = build_network::<f64>(&abilene()).unwrap();
        assert_eq!(m.streams.len(), 80);
        assert_eq!(m.dest_sets.len(), 10);
        assert_eq!(m.sources(), vec![0, 1, 2, 3]);
    }

    #[test]
    fn toml_roundtrip() {
        let cfg = abilene();
        let text = cfg.to_toml_string();
        assert_eq!(ScenarioConfig::from_toml_str(&text).unwrap(), cfg);
    }
}
