//! Per-slot decision making.
//!
//! The max-weight drift-plus-penalty rule scores every `(c, q, s)` tuple on
//! every interface against the start-of-slot backlog and runs the best tuple
//! at full capacity when its weight is strictly positive. Each interface
//! only reads queues at its own node and, for links, at the link head.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NetworkModel;
use crate::queueing::{Decision, FlowAssignment, Interface, QueueTable, TupleKey};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Max-weight with duplication.
    #[default]
    #[serde(alias = "ldp-multicast")]
    Multicast,
    /// Separate unicast flows per destination, no duplication.
    #[serde(alias = "ldp-unicast-baseline")]
    Unicast,
    /// Stationary randomized selection.
    Randomized,
}

impl PolicyKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyKind::Multicast => "multicast",
            PolicyKind::Unicast => "unicast",
            PolicyKind::Randomized => "randomized",
        }
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "multicast" | "ldp-multicast" => Ok(PolicyKind::Multicast),
            "unicast" | "ldp-unicast-baseline" => Ok(PolicyKind::Unicast),
            "randomized" => Ok(PolicyKind::Randomized),
            _ => Err(Error::UnknownName {
                kind: "policy",
                name: s.to_string(),
            }),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicyParams {
    #[serde(default)]
    pub kind: PolicyKind,
    /// Cost weight `V ≥ 0`.
    #[serde(default)]
    pub v: f64,
}

impl Default for PolicyParams {
    fn default() -> Self {
        Self {
            kind: PolicyKind::Multicast,
            v: 0.0,
        }
    }
}

impl PolicyParams {
    pub fn new(kind: PolicyKind, v: f64) -> Result<Self> {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::Negative {
                what: "V".into(),
                value: v,
            });
        }
        Ok(Self { kind, v })
    }

    fn allows_split(&self) -> bool {
        self.kind != PolicyKind::Unicast
    }
}

// ---------------------------------------------------------------------------
// Weights

/// Processing weight of `(c, q, s)` at node `node`:
/// `[Q(c,q) − Q(c,q−s) − ξ·Q(c',s)] / r − V·e_i`.
pub fn processing_weight<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    node: usize,
    key: TupleKey,
    v: T,
) -> Result<T> {
    check_tuple(model, key)?;
    let content = &model.contents[key.content];
    let (Some(next), Some(f)) = (content.next, model.function(key.content)) else {
        return Err(Error::InvalidDecision {
            interface: format!("processor {}", model.nodes[node].name),
            reason: "final-stage content is not processed".into(),
        });
    };
    Ok(proc_weight_raw(model, queues, node, key, next, f.scaling, f.workload, v))
}

/// Transmission weight of `(c, q, s)` on link `link`:
/// `Q_i(c,q) − Q_i(c,q−s) − Q_j(c,s) − V·e_ij`.
pub fn transmission_weight<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    link: usize,
    key: TupleKey,
    v: T,
) -> Result<T> {
    check_tuple(model, key)?;
    let l = &model.links[link];
    Ok(link_weight_raw(model, queues, l.src, l.dst, key, v * l.cost))
}

fn check_tuple<T: Scalar>(model: &NetworkModel<T>, key: TupleKey) -> Result<()> {
    let ok = model
        .contents
        .get(key.content)
        .is_some_and(|c| key.q != 0 && key.q <= crate::model::full_mask(c.width))
        && key.s != 0
        && key.s & !key.q == 0;
    if ok {
        Ok(())
    } else {
        Err(Error::InvalidDecision {
            interface: "weight".into(),
            reason: format!("invalid tuple {key:?}"),
        })
    }
}

#[inline]
#[allow(clippy::too_many_arguments)]
fn proc_weight_raw<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    node: usize,
    key: TupleKey,
    next: usize,
    scaling: T,
    workload: T,
    v: T,
) -> T {
    let TupleKey { content, q, s } = key;
    let diff = queues.effective(model, node, content, q)
        - queues.effective(model, node, content, q & !s)
        - scaling * queues.effective(model, node, next, s);
    diff / workload - v * model.nodes[node].cost
}

#[inline]
fn link_weight_raw<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    src: usize,
    dst: usize,
    key: TupleKey,
    penalty: T,
) -> T {
    let TupleKey { content, q, s } = key;
    queues.effective(model, src, content, q)
        - queues.effective(model, src, content, q & !s)
        - queues.effective(model, dst, content, s)
        - penalty
}

/// Every scored tuple of one interface with its weight.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable<T> {
    pub interface: Interface,
    pub entries: Vec<(TupleKey, T)>,
}

/// Full weight table for an interface (debugging and dumps).
pub fn weight_table<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    params: &PolicyParams,
    interface: Interface,
) -> WeightTable<T> {
    let v = T::lit(params.v);
    let mut entries = Vec::new();
    for (c, content) in model.contents.iter().enumerate() {
        for &(q, s) in model.splits(content.width) {
            if !params.allows_split() && s != q {
                continue;
            }
            let key = TupleKey { content: c, q, s };
            let w = match interface {
                Interface::Processing(i) => {
                    let (Some(next), Some(f)) = (content.next, model.function(c)) else {
                        break;
                    };
                    proc_weight_raw(model, queues, i, key, next, f.scaling, f.workload, v)
                }
                Interface::Transmission(l) => {
                    let link = &model.links[l];
                    link_weight_raw(model, queues, link.src, link.dst, key, v * link.cost)
                }
            };
            entries.push((key, w));
        }
    }
    WeightTable { interface, entries }
}

/// Number of weight evaluations a node performs per slot: processable
/// contents times their splits, plus every content's splits per out-link.
pub fn weight_evaluations<T: Scalar>(model: &NetworkModel<T>, node: usize) -> usize {
    let pairs = |w: usize| model.splits(w).len();
    let proc: usize = model
        .contents
        .iter()
        .filter(|c| !c.is_final())
        .map(|c| pairs(c.width))
        .sum();
    let per_link: usize = model.contents.iter().map(|c| pairs(c.width)).sum();
    proc + model.out_links[node].len() * per_link
}

/// Max-weight selection with lexicographic tie-break on `(c, q, s)`.
/// Returns a full-capacity decision when the best weight is strictly
/// positive, otherwise `None`.
pub fn select_max_weight<T: Scalar>(
    entries: impl IntoIterator<Item = (TupleKey, T)>,
    capacity: impl Fn(TupleKey) -> T,
) -> Option<Decision<T>> {
    let mut best: Option<(TupleKey, T)> = None;
    for (key, w) in entries {
        best = match best {
            Some((bk, bw)) if bw > w || (bw == w && bk <= key) => Some((bk, bw)),
            _ => Some((key, w)),
        };
    }
    let (key, weight) = best?;
    if !(weight > T::zero()) {
        return None;
    }
    let amount = capacity(key);
    (amount > T::zero()).then_some(Decision { key, amount, weight })
}

// ---------------------------------------------------------------------------
// Policies

/// Independent max-weight decision on every interface.
pub fn ldp_decide<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    params: &PolicyParams,
) -> FlowAssignment<T> {
    let mut fa = FlowAssignment::idle(model);
    for i in 0..model.node_count() {
        fa.processing[i] = decide_processing(model, queues, params, i);
    }
    for l in 0..model.links.len() {
        fa.transmission[l] = decide_link(model, queues, params, l);
    }
    fa
}

/// Same decision as [`ldp_decide`], evaluated across interfaces in parallel.
pub fn ldp_decide_par<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    params: &PolicyParams,
) -> FlowAssignment<T> {
    use rayon::prelude::*;
    let processing = (0..model.node_count())
        .into_par_iter()
        .map(|i| decide_processing(model, queues, params, i))
        .collect();
    let transmission = (0..model.links.len())
        .into_par_iter()
        .map(|l| decide_link(model, queues, params, l))
        .collect();
    FlowAssignment {
        processing,
        transmission,
    }
}

/// Max-weight with duplication disabled (`s = q` only). Arrivals must
/// already be expanded into per-destination unit statuses.
pub fn unicast_baseline_decide<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    params: &PolicyParams,
) -> FlowAssignment<T> {
    let params = PolicyParams {
        kind: PolicyKind::Unicast,
        v: params.v,
    };
    ldp_decide(model, queues, &params)
}

fn decide_processing<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    params: &PolicyParams,
    i: usize,
) -> Option<Decision<T>> {
    let v = T::lit(params.v);
    let row = queues.row(i);
    let mut best: Option<(TupleKey, T)> = None;
    for (c, content) in model.contents.iter().enumerate() {
        let (Some(next), Some(f)) = (content.next, model.function(c)) else {
            continue;
        };
        if model.processing_capacity(i, c) <= T::zero() {
            continue;
        }
        let block = &row[content.offset..content.offset + (1usize << content.width)];
        for &(q, s) in model.splits(content.width) {
            if !params.allows_split() && s != q {
                continue;
            }
            // Q(c,q) = 0 gives a non-positive weight
            if !(block[q as usize] > T::zero()) {
                continue;
            }
            let key = TupleKey { content: c, q, s };
            let w = proc_weight_raw(model, queues, i, key, next, f.scaling, f.workload, v);
            if best.is_none_or(|(bk, bw)| w > bw || (w == bw && key < bk)) {
                best = Some((key, w));
            }
        }
    }
    let (key, weight) = best?;
    (weight > T::zero()).then(|| Decision {
        key,
        amount: model.processing_capacity(i, key.content),
        weight,
    })
}

fn decide_link<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    params: &PolicyParams,
    l: usize,
) -> Option<Decision<T>> {
    let link = &model.links[l];
    if link.capacity <= T::zero() {
        return None;
    }
    let penalty = T::lit(params.v) * link.cost;
    let row = queues.row(link.src);
    let mut best: Option<(TupleKey, T)> = None;
    for (c, content) in model.contents.iter().enumerate() {
        let block = &row[content.offset..content.offset + (1usize << content.width)];
        for &(q, s) in model.splits(content.width) {
            if !params.allows_split() && s != q {
                continue;
            }
            if !(block[q as usize] > T::zero()) {
                continue;
            }
            let key = TupleKey { content: c, q, s };
            let w = link_weight_raw(model, queues, link.src, link.dst, key, penalty);
            if best.is_none_or(|(bk, bw)| w > bw || (w == bw && key < bk)) {
                best = Some((key, w));
            }
        }
    }
    let (key, weight) = best?;
    (weight > T::zero()).then_some(Decision {
        key,
        amount: link.capacity,
        weight,
    })
}

// ---------------------------------------------------------------------------
// Stationary randomized policy

/// Probability mass over tuples per interface; the remainder is idle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomizedPolicySpec {
    pub processing: Vec<Vec<(TupleKey, f64)>>,
    pub transmission: Vec<Vec<(TupleKey, f64)>>,
}

impl Serialize for TupleKey {
    fn serialize<S: serde::Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        (self.content, self.q, self.s).serialize(ser)
    }
}

impl<'de> Deserialize<'de> for TupleKey {
    fn deserialize<D: serde::Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let (content, q, s) = <(usize, u16, u16)>::deserialize(de)?;
        Ok(TupleKey { content, q, s })
    }
}

impl RandomizedPolicySpec {
    pub fn all_idle<T: Scalar>(model: &NetworkModel<T>) -> Self {
        Self {
            processing: vec![Vec::new(); model.node_count()],
            transmission: vec![Vec::new(); model.links.len()],
        }
    }

    /// Splits the whole mass evenly over every admissible tuple of every
    /// interface.
    pub fn uniform<T: Scalar>(model: &NetworkModel<T>, allow_split: bool) -> Self {
        let tuples = |processing: bool| -> Vec<TupleKey> {
            model
                .contents
                .iter()
                .enumerate()
                .filter(|(_, c)| !processing || !c.is_final())
                .flat_map(|(c, content)| {
                    model
                        .splits(content.width)
                        .iter()
                        .filter(move |&&(q, s)| allow_split || q == s)
                        .map(move |&(q, s)| TupleKey { content: c, q, s })
                })
                .collect()
        };
        let spread = |keys: Vec<TupleKey>| {
            let p = 1.0 / keys.len().max(1) as f64;
            keys.into_iter().map(|k| (k, p)).collect::<Vec<_>>()
        };
        Self {
            processing: vec![spread(tuples(true)); model.node_count()],
            transmission: vec![spread(tuples(false)); model.links.len()],
        }
    }

    pub fn validate<T: Scalar>(&self, model: &NetworkModel<T>) -> Result<()> {
        if self.processing.len() != model.node_count() || self.transmission.len() != model.links.len() {
            return Err(Error::InvalidScenario(
                "randomized policy does not cover every interface".into(),
            ));
        }
        let ifaces = self
            .processing
            .iter()
            .enumerate()
            .map(|(i, m)| (Interface::Processing(i), m))
            .chain(
                self.transmission
                    .iter()
                    .enumerate()
                    .map(|(l, m)| (Interface::Transmission(l), m)),
            );
        for (iface, masses) in ifaces {
            let mut sum = 0.0;
            for &(key, p) in masses {
                if !(p >= 0.0) {
                    return Err(Error::Negative {
                        what: format!("probability on {}", iface.describe(model)),
                        value: p,
                    });
                }
                check_tuple(model, key)?;
                if matches!(iface, Interface::Processing(_)) && model.contents[key.content].is_final() {
                    return Err(Error::InvalidDecision {
                        interface: iface.describe(model),
                        reason: "final-stage content is not processed".into(),
                    });
                }
                sum += p;
            }
            if sum > 1.0 + 1e-12 {
                return Err(Error::ProbabilityMass {
                    interface: iface.describe(model),
                    sum,
                });
            }
        }
        Ok(())
    }
}

/// Samples one tuple (or idle) per interface and runs it at full capacity.
pub fn randomized_decide<T: Scalar, R: Rng + ?Sized>(
    model: &NetworkModel<T>,
    spec: &RandomizedPolicySpec,
    rng: &mut R,
) -> FlowAssignment<T> {
    fn sample<R: Rng + ?Sized>(masses: &[(TupleKey, f64)], rng: &mut R) -> Option<TupleKey> {
        if masses.is_empty() {
            return None;
        }
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for &(key, p) in masses {
            acc += p;
            if u < acc {
                return Some(key);
            }
        }
        None
    }
    let mut fa = FlowAssignment::idle(model);
    for (i, masses) in spec.processing.iter().enumerate() {
        fa.processing[i] = sample(masses, rng).map(|key| Decision {
            key,
            amount: model.processing_capacity(i, key.content),
            weight: T::zero(),
        });
    }
    for (l, masses) in spec.transmission.iter().enumerate() {
        fa.transmission[l] = sample(masses, rng).map(|key| Decision {
            key,
            amount: model.links[l].capacity,
            weight: T::zero(),
        });
    }
    fa
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_network;
    use crate::scenarios;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain() -> NetworkModel<f64> {
        build_network(&scenarios::chain2()).unwrap()
    }

    fn key(content: usize, q: u16, s: u16) -> TupleKey {
        TupleKey { content, q, s }
    }

    #[test]
    fn processing_weight_zero_backlog() {
        let m = chain();
        let q = QueueTable::zeros(&m);
        let c = m.content_id(0, 1, 0).unwrap();
        assert_eq!(processing_weight(&m, &q, 0, key(c, 3, 3), 0.0).unwrap(), 0.0);
        let w = processing_weight(&m, &q, 0, key(c, 3, 3), 2.0).unwrap();
        assert_eq!(w, -2.0 * m.nodes[0].cost);
    }

    /// Model with a tunable single function for weight hand-substitution.
    fn tuned(scaling: f64, mbps_per_cpu: f64) -> NetworkModel<f64> {
        let mut cfg = scenarios::chain2();
        cfg.services[0].functions[0].scaling = scaling;
        cfg.services[0].functions[0].mbps_per_cpu = mbps_per_cpu;
        build_network(&cfg).unwrap()
    }

    #[test]
    fn processing_weight_no_split() {
        // xi = 2, r = 0.5 CPU/packet -> 2 packets per CPU-slot = 2 Mbps/CPU
        let m = tuned(2.0, 2.0);
        let c = m.content_id(0, 1, 0).unwrap();
        let c2 = m.content_id(0, 2, 0).unwrap();
        let mut q = QueueTable::zeros(&m);
        // node b (index 1) processes; final-stage q=11 at b is destination
        // state, so use a = node 0 with status 01 (a is d_1 -> bit 10).
        q.set(&m, 0, c, 0b01, 100.0);
        q.set(&m, 0, c2, 0b01, 40.0);
        let w = processing_weight(&m, &q, 0, key(c, 0b01, 0b01), 0.0).unwrap();
        assert!((w - 40.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn processing_weight_with_split() {
        let m = tuned(1.0, 1.0);
        let c = m.content_id(0, 1, 0).unwrap();
        let c2 = m.content_id(0, 2, 0).unwrap();
        let mut q = QueueTable::zeros(&m);
        // at node b (d_2, bit 01): Q(c',10) is not destination state
        q.set(&m, 1, c, 0b11, 50.0);
        q.set(&m, 1, c, 0b01, 10.0);
        q.set(&m, 1, c2, 0b10, 20.0);
        let w = processing_weight(&m, &q, 1, key(c, 0b11, 0b10), 0.0).unwrap();
        assert!((w - 20.0).abs() < 1e-12, "{w}");
    }

    #[test]
    fn processing_weight_final_stage_rejected() {
        let m = chain();
        let q = QueueTable::zeros(&m);
        let fin = m.content_id(0, 2, 0).unwrap();
        assert!(processing_weight(&m, &q, 0, key(fin, 1, 1), 0.0).is_err());
    }

    #[test]
    fn transmission_weight_cases() {
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let q0 = QueueTable::zeros(&m);
        assert_eq!(transmission_weight(&m, &q0, 0, key(c, 3, 3), 0.0).unwrap(), 0.0);

        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, c, 0b11, 30.0);
        q.set(&m, 1, c, 0b11, 12.0);
        // V * e_ij = 5 with e_ij = 1e-6 per packet
        let v = 5.0 / m.links[0].cost;
        let w = transmission_weight(&m, &q, 0, key(c, 3, 3), v).unwrap();
        assert!((w - 13.0).abs() < 1e-9, "{w}");

        // final stage toward d_2 = b with s = b_2: Q_b term reads 0
        let fin = m.content_id(0, 2, 0).unwrap();
        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, fin, 0b01, 7.0);
        q.set(&m, 1, fin, 0b01, 99.0);
        let w = transmission_weight(&m, &q, 0, key(fin, 0b01, 0b01), 0.0).unwrap();
        assert_eq!(w, 7.0);
    }

    #[test]
    fn select_idles_on_non_positive() {
        let entries = vec![(key(0, 1, 1), -1.0), (key(1, 1, 1), 0.0)];
        assert!(select_max_weight(entries, |_| 10.0).is_none());
    }

    #[test]
    fn select_full_capacity_on_max() {
        let entries = vec![(key(0, 1, 1), 3.0), (key(1, 3, 2), 13.0), (key(2, 1, 1), 1.0)];
        let d = select_max_weight(entries, |_| 10.0).unwrap();
        assert_eq!(d.key, key(1, 3, 2));
        assert_eq!(d.amount, 10.0);
        assert_eq!(d.weight, 13.0);
    }

    #[test]
    fn select_ties_lexicographic() {
        let entries = vec![(key(2, 1, 1), 5.0), (key(1, 3, 1), 5.0), (key(1, 3, 2), 5.0)];
        assert_eq!(select_max_weight(entries, |_| 1.0).unwrap().key, key(1, 3, 1));
    }

    #[test]
    fn single_node_only_processing() {
        let m: NetworkModel<f64> = build_network(&scenarios::single()).unwrap();
        let c = m.content_id(0, 1, 0).unwrap();
        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, c, 1, 4.0);
        let fa = ldp_decide(&m, &q, &PolicyParams::default());
        assert!(fa.transmission.is_empty());
        assert_eq!(fa.processing[0].unwrap().key, key(c, 1, 1));
    }

    #[test]
    fn empty_network_empty_assignment() {
        let mut cfg = scenarios::single();
        cfg.nodes.clear();
        cfg.dest_sets.clear();
        cfg.streams.clear();
        let m: NetworkModel<f64> = build_network(&cfg).unwrap();
        let fa = ldp_decide(&m, &QueueTable::zeros(&m), &PolicyParams::default());
        assert!(fa.processing.is_empty() && fa.transmission.is_empty());
    }

    #[test]
    fn empty_queues_idle() {
        let m: NetworkModel<f64> = build_network(&scenarios::abilene()).unwrap();
        let fa = ldp_decide(&m, &QueueTable::zeros(&m), &PolicyParams::default());
        assert!(fa.is_idle());
    }

    #[test]
    fn parallel_matches_sequential() {
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, c, 0b11, 8.0);
        q.set(&m, 1, c, 0b10, 3.0);
        let p = PolicyParams::default();
        assert_eq!(ldp_decide(&m, &q, &p), ldp_decide_par(&m, &q, &p));
    }

    #[test]
    fn unicast_never_splits() {
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, c, 0b11, 50.0);
        q.set(&m, 1, c, 0b11, 49.0);
        // split s=01 would score 50 - 0 - 0 = 50 > 1
        let multi = ldp_decide(&m, &q, &PolicyParams::default());
        assert_ne!(multi.transmission[0].unwrap().key.s, 0b11);
        let uni = unicast_baseline_decide(&m, &q, &PolicyParams::default());
        for (_, d) in uni.decisions() {
            assert_eq!(d.key.q, d.key.s);
        }
    }

    #[test]
    fn evaluation_count_closed_form() {
        let m: NetworkModel<f64> = build_network(&scenarios::abilene()).unwrap();
        // 40 processable contents x 5 pairs + degree x 60 contents x 5 pairs
        for i in 0..m.node_count() {
            let expected = 40 * 5 + m.out_links[i].len() * 60 * 5;
            assert_eq!(weight_evaluations(&m, i), expected);
            let q = QueueTable::zeros(&m);
            let p = PolicyParams::default();
            let mut counted = weight_table(&m, &q, &p, Interface::Processing(i)).entries.len();
            for &l in &m.out_links[i] {
                counted += weight_table(&m, &q, &p, Interface::Transmission(l)).entries.len();
            }
            assert_eq!(counted, expected);
        }
    }

    #[test]
    fn randomized_point_mass_and_idle() {
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let mut spec = RandomizedPolicySpec::all_idle(&m);
        spec.transmission[0] = vec![(key(c, 3, 3), 1.0)];
        spec.validate(&m).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let fa: FlowAssignment<f64> = randomized_decide(&m, &spec, &mut rng);
            assert_eq!(fa.transmission[0].unwrap().key, key(c, 3, 3));
            assert!(fa.transmission[1].is_none());
            assert!(fa.processing.iter().all(Option::is_none));
        }
    }

    #[test]
    fn randomized_rejects_excess_mass() {
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let mut spec = RandomizedPolicySpec::all_idle(&m);
        spec.transmission[0] = vec![(key(c, 3, 3), 0.7), (key(c, 3, 1), 0.4)];
        assert!(matches!(spec.validate(&m), Err(Error::ProbabilityMass { .. })));
    }

    #[test]
    fn randomized_frequencies_within_three_sigma() {
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let mut spec = RandomizedPolicySpec::all_idle(&m);
        let probs = [0.2, 0.5];
        spec.transmission[0] = vec![(key(c, 3, 3), probs[0]), (key(c, 3, 1), probs[1])];
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 100_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            let fa: FlowAssignment<f64> = randomized_decide(&m, &spec, &mut rng);
            match fa.transmission[0].map(|d| d.key.s) {
                Some(3) => counts[0] += 1,
                Some(1) => counts[1] += 1,
                _ => counts[2] += 1,
            }
        }
        for (count, p) in counts.iter().zip([probs[0], probs[1], 0.3]) {
            let sigma = (n as f64 * p * (1.0 - p)).sqrt();
            assert!((*count as f64 - n as f64 * p).abs() < 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn policy_kind_parsing() {
        assert_eq!("unicast".parse::<PolicyKind>().unwrap(), PolicyKind::Unicast);
        assert_eq!("ldp-multicast".parse::<PolicyKind>().unwrap(), PolicyKind::Multicast);
        assert!("x".parse::<PolicyKind>().is_err());
        assert!(PolicyParams::new(PolicyKind::Multicast, -1.0).is_err());
    }
}
