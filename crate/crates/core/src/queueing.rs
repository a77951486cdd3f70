//! Per-node, per-commodity queues and the slot-update kernel: service with
//! dummy filling, duplication reloads, arrivals, and destination consumption.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{full_mask, NetworkModel};
use crate::scalar::Scalar;

/// Fluid backlog per `(node, commodity)`. Entries for the zero status are
/// kept in the layout but never written.
#[derive(Debug, Clone, PartialEq)]
pub struct QueueTable<T> {
    stride: usize,
    data: Vec<T>,
}

impl<T: Scalar> QueueTable<T> {
    pub fn zeros(model: &NetworkModel<T>) -> Self {
        Self {
            stride: model.stride,
            data: vec![T::zero(); model.stride * model.node_count()],
        }
    }

    #[inline]
    fn index(&self, model: &NetworkModel<T>, node: usize, content: usize, status: u16) -> usize {
        node * self.stride + model.contents[content].offset + status as usize
    }

    /// Raw backlog, including destination-state entries.
    #[inline]
    pub fn get(&self, model: &NetworkModel<T>, node: usize, content: usize, status: u16) -> T {
        self.data[self.index(model, node, content, status)]
    }

    pub fn set(&mut self, model: &NetworkModel<T>, node: usize, content: usize, status: u16, v: T) {
        assert!(status != 0, "the zero status is not stored");
        let i = self.index(model, node, content, status);
        self.data[i] = v;
    }

    pub fn add(&mut self, model: &NetworkModel<T>, node: usize, content: usize, status: u16, v: T) {
        debug_assert!(status != 0);
        let i = self.index(model, node, content, status);
        self.data[i] += v;
    }

    /// Backlog as seen by the weight formulas: the zero status and
    /// destination-state queues read as 0.
    #[inline]
    pub fn effective(&self, model: &NetworkModel<T>, node: usize, content: usize, status: u16) -> T {
        if status == 0 || model.is_destination_state(node, content, status) {
            T::zero()
        } else {
            self.get(model, node, content, status)
        }
    }

    /// A node's contiguous row.
    #[inline]
    pub fn row(&self, node: usize) -> &[T] {
        &self.data[node * self.stride..(node + 1) * self.stride]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    /// `‖Q‖₁`.
    pub fn total(&self) -> T {
        self.data.iter().copied().sum()
    }

    /// `L = ‖Q‖₂² / 2`.
    pub fn lyapunov(&self) -> T {
        self.data.iter().map(|&q| q * q).sum::<T>() / (T::one() + T::one())
    }

    pub fn min_entry(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    /// Multiplies every backlog by `factor`.
    pub fn scaled(&self, factor: T) -> Self {
        Self {
            stride: self.stride,
            data: self.data.iter().map(|&q| q * factor).collect(),
        }
    }
}

// ---------------------------------------------------------------------------
// Decisions

/// An operation interface: a node's processor or a directed link.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Interface {
    Processing(usize),
    Transmission(usize),
}

impl Interface {
    pub fn describe<T: Scalar>(self, model: &NetworkModel<T>) -> String {
        match self {
            Interface::Processing(i) => format!("processor {}", model.nodes[i].name),
            Interface::Transmission(l) => format!("link {}", model.link_name(l)),
        }
    }

    /// Node whose queues the interface draws from.
    pub fn node<T: Scalar>(self, model: &NetworkModel<T>) -> usize {
        match self {
            Interface::Processing(i) => i,
            Interface::Transmission(l) => model.links[l].src,
        }
    }
}

/// `(c, q, s)` with lexicographic order used for tie-breaking.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TupleKey {
    pub content: usize,
    pub q: u16,
    pub s: u16,
}

/// One interface's choice for a slot: operate `amount` input packets of
/// `(content, q)`, with the operated copy carrying status `s`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision<T> {
    pub key: TupleKey,
    pub amount: T,
    /// Weight that won the selection; 0 for policies without weights.
    pub weight: T,
}

/// Per-interface decisions for one slot.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowAssignment<T> {
    pub processing: Vec<Option<Decision<T>>>,
    pub transmission: Vec<Option<Decision<T>>>,
}

impl<T: Scalar> FlowAssignment<T> {
    pub fn idle(model: &NetworkModel<T>) -> Self {
        Self {
            processing: vec![None; model.node_count()],
            transmission: vec![None; model.links.len()],
        }
    }

    pub fn decisions(&self) -> impl Iterator<Item = (Interface, &Decision<T>)> {
        let p = self
            .processing
            .iter()
            .enumerate()
            .filter_map(|(i, d)| d.as_ref().map(|d| (Interface::Processing(i), d)));
        let t = self
            .transmission
            .iter()
            .enumerate()
            .filter_map(|(l, d)| d.as_ref().map(|d| (Interface::Transmission(l), d)));
        p.chain(t)
    }

    pub fn is_idle(&self) -> bool {
        self.decisions().next().is_none()
    }

    /// Checks statuses, stages and capacities of every decision.
    pub fn validate(&self, model: &NetworkModel<T>) -> Result<()> {
        if self.processing.len() != model.node_count() || self.transmission.len() != model.links.len() {
            return Err(Error::InvalidDecision {
                interface: "assignment".into(),
                reason: "interface count does not match the model".into(),
            });
        }
        for (iface, d) in self.decisions() {
            let bad = |reason: String| Error::InvalidDecision {
                interface: iface.describe(model),
                reason,
            };
            let TupleKey { content, q, s } = d.key;
            let Some(c) = model.contents.get(content) else {
                return Err(bad(format!("unknown content {content}")));
            };
            if q == 0 || q > full_mask(c.width) {
                return Err(bad(format!("status {q:#b} out of range")));
            }
            if s == 0 || s & !q != 0 {
                return Err(bad(format!("s = {s:#b} is not a non-zero subset of q = {q:#b}")));
            }
            if !(d.amount >= T::zero()) {
                return Err(bad(format!("negative amount {}", d.amount)));
            }
            let capacity = match iface {
                Interface::Processing(i) => {
                    if c.is_final() {
                        return Err(bad("final-stage content cannot be processed".into()));
                    }
                    model.processing_capacity(i, content)
                }
                Interface::Transmission(l) => model.links[l].capacity,
            };
            if d.amount > capacity {
                return Err(Error::CapacityExceeded {
                    interface: iface.describe(model),
                    load: d.amount.as_f64(),
                    capacity: capacity.as_f64(),
                });
            }
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Ledger

/// What one interface actually did in a slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ServiceRecord<T> {
    pub interface: Interface,
    pub key: TupleKey,
    pub requested: T,
    pub real: T,
    pub dummy: T,
}

/// Backlog credited to `(node, content, status)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posting<T> {
    pub node: usize,
    pub content: usize,
    pub status: u16,
    pub amount: T,
}

/// Service outcome of a slot and the postings it implies.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SlotLedger<T> {
    /// Grouped by serving node, in allocation order.
    pub services: Vec<ServiceRecord<T>>,
    /// Operated copies: transmissions landing at the link head, processed
    /// outputs (already scaled) at the processing node.
    pub credits: Vec<Posting<T>>,
    /// Non-operated copies `q − s`, credited at the end of the slot.
    pub reloads: Vec<Posting<T>>,
}

impl<T: Scalar> SlotLedger<T> {
    pub fn dummy_total(&self) -> T {
        self.services.iter().map(|r| r.dummy).sum()
    }

    pub fn real_total(&self) -> T {
        self.services.iter().map(|r| r.real).sum()
    }
}

/// A final-stage copy consumed at destination `k` of its set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Delivery<T> {
    pub node: usize,
    pub content: usize,
    /// Zero-based position of `node` in the destination set.
    pub k: usize,
    /// Status of the consumed queue.
    pub status: u16,
    pub amount: T,
}

/// Cumulative deliveries per `(service, dest_set, destination)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryLog<T> {
    /// `[content][k]`, empty rows for non-final contents.
    by_content: Vec<Vec<T>>,
}

impl<T: Scalar> DeliveryLog<T> {
    pub fn new(model: &NetworkModel<T>) -> Self {
        Self {
            by_content: model
                .contents
                .iter()
                .map(|c| if c.is_final() { vec![T::zero(); c.width] } else { Vec::new() })
                .collect(),
        }
    }

    pub fn record(&mut self, deliveries: &[Delivery<T>]) {
        for d in deliveries {
            self.by_content[d.content][d.k] += d.amount;
        }
    }

    pub fn delivered(&self, model: &NetworkModel<T>, service: usize, dest_set: usize, k: usize) -> T {
        let stages = model.services[service].stages();
        model
            .content_id(service, stages, dest_set)
            .and_then(|c| self.by_content[c].get(k).copied())
            .unwrap_or_else(T::zero)
    }

    pub fn total(&self) -> T {
        self.by_content.iter().flatten().copied().sum()
    }
}

// ---------------------------------------------------------------------------
// Slot kernel

/// Serves an assignment against the start-of-slot backlog.
///
/// Requests on the same `(node, c, q)` from several interfaces compete for
/// real packets in descending weight order; ties go to the processor, then
/// to the lowest link index. Whatever a request cannot get is dummy.
pub fn serve_and_split<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    assignment: &FlowAssignment<T>,
) -> Result<SlotLedger<T>> {
    assignment.validate(model)?;
    let mut ledger = SlotLedger::default();
    let mut requests: Vec<(Interface, Decision<T>)> = Vec::new();
    let mut available: Vec<(usize, u16, T)> = Vec::new();
    for i in 0..model.node_count() {
        requests.clear();
        available.clear();
        if let Some(d) = assignment.processing[i] {
            requests.push((Interface::Processing(i), d));
        }
        for &l in &model.out_links[i] {
            if let Some(d) = assignment.transmission[l] {
                requests.push((Interface::Transmission(l), d));
            }
        }
        requests.sort_by(|a, b| {
            b.1.weight
                .partial_cmp(&a.1.weight)
                .unwrap_or(Ordering::Equal)
                .then(a.0.cmp(&b.0))
        });
        for &(interface, d) in &requests {
            let TupleKey { content, q, s } = d.key;
            let slot = match available.iter().position(|&(c, st, _)| c == content && st == q) {
                Some(p) => p,
                None => {
                    available.push((content, q, queues.get(model, i, content, q)));
                    available.len() - 1
                }
            };
            let avail = available[slot].2;
            let real = if d.amount < avail { d.amount } else { avail };
            available[slot].2 = avail - real;
            ledger.services.push(ServiceRecord {
                interface,
                key: d.key,
                requested: d.amount,
                real,
                dummy: d.amount - real,
            });
            if real > T::zero() {
                match interface {
                    Interface::Transmission(l) => ledger.credits.push(Posting {
                        node: model.links[l].dst,
                        content,
                        status: s,
                        amount: real,
                    }),
                    Interface::Processing(_) => {
                        let next = model.contents[content].next.expect("validated stage");
                        let scaling = model.function(content).expect("validated stage").scaling;
                        ledger.credits.push(Posting {
                            node: i,
                            content: next,
                            status: s,
                            amount: real * scaling,
                        });
                    }
                }
                if s != q {
                    ledger.reloads.push(Posting {
                        node: i,
                        content,
                        status: q & !s,
                        amount: real,
                    });
                }
            }
        }
    }
    Ok(ledger)
}

/// In-place form of [`apply_slot`].
pub fn apply_slot_in_place<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &mut QueueTable<T>,
    ledger: &SlotLedger<T>,
    arrivals: &[Posting<T>],
) {
    for r in &ledger.services {
        if r.real > T::zero() {
            let i = r.interface.node(model);
            let idx = queues.index(model, i, r.key.content, r.key.q);
            let left = queues.data[idx] - r.real;
            queues.data[idx] = if left > T::zero() { left } else { T::zero() };
        }
    }
    for p in ledger.credits.iter().chain(&ledger.reloads).chain(arrivals) {
        queues.add(model, p.node, p.content, p.status, p.amount);
    }
}

/// Next-slot backlog: departures removed, operated copies, processed
/// outputs, reloads and exogenous arrivals credited. Dummy packets are
/// never credited.
pub fn apply_slot<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    ledger: &SlotLedger<T>,
    arrivals: &[Posting<T>],
) -> QueueTable<T> {
    let mut next = queues.clone();
    apply_slot_in_place(model, &mut next, ledger, arrivals);
    next
}

/// In-place form of [`consume_at_destinations`]; appends to `out`.
pub fn consume_in_place<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &mut QueueTable<T>,
    out: &mut Vec<Delivery<T>>,
) {
    for (c, content) in model.contents.iter().enumerate() {
        if !content.is_final() {
            continue;
        }
        let ds = &model.dest_sets[content.dest_set];
        for (k, &d) in ds.members.iter().enumerate() {
            let bit = model.destination_bit(c, d);
            for q in 1..=full_mask(content.width) {
                if q & bit == 0 {
                    continue;
                }
                let idx = queues.index(model, d, c, q);
                let amount = queues.data[idx];
                if amount > T::zero() {
                    queues.data[idx] = T::zero();
                    let rest = q & !bit;
                    if rest != 0 {
                        queues.add(model, d, c, rest, amount);
                    }
                    out.push(Delivery {
                        node: d,
                        content: c,
                        k,
                        status: q,
                        amount,
                    });
                }
            }
        }
    }
}

/// Consumes destination-state backlog: the `b_k` copy leaves the network and
/// the remainder `q − b_k` is credited at the destination.
pub fn consume_at_destinations<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
) -> (QueueTable<T>, Vec<Delivery<T>>) {
    let mut next = queues.clone();
    let mut out = Vec::new();
    consume_in_place(model, &mut next, &mut out);
    (next, out)
}

impl fmt::Display for Interface {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interface::Processing(i) => write!(f, "proc:{i}"),
            Interface::Transmission(l) => write!(f, "link:{l}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::build_network;
    use crate::scenarios;

    fn chain() -> NetworkModel<f64> {
        build_network(&scenarios::chain2()).unwrap()
    }

    fn decision(content: usize, q: u16, s: u16, amount: f64, weight: f64) -> Option<Decision<f64>> {
        Some(Decision {
            key: TupleKey { content, q, s },
            amount,
            weight,
        })
    }

    #[test]
    fn full_service_without_shortage() {
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, c, 0b11, 10.0);
        let mut fa = FlowAssignment::idle(&m);
        fa.transmission[0] = decision(c, 0b11, 0b11, 4.0, 1.0);
        let ledger = serve_and_split(&m, &q, &fa).unwrap();
        assert_eq!(ledger.services[0].real, 4.0);
        assert_eq!(ledger.services[0].dummy, 0.0);
        let next = apply_slot(&m, &q, &ledger, &[]);
        assert_eq!(next.get(&m, 0, c, 0b11), 6.0);
        assert_eq!(next.get(&m, 1, c, 0b11), 4.0);
    }

    #[test]
    fn shortage_goes_to_heavier_interface_first() {
        // node a: processor + link a->b; give both the same commodity
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, c, 0b11, 3.0);
        let mut fa = FlowAssignment::idle(&m);
        fa.processing[0] = decision(c, 0b11, 0b11, 2.0, 1.0);
        fa.transmission[0] = decision(c, 0b11, 0b11, 4.0, 5.0);
        let ledger = serve_and_split(&m, &q, &fa).unwrap();
        let link = ledger
            .services
            .iter()
            .find(|r| r.interface == Interface::Transmission(0))
            .unwrap();
        let proc = ledger
            .services
            .iter()
            .find(|r| r.interface == Interface::Processing(0))
            .unwrap();
        assert_eq!((link.real, link.dummy), (3.0, 1.0));
        assert_eq!((proc.real, proc.dummy), (0.0, 2.0));
        let next = apply_slot(&m, &q, &ledger, &[]);
        assert_eq!(next.get(&m, 0, c, 0b11), 0.0);
    }

    #[test]
    fn empty_queue_is_all_dummy() {
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let q = QueueTable::zeros(&m);
        let mut fa = FlowAssignment::idle(&m);
        fa.transmission[0] = decision(c, 0b11, 0b11, 5.0, 1.0);
        let ledger = serve_and_split(&m, &q, &fa).unwrap();
        assert_eq!(ledger.services[0].dummy, 5.0);
        assert!(ledger.credits.is_empty());
        let next = apply_slot(&m, &q, &ledger, &[]);
        assert_eq!(next.total(), 0.0);
    }

    #[test]
    fn transmission_with_split_reloads_remainder() {
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, c, 0b11, 10.0);
        let mut fa = FlowAssignment::idle(&m);
        fa.transmission[0] = decision(c, 0b11, 0b01, 4.0, 1.0);
        let ledger = serve_and_split(&m, &q, &fa).unwrap();
        let next = apply_slot(&m, &q, &ledger, &[]);
        assert_eq!(next.get(&m, 0, c, 0b11), 6.0);
        assert_eq!(next.get(&m, 1, c, 0b01), 4.0);
        assert_eq!(next.get(&m, 0, c, 0b10), 4.0);
    }

    #[test]
    fn processing_scales_output() {
        let m = chain(); // xi = 2
        let c = m.content_id(0, 1, 0).unwrap();
        let c2 = m.content_id(0, 2, 0).unwrap();
        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, c, 0b11, 3.0);
        let mut fa = FlowAssignment::idle(&m);
        fa.processing[0] = decision(c, 0b11, 0b11, 3.0, 1.0);
        let ledger = serve_and_split(&m, &q, &fa).unwrap();
        let next = apply_slot(&m, &q, &ledger, &[]);
        assert_eq!(next.get(&m, 0, c, 0b11), 0.0);
        assert_eq!(next.get(&m, 0, c2, 0b11), 6.0);
    }

    #[test]
    fn arrivals_only() {
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let q = QueueTable::zeros(&m);
        let arrivals = [Posting {
            node: 0,
            content: c,
            status: 0b11,
            amount: 5.0,
        }];
        let next = apply_slot(&m, &q, &SlotLedger::default(), &arrivals);
        assert_eq!(next.total(), 5.0);
    }

    #[test]
    fn over_capacity_rejected() {
        let m = chain();
        let c = m.content_id(0, 1, 0).unwrap();
        let q = QueueTable::zeros(&m);
        let mut fa = FlowAssignment::idle(&m);
        fa.transmission[0] = decision(c, 0b11, 0b11, m.links[0].capacity + 1.0, 1.0);
        assert!(matches!(
            serve_and_split(&m, &q, &fa),
            Err(Error::CapacityExceeded { .. })
        ));
        let mut fa = FlowAssignment::idle(&m);
        fa.processing[0] = decision(c, 0b11, 0b11, m.processing_capacity(0, c) * 1.01, 1.0);
        assert!(serve_and_split(&m, &q, &fa).is_err());
        let mut fa = FlowAssignment::idle(&m);
        fa.transmission[0] = decision(c, 0b01, 0b10, 1.0, 1.0);
        assert!(matches!(
            serve_and_split(&m, &q, &fa),
            Err(Error::InvalidDecision { .. })
        ));
    }

    #[test]
    fn consumption_cases() {
        // d_1 = a (bit 0b10), d_2 = b (bit 0b01)
        let m = chain();
        let fin = m.content_id(0, 2, 0).unwrap();
        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, fin, 0b11, 3.0);
        let (next, del) = consume_at_destinations(&m, &q);
        assert_eq!(del.len(), 1);
        assert_eq!((del[0].node, del[0].k, del[0].amount), (0, 0, 3.0));
        assert_eq!(next.get(&m, 0, fin, 0b11), 0.0);
        assert_eq!(next.get(&m, 0, fin, 0b01), 3.0);

        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, fin, 0b10, 3.0);
        let (next, del) = consume_at_destinations(&m, &q);
        assert_eq!(del[0].amount, 3.0);
        assert_eq!(next.total(), 0.0);

        let mut q = QueueTable::zeros(&m);
        q.set(&m, 0, fin, 0b01, 3.0);
        let (next, del) = consume_at_destinations(&m, &q);
        assert!(del.is_empty());
        assert_eq!(next, q);
    }

    #[test]
    fn delivery_log_accumulates() {
        let m = chain();
        let fin = m.content_id(0, 2, 0).unwrap();
        let mut log = DeliveryLog::new(&m);
        log.record(&[Delivery {
            node: 1,
            content: fin,
            k: 1,
            status: 0b01,
            amount: 2.5,
        }]);
        assert_eq!(log.delivered(&m, 0, 0, 1), 2.5);
        assert_eq!(log.delivered(&m, 0, 0, 0), 0.0);
        assert_eq!(log.total(), 2.5);
    }
}
