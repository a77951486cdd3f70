//! Verification oracles that work from recorded ledgers rather than from the
//! simulator's internals: conservation, capacity and coverage checks, an
//! exhaustive max-weight search for tiny instances, and the analytic
//! capacity of the Y-network.
//!
//! A ledger is a flat stream of [`LedgerRow`]s in slot order. It can be
//! recorded from a live run with [`TrailRecorder`] or read back from CSV.

use std::collections::{BTreeMap, HashMap};
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::engine::SlotRecord;
use crate::error::{Error, Result};
use crate::model::{full_mask, DuplicationStatus, NetworkModel, ScenarioConfig};
use crate::policy::{PolicyKind, PolicyParams};
use crate::queueing::{Decision, FlowAssignment, Interface, QueueTable, TupleKey};
use crate::scalar::Scalar;
use crate::scenarios;

/// Relative tolerance of the conservation balance.
pub const CONSERVATION_TOL: f64 = 1e-6;
/// Relative tolerance of per-slot posting checks (coverage, scaling).
pub const POSTING_TOL: f64 = 1e-9;

// ---------------------------------------------------------------------------
// Report

/// Where the largest violation of a check was found.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Locus {
    pub node: String,
    pub commodity: String,
    pub first_slot: u64,
    pub last_slot: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest violation seen, in the check's own units (relative for
    /// conservation, packets or CPU units otherwise).
    pub max_violation: f64,
    pub tolerance: f64,
    pub checked: u64,
    pub locus: Option<Locus>,
}

impl CheckResult {
    fn new(name: &str, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            passed: true,
            max_violation: 0.0,
            tolerance,
            checked: 0,
            locus: None,
        }
    }

    /// Records one comparison; `violation` above the tolerance fails the check.
    fn observe(&mut self, violation: f64, locus: impl FnOnce() -> Locus) {
        self.checked += 1;
        let violation = if violation.is_nan() { f64::INFINITY } else { violation };
        if violation > self.tolerance {
            self.passed = false;
        }
        if violation > self.max_violation || (self.locus.is_none() && violation > self.tolerance) {
            self.max_violation = violation;
            self.locus = Some(locus());
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct AuditReport {
    pub checks: Vec<CheckResult>,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckResult> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn merge(mut self, other: AuditReport) -> Self {
        self.checks.extend(other.checks);
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

// ---------------------------------------------------------------------------
// Ledger rows

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RowKind {
    /// Backlog at the start of the audited window.
    Start,
    Serve,
    Credit,
    Reload,
    Arrival,
    Delivery,
    /// Backlog at the end of the audited window.
    End,
}

/// One ledger event. Field use depends on `kind`: serves fill `interface`,
/// `q`, `s`, `amount` (requested), `real` and `dummy`; deliveries fill `k`
/// and `q` (the consumed status); the rest use `node`, `content`, `q` and
/// `amount`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerRow {
    pub slot: u64,
    pub kind: RowKind,
    pub interface: Option<Interface>,
    pub node: usize,
    pub content: usize,
    pub q: u16,
    pub s: u16,
    pub k: usize,
    pub amount: f64,
    pub real: f64,
    pub dummy: f64,
}

impl LedgerRow {
    fn posting(slot: u64, kind: RowKind, node: usize, content: usize, status: u16, amount: f64) -> Self {
        Self {
            slot,
            kind,
            interface: None,
            node,
            content,
            q: status,
            s: 0,
            k: 0,
            amount,
            real: 0.0,
            dummy: 0.0,
        }
    }
}

/// Appends the rows of one simulated slot.
pub fn slot_rows<T: Scalar>(model: &NetworkModel<T>, rec: &SlotRecord<'_, T>, out: &mut Vec<LedgerRow>) {
    let slot = rec.slot;
    for r in &rec.ledger.services {
        out.push(LedgerRow {
            slot,
            kind: RowKind::Serve,
            interface: Some(r.interface),
            node: r.interface.node(model),
            content: r.key.content,
            q: r.key.q,
            s: r.key.s,
            k: 0,
            amount: r.requested.as_f64(),
            real: r.real.as_f64(),
            dummy: r.dummy.as_f64(),
        });
    }
    for (kind, postings) in [
        (RowKind::Credit, &rec.ledger.credits[..]),
        (RowKind::Reload, &rec.ledger.reloads[..]),
        (RowKind::Arrival, rec.arrivals),
    ] {
        for p in postings {
            out.push(LedgerRow::posting(slot, kind, p.node, p.content, p.status, p.amount.as_f64()));
        }
    }
    for d in rec.deliveries {
        out.push(LedgerRow {
            k: d.k,
            ..LedgerRow::posting(slot, RowKind::Delivery, d.node, d.content, d.status, d.amount.as_f64())
        });
    }
}

/// Appends one row per non-zero backlog entry.
pub fn snapshot_rows<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    slot: u64,
    kind: RowKind,
    out: &mut Vec<LedgerRow>,
) {
    for i in 0..model.node_count() {
        for (c, q) in model.commodities() {
            let v = queues.get(model, i, c, q);
            if v != T::zero() {
                out.push(LedgerRow::posting(slot, kind, i, c, q, v.as_f64()));
            }
        }
    }
}

/// Collects a window of slots into a ledger, bracketed by backlog snapshots.
pub struct TrailRecorder<'m, T: Scalar> {
    model: &'m NetworkModel<T>,
    rows: Vec<LedgerRow>,
    last: Option<(u64, QueueTable<T>)>,
}

impl<'m, T: Scalar> TrailRecorder<'m, T> {
    pub fn new(model: &'m NetworkModel<T>) -> Self {
        Self {
            model,
            rows: Vec::new(),
            last: None,
        }
    }

    pub fn observe(&mut self, rec: &SlotRecord<'_, T>) {
        if self.last.is_none() {
            snapshot_rows(self.model, rec.before, rec.slot, RowKind::Start, &mut self.rows);
        }
        slot_rows(self.model, rec, &mut self.rows);
        match &mut self.last {
            Some((slot, q)) => {
                *slot = rec.slot;
                q.clone_from(rec.after);
            }
            None => self.last = Some((rec.slot, rec.after.clone())),
        }
    }

    pub fn finish(mut self) -> Vec<LedgerRow> {
        if let Some((slot, q)) = self.last.take() {
            snapshot_rows(self.model, &q, slot, RowKind::End, &mut self.rows);
        }
        self.rows
    }
}

// ---------------------------------------------------------------------------
// Checks

fn bits_of(status: u16) -> impl Iterator<Item = u16> {
    (0..16).map(|b| 1u16 << b).filter(move |b| status & b != 0)
}

/// Position of the destination bit `b_k`; the first destination is the
/// most significant bit.
fn position_bit(width: usize, k: usize) -> u16 {
    1u16 << (width - 1 - k)
}

fn commodity_label<T: Scalar>(model: &NetworkModel<T>, content: usize, status: Option<u16>) -> String {
    let c = &model.contents[content];
    let base = format!(
        "{}/stage{}/{}",
        model.services[c.service].name, c.stage, model.dest_sets[c.dest_set].name
    );
    match status {
        Some(q) => format!("{base}/{}", DuplicationStatus::new(q, c.width)),
        None => base,
    }
}

fn valid_row<T: Scalar>(model: &NetworkModel<T>, row: &LedgerRow) -> bool {
    let Some(c) = model.contents.get(row.content) else {
        return false;
    };
    row.node < model.node_count() && row.q != 0 && row.q <= full_mask(c.width)
}

/// Balance per `(node, content, destination bit)` over the whole ledger:
/// everything credited with the bit set, minus everything that left with
/// the bit set, must equal the change of backlog carrying the bit.
/// Processed outputs enter as recorded (already scaled), so a posting that
/// does not match the chain scaling shows up as an imbalance.
pub fn check_conservation<T: Scalar>(model: &NetworkModel<T>, rows: &[LedgerRow]) -> CheckResult {
    #[derive(Default, Clone, Copy)]
    struct Acc {
        inflow: f64,
        outflow: f64,
        start: f64,
        end: f64,
        first: Option<u64>,
        last: u64,
    }
    let mut acc: HashMap<(usize, usize, u16), Acc> = HashMap::new();
    let mut result = CheckResult::new("conservation", CONSERVATION_TOL);
    let mut touch = |node: usize, content: usize, status: u16, slot: u64, f: &dyn Fn(&mut Acc)| {
        for b in bits_of(status) {
            let a = acc.entry((node, content, b)).or_default();
            a.first = Some(a.first.map_or(slot, |s: u64| s.min(slot)));
            a.last = a.last.max(slot);
            f(a);
        }
    };
    for row in rows {
        if !valid_row(model, row) {
            result.observe(f64::INFINITY, || Locus {
                node: format!("#{}", row.node),
                commodity: format!("content #{} status {:#b}", row.content, row.q),
                first_slot: row.slot,
                last_slot: row.slot,
            });
            continue;
        }
        let v = row.amount;
        match row.kind {
            RowKind::Start => touch(row.node, row.content, row.q, row.slot, &|a| a.start += v),
            RowKind::End => touch(row.node, row.content, row.q, row.slot, &|a| a.end += v),
            RowKind::Credit | RowKind::Reload | RowKind::Arrival => {
                touch(row.node, row.content, row.q, row.slot, &|a| a.inflow += v)
            }
            RowKind::Serve => {
                let real = row.real;
                touch(row.node, row.content, row.q, row.slot, &|a| a.outflow += real)
            }
            RowKind::Delivery => {
                let width = model.contents[row.content].width;
                let rest = row.q & !position_bit(width, row.k);
                touch(row.node, row.content, row.q, row.slot, &|a| a.outflow += v);
                touch(row.node, row.content, rest, row.slot, &|a| a.inflow += v);
            }
        }
    }
    let mut keys: Vec<_> = acc.keys().copied().collect();
    keys.sort_unstable();
    for key in keys {
        let a = acc[&key];
        let residual = a.inflow - a.outflow - (a.end - a.start);
        let scale = a.inflow.abs().max(a.outflow.abs()).max(a.start.abs()).max(a.end.abs()).max(1.0);
        let (node, content, bit) = key;
        result.observe(residual.abs() / scale, || Locus {
            node: model.nodes[node].name.clone(),
            commodity: format!(
                "{} bit {}",
                commodity_label(model, content, None),
                model.contents[content].width - 1 - bit.trailing_zeros() as usize
            ),
            first_slot: a.first.unwrap_or(0),
            last_slot: a.last,
        });
    }
    result
}

/// Per slot and interface: CPU use `Σ r·x` against the node's CPUs and link
/// load against the link capacity, dummies included, compared exactly.
/// Also checks `real + dummy = requested` on every serve, up to rounding.
pub fn check_capacity<T: Scalar>(model: &NetworkModel<T>, rows: &[LedgerRow]) -> CheckResult {
    let mut result = CheckResult::new("capacity", 0.0);
    let mut load: BTreeMap<(u64, Interface), (f64, usize)> = BTreeMap::new();
    for row in rows.iter().filter(|r| r.kind == RowKind::Serve) {
        let Some(iface) = row.interface else {
            result.observe(f64::INFINITY, || Locus {
                node: format!("#{}", row.node),
                commodity: "serve without interface".into(),
                first_slot: row.slot,
                last_slot: row.slot,
            });
            continue;
        };
        let used = match iface {
            Interface::Processing(_) => match model.function(row.content) {
                Some(f) => row.amount * f.workload.as_f64(),
                None => f64::INFINITY,
            },
            Interface::Transmission(_) => row.amount,
        };
        let e = load.entry((row.slot, iface)).or_insert((0.0, row.content));
        e.0 += used;
        // dummy is computed as requested - real, so allow its rounding
        let split = (row.real + row.dummy - row.amount).abs();
        let split = if split <= 1e-12 * row.amount.abs() { 0.0 } else { split };
        result.observe(split, || Locus {
            node: iface.describe(model),
            commodity: commodity_label(model, row.content, Some(row.q)),
            first_slot: row.slot,
            last_slot: row.slot,
        });
    }
    for ((slot, iface), (used, content)) in load {
        let cap = match iface {
            Interface::Processing(i) if i < model.node_count() => model.nodes[i].capacity.as_f64(),
            Interface::Transmission(l) if l < model.links.len() => model.links[l].capacity.as_f64(),
            _ => -1.0,
        };
        let over = if cap < 0.0 { f64::INFINITY } else { (used - cap).max(0.0) };
        result.observe(over, || Locus {
            node: format!("{iface}"),
            commodity: commodity_label(model, content, None),
            first_slot: slot,
            last_slot: slot,
        });
    }
    result
}

type SlotKey = (u64, usize, usize, u16);

fn compare_per_slot<T: Scalar>(
    model: &NetworkModel<T>,
    result: &mut CheckResult,
    expected: &BTreeMap<SlotKey, f64>,
    actual: &BTreeMap<SlotKey, f64>,
) {
    let mut keys: Vec<SlotKey> = expected.keys().chain(actual.keys()).copied().collect();
    keys.sort_unstable();
    keys.dedup();
    for key in keys {
        let e = expected.get(&key).copied().unwrap_or(0.0);
        let a = actual.get(&key).copied().unwrap_or(0.0);
        let (slot, node, content, status) = key;
        let node_name = model.nodes.get(node).map_or_else(|| format!("#{node}"), |n| n.name.clone());
        let label = if content < model.contents.len() {
            commodity_label(model, content, Some(status))
        } else {
            format!("content #{content}")
        };
        result.observe((e - a).abs() / e.abs().max(a.abs()).max(1.0), || Locus {
            node: node_name,
            commodity: label,
            first_slot: slot,
            last_slot: slot,
        });
    }
}

/// Every serve with real packets and `s ≠ q` must be matched by a reload of
/// `q − s` at the serving node, and `s` must be a non-empty part of `q`.
pub fn check_coverage<T: Scalar>(model: &NetworkModel<T>, rows: &[LedgerRow]) -> CheckResult {
    let mut result = CheckResult::new("duplication-coverage", POSTING_TOL);
    let mut expected = BTreeMap::new();
    let mut actual = BTreeMap::new();
    for row in rows {
        match row.kind {
            RowKind::Serve => {
                let partition_ok = row.s != 0 && row.s & !row.q == 0 && (row.s | (row.q & !row.s)) == row.q;
                result.observe(if partition_ok { 0.0 } else { f64::INFINITY }, || Locus {
                    node: model.nodes.get(row.node).map_or_else(String::new, |n| n.name.clone()),
                    commodity: format!("q={:#b} s={:#b}", row.q, row.s),
                    first_slot: row.slot,
                    last_slot: row.slot,
                });
                if row.real > 0.0 && row.s != row.q {
                    *expected
                        .entry((row.slot, row.node, row.content, row.q & !row.s))
                        .or_insert(0.0) += row.real;
                }
            }
            RowKind::Reload => {
                *actual.entry((row.slot, row.node, row.content, row.q)).or_insert(0.0) += row.amount;
            }
            _ => {}
        }
    }
    compare_per_slot(model, &mut result, &expected, &actual);
    result
}

/// Credits landing at a node are transmissions received plus processed
/// output. Transmissions are taken from link serves; the remainder must be
/// `ξ` times the real input processed at the node.
pub fn check_processing_scaling<T: Scalar>(model: &NetworkModel<T>, rows: &[LedgerRow]) -> CheckResult {
    let mut result = CheckResult::new("processing-scaling", POSTING_TOL);
    let mut expected: BTreeMap<SlotKey, f64> = BTreeMap::new();
    let mut actual: BTreeMap<SlotKey, f64> = BTreeMap::new();
    for row in rows {
        match (row.kind, row.interface) {
            (RowKind::Serve, Some(Interface::Transmission(l))) if row.real > 0.0 => {
                let dst = model.links.get(l).map_or(usize::MAX, |x| x.dst);
                *expected.entry((row.slot, dst, row.content, row.s)).or_insert(0.0) += row.real;
            }
            (RowKind::Serve, Some(Interface::Processing(i))) if row.real > 0.0 => {
                let c = model.contents.get(row.content);
                let scaled = c.and_then(|c| {
                    let f = model.services[c.service].functions.get(c.stage - 1)?;
                    Some((c.next?, row.real * f.scaling.as_f64()))
                });
                match scaled {
                    Some((next, amount)) => *expected.entry((row.slot, i, next, row.s)).or_insert(0.0) += amount,
                    None => result.observe(f64::INFINITY, || Locus {
                        node: format!("proc:{i}"),
                        commodity: "final-stage content processed".into(),
                        first_slot: row.slot,
                        last_slot: row.slot,
                    }),
                }
            }
            (RowKind::Credit, _) => {
                *actual.entry((row.slot, row.node, row.content, row.q)).or_insert(0.0) += row.amount;
            }
            _ => {}
        }
    }
    compare_per_slot(model, &mut result, &expected, &actual);
    result
}

/// Destination-state backlog in the window's snapshots must be zero.
pub fn check_destination_state<T: Scalar>(model: &NetworkModel<T>, rows: &[LedgerRow]) -> CheckResult {
    let mut result = CheckResult::new("destination-state", 0.0);
    for row in rows.iter().filter(|r| matches!(r.kind, RowKind::Start | RowKind::End)) {
        if !valid_row(model, row) {
            continue;
        }
        let c = &model.contents[row.content];
        let holds_own_copy = c.is_final()
            && model.dest_sets[c.dest_set]
                .members
                .iter()
                .enumerate()
                .any(|(k, &d)| d == row.node && row.q & position_bit(c.width, k) != 0);
        result.observe(if holds_own_copy { row.amount.abs() } else { 0.0 }, || Locus {
            node: model.nodes[row.node].name.clone(),
            commodity: commodity_label(model, row.content, Some(row.q)),
            first_slot: row.slot,
            last_slot: row.slot,
        });
    }
    result
}

/// All ledger checks.
pub fn audit_ledger<T: Scalar>(model: &NetworkModel<T>, rows: &[LedgerRow]) -> AuditReport {
    AuditReport {
        checks: vec![
            check_conservation(model, rows),
            check_capacity(model, rows),
            check_coverage(model, rows),
            check_processing_scaling(model, rows),
            check_destination_state(model, rows),
        ],
    }
}

// ---------------------------------------------------------------------------
// Destination-weighted mass

/// Backlog counted once per pending destination and expressed in source
/// units: `Σ |q| · Q(c, q) / (ξ product before c)`. Real flows preserve it;
/// only arrivals raise it and only deliveries lower it.
pub fn weighted_mass<T: Scalar>(model: &NetworkModel<T>, queues: &QueueTable<T>) -> f64 {
    let mut total = 0.0;
    for i in 0..model.node_count() {
        for (c, q) in model.commodities() {
            let v = queues.get(model, i, c, q).as_f64();
            if v != 0.0 {
                total += q.count_ones() as f64 * v / source_units(model, c);
            }
        }
    }
    total
}

fn source_units<T: Scalar>(model: &NetworkModel<T>, content: usize) -> f64 {
    let c = &model.contents[content];
    model.services[c.service].functions[..c.stage - 1]
        .iter()
        .map(|f| f.scaling.as_f64())
        .product()
}

/// Weighted mass carried by a ledger's arrivals and deliveries, by slot
/// order: `(arrived, delivered)`.
pub fn ledger_mass<T: Scalar>(model: &NetworkModel<T>, rows: &[LedgerRow]) -> (f64, f64) {
    let (mut arrived, mut delivered) = (0.0, 0.0);
    for row in rows {
        match row.kind {
            RowKind::Arrival => arrived += row.q.count_ones() as f64 * row.amount / source_units(model, row.content),
            RowKind::Delivery => delivered += row.amount / source_units(model, row.content),
            _ => {}
        }
    }
    (arrived, delivered)
}

// ---------------------------------------------------------------------------
// Exhaustive decision search

/// Upper bound on the number of joint choices enumerated.
pub const BRUTE_FORCE_LIMIT: u64 = 5_000_000;

/// Max-weight decision found by enumerating every joint choice of
/// `(c, q, s)` or idle across all interfaces and maximizing the total
/// `Σ w·x`, where `x` is the full capacity (CPUs for processors, packets for
/// links). Among equal totals the joint choice that is lexicographically
/// smallest wins, with idle ordered before every tuple.
///
/// Weights are evaluated here from raw backlogs, independently of the
/// policy module.
pub fn brute_force_decision<T: Scalar>(
    model: &NetworkModel<T>,
    queues: &QueueTable<T>,
    params: &PolicyParams,
) -> Result<FlowAssignment<T>> {
    if model.node_count() > 3 {
        return Err(Error::InstanceTooLarge(format!("{} nodes (at most 3)", model.node_count())));
    }
    if let Some(c) = model.contents.iter().find(|c| c.width > 2) {
        return Err(Error::InstanceTooLarge(format!("destination set of {} (at most 2)", c.width)));
    }
    if let Some(s) = model.services.iter().find(|s| s.functions.len() > 2) {
        return Err(Error::InstanceTooLarge(format!(
            "service `{}` has {} functions (at most 2)",
            s.name,
            s.functions.len()
        )));
    }

    let v = params.v;
    let raw = |node: usize, content: usize, status: u16| -> f64 {
        if status == 0 {
            return 0.0;
        }
        let c = &model.contents[content];
        if c.is_final() {
            let members = &model.dest_sets[c.dest_set].members;
            for (k, &d) in members.iter().enumerate() {
                if d == node && status & position_bit(c.width, k) != 0 {
                    return 0.0;
                }
            }
        }
        queues.get(model, node, content, status).as_f64()
    };
    let tuples = |content: usize| {
        let width = model.contents[content].width;
        let mut out = Vec::new();
        for q in 1..=full_mask(width) {
            let mut s = q;
            loop {
                if s != 0 && (params.kind != PolicyKind::Unicast || s == q) {
                    out.push((q, s));
                }
                if s == 0 {
                    break;
                }
                s = (s - 1) & q;
            }
        }
        out.sort_unstable();
        out
    };

    // Per interface: idle first, then every tuple in lexicographic order,
    // each with its contribution to the objective.
    let mut interfaces: Vec<(Interface, Vec<(Option<TupleKey>, f64)>)> = Vec::new();
    for i in 0..model.node_count() {
        let cpus = model.nodes[i].capacity.as_f64();
        let mut choices = vec![(None, 0.0)];
        for (c, content) in model.contents.iter().enumerate() {
            let Some(next) = content.next else { continue };
            let f = &model.services[content.service].functions[content.stage - 1];
            let (xi, r) = (f.scaling.as_f64(), f.workload.as_f64());
            for (q, s) in tuples(c) {
                let diff = raw(i, c, q) - raw(i, c, q & !s) - xi * raw(i, next, s);
                let w = diff / r - v * model.nodes[i].cost.as_f64();
                choices.push((Some(TupleKey { content: c, q, s }), w * cpus));
            }
        }
        interfaces.push((Interface::Processing(i), choices));
    }
    for (l, link) in model.links.iter().enumerate() {
        let cap = link.capacity.as_f64();
        let mut choices = vec![(None, 0.0)];
        for c in 0..model.contents.len() {
            for (q, s) in tuples(c) {
                let w = raw(link.src, c, q) - raw(link.src, c, q & !s) - raw(link.dst, c, s) - v * link.cost.as_f64();
                choices.push((Some(TupleKey { content: c, q, s }), w * cap));
            }
        }
        interfaces.push((Interface::Transmission(l), choices));
    }

    let size = interfaces
        .iter()
        .try_fold(1u64, |acc, (_, ch)| acc.checked_mul(ch.len() as u64))
        .filter(|&n| n <= BRUTE_FORCE_LIMIT);
    if size.is_none() {
        return Err(Error::InstanceTooLarge(format!(
            "more than {BRUTE_FORCE_LIMIT} joint choices"
        )));
    }

    let n = interfaces.len();
    let mut digits = vec![0usize; n];
    let mut best_digits = digits.clone();
    let mut best_total = f64::NEG_INFINITY;
    'outer: loop {
        let total: f64 = digits
            .iter()
            .zip(&interfaces)
            .map(|(&d, (_, ch))| ch[d].1)
            .sum();
        if total > best_total {
            best_total = total;
            best_digits.clone_from(&digits);
        }
        // odometer, last interface varies fastest
        let mut pos = n;
        while pos > 0 {
            pos -= 1;
            digits[pos] += 1;
            if digits[pos] < interfaces[pos].1.len() {
                continue 'outer;
            }
            digits[pos] = 0;
        }
        break;
    }

    let mut fa = FlowAssignment::idle(model);
    for (&d, (iface, choices)) in best_digits.iter().zip(&interfaces) {
        let Some(key) = choices[d].0 else { continue };
        let (amount, weight) = match *iface {
            Interface::Processing(i) => {
                let cpus = model.nodes[i].capacity.as_f64();
                (model.processing_capacity(i, key.content), choices[d].1 / cpus)
            }
            Interface::Transmission(l) => {
                let cap = model.links[l].capacity;
                (cap, choices[d].1 / cap.as_f64())
            }
        };
        let decision = Some(Decision {
            key,
            amount,
            weight: T::lit(weight),
        });
        match *iface {
            Interface::Processing(i) => fa.processing[i] = decision,
            Interface::Transmission(l) => fa.transmission[l] = decision,
        }
    }
    Ok(fa)
}

/// Whether two assignments pick the same tuples with the same amounts.
/// Reported weights are ignored since they may differ in rounding.
pub fn same_choice<T: Scalar>(a: &FlowAssignment<T>, b: &FlowAssignment<T>) -> bool {
    let eq = |x: &[Option<Decision<T>>], y: &[Option<Decision<T>>]| {
        x.len() == y.len()
            && x.iter().zip(y).all(|(p, q)| match (p, q) {
                (None, None) => true,
                (Some(p), Some(q)) => p.key == q.key && p.amount == q.amount,
                _ => false,
            })
    };
    eq(&a.processing, &b.processing) && eq(&a.transmission, &b.transmission)
}

// ---------------------------------------------------------------------------
// Tiny topologies and the Y-cut oracle

/// Micro-networks small enough to reason about by hand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TinyTopology {
    /// `s → p → {d1, d2}` with arcs of `kappa` packets per slot.
    Y { kappa: f64 },
    Chain2,
    Single,
}

impl TinyTopology {
    pub fn name(&self) -> &'static str {
        match self {
            TinyTopology::Y { .. } => "y-network",
            TinyTopology::Chain2 => "chain2",
            TinyTopology::Single => "single",
        }
    }

    pub fn config(&self) -> ScenarioConfig {
        match *self {
            TinyTopology::Y { kappa } => scenarios::y_network(kappa),
            TinyTopology::Chain2 => scenarios::chain2(),
            TinyTopology::Single => scenarios::single(),
        }
    }
}

/// Largest per-stream arrival rate (packets per slot) that the Y-network can
/// carry, `(multicast, unicast)`.
///
/// With in-network duplication one copy crosses `s → p` and the relay
/// copies it onto both branches, so the bottleneck is the smallest arc.
/// Without duplication both copies share `s → p`, which halves that arc's
/// share.
pub fn ycut_capacity_oracle<T: Scalar>(model: &NetworkModel<T>) -> Result<(f64, f64)> {
    let not_y = |why: &str| Error::NotYNetwork(why.to_string());
    if model.node_count() != 4 {
        return Err(not_y("expected 4 nodes"));
    }
    if model.streams.len() != 1 || model.dest_sets.len() != 1 || model.dest_sets[0].width() != 2 {
        return Err(not_y("expected one stream to a two-destination set"));
    }
    let s = model.streams[0].source;
    let leaves = &model.dest_sets[0].members;
    let mut out_of_s = model.out_links[s].iter().map(|&l| model.links[l].dst);
    let (Some(p), None) = (out_of_s.next(), out_of_s.next()) else {
        return Err(not_y("source must have exactly one out-arc"));
    };
    if leaves.contains(&s) || leaves.contains(&p) {
        return Err(not_y("destinations must be the leaves"));
    }
    let edge = |a: usize, b: usize| (a.min(b), a.max(b));
    let allowed = [edge(s, p), edge(p, leaves[0]), edge(p, leaves[1])];
    if model.links.iter().any(|l| !allowed.contains(&edge(l.src, l.dst))) {
        return Err(not_y("arcs outside the Y"));
    }
    let arc = |a: usize, b: usize| {
        model
            .link_between(a, b)
            .map(|l| model.links[l].capacity.as_f64())
            .ok_or_else(|| not_y("missing arc"))
    };
    let trunk = arc(s, p)?;
    let (b1, b2) = (arc(p, leaves[0])?, arc(p, leaves[1])?);
    let service = model.streams[0].service;
    if (model.chain_scaling(service).as_f64() - 1.0).abs() > 1e-12 {
        return Err(not_y("service must pass traffic through unscaled"));
    }
    let branches = b1.min(b2);
    Ok((trunk.min(branches), (trunk / 2.0).min(branches)))
}

// ---------------------------------------------------------------------------
// CSV

#[derive(Debug, Serialize, Deserialize)]
struct CsvRow {
    slot: u64,
    kind: RowKind,
    interface: Option<String>,
    node: String,
    service: String,
    stage: usize,
    dest_set: String,
    q: String,
    s: Option<String>,
    k: Option<usize>,
    amount: f64,
    real: Option<f64>,
    dummy: Option<f64>,
}

/// Writes a ledger with names instead of indices. Amounts are written with
/// shortest round-trip formatting, so reading back is exact.
pub fn write_ledger_csv<T: Scalar, W: Write>(model: &NetworkModel<T>, rows: &[LedgerRow], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for row in rows {
        let c = model
            .contents
            .get(row.content)
            .ok_or_else(|| Error::Ledger(format!("unknown content #{}", row.content)))?;
        let status = |bits: u16| DuplicationStatus::new(bits, c.width).to_string();
        let serve = row.kind == RowKind::Serve;
        w.serialize(CsvRow {
            slot: row.slot,
            kind: row.kind,
            interface: row.interface.map(|i| i.to_string()),
            node: model.nodes[row.node].name.clone(),
            service: model.services[c.service].name.clone(),
            stage: c.stage,
            dest_set: model.dest_sets[c.dest_set].name.clone(),
            q: status(row.q),
            s: serve.then(|| status(row.s)),
            k: (row.kind == RowKind::Delivery).then_some(row.k),
            amount: row.amount,
            real: serve.then_some(row.real),
            dummy: serve.then_some(row.dummy),
        })?;
    }
    w.flush()?;
    Ok(())
}

fn parse_interface(s: &str) -> Option<Interface> {
    let (kind, idx) = s.split_once(':')?;
    let idx: usize = idx.parse().ok()?;
    match kind {
        "proc" => Some(Interface::Processing(idx)),
        "link" => Some(Interface::Transmission(idx)),
        _ => None,
    }
}

/// Reads a ledger written by [`write_ledger_csv`], resolving names against
/// `model`.
pub fn read_ledger_csv<T: Scalar, R: Read>(model: &NetworkModel<T>, reader: R) -> Result<Vec<LedgerRow>> {
    let mut r = csv::Reader::from_reader(reader);
    let mut rows = Vec::new();
    for (line, rec) in r.deserialize::<CsvRow>().enumerate() {
        let rec = rec?;
        let err = |what: String| Error::Ledger(format!("row {}: {what}", line + 1));
        let node = model
            .node_id(&rec.node)
            .ok_or_else(|| err(format!("unknown node `{}`", rec.node)))?;
        let service = model
            .services
            .iter()
            .position(|s| s.name == rec.service)
            .ok_or_else(|| err(format!("unknown service `{}`", rec.service)))?;
        let dest_set = model
            .dest_sets
            .iter()
            .position(|d| d.name == rec.dest_set)
            .ok_or_else(|| err(format!("unknown destination set `{}`", rec.dest_set)))?;
        let content = model
            .content_id(service, rec.stage, dest_set)
            .ok_or_else(|| err(format!("no stage {} for `{}`", rec.stage, rec.service)))?;
        let width = model.contents[content].width;
        let status = |text: &str| {
            DuplicationStatus::parse(text)
                .filter(|d| d.width() == width)
                .map(|d| d.bits())
                .ok_or_else(|| err(format!("bad status `{text}`")))
        };
        let interface = match rec.interface.as_deref() {
            None | Some("") => None,
            Some(text) => Some(parse_interface(text).ok_or_else(|| err(format!("bad interface `{text}`")))?),
        };
        rows.push(LedgerRow {
            slot: rec.slot,
            kind: rec.kind,
            interface,
            node,
            content,
            q: status(&rec.q)?,
            s: rec.s.as_deref().map(status).transpose()?.unwrap_or(0),
            k: rec.k.unwrap_or(0),
            amount: rec.amount,
            real: rec.real.unwrap_or(0.0),
            dummy: rec.dummy.unwrap_or(0.0),
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{Policy, Simulator};
    use crate::model::build_network;
    use crate::policy::ldp_decide;

    fn record(model: &NetworkModel<f64>, policy: Policy, rate: f64, warm: u64, slots: u64) -> Vec<LedgerRow> {
        let mut sim = Simulator::new(model, policy, rate, 7).unwrap();
        for _ in 0..warm {
            sim.step();
        }
        let mut rec = TrailRecorder::new(model);
        for _ in 0..slots {
            sim.step_observed(&mut |r| rec.observe(r));
        }
        rec.finish()
    }

    fn multicast(v: f64) -> Policy {
        Policy::MaxWeight(PolicyParams::new(PolicyKind::Multicast, v).unwrap())
    }

    #[test]
    fn idle_run_balances() {
        let m = build_network::<f64>(&scenarios::chain2()).unwrap();
        let rows = record(&m, multicast(0.0), 0.0, 0, 50);
        let report = audit_ledger(&m, &rows);
        assert!(report.passed(), "{}", report.to_json());
    }

    #[test]
    fn chain_run_passes_all_checks() {
        let m = build_network::<f64>(&scenarios::chain2()).unwrap();
        let rate = m.units.mbps_to_packets_per_slot(3.0);
        let rows = record(&m, multicast(0.0), rate, 500, 2000);
        let report = audit_ledger(&m, &rows);
        assert!(report.passed(), "{}", report.to_json());
        assert!(report.check("conservation").unwrap().checked > 0);
    }

    #[test]
    fn dropped_posting_is_located() {
        let m = build_network::<f64>(&scenarios::chain2()).unwrap();
        let rate = m.units.mbps_to_packets_per_slot(3.0);
        let mut rows = record(&m, multicast(0.0), rate, 200, 500);
        let victim = rows
            .iter()
            .position(|r| r.kind == RowKind::Credit && r.amount > 1.0)
            .unwrap();
        let dropped = rows.remove(victim);
        let c = check_conservation(&m, &rows);
        assert!(!c.passed);
        let locus = c.locus.unwrap();
        assert_eq!(locus.node, m.nodes[dropped.node].name);
        assert!(locus.commodity.starts_with(&commodity_label(&m, dropped.content, None)));
    }

    #[test]
    fn over_assignment_fails_capacity() {
        let m = build_network::<f64>(&scenarios::chain2()).unwrap();
        let rate = m.units.mbps_to_packets_per_slot(3.0);
        let mut rows = record(&m, multicast(0.0), rate, 0, 100);
        assert!(check_capacity(&m, &rows).passed);
        let r = rows.iter_mut().find(|r| r.kind == RowKind::Serve).unwrap();
        r.amount *= 1.5;
        r.dummy += r.amount / 3.0;
        let c = check_capacity(&m, &rows);
        assert!(!c.passed);
        assert_eq!(c.locus.unwrap().first_slot, r_slot(&rows));
    }

    fn r_slot(rows: &[LedgerRow]) -> u64 {
        rows.iter().find(|r| r.kind == RowKind::Serve).unwrap().slot
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let m = build_network::<f64>(&scenarios::chain2()).unwrap();
        let rate = m.units.mbps_to_packets_per_slot(3.0);
        let rows = record(&m, multicast(0.0), rate, 10, 100);
        let mut buf = Vec::new();
        write_ledger_csv(&m, &rows, &mut buf).unwrap();
        let back = read_ledger_csv(&m, buf.as_slice()).unwrap();
        assert_eq!(back, rows);
    }

    #[test]
    fn brute_force_matches_on_zero_and_simple() {
        let m = build_network::<f64>(&scenarios::single()).unwrap();
        let params = PolicyParams::default();
        let mut q = QueueTable::zeros(&m);
        let bf = brute_force_decision(&m, &q, &params).unwrap();
        assert!(bf.is_idle());
        q.set(&m, 0, 0, 1, 12.0);
        let bf = brute_force_decision(&m, &q, &params).unwrap();
        assert!(same_choice(&bf, &ldp_decide(&m, &q, &params)));
        assert!(!bf.is_idle());
    }

    #[test]
    fn brute_force_rejects_large() {
        let m = build_network::<f64>(&scenarios::abilene()).unwrap();
        let q = QueueTable::zeros(&m);
        assert!(matches!(
            brute_force_decision(&m, &q, &PolicyParams::default()),
            Err(Error::InstanceTooLarge(_))
        ));
    }

    #[test]
    fn ycut_values() {
        let m = build_network::<f64>(&scenarios::y_network(10.0)).unwrap();
        assert_eq!(ycut_capacity_oracle(&m).unwrap(), (10.0, 5.0));
        let m = build_network::<f64>(&scenarios::y_network(0.0)).unwrap();
        assert_eq!(ycut_capacity_oracle(&m).unwrap(), (0.0, 0.0));
        let m = build_network::<f64>(&scenarios::chain2()).unwrap();
        assert!(matches!(ycut_capacity_oracle(&m), Err(Error::NotYNetwork(_))));
    }

    #[test]
    fn tiny_topologies_build() {
        for t in [TinyTopology::Y { kappa: 4.0 }, TinyTopology::Chain2, TinyTopology::Single] {
            let m = build_network::<f64>(&t.config()).unwrap();
            assert!(m.node_count() <= 4, "{}", t.name());
        }
    }

    #[test]
    fn mass_is_preserved_by_real_flows() {
        let m = build_network::<f64>(&scenarios::chain2()).unwrap();
        let rate = m.units.mbps_to_packets_per_slot(3.0);
        let mut sim = Simulator::new(&m, multicast(0.0), rate, 3).unwrap();
        let (mut arrived, mut delivered) = (0.0, 0.0);
        let mut rows = Vec::new();
        for _ in 0..1000 {
            rows.clear();
            sim.step_observed(&mut |r| slot_rows(&m, r, &mut rows));
            let (a, d) = ledger_mass(&m, &rows);
            arrived += a;
            delivered += d;
            let held = weighted_mass(&m, sim.queues());
            assert!((held + delivered - arrived).abs() <= 1e-9 * arrived.max(1.0));
        }
    }
}
