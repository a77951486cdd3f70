//! Static network description: nodes, links, service chains, destination
//! sets, commodities, and the conversion from physical units to per-slot
//! internal units.
//!
//! Internally every rate is in packets per slot, every processing capacity in
//! CPU units per slot, and costs are per packet (links) or per CPU-slot
//! (nodes).

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::PolicyParams;
use crate::scalar::Scalar;

/// Largest supported destination-set size. Per-node state grows as `2^D`.
pub const MAX_DESTINATIONS: usize = 16;

// ---------------------------------------------------------------------------
// Units

/// Slot length and packet size, the two constants that tie physical rates to
/// per-slot packet counts.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Units {
    pub slot_s: f64,
    pub packet_bits: f64,
}

impl Units {
    pub fn new(slot_ms: f64, packet_kb: f64) -> Result<Self> {
        if !(slot_ms > 0.0) {
            return Err(Error::NonPositive {
                what: "slot length (ms)".into(),
                value: slot_ms,
            });
        }
        if !(packet_kb > 0.0) {
            return Err(Error::NonPositive {
                what: "packet size (kb)".into(),
                value: packet_kb,
            });
        }
        Ok(Self {
            slot_s: slot_ms * 1e-3,
            packet_bits: packet_kb * 1e3,
        })
    }

    pub fn bps_to_packets_per_slot(&self, bps: f64) -> f64 {
        bps * self.slot_s / self.packet_bits
    }

    pub fn packets_per_slot_to_bps(&self, packets: f64) -> f64 {
        packets * self.packet_bits / self.slot_s
    }

    pub fn mbps_to_packets_per_slot(&self, mbps: f64) -> f64 {
        self.bps_to_packets_per_slot(mbps * 1e6)
    }

    pub fn packets_per_slot_to_mbps(&self, packets: f64) -> f64 {
        self.packets_per_slot_to_bps(packets) / 1e6
    }

    pub fn slots_per_second(&self) -> f64 {
        1.0 / self.slot_s
    }
}

// ---------------------------------------------------------------------------
// Scenario file schema (physical units)

/// A compute-capable network node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    pub name: String,
    /// Processing capacity, CPU units.
    pub cpus: f64,
    /// Processing cost per CPU per second.
    pub cost_per_cpu_s: f64,
}

/// A physical link. With `bidirectional` it expands into two directed arcs
/// that each get the full capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkSpec {
    pub from: String,
    pub to: String,
    pub gbps: f64,
    /// Transmission cost per Gb.
    pub cost_per_gb: f64,
    #[serde(default)]
    pub bidirectional: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FunctionSpec {
    /// Output packets per input packet.
    pub scaling: f64,
    /// Input rate one CPU can sustain, Mbps.
    pub mbps_per_cpu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ServiceSpec {
    pub name: String,
    pub functions: Vec<FunctionSpec>,
}

/// Ordered destinations; the order fixes the bit positions of statuses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DestinationSet {
    pub name: String,
    pub members: Vec<String>,
}

/// Cross product of sources, services and destination sets, each
/// combination being one independent arrival stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSpec {
    pub sources: Vec<String>,
    pub services: Vec<String>,
    pub dest_sets: Vec<String>,
}

/// Complete scenario as read from a TOML or JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(default = "default_slot_ms")]
    pub slot_ms: f64,
    #[serde(default = "default_packet_kb")]
    pub packet_kb: f64,
    pub nodes: Vec<NodeSpec>,
    #[serde(default)]
    pub links: Vec<LinkSpec>,
    #[serde(default)]
    pub services: Vec<ServiceSpec>,
    #[serde(default)]
    pub dest_sets: Vec<DestinationSet>,
    #[serde(default)]
    pub streams: Vec<StreamSpec>,
    /// Mean rate of every stream, Mbps.
    #[serde(default)]
    pub arrival_mbps: f64,
    #[serde(default)]
    pub policy: PolicyParams,
    #[serde(default = "default_horizon")]
    pub horizon_slots: u64,
    #[serde(default)]
    pub seed: u64,
}

fn default_slot_ms() -> f64 {
    1.0
}

fn default_packet_kb() -> f64 {
    1.0
}

fn default_horizon() -> u64 {
    100_000
}

impl ScenarioConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Parse(e.to_string()))
    }

    /// Loads a scenario file, choosing the format from the extension.
    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json_str(&text),
            _ => Self::from_toml_str(&text),
        }
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn units(&self) -> Result<Units> {
        Units::new(self.slot_ms, self.packet_kb)
    }

    /// Per-stream arrival rate in packets per slot.
    pub fn arrival_packets_per_slot(&self) -> Result<f64> {
        Ok(self.units()?.mbps_to_packets_per_slot(self.arrival_mbps))
    }
}

// ---------------------------------------------------------------------------
// Duplication status

/// Binary vector over an ordered destination set. Entry `q_1` is stored in
/// the most significant of the `width` bits, so numeric order of `bits`
/// equals lexicographic order of the vector.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DuplicationStatus {
    bits: u16,
    width: u8,
}

impl DuplicationStatus {
    pub fn new(bits: u16, width: usize) -> Self {
        assert!((1..=MAX_DESTINATIONS).contains(&width), "width {width}");
        assert!(
            width == 16 || bits >> width == 0,
            "bits {bits:#b} exceed width {width}"
        );
        Self {
            bits,
            width: width as u8,
        }
    }

    /// Builds a status from its vector form, e.g. `[1, 0]`.
    pub fn from_vector(v: &[u8]) -> Self {
        let bits = v.iter().fold(0u16, |acc, &b| (acc << 1) | u16::from(b != 0));
        Self::new(bits, v.len())
    }

    /// Parses `"10"` / `"[1,0]"` style strings.
    pub fn parse(s: &str) -> Option<Self> {
        let digits: Vec<u8> = s
            .chars()
            .filter(|c| !matches!(c, '[' | ']' | ',' | ' '))
            .map(|c| match c {
                '0' => Some(0),
                '1' => Some(1),
                _ => None,
            })
            .collect::<Option<_>>()?;
        if digits.is_empty() || digits.len() > MAX_DESTINATIONS {
            return None;
        }
        Some(Self::from_vector(&digits))
    }

    pub fn all(width: usize) -> Self {
        Self::new(full_mask(width), width)
    }

    /// `b_k` for zero-based `k`.
    pub fn unit(k: usize, width: usize) -> Self {
        Self::new(unit_mask(k, width), width)
    }

    pub fn bits(self) -> u16 {
        self.bits
    }

    pub fn width(self) -> usize {
        self.width as usize
    }

    pub fn is_empty(self) -> bool {
        self.bits == 0
    }

    pub fn count(self) -> u32 {
        self.bits.count_ones()
    }

    /// Whether destination `k` (zero-based) is set.
    pub fn has(self, k: usize) -> bool {
        self.bits & unit_mask(k, self.width()) != 0
    }

    /// `other ∈ 2^self`.
    pub fn contains(self, other: Self) -> bool {
        other.bits & !self.bits == 0
    }

    /// `self − other`; meaningful when `other ∈ 2^self`.
    pub fn minus(self, other: Self) -> Self {
        Self::new(self.bits & !other.bits, self.width())
    }

    pub fn complement(self) -> Self {
        Self::new(full_mask(self.width()) & !self.bits, self.width())
    }

    pub fn to_vector(self) -> Vec<u8> {
        (0..self.width()).map(|k| u8::from(self.has(k))).collect()
    }
}

impl fmt::Debug for DuplicationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

impl fmt::Display for DuplicationStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.to_vector() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

pub(crate) fn full_mask(width: usize) -> u16 {
    if width >= 16 {
        u16::MAX
    } else {
        (1u16 << width) - 1
    }
}

pub(crate) fn unit_mask(k: usize, width: usize) -> u16 {
    debug_assert!(k < width);
    1u16 << (width - 1 - k)
}

/// All efficient splits `q = s + r` with `s ≠ 0`, ordered by descending `s`
/// (so the no-duplication case `s = q` comes first).
pub fn duplication_splits(q: DuplicationStatus) -> Result<Vec<(DuplicationStatus, DuplicationStatus)>> {
    if q.is_empty() {
        return Err(Error::EmptyStatus);
    }
    Ok(submasks_desc(q.bits)
        .map(|s| {
            let s = DuplicationStatus::new(s, q.width());
            (s, q.minus(s))
        })
        .collect())
}

/// Non-zero submasks of `q` in descending numeric order.
pub(crate) fn submasks_desc(q: u16) -> impl Iterator<Item = u16> {
    let mut next = Some(q);
    std::iter::from_fn(move || {
        let s = next?;
        let following = s.wrapping_sub(1) & q;
        next = if following == 0 { None } else { Some(following) };
        if s == 0 {
            None
        } else {
            Some(s)
        }
    })
}

/// All `(q, s)` pairs for a destination-set width, `q` ascending then `s`
/// descending. There are `3^D − 2^D` of them.
pub fn split_pairs(width: usize) -> Vec<(u16, u16)> {
    (1..=full_mask(width))
        .flat_map(|q| submasks_desc(q).map(move |s| (q, s)))
        .collect()
}

// ---------------------------------------------------------------------------
// Commodities

/// `(φ, m, 𝒟, q)`: a queue class. `stage` is one-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CommodityKey {
    pub service: usize,
    pub stage: usize,
    pub dest_set: usize,
    pub status: DuplicationStatus,
}

/// One key per `(φ, m ∈ 1..M_φ, 𝒟, q ≠ 0)`, in lexicographic order.
pub fn enumerate_commodities(services: &[ServiceSpec], dest_sets: &[DestinationSet]) -> Vec<CommodityKey> {
    let mut keys = Vec::new();
    for (service, spec) in services.iter().enumerate() {
        for stage in 1..=spec.functions.len() + 1 {
            for (dest_set, ds) in dest_sets.iter().enumerate() {
                let width = ds.members.len();
                if width == 0 || width > MAX_DESTINATIONS {
                    continue;
                }
                for bits in 1..=full_mask(width) {
                    keys.push(CommodityKey {
                        service,
                        stage,
                        dest_set,
                        status: DuplicationStatus::new(bits, width),
                    });
                }
            }
        }
    }
    keys
}

// ---------------------------------------------------------------------------
// Normalized model

#[derive(Debug, Clone)]
pub struct Node<T> {
    pub name: String,
    /// CPU units per slot.
    pub capacity: T,
    /// Cost per CPU unit per slot.
    pub cost: T,
}

#[derive(Debug, Clone)]
pub struct Link<T> {
    pub src: usize,
    pub dst: usize,
    /// Packets per slot.
    pub capacity: T,
    /// Cost per packet.
    pub cost: T,
}

#[derive(Debug, Clone)]
pub struct Function<T> {
    pub scaling: T,
    /// CPU units per input packet.
    pub workload: T,
}

#[derive(Debug, Clone)]
pub struct Service<T> {
    pub name: String,
    pub functions: Vec<Function<T>>,
}

impl<T> Service<T> {
    /// `M_φ`.
    pub fn stages(&self) -> usize {
        self.functions.len() + 1
    }
}

#[derive(Debug, Clone)]
pub struct DestSet {
    pub name: String,
    pub members: Vec<usize>,
}

impl DestSet {
    pub fn width(&self) -> usize {
        self.members.len()
    }

    /// Position of `node` in the set, if it is a member.
    pub fn position(&self, node: usize) -> Option<usize> {
        self.members.iter().position(|&m| m == node)
    }
}

/// `c = (φ, m, 𝒟)` together with its layout in the queue table.
#[derive(Debug, Clone)]
pub struct Content {
    pub service: usize,
    pub stage: usize,
    pub dest_set: usize,
    pub width: usize,
    /// First slot of this content's `2^D` block in a node's queue row.
    pub offset: usize,
    /// Content holding the output of processing this one.
    pub next: Option<usize>,
}

impl Content {
    pub fn is_final(&self) -> bool {
        self.next.is_none()
    }

    pub fn key(&self, status: u16) -> CommodityKey {
        CommodityKey {
            service: self.service,
            stage: self.stage,
            dest_set: self.dest_set,
            status: DuplicationStatus::new(status, self.width),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Stream {
    pub source: usize,
    pub service: usize,
    pub dest_set: usize,
    /// Stage-1 content the stream feeds.
    pub content: usize,
}

/// Validated, normalized network. Immutable once built.
#[derive(Debug, Clone)]
pub struct NetworkModel<T> {
    pub name: String,
    pub units: Units,
    pub nodes: Vec<Node<T>>,
    pub links: Vec<Link<T>>,
    pub out_links: Vec<Vec<usize>>,
    pub in_links: Vec<Vec<usize>>,
    pub services: Vec<Service<T>>,
    pub dest_sets: Vec<DestSet>,
    pub contents: Vec<Content>,
    pub streams: Vec<Stream>,
    /// Queue slots per node (sum of `2^D` over contents).
    pub stride: usize,
    content_lookup: HashMap<(usize, usize, usize), usize>,
    /// `[content * nodes + node]`: the bit `b_k` if `node = d_k` and the
    /// content is final-stage, else 0.
    dest_bit: Vec<u16>,
    /// `[node * contents + content]`: input packets processable per slot.
    proc_cap: Vec<T>,
    splits: Vec<Vec<(u16, u16)>>,
}

/// Validates a scenario and builds the normalized model.
pub fn build_network<T: Scalar>(config: &ScenarioConfig) -> Result<NetworkModel<T>> {
    let units = config.units()?;
    let mut node_ids = HashMap::new();
    let mut nodes = Vec::with_capacity(config.nodes.len());
    for (i, n) in config.nodes.iter().enumerate() {
        non_negative(&format!("cpus of node `{}`", n.name), n.cpus)?;
        non_negative(&format!("cost of node `{}`", n.name), n.cost_per_cpu_s)?;
        if node_ids.insert(n.name.clone(), i).is_some() {
            return Err(Error::Duplicate {
                kind: "node",
                name: n.name.clone(),
            });
        }
        nodes.push(Node {
            name: n.name.clone(),
            capacity: T::lit(n.cpus),
            cost: T::lit(n.cost_per_cpu_s * units.slot_s),
        });
    }
    let node = |name: &str| {
        node_ids
            .get(name)
            .copied()
            .ok_or_else(|| Error::DanglingNode(name.to_string()))
    };

    let mut links: Vec<Link<T>> = Vec::new();
    for l in &config.links {
        let (src, dst) = (node(&l.from)?, node(&l.to)?);
        let what = format!("link {}->{}", l.from, l.to);
        non_negative(&format!("capacity of {what}"), l.gbps)?;
        non_negative(&format!("cost of {what}"), l.cost_per_gb)?;
        if src == dst {
            return Err(Error::InvalidScenario(format!("self-loop on `{}`", l.from)));
        }
        let capacity = T::lit(units.bps_to_packets_per_slot(l.gbps * 1e9));
        let cost = T::lit(l.cost_per_gb * units.packet_bits / 1e9);
        let mut arcs = vec![(src, dst)];
        if l.bidirectional {
            arcs.push((dst, src));
        }
        for (src, dst) in arcs {
            if links.iter().any(|x| x.src == src && x.dst == dst) {
                return Err(Error::Duplicate {
                    kind: "link",
                    name: format!("{}->{}", nodes[src].name, nodes[dst].name),
                });
            }
            links.push(Link {
                src,
                dst,
                capacity,
                cost,
            });
        }
    }
    let mut out_links = vec![Vec::new(); nodes.len()];
    let mut in_links = vec![Vec::new(); nodes.len()];
    for (l, link) in links.iter().enumerate() {
        out_links[link.src].push(l);
        in_links[link.dst].push(l);
    }

    let mut service_ids = HashMap::new();
    let mut services = Vec::new();
    for (i, s) in config.services.iter().enumerate() {
        if s.functions.is_empty() {
            return Err(Error::InvalidScenario(format!(
                "service `{}` needs at least one function",
                s.name
            )));
        }
        if service_ids.insert(s.name.clone(), i).is_some() {
            return Err(Error::Duplicate {
                kind: "service",
                name: s.name.clone(),
            });
        }
        let mut functions = Vec::new();
        for (m, f) in s.functions.iter().enumerate() {
            positive(&format!("scaling of {}[{}]", s.name, m + 1), f.scaling)?;
            positive(&format!("throughput of {}[{}]", s.name, m + 1), f.mbps_per_cpu)?;
            functions.push(Function {
                scaling: T::lit(f.scaling),
                workload: T::lit(1.0 / units.mbps_to_packets_per_slot(f.mbps_per_cpu)),
            });
        }
        services.push(Service {
            name: s.name.clone(),
            functions,
        });
    }

    let mut set_ids = HashMap::new();
    let mut dest_sets = Vec::new();
    for (i, ds) in config.dest_sets.iter().enumerate() {
        if ds.members.is_empty() || ds.members.len() > MAX_DESTINATIONS {
            return Err(Error::InvalidScenario(format!(
                "destination set `{}` must have 1..={MAX_DESTINATIONS} members",
                ds.name
            )));
        }
        let members = ds.members.iter().map(|m| node(m)).collect::<Result<Vec<_>>>()?;
        let mut sorted = members.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != members.len() {
            return Err(Error::InvalidScenario(format!(
                "destination set `{}` repeats a member",
                ds.name
            )));
        }
        if set_ids.insert(ds.name.clone(), i).is_some() {
            return Err(Error::Duplicate {
                kind: "destination set",
                name: ds.name.clone(),
            });
        }
        dest_sets.push(DestSet {
            name: ds.name.clone(),
            members,
        });
    }

    let mut contents = Vec::new();
    let mut content_lookup = HashMap::new();
    let mut offset = 0;
    for (service, s) in services.iter().enumerate() {
        for stage in 1..=s.stages() {
            for (dest_set, ds) in dest_sets.iter().enumerate() {
                content_lookup.insert((service, stage, dest_set), contents.len());
                contents.push(Content {
                    service,
                    stage,
                    dest_set,
                    width: ds.width(),
                    offset,
                    next: None,
                });
                offset += 1usize << ds.width();
            }
        }
    }
    let stride = offset;
    for c in 0..contents.len() {
        let Content {
            service,
            stage,
            dest_set,
            ..
        } = contents[c];
        contents[c].next = content_lookup.get(&(service, stage + 1, dest_set)).copied();
    }

    let mut dest_bit = vec![0u16; contents.len() * nodes.len()];
    for (c, content) in contents.iter().enumerate() {
        if content.is_final() {
            let ds = &dest_sets[content.dest_set];
            for (k, &d) in ds.members.iter().enumerate() {
                dest_bit[c * nodes.len() + d] = unit_mask(k, ds.width());
            }
        }
    }

    let mut proc_cap = vec![T::zero(); nodes.len() * contents.len()];
    for (i, n) in nodes.iter().enumerate() {
        for (c, content) in contents.iter().enumerate() {
            if content.is_final() {
                continue;
            }
            let workload = services[content.service].functions[content.stage - 1].workload;
            proc_cap[i * contents.len() + c] = max_amount_within(n.capacity, workload);
        }
    }

    let mut streams = Vec::new();
    for st in &config.streams {
        for src in &st.sources {
            let source = node(src)?;
            for svc in &st.services {
                let service = *service_ids.get(svc).ok_or_else(|| Error::UnknownName {
                    kind: "service",
                    name: svc.clone(),
                })?;
                for set in &st.dest_sets {
                    let dest_set = *set_ids.get(set).ok_or_else(|| Error::UnknownName {
                        kind: "destination set",
                        name: set.clone(),
                    })?;
                    streams.push(Stream {
                        source,
                        service,
                        dest_set,
                        content: content_lookup[&(service, 1, dest_set)],
                    });
                }
            }
        }
    }

    let max_width = dest_sets.iter().map(DestSet::width).max().unwrap_or(0);
    let splits = (0..=max_width)
        .map(|w| if w == 0 { Vec::new() } else { split_pairs(w) })
        .collect();

    Ok(NetworkModel {
        name: config.name.clone(),
        units,
        nodes,
        links,
        out_links,
        in_links,
        services,
        dest_sets,
        contents,
        streams,
        stride,
        content_lookup,
        dest_bit,
        proc_cap,
        splits,
    })
}

/// Largest `x` with `x · workload ≤ capacity` in floating point.
fn max_amount_within<T: Scalar>(capacity: T, workload: T) -> T {
    let mut x = capacity / workload;
    while x > T::zero() && x * workload > capacity {
        x = x - x * T::epsilon();
    }
    x
}

fn non_negative(what: &str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Negative {
            what: what.to_string(),
            value,
        })
    }
}

fn positive(what: &str, value: f64) -> Result<()> {
    if value > 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::NonPositive {
            what: what.to_string(),
            value,
        })
    }
}

impl<T: Scalar> NetworkModel<T> {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn content_id(&self, service: usize, stage: usize, dest_set: usize) -> Option<usize> {
        self.content_lookup.get(&(service, stage, dest_set)).copied()
    }

    pub fn content_of(&self, key: &CommodityKey) -> Option<usize> {
        self.content_id(key.service, key.stage, key.dest_set)
    }

    pub fn node_id(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n.name == name)
    }

    /// Function applied when processing `content`, if it is not final-stage.
    pub fn function(&self, content: usize) -> Option<&Function<T>> {
        let c = &self.contents[content];
        self.services[c.service].functions.get(c.stage - 1)
    }

    /// Input packets of `content` that node `node` can process in one slot.
    pub fn processing_capacity(&self, node: usize, content: usize) -> T {
        self.proc_cap[node * self.contents.len() + content]
    }

    /// `b_k` if `node = d_k` of a final-stage `content`, else 0.
    pub fn destination_bit(&self, content: usize, node: usize) -> u16 {
        self.dest_bit[content * self.nodes.len() + node]
    }

    /// Whether `(node, content, status)` is a destination-state queue.
    pub fn is_destination_state(&self, node: usize, content: usize, status: u16) -> bool {
        status & self.destination_bit(content, node) != 0
    }

    /// `(q, s)` pairs for a destination-set width.
    pub fn splits(&self, width: usize) -> &[(u16, u16)] {
        &self.splits[width]
    }

    /// Product of scaling factors over the whole chain of `service`.
    pub fn chain_scaling(&self, service: usize) -> T {
        self.services[service]
            .functions
            .iter()
            .fold(T::one(), |acc, f| acc * f.scaling)
    }

    /// Product of scaling factors applied before reaching `content`'s stage.
    pub fn scaling_before(&self, content: usize) -> T {
        let c = &self.contents[content];
        self.services[c.service].functions[..c.stage - 1]
            .iter()
            .fold(T::one(), |acc, f| acc * f.scaling)
    }

    pub fn sources(&self) -> Vec<usize> {
        let mut s: Vec<usize> = self.streams.iter().map(|s| s.source).collect();
        s.sort_unstable();
        s.dedup();
        s
    }

    pub fn commodities(&self) -> impl Iterator<Item = (usize, u16)> + '_ {
        self.contents
            .iter()
            .enumerate()
            .flat_map(|(c, content)| (1..=full_mask(content.width)).map(move |q| (c, q)))
    }

    pub fn link_name(&self, l: usize) -> String {
        let link = &self.links[l];
        format!("{}->{}", self.nodes[link.src].name, self.nodes[link.dst].name)
    }

    pub fn link_between(&self, src: usize, dst: usize) -> Option<usize> {
        self.out_links[src].iter().copied().find(|&l| self.links[l].dst == dst)
    }
}
