//! Time-slotted simulation loop, Poisson arrivals, metrics, stability
//! detection and parameter sweeps.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{full_mask, unit_mask, NetworkModel};
use crate::policy::{ldp_decide, randomized_decide, PolicyKind, PolicyParams, RandomizedPolicySpec};
use crate::queueing::{
    apply_slot_in_place, consume_in_place, serve_and_split, Delivery, DeliveryLog, FlowAssignment, Interface,
    Posting, QueueTable, SlotLedger,
};
use crate::scalar::Scalar;

// ---------------------------------------------------------------------------
// Arrivals

/// Independent Poisson streams entering stage 1 at their sources.
#[derive(Debug, Clone)]
pub struct ArrivalSpec {
    /// `(source, stage-1 content, destination-set width)` per stream.
    pub streams: Vec<(usize, usize, usize)>,
    /// Mean packets per slot of every stream.
    pub rate: f64,
    /// Enqueue each packet once per destination with unit statuses instead
    /// of once with the all-ones status.
    pub unicast: bool,
}

impl ArrivalSpec {
    pub fn new<T: Scalar>(model: &NetworkModel<T>, rate: f64, unicast: bool) -> Result<Self> {
        if !(rate >= 0.0 && rate.is_finite()) {
            return Err(Error::Negative {
                what: "arrival rate".into(),
                value: rate,
            });
        }
        Ok(Self {
            streams: model
                .streams
                .iter()
                .map(|s| (s.source, s.content, model.contents[s.content].width))
                .collect(),
            rate,
            unicast,
        })
    }

    /// Arrival postings for one packet count per stream.
    pub fn expand<T: Scalar>(&self, counts: &[f64], out: &mut Vec<Posting<T>>) {
        for (&(source, content, width), &n) in self.streams.iter().zip(counts) {
            if n <= 0.0 {
                continue;
            }
            let amount = T::lit(n);
            if self.unicast {
                for k in 0..width {
                    out.push(Posting {
                        node: source,
                        content,
                        status: unit_mask(k, width),
                        amount,
                    });
                }
            } else {
                out.push(Posting {
                    node: source,
                    content,
                    status: full_mask(width),
                    amount,
                });
            }
        }
    }

    fn sample<T: Scalar>(&self, rng: &mut ChaCha8Rng, counts: &mut Vec<f64>, out: &mut Vec<Posting<T>>) {
        counts.clear();
        match Poisson::new(self.rate) {
            Ok(dist) => counts.extend(self.streams.iter().map(|_| dist.sample(rng))),
            Err(_) => counts.resize(self.streams.len(), 0.0),
        }
        self.expand(counts, out);
    }
}

// ---------------------------------------------------------------------------
// Policy selection

#[derive(Debug, Clone)]
pub enum Policy {
    MaxWeight(PolicyParams),
    Randomized(RandomizedPolicySpec),
}

impl Policy {
    pub fn kind(&self) -> PolicyKind {
        match self {
            Policy::MaxWeight(p) => p.kind,
            Policy::Randomized(_) => PolicyKind::Randomized,
        }
    }

    pub fn v(&self) -> f64 {
        match self {
            Policy::MaxWeight(p) => p.v,
            Policy::Randomized(_) => 0.0,
        }
    }

    /// Whether arrivals are split per destination.
    pub fn unicast_arrivals(&self) -> bool {
        self.kind() == PolicyKind::Unicast
    }
}

// ---------------------------------------------------------------------------
// Metrics

/// Quantities recorded for a single slot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SlotMetrics {
    /// Resource cost of the decisions, dummies included.
    pub cost: f64,
    /// Resource cost of the real (non-dummy) operated packets.
    pub cost_real: f64,
    /// `‖Q‖₁` at the end of the slot.
    pub backlog: f64,
    /// `‖Q‖₂² / 2` at the end of the slot.
    pub lyapunov: f64,
    pub delivered: f64,
    pub dummy: f64,
}

/// `h(t)` from a ledger: `Σ e_i·r·x_proc + Σ e_ij·x_link`, either on
/// requested or on real amounts.
pub fn ledger_cost<T: Scalar>(model: &NetworkModel<T>, ledger: &SlotLedger<T>, real_only: bool) -> T {
    ledger
        .services
        .iter()
        .map(|r| {
            let amount = if real_only { r.real } else { r.requested };
            match r.interface {
                Interface::Processing(i) => {
                    let workload = model.function(r.key.content).map_or(T::zero(), |f| f.workload);
                    model.nodes[i].cost * workload * amount
                }
                Interface::Transmission(l) => model.links[l].cost * amount,
            }
        })
        .sum()
}

/// Everything that happened in one slot, as handed to observers.
#[derive(Debug)]
pub struct SlotRecord<'a, T> {
    pub slot: u64,
    pub before: &'a QueueTable<T>,
    pub assignment: &'a FlowAssignment<T>,
    pub ledger: &'a SlotLedger<T>,
    pub arrivals: &'a [Posting<T>],
    pub deliveries: &'a [Delivery<T>],
    pub after: &'a QueueTable<T>,
    pub metrics: SlotMetrics,
}

// ---------------------------------------------------------------------------
// Simulator

/// One simulation instance: model, policy, arrival process and state.
pub struct Simulator<'m, T: Scalar> {
    model: &'m NetworkModel<T>,
    policy: Policy,
    arrivals: ArrivalSpec,
    queues: QueueTable<T>,
    deliveries: DeliveryLog<T>,
    rng: ChaCha8Rng,
    slot: u64,
    // scratch
    counts: Vec<f64>,
    arrival_buf: Vec<Posting<T>>,
    delivery_buf: Vec<Delivery<T>>,
}

impl<'m, T: Scalar> Simulator<'m, T> {
    pub fn new(model: &'m NetworkModel<T>, policy: Policy, rate: f64, seed: u64) -> Result<Self> {
        if let Policy::Randomized(spec) = &policy {
            spec.validate(model)?;
        }
        if let Policy::MaxWeight(p) = &policy {
            PolicyParams::new(p.kind, p.v)?;
        }
        let arrivals = ArrivalSpec::new(model, rate, policy.unicast_arrivals())?;
        Ok(Self {
            model,
            policy,
            arrivals,
            queues: QueueTable::zeros(model),
            deliveries: DeliveryLog::new(model),
            rng: ChaCha8Rng::seed_from_u64(seed),
            slot: 0,
            counts: Vec::new(),
            arrival_buf: Vec::new(),
            delivery_buf: Vec::new(),
        })
    }

    pub fn queues(&self) -> &QueueTable<T> {
        &self.queues
    }

    pub fn deliveries(&self) -> &DeliveryLog<T> {
        &self.deliveries
    }

    pub fn slot(&self) -> u64 {
        self.slot
    }

    pub fn model(&self) -> &NetworkModel<T> {
        self.model
    }

    /// Advances one slot: decide on the start-of-slot snapshot, serve,
    /// credit postings and fresh arrivals, consume at destinations.
    pub fn step(&mut self) -> SlotMetrics {
        self.step_observed(&mut |_| {})
    }

    pub fn step_observed(&mut self, observer: &mut dyn FnMut(&SlotRecord<'_, T>)) -> SlotMetrics {
        let model = self.model;
        let assignment = match &self.policy {
            Policy::MaxWeight(p) => ldp_decide(model, &self.queues, p),
            Policy::Randomized(spec) => randomized_decide(model, spec, &mut self.rng),
        };
        let ledger = serve_and_split(model, &self.queues, &assignment).expect("policies respect capacity");
        self.arrival_buf.clear();
        self.arrivals
            .sample(&mut self.rng, &mut self.counts, &mut self.arrival_buf);
        let before = self.queues.clone();
        apply_slot_in_place(model, &mut self.queues, &ledger, &self.arrival_buf);
        self.delivery_buf.clear();
        consume_in_place(model, &mut self.queues, &mut self.delivery_buf);
        self.deliveries.record(&self.delivery_buf);

        let metrics = SlotMetrics {
            cost: ledger_cost(model, &ledger, false).as_f64(),
            cost_real: ledger_cost(model, &ledger, true).as_f64(),
            backlog: self.queues.total().as_f64(),
            lyapunov: self.queues.lyapunov().as_f64(),
            delivered: self.delivery_buf.iter().map(|d| d.amount.as_f64()).sum(),
            dummy: ledger.dummy_total().as_f64(),
        };
        observer(&SlotRecord {
            slot: self.slot,
            before: &before,
            assignment: &assignment,
            ledger: &ledger,
            arrivals: &self.arrival_buf,
            deliveries: &self.delivery_buf,
            after: &self.queues,
            metrics,
        });
        self.slot += 1;
        metrics
    }
}

// ---------------------------------------------------------------------------
// Runs

/// Stability test on a backlog series: compare the means of the last two
/// windows of `window_frac` of the series each.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityConfig {
    pub window_frac: f64,
    pub growth_ratio: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        Self {
            window_frac: 0.2,
            growth_ratio: 1.10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StabilityVerdict {
    pub stable: bool,
    pub growth: f64,
    /// Mean backlog of the last window; infinite when unstable.
    pub stable_mean: f64,
}

/// Classifies a backlog series as stable or growing.
pub fn detect_stability(series: &[f64], cfg: &StabilityConfig) -> Result<StabilityVerdict> {
    let window = (series.len() as f64 * cfg.window_frac).floor() as usize;
    if window == 0 || 2 * window > series.len() {
        return Err(Error::SeriesTooShort { len: series.len() });
    }
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let n = series.len();
    let last = mean(&series[n - window..]);
    let prev = mean(&series[n - 2 * window..n - window]);
    let growth = if prev > 0.0 {
        last / prev
    } else if last > 0.0 {
        f64::INFINITY
    } else {
        1.0
    };
    let stable = growth <= cfg.growth_ratio;
    Ok(StabilityVerdict {
        stable,
        growth,
        stable_mean: if stable { last } else { f64::INFINITY },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub slots: u64,
    pub seed: u64,
    /// Timeline sampling period `K`.
    pub sample_every: u64,
    /// Fraction of initial slots excluded from averages.
    pub warmup_frac: f64,
    pub stability: StabilityConfig,
}

impl RunConfig {
    pub fn new(slots: u64, seed: u64) -> Self {
        Self {
            slots,
            seed,
            sample_every: 100,
            warmup_frac: 0.1,
            stability: StabilityConfig::default(),
        }
    }

    pub fn full_resolution(mut self) -> Self {
        self.sample_every = 1;
        self
    }

    fn warmup_slots(&self) -> u64 {
        (self.slots as f64 * self.warmup_frac).floor() as u64
    }
}

/// One timeline point, aggregated over a block of `K` slots.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    /// Last slot of the block.
    pub slot: u64,
    /// Mean end-of-slot backlog over the block.
    pub backlog_total: f64,
    /// Mean per-slot cost over the block.
    pub cost: f64,
    pub cost_real: f64,
    /// Delivered copies in the block.
    pub delivered: f64,
    /// Dummy packets in the block.
    pub dummy: f64,
}

/// Time averages over the post-warm-up part of a run, internal units.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Averages {
    pub backlog: f64,
    pub cost: f64,
    pub cost_real: f64,
    pub lyapunov: f64,
    pub delivered: f64,
    pub dummy: f64,
}

/// Delivered rate to one destination of one `(service, dest_set)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Throughput {
    pub service: usize,
    pub dest_set: usize,
    pub k: usize,
    /// Packets per slot, measured after warm-up.
    pub delivered_rate: f64,
    /// Stream rate summed over sources, scaled through the chain.
    pub expected_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub slots: u64,
    pub policy: PolicyKind,
    pub v: f64,
    pub rate: f64,
    pub timeline: Vec<Sample>,
    pub averages: Averages,
    pub verdict: StabilityVerdict,
    pub throughput: Vec<Throughput>,
    /// Slots per second, for converting per-slot averages.
    pub slots_per_second: f64,
}

impl RunResult {
    pub fn cost_per_second(&self) -> f64 {
        self.averages.cost * self.slots_per_second
    }

    pub fn cost_real_per_second(&self) -> f64 {
        self.averages.cost_real * self.slots_per_second
    }
}

/// Runs a scenario for `cfg.slots` slots from empty queues.
pub fn run<T: Scalar>(model: &NetworkModel<T>, policy: Policy, rate: f64, cfg: &RunConfig) -> Result<RunResult> {
    run_observed(model, policy, rate, cfg, &mut |_| {})
}

/// [`run`] with a per-slot observer (ledger dumps, audits).
pub fn run_observed<T: Scalar>(
    model: &NetworkModel<T>,
    policy: Policy,
    rate: f64,
    cfg: &RunConfig,
    observer: &mut dyn FnMut(&SlotRecord<'_, T>),
) -> Result<RunResult> {
    if cfg.slots == 0 {
        return Err(Error::ZeroHorizon);
    }
    let k = cfg.sample_every.max(1);
    let kind = policy.kind();
    let v = policy.v();
    let mut sim = Simulator::new(model, policy, rate, cfg.seed)?;
    let warmup = cfg.warmup_slots();
    let mut timeline = Vec::with_capacity(cfg.slots.div_ceil(k) as usize);
    let mut block = (0u64, SlotMetrics::default());
    let mut sums = SlotMetrics::default();
    let mut at_warmup: Option<DeliveryLog<T>> = (warmup == 0).then(|| DeliveryLog::new(model));

    for t in 0..cfg.slots {
        if t == warmup && at_warmup.is_none() {
            at_warmup = Some(sim.deliveries().clone());
        }
        let m = sim.step_observed(observer);
        block.0 += 1;
        accumulate(&mut block.1, &m);
        if t >= warmup {
            accumulate(&mut sums, &m);
        }
        if block.0 == k || t + 1 == cfg.slots {
            let n = block.0 as f64;
            timeline.push(Sample {
                slot: t,
                backlog_total: block.1.backlog / n,
                cost: block.1.cost / n,
                cost_real: block.1.cost_real / n,
                delivered: block.1.delivered,
                dummy: block.1.dummy,
            });
            block = (0, SlotMetrics::default());
        }
    }
    let measured = (cfg.slots - warmup) as f64;
    let averages = Averages {
        backlog: sums.backlog / measured,
        cost: sums.cost / measured,
        cost_real: sums.cost_real / measured,
        lyapunov: sums.lyapunov / measured,
        delivered: sums.delivered / measured,
        dummy: sums.dummy / measured,
    };
    let series: Vec<f64> = timeline.iter().map(|s| s.backlog_total).collect();
    let verdict = detect_stability(&series, &cfg.stability).unwrap_or(StabilityVerdict {
        stable: true,
        growth: 1.0,
        stable_mean: averages.backlog,
    });
    let start = at_warmup.unwrap_or_else(|| DeliveryLog::new(model));
    let throughput = throughput_table(model, &start, sim.deliveries(), measured, rate);
    Ok(RunResult {
        slots: cfg.slots,
        policy: kind,
        v,
        rate,
        timeline,
        averages,
        verdict,
        throughput,
        slots_per_second: model.units.slots_per_second(),
    })
}

fn accumulate(acc: &mut SlotMetrics, m: &SlotMetrics) {
    acc.cost += m.cost;
    acc.cost_real += m.cost_real;
    acc.backlog += m.backlog;
    acc.lyapunov += m.lyapunov;
    acc.delivered += m.delivered;
    acc.dummy += m.dummy;
}

fn throughput_table<T: Scalar>(
    model: &NetworkModel<T>,
    start: &DeliveryLog<T>,
    end: &DeliveryLog<T>,
    slots: f64,
    rate: f64,
) -> Vec<Throughput> {
    let mut out = Vec::new();
    for (service, _) in model.services.iter().enumerate() {
        let scaling = model.chain_scaling(service).as_f64();
        for (dest_set, ds) in model.dest_sets.iter().enumerate() {
            let streams = model
                .streams
                .iter()
                .filter(|s| s.service == service && s.dest_set == dest_set)
                .count();
            if streams == 0 {
                continue;
            }
            for k in 0..ds.width() {
                let got = end.delivered(model, service, dest_set, k) - start.delivered(model, service, dest_set, k);
                out.push(Throughput {
                    service,
                    dest_set,
                    k,
                    delivered_rate: got.as_f64() / slots,
                    expected_rate: streams as f64 * rate * scaling,
                });
            }
        }
    }
    out
}

/// Derives an independent seed for sub-run `index` (SplitMix64).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

// ---------------------------------------------------------------------------
// Sweeps

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaPoint {
    pub lambda_mbps: f64,
    pub stable: bool,
    pub growth: f64,
    pub avg_backlog: f64,
    /// Stable backlog estimate; infinite when unstable.
    pub stable_backlog: f64,
    pub avg_cost: f64,
    pub avg_cost_real: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaSweep {
    pub policy: PolicyKind,
    pub v: f64,
    pub points: Vec<LambdaPoint>,
    /// Largest stable grid value.
    pub boundary_mbps: Option<f64>,
    pub warnings: Vec<String>,
}

/// Runs the grid of per-stream rates (Mbps) and reports the largest stable
/// one. Points run in parallel with seeds derived from `cfg.seed`.
pub fn sweep_lambda<T: Scalar>(
    model: &NetworkModel<T>,
    params: PolicyParams,
    grid_mbps: &[f64],
    cfg: &RunConfig,
) -> Result<LambdaSweep> {
    if grid_mbps.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid_mbps.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidScenario("lambda grid must be sorted ascending".into()));
    }
    let points = grid_mbps
        .par_iter()
        .enumerate()
        .map(|(idx, &mbps)| {
            let run_cfg = RunConfig {
                seed: derive_seed(cfg.seed, idx as u64),
                ..*cfg
            };
            let rate = model.units.mbps_to_packets_per_slot(mbps);
            let r = run(model, Policy::MaxWeight(params), rate, &run_cfg)?;
            Ok(LambdaPoint {
                lambda_mbps: mbps,
                stable: r.verdict.stable,
                growth: r.verdict.growth,
                avg_backlog: r.averages.backlog,
                stable_backlog: r.verdict.stable_mean,
                avg_cost: r.cost_per_second(),
                avg_cost_real: r.cost_real_per_second(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(summarize_lambda(params, points))
}

/// Boundary and monotonicity warnings for completed grid points.
pub fn summarize_lambda(params: PolicyParams, points: Vec<LambdaPoint>) -> LambdaSweep {
    let boundary_mbps = points.iter().filter(|p| p.stable).map(|p| p.lambda_mbps).reduce(f64::max);
    let mut warnings = Vec::new();
    if let Some(first_bad) = points.iter().find(|p| !p.stable) {
        for p in points.iter().filter(|p| p.stable && p.lambda_mbps > first_bad.lambda_mbps) {
            warnings.push(format!(
                "stable at {} Mbps above unstable point {} Mbps",
                p.lambda_mbps, first_bad.lambda_mbps
            ));
        }
    }
    LambdaSweep {
        policy: params.kind,
        v: params.v,
        points,
        boundary_mbps,
        warnings,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VPoint {
    pub v: f64,
    pub stable: bool,
    pub avg_backlog: f64,
    /// Per second, dummies included.
    pub avg_cost: f64,
    /// Per second, real packets only.
    pub avg_cost_real: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VSweep {
    pub policy: PolicyKind,
    pub lambda_mbps: f64,
    pub points: Vec<VPoint>,
    pub warnings: Vec<String>,
}

/// Backlog/cost tradeoff over a grid of `V` at a fixed rate. Every point
/// uses the same seed so arrivals match across `V`.
pub fn sweep_v<T: Scalar>(
    model: &NetworkModel<T>,
    kind: PolicyKind,
    v_grid: &[f64],
    lambda_mbps: f64,
    cfg: &RunConfig,
) -> Result<VSweep> {
    if v_grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    let rate = model.units.mbps_to_packets_per_slot(lambda_mbps);
    let points = v_grid
        .par_iter()
        .map(|&v| {
            let params = PolicyParams::new(kind, v)?;
            let r = run(model, Policy::MaxWeight(params), rate, cfg)?;
            Ok(VPoint {
                v,
                stable: r.verdict.stable,
                avg_backlog: r.averages.backlog,
                avg_cost: r.cost_per_second(),
                avg_cost_real: r.cost_real_per_second(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let warnings = points
        .iter()
        .filter(|p| !p.stable)
        .map(|p| format!("unstable run at V = {} (lambda = {lambda_mbps} Mbps)", p.v))
        .collect();
    Ok(VSweep {
        policy: kind,
        lambda_mbps,
        points,
        warnings,
    })
}
