//! Synchronous-round forwarding engine.
//!
//! Each round is an injection step followed by a forwarding step. Loads are
//! snapshotted between the two (`L^t`), which is the configuration every
//! bound in this crate talks about. Forwarding decisions for all buffers
//! are computed simultaneously from that frozen snapshot and applied
//! afterwards — a sequential sweep would let upstream pops change
//! downstream decisions. Buffers are LIFO stacks: injected and received
//! packets land on top, and the top packet is forwarded. Delivered packets
//! vanish at the destination, which has no buffer (`L(n+1) = 0` always).
//!
//! The optional invariant monitor re-checks, every round, the structural
//! facts the OED analysis rests on: plateau persistence across forwarding,
//! the even-height ceiling on packet movement, the origin of packets above
//! even plateaus, and the upper-load bounds for plateaus under bounded
//! adversaries. It is instrumentation: off for sweeps, on for test runs.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_traits::Signed;

use crate::error::{Error, Result};
use crate::rat::{self, Rat};
use crate::topology::PathTopology;
use crate::trace::{Event, Trace};

/// Forwarding protocols.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Protocol {
    /// Odd-even downhill: forward iff strictly downhill, or level at an odd
    /// load.
    Oed,
    /// Forward whenever non-empty, as much as capacity allows.
    Greedy,
}

impl Protocol {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "oed" => Ok(Protocol::Oed),
            "greedy" => Ok(Protocol::Greedy),
            other => Err(Error::validation(format!(
                "unknown protocol {other:?} (expected oed or greedy)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Protocol::Oed => "oed",
            Protocol::Greedy => "greedy",
        }
    }
}

/// OED forwarding decision for buffer `i` (1-based) given the load vector
/// (`loads[0]` is buffer 1; the destination sentinel is implicit).
pub fn oed_decision(loads: &[u64], i: usize) -> bool {
    let cur = loads[i - 1];
    let next = if i < loads.len() { loads[i] } else { 0 };
    cur > next || (cur == next && cur % 2 == 1)
}

/// Greedy decision: forward iff the buffer is non-empty.
pub fn greedy_decision(loads: &[u64], i: usize) -> bool {
    loads[i - 1] > 0
}

/// Source of injections: fixed patterns replay a schedule, adaptive
/// adversaries read the pre-injection load vector at round start.
pub trait Adversary {
    /// Batches of `(origin, count, size)` to inject this round.
    fn injections(&mut self, round: u64, loads: &[u64]) -> Vec<(usize, u64, Rat)>;
}

/// One stored packet.
#[derive(Debug, Clone)]
pub struct PacketRec {
    pub id: u64,
    pub injected_round: u64,
    pub origin: usize,
    pub injection_height: u64,
    pub size: Rat,
}

/// Mutable simulation state: per-buffer LIFO stacks plus bookkeeping.
#[derive(Debug, Clone)]
pub struct SimState {
    topology: PathTopology,
    round: u64,
    stacks: Vec<Vec<PacketRec>>,
    weights: Vec<Rat>,
    injected_packets: u64,
    injected_weight: Rat,
    delivered_packets: u64,
    delivered_weight: Rat,
    next_id: u64,
}

struct Landing {
    id: u64,
    buffer: usize,
    height: u64,
    size: Rat,
}

struct ForwardOutcome {
    /// `(buffer, packets forwarded)` for buffers that forwarded.
    forwarded: Vec<(usize, u64)>,
    moves: Vec<Landing>,
    delivered: Vec<(u64, usize, Rat)>,
}

impl SimState {
    pub fn new(topology: PathTopology) -> Self {
        let n = topology.n();
        SimState {
            topology,
            round: 0,
            stacks: vec![Vec::new(); n],
            weights: vec![rat::zero(); n],
            injected_packets: 0,
            injected_weight: rat::zero(),
            delivered_packets: 0,
            delivered_weight: rat::zero(),
            next_id: 0,
        }
    }

    pub fn topology(&self) -> &PathTopology {
        &self.topology
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Packet counts per buffer (`[0]` is buffer 1).
    pub fn load_counts(&self) -> Vec<u64> {
        self.stacks.iter().map(|s| s.len() as u64).collect()
    }

    /// Stack weights per buffer.
    pub fn load_weights(&self) -> Vec<Rat> {
        self.weights.clone()
    }

    pub fn stack(&self, buffer: usize) -> &[PacketRec] {
        &self.stacks[buffer - 1]
    }

    pub fn delivered_packets(&self) -> u64 {
        self.delivered_packets
    }

    fn inject_batch(&mut self, round: u64, batches: &[(usize, u64, Rat)]) -> Result<Vec<Landing>> {
        let n = self.topology.n();
        let mut ordered: Vec<&(usize, u64, Rat)> = batches.iter().collect();
        ordered.sort_by_key(|(origin, _, _)| *origin);
        let mut landings = Vec::new();
        for (origin, count, size) in ordered {
            if *origin == 0 || *origin > n {
                return Err(Error::validation(format!("injection into buffer {origin} outside 1..={n}")));
            }
            if !size.is_positive() {
                return Err(Error::validation("packet size must be positive"));
            }
            for _ in 0..*count {
                let height = self.stacks[origin - 1].len() as u64 + 1;
                let id = self.next_id;
                self.next_id += 1;
                self.stacks[origin - 1].push(PacketRec {
                    id,
                    injected_round: round,
                    origin: *origin,
                    injection_height: height,
                    size: size.clone(),
                });
                self.weights[origin - 1] += size;
                self.injected_packets += 1;
                self.injected_weight += size;
                landings.push(Landing {
                    id,
                    buffer: *origin,
                    height,
                    size: size.clone(),
                });
            }
        }
        Ok(landings)
    }

    /// Applies one forwarding step: decisions from the frozen post-injection
    /// snapshot, then all pops, then all landings.
    fn forward(&mut self, protocol: Protocol) -> ForwardOutcome {
        let n = self.topology.n();
        let counts = self.load_counts();
        let cap = rat::uint(self.topology.capacity());

        // Pop phase: decide per buffer from the snapshot, take top packets
        // up to the edge capacity by weight.
        let mut popped: Vec<Vec<PacketRec>> = vec![Vec::new(); n];
        let mut forwarded = Vec::new();
        for i in 1..=n {
            let wants = match protocol {
                Protocol::Oed => oed_decision(&counts, i),
                Protocol::Greedy => greedy_decision(&counts, i),
            };
            if !wants {
                continue;
            }
            let stack = &mut self.stacks[i - 1];
            let mut sent_weight = rat::zero();
            let mut sent = 0u64;
            while let Some(top) = stack.last() {
                let next_weight = &sent_weight + &top.size;
                if next_weight > cap {
                    break;
                }
                // OED is a unit-forwarding rule: one packet per decision.
                if protocol == Protocol::Oed && sent == 1 {
                    break;
                }
                sent_weight = next_weight;
                sent += 1;
                let rec = stack.pop().expect("non-empty");
                self.weights[i - 1] -= &rec.size;
                popped[i - 1].push(rec);
            }
            assert!(sent_weight <= cap, "forwarded weight exceeds edge capacity");
            if sent > 0 {
                forwarded.push((i, sent));
            }
        }

        // Landing phase: forwarded packets arrive before the next round.
        // Walked from the destination side back so the emitted event order
        // admits a direct sequential replay.
        let mut moves = Vec::new();
        let mut delivered = Vec::new();
        for i in (1..=n).rev() {
            for rec in popped[i - 1].drain(..) {
                if i == n {
                    self.delivered_packets += 1;
                    self.delivered_weight += &rec.size;
                    delivered.push((rec.id, i, rec.size));
                } else {
                    let height = self.stacks[i].len() as u64 + 1;
                    self.weights[i] += &rec.size;
                    moves.push(Landing {
                        id: rec.id,
                        buffer: i + 1,
                        height,
                        size: rec.size.clone(),
                    });
                    self.stacks[i].push(rec);
                }
            }
        }
        ForwardOutcome {
            forwarded,
            moves,
            delivered,
        }
    }
}

/// A maximal interval of buffers whose loads all reach `height`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Plateau {
    pub lo: usize,
    pub hi: usize,
    pub height: u64,
}

impl Plateau {
    pub fn len(&self) -> usize {
        self.hi - self.lo + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// All maximal intervals where every load is at least `h`, in increasing
/// order. At `h = 0` the whole path is one plateau.
pub fn plateaus(loads: &[u64], h: u64) -> Vec<Plateau> {
    let n = loads.len();
    if h == 0 {
        return vec![Plateau {
            lo: 1,
            hi: n,
            height: 0,
        }];
    }
    let mut out = Vec::new();
    let mut start = None;
    for i in 1..=n {
        if loads[i - 1] >= h {
            start.get_or_insert(i);
        } else if let Some(lo) = start.take() {
            out.push(Plateau {
                lo,
                hi: i - 1,
                height: h,
            });
        }
    }
    if let Some(lo) = start {
        out.push(Plateau {
            lo,
            hi: n,
            height: h,
        });
    }
    out
}

/// Number of packets sitting above a plateau: `sum_{i in I} (L(i) - h)`.
/// Validates that `I` really is a maximal plateau of `loads` at its height.
pub fn load_above(loads: &[u64], p: &Plateau) -> Result<u64> {
    let n = loads.len();
    if p.lo == 0 || p.hi > n || p.lo > p.hi {
        return Err(Error::validation("plateau interval out of range"));
    }
    for i in p.lo..=p.hi {
        if loads[i - 1] < p.height {
            return Err(Error::validation(format!(
                "buffer {i} has load {} below plateau height {}",
                loads[i - 1],
                p.height
            )));
        }
    }
    let maximal_left = p.lo == 1 || loads[p.lo - 2] < p.height;
    let maximal_right = p.hi == n || loads[p.hi] < p.height;
    if !maximal_left || !maximal_right {
        return Err(Error::validation("interval is not maximal at its height"));
    }
    Ok(loads[p.lo - 1..p.hi].iter().map(|l| l - p.height).sum())
}

/// The explicit ceiling from the OED load analysis:
/// `(B+2) * ceil(log_{(B+2)/(B+1)} n) + B + 2*sigma + 3`, with `B` rounded
/// up to even first. Exact integer arithmetic throughout.
pub fn oed_proof_bound(n: usize, b: u64, sigma: &Rat) -> Result<Rat> {
    if n < 2 {
        return Err(Error::validation("bound needs n >= 2"));
    }
    if sigma.is_negative() {
        return Err(Error::validation("sigma must be non-negative"));
    }
    let be = b + (b % 2);
    // smallest m with ((be+2)/(be+1))^m >= n
    let base_num = BigInt::from(be + 2);
    let base_den = BigInt::from(be + 1);
    let mut lhs = BigInt::from(1);
    let mut rhs = BigInt::from(n);
    let mut m: u64 = 0;
    while lhs < rhs {
        lhs *= &base_num;
        rhs *= &base_den;
        m += 1;
    }
    Ok(rat::uint((be + 2) * m + be + 3) + rat::int(2) * sigma)
}

/// Which invariants the monitor re-checks each round.
#[derive(Debug, Clone, Default)]
pub struct MonitorConfig {
    /// Even plateaus survive forwarding on all but their last buffer.
    pub persistence: bool,
    /// Once a packet's height reaches an even ceiling in {2, 4, 6} it never
    /// rises above it again.
    pub packet_movement: bool,
    /// Packets above an even plateau were injected inside it, above its
    /// height.
    pub even_plateau_origin: bool,
    /// `L_h(I) <= (B+1)|I| + sigma` for even plateaus, for a locally
    /// `(rho, sigma, B)`-bounded driver.
    pub upper_load_local: Option<(Rat, Rat)>,
    /// `L_h(I) <= |I| + sigma'` for even plateaus, for a globally
    /// `(rho, sigma')`-bounded driver.
    pub upper_load_global: Option<Rat>,
    /// delivered + in-network = injected, every round.
    pub conservation: bool,
}

impl MonitorConfig {
    /// The protocol-independent structural checks.
    pub fn structural() -> Self {
        MonitorConfig {
            persistence: true,
            packet_movement: true,
            even_plateau_origin: true,
            upper_load_local: None,
            upper_load_global: None,
            conservation: true,
        }
    }

    fn any(&self) -> bool {
        self.persistence
            || self.packet_movement
            || self.even_plateau_origin
            || self.upper_load_local.is_some()
            || self.upper_load_global.is_some()
            || self.conservation
    }
}

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub monitor: Option<MonitorConfig>,
    pub record_events: bool,
}

struct Monitor {
    cfg: MonitorConfig,
    // bit 1: height reached <= 2; bit 2: <= 4; bit 4: <= 6
    ceilings: HashMap<u64, u8>,
    violations: Vec<String>,
}

impl Monitor {
    fn new(cfg: MonitorConfig) -> Self {
        Monitor {
            cfg,
            ceilings: HashMap::new(),
            violations: Vec::new(),
        }
    }

    fn on_landing(&mut self, round: u64, l: &Landing) {
        if !self.cfg.packet_movement {
            return;
        }
        let mask = self.ceilings.entry(l.id).or_insert(0);
        for (bit, h) in [(1u8, 2u64), (2, 4), (4, 6)] {
            if l.height <= h {
                *mask |= bit;
            } else if *mask & bit != 0 {
                self.violations.push(format!(
                    "round {round}: packet {} rose above even ceiling {h} (landed at height {})",
                    l.id, l.height
                ));
            }
        }
    }

    /// Checks on the post-injection snapshot `L^t`.
    fn pre_forward(&mut self, round: u64, state: &SimState, loads: &[u64]) {
        let max = loads.iter().copied().max().unwrap_or(0);
        let mut h = 0;
        while h <= max {
            for p in plateaus(loads, h) {
                if self.cfg.even_plateau_origin {
                    for i in p.lo..=p.hi {
                        for rec in state.stack(i).iter().skip(h as usize) {
                            // height = index + 1 > h
                            if rec.origin < p.lo || rec.origin > p.hi {
                                self.violations.push(format!(
                                    "round {round}: packet {} above plateau [{}, {}] h={h} was injected outside it (buffer {})",
                                    rec.id, p.lo, p.hi, rec.origin
                                ));
                            }
                            if rec.injection_height <= h {
                                self.violations.push(format!(
                                    "round {round}: packet {} above plateau [{}, {}] h={h} was injected at height {} <= h",
                                    rec.id, p.lo, p.hi, rec.injection_height
                                ));
                            }
                        }
                    }
                }
                let above = rat::uint(
                    load_above(loads, &p).expect("plateau came from the same load vector"),
                );
                if let Some((sigma, b)) = &self.cfg.upper_load_local {
                    let bound = (b + rat::one()) * rat::uint(p.len() as u64) + sigma;
                    if above > bound {
                        self.violations.push(format!(
                            "round {round}: local upper-load exceeded on [{}, {}] h={h}: {above} > {bound}",
                            p.lo, p.hi
                        ));
                    }
                }
                if let Some(sigma) = &self.cfg.upper_load_global {
                    let bound = rat::uint(p.len() as u64) + sigma;
                    if above > bound {
                        self.violations.push(format!(
                            "round {round}: global upper-load exceeded on [{}, {}] h={h}: {above} > {bound}",
                            p.lo, p.hi
                        ));
                    }
                }
            }
            h += 2;
        }
    }

    fn post_forward(
        &mut self,
        round: u64,
        state: &SimState,
        pre_loads: &[u64],
        post_loads: &[u64],
    ) {
        if self.cfg.persistence {
            let max = pre_loads.iter().copied().max().unwrap_or(0);
            let mut h = 2;
            while h <= max {
                for p in plateaus(pre_loads, h) {
                    for i in p.lo..p.hi {
                        if post_loads[i - 1] < h {
                            self.violations.push(format!(
                                "round {round}: plateau [{}, {}] h={h} lost buffer {i} after forwarding ({})",
                                p.lo, p.hi, post_loads[i - 1]
                            ));
                        }
                    }
                }
                h += 2;
            }
        }
        if self.cfg.conservation {
            let in_network: u64 = post_loads.iter().sum();
            if state.delivered_packets + in_network != state.injected_packets {
                self.violations.push(format!(
                    "round {round}: conservation broken: {} delivered + {in_network} stored != {} injected",
                    state.delivered_packets, state.injected_packets
                ));
            }
            let mut weight = state.delivered_weight.clone();
            for w in &state.weights {
                weight += w;
            }
            if weight != state.injected_weight {
                self.violations.push(format!(
                    "round {round}: weight conservation broken: {weight} != {}",
                    state.injected_weight
                ));
            }
        }
    }
}

/// Runs `horizon + 1` rounds (rounds `0..=horizon`; schedules conventionally
/// start injecting at round 1). Deterministic given the adversary, protocol,
/// and the adversary's own seeding.
pub fn run(
    topology: PathTopology,
    adversary: &mut dyn Adversary,
    protocol: Protocol,
    horizon: u64,
    opts: &RunOptions,
) -> Result<Trace> {
    let n = topology.n();
    let mut state = SimState::new(topology);
    let mut monitor = opts
        .monitor
        .clone()
        .filter(MonitorConfig::any)
        .map(Monitor::new);
    let mut trace = Trace::new(n, topology.capacity(), protocol, horizon, opts.record_events);

    for round in 0..=horizon {
        let pre_loads = state.load_counts();
        let batches = adversary.injections(round, &pre_loads);
        let landings = state.inject_batch(round, &batches)?;
        if let Some(m) = monitor.as_mut() {
            for l in &landings {
                m.on_landing(round, l);
            }
        }
        if trace.records_events() {
            for l in &landings {
                trace.push_event(Event::Inject {
                    round,
                    id: l.id,
                    buffer: l.buffer,
                    height: l.height,
                    size: l.size.to_string(),
                });
            }
        }

        let loads = state.load_counts();
        if let Some(m) = monitor.as_mut() {
            m.pre_forward(round, &state, &loads);
        }

        let outcome = state.forward(protocol);
        let post_loads = state.load_counts();
        if let Some(m) = monitor.as_mut() {
            for l in &outcome.moves {
                m.on_landing(round, l);
            }
            m.post_forward(round, &state, &loads, &post_loads);
        }
        if trace.records_events() {
            // Deliveries pop the last buffer before anything lands on it;
            // moves follow in descending source order, so the log replays
            // sequentially.
            for (id, from, size) in &outcome.delivered {
                trace.push_event(Event::Deliver {
                    round,
                    id: *id,
                    from: *from,
                    size: size.to_string(),
                });
            }
            for l in &outcome.moves {
                trace.push_event(Event::Forward {
                    round,
                    id: l.id,
                    from: l.buffer - 1,
                    to: l.buffer,
                    height: l.height,
                    size: l.size.to_string(),
                });
            }
        }

        state.round = round;
        trace.push_round(loads, state.load_weights(), batches, outcome.forwarded);
    }

    trace.finish(
        state.load_counts(),
        state.load_weights(),
        state.delivered_packets,
        monitor.map(|m| m.violations).unwrap_or_default(),
    );
    Ok(trace)
}
