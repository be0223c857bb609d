//! Adversary constructions: the periodic path examples, the wave flow
//! family, the adaptive lower-bound adversary, and its oblivious randomized
//! variant with good-epoch accounting.
//!
//! The adaptive adversary works in phases against a network of size
//! `n = (2B)^m`. Phase `k` covers a nested interval `I_k` with
//! `|I_k| = n / (2B)^(k-1)` and lasts `tau_k = |I_k| / 2` rounds; at its
//! first round, `B` packets enter every buffer of `I_k`. At each phase end
//! the adversary reads the load vector, splits the current interval into
//! `2B` consecutive equal children, and descends into the one with maximum
//! total load (ties toward the lowest index). After phase `m` it picks the
//! heaviest single buffer of `I_m` the same way and spends its global burst
//! there in one final round. Whatever the forwarding protocol does, the
//! interval it descends into keeps total load at least
//! `k(B - 1/2)|I_k|` at the end of phase `k`: the phase injects `B|I_k|`
//! and only the last buffer of the interval can drain it, at most one
//! packet per round for `tau_k` rounds.
//!
//! The oblivious variant replays the same schedule for a uniformly random
//! final target, with the interval descent reconstructed from the target
//! alone, then idles `B*n + sigma` rounds and repeats. No protocol feedback
//! is used anywhere.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::engine::Adversary;
use crate::error::{Error, Result};
use crate::flows::{Flow, FlowFamily};
use crate::injection::{BoundParams, InjectionPattern};
use crate::rat::{self, Rat};
use crate::topology::Route;
use crate::trace::Trace;

/// Periodic burst pattern: `n` packets into buffer 1 at rounds
/// `1, n+1, 2n+1, ...` up to the horizon.
pub fn example_a0(n: usize, horizon: u64) -> Result<InjectionPattern> {
    let mut p = InjectionPattern::new(n, horizon)?;
    let mut round = 1u64;
    while round <= horizon {
        p.inject_unit(round, 1, n as u64)?;
        round += n as u64;
    }
    Ok(p)
}

/// Periodic wave pattern: one packet into every buffer at rounds
/// `1, n+1, 2n+1, ...` up to the horizon.
pub fn example_a1(n: usize, horizon: u64) -> Result<InjectionPattern> {
    let mut p = InjectionPattern::new(n, horizon)?;
    let mut round = 1u64;
    while round <= horizon {
        for origin in 1..=n {
            p.inject_unit(round, origin, 1)?;
        }
        round += n as u64;
    }
    Ok(p)
}

/// The zero-burst wave family: `n` flows, flow `i` originating at buffer
/// `i` with arrival curve of slope `1/n`, dependent rate 1 and zero global
/// burst. Its discretization injects a full wave every `n` rounds.
pub fn wave_flows(n: usize, horizon: u64) -> Result<FlowFamily> {
    if n == 0 {
        return Err(Error::validation("wave family needs n >= 1"));
    }
    let slope = rat::frac(1, n as i64);
    let mut flows = Vec::new();
    for origin in 1..=n {
        flows.push(Flow::new(
            crate::flows::ArrivalCurve::ramp(slope.clone(), horizon)?,
            Route::new(origin),
            slope.clone(),
            rat::zero(),
        )?);
    }
    FlowFamily::new(flows, rat::one(), rat::zero())
}

/// Replays a fixed pattern into the simulator.
pub struct FixedPattern {
    by_round: std::collections::BTreeMap<u64, Vec<(usize, u64, Rat)>>,
}

impl From<&InjectionPattern> for FixedPattern {
    fn from(p: &InjectionPattern) -> Self {
        FixedPattern {
            by_round: p.by_round(),
        }
    }
}

impl Adversary for FixedPattern {
    fn injections(&mut self, round: u64, _loads: &[u64]) -> Vec<(usize, u64, Rat)> {
        self.by_round.get(&round).cloned().unwrap_or_default()
    }
}

/// Record of one completed phase of the adaptive adversary.
#[derive(Debug, Clone)]
pub struct PhaseRecord {
    pub k: usize,
    pub interval: (usize, usize),
    pub tau: u64,
    pub injection_round: u64,
    /// Total load of the interval at the end of the phase.
    pub end_load: Option<u64>,
    /// The guaranteed floor `k(B - 1/2)|I_k|`.
    pub claimed_floor: Rat,
}

/// Phase arithmetic shared by the adaptive and oblivious constructions.
#[derive(Debug, Clone)]
struct PhasePlanner {
    n: usize,
    b: u64,
    m: u32,
    taus: Vec<u64>,
}

impl PhasePlanner {
    fn new(n: usize, b: u64) -> Result<Self> {
        if b == 0 {
            return Err(Error::validation("local burst B must be at least 1"));
        }
        let base = 2 * b as usize;
        let mut m = 0u32;
        let mut size = 1usize;
        while size < n {
            size = size
                .checked_mul(base)
                .ok_or_else(|| Error::validation("n overflows the phase arithmetic"))?;
            m += 1;
        }
        if size != n || m == 0 {
            return Err(Error::validation(format!(
                "network size must be a positive power of 2B = {base}, got {n}"
            )));
        }
        let mut taus = Vec::with_capacity(m as usize);
        let mut interval = n as u64;
        for _ in 0..m {
            taus.push(interval / 2);
            interval /= 2 * b;
        }
        Ok(PhasePlanner {
            n,
            b,
            m,
            taus,
        })
    }

    /// Interval size in phase `k` (1-based).
    fn interval_len(&self, k: usize) -> usize {
        self.n / (2 * self.b as usize).pow(k as u32 - 1)
    }

    /// Rounds of active injection: phases plus the final burst round.
    fn active_rounds(&self) -> u64 {
        self.taus.iter().sum::<u64>() + 1
    }

    /// Consecutive equal children of an interval.
    fn children(&self, interval: (usize, usize)) -> Vec<(usize, usize)> {
        let width = (interval.1 - interval.0 + 1) / (2 * self.b as usize);
        (0..2 * self.b as usize)
            .map(|j| {
                let lo = interval.0 + j * width;
                (lo, lo + width - 1)
            })
            .collect()
    }

    /// Child with maximum total load; ties toward the lowest index.
    fn heaviest_child(&self, interval: (usize, usize), loads: &[u64]) -> (usize, usize) {
        let mut best = None;
        let mut best_load = 0u64;
        for child in self.children(interval) {
            let load: u64 = (child.0..=child.1).map(|i| loads[i - 1]).sum();
            if best.is_none() || load > best_load {
                best = Some(child);
                best_load = load;
            }
        }
        best.expect("2B children")
    }

    /// The nested interval chain ending at a given target buffer.
    fn chain_to(&self, target: usize) -> Vec<(usize, usize)> {
        let mut chain = Vec::with_capacity(self.m as usize);
        let mut interval = (1, self.n);
        for _ in 0..self.m {
            chain.push(interval);
            let width = (interval.1 - interval.0 + 1) / (2 * self.b as usize);
            let j = (target - interval.0) / width;
            let lo = interval.0 + j * width;
            interval = (lo, lo + width - 1);
        }
        debug_assert_eq!(interval, (target, target));
        chain
    }
}

fn interval_load(interval: (usize, usize), loads: &[u64]) -> u64 {
    (interval.0..=interval.1).map(|i| loads[i - 1]).sum()
}

/// The adaptive lower-bound adversary. Drive it with [`crate::engine::run`]
/// for exactly [`AdaptiveLowerBound::duration`] rounds; afterwards the
/// phase records and final target carry the observed loads.
pub struct AdaptiveLowerBound {
    planner: PhasePlanner,
    sigma: u64,
    phase: usize,
    interval: (usize, usize),
    next_boundary: u64,
    records: Vec<PhaseRecord>,
    target: Option<usize>,
    target_end_load: Option<u64>,
}

impl AdaptiveLowerBound {
    /// `n` must be `(2B)^m` for some `m >= 1`.
    pub fn new(n: usize, b: u64, sigma: u64) -> Result<Self> {
        let planner = PhasePlanner::new(n, b)?;
        Ok(AdaptiveLowerBound {
            planner,
            sigma,
            phase: 0,
            interval: (1, 0),
            next_boundary: 1,
            records: Vec::new(),
            target: None,
            target_end_load: None,
        })
    }

    /// Number of rounds the schedule occupies (phases plus the burst round).
    pub fn duration(&self) -> u64 {
        self.planner.active_rounds()
    }

    pub fn phase_count(&self) -> u32 {
        self.planner.m
    }

    pub fn records(&self) -> &[PhaseRecord] {
        &self.records
    }

    /// The single buffer receiving the final burst, once selected.
    pub fn target(&self) -> Option<usize> {
        self.target
    }

    /// Load of the target at selection time (before the final burst).
    pub fn target_end_load(&self) -> Option<u64> {
        self.target_end_load
    }

    /// The locally bursty bound the realized schedule satisfies.
    pub fn claimed_params(&self) -> BoundParams {
        BoundParams::uniform(
            rat::one(),
            rat::uint(self.sigma),
            rat::uint(self.planner.b),
        )
        .expect("non-negative parameters")
    }

    /// The guaranteed final-target load floor `m(B - 1/2) + sigma`.
    pub fn final_floor(&self) -> Rat {
        rat::uint(self.planner.m as u64) * (rat::uint(self.planner.b) - rat::frac(1, 2))
            + rat::uint(self.sigma)
    }
}

impl Adversary for AdaptiveLowerBound {
    fn injections(&mut self, round: u64, loads: &[u64]) -> Vec<(usize, u64, Rat)> {
        if round != self.next_boundary {
            return Vec::new();
        }
        // A boundary closes the previous phase: record its end load.
        if self.phase > 0 {
            let rec = &mut self.records[self.phase - 1];
            rec.end_load = Some(interval_load(self.interval, loads));
        }
        if self.phase == self.planner.m as usize {
            // Final burst round: descend to a single buffer.
            let (t, _) = self.planner.heaviest_child(self.interval, loads);
            self.target = Some(t);
            self.target_end_load = Some(loads[t - 1]);
            self.next_boundary = u64::MAX;
            if self.sigma > 0 {
                return vec![(t, self.sigma, rat::one())];
            }
            return Vec::new();
        }
        self.phase += 1;
        self.interval = if self.phase == 1 {
            (1, self.planner.n)
        } else {
            self.planner.heaviest_child(self.interval, loads)
        };
        let tau = self.planner.taus[self.phase - 1];
        self.next_boundary = round + tau;
        let len = self.planner.interval_len(self.phase);
        self.records.push(PhaseRecord {
            k: self.phase,
            interval: self.interval,
            tau,
            injection_round: round,
            end_load: None,
            claimed_floor: rat::uint(self.phase as u64)
                * (rat::uint(self.planner.b) - rat::frac(1, 2))
                * rat::uint(len as u64),
        });
        (self.interval.0..=self.interval.1)
            .map(|i| (i, self.planner.b, rat::one()))
            .collect()
    }
}

/// Planned schedule of one oblivious epoch.
#[derive(Debug, Clone)]
pub struct EpochPlan {
    pub index: usize,
    pub target: usize,
    /// Round of the phase-k injection burst, k = 1..=m.
    pub phase_starts: Vec<u64>,
    pub intervals: Vec<(usize, usize)>,
    /// Round of the final sigma burst into the target.
    pub burst_round: u64,
    /// First round of the next epoch.
    pub end_round: u64,
}

/// The oblivious randomized adversary: per epoch, a uniformly random target
/// determines the whole interval descent; the epoch replays the adaptive
/// schedule for that descent, then idles `B*n + sigma` rounds.
pub struct ObliviousRandom {
    planner: PhasePlanner,
    sigma: u64,
    rng: ChaCha8Rng,
    epoch_len: u64,
    plans: Vec<EpochPlan>,
}

impl ObliviousRandom {
    pub fn new(n: usize, b: u64, sigma: u64, seed: u64) -> Result<Self> {
        let planner = PhasePlanner::new(n, b)?;
        let epoch_len = planner.active_rounds() + b * n as u64 + sigma;
        Ok(ObliviousRandom {
            planner,
            sigma,
            rng: ChaCha8Rng::seed_from_u64(seed),
            epoch_len,
            plans: Vec::new(),
        })
    }

    pub fn epoch_len(&self) -> u64 {
        self.epoch_len
    }

    pub fn phase_count(&self) -> u32 {
        self.planner.m
    }

    pub fn plans(&self) -> &[EpochPlan] {
        &self.plans
    }

    pub fn claimed_params(&self) -> BoundParams {
        BoundParams::uniform(
            rat::one(),
            rat::uint(self.sigma),
            rat::uint(self.planner.b),
        )
        .expect("non-negative parameters")
    }

    fn plan_epoch(&mut self, start_round: u64) {
        let target = self.rng.gen_range(1..=self.planner.n);
        let intervals = self.planner.chain_to(target);
        let mut phase_starts = Vec::with_capacity(self.planner.m as usize);
        let mut r = start_round;
        for tau in &self.planner.taus {
            phase_starts.push(r);
            r += tau;
        }
        self.plans.push(EpochPlan {
            index: self.plans.len(),
            target,
            phase_starts,
            intervals,
            burst_round: r,
            end_round: start_round + self.epoch_len,
        });
    }
}

impl Adversary for ObliviousRandom {
    fn injections(&mut self, round: u64, _loads: &[u64]) -> Vec<(usize, u64, Rat)> {
        if round == 0 {
            return Vec::new();
        }
        let next_start = self
            .plans
            .last()
            .map(|p| p.end_round)
            .unwrap_or(1);
        if round == next_start {
            self.plan_epoch(round);
        }
        let Some(plan) = self.plans.last() else {
            return Vec::new();
        };
        if let Some(k) = plan.phase_starts.iter().position(|s| *s == round) {
            let (lo, hi) = plan.intervals[k];
            return (lo..=hi)
                .map(|i| (i, self.planner.b, rat::one()))
                .collect();
        }
        if round == plan.burst_round && self.sigma > 0 {
            return vec![(plan.target, self.sigma, rat::one())];
        }
        Vec::new()
    }
}

/// Outcome of one epoch, judged from the trace.
#[derive(Debug, Clone)]
pub struct EpochRecord {
    pub index: usize,
    pub target: usize,
    /// Goodness of each descent step: did the chosen child's average load
    /// reach its parent's average at selection time?
    pub phase_good: Vec<bool>,
    pub good: bool,
    /// Load at the target in the epoch's final injection round.
    pub final_target_load: u64,
    /// Largest load seen anywhere during the epoch.
    pub peak_load: u64,
}

/// Classifies each completed epoch of an oblivious run. A descent step is
/// good when the chosen child interval's average load is at least the
/// parent's average at the moment of the (virtual) selection; an epoch is
/// good when all its steps are. Good epochs provably end with target load
/// at least `m(B - 1/2) + sigma`.
pub fn classify_epochs(trace: &Trace, adversary: &ObliviousRandom) -> Result<Vec<EpochRecord>> {
    let mut out = Vec::new();
    for plan in adversary.plans() {
        if plan.burst_round > trace.horizon() {
            break;
        }
        let mut phase_good = Vec::new();
        // Steps between consecutive phases: judged at the start of phase k+1.
        for k in 1..plan.intervals.len() {
            let round = plan.phase_starts[k];
            let parent = plan.intervals[k - 1];
            let child = plan.intervals[k];
            phase_good.push(average_reaches(trace, round, child, parent));
        }
        // Final step down to the single target, judged at the burst round.
        let last = *plan.intervals.last().expect("m >= 1");
        phase_good.push(average_reaches(
            trace,
            plan.burst_round,
            (plan.target, plan.target),
            last,
        ));
        let good = phase_good.iter().all(|g| *g);
        let final_target_load = trace.load(plan.burst_round, plan.target);
        let mut peak = 0;
        for round in plan.phase_starts[0]..=plan.end_round.min(trace.horizon()) {
            for buffer in 1..=trace.n() {
                peak = peak.max(trace.load(round, buffer));
            }
        }
        out.push(EpochRecord {
            index: plan.index,
            target: plan.target,
            phase_good,
            good,
            final_target_load,
            peak_load: peak,
        });
    }
    Ok(out)
}

/// `avg load of child >= avg load of parent` on the pre-injection loads of
/// `round`, compared exactly by cross-multiplication.
fn average_reaches(trace: &Trace, round: u64, child: (usize, usize), parent: (usize, usize)) -> bool {
    let child_load: u64 = (child.0..=child.1)
        .map(|i| trace.pre_injection_load(round, i))
        .sum();
    let parent_load: u64 = (parent.0..=parent.1)
        .map(|i| trace.pre_injection_load(round, i))
        .sum();
    let child_len = (child.1 - child.0 + 1) as u64;
    let parent_len = (parent.1 - parent.0 + 1) as u64;
    child_load * parent_len >= parent_load * child_len
}

/// Adversary spec strings for the CLI and config files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AdversarySpec {
    A0 { n: usize },
    A1 { n: usize },
    Wave { n: usize },
    Lb { n: usize, b: u64, sigma: u64 },
    Rand { n: usize, b: u64, sigma: u64, seed: Option<u64> },
    File { path: String },
}

impl AdversarySpec {
    /// Parses `a0:n`, `a1:n`, `wave:n`, `lb:n,B,sigma`,
    /// `rand:n,B,sigma[,seed]`, or `file:path`.
    pub fn parse(s: &str) -> Result<Self> {
        let (kind, rest) = s
            .split_once(':')
            .ok_or_else(|| Error::parse("adversary spec", format!("{s:?} has no ':'")))?;
        let nums = |expect: std::ops::RangeInclusive<usize>| -> Result<Vec<u64>> {
            let parts: Vec<&str> = rest.split(',').collect();
            if !expect.contains(&parts.len()) {
                return Err(Error::parse(
                    "adversary spec",
                    format!("{kind}: expected {expect:?} comma-separated numbers"),
                ));
            }
            parts
                .iter()
                .map(|p| {
                    p.trim()
                        .parse::<u64>()
                        .map_err(|e| Error::parse("adversary spec", format!("{p:?}: {e}")))
                })
                .collect()
        };
        match kind {
            "a0" => Ok(AdversarySpec::A0 {
                n: nums(1..=1)?[0] as usize,
            }),
            "a1" => Ok(AdversarySpec::A1 {
                n: nums(1..=1)?[0] as usize,
            }),
            "wave" => Ok(AdversarySpec::Wave {
                n: nums(1..=1)?[0] as usize,
            }),
            "lb" => {
                let v = nums(3..=3)?;
                Ok(AdversarySpec::Lb {
                    n: v[0] as usize,
                    b: v[1],
                    sigma: v[2],
                })
            }
            "rand" => {
                let v = nums(3..=4)?;
                Ok(AdversarySpec::Rand {
                    n: v[0] as usize,
                    b: v[1],
                    sigma: v[2],
                    seed: v.get(3).copied(),
                })
            }
            "file" => Ok(AdversarySpec::File {
                path: rest.to_string(),
            }),
            other => Err(Error::parse(
                "adversary spec",
                format!("unknown adversary kind {other:?}"),
            )),
        }
    }

    /// Network size the spec implies, if fixed by the spec itself.
    pub fn n(&self) -> Option<usize> {
        match self {
            AdversarySpec::A0 { n }
            | AdversarySpec::A1 { n }
            | AdversarySpec::Wave { n }
            | AdversarySpec::Lb { n, .. }
            | AdversarySpec::Rand { n, .. } => Some(*n),
            AdversarySpec::File { .. } => None,
        }
    }
}
