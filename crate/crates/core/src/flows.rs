//! Arrival-curve flows, dependent flow families, and discretization.
//!
//! An [`ArrivalCurve`] is a non-decreasing, right-continuous,
//! piecewise-linear cumulative function given by rational breakpoints. It
//! is zero before its first breakpoint (and for all negative times), may
//! jump there, is the chord between consecutive breakpoints, and stays
//! flat after the last one. That class is closed under every operation in
//! this crate and makes the real-time envelope checks decidable: the
//! supremum of `a(t) - a(s) - r*(t - s)` over real `s < t` is attained
//! with `s` at a breakpoint left-limit and `t` at a breakpoint value (see
//! `docs/envelope-checks.md`; a randomized dense-sampling cross-check
//! lives in the tests).
//!
//! A pattern converts to a flow family by spreading the packets of round
//! `r` linearly over `(r-1, r]` (round-0 packets appear as a jump at time
//! zero). At integer times the cumulative curves agree with the pattern's
//! prefix counts, so discretization is the exact inverse on integer-valued
//! patterns, while between integers the ramp keeps the declared rate
//! meaningful for windows shorter than a round.
//!
//! The family file format is JSON with rationals encoded as `p/q` strings.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::injection::{Beta, BoundParams, InjectionPattern};
use crate::rat::{self, Rat};
use crate::topology::Route;

/// Piecewise-linear right-continuous cumulative arrival curve.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ArrivalCurve {
    points: Vec<(Rat, Rat)>,
}

impl ArrivalCurve {
    /// Validated constructor: strictly increasing non-negative times,
    /// non-decreasing non-negative values.
    pub fn new(points: Vec<(Rat, Rat)>) -> Result<Self> {
        for w in points.windows(2) {
            if w[0].0 >= w[1].0 {
                return Err(Error::validation("breakpoint times must strictly increase"));
            }
            if w[0].1 > w[1].1 {
                return Err(Error::validation("cumulative values must be non-decreasing"));
            }
        }
        if let Some((t, v)) = points.first() {
            if t.is_negative() {
                return Err(Error::validation("breakpoint times must be non-negative"));
            }
            if v.is_negative() {
                return Err(Error::validation("cumulative values must be non-negative"));
            }
        }
        Ok(ArrivalCurve { points })
    }

    /// The all-zero curve.
    pub fn zero() -> Self {
        ArrivalCurve { points: Vec::new() }
    }

    /// A single linear ramp of the given slope through the origin, defined
    /// out to `horizon`.
    pub fn ramp(slope: Rat, horizon: u64) -> Result<Self> {
        if slope.is_negative() {
            return Err(Error::validation("slope must be non-negative"));
        }
        if slope.is_zero() || horizon == 0 {
            return Ok(Self::zero());
        }
        let end = rat::uint(horizon);
        let v = &slope * &end;
        Self::new(vec![(rat::zero(), rat::zero()), (end, v)])
    }

    pub fn breakpoints(&self) -> &[(Rat, Rat)] {
        &self.points
    }

    /// Curve value `a(t)` (right-continuous).
    pub fn eval(&self, t: &Rat) -> Rat {
        if self.points.is_empty() || t < &self.points[0].0 {
            return rat::zero();
        }
        let idx = self.points.partition_point(|(pt, _)| pt <= t);
        // points[idx-1].0 <= t
        let (t0, v0) = &self.points[idx - 1];
        if idx == self.points.len() {
            return v0.clone();
        }
        let (t1, v1) = &self.points[idx];
        v0 + (v1 - v0) * (t - t0) / (t1 - t0)
    }

    /// Left limit `a(t-)`; differs from `eval` only across the initial jump.
    pub fn eval_left(&self, t: &Rat) -> Rat {
        match self.points.first() {
            Some((t0, _)) if t <= t0 => rat::zero(),
            _ => self.eval(t),
        }
    }

    /// Final cumulative value.
    pub fn total(&self) -> Rat {
        self.points
            .last()
            .map(|(_, v)| v.clone())
            .unwrap_or_else(rat::zero)
    }

    /// Values scaled pointwise by `factor` (times unchanged).
    pub fn scale_values(&self, factor: &Rat) -> Self {
        ArrivalCurve {
            points: self
                .points
                .iter()
                .map(|(t, v)| (t.clone(), v * factor))
                .collect(),
        }
    }

    fn times(&self) -> impl Iterator<Item = &Rat> {
        self.points.iter().map(|(t, _)| t)
    }
}

/// Violation of a rate/burst envelope, with the witnessing real-time window.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EnvelopeWitness {
    pub edge: Option<usize>,
    pub window: (Rat, Rat),
    pub flows: Vec<usize>,
    pub lhs: Rat,
    pub rhs: Rat,
}

/// Outcome of an envelope check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EnvelopeVerdict {
    Ok,
    Violation(EnvelopeWitness),
}

impl EnvelopeVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, EnvelopeVerdict::Ok)
    }

    pub fn witness(&self) -> Option<&EnvelopeWitness> {
        match self {
            EnvelopeVerdict::Ok => None,
            EnvelopeVerdict::Violation(w) => Some(w),
        }
    }
}

/// Checks the single-curve envelope `a(t) - a(s) <= r*(t - s) + b` over all
/// real `s < t`.
pub fn check_curve(a: &ArrivalCurve, r: &Rat, b: &Rat) -> Result<EnvelopeVerdict> {
    if r.is_negative() || b.is_negative() {
        return Err(Error::validation("rate and burst must be non-negative"));
    }
    let times: Vec<Rat> = a.times().cloned().collect();
    for (j, tj) in times.iter().enumerate() {
        let vj = a.eval(tj);
        for ti in &times[..=j] {
            let left = a.eval_left(ti);
            let lhs = &vj - &left;
            let rhs = r * (tj - ti) + b;
            if lhs > rhs {
                return Ok(EnvelopeVerdict::Violation(EnvelopeWitness {
                    edge: None,
                    window: (ti.clone(), tj.clone()),
                    flows: Vec::new(),
                    lhs,
                    rhs,
                }));
            }
        }
    }
    Ok(EnvelopeVerdict::Ok)
}

/// Tightest burst for a curve at the given rate.
pub fn min_curve_burst(a: &ArrivalCurve, r: &Rat) -> Rat {
    let times: Vec<Rat> = a.times().cloned().collect();
    let mut best = rat::zero();
    for (j, tj) in times.iter().enumerate() {
        let vj = a.eval(tj);
        for ti in &times[..=j] {
            let v = &vj - a.eval_left(ti) - r * (tj - ti);
            if v > best {
                best = v;
            }
        }
    }
    best
}

/// A flow: an arrival curve bound to a route, with its declared rate and
/// local burst.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Flow {
    curve: ArrivalCurve,
    route: Route,
    rate: Rat,
    burst: Rat,
}

impl Flow {
    /// Validated constructor: the curve must satisfy the declared envelope.
    pub fn new(curve: ArrivalCurve, route: Route, rate: Rat, burst: Rat) -> Result<Self> {
        match check_curve(&curve, &rate, &burst)? {
            EnvelopeVerdict::Ok => Ok(Flow {
                curve,
                route,
                rate,
                burst,
            }),
            EnvelopeVerdict::Violation(w) => Err(Error::validation(format!(
                "curve violates its ({rate}, {burst}) envelope on window [{}, {}]: {} > {}",
                w.window.0, w.window.1, w.lhs, w.rhs
            ))),
        }
    }

    pub(crate) fn new_unchecked(curve: ArrivalCurve, route: Route, rate: Rat, burst: Rat) -> Self {
        Flow {
            curve,
            route,
            rate,
            burst,
        }
    }

    pub fn curve(&self) -> &ArrivalCurve {
        &self.curve
    }

    pub fn route(&self) -> Route {
        self.route
    }

    pub fn origin(&self) -> usize {
        self.route.origin
    }

    pub fn rate(&self) -> &Rat {
        &self.rate
    }

    pub fn burst(&self) -> &Rat {
        &self.burst
    }
}

/// A family of flows with a locally dependent rate bound `rate` and global
/// burst `sigma`: for every edge `e`, every subset of the flows crossing
/// `e`, and all real `s < t`, the summed increments stay within
/// `rate*(t-s) + sigma + sum of member bursts`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowFamily {
    flows: Vec<Flow>,
    rate: Rat,
    sigma: Rat,
}

impl FlowFamily {
    /// Validated constructor.
    pub fn new(flows: Vec<Flow>, rate: Rat, sigma: Rat) -> Result<Self> {
        if rate.is_negative() || sigma.is_negative() {
            return Err(Error::validation("rate and sigma must be non-negative"));
        }
        let fam = FlowFamily { flows, rate, sigma };
        match check_dependent(&fam)? {
            EnvelopeVerdict::Ok => Ok(fam),
            EnvelopeVerdict::Violation(w) => Err(Error::validation(format!(
                "family violates its dependent bound at edge {:?} on window [{}, {}]: {} > {}",
                w.edge, w.window.0, w.window.1, w.lhs, w.rhs
            ))),
        }
    }

    pub(crate) fn new_unchecked(flows: Vec<Flow>, rate: Rat, sigma: Rat) -> Self {
        FlowFamily { flows, rate, sigma }
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn rate(&self) -> &Rat {
        &self.rate
    }

    pub fn sigma(&self) -> &Rat {
        &self.sigma
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }

    /// Largest origin, i.e. the widest path prefix the family touches.
    pub fn n(&self) -> usize {
        self.flows.iter().map(|f| f.origin()).max().unwrap_or(1)
    }
}

/// Checks the dependent bound for every edge, flow subset, and real window.
/// The subset quantifier collapses to the extremal subset
/// `{phi : a_phi(t) - a_phi(s-) > b_phi}`; window endpoints range over the
/// union of breakpoint left-limits and values.
pub fn check_dependent(fam: &FlowFamily) -> Result<EnvelopeVerdict> {
    let n = fam.n();
    for e in 1..=n {
        let member_idx: Vec<usize> = (0..fam.flows.len())
            .filter(|i| fam.flows[*i].route().contains(e))
            .collect();
        if member_idx.is_empty() {
            continue;
        }
        let mut times: Vec<Rat> = Vec::new();
        for &i in &member_idx {
            times.extend(fam.flows[i].curve().times().cloned());
        }
        times.sort();
        times.dedup();
        for j in 0..times.len() {
            let tj = &times[j];
            for ti in &times[..=j] {
                let mut lhs = rat::zero();
                let mut rhs = &fam.rate * (tj - ti) + &fam.sigma;
                let mut subset = Vec::new();
                for &i in &member_idx {
                    let f = &fam.flows[i];
                    let d = f.curve().eval(tj) - f.curve().eval_left(ti);
                    if d > *f.burst() {
                        lhs += d;
                        rhs += f.burst();
                        subset.push(i);
                    }
                }
                if lhs > rhs {
                    return Ok(EnvelopeVerdict::Violation(EnvelopeWitness {
                        edge: Some(e),
                        window: (ti.clone(), tj.clone()),
                        flows: subset,
                        lhs,
                        rhs,
                    }));
                }
            }
        }
    }
    Ok(EnvelopeVerdict::Ok)
}

/// Tightest global burst for the dependent bound at the given rate.
pub fn min_dependent_sigma(fam: &FlowFamily, rate: &Rat) -> Rat {
    let mut best = rat::zero();
    let n = fam.n();
    for e in 1..=n {
        let members: Vec<&Flow> = fam
            .flows
            .iter()
            .filter(|f| f.route().contains(e))
            .collect();
        if members.is_empty() {
            continue;
        }
        let mut times: Vec<Rat> = Vec::new();
        for f in &members {
            times.extend(f.curve().times().cloned());
        }
        times.sort();
        times.dedup();
        for j in 0..times.len() {
            let tj = &times[j];
            for ti in &times[..=j] {
                let mut v = rat::zero();
                for f in &members {
                    let d = f.curve().eval(tj) - f.curve().eval_left(ti) - f.burst();
                    if d.is_positive() {
                        v += d;
                    }
                }
                v -= rate * (tj - ti);
                if v > best {
                    best = v;
                }
            }
        }
    }
    best
}

/// Associates a flow family with a pattern: one flow per distinct route,
/// whose curve ramps each round's injected weight linearly over
/// `(round-1, round]` (round 0 becomes a jump at time zero). Flows are
/// labeled with the pattern's claimed bound: rate `rho`, local burst
/// `beta(origin)`, family burst `sigma`. Whenever the pattern actually
/// satisfies the claimed bound, the family satisfies its dependent bound
/// with the same parameters (property-tested).
pub fn flows_from_pattern(a: &InjectionPattern, params: &BoundParams) -> FlowFamily {
    let mut per_origin: BTreeMap<usize, BTreeMap<u64, Rat>> = BTreeMap::new();
    for rec in a.items() {
        let w = &rec.size * rat::uint(rec.count);
        *per_origin
            .entry(rec.origin)
            .or_default()
            .entry(rec.round)
            .or_insert_with(rat::zero) += w;
    }
    let mut flows = Vec::new();
    for (origin, by_round) in per_origin {
        let mut points: Vec<(Rat, Rat)> = Vec::new();
        let mut cum = rat::zero();
        for (round, w) in by_round {
            if round > 0 {
                let ramp_start = rat::uint(round - 1);
                if points.last().map(|(t, _)| *t < ramp_start).unwrap_or(true) {
                    points.push((ramp_start, cum.clone()));
                }
            }
            cum += w;
            points.push((rat::uint(round), cum.clone()));
        }
        let curve = ArrivalCurve::new(points).expect("cumulative points are monotone");
        flows.push(Flow::new_unchecked(
            curve,
            Route::new(origin),
            params.rho.clone(),
            params.beta.get(origin),
        ));
    }
    FlowFamily::new_unchecked(flows, params.rho.clone(), params.sigma.clone())
}

/// Floor-difference discretization: for every flow and integer round
/// `t in [0, horizon]`, inject `floor(a(t)) - floor(a(t-1))` unit packets
/// on the flow's route.
pub fn discretize(fam: &FlowFamily, horizon: u64) -> Result<InjectionPattern> {
    let mut p = InjectionPattern::new(fam.n(), horizon)?;
    for flow in &fam.flows {
        let mut prev = num_bigint::BigInt::from(0);
        for t in 0..=horizon {
            let v = flow.curve().eval(&rat::uint(t));
            let fl = v.floor().to_integer();
            let count = (&fl - &prev)
                .to_u64()
                .ok_or_else(|| Error::Overflow("discretized count".into()))?;
            if count > 0 {
                p.inject_unit(t, flow.origin(), count)?;
            }
            prev = fl;
        }
    }
    Ok(p)
}

/// The locally bursty parameters guaranteed for a discretized family:
/// `(rate, sigma, beta)` with `beta(e) = sum over flows originating at e of
/// (1 + b_phi)`. The floor inequality `floor(x) - floor(y) <= 1 + x - y`
/// adds one packet per member flow to any window, which is exactly the
/// per-origin budget.
pub fn discretization_params(fam: &FlowFamily) -> Result<BoundParams> {
    match check_dependent(fam)? {
        EnvelopeVerdict::Ok => {}
        EnvelopeVerdict::Violation(w) => {
            return Err(Error::validation(format!(
                "family fails its dependent bound (edge {:?}, window [{}, {}])",
                w.edge, w.window.0, w.window.1
            )))
        }
    }
    let mut overrides: BTreeMap<usize, Rat> = BTreeMap::new();
    for f in &fam.flows {
        *overrides.entry(f.origin()).or_insert_with(rat::zero) += rat::one() + f.burst();
    }
    Ok(BoundParams {
        rho: fam.rate.clone(),
        sigma: fam.sigma.clone(),
        beta: Beta::with_overrides(rat::zero(), overrides)?,
    })
}

#[derive(Serialize, Deserialize)]
struct FlowFileEntry {
    origin: usize,
    rate: String,
    burst: String,
    breakpoints: Vec<(String, String)>,
}

#[derive(Serialize, Deserialize)]
struct FamilyFile {
    rate: String,
    sigma: String,
    flows: Vec<FlowFileEntry>,
}

/// Writes the family JSON format.
pub fn write_family_json(fam: &FlowFamily, w: &mut impl Write) -> Result<()> {
    let file = FamilyFile {
        rate: fam.rate.to_string(),
        sigma: fam.sigma.to_string(),
        flows: fam
            .flows
            .iter()
            .map(|f| FlowFileEntry {
                origin: f.origin(),
                rate: f.rate().to_string(),
                burst: f.burst().to_string(),
                breakpoints: f
                    .curve()
                    .breakpoints()
                    .iter()
                    .map(|(t, v)| (t.to_string(), v.to_string()))
                    .collect(),
            })
            .collect(),
    };
    serde_json::to_writer_pretty(&mut *w, &file)
        .map_err(|e| Error::parse("family json", e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

/// Reads and validates the family JSON format.
pub fn read_family_json(r: impl Read) -> Result<FlowFamily> {
    let file: FamilyFile =
        serde_json::from_reader(r).map_err(|e| Error::parse("family json", e.to_string()))?;
    let mut flows = Vec::new();
    for entry in file.flows {
        let mut points = Vec::new();
        for (t, v) in entry.breakpoints {
            points.push((rat::parse_nonneg(&t)?, rat::parse_nonneg(&v)?));
        }
        flows.push(Flow::new(
            ArrivalCurve::new(points)?,
            Route::new(entry.origin),
            rat::parse_nonneg(&entry.rate)?,
            rat::parse_nonneg(&entry.burst)?,
        )?);
    }
    FlowFamily::new(
        flows,
        rat::parse_nonneg(&file.rate)?,
        rat::parse_nonneg(&file.sigma)?,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversaries::{example_a0, example_a1, wave_flows};
    use crate::boundedness::check_local;

    #[test]
    fn slope_envelope() {
        let a = ArrivalCurve::ramp(rat::frac(1, 16), 64).unwrap();
        assert!(check_curve(&a, &rat::frac(1, 16), &rat::zero()).unwrap().is_ok());
        assert!(!check_curve(&a, &rat::frac(1, 32), &rat::zero()).unwrap().is_ok());
    }

    #[test]
    fn initial_jump_needs_burst() {
        let a = ArrivalCurve::new(vec![(rat::zero(), rat::int(3))]).unwrap();
        assert!(check_curve(&a, &rat::zero(), &rat::int(3)).unwrap().is_ok());
        assert!(!check_curve(&a, &rat::zero(), &rat::frac(29, 10)).unwrap().is_ok());
        assert_eq!(min_curve_burst(&a, &rat::zero()), rat::int(3));
    }

    #[test]
    fn wave_family_dependent_bound() {
        let fam = wave_flows(16, 64).unwrap();
        assert!(check_dependent(&fam).unwrap().is_ok());
        // Halving the rate breaks it: a window of length 16 accumulates 16
        // across the last edge while the bound allows only 8.
        let halved = FlowFamily::new_unchecked(
            fam.flows().to_vec(),
            rat::frac(1, 2),
            rat::zero(),
        );
        assert!(!check_dependent(&halved).unwrap().is_ok());
        // Empty family is trivially fine.
        let empty = FlowFamily::new(Vec::new(), rat::one(), rat::zero()).unwrap();
        assert!(check_dependent(&empty).unwrap().is_ok());
    }

    #[test]
    fn wave_discretizes_to_one_packet_per_buffer_each_period() {
        let fam = wave_flows(16, 48).unwrap();
        let p = discretize(&fam, 48).unwrap();
        for rec in p.items() {
            assert!(rec.round % 16 == 0 && rec.round > 0, "round {}", rec.round);
            assert_eq!(rec.count, 1);
        }
        assert_eq!(p.total_packets(), 3 * 16);
        let params = discretization_params(&fam).unwrap();
        assert_eq!(params.rho, rat::one());
        assert_eq!(params.sigma, rat::zero());
        for e in 1..=16 {
            assert_eq!(params.beta.get(e), rat::one());
        }
        assert!(check_local(&p, &params).unwrap().is_ok());
    }

    #[test]
    fn integer_ramp_discretizes_to_one_packet_per_round() {
        let fam = FlowFamily::new(
            vec![Flow::new(
                ArrivalCurve::ramp(rat::one(), 8).unwrap(),
                Route::new(1),
                rat::one(),
                rat::zero(),
            )
            .unwrap()],
            rat::one(),
            rat::zero(),
        )
        .unwrap();
        let p = discretize(&fam, 8).unwrap();
        assert_eq!(p.total_packets(), 8);
        for rec in p.items() {
            assert_eq!(rec.count, 1);
            assert!(rec.round >= 1);
        }
        // Zero flow discretizes to nothing.
        let z = FlowFamily::new(
            vec![Flow::new(ArrivalCurve::zero(), Route::new(1), rat::zero(), rat::zero()).unwrap()],
            rat::zero(),
            rat::zero(),
        )
        .unwrap();
        assert!(discretize(&z, 8).unwrap().is_empty());
    }

    #[test]
    fn pattern_to_flows_shapes() {
        let params = BoundParams::uniform(rat::one(), rat::int(3), rat::zero()).unwrap();
        let a0 = example_a0(4, 9).unwrap();
        let fam = flows_from_pattern(&a0, &params);
        assert_eq!(fam.flows().len(), 1);
        assert_eq!(fam.flows()[0].origin(), 1);
        let c = fam.flows()[0].curve();
        assert_eq!(c.eval(&rat::int(1)), rat::int(4));
        assert_eq!(c.eval(&rat::int(4)), rat::int(4));
        assert_eq!(c.eval(&rat::int(5)), rat::int(8));
        assert_eq!(c.eval(&rat::int(9)), rat::int(12));

        let a1 = example_a1(4, 9).unwrap();
        let fam = flows_from_pattern(&a1, &params);
        assert_eq!(fam.flows().len(), 4);

        let empty = InjectionPattern::new(4, 9).unwrap();
        assert!(flows_from_pattern(&empty, &params).is_empty());
    }

    #[test]
    fn discretize_inverts_flows_from_pattern() {
        let params = BoundParams::uniform(rat::one(), rat::int(3), rat::one()).unwrap();
        for a in [example_a0(4, 9).unwrap(), example_a1(4, 9).unwrap()] {
            let fam = flows_from_pattern(&a, &params);
            let back = discretize(&fam, a.horizon()).unwrap();
            assert_eq!(back.items(), a.items());
        }
    }

    #[test]
    fn two_zero_burst_flows_at_same_origin_sum_their_budget() {
        let f1 = Flow::new(
            ArrivalCurve::ramp(rat::frac(1, 4), 16).unwrap(),
            Route::new(1),
            rat::frac(1, 4),
            rat::zero(),
        )
        .unwrap();
        let fam = FlowFamily::new(vec![f1.clone(), f1], rat::frac(1, 2), rat::zero()).unwrap();
        let params = discretization_params(&fam).unwrap();
        assert_eq!(params.beta.get(1), rat::int(2));
        // Empty family keeps its declared parameters and an all-zero beta.
        let empty = FlowFamily::new(Vec::new(), rat::one(), rat::int(2)).unwrap();
        let params = discretization_params(&empty).unwrap();
        assert_eq!(params.rho, rat::one());
        assert_eq!(params.sigma, rat::int(2));
        assert_eq!(params.beta.get(3), rat::zero());
    }

    #[test]
    fn family_json_round_trip() {
        let fam = wave_flows(4, 16).unwrap();
        let mut buf = Vec::new();
        write_family_json(&fam, &mut buf).unwrap();
        let back = read_family_json(buf.as_slice()).unwrap();
        assert_eq!(back, fam);
    }
}
