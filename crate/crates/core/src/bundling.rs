//! Packet bundling: C-reduction of unit packets into jumbos, and the
//! reserve-buffer bundling procedure for heterogeneous sizes.
//!
//! C-reduction turns a unit-packet pattern on a capacity-`C` network into a
//! jumbo-packet pattern for a unit-capacity network by scaling the
//! associated flows by `1/C` and discretizing. The heterogeneous procedure
//! instead keeps per-buffer reserves: whenever a reserve exceeds `C/2` it
//! emits bundles of weight in `[C/2, C]`, built FIFO by injection order.
//! Bundles never exceed `C` so each can cross an edge in one round; when
//! the next queued packet would push a partial bundle past `C`, that packet
//! (necessarily heavier than `C/2`) is emitted alone and the partial prefix
//! stays queued.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::boundedness::{check_local, Verdict};
use crate::error::{Error, Result};
use crate::flows::{discretize, flows_from_pattern, Flow, FlowFamily};
use crate::injection::{BoundParams, InjectionPattern};
use crate::rat::{self, Rat};

/// Scales every curve and every declared parameter of the family by `1/C`.
pub fn c_reduce_flows(fam: &FlowFamily, c: u64) -> Result<FlowFamily> {
    if c == 0 {
        return Err(Error::validation("capacity must be at least 1"));
    }
    let inv = rat::frac(1, c as i64);
    let flows = fam
        .flows()
        .iter()
        .map(|f| {
            Flow::new_unchecked(
                f.curve().scale_values(&inv),
                f.route(),
                f.rate() * &inv,
                f.burst() * &inv,
            )
        })
        .collect();
    Ok(FlowFamily::new_unchecked(
        flows,
        fam.rate() * &inv,
        fam.sigma() * &inv,
    ))
}

/// C-reduction of a unit-packet pattern: the discretization of the
/// `1/C`-scaled flow family. Jumbo packets represent `C` originals.
pub fn c_reduce_pattern(a: &InjectionPattern, c: u64) -> Result<InjectionPattern> {
    if !a.is_unit_sized() {
        return Err(Error::validation(
            "C-reduction expects unit-size packets; use hetero_bundle for sized packets",
        ));
    }
    // Labels are irrelevant to the curves, so any valid placeholder works.
    let placeholder = BoundParams::uniform(rat::zero(), rat::zero(), rat::zero())?;
    let fam = flows_from_pattern(a, &placeholder);
    let reduced = discretize(&c_reduce_flows(&fam, c)?, a.horizon())?;
    // Rebuild on the original path width (the family only spans used origins).
    let mut out = InjectionPattern::new(a.n(), a.horizon())?;
    for rec in reduced.items() {
        out.inject(rec.round, rec.origin, rec.count, rec.size.clone())?;
    }
    Ok(out)
}

/// Test harness for the uniform bundling guarantee: a locally
/// `(rho, sigma, beta)`-bounded pattern C-reduces to a locally
/// `(rho/C, sigma/C, 1 + beta/C)`-bounded pattern.
pub fn verify_uniform_bundling(
    a: &InjectionPattern,
    params: &BoundParams,
    c: u64,
) -> Result<Verdict> {
    match check_local(a, params)? {
        Verdict::Ok => {}
        Verdict::Violation(w) => {
            return Err(Error::validation(format!(
                "input pattern does not satisfy its declared bound (edge {}, rounds {}..={})",
                w.edge, w.interval.0, w.interval.1
            )))
        }
    }
    let reduced = c_reduce_pattern(a, c)?;
    let inv = rat::frac(1, c as i64);
    let scaled = BoundParams {
        rho: &params.rho * &inv,
        sigma: &params.sigma * &inv,
        beta: params.beta.map(|b| rat::one() + b * &inv),
    };
    check_local(&reduced, &scaled)
}

/// One emitted bundle: the packets it carries are identified by their
/// position in the expanded injection order of the source pattern.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bundle {
    pub round: u64,
    pub origin: usize,
    pub weight: Rat,
}

/// Reserve bookkeeping for the heterogeneous bundling pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BundleState {
    /// Weight left queued per buffer after the final round.
    pub final_reserves: BTreeMap<usize, Rat>,
    /// Peak reserve weight seen per buffer (the extra storage the bundling
    /// stage itself needs, counted separately from protocol buffers).
    pub peak_reserves: BTreeMap<usize, Rat>,
    pub bundles: Vec<Bundle>,
}

/// Runs the reserve bundling procedure over a sized pattern. Returns the
/// bundle pattern (packet sizes = bundle weights, in original units) plus
/// the reserve state. Rejects any packet heavier than `C`, which could
/// never cross an edge.
pub fn hetero_bundle(a: &InjectionPattern, c: u64) -> Result<(InjectionPattern, BundleState)> {
    if c == 0 {
        return Err(Error::validation("capacity must be at least 1"));
    }
    let cap = rat::uint(c);
    let half = &cap / rat::int(2);
    for rec in a.items() {
        if rec.size > cap {
            return Err(Error::validation(format!(
                "packet of size {} exceeds capacity {c} and can never be forwarded",
                rec.size
            )));
        }
    }

    let mut queues: BTreeMap<usize, std::collections::VecDeque<Rat>> = BTreeMap::new();
    let mut reserves: BTreeMap<usize, Rat> = BTreeMap::new();
    let mut peaks: BTreeMap<usize, Rat> = BTreeMap::new();
    let mut bundles: Vec<Bundle> = Vec::new();
    let mut out = InjectionPattern::new(a.n(), a.horizon())?;

    for (round, batch) in a.by_round() {
        for (origin, count, size) in batch {
            let q = queues.entry(origin).or_default();
            let r = reserves.entry(origin).or_insert_with(rat::zero);
            for _ in 0..count {
                q.push_back(size.clone());
                *r += &size;
            }
            let peak = peaks.entry(origin).or_insert_with(rat::zero);
            if *r > *peak {
                *peak = r.clone();
            }
        }
        // Emit while any reserve strictly exceeds C/2.
        for (&origin, q) in queues.iter_mut() {
            let r = reserves.get_mut(&origin).expect("reserve exists");
            while *r > half {
                let weight = take_bundle(q, &cap, &half);
                *r -= &weight;
                out.inject(round, origin, 1, weight.clone())?;
                bundles.push(Bundle {
                    round,
                    origin,
                    weight,
                });
            }
        }
    }

    reserves.retain(|_, v| !v.is_zero());
    Ok((
        out,
        BundleState {
            final_reserves: reserves,
            peak_reserves: peaks,
            bundles,
        },
    ))
}

/// Builds one bundle from the FIFO queue: the minimal prefix reaching
/// `C/2`, unless extending it would cross `C` — then the blocking packet
/// (which must itself exceed `C/2`) ships alone and the prefix stays.
fn take_bundle(q: &mut std::collections::VecDeque<Rat>, cap: &Rat, half: &Rat) -> Rat {
    let mut acc = rat::zero();
    let mut taken = 0usize;
    for item in q.iter() {
        if &(&acc + item) > cap {
            // item > C - acc >= C/2: it forms its own bundle.
            debug_assert!(item > half);
            let w = q.remove(taken).expect("index in range");
            return w;
        }
        acc += item;
        taken += 1;
        if &acc >= half {
            break;
        }
    }
    for _ in 0..taken {
        q.pop_front();
    }
    acc
}

/// The bundle pattern re-expressed in jumbo units (sizes divided by `C`),
/// the scale on which the reduced network has unit capacity.
pub fn normalize_bundles(bundle_pattern: &InjectionPattern, c: u64) -> Result<InjectionPattern> {
    let inv = rat::frac(1, c as i64);
    let mut out = InjectionPattern::new(bundle_pattern.n(), bundle_pattern.horizon())?;
    for rec in bundle_pattern.items() {
        out.inject(rec.round, rec.origin, rec.count, &rec.size * &inv)?;
    }
    Ok(out)
}

/// The bundle pattern as indivisible unit slots, for driving unit-capacity
/// protocols.
pub fn bundles_as_unit_slots(bundle_pattern: &InjectionPattern) -> Result<InjectionPattern> {
    let mut out = InjectionPattern::new(bundle_pattern.n(), bundle_pattern.horizon())?;
    for rec in bundle_pattern.items() {
        out.inject_unit(rec.round, rec.origin, rec.count)?;
    }
    Ok(out)
}
