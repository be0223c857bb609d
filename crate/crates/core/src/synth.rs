//! Randomized generators for experiments and property suites.
//!
//! `random_local_pattern` produces patterns that are locally
//! `(rho, sigma, B)`-bounded *by construction*, via a token discipline: a
//! global bucket of burst capacity `sigma` refills at `rho` per round and
//! pays for direct injections and for refills of per-buffer budgets capped
//! at `B`; per-buffer budgets pay for local bursts. Any window then counts
//! at most `rho*|T| + sigma` global tokens plus the starting budgets of the
//! origins involved, which is exactly the locally bursty bound. The
//! generator is a sound sampler of the family, not an exhaustive one.

use num_traits::Signed;
use rand::Rng;

use crate::error::Result;
use crate::flows::{min_curve_burst, min_dependent_sigma, ArrivalCurve, Flow, FlowFamily};
use crate::injection::InjectionPattern;
use crate::rat::{self, Rat};
use crate::topology::Route;

/// Configuration for [`random_local_pattern`].
#[derive(Debug, Clone)]
pub struct LocalPatternConfig {
    pub n: usize,
    pub horizon: u64,
    pub rho: Rat,
    pub sigma: Rat,
    /// Uniform per-buffer budget `B`.
    pub beta: Rat,
    /// Candidate packet sizes; `None` means unit packets.
    pub sizes: Option<Vec<Rat>>,
}

/// Samples a pattern guaranteed to satisfy
/// `check_local(rho, sigma, beta uniform)`.
pub fn random_local_pattern(cfg: &LocalPatternConfig, rng: &mut impl Rng) -> Result<InjectionPattern> {
    let mut p = InjectionPattern::new(cfg.n, cfg.horizon)?;
    let mut global = cfg.sigma.clone();
    let mut local: Vec<Rat> = vec![cfg.beta.clone(); cfg.n + 1];
    let unit = [rat::one()];
    let sizes: &[Rat] = cfg.sizes.as_deref().unwrap_or(&unit);

    for round in 1..=cfg.horizon {
        let budget = &cfg.rho + &global;
        let mut spent = rat::zero();
        // Global spends: direct injections or per-buffer refills.
        loop {
            let size = &sizes[rng.gen_range(0..sizes.len())];
            if &spent + size > budget {
                break;
            }
            // Bias toward bursts: mostly keep spending, sometimes stop early.
            if rng.gen_ratio(1, 3) {
                break;
            }
            spent += size;
            let f = rng.gen_range(1..=cfg.n);
            if rng.gen_ratio(1, 3) {
                // refill f's budget with this token, up to its cap
                let refilled = &local[f] + size;
                local[f] = if refilled > cfg.beta { cfg.beta.clone() } else { refilled };
            } else {
                p.inject(round, f, 1, size.clone())?;
            }
        }
        global = &budget - &spent;
        if global > cfg.sigma {
            global = cfg.sigma.clone();
        }
        // Local spends from per-buffer budgets.
        for f in 1..=cfg.n {
            if !rng.gen_ratio(1, 4) {
                continue;
            }
            loop {
                let size = &sizes[rng.gen_range(0..sizes.len())];
                if size > &local[f] {
                    break;
                }
                local[f] -= size;
                p.inject(round, f, 1, size.clone())?;
                if rng.gen_ratio(2, 3) {
                    break;
                }
            }
        }
    }
    Ok(p)
}

/// Unconstrained random pattern (may violate any bound); for oracle
/// equivalence tests.
pub fn random_pattern(
    n: usize,
    horizon: u64,
    max_batch: u64,
    rng: &mut impl Rng,
) -> Result<InjectionPattern> {
    let mut p = InjectionPattern::new(n, horizon)?;
    let batches = rng.gen_range(0..=2 * n as u64 + horizon);
    for _ in 0..batches {
        let round = rng.gen_range(0..=horizon);
        let origin = rng.gen_range(1..=n);
        let count = rng.gen_range(0..=max_batch);
        p.inject_unit(round, origin, count)?;
    }
    Ok(p)
}

/// Random monotone piecewise-linear curve with rational breakpoints.
pub fn random_curve(max_time: u64, rng: &mut impl Rng) -> Result<ArrivalCurve> {
    let segments = rng.gen_range(0..=4usize);
    let mut points = Vec::new();
    let mut t = rat::zero();
    let mut v = if rng.gen_bool(0.3) {
        rat::frac(rng.gen_range(0..=4), rng.gen_range(1..=3))
    } else {
        rat::zero()
    };
    if segments > 0 || v.is_positive() {
        points.push((t.clone(), v.clone()));
    }
    for _ in 0..segments {
        t += rat::frac(rng.gen_range(1..=max_time.max(1) as i64), rng.gen_range(1..=2));
        v += rat::frac(rng.gen_range(0..=6), rng.gen_range(1..=3));
        points.push((t.clone(), v.clone()));
    }
    ArrivalCurve::new(points)
}

/// Random flow family that satisfies its own dependent bound by
/// construction: per-flow bursts are computed as the tight envelope burst
/// for a sampled rate, and the family burst is the tight dependent burst
/// for the summed rate.
pub fn random_flow_family(
    n: usize,
    flows: usize,
    max_time: u64,
    rng: &mut impl Rng,
) -> Result<FlowFamily> {
    let mut built = Vec::with_capacity(flows);
    let mut rate_sum = rat::zero();
    for _ in 0..flows {
        let curve = random_curve(max_time, rng)?;
        let rate = rat::frac(rng.gen_range(0..=3), rng.gen_range(1..=2));
        let burst = min_curve_burst(&curve, &rate);
        rate_sum += &rate;
        built.push(Flow::new(curve, Route::new(rng.gen_range(1..=n)), rate, burst)?);
    }
    let probe = FlowFamily::new_unchecked(built, rate_sum.clone(), rat::zero());
    let sigma = min_dependent_sigma(&probe, &rate_sum);
    FlowFamily::new(probe.flows().to_vec(), rate_sum, sigma)
}
