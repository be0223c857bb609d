//! Boundedness verdicts for injection patterns.
//!
//! `check_rho_sigma` decides the global bound `N^T(e) <= rho*|T| + sigma`
//! and `check_local` the locally bursty bound
//! `N_S^T(e) <= rho*|T| + sigma + sum_{f in S} beta(f)`, both exactly and
//! with a concrete violation witness on failure. `|T|` for a closed round
//! interval `[r, s]` is `s - r + 1` (number of rounds).
//!
//! The universal quantifier over origin subsets `S` is eliminated through
//! the extremal subset `S*(e, T) = { f : N_f^T(e) > beta(f) }`: the bound
//! holds for all `S` iff `sum_f max(0, N_f^T(e) - beta(f)) <= rho*|T| +
//! sigma` for all `e, T`. Every packet has a unique origin, so per-origin
//! counters are additive and the reduction is sound; a direct subset
//! enumeration ships alongside as a test oracle.
//!
//! Internally all quantities are scaled by the common denominator of the
//! parameters and packet sizes and compared as 128-bit integers, which
//! keeps the arithmetic exact while the interval sweep stays cheap.
//! Interval endpoints are restricted to rounds that actually carry an
//! injection crossing the edge under test: shrinking an interval to such
//! endpoints leaves the left side unchanged and can only lower the right
//! side, so no violation is missed. Counting is always by size; unit
//! packets make that coincide with packet counts.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, ToPrimitive};

use crate::error::{Error, Result};
use crate::injection::{Beta, BoundParams, InjectionPattern};
use crate::rat::{self, Rat};

/// A concrete counterexample to a boundedness claim: re-evaluating the
/// utilization counter at `(edge, interval, origins)` reproduces
/// `lhs > rhs` exactly.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub edge: usize,
    pub interval: (u64, u64),
    pub origins: Vec<usize>,
    pub lhs: Rat,
    pub rhs: Rat,
}

/// Outcome of a boundedness check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    Ok,
    Violation(Witness),
}

impl Verdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, Verdict::Ok)
    }

    pub fn witness(&self) -> Option<&Witness> {
        match self {
            Verdict::Ok => None,
            Verdict::Violation(w) => Some(w),
        }
    }
}

/// Decides the global `(rho, sigma)` bound.
pub fn check_rho_sigma(a: &InjectionPattern, rho: &Rat, sigma: &Rat) -> Result<Verdict> {
    if rho.is_negative() || sigma.is_negative() {
        return Err(Error::validation("rho and sigma must be non-negative"));
    }
    let sp = ScaledPattern::build(a, rho, sigma, None)?;
    match sp.global_max_excess()? {
        (_, None) => Ok(Verdict::Ok),
        (max, Some((e, lo, hi))) if max > sp.sigma_s => {
            Ok(Verdict::Violation(sp.global_witness(a, rho, sigma, e, lo, hi)?))
        }
        _ => Ok(Verdict::Ok),
    }
}

/// Tightest `sigma` for the global bound at the given rate:
/// `max(0, max_{e,T} N^T(e) - rho*|T|)`.
pub fn min_sigma(a: &InjectionPattern, rho: &Rat) -> Result<Rat> {
    if rho.is_negative() {
        return Err(Error::validation("rho must be non-negative"));
    }
    let sp = ScaledPattern::build(a, rho, &rat::zero(), None)?;
    let (max, _) = sp.global_max_excess()?;
    let v = sp.unscale(max);
    Ok(if v.is_negative() { rat::zero() } else { v })
}

/// Decides the locally bursty `(rho, sigma, beta)` bound.
pub fn check_local(a: &InjectionPattern, params: &BoundParams) -> Result<Verdict> {
    let sp = ScaledPattern::build(a, &params.rho, &params.sigma, Some(&params.beta))?;
    match sp.local_search(SearchMode::FirstViolation)? {
        None => Ok(Verdict::Ok),
        Some((e, lo, hi)) => Ok(Verdict::Violation(sp.local_witness(a, params, e, lo, hi)?)),
    }
}

/// Tightest global burst for the local bound at fixed `(rho, beta)`:
/// `max(0, max_{e,T} sum_f max(0, N_f^T(e) - beta(f)) - rho*|T|)`.
pub fn min_global_burst(a: &InjectionPattern, rho: &Rat, beta: &Beta) -> Result<Rat> {
    if rho.is_negative() {
        return Err(Error::validation("rho must be non-negative"));
    }
    let sp = ScaledPattern::build(a, rho, &rat::zero(), Some(beta))?;
    let best = sp.local_max_excess()?;
    let v = sp.unscale(best);
    Ok(if v.is_negative() { rat::zero() } else { v })
}

/// A locally `(rho, sigma, beta)`-bounded pattern is globally
/// `(rho, sigma + sum_e beta(e))`-bounded.
pub fn local_implies_global(params: &BoundParams, n: usize) -> (Rat, Rat) {
    (
        params.rho.clone(),
        params.sigma.clone() + params.beta.sum(n),
    )
}

/// Direct transcription of the local bound over all `2^n` origin subsets.
/// Test oracle only; guarded against exponential blowup.
pub fn check_local_bruteforce(a: &InjectionPattern, params: &BoundParams) -> Result<Verdict> {
    let n = a.n();
    if n > 12 || a.horizon() > 12 {
        return Err(Error::validation(
            "brute-force checker is limited to n <= 12 and horizon <= 12",
        ));
    }
    let h = a.horizon();
    for e in 1..=n {
        for lo in 0..=h {
            for hi in lo..=h {
                let per_origin = a.per_origin_utilization(e, (lo, hi), true)?;
                let len = rat::uint(hi - lo + 1);
                for mask in 0u32..(1u32 << n) {
                    let mut lhs = rat::zero();
                    let mut rhs = &params.rho * &len + &params.sigma;
                    let mut set = Vec::new();
                    for f in 1..=n {
                        if mask & (1 << (f - 1)) != 0 {
                            lhs += &per_origin[&f];
                            rhs += params.beta.get(f);
                            set.push(f);
                        }
                    }
                    if lhs > rhs {
                        return Ok(Verdict::Violation(Witness {
                            edge: e,
                            interval: (lo, hi),
                            origins: set,
                            lhs,
                            rhs,
                        }));
                    }
                }
            }
        }
    }
    Ok(Verdict::Ok)
}

enum SearchMode {
    FirstViolation,
}

/// Pattern with all rationals scaled up to integers by the common
/// denominator of the parameters and packet sizes.
struct ScaledPattern {
    n: usize,
    scale: BigInt,
    rho_s: i128,
    sigma_s: i128,
    beta_s: Vec<i128>, // index 0 unused
    rounds: Vec<u64>,
    per_round: Vec<Vec<(usize, i128)>>, // aligned with `rounds`
}

fn to_i128(v: &BigInt, what: &str) -> Result<i128> {
    v.to_i128()
        .ok_or_else(|| Error::Overflow(format!("{what} does not fit the exact fast path")))
}

fn scaled(r: &Rat, scale: &BigInt, what: &str) -> Result<i128> {
    let v = r * Rat::from_integer(scale.clone());
    debug_assert!(v.is_integer());
    to_i128(&v.to_integer(), what)
}

impl ScaledPattern {
    fn build(a: &InjectionPattern, rho: &Rat, sigma: &Rat, beta: Option<&Beta>) -> Result<Self> {
        let n = a.n();
        let mut scale = BigInt::from(1);
        let mut fold = |r: &Rat| {
            scale = scale.lcm(r.denom());
        };
        fold(rho);
        fold(sigma);
        let beta_vals: Vec<Rat> = match beta {
            Some(b) => (1..=n).map(|i| b.get(i)).collect(),
            None => vec![rat::zero(); n],
        };
        for b in &beta_vals {
            fold(b);
        }
        for rec in a.items() {
            fold(&rec.size);
        }

        let rho_s = scaled(rho, &scale, "rho")?;
        let sigma_s = scaled(sigma, &scale, "sigma")?;
        let mut beta_s = vec![0i128; n + 1];
        for (i, b) in beta_vals.iter().enumerate() {
            beta_s[i + 1] = scaled(b, &scale, "beta")?;
        }

        let mut per: BTreeMap<u64, BTreeMap<usize, i128>> = BTreeMap::new();
        for rec in a.items() {
            let w = scaled(&rec.size, &scale, "size")?
                .checked_mul(rec.count as i128)
                .ok_or_else(|| Error::Overflow("batch weight".into()))?;
            *per.entry(rec.round).or_default().entry(rec.origin).or_insert(0) += w;
        }
        let rounds: Vec<u64> = per.keys().copied().collect();
        let per_round = per
            .values()
            .map(|m| m.iter().map(|(f, w)| (*f, *w)).collect())
            .collect();
        Ok(ScaledPattern {
            n,
            scale,
            rho_s,
            sigma_s,
            beta_s,
            rounds,
            per_round,
        })
    }

    fn unscale(&self, v: i128) -> Rat {
        Rat::new(BigInt::from(v), self.scale.clone())
    }

    /// Rounds and per-round scaled weights crossing edge `e`.
    fn edge_view(&self, e: usize) -> (Vec<u64>, Vec<Vec<(usize, i128)>>) {
        let mut rounds = Vec::new();
        let mut lists = Vec::new();
        for (r, list) in self.rounds.iter().zip(&self.per_round) {
            let filtered: Vec<(usize, i128)> =
                list.iter().filter(|(f, _)| *f <= e).copied().collect();
            if !filtered.is_empty() {
                rounds.push(*r);
                lists.push(filtered);
            }
        }
        (rounds, lists)
    }

    /// Max over edges and intervals of `N^T(e) - rho*|T|` (scaled), with the
    /// argmax. Linear sweep per edge: for a fixed right endpoint the best
    /// left endpoint minimizes the prefix expression.
    fn global_max_excess(&self) -> Result<(i128, Option<(usize, u64, u64)>)> {
        let mut best: i128 = i128::MIN;
        let mut arg = None;
        for e in 1..=self.n {
            let (rounds, lists) = self.edge_view(e);
            if rounds.is_empty() {
                continue;
            }
            let mut prefix: i128 = 0;
            // min over a of P(a-1) - rho*(r_a - 1), tracked with its index
            let mut min_left: i128 = i128::MAX;
            let mut min_left_round = 0u64;
            for (idx, r) in rounds.iter().enumerate() {
                let left = prefix
                    .checked_sub(
                        self.rho_s
                            .checked_mul(*r as i128 - 1)
                            .ok_or_else(|| Error::Overflow("rho*round".into()))?,
                    )
                    .ok_or_else(|| Error::Overflow("prefix".into()))?;
                if left < min_left {
                    min_left = left;
                    min_left_round = *r;
                }
                let w: i128 = lists[idx].iter().map(|(_, w)| *w).sum();
                prefix = prefix
                    .checked_add(w)
                    .ok_or_else(|| Error::Overflow("prefix".into()))?;
                let right = prefix - self.rho_s * (*r as i128);
                let value = right - min_left;
                if value > best {
                    best = value;
                    arg = Some((e, min_left_round, *r));
                }
            }
        }
        if arg.is_none() {
            return Ok((0, None));
        }
        Ok((best, arg))
    }

    fn global_witness(
        &self,
        a: &InjectionPattern,
        rho: &Rat,
        sigma: &Rat,
        e: usize,
        lo: u64,
        hi: u64,
    ) -> Result<Witness> {
        let origins: std::collections::BTreeSet<usize> = (1..=self.n).collect();
        let lhs = a.utilization(e, (lo, hi), &origins, true)?;
        let rhs = rho * rat::uint(hi - lo + 1) + sigma;
        debug_assert!(lhs > rhs);
        Ok(Witness {
            edge: e,
            interval: (lo, hi),
            origins: origins.into_iter().collect(),
            lhs,
            rhs,
        })
    }

    /// First interval (edge-major, then earliest endpoints) whose clamped
    /// per-origin excess exceeds sigma, or None.
    fn local_search(&self, _mode: SearchMode) -> Result<Option<(usize, u64, u64)>> {
        for e in 1..=self.n {
            if let Some(hit) = self.sweep_edge(e, self.sigma_s, true)?.1 {
                return Ok(Some(hit));
            }
        }
        Ok(None)
    }

    /// Max over edges and intervals of the clamped excess minus `rho*|T|`.
    fn local_max_excess(&self) -> Result<i128> {
        let mut best: i128 = 0;
        for e in 1..=self.n {
            let (value, _) = self.sweep_edge(e, best, false)?;
            if value > best {
                best = value;
            }
        }
        Ok(best)
    }

    /// Quadratic sweep over interval endpoints for one edge, with a
    /// branch-and-bound cutoff: for a fixed start, once even the raw weight
    /// remaining downstream cannot push the objective above `floor`, the
    /// inner loop stops. Clamping per origin only lowers the objective, so
    /// the cutoff is sound.
    ///
    /// Returns the max objective (`sum_f max(0, N_f - beta_f) - rho*|T|`)
    /// and, when `stop_at_floor` is set, the first interval strictly above
    /// `floor`.
    fn sweep_edge(
        &self,
        e: usize,
        floor: i128,
        stop_at_floor: bool,
    ) -> Result<(i128, Option<(usize, u64, u64)>)> {
        let (rounds, lists) = self.edge_view(e);
        let m = rounds.len();
        if m == 0 {
            return Ok((i128::MIN, None));
        }
        // prefix weights and suffix max of P(x) - rho * r_x
        let mut prefix = vec![0i128; m + 1];
        for i in 0..m {
            let w: i128 = lists[i].iter().map(|(_, w)| *w).sum();
            prefix[i + 1] = prefix[i]
                .checked_add(w)
                .ok_or_else(|| Error::Overflow("prefix".into()))?;
        }
        let mut suffix_max = vec![i128::MIN; m + 1];
        for i in (0..m).rev() {
            let d = prefix[i + 1] - self.rho_s * rounds[i] as i128;
            suffix_max[i] = suffix_max[i + 1].max(d);
        }

        let mut counts = vec![0i128; self.n + 1];
        let mut best = i128::MIN;
        let mut touched: Vec<usize> = Vec::new();
        for a_idx in 0..m {
            for &(f, _) in touched.iter().flat_map(|i| lists[*i].iter()) {
                counts[f] = 0;
            }
            // counts reset only for origins touched in the previous sweep
            touched.clear();
            let mut v: i128 = 0;
            let r_a = rounds[a_idx] as i128;
            for b_idx in a_idx..m {
                touched.push(b_idx);
                for &(f, w) in &lists[b_idx] {
                    let old = counts[f];
                    let new = old + w;
                    counts[f] = new;
                    v += (new - self.beta_s[f]).max(0) - (old - self.beta_s[f]).max(0);
                }
                let r_b = rounds[b_idx] as i128;
                let objective = v - self.rho_s * (r_b - r_a + 1);
                if objective > best {
                    best = objective;
                    if stop_at_floor && best > floor {
                        return Ok((best, Some((e, rounds[a_idx], rounds[b_idx]))));
                    }
                }
                // Upper bound on any extension of this start.
                if b_idx + 1 < m {
                    let bound = v - prefix[b_idx + 1] + self.rho_s * (r_a - 1) + suffix_max[b_idx + 1];
                    if bound <= best.max(floor) {
                        break;
                    }
                }
            }
        }
        Ok((best, None))
    }

    fn local_witness(
        &self,
        a: &InjectionPattern,
        params: &BoundParams,
        e: usize,
        lo: u64,
        hi: u64,
    ) -> Result<Witness> {
        let per_origin = a.per_origin_utilization(e, (lo, hi), true)?;
        let mut set = Vec::new();
        let mut lhs = rat::zero();
        let mut rhs = &params.rho * rat::uint(hi - lo + 1) + &params.sigma;
        for (f, nf) in &per_origin {
            if *nf > params.beta.get(*f) {
                set.push(*f);
                lhs += nf;
                rhs += params.beta.get(*f);
            }
        }
        debug_assert!(lhs > rhs);
        Ok(Witness {
            edge: e,
            interval: (lo, hi),
            origins: set,
            lhs,
            rhs,
        })
    }
}
