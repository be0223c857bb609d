//! Injection patterns (adversaries as realized traces) and edge-utilization
//! counters.
//!
//! A pattern is a finite multiset of timed, routed, sized packet injections
//! over rounds `0..=horizon`. Round numbering matches the usual convention
//! for these models: the first simulated round is round 1 and round 0 is a
//! legal (normally empty) warm-up round, so no translation happens anywhere
//! between files, the API, and the simulator.
//!
//! The pattern file format is CSV with header `round,origin,count,size`,
//! one record per injection batch; `size` may be omitted and defaults to 1.
//! Sizes are exact rationals written as `p/q`.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use num_traits::Signed;

use crate::error::{Error, Result};
use crate::rat::{self, Rat};
use crate::topology::Route;

/// A single packet: injection round, route, and size (1 in the homogeneous
/// model).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PacketSpec {
    pub round: u64,
    pub route: Route,
    pub size: Rat,
}

/// An aggregated batch of identical packets. The multiset semantics of a
/// pattern are kept by counting multiplicity here.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionRecord {
    pub round: u64,
    pub origin: usize,
    pub count: u64,
    pub size: Rat,
}

/// A finite multiset of packet injections on a path of `n` buffers, bounded
/// by an explicit horizon. Immutable in spirit: build it up, then treat it
/// as a value. All counters over it are pure functions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InjectionPattern {
    n: usize,
    horizon: u64,
    items: Vec<InjectionRecord>,
}

impl InjectionPattern {
    pub fn new(n: usize, horizon: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("pattern needs n >= 1"));
        }
        Ok(InjectionPattern {
            n,
            horizon,
            items: Vec::new(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn items(&self) -> &[InjectionRecord] {
        &self.items
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Adds `count` unit packets at `(round, origin)`.
    pub fn inject_unit(&mut self, round: u64, origin: usize, count: u64) -> Result<()> {
        self.inject(round, origin, count, rat::one())
    }

    /// Adds `count` packets of the given size at `(round, origin)`.
    pub fn inject(&mut self, round: u64, origin: usize, count: u64, size: Rat) -> Result<()> {
        if round > self.horizon {
            return Err(Error::validation(format!(
                "round {round} beyond horizon {}",
                self.horizon
            )));
        }
        if origin == 0 || origin > self.n {
            return Err(Error::validation(format!(
                "origin {origin} outside 1..={}",
                self.n
            )));
        }
        if !size.is_positive() {
            return Err(Error::validation(format!("packet size must be positive, got {size}")));
        }
        if count == 0 {
            return Ok(());
        }
        // Merge with an existing identical batch to keep the multiset small.
        if let Some(rec) = self
            .items
            .iter_mut()
            .find(|r| r.round == round && r.origin == origin && r.size == size)
        {
            rec.count += count;
        } else {
            self.items.push(InjectionRecord {
                round,
                origin,
                count,
                size,
            });
            self.items
                .sort_by(|a, b| (a.round, a.origin).cmp(&(b.round, b.origin)).then(a.size.cmp(&b.size)));
        }
        Ok(())
    }

    /// Total number of packets.
    pub fn total_packets(&self) -> u64 {
        self.items.iter().map(|r| r.count).sum()
    }

    /// Total injected weight.
    pub fn total_weight(&self) -> Rat {
        let mut w = rat::zero();
        for r in &self.items {
            w += &r.size * rat::uint(r.count);
        }
        w
    }

    /// True iff every packet has size 1 (the homogeneous model).
    pub fn is_unit_sized(&self) -> bool {
        self.items.iter().all(|r| r.size == rat::one())
    }

    /// Expands the multiset into individual packets, in deterministic
    /// (round, origin) order.
    pub fn packets(&self) -> impl Iterator<Item = PacketSpec> + '_ {
        self.items.iter().flat_map(|r| {
            (0..r.count).map(move |_| PacketSpec {
                round: r.round,
                route: Route::new(r.origin),
                size: r.size.clone(),
            })
        })
    }

    /// Injections grouped per round, for the simulator: `(origin, count, size)`.
    pub fn by_round(&self) -> BTreeMap<u64, Vec<(usize, u64, Rat)>> {
        let mut m: BTreeMap<u64, Vec<(usize, u64, Rat)>> = BTreeMap::new();
        for r in &self.items {
            m.entry(r.round)
                .or_default()
                .push((r.origin, r.count, r.size.clone()));
        }
        m
    }

    /// Edge utilization: packets (or total size, when `weighted`) injected
    /// during the closed round interval `T`, with origin in `S`, whose route
    /// contains edge `e`.
    pub fn utilization(
        &self,
        e: usize,
        interval: (u64, u64),
        origins: &BTreeSet<usize>,
        weighted: bool,
    ) -> Result<Rat> {
        self.validate_query(e, interval)?;
        let (lo, hi) = interval;
        let mut acc = rat::zero();
        for r in &self.items {
            if r.round < lo || r.round > hi {
                continue;
            }
            if !origins.contains(&r.origin) {
                continue;
            }
            if !Route::new(r.origin).contains(e) {
                continue;
            }
            if weighted {
                acc += &r.size * rat::uint(r.count);
            } else {
                acc += rat::uint(r.count);
            }
        }
        Ok(acc)
    }

    /// Per-origin decomposition of `utilization`: every packet has a unique
    /// origin, so the map sums back to the full-set counter.
    pub fn per_origin_utilization(
        &self,
        e: usize,
        interval: (u64, u64),
        weighted: bool,
    ) -> Result<BTreeMap<usize, Rat>> {
        self.validate_query(e, interval)?;
        let (lo, hi) = interval;
        let mut m: BTreeMap<usize, Rat> = (1..=self.n).map(|f| (f, rat::zero())).collect();
        for r in &self.items {
            if r.round < lo || r.round > hi || !Route::new(r.origin).contains(e) {
                continue;
            }
            let add = if weighted {
                &r.size * rat::uint(r.count)
            } else {
                rat::uint(r.count)
            };
            *m.get_mut(&r.origin).expect("origin validated on insert") += add;
        }
        Ok(m)
    }

    fn validate_query(&self, e: usize, interval: (u64, u64)) -> Result<()> {
        if e == 0 || e > self.n {
            return Err(Error::validation(format!("edge {e} outside 1..={}", self.n)));
        }
        let (lo, hi) = interval;
        if lo > hi {
            return Err(Error::validation(format!("empty interval [{lo}, {hi}]")));
        }
        if hi > self.horizon {
            return Err(Error::validation(format!(
                "interval [{lo}, {hi}] beyond horizon {}",
                self.horizon
            )));
        }
        Ok(())
    }

    /// Writes the pattern file format.
    pub fn write_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "round,origin,count,size")?;
        for r in &self.items {
            writeln!(w, "{},{},{},{}", r.round, r.origin, r.count, r.size)?;
        }
        Ok(())
    }

    /// Reads the pattern file format. `n` and the horizon are inferred as the
    /// largest origin and round seen, unless the caller widens them later.
    pub fn read_csv(reader: impl BufRead) -> Result<Self> {
        let mut rows: Vec<(u64, usize, u64, Rat)> = Vec::new();
        let mut saw_header = false;
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() {
                continue;
            }
            if !saw_header {
                saw_header = true;
                if t.starts_with("round") {
                    continue;
                }
            }
            let fields: Vec<&str> = t.split(',').map(str::trim).collect();
            if fields.len() < 3 || fields.len() > 4 {
                return Err(Error::parse(
                    format!("pattern csv line {}", idx + 1),
                    format!("expected 3 or 4 fields, got {}", fields.len()),
                ));
            }
            let ctx = format!("pattern csv line {}", idx + 1);
            let round: u64 = fields[0]
                .parse()
                .map_err(|e| Error::parse(ctx.clone(), format!("round: {e}")))?;
            let origin: usize = fields[1]
                .parse()
                .map_err(|e| Error::parse(ctx.clone(), format!("origin: {e}")))?;
            let count: u64 = fields[2]
                .parse()
                .map_err(|e| Error::parse(ctx.clone(), format!("count: {e}")))?;
            let size = match fields.get(3) {
                Some(s) if !s.is_empty() => rat::parse_nonneg(s)?,
                _ => rat::one(),
            };
            rows.push((round, origin, count, size));
        }
        let n = rows.iter().map(|r| r.1).max().unwrap_or(1);
        let horizon = rows.iter().map(|r| r.0).max().unwrap_or(0);
        let mut p = InjectionPattern::new(n, horizon)?;
        for (round, origin, count, size) in rows {
            p.inject(round, origin, count, size)?;
        }
        Ok(p)
    }
}

/// Per-buffer local burst budgets. A uniform shorthand `B` is a map with no
/// overrides.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Beta {
    default: Rat,
    overrides: BTreeMap<usize, Rat>,
}

impl Beta {
    pub fn uniform(b: Rat) -> Result<Self> {
        if b.is_negative() {
            return Err(Error::validation(format!("beta must be non-negative, got {b}")));
        }
        Ok(Beta {
            default: b,
            overrides: BTreeMap::new(),
        })
    }

    pub fn with_overrides(default: Rat, overrides: BTreeMap<usize, Rat>) -> Result<Self> {
        if default.is_negative() || overrides.values().any(|v| v.is_negative()) {
            return Err(Error::validation("beta values must be non-negative"));
        }
        Ok(Beta { default, overrides })
    }

    pub fn zero() -> Self {
        Beta {
            default: rat::zero(),
            overrides: BTreeMap::new(),
        }
    }

    pub fn get(&self, buffer: usize) -> Rat {
        self.overrides
            .get(&buffer)
            .cloned()
            .unwrap_or_else(|| self.default.clone())
    }

    /// Sum over buffers `1..=n`.
    pub fn sum(&self, n: usize) -> Rat {
        let mut total = self.default.clone() * rat::uint(n as u64);
        for (i, v) in &self.overrides {
            if *i >= 1 && *i <= n {
                total += v - &self.default;
            }
        }
        total
    }

    /// Pointwise transform, e.g. the bundling scaling `beta -> 1 + beta/C`.
    pub fn map(&self, f: impl Fn(&Rat) -> Rat) -> Self {
        Beta {
            default: f(&self.default),
            overrides: self.overrides.iter().map(|(i, v)| (*i, f(v))).collect(),
        }
    }

    /// Largest budget over `1..=n` (the uniform bound `B`).
    pub fn max(&self, n: usize) -> Rat {
        let mut m = self.default.clone();
        for (i, v) in &self.overrides {
            if *i >= 1 && *i <= n && *v > m {
                m = v.clone();
            }
        }
        m
    }
}

/// The locally bursty bound parameters `(rho, sigma, beta)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BoundParams {
    pub rho: Rat,
    pub sigma: Rat,
    pub beta: Beta,
}

impl BoundParams {
    pub fn new(rho: Rat, sigma: Rat, beta: Beta) -> Result<Self> {
        if rho.is_negative() {
            return Err(Error::validation(format!("rho must be non-negative, got {rho}")));
        }
        if sigma.is_negative() {
            return Err(Error::validation(format!("sigma must be non-negative, got {sigma}")));
        }
        Ok(BoundParams { rho, sigma, beta })
    }

    pub fn uniform(rho: Rat, sigma: Rat, b: Rat) -> Result<Self> {
        Ok(BoundParams {
            rho,
            sigma,
            beta: Beta::uniform(b)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adversaries::{example_a0, example_a1};
    use num_traits::Zero;

    fn origins(v: &[usize]) -> BTreeSet<usize> {
        v.iter().copied().collect()
    }

    #[test]
    fn a1_one_packet_per_buffer_crosses_last_edge() {
        let a = example_a1(4, 5).unwrap();
        let u = a
            .utilization(4, (1, 1), &origins(&[1, 2, 3, 4]), false)
            .unwrap();
        assert_eq!(u, rat::int(4));
    }

    #[test]
    fn empty_origin_set_counts_nothing() {
        let a = example_a1(4, 5).unwrap();
        let u = a.utilization(4, (1, 5), &BTreeSet::new(), false).unwrap();
        assert_eq!(u, rat::zero());
    }

    #[test]
    fn a0_two_batches_crossing_first_edge() {
        let a = example_a0(4, 9).unwrap();
        let u = a.utilization(1, (1, 5), &origins(&[1]), false).unwrap();
        assert_eq!(u, rat::int(8));
    }

    #[test]
    fn per_origin_decomposes_a1_and_a0() {
        let a1 = example_a1(4, 5).unwrap();
        let m = a1.per_origin_utilization(4, (1, 1), false).unwrap();
        for f in 1..=4 {
            assert_eq!(m[&f], rat::one());
        }

        let a0 = example_a0(4, 5).unwrap();
        let m = a0.per_origin_utilization(1, (1, 1), false).unwrap();
        assert_eq!(m[&1], rat::int(4));
        for f in 2..=4 {
            assert_eq!(m[&f], rat::zero());
        }

        let empty = InjectionPattern::new(4, 5).unwrap();
        let m = empty.per_origin_utilization(2, (0, 5), false).unwrap();
        assert!(m.values().all(|v| v.is_zero()));
    }

    #[test]
    fn interval_outside_horizon_is_rejected() {
        let a = example_a1(4, 5).unwrap();
        assert!(a.utilization(4, (1, 6), &origins(&[1]), false).is_err());
        assert!(a.utilization(5, (1, 5), &origins(&[1]), false).is_err());
    }

    #[test]
    fn csv_round_trip_with_default_size() {
        let text = "round,origin,count,size\n1,1,4\n5,2,1,2/3\n";
        let p = InjectionPattern::read_csv(text.as_bytes()).unwrap();
        assert_eq!(p.total_packets(), 5);
        assert!(!p.is_unit_sized());
        let mut out = Vec::new();
        p.write_csv(&mut out).unwrap();
        let p2 = InjectionPattern::read_csv(out.as_slice()).unwrap();
        assert_eq!(p, p2);
    }

    #[test]
    fn beta_sum_and_overrides() {
        let b = Beta::uniform(rat::one()).unwrap();
        assert_eq!(b.sum(16), rat::int(16));

        let mut m = BTreeMap::new();
        m.insert(1usize, rat::int(5));
        let b = Beta::with_overrides(rat::zero(), m).unwrap();
        assert_eq!(b.get(1), rat::int(5));
        assert_eq!(b.get(2), rat::zero());
        assert_eq!(b.sum(4), rat::int(5));
    }

    #[test]
    fn multiset_merges_duplicates() {
        let mut p = InjectionPattern::new(2, 4).unwrap();
        p.inject_unit(1, 1, 2).unwrap();
        p.inject_unit(1, 1, 3).unwrap();
        assert_eq!(p.items().len(), 1);
        assert_eq!(p.total_packets(), 5);
    }
}
