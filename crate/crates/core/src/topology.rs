//! Single-destination path networks.
//!
//! Buffers are indexed `1..=n`; buffer `i` sits on the edge `(i, i+1)` and
//! node `n+1` is the shared destination. The buffer index doubles as the
//! edge identity throughout the crate.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A directed path of `n` buffers with a uniform integral edge capacity.
///
/// Immutable after construction; safe to share across threads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathTopology {
    n: usize,
    capacity: u64,
}

impl PathTopology {
    /// Validated constructor: `n >= 1`, `capacity >= 1`.
    pub fn new(n: usize, capacity: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::validation("path needs at least one buffer"));
        }
        if capacity == 0 {
            return Err(Error::validation("edge capacity must be at least 1"));
        }
        Ok(PathTopology { n, capacity })
    }

    /// Number of buffers.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    /// Index of the destination node.
    pub fn destination(&self) -> usize {
        self.n + 1
    }

    /// Route originating at `origin`, validated against this path.
    pub fn route_from(&self, origin: usize) -> Result<Route> {
        if origin == 0 || origin > self.n {
            return Err(Error::validation(format!(
                "route origin {origin} outside 1..={}",
                self.n
            )));
        }
        Ok(Route { origin })
    }
}

/// A route on the path. Fully determined by its origin buffer: it traverses
/// buffers `origin, origin+1, ..., n` to the destination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Route {
    pub origin: usize,
}

impl Route {
    pub fn new(origin: usize) -> Self {
        Route { origin }
    }

    /// True iff the route crosses edge `e`. Containment is the
    /// upward-closed set `{origin..n}`.
    pub fn contains(&self, e: usize) -> bool {
        self.origin <= e
    }
}
