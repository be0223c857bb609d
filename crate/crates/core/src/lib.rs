//! Discrete-round adversarial queueing laboratory for single-destination paths.
//!
//! The crate models synchronous packet forwarding on a directed path where
//! every packet shares the destination past the last buffer. Injection
//! patterns are constrained by rate/burst envelopes — either the classic
//! global `(rho, sigma)` bound or the locally bursty `(rho, sigma, beta)`
//! bound that adds a per-buffer burst budget. On top of that sit:
//!
//! * exact rational boundedness checkers with violation witnesses,
//! * arrival-curve flow families, their envelope checks, and the
//!   floor-difference discretization into packet patterns,
//! * C-reduction (jumbo packets) and heterogeneous-size bundling,
//! * a round simulator for the OED and greedy forwarding rules with LIFO
//!   height bookkeeping and plateau invariant monitoring,
//! * the adaptive and oblivious lower-bound adversary constructions.
//!
//! All checker arithmetic is exact (arbitrary-precision rationals); no
//! floating point participates in any verdict.

pub mod adversaries;
pub mod boundedness;
pub mod bundling;
pub mod engine;
mod error;
pub mod flows;
pub mod injection;
pub mod rat;
pub mod synth;
pub mod topology;
pub mod trace;

pub use boundedness::{Verdict, Witness};
pub use engine::{Plateau, Protocol, SimState};
pub use error::{Error, Result};
pub use flows::{ArrivalCurve, Flow, FlowFamily};
pub use injection::{Beta, BoundParams, InjectionPattern, PacketSpec};
pub use rat::Rat;
pub use topology::{PathTopology, Route};
pub use trace::Trace;
