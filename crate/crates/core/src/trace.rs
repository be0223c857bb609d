//! Execution traces: per-round load snapshots, realized injections,
//! forwarding decisions, and an optional packet-lifecycle event log.
//!
//! The per-round load vector is `L^t`, the configuration between the
//! injection and forwarding steps of round `t`. CSV outputs are
//! deterministic byte-for-byte given the same run.
//!
//! Formats: trace CSV is long-form `round,buffer,load`; the summary CSV is
//! `buffer,max_load,argmax_round` (first round attaining the max); the
//! event log is JSON lines.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::engine::Protocol;
use crate::error::{Error, Result};
use crate::injection::InjectionPattern;
use crate::rat::{self, Rat};

/// One packet lifecycle event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Event {
    Inject {
        round: u64,
        id: u64,
        buffer: usize,
        height: u64,
        size: String,
    },
    Forward {
        round: u64,
        id: u64,
        from: usize,
        to: usize,
        height: u64,
        size: String,
    },
    Deliver {
        round: u64,
        id: u64,
        from: usize,
        size: String,
    },
}

/// Full record of a simulation run.
#[derive(Debug, Clone)]
pub struct Trace {
    n: usize,
    capacity: u64,
    protocol: Protocol,
    horizon: u64,
    /// `L^t` packet counts, indexed `[round][buffer-1]`.
    loads: Vec<Vec<u64>>,
    /// `L^t` stack weights; meaningful when packets are sized.
    weights: Vec<Vec<Rat>>,
    /// Realized injections per round: `(origin, count, size)`.
    injections: Vec<Vec<(usize, u64, Rat)>>,
    /// Buffers that forwarded, with packet counts, per round.
    forwarded: Vec<Vec<(usize, u64)>>,
    final_loads: Vec<u64>,
    final_weights: Vec<Rat>,
    pub delivered_packets: u64,
    events: Option<Vec<Event>>,
    /// Monitor findings; empty when instrumentation was off or clean.
    pub violations: Vec<String>,
}

impl Trace {
    pub(crate) fn new(
        n: usize,
        capacity: u64,
        protocol: Protocol,
        horizon: u64,
        record_events: bool,
    ) -> Self {
        Trace {
            n,
            capacity,
            protocol,
            horizon,
            loads: Vec::with_capacity(horizon as usize + 1),
            weights: Vec::with_capacity(horizon as usize + 1),
            injections: Vec::with_capacity(horizon as usize + 1),
            forwarded: Vec::with_capacity(horizon as usize + 1),
            final_loads: Vec::new(),
            final_weights: Vec::new(),
            delivered_packets: 0,
            events: record_events.then(Vec::new),
            violations: Vec::new(),
        }
    }

    pub(crate) fn records_events(&self) -> bool {
        self.events.is_some()
    }

    pub(crate) fn push_event(&mut self, e: Event) {
        self.events.as_mut().expect("event recording enabled").push(e);
    }

    pub(crate) fn push_round(
        &mut self,
        loads: Vec<u64>,
        weights: Vec<Rat>,
        injections: Vec<(usize, u64, Rat)>,
        forwarded: Vec<(usize, u64)>,
    ) {
        self.loads.push(loads);
        self.weights.push(weights);
        self.injections.push(injections);
        self.forwarded.push(forwarded);
    }

    pub(crate) fn finish(
        &mut self,
        final_loads: Vec<u64>,
        final_weights: Vec<Rat>,
        delivered: u64,
        violations: Vec<String>,
    ) {
        self.final_loads = final_loads;
        self.final_weights = final_weights;
        self.delivered_packets = delivered;
        self.violations = violations;
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn capacity(&self) -> u64 {
        self.capacity
    }

    pub fn events(&self) -> Option<&[Event]> {
        self.events.as_deref()
    }

    /// `L^t(buffer)` as a packet count.
    pub fn load(&self, round: u64, buffer: usize) -> u64 {
        self.loads[round as usize][buffer - 1]
    }

    /// `L^t(buffer)` as stack weight.
    pub fn load_weight(&self, round: u64, buffer: usize) -> &Rat {
        &self.weights[round as usize][buffer - 1]
    }

    pub fn loads_at(&self, round: u64) -> &[u64] {
        &self.loads[round as usize]
    }

    /// Loads at round start, before that round's injections.
    pub fn pre_injection_load(&self, round: u64, buffer: usize) -> u64 {
        let injected: u64 = self.injections[round as usize]
            .iter()
            .filter(|(origin, _, _)| *origin == buffer)
            .map(|(_, count, _)| count)
            .sum();
        self.loads[round as usize][buffer - 1] - injected
    }

    /// Post-forwarding loads after the last round.
    pub fn final_loads(&self) -> &[u64] {
        &self.final_loads
    }

    pub fn final_weights(&self) -> &[Rat] {
        &self.final_weights
    }

    /// Largest `L^t` over all rounds and buffers.
    pub fn max_load(&self) -> u64 {
        self.loads
            .iter()
            .flat_map(|row| row.iter().copied())
            .max()
            .unwrap_or(0)
    }

    /// Per-buffer maximum and the first round attaining it.
    pub fn buffer_max(&self, buffer: usize) -> (u64, u64) {
        let mut best = 0;
        let mut at = 0;
        for (round, row) in self.loads.iter().enumerate() {
            if row[buffer - 1] > best {
                best = row[buffer - 1];
                at = round as u64;
            }
        }
        (best, at)
    }

    /// Largest stack weight over all rounds and buffers.
    pub fn max_weight(&self) -> Rat {
        let mut best = rat::zero();
        for row in &self.weights {
            for w in row {
                if *w > best {
                    best = w.clone();
                }
            }
        }
        best
    }

    /// The injections that actually happened, as a checkable pattern.
    pub fn realized_pattern(&self) -> Result<InjectionPattern> {
        let mut p = InjectionPattern::new(self.n, self.horizon)?;
        for (round, batch) in self.injections.iter().enumerate() {
            for (origin, count, size) in batch {
                p.inject(round as u64, *origin, *count, size.clone())?;
            }
        }
        Ok(p)
    }

    fn unit_sized(&self) -> bool {
        self.injections
            .iter()
            .flatten()
            .all(|(_, _, size)| *size == rat::one())
    }

    /// Long-form `round,buffer,load` CSV. Loads are packet counts for unit
    /// packets and exact weights otherwise.
    pub fn write_trace_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "round,buffer,load")?;
        let unit = self.unit_sized();
        for round in 0..self.loads.len() {
            for buffer in 1..=self.n {
                if unit {
                    writeln!(w, "{round},{buffer},{}", self.loads[round][buffer - 1])?;
                } else {
                    writeln!(w, "{round},{buffer},{}", self.weights[round][buffer - 1])?;
                }
            }
        }
        Ok(())
    }

    /// `buffer,max_load,argmax_round` CSV.
    pub fn write_summary_csv(&self, w: &mut impl Write) -> Result<()> {
        writeln!(w, "buffer,max_load,argmax_round")?;
        for buffer in 1..=self.n {
            let (max, at) = self.buffer_max(buffer);
            writeln!(w, "{buffer},{max},{at}")?;
        }
        Ok(())
    }

    /// JSON-lines event log; errors if the run did not record events.
    pub fn write_events_jsonl(&self, w: &mut impl Write) -> Result<()> {
        let events = self
            .events
            .as_ref()
            .ok_or_else(|| Error::validation("run did not record events"))?;
        for e in events {
            let line = serde_json::to_string(e)
                .map_err(|err| Error::parse("event json", err.to_string()))?;
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Replays an event log into final per-buffer loads. The log is
/// deterministic and self-contained, so this must agree with the trace's
/// final state.
pub fn replay_final_loads(n: usize, events: &[Event]) -> Result<Vec<u64>> {
    let mut stacks: BTreeMap<usize, Vec<u64>> = (1..=n).map(|i| (i, Vec::new())).collect();
    for e in events {
        match e {
            Event::Inject { id, buffer, .. } => {
                stacks
                    .get_mut(buffer)
                    .ok_or_else(|| Error::validation(format!("bad buffer {buffer}")))?
                    .push(*id);
            }
            Event::Forward { id, from, to, .. } => {
                let popped = stacks
                    .get_mut(from)
                    .and_then(Vec::pop)
                    .ok_or_else(|| Error::validation(format!("forward from empty buffer {from}")))?;
                if popped != *id {
                    return Err(Error::validation(format!(
                        "forwarded packet {popped} but log names {id}"
                    )));
                }
                stacks
                    .get_mut(to)
                    .ok_or_else(|| Error::validation(format!("bad buffer {to}")))?
                    .push(*id);
            }
            Event::Deliver { id, from, .. } => {
                let popped = stacks
                    .get_mut(from)
                    .and_then(Vec::pop)
                    .ok_or_else(|| Error::validation(format!("deliver from empty buffer {from}")))?;
                if popped != *id {
                    return Err(Error::validation(format!(
                        "delivered packet {popped} but log names {id}"
                    )));
                }
            }
        }
    }
    Ok((1..=n).map(|i| stacks[&i].len() as u64).collect())
}
