//! Engine-level suites: monitored runs over randomized bounded adversaries,
//! determinism, and event-log replay.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aqt_lab_core::adversaries::{example_a0, example_a1, FixedPattern};
use aqt_lab_core::boundedness::min_sigma;
use aqt_lab_core::engine::{run, MonitorConfig, Protocol, RunOptions};
use aqt_lab_core::injection::InjectionPattern;
use aqt_lab_core::rat;
use aqt_lab_core::synth::{random_local_pattern, LocalPatternConfig};
use aqt_lab_core::topology::PathTopology;
use aqt_lab_core::trace::replay_final_loads;

fn run_monitored(pattern: &InjectionPattern, protocol: Protocol, cfg: MonitorConfig) -> aqt_lab_core::Trace {
    let topo = PathTopology::new(pattern.n(), 1).unwrap();
    let mut adv = FixedPattern::from(pattern);
    let opts = RunOptions {
        monitor: Some(cfg),
        record_events: false,
    };
    run(topo, &mut adv, protocol, pattern.horizon() + 2 * pattern.n() as u64, &opts).unwrap()
}

// Plateau persistence, packet-movement ceilings, even-plateau origin, and
// both upper-load forms hold across randomized bounded adversaries under
// OED, with instrumentation on every round.
#[test]
fn oed_invariants_on_random_bounded_adversaries() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE0_01);
    for case in 0..40 {
        let n = [8usize, 16][case % 2];
        let sigma = rng.gen_range(0..=4);
        let b = rng.gen_range(0..=3);
        let cfg = LocalPatternConfig {
            n,
            horizon: 10 * n as u64,
            rho: rat::one(),
            sigma: rat::int(sigma),
            beta: rat::int(b),
            sizes: None,
        };
        let pattern = random_local_pattern(&cfg, &mut rng).unwrap();
        let global_sigma = min_sigma(&pattern, &rat::one()).unwrap();
        let monitor = MonitorConfig {
            persistence: true,
            packet_movement: true,
            even_plateau_origin: true,
            upper_load_local: Some((rat::int(sigma), rat::int(b))),
            upper_load_global: Some(global_sigma),
            conservation: true,
        };
        let trace = run_monitored(&pattern, Protocol::Oed, monitor);
        assert!(
            trace.violations.is_empty(),
            "case {case}: {:?}",
            trace.violations
        );
    }
}

// The structural checks (not the load bounds, which are OED-specific) also
// hold under greedy forwarding: persistence/movement/origin arguments only
// use the forwarding conventions, not the protocol.
#[test]
fn structural_invariants_hold_under_greedy() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE0_02);
    for _ in 0..20 {
        let cfg = LocalPatternConfig {
            n: 8,
            horizon: 60,
            rho: rat::one(),
            sigma: rat::int(rng.gen_range(0..=3)),
            beta: rat::int(rng.gen_range(0..=2)),
            sizes: None,
        };
        let pattern = random_local_pattern(&cfg, &mut rng).unwrap();
        let monitor = MonitorConfig {
            // Greedy breaks even plateaus from the left; only the
            // protocol-independent checks apply.
            persistence: false,
            packet_movement: false,
            even_plateau_origin: false,
            upper_load_local: None,
            upper_load_global: None,
            conservation: true,
        };
        let trace = run_monitored(&pattern, Protocol::Greedy, monitor);
        assert!(trace.violations.is_empty(), "{:?}", trace.violations);
    }
}

// Greedy keeps every buffer at load <= 1 under the staggered wave pattern,
// while the front-loaded variant forces the first buffer to n.
#[test]
fn wave_versus_burst_loads() {
    let a1 = example_a1(16, 64).unwrap();
    let t = run_monitored(&a1, Protocol::Greedy, MonitorConfig::structural());
    assert!(t.violations.is_empty());
    assert_eq!(t.max_load(), 1);

    let a0 = example_a0(16, 16).unwrap();
    for protocol in [Protocol::Greedy, Protocol::Oed] {
        let t = run_monitored(&a0, protocol, MonitorConfig::structural());
        assert_eq!(t.load(1, 1), 16);
    }
}

// Identical inputs yield identical traces, CSV bytes included.
#[test]
fn determinism_bit_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE0_03);
    let cfg = LocalPatternConfig {
        n: 8,
        horizon: 40,
        rho: rat::one(),
        sigma: rat::int(3),
        beta: rat::int(2),
        sizes: None,
    };
    let pattern = random_local_pattern(&cfg, &mut rng).unwrap();
    let mut csv_a = Vec::new();
    let mut csv_b = Vec::new();
    run_monitored(&pattern, Protocol::Oed, MonitorConfig::structural())
        .write_trace_csv(&mut csv_a)
        .unwrap();
    run_monitored(&pattern, Protocol::Oed, MonitorConfig::structural())
        .write_trace_csv(&mut csv_b)
        .unwrap();
    assert_eq!(csv_a, csv_b);
}

// The event log replays to the exact final stack contents.
#[test]
fn event_log_replays_to_final_state() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xE0_04);
    for _ in 0..20 {
        let cfg = LocalPatternConfig {
            n: rng.gen_range(2..=8),
            horizon: rng.gen_range(4..=40),
            rho: rat::one(),
            sigma: rat::int(rng.gen_range(0..=4)),
            beta: rat::int(rng.gen_range(0..=3)),
            sizes: None,
        };
        let pattern = random_local_pattern(&cfg, &mut rng).unwrap();
        let topo = PathTopology::new(pattern.n(), 1).unwrap();
        let mut adv = FixedPattern::from(&pattern);
        let protocol = if rng.gen_bool(0.5) { Protocol::Oed } else { Protocol::Greedy };
        let opts = RunOptions {
            monitor: None,
            record_events: true,
        };
        let trace = run(topo, &mut adv, protocol, pattern.horizon() + 4, &opts).unwrap();
        let replayed = replay_final_loads(pattern.n(), trace.events().unwrap()).unwrap();
        assert_eq!(replayed, trace.final_loads());
    }
}

// The realized pattern extracted from a trace equals the driving pattern.
#[test]
fn realized_pattern_matches_fixed_schedule() {
    let a1 = example_a1(8, 24).unwrap();
    let topo = PathTopology::new(8, 1).unwrap();
    let mut adv = FixedPattern::from(&a1);
    let trace = run(topo, &mut adv, Protocol::Greedy, 24, &RunOptions::default()).unwrap();
    assert_eq!(trace.realized_pattern().unwrap(), a1);
}
