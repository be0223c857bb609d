//! Property suite for the flow layer: the pattern-to-flow relaxation, the
//! discretization guarantee, conservation, and a dense-sampling cross-check
//! of the breakpoint-restricted envelope evaluation.

use num_traits::Zero;
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aqt_lab_core::boundedness::check_local;
use aqt_lab_core::flows::{
    check_curve, check_dependent, discretization_params, discretize, flows_from_pattern,
    min_curve_burst,
};
use aqt_lab_core::injection::BoundParams;
use aqt_lab_core::rat;
use aqt_lab_core::synth::{random_curve, random_flow_family, random_local_pattern, LocalPatternConfig};

// A locally bounded pattern relaxes to a flow family satisfying the
// dependent bound with the same rate and global burst, and per-flow bursts
// equal to the origin's budget.
#[test]
fn flow_relaxation_holds_for_bounded_patterns() {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    for case in 0..150 {
        let cfg = LocalPatternConfig {
            n: rng.gen_range(1..=6),
            horizon: rng.gen_range(1..=10),
            rho: rat::frac(rng.gen_range(0..=3), rng.gen_range(1..=2)),
            sigma: rat::int(rng.gen_range(0..=4)),
            beta: rat::int(rng.gen_range(0..=3)),
            sizes: None,
        };
        let pattern = random_local_pattern(&cfg, &mut rng).unwrap();
        let params =
            BoundParams::uniform(cfg.rho.clone(), cfg.sigma.clone(), cfg.beta.clone()).unwrap();
        assert!(check_local(&pattern, &params).unwrap().is_ok());
        let family = flows_from_pattern(&pattern, &params);
        let verdict = check_dependent(&family).unwrap();
        assert!(
            verdict.is_ok(),
            "case {case}: relaxation violated: {:?}",
            verdict.witness()
        );
    }
}

// Discretizing any valid family yields a pattern that satisfies the
// guaranteed locally bursty parameters.
#[test]
fn discretization_guarantee() {
    let mut rng = ChaCha8Rng::seed_from_u64(102);
    for case in 0..150 {
        let n = rng.gen_range(1..=5);
        let family = random_flow_family(n, rng.gen_range(0..=4), 8, &mut rng).unwrap();
        let horizon = 16;
        let pattern = discretize(&family, horizon).unwrap();
        let params = discretization_params(&family).unwrap();
        let verdict = check_local(&pattern, &params).unwrap();
        assert!(
            verdict.is_ok(),
            "case {case}: discretization bound violated: {:?}",
            verdict.witness()
        );
    }
}

// Total packets equal the summed floors of the final curve values.
#[test]
fn discretization_conserves_totals() {
    let mut rng = ChaCha8Rng::seed_from_u64(103);
    for _ in 0..100 {
        let family = random_flow_family(4, rng.gen_range(0..=4), 6, &mut rng).unwrap();
        let horizon = 24;
        let pattern = discretize(&family, horizon).unwrap();
        let mut expected = rat::zero();
        for f in family.flows() {
            expected += f.curve().eval(&rat::uint(horizon)).floor();
        }
        assert_eq!(rat::uint(pattern.total_packets()), expected);
    }
}

// Integer-valued step patterns survive the flows round trip unchanged.
#[test]
fn integer_patterns_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(104);
    for _ in 0..100 {
        let cfg = LocalPatternConfig {
            n: rng.gen_range(1..=6),
            horizon: rng.gen_range(1..=10),
            rho: rat::int(rng.gen_range(0..=3)),
            sigma: rat::int(rng.gen_range(0..=4)),
            beta: rat::int(rng.gen_range(0..=2)),
            sizes: None,
        };
        let pattern = random_local_pattern(&cfg, &mut rng).unwrap();
        let params = BoundParams::uniform(cfg.rho, cfg.sigma, cfg.beta).unwrap();
        let family = flows_from_pattern(&pattern, &params);
        let back = discretize(&family, pattern.horizon()).unwrap();
        assert_eq!(back.items(), pattern.items());
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, ..ProptestConfig::default() })]

    // The breakpoint-pair evaluation decides the same verdict that dense
    // random sampling of real windows observes.
    #[test]
    fn envelope_check_agrees_with_dense_sampling(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curve = random_curve(6, &mut rng).unwrap();
        let rate = rat::frac(rng.gen_range(0..=2), rng.gen_range(1..=2));
        let burst = rat::frac(rng.gen_range(0..=4), rng.gen_range(1..=2));
        let verdict = check_curve(&curve, &rate, &burst).unwrap();

        // Sample windows (s, t) including irrational-ish rationals between
        // breakpoints; none may violate when the verdict said ok.
        let horizon = rat::int(24);
        let mut sampled_violation = false;
        for _ in 0..200 {
            let s = rat::frac(rng.gen_range(-4..=96), rng.gen_range(1..=7));
            let dt = rat::frac(rng.gen_range(0..=48), rng.gen_range(1..=7));
            let t = &s + &dt;
            if t > horizon {
                continue;
            }
            let lhs = curve.eval(&t) - curve.eval(&s);
            let rhs = &rate * &dt + &burst;
            if lhs > rhs {
                sampled_violation = true;
                break;
            }
        }
        if verdict.is_ok() {
            prop_assert!(!sampled_violation);
        }
        // And the reported witness, if any, reproduces its violation through
        // plain evaluation (left limits approximated by a shrinking offset).
        if let Some(w) = verdict.witness() {
            let (s, t) = &w.window;
            let eps = rat::frac(1, 1_000_000);
            let lhs = curve.eval(t) - curve.eval(&(s - &eps));
            let rhs = &rate * (t - s + &eps) + &burst;
            prop_assert!(lhs > rhs);
        }
    }

    // min_curve_burst really is the tight envelope burst.
    #[test]
    fn min_curve_burst_tightness(seed in 0u64..10_000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let curve = random_curve(6, &mut rng).unwrap();
        let rate = rat::frac(rng.gen_range(0..=2), rng.gen_range(1..=2));
        let b = min_curve_burst(&curve, &rate);
        prop_assert!(check_curve(&curve, &rate, &b).unwrap().is_ok());
        let eps = rat::frac(1, 1000);
        if b >= eps && !b.is_zero() {
            prop_assert!(!check_curve(&curve, &rate, &(&b - &eps)).unwrap().is_ok());
        }
    }
}
