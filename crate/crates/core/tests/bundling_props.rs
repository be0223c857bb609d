//! Property suite for bundling: the uniform C-reduction guarantee, the
//! heterogeneous reserve procedure's bound in jumbo units, and exact weight
//! conservation.

use num_bigint::BigInt;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use aqt_lab_core::boundedness::check_local;
use aqt_lab_core::bundling::{
    c_reduce_pattern, hetero_bundle, normalize_bundles, verify_uniform_bundling,
};
use aqt_lab_core::injection::BoundParams;
use aqt_lab_core::rat::{self, Rat};
use aqt_lab_core::synth::{random_local_pattern, LocalPatternConfig};

fn unit_cfg(rng: &mut impl Rng) -> LocalPatternConfig {
    LocalPatternConfig {
        n: rng.gen_range(1..=6),
        horizon: rng.gen_range(1..=12),
        rho: rat::frac(rng.gen_range(0..=4), rng.gen_range(1..=2)),
        sigma: rat::int(rng.gen_range(0..=4)),
        beta: rat::int(rng.gen_range(0..=3)),
        sizes: None,
    }
}

// A locally (rho, sigma, beta)-bounded pattern C-reduces to a locally
// (rho/C, sigma/C, 1 + beta/C)-bounded pattern, for every sampled instance.
#[test]
fn uniform_bundling_guarantee() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05_01);
    let mut cases = 0usize;
    while cases < 1000 {
        let cfg = unit_cfg(&mut rng);
        let pattern = random_local_pattern(&cfg, &mut rng).unwrap();
        let params =
            BoundParams::uniform(cfg.rho.clone(), cfg.sigma.clone(), cfg.beta.clone()).unwrap();
        for c in [2u64, 3, 4] {
            let verdict = verify_uniform_bundling(&pattern, &params, c).unwrap();
            assert!(
                verdict.is_ok(),
                "case {cases}, C={c}: reduction bound violated: {:?}",
                verdict.witness()
            );
            cases += 1;
        }
    }
}

// Jumbo emission matches per-route prefix floors at every round.
#[test]
fn jumbo_prefix_floors() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05_02);
    for _ in 0..200 {
        let cfg = unit_cfg(&mut rng);
        let pattern = random_local_pattern(&cfg, &mut rng).unwrap();
        let c = rng.gen_range(2u64..=4);
        let reduced = c_reduce_pattern(&pattern, c).unwrap();
        for origin in 1..=pattern.n() {
            for prefix_end in 0..=pattern.horizon() {
                let raw: u64 = pattern
                    .items()
                    .iter()
                    .filter(|r| r.origin == origin && r.round <= prefix_end)
                    .map(|r| r.count)
                    .sum();
                let jumbos: u64 = reduced
                    .items()
                    .iter()
                    .filter(|r| r.origin == origin && r.round <= prefix_end)
                    .map(|r| r.count)
                    .sum();
                assert_eq!(jumbos, raw / c);
            }
        }
    }
}

fn sized_cfg(rng: &mut impl Rng, c: u64) -> LocalPatternConfig {
    // rho <= C/2, every size <= C
    let rho = rat::frac(rng.gen_range(0..=c as i64), 2);
    let candidates = [
        rat::frac(1, 3),
        rat::frac(1, 2),
        rat::frac(2, 3),
        rat::one(),
        rat::frac(3, 2),
        rat::int(2),
        rat::int(3),
    ];
    let cap = rat::uint(c);
    let sizes: Vec<Rat> = candidates.into_iter().filter(|s| *s <= cap).collect();
    LocalPatternConfig {
        n: rng.gen_range(1..=5),
        horizon: rng.gen_range(1..=12),
        rho,
        sigma: rat::int(rng.gen_range(0..=4)),
        beta: rat::int(rng.gen_range(0..=3)),
        sizes: Some(sizes),
    }
}

// For rho <= C/2, the emitted bundles — measured in jumbo units, the scale
// on which the reduced network has unit capacity — satisfy the locally
// bursty bound (1, sigma/C, 1 + beta/C). Weight conservation is exact.
#[test]
fn heterogeneous_bundling_bound_and_conservation() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x05_03);
    let mut cases = 0usize;
    while cases < 400 {
        let c = rng.gen_range(2u64..=4);
        let cfg = sized_cfg(&mut rng, c);
        let pattern = random_local_pattern(&cfg, &mut rng).unwrap();
        let params =
            BoundParams::uniform(cfg.rho.clone(), cfg.sigma.clone(), cfg.beta.clone()).unwrap();
        assert!(check_local(&pattern, &params).unwrap().is_ok());

        let (bundles, state) = hetero_bundle(&pattern, c).unwrap();

        // conservation
        let mut total = bundles.total_weight();
        for v in state.final_reserves.values() {
            total += v;
        }
        assert_eq!(total, pattern.total_weight(), "case {cases}: weight lost");

        // every bundle within [C/2, C]
        let half = rat::frac(c as i64, 2);
        let cap = rat::uint(c);
        for b in &state.bundles {
            assert!(b.weight >= half && b.weight <= cap, "bundle weight {}", b.weight);
        }

        // bound in jumbo units
        let inv = rat::frac(1, c as i64);
        let scaled = BoundParams::new(
            rat::one(),
            &cfg.sigma * &inv,
            params.beta.map(|b| rat::one() + b * &inv),
        )
        .unwrap();
        let normalized = normalize_bundles(&bundles, c).unwrap();
        let verdict = check_local(&normalized, &scaled).unwrap();
        assert!(
            verdict.is_ok(),
            "case {cases}, C={c}: bundle bound violated: {:?}",
            verdict.witness()
        );
        cases += 1;
    }
}

// Composed pipeline smoke test: bundles as unit slots drive a
// unit-capacity protocol without capacity faults and with bounded loads.
#[test]
fn bundles_drive_unit_protocol() {
    use aqt_lab_core::adversaries::FixedPattern;
    use aqt_lab_core::bundling::bundles_as_unit_slots;
    use aqt_lab_core::engine::{run, Protocol, RunOptions};
    use aqt_lab_core::topology::PathTopology;

    let mut rng = ChaCha8Rng::seed_from_u64(0x05_04);
    let c = 4u64;
    let cfg = LocalPatternConfig {
        n: 4,
        horizon: 40,
        rho: rat::int(2),
        sigma: rat::int(2),
        beta: rat::int(2),
        sizes: Some(vec![rat::frac(1, 2), rat::one(), rat::int(2)]),
    };
    let pattern = random_local_pattern(&cfg, &mut rng).unwrap();
    let (bundles, _) = hetero_bundle(&pattern, c).unwrap();
    let slots = bundles_as_unit_slots(&bundles).unwrap();
    let mut adv = FixedPattern::from(&slots);
    let topo = PathTopology::new(4, 1).unwrap();
    let trace = run(topo, &mut adv, Protocol::Oed, 60, &RunOptions::default()).unwrap();
    assert!(trace.violations.is_empty());
    assert!(BigInt::from(trace.max_load()) <= BigInt::from(40u64));
}
