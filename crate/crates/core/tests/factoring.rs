use proptest::prelude::*;

use qprime::factorizer::distinct_shor_call_bound;
use qprime::ntheory::{multiplicative_order_bruteforce, nat};
use qprime::prime_power::factor_prime_power;
use qprime::{
    factor_completely, seeded_rng, CostLedger, EngineKind, FactorConfig, Factorization, Natural,
    ShorConfig,
};

fn reference(mut n: u64) -> Factorization {
    let mut pairs = Vec::new();
    let mut d = 2;
    while d * d <= n {
        let mut e = 0;
        while n % d == 0 {
            n /= d;
            e += 1;
        }
        if e > 0 {
            pairs.push((d, e));
        }
        d += 1;
    }
    if n > 1 {
        pairs.push((n, 1));
    }
    Factorization::from_pairs(pairs).unwrap()
}

fn run(m: u64, engine: EngineKind, seed: u64) -> (Factorization, CostLedger) {
    let ledger = CostLedger::new();
    let mut rng = seeded_rng(seed);
    let f = factor_completely(&nat(m), engine, &mut rng, &FactorConfig::default(), &ledger)
        .unwrap_or_else(|e| panic!("{engine:?} on {m}: {e}"));
    (f, ledger)
}

#[test]
fn state_vector_agrees_with_oracle_up_to_100() {
    for m in 2..=100 {
        let (a, _) = run(m, EngineKind::StateVector, m);
        let (b, _) = run(m, EngineKind::ClassicalOracle, m);
        assert_eq!(a, b, "{m}");
        assert_eq!(a, reference(m));
    }
}

#[test]
fn oracle_runs_are_deterministic() {
    for m in [360u64, 9_797, 65_535, 1_000_001, 123_456_789] {
        let (f1, l1) = run(m, EngineKind::ClassicalOracle, 42);
        let (f2, l2) = run(m, EngineKind::ClassicalOracle, 42);
        assert_eq!(f1, f2);
        assert_eq!(l1.totals(), l2.totals());
    }
}

#[test]
fn splits_are_bounded_by_primes_above_the_trial_bound() {
    for engine in [EngineKind::ClassicalOracle, EngineKind::AnalyticSampling] {
        for m in (2u64..5_000).chain([3 * 5 * 7 * 11 * 13 * 17 * 19 * 23, 1_022_117 * 3]) {
            let (f, ledger) = run(m, engine, m ^ 0x5a5a);
            let bound = FactorConfig::default().trial_bound_for(&nat(m));
            let splits = ledger.totals().factor_splits;
            assert!(
                splits <= distinct_shor_call_bound(&f, &bound),
                "{engine:?} {m}: {splits} splits for {f}"
            );
            assert_eq!(f.product(), nat(m));
        }
    }
}

#[test]
fn unit_group_of_prime_powers_has_the_cyclic_count() {
    for p in [3u64, 5, 7, 11] {
        let mut m = p * p;
        let mut n = 2;
        while m <= 130 {
            let need = nat(p.pow(n - 1));
            let units: Vec<u64> = (1..m).filter(|a| a % p != 0).collect();
            let hits = units
                .iter()
                .filter(|&&a| {
                    let r = multiplicative_order_bruteforce(&nat(a), &nat(m)).unwrap();
                    (&r % &need) == nat(0)
                })
                .count() as u64;
            assert_eq!(hits * p, units.len() as u64 * (p - 1), "M = {p}^{n}");
            m *= p;
            n += 1;
        }
    }
}

#[test]
fn prime_power_results_reconstruct_m() {
    let cfg = ShorConfig::default();
    for p in [3u64, 5, 7, 11, 13, 31] {
        let mut m = p;
        while m < 5_000 {
            if m >= 9 {
                for engine in [EngineKind::StateVector, EngineKind::AnalyticSampling, EngineKind::ClassicalOracle] {
                    let ledger = CostLedger::new();
                    let mut rng = seeded_rng(m);
                    let r = factor_prime_power(&nat(m), engine, &mut rng, &cfg, &ledger)
                        .unwrap()
                        .unwrap_or_else(|| panic!("{engine:?} missed {m}"));
                    assert_eq!(r.base, nat(p));
                    assert_eq!(num_traits::pow(r.base, r.exponent as usize), nat(m));
                }
            }
            m *= p;
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn analytic_factorizations_reconstruct(m in 2u64..(1 << 32)) {
        let (f, _) = run(m, EngineKind::AnalyticSampling, m);
        prop_assert_eq!(f.product(), Natural::from(m));
        prop_assert_eq!(f, reference(m));
    }
}
