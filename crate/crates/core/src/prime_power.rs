//! Splitting odd prime powers `M = p^n`.
//!
//! `U(Z_M)` is cyclic of order `p^(n-1) (p-1)`, so for a random unit `m`
//! the order `r` is divisible by `p^(n-1)` with probability `1 - 1/p`, and
//! then `M / gcd(M, r) = p`. A classical perfect-power test covers the same
//! ground and is tried first.

use num_bigint::RandBigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::CostLedger;
use crate::ntheory::{self, nat, Natural};
use crate::order_finding::{self, EngineKind, ShorConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrimePowerMethod {
    Quantum,
    Classical,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimePowerResult {
    pub base: Natural,
    pub exponent: u32,
    pub method: PrimePowerMethod,
}

/// Exponent `n` with `p^n = m`, if `m` is a power of `p`.
pub fn power_of(m: &Natural, p: &Natural) -> Option<u32> {
    if *p < nat(2) || m.is_zero() {
        return None;
    }
    let mut rest = m.clone();
    let mut n = 0u32;
    while !rest.is_one() {
        let (q, r) = rest.div_rem(p);
        if !r.is_zero() {
            return None;
        }
        rest = q;
        n += 1;
    }
    Some(n)
}

fn check_domain(m: &Natural) -> Result<()> {
    if m.is_even() || *m < nat(9) {
        return Err(Error::domain(format!(
            "prime-power splitting needs an odd M >= 9, got {m}"
        )));
    }
    Ok(())
}

/// The candidate `M / gcd(M, r)` for one base `m`, accepted only when `M`
/// is a power of it and it is a probable prime.
pub fn prime_power_from_base<R: Rng + ?Sized>(
    m_val: &Natural,
    base: &Natural,
    engine: EngineKind,
    rng: &mut R,
    config: &ShorConfig,
    ledger: &CostLedger,
) -> Result<Option<PrimePowerResult>> {
    check_domain(m_val)?;
    let attempts = config.attempts_for(m_val)?;
    let Some(found) = order_finding::find_order(
        m_val,
        base,
        engine,
        rng,
        attempts,
        config.width_cap,
        ledger,
    )?
    else {
        return Ok(None);
    };
    let candidate = m_val / ntheory::gcd(m_val, &found.order)?;
    if candidate < nat(2) {
        return Ok(None);
    }
    let Some(exponent) = power_of(m_val, &candidate) else {
        return Ok(None);
    };
    let primality =
        ntheory::compositeness_prefilter(&candidate, config.compositeness_rounds, rng, ledger)?;
    if !primality.is_probable_prime() {
        return Ok(None);
    }
    Ok(Some(PrimePowerResult {
        base: candidate,
        exponent,
        method: PrimePowerMethod::Quantum,
    }))
}

/// Quantum route: random units `m`, order `r`, candidate `M / gcd(M, r)`.
///
/// A prime `M` comes back as `(M, 1)`. Returns `Ok(None)` once
/// `config.max_base_retries` bases have failed.
pub fn factor_prime_power_quantum<R: Rng + ?Sized>(
    m_val: &Natural,
    engine: EngineKind,
    rng: &mut R,
    config: &ShorConfig,
    ledger: &CostLedger,
) -> Result<Option<PrimePowerResult>> {
    check_domain(m_val)?;
    for _ in 0..config.max_base_retries.max(1) {
        let base = rng.gen_biguint_range(&nat(2), m_val);
        if !ntheory::gcd(&base, m_val)?.is_one() {
            continue;
        }
        if let Some(found) = prime_power_from_base(m_val, &base, engine, rng, config, ledger)? {
            return Ok(Some(found));
        }
    }
    Ok(None)
}

/// Classical route: integer roots, accepted when the root is a probable
/// prime.
pub fn factor_prime_power_classical<R: Rng + ?Sized>(
    m_val: &Natural,
    compositeness_rounds: u32,
    rng: &mut R,
    ledger: &CostLedger,
) -> Result<Option<PrimePowerResult>> {
    let Some((b, e)) = ntheory::perfect_power_decompose(m_val)? else {
        return Ok(None);
    };
    let primality = ntheory::compositeness_prefilter(&b, compositeness_rounds, rng, ledger)?;
    Ok(primality.is_probable_prime().then_some(PrimePowerResult {
        base: b,
        exponent: e,
        method: PrimePowerMethod::Classical,
    }))
}

/// Classical perfect-power decomposition first, then the quantum route.
pub fn factor_prime_power<R: Rng + ?Sized>(
    m_val: &Natural,
    engine: EngineKind,
    rng: &mut R,
    config: &ShorConfig,
    ledger: &CostLedger,
) -> Result<Option<PrimePowerResult>> {
    check_domain(m_val)?;
    if let Some(found) =
        factor_prime_power_classical(m_val, config.compositeness_rounds, rng, ledger)?
    {
        return Ok(Some(found));
    }
    // a prime M comes back from the quantum route as (M, 1)
    factor_prime_power_quantum(m_val, engine, rng, config, ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn n(v: u64) -> Natural {
        nat(v)
    }

    fn forced(m: u64, base: u64) -> Option<PrimePowerResult> {
        let l = CostLedger::new();
        let mut rng = seeded_rng(0);
        prime_power_from_base(
            &n(m),
            &n(base),
            EngineKind::ClassicalOracle,
            &mut rng,
            &ShorConfig::default(),
            &l,
        )
        .unwrap()
    }

    #[test]
    fn forced_base_examples() {
        let r = forced(9, 2).unwrap();
        assert_eq!((r.base, r.exponent), (n(3), 2));
        let r = forced(25, 2).unwrap();
        assert_eq!((r.base, r.exponent), (n(5), 2));
        let r = forced(27, 2).unwrap();
        assert_eq!((r.base, r.exponent), (n(3), 3));
        assert_eq!(r.method, PrimePowerMethod::Quantum);
        // 8 = -1 mod 9 has order 2, gcd(9, 2) = 1 gives 9 itself, not prime
        assert_eq!(forced(9, 8), None);
    }

    #[test]
    fn prime_modulus_degenerates_to_exponent_one() {
        let r = forced(13, 2).unwrap();
        assert_eq!((r.base, r.exponent), (n(13), 1));
    }

    #[test]
    fn combined_examples() {
        let cfg = ShorConfig::default();
        let l = CostLedger::new();
        let mut rng = seeded_rng(4);
        let r = factor_prime_power(&n(81), EngineKind::StateVector, &mut rng, &cfg, &l)
            .unwrap()
            .unwrap();
        assert_eq!((r.base, r.exponent, r.method), (n(3), 4, PrimePowerMethod::Classical));
        let r = factor_prime_power(&n(121), EngineKind::StateVector, &mut rng, &cfg, &l)
            .unwrap()
            .unwrap();
        assert_eq!((r.base, r.exponent, r.method), (n(11), 2, PrimePowerMethod::Classical));
        assert_eq!(
            factor_prime_power(&n(15), EngineKind::StateVector, &mut rng, &cfg, &l).unwrap(),
            None
        );
        // square of a composite is a perfect power but not a prime power
        assert_eq!(
            factor_prime_power(&n(225), EngineKind::ClassicalOracle, &mut rng, &cfg, &l).unwrap(),
            None
        );
    }

    #[test]
    fn quantum_route_on_all_engines() {
        let cfg = ShorConfig::default();
        for engine in [EngineKind::StateVector, EngineKind::AnalyticSampling, EngineKind::ClassicalOracle] {
            for (m, p, e) in [(9u64, 3u64, 2u32), (25, 5, 2), (27, 3, 3), (49, 7, 2), (125, 5, 3), (243, 3, 5)] {
                let l = CostLedger::new();
                let mut rng = seeded_rng(m + 17);
                let r = factor_prime_power_quantum(&n(m), engine, &mut rng, &cfg, &l)
                    .unwrap()
                    .unwrap();
                assert_eq!((r.base, r.exponent), (n(p), e), "{engine:?} {m}");
                assert_eq!(num_traits::pow(n(p), e as usize), n(m));
            }
        }
    }

    #[test]
    fn domain_checks() {
        let cfg = ShorConfig::default();
        let l = CostLedger::new();
        let mut rng = seeded_rng(0);
        assert!(factor_prime_power(&n(8), EngineKind::ClassicalOracle, &mut rng, &cfg, &l).is_err());
        assert!(factor_prime_power(&n(7), EngineKind::ClassicalOracle, &mut rng, &cfg, &l).is_err());
        assert!(factor_prime_power_quantum(&n(16), EngineKind::ClassicalOracle, &mut rng, &cfg, &l).is_err());
    }

    #[test]
    fn power_of_basic() {
        assert_eq!(power_of(&n(81), &n(3)), Some(4));
        assert_eq!(power_of(&n(81), &n(9)), Some(2));
        assert_eq!(power_of(&n(80), &n(3)), None);
        assert_eq!(power_of(&n(1), &n(3)), Some(0));
        assert_eq!(power_of(&n(5), &n(1)), None);
    }
}
