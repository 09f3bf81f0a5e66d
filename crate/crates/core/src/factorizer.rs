//! Complete factorization of `M`.
//!
//! Small primes are removed by trial division. The cofactor goes on a
//! worklist; each piece is recorded if it is a probable prime, decomposed if
//! it is a perfect power, and otherwise split by a Shor factoring step. A
//! split `M = f * (M/f)` is refined by peeling `g = gcd(f, M/f)` until the
//! two sides are coprime.

use std::collections::BTreeMap;
use std::fmt;

use num_integer::Integer;
use num_traits::One;
use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::CostLedger;
use crate::ntheory::{self, nat, Natural};
use crate::order_finding::{self, EngineKind, ShorConfig};
use crate::prime_power;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct PrimePower {
    pub prime: Natural,
    pub exponent: u32,
}

/// `(prime, exponent)` pairs with strictly increasing primes.
///
/// The primes are probable primes; proving them prime is the certifier's
/// job.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Factorization {
    prime_powers: Vec<PrimePower>,
}

impl Factorization {
    /// Validates ordering, distinctness and exponents.
    pub fn new(prime_powers: Vec<PrimePower>) -> Result<Self> {
        for pp in &prime_powers {
            if pp.prime < nat(2) || pp.exponent == 0 {
                return Err(Error::domain(format!(
                    "invalid prime power {}^{}",
                    pp.prime, pp.exponent
                )));
            }
        }
        if prime_powers.windows(2).any(|w| w[0].prime >= w[1].prime) {
            return Err(Error::domain("primes must be strictly increasing"));
        }
        Ok(Factorization { prime_powers })
    }

    pub fn from_pairs<I: IntoIterator<Item = (u64, u32)>>(pairs: I) -> Result<Self> {
        Self::new(
            pairs
                .into_iter()
                .map(|(p, e)| PrimePower {
                    prime: nat(p),
                    exponent: e,
                })
                .collect(),
        )
    }

    fn from_map(map: BTreeMap<Natural, u32>) -> Self {
        Factorization {
            prime_powers: map
                .into_iter()
                .map(|(prime, exponent)| PrimePower { prime, exponent })
                .collect(),
        }
    }

    pub fn prime_powers(&self) -> &[PrimePower] {
        &self.prime_powers
    }

    pub fn into_prime_powers(self) -> Vec<PrimePower> {
        self.prime_powers
    }

    pub fn primes(&self) -> impl Iterator<Item = &Natural> {
        self.prime_powers.iter().map(|pp| &pp.prime)
    }

    pub fn distinct_count(&self) -> usize {
        self.prime_powers.len()
    }

    pub fn product(&self) -> Natural {
        self.prime_powers
            .iter()
            .fold(Natural::one(), |acc, pp| {
                acc * num_traits::pow(pp.prime.clone(), pp.exponent as usize)
            })
    }
}

impl fmt::Display for Factorization {
    /// `2^5 3`, primes ascending, exponent 1 omitted.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, pp) in self.prime_powers.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            if pp.exponent == 1 {
                write!(f, "{}", pp.prime)?;
            } else {
                write!(f, "{}^{}", pp.prime, pp.exponent)?;
            }
        }
        Ok(())
    }
}

/// What was known when a factorization gave up.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct PartialFactorization {
    pub primes: Factorization,
    /// Composite pieces left unsplit, with multiplicity.
    pub unresolved: Vec<(Natural, u32)>,
}

#[derive(Clone, Debug, Default)]
pub struct FactorConfig {
    pub shor: ShorConfig,
    /// Trial-division bound; `None` means [`ntheory::default_trial_bound`].
    pub trial_bound: Option<Natural>,
    /// Order-finding budget for the run; `None` means `8 * bits(M)`.
    pub max_quantum_calls: Option<u64>,
}

impl FactorConfig {
    pub fn trial_bound_for(&self, m: &Natural) -> Natural {
        self.trial_bound
            .clone()
            .unwrap_or_else(|| ntheory::default_trial_bound(m))
    }
}

/// Number of splits a run should need: distinct primes above the trial
/// bound, minus one, clamped at zero.
pub fn distinct_shor_call_bound(factorization: &Factorization, trial_bound: &Natural) -> u64 {
    let large = factorization.primes().filter(|p| *p > trial_bound).count() as u64;
    large.saturating_sub(1)
}

/// Fully factors `m >= 2`.
///
/// Fails with [`Error::Inconclusive`] (carrying what was found) when a
/// factoring step runs out of bases or the order-finding budget is spent.
pub fn factor_completely<R: Rng + ?Sized>(
    m: &Natural,
    engine: EngineKind,
    rng: &mut R,
    config: &FactorConfig,
    ledger: &CostLedger,
) -> Result<Factorization> {
    if *m < nat(2) {
        return Err(Error::domain(format!("cannot factor {m}")));
    }
    let bound = config.trial_bound_for(m);
    let budget = config
        .max_quantum_calls
        .unwrap_or_else(|| 8 * m.bits());
    let calls_at_start = ledger.totals().order_finding_invocations;
    let rounds = config.shor.compositeness_rounds;

    let td = ntheory::trial_division(m, &bound, ledger)?;
    let mut primes: BTreeMap<Natural, u32> = BTreeMap::new();
    for (p, e) in td.small_factors {
        *primes.entry(p).or_insert(0) += e;
    }
    let mut pending: BTreeMap<Natural, u32> = BTreeMap::new();
    push(&mut pending, td.cofactor, 1);

    while let Some((x, mult)) = pending.pop_first() {
        if ntheory::compositeness_prefilter(&x, rounds, rng, ledger)?.is_probable_prime() {
            *primes.entry(x).or_insert(0) += mult;
            continue;
        }
        if x.is_even() {
            push(&mut pending, nat(2), mult);
            push(&mut pending, x >> 1u32, mult);
            continue;
        }
        if let Some(pp) = prime_power::factor_prime_power_classical(&x, rounds, rng, ledger)? {
            *primes.entry(pp.base).or_insert(0) += pp.exponent * mult;
            continue;
        }
        if let Some((b, e)) = ntheory::perfect_power_decompose(&x)? {
            push(&mut pending, b, e * mult);
            continue;
        }

        let used = ledger.totals().order_finding_invocations - calls_at_start;
        let remaining = budget.saturating_sub(used);
        if remaining == 0 {
            pending.insert(x, mult);
            return Err(inconclusive(
                "order-finding budget exhausted",
                primes,
                pending,
            ));
        }
        let step_cfg = ShorConfig {
            max_base_retries: config
                .shor
                .max_base_retries
                .min(u32::try_from(remaining).unwrap_or(u32::MAX)),
            ..config.shor.clone()
        };
        let Some(f) = order_finding::shor_factor_step(&x, engine, rng, &step_cfg, ledger)? else {
            pending.insert(x.clone(), mult);
            return Err(inconclusive(
                &format!("no factor of {x} found"),
                primes,
                pending,
            ));
        };
        ledger.add_factor_split();
        let (mut a, mut b) = (f.clone(), &x / &f);
        loop {
            let g = ntheory::gcd(&a, &b)?;
            if g.is_one() {
                break;
            }
            a /= &g;
            b /= &g;
            push(&mut pending, g, 2 * mult);
        }
        push(&mut pending, a, mult);
        push(&mut pending, b, mult);
    }
    Ok(Factorization::from_map(primes))
}

fn push(pending: &mut BTreeMap<Natural, u32>, value: Natural, mult: u32) {
    if !value.is_one() {
        *pending.entry(value).or_insert(0) += mult;
    }
}

fn inconclusive(
    reason: &str,
    primes: BTreeMap<Natural, u32>,
    pending: BTreeMap<Natural, u32>,
) -> Error {
    Error::Inconclusive {
        reason: reason.to_string(),
        partial: Box::new(PartialFactorization {
            primes: Factorization::from_map(primes),
            unresolved: pending.into_iter().collect(),
        }),
    }
}
