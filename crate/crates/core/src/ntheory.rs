//! Exact integer arithmetic shared by the rest of the pipeline.

use num_bigint::{BigUint, RandBigInt};
use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::CostLedger;

/// Arbitrary-precision non-negative integer.
pub type Natural = BigUint;

pub fn nat(v: u64) -> Natural {
    Natural::from(v)
}

/// `base^exponent mod modulus` by left-to-right square-and-multiply.
///
/// Uses at most `2 * bits(exponent)` modular multiplications, all of which
/// are charged to `ledger`.
pub fn mod_pow(
    base: &Natural,
    exponent: &Natural,
    modulus: &Natural,
    ledger: &CostLedger,
) -> Result<Natural> {
    if *modulus < nat(2) {
        return Err(Error::domain(format!("modulus {modulus} is below 2")));
    }
    if exponent.is_zero() {
        return Ok(Natural::one());
    }
    let base = base % modulus;
    let bits = exponent.bits();
    let mut acc = base.clone();
    let mut mults = 0u64;
    for i in (0..bits - 1).rev() {
        acc = &acc * &acc % modulus;
        mults += 1;
        if exponent.bit(i) {
            acc = &acc * &base % modulus;
            mults += 1;
        }
    }
    ledger.add_multiplications(mults);
    Ok(acc)
}

pub fn gcd(a: &Natural, b: &Natural) -> Result<Natural> {
    if a.is_zero() && b.is_zero() {
        return Err(Error::domain("gcd(0, 0) is undefined"));
    }
    let (mut x, mut y) = (a.clone(), b.clone());
    while !y.is_zero() {
        let r = &x % &y;
        x = y;
        y = r;
    }
    Ok(x)
}

/// Verdict of the strong-pseudoprime pre-filter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Primality {
    ProbablePrime,
    /// `witness` is a base to which `n` fails the strong pseudoprime test,
    /// see [`is_strong_witness`].
    Composite { witness: Natural },
}

impl Primality {
    pub fn is_probable_prime(&self) -> bool {
        matches!(self, Primality::ProbablePrime)
    }
}

/// True when `n` fails the strong pseudoprime test to base `a`, which
/// proves `n` composite. Requires `n >= 3` and `1 < a < n`.
pub fn is_strong_witness(a: &Natural, n: &Natural, ledger: &CostLedger) -> Result<bool> {
    if *n < nat(3) || *a <= Natural::one() || a >= n {
        return Err(Error::domain(format!(
            "strong witness check needs n >= 3 and 1 < a < n, got a={a}, n={n}"
        )));
    }
    let one = Natural::one();
    let n_minus_1 = n - &one;
    let s = n_minus_1.trailing_zeros().unwrap_or(0);
    let d = &n_minus_1 >> s;
    let mut x = mod_pow(a, &d, n, ledger)?;
    if x == one || x == n_minus_1 {
        return Ok(false);
    }
    for _ in 1..s {
        x = &x * &x % n;
        ledger.add_multiplications(1);
        if x == n_minus_1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Miller-Rabin style compositeness test with `rounds` random bases.
///
/// `Composite` is always correct and carries a checkable witness;
/// `ProbablePrime` is wrong with probability at most `4^-rounds`.
pub fn compositeness_prefilter<R: Rng + ?Sized>(
    n: &Natural,
    rounds: u32,
    rng: &mut R,
    ledger: &CostLedger,
) -> Result<Primality> {
    if *n < nat(2) {
        return Err(Error::domain(format!("primality of {n} is undefined")));
    }
    if *n <= nat(3) {
        return Ok(Primality::ProbablePrime);
    }
    let two = nat(2);
    if n.is_even() {
        // 2^d with d odd is even, so it can be neither 1 nor n-1 (mod n)
        return Ok(Primality::Composite { witness: two });
    }
    let upper = n - Natural::one(); // bases drawn from [2, n-2]
    for _ in 0..rounds.max(1) {
        let a = rng.gen_biguint_range(&two, &upper);
        if is_strong_witness(&a, n, ledger)? {
            return Ok(Primality::Composite { witness: a });
        }
    }
    Ok(Primality::ProbablePrime)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrialDivisionOutcome {
    /// `(prime, exponent)` pairs in increasing prime order, all `<= bound`.
    pub small_factors: Vec<(Natural, u32)>,
    /// Remaining part with no prime factor `<= bound`.
    pub cofactor: Natural,
}

/// Strips every prime factor `<= bound_k` from `m`.
///
/// Candidates are 2 followed by the odd numbers; composite candidates never
/// divide because their prime factors are already gone.
pub fn trial_division(
    m: &Natural,
    bound_k: &Natural,
    ledger: &CostLedger,
) -> Result<TrialDivisionOutcome> {
    if *m < nat(2) {
        return Err(Error::domain(format!("trial division of {m} is undefined")));
    }
    let mut cofactor = m.clone();
    let mut small_factors = Vec::new();
    let mut divisions = 0u64;
    let bound = bound_k.to_u64().unwrap_or(u64::MAX);

    let mut d = 2u64;
    while d <= bound {
        let dn = nat(d);
        if &dn * &dn > cofactor {
            break;
        }
        let mut e = 0u32;
        loop {
            divisions += 1;
            let (q, r) = cofactor.div_rem(&dn);
            if !r.is_zero() {
                break;
            }
            cofactor = q;
            e += 1;
        }
        if e > 0 {
            small_factors.push((dn, e));
        }
        d = if d == 2 { 3 } else { d + 2 };
    }
    // Loop stopped at d^2 > cofactor: what is left is 1 or a prime.
    if cofactor > Natural::one() && cofactor <= *bound_k {
        small_factors.push((std::mem::replace(&mut cofactor, Natural::one()), 1));
    }
    ledger.add_trial_divisions(divisions);
    Ok(TrialDivisionOutcome {
        small_factors,
        cofactor,
    })
}

/// `log2(n)` in floating point, accurate for arbitrarily large `n`.
pub fn log2(n: &Natural) -> f64 {
    let bits = n.bits();
    if bits <= 64 {
        n.to_u64().map(|v| (v as f64).log2()).unwrap_or(f64::NEG_INFINITY)
    } else {
        let shift = bits - 64;
        let top = (n >> shift).to_u64().unwrap_or(u64::MAX);
        shift as f64 + (top as f64).log2()
    }
}

/// Trial-division bound `max(2, floor(log2(n)^2 / log2(log2(n))))`.
///
/// Inputs below 16 get the degenerate bound 2.
pub fn default_trial_bound(n: &Natural) -> Natural {
    if *n < nat(16) {
        return nat(2);
    }
    let l = log2(n);
    let k = (l * l / l.log2()).floor();
    nat((k as u64).max(2))
}

/// Returns `(b, e)` with `b^e = m` and `e >= 2` maximal, if `m` is a
/// perfect power.
pub fn perfect_power_decompose(m: &Natural) -> Result<Option<(Natural, u32)>> {
    if *m < nat(2) {
        return Err(Error::domain(format!("perfect power test of {m} is undefined")));
    }
    let max_k = (m.bits() - 1) as u32; // floor(log2 m)
    for k in (2..=max_k).rev() {
        let root = m.nth_root(k);
        if root > Natural::one() && num_traits::pow(root.clone(), k as usize) == *m {
            return Ok(Some((root, k)));
        }
    }
    Ok(None)
}

/// A continued-fraction convergent `numerator / denominator` in lowest terms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Convergent {
    pub numerator: Natural,
    pub denominator: Natural,
}

/// Convergents of `c / q`, stopping before the first denominator above
/// `max_denominator`. A zero measurement carries no information and yields
/// no convergents.
pub fn continued_fraction_denominators(
    c: &Natural,
    q: &Natural,
    max_denominator: &Natural,
) -> Result<Vec<Convergent>> {
    if *q < nat(2) || c >= q {
        return Err(Error::domain(format!(
            "continued fraction of {c}/{q} needs q >= 2 and c < q"
        )));
    }
    if c.is_zero() {
        return Ok(Vec::new());
    }
    let mut out = Vec::new();
    // h_{-1}/k_{-1} = 1/0, h_{-2}/k_{-2} = 0/1
    let (mut h_prev, mut h_prev2) = (Natural::one(), Natural::zero());
    let (mut k_prev, mut k_prev2) = (Natural::zero(), Natural::one());
    let (mut num, mut den) = (c.clone(), q.clone());
    while !den.is_zero() {
        let (a, r) = num.div_rem(&den);
        let h = &a * &h_prev + &h_prev2;
        let k = &a * &k_prev + &k_prev2;
        if k > *max_denominator {
            break;
        }
        out.push(Convergent {
            numerator: h.clone(),
            denominator: k.clone(),
        });
        h_prev2 = std::mem::replace(&mut h_prev, h);
        k_prev2 = std::mem::replace(&mut k_prev, k);
        num = den;
        den = r;
    }
    Ok(out)
}

/// Multiplicative order of `m` modulo `modulus` by successive
/// multiplication. Linear in the order; meant for small moduli and as a test
/// reference.
pub fn multiplicative_order_bruteforce(m: &Natural, modulus: &Natural) -> Result<Natural> {
    if *modulus < nat(2) {
        return Err(Error::domain(format!("modulus {modulus} is below 2")));
    }
    let g = gcd(m, modulus)?;
    if !g.is_one() {
        return Err(Error::domain(format!(
            "{m} is not a unit modulo {modulus} (gcd {g})"
        )));
    }
    let base = m % modulus;
    let mut x = base.clone();
    let mut r = Natural::one();
    while !x.is_one() {
        x = &x * &base % modulus;
        r += 1u32;
    }
    Ok(r)
}

/// Least common multiple, `lcm(0, x) = 0`.
pub fn lcm(a: &Natural, b: &Natural) -> Natural {
    if a.is_zero() || b.is_zero() {
        return Natural::zero();
    }
    a / gcd(a, b).expect("nonzero") * b
}

/// Distinct prime factors of a machine-sized integer by trial division.
pub(crate) fn small_prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n % d == 0 {
            out.push(d);
            while n % d == 0 {
                n /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}
