//! Recursive Pocklington-Lehmer primality certificates.
//!
//! A certificate for `N` carries the complete factorization of `N - 1`, a
//! witness (or one witness per prime factor) and a child certificate for
//! every prime factor. Two node kinds exist besides the small-prime base
//! case:
//!
//! - `Theorem1`: one `a` with `a^(N-1) = 1` and `a^((N-1)/p) != 1 (mod N)`
//!   for every prime `p | N - 1`.
//! - `Theorem2`: for each prime `p | N - 1` its own `a_p` with
//!   `a_p^(N-1) = 1` and `a_p^((N-1)/p) != 1 (mod N)`.
//!
//! Either set of congruences, with every `p` itself proven prime, forces
//! `N - 1 | phi(N)` and hence `N` prime. [`verify_certificate`] re-checks all
//! of it deterministically without touching any order-finding engine.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::RandBigInt;
use num_traits::{One, ToPrimitive};
use rand::Rng;

use crate::error::{Error, Result};
use crate::factorizer::{self, FactorConfig, PrimePower};
use crate::metrics::{self, CostLedger, CostReport, Phase};
use crate::ntheory::{self, nat, Natural, Primality};
use crate::order_finding::{EngineKind, ShorConfig};
use crate::SeededRng;

/// Primes below 100; certificates bottom out here.
pub const SMALL_PRIMES: [u32; 25] = [
    2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47, 53, 59, 61, 67, 71, 73, 79, 83, 89, 97,
];

/// Upper end (exclusive) of the small-prime table.
pub const SMALL_PRIME_LIMIT: u32 = 100;

const fn table_matches_sieve() -> bool {
    let mut sieve = [true; SMALL_PRIME_LIMIT as usize];
    sieve[0] = false;
    sieve[1] = false;
    let mut i = 2;
    while i < SMALL_PRIME_LIMIT as usize {
        if sieve[i] {
            let mut j = i * i;
            while j < SMALL_PRIME_LIMIT as usize {
                sieve[j] = false;
                j += i;
            }
        }
        i += 1;
    }
    let mut k = 0;
    let mut v = 0;
    while v < SMALL_PRIME_LIMIT as usize {
        if sieve[v] {
            if k >= SMALL_PRIMES.len() || SMALL_PRIMES[k] as usize != v {
                return false;
            }
            k += 1;
        }
        v += 1;
    }
    k == SMALL_PRIMES.len()
}

const _: () = assert!(table_matches_sieve(), "small-prime table disagrees with the sieve");

pub fn is_small_prime(n: &Natural) -> bool {
    n.to_u32()
        .is_some_and(|v| SMALL_PRIMES.binary_search(&v).is_ok())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CertificateKind {
    SmallPrime,
    Theorem1,
    Theorem2,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Witnesses {
    None,
    /// One base for every prime of `N - 1`.
    Single(Natural),
    /// A base per prime of `N - 1`.
    PerPrime(BTreeMap<Natural, Natural>),
}

/// One node of a primality proof tree.
///
/// Fields are stored as given, not validated on construction, so malformed
/// trees (e.g. parsed from a file) can be represented and rejected by
/// [`verify_certificate`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Certificate {
    pub target: Natural,
    pub kind: CertificateKind,
    /// Factorization of `target - 1`; empty for small primes.
    pub factorization: Vec<PrimePower>,
    pub witnesses: Witnesses,
    /// One child per distinct prime of the factorization, same order.
    pub children: Vec<Certificate>,
}

impl Certificate {
    pub fn small_prime(target: Natural) -> Self {
        Certificate {
            target,
            kind: CertificateKind::SmallPrime,
            factorization: Vec::new(),
            witnesses: Witnesses::None,
            children: Vec::new(),
        }
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
    }

    pub fn node_count(&self) -> usize {
        1 + self.children.iter().map(|c| c.node_count()).sum::<usize>()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessMode {
    Theorem1,
    Theorem2,
}

#[derive(Clone, Debug)]
pub struct CertifyConfig {
    /// Witness draws per node; `None` means `64 * (1 + ceil(log2 log2 N))`.
    pub max_witness_trials: Option<u64>,
    pub compositeness_rounds: u32,
    pub engine: EngineKind,
    pub trial_bound_override: Option<Natural>,
    pub seed: u64,
    pub mode: WitnessMode,
    pub max_base_retries: u32,
    pub width_cap: u32,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        let shor = ShorConfig::default();
        CertifyConfig {
            max_witness_trials: None,
            compositeness_rounds: 20,
            engine: EngineKind::ClassicalOracle,
            trial_bound_override: None,
            seed: 0,
            mode: WitnessMode::Theorem2,
            max_base_retries: shor.max_base_retries,
            width_cap: shor.width_cap,
        }
    }
}

impl CertifyConfig {
    fn factor_config(&self) -> FactorConfig {
        FactorConfig {
            shor: ShorConfig {
                max_base_retries: self.max_base_retries.max(1),
                max_attempts: None,
                width_cap: self.width_cap,
                compositeness_rounds: self.compositeness_rounds.max(1),
            },
            trial_bound: self.trial_bound_override.clone(),
            max_quantum_calls: None,
        }
    }
}

/// `64 * (1 + ceil(log2 log2 N))`.
pub fn default_witness_trials(n: &Natural) -> u64 {
    let ll = ntheory::log2(n).log2();
    let extra = if ll.is_finite() && ll > 0.0 {
        ll.ceil() as u64
    } else {
        0
    };
    64 * (1 + extra)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CertifyOutcome {
    Prime(Certificate),
    /// `witness` is a base to which `N` is provably composite: either a
    /// strong-pseudoprime witness or a Fermat witness (`a^(N-1) != 1`).
    Composite { witness: Natural },
    Inconclusive { reason: String },
}

#[derive(Clone, Debug)]
pub struct CertifyRun {
    pub outcome: CertifyOutcome,
    pub report: CostReport,
}

/// Outcome of a randomized witness search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum WitnessSearch<T> {
    Found(T),
    /// A draw with `a^(N-1) != 1 (mod N)`: `N` is composite.
    Composite(Natural),
    Exhausted,
}

fn n_minus_1_cofactors(n: &Natural, primes: &[Natural]) -> (Natural, Vec<Natural>) {
    let nm1 = n - 1u32;
    let exps = primes.iter().map(|p| &nm1 / p).collect();
    (nm1, exps)
}

fn draw_base<R: Rng + ?Sized>(n: &Natural, rng: &mut R) -> Natural {
    // uniform on [2, N-1]
    rng.gen_biguint_range(&nat(2), n)
}

/// Searches for a single base satisfying every Theorem 1 congruence.
///
/// Requires `N >= 3` and `primes` to be the distinct primes of `N - 1`.
pub fn find_witness_theorem1<R: Rng + ?Sized>(
    n: &Natural,
    primes: &[Natural],
    rng: &mut R,
    max_trials: u64,
    ledger: &CostLedger,
) -> Result<WitnessSearch<Natural>> {
    if *n < nat(3) {
        return Err(Error::domain(format!("witness search needs N >= 3, got {n}")));
    }
    let (nm1, exps) = n_minus_1_cofactors(n, primes);
    for _ in 0..max_trials {
        ledger.add_witness_trial();
        let a = draw_base(n, rng);
        if !ntheory::mod_pow(&a, &nm1, n, ledger)?.is_one() {
            return Ok(WitnessSearch::Composite(a));
        }
        let mut ok = true;
        for e in &exps {
            if ntheory::mod_pow(&a, e, n, ledger)?.is_one() {
                ok = false;
                break;
            }
        }
        if ok {
            return Ok(WitnessSearch::Found(a));
        }
    }
    Ok(WitnessSearch::Exhausted)
}

/// Draws bases until every prime `p` of `N - 1` has some `a_p` with
/// `a_p^((N-1)/p) != 1`; each draw can cover several primes at once.
pub fn find_witnesses_theorem2<R: Rng + ?Sized>(
    n: &Natural,
    primes: &[Natural],
    rng: &mut R,
    max_trials: u64,
    ledger: &CostLedger,
) -> Result<WitnessSearch<BTreeMap<Natural, Natural>>> {
    if *n < nat(3) {
        return Err(Error::domain(format!("witness search needs N >= 3, got {n}")));
    }
    let (nm1, exps) = n_minus_1_cofactors(n, primes);
    let mut found: BTreeMap<Natural, Natural> = BTreeMap::new();
    for _ in 0..max_trials {
        if found.len() == primes.len() {
            break;
        }
        ledger.add_witness_trial();
        let a = draw_base(n, rng);
        if !ntheory::mod_pow(&a, &nm1, n, ledger)?.is_one() {
            return Ok(WitnessSearch::Composite(a));
        }
        for (p, e) in primes.iter().zip(&exps) {
            if found.contains_key(p) {
                continue;
            }
            if !ntheory::mod_pow(&a, e, n, ledger)?.is_one() {
                found.insert(p.clone(), a.clone());
            }
        }
    }
    if found.len() == primes.len() {
        Ok(WitnessSearch::Found(found))
    } else {
        Ok(WitnessSearch::Exhausted)
    }
}

enum NodeOutcome {
    Prime(Certificate),
    Composite(Natural),
    Inconclusive(String),
}

struct Context<'a> {
    config: &'a CertifyConfig,
    factor_config: FactorConfig,
    rng: SeededRng,
    ledger: &'a CostLedger,
}

/// Certifies `n >= 2` (or shows it composite) and reports the cost split.
///
/// The root's factorization of `N - 1`, including the full certification
/// of every child prime, is charged to the factorization phase; the root's
/// compositeness check and witness search to the verification phase.
pub fn certify(n: &Natural, config: &CertifyConfig) -> Result<CertifyRun> {
    let ledger = CostLedger::new();
    let outcome = certify_with_ledger(n, config, &ledger)?;
    Ok(CertifyRun {
        outcome,
        report: metrics::report(&ledger, n),
    })
}

pub fn certify_with_ledger(
    n: &Natural,
    config: &CertifyConfig,
    ledger: &CostLedger,
) -> Result<CertifyOutcome> {
    if *n < nat(2) {
        return Err(Error::domain(format!("primality of {n} is undefined")));
    }
    let mut ctx = Context {
        config,
        factor_config: config.factor_config(),
        rng: crate::seeded_rng(config.seed),
        ledger,
    };
    Ok(match certify_node(n, &mut ctx, true)? {
        NodeOutcome::Prime(c) => CertifyOutcome::Prime(c),
        NodeOutcome::Composite(w) => CertifyOutcome::Composite { witness: w },
        NodeOutcome::Inconclusive(reason) => CertifyOutcome::Inconclusive { reason },
    })
}

fn certify_node(n: &Natural, ctx: &mut Context<'_>, root: bool) -> Result<NodeOutcome> {
    // the table ends the recursion; a root of 3 or more still gets a full proof
    if is_small_prime(n) && (!root || *n < nat(3)) {
        return Ok(NodeOutcome::Prime(Certificate::small_prime(n.clone())));
    }
    let ledger = ctx.ledger;
    let scope = |phase| -> Result<Option<metrics::PhaseScope<'_>>> {
        if root {
            ledger.attribute(phase).map(Some)
        } else {
            Ok(None)
        }
    };

    {
        let _v = scope(Phase::Verification)?;
        let rounds = ctx.config.compositeness_rounds.max(1);
        if let Primality::Composite { witness } =
            ntheory::compositeness_prefilter(n, rounds, &mut ctx.rng, ledger)?
        {
            return Ok(NodeOutcome::Composite(witness));
        }
    }

    let nm1 = n - 1u32;
    let (factorization, children) = {
        let _f = scope(Phase::Factorization)?;
        let factorization = match factorizer::factor_completely(
            &nm1,
            ctx.config.engine,
            &mut ctx.rng,
            &ctx.factor_config,
            ledger,
        ) {
            Ok(f) => f,
            Err(Error::Inconclusive { reason, .. }) => {
                return Ok(NodeOutcome::Inconclusive(format!(
                    "factoring {nm1}: {reason}"
                )))
            }
            Err(Error::Capacity { width, cap }) => {
                return Ok(NodeOutcome::Inconclusive(format!(
                    "factoring {nm1}: register width {width} exceeds cap {cap}"
                )))
            }
            Err(e) => return Err(e),
        };
        let mut children = Vec::with_capacity(factorization.distinct_count());
        for p in factorization.primes() {
            match certify_node(p, ctx, false)? {
                NodeOutcome::Prime(c) => children.push(c),
                NodeOutcome::Composite(_) => {
                    return Ok(NodeOutcome::Inconclusive(format!(
                        "factor {p} of {nm1} turned out composite"
                    )))
                }
                NodeOutcome::Inconclusive(r) => return Ok(NodeOutcome::Inconclusive(r)),
            }
        }
        (factorization, children)
    };

    let _v = scope(Phase::Verification)?;
    let primes: Vec<Natural> = factorization.primes().cloned().collect();
    let trials = ctx
        .config
        .max_witness_trials
        .unwrap_or_else(|| default_witness_trials(n))
        .max(1);
    let (kind, witnesses) = match ctx.config.mode {
        WitnessMode::Theorem1 => {
            match find_witness_theorem1(n, &primes, &mut ctx.rng, trials, ledger)? {
                WitnessSearch::Found(a) => (CertificateKind::Theorem1, Witnesses::Single(a)),
                WitnessSearch::Composite(a) => return Ok(composite_or_inconclusive(a, root, n)),
                WitnessSearch::Exhausted => {
                    return Ok(NodeOutcome::Inconclusive(format!(
                        "no witness for {n} in {trials} draws"
                    )))
                }
            }
        }
        WitnessMode::Theorem2 => {
            match find_witnesses_theorem2(n, &primes, &mut ctx.rng, trials, ledger)? {
                WitnessSearch::Found(m) => (CertificateKind::Theorem2, Witnesses::PerPrime(m)),
                WitnessSearch::Composite(a) => return Ok(composite_or_inconclusive(a, root, n)),
                WitnessSearch::Exhausted => {
                    return Ok(NodeOutcome::Inconclusive(format!(
                        "witnesses for {n} incomplete after {trials} draws"
                    )))
                }
            }
        }
    };
    Ok(NodeOutcome::Prime(Certificate {
        target: n.clone(),
        kind,
        factorization: factorization.into_prime_powers(),
        witnesses,
        children,
    }))
}

fn composite_or_inconclusive(witness: Natural, root: bool, n: &Natural) -> NodeOutcome {
    if root {
        NodeOutcome::Composite(witness)
    } else {
        NodeOutcome::Inconclusive(format!("probable prime {n} has Fermat witness {witness}"))
    }
}

/// Verifier output. `path` locates the offending node, e.g. `$.children[1]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Valid,
    Invalid { path: String, reason: String },
}

impl Verdict {
    pub fn is_valid(&self) -> bool {
        matches!(self, Verdict::Valid)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Valid => f.write_str("valid"),
            Verdict::Invalid { path, reason } => write!(f, "invalid at {path}: {reason}"),
        }
    }
}

/// Nesting deeper than this is rejected outright; honest trees for `N`
/// have depth at most `bits(N)`.
pub const MAX_VERIFY_DEPTH: usize = 1024;

/// Deterministically re-checks a certificate tree.
pub fn verify_certificate(cert: &Certificate) -> Verdict {
    let ledger = CostLedger::new();
    match verify_node(cert, "$", 0, &ledger) {
        Ok(()) => Verdict::Valid,
        Err((path, reason)) => Verdict::Invalid { path, reason },
    }
}

type VerifyResult = std::result::Result<(), (String, String)>;

fn verify_node(cert: &Certificate, path: &str, depth: usize, ledger: &CostLedger) -> VerifyResult {
    let fail = |reason: String| Err((path.to_string(), reason));
    if depth > MAX_VERIFY_DEPTH {
        return fail(format!("nesting deeper than {MAX_VERIFY_DEPTH}"));
    }
    let n = &cert.target;
    match cert.kind {
        CertificateKind::SmallPrime => {
            if !is_small_prime(n) {
                return fail(format!("{n} is not in the small-prime table"));
            }
            if !cert.factorization.is_empty()
                || cert.witnesses != Witnesses::None
                || !cert.children.is_empty()
            {
                return fail("small-prime node carries proof data".into());
            }
            return Ok(());
        }
        CertificateKind::Theorem1 | CertificateKind::Theorem2 => {}
    }
    if *n < nat(3) {
        return fail(format!("target {n} is too small for an N-1 proof"));
    }
    let nm1 = n - 1u32;

    // structure of the factorization, with a size guard before multiplying
    let fac = &cert.factorization;
    if fac.is_empty() {
        return fail("empty factorization".into());
    }
    let mut lower_bits: u64 = 0;
    for (i, pp) in fac.iter().enumerate() {
        if pp.prime < nat(2) || pp.exponent == 0 {
            return fail(format!("invalid factor {}^{}", pp.prime, pp.exponent));
        }
        if i > 0 && fac[i - 1].prime >= pp.prime {
            return fail("factor primes are not strictly increasing".into());
        }
        lower_bits = lower_bits.saturating_add((pp.prime.bits() - 1).saturating_mul(pp.exponent as u64));
        if lower_bits > nm1.bits() {
            return fail(format!("factorization exceeds {nm1}"));
        }
    }
    let product = fac.iter().fold(Natural::one(), |acc, pp| {
        acc * num_traits::pow(pp.prime.clone(), pp.exponent as usize)
    });
    if product != nm1 {
        return fail(format!("factors multiply to {product}, not {nm1}"));
    }

    if cert.children.len() != fac.len() {
        return fail(format!(
            "{} children for {} distinct primes",
            cert.children.len(),
            fac.len()
        ));
    }
    for (i, (child, pp)) in cert.children.iter().zip(fac).enumerate() {
        if child.target != pp.prime {
            return Err((
                format!("{path}.children[{i}]"),
                format!("child proves {} but factor is {}", child.target, pp.prime),
            ));
        }
    }

    let check_base = |a: &Natural| -> std::result::Result<(), String> {
        if *a < nat(2) || *a >= *n {
            return Err(format!("witness {a} outside [2, {nm1}]"));
        }
        let full = ntheory::mod_pow(a, &nm1, n, ledger).map_err(|e| e.to_string())?;
        if !full.is_one() {
            return Err(format!("{a}^{nm1} = {full} (mod {n}), not 1"));
        }
        Ok(())
    };
    let check_partial = |a: &Natural, p: &Natural| -> std::result::Result<(), String> {
        let e = &nm1 / p;
        let v = ntheory::mod_pow(a, &e, n, ledger).map_err(|e| e.to_string())?;
        if v.is_one() {
            return Err(format!("{a}^({nm1}/{p}) = 1 (mod {n})"));
        }
        Ok(())
    };

    match (&cert.kind, &cert.witnesses) {
        (CertificateKind::Theorem1, Witnesses::Single(a)) => {
            if let Err(r) = check_base(a) {
                return fail(r);
            }
            for pp in fac {
                if let Err(r) = check_partial(a, &pp.prime) {
                    return fail(r);
                }
            }
        }
        (CertificateKind::Theorem2, Witnesses::PerPrime(map)) => {
            if map.len() != fac.len() || !fac.iter().all(|pp| map.contains_key(&pp.prime)) {
                return fail("witness map does not match the primes of N-1".into());
            }
            for pp in fac {
                let a = &map[&pp.prime];
                if let Err(r) = check_base(a).and_then(|_| check_partial(a, &pp.prime)) {
                    return fail(r);
                }
            }
        }
        (kind, _) => return fail(format!("witness shape does not match {kind:?}")),
    }

    for (i, child) in cert.children.iter().enumerate() {
        verify_node(child, &format!("{path}.children[{i}]"), depth + 1, ledger)?;
    }
    Ok(())
}
