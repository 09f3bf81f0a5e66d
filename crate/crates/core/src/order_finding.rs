//! Order finding and the even-order factor extraction step.
//!
//! One "run of the machine" produces a first-register measurement `c`.
//! Three engines produce it:
//!
//! - [`EngineKind::StateVector`] simulates the full state vector
//!   (superposition, modular exponentiation, second-register measurement,
//!   QFT, first-register measurement).
//! - [`EngineKind::AnalyticSampling`] computes the order classically and
//!   draws `c` from the exact closed-form output distribution, which lets it
//!   handle registers far wider than a state vector could hold.
//! - [`EngineKind::ClassicalOracle`] skips measurement entirely and returns
//!   the brute-force order.
//!
//! Measured values are turned into candidate orders with continued
//! fractions; every candidate is checked with modular exponentiation and
//! reduced to the exact order before it is returned.

use std::collections::HashMap;

use num_integer::Integer;
use num_traits::{One, ToPrimitive, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::metrics::CostLedger;
use crate::ntheory::{self, nat, Natural};
use crate::qsim::{self, QuantumState, DEFAULT_WIDTH_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum EngineKind {
    StateVector,
    AnalyticSampling,
    ClassicalOracle,
}

/// Widest first register the analytic sampler supports (moduli below 2^32).
pub const ANALYTIC_WIDTH_CAP: u32 = 64;

/// Number of recent convergent denominators combined by lcm.
const LCM_WINDOW: usize = 8;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderResult {
    pub base: Natural,
    pub order: Natural,
    pub attempts_used: u32,
    pub sampled_cs: Vec<Natural>,
}

#[derive(Clone, Debug)]
pub struct ShorConfig {
    /// Fresh bases tried before a factoring step gives up.
    pub max_base_retries: u32,
    /// Machine runs per order-finding call; `None` means
    /// `4 * ceil(log2 L) + 8`.
    pub max_attempts: Option<u32>,
    pub width_cap: u32,
    /// Rounds for the probable-prime checks made along the way.
    pub compositeness_rounds: u32,
}

impl Default for ShorConfig {
    fn default() -> Self {
        ShorConfig {
            max_base_retries: 32,
            max_attempts: None,
            width_cap: DEFAULT_WIDTH_CAP,
            compositeness_rounds: 20,
        }
    }
}

impl ShorConfig {
    pub fn attempts_for(&self, modulus: &Natural) -> Result<u32> {
        match self.max_attempts {
            Some(a) => Ok(a.max(1)),
            None => Ok(default_max_attempts(qsim::register_width_for(modulus)?)),
        }
    }
}

/// `4 * ceil(log2 L) + 8`.
pub fn default_max_attempts(width: u32) -> u32 {
    let ceil_log = if width <= 1 {
        0
    } else {
        32 - (width - 1).leading_zeros()
    };
    4 * ceil_log + 8
}

/// Finds the multiplicative order of `base` modulo `modulus`.
///
/// Returns `Ok(None)` when `max_attempts` machine runs did not recover the
/// order. Every returned order has been checked to be exact.
pub fn find_order<R: Rng + ?Sized>(
    modulus: &Natural,
    base: &Natural,
    engine: EngineKind,
    rng: &mut R,
    max_attempts: u32,
    width_cap: u32,
    ledger: &CostLedger,
) -> Result<Option<OrderResult>> {
    if *base <= Natural::one() || base >= modulus {
        return Err(Error::domain(format!(
            "order finding needs 1 < m < M, got m={base}, M={modulus}"
        )));
    }
    let g = ntheory::gcd(base, modulus)?;
    if !g.is_one() {
        return Err(Error::domain(format!(
            "{base} and {modulus} share the factor {g}"
        )));
    }
    ledger.add_order_finding();

    let mut sampler = match engine {
        EngineKind::ClassicalOracle => {
            let order = ntheory::multiplicative_order_bruteforce(base, modulus)?;
            if !is_exact_order(base, &order, modulus, ledger)? {
                return Ok(None);
            }
            return Ok(Some(OrderResult {
                base: base.clone(),
                order,
                attempts_used: 1,
                sampled_cs: Vec::new(),
            }));
        }
        EngineKind::StateVector => MeasurementSampler::state_vector(modulus, base, width_cap)?,
        EngineKind::AnalyticSampling => MeasurementSampler::analytic(modulus, base)?,
    };

    let q = Natural::one() << sampler.width();
    let mut recent: Vec<Natural> = Vec::new();
    let mut sampled = Vec::new();
    for attempt in 1..=max_attempts.max(1) {
        let c = nat(sampler.sample(rng)?);
        sampled.push(c.clone());
        if let Some(order) = recover_order(base, modulus, &c, &q, &mut recent, ledger)? {
            return Ok(Some(OrderResult {
                base: base.clone(),
                order,
                attempts_used: attempt,
                sampled_cs: sampled,
            }));
        }
    }
    Ok(None)
}

/// Post-processes one measurement `c` of a `q = 2^L` register.
///
/// Candidates are the convergent denominators of `c/q` bounded by the
/// modulus, and their lcms with the denominators kept in `recent`. The first
/// candidate `d` with `m^d = 1` is reduced to the exact order.
pub fn recover_order(
    base: &Natural,
    modulus: &Natural,
    c: &Natural,
    q: &Natural,
    recent: &mut Vec<Natural>,
    ledger: &CostLedger,
) -> Result<Option<Natural>> {
    if c.is_zero() {
        return Ok(None);
    }
    let convergents = ntheory::continued_fraction_denominators(c, q, modulus)?;
    let mut candidates: Vec<Natural> = Vec::new();
    for cv in &convergents {
        let d = &cv.denominator;
        if d.is_one() {
            continue;
        }
        candidates.push(d.clone());
        for e in recent.iter() {
            let l = ntheory::lcm(d, e);
            if l < *modulus {
                candidates.push(l);
            }
        }
    }
    candidates.sort();
    candidates.dedup();
    for cand in &candidates {
        if ntheory::mod_pow(base, cand, modulus, ledger)?.is_one() {
            let order = reduce_to_exact_order(base, cand, modulus, ledger)?;
            return Ok(Some(order));
        }
    }
    for cv in convergents {
        if !cv.denominator.is_one() && !recent.contains(&cv.denominator) {
            recent.push(cv.denominator);
        }
    }
    if recent.len() > LCM_WINDOW {
        let excess = recent.len() - LCM_WINDOW;
        recent.drain(..excess);
    }
    Ok(None)
}

/// Given `m^multiple = 1`, divides out primes while the power stays 1.
fn reduce_to_exact_order(
    base: &Natural,
    multiple: &Natural,
    modulus: &Natural,
    ledger: &CostLedger,
) -> Result<Natural> {
    let mut order = multiple.clone();
    let primes = match multiple.to_u64() {
        Some(v) => ntheory::small_prime_factors(v),
        None => return Err(Error::domain("candidate order exceeds 64 bits")),
    };
    for p in primes {
        let p = nat(p);
        loop {
            let (q, r) = order.div_rem(&p);
            if !r.is_zero() || !ntheory::mod_pow(base, &q, modulus, ledger)?.is_one() {
                break;
            }
            order = q;
        }
    }
    Ok(order)
}

/// `m^order = 1` and `m^(order/p) != 1` for every prime `p | order`.
pub fn is_exact_order(
    base: &Natural,
    order: &Natural,
    modulus: &Natural,
    ledger: &CostLedger,
) -> Result<bool> {
    if order.is_zero() || !ntheory::mod_pow(base, order, modulus, ledger)?.is_one() {
        return Ok(false);
    }
    let Some(o) = order.to_u64() else {
        return Err(Error::domain("order exceeds 64 bits"));
    };
    for p in ntheory::small_prime_factors(o) {
        if ntheory::mod_pow(base, &nat(o / p), modulus, ledger)?.is_one() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Source of first-register measurements for a fixed `(M, m)`.
pub enum MeasurementSampler {
    StateVector(StateVectorSampler),
    Analytic { order: u64, width: u32 },
}

impl MeasurementSampler {
    pub fn state_vector(modulus: &Natural, base: &Natural, width_cap: u32) -> Result<Self> {
        Ok(MeasurementSampler::StateVector(StateVectorSampler::new(
            modulus, base, width_cap,
        )?))
    }

    pub fn analytic(modulus: &Natural, base: &Natural) -> Result<Self> {
        let width = qsim::register_width_for(modulus)?;
        if width > ANALYTIC_WIDTH_CAP {
            return Err(Error::Capacity {
                width,
                cap: ANALYTIC_WIDTH_CAP,
            });
        }
        let m = modulus.to_u64().expect("width cap bounds the modulus");
        let b = base
            .to_u64()
            .ok_or_else(|| Error::domain("base exceeds the modulus"))?;
        let order = order_u64(b % m, m)?;
        Ok(MeasurementSampler::Analytic { order, width })
    }

    pub fn width(&self) -> u32 {
        match self {
            MeasurementSampler::StateVector(s) => s.width,
            MeasurementSampler::Analytic { width, .. } => *width,
        }
    }

    /// One full run of the machine.
    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<u64> {
        match self {
            MeasurementSampler::StateVector(s) => s.sample(rng),
            MeasurementSampler::Analytic { order, width } => {
                Ok(sample_closed_form(*order, *width, rng))
            }
        }
    }
}

/// Runs the state-vector pipeline for a fixed `(M, m)`.
///
/// The entangled state is prepared once. The post-QFT state depends only on
/// the observed second-register value, so its output distribution is cached
/// per residue and later runs with the same residue reuse it.
pub struct StateVectorSampler {
    width: u32,
    entangled: QuantumState,
    residues: Vec<(u64, f64)>,
    residue_total: f64,
    cdf_by_residue: HashMap<u64, Vec<f64>>,
}

impl StateVectorSampler {
    pub fn new(modulus: &Natural, base: &Natural, width_cap: u32) -> Result<Self> {
        let width = qsim::register_width_for(modulus)?;
        let entangled = QuantumState::prepare_uniform_capped(width, width_cap)?
            .apply_modular_exponentiation(base, modulus)?;
        let residues: Vec<(u64, f64)> = entangled
            .second_register_distribution()?
            .into_iter()
            .collect();
        let residue_total = residues.iter().map(|(_, w)| w).sum();
        Ok(StateVectorSampler {
            width,
            entangled,
            residues,
            residue_total,
            cdf_by_residue: HashMap::new(),
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> Result<u64> {
        let target = rng.gen::<f64>() * self.residue_total;
        let mut acc = 0.0;
        let mut residue = self.residues.last().map(|r| r.0).unwrap_or(0);
        for &(b, w) in &self.residues {
            acc += w;
            if target < acc {
                residue = b;
                break;
            }
        }
        if !self.cdf_by_residue.contains_key(&residue) {
            let post = self
                .entangled
                .clone()
                .collapse_second_register(residue)?
                .collapsed_state
                .apply_qft()?;
            let mut acc = 0.0;
            let cdf = post
                .output_distribution()
                .into_iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect();
            self.cdf_by_residue.insert(residue, cdf);
        }
        let cdf = &self.cdf_by_residue[&residue];
        let total = *cdf.last().expect("nonempty register");
        let target = rng.gen::<f64>() * total;
        let idx = cdf.partition_point(|&x| x <= target).min(cdf.len() - 1);
        Ok(idx as u64)
    }
}

/// Order of `m` modulo `modulus` by successive multiplication on machine
/// words.
/// Order of a unit by baby-step giant-step, `O(sqrt(modulus))`.
fn order_u64(m: u64, modulus: u64) -> Result<u64> {
    if modulus < 2 || num_integer::gcd(m, modulus) != 1 {
        return Err(Error::domain(format!("{m} is not a unit modulo {modulus}")));
    }
    let mul = |a: u64, b: u64| (a as u128 * b as u128 % modulus as u128) as u64;
    let s = (modulus as f64).sqrt() as u64 + 1;
    let mut baby = HashMap::with_capacity(s as usize);
    let mut x = 1u64;
    for j in 0..s {
        if j > 0 && x == 1 {
            return Ok(j);
        }
        baby.insert(x, j);
        x = mul(x, m % modulus);
    }
    // the order is at least s, so the baby steps are distinct and the first
    // giant step m^(i s) that hits m^j gives the smallest r = i s - j
    let giant = x;
    let mut y = giant;
    for i in 1..=s {
        if let Some(&j) = baby.get(&y) {
            return Ok(i * s - j);
        }
        y = mul(y, giant);
    }
    Err(Error::domain(format!("no order found for {m} modulo {modulus}")))
}

/// Draws `c` from the exact output distribution of the period-finding
/// machine for a base of order `order` and a `width`-qubit first register.
///
/// The second-register outcome fixes an offset `a0` (drawn as `a mod r` for
/// uniform `a`) and the support size `t`. Writing `r = 2^s * odd` and
/// `D = 2^(L-s)`, the probability of `c` depends only on
/// `u = odd * c mod D` and equals `F_t(u) / (t D)` with the Fejer kernel
/// `F_t(u) = |sum_{j<t} e^{2 pi i j u / D}|^2`. `u` is drawn from `F_t` by
/// rejection sampling and `c` is the uniformly chosen preimage.
pub fn sample_closed_form<R: Rng + ?Sized>(order: u64, width: u32, rng: &mut R) -> u64 {
    assert!((1..=ANALYTIC_WIDTH_CAP).contains(&width) && order >= 1);
    let q: u128 = 1u128 << width;
    let r = order as u128;
    let a = rng.gen_range(0..q);
    let a0 = a % r;
    let t = (q - 1 - a0) / r + 1;
    let s = r.trailing_zeros().min(width);
    let odd = r >> s;
    let d_mod = q >> s;
    let u = sample_fejer(t, d_mod, rng);
    let inv = inverse_mod_pow2(odd, d_mod);
    let c0 = mul_mod_pow2(u, inv, d_mod);
    let lift = if s == 0 { 0 } else { rng.gen_range(0..(1u128 << s)) };
    (c0 + lift * d_mod) as u64
}

fn mul_mod_pow2(a: u128, b: u128, modulus: u128) -> u128 {
    // modulus is a power of two, so wrapping arithmetic is exact mod 2^128
    a.wrapping_mul(b) & (modulus - 1)
}

/// Inverse of odd `x` modulo a power of two by Newton iteration.
fn inverse_mod_pow2(x: u128, modulus: u128) -> u128 {
    let mut inv: u128 = 1;
    for _ in 0..7 {
        inv = inv.wrapping_mul(2u128.wrapping_sub(x.wrapping_mul(inv)));
    }
    inv & (modulus - 1)
}

/// `|sum_{j<t} e^{2 pi i j u / D}|^2`.
fn fejer(t: u128, u: u128, d: u128) -> f64 {
    if u == 0 {
        return (t as f64) * (t as f64);
    }
    let num_phase = mul_mod_pow2(t, u, d) as f64 / d as f64;
    let den_phase = u as f64 / d as f64;
    let num = (std::f64::consts::PI * num_phase).sin();
    let den = (std::f64::consts::PI * den_phase).sin();
    (num * num) / (den * den)
}

/// Exact draw of `u in [0, D)` with weight `F_t(u)`.
///
/// Folds `u` onto `d = min(u, D - u)` and proposes from a flat head on
/// `[0, a]` plus a discrete Pareto tail on `(a, D/2]`, where
/// `a = floor(D / 2t)`. `sin(pi x) >= 2x` on `[0, 1/2]` bounds the kernel
/// by `min(t^2, D^2 / 4 d^2)`, which the proposal dominates.
fn sample_fejer<R: Rng + ?Sized>(t: u128, d_mod: u128, rng: &mut R) -> u128 {
    if d_mod == 1 {
        return 0;
    }
    let half = d_mod / 2;
    let head_end = (d_mod / (2 * t)).min(half);
    let has_tail = head_end < half;
    let p_head = if has_tail { 1.0 / 3.0 } else { 1.0 };
    let p_tail = 1.0 - p_head;
    let head_len = (head_end + 1) as f64;
    let tf = t as f64;
    let df = d_mod as f64;
    let mut bound = 2.0 * tf * tf * head_len / p_head;
    if has_tail {
        bound = bound.max(df * df / (p_tail * head_len));
    }
    loop {
        let (d, proposal) = if rng.gen::<f64>() < p_head {
            (rng.gen_range(0..=head_end), p_head / head_len)
        } else {
            // x = (a+1) / U has P(floor(x) = d) = (a+1) / (d (d+1))
            let u: f64 = 1.0 - rng.gen::<f64>();
            let x = head_len / u;
            if !x.is_finite() || x >= half as f64 + 1.0 {
                continue;
            }
            let d = (x as u128).max(head_end + 1);
            if d > half {
                continue;
            }
            let dd = d as f64;
            (d, p_tail * head_len / (dd * (dd + 1.0)))
        };
        let mult = if d == 0 || 2 * d == d_mod { 1.0 } else { 2.0 };
        let weight = mult * fejer(t, d, d_mod);
        if rng.gen::<f64>() * bound * proposal < weight {
            return if mult == 2.0 && rng.gen::<bool>() {
                d_mod - d
            } else {
                d
            };
        }
    }
}

/// Result of one base `m` pushed through the factor extraction step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum PassOutcome {
    /// `gcd(m, M)` was already a nontrivial factor.
    LuckyGcd(Natural),
    /// Even order `r` with `gcd(m^{r/2} - 1, M)` nontrivial.
    Split { factor: Natural, order: Natural },
    OddOrder { order: Natural },
    /// `m^{r/2} = -1 (mod M)`.
    MinusOne { order: Natural },
    OrderNotFound,
}

impl PassOutcome {
    pub fn factor(&self) -> Option<&Natural> {
        match self {
            PassOutcome::LuckyGcd(f) | PassOutcome::Split { factor: f, .. } => Some(f),
            _ => None,
        }
    }
}

/// Runs one base `m` through gcd check, order finding and the even-order
/// split.
pub fn shor_single_pass<R: Rng + ?Sized>(
    modulus: &Natural,
    base: &Natural,
    engine: EngineKind,
    rng: &mut R,
    config: &ShorConfig,
    ledger: &CostLedger,
) -> Result<PassOutcome> {
    let g = ntheory::gcd(base, modulus)?;
    if !g.is_one() {
        if g < *modulus {
            return Ok(PassOutcome::LuckyGcd(g));
        }
        return Err(Error::domain(format!("base {base} is a multiple of {modulus}")));
    }
    let attempts = config.attempts_for(modulus)?;
    let Some(found) = find_order(modulus, base, engine, rng, attempts, config.width_cap, ledger)?
    else {
        return Ok(PassOutcome::OrderNotFound);
    };
    let order = found.order;
    if order.is_odd() {
        return Ok(PassOutcome::OddOrder { order });
    }
    let half = &order >> 1u32;
    let x = ntheory::mod_pow(base, &half, modulus, ledger)?;
    if x == modulus - 1u32 {
        return Ok(PassOutcome::MinusOne { order });
    }
    let f = ntheory::gcd(&(x - 1u32), modulus)?;
    if f > Natural::one() && f < *modulus {
        Ok(PassOutcome::Split { factor: f, order })
    } else {
        // unreachable for an exact order, kept as a guard
        Ok(PassOutcome::MinusOne { order })
    }
}

/// Finds a nontrivial factor of an odd composite `M >= 9` that is not a
/// perfect power, trying up to `config.max_base_retries` random bases.
///
/// A prime `M` never splits and simply exhausts the retries.
pub fn shor_factor_step<R: Rng + ?Sized>(
    modulus: &Natural,
    engine: EngineKind,
    rng: &mut R,
    config: &ShorConfig,
    ledger: &CostLedger,
) -> Result<Option<Natural>> {
    if modulus.is_even() || *modulus < nat(9) {
        return Err(Error::domain(format!(
            "factoring step needs an odd M >= 9, got {modulus}"
        )));
    }
    if ntheory::perfect_power_decompose(modulus)?.is_some() {
        return Err(Error::domain(format!(
            "{modulus} is a perfect power; route it to the prime-power splitter"
        )));
    }
    use num_bigint::RandBigInt;
    for _ in 0..config.max_base_retries.max(1) {
        let m = rng.gen_biguint_range(&nat(2), modulus);
        let outcome = shor_single_pass(modulus, &m, engine, rng, config, ledger)?;
        if let Some(f) = outcome.factor() {
            return Ok(Some(f.clone()));
        }
    }
    Ok(None)
}
