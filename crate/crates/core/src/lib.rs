//! Primality certificates for `N` built from the Pocklington-Lehmer `N-1`
//! criterion, where the complete factorization of `N-1` comes from a
//! simulated Shor order-finding machine.
//!
//! The crate is split along the pipeline:
//!
//! - [`ntheory`]: exact modular arithmetic, trial division, perfect powers,
//!   continued fractions and brute-force reference routines.
//! - [`qsim`]: an exact state-vector model of the two-register period
//!   finding system (superposition, modular exponentiation, measurement, QFT).
//! - [`order_finding`]: order finding over three interchangeable engines and
//!   the even-order factor extraction step.
//! - [`prime_power`]: splitting odd prime powers `p^n`.
//! - [`factorizer`]: complete factorization with trial division, recursive
//!   splitting and repeated-factor extraction.
//! - [`certifier`]: witness search, recursive certificates and a purely
//!   classical verifier.
//! - [`metrics`]: operation accounting split into factorization and
//!   verification phases.

pub mod certifier;
pub mod error;
pub mod factorizer;
pub mod metrics;
pub mod ntheory;
pub mod order_finding;
pub mod prime_power;
pub mod qsim;

pub use certifier::{
    certify, verify_certificate, CertificateKind, Certificate, CertifyConfig, CertifyOutcome,
    CertifyRun, Verdict, WitnessMode, Witnesses,
};
pub use error::{Error, Result};
pub use factorizer::{factor_completely, FactorConfig, Factorization, PrimePower};
pub use metrics::{CostLedger, CostReport, Counters, Phase};
pub use ntheory::Natural;
pub use order_finding::{find_order, EngineKind, OrderResult, ShorConfig};

/// Seedable random source used throughout the crate.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's random source from a 64-bit seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
