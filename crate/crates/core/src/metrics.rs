//! Operation accounting.
//!
//! A [`CostLedger`] counts semantic operations (modular multiplications,
//! order-finding invocations, trial divisions, witness draws) and files each
//! increment under the phase that is active when it happens. A certification
//! run splits its work into a factorization phase (`P1`) and a verification
//! phase (`P2`); the report exposes both together with independently
//! accumulated totals so the partition `P = P1 + P2` can be checked.
//!
//! Counters live in [`Cell`]s so the ledger can be threaded through the
//! pipeline by shared reference. The ledger is deliberately `!Sync`: one
//! ledger belongs to one run.

use std::cell::Cell;
use std::ops::Add;

use crate::error::{Error, Result};
use crate::ntheory::Natural;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Counters {
    pub modular_multiplications: u64,
    pub order_finding_invocations: u64,
    pub trial_divisions: u64,
    pub witness_trials: u64,
    /// Composite pieces split by an order-finding (or lucky gcd) step whose
    /// factor was used by the factorizer.
    pub factor_splits: u64,
}

impl Add for Counters {
    type Output = Counters;

    fn add(self, rhs: Counters) -> Counters {
        Counters {
            modular_multiplications: self.modular_multiplications + rhs.modular_multiplications,
            order_finding_invocations: self.order_finding_invocations
                + rhs.order_finding_invocations,
            trial_divisions: self.trial_divisions + rhs.trial_divisions,
            witness_trials: self.witness_trials + rhs.witness_trials,
            factor_splits: self.factor_splits + rhs.factor_splits,
        }
    }
}

impl Counters {
    pub fn is_zero(&self) -> bool {
        *self == Counters::default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Factorization,
    Verification,
}

#[derive(Debug, Default)]
pub struct CostLedger {
    phase: Cell<Option<Phase>>,
    factorization: Cell<Counters>,
    verification: Cell<Counters>,
    unattributed: Cell<Counters>,
    totals: Cell<Counters>,
}

impl CostLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Opens a scope in which every increment accrues to `phase`.
    ///
    /// Re-entering the phase that is already active is allowed; opening a
    /// different phase inside an active one is a usage error.
    pub fn attribute(&self, phase: Phase) -> Result<PhaseScope<'_>> {
        let previous = self.phase.get();
        match previous {
            Some(active) if active != phase => Err(Error::Usage(format!(
                "cannot open a {phase:?} scope inside an active {active:?} scope"
            ))),
            _ => {
                self.phase.set(Some(phase));
                Ok(PhaseScope {
                    ledger: self,
                    previous,
                })
            }
        }
    }

    pub fn active_phase(&self) -> Option<Phase> {
        self.phase.get()
    }

    fn bump(&self, f: impl Fn(&mut Counters)) {
        let bucket = match self.phase.get() {
            Some(Phase::Factorization) => &self.factorization,
            Some(Phase::Verification) => &self.verification,
            None => &self.unattributed,
        };
        let mut c = bucket.get();
        f(&mut c);
        bucket.set(c);
        let mut t = self.totals.get();
        f(&mut t);
        self.totals.set(t);
    }

    pub fn add_multiplications(&self, n: u64) {
        self.bump(|c| c.modular_multiplications += n);
    }

    pub fn add_order_finding(&self) {
        self.bump(|c| c.order_finding_invocations += 1);
    }

    pub fn add_trial_divisions(&self, n: u64) {
        self.bump(|c| c.trial_divisions += n);
    }

    pub fn add_witness_trial(&self) {
        self.bump(|c| c.witness_trials += 1);
    }

    pub fn add_factor_split(&self) {
        self.bump(|c| c.factor_splits += 1);
    }

    pub fn phase_counters(&self, phase: Phase) -> Counters {
        match phase {
            Phase::Factorization => self.factorization.get(),
            Phase::Verification => self.verification.get(),
        }
    }

    /// Increments made while no phase scope was open.
    pub fn unattributed(&self) -> Counters {
        self.unattributed.get()
    }

    pub fn totals(&self) -> Counters {
        self.totals.get()
    }

    /// Folds another run's ledger into this one, phase by phase.
    pub fn merge(&self, other: &CostLedger) {
        self.factorization
            .set(self.factorization.get() + other.factorization.get());
        self.verification
            .set(self.verification.get() + other.verification.get());
        self.unattributed
            .set(self.unattributed.get() + other.unattributed.get());
        self.totals.set(self.totals.get() + other.totals.get());
    }
}

/// Guard returned by [`CostLedger::attribute`]; restores the enclosing phase
/// when dropped.
#[must_use = "the phase is closed as soon as the scope is dropped"]
pub struct PhaseScope<'a> {
    ledger: &'a CostLedger,
    previous: Option<Phase>,
}

impl PhaseScope<'_> {
    pub fn ledger(&self) -> &CostLedger {
        self.ledger
    }
}

impl Drop for PhaseScope<'_> {
    fn drop(&mut self) {
        self.ledger.phase.set(self.previous);
    }
}

/// Immutable snapshot of a finished run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostReport {
    pub target: Natural,
    pub p1_factorization: Counters,
    pub p2_verification: Counters,
    pub totals: Counters,
}

impl CostReport {
    /// `totals == p1 + p2`, componentwise.
    pub fn partition_holds(&self) -> bool {
        self.p1_factorization + self.p2_verification == self.totals
    }
}

pub fn report(ledger: &CostLedger, target: &Natural) -> CostReport {
    CostReport {
        target: target.clone(),
        p1_factorization: ledger.phase_counters(Phase::Factorization),
        p2_verification: ledger.phase_counters(Phase::Verification),
        totals: ledger.totals(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn increments_follow_the_active_phase() {
        let ledger = CostLedger::new();
        {
            let _s = ledger.attribute(Phase::Factorization).unwrap();
            ledger.add_trial_divisions(3);
            ledger.add_order_finding();
        }
        {
            let _s = ledger.attribute(Phase::Verification).unwrap();
            ledger.add_multiplications(5);
            ledger.add_witness_trial();
        }
        let r = report(&ledger, &Natural::from(7u32));
        assert_eq!(r.p1_factorization.trial_divisions, 3);
        assert_eq!(r.p1_factorization.order_finding_invocations, 1);
        assert_eq!(r.p2_verification.modular_multiplications, 5);
        assert_eq!(r.p2_verification.witness_trials, 1);
        assert!(r.partition_holds());
        assert!(ledger.unattributed().is_zero());
    }

    #[test]
    fn conflicting_nested_scope_is_rejected() {
        let ledger = CostLedger::new();
        let _outer = ledger.attribute(Phase::Factorization).unwrap();
        assert!(matches!(
            ledger.attribute(Phase::Verification),
            Err(Error::Usage(_))
        ));
        // same phase nests fine
        let inner = ledger.attribute(Phase::Factorization).unwrap();
        drop(inner);
        assert_eq!(ledger.active_phase(), Some(Phase::Factorization));
    }

    #[test]
    fn scope_restores_previous_phase() {
        let ledger = CostLedger::new();
        {
            let _s = ledger.attribute(Phase::Verification).unwrap();
        }
        assert_eq!(ledger.active_phase(), None);
        ledger.add_multiplications(2);
        let r = report(&ledger, &Natural::from(2u32));
        assert!(!r.partition_holds());
        assert_eq!(ledger.unattributed().modular_multiplications, 2);
    }

    #[test]
    fn merge_adds_componentwise() {
        let a = CostLedger::new();
        let b = CostLedger::new();
        {
            let _s = b.attribute(Phase::Factorization).unwrap();
            b.add_multiplications(4);
        }
        a.merge(&b);
        a.merge(&b);
        assert_eq!(a.totals().modular_multiplications, 8);
        assert_eq!(a.phase_counters(Phase::Factorization).modular_multiplications, 8);
    }
}
