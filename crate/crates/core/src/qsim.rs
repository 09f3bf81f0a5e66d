//! Exact amplitude model of the two-register period-finding system.
//!
//! The first register holds `L` qubits with labels `a in [0, 2^L)`; the
//! second holds residues modulo `M`. Every state reachable by this module
//! has the shape `sum_a alpha_a |a, g(a)>` (one second-register value per
//! first-register label), so it is stored as a dense amplitude vector over
//! `a` plus the table `g`. Once the second register is measured the table
//! is dropped and the first register is a plain state vector, to which the
//! QFT is applied with an FFT.

use std::collections::BTreeMap;

use num_complex::Complex64;
use num_traits::ToPrimitive;
use rand::Rng;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::ntheory::{self, Natural};

/// Largest first-register width the simulator will allocate.
pub const DEFAULT_WIDTH_CAP: u32 = 22;

/// Smallest `L` with `2^L >= M^2`, i.e. `ceil(2 log2 M)`.
pub fn register_width_for(modulus: &Natural) -> Result<u32> {
    if *modulus < ntheory::nat(2) {
        return Err(Error::domain(format!("modulus {modulus} is below 2")));
    }
    let sq_minus_1 = modulus * modulus - 1u32;
    Ok(sq_minus_1.bits() as u32)
}

#[derive(Clone, Debug)]
pub struct QuantumState {
    width: u32,
    modulus: Option<u64>,
    amplitudes: Vec<Complex64>,
    /// Second-register value for each first-register label; `None` once the
    /// second register has been measured and discarded.
    second: Option<Vec<u64>>,
}

#[derive(Clone, Debug)]
pub struct MeasurementOutcome {
    pub observed_value: u64,
    pub collapsed_state: QuantumState,
    /// Total pre-measurement weight of the observed branch.
    pub probability: f64,
}

impl QuantumState {
    /// Uniform superposition `2^{-L/2} sum_a |a, 0>` using the default cap.
    pub fn prepare_uniform(width: u32) -> Result<Self> {
        Self::prepare_uniform_capped(width, DEFAULT_WIDTH_CAP)
    }

    pub fn prepare_uniform_capped(width: u32, cap: u32) -> Result<Self> {
        if width == 0 {
            return Err(Error::domain("register width must be positive"));
        }
        if width > cap {
            return Err(Error::Capacity { width, cap });
        }
        let size = 1usize << width;
        let amp = Complex64::new((size as f64).sqrt().recip(), 0.0);
        Ok(QuantumState {
            width,
            modulus: None,
            amplitudes: vec![amp; size],
            second: Some(vec![0; size]),
        })
    }

    /// Builds a first-register-only state from explicit amplitudes.
    /// The amplitudes are renormalized.
    pub fn from_first_register(width: u32, amplitudes: Vec<Complex64>) -> Result<Self> {
        if width == 0 || width > 63 || amplitudes.len() != 1usize << width {
            return Err(Error::domain("amplitude vector length must be 2^width"));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::domain("amplitude vector has zero norm"));
        }
        Ok(QuantumState {
            width,
            modulus: None,
            amplitudes: amplitudes.into_iter().map(|a| a / norm).collect(),
            second: None,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn modulus(&self) -> Option<u64> {
        self.modulus
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn has_second_register(&self) -> bool {
        self.second.is_some()
    }

    /// Amplitude of first-register label `a` (with its paired second-register
    /// value, if the register is still present).
    pub fn amplitude(&self, a: u64) -> Complex64 {
        self.amplitudes
            .get(a as usize)
            .copied()
            .unwrap_or_default()
    }

    /// Second-register value paired with label `a`, while entangled.
    pub fn second_value(&self, a: u64) -> Option<u64> {
        self.second.as_ref().and_then(|s| s.get(a as usize).copied())
    }

    /// Labels with nonzero amplitude, ascending.
    pub fn support(&self) -> Vec<u64> {
        self.amplitudes
            .iter()
            .enumerate()
            .filter(|(_, z)| z.norm_sqr() > 0.0)
            .map(|(a, _)| a as u64)
            .collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|a, 0> -> |a, m^a mod M>`.
    pub fn apply_modular_exponentiation(mut self, m: &Natural, modulus: &Natural) -> Result<Self> {
        let g = ntheory::gcd(m, modulus)?;
        if !num_traits::One::is_one(&g) {
            return Err(Error::domain(format!(
                "{m} shares the factor {g} with {modulus}"
            )));
        }
        if m >= modulus {
            return Err(Error::domain(format!("base {m} must be below {modulus}")));
        }
        let big_m = modulus
            .to_u64()
            .ok_or_else(|| Error::domain("modulus too large for the simulator"))?;
        let base = m.to_u64().expect("m < modulus");
        let second = self
            .second
            .as_mut()
            .ok_or_else(|| Error::domain("second register has already been measured"))?;
        if second.iter().any(|&b| b != 0) {
            return Err(Error::domain("second register is not in its initial |0> state"));
        }
        let mut x = 1 % big_m;
        for slot in second.iter_mut() {
            *slot = x;
            x = ((x as u128 * base as u128) % big_m as u128) as u64;
        }
        self.modulus = Some(big_m);
        Ok(self)
    }

    /// Born weight of each second-register value.
    pub fn second_register_distribution(&self) -> Result<BTreeMap<u64, f64>> {
        let second = self
            .second
            .as_ref()
            .ok_or_else(|| Error::domain("second register has already been measured"))?;
        let mut w = BTreeMap::new();
        for (amp, &b) in self.amplitudes.iter().zip(second) {
            *w.entry(b).or_insert(0.0) += amp.norm_sqr();
        }
        Ok(w)
    }

    /// Measures the second register, collapses the first onto the observed
    /// branch and discards the second register.
    pub fn measure_second_register<R: Rng + ?Sized>(self, rng: &mut R) -> Result<MeasurementOutcome> {
        let weights = self.second_register_distribution()?;
        let total: f64 = weights.values().sum();
        let observed = sample_weighted(weights.iter().map(|(&b, &w)| (b, w)), total, rng)
            .ok_or_else(|| Error::domain("state has zero norm"))?;
        self.collapse_second_register(observed)
    }

    /// Post-selects the second register on `residue`.
    pub fn collapse_second_register(mut self, residue: u64) -> Result<MeasurementOutcome> {
        let second = self
            .second
            .take()
            .ok_or_else(|| Error::domain("second register has already been measured"))?;
        let mut weight = 0.0;
        for (amp, &b) in self.amplitudes.iter_mut().zip(&second) {
            if b == residue {
                weight += amp.norm_sqr();
            } else {
                *amp = Complex64::new(0.0, 0.0);
            }
        }
        if weight <= 0.0 {
            return Err(Error::domain(format!(
                "residue {residue} has zero probability in this state"
            )));
        }
        let scale = weight.sqrt().recip();
        for amp in &mut self.amplitudes {
            *amp *= scale;
        }
        Ok(MeasurementOutcome {
            observed_value: residue,
            collapsed_state: self,
            probability: weight,
        })
    }

    /// Discrete Fourier transform on the first register with kernel
    /// `exp(2 pi i a c / 2^L) / 2^{L/2}`.
    pub fn apply_qft(mut self) -> Result<Self> {
        if self.second.is_some() {
            return Err(Error::domain(
                "QFT needs the second register measured and discarded first",
            ));
        }
        let n = self.amplitudes.len();
        // the unnormalized inverse FFT carries the +2 pi i sign
        let fft = FftPlanner::<f64>::new().plan_fft_inverse(n);
        fft.process(&mut self.amplitudes);
        let scale = (n as f64).sqrt().recip();
        for amp in &mut self.amplitudes {
            *amp *= scale;
        }
        Ok(self)
    }

    /// Samples a first-register label with Born probabilities.
    pub fn measure_first_register<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        let total = self.norm_sqr();
        sample_weighted(
            self.amplitudes
                .iter()
                .enumerate()
                .map(|(a, z)| (a as u64, z.norm_sqr())),
            total,
            rng,
        )
        .unwrap_or(0)
    }

    /// Exact `|amplitude|^2` for every first-register label, indexed by label.
    pub fn output_distribution(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }
}

fn sample_weighted<R: Rng + ?Sized>(
    items: impl Iterator<Item = (u64, f64)> + Clone,
    total: f64,
    rng: &mut R,
) -> Option<u64> {
    if total <= 0.0 || !total.is_finite() {
        return None;
    }
    let target = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    let mut last = None;
    for (label, w) in items {
        if w <= 0.0 {
            continue;
        }
        acc += w;
        last = Some(label);
        if target < acc {
            return Some(label);
        }
    }
    // rounding left the target past the final bucket
    last
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ntheory::nat;
    use crate::seeded_rng;
    use std::f64::consts::PI;

    const TOL: f64 = 1e-9;

    fn entangled(width: u32, m: u64, modulus: u64) -> QuantumState {
        QuantumState::prepare_uniform(width)
            .unwrap()
            .apply_modular_exponentiation(&nat(m), &nat(modulus))
            .unwrap()
    }

    #[test]
    fn register_width_examples() {
        assert_eq!(register_width_for(&nat(15)).unwrap(), 8);
        assert_eq!(register_width_for(&nat(4)).unwrap(), 4);
        assert_eq!(register_width_for(&nat(21)).unwrap(), 9);
        assert!(register_width_for(&nat(1)).is_err());
        for m in 2..2000u64 {
            let l = register_width_for(&nat(m)).unwrap();
            let sq = (m * m) as u128;
            assert!(sq <= 1u128 << l && (1u128 << l) < 4 * sq, "M={m}");
        }
    }

    #[test]
    fn uniform_examples() {
        let s = QuantumState::prepare_uniform(1).unwrap();
        for a in 0..2 {
            assert!((s.amplitude(a).re - 0.5f64.sqrt()).abs() < TOL);
        }
        let s = QuantumState::prepare_uniform(2).unwrap();
        assert!(s.output_distribution().iter().all(|&p| (p - 0.25).abs() < TOL));
        let s = QuantumState::prepare_uniform(8).unwrap();
        assert_eq!(s.dimension(), 256);
        assert!((s.amplitude(17).re - 1.0 / 16.0).abs() < TOL);
        assert!((s.norm_sqr() - 1.0).abs() < TOL);
        assert!(s.second_value(5) == Some(0));
    }

    #[test]
    fn width_cap_enforced() {
        assert!(matches!(
            QuantumState::prepare_uniform(DEFAULT_WIDTH_CAP + 1),
            Err(Error::Capacity { .. })
        ));
        assert!(matches!(
            QuantumState::prepare_uniform_capped(9, 8),
            Err(Error::Capacity { width: 9, cap: 8 })
        ));
    }

    #[test]
    fn modexp_examples() {
        let s = entangled(8, 2, 15);
        let cycle = [1, 2, 4, 8];
        for a in 0..256u64 {
            assert_eq!(s.second_value(a), Some(cycle[(a % 4) as usize]));
        }
        assert!((s.norm_sqr() - 1.0).abs() < TOL);

        let s = entangled(1, 1, 2);
        assert_eq!(s.second_value(0), Some(1));
        assert_eq!(s.second_value(1), Some(1));

        let s = entangled(4, 4, 5);
        for a in 0..16u64 {
            assert_eq!(s.second_value(a), Some(if a % 2 == 0 { 1 } else { 4 }));
        }
    }

    #[test]
    fn modexp_rejects_non_units() {
        let s = QuantumState::prepare_uniform(8).unwrap();
        assert!(matches!(
            s.apply_modular_exponentiation(&nat(5), &nat(15)),
            Err(Error::Domain(_))
        ));
        let s = entangled(8, 2, 15);
        assert!(s.apply_modular_exponentiation(&nat(2), &nat(15)).is_err());
    }

    #[test]
    fn collapse_examples() {
        let out = entangled(8, 2, 15).collapse_second_register(4).unwrap();
        let support = out.collapsed_state.support();
        let expected: Vec<u64> = (0..64).map(|j| 2 + 4 * j).collect();
        assert_eq!(support, expected);
        for &a in &support {
            assert!((out.collapsed_state.amplitude(a).re - 1.0 / 8.0).abs() < TOL);
        }
        assert!((out.probability - 0.25).abs() < TOL);
        assert!(!out.collapsed_state.has_second_register());

        let out = entangled(4, 4, 5).collapse_second_register(1).unwrap();
        assert_eq!(out.collapsed_state.support(), (0..8).map(|j| 2 * j).collect::<Vec<_>>());

        let out = entangled(3, 1, 2).collapse_second_register(1).unwrap();
        assert_eq!(out.collapsed_state.support().len(), 8);
        assert!((out.probability - 1.0).abs() < TOL);

        assert!(entangled(8, 2, 15).collapse_second_register(3).is_err());
    }

    #[test]
    fn measured_collapse_is_an_arithmetic_progression() {
        let mut rng = seeded_rng(11);
        for _ in 0..20 {
            let out = entangled(9, 2, 21).measure_second_register(&mut rng).unwrap();
            let s = out.collapsed_state.support();
            let a0 = s[0];
            assert!(a0 < 6);
            assert!(s.windows(2).all(|w| w[1] - w[0] == 6));
            let t = (511 - a0) / 6 + 1;
            assert_eq!(s.len() as u64, t);
            assert!((out.probability - t as f64 / 512.0).abs() < TOL);
            assert!((out.collapsed_state.norm_sqr() - 1.0).abs() < TOL);
        }
    }

    #[test]
    fn qft_exact_period() {
        let st = entangled(8, 2, 15)
            .collapse_second_register(1)
            .unwrap()
            .collapsed_state
            .apply_qft()
            .unwrap();
        let d = st.output_distribution();
        for (c, &p) in d.iter().enumerate() {
            if c % 64 == 0 {
                assert!((p - 0.25).abs() < 1e-12, "c={c} p={p}");
            } else {
                assert!(p < 1e-12, "c={c} p={p}");
            }
        }
    }

    #[test]
    fn qft_point_mass_is_uniform() {
        let mut amps = vec![Complex64::new(0.0, 0.0); 64];
        amps[13] = Complex64::new(1.0, 0.0);
        let st = QuantumState::from_first_register(6, amps).unwrap().apply_qft().unwrap();
        for p in st.output_distribution() {
            assert!((p - 1.0 / 64.0).abs() < TOL);
        }
    }

    #[test]
    fn qft_period_three_peaks() {
        // support {0, 3, 6, ...} in [0, 256)
        let support: Vec<u64> = (0..256).step_by(3).collect();
        let t = support.len() as f64;
        let st = entangled(8, 4, 7) // 4 has order 3 mod 7
            .collapse_second_register(1)
            .unwrap()
            .collapsed_state;
        assert_eq!(st.support(), support);
        let st = st.apply_qft().unwrap();
        let d = st.output_distribution();
        let mut peak_mass = 0.0;
        for (c, &p) in d.iter().enumerate() {
            // independent direct sum
            let mut acc = Complex64::new(0.0, 0.0);
            for &a in &support {
                acc += Complex64::from_polar(1.0, 2.0 * PI * (a * c as u64) as f64 / 256.0);
            }
            let want = acc.norm_sqr() / (t * 256.0);
            assert!((p - want).abs() < TOL, "c={c}");
            let near = (0..3).any(|j| (c as f64 - 256.0 * j as f64 / 3.0).abs() <= 0.5);
            if near {
                peak_mass += p;
            }
        }
        assert!(peak_mass >= 0.4, "peak mass {peak_mass}");
    }

    #[test]
    fn qft_requires_dropped_second_register() {
        assert!(entangled(4, 4, 5).apply_qft().is_err());
    }

    #[test]
    fn first_register_measurement() {
        let mut amps = vec![Complex64::new(0.0, 0.0); 256];
        amps[192] = Complex64::new(0.0, 1.0);
        let st = QuantumState::from_first_register(8, amps).unwrap();
        let mut rng = seeded_rng(5);
        for _ in 0..50 {
            assert_eq!(st.measure_first_register(&mut rng), 192);
        }

        let st = entangled(8, 2, 15)
            .collapse_second_register(2)
            .unwrap()
            .collapsed_state
            .apply_qft()
            .unwrap();
        let mut counts = BTreeMap::new();
        for _ in 0..10_000 {
            let c = st.measure_first_register(&mut rng);
            assert!(c < 256);
            *counts.entry(c).or_insert(0u32) += 1;
        }
        assert_eq!(counts.keys().copied().collect::<Vec<_>>(), vec![0, 64, 128, 192]);
        for &n in counts.values() {
            assert!((n as f64 / 10_000.0 - 0.25).abs() < 0.05);
        }
    }

    #[test]
    fn measurement_is_deterministic_per_seed() {
        let run = |seed| {
            let mut rng = seeded_rng(seed);
            let out = entangled(9, 2, 21).measure_second_register(&mut rng).unwrap();
            let st = out.collapsed_state.apply_qft().unwrap();
            (out.observed_value, (0..10).map(|_| st.measure_first_register(&mut rng)).collect::<Vec<_>>())
        };
        assert_eq!(run(42), run(42));
    }

    #[test]
    fn output_distribution_of_collapsed_state_is_uniform_on_support() {
        let st = entangled(8, 2, 15).collapse_second_register(8).unwrap().collapsed_state;
        let d = st.output_distribution();
        let total: f64 = d.iter().sum();
        assert!((total - 1.0).abs() < TOL);
        for a in st.support() {
            assert!((d[a as usize] - 1.0 / 64.0).abs() < TOL);
        }
    }
}
