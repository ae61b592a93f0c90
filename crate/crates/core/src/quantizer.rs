//! Uniform multi-bit quantizer with clipping at `±τ`.
//!
//! An `L`-bit quantizer has `M = 2^L` levels `m_i = (2i − 1 − M)Δ/2`,
//! `i = 1..M`, with `Δ = 2τ/(M − 1)`, so the extreme levels sit exactly at
//! `±τ`. Cells are half-open `[m_i − Δ/2, m_i + Δ/2)`; inputs beyond `±τ`
//! clip to the extreme levels. Indices are 1-based throughout.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Quantizer {
    bits: u32,
    tau: f64,
}

impl Quantizer {
    pub fn new(bits: u32, tau: f64) -> Result<Self> {
        if bits == 0 || bits > 52 {
            return Err(Error::BadRate(f64::from(bits)));
        }
        if !(tau.is_finite() && tau > 0.0) {
            return Err(Error::invalid("tau", format!("must be positive, got {tau}")));
        }
        Ok(Self { bits, tau })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn levels_count(&self) -> usize {
        1usize << self.bits
    }

    pub fn step(&self) -> f64 {
        2.0 * self.tau / (self.levels_count() as f64 - 1.0)
    }

    /// Level `m_i` for a 1-based index.
    pub fn level(&self, index: usize) -> f64 {
        let m = self.levels_count() as f64;
        (2.0 * index as f64 - 1.0 - m) * self.step() / 2.0
    }

    pub fn levels(&self) -> Vec<f64> {
        (1..=self.levels_count()).map(|i| self.level(i)).collect()
    }

    /// Index of the cell containing `x`.
    pub fn quantize(&self, x: f64) -> Result<usize> {
        if !x.is_finite() {
            return Err(Error::NonFinite(x));
        }
        let m = self.levels_count();
        if x >= self.tau {
            return Ok(m);
        }
        if x <= -self.tau {
            return Ok(1);
        }
        // (x + τ + Δ/2)/Δ rewritten as x/Δ + M/2 so that x = 0 lands exactly on a cell edge
        let pos = (x / self.step() + m as f64 / 2.0).floor();
        Ok((pos as usize + 1).clamp(1, m))
    }

    /// Quantize and return the level value.
    pub fn reconstruct(&self, x: f64) -> Result<f64> {
        self.quantize(x).map(|i| self.level(i))
    }

    /// Level reconstructed from a natural-binary word:
    /// `Δ(0.5 − 2^{L−1} + Σ_j b_j 2^{L−j})`.
    pub fn level_from_bits(&self, bits: &[bool]) -> f64 {
        let l = self.bits as i32;
        let weighted: f64 = bits
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(j, _)| 2f64.powi(l - 1 - j as i32))
            .sum();
        self.step() * (0.5 - 2f64.powi(l - 1) + weighted)
    }
}

/// Natural binary of `index − 1`, most significant bit first.
pub fn encode_bits(index: usize, bits: u32) -> Result<Vec<bool>> {
    if bits == 0 || bits > 63 || index == 0 || index > 1usize << bits {
        return Err(Error::IndexOutOfRange { index, bits });
    }
    let word = index - 1;
    Ok((0..bits).rev().map(|b| (word >> b) & 1 == 1).collect())
}

/// Inverse of [`encode_bits`].
pub fn decode_bits(bits: &[bool]) -> usize {
    bits.iter().fold(0usize, |acc, b| (acc << 1) | usize::from(*b)) + 1
}

/// Quantization-noise variance `τ²/(3(2^L − 1)²)`, valid for real `L > 0`.
/// Equals `Δ²/12` at integer `L`.
pub fn quant_noise_var(rate: f64, tau: f64) -> Result<f64> {
    if !(rate > 0.0) {
        return Err(Error::BadRate(rate));
    }
    Ok(noise_var(rate, tau))
}

pub(crate) fn noise_var(rate: f64, tau: f64) -> f64 {
    let m = rate.exp2() - 1.0;
    tau * tau / (3.0 * m * m)
}

/// `∂σ²_ε/∂L = −2 ln2 · τ² 2^L / (3(2^L − 1)³)`.
pub(crate) fn noise_var_slope(rate: f64, tau: f64) -> f64 {
    let p = rate.exp2();
    -2.0 * std::f64::consts::LN_2 * tau * tau * p / (3.0 * (p - 1.0).powi(3))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn two_bit_levels() {
        let q = Quantizer::new(2, 3.5).unwrap();
        let lv = q.levels();
        let expected = [-3.5, -7.0 / 6.0, 7.0 / 6.0, 3.5];
        for (a, b) in lv.iter().zip(expected) {
            assert_relative_eq!(*a, b, epsilon = 1e-15);
        }
        assert_eq!(q.quantize(0.5).unwrap(), 3);
        assert_relative_eq!(q.reconstruct(0.5).unwrap(), 7.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_goes_right_for_even_level_count() {
        for bits in 1..8 {
            let q = Quantizer::new(bits, 2.3).unwrap();
            assert_eq!(q.quantize(0.0).unwrap(), q.levels_count() / 2 + 1);
        }
    }

    #[test]
    fn clipping() {
        let q = Quantizer::new(3, 1.5).unwrap();
        assert_eq!(q.quantize(15.0).unwrap(), 8);
        assert_eq!(q.reconstruct(15.0).unwrap(), 1.5);
        assert_eq!(q.quantize(-15.0).unwrap(), 1);
        assert!(matches!(q.quantize(f64::NAN), Err(Error::NonFinite(_))));
    }

    #[test]
    fn bit_words() {
        assert_eq!(encode_bits(1, 2).unwrap(), vec![false, false]);
        assert_eq!(decode_bits(&[false, false]), 1);
        assert_eq!(encode_bits(4, 2).unwrap(), vec![true, true]);
        assert!(encode_bits(5, 2).is_err());
        assert!(encode_bits(0, 2).is_err());
    }

    #[test]
    fn bit_reconstruction_agrees_with_level_formula() {
        let q = Quantizer::new(2, 3.5).unwrap();
        let bits = [true, false];
        assert_eq!(decode_bits(&bits), 3);
        assert_relative_eq!(q.level_from_bits(&bits), 7.0 / 6.0, epsilon = 1e-15);
        for bits in 1..6 {
            let q = Quantizer::new(bits, 1.7).unwrap();
            for i in 1..=q.levels_count() {
                let w = encode_bits(i, bits).unwrap();
                assert_relative_eq!(q.level_from_bits(&w), q.level(i), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn noise_variance_values() {
        assert_relative_eq!(quant_noise_var(2.0, 3.5).unwrap(), 49.0 / 108.0, epsilon = 1e-15);
        assert_relative_eq!(quant_noise_var(1.0, 2.0).unwrap(), 4.0 / 3.0, epsilon = 1e-15);
        assert!(quant_noise_var(60.0, 2.0).unwrap() < 1e-30);
        assert!(quant_noise_var(0.0, 2.0).is_err());
        let q = Quantizer::new(4, 2.2).unwrap();
        assert_relative_eq!(quant_noise_var(4.0, 2.2).unwrap(), q.step().powi(2) / 12.0, epsilon = 1e-14);
    }

    #[test]
    fn noise_variance_decreasing_and_convex() {
        let tau = 3.0;
        let h = 1e-4;
        let mut l = 0.2;
        while l < 12.0 {
            let f = |x: f64| noise_var(x, tau);
            let d1 = (f(l + h) - f(l - h)) / (2.0 * h);
            let d2 = (f(l + h) - 2.0 * f(l) + f(l - h)) / (h * h);
            assert!(d1 < 0.0);
            assert!(d2 > 0.0);
            assert_relative_eq!(d1, noise_var_slope(l, tau), max_relative = 1e-6);
            l += 0.1;
        }
    }

    #[test]
    fn reconstruction_error_within_half_step_on_grid() {
        for bits in 1..7 {
            let q = Quantizer::new(bits, 2.5).unwrap();
            let n = 20_000;
            for i in 0..=n {
                let x = -2.5 + 5.0 * i as f64 / n as f64;
                let err = (x - q.reconstruct(x).unwrap()).abs();
                assert!(err <= q.step() / 2.0 + 1e-12, "bits={bits} x={x} err={err}");
            }
        }
    }

    #[test]
    fn uniform_noise_approximation() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        // σ ≪ τ and Δ ≪ σ: quantization error variance ≈ Δ²/12
        let q = Quantizer::new(8, 8.0).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let normal = Normal::new(0.0, 1.0).unwrap();
        let n = 200_000;
        let (mut s, mut s2) = (0.0, 0.0);
        for _ in 0..n {
            let x: f64 = normal.sample(&mut rng);
            let e = x - q.reconstruct(x).unwrap();
            s += e;
            s2 += e * e;
        }
        let var = s2 / n as f64 - (s / n as f64).powi(2);
        let model = q.step().powi(2) / 12.0;
        assert!((var - model).abs() / model < 0.02, "var={var} model={model}");
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(bits in 1u32..16, seed in any::<u64>()) {
            let index = (seed % (1u64 << bits)) as usize + 1;
            prop_assert_eq!(decode_bits(&encode_bits(index, bits).unwrap()), index);
        }

        #[test]
        fn index_is_monotone(bits in 1u32..10, a in -10.0f64..10.0, b in -10.0f64..10.0) {
            let q = Quantizer::new(bits, 3.0).unwrap();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(q.quantize(lo).unwrap() <= q.quantize(hi).unwrap());
        }
    }
}
