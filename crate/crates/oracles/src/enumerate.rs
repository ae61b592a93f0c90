//! Exact second moment of the level error caused by independent bit flips.

use crate::numeric::gaussian_interval;

fn level(tau: f64, bits: u32, index0: usize) -> f64 {
    let m = (1usize << bits) as f64;
    let step = 2.0 * tau / (m - 1.0);
    (2.0 * (index0 as f64 + 1.0) - 1.0 - m) * step / 2.0
}

/// E{(m̂ − m)²} given that level `index0` (0-based) was sent, summing over
/// all 2^L flip patterns.
pub fn conditional_level_error(tau: f64, bits: u32, p_flip: f64, index0: usize) -> f64 {
    let sent = level(tau, bits, index0);
    (0..1usize << bits)
        .map(|pattern| {
            let flips = pattern.count_ones() as i32;
            let prob = p_flip.powi(flips) * (1.0 - p_flip).powi(bits as i32 - flips);
            let got = level(tau, bits, index0 ^ pattern);
            prob * (got - sent).powi(2)
        })
        .sum()
}

/// Probability that a N(0, var) observation lands in each quantizer cell.
pub fn gaussian_level_probs(tau: f64, bits: u32, var: f64) -> Vec<f64> {
    let m = 1usize << bits;
    let step = 2.0 * tau / (m as f64 - 1.0);
    (0..m)
        .map(|i| {
            let c = level(tau, bits, i);
            let lo = if i == 0 { f64::NEG_INFINITY } else { c - step / 2.0 };
            let hi = if i == m - 1 { f64::INFINITY } else { c + step / 2.0 };
            gaussian_interval(lo, hi, var)
        })
        .collect()
}

/// Unconditional E{(m̂ − m)²} under the supplied level distribution.
pub fn level_error_moment(tau: f64, bits: u32, p_flip: f64, level_probs: &[f64]) -> f64 {
    level_probs
        .iter()
        .enumerate()
        .map(|(i, p)| p * conditional_level_error(tau, bits, p_flip, i))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_bit_moment_is_flip_prob_times_span() {
        // one-bit quantizer: the only error is ±2τ with probability p
        let tau = 2.0;
        let e = conditional_level_error(tau, 1, 0.1, 0);
        assert!((e - 0.1 * 16.0).abs() < 1e-12);
    }

    #[test]
    fn probabilities_sum_to_one() {
        let p = gaussian_level_probs(3.0, 3, 1.2);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}
