//! Fresh i.i.d. samples for the estimated-rate variant of the dynamics.

use rand::Rng;
use rand_distr::{Binomial, Distribution};

/// Per-round sample size `⌈ln(2|G|T/δ) / (2ε²)⌉`, at least 1.
pub fn sample_size(iterations: u64, group_count: usize, epsilon: f64, delta: f64) -> u64 {
    let arg = 2.0 * group_count as f64 * iterations as f64 / delta;
    let m = (arg.ln() / (2.0 * epsilon * epsilon)).ceil();
    if m.is_finite() && m >= 1.0 {
        m as u64
    } else {
        1
    }
}

/// Counts of `n` i.i.d. draws from the categorical distribution `probs`.
pub fn multinomial<R: Rng + ?Sized>(rng: &mut R, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut counts = vec![0; probs.len()];
    let mut remaining_n = n;
    let mut remaining_p: f64 = probs.iter().sum();
    for (i, &p) in probs.iter().enumerate() {
        if remaining_n == 0 {
            break;
        }
        if i + 1 == probs.len() {
            counts[i] = remaining_n;
            break;
        }
        let q = if remaining_p > 0.0 {
            (p / remaining_p).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let k = Binomial::new(remaining_n, q)
            .expect("probability in [0, 1]")
            .sample(rng);
        counts[i] = k;
        remaining_n -= k;
        remaining_p -= p;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sample_size_examples() {
        assert_eq!(sample_size(100, 4, 0.05, 0.05), 1937);
        assert_eq!(sample_size(10, 2, 0.1, 0.1), 300);
        assert_eq!(sample_size(1, 1, 1.0, 1.0), 1);
    }

    #[test]
    fn sample_size_shrinks_with_epsilon() {
        let small = sample_size(50, 3, 0.05, 0.1);
        let large = sample_size(50, 3, 0.1, 0.1);
        assert!(large < small);
        assert!((small as f64 / large as f64 - 4.0).abs() < 0.01);
    }

    #[test]
    fn multinomial_sums_to_n() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let probs = [0.1, 0.0, 0.6, 0.3];
        for n in [0, 1, 17, 10_000] {
            let c = multinomial(&mut rng, n, &probs);
            assert_eq!(c.iter().sum::<u64>(), n);
            assert_eq!(c[1], 0);
        }
    }

    #[test]
    fn multinomial_frequencies() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let probs = [0.2, 0.5, 0.3];
        let n = 200_000;
        let c = multinomial(&mut rng, n, &probs);
        for (k, p) in c.iter().zip(probs) {
            let freq = *k as f64 / n as f64;
            let sd = (p * (1.0 - p) / n as f64).sqrt();
            assert!((freq - p).abs() < 5.0 * sd, "{freq} vs {p}");
        }
    }
}
