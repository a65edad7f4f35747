//! Constants of the partitioned-set enumerator, tester repetition counts and
//! sample sizes.

use statrs::distribution::{Binomial, DiscreteCDF};

use crate::error::{Error, Result};
use crate::num::Scalar;

/// Constants of one partitioned enumeration run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LemmaConstants<F> {
    pub mu: F,
    pub delta: F,
    pub q: F,
    /// Random samples per step.
    pub alpha: u64,
    /// Sequential indices per step.
    pub batch: u64,
}

impl<F: Scalar> LemmaConstants<F> {
    pub fn new(mu: F, delta: F) -> Result<Self> {
        let zero = F::zero();
        let one = F::one();
        if !(mu > zero && mu < one) || !(delta > zero && delta < one) {
            return Err(Error::Invalid(format!(
                "mu and delta must lie in (0,1), got {mu} and {delta}"
            )));
        }
        let base = one - mu * (one - mu);
        let q = (base * base).min((one - delta) * (one - delta) / F::lit(9.0));
        let alpha = (q.ln() / base.ln()).ceil_count().max(1);
        let batch = (one / (mu * mu)).ceil_count().max(1);
        Ok(LemmaConstants {
            mu,
            delta,
            q,
            alpha,
            batch,
        })
    }

    /// Worst-case elementary operations between two emissions: each index
    /// is probed, checked and queued at most once, plus one dequeue.
    pub fn delay_bound(&self) -> u64 {
        3 * (self.alpha + self.batch) + 1
    }

    pub fn to_f64(&self) -> LemmaConstants<f64> {
        LemmaConstants {
            mu: self.mu.to_f64().unwrap(),
            delta: self.delta.to_f64().unwrap(),
            q: self.q.to_f64().unwrap(),
            alpha: self.alpha,
            batch: self.batch,
        }
    }
}

/// Repetitions of a tester with one-sided error 1/3 so that the chance of a
/// wrong rejection-free run drops to `1 − target`.
pub fn one_sided_repetitions<F: Scalar>(target: F) -> u32 {
    let one = F::one();
    if target <= F::lit(2.0 / 3.0) + F::lit(1e-12) {
        return 1;
    }
    let r = ((one - target).ln() / F::lit(1.0 / 3.0).ln() - F::lit(1e-9)).ceil_count();
    r.max(1) as u32
}

/// Smallest odd number of majority-vote repetitions of a tester with
/// two-sided error 1/3 whose exact binomial error is at most `1 − target`.
pub fn two_sided_repetitions<F: Scalar>(target: F) -> u32 {
    let allowed = (F::one() - target).to_f64().unwrap() + 1e-12;
    let mut r = 1u64;
    loop {
        let b = Binomial::new(1.0 / 3.0, r).unwrap();
        let wrong = 1.0 - b.cdf(r / 2);
        if wrong <= allowed {
            return r as u32;
        }
        r += 2;
    }
}

/// Error probability of a majority vote over `r` runs with error 1/3.
pub fn majority_error(r: u32) -> f64 {
    let b = Binomial::new(1.0 / 3.0, r as u64).unwrap();
    1.0 - b.cdf(r as u64 / 2)
}

/// Sample count of the degree-profile tester: ⌈log_{1−εd/3}(1/3)⌉.
pub fn example22_alpha<F: Scalar>(eps: F, d: usize) -> u64 {
    let x = eps * F::of_usize(d) / F::lit(3.0);
    if x >= F::one() {
        return 1;
    }
    (F::lit(1.0 / 3.0).ln() / (F::one() - x).ln()).ceil_count().max(1)
}

/// Samples for an L1 estimate of a distribution over `c` classes within λ
/// with probability 9/10: ⌈c²/λ² · ln(20c)⌉.
pub fn frequency_sample_size<F: Scalar>(c: usize, lambda: F) -> u64 {
    let c = F::of_usize(c.max(1));
    (c * c / (lambda * lambda) * (F::lit(20.0) * c).ln())
        .ceil_count()
        .max(1)
}

/// Hoeffding sample size for a mean of values in [0, range] within λ, with
/// failure probability 1/(10·parts): ⌈range² ln(20·parts)/(2λ²)⌉.
pub fn hoeffding_sample_size<F: Scalar>(range: F, lambda: F, parts: usize) -> u64 {
    let p = F::of_usize(parts.max(1));
    (range * range * (F::lit(20.0) * p).ln() / (F::lit(2.0) * lambda * lambda))
        .ceil_count()
        .max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumerator_constants() {
        let c = LemmaConstants::new(0.1f64, 2.0 / 3.0).unwrap();
        let base: f64 = 1.0 - 0.1 * 0.9;
        let q = (base * base).min((1.0f64 / 3.0).powi(2) / 9.0);
        assert!((c.q - q).abs() < 1e-15);
        assert_eq!(c.alpha, (q.ln() / base.ln()).ceil() as u64);
        assert_eq!(c.batch, 100);
        let f = LemmaConstants::new(0.1f32, 2.0 / 3.0).unwrap();
        assert_eq!(f.batch, 100);
        assert!(f.alpha.abs_diff(c.alpha) <= 1);
        assert!(LemmaConstants::new(0.0f64, 0.5).is_err());
        assert!(LemmaConstants::new(0.5f64, 1.0).is_err());
    }

    #[test]
    fn repetitions() {
        assert_eq!(one_sided_repetitions(2.0f64 / 3.0), 1);
        assert_eq!(two_sided_repetitions(2.0f64 / 3.0), 1);
        let target = (5.0f64 / 6.0).sqrt();
        let r = two_sided_repetitions(target);
        assert_eq!(r % 2, 1);
        assert!(majority_error(r) <= 1.0 - target);
        assert!(majority_error(r - 2) > 1.0 - target);
        let one = one_sided_repetitions(target);
        assert!((1.0f64 / 3.0).powi(one as i32) <= 1.0 - target);
        assert!((1.0f64 / 3.0).powi(one as i32 - 1) > 1.0 - target);
    }

    #[test]
    fn sample_sizes() {
        assert_eq!(example22_alpha(1.0f64, 3), 1);
        let a = example22_alpha(0.002f64, 3);
        assert!((1.0f64 - 0.002).powi(a as i32) <= 1.0 / 3.0);
        assert!((1.0f64 - 0.002).powi(a as i32 - 1) > 1.0 / 3.0);
        assert_eq!(frequency_sample_size(1, 1.0f64), 3);
        assert_eq!(hoeffding_sample_size(1.0f64, 1.0, 1), 2);
    }
}
