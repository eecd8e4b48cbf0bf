//! Dense probability distributions over item categories.
//!
//! A [`PreferenceDistribution`] is a probability vector with one entry per
//! category, stored dense (the catalogs this crate targets have tens of
//! categories, not thousands). Divergences follow the usual conventions:
//!
//! ```text
//! KL(p||q) = Σ_c p(c) ln(p(c) / q(c))          (0·ln 0 := 0)
//! JS(p||q) = (KL(p||q) + KL(q||p)) / 2          (symmetrized KL)
//! ```
//!
//! KL is undefined when q(c) = 0 somewhere p(c) > 0, so callers blend
//! distributions toward uniform with [`PreferenceDistribution::smooth`]
//! before taking divergences. Natural log throughout; normalized entropy
//! divides by ln of the category count so the base cancels.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::MeasureError;
use crate::math;

/// A probability vector over item categories.
///
/// Invariants: every weight is non-negative and finite, and the weights sum
/// to 1 within 1e-9. Category identity is positional; all distributions in
/// one audit share the catalog's category order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceDistribution {
    weights: Vec<f64>,
}

impl PreferenceDistribution {
    /// Normalizes raw non-negative weights into a distribution.
    pub fn normalize(raw: &[f64]) -> Result<Self, MeasureError> {
        let mut sum = 0.0;
        for &w in raw {
            if !w.is_finite() || w < 0.0 {
                return Err(MeasureError::NegativeWeight);
            }
            sum += w;
        }
        if sum <= 0.0 {
            return Err(MeasureError::AllZero);
        }
        Ok(Self {
            weights: raw.iter().map(|w| w / sum).collect(),
        })
    }

    /// Wraps weights that already form a distribution (sum within 1e-9 of 1).
    pub fn from_weights(weights: Vec<f64>) -> Result<Self, MeasureError> {
        let mut sum = 0.0;
        for &w in &weights {
            if !w.is_finite() || w < 0.0 {
                return Err(MeasureError::NegativeWeight);
            }
            sum += w;
        }
        if weights.is_empty() || math::abs(sum - 1.0) > 1e-9 {
            return Err(MeasureError::AllZero);
        }
        Ok(Self { weights })
    }

    /// The uniform distribution over `categories` categories.
    pub fn uniform(categories: usize) -> Self {
        let w = 1.0 / categories as f64;
        Self {
            weights: vec![w; categories],
        }
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn get(&self, category: usize) -> f64 {
        self.weights[category]
    }

    /// Blends toward uniform: `(1 - alpha)·p + alpha·u`.
    ///
    /// The result is strictly positive everywhere, which keeps KL finite
    /// when a category is absent from one side. `alpha` must lie in (0, 1).
    pub fn smooth(&self, alpha: f64) -> Result<Self, MeasureError> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(MeasureError::InvalidAlpha);
        }
        let u = 1.0 / self.len() as f64;
        Ok(Self {
            weights: self
                .weights
                .iter()
                .map(|w| (1.0 - alpha) * w + alpha * u)
                .collect(),
        })
    }

    /// `KL(self || q)` in nats. Terms with p(c) = 0 contribute 0; a zero in
    /// q under positive p mass is an error (the caller skipped smoothing).
    pub fn kl_divergence(&self, q: &Self) -> Result<f64, MeasureError> {
        if self.len() != q.len() {
            return Err(MeasureError::LengthMismatch);
        }
        let mut sum = 0.0;
        for (&pc, &qc) in self.weights.iter().zip(&q.weights) {
            if pc > 0.0 {
                if qc <= 0.0 {
                    return Err(MeasureError::ZeroInQ);
                }
                sum += pc * math::ln(pc / qc);
            }
        }
        Ok(sum)
    }

    /// Symmetrized KL: `(KL(p||q) + KL(q||p)) / 2`.
    pub fn js_divergence(&self, q: &Self) -> Result<f64, MeasureError> {
        Ok((self.kl_divergence(q)? + q.kl_divergence(self)?) / 2.0)
    }

    /// Entropy divided by `ln(category count)`, in [0, 1].
    ///
    /// 1 for uniform, 0 for one-hot. Errors on a single category, where the
    /// normalizer ln 1 vanishes.
    pub fn entropy_normalized(&self) -> Result<f64, MeasureError> {
        if self.len() < 2 {
            return Err(MeasureError::SingleCategory);
        }
        let mut h = 0.0;
        for &w in &self.weights {
            if w > 0.0 {
                h -= w * math::ln(w);
            }
        }
        Ok(h / math::ln(self.len() as f64))
    }
}

/// Element-wise arithmetic mean of a non-empty population.
pub fn mean_distribution(
    ds: &[PreferenceDistribution],
) -> Result<PreferenceDistribution, MeasureError> {
    let first = ds.first().ok_or(MeasureError::EmptyInput)?;
    let n = ds.len() as f64;
    let mut acc = vec![0.0; first.len()];
    for d in ds {
        if d.len() != acc.len() {
            return Err(MeasureError::LengthMismatch);
        }
        for (a, &w) in acc.iter_mut().zip(&d.weights) {
            *a += w;
        }
    }
    for a in &mut acc {
        *a /= n;
    }
    Ok(PreferenceDistribution { weights: acc })
}

#[cfg(test)]
#[allow(clippy::excessive_precision)] // frozen oracle constants keep every digit
mod tests {
    use super::*;

    const LN_2: f64 = core::f64::consts::LN_2;

    fn dist(w: &[f64]) -> PreferenceDistribution {
        PreferenceDistribution::from_weights(w.to_vec()).unwrap()
    }

    #[test]
    fn normalize_symmetric_pair() {
        let d = PreferenceDistribution::normalize(&[2.0, 2.0]).unwrap();
        assert_eq!(d.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn normalize_one_hot_is_identity() {
        let d = PreferenceDistribution::normalize(&[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(d.weights(), &[1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn normalize_divides_by_sum() {
        // direct division oracle: (1, 3) / 4
        let d = PreferenceDistribution::normalize(&[1.0, 3.0]).unwrap();
        assert!((d.get(0) - 0.25).abs() < 1e-15);
        assert!((d.get(1) - 0.75).abs() < 1e-15);
    }

    #[test]
    fn normalize_rejects_bad_input() {
        assert_eq!(
            PreferenceDistribution::normalize(&[0.0, 0.0]),
            Err(MeasureError::AllZero)
        );
        assert_eq!(
            PreferenceDistribution::normalize(&[1.0, -0.1]),
            Err(MeasureError::NegativeWeight)
        );
        assert_eq!(
            PreferenceDistribution::normalize(&[f64::NAN, 1.0]),
            Err(MeasureError::NegativeWeight)
        );
    }

    #[test]
    fn smooth_fixes_uniform() {
        let u = PreferenceDistribution::uniform(4);
        let s = u.smooth(0.01).unwrap();
        for &w in s.weights() {
            assert!((w - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn smooth_formula_substitution() {
        // (1-α)·(1,0) + α·(1/2,1/2) with α = 0.01 → (0.995, 0.005)
        let d = dist(&[1.0, 0.0]);
        let s = d.smooth(0.01).unwrap();
        assert!((s.get(0) - 0.995).abs() < 1e-15);
        assert!((s.get(1) - 0.005).abs() < 1e-15);
    }

    #[test]
    fn smooth_half_half_is_fixed_point() {
        let d = dist(&[0.5, 0.5]);
        let s = d.smooth(0.5).unwrap();
        assert_eq!(s.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn smooth_rejects_alpha_outside_open_interval() {
        let d = dist(&[0.5, 0.5]);
        assert_eq!(d.smooth(0.0), Err(MeasureError::InvalidAlpha));
        assert_eq!(d.smooth(1.0), Err(MeasureError::InvalidAlpha));
        assert_eq!(d.smooth(-0.2), Err(MeasureError::InvalidAlpha));
    }

    #[test]
    fn kl_of_identical_is_zero() {
        let p = dist(&[0.3, 0.7]);
        assert_eq!(p.kl_divergence(&p).unwrap(), 0.0);
    }

    #[test]
    fn kl_matches_term_by_term_oracle() {
        // 0.5·ln(0.5/0.25) + 0.5·ln(0.5/0.75), summed at 30-digit precision
        let p = dist(&[0.5, 0.5]);
        let q = dist(&[0.25, 0.75]);
        assert!((p.kl_divergence(&q).unwrap() - 0.14384103622589046).abs() < 1e-12);
    }

    #[test]
    fn kl_one_hot_vs_uniform_is_ln2() {
        let p = dist(&[1.0, 0.0]);
        let q = dist(&[0.5, 0.5]);
        assert!((p.kl_divergence(&q).unwrap() - LN_2).abs() < 1e-12);
    }

    #[test]
    fn kl_errors() {
        let p = dist(&[0.5, 0.5]);
        let q3 = dist(&[0.2, 0.3, 0.5]);
        assert_eq!(p.kl_divergence(&q3), Err(MeasureError::LengthMismatch));
        let q0 = dist(&[1.0, 0.0]);
        assert_eq!(p.kl_divergence(&q0), Err(MeasureError::ZeroInQ));
        // p(c) = 0 masks the zero in q
        let p0 = dist(&[1.0, 0.0]);
        assert_eq!(p0.kl_divergence(&q0).unwrap(), 0.0);
    }

    #[test]
    fn js_matches_average_of_kl_pair() {
        let p = dist(&[0.5, 0.5]);
        let q = dist(&[0.25, 0.75]);
        assert!((p.js_divergence(&q).unwrap() - 0.13732653608351371).abs() < 1e-12);
    }

    #[test]
    fn js_zero_at_equality() {
        let u = PreferenceDistribution::uniform(5);
        assert_eq!(u.js_divergence(&u).unwrap(), 0.0);
    }

    #[test]
    fn mean_of_opposite_one_hots_is_uniform() {
        let ds = [dist(&[1.0, 0.0]), dist(&[0.0, 1.0])];
        let m = mean_distribution(&ds).unwrap();
        assert_eq!(m.weights(), &[0.5, 0.5]);
    }

    #[test]
    fn mean_of_singleton_is_identity() {
        let ds = [dist(&[0.2, 0.8])];
        let m = mean_distribution(&ds).unwrap();
        assert_eq!(m.weights(), &[0.2, 0.8]);
    }

    #[test]
    fn mean_is_column_mean() {
        let ds = [dist(&[0.1, 0.9]), dist(&[0.3, 0.7]), dist(&[0.5, 0.5])];
        let m = mean_distribution(&ds).unwrap();
        assert!((m.get(0) - 0.3).abs() < 1e-15);
        assert!((m.get(1) - 0.7).abs() < 1e-15);
    }

    #[test]
    fn mean_errors() {
        assert_eq!(mean_distribution(&[]), Err(MeasureError::EmptyInput));
        let ds = [dist(&[0.5, 0.5]), dist(&[0.2, 0.3, 0.5])];
        assert_eq!(mean_distribution(&ds), Err(MeasureError::LengthMismatch));
    }

    #[test]
    fn entropy_uniform_is_one() {
        for c in 2..=18 {
            let u = PreferenceDistribution::uniform(c);
            assert!((u.entropy_normalized().unwrap() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn entropy_one_hot_is_zero() {
        let d = dist(&[0.0, 1.0, 0.0]);
        assert_eq!(d.entropy_normalized().unwrap(), 0.0);
    }

    #[test]
    fn entropy_matches_summation_oracle() {
        let d = dist(&[0.25, 0.75]);
        assert!((d.entropy_normalized().unwrap() - 0.81127812445913286).abs() < 1e-12);
    }

    #[test]
    fn entropy_single_category_is_undefined() {
        let d = dist(&[1.0]);
        assert_eq!(d.entropy_normalized(), Err(MeasureError::SingleCategory));
    }
}
