//! Audit measures over user preference populations.
//!
//! Notation used below: `p`/`q` are one user's actual and predicted
//! category distributions, `p_bar`/`q_bar` the population means of each.
//! Divergence-based measures expect strictly positive (smoothed) inputs;
//! entropy-based ones work on raw distributions.
//!
//! Per user:
//!
//! ```text
//! miscalibration      MC = KL(p||q)
//! bias effect         BE = KL(p||q_bar) - KL(p||p_bar)
//! variance effect     VE = KL(p||q) - KL(p||q_bar)
//! stereotype          ST = JS(p||p_bar) - JS(q||q_bar)
//! inflated diversity  IDV = DV(p) - DV(q)
//! atypicality         AT = JS(p||p_bar)
//! diversity           DV = normalized entropy of p
//! ```
//!
//! `BE + VE = KL(p||q) - KL(p||p_bar)` holds exactly; it is the identity the
//! property tests pin down. Both effects are signed, as is ST: a negative
//! per-user stereotype means the prediction deviates from the typical
//! preference more than the user actually does (inverse stereotype).
//!
//! System level:
//!
//! ```text
//! MC(P,Q)  = mean_u KL(p_u||q_u)
//! bias     = KL(p_bar||q_bar)
//! variance = mean_u KL(q_bar||q_u)
//! ST(P,Q)  = 1 - mean_u JS(q_u||q_bar) / mean_u JS(p_u||p_bar)
//! ```
//!
//! The bias + variance sum matches mean miscalibration only when `q_bar` is
//! a normalized geometric mean; with the arithmetic mean used here the gap
//! is reported as `decomposition_residual` instead of being forced to zero.

use serde::{Deserialize, Serialize};

use crate::dist::{mean_distribution, PreferenceDistribution};
use crate::error::MeasureError;

/// All per-user audit measures for one user.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAudit {
    pub user_id: u32,
    /// JS distance of the user's actual preference from the typical one; >= 0.
    pub atypicality: f64,
    /// Normalized entropy of the actual preference, in [0, 1].
    pub diversity: f64,
    /// KL(p||q); >= 0.
    pub miscalibration: f64,
    /// Signed; error change from predicting the typical predicted preference
    /// instead of the typical actual one.
    pub bias_effect: f64,
    /// Signed; error change from per-user prediction variability.
    pub variance_effect: f64,
    /// Signed; positive means the prediction is pulled toward the typical
    /// preference more than the user's actual preference is.
    pub stereotype: f64,
    /// Signed; DV(p) - DV(q). Negative when the prediction is MORE diverse
    /// than the user's actual preference (the formula is kept as defined,
    /// so "inflated" predictions show up as negative values).
    pub inflated_diversity: f64,
    /// Binary-relevance nDCG@k against the user's held-out items.
    pub ndcg_at_k: f64,
}

/// System-level aggregates over the audited population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemAudit {
    /// Mean per-user KL(p||q).
    pub miscalibration_mean: f64,
    /// KL(p_bar||q_bar).
    pub bias_term: f64,
    /// Mean KL(q_bar||q_u).
    pub variance_term: f64,
    /// miscalibration_mean - bias_term - variance_term; reported, not forced.
    pub decomposition_residual: f64,
    /// 1 - predicted spread / actual spread; <= 1, positive means
    /// predictions are concentrated toward the typical preference.
    pub stereotype: f64,
    /// variance_term / (bias_term + variance_term); None when the
    /// denominator is zero.
    pub bias_variance_ratio: Option<f64>,
    /// Mean actual preference over the audited users.
    pub mean_actual: PreferenceDistribution,
    /// Mean predicted preference over the audited users.
    pub mean_predicted: PreferenceDistribution,
}

/// KL between smoothed actual and predicted preferences (per-user
/// miscalibration). Smooths both sides with `alpha` before the divergence.
pub fn miscalibration_user(
    p: &PreferenceDistribution,
    q: &PreferenceDistribution,
    alpha: f64,
) -> Result<f64, MeasureError> {
    p.smooth(alpha)?.kl_divergence(&q.smooth(alpha)?)
}

/// Signed bias and variance effects for one user. Inputs must already be
/// strictly positive (smoothed); `p_bar`/`q_bar` are the population means.
pub fn effects_user(
    p: &PreferenceDistribution,
    q: &PreferenceDistribution,
    p_bar: &PreferenceDistribution,
    q_bar: &PreferenceDistribution,
) -> Result<(f64, f64), MeasureError> {
    let kl_p_qbar = p.kl_divergence(q_bar)?;
    let bias_effect = kl_p_qbar - p.kl_divergence(p_bar)?;
    let variance_effect = p.kl_divergence(q)? - kl_p_qbar;
    Ok((bias_effect, variance_effect))
}

/// Per-user stereotype: `JS(p||p_bar) - JS(q||q_bar)`.
pub fn stereotype_user(
    p: &PreferenceDistribution,
    q: &PreferenceDistribution,
    p_bar: &PreferenceDistribution,
    q_bar: &PreferenceDistribution,
) -> Result<f64, MeasureError> {
    Ok(p.js_divergence(p_bar)? - q.js_divergence(q_bar)?)
}

/// Per-user inflated diversity: `DV(p) - DV(q)`.
pub fn inflated_diversity_user(
    p: &PreferenceDistribution,
    q: &PreferenceDistribution,
) -> Result<f64, MeasureError> {
    if p.len() != q.len() {
        return Err(MeasureError::LengthMismatch);
    }
    Ok(p.entropy_normalized()? - q.entropy_normalized()?)
}

/// Deviation of a user's preference from the typical one: `JS(p||p_bar)`.
/// Pass `(q, q_bar)` for the predictive variant.
pub fn atypicality_user(
    p: &PreferenceDistribution,
    p_bar: &PreferenceDistribution,
) -> Result<f64, MeasureError> {
    p.js_divergence(p_bar)
}

/// Diversity of a preference: normalized entropy in [0, 1].
pub fn diversity_user(p: &PreferenceDistribution) -> Result<f64, MeasureError> {
    p.entropy_normalized()
}

/// Bias–variance decomposition of system miscalibration, plus the residual
/// between the decomposition and the mean per-user miscalibration.
///
/// `ps` and `qs` are aligned by user and must be strictly positive.
pub fn decompose_system(
    ps: &[PreferenceDistribution],
    qs: &[PreferenceDistribution],
) -> Result<SystemAudit, MeasureError> {
    if ps.is_empty() {
        return Err(MeasureError::EmptyInput);
    }
    if ps.len() != qs.len() {
        return Err(MeasureError::LengthMismatch);
    }
    let p_bar = mean_distribution(ps)?;
    let q_bar = mean_distribution(qs)?;
    let n = ps.len() as f64;

    let mut mc_sum = 0.0;
    let mut var_sum = 0.0;
    for (p, q) in ps.iter().zip(qs) {
        mc_sum += p.kl_divergence(q)?;
        var_sum += q_bar.kl_divergence(q)?;
    }
    let miscalibration_mean = mc_sum / n;
    let bias_term = p_bar.kl_divergence(&q_bar)?;
    let variance_term = var_sum / n;
    let total = bias_term + variance_term;

    Ok(SystemAudit {
        miscalibration_mean,
        bias_term,
        variance_term,
        decomposition_residual: miscalibration_mean - bias_term - variance_term,
        stereotype: 0.0,
        bias_variance_ratio: (total > 0.0).then(|| variance_term / total),
        mean_actual: p_bar,
        mean_predicted: q_bar,
    })
}

/// System-level stereotype: `1 - E[JS(q||q_bar)] / E[JS(p||p_bar)]`.
///
/// 0 when predicted preferences spread as much as actual ones, 1 when every
/// user receives the same prediction. Errors when the actual preferences
/// have no spread at all.
pub fn stereotype_system(
    ps: &[PreferenceDistribution],
    qs: &[PreferenceDistribution],
) -> Result<f64, MeasureError> {
    if ps.is_empty() {
        return Err(MeasureError::EmptyInput);
    }
    if ps.len() != qs.len() {
        return Err(MeasureError::LengthMismatch);
    }
    let p_bar = mean_distribution(ps)?;
    let q_bar = mean_distribution(qs)?;
    let mut actual_spread = 0.0;
    let mut predicted_spread = 0.0;
    for (p, q) in ps.iter().zip(qs) {
        actual_spread += p.js_divergence(&p_bar)?;
        predicted_spread += q.js_divergence(&q_bar)?;
    }
    if actual_spread <= 0.0 {
        return Err(MeasureError::ZeroActualSpread);
    }
    Ok(1.0 - predicted_spread / actual_spread)
}

/// Full system audit: decomposition plus stereotype in one pass.
pub fn system_audit(
    ps: &[PreferenceDistribution],
    qs: &[PreferenceDistribution],
) -> Result<SystemAudit, MeasureError> {
    let mut audit = decompose_system(ps, qs)?;
    audit.stereotype = stereotype_system(ps, qs)?;
    Ok(audit)
}

/// Bias disparity on one category from precomputed group means:
/// `1 - q_bar(c) / p_bar(c)`.
///
/// Positive when the predicted mass on the category falls short of the
/// actual mass, negative when it is amplified.
pub fn bias_disparity_from_means(
    p_bar: &PreferenceDistribution,
    q_bar: &PreferenceDistribution,
    category: usize,
) -> Result<f64, MeasureError> {
    if p_bar.len() != q_bar.len() || category >= p_bar.len() {
        return Err(MeasureError::LengthMismatch);
    }
    let actual = p_bar.get(category);
    if actual <= 0.0 {
        return Err(MeasureError::ZeroActualMass);
    }
    Ok(1.0 - q_bar.get(category) / actual)
}

/// Bias disparity on one category for a group of users, computing the group
/// means internally.
pub fn bias_disparity(
    ps: &[PreferenceDistribution],
    qs: &[PreferenceDistribution],
    category: usize,
) -> Result<f64, MeasureError> {
    if ps.len() != qs.len() {
        return Err(MeasureError::LengthMismatch);
    }
    let p_bar = mean_distribution(ps)?;
    let q_bar = mean_distribution(qs)?;
    bias_disparity_from_means(&p_bar, &q_bar, category)
}

/// The population means `(p_bar, q_bar)` of aligned actual/predicted sets.
pub fn population_means(
    ps: &[PreferenceDistribution],
    qs: &[PreferenceDistribution],
) -> Result<(PreferenceDistribution, PreferenceDistribution), MeasureError> {
    if ps.len() != qs.len() {
        return Err(MeasureError::LengthMismatch);
    }
    Ok((mean_distribution(ps)?, mean_distribution(qs)?))
}
