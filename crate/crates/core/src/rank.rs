//! Binary-relevance nDCG over top-k recommendation lists.

use crate::math;

/// nDCG@k with binary relevance.
///
/// `ranked` is the recommendation list in rank order (best first), `relevant`
/// the user's held-out items. A hit at rank r (1-based) gains `1/log2(r+1)`;
/// the ideal DCG places `min(|relevant|, k)` hits at the top. Returns 0 when
/// `relevant` is empty; the caller decides whether such users count toward
/// averages.
pub fn ndcg_at_k(ranked: &[u32], relevant: &[u32], k: usize) -> f64 {
    if relevant.is_empty() || k == 0 {
        return 0.0;
    }
    let mut dcg = 0.0;
    for (idx, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            dcg += 1.0 / math::log2(idx as f64 + 2.0);
        }
    }
    let ideal_hits = relevant.len().min(k);
    let mut idcg = 0.0;
    for idx in 0..ideal_hits {
        idcg += 1.0 / math::log2(idx as f64 + 2.0);
    }
    dcg / idcg
}
