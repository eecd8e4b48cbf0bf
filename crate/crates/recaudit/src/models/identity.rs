//! Identity-oracle pseudo-model: a diagnostic recommender whose predicted
//! category distribution is, by definition, the user's own training genre
//! mix. Its item lists rank unseen items by cosine similarity between the
//! item's genre vector and that mix, so ranking metrics stay meaningful,
//! but audits read the predicted preference straight from the stored mix.
//! An end-to-end audit of this model answers "what would the measures be
//! under perfect calibration?" and must drive them to zero.

use recaudit_core::PreferenceDistribution;

use super::Interactions;
use crate::data::ItemCatalog;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityParams {
    /// Raw (unsmoothed) actual-preference weights per user index.
    pub prefs: Vec<Vec<f64>>,
    /// Catalog weight vector per item index.
    pub item_vecs: Vec<Vec<f64>>,
}

impl IdentityParams {
    pub(crate) fn score_all(&self, user: usize, n_items: usize) -> Vec<f64> {
        let p = &self.prefs[user];
        let p_norm = norm(p);
        (0..n_items)
            .map(|i| {
                let v = &self.item_vecs[i];
                let n = p_norm * norm(v);
                if n > 0.0 {
                    dot(p, v) / n
                } else {
                    0.0
                }
            })
            .collect()
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub(crate) fn build_identity(
    inter: &Interactions,
    catalog: &ItemCatalog,
) -> Result<IdentityParams> {
    let item_vecs: Vec<Vec<f64>> = inter
        .items
        .iter()
        .map(|&it| catalog.weight_vector(it).expect("catalog item"))
        .collect();
    let mut prefs = Vec::with_capacity(inter.n_users());
    for (u, items) in inter.user_item_counts.iter().enumerate() {
        if items.is_empty() {
            return Err(Error::NoTrainingHistory(inter.users[u]));
        }
        let mut acc = vec![0.0; catalog.genre_count()];
        for &(i, count) in items {
            for (a, w) in acc.iter_mut().zip(&item_vecs[i as usize]) {
                *a += w * count as f64;
            }
        }
        let p = PreferenceDistribution::normalize(&acc)?;
        prefs.push(p.weights().to_vec());
    }
    Ok(IdentityParams { prefs, item_vecs })
}

#[cfg(test)]
mod tests {
    use crate::models::tests::tiny_split;
    use crate::models::{train, ModelHyper, ModelKind};

    #[test]
    fn oracle_preference_matches_training_mix() {
        let split = tiny_split(&[(1, 1), (1, 2), (2, 3)], 3);
        let model = train(&split, ModelKind::IdentityOracle, &ModelHyper::default(), 0).unwrap();
        let p = model.oracle_preference(1).unwrap();
        // tiny_split items carry Action+Comedy each, so the mix is 0.5/0.5
        assert_eq!(p.weights(), &[0.5, 0.5]);
        assert!(model.oracle_preference(99).is_none());
    }

    #[test]
    fn non_oracle_models_have_no_oracle_preference() {
        let split = tiny_split(&[(1, 1), (2, 2)], 2);
        let model = train(&split, ModelKind::UserKnn, &ModelHyper::default(), 0).unwrap();
        assert!(model.oracle_preference(1).is_none());
    }
}
