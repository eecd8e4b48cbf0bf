//! User- and item-based k-nearest-neighbor recommenders over consumption
//! vectors.
//!
//! Similarity is cosine over row-count vectors. Preprocessed data has one
//! row per (user, item), so the counts are binary and this reduces to
//! `sim(a, b) = |A ∩ B| / sqrt(|A| · |B|)`; on oversampled training data
//! the duplicated rows raise the counts and shift the similarities, which
//! is how rebalancing reaches the model. Scoring is the similarity sum
//! over the k nearest neighbors that consumed the candidate item (the
//! common implicit-feedback convention; no weighted average).

use super::Interactions;

/// Neighbor lists plus the training consumption needed at scoring time.
#[derive(Debug, Clone, PartialEq)]
pub struct KnnParams {
    pub user_based: bool,
    pub k_neighbors: usize,
    /// Per user (user-based) or per item (item-based): the k most similar
    /// entities as (index, similarity), similarity descending, index
    /// ascending on ties.
    pub neighbors: Vec<Vec<(u32, f64)>>,
    /// Sorted train item indices per user index.
    pub user_items: Vec<Vec<u32>>,
    /// Item-based only: for item j, the (i, sim) pairs where j appears in
    /// i's neighbor list. Rebuilt after load, not serialized.
    pub(crate) reverse: Vec<Vec<(u32, f64)>>,
}

impl KnnParams {
    pub(crate) fn finalize(
        user_based: bool,
        k_neighbors: usize,
        neighbors: Vec<Vec<(u32, f64)>>,
        user_items: Vec<Vec<u32>>,
    ) -> Self {
        let reverse = if user_based {
            Vec::new()
        } else {
            let mut rev: Vec<Vec<(u32, f64)>> = vec![Vec::new(); neighbors.len()];
            for (i, nbrs) in neighbors.iter().enumerate() {
                for &(j, sim) in nbrs {
                    rev[j as usize].push((i as u32, sim));
                }
            }
            rev
        };
        Self {
            user_based,
            k_neighbors,
            neighbors,
            user_items,
            reverse,
        }
    }

    pub(crate) fn score_all(&self, user: usize, history: &[u32], n_items: usize) -> Vec<f64> {
        let mut scores = vec![0.0; n_items];
        if self.user_based {
            for &(v, sim) in &self.neighbors[user] {
                for &item in &self.user_items[v as usize] {
                    scores[item as usize] += sim;
                }
            }
        } else {
            // score(u, i) = Σ sim(i, j) over neighbors j of i inside u's
            // history, accumulated through the reverse lists
            for &j in history {
                for &(i, sim) in &self.reverse[j as usize] {
                    scores[i as usize] += sim;
                }
            }
        }
        scores
    }
}

/// Trains a KNN model: `user_based` selects user-user similarities, else
/// item-item. Deterministic; ties in the neighbor ranking break toward the
/// lower index.
pub fn train_knn(inter: &Interactions, k_neighbors: usize, user_based: bool) -> KnnParams {
    let (rows, cols) = if user_based {
        (&inter.user_item_counts, &inter.item_user_counts)
    } else {
        (&inter.item_user_counts, &inter.user_item_counts)
    };
    let n = rows.len();
    let norms_sq: Vec<f64> = rows
        .iter()
        .map(|r| r.iter().map(|&(_, c)| (c as f64) * (c as f64)).sum::<f64>())
        .collect();
    let mut neighbors = Vec::with_capacity(n);
    let mut dot: Vec<f64> = vec![0.0; n];
    let mut touched: Vec<u32> = Vec::new();
    for a in 0..n {
        touched.clear();
        for &(mid, c_a) in &rows[a] {
            for &(b, c_b) in &cols[mid as usize] {
                if b as usize == a {
                    continue;
                }
                if dot[b as usize] == 0.0 {
                    touched.push(b);
                }
                dot[b as usize] += c_a as f64 * c_b as f64;
            }
        }
        let mut sims: Vec<(u32, f64)> = touched
            .iter()
            .map(|&b| {
                let sim = dot[b as usize] / (norms_sq[a] * norms_sq[b as usize]).sqrt();
                (b, sim)
            })
            .collect();
        for &b in &touched {
            dot[b as usize] = 0.0;
        }
        sims.sort_unstable_by(|x, y| y.1.total_cmp(&x.1).then_with(|| x.0.cmp(&y.0)));
        sims.truncate(k_neighbors);
        neighbors.push(sims);
    }
    KnnParams::finalize(user_based, k_neighbors, neighbors, inter.user_items.clone())
}
