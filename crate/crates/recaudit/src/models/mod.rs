//! Four implicit-feedback recommenders behind one train/score/top-k surface,
//! plus an identity-oracle pseudo-model for end-to-end calibration tests.
//!
//! All training is single-threaded and deterministic given the seed. Models
//! score every (retained user, catalog item) pair; recommendation lists
//! never contain training items and break score ties by ascending item id.

mod checkpoint;
mod identity;
mod knn;
mod mf;

pub use checkpoint::{load_model, save_model};
pub use identity::IdentityParams;
pub use knn::KnnParams;
pub use mf::{train_bpr, train_wrmf, MfParams, WrmfTrainInfo};

use std::collections::{BTreeMap, HashMap};

use recaudit_core::PreferenceDistribution;
use serde::{Deserialize, Serialize};

use crate::data::{ItemCatalog, ItemId, SplitDataset, UserId};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModelKind {
    UserKnn,
    ItemKnn,
    Bpr,
    Wrmf,
    IdentityOracle,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::UserKnn => "userknn",
            ModelKind::ItemKnn => "itemknn",
            ModelKind::Bpr => "bpr",
            ModelKind::Wrmf => "wrmf",
            ModelKind::IdentityOracle => "identity-oracle",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "userknn" => Ok(ModelKind::UserKnn),
            "itemknn" => Ok(ModelKind::ItemKnn),
            "bpr" => Ok(ModelKind::Bpr),
            "wrmf" => Ok(ModelKind::Wrmf),
            "identity-oracle" => Ok(ModelKind::IdentityOracle),
            other => Err(Error::Config(format!(
                "unknown model {other:?} (expected userknn|itemknn|bpr|wrmf|identity-oracle)"
            ))),
        }
    }
}

/// Hyperparameters for every trainer; only the block matching the model
/// kind is consulted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHyper {
    pub knn_neighbors: usize,
    pub bpr_factors: usize,
    pub bpr_learning_rate: f64,
    pub bpr_reg: f64,
    pub bpr_epochs: usize,
    pub wrmf_factors: usize,
    pub wrmf_reg: f64,
    pub wrmf_confidence_alpha: f64,
    pub wrmf_iterations: usize,
}

impl Default for ModelHyper {
    fn default() -> Self {
        Self {
            knn_neighbors: 50,
            bpr_factors: 64,
            bpr_learning_rate: 0.05,
            bpr_reg: 0.01,
            bpr_epochs: 30,
            wrmf_factors: 64,
            wrmf_reg: 0.01,
            wrmf_confidence_alpha: 40.0,
            wrmf_iterations: 15,
        }
    }
}

impl ModelHyper {
    /// Flat key=value snapshot embedded in checkpoints.
    pub fn snapshot_text(&self) -> String {
        format!(
            "knn_neighbors={}\nbpr_factors={}\nbpr_learning_rate={}\nbpr_reg={}\nbpr_epochs={}\nwrmf_factors={}\nwrmf_reg={}\nwrmf_confidence_alpha={}\nwrmf_iterations={}\n",
            self.knn_neighbors,
            self.bpr_factors,
            self.bpr_learning_rate,
            self.bpr_reg,
            self.bpr_epochs,
            self.wrmf_factors,
            self.wrmf_reg,
            self.wrmf_confidence_alpha,
            self.wrmf_iterations,
        )
    }
}

/// Compact index over the retained users and the catalog items.
#[derive(Debug, Clone)]
pub struct Interactions {
    pub users: Vec<UserId>,
    pub items: Vec<ItemId>,
    user_pos: HashMap<UserId, u32>,
    item_pos: HashMap<ItemId, u32>,
    /// Sorted distinct train item indices per user index.
    pub user_items: Vec<Vec<u32>>,
    /// Sorted distinct train user indices per item index.
    pub item_users: Vec<Vec<u32>>,
    /// Per user: (item index, row count), sorted by item. Counts exceed 1
    /// only on oversampled training data, where multiplicity carries the
    /// rebalancing signal into the trainers.
    pub user_item_counts: Vec<Vec<(u32, u32)>>,
    /// Per item: (user index, row count), sorted by user.
    pub item_user_counts: Vec<Vec<(u32, u32)>>,
    /// Every training row as (user index, item index), multiplicity kept.
    pub rows: Vec<(u32, u32)>,
}

impl Interactions {
    pub fn from_split(split: &SplitDataset) -> Self {
        let users: Vec<UserId> = split.users.keys().copied().collect();
        let items: Vec<ItemId> = split.catalog.item_ids().collect();
        let user_pos: HashMap<UserId, u32> = users
            .iter()
            .enumerate()
            .map(|(i, &u)| (u, i as u32))
            .collect();
        let item_pos: HashMap<ItemId, u32> = items
            .iter()
            .enumerate()
            .map(|(i, &it)| (it, i as u32))
            .collect();
        let mut user_items = vec![Vec::new(); users.len()];
        let mut item_users = vec![Vec::new(); items.len()];
        let mut rows = Vec::with_capacity(split.train.len());
        for it in &split.train {
            let (Some(&u), Some(&i)) = (user_pos.get(&it.user_id), item_pos.get(&it.item_id))
            else {
                continue;
            };
            user_items[u as usize].push(i);
            item_users[i as usize].push(u);
            rows.push((u, i));
        }
        let mut user_item_counts = Vec::with_capacity(user_items.len());
        for v in &mut user_items {
            v.sort_unstable();
            user_item_counts.push(run_lengths(v));
            v.dedup();
        }
        let mut item_user_counts = Vec::with_capacity(item_users.len());
        for v in &mut item_users {
            v.sort_unstable();
            item_user_counts.push(run_lengths(v));
            v.dedup();
        }
        Self {
            users,
            items,
            user_pos,
            item_pos,
            user_items,
            item_users,
            user_item_counts,
            item_user_counts,
            rows,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn user_index(&self, u: UserId) -> Option<usize> {
        self.user_pos.get(&u).map(|&i| i as usize)
    }

    pub fn item_index(&self, i: ItemId) -> Option<usize> {
        self.item_pos.get(&i).map(|&i| i as usize)
    }
}

fn run_lengths(sorted: &[u32]) -> Vec<(u32, u32)> {
    let mut out: Vec<(u32, u32)> = Vec::new();
    for &v in sorted {
        match out.last_mut() {
            Some((last, count)) if *last == v => *count += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

#[derive(Debug, Clone)]
pub enum Params {
    Knn(KnnParams),
    Mf(MfParams),
    Identity(IdentityParams),
}

/// A trained recommender: kind, reproducibility info, id maps and the
/// kind-specific parameters.
#[derive(Debug, Clone)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub seed: u64,
    pub hyper: ModelHyper,
    pub users: Vec<UserId>,
    pub items: Vec<ItemId>,
    pub params: Params,
    user_pos: HashMap<UserId, u32>,
    item_pos: HashMap<ItemId, u32>,
}

impl TrainedModel {
    pub(crate) fn assemble(
        kind: ModelKind,
        seed: u64,
        hyper: ModelHyper,
        users: Vec<UserId>,
        items: Vec<ItemId>,
        params: Params,
    ) -> Self {
        let user_pos = users
            .iter()
            .enumerate()
            .map(|(i, &u)| (u, i as u32))
            .collect();
        let item_pos = items
            .iter()
            .enumerate()
            .map(|(i, &it)| (it, i as u32))
            .collect();
        Self {
            kind,
            seed,
            hyper,
            users,
            items,
            params,
            user_pos,
            item_pos,
        }
    }

    pub fn n_users(&self) -> usize {
        self.users.len()
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    /// Scores every catalog item for one user, in `self.items` order.
    /// `history` is the user's training items (needed by the item-based
    /// scorer; the others ignore it).
    pub fn score_all(&self, user_id: UserId, history: &[ItemId]) -> Result<Vec<f64>> {
        let u = *self
            .user_pos
            .get(&user_id)
            .ok_or(Error::UnknownUser(user_id))? as usize;
        let history_idx: Vec<u32> = self.history_indices(history);
        Ok(match &self.params {
            Params::Knn(knn) => knn.score_all(u, &history_idx, self.n_items()),
            Params::Mf(mf) => mf.score_all(u, self.n_items()),
            Params::Identity(id) => id.score_all(u, self.n_items()),
        })
    }

    /// Single-pair score; convenience for tests.
    pub fn score(&self, user_id: UserId, item_id: ItemId, history: &[ItemId]) -> Result<f64> {
        let i = *self
            .item_pos
            .get(&item_id)
            .ok_or_else(|| Error::Checkpoint(format!("item {item_id} unknown to model")))?
            as usize;
        Ok(self.score_all(user_id, history)?[i])
    }

    fn history_indices(&self, history: &[ItemId]) -> Vec<u32> {
        let mut idx: Vec<u32> = history
            .iter()
            .filter_map(|it| self.item_pos.get(it).copied())
            .collect();
        idx.sort_unstable();
        idx
    }

    /// The k highest-scoring items outside the user's training history.
    /// Ties break toward the lower item id; the list is flagged truncated
    /// when fewer than k candidates exist.
    pub fn recommend_topk(
        &self,
        user_id: UserId,
        k: usize,
        history: &[ItemId],
    ) -> Result<TopKList> {
        let scores = self.score_all(user_id, history)?;
        let held: Vec<u32> = self.history_indices(history);
        let mut candidates: Vec<(u32, f64)> = Vec::with_capacity(self.n_items());
        for (i, &s) in scores.iter().enumerate() {
            if held.binary_search(&(i as u32)).is_err() {
                candidates.push((i as u32, s));
            }
        }
        candidates.sort_unstable_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let truncated = candidates.len() < k;
        candidates.truncate(k);
        Ok(TopKList {
            user_id,
            items: candidates
                .into_iter()
                .map(|(i, s)| (self.items[i as usize], s))
                .collect(),
            truncated,
        })
    }

    /// Identity-oracle models predict the user's own training genre mix
    /// rather than deriving it from recommended items.
    pub fn oracle_preference(&self, user_id: UserId) -> Option<PreferenceDistribution> {
        match &self.params {
            Params::Identity(id) => {
                let u = *self.user_pos.get(&user_id)? as usize;
                PreferenceDistribution::normalize(&id.prefs[u]).ok()
            }
            _ => None,
        }
    }
}

/// Ranked recommendations for one user; scores are non-increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopKList {
    pub user_id: UserId,
    pub items: Vec<(ItemId, f64)>,
    pub truncated: bool,
}

impl TopKList {
    pub fn item_ids(&self) -> Vec<ItemId> {
        self.items.iter().map(|(i, _)| *i).collect()
    }
}

/// Category distribution of a recommendation list: unweighted, rank-agnostic
/// sum of the recommended items' genre vectors, normalized.
pub fn predicted_preference(
    topk: &TopKList,
    catalog: &ItemCatalog,
) -> Result<PreferenceDistribution> {
    if topk.items.is_empty() {
        return Err(Error::EmptyList(topk.user_id));
    }
    let mut acc = vec![0.0; catalog.genre_count()];
    for (item, _) in &topk.items {
        catalog.accumulate(*item, &mut acc);
    }
    Ok(PreferenceDistribution::normalize(&acc)?)
}

/// Trains a model of the requested kind on the split's training side.
pub fn train(
    split: &SplitDataset,
    kind: ModelKind,
    hyper: &ModelHyper,
    seed: u64,
) -> Result<TrainedModel> {
    let inter = Interactions::from_split(split);
    if inter.n_users() == 0 || inter.n_items() == 0 {
        return Err(Error::EmptyAfterFilter);
    }
    let params = match kind {
        ModelKind::UserKnn => Params::Knn(knn::train_knn(&inter, hyper.knn_neighbors, true)),
        ModelKind::ItemKnn => Params::Knn(knn::train_knn(&inter, hyper.knn_neighbors, false)),
        ModelKind::Bpr => Params::Mf(train_bpr(&inter, hyper, seed)?),
        ModelKind::Wrmf => Params::Mf(train_wrmf(&inter, hyper, seed)?.0),
        ModelKind::IdentityOracle => {
            Params::Identity(identity::build_identity(&inter, &split.catalog)?)
        }
    };
    Ok(TrainedModel::assemble(
        kind,
        seed,
        hyper.clone(),
        inter.users,
        inter.items,
        params,
    ))
}

/// Per-user train histories keyed by user id, shared by scoring and audits.
pub fn train_histories(split: &SplitDataset) -> BTreeMap<UserId, Vec<ItemId>> {
    split.train_items_by_user()
}
