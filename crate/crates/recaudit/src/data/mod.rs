//! Dataset types, preprocessing and the per-user chronological split.
//!
//! The raw inputs follow the MovieLens 1M layout: `ratings.dat` with
//! `UserID::MovieID::Rating::Timestamp` lines, `movies.dat` with
//! `MovieID::Title::Genre1|Genre2|...`, and `users.dat` with
//! `UserID::Gender::Age::Occupation::Zip`. Preprocessing binarizes ratings
//! (keep >= `min_rating` as implicit positives), drops users below
//! `min_interactions`, and prunes items left without interactions, applied
//! once in that order with no fixed-point iteration.

mod parse;
pub mod snapshot;

pub use parse::{parse_catalog, parse_interactions, parse_users, RawCatalogEntry};

use std::collections::{BTreeMap, HashMap, HashSet};

use recaudit_core::PreferenceDistribution;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type UserId = u32;
pub type ItemId = u32;

/// One implicit-feedback record.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Interaction {
    pub user_id: UserId,
    pub item_id: ItemId,
    pub rating: u8,
    pub timestamp: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Gender {
    M,
    F,
}

impl Gender {
    pub fn group_label(self) -> &'static str {
        match self {
            Gender::M => "men",
            Gender::F => "women",
        }
    }
}

/// A user row with demographic attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserRecord {
    pub user_id: UserId,
    pub gender: Gender,
    /// MovieLens age code: one of {1, 18, 25, 35, 45, 50, 56}.
    pub age_code: u8,
}

impl UserRecord {
    /// "younger" below the cutoff age code, "older" at or above it.
    pub fn age_group_label(&self, cutoff: u8) -> &'static str {
        if self.age_code < cutoff {
            "younger"
        } else {
            "older"
        }
    }
}

/// Item catalog: a frozen ordered genre list plus, per item, the sorted
/// indices of its listed genres. Each item's category weights are uniform
/// over its listed genres (1/k each), so only the indices are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ItemCatalog {
    genres: Vec<String>,
    items: BTreeMap<ItemId, Vec<u16>>,
}

impl ItemCatalog {
    /// Builds a catalog from parsed entries, discovering the genre set from
    /// the data and freezing it in sorted order.
    pub fn from_entries(entries: &[RawCatalogEntry]) -> Self {
        let mut names: Vec<String> = entries
            .iter()
            .flat_map(|e| e.genres.iter().cloned())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        names.sort();
        let index: HashMap<&str, u16> = names
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i as u16))
            .collect();
        let items = entries
            .iter()
            .map(|e| {
                let mut idx: Vec<u16> = e.genres.iter().map(|g| index[g.as_str()]).collect();
                idx.sort_unstable();
                idx.dedup();
                (e.item_id, idx)
            })
            .collect();
        Self {
            genres: names,
            items,
        }
    }

    /// Rebuilds a catalog against an already-frozen genre list (snapshot
    /// loading). Unknown genre names are an error.
    pub fn with_frozen_genres(
        genres: Vec<String>,
        item_genres: impl IntoIterator<Item = (ItemId, Vec<String>)>,
    ) -> std::result::Result<Self, String> {
        let index: HashMap<&str, u16> = genres
            .iter()
            .enumerate()
            .map(|(i, g)| (g.as_str(), i as u16))
            .collect();
        let mut items = BTreeMap::new();
        for (item_id, gs) in item_genres {
            let mut idx = Vec::with_capacity(gs.len());
            for g in &gs {
                match index.get(g.as_str()) {
                    Some(&i) => idx.push(i),
                    None => return Err(format!("genre {g:?} not in frozen genre list")),
                }
            }
            idx.sort_unstable();
            idx.dedup();
            items.insert(item_id, idx);
        }
        Ok(Self { genres, items })
    }

    pub fn genres(&self) -> &[String] {
        &self.genres
    }

    pub fn genre_count(&self) -> usize {
        self.genres.len()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.items.contains_key(&item)
    }

    pub fn item_ids(&self) -> impl Iterator<Item = ItemId> + '_ {
        self.items.keys().copied()
    }

    pub fn genre_indices(&self, item: ItemId) -> Option<&[u16]> {
        self.items.get(&item).map(|v| v.as_slice())
    }

    pub fn genre_names(&self, item: ItemId) -> Option<Vec<&str>> {
        self.items.get(&item).map(|idx| {
            idx.iter()
                .map(|&i| self.genres[i as usize].as_str())
                .collect()
        })
    }

    /// Dense per-category weight vector for one item: 1/k on each of its k
    /// listed genres.
    pub fn weight_vector(&self, item: ItemId) -> Option<Vec<f64>> {
        let idx = self.items.get(&item)?;
        let mut w = vec![0.0; self.genres.len()];
        let share = 1.0 / idx.len() as f64;
        for &i in idx {
            w[i as usize] = share;
        }
        Some(w)
    }

    /// Adds the item's weights into `acc`; returns false for unknown items.
    pub fn accumulate(&self, item: ItemId, acc: &mut [f64]) -> bool {
        match self.items.get(&item) {
            Some(idx) => {
                let share = 1.0 / idx.len() as f64;
                for &i in idx {
                    acc[i as usize] += share;
                }
                true
            }
            None => false,
        }
    }

    /// Keeps only `retain`ed items, then drops genres no longer carried by
    /// any item (re-indexing the weight vectors accordingly).
    fn pruned(&self, retain: &HashSet<ItemId>) -> Self {
        let kept: BTreeMap<ItemId, Vec<u16>> = self
            .items
            .iter()
            .filter(|(id, _)| retain.contains(id))
            .map(|(id, idx)| (*id, idx.clone()))
            .collect();
        let mut used = vec![false; self.genres.len()];
        for idx in kept.values() {
            for &i in idx {
                used[i as usize] = true;
            }
        }
        if used.iter().all(|&u| u) {
            return Self {
                genres: self.genres.clone(),
                items: kept,
            };
        }
        let mut remap = vec![u16::MAX; self.genres.len()];
        let mut genres = Vec::new();
        for (i, name) in self.genres.iter().enumerate() {
            if used[i] {
                remap[i] = genres.len() as u16;
                genres.push(name.clone());
            }
        }
        let items = kept
            .into_iter()
            .map(|(id, idx)| (id, idx.iter().map(|&i| remap[i as usize]).collect()))
            .collect();
        Self { genres, items }
    }
}

/// Interactions, catalog and user table after preprocessing.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub interactions: Vec<Interaction>,
    pub catalog: ItemCatalog,
    pub users: BTreeMap<UserId, UserRecord>,
}

/// Counts around the preprocessing funnel, for manifests and logs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PreprocessStats {
    pub raw_interactions: usize,
    pub after_dedup: usize,
    pub after_binarize: usize,
    pub interactions: usize,
    pub users: usize,
    pub items: usize,
    pub dropped_users: usize,
    pub warnings: Vec<String>,
}

/// Applies the preprocessing funnel: dedup (keep the latest timestamp per
/// user-item pair), binarize at `min_rating`, drop users with fewer than
/// `min_interactions` positives, prune items without interactions.
pub fn preprocess(
    interactions: Vec<Interaction>,
    catalog: ItemCatalog,
    users: Vec<UserRecord>,
    min_rating: u8,
    min_interactions: usize,
) -> Result<(Dataset, PreprocessStats)> {
    let raw_interactions = interactions.len();
    let user_table: BTreeMap<UserId, UserRecord> =
        users.into_iter().map(|u| (u.user_id, u)).collect();

    let mut warnings = Vec::new();
    let mut unknown_item = 0usize;
    let mut unknown_user = 0usize;

    // Dedup keeps the record with the latest timestamp; ties fall to the
    // higher rating, then to the later input row.
    let mut dedup: HashMap<(UserId, ItemId), Interaction> = HashMap::new();
    for it in interactions {
        if !catalog.contains(it.item_id) {
            unknown_item += 1;
            continue;
        }
        if !user_table.contains_key(&it.user_id) {
            unknown_user += 1;
            continue;
        }
        dedup
            .entry((it.user_id, it.item_id))
            .and_modify(|old| {
                if (it.timestamp, it.rating) >= (old.timestamp, old.rating) {
                    *old = it;
                }
            })
            .or_insert(it);
    }
    if unknown_item > 0 {
        warnings.push(format!(
            "{unknown_item} interactions on items missing from the catalog"
        ));
    }
    if unknown_user > 0 {
        warnings.push(format!(
            "{unknown_user} interactions by users missing from the user table"
        ));
    }
    let after_dedup = dedup.len();

    let mut kept: Vec<Interaction> = dedup
        .into_values()
        .filter(|it| it.rating >= min_rating)
        .collect();
    let after_binarize = kept.len();

    let mut per_user: HashMap<UserId, usize> = HashMap::new();
    for it in &kept {
        *per_user.entry(it.user_id).or_default() += 1;
    }
    let retained_users: HashSet<UserId> = per_user
        .iter()
        .filter(|(_, &n)| n >= min_interactions)
        .map(|(&u, _)| u)
        .collect();
    let dropped_users = per_user.len() - retained_users.len();
    kept.retain(|it| retained_users.contains(&it.user_id));

    if kept.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }

    let live_items: HashSet<ItemId> = kept.iter().map(|it| it.item_id).collect();
    let catalog = catalog.pruned(&live_items);

    // canonical order: (user, timestamp, item)
    kept.sort_unstable_by_key(|it| (it.user_id, it.timestamp, it.item_id));

    let users: BTreeMap<UserId, UserRecord> = user_table
        .into_iter()
        .filter(|(u, _)| retained_users.contains(u))
        .collect();

    let stats = PreprocessStats {
        raw_interactions,
        after_dedup,
        after_binarize,
        interactions: kept.len(),
        users: users.len(),
        items: catalog.len(),
        dropped_users,
        warnings,
    };
    Ok((
        Dataset {
            interactions: kept,
            catalog,
            users,
        },
        stats,
    ))
}

/// A per-user chronological train/test split.
#[derive(Debug, Clone)]
pub struct SplitDataset {
    pub train: Vec<Interaction>,
    pub test: Vec<Interaction>,
    pub catalog: ItemCatalog,
    pub users: BTreeMap<UserId, UserRecord>,
    /// Users whose test side came out empty (rounding edge).
    pub empty_test_users: Vec<UserId>,
}

/// Splits each user's history chronologically: the first
/// `ceil(train_ratio · n)` interactions (ordered by timestamp, ties broken
/// by ascending item id) go to train, the rest to test.
pub fn chronological_split(dataset: Dataset, train_ratio: f64) -> Result<SplitDataset> {
    if !(train_ratio > 0.0 && train_ratio < 1.0) {
        return Err(Error::InvalidRatio(train_ratio));
    }
    let Dataset {
        interactions,
        catalog,
        users,
    } = dataset;

    let mut by_user: BTreeMap<UserId, Vec<Interaction>> = BTreeMap::new();
    for it in interactions {
        by_user.entry(it.user_id).or_default().push(it);
    }

    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut empty_test_users = Vec::new();
    for (user, mut rows) in by_user {
        rows.sort_unstable_by_key(|it| (it.timestamp, it.item_id));
        let n = rows.len();
        // ceil with a small slack so that exact products like 0.8·10 do not
        // tip over from float noise
        let n_train = ((train_ratio * n as f64) - 1e-9).ceil().max(1.0) as usize;
        let n_train = n_train.min(n);
        if n_train == n {
            empty_test_users.push(user);
        }
        test.extend(rows.split_off(n_train));
        train.extend(rows);
    }
    Ok(SplitDataset {
        train,
        test,
        catalog,
        users,
        empty_test_users,
    })
}

impl SplitDataset {
    /// Training item ids per user, ascending.
    pub fn train_items_by_user(&self) -> BTreeMap<UserId, Vec<ItemId>> {
        let mut map: BTreeMap<UserId, Vec<ItemId>> = BTreeMap::new();
        for it in &self.train {
            map.entry(it.user_id).or_default().push(it.item_id);
        }
        for items in map.values_mut() {
            items.sort_unstable();
        }
        map
    }

    /// Held-out item ids per user, ascending.
    pub fn test_items_by_user(&self) -> BTreeMap<UserId, Vec<ItemId>> {
        let mut map: BTreeMap<UserId, Vec<ItemId>> = BTreeMap::new();
        for it in &self.test {
            map.entry(it.user_id).or_default().push(it.item_id);
        }
        for items in map.values_mut() {
            items.sort_unstable();
        }
        map
    }
}

/// A user's actual preference: the normalized sum of the category weight
/// vectors of their training items.
pub fn actual_preference(
    user_id: UserId,
    train_items: &[ItemId],
    catalog: &ItemCatalog,
) -> Result<PreferenceDistribution> {
    if train_items.is_empty() {
        return Err(Error::NoTrainingHistory(user_id));
    }
    let mut acc = vec![0.0; catalog.genre_count()];
    for &item in train_items {
        catalog.accumulate(item, &mut acc);
    }
    Ok(PreferenceDistribution::normalize(&acc)?)
}
