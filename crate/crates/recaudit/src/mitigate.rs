//! Stereotype-driven oversampling: bin users by their individual stereotype,
//! oversample stereotyped users' training interactions with linearly
//! increasing rates, retrain with unchanged hyperparameters, and compare the
//! before/after audits on the untouched test split.
//!
//! Binning: users sort ascending by stereotype. Bin 0 collects every user
//! with ST <= 0 (inverse-stereotyped users are exempt from oversampling and
//! zero-stereotype users join them); the bin count is chosen as
//! `max(2, round(N / N_inv))` so that bin 0 is exactly the inverse-
//! stereotyped users and the remaining users split into equal contiguous
//! bins, most-stereotyped last. Bin k >= 1 receives rate `1 + b·k`.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::audit::AuditReport;
use crate::config::RunConfig;
use crate::data::{Interaction, SplitDataset, UserId};
use crate::error::{Error, Result};
use crate::models::train;

/// Ordered user bins; `bins[0]` holds the exempt (ST <= 0) users and may be
/// empty only on the override path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StereotypeBins {
    pub bins: Vec<Vec<UserId>>,
    pub inverse_count: usize,
}

/// Sorts users ascending by stereotype and partitions them.
///
/// With inverse-stereotyped users present, the bin count n follows
/// `max(2, round(N / N_inv))`: bin 0 takes the first `N_inv` users (all
/// non-positive stereotype) and the rest split into n-1 contiguous
/// equal-sized bins, the last absorbing the remainder. Without any
/// inverse-stereotyped users, `n_override` must supply the bin count; bin 0
/// stays empty and nobody is exempt.
pub fn bin_users_by_stereotype(
    stereotypes: &[(UserId, f64)],
    n_override: Option<usize>,
) -> Result<StereotypeBins> {
    let mut sorted: Vec<(UserId, f64)> = stereotypes.to_vec();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));
    let n_total = sorted.len();
    let n_inv = sorted.iter().filter(|(_, st)| *st <= 0.0).count();

    let (exempt, stereotyped_bins) = if n_inv > 0 {
        let n = ((n_total as f64 / n_inv as f64).round() as usize).max(2);
        (n_inv, n - 1)
    } else {
        match n_override {
            Some(n) if n > 0 => (0, n),
            _ => return Err(Error::NoInverseStereotyped),
        }
    };

    let mut bins = Vec::with_capacity(stereotyped_bins + 1);
    bins.push(sorted[..exempt].iter().map(|(u, _)| *u).collect::<Vec<_>>());
    let rest = &sorted[exempt..];
    if rest.is_empty() {
        return Ok(StereotypeBins {
            bins,
            inverse_count: n_inv,
        });
    }
    let per_bin = (rest.len() / stereotyped_bins).max(1);
    for k in 0..stereotyped_bins {
        let start = (k * per_bin).min(rest.len());
        let end = if k + 1 == stereotyped_bins {
            rest.len()
        } else {
            ((k + 1) * per_bin).min(rest.len())
        };
        bins.push(rest[start..end].iter().map(|(u, _)| *u).collect());
    }
    Ok(StereotypeBins {
        bins,
        inverse_count: n_inv,
    })
}

/// Per-bin oversampling rates: bin 0 keeps rate 1, bin k gets `1 + b·k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OversamplePlan {
    pub bins: Vec<Vec<UserId>>,
    pub rates: Vec<f64>,
    pub base_rate: f64,
    pub seed: u64,
}

pub fn build_oversample_plan(
    bins: StereotypeBins,
    base_rate: f64,
    seed: u64,
) -> Result<OversamplePlan> {
    if !(0.01..=0.4).contains(&base_rate) {
        return Err(Error::RateOutOfRange(base_rate));
    }
    let rates: Vec<f64> = (0..bins.bins.len())
        .map(|k| {
            if k == 0 {
                1.0
            } else {
                1.0 + base_rate * k as f64
            }
        })
        .collect();
    Ok(OversamplePlan {
        bins: bins.bins,
        rates,
        base_rate,
        seed,
    })
}

/// Bootstrap-oversamples the training interactions per the plan. Every
/// original row is kept (in its original order); for a user in bin k with
/// rate r, `round_half_even((r - 1)·n_u)` extra rows are drawn uniformly
/// with replacement from that user's own rows and appended, grouped by
/// ascending user id. Duplicate rows are legal training data.
pub fn resample_interactions(train: &[Interaction], plan: &OversamplePlan) -> Vec<Interaction> {
    let mut rate_by_user: BTreeMap<UserId, f64> = BTreeMap::new();
    for (bin, users) in plan.bins.iter().enumerate() {
        for &u in users {
            rate_by_user.insert(u, plan.rates[bin]);
        }
    }
    let mut rows_by_user: BTreeMap<UserId, Vec<&Interaction>> = BTreeMap::new();
    for it in train {
        rows_by_user.entry(it.user_id).or_default().push(it);
    }

    let mut out = train.to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(plan.seed);
    for (user, rows) in &rows_by_user {
        let rate = rate_by_user.get(user).copied().unwrap_or(1.0);
        let extra = ((rate - 1.0) * rows.len() as f64).round_ties_even() as usize;
        for _ in 0..extra {
            out.push(*rows[rng.random_range(0..rows.len())]);
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationSummary {
    pub ndcg: f64,
    pub stereotype: f64,
    pub miscalibration: f64,
}

/// One before/after row of the mitigation comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationComparison {
    pub algorithm: String,
    pub config_hash: String,
    pub base_rate: f64,
    pub seed: u64,
    pub bins: usize,
    /// Share of audited users with positive stereotype, in percent.
    pub pct_stereotyped: f64,
    pub before: MitigationSummary,
    pub after: MitigationSummary,
    pub delta_ndcg: f64,
    pub delta_stereotype: f64,
    pub delta_miscalibration: f64,
}

fn split_test_fingerprint(split: &SplitDataset) -> String {
    let mut hasher = Sha256::new();
    for it in &split.test {
        hasher.update(it.user_id.to_le_bytes());
        hasher.update(it.item_id.to_le_bytes());
        hasher.update([it.rating]);
        hasher.update(it.timestamp.to_le_bytes());
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Trains the baseline, bins by per-user stereotype, resamples, retrains
/// with identical hyperparameters and seed, and audits both models on the
/// unchanged test split.
///
/// Both audits run against the original split: the retrained model learns
/// from the oversampled rows, but actual preferences and held-out items
/// come from the data the users really produced, so the before/after
/// deltas isolate the model change.
pub fn run_mitigation_experiment(
    split: &SplitDataset,
    cfg: &RunConfig,
    base_rate: f64,
) -> Result<(MitigationComparison, AuditReport, AuditReport)> {
    let test_before = split_test_fingerprint(split);
    let data_hash = cfg.data_hash();

    let baseline_model = train(split, cfg.model, &cfg.hyper, cfg.seed)?;
    let baseline = crate::audit::build_report(split, &baseline_model, cfg, &data_hash)?;

    let stereotypes: Vec<(UserId, f64)> = baseline
        .per_user
        .iter()
        .map(|r| (r.user_id(), r.audit.stereotype))
        .collect();
    let bins = bin_users_by_stereotype(&stereotypes, cfg.bin_override)?;
    let n_bins = bins.bins.len();
    let stereotyped = stereotypes.iter().filter(|(_, st)| *st > 0.0).count();
    let pct_stereotyped = 100.0 * stereotyped as f64 / stereotypes.len() as f64;
    let plan = build_oversample_plan(bins, base_rate, cfg.seed)?;

    let augmented = SplitDataset {
        train: resample_interactions(&split.train, &plan),
        test: split.test.clone(),
        catalog: split.catalog.clone(),
        users: split.users.clone(),
        empty_test_users: split.empty_test_users.clone(),
    };
    let retrained_model = train(&augmented, cfg.model, &cfg.hyper, cfg.seed)?;
    let after = crate::audit::build_report(split, &retrained_model, cfg, &data_hash)?;

    if split_test_fingerprint(&augmented) != test_before {
        return Err(Error::Report("test split mutated during mitigation".into()));
    }

    let summarize = |r: &AuditReport| MitigationSummary {
        ndcg: r.ndcg_mean,
        stereotype: r.system.stereotype,
        miscalibration: r.system.miscalibration_mean,
    };
    let (b, a) = (summarize(&baseline), summarize(&after));
    let comparison = MitigationComparison {
        algorithm: cfg.model.as_str().to_string(),
        config_hash: cfg.full_hash(),
        base_rate,
        seed: cfg.seed,
        bins: n_bins,
        pct_stereotyped,
        before: b.clone(),
        after: a.clone(),
        delta_ndcg: a.ndcg - b.ndcg,
        delta_stereotype: a.stereotype - b.stereotype,
        delta_miscalibration: a.miscalibration - b.miscalibration,
    };
    Ok((comparison, baseline, after))
}

/// Writes the comparison table matching the audit columns: % stereotyped
/// users, nDCG, ST, MC before and after, plus deltas and the base rate.
pub fn export_comparisons_tsv(rows: &[MitigationComparison], path: &Path) -> Result<()> {
    let mut out = String::from(
        "algorithm\tconfig_hash\tpct_stereotyped\tbase_rate\tbins\tndcg_before\tst_before\tmc_before\tndcg_after\tst_after\tmc_after\tdelta_ndcg\tdelta_st\tdelta_mc\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.algorithm,
            r.config_hash,
            r.pct_stereotyped,
            r.base_rate,
            r.bins,
            r.before.ndcg,
            r.before.stereotype,
            r.before.miscalibration,
            r.after.ndcg,
            r.after.stereotype,
            r.after.miscalibration,
            r.delta_ndcg,
            r.delta_stereotype,
            r.delta_miscalibration,
        ));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn export_comparisons_json(rows: &[MitigationComparison], path: &Path) -> Result<()> {
    let json = serde_json::to_string_pretty(rows)?;
    fs::write(path, format!("{json}\n")).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelKind;

    fn st_rows(n: usize, n_inv: usize) -> Vec<(UserId, f64)> {
        (0..n)
            .map(|i| {
                let st = if i < n_inv {
                    -1.0 + i as f64 * 0.01
                } else {
                    0.1 + i as f64 * 0.01
                };
                (i as u32 + 1, st)
            })
            .collect()
    }

    #[test]
    fn binning_oracle_hundred_users() {
        // 100 users, 10 inverse → n = round(100/10) = 10: bin 0 has the 10,
        // bins 1..=9 hold 10 each
        let bins = bin_users_by_stereotype(&st_rows(100, 10), None).unwrap();
        assert_eq!(bins.bins.len(), 10);
        assert_eq!(bins.bins[0].len(), 10);
        for b in &bins.bins[1..] {
            assert_eq!(b.len(), 10);
        }
        assert_eq!(bins.inverse_count, 10);
    }

    #[test]
    fn binning_sorts_ascending_stereotype() {
        let rows = vec![(1, 0.5), (2, -0.1), (3, 0.9), (4, 0.2), (5, -0.3)];
        let bins = bin_users_by_stereotype(&rows, None).unwrap();
        // 2 inverse of 5 → n = round(5/2) = 3: two stereotyped bins
        assert_eq!(bins.bins.len(), 3);
        assert_eq!(bins.bins[0], vec![5, 2]);
        assert_eq!(bins.bins[1], vec![4]);
        assert_eq!(bins.bins[2], vec![1, 3]);
    }

    #[test]
    fn zero_stereotype_users_are_exempt() {
        let rows = vec![(1, 0.0), (2, 0.4), (3, 0.5), (4, 0.6)];
        let bins = bin_users_by_stereotype(&rows, None).unwrap();
        assert!(bins.bins[0].contains(&1));
    }

    #[test]
    fn override_path_without_inverse_users() {
        let rows: Vec<(UserId, f64)> = (1..=8).map(|u| (u, 0.1 * u as f64)).collect();
        assert!(matches!(
            bin_users_by_stereotype(&rows, None),
            Err(Error::NoInverseStereotyped)
        ));
        let bins = bin_users_by_stereotype(&rows, Some(4)).unwrap();
        assert_eq!(bins.bins.len(), 5);
        assert!(bins.bins[0].is_empty());
        for b in &bins.bins[1..] {
            assert_eq!(b.len(), 2);
        }
    }

    #[test]
    fn last_bin_absorbs_remainder() {
        let bins = bin_users_by_stereotype(&st_rows(14, 3), None).unwrap();
        // n = max(2, round(14/3)) = 5 → 11 stereotyped users over 4 bins: 2,2,2,5
        assert_eq!(bins.bins.len(), 5);
        let sizes: Vec<usize> = bins.bins[1..].iter().map(Vec::len).collect();
        assert_eq!(sizes, vec![2, 2, 2, 5]);
    }

    #[test]
    fn plan_rates_are_linear_in_bin_index() {
        let bins = bin_users_by_stereotype(&st_rows(40, 10), None).unwrap();
        let plan = build_oversample_plan(bins, 0.1, 0).unwrap();
        assert_eq!(plan.rates[0], 1.0);
        assert!((plan.rates[1] - 1.1).abs() < 1e-12);
        assert!((plan.rates[3] - 1.3).abs() < 1e-12);
        for w in plan.rates.windows(2) {
            assert!(w[1] >= w[0]);
        }
    }

    #[test]
    fn base_rate_point_four_gives_one_point_four() {
        let bins = bin_users_by_stereotype(&st_rows(10, 5), None).unwrap();
        let plan = build_oversample_plan(bins, 0.4, 0).unwrap();
        assert!((plan.rates[1] - 1.4).abs() < 1e-12);
    }

    #[test]
    fn rate_out_of_range_is_rejected() {
        let bins = bin_users_by_stereotype(&st_rows(10, 5), None).unwrap();
        assert!(matches!(
            build_oversample_plan(bins, 0.5, 0),
            Err(Error::RateOutOfRange(_))
        ));
    }

    fn train_rows(users: &[(UserId, usize)]) -> Vec<Interaction> {
        let mut rows = Vec::new();
        for &(u, n) in users {
            for j in 0..n {
                rows.push(Interaction {
                    user_id: u,
                    item_id: j as u32 + 1,
                    rating: 5,
                    timestamp: j as i64,
                });
            }
        }
        rows
    }

    #[test]
    fn rate_one_leaves_data_unchanged() {
        let train = train_rows(&[(1, 5), (2, 7)]);
        let plan = OversamplePlan {
            bins: vec![vec![1, 2]],
            rates: vec![1.0],
            base_rate: 0.01,
            seed: 3,
        };
        assert_eq!(resample_interactions(&train, &plan), train);
    }

    #[test]
    fn rate_rounding_oracle() {
        // rate 1.4 on 20 rows → round(0.4·20) = 8 extras
        let train = train_rows(&[(1, 20)]);
        let plan = OversamplePlan {
            bins: vec![vec![], vec![1]],
            rates: vec![1.0, 1.4],
            base_rate: 0.4,
            seed: 3,
        };
        let out = resample_interactions(&train, &plan);
        assert_eq!(out.len(), 28);
        // originals stay in place and in order
        assert_eq!(&out[..20], &train[..]);
        // extras are copies of the user's own rows
        for it in &out[20..] {
            assert!(train.contains(it));
        }
    }

    #[test]
    fn total_size_matches_per_user_rounding() {
        let users: Vec<(UserId, usize)> = vec![(1, 13), (2, 20), (3, 7), (4, 29)];
        let train = train_rows(&users);
        let plan = OversamplePlan {
            bins: vec![vec![1], vec![2], vec![3], vec![4]],
            rates: vec![1.0, 1.15, 1.3, 1.45],
            base_rate: 0.15,
            seed: 9,
        };
        let out = resample_interactions(&train, &plan);
        let expected: usize = users
            .iter()
            .zip(&plan.rates)
            .map(|(&(_, n), &r)| n + (((r - 1.0) * n as f64).round_ties_even() as usize))
            .sum();
        assert_eq!(out.len(), expected);
        // every appended row copies one of that user's own original rows
        // (full-row equality pins the pair to the right user)
        for it in &out[train.len()..] {
            assert!(train.contains(it));
        }
    }

    #[test]
    fn resampling_is_deterministic() {
        let train = train_rows(&[(1, 10), (2, 10)]);
        let plan = OversamplePlan {
            bins: vec![vec![1], vec![2]],
            rates: vec![1.0, 1.3],
            base_rate: 0.3,
            seed: 5,
        };
        assert_eq!(
            resample_interactions(&train, &plan),
            resample_interactions(&train, &plan)
        );
    }

    #[test]
    fn all_rates_one_reproduces_baseline_audit_exactly() {
        let split = crate::audit::tests::fixture_public();
        let cfg = RunConfig {
            model: ModelKind::UserKnn,
            k: 3,
            ..RunConfig::default()
        };
        let baseline_model = train(&split, cfg.model, &cfg.hyper, cfg.seed).unwrap();
        let baseline = crate::audit::build_report(&split, &baseline_model, &cfg, "").unwrap();
        let plan = OversamplePlan {
            bins: vec![split.users.keys().copied().collect()],
            rates: vec![1.0],
            base_rate: 0.01,
            seed: cfg.seed,
        };
        let augmented = SplitDataset {
            train: resample_interactions(&split.train, &plan),
            test: split.test.clone(),
            catalog: split.catalog.clone(),
            users: split.users.clone(),
            empty_test_users: split.empty_test_users.clone(),
        };
        let retrained = train(&augmented, cfg.model, &cfg.hyper, cfg.seed).unwrap();
        let after = crate::audit::build_report(&split, &retrained, &cfg, "").unwrap();
        assert_eq!(baseline, after);
    }

    #[test]
    fn experiment_preserves_test_split_and_is_deterministic() {
        let split = crate::audit::tests::fixture_public();
        let cfg = RunConfig {
            model: ModelKind::UserKnn,
            k: 3,
            bin_override: Some(2),
            ..RunConfig::default()
        };
        let fingerprint = split_test_fingerprint(&split);
        let (c1, _, _) = run_mitigation_experiment(&split, &cfg, 0.2).unwrap();
        let (c2, _, _) = run_mitigation_experiment(&split, &cfg, 0.2).unwrap();
        assert_eq!(c1, c2);
        assert_eq!(split_test_fingerprint(&split), fingerprint);
        assert!(c1.pct_stereotyped >= 0.0 && c1.pct_stereotyped <= 100.0);
    }
}
