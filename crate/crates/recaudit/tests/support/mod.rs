#![allow(dead_code)] // each test target uses a different subset

//! Shared helpers for the integration suites: toy-dataset loading plus a
//! brute-force reimplementation of every audit measure, scripted directly
//! from the defining formulas and kept independent from the library's
//! measurement code.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use recaudit::audit::AuditReport;
use recaudit::data::{
    chronological_split, parse_catalog, parse_interactions, parse_users, preprocess, ItemCatalog,
    SplitDataset, UserId,
};
use recaudit::models::TrainedModel;

pub fn toy_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/toy")
}

pub fn load_split(
    dir: &Path,
    min_rating: u8,
    min_interactions: usize,
    train_ratio: f64,
) -> SplitDataset {
    let interactions = parse_interactions(&dir.join("ratings.dat")).unwrap();
    let catalog = ItemCatalog::from_entries(&parse_catalog(&dir.join("movies.dat")).unwrap());
    let users = parse_users(&dir.join("users.dat")).unwrap();
    let (dataset, _) =
        preprocess(interactions, catalog, users, min_rating, min_interactions).unwrap();
    chronological_split(dataset, train_ratio).unwrap()
}

// ---- independent formula implementations ----------------------------------

pub fn bf_kl(p: &[f64], q: &[f64]) -> f64 {
    let mut s = 0.0;
    for (&pc, &qc) in p.iter().zip(q) {
        if pc > 0.0 {
            s += pc * (pc / qc).ln();
        }
    }
    s
}

pub fn bf_js(p: &[f64], q: &[f64]) -> f64 {
    (bf_kl(p, q) + bf_kl(q, p)) / 2.0
}

pub fn bf_entropy_normalized(p: &[f64]) -> f64 {
    let mut h = 0.0;
    for &pc in p {
        if pc > 0.0 {
            h -= pc * pc.ln();
        }
    }
    h / (p.len() as f64).ln()
}

pub fn bf_smooth(p: &[f64], alpha: f64) -> Vec<f64> {
    let u = 1.0 / p.len() as f64;
    p.iter().map(|&w| (1.0 - alpha) * w + alpha * u).collect()
}

pub fn bf_mean(rows: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = vec![0.0; rows[0].len()];
    for r in rows {
        for (a, &v) in acc.iter_mut().zip(r) {
            *a += v;
        }
    }
    for a in &mut acc {
        *a /= rows.len() as f64;
    }
    acc
}

pub fn bf_ndcg(ranked: &[u32], relevant: &[u32], k: usize) -> f64 {
    if relevant.is_empty() {
        return 0.0;
    }
    let mut dcg = 0.0;
    for (rank0, item) in ranked.iter().take(k).enumerate() {
        if relevant.contains(item) {
            dcg += 1.0 / ((rank0 as f64 + 2.0).log2());
        }
    }
    let mut idcg = 0.0;
    for rank0 in 0..relevant.len().min(k) {
        idcg += 1.0 / ((rank0 as f64 + 2.0).log2());
    }
    dcg / idcg
}

/// Brute-force per-user measures for one model run: a map from user id to
/// (AT, DV, MC, BE, VE, ST, IDV, nDCG), recomputed from raw data and the
/// model's recommendation lists.
pub fn brute_force_measures(
    split: &SplitDataset,
    model: &TrainedModel,
    k: usize,
    alpha: f64,
) -> BTreeMap<UserId, [f64; 8]> {
    let histories = split.train_items_by_user();
    let tests = split.test_items_by_user();
    let genre_count = split.catalog.genre_count();
    let empty: Vec<u32> = Vec::new();

    let mut users: Vec<UserId> = Vec::new();
    let mut p_raw: Vec<Vec<f64>> = Vec::new();
    let mut q_raw: Vec<Vec<f64>> = Vec::new();
    let mut ndcg: Vec<f64> = Vec::new();
    for (&user, history) in &histories {
        let mut p = vec![0.0; genre_count];
        for &item in history {
            for (slot, w) in p.iter_mut().zip(split.catalog.weight_vector(item).unwrap()) {
                *slot += w;
            }
        }
        let total: f64 = p.iter().sum();
        for w in &mut p {
            *w /= total;
        }

        let topk = model.recommend_topk(user, k, history).unwrap();
        let q = match model.oracle_preference(user) {
            Some(pref) => pref.weights().to_vec(),
            None => {
                let mut q = vec![0.0; genre_count];
                for (item, _) in &topk.items {
                    for (slot, w) in q
                        .iter_mut()
                        .zip(split.catalog.weight_vector(*item).unwrap())
                    {
                        *slot += w;
                    }
                }
                let total: f64 = q.iter().sum();
                for w in &mut q {
                    *w /= total;
                }
                q
            }
        };
        ndcg.push(bf_ndcg(
            &topk.item_ids(),
            tests.get(&user).unwrap_or(&empty),
            k,
        ));
        users.push(user);
        p_raw.push(p);
        q_raw.push(q);
    }

    let p_sm: Vec<Vec<f64>> = p_raw.iter().map(|p| bf_smooth(p, alpha)).collect();
    let q_sm: Vec<Vec<f64>> = q_raw.iter().map(|q| bf_smooth(q, alpha)).collect();
    let p_bar = bf_mean(&p_sm);
    let q_bar = bf_mean(&q_sm);

    let mut out = BTreeMap::new();
    for (i, &user) in users.iter().enumerate() {
        let at = bf_js(&p_sm[i], &p_bar);
        let dv = bf_entropy_normalized(&p_raw[i]);
        let mc = bf_kl(&p_sm[i], &q_sm[i]);
        let be = bf_kl(&p_sm[i], &q_bar) - bf_kl(&p_sm[i], &p_bar);
        let ve = bf_kl(&p_sm[i], &q_sm[i]) - bf_kl(&p_sm[i], &q_bar);
        let st = bf_js(&p_sm[i], &p_bar) - bf_js(&q_sm[i], &q_bar);
        let idv = bf_entropy_normalized(&p_raw[i]) - bf_entropy_normalized(&q_raw[i]);
        out.insert(user, [at, dv, mc, be, ve, st, idv, ndcg[i]]);
    }
    out
}

/// Compares a report's per-user table against the brute-force recomputation;
/// returns the worst absolute deviation across all users and measures.
pub fn max_deviation_from_brute_force(
    split: &SplitDataset,
    model: &TrainedModel,
    report: &AuditReport,
) -> f64 {
    let expected = brute_force_measures(split, model, report.k, report.alpha);
    let mut worst: f64 = 0.0;
    assert_eq!(report.per_user.len(), expected.len());
    for row in &report.per_user {
        let e = &expected[&row.user_id()];
        let got = [
            row.audit.atypicality,
            row.audit.diversity,
            row.audit.miscalibration,
            row.audit.bias_effect,
            row.audit.variance_effect,
            row.audit.stereotype,
            row.audit.inflated_diversity,
            row.audit.ndcg_at_k,
        ];
        for (g, want) in got.iter().zip(e) {
            worst = worst.max((g - want).abs());
        }
    }
    worst
}
