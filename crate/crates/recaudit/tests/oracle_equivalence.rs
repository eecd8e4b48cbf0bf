//! Every exported per-user measure must match a brute-force recomputation
//! scripted directly from the defining formulas, within 1e-9.

mod support;

use recaudit::audit::{build_report, export_tsv, import_per_user_tsv};
use recaudit::config::RunConfig;
use recaudit::models::{train, ModelKind};

fn check_model(kind: ModelKind) {
    let cfg = RunConfig {
        model: kind,
        ..RunConfig::default()
    };
    let split = support::load_split(
        &support::toy_dir(),
        cfg.min_rating,
        cfg.min_interactions,
        cfg.train_ratio,
    );
    let model = train(&split, kind, &cfg.hyper, cfg.seed).unwrap();
    let report = build_report(&split, &model, &cfg, "toy").unwrap();

    let worst = support::max_deviation_from_brute_force(&split, &model, &report);
    assert!(
        worst < 1e-9,
        "{kind:?}: worst deviation {worst} exceeds 1e-9"
    );

    // the exported table carries the same numbers, losslessly
    let dir = tempfile::tempdir().unwrap();
    export_tsv(&report, dir.path()).unwrap();
    let rows = import_per_user_tsv(&dir.path().join("per_user.tsv")).unwrap();
    assert_eq!(rows, report.per_user);
}

#[test]
fn userknn_toy_audit_matches_brute_force() {
    check_model(ModelKind::UserKnn);
}

#[test]
fn itemknn_toy_audit_matches_brute_force() {
    check_model(ModelKind::ItemKnn);
}

#[test]
fn identity_oracle_toy_audit_matches_brute_force() {
    check_model(ModelKind::IdentityOracle);
}

#[test]
fn bias_disparity_matrix_matches_formula() {
    // group mean raw distributions, then 1 - q_bar(c)/p_bar(c) per category
    let cfg = RunConfig::default();
    let split = support::load_split(&support::toy_dir(), 4, 20, 0.8);
    let model = train(&split, ModelKind::UserKnn, &cfg.hyper, cfg.seed).unwrap();
    let report = build_report(&split, &model, &cfg, "toy").unwrap();

    let histories = split.train_items_by_user();
    for bd_row in &report.bias_disparity {
        let member_ids: Vec<u32> = split
            .users
            .values()
            .filter(|u| {
                let group = if bd_row.attribute == "gender" {
                    u.gender.group_label().to_string()
                } else {
                    u.age_group_label(cfg.age_cutoff).to_string()
                };
                group == bd_row.group
            })
            .map(|u| u.user_id)
            .collect();
        assert!(!member_ids.is_empty());

        let genre_count = split.catalog.genre_count();
        let mut p_bar = vec![0.0; genre_count];
        let mut q_bar = vec![0.0; genre_count];
        for &u in &member_ids {
            let mut p = vec![0.0; genre_count];
            for &item in &histories[&u] {
                for (slot, w) in p.iter_mut().zip(split.catalog.weight_vector(item).unwrap()) {
                    *slot += w;
                }
            }
            let total: f64 = p.iter().sum();
            for (slot, v) in p_bar.iter_mut().zip(&p) {
                *slot += v / total;
            }
            let topk = model.recommend_topk(u, cfg.k, &histories[&u]).unwrap();
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
            for (slot, v) in q_bar.iter_mut().zip(&q) {
                *slot += v / total;
            }
        }
        for v in p_bar.iter_mut().chain(q_bar.iter_mut()) {
            *v /= member_ids.len() as f64;
        }

        for c in 0..genre_count {
            let expected = if p_bar[c] > 0.0 {
                Some(1.0 - q_bar[c] / p_bar[c])
            } else {
                None
            };
            match (expected, bd_row.values[c]) {
                (None, None) => {}
                (Some(e), Some(g)) => assert!(
                    (e - g).abs() < 1e-9,
                    "{}:{} category {c}: {g} vs {e}",
                    bd_row.attribute,
                    bd_row.group
                ),
                other => panic!("null-cell mismatch: {other:?}"),
            }
        }
    }
}
