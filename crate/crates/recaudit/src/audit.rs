//! Full-population audits: per-user measures, system aggregates, group
//! disparity with Welch tests, per-category bias disparity, and report
//! export/import.
//!
//! Divergence-based measures run on smoothed distributions; the entropy
//! measures (diversity, inflated diversity) and the bias-disparity matrix
//! use the raw ones, where zeros are well-defined. Users with an empty test
//! side keep nDCG = 0 and are excluded from nDCG averages but participate
//! in every calibration measure.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use recaudit_core::dist::mean_distribution;
use recaudit_core::measures::{
    self, bias_disparity_from_means, effects_user, stereotype_user, system_audit,
};
use recaudit_core::rank::ndcg_at_k;
use recaudit_core::stats::{mean, sample_stddev, welch_t_test, WelchTest};
use recaudit_core::{PreferenceDistribution, SystemAudit, UserAudit};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::{actual_preference, SplitDataset, UserId, UserRecord};
use crate::error::{Error, Result};
use crate::models::{predicted_preference, TrainedModel};

/// The per-user measure names, in export order.
pub const MEASURES: [&str; 8] = [
    "atypicality",
    "diversity",
    "miscalibration",
    "bias_effect",
    "variance_effect",
    "stereotype",
    "inflated_diversity",
    "ndcg_at_k",
];

fn measure_value(audit: &UserAudit, measure: &str) -> f64 {
    match measure {
        "atypicality" => audit.atypicality,
        "diversity" => audit.diversity,
        "miscalibration" => audit.miscalibration,
        "bias_effect" => audit.bias_effect,
        "variance_effect" => audit.variance_effect,
        "stereotype" => audit.stereotype,
        "inflated_diversity" => audit.inflated_diversity,
        "ndcg_at_k" => audit.ndcg_at_k,
        other => unreachable!("unknown measure {other}"),
    }
}

/// One exported row: the user's measures plus group labels and the
/// typicality rank (1 = most typical).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserAuditRow {
    pub gender_group: String,
    pub age_group: String,
    pub typicality_rank: u32,
    pub has_test_items: bool,
    pub audit: UserAudit,
}

impl UserAuditRow {
    pub fn user_id(&self) -> UserId {
        self.audit.user_id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupStats {
    pub label: String,
    pub n: usize,
    /// Sample count for the nDCG mean (users with test items).
    pub ndcg_n: usize,
    pub mean: BTreeMap<String, f64>,
    pub stddev: BTreeMap<String, f64>,
}

/// Two-group comparison for one demographic attribute: per-group stats and
/// a Welch test per measure (signed as `groups[0] - groups[1]`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComparison {
    pub attribute: String,
    pub groups: Vec<GroupStats>,
    pub tests: BTreeMap<String, WelchTest>,
}

/// Per-group bias disparity across categories; `None` marks categories the
/// group never interacted with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasDisparityRow {
    pub attribute: String,
    pub group: String,
    pub values: Vec<Option<f64>>,
}

/// Everything one audit run produces.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub algorithm: String,
    pub config_hash: String,
    pub data_hash: String,
    pub k: usize,
    pub alpha: f64,
    pub seed: u64,
    pub genres: Vec<String>,
    pub audited_users: usize,
    /// Mean nDCG over users with at least one held-out item.
    pub ndcg_mean: f64,
    pub ndcg_covered_users: usize,
    pub system: SystemAudit,
    pub per_user: Vec<UserAuditRow>,
    pub group_comparisons: Vec<GroupComparison>,
    pub bias_disparity: Vec<BiasDisparityRow>,
}

/// Intermediate audit state: rows plus the raw distributions the
/// bias-disparity matrix needs.
#[derive(Debug, Clone)]
pub struct PopulationAudit {
    pub rows: Vec<UserAuditRow>,
    pub system: SystemAudit,
    pub ndcg_mean: f64,
    pub ndcg_covered_users: usize,
    pub raw_actual: BTreeMap<UserId, PreferenceDistribution>,
    pub raw_predicted: BTreeMap<UserId, PreferenceDistribution>,
}

/// Computes every per-user measure and the system audit for one model over
/// the audited population (all retained users, ascending id).
pub fn audit_population(
    split: &SplitDataset,
    model: &TrainedModel,
    k: usize,
    alpha: f64,
    age_cutoff: u8,
) -> Result<PopulationAudit> {
    let histories = split.train_items_by_user();
    let test_sets = split.test_items_by_user();
    let empty: Vec<u32> = Vec::new();

    let mut user_ids = Vec::new();
    let mut raw_actual = BTreeMap::new();
    let mut raw_predicted = BTreeMap::new();
    let mut smoothed_p = Vec::new();
    let mut smoothed_q = Vec::new();
    let mut ndcgs = Vec::new();
    let mut covered = Vec::new();

    for (&user, record) in &split.users {
        let history = histories.get(&user).ok_or(Error::NoTrainingHistory(user))?;
        let p_raw = actual_preference(user, history, &split.catalog)?;
        let topk = model.recommend_topk(user, k, history)?;
        let q_raw = match model.oracle_preference(user) {
            Some(p) => p,
            None => predicted_preference(&topk, &split.catalog)?,
        };
        let test_items = test_sets.get(&user).unwrap_or(&empty);
        ndcgs.push(ndcg_at_k(&topk.item_ids(), test_items, k));
        covered.push(!test_items.is_empty());
        smoothed_p.push(p_raw.smooth(alpha)?);
        smoothed_q.push(q_raw.smooth(alpha)?);
        raw_actual.insert(user, p_raw);
        raw_predicted.insert(user, q_raw);
        user_ids.push((user, *record));
    }
    if user_ids.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }

    let p_bar = mean_distribution(&smoothed_p)?;
    let q_bar = mean_distribution(&smoothed_q)?;
    let system = system_audit(&smoothed_p, &smoothed_q)?;

    let mut rows = Vec::with_capacity(user_ids.len());
    for (idx, (user, record)) in user_ids.iter().enumerate() {
        let (p_sm, q_sm) = (&smoothed_p[idx], &smoothed_q[idx]);
        let p_raw = &raw_actual[user];
        let q_raw = &raw_predicted[user];
        let miscalibration = p_sm.kl_divergence(q_sm)?;
        let (bias_effect, variance_effect) = effects_user(p_sm, q_sm, &p_bar, &q_bar)?;
        let stereotype = stereotype_user(p_sm, q_sm, &p_bar, &q_bar)?;
        let atypicality = measures::atypicality_user(p_sm, &p_bar)?;
        let diversity = measures::diversity_user(p_raw)?;
        let inflated_diversity = measures::inflated_diversity_user(p_raw, q_raw)?;
        rows.push(UserAuditRow {
            gender_group: record.gender.group_label().to_string(),
            age_group: record.age_group_label(age_cutoff).to_string(),
            typicality_rank: 0,
            has_test_items: covered[idx],
            audit: UserAudit {
                user_id: *user,
                atypicality,
                diversity,
                miscalibration,
                bias_effect,
                variance_effect,
                stereotype,
                inflated_diversity,
                ndcg_at_k: ndcgs[idx],
            },
        });
    }
    assign_typicality_ranks(&mut rows);

    let ndcg_covered_users = covered.iter().filter(|&&c| c).count();
    let ndcg_mean = if ndcg_covered_users > 0 {
        ndcgs
            .iter()
            .zip(&covered)
            .filter(|(_, &c)| c)
            .map(|(&n, _)| n)
            .sum::<f64>()
            / ndcg_covered_users as f64
    } else {
        0.0
    };

    Ok(PopulationAudit {
        rows,
        system,
        ndcg_mean,
        ndcg_covered_users,
        raw_actual,
        raw_predicted,
    })
}

/// Rank 1 = lowest atypicality; ties break by ascending user id.
fn assign_typicality_ranks(rows: &mut [UserAuditRow]) {
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        rows[a]
            .audit
            .atypicality
            .total_cmp(&rows[b].audit.atypicality)
            .then_with(|| rows[a].user_id().cmp(&rows[b].user_id()))
    });
    for (rank, idx) in order.into_iter().enumerate() {
        rows[idx].typicality_rank = rank as u32 + 1;
    }
}

fn group_labels(attribute: &str) -> Result<[&'static str; 2]> {
    match attribute {
        "gender" => Ok(["women", "men"]),
        "age" => Ok(["older", "younger"]),
        other => Err(Error::Config(format!(
            "unknown attribute {other:?} (expected gender|age)"
        ))),
    }
}

fn row_group<'a>(row: &'a UserAuditRow, attribute: &str) -> &'a str {
    if attribute == "gender" {
        &row.gender_group
    } else {
        &row.age_group
    }
}

/// Per-group mean/stddev of every measure plus a Welch test per measure.
/// The nDCG entries only aggregate users with test items.
pub fn group_disparity(rows: &[UserAuditRow], attribute: &str) -> Result<GroupComparison> {
    let labels = group_labels(attribute)?;
    let mut samples: BTreeMap<&str, Vec<&UserAuditRow>> = BTreeMap::new();
    for row in rows {
        samples
            .entry(row_group(row, attribute))
            .or_default()
            .push(row);
    }
    let mut groups = Vec::new();
    let mut per_measure: BTreeMap<String, Vec<Vec<f64>>> = BTreeMap::new();
    for label in labels {
        let members = samples.remove(label).unwrap_or_default();
        if members.len() < 2 {
            return Err(recaudit_core::MeasureError::DegenerateGroup.into());
        }
        let mut means = BTreeMap::new();
        let mut stddevs = BTreeMap::new();
        let mut ndcg_n = 0;
        for measure in MEASURES {
            let values: Vec<f64> = if measure == "ndcg_at_k" {
                let v: Vec<f64> = members
                    .iter()
                    .filter(|r| r.has_test_items)
                    .map(|r| r.audit.ndcg_at_k)
                    .collect();
                ndcg_n = v.len();
                v
            } else {
                members
                    .iter()
                    .map(|r| measure_value(&r.audit, measure))
                    .collect()
            };
            if values.is_empty() {
                means.insert(measure.to_string(), 0.0);
                stddevs.insert(measure.to_string(), 0.0);
            } else {
                means.insert(measure.to_string(), mean(&values));
                stddevs.insert(measure.to_string(), sample_stddev(&values));
            }
            per_measure
                .entry(measure.to_string())
                .or_default()
                .push(values);
        }
        groups.push(GroupStats {
            label: label.to_string(),
            n: members.len(),
            ndcg_n,
            mean: means,
            stddev: stddevs,
        });
    }
    let mut tests = BTreeMap::new();
    for (measure, sides) in per_measure {
        tests.insert(measure, welch_t_test(&sides[0], &sides[1])?);
    }
    Ok(GroupComparison {
        attribute: attribute.to_string(),
        groups,
        tests,
    })
}

/// Per-group, per-category bias disparity over the raw group means. Cells
/// where the group's actual mass is zero come out as `None`.
pub fn bias_disparity_matrix(
    pop: &PopulationAudit,
    users: &BTreeMap<UserId, UserRecord>,
    attribute: &str,
    age_cutoff: u8,
    genre_count: usize,
) -> Result<Vec<BiasDisparityRow>> {
    let labels = group_labels(attribute)?;
    let mut out = Vec::new();
    for label in labels {
        let mut ps = Vec::new();
        let mut qs = Vec::new();
        for (user, record) in users {
            let group = if attribute == "gender" {
                record.gender.group_label()
            } else {
                record.age_group_label(age_cutoff)
            };
            if group == label {
                ps.push(pop.raw_actual[user].clone());
                qs.push(pop.raw_predicted[user].clone());
            }
        }
        let mut values = vec![None; genre_count];
        if !ps.is_empty() {
            let p_bar = mean_distribution(&ps)?;
            let q_bar = mean_distribution(&qs)?;
            for (c, slot) in values.iter_mut().enumerate() {
                *slot = bias_disparity_from_means(&p_bar, &q_bar, c).ok();
            }
        }
        out.push(BiasDisparityRow {
            attribute: attribute.to_string(),
            group: label.to_string(),
            values,
        });
    }
    Ok(out)
}

/// Trains nothing; assembles the full report from an audited population.
pub fn build_report(
    split: &SplitDataset,
    model: &TrainedModel,
    cfg: &RunConfig,
    data_hash: &str,
) -> Result<AuditReport> {
    let pop = audit_population(split, model, cfg.k, cfg.alpha, cfg.age_cutoff)?;
    let mut group_comparisons = Vec::new();
    let mut bias_disparity = Vec::new();
    for attribute in ["gender", "age"] {
        group_comparisons.push(group_disparity(&pop.rows, attribute)?);
        bias_disparity.extend(bias_disparity_matrix(
            &pop,
            &split.users,
            attribute,
            cfg.age_cutoff,
            split.catalog.genre_count(),
        )?);
    }
    Ok(AuditReport {
        algorithm: model.kind.as_str().to_string(),
        config_hash: cfg.full_hash(),
        data_hash: data_hash.to_string(),
        k: cfg.k,
        alpha: cfg.alpha,
        seed: cfg.seed,
        genres: split.catalog.genres().to_vec(),
        audited_users: pop.rows.len(),
        ndcg_mean: pop.ndcg_mean,
        ndcg_covered_users: pop.ndcg_covered_users,
        system: pop.system.clone(),
        per_user: pop.rows.clone(),
        group_comparisons,
        bias_disparity,
    })
}

/// Checks that every aggregate in the report recomputes from its per-user
/// table within 1e-9; run on every export.
pub fn verify_self_consistency(report: &AuditReport) -> Result<()> {
    for comparison in &report.group_comparisons {
        for group in &comparison.groups {
            for measure in MEASURES {
                let values: Vec<f64> = report
                    .per_user
                    .iter()
                    .filter(|r| row_group(r, &comparison.attribute) == group.label)
                    .filter(|r| measure != "ndcg_at_k" || r.has_test_items)
                    .map(|r| measure_value(&r.audit, measure))
                    .collect();
                let expected = if values.is_empty() {
                    0.0
                } else {
                    mean(&values)
                };
                let got = group.mean[measure];
                if (expected - got).abs() > 1e-9 {
                    return Err(Error::Report(format!(
                        "group mean drift for {}/{}/{measure}: {got} vs {expected}",
                        comparison.attribute, group.label
                    )));
                }
            }
        }
    }
    let covered: Vec<f64> = report
        .per_user
        .iter()
        .filter(|r| r.has_test_items)
        .map(|r| r.audit.ndcg_at_k)
        .collect();
    if !covered.is_empty() && (mean(&covered) - report.ndcg_mean).abs() > 1e-9 {
        return Err(Error::Report("ndcg mean drift".into()));
    }
    Ok(())
}

fn fmt_f64(v: f64) -> String {
    // shortest round-trip formatting keeps TSV lossless
    format!("{v}")
}

/// Writes `per_user.tsv`, `group_summary.tsv`, `bias_disparity.tsv` and
/// `system.tsv` under `dir`.
pub fn export_tsv(report: &AuditReport, dir: &Path) -> Result<()> {
    verify_self_consistency(report)?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut per_user =
        String::from("user_id\tgender_group\tage_group\ttypicality_rank\thas_test_items\t");
    per_user.push_str(&MEASURES.join("\t"));
    per_user.push('\n');
    for row in &report.per_user {
        per_user.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}",
            row.user_id(),
            row.gender_group,
            row.age_group,
            row.typicality_rank,
            row.has_test_items
        ));
        for measure in MEASURES {
            per_user.push('\t');
            per_user.push_str(&fmt_f64(measure_value(&row.audit, measure)));
        }
        per_user.push('\n');
    }
    write_file(dir, "per_user.tsv", &per_user)?;

    let mut summary = String::from(
        "attribute\tmeasure\tgroup_a\tn_a\tmean_a\tstddev_a\tgroup_b\tn_b\tmean_b\tstddev_b\tt\tp\n",
    );
    for comparison in &report.group_comparisons {
        let (a, b) = (&comparison.groups[0], &comparison.groups[1]);
        for measure in MEASURES {
            let test = &comparison.tests[measure];
            let (n_a, n_b) = if measure == "ndcg_at_k" {
                (a.ndcg_n, b.ndcg_n)
            } else {
                (a.n, b.n)
            };
            summary.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                comparison.attribute,
                measure,
                a.label,
                n_a,
                fmt_f64(a.mean[measure]),
                fmt_f64(a.stddev[measure]),
                b.label,
                n_b,
                fmt_f64(b.mean[measure]),
                fmt_f64(b.stddev[measure]),
                fmt_f64(test.t),
                fmt_f64(test.p),
            ));
        }
    }
    write_file(dir, "group_summary.tsv", &summary)?;

    let mut bd = String::from("attribute\tgroup\tcategory\tbias_disparity\n");
    for row in &report.bias_disparity {
        for (c, value) in row.values.iter().enumerate() {
            bd.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                row.attribute,
                row.group,
                report.genres[c],
                value.map(fmt_f64).unwrap_or_default()
            ));
        }
    }
    write_file(dir, "bias_disparity.tsv", &bd)?;

    let mut system = String::from("key\tvalue\n");
    let pairs: Vec<(&str, String)> = vec![
        ("algorithm", report.algorithm.clone()),
        ("config_hash", report.config_hash.clone()),
        ("data_hash", report.data_hash.clone()),
        ("k", report.k.to_string()),
        ("alpha", fmt_f64(report.alpha)),
        ("seed", report.seed.to_string()),
        ("audited_users", report.audited_users.to_string()),
        ("ndcg_mean", fmt_f64(report.ndcg_mean)),
        ("ndcg_covered_users", report.ndcg_covered_users.to_string()),
        (
            "miscalibration_mean",
            fmt_f64(report.system.miscalibration_mean),
        ),
        ("bias_term", fmt_f64(report.system.bias_term)),
        ("variance_term", fmt_f64(report.system.variance_term)),
        (
            "decomposition_residual",
            fmt_f64(report.system.decomposition_residual),
        ),
        ("stereotype", fmt_f64(report.system.stereotype)),
        (
            "bias_variance_ratio",
            report
                .system
                .bias_variance_ratio
                .map(fmt_f64)
                .unwrap_or_default(),
        ),
    ];
    for (k, v) in pairs {
        system.push_str(&format!("{k}\t{v}\n"));
    }
    write_file(dir, "system.tsv", &system)
}

/// Writes the whole report as one JSON document.
pub fn export_json(report: &AuditReport, path: &Path) -> Result<()> {
    verify_self_consistency(report)?;
    let json = serde_json::to_string_pretty(report)?;
    fs::write(path, format!("{json}\n")).map_err(|e| Error::io(path, e))
}

pub fn import_json(path: &Path) -> Result<AuditReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_str(&text)?)
}

/// Reads back the per-user TSV table (the export the downstream analyses
/// consume); used by round-trip checks.
pub fn import_per_user_tsv(path: &Path) -> Result<Vec<UserAuditRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (no, line) in text.lines().enumerate().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() != 5 + MEASURES.len() {
            return Err(Error::malformed(path, no + 1, "wrong column count"));
        }
        let parse_f64 = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::malformed(path, no + 1, format!("bad float {s:?}")))
        };
        rows.push(UserAuditRow {
            gender_group: f[1].to_string(),
            age_group: f[2].to_string(),
            typicality_rank: f[3]
                .parse()
                .map_err(|_| Error::malformed(path, no + 1, "bad rank"))?,
            has_test_items: f[4] == "true",
            audit: UserAudit {
                user_id: f[0]
                    .parse()
                    .map_err(|_| Error::malformed(path, no + 1, "bad user id"))?,
                atypicality: parse_f64(f[5])?,
                diversity: parse_f64(f[6])?,
                miscalibration: parse_f64(f[7])?,
                bias_effect: parse_f64(f[8])?,
                variance_effect: parse_f64(f[9])?,
                stereotype: parse_f64(f[10])?,
                inflated_diversity: parse_f64(f[11])?,
                ndcg_at_k: parse_f64(f[12])?,
            },
        });
    }
    Ok(rows)
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<()> {
    let path = dir.join(name);
    fs::write(&path, content).map_err(|e| Error::io(&path, e))
}
