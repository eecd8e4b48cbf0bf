//! Matrix-factorization recommenders: pairwise-ranking SGD (BPR) and
//! implicit-feedback alternating least squares (WRMF).

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Interactions, ModelHyper};
use crate::error::{Error, Result};

/// Latent factors plus bias vectors. The pairwise trainer fits item biases
/// (the user bias cancels in score differences); the ALS trainer uses the
/// classic bias-free formulation and leaves both at zero. Both vectors are
/// part of the model layout either way.
#[derive(Debug, Clone, PartialEq)]
pub struct MfParams {
    pub d: usize,
    pub user_factors: Vec<f64>,
    pub item_factors: Vec<f64>,
    pub user_bias: Vec<f64>,
    pub item_bias: Vec<f64>,
}

impl MfParams {
    pub fn score(&self, u: usize, i: usize) -> f64 {
        let d = self.d;
        let uf = &self.user_factors[u * d..(u + 1) * d];
        let itf = &self.item_factors[i * d..(i + 1) * d];
        self.user_bias[u] + self.item_bias[i] + dot(uf, itf)
    }

    pub(crate) fn score_all(&self, u: usize, n_items: usize) -> Vec<f64> {
        (0..n_items).map(|i| self.score(u, i)).collect()
    }

    fn all_finite(&self) -> bool {
        self.user_factors.iter().all(|v| v.is_finite())
            && self.item_factors.iter().all(|v| v.is_finite())
            && self.user_bias.iter().all(|v| v.is_finite())
            && self.item_bias.iter().all(|v| v.is_finite())
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn init_factors(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Vec<f64> {
    (0..n * d).map(|_| rng.random_range(-0.01..0.01)).collect()
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Bayesian personalized ranking: stochastic pairwise updates maximizing
/// `ln σ(score(u, i⁺) − score(u, j⁻))` with uniform negative sampling over
/// items outside the user's history. Positive pairs are drawn uniformly
/// over training rows, so duplicated (oversampled) rows are sampled
/// proportionally more often. Deterministic given the seed.
pub fn train_bpr(inter: &Interactions, hyper: &ModelHyper, seed: u64) -> Result<MfParams> {
    let d = hyper.bpr_factors;
    if d == 0 {
        return Err(Error::Config("bpr_factors must be at least 1".into()));
    }
    let lr = hyper.bpr_learning_rate;
    let reg = hyper.bpr_reg;
    let (n_users, n_items) = (inter.n_users(), inter.n_items());

    let positives: &[(u32, u32)] = &inter.rows;
    if positives.is_empty() {
        return Err(Error::EmptyAfterFilter);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut params = MfParams {
        d,
        user_factors: init_factors(&mut rng, n_users, d),
        item_factors: init_factors(&mut rng, n_items, d),
        user_bias: vec![0.0; n_users],
        item_bias: vec![0.0; n_items],
    };

    let mut grad_u = vec![0.0; d];
    for epoch in 0..hyper.bpr_epochs {
        for _ in 0..positives.len() {
            let (u, pos) = positives[rng.random_range(0..positives.len())];
            let (u, pos) = (u as usize, pos as usize);
            let history = &inter.user_items[u];
            if history.len() >= n_items {
                continue;
            }
            let neg = sample_negative(&mut rng, history, n_items);

            let d_range = |e: usize| e * d..(e + 1) * d;
            let x = params.item_bias[pos] - params.item_bias[neg]
                + dot(
                    &params.user_factors[d_range(u)],
                    &params.item_factors[d_range(pos)],
                )
                - dot(
                    &params.user_factors[d_range(u)],
                    &params.item_factors[d_range(neg)],
                );
            let g = sigmoid(-x);

            for (f, slot) in grad_u.iter_mut().enumerate() {
                *slot = params.item_factors[pos * d + f] - params.item_factors[neg * d + f];
            }
            for (f, &gu) in grad_u.iter().enumerate() {
                let wu = params.user_factors[u * d + f];
                let hp = params.item_factors[pos * d + f];
                let hn = params.item_factors[neg * d + f];
                params.user_factors[u * d + f] += lr * (g * gu - reg * wu);
                params.item_factors[pos * d + f] += lr * (g * wu - reg * hp);
                params.item_factors[neg * d + f] += lr * (-g * wu - reg * hn);
            }
            params.item_bias[pos] += lr * (g - reg * params.item_bias[pos]);
            params.item_bias[neg] += lr * (-g - reg * params.item_bias[neg]);
        }
        if !params.all_finite() {
            return Err(Error::DivergedTraining(format!(
                "bpr produced non-finite parameters in epoch {epoch}"
            )));
        }
    }
    Ok(params)
}

fn sample_negative(rng: &mut ChaCha8Rng, history: &[u32], n_items: usize) -> usize {
    for _ in 0..64 {
        let j = rng.random_range(0..n_items);
        if history.binary_search(&(j as u32)).is_err() {
            return j;
        }
    }
    // dense-history fallback: pick uniformly among the unseen items
    let unseen: Vec<usize> = (0..n_items)
        .filter(|&j| history.binary_search(&(j as u32)).is_err())
        .collect();
    unseen[rng.random_range(0..unseen.len())]
}

/// Objective trace reported by the ALS trainer; non-increasing by
/// construction since each half-step solves its subproblem exactly.
#[derive(Debug, Clone)]
pub struct WrmfTrainInfo {
    pub objective: Vec<f64>,
}

/// Weighted regularized matrix factorization on the binary preference
/// matrix with confidence `1 + confidence_alpha · count` for observed
/// entries (count is the training-row multiplicity, 1 everywhere on
/// non-oversampled data). Each half iteration solves the regularized d×d
/// normal equations exactly.
pub fn train_wrmf(
    inter: &Interactions,
    hyper: &ModelHyper,
    seed: u64,
) -> Result<(MfParams, WrmfTrainInfo)> {
    let d = hyper.wrmf_factors;
    if d == 0 {
        return Err(Error::Config("wrmf_factors must be at least 1".into()));
    }
    let reg = hyper.wrmf_reg;
    let alpha = hyper.wrmf_confidence_alpha;
    let (n_users, n_items) = (inter.n_users(), inter.n_items());

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut user_factors = init_factors(&mut rng, n_users, d);
    let mut item_factors = init_factors(&mut rng, n_items, d);

    let mut objective = Vec::with_capacity(hyper.wrmf_iterations);
    for _ in 0..hyper.wrmf_iterations {
        solve_side(
            &mut user_factors,
            &item_factors,
            &inter.user_item_counts,
            d,
            reg,
            alpha,
        )?;
        solve_side(
            &mut item_factors,
            &user_factors,
            &inter.item_user_counts,
            d,
            reg,
            alpha,
        )?;
        objective.push(wrmf_objective(
            &user_factors,
            &item_factors,
            &inter.user_item_counts,
            d,
            reg,
            alpha,
        ));
    }

    let params = MfParams {
        d,
        user_factors,
        item_factors,
        user_bias: vec![0.0; n_users],
        item_bias: vec![0.0; n_items],
    };
    if !params.all_finite() {
        return Err(Error::DivergedTraining(
            "wrmf produced non-finite factors".into(),
        ));
    }
    Ok((params, WrmfTrainInfo { objective }))
}

/// Solves one ALS side: for every row entity e with observed columns O_e
/// at confidence `c_o = 1 + alpha·count_o`,
/// `x_e = (YᵀY + Σ_{o∈O_e} (c_o-1)·y_o y_oᵀ + reg·I)⁻¹ · Σ_{o∈O_e} c_o·y_o`.
fn solve_side(
    out: &mut [f64],
    other: &[f64],
    observed: &[Vec<(u32, u32)>],
    d: usize,
    reg: f64,
    alpha: f64,
) -> Result<()> {
    let gram = gramian(other, d);
    let mut a = vec![0.0; d * d];
    let mut b = vec![0.0; d];
    for (e, cols) in observed.iter().enumerate() {
        a.copy_from_slice(&gram);
        for f in 0..d {
            a[f * d + f] += reg;
        }
        b.fill(0.0);
        for &(o, count) in cols {
            let conf = 1.0 + alpha * count as f64;
            let y = &other[o as usize * d..(o as usize + 1) * d];
            for r in 0..d {
                let w = (conf - 1.0) * y[r];
                for c in 0..d {
                    a[r * d + c] += w * y[c];
                }
                b[r] += conf * y[r];
            }
        }
        cholesky_solve(&mut a, &mut b, d)?;
        out[e * d..(e + 1) * d].copy_from_slice(&b);
    }
    Ok(())
}

fn gramian(factors: &[f64], d: usize) -> Vec<f64> {
    let n = factors.len() / d;
    let mut g = vec![0.0; d * d];
    for e in 0..n {
        let row = &factors[e * d..(e + 1) * d];
        for r in 0..d {
            for c in 0..d {
                g[r * d + c] += row[r] * row[c];
            }
        }
    }
    g
}

/// In-place LLᵀ factorization and solve; errors on a non-positive pivot.
fn cholesky_solve(a: &mut [f64], b: &mut [f64], d: usize) -> Result<()> {
    for j in 0..d {
        let mut diag = a[j * d + j];
        for p in 0..j {
            diag -= a[j * d + p] * a[j * d + p];
        }
        if diag <= 0.0 {
            return Err(Error::SingularSystem(format!(
                "non-positive pivot {diag} at column {j}"
            )));
        }
        let ljj = diag.sqrt();
        a[j * d + j] = ljj;
        for i in (j + 1)..d {
            let mut s = a[i * d + j];
            for p in 0..j {
                s -= a[i * d + p] * a[j * d + p];
            }
            a[i * d + j] = s / ljj;
        }
    }
    // forward: L y = b
    for i in 0..d {
        let mut s = b[i];
        for p in 0..i {
            s -= a[i * d + p] * b[p];
        }
        b[i] = s / a[i * d + i];
    }
    // backward: Lᵀ x = y
    for i in (0..d).rev() {
        let mut s = b[i];
        for p in (i + 1)..d {
            s -= a[p * d + i] * b[p];
        }
        b[i] = s / a[i * d + i];
    }
    Ok(())
}

/// Full weighted objective:
/// `Σ_{u,i∈O_u} [c_ui(1-s)² - s²] + Σ_u x_uᵀ (YᵀY) x_u + reg(‖X‖² + ‖Y‖²)`,
/// where the gramian term supplies the s² of every (u, i) pair at weight 1.
fn wrmf_objective(
    user_factors: &[f64],
    item_factors: &[f64],
    user_item_counts: &[Vec<(u32, u32)>],
    d: usize,
    reg: f64,
    alpha: f64,
) -> f64 {
    let gram = gramian(item_factors, d);
    let mut obj = 0.0;
    for (u, items) in user_item_counts.iter().enumerate() {
        let x = &user_factors[u * d..(u + 1) * d];
        for r in 0..d {
            for c in 0..d {
                obj += x[r] * gram[r * d + c] * x[c];
            }
        }
        for &(i, count) in items {
            let conf = 1.0 + alpha * count as f64;
            let y = &item_factors[i as usize * d..(i as usize + 1) * d];
            let s = dot(x, y);
            obj += conf * (1.0 - s) * (1.0 - s) - s * s;
        }
    }
    obj += reg * (dot(user_factors, user_factors) + dot(item_factors, item_factors));
    obj
}
