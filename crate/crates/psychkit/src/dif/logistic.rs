//! Logistic-regression DIF detection: per item, nested binary logits
//! M0 (intercept + matching score) and M1 (M0 + group + group x score) are
//! fitted by iteratively reweighted least squares; the joint 2-df
//! likelihood-ratio test detects uniform and non-uniform DIF together, and
//! the Nagelkerke R-squared gain is the effect size.

use std::collections::BTreeSet;

use super::{matching_scores, r2_delta_class, DifConfig, DifGroups, ItemOutcome, RawDif};
use crate::dataset::ResponseMatrix;
use crate::error::Result;
use crate::stats::linalg::solve;
use crate::stats::special::{chi2_sf, sigmoid};

const MAX_ABS_COEF: f64 = 30.0;

/// Newton/IRLS fit of a binary logit. Returns (coefficients, log
/// likelihood), or None on separation or failed convergence.
pub(crate) fn irls_logit(columns: &[Vec<f64>], y: &[f64]) -> Option<(Vec<f64>, f64)> {
    let p = columns.len();
    let n = y.len();
    let mut beta = vec![0.0; p];
    let ll_at = |beta: &[f64]| -> f64 {
        let mut ll = 0.0;
        for v in 0..n {
            let eta: f64 = (0..p).map(|j| beta[j] * columns[j][v]).sum();
            let pr = sigmoid(eta).clamp(1e-12, 1.0 - 1e-12);
            ll += y[v] * pr.ln() + (1.0 - y[v]) * (1.0 - pr).ln();
        }
        ll
    };
    let mut ll = ll_at(&beta);
    for _ in 0..100 {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for v in 0..n {
            let eta: f64 = (0..p).map(|j| beta[j] * columns[j][v]).sum();
            let pr = sigmoid(eta);
            let resid = y[v] - pr;
            let w = (pr * (1.0 - pr)).max(1e-12);
            for j in 0..p {
                grad[j] += columns[j][v] * resid;
                for l in j..p {
                    hess[j][l] += w * columns[j][v] * columns[l][v];
                }
            }
        }
        for j in 0..p {
            for l in 0..j {
                hess[j][l] = hess[l][j];
            }
        }
        let delta = solve(hess, grad).ok()?;
        let mut step = 1.0;
        let mut accepted = false;
        while step >= 1e-8 {
            let trial: Vec<f64> = beta
                .iter()
                .zip(&delta)
                .map(|(b, d)| b + step * d)
                .collect();
            let trial_ll = ll_at(&trial);
            if trial_ll >= ll - 1e-12 {
                let moved = delta.iter().map(|d| (d * step).abs()).fold(0.0, f64::max);
                beta = trial;
                ll = trial_ll;
                accepted = true;
                if moved < 1e-10 {
                    if beta.iter().any(|b| b.abs() > MAX_ABS_COEF) {
                        return None;
                    }
                    return Some((beta, ll));
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return None;
        }
        if beta.iter().any(|b| b.abs() > 2.0 * MAX_ABS_COEF) {
            return None; // running away: (quasi-)separation
        }
    }
    None
}

/// Nagelkerke R^2 of a model with log-likelihood `ll` against the
/// intercept-only `ll_null` on n observations.
fn nagelkerke_r2(ll: f64, ll_null: f64, n: usize) -> f64 {
    let nf = n as f64;
    let cox_snell = 1.0 - (2.0 * (ll_null - ll) / nf).exp();
    let ceiling = 1.0 - (2.0 * ll_null / nf).exp();
    if ceiling <= 0.0 {
        0.0
    } else {
        cox_snell / ceiling
    }
}

/// Likelihood-ratio DIF test per item. Students outside the two groups are
/// ignored; items with zero variance among the grouped students, and items
/// whose logit fits diverge (separation), are skipped.
pub fn logistic_dif(
    matrix: &ResponseMatrix,
    groups: &DifGroups,
    anchors: &BTreeSet<String>,
    cfg: &DifConfig,
) -> Result<Vec<ItemOutcome>> {
    let membership = groups.membership(matrix)?;
    let anchor_idx: Vec<usize> = matrix
        .items()
        .iter()
        .enumerate()
        .filter(|(_, item)| anchors.contains(*item))
        .map(|(i, _)| i)
        .collect();
    let rows_in: Vec<usize> = (0..matrix.n_students())
        .filter(|&v| membership[v].is_some())
        .collect();
    let n = rows_in.len();

    let mut out = Vec::with_capacity(matrix.n_items());
    for (i, item) in matrix.items().iter().enumerate() {
        let scores_all = matching_scores(matrix, &anchor_idx, i, cfg.include_studied_item);
        let y: Vec<f64> = rows_in
            .iter()
            .map(|&v| matrix.rows()[v].responses[i] as f64)
            .collect();
        let correct: f64 = y.iter().sum();
        if correct == 0.0 || correct == n as f64 {
            out.push(ItemOutcome::Skipped {
                item: item.clone(),
                reason: "item has zero variance within the grouped students".into(),
            });
            continue;
        }
        let ones = vec![1.0; n];
        let score: Vec<f64> = rows_in.iter().map(|&v| scores_all[v] as f64).collect();
        let group: Vec<f64> = rows_in
            .iter()
            .map(|&v| if membership[v] == Some(true) { 1.0 } else { 0.0 })
            .collect();
        let interaction: Vec<f64> = group.iter().zip(&score).map(|(g, s)| g * s).collect();

        // closed-form intercept-only likelihood for the Nagelkerke baseline
        let p0 = correct / n as f64;
        let ll_null = correct * p0.ln() + (n as f64 - correct) * (1.0 - p0).ln();

        let m0 = irls_logit(&[ones.clone(), score.clone()], &y);
        let m1 = irls_logit(&[ones, score, group, interaction], &y);
        let (Some((_, ll0)), Some((_, ll1))) = (m0, m1) else {
            out.push(ItemOutcome::Skipped {
                item: item.clone(),
                reason: "logit fit diverged (separation)".into(),
            });
            continue;
        };
        let lrt = (2.0 * (ll1 - ll0)).max(0.0);
        let delta_r2 =
            (nagelkerke_r2(ll1, ll_null, n) - nagelkerke_r2(ll0, ll_null, n)).max(0.0);
        out.push(ItemOutcome::Computed(RawDif {
            item: item.clone(),
            statistic: lrt,
            p_value: chi2_sf(lrt, 2.0),
            effect_size: Some(delta_r2),
            effect_class: Some(r2_delta_class(delta_r2)),
        }));
    }
    Ok(out)
}
