//! Lord's chi-squared DIF detection: the chosen IRT model is fitted to
//! each group, the focal scale is equated onto the reference scale by a
//! mean/sigma transform of the anchor-item difficulties, and each item's
//! parameter difference is tested against the sum of the per-group
//! parameter covariances (empirical Fisher information of the marginal
//! likelihood scores).

use std::collections::BTreeSet;

use super::{DifConfig, DifGroups, ItemOutcome, RawDif};
use crate::dataset::{ResponseMatrix, RowFilter};
use crate::error::{Error, Result};
use crate::irt::{fit, IrtModel, ModelKind, QuadratureGrid};
use crate::stats::linalg::invert_2x2;
use crate::stats::special::chi2_sf;
use crate::stats::mean_var_pop;

/// Per-item parameter covariance at the solution.
#[derive(Debug, Clone, Copy)]
pub(crate) enum ItemCov {
    /// Covariance of (a, b).
    TwoPl([[f64; 2]; 2]),
    /// Variance of b (shared-slope model).
    OnePl(f64),
}

/// Both group fits plus everything purification rounds reuse; the fits are
/// computed once, rounds only re-equate.
pub(crate) struct LordContext {
    pub items: Vec<String>,
    pub model_ref: IrtModel,
    pub model_focal: IrtModel,
    pub cov_ref: Vec<Option<ItemCov>>,
    pub cov_focal: Vec<Option<ItemCov>>,
    /// Items unusable in at least one group, with reasons.
    pub dropped: Vec<(String, String)>,
    pub kind: ModelKind,
}

/// Empirical Fisher information per item: sum over students of the outer
/// product of the marginal score vector d log L_v / d(a_i, b_i), computed
/// from the posterior node weights at the fitted parameters.
fn item_covariances(
    matrix: &ResponseMatrix,
    model: &IrtModel,
    grid: &QuadratureGrid,
) -> Vec<Option<ItemCov>> {
    use crate::irt::internals::{posterior_pass, NodeTables, Responses};

    let resp = Responses::from_matrix(matrix);
    let (n, k) = (resp.n, resp.k);
    let q = grid.len();
    let tables = NodeTables::new(&model.a, &model.b, grid);
    let mut weights = vec![0.0; n * q];
    posterior_pass(&resp, &tables, &mut weights);

    // response probabilities per (item, node)
    let probs: Vec<f64> = tables.lp.iter().map(|lp| lp.exp()).collect();
    let nodes = grid.nodes();

    let mut info = vec![[[0.0f64; 2]; 2]; k];
    for v in 0..n {
        let w = &weights[v * q..(v + 1) * q];
        let row = &resp.flat[v * k..(v + 1) * k];
        for i in 0..k {
            let u = row[i] as f64;
            let p_row = &probs[i * q..(i + 1) * q];
            let mut t0 = 0.0; // sum_q w (u - P)
            let mut t1 = 0.0; // sum_q w (u - P) theta
            for qi in 0..q {
                let r = w[qi] * (u - p_row[qi]);
                t0 += r;
                t1 += r * nodes[qi];
            }
            let s_a = t1 - model.b[i] * t0;
            let s_b = -model.a[i] * t0;
            info[i][0][0] += s_a * s_a;
            info[i][0][1] += s_a * s_b;
            info[i][1][0] += s_a * s_b;
            info[i][1][1] += s_b * s_b;
        }
    }
    info.into_iter()
        .map(|m| match model.kind {
            ModelKind::TwoPl => invert_2x2(m).map(ItemCov::TwoPl),
            ModelKind::OnePl => {
                if m[1][1] > 1e-12 {
                    Some(ItemCov::OnePl(1.0 / m[1][1]))
                } else {
                    None
                }
            }
        })
        .collect()
}

/// Split by group, drop items degenerate in either group, and fit the
/// chosen model per group. Errors on undersized groups and non-convergence.
pub(crate) fn lord_prepare(
    matrix: &ResponseMatrix,
    groups: &DifGroups,
    cfg: &DifConfig,
) -> Result<LordContext> {
    groups.membership(matrix)?;
    let ref_matrix = matrix.subset(
        &RowFilter::new().and(&groups.column, groups.reference.iter().cloned()),
    )?;
    let focal_matrix = matrix.subset(
        &RowFilter::new().and(&groups.column, groups.focal.iter().cloned()),
    )?;
    for (label, m) in [("reference", &ref_matrix), ("focal", &focal_matrix)] {
        if m.n_students() < cfg.lord_min_rows {
            return Err(Error::GroupTooSmall {
                group: label.to_string(),
                found: m.n_students(),
                min: cfg.lord_min_rows,
            });
        }
    }

    // items answered uniformly within a group cannot be fitted there
    let mut dropped = Vec::new();
    let mut drop_set = BTreeSet::new();
    for (li, m) in [("reference", &ref_matrix), ("focal", &focal_matrix)] {
        for i in 0..m.n_items() {
            let col = m.column(i);
            let correct: usize = col.iter().map(|&c| c as usize).sum();
            if correct == 0 || correct == col.len() {
                let item = m.items()[i].clone();
                if drop_set.insert(item.clone()) {
                    dropped.push((item, format!("degenerate in the {li} group")));
                }
            }
        }
    }
    let ref_matrix = ref_matrix.drop_items(&drop_set)?;
    let focal_matrix = focal_matrix.drop_items(&drop_set)?;
    if ref_matrix.n_items() < 2 {
        return Err(Error::TooFew {
            what: "fittable items",
            min: 2,
            found: ref_matrix.n_items(),
        });
    }

    let grid = cfg.quadrature.build()?;
    let model_ref = fit(&ref_matrix, cfg.lord_kind, &grid, &cfg.fit)?;
    let model_focal = fit(&focal_matrix, cfg.lord_kind, &grid, &cfg.fit)?;
    for (label, model) in [("reference", &model_ref), ("focal", &model_focal)] {
        if !model.converged {
            return Err(Error::InvalidParameter(format!(
                "{label} group fit did not converge within {} iterations",
                cfg.fit.max_iter
            )));
        }
    }
    let cov_ref = item_covariances(&ref_matrix, &model_ref, &grid);
    let cov_focal = item_covariances(&focal_matrix, &model_focal, &grid);

    Ok(LordContext {
        items: model_ref.items.clone(),
        model_ref,
        model_focal,
        cov_ref,
        cov_focal,
        dropped,
        kind: cfg.lord_kind,
    })
}

/// Mean/sigma equating constants from the anchor-item difficulties:
/// focal-to-reference transform theta -> A theta + B.
fn equating_constants(ctx: &LordContext, anchors: &BTreeSet<String>) -> Option<(f64, f64)> {
    let idx: Vec<usize> = ctx
        .items
        .iter()
        .enumerate()
        .filter(|(_, item)| anchors.contains(*item))
        .map(|(i, _)| i)
        .collect();
    if idx.is_empty() {
        return None;
    }
    let b_ref: Vec<f64> = idx.iter().map(|&i| ctx.model_ref.b[i]).collect();
    let b_foc: Vec<f64> = idx.iter().map(|&i| ctx.model_focal.b[i]).collect();
    let (m_ref, v_ref) = mean_var_pop(&b_ref);
    let (m_foc, v_foc) = mean_var_pop(&b_foc);
    let a = if idx.len() >= 2 && v_foc > 1e-12 && v_ref > 1e-12 {
        (v_ref / v_foc).sqrt()
    } else {
        1.0
    };
    Some((a, m_ref - a * m_foc))
}

/// Evaluate the per-item chi-squared statistics for the current anchor set.
pub(crate) fn lord_evaluate(ctx: &LordContext, anchors: &BTreeSet<String>) -> Vec<ItemOutcome> {
    let Some((scale, shift)) = equating_constants(ctx, anchors) else {
        return ctx
            .items
            .iter()
            .map(|item| ItemOutcome::Skipped {
                item: item.clone(),
                reason: "empty anchor set; equating impossible".into(),
            })
            .chain(ctx.dropped.iter().map(|(item, reason)| ItemOutcome::Skipped {
                item: item.clone(),
                reason: reason.clone(),
            }))
            .collect();
    };

    let mut out = Vec::new();
    for (i, item) in ctx.items.iter().enumerate() {
        let (Some(cov_r), Some(cov_f)) = (ctx.cov_ref[i], ctx.cov_focal[i]) else {
            out.push(ItemOutcome::Skipped {
                item: item.clone(),
                reason: "singular parameter covariance".into(),
            });
            continue;
        };
        let outcome = match (ctx.kind, cov_r, cov_f) {
            (ModelKind::TwoPl, ItemCov::TwoPl(sr), ItemCov::TwoPl(sf)) => {
                let a_f = ctx.model_focal.a[i] / scale;
                let b_f = scale * ctx.model_focal.b[i] + shift;
                let d = [ctx.model_ref.a[i] - a_f, ctx.model_ref.b[i] - b_f];
                // transform of the focal covariance: J = diag(1/A, A)
                let sf_t = [
                    [sf[0][0] / (scale * scale), sf[0][1]],
                    [sf[1][0], sf[1][1] * scale * scale],
                ];
                let total = [
                    [sr[0][0] + sf_t[0][0], sr[0][1] + sf_t[0][1]],
                    [sr[1][0] + sf_t[1][0], sr[1][1] + sf_t[1][1]],
                ];
                match invert_2x2(total) {
                    Some(inv) => {
                        let chi2 = d[0] * (inv[0][0] * d[0] + inv[0][1] * d[1])
                            + d[1] * (inv[1][0] * d[0] + inv[1][1] * d[1]);
                        let chi2 = chi2.max(0.0);
                        Some((chi2, 2.0))
                    }
                    None => None,
                }
            }
            (ModelKind::OnePl, ItemCov::OnePl(vr), ItemCov::OnePl(vf)) => {
                let b_f = scale * ctx.model_focal.b[i] + shift;
                let d = ctx.model_ref.b[i] - b_f;
                let total = vr + scale * scale * vf;
                if total > 0.0 {
                    Some((d * d / total, 1.0))
                } else {
                    None
                }
            }
            _ => None,
        };
        match outcome {
            Some((chi2, df)) => out.push(ItemOutcome::Computed(RawDif {
                item: item.clone(),
                statistic: chi2,
                p_value: chi2_sf(chi2, df),
                // the effect size is deliberately omitted for this method
                effect_size: None,
                effect_class: None,
            })),
            None => out.push(ItemOutcome::Skipped {
                item: item.clone(),
                reason: "singular combined covariance".into(),
            }),
        }
    }
    for (item, reason) in &ctx.dropped {
        out.push(ItemOutcome::Skipped {
            item: item.clone(),
            reason: reason.clone(),
        });
    }
    out
}

/// One-shot Lord's chi-squared run with a fixed anchor set.
pub fn lords_chi2(
    matrix: &ResponseMatrix,
    groups: &DifGroups,
    anchors: &BTreeSet<String>,
    cfg: &DifConfig,
) -> Result<Vec<ItemOutcome>> {
    let ctx = lord_prepare(matrix, groups, cfg)?;
    Ok(lord_evaluate(&ctx, anchors))
}
