//! Mantel-Haenszel DIF detection: students are stratified by their
//! matching score, and each item's 2x2 (group x response) tables are pooled
//! across strata into the continuity-corrected chi-squared statistic and
//! the common odds ratio.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{ets_delta_class, matching_scores, DifConfig, DifGroups, ItemOutcome, RawDif};
use crate::dataset::ResponseMatrix;
use crate::error::Result;
use crate::stats::special::chi2_sf;

/// One stratum's 2x2 counts.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct Stratum2x2 {
    /// reference correct
    pub a: f64,
    /// reference incorrect
    pub b: f64,
    /// focal correct
    pub c: f64,
    /// focal incorrect
    pub d: f64,
}

impl Stratum2x2 {
    pub fn total(&self) -> f64 {
        self.a + self.b + self.c + self.d
    }
}

/// Pooled Mantel-Haenszel statistics over strata: the continuity-corrected
/// chi-squared and the common odds ratio. Strata with fewer than two
/// observations are ignored; degenerate margins contribute nothing.
/// Returns None when every stratum is degenerate (zero pooled variance or
/// an undefined odds ratio).
pub fn mh_statistics(strata: &[Stratum2x2]) -> Option<(f64, f64)> {
    let mut sum_a = 0.0;
    let mut sum_e = 0.0;
    let mut sum_v = 0.0;
    let mut or_num = 0.0;
    let mut or_den = 0.0;
    for s in strata {
        let n = s.total();
        if n < 2.0 {
            continue;
        }
        let n_ref = s.a + s.b;
        let n_foc = s.c + s.d;
        let m_correct = s.a + s.c;
        let m_wrong = s.b + s.d;
        sum_a += s.a;
        sum_e += n_ref * m_correct / n;
        sum_v += n_ref * n_foc * m_correct * m_wrong / (n * n * (n - 1.0));
        or_num += s.a * s.d / n;
        or_den += s.b * s.c / n;
    }
    if sum_v <= 0.0 || or_num <= 0.0 || or_den <= 0.0 {
        return None;
    }
    let corrected = ((sum_a - sum_e).abs() - 0.5).max(0.0);
    let chi2 = corrected * corrected / sum_v;
    Some((chi2, or_num / or_den))
}

/// Mantel-Haenszel detection for every item, matching on the anchor-set
/// total score. Effect size is the ETS delta, -2.35 ln(alpha_MH).
pub fn mantel_haenszel(
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

    let mut out = Vec::with_capacity(matrix.n_items());
    for (i, item) in matrix.items().iter().enumerate() {
        let scores = matching_scores(matrix, &anchor_idx, i, cfg.include_studied_item);
        let mut strata: BTreeMap<u32, Stratum2x2> = BTreeMap::new();
        for (v, row) in matrix.rows().iter().enumerate() {
            let Some(is_focal) = membership[v] else {
                continue;
            };
            let table = strata.entry(scores[v]).or_default();
            let correct = row.responses[i] == 1;
            match (is_focal, correct) {
                (false, true) => table.a += 1.0,
                (false, false) => table.b += 1.0,
                (true, true) => table.c += 1.0,
                (true, false) => table.d += 1.0,
            }
        }
        let tables: Vec<Stratum2x2> = strata.into_values().collect();
        match mh_statistics(&tables) {
            Some((chi2, alpha_mh)) => {
                let delta = -2.35 * alpha_mh.ln();
                out.push(ItemOutcome::Computed(RawDif {
                    item: item.clone(),
                    statistic: chi2,
                    p_value: chi2_sf(chi2, 1.0),
                    effect_size: Some(delta),
                    effect_class: Some(ets_delta_class(delta)),
                }));
            }
            None => out.push(ItemOutcome::Skipped {
                item: item.clone(),
                reason: "all strata degenerate; odds ratio undefined".into(),
            }),
        }
    }
    Ok(out)
}
