//! Differential item functioning between two groups: Mantel-Haenszel,
//! logistic-regression likelihood-ratio, and Lord's chi-squared detectors,
//! iterative anchor purification with Benjamini-Hochberg adjustment, effect
//! size classes, and the two-of-three synthesis.

mod logistic;
mod lord;
mod mh;

pub use logistic::logistic_dif;
pub use lord::lords_chi2;
pub use mh::{mantel_haenszel, mh_statistics, Stratum2x2};

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::dataset::ResponseMatrix;
use crate::error::{Error, Result};
use crate::inference::benjamini_hochberg;
use crate::irt::{FitOptions, ModelKind, QuadratureSpec};

/// The two student groups being contrasted, named by grouping column and
/// the values that define each side.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifGroups {
    pub column: String,
    pub reference: BTreeSet<String>,
    pub focal: BTreeSet<String>,
}

impl DifGroups {
    pub fn new<I, J, S, T>(column: &str, reference: I, focal: J) -> Self
    where
        I: IntoIterator<Item = S>,
        J: IntoIterator<Item = T>,
        S: Into<String>,
        T: Into<String>,
    {
        DifGroups {
            column: column.to_string(),
            reference: reference.into_iter().map(Into::into).collect(),
            focal: focal.into_iter().map(Into::into).collect(),
        }
    }

    /// Swapped reference/focal roles.
    pub fn swapped(&self) -> Self {
        DifGroups {
            column: self.column.clone(),
            reference: self.focal.clone(),
            focal: self.reference.clone(),
        }
    }

    /// Per-row membership: Some(false) reference, Some(true) focal, None
    /// out of scope. Errors when either side is empty or the sides overlap.
    pub(crate) fn membership(&self, matrix: &ResponseMatrix) -> Result<Vec<Option<bool>>> {
        if self.reference.intersection(&self.focal).next().is_some() {
            return Err(Error::NotTwoGroups(
                "reference and focal value sets overlap".into(),
            ));
        }
        let mut out = Vec::with_capacity(matrix.n_students());
        let mut n_ref = 0usize;
        let mut n_focal = 0usize;
        for row in matrix.rows() {
            let label = matrix.group_label(row, &self.column)?;
            let side = if self.reference.contains(&label) {
                n_ref += 1;
                Some(false)
            } else if self.focal.contains(&label) {
                n_focal += 1;
                Some(true)
            } else {
                None
            };
            out.push(side);
        }
        if n_ref == 0 || n_focal == 0 {
            return Err(Error::NotTwoGroups(format!(
                "reference has {n_ref} rows, focal has {n_focal}"
            )));
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifMethod {
    MantelHaenszel,
    LogisticRegression,
    LordChi2,
}

impl std::fmt::Display for DifMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DifMethod::MantelHaenszel => write!(f, "mantel_haenszel"),
            DifMethod::LogisticRegression => write!(f, "logistic_regression"),
            DifMethod::LordChi2 => write!(f, "lord_chi2"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EffectClass {
    Negligible,
    Moderate,
    Large,
}

/// ETS delta scale: |delta| <= 1 negligible, < 1.5 moderate, else large.
pub fn ets_delta_class(delta: f64) -> EffectClass {
    let d = delta.abs();
    if d <= 1.0 {
        EffectClass::Negligible
    } else if d < 1.5 {
        EffectClass::Moderate
    } else {
        EffectClass::Large
    }
}

/// Nagelkerke delta-R^2 scale: < 0.035 negligible, < 0.07 moderate,
/// else large.
pub fn r2_delta_class(delta_r2: f64) -> EffectClass {
    if delta_r2 < 0.035 {
        EffectClass::Negligible
    } else if delta_r2 < 0.07 {
        EffectClass::Moderate
    } else {
        EffectClass::Large
    }
}

/// One detector's raw outcome for one item, before adjustment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawDif {
    pub item: String,
    pub statistic: f64,
    pub p_value: f64,
    pub effect_size: Option<f64>,
    pub effect_class: Option<EffectClass>,
}

/// Raw outcome or a per-item skip (separation, degeneracy).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub enum ItemOutcome {
    Computed(RawDif),
    Skipped { item: String, reason: String },
}

impl ItemOutcome {
    pub fn item(&self) -> &str {
        match self {
            ItemOutcome::Computed(r) => &r.item,
            ItemOutcome::Skipped { item, .. } => item,
        }
    }
}

/// Final per-item detector row after Benjamini-Hochberg adjustment.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifResult {
    pub item: String,
    pub statistic: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub effect_size: Option<f64>,
    pub effect_class: Option<EffectClass>,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SkippedItem {
    pub item: String,
    pub reason: String,
}

/// One purification round's flag set.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTrace {
    pub round: usize,
    pub flagged: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodReport {
    pub method: DifMethod,
    /// How the two groups were put on a common footing: the matching
    /// criterion for score-matched methods, the equating transform for
    /// parameter-based ones.
    pub matching: String,
    pub results: Vec<DifResult>,
    pub skipped: Vec<SkippedItem>,
    pub rounds: Vec<RoundTrace>,
    pub converged: bool,
    pub cycle_detected: bool,
    pub anchor_exhausted: bool,
    /// Set when the whole method aborted (undersized group, fit failure);
    /// the method then abstains from every vote.
    pub error: Option<String>,
}

fn matching_description(method: DifMethod, cfg: &DifConfig) -> String {
    match method {
        DifMethod::MantelHaenszel | DifMethod::LogisticRegression => format!(
            "purified anchor total score ({} the studied item)",
            if cfg.include_studied_item { "including" } else { "excluding" }
        ),
        DifMethod::LordChi2 => "mean/sigma equating on purified anchor difficulties".into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Dif,
    NoDif,
}

/// Cross-method vote for one item; DIF when at least two detectors flag it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisItem {
    pub item: String,
    pub votes: usize,
    pub n_methods: usize,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifAnalysis {
    pub groups: DifGroups,
    pub alpha: f64,
    pub methods: Vec<MethodReport>,
    pub synthesis: Vec<SynthesisItem>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DifConfig {
    /// Significance level applied to BH-adjusted p-values.
    pub alpha: f64,
    pub max_rounds: usize,
    pub methods: Vec<DifMethod>,
    /// Keep the studied item inside its own matching score (the
    /// conventional default for score-matched detectors).
    pub include_studied_item: bool,
    pub lord_kind: ModelKind,
    /// Minimum rows per group before Lord's method will fit.
    pub lord_min_rows: usize,
    pub fit: FitOptions,
    pub quadrature: QuadratureSpec,
}

impl Default for DifConfig {
    fn default() -> Self {
        DifConfig {
            alpha: 0.05,
            max_rounds: 10,
            methods: vec![
                DifMethod::MantelHaenszel,
                DifMethod::LogisticRegression,
                DifMethod::LordChi2,
            ],
            include_studied_item: true,
            lord_kind: ModelKind::TwoPl,
            lord_min_rows: 200,
            fit: FitOptions {
                // parameter noise at DIF sample sizes dwarfs 1e-3
                tol: 1e-3,
                ..FitOptions::default()
            },
            quadrature: QuadratureSpec {
                n_nodes: 61,
                lo: -6.0,
                hi: 6.0,
            },
        }
    }
}

/// Matching score per student: the anchor total, keeping or removing the
/// studied item per the configuration. The studied item always counts
/// toward its own score when `include_studied` is set, even after
/// purification removed it from the anchor set.
pub(crate) fn matching_scores(
    matrix: &ResponseMatrix,
    anchor_idx: &[usize],
    studied: usize,
    include_studied: bool,
) -> Vec<u32> {
    let in_anchor = anchor_idx.contains(&studied);
    matrix
        .rows()
        .iter()
        .map(|row| {
            let mut s: u32 = anchor_idx.iter().map(|&j| row.responses[j] as u32).sum();
            if include_studied && !in_anchor {
                s += row.responses[studied] as u32;
            } else if !include_studied && in_anchor {
                s -= row.responses[studied] as u32;
            }
            s
        })
        .collect()
}

fn run_method(
    matrix: &ResponseMatrix,
    groups: &DifGroups,
    method: DifMethod,
    anchors: &BTreeSet<String>,
    cfg: &DifConfig,
    lord_ctx: Option<&lord::LordContext>,
) -> Result<Vec<ItemOutcome>> {
    match method {
        DifMethod::MantelHaenszel => mantel_haenszel(matrix, groups, anchors, cfg),
        DifMethod::LogisticRegression => logistic_dif(matrix, groups, anchors, cfg),
        DifMethod::LordChi2 => {
            let ctx = lord_ctx.expect("lord context prepared for LordChi2");
            Ok(lord::lord_evaluate(ctx, anchors))
        }
    }
}

/// Run one detector with iterative anchor purification: start from the full
/// item set, flag on BH-adjusted p-values, remove flagged items from the
/// anchor set, and repeat until the flag set stabilizes (or cycles, or
/// `max_rounds` is hit).
fn purify_method(
    matrix: &ResponseMatrix,
    groups: &DifGroups,
    method: DifMethod,
    cfg: &DifConfig,
) -> Result<MethodReport> {
    let lord_ctx = match method {
        DifMethod::LordChi2 => Some(lord::lord_prepare(matrix, groups, cfg)?),
        _ => None,
    };
    let all_items: BTreeSet<String> = matrix.items().iter().cloned().collect();
    let mut anchors = all_items.clone();
    let mut seen_flag_sets: Vec<BTreeSet<String>> = Vec::new();
    let mut rounds = Vec::new();
    let mut converged = false;
    let mut cycle_detected = false;
    let mut anchor_exhausted = false;
    let mut last: Option<(Vec<ItemOutcome>, Vec<f64>, BTreeSet<String>)> = None;

    for round in 1..=cfg.max_rounds {
        let outcomes = run_method(matrix, groups, method, &anchors, cfg, lord_ctx.as_ref())?;
        let p_values: Vec<f64> = outcomes
            .iter()
            .filter_map(|o| match o {
                ItemOutcome::Computed(r) => Some(r.p_value),
                ItemOutcome::Skipped { .. } => None,
            })
            .collect();
        let adjusted = benjamini_hochberg(&p_values)?;
        let mut flagged = BTreeSet::new();
        let mut adj_iter = adjusted.iter();
        for o in &outcomes {
            if let ItemOutcome::Computed(r) = o {
                let adj = *adj_iter.next().expect("adjusted p per computed item");
                if adj < cfg.alpha {
                    flagged.insert(r.item.clone());
                }
            }
        }
        rounds.push(RoundTrace {
            round,
            flagged: flagged.iter().cloned().collect(),
        });
        let new_anchors: BTreeSet<String> = all_items.difference(&flagged).cloned().collect();
        let repeat = seen_flag_sets.contains(&flagged);
        last = Some((outcomes, adjusted, flagged.clone()));
        if new_anchors == anchors {
            converged = true;
            break;
        }
        if repeat {
            cycle_detected = true;
            converged = true;
            break;
        }
        seen_flag_sets.push(flagged);
        if new_anchors.is_empty() {
            anchor_exhausted = true;
            break;
        }
        anchors = new_anchors;
    }

    let (outcomes, adjusted, _) = last.expect("at least one purification round ran");
    let mut results = Vec::new();
    let mut skipped = Vec::new();
    let mut adj_iter = adjusted.into_iter();
    for o in outcomes {
        match o {
            ItemOutcome::Computed(r) => {
                let p_adjusted = adj_iter.next().expect("adjusted p per computed item");
                results.push(DifResult {
                    flagged: p_adjusted < cfg.alpha,
                    item: r.item,
                    statistic: r.statistic,
                    p_value: r.p_value,
                    p_adjusted,
                    effect_size: r.effect_size,
                    effect_class: r.effect_class,
                });
            }
            ItemOutcome::Skipped { item, reason } => skipped.push(SkippedItem { item, reason }),
        }
    }
    Ok(MethodReport {
        method,
        matching: matching_description(method, cfg),
        results,
        skipped,
        rounds,
        converged,
        cycle_detected,
        anchor_exhausted,
        error: None,
    })
}

/// Run every configured detector with purification, then synthesize the
/// per-item votes: an item is DIF when at least two detectors flag it.
pub fn purify_and_synthesize(
    matrix: &ResponseMatrix,
    groups: &DifGroups,
    cfg: &DifConfig,
) -> Result<DifAnalysis> {
    groups.membership(matrix)?;
    if cfg.methods.is_empty() {
        return Err(Error::InvalidParameter("no DIF methods requested".into()));
    }
    let mut methods = Vec::new();
    for method in &cfg.methods {
        match purify_method(matrix, groups, *method, cfg) {
            Ok(report) => methods.push(report),
            // a broken detector abstains; the others still vote
            Err(err) => methods.push(MethodReport {
                method: *method,
                matching: matching_description(*method, cfg),
                results: vec![],
                skipped: vec![],
                rounds: vec![],
                converged: false,
                cycle_detected: false,
                anchor_exhausted: false,
                error: Some(err.to_string()),
            }),
        }
    }
    let mut synthesis = Vec::new();
    for item in matrix.items() {
        let mut votes = 0;
        let mut n_methods = 0;
        for report in &methods {
            if let Some(res) = report.results.iter().find(|r| &r.item == item) {
                n_methods += 1;
                if res.flagged {
                    votes += 1;
                }
            }
        }
        synthesis.push(SynthesisItem {
            item: item.clone(),
            votes,
            n_methods,
            verdict: if votes >= 2 { Verdict::Dif } else { Verdict::NoDif },
        });
    }
    Ok(DifAnalysis {
        groups: groups.clone(),
        alpha: cfg.alpha,
        methods,
        synthesis,
    })
}
