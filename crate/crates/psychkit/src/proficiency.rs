//! Proficiency-level construction on the logit scale: adjusted item
//! difficulties at the 62% response probability, 0.8-logit bands with open
//! tails, per-level anchor items, and per-group student distributions.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::irt::{IrtModel, ModelKind};
use crate::stats::special::sigmoid;

/// Ability at which P(correct) reaches `target_p` for an item with
/// discrimination `a` and difficulty `b`:
/// theta = (1/a) ln(p/(1-p)) + b.
pub fn adjusted_difficulty(a: f64, b: f64, target_p: f64) -> Result<f64> {
    if a <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "discrimination must be positive, got {a}"
        )));
    }
    if !(0.0 < target_p && target_p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target probability must lie in (0,1), got {target_p}"
        )));
    }
    Ok((target_p / (1.0 - target_p)).ln() / a + b)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileOptions {
    /// Lower edge of the band containing the origin; bounds fall at
    /// origin + m * level_width.
    pub origin: f64,
    pub level_width: f64,
    /// Levels holding fewer items than this are marked sparse.
    pub min_items: usize,
    /// A band must hold at least this many items to stand as an interior
    /// level; leading/trailing bands below the threshold merge into the
    /// open tail levels.
    pub interior_min_items: usize,
    pub target_p: f64,
}

impl Default for ProfileOptions {
    fn default() -> Self {
        ProfileOptions {
            origin: 0.0,
            level_width: 0.8,
            min_items: 2,
            interior_min_items: 3,
            target_p: 0.62,
        }
    }
}

/// One ability band. The first level is open below (lower = None) and the
/// last open above (upper = None); interior levels are exactly
/// `level_width` wide.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Level {
    pub index: usize,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
    /// Items in the band, ordered by adjusted difficulty.
    pub items: Vec<String>,
    /// Item nearest the band midpoint, when the band is nonempty.
    pub anchor: Option<String>,
    pub sparse: bool,
}

impl Level {
    pub fn contains(&self, theta: f64) -> bool {
        self.lower.map_or(true, |lo| theta >= lo) && self.upper.map_or(true, |hi| theta < hi)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupDistribution {
    pub group: String,
    pub n: usize,
    /// Percentage of the group per level, aligned with the level list.
    pub percent: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProficiencyProfile {
    pub options: ProfileOptions,
    pub levels: Vec<Level>,
    /// (item, adjusted difficulty) in model item order.
    pub adjusted_difficulties: Vec<(String, f64)>,
    pub student_distribution: Vec<GroupDistribution>,
}

impl ProficiencyProfile {
    pub fn level_of(&self, theta: f64) -> usize {
        self.levels
            .iter()
            .position(|lv| lv.contains(theta))
            .expect("levels partition the real line")
    }

    /// Item names per level index.
    pub fn item_assignment(&self) -> BTreeMap<String, usize> {
        let mut out = BTreeMap::new();
        for lv in &self.levels {
            for item in &lv.items {
                out.insert(item.clone(), lv.index);
            }
        }
        out
    }
}

/// Abilities of one student group, labeled.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupAbilities {
    pub label: String,
    pub theta: Vec<f64>,
}

/// Build the proficiency profile from a fitted 2PL model: adjusted
/// difficulties are binned into `level_width` bands anchored at `origin`;
/// the maximal run of bands holding at least `interior_min_items` items
/// forms the interior levels and everything outside merges into the open
/// tail levels. Students are assigned to levels by their ability estimate.
pub fn build_profile(
    model: &IrtModel,
    groups: &[GroupAbilities],
    opts: &ProfileOptions,
) -> Result<ProficiencyProfile> {
    if model.kind != ModelKind::TwoPl {
        return Err(Error::InvalidParameter(
            "proficiency profiles need per-item discriminations (a 2PL model)".into(),
        ));
    }
    if !(opts.level_width > 0.0) {
        return Err(Error::InvalidParameter("level width must be positive".into()));
    }
    if model.n_items() == 0 {
        return Err(Error::TooFew {
            what: "items",
            min: 1,
            found: 0,
        });
    }
    for g in groups {
        if g.theta.is_empty() {
            return Err(Error::EmptyGroup(g.label.clone()));
        }
    }

    let mut adjusted = Vec::with_capacity(model.n_items());
    for i in 0..model.n_items() {
        adjusted.push((
            model.items[i].clone(),
            adjusted_difficulty(model.a[i], model.b[i], opts.target_p)?,
        ));
    }

    let w = opts.level_width;
    let bin_of = |theta: f64| ((theta - opts.origin) / w).floor() as i64;
    let mut bin_counts: BTreeMap<i64, usize> = BTreeMap::new();
    for (_, theta) in &adjusted {
        *bin_counts.entry(bin_of(*theta)).or_default() += 1;
    }

    // interior run: the lowest..highest bin holding >= interior_min_items;
    // fall back to the full occupied range when no bin qualifies
    let dense: Vec<i64> = bin_counts
        .iter()
        .filter(|(_, &c)| c >= opts.interior_min_items)
        .map(|(&m, _)| m)
        .collect();
    let (first, last) = if let (Some(&lo), Some(&hi)) = (dense.first(), dense.last()) {
        (lo, hi)
    } else {
        let occupied: Vec<i64> = bin_counts.keys().copied().collect();
        (occupied[0], *occupied.last().unwrap())
    };

    // level 0 open below, interior bins first..=last, top open above
    let n_levels = (last - first + 1) as usize + 2;
    let lower_of = |m: i64| opts.origin + m as f64 * w;
    let mut levels: Vec<Level> = Vec::with_capacity(n_levels);
    levels.push(Level {
        index: 0,
        lower: None,
        upper: Some(lower_of(first)),
        items: vec![],
        anchor: None,
        sparse: false,
    });
    for (offset, m) in (first..=last).enumerate() {
        levels.push(Level {
            index: offset + 1,
            lower: Some(lower_of(m)),
            upper: Some(lower_of(m + 1)),
            items: vec![],
            anchor: None,
            sparse: false,
        });
    }
    levels.push(Level {
        index: n_levels - 1,
        lower: Some(lower_of(last + 1)),
        upper: None,
        items: vec![],
        anchor: None,
        sparse: false,
    });

    // assign items, ordered by adjusted difficulty within each level
    let mut order: Vec<usize> = (0..adjusted.len()).collect();
    order.sort_by(|&x, &y| adjusted[x].1.partial_cmp(&adjusted[y].1).unwrap());
    for &ix in &order {
        let (ref item, theta) = adjusted[ix];
        let li = levels
            .iter()
            .position(|lv| lv.contains(theta))
            .expect("levels partition the line");
        levels[li].items.push(item.clone());
    }

    // anchors: nearest adjusted difficulty to the band midpoint; open tails
    // use the half-width point beside their finite bound
    let theta_of = |item: &str| {
        adjusted
            .iter()
            .find(|(name, _)| name == item)
            .map(|(_, t)| *t)
            .unwrap()
    };
    let item_pos = |item: &str| model.items.iter().position(|i| i == item).unwrap();
    for lv in levels.iter_mut() {
        if lv.items.is_empty() {
            continue;
        }
        let midpoint = match (lv.lower, lv.upper) {
            (Some(lo), Some(hi)) => 0.5 * (lo + hi),
            (None, Some(hi)) => hi - 0.5 * w,
            (Some(lo), None) => lo + 0.5 * w,
            (None, None) => 0.0,
        };
        let anchor = lv
            .items
            .iter()
            .min_by(|x, y| {
                let dx = (theta_of(x) - midpoint).abs();
                let dy = (theta_of(y) - midpoint).abs();
                dx.partial_cmp(&dy)
                    .unwrap()
                    .then_with(|| item_pos(x).cmp(&item_pos(y)))
            })
            .cloned();
        lv.anchor = anchor;
    }

    // sparse: too few items, or an open tail whose items spread past one
    // band width (too thin per width to describe reliably)
    for lv in levels.iter_mut() {
        let open = lv.lower.is_none() || lv.upper.is_none();
        let span = if lv.items.len() >= 2 {
            let ts: Vec<f64> = lv.items.iter().map(|i| theta_of(i)).collect();
            ts.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                - ts.iter().cloned().fold(f64::INFINITY, f64::min)
        } else {
            0.0
        };
        lv.sparse = lv.items.len() < opts.min_items || (open && span > w);
    }

    // per-group student distribution over the levels
    let mut student_distribution = Vec::with_capacity(groups.len());
    for g in groups {
        let mut counts = vec![0usize; levels.len()];
        for &theta in &g.theta {
            let li = levels
                .iter()
                .position(|lv| lv.contains(theta))
                .expect("levels partition the line");
            counts[li] += 1;
        }
        let n = g.theta.len();
        student_distribution.push(GroupDistribution {
            group: g.label.clone(),
            n,
            percent: counts
                .iter()
                .map(|&c| 100.0 * c as f64 / n as f64)
                .collect(),
        });
    }

    Ok(ProficiencyProfile {
        options: opts.clone(),
        levels,
        adjusted_difficulties: adjusted,
        student_distribution,
    })
}

/// Per-level check of the band semantics: the mean model probability over
/// the level's items for a student at the lower bound (target 52%) and at
/// the upper bound (target 70%).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LevelDiagnostic {
    pub level: usize,
    pub mean_p_lower: Option<f64>,
    pub mean_p_upper: Option<f64>,
    pub deviation_lower: Option<f64>,
    pub deviation_upper: Option<f64>,
    pub note: Option<String>,
}

pub const LOWER_BOUND_TARGET: f64 = 0.52;
pub const UPPER_BOUND_TARGET: f64 = 0.70;

/// Evaluate the 52%/70% band semantics for every finite, nonempty level.
/// The targets hold by construction only when items are spread through the
/// band, so this is a diagnostic rather than a constraint.
pub fn verify_level_semantics(profile: &ProficiencyProfile, model: &IrtModel) -> Vec<LevelDiagnostic> {
    let index_of = |item: &str| model.items.iter().position(|i| i == item);
    profile
        .levels
        .iter()
        .map(|lv| {
            if lv.items.is_empty() {
                return LevelDiagnostic {
                    level: lv.index,
                    mean_p_lower: None,
                    mean_p_upper: None,
                    deviation_lower: None,
                    deviation_upper: None,
                    note: Some("empty level".into()),
                };
            }
            let (Some(lo), Some(hi)) = (lv.lower, lv.upper) else {
                return LevelDiagnostic {
                    level: lv.index,
                    mean_p_lower: None,
                    mean_p_upper: None,
                    deviation_lower: None,
                    deviation_upper: None,
                    note: Some("open level; bound probabilities undefined".into()),
                };
            };
            let mean_p = |theta: f64| {
                let mut s = 0.0;
                for item in &lv.items {
                    let i = index_of(item).expect("profile items come from the model");
                    s += sigmoid(model.a[i] * (theta - model.b[i]));
                }
                s / lv.items.len() as f64
            };
            let p_lo = mean_p(lo);
            let p_hi = mean_p(hi);
            LevelDiagnostic {
                level: lv.index,
                mean_p_lower: Some(p_lo),
                mean_p_upper: Some(p_hi),
                deviation_lower: Some(p_lo - LOWER_BOUND_TARGET),
                deviation_upper: Some(p_hi - UPPER_BOUND_TARGET),
                note: if lv.sparse {
                    Some("sparse level".into())
                } else {
                    None
                },
            }
        })
        .collect()
}
