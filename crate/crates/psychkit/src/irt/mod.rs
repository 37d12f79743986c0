//! Latent-trait models for binary items: marginal maximum likelihood
//! fitting of 1PL/2PL models over a fixed quadrature grid, curve and
//! information tables, EAP ability estimates, local-independence
//! diagnostics, model comparison, and Wright-map data.
//!
//! The response function is P(theta) = sigmoid(a (theta - b)); the 1PL
//! variant estimates a single slope shared by every item.

mod eap;
mod fit;
mod q3;
mod unidim;

pub use eap::{eap, AbilityEstimates};
pub use fit::{fit, FitOptions};
pub use q3::{yen_q3, Q3Pair, Q3Report, Q3Severity};
pub use unidim::{unidimensionality_screen, UnidimScreen};

pub(crate) mod internals {
    pub(crate) use super::fit::{posterior_pass, NodeTables, Responses};
}

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::special::{chi2_sf, sigmoid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "1PL")]
    OnePl,
    #[serde(rename = "2PL")]
    TwoPl,
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelKind::OnePl => write!(f, "1PL"),
            ModelKind::TwoPl => write!(f, "2PL"),
        }
    }
}

/// Fixed latent-trait quadrature: equally spaced nodes weighted by the
/// standard-normal density, renormalized to sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl QuadratureGrid {
    pub fn standard_normal(n_nodes: usize, lo: f64, hi: f64) -> Result<Self> {
        if n_nodes < 3 || !(lo < hi) {
            return Err(Error::InvalidParameter(format!(
                "quadrature needs >= 3 nodes and lo < hi, got {n_nodes} on [{lo}, {hi}]"
            )));
        }
        let step = (hi - lo) / (n_nodes - 1) as f64;
        let nodes: Vec<f64> = (0..n_nodes).map(|q| lo + q as f64 * step).collect();
        let raw: Vec<f64> = nodes.iter().map(|&t| (-0.5 * t * t).exp()).collect();
        let total: f64 = raw.iter().sum();
        let weights = raw.iter().map(|w| w / total).collect();
        Ok(QuadratureGrid { nodes, weights })
    }

    /// The default grid: 61 nodes on [-6, 6].
    pub fn default_61() -> Self {
        QuadratureGrid::standard_normal(61, -6.0, 6.0).expect("static grid")
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn spec(&self) -> QuadratureSpec {
        QuadratureSpec {
            n_nodes: self.nodes.len(),
            lo: self.nodes[0],
            hi: *self.nodes.last().unwrap(),
        }
    }
}

/// Compact description of a grid, stored inside fitted models.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub n_nodes: usize,
    pub lo: f64,
    pub hi: f64,
}

impl QuadratureSpec {
    pub fn build(&self) -> Result<QuadratureGrid> {
        QuadratureGrid::standard_normal(self.n_nodes, self.lo, self.hi)
    }
}

/// A fitted 1PL/2PL parameter set. For 1PL the shared slope is replicated
/// across `a`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IrtModel {
    pub kind: ModelKind,
    pub items: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub converged: bool,
    pub n_iterations: usize,
    /// Marginal log-likelihood at every EM iteration (ending at the
    /// returned parameters); non-decreasing by the EM contract.
    pub ll_history: Vec<f64>,
    pub n_students: usize,
    pub quadrature: QuadratureSpec,
    pub config_hash: Option<String>,
}

impl IrtModel {
    /// P(correct | theta) for item index `i`.
    pub fn prob(&self, i: usize, theta: f64) -> f64 {
        sigmoid(self.a[i] * (theta - self.b[i]))
    }

    /// Item information a^2 P (1-P) at theta.
    pub fn information(&self, i: usize, theta: f64) -> f64 {
        let p = self.prob(i, theta);
        self.a[i] * self.a[i] * p * (1.0 - p)
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn write_json(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn read_json(path: &std::path::Path) -> Result<IrtModel> {
        let text = std::fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Parameter count: k difficulties plus one shared slope for 1PL, two free
/// parameters per item for 2PL.
pub fn n_params_for(kind: ModelKind, n_items: usize) -> usize {
    match kind {
        ModelKind::OnePl => n_items + 1,
        ModelKind::TwoPl => 2 * n_items,
    }
}

/// AIC = -2 LL + 2 p and BIC = -2 LL + p ln N.
pub fn information_criteria(log_likelihood: f64, n_params: usize, n_students: usize) -> (f64, f64) {
    let minus2 = -2.0 * log_likelihood;
    (
        minus2 + 2.0 * n_params as f64,
        minus2 + n_params as f64 * (n_students as f64).ln(),
    )
}

/// Per-model information criteria inside a comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfoCriteria {
    pub kind: ModelKind,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub aic: f64,
    pub bic: f64,
}

/// Likelihood-ratio comparison of two nested fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitComparison {
    pub small: InfoCriteria,
    pub large: InfoCriteria,
    pub lrt: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Compare a nested pair of models fitted on the same data.
pub fn compare(small: &IrtModel, large: &IrtModel, n_students: usize) -> Result<FitComparison> {
    if small.items != large.items {
        return Err(Error::MismatchedItems);
    }
    let nested = matches!(
        (small.kind, large.kind),
        (ModelKind::OnePl, ModelKind::TwoPl)
    ) || small.kind == large.kind;
    if !nested {
        return Err(Error::NotNested {
            small: small.kind.to_string(),
            large: large.kind.to_string(),
        });
    }
    if small.n_students != n_students || large.n_students != n_students {
        return Err(Error::IncompatibleModel(format!(
            "models were fitted on {} and {} students, asked to compare at N={}",
            small.n_students, large.n_students, n_students
        )));
    }
    let (aic_s, bic_s) = information_criteria(small.log_likelihood, small.n_params, n_students);
    let (aic_l, bic_l) = information_criteria(large.log_likelihood, large.n_params, n_students);
    let lrt = 2.0 * (large.log_likelihood - small.log_likelihood);
    let df = large.n_params.saturating_sub(small.n_params);
    let p_value = if df == 0 {
        1.0
    } else {
        chi2_sf(lrt, df as f64)
    };
    Ok(FitComparison {
        small: InfoCriteria {
            kind: small.kind,
            log_likelihood: small.log_likelihood,
            n_params: small.n_params,
            aic: aic_s,
            bic: bic_s,
        },
        large: InfoCriteria {
            kind: large.kind,
            log_likelihood: large.log_likelihood,
            n_params: large.n_params,
            aic: aic_l,
            bic: bic_l,
        },
        lrt,
        df,
        p_value,
    })
}

/// theta grid for curve output;  defaults cover every visible plot range.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct CurveGridSpec {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl Default for CurveGridSpec {
    fn default() -> Self {
        CurveGridSpec {
            min: -6.0,
            max: 6.0,
            step: 0.01,
        }
    }
}

/// Item characteristic/information curves plus the test-level functions.
/// Per theta: P_i, I_i per item, TIF = sum I_i, SEM = 1/sqrt(TIF),
/// reliability = 1 - SEM^2.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveTable {
    pub items: Vec<String>,
    pub theta: Vec<f64>,
    /// probability[i][t] for item i at theta[t]
    pub probability: Vec<Vec<f64>>,
    /// information[i][t]
    pub information: Vec<Vec<f64>>,
    pub tif: Vec<f64>,
    pub sem: Vec<f64>,
    pub reliability: Vec<f64>,
}

/// Evaluate the fitted curves over a theta grid.
pub fn curves(model: &IrtModel, spec: &CurveGridSpec) -> Result<CurveTable> {
    if !(spec.step > 0.0) || !(spec.min < spec.max) {
        return Err(Error::InvalidParameter(format!(
            "curve grid needs min < max and step > 0, got [{}, {}] step {}",
            spec.min, spec.max, spec.step
        )));
    }
    let n_points = ((spec.max - spec.min) / spec.step).round() as usize + 1;
    if n_points < 2 {
        return Err(Error::InvalidParameter("empty curve grid".into()));
    }
    let theta: Vec<f64> = (0..n_points).map(|t| spec.min + t as f64 * spec.step).collect();
    let k = model.n_items();
    let mut probability = vec![vec![0.0; n_points]; k];
    let mut information = vec![vec![0.0; n_points]; k];
    let mut tif = vec![0.0; n_points];
    for i in 0..k {
        for (t, &th) in theta.iter().enumerate() {
            let p = model.prob(i, th);
            let inf = model.a[i] * model.a[i] * p * (1.0 - p);
            probability[i][t] = p;
            information[i][t] = inf;
            tif[t] += inf;
        }
    }
    let sem: Vec<f64> = tif.iter().map(|&t| 1.0 / t.sqrt()).collect();
    let reliability: Vec<f64> = sem.iter().map(|&s| 1.0 - s * s).collect();
    Ok(CurveTable {
        items: model.items.clone(),
        theta,
        probability,
        information,
        tif,
        sem,
        reliability,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiscriminationBand {
    VeryLow,
    Low,
    Moderate,
    High,
    VeryHigh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DifficultyBand {
    VeryEasy,
    Easy,
    Medium,
    Hard,
    VeryHard,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemClassification {
    pub item: String,
    pub a: f64,
    pub b: f64,
    pub discrimination: DiscriminationBand,
    pub difficulty: DifficultyBand,
}

/// Discrimination bands (boundaries closed on the left): very low below
/// 0.35, low to 0.65, moderate to 1.35, high to 1.70, very high above.
pub fn discrimination_band(a: f64) -> DiscriminationBand {
    if a < 0.35 {
        DiscriminationBand::VeryLow
    } else if a < 0.65 {
        DiscriminationBand::Low
    } else if a < 1.35 {
        DiscriminationBand::Moderate
    } else if a < 1.70 {
        DiscriminationBand::High
    } else {
        DiscriminationBand::VeryHigh
    }
}

/// Difficulty bands: very easy below -2, easy to -0.5, medium to 0.5,
/// hard to 2, very hard above.
pub fn difficulty_band(b: f64) -> DifficultyBand {
    if b < -2.0 {
        DifficultyBand::VeryEasy
    } else if b < -0.5 {
        DifficultyBand::Easy
    } else if b < 0.5 {
        DifficultyBand::Medium
    } else if b < 2.0 {
        DifficultyBand::Hard
    } else {
        DifficultyBand::VeryHard
    }
}

/// Map every item's parameters into the named bands.
pub fn classify_items(model: &IrtModel) -> Vec<ItemClassification> {
    (0..model.n_items())
        .map(|i| ItemClassification {
            item: model.items[i].clone(),
            a: model.a[i],
            b: model.b[i],
            discrimination: discrimination_band(model.a[i]),
            difficulty: difficulty_band(model.b[i]),
        })
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WrightBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

/// Plot-ready two-panel data: the person-ability histogram and the item
/// difficulty positions on the shared logit scale.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WrightMap {
    pub bin_width: f64,
    pub bins: Vec<WrightBin>,
    /// (item, difficulty) in item order.
    pub items: Vec<(String, f64)>,
}

/// Histogram bins are half-open `[m w, (m+1) w)` anchored at zero.
pub fn wright_map_data(model: &IrtModel, abilities: &[f64], bin_width: f64) -> Result<WrightMap> {
    if !(bin_width > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "bin width must be positive, got {bin_width}"
        )));
    }
    let mut bins = Vec::new();
    if !abilities.is_empty() {
        let index = |t: f64| (t / bin_width).floor() as i64;
        let lo_bin = abilities.iter().map(|&t| index(t)).min().unwrap();
        let hi_bin = abilities.iter().map(|&t| index(t)).max().unwrap();
        let mut counts = vec![0usize; (hi_bin - lo_bin + 1) as usize];
        for &t in abilities {
            counts[(index(t) - lo_bin) as usize] += 1;
        }
        for (off, count) in counts.into_iter().enumerate() {
            let m = lo_bin + off as i64;
            bins.push(WrightBin {
                lo: m as f64 * bin_width,
                hi: (m + 1) as f64 * bin_width,
                count,
            });
        }
    }
    let items = model
        .items
        .iter()
        .cloned()
        .zip(model.b.iter().copied())
        .collect();
    Ok(WrightMap {
        bin_width,
        bins,
        items,
    })
}
