//! Full-pipeline report: dataset summary, per-group classical statistics,
//! group comparisons, IRT fits and diagnostics, DIF analyses, and
//! proficiency profiles, emitted as one JSON document plus flat CSV
//! sidecars. Runs are deterministic: identical input, config, and seed
//! produce byte-identical report.json (timestamps live in a sidecar).

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ctt::{self, Descriptives, ItemAnalysis, NormTable};
use crate::dataset::{self, AnalysisConfig, LoadSummary, ResponseMatrix, RowFilter};
use crate::dif::{self, DifAnalysis, DifConfig, DifGroups};
use crate::error::{Error, Result};
use crate::inference::{self, MinDetectableEffect, TestResult};
use crate::irt::{
    self, classify_items, compare, curves, eap, fit, wright_map_data, AbilityEstimates,
    CurveGridSpec, CurveTable, FitComparison, FitOptions, IrtModel, ItemClassification,
    ModelKind, QuadratureGrid, QuadratureSpec, UnidimScreen, WrightMap,
};
use crate::proficiency::{
    build_profile, verify_level_semantics, GroupAbilities, LevelDiagnostic, ProficiencyProfile,
    ProfileOptions,
};

/// Report-level configuration: the dataset keys plus pipeline knobs.
/// Extra keys recognized on top of [`AnalysisConfig`]: `dif_reference`,
/// `dif_focal` (comma-separated grouping values), `alpha`, `origin`,
/// `curve_step`, `wright_bin_width`, `lord_min_rows`, `irt_tol`,
/// `irt_max_iter`, `quadrature_nodes`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportConfig {
    pub analysis: AnalysisConfig,
    pub dif_reference: Option<Vec<String>>,
    pub dif_focal: Option<Vec<String>>,
    pub alpha: f64,
    pub origin: f64,
    pub curve_step: f64,
    pub wright_bin_width: f64,
    pub lord_min_rows: usize,
    pub irt_tol: f64,
    pub irt_max_iter: usize,
    pub quadrature_nodes: usize,
}

impl Default for ReportConfig {
    fn default() -> Self {
        ReportConfig {
            analysis: AnalysisConfig::default(),
            dif_reference: None,
            dif_focal: None,
            alpha: 0.05,
            origin: 0.0,
            curve_step: 0.1,
            wright_bin_width: 0.5,
            lord_min_rows: 200,
            irt_tol: 1e-4,
            irt_max_iter: 500,
            quadrature_nodes: 61,
        }
    }
}

impl ReportConfig {
    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = ReportConfig {
            analysis: AnalysisConfig::from_kv(map)?,
            ..ReportConfig::default()
        };
        let parse_f64 = |key: &str, v: &str| -> Result<f64> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key} must be a number, got `{v}`")))
        };
        let parse_usize = |key: &str, v: &str| -> Result<usize> {
            v.parse()
                .map_err(|_| Error::Config(format!("{key} must be an integer, got `{v}`")))
        };
        for (key, value) in map {
            match key.as_str() {
                "excluded_items" | "grouping_variable" | "missing_policy" | "random_seed" => {}
                "dif_reference" => {
                    cfg.dif_reference =
                        Some(value.split(',').map(|s| s.trim().to_string()).collect());
                }
                "dif_focal" => {
                    cfg.dif_focal =
                        Some(value.split(',').map(|s| s.trim().to_string()).collect());
                }
                "alpha" => cfg.alpha = parse_f64(key, value)?,
                "origin" => cfg.origin = parse_f64(key, value)?,
                "curve_step" => cfg.curve_step = parse_f64(key, value)?,
                "wright_bin_width" => cfg.wright_bin_width = parse_f64(key, value)?,
                "lord_min_rows" => cfg.lord_min_rows = parse_usize(key, value)?,
                "irt_tol" => cfg.irt_tol = parse_f64(key, value)?,
                "irt_max_iter" => cfg.irt_max_iter = parse_usize(key, value)?,
                "quadrature_nodes" => cfg.quadrature_nodes = parse_usize(key, value)?,
                other => return Err(Error::Config(format!("unknown config key `{other}`"))),
            }
        }
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_kv(&dataset::parse_kv(&text)?)
    }

    /// Canonical serialization hashed into every report table.
    pub fn canonical_string(&self) -> String {
        let mut out = String::new();
        let excluded: Vec<&str> = self
            .analysis
            .excluded_items
            .iter()
            .map(|s| s.as_str())
            .collect();
        let _ = writeln!(out, "alpha={}", self.alpha);
        let _ = writeln!(out, "curve_step={}", self.curve_step);
        if let Some(v) = &self.dif_focal {
            let _ = writeln!(out, "dif_focal={}", v.join(","));
        }
        if let Some(v) = &self.dif_reference {
            let _ = writeln!(out, "dif_reference={}", v.join(","));
        }
        let _ = writeln!(out, "excluded_items={}", excluded.join(","));
        let _ = writeln!(out, "grouping_variable={}", self.analysis.grouping_variable);
        let _ = writeln!(out, "irt_max_iter={}", self.irt_max_iter);
        let _ = writeln!(out, "irt_tol={}", self.irt_tol);
        let _ = writeln!(out, "lord_min_rows={}", self.lord_min_rows);
        let _ = writeln!(
            out,
            "missing_policy={}",
            match self.analysis.missing_policy {
                dataset::MissingPolicy::Reject => "reject",
                dataset::MissingPolicy::ScoreAsIncorrect => "score_as_incorrect",
                dataset::MissingPolicy::DropIncomplete => "drop_incomplete",
            }
        );
        let _ = writeln!(out, "origin={}", self.origin);
        let _ = writeln!(out, "quadrature_nodes={}", self.quadrature_nodes);
        let _ = writeln!(out, "random_seed={}", self.analysis.random_seed);
        let _ = writeln!(out, "wright_bin_width={}", self.wright_bin_width);
        out
    }

    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.canonical_string().as_bytes());
        hex_string(&hasher.finalize())
    }

    fn fit_options(&self) -> FitOptions {
        FitOptions {
            tol: self.irt_tol,
            max_iter: self.irt_max_iter,
            config_hash: Some(self.hash()),
            ..FitOptions::default()
        }
    }

    fn quadrature(&self) -> QuadratureSpec {
        QuadratureSpec {
            n_nodes: self.quadrature_nodes,
            lo: -6.0,
            hi: 6.0,
        }
    }
}

fn hex_string(bytes: &[u8]) -> String {
    let mut s = String::with_capacity(bytes.len() * 2);
    for b in bytes {
        let _ = write!(s, "{b:02x}");
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub n_students: usize,
    pub n_items: usize,
    pub items: Vec<String>,
    pub grade_levels: Vec<i32>,
    pub gender_levels: Vec<String>,
    pub load: LoadSummary,
    pub input_sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupCtt {
    pub group: String,
    pub n: usize,
    pub item_analysis: ItemAnalysis,
    pub descriptives: Descriptives,
    pub norm_table: NormTable,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InferenceReport {
    pub one_way: TestResult,
    pub two_way: Option<Vec<TestResult>>,
    /// Sum-of-squares convention behind the two-way table.
    pub two_way_ss_type: Option<String>,
    pub dunn: Vec<TestResult>,
    pub min_detectable_effect: MinDetectableEffect,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ModelSummary {
    pub kind: ModelKind,
    pub items: Vec<String>,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub log_likelihood: f64,
    pub n_params: usize,
    pub converged: bool,
    pub n_iterations: usize,
    pub n_students: usize,
}

impl From<&IrtModel> for ModelSummary {
    fn from(m: &IrtModel) -> Self {
        ModelSummary {
            kind: m.kind,
            items: m.items.clone(),
            a: m.a.clone(),
            b: m.b.clone(),
            log_likelihood: m.log_likelihood,
            n_params: m.n_params,
            converged: m.converged,
            n_iterations: m.n_iterations,
            n_students: m.n_students,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroupIrt {
    pub group: String,
    pub excluded_items: Vec<String>,
    pub n_students: usize,
    pub unidimensionality: UnidimScreen,
    pub model_1pl: ModelSummary,
    pub model_2pl: ModelSummary,
    pub comparison: FitComparison,
    pub eap_reliability: f64,
    pub q3_max_abs: f64,
    pub q3_flagged: Vec<irt::Q3Pair>,
    pub classification: Vec<ItemClassification>,
    pub curves_2pl: CurveTable,
    pub wright: WrightMap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedDif {
    pub name: String,
    pub analysis: DifAnalysis,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NamedProfile {
    pub scope: String,
    /// Which ability estimate assigned students to levels.
    pub ability_estimator: String,
    pub profile: ProficiencyProfile,
    /// 52%/70% band-semantics check per level.
    pub diagnostics: Vec<LevelDiagnostic>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StageFailure {
    pub stage: String,
    pub error: String,
}

/// The whole deterministic payload written to report.json.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportBundle {
    pub tool_version: String,
    pub config_hash: String,
    pub config: BTreeMap<String, String>,
    pub dataset: DatasetSummary,
    pub ctt: Vec<GroupCtt>,
    pub inference: Option<InferenceReport>,
    pub irt: Vec<GroupIrt>,
    pub dif: Vec<NamedDif>,
    pub proficiency: Vec<NamedProfile>,
    pub failures: Vec<StageFailure>,
}

/// Group labels in deterministic order for the configured grouping column.
fn group_labels(matrix: &ResponseMatrix, column: &str) -> Result<Vec<String>> {
    let values = matrix.group_values(column)?;
    Ok(values)
}

fn eap_for(
    matrix: &ResponseMatrix,
    model: &IrtModel,
    grid: &QuadratureGrid,
) -> Result<AbilityEstimates> {
    eap(matrix, model, grid)
}

struct StageRunner {
    failures: Vec<StageFailure>,
}

impl StageRunner {
    fn new() -> Self {
        StageRunner { failures: vec![] }
    }

    fn run<T>(&mut self, stage: &str, f: impl FnOnce() -> Result<T>) -> Option<T> {
        match f() {
            Ok(v) => Some(v),
            Err(e) => {
                self.failures.push(StageFailure {
                    stage: stage.to_string(),
                    error: e.to_string(),
                });
                None
            }
        }
    }
}

/// Run the full pipeline over the input CSV. Partial failures land in
/// `failures` while the rest of the report is still produced.
pub fn build_report(input: &Path, cfg: &ReportConfig) -> Result<ReportBundle> {
    let input_bytes = std::fs::read(input)?;
    let mut hasher = Sha256::new();
    hasher.update(&input_bytes);
    let input_sha256 = hex_string(&hasher.finalize());

    // the full-item matrix feeds CTT/inference/DIF; exclusions apply to the
    // latent-trait stages
    let load_config = AnalysisConfig {
        excluded_items: Default::default(),
        ..cfg.analysis.clone()
    };
    let text = String::from_utf8(input_bytes)
        .map_err(|_| Error::EmptyInput("input is not valid UTF-8".into()))?;
    let (matrix, load) = dataset::load_csv_str(&text, &load_config)?;
    dataset::require_analyzable(&matrix)?;

    let grouping = cfg.analysis.grouping_variable.clone();
    let labels = group_labels(&matrix, &grouping)?;
    let mut runner = StageRunner::new();

    let dataset_summary = DatasetSummary {
        n_students: matrix.n_students(),
        n_items: matrix.n_items(),
        items: matrix.items().to_vec(),
        grade_levels: matrix.grade_levels().iter().copied().collect(),
        gender_levels: matrix.gender_levels().iter().cloned().collect(),
        load,
        input_sha256,
    };

    // --- per-group CTT ---
    let mut ctt_reports = Vec::new();
    let mut group_matrices: Vec<(String, ResponseMatrix)> = Vec::new();
    for label in &labels {
        let sub = matrix.subset(&RowFilter::new().and(&grouping, [label.clone()]))?;
        if sub.is_empty() {
            continue;
        }
        group_matrices.push((label.clone(), sub));
    }
    for (label, sub) in &group_matrices {
        if let Some(report) = runner.run(&format!("ctt:{grouping}={label}"), || {
            let item_analysis = ctt::item_analysis(sub)?;
            let totals: Vec<f64> = sub.total_scores().iter().map(|&t| t as f64).collect();
            let descriptives = ctt::descriptives(&totals)?;
            let norm_table = ctt::norm_table(&sub.total_scores(), sub.n_items() as u32)?;
            Ok(GroupCtt {
                group: label.clone(),
                n: sub.n_students(),
                item_analysis,
                descriptives,
                norm_table,
            })
        }) {
            ctt_reports.push(report);
        }
    }

    // --- inference over the grouping variable ---
    let inference_report = runner.run("inference", || {
        let groups: Vec<(String, Vec<f64>)> = group_matrices
            .iter()
            .map(|(label, sub)| {
                (
                    label.clone(),
                    sub.total_scores().iter().map(|&t| t as f64).collect(),
                )
            })
            .collect();
        let score_lists: Vec<Vec<f64>> = groups.iter().map(|(_, s)| s.clone()).collect();
        let one_way = inference::one_way_anova(&score_lists)?;
        let dunn = inference::dunn_test(&groups)?;
        let sizes: Vec<usize> = score_lists.iter().map(|s| s.len()).collect();
        let mde = inference::min_detectable_effect(&sizes, cfg.alpha, 0.8)?;
        // second factor: gender when grouping by grade (and vice versa)
        let other = if grouping == "grade" { "gender" } else { "grade" };
        let two_way = if matrix.group_values(other)?.len() >= 2 && labels.len() >= 2 {
            let scores: Vec<f64> = matrix.total_scores().iter().map(|&t| t as f64).collect();
            let fa: Vec<String> = matrix
                .rows()
                .iter()
                .map(|r| matrix.group_label(r, &grouping))
                .collect::<Result<_>>()?;
            let fb: Vec<String> = matrix
                .rows()
                .iter()
                .map(|r| matrix.group_label(r, other))
                .collect::<Result<_>>()?;
            Some(inference::two_way_anova(&scores, &fa, &fb)?.to_vec())
        } else {
            None
        };
        let two_way_ss_type = two_way
            .as_ref()
            .map(|_| "sequential (type I)".to_string());
        Ok(InferenceReport {
            one_way,
            two_way,
            two_way_ss_type,
            dunn,
            min_detectable_effect: mde,
        })
    });

    // --- IRT per group and combined ---
    let irt_matrix = if cfg.analysis.excluded_items.is_empty() {
        matrix.clone()
    } else {
        matrix.drop_items(&cfg.analysis.excluded_items)?
    };
    let grid = cfg.quadrature().build()?;
    let fit_opts = cfg.fit_options();
    let excluded: Vec<String> = cfg.analysis.excluded_items.iter().cloned().collect();

    let mut irt_scopes: Vec<(String, ResponseMatrix)> = Vec::new();
    for (label, _) in &group_matrices {
        let sub = irt_matrix.subset(&RowFilter::new().and(&grouping, [label.clone()]))?;
        if !sub.is_empty() {
            irt_scopes.push((label.clone(), sub));
        }
    }
    irt_scopes.push(("all".to_string(), irt_matrix.clone()));

    let mut irt_reports = Vec::new();
    let mut fitted_2pl: Vec<(String, IrtModel, AbilityEstimates, ResponseMatrix)> = Vec::new();
    for (label, sub) in &irt_scopes {
        if let Some((report, model_2pl, abilities)) =
            runner.run(&format!("irt:{grouping}={label}"), || {
                let unidim = irt::unidimensionality_screen(sub)?;
                let model_1pl = fit(sub, ModelKind::OnePl, &grid, &fit_opts)?;
                let model_2pl = fit(sub, ModelKind::TwoPl, &grid, &fit_opts)?;
                let comparison = compare(&model_1pl, &model_2pl, sub.n_students())?;
                let abilities = eap_for(sub, &model_2pl, &grid)?;
                let q3 = irt::yen_q3(sub, &model_2pl, &abilities)?;
                let classification = classify_items(&model_2pl);
                let curve_table = curves(
                    &model_2pl,
                    &CurveGridSpec {
                        step: cfg.curve_step,
                        ..CurveGridSpec::default()
                    },
                )?;
                let wright = wright_map_data(&model_2pl, &abilities.eap, cfg.wright_bin_width)?;
                let report = GroupIrt {
                    group: label.clone(),
                    excluded_items: excluded.clone(),
                    n_students: sub.n_students(),
                    unidimensionality: unidim,
                    model_1pl: ModelSummary::from(&model_1pl),
                    model_2pl: ModelSummary::from(&model_2pl),
                    comparison,
                    eap_reliability: abilities.eap_reliability,
                    q3_max_abs: q3.max_abs,
                    q3_flagged: q3.flagged,
                    classification,
                    curves_2pl: curve_table,
                    wright,
                };
                Ok((report, model_2pl, abilities))
            })
        {
            irt_reports.push(report);
            fitted_2pl.push((label.clone(), model_2pl, abilities, sub.clone()));
        }
    }

    // --- DIF: always the gender contrast when available, plus the
    // configured contrast on the grouping variable ---
    let mut dif_reports = Vec::new();
    let dif_cfg_base = DifConfig {
        alpha: cfg.alpha,
        lord_min_rows: cfg.lord_min_rows,
        fit: FitOptions {
            tol: cfg.irt_tol.max(1e-3),
            max_iter: cfg.irt_max_iter,
            config_hash: Some(cfg.hash()),
            ..FitOptions::default()
        },
        quadrature: cfg.quadrature(),
        ..DifConfig::default()
    };
    let genders: Vec<String> = matrix.gender_levels().iter().cloned().collect();
    if genders.len() == 2 {
        let groups = DifGroups::new("gender", [genders[0].clone()], [genders[1].clone()]);
        if let Some(analysis) = runner.run("dif:gender", || {
            dif::purify_and_synthesize(&matrix, &groups, &dif_cfg_base)
        }) {
            dif_reports.push(NamedDif {
                name: format!("gender:{}_vs_{}", genders[0], genders[1]),
                analysis,
            });
        }
    }
    if let (Some(reference), Some(focal)) = (&cfg.dif_reference, &cfg.dif_focal) {
        let groups = DifGroups::new(&grouping, reference.clone(), focal.clone());
        if let Some(analysis) = runner.run(&format!("dif:{grouping}"), || {
            dif::purify_and_synthesize(&matrix, &groups, &dif_cfg_base)
        }) {
            dif_reports.push(NamedDif {
                name: format!(
                    "{}:{}_vs_{}",
                    grouping,
                    reference.join("+"),
                    focal.join("+")
                ),
                analysis,
            });
        }
    }

    // --- proficiency: per-group profiles from the per-group models, and
    // the group-agnostic profile with per-group distributions ---
    let mut profiles = Vec::new();
    let profile_opts = ProfileOptions {
        origin: cfg.origin,
        ..ProfileOptions::default()
    };
    for (label, model, abilities, _) in &fitted_2pl {
        if label == "all" {
            continue;
        }
        if let Some(profile) = runner.run(&format!("proficiency:{grouping}={label}"), || {
            build_profile(
                model,
                &[GroupAbilities {
                    label: label.clone(),
                    theta: abilities.eap.clone(),
                }],
                &profile_opts,
            )
        }) {
            let diagnostics = verify_level_semantics(&profile, model);
            profiles.push(NamedProfile {
                scope: label.clone(),
                ability_estimator: "eap".into(),
                profile,
                diagnostics,
            });
        }
    }
    if let Some((_, model, _, sub)) = fitted_2pl.iter().find(|(label, ..)| label == "all") {
        if let Some(profile) = runner.run("proficiency:all", || {
            let abilities = eap_for(sub, model, &grid)?;
            let mut per_group: Vec<GroupAbilities> = Vec::new();
            for label in &labels {
                let theta: Vec<f64> = sub
                    .rows()
                    .iter()
                    .zip(&abilities.eap)
                    .filter(|(r, _)| {
                        sub.group_label(r, &grouping)
                            .map(|l| l == *label)
                            .unwrap_or(false)
                    })
                    .map(|(_, &t)| t)
                    .collect();
                if !theta.is_empty() {
                    per_group.push(GroupAbilities {
                        label: label.clone(),
                        theta,
                    });
                }
            }
            build_profile(model, &per_group, &profile_opts)
        }) {
            let diagnostics = verify_level_semantics(&profile, model);
            profiles.push(NamedProfile {
                scope: "all".to_string(),
                ability_estimator: "eap".into(),
                profile,
                diagnostics,
            });
        }
    }

    let mut config_echo = BTreeMap::new();
    for line in cfg.canonical_string().lines() {
        if let Some((k, v)) = line.split_once('=') {
            config_echo.insert(k.to_string(), v.to_string());
        }
    }

    Ok(ReportBundle {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        config: config_echo,
        dataset: dataset_summary,
        ctt: ctt_reports,
        inference: inference_report,
        irt: irt_reports,
        dif: dif_reports,
        proficiency: profiles,
        failures: runner.failures,
    })
}

fn write_norm_csv(out: &mut String, table: &NormTable) {
    out.push_str("score,z,percentile\n");
    for row in &table.rows {
        let _ = writeln!(out, "{},{},{}", row.score, row.z, row.percentile);
    }
}

fn write_curves_csv(out: &mut String, t: &CurveTable) {
    out.push_str("theta");
    for item in &t.items {
        let _ = write!(out, ",P_{item}");
    }
    for item in &t.items {
        let _ = write!(out, ",I_{item}");
    }
    out.push_str(",TIF,SEM,reliability\n");
    for ti in 0..t.theta.len() {
        let _ = write!(out, "{}", t.theta[ti]);
        for i in 0..t.items.len() {
            let _ = write!(out, ",{}", t.probability[i][ti]);
        }
        for i in 0..t.items.len() {
            let _ = write!(out, ",{}", t.information[i][ti]);
        }
        let _ = writeln!(out, ",{},{},{}", t.tif[ti], t.sem[ti], t.reliability[ti]);
    }
}

fn write_wright_csv(out: &mut String, w: &WrightMap) {
    out.push_str("kind,label,lo,hi,count,position\n");
    for bin in &w.bins {
        let _ = writeln!(out, "bin,,{},{},{},", bin.lo, bin.hi, bin.count);
    }
    for (item, b) in &w.items {
        let _ = writeln!(out, "item,{item},,,,{b}");
    }
}

fn write_dif_csv(out: &mut String, named: &NamedDif) {
    out.push_str(
        "method,item,statistic,p_value,p_adjusted,effect_size,effect_class,flagged\n",
    );
    for method in &named.analysis.methods {
        for r in &method.results {
            let effect = r
                .effect_size
                .map(|e| e.to_string())
                .unwrap_or_default();
            let class = r
                .effect_class
                .map(|c| format!("{c:?}").to_lowercase())
                .unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                method.method, r.item, r.statistic, r.p_value, r.p_adjusted, effect, class,
                r.flagged
            );
        }
    }
    out.push_str("item,votes,n_methods,verdict\n");
    for s in &named.analysis.synthesis {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            s.item,
            s.votes,
            s.n_methods,
            match s.verdict {
                dif::Verdict::Dif => "DIF",
                dif::Verdict::NoDif => "NoDIF",
            }
        );
    }
}

/// Timestamps and other non-reproducible metadata, written beside
/// report.json so the main document stays byte-stable.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportMeta {
    pub written_unix_seconds: u64,
    pub input_path: String,
}

/// Write report.json plus the CSV sidecars (norm tables, curves, Wright
/// maps, DIF tables). Every sidecar is re-derivable from report.json.
pub fn write_report(bundle: &ReportBundle, input: &Path, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir)?;
    let json = serde_json::to_string_pretty(bundle)?;
    std::fs::write(out_dir.join("report.json"), json)?;
    if !bundle.failures.is_empty() {
        std::fs::write(
            out_dir.join("failures.json"),
            serde_json::to_string_pretty(&bundle.failures)?,
        )?;
    }

    let meta = ReportMeta {
        written_unix_seconds: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
        input_path: input.display().to_string(),
    };
    std::fs::write(
        out_dir.join("report.meta.json"),
        serde_json::to_string_pretty(&meta)?,
    )?;

    for group in &bundle.ctt {
        let mut csv = String::new();
        write_norm_csv(&mut csv, &group.norm_table);
        std::fs::write(
            out_dir.join(format!("norm_table_{}.csv", sanitize(&group.group))),
            csv,
        )?;
    }
    for group in &bundle.irt {
        let mut csv = String::new();
        write_curves_csv(&mut csv, &group.curves_2pl);
        std::fs::write(
            out_dir.join(format!("curves_2pl_{}.csv", sanitize(&group.group))),
            csv,
        )?;
        let mut csv = String::new();
        write_wright_csv(&mut csv, &group.wright);
        std::fs::write(
            out_dir.join(format!("wright_{}.csv", sanitize(&group.group))),
            csv,
        )?;
    }
    for named in &bundle.dif {
        let mut csv = String::new();
        write_dif_csv(&mut csv, named);
        std::fs::write(
            out_dir.join(format!("dif_{}.csv", sanitize(&named.name))),
            csv,
        )?;
    }
    Ok(())
}

fn sanitize(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_alphanumeric() { c } else { '_' })
        .collect()
}

/// Load, analyze, and write, returning the bundle. The process exit code
/// (handled by the CLI) is nonzero when any stage failed.
pub fn run_report(input: &Path, cfg: &ReportConfig, out_dir: &Path) -> Result<ReportBundle> {
    let bundle = build_report(input, cfg)?;
    write_report(&bundle, input, out_dir)?;
    Ok(bundle)
}
