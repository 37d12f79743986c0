//! psychkit command-line interface.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};

use psychkit::ctt;
use psychkit::dataset::{self, AnalysisConfig, ResponseMatrix, RowFilter};
use psychkit::dif::{self, DifConfig, DifGroups, DifMethod};
use psychkit::inference;
use psychkit::irt::{
    self, CurveGridSpec, FitOptions, IrtModel, ModelKind, QuadratureGrid,
};
use psychkit::proficiency::{
    build_profile, verify_level_semantics, GroupAbilities, ProfileOptions,
};
use psychkit::report::{run_report, ReportConfig};

#[derive(Parser)]
#[command(
    name = "psychkit",
    version,
    about = "Psychometric analysis of binary response matrices: classical test theory, 1PL/2PL IRT, DIF, norm tables, and proficiency levels"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct InputArgs {
    /// Response CSV: student_id,grade,gender,<item columns>
    #[arg(long)]
    input: PathBuf,
    /// key=value configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override the configured random seed
    #[arg(long)]
    seed: Option<u64>,
    /// Row filter column=v1[,v2], repeatable
    #[arg(long)]
    filter: Vec<String>,
}

impl InputArgs {
    fn analysis_config(&self) -> anyhow::Result<AnalysisConfig> {
        let mut cfg = match &self.config {
            Some(path) => AnalysisConfig::from_file(path)
                .with_context(|| format!("reading config {}", path.display()))?,
            None => AnalysisConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.random_seed = seed;
        }
        Ok(cfg)
    }

    fn load(&self, extra_excluded: &[String]) -> anyhow::Result<ResponseMatrix> {
        let mut cfg = self.analysis_config()?;
        for item in extra_excluded {
            cfg.excluded_items.insert(item.clone());
        }
        let (mut matrix, _) = dataset::load_csv(&self.input, &cfg)
            .with_context(|| format!("loading {}", self.input.display()))?;
        for spec in &self.filter {
            let filter = RowFilter::parse(spec)?;
            matrix = matrix.subset(&filter)?;
        }
        if matrix.is_empty() {
            bail!("row filters matched no students");
        }
        Ok(matrix)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Per-group item analysis, descriptives, and norm tables
    Ctt {
        #[command(flatten)]
        input: InputArgs,
        /// Grouping column (grade or gender)
        #[arg(long, default_value = "grade")]
        group: String,
        #[arg(long)]
        out: PathBuf,
        /// Also write one norm-table CSV per group next to --out
        #[arg(long)]
        csv: bool,
    },
    /// Group-comparison statistics on total scores
    Compare {
        #[command(flatten)]
        input: InputArgs,
        /// Outcome variable; only `total` is defined for binary matrices
        #[arg(long, default_value = "total")]
        outcome: String,
        #[arg(long, default_value = "grade")]
        factor: String,
        #[arg(long)]
        factor2: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Latent-trait model commands
    #[command(subcommand)]
    Irt(IrtCommand),
    /// Differential item functioning between two groups
    Dif {
        #[command(flatten)]
        input: InputArgs,
        /// Grouping column defining the two groups
        #[arg(long)]
        group: String,
        /// Reference-side values (comma separated); defaults to the first
        /// value of a two-valued column
        #[arg(long)]
        reference: Option<String>,
        /// Focal-side values
        #[arg(long)]
        focal: Option<String>,
        /// Detectors: any of mh,logistic,lord
        #[arg(long, default_value = "mh,logistic,lord")]
        methods: String,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long, default_value_t = 200)]
        lord_min_rows: usize,
        /// Drop the studied item from its own matching score (the default
        /// keeps it in, the conventional choice)
        #[arg(long)]
        exclude_studied_item: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Proficiency levels from a fitted 2PL model and ability estimates
    Proficiency {
        /// model.json from `irt fit`
        #[arg(long)]
        model: PathBuf,
        /// abilities CSV from `irt fit --eap-out`
        #[arg(long)]
        abilities: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        origin: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Full pipeline: CTT, inference, IRT, DIF, proficiency, sidecars
    Report {
        #[command(flatten)]
        input: InputArgs,
        /// Output directory for report.json and sidecars
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum IrtCommand {
    /// Fit a 1PL/2PL model by marginal maximum likelihood EM
    Fit {
        #[command(flatten)]
        input: InputArgs,
        /// 1pl or 2pl
        #[arg(long, default_value = "2pl")]
        model: String,
        /// Item to exclude before fitting, repeatable
        #[arg(long)]
        exclude: Vec<String>,
        #[arg(long, default_value_t = 1e-4)]
        tol: f64,
        #[arg(long, default_value_t = 500)]
        max_iter: usize,
        #[arg(long, default_value_t = 61)]
        nodes: usize,
        #[arg(long)]
        out: PathBuf,
        /// Also write per-student EAP abilities to this CSV
        #[arg(long)]
        eap_out: Option<PathBuf>,
        /// Grouping column written into the abilities CSV
        #[arg(long, default_value = "grade")]
        group: String,
    },
    /// Curve tables (ICC, IIC, TIF, SEM, reliability) from a fitted model
    Curves {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = -6.0)]
        min: f64,
        #[arg(long, default_value_t = 6.0)]
        max: f64,
        #[arg(long, default_value_t = 0.01)]
        step: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Wright-map data: ability histogram plus item positions
    Wright {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        abilities: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        bin_width: f64,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_model_kind(s: &str) -> anyhow::Result<ModelKind> {
    match s.to_ascii_lowercase().as_str() {
        "1pl" => Ok(ModelKind::OnePl),
        "2pl" => Ok(ModelKind::TwoPl),
        other => bail!("unknown model kind `{other}` (expected 1pl or 2pl)"),
    }
}

fn parse_methods(s: &str) -> anyhow::Result<Vec<DifMethod>> {
    let mut out = Vec::new();
    for token in s.split(',') {
        match token.trim().to_ascii_lowercase().as_str() {
            "mh" | "mantel_haenszel" => out.push(DifMethod::MantelHaenszel),
            "logistic" => out.push(DifMethod::LogisticRegression),
            "lord" => out.push(DifMethod::LordChi2),
            other => bail!("unknown DIF method `{other}` (expected mh, logistic, lord)"),
        }
    }
    Ok(out)
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, serde_json::to_string_pretty(value)?)?;
    Ok(())
}

/// abilities CSV layout shared by `irt fit --eap-out`, `irt wright`, and
/// `proficiency`: student_id,group,eap,posterior_sd
fn write_abilities_csv(
    path: &Path,
    matrix: &ResponseMatrix,
    group_column: &str,
    est: &irt::AbilityEstimates,
) -> anyhow::Result<()> {
    let mut out = String::from("student_id,group,eap,posterior_sd\n");
    for (i, row) in matrix.rows().iter().enumerate() {
        let group = matrix.group_label(row, group_column)?;
        out.push_str(&format!(
            "{},{},{},{}\n",
            row.student_id, group, est.eap[i], est.posterior_sd[i]
        ));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn read_abilities_csv(path: &Path) -> anyhow::Result<Vec<(String, String, f64, f64)>> {
    let text = std::fs::read_to_string(path)?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line.trim() != "student_id,group,eap,posterior_sd" {
                bail!("abilities CSV must start with `student_id,group,eap,posterior_sd`");
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 4 {
            bail!("abilities CSV line {} has {} fields", i + 1, parts.len());
        }
        rows.push((
            parts[0].to_string(),
            parts[1].to_string(),
            parts[2].parse().context("eap column")?,
            parts[3].parse().context("posterior_sd column")?,
        ));
    }
    if rows.is_empty() {
        bail!("abilities CSV has no rows");
    }
    Ok(rows)
}

fn cmd_ctt(input: InputArgs, group: String, out: PathBuf, csv: bool) -> anyhow::Result<()> {
    let matrix = input.load(&[])?;
    let labels = matrix.group_values(&group)?;
    #[derive(serde::Serialize)]
    struct GroupOut {
        group: String,
        n: usize,
        item_analysis: ctt::ItemAnalysis,
        descriptives: ctt::Descriptives,
        norm_table: ctt::NormTable,
    }
    let mut report = Vec::new();
    for label in labels {
        let sub = matrix.subset(&RowFilter::new().and(&group, [label.clone()]))?;
        if sub.is_empty() {
            continue;
        }
        let totals: Vec<f64> = sub.total_scores().iter().map(|&t| t as f64).collect();
        report.push(GroupOut {
            group: label,
            n: sub.n_students(),
            item_analysis: ctt::item_analysis(&sub)?,
            descriptives: ctt::descriptives(&totals)?,
            norm_table: ctt::norm_table(&sub.total_scores(), sub.n_items() as u32)?,
        });
    }
    if csv {
        let dir = out.parent().unwrap_or(Path::new("."));
        for g in &report {
            let mut text = String::from("score,z,percentile\n");
            for row in &g.norm_table.rows {
                text.push_str(&format!("{},{},{}\n", row.score, row.z, row.percentile));
            }
            std::fs::write(dir.join(format!("norm_table_{}.csv", g.group)), text)?;
        }
    }
    write_json(&out, &report)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_compare(
    input: InputArgs,
    outcome: String,
    factor: String,
    factor2: Option<String>,
    out: PathBuf,
) -> anyhow::Result<()> {
    if outcome != "total" {
        bail!("only --outcome total is supported");
    }
    let matrix = input.load(&[])?;
    let labels = matrix.group_values(&factor)?;
    let mut groups: Vec<(String, Vec<f64>)> = Vec::new();
    for label in labels {
        let sub = matrix.subset(&RowFilter::new().and(&factor, [label.clone()]))?;
        if !sub.is_empty() {
            groups.push((
                label,
                sub.total_scores().iter().map(|&t| t as f64).collect(),
            ));
        }
    }
    let score_lists: Vec<Vec<f64>> = groups.iter().map(|(_, s)| s.clone()).collect();
    let mut tests = vec![inference::one_way_anova(&score_lists)?];
    if let Some(f2) = factor2 {
        let scores: Vec<f64> = matrix.total_scores().iter().map(|&t| t as f64).collect();
        let fa: Vec<String> = matrix
            .rows()
            .iter()
            .map(|r| matrix.group_label(r, &factor))
            .collect::<Result<_, _>>()?;
        let fb: Vec<String> = matrix
            .rows()
            .iter()
            .map(|r| matrix.group_label(r, &f2))
            .collect::<Result<_, _>>()?;
        tests.extend(inference::two_way_anova(&scores, &fa, &fb)?);
    }
    tests.extend(inference::dunn_test(&groups)?);
    write_json(&out, &tests)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_irt(cmd: IrtCommand) -> anyhow::Result<()> {
    match cmd {
        IrtCommand::Fit {
            input,
            model,
            exclude,
            tol,
            max_iter,
            nodes,
            out,
            eap_out,
            group,
        } => {
            let kind = parse_model_kind(&model)?;
            let analysis = input.analysis_config()?;
            let matrix = input.load(&exclude)?;
            let grid = QuadratureGrid::standard_normal(nodes, -6.0, 6.0)?;
            // hash everything that shapes the fit so model.json is traceable
            let mut hasher = <sha2::Sha256 as sha2::Digest>::new();
            let mut excluded: Vec<String> = analysis.excluded_items.iter().cloned().collect();
            excluded.extend(exclude.iter().cloned());
            excluded.sort();
            sha2::Digest::update(
                &mut hasher,
                format!(
                    "excluded={}|kind={kind:?}|tol={tol}|max_iter={max_iter}|nodes={nodes}|seed={}|filters={}",
                    excluded.join(","),
                    analysis.random_seed,
                    input.filter.join(";"),
                )
                .as_bytes(),
            );
            let digest = sha2::Digest::finalize(hasher);
            let config_hash = digest.iter().map(|b| format!("{b:02x}")).collect::<String>();
            let opts = FitOptions {
                tol,
                max_iter,
                config_hash: Some(config_hash),
                ..FitOptions::default()
            };
            let fitted = irt::fit(&matrix, kind, &grid, &opts)?;
            if !fitted.converged {
                eprintln!(
                    "warning: EM did not converge within {max_iter} iterations (max parameter change above {tol})"
                );
            }
            fitted.write_json(&out)?;
            println!(
                "fitted {} model: LL = {:.4}, {} iterations, converged = {}",
                fitted.kind, fitted.log_likelihood, fitted.n_iterations, fitted.converged
            );
            if let Some(eap_path) = eap_out {
                let est = irt::eap(&matrix, &fitted, &grid)?;
                write_abilities_csv(&eap_path, &matrix, &group, &est)?;
                println!(
                    "wrote {} (EAP reliability {:.3})",
                    eap_path.display(),
                    est.eap_reliability
                );
            }
            println!("wrote {}", out.display());
        }
        IrtCommand::Curves {
            model,
            min,
            max,
            step,
            out,
        } => {
            let fitted = IrtModel::read_json(&model)?;
            let table = irt::curves(&fitted, &CurveGridSpec { min, max, step })?;
            let mut text = String::from("theta");
            for item in &table.items {
                text.push_str(&format!(",P_{item}"));
            }
            for item in &table.items {
                text.push_str(&format!(",I_{item}"));
            }
            text.push_str(",TIF,SEM,reliability\n");
            for t in 0..table.theta.len() {
                text.push_str(&table.theta[t].to_string());
                for i in 0..table.items.len() {
                    text.push_str(&format!(",{}", table.probability[i][t]));
                }
                for i in 0..table.items.len() {
                    text.push_str(&format!(",{}", table.information[i][t]));
                }
                text.push_str(&format!(
                    ",{},{},{}\n",
                    table.tif[t], table.sem[t], table.reliability[t]
                ));
            }
            std::fs::write(&out, text)?;
            println!("wrote {}", out.display());
        }
        IrtCommand::Wright {
            model,
            abilities,
            bin_width,
            out,
        } => {
            let fitted = IrtModel::read_json(&model)?;
            let rows = read_abilities_csv(&abilities)?;
            let thetas: Vec<f64> = rows.iter().map(|r| r.2).collect();
            let map = irt::wright_map_data(&fitted, &thetas, bin_width)?;
            let mut text = String::from("kind,label,lo,hi,count,position\n");
            for bin in &map.bins {
                text.push_str(&format!("bin,,{},{},{},\n", bin.lo, bin.hi, bin.count));
            }
            for (item, b) in &map.items {
                text.push_str(&format!("item,{item},,,,{b}\n"));
            }
            std::fs::write(&out, text)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_dif(
    input: InputArgs,
    group: String,
    reference: Option<String>,
    focal: Option<String>,
    methods: String,
    alpha: f64,
    lord_min_rows: usize,
    exclude_studied_item: bool,
    out: PathBuf,
) -> anyhow::Result<()> {
    let matrix = input.load(&[])?;
    let values = matrix.group_values(&group)?;
    let (reference, focal) = match (reference, focal) {
        (Some(r), Some(f)) => (
            r.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>(),
            f.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>(),
        ),
        (None, None) if values.len() == 2 => {
            (vec![values[0].clone()], vec![values[1].clone()])
        }
        _ => bail!(
            "column `{group}` has {} values; pass --reference and --focal explicitly",
            values.len()
        ),
    };
    let groups = DifGroups::new(&group, reference, focal);
    let cfg = DifConfig {
        alpha,
        lord_min_rows,
        methods: parse_methods(&methods)?,
        include_studied_item: !exclude_studied_item,
        ..DifConfig::default()
    };
    let analysis = dif::purify_and_synthesize(&matrix, &groups, &cfg)?;
    write_json(&out, &analysis)?;
    for method in &analysis.methods {
        if let Some(err) = &method.error {
            eprintln!("warning: {} aborted: {err}", method.method);
        }
    }
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_proficiency(
    model: PathBuf,
    abilities: PathBuf,
    origin: f64,
    out: PathBuf,
) -> anyhow::Result<()> {
    let fitted = IrtModel::read_json(&model)?;
    let rows = read_abilities_csv(&abilities)?;
    let mut by_group: Vec<GroupAbilities> = Vec::new();
    let mut labels: Vec<String> = rows.iter().map(|r| r.1.clone()).collect();
    labels.sort();
    labels.dedup();
    for label in labels {
        by_group.push(GroupAbilities {
            theta: rows
                .iter()
                .filter(|r| r.1 == label)
                .map(|r| r.2)
                .collect(),
            label,
        });
    }
    let profile = build_profile(
        &fitted,
        &by_group,
        &ProfileOptions {
            origin,
            ..ProfileOptions::default()
        },
    )?;
    let diagnostics = verify_level_semantics(&profile, &fitted);
    #[derive(serde::Serialize)]
    struct ProfileOut {
        profile: psychkit::proficiency::ProficiencyProfile,
        diagnostics: Vec<psychkit::proficiency::LevelDiagnostic>,
    }
    write_json(&out, &ProfileOut { profile, diagnostics })?;
    println!("wrote {}", out.display());
    Ok(())
}

fn cmd_report(input: InputArgs, out: PathBuf) -> anyhow::Result<i32> {
    let mut cfg = match &input.config {
        Some(path) => ReportConfig::from_file(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        None => ReportConfig::default(),
    };
    if let Some(seed) = input.seed {
        cfg.analysis.random_seed = seed;
    }
    if !input.filter.is_empty() {
        bail!("--filter is not supported by `report`; filter in the config instead");
    }
    let bundle = run_report(&input.input, &cfg, &out)?;
    println!(
        "wrote {} ({} groups, {} IRT scopes, {} DIF analyses)",
        out.join("report.json").display(),
        bundle.ctt.len(),
        bundle.irt.len(),
        bundle.dif.len()
    );
    if bundle.failures.is_empty() {
        Ok(0)
    } else {
        for failure in &bundle.failures {
            eprintln!("stage `{}` failed: {}", failure.stage, failure.error);
        }
        Ok(2)
    }
}

fn main() {
    let cli = Cli::parse();
    let result: anyhow::Result<i32> = match cli.command {
        Command::Ctt {
            input,
            group,
            out,
            csv,
        } => cmd_ctt(input, group, out, csv).map(|_| 0),
        Command::Compare {
            input,
            outcome,
            factor,
            factor2,
            out,
        } => cmd_compare(input, outcome, factor, factor2, out).map(|_| 0),
        Command::Irt(cmd) => cmd_irt(cmd).map(|_| 0),
        Command::Dif {
            input,
            group,
            reference,
            focal,
            methods,
            alpha,
            lord_min_rows,
            exclude_studied_item,
            out,
        } => cmd_dif(
            input,
            group,
            reference,
            focal,
            methods,
            alpha,
            lord_min_rows,
            exclude_studied_item,
            out,
        )
        .map(|_| 0),
        Command::Proficiency {
            model,
            abilities,
            origin,
            out,
        } => cmd_proficiency(model, abilities, origin, out).map(|_| 0),
        Command::Report { input, out } => cmd_report(input, out),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}
