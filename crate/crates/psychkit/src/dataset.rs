//! Response-matrix ingestion, validation, and slicing.
//!
//! Input CSV layout: UTF-8, comma separated, header
//! `student_id,grade,gender,Q1,...,Qk`. Response cells are literal `0`/`1`;
//! an empty cell is a missing response and is handled per
//! [`MissingPolicy`]. Matrices are immutable once built; every analysis
//! module consumes `&ResponseMatrix`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// What to do with an empty response cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum MissingPolicy {
    /// Fail the load with an error naming the row and column (default).
    #[default]
    Reject,
    /// Score the blank as an incorrect response.
    ScoreAsIncorrect,
    /// Drop every row containing a missing cell; dropped rows are counted
    /// in the load summary.
    DropIncomplete,
}

/// Load/analysis configuration, read from a plain `key=value` file.
///
/// Recognized keys: `excluded_items` (comma separated), `grouping_variable`
/// (`grade` or `gender`), `missing_policy`
/// (`reject|score_as_incorrect|drop_incomplete`), `random_seed` (integer).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub excluded_items: BTreeSet<String>,
    pub grouping_variable: String,
    pub missing_policy: MissingPolicy,
    pub random_seed: u64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            excluded_items: BTreeSet::new(),
            grouping_variable: "grade".into(),
            missing_policy: MissingPolicy::Reject,
            random_seed: 42,
        }
    }
}

/// Parse a `key=value` file into an ordered map. Blank lines and lines
/// starting with `#` are skipped.
pub fn parse_kv(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((k, v)) = line.split_once('=') else {
            return Err(Error::Config(format!(
                "line {}: expected key=value, got `{line}`",
                lineno + 1
            )));
        };
        map.insert(k.trim().to_string(), v.trim().to_string());
    }
    Ok(map)
}

impl AnalysisConfig {
    /// Build from parsed key=values; keys outside `known` are rejected by
    /// the caller (the report layer accepts a larger key set).
    pub fn from_kv(map: &BTreeMap<String, String>) -> Result<Self> {
        let mut cfg = AnalysisConfig::default();
        if let Some(v) = map.get("excluded_items") {
            cfg.excluded_items = v
                .split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect();
        }
        if let Some(v) = map.get("grouping_variable") {
            cfg.grouping_variable = v.clone();
        }
        if let Some(v) = map.get("missing_policy") {
            cfg.missing_policy = match v.as_str() {
                "reject" => MissingPolicy::Reject,
                "score_as_incorrect" => MissingPolicy::ScoreAsIncorrect,
                "drop_incomplete" => MissingPolicy::DropIncomplete,
                other => {
                    return Err(Error::Config(format!("unknown missing_policy `{other}`")));
                }
            };
        }
        if let Some(v) = map.get("random_seed") {
            cfg.random_seed = v
                .parse()
                .map_err(|_| Error::Config(format!("random_seed must be an integer, got `{v}`")))?;
        }
        Ok(cfg)
    }

    /// Keys consumed by [`AnalysisConfig::from_kv`].
    pub fn known_keys() -> &'static [&'static str] {
        &[
            "excluded_items",
            "grouping_variable",
            "missing_policy",
            "random_seed",
        ]
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let map = parse_kv(&text)?;
        for key in map.keys() {
            if !Self::known_keys().contains(&key.as_str()) {
                return Err(Error::Config(format!("unknown config key `{key}`")));
            }
        }
        Self::from_kv(&map)
    }
}

/// One student's row: identifier, group labels, and the 0/1 response
/// vector aligned with the matrix item list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StudentRecord {
    pub student_id: String,
    pub grade: i32,
    pub gender: String,
    pub responses: Vec<u8>,
}

/// Validated binary students x items table plus the category sets observed
/// at load time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResponseMatrix {
    items: Vec<String>,
    rows: Vec<StudentRecord>,
    grade_levels: BTreeSet<i32>,
    gender_levels: BTreeSet<String>,
}

/// Counts reported by the loader: how many rows the file held and how many
/// survived validation, plus per-policy bookkeeping.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadSummary {
    pub raw_rows: usize,
    pub usable_rows: usize,
    pub dropped_incomplete: usize,
    pub imputed_cells: usize,
    pub excluded_items: Vec<String>,
}

impl ResponseMatrix {
    /// Validating constructor: unique item ids, aligned row lengths,
    /// strictly 0/1 cells.
    pub fn new(items: Vec<String>, rows: Vec<StudentRecord>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for item in &items {
            if !seen.insert(item.clone()) {
                return Err(Error::MalformedHeader(format!("duplicate item `{item}`")));
            }
        }
        let mut ids = BTreeSet::new();
        for (i, row) in rows.iter().enumerate() {
            if row.responses.len() != items.len() {
                return Err(Error::MalformedHeader(format!(
                    "row {} has {} responses for {} items",
                    i + 1,
                    row.responses.len(),
                    items.len()
                )));
            }
            if let Some(bad) = row.responses.iter().position(|&c| c > 1) {
                return Err(Error::InvalidCell {
                    row: i + 1,
                    student_id: row.student_id.clone(),
                    column: items[bad].clone(),
                    value: row.responses[bad].to_string(),
                });
            }
            if !ids.insert(row.student_id.clone()) {
                return Err(Error::DuplicateStudentId(row.student_id.clone()));
            }
        }
        let grade_levels = rows.iter().map(|r| r.grade).collect();
        let gender_levels = rows.iter().map(|r| r.gender.clone()).collect();
        Ok(ResponseMatrix {
            items,
            rows,
            grade_levels,
            gender_levels,
        })
    }

    pub fn items(&self) -> &[String] {
        &self.items
    }

    pub fn rows(&self) -> &[StudentRecord] {
        &self.rows
    }

    pub fn n_items(&self) -> usize {
        self.items.len()
    }

    pub fn n_students(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn grade_levels(&self) -> &BTreeSet<i32> {
        &self.grade_levels
    }

    pub fn gender_levels(&self) -> &BTreeSet<String> {
        &self.gender_levels
    }

    /// Position of an item id in the column order.
    pub fn item_index(&self, item: &str) -> Option<usize> {
        self.items.iter().position(|i| i == item)
    }

    /// Responses to one item across students, in row order.
    pub fn column(&self, index: usize) -> Vec<u8> {
        self.rows.iter().map(|r| r.responses[index]).collect()
    }

    /// Raw total score per student, in row order.
    pub fn total_scores(&self) -> Vec<u32> {
        self.rows
            .iter()
            .map(|r| r.responses.iter().map(|&c| c as u32).sum())
            .collect()
    }

    /// The value of a grouping column for one row.
    pub fn group_label(&self, row: &StudentRecord, column: &str) -> Result<String> {
        match column {
            "grade" => Ok(row.grade.to_string()),
            "gender" => Ok(row.gender.clone()),
            other => Err(Error::UnknownGroupingColumn(other.to_string())),
        }
    }

    /// Distinct values of a grouping column in sorted order.
    pub fn group_values(&self, column: &str) -> Result<Vec<String>> {
        match column {
            "grade" => Ok(self.grade_levels.iter().map(|g| g.to_string()).collect()),
            "gender" => Ok(self.gender_levels.iter().cloned().collect()),
            other => Err(Error::UnknownGroupingColumn(other.to_string())),
        }
    }

    /// Row-filtered matrix sharing the item list. An empty result is legal;
    /// callers are expected to check [`ResponseMatrix::is_empty`].
    pub fn subset(&self, filter: &RowFilter) -> Result<ResponseMatrix> {
        for (column, _) in &filter.clauses {
            if column != "grade" && column != "gender" {
                return Err(Error::UnknownGroupingColumn(column.clone()));
            }
        }
        let rows: Vec<StudentRecord> = self
            .rows
            .iter()
            .filter(|r| filter.matches(r))
            .cloned()
            .collect();
        let grade_levels = rows.iter().map(|r| r.grade).collect();
        let gender_levels = rows.iter().map(|r| r.gender.clone()).collect();
        Ok(ResponseMatrix {
            items: self.items.clone(),
            rows,
            grade_levels,
            gender_levels,
        })
    }

    /// Copy of the matrix without the named items. Unknown names error.
    pub fn drop_items(&self, drop: &BTreeSet<String>) -> Result<ResponseMatrix> {
        let missing: Vec<&String> = drop.iter().filter(|d| !self.items.contains(d)).collect();
        if !missing.is_empty() {
            let list = missing
                .iter()
                .map(|s| s.as_str())
                .collect::<Vec<_>>()
                .join(", ");
            return Err(Error::UnknownExcludedItem(list));
        }
        let keep: Vec<usize> = (0..self.items.len())
            .filter(|&i| !drop.contains(&self.items[i]))
            .collect();
        let items: Vec<String> = keep.iter().map(|&i| self.items[i].clone()).collect();
        let rows: Vec<StudentRecord> = self
            .rows
            .iter()
            .map(|r| StudentRecord {
                student_id: r.student_id.clone(),
                grade: r.grade,
                gender: r.gender.clone(),
                responses: keep.iter().map(|&i| r.responses[i]).collect(),
            })
            .collect();
        ResponseMatrix::new(items, rows)
    }

    /// Serialize back to the canonical CSV layout.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("student_id,grade,gender");
        for item in &self.items {
            out.push(',');
            out.push_str(item);
        }
        out.push('\n');
        for row in &self.rows {
            let _ = write!(out, "{},{},{}", row.student_id, row.grade, row.gender);
            for &c in &row.responses {
                let _ = write!(out, ",{c}");
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv_string())?;
        Ok(())
    }
}

/// Conjunction of per-column value filters; within a column any listed
/// value matches.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowFilter {
    clauses: Vec<(String, BTreeSet<String>)>,
}

impl RowFilter {
    pub fn new() -> Self {
        RowFilter::default()
    }

    /// Add a clause; chaining clauses forms a conjunction.
    pub fn and<I, S>(mut self, column: &str, values: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.clauses.push((
            column.to_string(),
            values.into_iter().map(Into::into).collect(),
        ));
        self
    }

    /// Parse `column=v1,v2` into a single-clause filter.
    pub fn parse(spec: &str) -> Result<Self> {
        let Some((col, vals)) = spec.split_once('=') else {
            return Err(Error::Config(format!(
                "filter must look like column=value[,value], got `{spec}`"
            )));
        };
        Ok(RowFilter::new().and(
            col.trim(),
            vals.split(',').map(|v| v.trim().to_string()),
        ))
    }

    /// The conjunction of two filters.
    pub fn also(mut self, other: &RowFilter) -> Self {
        self.clauses.extend(other.clauses.iter().cloned());
        self
    }

    fn matches(&self, row: &StudentRecord) -> bool {
        self.clauses.iter().all(|(column, values)| {
            let label = match column.as_str() {
                "grade" => row.grade.to_string(),
                "gender" => row.gender.clone(),
                _ => return false,
            };
            values.contains(&label)
        })
    }
}

/// Load and validate the canonical CSV. Items named in
/// `config.excluded_items` are removed from the returned matrix.
pub fn load_csv(path: &Path, config: &AnalysisConfig) -> Result<(ResponseMatrix, LoadSummary)> {
    let text = std::fs::read_to_string(path)?;
    load_csv_str(&text, config)
}

/// String-input variant of [`load_csv`], used by tests and the report layer.
pub fn load_csv_str(text: &str, config: &AnalysisConfig) -> Result<(ResponseMatrix, LoadSummary)> {
    if text.trim().is_empty() {
        return Err(Error::EmptyInput("file has no content".into()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());

    let header: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if header.len() < 4 {
        return Err(Error::MalformedHeader(format!(
            "expected student_id,grade,gender,<items...>, found {} column(s)",
            header.len()
        )));
    }
    for (pos, want) in ["student_id", "grade", "gender"].iter().enumerate() {
        if header[pos] != *want {
            return Err(Error::MalformedHeader(format!(
                "column {} must be `{}`, found `{}`",
                pos + 1,
                want,
                header[pos]
            )));
        }
    }
    let all_items: Vec<String> = header[3..].to_vec();
    for excluded in &config.excluded_items {
        if !all_items.contains(excluded) {
            return Err(Error::UnknownExcludedItem(excluded.clone()));
        }
    }

    let mut summary = LoadSummary {
        excluded_items: config.excluded_items.iter().cloned().collect(),
        ..LoadSummary::default()
    };
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let rownum = i + 2; // 1-based, counting the header line
        summary.raw_rows += 1;
        if record.len() != header.len() {
            return Err(Error::MalformedHeader(format!(
                "row {rownum} has {} fields, header has {}",
                record.len(),
                header.len()
            )));
        }
        let student_id = record[0].to_string();
        if student_id.is_empty() {
            return Err(Error::MissingCell {
                row: rownum,
                student_id: "<blank>".into(),
                column: "student_id".into(),
            });
        }
        let grade: i32 = record[1].parse().map_err(|_| Error::InvalidCell {
            row: rownum,
            student_id: student_id.clone(),
            column: "grade".into(),
            value: record[1].to_string(),
        })?;
        let gender = record[2].to_string();
        if gender.is_empty() {
            return Err(Error::MissingCell {
                row: rownum,
                student_id,
                column: "gender".into(),
            });
        }

        let mut responses = Vec::with_capacity(all_items.len());
        let mut drop_row = false;
        for (j, item) in all_items.iter().enumerate() {
            let cell = &record[3 + j];
            let value = match cell.trim() {
                "0" => 0u8,
                "1" => 1u8,
                "" => match config.missing_policy {
                    MissingPolicy::Reject => {
                        return Err(Error::MissingCell {
                            row: rownum,
                            student_id,
                            column: item.clone(),
                        });
                    }
                    MissingPolicy::ScoreAsIncorrect => {
                        summary.imputed_cells += 1;
                        0u8
                    }
                    MissingPolicy::DropIncomplete => {
                        drop_row = true;
                        break;
                    }
                },
                other => {
                    return Err(Error::InvalidCell {
                        row: rownum,
                        student_id,
                        column: item.clone(),
                        value: other.to_string(),
                    });
                }
            };
            responses.push(value);
        }
        if drop_row {
            summary.dropped_incomplete += 1;
            continue;
        }
        rows.push(StudentRecord {
            student_id,
            grade,
            gender,
            responses,
        });
    }
    if summary.raw_rows == 0 {
        return Err(Error::EmptyInput("file has a header but no rows".into()));
    }

    let matrix = ResponseMatrix::new(all_items, rows)?;
    let matrix = if config.excluded_items.is_empty() {
        matrix
    } else {
        matrix.drop_items(&config.excluded_items)?
    };
    summary.usable_rows = matrix.n_students();
    Ok((matrix, summary))
}

/// Guard shared by analysis entry points: at least two items and two rows.
pub fn require_analyzable(matrix: &ResponseMatrix) -> Result<()> {
    if matrix.n_items() < 2 {
        return Err(Error::TooFew {
            what: "items",
            min: 2,
            found: matrix.n_items(),
        });
    }
    if matrix.n_students() < 2 {
        return Err(Error::TooFew {
            what: "students",
            min: 2,
            found: matrix.n_students(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_csv() -> &'static str {
        "student_id,grade,gender,Q1,Q2,Q3\n\
         s1,3,girl,1,0,1\n\
         s2,3,boy,0,0,1\n\
         s3,4,girl,1,1,1\n\
         s4,4,boy,0,1,0\n"
    }

    #[test]
    fn well_formed_input_roundtrips() {
        let (m, summary) = load_csv_str(small_csv(), &AnalysisConfig::default()).unwrap();
        assert_eq!(m.n_students(), 4);
        assert_eq!(m.n_items(), 3);
        assert_eq!(m.items(), ["Q1", "Q2", "Q3"]);
        assert_eq!(summary.raw_rows, 4);
        assert_eq!(summary.usable_rows, 4);
        // load -> serialize -> load is idempotent
        let again = load_csv_str(&m.to_csv_string(), &AnalysisConfig::default())
            .unwrap()
            .0;
        assert_eq!(m, again);
    }

    #[test]
    fn invalid_cell_names_row_and_column() {
        let text = "student_id,grade,gender,Q1,Q2\ns1,3,girl,1,0\ns2,3,boy,2,1\n";
        let err = load_csv_str(text, &AnalysisConfig::default()).unwrap_err();
        match err {
            Error::InvalidCell { row, column, value, .. } => {
                assert_eq!(row, 3);
                assert_eq!(column, "Q1");
                assert_eq!(value, "2");
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn missing_cell_policies() {
        let text = "student_id,grade,gender,Q1,Q2\ns1,3,girl,1,\ns2,3,boy,0,1\n";
        let err = load_csv_str(text, &AnalysisConfig::default()).unwrap_err();
        assert!(matches!(err, Error::MissingCell { .. }));

        let cfg = AnalysisConfig {
            missing_policy: MissingPolicy::ScoreAsIncorrect,
            ..AnalysisConfig::default()
        };
        let (m, s) = load_csv_str(text, &cfg).unwrap();
        assert_eq!(m.rows()[0].responses, vec![1, 0]);
        assert_eq!(s.imputed_cells, 1);

        let cfg = AnalysisConfig {
            missing_policy: MissingPolicy::DropIncomplete,
            ..AnalysisConfig::default()
        };
        let (m, s) = load_csv_str(text, &cfg).unwrap();
        assert_eq!(m.n_students(), 1);
        assert_eq!(s.dropped_incomplete, 1);
        assert_eq!(s.raw_rows, 2);
    }

    #[test]
    fn duplicate_student_id_rejected() {
        let text = "student_id,grade,gender,Q1,Q2\ns1,3,girl,1,0\ns1,3,boy,0,1\n";
        let err = load_csv_str(text, &AnalysisConfig::default()).unwrap_err();
        assert!(matches!(err, Error::DuplicateStudentId(id) if id == "s1"));
    }

    #[test]
    fn empty_file_and_header_only() {
        assert!(matches!(
            load_csv_str("", &AnalysisConfig::default()).unwrap_err(),
            Error::EmptyInput(_)
        ));
        assert!(matches!(
            load_csv_str("student_id,grade,gender,Q1\n", &AnalysisConfig::default()).unwrap_err(),
            Error::EmptyInput(_)
        ));
    }

    #[test]
    fn excluded_items_removed_at_load() {
        let cfg = AnalysisConfig {
            excluded_items: ["Q2".to_string()].into_iter().collect(),
            ..AnalysisConfig::default()
        };
        let (m, s) = load_csv_str(small_csv(), &cfg).unwrap();
        assert_eq!(m.items(), ["Q1", "Q3"]);
        assert_eq!(s.excluded_items, vec!["Q2"]);

        let cfg = AnalysisConfig {
            excluded_items: ["Q9".to_string()].into_iter().collect(),
            ..AnalysisConfig::default()
        };
        assert!(matches!(
            load_csv_str(small_csv(), &cfg).unwrap_err(),
            Error::UnknownExcludedItem(_)
        ));
    }

    #[test]
    fn subset_identity_and_conjunction() {
        let (m, _) = load_csv_str(small_csv(), &AnalysisConfig::default()).unwrap();
        let all = m.subset(&RowFilter::new()).unwrap();
        assert_eq!(all, m);

        let a = RowFilter::new().and("grade", ["4"]);
        let b = RowFilter::new().and("gender", ["girl"]);
        let chained = m.subset(&a).unwrap().subset(&b).unwrap();
        let joint = m.subset(&a.clone().also(&b)).unwrap();
        assert_eq!(chained, joint);
        assert_eq!(joint.n_students(), 1);
        assert_eq!(joint.rows()[0].student_id, "s3");

        assert!(matches!(
            m.subset(&RowFilter::new().and("school", ["x"])).unwrap_err(),
            Error::UnknownGroupingColumn(_)
        ));
    }

    #[test]
    fn subset_can_be_empty_but_is_flagged() {
        let (m, _) = load_csv_str(small_csv(), &AnalysisConfig::default()).unwrap();
        let none = m.subset(&RowFilter::new().and("grade", ["9"])).unwrap();
        assert!(none.is_empty());
        assert_eq!(none.items(), m.items());
    }

    #[test]
    fn totals_stay_in_range() {
        let (m, _) = load_csv_str(small_csv(), &AnalysisConfig::default()).unwrap();
        for t in m.total_scores() {
            assert!(t <= m.n_items() as u32);
        }
    }

    #[test]
    fn config_parsing() {
        let text = "# comment\nexcluded_items=Q2, Q5\ngrouping_variable=grade\nmissing_policy=score_as_incorrect\nrandom_seed=7\n";
        let cfg = AnalysisConfig::from_kv(&parse_kv(text).unwrap()).unwrap();
        assert!(cfg.excluded_items.contains("Q2") && cfg.excluded_items.contains("Q5"));
        assert_eq!(cfg.missing_policy, MissingPolicy::ScoreAsIncorrect);
        assert_eq!(cfg.random_seed, 7);
        assert!(parse_kv("not an assignment\n").is_err());
    }
}
