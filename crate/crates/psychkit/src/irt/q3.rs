//! Yen's Q3 local-independence diagnostic: pairwise correlations of the
//! item residuals u - P(theta_hat).

use serde::{Deserialize, Serialize};

use super::{AbilityEstimates, IrtModel};
use crate::dataset::ResponseMatrix;
use crate::error::{Error, Result};
use crate::stats::pearson;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Q3Severity {
    /// |Q3| in [0.2, 0.3): acceptable but worth noting.
    Acceptable,
    /// |Q3| >= 0.3.
    High,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Q3Pair {
    pub item_a: String,
    pub item_b: String,
    pub q3: f64,
    pub severity: Q3Severity,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Q3Report {
    pub items: Vec<String>,
    /// Full symmetric correlation matrix of the residual columns.
    pub matrix: Vec<Vec<f64>>,
    pub max_abs: f64,
    /// Pairs with |Q3| >= 0.2.
    pub flagged: Vec<Q3Pair>,
}

/// Residual correlation for every item pair. Flags pairs at or above 0.2.
pub fn yen_q3(
    matrix: &ResponseMatrix,
    model: &IrtModel,
    abilities: &AbilityEstimates,
) -> Result<Q3Report> {
    if model.items != matrix.items() {
        return Err(Error::IncompatibleModel(
            "model items do not match the matrix".into(),
        ));
    }
    if abilities.eap.len() != matrix.n_students() {
        return Err(Error::IncompatibleModel(format!(
            "{} ability estimates for {} students",
            abilities.eap.len(),
            matrix.n_students()
        )));
    }
    let n = matrix.n_students();
    let k = matrix.n_items();

    let mut residuals: Vec<Vec<f64>> = vec![vec![0.0; n]; k];
    for (v, row) in matrix.rows().iter().enumerate() {
        let theta = abilities.eap[v];
        for i in 0..k {
            residuals[i][v] = row.responses[i] as f64 - model.prob(i, theta);
        }
    }

    let mut out = vec![vec![0.0; k]; k];
    let mut max_abs = 0.0f64;
    let mut flagged = Vec::new();
    for i in 0..k {
        out[i][i] = 1.0;
        for j in i + 1..k {
            let q3 = pearson(&residuals[i], &residuals[j]).ok_or_else(|| {
                Error::ZeroVariance(format!(
                    "residual column for `{}` or `{}` is constant",
                    matrix.items()[i],
                    matrix.items()[j]
                ))
            })?;
            out[i][j] = q3;
            out[j][i] = q3;
            max_abs = max_abs.max(q3.abs());
            if q3.abs() >= 0.2 {
                flagged.push(Q3Pair {
                    item_a: matrix.items()[i].clone(),
                    item_b: matrix.items()[j].clone(),
                    q3,
                    severity: if q3.abs() >= 0.3 {
                        Q3Severity::High
                    } else {
                        Q3Severity::Acceptable
                    },
                });
            }
        }
    }
    Ok(Q3Report {
        items: matrix.items().to_vec(),
        matrix: out,
        max_abs,
        flagged,
    })
}

#[cfg(test)]
mod tests {
    use super::super::{eap, fit, FitOptions, ModelKind, QuadratureGrid};
    use super::*;
    use crate::dataset::{ResponseMatrix, StudentRecord};
    use crate::sim;
    use rand::SeedableRng;

    #[test]
    fn duplicated_item_column_hits_q3_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let (a, b) = sim::sample_params(6, (0.8, 1.6), (-1.5, 1.5), &mut rng);
        let thetas = sim::draw_thetas(400, 0.0, 1.0, &mut rng);
        let base = sim::simulate_2pl(&a, &b, &thetas, &mut rng);
        // append a copy of the first column
        let mut items: Vec<String> = base.items().to_vec();
        items.push("Q1_copy".into());
        let rows: Vec<StudentRecord> = base
            .rows()
            .iter()
            .map(|r| {
                let mut responses = r.responses.clone();
                responses.push(r.responses[0]);
                StudentRecord {
                    student_id: r.student_id.clone(),
                    grade: r.grade,
                    gender: r.gender.clone(),
                    responses,
                }
            })
            .collect();
        let m = ResponseMatrix::new(items, rows).unwrap();
        let grid = QuadratureGrid::default_61();
        let model = fit(&m, ModelKind::TwoPl, &grid, &FitOptions::default()).unwrap();
        let est = eap(&m, &model, &grid).unwrap();
        let report = yen_q3(&m, &model, &est).unwrap();
        let pair = report
            .flagged
            .iter()
            .find(|p| p.item_a == "Q1" && p.item_b == "Q1_copy")
            .expect("duplicated pair must be flagged");
        assert!(pair.q3 > 0.95, "q3 = {}", pair.q3);
        assert_eq!(pair.severity, Q3Severity::High);
    }

    #[test]
    fn locally_independent_data_stays_below_threshold() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let (a, b) = sim::sample_params(12, (0.8, 1.8), (-2.0, 2.0), &mut rng);
        let thetas = sim::draw_thetas(1500, 0.0, 1.0, &mut rng);
        let m = sim::simulate_2pl(&a, &b, &thetas, &mut rng);
        let grid = QuadratureGrid::default_61();
        let model = fit(&m, ModelKind::TwoPl, &grid, &FitOptions::default()).unwrap();
        let est = eap(&m, &model, &grid).unwrap();
        let report = yen_q3(&m, &model, &est).unwrap();
        assert!(report.max_abs < 0.2, "max |Q3| = {}", report.max_abs);
        // symmetry of the emitted matrix
        for i in 0..report.matrix.len() {
            for j in 0..report.matrix.len() {
                assert_eq!(report.matrix[i][j], report.matrix[j][i]);
            }
        }
    }
}
