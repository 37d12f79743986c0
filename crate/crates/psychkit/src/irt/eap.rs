//! Expected a posteriori ability estimation.

use serde::{Deserialize, Serialize};

use super::fit::{posterior_pass, NodeTables, Responses};
use super::{IrtModel, QuadratureGrid};
use crate::dataset::ResponseMatrix;
use crate::error::{Error, Result};
use crate::stats;

/// Per-student posterior mean/sd of ability, plus the set-level EAP
/// reliability var(eap) / (var(eap) + mean(posterior_sd^2)).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AbilityEstimates {
    pub student_ids: Vec<String>,
    pub eap: Vec<f64>,
    pub posterior_sd: Vec<f64>,
    pub eap_reliability: f64,
}

/// Posterior mean and sd of theta per student under the standard-normal
/// prior discretized on `grid`.
pub fn eap(matrix: &ResponseMatrix, model: &IrtModel, grid: &QuadratureGrid) -> Result<AbilityEstimates> {
    if model.items != matrix.items() {
        return Err(Error::IncompatibleModel(format!(
            "model items ({}) do not match matrix items ({})",
            model.items.len(),
            matrix.n_items()
        )));
    }
    if matrix.n_students() == 0 {
        return Err(Error::EmptyInput("matrix has no students".into()));
    }
    if matrix.n_items() == 0 {
        return Err(Error::IncompatibleModel(
            "no informative items remain for ability estimation".into(),
        ));
    }
    let resp = Responses::from_matrix(matrix);
    let q = grid.len();
    let tables = NodeTables::new(&model.a, &model.b, grid);
    let mut weights = vec![0.0; resp.n * q];
    posterior_pass(&resp, &tables, &mut weights);

    let nodes = grid.nodes();
    let mut eap = Vec::with_capacity(resp.n);
    let mut posterior_sd = Vec::with_capacity(resp.n);
    for v in 0..resp.n {
        let w = &weights[v * q..(v + 1) * q];
        let mean: f64 = w.iter().zip(nodes).map(|(wq, t)| wq * t).sum();
        let second: f64 = w.iter().zip(nodes).map(|(wq, t)| wq * t * t).sum();
        eap.push(mean);
        posterior_sd.push((second - mean * mean).max(0.0).sqrt());
    }

    let (_, var_eap) = stats::mean_var_pop(&eap);
    let mean_err: f64 =
        posterior_sd.iter().map(|s| s * s).sum::<f64>() / resp.n as f64;
    let denom = var_eap + mean_err;
    let eap_reliability = if denom > 0.0 { var_eap / denom } else { 0.0 };

    Ok(AbilityEstimates {
        student_ids: matrix.rows().iter().map(|r| r.student_id.clone()).collect(),
        eap,
        posterior_sd,
        eap_reliability,
    })
}
