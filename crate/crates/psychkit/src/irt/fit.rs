//! Marginal maximum likelihood estimation by the EM algorithm.
//!
//! E-step: posterior weights of every student over the quadrature nodes
//! under the standard-normal prior. M-step: per-item Newton iterations on
//! the expected Bernoulli log-likelihood in slope/intercept space (a single
//! shared-slope Newton step sequence for 1PL), safeguarded by step halving
//! so the expected log-likelihood never decreases. All likelihood work is
//! done in log space.

use serde::{Deserialize, Serialize};

use super::{n_params_for, IrtModel, ModelKind, QuadratureGrid};
use crate::dataset::{require_analyzable, ResponseMatrix};
use crate::error::{Error, Result};
use crate::stats::special::{log_sigmoid, sigmoid};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOptions {
    /// Convergence threshold on the largest absolute parameter change.
    pub tol: f64,
    pub max_iter: usize,
    /// Box constraint on the slope to keep quasi-degenerate items finite.
    pub slope_bounds: (f64, f64),
    /// Optional L2 pull of (a, b) toward (1, 0); off by default.
    pub ridge: Option<f64>,
    pub config_hash: Option<String>,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-4,
            max_iter: 500,
            slope_bounds: (0.05, 10.0),
            ridge: None,
            config_hash: None,
        }
    }
}

/// Row-major flattened copy of the response cells.
pub(crate) struct Responses {
    pub n: usize,
    pub k: usize,
    pub flat: Vec<u8>,
}

impl Responses {
    pub fn from_matrix(matrix: &ResponseMatrix) -> Self {
        let n = matrix.n_students();
        let k = matrix.n_items();
        let mut flat = Vec::with_capacity(n * k);
        for row in matrix.rows() {
            flat.extend_from_slice(&row.responses);
        }
        Responses { n, k, flat }
    }
}

/// Per-(item, node) log response probabilities plus the per-node baseline
/// used by the posterior pass.
pub(crate) struct NodeTables {
    pub q: usize,
    /// log P(correct) at [i*q + node]
    pub lp: Vec<f64>,
    /// lp - log P(incorrect)
    dif: Vec<f64>,
    /// log prior + sum_i log P(incorrect), per node
    base: Vec<f64>,
}

impl NodeTables {
    pub fn new(a: &[f64], b: &[f64], grid: &QuadratureGrid) -> Self {
        let k = a.len();
        let q = grid.len();
        let nodes = grid.nodes();
        let mut lp = vec![0.0; k * q];
        let mut lq = vec![0.0; k * q];
        let mut dif = vec![0.0; k * q];
        for i in 0..k {
            for (qi, &t) in nodes.iter().enumerate() {
                let z = a[i] * (t - b[i]);
                let p = log_sigmoid(z);
                let m = log_sigmoid(-z);
                lp[i * q + qi] = p;
                lq[i * q + qi] = m;
                dif[i * q + qi] = p - m;
            }
        }
        let mut base: Vec<f64> = grid.weights().iter().map(|&w| w.ln()).collect();
        for qi in 0..q {
            let mut s = 0.0;
            for i in 0..k {
                s += lq[i * q + qi];
            }
            base[qi] += s;
        }
        NodeTables { q, lp, dif, base }
    }
}

/// Fill `weights` (n x q, row-major) with normalized posterior node weights
/// per student and return the marginal log-likelihood.
pub(crate) fn posterior_pass(resp: &Responses, tables: &NodeTables, weights: &mut [f64]) -> f64 {
    debug_assert_eq!(weights.len(), resp.n * tables.q);
    let q = tables.q;
    let k = resp.k;
    let mut ll = 0.0;
    for v in 0..resp.n {
        let row = &resp.flat[v * k..(v + 1) * k];
        let w = &mut weights[v * q..(v + 1) * q];
        w.copy_from_slice(&tables.base);
        for (i, &u) in row.iter().enumerate() {
            if u == 1 {
                let d = &tables.dif[i * q..(i + 1) * q];
                for (wq, dq) in w.iter_mut().zip(d) {
                    *wq += dq;
                }
            }
        }
        let m = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut s = 0.0;
        for wq in w.iter_mut() {
            *wq = (*wq - m).exp();
            s += *wq;
        }
        ll += m + s.ln();
        let inv = 1.0 / s;
        for wq in w.iter_mut() {
            *wq *= inv;
        }
    }
    ll
}

/// Expected complete-data log-likelihood contribution of one item given
/// the logit a*theta + beta per node.
fn expected_item_ll(rbar: &[f64], nbar: &[f64], nodes: &[f64], alpha: f64, beta: f64) -> f64 {
    let mut out = 0.0;
    for qi in 0..nodes.len() {
        let z = alpha * nodes[qi] + beta;
        out += rbar[qi] * log_sigmoid(z) + (nbar[qi] - rbar[qi]) * log_sigmoid(-z);
    }
    out
}

/// Safeguarded Newton maximization for a single item in slope/intercept
/// space. `alpha_free` disables the slope update (used by the 1PL
/// per-item intercept step).
#[allow(clippy::too_many_arguments)]
fn newton_item(
    rbar: &[f64],
    nbar: &[f64],
    nodes: &[f64],
    alpha: &mut f64,
    beta: &mut f64,
    bounds: (f64, f64),
    ridge: Option<f64>,
    alpha_free: bool,
) {
    for _ in 0..30 {
        let mut g_a = 0.0;
        let mut g_b = 0.0;
        let mut h_aa = 0.0;
        let mut h_ab = 0.0;
        let mut h_bb = 0.0;
        for qi in 0..nodes.len() {
            let t = nodes[qi];
            let p = sigmoid(*alpha * t + *beta);
            let resid = rbar[qi] - nbar[qi] * p;
            let w = nbar[qi] * p * (1.0 - p);
            g_b += resid;
            g_a += t * resid;
            h_bb += w;
            h_ab += w * t;
            h_aa += w * t * t;
        }
        if let Some(lam) = ridge {
            g_a -= lam * (*alpha - 1.0);
            g_b -= lam * *beta;
            h_aa += lam;
            h_bb += lam;
        }
        let (da, db) = if alpha_free {
            let det = h_aa * h_bb - h_ab * h_ab;
            if det.abs() < 1e-12 {
                return;
            }
            ((g_a * h_bb - g_b * h_ab) / det, (h_aa * g_b - h_ab * g_a) / det)
        } else {
            if h_bb < 1e-12 {
                return;
            }
            (0.0, g_b / h_bb)
        };

        let f0 = expected_item_ll(rbar, nbar, nodes, *alpha, *beta);
        let mut step = 1.0;
        let mut accepted = false;
        while step >= 1e-6 {
            let na = if alpha_free {
                (*alpha + step * da).clamp(bounds.0, bounds.1)
            } else {
                *alpha
            };
            let nb = *beta + step * db;
            if expected_item_ll(rbar, nbar, nodes, na, nb) >= f0 - 1e-12 {
                let moved = (na - *alpha).abs().max((nb - *beta).abs());
                *alpha = na;
                *beta = nb;
                accepted = true;
                if moved < 1e-9 {
                    return;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return;
        }
    }
}

/// Shared-slope Newton step over every item (the 1PL slope update).
fn newton_shared_slope(
    rbar: &[f64],
    nbar: &[f64],
    nodes: &[f64],
    alpha: &mut f64,
    betas: &[f64],
    bounds: (f64, f64),
) {
    let k = betas.len();
    let q = nodes.len();
    let total_ll = |al: f64| -> f64 {
        (0..k)
            .map(|i| expected_item_ll(&rbar[i * q..(i + 1) * q], nbar, nodes, al, betas[i]))
            .sum()
    };
    for _ in 0..20 {
        let mut g = 0.0;
        let mut h = 0.0;
        for i in 0..k {
            for qi in 0..q {
                let t = nodes[qi];
                let p = sigmoid(*alpha * t + betas[i]);
                g += t * (rbar[i * q + qi] - nbar[qi] * p);
                h += t * t * nbar[qi] * p * (1.0 - p);
            }
        }
        if h < 1e-12 {
            return;
        }
        let f0 = total_ll(*alpha);
        let mut step = 1.0;
        let mut accepted = false;
        while step >= 1e-6 {
            let na = (*alpha + step * g / h).clamp(bounds.0, bounds.1);
            if total_ll(na) >= f0 - 1e-12 {
                let moved = (na - *alpha).abs();
                *alpha = na;
                accepted = true;
                if moved < 1e-9 {
                    return;
                }
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            return;
        }
    }
}

/// Fit a 1PL or 2PL model by EM over the given quadrature grid.
pub fn fit(
    matrix: &ResponseMatrix,
    kind: ModelKind,
    grid: &QuadratureGrid,
    opts: &FitOptions,
) -> Result<IrtModel> {
    require_analyzable(matrix)?;
    let resp = Responses::from_matrix(matrix);
    let (n, k) = (resp.n, resp.k);

    // items answered all-correct or all-incorrect have no finite ML difficulty
    for i in 0..k {
        let correct: usize = (0..n).map(|v| resp.flat[v * k + i] as usize).sum();
        if correct == 0 || correct == n {
            return Err(Error::DegenerateItem(matrix.items()[i].clone()));
        }
    }

    let q = grid.len();
    let nodes = grid.nodes().to_vec();

    // starting values: unit slopes, intercepts from the observed proportions
    let mut betas: Vec<f64> = (0..k)
        .map(|i| {
            let p = (0..n).map(|v| resp.flat[v * k + i] as f64).sum::<f64>() / n as f64;
            let p = p.clamp(1e-3, 1.0 - 1e-3);
            (p / (1.0 - p)).ln()
        })
        .collect();
    let mut shared_alpha = 1.0;
    let mut alphas = vec![1.0; k];

    let mut weights = vec![0.0; n * q];
    let mut nbar = vec![0.0; q];
    let mut rbar = vec![0.0; k * q];
    let mut ll_history = Vec::new();
    let mut converged = false;
    let mut n_iterations = 0;

    let params_of = |alphas: &[f64], betas: &[f64]| -> (Vec<f64>, Vec<f64>) {
        let a: Vec<f64> = alphas.to_vec();
        let b: Vec<f64> = alphas
            .iter()
            .zip(betas)
            .map(|(&al, &be)| -be / al)
            .collect();
        (a, b)
    };

    for iter in 0..opts.max_iter {
        let (a_cur, b_cur) = params_of(&alphas, &betas);

        // E-step
        let tables = NodeTables::new(&a_cur, &b_cur, grid);
        let ll = posterior_pass(&resp, &tables, &mut weights);
        debug_assert!(
            ll_history
                .last()
                .map_or(true, |&prev: &f64| ll >= prev - 1e-7 * (1.0 + prev.abs())),
            "marginal log-likelihood decreased: {:?} -> {ll}",
            ll_history.last()
        );
        ll_history.push(ll);

        nbar.iter_mut().for_each(|x| *x = 0.0);
        rbar.iter_mut().for_each(|x| *x = 0.0);
        for v in 0..n {
            let w = &weights[v * q..(v + 1) * q];
            for (nq, wq) in nbar.iter_mut().zip(w) {
                *nq += wq;
            }
            let row = &resp.flat[v * k..(v + 1) * k];
            for (i, &u) in row.iter().enumerate() {
                if u == 1 {
                    let r = &mut rbar[i * q..(i + 1) * q];
                    for (rq, wq) in r.iter_mut().zip(w) {
                        *rq += wq;
                    }
                }
            }
        }

        // M-step
        match kind {
            ModelKind::TwoPl => {
                for i in 0..k {
                    newton_item(
                        &rbar[i * q..(i + 1) * q],
                        &nbar,
                        &nodes,
                        &mut alphas[i],
                        &mut betas[i],
                        opts.slope_bounds,
                        opts.ridge,
                        true,
                    );
                }
            }
            ModelKind::OnePl => {
                for _cycle in 0..3 {
                    for i in 0..k {
                        let mut al = shared_alpha;
                        newton_item(
                            &rbar[i * q..(i + 1) * q],
                            &nbar,
                            &nodes,
                            &mut al,
                            &mut betas[i],
                            opts.slope_bounds,
                            opts.ridge,
                            false,
                        );
                    }
                    newton_shared_slope(
                        &rbar,
                        &nbar,
                        &nodes,
                        &mut shared_alpha,
                        &betas,
                        opts.slope_bounds,
                    );
                }
                alphas.iter_mut().for_each(|a| *a = shared_alpha);
            }
        }

        n_iterations = iter + 1;
        let (a_new, b_new) = params_of(&alphas, &betas);
        let delta = a_new
            .iter()
            .zip(&a_cur)
            .chain(b_new.iter().zip(&b_cur))
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        if delta < opts.tol {
            converged = true;
            break;
        }
    }

    // marginal likelihood at the returned parameters
    let (a, b) = params_of(&alphas, &betas);
    let tables = NodeTables::new(&a, &b, grid);
    let ll = posterior_pass(&resp, &tables, &mut weights);
    ll_history.push(ll);

    Ok(IrtModel {
        kind,
        items: matrix.items().to_vec(),
        a,
        b,
        log_likelihood: ll,
        n_params: n_params_for(kind, k),
        converged,
        n_iterations,
        ll_history,
        n_students: n,
        quadrature: grid.spec(),
        config_hash: opts.config_hash.clone(),
    })
}
