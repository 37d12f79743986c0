//! Lightweight unidimensionality screen: approximate tetrachoric
//! correlations (cosine formula) and the first-to-second eigenvalue ratio
//! of the resulting matrix.

use serde::{Deserialize, Serialize};

use crate::dataset::ResponseMatrix;
use crate::error::{Error, Result};
use crate::stats::linalg::sym_eigenvalues;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UnidimScreen {
    pub eigenvalues: Vec<f64>,
    /// First/second eigenvalue ratio (capped at 1e6 for serialization).
    pub ratio: f64,
    /// ratio > 3 reads as plausibly unidimensional.
    pub plausibly_unidimensional: bool,
    /// Item pairs with an empty contingency cell; their correlation was
    /// computed with a 0.5 continuity adjustment.
    pub clamped_pairs: usize,
}

/// Approximate tetrachoric correlation of two binary columns via
/// cos(pi / (1 + sqrt(OR))) on the 2x2 table odds ratio.
fn tetrachoric_approx(x: &[u8], y: &[u8]) -> (f64, bool) {
    let mut n11: f64 = 0.0;
    let mut n10: f64 = 0.0;
    let mut n01: f64 = 0.0;
    let mut n00: f64 = 0.0;
    for (&a, &b) in x.iter().zip(y) {
        match (a, b) {
            (1, 1) => n11 += 1.0,
            (1, 0) => n10 += 1.0,
            (0, 1) => n01 += 1.0,
            _ => n00 += 1.0,
        }
    }
    let clamped = n11 == 0.0 || n10 == 0.0 || n01 == 0.0 || n00 == 0.0;
    if clamped {
        n11 += 0.5;
        n10 += 0.5;
        n01 += 0.5;
        n00 += 0.5;
    }
    let or = (n11 * n00) / (n10 * n01);
    let r = (std::f64::consts::PI / (1.0 + or.sqrt())).cos();
    (r, clamped)
}

/// Eigenvalue-ratio screen on the approximate tetrachoric matrix.
pub fn unidimensionality_screen(matrix: &ResponseMatrix) -> Result<UnidimScreen> {
    let k = matrix.n_items();
    if k < 3 {
        return Err(Error::TooFew {
            what: "items",
            min: 3,
            found: k,
        });
    }
    if matrix.n_students() < 2 {
        return Err(Error::TooFew {
            what: "students",
            min: 2,
            found: matrix.n_students(),
        });
    }
    let columns: Vec<Vec<u8>> = (0..k).map(|i| matrix.column(i)).collect();
    let mut corr = vec![vec![0.0; k]; k];
    let mut clamped_pairs = 0;
    for i in 0..k {
        corr[i][i] = 1.0;
        for j in i + 1..k {
            let (r, clamped) = tetrachoric_approx(&columns[i], &columns[j]);
            if clamped {
                clamped_pairs += 1;
            }
            corr[i][j] = r;
            corr[j][i] = r;
        }
    }
    let eigenvalues = sym_eigenvalues(&corr);
    let second = eigenvalues[1].max(1e-12);
    let ratio = (eigenvalues[0] / second).min(1e6);
    Ok(UnidimScreen {
        eigenvalues,
        ratio,
        plausibly_unidimensional: ratio > 3.0,
        clamped_pairs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{ResponseMatrix, StudentRecord};
    use crate::sim;
    use rand::{Rng, SeedableRng};

    fn matrix_from_columns(cols: Vec<Vec<u8>>) -> ResponseMatrix {
        let n = cols[0].len();
        let items = (1..=cols.len()).map(|i| format!("Q{i}")).collect();
        let rows = (0..n)
            .map(|v| StudentRecord {
                student_id: format!("s{v}"),
                grade: 3,
                gender: "g".into(),
                responses: cols.iter().map(|c| c[v]).collect(),
            })
            .collect();
        ResponseMatrix::new(items, rows).unwrap()
    }

    #[test]
    fn single_factor_data_screens_positive() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let (a, b) = sim::sample_params(12, (1.2, 2.2), (-1.5, 1.5), &mut rng);
        let thetas = sim::draw_thetas(1200, 0.0, 1.0, &mut rng);
        let m = sim::simulate_2pl(&a, &b, &thetas, &mut rng);
        let screen = unidimensionality_screen(&m).unwrap();
        assert!(screen.ratio > 3.0, "ratio = {}", screen.ratio);
        assert!(screen.plausibly_unidimensional);
    }

    #[test]
    fn two_independent_factors_screen_negative() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(22);
        let k_half = 12;
        let (a, b) = sim::sample_params(k_half, (1.2, 2.2), (-1.0, 1.0), &mut rng);
        let theta1 = sim::draw_thetas(1200, 0.0, 1.0, &mut rng);
        let theta2 = sim::draw_thetas(1200, 0.0, 1.0, &mut rng);
        let m1 = sim::simulate_2pl(&a, &b, &theta1, &mut rng);
        let m2 = sim::simulate_2pl(&a, &b, &theta2, &mut rng);
        // stitch the two independent factors side by side
        let items: Vec<String> = (1..=2 * k_half).map(|i| format!("Q{i}")).collect();
        let rows: Vec<StudentRecord> = m1
            .rows()
            .iter()
            .zip(m2.rows())
            .map(|(r1, r2)| StudentRecord {
                student_id: r1.student_id.clone(),
                grade: 3,
                gender: "g".into(),
                responses: r1
                    .responses
                    .iter()
                    .chain(r2.responses.iter())
                    .copied()
                    .collect(),
            })
            .collect();
        let m = ResponseMatrix::new(items, rows).unwrap();
        let screen = unidimensionality_screen(&m).unwrap();
        assert!(screen.ratio < 3.0, "ratio = {}", screen.ratio);
        assert!(!screen.plausibly_unidimensional);
    }

    #[test]
    fn independent_bernoulli_items_give_ratio_near_one() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let cols: Vec<Vec<u8>> = (0..10)
            .map(|_| {
                (0..2000)
                    .map(|_| u8::from(rng.random::<f64>() < 0.5))
                    .collect()
            })
            .collect();
        let screen = unidimensionality_screen(&matrix_from_columns(cols)).unwrap();
        assert!(screen.ratio < 2.0, "ratio = {}", screen.ratio);
    }

    #[test]
    fn empty_cell_is_clamped_and_counted() {
        // second column equals the first: the (1,0)/(0,1) cells are empty
        let c1 = vec![1, 1, 0, 0, 1, 0];
        let m = matrix_from_columns(vec![c1.clone(), c1.clone(), vec![1, 0, 1, 0, 1, 0]]);
        let screen = unidimensionality_screen(&m).unwrap();
        assert!(screen.clamped_pairs >= 1);
    }

    #[test]
    fn needs_three_items() {
        let m = matrix_from_columns(vec![vec![1, 0, 1], vec![0, 1, 1]]);
        assert!(matches!(
            unidimensionality_screen(&m).unwrap_err(),
            Error::TooFew { what: "items", .. }
        ));
    }
}
