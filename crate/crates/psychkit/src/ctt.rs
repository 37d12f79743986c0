//! Classical test theory: per-item difficulty/discrimination statistics,
//! coefficient alpha, score descriptives, and z-score/percentile norm
//! tables.

use serde::{Deserialize, Serialize};

use crate::dataset::{require_analyzable, ResponseMatrix};
use crate::error::{Error, Result};
use crate::stats;

/// Flag thresholds: difficulty above `TOO_EASY` or below `TOO_HARD` marks
/// the item; otherwise a point-biserial below `LOW_DISCRIMINATION` does.
pub const TOO_EASY: f64 = 0.85;
pub const TOO_HARD: f64 = 0.25;
pub const LOW_DISCRIMINATION: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ItemFlag {
    TooEasy,
    TooHard,
    LowDiscrimination,
    Ok,
}

/// Per-item classical statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemStat {
    pub item: String,
    /// Proportion of correct responses; high values mean easy items.
    pub difficulty_index: f64,
    /// Pearson correlation of the item with the total score (item included).
    pub point_biserial: f64,
    /// Same, with the item removed from the total.
    pub point_biserial_corrected: f64,
    /// Alpha of the scale with this item removed; None for 2-item scales
    /// where the reduced scale has a single item.
    pub drop_alpha: Option<f64>,
    /// True when the item column is constant; correlations are reported as 0.
    pub zero_variance: bool,
    pub flag: ItemFlag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReliabilityBand {
    High,
    Moderate,
    Low,
}

/// Coefficient alpha with the interpretation bands used for assessments:
/// high for 0.7 < a < 0.9, moderate for 0.5 < a <= 0.7, low otherwise.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScaleReliability {
    pub alpha: f64,
    pub n_items: usize,
    pub interpretation: ReliabilityBand,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ItemAnalysis {
    pub items: Vec<ItemStat>,
    pub reliability: ScaleReliability,
}

fn reliability_band(alpha: f64) -> ReliabilityBand {
    if alpha > 0.7 && alpha < 0.9 {
        ReliabilityBand::High
    } else if alpha > 0.5 && alpha <= 0.7 {
        ReliabilityBand::Moderate
    } else {
        ReliabilityBand::Low
    }
}

/// Coefficient alpha from population (divide-by-n) variances:
/// (k/(k-1)) (1 - sum(var_i)/var_total).
fn coefficient_alpha(item_vars: &[f64], total_var: f64) -> Result<f64> {
    let k = item_vars.len() as f64;
    if item_vars.len() < 2 {
        return Err(Error::TooFew {
            what: "items",
            min: 2,
            found: item_vars.len(),
        });
    }
    if total_var <= 0.0 {
        return Err(Error::ZeroVariance(
            "total score is constant; alpha is undefined".into(),
        ));
    }
    Ok(k / (k - 1.0) * (1.0 - item_vars.iter().sum::<f64>() / total_var))
}

/// Full classical item analysis plus scale reliability.
pub fn item_analysis(matrix: &ResponseMatrix) -> Result<ItemAnalysis> {
    require_analyzable(matrix)?;
    let n = matrix.n_students();
    let k = matrix.n_items();
    let nf = n as f64;

    let columns: Vec<Vec<f64>> = (0..k)
        .map(|i| matrix.column(i).iter().map(|&c| c as f64).collect())
        .collect();
    let totals: Vec<f64> = matrix.total_scores().iter().map(|&t| t as f64).collect();

    let item_means: Vec<f64> = columns.iter().map(|c| c.iter().sum::<f64>() / nf).collect();
    let item_vars: Vec<f64> = columns
        .iter()
        .zip(&item_means)
        .map(|(c, &m)| c.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / nf)
        .collect();
    let (total_mean, total_var) = stats::mean_var_pop(&totals);

    let alpha = coefficient_alpha(&item_vars, total_var)?;
    let total_sd = total_var.sqrt();

    let mut items = Vec::with_capacity(k);
    for i in 0..k {
        let difficulty = item_means[i];
        let zero_variance = item_vars[i] <= 0.0;

        // covariance of item i with the total (population convention)
        let cov = columns[i]
            .iter()
            .zip(&totals)
            .map(|(&x, &t)| (x - item_means[i]) * (t - total_mean))
            .sum::<f64>()
            / nf;

        let point_biserial = if zero_variance {
            0.0
        } else {
            cov / (item_vars[i].sqrt() * total_sd)
        };

        // corrected: correlate with the total excluding the item;
        // var(t - x) = var(t) + var(x) - 2 cov(x, t)
        let rest_var = total_var + item_vars[i] - 2.0 * cov;
        let point_biserial_corrected = if zero_variance || rest_var <= 0.0 {
            0.0
        } else {
            (cov - item_vars[i]) / (item_vars[i].sqrt() * rest_var.sqrt())
        };

        // alpha of the scale without item i
        let drop_alpha = if k >= 3 {
            let rest_item_var_sum = item_vars.iter().sum::<f64>() - item_vars[i];
            if rest_var <= 0.0 {
                None
            } else {
                let km1 = (k - 1) as f64;
                Some(km1 / (km1 - 1.0) * (1.0 - rest_item_var_sum / rest_var))
            }
        } else {
            None
        };

        let flag = if difficulty > TOO_EASY {
            ItemFlag::TooEasy
        } else if difficulty < TOO_HARD {
            ItemFlag::TooHard
        } else if point_biserial < LOW_DISCRIMINATION {
            ItemFlag::LowDiscrimination
        } else {
            ItemFlag::Ok
        };

        items.push(ItemStat {
            item: matrix.items()[i].clone(),
            difficulty_index: difficulty,
            point_biserial,
            point_biserial_corrected,
            drop_alpha,
            zero_variance,
            flag,
        });
    }

    Ok(ItemAnalysis {
        items,
        reliability: ScaleReliability {
            alpha,
            n_items: k,
            interpretation: reliability_band(alpha),
        },
    })
}

/// Score distribution summary. `skew`/`kurtosis` are the plain moment
/// ratios g1 = m3/m2^1.5 and g2 = m4/m2^2 - 3; the `_adjusted` variants are
/// the small-sample-corrected G1/G2 estimators.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Descriptives {
    pub n: usize,
    pub mean: f64,
    /// Standard error of the mean, sd/sqrt(n).
    pub sem: f64,
    /// Sample (divide-by-(n-1)) standard deviation.
    pub sd: f64,
    pub skew: f64,
    pub kurtosis: f64,
    pub skew_adjusted: f64,
    pub kurtosis_adjusted: f64,
    pub min: f64,
    pub max: f64,
}

/// Summary statistics of a list of total scores.
pub fn descriptives(scores: &[f64]) -> Result<Descriptives> {
    if scores.len() < 2 {
        return Err(Error::TooFew {
            what: "scores",
            min: 2,
            found: scores.len(),
        });
    }
    let n = scores.len();
    let nf = n as f64;
    let mean = scores.iter().sum::<f64>() / nf;
    let m2 = scores.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / nf;
    if m2 <= 0.0 {
        return Err(Error::ZeroVariance(
            "scores are constant; skew and kurtosis are undefined".into(),
        ));
    }
    let m3 = scores.iter().map(|x| (x - mean).powi(3)).sum::<f64>() / nf;
    let m4 = scores.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / nf;
    let g1 = m3 / m2.powf(1.5);
    let g2 = m4 / (m2 * m2) - 3.0;
    let skew_adjusted = if n > 2 {
        g1 * (nf * (nf - 1.0)).sqrt() / (nf - 2.0)
    } else {
        g1
    };
    let kurtosis_adjusted = if n > 3 {
        ((nf + 1.0) * g2 + 6.0) * (nf - 1.0) / ((nf - 2.0) * (nf - 3.0))
    } else {
        g2
    };
    let var_sample = m2 * nf / (nf - 1.0);
    let sd = var_sample.sqrt();
    Ok(Descriptives {
        n,
        mean,
        sem: sd / nf.sqrt(),
        sd,
        skew: g1,
        kurtosis: g2,
        skew_adjusted,
        kurtosis_adjusted,
        min: scores.iter().cloned().fold(f64::INFINITY, f64::min),
        max: scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormRow {
    pub score: u32,
    pub z: f64,
    /// round(100 * P(X <= score)) under the empirical distribution.
    pub percentile: i64,
}

/// Raw-score to z/percentile mapping over every achievable score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormTable {
    pub n: usize,
    pub mean: f64,
    pub sd: f64,
    pub rows: Vec<NormRow>,
}

/// Build the norm table for scores 0..=max_score. z uses the unrounded
/// sample mean/sd; the percentile convention is <= (so the maximum observed
/// score maps to 100).
pub fn norm_table(scores: &[u32], max_score: u32) -> Result<NormTable> {
    if scores.len() < 2 {
        return Err(Error::TooFew {
            what: "scores",
            min: 2,
            found: scores.len(),
        });
    }
    let as_f: Vec<f64> = scores.iter().map(|&s| s as f64).collect();
    let (mean, var) = stats::mean_var_sample(&as_f);
    if var <= 0.0 {
        return Err(Error::ZeroVariance(
            "scores are constant; z-scores are undefined".into(),
        ));
    }
    let sd = var.sqrt();
    let n = scores.len();

    // cumulative counts over the integer support
    let mut counts = vec![0usize; max_score as usize + 1];
    for &s in scores {
        if s <= max_score {
            counts[s as usize] += 1;
        } else {
            return Err(Error::InvalidParameter(format!(
                "score {s} exceeds max_score {max_score}"
            )));
        }
    }
    let mut rows = Vec::with_capacity(max_score as usize + 1);
    let mut cum = 0usize;
    for s in 0..=max_score {
        cum += counts[s as usize];
        let z = (s as f64 - mean) / sd;
        let percentile = (100.0 * cum as f64 / n as f64).round() as i64;
        rows.push(NormRow {
            score: s,
            z,
            percentile,
        });
    }
    Ok(NormTable {
        n,
        mean,
        sd,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_csv_str, AnalysisConfig, ResponseMatrix, StudentRecord};
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn matrix_from_columns(cols: &[Vec<u8>]) -> ResponseMatrix {
        let n = cols[0].len();
        let items: Vec<String> = (1..=cols.len()).map(|i| format!("Q{i}")).collect();
        let rows: Vec<StudentRecord> = (0..n)
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
    fn constant_column_reports_zero_pb_and_flag() {
        let m = matrix_from_columns(&[
            vec![1, 1, 1, 1],
            vec![1, 0, 1, 0],
            vec![0, 1, 1, 0],
        ]);
        let out = item_analysis(&m).unwrap();
        let q1 = &out.items[0];
        assert_relative_eq!(q1.difficulty_index, 1.0);
        assert_eq!(q1.point_biserial, 0.0);
        assert!(q1.zero_variance);
        assert_eq!(q1.flag, ItemFlag::TooEasy);
    }

    #[test]
    fn two_identical_items_give_alpha_one() {
        let m = matrix_from_columns(&[vec![1, 0, 1, 0], vec![1, 0, 1, 0]]);
        let out = item_analysis(&m).unwrap();
        assert_relative_eq!(out.reliability.alpha, 1.0, epsilon = 1e-12);
        // 2-item scale: drop-alpha undefined
        assert!(out.items[0].drop_alpha.is_none());
    }

    #[test]
    fn alpha_errors_on_constant_totals() {
        // one correct each, complementary items: total is constant 1
        let m = matrix_from_columns(&[vec![1, 0, 1, 0], vec![0, 1, 0, 1]]);
        assert!(matches!(
            item_analysis(&m).unwrap_err(),
            Error::ZeroVariance(_)
        ));
    }

    #[test]
    fn flags_follow_thresholds() {
        // 20 students; Q1 difficulty 0.9 -> too easy; Q2 0.2 -> too hard
        let q1: Vec<u8> = (0..20).map(|i| u8::from(i < 18)).collect();
        let q2: Vec<u8> = (0..20).map(|i| u8::from(i < 4)).collect();
        let q3: Vec<u8> = (0..20).map(|i| u8::from(i % 2 == 0)).collect();
        let m = matrix_from_columns(&[q1, q2, q3]);
        let out = item_analysis(&m).unwrap();
        assert_eq!(out.items[0].flag, ItemFlag::TooEasy);
        assert_eq!(out.items[1].flag, ItemFlag::TooHard);
    }

    #[test]
    fn drop_alpha_self_consistency() {
        // removing an item whose drop_alpha exceeds alpha strictly
        // increases the recomputed alpha
        let m = matrix_from_columns(&[
            vec![1, 0, 1, 0, 1, 0, 1, 0],
            vec![1, 0, 1, 0, 1, 0, 0, 1],
            vec![0, 1, 1, 0, 0, 1, 1, 0], // weakly related item
            vec![1, 0, 1, 0, 0, 0, 1, 1],
        ]);
        let out = item_analysis(&m).unwrap();
        let alpha = out.reliability.alpha;
        for stat in &out.items {
            let Some(da) = stat.drop_alpha else { continue };
            if da > alpha {
                let reduced = m
                    .drop_items(&[stat.item.clone()].into_iter().collect())
                    .unwrap();
                let re = item_analysis(&reduced).unwrap();
                assert!(re.reliability.alpha > alpha);
                assert_relative_eq!(re.reliability.alpha, da, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn descriptives_degenerate_and_symmetric() {
        assert!(matches!(
            descriptives(&[5.0, 5.0, 5.0, 5.0]).unwrap_err(),
            Error::ZeroVariance(_)
        ));
        let d = descriptives(&[0.0, 1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_relative_eq!(d.skew, 0.0, epsilon = 1e-12);
        assert_relative_eq!(d.mean, 2.0);
        assert_relative_eq!(d.sem, d.sd / (5.0f64).sqrt(), epsilon = 1e-12);
        assert!(d.min <= d.mean && d.mean <= d.max);
    }

    #[test]
    fn norm_table_centering_and_max_percentile() {
        // scores: 0..=4 once each; mean 2
        let t = norm_table(&[0, 1, 2, 3, 4], 4).unwrap();
        assert_relative_eq!(t.rows[2].z, 0.0, epsilon = 1e-12);
        assert_eq!(t.rows[4].percentile, 100);
        // z strictly increasing, percentile non-decreasing
        for w in t.rows.windows(2) {
            assert!(w[1].z > w[0].z);
            assert!(w[1].percentile >= w[0].percentile);
        }
    }

    #[test]
    fn norm_table_covers_unobserved_scores() {
        let t = norm_table(&[0, 0, 3, 3], 5).unwrap();
        assert_eq!(t.rows.len(), 6);
        assert_eq!(t.rows[5].percentile, 100); // <= convention
        assert_eq!(t.rows[1].percentile, 50); // P(X<=1) = 0.5
    }

    #[test]
    fn reliability_bands() {
        assert_eq!(reliability_band(0.84), ReliabilityBand::High);
        assert_eq!(reliability_band(0.7), ReliabilityBand::Moderate);
        assert_eq!(reliability_band(0.5), ReliabilityBand::Low);
        assert_eq!(reliability_band(0.3), ReliabilityBand::Low);
    }

    #[test]
    fn item_analysis_requires_two_items() {
        let text = "student_id,grade,gender,Q1\ns1,3,g,1\ns2,3,g,0\n";
        let (m, _) = load_csv_str(text, &AnalysisConfig::default()).unwrap();
        assert!(matches!(
            item_analysis(&m).unwrap_err(),
            Error::TooFew { what: "items", .. }
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// Brute-force oracle: point-biserials equal direct Pearson
        /// correlations, and the corrected value never exceeds the
        /// uncorrected one for positively correlated items.
        #[test]
        fn point_biserial_matches_pearson_oracle(
            seed in 0u64..1000,
            n in 8usize..40,
            k in 3usize..8,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let cols: Vec<Vec<u8>> = (0..k)
                .map(|_| (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect())
                .collect();
            let m = matrix_from_columns(&cols);
            let Ok(out) = item_analysis(&m) else { return Ok(()); };
            prop_assert!(out.reliability.alpha <= 1.0 + 1e-12);
            let totals: Vec<f64> = m.total_scores().iter().map(|&t| t as f64).collect();
            for (i, stat) in out.items.iter().enumerate() {
                let col: Vec<f64> = m.column(i).iter().map(|&c| c as f64).collect();
                if stat.zero_variance { continue; }
                let oracle = crate::stats::pearson(&col, &totals);
                prop_assert!((stat.point_biserial - oracle.unwrap()).abs() < 1e-10);
                let rest: Vec<f64> = col.iter().zip(&totals).map(|(x, t)| t - x).collect();
                if let Some(corr_oracle) = crate::stats::pearson(&col, &rest) {
                    prop_assert!((stat.point_biserial_corrected - corr_oracle).abs() < 1e-10);
                    if corr_oracle > 0.0 {
                        prop_assert!(
                            stat.point_biserial_corrected <= stat.point_biserial + 1e-12
                        );
                    }
                }
            }
        }

        /// Difficulty stays in [0,1] and grows when a wrong answer flips
        /// to correct.
        #[test]
        fn difficulty_monotone_under_added_correct(seed in 0u64..1000, n in 4usize..30) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut col: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.4)).collect();
            let other: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<f64>() < 0.5)).collect();
            let m = matrix_from_columns(&[col.clone(), other.clone()]);
            let d0 = item_analysis(&m).map(|o| o.items[0].difficulty_index);
            if let Some(pos) = col.iter().position(|&c| c == 0) {
                col[pos] = 1;
                let m2 = matrix_from_columns(&[col, other]);
                let d1 = item_analysis(&m2).map(|o| o.items[0].difficulty_index);
                if let (Ok(d0), Ok(d1)) = (d0, d1) {
                    prop_assert!((0.0..=1.0).contains(&d0) && (0.0..=1.0).contains(&d1));
                    prop_assert!(d1 > d0);
                }
            }
        }
    }
}
