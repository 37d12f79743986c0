//! Group-comparison statistics: one-/two-way ANOVA, Dunn's rank-based
//! pairwise tests with Benjamini-Hochberg adjustment, Cohen's D, and
//! minimum-detectable-effect reporting.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::special::{
    f_sf, noncentral_f_lambda_for_power, normal_quantile, normal_sf,
};
use crate::stats::{self, midranks};

/// One hypothesis-test outcome. `df` holds whatever degrees of freedom the
/// statistic carries: `[d1, d2]` for F, `[d]` for chi-squared, empty for z.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TestResult {
    pub label: String,
    pub statistic: f64,
    pub df: Vec<f64>,
    pub p_value: f64,
    pub p_adjusted: Option<f64>,
    pub effect_size: Option<f64>,
    pub effect_label: String,
}

/// Classical one-way ANOVA. F = (SSB/(k-1))/(SSW/(N-k)).
pub fn one_way_anova(groups: &[Vec<f64>]) -> Result<TestResult> {
    if groups.len() < 2 {
        return Err(Error::TooFew {
            what: "groups",
            min: 2,
            found: groups.len(),
        });
    }
    for (i, g) in groups.iter().enumerate() {
        if g.len() < 2 {
            return Err(Error::EmptyGroup(format!(
                "group {} has {} observation(s), need 2",
                i + 1,
                g.len()
            )));
        }
    }
    let n_total: usize = groups.iter().map(|g| g.len()).sum();
    let grand_mean =
        groups.iter().flatten().sum::<f64>() / n_total as f64;
    let mut ssb = 0.0;
    let mut ssw = 0.0;
    for g in groups {
        let m = g.iter().sum::<f64>() / g.len() as f64;
        ssb += g.len() as f64 * (m - grand_mean) * (m - grand_mean);
        ssw += g.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    }
    if ssw <= 0.0 {
        let what = if ssb <= 0.0 {
            "all observations identical; F is undefined"
        } else {
            "zero within-group variance; F is unbounded"
        };
        return Err(Error::ZeroVariance(what.into()));
    }
    let df1 = (groups.len() - 1) as f64;
    let df2 = (n_total - groups.len()) as f64;
    let f = (ssb / df1) / (ssw / df2);
    Ok(TestResult {
        label: "one_way_anova".into(),
        statistic: f,
        df: vec![df1, df2],
        p_value: f_sf(f, df1, df2),
        p_adjusted: None,
        effect_size: None,
        effect_label: String::new(),
    })
}

/// Least squares fit of y on the given columns; returns the residual sum
/// of squares.
fn rss(columns: &[Vec<f64>], y: &[f64]) -> Result<f64> {
    let n = y.len();
    let p = columns.len();
    let mut xtx = vec![vec![0.0; p]; p];
    let mut xty = vec![0.0; p];
    for a in 0..p {
        for b in a..p {
            let s: f64 = (0..n).map(|v| columns[a][v] * columns[b][v]).sum();
            xtx[a][b] = s;
            xtx[b][a] = s;
        }
        xty[a] = (0..n).map(|v| columns[a][v] * y[v]).sum();
    }
    let beta = stats::linalg::solve(xtx, xty)?;
    let mut out = 0.0;
    for v in 0..n {
        let fitted: f64 = (0..p).map(|a| beta[a] * columns[a][v]).sum();
        out += (y[v] - fitted) * (y[v] - fitted);
    }
    Ok(out)
}

fn dummy_columns(labels: &[String], levels: &[String], n: usize) -> Vec<Vec<f64>> {
    levels[1..]
        .iter()
        .map(|lv| {
            (0..n)
                .map(|v| if &labels[v] == lv { 1.0 } else { 0.0 })
                .collect()
        })
        .collect()
}

/// Two-way ANOVA with interaction, sequential (type-I) sums of squares on
/// possibly unbalanced data. Returns the A, B, and AxB tests in that order.
pub fn two_way_anova(
    scores: &[f64],
    factor_a: &[String],
    factor_b: &[String],
) -> Result<[TestResult; 3]> {
    let n = scores.len();
    if factor_a.len() != n || factor_b.len() != n {
        return Err(Error::InvalidParameter(
            "factor vectors must match the score vector length".into(),
        ));
    }
    let mut levels_a: Vec<String> = factor_a.to_vec();
    levels_a.sort();
    levels_a.dedup();
    let mut levels_b: Vec<String> = factor_b.to_vec();
    levels_b.sort();
    levels_b.dedup();
    if levels_a.len() < 2 || levels_b.len() < 2 {
        return Err(Error::TooFew {
            what: "factor levels",
            min: 2,
            found: levels_a.len().min(levels_b.len()),
        });
    }
    // every cell nonempty
    let mut cells: BTreeMap<(String, String), usize> = BTreeMap::new();
    for v in 0..n {
        *cells
            .entry((factor_a[v].clone(), factor_b[v].clone()))
            .or_default() += 1;
    }
    for la in &levels_a {
        for lb in &levels_b {
            if !cells.contains_key(&(la.clone(), lb.clone())) {
                return Err(Error::EmptyDesignCell(format!("A={la}, B={lb}")));
            }
        }
    }
    let df_a = (levels_a.len() - 1) as f64;
    let df_b = (levels_b.len() - 1) as f64;
    let df_ab = df_a * df_b;
    let df_err = n as f64 - (levels_a.len() * levels_b.len()) as f64;
    if df_err < 1.0 {
        return Err(Error::TooFew {
            what: "residual degrees of freedom",
            min: 1,
            found: 0,
        });
    }

    let intercept = vec![vec![1.0; n]];
    let cols_a = dummy_columns(factor_a, &levels_a, n);
    let cols_b = dummy_columns(factor_b, &levels_b, n);
    let mut cols_ab = Vec::new();
    for ca in &cols_a {
        for cb in &cols_b {
            cols_ab.push((0..n).map(|v| ca[v] * cb[v]).collect::<Vec<f64>>());
        }
    }

    let mut design = intercept;
    let rss0 = rss(&design, scores)?;
    design.extend(cols_a.iter().cloned());
    let rss_a = rss(&design, scores)?;
    design.extend(cols_b.iter().cloned());
    let rss_b = rss(&design, scores)?;
    design.extend(cols_ab.iter().cloned());
    let rss_full = rss(&design, scores)?;

    let ss_a = (rss0 - rss_a).max(0.0);
    let ss_b = (rss_a - rss_b).max(0.0);
    let ss_ab = (rss_b - rss_full).max(0.0);
    if rss_full <= 1e-12 && ss_a <= 1e-12 && ss_b <= 1e-12 && ss_ab <= 1e-12 {
        return Err(Error::ZeroVariance(
            "all observations identical; F is undefined".into(),
        ));
    }
    if rss_full <= 0.0 {
        return Err(Error::ZeroVariance(
            "zero residual variance; F is unbounded".into(),
        ));
    }
    let mse = rss_full / df_err;

    let make = |label: &str, ss: f64, df: f64| TestResult {
        label: label.into(),
        statistic: (ss / df) / mse,
        df: vec![df, df_err],
        p_value: f_sf((ss / df) / mse, df, df_err),
        p_adjusted: None,
        effect_size: None,
        effect_label: String::new(),
    };
    Ok([
        make("factor_a", ss_a, df_a),
        make("factor_b", ss_b, df_b),
        make("interaction", ss_ab, df_ab),
    ])
}

/// Dunn's rank-based pairwise comparisons with tie-corrected variance and
/// Benjamini-Hochberg adjustment across the pairs. Cohen's D on the raw
/// scores is attached as the effect size where defined.
pub fn dunn_test(groups: &[(String, Vec<f64>)]) -> Result<Vec<TestResult>> {
    if groups.len() < 2 {
        return Err(Error::TooFew {
            what: "groups",
            min: 2,
            found: groups.len(),
        });
    }
    for (label, g) in groups {
        if g.is_empty() {
            return Err(Error::EmptyGroup(label.clone()));
        }
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|(_, g)| g.iter().copied()).collect();
    let n = pooled.len() as f64;
    let (ranks, tie_term) = midranks(&pooled);

    let mut mean_ranks = Vec::with_capacity(groups.len());
    let mut offset = 0usize;
    for (_, g) in groups {
        let slice = &ranks[offset..offset + g.len()];
        mean_ranks.push(slice.iter().sum::<f64>() / g.len() as f64);
        offset += g.len();
    }

    let base_var = n * (n + 1.0) / 12.0 - tie_term / (12.0 * (n - 1.0));
    let mut results = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            let ni = groups[i].1.len() as f64;
            let nj = groups[j].1.len() as f64;
            let var = base_var * (1.0 / ni + 1.0 / nj);
            let z = if var > 0.0 {
                (mean_ranks[i] - mean_ranks[j]) / var.sqrt()
            } else {
                0.0
            };
            let p = if var > 0.0 { 2.0 * normal_sf(z.abs()) } else { 1.0 };
            let d = cohens_d(&groups[i].1, &groups[j].1).ok();
            results.push(TestResult {
                label: format!("{} vs {}", groups[i].0, groups[j].0),
                statistic: z,
                df: vec![],
                p_value: p,
                p_adjusted: None,
                effect_size: d,
                effect_label: "cohens_d".into(),
            });
        }
    }
    let adjusted =
        benjamini_hochberg(&results.iter().map(|r| r.p_value).collect::<Vec<_>>())?;
    for (r, adj) in results.iter_mut().zip(adjusted) {
        r.p_adjusted = Some(adj);
    }
    Ok(results)
}

/// Benjamini-Hochberg step-up adjustment: p~_(i) = min_{j>=i} p_(j) m / j,
/// capped at 1, returned in input order.
pub fn benjamini_hochberg(p_values: &[f64]) -> Result<Vec<f64>> {
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) || p.is_nan() {
            return Err(Error::InvalidPValue(p));
        }
    }
    let m = p_values.len();
    if m == 0 {
        return Ok(vec![]);
    }
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].partial_cmp(&p_values[b]).unwrap());
    let mut adjusted = vec![0.0; m];
    let mut running_min = 1.0f64;
    for rank in (0..m).rev() {
        let idx = order[rank];
        let candidate = (p_values[idx] * m as f64 / (rank + 1) as f64).min(1.0);
        running_min = running_min.min(candidate);
        adjusted[idx] = running_min;
    }
    Ok(adjusted)
}

/// Cohen's D with the (n-1)-weighted pooled standard deviation.
pub fn cohens_d(group_a: &[f64], group_b: &[f64]) -> Result<f64> {
    if group_a.len() < 2 || group_b.len() < 2 {
        return Err(Error::TooFew {
            what: "observations per group",
            min: 2,
            found: group_a.len().min(group_b.len()),
        });
    }
    let (ma, va) = stats::mean_var_sample(group_a);
    let (mb, vb) = stats::mean_var_sample(group_b);
    let na = group_a.len() as f64;
    let nb = group_b.len() as f64;
    let pooled = ((na - 1.0) * va + (nb - 1.0) * vb) / (na + nb - 2.0);
    if pooled <= 0.0 {
        return Err(Error::ZeroVariance(
            "pooled standard deviation is zero".into(),
        ));
    }
    Ok((ma - mb) / pooled.sqrt())
}

/// Minimum detectable effects on the Cohen's D scale, both variants labeled
/// by field: a two-group t-test closed form
/// D = (z_{1-a/2} + z_power) sqrt(1/n1 + 1/n2) (present when exactly two
/// groups are given), and a k-group ANOVA variant from noncentral-F
/// inversion reported as D = 2f.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinDetectableEffect {
    pub alpha: f64,
    pub power: f64,
    pub group_sizes: Vec<usize>,
    pub t_test_two_group: Option<f64>,
    pub anova_noncentral_f: f64,
}

pub fn min_detectable_effect(
    group_sizes: &[usize],
    alpha: f64,
    power: f64,
) -> Result<MinDetectableEffect> {
    if !(0.0 < alpha && alpha < 1.0) || !(0.0 < power && power < 1.0) {
        return Err(Error::InvalidParameter(
            "alpha and power must lie in (0,1)".into(),
        ));
    }
    if group_sizes.len() < 2 {
        return Err(Error::TooFew {
            what: "groups",
            min: 2,
            found: group_sizes.len(),
        });
    }
    for &s in group_sizes {
        if s < 2 {
            return Err(Error::TooFew {
                what: "observations per group",
                min: 2,
                found: s,
            });
        }
    }
    let k = group_sizes.len();
    let n_total: usize = group_sizes.iter().sum();

    let t_test_two_group = if k == 2 {
        let z_a = normal_quantile(1.0 - alpha / 2.0)?;
        let z_p = normal_quantile(power)?;
        let inv = 1.0 / group_sizes[0] as f64 + 1.0 / group_sizes[1] as f64;
        Some((z_a + z_p) * inv.sqrt())
    } else {
        None
    };

    let d1 = (k - 1) as f64;
    let d2 = (n_total - k) as f64;
    let lambda = noncentral_f_lambda_for_power(d1, d2, alpha, power)?;
    let f_effect = (lambda / n_total as f64).sqrt();

    Ok(MinDetectableEffect {
        alpha,
        power,
        group_sizes: group_sizes.to_vec(),
        t_test_two_group,
        anova_noncentral_f: 2.0 * f_effect,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn anova_identical_groups() {
        let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        assert_relative_eq!(r.statistic, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn anova_hand_computed() {
        // SSB = 13.5, SSW = 4, F = 13.5/(4/4) = 13.5;
        // scipy.stats.f.sf(13.5, 1, 4) = 0.02131164112875672
        let r = one_way_anova(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        assert_relative_eq!(r.statistic, 13.5, epsilon = 1e-12);
        assert_eq!(r.df, vec![1.0, 4.0]);
        assert_relative_eq!(r.p_value, 0.02131164112875672, epsilon = 1e-10);
    }

    #[test]
    fn anova_degenerate_errors() {
        assert!(matches!(
            one_way_anova(&[vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap_err(),
            Error::ZeroVariance(_)
        ));
        assert!(one_way_anova(&[vec![1.0], vec![2.0, 3.0]]).is_err());
    }

    #[test]
    fn two_way_additive_interaction_is_zero() {
        // exactly additive cell means: A adds 2, B adds 3
        let scores = vec![0.0, 2.0, 3.0, 5.0, 2.0, 4.0, 5.0, 7.0];
        let a: Vec<String> = ["a0", "a0", "a0", "a0", "a1", "a1", "a1", "a1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let b: Vec<String> = ["b0", "b0", "b1", "b1", "b0", "b0", "b1", "b1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let [fa, fb, fab] = two_way_anova(&scores, &a, &b).unwrap();
        assert_relative_eq!(fab.statistic, 0.0, epsilon = 1e-10);
        assert_relative_eq!(fab.p_value, 1.0, epsilon = 1e-10);
        assert!(fa.statistic > 0.0 && fb.statistic > 0.0);
    }

    #[test]
    fn two_way_constant_scores_error() {
        let scores = vec![1.0; 8];
        let a: Vec<String> = ["a0", "a0", "a0", "a0", "a1", "a1", "a1", "a1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let b: Vec<String> = ["b0", "b0", "b1", "b1", "b0", "b0", "b1", "b1"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        assert!(matches!(
            two_way_anova(&scores, &a, &b).unwrap_err(),
            Error::ZeroVariance(_)
        ));
    }

    #[test]
    fn two_way_empty_cell_error() {
        let scores = vec![1.0, 2.0, 3.0, 4.0];
        let a: Vec<String> = ["a0", "a0", "a1", "a1"].iter().map(|s| s.to_string()).collect();
        let b: Vec<String> = ["b0", "b0", "b0", "b0"].iter().map(|s| s.to_string()).collect();
        // b has one level -> TooFew; make b two levels with an empty (a1,b1)
        let b2: Vec<String> = ["b0", "b1", "b0", "b0"].iter().map(|s| s.to_string()).collect();
        assert!(two_way_anova(&scores, &a, &b).is_err());
        assert!(matches!(
            two_way_anova(&scores, &a, &b2).unwrap_err(),
            Error::EmptyDesignCell(_)
        ));
    }

    #[test]
    fn two_way_matches_reference_fit() {
        // statsmodels anova_lm(typ=1) on the same unbalanced layout:
        //   A:   F = 4.753004598066,  p = 0.032532201640
        //   B:   F = 51.104207846661, p = 0.000018717953
        //   AxB: F = 3.946278825996,  p = 0.051057625018
        let scores = vec![
            3.0, 4.5, 5.0, 6.0, 7.5, 2.0, 3.5, 4.0, 4.5, 8.0, 9.0, 10.5, 5.5, 6.0, 7.0,
            8.5, 9.5,
        ];
        let fa: Vec<String> = [
            "a1", "a1", "a1", "a1", "a1", "a2", "a2", "a2", "a2", "a2", "a2", "a2", "a3",
            "a3", "a3", "a3", "a3",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let fb: Vec<String> = [
            "b1", "b1", "b1", "b2", "b2", "b1", "b1", "b1", "b1", "b2", "b2", "b2", "b1",
            "b1", "b2", "b2", "b2",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        let [a, b, ab] = two_way_anova(&scores, &fa, &fb).unwrap();
        assert_relative_eq!(a.statistic, 4.753004598066, epsilon = 1e-8);
        assert_relative_eq!(a.p_value, 0.032532201640, epsilon = 1e-8);
        assert_relative_eq!(b.statistic, 51.104207846661, epsilon = 1e-7);
        assert_relative_eq!(b.p_value, 0.000018717953, epsilon = 1e-9);
        assert_relative_eq!(ab.statistic, 3.946278825996, epsilon = 1e-8);
        assert_relative_eq!(ab.p_value, 0.051057625018, epsilon = 1e-8);
    }

    #[test]
    fn dunn_identical_groups() {
        let g = vec![
            ("x".to_string(), vec![1.0, 2.0, 3.0]),
            ("y".to_string(), vec![1.0, 2.0, 3.0]),
        ];
        let r = dunn_test(&g).unwrap();
        assert_relative_eq!(r[0].statistic, 0.0, epsilon = 1e-12);
        assert_relative_eq!(r[0].p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn dunn_separated_groups_match_rank_oracle() {
        // brute-force rank computation: ranks 1..6, mean ranks 2 and 5,
        // var = (6*7/12)(1/3+1/3) = 7/3, z = -3/sqrt(7/3) = -1.9639610121
        let g = vec![
            ("lo".to_string(), vec![1.0, 2.0, 3.0]),
            ("hi".to_string(), vec![10.0, 11.0, 12.0]),
        ];
        let r = dunn_test(&g).unwrap();
        assert_relative_eq!(r[0].statistic, -1.9639610121239317, epsilon = 1e-10);
        assert_relative_eq!(r[0].p_value, 0.04953461343562668, epsilon = 1e-10);
    }

    #[test]
    fn bh_examples() {
        assert_eq!(benjamini_hochberg(&[0.03]).unwrap(), vec![0.03]);
        let adj = benjamini_hochberg(&[0.01, 0.02, 0.03, 0.04]).unwrap();
        for v in adj {
            assert_relative_eq!(v, 0.04, epsilon = 1e-12);
        }
        let adj = benjamini_hochberg(&vec![0.5; 25]).unwrap();
        for v in adj {
            assert_relative_eq!(v, 0.5, epsilon = 1e-12);
        }
        assert!(benjamini_hochberg(&[1.2]).is_err());
        assert!(benjamini_hochberg(&[-0.1]).is_err());
    }

    #[test]
    fn cohens_d_examples() {
        let a = vec![1.0, 2.0, 3.0];
        assert_relative_eq!(cohens_d(&a, &a).unwrap(), 0.0);
        assert!(matches!(
            cohens_d(&[0.0, 0.0], &[1.0, 1.0]).unwrap_err(),
            Error::ZeroVariance(_)
        ));
    }

    #[test]
    fn mde_closed_forms() {
        let m = min_detectable_effect(&[100, 100], 0.05, 0.8).unwrap();
        // (1.9599639845 + 0.8416212336) * sqrt(0.02) = 0.39620398115993455
        assert_relative_eq!(m.t_test_two_group.unwrap(), 0.39620398115993455, epsilon = 1e-6);
        // noncentral-F route for k=2: lambda(1,198) = 7.925698829 -> 0.39813813757
        assert_relative_eq!(m.anova_noncentral_f, 0.39813813756823535, epsilon = 1e-5);

        // the four-group cohort size: D = 0.12799204718
        let m = min_detectable_effect(&[709, 748, 585, 624], 0.05, 0.8).unwrap();
        assert!(m.t_test_two_group.is_none());
        assert_relative_eq!(m.anova_noncentral_f, 0.12799204718093665, epsilon = 1e-5);

        assert!(min_detectable_effect(&[1, 100], 0.05, 0.8).is_err());
        assert!(min_detectable_effect(&[10, 10], 0.0, 0.8).is_err());
    }

    #[test]
    fn mde_monotone_in_n() {
        let mut last = f64::INFINITY;
        for n in [100usize, 1_000, 10_000, 100_000] {
            let m = min_detectable_effect(&[n, n], 0.05, 0.8).unwrap();
            let d = m.t_test_two_group.unwrap();
            assert!(d < last);
            last = d;
        }
        assert!(last < 0.02); // heading to zero
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        /// BH is monotone: smaller p never receives a larger adjusted p;
        /// and adjusting an already-flat set is a fixed point.
        #[test]
        fn bh_monotone(ps in proptest::collection::vec(0.0f64..=1.0, 1..40)) {
            let adj = benjamini_hochberg(&ps).unwrap();
            for i in 0..ps.len() {
                for j in 0..ps.len() {
                    if ps[i] <= ps[j] {
                        prop_assert!(adj[i] <= adj[j] + 1e-12);
                    }
                }
                prop_assert!(adj[i] + 1e-12 >= ps[i]);
            }
        }

        /// F on two groups equals the square of the pooled t statistic.
        #[test]
        fn f_equals_t_squared(
            seed in 0u64..500,
            na in 3usize..20,
            nb in 3usize..20,
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..na).map(|_| rng.random::<f64>() * 3.0).collect();
            let b: Vec<f64> = (0..nb).map(|_| rng.random::<f64>() * 3.0 + 0.5).collect();
            let Ok(f) = one_way_anova(&[a.clone(), b.clone()]) else { return Ok(()); };
            // pooled t-test oracle
            let (ma, va) = crate::stats::mean_var_sample(&a);
            let (mb, vb) = crate::stats::mean_var_sample(&b);
            let sp2 = ((na as f64 - 1.0) * va + (nb as f64 - 1.0) * vb)
                / (na as f64 + nb as f64 - 2.0);
            let t = (ma - mb) / (sp2 * (1.0 / na as f64 + 1.0 / nb as f64)).sqrt();
            prop_assert!((f.statistic - t * t).abs() < 1e-8 * (1.0 + t * t));
        }

        /// Dunn statistics are invariant under strictly monotone transforms.
        #[test]
        fn dunn_monotone_invariant(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let g1: Vec<f64> = (0..8).map(|_| (rng.random::<f64>() * 10.0).round()).collect();
            let g2: Vec<f64> = (0..6).map(|_| (rng.random::<f64>() * 10.0).round()).collect();
            let base = vec![("a".to_string(), g1.clone()), ("b".to_string(), g2.clone())];
            let mapped = vec![
                ("a".to_string(), g1.iter().map(|x| (x * 0.3).exp()).collect()),
                ("b".to_string(), g2.iter().map(|x| (x * 0.3).exp()).collect()),
            ];
            let r1 = dunn_test(&base).unwrap();
            let r2 = dunn_test(&mapped).unwrap();
            prop_assert!((r1[0].statistic - r2[0].statistic).abs() < 1e-10);
        }

        /// Cohen's D is antisymmetric.
        #[test]
        fn cohens_d_antisymmetric(seed in 0u64..500) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a: Vec<f64> = (0..10).map(|_| rng.random::<f64>()).collect();
            let b: Vec<f64> = (0..12).map(|_| rng.random::<f64>() + 0.2).collect();
            if let (Ok(d1), Ok(d2)) = (cohens_d(&a, &b), cohens_d(&b, &a)) {
                prop_assert!((d1 + d2).abs() < 1e-12);
            }
        }
    }
}
