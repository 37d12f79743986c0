//! Distribution tail areas and quantiles.
//!
//! The incomplete beta/gamma and erfc evaluations come from `statrs`
//! (Lentz continued fractions / rational approximations, good to ~1e-14),
//! so p-value comparisons are tolerance-bounded by statistics rather than
//! by special-function error. The noncentral F CDF is a Poisson-weighted
//! incomplete-beta series built on the same primitives.

use crate::error::{Error, Result};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::beta::beta_reg;
use statrs::function::erf::erfc;
use statrs::function::gamma::gamma_ur;

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Standard normal survival function P(Z > x).
pub fn normal_sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Standard normal quantile.
pub fn normal_quantile(p: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&p) || p == 0.0 {
        return Err(Error::InvalidParameter(format!(
            "normal quantile needs p in (0,1), got {p}"
        )));
    }
    let n = Normal::new(0.0, 1.0).expect("unit normal");
    Ok(n.inverse_cdf(p))
}

/// Chi-squared survival function P(X > x) with `df` degrees of freedom.
pub fn chi2_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        gamma_ur(df / 2.0, x / 2.0)
    }
}

/// F distribution survival function P(F > x).
pub fn f_sf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * x))
    }
}

/// F distribution CDF.
pub fn f_cdf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        beta_reg(d1 / 2.0, d2 / 2.0, d1 * x / (d1 * x + d2))
    }
}

/// Upper quantile of the F distribution by bisection on the CDF.
pub fn f_quantile(p: f64, d1: f64, d2: f64) -> Result<f64> {
    if !(0.0 < p && p < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "F quantile needs p in (0,1), got {p}"
        )));
    }
    let mut hi = 1.0;
    while f_cdf(hi, d1, d2) < p {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(Error::InvalidParameter("F quantile diverged".into()));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f_cdf(mid, d1, d2) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Noncentral F CDF with noncentrality `lambda`,
/// P(X <= x) = sum_j Pois(j; lambda/2) I_y(d1/2 + j, d2/2), y = d1 x/(d1 x + d2).
pub fn noncentral_f_cdf(x: f64, d1: f64, d2: f64, lambda: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if lambda <= 0.0 {
        return f_cdf(x, d1, d2);
    }
    let y = d1 * x / (d1 * x + d2);
    let half = lambda / 2.0;
    let mut weight = (-half).exp(); // Pois(0)
    let mut cum_weight = weight;
    let mut acc = weight * beta_reg(d1 / 2.0, d2 / 2.0, y);
    let mut j = 0usize;
    while cum_weight < 1.0 - 1e-14 && j < 100_000 {
        j += 1;
        weight *= half / j as f64;
        if weight > 0.0 {
            acc += weight * beta_reg(d1 / 2.0 + j as f64, d2 / 2.0, y);
        }
        cum_weight += weight;
    }
    acc.clamp(0.0, 1.0)
}

/// Noncentrality lambda at which an F(d1, d2) level-`alpha` test reaches
/// `power`, found by bisection (power is monotone increasing in lambda).
pub fn noncentral_f_lambda_for_power(d1: f64, d2: f64, alpha: f64, power: f64) -> Result<f64> {
    let crit = f_quantile(1.0 - alpha, d1, d2)?;
    let power_at = |lam: f64| 1.0 - noncentral_f_cdf(crit, d1, d2, lam);
    let mut hi = 1.0;
    while power_at(hi) < power {
        hi *= 2.0;
        if hi > 1e9 {
            return Err(Error::InvalidParameter(
                "noncentrality search diverged".into(),
            ));
        }
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if power_at(mid) < power {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Numerically stable logistic sigmoid.
#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// log(sigmoid(x)), stable for large |x|.
#[inline]
pub fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn normal_tails() {
        assert_relative_eq!(normal_cdf(0.0), 0.5, epsilon = 1e-15);
        assert_relative_eq!(normal_sf(1.959963984540054), 0.025, epsilon = 1e-10);
        assert_relative_eq!(
            normal_quantile(0.975).unwrap(),
            1.959963984540054,
            epsilon = 1e-8
        );
        assert_relative_eq!(
            normal_quantile(0.8).unwrap(),
            0.8416212335729143,
            epsilon = 1e-8
        );
    }

    #[test]
    fn f_tail_matches_reference() {
        // scipy.stats.f.sf(13.5, 1, 4) = 0.02131164112875672
        assert_relative_eq!(f_sf(13.5, 1.0, 4.0), 0.02131164112875672, epsilon = 1e-12);
        // scipy.stats.f.ppf(0.95, 3, 2662) = 2.6082461837369046
        assert_relative_eq!(
            f_quantile(0.95, 3.0, 2662.0).unwrap(),
            2.6082461837369046,
            epsilon = 1e-9
        );
    }

    #[test]
    fn chi2_tail() {
        // scipy.stats.chi2.sf(7.679442508710801, 1) = 0.005585342028997635
        assert_relative_eq!(
            chi2_sf(7.679442508710801, 1.0),
            0.005585342028997635,
            epsilon = 1e-12
        );
        assert_relative_eq!(chi2_sf(0.0, 2.0), 1.0);
    }

    #[test]
    fn noncentral_f_matches_reference() {
        // scipy.stats.ncf.cdf(2.608981, 3, 2662, 10.903) = 0.2007420865253285
        assert_relative_eq!(
            noncentral_f_cdf(2.608981, 3.0, 2662.0, 10.903),
            0.2007420865253285,
            epsilon = 1e-9
        );
        // lambda at power 0.8 for (3, 2662): 10.91857910035448
        assert_relative_eq!(
            noncentral_f_lambda_for_power(3.0, 2662.0, 0.05, 0.8).unwrap(),
            10.91857910035448,
            epsilon = 1e-6
        );
    }

    #[test]
    fn sigmoid_identities() {
        assert_relative_eq!(sigmoid(0.0), 0.5);
        for x in [-40.0, -3.0, 0.2, 7.0, 40.0] {
            assert_relative_eq!(log_sigmoid(x), sigmoid(x).ln(), epsilon = 1e-12);
            assert_relative_eq!(sigmoid(x) + sigmoid(-x), 1.0, epsilon = 1e-12);
        }
    }
}
