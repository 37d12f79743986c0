//! Seeded response-data simulation. Used by the verification suites and
//! available for power studies; every draw is fully determined by the
//! caller's RNG state.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::dataset::{ResponseMatrix, StudentRecord};
use crate::stats::special::sigmoid;

/// Uniform item parameters: a in `a_range`, b in `b_range`.
pub fn sample_params(
    k: usize,
    a_range: (f64, f64),
    b_range: (f64, f64),
    rng: &mut ChaCha8Rng,
) -> (Vec<f64>, Vec<f64>) {
    let a = (0..k)
        .map(|_| a_range.0 + rng.random::<f64>() * (a_range.1 - a_range.0))
        .collect();
    let b = (0..k)
        .map(|_| b_range.0 + rng.random::<f64>() * (b_range.1 - b_range.0))
        .collect();
    (a, b)
}

/// Normal abilities via Box-Muller (keeps the dependency surface small and
/// the stream reproducible).
pub fn draw_thetas(n: usize, mean: f64, sd: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let u1: f64 = rng.random::<f64>().max(1e-12);
            let u2: f64 = rng.random::<f64>();
            let z = (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos();
            mean + sd * z
        })
        .collect()
}

/// Bernoulli draws from the two-parameter logistic response function for
/// each (student, item) pair. Grade is set to 1 and gender to "all".
pub fn simulate_2pl(a: &[f64], b: &[f64], thetas: &[f64], rng: &mut ChaCha8Rng) -> ResponseMatrix {
    simulate_2pl_grouped(a, b, &[("all".to_string(), thetas.to_vec())], rng)
}

/// Multi-group variant: each group label becomes the gender column, and
/// groups are numbered through the grade column.
pub fn simulate_2pl_grouped(
    a: &[f64],
    b: &[f64],
    groups: &[(String, Vec<f64>)],
    rng: &mut ChaCha8Rng,
) -> ResponseMatrix {
    simulate_2pl_with_dif(a, b, groups, &[], rng)
}

/// DIF-injection variant: `focal_b_shift` lists (item index, delta_b)
/// applied to every group after the first (the focal groups).
pub fn simulate_2pl_with_dif(
    a: &[f64],
    b: &[f64],
    groups: &[(String, Vec<f64>)],
    focal_b_shift: &[(usize, f64)],
    rng: &mut ChaCha8Rng,
) -> ResponseMatrix {
    let k = a.len();
    debug_assert_eq!(b.len(), k);
    let items: Vec<String> = (1..=k).map(|i| format!("Q{i}")).collect();
    let mut rows = Vec::new();
    let mut counter = 0usize;
    for (gi, (label, thetas)) in groups.iter().enumerate() {
        let mut b_group = b.to_vec();
        if gi > 0 {
            for &(idx, delta) in focal_b_shift {
                b_group[idx] += delta;
            }
        }
        for &theta in thetas {
            let responses: Vec<u8> = (0..k)
                .map(|i| {
                    let p = sigmoid(a[i] * (theta - b_group[i]));
                    u8::from(rng.random::<f64>() < p)
                })
                .collect();
            counter += 1;
            rows.push(StudentRecord {
                student_id: format!("s{counter}"),
                grade: gi as i32 + 1,
                gender: label.clone(),
                responses,
            });
        }
    }
    ResponseMatrix::new(items, rows).expect("simulated matrix is valid by construction")
}
