//! Euclidean projection onto the unit simplex.

/// Projects v onto {x : sum x_i = 1, x >= 0} by the sort-and-threshold rule:
/// find the largest k with v_(k) - (sum of top k - 1)/k > 0, subtract the
/// resulting threshold, clamp at zero.
///
/// Entries are exactly nonnegative after the clamp; the sum equals 1 up to
/// accumulated rounding (within ~n machine epsilons).
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![1.0];
    }
    let mut sorted: Vec<f64> = v.to_vec();
    sorted.sort_by(|a, b| b.partial_cmp(a).expect("finite entries"));
    let mut cum = 0.0;
    let mut theta = sorted[0] - 1.0;
    for (k, &u) in sorted.iter().enumerate() {
        cum += u;
        let cand = (cum - 1.0) / (k + 1) as f64;
        if u - cand > 0.0 {
            theta = cand;
        } else {
            break;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}
