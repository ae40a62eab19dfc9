//! Synthetic scenario generators. The comonotone generator drives all assets
//! with one common factor so every pair of deviations agrees in sign scenario
//! by scenario, which makes the portfolio MAD additive and the risk parity
//! weights available in closed form for oracle checks.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

use super::ScenarioMatrix;

/// A generated matrix plus a degeneracy flag (true when the driving factor is
/// constant, so every asset has zero MAD).
#[derive(Debug)]
pub struct SynthOutcome {
    pub scenarios: ScenarioMatrix,
    pub degenerate: bool,
}

/// Builds r_ti = scales[i] * z[t] + offsets[i] from an explicit common factor.
///
/// Deviations of asset i are scales[i] * (z_t - mean(z)), so all pairwise
/// deviation products are nonnegative in every scenario regardless of z.
pub fn comonotone_from_factor(
    z: &[f64],
    scales: &[f64],
    offsets: &[f64],
) -> Result<SynthOutcome> {
    let n = scales.len();
    let t = z.len();
    if n < 2 {
        return Err(Error::InvalidInput(format!(
            "comonotone construction is pairwise, need n >= 2, got {n}"
        )));
    }
    if offsets.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} offsets for {n} scales",
            offsets.len()
        )));
    }
    if t < 2 {
        return Err(Error::InvalidInput(format!("need T >= 2, got {t}")));
    }
    for (i, &s) in scales.iter().enumerate() {
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::InvalidInput(format!("scale {s} at index {i} not positive")));
        }
    }
    let mut returns = Array2::zeros((t, n));
    for (tt, &zt) in z.iter().enumerate() {
        for i in 0..n {
            returns[[tt, i]] = scales[i] * zt + offsets[i];
        }
    }
    let lo = z.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(SynthOutcome {
        scenarios: ScenarioMatrix::from_returns(returns)?,
        degenerate: lo == hi,
    })
}

/// Generates a non-degenerate comonotone market: a seeded common factor of
/// small signed powers of two arranged to sum to zero, zero offsets.
///
/// The factor values are exact in f64 and each column sums to exactly zero
/// for integer scales, so sign agreement of deviations holds without any
/// rounding slack.
pub fn synth_comonotone(n: usize, t: usize, scales: &[f64], seed: u64) -> Result<ScenarioMatrix> {
    if scales.len() != n {
        return Err(Error::InvalidInput(format!(
            "{} scales for n = {n}",
            scales.len()
        )));
    }
    if t < 2 {
        return Err(Error::InvalidInput(format!("need T >= 2, got {t}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let magnitudes = [1.0, 2.0, 4.0, 8.0];
    let mut z: Vec<f64> = Vec::with_capacity(t);
    let pairs = if t % 2 == 0 { t / 2 } else { (t - 3) / 2 };
    for _ in 0..pairs {
        let v = magnitudes[rng.gen_range(0..magnitudes.len())];
        z.push(v);
        z.push(-v);
    }
    if t % 2 == 1 {
        // zero-sum triple keeps the factor mean exactly zero for odd T
        z.extend_from_slice(&[4.0, -2.0, -2.0]);
    }
    z.shuffle(&mut rng);
    let offsets = vec![0.0; n];
    let out = comonotone_from_factor(&z, scales, &offsets)?;
    debug_assert!(!out.degenerate);
    Ok(out.scenarios)
}

/// Generates a generic non-comonotone market from a seeded few-factor daily
/// return model. Used for randomized tests and synthetic backtests.
pub fn synth_random(n: usize, t: usize, seed: u64) -> Result<ScenarioMatrix> {
    if n < 1 {
        return Err(Error::InvalidInput("need at least 1 asset".into()));
    }
    if t < 2 {
        return Err(Error::InvalidInput(format!("need T >= 2, got {t}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = Normal::new(0.0, 1.0).expect("valid normal");
    let k = n.min(3);

    let mu: Vec<f64> = (0..n)
        .map(|_| 0.0003 + 0.0002 * unit.sample(&mut rng))
        .collect();
    let loadings: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..k).map(|_| 0.006 * unit.sample(&mut rng)).collect())
        .collect();
    let idio: Vec<f64> = (0..n)
        .map(|_| 0.002 + 0.004 * unit.sample(&mut rng).abs())
        .collect();

    let mut returns = Array2::zeros((t, n));
    for tt in 0..t {
        let f: Vec<f64> = (0..k).map(|_| unit.sample(&mut rng)).collect();
        for i in 0..n {
            let mut r = mu[i];
            for (j, &fj) in f.iter().enumerate() {
                r += loadings[i][j] * fj;
            }
            r += idio[i] * unit.sample(&mut rng);
            // keep prices integrable: a daily move past +-20% is clamped
            returns[[tt, i]] = r.clamp(-0.2, 0.2);
        }
    }
    ScenarioMatrix::from_returns(returns)
}
