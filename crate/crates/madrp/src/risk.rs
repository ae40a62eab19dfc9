//! The mean absolute deviation of a portfolio over discrete scenarios, its
//! subgradient, per-asset risk contributions, additivity detection, and the
//! closed-form risk parity weights available when the market is additive.
//!
//! Conventions: scenarios are equally likely (population 1/T everywhere), and
//! sums over scenarios run in index order so results are reproducible.

use ndarray::Array1;
use serde::Serialize;

use crate::{Error, Result, ScenarioMatrix};

/// Relative tie tolerance: scenario t counts as a tie when
/// |(r_t - mu)' x| <= TIE_REL * max_t |(r_t - mu)' x|.
pub const TIE_REL: f64 = 1e-12;

/// Subgradient entry assigned to tie scenarios, where any value in [-1, +1]
/// is admissible. `Zero` is the symmetric default.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TieRule {
    #[default]
    Zero,
    Plus,
    Minus,
}

impl TieRule {
    fn value(self) -> f64 {
        match self {
            TieRule::Zero => 0.0,
            TieRule::Plus => 1.0,
            TieRule::Minus => -1.0,
        }
    }
}

/// Portfolio weight vector. Either normalized (on the unit simplex) or a
/// strictly positive pre-normalization vector, as produced by the log-form
/// solvers before scaling.
#[derive(Clone, Debug, Serialize)]
pub struct PortfolioWeights {
    values: Vec<f64>,
    normalized: bool,
}

impl PortfolioWeights {
    /// A simplex point: entries nonnegative, summing to 1 within 1e-10.
    pub fn simplex(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        let mut sum = 0.0;
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight {v} at index {i} must be finite and nonnegative"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > 1e-10 {
            return Err(Error::InvalidInput(format!(
                "weights sum to {sum}, not 1"
            )));
        }
        Ok(Self {
            values,
            normalized: true,
        })
    }

    /// A strictly positive interior vector; not yet scaled to the simplex.
    pub fn positive(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InvalidInput("empty weight vector".into()));
        }
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "weight {v} at index {i} must be finite and positive"
                )));
            }
        }
        Ok(Self {
            values,
            normalized: false,
        })
    }

    /// Equal weights 1/n.
    pub fn ew(n: usize) -> Self {
        Self {
            values: vec![1.0 / n as f64; n.max(1)],
            normalized: true,
        }
    }

    /// Scales the vector onto the simplex (divides by the sum).
    pub fn normalize(&self) -> Result<Self> {
        let sum: f64 = self.values.iter().sum();
        if !(sum > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cannot normalize: weights sum to {sum}"
            )));
        }
        let mut values: Vec<f64> = self.values.iter().map(|v| v / sum).collect();
        for v in values.iter_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        Ok(Self {
            values,
            normalized: true,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl std::ops::Deref for PortfolioWeights {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.values
    }
}

/// The scenario-sign selection behind a subgradient: s_t = sign of the
/// portfolio deviation off ties, anything in [-1, +1] on ties.
#[derive(Clone, Debug, Serialize)]
pub struct SubgradientSelection {
    pub s: Vec<f64>,
    pub tie_scenarios: Vec<usize>,
}

/// Per-asset risk contributions RC_i = x_i * g_i and their total.
#[derive(Clone, Debug, Serialize)]
pub struct RiskContributionVector {
    pub rc: Vec<f64>,
    pub total: f64,
}

fn check_dims(scn: &ScenarioMatrix, x: &[f64]) -> Result<()> {
    if x.len() != scn.n_assets() {
        return Err(Error::InvalidInput(format!(
            "weight vector has {} entries for {} assets",
            x.len(),
            scn.n_assets()
        )));
    }
    Ok(())
}

/// Portfolio deviations v_t = sum_i (r_ti - mu_i) x_i, one per scenario.
pub fn portfolio_deviations(scn: &ScenarioMatrix, x: &[f64]) -> Result<Array1<f64>> {
    check_dims(scn, x)?;
    let d = scn.deviations();
    let (t, n) = d.dim();
    let mut v = Array1::zeros(t);
    for tt in 0..t {
        let mut s = 0.0;
        for i in 0..n {
            s += d[[tt, i]] * x[i];
        }
        v[tt] = s;
    }
    Ok(v)
}

/// Portfolio returns R_t(x) = sum_i r_ti x_i.
pub fn portfolio_returns(scn: &ScenarioMatrix, x: &[f64]) -> Result<Array1<f64>> {
    check_dims(scn, x)?;
    let r = scn.returns();
    let (t, n) = r.dim();
    let mut v = Array1::zeros(t);
    for tt in 0..t {
        let mut s = 0.0;
        for i in 0..n {
            s += r[[tt, i]] * x[i];
        }
        v[tt] = s;
    }
    Ok(v)
}

/// Mean absolute deviation of the portfolio return:
/// MAD(x) = (1/T) sum_t |(r_t - mu)' x|.
pub fn mad(scn: &ScenarioMatrix, x: &[f64]) -> Result<f64> {
    let v = portfolio_deviations(scn, x)?;
    let mut s = 0.0;
    for &vt in v.iter() {
        s += vt.abs();
    }
    Ok(s / v.len() as f64)
}

/// Mean semi absolute deviation, (1/T) sum_t max((r_t - mu)' x, 0).
///
/// Deviations sum to zero, so the positive part contributes exactly half of
/// the absolute sum; computing it as an exact halving of [`mad`] keeps the
/// factor-two identity bit-exact in floating point.
pub fn msad(scn: &ScenarioMatrix, x: &[f64]) -> Result<f64> {
    Ok(0.5 * mad(scn, x)?)
}

/// Population standard deviation of the portfolio return (divide by T).
pub fn volatility(scn: &ScenarioMatrix, x: &[f64]) -> Result<f64> {
    let v = portfolio_deviations(scn, x)?;
    let mut s = 0.0;
    for &vt in v.iter() {
        s += vt * vt;
    }
    Ok((s / v.len() as f64).sqrt())
}

/// Coherent companion of MAD: rho(x) = -E[R(x)] + MAD(x).
pub fn rho_mad(scn: &ScenarioMatrix, x: &[f64]) -> Result<f64> {
    check_dims(scn, x)?;
    let mut mean = 0.0;
    for i in 0..x.len() {
        mean += scn.means()[i] * x[i];
    }
    Ok(-mean + mad(scn, x)?)
}

/// Subgradient of MAD at x: g = (1/T) sum_t s_t (r_t - mu), with s_t the
/// deviation sign off ties and `tie_rule`'s value on ties. When there are no
/// tie scenarios the result is the unique gradient.
pub fn mad_subgradient(
    scn: &ScenarioMatrix,
    x: &[f64],
    tie_rule: TieRule,
) -> Result<(Array1<f64>, SubgradientSelection)> {
    let v = portfolio_deviations(scn, x)?;
    let t = v.len();
    let n = scn.n_assets();
    let scale = v.iter().fold(0.0_f64, |m, &vt| m.max(vt.abs()));
    let tie_tol = TIE_REL * scale;

    let mut s = vec![0.0; t];
    let mut ties = Vec::new();
    for tt in 0..t {
        if v[tt].abs() <= tie_tol {
            s[tt] = tie_rule.value();
            ties.push(tt);
        } else {
            s[tt] = if v[tt] > 0.0 { 1.0 } else { -1.0 };
        }
    }

    let d = scn.deviations();
    let mut g = Array1::zeros(n);
    for i in 0..n {
        let mut acc = 0.0;
        for tt in 0..t {
            acc += s[tt] * d[[tt, i]];
        }
        g[i] = acc / t as f64;
    }
    Ok((
        g,
        SubgradientSelection {
            s,
            tie_scenarios: ties,
        },
    ))
}

/// Risk contributions RC_i = x_i g_i for the selected subgradient g. Their
/// total equals MAD(x) (Euler's relation; exact up to tie scenarios, whose
/// deviations are below the tie tolerance by definition).
pub fn risk_contributions(
    scn: &ScenarioMatrix,
    x: &[f64],
    tie_rule: TieRule,
) -> Result<RiskContributionVector> {
    let (g, _) = mad_subgradient(scn, x, tie_rule)?;
    let mut rc = vec![0.0; x.len()];
    let mut total = 0.0;
    for i in 0..x.len() {
        rc[i] = x[i] * g[i];
        total += rc[i];
    }
    Ok(RiskContributionVector { rc, total })
}

/// Result of the pairwise sign-agreement scan.
#[derive(Clone, Copy, Debug)]
pub struct AdditivityCheck {
    pub additive: bool,
    /// First violating (scenario, asset i, asset j) in scan order, if any.
    pub witness: Option<(usize, usize, usize)>,
}

/// Checks whether portfolio MAD is additive on the nonnegative orthant:
/// true iff (r_ti - mu_i)(r_tj - mu_j) >= -tol for every scenario t and every
/// pair i != j.
pub fn is_additive(scn: &ScenarioMatrix, tol: f64) -> AdditivityCheck {
    let d = scn.deviations();
    let (t, n) = d.dim();
    for tt in 0..t {
        for i in 0..n {
            for j in (i + 1)..n {
                if d[[tt, i]] * d[[tt, j]] < -tol {
                    return AdditivityCheck {
                        additive: false,
                        witness: Some((tt, i, j)),
                    };
                }
            }
        }
    }
    AdditivityCheck {
        additive: true,
        witness: None,
    }
}

/// Closed-form risk parity weights on an additive market:
/// x_i proportional to 1 / MAD(r_i). Refuses non-additive markets (the
/// formula is invalid there) and zero-MAD assets.
pub fn closed_form_rp(scn: &ScenarioMatrix) -> Result<PortfolioWeights> {
    let check = is_additive(scn, 1e-12);
    if !check.additive {
        let (t, i, j) = check.witness.unwrap();
        return Err(Error::InvalidInput(format!(
            "market is not additive: deviations of assets {i} and {j} disagree in sign at scenario {t}"
        )));
    }
    let mads = scn.asset_mads();
    for (i, &m) in mads.iter().enumerate() {
        if m <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "asset {i} has zero MAD, closed-form risk parity undefined"
            )));
        }
    }
    let inv: Vec<f64> = mads.iter().map(|&m| 1.0 / m).collect();
    let total: f64 = inv.iter().sum();
    PortfolioWeights::simplex(inv.iter().map(|&v| v / total).collect())
}
