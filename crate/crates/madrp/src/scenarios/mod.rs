//! Discrete return scenarios: price series, equally likely return matrices,
//! CSV ingestion, and synthetic instance generators.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::{Error, Result};

mod csv_io;
mod synth;

pub use csv_io::{load_csv, write_csv, CsvLayout};
pub use synth::{comonotone_from_factor, synth_comonotone, synth_random, SynthOutcome};

/// Daily prices for n assets over T+1 days, all strictly positive.
#[derive(Clone, Debug)]
pub struct PriceSeries {
    asset_ids: Vec<String>,
    prices: Array2<f64>,
    dates: Option<Vec<String>>,
}

impl PriceSeries {
    /// Validates positivity and shape: at least 2 rows, one column per asset id,
    /// and dates (when present) matching the row count.
    pub fn new(
        asset_ids: Vec<String>,
        prices: Array2<f64>,
        dates: Option<Vec<String>>,
    ) -> Result<Self> {
        let (rows, cols) = prices.dim();
        if rows < 2 {
            return Err(Error::InvalidInput(format!(
                "price series needs at least 2 rows, got {rows}"
            )));
        }
        if cols != asset_ids.len() {
            return Err(Error::InvalidInput(format!(
                "{} asset ids but {} price columns",
                asset_ids.len(),
                cols
            )));
        }
        if cols == 0 {
            return Err(Error::InvalidInput("no assets".into()));
        }
        for ((r, c), &p) in prices.indexed_iter() {
            if !(p > 0.0) || !p.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-positive price {p} at row {r}, column {c} ({})",
                    asset_ids[c]
                )));
            }
        }
        if let Some(d) = &dates {
            if d.len() != rows {
                return Err(Error::InvalidInput(format!(
                    "{} dates for {} price rows",
                    d.len(),
                    rows
                )));
            }
        }
        Ok(Self {
            asset_ids,
            prices,
            dates,
        })
    }

    pub fn n_assets(&self) -> usize {
        self.prices.ncols()
    }

    pub fn n_days(&self) -> usize {
        self.prices.nrows()
    }

    pub fn asset_ids(&self) -> &[String] {
        &self.asset_ids
    }

    pub fn prices(&self) -> &Array2<f64> {
        &self.prices
    }

    pub fn dates(&self) -> Option<&[String]> {
        self.dates.as_deref()
    }
}

/// T x n matrix of linear returns, each row an equally likely scenario.
///
/// Column means and deviations (returns minus means) are computed once at
/// construction with plain sequential sums and reused everywhere, so every
/// consumer sees the same values.
#[derive(Clone, Debug)]
pub struct ScenarioMatrix {
    returns: Array2<f64>,
    means: Array1<f64>,
    deviations: Array2<f64>,
}

impl ScenarioMatrix {
    /// Builds a scenario matrix, computing column means from the returns.
    pub fn from_returns(returns: Array2<f64>) -> Result<Self> {
        let (t, n) = returns.dim();
        if t < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 scenarios, got {t}"
            )));
        }
        if n < 1 {
            return Err(Error::InvalidInput("need at least 1 asset".into()));
        }
        for ((r, c), &v) in returns.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "non-finite return {v} at scenario {r}, asset {c}"
                )));
            }
        }
        let mut means = Array1::zeros(n);
        for i in 0..n {
            let mut s = 0.0;
            for tt in 0..t {
                s += returns[[tt, i]];
            }
            means[i] = s / t as f64;
        }
        let mut deviations = returns.clone();
        for i in 0..n {
            for tt in 0..t {
                deviations[[tt, i]] -= means[i];
            }
        }
        Ok(Self {
            returns,
            means,
            deviations,
        })
    }

    /// Builds from returns plus externally stored means, verifying the means
    /// are recomputable from the returns to 1e-12.
    pub fn with_means(returns: Array2<f64>, means: Array1<f64>) -> Result<Self> {
        if means.len() != returns.ncols() {
            return Err(Error::InvalidInput(format!(
                "{} means for {} assets",
                means.len(),
                returns.ncols()
            )));
        }
        let built = Self::from_returns(returns)?;
        for i in 0..built.n_assets() {
            let scale = 1.0_f64.max(means[i].abs());
            if (built.means[i] - means[i]).abs() > 1e-12 * scale {
                return Err(Error::InvalidInput(format!(
                    "stored mean {} for asset {i} differs from recomputed {}",
                    means[i], built.means[i]
                )));
            }
        }
        Ok(built)
    }

    pub fn n_assets(&self) -> usize {
        self.returns.ncols()
    }

    pub fn n_scenarios(&self) -> usize {
        self.returns.nrows()
    }

    pub fn returns(&self) -> &Array2<f64> {
        &self.returns
    }

    pub fn means(&self) -> &Array1<f64> {
        &self.means
    }

    /// Deviations from the mean, d_ti = r_ti - mu_i.
    pub fn deviations(&self) -> &Array2<f64> {
        &self.deviations
    }

    /// Per-asset MAD: (1/T) sum_t |d_ti|.
    pub fn asset_mads(&self) -> Array1<f64> {
        let (t, n) = self.returns.dim();
        let mut out = Array1::zeros(n);
        for i in 0..n {
            let mut s = 0.0;
            for tt in 0..t {
                s += self.deviations[[tt, i]].abs();
            }
            out[i] = s / t as f64;
        }
        out
    }

    /// Restricts to the first `days` scenarios, recomputing means.
    pub fn take_first_days(&self, days: usize) -> Result<Self> {
        if days > self.n_scenarios() {
            return Err(Error::InvalidInput(format!(
                "asked for first {days} days of a {}-day matrix",
                self.n_scenarios()
            )));
        }
        let sub = self
            .returns
            .slice(ndarray::s![..days, ..])
            .to_owned();
        Self::from_returns(sub)
    }

    /// Restricts to a half-open row range, recomputing means.
    pub fn slice_days(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n_scenarios() {
            return Err(Error::InvalidInput(format!(
                "day range {start}..{end} out of bounds for {} scenarios",
                self.n_scenarios()
            )));
        }
        let sub = self
            .returns
            .slice(ndarray::s![start..end, ..])
            .to_owned();
        Self::from_returns(sub)
    }
}

/// Human-readable summary of a dataset.
#[derive(Clone, Debug, Serialize)]
pub struct DatasetDescriptor {
    pub name: String,
    pub n_assets: usize,
    pub n_days: usize,
    pub period: String,
}

impl DatasetDescriptor {
    /// Checks the descriptor counts against an actual scenario matrix.
    pub fn matches(&self, scn: &ScenarioMatrix) -> bool {
        self.n_assets == scn.n_assets() && self.n_days == scn.n_scenarios()
    }
}

/// Converts a price series to linear returns, r_t = (p_t - p_{t-1}) / p_{t-1}.
pub fn returns_from_prices(prices: &PriceSeries) -> Result<ScenarioMatrix> {
    let p = prices.prices();
    let (rows, n) = p.dim();
    let t = rows - 1;
    if t < 2 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 price rows for 2 return scenarios, got {rows}"
        )));
    }
    let mut returns = Array2::zeros((t, n));
    for tt in 0..t {
        for i in 0..n {
            returns[[tt, i]] = (p[[tt + 1, i]] - p[[tt, i]]) / p[[tt, i]];
        }
    }
    ScenarioMatrix::from_returns(returns)
}

/// Integrates returns back into a price series starting at `p0` per asset.
/// Inverse of [`returns_from_prices`] up to floating-point rounding.
pub fn prices_from_returns(
    scn: &ScenarioMatrix,
    asset_ids: Vec<String>,
    p0: f64,
) -> Result<PriceSeries> {
    if !(p0 > 0.0) {
        return Err(Error::InvalidInput(format!("starting price {p0} not positive")));
    }
    let (t, n) = scn.returns().dim();
    let mut prices = Array2::zeros((t + 1, n));
    for i in 0..n {
        prices[[0, i]] = p0;
        for tt in 0..t {
            prices[[tt + 1, i]] = prices[[tt, i]] * (1.0 + scn.returns()[[tt, i]]);
        }
    }
    PriceSeries::new(asset_ids, prices, None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn series(cols: Vec<Vec<f64>>) -> PriceSeries {
        let rows = cols[0].len();
        let n = cols.len();
        let mut m = Array2::zeros((rows, n));
        for (i, col) in cols.iter().enumerate() {
            for (t, &v) in col.iter().enumerate() {
                m[[t, i]] = v;
            }
        }
        let ids = (0..n).map(|i| format!("A{i}")).collect();
        PriceSeries::new(ids, m, None).unwrap()
    }

    #[test]
    fn returns_basic_column() {
        // 100 -> 110 -> 99 gives +10% then -10%, mean 0.
        let s = series(vec![vec![100.0, 110.0, 99.0], vec![50.0, 50.0, 50.0]]);
        let scn = returns_from_prices(&s).unwrap();
        assert_eq!(scn.n_scenarios(), 2);
        assert_eq!(scn.n_assets(), 2);
        assert!((scn.returns()[[0, 0]] - 0.10).abs() < 1e-15);
        assert!((scn.returns()[[1, 0]] + 0.10).abs() < 1e-15);
        assert!(scn.means()[0].abs() < 1e-16);
    }

    #[test]
    fn returns_constant_prices_are_zero() {
        let s = series(vec![vec![50.0, 50.0, 50.0], vec![7.0, 7.0, 7.0]]);
        let scn = returns_from_prices(&s).unwrap();
        assert_eq!(scn.returns(), &array![[0.0, 0.0], [0.0, 0.0]]);
        assert_eq!(scn.means(), &array![0.0, 0.0]);
    }

    #[test]
    fn nonpositive_price_rejected_with_cell() {
        let m = array![[100.0, 1.0], [100.0, 1.0], [0.0, 1.0]];
        let err = PriceSeries::new(vec!["a".into(), "b".into()], m, None).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("row 2"), "{msg}");
        assert!(msg.contains("column 0"), "{msg}");
    }

    #[test]
    fn means_are_recomputable() {
        let scn = ScenarioMatrix::from_returns(array![
            [0.01, -0.02],
            [0.03, 0.00],
            [-0.01, 0.05]
        ])
        .unwrap();
        for i in 0..2 {
            let mean: f64 = scn.returns().column(i).iter().sum::<f64>() / 3.0;
            assert!((scn.means()[i] - mean).abs() <= 1e-12);
        }
        // with_means accepts the recomputed values and rejects a corrupted one.
        ScenarioMatrix::with_means(scn.returns().clone(), scn.means().clone()).unwrap();
        let mut bad = scn.means().clone();
        bad[0] += 1e-6;
        assert!(ScenarioMatrix::with_means(scn.returns().clone(), bad).is_err());
    }

    #[test]
    fn deviations_match_returns_minus_means() {
        let scn = ScenarioMatrix::from_returns(array![
            [0.01, -0.02],
            [0.03, 0.00],
            [-0.01, 0.05]
        ])
        .unwrap();
        for t in 0..3 {
            for i in 0..2 {
                let expect = scn.returns()[[t, i]] - scn.means()[i];
                assert_eq!(scn.deviations()[[t, i]], expect);
            }
        }
    }

    #[test]
    fn take_first_days_recomputes_means() {
        let scn = ScenarioMatrix::from_returns(array![
            [0.01, -0.02],
            [0.03, 0.00],
            [-0.01, 0.05],
            [0.07, -0.01]
        ])
        .unwrap();
        let head = scn.take_first_days(2).unwrap();
        assert_eq!(head.n_scenarios(), 2);
        assert!((head.means()[0] - 0.02).abs() < 1e-15);
    }

    #[test]
    fn price_round_trip_through_returns() {
        let s = series(vec![vec![100.0, 103.0, 101.5, 99.25], vec![20.0, 19.0, 19.5, 21.0]]);
        let scn = returns_from_prices(&s).unwrap();
        let back = prices_from_returns(&scn, s.asset_ids().to_vec(), 100.0).unwrap();
        let rt = returns_from_prices(&back).unwrap();
        for t in 0..scn.n_scenarios() {
            for i in 0..scn.n_assets() {
                assert!((rt.returns()[[t, i]] - scn.returns()[[t, i]]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn descriptor_matches_counts() {
        let scn = ScenarioMatrix::from_returns(array![[0.01, 0.0], [0.0, 0.02]]).unwrap();
        let d = DatasetDescriptor {
            name: "toy".into(),
            n_assets: 2,
            n_days: 2,
            period: "synthetic".into(),
        };
        assert!(d.matches(&scn));
        let d2 = DatasetDescriptor { n_assets: 3, ..d };
        assert!(!d2.matches(&scn));
    }
}
