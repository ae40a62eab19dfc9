//! Rolling-window out-of-sample evaluation: calibrate a strategy on a
//! trailing in-sample window, hold the weights for the next out-of-sample
//! window, advance by the rebalance step, compound wealth across the whole
//! horizon, and summarize the path with the usual performance metrics.

use serde::{Deserialize, Serialize};

use crate::scenarios::{returns_from_prices, PriceSeries};
use crate::solvers::{solve_with, Method, SolveOptions};
use crate::{Error, Result};

/// Rolling-window protocol parameters. `risk_free` is a daily rate compared
/// directly against daily returns; `annualization_factor` is the day count
/// used to scale daily means (multiplicatively) and standard deviations
/// (by its square root).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RollingConfig {
    pub in_sample_days: usize,
    pub out_sample_days: usize,
    pub rebalance_days: usize,
    pub annualization_factor: usize,
    pub risk_free: f64,
}

impl Default for RollingConfig {
    fn default() -> Self {
        Self {
            in_sample_days: 250,
            out_sample_days: 20,
            rebalance_days: 20,
            annualization_factor: 250,
            risk_free: 0.0,
        }
    }
}

impl RollingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_sample_days < 1
            || self.out_sample_days < 1
            || self.rebalance_days < 1
            || self.annualization_factor < 1
        {
            return Err(Error::Config(
                "window, rebalance, and annualization counts must all be at least 1".into(),
            ));
        }
        if !self.risk_free.is_finite() {
            return Err(Error::Config("risk_free must be finite".into()));
        }
        Ok(())
    }
}

/// The nine summary statistics of one out-of-sample run. `sharpe`, `sortino`,
/// and the Rachev ratios are None when their defining denominator is not
/// positive (zero dispersion, no below-target returns, or an empty loss
/// tail); numeric values are always stored when defined, even when negative,
/// and the table renderer decides how to display them.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MetricSet {
    pub mean_annual: f64,
    pub std_annual: f64,
    pub sharpe: Option<f64>,
    pub sortino: Option<f64>,
    pub mdd: f64,
    pub ulcer: f64,
    pub turnover: f64,
    pub rachev_5: Option<f64>,
    pub rachev_10: Option<f64>,
}

/// One strategy's complete out-of-sample record.
#[derive(Clone, Debug, Serialize)]
pub struct BacktestResult {
    pub config: RollingConfig,
    pub strategy: Method,
    pub metrics: MetricSet,
    /// Wealth path, starting at 1 before the first out-of-sample day.
    pub wealth: Vec<f64>,
    /// Weights held over each holding window, one vector per calibration.
    pub rebalance_weights: Vec<Vec<f64>>,
    /// Concatenated out-of-sample daily portfolio returns (derivable from
    /// consecutive wealth ratios, so not part of the JSON form).
    #[serde(skip)]
    pub oos_returns: Vec<f64>,
}

/// Largest peak-to-trough relative decline of a wealth path, ≤ 0. The first
/// element counts as an observed peak, so a path that never exceeds its
/// starting wealth still reports its dip.
pub fn max_drawdown(wealth: &[f64]) -> f64 {
    let mut peak = f64::MIN;
    let mut worst = 0.0_f64;
    for &w in wealth {
        peak = peak.max(w);
        worst = worst.min((w - peak) / peak);
    }
    worst
}

/// Root-mean-square of the per-day drawdowns, ≥ 0. The first element only
/// seeds the running peak; the average runs over the remaining T points.
pub fn ulcer_index(wealth: &[f64]) -> f64 {
    if wealth.len() < 2 {
        return 0.0;
    }
    let mut peak = wealth[0];
    let mut acc = 0.0;
    for &w in &wealth[1..] {
        peak = peak.max(w);
        let dd = (w - peak) / peak;
        acc += dd * dd;
    }
    (acc / (wealth.len() - 1) as f64).sqrt()
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation (the same 1/T convention as the risk side).
fn std_dev(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let var = xs.iter().map(|&x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64;
    var.sqrt()
}

/// Annualized excess mean over annualized dispersion. None when the daily
/// standard deviation is numerically zero.
pub fn sharpe(oos_returns: &[f64], cfg: &RollingConfig) -> Option<f64> {
    if oos_returns.is_empty() {
        return None;
    }
    let m = mean(oos_returns);
    let s = std_dev(oos_returns);
    if s <= 1e-12 * (1.0 + m.abs()) {
        return None;
    }
    let f = cfg.annualization_factor as f64;
    Some((m - cfg.risk_free) * f / (s * f.sqrt()))
}

/// Annualized excess mean over the target downside deviation
/// sqrt(E[((R − r_f)⁻)²]). None when no return falls below the target.
pub fn sortino(oos_returns: &[f64], cfg: &RollingConfig) -> Option<f64> {
    if oos_returns.is_empty() {
        return None;
    }
    let m = mean(oos_returns);
    let downside = oos_returns
        .iter()
        .map(|&r| {
            let d = (r - cfg.risk_free).min(0.0);
            d * d
        })
        .sum::<f64>()
        / oos_returns.len() as f64;
    let tdd = downside.sqrt();
    if tdd <= 1e-12 * (1.0 + m.abs()) {
        return None;
    }
    let f = cfg.annualization_factor as f64;
    Some((m - cfg.risk_free) * f / (tdd * f.sqrt()))
}

/// Average L1 distance between consecutive holding weights,
/// (1/Q)·Σ_q Σ_k |x_{q,k} − x_{q−1,k}| over the Q rebalances.
pub fn turnover(rebalance_weights: &[Vec<f64>]) -> Result<f64> {
    if rebalance_weights.len() < 2 {
        return Err(Error::InvalidInput(
            "turnover needs at least two weight vectors".into(),
        ));
    }
    let q = rebalance_weights.len() - 1;
    let mut acc = 0.0;
    for w in rebalance_weights.windows(2) {
        if w[0].len() != w[1].len() {
            return Err(Error::InvalidInput(
                "weight vectors disagree on asset count".into(),
            ));
        }
        acc += w[0]
            .iter()
            .zip(w[1].iter())
            .map(|(&a, &b)| (b - a).abs())
            .sum::<f64>();
    }
    Ok(acc / q as f64)
}

/// Ratio of the empirical upper tail mean of (R − r_f) to the empirical
/// upper tail mean of (r_f − R), both over the ⌈αT⌉ largest samples with the
/// boundary sample fully included. None when either tail mean fails to be
/// positive, where the ratio stops measuring upside against downside.
pub fn rachev(oos_returns: &[f64], alpha: f64, cfg: &RollingConfig) -> Option<f64> {
    if oos_returns.is_empty() || !(alpha > 0.0) || alpha > 1.0 {
        return None;
    }
    let t = oos_returns.len();
    let k = ((alpha * t as f64).ceil() as usize).clamp(1, t);
    let mut gains: Vec<f64> = oos_returns.iter().map(|&r| r - cfg.risk_free).collect();
    let mut losses: Vec<f64> = oos_returns.iter().map(|&r| cfg.risk_free - r).collect();
    gains.sort_by(|a, b| b.partial_cmp(a).unwrap());
    losses.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let up = gains[..k].iter().sum::<f64>() / k as f64;
    let down = losses[..k].iter().sum::<f64>() / k as f64;
    if down <= 0.0 || up <= 0.0 {
        return None;
    }
    Some(up / down)
}

/// Assembles the full metric set from a run's pieces.
pub fn metric_set(
    oos_returns: &[f64],
    wealth: &[f64],
    rebalance_weights: &[Vec<f64>],
    cfg: &RollingConfig,
) -> MetricSet {
    let f = cfg.annualization_factor as f64;
    let to = if rebalance_weights.len() < 2 {
        0.0
    } else {
        turnover(rebalance_weights).expect("validated shape")
    };
    MetricSet {
        mean_annual: mean(oos_returns) * f,
        std_annual: std_dev(oos_returns) * f.sqrt(),
        sharpe: sharpe(oos_returns, cfg),
        sortino: sortino(oos_returns, cfg),
        mdd: max_drawdown(wealth),
        ulcer: ulcer_index(wealth),
        turnover: to,
        rachev_5: rachev(oos_returns, 0.05, cfg),
        rachev_10: rachev(oos_returns, 0.10, cfg),
    }
}

/// Runs the rolling protocol for one strategy over a price history.
///
/// Window q calibrates on return days [q·reb, q·reb + ins) and holds the
/// solved weights over [ins + q·reb, ins + q·reb + out), truncated at the end
/// of the data; holding returns are the fixed-weight sums x·r_t with no
/// intra-period drift adjustment. A solver failure aborts the run naming the
/// window rather than carrying stale weights forward.
pub fn run_backtest(
    prices: &PriceSeries,
    method: Method,
    opts: &SolveOptions,
    cfg: &RollingConfig,
) -> Result<BacktestResult> {
    cfg.validate()?;
    let scn = returns_from_prices(prices)?;
    let n_days = scn.n_scenarios();
    let needed = cfg.in_sample_days + cfg.out_sample_days;
    if n_days < needed {
        return Err(Error::InvalidInput(format!(
            "history has {} return days; the protocol needs at least {} \
             (in_sample {} + out_sample {}, i.e. {} price rows)",
            n_days,
            needed,
            cfg.in_sample_days,
            cfg.out_sample_days,
            needed + 1
        )));
    }
    let n = scn.n_assets();
    let returns = scn.returns();
    let mut oos_returns = Vec::new();
    let mut rebalance_weights = Vec::new();
    let mut q = 0usize;
    loop {
        let start_oos = cfg.in_sample_days + q * cfg.rebalance_days;
        if start_oos >= n_days {
            break;
        }
        let window = scn.slice_days(q * cfg.rebalance_days, start_oos)?;
        let rep = solve_with(method, &window, opts).map_err(|e| {
            Error::Solver(format!(
                "{method} failed at rebalance window {q} (in-sample days {}..{}): {e}",
                q * cfg.rebalance_days,
                start_oos
            ))
        })?;
        let x = rep.weights.values().to_vec();
        let end_oos = (start_oos + cfg.out_sample_days).min(n_days);
        for t in start_oos..end_oos {
            let r: f64 = (0..n).map(|i| x[i] * returns[[t, i]]).sum();
            oos_returns.push(r);
        }
        rebalance_weights.push(x);
        q += 1;
    }
    let mut wealth = Vec::with_capacity(oos_returns.len() + 1);
    wealth.push(1.0);
    for &r in &oos_returns {
        let w = wealth.last().unwrap() * (1.0 + r);
        wealth.push(w);
    }
    let metrics = metric_set(&oos_returns, &wealth, &rebalance_weights, cfg);
    Ok(BacktestResult {
        config: cfg.clone(),
        strategy: method,
        metrics,
        wealth,
        rebalance_weights,
        oos_returns,
    })
}

fn csv_cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV metric table, one row per strategy. Undefined ratios are empty cells;
/// defined values are stored verbatim (negative Sharpe included).
pub fn metrics_to_csv(rows: &[(String, MetricSet)]) -> String {
    use std::fmt::Write as _;
    let mut out = String::from(
        "strategy,mean_annual,std_annual,sharpe,sortino,mdd,ulcer,turnover,rachev_5,rachev_10\n",
    );
    for (name, m) in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            name,
            m.mean_annual,
            m.std_annual,
            csv_cell(m.sharpe),
            csv_cell(m.sortino),
            m.mdd,
            m.ulcer,
            m.turnover,
            csv_cell(m.rachev_5),
            csv_cell(m.rachev_10)
        );
    }
    out
}

/// Aligned text table in the usual report layout. Sharpe and Sortino print
/// "--" when undefined or when the mean return sits below the target rate
/// (the conventional suppression for minimum-risk strategies); Rachev
/// columns print "--" when undefined.
pub fn metrics_to_text(rows: &[(String, MetricSet)], cfg: &RollingConfig) -> String {
    use std::fmt::Write as _;
    let headers = [
        "strategy", "mean", "std", "sharpe", "sortino", "mdd", "ulcer", "turnover", "rachev5",
        "rachev10",
    ];
    let num = |v: f64| format!("{v:.4}");
    let ratio = |v: Option<f64>, m: &MetricSet| -> String {
        let annual_rf = cfg.risk_free * cfg.annualization_factor as f64;
        match v {
            Some(x) if m.mean_annual >= annual_rf => format!("{x:.4}"),
            _ => "--".into(),
        }
    };
    let opt = |v: Option<f64>| v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "--".into());
    let mut table: Vec<Vec<String>> = vec![headers.iter().map(|s| s.to_string()).collect()];
    for (name, m) in rows {
        table.push(vec![
            name.clone(),
            num(m.mean_annual),
            num(m.std_annual),
            ratio(m.sharpe, m),
            ratio(m.sortino, m),
            num(m.mdd),
            num(m.ulcer),
            num(m.turnover),
            opt(m.rachev_5),
            opt(m.rachev_10),
        ]);
    }
    let mut widths = vec![0usize; headers.len()];
    for row in &table {
        for (w, c) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    for row in &table {
        let mut line = String::new();
        for (c, w) in row.iter().zip(widths.iter()) {
            let _ = write!(line, "{c:<w$}  ");
        }
        let _ = writeln!(out, "{}", line.trim_end());
    }
    out
}

/// Wealth paths of several runs as one CSV for plotting: day index column
/// followed by one column per strategy. All runs must share a horizon.
pub fn wealth_to_csv(results: &[&BacktestResult]) -> Result<String> {
    use std::fmt::Write as _;
    if results.is_empty() {
        return Err(Error::InvalidInput("no backtest results".into()));
    }
    let len = results[0].wealth.len();
    if results.iter().any(|r| r.wealth.len() != len) {
        return Err(Error::InvalidInput(
            "wealth paths disagree on horizon length".into(),
        ));
    }
    let mut out = String::from("day");
    for r in results {
        let _ = write!(out, ",{}", r.strategy);
    }
    out.push('\n');
    for t in 0..len {
        let _ = write!(out, "{t}");
        for r in results {
            let _ = write!(out, ",{}", r.wealth[t]);
        }
        out.push('\n');
    }
    Ok(out)
}
