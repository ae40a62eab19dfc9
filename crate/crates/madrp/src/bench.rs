//! Accuracy/efficiency comparison harness: runs a set of strategies on one
//! dataset window and tabulates the equal-contribution diagnostics, the
//! portfolio MAD, the 1/n reference level, and the solve wall time, in CSV
//! and aligned-text forms.

use std::fmt::Write as _;

use serde::Serialize;

use crate::risk::{mad, risk_contributions, TieRule};
use crate::solvers::{solve_with, Method, SolveOptions};
use crate::{Error, Result, ScenarioMatrix};

/// How the harness fills the `time_secs` column. `Wall` is a single-run
/// monotonic-clock measurement around the solve call; `Zero` writes 0.0 so
/// repeated runs of the harness are byte-identical.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum TimingMode {
    Wall,
    Zero,
}

/// Harness configuration.
#[derive(Clone, Debug)]
pub struct BenchConfig {
    /// Restrict the dataset to its first `first_days` scenarios (clamped to
    /// the dataset length). None uses the whole matrix.
    pub first_days: Option<usize>,
    /// Solver tuning passed to every method.
    pub options: SolveOptions,
    pub timings: TimingMode,
    /// Run methods concurrently. Timings are contended and therefore zeroed;
    /// use only for accuracy runs.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            first_days: None,
            options: SolveOptions::default(),
            timings: TimingMode::Wall,
            parallel: false,
        }
    }
}

/// One strategy's row of the comparison table. Numeric cells are None when
/// the solve failed (see `error`) or when the diagnostics are undefined
/// (zero-MAD portfolio). The solved weights are stored so every row can be
/// recomputed from the data rather than trusted blindly.
#[derive(Clone, Debug, Serialize)]
pub struct BenchRow {
    pub method: Method,
    pub weights: Option<Vec<f64>>,
    pub f_value: Option<f64>,
    pub mad_value: Option<f64>,
    pub mean_abs_dev: Option<f64>,
    pub max_abs_dev: Option<f64>,
    pub one_over_n: f64,
    pub time_secs: f64,
    pub error: Option<String>,
}

/// Equal-contribution diagnostics of `x` on `scn`:
/// (Σ_i e_i², (1/n)Σ_i |e_i|, max_i |e_i|) with e_i = RC_i/MAD − 1/n,
/// contributions taken with the zero tie rule.
///
/// Errors when MAD(x) is numerically zero: the ratios are undefined on a
/// hedged portfolio.
pub fn accuracy_diagnostics(scn: &ScenarioMatrix, x: &[f64]) -> Result<(f64, f64, f64)> {
    let m = mad(scn, x)?;
    let scale = scn.asset_mads().iter().fold(0.0_f64, |a, &b| a.max(b));
    if m <= 1e-8 * scale {
        return Err(Error::InvalidInput(format!(
            "portfolio MAD {m:.3e} is numerically zero; relative contributions are undefined"
        )));
    }
    let rc = risk_contributions(scn, x, TieRule::Zero)?;
    let n = x.len();
    let inv_n = 1.0 / n as f64;
    let mut f = 0.0;
    let mut mean = 0.0;
    let mut max = 0.0_f64;
    for i in 0..n {
        let e = rc.rc[i] / m - inv_n;
        f += e * e;
        mean += e.abs();
        max = max.max(e.abs());
    }
    mean /= n as f64;
    Ok((f, mean, max))
}

fn row_for(scn: &ScenarioMatrix, method: Method, config: &BenchConfig) -> BenchRow {
    let one_over_n = 1.0 / scn.n_assets() as f64;
    match solve_with(method, scn, &config.options) {
        Ok(rep) => BenchRow {
            method,
            weights: Some(rep.weights.values().to_vec()),
            f_value: rep.f_value,
            mad_value: Some(rep.mad_value),
            mean_abs_dev: rep.mean_abs_dev,
            max_abs_dev: rep.max_abs_dev,
            one_over_n,
            time_secs: match config.timings {
                TimingMode::Wall if !config.parallel => rep.wall_time,
                _ => 0.0,
            },
            error: None,
        },
        Err(e) => BenchRow {
            method,
            weights: None,
            f_value: None,
            mad_value: None,
            mean_abs_dev: None,
            max_abs_dev: None,
            one_over_n,
            time_secs: 0.0,
            error: Some(e.to_string()),
        },
    }
}

/// Runs every method on the (optionally truncated) dataset and returns one
/// row per method, in the order given. Per-method failures are recorded in
/// the row and the harness continues.
pub fn run_bench(
    scn: &ScenarioMatrix,
    methods: &[Method],
    config: &BenchConfig,
) -> Result<Vec<BenchRow>> {
    if methods.is_empty() {
        return Err(Error::Config("no methods requested".into()));
    }
    let window;
    let data = match config.first_days {
        Some(days) => {
            let k = days.min(scn.n_scenarios());
            if k == scn.n_scenarios() {
                scn
            } else {
                window = scn.take_first_days(k)?;
                &window
            }
        }
        None => scn,
    };
    if config.parallel {
        let rows: Vec<BenchRow> = std::thread::scope(|s| {
            let handles: Vec<_> = methods
                .iter()
                .map(|&m| s.spawn(move || row_for(data, m, config)))
                .collect();
            handles.into_iter().map(|h| h.join().unwrap()).collect()
        });
        Ok(rows)
    } else {
        Ok(methods.iter().map(|&m| row_for(data, m, config)).collect())
    }
}

fn cell(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV form of the table. Failed rows keep their method and 1/n columns and
/// leave the numeric cells empty.
pub fn rows_to_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("method,f,mad,mean_abs_dev,max_abs_dev,one_over_n,time_secs\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            cell(r.f_value),
            cell(r.mad_value),
            cell(r.mean_abs_dev),
            cell(r.max_abs_dev),
            r.one_over_n,
            r.time_secs
        );
    }
    out
}

/// Aligned plain-text form of the table, one line per method. Failed rows
/// print the error after the method name.
pub fn rows_to_text(rows: &[BenchRow]) -> String {
    let headers = ["method", "f", "mad", "mean_abs_dev", "max_abs_dev", "one_over_n", "time_secs"];
    let fmt = |v: Option<f64>| v.map(|x| format!("{x:.6e}")).unwrap_or_else(|| "-".into());
    let mut table: Vec<[String; 7]> = vec![headers.map(String::from)];
    for r in rows {
        table.push([
            r.method.to_string(),
            fmt(r.f_value),
            fmt(r.mad_value),
            fmt(r.mean_abs_dev),
            fmt(r.max_abs_dev),
            format!("{:.6e}", r.one_over_n),
            format!("{:.3e}", r.time_secs),
        ]);
    }
    let mut widths = [0usize; 7];
    for row in &table {
        for (w, c) in widths.iter_mut().zip(row.iter()) {
            *w = (*w).max(c.len());
        }
    }
    let mut out = String::new();
    for (ri, row) in table.iter().enumerate() {
        let mut line = String::new();
        for (c, w) in row.iter().zip(widths.iter()) {
            let _ = write!(line, "{c:<w$}  ");
        }
        let _ = write!(out, "{}", line.trim_end());
        if ri > 0 {
            if let Some(err) = &rows[ri - 1].error {
                let _ = write!(out, "  error: {err}");
            }
        }
        out.push('\n');
    }
    out
}
