//! Path-following barrier Newton method for the epigraph form of the MAD
//! risk parity programs:
//!
//!   min  epi_weight * sum_t y_t  +  log_weight * sum_i (-ln x_i)  +  smooth(x)
//!   s.t. -y_t <= d_t' x <= y_t          (epigraph rows, optional)
//!        sum_i ln x_i >= floor          (optional)
//!        sum_i x_i = budget             (optional)
//!        x > 0
//!
//! MAD is piecewise linear, so the epigraph rows carry all of it; the only
//! curvature comes from the logarithmic terms (and an optional smooth term),
//! which keeps the Newton systems small: the y block is diagonal and is
//! eliminated analytically, leaving an n x n solve per step.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::{Error, Result};

use super::linalg::solve_spd_with_ridge;
use super::lp::{SolveStatus, Status};

/// Extra smooth convex objective term (used by the volatility parity solver).
pub trait SmoothTerm {
    fn value(&self, x: &[f64]) -> f64;
    /// Adds the gradient and Hessian at x into the accumulators.
    fn accumulate(&self, x: &[f64], grad: &mut Array1<f64>, hess: &mut Array2<f64>);
}

/// Problem description; see the module docs for the full program.
pub struct BarrierProblem<'a> {
    /// T x n deviation rows d_t behind the epigraph pairs; None when the
    /// objective has no MAD term.
    pub deviations: Option<&'a Array2<f64>>,
    /// Coefficient on sum_t y_t, typically 1/T.
    pub epi_weight: f64,
    /// Coefficient lambda on sum_i (-ln x_i) in the objective itself.
    pub log_weight: f64,
    /// Constraint sum_i ln x_i >= floor.
    pub log_sum_floor: Option<f64>,
    /// Constraint sum_i x_i = budget.
    pub budget: Option<f64>,
    pub smooth: Option<&'a dyn SmoothTerm>,
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct BarrierOptions {
    /// Target duality-gap bound, relative to max(1, |objective|).
    pub tol: f64,
    /// Total Newton-step budget across all barrier stages.
    pub max_newton: usize,
    /// Newton steps allowed per barrier stage.
    pub max_inner: usize,
    /// Initial barrier multiplier and its per-stage reduction factor.
    pub mu0: f64,
    pub mu_factor: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_newton: 200,
            max_inner: 50,
            mu0: 1.0,
            mu_factor: 0.1,
        }
    }
}

/// Solution: final interior iterate, epigraph values, objective, and one
/// objective value per barrier stage (nonincreasing along the central path).
#[derive(Clone, Debug)]
pub struct BarrierSolution {
    pub x: Array1<f64>,
    pub y: Option<Array1<f64>>,
    pub objective: f64,
    pub trace: Vec<f64>,
    pub status: SolveStatus,
}

struct State {
    x: Array1<f64>,
    y: Array1<f64>, // empty when no epigraph rows
}

fn objective(p: &BarrierProblem, st: &State) -> f64 {
    let mut f = 0.0;
    for &yt in st.y.iter() {
        f += p.epi_weight * yt;
    }
    if p.log_weight != 0.0 {
        for &xi in st.x.iter() {
            f -= p.log_weight * xi.ln();
        }
    }
    if let Some(sm) = &p.smooth {
        f += sm.value(st.x.as_slice().unwrap());
    }
    f
}

/// Barrier value, or None when the point is outside the domain.
fn barrier(p: &BarrierProblem, st: &State) -> Option<f64> {
    let mut bar = 0.0;
    if st.x.iter().any(|&xi| xi <= 0.0) {
        return None;
    }
    if let Some(d) = p.deviations {
        for t in 0..d.nrows() {
            let mut w = 0.0;
            for i in 0..d.ncols() {
                w += d[[t, i]] * st.x[i];
            }
            let a = st.y[t] - w;
            let b = st.y[t] + w;
            if a <= 0.0 || b <= 0.0 {
                return None;
            }
            bar -= a.ln() + b.ln();
        }
    }
    if let Some(floor) = p.log_sum_floor {
        let mut g = -floor;
        for &xi in st.x.iter() {
            g += xi.ln();
        }
        if g <= 0.0 {
            return None;
        }
        bar -= g.ln();
    }
    Some(bar)
}

fn merit(p: &BarrierProblem, st: &State, mu: f64) -> Option<f64> {
    Some(objective(p, st) + mu * barrier(p, st)?)
}

/// Minimizes the barrier program from the strictly feasible start `x0`.
///
/// Errors only on structural problems (bad start, dimension mismatch);
/// running out of iterations is reported through the status with the best
/// iterate attached.
pub fn solve_barrier(
    p: &BarrierProblem,
    x0: &[f64],
    opts: &BarrierOptions,
) -> Result<BarrierSolution> {
    let n = x0.len();
    if n == 0 {
        return Err(Error::InvalidInput("empty start".into()));
    }
    if x0.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::InvalidInput(
            "barrier start must be strictly positive".into(),
        ));
    }
    let t = p.deviations.map_or(0, |d| d.nrows());
    if let Some(d) = p.deviations {
        if d.ncols() != n {
            return Err(Error::InvalidInput(format!(
                "deviation matrix has {} columns for {n} variables",
                d.ncols()
            )));
        }
    }
    if let Some(floor) = p.log_sum_floor {
        let lsum: f64 = x0.iter().map(|v| v.ln()).sum();
        if lsum <= floor {
            return Err(Error::InvalidInput(format!(
                "start has sum ln x = {lsum}, not strictly above the floor {floor}"
            )));
        }
    }
    if let Some(budget) = p.budget {
        let s: f64 = x0.iter().sum();
        if (s - budget).abs() > 1e-9 * budget.abs().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "start sums to {s}, budget is {budget}"
            )));
        }
    }

    let mut st = State {
        x: Array1::from_iter(x0.iter().cloned()),
        y: Array1::zeros(t),
    };
    if let Some(d) = p.deviations {
        let mut wmax = 0.0_f64;
        let mut w = vec![0.0; t];
        for tt in 0..t {
            let mut acc = 0.0;
            for i in 0..n {
                acc += d[[tt, i]] * st.x[i];
            }
            w[tt] = acc;
            wmax = wmax.max(acc.abs());
        }
        let pad = (0.1 * wmax).max(1e-6);
        for tt in 0..t {
            st.y[tt] = w[tt].abs() + pad;
        }
    }

    let n_barrier = (2 * t + usize::from(p.log_sum_floor.is_some())) as f64;
    let mut mu = opts.mu0;
    let mut trace = Vec::new();
    let mut newton_used = 0usize;
    let mut status = Status::IterationLimit;
    let mut gap = f64::INFINITY;

    'outer: loop {
        // ---- inner Newton loop at fixed mu ----
        for _ in 0..opts.max_inner {
            if newton_used >= opts.max_newton {
                break 'outer;
            }
            let step = newton_step(p, &st, mu)?;
            let Some((dx, dy, descent)) = step else {
                break 'outer; // singular system even with ridge: keep best iterate
            };
            let nd2 = -descent; // Newton decrement squared (>= 0 for convex models)
            let phi = merit(p, &st, mu).expect("current iterate is interior");
            if nd2 * 0.5 <= 1e-13 * (1.0 + phi.abs()) {
                break;
            }
            newton_used += 1;

            // fraction-to-boundary on the linear positivity constraints
            let mut alpha = 1.0_f64;
            for i in 0..n {
                if dx[i] < 0.0 {
                    alpha = alpha.min(-0.99 * st.x[i] / dx[i]);
                }
            }
            if let Some(d) = p.deviations {
                for tt in 0..t {
                    let mut dw = 0.0;
                    let mut w = 0.0;
                    for i in 0..n {
                        dw += d[[tt, i]] * dx[i];
                        w += d[[tt, i]] * st.x[i];
                    }
                    let da = dy[tt] - dw;
                    let db = dy[tt] + dw;
                    let a = st.y[tt] - w;
                    let b = st.y[tt] + w;
                    if da < 0.0 {
                        alpha = alpha.min(-0.99 * a / da);
                    }
                    if db < 0.0 {
                        alpha = alpha.min(-0.99 * b / db);
                    }
                }
            }

            // Armijo backtracking on the merit function
            let mut accepted = false;
            for _ in 0..60 {
                let cand = State {
                    x: &st.x + &dx.mapv(|v| v * alpha),
                    y: &st.y + &dy.mapv(|v| v * alpha),
                };
                if let Some(phi_new) = merit(p, &cand, mu) {
                    if phi_new <= phi - 1e-4 * alpha * nd2 {
                        st = cand;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                break; // stalled at numerical precision for this stage
            }
        }

        trace.push(objective(p, &st));
        gap = n_barrier * mu;
        let scale = 1.0 + objective(p, &st).abs();
        if gap <= opts.tol * scale || n_barrier == 0.0 {
            status = Status::Optimal;
            break;
        }
        if newton_used >= opts.max_newton {
            break;
        }
        mu *= opts.mu_factor;
    }

    let objective_value = objective(p, &st);
    Ok(BarrierSolution {
        y: if t > 0 { Some(st.y.clone()) } else { None },
        x: st.x,
        objective: objective_value,
        trace,
        status: SolveStatus {
            status,
            iterations: newton_used,
            kkt_residual: gap / (1.0 + objective_value.abs()),
        },
    })
}

/// One Newton system assembly and solve. Returns (dx, dy, g'delta); None when
/// the reduced system cannot be factored.
#[allow(clippy::type_complexity)]
fn newton_step(
    p: &BarrierProblem,
    st: &State,
    mu: f64,
) -> Result<Option<(Array1<f64>, Array1<f64>, f64)>> {
    let n = st.x.len();
    let t = st.y.len();

    let mut gx = Array1::<f64>::zeros(n);
    let mut hxx = Array2::<f64>::zeros((n, n));

    // objective terms on x
    if p.log_weight != 0.0 {
        for i in 0..n {
            gx[i] -= p.log_weight / st.x[i];
            hxx[[i, i]] += p.log_weight / (st.x[i] * st.x[i]);
        }
    }
    if let Some(sm) = &p.smooth {
        sm.accumulate(st.x.as_slice().unwrap(), &mut gx, &mut hxx);
    }

    // log-sum constraint barrier
    if let Some(floor) = p.log_sum_floor {
        let mut g = -floor;
        for &xi in st.x.iter() {
            g += xi.ln();
        }
        for i in 0..n {
            let u = 1.0 / st.x[i];
            gx[i] -= mu * u / g;
            hxx[[i, i]] += mu * u * u / g;
        }
        for i in 0..n {
            for j in 0..n {
                hxx[[i, j]] += mu / (g * g) / (st.x[i] * st.x[j]);
            }
        }
    }

    // epigraph pairs: eliminate y analytically
    let mut gy = Array1::<f64>::zeros(t);
    let mut hyy = vec![0.0; t];
    let mut hyw = vec![0.0; t];
    if let Some(d) = p.deviations {
        for tt in 0..t {
            let mut w = 0.0;
            for i in 0..n {
                w += d[[tt, i]] * st.x[i];
            }
            let a = st.y[tt] - w;
            let b = st.y[tt] + w;
            let (ia, ib) = (1.0 / a, 1.0 / b);
            let (qa, qb) = (ia * ia, ib * ib);
            gy[tt] = p.epi_weight - mu * (ia + ib);
            let gw = mu * (ia - ib);
            hyy[tt] = mu * (qa + qb);
            hyw[tt] = mu * (qb - qa);
            let hww = mu * (qa + qb);
            // fold the w-direction pieces into the x blocks
            let coeff = hww - hyw[tt] * hyw[tt] / hyy[tt];
            for i in 0..n {
                let dti = d[[tt, i]];
                if dti == 0.0 {
                    continue;
                }
                gx[i] += gw * dti;
                for j in 0..n {
                    hxx[[i, j]] += coeff * dti * d[[tt, j]];
                }
            }
            // rhs correction from eliminating y_t
            let corr = hyw[tt] / hyy[tt] * gy[tt];
            for i in 0..n {
                gx[i] -= corr * d[[tt, i]];
            }
        }
    }

    // reduced rhs is -gx (with the y-elimination corrections already folded in)
    let rhs = gx.mapv(|v| -v);
    let dx = if let Some(budget) = p.budget {
        let ones = Array1::from_elem(n, 1.0);
        let Some((l, z1)) = solve_spd_with_ridge(&hxx, &rhs) else {
            return Ok(None);
        };
        let z2 = super::linalg::cholesky_solve_factored(&l, &ones);
        let r_eq: f64 = st.x.iter().sum::<f64>() - budget;
        let denom: f64 = z2.iter().sum();
        if denom.abs() < 1e-300 {
            return Ok(None);
        }
        let dnu = (z1.iter().sum::<f64>() + r_eq) / denom;
        &z1 - &z2.mapv(|v| v * dnu)
    } else {
        let Some((_, dx)) = solve_spd_with_ridge(&hxx, &rhs) else {
            return Ok(None);
        };
        dx
    };

    // back-substitute y directions and the true directional derivative
    let mut dy = Array1::<f64>::zeros(t);
    let mut descent = 0.0;
    if let Some(d) = p.deviations {
        for tt in 0..t {
            let mut dw = 0.0;
            for i in 0..n {
                dw += d[[tt, i]] * dx[i];
            }
            dy[tt] = -(gy[tt] + hyw[tt] * dw) / hyy[tt];
            descent += gy[tt] * dy[tt];
        }
    }
    // gradient on x alone (without elimination corrections) for g'delta
    let mut gx_true = Array1::<f64>::zeros(n);
    if p.log_weight != 0.0 {
        for i in 0..n {
            gx_true[i] -= p.log_weight / st.x[i];
        }
    }
    if let Some(sm) = &p.smooth {
        let mut h_scratch = Array2::<f64>::zeros((n, n));
        sm.accumulate(st.x.as_slice().unwrap(), &mut gx_true, &mut h_scratch);
    }
    if let Some(floor) = p.log_sum_floor {
        let mut g = -floor;
        for &xi in st.x.iter() {
            g += xi.ln();
        }
        for i in 0..n {
            gx_true[i] -= mu / (g * st.x[i]);
        }
    }
    if let Some(d) = p.deviations {
        for tt in 0..t {
            let mut w = 0.0;
            for i in 0..n {
                w += d[[tt, i]] * st.x[i];
            }
            let a = st.y[tt] - w;
            let b = st.y[tt] + w;
            let gw = mu * (1.0 / a - 1.0 / b);
            for i in 0..n {
                gx_true[i] += gw * d[[tt, i]];
            }
        }
    }
    for i in 0..n {
        descent += gx_true[i] * dx[i];
    }
    Ok(Some((dx, dy, descent)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::mad;
    use crate::scenarios::synth_random;
    use ndarray::array;

    fn log_obj_problem(d: &Array2<f64>, lambda: f64) -> BarrierProblem<'_> {
        BarrierProblem {
            deviations: Some(d),
            epi_weight: 1.0 / d.nrows() as f64,
            log_weight: lambda,
            log_sum_floor: None,
            budget: None,
            smooth: None,
        }
    }

    #[test]
    fn one_dimensional_closed_form() {
        // min m1*x - lambda ln x has optimum x = lambda / m1
        let d = array![[0.02], [-0.02], [0.01], [-0.01]];
        let m1 = d.iter().map(|v: &f64| v.abs()).sum::<f64>() / 4.0;
        let lambda = 0.005;
        let p = log_obj_problem(&d, lambda);
        let opts = BarrierOptions {
            tol: 1e-12,
            ..Default::default()
        };
        let sol = solve_barrier(&p, &[1.0], &opts).unwrap();
        assert_eq!(sol.status.status, Status::Optimal, "{:?}", sol.status);
        let expect = lambda / m1;
        assert!(
            (sol.x[0] - expect).abs() <= 1e-8 * expect,
            "got {} expected {expect}",
            sol.x[0]
        );
    }

    #[test]
    fn symmetric_assets_get_equal_weights() {
        // identical deviation columns: the optimum is symmetric
        let d = array![
            [0.02, 0.02],
            [-0.01, -0.01],
            [-0.005, -0.005],
            [-0.005, -0.005]
        ];
        let p = log_obj_problem(&d, 0.003);
        let sol = solve_barrier(&p, &[0.7, 1.3], &BarrierOptions::default()).unwrap();
        assert!(
            (sol.x[0] - sol.x[1]).abs() <= 1e-8 * sol.x[0].abs(),
            "{:?}",
            sol.x
        );
    }

    #[test]
    fn objective_trace_is_monotone_along_the_path() {
        let scn = synth_random(4, 40, 31).unwrap();
        let p = log_obj_problem(scn.deviations(), 0.002);
        let sol = solve_barrier(&p, &[0.25; 4], &BarrierOptions::default()).unwrap();
        assert!(sol.trace.len() >= 3);
        for k in 1..sol.trace.len() {
            assert!(
                sol.trace[k] <= sol.trace[k - 1] + 1e-12 * (1.0 + sol.trace[k - 1].abs()),
                "stage {k}: {} -> {}",
                sol.trace[k - 1],
                sol.trace[k]
            );
        }
    }

    #[test]
    fn final_iterate_is_strictly_interior() {
        let scn = synth_random(5, 30, 37).unwrap();
        let p = log_obj_problem(scn.deviations(), 1e-4);
        let sol = solve_barrier(&p, &[0.2; 5], &BarrierOptions::default()).unwrap();
        assert!(sol.x.iter().all(|&v| v > 0.0));
        let y = sol.y.unwrap();
        // epigraph variables dominate the absolute deviations
        for tt in 0..30 {
            let mut w = 0.0;
            for i in 0..5 {
                w += scn.deviations()[[tt, i]] * sol.x[i];
            }
            assert!(y[tt] >= w.abs());
        }
    }

    #[test]
    fn beats_multistart_subgradient_descent() {
        let scn = synth_random(3, 25, 41).unwrap();
        let lambda = 0.002;
        let p = log_obj_problem(scn.deviations(), lambda);
        let sol = solve_barrier(&p, &[0.4, 0.3, 0.3], &BarrierOptions::default()).unwrap();
        let f = |x: &[f64]| -> f64 {
            mad(&scn, x).unwrap() - lambda * x.iter().map(|v| v.ln()).sum::<f64>()
        };
        let f_barrier = f(sol.x.as_slice().unwrap());

        let starts = [[0.5, 0.5, 0.5], [1.0, 0.2, 0.2], [0.1, 1.0, 0.3], [2.0, 2.0, 2.0], [0.3, 0.3, 1.5]];
        let mut best = f64::INFINITY;
        for s in starts {
            let mut x = s.to_vec();
            for k in 1..30000usize {
                // numeric subgradient via the analytic sign formula
                let (g, _) = crate::risk::mad_subgradient(&scn, &x, crate::risk::TieRule::Zero)
                    .unwrap();
                let step = 0.02 / (k as f64).sqrt();
                for i in 0..3 {
                    x[i] = (x[i] - step * (g[i] - lambda / x[i])).max(1e-9);
                }
            }
            best = best.min(f(&x));
        }
        assert!(
            f_barrier <= best + 1e-6 * (1.0 + best.abs()),
            "barrier {f_barrier} vs subgradient {best}"
        );
    }

    #[test]
    fn infeasible_start_is_rejected() {
        let d = array![[0.01], [-0.01]];
        let p = BarrierProblem {
            deviations: Some(&d),
            epi_weight: 0.5,
            log_weight: 0.0,
            log_sum_floor: Some(0.0),
            budget: None,
            smooth: None,
        };
        // ln(0.5) < 0 violates the floor
        assert!(solve_barrier(&p, &[0.5], &BarrierOptions::default()).is_err());
        assert!(solve_barrier(&p, &[-1.0], &BarrierOptions::default()).is_err());
    }
}
