//! Multi-start minimization of the least-squares equal-contribution
//! objectives over the unit simplex:
//!
//!   relative:  sum_i (RC_i / MAD - 1/n)^2
//!   absolute:  sum_i sum_j (RC_i - RC_j)^2
//!
//! Both objectives are piecewise smooth (the subgradient selection is
//! constant between scenario sign changes) and vanish exactly at an
//! equal-contribution portfolio. Each start is driven by a fixed-point jump
//! x <- normalize(1/g(x)) whenever that lowers the objective — it lands on
//! the exact parity point of the current sign region in one step — with
//! projected-gradient backtracking as the fallback between regions.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::optim::project_simplex;
use crate::risk::{mad, mad_subgradient, TieRule};
use crate::{Result, ScenarioMatrix};

/// Which parity objective to minimize.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum ParityObjective {
    Relative,
    Absolute,
}

pub(crate) struct ParityOutcome {
    pub x: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

struct Eval {
    f: f64,
    g: Vec<f64>,
    rc: Vec<f64>,
    mad: f64,
}

fn evaluate(scn: &ScenarioMatrix, x: &[f64], which: ParityObjective) -> Result<Eval> {
    let m = mad(scn, x)?;
    let (g, _) = mad_subgradient(scn, x, TieRule::Zero)?;
    let n = x.len();
    let mut rc = vec![0.0; n];
    for i in 0..n {
        rc[i] = x[i] * g[i];
    }
    let f = match which {
        ParityObjective::Relative => {
            let inv_n = 1.0 / n as f64;
            let mut acc = 0.0;
            for &rci in &rc {
                let e = rci / m - inv_n;
                acc += e * e;
            }
            acc
        }
        ParityObjective::Absolute => {
            let mut acc = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let e = rc[i] - rc[j];
                    acc += e * e;
                }
            }
            acc
        }
    };
    Ok(Eval {
        f,
        g: g.to_vec(),
        rc,
        mad: m,
    })
}

/// Gradient of the active smooth piece (signs held fixed at the current
/// subgradient selection). Exact away from tie scenarios.
fn piece_gradient(x: &[f64], ev: &Eval, which: ParityObjective) -> Vec<f64> {
    let n = x.len();
    let mut grad = vec![0.0; n];
    match which {
        ParityObjective::Relative => {
            let inv_n = 1.0 / n as f64;
            let m = ev.mad;
            let mut inner = 0.0;
            for i in 0..n {
                let phi = ev.rc[i] / m - inv_n;
                inner += phi * ev.rc[i] / m;
            }
            for j in 0..n {
                let phi_j = ev.rc[j] / m - inv_n;
                grad[j] = 2.0 * ev.g[j] / m * (phi_j - inner);
            }
        }
        ParityObjective::Absolute => {
            let total: f64 = ev.rc.iter().sum();
            let nf = n as f64;
            for j in 0..n {
                grad[j] = 4.0 * ev.g[j] * (nf * ev.rc[j] - total);
            }
        }
    }
    grad
}

/// Exact piecewise descent: fixed-point jumps between sign regions plus
/// projected gradient with backtracking inside them. Stops when stationary on
/// the current piece (the kinks of |v_t| can block every feasible step).
fn descend_exact(
    scn: &ScenarioMatrix,
    start: &[f64],
    which: ParityObjective,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let n = start.len();
    let mut x = project_simplex(start);
    let mut ev = evaluate(scn, &x, which)?;
    let mut eta = 0.25_f64;
    let mut iterations = 0usize;

    for _ in 0..max_iter {
        iterations += 1;
        if ev.f <= 1e-26 {
            break;
        }

        // fixed-point jump onto the parity point of the current sign region
        if ev.g.iter().all(|&gi| gi > 0.0) {
            let inv: Vec<f64> = ev.g.iter().map(|&gi| 1.0 / gi).collect();
            let total: f64 = inv.iter().sum();
            let cand: Vec<f64> = inv.iter().map(|&v| v / total).collect();
            let ev_cand = evaluate(scn, &cand, which)?;
            if ev_cand.f < ev.f {
                x = cand;
                ev = ev_cand;
                continue;
            }
        }

        // projected gradient with backtracking; the trial step is measured in
        // simplex units (largest coordinate move), not raw gradient scale —
        // the relative objective's gradients grow like 1/MAD and an unscaled
        // first step would slam the iterate onto the boundary
        let grad = piece_gradient(&x, &ev, which);
        let gmax = grad.iter().fold(0.0_f64, |m, &gi| m.max(gi.abs()));
        if gmax <= 0.0 {
            break;
        }
        let mut moved = false;
        let mut step = eta;
        for _ in 0..60 {
            let mut probe = vec![0.0; n];
            for i in 0..n {
                probe[i] = x[i] - step / gmax * grad[i];
            }
            let xn = project_simplex(&probe);
            let diff = xn
                .iter()
                .zip(x.iter())
                .fold(0.0_f64, |m, (&a, &b)| m.max((a - b).abs()));
            if diff <= 1e-18 {
                break;
            }
            let ev_n = evaluate(scn, &xn, which)?;
            if ev_n.f < ev.f {
                x = xn;
                ev = ev_n;
                eta = (step * 2.0).min(64.0);
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break; // stationary on this piece
        }
    }
    Ok((x, ev.f, iterations))
}

/// Value and gradient of the parity objective with every |v_t| replaced by
/// sqrt(v_t^2 + eps^2). The surrogate is differentiable everywhere and tends
/// to the exact objective as eps -> 0, which lets gradient descent travel
/// across scenario sign changes instead of stalling on them. All terms are
/// assembled through scenario-space products, so the cost stays O(T n).
fn evaluate_smoothed(
    scn: &ScenarioMatrix,
    x: &[f64],
    which: ParityObjective,
    eps: f64,
) -> (f64, Vec<f64>) {
    let d = scn.deviations();
    let (t, n) = d.dim();
    let inv_t = 1.0 / t as f64;

    let mut v = vec![0.0; t];
    for tt in 0..t {
        let mut acc = 0.0;
        for i in 0..n {
            acc += d[[tt, i]] * x[i];
        }
        v[tt] = acc;
    }
    // phi_t = smoothed |v_t|; s_t = d|v|/dv; w_t = d s / dv (curvature weight)
    let mut m = 0.0;
    let mut s = vec![0.0; t];
    let mut w = vec![0.0; t];
    for tt in 0..t {
        let phi = (v[tt] * v[tt] + eps * eps).sqrt();
        m += phi * inv_t;
        s[tt] = v[tt] / phi;
        w[tt] = eps * eps / (phi * phi * phi);
    }
    let mut g = vec![0.0; n];
    for i in 0..n {
        let mut acc = 0.0;
        for tt in 0..t {
            acc += s[tt] * d[[tt, i]];
        }
        g[i] = acc * inv_t;
    }
    let rc: Vec<f64> = (0..n).map(|i| x[i] * g[i]).collect();

    // d rc_i / d x_j = delta_ij g_i + x_i H_ij with
    // H_ij = (1/T) sum_t w_t d_ti d_tj; only products c' H are ever needed:
    // (c' H)_j = (1/T) sum_t w_t (sum_i c_i d_ti) d_tj.
    let h_product = |c: &[f64]| -> Vec<f64> {
        let mut u = vec![0.0; t];
        for tt in 0..t {
            let mut acc = 0.0;
            for i in 0..n {
                acc += c[i] * d[[tt, i]];
            }
            u[tt] = w[tt] * acc;
        }
        let mut out = vec![0.0; n];
        for j in 0..n {
            let mut acc = 0.0;
            for tt in 0..t {
                acc += u[tt] * d[[tt, j]];
            }
            out[j] = acc * inv_t;
        }
        out
    };

    match which {
        ParityObjective::Relative => {
            let inv_n = 1.0 / n as f64;
            let e: Vec<f64> = rc.iter().map(|&rci| rci / m - inv_n).collect();
            let f: f64 = e.iter().map(|&ei| ei * ei).sum();
            let ex: Vec<f64> = (0..n).map(|i| e[i] * x[i]).collect();
            let hx = h_product(&ex);
            let inner: f64 = (0..n).map(|i| e[i] * rc[i]).sum();
            let grad: Vec<f64> = (0..n)
                .map(|j| 2.0 / m * (e[j] * g[j] + hx[j]) - 2.0 * g[j] / (m * m) * inner)
                .collect();
            (f, grad)
        }
        ParityObjective::Absolute => {
            let nf = n as f64;
            let total: f64 = rc.iter().sum();
            let sq: f64 = rc.iter().map(|&rci| rci * rci).sum();
            let f = 2.0 * nf * sq - 2.0 * total * total;
            let rx: Vec<f64> = (0..n).map(|i| rc[i] * x[i]).collect();
            let h_rx = h_product(&rx);
            let h_x = h_product(x);
            let grad: Vec<f64> = (0..n)
                .map(|j| {
                    4.0 * nf * (rc[j] * g[j] + h_rx[j]) - 4.0 * total * (g[j] + h_x[j])
                })
                .collect();
            (f, grad)
        }
    }
}

/// Projected gradient on the smoothed surrogate at one kink width; returns
/// the end point and the iterations consumed.
fn descend_smoothed(
    scn: &ScenarioMatrix,
    start: &[f64],
    which: ParityObjective,
    eps: f64,
    max_iter: usize,
) -> (Vec<f64>, usize) {
    let n = start.len();
    let mut x = start.to_vec();
    let (mut f, mut grad) = evaluate_smoothed(scn, &x, which, eps);
    let mut eta = 0.25_f64;
    let mut iterations = 0usize;
    for _ in 0..max_iter {
        iterations += 1;
        let gmax = grad.iter().fold(0.0_f64, |m, &gi| m.max(gi.abs()));
        if gmax <= 0.0 {
            break;
        }
        let mut moved = false;
        let mut step = eta;
        for _ in 0..60 {
            let mut probe = vec![0.0; n];
            for i in 0..n {
                probe[i] = x[i] - step / gmax * grad[i];
            }
            let xn = project_simplex(&probe);
            let diff = xn
                .iter()
                .zip(x.iter())
                .fold(0.0_f64, |m, (&a, &b)| m.max((a - b).abs()));
            if diff <= 1e-18 {
                break;
            }
            let (fn_, gn) = evaluate_smoothed(scn, &xn, which, eps);
            if fn_ < f {
                x = xn;
                f = fn_;
                grad = gn;
                eta = (step * 2.0).min(64.0);
                moved = true;
                break;
            }
            step *= 0.5;
        }
        if !moved {
            break;
        }
    }
    (x, iterations)
}

/// One smoothing-ladder pass from `start`, polished by exact descent:
/// the kink width shrinks geometrically from the risk scale down to where
/// the surrogate is indistinguishable from the exact objective.
fn smooth_then_polish(
    scn: &ScenarioMatrix,
    start: &[f64],
    which: ParityObjective,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let base = mad(scn, start).unwrap_or(0.0);
    if !(base > 0.0) {
        let ev = evaluate(scn, start, which)?;
        return Ok((start.to_vec(), ev.f, 0));
    }
    let mut x = start.to_vec();
    let mut used = 0usize;
    let rung_budget = (max_iter / 12).max(10);
    for k in 1..=6 {
        let eps = base * 10.0_f64.powi(-k);
        let (xk, it) = descend_smoothed(scn, &x, which, eps, rung_budget);
        x = xk;
        used += it;
    }
    let remaining = max_iter.saturating_sub(used).max(10);
    let (x1, f1, used1) = descend_exact(scn, &x, which, remaining)?;
    Ok((x1, f1, used + used1))
}

/// Exact descent, then the smoothing ladder when it stalls uncertified.
fn full_descent(
    scn: &ScenarioMatrix,
    start: &[f64],
    which: ParityObjective,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let (x0, f0, used0) = descend_exact(scn, start, which, max_iter)?;
    if f0 <= 1e-13 || used0 >= max_iter {
        return Ok((x0, f0, used0));
    }
    let (x1, f1, used1) = smooth_then_polish(scn, &x0, which, max_iter)?;
    if f1 < f0 {
        Ok((x1, f1, used0 + used1))
    } else {
        Ok((x0, f0, used0 + used1))
    }
}

/// Restart points that repair a non-positive risk contribution. An
/// equal-contribution portfolio gives every asset the share 1/n > 0, yet a
/// descent path can terminate with some asset's contribution pinned at or
/// below zero (its subgradient component is negative there, so every
/// first-order move presses the weight against the boundary — a genuine
/// local minimum of both parity objectives). The repair walks the deficient
/// asset's weight up a fixed ladder, shrinking the rest proportionally, which
/// jumps across the sign ridge that descent cannot cross.
fn repair_candidates(scn: &ScenarioMatrix, x: &[f64]) -> Vec<Vec<f64>> {
    let n = x.len();
    let Ok((g, _)) = mad_subgradient(scn, x, TieRule::Zero) else {
        return Vec::new();
    };
    let m = match mad(scn, x) {
        Ok(m) if m > 0.0 => m,
        _ => return Vec::new(),
    };
    let shares: Vec<f64> = (0..n).map(|i| x[i] * g[i] / m).collect();
    let worst = (0..n).min_by(|&a, &b| shares[a].partial_cmp(&shares[b]).unwrap());
    let Some(i) = worst else { return Vec::new() };
    if shares[i] > 1.0 / (4.0 * n as f64) {
        return Vec::new(); // no severely deficient contribution: nothing to repair
    }
    // Walk the weight up a fixed ladder and keep the points whose repaired
    // share is positive and closest to the 1/n target — the contribution
    // typically flips sign only inside a narrow weight window, overshooting
    // into dominance (share >> 1/n) on one side and staying negative on the
    // other, so raw objective values would rank the candidates uselessly.
    let target = 1.0 / n as f64;
    let mut cands: Vec<(f64, Vec<f64>)> = Vec::new();
    for u in [0.1, 0.15, 0.2, 0.25, 0.3, 0.4, 0.5] {
        if x[i] >= u || 1.0 - x[i] <= 0.0 {
            continue;
        }
        let scale = (1.0 - u) / (1.0 - x[i]);
        let mut c: Vec<f64> = x.iter().map(|&v| v * scale).collect();
        c[i] = u;
        let Ok((gc, _)) = mad_subgradient(scn, &c, TieRule::Zero) else {
            continue;
        };
        let Ok(mc) = mad(scn, &c) else { continue };
        if !(mc > 0.0) {
            continue;
        }
        let share = c[i] * gc[i] / mc;
        if share > 0.0 {
            cands.push(((share - target).abs(), c));
        }
    }
    cands.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
    cands.truncate(2);
    cands.into_iter().map(|(_, c)| c).collect()
}

/// Minimizes from one start; returns the best point found and its objective.
///
/// Exact descent runs first (it converges in a handful of steps whenever the
/// target lies in the start's sign region). If it stalls above certification
/// level — on long histories the kinks become dense enough to block every
/// piecewise step — a kink-smoothing ladder takes over from the stall point
/// and exact descent polishes its end point. A stall that leaves some asset's
/// contribution non-positive additionally triggers contribution-repair
/// restarts of the same pipeline; a repaired descent can land on a different
/// asset's face, so the repair loops for a few rounds, each working on the
/// current best point, until nothing is deficient or no round improves.
fn minimize_from(
    scn: &ScenarioMatrix,
    start: &[f64],
    which: ParityObjective,
    max_iter: usize,
) -> Result<(Vec<f64>, f64, usize)> {
    let (mut best_x, mut best_f, mut used) = full_descent(scn, start, which, max_iter)?;
    let mut rounds = 0;
    while best_f > 1e-13 && rounds < 3 {
        rounds += 1;
        let cands = repair_candidates(scn, &best_x);
        if cands.is_empty() {
            break;
        }
        let mut improved = false;
        for cand in cands {
            let (x2, f2, used2) = full_descent(scn, &cand, which, max_iter)?;
            used += used2;
            if f2 < best_f {
                best_x = x2;
                best_f = f2;
                improved = true;
            }
            if best_f <= 1e-13 {
                break;
            }
        }
        if !improved {
            break;
        }
    }
    Ok((best_x, best_f, used))
}

/// Default start set: equal weights, the closed-form parity point when the
/// market is additive, and uniform-simplex draws from a fixed seed up to
/// `restarts` starts in total.
pub(crate) fn default_starts(scn: &ScenarioMatrix, restarts: usize) -> Vec<Vec<f64>> {
    let n = scn.n_assets();
    let mut starts: Vec<Vec<f64>> = vec![vec![1.0 / n as f64; n]];
    // Inverse-MAD portfolio: the exact parity point on additive markets and
    // the natural initial guess elsewhere. Keeping it in the start set stops
    // the ratio objective from stalling in the hedged-vertex basin that opens
    // up when a lightly weighted asset co-moves against the rest.
    let mads = scn.asset_mads();
    if mads.iter().all(|&m| m > 0.0) {
        let inv: Vec<f64> = mads.iter().map(|&m| 1.0 / m).collect();
        let total: f64 = inv.iter().sum();
        starts.push(inv.iter().map(|&v| v / total).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x6c73_7274);
    while starts.len() < restarts.max(1) {
        let mut draw: Vec<f64> = (0..n)
            .map(|_| -(rng.gen::<f64>().max(1e-16)).ln())
            .collect();
        let total: f64 = draw.iter().sum();
        for v in draw.iter_mut() {
            *v /= total;
        }
        starts.push(draw);
    }
    starts
}

/// Runs every start and keeps the lowest objective.
pub(crate) fn minimize_parity(
    scn: &ScenarioMatrix,
    which: ParityObjective,
    starts: &[Vec<f64>],
    max_iter: usize,
) -> Result<ParityOutcome> {
    let mut best: Option<ParityOutcome> = None;
    let mut total_iters = 0usize;
    for start in starts {
        let (x, f, used) = minimize_from(scn, start, which, max_iter)?;
        total_iters += used;
        if best.as_ref().map_or(true, |b| f < b.objective) {
            best = Some(ParityOutcome {
                x,
                objective: f,
                iterations: 0,
            });
        }
    }
    let mut out = best.expect("at least one start");
    out.iterations = total_iters;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::risk::closed_form_rp;
    use crate::scenarios::{synth_comonotone, synth_random};

    #[test]
    fn smoothed_gradient_matches_finite_differences() {
        let scn = synth_random(4, 40, 321).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4];
        let h = 1e-7;
        for which in [ParityObjective::Relative, ParityObjective::Absolute] {
            for eps in [1e-2, 1e-4] {
                let (_, grad) = evaluate_smoothed(&scn, &x, which, eps);
                for i in 0..4 {
                    let mut xp = x;
                    xp[i] += h;
                    let mut xm = x;
                    xm[i] -= h;
                    let (fp, _) = evaluate_smoothed(&scn, &xp, which, eps);
                    let (fm, _) = evaluate_smoothed(&scn, &xm, which, eps);
                    let fd = (fp - fm) / (2.0 * h);
                    let scale = grad[i].abs().max(1.0);
                    assert!(
                        (fd - grad[i]).abs() <= 1e-5 * scale,
                        "{which:?} eps={eps}: coord {i} analytic {} vs fd {fd}",
                        grad[i]
                    );
                }
            }
        }
    }

    #[test]
    fn smoothed_surrogate_approaches_exact_objective() {
        let scn = synth_random(3, 30, 654).unwrap();
        let x = [0.5, 0.3, 0.2];
        let exact = evaluate(&scn, &x, ParityObjective::Relative).unwrap().f;
        let (f_wide, _) = evaluate_smoothed(&scn, &x, ParityObjective::Relative, 1e-2);
        let (f_tight, _) = evaluate_smoothed(&scn, &x, ParityObjective::Relative, 1e-10);
        assert!((f_tight - exact).abs() <= 1e-9);
        assert!((f_wide - exact).abs() >= (f_tight - exact).abs());
    }

    #[test]
    fn long_history_stall_is_rescued_by_smoothing() {
        // At several hundred scenarios the kinks are dense enough that plain
        // piecewise descent stalls from every default start at an objective
        // well above the reachable level; the smoothing ladder has to carry
        // the best start substantially lower (observed: 7.9e-7 rescued vs
        // 1.4e-5 stalled on this instance) and land at a usable parity point.
        let scn = synth_random(4, 250, 9_099).unwrap();
        let starts = default_starts(&scn, 5);
        let out = minimize_parity(&scn, ParityObjective::Relative, &starts, 4000).unwrap();
        let stalled = {
            let mut best = f64::INFINITY;
            for s in &starts {
                let (_, f, _) = descend_exact(&scn, s, ParityObjective::Relative, 4000).unwrap();
                best = best.min(f);
            }
            best
        };
        assert!(
            out.objective <= stalled * 0.25,
            "rescued objective {:.3e} not well below the stalled level {stalled:.3e}",
            out.objective
        );
        assert!(
            out.objective <= 1e-5,
            "rescued objective {:.3e} above the usable parity level",
            out.objective
        );
    }

    #[test]
    fn additive_market_converges_to_inverse_mad_point() {
        let scn = synth_comonotone(3, 20, &[1.0, 2.0, 4.0], 5).unwrap();
        let starts = default_starts(&scn, 5);
        // the closed-form point is among the starts: objective must end tiny
        let out = minimize_parity(&scn, ParityObjective::Relative, &starts, 2000).unwrap();
        assert!(out.objective <= 1e-12, "objective {}", out.objective);
        let cf = closed_form_rp(&scn).unwrap();
        for i in 0..3 {
            assert!((out.x[i] - cf[i]).abs() <= 1e-7);
        }
    }

    #[test]
    fn absolute_objective_is_zero_at_parity_point() {
        let scn = synth_comonotone(2, 10, &[1.0, 3.0], 11).unwrap();
        let cf = closed_form_rp(&scn).unwrap();
        let ev = evaluate(&scn, cf.values(), ParityObjective::Absolute).unwrap();
        assert!(ev.f <= 1e-30, "objective {}", ev.f);
    }

    #[test]
    fn random_market_reaches_machine_level_parity() {
        // instance whose parity point keeps every scenario deviation nonzero,
        // so the piecewise-smooth objective has an interior zero
        let scn = synth_random(4, 30, 10).unwrap();
        let starts = default_starts(&scn, 5);
        let out = minimize_parity(&scn, ParityObjective::Relative, &starts, 4000).unwrap();
        assert!(out.objective <= 1e-16, "objective {}", out.objective);
    }

    #[test]
    fn piece_gradient_matches_finite_differences_off_ties() {
        let scn = synth_random(3, 15, 23).unwrap();
        let x = [0.5, 0.3, 0.2];
        for which in [ParityObjective::Relative, ParityObjective::Absolute] {
            let ev = evaluate(&scn, &x, which).unwrap();
            let grad = piece_gradient(&x, &ev, which);
            let h = 1e-7;
            for i in 0..3 {
                let mut xp = x.to_vec();
                let mut xm = x.to_vec();
                xp[i] += h;
                xm[i] -= h;
                let fp = evaluate(&scn, &xp, which).unwrap().f;
                let fm = evaluate(&scn, &xm, which).unwrap().f;
                let fd = (fp - fm) / (2.0 * h);
                assert!(
                    (grad[i] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "{which:?} coordinate {i}: analytic {} vs fd {fd}",
                    grad[i]
                );
            }
        }
    }

    #[test]
    fn starts_are_deterministic_and_on_the_simplex() {
        let scn = synth_random(4, 12, 3).unwrap();
        let a = default_starts(&scn, 5);
        let b = default_starts(&scn, 5);
        assert_eq!(a.len(), 5);
        for (sa, sb) in a.iter().zip(b.iter()) {
            assert_eq!(sa, sb);
            let sum: f64 = sa.iter().sum();
            assert!((sum - 1.0).abs() <= 1e-12);
            assert!(sa.iter().all(|&v| v >= 0.0));
        }
    }
}
