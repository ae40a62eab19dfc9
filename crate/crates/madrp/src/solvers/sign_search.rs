//! Exact search over scenario sign patterns for the equal-risk-contribution
//! system
//!
//!   x_i * (1/T) sum_t s_t (r_ti - mu_i) = lambda  for all i,
//!   sum_i x_i = 1,  x >= 0,
//!   s_t = sign((r_t - mu)' x) where that is nonzero, s_t in {-1,0,+1} on ties.
//!
//! Once a full sign vector s is fixed, g = (1/T) sum_t s_t d_t is a constant
//! vector and the system is linear: x_i = lambda / g_i with lambda chosen so
//! the weights sum to one. The search walks sign assignments depth-first,
//! pruning branches that cannot keep every g_i positive (a consistent
//! solution has lambda = MAD/n > 0 on a non-degenerate market, hence g > 0).
//!
//! The big-M inequalities that a mixed-integer encoding would use are
//! enforced combinatorially here, so no big-M constant ever enters the
//! arithmetic. The system can be infeasible even when the equal-contribution
//! portfolio exists: a tie scenario at that portfolio may demand a fractional
//! sign selection, which {-1,0,+1} cannot supply. Callers should fall back to
//! a convex formulation (for example the log-constrained one) in that case.

use ndarray::Array2;

use super::least_squares::{default_starts, minimize_parity, ParityObjective};
use crate::risk::{mad_subgradient, TieRule};
use crate::{Error, Result, ScenarioMatrix};

/// Hard cap on the scenario count the exhaustive search accepts.
pub const SIGN_SEARCH_SCENARIO_CAP: usize = 32;

/// Default node budget before the search gives up.
pub const SIGN_SEARCH_NODE_BUDGET: usize = 250_000;

/// Per-scenario sign assignment; None marks a scenario left free (only seen
/// mid-search; completed solutions have every entry set).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignPattern {
    pub assignment: Vec<Option<i8>>,
}

impl SignPattern {
    /// Binary indicator pair (u_t, v_t) per scenario: u marks -1, v marks +1.
    /// At most one of the two is set, matching s_t = v_t - u_t.
    pub fn indicators(&self) -> Vec<(bool, bool)> {
        self.assignment
            .iter()
            .map(|s| (*s == Some(-1), *s == Some(1)))
            .collect()
    }
}

/// A root of the sign system: weights on the simplex, the common risk
/// contribution lambda, the sign pattern, and the relative consistency
/// residual (violation of the sign conditions over max_t |(r_t - mu)' x|).
#[derive(Clone, Debug)]
pub struct SignSystemSolution {
    pub weights: Vec<f64>,
    pub lambda: f64,
    pub pattern: SignPattern,
    pub residual: f64,
    pub nodes_visited: usize,
}

struct Search<'a> {
    d: &'a Array2<f64>,
    inv_t: f64,
    /// scenario visit order, most decisive first
    order: Vec<usize>,
    /// per-scenario candidate signs, preferred first
    candidates: Vec<[i8; 3]>,
    tol: f64,
    budget: usize,
    nodes: usize,
}

impl Search<'_> {
    fn dfs(
        &mut self,
        depth: usize,
        assigned: &mut Vec<i8>,
        gp: &mut Vec<f64>,
        rem: &mut Vec<f64>,
    ) -> Result<Option<SignSystemSolution>> {
        let n = gp.len();
        if depth == self.order.len() {
            return Ok(self.check_leaf(assigned));
        }
        let tt = self.order[depth];
        // remove this scenario's slack before branching on its sign
        for i in 0..n {
            rem[i] -= self.d[[tt, i]].abs() * self.inv_t;
        }
        let cands = self.candidates[depth];
        for &s in &cands {
            self.nodes += 1;
            if self.nodes > self.budget {
                return Err(Error::SignSystem(format!(
                    "sign search exhausted its node budget ({}) without finding a \
                     consistent assignment; the equal-contribution portfolio may still \
                     exist — fall back to a convex formulation such as log_constr",
                    self.budget
                )));
            }
            let step = f64::from(s) * self.inv_t;
            for i in 0..n {
                gp[i] += step * self.d[[tt, i]];
            }
            assigned[tt] = s;
            let viable = (0..n).all(|i| gp[i] + rem[i] > 0.0);
            if viable {
                if let Some(found) = self.dfs(depth + 1, assigned, gp, rem)? {
                    return Ok(Some(found));
                }
            }
            for i in 0..n {
                gp[i] -= step * self.d[[tt, i]];
            }
        }
        for i in 0..n {
            rem[i] += self.d[[tt, i]].abs() * self.inv_t;
        }
        Ok(None)
    }

    /// Full assignment: solve the linear system and test sign consistency.
    fn check_leaf(&self, assigned: &[i8]) -> Option<SignSystemSolution> {
        let (t, n) = self.d.dim();
        let mut g = vec![0.0; n];
        for tt in 0..t {
            let s = f64::from(assigned[tt]) * self.inv_t;
            for i in 0..n {
                g[i] += s * self.d[[tt, i]];
            }
        }
        if g.iter().any(|&gi| gi <= 0.0) {
            return None;
        }
        let inv_sum: f64 = g.iter().map(|gi| 1.0 / gi).sum();
        let lambda = 1.0 / inv_sum;
        let x: Vec<f64> = g.iter().map(|gi| lambda / gi).collect();

        let mut v = vec![0.0; t];
        let mut vmax = 0.0_f64;
        for tt in 0..t {
            let mut acc = 0.0;
            for i in 0..n {
                acc += self.d[[tt, i]] * x[i];
            }
            v[tt] = acc;
            vmax = vmax.max(acc.abs());
        }
        if vmax <= 0.0 {
            return None; // fully hedged portfolio: not an equal-risk solution
        }
        let mut worst = 0.0_f64;
        for tt in 0..t {
            let penalty = match assigned[tt] {
                1 => (-v[tt]).max(0.0),
                -1 => v[tt].max(0.0),
                _ => v[tt].abs(),
            };
            worst = worst.max(penalty);
        }
        let residual = worst / vmax;
        if residual > self.tol {
            return None;
        }
        Some(SignSystemSolution {
            weights: x,
            lambda,
            pattern: SignPattern {
                assignment: assigned.iter().map(|&s| Some(s)).collect(),
            },
            residual,
            nodes_visited: self.nodes,
        })
    }
}

/// A reference point near the equal-contribution portfolio, used only to
/// order the search (any vector would keep the search correct, just slower).
/// The scenario signs at the reference predict the consistent assignment, so
/// quality matters: each wrong predicted sign near the root of the tree costs
/// an exponential amount of backtracking. The least-squares relative-parity
/// minimizer is cheap at sign-search sizes and lands close enough that
/// typically every no-tie scenario sign is already right; the damped
/// fixed-point iteration x <- normalize(1/g(x)) is the fallback when that
/// minimization fails (it can stall short of the target, so it is only the
/// backup).
fn reference_point(scn: &ScenarioMatrix) -> Vec<f64> {
    if let Ok(out) = minimize_parity(
        scn,
        ParityObjective::Relative,
        &default_starts(scn, 4),
        300,
    ) {
        return out.x;
    }
    let n = scn.n_assets();
    let mut x = vec![1.0 / n as f64; n];
    for _ in 0..40 {
        let Ok((g, _)) = mad_subgradient(scn, &x, TieRule::Zero) else {
            break;
        };
        if g.iter().any(|&gi| gi <= 0.0) {
            break;
        }
        let inv: Vec<f64> = g.iter().map(|&gi| 1.0 / gi).collect();
        let total: f64 = inv.iter().sum();
        for i in 0..n {
            x[i] = 0.5 * x[i] + 0.5 * inv[i] / total;
        }
    }
    x
}

/// Runs the depth-first search. `tol` is the relative consistency residual
/// accepted at a leaf; `cap` and `node_budget` bound the search size.
pub fn search_sign_system(
    scn: &ScenarioMatrix,
    tol: f64,
    cap: usize,
    node_budget: usize,
) -> Result<SignSystemSolution> {
    let d = scn.deviations();
    let (t, n) = d.dim();
    if t > cap {
        return Err(Error::InvalidInput(format!(
            "{t} scenarios exceed the sign-search cap of {cap}; use a convex \
             formulation for long histories"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "sign-search tolerance must be positive, got {tol}"
        )));
    }

    let x_ref = reference_point(scn);
    let mut v_ref = vec![0.0; t];
    let mut vmax = 0.0_f64;
    for tt in 0..t {
        let mut acc = 0.0;
        for i in 0..n {
            acc += d[[tt, i]] * x_ref[i];
        }
        v_ref[tt] = acc;
        vmax = vmax.max(acc.abs());
    }

    let mut order: Vec<usize> = (0..t).collect();
    order.sort_by(|&a, &b| {
        v_ref[b]
            .abs()
            .partial_cmp(&v_ref[a].abs())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    // Preferred sign first, the opposite sign second, zero last: a zero sign
    // is only consistent when the scenario ties exactly at the solution, so on
    // generic data the flip is by far the likelier correction and trying zero
    // earlier would triple the wasted subtree under every wrong prediction.
    let candidates: Vec<[i8; 3]> = order
        .iter()
        .map(|&tt| {
            if v_ref[tt] > 1e-12 * vmax {
                [1, -1, 0]
            } else if v_ref[tt] < -1e-12 * vmax {
                [-1, 1, 0]
            } else {
                [0, 1, -1]
            }
        })
        .collect();

    let mut rem = vec![0.0; n];
    let inv_t = 1.0 / t as f64;
    for tt in 0..t {
        for i in 0..n {
            rem[i] += d[[tt, i]].abs() * inv_t;
        }
    }

    let mut search = Search {
        d,
        inv_t,
        order,
        candidates,
        tol,
        budget: node_budget,
        nodes: 0,
    };
    let mut assigned = vec![0_i8; t];
    let mut gp = vec![0.0; n];
    match search.dfs(0, &mut assigned, &mut gp, &mut rem)? {
        Some(found) => Ok(found),
        None => Err(Error::SignSystem(
            "no scenario sign assignment in {-1,0,+1} is consistent with an \
             equal-contribution solution; the portfolio may still exist at a kink \
             requiring a fractional sign — fall back to a convex formulation such \
             as log_constr"
                .into(),
        )),
    }
}
