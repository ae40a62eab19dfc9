//! Dense primal-dual interior-point solver for linear programs
//!
//!   min c'x   s.t.  A x = b,  G x <= h,  l <= x <= u.
//!
//! Mehrotra predictor-corrector on the normal equations. Everything is dense
//! and single-threaded with a fixed summation order.

use ndarray::{Array1, Array2};
use serde::Serialize;

use crate::{Error, Result};

use super::linalg::{cholesky_factor, cholesky_solve_factored};

/// Problem statement. Missing parts mean "none".
#[derive(Clone, Debug)]
pub struct LinearProgram {
    pub c: Array1<f64>,
    pub a_eq: Option<Array2<f64>>,
    pub b_eq: Option<Array1<f64>>,
    pub g_ineq: Option<Array2<f64>>,
    pub h_ineq: Option<Array1<f64>>,
    /// Per-variable bounds; entries may be -inf / +inf.
    pub lower: Option<Array1<f64>>,
    pub upper: Option<Array1<f64>>,
}

impl LinearProgram {
    pub fn new(c: Array1<f64>) -> Self {
        Self {
            c,
            a_eq: None,
            b_eq: None,
            g_ineq: None,
            h_ineq: None,
            lower: None,
            upper: None,
        }
    }

    pub fn with_eq(mut self, a: Array2<f64>, b: Array1<f64>) -> Self {
        self.a_eq = Some(a);
        self.b_eq = Some(b);
        self
    }

    pub fn with_ineq(mut self, g: Array2<f64>, h: Array1<f64>) -> Self {
        self.g_ineq = Some(g);
        self.h_ineq = Some(h);
        self
    }

    pub fn with_lower(mut self, l: Array1<f64>) -> Self {
        self.lower = Some(l);
        self
    }

    pub fn with_upper(mut self, u: Array1<f64>) -> Self {
        self.upper = Some(u);
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if n == 0 {
            return Err(Error::InvalidInput("empty objective".into()));
        }
        match (&self.a_eq, &self.b_eq) {
            (Some(a), Some(b)) => {
                if a.ncols() != n || a.nrows() != b.len() {
                    return Err(Error::InvalidInput(format!(
                        "equality block {}x{} vs rhs {} and n={n}",
                        a.nrows(),
                        a.ncols(),
                        b.len()
                    )));
                }
            }
            (None, None) => {}
            _ => return Err(Error::InvalidInput("equality matrix without rhs".into())),
        }
        match (&self.g_ineq, &self.h_ineq) {
            (Some(g), Some(h)) => {
                if g.ncols() != n || g.nrows() != h.len() {
                    return Err(Error::InvalidInput(format!(
                        "inequality block {}x{} vs rhs {} and n={n}",
                        g.nrows(),
                        g.ncols(),
                        h.len()
                    )));
                }
            }
            (None, None) => {}
            _ => return Err(Error::InvalidInput("inequality matrix without rhs".into())),
        }
        for (name, v) in [("lower", &self.lower), ("upper", &self.upper)] {
            if let Some(v) = v {
                if v.len() != n {
                    return Err(Error::InvalidInput(format!(
                        "{name} bounds have {} entries for n={n}",
                        v.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Termination report; `status == Optimal` guarantees the scaled KKT
/// residual (primal, dual, complementarity) is at or below the tolerance.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SolveStatus {
    pub status: Status,
    pub iterations: usize,
    pub kkt_residual: f64,
}

struct Standardized {
    g: Array2<f64>,
    h: Array1<f64>,
    a: Array2<f64>,
    b: Array1<f64>,
}

/// Folds bounds into inequality rows so the core solver sees one G x <= h.
fn standardize(lp: &LinearProgram) -> Standardized {
    let n = lp.c.len();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut rhs: Vec<f64> = Vec::new();
    if let (Some(g), Some(h)) = (&lp.g_ineq, &lp.h_ineq) {
        for r in 0..g.nrows() {
            rows.push(g.row(r).to_vec());
            rhs.push(h[r]);
        }
    }
    if let Some(u) = &lp.upper {
        for i in 0..n {
            if u[i].is_finite() {
                let mut row = vec![0.0; n];
                row[i] = 1.0;
                rows.push(row);
                rhs.push(u[i]);
            }
        }
    }
    if let Some(l) = &lp.lower {
        for i in 0..n {
            if l[i].is_finite() {
                let mut row = vec![0.0; n];
                row[i] = -1.0;
                rows.push(row);
                rhs.push(-l[i]);
            }
        }
    }
    let m = rows.len();
    let mut g = Array2::zeros((m, n));
    let mut h = Array1::zeros(m);
    for (r, row) in rows.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            g[[r, i]] = v;
        }
        h[r] = rhs[r];
    }
    let (a, b) = match (&lp.a_eq, &lp.b_eq) {
        (Some(a), Some(b)) => (a.clone(), b.clone()),
        _ => (Array2::zeros((0, n)), Array1::zeros(0)),
    };
    Standardized { g, h, a, b }
}

fn inf_norm(v: &Array1<f64>) -> f64 {
    v.iter().fold(0.0_f64, |m, &x| m.max(x.abs()))
}

/// Largest alpha in (0, 1] keeping v + alpha dv >= (1 - frac) * v elementwise
/// positive; standard fraction-to-the-boundary rule.
fn max_step(v: &Array1<f64>, dv: &Array1<f64>, frac: f64) -> f64 {
    let mut alpha = 1.0_f64;
    for i in 0..v.len() {
        if dv[i] < 0.0 {
            alpha = alpha.min(-frac * v[i] / dv[i]);
        }
    }
    alpha
}

/// KKT-system solve shared by predictor and corrector: given the factored
/// normal matrix, returns (dx, dy) for
///   H dx + A' dy = q,   A dx = -r_p.
fn kkt_solve(
    l_h: &Array2<f64>,
    a: &Array2<f64>,
    q: &Array1<f64>,
    r_p: &Array1<f64>,
) -> Option<(Array1<f64>, Array1<f64>)> {
    let p = a.nrows();
    let x1 = cholesky_solve_factored(l_h, q);
    if p == 0 {
        return Some((x1, Array1::zeros(0)));
    }
    let n = a.ncols();
    // columns of X2 = H^{-1} A'
    let mut x2 = Array2::zeros((n, p));
    for j in 0..p {
        let col = Array1::from_iter(a.row(j).iter().cloned());
        let sol = cholesky_solve_factored(l_h, &col);
        for i in 0..n {
            x2[[i, j]] = sol[i];
        }
    }
    // Schur complement S = A X2, rhs A x1 + r_p
    let mut s = Array2::zeros((p, p));
    for i in 0..p {
        for j in 0..p {
            let mut acc = 0.0;
            for k in 0..n {
                acc += a[[i, k]] * x2[[k, j]];
            }
            s[[i, j]] = acc;
        }
    }
    let mut rhs = Array1::zeros(p);
    for i in 0..p {
        let mut acc = r_p[i];
        for k in 0..n {
            acc += a[[i, k]] * x1[k];
        }
        rhs[i] = acc;
    }
    if !cholesky_factor(&mut s) {
        return None;
    }
    let dy = cholesky_solve_factored(&s, &rhs);
    let mut dx = x1;
    for i in 0..n {
        let mut acc = dx[i];
        for j in 0..p {
            acc -= x2[[i, j]] * dy[j];
        }
        dx[i] = acc;
    }
    Some((dx, dy))
}

/// Solves the LP. Infeasibility and unboundedness are reported through the
/// status (detected via Farkas-type certificates on diverging iterates).
pub fn solve_lp(
    lp: &LinearProgram,
    tol: f64,
    max_iter: usize,
) -> Result<(Array1<f64>, SolveStatus)> {
    lp.validate()?;
    let n = lp.c.len();
    let std_form = standardize(lp);
    let (g, h, a, b) = (&std_form.g, &std_form.h, &std_form.a, &std_form.b);
    let m = g.nrows();
    let p = a.nrows();
    if m == 0 {
        return Err(Error::InvalidInput(
            "LP has no inequality constraints or finite bounds".into(),
        ));
    }

    let c_scale = 1.0 + inf_norm(&lp.c);
    let b_scale = 1.0 + inf_norm(b);
    let h_scale = 1.0 + inf_norm(h);

    let mut x = Array1::zeros(n);
    let mut y = Array1::zeros(p);
    let mut s = Array1::from_elem(m, 1.0);
    for i in 0..m {
        let gap = h[i]; // G x0 = 0
        s[i] = gap.max(1.0);
    }
    let mut z = Array1::from_elem(m, 1.0);

    let mut best_res = f64::INFINITY;
    for iter in 0..max_iter {
        // residuals
        let mut r_d = lp.c.clone();
        for j in 0..p {
            for i in 0..n {
                r_d[i] += a[[j, i]] * y[j];
            }
        }
        for j in 0..m {
            for i in 0..n {
                r_d[i] += g[[j, i]] * z[j];
            }
        }
        let mut r_p = Array1::zeros(p);
        for j in 0..p {
            let mut acc = -b[j];
            for i in 0..n {
                acc += a[[j, i]] * x[i];
            }
            r_p[j] = acc;
        }
        let mut r_g = Array1::zeros(m);
        for j in 0..m {
            let mut acc = s[j] - h[j];
            for i in 0..n {
                acc += g[[j, i]] * x[i];
            }
            r_g[j] = acc;
        }
        let mut mu = 0.0;
        for i in 0..m {
            mu += s[i] * z[i];
        }
        mu /= m as f64;
        let obj: f64 = lp.c.iter().zip(x.iter()).map(|(ci, xi)| ci * xi).sum();

        let res = (inf_norm(&r_d) / c_scale)
            .max(inf_norm(&r_p) / b_scale)
            .max(inf_norm(&r_g) / h_scale)
            .max(mu / (1.0 + obj.abs()));
        best_res = best_res.min(res);
        if res <= tol {
            return Ok((
                x,
                SolveStatus {
                    status: Status::Optimal,
                    iterations: iter,
                    kkt_residual: res,
                },
            ));
        }

        // divergence certificates
        let dual_norm = inf_norm(&z).max(inf_norm(&y));
        if dual_norm > 1e8 {
            // Farkas: A'y + G'z ~ 0, z >= 0, b'y + h'z < 0 proves primal infeasible
            let mut at = Array1::zeros(n);
            for j in 0..p {
                for i in 0..n {
                    at[i] += a[[j, i]] * y[j] / dual_norm;
                }
            }
            for j in 0..m {
                for i in 0..n {
                    at[i] += g[[j, i]] * z[j] / dual_norm;
                }
            }
            let val: f64 = (0..p).map(|j| b[j] * y[j] / dual_norm).sum::<f64>()
                + (0..m).map(|j| h[j] * z[j] / dual_norm).sum::<f64>();
            if inf_norm(&at) < 1e-6 && val < -1e-8 {
                return Ok((
                    x,
                    SolveStatus {
                        status: Status::Infeasible,
                        iterations: iter,
                        kkt_residual: res,
                    },
                ));
            }
        }
        let x_norm = inf_norm(&x);
        if x_norm > 1e8 {
            // primal ray: A xr ~ 0, G xr <~ 0, c'xr < 0 proves unbounded
            let xr: Array1<f64> = x.mapv(|v| v / x_norm);
            let mut ok = true;
            for j in 0..p {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += a[[j, i]] * xr[i];
                }
                if acc.abs() > 1e-6 {
                    ok = false;
                }
            }
            for j in 0..m {
                let mut acc = 0.0;
                for i in 0..n {
                    acc += g[[j, i]] * xr[i];
                }
                if acc > 1e-6 {
                    ok = false;
                }
            }
            let cx: f64 = lp.c.iter().zip(xr.iter()).map(|(ci, xi)| ci * xi).sum();
            if ok && cx < -1e-8 {
                return Ok((
                    x,
                    SolveStatus {
                        status: Status::Unbounded,
                        iterations: iter,
                        kkt_residual: res,
                    },
                ));
            }
        }

        // normal matrix H = G' diag(z/s) G with a tiny ridge
        let d: Vec<f64> = (0..m).map(|i| z[i] / s[i]).collect();
        let mut hn = Array2::zeros((n, n));
        for j in 0..m {
            let dj = d[j];
            for i in 0..n {
                let gji = g[[j, i]];
                if gji == 0.0 {
                    continue;
                }
                for k in i..n {
                    hn[[i, k]] += dj * gji * g[[j, k]];
                }
            }
        }
        for i in 0..n {
            for k in 0..i {
                hn[[i, k]] = hn[[k, i]];
            }
        }
        let mut trace = 0.0;
        for i in 0..n {
            trace += hn[[i, i]];
        }
        let mut ridge = 1e-13 * (1.0 + trace / n as f64);
        let l_h = loop {
            let mut trial = hn.clone();
            for i in 0..n {
                trial[[i, i]] += ridge;
            }
            if cholesky_factor(&mut trial) {
                break trial;
            }
            ridge *= 100.0;
            if ridge > 1e6 {
                return Ok((
                    x,
                    SolveStatus {
                        status: Status::IterationLimit,
                        iterations: iter,
                        kkt_residual: best_res,
                    },
                ));
            }
        };

        // shared pieces: dz = -rzs/s + D rg + D G dx, q = -r_d + G'(rzs/s - D rg)
        let solve_with = |rzs: &Array1<f64>| -> Option<(Array1<f64>, Array1<f64>, Array1<f64>, Array1<f64>)> {
            let mut q = -&r_d;
            for j in 0..m {
                let w = rzs[j] / s[j] - d[j] * r_g[j];
                for i in 0..n {
                    q[i] += g[[j, i]] * w;
                }
            }
            let (dx, dy) = kkt_solve(&l_h, a, &q, &r_p)?;
            let mut ds = Array1::zeros(m);
            for j in 0..m {
                let mut acc = -r_g[j];
                for i in 0..n {
                    acc -= g[[j, i]] * dx[i];
                }
                ds[j] = acc;
            }
            let mut dz = Array1::zeros(m);
            for j in 0..m {
                dz[j] = -(rzs[j] + z[j] * ds[j]) / s[j];
            }
            Some((dx, dy, ds, dz))
        };

        // predictor (affine scaling)
        let rzs_aff: Array1<f64> = Array1::from_iter((0..m).map(|j| s[j] * z[j]));
        let Some((dx_a, _dy_a, ds_a, dz_a)) = solve_with(&rzs_aff) else {
            return Ok((
                x,
                SolveStatus {
                    status: Status::IterationLimit,
                    iterations: iter,
                    kkt_residual: best_res,
                },
            ));
        };
        let ap = max_step(&s, &ds_a, 1.0).min(1.0);
        let ad = max_step(&z, &dz_a, 1.0).min(1.0);
        let mut mu_aff = 0.0;
        for j in 0..m {
            mu_aff += (s[j] + ap * ds_a[j]) * (z[j] + ad * dz_a[j]);
        }
        mu_aff /= m as f64;
        let sigma = (mu_aff / mu).powi(3).clamp(0.0, 1.0);

        // corrector
        let rzs: Array1<f64> =
            Array1::from_iter((0..m).map(|j| s[j] * z[j] + ds_a[j] * dz_a[j] - sigma * mu));
        let Some((dx, dy, ds, dz)) = solve_with(&rzs) else {
            return Ok((
                x,
                SolveStatus {
                    status: Status::IterationLimit,
                    iterations: iter,
                    kkt_residual: best_res,
                },
            ));
        };
        let _ = dx_a;
        let ap = max_step(&s, &ds, 0.995).min(1.0);
        let ad = max_step(&z, &dz, 0.995).min(1.0);
        for i in 0..n {
            x[i] += ap * dx[i];
        }
        for j in 0..m {
            s[j] += ap * ds[j];
        }
        for j in 0..p {
            y[j] += ad * dy[j];
        }
        for j in 0..m {
            z[j] += ad * dz[j];
        }
    }

    Ok((
        x,
        SolveStatus {
            status: Status::IterationLimit,
            iterations: max_iter,
            kkt_residual: best_res,
        },
    ))
}
