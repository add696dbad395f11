//! Weighted least-absolute-deviation minimization: `min_β Σ_k w_k |c_k − β'd_k|`.
//!
//! The objective is convex piecewise linear. It is minimized by a primal-dual
//! interior-point method on the equivalent bounded-variable linear program
//! (Mehrotra predictor-corrector on the dual box form), followed by a
//! deterministic weighted-median coordinate-descent polish. The interior
//! point iterations also produce a certified lower bound on the optimum, so
//! convergence is reported from a duality-gap certificate rather than from
//! step sizes.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::{Error, Result};

/// One LAD row: `weight · |response − β'design|`.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObservation {
    pub response: f64,
    pub design: Vec<f64>,
    pub weight: f64,
}

/// Solver outcome summary.
#[derive(Debug, Clone, PartialEq)]
pub struct SolveDiagnostics {
    /// Objective value at the returned point (including constant rows).
    pub objective: f64,
    /// Interior-point iterations performed.
    pub iterations: usize,
    /// Euclidean norm of the minimum-norm subdifferential element found at
    /// the returned point.
    pub subgradient_gap: f64,
    /// True when the duality-gap certificate proves the objective is within
    /// the relative tolerance of the global minimum (and the subgradient gap
    /// is small on the same scale).
    pub converged: bool,
}

/// Exact objective `Σ_k w_k |c_k − β'd_k|`.
pub fn objective_value(rows: &[PseudoObservation], beta: &[f64]) -> f64 {
    rows.iter()
        .map(|r| {
            let fitted: f64 = r.design.iter().zip(beta).map(|(d, b)| d * b).sum();
            r.weight * (r.response - fitted).abs()
        })
        .sum()
}

/// Smallest minimizer of `Σ w_k |x − x_k|` over the given `(value, weight)`
/// points. Zero-weight points are ignored; weights must be nonnegative and
/// finite, and at least one must be positive.
pub fn weighted_median(points: &[(f64, f64)]) -> Result<f64> {
    let mut pts = Vec::with_capacity(points.len());
    for &(x, w) in points {
        if !x.is_finite() || !w.is_finite() || w < 0.0 {
            return Err(Error::InvalidInput(format!(
                "weighted median requires finite values and nonnegative weights, got ({x}, {w})"
            )));
        }
        if w > 0.0 {
            pts.push((x, w));
        }
    }
    if pts.is_empty() {
        return Err(Error::InvalidInput(
            "weighted median of no positive-weight points".into(),
        ));
    }
    Ok(weighted_median_inplace(&mut pts))
}

/// Minimize the weighted LAD objective.
///
/// `init` fixes the dimension `p` and serves as a descent reference: the
/// returned point never has a larger objective than `init`. Zero-design rows
/// contribute a constant and are excluded from the solve; the weighted design
/// of the remaining rows must have full column rank.
pub fn minimize_lad(
    rows: &[PseudoObservation],
    init: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveDiagnostics)> {
    let p = init.len();
    if p == 0 {
        return Err(Error::InvalidInput("empty coefficient vector".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let problem = LadProblem::from_rows(rows, p)?;
    problem.solve(init, tol, max_iter)
}

/// Scaled active rows of a LAD instance: row `k` holds `(w_k c_k, w_k d_k)`,
/// so the objective is `Σ_k |resp_k − β'design_k| + constant`.
pub(crate) struct LadProblem {
    pub(crate) p: usize,
    pub(crate) resp: Vec<f64>,
    /// Row-major `n × p`.
    pub(crate) design: Vec<f64>,
    /// Σ w|c| over positive-weight rows with a zero design vector.
    pub(crate) constant: f64,
}

impl LadProblem {
    pub(crate) fn from_rows(rows: &[PseudoObservation], p: usize) -> Result<Self> {
        let mut problem = LadProblem {
            p,
            resp: Vec::new(),
            design: Vec::new(),
            constant: 0.0,
        };
        let mut any_weighted = false;
        for (k, row) in rows.iter().enumerate() {
            if row.design.len() != p {
                return Err(Error::InvalidInput(format!(
                    "row {k} has design length {}, expected {p}",
                    row.design.len()
                )));
            }
            if !row.response.is_finite()
                || !row.weight.is_finite()
                || row.design.iter().any(|d| !d.is_finite())
            {
                return Err(Error::InvalidInput(format!("row {k} has nonfinite entries")));
            }
            if row.weight < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "row {k} has negative weight {}",
                    row.weight
                )));
            }
            if row.weight == 0.0 {
                continue;
            }
            any_weighted = true;
            problem.push_scaled(row.response, &row.design, row.weight);
        }
        if !any_weighted {
            return Err(Error::InvalidInput("no rows with positive weight".into()));
        }
        Ok(problem)
    }

    pub(crate) fn new(p: usize) -> Self {
        LadProblem {
            p,
            resp: Vec::new(),
            design: Vec::new(),
            constant: 0.0,
        }
    }

    /// Append `w |c − β'd|`, folding the weight into the stored row.
    pub(crate) fn push_scaled(&mut self, c: f64, d: &[f64], w: f64) {
        debug_assert_eq!(d.len(), self.p);
        if w <= 0.0 {
            return;
        }
        if d.iter().all(|&v| v == 0.0) {
            self.constant += w * c.abs();
            return;
        }
        self.resp.push(w * c);
        self.design.extend(d.iter().map(|&v| w * v));
    }

    pub(crate) fn n_rows(&self) -> usize {
        self.resp.len()
    }

    fn row(&self, k: usize) -> &[f64] {
        &self.design[k * self.p..(k + 1) * self.p]
    }

    pub(crate) fn objective(&self, beta: &[f64]) -> f64 {
        let p = self.p;
        let mut total = self.constant;
        for k in 0..self.n_rows() {
            let fitted: f64 = self.design[k * p..(k + 1) * p]
                .iter()
                .zip(beta)
                .map(|(d, b)| d * b)
                .sum();
            total += (self.resp[k] - fitted).abs();
        }
        total
    }

    /// Error unless the scaled design has full column rank; on failure the
    /// error names a unit vector in the null space.
    fn rank_check(&self) -> Result<()> {
        let p = self.p;
        let mut gram = DMatrix::<f64>::zeros(p, p);
        for k in 0..self.n_rows() {
            let row = self.row(k);
            for i in 0..p {
                for j in i..p {
                    gram[(i, j)] += row[i] * row[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                gram[(i, j)] = gram[(j, i)];
            }
        }
        let eig = gram.symmetric_eigen();
        let max_e = eig.eigenvalues.iter().cloned().fold(0.0_f64, f64::max);
        let (min_idx, &min_e) = eig
            .eigenvalues
            .iter()
            .enumerate()
            .min_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        if max_e <= 0.0 || min_e <= 1e-10 * max_e {
            let dir: Vec<f64> = eig.eigenvectors.column(min_idx).iter().cloned().collect();
            return Err(Error::RankDeficient(dir));
        }
        Ok(())
    }

    pub(crate) fn solve(
        &self,
        init: &[f64],
        tol: f64,
        max_iter: usize,
    ) -> Result<(Vec<f64>, SolveDiagnostics)> {
        assert_eq!(init.len(), self.p);
        self.rank_check()?;

        let (mut beta, iterations, mut best_lower) = self.interior_point(tol, max_iter);
        self.polish(&mut beta);

        // Descent guarantee relative to the caller's starting point.
        if self.objective(&beta) > self.objective(init) {
            let mut fallback = init.to_vec();
            self.polish(&mut fallback);
            if self.objective(&fallback) < self.objective(&beta) {
                beta = fallback;
            }
        }

        let objective = self.objective(&beta);
        // The lower bound can never exceed the optimum, so clamp it below the
        // achieved value for the gap computation.
        best_lower = best_lower.min(objective);
        let rel_gap = (objective - best_lower) / (1.0 + objective.abs());
        let subgradient_gap = self.subgradient_gap(&beta, tol);
        let grad_scale: f64 = (0..self.n_rows())
            .map(|k| self.row(k).iter().map(|d| d * d).sum::<f64>().sqrt())
            .sum();
        let converged = rel_gap <= tol && subgradient_gap <= tol * (1.0 + grad_scale);

        Ok((
            beta,
            SolveDiagnostics {
                objective,
                iterations,
                subgradient_gap,
                converged,
            },
        ))
    }

    /// Mehrotra predictor-corrector on the dual box LP
    /// `max c̃'a  s.t.  D̃'a = ½D̃'1, a ∈ [0,1]^n`;
    /// the equality multipliers recover `β̂ = −λ`. Returns the iterate, the
    /// iteration count, and the best certified lower bound on the objective.
    fn interior_point(&self, tol: f64, max_iter: usize) -> (Vec<f64>, usize, f64) {
        let n = self.n_rows();
        let p = self.p;
        let resp = &self.resp;
        let sum_resp: f64 = resp.iter().sum();

        // b = ½ D̃'1
        let mut b = vec![0.0; p];
        for k in 0..n {
            for (j, d) in self.row(k).iter().enumerate() {
                b[j] += 0.5 * d;
            }
        }

        let scale_c = 1.0 + resp.iter().map(|c| c.abs()).sum::<f64>() / n as f64;
        let mut a = vec![0.5; n];
        let mut w = vec![0.5; n];
        let s0 = 0.5 * scale_c;
        // c_lp = −resp; pick z − q = c_lp with both strictly positive.
        let mut z: Vec<f64> = resp.iter().map(|&c| (-c).max(0.0) + s0).collect();
        let mut q: Vec<f64> = resp.iter().map(|&c| c.max(0.0) + s0).collect();
        let mut lambda = vec![0.0; p];

        let mut beta = vec![0.0; p];
        let mut best_lower = f64::NEG_INFINITY;
        let mut best_gap = f64::INFINITY;
        let mut stall = 0usize;
        let mut iterations = 0usize;

        let mut theta = vec![0.0; n];
        let mut rd = vec![0.0; n];
        let mut rp = vec![0.0; p];
        let mut rhs_n = vec![0.0; n];
        let mut da = vec![0.0; n];
        let mut dz = vec![0.0; n];
        let mut dq = vec![0.0; n];
        let mut da_c = vec![0.0; n];

        for iter in 0..max_iter {
            // Certified bound from the current (feasible) dual iterate:
            // F* ≥ 2 c̃'a − Σc̃.
            let lp_obj: f64 = resp.iter().zip(&a).map(|(c, ai)| c * ai).sum();
            let lower = 2.0 * lp_obj - sum_resp + self.constant;
            best_lower = best_lower.max(lower);
            for (bj, lj) in beta.iter_mut().zip(&lambda) {
                *bj = -lj;
            }
            let objective = self.objective(&beta);
            let rel_gap = (objective - best_lower).max(0.0) / (1.0 + objective.abs());
            if rel_gap <= 0.1 * tol {
                break;
            }
            if rel_gap < best_gap * 0.999 {
                best_gap = rel_gap;
                stall = 0;
            } else {
                stall += 1;
                if stall > 20 {
                    break;
                }
            }

            iterations = iter + 1;

            // Residuals.
            let mut mu = 0.0;
            for k in 0..n {
                let ax: f64 = self.row(k).iter().zip(&lambda).map(|(d, l)| d * l).sum();
                rd[k] = -resp[k] - ax - z[k] + q[k];
                mu += a[k] * z[k] + w[k] * q[k];
            }
            mu /= 2.0 * n as f64;
            for j in 0..p {
                rp[j] = b[j];
            }
            for k in 0..n {
                for (j, d) in self.row(k).iter().enumerate() {
                    rp[j] -= d * a[k];
                }
            }

            for k in 0..n {
                theta[k] = (z[k] / a[k] + q[k] / w[k]).clamp(1e-16, 1e16);
            }
            let chol = match self.factor_normal(&theta) {
                Some(c) => c,
                None => break,
            };

            // Affine direction: complementarity targets −a∘z and −w∘q, which
            // reduce the dual residual combination to rd + z − q.
            for k in 0..n {
                rhs_n[k] = rd[k] + z[k] - q[k];
            }
            self.solve_direction(&chol, &theta, &rp, &rhs_n, &mut da);
            for k in 0..n {
                dz[k] = -z[k] - z[k] / a[k] * da[k];
                dq[k] = -q[k] + q[k] / w[k] * da[k];
            }
            let alpha_p_aff = max_step(&a, &da, &w, true);
            let alpha_d_aff = max_step(&z, &dz, &q, false).min(max_step_single(&q, &dq));
            let mut mu_aff = 0.0;
            for k in 0..n {
                mu_aff += (a[k] + alpha_p_aff * da[k]) * (z[k] + alpha_d_aff * dz[k])
                    + (w[k] - alpha_p_aff * da[k]) * (q[k] + alpha_d_aff * dq[k]);
            }
            mu_aff /= 2.0 * n as f64;
            let sigma = if mu > 0.0 {
                (mu_aff / mu).clamp(0.0, 1.0).powi(3)
            } else {
                0.0
            };

            // Corrector reusing the affine factorization.
            da_c.copy_from_slice(&da);
            for k in 0..n {
                let rc1 = -a[k] * z[k] + sigma * mu - da_c[k] * dz[k];
                let rc2 = -w[k] * q[k] + sigma * mu + da_c[k] * dq[k];
                rhs_n[k] = rd[k] - rc1 / a[k] + rc2 / w[k];
            }
            let dlambda = self.solve_direction(&chol, &theta, &rp, &rhs_n, &mut da);
            for k in 0..n {
                let rc1 = -a[k] * z[k] + sigma * mu - da_c[k] * dz[k];
                let rc2 = -w[k] * q[k] + sigma * mu + da_c[k] * dq[k];
                dz[k] = (rc1 - z[k] * da[k]) / a[k];
                dq[k] = (rc2 + q[k] * da[k]) / w[k];
            }

            let alpha_p = (0.9995 * max_step(&a, &da, &w, true)).min(1.0);
            let alpha_d = (0.9995 * max_step(&z, &dz, &q, false).min(max_step_single(&q, &dq))).min(1.0);

            for j in 0..p {
                lambda[j] += alpha_d * dlambda[j];
            }
            for k in 0..n {
                a[k] += alpha_p * da[k];
                w[k] -= alpha_p * da[k];
                z[k] += alpha_d * dz[k];
                q[k] += alpha_d * dq[k];
            }

            if mu < 1e-14 * scale_c {
                break;
            }
        }

        for (bj, lj) in beta.iter_mut().zip(&lambda) {
            *bj = -lj;
        }
        (beta, iterations, best_lower)
    }

    fn factor_normal(&self, theta: &[f64]) -> Option<Cholesky<f64, nalgebra::Dyn>> {
        let p = self.p;
        let mut m = DMatrix::<f64>::zeros(p, p);
        for k in 0..self.n_rows() {
            let row = self.row(k);
            let inv_t = 1.0 / theta[k];
            for i in 0..p {
                let ri = row[i] * inv_t;
                for j in i..p {
                    m[(i, j)] += ri * row[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                m[(i, j)] = m[(j, i)];
            }
        }
        let trace = m.trace().max(f64::MIN_POSITIVE);
        let mut ridge = 0.0;
        loop {
            let mut trial = m.clone();
            for i in 0..p {
                trial[(i, i)] += ridge;
            }
            if let Some(c) = Cholesky::new(trial) {
                return Some(c);
            }
            ridge = if ridge == 0.0 { 1e-14 * trace } else { ridge * 100.0 };
            if ridge > 1e-2 * trace {
                return None;
            }
        }
    }

    /// Solve `M dλ = rp + D̃'(rhs_n/θ)`, fill `da = (D̃ dλ − rhs_n)/θ`, and
    /// return `dλ`.
    fn solve_direction(
        &self,
        chol: &Cholesky<f64, nalgebra::Dyn>,
        theta: &[f64],
        rp: &[f64],
        rhs_n: &[f64],
        da: &mut [f64],
    ) -> Vec<f64> {
        let n = self.n_rows();
        let mut rhs = DVector::<f64>::from_column_slice(rp);
        for k in 0..n {
            let s = rhs_n[k] / theta[k];
            for (j, d) in self.row(k).iter().enumerate() {
                rhs[j] += d * s;
            }
        }
        let dlambda = chol.solve(&rhs);
        for k in 0..n {
            let dd: f64 = self.row(k).iter().zip(dlambda.iter()).map(|(d, l)| d * l).sum();
            da[k] = (dd - rhs_n[k]) / theta[k];
        }
        dlambda.iter().cloned().collect()
    }

    /// Weighted-median coordinate descent; each coordinate step is an exact
    /// one-dimensional minimization, so the objective never increases.
    pub(crate) fn polish(&self, beta: &mut [f64]) {
        let p = self.p;
        let n = self.n_rows();
        if n == 0 {
            return;
        }
        let mut residual = vec![0.0; n];
        let refresh = |beta: &[f64], residual: &mut [f64]| {
            for k in 0..n {
                let fitted: f64 = self.row(k).iter().zip(beta).map(|(d, b)| d * b).sum();
                residual[k] = self.resp[k] - fitted;
            }
        };
        refresh(beta, &mut residual);
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(n);

        for sweep in 0..60 {
            if sweep > 0 && sweep % 10 == 0 {
                refresh(beta, &mut residual);
            }
            let mut moved = 0.0_f64;
            for j in 0..p {
                pts.clear();
                for k in 0..n {
                    let dkj = self.design[k * p + j];
                    if dkj != 0.0 {
                        pts.push((beta[j] + residual[k] / dkj, dkj.abs()));
                    }
                }
                if pts.is_empty() {
                    continue;
                }
                let new_j = weighted_median_inplace(&mut pts);
                let delta = new_j - beta[j];
                if delta != 0.0 && delta.is_finite() {
                    for k in 0..n {
                        residual[k] -= self.design[k * p + j] * delta;
                    }
                    beta[j] = new_j;
                    moved = moved.max(delta.abs() / (1.0 + new_j.abs()));
                }
            }
            if moved <= 1e-14 {
                break;
            }
        }
    }

    /// Norm of the minimum-norm element of the subdifferential at `beta`,
    /// estimated with an active-set tolerance and a small projected descent.
    /// The activity threshold accounts for `beta` itself only being accurate
    /// to the solve tolerance: a row within `‖d̃_k‖·O(tol·‖β‖)` of zero may be
    /// exactly active at the nearby optimum.
    fn subgradient_gap(&self, beta: &[f64], tol: f64) -> f64 {
        let p = self.p;
        let n = self.n_rows();
        let beta_scale = 1.0 + beta.iter().map(|b| b.abs()).sum::<f64>();
        let mut g0 = vec![0.0; p];
        let mut active: Vec<usize> = Vec::new();
        for k in 0..n {
            let row = self.row(k);
            let fitted: f64 = row.iter().zip(beta).map(|(d, b)| d * b).sum();
            let r = self.resp[k] - fitted;
            let row_scale: f64 = row.iter().map(|d| d.abs()).sum();
            let eps = 1e-9 * (1.0 + self.resp[k].abs()) + 10.0 * tol * beta_scale * row_scale;
            if r.abs() <= eps {
                if active.len() < 512 {
                    active.push(k);
                }
            } else {
                let s = r.signum();
                for (j, d) in row.iter().enumerate() {
                    g0[j] -= d * s;
                }
            }
        }
        if active.is_empty() {
            return norm2(&g0);
        }
        // min over t ∈ [−1,1]^A of ‖g0 − Σ_A d̃_k t_k‖ by projected
        // coordinate descent.
        let mut t = vec![0.0; active.len()];
        let mut g = g0.clone();
        for _ in 0..40 {
            let mut changed = 0.0_f64;
            for (idx, &k) in active.iter().enumerate() {
                let row = self.row(k);
                let nrm2: f64 = row.iter().map(|d| d * d).sum();
                if nrm2 == 0.0 {
                    continue;
                }
                let proj: f64 = row.iter().zip(&g).map(|(d, gi)| d * gi).sum();
                let t_new = (t[idx] + proj / nrm2).clamp(-1.0, 1.0);
                let delta = t_new - t[idx];
                if delta != 0.0 {
                    for (j, d) in row.iter().enumerate() {
                        g[j] -= d * delta;
                    }
                    t[idx] = t_new;
                    changed = changed.max(delta.abs());
                }
            }
            if changed <= 1e-12 {
                break;
            }
        }
        norm2(&g)
    }
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Largest step keeping `x + α dx ≥ 0` and, when `paired`, `y − α dx ≥ 0`.
fn max_step(x: &[f64], dx: &[f64], y: &[f64], paired: bool) -> f64 {
    let mut alpha = f64::INFINITY;
    for k in 0..x.len() {
        if dx[k] < 0.0 {
            alpha = alpha.min(-x[k] / dx[k]);
        }
        if paired && dx[k] > 0.0 {
            alpha = alpha.min(y[k] / dx[k]);
        }
    }
    alpha.min(1e12)
}

fn max_step_single(x: &[f64], dx: &[f64]) -> f64 {
    let mut alpha = f64::INFINITY;
    for k in 0..x.len() {
        if dx[k] < 0.0 {
            alpha = alpha.min(-x[k] / dx[k]);
        }
    }
    alpha.min(1e12)
}

fn median3(a: f64, b: f64, c: f64) -> f64 {
    a.max(b.min(c)).min(b.max(c)).max(a.min(b).min(c))
}

/// In-place weighted median: smallest `v` with cumulative weight ≥ half the
/// total. Partitions the slice (quickselect), O(n) expected.
fn weighted_median_inplace(pts: &mut [(f64, f64)]) -> f64 {
    debug_assert!(!pts.is_empty());
    let total: f64 = pts.iter().map(|&(_, w)| w).sum();
    let target = 0.5 * total;
    let mut lo = 0usize;
    let mut hi = pts.len();
    let mut below = 0.0_f64;
    loop {
        if hi - lo == 1 {
            return pts[lo].0;
        }
        let pivot = median3(pts[lo].0, pts[lo + (hi - lo) / 2].0, pts[hi - 1].0);
        // Three-way partition of pts[lo..hi] around the pivot value.
        let (mut lt, mut i, mut gt) = (lo, lo, hi);
        let (mut w_lt, mut w_eq) = (0.0_f64, 0.0_f64);
        while i < gt {
            let v = pts[i].0;
            if v < pivot {
                w_lt += pts[i].1;
                pts.swap(lt, i);
                lt += 1;
                i += 1;
            } else if v > pivot {
                gt -= 1;
                pts.swap(i, gt);
            } else {
                w_eq += pts[i].1;
                i += 1;
            }
        }
        if below + w_lt >= target && lt > lo {
            hi = lt;
        } else if below + w_lt + w_eq >= target {
            return pivot;
        } else {
            below += w_lt + w_eq;
            lo = gt;
        }
    }
}
