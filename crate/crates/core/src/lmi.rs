//! Feasibility solver for small dense linear matrix inequalities.
//!
//! A problem is a decision vector `z` inside a box, a list of affine
//! symmetric constraints `F(z) = F0 + Σ zᵢ Fᵢ ≼ -margin·I`, and a list of
//! affine matrix constraints `G(z) = G0 + Σ zᵢ Gᵢ >= -slack` read entry by
//! entry.
//!
//! [`solve`] first propagates bounds through the entrywise constraints
//! (fixing variables that a constraint pins to one end of their box and
//! detecting contradictions that hold on the whole box), then runs a
//! log-det barrier method on the phase-1 problem
//!
//! ```text
//! minimize t  s.t.  F_k(z) + m_k I ≺ t I,   G_r(z) + s_r + t > 0,   lb < z < ub
//! ```
//!
//! and stops as soon as a centered iterate reaches `t < 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{cholesky, cholesky_inverse, cholesky_solve, lambda_max, solve_linear, Matrix, Vector};

pub const DEFAULT_MARGIN: f64 = 1e-6;
pub const DEFAULT_SLACK: f64 = 1e-9;
pub const DEFAULT_MAX_ITERS: usize = 50_000;

/// `F(z) ≼ -margin·I`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSense {
    NegDef { margin: f64 },
}

/// Every entry of `G(z)` is `>= -slack`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntrySense {
    GeqZero { slack: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixConstraint {
    pub constant: Matrix,
    /// One symmetric matrix per decision variable.
    pub coefficients: Vec<Matrix>,
    pub sense: MatrixSense,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElementwiseConstraint {
    pub constant: Matrix,
    /// One matrix per decision variable.
    pub coefficients: Vec<Matrix>,
    pub sense: EntrySense,
}

impl MatrixConstraint {
    pub fn margin(&self) -> f64 {
        match self.sense {
            MatrixSense::NegDef { margin } => margin,
        }
    }
}

impl ElementwiseConstraint {
    pub fn slack(&self) -> f64 {
        match self.sense {
            EntrySense::GeqZero { slack } => slack,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiFeasibilityProblem {
    pub dim: usize,
    pub matrix_constraints: Vec<MatrixConstraint>,
    pub elementwise_constraints: Vec<ElementwiseConstraint>,
    pub lower_bounds: Vec<f64>,
    pub upper_bounds: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LmiStatus {
    Feasible { z: Vector },
    /// Only returned with a certificate that holds on the whole box.
    Infeasible { reason: String },
    Undetermined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LmiOutcome {
    pub status: LmiStatus,
    pub iterations: usize,
    /// Largest normalized violation at the last iterate: `max_k(λ_max(F_k) + m_k)`
    /// and `max_r(-G_r - s_r)`. Non-positive means feasible.
    pub worst_violation: f64,
}

impl LmiOutcome {
    pub fn is_feasible(&self) -> bool {
        matches!(self.status, LmiStatus::Feasible { .. })
    }

    pub fn point(&self) -> Option<&Vector> {
        match &self.status {
            LmiStatus::Feasible { z } => Some(z),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Budget of Newton steps across all barrier stages.
    pub max_iters: usize,
    /// Barrier weight growth per stage.
    pub mu_growth: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { max_iters: DEFAULT_MAX_ITERS, mu_growth: 10.0 }
    }
}

/// Per-constraint margins at a candidate point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolutionCheck {
    pub pass: bool,
    /// `λ_max(F_k(z))` for each matrix constraint.
    pub matrix_lambda_max: Vec<f64>,
    /// Smallest entry of `G_k(z)` for each entrywise constraint.
    pub elementwise_min: Vec<f64>,
    pub bounds_ok: bool,
}

impl LmiFeasibilityProblem {
    /// A problem with `dim` variables in `[lower, upper]` and no constraints.
    pub fn new(dim: usize, lower: f64, upper: f64) -> Self {
        Self {
            dim,
            matrix_constraints: Vec::new(),
            elementwise_constraints: Vec::new(),
            lower_bounds: vec![lower; dim],
            upper_bounds: vec![upper; dim],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower_bounds.len() != self.dim || self.upper_bounds.len() != self.dim {
            return Err(Error::dim("bound vectors must have one entry per variable"));
        }
        for (i, (lo, hi)) in self.lower_bounds.iter().zip(&self.upper_bounds).enumerate() {
            if !lo.is_finite() || !hi.is_finite() || lo > hi {
                return Err(Error::invalid(format!("variable {i} has bounds [{lo}, {hi}]")));
            }
        }
        for (k, c) in self.matrix_constraints.iter().enumerate() {
            if !c.constant.is_square() {
                return Err(Error::dim(format!("matrix constraint {k} is not square")));
            }
            if c.coefficients.len() != self.dim {
                return Err(Error::dim(format!("matrix constraint {k} has {} coefficients", c.coefficients.len())));
            }
            if !(c.margin() >= 0.0) {
                return Err(Error::invalid(format!("matrix constraint {k} has a negative margin")));
            }
            for m in std::iter::once(&c.constant).chain(&c.coefficients) {
                if m.shape() != c.constant.shape() {
                    return Err(Error::dim(format!("matrix constraint {k} mixes block sizes")));
                }
                let asym = m.relative_asymmetry();
                if asym > crate::matcore::ASYMMETRY_TOL {
                    return Err(Error::Asymmetric(asym));
                }
            }
        }
        for (k, c) in self.elementwise_constraints.iter().enumerate() {
            if c.coefficients.len() != self.dim {
                return Err(Error::dim(format!(
                    "entrywise constraint {k} has {} coefficients",
                    c.coefficients.len()
                )));
            }
            if !(c.slack() >= 0.0) {
                return Err(Error::invalid(format!("entrywise constraint {k} has a negative slack")));
            }
            if c.coefficients.iter().any(|m| m.shape() != c.constant.shape()) {
                return Err(Error::dim(format!("entrywise constraint {k} mixes shapes")));
            }
        }
        Ok(())
    }
}

fn affine(constant: &Matrix, coefficients: &[Matrix], z: &[f64]) -> Matrix {
    let mut m = constant.clone();
    for (zi, c) in z.iter().zip(coefficients) {
        if *zi != 0.0 {
            m.axpy(*zi, c).expect("shapes validated");
        }
    }
    m
}

/// `F0 + Σ zᵢ Fᵢ` for matrix constraint `k`.
pub fn evaluate_matrix_constraint(p: &LmiFeasibilityProblem, k: usize, z: &[f64]) -> Result<Matrix> {
    let c = p
        .matrix_constraints
        .get(k)
        .ok_or_else(|| Error::invalid(format!("matrix constraint index {k} out of range")))?;
    check_len(p, z)?;
    Ok(affine(&c.constant, &c.coefficients, z))
}

/// `G0 + Σ zᵢ Gᵢ` for entrywise constraint `k`.
pub fn evaluate_elementwise_constraint(p: &LmiFeasibilityProblem, k: usize, z: &[f64]) -> Result<Matrix> {
    let c = p
        .elementwise_constraints
        .get(k)
        .ok_or_else(|| Error::invalid(format!("entrywise constraint index {k} out of range")))?;
    check_len(p, z)?;
    Ok(affine(&c.constant, &c.coefficients, z))
}

fn check_len(p: &LmiFeasibilityProblem, z: &[f64]) -> Result<()> {
    if z.len() != p.dim {
        return Err(Error::dim(format!("point of length {} for {} variables", z.len(), p.dim)));
    }
    Ok(())
}

/// Evaluates every constraint at `z`; passes when each holds to within
/// `report_tol` beyond its stated margin or slack.
pub fn check_solution(p: &LmiFeasibilityProblem, z: &[f64], report_tol: f64) -> Result<SolutionCheck> {
    check_len(p, z)?;
    let mut pass = true;
    let mut matrix_lambda_max = Vec::with_capacity(p.matrix_constraints.len());
    for (k, c) in p.matrix_constraints.iter().enumerate() {
        let lm = lambda_max(&evaluate_matrix_constraint(p, k, z)?)?;
        pass &= lm <= -c.margin() + report_tol;
        matrix_lambda_max.push(lm);
    }
    let mut elementwise_min = Vec::with_capacity(p.elementwise_constraints.len());
    for (k, c) in p.elementwise_constraints.iter().enumerate() {
        let mn = evaluate_elementwise_constraint(p, k, z)?.min_entry();
        pass &= mn >= -c.slack() - report_tol;
        elementwise_min.push(mn);
    }
    let bounds_ok = z
        .iter()
        .zip(p.lower_bounds.iter().zip(&p.upper_bounds))
        .all(|(v, (lo, hi))| *v >= lo - report_tol && *v <= hi + report_tol);
    Ok(SolutionCheck { pass: pass && bounds_ok, matrix_lambda_max, elementwise_min, bounds_ok })
}

fn worst_violation(p: &LmiFeasibilityProblem, z: &[f64]) -> f64 {
    match check_solution(p, z, 0.0) {
        Ok(chk) => {
            let m = chk
                .matrix_lambda_max
                .iter()
                .zip(&p.matrix_constraints)
                .map(|(lm, c)| lm + c.margin());
            let e = chk
                .elementwise_min
                .iter()
                .zip(&p.elementwise_constraints)
                .map(|(mn, c)| -mn - c.slack());
            m.chain(e).fold(f64::NEG_INFINITY, f64::max)
        }
        Err(_) => f64::INFINITY,
    }
}

// ---------------------------------------------------------------------------
// presolve

/// One scalar row `c0 + Σ aᵢ zᵢ >= -slack` taken from an entrywise constraint.
#[derive(Debug, Clone)]
struct Row {
    origin: (usize, usize, usize),
    constant: f64,
    coeffs: Vec<f64>,
    slack: f64,
}

struct Presolved {
    lb: Vec<f64>,
    ub: Vec<f64>,
    fixed: Vec<Option<f64>>,
    rows: Vec<Row>,
}

enum PresolveResult {
    Reduced(Presolved),
    Infeasible(String),
}

fn term_range(a: f64, lo: f64, hi: f64, fixed: Option<f64>) -> (f64, f64) {
    match fixed {
        Some(v) => (a * v, a * v),
        None => {
            let (x, y) = (a * lo, a * hi);
            (x.min(y), x.max(y))
        }
    }
}

fn presolve(p: &LmiFeasibilityProblem) -> PresolveResult {
    let lb = p.lower_bounds.clone();
    let ub = p.upper_bounds.clone();
    let mut fixed: Vec<Option<f64>> =
        lb.iter().zip(&ub).map(|(lo, hi)| if lo == hi { Some(*lo) } else { None }).collect();

    let mut rows = Vec::new();
    for (k, c) in p.elementwise_constraints.iter().enumerate() {
        for i in 0..c.constant.rows() {
            for j in 0..c.constant.cols() {
                rows.push(Row {
                    origin: (k, i, j),
                    constant: c.constant[(i, j)],
                    coeffs: c.coefficients.iter().map(|m| m[(i, j)]).collect(),
                    slack: c.slack(),
                });
            }
        }
    }

    loop {
        let mut changed = false;
        let mut keep = Vec::with_capacity(rows.len());
        for row in rows.drain(..) {
            let (mut lo_sum, mut hi_sum) = (row.constant, row.constant);
            let mut has_free = false;
            for (i, &a) in row.coeffs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                has_free |= fixed[i].is_none();
                let (lo, hi) = term_range(a, lb[i], ub[i], fixed[i]);
                lo_sum += lo;
                hi_sum += hi;
            }
            let (k, i, j) = row.origin;
            if hi_sum < -row.slack {
                return PresolveResult::Infeasible(format!(
                    "entry ({i},{j}) of entrywise constraint {k} is at most {hi_sum:e} on the whole box"
                ));
            }
            if !has_free || lo_sum >= -row.slack {
                // constant or implied by the box
                continue;
            }
            if hi_sum <= 0.0 {
                // row can only hold with every term at its maximizing bound
                for (v, &a) in row.coeffs.iter().enumerate() {
                    if a != 0.0 && fixed[v].is_none() {
                        fixed[v] = Some(if a > 0.0 { ub[v] } else { lb[v] });
                    }
                }
                changed = true;
                continue;
            }
            keep.push(row);
        }
        rows = keep;
        if !changed {
            break;
        }
    }

    // A negative definite block needs every diagonal entry below -margin.
    for (k, c) in p.matrix_constraints.iter().enumerate() {
        for d in 0..c.constant.rows() {
            let mut lo_sum = c.constant[(d, d)];
            for (v, m) in c.coefficients.iter().enumerate() {
                lo_sum += term_range(m[(d, d)], lb[v], ub[v], fixed[v]).0;
            }
            if lo_sum > -c.margin() {
                return PresolveResult::Infeasible(format!(
                    "diagonal entry {d} of matrix constraint {k} is at least {lo_sum:e} on the whole box"
                ));
            }
        }
    }

    PresolveResult::Reduced(Presolved { lb, ub, fixed, rows })
}

// ---------------------------------------------------------------------------
// barrier

/// Phase-1 data restricted to the free variables.
struct Phase1 {
    /// `F0 + Σ_fixed zᵢ Fᵢ + m I` per block.
    blocks: Vec<(Matrix, Vec<Matrix>)>,
    /// `(c0 + Σ_fixed aᵢ zᵢ + slack, free coefficients)`.
    rows: Vec<(f64, Vec<f64>)>,
    lb: Vec<f64>,
    ub: Vec<f64>,
}

struct Eval {
    value: f64,
    grad: Vec<f64>,
    hess: Matrix,
}

impl Phase1 {
    fn nfree(&self) -> usize {
        self.lb.len()
    }

    /// Barrier degree.
    fn nu(&self) -> f64 {
        let b: usize = self.blocks.iter().map(|(c, _)| c.rows()).sum();
        (b + self.rows.len() + 2 * self.nfree()) as f64
    }

    fn slack_matrix(&self, k: usize, y: &[f64]) -> Matrix {
        let (c0, coeffs) = &self.blocks[k];
        let n = self.nfree();
        let t = y[n];
        let mut s = Matrix::identity(c0.rows()).scale(t);
        s.axpy(-1.0, c0).expect("square");
        for (zi, f) in y[..n].iter().zip(coeffs) {
            if *zi != 0.0 {
                s.axpy(-zi, f).expect("square");
            }
        }
        s
    }

    fn row_value(&self, r: usize, y: &[f64]) -> f64 {
        let n = self.nfree();
        let (c0, a) = &self.rows[r];
        c0 + y[n] + a.iter().zip(&y[..n]).map(|(ai, zi)| ai * zi).sum::<f64>()
    }

    fn strictly_feasible(&self, y: &[f64]) -> bool {
        let n = self.nfree();
        (0..n).all(|i| y[i] > self.lb[i] && y[i] < self.ub[i])
            && (0..self.rows.len()).all(|r| self.row_value(r, y) > 0.0)
            && (0..self.blocks.len()).all(|k| cholesky(&self.slack_matrix(k, y)).is_some())
    }

    /// Barrier value only; `None` outside the domain.
    fn value(&self, mu: f64, y: &[f64]) -> Option<f64> {
        let n = self.nfree();
        let mut f = mu * y[n];
        for i in 0..n {
            let (a, b) = (y[i] - self.lb[i], self.ub[i] - y[i]);
            if !(a > 0.0 && b > 0.0) {
                return None;
            }
            f -= a.ln() + b.ln();
        }
        for r in 0..self.rows.len() {
            let v = self.row_value(r, y);
            if !(v > 0.0) {
                return None;
            }
            f -= v.ln();
        }
        for k in 0..self.blocks.len() {
            let l = cholesky(&self.slack_matrix(k, y))?;
            f -= 2.0 * l.diag().iter().map(|d| d.ln()).sum::<f64>();
        }
        f.is_finite().then_some(f)
    }

    fn evaluate(&self, mu: f64, y: &[f64]) -> Option<Eval> {
        let n = self.nfree();
        let d = n + 1;
        let value = self.value(mu, y)?;
        let mut grad = vec![0.0; d];
        let mut hess = Matrix::zeros(d, d);
        grad[n] = mu;

        for i in 0..n {
            let a = y[i] - self.lb[i];
            let b = self.ub[i] - y[i];
            grad[i] += -1.0 / a + 1.0 / b;
            hess[(i, i)] += 1.0 / (a * a) + 1.0 / (b * b);
        }

        for (r, (_, coeffs)) in self.rows.iter().enumerate() {
            let v = self.row_value(r, y);
            // d/dy of v: coeffs for z, 1 for t
            let dv: Vec<f64> = coeffs.iter().copied().chain(std::iter::once(1.0)).collect();
            for i in 0..d {
                if dv[i] == 0.0 {
                    continue;
                }
                grad[i] -= dv[i] / v;
                for j in 0..d {
                    hess[(i, j)] += dv[i] * dv[j] / (v * v);
                }
            }
        }

        for (k, (c0, coeffs)) in self.blocks.iter().enumerate() {
            let l = cholesky(&self.slack_matrix(k, y))?;
            let sinv = cholesky_inverse(&l);
            let m = c0.rows();
            // X_i = S⁻¹ dS/dyᵢ with dS/dzᵢ = -Fᵢ and dS/dt = I
            let mut xs: Vec<Option<Matrix>> = Vec::with_capacity(d);
            for f in coeffs {
                if f.max_abs() == 0.0 {
                    xs.push(None);
                } else {
                    xs.push(Some(crate::matcore::mat_mul(&sinv, &f.scale(-1.0)).expect("square")));
                }
            }
            xs.push(Some(sinv.clone()));
            for i in 0..d {
                let Some(xi) = &xs[i] else { continue };
                let tr: f64 = (0..m).map(|a| xi[(a, a)]).sum();
                grad[i] -= tr;
                for j in i..d {
                    let Some(xj) = &xs[j] else { continue };
                    let mut h = 0.0;
                    for a in 0..m {
                        for b in 0..m {
                            h += xi[(a, b)] * xj[(b, a)];
                        }
                    }
                    hess[(i, j)] += h;
                    if j != i {
                        hess[(j, i)] += h;
                    }
                }
            }
        }
        Some(Eval { value, grad, hess })
    }
}

fn newton_direction(ev: &Eval) -> Option<Vec<f64>> {
    let neg_g: Vec<f64> = ev.grad.iter().map(|g| -g).collect();
    if let Some(l) = cholesky(&ev.hess) {
        return Some(cholesky_solve(&l, &neg_g));
    }
    // Hessian only loses definiteness through rounding; nudge the diagonal.
    let d = ev.hess.rows();
    let bump = 1e-12 * ev.hess.max_abs().max(1.0);
    let mut h = ev.hess.clone();
    for i in 0..d {
        h[(i, i)] += bump;
    }
    match cholesky(&h) {
        Some(l) => Some(cholesky_solve(&l, &neg_g)),
        None => solve_linear(&h, &neg_g).ok().map(Vector::into_inner),
    }
}

/// Solves the feasibility problem. Deterministic: the starting point, step
/// rules and stopping tests depend only on the problem data and `opts`.
pub fn solve(p: &LmiFeasibilityProblem, opts: &SolverOptions) -> Result<LmiOutcome> {
    p.validate()?;
    let pre = match presolve(p) {
        PresolveResult::Infeasible(reason) => {
            return Ok(LmiOutcome { status: LmiStatus::Infeasible { reason }, iterations: 0, worst_violation: f64::INFINITY })
        }
        PresolveResult::Reduced(pre) => pre,
    };

    let free: Vec<usize> = (0..p.dim).filter(|&i| pre.fixed[i].is_none()).collect();
    let assemble = |zfree: &[f64]| -> Vec<f64> {
        let mut z: Vec<f64> = pre.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
        for (k, &i) in free.iter().enumerate() {
            z[i] = zfree[k];
        }
        z
    };
    let finish = |z: Vec<f64>, iterations: usize| -> Result<LmiOutcome> {
        let worst = worst_violation(p, &z);
        let status = if check_solution(p, &z, 0.0)?.pass {
            LmiStatus::Feasible { z: Vector::new(z)? }
        } else {
            LmiStatus::Undetermined
        };
        Ok(LmiOutcome { status, iterations, worst_violation: worst })
    };

    let z0: Vec<f64> = free
        .iter()
        .map(|&i| {
            let (lo, hi) = (pre.lb[i], pre.ub[i]);
            if lo < 1.0 && 1.0 < hi {
                1.0
            } else {
                0.5 * (lo + hi)
            }
        })
        .collect();

    if free.is_empty() {
        let z = assemble(&[]);
        let worst = worst_violation(p, &z);
        let status = if check_solution(p, &z, 0.0)?.pass {
            LmiStatus::Feasible { z: Vector::new(z)? }
        } else {
            LmiStatus::Infeasible { reason: "every variable is pinned by the entrywise constraints".into() }
        };
        return Ok(LmiOutcome { status, iterations: 0, worst_violation: worst });
    }

    // fold fixed variables and margins into the constants
    let zfix: Vec<f64> = pre.fixed.iter().map(|f| f.unwrap_or(0.0)).collect();
    let blocks: Vec<(Matrix, Vec<Matrix>)> = p
        .matrix_constraints
        .iter()
        .map(|c| {
            let mut c0 = affine(&c.constant, &c.coefficients, &zfix).symmetrized();
            c0.axpy(c.margin(), &Matrix::identity(c0.rows())).expect("square");
            let coeffs = free.iter().map(|&i| c.coefficients[i].symmetrized()).collect();
            (c0, coeffs)
        })
        .collect();
    let rows: Vec<(f64, Vec<f64>)> = pre
        .rows
        .iter()
        .map(|r| {
            let c0 = r.constant + r.slack + r.coeffs.iter().zip(&zfix).map(|(a, z)| a * z).sum::<f64>();
            (c0, free.iter().map(|&i| r.coeffs[i]).collect())
        })
        .collect();

    if blocks.is_empty() && rows.is_empty() {
        return finish(assemble(&z0), 0);
    }

    let ph = Phase1 {
        blocks,
        rows,
        lb: free.iter().map(|&i| pre.lb[i]).collect(),
        ub: free.iter().map(|&i| pre.ub[i]).collect(),
    };
    let n = ph.nfree();

    // start t above every constraint value at z0
    let mut y = z0.clone();
    y.push(0.0);
    let mut worst: f64 = f64::NEG_INFINITY;
    for k in 0..ph.blocks.len() {
        let s = ph.slack_matrix(k, &y); // = -(F + m I) at t = 0
        worst = worst.max(lambda_max(&s.scale(-1.0))?);
    }
    for r in 0..ph.rows.len() {
        worst = worst.max(-ph.row_value(r, &y));
    }
    y[n] = worst + 1.0 + 0.1 * worst.abs();

    let nu = ph.nu();
    let mut mu = 1.0 / (1.0 + worst.abs());
    let mut iterations = 0;

    while iterations < opts.max_iters {
        // centering
        let mut centered = false;
        for _ in 0..200 {
            if iterations >= opts.max_iters {
                break;
            }
            let Some(ev) = ph.evaluate(mu, &y) else { break };
            let Some(dir) = newton_direction(&ev) else { break };
            iterations += 1;
            let slope: f64 = ev.grad.iter().zip(&dir).map(|(g, d)| g * d).sum();
            if -slope <= 1e-10 {
                centered = true;
                break;
            }
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..80 {
                let trial: Vec<f64> = y.iter().zip(&dir).map(|(a, d)| a + step * d).collect();
                if let Some(fv) = ph.value(mu, &trial) {
                    if fv <= ev.value + 0.25 * step * slope {
                        y = trial;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                centered = true;
                break;
            }
        }

        if y[n] < 0.0 && ph.strictly_feasible(&y) {
            let z = assemble(&y[..n]);
            if check_solution(p, &z, 0.0)?.pass {
                return finish(z, iterations);
            }
        }
        if centered && y[n] - 2.0 * nu / mu > 0.0 {
            // optimal phase-1 value is positive; reported as undetermined
            break;
        }
        if nu / mu < 1e-14 * (1.0 + y[n].abs()) {
            break;
        }
        mu *= opts.mu_growth;
    }

    let z = assemble(&y[..n]);
    Ok(LmiOutcome { status: LmiStatus::Undetermined, iterations, worst_violation: worst_violation(p, &z) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem(constant: f64, margin: f64, lo: f64, hi: f64) -> LmiFeasibilityProblem {
        let mut p = LmiFeasibilityProblem::new(1, lo, hi);
        p.matrix_constraints.push(MatrixConstraint {
            constant: Matrix::from_rows(&[[constant]]).unwrap(),
            coefficients: vec![Matrix::identity(1)],
            sense: MatrixSense::NegDef { margin },
        });
        p
    }

    #[test]
    fn evaluate_scalar_and_constant() {
        let p = scalar_problem(0.0, 1e-6, -10.0, 10.0);
        assert_eq!(evaluate_matrix_constraint(&p, 0, &[-2.0]).unwrap().as_slice(), &[-2.0]);
        assert_eq!(evaluate_matrix_constraint(&p, 0, &[0.0]).unwrap().as_slice(), &[0.0]);
        assert!(evaluate_matrix_constraint(&p, 1, &[0.0]).is_err());
        assert!(evaluate_matrix_constraint(&p, 0, &[0.0, 1.0]).is_err());
    }

    #[test]
    fn scalar_feasible() {
        let p = scalar_problem(0.0, 1e-6, -10.0, 10.0);
        let out = solve(&p, &SolverOptions::default()).unwrap();
        let z = out.point().expect("feasible");
        assert!(z[0] < 0.0);
        assert!(check_solution(&p, z, 0.0).unwrap().pass);
    }

    #[test]
    fn scalar_infeasible_by_propagation() {
        // [z] ≺ -I with z >= 0
        let p = scalar_problem(0.0, 1.0, 0.0, 10.0);
        let out = solve(&p, &SolverOptions::default()).unwrap();
        assert!(matches!(out.status, LmiStatus::Infeasible { .. }), "{out:?}");
        assert!(!check_solution(&p, &[0.0], 0.0).unwrap().pass);
    }

    #[test]
    fn entrywise_contradiction_and_pinning() {
        // z0 - z1 >= 0 and -z0 >= 0 with z >= 0 pins z0 = 0, then z1 = 0
        let mut p = LmiFeasibilityProblem::new(2, 0.0, 5.0);
        p.elementwise_constraints.push(ElementwiseConstraint {
            constant: Matrix::zeros(1, 2),
            coefficients: vec![
                Matrix::from_rows(&[[1.0, -1.0]]).unwrap(),
                Matrix::from_rows(&[[-1.0, 0.0]]).unwrap(),
            ],
            sense: EntrySense::GeqZero { slack: 1e-9 },
        });
        let out = solve(&p, &SolverOptions::default()).unwrap();
        let z = out.point().expect("feasible");
        assert!(check_solution(&p, z, 0.0).unwrap().pass);

        let mut q = LmiFeasibilityProblem::new(1, 0.0, 1.0);
        q.elementwise_constraints.push(ElementwiseConstraint {
            constant: Matrix::from_rows(&[[-3.0]]).unwrap(),
            coefficients: vec![Matrix::from_rows(&[[1.0]]).unwrap()],
            sense: EntrySense::GeqZero { slack: 1e-9 },
        });
        let out = solve(&q, &SolverOptions::default()).unwrap();
        assert!(matches!(out.status, LmiStatus::Infeasible { .. }));
    }

    #[test]
    fn malformed_problems_rejected() {
        let mut p = scalar_problem(0.0, 1e-6, -1.0, 1.0);
        p.lower_bounds[0] = 2.0;
        assert!(solve(&p, &SolverOptions::default()).is_err());

        let mut p = scalar_problem(0.0, 1e-6, -1.0, 1.0);
        p.matrix_constraints[0].coefficients.push(Matrix::identity(1));
        assert!(solve(&p, &SolverOptions::default()).is_err());

        let mut p = LmiFeasibilityProblem::new(1, -1.0, 1.0);
        p.matrix_constraints.push(MatrixConstraint {
            constant: Matrix::from_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap(),
            coefficients: vec![Matrix::identity(2)],
            sense: MatrixSense::NegDef { margin: 0.0 },
        });
        assert!(matches!(solve(&p, &SolverOptions::default()), Err(Error::Asymmetric(_))));
    }

    #[test]
    fn lyapunov_diagonal_problem() {
        // find diagonal P > 0 with PA + AᵀP ≺ 0 for a Hurwitz Metzler A
        let a = Matrix::from_rows(&[[-2.0, 1.0, 0.5], [0.3, -1.5, 0.2], [0.4, 0.1, -1.0]]).unwrap();
        let mut p = LmiFeasibilityProblem::new(3, 1e-6, 1e6);
        let coeffs = (0..3)
            .map(|i| {
                let mut e = Matrix::zeros(3, 3);
                e[(i, i)] = 1.0;
                let ea = crate::matcore::mat_mul(&e, &a).unwrap();
                ea.add(&ea.transpose()).unwrap()
            })
            .collect();
        p.matrix_constraints.push(MatrixConstraint {
            constant: Matrix::zeros(3, 3),
            coefficients: coeffs,
            sense: MatrixSense::NegDef { margin: DEFAULT_MARGIN },
        });
        let out = solve(&p, &SolverOptions::default()).unwrap();
        assert!(out.is_feasible(), "{out:?}");
        assert!(out.worst_violation <= 0.0);
    }

    #[test]
    fn unstable_lyapunov_is_not_feasible() {
        let a = Matrix::from_rows(&[[0.5, 1.0], [1.0, -1.0]]).unwrap();
        let mut p = LmiFeasibilityProblem::new(2, 1e-6, 1e6);
        let coeffs = (0..2)
            .map(|i| {
                let mut e = Matrix::zeros(2, 2);
                e[(i, i)] = 1.0;
                let ea = crate::matcore::mat_mul(&e, &a).unwrap();
                ea.add(&ea.transpose()).unwrap()
            })
            .collect();
        p.matrix_constraints.push(MatrixConstraint {
            constant: Matrix::zeros(2, 2),
            coefficients: coeffs,
            sense: MatrixSense::NegDef { margin: DEFAULT_MARGIN },
        });
        let out = solve(&p, &SolverOptions::default()).unwrap();
        assert!(!out.is_feasible());
    }

    #[test]
    fn deterministic() {
        let p = scalar_problem(0.3, 1e-6, -10.0, 10.0);
        let a = solve(&p, &SolverOptions::default()).unwrap();
        let b = solve(&p, &SolverOptions::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn json_roundtrip() {
        let p = scalar_problem(0.3, 1e-6, -10.0, 10.0);
        let s = serde_json::to_string(&p).unwrap();
        assert!(s.contains("\"neg_def\""));
        let back: LmiFeasibilityProblem = serde_json::from_str(&s).unwrap();
        assert_eq!(back, p);
    }
}
