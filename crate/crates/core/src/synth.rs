//! Observer gain synthesis.
//!
//! For a fixed scalar `λ` the design conditions are affine in the diagonal
//! of `P`, the diagonal of `Q` and the entries of `W`:
//!
//! ```text
//! [ PA + AᵀP        θ CᵀWᵀ              ]
//! [ θ W C       QA + AᵀQ - WC - CᵀWᵀ    ]  ≺ 0,      θ = αβ + β - 1
//!
//! QA - WC + λQ >= 0   (entrywise)
//! ```
//!
//! and the gain is `L = Q⁻¹ W`. [`synthesize`] sweeps `λ` over a grid and
//! keeps the smallest value whose problem is feasible.

use serde::{Deserialize, Serialize};

use crate::error::{Error, LambdaDiagnostic, Result};
use crate::lmi::{
    self, ElementwiseConstraint, EntrySense, LmiFeasibilityProblem, LmiStatus, MatrixConstraint, MatrixSense,
    SolverOptions,
};
use crate::matcore::{lambda_max, mat_mul, Matrix};
use crate::posys::{self, is_hurwitz_metzler, is_metzler, is_nonnegative_matrix, PositiveLinearSystem};

/// Lower bound on the diagonals of `P` and `Q`.
pub const DIAG_LOWER: f64 = 1e-6;
/// Upper bound on every decision variable.
pub const VAR_UPPER: f64 = 1e6;
/// Tolerance for the entrywise sign checks in [`verify_design`].
pub const SIGN_TOL: f64 = 1e-9;

/// Event-law parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TriggerConfig {
    alpha: f64,
    beta: f64,
    threshold_coeff: f64,
}

impl TriggerConfig {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::invalid(format!("alpha must be > 0, got {alpha}")));
        }
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::invalid(format!("beta must be > 1, got {beta}")));
        }
        Ok(Self { alpha, beta, threshold_coeff: alpha * beta + beta - 1.0 })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `αβ + β - 1`.
    pub fn threshold_coeff(&self) -> f64 {
        self.threshold_coeff
    }
}

impl<'de> Deserialize<'de> for TriggerConfig {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            alpha: f64,
            beta: f64,
        }
        let raw = Raw::deserialize(d)?;
        TriggerConfig::new(raw.alpha, raw.beta).map_err(serde::de::Error::custom)
    }
}

/// A synthesized (or externally supplied) observer design.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObserverDesign {
    #[serde(rename = "L")]
    pub l: Matrix,
    /// Diagonal of `P`.
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    /// Diagonal of `Q`.
    #[serde(rename = "Q")]
    pub q: Vec<f64>,
    #[serde(rename = "W")]
    pub w: Matrix,
    pub lambda: f64,
    /// Largest eigenvalue of the block matrix at `(P, Q, W)`.
    pub lmi_margin: f64,
    /// Smallest entry of `QA - WC + λQ`.
    pub elementwise_margin: f64,
    /// Smallest diagonal entry of `QA - WC + λQ`.
    pub diagonal_margin: f64,
}

impl ObserverDesign {
    /// Builds a design from `(P, Q, W, λ)`; `L = Q⁻¹W`.
    pub fn from_pqw(
        sys: &PositiveLinearSystem,
        trig: &TriggerConfig,
        p: Vec<f64>,
        q: Vec<f64>,
        w: Matrix,
        lambda: f64,
    ) -> Result<Self> {
        let n = sys.n_states();
        if p.len() != n || q.len() != n || w.shape() != (n, sys.n_outputs()) {
            return Err(Error::dim("design matrices do not match the system"));
        }
        if q.iter().any(|v| *v <= 0.0) {
            return Err(Error::invalid("Q must have a positive diagonal"));
        }
        let mut l = w.clone();
        for i in 0..n {
            for j in 0..w.cols() {
                l[(i, j)] = w[(i, j)] / q[i];
            }
        }
        Self::assemble(sys, trig, p, q, w, l, lambda)
    }

    /// Builds a design from `(P, Q, L, λ)`; `W = QL`.
    pub fn from_pql(
        sys: &PositiveLinearSystem,
        trig: &TriggerConfig,
        p: Vec<f64>,
        q: Vec<f64>,
        l: Matrix,
        lambda: f64,
    ) -> Result<Self> {
        let n = sys.n_states();
        if p.len() != n || q.len() != n || l.shape() != (n, sys.n_outputs()) {
            return Err(Error::dim("design matrices do not match the system"));
        }
        let w = mat_mul(&Matrix::from_diag(&q), &l)?;
        Self::assemble(sys, trig, p, q, w, l, lambda)
    }

    fn assemble(
        sys: &PositiveLinearSystem,
        trig: &TriggerConfig,
        p: Vec<f64>,
        q: Vec<f64>,
        w: Matrix,
        l: Matrix,
        lambda: f64,
    ) -> Result<Self> {
        let block = design_block(sys, trig, &p, &q, &w)?;
        let ew = shifted_metzler_matrix(sys, &q, &w, lambda)?;
        Ok(Self {
            lmi_margin: lambda_max(&block)?,
            elementwise_margin: ew.min_entry(),
            diagonal_margin: ew.diag().into_iter().fold(f64::INFINITY, f64::min),
            l,
            p,
            q,
            w,
            lambda,
        })
    }

    pub fn n_states(&self) -> usize {
        self.p.len()
    }
}

/// Outcome of [`verify_design`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignReport {
    pub metzler_alc: bool,
    pub l_nonneg: bool,
    pub pq_positive: bool,
    pub w_nonneg: bool,
    pub lmi_pass: bool,
    pub elementwise_pass: bool,
    pub augmented_hurwitz: bool,
    /// Diagnostic only; does not enter [`DesignReport::all_pass`].
    pub observability_ok: bool,
    pub lmi_margin: f64,
    pub elementwise_margin: f64,
    pub diagonal_margin: f64,
    /// Smallest entry of `(A - LC) + λI`.
    pub shifted_alc_min: f64,
}

impl DesignReport {
    pub fn all_pass(&self) -> bool {
        self.metzler_alc
            && self.l_nonneg
            && self.pq_positive
            && self.w_nonneg
            && self.lmi_pass
            && self.elementwise_pass
            && self.augmented_hurwitz
    }
}

fn unit(n: usize, m: usize, i: usize, j: usize) -> Matrix {
    let mut e = Matrix::zeros(n, m);
    e[(i, j)] = 1.0;
    e
}

/// The block matrix of the design LMI, assembled directly from `(P, Q, W)`.
pub fn design_block(
    sys: &PositiveLinearSystem,
    trig: &TriggerConfig,
    p: &[f64],
    q: &[f64],
    w: &Matrix,
) -> Result<Matrix> {
    let a = sys.a();
    let c = sys.c();
    let pm = Matrix::from_diag(p);
    let qm = Matrix::from_diag(q);
    let at = a.transpose();
    let pa = mat_mul(&pm, a)?;
    let qa = mat_mul(&qm, a)?;
    let wc = mat_mul(w, c)?;
    let top_left = pa.add(&mat_mul(&at, &pm)?)?;
    let top_right = mat_mul(&c.transpose(), &w.transpose())?.scale(trig.threshold_coeff());
    let bottom_right = qa.add(&mat_mul(&at, &qm)?)?.sub(&wc)?.sub(&wc.transpose())?;
    Matrix::block2x2(&top_left, &top_right, &top_right.transpose(), &bottom_right)
}

/// `QA - WC + λQ`.
pub fn shifted_metzler_matrix(sys: &PositiveLinearSystem, q: &[f64], w: &Matrix, lambda: f64) -> Result<Matrix> {
    let qm = Matrix::from_diag(q);
    mat_mul(&qm, sys.a())?.sub(&mat_mul(w, sys.c())?)?.add(&qm.scale(lambda))
}

/// Decision vector layout: `p₁..pₙ, q₁..qₙ, w₁₁..w₁ᵣ, ..., wₙᵣ`.
pub fn build_design_problem(
    sys: &PositiveLinearSystem,
    trig: &TriggerConfig,
    lambda: f64,
) -> Result<LmiFeasibilityProblem> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::invalid(format!("lambda must be > 0, got {lambda}")));
    }
    let n = sys.n_states();
    let r = sys.n_outputs();
    let a = sys.a();
    let at = a.transpose();
    let c = sys.c();
    let ct = c.transpose();
    let theta = trig.threshold_coeff();
    let dim = 2 * n + n * r;
    let zn = Matrix::zeros(n, n);

    let mut block_coeffs = Vec::with_capacity(dim);
    let mut entry_coeffs = Vec::with_capacity(dim);

    // p_i
    for i in 0..n {
        let e = unit(n, n, i, i);
        let lyap = mat_mul(&e, a)?.add(&mat_mul(&at, &e)?)?;
        block_coeffs.push(Matrix::block_diag(&lyap, &zn));
        entry_coeffs.push(zn.clone());
    }
    // q_i
    for i in 0..n {
        let e = unit(n, n, i, i);
        let ea = mat_mul(&e, a)?;
        let lyap = ea.add(&mat_mul(&at, &e)?)?;
        block_coeffs.push(Matrix::block_diag(&zn, &lyap));
        entry_coeffs.push(ea.add(&e.scale(lambda))?);
    }
    // w_ij
    for i in 0..n {
        for j in 0..r {
            let e = unit(n, r, i, j);
            let ec = mat_mul(&e, c)?;
            let off = mat_mul(&ct, &e.transpose())?.scale(theta);
            let br = ec.add(&ec.transpose())?.scale(-1.0);
            block_coeffs.push(Matrix::block2x2(&zn, &off, &off.transpose(), &br)?);
            entry_coeffs.push(ec.scale(-1.0));
        }
    }

    let mut lower = vec![DIAG_LOWER; 2 * n];
    lower.extend(std::iter::repeat(0.0).take(n * r));
    Ok(LmiFeasibilityProblem {
        dim,
        matrix_constraints: vec![MatrixConstraint {
            constant: Matrix::zeros(2 * n, 2 * n),
            coefficients: block_coeffs,
            sense: MatrixSense::NegDef { margin: lmi::DEFAULT_MARGIN },
        }],
        elementwise_constraints: vec![ElementwiseConstraint {
            constant: Matrix::zeros(n, n),
            coefficients: entry_coeffs,
            sense: EntrySense::GeqZero { slack: lmi::DEFAULT_SLACK },
        }],
        lower_bounds: lower,
        upper_bounds: vec![VAR_UPPER; dim],
    })
}

/// Splits a decision vector into `(P diag, Q diag, W)`.
pub fn unpack_decision(sys: &PositiveLinearSystem, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>, Matrix)> {
    let n = sys.n_states();
    let r = sys.n_outputs();
    if z.len() != 2 * n + n * r {
        return Err(Error::dim(format!("decision vector of length {}", z.len())));
    }
    let w = Matrix::new(n, r, z[2 * n..].to_vec())?;
    Ok((z[..n].to_vec(), z[n..2 * n].to_vec(), w))
}

/// Packs `(P diag, Q diag, W)` into a decision vector.
pub fn pack_decision(p: &[f64], q: &[f64], w: &Matrix) -> Vec<f64> {
    p.iter().chain(q).chain(w.as_slice()).copied().collect()
}

/// `n` log-spaced values over `[0.1(1+s), 50(1+s)]`, `s` the Metzler shift of `A`.
pub fn default_lambda_grid(a: &Matrix) -> Result<Vec<f64>> {
    let s = posys::metzler_shift(a)?;
    Ok(log_grid(0.1 * (1.0 + s), 50.0 * (1.0 + s), 50))
}

pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n).map(|k| (a + (b - a) * k as f64 / (n - 1) as f64).exp()).collect()
}

pub fn synthesize(
    sys: &PositiveLinearSystem,
    trig: &TriggerConfig,
    lambda_grid: Option<&[f64]>,
) -> Result<ObserverDesign> {
    synthesize_with(sys, trig, lambda_grid, &SolverOptions::default())
}

/// Tries each `λ` in ascending order and returns the first feasible design.
pub fn synthesize_with(
    sys: &PositiveLinearSystem,
    trig: &TriggerConfig,
    lambda_grid: Option<&[f64]>,
    opts: &SolverOptions,
) -> Result<ObserverDesign> {
    let mut grid = match lambda_grid {
        Some(g) => g.to_vec(),
        None => default_lambda_grid(sys.a())?,
    };
    if grid.is_empty() {
        return Err(Error::invalid("empty lambda grid"));
    }
    grid.sort_by(f64::total_cmp);

    let mut diagnostics = Vec::with_capacity(grid.len());
    for &lambda in &grid {
        let problem = build_design_problem(sys, trig, lambda)?;
        let outcome = lmi::solve(&problem, opts)?;
        let status = match &outcome.status {
            LmiStatus::Feasible { z } => {
                let (p, q, w) = unpack_decision(sys, z)?;
                let design = ObserverDesign::from_pqw(sys, trig, p, q, w, lambda)?;
                if verify_design(sys, trig, &design)?.all_pass() {
                    return Ok(design);
                }
                "feasible point failed verification".to_string()
            }
            LmiStatus::Infeasible { reason } => format!("infeasible: {reason}"),
            LmiStatus::Undetermined => "undetermined".to_string(),
        };
        diagnostics.push(LambdaDiagnostic {
            lambda,
            status,
            iterations: outcome.iterations,
            worst_violation: outcome.worst_violation,
        });
    }
    Err(Error::SynthesisFailed(diagnostics))
}

/// Checks a design against every positivity and stability condition.
pub fn verify_design(
    sys: &PositiveLinearSystem,
    trig: &TriggerConfig,
    design: &ObserverDesign,
) -> Result<DesignReport> {
    let n = sys.n_states();
    if design.p.len() != n || design.q.len() != n || design.l.shape() != (n, sys.n_outputs()) {
        return Err(Error::dim("design does not match the system dimensions"));
    }
    let a = sys.a();
    let alc = a.sub(&mat_mul(&design.l, sys.c())?)?;
    let metzler_alc = is_metzler(&alc, SIGN_TOL)?;

    let block = design_block(sys, trig, &design.p, &design.q, &design.w)?;
    let lmi_margin = lambda_max(&block)?;
    let ew = shifted_metzler_matrix(sys, &design.q, &design.w, design.lambda)?;
    let elementwise_margin = ew.min_entry();
    let diagonal_margin = ew.diag().into_iter().fold(f64::INFINITY, f64::min);

    let mut shifted = alc.clone();
    shifted.axpy(design.lambda, &Matrix::identity(n))?;

    let augmented_hurwitz = metzler_alc
        && is_metzler(a, SIGN_TOL)?
        && is_hurwitz_metzler(a)?.0
        && is_hurwitz_metzler(&alc)?.0;

    Ok(DesignReport {
        metzler_alc,
        l_nonneg: is_nonnegative_matrix(&design.l, SIGN_TOL),
        pq_positive: design.p.iter().chain(&design.q).all(|v| *v > 0.0),
        w_nonneg: is_nonnegative_matrix(&design.w, SIGN_TOL),
        lmi_pass: lmi_margin < 0.0,
        elementwise_pass: elementwise_margin >= -SIGN_TOL,
        augmented_hurwitz,
        observability_ok: posys::observability_rank(a, sys.c()) == n,
        lmi_margin,
        elementwise_margin,
        diagonal_margin,
        shifted_alc_min: shifted.min_entry(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models;

    fn published_design() -> (PositiveLinearSystem, TriggerConfig, ObserverDesign) {
        let sys = models::example1();
        let trig = TriggerConfig::new(0.3, 1.5).unwrap();
        let d = ObserverDesign::from_pql(
            &sys,
            &trig,
            vec![0.3655, 1.1736],
            vec![0.4056, 0.9079],
            Matrix::column(&[0.9037, 0.0]),
            2.6341,
        )
        .unwrap();
        (sys, trig, d)
    }

    #[test]
    fn trigger_config_validation() {
        let t = TriggerConfig::new(0.3, 1.5).unwrap();
        assert!((t.threshold_coeff() - 0.95).abs() < 1e-15);
        assert!(TriggerConfig::new(0.0, 1.5).is_err());
        assert!(TriggerConfig::new(0.3, 1.0).is_err());
        assert!(serde_json::from_str::<TriggerConfig>(r#"{"alpha":0.3,"beta":0.9}"#).is_err());
    }

    #[test]
    fn threshold_is_affine_in_beta() {
        for &alpha in &[0.1, 0.3, 1.0, 4.0] {
            for &beta in &[1.01, 1.5, 2.0, 10.0] {
                let t = TriggerConfig::new(alpha, beta).unwrap();
                assert_eq!(t.threshold_coeff(), alpha * beta + beta - 1.0);
                let t2 = TriggerConfig::new(alpha, beta + 0.5).unwrap();
                assert!(t2.threshold_coeff() > t.threshold_coeff());
            }
        }
    }

    #[test]
    fn problem_matches_direct_assembly() {
        let (sys, trig, d) = published_design();
        let prob = build_design_problem(&sys, &trig, d.lambda).unwrap();
        assert_eq!(prob.dim, 6);
        let z = pack_decision(&d.p, &d.q, &d.w);
        let via_lmi = lmi::evaluate_matrix_constraint(&prob, 0, &z).unwrap();
        let direct = design_block(&sys, &trig, &d.p, &d.q, &d.w).unwrap();
        assert!(via_lmi.sub(&direct).unwrap().max_abs() < 1e-14);
        assert!((via_lmi[(0, 0)] - (-0.731)).abs() < 1e-12);

        let ew_lmi = lmi::evaluate_elementwise_constraint(&prob, 0, &z).unwrap();
        let ew_direct = shifted_metzler_matrix(&sys, &d.q, &d.w, d.lambda).unwrap();
        assert!(ew_lmi.sub(&ew_direct).unwrap().max_abs() < 1e-14);
        assert!(lmi::check_solution(&prob, &z, 0.0).unwrap().pass);
    }

    #[test]
    fn scalar_problem_by_hand() {
        let sys = PositiveLinearSystem::new(
            "scalar",
            Matrix::from_rows(&[[-1.0]]).unwrap(),
            None,
            Matrix::identity(1),
            None,
            0.0,
        )
        .unwrap();
        let trig = TriggerConfig::new(0.3, 1.5).unwrap();
        let prob = build_design_problem(&sys, &trig, 2.0).unwrap();
        let z = [1.0, 1.0, 0.0];
        let blk = lmi::evaluate_matrix_constraint(&prob, 0, &z).unwrap();
        assert_eq!(blk.to_rows(), vec![vec![-2.0, 0.0], vec![0.0, -2.0]]);
        let ew = lmi::evaluate_elementwise_constraint(&prob, 0, &z).unwrap();
        assert_eq!(ew.as_slice(), &[1.0]);
        assert!(lmi::check_solution(&prob, &z, 0.0).unwrap().pass);
    }

    #[test]
    fn published_point_verifies() {
        let (sys, trig, d) = published_design();
        let rep = verify_design(&sys, &trig, &d).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        assert!(rep.observability_ok);
        assert!((rep.diagonal_margin - (-0.4056 - 0.36654 + 2.6341 * 0.4056)).abs() < 1e-4);
        assert!(rep.elementwise_margin.abs() < 1e-12);
    }

    #[test]
    fn negative_gain_is_flagged() {
        let (sys, trig, d) = published_design();
        let bad = ObserverDesign::from_pql(&sys, &trig, d.p.clone(), d.q.clone(), Matrix::column(&[-0.1, 0.0]), 2.6341)
            .unwrap();
        assert!(!verify_design(&sys, &trig, &bad).unwrap().l_nonneg);
    }

    #[test]
    fn zero_gain_keeps_a_metzler() {
        let (sys, trig, d) = published_design();
        let zero = ObserverDesign::from_pql(&sys, &trig, d.p.clone(), d.q.clone(), Matrix::zeros(2, 1), 2.6341)
            .unwrap();
        let rep = verify_design(&sys, &trig, &zero).unwrap();
        assert!(rep.metzler_alc && rep.l_nonneg);
    }

    #[test]
    fn synthesize_example1() {
        let sys = models::example1();
        let trig = TriggerConfig::new(0.3, 1.5).unwrap();
        let d = synthesize(&sys, &trig, None).unwrap();
        let rep = verify_design(&sys, &trig, &d).unwrap();
        assert!(rep.all_pass(), "{rep:?}");
        // L = Q⁻¹W
        for i in 0..2 {
            assert!((d.l[(i, 0)] - d.w[(i, 0)] / d.q[i]).abs() < 1e-10);
        }
        // both readings of the λ condition
        assert!(shifted_metzler_matrix(&sys, &d.q, &d.w, d.lambda).unwrap().min_entry() >= -1e-9);
        assert!(rep.shifted_alc_min >= -1e-9);
    }

    #[test]
    fn synthesize_rejects_unstable_scalar() {
        let sys = PositiveLinearSystem::new(
            "unstable",
            Matrix::from_rows(&[[1.0]]).unwrap(),
            None,
            Matrix::from_rows(&[[1e-9]]).unwrap(),
            None,
            0.0,
        )
        .unwrap();
        let trig = TriggerConfig::new(0.3, 1.5).unwrap();
        let grid = log_grid(0.1, 50.0, 8);
        match synthesize(&sys, &trig, Some(&grid)) {
            Err(Error::SynthesisFailed(diag)) => assert_eq!(diag.len(), 8),
            other => panic!("expected failure, got {other:?}"),
        }
    }

    #[test]
    fn grid_shape() {
        let g = default_lambda_grid(models::example1().a()).unwrap();
        assert_eq!(g.len(), 50);
        assert!((g[0] - 0.2).abs() < 1e-12 && (g[49] - 100.0).abs() < 1e-9);
        assert!(g.windows(2).all(|w| w[1] > w[0]));
    }
}
