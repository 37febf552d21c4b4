//! Positivity and stability checks for continuous-time linear positive
//! systems `ẋ = A x (+ B u)`, `y = C x`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{solve_linear, Matrix, Vector};

/// Absolute tolerance used for sign tests on model-derived matrices.
pub const DEFAULT_POSITIVITY_TOL: f64 = 1e-9;

/// A linear plant whose state matrix is Metzler.
#[derive(Debug, Clone, PartialEq)]
pub struct PositiveLinearSystem {
    label: String,
    a: Matrix,
    b: Option<Matrix>,
    c: Matrix,
    equilibrium: Option<Vector>,
    input_nonneg: Option<bool>,
}

impl PositiveLinearSystem {
    /// Validates shapes and that `A` is Metzler within `tol`.
    ///
    /// `C >= 0` and `B >= 0` are recorded by [`check_positive_system`] and
    /// [`Self::input_nonneg`] but not enforced here.
    pub fn new(
        label: impl Into<String>,
        a: Matrix,
        b: Option<Matrix>,
        c: Matrix,
        equilibrium: Option<Vector>,
        tol: f64,
    ) -> Result<Self> {
        validate_shapes(&a, b.as_ref(), &c, equilibrium.as_deref())?;
        if !is_metzler(&a, tol)? {
            return Err(Error::invalid("state matrix A is not Metzler"));
        }
        let input_nonneg = b.as_ref().map(|b| is_nonnegative_matrix(b, tol));
        Ok(Self { label: label.into(), a, b, c, equilibrium, input_nonneg })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn a(&self) -> &Matrix {
        &self.a
    }

    pub fn b(&self) -> Option<&Matrix> {
        self.b.as_ref()
    }

    pub fn c(&self) -> &Matrix {
        &self.c
    }

    pub fn equilibrium(&self) -> Option<&Vector> {
        self.equilibrium.as_ref()
    }

    /// `Some(B >= 0)` when an input matrix is present.
    pub fn input_nonneg(&self) -> Option<bool> {
        self.input_nonneg
    }

    pub fn n_states(&self) -> usize {
        self.a.rows()
    }

    pub fn n_outputs(&self) -> usize {
        self.c.rows()
    }

    pub fn n_inputs(&self) -> usize {
        self.b.as_ref().map_or(0, Matrix::cols)
    }
}

pub(crate) fn validate_shapes(
    a: &Matrix,
    b: Option<&Matrix>,
    c: &Matrix,
    equilibrium: Option<&[f64]>,
) -> Result<()> {
    let n = a.rows();
    if !a.is_square() || n == 0 {
        return Err(Error::dim(format!("A must be square and non-empty, got {:?}", a.shape())));
    }
    if c.cols() != n || c.rows() == 0 {
        return Err(Error::dim(format!("C is {:?}, expected r x {n}", c.shape())));
    }
    if let Some(b) = b {
        if b.rows() != n || b.cols() == 0 {
            return Err(Error::dim(format!("B is {:?}, expected {n} x m", b.shape())));
        }
    }
    if let Some(eq) = equilibrium {
        if eq.len() != n {
            return Err(Error::dim(format!("equilibrium has length {}, expected {n}", eq.len())));
        }
    }
    Ok(())
}

/// Result of the positivity and stability checks on a plant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub metzler: bool,
    pub output_nonneg: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input_nonneg: Option<bool>,
    pub hurwitz: bool,
    pub metzler_shift: f64,
    pub positive_scaling_vector: Option<Vector>,
}

impl AnalysisReport {
    pub fn is_positive(&self) -> bool {
        self.metzler && self.output_nonneg
    }
}

pub fn is_nonnegative_matrix(m: &Matrix, tol: f64) -> bool {
    m.as_slice().iter().all(|&v| v >= -tol)
}

pub fn is_metzler(a: &Matrix, tol: f64) -> Result<bool> {
    if !a.is_square() {
        return Err(Error::dim(format!("Metzler test on non-square {:?}", a.shape())));
    }
    let n = a.rows();
    Ok((0..n).all(|i| (0..n).all(|j| i == j || a[(i, j)] >= -tol)))
}

fn diagonal_shift(a: &Matrix) -> f64 {
    a.diag().iter().fold(0.0_f64, |s, &d| s.max(-d))
}

/// Smallest `λ >= 0` with `A + λ I >= 0` elementwise.
pub fn metzler_shift(a: &Matrix) -> Result<f64> {
    if !is_metzler(a, 0.0)? {
        return Err(Error::invalid("metzler_shift requires a Metzler matrix"));
    }
    Ok(diagonal_shift(a))
}

/// Hurwitz test for a Metzler matrix through the linear certificate
/// `Aᵀ v = -1`, `v > 0`.
///
/// Returns the witness `v` when it exists. A singular `Aᵀ` or a witness
/// with a non-positive entry means `A` is not Hurwitz.
pub fn is_hurwitz_metzler(a: &Matrix) -> Result<(bool, Option<Vector>)> {
    if !is_metzler(a, DEFAULT_POSITIVITY_TOL)? {
        return Err(Error::invalid("Hurwitz certificate requires a Metzler matrix"));
    }
    let ones = vec![-1.0; a.rows()];
    match solve_linear(&a.transpose(), &ones) {
        Ok(v) if v.iter().all(|&x| x > 0.0) => Ok((true, Some(v))),
        Ok(_) | Err(Error::Singular { .. }) => Ok((false, None)),
        Err(e) => Err(e),
    }
}

/// Sign checks of `A`, `C` (and `B`) plus the Hurwitz certificate,
/// on raw matrices that may or may not describe a positive system.
pub fn analyze_matrices(a: &Matrix, b: Option<&Matrix>, c: &Matrix, tol: f64) -> Result<AnalysisReport> {
    validate_shapes(a, b, c, None)?;
    let metzler = is_metzler(a, tol)?;
    let (hurwitz, witness) = if metzler { is_hurwitz_metzler(a)? } else { (false, None) };
    Ok(AnalysisReport {
        metzler,
        output_nonneg: is_nonnegative_matrix(c, tol),
        input_nonneg: b.map(|b| is_nonnegative_matrix(b, tol)),
        hurwitz,
        metzler_shift: diagonal_shift(a),
        positive_scaling_vector: witness,
    })
}

pub fn check_positive_system(sys: &PositiveLinearSystem, tol: f64) -> AnalysisReport {
    analyze_matrices(&sys.a, sys.b.as_ref(), &sys.c, tol).expect("validated on construction")
}

/// Rank of the observability matrix `[C; CA; ...; CA^{n-1}]`.
pub fn observability_rank(a: &Matrix, c: &Matrix) -> usize {
    let n = a.rows();
    let r = c.rows();
    let mut obs = Matrix::zeros(n * r, n);
    let mut block = c.clone();
    for k in 0..n {
        obs.set_block(k * r, 0, &block);
        block = crate::matcore::mat_mul(&block, a).expect("shapes validated");
    }
    crate::matcore::rank(&obs, 1e-10)
}
