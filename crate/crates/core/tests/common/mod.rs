#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use posobs::lmi::{ElementwiseConstraint, EntrySense, LmiFeasibilityProblem, MatrixConstraint, MatrixSense};
use posobs::matcore::Matrix;
use posobs::models;
use posobs::synth::{ObserverDesign, TriggerConfig};
use posobs::PositiveLinearSystem;
use rand::Rng;

pub fn to_na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.as_slice())
}

pub fn from_na(m: &DMatrix<f64>) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect()).collect();
    Matrix::from_rows(&rows).unwrap()
}

/// Coefficients of `det(λI - A)`, highest power first, by Faddeev-LeVerrier.
pub fn char_poly(a: &DMatrix<f64>) -> Vec<f64> {
    let n = a.nrows();
    let mut coeffs = vec![1.0];
    let mut m = DMatrix::<f64>::zeros(n, n);
    let id = DMatrix::<f64>::identity(n, n);
    let mut c = 1.0;
    for k in 1..=n {
        m = a * &m + &id * c;
        c = -(a * &m).trace() / k as f64;
        coeffs.push(c);
    }
    coeffs
}

pub fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().fold(0.0, |acc, c| acc * x + c)
}

/// Largest real root of the characteristic polynomial, bracketed by a
/// downward scan from the Gershgorin radius and refined by bisection.
pub fn dominant_real_root(a: &DMatrix<f64>) -> Option<f64> {
    let p = char_poly(a);
    let radius = (0..a.nrows())
        .map(|i| (0..a.ncols()).map(|j| a[(i, j)].abs()).sum::<f64>())
        .fold(0.0, f64::max)
        + 1.0;
    let steps = 20_000;
    let h = 2.0 * radius / steps as f64;
    let mut hi = radius;
    let mut f_hi = horner(&p, hi);
    for k in 1..=steps {
        let lo = radius - k as f64 * h;
        let f_lo = horner(&p, lo);
        if f_lo == 0.0 {
            return Some(lo);
        }
        if f_lo.signum() != f_hi.signum() {
            let (mut l, mut r) = (lo, hi);
            for _ in 0..200 {
                let mid = 0.5 * (l + r);
                if horner(&p, mid).signum() == f_hi.signum() {
                    r = mid;
                } else {
                    l = mid;
                }
            }
            return Some(0.5 * (l + r));
        }
        hi = lo;
        f_hi = f_lo;
    }
    None
}

/// Random Metzler matrix with entries of moderate size.
pub fn random_metzler<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            m[(i, j)] = if i == j { rng.gen_range(-4.0..1.0) } else if rng.gen_bool(0.7) { rng.gen_range(0.0..2.0) } else { 0.0 };
        }
    }
    m
}

/// Metzler matrix whose rows and columns are strictly diagonally dominant,
/// so `A + Aᵀ` is negative definite.
pub fn dominant_metzler<R: Rng>(rng: &mut R, n: usize) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            if i != j && rng.gen_bool(0.6) {
                m[(i, j)] = rng.gen_range(0.0..1.0);
            }
        }
    }
    for i in 0..n {
        let row: f64 = (0..n).filter(|&j| j != i).map(|j| m[(i, j)]).sum();
        let col: f64 = (0..n).filter(|&j| j != i).map(|j| m[(j, i)]).sum();
        m[(i, i)] = -(row.max(col) + rng.gen_range(0.2..1.0));
    }
    m
}

fn unit(n: usize, i: usize, j: usize) -> Matrix {
    let mut e = Matrix::zeros(n, n);
    e[(i, j)] = 1.0;
    e
}

/// Diagonal Lyapunov problem: `Σ pᵢ (AᵀEᵢᵢ + EᵢᵢA) ≺ 0`, `pᵢ` in `[lo, hi]`.
pub fn lyapunov_problem(a: &Matrix, lo: f64, hi: f64) -> LmiFeasibilityProblem {
    let n = a.rows();
    let at = a.transpose();
    let coefficients = (0..n)
        .map(|i| {
            let e = unit(n, i, i);
            posobs::matcore::mat_mul(&at, &e).unwrap().add(&posobs::matcore::mat_mul(&e, a).unwrap()).unwrap()
        })
        .collect();
    let mut p = LmiFeasibilityProblem::new(n, lo, hi);
    p.matrix_constraints.push(MatrixConstraint {
        constant: Matrix::zeros(n, n),
        coefficients,
        sense: MatrixSense::NegDef { margin: 1e-6 },
    });
    p
}

/// Random symmetric matrix with entries in `[-s, s]`.
pub fn random_symmetric<R: Rng>(rng: &mut R, n: usize, s: f64) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = rng.gen_range(-s..s);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    m
}

/// Random small problem with one matrix and one entrywise constraint.
/// Feasibility is not known in advance.
pub fn random_problem<R: Rng>(rng: &mut R) -> LmiFeasibilityProblem {
    let dim = rng.gen_range(1..=4);
    let n = rng.gen_range(1..=3);
    let mut p = LmiFeasibilityProblem::new(dim, -5.0, 5.0);
    p.matrix_constraints.push(MatrixConstraint {
        constant: random_symmetric(rng, n, 2.0),
        coefficients: (0..dim).map(|_| random_symmetric(rng, n, 1.0)).collect(),
        sense: MatrixSense::NegDef { margin: 1e-6 },
    });
    let r = rng.gen_range(1..=2);
    let c = rng.gen_range(1..=2);
    let rand_mat = |rng: &mut R| {
        let data = (0..r * c).map(|_| rng.gen_range(-1.0..1.0)).collect();
        Matrix::new(r, c, data).unwrap()
    };
    let constant = rand_mat(rng);
    let coefficients = (0..dim).map(|_| rand_mat(rng)).collect();
    p.elementwise_constraints.push(ElementwiseConstraint {
        constant,
        coefficients,
        sense: EntrySense::GeqZero { slack: 1e-9 },
    });
    p
}

pub fn published_design() -> (PositiveLinearSystem, TriggerConfig, ObserverDesign) {
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

/// Exact solution of the event-free loop from `(x0, xhat0)` with the held
/// sample `y0`: the augmented state `[x; xhat; 1]` evolves linearly.
pub fn event_free_exact(
    a: &Matrix,
    c: &Matrix,
    l: &Matrix,
    beta: f64,
    x0: &[f64],
    xhat0: &[f64],
    t: f64,
) -> Vec<f64> {
    let n = a.rows();
    let a = to_na(a);
    let c = to_na(c);
    let l = to_na(l);
    let x0v = DVector::from_column_slice(x0);
    let y0 = &c * &x0v;
    let mut m = DMatrix::<f64>::zeros(2 * n + 1, 2 * n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&a);
    let alc = &a - &l * &c;
    m.view_mut((n, n), (n, n)).copy_from(&alc);
    let drive = &l * y0 * beta;
    m.view_mut((n, 2 * n), (n, 1)).copy_from(&drive);
    let mut s0 = DVector::<f64>::zeros(2 * n + 1);
    s0.rows_mut(0, n).copy_from(&x0v);
    s0.rows_mut(n, n).copy_from(&DVector::from_column_slice(xhat0));
    s0[2 * n] = 1.0;
    let s = (m * t).exp() * s0;
    s.iter().take(2 * n).copied().collect()
}
