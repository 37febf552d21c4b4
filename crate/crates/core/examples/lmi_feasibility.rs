//! Direct use of the LMI solver: find a diagonal `P > 0` with
//! `A^T P + P A < 0` for a Metzler `A`, then flip `A` unstable.
//!
//! `cargo run --example lmi_feasibility`

use posobs::lmi::{solve, LmiFeasibilityProblem, MatrixConstraint, MatrixSense, SolverOptions};
use posobs::matcore::{mat_mul, Matrix};

fn lyapunov_problem(a: &Matrix) -> posobs::Result<LmiFeasibilityProblem> {
    let n = a.rows();
    let mut coefficients = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = Matrix::zeros(n, n);
        e[(i, i)] = 1.0;
        coefficients.push(mat_mul(&a.transpose(), &e)?.add(&mat_mul(&e, a)?)?);
    }
    let mut p = LmiFeasibilityProblem::new(n, 1e-3, 1e3);
    p.matrix_constraints.push(MatrixConstraint {
        constant: Matrix::zeros(n, n),
        coefficients,
        sense: MatrixSense::NegDef { margin: 1e-6 },
    });
    Ok(p)
}

fn main() -> posobs::Result<()> {
    let stable = Matrix::from_rows(&[[-2.0, 1.0, 0.0], [0.5, -1.5, 0.3], [0.0, 0.7, -1.0]])?;
    let out = solve(&lyapunov_problem(&stable)?, &SolverOptions::default())?;
    println!("stable A: {:?} after {} Newton steps", out.status, out.iterations);

    let unstable = stable.add(&Matrix::identity(3).scale(2.0))?;
    let out = solve(&lyapunov_problem(&unstable)?, &SolverOptions::default())?;
    println!("unstable A: {:?}, worst violation {:.3e}", out.status, out.worst_violation);
    Ok(())
}
