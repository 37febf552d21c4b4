mod common;

use common::{dominant_metzler, lyapunov_problem, random_problem, random_symmetric};
use posobs::lmi::{
    check_solution, solve, ElementwiseConstraint, EntrySense, LmiFeasibilityProblem, LmiStatus, MatrixConstraint,
    MatrixSense, SolverOptions,
};
use posobs::matcore::Matrix;
use posobs::models;
use posobs::synth::{build_design_problem, TriggerConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn neg_def(constant: Matrix, coefficients: Vec<Matrix>) -> MatrixConstraint {
    MatrixConstraint { constant, coefficients, sense: MatrixSense::NegDef { margin: 1e-6 } }
}

fn geq(constant: Matrix, coefficients: Vec<Matrix>) -> ElementwiseConstraint {
    ElementwiseConstraint { constant, coefficients, sense: EntrySense::GeqZero { slack: 1e-9 } }
}

fn m(rows: &[&[f64]]) -> Matrix {
    Matrix::from_rows(rows).unwrap()
}

/// Feasible problems with at most 12 variables and blocks up to 6 x 6.
fn curated() -> Vec<(String, LmiFeasibilityProblem)> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for n in 2..=6 {
        for rep in 0..2 {
            let a = dominant_metzler(&mut rng, n);
            out.push((format!("lyapunov n={n} #{rep}"), lyapunov_problem(&a, 1e-3, 1e3)));
        }
    }

    let sys = models::example1();
    for alpha in [0.3, 0.5, 0.9, 1.0] {
        let trig = TriggerConfig::new(alpha, 1.5).unwrap();
        out.push((format!("example1 alpha={alpha}"), build_design_problem(&sys, &trig, 2.6341).unwrap()));
    }
    let tank = models::tank_linearize(&models::TankParameters::reference_rig()).unwrap().to_system("tank").unwrap();
    let trig = TriggerConfig::new(0.5, 1.5).unwrap();
    out.push(("tank".into(), build_design_problem(&tank, &trig, 0.2).unwrap()));

    // z1 I - 2I ≺ 0 with z1 in [0, 5]
    let mut p = LmiFeasibilityProblem::new(1, 0.0, 5.0);
    p.matrix_constraints.push(neg_def(Matrix::identity(2).scale(-2.0), vec![Matrix::identity(2)]));
    out.push(("scalar interval".into(), p));

    // [[z1 - 2, 1], [1, z2 - 2]] ≺ 0
    let mut p = LmiFeasibilityProblem::new(2, -10.0, 10.0);
    p.matrix_constraints.push(neg_def(
        m(&[&[-2.0, 1.0], &[1.0, -2.0]]),
        vec![m(&[&[1.0, 0.0], &[0.0, 0.0]]), m(&[&[0.0, 0.0], &[0.0, 1.0]])],
    ));
    out.push(("coupled 2x2".into(), p));

    // entrywise only: z1 - z2 >= 0, z2 - 0.5 >= 0
    let mut p = LmiFeasibilityProblem::new(2, 0.0, 1.0);
    p.elementwise_constraints.push(geq(
        m(&[&[0.0, -0.5]]),
        vec![m(&[&[1.0, 0.0]]), m(&[&[-1.0, 1.0]])],
    ));
    out.push(("entrywise only".into(), p));

    // random symmetric F0 shifted by a scalar variable
    let f0 = random_symmetric(&mut rng, 6, 3.0);
    let mut p = LmiFeasibilityProblem::new(3, -20.0, 20.0);
    let mut c2 = Matrix::zeros(6, 6);
    c2[(0, 1)] = 1.0;
    c2[(1, 0)] = 1.0;
    p.matrix_constraints.push(neg_def(f0, vec![Matrix::identity(6), c2, Matrix::from_diag(&[1.0, 0.0, 0.0, 0.0, 0.0, 1.0])]));
    out.push(("shifted 6x6".into(), p));

    // two matrix constraints sharing a variable, plus a pinned entry row
    let mut p = LmiFeasibilityProblem::new(2, 0.0, 4.0);
    p.matrix_constraints.push(neg_def(Matrix::from_diag(&[-1.0, -3.0]), vec![Matrix::identity(2), Matrix::zeros(2, 2)]));
    p.matrix_constraints.push(neg_def(Matrix::from_diag(&[0.5]), vec![Matrix::from_diag(&[-1.0]), Matrix::from_diag(&[-0.1])]));
    p.elementwise_constraints.push(geq(m(&[&[0.0]]), vec![m(&[&[0.0]]), m(&[&[-1.0]])]));
    out.push(("pinned second variable".into(), p));
    out
}

#[test]
fn curated_feasible_suite() {
    let suite = curated();
    assert_eq!(suite.len(), 20);
    for (name, p) in &suite {
        assert!(p.dim <= 12, "{name}");
        assert!(p.matrix_constraints.iter().all(|c| c.constant.rows() <= 6), "{name}");
        let out = solve(p, &SolverOptions::default()).unwrap();
        let z = match &out.status {
            LmiStatus::Feasible { z } => z,
            other => panic!("{name}: {other:?} after {} iterations", out.iterations),
        };
        assert!(check_solution(p, z, 0.0).unwrap().pass, "{name}");
    }
}

#[test]
fn random_problems_are_sound() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut feasible = 0;
    for _ in 0..200 {
        let p = random_problem(&mut rng);
        let out = solve(&p, &SolverOptions::default()).unwrap();
        if let LmiStatus::Feasible { z } = &out.status {
            feasible += 1;
            assert!(check_solution(&p, z, 0.0).unwrap().pass);
        }
        if let LmiStatus::Infeasible { .. } = &out.status {
            // a certificate must hold: no sampled point may satisfy everything
            for _ in 0..200 {
                let z: Vec<f64> = (0..p.dim).map(|_| rng.gen_range(-5.0..5.0)).collect();
                assert!(!check_solution(&p, &z, 0.0).unwrap().pass);
            }
        }
    }
    assert!(feasible > 10, "only {feasible} feasible draws");
}

#[test]
fn solve_is_deterministic() {
    for (_, p) in curated().iter().take(6) {
        let a = solve(p, &SolverOptions::default()).unwrap();
        let b = solve(p, &SolverOptions::default()).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }
}

#[test]
fn problem_serialization_round_trip() {
    for (_, p) in curated() {
        let text = serde_json::to_string(&p).unwrap();
        let back: LmiFeasibilityProblem = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }
}

#[test]
fn unstable_lyapunov_is_never_feasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for n in 2..=4 {
        let mut a = dominant_metzler(&mut rng, n);
        a.axpy(10.0, &Matrix::identity(n)).unwrap();
        let out = solve(&lyapunov_problem(&a, 1e-3, 1e3), &SolverOptions::default()).unwrap();
        assert!(!out.is_feasible());
    }
}

#[test]
fn tiny_budget_reports_undetermined_not_infeasible() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = dominant_metzler(&mut rng, 5);
    let p = lyapunov_problem(&a, 1e-3, 1e3);
    let out = solve(&p, &SolverOptions { max_iters: 1, ..SolverOptions::default() }).unwrap();
    assert!(!matches!(out.status, LmiStatus::Infeasible { .. }));
}
