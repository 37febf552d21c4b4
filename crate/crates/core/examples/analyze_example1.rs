//! Positivity and stability checks on the two-state example plant.
//!
//! `cargo run --example analyze_example1`

use posobs::matcore::{spectral_norm, sym_eigen};
use posobs::models::example1;
use posobs::posys::{check_positive_system, observability_rank, DEFAULT_POSITIVITY_TOL};

fn main() -> posobs::Result<()> {
    let sys = example1();
    let report = check_positive_system(&sys, DEFAULT_POSITIVITY_TOL);
    println!("A = {:?}", sys.a().to_rows());
    println!("Metzler: {}, C >= 0: {}", report.metzler, report.output_nonneg);
    println!("Hurwitz: {} with witness {:?}", report.hurwitz, report.positive_scaling_vector);
    println!("Metzler shift: {}", report.metzler_shift);
    println!("||A||_2 = {:.5}", spectral_norm(sys.a()));

    let ata = posobs::matcore::mat_mul(&sys.a().transpose(), sys.a())?;
    let (vals, _) = sym_eigen(&ata)?;
    println!("eig(A^T A) = {:?}", &*vals);
    println!("observability rank: {}", observability_rank(sys.a(), sys.c()));
    Ok(())
}
