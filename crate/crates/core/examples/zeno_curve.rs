//! Minimum inter-event time bound as a function of the threshold `α`,
//! printed as CSV.
//!
//! `cargo run --example zeno_curve`

use posobs::etsim::iet_curve;
use posobs::models::example1;
use posobs::synth::log_grid;

fn main() -> posobs::Result<()> {
    let sys = example1();
    let alphas = log_grid(0.01, 100.0, 25);
    println!("alpha,bound");
    for (a, b) in iet_curve(sys.a(), &alphas)? {
        println!("{a:.6},{b:.6}");
    }
    Ok(())
}
