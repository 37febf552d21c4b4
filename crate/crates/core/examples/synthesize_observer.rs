//! Observer gain synthesis on the two-state example for several event
//! thresholds, next to the published design point.
//!
//! `cargo run --example synthesize_observer`

use posobs::matcore::Matrix;
use posobs::models::example1;
use posobs::synth::{synthesize, verify_design, ObserverDesign, TriggerConfig};

fn main() -> posobs::Result<()> {
    let sys = example1();
    for alpha in [0.3, 0.5, 0.9, 1.0] {
        let trig = TriggerConfig::new(alpha, 1.5)?;
        let d = synthesize(&sys, &trig, None)?;
        let r = verify_design(&sys, &trig, &d)?;
        println!(
            "alpha {alpha}: lambda {:.4}, L = {:?}, lmi max eig {:.3e}, all checks {}",
            d.lambda,
            d.l.to_rows(),
            d.lmi_margin,
            r.all_pass()
        );
    }

    let trig = TriggerConfig::new(0.3, 1.5)?;
    let reference = ObserverDesign::from_pql(
        &sys,
        &trig,
        vec![0.3655, 1.1736],
        vec![0.4056, 0.9079],
        Matrix::column(&[0.9037, 0.0]),
        2.6341,
    )?;
    let r = verify_design(&sys, &trig, &reference)?;
    println!(
        "reference design: lmi max eig {:.4}, smallest diagonal of QA-WC+lambda Q {:.4}, all checks {}",
        r.lmi_margin,
        r.diagonal_margin,
        r.all_pass()
    );
    println!("{}", serde_json::to_string_pretty(&reference).expect("serializable"));
    Ok(())
}
