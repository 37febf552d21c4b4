//! Event-triggered estimation on the two-state example with the published
//! gain, followed by trace export.
//!
//! `cargo run --example simulate_event_loop [out_dir]`

use std::fs::File;
use std::path::PathBuf;

use posobs::etsim::{
    attach_lyapunov, event_log, positivity_audit, simulate, write_trace_csv, zeno_report, SimulationConfig,
};
use posobs::matcore::Matrix;
use posobs::models::example1;
use posobs::synth::{ObserverDesign, TriggerConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sys = example1();
    let trig = TriggerConfig::new(0.3, 1.5)?;
    let design = ObserverDesign::from_pql(
        &sys,
        &trig,
        vec![0.3655, 1.1736],
        vec![0.4056, 0.9079],
        Matrix::column(&[0.9037, 0.0]),
        2.6341,
    )?;
    let cfg = SimulationConfig::new(vec![1.2, 1.8], vec![2.0, 2.0], 20.0, 1e-3);
    let mut trace = simulate(&sys, &design, &trig, &cfg)?;

    let monotone = attach_lyapunov(&mut trace, &design)?;
    let zeno = zeno_report(&trace, sys.a(), trig.alpha(), cfg.event_time_tol)?;
    let audit = positivity_audit(&trace, 1e-9);
    println!("transmissions: {}", trace.transmissions);
    println!("min IET {:?} vs bound {:.4}", zeno.min_observed_iet, zeno.bound);
    println!("Lyapunov monotone: {monotone}");
    println!("positivity: {}", audit.all_pass());
    println!("e(20) = {:?}", trace.e.last().expect("non-empty"));

    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(std::env::temp_dir);
    let csv = dir.join("example1_trace.csv");
    write_trace_csv(&trace, File::create(&csv)?)?;
    let events = dir.join("example1_events.json");
    serde_json::to_writer_pretty(File::create(&events)?, &event_log(&trace))?;
    println!("wrote {} and {}", csv.display(), events.display());
    Ok(())
}
