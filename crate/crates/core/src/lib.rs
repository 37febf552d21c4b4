//! Event-based positive observers for continuous-time linear positive
//! systems.
//!
//! The crate covers the whole pipeline:
//!
//! * [`matcore`]: dense real matrices, linear solves, symmetric eigenvalues.
//! * [`posys`]: Metzler, nonnegativity and Hurwitz checks.
//! * [`lmi`]: a small LMI feasibility solver with elementwise constraints.
//! * [`synth`]: observer gain synthesis over a grid of decay shifts `λ`.
//! * [`etsim`]: simulation of the plant and observer under the event law.
//! * [`models`]: a two-state example plant and a linearized three-tank rig.
//! * [`cli`]: the file-based front end used by the `posobs` binary.
//!
//! ```
//! use posobs::{models, synth::{synthesize, verify_design, TriggerConfig}};
//!
//! let sys = models::example1();
//! let trig = TriggerConfig::new(0.3, 1.5).unwrap();
//! let design = synthesize(&sys, &trig, None).unwrap();
//! assert!(verify_design(&sys, &trig, &design).unwrap().all_pass());
//! ```

pub mod cli;
pub mod error;
pub mod etsim;
pub mod lmi;
pub mod matcore;
pub mod models;
pub mod posys;
pub mod synth;

pub use error::{Error, Result};
pub use etsim::{simulate, SimulationConfig, SimulationTrace};
pub use matcore::{Matrix, Vector};
pub use posys::PositiveLinearSystem;
pub use synth::{ObserverDesign, TriggerConfig};
