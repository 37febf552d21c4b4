//! File-based front end: JSON models and designs in, JSON/CSV artifacts out.
//!
//! Relative output paths are resolved against `POSOBS_OUT_DIR` when that
//! variable is set.

use std::ffi::OsString;
use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::etsim::{self, SimulationConfig, SimulationTrace, DEFAULT_EVENT_TIME_TOL};
use crate::matcore::{mat_mul, Matrix, Vector};
use crate::models::{self, TankParametersFile};
use crate::posys::{self, AnalysisReport, PositiveLinearSystem, DEFAULT_POSITIVITY_TOL};
use crate::synth::{self, DesignReport, ObserverDesign, TriggerConfig};

pub const OUT_DIR_ENV: &str = "POSOBS_OUT_DIR";

/// Transmission savings the three-tank study reports against 1 s sampling.
pub const REFERENCE_TANK_SAVINGS_PCT: f64 = 78.75;

/// On-disk plant description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemFile {
    pub label: String,
    #[serde(rename = "A")]
    pub a: Vec<Vec<f64>>,
    #[serde(rename = "B", default, skip_serializing_if = "Option::is_none")]
    pub b: Option<Vec<Vec<f64>>>,
    #[serde(rename = "C")]
    pub c: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equilibrium: Option<Vec<f64>>,
}

/// Raw matrices of a [`SystemFile`], before any positivity requirement.
pub struct RawSystem {
    pub label: String,
    pub a: Matrix,
    pub b: Option<Matrix>,
    pub c: Matrix,
    pub equilibrium: Option<Vector>,
}

fn field_matrix(name: &str, rows: &[Vec<f64>]) -> Result<Matrix> {
    Matrix::from_rows(rows).map_err(|e| Error::invalid(format!("field {name}: {e}")))
}

impl SystemFile {
    pub fn from_system(sys: &PositiveLinearSystem) -> Self {
        Self {
            label: sys.label().to_string(),
            a: sys.a().to_rows(),
            b: sys.b().map(Matrix::to_rows),
            c: sys.c().to_rows(),
            equilibrium: sys.equilibrium().map(|v| v.to_vec()),
        }
    }

    pub fn raw(&self) -> Result<RawSystem> {
        let a = field_matrix("A", &self.a)?;
        let b = self.b.as_deref().map(|b| field_matrix("B", b)).transpose()?;
        let c = field_matrix("C", &self.c)?;
        let equilibrium = self
            .equilibrium
            .clone()
            .map(|v| Vector::new(v).map_err(|e| Error::invalid(format!("field equilibrium: {e}"))))
            .transpose()?;
        posys::validate_shapes(&a, b.as_ref(), &c, equilibrium.as_deref())?;
        Ok(RawSystem { label: self.label.clone(), a, b, c, equilibrium })
    }

    pub fn to_system(&self) -> Result<PositiveLinearSystem> {
        let r = self.raw()?;
        PositiveLinearSystem::new(r.label, r.a, r.b, r.c, r.equilibrium, DEFAULT_POSITIVITY_TOL)
    }
}

/// Every input of a simulation run. Replaying a manifest reproduces the
/// trace byte for byte.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub system: SystemFile,
    pub alpha: f64,
    pub beta: f64,
    /// Used only when `design` is absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda_grid: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub design: Option<ObserverDesign>,
    pub simulation: SimulationConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub periodic_interval: Option<f64>,
}

pub fn crate_version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

/// Outputs of a manifest run.
pub struct RunOutput {
    pub system: PositiveLinearSystem,
    pub trigger: TriggerConfig,
    pub design: ObserverDesign,
    pub trace: SimulationTrace,
    pub summary: SimulationSummary,
}

pub fn run_manifest(m: &RunManifest) -> Result<RunOutput> {
    let system = m.system.to_system()?;
    let trigger = TriggerConfig::new(m.alpha, m.beta)?;
    let design = match &m.design {
        Some(d) => d.clone(),
        None => synth::synthesize(&system, &trigger, m.lambda_grid.as_deref())?,
    };
    let mut trace = etsim::simulate(&system, &design, &trigger, &m.simulation)?;
    let summary = summarize(&system, &design, &trigger, &m.simulation, &mut trace, m.periodic_interval)?;
    Ok(RunOutput { system, trigger, design, trace, summary })
}

/// Matrix that enters the inter-event bound: `A - BK` under feedback,
/// otherwise `A`.
pub fn effective_state_matrix(sys: &PositiveLinearSystem, cfg: &SimulationConfig) -> Result<Matrix> {
    match (&cfg.feedback_gain, sys.b()) {
        (Some(k), Some(b)) => sys.a().sub(&mat_mul(b, k)?),
        _ => Ok(sys.a().clone()),
    }
}

/// Figures printed after a simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSummary {
    pub events: usize,
    pub zeno: etsim::ZenoReport,
    pub lyapunov_monotone: bool,
    pub positivity: etsim::PositivityAudit,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub savings: Option<etsim::SavingsReport>,
    pub final_error_norm: f64,
}

pub fn summarize(
    sys: &PositiveLinearSystem,
    design: &ObserverDesign,
    trig: &TriggerConfig,
    cfg: &SimulationConfig,
    trace: &mut SimulationTrace,
    periodic_interval: Option<f64>,
) -> Result<SimulationSummary> {
    let zeno = etsim::zeno_report(trace, &effective_state_matrix(sys, cfg)?, trig.alpha(), cfg.event_time_tol)?;
    let lyapunov_monotone = etsim::attach_lyapunov(trace, design)?;
    let positivity = etsim::positivity_audit(trace, 1e-9);
    let savings = periodic_interval.map(|p| etsim::savings_report(trace, p)).transpose()?;
    let final_error_norm = trace.e.last().map_or(0.0, |e| crate::matcore::norm2(e));
    Ok(SimulationSummary { events: trace.transmissions, zeno, lyapunov_monotone, positivity, savings, final_error_norm })
}

#[derive(Debug, Parser)]
#[command(name = "posobs", version, about = "Event-based positive observer design and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Positivity and stability report for a system file.
    Analyze {
        system: PathBuf,
        /// Also write the report as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesize an observer gain and write the design file.
    Synthesize {
        system: PathBuf,
        #[command(flatten)]
        trigger: TriggerArgs,
        /// Comma-separated λ candidates (default: log grid anchored at the
        /// Metzler shift of A).
        #[arg(long, value_delimiter = ',')]
        lambda_grid: Option<Vec<f64>>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Simulate the plant and observer under the event law.
    Simulate(SimulateArgs),
    /// Re-run a manifest written by `simulate --manifest`.
    Replay {
        manifest: PathBuf,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Minimum inter-event bound for a list of α values.
    Zeno {
        system: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        alphas: Vec<f64>,
        /// Also write `alpha,bound` rows as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Linearize the three-tank rig and write its system file.
    Tank {
        params: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, Args)]
pub struct TriggerArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub alpha: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub beta: f64,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    pub system: PathBuf,
    pub design: PathBuf,
    #[command(flatten)]
    pub trigger: TriggerArgs,
    #[arg(long, value_delimiter = ',', required = true, allow_negative_numbers = true)]
    pub x0: Vec<f64>,
    /// Defaults to the zero vector.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub xhat0: Option<Vec<f64>>,
    #[arg(long, allow_negative_numbers = true)]
    pub horizon: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub step: f64,
    #[arg(long, default_value_t = DEFAULT_EVENT_TIME_TOL)]
    pub event_time_tol: f64,
    /// Row-major `m x n` gain for `u = -K (x - x_eq)`.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    pub feedback_gain: Option<Vec<f64>>,
    /// Trigger on `C x` rather than on deviations from the equilibrium.
    #[arg(long)]
    pub absolute_output: bool,
    #[arg(long)]
    pub output_floor: Option<f64>,
    /// Use only the threshold condition, letting `ε` go negative.
    #[arg(long)]
    pub no_negative_guard: bool,
    #[arg(long)]
    pub periodic_interval: Option<f64>,
    #[arg(long)]
    pub trace: Option<PathBuf>,
    #[arg(long)]
    pub events: Option<PathBuf>,
    /// Write a manifest that `replay` can reproduce.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => Path::new(&dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io { path: path.display().to_string(), source }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path, what: &str) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Parse { what: format!("{what} {}", path.display()), source })
}

fn create(path: &Path) -> Result<(PathBuf, BufWriter<fs::File>)> {
    let path = resolve_out(path);
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    }
    let f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    Ok((path, BufWriter::new(f)))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<PathBuf> {
    let (path, mut w) = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| Error::Parse { what: "output".into(), source })?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(&path, e))?;
    Ok(path)
}

fn flag(ok: bool) -> &'static str {
    if ok {
        "yes"
    } else {
        "no"
    }
}

pub fn cmd_analyze(system: &Path, out: Option<&Path>, w: &mut dyn Write) -> Result<AnalysisReport> {
    let file: SystemFile = read_json(system, "system file")?;
    let raw = file.raw()?;
    let report = posys::analyze_matrices(&raw.a, raw.b.as_ref(), &raw.c, DEFAULT_POSITIVITY_TOL)?;
    let obs = posys::observability_rank(&raw.a, &raw.c);
    let _ = writeln!(w, "system: {}", raw.label);
    let _ = writeln!(w, "metzler: {}", report.metzler);
    let _ = writeln!(w, "output_nonneg: {}", report.output_nonneg);
    if let Some(b) = report.input_nonneg {
        let _ = writeln!(w, "input_nonneg: {b}");
    }
    let _ = writeln!(w, "hurwitz: {}", report.hurwitz);
    let _ = writeln!(w, "metzler_shift: {}", report.metzler_shift);
    if let Some(v) = &report.positive_scaling_vector {
        let _ = writeln!(w, "scaling_vector: {:?}", v.as_ref() as &[f64]);
    }
    let _ = writeln!(w, "observability_rank: {obs} of {}", raw.a.rows());
    let _ = writeln!(w, "positive_system: {}", report.is_positive());
    if let Some(out) = out {
        let p = write_json(out, &report)?;
        let _ = writeln!(w, "report: {}", p.display());
    }
    Ok(report)
}

fn print_design_report(w: &mut dyn Write, d: &ObserverDesign, r: &DesignReport) {
    let _ = writeln!(w, "lambda: {}", d.lambda);
    let _ = writeln!(w, "L: {:?}", d.l.to_rows());
    let _ = writeln!(w, "P diag: {:?}", d.p);
    let _ = writeln!(w, "Q diag: {:?}", d.q);
    let _ = writeln!(w, "A-LC Metzler: {}", flag(r.metzler_alc));
    let _ = writeln!(w, "L >= 0: {}", flag(r.l_nonneg));
    let _ = writeln!(w, "LMI lambda_max: {} ({})", r.lmi_margin, flag(r.lmi_pass));
    let _ = writeln!(w, "elementwise min: {} ({})", r.elementwise_margin, flag(r.elementwise_pass));
    let _ = writeln!(w, "augmented Hurwitz: {}", flag(r.augmented_hurwitz));
    let _ = writeln!(w, "observable: {}", flag(r.observability_ok));
}

pub fn cmd_synthesize(
    system: &Path,
    trigger: TriggerArgs,
    lambda_grid: Option<&[f64]>,
    out: &Path,
    w: &mut dyn Write,
) -> Result<ObserverDesign> {
    let trig = TriggerConfig::new(trigger.alpha, trigger.beta)?;
    let sys = read_json::<SystemFile>(system, "system file")?.to_system()?;
    let design = match synth::synthesize(&sys, &trig, lambda_grid) {
        Ok(d) => d,
        Err(Error::SynthesisFailed(diags)) => {
            for d in &diags {
                let _ = writeln!(
                    w,
                    "lambda {}: {} after {} iterations, worst violation {}",
                    d.lambda, d.status, d.iterations, d.worst_violation
                );
            }
            return Err(Error::SynthesisFailed(diags));
        }
        Err(e) => return Err(e),
    };
    let report = synth::verify_design(&sys, &trig, &design)?;
    print_design_report(w, &design, &report);
    let p = write_json(out, &design)?;
    let _ = writeln!(w, "design: {}", p.display());
    Ok(design)
}

fn write_trace_files(trace: &SimulationTrace, csv: Option<&Path>, events: Option<&Path>, w: &mut dyn Write) -> Result<()> {
    if let Some(csv) = csv {
        let (p, mut f) = create(csv)?;
        etsim::write_trace_csv(trace, &mut f).and_then(|_| f.flush()).map_err(|e| io_err(&p, e))?;
        let _ = writeln!(w, "trace: {}", p.display());
    }
    if let Some(ev) = events {
        let p = write_json(ev, &etsim::event_log(trace))?;
        let _ = writeln!(w, "events: {}", p.display());
    }
    Ok(())
}

fn print_summary(w: &mut dyn Write, s: &SimulationSummary) {
    let _ = writeln!(w, "events: {}", s.events);
    match s.zeno.min_observed_iet {
        Some(m) => {
            let _ = writeln!(w, "min IET: {m}");
        }
        None => {
            let _ = writeln!(w, "min IET: n/a (single event)");
        }
    }
    let _ = writeln!(w, "Zeno bound: {} (satisfied: {})", s.zeno.bound, flag(s.zeno.satisfied));
    let _ = writeln!(w, "Lyapunov monotone: {}", flag(s.lyapunov_monotone));
    let a = &s.positivity;
    let _ = writeln!(
        w,
        "positivity: x {} xhat {} e {} eps {} (min x {:e}, xhat {:e}, e {:e}, eps {:e})",
        flag(a.x_nonneg),
        flag(a.xhat_nonneg),
        flag(a.e_nonneg),
        flag(a.eps_nonneg),
        a.min_x,
        a.min_xhat,
        a.min_e,
        a.min_eps
    );
    let _ = writeln!(w, "final |e|: {:e}", s.final_error_norm);
    if let Some(sv) = &s.savings {
        let _ = writeln!(
            w,
            "savings: {} events vs {} periodic samples = {}% (three-tank reference: {}%)",
            sv.event_count, sv.periodic_count, sv.savings_pct, REFERENCE_TANK_SAVINGS_PCT
        );
    }
}

pub fn manifest_from_args(args: &SimulateArgs) -> Result<RunManifest> {
    let system: SystemFile = read_json(&args.system, "system file")?;
    let design: ObserverDesign = read_json(&args.design, "design file")?;
    let n = system.a.len();
    let feedback_gain = match &args.feedback_gain {
        Some(k) => {
            if n == 0 || k.len() % n != 0 {
                return Err(Error::dim(format!("feedback gain has {} entries, not a multiple of {n}", k.len())));
            }
            Some(Matrix::new(k.len() / n, n, k.clone())?)
        }
        None => None,
    };
    let simulation = SimulationConfig {
        x0: args.x0.clone(),
        xhat0: args.xhat0.clone().unwrap_or_else(|| vec![0.0; args.x0.len()]),
        horizon: args.horizon,
        step: args.step,
        event_time_tol: args.event_time_tol,
        feedback_gain,
        use_absolute_output: args.absolute_output,
        output_floor: args.output_floor,
        guard_negative_error: !args.no_negative_guard,
    };
    Ok(RunManifest {
        version: crate_version().to_string(),
        system,
        alpha: args.trigger.alpha,
        beta: args.trigger.beta,
        lambda_grid: None,
        design: Some(design),
        simulation,
        periodic_interval: args.periodic_interval,
    })
}

pub fn cmd_simulate(args: &SimulateArgs, w: &mut dyn Write) -> Result<SimulationSummary> {
    let manifest = manifest_from_args(args)?;
    let out = run_manifest(&manifest)?;
    print_summary(w, &out.summary);
    write_trace_files(&out.trace, args.trace.as_deref(), args.events.as_deref(), w)?;
    if let Some(m) = &args.manifest {
        let p = write_json(m, &manifest)?;
        let _ = writeln!(w, "manifest: {}", p.display());
    }
    Ok(out.summary)
}

pub fn cmd_replay(manifest: &Path, trace: Option<&Path>, events: Option<&Path>, w: &mut dyn Write) -> Result<SimulationSummary> {
    let m: RunManifest = read_json(manifest, "manifest")?;
    if m.version != crate_version() {
        let _ = writeln!(w, "warning: manifest written by version {}, running {}", m.version, crate_version());
    }
    let out = run_manifest(&m)?;
    print_summary(w, &out.summary);
    write_trace_files(&out.trace, trace, events, w)?;
    Ok(out.summary)
}

/// `(α, bound)` pairs sorted by `α`.
pub fn cmd_zeno(system: &Path, alphas: &[f64], out: Option<&Path>, w: &mut dyn Write) -> Result<Vec<(f64, f64)>> {
    let raw = read_json::<SystemFile>(system, "system file")?.raw()?;
    let mut sorted = alphas.to_vec();
    sorted.sort_by(f64::total_cmp);
    let curve = etsim::iet_curve(&raw.a, &sorted)?;
    let _ = writeln!(w, "alpha,bound");
    for (a, b) in &curve {
        let _ = writeln!(w, "{a},{b:.4}");
    }
    if let Some(out) = out {
        let (p, mut f) = create(out)?;
        let mut text = String::from("alpha,bound\n");
        for (a, b) in &curve {
            text.push_str(&format!("{a:.16e},{b:.16e}\n"));
        }
        f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(|e| io_err(&p, e))?;
        let _ = writeln!(w, "curve: {}", p.display());
    }
    Ok(curve)
}

pub fn cmd_tank(params: &Path, out: &Path, w: &mut dyn Write) -> Result<SystemFile> {
    let file: TankParametersFile = read_json(params, "tank parameters")?;
    let p = file.to_si()?;
    let lin = models::tank_linearize(&p)?;
    let sys = lin.to_system("three-tank")?;
    let _ = writeln!(w, "areas [m^2]: {:?}", lin.areas);
    let _ = writeln!(w, "A: {:?}", lin.a.to_rows());
    let _ = writeln!(w, "A Metzler: {}", flag(posys::is_metzler(&lin.a, 0.0)?));
    let res = p.steady_state_residual();
    let _ = writeln!(w, "relative steady-state flow mismatch: {res:?}");
    if let Some(k) = p.k {
        let cl = models::tank_closed_loop(&lin, &Matrix::new(1, 3, k.to_vec())?)?;
        if !cl.metzler {
            let _ = writeln!(w, "warning: closed loop A-BK is not Metzler; negative off-diagonal entries:");
            for (i, j, v) in &cl.violations {
                let _ = writeln!(w, "  ({}, {}) = {v}", i + 1, j + 1);
            }
        }
    }
    let sf = SystemFile::from_system(&sys);
    let path = write_json(out, &sf)?;
    let _ = writeln!(w, "system: {}", path.display());
    Ok(sf)
}

pub fn dispatch(cli: Cli, w: &mut dyn Write) -> Result<()> {
    match cli.command {
        Command::Analyze { system, out } => cmd_analyze(&system, out.as_deref(), w).map(drop),
        Command::Synthesize { system, trigger, lambda_grid, out } => {
            cmd_synthesize(&system, trigger, lambda_grid.as_deref(), &out, w).map(drop)
        }
        Command::Simulate(args) => cmd_simulate(&args, w).map(drop),
        Command::Replay { manifest, trace, events } => {
            cmd_replay(&manifest, trace.as_deref(), events.as_deref(), w).map(drop)
        }
        Command::Zeno { system, alphas, out } => cmd_zeno(&system, &alphas, out.as_deref(), w).map(drop),
        Command::Tank { params, out } => cmd_tank(&params, &out, w).map(drop),
    }
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let stdout = std::io::stdout();
    let mut lock = stdout.lock();
    match dispatch(cli, &mut lock) {
        Ok(()) => 0,
        Err(e) => {
            let _ = lock.flush();
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
