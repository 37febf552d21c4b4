//! Event-triggered simulation of the plant and the positive observer.
//!
//! The plant `ẋ = A(x - x_eq) + B u` and the observer
//!
//! ```text
//! x̂̇ = A(x̂ - x_eq) + B u + β L y(t_k) - L ŷ
//! ```
//!
//! are integrated together with fixed-step RK4. Between transmissions the
//! observer holds the last sample `y(t_k)`. A transmission happens when the
//! weighted sampling error `ε = β y(t_k) - y` meets `εᵢ >= (αβ + β - 1) yᵢ`
//! for some output, or, with `guard_negative_error` set, when some `εᵢ`
//! drops to zero. Crossings inside a step are located by bisection.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{mat_mul, spectral_norm, Matrix};
use crate::posys::PositiveLinearSystem;
use crate::synth::{ObserverDesign, TriggerConfig};

pub const DEFAULT_EVENT_TIME_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    /// Plant initial state (absolute coordinates when the system carries an
    /// equilibrium).
    pub x0: Vec<f64>,
    pub xhat0: Vec<f64>,
    pub horizon: f64,
    pub step: f64,
    pub event_time_tol: f64,
    /// Plant input `u = -K (x - x_eq)`; needs an input matrix on the system.
    pub feedback_gain: Option<Matrix>,
    /// Trigger on `C x` instead of `C (x - x_eq)`.
    pub use_absolute_output: bool,
    /// Suppress triggering while every `|yᵢ|` is below this value.
    pub output_floor: Option<f64>,
    /// Also transmit when some `εᵢ` reaches zero, which keeps `ε >= 0`
    /// while outputs grow.
    pub guard_negative_error: bool,
}

impl SimulationConfig {
    pub fn new(x0: Vec<f64>, xhat0: Vec<f64>, horizon: f64, step: f64) -> Self {
        Self {
            x0,
            xhat0,
            horizon,
            step,
            event_time_tol: DEFAULT_EVENT_TIME_TOL,
            feedback_gain: None,
            use_absolute_output: false,
            output_floor: None,
            guard_negative_error: true,
        }
    }

    /// Observer starting from the origin.
    pub fn from_zero_estimate(x0: Vec<f64>, horizon: f64, step: f64) -> Self {
        let n = x0.len();
        Self::new(x0, vec![0.0; n], horizon, step)
    }

    pub fn validate(&self, sys: &PositiveLinearSystem) -> Result<()> {
        let n = sys.n_states();
        if self.x0.len() != n || self.xhat0.len() != n {
            return Err(Error::dim(format!("initial states must have length {n}")));
        }
        if self.x0.iter().chain(&self.xhat0).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("initial state"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be > 0, got {}", self.horizon)));
        }
        if !(self.step > 0.0 && self.step < self.horizon) {
            return Err(Error::invalid(format!("step must lie in (0, horizon), got {}", self.step)));
        }
        if !(self.event_time_tol > 0.0 && self.event_time_tol <= self.step) {
            return Err(Error::invalid("event_time_tol must lie in (0, step]"));
        }
        if let Some(k) = &self.feedback_gain {
            let m = sys.n_inputs();
            if m == 0 {
                return Err(Error::invalid("feedback gain given but the system has no input matrix"));
            }
            if k.shape() != (m, n) {
                return Err(Error::dim(format!("feedback gain is {:?}, expected {m} x {n}", k.shape())));
            }
        }
        if let Some(f) = self.output_floor {
            if !(f >= 0.0) {
                return Err(Error::invalid("output_floor must be non-negative"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    /// The first transmission at `t = 0`.
    Initial,
    /// `εᵢ >= (αβ + β - 1) yᵢ`.
    Threshold,
    /// `εᵢ <= 0`.
    NegativeError,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub k: usize,
    pub t: f64,
    /// Transmitted sample `y(t_k)`.
    pub y: Vec<f64>,
    pub kind: EventKind,
    /// `ε` just before the sample was refreshed.
    pub eps_before: Vec<f64>,
    /// Trigger function on the firing side of the bisection bracket.
    pub surface_value: f64,
    /// Trigger function on the quiet side of the bracket.
    pub quiet_value: f64,
}

/// Samples of a run, on the regular grid plus one extra sample per event.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationTrace {
    pub times: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub xhat: Vec<Vec<f64>>,
    pub e: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
    pub yhat: Vec<Vec<f64>>,
    pub epsilon: Vec<Vec<f64>>,
    /// `true` on the samples taken at event times (after the refresh).
    pub is_event: Vec<bool>,
    pub events: Vec<EventRecord>,
    pub iets: Vec<f64>,
    pub lyapunov: Option<Vec<f64>>,
    pub transmissions: usize,
    pub min_epsilon_seen: f64,
    pub horizon: f64,
    /// Operating point the plant coordinates are measured from.
    pub equilibrium: Vec<f64>,
}

/// `true` iff some `εᵢ >= (αβ + β - 1) yᵢ`.
///
/// # Panics
///
/// If `eps` and `y` differ in length.
pub fn trigger_violated(eps: &[f64], y: &[f64], trig: &TriggerConfig) -> bool {
    assert_eq!(eps.len(), y.len(), "eps and y must have equal length");
    let th = trig.threshold_coeff();
    eps.iter().zip(y).any(|(e, yi)| *e >= th * yi)
}

struct Loop<'a> {
    a: &'a Matrix,
    c: &'a Matrix,
    /// `B K`, if feedback is active.
    bk: Option<Matrix>,
    l: &'a Matrix,
    x_eq: Vec<f64>,
    out_shift: Vec<f64>,
    beta: f64,
    threshold: f64,
    floor: Option<f64>,
    guard: bool,
    n: usize,
}

impl Loop<'_> {
    fn output(&self, x: &[f64]) -> Vec<f64> {
        let y = self.c.mul_vec(x).expect("validated");
        y.iter().zip(&self.out_shift).map(|(a, b)| a - b).collect()
    }

    fn epsilon(&self, yk: &[f64], y: &[f64]) -> Vec<f64> {
        yk.iter().zip(y).map(|(s, v)| self.beta * s - v).collect()
    }

    fn deriv(&self, s: &[f64], yk: &[f64]) -> Vec<f64> {
        let n = self.n;
        let (x, xh) = s.split_at(n);
        let h: Vec<f64> = x.iter().zip(&self.x_eq).map(|(a, b)| a - b).collect();
        let hh: Vec<f64> = xh.iter().zip(&self.x_eq).map(|(a, b)| a - b).collect();
        let mut dx = self.a.mul_vec(&h).expect("validated").into_inner();
        let mut dxh = self.a.mul_vec(&hh).expect("validated").into_inner();
        if let Some(bk) = &self.bk {
            // B u = -B K h, known to both sides
            let bu = bk.mul_vec(&h).expect("validated");
            for i in 0..n {
                dx[i] -= bu[i];
                dxh[i] -= bu[i];
            }
        }
        let yhat = self.output(xh);
        let innov: Vec<f64> = yk.iter().zip(&yhat).map(|(s, v)| self.beta * s - v).collect();
        let corr = self.l.mul_vec(&innov).expect("validated");
        for i in 0..n {
            dxh[i] += corr[i];
        }
        dx.extend(dxh);
        dx
    }

    fn rk4(&self, s: &[f64], dt: f64, yk: &[f64]) -> Vec<f64> {
        let add = |base: &[f64], k: &[f64], f: f64| -> Vec<f64> { base.iter().zip(k).map(|(a, b)| a + f * b).collect() };
        let k1 = self.deriv(s, yk);
        let k2 = self.deriv(&add(s, &k1, 0.5 * dt), yk);
        let k3 = self.deriv(&add(s, &k2, 0.5 * dt), yk);
        let k4 = self.deriv(&add(s, &k3, dt), yk);
        s.iter()
            .enumerate()
            .map(|(i, v)| v + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
            .collect()
    }

    /// Trigger function: the event law fires when this is `>= 0`.
    /// Returns `(g, upper-part)` or `None` while the output floor holds.
    fn trigger(&self, s: &[f64], yk: &[f64]) -> Option<(f64, f64)> {
        let y = self.output(&s[..self.n]);
        if let Some(floor) = self.floor {
            if y.iter().all(|v| v.abs() < floor) {
                return None;
            }
        }
        let eps = self.epsilon(yk, &y);
        let upper = eps.iter().zip(&y).map(|(e, v)| e - self.threshold * v).fold(f64::NEG_INFINITY, f64::max);
        let lower = if self.guard { eps.iter().map(|e| -e).fold(f64::NEG_INFINITY, f64::max) } else { f64::NEG_INFINITY };
        Some((upper.max(lower), upper))
    }

    fn fires(&self, s: &[f64], yk: &[f64]) -> bool {
        self.trigger(s, yk).is_some_and(|(g, _)| g >= 0.0)
    }
}

struct Recorder<'a> {
    lp: &'a Loop<'a>,
    trace: SimulationTrace,
}

impl Recorder<'_> {
    fn sample(&mut self, t: f64, s: &[f64], yk: &[f64], event: bool) {
        let n = self.lp.n;
        let (x, xh) = s.split_at(n);
        let y = self.lp.output(x);
        let yhat = self.lp.output(xh);
        let eps = self.lp.epsilon(yk, &y);
        let tr = &mut self.trace;
        tr.min_epsilon_seen = eps.iter().copied().fold(tr.min_epsilon_seen, f64::min);
        tr.times.push(t);
        tr.e.push(xh.iter().zip(x).map(|(a, b)| a - b).collect());
        tr.x.push(x.to_vec());
        tr.xhat.push(xh.to_vec());
        tr.y.push(y);
        tr.yhat.push(yhat);
        tr.epsilon.push(eps);
        tr.is_event.push(event);
    }
}

/// Runs the coupled plant/observer loop under the event law.
pub fn simulate(
    sys: &PositiveLinearSystem,
    design: &ObserverDesign,
    trig: &TriggerConfig,
    cfg: &SimulationConfig,
) -> Result<SimulationTrace> {
    cfg.validate(sys)?;
    let n = sys.n_states();
    if design.l.shape() != (n, sys.n_outputs()) {
        return Err(Error::dim(format!(
            "gain is {:?}, system needs {n} x {}",
            design.l.shape(),
            sys.n_outputs()
        )));
    }
    let x_eq: Vec<f64> = sys.equilibrium().map_or_else(|| vec![0.0; n], |e| e.to_vec());
    let out_shift = if cfg.use_absolute_output {
        vec![0.0; sys.n_outputs()]
    } else {
        sys.c().mul_vec(&x_eq)?.into_inner()
    };
    let bk = match (&cfg.feedback_gain, sys.b()) {
        (Some(k), Some(b)) => Some(mat_mul(b, k)?),
        _ => None,
    };
    let lp = Loop {
        a: sys.a(),
        c: sys.c(),
        bk,
        l: &design.l,
        x_eq: x_eq.clone(),
        out_shift,
        beta: trig.beta(),
        threshold: trig.threshold_coeff(),
        floor: cfg.output_floor,
        guard: cfg.guard_negative_error,
        n,
    };

    let mut rec = Recorder {
        lp: &lp,
        trace: SimulationTrace {
            times: Vec::new(),
            x: Vec::new(),
            xhat: Vec::new(),
            e: Vec::new(),
            y: Vec::new(),
            yhat: Vec::new(),
            epsilon: Vec::new(),
            is_event: Vec::new(),
            events: Vec::new(),
            iets: Vec::new(),
            lyapunov: None,
            transmissions: 0,
            min_epsilon_seen: f64::INFINITY,
            horizon: cfg.horizon,
            equilibrium: x_eq,
        },
    };

    let mut s: Vec<f64> = cfg.x0.iter().chain(&cfg.xhat0).copied().collect();
    let mut t = 0.0;
    let mut yk = lp.output(&cfg.x0);
    let y0 = yk.clone();
    rec.trace.events.push(EventRecord {
        k: 0,
        t: 0.0,
        y: yk.clone(),
        kind: EventKind::Initial,
        eps_before: lp.epsilon(&y0, &y0),
        surface_value: 0.0,
        quiet_value: 0.0,
    });
    rec.sample(0.0, &s, &yk, true);

    let steps = (cfg.horizon / cfg.step - 1e-9).ceil() as usize;
    for j in 1..=steps {
        let t_grid = (j as f64 * cfg.step).min(cfg.horizon);
        loop {
            let dt = t_grid - t;
            if dt <= 0.0 {
                break;
            }
            let s_end = lp.rk4(&s, dt, &yk);
            if s_end.iter().any(|v| !v.is_finite()) {
                return Err(Error::SimulationAborted { time: t_grid, reason: "state became non-finite".into() });
            }
            if !lp.fires(&s_end, &yk) {
                s = s_end;
                t = t_grid;
                break;
            }
            // locate the crossing in (t, t_grid]
            let (mut lo, mut hi) = (0.0, dt);
            if !lp.fires(&s, &yk) {
                while hi - lo > cfg.event_time_tol {
                    let mid = 0.5 * (lo + hi);
                    if lp.fires(&lp.rk4(&s, mid, &yk), &yk) {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                }
            }
            let s_quiet = if lo > 0.0 { lp.rk4(&s, lo, &yk) } else { s.clone() };
            let s_ev = if hi == dt { s_end } else { lp.rk4(&s, hi, &yk) };
            let t_ev = if hi == dt { t_grid } else { t + hi };
            let (g, upper) = lp.trigger(&s_ev, &yk).expect("fires implies not suppressed");
            let quiet_value = lp.trigger(&s_quiet, &yk).map_or(f64::NEG_INFINITY, |(g, _)| g);
            let y_ev = lp.output(&s_ev[..n]);
            let eps_before = lp.epsilon(&yk, &y_ev);
            rec.trace.min_epsilon_seen = eps_before.iter().copied().fold(rec.trace.min_epsilon_seen, f64::min);
            yk = y_ev.clone();
            let k = rec.trace.events.len();
            rec.trace.events.push(EventRecord {
                k,
                t: t_ev,
                y: y_ev,
                kind: if upper >= 0.0 { EventKind::Threshold } else { EventKind::NegativeError },
                eps_before,
                surface_value: g,
                quiet_value,
            });
            s = s_ev;
            t = t_ev;
            rec.sample(t, &s, &yk, true);
        }
        // an event exactly on the grid already produced this sample
        if rec.trace.times.last() != Some(&t) {
            rec.sample(t, &s, &yk, false);
        }
    }

    let mut trace = rec.trace;
    trace.iets = trace.events.windows(2).map(|w| w[1].t - w[0].t).collect();
    trace.transmissions = trace.events.len();
    Ok(trace)
}

/// `α / ((α + 1) ‖A‖₂)`.
pub fn min_iet_bound(a: &Matrix, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::invalid(format!("alpha must be > 0, got {alpha}")));
    }
    let norm = spectral_norm(a);
    if norm == 0.0 {
        return Err(Error::invalid("inter-event bound is undefined for a zero matrix"));
    }
    Ok(alpha / ((alpha + 1.0) * norm))
}

/// The bound at each `α`, in the given order.
pub fn iet_curve(a: &Matrix, alphas: &[f64]) -> Result<Vec<(f64, f64)>> {
    alphas.iter().map(|&al| Ok((al, min_iet_bound(a, al)?))).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZenoReport {
    pub bound: f64,
    /// `None` when fewer than two events occurred.
    pub min_observed_iet: Option<f64>,
    pub satisfied: bool,
}

pub fn zeno_report(trace: &SimulationTrace, a: &Matrix, alpha: f64, event_time_tol: f64) -> Result<ZenoReport> {
    let bound = min_iet_bound(a, alpha)?;
    let min_observed_iet = trace.iets.iter().copied().reduce(f64::min);
    let satisfied = min_observed_iet.map_or(true, |m| m >= bound - event_time_tol);
    Ok(ZenoReport { bound, min_observed_iet, satisfied })
}

/// `V = (x - x_eq)ᵀ P (x - x_eq) + eᵀ Q e` at every sample, and whether it
/// never increases by more than a relative `1e-8` between samples.
pub fn lyapunov_trace(trace: &SimulationTrace, design: &ObserverDesign) -> Result<(Vec<f64>, bool)> {
    let n = design.n_states();
    if trace.x.first().is_some_and(|x| x.len() != n) || trace.equilibrium.len() != n {
        return Err(Error::dim("trace and design have different state dimensions"));
    }
    let v: Vec<f64> = trace
        .x
        .iter()
        .zip(&trace.e)
        .map(|(x, e)| {
            (0..n)
                .map(|i| {
                    let h = x[i] - trace.equilibrium[i];
                    design.p[i] * h * h + design.q[i] * e[i] * e[i]
                })
                .sum()
        })
        .collect();
    let monotone = v.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-8));
    Ok((v, monotone))
}

/// Fills [`SimulationTrace::lyapunov`] and returns the monotonicity flag.
pub fn attach_lyapunov(trace: &mut SimulationTrace, design: &ObserverDesign) -> Result<bool> {
    let (v, mono) = lyapunov_trace(trace, design)?;
    trace.lyapunov = Some(v);
    Ok(mono)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositivityAudit {
    pub x_nonneg: bool,
    pub xhat_nonneg: bool,
    pub e_nonneg: bool,
    pub eps_nonneg: bool,
    pub min_x: f64,
    pub min_xhat: f64,
    pub min_e: f64,
    pub min_eps: f64,
}

impl PositivityAudit {
    pub fn all_pass(&self) -> bool {
        self.x_nonneg && self.xhat_nonneg && self.e_nonneg && self.eps_nonneg
    }
}

/// Elementwise minima over the run. `ε` also includes its values just
/// before each refresh.
pub fn positivity_audit(trace: &SimulationTrace, tol: f64) -> PositivityAudit {
    let min_of = |rows: &[Vec<f64>]| rows.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let min_x = min_of(&trace.x);
    let min_xhat = min_of(&trace.xhat);
    let min_e = min_of(&trace.e);
    let min_eps = trace
        .events
        .iter()
        .flat_map(|ev| ev.eps_before.iter().copied())
        .fold(min_of(&trace.epsilon), f64::min);
    PositivityAudit {
        x_nonneg: min_x >= -tol,
        xhat_nonneg: min_xhat >= -tol,
        e_nonneg: min_e >= -tol,
        eps_nonneg: min_eps >= -tol,
        min_x,
        min_xhat,
        min_e,
        min_eps,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SavingsReport {
    pub event_count: usize,
    pub periodic_count: usize,
    pub savings_pct: f64,
}

/// Compares the transmissions of a run (including the one at `t = 0`)
/// with a periodic scheme of the given interval over the same horizon.
pub fn savings_report(trace: &SimulationTrace, periodic_interval: f64) -> Result<SavingsReport> {
    savings_from_counts(trace.transmissions, trace.horizon, periodic_interval)
}

pub fn savings_from_counts(event_count: usize, horizon: f64, periodic_interval: f64) -> Result<SavingsReport> {
    if !(periodic_interval > 0.0) {
        return Err(Error::invalid("periodic interval must be > 0"));
    }
    let periodic_count = (horizon / periodic_interval + 1e-9).floor() as usize;
    if periodic_count == 0 {
        return Err(Error::invalid("periodic interval exceeds the horizon"));
    }
    let savings_pct = 100.0 * (1.0 - event_count as f64 / periodic_count as f64);
    Ok(SavingsReport { event_count, periodic_count, savings_pct })
}

fn fmt17(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `t,x1..xn,xhat1..xhatn,y1..yr,eps1..epsr,event`.
pub fn write_trace_csv<W: Write>(trace: &SimulationTrace, mut out: W) -> std::io::Result<()> {
    let n = trace.x.first().map_or(0, Vec::len);
    let r = trace.y.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=n).map(|i| format!("xhat{i}")));
    header.extend((1..=r).map(|i| format!("y{i}")));
    header.extend((1..=r).map(|i| format!("eps{i}")));
    header.push("event".into());
    writeln!(out, "{}", header.join(","))?;
    for k in 0..trace.times.len() {
        let mut row = vec![fmt17(trace.times[k])];
        row.extend(trace.x[k].iter().map(|v| fmt17(*v)));
        row.extend(trace.xhat[k].iter().map(|v| fmt17(*v)));
        row.extend(trace.y[k].iter().map(|v| fmt17(*v)));
        row.extend(trace.epsilon[k].iter().map(|v| fmt17(*v)));
        row.push(if trace.is_event[k] { "1".into() } else { "0".into() });
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// One entry of the exported event log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventLogEntry {
    pub k: usize,
    pub t_k: f64,
    pub y_k: Vec<f64>,
    /// `t_k - t_{k-1}`; absent for the first event.
    pub iet: Option<f64>,
}

pub fn event_log(trace: &SimulationTrace) -> Vec<EventLogEntry> {
    trace
        .events
        .iter()
        .enumerate()
        .map(|(k, ev)| EventLogEntry { k: ev.k, t_k: ev.t, y_k: ev.y.clone(), iet: k.checked_sub(1).map(|p| trace.iets[p]) })
        .collect()
}
