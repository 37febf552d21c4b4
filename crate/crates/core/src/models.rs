//! Benchmark plants: a two-state academic system and the linearized
//! three-tank rig with variable cross-sections.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matcore::{mat_mul, Matrix, Vector};
use crate::posys::{is_metzler, PositiveLinearSystem, DEFAULT_POSITIVITY_TOL};

/// `ẋ = [[-1, 3], [0, -1]] x`, `y = [1, 0] x`.
pub fn example1() -> PositiveLinearSystem {
    PositiveLinearSystem::new(
        "example1",
        Matrix::from_rows(&[[-1.0, 3.0], [0.0, -1.0]]).expect("constant"),
        None,
        Matrix::from_rows(&[[1.0, 0.0]]).expect("constant"),
        None,
        0.0,
    )
    .expect("constant system is Metzler")
}

/// Three-tank parameters in SI units (meters, seconds, m³/s).
#[derive(Debug, Clone, PartialEq)]
pub struct TankParameters {
    /// Upper tank: rectangular section `a × w`.
    pub a: f64,
    /// Middle tank: trapezoidal section `w (c + b H₂ / H2max)`.
    pub b: f64,
    pub c: f64,
    pub w: f64,
    /// Lower tank: circular section of radius `R`.
    pub r: f64,
    pub h2_max: f64,
    pub h3_max: f64,
    /// Outflow coefficients, `q_i = C_i H_i^{α_i}`.
    pub valve: [f64; 3],
    pub exponent: [f64; 3],
    /// Operating levels.
    pub h0: [f64; 3],
    pub q0: f64,
    /// State feedback `u = -K (H - H0)`.
    pub k: Option<[f64; 3]>,
}

impl TankParameters {
    /// Reference rig values, converted to meters.
    pub fn reference_rig() -> Self {
        Self {
            a: 0.25,
            b: 0.348,
            c: 0.10,
            w: 0.035,
            r: 0.364,
            h2_max: 0.35,
            h3_max: 0.35,
            valve: [1.0057e-4, 1.1963e-4, 9.8008e-5],
            exponent: [0.5; 3],
            h0: [0.1425, 0.1007, 0.1500],
            q0: 3.7958e-5,
            k: Some([0.1983e-3, 0.0765e-3, 0.0496e-3]),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let lengths = [
            ("a", self.a),
            ("b", self.b),
            ("c", self.c),
            ("w", self.w),
            ("R", self.r),
            ("H2max", self.h2_max),
            ("H3max", self.h3_max),
        ];
        for (name, v) in lengths {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be a positive length, got {v}")));
            }
        }
        for i in 0..3 {
            if !(self.exponent[i] > 0.0 && self.exponent[i] <= 1.0) {
                return Err(Error::invalid(format!("alpha{} must lie in (0, 1]", i + 1)));
            }
            if !(self.valve[i] > 0.0 && self.valve[i].is_finite()) {
                return Err(Error::invalid(format!("C{} must be positive", i + 1)));
            }
            if !(self.h0[i] > 0.0) {
                return Err(Error::invalid(format!("H{}0 must be positive", i + 1)));
            }
        }
        if self.h0[1] >= self.h2_max {
            return Err(Error::invalid("H20 must be below H2max"));
        }
        if self.h0[2] >= self.h3_max {
            return Err(Error::invalid("H30 must be below H3max"));
        }
        if self.r <= self.h3_max - self.h0[2] {
            return Err(Error::invalid("R must exceed H3max - H30 for a real lower-tank section"));
        }
        if !(self.q0 >= 0.0) {
            return Err(Error::invalid("Q0 must be non-negative"));
        }
        Ok(())
    }

    /// Relative mismatch `|C_i H_i0^{α_i} - Q0| / Q0` of each outflow at the
    /// operating point.
    pub fn steady_state_residual(&self) -> [f64; 3] {
        let mut out = [0.0; 3];
        for i in 0..3 {
            let q = self.valve[i] * self.h0[i].powf(self.exponent[i]);
            out[i] = (q - self.q0).abs() / self.q0;
        }
        out
    }
}

/// Cross-sectional areas `(β(H₁), β(H₂), β(H₃))` in m².
pub fn tank_areas(p: &TankParameters, h: [f64; 3]) -> Result<[f64; 3]> {
    let chord = p.r * p.r - (p.h3_max - h[2]).powi(2);
    if !(chord > 0.0) {
        return Err(Error::invalid(format!(
            "lower tank level {} m gives an imaginary cross-section",
            h[2]
        )));
    }
    Ok([p.a * p.w, p.w * (p.c + p.b * h[1] / p.h2_max), p.w * chord.sqrt()])
}

/// Linearization of the three-tank cascade about `H0`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedModel {
    pub a: Matrix,
    pub b: Matrix,
    pub c: Matrix,
    pub h0: [f64; 3],
    pub areas: [f64; 3],
}

pub fn tank_linearize(p: &TankParameters) -> Result<LinearizedModel> {
    p.validate()?;
    let areas = tank_areas(p, p.h0)?;
    // ∂q_i/∂H_i = C_i α_i / H_i^{1-α_i}
    let slope = |i: usize| p.valve[i] * p.exponent[i] / p.h0[i].powf(1.0 - p.exponent[i]);
    let mut a = Matrix::zeros(3, 3);
    a[(0, 0)] = -slope(0) / areas[0];
    a[(1, 0)] = slope(0) / areas[1];
    a[(1, 1)] = -slope(1) / areas[1];
    a[(2, 1)] = slope(1) / areas[2];
    a[(2, 2)] = -slope(2) / areas[2];
    Ok(LinearizedModel {
        a,
        b: Matrix::column(&[1.0 / areas[0], 0.0, 0.0]),
        c: Matrix::from_rows(&[[0.0, 1.0, 0.0]])?,
        h0: p.h0,
        areas,
    })
}

impl LinearizedModel {
    /// The plant as a positive system with its operating point attached.
    pub fn to_system(&self, label: &str) -> Result<PositiveLinearSystem> {
        PositiveLinearSystem::new(
            label,
            self.a.clone(),
            Some(self.b.clone()),
            self.c.clone(),
            Some(Vector::new(self.h0.to_vec())?),
            DEFAULT_POSITIVITY_TOL,
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoop {
    /// `A - B K`.
    pub a_cl: Matrix,
    pub metzler: bool,
    /// Off-diagonal entries of `A - BK` below `-tol`, as `(row, col, value)`.
    pub violations: Vec<(usize, usize, f64)>,
}

pub fn tank_closed_loop(m: &LinearizedModel, k: &Matrix) -> Result<ClosedLoop> {
    closed_loop(&m.a, &m.b, k)
}

/// `A - BK` and whether it stays Metzler.
pub fn closed_loop(a: &Matrix, b: &Matrix, k: &Matrix) -> Result<ClosedLoop> {
    let a_cl = a.sub(&mat_mul(b, k)?)?;
    let n = a_cl.rows();
    let violations = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && a_cl[(i, j)] < -DEFAULT_POSITIVITY_TOL)
        .map(|(i, j)| (i, j, a_cl[(i, j)]))
        .collect();
    let metzler = is_metzler(&a_cl, DEFAULT_POSITIVITY_TOL)?;
    Ok(ClosedLoop { a_cl, metzler, violations })
}

/// Length unit tag used in parameter files.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LengthUnit {
    M,
    Cm,
}

impl LengthUnit {
    fn meters(self) -> f64 {
        match self {
            LengthUnit::M => 1.0,
            LengthUnit::Cm => 0.01,
        }
    }
}

/// Which unit each group of fields is written in.
///
/// `geometry` covers `a, b, c, w, R, H2max, H3max`; `levels` covers
/// `H10, H20, H30`; `flow_length` is the length unit behind the volumetric
/// quantities `C1..C3` (L³/s per L^α), `Q0` (L³/s) and `K` (L²/s).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TankUnits {
    pub geometry: LengthUnit,
    pub levels: LengthUnit,
    pub flow_length: LengthUnit,
}

/// On-disk form of [`TankParameters`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankParametersFile {
    pub units: TankUnits,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub w: f64,
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "H2max")]
    pub h2_max: f64,
    #[serde(rename = "H3max")]
    pub h3_max: f64,
    #[serde(rename = "C1")]
    pub c1: f64,
    #[serde(rename = "C2")]
    pub c2: f64,
    #[serde(rename = "C3")]
    pub c3: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    #[serde(rename = "H10")]
    pub h10: f64,
    #[serde(rename = "H20")]
    pub h20: f64,
    #[serde(rename = "H30")]
    pub h30: f64,
    #[serde(rename = "Q0")]
    pub q0: f64,
    #[serde(rename = "K", default, skip_serializing_if = "Option::is_none")]
    pub k: Option<[f64; 3]>,
}

impl TankParametersFile {
    /// The reference rig as printed: geometry in centimeters, levels in meters.
    pub fn reference_rig() -> Self {
        Self {
            units: TankUnits { geometry: LengthUnit::Cm, levels: LengthUnit::M, flow_length: LengthUnit::M },
            a: 25.0,
            b: 34.8,
            c: 10.0,
            w: 3.5,
            r: 36.4,
            h2_max: 35.0,
            h3_max: 35.0,
            c1: 1.0057e-4,
            c2: 1.1963e-4,
            c3: 9.8008e-5,
            alpha1: 0.5,
            alpha2: 0.5,
            alpha3: 0.5,
            h10: 0.1425,
            h20: 0.1007,
            h30: 0.1500,
            q0: 3.7958e-5,
            k: Some([0.1983e-3, 0.0765e-3, 0.0496e-3]),
        }
    }

    /// Converts every field to SI and validates.
    pub fn to_si(&self) -> Result<TankParameters> {
        let g = self.units.geometry.meters();
        let lv = self.units.levels.meters();
        let f = self.units.flow_length.meters();
        let exponent = [self.alpha1, self.alpha2, self.alpha3];
        let valve = [self.c1, self.c2, self.c3];
        let mut valve_si = [0.0; 3];
        for i in 0..3 {
            valve_si[i] = valve[i] * f.powf(3.0 - exponent[i]);
        }
        let p = TankParameters {
            a: self.a * g,
            b: self.b * g,
            c: self.c * g,
            w: self.w * g,
            r: self.r * g,
            h2_max: self.h2_max * g,
            h3_max: self.h3_max * g,
            valve: valve_si,
            exponent,
            h0: [self.h10 * lv, self.h20 * lv, self.h30 * lv],
            q0: self.q0 * f.powi(3),
            k: self.k.map(|k| [k[0] * f * f, k[1] * f * f, k[2] * f * f]),
        };
        p.validate()?;
        Ok(p)
    }
}
