use super::config::{Tolerances, SCHEMA_VERSION};
use crate::error::{Error, Result};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

/// Decimal string with 17 significant digits.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

pub fn point(z: C64) -> [String; 2] {
    [num(z.re), num(z.im)]
}

fn parse(s: &str) -> Result<f64> {
    s.parse().map_err(|_| Error::Config(format!("report field '{s}' is not a number")))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JetRecord {
    pub point: [String; 2],
    pub configured: usize,
    pub achieved: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZeroRecord {
    pub point: [String; 2],
    pub order: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageBound {
    pub pair: usize,
    pub stage: usize,
    pub tau: String,
    pub distance_lower: Option<String>,
    pub distance_upper: Option<String>,
    pub drift: String,
    pub epsilon: String,
    pub rings: usize,
    pub nullity_residual: String,
    pub newton_iterations: usize,
    pub basis_condition: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarginRecord {
    pub form: Vec<[String; 2]>,
    pub margin: String,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RuntimeStats {
    pub stages_completed: usize,
    pub newton_iterations: usize,
    pub verification_points: usize,
    pub pairs: usize,
}

/// Measured residuals of a run. Every float is a 17-digit decimal string.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub schema_version: u32,
    pub theorem: String,
    pub dimension: usize,
    pub seed: u64,
    /// Radius of the last exhaustion disk, where the immersion is defined.
    pub final_radius: String,
    pub nullity_residual: String,
    /// Per loop, max over coordinates of `|Im∮ f_j dz - p_j|`.
    pub flux_errors: Vec<String>,
    /// Per loop, max over coordinates of `|Re∮ f_j dz|`.
    pub period_real_defects: Vec<String>,
    /// Per `Λ` point, max over coordinates of `|X(λ) - F(λ)|`.
    pub interpolation_errors: Vec<String>,
    pub jet_orders_achieved: Vec<JetRecord>,
    pub hyperplane_margins: Vec<MarginRecord>,
    pub margin_identity_error: Option<String>,
    pub nondegenerate: bool,
    pub rank: usize,
    /// `max |X_j - 𝔥_j|` over samples for the prescribed coordinates.
    pub identity_check: Option<String>,
    pub identity_method: Option<String>,
    pub zero_divisor: Vec<ZeroRecord>,
    /// `[min |g|, max |g|]` of the stereographic Gauss map.
    pub gauss_range: Option<[String; 2]>,
    /// Argument-principle count of zeros of `f1 - i f2`.
    pub eta_zero_count: Option<String>,
    pub stage_distance_bounds: Vec<StageBound>,
    pub tolerances: Tolerances,
    pub runtime: RuntimeStats,
}

impl VerificationReport {
    pub fn new(theorem: &str, dimension: usize, seed: u64, tol: Tolerances) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            theorem: theorem.into(),
            dimension,
            seed,
            final_radius: num(0.0),
            nullity_residual: num(f64::NAN),
            flux_errors: Vec::new(),
            period_real_defects: Vec::new(),
            interpolation_errors: Vec::new(),
            jet_orders_achieved: Vec::new(),
            hyperplane_margins: Vec::new(),
            margin_identity_error: None,
            nondegenerate: false,
            rank: 0,
            identity_check: None,
            identity_method: None,
            zero_divisor: Vec::new(),
            gauss_range: None,
            eta_zero_count: None,
            stage_distance_bounds: Vec::new(),
            tolerances: tol,
            runtime: RuntimeStats::default(),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// One `(name, passed, detail)` line per check against the stored tolerances.
    pub fn checks(&self) -> Result<Vec<(String, bool, String)>> {
        let t = &self.tolerances;
        let mut out = Vec::new();
        let max_of = |v: &[String]| -> Result<f64> { v.iter().map(|s| parse(s)).try_fold(0.0f64, |m, x| Ok(m.max(x?))) };
        let nullity = parse(&self.nullity_residual)?;
        out.push(("nullity".into(), nullity <= t.nullity, self.nullity_residual.clone()));
        let flux = max_of(&self.flux_errors)?.max(max_of(&self.period_real_defects)?);
        out.push(("flux".into(), flux <= t.flux, num(flux)));
        let interp = max_of(&self.interpolation_errors)?;
        out.push(("interpolation".into(), interp <= t.interpolation, num(interp)));
        let jets_ok = self.jet_orders_achieved.iter().all(|j| j.achieved >= j.configured);
        out.push(("jets".into(), jets_ok, format!("{} points", self.jet_orders_achieved.len())));
        if let Some(id) = &self.identity_check {
            let v = parse(id)?;
            out.push(("prescribed-components".into(), v <= t.identity, id.clone()));
        }
        if !self.hyperplane_margins.is_empty() {
            let m = self
                .hyperplane_margins
                .iter()
                .map(|r| parse(&r.margin))
                .try_fold(f64::INFINITY, |m, x| Ok::<f64, Error>(m.min(x?)))?;
            out.push(("hyperplane-margins".into(), m > t.margin, num(m)));
        }
        if let Some(e) = &self.margin_identity_error {
            out.push(("margin-identity".into(), parse(e)? <= 1e-10, e.clone()));
        }
        if let Some([lo, hi]) = &self.gauss_range {
            let (a, b) = (parse(lo)?, parse(hi)?);
            out.push(("gauss-range".into(), a > 0.0 && b.is_finite() && a <= b, format!("[{lo}, {hi}]")));
        }
        if let Some(z) = &self.eta_zero_count {
            out.push(("eta-zero-free".into(), parse(z)?.abs() < 0.5, z.clone()));
        }
        out.push(("nondegenerate".into(), self.nondegenerate, format!("rank {}", self.rank)));
        Ok(out)
    }
}
