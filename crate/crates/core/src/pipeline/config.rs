use super::expr::parse_expression;
use crate::error::{Error, Result};
use crate::geometry::{build_domain, DomainSpec, PlanarDomain};
use crate::holofun::HoloFunction;
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// One interpolation point of `Λ` with its target in `R^n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaSpec {
    pub point: [f64; 2],
    pub value: Vec<f64>,
    #[serde(default)]
    pub jet_order: usize,
}

/// `"auto"` (avoided hyperplanes), `"two_values"` (Gauss map omitting the
/// poles, `n = 3`) or the expressions of `h_3, …, h_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ComponentsSpec {
    Keyword(String),
    Expressions(Vec<String>),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub nullity: f64,
    pub flux: f64,
    pub interpolation: f64,
    pub identity: f64,
    pub margin: f64,
    /// Newton tolerance of the period solves.
    pub newton: f64,
    /// Per-stage approximation budget `ε`, halved at every stage.
    pub epsilon: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            nullity: 1e-10,
            flux: 1e-8,
            interpolation: 1e-6,
            identity: 1e-12,
            margin: 1e-6,
            newton: 1e-10,
            epsilon: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub schema_version: u32,
    pub domain: DomainSpec,
    pub dimension: usize,
    /// Base point `p0`; defaults to the outer center.
    #[serde(default)]
    pub base: Option<[f64; 2]>,
    #[serde(default)]
    pub lambda: Vec<LambdaSpec>,
    /// `Im∮ ∂X` per hole, one vector in `R^n` each; empty means zero.
    #[serde(default)]
    pub flux: Vec<Vec<f64>>,
    pub components: ComponentsSpec,
    /// Values `X_j(p0)` of the prescribed coordinates `j ≥ 3`; default zero.
    #[serde(default)]
    pub base_values: Vec<f64>,
    /// Constants `ζ_j` as `[re, im]` for the avoided-hyperplane mode.
    #[serde(default)]
    pub zeta: Vec<[f64; 2]>,
    #[serde(default = "default_stages")]
    pub stages: usize,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub seed: u64,
}

fn default_stages() -> usize {
    2
}

/// What the configuration asks for.
#[derive(Clone, Debug, PartialEq)]
pub enum Mode {
    Fixed(Vec<HoloFunction<f64>>),
    GaussAvoiding,
    TwoValues,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LambdaPoint {
    pub point: C64,
    pub value: Vec<f64>,
    pub jet_order: usize,
}

/// Validated configuration.
#[derive(Clone, Debug)]
pub struct Problem {
    pub domain: PlanarDomain<f64>,
    pub n: usize,
    pub base: C64,
    pub lambda: Vec<LambdaPoint>,
    /// Per hole, `n` values.
    pub flux: Vec<Vec<f64>>,
    pub mode: Mode,
    pub base_values: Vec<f64>,
    pub zeta: Vec<C64>,
    pub stages: usize,
    pub tol: Tolerances,
    pub seed: u64,
}

impl ProblemConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<Problem> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} is not supported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let n = self.dimension;
        if n < 3 {
            return Err(Error::Config("dimension must be at least 3".into()));
        }
        let domain = build_domain::<f64>(&self.domain).map_err(|e| Error::Config(e.to_string()))?;
        let base = match self.base {
            Some([x, y]) => C64::new(x, y),
            None => domain.outer.center,
        };
        if !domain.contains(base) {
            return Err(Error::Config("base point must lie in the open domain".into()));
        }
        let mut lambda = Vec::with_capacity(self.lambda.len());
        for (i, l) in self.lambda.iter().enumerate() {
            let p = C64::new(l.point[0], l.point[1]);
            if l.value.len() != n {
                return Err(Error::Config(format!("lambda {i} has {} values for dimension {n}", l.value.len())));
            }
            if l.value.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!("lambda {i} has a non-finite value")));
            }
            if !domain.contains(p) {
                return Err(Error::Config(format!("lambda {i} is outside the open domain")));
            }
            if (p - base).norm() < 1e-9 {
                return Err(Error::Config(format!("lambda {i} coincides with the base point")));
            }
            if lambda.iter().any(|q: &LambdaPoint| (q.point - p).norm() < 1e-9) {
                return Err(Error::Config(format!("lambda {i} repeats an earlier point")));
            }
            lambda.push(LambdaPoint {
                point: p,
                value: l.value.clone(),
                jet_order: l.jet_order,
            });
        }
        let flux = if self.flux.is_empty() {
            vec![vec![0.0; n]; domain.holes.len()]
        } else {
            if self.flux.len() != domain.holes.len() || self.flux.iter().any(|f| f.len() != n) {
                return Err(Error::Config(format!(
                    "flux needs {} entries of length {n}, one per hole",
                    domain.holes.len()
                )));
            }
            self.flux.clone()
        };
        let mode = match &self.components {
            ComponentsSpec::Keyword(k) if k == "auto" => Mode::GaussAvoiding,
            ComponentsSpec::Keyword(k) if k == "two_values" => {
                if n != 3 {
                    return Err(Error::Config("two_values needs dimension 3".into()));
                }
                if lambda.is_empty() {
                    return Err(Error::Config("two_values needs at least one lambda point".into()));
                }
                Mode::TwoValues
            }
            ComponentsSpec::Keyword(k) => {
                return Err(Error::Config(format!("unknown components keyword '{k}'")));
            }
            ComponentsSpec::Expressions(list) => {
                if list.len() != n - 2 {
                    return Err(Error::Config(format!("{} component expressions for dimension {n}", list.len())));
                }
                Mode::Fixed(list.iter().map(|s| parse_expression(s, &domain)).collect::<Result<_>>()?)
            }
        };
        let base_values = if self.base_values.is_empty() {
            vec![0.0; n - 2]
        } else if self.base_values.len() == n - 2 && matches!(mode, Mode::Fixed(_)) {
            self.base_values.clone()
        } else {
            return Err(Error::Config("base_values needs n - 2 entries and prescribed components".into()));
        };
        let zeta: Vec<C64> = self.zeta.iter().map(|z| C64::new(z[0], z[1])).collect();
        if !zeta.is_empty() && (mode != Mode::GaussAvoiding || zeta.len() != n / 2 || zeta.iter().any(|z| z.norm() == 0.0)) {
            return Err(Error::Config(format!("zeta needs {} nonzero entries in auto mode", n / 2)));
        }
        let t = &self.tolerances;
        if [t.nullity, t.flux, t.interpolation, t.identity, t.margin, t.newton, t.epsilon]
            .iter()
            .any(|v| !(*v > 0.0))
        {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        Ok(Problem {
            domain,
            n,
            base,
            lambda,
            flux,
            mode,
            base_values,
            zeta,
            stages: self.stages,
            tol: *t,
            seed: self.seed,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> &'static str {
        r#"{
            "schema_version": 1,
            "domain": {"outer": {"center": [0, 0], "radius": 3}},
            "dimension": 3,
            "lambda": [{"point": [0.5, 0], "value": [1, 2, 1]}],
            "components": ["1"],
            "stages": 2
        }"#
    }

    #[test]
    fn parses_and_validates() {
        let cfg = ProblemConfig::from_json(sample()).unwrap();
        let p = cfg.validate().unwrap();
        assert_eq!(p.n, 3);
        assert_eq!(p.base, C64::new(0.0, 0.0));
        assert!(matches!(p.mode, Mode::Fixed(ref h) if h.len() == 1));
        assert_eq!(p.tol, Tolerances::default());
        let back = ProblemConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = ProblemConfig::from_json(sample()).unwrap();
        cfg.schema_version = 2;
        assert_eq!(cfg.validate().unwrap_err().code(), "CONFIG_INVALID");
        let mut cfg = ProblemConfig::from_json(sample()).unwrap();
        cfg.lambda[0].value.pop();
        assert!(cfg.validate().is_err());
        let mut cfg = ProblemConfig::from_json(sample()).unwrap();
        cfg.components = ComponentsSpec::Keyword("bogus".into());
        assert!(cfg.validate().is_err());
        let mut cfg = ProblemConfig::from_json(sample()).unwrap();
        cfg.lambda[0].point = [5.0, 0.0];
        assert!(cfg.validate().is_err());
        assert!(ProblemConfig::from_json(r#"{"schema_version": 1, "extra": 0}"#).is_err());
    }
}
