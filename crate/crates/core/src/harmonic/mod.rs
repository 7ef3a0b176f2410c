//! Numerical checks of the analytic estimates: spherical functions, Haar
//! integration formulas, local volume decay, growth of `nu(BgB)`, and the
//! matrix-coefficient decay estimator.

use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::report::num;

mod haar;
mod spherical;
mod theta;
mod volume;

pub use haar::{haar_crosscheck, haar_integrals, BumpFunction, HaarIntegrals};
pub use spherical::{
    check_spherical_bounds, check_weyl_invariance, log_spherical, spherical, spherical_circle_trapezoid, spherical_mc,
};
pub use theta::{estimate_theta_ray, ThetaFit};
pub use volume::{volume_decay_conjugation, volume_growth_bgb};

/// Quadrature and Monte-Carlo settings shared by the checks.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct QuadratureConfig {
    pub nodes: usize,
    pub truncation: f64,
    pub samples: usize,
    pub seed: u64,
    /// Word-ball depth used when `H` is discrete.
    pub orbit_depth: Option<usize>,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { nodes: 2048, truncation: 40.0, samples: 1_000_000, seed: 0, orbit_depth: None }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nodes < 8 {
            return Err(Error::Domain(format!("node count {} is below 8", self.nodes)));
        }
        if !(self.truncation > 0.0) {
            return Err(Error::Domain("truncation must be positive".into()));
        }
        Ok(())
    }

    pub fn with_nodes(mut self, nodes: usize) -> Self {
        self.nodes = nodes;
        self
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

/// How a criterion compares its observations with the tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    MaxAtMost,
    MinAtLeast,
    MaxOverMinAtMost,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Criterion {
    pub name: String,
    pub observed_min: f64,
    pub observed_max: f64,
    pub rule: Rule,
    pub tolerance: f64,
    pub pass: bool,
}

impl Criterion {
    pub fn new(name: impl Into<String>, observed_min: f64, observed_max: f64, rule: Rule, tolerance: f64) -> Self {
        let pass = match rule {
            Rule::MaxAtMost => observed_max <= tolerance,
            Rule::MinAtLeast => observed_min >= tolerance,
            Rule::MaxOverMinAtMost => observed_min > 0.0 && observed_max / observed_min <= tolerance,
        };
        Self { name: name.into(), observed_min, observed_max, rule, tolerance, pass }
    }

    fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("name".into(), Value::String(self.name.clone()));
        m.insert("observed_min".into(), num(self.observed_min));
        m.insert("observed_max".into(), num(self.observed_max));
        m.insert("rule".into(), serde_json::to_value(self.rule).expect("rule serializes"));
        m.insert("tolerance".into(), num(self.tolerance));
        m.insert("pass".into(), Value::Bool(self.pass));
        Value::Object(m)
    }
}

/// One point of a checked curve.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SeriesPoint {
    pub t: f64,
    pub value: f64,
    pub std_error: f64,
}

/// Outcome of a numerical check; `pass` is the conjunction of the criteria.
#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub check: String,
    pub parameters: Vec<(String, Value)>,
    pub criteria: Vec<Criterion>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub nodes: Option<usize>,
    pub series: Vec<SeriesPoint>,
    pub notes: Vec<String>,
}

impl VerificationReport {
    pub fn new(check: impl Into<String>) -> Self {
        Self {
            check: check.into(),
            parameters: Vec::new(),
            criteria: Vec::new(),
            seed: None,
            samples: None,
            nodes: None,
            series: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: Value) -> Self {
        self.parameters.push((key.into(), value));
        self
    }

    pub fn pass(&self) -> bool {
        self.criteria.iter().all(|c| c.pass)
    }

    pub fn criterion(&self, name: &str) -> Option<&Criterion> {
        self.criteria.iter().find(|c| c.name == name)
    }

    /// Observed range of the primary (first) criterion.
    pub fn observed(&self) -> (f64, f64) {
        self.criteria.first().map_or((f64::NAN, f64::NAN), |c| (c.observed_min, c.observed_max))
    }

    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("check".into(), Value::String(self.check.clone()));
        m.insert("pass".into(), Value::Bool(self.pass()));
        let (lo, hi) = self.observed();
        m.insert("observed_min".into(), num(lo));
        m.insert("observed_max".into(), num(hi));
        m.insert(
            "parameters".into(),
            Value::Object(self.parameters.iter().map(|(k, v)| (k.clone(), v.clone())).collect()),
        );
        m.insert("criteria".into(), Value::Array(self.criteria.iter().map(Criterion::to_json).collect()));
        m.insert("seed".into(), self.seed.map_or(Value::Null, Value::from));
        m.insert("samples".into(), self.samples.map_or(Value::Null, Value::from));
        m.insert("nodes".into(), self.nodes.map_or(Value::Null, Value::from));
        m.insert(
            "series".into(),
            Value::Array(
                self.series
                    .iter()
                    .map(|p| {
                        let mut e = Map::new();
                        e.insert("t".into(), num(p.t));
                        e.insert("value".into(), num(p.value));
                        e.insert("std_error".into(), num(p.std_error));
                        Value::Object(e)
                    })
                    .collect(),
            ),
        );
        m.insert("notes".into(), Value::Array(self.notes.iter().cloned().map(Value::String).collect()));
        Value::Object(m)
    }

    /// `t,value,std_error` rows for external plotting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,value,std_error\n");
        for p in &self.series {
            out.push_str(&format!("{:.11e},{:.11e},{:.11e}\n", p.t, p.value, p.std_error));
        }
        out
    }
}

/// Evenly spaced grid of `count` points on `[a, b]`.
pub(crate) fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![a];
    }
    (0..count).map(|i| a + (b - a) * i as f64 / (count - 1) as f64).collect()
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pass_is_a_function_of_observations() {
        assert!(Criterion::new("a", 0.0, 1.0, Rule::MaxAtMost, 1.0).pass);
        assert!(!Criterion::new("a", 0.0, 1.1, Rule::MaxAtMost, 1.0).pass);
        assert!(Criterion::new("b", 0.5, 9.0, Rule::MinAtLeast, 0.5).pass);
        assert!(Criterion::new("c", 2.0, 100.0, Rule::MaxOverMinAtMost, 50.0).pass);
        assert!(!Criterion::new("c", 0.0, 1.0, Rule::MaxOverMinAtMost, 50.0).pass);
    }

    #[test]
    fn config_validation() {
        assert!(QuadratureConfig::default().validate().is_ok());
        assert!(QuadratureConfig::default().with_nodes(4).validate().is_err());
        let cfg = QuadratureConfig { truncation: 0.0, ..QuadratureConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn log_helpers() {
        assert!((log_add_exp(0.0, 0.0) - 2f64.ln()).abs() < 1e-15);
        assert!((log_sum_exp(&[1000.0, 1000.0]) - (1000.0 + 2f64.ln())).abs() < 1e-12);
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
    }
}
