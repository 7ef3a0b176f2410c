//! Browser bindings: each export takes plain numbers or strings and returns a JSON string.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use temperlab::beta::beta_exact;
use temperlab::catalog::{catalog_entries, entry};
use temperlab::delta::enumerate_ball;
use temperlab::harmonic::{self, QuadratureConfig};
use temperlab::matgroup::{CartanVector, GroupElement};
use temperlab::rational::{fmt_q, to_f64};
use temperlab::rhofun::{rho_eval_f64, RhoFunction};

fn to_js(r: temperlab::Result<Value>) -> Result<String, JsError> {
    r.map(|v| v.to_string()).map_err(|e| JsError::new(&e.to_string()))
}

/// Catalog names with their descriptions.
#[wasm_bindgen]
pub fn catalog() -> String {
    Value::Array(
        catalog_entries()
            .iter()
            .map(|e| json!({ "name": e.name, "n": e.n, "description": e.description, "discrete": e.is_discrete() }))
            .collect(),
    )
    .to_string()
}

/// `rho_h / rho_g` on the unit circle of the plane through the witness direction.
#[wasm_bindgen]
pub fn beta_profile(name: &str, points: usize) -> Result<String, JsError> {
    to_js(beta_profile_json(name, points.max(8)))
}

fn beta_profile_json(name: &str, points: usize) -> temperlab::Result<Value> {
    let e = entry(name)?;
    let pair = e.pair.ok_or_else(|| temperlab::Error::Unsupported(format!("`{name}` is discrete")))?;
    let res = beta_exact(&pair)?;
    let h = RhoFunction::new(pair.h_system.clone());
    let g = RhoFunction::new(pair.g_system.clone());
    let d = pair.dim;
    let mut u: Vec<f64> = res.witness.iter().map(|x| x.to_string().parse::<f64>().unwrap_or(0.0)).collect();
    if u.iter().all(|x| *x == 0.0) {
        u = vec![0.0; d];
        u[0] = 1.0;
    }
    normalize(&mut u);
    // second axis: the coordinate vector least aligned with the witness, made orthogonal
    let v = (0..d)
        .map(|i| {
            let mut v: Vec<f64> = u.iter().map(|x| -x * u[i]).collect();
            v[i] += 1.0;
            v
        })
        .max_by(|a, b| norm(a).total_cmp(&norm(b)))
        .filter(|v| norm(v) > 1e-9)
        .map(|mut v| {
            normalize(&mut v);
            v
        });
    let mut rows = Vec::with_capacity(points);
    for i in 0..points {
        let a = 2.0 * std::f64::consts::PI * i as f64 / points as f64;
        let x: Vec<f64> = match &v {
            Some(v) => u.iter().zip(v).map(|(p, q)| a.cos() * p + a.sin() * q).collect(),
            None => u.iter().map(|p| a.cos().signum() * p).collect(),
        };
        let den = rho_eval_f64(&g, &x)?;
        let ratio = if den > 0.0 { rho_eval_f64(&h, &x)? / den } else { 0.0 };
        rows.push(json!([a, ratio]));
    }
    Ok(json!({
        "pair": name,
        "dim": d,
        "beta": fmt_q(&res.beta),
        "beta_float": to_f64(&res.beta),
        "points": rows,
    }))
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn normalize(v: &mut [f64]) {
    let n = norm(v);
    v.iter_mut().for_each(|x| *x /= n);
}

/// `Xi_{c rho}(a_t)` on SL(2, R) against its lower bound `exp(-(1 - c) t)`.
#[wasm_bindgen]
pub fn spherical_curve(c: f64, t_max: f64, points: usize) -> Result<String, JsError> {
    to_js((|| {
        let cfg = QuadratureConfig::default();
        let chi = [c / 2.0, -c / 2.0];
        let mut rows = Vec::new();
        for i in 0..points.max(2) {
            let t = t_max * i as f64 / (points.max(2) - 1) as f64;
            let a = GroupElement::exp_cartan(&CartanVector::new(vec![t, -t])?);
            let log_xi = harmonic::log_spherical(&chi, &a, &cfg)?;
            rows.push(json!([t, log_xi, -(1.0 - c) * t]));
        }
        Ok(json!({ "c": c, "columns": ["t", "log_xi", "log_lower_bound"], "points": rows }))
    })())
}

/// Word-ball shell counts `N(R)` against `R = 2 rho kappa` for a discrete catalog entry.
#[wasm_bindgen]
pub fn orbit_growth(name: &str, depth: usize) -> Result<String, JsError> {
    to_js((|| {
        let e = entry(name)?;
        if !e.is_discrete() {
            return Err(temperlab::Error::Unsupported(format!("`{name}` is not discrete")));
        }
        let ball = enumerate_ball(&e.h_spec, depth.min(20))?;
        let mut s: Vec<f64> = ball.s_values().to_vec();
        s.sort_by(f64::total_cmp);
        let mut rows: Vec<Value> = Vec::new();
        let mut r = 0.5;
        let mut k = 0;
        let top = s.last().copied().unwrap_or(0.0);
        while r <= top + 0.5 {
            while k < s.len() && s[k] <= r {
                k += 1;
            }
            rows.push(json!([r, k]));
            r += 0.5;
        }
        Ok(json!({ "pair": name, "depth": depth.min(20), "elements": ball.len(), "points": rows }))
    })())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn profile_peaks_at_beta() {
        let v = beta_profile_json("sl2-in-sl4", 360).unwrap();
        let peak = v["points"].as_array().unwrap().iter().map(|p| p[1].as_f64().unwrap()).fold(0.0, f64::max);
        assert!((peak - 1.0 / 3.0).abs() < 1e-9, "{peak}");
        assert_eq!(v["beta"], "1/3");
    }
}
