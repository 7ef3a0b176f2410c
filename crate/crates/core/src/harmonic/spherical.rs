//! Spherical functions `Xi_chi(g) = int_K exp(-(chi + rho) eta(g^-1 k)) dk`.

use std::f64::consts::PI;

use rand::Rng;

use super::{linspace, log_add_exp, log_sum_exp, Criterion, QuadratureConfig, Rule, SeriesPoint, VerificationReport};
use crate::delta::fit_line;
use crate::error::{Error, Result};
use crate::matgroup::{cartan_projection, iwasawa_projection, random_rotation, CartanVector, GroupElement};
use crate::report::{num, nums};
use crate::sampling;

fn rho(n: usize) -> Vec<f64> {
    (0..n).map(|i| (n as f64 + 1.0 - 2.0 * (i as f64 + 1.0)) / 2.0).collect()
}

fn check_chi(chi: &[f64], n: usize) -> Result<()> {
    if chi.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: chi.len() });
    }
    if chi.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericInput("non-finite chi".into()));
    }
    Ok(())
}

/// `log Xi_chi(g)`: deterministic quadrature for `n = 2`, Monte Carlo for `n = 3`.
pub fn log_spherical(chi: &[f64], g: &GroupElement, cfg: &QuadratureConfig) -> Result<f64> {
    cfg.validate()?;
    check_chi(chi, g.n())?;
    match g.n() {
        2 => {
            let k = cartan_projection(g)?.coords()[0];
            Ok(log_spherical_rank_one((chi[0] - chi[1] + 1.0) / 2.0, k, cfg.nodes, cfg.truncation))
        }
        3 => Ok(spherical_mc(chi, g, cfg)?.0.ln()),
        n => Err(Error::Unsupported(format!("spherical functions for n = {n}"))),
    }
}

pub fn spherical(chi: &[f64], g: &GroupElement, cfg: &QuadratureConfig) -> Result<f64> {
    Ok(log_spherical(chi, g, cfg)?.exp())
}

/// Rank one: `Xi = (1/2pi) int Q(theta)^{-s} dtheta` where `Q` has eigenvalues
/// `exp(+-2k)`. Quarter symmetry and `tan(phi) = exp(u)` turn this into
/// `(2/pi) int_R Q(u)^{-s} / (2 cosh u) du`, summed by the trapezoid rule on
/// `[-U, 2k + U]` in log space.
fn log_spherical_rank_one(s: f64, k: f64, nodes: usize, truncation: f64) -> f64 {
    let lo = -truncation;
    let hi = 2.0 * k + truncation;
    let h = (hi - lo) / (nodes - 1) as f64;
    let logs: Vec<f64> = (0..nodes)
        .map(|i| {
            let u = lo + i as f64 * h;
            let log_q = log_add_exp(2.0 * k, 2.0 * u - 2.0 * k) - log_add_exp(0.0, 2.0 * u);
            let w: f64 = if i == 0 || i + 1 == nodes { 0.5 } else { 1.0 };
            -s * log_q - log_add_exp(u, -u) + w.ln()
        })
        .collect();
    (2.0 / PI).ln() + h.ln() + log_sum_exp(&logs)
}

/// Plain trapezoid rule over `theta` with `nodes` equally spaced points (`n = 2`).
pub fn spherical_circle_trapezoid(chi: &[f64], g: &GroupElement, nodes: usize) -> Result<f64> {
    if g.n() != 2 {
        return Err(Error::Unsupported("the circle rule is for n = 2".into()));
    }
    check_chi(chi, 2)?;
    let s = (chi[0] - chi[1] + 1.0) / 2.0;
    let inv = g.inverse().matrix();
    let total: f64 = (0..nodes)
        .map(|j| {
            let th = 2.0 * PI * j as f64 / nodes as f64;
            let (x, y) = (th.cos(), th.sin());
            let a = inv[(0, 0)] * x + inv[(0, 1)] * y;
            let b = inv[(1, 0)] * x + inv[(1, 1)] * y;
            (a * a + b * b).powf(-s)
        })
        .sum();
    Ok(total / nodes as f64)
}

/// Monte-Carlo K-average with Haar-random rotations; returns `(mean, standard error)`.
pub fn spherical_mc(chi: &[f64], g: &GroupElement, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
    let n = g.n();
    check_chi(chi, n)?;
    if cfg.samples < 2 {
        return Err(Error::Domain("Monte-Carlo needs at least two samples".into()));
    }
    let r = rho(n);
    let ginv = g.inverse();
    let vals = sampling::chunked_map(cfg.samples, cfg.seed, |rng, _| {
        let k = random_rotation(n, rng);
        let eta = iwasawa_projection(&(&ginv * &k)).map(|e| e.coords().to_vec()).unwrap_or_else(|_| vec![0.0; n]);
        let e: f64 = eta.iter().zip(chi.iter().zip(&r)).map(|(x, (c, p))| (c + p) * x).sum();
        (-e).exp()
    });
    let m = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / m;
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (m - 1.0);
    Ok((mean, (var / m).sqrt()))
}

/// `max |Xi_chi(g) - Xi_{w chi}(g)| / Xi_chi(g)` over sampled `g` (`n = 2`), where
/// `w` swaps the two coordinates.
pub fn check_weyl_invariance(chi: &[f64], sample_count: usize, cfg: &QuadratureConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    check_chi(chi, 2)?;
    let swapped: Vec<f64> = chi.iter().rev().copied().collect();
    let mut rng = sampling::stream(cfg.seed, 0);
    let mut worst: f64 = 0.0;
    let mut best = f64::INFINITY;
    for _ in 0..sample_count {
        let t = rng.gen_range(0.0..5.0);
        let k1 = random_rotation(2, &mut rng);
        let k2 = random_rotation(2, &mut rng);
        let a = GroupElement::exp_cartan(&CartanVector::new(vec![t, -t])?);
        let g = &(&k1 * &a) * &k2;
        let x = log_spherical(chi, &g, cfg)?;
        let y = log_spherical(&swapped, &g, cfg)?;
        let d = (y - x).exp_m1().abs();
        worst = worst.max(d);
        best = best.min(d);
    }
    if sample_count == 0 {
        best = 0.0;
    }
    let mut rep = VerificationReport::new("weyl")
        .param("chi", nums(chi))
        .param("t_range", nums(&[0.0, 5.0]))
        .param("sample_count", sample_count.into());
    rep.criteria.push(Criterion::new("relative_discrepancy", best, worst, Rule::MaxAtMost, 1e-5));
    rep.seed = Some(cfg.seed);
    rep.nodes = Some(cfg.nodes);
    rep.samples = Some(sample_count);
    Ok(rep)
}

/// Lower bound `q(t) = Xi_chi(exp(t ray)) exp(-(chi - rho)(t ray)) >= 1` and polynomial growth of `q`.
pub fn check_spherical_bounds(chi: &[f64], ray: &CartanVector, t_max: f64, cfg: &QuadratureConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    let n = ray.dim();
    check_chi(chi, n)?;
    if n != 2 && n != 3 {
        return Err(Error::Unsupported(format!("spherical bounds for n = {n}")));
    }
    if chi.windows(2).any(|w| w[0] < w[1]) {
        return Err(Error::Domain("chi must be dominant".into()));
    }
    if !ray.is_dominant() || ray.coords().windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::Domain("ray must be interior dominant".into()));
    }
    if !(t_max > 0.0) {
        return Err(Error::Domain("t_max must be positive".into()));
    }
    let r = rho(n);
    let rank = (n - 1) as f64;
    let grid = linspace(0.0, t_max, 32);
    let mut series = Vec::with_capacity(grid.len());
    for &t in &grid {
        let x = ray.scaled(t);
        let g = GroupElement::exp_cartan(&x);
        let shift: f64 = x.coords().iter().zip(chi.iter().zip(&r)).map(|(v, (c, p))| (c - p) * v).sum();
        let (log_q, se) = if n == 2 {
            (log_spherical(chi, &g, cfg)? - shift, 0.0)
        } else {
            let (m, se) = spherical_mc(chi, &g, cfg)?;
            (m.ln() - shift, se / m)
        };
        series.push(SeriesPoint { t, value: log_q.exp(), std_error: se * log_q.exp() });
    }
    let slack = |p: &SeriesPoint| p.value + 3.0 * p.std_error;
    let lower_min = series.iter().map(slack).fold(f64::INFINITY, f64::min);
    let lower_max = series.iter().map(|p| p.value).fold(f64::NEG_INFINITY, f64::max);
    let tail: Vec<&SeriesPoint> = series.iter().filter(|p| p.t >= 2.0).collect();
    let ratios: Vec<f64> = tail.iter().map(|p| p.value.ln() / p.t.ln()).collect();
    let ratio_max = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let ratio_min = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let degree = if tail.len() >= 3 {
        let xs: Vec<f64> = tail.iter().map(|p| p.t.ln()).collect();
        let ys: Vec<f64> = tail.iter().map(|p| p.value.ln()).collect();
        fit_line(&xs, &ys).0
    } else {
        f64::NAN
    };
    let mut rep = VerificationReport::new("spherical-bounds")
        .param("n", n.into())
        .param("chi", nums(chi))
        .param("ray", nums(ray.coords()))
        .param("t_max", num(t_max));
    rep.criteria.push(Criterion::new("lower_bound_q", lower_min, lower_max, Rule::MinAtLeast, 1.0 - 1e-6));
    if !ratios.is_empty() {
        rep.criteria.push(Criterion::new("log_q_over_log_t", ratio_min, ratio_max, Rule::MaxAtMost, rank + 1.0));
    }
    rep.notes.push(format!("fitted polynomial degree {degree:.6} (working hypothesis: at most rank + 1 = {})", rank + 1.0));
    rep.parameters.push(("fitted_degree".into(), num(degree)));
    rep.seed = Some(cfg.seed);
    rep.nodes = Some(cfg.nodes);
    if n == 3 {
        rep.samples = Some(cfg.samples);
    }
    rep.series = series;
    Ok(rep)
}
