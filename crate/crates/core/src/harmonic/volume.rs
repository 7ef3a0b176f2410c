//! Local volume decay `nu(a B a^-1 cap B)` and growth of `nu(B g B)`.

use nalgebra::DMatrix;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{haar_integrals, linspace, BumpFunction, Criterion, QuadratureConfig, Rule, SeriesPoint, VerificationReport};
use crate::error::{Error, Result};
use crate::matgroup::{bruhat_coordinates, sample_box, BoxRegion, CartanVector, GroupElement};
use crate::report::{num, nums};
use crate::rootdata::rho_eval_f64;

const GRID: usize = 32;

fn check_ray(ray: &CartanVector, n: usize, interior: bool) -> Result<()> {
    if ray.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: ray.dim() });
    }
    let strict = ray.coords().windows(2).all(|w| w[0] > w[1]);
    if !ray.is_dominant() || (interior && !strict) || ray.norm() == 0.0 {
        return Err(Error::Domain("ray must be dominant and nonzero".into()));
    }
    Ok(())
}

fn conjugate_by_exp(m: &DMatrix<f64>, x: &[f64]) -> DMatrix<f64> {
    // a^-1 m a with a = exp(diag(x))
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * (x[j] - x[i]).exp())
}

/// Monte-Carlo estimate of `nu(a_t B a_t^-1 cap B) e^{2 rho(t ray)}` on a grid of `t`.
pub fn volume_decay_conjugation(
    region: &BoxRegion,
    ray: &CartanVector,
    t_max: f64,
    cfg: &QuadratureConfig,
) -> Result<VerificationReport> {
    cfg.validate()?;
    let n = region.n();
    check_ray(ray, n, true)?;
    if !(t_max > 0.0) {
        return Err(Error::Domain("t_max must be positive".into()));
    }
    let samples = sample_box(region, cfg.samples, cfg.seed)?;
    let count = samples.len() as f64;
    let mats: Vec<(DMatrix<f64>, f64)> = samples.iter().map(|(g, w)| (g.matrix(), *w)).collect();
    if mats.iter().any(|(m, _)| bruhat_coordinates(m).is_none()) {
        return Err(Error::Domain("box is not inside the open Bruhat cell".into()));
    }
    let grid = linspace(0.0, t_max, GRID);
    let point = |t: f64| -> Result<SeriesPoint> {
        let x = ray.scaled(t);
        let mut sum = 0.0;
        let mut sq = 0.0;
        for (m, w) in &mats {
            let c = conjugate_by_exp(m, x.coords());
            if region.contains(&GroupElement::from_matrix_unchecked(c))? {
                sum += w;
                sq += (w * count).powi(2);
            }
        }
        let var = (sq / count - sum * sum) / (count - 1.0).max(1.0);
        let norm = (2.0 * rho_eval_f64(x.coords())).exp();
        Ok(SeriesPoint { t, value: sum * norm, std_error: (var.max(0.0) / count).sqrt() * norm })
    };
    #[cfg(feature = "parallel")]
    let series: Vec<SeriesPoint> = grid.par_iter().map(|&t| point(t)).collect::<Result<_>>()?;
    #[cfg(not(feature = "parallel"))]
    let series: Vec<SeriesPoint> = grid.iter().map(|&t| point(t)).collect::<Result<_>>()?;

    let early: Vec<f64> = series.iter().filter(|p| p.t <= t_max / 4.0).map(|p| p.value).collect();
    let plateau = early.iter().sum::<f64>() / early.len() as f64;
    let rel: Vec<f64> = series.iter().map(|p| (p.value - 3.0 * p.std_error) / plateau).collect();
    let lo = rel.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = rel.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut rep = VerificationReport::new("volume-decay")
        .param("ray", nums(ray.coords()))
        .param("t_max", num(t_max))
        .param("box", serde_json::to_value(region)?)
        .param("plateau", num(plateau));
    rep.criteria.push(Criterion::new("normalized_over_plateau", lo, hi, Rule::MaxAtMost, 3.0));
    rep.seed = Some(cfg.seed);
    rep.samples = Some(cfg.samples);
    rep.series = series;
    Ok(rep)
}

/// Outer KAK-shell and inner Bruhat-box bounds for `nu(B a_t B)`, `B = K exp(a(r)) K`, `n = 2`.
pub fn volume_growth_bgb(ray: &CartanVector, t_max: f64, radius: f64, cfg: &QuadratureConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    if ray.dim() != 2 {
        return Err(Error::Unsupported("volume growth bounds are implemented for n = 2".into()));
    }
    check_ray(ray, 2, false)?;
    if !(t_max >= 0.0) {
        return Err(Error::Domain("t_max must be nonnegative".into()));
    }
    // |kappa(nbar_x)| = sqrt2 asinh(|x| / 2); split the radius between nbar, a and n
    let w1 = 2.0 * (0.45 * radius / 2f64.sqrt()).sinh();
    let w2 = 0.45 * radius / 2f64.sqrt();
    let w3 = 2.0 * (0.9 * radius / 2f64.sqrt()).sinh();
    if !(w1 > 1e-12 && w2 > 1e-12) || !radius.is_finite() {
        return Err(Error::Domain(format!("radius {radius} is too small for an inner Bruhat box")));
    }
    let reference = BumpFunction::new(&GroupElement::identity(2), 0.6)?;
    let h = haar_integrals(&reference, cfg)?;
    let bruhat_to_kak = h.kak / h.bruhat;

    let u = ray.coords()[0];
    let spread = radius * 2f64.sqrt();
    let grid = linspace(0.0, t_max, GRID);
    let mut outer = Vec::with_capacity(GRID);
    let mut inner = Vec::with_capacity(GRID);
    for &t in &grid {
        // kappa(B a_t B) lies in the shell of radius 2r around t ray
        let (a, b) = ((t * u - spread).max(0.0), t * u + spread);
        let xs = linspace(a, b, cfg.nodes);
        let step = (b - a) / (cfg.nodes - 1) as f64;
        let shell: f64 = xs
            .iter()
            .enumerate()
            .map(|(i, x)| {
                let w = if i == 0 || i + 1 == xs.len() { 0.5 } else { 1.0 };
                w * 2f64.sqrt() * (2.0 * x).sinh()
            })
            .sum::<f64>()
            * step;
        let norm = (2.0 * t * u).exp();
        outer.push(shell / norm);
        // nbar_x a_{tu + y} n_z with the box above lies in B a_t B
        let boxed = 2.0 * w1 * 2.0 * w3 * (2.0 * w2).sinh();
        inner.push(boxed * bruhat_to_kak);
    }
    let ratio: Vec<f64> = inner.iter().zip(&outer).map(|(i, o)| i / o).collect();
    let mm = |v: &[f64]| {
        (v.iter().cloned().fold(f64::INFINITY, f64::min), v.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
    };
    let (olo, ohi) = mm(&outer);
    let (ilo, ihi) = mm(&inner);
    let (rlo, rhi) = mm(&ratio);
    let mut rep = VerificationReport::new("volume-growth")
        .param("ray", nums(ray.coords()))
        .param("t_max", num(t_max))
        .param("radius", num(radius))
        .param("inner_box_half_widths", nums(&[w1, w2, w3]))
        .param("bruhat_to_kak", num(bruhat_to_kak))
        .param("inner_normalized", nums(&inner));
    rep.criteria.push(Criterion::new("outer_normalized", olo, ohi, Rule::MaxOverMinAtMost, 50.0));
    rep.criteria.push(Criterion::new("inner_normalized", ilo, ihi, Rule::MaxOverMinAtMost, 50.0));
    rep.criteria.push(Criterion::new("inner_over_outer", rlo, rhi, Rule::MaxAtMost, 1.0));
    rep.nodes = Some(cfg.nodes);
    rep.series = grid.iter().zip(&outer).map(|(&t, &v)| SeriesPoint { t, value: v, std_error: 0.0 }).collect();
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgroup::cartan_projection;

    fn ray() -> CartanVector {
        CartanVector::new(vec![1.0, -1.0]).unwrap()
    }

    #[test]
    fn growth_bounds_and_closed_form() {
        let cfg = QuadratureConfig::default().with_nodes(1024);
        let rep = volume_growth_bgb(&ray(), 8.0, 1.0, &cfg).unwrap();
        assert!(rep.pass(), "{:?}", rep.criteria);
        for p in &rep.series {
            let s = 2f64.sqrt();
            let (a, b) = ((p.t - s).max(0.0), p.t + s);
            let exact = s * ((2.0 * b).cosh() - (2.0 * a).cosh()) / 2.0 / (2.0 * p.t).exp();
            assert!((p.value / exact - 1.0).abs() < 1e-5, "t={}", p.t);
            assert!(p.value > 0.0 && p.value.is_finite());
        }
        assert!(volume_growth_bgb(&ray(), 8.0, 0.0, &cfg).is_err());
    }

    #[test]
    fn inner_box_lies_in_the_ball_product() {
        let r: f64 = 1.0;
        let w1 = 2.0 * (0.45 * r / 2f64.sqrt()).sinh();
        let w2 = 0.45 * r / 2f64.sqrt();
        let w3 = 2.0 * (0.9 * r / 2f64.sqrt()).sinh();
        for x in [-w1, w1] {
            for y in [-w2, w2] {
                let g = crate::matgroup::bruhat_element(2, &[x], &[y], &[0.0]);
                assert!(cartan_projection(&g).unwrap().norm() <= r + 1e-12);
            }
        }
        let nz = crate::matgroup::bruhat_element(2, &[0.0], &[0.0], &[w3]);
        assert!(cartan_projection(&nz).unwrap().norm() <= r + 1e-12);
    }

    #[test]
    fn decay_is_flat_after_normalization() {
        let cfg = QuadratureConfig::default().with_samples(100_000).with_seed(3);
        let region = BoxRegion::entries_around_identity(2, 0.25);
        let rep = volume_decay_conjugation(&region, &ray(), 6.0, &cfg).unwrap();
        assert!(rep.pass(), "{:?}", rep.criteria);
        let p0 = rep.series[0];
        assert!(p0.value > 0.0 && p0.std_error > 0.0);
        // at t = 0 the normalized quantity is the box volume
        let direct: f64 = sample_box(&region, 100_000, 3).unwrap().iter().map(|s| s.1).sum();
        assert!((p0.value - direct).abs() < 1e-12);
    }

    #[test]
    fn membership_symmetry() {
        let region = BoxRegion::entries_around_identity(2, 0.25);
        let a = GroupElement::exp_cartan(&ray().scaled(0.3));
        for (g, _) in sample_box(&region, 200, 9).unwrap() {
            let lhs = region.contains(&g).unwrap() && region.contains(&(&(&a.inverse() * &g) * &a)).unwrap();
            let c = conjugate_by_exp(&g.matrix(), ray().scaled(0.3).coords());
            let rhs = region.contains(&GroupElement::from_matrix_unchecked(c)).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn box_outside_cell_is_rejected() {
        let region = BoxRegion::Entries { n: 2, center: vec![0.0, 1.0, -1.0, 0.0], half_width: 0.3 };
        let cfg = QuadratureConfig::default().with_samples(1000);
        assert!(volume_decay_conjugation(&region, &ray(), 2.0, &cfg).is_err());
    }
}
