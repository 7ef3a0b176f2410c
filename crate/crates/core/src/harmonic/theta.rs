//! Decay of `c(t) = int_H nu(a_t B cap B h) dnu_H(h)` along a ray.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
#[cfg(feature = "parallel")]
use rayon::prelude::*;
use serde_json::{Map, Value};

use super::{linspace, QuadratureConfig, SeriesPoint};
use crate::delta::{enumerate_ball, fit_line};
use crate::error::{Error, Result};
use crate::matgroup::{
    cartan_ball_chamber_integral, cartan_projection, modular_character, random_rotation, sample_chamber_point,
    BoxRegion, CartanVector, GroupElement, SubgroupSpec,
};
use crate::report::{num, nums};
use crate::rootdata::rho_eval_f64;
use crate::sampling::{self, Stream, CHUNK};

const GRID: usize = 32;
const DEFAULT_ORBIT_DEPTH: usize = 12;

/// Fitted decay exponent with the curve it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct ThetaFit {
    /// `1 + slope` of `log c(t)` against `2 rho(t ray)`, clamped to `[0, 1]`.
    pub theta: f64,
    pub slope: f64,
    pub slope_std_error: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
    pub fit_window: (f64, f64),
    /// `c(t)` is positive and nonincreasing on the window, within three standard errors.
    pub monotone: bool,
    pub series: Vec<SeriesPoint>,
    pub seed: u64,
    pub samples: usize,
    pub notes: Vec<String>,
}

impl ThetaFit {
    pub fn to_json(&self) -> Value {
        let mut m = Map::new();
        m.insert("theta".into(), num(self.theta));
        m.insert("slope".into(), num(self.slope));
        m.insert("slope_std_error".into(), num(self.slope_std_error));
        m.insert("residual".into(), num(self.residual));
        m.insert("fit_window".into(), nums(&[self.fit_window.0, self.fit_window.1]));
        m.insert("monotone".into(), Value::Bool(self.monotone));
        m.insert("seed".into(), self.seed.into());
        m.insert("samples".into(), self.samples.into());
        m.insert(
            "series".into(),
            Value::Array(
                self.series
                    .iter()
                    .map(|p| {
                        let mut e = Map::new();
                        e.insert("t".into(), num(p.t));
                        e.insert("c".into(), num(p.value));
                        e.insert("std_error".into(), num(p.std_error));
                        Value::Object(e)
                    })
                    .collect(),
            ),
        );
        m.insert("notes".into(), Value::Array(self.notes.iter().cloned().map(Value::String).collect()));
        Value::Object(m)
    }
}

/// Estimator of `nu_H{h : |kappa(m h)| <= r}` for one `m`, consuming randomness from `rng`.
enum Inner {
    TorusRankOne,
    UnipotentRankOne,
    Torus { n: usize },
    Unipotent { n: usize },
    Blocks { blocks: Vec<(usize, usize)>, n: usize },
    Orbit { elements: Vec<(DMatrix<f64>, f64)> },
}

fn in_ball(m: &DMatrix<f64>, r: f64) -> bool {
    cartan_projection(&GroupElement::from_matrix_unchecked(m.clone())).map_or(false, |k| k.norm() <= r)
}

/// Largest coordinate of a traceless vector of norm `r`.
fn coord_max(n: usize, r: f64) -> f64 {
    r * ((n as f64 - 1.0) / n as f64).sqrt()
}

/// Uniform point of the unit `k`-ball for `k <= 2`.
fn unit_ball(k: usize, rng: &mut Stream) -> Vec<f64> {
    match k {
        1 => vec![2.0 * rng.gen::<f64>() - 1.0],
        _ => {
            let rad = rng.gen::<f64>().sqrt();
            let ang = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
            vec![rad * ang.cos(), rad * ang.sin()]
        }
    }
}

impl Inner {
    fn measure(&self, m: &DMatrix<f64>, r: f64, trunc: f64, block_vols: &[f64], rng: &mut Stream) -> f64 {
        match self {
            Self::TorusRankOne => {
                // |m diag(e^s, e^-s)|_F^2 = A w + B / w with w = e^{2s}
                let f2 = 2.0 * (2f64.sqrt() * r).cosh();
                let a = m.column(0).norm_squared();
                let b = m.column(1).norm_squared();
                let disc = f2 * f2 - 4.0 * a * b;
                if disc <= 0.0 {
                    return 0.0;
                }
                let (hi, lo) = (f2 + disc.sqrt(), f2 - disc.sqrt());
                0.5 * (hi / lo).ln()
            }
            Self::UnipotentRankOne => {
                let f2 = 2.0 * (2f64.sqrt() * r).cosh();
                let (c1, c2) = (m.column(0), m.column(1));
                let a = c1.norm_squared();
                let b = c1.dot(&c2);
                let disc = b * b - a * (a + c2.norm_squared() - f2);
                if disc <= 0.0 {
                    0.0
                } else {
                    2.0 * disc.sqrt() / a
                }
            }
            Self::Torus { n } => {
                // every column of m h has norm in [e^-c, e^c]
                let c = coord_max(*n, r);
                let logs: Vec<f64> = (0..*n).map(|j| m.column(j).norm().ln()).collect();
                let mut s: Vec<f64> = (0..n - 1).map(|j| -c - logs[j] + 2.0 * c * rng.gen::<f64>()).collect();
                let last = -s.iter().sum::<f64>();
                if (last + logs[n - 1]).abs() > c {
                    return 0.0;
                }
                s.push(last);
                let h = DMatrix::from_diagonal(&DVector::from_iterator(*n, s.iter().map(|x| x.exp())));
                if in_ball(&(m * h), r) {
                    (2.0 * c).powi(*n as i32 - 1)
                } else {
                    0.0
                }
            }
            Self::Unipotent { n } => {
                // column j of m h is m_j + sum_{i<j} h_ij m_i; each lies in the ball of radius e^c
                let e2 = (2.0 * coord_max(*n, r)).exp();
                if m.column(0).norm_squared() > e2 {
                    return 0.0;
                }
                let mut h = DMatrix::<f64>::identity(*n, *n);
                let mut weight = 1.0;
                for j in 1..*n {
                    let mj = m.columns(0, j).into_owned();
                    let g = mj.transpose() * &mj;
                    let Some(chol) = g.clone().cholesky() else {
                        return 0.0;
                    };
                    let target = m.column(j).into_owned();
                    let center = -chol.solve(&(mj.transpose() * &target));
                    let resid = (&target + &mj * &center).norm_squared();
                    if resid >= e2 {
                        return 0.0;
                    }
                    let rad = (e2 - resid).sqrt();
                    let v = DVector::from_vec(unit_ball(j, rng));
                    let l = chol.l();
                    let offset = l.transpose().solve_upper_triangular(&v).expect("cholesky factor is invertible");
                    let unit_volume = if j == 1 { 2.0 } else { std::f64::consts::PI };
                    weight *= unit_volume * rad.powi(j as i32) / g.determinant().sqrt();
                    for i in 0..j {
                        h[(i, j)] = center[i] + rad * offset[i];
                    }
                }
                if in_ball(&(m * h), r) {
                    weight
                } else {
                    0.0
                }
            }
            Self::Blocks { blocks, n } => {
                let mut h = DMatrix::<f64>::identity(*n, *n);
                for &(k, p) in blocks {
                    let x = sample_chamber_point(k, trunc, rng);
                    let k1 = random_rotation(k, rng);
                    let k2 = random_rotation(k, rng);
                    let a = DMatrix::from_diagonal(&DVector::from_iterator(k, x.iter().map(|v| v.exp())));
                    let blk = k1.matrix() * a * k2.matrix();
                    h.view_mut((p, p), (k, k)).copy_from(&blk);
                }
                if in_ball(&(m * h), r) {
                    block_vols.iter().product()
                } else {
                    0.0
                }
            }
            Self::Orbit { elements } => elements
                .iter()
                // |kappa(gamma)| is within r of |kappa(m)|, which is within r of t |ray|
                .filter(|(_, norm)| *norm <= trunc + 1e-12 && *norm >= trunc - 4.0 * r - 1e-12)
                .filter(|(g, _)| in_ball(&(m * g), r))
                .count() as f64,
        }
    }
}

fn inner_for(h: &SubgroupSpec, n: usize, ray_len: f64, t_max: f64, r: f64, cfg: &QuadratureConfig) -> Result<Inner> {
    Ok(match h {
        SubgroupSpec::DiagonalTorus { .. } if n == 2 => Inner::TorusRankOne,
        SubgroupSpec::UpperUnipotent { .. } if n == 2 => Inner::UnipotentRankOne,
        SubgroupSpec::DiagonalTorus { .. } => Inner::Torus { n },
        SubgroupSpec::UpperUnipotent { .. } => Inner::Unipotent { n },
        SubgroupSpec::BlockReductive { blocks, positions, .. } => Inner::Blocks {
            blocks: blocks.iter().copied().zip(positions.iter().copied()).collect(),
            n,
        },
        SubgroupSpec::DiscreteGenerators { .. } => {
            let depth = cfg.orbit_depth.unwrap_or(DEFAULT_ORBIT_DEPTH);
            let ball = enumerate_ball(h, depth)?;
            let reach = ray_len * t_max + 2.0 * r;
            let elements = (0..ball.len())
                .filter_map(|i| {
                    let norm = ball.kappa(i).iter().map(|x| x * x).sum::<f64>().sqrt();
                    (norm <= reach + 1e-12).then(|| (ball.element(i).matrix(), norm))
                })
                .collect();
            Inner::Orbit { elements }
        }
        SubgroupSpec::CatalogName(name) => return Err(Error::Unsupported(format!("resolve catalog name `{name}` first"))),
    })
}

/// Fits `theta` from `c(t)` on `32` points of `[0, t_max]`, using the upper half of the grid.
///
/// `B` must be a Cartan ball `K exp(a(r)) K`. The outer integral over `B` is Monte
/// Carlo with the same `B`-samples at every `t`; the inner `H`-measure is exact on
/// `SL(2)` tori and unipotent groups, a sum over the word ball for discrete `H`, and
/// importance-sampled elsewhere.
pub fn estimate_theta_ray(
    h: &SubgroupSpec,
    ray: &CartanVector,
    t_max: f64,
    region: &BoxRegion,
    cfg: &QuadratureConfig,
) -> Result<ThetaFit> {
    cfg.validate()?;
    let BoxRegion::CartanBall { n, radius: r } = *region else {
        return Err(Error::Unsupported("the decay estimator needs a Cartan ball".into()));
    };
    if !(r > 0.0) {
        return Err(Error::Domain("empty Cartan ball".into()));
    }
    if !(2..=3).contains(&n) {
        return Err(Error::Unsupported(format!("decay estimation for n = {n}")));
    }
    if let Some(hn) = h.ambient_n() {
        if hn != n {
            return Err(Error::DimensionMismatch { expected: n, got: hn });
        }
    }
    if ray.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: ray.dim() });
    }
    if !ray.is_dominant() || ray.norm() == 0.0 {
        return Err(Error::Domain("ray must be dominant and nonzero".into()));
    }
    if !(t_max > 0.0) {
        return Err(Error::Domain("t_max must be positive".into()));
    }
    if !matches!(h, SubgroupSpec::DiscreteGenerators { .. }) {
        if modular_character(h)?.iter().any(|c| c.abs() > 1e-9) {
            return Err(Error::Unsupported("non-unimodular subgroup".into()));
        }
    }
    if cfg.samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let inner = inner_for(h, n, ray.norm(), t_max, r, cfg)?;
    let grid = linspace(0.0, t_max, GRID);
    let vol = cartan_ball_chamber_integral(n, r);
    let count = cfg.samples;
    let chunks = count.div_ceil(CHUNK);

    // per-t truncation radius for H-samples and the matching chamber volumes
    let truncs: Vec<f64> = grid.iter().map(|t| t * ray.norm() + 2.0 * r).collect();
    let block_vols: Vec<Vec<f64>> = match &inner {
        Inner::Blocks { blocks, .. } => truncs
            .iter()
            .map(|&tr| blocks.iter().map(|&(k, _)| cartan_ball_chamber_integral(k, tr)).collect())
            .collect(),
        _ => vec![Vec::new(); GRID],
    };
    let a_ts: Vec<DMatrix<f64>> = grid.iter().map(|&t| GroupElement::exp_cartan(&ray.scaled(t)).matrix()).collect();

    let chunk_sums = |c: usize| -> Vec<(f64, f64)> {
        let mut rng = sampling::stream(cfg.seed, c as u64);
        let mut acc = vec![(0.0, 0.0); GRID];
        let end = ((c + 1) * CHUNK).min(count);
        for i in c * CHUNK..end {
            let x = sample_chamber_point(n, r, &mut rng);
            let k1 = random_rotation(n, &mut rng);
            let k2 = random_rotation(n, &mut rng);
            let b = k1.matrix() * DMatrix::from_diagonal(&DVector::from_iterator(n, x.iter().map(|v| v.exp()))) * k2.matrix();
            for (j, a) in a_ts.iter().enumerate() {
                // the same inner stream at every t
                let mut inner_rng = sampling::stream(cfg.seed ^ 0x9e37_79b9_7f4a_7c15, i as u64);
                let m = a * &b;
                let v = inner.measure(&m, r, truncs[j], &block_vols[j], &mut inner_rng);
                acc[j].0 += v;
                acc[j].1 += v * v;
            }
        }
        acc
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<Vec<(f64, f64)>> = (0..chunks).into_par_iter().map(chunk_sums).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Vec<(f64, f64)>> = (0..chunks).map(chunk_sums).collect();
    let mut totals = vec![(0.0, 0.0); GRID];
    for p in &parts {
        for (t, v) in totals.iter_mut().zip(p) {
            t.0 += v.0;
            t.1 += v.1;
        }
    }
    let m = count as f64;
    let series: Vec<SeriesPoint> = grid
        .iter()
        .zip(&totals)
        .map(|(&t, &(s, sq))| {
            let mean = s / m;
            let var = ((sq / m - mean * mean) * m / (m - 1.0)).max(0.0);
            SeriesPoint { t, value: vol * mean, std_error: vol * (var / m).sqrt() }
        })
        .collect();

    let mut notes = Vec::new();
    if let Inner::Orbit { elements } = &inner {
        notes.push(format!("discrete H summed over {} word-ball elements", elements.len()));
    }
    let window: Vec<&SeriesPoint> = series.iter().filter(|p| p.t >= t_max / 2.0).collect();
    let fit_window = (window[0].t, t_max);
    let monotone = window.iter().all(|p| p.value > 0.0)
        && window.windows(2).all(|w| w[1].value <= w[0].value + 3.0 * (w[0].std_error + w[1].std_error));
    let positive: Vec<&&SeriesPoint> = window.iter().filter(|p| p.value > 0.0).collect();
    let rho_ray = rho_eval_f64(ray.coords());
    let (theta, slope, se, residual) = if positive.len() < 3 || rho_ray <= 0.0 {
        notes.push("c(t) vanishes on the fit window; theta set to 0".into());
        (0.0, f64::NEG_INFINITY, f64::NAN, f64::NAN)
    } else {
        let xs: Vec<f64> = positive.iter().map(|p| 2.0 * rho_ray * p.t).collect();
        let ys: Vec<f64> = positive.iter().map(|p| p.value.ln()).collect();
        let (slope, icpt, se) = fit_line(&xs, &ys);
        let rms = (xs.iter().zip(&ys).map(|(x, y)| (y - icpt - slope * x).powi(2)).sum::<f64>() / xs.len() as f64).sqrt();
        if positive.len() < window.len() {
            notes.push(format!("{} window points with c = 0 were left out of the fit", window.len() - positive.len()));
        }
        ((1.0 + slope).clamp(0.0, 1.0), slope, se, rms)
    };
    Ok(ThetaFit {
        theta,
        slope,
        slope_std_error: se,
        residual,
        fit_window,
        monotone,
        series,
        seed: cfg.seed,
        samples: count,
        notes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(samples: usize) -> QuadratureConfig {
        QuadratureConfig::default().with_samples(samples).with_seed(11)
    }

    fn ray2() -> CartanVector {
        CartanVector::new(vec![1.0, -1.0]).unwrap()
    }

    fn brute_measure(m: &DMatrix<f64>, r: f64, torus: bool) -> f64 {
        // dense scan of the one-parameter subgroup
        let (lo, hi, steps) = (-12.0, 12.0, 400_000);
        let h = (hi - lo) / steps as f64;
        let mut hits = 0usize;
        for i in 0..steps {
            let s = lo + (i as f64 + 0.5) * h;
            let g = if torus {
                DMatrix::from_row_slice(2, 2, &[s.exp(), 0.0, 0.0, (-s).exp()])
            } else {
                DMatrix::from_row_slice(2, 2, &[1.0, s, 0.0, 1.0])
            };
            if in_ball(&(m * g), r) {
                hits += 1;
            }
        }
        hits as f64 * h
    }

    #[test]
    fn rank_one_intervals_match_scan() {
        let mut rng = sampling::stream(5, 0);
        for _ in 0..5 {
            let k = random_rotation(2, &mut rng);
            let a = GroupElement::exp_cartan(&ray2().scaled(rng.gen_range(0.0..0.6)));
            let m = (&k * &a).matrix();
            for (inner, torus) in [(Inner::TorusRankOne, true), (Inner::UnipotentRankOne, false)] {
                let exact = inner.measure(&m, 1.0, 0.0, &[], &mut rng);
                let scan = brute_measure(&m, 1.0, torus);
                assert!((exact - scan).abs() < 1e-3, "{exact} vs {scan}");
            }
        }
    }

    #[test]
    fn sampled_inner_measures_are_unbiased() {
        // compare the n = 3 samplers on a block-diagonal m with the rank-one exact answer is hard;
        // instead check the torus sampler against a dense grid in (s1, s2)
        let m = GroupElement::exp_cartan(&CartanVector::new(vec![0.3, 0.1, -0.4]).unwrap()).matrix();
        let r = 1.0;
        let inner = Inner::Torus { n: 3 };
        let mut rng = sampling::stream(1, 0);
        let k = 200_000;
        let est: f64 = (0..k).map(|_| inner.measure(&m, r, 0.0, &[], &mut rng)).sum::<f64>() / k as f64;
        let steps = 600;
        let (lo, hi) = (-2.0, 2.0);
        let h = (hi - lo) / steps as f64;
        let mut grid = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                let s1 = lo + (i as f64 + 0.5) * h;
                let s2 = lo + (j as f64 + 0.5) * h;
                let d = DMatrix::from_diagonal(&DVector::from_vec(vec![s1.exp(), s2.exp(), (-s1 - s2).exp()]));
                if in_ball(&(&m * d), r) {
                    grid += h * h;
                }
            }
        }
        assert!((est / grid - 1.0).abs() < 0.02, "{est} vs {grid}");

        let inner = Inner::Unipotent { n: 3 };
        let est: f64 = (0..k).map(|_| inner.measure(&m, r, 0.0, &[], &mut rng)).sum::<f64>() / k as f64;
        let steps = 120;
        let (lo, hi) = (-2.5, 2.5);
        let h = (hi - lo) / steps as f64;
        let mut grid = 0.0;
        for i in 0..steps {
            for j in 0..steps {
                for l in 0..steps {
                    let x = |q: usize| lo + (q as f64 + 0.5) * h;
                    let n = DMatrix::from_row_slice(3, 3, &[1.0, x(i), x(j), 0.0, 1.0, x(l), 0.0, 0.0, 1.0]);
                    if in_ball(&(&m * n), r) {
                        grid += h * h * h;
                    }
                }
            }
        }
        assert!((est / grid - 1.0).abs() < 0.03, "{est} vs {grid}");
    }

    #[test]
    fn trivial_subgroup_vanishes() {
        let h = SubgroupSpec::discrete(vec![GroupElement::identity_exact(2)]).unwrap();
        let region = BoxRegion::CartanBall { n: 2, radius: 1.0 };
        let fit = estimate_theta_ray(&h, &ray2(), 3.0, &region, &cfg(20_000)).unwrap();
        assert!(fit.theta <= 0.1);
        assert!(fit.series[0].value > 0.0);
        assert_eq!(fit.series.last().unwrap().value, 0.0);
    }

    #[test]
    fn torus_and_unipotent_rates() {
        let region = BoxRegion::CartanBall { n: 2, radius: 1.0 };
        let torus = estimate_theta_ray(&SubgroupSpec::DiagonalTorus { n: 2 }, &ray2(), 4.0, &region, &cfg(200_000)).unwrap();
        // the torus orbit through the base point is fixed by a_t; nearby points leave at rate e^{-2t}
        assert!(torus.theta < 0.15, "{}", torus.theta);
        assert!(torus.monotone);
        let uni = estimate_theta_ray(&SubgroupSpec::UpperUnipotent { n: 2 }, &ray2(), 4.0, &region, &cfg(200_000)).unwrap();
        assert!((uni.theta - 0.5).abs() < 0.15, "{}", uni.theta);
    }

    #[test]
    fn deterministic_given_seed() {
        let region = BoxRegion::CartanBall { n: 2, radius: 1.0 };
        let a = estimate_theta_ray(&SubgroupSpec::DiagonalTorus { n: 2 }, &ray2(), 3.0, &region, &cfg(5000)).unwrap();
        let b = estimate_theta_ray(&SubgroupSpec::DiagonalTorus { n: 2 }, &ray2(), 3.0, &region, &cfg(5000)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_input() {
        let region = BoxRegion::CartanBall { n: 2, radius: 1.0 };
        let h = SubgroupSpec::CatalogName("x".into());
        assert!(estimate_theta_ray(&h, &ray2(), 3.0, &region, &cfg(100)).is_err());
        let entries = BoxRegion::entries_around_identity(2, 0.2);
        assert!(estimate_theta_ray(&SubgroupSpec::DiagonalTorus { n: 2 }, &ray2(), 3.0, &entries, &cfg(100)).is_err());
    }
}
