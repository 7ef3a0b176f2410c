//! Haar integrals on `SL(2, R)` in Cartan, Iwasawa and Bruhat coordinates.

use std::f64::consts::PI;

use nalgebra::Matrix2;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use super::{Criterion, QuadratureConfig, Rule, VerificationReport};
use crate::error::{Error, Result};
use crate::matgroup::GroupElement;
use crate::report::num;

/// Smooth bump `scale * exp(1 - 1 / (1 - d^2 / r^2))` in the Frobenius distance `d` to `center`.
#[derive(Clone, Debug, PartialEq)]
pub struct BumpFunction {
    center: Matrix2<f64>,
    radius: f64,
    scale: f64,
}

impl BumpFunction {
    pub fn new(center: &GroupElement, radius: f64) -> Result<Self> {
        if center.n() != 2 {
            return Err(Error::Unsupported("Haar cross-checks are for n = 2".into()));
        }
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain("bump radius must be positive".into()));
        }
        let m = center.matrix();
        let center = Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let col1 = center.column(0).norm();
        if col1 <= radius || center[(0, 0)].abs() <= radius {
            return Err(Error::Domain("bump support leaves the Iwasawa or Bruhat chart box".into()));
        }
        Ok(Self { center, radius, scale: 1.0 })
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.scale *= s;
        self
    }

    pub fn eval(&self, g: &Matrix2<f64>) -> f64 {
        let d2 = (g - self.center).norm_squared() / (self.radius * self.radius);
        if d2 >= 1.0 {
            0.0
        } else {
            self.scale * (1.0 - 1.0 / (1.0 - d2)).exp()
        }
    }
}

/// `int f dg` in three coordinate systems, each with its own normalization of Haar measure.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HaarIntegrals {
    pub kak: f64,
    pub iwasawa: f64,
    pub bruhat: f64,
}

fn rot(t: f64) -> Matrix2<f64> {
    let (s, c) = t.sin_cos();
    Matrix2::new(c, -s, s, c)
}

fn diag(y: f64) -> Matrix2<f64> {
    Matrix2::new(y.exp(), 0.0, 0.0, (-y).exp())
}

/// Trapezoid weights on `[lo, hi]` (endpoint halves) or a periodic grid.
fn grid(lo: f64, hi: f64, m: usize, periodic: bool) -> Vec<(f64, f64)> {
    if periodic {
        let h = (hi - lo) / m as f64;
        return (0..m).map(|i| (lo + i as f64 * h, h)).collect();
    }
    let h = (hi - lo) / (m - 1) as f64;
    (0..m)
        .map(|i| (lo + i as f64 * h, if i == 0 || i + 1 == m { h / 2.0 } else { h }))
        .collect()
}

fn cube<F>(axes: [&[(f64, f64)]; 3], f: F) -> f64
where
    F: Fn(f64, f64, f64) -> f64 + Sync,
{
    let [a, b, c] = axes;
    let slab = |&(x, wx): &(f64, f64)| -> f64 {
        let mut s = 0.0;
        for &(y, wy) in b {
            for &(z, wz) in c {
                s += wx * wy * wz * f(x, y, z);
            }
        }
        s
    };
    #[cfg(feature = "parallel")]
    let parts: Vec<f64> = a.par_iter().map(slab).collect();
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<f64> = a.iter().map(slab).collect();
    parts.iter().sum()
}

struct Bounds {
    kak_x: (f64, f64),
    iw_y: (f64, f64),
    iw_z: f64,
    br_y: (f64, f64),
    br_xz: f64,
}

fn bounds(fns: &[BumpFunction]) -> Bounds {
    let mut b = Bounds {
        kak_x: (f64::INFINITY, 0.0),
        iw_y: (f64::INFINITY, f64::NEG_INFINITY),
        iw_z: 0.0,
        br_y: (f64::INFINITY, f64::NEG_INFINITY),
        br_xz: 0.0,
    };
    for f in fns {
        let (c, r) = (&f.center, f.radius);
        // |g|_F^2 = 2 cosh 2x in Cartan coordinates
        let hi = c.norm() + r;
        let lo = (c.norm() - r).max(0.0);
        b.kak_x.0 = b.kak_x.0.min((lo * lo / 2.0).max(1.0).acosh() / 2.0);
        b.kak_x.1 = b.kak_x.1.max((hi * hi / 2.0).acosh() / 2.0);
        // first column of k a n has norm e^y; e^y z is the second column along k e1
        let (c1, c2) = (c.column(0).norm(), c.column(1).norm());
        b.iw_y.0 = b.iw_y.0.min((c1 - r).ln());
        b.iw_y.1 = b.iw_y.1.max((c1 + r).ln());
        b.iw_z = b.iw_z.max((c2 + r) / (c1 - r));
        // nbar_x m a_y n_z has (1,1) entry +-e^y, x = g21/g11, z = g12/g11
        let a = c[(0, 0)].abs();
        b.br_y.0 = b.br_y.0.min((a - r).ln());
        b.br_y.1 = b.br_y.1.max((a + r).ln());
        b.br_xz = b.br_xz.max((c[(1, 0)].abs().max(c[(0, 1)].abs()) + r) / (a - r));
    }
    b
}

/// Integrates a bump in all three systems on tensor grids with `m` points per axis.
///
/// Densities: `sqrt2 sinh 2x` for `k a_x k'` with normalized `K`, `e^{2y}` for
/// `k a_y n_z`, and `e^{2y}` for `nbar_x (+-1) a_y n_z`.
fn integrals_on(f: &BumpFunction, b: &Bounds, m: usize) -> HaarIntegrals {
    let th1 = grid(0.0, 2.0 * PI, m, true);
    let th2 = grid(0.0, PI, m, true);
    let xs = grid(b.kak_x.0, b.kak_x.1, m, false);
    let kak = cube([&xs, &th1, &th2], |x, t1, t2| {
        f.eval(&(rot(t1) * diag(x) * rot(t2))) * 2f64.sqrt() * (2.0 * x).sinh()
    }) / (2.0 * PI * PI);

    let ys = grid(b.iw_y.0, b.iw_y.1, m, false);
    let zs = grid(-b.iw_z, b.iw_z, m, false);
    let iwasawa = cube([&ys, &th1, &zs], |y, t, z| {
        f.eval(&(rot(t) * diag(y) * Matrix2::new(1.0, z, 0.0, 1.0))) * (2.0 * y).exp()
    }) / (2.0 * PI);

    let ys = grid(b.br_y.0, b.br_y.1, m, false);
    let xz = grid(-b.br_xz, b.br_xz, m, false);
    let bruhat = cube([&ys, &xz, &xz], |y, x, z| {
        let g = Matrix2::new(1.0, 0.0, x, 1.0) * diag(y) * Matrix2::new(1.0, z, 0.0, 1.0);
        (f.eval(&g) + f.eval(&(-g))) * (2.0 * y).exp()
    });
    HaarIntegrals { kak, iwasawa, bruhat }
}

fn points_per_axis(cfg: &QuadratureConfig) -> usize {
    (cfg.nodes / 16).max(8)
}

/// `int f dg` in the three systems, on grids of `nodes / 16` points per axis.
pub fn haar_integrals(f: &BumpFunction, cfg: &QuadratureConfig) -> Result<HaarIntegrals> {
    cfg.validate()?;
    Ok(integrals_on(f, &bounds(std::slice::from_ref(f)), points_per_axis(cfg)))
}

/// Calibrates the three Haar normalizations on `test_fns[0]` and compares the rest.
pub fn haar_crosscheck(test_fns: &[BumpFunction], cfg: &QuadratureConfig) -> Result<VerificationReport> {
    cfg.validate()?;
    if test_fns.len() < 2 {
        return Err(Error::Domain("the cross-check needs at least two test functions".into()));
    }
    let b = bounds(test_fns);
    let m = points_per_axis(cfg);
    let vals: Vec<HaarIntegrals> = test_fns.iter().map(|f| integrals_on(f, &b, m)).collect();
    let base = vals[0];
    if !(base.kak > 0.0 && base.iwasawa > 0.0 && base.bruhat > 0.0) {
        return Err(Error::Domain("the calibration function integrates to zero".into()));
    }
    let (ci, cb) = (base.kak / base.iwasawa, base.kak / base.bruhat);
    let mut worst: f64 = 0.0;
    let mut best = f64::INFINITY;
    let mut notes = Vec::new();
    for (j, v) in vals.iter().enumerate().skip(1) {
        for (name, other) in [("iwasawa", v.iwasawa * ci), ("bruhat", v.bruhat * cb)] {
            let d = (other / v.kak - 1.0).abs();
            worst = worst.max(d);
            best = best.min(d);
            notes.push(format!("function {j}: kak {:.9e}, {name} {:.9e}", v.kak, other));
        }
    }
    let mut rep = VerificationReport::new("haar")
        .param("functions", test_fns.len().into())
        .param("points_per_axis", m.into())
        .param("iwasawa_over_kak", num(1.0 / ci))
        .param("bruhat_over_kak", num(1.0 / cb));
    rep.criteria.push(Criterion::new("relative_disagreement", best, worst, Rule::MaxAtMost, 0.01));
    rep.nodes = Some(m);
    rep.notes = notes;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bump(rows: [[f64; 2]; 2], r: f64) -> BumpFunction {
        let g = GroupElement::from_rows(&[rows[0].to_vec(), rows[1].to_vec()]).unwrap();
        BumpFunction::new(&g, r).unwrap()
    }

    fn cfg() -> QuadratureConfig {
        QuadratureConfig::default().with_nodes(1024)
    }

    /// Entries chart oracle: `dg = da db dc / |a|` with `d = (1 + bc) / a`.
    fn entries_oracle(f: &BumpFunction, m: usize) -> f64 {
        let (c, r) = (f.center, f.radius);
        let ga = grid(c[(0, 0)] - r, c[(0, 0)] + r, m, false);
        let gb = grid(c[(0, 1)] - r, c[(0, 1)] + r, m, false);
        let gc = grid(c[(1, 0)] - r, c[(1, 0)] + r, m, false);
        cube([&ga, &gb, &gc], |a, b, cc| f.eval(&Matrix2::new(a, b, cc, (1.0 + b * cc) / a)) / a.abs())
    }

    #[test]
    fn identical_functions_calibrate_exactly() {
        let f = bump([[1.0, 0.0], [0.0, 1.0]], 0.6);
        let rep = haar_crosscheck(&[f.clone(), f], &cfg()).unwrap();
        assert!(rep.observed().1 < 1e-12, "{:?}", rep.criteria);
    }

    #[test]
    fn linearity() {
        let f = bump([[1.2, 0.3], [0.1, 0.8583333333333333]], 0.5);
        let a = haar_integrals(&f, &cfg()).unwrap();
        let b = haar_integrals(&f.clone().scaled(7.0), &cfg()).unwrap();
        for (x, y) in [(a.kak, b.kak), (a.iwasawa, b.iwasawa), (a.bruhat, b.bruhat)] {
            assert!((y / x - 7.0).abs() < 1e-12);
        }
    }

    #[test]
    fn shifted_bumps_agree_after_calibration() {
        let f0 = bump([[1.0, 0.0], [0.0, 1.0]], 0.6);
        let f1 = bump([[2.0, 1.0], [1.0, 1.0]], 0.7);
        let f2 = bump([[-1.5, 0.5], [0.0, -2.0 / 3.0]], 0.4);
        let rep = haar_crosscheck(&[f0.clone(), f1.clone(), f2.clone()], &cfg()).unwrap();
        assert!(rep.pass(), "{:?} {:?}", rep.criteria, rep.notes);
        // independent oracle in the entries chart has its own constant; compare ratios
        let o: Vec<f64> = [&f0, &f1, &f2].iter().map(|f| entries_oracle(f, 96)).collect();
        let k: Vec<f64> = [&f0, &f1, &f2].iter().map(|f| haar_integrals(f, &cfg()).unwrap().kak).collect();
        for j in 1..3 {
            let r = (k[j] / k[0]) / (o[j] / o[0]);
            assert!((r - 1.0).abs() < 0.01, "function {j}: ratio {r}");
        }
    }

    #[test]
    fn normalizations_match_theory() {
        // with K of mass one, Iwasawa dk da dn and Bruhat dnbar da dn are pi and 2 pi ... times KAK
        let f = bump([[1.0, 0.0], [0.0, 1.0]], 0.6);
        let v = haar_integrals(&f, &cfg()).unwrap();
        let o = entries_oracle(&f, 96);
        assert!((v.bruhat / o - 1.0).abs() < 1e-3, "{} {}", v.bruhat, o);
    }

    #[test]
    fn needs_two_functions() {
        let f = bump([[1.0, 0.0], [0.0, 1.0]], 0.6);
        assert!(haar_crosscheck(&[f], &cfg()).is_err());
    }
}
