//! The local volume decay exponent `beta = sup rho_h / rho_g` over the split
//! torus of `H`, computed exactly by extreme-ray enumeration, plus verdicts and
//! the `theta <-> p` conversion.

use itertools::Itertools;
use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, q, Q};
use crate::rhofun::{rho_eval, rho_eval_f64, RhoFunction};
use crate::rootdata::WeightSystem;
use crate::sampling;

/// Cap on the number of candidate hyperplane subsets.
pub const MAX_SUBSETS: u64 = 10_000_000;

/// The pair `(rho_h, rho_g)` on a common parameter space of dimension `dim`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairSpec {
    pub label: String,
    pub dim: usize,
    pub h_system: WeightSystem,
    pub g_system: WeightSystem,
    /// Acknowledges that `rho_g` may vanish on a nonzero subspace.
    pub allow_degenerate: bool,
}

impl PairSpec {
    pub fn new(label: impl Into<String>, h_system: WeightSystem, g_system: WeightSystem) -> Result<Self> {
        Self::build(label.into(), h_system, g_system, false)
    }

    pub fn new_degenerate(label: impl Into<String>, h_system: WeightSystem, g_system: WeightSystem) -> Result<Self> {
        Self::build(label.into(), h_system, g_system, true)
    }

    fn build(label: String, h_system: WeightSystem, g_system: WeightSystem, allow_degenerate: bool) -> Result<Self> {
        let dim = g_system.dim();
        if h_system.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: h_system.dim() });
        }
        if h_system.is_traceless() || g_system.is_traceless() {
            return Err(Error::Domain("pair systems must be restricted to subtorus coordinates".into()));
        }
        if !allow_degenerate {
            let rows: Vec<Vec<Q>> = g_system.weights().iter().map(|w| w.covector.clone()).collect();
            if rank(&rows, dim) < dim {
                return Err(Error::Domain(format!(
                    "g-weights of `{label}` do not span the dual space; mark the pair degenerate to accept 0/0 = 0 off the origin"
                )));
            }
        }
        Ok(Self { label, dim, h_system, g_system, allow_degenerate })
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = serde_json::json!({
            "label": self.label,
            "dim": self.dim,
            "h": self.h_system.to_json(),
            "g": self.g_system.to_json(),
        });
        if self.allow_degenerate {
            v["allow_degenerate"] = serde_json::Value::Bool(true);
        }
        v
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let label = v["label"].as_str().ok_or_else(|| Error::Parse("pair needs a `label` string".into()))?;
        let dim = v["dim"].as_u64().ok_or_else(|| Error::Parse("pair needs an integer `dim`".into()))? as usize;
        let h = WeightSystem::from_json(&v["h"])?;
        let g = WeightSystem::from_json(&v["g"])?;
        if g.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, got: g.dim() });
        }
        let degenerate = v.get("allow_degenerate").and_then(serde_json::Value::as_bool).unwrap_or(false);
        Self::build(label.to_string(), h, g, degenerate)
    }
}

/// Rank of a list of rational row vectors of length `dim`.
fn rank(rows: &[Vec<Q>], dim: usize) -> usize {
    let mut m: Vec<Vec<Q>> = rows.to_vec();
    let mut r = 0;
    for col in 0..dim {
        let Some(p) = (r..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][col].clone();
        for i in r + 1..m.len() {
            if m[i][col].is_zero() {
                continue;
            }
            let f = &m[i][col] / &pivot;
            for j in col..dim {
                let sub = &f * &m[r][j];
                m[i][j] -= sub;
            }
        }
        r += 1;
        if r == m.len() {
            break;
        }
    }
    r
}

/// Spanning vector of the kernel of `rows` when it is one-dimensional.
pub(crate) fn kernel_ray(rows: &[&Vec<BigInt>], dim: usize) -> Option<Vec<Q>> {
    let mut m: Vec<Vec<Q>> = rows.iter().map(|r| r.iter().map(|x| Q::from_integer(x.clone())).collect()).collect();
    let mut pivots = Vec::new();
    let mut r = 0;
    for col in 0..dim {
        let Some(p) = (r..m.len()).find(|&i| !m[i][col].is_zero()) else {
            continue;
        };
        m.swap(r, p);
        let pivot = m[r][col].clone();
        for j in col..dim {
            m[r][j] = &m[r][j] / &pivot;
        }
        for i in 0..m.len() {
            if i == r || m[i][col].is_zero() {
                continue;
            }
            let f = m[i][col].clone();
            for j in col..dim {
                let sub = &f * &m[r][j];
                m[i][j] -= sub;
            }
        }
        pivots.push(col);
        r += 1;
    }
    if r + 1 != dim {
        return None;
    }
    let free = (0..dim).find(|c| !pivots.contains(c))?;
    let mut v = vec![Q::zero(); dim];
    v[free] = Q::one();
    for (row, &pc) in pivots.iter().enumerate() {
        v[pc] = -m[row][free].clone();
    }
    Some(v)
}

/// Result of [`beta_exact`].
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BetaResult {
    pub beta: Q,
    pub witness: Vec<BigInt>,
    pub rays: usize,
    pub subsets: u64,
}

fn ratio(h: &RhoFunction, g: &RhoFunction, x: &[Q], allow_degenerate: bool) -> Result<Q> {
    let num = rho_eval(h, x)?;
    let den = rho_eval(g, x)?;
    if den.is_zero() {
        if num.is_zero() {
            return Ok(Q::zero());
        }
        let why = if allow_degenerate { "" } else { " (pair not marked degenerate)" };
        return Err(Error::IllPosed(format!("rho_g vanishes where rho_h does not{why}")));
    }
    Ok(num / den)
}

/// Exact `max rho_h / rho_g` over nonzero directions with the `0/0 = 0` convention.
pub fn beta_exact(pair: &PairSpec) -> Result<BetaResult> {
    let d = pair.dim;
    if pair.h_system.is_empty() || d == 0 {
        return Ok(BetaResult { beta: Q::zero(), witness: vec![BigInt::zero(); d], rays: 0, subsets: 0 });
    }
    if pair.g_system.is_empty() {
        return Err(Error::IllPosed("rho_g is identically zero while rho_h is not".into()));
    }
    let mut normals: Vec<Vec<BigInt>> = pair
        .h_system
        .weights()
        .iter()
        .chain(pair.g_system.weights())
        .map(|w| rational::primitive_direction(&w.covector))
        .collect();
    for i in 0..d {
        let mut e = vec![BigInt::zero(); d];
        e[i] = BigInt::one();
        normals.push(e);
    }
    normals.sort();
    normals.dedup();

    let subsets = binomial(normals.len() as u64, (d - 1) as u64);
    if subsets > MAX_SUBSETS {
        return Err(Error::TooLarge(format!("{subsets} hyperplane subsets exceed the cap of {MAX_SUBSETS}")));
    }
    let combos: Vec<Vec<usize>> = (0..normals.len()).combinations(d - 1).collect();
    let find_ray = |c: &Vec<usize>| -> Option<Vec<BigInt>> {
        let rows: Vec<&Vec<BigInt>> = c.iter().map(|&i| &normals[i]).collect();
        kernel_ray(&rows, d).map(|v| rational::primitive_direction(&v))
    };
    #[cfg(feature = "parallel")]
    let mut rays: Vec<Vec<BigInt>> = {
        use rayon::prelude::*;
        combos.par_iter().filter_map(find_ray).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let mut rays: Vec<Vec<BigInt>> = combos.iter().filter_map(find_ray).collect();
    rays.sort();
    rays.dedup();

    let h = RhoFunction::new(pair.h_system.clone());
    let g = RhoFunction::new(pair.g_system.clone());
    let candidates: Vec<Vec<BigInt>> = rays.iter().flat_map(|r| [r.clone(), r.iter().map(|x| -x).collect()]).collect();
    let eval = |r: &Vec<BigInt>| -> Result<(Q, Vec<BigInt>)> {
        let x: Vec<Q> = r.iter().map(|v| Q::from_integer(v.clone())).collect();
        Ok((ratio(&h, &g, &x, pair.allow_degenerate)?, r.clone()))
    };
    #[cfg(feature = "parallel")]
    let values: Vec<(Q, Vec<BigInt>)> = {
        use rayon::prelude::*;
        candidates.par_iter().map(eval).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let values: Vec<(Q, Vec<BigInt>)> = candidates.iter().map(eval).collect::<Result<_>>()?;

    let (beta, witness) = values
        .into_iter()
        .reduce(|best, cur| match cur.0.cmp(&best.0) {
            std::cmp::Ordering::Greater => cur,
            std::cmp::Ordering::Equal if cur.1 < best.1 => cur,
            _ => best,
        })
        .expect("at least one candidate ray");
    Ok(BetaResult { beta, witness, rays: rays.len(), subsets })
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Max of the ratio over sampled unit directions; a lower bound for `beta`.
///
/// One-dimensional pairs are evaluated exhaustively at `+-1`. Otherwise the best
/// sampled direction is re-evaluated exactly, so the result never exceeds `beta`.
pub fn beta_sample_oracle(pair: &PairSpec, samples: usize, seed: u64) -> Result<f64> {
    if samples == 0 {
        return Err(Error::Domain("at least one sample is needed".into()));
    }
    let d = pair.dim;
    if pair.h_system.is_empty() || d == 0 {
        return Ok(0.0);
    }
    let h = RhoFunction::new(pair.h_system.clone());
    let g = RhoFunction::new(pair.g_system.clone());
    if d == 1 {
        let best = [q(1), q(-1)]
            .iter()
            .map(|x| ratio(&h, &g, std::slice::from_ref(x), pair.allow_degenerate))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .max()
            .expect("two directions");
        return Ok(rational::to_f64(&best));
    }
    let dirs = sampling::chunked_map(samples, seed, |rng, _| {
        let v: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let hv = rho_eval_f64(&h, &v).expect("dimension checked");
        let gv = rho_eval_f64(&g, &v).expect("dimension checked");
        let r = if gv == 0.0 { 0.0 } else { hv / gv };
        (r, v)
    });
    let (_, best) = dirs
        .into_iter()
        .reduce(|a, b| if b.0 > a.0 { b } else { a })
        .expect("samples >= 1");
    let exact: Vec<Q> = best.iter().map(|x| rational::from_f64(*x)).collect::<Result<_>>()?;
    let value = ratio(&h, &g, &exact, true).unwrap_or_else(|_| Q::zero());
    Ok(rational::to_f64(&value))
}

/// Temperedness verdict; `BoundaryExact` is tempered by the closed inequality.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Tempered,
    NotTempered,
    BoundaryExact,
}

impl Verdict {
    pub fn is_tempered(self) -> bool {
        !matches!(self, Self::NotTempered)
    }
}

/// A computed exponent.
#[derive(Clone, Debug, PartialEq)]
pub enum Exponent {
    Exact(Q),
    Estimate { value: f64, error_bar: f64 },
}

/// Which identity ties the exponent to temperedness.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExponentKind {
    /// The growth exponent itself.
    Delta,
    /// `beta` for reductive `H`, where it equals `delta`.
    BetaReductive,
    /// `beta` for algebraic non-reductive `H`: equal to `delta` only through `max(., 1/2)`.
    BetaAlgebraic,
}

impl ExponentKind {
    pub fn identity_note(self) -> &'static str {
        match self {
            Self::Delta => "tempered iff delta <= 1/2; theta = delta = 1 - 1/p",
            Self::BetaReductive => "reductive H: theta = delta = beta; tempered iff delta <= 1/2",
            Self::BetaAlgebraic => {
                "algebraic H: max(theta, 1/2) = max(delta, 1/2) = max(beta, 1/2); the verdict holds, the value below 1/2 is not claimed"
            }
        }
    }
}

/// Clamps an estimate into `[0, 1]`, describing any adjustment.
pub fn clamp_estimate(value: f64) -> (f64, Option<String>) {
    if value < 0.0 {
        (0.0, Some(format!("estimate {value} clamped to 0")))
    } else if value > 1.0 {
        (1.0, Some(format!("estimate {value} clamped to 1")))
    } else {
        (value, None)
    }
}

/// Verdict from an exponent; an estimate whose error bar straddles 1/2 is indeterminate.
pub fn verdict_from_exponent(value: &Exponent, _kind: ExponentKind) -> Result<Verdict> {
    let half = Q::new(BigInt::from(1), BigInt::from(2));
    match value {
        Exponent::Exact(x) => {
            if x.is_negative() {
                return Err(Error::Domain("exponents are nonnegative".into()));
            }
            Ok(match x.cmp(&half) {
                std::cmp::Ordering::Less => Verdict::Tempered,
                std::cmp::Ordering::Equal => Verdict::BoundaryExact,
                std::cmp::Ordering::Greater => Verdict::NotTempered,
            })
        }
        Exponent::Estimate { value, error_bar } => {
            if !value.is_finite() || !error_bar.is_finite() || *error_bar < 0.0 {
                return Err(Error::NumericInput("estimate must be finite with a nonnegative error bar".into()));
            }
            let (v, _) = clamp_estimate(*value);
            if v + error_bar < 0.5 {
                Ok(Verdict::Tempered)
            } else if v - error_bar > 0.5 {
                Ok(Verdict::NotTempered)
            } else {
                Err(Error::Indeterminate(format!("estimate {v} +- {error_bar} straddles 1/2")))
            }
        }
    }
}

/// `p = 1/(1 - theta)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PValue {
    Finite(f64),
    Infinite,
}

impl PValue {
    pub fn to_json(self) -> serde_json::Value {
        match self {
            Self::Finite(p) => crate::report::num(p),
            Self::Infinite => serde_json::Value::String("inf".into()),
        }
    }

    pub fn value(self) -> f64 {
        match self {
            Self::Finite(p) => p,
            Self::Infinite => f64::INFINITY,
        }
    }
}

pub fn p_from_theta(theta: f64) -> Result<PValue> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain(format!("theta = {theta} outside [0, 1]")));
    }
    if theta == 1.0 {
        return Ok(PValue::Infinite);
    }
    Ok(PValue::Finite(1.0 / (1.0 - theta)))
}

/// Exact `p` for a rational `theta`; `None` encodes infinity.
pub fn p_from_theta_exact(theta: &Q) -> Result<Option<Q>> {
    if theta.is_negative() || *theta > Q::one() {
        return Err(Error::Domain(format!("theta = {} outside [0, 1]", rational::fmt_q(theta))));
    }
    if theta.is_one() {
        return Ok(None);
    }
    Ok(Some(Q::one() / (Q::one() - theta)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::q_frac;
    use crate::rootdata::Weight;
    use proptest::prelude::*;

    fn ws(dim: usize, ws: &[(&[i64], u32)]) -> WeightSystem {
        WeightSystem::new(
            dim,
            ws.iter().map(|(c, m)| Weight { covector: c.iter().map(|&x| q(x)).collect(), multiplicity: *m }).collect(),
            0,
        )
        .unwrap()
    }

    fn sl2_in(n: i64) -> PairSpec {
        // rho_h = 2|x|, rho_g = (n - 1) 2|x| from +-2 (mult 1) and +-1 (mult 2(n-2))
        let m = 2 * (n - 2) as u32;
        PairSpec::new(
            format!("sl2-in-sl{n}"),
            ws(1, &[(&[2], 1), (&[-2], 1)]),
            ws(1, &[(&[2], 1), (&[-2], 1), (&[1], m), (&[-1], m)]),
        )
        .unwrap()
    }

    #[test]
    fn sl2_examples() {
        let r = beta_exact(&sl2_in(3)).unwrap();
        assert_eq!(r.beta, q_frac(1, 2));
        assert_eq!(r.witness, vec![BigInt::from(-1)]);
        assert_eq!(beta_exact(&sl2_in(4)).unwrap().beta, q_frac(1, 3));
        assert_eq!(beta_sample_oracle(&sl2_in(3), 10, 1).unwrap(), 0.5);
    }

    #[test]
    fn trivial_pairs() {
        let g = ws(2, &[(&[1, 0], 1), (&[-1, 0], 1), (&[0, 1], 1), (&[0, -1], 1), (&[1, -1], 1), (&[-1, 1], 1)]);
        let empty = PairSpec::new("empty", WeightSystem::empty(2), g.clone()).unwrap();
        assert_eq!(beta_exact(&empty).unwrap().beta, q(0));
        assert_eq!(beta_sample_oracle(&empty, 100, 0).unwrap(), 0.0);
        let same = PairSpec::new("same", g.clone(), g).unwrap();
        assert_eq!(beta_exact(&same).unwrap().beta, q(1));
        for seed in 0..4 {
            assert_eq!(beta_sample_oracle(&same, 1000, seed).unwrap(), 1.0);
        }
    }

    #[test]
    fn ill_posed_and_degenerate_pairs() {
        let h = ws(1, &[(&[1], 1)]);
        assert!(PairSpec::new("bad", h.clone(), WeightSystem::empty(1)).is_err());
        let pair = PairSpec::new_degenerate("bad", h, WeightSystem::empty(1)).unwrap();
        assert!(matches!(beta_exact(&pair), Err(Error::IllPosed(_))));
        // rho_g = 2 abs(x1) vanishes on the second axis, as does rho_h = abs(x1) / 2
        let h = ws(2, &[(&[1, 0], 1)]);
        let g = ws(2, &[(&[1, 0], 3), (&[-1, 0], 1)]);
        assert!(PairSpec::new("flat", h.clone(), g.clone()).is_err());
        let pair = PairSpec::new_degenerate("flat", h, g).unwrap();
        assert_eq!(beta_exact(&pair).unwrap().beta, q_frac(1, 4));
    }

    #[test]
    fn witness_reproduces_beta() {
        let h = ws(2, &[(&[1, 2], 1), (&[-1, -2], 1), (&[1, -1], 1), (&[-1, 1], 1)]);
        let g = ws(2, &[(&[3, 1], 2), (&[-3, -1], 2), (&[0, 1], 3), (&[0, -1], 3), (&[1, 0], 1), (&[-1, 0], 1)]);
        let pair = PairSpec::new("mixed", h.clone(), g.clone()).unwrap();
        let r = beta_exact(&pair).unwrap();
        let x: Vec<Q> = r.witness.iter().map(|v| Q::from_integer(v.clone())).collect();
        let lhs = rho_eval(&RhoFunction::new(h), &x).unwrap() / rho_eval(&RhoFunction::new(g), &x).unwrap();
        assert_eq!(lhs, r.beta);
        let oracle = beta_sample_oracle(&pair, 100_000, 3).unwrap();
        assert!(oracle <= rational::to_f64(&r.beta));
        assert!(oracle >= rational::to_f64(&r.beta) - 0.02);
    }

    #[test]
    fn verdicts() {
        let k = ExponentKind::BetaReductive;
        assert_eq!(verdict_from_exponent(&Exponent::Exact(q_frac(1, 3)), k).unwrap(), Verdict::Tempered);
        assert_eq!(verdict_from_exponent(&Exponent::Exact(q(1)), k).unwrap(), Verdict::NotTempered);
        assert_eq!(verdict_from_exponent(&Exponent::Exact(q_frac(1, 2)), k).unwrap(), Verdict::BoundaryExact);
        assert!(Verdict::BoundaryExact.is_tempered());
        let est = |value, error_bar| Exponent::Estimate { value, error_bar };
        assert_eq!(verdict_from_exponent(&est(0.9, 0.1), ExponentKind::Delta).unwrap(), Verdict::NotTempered);
        assert_eq!(verdict_from_exponent(&est(1.2, 0.1), ExponentKind::Delta).unwrap(), Verdict::NotTempered);
        assert_eq!(verdict_from_exponent(&est(0.1, 0.1), ExponentKind::Delta).unwrap(), Verdict::Tempered);
        assert!(matches!(verdict_from_exponent(&est(0.45, 0.1), ExponentKind::Delta), Err(Error::Indeterminate(_))));
    }

    #[test]
    fn p_examples() {
        assert_eq!(p_from_theta(0.5).unwrap(), PValue::Finite(2.0));
        assert_eq!(p_from_theta(0.0).unwrap(), PValue::Finite(1.0));
        assert_eq!(p_from_theta(0.75).unwrap(), PValue::Finite(4.0));
        assert_eq!(p_from_theta(1.0).unwrap(), PValue::Infinite);
        assert!(p_from_theta(1.5).is_err());
        assert_eq!(p_from_theta_exact(&q_frac(3, 4)).unwrap(), Some(q(4)));
        assert_eq!(p_from_theta_exact(&q(1)).unwrap(), None);
    }

    #[test]
    fn size_cap() {
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(3, 5), 0);
        assert!(binomial(200, 8) > MAX_SUBSETS);
    }

    fn arb_pair() -> impl Strategy<Value = PairSpec> {
        (1usize..4)
            .prop_flat_map(|d| {
                let cov = proptest::collection::vec(-3i64..4, d);
                (
                    Just(d),
                    proptest::collection::vec((cov.clone(), 1u32..3), 1..4),
                    proptest::collection::vec((cov, 1u32..3), 0..4),
                )
            })
            .prop_filter_map("nonzero h", |(d, h, extra)| {
                let mk = |v: &Vec<(Vec<i64>, u32)>| -> Vec<Weight> {
                    v.iter()
                        .map(|(c, m)| Weight { covector: c.iter().map(|&x| q(x)).collect(), multiplicity: *m })
                        .collect()
                };
                let h = WeightSystem::new(d, mk(&h), 0).ok()?;
                if h.is_empty() {
                    return None;
                }
                // g contains h and the coordinate forms, so rho_h <= rho_g and g spans
                let mut gw = h.weights().to_vec();
                gw.extend(mk(&extra));
                for i in 0..d {
                    let mut e = vec![q(0); d];
                    e[i] = q(1);
                    gw.push(Weight { covector: e, multiplicity: 1 });
                }
                let g = WeightSystem::new(d, gw, 0).ok()?;
                PairSpec::new("random", h, g).ok()
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 48, rng_seed: proptest::test_runner::RngSeed::Fixed(8), ..ProptestConfig::default() })]

        #[test]
        fn beta_in_unit_interval_and_above_oracle(pair in arb_pair(), seed in 0u64..1000) {
            let r = beta_exact(&pair).unwrap();
            prop_assert!(r.beta >= q(0) && r.beta <= q(1));
            let b = rational::to_f64(&r.beta);
            let oracle = beta_sample_oracle(&pair, 20_000, seed).unwrap();
            prop_assert!(oracle <= b);
            prop_assert!(oracle >= b - 0.02);
        }

        #[test]
        fn scaling_invariance(pair in arb_pair(), num in 1i64..7, den in 1i64..7) {
            let s = q_frac(num, den);
            let scaled = PairSpec::new(
                "scaled",
                pair.h_system.scaled(&s).unwrap(),
                pair.g_system.scaled(&s).unwrap(),
            ).unwrap();
            prop_assert_eq!(beta_exact(&pair).unwrap().beta, beta_exact(&scaled).unwrap().beta);
        }

        #[test]
        fn witness_validity(pair in arb_pair()) {
            let r = beta_exact(&pair).unwrap();
            let x: Vec<Q> = r.witness.iter().map(|v| Q::from_integer(v.clone())).collect();
            let h = rho_eval(&RhoFunction::new(pair.h_system.clone()), &x).unwrap();
            let g = rho_eval(&RhoFunction::new(pair.g_system.clone()), &x).unwrap();
            prop_assert_eq!(h / g, r.beta);
        }
    }
}
