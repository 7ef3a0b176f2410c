//! Restricted root data of `sl(n, R)`, the form `rho`, the Weyl group action,
//! the KAK density, and restriction of weights to a subtorus.

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matgroup::CartanVector;
use crate::rational::{self, q, q_frac, Q};

/// A covector with a positive multiplicity.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Weight {
    pub covector: Vec<Q>,
    pub multiplicity: u32,
}

/// A finite multiset of nonzero covectors on `R^dim`, plus the dimension of the
/// joint kernel weight space.
///
/// When `traceless` is set the covectors live on the traceless subspace of
/// `R^dim` and are stored in their representative with coordinate sum zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WeightSystem {
    dim: usize,
    weights: Vec<Weight>,
    zero_multiplicity: u32,
    traceless: bool,
    inexact: bool,
}

impl WeightSystem {
    /// Merges equal covectors and moves zero covectors into the zero multiplicity.
    pub fn new(dim: usize, weights: Vec<Weight>, zero_multiplicity: u32) -> Result<Self> {
        Self::build(dim, weights, zero_multiplicity, false)
    }

    /// Like [`WeightSystem::new`] for covectors on the traceless subspace.
    pub fn new_traceless(dim: usize, weights: Vec<Weight>, zero_multiplicity: u32) -> Result<Self> {
        Self::build(dim, weights, zero_multiplicity, true)
    }

    pub fn empty(dim: usize) -> Self {
        Self { dim, weights: Vec::new(), zero_multiplicity: 0, traceless: false, inexact: false }
    }

    fn build(dim: usize, weights: Vec<Weight>, zero_multiplicity: u32, traceless: bool) -> Result<Self> {
        let mut merged: Vec<Weight> = Vec::new();
        let mut zero = zero_multiplicity;
        for mut w in weights {
            if w.covector.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: w.covector.len() });
            }
            if w.multiplicity == 0 {
                return Err(Error::Domain("weight multiplicity must be positive".into()));
            }
            if traceless && dim > 0 {
                let mean = w.covector.iter().fold(Q::zero(), |a, b| a + b) / q(dim as i64);
                for c in &mut w.covector {
                    *c -= &mean;
                }
            }
            if w.covector.iter().all(Zero::is_zero) {
                zero += w.multiplicity;
                continue;
            }
            match merged.iter_mut().find(|m| m.covector == w.covector) {
                Some(m) => m.multiplicity += w.multiplicity,
                None => merged.push(w),
            }
        }
        merged.sort_by(|a, b| a.covector.cmp(&b.covector));
        Ok(Self { dim, weights: merged, zero_multiplicity: zero, traceless, inexact: false })
    }

    pub(crate) fn with_inexact(mut self, inexact: bool) -> Self {
        self.inexact = inexact;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[Weight] {
        &self.weights
    }

    pub fn zero_multiplicity(&self) -> u32 {
        self.zero_multiplicity
    }

    pub fn is_traceless(&self) -> bool {
        self.traceless
    }

    /// Set when some covector came from floating-point data that did not round
    /// to a small-denominator rational.
    pub fn is_inexact(&self) -> bool {
        self.inexact
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    /// Total multiplicity including the zero weight space.
    pub fn total_multiplicity(&self) -> u32 {
        self.weights.iter().map(|w| w.multiplicity).sum::<u32>() + self.zero_multiplicity
    }

    /// Every covector multiplied by `s`.
    pub fn scaled(&self, s: &Q) -> Result<Self> {
        if s.is_zero() {
            return Err(Error::Domain("scale factor must be nonzero".into()));
        }
        let weights = self
            .weights
            .iter()
            .map(|w| Weight { covector: w.covector.iter().map(|c| c * s).collect(), multiplicity: w.multiplicity })
            .collect();
        Ok(Self::build(self.dim, weights, self.zero_multiplicity, self.traceless)?.with_inexact(self.inexact))
    }

    pub fn is_symmetric(&self) -> bool {
        self.weights.iter().all(|w| {
            let neg: Vec<Q> = w.covector.iter().map(|c| -c).collect();
            self.weights.iter().any(|v| v.covector == neg && v.multiplicity == w.multiplicity)
        })
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(WeightSystemJson::from(self)).expect("weight systems serialize")
    }

    pub fn from_json(v: &serde_json::Value) -> Result<Self> {
        let raw: WeightSystemJson = serde_json::from_value(v.clone())?;
        raw.try_into()
    }
}

#[derive(Serialize, Deserialize)]
struct WeightJson {
    w: Vec<String>,
    m: u32,
}

#[derive(Serialize, Deserialize)]
struct WeightSystemJson {
    dim: usize,
    zero_mult: u32,
    weights: Vec<WeightJson>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    traceless: bool,
}

impl From<&WeightSystem> for WeightSystemJson {
    fn from(ws: &WeightSystem) -> Self {
        Self {
            dim: ws.dim,
            zero_mult: ws.zero_multiplicity,
            weights: ws
                .weights
                .iter()
                .map(|w| WeightJson { w: w.covector.iter().map(rational::fmt_q).collect(), m: w.multiplicity })
                .collect(),
            traceless: ws.traceless,
        }
    }
}

impl TryFrom<WeightSystemJson> for WeightSystem {
    type Error = Error;

    fn try_from(raw: WeightSystemJson) -> Result<Self> {
        let weights = raw
            .weights
            .into_iter()
            .map(|w| {
                Ok(Weight {
                    covector: w.w.iter().map(|s| rational::parse_q(s)).collect::<Result<_>>()?,
                    multiplicity: w.m,
                })
            })
            .collect::<Result<_>>()?;
        WeightSystem::build(raw.dim, weights, raw.zero_mult, raw.traceless)
    }
}

fn check_rank(n: usize) -> Result<()> {
    if n < 2 {
        return Err(Error::Domain(format!("rank n = {n} must be at least 2")));
    }
    Ok(())
}

fn root(n: usize, i: usize, j: usize) -> Vec<Q> {
    let mut v = vec![Q::zero(); n];
    v[i] = q(1);
    v[j] = q(-1);
    v
}

/// `{e_i - e_j : i != j}` on the traceless diagonal matrices of size `n`.
pub fn restricted_roots(n: usize) -> Result<WeightSystem> {
    check_rank(n)?;
    let mut weights = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                weights.push(Weight { covector: root(n, i, j), multiplicity: 1 });
            }
        }
    }
    WeightSystem::new_traceless(n, weights, (n - 1) as u32)
}

/// `rho = (1/2) sum_{i<j} (e_i - e_j)`, i.e. coordinates `(n + 1 - 2i) / 2`.
pub fn rho_form(n: usize) -> Result<Vec<Q>> {
    check_rank(n)?;
    Ok((1..=n).map(|i| q_frac(n as i64 + 1 - 2 * i as i64, 2)).collect())
}

/// `rho(x)` in floating point for an `n`-vector `x`.
pub fn rho_eval_f64(x: &[f64]) -> f64 {
    let n = x.len() as f64;
    x.iter().enumerate().map(|(i, v)| (n + 1.0 - 2.0 * (i as f64 + 1.0)) / 2.0 * v).sum()
}

/// Sorts coordinates into decreasing order.
pub fn dominant_representative(x: &CartanVector) -> CartanVector {
    let mut c = x.coords().to_vec();
    c.sort_by(|a, b| b.total_cmp(a));
    CartanVector::traceless(c)
}

/// `prod_{i<j} sinh(x_i - x_j)` for dominant `x`.
pub fn kak_density(x: &CartanVector, n: usize) -> Result<f64> {
    if x.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.dim() });
    }
    if !x.is_dominant() {
        return Err(Error::Domain("KAK density needs a dominant Cartan vector".into()));
    }
    let c = x.coords();
    let mut w = 1.0;
    for i in 0..n {
        for j in i + 1..n {
            w *= (c[i] - c[j]).sinh();
        }
    }
    Ok(w)
}

/// `log kak_density(x)`, stable for large arguments; `-inf` on walls.
pub fn log_kak_density(x: &[f64], multiplicity: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            acc += multiplicity * log_sinh(x[i] - x[j]);
        }
    }
    acc
}

/// `log sinh(s)` for `s >= 0`.
pub fn log_sinh(s: f64) -> f64 {
    if s <= 0.0 {
        f64::NEG_INFINITY
    } else if s > 20.0 {
        s - std::f64::consts::LN_2 + (-2.0 * s).exp().ln_1p()
    } else {
        s.sinh().ln()
    }
}

/// Pulls every covector back along `embedding`, whose `ws.dim()` rows are indexed
/// by ambient coordinates and whose columns parameterize the subtorus.
pub fn restrict_weights(ws: &WeightSystem, embedding: &[Vec<Q>]) -> Result<WeightSystem> {
    if embedding.len() != ws.dim {
        return Err(Error::DimensionMismatch { expected: ws.dim, got: embedding.len() });
    }
    let d = embedding.first().map_or(0, Vec::len);
    if embedding.iter().any(|row| row.len() != d) {
        return Err(Error::Domain("ragged embedding matrix".into()));
    }
    let weights = ws
        .weights
        .iter()
        .map(|w| Weight {
            covector: (0..d)
                .map(|c| w.covector.iter().zip(embedding).map(|(l, row)| l * &row[c]).fold(Q::zero(), |a, b| a + b))
                .collect(),
            multiplicity: w.multiplicity,
        })
        .collect();
    Ok(WeightSystem::new(d, weights, ws.zero_multiplicity)?.with_inexact(ws.inexact))
}

/// Embedding of the simple-coroot coordinates of an `sl(k)` block at offset `p`:
/// column `i` is `e_{p+i} - e_{p+i+1}`.
pub fn block_coroot_embedding(n: usize, blocks: &[(usize, usize)]) -> Vec<Vec<Q>> {
    let cols: Vec<(usize, usize)> = blocks.iter().flat_map(|&(k, p)| (p..p + k - 1).map(|i| (i, i + 1))).collect();
    (0..n)
        .map(|r| {
            cols.iter()
                .map(|&(a, b)| {
                    if r == a {
                        q(1)
                    } else if r == b {
                        q(-1)
                    } else {
                        Q::zero()
                    }
                })
                .collect()
        })
        .collect()
}

/// Positive part of a covector system relative to a chamber point.
pub fn positive_weights<'a>(ws: &'a WeightSystem, chamber_point: &[Q]) -> impl Iterator<Item = &'a Weight> + 'a {
    let point = chamber_point.to_vec();
    ws.weights.iter().filter(move |w| rational::dot(&w.covector, &point).is_positive())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn int_vec(v: &[i64]) -> Vec<Q> {
        v.iter().map(|&x| q(x)).collect()
    }

    fn sl3_top_left() -> WeightSystem {
        let emb = vec![int_vec(&[1]), int_vec(&[-1]), int_vec(&[0])];
        restrict_weights(&restricted_roots(3).unwrap(), &emb).unwrap()
    }

    #[test]
    fn root_counts() {
        let r2 = restricted_roots(2).unwrap();
        let covs: Vec<Vec<Q>> = r2.weights().iter().map(|w| w.covector.clone()).collect();
        assert_eq!(covs, vec![int_vec(&[-1, 1]), int_vec(&[1, -1])]);
        let r3 = restricted_roots(3).unwrap();
        assert_eq!(r3.weights().len(), 6);
        assert_eq!(r3.zero_multiplicity(), 2);
        assert_eq!(restricted_roots(4).unwrap().weights().len(), 12);
        assert!(restricted_roots(1).is_err());
        // pulled back to x -> diag(x, -x) the sl(2) roots are +-2x
        let emb = vec![int_vec(&[1]), int_vec(&[-1])];
        let r = restrict_weights(&r2, &emb).unwrap();
        let covs: Vec<Vec<Q>> = r.weights().iter().map(|w| w.covector.clone()).collect();
        assert_eq!(covs, vec![int_vec(&[-2]), int_vec(&[2])]);
    }

    #[test]
    fn rho_examples() {
        assert_eq!(rho_form(2).unwrap(), vec![q_frac(1, 2), q_frac(-1, 2)]);
        // n = 3: half-sum of e1-e2, e1-e3, e2-e3 is e1 - e3
        assert_eq!(rho_form(3).unwrap(), int_vec(&[1, 0, -1]));
        let g = crate::matgroup::GroupElement::from_rows(&[vec![2.0, 3.0], vec![1.0, 2.0]]).unwrap();
        let kappa = crate::matgroup::cartan_projection(&g).unwrap();
        let op_norm = g.matrix().svd(false, false).singular_values.max();
        assert!((2.0 * rho_eval_f64(kappa.coords()) - 2.0 * op_norm.ln()).abs() < 1e-12);
    }

    #[test]
    fn dominant_examples() {
        let z = CartanVector::zero(3);
        assert_eq!(dominant_representative(&z), z);
        let x = CartanVector::new(vec![-1.0, 2.0, -1.0]).unwrap();
        assert_eq!(dominant_representative(&x).coords(), &[2.0, -1.0, -1.0]);
    }

    #[test]
    fn dominant_maximizes_rho_over_permutations() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let x = CartanVector::traceless((0..3).map(|_| rng.gen_range(-3.0..3.0)).collect());
            let d = dominant_representative(&x);
            let c = x.coords();
            let perms = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
            let best = perms
                .iter()
                .map(|p| rho_eval_f64(&[c[p[0]], c[p[1]], c[p[2]]]))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!((rho_eval_f64(d.coords()) - best).abs() < 1e-12);
            assert!(rho_eval_f64(d.coords()) >= rho_eval_f64(c) - 1e-12);
        }
    }

    #[test]
    fn kak_density_examples() {
        assert_eq!(kak_density(&CartanVector::zero(2), 2).unwrap(), 0.0);
        let x = CartanVector::new(vec![0.7, -0.7]).unwrap();
        assert!((kak_density(&x, 2).unwrap() - 1.4f64.sinh()).abs() < 1e-15);
        assert!(kak_density(&CartanVector::new(vec![-0.7, 0.7]).unwrap(), 2).is_err());
        let x = [1.0, 0.2, -1.2];
        for t in [20.0, 40.0] {
            let tx: Vec<f64> = x.iter().map(|v| v * t).collect();
            let rate = log_kak_density(&tx, 1.0) / t;
            let target = 2.0 * rho_eval_f64(&x);
            // sinh(s) = e^s (1 - e^{-2s}) / 2 gives an O(1/t) offset of 3 log 2 / t
            let corrected = rate + 3.0 * std::f64::consts::LN_2 / t;
            assert!(((corrected - target) / target).abs() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn restriction_examples() {
        let r3 = restricted_roots(3).unwrap();
        let id: Vec<Vec<Q>> = (0..3).map(|i| (0..3).map(|j| if i == j { q(1) } else { q(0) }).collect()).collect();
        let same = restrict_weights(&r3, &id).unwrap();
        assert_eq!(same.weights(), r3.weights());
        let r = sl3_top_left();
        let got: Vec<(Vec<Q>, u32)> = r.weights().iter().map(|w| (w.covector.clone(), w.multiplicity)).collect();
        assert_eq!(
            got,
            vec![(int_vec(&[-2]), 1), (int_vec(&[-1]), 2), (int_vec(&[1]), 2), (int_vec(&[2]), 1)]
        );
        assert_eq!(r.zero_multiplicity(), 2);
        let zero = vec![int_vec(&[0]); 3];
        let z = restrict_weights(&r3, &zero).unwrap();
        assert!(z.is_empty());
        assert_eq!(z.zero_multiplicity(), 8);
        assert!(restrict_weights(&r3, &zero[..2]).is_err());
    }

    #[test]
    fn json_round_trip() {
        let r = sl3_top_left();
        let v = r.to_json();
        assert_eq!(WeightSystem::from_json(&v).unwrap(), r);
        let r3 = restricted_roots(3).unwrap();
        assert_eq!(WeightSystem::from_json(&r3.to_json()).unwrap(), r3);
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 64, rng_seed: proptest::test_runner::RngSeed::Fixed(5), ..ProptestConfig::default() })]

        #[test]
        fn roots_are_symmetric(n in 2usize..7) {
            prop_assert!(restricted_roots(n).unwrap().is_symmetric());
        }

        #[test]
        fn rho_is_half_sum_of_positive_roots(n in 2usize..7) {
            let roots = restricted_roots(n).unwrap();
            let chamber: Vec<Q> = (0..n).map(|i| q((n - i) as i64)).collect();
            let mut sum = vec![Q::zero(); n];
            for w in positive_weights(&roots, &chamber) {
                for (s, c) in sum.iter_mut().zip(&w.covector) {
                    *s += c * q(w.multiplicity as i64);
                }
            }
            let half: Vec<Q> = sum.into_iter().map(|s| s / q(2)).collect();
            prop_assert_eq!(half, rho_form(n).unwrap());
        }

        #[test]
        fn restriction_preserves_total_multiplicity(
            n in 2usize..5,
            d in 0usize..3,
            entries in proptest::collection::vec(-3i64..4, 16),
        ) {
            let roots = restricted_roots(n).unwrap();
            let emb: Vec<Vec<Q>> = (0..n).map(|r| (0..d).map(|c| q(entries[(r * 3 + c) % 16])).collect()).collect();
            let restricted = restrict_weights(&roots, &emb).unwrap();
            prop_assert_eq!(restricted.total_multiplicity(), roots.total_multiplicity());
        }
    }
}
