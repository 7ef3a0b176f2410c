//! The volume growth exponent `delta`: word-ball enumeration and Poincare-series
//! abscissa for discrete subgroups, cone growth indicators, and a radial
//! quadrature for reductive subgroups.

use std::collections::HashMap;
use std::hash::{Hash, Hasher};

use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::beta::PairSpec;
use crate::error::{Error, Result};
use crate::matgroup::{cartan_projection, CartanVector, GroupElement, SubgroupSpec};
use crate::rational::{self, Q};
use crate::rhofun::dot_f64;
use crate::rootdata::{log_sinh, rho_eval_f64};
use crate::sampling;

/// Default cap on enumerated elements.
pub const DEFAULT_CAP: usize = 5_000_000;
/// Width of the radius shells in `s = 2 rho kappa`.
pub const SHELL_WIDTH: f64 = 0.5;
/// Fraction of the smallest shells left out of the fit.
pub const DROP_LOW: f64 = 0.3;
/// Fraction of the largest shells left out of the fit.
pub const DROP_HIGH: f64 = 0.1;

const FLOAT_GRID: f64 = 1e-9;
const AUDIT_TOL: f64 = 1e-7;

trait Repr: Clone + Send + Sync + Sized {
    fn mul(&self, rhs: &Self, n: usize) -> Option<Self>;
    fn key(&self) -> u64;
    /// Equality check after a key match; floats audit the entries.
    fn same(&self, other: &Self) -> bool;
    fn floats(&self) -> Vec<f64>;
}

#[derive(Clone)]
struct IntRepr(Vec<i64>);

impl Repr for IntRepr {
    fn mul(&self, rhs: &Self, n: usize) -> Option<Self> {
        let mut out = vec![0i64; n * n];
        for i in 0..n {
            for j in 0..n {
                let mut acc: i64 = 0;
                for k in 0..n {
                    acc = acc.checked_add(self.0[i * n + k].checked_mul(rhs.0[k * n + j])?)?;
                }
                out[i * n + j] = acc;
            }
        }
        Some(Self(out))
    }

    fn key(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.0.hash(&mut h);
        h.finish()
    }

    fn same(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn floats(&self) -> Vec<f64> {
        self.0.iter().map(|&x| x as f64).collect()
    }
}

#[derive(Clone)]
struct ExactRepr(Vec<Q>);

impl Repr for ExactRepr {
    fn mul(&self, rhs: &Self, n: usize) -> Option<Self> {
        let mut out = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                let mut acc = Q::zero();
                for k in 0..n {
                    let (a, b) = (&self.0[i * n + k], &rhs.0[k * n + j]);
                    if !a.is_zero() && !b.is_zero() {
                        acc += a * b;
                    }
                }
                out.push(acc);
            }
        }
        Some(Self(out))
    }

    fn key(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        self.0.hash(&mut h);
        h.finish()
    }

    fn same(&self, other: &Self) -> bool {
        self.0 == other.0
    }

    fn floats(&self) -> Vec<f64> {
        self.0.iter().map(rational::to_f64).collect()
    }
}

#[derive(Clone)]
struct FloatRepr(Vec<f64>);

impl Repr for FloatRepr {
    fn mul(&self, rhs: &Self, n: usize) -> Option<Self> {
        let mut out = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                out[i * n + j] = (0..n).map(|k| self.0[i * n + k] * rhs.0[k * n + j]).sum();
            }
        }
        out.iter().all(|x| x.is_finite()).then_some(Self(out))
    }

    fn key(&self) -> u64 {
        let mut h = std::collections::hash_map::DefaultHasher::new();
        for &x in &self.0 {
            let scaled = (x / FLOAT_GRID).round();
            if scaled.abs() < 1e30 {
                (scaled as i128).hash(&mut h);
            } else {
                x.to_bits().hash(&mut h);
            }
        }
        h.finish()
    }

    fn same(&self, other: &Self) -> bool {
        self.0.iter().zip(&other.0).all(|(a, b)| (a - b).abs() <= AUDIT_TOL * a.abs().max(1.0))
    }

    fn floats(&self) -> Vec<f64> {
        self.0.clone()
    }
}

#[derive(Clone, Debug)]
enum Store {
    Int(Vec<i64>),
    Exact(Vec<Q>),
    Float(Vec<f64>),
}

/// A breadth-first word ball of a finitely generated subgroup.
///
/// Elements are stored in order of increasing word length, so the ball of any
/// smaller depth is a prefix.
#[derive(Clone, Debug)]
pub struct OrbitBall {
    n: usize,
    depth: usize,
    fingerprint: String,
    word_lengths: Vec<u32>,
    s_values: Vec<f64>,
    kappas: Vec<f64>,
    store: Store,
    /// The closure terminated before `depth`: the ball is the whole (finite) group.
    pub closed: bool,
    /// The element cap was hit; the ball is partial.
    pub truncated: bool,
    /// Float key matches whose entries disagreed beyond the audit tolerance.
    pub audit_failures: usize,
}

impl OrbitBall {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn len(&self) -> usize {
        self.word_lengths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.word_lengths.is_empty()
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    pub fn is_exact(&self) -> bool {
        !matches!(self.store, Store::Float(_))
    }

    pub fn word_length(&self, i: usize) -> u32 {
        self.word_lengths[i]
    }

    /// `s(gamma) = 2 rho kappa(gamma)`.
    pub fn s_value(&self, i: usize) -> f64 {
        self.s_values[i]
    }

    pub fn s_values(&self) -> &[f64] {
        &self.s_values
    }

    pub fn kappa(&self, i: usize) -> &[f64] {
        &self.kappas[i * self.n..(i + 1) * self.n]
    }

    pub fn element(&self, i: usize) -> GroupElement {
        let nn = self.n * self.n;
        let rows = |flat: Vec<f64>| -> Vec<Vec<f64>> { flat.chunks(self.n).map(<[f64]>::to_vec).collect() };
        match &self.store {
            Store::Int(v) => {
                let rows: Vec<Vec<Q>> =
                    v[i * nn..(i + 1) * nn].chunks(self.n).map(|r| r.iter().map(|&x| rational::q(x)).collect()).collect();
                GroupElement::from_rows_exact(rows).expect("enumerated elements have determinant one")
            }
            Store::Exact(v) => {
                let rows: Vec<Vec<Q>> = v[i * nn..(i + 1) * nn].chunks(self.n).map(<[Q]>::to_vec).collect();
                GroupElement::from_rows_exact(rows).expect("enumerated elements have determinant one")
            }
            Store::Float(v) => GroupElement::from_matrix_with_tol(
                nalgebra::DMatrix::from_fn(self.n, self.n, |r, c| rows(v[i * nn..(i + 1) * nn].to_vec())[r][c]),
                1e-6,
            )
            .unwrap_or_else(|_| GroupElement::identity(self.n)),
        }
    }

    /// Number of elements of word length at most `depth`.
    pub fn count_within(&self, depth: usize) -> usize {
        self.word_lengths.partition_point(|&w| (w as usize) <= depth)
    }
}

fn fingerprint(gens: &[GroupElement]) -> String {
    // FNV-1a over the printed entries
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for g in gens {
        let text = match g.exact_entries() {
            Some(e) => e.iter().map(rational::fmt_q).collect::<Vec<_>>().join(","),
            None => g.matrix().iter().map(|x| format!("{x:e}")).collect::<Vec<_>>().join(","),
        };
        for b in text.bytes().chain(std::iter::once(b';')) {
            h ^= b as u64;
            h = h.wrapping_mul(0x0100_0000_01b3);
        }
    }
    format!("{h:016x}")
}

struct RawBall<R> {
    elems: Vec<R>,
    words: Vec<u32>,
    closed: bool,
    truncated: bool,
    audit_failures: usize,
}

fn bfs<R: Repr>(identity: R, gens: &[R], n: usize, depth: usize, cap: usize) -> Option<RawBall<R>> {
    let mut elems = vec![identity];
    let mut words = vec![0u32];
    let mut index: HashMap<u64, Vec<u32>> = HashMap::new();
    index.insert(elems[0].key(), vec![0]);
    let mut frontier: Vec<usize> = vec![0];
    let mut closed = false;
    let mut truncated = false;
    let mut audit_failures = 0;
    for level in 1..=depth {
        let expand = |&i: &usize| -> Vec<Option<R>> { gens.iter().map(|g| elems[i].mul(g, n)).collect() };
        #[cfg(feature = "parallel")]
        let products: Vec<Option<R>> = {
            use rayon::prelude::*;
            frontier.par_iter().flat_map_iter(expand).collect()
        };
        #[cfg(not(feature = "parallel"))]
        let products: Vec<Option<R>> = frontier.iter().flat_map(expand).collect();
        let mut next = Vec::new();
        for p in products {
            let p = p?;
            let key = p.key();
            let slot = index.entry(key).or_default();
            let mut seen = false;
            for &j in slot.iter() {
                if elems[j as usize].same(&p) {
                    seen = true;
                    break;
                }
                audit_failures += 1;
            }
            if seen {
                continue;
            }
            slot.push(elems.len() as u32);
            next.push(elems.len());
            elems.push(p);
            words.push(level as u32);
            if elems.len() >= cap {
                truncated = true;
                break;
            }
        }
        if truncated {
            break;
        }
        if next.is_empty() {
            closed = true;
            break;
        }
        frontier = next;
    }
    Some(RawBall { elems, words, closed, truncated, audit_failures })
}

fn symmetric_generators(gens: &[GroupElement]) -> Vec<GroupElement> {
    let mut out: Vec<GroupElement> = Vec::new();
    for g in gens.iter().flat_map(|g| [g.clone(), g.inverse()]) {
        let dup = out.iter().any(|h| match (g.exact_entries(), h.exact_entries()) {
            (Some(a), Some(b)) => a == b,
            _ => g.max_abs_diff(h) <= AUDIT_TOL,
        });
        if !dup {
            out.push(g);
        }
    }
    out
}

/// Breadth-first ball of words of length at most `depth` in the generators and their inverses.
pub fn enumerate_ball(gens: &SubgroupSpec, depth: usize) -> Result<OrbitBall> {
    enumerate_ball_with_cap(gens, depth, DEFAULT_CAP)
}

pub fn enumerate_ball_with_cap(gens: &SubgroupSpec, depth: usize, cap: usize) -> Result<OrbitBall> {
    let SubgroupSpec::DiscreteGenerators { gens, exact } = gens else {
        return Err(Error::Unsupported("orbit enumeration needs discrete generators".into()));
    };
    let n = gens[0].n();
    let fp = fingerprint(gens);
    let sym = symmetric_generators(gens);
    let nn = n * n;
    let id_floats: Vec<f64> = (0..nn).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();

    let integer = *exact
        && sym.iter().all(|g| g.exact_entries().is_some_and(|e| e.iter().all(|x| x.is_integer() && x.numer().bits() < 62)));
    let mut raw_store = None;
    if integer {
        let to_int = |g: &GroupElement| {
            IntRepr(g.exact_entries().expect("exact").iter().map(|x| x.to_integer().try_into().expect("small")).collect())
        };
        let id = IntRepr(id_floats.iter().map(|&x| x as i64).collect());
        let int_gens: Vec<IntRepr> = sym.iter().map(to_int).collect();
        if let Some(raw) = bfs(id, &int_gens, n, depth, cap) {
            let floats = raw.elems.iter().flat_map(Repr::floats).collect::<Vec<_>>();
            let store = Store::Int(raw.elems.into_iter().flat_map(|e| e.0).collect());
            raw_store = Some((store, floats, raw.words, raw.closed, raw.truncated, raw.audit_failures));
        }
    }
    if raw_store.is_none() && *exact {
        let id = ExactRepr(id_floats.iter().map(|&x| if x == 1.0 { Q::one() } else { Q::zero() }).collect());
        let q_gens: Vec<ExactRepr> = sym.iter().map(|g| ExactRepr(g.exact_entries().expect("exact").to_vec())).collect();
        let raw = bfs(id, &q_gens, n, depth, cap).expect("exact products never overflow");
        let floats = raw.elems.iter().flat_map(Repr::floats).collect::<Vec<_>>();
        let store = Store::Exact(raw.elems.into_iter().flat_map(|e| e.0).collect());
        raw_store = Some((store, floats, raw.words, raw.closed, raw.truncated, raw.audit_failures));
    }
    let (store, floats, words, closed, truncated, audit_failures) = match raw_store {
        Some(r) => r,
        None => {
            let f_gens: Vec<FloatRepr> = sym.iter().map(|g| FloatRepr(g.matrix().transpose().as_slice().to_vec())).collect();
            let raw = bfs(FloatRepr(id_floats), &f_gens, n, depth, cap)
                .ok_or_else(|| Error::NumericInput("floating-point overflow during enumeration".into()))?;
            let floats = raw.elems.iter().flat_map(Repr::floats).collect::<Vec<_>>();
            let store = Store::Float(floats.clone());
            (store, floats, raw.words, raw.closed, raw.truncated, raw.audit_failures)
        }
    };

    let count = words.len();
    let kappa_of = |i: usize| -> Result<Vec<f64>> {
        let m = nalgebra::DMatrix::from_row_slice(n, n, &floats[i * nn..(i + 1) * nn]);
        let g = GroupElement::from_matrix_unchecked(m);
        Ok(cartan_projection(&g)?.coords().to_vec())
    };
    #[cfg(feature = "parallel")]
    let kappas: Vec<Vec<f64>> = {
        use rayon::prelude::*;
        (0..count).into_par_iter().map(kappa_of).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let kappas: Vec<Vec<f64>> = (0..count).map(kappa_of).collect::<Result<_>>()?;
    let s_values = kappas.iter().map(|k| (2.0 * rho_eval_f64(k)).max(0.0)).collect();
    Ok(OrbitBall {
        n,
        depth,
        fingerprint: fp,
        word_lengths: words,
        s_values,
        kappas: kappas.into_iter().flatten().collect(),
        store,
        closed,
        truncated,
        audit_failures,
    })
}

/// `sum_{gamma in ball} exp(-t s(gamma))`.
pub fn poincare_partial(ball: &OrbitBall, t: f64) -> f64 {
    poincare_partial_within(ball, t, ball.depth)
}

/// Partial sum over the elements of word length at most `depth`.
pub fn poincare_partial_within(ball: &OrbitBall, t: f64, depth: usize) -> f64 {
    let k = ball.count_within(depth);
    // ascending order keeps the sum accurate when many terms are tiny
    let mut terms: Vec<f64> = ball.s_values[..k].iter().map(|s| (-t * s).exp()).collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimateStatus {
    /// Fitted from data.
    Estimated,
    /// Known exactly (e.g. a finite group).
    Exact,
    /// Too little data for a fit.
    Indeterminate,
}

/// Cumulative count `N(R)` at the outer edge `R` of a shell.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Shell {
    #[serde(rename = "R")]
    pub r: f64,
    #[serde(rename = "N")]
    pub n: u64,
}

/// An abscissa of convergence with a bracket and diagnostics.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AbscissaEstimate {
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    /// Three standard errors of the fitted slope, or the bracket half-width.
    pub error_bar: f64,
    pub status: EstimateStatus,
    pub depth_schedule: Vec<usize>,
    pub shells: Vec<Shell>,
    /// Largest radius at which the enumeration was judged complete.
    pub reliable_radius: f64,
    pub method: String,
    pub notes: Vec<String>,
}

impl AbscissaEstimate {
    pub fn to_json(&self) -> serde_json::Value {
        use crate::report::num;
        serde_json::json!({
            "value": num(self.value),
            "lower": num(self.lower),
            "upper": num(self.upper),
            "error_bar": num(self.error_bar),
            "status": self.status,
            "depth_schedule": self.depth_schedule,
            "shells": self.shells.iter().map(|s| serde_json::json!({"R": num(s.r), "N": s.n})).collect::<Vec<_>>(),
            "reliable_radius": num(self.reliable_radius),
            "method": self.method,
            "notes": self.notes,
        })
    }

    fn exact_zero(method: &str, note: &str) -> Self {
        Self {
            value: 0.0,
            lower: 0.0,
            upper: 0.0,
            error_bar: 0.0,
            status: EstimateStatus::Exact,
            depth_schedule: Vec::new(),
            shells: Vec::new(),
            reliable_radius: f64::INFINITY,
            method: method.into(),
            notes: vec![note.into()],
        }
    }

    fn indeterminate(method: &str, note: String) -> Self {
        Self {
            value: f64::NAN,
            lower: 0.0,
            upper: f64::INFINITY,
            error_bar: f64::INFINITY,
            status: EstimateStatus::Indeterminate,
            depth_schedule: Vec::new(),
            shells: Vec::new(),
            reliable_radius: 0.0,
            method: method.into(),
            notes: vec![note],
        }
    }
}

/// Least-squares line `y = a + b x`; returns `(b, a, stderr_b)`.
pub(crate) fn fit_line(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let resid: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let se = if xs.len() > 2 { (resid / (n - 2.0) / sxx).sqrt() } else { f64::INFINITY };
    (b, a, se)
}

/// Cumulative counts `#{i : values[i] <= R}` at `R = width, 2 width, ...` up to `r_max`.
fn cumulative_shells(values: &[f64], width: f64, r_max: f64) -> Vec<Shell> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let shells = (r_max / width).floor() as usize;
    (1..=shells)
        .map(|j| {
            let r = j as f64 * width;
            Shell { r, n: sorted.partition_point(|&s| s <= r) as u64 }
        })
        .collect()
}

/// Largest shell radius up to which the ball at depth `inner` already holds
/// all but `tol` of the elements the ball at depth `outer` has.
fn reliable_radius(ball: &OrbitBall, inner: usize, outer: usize, tol: f64) -> f64 {
    let a = ball.count_within(inner);
    let b = ball.count_within(outer);
    let r_max = ball.s_values[..b].iter().cloned().fold(0.0, f64::max);
    let inner_shells = cumulative_shells(&ball.s_values[..a], SHELL_WIDTH, r_max);
    let outer_shells = cumulative_shells(&ball.s_values[..b], SHELL_WIDTH, r_max);
    let mut radius = 0.0;
    for (i, o) in inner_shells.iter().zip(&outer_shells) {
        if (i.n as f64) < (1.0 - tol) * o.n as f64 {
            break;
        }
        radius = o.r;
    }
    radius
}

/// Fits the exponential growth rate of cumulative counts over the trimmed window.
fn fit_window(shells: &[Shell]) -> Option<(f64, f64, usize)> {
    let usable: Vec<&Shell> = shells.iter().filter(|s| s.n > 0).collect();
    let k = usable.len();
    let lo = (DROP_LOW * k as f64).floor() as usize;
    let hi = k - (DROP_HIGH * k as f64).floor() as usize;
    if hi < lo + 4 {
        return None;
    }
    let xs: Vec<f64> = usable[lo..hi].iter().map(|s| s.r).collect();
    let ys: Vec<f64> = usable[lo..hi].iter().map(|s| (s.n as f64).ln()).collect();
    let (slope, _, se) = fit_line(&xs, &ys);
    Some((slope, se, hi - lo))
}

/// Relative completeness tolerance between successive depths.
const COMPLETENESS_TOL: f64 = 0.02;

/// `limsup log N(R) / R` with `N(R) = #{gamma : s(gamma) <= R}`, from word balls
/// at the scheduled depths.
pub fn delta_discrete(gens: &SubgroupSpec, depth_schedule: &[usize]) -> Result<AbscissaEstimate> {
    if depth_schedule.is_empty() || depth_schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("depth schedule must be nonempty and strictly increasing".into()));
    }
    let max_depth = *depth_schedule.last().expect("nonempty");
    let ball = enumerate_ball(gens, max_depth)?;
    delta_from_ball(&ball, depth_schedule)
}

/// [`delta_discrete`] on a ball enumerated to at least the largest scheduled depth.
pub fn delta_from_ball(ball: &OrbitBall, depth_schedule: &[usize]) -> Result<AbscissaEstimate> {
    const METHOD: &str = "word-ball shell fit";
    let max_depth = *depth_schedule.last().ok_or_else(|| Error::Domain("empty depth schedule".into()))?;
    if max_depth > ball.depth {
        return Err(Error::Domain("ball is shallower than the schedule".into()));
    }
    let mut notes = vec![format!(
        "shell width {SHELL_WIDTH}; fit drops the smallest {}% and largest {}% of shells",
        DROP_LOW * 100.0,
        DROP_HIGH * 100.0
    )];
    if ball.closed {
        let mut est = AbscissaEstimate::exact_zero(METHOD, "enumeration closed: the group is finite");
        est.depth_schedule = depth_schedule.to_vec();
        return Ok(est);
    }
    if ball.truncated {
        notes.push("element cap reached; ball is partial".into());
    }
    if ball.audit_failures > 0 {
        notes.push(format!("{} float key collisions failed the entry audit", ball.audit_failures));
    }
    let inner = if depth_schedule.len() >= 2 {
        depth_schedule[depth_schedule.len() - 2]
    } else {
        (3 * max_depth) / 4
    };
    let radius = reliable_radius(ball, inner, max_depth, COMPLETENESS_TOL);
    let k = ball.count_within(max_depth);
    let all_shells = cumulative_shells(&ball.s_values[..k], SHELL_WIDTH, radius);
    let shells: Vec<Shell> = all_shells.clone();
    let Some((slope, se, used)) = fit_window(&shells) else {
        let mut est = AbscissaEstimate::indeterminate(
            METHOD,
            format!("only {} shells below the reliable radius {radius}", shells.len()),
        );
        est.depth_schedule = depth_schedule.to_vec();
        est.shells = shells;
        est.reliable_radius = radius;
        return Ok(est);
    };
    notes.push(format!("{used} shells in the fit window"));
    let value = slope.max(0.0);
    let (mut lower, mut upper) = partial_sum_bracket(ball, depth_schedule);
    if value < lower || value > upper {
        notes.push(format!("fitted value outside the partial-sum bracket [{lower}, {upper}]; bracket widened"));
        lower = lower.min(value);
        upper = upper.max(value);
    }
    Ok(AbscissaEstimate {
        value,
        lower,
        upper,
        error_bar: 3.0 * se,
        status: EstimateStatus::Estimated,
        depth_schedule: depth_schedule.to_vec(),
        shells,
        reliable_radius: radius,
        method: METHOD.into(),
        notes,
    })
}

const BRACKET_STEP: f64 = 0.05;
const BRACKET_MAX: f64 = 2.0;
const FLAT_TOL: f64 = 1e-3;
const DIVERGE_TOL: f64 = 0.02;

/// Partial-sum bracket: a grid value of `t` is divergent when the per-level
/// increment of the partial sums is non-decreasing and not negligible, and flat
/// when it is negligible relative to the sum.
fn partial_sum_bracket(ball: &OrbitBall, schedule: &[usize]) -> (f64, f64) {
    let depths: Vec<usize> = if schedule.len() >= 3 {
        schedule[schedule.len() - 3..].to_vec()
    } else {
        let d = *schedule.last().expect("nonempty");
        vec![d / 2, (3 * d) / 4, d]
    };
    let steps = (BRACKET_MAX / BRACKET_STEP).round() as usize;
    let mut lower: f64 = 0.0;
    let mut upper: f64 = BRACKET_MAX;
    for i in 0..=steps {
        let t = i as f64 * BRACKET_STEP;
        let p: Vec<f64> = depths.iter().map(|&d| poincare_partial_within(ball, t, d)).collect();
        let r1 = (p[1] - p[0]) / (depths[1] - depths[0]) as f64;
        let r2 = (p[2] - p[1]) / (depths[2] - depths[1]) as f64;
        let rel = r2 / p[2];
        if rel >= DIVERGE_TOL && r2 >= r1 {
            lower = lower.max(t);
        }
        if rel <= FLAT_TOL && t > lower && upper == BRACKET_MAX {
            upper = t;
        }
    }
    if upper < lower {
        upper = BRACKET_MAX;
    }
    (lower, upper)
}

/// Cone-restricted growth rate in the `|kappa|` normalization: `|direction|` times
/// the fitted exponential rate of `#{gamma : kappa(gamma) in cone, |kappa| <= R}`.
/// Returns `-inf` when the cone holds no nontrivial element.
pub fn growth_indicator(gens: &SubgroupSpec, direction: &CartanVector, aperture: f64, depth: usize) -> Result<f64> {
    if !(aperture > 0.0 && aperture < std::f64::consts::FRAC_PI_2) {
        return Err(Error::Domain("aperture must lie in (0, pi/2)".into()));
    }
    if direction.norm() == 0.0 || !direction.is_dominant() {
        return Err(Error::Domain("direction must be nonzero and dominant".into()));
    }
    let ball = enumerate_ball(gens, depth)?;
    growth_indicator_from_ball(&ball, direction, aperture)
}

pub fn growth_indicator_from_ball(ball: &OrbitBall, direction: &CartanVector, aperture: f64) -> Result<f64> {
    if direction.dim() != ball.n {
        return Err(Error::DimensionMismatch { expected: ball.n, got: direction.dim() });
    }
    let unit: Vec<f64> = direction.coords().iter().map(|x| x / direction.norm()).collect();
    let cos_ap = aperture.cos();
    let in_cone = |i: usize| -> Option<f64> {
        let k = ball.kappa(i);
        let norm = k.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            return None;
        }
        let c = k.iter().zip(&unit).map(|(a, b)| a * b).sum::<f64>() / norm;
        (c >= cos_ap).then_some(norm)
    };
    let depth = ball.depth;
    let inner = (3 * depth) / 4;
    let radii: Vec<f64> = (0..ball.len()).filter_map(in_cone).collect();
    if radii.is_empty() {
        return Ok(f64::NEG_INFINITY);
    }
    let inner_radii: Vec<f64> = (0..ball.count_within(inner)).filter_map(in_cone).collect();
    let r_max = radii.iter().cloned().fold(0.0, f64::max);
    let width = SHELL_WIDTH / std::f64::consts::SQRT_2;
    let outer_shells = cumulative_shells(&radii, width, r_max);
    let inner_shells = cumulative_shells(&inner_radii, width, r_max);
    let mut cut = 0;
    for (j, (i, o)) in inner_shells.iter().zip(&outer_shells).enumerate() {
        if (i.n as f64) < (1.0 - COMPLETENESS_TOL) * o.n as f64 {
            break;
        }
        cut = j + 1;
    }
    let (rate, _, _) = fit_window(&outer_shells[..cut])
        .ok_or_else(|| Error::Indeterminate("too few reliable shells in the cone".into()))?;
    Ok(direction.norm() * rate.max(0.0))
}

/// Options for [`delta_reductive_quadrature`].
#[derive(Clone, Debug)]
pub struct ReductiveOptions {
    pub t_grid: Vec<f64>,
    pub truncation: f64,
    pub directions: usize,
    pub nodes: usize,
    pub seed: u64,
}

impl Default for ReductiveOptions {
    fn default() -> Self {
        Self {
            t_grid: (0..=30).map(|i| i as f64 * 0.05).collect(),
            truncation: 80.0,
            directions: 400,
            nodes: 2000,
            seed: 0,
        }
    }
}

/// Abscissa of `t -> int_{a_H+} exp(-2t rho(dom(emb Y))) prod_{alpha in Sigma_H+} sinh^m(alpha(Y)) dY`.
///
/// The pair's `h_system` supplies `Sigma_H` with multiplicities; `embedding` maps
/// `a_H` coordinates (columns) into the ambient diagonal (rows). Each sampled unit
/// direction `u` of the chamber yields a ray integral whose log-growth between
/// `T/2` and `T` is fitted linearly in `t`; the root is that direction's abscissa.
pub fn delta_reductive_quadrature(pair: &PairSpec, embedding: &[Vec<Q>], opts: &ReductiveOptions) -> Result<AbscissaEstimate> {
    const METHOD: &str = "radial quadrature over the H-chamber";
    let d = pair.dim;
    if embedding.first().map_or(0, Vec::len) != d {
        return Err(Error::DimensionMismatch { expected: d, got: embedding.first().map_or(0, Vec::len) });
    }
    if opts.t_grid.len() < 2 || opts.t_grid.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("t grid must be increasing with at least two points".into()));
    }
    if !(opts.truncation > 0.0) || opts.nodes < 8 || opts.directions == 0 {
        return Err(Error::Domain("truncation, node count, and direction count must be positive".into()));
    }
    if d == 0 {
        return Ok(AbscissaEstimate::exact_zero(METHOD, "H has a compact split torus"));
    }
    let emb: Vec<Vec<f64>> = embedding.iter().map(|r| r.iter().map(rational::to_f64).collect()).collect();
    // positive system of H from a generic point
    let generic: Vec<f64> = (0..d).map(|i| 1.0 + 0.618_033_988_75 * (i as f64 + 1.0).sqrt()).collect();
    let positive: Vec<(Vec<Q>, f64)> = pair
        .h_system
        .weights()
        .iter()
        .filter(|w| dot_f64(&w.covector, &generic) > 0.0)
        .map(|w| (w.covector.clone(), w.multiplicity as f64))
        .collect();
    let in_chamber = |u: &[f64]| positive.iter().all(|(c, _)| dot_f64(c, u) >= 0.0);

    let rays = chamber_rays(&positive, d);
    let ray_rank = {
        let m = nalgebra::DMatrix::from_fn(rays.len(), d, |i, j| rays.get(i).map_or(0.0, |r| r[j]));
        if rays.is_empty() {
            0
        } else {
            m.rank(1e-9)
        }
    };
    let mut dirs = rays.clone();
    let mut rng = sampling::stream(opts.seed, 0);
    let mut tries = 0usize;
    while dirs.len() < opts.directions + rays.len() && tries < 1_000_000 {
        tries += 1;
        let v: Vec<f64> = if ray_rank == d {
            // random conic combination of the extreme rays
            let w: Vec<f64> = rays.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
            (0..d).map(|j| rays.iter().zip(&w).map(|(r, c)| r[j] * c).sum()).collect()
        } else {
            (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
        };
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let u: Vec<f64> = v.iter().map(|x| x / norm).collect();
        if in_chamber(&u) {
            dirs.push(u);
        }
    }

    let per_dir = |u: &Vec<f64>| -> DirectionResult {
        let x: Vec<f64> = emb.iter().map(|row| row.iter().zip(u).map(|(a, b)| a * b).sum()).collect();
        let mut sorted = x.clone();
        sorted.sort_by(|a, b| b.total_cmp(a));
        let a = 2.0 * rho_eval_f64(&sorted);
        let roots: Vec<(f64, f64)> = positive.iter().map(|(c, m)| (dot_f64(c, u), *m)).collect();
        direction_abscissa(a, &roots, d, opts)
    };
    #[cfg(feature = "parallel")]
    let results: Vec<DirectionResult> = {
        use rayon::prelude::*;
        dirs.par_iter().map(per_dir).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let results: Vec<DirectionResult> = dirs.iter().map(per_dir).collect();

    if results.iter().any(|r| !r.monotone) {
        let mut est = AbscissaEstimate::indeterminate(
            METHOD,
            "truncation too small to separate divergent from convergent grid points".into(),
        );
        est.reliable_radius = opts.truncation;
        return Ok(est);
    }
    let lower = results.iter().map(|r| r.lower).fold(0.0, f64::max);
    let upper = results.iter().map(|r| r.upper).fold(0.0, f64::max);
    let raw = results.iter().map(|r| r.value).fold(0.0, f64::max);
    let mut notes = vec![format!(
        "{} chamber directions ({} extreme rays), truncation {}, {} nodes",
        dirs.len(),
        rays.len(),
        opts.truncation,
        opts.nodes
    )];
    let value = raw.clamp(lower, upper);
    if value != raw {
        notes.push(format!("root estimate {raw} clamped into the grid bracket"));
    }
    Ok(AbscissaEstimate {
        value,
        lower,
        upper,
        error_bar: (upper - lower) / 2.0,
        status: EstimateStatus::Estimated,
        depth_schedule: Vec::new(),
        shells: Vec::new(),
        reliable_radius: opts.truncation,
        method: METHOD.into(),
        notes,
    })
}

struct DirectionResult {
    value: f64,
    lower: f64,
    upper: f64,
    monotone: bool,
}

/// Unit extreme rays of the chamber cut out by the positive covectors.
fn chamber_rays(positive: &[(Vec<Q>, f64)], d: usize) -> Vec<Vec<f64>> {
    use itertools::Itertools;
    if positive.is_empty() {
        return Vec::new();
    }
    let normals: Vec<Vec<num_bigint::BigInt>> = positive.iter().map(|(c, _)| rational::primitive_direction(c)).collect();
    let mut rays: Vec<Vec<f64>> = Vec::new();
    for combo in (0..normals.len()).combinations(d - 1) {
        let rows: Vec<&Vec<num_bigint::BigInt>> = combo.iter().map(|&i| &normals[i]).collect();
        let Some(v) = crate::beta::kernel_ray(&rows, d) else {
            continue;
        };
        for sign in [1.0, -1.0] {
            let u: Vec<f64> = v.iter().map(|x| sign * rational::to_f64(x)).collect();
            let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
            let u: Vec<f64> = u.iter().map(|x| x / norm).collect();
            let inside = positive.iter().all(|(c, _)| dot_f64(c, &u) >= -1e-12);
            if inside && !rays.iter().any(|r| r.iter().zip(&u).all(|(a, b)| (a - b).abs() < 1e-12)) {
                rays.push(u);
            }
        }
    }
    rays
}

/// Nodes `s` and `t`-independent log weights of `int_0^T exp(-t a s) prod sinh^m(b s) s^(d-1) ds`
/// under the trapezoid rule.
struct RayRule {
    nodes: Vec<f64>,
    base: Vec<f64>,
}

impl RayRule {
    fn new(roots: &[(f64, f64)], d: usize, upper: f64, nodes: usize) -> Self {
        let h = upper / (nodes - 1) as f64;
        let (nodes, base) = (0..nodes)
            .map(|i| {
                let s = i as f64 * h;
                let mut v = h.ln();
                for &(b, m) in roots {
                    v += m * log_sinh(b * s);
                }
                if d > 1 {
                    v += (d - 1) as f64 * s.ln();
                }
                if i == 0 || i + 1 == nodes {
                    v -= std::f64::consts::LN_2;
                }
                (s, v)
            })
            .unzip();
        Self { nodes, base }
    }

    fn log_integral(&self, t: f64, a: f64) -> f64 {
        let logs: Vec<f64> = self.nodes.iter().zip(&self.base).map(|(s, v)| v - t * a * s).collect();
        crate::harmonic::log_sum_exp(&logs)
    }
}

fn direction_abscissa(a: f64, roots: &[(f64, f64)], d: usize, opts: &ReductiveOptions) -> DirectionResult {
    let big = opts.truncation;
    let half = big / 2.0;
    // polynomial factors contribute at most this much log-growth per unit length
    let poly: f64 = (d as f64 - 1.0) + roots.iter().filter(|(b, _)| *b == 0.0).count() as f64;
    let threshold = 2.0 * (poly + 1.0) * std::f64::consts::LN_2 / half;
    let full = RayRule::new(roots, d, big, opts.nodes);
    let part = RayRule::new(roots, d, half, opts.nodes / 2);
    let growth: Vec<f64> = opts
        .t_grid
        .iter()
        .map(|&t| (full.log_integral(t, a) - part.log_integral(t, a)) / half)
        .collect();
    let divergent: Vec<bool> = growth.iter().map(|g| *g > threshold).collect();
    let k = divergent.iter().take_while(|x| **x).count();
    let monotone = divergent[k..].iter().all(|x| !x);
    let grid = &opts.t_grid;
    let lower = if k == 0 { grid[0].max(0.0) } else { grid[k - 1] };
    let upper = if k < grid.len() { grid[k] } else { f64::INFINITY };
    let value = if k >= 2 {
        let (slope, icpt, _) = fit_line(&grid[..k], &growth[..k]);
        if slope < 0.0 {
            -icpt / slope
        } else {
            lower
        }
    } else if k == 0 {
        grid[0].max(0.0)
    } else {
        (lower + upper) / 2.0
    };
    DirectionResult { value, lower, upper, monotone }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, q_frac};

    fn exact(rows: &[&[i64]]) -> GroupElement {
        GroupElement::from_rows_exact(rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect()).unwrap()
    }

    fn sl2z() -> SubgroupSpec {
        SubgroupSpec::discrete(vec![exact(&[&[0, -1], &[1, 0]]), exact(&[&[1, 1], &[0, 1]])]).unwrap()
    }

    fn cyclic() -> SubgroupSpec {
        let g = GroupElement::from_rows_exact(vec![vec![q(2), q(0)], vec![q(0), q_frac(1, 2)]]).unwrap();
        SubgroupSpec::discrete(vec![g]).unwrap()
    }

    #[test]
    fn trivial_balls() {
        let ball = enumerate_ball(&sl2z(), 0).unwrap();
        assert_eq!(ball.len(), 1);
        assert_eq!(ball.s_value(0), 0.0);
        assert_eq!(poincare_partial(&ball, 3.0), 1.0);
        let trivial = SubgroupSpec::discrete(vec![GroupElement::identity_exact(2)]).unwrap();
        let est = delta_discrete(&trivial, &[4, 8]).unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.status, EstimateStatus::Exact);
        let dir = CartanVector::new(vec![1.0, -1.0]).unwrap();
        assert_eq!(growth_indicator(&trivial, &dir, 0.5, 6).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn cyclic_ball_and_series() {
        let k = 7;
        let ball = enumerate_ball(&cyclic(), k).unwrap();
        assert_eq!(ball.len(), 2 * k + 1);
        let mut s: Vec<f64> = ball.s_values().to_vec();
        s.sort_by(f64::total_cmp);
        let mut expect: Vec<f64> = (-(k as i64)..=k as i64).map(|j| 2.0 * j.unsigned_abs() as f64 * 2f64.ln()).collect();
        expect.sort_by(f64::total_cmp);
        for (a, b) in s.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-12);
        }
        // t = 1: 1 + 2 sum_{j=1}^k 4^{-j} = 1 + 2 (1 - 4^{-k}) / 3
        let closed = 1.0 + 2.0 * (1.0 - 4f64.powi(-(k as i32))) / 3.0;
        assert!((poincare_partial(&ball, 1.0) - closed).abs() < 1e-14);
        assert!(poincare_partial(&ball, 0.5) > poincare_partial(&ball, 1.0));
    }

    /// Independent word-tree oracle: all words up to length `depth`, integer 2x2 matrices.
    fn word_tree_count(depth: usize) -> usize {
        let gens: [[i64; 4]; 4] = [[0, -1, 1, 0], [0, 1, -1, 0], [1, 1, 0, 1], [1, -1, 0, 1]];
        let mut seen = std::collections::BTreeSet::new();
        let mut stack = vec![([1i64, 0, 0, 1], 0usize)];
        while let Some((m, len)) = stack.pop() {
            seen.insert(m);
            if len == depth {
                continue;
            }
            for g in &gens {
                let p = [
                    m[0] * g[0] + m[1] * g[2],
                    m[0] * g[1] + m[1] * g[3],
                    m[2] * g[0] + m[3] * g[2],
                    m[2] * g[1] + m[3] * g[3],
                ];
                stack.push((p, len + 1));
            }
        }
        seen.len()
    }

    #[test]
    fn sl2z_ball_matches_word_tree() {
        let ball = enumerate_ball(&sl2z(), 6).unwrap();
        assert_eq!(ball.len(), word_tree_count(6));
        assert!(ball.is_exact());
        for d in 0..6 {
            assert_eq!(enumerate_ball(&sl2z(), d).unwrap().len(), ball.count_within(d));
        }
    }

    #[test]
    fn float_mode_matches_exact_mode() {
        let float_gens = SubgroupSpec::discrete(vec![
            GroupElement::from_rows(&[vec![0.0, -1.0], vec![1.0, 0.0]]).unwrap(),
            GroupElement::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap(),
        ])
        .unwrap();
        let a = enumerate_ball(&float_gens, 8).unwrap();
        let b = enumerate_ball(&sl2z(), 8).unwrap();
        assert!(!a.is_exact());
        assert_eq!(a.len(), b.len());
        assert_eq!(a.audit_failures, 0);
    }

    #[test]
    fn cap_truncates() {
        let ball = enumerate_ball_with_cap(&sl2z(), 10, 100).unwrap();
        assert!(ball.truncated);
        assert_eq!(ball.len(), 100);
    }

    #[test]
    fn cyclic_growth_indicator_vanishes() {
        let dir = CartanVector::new(vec![1.0, -1.0]).unwrap();
        let psi = growth_indicator(&cyclic(), &dir, 0.3, 128).unwrap();
        assert!(psi.abs() < 0.05, "{psi}");
    }

    #[test]
    fn exact_rational_generators_fall_back_from_integers() {
        let ball = enumerate_ball(&cyclic(), 40).unwrap();
        assert_eq!(ball.len(), 81);
        let g = ball.element(80);
        assert!(g.is_exact());
    }

    #[test]
    fn reductive_quadrature_recovers_beta() {
        let opts = ReductiveOptions { directions: 40, ..ReductiveOptions::default() };
        for (name, beta) in [("sl2-in-sl3", 0.5), ("g-equals-h-sl2", 1.0), ("torus-in-sl3", 0.0), ("sl3-in-sl4", 2.0 / 3.0)] {
            let e = crate::catalog::entry(name).unwrap();
            let est = delta_reductive_quadrature(e.pair.as_ref().unwrap(), &e.embedding, &opts).unwrap();
            assert!((est.value - beta).abs() < 0.05, "{name}: {}", est.value);
            assert!(est.lower <= est.value && est.value <= est.upper);
        }
    }

    #[test]
    fn reductive_quadrature_rejects_bad_options() {
        let e = crate::catalog::entry("sl2-in-sl3").unwrap();
        let opts = ReductiveOptions { t_grid: vec![0.5], ..ReductiveOptions::default() };
        assert!(delta_reductive_quadrature(e.pair.as_ref().unwrap(), &e.embedding, &opts).is_err());
        let bad_emb = vec![vec![q(1), q(0)]; 3];
        assert!(delta_reductive_quadrature(e.pair.as_ref().unwrap(), &bad_emb, &ReductiveOptions::default()).is_err());
    }
}
