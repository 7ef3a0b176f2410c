//! Matrix realization of `SL(n, R)`: group elements, Cartan and Iwasawa
//! projections, subgroup descriptors, and seeded samplers over coordinate regions.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_traits::{One, Zero};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rational::{self, Q};
use crate::sampling::{self, chunked_map};

/// Default tolerance for the determinant and trace invariants.
pub const DEFAULT_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
enum Repr {
    Float(DMatrix<f64>),
    /// Row-major exact entries.
    Exact(Vec<Q>),
}

/// An element of `SL(n, R)`, stored either as floats or as exact rationals.
#[derive(Clone, Debug)]
pub struct GroupElement {
    n: usize,
    repr: Repr,
}

impl GroupElement {
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        Self::from_matrix_with_tol(m, DEFAULT_TOL)
    }

    pub fn from_matrix_with_tol(m: DMatrix<f64>, tol: f64) -> Result<Self> {
        let n = m.nrows();
        if n < 2 || m.ncols() != n {
            return Err(Error::InvalidElement(format!(
                "expected a square matrix of size >= 2, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericInput("non-finite matrix entry".into()));
        }
        let det = m.determinant();
        if (det - 1.0).abs() > tol {
            return Err(Error::InvalidElement(format!("determinant {det} is not 1")));
        }
        Ok(Self { n, repr: Repr::Float(m) })
    }

    /// Wraps a matrix known to lie in the group (e.g. a product of group elements).
    pub(crate) fn from_matrix_unchecked(m: DMatrix<f64>) -> Self {
        Self { n: m.nrows(), repr: Repr::Float(m) }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidElement("rows of unequal length".into()));
        }
        Self::from_matrix(DMatrix::from_fn(n, n, |i, j| rows[i][j]))
    }

    pub fn from_rows_exact(rows: Vec<Vec<Q>>) -> Result<Self> {
        let n = rows.len();
        if n < 2 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::InvalidElement("expected square rows of size >= 2".into()));
        }
        let entries: Vec<Q> = rows.into_iter().flatten().collect();
        let det = exact_det(n, &entries);
        if !det.is_one() {
            return Err(Error::InvalidElement(format!(
                "determinant {} is not 1",
                rational::fmt_q(&det)
            )));
        }
        Ok(Self { n, repr: Repr::Exact(entries) })
    }

    pub fn identity(n: usize) -> Self {
        Self { n, repr: Repr::Float(DMatrix::identity(n, n)) }
    }

    pub fn identity_exact(n: usize) -> Self {
        let entries = (0..n * n)
            .map(|k| if k / n == k % n { Q::one() } else { Q::zero() })
            .collect();
        Self { n, repr: Repr::Exact(entries) }
    }

    /// `exp(X)` for a diagonal Cartan element.
    pub fn exp_cartan(x: &CartanVector) -> Self {
        let n = x.dim();
        Self::from_matrix_unchecked(DMatrix::from_fn(n, n, |i, j| {
            if i == j {
                x.coords[i].exp()
            } else {
                0.0
            }
        }))
    }

    /// The rotation by `theta` in the `(i, j)` coordinate plane.
    pub fn rotation(n: usize, i: usize, j: usize, theta: f64) -> Self {
        let mut m = DMatrix::identity(n, n);
        let (s, c) = theta.sin_cos();
        m[(i, i)] = c;
        m[(j, j)] = c;
        m[(i, j)] = -s;
        m[(j, i)] = s;
        Self::from_matrix_unchecked(m)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn is_exact(&self) -> bool {
        matches!(self.repr, Repr::Exact(_))
    }

    pub fn exact_entries(&self) -> Option<&[Q]> {
        match &self.repr {
            Repr::Exact(e) => Some(e),
            Repr::Float(_) => None,
        }
    }

    /// Floating-point view of the matrix.
    pub fn matrix(&self) -> DMatrix<f64> {
        match &self.repr {
            Repr::Float(m) => m.clone(),
            Repr::Exact(e) => DMatrix::from_fn(self.n, self.n, |i, j| rational::to_f64(&e[i * self.n + j])),
        }
    }

    pub fn to_float(&self) -> Self {
        Self::from_matrix_unchecked(self.matrix())
    }

    pub fn det(&self) -> f64 {
        match &self.repr {
            Repr::Float(m) => m.determinant(),
            Repr::Exact(e) => rational::to_f64(&exact_det(self.n, e)),
        }
    }

    pub fn inverse(&self) -> Self {
        match &self.repr {
            Repr::Float(m) => {
                let inv = m.clone().try_inverse().expect("determinant-one matrix is invertible");
                Self::from_matrix_unchecked(inv)
            }
            Repr::Exact(e) => Self { n: self.n, repr: Repr::Exact(exact_inverse(self.n, e)) },
        }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: other.n });
        }
        Ok(match (&self.repr, &other.repr) {
            (Repr::Exact(a), Repr::Exact(b)) => {
                let n = self.n;
                let mut out = Vec::with_capacity(n * n);
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = Q::zero();
                        for k in 0..n {
                            let (x, y) = (&a[i * n + k], &b[k * n + j]);
                            if !x.is_zero() && !y.is_zero() {
                                acc += x * y;
                            }
                        }
                        out.push(acc);
                    }
                }
                Self { n, repr: Repr::Exact(out) }
            }
            _ => Self::from_matrix_unchecked(self.matrix() * other.matrix()),
        })
    }

    /// Largest absolute entry deviation from another element.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.matrix() - other.matrix()).amax()
    }
}

impl std::ops::Mul for &GroupElement {
    type Output = GroupElement;

    fn mul(self, rhs: &GroupElement) -> GroupElement {
        self.compose(rhs).expect("multiplying elements of different SL(n)")
    }
}

fn exact_det(n: usize, entries: &[Q]) -> Q {
    let mut a: Vec<Q> = entries.to_vec();
    let mut det = Q::one();
    for col in 0..n {
        let Some(pivot) = (col..n).find(|&r| !a[r * n + col].is_zero()) else {
            return Q::zero();
        };
        if pivot != col {
            for j in 0..n {
                a.swap(pivot * n + j, col * n + j);
            }
            det = -det;
        }
        let p = a[col * n + col].clone();
        det *= &p;
        for r in col + 1..n {
            if a[r * n + col].is_zero() {
                continue;
            }
            let f = &a[r * n + col] / &p;
            for j in col..n {
                let sub = &f * &a[col * n + j];
                a[r * n + j] -= sub;
            }
        }
    }
    det
}

fn exact_inverse(n: usize, entries: &[Q]) -> Vec<Q> {
    let w = 2 * n;
    let mut a = vec![Q::zero(); n * w];
    for i in 0..n {
        for j in 0..n {
            a[i * w + j] = entries[i * n + j].clone();
        }
        a[i * w + n + i] = Q::one();
    }
    for col in 0..n {
        let pivot = (col..n)
            .find(|&r| !a[r * w + col].is_zero())
            .expect("determinant-one matrix is invertible");
        if pivot != col {
            for j in 0..w {
                a.swap(pivot * w + j, col * w + j);
            }
        }
        let p = a[col * w + col].clone();
        for j in 0..w {
            a[col * w + j] /= &p;
        }
        for r in 0..n {
            if r == col || a[r * w + col].is_zero() {
                continue;
            }
            let f = a[r * w + col].clone();
            for j in 0..w {
                let sub = &f * &a[col * w + j];
                a[r * w + j] -= sub;
            }
        }
    }
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        for j in 0..n {
            out.push(a[i * w + n + j].clone());
        }
    }
    out
}

/// A point of the diagonal Cartan subspace, stored as its `n` diagonal entries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CartanVector {
    coords: Vec<f64>,
}

impl CartanVector {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.len() < 2 {
            return Err(Error::Domain("Cartan vectors need at least two coordinates".into()));
        }
        if coords.iter().any(|x| !x.is_finite()) {
            return Err(Error::NumericInput("non-finite Cartan coordinate".into()));
        }
        let sum: f64 = coords.iter().sum();
        let scale = coords.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        if sum.abs() > DEFAULT_TOL * scale {
            return Err(Error::Domain(format!("Cartan coordinates sum to {sum}, not 0")));
        }
        Ok(Self { coords })
    }

    /// Projects onto the traceless subspace instead of rejecting.
    pub fn traceless(mut coords: Vec<f64>) -> Self {
        let mean = coords.iter().sum::<f64>() / coords.len() as f64;
        for x in &mut coords {
            *x -= mean;
        }
        Self { coords }
    }

    pub fn zero(n: usize) -> Self {
        Self { coords: vec![0.0; n] }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn norm(&self) -> f64 {
        self.coords.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_dominant(&self) -> bool {
        self.coords.windows(2).all(|w| w[0] >= w[1])
    }

    pub fn scaled(&self, t: f64) -> Self {
        Self { coords: self.coords.iter().map(|x| x * t).collect() }
    }

    pub fn distance(&self, other: &Self) -> f64 {
        self.coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    /// Coordinates negated and reversed: the Cartan projection of the inverse.
    pub fn opposite(&self) -> Self {
        Self { coords: self.coords.iter().rev().map(|x| -x).collect() }
    }
}

/// `kappa(g)`: the dominant vector with `g` in `K exp(kappa(g)) K`, i.e. the
/// decreasingly sorted logarithms of the singular values.
pub fn cartan_projection(g: &GroupElement) -> Result<CartanVector> {
    let m = g.matrix();
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericInput("non-finite entries in Cartan projection".into()));
    }
    let n = g.n();
    let coords = match n {
        2 => {
            let f2 = m.iter().map(|x| x * x).sum::<f64>();
            let s1 = 0.5 * ((f2 + 2.0).sqrt() + (f2 - 2.0).max(0.0).sqrt());
            let l = s1.ln();
            vec![l, -l]
        }
        3 => {
            // smallest singular value through the inverse keeps relative accuracy
            let top = top_log_singular(&m)?;
            let inv = g.inverse().matrix();
            let bottom = -top_log_singular(&inv)?;
            vec![top, -(top + bottom), bottom]
        }
        _ => {
            let svd = m.try_svd(false, false, 1e-15, 10_000).ok_or_else(|| {
                Error::NumericInput("singular value decomposition did not converge".into())
            })?;
            let mut logs: Vec<f64> = svd.singular_values.iter().map(|s| s.ln()).collect();
            if logs.iter().any(|x| !x.is_finite()) {
                return Err(Error::NumericInput("vanishing singular value".into()));
            }
            logs.sort_by(|a, b| b.total_cmp(a));
            logs
        }
    };
    Ok(CartanVector::traceless(coords))
}

fn top_log_singular(m: &DMatrix<f64>) -> Result<f64> {
    let scale = m.amax();
    if scale == 0.0 || !scale.is_finite() {
        return Err(Error::NumericInput("degenerate matrix".into()));
    }
    let svd = (m / scale)
        .try_svd(false, false, 1e-15, 10_000)
        .ok_or_else(|| Error::NumericInput("singular value decomposition did not converge".into()))?;
    Ok(svd.singular_values.max().ln() + scale.ln())
}

/// `eta(g)` with `g` in `K exp(eta(g)) N`, read off the diagonal of the
/// orthogonal-triangular factorization with positive triangular diagonal.
pub fn iwasawa_projection(g: &GroupElement) -> Result<CartanVector> {
    let (_, r) = qr_positive(&g.matrix());
    let mut coords = Vec::with_capacity(g.n());
    for i in 0..g.n() {
        let d = r[(i, i)];
        if !(d > 0.0) || !d.is_finite() {
            return Err(Error::NumericInput("rank-deficient triangular factor".into()));
        }
        coords.push(d.ln());
    }
    Ok(CartanVector::traceless(coords))
}

/// QR factorization normalized so the triangular factor has a nonnegative diagonal.
pub fn qr_positive(m: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = m.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows() {
        if r[(i, i)] < 0.0 {
            for j in 0..r.ncols() {
                r[(i, j)] = -r[(i, j)];
            }
            for k in 0..q.nrows() {
                q[(k, i)] = -q[(k, i)];
            }
        }
    }
    (q, r)
}

/// Haar-random element of `SO(n)` from a Gaussian matrix.
pub fn random_rotation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> GroupElement {
    if n == 2 {
        return GroupElement::rotation(2, 0, 1, rng.gen::<f64>() * 2.0 * PI);
    }
    let gauss = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let (mut q, _) = qr_positive(&gauss);
    if q.determinant() < 0.0 {
        for k in 0..n {
            q[(k, 0)] = -q[(k, 0)];
        }
    }
    GroupElement::from_matrix_unchecked(q)
}

/// Closed subgroups understood by the toolkit.
#[derive(Clone, Debug)]
pub enum SubgroupSpec {
    /// Group generated by the listed elements and their inverses.
    DiscreteGenerators { gens: Vec<GroupElement>, exact: bool },
    /// Product of `SL(k)` blocks placed block-diagonally at the given offsets.
    BlockReductive { n: usize, blocks: Vec<usize>, positions: Vec<usize> },
    DiagonalTorus { n: usize },
    UpperUnipotent { n: usize },
    CatalogName(String),
}

impl SubgroupSpec {
    pub fn discrete(gens: Vec<GroupElement>) -> Result<Self> {
        let Some(first) = gens.first() else {
            return Err(Error::Domain("generator list is empty".into()));
        };
        let n = first.n();
        if gens.iter().any(|g| g.n() != n) {
            return Err(Error::Domain("generators of different sizes".into()));
        }
        for g in &gens {
            let inv_det = g.inverse().det();
            if (g.det() - 1.0).abs() > DEFAULT_TOL || (inv_det - 1.0).abs() > DEFAULT_TOL {
                return Err(Error::InvalidElement("generator with determinant != 1".into()));
            }
        }
        let exact = gens.iter().all(GroupElement::is_exact);
        Ok(Self::DiscreteGenerators { gens, exact })
    }

    pub fn block_reductive(n: usize, blocks: Vec<usize>, positions: Vec<usize>) -> Result<Self> {
        if blocks.len() != positions.len() || blocks.is_empty() {
            return Err(Error::Domain("blocks and positions must pair up".into()));
        }
        let mut used = vec![false; n];
        for (&k, &p) in blocks.iter().zip(&positions) {
            if k < 2 || p + k > n {
                return Err(Error::Domain(format!("block of size {k} at {p} does not fit in {n}")));
            }
            for slot in &mut used[p..p + k] {
                if *slot {
                    return Err(Error::Domain("overlapping blocks".into()));
                }
                *slot = true;
            }
        }
        Ok(Self::BlockReductive { n, blocks, positions })
    }

    /// Ambient rank, when the variant carries it.
    pub fn ambient_n(&self) -> Option<usize> {
        match self {
            Self::DiscreteGenerators { gens, .. } => gens.first().map(GroupElement::n),
            Self::BlockReductive { n, .. } | Self::DiagonalTorus { n } | Self::UpperUnipotent { n } => Some(*n),
            Self::CatalogName(_) => None,
        }
    }

    /// A basis of the Lie algebra of a connected variant.
    pub fn lie_algebra_basis(&self) -> Result<Vec<DMatrix<f64>>> {
        match self {
            Self::DiagonalTorus { n } => Ok(coroot_basis(*n, 0, *n)),
            Self::UpperUnipotent { n } => {
                let mut out = Vec::new();
                for i in 0..*n {
                    for j in i + 1..*n {
                        out.push(unit(*n, i, j));
                    }
                }
                Ok(out)
            }
            Self::BlockReductive { n, blocks, positions } => {
                let mut out = Vec::new();
                for (&k, &p) in blocks.iter().zip(positions) {
                    for i in p..p + k {
                        for j in p..p + k {
                            if i != j {
                                out.push(unit(*n, i, j));
                            }
                        }
                    }
                    out.extend(coroot_basis(*n, p, k));
                }
                Ok(out)
            }
            Self::DiscreteGenerators { .. } => Err(Error::Unsupported("discrete subgroups have no Lie algebra".into())),
            Self::CatalogName(name) => Err(Error::Unsupported(format!("resolve catalog name `{name}` first"))),
        }
    }

    /// A basis of a maximal split abelian subalgebra, in simple-coroot coordinates.
    pub fn cartan_basis(&self) -> Result<Vec<DMatrix<f64>>> {
        match self {
            Self::DiagonalTorus { n } => Ok(coroot_basis(*n, 0, *n)),
            Self::UpperUnipotent { .. } => Ok(Vec::new()),
            Self::BlockReductive { n, blocks, positions } => Ok(blocks
                .iter()
                .zip(positions)
                .flat_map(|(&k, &p)| coroot_basis(*n, p, k))
                .collect()),
            Self::DiscreteGenerators { .. } => Err(Error::Unsupported("discrete subgroups have no Lie algebra".into())),
            Self::CatalogName(name) => Err(Error::Unsupported(format!("resolve catalog name `{name}` first"))),
        }
    }
}

pub(crate) fn unit(n: usize, i: usize, j: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    m[(i, j)] = 1.0;
    m
}

/// `E_ii - E_{i+1,i+1}` for `i` in the block `[p, p + k)`.
pub(crate) fn coroot_basis(n: usize, p: usize, k: usize) -> Vec<DMatrix<f64>> {
    (p..p + k - 1)
        .map(|i| {
            let mut m = DMatrix::zeros(n, n);
            m[(i, i)] = 1.0;
            m[(i + 1, i + 1)] = -1.0;
            m
        })
        .collect()
}

/// Coordinates of `m` in the span of `basis` by least squares, with the residual norm.
pub(crate) fn coordinates_in(basis: &[DMatrix<f64>], m: &DMatrix<f64>) -> (Vec<f64>, f64) {
    if basis.is_empty() {
        return (Vec::new(), m.norm());
    }
    let rows = m.len();
    let a = DMatrix::from_fn(rows, basis.len(), |r, c| basis[c].as_slice()[r]);
    let b = nalgebra::DVector::from_column_slice(m.as_slice());
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-12).expect("svd solve with computed factors");
    let resid = (&a * &x - &b).norm();
    (x.iter().copied().collect(), resid)
}

/// The linear form `Y -> -tr(ad_h Y)` on the Lie algebra of `H`, as its values on
/// the basis returned by [`SubgroupSpec::lie_algebra_basis`].
pub fn modular_character(h: &SubgroupSpec) -> Result<Vec<f64>> {
    if let SubgroupSpec::DiscreteGenerators { .. } = h {
        return Err(Error::Unsupported(
            "discrete subgroups carry the counting measure; no modular character".into(),
        ));
    }
    let basis = h.lie_algebra_basis()?;
    let mut out = Vec::with_capacity(basis.len());
    for y in &basis {
        let mut trace = 0.0;
        for (i, z) in basis.iter().enumerate() {
            let bracket = y * z - z * y;
            let (coords, _) = coordinates_in(&basis, &bracket);
            trace += coords[i];
        }
        out.push(if trace == 0.0 { 0.0 } else { -trace });
    }
    Ok(out)
}

/// Bounded coordinate regions of `SL(n, R)` used for Monte-Carlo integration.
///
/// Each variant fixes a normalization of Haar measure: `Bruhat` and `Entries`
/// use Lebesgue measure on chart coordinates times the chart density, while
/// `CartanBall` uses the KAK normalization with `K` of total mass one.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "chart", rename_all = "snake_case")]
pub enum BoxRegion {
    /// `nbar(lower) * exp(diag(log_diag)) * n(upper)`; strictly lower and strictly
    /// upper entries in row-major order, `n - 1` free log-diagonal entries.
    Bruhat {
        n: usize,
        lower: Vec<(f64, f64)>,
        log_diag: Vec<(f64, f64)>,
        upper: Vec<(f64, f64)>,
    },
    /// All entries but the last range over `center +- half_width`; the last is solved from `det = 1`.
    Entries { n: usize, center: Vec<f64>, half_width: f64 },
    /// `{g : |kappa(g)| <= radius}`.
    CartanBall { n: usize, radius: f64 },
}

impl BoxRegion {
    /// A cube of half-width `w` around the identity in Bruhat coordinates.
    pub fn bruhat_cube(n: usize, w: f64) -> Self {
        let m = n * (n - 1) / 2;
        Self::Bruhat { n, lower: vec![(-w, w); m], log_diag: vec![(-w, w); n - 1], upper: vec![(-w, w); m] }
    }

    pub fn entries_around_identity(n: usize, half_width: f64) -> Self {
        let center = (0..n * n).map(|k| if k / n == k % n { 1.0 } else { 0.0 }).collect();
        Self::Entries { n, center, half_width }
    }

    pub fn n(&self) -> usize {
        match self {
            Self::Bruhat { n, .. } | Self::Entries { n, .. } | Self::CartanBall { n, .. } => *n,
        }
    }

    fn validate(&self) -> Result<()> {
        let n = self.n();
        if n < 2 {
            return Err(Error::Domain("ambient rank must be at least 2".into()));
        }
        let bad = |lo: f64, hi: f64| !(lo < hi) || !lo.is_finite() || !hi.is_finite();
        match self {
            Self::Bruhat { lower, log_diag, upper, .. } => {
                let m = n * (n - 1) / 2;
                if lower.len() != m || upper.len() != m || log_diag.len() != n - 1 {
                    return Err(Error::Domain("Bruhat box has wrong coordinate count".into()));
                }
                if lower.iter().chain(log_diag).chain(upper).any(|&(lo, hi)| bad(lo, hi)) {
                    return Err(Error::Domain("empty Bruhat box".into()));
                }
            }
            Self::Entries { center, half_width, .. } => {
                if center.len() != n * n {
                    return Err(Error::Domain("entry box center has wrong size".into()));
                }
                if !(*half_width > 0.0) {
                    return Err(Error::Domain("empty entry box".into()));
                }
            }
            Self::CartanBall { radius, .. } => {
                if !(*radius > 0.0) {
                    return Err(Error::Domain("empty Cartan ball".into()));
                }
            }
        }
        Ok(())
    }

    /// Haar volume in this region's normalization.
    pub fn volume(&self) -> Result<f64> {
        self.validate()?;
        let n = self.n();
        match self {
            Self::Bruhat { lower, log_diag, upper, .. } => {
                let flat: f64 = lower.iter().chain(upper).map(|(lo, hi)| hi - lo).product();
                // 2 rho(log a) = sum_i (n + 1 - 2i) x_i with x_n = -(x_1 + ... + x_{n-1})
                let diag: f64 = (0..n - 1)
                    .map(|i| {
                        let c = two_rho_free_coefficient(n, i);
                        let (lo, hi) = log_diag[i];
                        if c == 0.0 {
                            hi - lo
                        } else {
                            ((c * hi).exp() - (c * lo).exp()) / c
                        }
                    })
                    .product();
                Ok(flat * diag)
            }
            Self::Entries { .. } => Err(Error::Unsupported(
                "entry boxes have no closed-form volume; estimate it with sample_box".into(),
            )),
            Self::CartanBall { radius, .. } => Ok(cartan_ball_chamber_integral(n, *radius)),
        }
    }

    /// Membership test for an arbitrary group element.
    pub fn contains(&self, g: &GroupElement) -> Result<bool> {
        self.validate()?;
        let n = self.n();
        if g.n() != n {
            return Err(Error::DimensionMismatch { expected: n, got: g.n() });
        }
        match self {
            Self::Bruhat { lower, log_diag, upper, .. } => {
                let Some((l, d, u)) = bruhat_coordinates(&g.matrix()) else {
                    return Ok(false);
                };
                let inside = |v: &[f64], b: &[(f64, f64)]| v.iter().zip(b).all(|(x, &(lo, hi))| *x >= lo && *x <= hi);
                Ok(inside(&l, lower) && inside(&d, log_diag) && inside(&u, upper))
            }
            Self::Entries { center, half_width, .. } => {
                let m = g.matrix();
                Ok((0..n * n - 1).all(|k| (m[(k / n, k % n)] - center[k]).abs() <= *half_width))
            }
            Self::CartanBall { radius, .. } => Ok(cartan_projection(g)?.norm() <= *radius),
        }
    }
}

/// Coefficient of the free log-diagonal coordinate `x_i` (`i < n - 1`) in `2 rho(log a)`.
fn two_rho_free_coefficient(n: usize, i: usize) -> f64 {
    // (n + 1 - 2(i+1)) - (n + 1 - 2n) = 2n - 2 - 2i ... expressed directly:
    let c_i = n as f64 + 1.0 - 2.0 * (i as f64 + 1.0);
    let c_last = n as f64 + 1.0 - 2.0 * n as f64;
    c_i - c_last
}

/// `(lower, log_diag, upper)` with `g = nbar * a * n`, when `g` lies in the open Bruhat cell
/// (all leading principal minors positive).
pub fn bruhat_coordinates(m: &DMatrix<f64>) -> Option<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let n = m.nrows();
    // Doolittle LU without pivoting: m = L * U, L unit lower, U upper
    let mut l = DMatrix::<f64>::identity(n, n);
    let mut u = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let s: f64 = (0..i).map(|k| l[(i, k)] * u[(k, j)]).sum();
            u[(i, j)] = m[(i, j)] - s;
        }
        if !(u[(i, i)] > 0.0) {
            return None;
        }
        for j in i + 1..n {
            let s: f64 = (0..i).map(|k| l[(j, k)] * u[(k, i)]).sum();
            l[(j, i)] = (m[(j, i)] - s) / u[(i, i)];
        }
    }
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    for i in 0..n {
        for j in 0..i {
            lower.push(l[(i, j)]);
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            upper.push(u[(i, j)] / u[(i, i)]);
        }
    }
    let log_diag = (0..n - 1).map(|i| u[(i, i)].ln()).collect();
    Some((lower, log_diag, upper))
}

pub fn bruhat_element(n: usize, lower: &[f64], log_diag: &[f64], upper: &[f64]) -> GroupElement {
    let mut l = DMatrix::<f64>::identity(n, n);
    let mut u = DMatrix::<f64>::identity(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..i {
            l[(i, j)] = lower[k];
            k += 1;
        }
    }
    k = 0;
    for i in 0..n {
        for j in i + 1..n {
            u[(i, j)] = upper[k];
            k += 1;
        }
    }
    let last = -log_diag.iter().sum::<f64>();
    let a = DMatrix::from_fn(n, n, |i, j| {
        if i != j {
            0.0
        } else if i + 1 < n {
            log_diag[i].exp()
        } else {
            last.exp()
        }
    });
    GroupElement::from_matrix_unchecked(l * a * u)
}

/// `int_{a+ cap ball(r)} prod_{i<j} sinh(x_i - x_j) dX` over the traceless chamber,
/// with `dX` Lebesgue measure in the orthonormal coordinates of the traceless subspace.
pub fn cartan_ball_chamber_integral(n: usize, radius: f64) -> f64 {
    if n == 2 {
        // X = (x, -x), |X| = sqrt(2) x, density sinh(2x), dX = sqrt(2) dx
        let xmax = radius / 2f64.sqrt();
        return 2f64.sqrt() * ((2.0 * xmax).cosh() - 1.0) / 2.0;
    }
    // midpoint rule on a cube grid in orthonormal coordinates of the traceless plane
    let basis = traceless_orthonormal_basis(n);
    let d = n - 1;
    let steps: usize = match d {
        2 => 800,
        3 => 120,
        _ => 40,
    };
    let h = 2.0 * radius / steps as f64;
    let mut total = 0.0;
    let mut idx = vec![0usize; d];
    loop {
        let y: Vec<f64> = idx.iter().map(|&i| -radius + (i as f64 + 0.5) * h).collect();
        if y.iter().map(|v| v * v).sum::<f64>() <= radius * radius {
            let x = embed_traceless(&basis, &y);
            if x.windows(2).all(|w| w[0] >= w[1]) {
                total += kak_weight(&x);
            }
        }
        let mut k = 0;
        loop {
            if k == d {
                return total * h.powi(d as i32);
            }
            idx[k] += 1;
            if idx[k] < steps {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn kak_weight(x: &[f64]) -> f64 {
    let mut w = 1.0;
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            w *= (x[i] - x[j]).sinh();
        }
    }
    w
}

/// Orthonormal basis of the traceless subspace of `R^n` (rows), via Helmert contrasts.
pub fn traceless_orthonormal_basis(n: usize) -> Vec<Vec<f64>> {
    (1..n)
        .map(|k| {
            let norm = ((k * (k + 1)) as f64).sqrt();
            (0..n)
                .map(|i| {
                    if i < k {
                        1.0 / norm
                    } else if i == k {
                        -(k as f64) / norm
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

pub fn embed_traceless(basis: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let n = basis[0].len();
    (0..n).map(|i| basis.iter().zip(y).map(|(b, c)| b[i] * c).sum()).collect()
}

/// Draws `count` Haar-weighted samples from `region`; weights are reciprocal sampling
/// densities so that weighted sums estimate Haar integrals over the region.
///
/// The stream is a pure function of `(seed, count)`: sample `i` comes from the
/// substream of its fixed-size chunk, so parallel evaluation does not change it.
pub fn sample_box(region: &BoxRegion, count: usize, seed: u64) -> Result<Vec<(GroupElement, f64)>> {
    region.validate()?;
    if count == 0 {
        return Ok(Vec::new());
    }
    let n = region.n();
    match region {
        BoxRegion::Bruhat { lower, log_diag, upper, .. } => {
            let flat: f64 = lower.iter().chain(log_diag).chain(upper).map(|(lo, hi)| hi - lo).product();
            let samples = chunked_map(count, seed, |rng, _| {
                let draw = |b: &[(f64, f64)], rng: &mut sampling::Stream| -> Vec<f64> {
                    b.iter().map(|&(lo, hi)| lo + (hi - lo) * rng.gen::<f64>()).collect()
                };
                let l = draw(lower, rng);
                let d = draw(log_diag, rng);
                let u = draw(upper, rng);
                let density: f64 = d
                    .iter()
                    .enumerate()
                    .map(|(i, x)| two_rho_free_coefficient(n, i) * x)
                    .sum::<f64>()
                    .exp();
                (bruhat_element(n, &l, &d, &u), flat * density / count as f64)
            });
            Ok(samples)
        }
        BoxRegion::Entries { center, half_width, .. } => {
            let w = *half_width;
            let free = n * n - 1;
            let flat = (2.0 * w).powi(free as i32);
            let raw = chunked_map(count, seed, |rng, _| {
                let mut m = DMatrix::<f64>::zeros(n, n);
                for k in 0..free {
                    m[(k / n, k % n)] = center[k] + w * (2.0 * rng.gen::<f64>() - 1.0);
                }
                let cof = m.view((0, 0), (n - 1, n - 1)).determinant();
                m[(n - 1, n - 1)] = 0.0;
                let rest = m.determinant();
                (m, cof, rest)
            });
            let mut out = Vec::with_capacity(count);
            for (mut m, cof, rest) in raw {
                if cof.abs() < 1e-12 {
                    return Err(Error::Domain("entry box meets matrices with no det-one completion".into()));
                }
                m[(n - 1, n - 1)] = (1.0 - rest) / cof;
                out.push((GroupElement::from_matrix_unchecked(m), flat / cof.abs() / count as f64));
            }
            Ok(out)
        }
        BoxRegion::CartanBall { radius, .. } => {
            let vol = cartan_ball_chamber_integral(n, *radius);
            let r = *radius;
            let samples = chunked_map(count, seed, |rng, _| {
                let x = sample_chamber_point(n, r, rng);
                let k1 = random_rotation(n, rng);
                let k2 = random_rotation(n, rng);
                let a = GroupElement::exp_cartan(&CartanVector { coords: x });
                (&(&k1 * &a) * &k2, vol / count as f64)
            });
            Ok(samples)
        }
    }
}


/// Point of `a+ cap ball(r)` with density proportional to the KAK weight.
pub(crate) fn sample_chamber_point<R: Rng + ?Sized>(n: usize, r: f64, rng: &mut R) -> Vec<f64> {
    if n == 2 {
        // inverse CDF of sinh(2x) on [0, r / sqrt 2]
        let xmax = r / 2f64.sqrt();
        let u: f64 = rng.gen();
        let x = (1.0 + u * ((2.0 * xmax).cosh() - 1.0)).acosh() / 2.0;
        return vec![x, -x];
    }
    let basis = traceless_orthonormal_basis(n);
    // the KAK weight is maximal at the boundary point along rho's direction
    let bound = {
        let rho: Vec<f64> = (0..n).map(|i| (n as f64 + 1.0 - 2.0 * (i as f64 + 1.0)) / 2.0).collect();
        let norm = rho.iter().map(|x| x * x).sum::<f64>().sqrt();
        let dir: Vec<f64> = rho.iter().map(|x| x / norm * r).collect();
        // the product of sinh of differences is bounded by exp of the sum of differences
        let s: f64 = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).map(|(i, j)| dir[i] - dir[j]).sum();
        s.exp()
    };
    loop {
        let y: Vec<f64> = (0..n - 1).map(|_| r * (2.0 * rng.gen::<f64>() - 1.0)).collect();
        if y.iter().map(|v| v * v).sum::<f64>() > r * r {
            continue;
        }
        let mut x = embed_traceless(&basis, &y);
        x.sort_by(|a, b| b.total_cmp(a));
        if rng.gen::<f64>() * bound <= kak_weight(&x) {
            return x;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rational::{q, q_frac};

    fn golden_log() -> f64 {
        ((1.0 + 5f64.sqrt()) / 2.0).ln()
    }

    #[test]
    fn cartan_projection_examples() {
        let id = GroupElement::identity(3);
        assert!(cartan_projection(&id).unwrap().norm() < 1e-12);
        let rot = GroupElement::rotation(3, 0, 2, 0.7);
        assert!(cartan_projection(&rot).unwrap().norm() < 1e-12);
        // eigenvalues of g^T g for [[1,1],[0,1]] in closed form: (3 +- sqrt 5)/2
        let g = GroupElement::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        let oracle = (0.5 * (3.0 + 5f64.sqrt())).sqrt().ln();
        let k = cartan_projection(&g).unwrap();
        assert!((k.coords()[0] - oracle).abs() < 1e-12);
        assert!((k.coords()[0] - golden_log()).abs() < 1e-12);
        assert!((k.coords()[0] - 0.4812).abs() < 1e-4);
        assert!(k.is_dominant());
    }

    #[test]
    fn cartan_projection_rejects_non_finite() {
        let m = DMatrix::from_row_slice(2, 2, &[f64::NAN, 0.0, 0.0, 1.0]);
        let g = GroupElement::from_matrix_unchecked(m);
        assert!(matches!(cartan_projection(&g), Err(Error::NumericInput(_))));
    }

    #[test]
    fn iwasawa_projection_examples() {
        assert!(iwasawa_projection(&GroupElement::identity(2)).unwrap().norm() < 1e-15);
        let a = GroupElement::from_rows(&[vec![2.0, 0.0], vec![0.0, 0.5]]).unwrap();
        let eta = iwasawa_projection(&a).unwrap();
        assert!((eta.coords()[0] - 2f64.ln()).abs() < 1e-14);
        // Gram-Schmidt by hand: first column (1,1) has length sqrt 2
        let g = GroupElement::from_rows(&[vec![1.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let eta = iwasawa_projection(&g).unwrap();
        assert!((eta.coords()[0] - 0.5 * 2f64.ln()).abs() < 1e-14);
        assert!((eta.coords()[0] - 0.3466).abs() < 1e-4);
    }

    #[test]
    fn exact_elements_multiply_and_invert() {
        let t = GroupElement::from_rows_exact(vec![vec![q(1), q(1)], vec![q(0), q(1)]]).unwrap();
        let s = GroupElement::from_rows_exact(vec![vec![q(0), q(-1)], vec![q(1), q(0)]]).unwrap();
        let st = &s * &t;
        let back = &st * &st.inverse();
        assert_eq!(back.exact_entries().unwrap(), GroupElement::identity_exact(2).exact_entries().unwrap());
        let half = GroupElement::from_rows_exact(vec![vec![q(2), q(0)], vec![q(0), q_frac(1, 2)]]).unwrap();
        assert!(half.is_exact());
        assert!(GroupElement::from_rows_exact(vec![vec![q(2), q(0)], vec![q(0), q(1)]]).is_err());
    }

    #[test]
    fn rejects_bad_determinant() {
        assert!(GroupElement::from_rows(&[vec![2.0, 0.0], vec![0.0, 1.0]]).is_err());
    }

    #[test]
    fn modular_characters_vanish() {
        for spec in [
            SubgroupSpec::DiagonalTorus { n: 2 },
            SubgroupSpec::UpperUnipotent { n: 2 },
            SubgroupSpec::UpperUnipotent { n: 3 },
            SubgroupSpec::block_reductive(3, vec![2], vec![0]).unwrap(),
        ] {
            let chi = modular_character(&spec).unwrap();
            assert!(chi.iter().all(|x| x.abs() < 1e-12), "{spec:?}: {chi:?}");
        }
        let gens = vec![GroupElement::identity(2)];
        assert!(matches!(
            modular_character(&SubgroupSpec::discrete(gens).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn block_layout_validated() {
        assert!(SubgroupSpec::block_reductive(3, vec![2, 2], vec![0, 1]).is_err());
        assert!(SubgroupSpec::block_reductive(3, vec![4], vec![0]).is_err());
        assert!(SubgroupSpec::block_reductive(4, vec![2, 2], vec![0, 2]).is_ok());
        assert!(SubgroupSpec::discrete(Vec::new()).is_err());
    }

    #[test]
    fn sample_box_contract() {
        let region = BoxRegion::bruhat_cube(2, 0.3);
        assert!(sample_box(&region, 0, 1).unwrap().is_empty());
        let a = sample_box(&region, 500, 9).unwrap();
        let b = sample_box(&region, 500, 9).unwrap();
        for ((x, wx), (y, wy)) in a.iter().zip(&b) {
            assert_eq!(x.matrix(), y.matrix());
            assert_eq!(wx, wy);
        }
        for (g, _) in &a {
            assert!(region.contains(g).unwrap());
        }
        let empty = BoxRegion::Bruhat { n: 2, lower: vec![(0.0, 0.0)], log_diag: vec![(0.0, 1.0)], upper: vec![(0.0, 1.0)] };
        assert!(sample_box(&empty, 10, 0).is_err());
        assert!(sample_box(&BoxRegion::CartanBall { n: 2, radius: 0.0 }, 10, 0).is_err());
    }

    #[test]
    fn bruhat_volume_matches_grid_quadrature() {
        let region = BoxRegion::Bruhat { n: 2, lower: vec![(-0.2, 0.3)], log_diag: vec![(-0.4, 0.5)], upper: vec![(0.1, 0.6)] };
        // midpoint grid of the density exp(2y) over the box
        let steps = 2000;
        let h = 0.9 / steps as f64;
        let grid: f64 = (0..steps).map(|i| (2.0 * (-0.4 + (i as f64 + 0.5) * h)).exp() * h).sum::<f64>() * 0.5 * 0.5;
        let samples = sample_box(&region, 40_000, 3).unwrap();
        let est: f64 = samples.iter().map(|(_, w)| w).sum();
        let mean = est / samples.len() as f64;
        let var = samples.iter().map(|(_, w)| (w - mean).powi(2)).sum::<f64>() / (samples.len() - 1) as f64;
        let se = (var * samples.len() as f64).sqrt();
        assert!((est - grid).abs() <= 3.0 * se + 1e-12, "est {est} grid {grid} se {se}");
        assert!((region.volume().unwrap() - grid).abs() < 1e-6);
    }

    #[test]
    fn entries_box_samples_have_unit_determinant() {
        let region = BoxRegion::entries_around_identity(3, 0.1);
        for (g, w) in sample_box(&region, 200, 4).unwrap() {
            assert!((g.det() - 1.0).abs() < 1e-12);
            assert!(w > 0.0);
            assert!(region.contains(&g).unwrap());
        }
    }

    #[test]
    fn cartan_ball_samples_stay_inside() {
        for n in [2, 3] {
            let region = BoxRegion::CartanBall { n, radius: 0.7 };
            for (g, _) in sample_box(&region, 300, 5).unwrap() {
                assert!(cartan_projection(&g).unwrap().norm() <= 0.7 + 1e-9);
            }
        }
    }

    #[test]
    fn chamber_integral_n3_matches_polar_oracle() {
        // polar coordinates in the traceless plane: the chamber is a 60 degree sector
        let r = 0.8;
        let basis = traceless_orthonormal_basis(3);
        let (nr, na) = (400, 400);
        let mut total = 0.0;
        for i in 0..nr {
            let rho = (i as f64 + 0.5) * r / nr as f64;
            for j in 0..na {
                let phi = (j as f64 + 0.5) * 2.0 * PI / na as f64;
                let x = embed_traceless(&basis, &[rho * phi.cos(), rho * phi.sin()]);
                if x.windows(2).all(|w| w[0] >= w[1]) {
                    total += kak_weight(&x) * rho * (r / nr as f64) * (2.0 * PI / na as f64);
                }
            }
        }
        let grid = cartan_ball_chamber_integral(3, r);
        assert!((grid - total).abs() / total < 5e-3, "{grid} vs {total}");
    }
}
