//! Rho-functions `rho_V(Y) = (1/2) sum |Re lambda_i(Y)|` from weight systems or raw matrices.

use nalgebra::DMatrix;
use num_traits::{Signed, Zero};
use rand::Rng;

use crate::error::{Error, Result};
use crate::matgroup::{coordinates_in, unit};
use crate::rational::{self, q, Q};
use crate::rootdata::{Weight, WeightSystem};
use crate::sampling;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RhoFunction {
    pub system: WeightSystem,
}

impl RhoFunction {
    pub fn new(system: WeightSystem) -> Self {
        Self { system }
    }

    pub fn dim(&self) -> usize {
        self.system.dim()
    }
}

fn check_dim(f: &RhoFunction, got: usize) -> Result<()> {
    if f.dim() != got {
        return Err(Error::DimensionMismatch { expected: f.dim(), got });
    }
    Ok(())
}

/// `(1/2) sum m_i |lambda_i(x)|`, exactly.
pub fn rho_eval(f: &RhoFunction, x: &[Q]) -> Result<Q> {
    check_dim(f, x.len())?;
    let mut acc = Q::zero();
    for w in f.system.weights() {
        acc += rational::dot(&w.covector, x).abs() * q(w.multiplicity as i64);
    }
    Ok(acc / q(2))
}

/// Floating-point counterpart of [`rho_eval`].
pub fn rho_eval_f64(f: &RhoFunction, x: &[f64]) -> Result<f64> {
    check_dim(f, x.len())?;
    Ok(0.5 * f.system.weights().iter().map(|w| w.multiplicity as f64 * dot_f64(&w.covector, x).abs()).sum::<f64>())
}

pub(crate) fn dot_f64(c: &[Q], x: &[f64]) -> f64 {
    c.iter().zip(x).map(|(a, b)| rational::to_f64(a) * b).sum()
}

/// `(1/2) sum |Re lambda|` over the complex eigenvalues of `m` with algebraic multiplicity.
pub fn rho_of_matrix(m: &DMatrix<f64>) -> Result<f64> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch { expected: m.nrows(), got: m.ncols() });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::NumericInput("non-finite matrix entry".into()));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    let schur = nalgebra::linalg::Schur::try_new(m.clone(), 1e-14, 100_000)
        .ok_or_else(|| Error::NumericInput("eigenvalue iteration did not converge".into()))?;
    Ok(0.5 * schur.complex_eigenvalues().iter().map(|z| z.re.abs()).sum::<f64>())
}

/// `(1/2) sum m_i |lambda_i|` with the Euclidean norm of each covector.
pub fn lipschitz_bound(f: &RhoFunction) -> f64 {
    0.5 * f
        .system
        .weights()
        .iter()
        .map(|w| w.multiplicity as f64 * w.covector.iter().map(|c| rational::to_f64(c).powi(2)).sum::<f64>().sqrt())
        .sum::<f64>()
}

/// Which module the adjoint action is computed on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OnSpace {
    /// The span of the subalgebra basis itself.
    SelfSpace,
    /// All of `sl(n)`.
    Ambient,
}

const COMMUTE_TOL: f64 = 1e-9;
const IMAG_TOL: f64 = 1e-9;
const MAX_DEN: i64 = 64;
const ROUND_TOL: f64 = 1e-9;

/// Joint weights of `ad(cartan_basis)` on the chosen space, as covectors in the
/// coordinates of `cartan_basis`.
pub fn adjoint_weight_system(
    h_basis: &[DMatrix<f64>],
    cartan_basis: &[DMatrix<f64>],
    on_space: OnSpace,
) -> Result<WeightSystem> {
    let space = match on_space {
        OnSpace::SelfSpace => h_basis.to_vec(),
        OnSpace::Ambient => {
            let n = cartan_basis
                .first()
                .or_else(|| h_basis.first())
                .map(DMatrix::nrows)
                .ok_or_else(|| Error::Domain("cannot infer the ambient rank from empty bases".into()))?;
            sl_basis(n)
        }
    };
    let d = cartan_basis.len();
    if d == 0 {
        return WeightSystem::new(0, Vec::new(), space.len() as u32);
    }
    for (i, a) in cartan_basis.iter().enumerate() {
        for b in &cartan_basis[i + 1..] {
            if (a * b - b * a).amax() > COMMUTE_TOL {
                return Err(Error::Domain("cartan basis does not commute".into()));
            }
        }
    }
    let m = space.len();
    if m == 0 {
        return WeightSystem::new(d, Vec::new(), 0);
    }
    let ads = cartan_basis
        .iter()
        .map(|c| ad_matrix(c, &space))
        .collect::<Result<Vec<_>>>()?;

    for attempt in 0..8u64 {
        let mut rng = sampling::stream(0x5eed_ad, attempt);
        let coeffs: Vec<f64> = (0..d).map(|_| rng.gen_range(1.0..2.0)).collect();
        let mut comb = DMatrix::<f64>::zeros(m, m);
        for (c, a) in coeffs.iter().zip(&ads) {
            comb += a * *c;
        }
        let schur = nalgebra::linalg::Schur::try_new(comb.clone(), 1e-14, 100_000)
            .ok_or_else(|| Error::NumericInput("eigenvalue iteration did not converge".into()))?;
        let eig = schur.complex_eigenvalues();
        let scale = eig.iter().fold(1.0f64, |s, z| s.max(z.norm()));
        if eig.iter().any(|z| z.im.abs() > IMAG_TOL * scale) {
            return Err(Error::Domain("joint spectrum is not real".into()));
        }
        let mut vals: Vec<f64> = eig.iter().map(|z| z.re).collect();
        vals.sort_by(f64::total_cmp);
        let clusters = cluster(&vals, 1e-7 * scale);
        let mut weights = Vec::new();
        let mut inexact = false;
        let mut ok = true;
        for (mu, size) in clusters {
            let basis = null_space(&(&comb - DMatrix::identity(m, m) * mu), 1e-7 * scale);
            if basis.ncols() != size {
                ok = false;
                break;
            }
            let mut cov = Vec::with_capacity(d);
            for a in &ads {
                let image = a * &basis;
                // scalar action: image = lambda * basis
                let lambda = (basis.transpose() * &image).trace() / size as f64;
                if (&image - &basis * lambda).amax() > 1e-7 * scale.max(1.0) {
                    ok = false;
                    break;
                }
                match rational::rationalize(lambda, MAX_DEN, ROUND_TOL) {
                    Some(r) => cov.push(r),
                    None => {
                        inexact = true;
                        cov.push(rational::from_f64(lambda)?);
                    }
                }
            }
            if !ok {
                break;
            }
            weights.push(Weight { covector: cov, multiplicity: size as u32 });
        }
        if ok {
            return Ok(WeightSystem::new(d, weights, 0)?.with_inexact(inexact));
        }
    }
    Err(Error::Domain("could not separate joint eigenspaces".into()))
}

/// Standard basis of `sl(n)`: off-diagonal units then simple coroots.
pub fn sl_basis(n: usize) -> Vec<DMatrix<f64>> {
    let mut out = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j {
                out.push(unit(n, i, j));
            }
        }
    }
    out.extend(crate::matgroup::coroot_basis(n, 0, n));
    out
}

fn ad_matrix(c: &DMatrix<f64>, space: &[DMatrix<f64>]) -> Result<DMatrix<f64>> {
    let m = space.len();
    let mut out = DMatrix::zeros(m, m);
    for (j, b) in space.iter().enumerate() {
        let bracket = c * b - b * c;
        let (coords, resid) = coordinates_in(space, &bracket);
        if resid > 1e-8 * (1.0 + bracket.norm()) {
            return Err(Error::Domain("space is not invariant under the cartan basis".into()));
        }
        for (i, x) in coords.into_iter().enumerate() {
            out[(i, j)] = x;
        }
    }
    Ok(out)
}

fn cluster(sorted: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize, f64)> = Vec::new();
    for &v in sorted {
        match out.last_mut() {
            Some((_, count, sum)) if (v - *sum / *count as f64).abs() <= tol => {
                *count += 1;
                *sum += v;
            }
            _ => out.push((v, 1, v)),
        }
    }
    out.into_iter().map(|(_, c, s)| (s / c as f64, c)).collect()
}

/// Orthonormal basis (columns) of the numerical kernel of `a`.
fn null_space(a: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let m = a.ncols();
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.expect("requested right singular vectors");
    let cols: Vec<_> = (0..m)
        .filter(|&i| svd.singular_values[i] <= tol)
        .map(|i| v_t.row(i).transpose())
        .collect();
    if cols.is_empty() {
        DMatrix::zeros(m, 0)
    } else {
        DMatrix::from_columns(&cols)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matgroup::{coroot_basis, SubgroupSpec};
    use crate::rational::q_frac;
    use crate::rootdata::{block_coroot_embedding, restrict_weights, restricted_roots, rho_form};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn sl2_adjoint() -> RhoFunction {
        let ws = WeightSystem::new(
            1,
            vec![Weight { covector: vec![q(2)], multiplicity: 1 }, Weight { covector: vec![q(-2)], multiplicity: 1 }],
            1,
        )
        .unwrap();
        RhoFunction::new(ws)
    }

    fn sl3_restricted() -> RhoFunction {
        let emb = block_coroot_embedding(3, &[(2, 0)]);
        RhoFunction::new(restrict_weights(&restricted_roots(3).unwrap(), &emb).unwrap())
    }

    #[test]
    fn rho_eval_examples() {
        let f = sl2_adjoint();
        assert_eq!(rho_eval(&f, &[q(0)]).unwrap(), q(0));
        assert_eq!(rho_eval(&f, &[q(1)]).unwrap(), q(2));
        assert_eq!(rho_eval(&sl3_restricted(), &[q(1)]).unwrap(), q(4));
        assert!(rho_eval(&f, &[q(1), q(2)]).is_err());
    }

    #[test]
    fn rho_of_matrix_examples() {
        let nil = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 5.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0]);
        assert!(rho_of_matrix(&nil).unwrap().abs() < 1e-12);
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(rho_of_matrix(&rot).unwrap().abs() < 1e-12);
        // ad(diag(1,-1)) on the basis (E12, E21, H): diagonal (2, -2, 0)
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let basis = vec![unit(2, 0, 1), unit(2, 1, 0), coroot_basis(2, 0, 2).remove(0)];
        let ad = ad_matrix(&h, &basis).unwrap();
        let oracle = ad.diagonal().iter().map(|x| x.abs()).sum::<f64>() / 2.0;
        assert!((rho_of_matrix(&ad).unwrap() - 2.0).abs() < 1e-12);
        assert!((oracle - 2.0).abs() < 1e-12);
    }

    #[test]
    fn lipschitz_examples() {
        let empty = RhoFunction::new(WeightSystem::empty(2));
        assert_eq!(lipschitz_bound(&empty), 0.0);
        let f = sl2_adjoint();
        assert!((lipschitz_bound(&f) - 2.0).abs() < 1e-15);
        let tripled = RhoFunction::new(f.system.scaled(&q(3)).unwrap());
        assert!((lipschitz_bound(&tripled) - 6.0).abs() < 1e-15);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let g = sl3_restricted();
        let bound = lipschitz_bound(&g);
        for _ in 0..10_000 {
            let (x, y) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
            let diff = (rho_eval_f64(&g, &[x]).unwrap() - rho_eval_f64(&g, &[y]).unwrap()).abs();
            assert!(diff <= bound * (x - y).abs() + 1e-12);
        }
    }

    #[test]
    fn adjoint_examples() {
        let torus = SubgroupSpec::DiagonalTorus { n: 3 };
        let basis = torus.lie_algebra_basis().unwrap();
        let cartan = torus.cartan_basis().unwrap();
        let ws = adjoint_weight_system(&basis, &cartan, OnSpace::SelfSpace).unwrap();
        assert!(ws.is_empty());
        assert_eq!(ws.zero_multiplicity(), 2);

        let sl2 = SubgroupSpec::block_reductive(3, vec![2], vec![0]).unwrap();
        let basis = sl2.lie_algebra_basis().unwrap();
        let cartan = sl2.cartan_basis().unwrap();
        let own = adjoint_weight_system(&basis, &cartan, OnSpace::SelfSpace).unwrap();
        let amb = adjoint_weight_system(&basis, &cartan, OnSpace::Ambient).unwrap();
        let pairs = |ws: &WeightSystem| -> Vec<(Q, u32)> {
            ws.weights().iter().map(|w| (w.covector[0].clone(), w.multiplicity)).collect()
        };
        assert_eq!(pairs(&own), vec![(q(-2), 1), (q(2), 1)]);
        assert_eq!(pairs(&amb), vec![(q(-2), 1), (q(-1), 2), (q(1), 2), (q(2), 1)]);
        assert_eq!(amb.weights(), sl3_restricted().system.weights());
        assert!(!amb.is_inexact());

        let uni = SubgroupSpec::UpperUnipotent { n: 2 };
        let ws = adjoint_weight_system(&uni.lie_algebra_basis().unwrap(), &[], OnSpace::SelfSpace).unwrap();
        assert_eq!(ws.dim(), 0);
        assert!(ws.is_empty());
    }

    #[test]
    fn adjoint_rejects_bad_cartan() {
        let a = unit(2, 0, 1);
        let b = unit(2, 1, 0);
        assert!(adjoint_weight_system(&[], &[a.clone(), b], OnSpace::Ambient).is_err());
        let rot = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(matches!(
            adjoint_weight_system(&[], &[rot], OnSpace::Ambient),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn irrational_weights_flagged() {
        let c = DMatrix::from_row_slice(2, 2, &[2f64.sqrt(), 0.0, 0.0, -(2f64.sqrt())]);
        let ws = adjoint_weight_system(&[], &[c], OnSpace::Ambient).unwrap();
        assert!(ws.is_inexact());
        let half = DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, -0.25]);
        let ws = adjoint_weight_system(&[], &[half], OnSpace::Ambient).unwrap();
        assert_eq!(ws.weights()[1].covector, vec![q_frac(1, 2)]);
    }

    #[test]
    fn sl_k_self_weights_give_twice_rho() {
        for k in 2..=4 {
            let spec = SubgroupSpec::block_reductive(k, vec![k], vec![0]).unwrap();
            let ws = adjoint_weight_system(&spec.lie_algebra_basis().unwrap(), &spec.cartan_basis().unwrap(), OnSpace::SelfSpace)
                .unwrap();
            let f = RhoFunction::new(ws);
            let rho = rho_form(k).unwrap();
            // dominant X in coroot coordinates: y_i = partial sums of a decreasing diagonal
            let diag: Vec<Q> = (0..k).map(|i| q_frac(3 * (k - i) as i64 * (k - i) as i64, 7)).collect();
            let mean = diag.iter().fold(Q::zero(), |a, b| a + b) / q(k as i64);
            let diag: Vec<Q> = diag.into_iter().map(|v| v - &mean).collect();
            let y: Vec<Q> = (0..k - 1).map(|i| diag[..=i].iter().fold(Q::zero(), |a, b| a + b)).collect();
            let lhs = rho_eval(&f, &y).unwrap();
            let rhs = rational::dot(&rho, &diag) * q(2);
            assert_eq!(lhs, rhs, "k = {k}");
        }
    }

    #[test]
    fn matrix_and_weight_routes_agree() {
        let spec = SubgroupSpec::block_reductive(4, vec![3], vec![0]).unwrap();
        let cartan = spec.cartan_basis().unwrap();
        let f = RhoFunction::new(adjoint_weight_system(&[], &cartan, OnSpace::Ambient).unwrap());
        let space = sl_basis(4);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..100 {
            let y: Vec<f64> = (0..cartan.len()).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let mut x = DMatrix::zeros(4, 4);
            for (c, b) in y.iter().zip(&cartan) {
                x += b * *c;
            }
            let ad = ad_matrix(&x, &space).unwrap();
            let a = rho_of_matrix(&ad).unwrap();
            let b = rho_eval_f64(&f, &y).unwrap();
            assert!((a - b).abs() < 1e-7, "{a} vs {b}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig { cases: 200, rng_seed: proptest::test_runner::RngSeed::Fixed(21), ..ProptestConfig::default() })]

        #[test]
        fn symmetric_and_convex(x in -10.0f64..10.0, y in -10.0f64..10.0) {
            let f = sl3_restricted();
            let fx = rho_eval_f64(&f, &[x]).unwrap();
            prop_assert!((fx - rho_eval_f64(&f, &[-x]).unwrap()).abs() < 1e-12);
            let mid = rho_eval_f64(&f, &[(x + y) / 2.0]).unwrap();
            prop_assert!(mid <= (fx + rho_eval_f64(&f, &[y]).unwrap()) / 2.0 + 1e-12);
            prop_assert!(fx >= 0.0);
        }

        #[test]
        fn asymmetric_systems_are_homogeneous(a in -5i64..6, b in -5i64..6, x in -3.0f64..3.0, y in -3.0f64..3.0, t in 0.0f64..5.0) {
            let ws = WeightSystem::new(2, vec![Weight { covector: vec![q(a), q(b)], multiplicity: 2 }, Weight { covector: vec![q(1), q(0)], multiplicity: 1 }], 0).unwrap();
            let f = RhoFunction::new(ws);
            let base = rho_eval_f64(&f, &[x, y]).unwrap();
            let scaled = rho_eval_f64(&f, &[t * x, t * y]).unwrap();
            prop_assert!((scaled - t * base).abs() < 1e-9 * (1.0 + scaled.abs()));
        }
    }
}
