//! Named `(G, H)` pairs with precomputed weight data and expected exponents.

use num_traits::Zero;

use crate::beta::{ExponentKind, PairSpec};
use crate::error::{Error, Result};
use crate::matgroup::{GroupElement, SubgroupSpec};
use crate::rational::{q, q_frac, Q};
use crate::rootdata::{block_coroot_embedding, restrict_weights, restricted_roots, Weight, WeightSystem};

/// An expected exponent with where it comes from.
#[derive(Clone, Debug, PartialEq)]
pub struct Expected {
    pub value: Q,
    pub kind: ExponentKind,
    pub provenance: &'static str,
}

#[derive(Clone, Debug)]
pub struct CatalogEntry {
    pub name: String,
    pub n: usize,
    pub h_spec: SubgroupSpec,
    /// Weight data on the split torus of `H`; absent for discrete `H`.
    pub pair: Option<PairSpec>,
    /// Columns map `a_H` (simple-coroot coordinates) into the ambient diagonal.
    pub embedding: Vec<Vec<Q>>,
    pub expected: Option<Expected>,
    /// Word-ball depths for discrete `H`.
    pub depth_schedule: Vec<usize>,
    pub description: String,
}

impl CatalogEntry {
    pub fn is_discrete(&self) -> bool {
        matches!(self.h_spec, SubgroupSpec::DiscreteGenerators { .. })
    }

    /// Connected `H` with a nonzero split torus, where `delta` can be computed by quadrature.
    pub fn is_reductive(&self) -> bool {
        matches!(self.h_spec, SubgroupSpec::BlockReductive { .. } | SubgroupSpec::DiagonalTorus { .. })
    }
}

/// Weight systems of `h = sum of sl(k) blocks` and of `g = sl(n)` on the block coroot coordinates.
fn block_pair(label: &str, n: usize, blocks: &[(usize, usize)]) -> Result<(PairSpec, Vec<Vec<Q>>)> {
    let emb = block_coroot_embedding(n, blocks);
    let roots = restricted_roots(n)?;
    let inside = |c: &[Q]| {
        blocks.iter().any(|&(k, p)| c.iter().enumerate().all(|(i, x)| x.is_zero() || (p..p + k).contains(&i)))
    };
    let h_weights: Vec<Weight> = roots.weights().iter().filter(|w| inside(&w.covector)).cloned().collect();
    let rank: usize = blocks.iter().map(|&(k, _)| k - 1).sum();
    let h_roots = WeightSystem::new_traceless(n, h_weights, rank as u32)?;
    let h = restrict_weights(&h_roots, &emb)?;
    let g = restrict_weights(&roots, &emb)?;
    Ok((PairSpec::new(label, h, g)?, emb))
}

fn reductive(n: usize, k: usize) -> Result<CatalogEntry> {
    let name = if k == n { format!("g-equals-h-sl{n}") } else { format!("sl{k}-in-sl{n}") };
    let (pair, embedding) = block_pair(&name, n, &[(k, 0)])?;
    let (value, provenance) = if k == n {
        (q(1), "H = G: the two rho-functions coincide")
    } else {
        (
            q_frac(k as i64 - 1, n as i64 - 1),
            "rho_h / rho_g on the block: sum |y_i - y_j| against that plus (n - k) sum |y_i|, maximal along rho of the block",
        )
    };
    Ok(CatalogEntry {
        description: if k == n {
            format!("SL({n}, R) as a subgroup of itself")
        } else {
            format!("SL({k}, R) in the upper-left corner of SL({n}, R)")
        },
        name,
        n,
        h_spec: SubgroupSpec::block_reductive(n, vec![k], vec![0])?,
        pair: Some(pair),
        embedding,
        expected: Some(Expected { value, kind: ExponentKind::BetaReductive, provenance }),
        depth_schedule: Vec::new(),
    })
}

fn torus(n: usize) -> Result<CatalogEntry> {
    let name = format!("torus-in-sl{n}");
    let embedding = block_coroot_embedding(n, &[(n, 0)]);
    let h = WeightSystem::new(n - 1, Vec::new(), n as u32 - 1)?;
    let g = restrict_weights(&restricted_roots(n)?, &embedding)?;
    Ok(CatalogEntry {
        description: format!("diagonal split torus of SL({n}, R)"),
        pair: Some(PairSpec::new(&name, h, g)?),
        name,
        n,
        h_spec: SubgroupSpec::DiagonalTorus { n },
        embedding,
        expected: Some(Expected {
            value: q(0),
            kind: ExponentKind::BetaReductive,
            provenance: "the torus acts trivially on its own Lie algebra, so rho_h = 0",
        }),
        depth_schedule: Vec::new(),
    })
}

fn unipotent(n: usize) -> Result<CatalogEntry> {
    let name = format!("unipotent-in-sl{n}");
    let dim_n = (n * (n - 1) / 2) as u32;
    let h = WeightSystem::new(0, Vec::new(), dim_n)?;
    let g = WeightSystem::new(0, Vec::new(), (n * n - 1) as u32)?;
    Ok(CatalogEntry {
        description: format!("upper unipotent subgroup of SL({n}, R)"),
        pair: Some(PairSpec::new(&name, h, g)?),
        name,
        n,
        h_spec: SubgroupSpec::UpperUnipotent { n },
        embedding: vec![Vec::new(); n],
        expected: Some(Expected {
            value: q(0),
            kind: ExponentKind::BetaAlgebraic,
            provenance: "no split torus: the supremum is over the zero space, 0/0 = 0",
        }),
        depth_schedule: Vec::new(),
    })
}

fn exact(rows: &[[i64; 2]; 2]) -> Result<GroupElement> {
    GroupElement::from_rows_exact(rows.iter().map(|r| r.iter().map(|&x| q(x)).collect()).collect())
}

fn sl2z() -> Result<CatalogEntry> {
    Ok(CatalogEntry {
        name: "sl2z-lattice".into(),
        n: 2,
        h_spec: SubgroupSpec::discrete(vec![exact(&[[0, -1], [1, 0]])?, exact(&[[1, 1], [0, 1]])?])?,
        pair: None,
        embedding: Vec::new(),
        expected: Some(Expected {
            value: q(1),
            kind: ExponentKind::Delta,
            provenance: "a lattice has the volume growth of G itself",
        }),
        depth_schedule: vec![14, 16, 18],
        description: "SL(2, Z) generated by S and T".into(),
    })
}

fn cyclic() -> Result<CatalogEntry> {
    let g = GroupElement::from_rows_exact(vec![vec![q(2), q(0)], vec![q(0), q_frac(1, 2)]])?;
    Ok(CatalogEntry {
        name: "cyclic-hyperbolic".into(),
        n: 2,
        h_spec: SubgroupSpec::discrete(vec![g])?,
        pair: None,
        embedding: Vec::new(),
        expected: Some(Expected {
            value: q(0),
            kind: ExponentKind::Delta,
            provenance: "orbit counts grow linearly in the radius",
        }),
        depth_schedule: vec![32, 64, 128],
        description: "cyclic group generated by diag(2, 1/2)".into(),
    })
}

/// Every named pair, in a fixed order.
pub fn catalog_entries() -> Vec<CatalogEntry> {
    let mut out = Vec::new();
    for n in 3..=6 {
        for k in 2..n {
            out.push(reductive(n, k));
        }
    }
    for n in 2..=3 {
        out.push(torus(n));
        out.push(unipotent(n));
        out.push(reductive(n, n));
    }
    out.push(sl2z());
    out.push(cyclic());
    out.into_iter().map(|e| e.expect("catalog entries are well formed")).collect()
}

pub fn entry(name: &str) -> Result<CatalogEntry> {
    catalog_entries().into_iter().find(|e| e.name == name).ok_or_else(|| Error::UnknownEntry(name.into()))
}

/// Replaces a catalog name by the subgroup it stands for.
pub fn resolve(spec: &SubgroupSpec) -> Result<SubgroupSpec> {
    match spec {
        SubgroupSpec::CatalogName(name) => Ok(entry(name)?.h_spec),
        other => Ok(other.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beta::beta_exact;
    use crate::rhofun::{adjoint_weight_system, OnSpace};

    #[test]
    fn names_are_unique_and_required_entries_exist() {
        let all = catalog_entries();
        let mut names: Vec<&str> = all.iter().map(|e| e.name.as_str()).collect();
        names.sort();
        names.dedup();
        assert_eq!(names.len(), all.len());
        for need in ["sl2-in-sl3", "sl2-in-sl4", "sl5-in-sl6", "torus-in-sl2", "unipotent-in-sl3", "g-equals-h-sl3", "sl2z-lattice", "cyclic-hyperbolic"] {
            assert!(entry(need).is_ok(), "{need}");
        }
        assert!(matches!(entry("nope"), Err(Error::UnknownEntry(_))));
    }

    #[test]
    fn weight_data_is_reproducible_from_the_subgroup() {
        for e in catalog_entries().iter().filter(|e| !e.is_discrete()) {
            let pair = e.pair.as_ref().unwrap();
            let basis = e.h_spec.lie_algebra_basis().unwrap();
            let cartan = e.h_spec.cartan_basis().unwrap();
            if cartan.is_empty() {
                assert_eq!(pair.dim, 0, "{}", e.name);
                continue;
            }
            let h = adjoint_weight_system(&basis, &cartan, OnSpace::SelfSpace).unwrap();
            let g = adjoint_weight_system(&basis, &cartan, OnSpace::Ambient).unwrap();
            assert_eq!(h, pair.h_system, "{}", e.name);
            assert_eq!(g, pair.g_system, "{}", e.name);
        }
    }

    #[test]
    fn expected_betas_match_the_solver() {
        for e in catalog_entries().iter().filter(|e| !e.is_discrete()) {
            let b = beta_exact(e.pair.as_ref().unwrap()).unwrap();
            assert_eq!(b.beta, e.expected.as_ref().unwrap().value, "{}", e.name);
        }
    }

    #[test]
    fn resolves_names() {
        let s = resolve(&SubgroupSpec::CatalogName("torus-in-sl3".into())).unwrap();
        assert!(matches!(s, SubgroupSpec::DiagonalTorus { n: 3 }));
        assert!(resolve(&SubgroupSpec::CatalogName("x".into())).is_err());
    }
}
