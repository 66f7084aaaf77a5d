//! Kraus and Stinespring representations recovered from Choi blocks.
//!
//! Dilations are stored in the Schrödinger picture: for source block `i` the
//! isometry block is `V_i = Σ_j Σ_α A_{ji,α} ⊗ |α⟩ : H_i → ⊕_j K_j ⊗ E_{ji}`
//! and the map is `x ↦ Tr_E(V x V^dagger)`. `V^dagger V = 1` is then the
//! trace-preservation condition.

use crate::algebra::{BlockOperator, MultiMatrixAlgebra};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::DEFAULT_TOL;

use super::CpMap;

/// Relative eigenvalue cutoff used when no explicit rank tolerance is given.
pub const KRAUS_RELATIVE_CUTOFF: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct KrausDecomposition {
    source: MultiMatrixAlgebra,
    target: MultiMatrixAlgebra,
    /// Indexed `j * source.num_blocks() + i`; each operator maps `H_i → K_j`.
    ops: Vec<Vec<CMat>>,
}

impl KrausDecomposition {
    pub fn new(
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
        ops: Vec<Vec<CMat>>,
    ) -> Result<Self> {
        let ns = source.num_blocks();
        if ops.len() != ns * target.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "{} Kraus families, expected {}",
                ops.len(),
                ns * target.num_blocks()
            )));
        }
        for (k, family) in ops.iter().enumerate() {
            let shape = (target.block_dim(k / ns), source.block_dim(k % ns));
            if family.iter().any(|a| a.shape() != shape) {
                return Err(Error::ShapeMismatch(format!(
                    "Kraus family {k} has operators that are not {shape:?}"
                )));
            }
        }
        Ok(Self {
            source: source.clone(),
            target: target.clone(),
            ops,
        })
    }

    pub fn source(&self) -> &MultiMatrixAlgebra {
        &self.source
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        &self.target
    }

    pub fn ops(&self, j: usize, i: usize) -> &[CMat] {
        &self.ops[j * self.source.num_blocks() + i]
    }

    pub fn families(&self) -> &[Vec<CMat>] {
        &self.ops
    }

    /// `Σ_α |A_α⟩⟩⟨⟨A_α|` per block pair.
    pub fn to_cpmap(&self) -> CpMap {
        let ns = self.source.num_blocks();
        let choi = self
            .ops
            .iter()
            .enumerate()
            .map(|(k, family)| {
                let d = self.target.block_dim(k / ns) * self.source.block_dim(k % ns);
                let mut c = linalg::zeros(d, d);
                for a in family {
                    let v = choi_vector(a);
                    c += &v * v.adjoint();
                }
                c
            })
            .collect();
        CpMap::from_choi_unchecked(&self.source, &self.target, choi).expect("shapes checked")
    }

    /// Gram matrix `G_{αβ} = Tr(A_α^dagger A_β)` of one family.
    pub fn gram(&self, j: usize, i: usize) -> CMat {
        let family = self.ops(j, i);
        CMat::from_fn(family.len(), family.len(), |a, b| linalg::hs(&family[a], &family[b]))
    }
}

/// `|A⟩⟩ = Σ_b A|b⟩ ⊗ |b⟩`, entry `(t, s)` at `t * cols + s`.
fn choi_vector(a: &CMat) -> CMat {
    let (rows, cols) = a.shape();
    CMat::from_fn(rows * cols, 1, |k, _| a[(k / cols, k % cols)])
}

/// Kraus operators from the eigendecomposition of every Choi block.
///
/// Eigenvalues at or below `rank_tol` are dropped; the default cutoff is
/// `1e-10` times the largest eigenvalue over all blocks of the map.
pub fn kraus_from_choi(m: &CpMap, rank_tol: Option<f64>) -> Result<KrausDecomposition> {
    m.ensure_cp(DEFAULT_TOL)?;
    let ns = m.source().num_blocks();
    let eigs: Vec<(Vec<f64>, CMat)> = m.choi_blocks().iter().map(linalg::eigh).collect();
    let lambda_max = eigs
        .iter()
        .flat_map(|(v, _)| v.iter().copied())
        .fold(0.0, f64::max);
    let cutoff = rank_tol.unwrap_or(KRAUS_RELATIVE_CUTOFF * lambda_max);
    let mut ops = Vec::with_capacity(eigs.len());
    for (k, (vals, vecs)) in eigs.iter().enumerate() {
        let (dj, di) = (
            m.target().block_dim(k / ns),
            m.source().block_dim(k % ns),
        );
        let mut family = Vec::new();
        // largest eigenvalues first
        for idx in (0..vals.len()).rev() {
            let lambda = vals[idx];
            if lambda <= cutoff {
                continue;
            }
            let w = lambda.sqrt();
            let a = CMat::from_fn(dj, di, |t, s| vecs[(t * di + s, idx)] * w);
            family.push(a);
        }
        ops.push(family);
    }
    KrausDecomposition::new(m.source(), m.target(), ops)
}

#[derive(Clone, Debug)]
pub struct StinespringDilation {
    kraus: KrausDecomposition,
}

impl StinespringDilation {
    pub fn from_kraus(kraus: KrausDecomposition) -> Self {
        Self { kraus }
    }

    pub fn kraus(&self) -> &KrausDecomposition {
        &self.kraus
    }

    pub fn source(&self) -> &MultiMatrixAlgebra {
        self.kraus.source()
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        self.kraus.target()
    }

    /// Environment dimensions `r_{ji}`, indexed `j * source.num_blocks() + i`.
    pub fn env_dims(&self) -> Vec<usize> {
        self.kraus.ops.iter().map(Vec::len).collect()
    }

    pub fn env_dim(&self, j: usize, i: usize) -> usize {
        self.kraus.ops(j, i).len()
    }

    /// `V_i : H_i → ⊕_j K_j ⊗ E_{ji}`; rows are ordered by `j`, then the
    /// `K_j` index, then the environment index.
    pub fn isometry_block(&self, i: usize) -> CMat {
        let target = self.target();
        let di = self.source().block_dim(i);
        let rows: usize = (0..target.num_blocks())
            .map(|j| target.block_dim(j) * self.env_dim(j, i))
            .sum();
        let mut v = linalg::zeros(rows, di);
        let mut offset = 0;
        for j in 0..target.num_blocks() {
            let family = self.kraus.ops(j, i);
            let r = family.len();
            for (alpha, a) in family.iter().enumerate() {
                for t in 0..target.block_dim(j) {
                    for s in 0..di {
                        v[(offset + t * r + alpha, s)] = a[(t, s)];
                    }
                }
            }
            offset += target.block_dim(j) * r;
        }
        v
    }

    /// `max_i ‖V_i^dagger V_i − 1‖_F`.
    pub fn isometry_defect(&self) -> f64 {
        (0..self.source().num_blocks())
            .map(|i| {
                let v = self.isometry_block(i);
                linalg::frobenius(&(v.adjoint() * &v - linalg::eye(v.ncols())))
            })
            .fold(0.0, f64::max)
    }

    pub fn apply(&self, x: &BlockOperator) -> Result<BlockOperator> {
        self.source().ensure_compatible(x.algebra())?;
        let ns = self.source().num_blocks();
        let out = (0..self.target().num_blocks())
            .map(|j| {
                let dj = self.target().block_dim(j);
                let mut acc = linalg::zeros(dj, dj);
                for i in 0..ns {
                    for a in self.kraus.ops(j, i) {
                        acc += a * x.block(i) * a.adjoint();
                    }
                }
                acc
            })
            .collect();
        BlockOperator::from_blocks(self.target(), out)
    }

    pub fn to_cpmap(&self) -> CpMap {
        self.kraus.to_cpmap()
    }

    /// Smallest Gram eigenvalue per block pair (`+inf` for empty families).
    /// The dilation is minimal iff every entry is strictly positive.
    pub fn gram_min_eigenvalues(&self) -> Vec<f64> {
        let ns = self.source().num_blocks();
        (0..self.kraus.ops.len())
            .map(|k| {
                let g = self.kraus.gram(k / ns, k % ns);
                if g.nrows() == 0 {
                    f64::INFINITY
                } else {
                    linalg::min_eigenvalue(&g)
                }
            })
            .collect()
    }

    /// Largest Gram condition number over all non-empty families.
    pub fn gram_condition(&self) -> f64 {
        let ns = self.source().num_blocks();
        (0..self.kraus.ops.len())
            .filter_map(|k| {
                let g = self.kraus.gram(k / ns, k % ns);
                if g.nrows() == 0 {
                    return None;
                }
                let (vals, _) = linalg::eigh(&g);
                let lo = vals[0];
                let hi = vals[vals.len() - 1];
                Some(if lo > 0.0 { hi / lo } else { f64::INFINITY })
            })
            .fold(1.0, f64::max)
    }

    pub fn is_minimal(&self, rel_tol: f64) -> bool {
        let ns = self.source().num_blocks();
        (0..self.kraus.ops.len()).all(|k| {
            let g = self.kraus.gram(k / ns, k % ns);
            if g.nrows() == 0 {
                return true;
            }
            let (vals, _) = linalg::eigh(&g);
            vals[0] > rel_tol * vals[vals.len() - 1]
        })
    }
}

/// Minimal dilation: environment dimension = Kraus rank of each Choi block.
pub fn minimal_stinespring(m: &CpMap) -> Result<StinespringDilation> {
    Ok(StinespringDilation::from_kraus(kraus_from_choi(m, None)?))
}

/// Environment map `σ` with `(1 ⊗ σ) V_from = V_to`, per block pair.
#[derive(Clone, Debug)]
pub struct Intertwiner {
    /// Indexed like Choi blocks; block `k` maps `E_from,k → E_to,k`.
    pub blocks: Vec<CMat>,
    /// `‖(1 ⊗ σ) V_from − V_to‖_F` over all pairs.
    pub residual: f64,
    /// `‖σ^dagger σ − 1‖_F` over all pairs.
    pub isometry_defect: f64,
    /// `‖(σ^dagger σ)^2 − σ^dagger σ‖_F` over all pairs.
    pub partial_isometry_defect: f64,
    /// Smallest singular value kept in the least-squares solve.
    pub sigma_min: f64,
}

/// Least-squares solve for the environment map relating two dilations of the
/// same CP map. `from` must have linearly independent Kraus families
/// (singular values below `rel_cut * σ_max` count as dependent).
pub fn intertwiner(
    from: &StinespringDilation,
    to: &StinespringDilation,
    rel_cut: f64,
) -> Result<Intertwiner> {
    from.source().ensure_compatible(to.source())?;
    from.target().ensure_compatible(to.target())?;
    let ns = from.source().num_blocks();
    let mut blocks = Vec::new();
    let (mut res2, mut iso2, mut piso2) = (0.0, 0.0, 0.0);
    let mut sigma_min = f64::INFINITY;
    for k in 0..from.kraus.ops.len() {
        let (j, i) = (k / ns, k % ns);
        let rf = from.kraus.ops(j, i);
        let lt = to.kraus.ops(j, i);
        let dvec = from.target().block_dim(j) * from.source().block_dim(i);
        let r_mat = CMat::from_fn(dvec, rf.len(), |row, col| rf[col].as_slice()[row]);
        let l_mat = CMat::from_fn(dvec, lt.len(), |row, col| lt[col].as_slice()[row]);
        let pinv = linalg::pseudo_inverse(&r_mat, rel_cut);
        if pinv.rank < rf.len() {
            return Err(Error::NotMinimal(format!(
                "block pair ({j}, {i}): rank {} < {}",
                pinv.rank,
                rf.len()
            )));
        }
        if !rf.is_empty() {
            sigma_min = sigma_min.min(pinv.sigma_min_kept);
        }
        let sigma_t = &pinv.pinv * &l_mat;
        res2 += linalg::frobenius(&(&r_mat * &sigma_t - &l_mat)).powi(2);
        let sigma = sigma_t.transpose();
        let gram = sigma.adjoint() * &sigma;
        iso2 += linalg::frobenius(&(&gram - linalg::eye(gram.nrows()))).powi(2);
        piso2 += linalg::frobenius(&(&gram * &gram - &gram)).powi(2);
        blocks.push(sigma);
    }
    Ok(Intertwiner {
        blocks,
        residual: res2.sqrt(),
        isometry_defect: iso2.sqrt(),
        partial_isometry_defect: piso2.sqrt(),
        sigma_min: if sigma_min.is_finite() { sigma_min } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cpmaps::choi_from_action;
    use crate::linalg::{c, real};

    fn m2() -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::matrix(2)
    }

    #[test]
    fn identity_has_single_kraus() {
        let k = kraus_from_choi(&CpMap::identity(&m2()), None).unwrap();
        assert_eq!(k.ops(0, 0).len(), 1);
        let a = &k.ops(0, 0)[0];
        // identity up to a global phase
        let phase = a[(0, 0)];
        assert!((phase.norm() - 1.0).abs() < 1e-12);
        assert!(linalg::frobenius(&(a - linalg::eye(2).map(|z| z * phase))) < 1e-12);
    }

    #[test]
    fn depolarizing_has_four_kraus_and_isometric_dilation() {
        let dep = choi_from_action(
            &m2(),
            &m2(),
            |x| Ok(BlockOperator::identity(&m2()).scale(x.trace() * 0.5)),
            1e-9,
        )
        .unwrap();
        let d = minimal_stinespring(&dep).unwrap();
        assert_eq!(d.env_dims(), vec![4]);
        assert!(d.isometry_defect() < 1e-12);
        assert!(d.is_minimal(1e-10));
    }

    #[test]
    fn zero_map_has_no_kraus() {
        let z = CpMap::zero(&m2(), &m2());
        let k = kraus_from_choi(&z, None).unwrap();
        assert!(k.ops(0, 0).is_empty());
    }

    #[test]
    fn unitary_conjugation_has_unit_environment() {
        let u = CMat::from_row_slice(
            2,
            2,
            &[real(0.6), c(0.0, 0.8), c(0.0, 0.8), real(0.6)],
        );
        let a = MultiMatrixAlgebra::from_dims(&[2, 1]).unwrap();
        let ch = choi_from_action(
            &a,
            &a,
            |x| {
                BlockOperator::from_blocks(
                    x.algebra(),
                    vec![&u * x.block(0) * u.adjoint(), x.block(1).clone()],
                )
            },
            1e-9,
        )
        .unwrap();
        let d = minimal_stinespring(&ch).unwrap();
        assert_eq!(d.env_dims(), vec![1, 0, 0, 1]);
        assert!(d.isometry_defect() < 1e-12);
    }

    #[test]
    fn intertwiner_recovers_planted_unitary() {
        let dep = choi_from_action(
            &m2(),
            &m2(),
            |x| Ok(BlockOperator::identity(&m2()).scale(x.trace() * 0.5)),
            1e-9,
        )
        .unwrap();
        let d = minimal_stinespring(&dep).unwrap();
        let same = intertwiner(&d, &d, 1e-10).unwrap();
        assert!(linalg::frobenius(&(&same.blocks[0] - linalg::eye(4))) < 1e-10);
        assert!(same.residual < 1e-12);
    }
}
