//! Multimatrix algebras `⊕_i B(H_i)` and their elements.
//!
//! An algebra is an ordered list of matrix blocks. Everything that identifies
//! two algebras (compatibility checks, duals, Hom constructions) goes by block
//! order and dimension; labels are only for display.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Block {
    pub label: String,
    pub dim: usize,
}

/// Declares that the blocks of an algebra are indexed by ordered pairs
/// `(outer, inner)` in lexicographic order, block `(a, b)` having dimension
/// `outer[a] * inner[b]` with the outer factor first.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PairStructure {
    pub outer: Vec<usize>,
    pub inner: Vec<usize>,
}

impl PairStructure {
    pub fn index(&self, outer: usize, inner: usize) -> usize {
        outer * self.inner.len() + inner
    }

    pub fn split(&self, block: usize) -> (usize, usize) {
        (block / self.inner.len(), block % self.inner.len())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiMatrixAlgebra {
    blocks: Vec<Block>,
    pairs: Option<PairStructure>,
}

impl MultiMatrixAlgebra {
    pub fn new<S: Into<String>>(blocks: impl IntoIterator<Item = (S, usize)>) -> Result<Self> {
        let blocks: Vec<Block> = blocks
            .into_iter()
            .map(|(label, dim)| Block {
                label: label.into(),
                dim,
            })
            .collect();
        if blocks.is_empty() {
            return Err(Error::InvalidAlgebra("no blocks".into()));
        }
        if let Some(b) = blocks.iter().find(|b| b.dim == 0) {
            return Err(Error::InvalidAlgebra(format!("block {:?} has dim 0", b.label)));
        }
        for (k, b) in blocks.iter().enumerate() {
            if blocks[..k].iter().any(|o| o.label == b.label) {
                return Err(Error::InvalidAlgebra(format!("duplicate label {:?}", b.label)));
            }
        }
        Ok(Self {
            blocks,
            pairs: None,
        })
    }

    /// Blocks labelled by position.
    pub fn from_dims(dims: &[usize]) -> Result<Self> {
        Self::new(dims.iter().enumerate().map(|(k, &d)| (k.to_string(), d)))
    }

    /// `B(C^n)`.
    pub fn matrix(n: usize) -> Self {
        Self::from_dims(&[n]).expect("n >= 1")
    }

    /// `⊕_n C`, the algebra of a classical system with `n` symbols.
    pub fn classical(n: usize) -> Self {
        Self::from_dims(&vec![1; n]).expect("n >= 1")
    }

    /// The scalars `C`.
    pub fn trivial() -> Self {
        Self::matrix(1)
    }

    /// Blocks indexed by pairs `(a, b)`, dimension `outer[a] * inner[b]`.
    pub fn pair_product(outer: &Self, inner: &Self) -> Self {
        let mut blocks = Vec::with_capacity(outer.num_blocks() * inner.num_blocks());
        for o in &outer.blocks {
            for n in &inner.blocks {
                blocks.push(Block {
                    label: format!("({},{})", o.label, n.label),
                    dim: o.dim * n.dim,
                });
            }
        }
        Self {
            blocks,
            pairs: Some(PairStructure {
                outer: outer.dims(),
                inner: inner.dims(),
            }),
        }
    }

    pub fn with_pairs(mut self, pairs: PairStructure) -> Result<Self> {
        let ok = pairs.outer.len() * pairs.inner.len() == self.blocks.len()
            && self.blocks.iter().enumerate().all(|(k, b)| {
                let (o, n) = pairs.split(k);
                b.dim == pairs.outer[o] * pairs.inner[n]
            });
        if !ok {
            return Err(Error::InvalidAlgebra("pair structure does not match blocks".into()));
        }
        self.pairs = Some(pairs);
        Ok(self)
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn pairs(&self) -> Option<&PairStructure> {
        self.pairs.as_ref()
    }

    pub fn num_blocks(&self) -> usize {
        self.blocks.len()
    }

    pub fn block_dim(&self, k: usize) -> usize {
        self.blocks[k].dim
    }

    pub fn dims(&self) -> Vec<usize> {
        self.blocks.iter().map(|b| b.dim).collect()
    }

    /// `dim(A) = Σ_i dim(H_i)`, which is also `Tr(1)`.
    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim).sum()
    }

    /// Linear dimension `Σ_i dim(H_i)^2`.
    pub fn linear_dim(&self) -> usize {
        self.blocks.iter().map(|b| b.dim * b.dim).sum()
    }

    pub fn is_classical(&self) -> bool {
        self.blocks.iter().all(|b| b.dim == 1)
    }

    pub fn compatible(&self, other: &Self) -> bool {
        self.blocks.len() == other.blocks.len()
            && self.blocks.iter().zip(&other.blocks).all(|(a, b)| a.dim == b.dim)
    }

    pub fn ensure_compatible(&self, other: &Self) -> Result<()> {
        if self.compatible(other) {
            Ok(())
        } else {
            Err(Error::AlgebraMismatch(format!("{self} vs {other}")))
        }
    }

    /// All matrix units `(block, a, b)`, block-major.
    pub fn matrix_units(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.linear_dim());
        for (k, b) in self.blocks.iter().enumerate() {
            for r in 0..b.dim {
                for c in 0..b.dim {
                    out.push((k, r, c));
                }
            }
        }
        out
    }
}

impl fmt::Display for MultiMatrixAlgebra {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .blocks
            .iter()
            .map(|b| match b.dim {
                1 => "C".to_string(),
                d => format!("M{d}"),
            })
            .collect();
        write!(f, "{}", parts.join(" ⊕ "))
    }
}

/// An element of a multimatrix algebra: one square matrix per block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockOperator {
    algebra: MultiMatrixAlgebra,
    blocks: Vec<CMat>,
}

impl BlockOperator {
    pub fn from_blocks(algebra: &MultiMatrixAlgebra, blocks: Vec<CMat>) -> Result<Self> {
        if blocks.len() != algebra.num_blocks() {
            return Err(Error::ShapeMismatch(format!(
                "{} blocks for an algebra with {}",
                blocks.len(),
                algebra.num_blocks()
            )));
        }
        for (k, m) in blocks.iter().enumerate() {
            let d = algebra.block_dim(k);
            if m.shape() != (d, d) {
                return Err(Error::ShapeMismatch(format!(
                    "block {k} is {:?}, expected ({d}, {d})",
                    m.shape()
                )));
            }
        }
        Ok(Self {
            algebra: algebra.clone(),
            blocks,
        })
    }

    pub fn zero(algebra: &MultiMatrixAlgebra) -> Self {
        Self {
            algebra: algebra.clone(),
            blocks: algebra.dims().into_iter().map(|d| linalg::zeros(d, d)).collect(),
        }
    }

    pub fn identity(algebra: &MultiMatrixAlgebra) -> Self {
        Self {
            algebra: algebra.clone(),
            blocks: algebra.dims().into_iter().map(linalg::eye).collect(),
        }
    }

    pub fn matrix_unit(algebra: &MultiMatrixAlgebra, block: usize, a: usize, b: usize) -> Self {
        let mut out = Self::zero(algebra);
        out.blocks[block][(a, b)] = linalg::ONE;
        out
    }

    pub fn algebra(&self) -> &MultiMatrixAlgebra {
        &self.algebra
    }

    pub fn blocks(&self) -> &[CMat] {
        &self.blocks
    }

    pub fn block(&self, k: usize) -> &CMat {
        &self.blocks[k]
    }

    pub fn into_blocks(self) -> Vec<CMat> {
        self.blocks
    }

    fn zip_with(&self, other: &Self, f: impl Fn(&CMat, &CMat) -> CMat) -> Result<Self> {
        self.algebra.ensure_compatible(&other.algebra)?;
        Ok(Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().zip(&other.blocks).map(|(a, b)| f(a, b)).collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn scale(&self, z: Complex64) -> Self {
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m.map(|x| x * z)).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(linalg::real(s))
    }

    pub fn adjoint(&self) -> Self {
        Self {
            algebra: self.algebra.clone(),
            blocks: self.blocks.iter().map(|m| m.adjoint()).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        self.blocks.iter().map(linalg::trace).sum()
    }

    /// Hilbert-Schmidt form `Σ_blocks Tr(x^dagger y)`.
    pub fn hs_inner(&self, other: &Self) -> Result<Complex64> {
        self.algebra.ensure_compatible(&other.algebra)?;
        Ok(self.blocks.iter().zip(&other.blocks).map(|(a, b)| linalg::hs(a, b)).sum())
    }

    pub fn frobenius(&self) -> f64 {
        self.blocks
            .iter()
            .map(|m| m.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Frobenius distance; panics on mismatched algebras.
    pub fn distance(&self, other: &Self) -> f64 {
        self.sub(other).expect("same algebra").frobenius()
    }

    pub fn hermitian_defect(&self) -> f64 {
        self.blocks
            .iter()
            .map(|m| linalg::hermitian_defect(m).powi(2))
            .sum::<f64>()
            .sqrt()
    }

    /// Positivity test with a witness for the first offending block.
    pub fn positivity(&self, tol: f64) -> Positivity {
        let mut report = Positivity {
            positive: true,
            block: None,
            min_eigenvalue: f64::INFINITY,
            hermitian_defect: 0.0,
        };
        for (k, m) in self.blocks.iter().enumerate() {
            let defect = linalg::hermitian_defect(m);
            let ev = linalg::min_eigenvalue(m);
            report.hermitian_defect = report.hermitian_defect.max(defect);
            if ev < report.min_eigenvalue {
                report.min_eigenvalue = ev;
            }
            if report.positive && (defect > tol || ev < -tol) {
                report.positive = false;
                report.block = Some(k);
                report.min_eigenvalue = ev;
            }
        }
        report
    }

    pub fn is_positive(&self, tol: f64) -> bool {
        self.positivity(tol).positive
    }

    /// Per-block `g` with `g^dagger g = x`, via eigendecomposition with
    /// eigenvalues clamped at zero.
    pub fn psd_factor(&self, tol: f64) -> Result<BlockFactor> {
        let mut factors = Vec::with_capacity(self.blocks.len());
        for (k, m) in self.blocks.iter().enumerate() {
            let (vals, vecs) = linalg::eigh(m);
            let ev = vals.first().copied().unwrap_or(0.0);
            if linalg::hermitian_defect(m) > tol || ev < -tol {
                return Err(Error::NotPsd {
                    block: k,
                    eigenvalue: ev,
                });
            }
            let sqrt = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
                vals.len(),
                vals.iter().map(|&v| linalg::real(v.max(0.0).sqrt())),
            ));
            factors.push(sqrt * vecs.adjoint());
        }
        Ok(BlockFactor {
            algebra: self.algebra.clone(),
            factors,
        })
    }
}

/// Result of a positivity test.
#[derive(Clone, Debug, PartialEq)]
pub struct Positivity {
    pub positive: bool,
    /// First block that failed, if any.
    pub block: Option<usize>,
    /// Eigenvalue of the failing block, or the global minimum when positive.
    pub min_eigenvalue: f64,
    pub hermitian_defect: f64,
}

#[derive(Clone, Debug)]
pub struct BlockFactor {
    algebra: MultiMatrixAlgebra,
    pub factors: Vec<CMat>,
}

impl BlockFactor {
    pub fn reconstruct(&self) -> BlockOperator {
        BlockOperator {
            algebra: self.algebra.clone(),
            blocks: self.factors.iter().map(|g| g.adjoint() * g).collect(),
        }
    }
}

/// A trace-one positive element: a distribution over blocks together with
/// a density matrix per block.
#[derive(Clone, Debug, PartialEq)]
pub struct HybridState(BlockOperator);

impl HybridState {
    pub fn new(op: BlockOperator, tol: f64) -> Result<Self> {
        let pos = op.positivity(tol);
        if !pos.positive {
            return Err(Error::NotPsd {
                block: pos.block.unwrap_or(0),
                eigenvalue: pos.min_eigenvalue,
            });
        }
        let t = op.trace();
        if (t - linalg::ONE).norm() > tol {
            return Err(Error::ShapeMismatch(format!("state has trace {t}")));
        }
        Ok(Self(op))
    }

    pub fn operator(&self) -> &BlockOperator {
        &self.0
    }

    pub fn into_operator(self) -> BlockOperator {
        self.0
    }

    /// The classical distribution `p_x = Tr(ρ_x)`.
    pub fn probabilities(&self) -> Vec<f64> {
        self.0.blocks.iter().map(|m| linalg::trace(m).re).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{c, real};

    fn c_m2() -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::from_dims(&[1, 2]).unwrap()
    }

    #[test]
    fn rejects_bad_algebras() {
        assert!(MultiMatrixAlgebra::from_dims(&[]).is_err());
        assert!(MultiMatrixAlgebra::from_dims(&[2, 0]).is_err());
        assert!(MultiMatrixAlgebra::new([("x", 1), ("x", 2)]).is_err());
    }

    #[test]
    fn identity_trace_is_dimension() {
        assert_eq!(BlockOperator::identity(&c_m2()).trace(), real(3.0));
        let m2m3 = MultiMatrixAlgebra::from_dims(&[2, 3]).unwrap();
        assert_eq!(BlockOperator::identity(&m2m3).trace(), real(5.0));
        assert_eq!(m2m3.dim(), 5);
    }

    #[test]
    fn blockwise_addition() {
        let alg = c_m2();
        let x = BlockOperator::from_blocks(
            &alg,
            vec![
                CMat::from_element(1, 1, real(2.0)),
                CMat::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(3.0)]),
            ],
        )
        .unwrap();
        let y = x.add(&BlockOperator::identity(&alg)).unwrap();
        assert_eq!(y.block(0)[(0, 0)], real(3.0));
        assert_eq!(y.block(1)[(0, 0)], real(2.0));
        assert_eq!(y.block(1)[(1, 1)], real(4.0));
        assert_eq!(y.block(1)[(0, 1)], real(0.0));
    }

    #[test]
    fn identity_is_idempotent_and_adjoint_involutive() {
        let alg = c_m2();
        let id = BlockOperator::identity(&alg);
        assert_eq!(id.mul(&id).unwrap(), id);
        let x = BlockOperator::from_blocks(
            &alg,
            vec![
                CMat::from_element(1, 1, c(0.3, -1.0)),
                CMat::from_row_slice(2, 2, &[c(1.0, 2.0), c(0.0, 1.0), c(-4.0, 0.5), c(3.0, 0.0)]),
            ],
        )
        .unwrap();
        assert_eq!(x.adjoint().adjoint(), x);
    }

    #[test]
    fn mismatched_algebras_are_rejected() {
        let a = BlockOperator::identity(&c_m2());
        let b = BlockOperator::identity(&MultiMatrixAlgebra::matrix(3));
        assert!(matches!(a.add(&b), Err(Error::AlgebraMismatch(_))));
        assert!(matches!(a.hs_inner(&b), Err(Error::AlgebraMismatch(_))));
        assert!(matches!(
            BlockOperator::from_blocks(&c_m2(), vec![linalg::eye(1), linalg::eye(3)]),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn positivity_witness() {
        let m2 = MultiMatrixAlgebra::matrix(2);
        assert!(BlockOperator::identity(&m2).is_positive(1e-9));
        let bad = BlockOperator::from_blocks(
            &m2,
            vec![CMat::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)])],
        )
        .unwrap();
        let w = bad.positivity(1e-9);
        assert!(!w.positive);
        assert_eq!(w.block, Some(0));
        assert!((w.min_eigenvalue + 1.0).abs() < 1e-12);

        let non_herm = BlockOperator::from_blocks(
            &m2,
            vec![CMat::from_row_slice(2, 2, &[real(1.0), real(1.0), real(0.0), real(1.0)])],
        )
        .unwrap();
        assert!(!non_herm.is_positive(1e-9));
    }

    #[test]
    fn psd_factor_square_root() {
        let m2 = MultiMatrixAlgebra::matrix(2);
        let id = BlockOperator::identity(&m2);
        let f = id.psd_factor(1e-9).unwrap();
        assert!(linalg::frobenius(&(&f.factors[0].adjoint() * &f.factors[0] - linalg::eye(2))) < 1e-12);

        let x = BlockOperator::from_blocks(
            &m2,
            vec![CMat::from_row_slice(2, 2, &[real(4.0), real(0.0), real(0.0), real(0.0)])],
        )
        .unwrap();
        let g = &x.psd_factor(1e-9).unwrap().factors[0];
        // unique up to a left unitary; the Gram square root is diag(2, 0) up to signs
        let gram = g.adjoint() * g;
        assert!((gram[(0, 0)] - real(4.0)).norm() < 1e-12);
        let sv = g.clone().svd(false, false).singular_values;
        let mut s: Vec<f64> = sv.iter().copied().collect();
        s.sort_by(f64::total_cmp);
        assert!(s[0].abs() < 1e-12 && (s[1] - 2.0).abs() < 1e-12);

        let neg = BlockOperator::from_blocks(
            &m2,
            vec![CMat::from_row_slice(2, 2, &[real(1.0), real(0.0), real(0.0), real(-1.0)])],
        )
        .unwrap();
        assert!(matches!(neg.psd_factor(1e-9), Err(Error::NotPsd { block: 0, .. })));
    }

    #[test]
    fn hs_inner_identity() {
        let m2 = MultiMatrixAlgebra::matrix(2);
        let id = BlockOperator::identity(&m2);
        assert_eq!(id.hs_inner(&id).unwrap(), real(2.0));
    }

    #[test]
    fn hybrid_state_checks() {
        let alg = c_m2();
        let id = BlockOperator::identity(&alg);
        assert!(HybridState::new(id.clone(), 1e-9).is_err());
        let s = HybridState::new(id.scale_real(1.0 / 3.0), 1e-9).unwrap();
        let p = s.probabilities();
        assert!((p[0] - 1.0 / 3.0).abs() < 1e-15 && (p[1] - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn pair_product_layout() {
        let a = MultiMatrixAlgebra::from_dims(&[2, 3]).unwrap();
        let b = MultiMatrixAlgebra::classical(2);
        let p = MultiMatrixAlgebra::pair_product(&b, &a);
        assert_eq!(p.dims(), vec![2, 3, 2, 3]);
        let ps = p.pairs().unwrap();
        assert_eq!(ps.index(1, 0), 2);
        assert_eq!(ps.split(3), (1, 1));
        assert_eq!(p.blocks()[2].label, "(1,0)");
    }
}
