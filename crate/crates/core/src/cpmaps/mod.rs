//! Completely positive maps between multimatrix algebras.
//!
//! A map `F: ⊕_i B(H_i) → ⊕_j B(K_j)` is stored through its Choi blocks
//! `C_{ji} = Σ_{ab} F(E_ab)_j ⊗ E_ab` acting on `K_j ⊗ H_i` (target factor
//! first), with matrix units taken in the standard basis of every block.
//! The normalisation is the unnormalised one, so trace preservation reads
//! `Σ_j Tr_{K_j} C_{ji} = 1_{H_i}` with no dimension factors.

mod stinespring;

pub use stinespring::{
    intertwiner, kraus_from_choi, minimal_stinespring, Intertwiner, KrausDecomposition,
    StinespringDilation,
};

use std::ops::Deref;

use crate::algebra::{BlockOperator, MultiMatrixAlgebra, Positivity};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};

#[derive(Clone, Debug, PartialEq)]
pub struct CpMap {
    source: MultiMatrixAlgebra,
    target: MultiMatrixAlgebra,
    /// Indexed `j * source.num_blocks() + i`.
    choi: Vec<CMat>,
}

fn check_choi_shapes(
    source: &MultiMatrixAlgebra,
    target: &MultiMatrixAlgebra,
    blocks: &[CMat],
) -> Result<()> {
    let (ns, nt) = (source.num_blocks(), target.num_blocks());
    if blocks.len() != ns * nt {
        return Err(Error::ShapeMismatch(format!(
            "{} choi blocks, expected {}",
            blocks.len(),
            ns * nt
        )));
    }
    for (k, b) in blocks.iter().enumerate() {
        let d = target.block_dim(k / ns) * source.block_dim(k % ns);
        if b.shape() != (d, d) {
            return Err(Error::ShapeMismatch(format!(
                "choi block {k} is {:?}, expected ({d}, {d})",
                b.shape()
            )));
        }
    }
    Ok(())
}

impl CpMap {
    /// Builds a CP map from its Choi blocks, rejecting non-positive blocks.
    pub fn from_choi(
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
        blocks: Vec<CMat>,
        tol: f64,
    ) -> Result<Self> {
        let map = Self::from_choi_unchecked(source, target, blocks)?;
        map.ensure_cp(tol)?;
        Ok(map)
    }

    /// Shape-checked only. Used for linear (not necessarily positive)
    /// extensions, e.g. when a map is probed on matrix units.
    pub fn from_choi_unchecked(
        source: &MultiMatrixAlgebra,
        target: &MultiMatrixAlgebra,
        blocks: Vec<CMat>,
    ) -> Result<Self> {
        check_choi_shapes(source, target, &blocks)?;
        Ok(Self {
            source: source.clone(),
            target: target.clone(),
            choi: blocks,
        })
    }

    pub fn identity(a: &MultiMatrixAlgebra) -> Self {
        let n = a.num_blocks();
        let choi = (0..n * n)
            .map(|k| {
                let (j, i) = (k / n, k % n);
                if i == j {
                    identity_choi(a.block_dim(i))
                } else {
                    linalg::zeros(a.block_dim(j) * a.block_dim(i), a.block_dim(j) * a.block_dim(i))
                }
            })
            .collect();
        Self {
            source: a.clone(),
            target: a.clone(),
            choi,
        }
    }

    pub fn zero(source: &MultiMatrixAlgebra, target: &MultiMatrixAlgebra) -> Self {
        let choi = (0..source.num_blocks() * target.num_blocks())
            .map(|k| {
                let d = target.block_dim(k / source.num_blocks())
                    * source.block_dim(k % source.num_blocks());
                linalg::zeros(d, d)
            })
            .collect();
        Self {
            source: source.clone(),
            target: target.clone(),
            choi,
        }
    }

    pub fn source(&self) -> &MultiMatrixAlgebra {
        &self.source
    }

    pub fn target(&self) -> &MultiMatrixAlgebra {
        &self.target
    }

    pub fn choi_blocks(&self) -> &[CMat] {
        &self.choi
    }

    pub fn choi_block(&self, j: usize, i: usize) -> &CMat {
        &self.choi[j * self.source.num_blocks() + i]
    }

    /// The Choi blocks as one element of `Hom(source, target)`, whose blocks
    /// are the pairs `(j, i)` in lexicographic order.
    pub fn choi_operator(&self) -> BlockOperator {
        let hom = MultiMatrixAlgebra::pair_product(&self.target, &self.source);
        BlockOperator::from_blocks(&hom, self.choi.clone()).expect("choi shapes are checked")
    }

    pub fn cp_report(&self, tol: f64) -> Positivity {
        self.choi_operator().positivity(tol)
    }

    pub fn ensure_cp(&self, tol: f64) -> Result<()> {
        let p = self.cp_report(tol);
        if p.positive {
            Ok(())
        } else {
            Err(Error::NotCp {
                block: p.block.unwrap_or(0),
                eigenvalue: p.min_eigenvalue,
            })
        }
    }

    /// `out_j[t, t'] = Σ_i Σ_{ab} x_i[a, b] C_{ji}[(t, a), (t', b)]`.
    pub fn apply(&self, x: &BlockOperator) -> Result<BlockOperator> {
        self.source.ensure_compatible(x.algebra())?;
        let ns = self.source.num_blocks();
        let mut out = Vec::with_capacity(self.target.num_blocks());
        for j in 0..self.target.num_blocks() {
            let dj = self.target.block_dim(j);
            let mut acc = linalg::zeros(dj, dj);
            for i in 0..ns {
                let di = self.source.block_dim(i);
                let c = &self.choi[j * ns + i];
                let xi = x.block(i);
                for a in 0..di {
                    for b in 0..di {
                        let w = xi[(a, b)];
                        if w == linalg::ZERO {
                            continue;
                        }
                        for t in 0..dj {
                            for u in 0..dj {
                                acc[(t, u)] += w * c[(t * di + a, u * di + b)];
                            }
                        }
                    }
                }
            }
            out.push(acc);
        }
        BlockOperator::from_blocks(&self.target, out)
    }

    /// `Σ_j Tr_{K_j} C_{ji}` for every source block `i`.
    pub fn choi_marginals(&self) -> Vec<CMat> {
        let ns = self.source.num_blocks();
        (0..ns)
            .map(|i| {
                let di = self.source.block_dim(i);
                let mut acc = linalg::zeros(di, di);
                for j in 0..self.target.num_blocks() {
                    acc += linalg::partial_trace(
                        &self.choi[j * ns + i],
                        &[self.target.block_dim(j), di],
                        &[true, false],
                    );
                }
                acc
            })
            .collect()
    }

    pub fn is_tp(&self, tol: f64) -> TpReport {
        let residuals: Vec<f64> = self
            .choi_marginals()
            .into_iter()
            .map(|m| {
                let n = m.nrows();
                linalg::frobenius(&(m - linalg::eye(n)))
            })
            .collect();
        TpReport {
            tp: residuals.iter().all(|&r| r <= tol),
            residuals,
        }
    }

    /// Hilbert-Schmidt adjoint: `<F(x), y> = <x, F_*(y)>`.
    pub fn hs_dual(&self) -> CpMap {
        let (ns, nt) = (self.source.num_blocks(), self.target.num_blocks());
        let mut choi = Vec::with_capacity(ns * nt);
        for i in 0..ns {
            for j in 0..nt {
                let c = &self.choi[j * ns + i];
                let swapped = linalg::permute_factors(
                    c,
                    &[self.target.block_dim(j), self.source.block_dim(i)],
                    &[1, 0],
                );
                choi.push(swapped.map(|z| z.conj()));
            }
        }
        CpMap {
            source: self.target.clone(),
            target: self.source.clone(),
            choi,
        }
    }

    /// `self + s * other` on Choi blocks; no positivity check.
    pub fn add_scaled(&self, other: &CpMap, s: f64) -> Result<CpMap> {
        self.source.ensure_compatible(&other.source)?;
        self.target.ensure_compatible(&other.target)?;
        Ok(CpMap {
            source: self.source.clone(),
            target: self.target.clone(),
            choi: self
                .choi
                .iter()
                .zip(&other.choi)
                .map(|(a, b)| a + b.scale(s))
                .collect(),
        })
    }

    pub fn scale(&self, s: f64) -> CpMap {
        CpMap {
            source: self.source.clone(),
            target: self.target.clone(),
            choi: self.choi.iter().map(|c| c.scale(s)).collect(),
        }
    }

    /// Frobenius distance between Choi blocks.
    pub fn choi_distance(&self, other: &CpMap) -> Result<f64> {
        self.source.ensure_compatible(&other.source)?;
        self.target.ensure_compatible(&other.target)?;
        Ok(self
            .choi
            .iter()
            .zip(&other.choi)
            .map(|(a, b)| linalg::frobenius(&(a - b)).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    /// Replace the algebras by compatible ones (e.g. to attach labels or pair structure).
    pub fn relabel(&self, source: &MultiMatrixAlgebra, target: &MultiMatrixAlgebra) -> Result<CpMap> {
        self.source.ensure_compatible(source)?;
        self.target.ensure_compatible(target)?;
        Ok(CpMap {
            source: source.clone(),
            target: target.clone(),
            choi: self.choi.clone(),
        })
    }
}

/// `Σ_{ab} E_ab ⊗ E_ab`, the Choi block of the identity on `B(C^d)`.
pub(crate) fn identity_choi(d: usize) -> CMat {
    let mut m = linalg::zeros(d * d, d * d);
    for a in 0..d {
        for b in 0..d {
            m[(a * d + a, b * d + b)] = linalg::ONE;
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq)]
pub struct TpReport {
    pub tp: bool,
    /// `‖Σ_j Tr_{K_j} C_{ji} − 1‖_F` per source block.
    pub residuals: Vec<f64>,
}

impl TpReport {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().copied().fold(0.0, f64::max)
    }
}

/// A completely positive trace-preserving map.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel(CpMap);

impl Channel {
    pub fn new(map: CpMap, tol: f64) -> Result<Self> {
        map.ensure_cp(tol)?;
        let tp = map.is_tp(tol);
        if !tp.tp {
            return Err(Error::NotTp {
                residual: tp.max_residual(),
            });
        }
        Ok(Self(map))
    }

    pub fn identity(a: &MultiMatrixAlgebra) -> Self {
        Self(CpMap::identity(a))
    }

    pub fn map(&self) -> &CpMap {
        &self.0
    }

    pub fn into_map(self) -> CpMap {
        self.0
    }

    pub fn relabel(&self, source: &MultiMatrixAlgebra, target: &MultiMatrixAlgebra) -> Result<Channel> {
        Ok(Self(self.0.relabel(source, target)?))
    }
}

impl Deref for Channel {
    type Target = CpMap;

    fn deref(&self) -> &CpMap {
        &self.0
    }
}

fn raw_choi_from_action(
    source: &MultiMatrixAlgebra,
    target: &MultiMatrixAlgebra,
    action: impl Fn(&BlockOperator) -> Result<BlockOperator>,
) -> Result<Vec<CMat>> {
    let (ns, nt) = (source.num_blocks(), target.num_blocks());
    let mut choi: Vec<CMat> = (0..ns * nt)
        .map(|k| {
            let d = target.block_dim(k / ns) * source.block_dim(k % ns);
            linalg::zeros(d, d)
        })
        .collect();
    for (i, a, b) in source.matrix_units() {
        let unit = BlockOperator::matrix_unit(source, i, a, b);
        let image = action(&unit)?;
        target.ensure_compatible(image.algebra())?;
        let di = source.block_dim(i);
        for j in 0..nt {
            let out = image.block(j);
            let c = &mut choi[j * ns + i];
            let dj = target.block_dim(j);
            for t in 0..dj {
                for u in 0..dj {
                    c[(t * di + a, u * di + b)] += out[(t, u)];
                }
            }
        }
    }
    Ok(choi)
}

/// Choi blocks of a linear map given by its action on matrix units; errors
/// with `NotCp` when a block is not positive within `tol`.
pub fn choi_from_action(
    source: &MultiMatrixAlgebra,
    target: &MultiMatrixAlgebra,
    action: impl Fn(&BlockOperator) -> Result<BlockOperator>,
    tol: f64,
) -> Result<CpMap> {
    CpMap::from_choi(source, target, raw_choi_from_action(source, target, action)?, tol)
}

/// Like [`choi_from_action`] without the positivity check.
pub fn linear_map_from_action(
    source: &MultiMatrixAlgebra,
    target: &MultiMatrixAlgebra,
    action: impl Fn(&BlockOperator) -> Result<BlockOperator>,
) -> Result<CpMap> {
    CpMap::from_choi_unchecked(source, target, raw_choi_from_action(source, target, action)?)
}

/// `g ∘ f`, recomputed from the chained action on matrix units.
pub fn compose(g: &CpMap, f: &CpMap) -> Result<CpMap> {
    f.target().ensure_compatible(g.source())?;
    linear_map_from_action(f.source(), g.target(), |x| g.apply(&f.apply(x)?))
}

/// `f ⊗ g`. Source and target blocks are the ordered pairs of blocks; each
/// Choi block is `C^f ⊗ C^g` reordered from `K1 H1 K2 H2` to `K1 K2 H1 H2`.
pub fn tensor(f: &CpMap, g: &CpMap) -> CpMap {
    let source = MultiMatrixAlgebra::pair_product(f.source(), g.source());
    let target = MultiMatrixAlgebra::pair_product(f.target(), g.target());
    let (ns, nt) = (source.num_blocks(), target.num_blocks());
    let gs = g.source().num_blocks();
    let gt = g.target().num_blocks();
    let mut choi = Vec::with_capacity(ns * nt);
    for jt in 0..nt {
        let (j1, j2) = (jt / gt, jt % gt);
        for is in 0..ns {
            let (i1, i2) = (is / gs, is % gs);
            let prod = linalg::kron(f.choi_block(j1, i1), g.choi_block(j2, i2));
            let dims = [
                f.target().block_dim(j1),
                f.source().block_dim(i1),
                g.target().block_dim(j2),
                g.source().block_dim(i2),
            ];
            choi.push(linalg::permute_factors(&prod, &dims, &[0, 2, 1, 3]));
        }
    }
    CpMap {
        source,
        target,
        choi,
    }
}

/// Classical copy on the block index: block `k` goes to block `(k, k)` with
/// its quantum content untouched. Off-diagonal `(k, k')` blocks would be
/// zero-dimensional and are omitted from the target.
pub fn copy_channel(a: &MultiMatrixAlgebra) -> Channel {
    let target = MultiMatrixAlgebra::new(
        a.blocks()
            .iter()
            .map(|b| (format!("({},{})", b.label, b.label), b.dim)),
    )
    .expect("labels stay unique");
    Channel(
        CpMap::identity(a)
            .relabel(a, &target)
            .expect("same dimensions"),
    )
}

/// Which factor of a pair-structured target to trace out.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceGroup {
    Nothing,
    Outer,
    Inner,
    Both,
}

/// Partial trace inside every target Choi factor. The target must declare a
/// [`PairStructure`](crate::algebra::PairStructure) unless nothing is traced.
pub fn trace_out_target_group(m: &CpMap, group: TraceGroup) -> Result<CpMap> {
    if group == TraceGroup::Nothing {
        return Ok(m.clone());
    }
    let pairs = m.target().pairs().ok_or(Error::StructureMissing)?;
    let new_target = match group {
        TraceGroup::Outer => MultiMatrixAlgebra::from_dims(&pairs.inner)?,
        TraceGroup::Inner => MultiMatrixAlgebra::from_dims(&pairs.outer)?,
        TraceGroup::Both => MultiMatrixAlgebra::trivial(),
        TraceGroup::Nothing => unreachable!(),
    };
    let ns = m.source().num_blocks();
    let mut out = CpMap::zero(m.source(), &new_target);
    for jt in 0..m.target().num_blocks() {
        let (o, n) = pairs.split(jt);
        let (dout, din) = (pairs.outer[o], pairs.inner[n]);
        let new_j = match group {
            TraceGroup::Outer => n,
            TraceGroup::Inner => o,
            _ => 0,
        };
        let traced = match group {
            TraceGroup::Outer => [true, false, false],
            TraceGroup::Inner => [false, true, false],
            _ => [true, true, false],
        };
        for i in 0..ns {
            let reduced = linalg::partial_trace(
                m.choi_block(jt, i),
                &[dout, din, m.source().block_dim(i)],
                &traced,
            );
            out.choi[new_j * ns + i] += reduced;
        }
    }
    Ok(out)
}
