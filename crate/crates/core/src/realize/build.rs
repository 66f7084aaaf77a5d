//! Construction of `E`, `W` and `G` for a verified supermap.
//!
//! `Φ = Tr_{K_out} ∘ S = N ∘ Tr_{H_out}` has two dilations. The left one
//! bends the `K_out` factor of the minimal dilation of `S` into the
//! environment; its Kraus operators are the row slices
//! `L_(l,c,α) = (⟨c| ⊗ 1) A^α` of the Kraus operators `A^α` of `S`. The
//! right one follows the canonical dilation of `Tr_{H_out}` by the minimal
//! dilation of `N`: `R_(a,β) = B^β (⟨a| ⊗ 1)`. The right dilation is
//! minimal, so `L = W R` for a unique isometry `W`.

use crate::cpmaps::{
    intertwiner, kraus_from_choi, minimal_stinespring, Channel, CpMap, Intertwiner,
    KrausDecomposition, StinespringDilation,
};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::supermap::{HomAlgebra, Supermap};

use super::{Circuit, CircuitShape};

/// Singular values below this fraction of the largest are treated as zero
/// when solving for `W`.
pub const W_RELATIVE_CUTOFF: f64 = 1e-10;

/// The left dilation of `Φ` together with its row layout: for each Φ block
/// pair `k * |Hom| + h`, the number of `S`-Kraus operators contributed by
/// each output block `l`.
#[derive(Clone, Debug)]
pub struct LeftDilation {
    pub dilation: StinespringDilation,
    pub layout: Vec<Vec<usize>>,
}

impl LeftDilation {
    /// Row of `(l, c, α)` in the environment of Φ block pair `pair`.
    fn row(&self, pair: usize, l: usize, c: usize, alpha: usize, d: &[usize]) -> usize {
        let ranks = &self.layout[pair];
        let offset: usize = (0..l).map(|m| d[m] * ranks[m]).sum();
        offset + c * ranks[l] + alpha
    }
}

pub fn left_dilation(s: &Supermap) -> Result<LeftDilation> {
    if !s.is_verified() {
        return Err(Error::VerifyRequired);
    }
    let ks = kraus_from_choi(s.inner(), None)?;
    let (_, _, c, d) = s.algebras();
    let hom = s.from().base();
    let (nh, nk, nl) = (hom.num_blocks(), c.num_blocks(), d.num_blocks());
    let mut families = Vec::with_capacity(nk * nh);
    let mut layout = Vec::with_capacity(nk * nh);
    for k in 0..nk {
        let dk = c.block_dim(k);
        for h in 0..nh {
            let mut family = Vec::new();
            let mut ranks = Vec::with_capacity(nl);
            for l in 0..nl {
                let ops = ks.ops(l * nk + k, h);
                ranks.push(ops.len());
                for cc in 0..d.block_dim(l) {
                    for a in ops {
                        family.push(a.rows(cc * dk, dk).into_owned());
                    }
                }
            }
            families.push(family);
            layout.push(ranks);
        }
    }
    Ok(LeftDilation {
        dilation: StinespringDilation::from_kraus(KrausDecomposition::new(hom, c, families)?),
        layout,
    })
}

/// `Tr_{H_out}` followed by the dilation of `N`, environment index
/// `a * r + β` for `a` in `H_out,j` and `β` below the Kraus rank `r` of `N`.
pub fn right_dilation(
    n_dilation: &StinespringDilation,
    from: &HomAlgebra,
    tol: f64,
) -> Result<StinespringDilation> {
    let (a, b, c) = (from.input(), from.output(), n_dilation.target());
    a.ensure_compatible(n_dilation.source())?;
    let kn = n_dilation.kraus();
    let unital = (0..c.num_blocks())
        .map(|k| {
            let dk = c.block_dim(k);
            let mut acc = linalg::zeros(dk, dk);
            for i in 0..a.num_blocks() {
                for op in kn.ops(k, i) {
                    acc += op * op.adjoint();
                }
            }
            linalg::frobenius(&(acc - linalg::eye(dk)))
        })
        .fold(0.0, f64::max);
    if unital > tol {
        return Err(Error::NotUnital { residual: unital });
    }
    let (ni, nh) = (a.num_blocks(), from.base().num_blocks());
    let mut families = Vec::with_capacity(c.num_blocks() * nh);
    for k in 0..c.num_blocks() {
        let dk = c.block_dim(k);
        for h in 0..nh {
            let (j, i) = (h / ni, h % ni);
            let (dj, di) = (b.block_dim(j), a.block_dim(i));
            let mut family = Vec::new();
            for aa in 0..dj {
                for op in kn.ops(k, i) {
                    let mut r = linalg::zeros(dk, dj * di);
                    r.columns_mut(aa * di, di).copy_from(op);
                    family.push(r);
                }
            }
            families.push(family);
        }
    }
    Ok(StinespringDilation::from_kraus(KrausDecomposition::new(
        from.base(),
        c,
        families,
    )?))
}

/// The isometry `W` with `L = W R`, checked against `10 · tol`.
pub fn solve_w(
    right: &StinespringDilation,
    left: &StinespringDilation,
    tol: f64,
) -> Result<Intertwiner> {
    let w = intertwiner(right, left, W_RELATIVE_CUTOFF)?;
    let limit = 10.0 * tol;
    if w.residual > limit {
        return Err(Error::ResidualTooLarge {
            residual: w.residual,
            limit,
        });
    }
    if w.isometry_defect > limit {
        return Err(Error::IsometryDefect {
            defect: w.isometry_defect,
        });
    }
    Ok(w)
}

/// The memory space `P` with the leading-basis inclusions of each
/// environment `E_N,ik`.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedEnvironment {
    pub p_dim: usize,
    /// `r_ik`, indexed `[i][k]`.
    pub ranks: Vec<Vec<usize>>,
}

impl PaddedEnvironment {
    pub fn rank(&self, i: usize, k: usize) -> usize {
        self.ranks[i][k]
    }

    pub fn complement_dim(&self, i: usize, k: usize) -> usize {
        self.p_dim - self.ranks[i][k]
    }

    /// `ι_ik`: a `p_dim × r_ik` inclusion of the first basis vectors.
    pub fn injection(&self, i: usize, k: usize) -> CMat {
        CMat::identity(self.p_dim, self.ranks[i][k])
    }
}

/// `p_dim = max r_ik` (1 if every rank is 0); fails when some `r_ik`
/// exceeds `bounds[i][k]`.
pub fn pad_environment(ranks: &[Vec<usize>], bounds: &[Vec<usize>]) -> Result<PaddedEnvironment> {
    for (i, (row, brow)) in ranks.iter().zip(bounds).enumerate() {
        for (k, (&r, &b)) in row.iter().zip(brow).enumerate() {
            if r > b {
                return Err(Error::BoundViolated {
                    source_block: i,
                    target_block: k,
                    dim: r,
                    bound: b,
                });
            }
        }
    }
    let p_dim = ranks.iter().flatten().copied().max().unwrap_or(0).max(1);
    Ok(PaddedEnvironment {
        p_dim,
        ranks: ranks.to_vec(),
    })
}

/// `Σ vec(K) vec(K)^dagger` with `vec(K)[r * cols + s] = K[r, s]`.
fn choi_of_kraus<'a>(ops: impl IntoIterator<Item = &'a CMat>, rows: usize, cols: usize) -> CMat {
    let mut c = linalg::zeros(rows * cols, rows * cols);
    for op in ops {
        let v = CMat::from_fn(rows * cols, 1, |idx, _| op[(idx / cols, idx % cols)]);
        c += &v * v.adjoint();
    }
    c
}

/// `E: C → ⊕_i B(P ⊗ H_in,i)` with the single Kraus operator
/// `K_ik = Σ_β |β⟩_P ⊗ (B^β_ki)^T` per block pair.
pub fn assemble_e(
    n_dilation: &StinespringDilation,
    shape: &CircuitShape,
    pad: &PaddedEnvironment,
    tol: f64,
) -> Result<Channel> {
    let (a, c) = (&shape.a, &shape.c);
    let p = pad.p_dim;
    let target = shape.e_target(p);
    let mut choi = Vec::with_capacity(a.num_blocks() * c.num_blocks());
    for i in 0..a.num_blocks() {
        let di = a.block_dim(i);
        for k in 0..c.num_blocks() {
            let dk = c.block_dim(k);
            let ops = n_dilation.kraus().ops(k, i);
            let mut kraus = linalg::zeros(p * di, dk);
            for (beta, op) in ops.iter().enumerate() {
                for s in 0..di {
                    for t in 0..dk {
                        kraus[(beta * di + s, t)] = op[(t, s)];
                    }
                }
            }
            choi.push(choi_of_kraus([&kraus], p * di, dk));
        }
    }
    let map = CpMap::from_choi_unchecked(c, &target, choi)?;
    let tp = map.is_tp(tol);
    if !tp.tp {
        return Err(Error::NotUnital {
            residual: tp.max_residual(),
        });
    }
    Channel::new(map, tol)
}

/// How `G` acts on the part of `P` outside every `ι_ik` image. Inputs there
/// never occur, so any trace-preserving choice gives the same circuit.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum CompletionPolicy {
    /// Discard and prepare `|0⟩` in the first output block.
    #[default]
    FixedState,
    /// Discard and prepare `1 / dim(D)`.
    MaximallyMixed,
}

/// `G: ⊕_(i,j,k) B(P ⊗ H_out,j) → D`. On the image of `ι_ik` the Kraus
/// operators are `W` rows: `G_(l,α)[c, β·d_j + a] = W[(l,c,α), (a,β)]`.
pub fn assemble_g(
    shape: &CircuitShape,
    w: &Intertwiner,
    left: &LeftDilation,
    pad: &PaddedEnvironment,
    completion: CompletionPolicy,
    tol: f64,
) -> Result<Channel> {
    if w.isometry_defect > 10.0 * tol {
        return Err(Error::IsometryDefect {
            defect: w.isometry_defect,
        });
    }
    let (a, b, c, d) = (&shape.a, &shape.b, &shape.c, &shape.d);
    let p = pad.p_dim;
    let source = shape.g_source(p);
    let (ni, nk, nl) = (a.num_blocks(), c.num_blocks(), d.num_blocks());
    let nh = ni * b.num_blocks();
    let ddims = d.dims();
    let total_d = d.dim() as f64;
    let mut choi = vec![CMat::zeros(0, 0); nl * source.num_blocks()];
    for i in 0..ni {
        for j in 0..b.num_blocks() {
            let dj = b.block_dim(j);
            let cols = p * dj;
            for k in 0..nk {
                let g = shape.g_index(i, j, k);
                let h = j * ni + i;
                let pair = k * nh + h;
                let r = pad.rank(i, k);
                let wb = &w.blocks[pair];
                for l in 0..nl {
                    let dl = ddims[l];
                    let mut ops = Vec::new();
                    for alpha in 0..left.layout[pair][l] {
                        let mut op = linalg::zeros(dl, cols);
                        for cc in 0..dl {
                            let row = left.row(pair, l, cc, alpha, &ddims);
                            for beta in 0..r {
                                for aa in 0..dj {
                                    op[(cc, beta * dj + aa)] = wb[(row, aa * r + beta)];
                                }
                            }
                        }
                        ops.push(op);
                    }
                    for e in r * dj..cols {
                        match completion {
                            CompletionPolicy::FixedState if l == 0 => {
                                let mut op = linalg::zeros(dl, cols);
                                op[(0, e)] = linalg::ONE;
                                ops.push(op);
                            }
                            CompletionPolicy::FixedState => {}
                            CompletionPolicy::MaximallyMixed => {
                                for cc in 0..dl {
                                    let mut op = linalg::zeros(dl, cols);
                                    op[(cc, e)] = linalg::real(total_d.recip().sqrt());
                                    ops.push(op);
                                }
                            }
                        }
                    }
                    choi[l * source.num_blocks() + g] = choi_of_kraus(&ops, dl, cols);
                }
            }
        }
    }
    Channel::new(CpMap::from_choi_unchecked(&source, d, choi)?, tol)
}

/// A circuit for a verified supermap, with the numerical diagnostics of its
/// construction.
#[derive(Clone, Debug)]
pub struct CircuitRealisation {
    pub circuit: Circuit,
    /// `r_ik`, the Kraus ranks of `N`, indexed `[i][k]`.
    pub ranks: Vec<Vec<usize>>,
    /// `max_(i,k) dim(H_in,i) · dim(K_in,k)`.
    pub bound: usize,
    pub w_residual: f64,
    pub w_isometry_defect: f64,
    pub w_partial_isometry_defect: f64,
    /// Largest condition number of the Gram matrices of the right dilation.
    pub gram_condition: f64,
    pub right_minimal: bool,
    pub completion: CompletionPolicy,
}

impl CircuitRealisation {
    pub fn p_dim(&self) -> usize {
        self.circuit.p_dim()
    }

    pub fn e_channel(&self) -> &Channel {
        self.circuit.e_channel()
    }

    pub fn g_channel(&self) -> &Channel {
        self.circuit.g_channel()
    }
}

/// [`realize_with`] using the default completion.
pub fn realize(s: &Supermap, tol: f64) -> Result<CircuitRealisation> {
    realize_with(s, CompletionPolicy::default(), tol)
}

pub fn realize_with(
    s: &Supermap,
    completion: CompletionPolicy,
    tol: f64,
) -> Result<CircuitRealisation> {
    if !s.is_verified() {
        return Err(Error::VerifyRequired);
    }
    let shape = CircuitShape::of(s);
    let n = s.extract_n()?;
    let n_dilation = minimal_stinespring(&n)?;
    let right = right_dilation(&n_dilation, s.from(), tol)?;
    let left = left_dilation(s)?;
    let w = solve_w(&right, &left.dilation, tol)?;

    let (ni, nk) = (shape.a.num_blocks(), shape.c.num_blocks());
    let ranks: Vec<Vec<usize>> = (0..ni)
        .map(|i| (0..nk).map(|k| n_dilation.env_dim(k, i)).collect())
        .collect();
    let bounds: Vec<Vec<usize>> = (0..ni)
        .map(|i| {
            (0..nk)
                .map(|k| shape.a.block_dim(i) * shape.c.block_dim(k))
                .collect()
        })
        .collect();
    let pad = pad_environment(&ranks, &bounds)?;
    let e = assemble_e(&n_dilation, &shape, &pad, tol)?;
    let g = assemble_g(&shape, &w, &left, &pad, completion, tol)?;
    let bound = shape.dimension_bound();
    if pad.p_dim > bound {
        return Err(Error::BoundViolated {
            source_block: 0,
            target_block: 0,
            dim: pad.p_dim,
            bound,
        });
    }
    Ok(CircuitRealisation {
        circuit: Circuit::new(shape, pad.p_dim, e, g)?,
        ranks,
        bound,
        w_residual: w.residual,
        w_isometry_defect: w.isometry_defect,
        w_partial_isometry_defect: w.partial_isometry_defect,
        gram_condition: right.gram_condition(),
        right_minimal: right.is_minimal(W_RELATIVE_CUTOFF),
        completion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::algebra::{BlockOperator, MultiMatrixAlgebra};
    use crate::realize::check_realisation;
    use crate::gen::Seed;

    #[test]
    fn padding_examples() {
        let pad = pad_environment(&[vec![2], vec![3]], &[vec![4], vec![4]]).unwrap();
        assert_eq!(pad.p_dim, 3);
        assert_eq!(pad.injection(0, 0), CMat::identity(3, 2));
        assert_eq!(pad.complement_dim(0, 0), 1);
        let ones = pad_environment(&[vec![1, 1]], &[vec![1, 1]]).unwrap();
        assert_eq!(ones.p_dim, 1);
        assert_eq!(ones.injection(0, 1), CMat::identity(1, 1));
        let zeros = pad_environment(&[vec![0]], &[vec![1]]).unwrap();
        assert_eq!(zeros.p_dim, 1);
        assert!(matches!(
            pad_environment(&[vec![5]], &[vec![4]]),
            Err(Error::BoundViolated { dim: 5, bound: 4, .. })
        ));
    }

    #[test]
    fn unverified_supermap_is_refused() {
        let m2 = MultiMatrixAlgebra::matrix(2);
        let s = Supermap::identity(&m2, &m2);
        assert_eq!(realize(&s, 1e-9).unwrap_err(), Error::VerifyRequired);
        assert_eq!(left_dilation(&s).unwrap_err(), Error::VerifyRequired);
    }

    #[test]
    fn identity_supermap_realises_identity() {
        let m2 = MultiMatrixAlgebra::matrix(2);
        let mut s = Supermap::identity(&m2, &m2);
        assert!(s.verify(1e-9).verdict);
        let r = realize(&s, 1e-9).unwrap();
        assert!(r.w_isometry_defect < 1e-10);
        assert!(r.p_dim() <= 4);
        let report = check_realisation(&r.circuit, &s, 3, 1e-9, Seed(1)).unwrap();
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn left_and_right_dilate_the_same_map() {
        let m2 = MultiMatrixAlgebra::matrix(2);
        let c2 = MultiMatrixAlgebra::classical(2);
        let mut s = Supermap::identity(&m2, &c2);
        assert!(s.verify(1e-9).verdict);
        let left = left_dilation(&s).unwrap();
        let n_dil = minimal_stinespring(&s.extract_n().unwrap()).unwrap();
        let right = right_dilation(&n_dil, s.from(), 1e-9).unwrap();
        let lm = left.dilation.to_cpmap();
        let rm = right.to_cpmap();
        assert!(lm.choi_distance(&rm).unwrap() < 1e-12);
        let x = BlockOperator::identity(s.from().base());
        let direct = s.phi(&x).unwrap();
        assert!(left.dilation.apply(&x).unwrap().distance(&direct) < 1e-12);
    }
}
