//! Dense complex matrix helpers shared by the rest of the crate.
//!
//! Tensor products follow the usual Kronecker convention: for factors with
//! dimensions `[d0, d1, ..]` the composite basis index is row-major, so the
//! first factor is the most significant digit.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[inline]
pub fn real(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn zeros(rows: usize, cols: usize) -> CMat {
    CMat::zeros(rows, cols)
}

pub fn eye(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `|a><b|` in dimension `n`.
pub fn matrix_unit(n: usize, a: usize, b: usize) -> CMat {
    let mut m = CMat::zeros(n, n);
    m[(a, b)] = ONE;
    m
}

pub fn kron(a: &CMat, b: &CMat) -> CMat {
    a.kronecker(b)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn trace(a: &CMat) -> Complex64 {
    a.diagonal().iter().copied().sum()
}

/// `Tr(a^dagger b)`.
pub fn hs(a: &CMat, b: &CMat) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

pub fn hermitian_defect(a: &CMat) -> f64 {
    frobenius(&(a - a.adjoint()))
}

pub fn hermitize(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Hermitian eigendecomposition of the symmetrised input.
///
/// Eigenvalues are returned in ascending order with eigenvectors as the
/// matching columns.
pub fn eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    if n == 0 {
        return (Vec::new(), CMat::zeros(0, 0));
    }
    let eig = SymmetricEigen::new(hermitize(a));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| eig.eigenvalues[x].total_cmp(&eig.eigenvalues[y]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMat::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    eigh(a).0.first().copied().unwrap_or(0.0)
}

/// Decompose a composite index into per-factor digits.
fn digits(mut index: usize, dims: &[usize], out: &mut [usize]) {
    for k in (0..dims.len()).rev() {
        out[k] = index % dims[k];
        index /= dims[k];
    }
}

fn compose_index(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (d, n)| acc * n + d)
}

/// Partial trace over the factors flagged in `traced`.
pub fn partial_trace(m: &CMat, dims: &[usize], traced: &[bool]) -> CMat {
    assert_eq!(dims.len(), traced.len());
    let total: usize = dims.iter().product();
    assert_eq!(m.nrows(), total);
    let kept_dims: Vec<usize> = dims
        .iter()
        .zip(traced)
        .filter(|(_, &t)| !t)
        .map(|(&d, _)| d)
        .collect();
    let kept: usize = kept_dims.iter().product();
    let mut out = CMat::zeros(kept, kept);
    let mut dr = vec![0; dims.len()];
    let mut dc = vec![0; dims.len()];
    let mut kr = Vec::with_capacity(kept_dims.len());
    let mut kc = Vec::with_capacity(kept_dims.len());
    for r in 0..total {
        digits(r, dims, &mut dr);
        for col in 0..total {
            digits(col, dims, &mut dc);
            if (0..dims.len()).any(|k| traced[k] && dr[k] != dc[k]) {
                continue;
            }
            kr.clear();
            kc.clear();
            for k in 0..dims.len() {
                if !traced[k] {
                    kr.push(dr[k]);
                    kc.push(dc[k]);
                }
            }
            let (i, j) = (
                compose_index(&kr, &kept_dims),
                compose_index(&kc, &kept_dims),
            );
            out[(i, j)] += m[(r, col)];
        }
    }
    out
}

/// Reorder tensor factors: position `p` of the result holds old factor `perm[p]`.
pub fn permute_factors(m: &CMat, dims: &[usize], perm: &[usize]) -> CMat {
    let total: usize = dims.iter().product();
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let map = |old: usize, buf: &mut Vec<usize>, nd: &mut Vec<usize>| {
        digits(old, dims, buf);
        for (p, &src) in perm.iter().enumerate() {
            nd[p] = buf[src];
        }
        compose_index(nd, &new_dims)
    };
    let mut buf = vec![0; dims.len()];
    let mut nd = vec![0; dims.len()];
    let index: Vec<usize> = (0..total).map(|o| map(o, &mut buf, &mut nd)).collect();
    let mut out = CMat::zeros(total, total);
    for r in 0..total {
        for col in 0..total {
            out[(index[r], index[col])] = m[(r, col)];
        }
    }
    out
}

/// Column-major flattening, used to stack Kraus operators as vectors.
pub fn flatten(a: &CMat) -> Vec<Complex64> {
    a.as_slice().to_vec()
}

/// Moore-Penrose pseudoinverse with singular values below `rel_cut * sigma_max` dropped.
pub struct PseudoInverse {
    pub pinv: CMat,
    pub rank: usize,
    pub sigma_max: f64,
    pub sigma_min_kept: f64,
}

pub fn pseudo_inverse(a: &CMat, rel_cut: f64) -> PseudoInverse {
    let (r, cdim) = a.shape();
    if r == 0 || cdim == 0 {
        return PseudoInverse {
            pinv: CMat::zeros(cdim, r),
            rank: 0,
            sigma_max: 0.0,
            sigma_min_kept: 0.0,
        };
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let sigma_max = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let cut = rel_cut * sigma_max;
    let mut pinv = CMat::zeros(cdim, r);
    let mut rank = 0;
    let mut sigma_min_kept = f64::INFINITY;
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cut && s > 0.0 {
            rank += 1;
            sigma_min_kept = sigma_min_kept.min(s);
            let vk = vt.row(k).adjoint();
            let uk = u.column(k).adjoint();
            pinv += (vk * uk).scale(1.0 / s);
        }
    }
    if rank == 0 {
        sigma_min_kept = 0.0;
    }
    PseudoInverse {
        pinv,
        rank,
        sigma_max,
        sigma_min_kept,
    }
}
