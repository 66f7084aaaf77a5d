//! Seeded random instances and brute-force oracles.
//!
//! All randomness goes through [`Seed`]; equal seeds give bit-identical
//! outputs on one platform. Batches split seeds with [`Seed::split`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::algebra::{BlockOperator, HybridState, MultiMatrixAlgebra};
use crate::cpmaps::{linear_map_from_action, Channel, CpMap};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::realize::{evaluate_choi, Circuit, CircuitShape};
use crate::supermap::{hom_algebra, HomAlgebra, Supermap};
use crate::DEFAULT_TOL;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Seed(pub u64);

/// SplitMix64 finaliser.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Seed {
    /// Child seed for item `index` of a batch: `splitmix64(seed ^ index)`.
    pub fn split(self, index: u64) -> Seed {
        Seed(splitmix64(self.0 ^ index))
    }

    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }
}

/// Complex matrix with independent standard normal real and imaginary parts.
pub fn gaussian(rng: &mut impl Rng, rows: usize, cols: usize) -> CMat {
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        linalg::c(re, im)
    })
}

fn random_psd(rng: &mut impl Rng, d: usize) -> CMat {
    let g = gaussian(rng, d, d);
    &g * g.adjoint()
}

/// Random hybrid state: a Gaussian Gram matrix per block, normalised to
/// total trace one.
pub fn random_state(a: &MultiMatrixAlgebra, seed: Seed) -> HybridState {
    let mut rng = seed.rng();
    let blocks: Vec<CMat> = a.dims().into_iter().map(|d| random_psd(&mut rng, d)).collect();
    let op = BlockOperator::from_blocks(a, blocks).expect("shapes");
    let tr = op.trace().re;
    HybridState::new(op.scale_real(1.0 / tr), DEFAULT_TOL).expect("positive with trace one")
}

fn inverse_sqrt(m: &CMat) -> Option<CMat> {
    let (vals, vecs) = linalg::eigh(m);
    let max = vals.iter().copied().fold(0.0, f64::max);
    if vals.first().is_none_or(|&v| v <= 1e-12 * max.max(f64::MIN_POSITIVE)) {
        return None;
    }
    let diag = CMat::from_diagonal(&nalgebra::DVector::from_iterator(
        vals.len(),
        vals.iter().map(|v| linalg::real(v.sqrt().recip())),
    ));
    Some(&vecs * diag * vecs.adjoint())
}

/// Random channel by Choi renormalisation: Gaussian PSD blocks `M_ji`,
/// `R_i = Σ_j Tr_{K_j} M_ji`, `C_ji = (1 ⊗ R_i^{-1/2}) M_ji (1 ⊗ R_i^{-1/2})`.
pub fn random_channel(a: &MultiMatrixAlgebra, b: &MultiMatrixAlgebra, seed: Seed) -> Result<Channel> {
    let mut rng = seed.rng();
    let (ns, nt) = (a.num_blocks(), b.num_blocks());
    'attempt: for _ in 0..10 {
        let raw: Vec<CMat> = (0..ns * nt)
            .map(|k| random_psd(&mut rng, b.block_dim(k / ns) * a.block_dim(k % ns)))
            .collect();
        let unnormalised = CpMap::from_choi_unchecked(a, b, raw)?;
        let mut choi = unnormalised.choi_blocks().to_vec();
        for (i, r) in unnormalised.choi_marginals().iter().enumerate() {
            let Some(inv) = inverse_sqrt(r) else {
                continue 'attempt;
            };
            for j in 0..nt {
                let side = linalg::kron(&linalg::eye(b.block_dim(j)), &inv);
                let blk = &mut choi[j * ns + i];
                *blk = linalg::hermitize(&(&side * &*blk * &side));
            }
        }
        return Channel::new(CpMap::from_choi_unchecked(a, b, choi)?, DEFAULT_TOL);
    }
    Err(Error::SingularMarginal)
}

/// A random circuit of the fixed realisation shape with memory dimension
/// `p_dim`.
pub fn random_circuit(shape: &CircuitShape, p_dim: usize, seed: Seed) -> Result<Circuit> {
    let e = random_channel(&shape.c, &shape.e_target(p_dim), seed.split(0))?;
    let g = random_channel(&shape.g_source(p_dim), &shape.d, seed.split(1))?;
    Circuit::new(shape.clone(), p_dim, e, g)
}

/// The supermap computed by a circuit, read off on the matrix units of
/// `Hom(A, B)`.
pub fn supermap_from_circuit(circuit: &Circuit) -> Result<Supermap> {
    let shape = circuit.shape();
    let from = hom_algebra(&shape.a, &shape.b);
    let to = hom_algebra(&shape.c, &shape.d);
    let inner = linear_map_from_action(from.base(), to.base(), |x| evaluate_choi(circuit, x))?;
    Supermap::new(inner, from, to, DEFAULT_TOL)
}

/// A deterministic supermap from a random circuit with memory `p_dim`.
pub fn random_supermap_from_circuit(
    a: &MultiMatrixAlgebra,
    b: &MultiMatrixAlgebra,
    c: &MultiMatrixAlgebra,
    d: &MultiMatrixAlgebra,
    p_dim: usize,
    seed: Seed,
) -> Result<Supermap> {
    let circuit = random_circuit(&CircuitShape::new(a, b, c, d), p_dim, seed)?;
    supermap_from_circuit(&circuit)
}

pub fn identity_supermap(a: &MultiMatrixAlgebra, b: &MultiMatrixAlgebra) -> Supermap {
    Supermap::identity(a, b)
}

/// Interior points of the TP Choi operators: `base` and `base + ε d_e` for
/// an orthonormal basis `d_e` of the Hermitian part of `ker Tr_out`.
#[derive(Clone, Debug)]
pub struct TpAffineBasis {
    pub base_point: BlockOperator,
    pub directions: Vec<BlockOperator>,
    pub epsilon: f64,
}

impl TpAffineBasis {
    pub fn len(&self) -> usize {
        1 + self.directions.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn elements(&self) -> impl Iterator<Item = BlockOperator> + '_ {
        std::iter::once(self.base_point.clone()).chain(
            self.directions
                .iter()
                .map(|d| self.base_point.add(&d.scale_real(self.epsilon)).expect("same algebra")),
        )
    }
}

/// `base = tp_section(1)`, whose smallest eigenvalue is `1 / dim(out)`;
/// `ε` is half of that, so every element stays positive definite.
pub fn tp_affine_basis(hom: &HomAlgebra) -> TpAffineBasis {
    let base_point = hom
        .tp_section(&BlockOperator::identity(hom.input()))
        .expect("same algebra");
    TpAffineBasis {
        base_point,
        directions: hom.kernel_basis(),
        epsilon: 0.5 / hom.output().dim() as f64,
    }
}

/// Literal check of determinism: `S(e)` satisfies the TP condition for every
/// element `e` of the basis.
pub fn brute_force_tp_preservation(s: &Supermap, basis: &TpAffineBasis, tol: f64) -> bool {
    basis.elements().all(|e| {
        let out = s.apply_to_choi(&e).expect("algebras match");
        s.to().tp_residual(&out).expect("algebras match") <= tol
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PerturbMode {
    /// Push one Choi eigenvalue of `S` to `−ε`.
    CpBreaking,
    /// Mix in a CP map that depends on the `ker Tr_out` component of its
    /// input, so the output no longer factors through `Tr_out`.
    TpBreaking,
}

/// Negative test material. `ε = 0` returns `s` unchanged (but unverified).
pub fn perturb_supermap(s: &Supermap, epsilon: f64, mode: PerturbMode, seed: Seed) -> Result<Supermap> {
    let mut rng = seed.rng();
    let inner = s.inner();
    if epsilon == 0.0 {
        return Supermap::new_unchecked(inner.clone(), s.from().clone(), s.to().clone());
    }
    let perturbed = match mode {
        PerturbMode::CpBreaking => {
            let mut choi = inner.choi_blocks().to_vec();
            let k = rng.random_range(0..choi.len());
            let (vals, vecs) = linalg::eigh(&choi[k]);
            let v = vecs.column(0).into_owned();
            choi[k] -= (&v * v.adjoint()).scale(vals[0] + epsilon);
            CpMap::from_choi_unchecked(inner.source(), inner.target(), choi)?
        }
        PerturbMode::TpBreaking => {
            let from = s.from();
            if from.kernel_dim() == 0 {
                // nothing to break inside the kernel; break unitality instead
                inner.scale(1.0 + epsilon)
            } else {
                let delta = tp_breaking_direction(s, &mut rng)?;
                inner.scale(1.0 - epsilon).add_scaled(&delta, epsilon)?
            }
        }
    };
    Supermap::new_unchecked(perturbed, s.from().clone(), s.to().clone())
}

/// `Δ(X) = Tr(M X) · 1 / (Tr(M base) · dim(D))` for a random rank-one
/// `M = v v^dagger`. `Δ` is CP and sends TP elements with the same `M`-weight
/// as `base` to TP elements, but it does not vanish on `ker Tr_out`.
fn tp_breaking_direction(s: &Supermap, rng: &mut impl Rng) -> Result<CpMap> {
    let from = s.from();
    let hom = from.base();
    let (_, _, c, d) = s.algebras();
    let vs: Vec<CMat> = hom.dims().into_iter().map(|n| gaussian(rng, n, 1)).collect();
    let m: Vec<CMat> = vs.iter().map(|v| v * v.adjoint()).collect();
    let base = tp_affine_basis(from).base_point;
    let weight: f64 = base
        .blocks()
        .iter()
        .zip(&m)
        .map(|(b, mm)| linalg::hs(mm, b).re)
        .sum();
    let norm = weight * d.dim() as f64;
    let target = s.to().base();
    let nh = hom.num_blocks();
    let mut choi = Vec::with_capacity(nh * target.num_blocks());
    for t in 0..target.num_blocks() {
        let (l, k) = (t / c.num_blocks(), t % c.num_blocks());
        let dt = d.block_dim(l) * c.block_dim(k);
        for mm in &m {
            choi.push(linalg::kron(&linalg::eye(dt), &mm.transpose()).unscale(norm));
        }
    }
    CpMap::from_choi_unchecked(hom, target, choi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::supermap::verify_deterministic;

    #[test]
    fn seeds_are_deterministic() {
        let a = MultiMatrixAlgebra::from_dims(&[1, 2]).unwrap();
        assert_eq!(random_state(&a, Seed(7)), random_state(&a, Seed(7)));
        assert_ne!(random_state(&a, Seed(7)), random_state(&a, Seed(8)));
        assert_ne!(Seed(7).split(0), Seed(7).split(1));
    }

    #[test]
    fn trivial_state_and_channel() {
        let one = MultiMatrixAlgebra::trivial();
        let st = random_state(&one, Seed(1));
        assert!((st.operator().block(0)[(0, 0)] - linalg::ONE).norm() < 1e-15);
        let ch = random_channel(&one, &one, Seed(1)).unwrap();
        assert!((ch.choi_block(0, 0)[(0, 0)] - linalg::ONE).norm() < 1e-15);
    }

    #[test]
    fn classical_channel_is_stochastic_matrix() {
        let bits = MultiMatrixAlgebra::classical(2);
        let ch = random_channel(&bits, &bits, Seed(5)).unwrap();
        for x in 0..2 {
            let col: f64 = (0..2).map(|y| ch.choi_block(y, x)[(0, 0)].re).sum();
            assert!((col - 1.0).abs() < 1e-12);
            for y in 0..2 {
                assert!(ch.choi_block(y, x)[(0, 0)].re >= 0.0);
                assert!(ch.choi_block(y, x)[(0, 0)].im.abs() < 1e-15);
            }
        }
    }

    #[test]
    fn affine_basis_elements_are_tp_and_positive() {
        let hom = hom_algebra(
            &MultiMatrixAlgebra::from_dims(&[2, 1]).unwrap(),
            &MultiMatrixAlgebra::from_dims(&[1, 2]).unwrap(),
        );
        let basis = tp_affine_basis(&hom);
        assert_eq!(basis.len(), 1 + hom.kernel_dim());
        for e in basis.elements() {
            assert!(hom.tp_residual(&e).unwrap() < 1e-12);
            assert!(e.is_positive(0.0));
        }
        let scalars = hom_algebra(&MultiMatrixAlgebra::trivial(), &MultiMatrixAlgebra::trivial());
        let basis = tp_affine_basis(&scalars);
        assert_eq!(basis.len(), 1);
        assert_eq!(basis.base_point, BlockOperator::identity(scalars.base()));
    }

    #[test]
    fn brute_force_on_identity_and_scaled() {
        let m2 = MultiMatrixAlgebra::matrix(2);
        let s = identity_supermap(&m2, &m2);
        let basis = tp_affine_basis(s.from());
        assert!(brute_force_tp_preservation(&s, &basis, 1e-9));
        assert!(!brute_force_tp_preservation(&s.scale(1.5), &basis, 1e-9));
    }

    #[test]
    fn perturbations_break_what_they_claim() {
        let m1 = MultiMatrixAlgebra::trivial();
        let m2 = MultiMatrixAlgebra::matrix(2);
        let bits = MultiMatrixAlgebra::classical(2);
        let s = random_supermap_from_circuit(&m2, &bits, &m1, &m2, 1, Seed(11)).unwrap();
        assert!(verify_deterministic(&s, 1e-9).verdict);
        let same = perturb_supermap(&s, 0.0, PerturbMode::TpBreaking, Seed(1)).unwrap();
        assert_eq!(same.inner(), s.inner());
        let tp = perturb_supermap(&s, 1e-2, PerturbMode::TpBreaking, Seed(1)).unwrap();
        let report = verify_deterministic(&tp, 1e-9);
        assert!(report.cp_ok && !report.verdict);
        assert!(report.n_unital_residual < 1e-9);
        let cp = perturb_supermap(&s, 1e-2, PerturbMode::CpBreaking, Seed(1)).unwrap();
        let p = cp.inner().cp_report(1e-9);
        assert!(!p.positive);
        assert!((p.min_eigenvalue + 1e-2).abs() < 1e-9);
    }
}
