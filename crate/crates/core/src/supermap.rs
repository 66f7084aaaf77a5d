//! Supermaps as CP maps between Hom-algebras.
//!
//! For channels `A → B` with `A = ⊕_i B(H_in,i)` and `B = ⊕_j B(H_out,j)`,
//! Choi operators live in `Hom(A, B) = ⊕_(j,i) B(H_out,j ⊗ H_in,i)`. A
//! supermap is a CP map `S: Hom(A, B) → Hom(C, D)`; it is deterministic when
//! it sends Choi operators of channels to Choi operators of channels.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::algebra::{BlockOperator, MultiMatrixAlgebra, Positivity};
use crate::cpmaps::{linear_map_from_action, CpMap};
use crate::error::Result;
use crate::gen::{tp_affine_basis, TpAffineBasis};
use crate::linalg::{self, CMat};

/// `Hom(input, output)`, with blocks `(j, i)` in lexicographic order and the
/// output factor first inside each block.
#[derive(Clone, Debug, PartialEq)]
pub struct HomAlgebra {
    base: MultiMatrixAlgebra,
    input: MultiMatrixAlgebra,
    output: MultiMatrixAlgebra,
}

pub fn hom_algebra(input: &MultiMatrixAlgebra, output: &MultiMatrixAlgebra) -> HomAlgebra {
    HomAlgebra {
        base: MultiMatrixAlgebra::pair_product(output, input),
        input: input.clone(),
        output: output.clone(),
    }
}

impl HomAlgebra {
    pub fn base(&self) -> &MultiMatrixAlgebra {
        &self.base
    }

    pub fn input(&self) -> &MultiMatrixAlgebra {
        &self.input
    }

    pub fn output(&self) -> &MultiMatrixAlgebra {
        &self.output
    }

    pub fn block_index(&self, j: usize, i: usize) -> usize {
        j * self.input.num_blocks() + i
    }

    /// `x_i = Σ_j Tr_{H_out,j} X_(j,i)`.
    pub fn tr_out(&self, x: &BlockOperator) -> Result<BlockOperator> {
        self.base.ensure_compatible(x.algebra())?;
        let blocks = (0..self.input.num_blocks())
            .map(|i| {
                let di = self.input.block_dim(i);
                let mut acc = linalg::zeros(di, di);
                for j in 0..self.output.num_blocks() {
                    acc += linalg::partial_trace(
                        x.block(self.block_index(j, i)),
                        &[self.output.block_dim(j), di],
                        &[true, false],
                    );
                }
                acc
            })
            .collect();
        BlockOperator::from_blocks(&self.input, blocks)
    }

    /// `1_out ⊠ x`: block `(j, i)` is `1_{H_out,j} ⊗ x_i`.
    pub fn embed_identity_out(&self, x: &BlockOperator) -> Result<BlockOperator> {
        self.input.ensure_compatible(x.algebra())?;
        let blocks = (0..self.base.num_blocks())
            .map(|k| {
                let (j, i) = (k / self.input.num_blocks(), k % self.input.num_blocks());
                linalg::kron(&linalg::eye(self.output.block_dim(j)), x.block(i))
            })
            .collect();
        BlockOperator::from_blocks(&self.base, blocks)
    }

    /// `(1_out ⊠ x) / dim(H_out)`; a right inverse of [`HomAlgebra::tr_out`].
    pub fn tp_section(&self, x: &BlockOperator) -> Result<BlockOperator> {
        Ok(self
            .embed_identity_out(x)?
            .scale_real(1.0 / self.output.dim() as f64))
    }

    /// `‖Tr_out x − 1‖_F`; zero exactly on the TP condition.
    pub fn tp_residual(&self, x: &BlockOperator) -> Result<f64> {
        Ok(self
            .tr_out(x)?
            .distance(&BlockOperator::identity(&self.input)))
    }

    /// Real dimension of the Hermitian part of `ker Tr_out`.
    pub fn kernel_dim(&self) -> usize {
        self.base.linear_dim() - self.input.linear_dim()
    }

    /// Orthonormal basis (for `Re Tr(x^dagger y)`) of the Hermitian elements
    /// of `ker Tr_out`.
    pub fn kernel_basis(&self) -> Vec<BlockOperator> {
        let ni = self.input.num_blocks();
        let mut basis: Vec<Vec<CMat>> = Vec::with_capacity(self.kernel_dim());
        let zero = BlockOperator::zero(&self.base).into_blocks();
        for k in 0..self.base.num_blocks() {
            let (j, i) = (k / ni, k % ni);
            let (dout, din) = (self.output.block_dim(j), self.input.block_dim(i));
            for h_out in hermitian_basis(dout) {
                let tr = linalg::trace(&h_out);
                for h_in in hermitian_basis(din) {
                    let mut g = zero.clone();
                    g[k] = linalg::kron(&h_out, &h_in);
                    if tr.norm() > 0.0 {
                        // move the trace into the first output block
                        let d0 = self.output.block_dim(0);
                        let comp = linalg::kron(&linalg::matrix_unit(d0, 0, 0), &h_in);
                        g[i] -= comp.map(|z| z * tr);
                    }
                    if let Some(v) = orthonormalise(&basis, g) {
                        basis.push(v);
                    }
                }
            }
        }
        basis
            .into_iter()
            .map(|b| BlockOperator::from_blocks(&self.base, b).expect("shapes"))
            .collect()
    }
}

/// Hermitian orthonormal basis of `M_d`: `E_aa`, `(E_ab + E_ba)/√2`,
/// `i(E_ab − E_ba)/√2`.
pub(crate) fn hermitian_basis(d: usize) -> Vec<CMat> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for a in 0..d {
        out.push(linalg::matrix_unit(d, a, a));
        for b in a + 1..d {
            let mut sym = linalg::zeros(d, d);
            sym[(a, b)] = linalg::real(s);
            sym[(b, a)] = linalg::real(s);
            out.push(sym);
            let mut asym = linalg::zeros(d, d);
            asym[(a, b)] = linalg::c(0.0, s);
            asym[(b, a)] = linalg::c(0.0, -s);
            out.push(asym);
        }
    }
    out
}

fn real_inner(x: &[CMat], y: &[CMat]) -> f64 {
    x.iter().zip(y).map(|(a, b)| linalg::hs(a, b).re).sum()
}

/// One Gram-Schmidt step (applied twice for stability); `None` when `g` is
/// already in the span.
fn orthonormalise(basis: &[Vec<CMat>], mut g: Vec<CMat>) -> Option<Vec<CMat>> {
    let norm0 = real_inner(&g, &g).sqrt();
    if norm0 == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for b in basis {
            let p = real_inner(b, &g);
            for (gk, bk) in g.iter_mut().zip(b) {
                *gk -= bk.scale(p);
            }
        }
    }
    let norm = real_inner(&g, &g).sqrt();
    if norm <= 1e-10 * norm0 {
        return None;
    }
    Some(g.into_iter().map(|m| m.unscale(norm)).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct Supermap {
    inner: CpMap,
    from: HomAlgebra,
    to: HomAlgebra,
    verified: bool,
}

impl Supermap {
    /// Wraps a CP map `Hom(a, b) → Hom(c, d)`; rejects non-CP input.
    pub fn new(inner: CpMap, from: HomAlgebra, to: HomAlgebra, tol: f64) -> Result<Self> {
        let s = Self::new_unchecked(inner, from, to)?;
        s.inner.ensure_cp(tol)?;
        Ok(s)
    }

    /// Shape checks only. Used for perturbed or deliberately broken maps.
    pub fn new_unchecked(inner: CpMap, from: HomAlgebra, to: HomAlgebra) -> Result<Self> {
        inner.source().ensure_compatible(from.base())?;
        inner.target().ensure_compatible(to.base())?;
        let inner = inner.relabel(from.base(), to.base())?;
        Ok(Self {
            inner,
            from,
            to,
            verified: false,
        })
    }

    /// The supermap `F ↦ F` on channels `a → b`.
    pub fn identity(a: &MultiMatrixAlgebra, b: &MultiMatrixAlgebra) -> Self {
        let hom = hom_algebra(a, b);
        Self {
            inner: CpMap::identity(hom.base()),
            from: hom.clone(),
            to: hom,
            verified: false,
        }
    }

    pub fn inner(&self) -> &CpMap {
        &self.inner
    }

    pub fn from(&self) -> &HomAlgebra {
        &self.from
    }

    pub fn to(&self) -> &HomAlgebra {
        &self.to
    }

    pub fn is_verified(&self) -> bool {
        self.verified
    }

    /// The four algebras `(A, B, C, D)` of a supermap from channels `A → B`
    /// to channels `C → D`.
    pub fn algebras(
        &self,
    ) -> (
        &MultiMatrixAlgebra,
        &MultiMatrixAlgebra,
        &MultiMatrixAlgebra,
        &MultiMatrixAlgebra,
    ) {
        (
            self.from.input(),
            self.from.output(),
            self.to.input(),
            self.to.output(),
        )
    }

    pub fn apply_to_choi(&self, c: &BlockOperator) -> Result<BlockOperator> {
        self.inner.apply(c)
    }

    /// Image of a channel's Choi operator.
    pub fn apply_to_channel(&self, f: &CpMap) -> Result<CpMap> {
        self.from.input().ensure_compatible(f.source())?;
        self.from.output().ensure_compatible(f.target())?;
        let out = self.apply_to_choi(&f.choi_operator())?;
        CpMap::from_choi_unchecked(self.to.input(), self.to.output(), out.into_blocks())
    }

    /// `Tr_{K_out} S(X)`.
    pub fn phi(&self, x: &BlockOperator) -> Result<BlockOperator> {
        self.to.tr_out(&self.apply_to_choi(x)?)
    }

    /// `N(x) = Tr_{K_out} S(section(x))` as a linear map `A → C`, with no
    /// positivity check.
    pub fn n_linear(&self) -> Result<CpMap> {
        linear_map_from_action(self.from.input(), self.to.input(), |x| {
            self.phi(&self.from.tp_section(x)?)
        })
    }

    /// The unital CP map `N` through which `Tr_{K_out} ∘ S` factors.
    pub fn extract_n(&self) -> Result<CpMap> {
        self.inner.ensure_cp(crate::DEFAULT_TOL)?;
        self.n_linear()
    }

    /// Runs [`verify_deterministic`] and records a positive verdict.
    pub fn verify(&mut self, tol: f64) -> VerificationReport {
        let report = verify_deterministic(self, tol);
        self.verified = report.verdict;
        report
    }

    /// `S_*(1_{K_out} ⊠ state)` for an element of `C`.
    pub fn dual_on_state(&self, state: &BlockOperator) -> Result<BlockOperator> {
        self.inner.hs_dual().apply(&self.to.embed_identity_out(state)?)
    }

    pub fn scale(&self, s: f64) -> Supermap {
        Supermap {
            inner: self.inner.scale(s),
            from: self.from.clone(),
            to: self.to.clone(),
            verified: false,
        }
    }
}

#[derive(Clone, Debug)]
pub struct VerificationReport {
    pub cp_ok: bool,
    pub cp: Positivity,
    /// `max_e ‖Tr_{K_out} S(B_e)‖_F` over an orthonormal basis of `ker Tr_{H_out}`.
    pub kernel_residual: f64,
    pub n_map: CpMap,
    /// `‖N(1) − 1‖_F`.
    pub n_unital_residual: f64,
    pub n_cp_ok: bool,
    pub verdict: bool,
}

/// Checks that `s` is CP, that `Tr_{K_out} ∘ S` vanishes on `ker Tr_{H_out}`
/// and that the induced `N` is unital. Together these are equivalent to
/// sending every TP Choi operator to a TP Choi operator.
pub fn verify_deterministic(s: &Supermap, tol: f64) -> VerificationReport {
    let cp = s.inner.cp_report(tol);
    let kernel_residual = s
        .from
        .kernel_basis()
        .iter()
        .map(|b| s.phi(b).expect("algebras match").frobenius())
        .fold(0.0, f64::max);
    let n_map = s.n_linear().expect("algebras match");
    let n_unital_residual = n_map
        .apply(&BlockOperator::identity(s.from.input()))
        .expect("algebras match")
        .distance(&BlockOperator::identity(s.to.input()));
    let n_cp_ok = n_map.cp_report(tol).positive;
    let verdict = cp.positive && kernel_residual <= tol && n_unital_residual <= tol;
    VerificationReport {
        cp_ok: cp.positive,
        cp,
        kernel_residual,
        n_map,
        n_unital_residual,
        n_cp_ok,
        verdict,
    }
}

#[derive(Clone, Debug)]
pub struct Lemma1Decomposition {
    /// `Tr_out(c) / dim(out)`.
    pub rho: BlockOperator,
    /// `‖c − 1 ⊠ rho‖_F`.
    pub residual: f64,
    /// `max_a |⟨c, F_a⟩ − 1|` over the TP affine basis.
    pub hypothesis_residual: f64,
    /// Inverse smallest singular value of `c ↦ (⟨c, F_a⟩)_a` on `ker Tr_out`;
    /// a hypothesis violation of size `δ` allows a residual up to `κ·δ`.
    pub kappa: f64,
}

/// Splits `c ∈ Hom` as `1_out ⊠ rho` plus a remainder.
pub fn lemma1_decompose(c: &BlockOperator, hom: &HomAlgebra) -> Result<Lemma1Decomposition> {
    let rho = hom.tr_out(c)?.scale_real(1.0 / hom.output().dim() as f64);
    let residual = c.distance(&hom.embed_identity_out(&rho)?);
    let basis = tp_affine_basis(hom);
    let hypothesis_residual = basis
        .elements()
        .map(|f| (f.hs_inner(c).expect("same algebra") - Complex64::new(1.0, 0.0)).norm())
        .fold(0.0, f64::max);
    Ok(Lemma1Decomposition {
        rho,
        residual,
        hypothesis_residual,
        kappa: condition_factor(hom, &basis),
    })
}

fn condition_factor(hom: &HomAlgebra, basis: &TpAffineBasis) -> f64 {
    let kernel = hom.kernel_basis();
    if kernel.is_empty() {
        return 1.0;
    }
    let elements: Vec<BlockOperator> = basis.elements().collect();
    let m = DMatrix::<f64>::from_fn(elements.len(), kernel.len(), |a, e| {
        elements[a].hs_inner(&kernel[e]).expect("same algebra").re
    });
    let sv = m.singular_values();
    let smin = sv.iter().copied().fold(f64::INFINITY, f64::min);
    if smin > 0.0 {
        1.0 / smin
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(n: usize) -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::matrix(n)
    }

    #[test]
    fn hom_algebra_shapes() {
        let povm = hom_algebra(&m(2), &MultiMatrixAlgebra::classical(2));
        assert_eq!(povm.base().dims(), vec![2, 2]);
        let states = hom_algebra(&MultiMatrixAlgebra::trivial(), &m(2));
        assert_eq!(states.base().dims(), vec![2]);
        assert_eq!(hom_algebra(&m(2), &m(3)).base().dims(), vec![6]);
    }

    #[test]
    fn section_is_right_inverse_of_trace() {
        let hom = hom_algebra(
            &MultiMatrixAlgebra::from_dims(&[1, 2]).unwrap(),
            &MultiMatrixAlgebra::from_dims(&[2, 1]).unwrap(),
        );
        let x = BlockOperator::from_blocks(
            hom.input(),
            vec![
                CMat::from_element(1, 1, linalg::real(0.3)),
                CMat::from_row_slice(
                    2,
                    2,
                    &[linalg::real(1.0), linalg::c(0.5, 0.5), linalg::c(0.5, -0.5), linalg::real(-2.0)],
                ),
            ],
        )
        .unwrap();
        let back = hom.tr_out(&hom.tp_section(&x).unwrap()).unwrap();
        assert!(back.distance(&x) < 1e-12);
        let zero = BlockOperator::zero(hom.input());
        assert_eq!(hom.tp_section(&zero).unwrap(), BlockOperator::zero(hom.base()));
        let id_section = hom_algebra(&m(2), &m(2))
            .tp_section(&BlockOperator::identity(&m(2)))
            .unwrap();
        assert!(id_section.distance(&BlockOperator::identity(&m(4)).scale_real(0.5)) < 1e-15);
    }

    #[test]
    fn kernel_basis_is_orthonormal_and_traceless() {
        let hom = hom_algebra(
            &MultiMatrixAlgebra::from_dims(&[1, 2]).unwrap(),
            &MultiMatrixAlgebra::from_dims(&[2, 1]).unwrap(),
        );
        let basis = hom.kernel_basis();
        // Σ (dout·din)^2 − Σ din^2 = (4 + 16 + 1 + 4) − (1 + 4)
        assert_eq!(basis.len(), 20);
        assert_eq!(basis.len(), hom.kernel_dim());
        for (a, x) in basis.iter().enumerate() {
            assert!(x.hermitian_defect() < 1e-12);
            assert!(hom.tr_out(x).unwrap().frobenius() < 1e-12);
            for y in &basis[..a] {
                assert!(x.hs_inner(y).unwrap().re.abs() < 1e-12);
            }
            assert!((x.frobenius() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn identity_supermap_is_deterministic() {
        let mut s = Supermap::identity(&m(2), &MultiMatrixAlgebra::classical(2));
        let report = s.verify(1e-9);
        assert!(report.verdict, "{report:?}");
        assert!(s.is_verified());
        let n = report.n_map;
        assert!(n.choi_distance(&CpMap::identity(&m(2))).unwrap() < 1e-12);
    }

    #[test]
    fn scaled_identity_is_rejected() {
        let s = Supermap::identity(&m(2), &m(2)).scale(2.0);
        let report = verify_deterministic(&s, 1e-9);
        assert!(report.cp_ok);
        assert!(!report.verdict);
        assert!((report.n_unital_residual - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn decomposes_product_operator() {
        let hom = hom_algebra(&m(2), &m(2));
        let rho0 = BlockOperator::from_blocks(
            &m(2),
            vec![CMat::from_row_slice(
                2,
                2,
                &[linalg::real(0.75), linalg::c(0.1, 0.2), linalg::c(0.1, -0.2), linalg::real(0.25)],
            )],
        )
        .unwrap();
        let c = hom.embed_identity_out(&rho0).unwrap();
        let d = lemma1_decompose(&c, &hom).unwrap();
        assert!(d.rho.distance(&rho0) < 1e-14);
        assert!(d.residual < 1e-14);
        assert!(d.hypothesis_residual < 1e-12);
        // ε = 1/(2·dim out) = 1/4
        assert!((d.kappa - 4.0).abs() < 1e-9);
    }

    #[test]
    fn decomposition_residual_tracks_kernel_component() {
        let hom = hom_algebra(&m(2), &m(2));
        let rho0 = BlockOperator::identity(&m(2)).scale_real(0.5);
        let direction = &hom.kernel_basis()[3];
        let eps = 1e-3;
        let c = hom
            .embed_identity_out(&rho0)
            .unwrap()
            .add(&direction.scale_real(eps))
            .unwrap();
        let d = lemma1_decompose(&c, &hom).unwrap();
        assert!((d.residual - eps).abs() < 1e-12);
        assert!(d.rho.distance(&rho0) < 1e-14);
    }
}
