//! Circuit realisation of deterministic supermaps.
//!
//! Every deterministic supermap `S` from channels `A → B` to channels
//! `C → D` is realised by one fixed circuit. With `A = ⊕_i B(H_in,i)`,
//! `B = ⊕_j B(H_out,j)`, `C = ⊕_k B(K_in,k)` and `D = ⊕_l B(K_out,l)`:
//!
//! 1. the classical index `k` of the input is copied;
//! 2. `E: C → ⊕_i B(P ⊗ H_in,i)` prepares a memory `P` and the input of the
//!    plugged channel, producing a classical index `i`;
//! 3. `i` is copied;
//! 4. the plugged channel `F: A → B` acts on `H_in,i`, producing `j`;
//! 5. `G: ⊕_(i,j,k) B(P ⊗ H_out,j) → D` reads the memory, the channel output
//!    and all three classical indices.
//!
//! [`realize`] constructs `E` and `G` from minimal dilations and
//! [`check_realisation`] certifies the result on a spanning set.

mod build;

pub use build::{
    assemble_e, assemble_g, left_dilation, pad_environment, realize, realize_with,
    right_dilation, solve_w, CircuitRealisation, CompletionPolicy, LeftDilation,
    PaddedEnvironment,
};

use crate::algebra::{BlockOperator, MultiMatrixAlgebra};
use crate::cpmaps::{copy_channel, linear_map_from_action, tensor, Channel, CpMap};
use crate::error::{Error, Result};
use crate::gen::{random_channel, Seed};
use crate::linalg;
use crate::supermap::Supermap;

/// The four algebras of a supermap from channels `a → b` to channels `c → d`.
#[derive(Clone, Debug, PartialEq)]
pub struct CircuitShape {
    pub a: MultiMatrixAlgebra,
    pub b: MultiMatrixAlgebra,
    pub c: MultiMatrixAlgebra,
    pub d: MultiMatrixAlgebra,
}

impl CircuitShape {
    pub fn new(
        a: &MultiMatrixAlgebra,
        b: &MultiMatrixAlgebra,
        c: &MultiMatrixAlgebra,
        d: &MultiMatrixAlgebra,
    ) -> Self {
        Self {
            a: a.clone(),
            b: b.clone(),
            c: c.clone(),
            d: d.clone(),
        }
    }

    pub fn of(s: &Supermap) -> Self {
        let (a, b, c, d) = s.algebras();
        Self::new(a, b, c, d)
    }

    /// Target of `E`: blocks `i` of dimension `p · dim(H_in,i)`, memory first.
    pub fn e_target(&self, p: usize) -> MultiMatrixAlgebra {
        MultiMatrixAlgebra::new(
            self.a
                .blocks()
                .iter()
                .map(|b| (format!("P⊗{}", b.label), p * b.dim)),
        )
        .expect("labels stay unique")
    }

    /// Source of `G`: blocks `(i, j, k)` in lexicographic order, dimension
    /// `p · dim(H_out,j)`.
    pub fn g_source(&self, p: usize) -> MultiMatrixAlgebra {
        let mut blocks = Vec::new();
        for bi in self.a.blocks() {
            for bj in self.b.blocks() {
                for bk in self.c.blocks() {
                    blocks.push((
                        format!("({},{},{})", bi.label, bj.label, bk.label),
                        p * bj.dim,
                    ));
                }
            }
        }
        MultiMatrixAlgebra::new(blocks).expect("labels stay unique")
    }

    pub fn g_index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.b.num_blocks() + j) * self.c.num_blocks() + k
    }

    /// `max_(i,k) dim(H_in,i) · dim(K_in,k)`, the bound on the memory dimension.
    pub fn dimension_bound(&self) -> usize {
        let a = self.a.dims().into_iter().max().unwrap_or(1);
        let c = self.c.dims().into_iter().max().unwrap_or(1);
        a * c
    }
}

/// A circuit of the fixed shape, given by its two free channels.
#[derive(Clone, Debug, PartialEq)]
pub struct Circuit {
    shape: CircuitShape,
    p_dim: usize,
    e: Channel,
    g: Channel,
}

impl Circuit {
    pub fn new(shape: CircuitShape, p_dim: usize, e: Channel, g: Channel) -> Result<Self> {
        if p_dim == 0 {
            return Err(Error::InvalidAlgebra("memory dimension 0".into()));
        }
        shape.c.ensure_compatible(e.source())?;
        shape.e_target(p_dim).ensure_compatible(e.target())?;
        shape.g_source(p_dim).ensure_compatible(g.source())?;
        shape.d.ensure_compatible(g.target())?;
        Ok(Self {
            e: e.relabel(&shape.c, &shape.e_target(p_dim))?,
            g: g.relabel(&shape.g_source(p_dim), &shape.d)?,
            shape,
            p_dim,
        })
    }

    pub fn shape(&self) -> &CircuitShape {
        &self.shape
    }

    pub fn p_dim(&self) -> usize {
        self.p_dim
    }

    pub fn e_channel(&self) -> &Channel {
        &self.e
    }

    pub fn g_channel(&self) -> &Channel {
        &self.g
    }

    /// The five stages as linear maps, in order, for a plugged map `f`.
    pub fn stages(&self, f: &CpMap) -> Result<CircuitStages> {
        let shape = &self.shape;
        shape.a.ensure_compatible(f.source())?;
        shape.b.ensure_compatible(f.target())?;
        let p = self.p_dim;
        let (ni, nj, nk) = (
            shape.a.num_blocks(),
            shape.b.num_blocks(),
            shape.c.num_blocks(),
        );

        let copy_k = copy_channel(&shape.c);

        // (k, k) → (k, i): E controlled by k, keeping k
        let m1 = MultiMatrixAlgebra::new((0..nk).flat_map(|k| {
            (0..ni).map(move |i| (format!("({k},{i})"), p * shape.a.block_dim(i)))
        }))
        .expect("labels stay unique");
        let stage_e = {
            let mut choi = CpMap::zero(copy_k.target(), &m1).choi_blocks().to_vec();
            for k in 0..nk {
                for i in 0..ni {
                    choi[(k * ni + i) * nk + k] = self.e.choi_block(i, k).clone();
                }
            }
            CpMap::from_choi_unchecked(copy_k.target(), &m1, choi)?
        };

        let copy_i = copy_channel(&m1);

        // (k, i) → (i, j, k): 1_P ⊗ f on the i-th input, keeping i and k
        let pf = tensor(&CpMap::identity(&MultiMatrixAlgebra::matrix(p)), f);
        let m3 = shape.g_source(p);
        let stage_f = {
            let mut choi = CpMap::zero(copy_i.target(), &m3).choi_blocks().to_vec();
            let n_src = nk * ni;
            for i in 0..ni {
                for j in 0..nj {
                    for k in 0..nk {
                        let t = shape.g_index(i, j, k);
                        choi[t * n_src + k * ni + i] = pf.choi_block(j, i).clone();
                    }
                }
            }
            CpMap::from_choi_unchecked(copy_i.target(), &m3, choi)?
        };

        Ok(CircuitStages {
            copy_k: copy_k.into_map(),
            e: stage_e,
            copy_i: copy_i.into_map(),
            f: stage_f,
            g: self.g.map().clone(),
        })
    }
}

/// The circuit unrolled into composable maps.
#[derive(Clone, Debug)]
pub struct CircuitStages {
    pub copy_k: CpMap,
    pub e: CpMap,
    pub copy_i: CpMap,
    pub f: CpMap,
    pub g: CpMap,
}

impl CircuitStages {
    pub fn apply(&self, x: &BlockOperator) -> Result<BlockOperator> {
        let x = self.copy_k.apply(x)?;
        let x = self.e.apply(&x)?;
        let x = self.copy_i.apply(&x)?;
        let x = self.f.apply(&x)?;
        self.g.apply(&x)
    }
}

/// The map `C → D` obtained by plugging `f` into the circuit. `f` only has
/// to be linear, so matrix-unit Choi operators are accepted.
pub fn evaluate_circuit(circuit: &Circuit, f: &CpMap) -> Result<CpMap> {
    let stages = circuit.stages(f)?;
    let out = linear_map_from_action(&circuit.shape.c, &circuit.shape.d, |x| stages.apply(x))?;
    out.relabel(&circuit.shape.c, &circuit.shape.d)
}

/// Choi operator of the circuit output for a Choi operator `x ∈ Hom(A, B)`.
pub fn evaluate_choi(circuit: &Circuit, x: &BlockOperator) -> Result<BlockOperator> {
    let f = CpMap::from_choi_unchecked(&circuit.shape.a, &circuit.shape.b, x.blocks().to_vec())?;
    Ok(evaluate_circuit(circuit, &f)?.choi_operator())
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckReport {
    pub trials: usize,
    /// Largest Choi deviation over the random channels.
    pub random_deviation: f64,
    /// Largest Choi deviation over the matrix units of `Hom(A, B)`.
    pub spanning_deviation: f64,
    pub tol: f64,
    pub passed: bool,
}

impl CheckReport {
    pub fn max_deviation(&self) -> f64 {
        self.random_deviation.max(self.spanning_deviation)
    }
}

/// Compares the circuit with `s` on `trials` random channels and on every
/// matrix unit of `Hom(A, B)`. The matrix-unit pass spans the whole space,
/// so agreement there is agreement everywhere up to `tol`.
pub fn check_realisation(
    circuit: &Circuit,
    s: &Supermap,
    trials: usize,
    tol: f64,
    seed: Seed,
) -> Result<CheckReport> {
    let shape = CircuitShape::of(s);
    for (x, y) in [
        (&shape.a, &circuit.shape.a),
        (&shape.b, &circuit.shape.b),
        (&shape.c, &circuit.shape.c),
        (&shape.d, &circuit.shape.d),
    ] {
        x.ensure_compatible(y)?;
    }
    let deviation = |x: &BlockOperator| -> Result<f64> {
        let lhs = evaluate_choi(circuit, x)?;
        let rhs = s.apply_to_choi(x)?;
        Ok(lhs
            .blocks()
            .iter()
            .zip(rhs.blocks())
            .map(|(a, b)| linalg::frobenius(&(a - b)).powi(2))
            .sum::<f64>()
            .sqrt())
    };
    let mut random_deviation: f64 = 0.0;
    for t in 0..trials {
        let f = random_channel(&shape.a, &shape.b, seed.split(t as u64))?;
        random_deviation = random_deviation.max(deviation(&f.choi_operator())?);
    }
    let hom = s.from().base();
    let mut spanning_deviation: f64 = 0.0;
    for (blk, a, b) in hom.matrix_units() {
        let unit = BlockOperator::matrix_unit(hom, blk, a, b);
        spanning_deviation = spanning_deviation.max(deviation(&unit)?);
    }
    Ok(CheckReport {
        trials,
        random_deviation,
        spanning_deviation,
        tol,
        passed: random_deviation <= tol && spanning_deviation <= tol,
    })
}
