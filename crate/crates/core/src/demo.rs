//! The bundled examples: one supermap type each, realised and inspected.

use crate::algebra::MultiMatrixAlgebra;
use crate::cpmaps::{copy_channel, CpMap};
use crate::error::{Error, Result};
use crate::gen::{random_supermap_from_circuit, Seed};
use crate::realize::{check_realisation, realize, CheckReport, CircuitRealisation};
use crate::supermap::Supermap;

pub const DEMO_NAMES: [&str; 6] = [
    "cdp08",
    "multimeter",
    "povm-to-state",
    "state-to-povm",
    "classical-to-quantum",
    "quantum-to-classical",
];

#[derive(Clone, Debug)]
pub struct DemoReport {
    pub name: &'static str,
    pub summary: &'static str,
    pub supermap: Supermap,
    pub realisation: CircuitRealisation,
    pub check: CheckReport,
    /// Structural statements about the realised circuit and whether they hold.
    pub assertions: Vec<(String, bool)>,
}

impl DemoReport {
    pub fn passed(&self) -> bool {
        self.check.passed && self.assertions.iter().all(|(_, ok)| *ok)
    }
}

/// The algebras `(A, B, C, D)` of a demo.
pub fn demo_algebras(
    name: &str,
) -> Option<(MultiMatrixAlgebra, MultiMatrixAlgebra, MultiMatrixAlgebra, MultiMatrixAlgebra)> {
    let m2 = MultiMatrixAlgebra::matrix(2);
    let c1 = MultiMatrixAlgebra::trivial();
    let bits = MultiMatrixAlgebra::classical(2);
    let controlled = MultiMatrixAlgebra::from_dims(&[2, 2]).expect("valid");
    Some(match name {
        "cdp08" => (m2.clone(), m2.clone(), m2.clone(), m2),
        "multimeter" => (controlled.clone(), bits.clone(), controlled, bits),
        "povm-to-state" => (m2.clone(), bits, c1, m2),
        "state-to-povm" => (c1, m2.clone(), m2, bits),
        "classical-to-quantum" => (bits.clone(), bits, m2.clone(), m2),
        "quantum-to-classical" => (m2.clone(), m2, bits.clone(), bits),
        _ => return None,
    })
}

fn summary(name: &str) -> &'static str {
    match name {
        "cdp08" => "quantum channels to quantum channels: pre-processing, the channel, post-processing, with memory P",
        "multimeter" => "multimeters to multimeters: classically controlled measurements on both sides",
        "povm-to-state" => "prepare a state on P ⊗ H, measure H with the POVM, use the outcome to control a channel on P",
        "state-to-povm" => "store the state in P, then measure P ⊗ H with a bipartite POVM",
        "classical-to-quantum" => "an instrument with output P, the classical channel on its outcome, a controlled channel P → K",
        "quantum-to-classical" => "prepare a bipartite state controlled by k, send one half through the channel, then a POVM controlled by k",
        _ => "",
    }
}

fn blocks_trivial(a: &MultiMatrixAlgebra) -> bool {
    a.num_blocks() == 1
}

pub fn run_demo(name: &str, tol: f64) -> Result<DemoReport> {
    let (a, b, c, d) = demo_algebras(name)
        .ok_or_else(|| Error::Format(format!("unknown demo {name:?}")))?;
    let name = DEMO_NAMES
        .iter()
        .copied()
        .find(|n| *n == name)
        .expect("listed");
    let mut s = random_supermap_from_circuit(&a, &b, &c, &d, 2, Seed(2024))?;
    let report = s.verify(tol);
    if !report.verdict {
        return Err(Error::NotTp {
            residual: report.kernel_residual.max(report.n_unital_residual),
        });
    }
    let r = realize(&s, tol)?;
    let check = check_realisation(&r.circuit, &s, 3, tol.max(1e-8), Seed(7))?;
    let e = r.e_channel();
    let g = r.g_channel();
    let p = r.p_dim();
    let mut assertions = vec![(
        format!("p_dim = {p} ≤ bound {}", r.bound),
        p <= r.bound,
    )];
    let copy_is_identity = |x: &MultiMatrixAlgebra| {
        copy_channel(x).choi_blocks() == CpMap::identity(x).choi_blocks()
    };
    match name {
        "cdp08" => {
            assertions.push((
                "all classical index sets are singletons".into(),
                [&a, &b, &c, &d].iter().all(|x| blocks_trivial(x)),
            ));
            assertions.push(("copy of k is the identity".into(), copy_is_identity(&c)));
            assertions.push((
                "copy of i is the identity".into(),
                copy_is_identity(&r.circuit.shape().e_target(p)),
            ));
            assertions.push(("G reads a single block P ⊗ H_out".into(), g.source().num_blocks() == 1));
        }
        "multimeter" => {
            assertions.push((
                "G has 1-dimensional quantum outputs".into(),
                g.target().dims().iter().all(|&x| x == 1),
            ));
            assertions.push((
                "G is controlled by (i, j, k)".into(),
                g.source().num_blocks() == a.num_blocks() * b.num_blocks() * c.num_blocks(),
            ));
        }
        "povm-to-state" => {
            assertions.push(("E has a 1-dimensional input (state preparation)".into(), e.source().dim() == 1));
            assertions.push((
                "E prepares a single bipartite system P ⊗ H".into(),
                e.target().num_blocks() == 1 && e.target().block_dim(0) == p * a.block_dim(0),
            ));
            assertions.push((
                "G is controlled by the POVM outcome j".into(),
                g.source().num_blocks() == b.num_blocks() && g.source().dims().iter().all(|&x| x == p),
            ));
        }
        "state-to-povm" => {
            assertions.push((
                "E only writes to the memory P".into(),
                e.target().num_blocks() == 1 && e.target().block_dim(0) == p,
            ));
            assertions.push((
                "G measures the bipartite system P ⊗ H".into(),
                g.source().num_blocks() == 1 && g.source().block_dim(0) == p * b.block_dim(0),
            ));
            assertions.push((
                "G has 1-dimensional outputs (a POVM)".into(),
                g.target().dims().iter().all(|&x| x == 1),
            ));
        }
        "classical-to-quantum" => {
            assertions.push((
                "E is an instrument with outcome i and output P".into(),
                e.target().num_blocks() == a.num_blocks() && e.target().dims().iter().all(|&x| x == p),
            ));
            assertions.push((
                format!("p_dim ≤ dim(H) = {}", c.block_dim(0)),
                p <= c.block_dim(0),
            ));
        }
        "quantum-to-classical" => {
            assertions.push((
                "E has 1-dimensional inputs controlled by k".into(),
                e.source().dims().iter().all(|&x| x == 1),
            ));
            assertions.push((
                "E prepares a single bipartite system P ⊗ H_in".into(),
                e.target().num_blocks() == 1,
            ));
            assertions.push((
                "G has 1-dimensional outputs (a POVM)".into(),
                g.target().dims().iter().all(|&x| x == 1),
            ));
        }
        _ => unreachable!(),
    }
    Ok(DemoReport {
        name,
        summary: summary(name),
        supermap: s,
        realisation: r,
        check,
        assertions,
    })
}
