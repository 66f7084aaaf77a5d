//! Versioned JSON documents.
//!
//! Every file is `{"format_version": "1", "kind": ..., "payload": ...}`.
//! Complex matrices are row lists of `[re, im]` decimal strings with 17
//! significant digits, which round-trips every `f64` exactly.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::algebra::MultiMatrixAlgebra;
use crate::cpmaps::{Channel, CpMap};
use crate::error::{Error, Result};
use crate::linalg::{self, CMat};
use crate::realize::{Circuit, CircuitRealisation, CircuitShape, CompletionPolicy};
use crate::supermap::{hom_algebra, Supermap};

pub const FORMAT_VERSION: &str = "1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Kind {
    Algebra,
    Channel,
    Supermap,
    Realisation,
    Report,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub format_version: String,
    pub kind: Kind,
    pub payload: Value,
}

pub type MatrixDoc = Vec<Vec<[String; 2]>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDoc {
    pub label: String,
    pub dim: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgebraDoc {
    pub blocks: Vec<BlockDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelDoc {
    pub source: AlgebraDoc,
    pub target: AlgebraDoc,
    pub choi: Vec<MatrixDoc>,
}

/// A supermap from channels `a → b` to channels `c → d`; `choi` holds the
/// Choi blocks of the CP map `Hom(a, b) → Hom(c, d)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SupermapDoc {
    pub a: AlgebraDoc,
    pub b: AlgebraDoc,
    pub c: AlgebraDoc,
    pub d: AlgebraDoc,
    pub choi: Vec<MatrixDoc>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsDoc {
    pub w_residual: f64,
    pub w_isometry_defect: f64,
    pub w_partial_isometry_defect: f64,
    pub gram_condition: f64,
    pub right_minimal: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealisationDoc {
    pub a: AlgebraDoc,
    pub b: AlgebraDoc,
    pub c: AlgebraDoc,
    pub d: AlgebraDoc,
    pub p_dim: usize,
    pub bound: usize,
    pub ranks: Vec<Vec<usize>>,
    pub completion: String,
    pub e_choi: Vec<MatrixDoc>,
    pub g_choi: Vec<MatrixDoc>,
    pub diagnostics: DiagnosticsDoc,
}

fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Format(format!("not a decimal number: {s:?}")))
}

pub fn encode_matrix(m: &CMat) -> MatrixDoc {
    (0..m.nrows())
        .map(|r| {
            (0..m.ncols())
                .map(|c| [fmt_f64(m[(r, c)].re), fmt_f64(m[(r, c)].im)])
                .collect()
        })
        .collect()
}

pub fn decode_matrix(doc: &MatrixDoc) -> Result<CMat> {
    let rows = doc.len();
    let cols = doc.first().map_or(0, Vec::len);
    if doc.iter().any(|row| row.len() != cols) {
        return Err(Error::Format("ragged matrix".into()));
    }
    let mut m = linalg::zeros(rows, cols);
    for (r, row) in doc.iter().enumerate() {
        for (c, [re, im]) in row.iter().enumerate() {
            m[(r, c)] = linalg::c(parse_f64(re)?, parse_f64(im)?);
        }
    }
    Ok(m)
}

pub fn encode_algebra(a: &MultiMatrixAlgebra) -> AlgebraDoc {
    AlgebraDoc {
        blocks: a
            .blocks()
            .iter()
            .map(|b| BlockDoc {
                label: b.label.clone(),
                dim: b.dim,
            })
            .collect(),
    }
}

pub fn decode_algebra(doc: &AlgebraDoc) -> Result<MultiMatrixAlgebra> {
    MultiMatrixAlgebra::new(doc.blocks.iter().map(|b| (b.label.clone(), b.dim)))
}

fn decode_blocks(blocks: &[MatrixDoc]) -> Result<Vec<CMat>> {
    blocks.iter().map(decode_matrix).collect()
}

impl Document {
    fn new(kind: Kind, payload: impl Serialize) -> Self {
        Self {
            format_version: FORMAT_VERSION.into(),
            kind,
            payload: serde_json::to_value(payload).expect("plain data serialises"),
        }
    }

    fn payload_as<T: for<'de> Deserialize<'de>>(&self, kind: Kind) -> Result<T> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::Format(format!(
                "unsupported format_version {:?}",
                self.format_version
            )));
        }
        if self.kind != kind {
            return Err(Error::Format(format!(
                "expected a {kind:?} document, found {:?}",
                self.kind
            )));
        }
        serde_json::from_value(self.payload.clone()).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn algebra(a: &MultiMatrixAlgebra) -> Self {
        Self::new(Kind::Algebra, encode_algebra(a))
    }

    pub fn to_algebra(&self) -> Result<MultiMatrixAlgebra> {
        decode_algebra(&self.payload_as(Kind::Algebra)?)
    }

    pub fn channel(m: &CpMap) -> Self {
        Self::new(
            Kind::Channel,
            ChannelDoc {
                source: encode_algebra(m.source()),
                target: encode_algebra(m.target()),
                choi: m.choi_blocks().iter().map(encode_matrix).collect(),
            },
        )
    }

    /// Decodes a channel document, checking CP and TP within `tol`.
    pub fn to_channel(&self, tol: f64) -> Result<Channel> {
        let doc: ChannelDoc = self.payload_as(Kind::Channel)?;
        let map = CpMap::from_choi_unchecked(
            &decode_algebra(&doc.source)?,
            &decode_algebra(&doc.target)?,
            decode_blocks(&doc.choi)?,
        )?;
        Channel::new(map, tol)
    }

    pub fn supermap(s: &Supermap) -> Self {
        let (a, b, c, d) = s.algebras();
        Self::new(
            Kind::Supermap,
            SupermapDoc {
                a: encode_algebra(a),
                b: encode_algebra(b),
                c: encode_algebra(c),
                d: encode_algebra(d),
                choi: s.inner().choi_blocks().iter().map(encode_matrix).collect(),
            },
        )
    }

    /// Decodes a supermap document. Only shapes are checked, so broken
    /// supermaps can be loaded and then rejected by verification.
    pub fn to_supermap(&self) -> Result<Supermap> {
        let doc: SupermapDoc = self.payload_as(Kind::Supermap)?;
        let from = hom_algebra(&decode_algebra(&doc.a)?, &decode_algebra(&doc.b)?);
        let to = hom_algebra(&decode_algebra(&doc.c)?, &decode_algebra(&doc.d)?);
        let inner = CpMap::from_choi_unchecked(from.base(), to.base(), decode_blocks(&doc.choi)?)?;
        Supermap::new_unchecked(inner, from, to)
    }

    pub fn realisation(r: &CircuitRealisation) -> Self {
        let shape = r.circuit.shape();
        Self::new(
            Kind::Realisation,
            RealisationDoc {
                a: encode_algebra(&shape.a),
                b: encode_algebra(&shape.b),
                c: encode_algebra(&shape.c),
                d: encode_algebra(&shape.d),
                p_dim: r.p_dim(),
                bound: r.bound,
                ranks: r.ranks.clone(),
                completion: match r.completion {
                    CompletionPolicy::FixedState => "fixed-state",
                    CompletionPolicy::MaximallyMixed => "maximally-mixed",
                }
                .into(),
                e_choi: r.e_channel().choi_blocks().iter().map(encode_matrix).collect(),
                g_choi: r.g_channel().choi_blocks().iter().map(encode_matrix).collect(),
                diagnostics: DiagnosticsDoc {
                    w_residual: r.w_residual,
                    w_isometry_defect: r.w_isometry_defect,
                    w_partial_isometry_defect: r.w_partial_isometry_defect,
                    gram_condition: r.gram_condition,
                    right_minimal: r.right_minimal,
                },
            },
        )
    }

    /// Decodes a realisation; `E` and `G` must be channels within `tol`.
    pub fn to_realisation(&self, tol: f64) -> Result<CircuitRealisation> {
        let doc: RealisationDoc = self.payload_as(Kind::Realisation)?;
        let shape = CircuitShape::new(
            &decode_algebra(&doc.a)?,
            &decode_algebra(&doc.b)?,
            &decode_algebra(&doc.c)?,
            &decode_algebra(&doc.d)?,
        );
        if doc.p_dim == 0 {
            return Err(Error::Format("p_dim must be positive".into()));
        }
        let e = CpMap::from_choi_unchecked(&shape.c, &shape.e_target(doc.p_dim), decode_blocks(&doc.e_choi)?)?;
        let g = CpMap::from_choi_unchecked(&shape.g_source(doc.p_dim), &shape.d, decode_blocks(&doc.g_choi)?)?;
        let completion = match doc.completion.as_str() {
            "fixed-state" => CompletionPolicy::FixedState,
            "maximally-mixed" => CompletionPolicy::MaximallyMixed,
            other => return Err(Error::Format(format!("unknown completion {other:?}"))),
        };
        Ok(CircuitRealisation {
            circuit: Circuit::new(shape, doc.p_dim, Channel::new(e, tol)?, Channel::new(g, tol)?)?,
            ranks: doc.ranks,
            bound: doc.bound,
            w_residual: doc.diagnostics.w_residual,
            w_isometry_defect: doc.diagnostics.w_isometry_defect,
            w_partial_isometry_defect: doc.diagnostics.w_partial_isometry_defect,
            gram_condition: doc.diagnostics.gram_condition,
            right_minimal: doc.diagnostics.right_minimal,
            completion,
        })
    }

    pub fn report(payload: Value) -> Self {
        Self::new(Kind::Report, payload)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("plain data serialises");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json())
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))
    }
}
