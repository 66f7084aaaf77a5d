//! Deterministic supermaps between channels of any type.
//!
//! Channels here are completely positive trace-preserving maps between
//! multimatrix algebras `⊕_i B(H_i)`, so classical control, measurement
//! outcomes and quantum systems are all handled by one data type. A
//! supermap turns channels `A → B` into channels `C → D`; the crate checks
//! that a supermap is deterministic and realises it as a fixed circuit
//! (copy, pre-processing channel `E`, the plugged-in channel, post-processing
//! channel `G`).

pub mod algebra;
pub mod cli;
pub mod cpmaps;
pub mod demo;
pub mod error;
pub mod format;
pub mod gen;
pub mod linalg;
pub mod realize;
pub mod supermap;

pub use error::{Error, Result};

/// Default numerical tolerance of the library layer.
pub const DEFAULT_TOL: f64 = 1e-9;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/algebras.md")]
    mod algebras {}
    #[doc = include_str!("../../../book/src/channels.md")]
    mod channels {}
    #[doc = include_str!("../../../book/src/stinespring.md")]
    mod stinespring {}
    #[doc = include_str!("../../../book/src/supermaps.md")]
    mod supermaps {}
    #[doc = include_str!("../../../book/src/realisation.md")]
    mod realisation {}
    #[doc = include_str!("../../../book/src/examples.md")]
    mod examples {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
