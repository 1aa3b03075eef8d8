//! Joint facade registration and semantic segmentation.
//!
//! A reference facade is modelled as a mixture of axis-aligned Lp Gaussians
//! fitted to its semantic segmentation. The mixture is registered onto the
//! per-pixel label probabilities of a target image by MAP
//! expectation-maximization over a similarity `(tx, ty, s)`, and the final
//! responsibilities give a refined segmentation of the target.

pub mod error;
pub mod model;
pub mod em;
pub mod eval;
pub mod extraction;
pub mod io;
pub mod posterior;
pub mod reference;

pub use error::{Error, Result};
