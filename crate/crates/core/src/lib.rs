//! Desk-scale laboratory for van der Corput sets over `Z^d`.
//!
//! The crate builds sequences and sets with prescribed correlation averages,
//! reassembles them along dyadic tilings, and probes the spectral criterion
//! for vdC sets with a small linear program.

pub mod averaging;
pub mod casebook;
pub mod correspondence;
pub mod error;
pub mod io;
pub mod lattice;
pub mod randomization;
pub mod simplex;
pub mod spectral;
pub mod tiling;

pub use error::{Error, Result};
pub use num_complex::Complex64;

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/lattice.md")]
    mod lattice {}
    #[doc = include_str!("../../../book/src/averaging.md")]
    mod averaging {}
    #[doc = include_str!("../../../book/src/tiling.md")]
    mod tiling {}
    #[doc = include_str!("../../../book/src/correspondence.md")]
    mod correspondence {}
    #[doc = include_str!("../../../book/src/randomization.md")]
    mod randomization {}
    #[doc = include_str!("../../../book/src/spectral.md")]
    mod spectral {}
    #[doc = include_str!("../../../book/src/casebook.md")]
    mod casebook {}
}
