//! CR invariants of real hypersurfaces in ℂ^N computed over exact truncated
//! power series: nondegeneracy filtrations, invariant tensors, reflection
//! identities for CR maps, jet determination and infinitesimal automorphisms.

pub mod aut;
pub mod error;
pub mod exec;
pub mod hypersurface;
pub mod invariants;
pub mod jets;
pub mod linalg;
pub mod mappings;
pub mod models;
pub mod multiindex;
pub mod scalar;
pub mod series;

pub use error::{Error, Result};
pub use exec::Exec;
pub use hypersurface::Hypersurface;
pub use multiindex::MultiIndex;
pub use scalar::{CScalar, Rational};
pub use series::{Order, Pairing, TruncatedSeries};
