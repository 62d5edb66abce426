//! Exact ultrametric arithmetic over F_q((1/X)) and desk-scale experiments on
//! Diophantine approximation, cusp excursions and logarithm laws.
//!
//! Conventions used throughout: the uniformizer is X^-1 with |X^-1| = q^-1,
//! norms are carried as integer exponents ([`LogNorm`]), and lattices are row
//! modules over F_q[X].

pub mod cfrac;
pub mod dani;
pub mod error;
pub mod fq;
pub mod harness;
pub mod lattice;
pub mod laurent;
pub mod norm;
pub mod par;
pub mod poly;
pub mod shrink;
pub mod tree;

pub use error::{Error, Result};
pub use fq::Fq;
pub use laurent::Laurent;
pub use norm::LogNorm;
pub use poly::Poly;

/// Version string echoed into every output file.
pub const VERSION: &str = concat!("ulab ", env!("CARGO_PKG_VERSION"));
