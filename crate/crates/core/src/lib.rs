//! Analysis and solution of linear descriptor systems `d/dt(E x) = A x + f`
//! through integrated semigroups.

pub mod error;
pub mod generators;
pub mod io;
pub mod kernel;
pub mod laplace;
pub mod linalg;
pub mod pencil;
pub mod realized;
pub mod semigroup;
pub mod signal;
pub mod solver;
pub mod subspaces;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec};
pub use num_complex::Complex64;
pub use pencil::Pencil;
pub use signal::Signal;
