//! Model reduction for quadratic-bilinear control systems.
//!
//! The main entry points are [`irka::tqb_irka`], [`bt::balanced_truncation`],
//! the Gramian routines in [`gramians`] and the optimality diagnostics in
//! [`diagnostics`].

pub mod basis;
pub mod bt;
pub mod diagnostics;
pub mod equations;
pub mod gramians;
pub mod error;
pub mod hessian;
pub mod io;
pub mod irka;
pub mod kron;
pub mod models;
pub mod schur;
pub mod signals;
pub mod simulate;
pub mod spectral;
pub mod sweep;
pub mod system;
pub mod tensor;

pub use error::{Error, Result};
pub use hessian::Hessian;
pub use schur::C64;
pub use system::{project, rescale, QBSystem, ReducedModel};
