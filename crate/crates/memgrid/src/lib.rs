//! Simulator for flux-controlled memristive crossbar arrays with selector
//! switches, together with the terminal-only controllers that read and write
//! the stored memductance matrix and the analog applications built on them
//! (matrix-vector products and least squares).
//!
//! - [`devices`]: memductance nonlinearities and their assumptions
//! - [`network`]: the array itself; exact integration of the flux dynamics
//! - [`protocols`]: the read pulse protocol, the write feedback controller,
//!   and the switchless-reachability test
//! - [`applications`]: analog matvec (incl. signed matrices) and least squares
//! - [`io`] / [`cli`]: array file persistence, trace export, command line

pub mod applications;
pub mod cli;
pub mod devices;
pub mod error;
pub mod io;
pub mod network;
pub mod protocols;

pub use devices::MemductanceModel;
pub use error::{Error, Result};
pub use network::CrossbarState;
