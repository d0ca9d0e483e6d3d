//! Interactive steering service and command line for the gallery models.
//!
//! [`api::router`] builds the HTTP application; [`cli::main`] is the `abm`
//! binary.

pub mod api;
pub mod cli;
pub mod session;
pub mod wire;
