//! Bilinear Bogolyubov-Ruzsa constructions over prime fields.

pub mod approx_hom;
pub mod bogolyubov;
pub mod error;
pub mod generate;
pub mod gf;
pub mod io;
pub mod phi;
pub mod pipeline;
pub mod rng;
pub mod setlab;
pub mod verify;

pub use error::{Error, Result};
