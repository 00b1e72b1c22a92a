//! Desk-scale model of a Haar-random oracle world.
//!
//! The crate materialises a seeded family of Haar-random unitaries, compiles
//! oracle-querying circuits into oracle-free ones (tomography for small
//! levels, keyed unitary designs for large ones), and runs a generic
//! multi-time forger against toy quantum digital signature schemes. The
//! `harness` module wires everything into reproducible experiments.

pub mod attack;
pub mod designs;
mod error;
pub mod haar;
pub mod harness;
pub mod linalg;
pub mod qds;
pub mod seeds;
pub mod simhaar;
pub mod tomography;

pub use error::{Error, Result};
