//! Multiparameter variation and oscillation seminorms, Rademacher–Menshov
//! style maximal bounds, Radon-type multipliers and polynomial ergodic
//! averages on tori.

pub mod dynamics;
pub mod error;
pub mod gluing;
pub mod lattice;
pub mod multipliers;
pub mod rademacher_menshov;
pub mod rng;
pub mod seminorms;

pub use error::{Error, Result};
pub use num_complex::Complex64;
