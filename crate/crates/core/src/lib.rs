//! Cappell-Miller torsion of finite-dimensional Z2-graded complexes carrying
//! two differentials, with the supporting dense linear algebra, concrete model
//! generators and finite-difference checks of first-order variation laws.

pub mod bicomplex;
pub mod config;
pub mod deform;
pub mod detline;
pub mod error;
pub mod models;
pub mod numkit;
pub mod selftest;
pub mod torsion;

pub use bicomplex::{BiComplex, Cut, EvenOp, OddOp};
pub use config::Tolerances;
pub use error::{Error, Result};
