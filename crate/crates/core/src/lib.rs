//! Attenuated magnetic ray transform on the unit disk.

pub mod adjoint;
pub mod calculus;
pub mod error;
pub mod expr;
pub mod flow;
pub mod functions;
pub mod geometry;
pub mod grid;
pub mod harmonics;
pub mod harness;
pub mod io;
pub mod krylov;
pub mod linalg;
pub mod scene;
pub mod transport;
