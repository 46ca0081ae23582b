//! Viscous flow past thin obstacles shrinking to a curve: explicit conformal
//! maps and velocity fields, a mapped-grid vorticity solver, and convergence
//! studies in the vanishing-thickness limit.

pub mod cli;
pub mod conformal;
pub mod config;
pub mod fields;
pub mod fit;
pub mod quadrature;
pub mod lab;
pub mod solver;
