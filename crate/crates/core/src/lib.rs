//! AC optimal power flow with learned warm starts.
//!
//! A network is solved with an augmented Lagrangian method; two small
//! regression networks learn the load-to-multiplier map and the
//! multiplier-to-minimizer map of the partial Lagrangian, and the predicted
//! minimizer seeds the final solve.

pub mod dataset;
pub mod matpower;
pub mod mlp;
pub mod network;
pub mod opf;
pub mod pipeline;
pub mod solver;
pub mod synthetic;
pub mod twobus;
