//! Pulse optimization: parameter scan, simplex refinement and Krotov's
//! method.

pub mod krotov;
pub mod pipeline;
pub mod simplex;
