//! Order-completion construction of interval solutions for scalar nonlinear PDEs.
//!
//! The pipeline builds local polynomial sub- and super-solutions whose defect
//! `T P - f` lies in a band of width `eps`, assembles them into piecewise
//! smooth grid functions that are undefined on a closed nowhere-dense
//! singular mask, and refines `eps` to obtain a pair of interval-valued
//! envelopes bracketing the solution.

pub mod bench;
pub mod cli;
pub mod expr;
pub mod fnspaces;
pub mod hausdorff;
pub mod jets;
pub mod multi_index;
pub mod solver;

pub use multi_index::MultiIndex;
