//! Semidefinite relaxation detectors for MIMO maximum-likelihood detection
//! under 4^q-QAM.
//!
//! The crate is organised bottom-up:
//!
//! - [`model`]: complex and real MIMO models, QAM levels, instance generation
//!   and the instance file format.
//! - [`sdp`]: a dense primal-dual interior-point solver for problems over
//!   products of PSD cones and the nonnegative orthant.
//! - [`relaxations`]: compilation of the bound-constrained (BC),
//!   polynomial-inspired (PI) and virtually-antipodal (VA) relaxations into
//!   cone problems, and extraction of `(S, s)` points from solutions.
//! - [`equivalence`]: feasibility checkers and the constructive maps between
//!   the feasible sets of the three relaxations.
//! - [`detectors`]: rounding rules, zero-forcing, exhaustive ML and sphere
//!   decoding.
//! - [`sim`]: Monte-Carlo symbol-error sweeps, equivalence reports and root
//!   analysis reports consumed by the command-line tool.

pub mod detectors;
pub mod equivalence;
pub mod model;
pub mod relaxations;
pub mod sdp;
pub mod sim;

pub use detectors::Decision;
pub use model::{ComplexInstance, Constellation, Instance};
pub use relaxations::{Relaxation, RootSet, SdrPoint};
pub use sdp::{ConeProblem, ConeSolution, SolveStatus, SolverOptions};
