//! Optimal unambiguous discrimination of two mixed states.
//!
//! For two density operators of equal rank `d` whose supports jointly span
//! `2d` dimensions, the crate builds the canonical pairing of the two
//! supports, decides whether the closed-form optimal measurement applies,
//! and constructs it. A projected-gradient oracle solves the same problem
//! numerically without using the canonical frame, and a seeded Monte Carlo
//! sampler replays the experiment.
//!
//! ```
//! use udisc::similar::{generate, SimilarClassSpec};
//! use udisc::linalg::CMatrix;
//!
//! let spec = SimilarClassSpec {
//!     d: 1,
//!     r_mat: CMatrix::identity(1),
//!     thetas: vec![0.6f64.acos()],
//!     eta1: 0.5,
//! };
//! let (inst, _) = generate(&spec).unwrap();
//! let report = udisc::solver::solve(&inst).unwrap();
//! assert!((report.q_opt - 0.6).abs() < 1e-12);
//! ```

pub mod canonical;
pub mod fidelity;
pub mod format;
pub mod linalg;
pub mod oracle;
pub mod sampler;
pub mod similar;
pub mod solver;
pub mod states;

pub use canonical::{build_frame, CanonicalFrame};
pub use linalg::CMatrix;
pub use solver::{solve, Measurement, SolveReport};
pub use states::{make_instance, validate_density, DensityOperator, DiscriminationInstance};
