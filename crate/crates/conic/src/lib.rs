//! Interior-point solver for small mixed conic programs.
//!
//! Variables are real symmetric PSD blocks (optionally carrying the embedding
//! of a complex Hermitian matrix), nonnegative orthants, second-order cones and
//! free vectors. The objective is linear plus weighted `−ln(affine)` terms.
//!
//! ```
//! use isac_conic::{solve, Affine, Block, ConicProgram, Status, ToleranceSet};
//!
//! // minimize x subject to x ≥ 1
//! let mut p = ConicProgram::new();
//! let x = p.add_block(Block::Nonneg(1));
//! p.objective = Affine::constant(0.0).add_entry(x, 0, 1.0);
//! p.ineqs.push(Affine::constant(-1.0).add_entry(x, 0, 1.0));
//! let sol = solve(&p, &ToleranceSet::default()).unwrap();
//! assert_eq!(sol.status, Status::Optimal);
//! assert!((sol.x[0].vec()[0] - 1.0).abs() < 1e-6);
//! ```

mod barrier;
pub mod dump;
pub mod embed;
mod error;
mod ipm;
mod kkt;
mod lower;
mod program;
pub mod sym;

pub use ipm::solve;
pub use embed::{embed_complex, extract_hermitian, C64};
pub use error::{ConicError, Result};
pub use kkt::kkt_residuals;
pub use program::{
    Affine, Block, BlockValue, Coef, ConicProgram, ConicSolution, KktResiduals, LogTerm, Status, ToleranceSet,
};
pub use sym::SymCoef;
