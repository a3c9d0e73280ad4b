//! Point interactions on a line realized as renormalized delta-function trains.
//!
//! The crate covers the whole pipeline:
//!
//! - [`connmat`]: unimodular connection matrices acting on `(ψ', ψ)`, their
//!   classification and their factorization into delta / epsilon steps.
//! - [`potential`]: delta trains, the renormalized families whose zero-range
//!   limit reproduces a given connection matrix, and finite-width smearing.
//! - [`exact`]: transfer-matrix quantization of a Dirichlet/Neumann box with a
//!   train or an ideal point interaction inside.
//! - [`fdsolve`]: second-order finite differences and a Sturm-bisection
//!   tridiagonal eigensolver for smeared potentials.
//! - [`analysis`]: boundary-data extraction, connection-matrix fits and
//!   zero-range convergence studies.
//! - [`cli`]: the `pointint` command-line front end.
//!
//! Units are fixed at ħ = 1, m = 1, so the Hamiltonian is `-½ d²/dx² + V(x)`
//! and `E = k²/2`.

pub mod analysis;
pub mod cli;
pub mod connmat;
pub mod exact;
pub mod fdsolve;
pub mod mat2;
pub mod potential;

pub use analysis::{BoundaryData, ConvergenceTable, FitReport};
pub use connmat::{BoundaryKind, ConnectionMatrix, DeltaFactorization, Factor, InteractionClass};
pub use exact::{BoxSystem, Interaction, Spectrum, TransferMatrix};
pub use fdsolve::{EigenPair, TridiagonalOperator};
pub use mat2::Mat2;
pub use potential::{DeltaSpike, DeltaTrain, RenormalizedFamily, SampledPotential, UniformGrid};
