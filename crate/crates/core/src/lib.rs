//! Time-discrete scheme for the chemotaxis-consumption system
//!
//! ```text
//! ∂_t u − Δu = −∇·(u ∇v),   ∂_t v − Δv = −uˢ v,   zero-flux boundaries,
//! ```
//!
//! solved through the substitution z = √(v + α²) with Backward Euler in time,
//! an upper truncation of u in the nonlinear terms, and cell-centered
//! flux-form finite differences on a uniform box. Every numerical module is
//! generic over [`Real`]; the `*64` / `*32` aliases below fix the scalar.

pub mod config;
pub mod diagnostics;
pub mod elliptic;
pub mod error;
pub mod grid;
pub mod io;
pub mod oracle;
pub mod recovery;
pub mod runner;
pub mod scalar;
pub mod scheme;
pub mod study;
pub mod truncation;

pub use diagnostics::{
    check_lemma32, convexity_identity_check, energy, energy_monitor, f_m_eval, reconstruct_timeseries,
    DiagnosticsRecord, EnergyPieces, Lemma32Inputs, Lemma32Report, Reconstruction, TimeSeries,
};
pub use elliptic::{max_principle_check, solve, HelmholtzProblem, SolveReport};
pub use error::{Error, Result};
pub use grid::{build_grid, div_chemotaxis_flux, grad_sq, laplacian_apply, FaceFluxSpec, Field, Grid};
pub use io::{read_diagnostics_csv, read_snapshot, write_diagnostics_csv, write_snapshot};
pub use recovery::{v_from_u, v_from_z, VVariant};
pub use runner::{oracle_check, run_simulation, simulate, RunOutcome};
pub use scalar::Real;
pub use scheme::{mass, picard_substep, solve_step, SchemeParams, State, StepResult};
pub use study::{convergence_study, Family, StudyRow, StudyTable};
pub use truncation::{pow_s, t_band, t_lower, t_upper, TruncationParams};

pub type Grid64 = Grid<f64>;
pub type Field64 = Field<f64>;
pub type SchemeParams64 = SchemeParams<f64>;
pub type State64 = State<f64>;
pub type HelmholtzProblem64 = HelmholtzProblem<f64>;

pub type Grid32 = Grid<f32>;
pub type Field32 = Field<f32>;
pub type SchemeParams32 = SchemeParams<f32>;
pub type State32 = State<f32>;
pub type HelmholtzProblem32 = HelmholtzProblem<f32>;
