pub mod error;
pub mod ferrari;
pub mod grid;
pub mod hypergeometric;
pub mod params;
pub mod potentials;
pub mod quadrature;
pub mod riesz;
pub mod selftest;
pub mod solver;
pub mod asymptotics;
pub mod barriers;

pub use error::{Error, Result};
pub use asymptotics::{
    fit_decay, mass_audit, sharp_limit_check, tail_layout, verify_regime, DecayFit, FitModel, MassAudit, RegimeReport,
    SharpLimitReport, Verdict,
};
pub use barriers::{make_barrier, verify_barrier, Barrier, BarrierReport, Family};
pub use ferrari::{calibrate_ferrari, frac_laplacian_radial, FerrariEvaluator, RadialProfile};
pub use grid::{build_grid, GridLayout, RadialFunction, RadialGrid};
pub use params::{classify_regime, KernelParams, ProblemParams, RegimeId, RegimeSpec};
pub use potentials::{bump_potential, potential_from_source, potential_vz, Potential, PotentialTable};
pub use riesz::{assemble_kernel, riesz_apply, KernelMatrix};
pub use solver::{ordering_check, solve, MinimizerResult, Mode, OrderingReport, SolveOptions};
