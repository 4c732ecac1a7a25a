//! Spectral solution of the periodic problem: the fixed-point operator on
//! truncated Fourier series, Newton from many starts and the degree audit.

mod audit;
mod multistart;
mod newton;
mod operator;

pub use audit::{degree_audit, DegreeAudit};
pub use multistart::{
    candidate_defect, choose_degree, forcing_transform, multi_start_solve, near_equilibrium_radius,
    probe_forcing_threshold, random_forcing, stays_in_domain, ForcingProbe, SolutionSet, StartFailures,
    DEGREE_HEADROOM, MIN_DEGREE,
};
pub use newton::{jacobian, newton_solve, truncation_tail, SolutionRecord, SolverOptions};
pub use operator::{
    apply_k, fine_grid_size, fixed_point_map, nemitskii, p_hat, p_hat_gain, residual, time_defect, Residual,
};
