//! Time-domain side of the analysis: method-of-steps integration, the
//! period map on history segments, Floquet multipliers and related checks.

mod diagnostics;
mod integrate;
mod poincare;

pub use diagnostics::{
    characteristic_function, characteristic_positive_root, equicontinuity_check, ode_poincare_degree,
    CharacteristicCheck, EquicontinuityReport, OdeDegree,
};
pub use integrate::{
    integrate, integrate_bounded, steps_per_delay, write_csv, HistorySegment, Trajectory, DEFAULT_BLOW_UP,
};
pub use poincare::{
    classify_multipliers, fixed_space_dimension, floquet_report, monodromy, period_step, periodicity_defect,
    poincare_jacobian, poincare_map, solution_multipliers, FloquetReport, DEFAULT_NODES, ODE_STEPS,
    SPURIOUS_MODULUS, TOL_FLOQUET,
};
