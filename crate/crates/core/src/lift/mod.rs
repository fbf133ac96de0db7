//! Lindbladian lifts: generator families `L_t` with `L_t(ρ_t) = ρ̇_t`.

mod family;
mod feasibility;
mod geometric;
mod rankshift;
mod real;
mod replacer;
mod spectral;

pub use family::{EpsilonPolicy, Generator, LiftFamily, PointDiagnostics};
pub use feasibility::{
    feasibility_lift, min_dissipation_rate, solve_feasibility, tangent_cone_membership,
    FeasibilityProblem, FeasibilitySolution, Membership, Objective, SolverParams, FEASIBILITY_TOL,
    RATE_PENALTY,
};
pub use geometric::{
    exponential_approach_lift, geometric_coefficient, geometric_lift_affine, geometric_path,
    mollifier, mollifier_derivative, GeometricLift, GeometricReport, GEOMETRIC_GRID,
};
pub use rankshift::{
    cluster_rankshifts, continuity_ratios, rankshift_interpolation, superoperator_steps,
    CONTINUITY_RATIO,
};
pub use replacer::{
    kernel_compression_min, max_feasible_epsilon, replacer_generator, replacer_lift,
};
pub use spectral::{spectral_generator, spectral_lift, SPECTRAL_RESIDUAL_TOL};
