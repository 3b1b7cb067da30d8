//! The regularising map `u`, the homeomorphism `Φ = id + u` and the
//! transformed equation.

mod consistency;
mod elliptic;
mod grid;
mod parabolic;
mod phi;
mod pipeline;
mod semigroup;
mod transformed;

pub use consistency::{pathwise_consistency, ConsistencyConfig, ConsistencyReport, ConsistencyRow};
pub use elliptic::{
    elliptic_lambda_sweep, solve_u_elliptic, EllipticConfig, EllipticSolution, EllipticSweep,
    EllipticSweepRow,
};
pub use grid::{Cell, GridFunction, SpaceGrid, GRID_FORMAT_VERSION};
pub use parabolic::{
    boundary_effect, exponential_trapezoid_weights, parabolic_lambda_sweep, solve_u_parabolic,
    solve_u_parabolic_auto, AutoLambda, IterationRecord, LambdaAttempt, LambdaStrategy,
    ParabolicConfig, ParabolicSolution, SweepRow,
};
pub use phi::{build_phi, Homeomorphism, Inversion, INVERT_TOL};
pub use pipeline::{
    build_transform, transform_model, BuildFailure, TransformBuild, TransformConfig,
};
pub use semigroup::{
    check_gradient_estimate, estimate_p0, GradientCheckConfig, GradientReport, GradientRow,
};
pub use transformed::{
    transformed_dini, transformed_model, transformed_singular, verify_tilde_conditions,
    TildeConstants, TildeGridConfig, TransformKind, TransformedCoefficients, TransformedModel,
};

/// Acceptance threshold on `‖∇u‖` for the Dini pipeline.
pub const DINI_GRAD_THRESHOLD: f64 = 0.5;
/// Acceptance threshold on `‖∇u‖` for the singular pipeline: `‖∇u‖ ≤ ½`
/// gives `½ ≤ ‖∇Φ‖, ‖∇Φ^{-1}‖ ≤ 2`.
pub const SINGULAR_GRAD_THRESHOLD: f64 = 0.5;
