//! Wasserstein distances, relative entropies and pushforwards of discrete
//! measures, including measures on discretised path space.

mod entropy;
mod exact;
mod measure;
mod report;
mod sinkhorn;

pub use entropy::{girsanov_entropy, EntropyEstimate};
pub use exact::{
    cost_matrix, exact_wp, solve_transport, ExactOt, TransportPlan, CERTIFICATE_TOL,
    EXACT_ATOM_LIMIT,
};
pub use measure::{
    euclidean, relative_entropy_discrete, relative_entropy_weights, sup_metric, EmpiricalMeasure,
    WEIGHT_TOL,
};
pub use report::{write_distance_rows, DistanceRow};
pub use sinkhorn::{sinkhorn_wp, SinkhornBracket, SinkhornConfig};
