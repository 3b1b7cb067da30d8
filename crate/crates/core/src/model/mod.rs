//! Model families, moduli of continuity and assumption checks.

pub mod fields;
pub mod modulus;
pub mod mollify;
pub mod spec;
pub mod validate;

pub use fields::{MatrixFieldSpec, VectorFieldSpec};
pub use modulus::{dini_check, DiniCheck, ModulusReport, ModulusSpec};
pub use mollify::{smooth_split, SmoothSplit, SplitNorms};
pub use spec::{DiniBounds, DiniModelSpec, DriftCap, GrowthTag, ModelSpec, SingularModelSpec};
pub use validate::{validate_model, AssumptionCheck, ValidationConfig, ValidationReport};
