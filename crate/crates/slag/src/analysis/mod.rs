//! End-to-end pipelines and the verification suite.

pub mod handle;
pub mod holder;
pub mod pipeline;
pub mod properties;
pub mod sobolev;
pub mod weakform;

pub use handle::{Provenance, SolutionHandle, SolutionSurface};
pub use holder::holder_exponent;
pub use pipeline::{
    build_singular_solution, build_smooth_family, FamilyParams, SingularPipeline, SmoothFamily,
};
pub use properties::{verify_property_2_2, verify_property_2_4, verify_rotated_properties};
pub use sobolev::sobolev_profile;
pub use weakform::{mss_from_potential, weak_residual, weak_residual_pipeline, MssEvaluators, TestField};
