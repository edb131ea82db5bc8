//! Outer ellipsoidal approximations of an intersection of ellipsoids.

pub mod inscribed;
pub mod method;
pub mod parametric;
pub mod sdp;
pub mod weights;

pub use inscribed::{inscribed_inflate, max_inscribed};
pub use method::{run_method, Method, MethodResult, RelaxOptions};
pub use parametric::{
    bounding_no_delta, bounding_optimal, covariance_intersection, parametric_fuse,
    recursive_bounding, ParametricFusion,
};
pub use sdp::{
    decoupled_sdp, find_certificate, full_sdp, s_procedure, s_procedure_certificate, sdp_feasible,
};
pub use weights::{Normalization, WeightVector};
