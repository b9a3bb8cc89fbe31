//! Sparse incremental structure-from-motion for small indoor captures.

pub mod ba;
pub mod features;
pub mod io;
mod linalg;
pub mod model;
pub mod pnp;
pub mod reconstruct;
pub mod twoview;

pub use ba::{bundle_adjust, perturb_pose, projection_jacobians, refine_pose, BAOptions, BundleResult, Matrix2x6};
pub use features::{detect_features, harris_response, match_features, Feature, DESCRIPTOR_LEN};
pub use io::{
    model_from_json, model_to_json, ply_string, poses_from_json, poses_to_json, read_model, write_reconstruction,
    MODEL_FILE, PLY_FILE, POSES_FILE,
};
pub use linalg::{nearest_rotation, rotation_angle_between};
pub use model::{Gauge, Observation, SparseModel, Track};
pub use pnp::pnp;
pub use reconstruct::{reconstruct, ReconstructOptions, Reconstruction};
pub use twoview::{
    decompose_essential, essential_from_pose, estimate_essential, recover_pose, sampson_distance, triangulate,
    Correspondence, EssentialEstimate, RansacOptions, RelativePose,
};
