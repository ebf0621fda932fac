//! Score-based diffusion over SO(3), R³×SO(3) and SE(3) for pose estimation.

pub mod diffusion;
pub mod distributions;
pub mod error;
pub mod eval;
pub mod lie;
pub mod rng;
pub mod score_net;
pub mod scores;
pub mod symsol;
pub mod verify;

pub use distributions::IsotropicScale;
pub use error::{Error, Result};
pub use lie::{ParamMode, RigidTransform, Rotation, Tangent};
pub use rng::PoseRng;

pub use nalgebra;
