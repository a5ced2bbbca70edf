//! Numerical laboratory for Ricci flow and local Ricci flow on rotationally
//! symmetric metrics.
//!
//! The central object is a warped-product profile `g = φ² dx² + ψ² dSᵠ`
//! sampled on a 1D grid. On top of it the crate provides:
//!
//! * curvature fields (normal/tangential sectional, Ricci, scalar, |Rm|),
//! * an explicit RK4 flow engine for `∂g/∂t = −2χ²Ric` with singularity
//!   detection (χ ≡ 1 recovers global Ricci flow),
//! * integral norms, volumes and level-set isoperimetric quotients,
//! * the tensor Lipschitz distance between metric fields and its
//!   volume/isoperimetric comparison bounds,
//! * monitors for neck-pinch hypotheses, pseudolocality-shaped curvature
//!   bounds, Grönwall envelopes and local-flow energy inequalities,
//! * closed-form reference computations used as independent test oracles.

pub mod curvature;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod monitors;
pub mod norms;
pub mod oracles;
mod stencil;
pub mod tensor_lipschitz;

pub use error::{Error, Result};
pub use geometry::{
    arclength, build_cutoff, build_cylinder, build_dumbbell, build_round_sphere,
    CoordinateMetricField, CutoffProfile, DumbbellShape, ProfileMetric, Topology,
};
