//! Periodic orbits under ideal mono-harmonic forcing: Newmark shooting,
//! Floquet stability and branch continuation.

pub mod continuation;
pub mod newmark;
pub mod shooting;

pub use continuation::{
    capture_isola, continue_branch, trace_branch, ArclengthOptions, Branch, ContinuationOptions, IsolaCapture,
    IsolaSeed, orbits_at, ReferenceModel, ReferenceSample,
};
pub use newmark::{newmark_integrate, Forcing, NewmarkOutput};
pub use shooting::{
    floquet, linear_guess, linear_multipliers, shoot, BranchPoint, ShootingOptions, ShootingProblem, Stability,
    UNIT_CIRCLE_TOLERANCE,
};
