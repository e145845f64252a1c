//! Time marching of the coupled plant/filter/controller system and the
//! stepped-sine test protocol.

pub mod config;
pub mod engine;
pub mod integrator;
pub mod ramp;
pub mod stepped;

pub use config::{ControlConfig, NoiseConfig, SimConfig};
pub use engine::{HoldData, SampleView, VirtualTest};
pub use integrator::{integrate_segment, DormandPrince, IntegratorConfig, Trajectory};
pub use ramp::{ramp_frequency, FrequencyRamp, PhaseProfile};
pub use stepped::{
    analyze_hold, aperiodicity, half_window_deviation, jump_to_isola, run_observed, run_stepped_sine, run_with, Branch, BranchClassifier, Clock,
    Direction, JumpPlan, NoClock, PointCriteria, PointFailure, PointKind, PointRecord, RunRecord,
    SteppedSineSchedule,
};

/// FFT-equivalent harmonic coefficients of an integer-period window.
pub use crate::spectrum::window_spectrum as fft_window_spectrum;
