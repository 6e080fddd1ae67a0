//! Radar-LiDAR-inertial odometry with velocity-aware gravity estimation.
//!
//! The filter tracks an extended pose on SE₂(3) (rotation, velocity, position)
//! plus gyro and accelerometer biases, propagates with IMU measurements, and
//! corrects in two stages per radar-synchronized sweep: point-to-plane LiDAR
//! residuals together with per-point radar Doppler residuals first, then a
//! gravity-direction residual built from the radar-updated velocity.
//!
//! ## Conventions (held throughout)
//! - **Global frame**: the initial IMU frame. Gravity points *down*,
//!   `g ≈ [0, 0, -9.81]` when starting upright.
//! - **Error state** `δx ∈ ℝ¹⁵`, right-invariant on the group part:
//!   `δx = [Log(X X̂⁻¹), b - b̂]` with block order
//!   `[δθ (rad), δv (m/s), δp (m), δb_ω (rad/s), δb_a (m/s²)]`.
//! - **Retraction** `x ⊞ δ = (Exp(ξ)·X, b + δb)` — the group increment
//!   multiplies on the *left*.
//! - **Doppler sign**: a static point's Doppler is `u(p)ᵀ v_ego` in the radar
//!   frame, positive when the sensor moves toward the point.
//!
//! The [`sim`] module generates deterministic synthetic worlds (planes, box
//! movers, analytic trajectories) for every sensor, so the whole pipeline can
//! be exercised end to end without external data.

pub mod config;
pub mod dataset;
pub mod dynamic_removal;
pub mod error;
pub mod eval;
pub mod gravity;
pub mod manifold;
pub mod map_index;
pub mod pipeline;
pub mod radar;
pub mod report;
pub mod sim;
pub mod state;
pub mod sweep;
pub mod update;

pub use config::RunConfig;
pub use error::{Error, Result};
pub use eval::TrajectoryEstimate;
pub use manifold::{Rot3, Tangent15, SE23};
pub use pipeline::{run_pipeline, RunOutput};
pub use state::{Covariance15, GravityVector, ImuSample, NoiseParams, State};
