//! Filter state on SE₂(3)×ℝ⁶, IMU propagation, the right-invariant
//! error-state transition, covariance propagation, and static initialization
//! of gravity and gyro bias.

use crate::error::{Error, Result};
use crate::manifold::{skew, Mat3, Rot3, Tangent15, Vec3, SE23};
use nalgebra::SMatrix;

pub type Covariance15 = SMatrix<f64, 15, 15>;
pub type NoiseMat12 = SMatrix<f64, 12, 12>;
pub type TransitionF = SMatrix<f64, 15, 15>;
pub type NoiseF = SMatrix<f64, 15, 12>;

/// One IMU sample: gyro rate and specific force, body frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ImuSample {
    pub t: f64,
    pub gyro: Vec3,
    pub accel: Vec3,
}

/// Continuous-time noise densities for the 12-dimensional IMU noise vector
/// `[n_ω, n_a, n_bω, n_ba]`, per axis.
#[derive(Clone, Copy, Debug)]
pub struct NoiseParams {
    pub sigma_gyro: f64,
    pub sigma_accel: f64,
    pub sigma_gyro_bias: f64,
    pub sigma_accel_bias: f64,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams {
            sigma_gyro: 1e-3,
            sigma_accel: 1e-2,
            sigma_gyro_bias: 1e-5,
            sigma_accel_bias: 1e-4,
        }
    }
}

impl NoiseParams {
    /// Diagonal 12×12 density matrix `Q_τ` (squared densities).
    pub fn q_matrix(&self) -> NoiseMat12 {
        let mut q = NoiseMat12::zeros();
        for i in 0..3 {
            q[(i, i)] = self.sigma_gyro * self.sigma_gyro;
            q[(3 + i, 3 + i)] = self.sigma_accel * self.sigma_accel;
            q[(6 + i, 6 + i)] = self.sigma_gyro_bias * self.sigma_gyro_bias;
            q[(9 + i, 9 + i)] = self.sigma_accel_bias * self.sigma_accel_bias;
        }
        q
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.sigma_gyro,
            self.sigma_accel,
            self.sigma_gyro_bias,
            self.sigma_accel_bias,
        ];
        if all.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::Config("noise densities must be positive".into()));
        }
        Ok(())
    }
}

/// Gravity in the global frame. Not a filter state: estimated once at static
/// initialization, then constrained through the second-stage residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GravityVector(pub Vec3);

impl GravityVector {
    pub fn vector(&self) -> Vec3 {
        self.0
    }
}

/// Filter state: extended pose plus gyro/accel biases.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct State {
    pub x: SE23,
    pub bg: Vec3,
    pub ba: Vec3,
}

impl State {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn rot(&self) -> &Rot3 {
        &self.x.rot
    }
    pub fn vel(&self) -> Vec3 {
        self.x.vel
    }
    pub fn pos(&self) -> Vec3 {
        self.x.pos
    }

    /// Retraction `x ⊞ δ = (Exp(ξ)·X, b + δb)`.
    pub fn boxplus(&self, delta: &Tangent15) -> State {
        State {
            x: SE23::exp(&delta.xi()).compose(&self.x),
            bg: self.bg + delta.dbg(),
            ba: self.ba + delta.dba(),
        }
    }

    /// Right-invariant difference `x ⊟ x̂ = [Log(X X̂⁻¹), b - b̂]`.
    pub fn boxminus(&self, other: &State) -> Tangent15 {
        let xi = self.x.compose(&other.x.inverse()).log();
        let mut v = nalgebra::SVector::<f64, 15>::zeros();
        v.fixed_rows_mut::<9>(0).copy_from(&xi);
        v.fixed_rows_mut::<3>(9).copy_from(&(self.bg - other.bg));
        v.fixed_rows_mut::<3>(12).copy_from(&(self.ba - other.ba));
        Tangent15(v)
    }

    fn is_finite(&self) -> bool {
        self.x.rot.matrix().iter().all(|v| v.is_finite())
            && self.x.vel.iter().all(|v| v.is_finite())
            && self.x.pos.iter().all(|v| v.is_finite())
            && self.bg.iter().all(|v| v.is_finite())
            && self.ba.iter().all(|v| v.is_finite())
    }
}

/// One zero-order-hold IMU step with the noise term set to zero:
/// `R⁺ = R·Exp((ω-b_ω)Δt)`, `a_G = R(a-b_a)+g`, `v⁺ = v + a_G Δt`,
/// `p⁺ = p + vΔt + ½a_G Δt²`. Biases are random walks and stay put.
pub fn propagate_state(x: &State, u: &ImuSample, g: &GravityVector, dt: f64) -> Result<State> {
    propagate_state_noisy(x, u, g, dt, &SMatrix::<f64, 12, 1>::zeros())
}

/// Propagation with an explicit noise vector `n = [n_ω, n_a, n_bω, n_ba]`
/// held over the step. `propagate_state` is the `n = 0` case; tests use this
/// as the map behind the `F_n` finite-difference oracle.
pub fn propagate_state_noisy(
    x: &State,
    u: &ImuSample,
    g: &GravityVector,
    dt: f64,
    n: &SMatrix<f64, 12, 1>,
) -> Result<State> {
    if dt <= 0.0 || !dt.is_finite() {
        return Err(Error::NonFinite("propagate_state dt"));
    }
    if !x.is_finite()
        || !u.gyro.iter().chain(u.accel.iter()).all(|v| v.is_finite())
        || !g.0.iter().all(|v| v.is_finite())
    {
        return Err(Error::NonFinite("propagate_state input"));
    }
    let n_g = Vec3::new(n[0], n[1], n[2]);
    let n_a = Vec3::new(n[3], n[4], n[5]);
    let n_bg = Vec3::new(n[6], n[7], n[8]);
    let n_ba = Vec3::new(n[9], n[10], n[11]);

    let omega = u.gyro - x.bg - n_g;
    let a_world = x.rot().rotate(&(u.accel - x.ba - n_a)) + g.0;
    Ok(State {
        x: SE23 {
            rot: x.rot().compose(&Rot3::exp(&(omega * dt))),
            vel: x.vel() + a_world * dt,
            pos: x.pos() + x.vel() * dt + a_world * (0.5 * dt * dt),
        },
        bg: x.bg + n_bg * dt,
        ba: x.ba + n_ba * dt,
    })
}

/// Jacobians of the propagated right-invariant error w.r.t. the previous
/// error and the noise, both evaluated at zero error and zero noise.
///
/// For the right-invariant error the state enters only through gravity and
/// the bias columns:
///
/// ```text
/// F_x = [ I          0    0   -Δt·R̂⁺Jr          0        ]
///       [ Δt·[g]×    I    0   -Δt·[v̂⁺]×R̂⁺Jr    -Δt·R̂     ]
///       [ ½Δt²·[g]×  ΔtI  I   -Δt·[p̂⁺]×R̂⁺Jr    -½Δt²·R̂  ]
///       [ 0          0    0    I                0        ]
///       [ 0          0    0    0                I        ]
/// ```
///
/// with `R̂⁺ = R̂·Exp(ω̂Δt)` and `Jr` the SO(3) right Jacobian at `ω̂Δt`. The
/// `n_ω`/`n_a` columns of `F_n` equal the bias columns of `F_x`; the bias
/// rows of `F_n` are `Δt·I`.
pub fn error_transition(
    x: &State,
    u: &ImuSample,
    g: &GravityVector,
    dt: f64,
) -> (TransitionF, NoiseF) {
    let omega = u.gyro - x.bg;
    let accel = u.accel - x.ba;
    let r_next = x.rot().compose(&Rot3::exp(&(omega * dt)));
    let jr = Rot3::right_jacobian(&(omega * dt));
    let a_world = x.rot().rotate(&accel) + g.0;
    let v_next = x.vel() + a_world * dt;
    let p_next = x.pos() + x.vel() * dt + a_world * (0.5 * dt * dt);

    let rj: Mat3 = r_next.matrix() * jr;
    let gx = skew(&g.0);
    let r_hat = *x.rot().matrix();

    let mut f = TransitionF::identity();
    f.fixed_view_mut::<3, 3>(3, 0).copy_from(&(gx * dt));
    f.fixed_view_mut::<3, 3>(6, 0).copy_from(&(gx * (0.5 * dt * dt)));
    f.fixed_view_mut::<3, 3>(6, 3).copy_from(&(Mat3::identity() * dt));
    f.fixed_view_mut::<3, 3>(0, 9).copy_from(&(-rj * dt));
    f.fixed_view_mut::<3, 3>(3, 9).copy_from(&(-skew(&v_next) * rj * dt));
    f.fixed_view_mut::<3, 3>(6, 9).copy_from(&(-skew(&p_next) * rj * dt));
    f.fixed_view_mut::<3, 3>(3, 12).copy_from(&(-r_hat * dt));
    f.fixed_view_mut::<3, 3>(6, 12).copy_from(&(-r_hat * (0.5 * dt * dt)));

    let mut fn_ = NoiseF::zeros();
    fn_.fixed_view_mut::<3, 3>(0, 0).copy_from(&(-rj * dt));
    fn_.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-skew(&v_next) * rj * dt));
    fn_.fixed_view_mut::<3, 3>(6, 0).copy_from(&(-skew(&p_next) * rj * dt));
    fn_.fixed_view_mut::<3, 3>(3, 3).copy_from(&(-r_hat * dt));
    fn_.fixed_view_mut::<3, 3>(6, 3).copy_from(&(-r_hat * (0.5 * dt * dt)));
    fn_.fixed_view_mut::<3, 3>(9, 6).copy_from(&(Mat3::identity() * dt));
    fn_.fixed_view_mut::<3, 3>(12, 9).copy_from(&(Mat3::identity() * dt));

    (f, fn_)
}

/// Forces exact symmetry.
pub fn symmetrize(p: &Covariance15) -> Covariance15 {
    (p + p.transpose()) * 0.5
}

/// Covariance step `P⁺ = F_x P F_xᵀ + F_n Q_d F_nᵀ`, re-symmetrized.
///
/// `q` holds continuous-time densities; because `F_n` carries the
/// zero-order-hold `Δt` factors, the discretization dividing by `Δt` here
/// delivers a first-order per-step increment of `diag(σ²)·Δt`.
pub fn propagate_covariance(
    p: &Covariance15,
    f_x: &TransitionF,
    f_n: &NoiseF,
    q: &NoiseMat12,
    dt: f64,
) -> Covariance15 {
    let q_d = q / dt;
    symmetrize(&(f_x * p * f_x.transpose() + f_n * q_d * f_n.transpose()))
}

/// Result of a stationary IMU window: gravity direction, gyro bias, and the
/// initial orientation (the global frame is pinned to the initial IMU frame).
#[derive(Clone, Copy, Debug)]
pub struct StaticInit {
    pub gravity: GravityVector,
    pub gyro_bias: Vec3,
    pub rot0: Rot3,
}

/// Gravity magnitude substituted for the noisy accelerometer norm.
pub const GRAVITY_MAGNITUDE: f64 = 9.81;

/// Estimates gravity direction and gyro bias from a stationary buffer.
///
/// `g = -mean(a_m)` rescaled to 9.81 m/s², `b_ω = mean(ω_m)`, `R₀ = I`.
/// Rejects buffers shorter than 0.5 s or with accel variance above
/// `accel_var_threshold` (device probably moving).
pub fn static_initialize(buffer: &[ImuSample], accel_var_threshold: f64) -> Result<StaticInit> {
    if buffer.len() < 2 {
        return Err(Error::BufferTooShort { got: 0.0, need: 0.5 });
    }
    let span = buffer.last().unwrap().t - buffer.first().unwrap().t;
    if span < 0.5 {
        return Err(Error::BufferTooShort { got: span, need: 0.5 });
    }
    let n = buffer.len() as f64;
    let mean_a: Vec3 = buffer.iter().map(|s| s.accel).sum::<Vec3>() / n;
    let mean_w: Vec3 = buffer.iter().map(|s| s.gyro).sum::<Vec3>() / n;
    let var_a = buffer
        .iter()
        .map(|s| (s.accel - mean_a).norm_squared())
        .sum::<f64>()
        / n;
    if var_a > accel_var_threshold {
        return Err(Error::NotStationary {
            variance: var_a,
            threshold: accel_var_threshold,
        });
    }
    let norm = mean_a.norm();
    if norm < 1e-9 {
        return Err(Error::ZeroNorm("static_initialize mean accel"));
    }
    Ok(StaticInit {
        gravity: GravityVector(-mean_a / norm * GRAVITY_MAGNITUDE),
        gyro_bias: mean_w,
        rot0: Rot3::identity(),
    })
}

/// Drives `propagate_state` across a sample span, stepping between
/// consecutive stamps with the averaged (trapezoidal) inputs. Samples must be
/// sorted. Returns the pose trace at every sample stamp, starting with the
/// input state at `samples[0].t`.
pub fn propagate_span(
    x0: &State,
    samples: &[ImuSample],
    g: &GravityVector,
) -> Result<Vec<(f64, State)>> {
    if samples.is_empty() {
        return Err(Error::NoImuSamples { start: 0.0, end: 0.0 });
    }
    let mut out = Vec::with_capacity(samples.len());
    let mut x = *x0;
    out.push((samples[0].t, x));
    for pair in samples.windows(2) {
        let dt = pair[1].t - pair[0].t;
        if dt <= 0.0 {
            return Err(Error::Data("IMU timestamps not strictly increasing".into()));
        }
        let u = ImuSample {
            t: pair[0].t,
            gyro: (pair[0].gyro + pair[1].gyro) * 0.5,
            accel: (pair[0].accel + pair[1].accel) * 0.5,
        };
        x = propagate_state(&x, &u, g, dt)?;
        out.push((pair[1].t, x));
    }
    Ok(out)
}
