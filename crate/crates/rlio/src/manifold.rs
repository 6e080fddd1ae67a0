//! Lie-group primitives: SO(3), the extended pose group SE₂(3), the composite
//! filter manifold SE₂(3)×ℝ⁶ with its ⊞/⊟ retraction pair, and the S² arc
//! metric used to score gravity-direction estimates.
//!
//! Tangent block order is fixed repo-wide: `[δθ, δv, δp, δb_ω, δb_a]`.
//! SE₂(3) tangents use the first nine blocks in the same order, `[θ, ν, ρ]`.

use crate::error::{Error, Result};
use nalgebra::{Matrix3, SMatrix, SVector, Vector3};

pub type Vec3 = Vector3<f64>;
pub type Mat3 = Matrix3<f64>;
pub type Vec9 = SVector<f64, 9>;
pub type Mat9 = SMatrix<f64, 9, 9>;

/// Below this angle Rodrigues coefficients switch to their Taylor series.
pub const SMALL_ANGLE: f64 = 1e-5;

/// Skew-symmetric (hat) matrix: `skew(a) * b = a × b`.
#[inline]
pub fn skew(v: &Vec3) -> Mat3 {
    Mat3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// 3×3 rotation matrix constrained to SO(3).
///
/// Construction from raw matrices goes through [`Rot3::from_matrix`], which
/// checks orthonormality; the exp map and compositions preserve it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rot3(Mat3);

impl Default for Rot3 {
    fn default() -> Self {
        Self::identity()
    }
}

impl Rot3 {
    pub fn identity() -> Self {
        Rot3(Mat3::identity())
    }

    /// Wraps a matrix after checking `RᵀR = I` and `det R = 1` within 1e-9.
    pub fn from_matrix(m: Mat3) -> Result<Self> {
        let ortho = (m.transpose() * m - Mat3::identity()).abs().max();
        if !ortho.is_finite() || ortho > 1e-9 {
            return Err(Error::NonFinite("Rot3::from_matrix (not orthogonal)"));
        }
        if (m.determinant() - 1.0).abs() > 1e-9 {
            return Err(Error::NonFinite("Rot3::from_matrix (det != 1)"));
        }
        Ok(Rot3(m))
    }

    /// Wraps without validation. Caller guarantees the invariants.
    pub(crate) fn from_matrix_unchecked(m: Mat3) -> Self {
        Rot3(m)
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.0
    }

    pub fn transpose(&self) -> Rot3 {
        Rot3(self.0.transpose())
    }

    pub fn compose(&self, other: &Rot3) -> Rot3 {
        Rot3(self.0 * other.0)
    }

    #[inline]
    pub fn rotate(&self, v: &Vec3) -> Vec3 {
        self.0 * v
    }

    #[inline]
    pub fn unrotate(&self, v: &Vec3) -> Vec3 {
        self.0.transpose() * v
    }

    /// Exponential map (Rodrigues). Small angles use the series expansion.
    pub fn exp(v: &Vec3) -> Rot3 {
        let theta2 = v.norm_squared();
        let vx = skew(v);
        if theta2 < SMALL_ANGLE * SMALL_ANGLE {
            // sin θ/θ ≈ 1 - θ²/6, (1-cos θ)/θ² ≈ 1/2 - θ²/24
            let a = 1.0 - theta2 / 6.0;
            let b = 0.5 - theta2 / 24.0;
            return Rot3(Mat3::identity() + vx * a + vx * vx * b);
        }
        let theta = theta2.sqrt();
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / theta2;
        Rot3(Mat3::identity() + vx * a + vx * vx * b)
    }

    /// Principal logarithm, `|result| ≤ π`.
    pub fn log(&self) -> Vec3 {
        self.log_flagged().0
    }

    /// Logarithm plus a reduced-precision flag raised when the rotation angle
    /// is within 1e-6 of π, where the axis is extracted from the symmetric
    /// part and only the skew sign information disambiguates it.
    pub fn log_flagged(&self) -> (Vec3, bool) {
        // Shepperd-style matrix → quaternion conversion is stable over the
        // whole angle range, including near π where trace-based extraction
        // degrades.
        let m = &self.0;
        let tr = m.trace();
        let (w, x, y, z);
        if tr > 0.0 {
            let s = (tr + 1.0).sqrt() * 2.0;
            w = 0.25 * s;
            x = (m[(2, 1)] - m[(1, 2)]) / s;
            y = (m[(0, 2)] - m[(2, 0)]) / s;
            z = (m[(1, 0)] - m[(0, 1)]) / s;
        } else if m[(0, 0)] > m[(1, 1)] && m[(0, 0)] > m[(2, 2)] {
            let s = (1.0 + m[(0, 0)] - m[(1, 1)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(2, 1)] - m[(1, 2)]) / s;
            x = 0.25 * s;
            y = (m[(0, 1)] + m[(1, 0)]) / s;
            z = (m[(0, 2)] + m[(2, 0)]) / s;
        } else if m[(1, 1)] > m[(2, 2)] {
            let s = (1.0 + m[(1, 1)] - m[(0, 0)] - m[(2, 2)]).sqrt() * 2.0;
            w = (m[(0, 2)] - m[(2, 0)]) / s;
            x = (m[(0, 1)] + m[(1, 0)]) / s;
            y = 0.25 * s;
            z = (m[(1, 2)] + m[(2, 1)]) / s;
        } else {
            let s = (1.0 + m[(2, 2)] - m[(0, 0)] - m[(1, 1)]).sqrt() * 2.0;
            w = (m[(1, 0)] - m[(0, 1)]) / s;
            x = (m[(0, 2)] + m[(2, 0)]) / s;
            y = (m[(1, 2)] + m[(2, 1)]) / s;
            z = (m[(2, 0)] - m[(0, 2)]) / s;
        }
        // Principal branch: w ≥ 0 keeps |θ| ≤ π.
        let (w, v) = if w < 0.0 {
            (-w, Vec3::new(-x, -y, -z))
        } else {
            (w, Vec3::new(x, y, z))
        };
        let vn = v.norm();
        let theta = 2.0 * vn.atan2(w);
        let reduced = (theta - std::f64::consts::PI).abs() < 1e-6;
        if vn < 1e-300 {
            return (Vec3::zeros(), reduced);
        }
        let axis = v / vn;
        (axis * theta, reduced)
    }

    /// Left Jacobian of SO(3): `Exp(v + d) ≈ Exp(Jl(v)·d) · Exp(v)`.
    pub fn left_jacobian(v: &Vec3) -> Mat3 {
        let theta2 = v.norm_squared();
        let vx = skew(v);
        if theta2 < SMALL_ANGLE * SMALL_ANGLE {
            let b = 0.5 - theta2 / 24.0;
            let c = 1.0 / 6.0 - theta2 / 120.0;
            return Mat3::identity() + vx * b + vx * vx * c;
        }
        let theta = theta2.sqrt();
        let b = (1.0 - theta.cos()) / theta2;
        let c = (theta - theta.sin()) / (theta2 * theta);
        Mat3::identity() + vx * b + vx * vx * c
    }

    /// Inverse left Jacobian, valid on the open π-ball.
    pub fn left_jacobian_inv(v: &Vec3) -> Mat3 {
        let theta2 = v.norm_squared();
        let vx = skew(v);
        if theta2 < SMALL_ANGLE * SMALL_ANGLE {
            let c = 1.0 / 12.0 + theta2 / 720.0;
            return Mat3::identity() - vx * 0.5 + vx * vx * c;
        }
        let theta = theta2.sqrt();
        let c = (1.0 / theta2) - (1.0 + theta.cos()) / (2.0 * theta * theta.sin());
        Mat3::identity() - vx * 0.5 + vx * vx * c
    }

    /// Right Jacobian: `Exp(v + d) ≈ Exp(v) · Exp(Jr(v)·d)`.
    pub fn right_jacobian(v: &Vec3) -> Mat3 {
        Self::left_jacobian(&(-v))
    }

    pub fn right_jacobian_inv(v: &Vec3) -> Mat3 {
        Self::left_jacobian_inv(&(-v))
    }

    /// Max deviation from the SO(3) invariants, for tests and validation.
    pub fn orthogonality_error(&self) -> f64 {
        let e1 = (self.0.transpose() * self.0 - Mat3::identity()).abs().max();
        let e2 = (self.0.determinant() - 1.0).abs();
        e1.max(e2)
    }
}

/// Extended pose: rotation, velocity, position packed as the 5×5 block matrix
/// `[R v p; 0 1 0; 0 0 1]`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SE23 {
    pub rot: Rot3,
    pub vel: Vec3,
    pub pos: Vec3,
}

impl SE23 {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn new(rot: Rot3, vel: Vec3, pos: Vec3) -> Self {
        SE23 { rot, vel, pos }
    }

    /// Group composition: `(R₁,v₁,p₁)·(R₂,v₂,p₂) = (R₁R₂, R₁v₂+v₁, R₁p₂+p₁)`.
    pub fn compose(&self, other: &SE23) -> SE23 {
        SE23 {
            rot: self.rot.compose(&other.rot),
            vel: self.rot.rotate(&other.vel) + self.vel,
            pos: self.rot.rotate(&other.pos) + self.pos,
        }
    }

    pub fn inverse(&self) -> SE23 {
        let rt = self.rot.transpose();
        SE23 {
            rot: rt,
            vel: -rt.rotate(&self.vel),
            pos: -rt.rotate(&self.pos),
        }
    }

    /// Group exponential. `xi = [θ, ν, ρ]`; the SO(3) left Jacobian maps the
    /// ν and ρ blocks onto the velocity and position columns.
    pub fn exp(xi: &Vec9) -> SE23 {
        let theta = Vec3::new(xi[0], xi[1], xi[2]);
        let nu = Vec3::new(xi[3], xi[4], xi[5]);
        let rho = Vec3::new(xi[6], xi[7], xi[8]);
        let jl = Rot3::left_jacobian(&theta);
        SE23 {
            rot: Rot3::exp(&theta),
            vel: jl * nu,
            pos: jl * rho,
        }
    }

    /// Group logarithm, inverse of [`SE23::exp`] on the π-ball.
    pub fn log(&self) -> Vec9 {
        self.log_flagged().0
    }

    pub fn log_flagged(&self) -> (Vec9, bool) {
        let (theta, reduced) = self.rot.log_flagged();
        let jl_inv = Rot3::left_jacobian_inv(&theta);
        let nu = jl_inv * self.vel;
        let rho = jl_inv * self.pos;
        let mut out = Vec9::zeros();
        out.fixed_rows_mut::<3>(0).copy_from(&theta);
        out.fixed_rows_mut::<3>(3).copy_from(&nu);
        out.fixed_rows_mut::<3>(6).copy_from(&rho);
        (out, reduced)
    }

    /// Embeds as the 5×5 matrix form.
    pub fn as_matrix(&self) -> SMatrix<f64, 5, 5> {
        let mut m = SMatrix::<f64, 5, 5>::identity();
        m.fixed_view_mut::<3, 3>(0, 0).copy_from(self.rot.matrix());
        m.fixed_view_mut::<3, 1>(0, 3).copy_from(&self.vel);
        m.fixed_view_mut::<3, 1>(0, 4).copy_from(&self.pos);
        m
    }

    /// Left Jacobian of SE₂(3) in `[θ, ν, ρ]` block coordinates.
    pub fn left_jacobian(xi: &Vec9) -> Mat9 {
        let theta = Vec3::new(xi[0], xi[1], xi[2]);
        let nu = Vec3::new(xi[3], xi[4], xi[5]);
        let rho = Vec3::new(xi[6], xi[7], xi[8]);
        let jl = Rot3::left_jacobian(&theta);
        let qn = barfoot_q(&theta, &nu);
        let qr = barfoot_q(&theta, &rho);
        let mut out = Mat9::zeros();
        out.fixed_view_mut::<3, 3>(0, 0).copy_from(&jl);
        out.fixed_view_mut::<3, 3>(3, 3).copy_from(&jl);
        out.fixed_view_mut::<3, 3>(6, 6).copy_from(&jl);
        out.fixed_view_mut::<3, 3>(3, 0).copy_from(&qn);
        out.fixed_view_mut::<3, 3>(6, 0).copy_from(&qr);
        out
    }

    pub fn left_jacobian_inv(xi: &Vec9) -> Mat9 {
        let theta = Vec3::new(xi[0], xi[1], xi[2]);
        let nu = Vec3::new(xi[3], xi[4], xi[5]);
        let rho = Vec3::new(xi[6], xi[7], xi[8]);
        let jli = Rot3::left_jacobian_inv(&theta);
        let qn = barfoot_q(&theta, &nu);
        let qr = barfoot_q(&theta, &rho);
        let mut out = Mat9::zeros();
        out.fixed_view_mut::<3, 3>(0, 0).copy_from(&jli);
        out.fixed_view_mut::<3, 3>(3, 3).copy_from(&jli);
        out.fixed_view_mut::<3, 3>(6, 6).copy_from(&jli);
        out.fixed_view_mut::<3, 3>(3, 0).copy_from(&(-jli * qn * jli));
        out.fixed_view_mut::<3, 3>(6, 0).copy_from(&(-jli * qr * jli));
        out
    }
}

/// Off-diagonal block of the SE(3)/SE₂(3) left Jacobian (Barfoot's Q matrix):
/// the sensitivity of the translated column to the rotation block.
fn barfoot_q(theta: &Vec3, rho: &Vec3) -> Mat3 {
    let px = skew(theta);
    let rx = skew(rho);
    let t2 = theta.norm_squared();
    let (c1, c2, c3);
    if t2 < SMALL_ANGLE * SMALL_ANGLE {
        c1 = 1.0 / 6.0 - t2 / 120.0;
        c2 = 1.0 / 24.0 - t2 / 720.0;
        c3 = 1.0 / 120.0 - t2 / 2520.0;
    } else {
        let t = t2.sqrt();
        let (s, c) = t.sin_cos();
        c1 = (t - s) / (t2 * t);
        c2 = (t2 + 2.0 * c - 2.0) / (2.0 * t2 * t2);
        c3 = (2.0 * t - 3.0 * s + t * c) / (2.0 * t2 * t2 * t);
    }
    rx * 0.5
        + (px * rx + rx * px + px * rx * px) * c1
        + (px * px * rx + rx * px * px - px * rx * px * 3.0) * c2
        + (px * rx * px * px + px * px * rx * px) * c3
}

/// 15-dimensional tangent of the filter manifold, blocks
/// `[δθ, δv, δp, δb_ω, δb_a]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tangent15(pub SVector<f64, 15>);

impl Default for Tangent15 {
    fn default() -> Self {
        Tangent15(SVector::zeros())
    }
}

impl Tangent15 {
    pub fn zeros() -> Self {
        Self::default()
    }

    pub fn from_blocks(dtheta: Vec3, dv: Vec3, dp: Vec3, dbg: Vec3, dba: Vec3) -> Self {
        let mut v = SVector::<f64, 15>::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&dtheta);
        v.fixed_rows_mut::<3>(3).copy_from(&dv);
        v.fixed_rows_mut::<3>(6).copy_from(&dp);
        v.fixed_rows_mut::<3>(9).copy_from(&dbg);
        v.fixed_rows_mut::<3>(12).copy_from(&dba);
        Tangent15(v)
    }

    pub fn dtheta(&self) -> Vec3 {
        self.0.fixed_rows::<3>(0).into()
    }
    pub fn dv(&self) -> Vec3 {
        self.0.fixed_rows::<3>(3).into()
    }
    pub fn dp(&self) -> Vec3 {
        self.0.fixed_rows::<3>(6).into()
    }
    pub fn dbg(&self) -> Vec3 {
        self.0.fixed_rows::<3>(9).into()
    }
    pub fn dba(&self) -> Vec3 {
        self.0.fixed_rows::<3>(12).into()
    }

    /// The SE₂(3) part `[θ, ν, ρ]`.
    pub fn xi(&self) -> Vec9 {
        self.0.fixed_rows::<9>(0).into()
    }

    pub fn norm(&self) -> f64 {
        self.0.norm()
    }
}

/// Arc angle between two directions on S², `arccos⟨ĝ₁, ĝ₂⟩ ∈ [0, π]`.
///
/// Symmetric and invariant to positive scaling of either argument.
pub fn s2_angle(g1: &Vec3, g2: &Vec3) -> Result<f64> {
    let n1 = g1.norm();
    let n2 = g2.norm();
    if n1 == 0.0 || n2 == 0.0 {
        return Err(Error::ZeroNorm("s2_angle"));
    }
    let c = (g1.dot(g2) / (n1 * n2)).clamp(-1.0, 1.0);
    Ok(c.acos())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_vec3(rng: &mut impl Rng, scale: f64) -> Vec3 {
        Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        ) * scale
    }

    #[test]
    fn exp_zero_is_identity() {
        let r = Rot3::exp(&Vec3::zeros());
        assert_relative_eq!(*r.matrix(), Mat3::identity(), epsilon = 1e-15);
    }

    #[test]
    fn exp_quarter_turn_about_x() {
        let r = Rot3::exp(&Vec3::new(PI / 2.0, 0.0, 0.0));
        let mapped = r.rotate(&Vec3::new(0.0, 1.0, 0.0));
        assert_relative_eq!(mapped, Vec3::new(0.0, 0.0, 1.0), epsilon = 1e-12);
    }

    #[test]
    fn exp_trace_identity() {
        // trace(Exp(v)) = 1 + 2 cos|v|
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let v = random_vec3(&mut rng, 1.0).normalize() * 0.3;
            let r = Rot3::exp(&v);
            assert_relative_eq!(r.matrix().trace(), 1.0 + 2.0 * 0.3f64.cos(), epsilon = 1e-12);
        }
    }

    #[test]
    fn log_identity_is_zero() {
        assert_eq!(Rot3::identity().log(), Vec3::zeros());
    }

    #[test]
    fn log_round_trip() {
        let v = Vec3::new(0.1, -0.2, 0.3);
        assert_relative_eq!(Rot3::exp(&v).log(), v, epsilon = 1e-10);
    }

    #[test]
    fn log_pi_about_z() {
        // Oracle: rotation by π about z has eigenvector [0,0,1] for
        // eigenvalue +1; the log must be [0,0,π] up to axis sign.
        let r = Rot3::exp(&Vec3::new(0.0, 0.0, PI));
        let (l, reduced) = r.log_flagged();
        assert!(reduced);
        assert_relative_eq!(l.norm(), PI, epsilon = 1e-9);
        assert_relative_eq!(l.z.abs(), PI, epsilon = 1e-9);
    }

    #[test]
    fn log_near_pi_branch() {
        for eps in [1e-3, 1e-5, 1e-7, 0.0] {
            let v = Vec3::new(0.3, -0.4, 0.5).normalize() * (PI - eps);
            let r = Rot3::exp(&v);
            let l = r.log();
            // Up to axis sign at exactly π.
            let err = (l - v).norm().min((l + v).norm());
            assert!(err < 1e-8, "eps={eps}: err={err}");
        }
    }

    #[test]
    fn se23_exp_zero() {
        let x = SE23::exp(&Vec9::zeros());
        assert_eq!(x, SE23::identity());
    }

    #[test]
    fn se23_pure_translation() {
        let mut xi = Vec9::zeros();
        xi[3] = 1.0;
        xi[4] = -2.0;
        xi[8] = 0.5;
        let x = SE23::exp(&xi);
        assert_eq!(x.rot, Rot3::identity());
        assert_relative_eq!(x.vel, Vec3::new(1.0, -2.0, 0.0), epsilon = 1e-15);
        assert_relative_eq!(x.pos, Vec3::new(0.0, 0.0, 0.5), epsilon = 1e-15);
    }

    #[test]
    fn se23_embedding_blocks() {
        let xi = Vec9::from_fn(|i, _| 0.1 * (i as f64 + 1.0));
        let m = SE23::exp(&xi).as_matrix();
        assert_eq!(m.fixed_view::<2, 2>(3, 3).clone_owned(), SMatrix::<f64, 2, 2>::identity());
        assert_eq!(m.fixed_view::<2, 3>(3, 0).clone_owned(), SMatrix::<f64, 2, 3>::zeros());
    }

    #[test]
    fn se23_log_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let mut xi = Vec9::zeros();
            for i in 0..9 {
                xi[i] = rng.gen_range(-1.0..1.0);
            }
            xi *= 0.5 / xi.norm().max(1.0);
            let back = SE23::exp(&xi).log();
            assert_relative_eq!(back, xi, epsilon = 1e-9);
        }
    }

    #[test]
    fn se23_left_jacobian_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = 1e-6;
        for _ in 0..20 {
            let mut xi = Vec9::zeros();
            for i in 0..9 {
                xi[i] = rng.gen_range(-0.4..0.4);
            }
            let jl = SE23::left_jacobian(&xi);
            // FD of d ↦ Log(Exp(xi + d)) ∘ Exp(xi)⁻¹ at d = 0.
            let base = SE23::exp(&xi);
            let mut fd = Mat9::zeros();
            for c in 0..9 {
                let mut xp = xi;
                let mut xm = xi;
                xp[c] += h;
                xm[c] -= h;
                let dp = SE23::exp(&xp).compose(&base.inverse()).log();
                let dm = SE23::exp(&xm).compose(&base.inverse()).log();
                fd.set_column(c, &((dp - dm) / (2.0 * h)));
            }
            let err = (jl - fd).abs().max();
            assert!(err < 1e-6, "err = {err}");
            // Inverse consistency.
            let prod = SE23::left_jacobian_inv(&xi) * jl;
            assert!((prod - Mat9::identity()).abs().max() < 1e-10);
        }
    }

    #[test]
    fn s2_angle_cases() {
        let g = Vec3::new(0.0, 0.0, -1.0);
        assert_eq!(s2_angle(&g, &g).unwrap(), 0.0);
        assert_relative_eq!(
            s2_angle(&g, &Vec3::new(0.0, 0.0, 1.0)).unwrap(),
            PI,
            epsilon = 1e-15
        );
        let tilted = Vec3::new(0.05f64.sin(), 0.0, -(0.05f64.cos()));
        assert_relative_eq!(s2_angle(&g, &tilted).unwrap(), 0.05, epsilon = 1e-12);
        assert!(s2_angle(&Vec3::zeros(), &g).is_err());
    }

    proptest! {
        #[test]
        fn so3_round_trip_large(seed in 0u64..500) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v = random_vec3(&mut rng, 1.0).normalize() * rng.gen_range(0.0..2.5);
            let back = Rot3::exp(&v).log();
            prop_assert!((back - v).norm() < 1e-9);
            prop_assert!(Rot3::exp(&v).orthogonality_error() < 1e-9);
        }

        #[test]
        fn s2_angle_symmetric_scale_invariant(seed in 0u64..200) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
            let a = random_vec3(&mut rng, 2.0) + Vec3::new(0.1, 0.0, 0.0);
            let b = random_vec3(&mut rng, 2.0) + Vec3::new(0.0, 0.1, 0.0);
            let s = rng.gen_range(0.1..10.0);
            let d1 = s2_angle(&a, &b).unwrap();
            let d2 = s2_angle(&b, &a).unwrap();
            let d3 = s2_angle(&(a * s), &b).unwrap();
            prop_assert!((d1 - d2).abs() < 1e-12);
            prop_assert!((d1 - d3).abs() < 1e-10);
        }
    }
}
