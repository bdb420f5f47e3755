//! Target localization from torso landmarks, body rotation angles, and a
//! planar constant-velocity Kalman filter.

use nalgebra::{Matrix2x4, Matrix4, Vector3, Vector4};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{heading, unit_from_heading, wrap_angle, Vec2};

/// Minimum shoulder separation, meters.
pub const EPS_LANDMARK: f64 = 1e-6;

/// World-frame torso landmarks: left/right shoulder, left/right hip.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandmarkSet {
    pub left_shoulder: Vector3<f64>,
    pub right_shoulder: Vector3<f64>,
    pub left_hip: Vector3<f64>,
    pub right_hip: Vector3<f64>,
}

impl LandmarkSet {
    fn points(&self) -> [Vector3<f64>; 4] {
        [self.left_shoulder, self.right_shoulder, self.left_hip, self.right_hip]
    }

    pub fn validate(&self) -> Result<()> {
        if self.points().iter().any(|p| !p.iter().all(|c| c.is_finite())) {
            return Err(Error::InvalidArgument("non-finite landmark".into()));
        }
        if (self.left_shoulder - self.right_shoulder).norm() <= EPS_LANDMARK {
            return Err(Error::InvalidArgument("coincident shoulders".into()));
        }
        Ok(())
    }

    pub fn translated(&self, c: Vector3<f64>) -> Self {
        Self {
            left_shoulder: self.left_shoulder + c,
            right_shoulder: self.right_shoulder + c,
            left_hip: self.left_hip + c,
            right_hip: self.right_hip + c,
        }
    }
}

/// Mean of the four torso landmarks.
pub fn localize(lm: &LandmarkSet) -> Result<Vector3<f64>> {
    if lm.points().iter().any(|p| !p.iter().all(|c| c.is_finite())) {
        return Err(Error::InvalidArgument("non-finite landmark".into()));
    }
    let [a, b, c, d] = lm.points();
    Ok((a + b + c + d) / 4.0)
}

/// Body rotation of the target relative to its velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BodyRotation {
    /// Horizontal chest-forward vector (third component always 0).
    pub xi_rb: Vector3<f64>,
    pub r_b: f64,
    /// `None` when the speed is at or below [`EPS_SPEED`].
    pub r_v: Option<f64>,
    /// Wrapped `r_b - r_v`, positive when the body points left of the velocity.
    pub r_bv: Option<f64>,
}

/// Below this speed the velocity direction is undefined, m/s.
pub const EPS_SPEED: f64 = 0.1;

/// Shoulder line rotated a quarter turn clockwise: with the left shoulder on
/// the body's left, this points out of the chest.
pub fn body_rotation(lm: &LandmarkSet, v: Vec2) -> Result<BodyRotation> {
    lm.validate()?;
    let d = lm.left_shoulder - lm.right_shoulder;
    let xi_rb = Vector3::new(d.y, -d.x, 0.0);
    if xi_rb.x == 0.0 && xi_rb.y == 0.0 {
        return Err(Error::InvalidArgument("shoulders differ only vertically".into()));
    }
    let r_b = xi_rb.y.atan2(xi_rb.x);
    let (r_v, r_bv) = if v.norm() > EPS_SPEED {
        let r_v = heading(v);
        (Some(r_v), Some(wrap_angle(r_b - r_v)))
    } else {
        (None, None)
    };
    Ok(BodyRotation { xi_rb, r_b, r_v, r_bv })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FilterParams {
    /// White-acceleration process noise, m/s^2.
    pub sigma_accel: f64,
    /// Position measurement noise, m.
    pub sigma_meas: f64,
    /// Initial velocity standard deviation, m/s.
    pub sigma_vel0: f64,
}

impl Default for FilterParams {
    fn default() -> Self {
        Self { sigma_accel: 1.0, sigma_meas: 0.05, sigma_vel0: 2.0 }
    }
}

/// Filtered target state plus the latest body-rotation angles.
#[derive(Debug, Clone, PartialEq)]
pub struct TargetEstimate {
    pub position: Vec2,
    pub velocity: Vec2,
    /// Landmark centroid height; carried along, not filtered.
    pub height: f64,
    pub xi_rb: Vector3<f64>,
    pub r_b: f64,
    pub r_v: f64,
    pub r_bv: f64,
    /// False while the speed is too low for `r_v` and `r_bv` to be defined.
    pub rotation_valid: bool,
    /// Last well-defined direction of travel, if any.
    pub motion_dir: Option<Vec2>,
    /// Covariance of `[px, py, vx, vy]`.
    pub cov: Matrix4<f64>,
    pub stamp: f64,
}

impl TargetEstimate {
    /// Fresh estimate at a first position fix, zero velocity.
    pub fn new(position: Vec2, stamp: f64, params: &FilterParams) -> Self {
        let mut cov = Matrix4::zeros();
        let pv = params.sigma_meas.powi(2);
        let vv = params.sigma_vel0.powi(2);
        cov[(0, 0)] = pv;
        cov[(1, 1)] = pv;
        cov[(2, 2)] = vv;
        cov[(3, 3)] = vv;
        Self {
            position,
            velocity: Vec2::zeros(),
            height: 0.0,
            xi_rb: Vector3::new(1.0, 0.0, 0.0),
            r_b: 0.0,
            r_v: 0.0,
            r_bv: 0.0,
            rotation_valid: false,
            motion_dir: None,
            cov,
            stamp,
        }
    }

    pub fn speed(&self) -> f64 {
        self.velocity.norm()
    }

    /// Direction used for reachable regions: the current velocity when fast
    /// enough, otherwise the last valid one.
    pub fn travel_dir(&self) -> Option<Vec2> {
        if self.speed() > EPS_SPEED {
            Some(self.velocity / self.speed())
        } else {
            self.motion_dir
        }
    }

    fn state(&self) -> Vector4<f64> {
        Vector4::new(self.position.x, self.position.y, self.velocity.x, self.velocity.y)
    }
}

/// One predict + update cycle of the planar constant-velocity filter.
pub fn filter_step(
    est: &TargetEstimate,
    z: Vec2,
    dt: f64,
    params: &FilterParams,
) -> Result<TargetEstimate> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidArgument(format!("filter dt must be > 0, got {dt}")));
    }
    if !(z.x.is_finite() && z.y.is_finite()) {
        return Err(Error::InvalidArgument("non-finite measurement".into()));
    }
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    let q = params.sigma_accel.powi(2);
    let (q11, q12, q22) = (dt.powi(4) / 4.0 * q, dt.powi(3) / 2.0 * q, dt * dt * q);
    #[rustfmt::skip]
    let qm = Matrix4::new(
        q11, 0.0, q12, 0.0,
        0.0, q11, 0.0, q12,
        q12, 0.0, q22, 0.0,
        0.0, q12, 0.0, q22,
    );
    let x_pred = f * est.state();
    let p_pred = f * est.cov * f.transpose() + qm;

    let h = Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0);
    let r = nalgebra::Matrix2::identity() * params.sigma_meas.powi(2);
    let s = h * p_pred * h.transpose() + r;
    let s_inv = s
        .try_inverse()
        .ok_or_else(|| Error::Singular("innovation covariance".into()))?;
    let k = p_pred * h.transpose() * s_inv;
    let innov = z - Vec2::new(x_pred[0], x_pred[1]);
    let x = x_pred + k * innov;
    // Joseph form keeps the covariance symmetric positive semidefinite.
    let i_kh = Matrix4::identity() - k * h;
    let mut cov = i_kh * p_pred * i_kh.transpose() + k * r * k.transpose();
    cov = (cov + cov.transpose()) * 0.5;

    let mut out = est.clone();
    out.position = Vec2::new(x[0], x[1]);
    out.velocity = Vec2::new(x[2], x[3]);
    out.cov = cov;
    out.stamp = est.stamp + dt;
    if out.speed() > EPS_SPEED {
        out.motion_dir = Some(out.velocity / out.speed());
    }
    Ok(out)
}

/// Runs localization, filtering, and body rotation for each landmark frame.
#[derive(Debug, Clone)]
pub struct TargetObserver {
    params: FilterParams,
    estimate: Option<TargetEstimate>,
}

impl TargetObserver {
    pub fn new(params: FilterParams) -> Self {
        Self { params, estimate: None }
    }

    pub fn estimate(&self) -> Option<&TargetEstimate> {
        self.estimate.as_ref()
    }

    pub fn observe(&mut self, lm: &LandmarkSet, stamp: f64) -> Result<&TargetEstimate> {
        lm.validate()?;
        let p = localize(lm)?;
        let z = Vec2::new(p.x, p.y);
        let mut est = match &self.estimate {
            None => TargetEstimate::new(z, stamp, &self.params),
            Some(prev) => filter_step(prev, z, stamp - prev.stamp, &self.params)?,
        };
        est.stamp = stamp;
        est.height = p.z;
        let rot = body_rotation(lm, est.velocity)?;
        est.xi_rb = rot.xi_rb;
        est.r_b = rot.r_b;
        match (rot.r_v, rot.r_bv) {
            (Some(r_v), Some(r_bv)) => {
                est.r_v = r_v;
                est.r_bv = r_bv;
                est.rotation_valid = true;
            }
            _ => {
                if let Some(dir) = est.motion_dir {
                    est.r_v = heading(dir);
                }
                est.r_bv = 0.0;
                est.rotation_valid = false;
            }
        }
        Ok(self.estimate.insert(est))
    }
}

/// Synthesizes the four torso landmarks of a person standing at `position`
/// with chest facing `heading`.
pub fn synth_landmarks(
    position: Vec2,
    body_heading: f64,
    shoulder_width: f64,
    hip_width: f64,
    shoulder_height: f64,
    hip_height: f64,
) -> LandmarkSet {
    let left = unit_from_heading(body_heading + std::f64::consts::FRAC_PI_2);
    let at = |lateral: f64, z: f64| {
        let q = position + left * lateral;
        Vector3::new(q.x, q.y, z)
    };
    LandmarkSet {
        left_shoulder: at(shoulder_width / 2.0, shoulder_height),
        right_shoulder: at(-shoulder_width / 2.0, shoulder_height),
        left_hip: at(hip_width / 2.0, hip_height),
        right_hip: at(-hip_width / 2.0, hip_height),
    }
}
