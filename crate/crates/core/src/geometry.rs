//! Relational cues from per-person observations: camera distance from face
//! height, bird-view placement, pairwise distance and gaze-cone attention.
//!
//! Bird-view frame: the camera wearer sits at the origin, `+y` is the camera
//! forward axis and `+x` points to the right of the image. Angles
//! (`facing_angle`, bearings) are measured counter-clockwise from `+x`, so the
//! wearer faces `π/2`.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{poly_eval, polyfit};

pub const MIN_DISTANCE_M: f64 = 0.1;
pub const MAX_DISTANCE_M: f64 = 20.0;

/// Wraps an angle into `(-π, π]`.
pub fn normalize_angle(a: f64) -> f64 {
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

/// Polynomial map from face height in pixels to camera distance in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceCalibration {
    pub degree: usize,
    /// Ascending powers of the face height.
    pub coefficients: Vec<f64>,
    pub valid_height_range: [f64; 2],
}

impl DistanceCalibration {
    pub fn new(coefficients: Vec<f64>, valid_height_range: [f64; 2]) -> Result<Self> {
        let cal = Self {
            degree: coefficients.len().saturating_sub(1),
            coefficients,
            valid_height_range,
        };
        cal.validate()?;
        Ok(cal)
    }

    pub fn validate(&self) -> Result<()> {
        if self.coefficients.is_empty() || self.degree + 1 != self.coefficients.len() {
            return Err(Error::invalid(format!(
                "calibration degree {} does not match {} coefficients",
                self.degree,
                self.coefficients.len()
            )));
        }
        let [lo, hi] = self.valid_height_range;
        if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
            return Err(Error::invalid(format!("bad valid_height_range [{lo}, {hi}]")));
        }
        if self.coefficients.iter().any(|c| !c.is_finite()) {
            return Err(Error::invalid("non-finite calibration coefficient"));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cal: Self = serde_json::from_str(text)?;
        cal.validate()?;
        Ok(cal)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes")
    }

    pub fn estimate(&self, face_height_px: f64) -> Result<f64> {
        estimate_distance(self, face_height_px)
    }
}

/// Fits the face-height → distance polynomial to `(height_px, distance_m)` samples.
pub fn fit_distance_model(samples: &[(f64, f64)], degree: usize) -> Result<DistanceCalibration> {
    if let Some(&(h, _)) = samples.iter().find(|(h, _)| !(*h > 0.0)) {
        return Err(Error::invalid(format!("face height must be positive, got {h}")));
    }
    let (hs, ds): (Vec<f64>, Vec<f64>) = samples.iter().copied().unzip();
    let coefficients = polyfit(&hs, &ds, degree)?;
    let lo = hs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = hs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    DistanceCalibration::new(coefficients, [lo, hi])
}

/// Distance for a face height; the height is clamped into the calibrated
/// range first and the result into `[0.1, 20]` m.
pub fn estimate_distance(cal: &DistanceCalibration, face_height_px: f64) -> Result<f64> {
    if !(face_height_px > 0.0) || !face_height_px.is_finite() {
        return Err(Error::invalid(format!(
            "face height must be positive and finite, got {face_height_px}"
        )));
    }
    let [lo, hi] = cal.valid_height_range;
    let h = face_height_px.clamp(lo, hi);
    let d = poly_eval(&cal.coefficients, h);
    if d.is_nan() {
        return Err(Error::Numeric("distance polynomial produced NaN".into()));
    }
    Ok(d.clamp(MIN_DISTANCE_M, MAX_DISTANCE_M))
}

/// Position and heading of one person in the bird-view plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BirdViewPose {
    pub position: [f64; 2],
    pub facing_angle: f64,
}

impl BirdViewPose {
    pub fn wearer() -> Self {
        Self {
            position: [0.0, 0.0],
            facing_angle: FRAC_PI_2,
        }
    }

    /// Angle of the ray from this pose to `point`.
    pub fn bearing_to(&self, point: [f64; 2]) -> f64 {
        (point[1] - self.position[1]).atan2(point[0] - self.position[0])
    }
}

/// Gaze cone, approximated in the bird-view plane by its half angle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConeParams {
    pub half_angle: f64,
}

impl ConeParams {
    pub fn new(half_angle: f64) -> Result<Self> {
        if !(half_angle > 0.0 && half_angle < FRAC_PI_2) {
            return Err(Error::invalid(format!(
                "cone half angle must lie in (0, π/2), got {half_angle}"
            )));
        }
        Ok(Self { half_angle })
    }
}

impl Default for ConeParams {
    fn default() -> Self {
        Self { half_angle: PI / 6.0 }
    }
}

/// Camera intrinsics needed for bird-view placement.
///
/// `yaw_sign` flips the head-yaw convention: with `+1`, a positive yaw turns
/// the person's face counter-clockwise in the bird-view plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraModel {
    pub fov_h: f64,
    pub yaw_sign: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            fov_h: FRAC_PI_2,
            yaw_sign: 1.0,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.fov_h > 0.0 && self.fov_h < PI) {
            return Err(Error::invalid(format!("horizontal FOV must lie in (0, π), got {}", self.fov_h)));
        }
        if self.yaw_sign != 1.0 && self.yaw_sign != -1.0 {
            return Err(Error::invalid("yaw_sign must be +1 or -1"));
        }
        Ok(())
    }

    /// Angular offset of an image column from the optical axis, positive to the right.
    pub fn offset_angle(&self, image_x_norm: f64) -> f64 {
        (image_x_norm - 0.5) * self.fov_h
    }

    /// Places a person seen at `image_x_norm` and `distance_m` with head yaw `yaw`.
    ///
    /// With offset angle `φ`, the position is `(d sin φ, d cos φ)`. Yaw 0 means
    /// facing straight back at the camera, i.e. heading `-π/2 - φ`.
    pub fn pose(&self, image_x_norm: f64, distance_m: f64, yaw: f64) -> Result<BirdViewPose> {
        self.validate()?;
        if !(0.0..=1.0).contains(&image_x_norm) {
            return Err(Error::invalid(format!("image x {image_x_norm} outside [0, 1]")));
        }
        if !(distance_m > 0.0 && distance_m.is_finite()) {
            return Err(Error::invalid(format!("distance must be positive, got {distance_m}")));
        }
        if !yaw.is_finite() {
            return Err(Error::invalid("non-finite yaw"));
        }
        let phi = self.offset_angle(image_x_norm);
        Ok(BirdViewPose {
            position: [distance_m * phi.sin(), distance_m * phi.cos()],
            facing_angle: normalize_angle(-FRAC_PI_2 - phi + self.yaw_sign * yaw),
        })
    }

    /// Inverse of [`CameraModel::pose`] for the heading: the yaw that makes a
    /// person at `image_x_norm` face `facing_angle`.
    pub fn yaw_for_facing(&self, image_x_norm: f64, facing_angle: f64) -> f64 {
        let phi = self.offset_angle(image_x_norm);
        normalize_angle(self.yaw_sign * (facing_angle + FRAC_PI_2 + phi))
    }

    /// Image column at which a point at bird-view `position` appears.
    pub fn image_x_for(&self, position: [f64; 2]) -> f64 {
        let phi = position[0].atan2(position[1]);
        0.5 + phi / self.fov_h
    }
}

/// [`CameraModel::pose`] with the default yaw convention.
pub fn bird_view_pose(
    image_x_norm: f64,
    distance_m: f64,
    yaw_rad: f64,
    fov_h_rad: f64,
) -> Result<BirdViewPose> {
    CameraModel {
        fov_h: fov_h_rad,
        yaw_sign: 1.0,
    }
    .pose(image_x_norm, distance_m, yaw_rad)
}

pub fn pairwise_distance(a: &BirdViewPose, b: &BirdViewPose) -> f64 {
    (a.position[0] - b.position[0]).hypot(a.position[1] - b.position[1])
}

/// Whether `dst` falls inside the gaze cone of `src`.
pub fn is_looking_at(src: &BirdViewPose, dst: &BirdViewPose, cone: &ConeParams) -> Result<bool> {
    if src.position == dst.position {
        return Err(Error::invalid("is_looking_at: coincident positions"));
    }
    let offset = normalize_angle(src.bearing_to(dst.position) - src.facing_angle);
    Ok(offset.abs() <= cone.half_angle)
}
