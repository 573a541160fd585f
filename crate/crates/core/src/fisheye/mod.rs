//! Radial polynomial fisheye camera, correction projections and mask warping.
//!
//! Camera frame: `x` right, `y` down, `z` along the optical axis. An image
//! point at radius `r(θ) = k1 θ + k2 θ² + k3 θ³ + k4 θ⁴` from the principal
//! point corresponds to a ray at angle `θ` from the axis.

mod projection;
mod warp;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point2;

pub use projection::{Projection, ProjectionKind};
pub use warp::{warp_mask, WarpDirection};

/// Samples used to check that `r(θ)` is increasing.
const MONOTONICITY_SAMPLES: usize = 10_000;

/// A 3D direction in the camera frame.
pub type Ray = [f64; 3];

pub(crate) fn normalize(ray: Ray) -> Result<Ray> {
    let n = (ray[0] * ray[0] + ray[1] * ray[1] + ray[2] * ray[2]).sqrt();
    if !(n > 0.0 && n.is_finite()) {
        return Err(Error::precondition("ray must have non-zero finite length"));
    }
    Ok([ray[0] / n, ray[1] / n, ray[2] / n])
}

/// Angle between two directions, radians.
pub fn angle_between(a: Ray, b: Ray) -> Result<f64> {
    let (a, b) = (normalize(a)?, normalize(b)?);
    let cross = [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ];
    let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
    let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    Ok(sin.atan2(cos))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawCamera", into = "RawCamera")]
pub struct CameraModel {
    k: [f64; 4],
    principal_point: Point2,
    width: usize,
    height: usize,
    theta_max: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub(crate) struct RawCamera {
    pub k: [f64; 4],
    pub principal_point: Point2,
    pub width: usize,
    pub height: usize,
    /// Degrees.
    pub theta_max_deg: f64,
}

impl TryFrom<RawCamera> for CameraModel {
    type Error = Error;
    fn try_from(r: RawCamera) -> Result<Self> {
        CameraModel::new(
            r.k,
            r.principal_point,
            r.width,
            r.height,
            r.theta_max_deg.to_radians(),
        )
    }
}

impl From<CameraModel> for RawCamera {
    fn from(c: CameraModel) -> Self {
        RawCamera {
            k: c.k,
            principal_point: c.principal_point,
            width: c.width,
            height: c.height,
            theta_max_deg: c.theta_max.to_degrees(),
        }
    }
}

impl Default for CameraModel {
    /// Synthetic intrinsics: 1280x960, principal point at the center,
    /// 95 deg half field of view, `k = (400, 0, -20, 0)`.
    fn default() -> Self {
        CameraModel::new(
            [400.0, 0.0, -20.0, 0.0],
            Point2::new(640.0, 480.0),
            1280,
            960,
            95f64.to_radians(),
        )
        .expect("default intrinsics are valid")
    }
}

impl CameraModel {
    /// `theta_max` in radians. Fails unless `k1 > 0` and `r` is strictly
    /// increasing on `(0, theta_max]`.
    pub fn new(
        k: [f64; 4],
        principal_point: Point2,
        width: usize,
        height: usize,
        theta_max: f64,
    ) -> Result<Self> {
        if k.iter().any(|v| !v.is_finite()) || !principal_point.is_finite() {
            return Err(Error::precondition("camera coefficients must be finite"));
        }
        if k[0] <= 0.0 {
            return Err(Error::precondition(format!(
                "k1 must be positive, got {}",
                k[0]
            )));
        }
        if width == 0 || height == 0 {
            return Err(Error::precondition("camera image must be at least 1x1"));
        }
        if !(theta_max > 0.0 && theta_max <= std::f64::consts::PI) {
            return Err(Error::precondition(format!(
                "theta_max {theta_max} rad outside (0, pi]"
            )));
        }
        let cam = Self {
            k,
            principal_point,
            width,
            height,
            theta_max,
        };
        let mut prev = 0.0;
        for i in 1..=MONOTONICITY_SAMPLES {
            let t = theta_max * i as f64 / MONOTONICITY_SAMPLES as f64;
            let r = cam.radius(t);
            if r <= prev {
                return Err(Error::precondition(format!(
                    "radial polynomial is not increasing near theta = {t:.4} rad"
                )));
            }
            prev = r;
        }
        Ok(cam)
    }

    pub fn coefficients(&self) -> [f64; 4] {
        self.k
    }

    pub fn principal_point(&self) -> Point2 {
        self.principal_point
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Field-of-view half-angle, radians.
    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    /// Image radius at angle `theta` from the axis.
    pub fn radius(&self, theta: f64) -> f64 {
        let [k1, k2, k3, k4] = self.k;
        theta * (k1 + theta * (k2 + theta * (k3 + theta * k4)))
    }

    fn radius_derivative(&self, theta: f64) -> f64 {
        let [k1, k2, k3, k4] = self.k;
        k1 + theta * (2.0 * k2 + theta * (3.0 * k3 + theta * 4.0 * k4))
    }

    pub fn max_radius(&self) -> f64 {
        self.radius(self.theta_max)
    }

    /// Inverse of [`radius`](Self::radius) on `[0, r(theta_max)]`: Newton
    /// steps kept inside a shrinking bracket, bisecting when a step leaves it.
    pub fn theta_for_radius(&self, rho: f64) -> Result<f64> {
        if !(rho >= 0.0) {
            return Err(Error::precondition("radius must be non-negative"));
        }
        if rho > self.max_radius() {
            return Err(Error::precondition(format!(
                "radius {rho} beyond the field of view ({})",
                self.max_radius()
            )));
        }
        if rho == 0.0 {
            return Ok(0.0);
        }
        let (mut lo, mut hi) = (0.0, self.theta_max);
        let mut t = (rho / self.k[0]).min(hi);
        for _ in 0..200 {
            let f = self.radius(t) - rho;
            if f == 0.0 {
                return Ok(t);
            }
            if f < 0.0 {
                lo = t;
            } else {
                hi = t;
            }
            let d = self.radius_derivative(t);
            let newton = t - f / d;
            let next = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - t).abs() <= 1e-15 * t.max(1.0) || hi - lo <= 1e-15 {
                return Ok(next);
            }
            t = next;
        }
        Ok(t)
    }

    /// Image point of a ray, or `None` when it lies beyond `theta_max`.
    pub fn project_ray(&self, ray: Ray) -> Result<Option<Point2>> {
        let [x, y, z] = normalize(ray)?;
        let planar = x.hypot(y);
        let theta = planar.atan2(z);
        if theta > self.theta_max {
            return Ok(None);
        }
        if planar == 0.0 {
            return Ok(Some(self.principal_point));
        }
        let r = self.radius(theta);
        Ok(Some(
            self.principal_point + Point2::new(x / planar, y / planar) * r,
        ))
    }

    /// Unit ray of an image point.
    pub fn unproject_point(&self, p: Point2) -> Result<Ray> {
        let d = p - self.principal_point;
        let rho = d.norm();
        if rho > self.max_radius() || !rho.is_finite() {
            return Err(Error::OutOfFov { x: p.x, y: p.y });
        }
        if rho == 0.0 {
            return Ok([0.0, 0.0, 1.0]);
        }
        let theta = self.theta_for_radius(rho)?;
        let s = theta.sin();
        Ok([s * d.x / rho, s * d.y / rho, theta.cos()])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn linear(k1: f64) -> CameraModel {
        CameraModel::new(
            [k1, 0.0, 0.0, 0.0],
            Point2::new(320.0, 240.0),
            640,
            480,
            95f64.to_radians(),
        )
        .unwrap()
    }

    fn random_ray(rng: &mut ChaCha8Rng, theta_max: f64) -> Ray {
        let t = rng.random_range(0.0..theta_max);
        let phi = rng.random_range(0.0..std::f64::consts::TAU);
        [t.sin() * phi.cos(), t.sin() * phi.sin(), t.cos()]
    }

    #[test]
    fn on_axis_hits_principal_point() {
        let cam = CameraModel::default();
        assert_eq!(
            cam.project_ray([0.0, 0.0, 2.0]).unwrap(),
            Some(Point2::new(640.0, 480.0))
        );
        assert_eq!(
            cam.unproject_point(Point2::new(640.0, 480.0)).unwrap(),
            [0.0, 0.0, 1.0]
        );
    }

    #[test]
    fn linear_model_example() {
        let cam = linear(500.0);
        let t = 0.1f64;
        let p = cam.project_ray([t.sin(), 0.0, t.cos()]).unwrap().unwrap();
        assert!((p.x - 370.0).abs() < 1e-9 && (p.y - 240.0).abs() < 1e-12);
    }

    #[test]
    fn beyond_fov_is_outside() {
        let cam = CameraModel::default();
        let t = cam.theta_max() + 1e-6;
        assert_eq!(cam.project_ray([t.sin(), 0.0, t.cos()]).unwrap(), None);
        assert!(cam.project_ray([0.0, 0.0, 0.0]).is_err());
        let far = Point2::new(640.0 + cam.max_radius() + 1.0, 480.0);
        assert!(matches!(
            cam.unproject_point(far),
            Err(Error::OutOfFov { .. })
        ));
    }

    #[test]
    fn non_monotone_rejected() {
        let err = CameraModel::new(
            [400.0, 0.0, -200.0, 0.0],
            Point2::new(0.0, 0.0),
            10,
            10,
            1.6,
        );
        assert!(err.is_err());
        assert!(
            CameraModel::new([0.0, 1.0, 0.0, 0.0], Point2::new(0.0, 0.0), 10, 10, 1.0).is_err()
        );
    }

    #[test]
    fn pure_k1_inverse_is_closed_form() {
        let cam = linear(437.0);
        for rho in [0.1, 1.0, 77.7, 300.0, 600.0] {
            let t = cam.theta_for_radius(rho).unwrap();
            assert!((t - rho / 437.0).abs() <= 1e-12, "{rho}: {t}");
        }
    }

    #[test]
    fn round_trips() {
        let cam = CameraModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let ray = random_ray(&mut rng, cam.theta_max());
            let p = cam.project_ray(ray).unwrap().unwrap();
            let back = cam.unproject_point(p).unwrap();
            assert!(angle_between(ray, back).unwrap() <= 1e-8);
            let p2 = cam.project_ray(back).unwrap().unwrap();
            assert!(p.distance(p2) <= 1e-6);
        }
    }

    #[test]
    fn rotation_about_axis() {
        let cam = CameraModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let ray = random_ray(&mut rng, cam.theta_max());
            let phi: f64 = rng.random_range(-3.0..3.0);
            let (s, c) = phi.sin_cos();
            let rotated = [c * ray[0] - s * ray[1], s * ray[0] + c * ray[1], ray[2]];
            let pp = cam.principal_point();
            let a = cam.project_ray(ray).unwrap().unwrap();
            let b = cam.project_ray(rotated).unwrap().unwrap();
            let expected = pp + (a - pp).rotated(phi);
            assert!(b.distance(expected) <= 1e-9);
        }
    }

    #[test]
    fn json_round_trip() {
        let cam = CameraModel::default();
        let s = serde_json::to_string(&cam).unwrap();
        let back: CameraModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back.coefficients(), cam.coefficients());
        assert!((back.theta_max() - cam.theta_max()).abs() < 1e-15);
    }
}
