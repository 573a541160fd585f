use serde::{Deserialize, Serialize};

use super::{normalize, Ray};
use crate::error::{Error, Result};
use crate::geometry::Point2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum ProjectionKind {
    Rectilinear,
    Cylindrical,
    /// Tangent planes side by side, each covering an equal share of the
    /// horizontal field of view. Rays go to the facet nearest in azimuth,
    /// so the seams are hard.
    PiecewiseLinear {
        facets: usize,
    },
}

/// A corrected view: its pixel grid and the ray through each pixel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Projection {
    pub kind: ProjectionKind,
    pub focal: f64,
    /// Full horizontal field of view, radians.
    pub h_fov: f64,
    /// Full vertical field of view, radians.
    pub v_fov: f64,
    pub width: usize,
    pub height: usize,
}

impl Projection {
    /// View covering `h_fov_deg` x `v_fov_deg` (full angles) at `focal`
    /// pixels per unit tangent. A single tangent plane cannot reach 180 deg.
    pub fn new(kind: ProjectionKind, focal: f64, h_fov_deg: f64, v_fov_deg: f64) -> Result<Self> {
        if !(focal > 0.0 && focal.is_finite()) {
            return Err(Error::precondition(
                "projection focal length must be positive",
            ));
        }
        if !(h_fov_deg > 0.0 && v_fov_deg > 0.0 && h_fov_deg <= 360.0) {
            return Err(Error::precondition(
                "projection field of view must be positive",
            ));
        }
        if v_fov_deg >= 180.0 {
            return Err(Error::LossOfFov(format!(
                "vertical field of view {v_fov_deg} deg needs an infinite image plane"
            )));
        }
        let (h, v) = (h_fov_deg.to_radians(), v_fov_deg.to_radians());
        let height = 2.0 * focal * (0.5 * v).tan();
        let width = match kind {
            ProjectionKind::Rectilinear => {
                if h_fov_deg >= 180.0 {
                    return Err(Error::LossOfFov(format!(
                        "rectilinear view cannot cover {h_fov_deg} deg horizontally"
                    )));
                }
                2.0 * focal * (0.5 * h).tan()
            }
            ProjectionKind::Cylindrical => focal * h,
            ProjectionKind::PiecewiseLinear { facets } => {
                if facets < 2 {
                    return Err(Error::precondition(
                        "piecewise projection needs at least 2 facets",
                    ));
                }
                let share = h / facets as f64;
                if share >= std::f64::consts::PI {
                    return Err(Error::LossOfFov("facet wider than 180 deg".into()));
                }
                facets as f64 * 2.0 * focal * (0.5 * share).tan()
            }
        };
        let (w, hh) = (width.ceil(), height.ceil());
        if !(w.is_finite() && hh.is_finite()) || w * hh > 1e9 {
            return Err(Error::NumericRange(format!(
                "projection view of {w} x {hh} pixels is too large"
            )));
        }
        Ok(Self {
            kind,
            focal,
            h_fov: h,
            v_fov: v,
            width: (w as usize).max(1),
            height: (hh as usize).max(1),
        })
    }

    fn center(&self) -> Point2 {
        Point2::new(0.5 * self.width as f64, 0.5 * self.height as f64)
    }

    fn facet_geometry(&self, facets: usize) -> (f64, f64) {
        let share = self.h_fov / facets as f64;
        let facet_width = self.width as f64 / facets as f64;
        (share, facet_width)
    }

    /// Ray through a view point, or `None` for points no ray reaches.
    pub fn view_to_ray(&self, p: Point2) -> Option<Ray> {
        let c = self.center();
        let f = self.focal;
        let v = (p.y - c.y) / f;
        match self.kind {
            ProjectionKind::Rectilinear => Some([(p.x - c.x) / f, v, 1.0]),
            ProjectionKind::Cylindrical => {
                let phi = (p.x - c.x) / f;
                if phi.abs() > std::f64::consts::PI {
                    return None;
                }
                Some([phi.sin(), v, phi.cos()])
            }
            ProjectionKind::PiecewiseLinear { facets } => {
                let (share, fw) = self.facet_geometry(facets);
                let j = ((p.x / fw).floor() as i64).clamp(0, facets as i64 - 1) as usize;
                let yaw = -0.5 * self.h_fov + (j as f64 + 0.5) * share;
                let local_x = (p.x - (j as f64 + 0.5) * fw) / f;
                let (s, co) = yaw.sin_cos();
                Some([local_x * co + s, v, -local_x * s + co])
            }
        }
    }

    /// View point of a ray, or `None` when the ray cannot be shown.
    pub fn ray_to_view(&self, ray: Ray) -> Option<Point2> {
        let [x, y, z] = normalize(ray).ok()?;
        let c = self.center();
        let f = self.focal;
        match self.kind {
            ProjectionKind::Rectilinear => {
                if z <= 0.0 {
                    return None;
                }
                Some(Point2::new(c.x + f * x / z, c.y + f * y / z))
            }
            ProjectionKind::Cylindrical => {
                let horizontal = x.hypot(z);
                if horizontal == 0.0 {
                    return None;
                }
                Some(Point2::new(c.x + f * x.atan2(z), c.y + f * y / horizontal))
            }
            ProjectionKind::PiecewiseLinear { facets } => {
                let (share, fw) = self.facet_geometry(facets);
                let azimuth = x.atan2(z);
                let j = (((azimuth + 0.5 * self.h_fov) / share).floor() as i64)
                    .clamp(0, facets as i64 - 1) as usize;
                let yaw = -0.5 * self.h_fov + (j as f64 + 0.5) * share;
                let (s, co) = yaw.sin_cos();
                let lx = x * co - z * s;
                let lz = x * s + z * co;
                if lz <= 0.0 {
                    return None;
                }
                Some(Point2::new(
                    (j as f64 + 0.5) * fw + f * lx / lz,
                    c.y + f * y / lz,
                ))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisheye::CameraModel;

    #[test]
    fn rectilinear_needs_less_than_180() {
        assert!(matches!(
            Projection::new(ProjectionKind::Rectilinear, 300.0, 180.0, 90.0),
            Err(Error::LossOfFov(_))
        ));
        assert!(Projection::new(ProjectionKind::Cylindrical, 300.0, 190.0, 90.0).is_ok());
        assert!(Projection::new(
            ProjectionKind::PiecewiseLinear { facets: 3 },
            300.0,
            190.0,
            90.0
        )
        .is_ok());
        assert!(Projection::new(
            ProjectionKind::PiecewiseLinear { facets: 1 },
            300.0,
            90.0,
            90.0
        )
        .is_err());
    }

    #[test]
    fn view_round_trips() {
        for kind in [
            ProjectionKind::Rectilinear,
            ProjectionKind::Cylindrical,
            ProjectionKind::PiecewiseLinear { facets: 3 },
        ] {
            let proj = Projection::new(kind, 250.0, 120.0, 90.0).unwrap();
            for (u, v) in [
                (10.3, 20.0),
                (0.5 * proj.width as f64, 0.5 * proj.height as f64),
                (proj.width as f64 - 3.0, 5.0),
            ] {
                let p = Point2::new(u, v);
                let ray = proj.view_to_ray(p).unwrap();
                let back = proj.ray_to_view(ray).unwrap();
                assert!(p.distance(back) < 1e-9, "{kind:?}: {p:?} -> {back:?}");
            }
        }
    }

    #[test]
    fn cylindrical_keeps_verticals_straight() {
        // A vertical world line seen by the fisheye, then corrected.
        let cam = CameraModel::default();
        let proj = Projection::new(ProjectionKind::Cylindrical, 300.0, 170.0, 120.0).unwrap();
        for x in [0.0, 1.5, -4.0] {
            let us: Vec<f64> = (-20..=20)
                .map(|i| {
                    let ray = [x, i as f64 * 0.2, 3.0];
                    let img = cam.project_ray(ray).unwrap().unwrap();
                    let back = cam.unproject_point(img).unwrap();
                    proj.ray_to_view(back).unwrap().x
                })
                .collect();
            let spread = us.iter().cloned().fold(f64::MIN, f64::max)
                - us.iter().cloned().fold(f64::MAX, f64::min);
            assert!(spread <= 0.5, "x = {x}: spread {spread}");
        }
    }

    #[test]
    fn piecewise_seam_is_hard() {
        // A straight horizontal world line stays straight within each facet
        // but kinks at the seam between them.
        let proj = Projection::new(
            ProjectionKind::PiecewiseLinear { facets: 2 },
            200.0,
            150.0,
            60.0,
        )
        .unwrap();
        let seam = 0.5 * proj.width as f64;
        let pts: Vec<Point2> = (-30..=30)
            .map(|i| proj.ray_to_view([i as f64 * 0.1, -1.0, 2.0]).unwrap())
            .collect();
        let slope = |a: Point2, b: Point2| (b.y - a.y) / (b.x - a.x);
        let left: Vec<&Point2> = pts.iter().filter(|p| p.x < seam).collect();
        let right: Vec<&Point2> = pts.iter().filter(|p| p.x > seam).collect();
        let sl = slope(*left[0], **left.last().unwrap());
        let sr = slope(*right[0], **right.last().unwrap());
        for w in left.windows(2) {
            assert!((slope(*w[0], *w[1]) - sl).abs() < 1e-9);
        }
        assert!((sl + sr).abs() < 1e-9);
        assert!(sl.abs() > 0.05, "no kink: {sl}");
    }
}
