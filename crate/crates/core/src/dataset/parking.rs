use serde::{Deserialize, Serialize};

use super::generator::{distort_outline, rounded_rect};
use super::rle::encode_rle;
use super::schema::{CameraView, FrameRecord, ImageSize, InstanceRecord, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::fisheye::{CameraModel, Projection, ProjectionKind};
use crate::geometry::{Point2, SimplePolygon};
use crate::representations::{ClassLabel, InstanceMask};

/// Two parked cars with a free bay between them, laid out on the
/// undistorted plane. The row of bays runs across the line of sight at
/// `theta_deg` off axis and azimuth `phi_deg`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ParkingLayout {
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub car_length: f64,
    pub car_width: f64,
    /// Distance between the bay center and each car center along the row.
    pub pitch: f64,
    /// Clearance between the free region and each car's side.
    pub margin: f64,
    pub view_focal: f64,
    pub view_fov_deg: f64,
}

impl Default for ParkingLayout {
    fn default() -> Self {
        Self {
            theta_deg: 40.0,
            phi_deg: 45.0,
            car_length: 150.0,
            car_width: 60.0,
            pitch: 130.0,
            margin: 30.0,
            view_focal: 400.0,
            view_fov_deg: 150.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParkingScene {
    pub cars: Vec<InstanceMask>,
    /// The free bay in fisheye pixels.
    pub gap: SimplePolygon,
    pub record: FrameRecord,
}

/// Builds the flanking-cars scene and distorts it into the fisheye image.
pub fn parking_scene(layout: &ParkingLayout, cam: &CameraModel) -> Result<ParkingScene> {
    let proj = Projection::new(
        ProjectionKind::Rectilinear,
        layout.view_focal,
        layout.view_fov_deg,
        layout.view_fov_deg,
    )?;
    let half_gap = layout.pitch - 0.5 * layout.car_width - layout.margin;
    if !(half_gap > 0.0) {
        return Err(Error::precondition("cars leave no free bay between them"));
    }
    let (theta, phi) = (layout.theta_deg.to_radians(), layout.phi_deg.to_radians());
    let f = proj.focal;
    let c = Point2::new(
        0.5 * proj.width as f64 + f * theta.tan() * phi.cos(),
        0.5 * proj.height as f64 + f * theta.tan() * phi.sin(),
    );
    // row direction: tangential; cars point along the radial direction
    let row = Point2::new(-phi.sin(), phi.cos());
    let radial = Point2::new(phi.cos(), phi.sin());
    let car_angle = layout.phi_deg;

    let mut cars = Vec::new();
    let mut instances = Vec::new();
    for (id, side) in [-1.0, 1.0].into_iter().enumerate() {
        let center = Point2::new(
            c.x + side * layout.pitch * row.x,
            c.y + side * layout.pitch * row.y,
        );
        let outline = rounded_rect(
            center,
            layout.car_length,
            layout.car_width,
            0.15 * layout.car_width,
            car_angle,
        )?;
        let grid = distort_outline(&outline, &proj, cam)?;
        let mask = InstanceMask::new(grid, ClassLabel::Vehicle)
            .map_err(|_| Error::degenerate("parked car falls outside the fisheye image"))?;
        instances.push(InstanceRecord {
            id: id as u32,
            class: ClassLabel::Vehicle,
            rle: encode_rle(mask.grid()),
        });
        cars.push(mask);
    }

    let half_len = 0.5 * layout.car_length;
    let corner = |a: f64, b: f64| {
        Point2::new(
            c.x + a * row.x + b * radial.x,
            c.y + a * row.y + b * radial.y,
        )
    };
    let corners = [
        corner(-half_gap, -half_len),
        corner(half_gap, -half_len),
        corner(half_gap, half_len),
        corner(-half_gap, half_len),
    ];
    // straight edges on the plane bend in the fisheye; sample them densely
    const EDGE_SAMPLES: usize = 32;
    let mut gap = Vec::with_capacity(4 * EDGE_SAMPLES);
    for i in 0..4 {
        let (p, q) = (corners[i], corners[(i + 1) % 4]);
        for k in 0..EDGE_SAMPLES {
            let t = k as f64 / EDGE_SAMPLES as f64;
            let v = Point2::new(p.x + t * (q.x - p.x), p.y + t * (q.y - p.y));
            let ray = proj
                .view_to_ray(v)
                .ok_or_else(|| Error::degenerate("bay outside the view"))?;
            let img = cam
                .project_ray(ray)?
                .ok_or_else(|| Error::degenerate("bay outside the fisheye field of view"))?;
            gap.push(img);
        }
    }
    let gap = SimplePolygon::new(gap)?;
    Ok(ParkingScene {
        cars,
        gap,
        record: FrameRecord {
            schema_version: SCHEMA_VERSION,
            frame_id: "parking".into(),
            camera: CameraView::FV,
            image_size: ImageSize {
                width: cam.width(),
                height: cam.height(),
            },
            instances,
            detections: None,
        },
    })
}
