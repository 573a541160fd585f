use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::corpus::Corpus;
use super::rle::encode_rle;
use super::schema::{CameraView, FrameRecord, ImageSize, InstanceRecord, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::fisheye::{warp_mask, CameraModel, Projection, ProjectionKind, WarpDirection};
use crate::geometry::{rasterize, Bounds, Point2, RasterFrame, Shape, SimplePolygon};
use crate::representations::ClassLabel;

/// Where objects are placed, as a band of angles off the optical axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Placement {
    /// The whole near-field ground band around the car.
    #[default]
    NearField,
    /// Close to the image center, where distortion is mild.
    Central,
    /// Toward the image rim.
    Peripheral,
}

impl Placement {
    /// Off-axis angle band in degrees.
    pub fn theta_range_deg(&self) -> (f64, f64) {
        match self {
            Placement::NearField => (5.0, 65.0),
            Placement::Central => (0.0, 20.0),
            Placement::Peripheral => (50.0, 65.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SceneSpec {
    pub seed: u64,
    /// Inclusive range of objects drawn per frame.
    pub object_count: (usize, usize),
    /// Share of objects drawn as L-shapes instead of the class outline.
    pub l_shape_fraction: f64,
    pub pedestrian_fraction: f64,
    pub placement: Placement,
    /// Focal length of the undistorted plane the shapes are drawn on.
    pub view_focal: f64,
    /// Full field of view of that plane, degrees.
    pub view_fov_deg: f64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            object_count: (3, 8),
            l_shape_fraction: 0.3,
            pedestrian_fraction: 0.4,
            placement: Placement::NearField,
            view_focal: 400.0,
            view_fov_deg: 150.0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.object_count;
        if lo > hi {
            return Err(Error::precondition(format!(
                "object count range {lo}..={hi} is empty"
            )));
        }
        for (name, v) in [
            ("l_shape_fraction", self.l_shape_fraction),
            ("pedestrian_fraction", self.pedestrian_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::precondition(format!("{name} {v} outside [0, 1]")));
            }
        }
        let (_, theta_hi) = self.placement.theta_range_deg();
        if !(self.view_fov_deg > 2.0 * theta_hi && self.view_fov_deg < 180.0) {
            return Err(Error::precondition(format!(
                "view field of view {} deg must exceed {} deg and stay below 180",
                self.view_fov_deg,
                2.0 * theta_hi
            )));
        }
        Ok(())
    }

    fn projection(&self) -> Result<Projection> {
        Projection::new(
            ProjectionKind::Rectilinear,
            self.view_focal,
            self.view_fov_deg,
            self.view_fov_deg,
        )
    }
}

/// A dropped or otherwise notable instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct GeneratorDiagnostic {
    pub frame_id: String,
    pub instance: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedFrame {
    pub record: FrameRecord,
    pub diagnostics: Vec<GeneratorDiagnostic>,
}

fn rotate_about(points: Vec<Point2>, center: Point2, angle_deg: f64) -> Vec<Point2> {
    let a = angle_deg.to_radians();
    points
        .into_iter()
        .map(|p| {
            let q = p.rotated(a);
            Point2::new(center.x + q.x, center.y + q.y)
        })
        .collect()
}

fn arc(points: &mut Vec<Point2>, c: Point2, r: f64, from_deg: f64, to_deg: f64, segments: usize) {
    for i in 0..=segments {
        let t = (from_deg + (to_deg - from_deg) * i as f64 / segments as f64).to_radians();
        points.push(Point2::new(c.x + r * t.cos(), c.y + r * t.sin()));
    }
}

/// Rectangle `length x width` with rounded corners, long side along
/// `angle_deg`.
pub(crate) fn rounded_rect(
    center: Point2,
    length: f64,
    width: f64,
    radius: f64,
    angle_deg: f64,
) -> Result<SimplePolygon> {
    let r = radius.min(0.5 * length.min(width));
    let (hx, hy) = (0.5 * length - r, 0.5 * width - r);
    let mut pts = Vec::new();
    arc(&mut pts, Point2::new(hx, hy), r, 0.0, 90.0, 6);
    arc(&mut pts, Point2::new(-hx, hy), r, 90.0, 180.0, 6);
    arc(&mut pts, Point2::new(-hx, -hy), r, 180.0, 270.0, 6);
    arc(&mut pts, Point2::new(hx, -hy), r, 270.0, 360.0, 6);
    pts.dedup_by(|a, b| a.distance(*b) < 1e-9);
    SimplePolygon::new(rotate_about(pts, center, angle_deg))
}

/// Stadium: a `length x width` rectangle with semicircular ends.
pub(crate) fn capsule(
    center: Point2,
    length: f64,
    width: f64,
    angle_deg: f64,
) -> Result<SimplePolygon> {
    rounded_rect(center, length, width, 0.5 * width, angle_deg)
}

/// L outline inside a `length x width` box with arms `arm` thick.
pub(crate) fn l_shape(
    center: Point2,
    length: f64,
    width: f64,
    arm: f64,
    angle_deg: f64,
) -> Result<SimplePolygon> {
    let (x0, y0) = (-0.5 * length, -0.5 * width);
    let pts = vec![
        Point2::new(x0, y0),
        Point2::new(x0 + length, y0),
        Point2::new(x0 + length, y0 + arm),
        Point2::new(x0 + arm, y0 + arm),
        Point2::new(x0 + arm, y0 + width),
        Point2::new(x0, y0 + width),
    ];
    SimplePolygon::new(rotate_about(pts, center, angle_deg))
}

struct DrawnObject {
    class: ClassLabel,
    outline: SimplePolygon,
}

/// Draws one object on the undistorted plane. Every draw consumes the same
/// number of random values whatever the placement, so with one object per
/// frame two specs differing only in placement produce the same shapes at
/// different positions.
fn draw_object(rng: &mut ChaCha8Rng, spec: &SceneSpec, proj: &Projection) -> Result<DrawnObject> {
    let pedestrian = rng.random::<f64>() < spec.pedestrian_fraction;
    let u: f64 = rng.random();
    let phi = rng.random::<f64>() * std::f64::consts::TAU;
    let angle = rng.random::<f64>() * 180.0;
    let size: f64 = rng.random();
    let aspect: f64 = rng.random();
    let l_draw: f64 = rng.random();
    let l_width: f64 = rng.random();
    let l_arm: f64 = rng.random();

    let (lo, hi) = spec.placement.theta_range_deg();
    let theta = (lo + u * (hi - lo)).to_radians();
    let f = proj.focal;
    let center = Point2::new(
        0.5 * proj.width as f64 + f * theta.tan() * phi.cos(),
        0.5 * proj.height as f64 + f * theta.tan() * phi.sin(),
    );
    // objects off axis sit farther from the lens along the ray
    let scale = 1.0 / theta.cos();
    let class = if pedestrian {
        ClassLabel::Pedestrian
    } else {
        ClassLabel::Vehicle
    };
    let (length, width) = if pedestrian {
        let l = 60.0 + 50.0 * size;
        (l, l * (0.35 + 0.15 * aspect))
    } else {
        let l = 140.0 + 120.0 * size;
        (l, l * (0.42 + 0.13 * aspect))
    };
    let (length, width) = (length * scale, width * scale);
    let outline = if l_draw < spec.l_shape_fraction {
        let w = length * (0.6 + 0.3 * l_width);
        l_shape(center, length, w, w * (0.3 + 0.15 * l_arm), angle)?
    } else if pedestrian {
        capsule(center, length, width, angle)?
    } else {
        rounded_rect(center, length, width, 0.15 * width, angle)?
    };
    Ok(DrawnObject { class, outline })
}

/// Rasterizes a view-plane outline and distorts it into the fisheye image.
pub(crate) fn distort_outline(
    outline: &SimplePolygon,
    proj: &Projection,
    cam: &CameraModel,
) -> Result<crate::geometry::RasterGrid> {
    let view = rasterize(
        &Shape::Polygon(outline),
        &RasterFrame::pixels(proj.width, proj.height)?,
    )?;
    warp_mask(&view, cam, proj, WarpDirection::Distort)
}

/// Draws per object before giving up on finding free space.
const PLACEMENT_ATTEMPTS: usize = 20;

/// Objects keep this many view pixels between their bounding boxes, so their
/// masks never touch.
const PLACEMENT_GAP: f64 = 2.0;

fn apart(a: &Bounds, b: &Bounds) -> bool {
    a.max_x + PLACEMENT_GAP < b.min_x
        || b.max_x + PLACEMENT_GAP < a.min_x
        || a.max_y + PLACEMENT_GAP < b.min_y
        || b.max_y + PLACEMENT_GAP < a.min_y
}

fn generate_frame(
    spec: &SceneSpec,
    cam: &CameraModel,
    frame_id: &str,
    camera: CameraView,
) -> Result<GeneratedFrame> {
    spec.validate()?;
    let proj = spec.projection()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.object_count;
    let count = rng.random_range(lo..=hi);
    let mut instances = Vec::with_capacity(count);
    let mut diagnostics = Vec::new();
    let mut taken: Vec<Bounds> = Vec::with_capacity(count);
    for id in 0..count as u32 {
        let mut placed = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let obj = draw_object(&mut rng, spec, &proj)?;
            let b = obj.outline.bounds();
            if taken.iter().all(|t| apart(t, &b)) {
                taken.push(b);
                placed = Some(obj);
                break;
            }
        }
        let Some(obj) = placed else {
            log::warn!("frame {frame_id}: no free spot for instance {id}, dropped");
            diagnostics.push(GeneratorDiagnostic {
                frame_id: frame_id.to_string(),
                instance: id,
                message: "no free placement; dropped".into(),
            });
            continue;
        };
        let mask = distort_outline(&obj.outline, &proj, cam)?;
        if mask.is_empty() {
            log::warn!("frame {frame_id}: instance {id} has no pixel after warping, dropped");
            diagnostics.push(GeneratorDiagnostic {
                frame_id: frame_id.to_string(),
                instance: id,
                message: "zero area after warping; dropped".into(),
            });
            continue;
        }
        instances.push(InstanceRecord {
            id,
            class: obj.class,
            rle: encode_rle(&mask),
        });
    }
    Ok(GeneratedFrame {
        record: FrameRecord {
            schema_version: SCHEMA_VERSION,
            frame_id: frame_id.to_string(),
            camera,
            image_size: ImageSize {
                width: cam.width(),
                height: cam.height(),
            },
            instances,
            detections: None,
        },
        diagnostics,
    })
}

/// One frame drawn from `spec.seed`.
pub fn generate_scene(spec: &SceneSpec, cam: &CameraModel) -> Result<GeneratedFrame> {
    generate_frame(spec, cam, "000000", CameraView::FV)
}

/// `frames` frames; frame `i` uses seed `spec.seed ^ i` and cycles through
/// the four camera positions.
pub fn generate_corpus(
    spec: &SceneSpec,
    cam: &CameraModel,
    frames: usize,
) -> Result<(Corpus, Vec<GeneratorDiagnostic>)> {
    spec.validate()?;
    let generated: Vec<GeneratedFrame> = (0..frames)
        .into_par_iter()
        .map(|i| {
            let frame_spec = SceneSpec {
                seed: spec.seed ^ i as u64,
                ..*spec
            };
            generate_frame(&frame_spec, cam, &format!("{i:06}"), CameraView::ALL[i % 4])
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(frames);
    let mut diagnostics = Vec::new();
    for g in generated {
        records.push(g.record);
        diagnostics.extend(g.diagnostics);
    }
    Ok((
        Corpus::new(records, Some(cam.clone()), Some(spec.seed))?,
        diagnostics,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::to_canonical_json;

    #[test]
    fn deterministic() {
        let spec = SceneSpec {
            seed: 42,
            ..SceneSpec::default()
        };
        let cam = CameraModel::default();
        let a = generate_scene(&spec, &cam).unwrap();
        let b = generate_scene(&spec, &cam).unwrap();
        assert_eq!(
            to_canonical_json(&a.record).unwrap(),
            to_canonical_json(&b.record).unwrap()
        );
    }

    #[test]
    fn fixed_count() {
        let spec = SceneSpec {
            seed: 5,
            object_count: (3, 3),
            ..SceneSpec::default()
        };
        let g = generate_scene(&spec, &CameraModel::default()).unwrap();
        assert_eq!(g.record.instances.len() + g.diagnostics.len(), 3);
    }

    #[test]
    fn instances_do_not_overlap() {
        let spec = SceneSpec {
            seed: 11,
            object_count: (8, 8),
            ..SceneSpec::default()
        };
        let g = generate_scene(&spec, &CameraModel::default()).unwrap();
        let masks = g.record.instance_masks().unwrap();
        for (i, a) in masks.iter().enumerate() {
            for b in &masks[i + 1..] {
                assert_eq!(a.grid().intersection_count(b.grid()).unwrap(), 0);
            }
        }
    }

    #[test]
    fn shapes_are_valid() {
        let c = Point2::new(50.0, 40.0);
        let r = rounded_rect(c, 40.0, 20.0, 3.0, 30.0).unwrap();
        assert!(r.is_convex());
        assert!((r.area() - (800.0 - (4.0 - std::f64::consts::PI) * 9.0)).abs() < 1.0);
        let cap = capsule(c, 40.0, 20.0, 0.0).unwrap();
        // the two end caps together form an inscribed 24-gon of radius 10
        let caps = 12.0 * 100.0 * 15f64.to_radians().sin();
        assert!((cap.area() - (20.0 * 20.0 + caps)).abs() < 1e-9);
        let l = l_shape(c, 30.0, 20.0, 5.0, 10.0).unwrap();
        assert!(!l.is_convex());
        assert!((l.area() - (30.0 * 5.0 + 15.0 * 5.0)).abs() < 1e-9);
    }

    #[test]
    fn invalid_spec() {
        let spec = SceneSpec {
            object_count: (4, 2),
            ..SceneSpec::default()
        };
        assert!(generate_scene(&spec, &CameraModel::default()).is_err());
        let spec = SceneSpec {
            view_fov_deg: 100.0,
            ..SceneSpec::default()
        };
        assert!(spec.validate().is_err());
    }
}
