//! The four detection output geometries and the instance mask they are
//! measured against.
//!
//! Polar polygons use the dense one-parameter form: radius `k` is taken along
//! the fixed direction `k * 360 / R` degrees. The sparse three-parameter
//! variant (radius, angle and an extra parameter per vertex) is not supported.

pub(crate) mod convert;
mod iou;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{canonical_axes, check_angle};
use crate::geometry::{Bounds, Point2, RasterGrid, SimplePolygon};

pub use crate::geometry::Ellipse;
pub use convert::{
    convert_mask, mask_to_bounding_box, mask_to_ellipse, mask_to_oriented_box,
    mask_to_polar_polygon, PolarFit,
};
pub(crate) use iou::{rasterize_representation, rectangle};
pub use iou::{representation_iou, IouConfig, Region};

/// Polar sampling densities used for the upper-bound table.
pub const DEFAULT_POINT_COUNTS: [usize; 5] = [12, 24, 36, 60, 120];

/// Default number of segments when an ellipse is turned into a polygon.
pub const DEFAULT_ARC_SEGMENTS: usize = 64;

/// Object classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassLabel {
    Vehicle,
    Pedestrian,
}

impl ClassLabel {
    pub const ALL: [ClassLabel; 2] = [ClassLabel::Vehicle, ClassLabel::Pedestrian];

    pub fn as_str(&self) -> &'static str {
        match self {
            ClassLabel::Vehicle => "vehicle",
            ClassLabel::Pedestrian => "pedestrian",
        }
    }
}

impl fmt::Display for ClassLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassLabel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vehicle" => Ok(ClassLabel::Vehicle),
            "pedestrian" => Ok(ClassLabel::Pedestrian),
            other => Err(Error::Format(format!("unknown class label `{other}`"))),
        }
    }
}

/// Axis-aligned box given by center and size.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BoundingBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BoundingBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::precondition("box center must be finite"));
        }
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::precondition(format!(
                "box size must be positive, got {w} x {h}"
            )));
        }
        Ok(Self { cx, cy, w, h })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn bounds(&self) -> Bounds {
        Bounds {
            min_x: self.cx - 0.5 * self.w,
            min_y: self.cy - 0.5 * self.h,
            max_x: self.cx + 0.5 * self.w,
            max_y: self.cy + 0.5 * self.h,
        }
    }

    pub fn to_polygon(&self) -> SimplePolygon {
        let b = self.bounds();
        SimplePolygon::new(vec![
            Point2::new(b.min_x, b.min_y),
            Point2::new(b.max_x, b.min_y),
            Point2::new(b.max_x, b.max_y),
            Point2::new(b.min_x, b.max_y),
        ])
        .expect("positive-size box")
    }
}

/// Rotated rectangle. Canonical form: `w >= h`, `theta` in `(-90, 90]`
/// (and `(-45, 45]` for squares), `theta` being the direction of the `w` side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OrientedBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
    pub theta: f64,
}

impl OrientedBox {
    /// `theta` must lie in `[-180, 180]`; the result is canonicalized.
    pub fn new(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> Result<Self> {
        BoundingBox::new(cx, cy, w, h)?;
        check_angle(theta)?;
        let (w, h, theta) = canonical_axes(w, h, theta);
        Ok(Self {
            cx,
            cy,
            w,
            h,
            theta,
        })
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    /// Corners of the rectangle with the given parameters, without
    /// canonicalization.
    pub fn corners(cx: f64, cy: f64, w: f64, h: f64, theta: f64) -> [Point2; 4] {
        let rot = theta.to_radians();
        let c = Point2::new(cx, cy);
        [(-0.5, -0.5), (0.5, -0.5), (0.5, 0.5), (-0.5, 0.5)]
            .map(|(sx, sy)| c + Point2::new(sx * w, sy * h).rotated(rot))
    }

    pub fn to_polygon(&self) -> SimplePolygon {
        SimplePolygon::new(Self::corners(self.cx, self.cy, self.w, self.h, self.theta).to_vec())
            .expect("positive-size box")
    }
}

/// Star-shaped polygon: `radii[k]` is the distance from the pole along
/// direction `k * 360 / R` degrees.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PolarPolygon {
    pub cx: f64,
    pub cy: f64,
    pub radii: Vec<f64>,
}

impl PolarPolygon {
    pub fn new(cx: f64, cy: f64, radii: Vec<f64>) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::precondition("polar polygon pole must be finite"));
        }
        if radii.len() < 3 {
            return Err(Error::precondition(format!(
                "polar polygon needs at least 3 rays, got {}",
                radii.len()
            )));
        }
        if radii.iter().any(|r| !(r.is_finite() && *r >= 0.0)) {
            return Err(Error::precondition(
                "polar radii must be finite and non-negative",
            ));
        }
        if radii.iter().all(|r| *r == 0.0) {
            return Err(Error::precondition(
                "polar polygon needs at least one positive radius",
            ));
        }
        Ok(Self { cx, cy, radii })
    }

    pub fn point_count(&self) -> usize {
        self.radii.len()
    }

    /// Direction of ray `k`, radians.
    pub fn ray_angle(&self, k: usize) -> f64 {
        std::f64::consts::TAU * k as f64 / self.radii.len() as f64
    }

    pub fn vertices(&self) -> Vec<Point2> {
        let c = Point2::new(self.cx, self.cy);
        self.radii
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let a = self.ray_angle(k);
                c + Point2::new(r * a.cos(), r * a.sin())
            })
            .collect()
    }

    /// Fails when the non-zero radii do not span any area.
    pub fn to_polygon(&self) -> Result<SimplePolygon> {
        SimplePolygon::new(self.vertices())
    }
}

/// The detection output geometries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawRepresentation", into = "RawRepresentation")]
pub enum Representation {
    Box(BoundingBox),
    OrientedBox(OrientedBox),
    Ellipse(Ellipse),
    PolarPolygon(PolarPolygon),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RepresentationKind {
    Box,
    OrientedBox,
    Ellipse,
    PolarPolygon,
}

impl RepresentationKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RepresentationKind::Box => "box",
            RepresentationKind::OrientedBox => "orientedBox",
            RepresentationKind::Ellipse => "ellipse",
            RepresentationKind::PolarPolygon => "polarPolygon",
        }
    }
}

impl Representation {
    pub fn kind(&self) -> RepresentationKind {
        match self {
            Representation::Box(_) => RepresentationKind::Box,
            Representation::OrientedBox(_) => RepresentationKind::OrientedBox,
            Representation::Ellipse(_) => RepresentationKind::Ellipse,
            Representation::PolarPolygon(_) => RepresentationKind::PolarPolygon,
        }
    }

    pub fn center(&self) -> Point2 {
        match self {
            Representation::Box(b) => Point2::new(b.cx, b.cy),
            Representation::OrientedBox(b) => Point2::new(b.cx, b.cy),
            Representation::Ellipse(e) => e.center(),
            Representation::PolarPolygon(p) => Point2::new(p.cx, p.cy),
        }
    }

    /// Polygonal outline: boxes give 4-gons, ellipses `arc_segments`-gons and
    /// polar polygons R-gons.
    pub fn to_polygon(&self, arc_segments: usize) -> Result<SimplePolygon> {
        match self {
            Representation::Box(b) => Ok(b.to_polygon()),
            Representation::OrientedBox(b) => Ok(b.to_polygon()),
            Representation::Ellipse(e) => e.to_polygon(arc_segments),
            Representation::PolarPolygon(p) => p.to_polygon(),
        }
    }

    /// Axis-aligned box around the representation, if it has area.
    pub fn enclosing_box(&self) -> Option<BoundingBox> {
        let b = match self {
            Representation::Box(b) => return Some(*b),
            Representation::Ellipse(e) => e.bounds(),
            other => other.to_polygon(DEFAULT_ARC_SEGMENTS).ok()?.bounds(),
        };
        BoundingBox::new(
            0.5 * (b.min_x + b.max_x),
            0.5 * (b.min_y + b.max_y),
            b.width(),
            b.height(),
        )
        .ok()
    }
}

impl From<BoundingBox> for Representation {
    fn from(b: BoundingBox) -> Self {
        Representation::Box(b)
    }
}

impl From<OrientedBox> for Representation {
    fn from(b: OrientedBox) -> Self {
        Representation::OrientedBox(b)
    }
}

impl From<Ellipse> for Representation {
    fn from(e: Ellipse) -> Self {
        Representation::Ellipse(e)
    }
}

impl From<PolarPolygon> for Representation {
    fn from(p: PolarPolygon) -> Self {
        Representation::PolarPolygon(p)
    }
}

/// Flat wire form: a `type` tag plus the fields that kind needs.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawRepresentation {
    #[serde(rename = "type")]
    kind: RepresentationKind,
    cx: f64,
    cy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    w: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    semi_major: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    semi_minor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    radii: Option<Vec<f64>>,
}

impl TryFrom<RawRepresentation> for Representation {
    type Error = Error;
    fn try_from(r: RawRepresentation) -> Result<Self> {
        fn need<T>(v: Option<T>, kind: RepresentationKind, field: &str) -> Result<T> {
            v.ok_or_else(|| {
                Error::Format(format!(
                    "`{}` representation requires field `{field}`",
                    kind.as_str()
                ))
            })
        }
        let k = r.kind;
        let rep = match k {
            RepresentationKind::Box => {
                BoundingBox::new(r.cx, r.cy, need(r.w, k, "w")?, need(r.h, k, "h")?)?.into()
            }
            RepresentationKind::OrientedBox => OrientedBox::new(
                r.cx,
                r.cy,
                need(r.w, k, "w")?,
                need(r.h, k, "h")?,
                need(r.theta, k, "theta")?,
            )?
            .into(),
            RepresentationKind::Ellipse => Ellipse::new(
                r.cx,
                r.cy,
                need(r.semi_major, k, "semiMajor")?,
                need(r.semi_minor, k, "semiMinor")?,
                need(r.theta, k, "theta")?,
            )?
            .into(),
            RepresentationKind::PolarPolygon => {
                PolarPolygon::new(r.cx, r.cy, need(r.radii, k, "radii")?)?.into()
            }
        };
        Ok(rep)
    }
}

impl From<Representation> for RawRepresentation {
    fn from(rep: Representation) -> Self {
        let mut raw = RawRepresentation {
            kind: rep.kind(),
            cx: 0.0,
            cy: 0.0,
            w: None,
            h: None,
            semi_major: None,
            semi_minor: None,
            theta: None,
            radii: None,
        };
        match rep {
            Representation::Box(b) => {
                (raw.cx, raw.cy, raw.w, raw.h) = (b.cx, b.cy, Some(b.w), Some(b.h));
            }
            Representation::OrientedBox(b) => {
                (raw.cx, raw.cy, raw.w, raw.h) = (b.cx, b.cy, Some(b.w), Some(b.h));
                raw.theta = Some(b.theta);
            }
            Representation::Ellipse(e) => {
                (raw.cx, raw.cy) = (e.cx, e.cy);
                raw.semi_major = Some(e.semi_major);
                raw.semi_minor = Some(e.semi_minor);
                raw.theta = Some(e.theta);
            }
            Representation::PolarPolygon(p) => {
                (raw.cx, raw.cy) = (p.cx, p.cy);
                raw.radii = Some(p.radii);
            }
        }
        raw
    }
}

/// Which representation to derive from a mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum RepresentationSpec {
    BoundingBox,
    RotatedBox,
    Ellipse,
    Polygon { points: usize },
}

impl RepresentationSpec {
    /// Column label used in upper-bound tables (`BoundingBox`, `RotatedBox`,
    /// `Ellipse`, `P24`, ...).
    pub fn label(&self) -> String {
        match self {
            RepresentationSpec::BoundingBox => "BoundingBox".into(),
            RepresentationSpec::RotatedBox => "RotatedBox".into(),
            RepresentationSpec::Ellipse => "Ellipse".into(),
            RepresentationSpec::Polygon { points } => format!("P{points}"),
        }
    }

    pub fn kind(&self) -> RepresentationKind {
        match self {
            RepresentationSpec::BoundingBox => RepresentationKind::Box,
            RepresentationSpec::RotatedBox => RepresentationKind::OrientedBox,
            RepresentationSpec::Ellipse => RepresentationKind::Ellipse,
            RepresentationSpec::Polygon { .. } => RepresentationKind::PolarPolygon,
        }
    }

    /// Box, rotated box and polygons at every default density.
    pub fn table_columns(points: &[usize]) -> Vec<RepresentationSpec> {
        let mut v = vec![
            RepresentationSpec::BoundingBox,
            RepresentationSpec::RotatedBox,
        ];
        v.extend(
            points
                .iter()
                .map(|&p| RepresentationSpec::Polygon { points: p }),
        );
        v
    }
}

/// A binary raster of one object instance.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceMask {
    grid: RasterGrid,
    class: ClassLabel,
}

impl InstanceMask {
    pub fn new(grid: RasterGrid, class: ClassLabel) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::precondition("instance mask has no occupied cell"));
        }
        Ok(Self { grid, class })
    }

    pub fn grid(&self) -> &RasterGrid {
        &self.grid
    }

    pub fn class(&self) -> ClassLabel {
        self.class
    }

    pub fn area(&self) -> usize {
        self.grid.count_ones()
    }

    pub fn into_grid(self) -> RasterGrid {
        self.grid
    }
}
