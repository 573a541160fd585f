//! Planar geometry primitives shared by every other module.
//!
//! Orientation convention: a polygon is "counter-clockwise" when its shoelace
//! signed area is positive, i.e. when it winds in the direction of positive
//! rotation (`+x` toward `+y`). In a y-down image this looks clockwise on
//! screen; all code in the crate uses the frame-intrinsic definition.

mod clip;
mod ellipse;
mod hull;
mod raster;

use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use clip::{clip_convex, convex_intersection_area, sutherland_hodgman};
pub use ellipse::Ellipse;
pub(crate) use ellipse::{canonical_axes, check_angle};
pub use hull::{convex_hull, min_area_rect, MinAreaRect};
pub use raster::{raster_iou, rasterize, RasterFrame, RasterGrid, Shape};

/// A point in continuous pixel coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dot(self, o: Point2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    /// z-component of the 3D cross product.
    pub fn cross(self, o: Point2) -> f64 {
        self.x * o.y - self.y * o.x
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, o: Point2) -> f64 {
        (self - o).norm()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    /// Rotates by `angle` radians about the origin (positive turns +x toward +y).
    pub fn rotated(self, angle: f64) -> Point2 {
        let (s, c) = angle.sin_cos();
        Point2::new(self.x * c - self.y * s, self.x * s + self.y * c)
    }
}

impl Add for Point2 {
    type Output = Point2;
    fn add(self, o: Point2) -> Point2 {
        Point2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Point2 {
    type Output = Point2;
    fn sub(self, o: Point2) -> Point2 {
        Point2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Point2 {
    type Output = Point2;
    fn mul(self, k: f64) -> Point2 {
        Point2::new(self.x * k, self.y * k)
    }
}

impl Neg for Point2 {
    type Output = Point2;
    fn neg(self) -> Point2 {
        Point2::new(-self.x, -self.y)
    }
}

/// Axis-aligned extent of a shape.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min_x: f64,
    pub min_y: f64,
    pub max_x: f64,
    pub max_y: f64,
}

impl Bounds {
    pub fn from_points(points: &[Point2]) -> Option<Bounds> {
        let first = points.first()?;
        let init = Bounds {
            min_x: first.x,
            min_y: first.y,
            max_x: first.x,
            max_y: first.y,
        };
        Some(points.iter().fold(init, |b, p| Bounds {
            min_x: b.min_x.min(p.x),
            min_y: b.min_y.min(p.y),
            max_x: b.max_x.max(p.x),
            max_y: b.max_y.max(p.y),
        }))
    }

    pub fn union(self, o: Bounds) -> Bounds {
        Bounds {
            min_x: self.min_x.min(o.min_x),
            min_y: self.min_y.min(o.min_y),
            max_x: self.max_x.max(o.max_x),
            max_y: self.max_y.max(o.max_y),
        }
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }
}

/// Shoelace signed area; positive for counter-clockwise (positive-rotation) order.
pub fn signed_area(points: &[Point2]) -> f64 {
    let n = points.len();
    if n < 3 {
        return 0.0;
    }
    let mut acc = 0.0;
    for i in 0..n {
        let p = points[i];
        let q = points[(i + 1) % n];
        acc += p.cross(q);
    }
    0.5 * acc
}

/// A closed polygon with at least three distinct vertices and non-zero area,
/// stored in counter-clockwise order.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplePolygon {
    vertices: Vec<Point2>,
}

impl SimplePolygon {
    /// Validates and normalizes a vertex list.
    ///
    /// Consecutive duplicate vertices (including the closing pair) are
    /// collapsed. Polygons whose vertices are all collinear are rejected as
    /// degenerate. Clockwise input is reversed.
    pub fn new(vertices: Vec<Point2>) -> Result<Self> {
        if let Some(p) = vertices.iter().find(|p| !p.is_finite()) {
            return Err(Error::degenerate(format!("non-finite vertex {p:?}")));
        }
        let mut v: Vec<Point2> = Vec::with_capacity(vertices.len());
        for p in vertices {
            if v.last() != Some(&p) {
                v.push(p);
            }
        }
        while v.len() > 1 && v.first() == v.last() {
            v.pop();
        }
        if v.len() < 3 {
            return Err(Error::degenerate(format!(
                "polygon needs at least 3 distinct vertices, got {}",
                v.len()
            )));
        }
        let area = signed_area(&v);
        let b = Bounds::from_points(&v).expect("non-empty");
        let scale = b.width().max(b.height());
        if area.abs() <= 1e-12 * scale * scale || area == 0.0 {
            return Err(Error::degenerate("polygon has zero area"));
        }
        if area < 0.0 {
            v.reverse();
        }
        Ok(Self { vertices: v })
    }

    pub fn vertices(&self) -> &[Point2] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Signed area; always positive for a constructed polygon.
    pub fn signed_area(&self) -> f64 {
        signed_area(&self.vertices)
    }

    pub fn area(&self) -> f64 {
        self.signed_area().abs()
    }

    pub fn bounds(&self) -> Bounds {
        Bounds::from_points(&self.vertices).expect("polygon has vertices")
    }

    pub fn edges(&self) -> impl Iterator<Item = (Point2, Point2)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    /// Convex (collinear vertices allowed) and winding exactly once.
    pub fn is_convex(&self) -> bool {
        let n = self.vertices.len();
        let scale = {
            let b = self.bounds();
            b.width().max(b.height())
        };
        let tol = 1e-12 * scale * scale;
        let mut turning = 0.0;
        for i in 0..n {
            let a = self.vertices[i];
            let b = self.vertices[(i + 1) % n];
            let c = self.vertices[(i + 2) % n];
            let e1 = b - a;
            let e2 = c - b;
            let cross = e1.cross(e2);
            if cross < -tol {
                return false;
            }
            turning += cross.atan2(e1.dot(e2));
        }
        (turning - std::f64::consts::TAU).abs() < 1e-6
    }

    /// Even-odd containment with boundary points counted as inside.
    pub fn contains(&self, p: Point2) -> bool {
        let mut inside = false;
        for (a, b) in self.edges() {
            if on_segment(p, a, b) {
                return true;
            }
            if (a.y <= p.y) != (b.y <= p.y) {
                let x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
                if x > p.x {
                    inside = !inside;
                }
            }
        }
        inside
    }

    pub fn centroid(&self) -> Point2 {
        let n = self.vertices.len();
        let mut cx = 0.0;
        let mut cy = 0.0;
        let mut a2 = 0.0;
        for i in 0..n {
            let p = self.vertices[i];
            let q = self.vertices[(i + 1) % n];
            let c = p.cross(q);
            a2 += c;
            cx += (p.x + q.x) * c;
            cy += (p.y + q.y) * c;
        }
        Point2::new(cx / (3.0 * a2), cy / (3.0 * a2))
    }
}

/// Area of a valid polygon (absolute shoelace area).
pub fn polygon_area(p: &SimplePolygon) -> f64 {
    p.area()
}

fn on_segment(p: Point2, a: Point2, b: Point2) -> bool {
    let ab = b - a;
    let ap = p - a;
    if ab.cross(ap) != 0.0 {
        return false;
    }
    let t = ap.dot(ab);
    t >= 0.0 && t <= ab.dot(ab)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().map(|&(x, y)| Point2::new(x, y)).collect()
    }

    #[test]
    fn unit_square_area() {
        let p = SimplePolygon::new(pts(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)])).unwrap();
        assert_eq!(polygon_area(&p), 1.0);
    }

    #[test]
    fn triangle_area() {
        let p = SimplePolygon::new(pts(&[(0., 0.), (2., 0.), (0., 2.)])).unwrap();
        assert_eq!(p.area(), 2.0);
    }

    #[test]
    fn regular_dodecagon_area() {
        let v: Vec<Point2> = (0..12)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 12.0;
                Point2::new(a.cos(), a.sin())
            })
            .collect();
        let p = SimplePolygon::new(v).unwrap();
        assert!((p.area() - 3.0).abs() < 1e-12);
    }

    #[test]
    fn collinear_polygon_is_degenerate() {
        let err = SimplePolygon::new(pts(&[(0., 0.), (1., 1.), (2., 2.), (3., 3.)])).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry(_)));
    }

    #[test]
    fn too_few_vertices_after_dedup() {
        let err = SimplePolygon::new(pts(&[(0., 0.), (0., 0.), (1., 0.), (0., 0.)])).unwrap_err();
        assert!(matches!(err, Error::DegenerateGeometry(_)));
    }

    #[test]
    fn clockwise_input_is_reversed() {
        let p = SimplePolygon::new(pts(&[(0., 0.), (0., 1.), (1., 1.), (1., 0.)])).unwrap();
        assert!(p.signed_area() > 0.0);
    }

    #[test]
    fn normalization_is_idempotent() {
        let p = SimplePolygon::new(pts(&[(0., 0.), (3., 0.), (2., 2.), (0., 1.)])).unwrap();
        let q = SimplePolygon::new(p.vertices().to_vec()).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn convexity() {
        let sq = SimplePolygon::new(pts(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)])).unwrap();
        assert!(sq.is_convex());
        let l = SimplePolygon::new(pts(&[
            (0., 0.),
            (2., 0.),
            (2., 1.),
            (1., 1.),
            (1., 2.),
            (0., 2.),
        ]))
        .unwrap();
        assert!(!l.is_convex());
    }

    #[test]
    fn contains_counts_boundary() {
        let sq = SimplePolygon::new(pts(&[(0., 0.), (1., 0.), (1., 1.), (0., 1.)])).unwrap();
        assert!(sq.contains(Point2::new(0.5, 0.5)));
        assert!(sq.contains(Point2::new(0.0, 0.5)));
        assert!(sq.contains(Point2::new(1.0, 1.0)));
        assert!(!sq.contains(Point2::new(1.5, 0.5)));
    }
}
