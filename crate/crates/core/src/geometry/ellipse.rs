use serde::{Deserialize, Serialize};

use super::{Bounds, Point2, SimplePolygon};
use crate::error::{Error, Result};

/// A rotated ellipse. `theta` is the direction of the major axis in degrees.
///
/// Stored canonically: `semi_major >= semi_minor > 0` and `theta` in
/// `(-90, 90]` (`(-45, 45]` for circles).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEllipse", rename_all = "camelCase")]
pub struct Ellipse {
    pub cx: f64,
    pub cy: f64,
    pub semi_major: f64,
    pub semi_minor: f64,
    pub theta: f64,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct RawEllipse {
    cx: f64,
    cy: f64,
    semi_major: f64,
    semi_minor: f64,
    theta: f64,
}

impl TryFrom<RawEllipse> for Ellipse {
    type Error = Error;
    fn try_from(r: RawEllipse) -> Result<Self> {
        Ellipse::new(r.cx, r.cy, r.semi_major, r.semi_minor, r.theta)
    }
}

impl Ellipse {
    /// Builds a canonical ellipse. The two semi-axes may be given in either
    /// order; `theta` refers to the first one and must lie in `[-180, 180]`.
    pub fn new(cx: f64, cy: f64, semi_a: f64, semi_b: f64, theta: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::precondition("ellipse center must be finite"));
        }
        if !(semi_a > 0.0 && semi_b > 0.0 && semi_a.is_finite() && semi_b.is_finite()) {
            return Err(Error::precondition(format!(
                "ellipse semi-axes must be positive, got {semi_a} and {semi_b}"
            )));
        }
        check_angle(theta)?;
        let (a, b, t) = canonical_axes(semi_a, semi_b, theta);
        Ok(Self {
            cx,
            cy,
            semi_major: a,
            semi_minor: b,
            theta: t,
        })
    }

    pub fn center(&self) -> Point2 {
        Point2::new(self.cx, self.cy)
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.semi_major * self.semi_minor
    }

    /// Quadratic form value: `<= 1` inside or on the boundary.
    pub fn quadratic_form(&self, p: Point2) -> f64 {
        let (s, c) = self.theta.to_radians().sin_cos();
        let dx = p.x - self.cx;
        let dy = p.y - self.cy;
        let u = (dx * c + dy * s) / self.semi_major;
        let v = (-dx * s + dy * c) / self.semi_minor;
        u * u + v * v
    }

    pub fn contains(&self, p: Point2) -> bool {
        self.quadratic_form(p) <= 1.0
    }

    pub fn bounds(&self) -> Bounds {
        let (s, c) = self.theta.to_radians().sin_cos();
        let (a, b) = (self.semi_major, self.semi_minor);
        let hw = ((a * c).powi(2) + (b * s).powi(2)).sqrt();
        let hh = ((a * s).powi(2) + (b * c).powi(2)).sqrt();
        Bounds {
            min_x: self.cx - hw,
            min_y: self.cy - hh,
            max_x: self.cx + hw,
            max_y: self.cy + hh,
        }
    }

    /// Inscribed polygon with `segments` vertices sampled uniformly in the
    /// parametric angle.
    pub fn to_polygon(&self, segments: usize) -> Result<SimplePolygon> {
        if segments < 8 {
            return Err(Error::precondition(format!(
                "ellipse polygonization needs at least 8 segments, got {segments}"
            )));
        }
        let rot = self.theta.to_radians();
        let c = self.center();
        let verts = (0..segments)
            .map(|k| {
                let t = std::f64::consts::TAU * k as f64 / segments as f64;
                c + Point2::new(self.semi_major * t.cos(), self.semi_minor * t.sin()).rotated(rot)
            })
            .collect();
        SimplePolygon::new(verts)
    }
}

pub(crate) fn check_angle(theta: f64) -> Result<()> {
    if !(-180.0..=180.0).contains(&theta) {
        return Err(Error::precondition(format!(
            "angle {theta} deg outside [-180, 180]"
        )));
    }
    Ok(())
}

/// Removes the symmetry of a centred rectangle/ellipse parameterization:
/// returns `(major, minor, theta)` with `major >= minor` and `theta` in
/// `(-90, 90]`; equal axes reduce `theta` further into `(-45, 45]`.
pub(crate) fn canonical_axes(w: f64, h: f64, theta: f64) -> (f64, f64, f64) {
    let (w, h, t) = if h > w {
        (h, w, theta + 90.0)
    } else {
        (w, h, theta)
    };
    let t = if w == h {
        let m = t.rem_euclid(90.0);
        if m > 45.0 {
            m - 90.0
        } else {
            m
        }
    } else {
        let m = t.rem_euclid(180.0);
        if m > 90.0 {
            m - 180.0
        } else {
            m
        }
    };
    (w, h, t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn canonicalization_swaps_axes() {
        let e = Ellipse::new(0.0, 0.0, 2.0, 5.0, 10.0).unwrap();
        assert_eq!(e.semi_major, 5.0);
        assert_eq!(e.semi_minor, 2.0);
        assert_eq!(e.theta, 100.0 - 180.0);
    }

    #[test]
    fn canonical_angle_range() {
        for t in [-180.0, -135.0, -90.0, -45.0, 0.0, 45.0, 90.0, 135.0, 180.0] {
            let (_, _, c) = canonical_axes(3.0, 1.0, t);
            assert!(c > -90.0 && c <= 90.0, "{t} -> {c}");
            let (_, _, c) = canonical_axes(1.0, 1.0, t);
            assert!(c > -45.0 && c <= 45.0, "{t} -> {c}");
        }
    }

    #[test]
    fn rejects_out_of_range_angle() {
        assert!(Ellipse::new(0.0, 0.0, 2.0, 1.0, 181.0).is_err());
        assert!(Ellipse::new(0.0, 0.0, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn circle_polygon_area_converges() {
        let r = 10.0;
        let e = Ellipse::new(0.0, 0.0, r, r, 0.0).unwrap();
        let p = e.to_polygon(360).unwrap();
        let exact = std::f64::consts::PI * r * r;
        assert!((p.area() - exact).abs() / exact < 1e-3);
    }

    #[test]
    fn too_few_segments() {
        let e = Ellipse::new(0.0, 0.0, 2.0, 1.0, 0.0).unwrap();
        assert!(e.to_polygon(7).is_err());
    }

    #[test]
    fn bounds_of_rotated_ellipse() {
        let e = Ellipse::new(0.0, 0.0, 4.0, 1.0, 90.0).unwrap();
        let b = e.bounds();
        assert!((b.width() - 2.0).abs() < 1e-12);
        assert!((b.height() - 8.0).abs() < 1e-12);
    }
}
