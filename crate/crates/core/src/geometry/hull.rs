use super::Point2;
use crate::error::{Error, Result};

/// Convex hull by Andrew's monotone chain. Output is counter-clockwise
/// (positive signed area) with collinear points removed.
pub fn convex_hull(points: &[Point2]) -> Vec<Point2> {
    let mut pts: Vec<Point2> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point2> = Vec::with_capacity(2 * pts.len());
    let push = |hull: &mut Vec<Point2>, p: Point2, floor: usize| {
        while hull.len() >= floor {
            let a = hull[hull.len() - 2];
            let b = hull[hull.len() - 1];
            if (b - a).cross(p - b) > 0.0 {
                break;
            }
            hull.pop();
        }
        hull.push(p);
    };
    for &p in &pts {
        push(&mut hull, p, 2);
    }
    // the upper chain must not pop into the lower one
    let floor = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        push(&mut hull, p, floor);
    }
    hull.pop();
    hull
}

/// Minimum-area enclosing rectangle of a convex polygon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinAreaRect {
    pub center: Point2,
    /// Extent along `angle`.
    pub width: f64,
    /// Extent perpendicular to `angle`.
    pub height: f64,
    /// Direction of the `width` side, radians.
    pub angle: f64,
}

impl MinAreaRect {
    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Rotating calipers over a counter-clockwise convex hull: one rectangle side
/// is flush with a hull edge, the three other support points advance
/// monotonically. Ties keep the first edge.
pub fn min_area_rect(hull: &[Point2]) -> Result<MinAreaRect> {
    let n = hull.len();
    if n < 3 {
        return Err(Error::degenerate("minimum-area rectangle needs a 2D hull"));
    }
    let edge_dir = |i: usize| {
        let d = hull[(i + 1) % n] - hull[i];
        d * (1.0 / d.norm())
    };
    let normal = |u: Point2| Point2::new(-u.y, u.x);

    let u0 = edge_dir(0);
    let v0 = normal(u0);
    let argmax = |f: &dyn Fn(Point2) -> f64| {
        (0..n).fold(
            0,
            |best, i| if f(hull[i]) > f(hull[best]) { i } else { best },
        )
    };
    let mut right = argmax(&|p| p.dot(u0));
    let mut top = argmax(&|p| p.dot(v0));
    let mut left = argmax(&|p| -p.dot(u0));

    let mut best: Option<MinAreaRect> = None;
    for i in 0..n {
        let u = edge_dir(i);
        let v = normal(u);
        let base = hull[i];
        while (hull[(right + 1) % n] - hull[right]).dot(u) > 0.0 {
            right = (right + 1) % n;
        }
        while (hull[(top + 1) % n] - hull[top]).dot(v) > 0.0 {
            top = (top + 1) % n;
        }
        while (hull[(left + 1) % n] - hull[left]).dot(u) < 0.0 {
            left = (left + 1) % n;
        }
        let max_u = (hull[right] - base).dot(u);
        let min_u = (hull[left] - base).dot(u);
        let max_v = (hull[top] - base).dot(v);
        let width = max_u - min_u;
        let height = max_v;
        let area = width * height;
        if best.is_none_or(|b| area < b.area()) {
            let mid_u = 0.5 * (max_u + min_u);
            let mid_v = 0.5 * max_v;
            best = Some(MinAreaRect {
                center: base + u * mid_u + v * mid_v,
                width,
                height,
                angle: u.y.atan2(u.x),
            });
        }
    }
    Ok(best.expect("n >= 3"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::signed_area;
    use proptest::prelude::*;

    /// O(n^2) oracle: try every hull edge direction, project all points.
    fn brute_force_min_area(hull: &[Point2]) -> f64 {
        let n = hull.len();
        (0..n)
            .map(|i| {
                let d = hull[(i + 1) % n] - hull[i];
                let u = d * (1.0 / d.norm());
                let v = Point2::new(-u.y, u.x);
                let (mut lo_u, mut hi_u, mut lo_v, mut hi_v) =
                    (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
                for p in hull {
                    lo_u = lo_u.min(p.dot(u));
                    hi_u = hi_u.max(p.dot(u));
                    lo_v = lo_v.min(p.dot(v));
                    hi_v = hi_v.max(p.dot(v));
                }
                (hi_u - lo_u) * (hi_v - lo_v)
            })
            .fold(f64::MAX, f64::min)
    }

    #[test]
    fn hull_of_square_with_interior_points() {
        let pts = vec![
            Point2::new(0., 0.),
            Point2::new(1., 0.),
            Point2::new(0.5, 0.5),
            Point2::new(1., 1.),
            Point2::new(0., 1.),
            Point2::new(0.5, 0.),
        ];
        let h = convex_hull(&pts);
        assert_eq!(h.len(), 4);
        assert!(signed_area(&h) > 0.0);
    }

    #[test]
    fn rect_of_rotated_rectangle() {
        let a = 30f64.to_radians();
        let pts: Vec<Point2> = [(-2., -1.), (2., -1.), (2., 1.), (-2., 1.)]
            .iter()
            .map(|&(x, y)| Point2::new(x, y).rotated(a) + Point2::new(5., 7.))
            .collect();
        let r = min_area_rect(&convex_hull(&pts)).unwrap();
        assert!((r.area() - 8.0).abs() < 1e-9);
        assert!((r.center.x - 5.0).abs() < 1e-9 && (r.center.y - 7.0).abs() < 1e-9);
    }

    proptest! {
        #[test]
        fn calipers_match_brute_force(raw in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 3..60)) {
            let pts: Vec<Point2> = raw.into_iter().map(|(x, y)| Point2::new(x, y)).collect();
            let hull = convex_hull(&pts);
            prop_assume!(hull.len() >= 3 && signed_area(&hull) > 1e-6);
            let r = min_area_rect(&hull).unwrap();
            let oracle = brute_force_min_area(&hull);
            prop_assert!((r.area() - oracle).abs() <= 1e-9 * oracle.max(1.0));
            // every hull point inside the rectangle
            let u = Point2::new(r.angle.cos(), r.angle.sin());
            let v = Point2::new(-u.y, u.x);
            for p in &hull {
                let d = *p - r.center;
                prop_assert!(d.dot(u).abs() <= r.width / 2.0 + 1e-7);
                prop_assert!(d.dot(v).abs() <= r.height / 2.0 + 1e-7);
            }
        }
    }
}
