use super::{Point2, SimplePolygon};
use crate::error::{Error, Result};

/// Sutherland–Hodgman clipping of `subject` against the convex, counter-clockwise
/// `clip` polygon. Returns the raw vertex list, possibly empty or degenerate.
pub fn sutherland_hodgman(subject: &[Point2], clip: &[Point2]) -> Vec<Point2> {
    let mut output = subject.to_vec();
    let n = clip.len();
    for i in 0..n {
        if output.is_empty() {
            break;
        }
        let e0 = clip[i];
        let e1 = clip[(i + 1) % n];
        let dir = e1 - e0;
        let input = std::mem::take(&mut output);
        let m = input.len();
        for j in 0..m {
            let cur = input[j];
            let next = input[(j + 1) % m];
            let d_cur = dir.cross(cur - e0);
            let d_next = dir.cross(next - e0);
            if d_cur >= 0.0 {
                output.push(cur);
                if d_next < 0.0 {
                    output.push(lerp_cross(cur, next, d_cur, d_next));
                }
            } else if d_next >= 0.0 {
                output.push(lerp_cross(cur, next, d_cur, d_next));
            }
        }
    }
    output
}

fn lerp_cross(a: Point2, b: Point2, da: f64, db: f64) -> Point2 {
    let t = da / (da - db);
    a + (b - a) * t
}

/// Exact intersection of two convex polygons.
///
/// Returns `Ok(None)` when the intersection has no area.
pub fn clip_convex(subject: &SimplePolygon, clip: &SimplePolygon) -> Result<Option<SimplePolygon>> {
    if !subject.is_convex() {
        return Err(Error::precondition(
            "clip_convex: subject polygon is not convex",
        ));
    }
    if !clip.is_convex() {
        return Err(Error::precondition(
            "clip_convex: clip polygon is not convex",
        ));
    }
    let raw = sutherland_hodgman(subject.vertices(), clip.vertices());
    match SimplePolygon::new(raw) {
        Ok(p) => Ok(Some(p)),
        Err(Error::DegenerateGeometry(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Area of the intersection of two convex polygons.
pub fn convex_intersection_area(a: &SimplePolygon, b: &SimplePolygon) -> Result<f64> {
    let inter = clip_convex(a, b)?.map(|p| p.area()).unwrap_or(0.0);
    Ok(inter.min(a.area()).min(b.area()))
}
