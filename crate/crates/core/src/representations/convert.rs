use std::f64::consts::TAU;

use super::{
    BoundingBox, Ellipse, InstanceMask, OrientedBox, PolarPolygon, Representation,
    RepresentationSpec,
};
use crate::error::{Error, Result};
use crate::geometry::{convex_hull, min_area_rect, Point2, RasterGrid};

fn non_empty(grid: &RasterGrid) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::precondition("mask has no occupied cell"));
    }
    Ok(())
}

/// Tightest axis-aligned box over the occupied cell extents.
pub fn mask_to_bounding_box(mask: &InstanceMask) -> Result<BoundingBox> {
    grid_bounding_box(mask.grid())
}

pub(crate) fn grid_bounding_box(grid: &RasterGrid) -> Result<BoundingBox> {
    non_empty(grid)?;
    let (x0, y0, x1, y1) = grid.occupied_bounds().expect("non-empty");
    let w = (x1 - x0 + 1) as f64;
    let h = (y1 - y0 + 1) as f64;
    BoundingBox::new(x0 as f64 + 0.5 * w, y0 as f64 + 0.5 * h, w, h)
}

/// Minimum-area rectangle around the occupied cells (their corners, not
/// their centers).
pub fn mask_to_oriented_box(mask: &InstanceMask) -> Result<OrientedBox> {
    grid_oriented_box(mask.grid())
}

pub(crate) fn grid_oriented_box(grid: &RasterGrid) -> Result<OrientedBox> {
    non_empty(grid)?;
    // Only the leftmost and rightmost cell of each row can contribute hull
    // corners.
    let mut corners = Vec::new();
    for (y, x0, x1) in grid.row_extents() {
        let (y, x0, x1) = (y as f64, x0 as f64, (x1 + 1) as f64);
        corners.extend_from_slice(&[
            Point2::new(x0, y),
            Point2::new(x0, y + 1.0),
            Point2::new(x1, y),
            Point2::new(x1, y + 1.0),
        ]);
    }
    let hull = convex_hull(&corners);
    let r = min_area_rect(&hull)?;
    OrientedBox::new(
        r.center.x,
        r.center.y,
        r.width,
        r.height,
        r.angle.to_degrees(),
    )
}

/// Ellipse inscribed in the mask's oriented box.
pub fn mask_to_ellipse(mask: &InstanceMask) -> Result<Ellipse> {
    let b = grid_oriented_box(mask.grid())?;
    Ellipse::new(b.cx, b.cy, 0.5 * b.w, 0.5 * b.h, b.theta)
}

/// Polar polygon fit plus a flag telling whether the pole (the occupied-cell
/// centroid) landed on an unoccupied cell.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarFit {
    pub polygon: PolarPolygon,
    pub pole_outside_mask: bool,
}

/// Pole at the centroid of the occupied cell centers; radius `k` is the
/// distance to the farthest occupied cell center whose direction lies within
/// half a step of ray `k`, or 0 if that bin is empty.
pub fn mask_to_polar_polygon(mask: &InstanceMask, points: usize) -> Result<PolarFit> {
    grid_polar_polygon(mask.grid(), points)
}

pub(crate) fn grid_polar_polygon(grid: &RasterGrid, points: usize) -> Result<PolarFit> {
    if points < 3 {
        return Err(Error::precondition(format!(
            "polar polygon needs at least 3 points, got {points}"
        )));
    }
    non_empty(grid)?;
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (x, y) in grid.iter_ones() {
        sx += x as f64 + 0.5;
        sy += y as f64 + 0.5;
        n += 1;
    }
    let pole = Point2::new(sx / n as f64, sy / n as f64);

    let step = TAU / points as f64;
    let mut radii = vec![0.0f64; points];
    for (x, y) in grid.iter_ones() {
        let d = Point2::new(x as f64 + 0.5, y as f64 + 0.5) - pole;
        let r = d.norm();
        if r == 0.0 {
            continue;
        }
        let phi = d.y.atan2(d.x).rem_euclid(TAU);
        let k = ((phi / step + 0.5).floor() as usize) % points;
        radii[k] = radii[k].max(r);
    }
    let (px, py) = (pole.x.floor(), pole.y.floor());
    let pole_outside_mask = !(px >= 0.0
        && py >= 0.0
        && (px as usize) < grid.width()
        && (py as usize) < grid.height()
        && grid.get(px as usize, py as usize));
    if pole_outside_mask {
        log::debug!(
            "polar fit: pole ({:.2}, {:.2}) lies outside the mask",
            pole.x,
            pole.y
        );
    }
    if radii.iter().all(|r| *r == 0.0) {
        // A single cell has no extent around its own center; give it the
        // inscribed radius so the result is a valid polygon.
        radii.iter_mut().for_each(|r| *r = 0.5);
    }
    Ok(PolarFit {
        polygon: PolarPolygon::new(pole.x, pole.y, radii)?,
        pole_outside_mask,
    })
}

/// Converts a mask to the representation named by `spec`.
pub fn convert_mask(mask: &InstanceMask, spec: RepresentationSpec) -> Result<Representation> {
    convert_grid(mask.grid(), spec)
}

pub(crate) fn convert_grid(grid: &RasterGrid, spec: RepresentationSpec) -> Result<Representation> {
    Ok(match spec {
        RepresentationSpec::BoundingBox => grid_bounding_box(grid)?.into(),
        RepresentationSpec::RotatedBox => grid_oriented_box(grid)?.into(),
        RepresentationSpec::Ellipse => {
            let b = grid_oriented_box(grid)?;
            Ellipse::new(b.cx, b.cy, 0.5 * b.w, 0.5 * b.h, b.theta)?.into()
        }
        RepresentationSpec::Polygon { points } => grid_polar_polygon(grid, points)?.polygon.into(),
    })
}
