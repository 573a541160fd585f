use serde::{Deserialize, Serialize};

use super::Detection;
use crate::error::{Error, Result};
use crate::geometry::{
    convex_intersection_area, rasterize, Point2, RasterFrame, Shape, SimplePolygon,
};
use crate::representations::{rasterize_representation, rectangle, Representation};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Occupancy {
    Free,
    Occupied,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyConfig {
    /// Overlap, as a share of the region area, above which the region is
    /// occupied.
    pub fraction: f64,
    /// Cells along the longer side of the region when rasterizing.
    pub resolution: usize,
}

impl Default for OccupancyConfig {
    fn default() -> Self {
        Self {
            fraction: 0.01,
            resolution: 1024,
        }
    }
}

/// Share of `region` covered by `rep`. Exact for a box or oriented box over a
/// convex region; rasterized over the region's bounds otherwise.
pub fn region_overlap_fraction(
    region: &SimplePolygon,
    rep: &Representation,
    cfg: &OccupancyConfig,
) -> Result<f64> {
    let area = region.area();
    if !(area > 0.0) {
        return Err(Error::degenerate("occupancy region has zero area"));
    }
    if region.is_convex() {
        if let Some(r) = rectangle(rep) {
            return Ok(convex_intersection_area(region, &r)? / area);
        }
    }
    if cfg.resolution == 0 {
        return Err(Error::precondition(
            "occupancy raster resolution must be positive",
        ));
    }
    let b = region.bounds();
    let cell = b.width().max(b.height()) / cfg.resolution as f64;
    let w = ((b.width() / cell).ceil() as usize).max(1);
    let h = ((b.height() / cell).ceil() as usize).max(1);
    let frame = RasterFrame::new(Point2::new(b.min_x, b.min_y), cell, w, h)?;
    let region_grid = rasterize(&Shape::Polygon(region), &frame)?;
    let total = region_grid.count_ones();
    if total == 0 {
        return Err(Error::degenerate("occupancy region covers no raster cell"));
    }
    let rep_grid = rasterize_representation(rep, &frame)?;
    Ok(region_grid.intersection_count(&rep_grid)? as f64 / total as f64)
}

/// Occupied when some detection covers more than `cfg.fraction` of the
/// region.
pub fn occupancy_predicate(
    region: &SimplePolygon,
    dets: &[Detection],
    cfg: &OccupancyConfig,
) -> Result<Occupancy> {
    for d in dets {
        if region_overlap_fraction(region, &d.representation, cfg)? > cfg.fraction {
            return Ok(Occupancy::Occupied);
        }
    }
    Ok(Occupancy::Free)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::representations::{BoundingBox, ClassLabel, Ellipse, PolarPolygon};

    fn square(x0: f64, y0: f64, s: f64) -> SimplePolygon {
        SimplePolygon::new(vec![
            Point2::new(x0, y0),
            Point2::new(x0 + s, y0),
            Point2::new(x0 + s, y0 + s),
            Point2::new(x0, y0 + s),
        ])
        .unwrap()
    }

    fn det(rep: Representation) -> Detection {
        Detection::new(0, "f", ClassLabel::Vehicle, 0.9, rep).unwrap()
    }

    #[test]
    fn empty_scene_is_free() {
        assert_eq!(
            occupancy_predicate(&square(0.0, 0.0, 10.0), &[], &OccupancyConfig::default()).unwrap(),
            Occupancy::Free
        );
    }

    #[test]
    fn inside_detection_occupies() {
        let d = det(BoundingBox::new(5.0, 5.0, 2.0, 2.0).unwrap().into());
        let cfg = OccupancyConfig::default();
        assert_eq!(
            occupancy_predicate(&square(0.0, 0.0, 10.0), &[d], &cfg).unwrap(),
            Occupancy::Occupied
        );
    }

    #[test]
    fn exact_and_raster_agree() {
        let region = square(0.0, 0.0, 10.0);
        let rep: Representation = BoundingBox::new(9.0, 5.0, 4.0, 4.0).unwrap().into();
        let exact = region_overlap_fraction(&region, &rep, &OccupancyConfig::default()).unwrap();
        assert!((exact - 0.12).abs() < 1e-12);
        // an ellipse takes the raster path
        let e: Representation = Ellipse::new(9.0, 5.0, 2.0, 2.0, 0.0).unwrap().into();
        let f = region_overlap_fraction(&region, &e, &OccupancyConfig::default()).unwrap();
        // circle of radius 2 minus the segment beyond x = 10, one unit from the center
        let segment = 4.0 * 0.5f64.acos() - 3f64.sqrt();
        let expected = (4.0 * std::f64::consts::PI - segment) / 100.0;
        assert!((f - expected).abs() < 2e-3, "{f} vs {expected}");
    }

    #[test]
    fn threshold_is_strict() {
        let region = square(0.0, 0.0, 10.0);
        // covers exactly 1% of the region
        let d = det(BoundingBox::new(-0.5, 5.0, 3.0, 1.0).unwrap().into());
        let cfg = OccupancyConfig::default();
        assert_eq!(
            occupancy_predicate(&region, std::slice::from_ref(&d), &cfg).unwrap(),
            Occupancy::Free
        );
        let lower = OccupancyConfig {
            fraction: 0.005,
            ..cfg
        };
        assert_eq!(
            occupancy_predicate(&region, &[d], &lower).unwrap(),
            Occupancy::Occupied
        );
    }

    #[test]
    fn polygon_outside_is_free() {
        let p: Representation = PolarPolygon::new(20.0, 5.0, vec![3.0; 12]).unwrap().into();
        assert_eq!(
            occupancy_predicate(
                &square(0.0, 0.0, 10.0),
                &[det(p)],
                &OccupancyConfig::default()
            )
            .unwrap(),
            Occupancy::Free
        );
    }
}
