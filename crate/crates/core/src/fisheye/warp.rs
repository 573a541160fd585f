use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{CameraModel, Projection};
use crate::error::{Error, Result};
use crate::geometry::{Point2, RasterGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum WarpDirection {
    /// Fisheye image to projection view.
    Correct,
    /// Projection view to fisheye image.
    Distort,
}

/// Extra destination pixels around the forward-mapped footprint.
const WINDOW_MARGIN: f64 = 2.0;

struct Mapping<'a> {
    cam: &'a CameraModel,
    proj: &'a Projection,
    direction: WarpDirection,
}

impl Mapping<'_> {
    fn source_size(&self) -> (usize, usize) {
        match self.direction {
            WarpDirection::Correct => (self.cam.width(), self.cam.height()),
            WarpDirection::Distort => (self.proj.width, self.proj.height),
        }
    }

    fn dest_size(&self) -> (usize, usize) {
        match self.direction {
            WarpDirection::Correct => (self.proj.width, self.proj.height),
            WarpDirection::Distort => (self.cam.width(), self.cam.height()),
        }
    }

    /// Destination point to source point.
    fn inverse(&self, p: Point2) -> Option<Point2> {
        match self.direction {
            WarpDirection::Correct => {
                let ray = self.proj.view_to_ray(p)?;
                self.cam.project_ray(ray).ok()?
            }
            WarpDirection::Distort => {
                let ray = self.cam.unproject_point(p).ok()?;
                self.proj.ray_to_view(ray)
            }
        }
    }

    /// Source point to destination point.
    fn forward(&self, p: Point2) -> Option<Point2> {
        match self.direction {
            WarpDirection::Correct => {
                let ray = self.cam.unproject_point(p).ok()?;
                self.proj.ray_to_view(ray)
            }
            WarpDirection::Distort => {
                let ray = self.proj.view_to_ray(p)?;
                self.cam.project_ray(ray).ok()?
            }
        }
    }
}

/// Resamples a binary mask between the fisheye image and a projection view.
/// Each destination cell takes the value of the source cell containing the
/// inverse image of its center (nearest neighbor).
pub fn warp_mask(
    mask: &RasterGrid,
    cam: &CameraModel,
    proj: &Projection,
    direction: WarpDirection,
) -> Result<RasterGrid> {
    let map = Mapping {
        cam,
        proj,
        direction,
    };
    let (sw, sh) = map.source_size();
    if (mask.width(), mask.height()) != (sw, sh) {
        return Err(Error::precondition(format!(
            "mask is {}x{} but the source image is {sw}x{sh}",
            mask.width(),
            mask.height()
        )));
    }
    let window = footprint(mask, &map);
    resample(mask, &map, window)
}

/// Destination window `(x0, y0, x1, y1)` (exclusive end) holding every cell
/// the mask can map to, from the forward images of its boundary cells'
/// corners.
fn footprint(mask: &RasterGrid, map: &Mapping<'_>) -> Option<(usize, usize, usize, usize)> {
    let (dw, dh) = map.dest_size();
    let (mut lo_x, mut lo_y, mut hi_x, mut hi_y) = (f64::MAX, f64::MAX, f64::MIN, f64::MIN);
    let (w, h) = (mask.width(), mask.height());
    let occupied = |x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && mask.get(x as usize, y as usize)
    };
    for (x, y) in mask.iter_ones() {
        let (xi, yi) = (x as i64, y as i64);
        let interior = occupied(xi - 1, yi)
            && occupied(xi + 1, yi)
            && occupied(xi, yi - 1)
            && occupied(xi, yi + 1);
        if interior {
            continue;
        }
        for (cx, cy) in [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0), (1.0, 1.0), (0.5, 0.5)] {
            if let Some(q) = map.forward(Point2::new(x as f64 + cx, y as f64 + cy)) {
                if q.is_finite() {
                    lo_x = lo_x.min(q.x);
                    lo_y = lo_y.min(q.y);
                    hi_x = hi_x.max(q.x);
                    hi_y = hi_y.max(q.y);
                }
            }
        }
    }
    if lo_x > hi_x {
        return None;
    }
    let clamp = |v: f64, n: usize| v.clamp(0.0, n as f64) as usize;
    let x0 = clamp((lo_x - WINDOW_MARGIN).floor(), dw);
    let y0 = clamp((lo_y - WINDOW_MARGIN).floor(), dh);
    let x1 = clamp((hi_x + WINDOW_MARGIN).ceil(), dw);
    let y1 = clamp((hi_y + WINDOW_MARGIN).ceil(), dh);
    (x0 < x1 && y0 < y1).then_some((x0, y0, x1, y1))
}

fn resample(
    mask: &RasterGrid,
    map: &Mapping<'_>,
    window: Option<(usize, usize, usize, usize)>,
) -> Result<RasterGrid> {
    let (dw, dh) = map.dest_size();
    let mut out = RasterGrid::new(dw, dh)?;
    let Some((x0, y0, x1, y1)) = window else {
        return Ok(out);
    };
    let rows: Vec<Vec<usize>> = (y0..y1)
        .into_par_iter()
        .map(|y| {
            (x0..x1)
                .filter(|&x| {
                    map.inverse(Point2::new(x as f64 + 0.5, y as f64 + 0.5))
                        .filter(|s| s.x >= 0.0 && s.y >= 0.0)
                        .map(|s| (s.x.floor() as usize, s.y.floor() as usize))
                        .is_some_and(|(sx, sy)| {
                            sx < mask.width() && sy < mask.height() && mask.get(sx, sy)
                        })
                })
                .collect()
        })
        .collect();
    for (dy, xs) in rows.into_iter().enumerate() {
        for x in xs {
            out.set(x, y0 + dy, true);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fisheye::ProjectionKind;
    use crate::geometry::raster_iou;
    use crate::representations::{representation_iou, IouConfig, Representation};

    fn disk(w: usize, h: usize, cx: f64, cy: f64, r: f64) -> RasterGrid {
        RasterGrid::from_fn(w, h, |x, y| {
            (x as f64 + 0.5 - cx).hypot(y as f64 + 0.5 - cy) <= r
        })
        .unwrap()
    }

    fn full_scan(
        mask: &RasterGrid,
        cam: &CameraModel,
        proj: &Projection,
        direction: WarpDirection,
    ) -> RasterGrid {
        let map = Mapping {
            cam,
            proj,
            direction,
        };
        let (dw, dh) = map.dest_size();
        resample(mask, &map, Some((0, 0, dw, dh))).unwrap()
    }

    #[test]
    fn near_identity() {
        // pure k1 = focal, narrow view: r = f*theta vs f*tan(theta)
        let proj = Projection::new(ProjectionKind::Rectilinear, 400.0, 40.0, 40.0).unwrap();
        let cam = CameraModel::new(
            [400.0, 0.0, 0.0, 0.0],
            Point2::new(proj.width as f64 / 2.0, proj.height as f64 / 2.0),
            proj.width,
            proj.height,
            1.0,
        )
        .unwrap();
        let c = proj.width as f64 / 2.0;
        let m = disk(proj.width, proj.height, c + 20.0, c - 10.0, 40.0);
        let warped = warp_mask(&m, &cam, &proj, WarpDirection::Distort).unwrap();
        assert!(raster_iou(&m, &warped).unwrap() >= 0.98);
    }

    #[test]
    fn distort_then_correct() {
        let cam = CameraModel::default();
        let proj = Projection::new(ProjectionKind::Rectilinear, 256.0, 90.0, 90.0).unwrap();
        assert_eq!((proj.width, proj.height), (512, 512));
        let m = disk(512, 512, 256.0, 256.0, 120.0);
        let fish = warp_mask(&m, &cam, &proj, WarpDirection::Distort).unwrap();
        let back = warp_mask(&fish, &cam, &proj, WarpDirection::Correct).unwrap();
        assert!(raster_iou(&m, &back).unwrap() >= 0.95);
    }

    #[test]
    fn window_matches_full_scan() {
        let cam = CameraModel::default();
        let proj = Projection::new(ProjectionKind::Cylindrical, 200.0, 160.0, 100.0).unwrap();
        let m = disk(proj.width, proj.height, 100.0, 80.0, 30.0);
        let fish = warp_mask(&m, &cam, &proj, WarpDirection::Distort).unwrap();
        assert_eq!(fish, full_scan(&m, &cam, &proj, WarpDirection::Distort));
        let back = warp_mask(&fish, &cam, &proj, WarpDirection::Correct).unwrap();
        assert_eq!(back, full_scan(&fish, &cam, &proj, WarpDirection::Correct));
    }

    #[test]
    fn distortion_bends_a_vertical_bar() {
        let cam = CameraModel::default();
        let proj = Projection::new(ProjectionKind::Rectilinear, 300.0, 140.0, 120.0).unwrap();
        let cx = proj.width as f64 / 2.0;
        let cy = proj.height as f64 / 2.0;
        let bar = RasterGrid::from_fn(proj.width, proj.height, |x, y| {
            let (x, y) = (x as f64 + 0.5, y as f64 + 0.5);
            (x - (cx + 350.0)).abs() <= 8.0 && (y - cy).abs() <= 250.0
        })
        .unwrap();
        let box_iou = |g: &RasterGrid| {
            let b: Representation = crate::representations::convert::grid_bounding_box(g)
                .unwrap()
                .into();
            representation_iou((&b).into(), g.into(), &IouConfig::default()).unwrap()
        };
        let straight = box_iou(&bar);
        let fish = warp_mask(&bar, &cam, &proj, WarpDirection::Distort).unwrap();
        let bent = box_iou(&fish);
        assert!((straight - 1.0).abs() < 1e-12);
        assert!(bent < straight, "{bent}");
    }

    #[test]
    fn empty_mask_stays_empty() {
        let cam = CameraModel::default();
        let proj = Projection::new(ProjectionKind::Rectilinear, 100.0, 60.0, 60.0).unwrap();
        let m = RasterGrid::new(proj.width, proj.height).unwrap();
        assert!(warp_mask(&m, &cam, &proj, WarpDirection::Distort)
            .unwrap()
            .is_empty());
    }
}
