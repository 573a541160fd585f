use std::cmp::Ordering;

use super::{InstanceMask, Representation};
use crate::error::{Error, Result};
use crate::geometry::{
    convex_intersection_area, raster_iou, rasterize, Bounds, Point2, RasterFrame, RasterGrid,
    Shape, SimplePolygon,
};

/// One side of an IoU computation.
#[derive(Debug, Clone, Copy)]
pub enum Region<'a> {
    Representation(&'a Representation),
    /// A pixel mask; cell `(x, y)` covers `[x, x+1) x [y, y+1)`.
    Mask(&'a RasterGrid),
}

impl<'a> From<&'a Representation> for Region<'a> {
    fn from(r: &'a Representation) -> Self {
        Region::Representation(r)
    }
}

impl<'a> From<&'a InstanceMask> for Region<'a> {
    fn from(m: &'a InstanceMask) -> Self {
        Region::Mask(m.grid())
    }
}

impl<'a> From<&'a RasterGrid> for Region<'a> {
    fn from(g: &'a RasterGrid) -> Self {
        Region::Mask(g)
    }
}

/// Resolution settings for the raster path.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IouConfig {
    /// Sub-cells per mask pixel along each axis when a mask is involved.
    pub supersample: usize,
    /// Cells along the longer side of the union bounds when no mask fixes
    /// the lattice.
    pub free_resolution: usize,
}

impl Default for IouConfig {
    fn default() -> Self {
        Self {
            supersample: 4,
            free_resolution: 512,
        }
    }
}

/// IoU of two regions. Box and oriented-box pairs are clipped exactly; every
/// other combination is rasterized.
pub fn representation_iou(a: Region<'_>, b: Region<'_>, cfg: &IouConfig) -> Result<f64> {
    if cfg.supersample == 0 || cfg.free_resolution == 0 {
        return Err(Error::precondition(
            "IoU raster resolution must be positive",
        ));
    }
    match (a, b) {
        (Region::Representation(ra), Region::Representation(rb)) => {
            if let (Some(pa), Some(pb)) = (rectangle(ra), rectangle(rb)) {
                // fixed operand order keeps the result bit-identical under swap
                let (pa, pb) =
                    if total_order(&operand_key(ra), &operand_key(rb)) == Ordering::Greater {
                        (pb, pa)
                    } else {
                        (pa, pb)
                    };
                return exact_convex_iou(&pa, &pb);
            }
            free_raster_iou(ra, rb, cfg.free_resolution)
        }
        (Region::Mask(ga), Region::Mask(gb)) => raster_iou(ga, gb),
        (Region::Representation(r), Region::Mask(g))
        | (Region::Mask(g), Region::Representation(r)) => mask_raster_iou(r, g, cfg.supersample),
    }
}

pub(crate) fn rectangle(r: &Representation) -> Option<SimplePolygon> {
    match r {
        Representation::Box(b) => Some(b.to_polygon()),
        Representation::OrientedBox(b) => Some(b.to_polygon()),
        _ => None,
    }
}

fn operand_key(r: &Representation) -> [f64; 6] {
    match r {
        Representation::Box(b) => [0.0, b.cx, b.cy, b.w, b.h, 0.0],
        Representation::OrientedBox(b) => [1.0, b.cx, b.cy, b.w, b.h, b.theta],
        _ => [2.0; 6],
    }
}

fn total_order(a: &[f64; 6], b: &[f64; 6]) -> Ordering {
    a.iter()
        .zip(b)
        .map(|(x, y)| x.total_cmp(y))
        .find(|o| o.is_ne())
        .unwrap_or(Ordering::Equal)
}

/// Exact IoU of two convex polygons.
pub(crate) fn exact_convex_iou(a: &SimplePolygon, b: &SimplePolygon) -> Result<f64> {
    let inter = convex_intersection_area(a, b)?;
    let union = a.area() + b.area() - inter;
    if union <= 0.0 {
        return Err(Error::UndefinedIou);
    }
    Ok((inter / union).clamp(0.0, 1.0))
}

/// Rasterizable outline; degenerate polar polygons become empty.
enum Outline {
    Empty,
    Polygon(SimplePolygon),
    Ellipse(crate::geometry::Ellipse),
}

impl Outline {
    fn of(r: &Representation) -> Result<Outline> {
        Ok(match r {
            Representation::Ellipse(e) => Outline::Ellipse(*e),
            Representation::PolarPolygon(p) => match p.to_polygon() {
                Ok(poly) => Outline::Polygon(poly),
                Err(Error::DegenerateGeometry(_)) => Outline::Empty,
                Err(e) => return Err(e),
            },
            other => Outline::Polygon(other.to_polygon(super::DEFAULT_ARC_SEGMENTS)?),
        })
    }

    fn shape(&self) -> Shape<'_> {
        match self {
            Outline::Empty => Shape::Empty,
            Outline::Polygon(p) => Shape::Polygon(p),
            Outline::Ellipse(e) => Shape::Ellipse(e),
        }
    }
}

/// Cells of `frame` covered by `r`.
pub(crate) fn rasterize_representation(
    r: &Representation,
    frame: &RasterFrame,
) -> Result<RasterGrid> {
    let outline = Outline::of(r)?;
    rasterize(&outline.shape(), frame)
}

fn union_bounds(a: Option<Bounds>, b: Option<Bounds>) -> Option<Bounds> {
    match (a, b) {
        (Some(a), Some(b)) => Some(a.union(b)),
        (a, b) => a.or(b),
    }
}

fn free_raster_iou(a: &Representation, b: &Representation, resolution: usize) -> Result<f64> {
    let (oa, ob) = (Outline::of(a)?, Outline::of(b)?);
    let (sa, sb) = (oa.shape(), ob.shape());
    let Some(bounds) = union_bounds(sa.bounds(), sb.bounds()) else {
        return Err(Error::UndefinedIou);
    };
    let side = bounds.width().max(bounds.height());
    if !(side > 0.0) {
        return Err(Error::UndefinedIou);
    }
    let cell = side / resolution as f64;
    let w = ((bounds.width() / cell).ceil() as usize).max(1);
    let h = ((bounds.height() / cell).ceil() as usize).max(1);
    let frame = RasterFrame::new(Point2::new(bounds.min_x, bounds.min_y), cell, w, h)?;
    raster_iou(&rasterize(&sa, &frame)?, &rasterize(&sb, &frame)?)
}

fn mask_raster_iou(r: &Representation, mask: &RasterGrid, factor: usize) -> Result<f64> {
    let outline = Outline::of(r)?;
    let shape = outline.shape();
    let mask_bounds = mask.occupied_bounds().map(|(x0, y0, x1, y1)| Bounds {
        min_x: x0 as f64,
        min_y: y0 as f64,
        max_x: (x1 + 1) as f64,
        max_y: (y1 + 1) as f64,
    });
    let Some(b) = union_bounds(shape.bounds(), mask_bounds) else {
        return Err(Error::UndefinedIou);
    };
    // window snapped to whole mask pixels so sub-cells nest inside them
    let (x0, y0) = (b.min_x.floor(), b.min_y.floor());
    let w = ((b.max_x.ceil() - x0) as usize).max(1);
    let h = ((b.max_y.ceil() - y0) as usize).max(1);
    let frame = RasterFrame::new(
        Point2::new(x0, y0),
        1.0 / factor as f64,
        w * factor,
        h * factor,
    )?;
    let shape_grid = rasterize(&shape, &frame)?;
    let mask_grid = mask_window(mask, x0 as i64, y0 as i64, w, h, factor)?;
    raster_iou(&shape_grid, &mask_grid)
}

/// The `w x h` pixel window at `(x0, y0)` of `mask`, each pixel expanded to
/// `factor x factor` sub-cells. Pixels outside the mask read as empty.
fn mask_window(
    mask: &RasterGrid,
    x0: i64,
    y0: i64,
    w: usize,
    h: usize,
    factor: usize,
) -> Result<RasterGrid> {
    if x0 >= 0 && y0 >= 0 {
        return mask.window_upsampled(x0 as usize, y0 as usize, w, h, factor);
    }
    let mut out = RasterGrid::new(w * factor, h * factor)?;
    for (x, y) in mask.iter_ones() {
        let (wx, wy) = (x as i64 - x0, y as i64 - y0);
        if wx < 0 || wy < 0 || wx >= w as i64 || wy >= h as i64 {
            continue;
        }
        let (ox, oy) = (wx as usize * factor, wy as usize * factor);
        for sy in 0..factor {
            out.fill_row(oy + sy, ox, ox + factor - 1);
        }
    }
    Ok(out)
}
