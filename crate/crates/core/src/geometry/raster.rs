use bitvec::prelude::*;

use super::{Bounds, Ellipse, Point2, SimplePolygon};
use crate::error::{Error, Result};

/// Placement of a raster grid in continuous coordinates: cell `(ix, iy)` has
/// its center at `origin + ((ix + 0.5) * cell_size, (iy + 0.5) * cell_size)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RasterFrame {
    pub origin: Point2,
    pub cell_size: f64,
    pub width: usize,
    pub height: usize,
}

impl RasterFrame {
    pub fn new(origin: Point2, cell_size: f64, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::precondition(format!(
                "raster grid must be at least 1x1, got {width}x{height}"
            )));
        }
        if !(cell_size > 0.0 && cell_size.is_finite()) || !origin.is_finite() {
            return Err(Error::precondition(
                "raster cell size must be positive and finite",
            ));
        }
        Ok(Self {
            origin,
            cell_size,
            width,
            height,
        })
    }

    /// One cell per pixel, origin at the image corner.
    pub fn pixels(width: usize, height: usize) -> Result<Self> {
        Self::new(Point2::new(0.0, 0.0), 1.0, width, height)
    }

    pub fn cell_center(&self, ix: usize, iy: usize) -> Point2 {
        Point2::new(
            self.origin.x + (ix as f64 + 0.5) * self.cell_size,
            self.origin.y + (iy as f64 + 0.5) * self.cell_size,
        )
    }

    pub fn cell_area(&self) -> f64 {
        self.cell_size * self.cell_size
    }

    /// Inclusive range of cell indices along one axis whose centers lie in
    /// `[lo, hi]`, clipped to `0..n`.
    fn index_span(origin: f64, cs: f64, n: usize, lo: f64, hi: f64) -> Option<(usize, usize)> {
        let a = ((lo - origin) / cs - 0.5).ceil();
        let b = ((hi - origin) / cs - 0.5).floor();
        let a = a.max(0.0);
        let b = b.min(n as f64 - 1.0);
        if a > b || !a.is_finite() || !b.is_finite() {
            return None;
        }
        Some((a as usize, b as usize))
    }

    fn x_span(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        Self::index_span(self.origin.x, self.cell_size, self.width, lo, hi)
    }

    fn y_span(&self, lo: f64, hi: f64) -> Option<(usize, usize)> {
        Self::index_span(self.origin.y, self.cell_size, self.height, lo, hi)
    }
}

/// Binary occupancy raster, one bit per cell, row-major.
#[derive(Clone, PartialEq, Eq)]
pub struct RasterGrid {
    width: usize,
    height: usize,
    bits: BitVec<u64, Lsb0>,
}

impl std::fmt::Debug for RasterGrid {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RasterGrid")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("occupied", &self.count_ones())
            .finish()
    }
}

impl RasterGrid {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::precondition(format!(
                "raster grid must be at least 1x1, got {width}x{height}"
            )));
        }
        Ok(Self {
            width,
            height,
            bits: bitvec![u64, Lsb0; 0; width * height],
        })
    }

    /// Builds a grid from a predicate evaluated at every cell.
    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self> {
        let mut g = Self::new(width, height)?;
        for y in 0..height {
            for x in 0..width {
                if f(x, y) {
                    g.set(x, y, true);
                }
            }
        }
        Ok(g)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        x < self.width && y < self.height && self.bits[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        assert!(
            x < self.width && y < self.height,
            "cell ({x},{y}) out of grid"
        );
        self.bits.set(y * self.width + x, v);
    }

    /// Marks cells `x0..=x1` of row `y`.
    pub fn fill_row(&mut self, y: usize, x0: usize, x1: usize) {
        let start = y * self.width;
        self.bits[start + x0..=start + x1].fill(true);
    }

    pub fn count_ones(&self) -> usize {
        self.bits.count_ones()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.not_any()
    }

    /// Occupied cells as `(x, y)` in row-major order.
    pub fn iter_ones(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let w = self.width;
        self.bits.iter_ones().map(move |i| (i % w, i / w))
    }

    /// Inclusive cell-index bounds `(min_x, min_y, max_x, max_y)` of the
    /// occupied cells.
    pub fn occupied_bounds(&self) -> Option<(usize, usize, usize, usize)> {
        let mut it = self.iter_ones();
        let (x, y) = it.next()?;
        let init = (x, y, x, y);
        Some(it.fold(init, |(a, b, c, d), (x, y)| {
            (a.min(x), b.min(y), c.max(x), d.max(y))
        }))
    }

    /// Per-row inclusive `(y, min_x, max_x)` extent of occupied cells.
    pub fn row_extents(&self) -> Vec<(usize, usize, usize)> {
        let mut out: Vec<(usize, usize, usize)> = Vec::new();
        for (x, y) in self.iter_ones() {
            match out.last_mut() {
                Some(last) if last.0 == y => last.2 = x,
                _ => out.push((y, x, x)),
            }
        }
        out
    }

    /// Each cell becomes a `factor x factor` block.
    pub fn upsample(&self, factor: usize) -> Result<RasterGrid> {
        self.window_upsampled(0, 0, self.width, self.height, factor)
    }

    /// Crops the window `[x0, x0 + w) x [y0, y0 + h)` (cells outside the grid
    /// read as empty) and upsamples it by `factor`.
    pub fn window_upsampled(
        &self,
        x0: usize,
        y0: usize,
        w: usize,
        h: usize,
        factor: usize,
    ) -> Result<RasterGrid> {
        if factor == 0 {
            return Err(Error::precondition("upsampling factor must be >= 1"));
        }
        let mut out = RasterGrid::new(w * factor, h * factor)?;
        for wy in 0..h {
            let y = y0 + wy;
            if y >= self.height {
                break;
            }
            let row = &self.bits[y * self.width..(y + 1) * self.width];
            let x_end = (x0 + w).min(self.width);
            if x0 >= x_end {
                continue;
            }
            for x in row[x0..x_end].iter_ones().map(|i| i + x0) {
                let ox = (x - x0) * factor;
                for sy in 0..factor {
                    out.fill_row(wy * factor + sy, ox, ox + factor - 1);
                }
            }
        }
        Ok(out)
    }

    fn check_same_shape(&self, other: &RasterGrid) -> Result<()> {
        if self.width != other.width || self.height != other.height {
            return Err(Error::precondition(format!(
                "raster dimensions differ: {}x{} vs {}x{}",
                self.width, self.height, other.width, other.height
            )));
        }
        Ok(())
    }

    pub fn intersection_count(&self, other: &RasterGrid) -> Result<usize> {
        self.check_same_shape(other)?;
        Ok(self
            .bits
            .as_raw_slice()
            .iter()
            .zip(other.bits.as_raw_slice())
            .map(|(a, b)| (a & b).count_ones() as usize)
            .sum())
    }

    pub fn union_count(&self, other: &RasterGrid) -> Result<usize> {
        self.check_same_shape(other)?;
        Ok(self
            .bits
            .as_raw_slice()
            .iter()
            .zip(other.bits.as_raw_slice())
            .map(|(a, b)| (a | b).count_ones() as usize)
            .sum())
    }
}

/// Anything that can be rasterized.
#[derive(Debug, Clone, Copy)]
pub enum Shape<'a> {
    Empty,
    Polygon(&'a SimplePolygon),
    Ellipse(&'a Ellipse),
}

impl Shape<'_> {
    pub fn bounds(&self) -> Option<Bounds> {
        match self {
            Shape::Empty => None,
            Shape::Polygon(p) => Some(p.bounds()),
            Shape::Ellipse(e) => Some(e.bounds()),
        }
    }
}

/// Marks every cell of `frame` whose center lies inside `shape` (even-odd rule
/// for polygons, boundary inclusive; quadratic form `<= 1` for ellipses).
/// Parts of the shape outside the frame are clipped.
pub fn rasterize(shape: &Shape<'_>, frame: &RasterFrame) -> Result<RasterGrid> {
    let mut grid = RasterGrid::new(frame.width, frame.height)?;
    match shape {
        Shape::Empty => {}
        Shape::Polygon(p) => fill_polygon(&mut grid, p, frame),
        Shape::Ellipse(e) => fill_ellipse(&mut grid, e, frame),
    }
    Ok(grid)
}

fn fill_polygon(grid: &mut RasterGrid, poly: &SimplePolygon, frame: &RasterFrame) {
    let b = poly.bounds();
    let Some((y0, y1)) = frame.y_span(b.min_y, b.max_y) else {
        return;
    };
    let mut xs: Vec<f64> = Vec::with_capacity(poly.len());
    for iy in y0..=y1 {
        let y = frame.cell_center(0, iy).y;
        xs.clear();
        for (p, q) in poly.edges() {
            if (p.y <= y) != (q.y <= y) {
                xs.push(p.x + (y - p.y) * (q.x - p.x) / (q.y - p.y));
            } else if p.y == y && q.y == y {
                // horizontal edge on the scanline: boundary, inside
                if let Some((a, c)) = frame.x_span(p.x.min(q.x), p.x.max(q.x)) {
                    grid.fill_row(iy, a, c);
                }
            }
        }
        xs.sort_by(f64::total_cmp);
        for pair in xs.chunks_exact(2) {
            if let Some((a, c)) = frame.x_span(pair[0], pair[1]) {
                grid.fill_row(iy, a, c);
            }
        }
    }
    // vertices landing exactly on a cell center
    for v in poly.vertices() {
        if let (Some((a, _)), Some((c, _))) = (frame.x_span(v.x, v.x), frame.y_span(v.y, v.y)) {
            grid.set(a, c, true);
        }
    }
}

fn fill_ellipse(grid: &mut RasterGrid, e: &Ellipse, frame: &RasterFrame) {
    let b = e.bounds();
    let Some((y0, y1)) = frame.y_span(b.min_y, b.max_y) else {
        return;
    };
    let (s, c) = e.theta.to_radians().sin_cos();
    let ia = 1.0 / (e.semi_major * e.semi_major);
    let ib = 1.0 / (e.semi_minor * e.semi_minor);
    let qa = c * c * ia + s * s * ib;
    let cs = frame.cell_size;
    for iy in y0..=y1 {
        let dy = frame.cell_center(0, iy).y - e.cy;
        let qb = 2.0 * dy * c * s * (ia - ib);
        let qc = dy * dy * (s * s * ia + c * c * ib) - 1.0;
        let disc = qb * qb - 4.0 * qa * qc;
        if disc < 0.0 {
            continue;
        }
        let root = disc.sqrt();
        let lo = e.cx + (-qb - root) / (2.0 * qa) - cs;
        let hi = e.cx + (-qb + root) / (2.0 * qa) + cs;
        let Some((a, z)) = frame.x_span(lo, hi) else {
            continue;
        };
        for ix in a..=z {
            if e.contains(frame.cell_center(ix, iy)) {
                grid.set(ix, iy, true);
            }
        }
    }
}

/// `|a ∩ b| / |a ∪ b|` over two grids of the same dimensions.
pub fn raster_iou(a: &RasterGrid, b: &RasterGrid) -> Result<f64> {
    let inter = a.intersection_count(b)?;
    let union = a.union_count(b)?;
    if union == 0 {
        return Err(Error::UndefinedIou);
    }
    Ok(inter as f64 / union as f64)
}
