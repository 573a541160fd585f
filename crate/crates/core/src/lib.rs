//! Geometry and evaluation toolkit for object-detection output representations
//! on fisheye cameras.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: points, simple polygons, convex clipping, rasterization and
//!   raster IoU. Everything else builds on it.
//! - [`representations`]: axis-aligned boxes, oriented boxes, ellipses and polar
//!   polygons, their construction from instance masks and the IoU between any
//!   two of them (or a representation and a mask).
//! - [`losses`]: the YOLO-style regression loss family for the four detection
//!   heads, anchor decoding, analytic gradients and a finite-difference audit.
//! - [`evaluation`]: NMS, greedy matching, all-point AP/mAP in the two
//!   evaluation modes, the representation upper-bound study and the parking
//!   occupancy predicate.
//! - [`fisheye`]: 4th-order radial polynomial fisheye model, rectilinear,
//!   cylindrical and piecewise-linear correction views, and mask warping.
//! - [`dataset`]: RLE masks, versioned JSON schemas, the seeded synthetic scene
//!   generator and corpus splitting.
//!
//! Coordinates are continuous pixels in an image frame with `y` pointing down.
//! Angles are degrees measured from `+x`, positive rotation turning `+x` toward
//! `+y`.

// `!(x > 0.0)` style checks are meant to reject NaN too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod fisheye;
pub mod geometry;
pub mod losses;
pub mod representations;

pub use error::{Error, Result};
pub use geometry::{Point2, RasterGrid, SimplePolygon};
pub use representations::{
    BoundingBox, ClassLabel, Ellipse, InstanceMask, OrientedBox, PolarPolygon, Representation,
};
