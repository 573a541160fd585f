//! Grid-based regression losses for the four detection heads, the anchor
//! decode they rely on, and analytic gradients.
//!
//! Slot `cell * B + anchor` with `cell = row * S + col` holds the prediction
//! and target of anchor `anchor` in grid cell `(col, row)`. Centers and sizes
//! are in grid units: cell `(col, row)` decodes its center at
//! `(col + f_x, row + f_y)`.

pub mod audit;
mod terms;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representations::BoundingBox;

pub use terms::{
    loss_class, loss_gradient, loss_obj, loss_orientation, loss_polygon, loss_total, loss_wh,
    loss_xy, CellGradient, LossBreakdown,
};

/// Clamp applied before every logarithm.
pub const LOG_EPS: f64 = 1e-7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    /// Cells per side.
    pub s: usize,
    /// Anchor `(a_w, a_h)` per slot within a cell.
    pub anchors: Vec<(f64, f64)>,
}

impl GridSpec {
    pub fn new(s: usize, anchors: Vec<(f64, f64)>) -> Result<Self> {
        if s == 0 {
            return Err(Error::precondition("grid needs at least one cell per side"));
        }
        if anchors.is_empty() {
            return Err(Error::precondition("grid needs at least one anchor"));
        }
        if anchors
            .iter()
            .any(|&(w, h)| !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()))
        {
            return Err(Error::precondition("anchor dimensions must be positive"));
        }
        Ok(Self { s, anchors })
    }

    pub fn anchors_per_cell(&self) -> usize {
        self.anchors.len()
    }

    pub fn slot_count(&self) -> usize {
        self.s * self.s * self.anchors.len()
    }

    /// Cell `(g_x, g_y)` and anchor of a slot.
    pub fn slot(&self, index: usize) -> ((f64, f64), (f64, f64)) {
        let b = self.anchors.len();
        let cell = index / b;
        let (col, row) = (cell % self.s, cell / self.s);
        ((col as f64, row as f64), self.anchors[index % b])
    }
}

/// Raw network outputs for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellPrediction {
    pub fx: f64,
    pub fy: f64,
    pub fw: f64,
    pub fh: f64,
    pub objectness: f64,
    pub class_scores: Vec<f64>,
    /// Orientation normalized to `[-1, 1]` (oriented-box and ellipse heads).
    pub theta: Option<f64>,
    /// Polar radii (polygon head).
    pub radii: Option<Vec<f64>>,
}

impl CellPrediction {
    /// Checks the documented ranges: objectness in `[0, 1]`, class scores on
    /// the simplex within `1e-6`, theta in `[-1, 1]`, radii non-negative.
    pub fn validate(&self) -> Result<()> {
        let all = [self.fx, self.fy, self.fw, self.fh, self.objectness];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::precondition("prediction offsets must be finite"));
        }
        if !(0.0..=1.0).contains(&self.objectness) {
            return Err(Error::precondition(format!(
                "objectness {} outside [0, 1]",
                self.objectness
            )));
        }
        if self.class_scores.is_empty()
            || self.class_scores.iter().any(|p| !(0.0..=1.0).contains(p))
        {
            return Err(Error::precondition("class scores must lie in [0, 1]"));
        }
        let sum: f64 = self.class_scores.iter().sum();
        if (sum - 1.0).abs() > 1e-6 {
            return Err(Error::precondition(format!(
                "class scores sum to {sum}, not 1"
            )));
        }
        check_theta(self.theta)?;
        if let Some(r) = &self.radii {
            if r.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::precondition("predicted radii must be non-negative"));
            }
        }
        Ok(())
    }
}

/// Ground truth for one slot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellTarget {
    /// Whether this slot is responsible for an object.
    pub has_object: bool,
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
    /// Objectness target, 0 or 1.
    pub confidence: f64,
    /// One-hot class vector.
    pub class: Vec<f64>,
    pub theta: Option<f64>,
    pub radii: Option<Vec<f64>>,
}

impl CellTarget {
    /// A slot without an object.
    pub fn background(classes: usize) -> Self {
        Self {
            has_object: false,
            x: 0.0,
            y: 0.0,
            w: 0.0,
            h: 0.0,
            confidence: 0.0,
            class: vec![0.0; classes],
            theta: None,
            radii: None,
        }
    }

    /// A slot holding `bbox` of class `class` out of `classes`.
    pub fn object(bbox: &BoundingBox, class: usize, classes: usize) -> Result<Self> {
        if class >= classes {
            return Err(Error::precondition(format!(
                "class index {class} out of {classes}"
            )));
        }
        let mut one_hot = vec![0.0; classes];
        one_hot[class] = 1.0;
        Ok(Self {
            has_object: true,
            x: bbox.cx,
            y: bbox.cy,
            w: bbox.w,
            h: bbox.h,
            confidence: 1.0,
            class: one_hot,
            theta: None,
            radii: None,
        })
    }
}

pub(crate) fn check_theta(theta: Option<f64>) -> Result<()> {
    match theta {
        Some(t) if !(-1.0..=1.0).contains(&t) => Err(Error::precondition(format!(
            "normalized angle {t} outside [-1, 1]"
        ))),
        _ => Ok(()),
    }
}

/// Maps degrees in `[-180, 180]` to `[-1, 1]`.
pub fn normalize_angle(theta_deg: f64) -> Result<f64> {
    if !(-180.0..=180.0).contains(&theta_deg) {
        return Err(Error::precondition(format!(
            "angle {theta_deg} deg outside [-180, 180]"
        )));
    }
    Ok(theta_deg / 180.0)
}

/// Divides radii by the image diagonal so they fall in `[0, 1]`.
pub fn normalize_radii(radii: &[f64], image_width: f64, image_height: f64) -> Result<Vec<f64>> {
    let diag = image_width.hypot(image_height);
    if !(diag > 0.0 && diag.is_finite()) {
        return Err(Error::precondition("image size must be positive"));
    }
    Ok(radii.iter().map(|r| r / diag).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Head {
    Box,
    Oriented,
    Ellipse,
    Polygon,
}

impl Head {
    pub const ALL: [Head; 4] = [Head::Box, Head::Oriented, Head::Ellipse, Head::Polygon];

    pub fn as_str(&self) -> &'static str {
        match self {
            Head::Box => "box",
            Head::Oriented => "oriented",
            Head::Ellipse => "ellipse",
            Head::Polygon => "polygon",
        }
    }
}

/// Objectness term form.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum ObjectnessLoss {
    /// `-[C log Ĉ + (1 - C) log(1 - Ĉ)]` over every slot.
    #[default]
    FullBce,
    /// Only `-C log Ĉ`, which ignores background slots.
    PositiveOnly,
}

/// How the vertical center is decoded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum CenterDecode {
    /// `ŷ = g_y + f_y`, mirroring the horizontal decode.
    #[default]
    Offset,
    /// `ĥ = g_y * f_y` with `ŷ = g_y`, read verbatim from the formula that
    /// appears to be a typo. Only offered by [`decode_anchor`] for auditing.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct LossConfig {
    pub lambda_coord: f64,
    pub objectness: ObjectnessLoss,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            lambda_coord: 5.0,
            objectness: ObjectnessLoss::FullBce,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_coord > 0.0 && self.lambda_coord.is_finite()) {
            return Err(Error::precondition("lambda_coord must be positive"));
        }
        Ok(())
    }
}

/// Box decoded from a slot's offsets: `ŵ = a_w e^{f_w}`, `ĥ = a_h e^{f_h}`,
/// `x̂ = g_x + f_x`, `ŷ = g_y + f_y`.
pub fn decode_anchor(
    pred: &CellPrediction,
    cell: (f64, f64),
    anchor: (f64, f64),
    mode: CenterDecode,
) -> Result<BoundingBox> {
    if !(anchor.0 > 0.0 && anchor.1 > 0.0) {
        return Err(Error::precondition("anchor dimensions must be positive"));
    }
    let w = anchor.0 * pred.fw.exp();
    let (cy, h) = match mode {
        CenterDecode::Offset => (cell.1 + pred.fy, anchor.1 * pred.fh.exp()),
        CenterDecode::Literal => (cell.1, cell.1 * pred.fy),
    };
    let cx = cell.0 + pred.fx;
    if ![cx, cy, w, h].iter().all(|v| v.is_finite()) {
        return Err(Error::NumericRange(format!(
            "decoded box is not finite (f_w = {}, f_h = {})",
            pred.fw, pred.fh
        )));
    }
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::NumericRange(format!(
            "decoded box has size {w} x {h}"
        )));
    }
    BoundingBox::new(cx, cy, w, h)
}

/// Offsets `(f_x, f_y, f_w, f_h)` that decode to `bbox`.
pub fn encode_anchor(
    bbox: &BoundingBox,
    cell: (f64, f64),
    anchor: (f64, f64),
) -> Result<(f64, f64, f64, f64)> {
    if !(anchor.0 > 0.0 && anchor.1 > 0.0) {
        return Err(Error::precondition("anchor dimensions must be positive"));
    }
    Ok((
        bbox.cx - cell.0,
        bbox.cy - cell.1,
        (bbox.w / anchor.0).ln(),
        (bbox.h / anchor.1).ln(),
    ))
}
