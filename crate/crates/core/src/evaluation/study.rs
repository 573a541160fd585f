use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::representations::{
    convert_mask, representation_iou, InstanceMask, IouConfig, RepresentationSpec,
};

/// Mean IoU between each mask and its own conversion, per representation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct UpperBoundTable {
    pub specs: Vec<RepresentationSpec>,
    pub mean_iou: Vec<f64>,
    pub instances: usize,
}

impl UpperBoundTable {
    pub fn labels(&self) -> Vec<String> {
        self.specs.iter().map(|s| s.label()).collect()
    }

    pub fn get(&self, spec: RepresentationSpec) -> Option<f64> {
        self.specs
            .iter()
            .position(|s| *s == spec)
            .map(|i| self.mean_iou[i])
    }
}

/// Converts every mask to every spec and averages the IoU with the mask.
/// Masks are processed in parallel; the sums run in mask order so the result
/// does not depend on the thread count.
pub fn upper_bound_study(
    masks: &[InstanceMask],
    specs: &[RepresentationSpec],
    cfg: &IouConfig,
) -> Result<UpperBoundTable> {
    if masks.is_empty() {
        return Err(Error::precondition(
            "upper-bound study needs at least one mask",
        ));
    }
    if specs.is_empty() {
        return Err(Error::precondition(
            "upper-bound study needs at least one representation",
        ));
    }
    let rows: Vec<Vec<f64>> = masks
        .par_iter()
        .map(|m| {
            specs
                .iter()
                .map(|&s| {
                    let rep = convert_mask(m, s)?;
                    representation_iou((&rep).into(), m.into(), cfg)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<_>>()?;
    let mut sums = vec![0.0; specs.len()];
    for row in &rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    Ok(UpperBoundTable {
        specs: specs.to_vec(),
        mean_iou: sums.into_iter().map(|s| s / masks.len() as f64).collect(),
        instances: masks.len(),
    })
}
