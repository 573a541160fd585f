//! Finite-difference audit of the analytic loss gradients.
//!
//! Each trial draws a random grid, predictions and targets, then compares
//! every analytic partial against a central difference of [`loss_total`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    loss_gradient, loss_total, CellGradient, CellPrediction, CellTarget, GridSpec, Head, LossConfig,
};
use crate::error::Result;

/// Central-difference step.
pub const FD_STEP: f64 = 1e-5;

/// Pass threshold on the relative error.
pub const MAX_RELATIVE_ERROR: f64 = 1e-5;

/// Denominator floor of the relative error, so partials that are
/// analytically zero compare on an absolute scale.
pub const RELATIVE_FLOOR: f64 = 1e-3;

const CLASSES: usize = 2;
const RAYS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct AuditReport {
    pub head: Head,
    pub trials: usize,
    pub partials_checked: usize,
    pub max_relative_error: f64,
    /// Description of the worst partial.
    pub worst: String,
}

impl AuditReport {
    pub fn passed(&self) -> bool {
        self.max_relative_error <= MAX_RELATIVE_ERROR
    }
}

/// Relative error with the denominator floored at [`RELATIVE_FLOOR`].
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(RELATIVE_FLOOR)
}

/// Named scalar fields of a prediction, in a fixed order.
fn parameter_count(p: &CellPrediction) -> usize {
    5 + p.class_scores.len() + p.theta.map_or(0, |_| 1) + p.radii.as_ref().map_or(0, |r| r.len())
}

fn parameter_mut(p: &mut CellPrediction, k: usize) -> (&'static str, &mut f64) {
    let nc = p.class_scores.len();
    match k {
        0 => ("fx", &mut p.fx),
        1 => ("fy", &mut p.fy),
        2 => ("fw", &mut p.fw),
        3 => ("fh", &mut p.fh),
        4 => ("objectness", &mut p.objectness),
        k if k < 5 + nc => ("class", &mut p.class_scores[k - 5]),
        k => {
            let k = k - 5 - nc;
            match (&mut p.theta, &mut p.radii) {
                (Some(t), _) if k == 0 => ("theta", t),
                (Some(_), Some(r)) => ("radius", &mut r[k - 1]),
                (None, Some(r)) => ("radius", &mut r[k]),
                _ => unreachable!("parameter index out of range"),
            }
        }
    }
}

fn gradient_entry(g: &CellGradient, k: usize) -> f64 {
    let nc = g.class_scores.len();
    match k {
        0 => g.fx,
        1 => g.fy,
        2 => g.fw,
        3 => g.fh,
        4 => g.objectness,
        k if k < 5 + nc => g.class_scores[k - 5],
        k => {
            let k = k - 5 - nc;
            match (g.theta, &g.radii) {
                (Some(t), _) if k == 0 => t,
                (Some(_), Some(r)) => r[k - 1],
                (None, Some(r)) => r[k],
                _ => unreachable!("parameter index out of range"),
            }
        }
    }
}

/// A random problem for `head`, kept away from clamp boundaries and the
/// `[-1, 1]` angle limits so central differences stay valid.
pub fn random_problem(
    rng: &mut ChaCha8Rng,
    head: Head,
) -> (GridSpec, Vec<CellPrediction>, Vec<CellTarget>) {
    let s = rng.random_range(1..=3);
    let b = rng.random_range(1..=3);
    let anchors = (0..b)
        .map(|_| (rng.random_range(0.5..4.0), rng.random_range(0.5..4.0)))
        .collect();
    let grid = GridSpec::new(s, anchors).expect("valid random grid");
    let with_theta = matches!(head, Head::Oriented | Head::Ellipse);
    let with_radii = head == Head::Polygon;
    let mut preds = Vec::new();
    let mut targets = Vec::new();
    for i in 0..grid.slot_count() {
        let ((gx, gy), _) = grid.slot(i);
        let p0: f64 = rng.random_range(0.1..0.9);
        preds.push(CellPrediction {
            fx: rng.random_range(-0.5..1.5),
            fy: rng.random_range(-0.5..1.5),
            fw: rng.random_range(-1.0..1.0),
            fh: rng.random_range(-1.0..1.0),
            objectness: rng.random_range(0.05..0.95),
            class_scores: vec![p0, 1.0 - p0],
            theta: with_theta.then(|| rng.random_range(-0.9..0.9)),
            radii: with_radii.then(|| (0..RAYS).map(|_| rng.random_range(0.0..1.0)).collect()),
        });
        let on = rng.random_bool(0.5);
        let class = rng.random_range(0..CLASSES);
        let mut one_hot = vec![0.0; CLASSES];
        one_hot[class] = 1.0;
        targets.push(CellTarget {
            has_object: on,
            x: gx + rng.random_range(0.0..1.0),
            y: gy + rng.random_range(0.0..1.0),
            w: rng.random_range(0.2..8.0),
            h: rng.random_range(0.2..8.0),
            confidence: if on { 1.0 } else { 0.0 },
            class: one_hot,
            theta: with_theta.then(|| rng.random_range(-1.0..=1.0)),
            radii: with_radii.then(|| (0..RAYS).map(|_| rng.random_range(0.0..1.0)).collect()),
        });
    }
    (grid, preds, targets)
}

/// Runs `trials` random problems for `head` seeded by `seed`.
pub fn gradient_audit(
    seed: u64,
    trials: usize,
    head: Head,
    cfg: &LossConfig,
) -> Result<AuditReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = AuditReport {
        head,
        trials,
        partials_checked: 0,
        max_relative_error: 0.0,
        worst: String::new(),
    };
    for trial in 0..trials {
        let (grid, mut preds, targets) = random_problem(&mut rng, head);
        let grads = loss_gradient(&preds, &targets, &grid, cfg, head)?;
        for i in 0..preds.len() {
            for k in 0..parameter_count(&preds[i]) {
                let (name, v) = parameter_mut(&mut preds[i], k);
                let orig = *v;
                *v = orig + FD_STEP;
                let plus = loss_total(&preds, &targets, &grid, cfg, head)?.total;
                let (_, v) = parameter_mut(&mut preds[i], k);
                *v = orig - FD_STEP;
                let minus = loss_total(&preds, &targets, &grid, cfg, head)?.total;
                let (_, v) = parameter_mut(&mut preds[i], k);
                *v = orig;
                let numeric = (plus - minus) / (2.0 * FD_STEP);
                let analytic = gradient_entry(&grads[i], k);
                let err = relative_error(analytic, numeric);
                report.partials_checked += 1;
                if err > report.max_relative_error || report.worst.is_empty() {
                    report.max_relative_error = report.max_relative_error.max(err);
                    report.worst = format!(
                        "trial {trial}, slot {i}, {name}: analytic {analytic:.9e}, numeric {numeric:.9e}"
                    );
                }
            }
        }
    }
    Ok(report)
}
