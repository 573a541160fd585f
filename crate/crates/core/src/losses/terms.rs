use serde::Serialize;

use super::{
    check_theta, CellPrediction, CellTarget, GridSpec, Head, LossConfig, ObjectnessLoss, LOG_EPS,
};
use crate::error::{Error, Result};

fn check_shapes(preds: &[CellPrediction], targets: &[CellTarget], grid: &GridSpec) -> Result<()> {
    let n = grid.slot_count();
    if preds.len() != n || targets.len() != n {
        return Err(Error::precondition(format!(
            "expected {n} slots, got {} predictions and {} targets",
            preds.len(),
            targets.len()
        )));
    }
    for (i, (p, t)) in preds.iter().zip(targets).enumerate() {
        if p.class_scores.len() != t.class.len() {
            return Err(Error::precondition(format!(
                "slot {i}: {} class scores vs {} target classes",
                p.class_scores.len(),
                t.class.len()
            )));
        }
    }
    Ok(())
}

/// Decoded `(x̂, ŷ, ŵ, ĥ)` of slot `i`.
fn decoded(p: &CellPrediction, grid: &GridSpec, i: usize) -> Result<(f64, f64, f64, f64)> {
    let ((gx, gy), (aw, ah)) = grid.slot(i);
    let w = aw * p.fw.exp();
    let h = ah * p.fh.exp();
    if !(w.is_finite() && h.is_finite()) {
        return Err(Error::NumericRange(format!(
            "slot {i}: decoded size overflows"
        )));
    }
    Ok((gx + p.fx, gy + p.fy, w, h))
}

fn objects<'a>(
    preds: &'a [CellPrediction],
    targets: &'a [CellTarget],
) -> impl Iterator<Item = (usize, &'a CellPrediction, &'a CellTarget)> {
    preds
        .iter()
        .zip(targets)
        .enumerate()
        .filter(|(_, (_, t))| t.has_object)
        .map(|(i, (p, t))| (i, p, t))
}

/// `λ Σ_obj (x - x̂)² + (y - ŷ)²`.
pub fn loss_xy(
    preds: &[CellPrediction],
    targets: &[CellTarget],
    grid: &GridSpec,
    cfg: &LossConfig,
) -> Result<f64> {
    check_shapes(preds, targets, grid)?;
    let mut sum = 0.0;
    for (i, p, t) in objects(preds, targets) {
        let (x, y, _, _) = decoded(p, grid, i)?;
        sum += (t.x - x).powi(2) + (t.y - y).powi(2);
    }
    Ok(cfg.lambda_coord * sum)
}

/// `λ Σ_obj (√w - √ŵ)² + (√h - √ĥ)²`.
pub fn loss_wh(
    preds: &[CellPrediction],
    targets: &[CellTarget],
    grid: &GridSpec,
    cfg: &LossConfig,
) -> Result<f64> {
    check_shapes(preds, targets, grid)?;
    let mut sum = 0.0;
    for (i, p, t) in objects(preds, targets) {
        if t.w < 0.0 || t.h < 0.0 {
            return Err(Error::precondition(format!(
                "slot {i}: negative target size"
            )));
        }
        let (_, _, w, h) = decoded(p, grid, i)?;
        sum += (t.w.sqrt() - w.sqrt()).powi(2) + (t.h.sqrt() - h.sqrt()).powi(2);
    }
    Ok(cfg.lambda_coord * sum)
}

fn clamp_prob(p: f64) -> f64 {
    p.clamp(LOG_EPS, 1.0 - LOG_EPS)
}

/// Binary cross-entropy of objectness over every slot (or only the positive
/// part, depending on `cfg.objectness`).
pub fn loss_obj(
    preds: &[CellPrediction],
    targets: &[CellTarget],
    grid: &GridSpec,
    cfg: &LossConfig,
) -> Result<f64> {
    check_shapes(preds, targets, grid)?;
    let mut sum = 0.0;
    for (p, t) in preds.iter().zip(targets) {
        let c = clamp_prob(p.objectness);
        sum -= t.confidence * c.ln();
        if cfg.objectness == ObjectnessLoss::FullBce {
            sum -= (1.0 - t.confidence) * (1.0 - c).ln();
        }
    }
    Ok(sum)
}

/// `-Σ_obj Σ_k c_k log p̂_k`.
pub fn loss_class(
    preds: &[CellPrediction],
    targets: &[CellTarget],
    grid: &GridSpec,
) -> Result<f64> {
    check_shapes(preds, targets, grid)?;
    let mut sum = 0.0;
    for (_, p, t) in objects(preds, targets) {
        for (c, q) in t.class.iter().zip(&p.class_scores) {
            sum -= c * q.clamp(LOG_EPS, 1.0).ln();
        }
    }
    Ok(sum)
}

fn theta_pair(i: usize, p: &CellPrediction, t: &CellTarget) -> Result<(f64, f64)> {
    match (t.theta, p.theta) {
        (Some(a), Some(b)) => {
            check_theta(Some(a))?;
            check_theta(Some(b))?;
            Ok((a, b))
        }
        _ => Err(Error::precondition(format!(
            "slot {i}: orientation missing"
        ))),
    }
}

/// `Σ_obj (θ - θ̂)²` in normalized units, without wrap-around.
pub fn loss_orientation(
    preds: &[CellPrediction],
    targets: &[CellTarget],
    grid: &GridSpec,
) -> Result<f64> {
    check_shapes(preds, targets, grid)?;
    let mut sum = 0.0;
    for (i, p, t) in objects(preds, targets) {
        let (a, b) = theta_pair(i, p, t)?;
        sum += (a - b).powi(2);
    }
    Ok(sum)
}

fn radii_pair<'a>(
    i: usize,
    p: &'a CellPrediction,
    t: &'a CellTarget,
    points: usize,
) -> Result<(&'a [f64], &'a [f64])> {
    match (&t.radii, &p.radii) {
        (Some(a), Some(b)) if a.len() == points && b.len() == points => Ok((a, b)),
        (Some(a), Some(b)) => Err(Error::precondition(format!(
            "slot {i}: expected {points} radii, got {} target and {} predicted",
            a.len(),
            b.len()
        ))),
        _ => Err(Error::precondition(format!("slot {i}: radii missing"))),
    }
}

/// `Σ_obj Σ_k (r_k - r̂_k)²` over `points` rays.
pub fn loss_polygon(
    preds: &[CellPrediction],
    targets: &[CellTarget],
    grid: &GridSpec,
    points: usize,
) -> Result<f64> {
    check_shapes(preds, targets, grid)?;
    let mut sum = 0.0;
    for (i, p, t) in objects(preds, targets) {
        let (a, b) = radii_pair(i, p, t, points)?;
        sum += a.iter().zip(b).map(|(r, q)| (r - q).powi(2)).sum::<f64>();
    }
    Ok(sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct LossBreakdown {
    pub xy: f64,
    pub wh: f64,
    pub obj: f64,
    pub class: f64,
    pub orientation: Option<f64>,
    pub polygon: Option<f64>,
    pub total: f64,
}

/// Sum of the sub-losses used by `head`.
pub fn loss_total(
    preds: &[CellPrediction],
    targets: &[CellTarget],
    grid: &GridSpec,
    cfg: &LossConfig,
    head: Head,
) -> Result<LossBreakdown> {
    cfg.validate()?;
    let xy = loss_xy(preds, targets, grid, cfg)?;
    let wh = loss_wh(preds, targets, grid, cfg)?;
    let obj = loss_obj(preds, targets, grid, cfg)?;
    let class = loss_class(preds, targets, grid)?;
    let orientation = match head {
        Head::Oriented | Head::Ellipse => Some(loss_orientation(preds, targets, grid)?),
        _ => None,
    };
    let polygon = match head {
        Head::Polygon => Some(loss_polygon(
            preds,
            targets,
            grid,
            polygon_points(preds, targets)?,
        )?),
        _ => None,
    };
    let total = xy + wh + obj + class + orientation.unwrap_or(0.0) + polygon.unwrap_or(0.0);
    Ok(LossBreakdown {
        xy,
        wh,
        obj,
        class,
        orientation,
        polygon,
        total,
    })
}

/// Ray count taken from the first object-bearing slot.
fn polygon_points(preds: &[CellPrediction], targets: &[CellTarget]) -> Result<usize> {
    match objects(preds, targets).next() {
        None => Ok(0),
        Some((i, _, t)) => t
            .radii
            .as_ref()
            .map(|r| r.len())
            .ok_or_else(|| Error::precondition(format!("slot {i}: radii missing"))),
    }
}

/// Partial derivatives of the total loss with respect to one slot's outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct CellGradient {
    pub fx: f64,
    pub fy: f64,
    pub fw: f64,
    pub fh: f64,
    pub objectness: f64,
    pub class_scores: Vec<f64>,
    pub theta: Option<f64>,
    pub radii: Option<Vec<f64>>,
}

/// Analytic gradient of [`loss_total`]. Clamped logarithms have zero
/// derivative outside the clamp range.
pub fn loss_gradient(
    preds: &[CellPrediction],
    targets: &[CellTarget],
    grid: &GridSpec,
    cfg: &LossConfig,
    head: Head,
) -> Result<Vec<CellGradient>> {
    cfg.validate()?;
    check_shapes(preds, targets, grid)?;
    let lambda = cfg.lambda_coord;
    let points = match head {
        Head::Polygon => Some(polygon_points(preds, targets)?),
        _ => None,
    };
    let with_theta = matches!(head, Head::Oriented | Head::Ellipse);
    let mut out = Vec::with_capacity(preds.len());
    for (i, (p, t)) in preds.iter().zip(targets).enumerate() {
        let mut g = CellGradient {
            fx: 0.0,
            fy: 0.0,
            fw: 0.0,
            fh: 0.0,
            objectness: 0.0,
            class_scores: vec![0.0; p.class_scores.len()],
            theta: with_theta.then_some(0.0),
            radii: points.map(|_| vec![0.0; p.radii.as_ref().map_or(0, |r| r.len())]),
        };

        let c = p.objectness;
        if c > LOG_EPS && c < 1.0 - LOG_EPS {
            g.objectness = -t.confidence / c;
            if cfg.objectness == ObjectnessLoss::FullBce {
                g.objectness += (1.0 - t.confidence) / (1.0 - c);
            }
        }

        if t.has_object {
            if t.w < 0.0 || t.h < 0.0 {
                return Err(Error::precondition(format!(
                    "slot {i}: negative target size"
                )));
            }
            let (x, y, w, h) = decoded(p, grid, i)?;
            g.fx = 2.0 * lambda * (x - t.x);
            g.fy = 2.0 * lambda * (y - t.y);
            // d√ŵ/df_w = √ŵ / 2
            g.fw = lambda * (w.sqrt() - t.w.sqrt()) * w.sqrt();
            g.fh = lambda * (h.sqrt() - t.h.sqrt()) * h.sqrt();
            for (k, (ck, qk)) in t.class.iter().zip(&p.class_scores).enumerate() {
                if *qk > LOG_EPS {
                    g.class_scores[k] = -ck / qk;
                }
            }
            if with_theta {
                let (a, b) = theta_pair(i, p, t)?;
                g.theta = Some(2.0 * (b - a));
            }
            if let Some(n) = points {
                let (a, b) = radii_pair(i, p, t, n)?;
                g.radii = Some(a.iter().zip(b).map(|(r, q)| 2.0 * (q - r)).collect());
            }
        }
        out.push(g);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::CellTarget;

    fn grid1() -> GridSpec {
        GridSpec::new(1, vec![(1.0, 1.0)]).unwrap()
    }

    fn pred() -> CellPrediction {
        CellPrediction {
            fx: 0.0,
            fy: 0.0,
            fw: 0.0,
            fh: 0.0,
            objectness: 1.0 - LOG_EPS,
            class_scores: vec![1.0 - LOG_EPS, LOG_EPS],
            theta: Some(0.0),
            radii: Some(vec![0.5; 12]),
        }
    }

    fn target() -> CellTarget {
        CellTarget {
            has_object: true,
            x: 0.0,
            y: 0.0,
            w: 1.0,
            h: 1.0,
            confidence: 1.0,
            class: vec![1.0, 0.0],
            theta: Some(0.0),
            radii: Some(vec![0.5; 12]),
        }
    }

    fn cfg() -> LossConfig {
        LossConfig::default()
    }

    #[test]
    fn center_error_example() {
        let mut t = target();
        t.x = 1.0;
        t.y = 1.0;
        assert_eq!(loss_xy(&[pred()], &[t], &grid1(), &cfg()).unwrap(), 10.0);
    }

    #[test]
    fn size_error_examples() {
        let mut t = target();
        t.w = 4.0;
        assert_eq!(
            loss_wh(&[pred()], &[t.clone()], &grid1(), &cfg()).unwrap(),
            5.0
        );
        t.w = 0.0;
        assert_eq!(
            loss_wh(&[pred()], &[t.clone()], &grid1(), &cfg()).unwrap(),
            5.0
        );
        t.w = -1.0;
        assert!(loss_wh(&[pred()], &[t], &grid1(), &cfg()).is_err());
    }

    #[test]
    fn objectness_examples() {
        let mut p = pred();
        p.objectness = 0.5;
        let mut t = target();
        let ln2 = 2f64.ln();
        assert!(
            (loss_obj(&[p.clone()], &[t.clone()], &grid1(), &cfg()).unwrap() - ln2).abs() < 1e-15
        );
        t.confidence = 0.0;
        assert!(
            (loss_obj(&[p.clone()], &[t.clone()], &grid1(), &cfg()).unwrap() - ln2).abs() < 1e-15
        );
        let positive = LossConfig {
            objectness: ObjectnessLoss::PositiveOnly,
            ..cfg()
        };
        assert_eq!(loss_obj(&[p], &[t], &grid1(), &positive).unwrap(), 0.0);
    }

    #[test]
    fn objectness_near_zero_when_exact() {
        let g = GridSpec::new(2, vec![(1.0, 1.0), (2.0, 1.0)]).unwrap();
        let mut preds = Vec::new();
        let mut targets = Vec::new();
        for i in 0..g.slot_count() {
            let on = i % 3 == 0;
            let mut p = pred();
            p.objectness = if on { 1.0 } else { 0.0 };
            let mut t = target();
            t.confidence = if on { 1.0 } else { 0.0 };
            preds.push(p);
            targets.push(t);
        }
        let v = loss_obj(&preds, &targets, &g, &cfg()).unwrap();
        assert!(v <= g.slot_count() as f64 * -(1.0 - LOG_EPS).ln() * (1.0 + 1e-9));
    }

    #[test]
    fn class_example() {
        let mut p = pred();
        p.class_scores = vec![0.5, 0.5];
        let v = loss_class(&[p], &[target()], &grid1()).unwrap();
        assert!((v - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn orientation_examples() {
        let mut p = pred();
        let mut t = target();
        t.theta = Some(1.0);
        p.theta = Some(-1.0);
        assert_eq!(
            loss_orientation(&[p.clone()], &[t.clone()], &grid1()).unwrap(),
            4.0
        );
        t.theta = Some(0.5);
        p.theta = Some(0.0);
        assert_eq!(
            loss_orientation(&[p.clone()], &[t.clone()], &grid1()).unwrap(),
            0.25
        );
        p.theta = Some(1.2);
        assert!(loss_orientation(&[p], &[t], &grid1()).is_err());
    }

    #[test]
    fn polygon_examples() {
        let mut p = pred();
        p.radii = Some(vec![0.6; 12]);
        let v = loss_polygon(&[p.clone()], &[target()], &grid1(), 12).unwrap();
        assert!((v - 0.12).abs() < 1e-12);
        assert!(loss_polygon(&[p], &[target()], &grid1(), 24).is_err());
    }

    #[test]
    fn gating_zeroes_object_terms() {
        let mut p = pred();
        p.fx = 3.0;
        p.theta = Some(0.9);
        p.radii = Some(vec![0.0; 12]);
        p.class_scores = vec![0.2, 0.8];
        let mut t = target();
        t.has_object = false;
        let b = loss_total(&[p.clone()], &[t.clone()], &grid1(), &cfg(), Head::Polygon).unwrap();
        assert_eq!((b.xy, b.wh, b.class, b.polygon), (0.0, 0.0, 0.0, Some(0.0)));
        let o = loss_orientation(&[p.clone()], &[t.clone()], &grid1()).unwrap();
        assert_eq!(o, 0.0);
        let g = loss_gradient(&[p], &[t], &grid1(), &cfg(), Head::Polygon).unwrap();
        assert_eq!((g[0].fx, g[0].fw), (0.0, 0.0));
        assert!(g[0].radii.as_ref().unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn total_is_sum_of_terms() {
        let mut p = pred();
        p.fx = 0.3;
        p.fw = -0.2;
        p.objectness = 0.7;
        p.class_scores = vec![0.3, 0.7];
        p.theta = Some(0.4);
        let t = target();
        let (g, c) = (grid1(), cfg());
        let box_head = loss_total(
            std::slice::from_ref(&p),
            std::slice::from_ref(&t),
            &g,
            &c,
            Head::Box,
        )
        .unwrap();
        let parts = loss_xy(std::slice::from_ref(&p), std::slice::from_ref(&t), &g, &c).unwrap()
            + loss_wh(std::slice::from_ref(&p), std::slice::from_ref(&t), &g, &c).unwrap()
            + loss_obj(std::slice::from_ref(&p), std::slice::from_ref(&t), &g, &c).unwrap()
            + loss_class(std::slice::from_ref(&p), std::slice::from_ref(&t), &g).unwrap();
        assert_eq!(box_head.total, parts);
        let oriented = loss_total(
            std::slice::from_ref(&p),
            std::slice::from_ref(&t),
            &g,
            &c,
            Head::Oriented,
        )
        .unwrap();
        let orn = loss_orientation(&[p], &[t], &g).unwrap();
        assert_eq!(oriented.total, box_head.total + orn);
        assert!((oriented.total - box_head.total - orn).abs() <= 1e-15 * oriented.total);
    }

    #[test]
    fn perfect_prediction() {
        for head in Head::ALL {
            let b = loss_total(&[pred()], &[target()], &grid1(), &cfg(), head).unwrap();
            assert!(b.total < 1e-6, "{head:?} {}", b.total);
            let g = loss_gradient(&[pred()], &[target()], &grid1(), &cfg(), head).unwrap();
            assert_eq!((g[0].fx, g[0].fy, g[0].fw, g[0].fh), (0.0, 0.0, 0.0, 0.0));
            assert!(g[0].theta.unwrap_or(0.0) == 0.0);
            assert!(g[0]
                .radii
                .as_ref()
                .is_none_or(|r| r.iter().all(|v| *v == 0.0)));
        }
    }

    #[test]
    fn missing_head_fields() {
        let mut p = pred();
        p.theta = None;
        assert!(loss_total(&[p.clone()], &[target()], &grid1(), &cfg(), Head::Oriented).is_err());
        assert!(loss_total(&[p], &[target()], &grid1(), &cfg(), Head::Box).is_ok());
        let mut t = target();
        t.radii = None;
        assert!(loss_total(&[pred()], &[t], &grid1(), &cfg(), Head::Polygon).is_err());
    }

    #[test]
    fn size_term_scales_linearly() {
        // (√(2w) - √(2ŵ))² = 2 (√w - √ŵ)²
        let mut p = pred();
        p.fw = 0.4;
        let mut t = target();
        t.w = 3.0;
        t.h = 1.0;
        let one = loss_wh(&[p.clone()], &[t.clone()], &grid1(), &cfg()).unwrap();
        p.fw += 2f64.ln();
        p.fh += 2f64.ln();
        t.w *= 2.0;
        t.h *= 2.0;
        let two = loss_wh(&[p], &[t], &grid1(), &cfg()).unwrap();
        assert!((two - 2.0 * one).abs() < 1e-12);
    }

    #[test]
    fn shape_mismatch() {
        let g = GridSpec::new(2, vec![(1.0, 1.0)]).unwrap();
        assert!(loss_xy(&[pred()], &[target()], &g, &cfg()).is_err());
    }
}
