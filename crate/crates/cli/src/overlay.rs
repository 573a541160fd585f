//! SVG overlays: truth mask outlines, predicted outlines and IoU labels.

use std::fmt::Write;

use polyrep::dataset::FrameRecord;
use polyrep::evaluation::{Detection, MatchRecord};
use polyrep::representations::{InstanceMask, DEFAULT_ARC_SEGMENTS};

/// Unit edges between occupied and empty cells, as one SVG path.
fn mask_outline(mask: &InstanceMask) -> String {
    let g = mask.grid();
    let (w, h) = (g.width(), g.height());
    let set = |x: i64, y: i64| {
        x >= 0 && y >= 0 && (x as usize) < w && (y as usize) < h && g.get(x as usize, y as usize)
    };
    let mut d = String::new();
    for (x, y) in g.iter_ones() {
        let (xi, yi) = (x as i64, y as i64);
        if !set(xi, yi - 1) {
            let _ = write!(d, "M{x} {y}h1");
        }
        if !set(xi, yi + 1) {
            let _ = write!(d, "M{x} {}h1", y + 1);
        }
        if !set(xi - 1, yi) {
            let _ = write!(d, "M{x} {y}v1");
        }
        if !set(xi + 1, yi) {
            let _ = write!(d, "M{} {y}v1", x + 1);
        }
    }
    d
}

pub fn frame_svg(
    frame: &FrameRecord,
    masks: &[&InstanceMask],
    dets: &[&Detection],
    matches: &[MatchRecord],
) -> String {
    let (w, h) = (frame.image_size.width, frame.image_size.height);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
    );
    let _ = writeln!(s, r##"<rect width="{w}" height="{h}" fill="#202020"/>"##);
    for m in masks {
        let _ = writeln!(
            s,
            r##"<path d="{}" stroke="#30d158" stroke-width="1" fill="none"/>"##,
            mask_outline(m)
        );
    }
    for d in dets {
        let Ok(poly) = d.representation.to_polygon(DEFAULT_ARC_SEGMENTS) else {
            continue;
        };
        let points: Vec<String> = poly
            .vertices()
            .iter()
            .map(|p| format!("{:.2},{:.2}", p.x, p.y))
            .collect();
        let m = matches
            .iter()
            .find(|m| m.frame_id == d.frame_id && m.class == d.class && m.detection == Some(d.id));
        let (color, label) = match m {
            Some(m) if m.truth.is_some() => (
                "#ff453a",
                format!("{} {:.2} IoU {:.3}", d.class, d.confidence, m.iou),
            ),
            Some(m) => (
                "#ff9f0a",
                format!("{} {:.2} FP IoU {:.3}", d.class, d.confidence, m.iou),
            ),
            None => ("#ff9f0a", format!("{} {:.2}", d.class, d.confidence)),
        };
        let _ = writeln!(
            s,
            r#"<polygon points="{}" stroke="{color}" stroke-width="1.5" fill="none"/>"#,
            points.join(" ")
        );
        let c = d.representation.center();
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}" font-size="12" font-family="monospace">{label}</text>"#,
            c.x, c.y
        );
    }
    s.push_str("</svg>\n");
    s
}
