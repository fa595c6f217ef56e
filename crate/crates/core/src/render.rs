//! SVG scatterplots of labelled point sets.

use std::fmt::Write;

use crate::data::Point2;
use crate::error::{Error, Result};
use crate::NOISE;

pub const CANVAS: f64 = 500.0;
pub const MARKER_RADIUS: f64 = 5.0;
const MARGIN: f64 = 2.0 * MARKER_RADIUS;

/// Categorical fill colours, cycled by cluster label.
pub const PALETTE: [&str; 10] = [
    "#4e79a7", "#f28e2b", "#e15759", "#76b7b2", "#59a14f", "#edc948", "#b07aa1", "#ff9da7", "#9c755f", "#bab0ac",
];
pub const NOISE_COLOR: &str = "#000000";

pub fn label_color(label: u32) -> &'static str {
    if label == NOISE {
        NOISE_COLOR
    } else {
        PALETTE[(label as usize - 1) % PALETTE.len()]
    }
}

/// Marker opacity for an agreement score: linear from 0.2 at 0 to 1 at 1.
pub fn agreement_opacity(agreement: f64) -> f64 {
    0.2 + 0.8 * agreement.clamp(0.0, 1.0)
}

/// Renders points from [-1, 1]² onto a 500×500 canvas, y pointing up.
pub fn render_svg(points: &[Point2], labels: &[u32], agreement: Option<&[f64]>) -> Result<String> {
    if labels.len() != points.len() {
        return Err(Error::Data(format!("{} points but {} labels", points.len(), labels.len())));
    }
    if let Some(a) = agreement {
        if a.len() != points.len() {
            return Err(Error::Data(format!("{} points but {} agreement values", points.len(), a.len())));
        }
    }
    let span = CANVAS - 2.0 * MARGIN;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" viewBox="0 0 {CANVAS} {CANVAS}">"#
    );
    let _ = writeln!(svg, r##"<rect width="{CANVAS}" height="{CANVAS}" fill="#ffffff"/>"##);
    for (i, (p, &l)) in points.iter().zip(labels).enumerate() {
        let cx = MARGIN + (p.x.clamp(-1.0, 1.0) + 1.0) / 2.0 * span;
        let cy = MARGIN + (1.0 - p.y.clamp(-1.0, 1.0)) / 2.0 * span;
        let _ = write!(
            svg,
            r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{MARKER_RADIUS}" fill="{}""#,
            label_color(l)
        );
        if let Some(a) = agreement {
            let _ = write!(svg, r#" fill-opacity="{:.3}""#, agreement_opacity(a[i]));
        }
        svg.push_str("/>\n");
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
