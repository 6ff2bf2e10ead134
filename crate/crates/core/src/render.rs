//! Self-contained SVG ternary heatmap for three-measure sweeps.

use std::fmt::Write;

use crate::aggregation::SweepResult;
use crate::error::{Error, Result};

const SIDE: f64 = 600.0;
const MARGIN: f64 = 60.0;
const LOW: (u8, u8, u8) = (0x31, 0x36, 0x95);
const HIGH: (u8, u8, u8) = (0xfd, 0xe7, 0x25);

fn corners() -> [(f64, f64); 3] {
    let h = SIDE * 3f64.sqrt() / 2.0;
    [
        (MARGIN, MARGIN + h),
        (MARGIN + SIDE, MARGIN + h),
        (MARGIN + SIDE / 2.0, MARGIN),
    ]
}

fn project(w: &[f64]) -> (f64, f64) {
    let c = corners();
    (
        w[0] * c[0].0 + w[1] * c[1].0 + w[2] * c[2].0,
        w[0] * c[0].1 + w[1] * c[1].1 + w[2] * c[2].1,
    )
}

fn color(t: f64) -> String {
    let mix = |a: u8, b: u8| (f64::from(a) + (f64::from(b) - f64::from(a)) * t).round() as u8;
    format!(
        "#{:02x}{:02x}{:02x}",
        mix(LOW.0, HIGH.0),
        mix(LOW.1, HIGH.1),
        mix(LOW.2, HIGH.2)
    )
}

/// Renders the sweep on a triangle whose corners are the three measures
/// (first bottom-left, second bottom-right, third on top). Colors scale
/// linearly from the minimum to the maximum overall value.
pub fn ternary_svg(result: &SweepResult, title: &str) -> Result<String> {
    if result.measure_ids.len() != 3 {
        return Err(Error::domain(format!(
            "ternary plots need exactly 3 measures, got {}",
            result.measure_ids.len()
        )));
    }
    let min = result.min_overall();
    let max = result.argmax.overall;
    let span = if max > min { max - min } else { 1.0 };
    let radius = (SIDE / result.resolution as f64 * 0.55).max(0.8);
    let width = SIDE + 2.0 * MARGIN + 140.0;
    let height = SIDE * 3f64.sqrt() / 2.0 + 2.0 * MARGIN + 40.0;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif" font-size="14">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, "<title>{}</title>", escape(title));
    let _ = writeln!(s, "<g>");
    for p in &result.points {
        let (x, y) = project(&p.weights);
        let _ = writeln!(
            s,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="{radius:.2}" fill="{}"/>"#,
            color((p.overall - min) / span)
        );
    }
    let _ = writeln!(s, "</g>");

    let c = corners();
    let _ = writeln!(
        s,
        r#"<polygon points="{:.2},{:.2} {:.2},{:.2} {:.2},{:.2}" fill="none" stroke="black"/>"#,
        c[0].0, c[0].1, c[1].0, c[1].1, c[2].0, c[2].1
    );
    let anchors = [
        (c[0].0 - 10.0, c[0].1 + 24.0, "start"),
        (c[1].0 + 10.0, c[1].1 + 24.0, "end"),
        (c[2].0, c[2].1 - 14.0, "middle"),
    ];
    for (id, (x, y, anchor)) in result.measure_ids.iter().zip(anchors) {
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{y:.2}" text-anchor="{anchor}">w_{}</text>"#,
            escape(id)
        );
    }

    let (ax, ay) = project(&result.argmax.weights);
    let _ = writeln!(
        s,
        r#"<circle cx="{ax:.2}" cy="{ay:.2}" r="{:.2}" fill="none" stroke="red" stroke-width="2"/>"#,
        radius * 2.5
    );

    // legend
    let lx = MARGIN + SIDE + 40.0;
    let _ = writeln!(
        s,
        r#"<defs><linearGradient id="scale" x1="0" y1="1" x2="0" y2="0"><stop offset="0" stop-color="{}"/><stop offset="1" stop-color="{}"/></linearGradient></defs>"#,
        color(0.0),
        color(1.0)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{lx:.2}" y="{:.2}" width="20" height="300" fill="url(#scale)" stroke="black"/>"#,
        MARGIN
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}">max {max:.3}</text>"#,
        lx + 26.0,
        MARGIN + 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}">min {min:.3}</text>"#,
        lx + 26.0,
        MARGIN + 300.0
    );
    let _ = writeln!(s, "</svg>");
    Ok(s)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
