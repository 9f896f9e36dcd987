use std::fmt::Write as _;

use anyhow::{bail, Result};
use gesture_core::data::GestureVocabulary;
use gesture_core::metrics::segments_from_labels;

const WIDTH: f64 = 960.0;
const ROW_H: f64 = 24.0;
const LABEL_W: f64 = 140.0;
const GAP: f64 = 8.0;

fn hex(c: [u8; 3]) -> String {
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One horizontal ribbon per row, all rows on the same time axis.
pub fn ribbons_svg(title: &str, rows: &[(String, Vec<usize>)], vocab: &GestureVocabulary) -> Result<String> {
    let Some((_, first)) = rows.first() else {
        bail!("nothing to plot");
    };
    let n = first.len();
    for (name, labels) in rows {
        if labels.len() != n {
            let mismatch = gesture_core::Error::LengthMismatch {
                left: n,
                right: labels.len(),
            };
            return Err(anyhow::Error::new(mismatch).context(format!("row `{name}`")));
        }
    }
    let scale = WIDTH / n as f64;
    let height = 30.0 + rows.len() as f64 * (ROW_H + GAP);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" font-family="sans-serif" font-size="12">"#,
        LABEL_W + WIDTH + 10.0
    );
    let _ = writeln!(s, r#"<text x="4" y="16" font-weight="bold">{}</text>"#, escape(title));
    for (i, (name, labels)) in rows.iter().enumerate() {
        let y = 26.0 + i as f64 * (ROW_H + GAP);
        let _ = writeln!(s, r#"<text x="4" y="{}">{}</text>"#, y + ROW_H * 0.7, escape(name));
        for seg in segments_from_labels(labels)? {
            let color = vocab.get(seg.class).map_or([0, 0, 0], |g| g.color);
            let _ = writeln!(
                s,
                r#"<rect x="{:.2}" y="{y}" width="{:.2}" height="{ROW_H}" fill="{}"/>"#,
                LABEL_W + seg.start as f64 * scale,
                (seg.end - seg.start + 1) as f64 * scale,
                hex(color)
            );
        }
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Color swatch and name for every gesture.
pub fn legend_svg(vocab: &GestureVocabulary) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="420" height="{}" font-family="sans-serif" font-size="12">"#,
        10 + 22 * vocab.len()
    );
    for (i, g) in vocab.iter().enumerate() {
        let y = 6 + 22 * i;
        let _ = writeln!(
            s,
            r#"<rect x="6" y="{y}" width="28" height="16" fill="{}"/>"#,
            hex(g.color)
        );
        let _ = writeln!(
            s,
            r#"<text x="42" y="{}">{} {}</text>"#,
            y + 12,
            escape(&g.id),
            escape(&g.name)
        );
    }
    s.push_str("</svg>\n");
    s
}
