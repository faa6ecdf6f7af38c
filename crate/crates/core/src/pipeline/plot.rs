//! Deterministic SVG scatter plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::embed::Embedding;
use crate::{Error, Result};

pub const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

const SIZE: f64 = 800.0;
const RADIUS: f64 = 2.5;

/// Renders a 2-D embedding. Colors follow sorted distinct labels through
/// [`PALETTE`]; the view box is the data bounding box plus a 5% margin.
pub fn render_svg(emb: &Embedding, labels: Option<&[i64]>) -> Result<String> {
    if emb.dim() != 2 {
        return Err(Error::invalid(format!("scatter plot needs a 2-D embedding, got {}-D", emb.dim())));
    }
    if let Some(l) = labels {
        if l.len() != emb.len() {
            return Err(Error::Shape(format!("{} labels for {} points", l.len(), emb.len())));
        }
    }
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..emb.len() {
        let p = emb.row(i);
        x0 = x0.min(p[0]);
        x1 = x1.max(p[0]);
        y0 = y0.min(p[1]);
        y1 = y1.max(p[1]);
    }
    let span_x = (x1 - x0).max(1e-9);
    let span_y = (y1 - y0).max(1e-9);
    let (x0, y0) = (x0 - 0.05 * span_x, y0 - 0.05 * span_y);
    let (span_x, span_y) = (1.1 * span_x, 1.1 * span_y);

    let color_of: BTreeMap<i64, &str> = match labels {
        Some(l) => {
            let mut distinct = l.to_vec();
            distinct.sort_unstable();
            distinct.dedup();
            distinct
                .into_iter()
                .enumerate()
                .map(|(slot, label)| (label, PALETTE[slot % PALETTE.len()]))
                .collect()
        }
        None => BTreeMap::new(),
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for i in 0..emb.len() {
        let p = emb.row(i);
        let cx = (p[0] - x0) / span_x * SIZE;
        // SVG y grows downwards
        let cy = SIZE - (p[1] - y0) / span_y * SIZE;
        let fill = labels.map_or(PALETTE[0], |l| color_of[&l[i]]);
        let _ = writeln!(svg, r#"<circle cx="{cx:.3}" cy="{cy:.3}" r="{RADIUS}" fill="{fill}"/>"#);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn plot_scatter(emb: &Embedding, labels: Option<&[i64]>, path: &Path) -> Result<()> {
    let svg = render_svg(emb, labels)?;
    std::fs::write(path, svg).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn one_circle_per_point() {
        let emb = Embedding::new(array![[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]], 0).unwrap();
        let svg = render_svg(&emb, None).unwrap();
        assert_eq!(svg.matches("<circle").count(), 3);
    }

    #[test]
    fn palette_by_label() {
        let emb = Embedding::new(array![[0.0, 0.0], [1.0, 2.0], [3.0, -1.0]], 0).unwrap();
        let svg = render_svg(&emb, Some(&[5, 2, 5])).unwrap();
        // label 2 sorts first
        assert_eq!(svg.matches(PALETTE[0]).count(), 1);
        assert_eq!(svg.matches(PALETTE[1]).count(), 2);
    }

    #[test]
    fn deterministic_and_checked() {
        let emb = Embedding::new(array![[0.0, 0.0], [1.0, 2.0]], 0).unwrap();
        assert_eq!(render_svg(&emb, None).unwrap(), render_svg(&emb, None).unwrap());
        let emb3 = Embedding::new(array![[0.0, 0.0, 1.0]], 0).unwrap();
        assert!(render_svg(&emb3, None).is_err());
    }
}
