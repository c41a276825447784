//! Minimal self-contained SVG rendering of AOI, footprints and estimate.

use zsm_core::polygon::MultiPolygon2D;

fn path_data(region: &MultiPolygon2D, max_y: f64) -> String {
    let mut d = String::new();
    for c in &region.components {
        for ring in std::iter::once(&c.outer).chain(c.holes.iter()) {
            for (i, p) in ring.iter().enumerate() {
                let cmd = if i == 0 { 'M' } else { 'L' };
                d.push_str(&format!("{cmd}{:.3},{:.3} ", p[0], max_y - p[1]));
            }
            d.push_str("Z ");
        }
    }
    d
}

/// Render the scene: AOI outline in black, footprints in red, estimate in
/// magenta. `truth` adds a small cross marker.
pub fn render(
    aoi: &MultiPolygon2D,
    footprints: &MultiPolygon2D,
    estimate: &MultiPolygon2D,
    truth: Option<[f64; 2]>,
) -> String {
    let m = aoi.measures();
    let ((lo, hi), margin) = match m.bbox {
        Some(b) => (b, 0.05 * ((b.1[0] - b.0[0]).max(b.1[1] - b.0[1])).max(1.0)),
        None => (([0.0, 0.0], [1.0, 1.0]), 0.1),
    };
    let max_y = hi[1] + lo[1]; // reflect about the bbox mid-line
    let x0 = lo[0] - margin;
    let y0 = (max_y - hi[1]) - margin;
    let w = hi[0] - lo[0] + 2.0 * margin;
    let h = hi[1] - lo[1] + 2.0 * margin;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"{x0:.3} {y0:.3} {w:.3} {h:.3}\" \
         width=\"800\" height=\"800\">\n"
    );
    svg.push_str(&format!(
        "  <path d=\"{}\" fill=\"none\" stroke=\"black\" stroke-width=\"{:.3}\" \
         fill-rule=\"evenodd\"/>\n",
        path_data(aoi, max_y),
        0.004 * w
    ));
    if !footprints.is_empty() {
        svg.push_str(&format!(
            "  <path d=\"{}\" fill=\"red\" fill-opacity=\"0.45\" stroke=\"red\" \
             stroke-width=\"{:.3}\" fill-rule=\"evenodd\"/>\n",
            path_data(footprints, max_y),
            0.002 * w
        ));
    }
    if !estimate.is_empty() {
        svg.push_str(&format!(
            "  <path d=\"{}\" fill=\"magenta\" fill-opacity=\"0.55\" stroke=\"magenta\" \
             stroke-width=\"{:.3}\" fill-rule=\"evenodd\"/>\n",
            path_data(estimate, max_y),
            0.002 * w
        ));
    }
    if let Some(t) = truth {
        let r = 0.01 * w;
        let (tx, ty) = (t[0], max_y - t[1]);
        svg.push_str(&format!(
            "  <path d=\"M{:.3},{:.3} L{:.3},{:.3} M{:.3},{:.3} L{:.3},{:.3}\" \
             stroke=\"blue\" stroke-width=\"{:.3}\"/>\n",
            tx - r,
            ty,
            tx + r,
            ty,
            tx,
            ty - r,
            tx,
            ty + r,
            0.003 * w
        ));
    }
    svg.push_str("</svg>\n");
    svg
}
