//! Minimal SVG document builder for the report figures.
//!
//! Only the handful of shapes the plots need; coordinates are written with
//! three decimals to keep files small and byte-stable across platforms.

use crate::numfmt::fmt_px;

/// An SVG document under construction. Shapes are appended in draw order.
#[derive(Debug)]
pub struct SvgDocument {
    width: f64,
    height: f64,
    body: String,
}

impl SvgDocument {
    pub fn new(width: f64, height: f64) -> Self {
        Self {
            width,
            height,
            body: String::new(),
        }
    }

    /// Axis-aligned rectangle; `attrs` is raw presentation markup such as
    /// `fill="none" stroke="#333"`.
    pub fn rect(&mut self, x: f64, y: f64, w: f64, h: f64, attrs: &str) {
        self.body.push_str(&format!(
            "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" {attrs}/>\n",
            fmt_px(x),
            fmt_px(y),
            fmt_px(w),
            fmt_px(h),
        ));
    }

    pub fn line(&mut self, x1: f64, y1: f64, x2: f64, y2: f64, attrs: &str) {
        self.body.push_str(&format!(
            "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" {attrs}/>\n",
            fmt_px(x1),
            fmt_px(y1),
            fmt_px(x2),
            fmt_px(y2),
        ));
    }

    pub fn circle(&mut self, cx: f64, cy: f64, r: f64, attrs: &str) {
        self.body.push_str(&format!(
            "  <circle cx=\"{}\" cy=\"{}\" r=\"{}\" {attrs}/>\n",
            fmt_px(cx),
            fmt_px(cy),
            fmt_px(r),
        ));
    }

    pub fn polyline(&mut self, points: &[(f64, f64)], attrs: &str) {
        let coords: Vec<String> = points
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt_px(x), fmt_px(y)))
            .collect();
        self.body.push_str(&format!(
            "  <polyline points=\"{}\" {attrs}/>\n",
            coords.join(" ")
        ));
    }

    /// Text element with escaped content.
    pub fn text(&mut self, x: f64, y: f64, attrs: &str, content: &str) {
        self.body.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" {attrs}>{}</text>\n",
            fmt_px(x),
            fmt_px(y),
            escape(content),
        ));
    }

    /// Text rotated 90 degrees counterclockwise around its anchor, for
    /// vertical axis labels.
    pub fn vertical_text(&mut self, x: f64, y: f64, attrs: &str, content: &str) {
        self.body.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" transform=\"rotate(-90 {} {})\" {attrs}>{}</text>\n",
            fmt_px(x),
            fmt_px(y),
            fmt_px(x),
            fmt_px(y),
            escape(content),
        ));
    }

    /// Closes the document and returns the SVG text.
    pub fn finish(self) -> String {
        format!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
             viewBox=\"0 0 {w} {h}\" font-family=\"Helvetica, Arial, sans-serif\">\n{body}</svg>\n",
            w = fmt_px(self.width),
            h = fmt_px(self.height),
            body = self.body,
        )
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn document_frame_is_well_formed() {
        let mut doc = SvgDocument::new(640.0, 480.0);
        doc.rect(0.0, 0.0, 640.0, 480.0, "fill=\"#fff\"");
        let text = doc.finish();
        assert!(text.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""));
        assert!(text.contains("viewBox=\"0 0 640 480\""));
        assert!(text.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn shapes_render_with_three_decimal_coordinates() {
        let mut doc = SvgDocument::new(10.0, 10.0);
        doc.line(0.0, 1.0 / 3.0, 2.5, 3.25, "stroke=\"#000\"");
        doc.circle(1.23456, -0.00001, 1.8, "fill=\"red\"");
        doc.polyline(&[(0.0, 1.0), (2.5, 3.25)], "fill=\"none\"");
        let text = doc.finish();
        assert!(text.contains("y1=\"0.333\""));
        // Negative zero is normalized.
        assert!(text.contains("cy=\"0\""));
        assert!(!text.contains("\"-0\""));
        assert!(text.contains("points=\"0,1 2.5,3.25\""));
    }

    #[test]
    fn text_content_is_escaped() {
        let mut doc = SvgDocument::new(10.0, 10.0);
        doc.text(0.0, 0.0, "", "a<b & \"c\"");
        let text = doc.finish();
        assert!(text.contains("a&lt;b &amp; &quot;c&quot;"));
    }

    #[test]
    fn vertical_text_rotates_around_its_anchor() {
        let mut doc = SvgDocument::new(10.0, 10.0);
        doc.vertical_text(5.0, 7.0, "text-anchor=\"middle\"", "label");
        assert!(doc.finish().contains("transform=\"rotate(-90 5 7)\""));
    }
}
