//! Figure rendering: classified PQ scatter charts and density overlays.

use crate::classify::{ClassifiedScenario, FullClass, GridClass};
use crate::stats::DensityBin;
use crate::svg::SvgDocument;

/// Linear map between a data interval and a pixel interval.
#[derive(Debug, Clone, Copy)]
pub struct AxisMap {
    data_min: f64,
    data_max: f64,
    px_min: f64,
    px_max: f64,
}

impl AxisMap {
    /// A degenerate data interval is widened by half a unit on both sides
    /// so the map stays invertible.
    pub fn new(data_min: f64, data_max: f64, px_min: f64, px_max: f64) -> Self {
        let (data_min, data_max) = if data_max > data_min {
            (data_min, data_max)
        } else {
            (data_min - 0.5, data_min + 0.5)
        };
        Self {
            data_min,
            data_max,
            px_min,
            px_max,
        }
    }

    pub fn to_px(&self, x: f64) -> f64 {
        self.px_min
            + (x - self.data_min) / (self.data_max - self.data_min) * (self.px_max - self.px_min)
    }

    pub fn to_data(&self, px: f64) -> f64 {
        self.data_min
            + (px - self.px_min) / (self.px_max - self.px_min) * (self.data_max - self.data_min)
    }

    pub fn data_range(&self) -> (f64, f64) {
        (self.data_min, self.data_max)
    }
}

/// Shared figure colors.
pub struct Palette;

impl Palette {
    pub const FEASIBLE: &'static str = "#2e7d32";
    pub const VOLTAGE: &'static str = "#c62828";
    pub const OVERLOAD: &'static str = "#ef6c00";
    pub const BOTH: &'static str = "#6a1b9a";
    pub const INVERTER: &'static str = "#1565c0";
    pub const UNCLASSIFIED: &'static str = "#9e9e9e";
    /// One hue per feeder in overlay figures.
    pub const SERIES: [&'static str; 4] = ["#1565c0", "#2e7d32", "#ef6c00", "#c62828"];
}

/// Which constraint scheme colors a scatter chart.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScatterScheme {
    /// Voltage band and thermal loading.
    Grid,
    /// Grid constraints plus inverter circles.
    Full,
}

/// Title and axis captions of one figure.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

impl PlotSpec {
    /// Captions of the PQ scatter under independent box sampling.
    pub fn independent_scatter(n_nodes: usize) -> Self {
        Self {
            title: format!("Aggregated PQ flexibility, independent sampling (N={n_nodes})"),
            x_label: "interconnection power flow P in kW".into(),
            y_label: "interconnection power flow Q in kvar".into(),
        }
    }

    /// Captions of the PQ scatter under circle-constrained sampling.
    pub fn constrained_scatter(n_nodes: usize) -> Self {
        Self {
            title: format!("Aggregated PQ flexibility, circle-constrained sampling (N={n_nodes})"),
            x_label: "interconnection power flow P in kW".into(),
            y_label: "interconnection power flow Q in kvar".into(),
        }
    }

    /// Captions of the aggregate-power density overlay.
    pub fn density_overlay() -> Self {
        Self {
            title: "Aggregate power density vs uniform-convolution prediction".into(),
            x_label: "mean-centered interconnection power flow P in kW".into(),
            y_label: "probability density in 1/kW".into(),
        }
    }
}

/// One feeder's density comparison in an overlay figure.
#[derive(Debug, Clone)]
pub struct DensitySeries {
    pub label: String,
    /// Empirical density, drawn as a step outline.
    pub bins: Vec<DensityBin>,
    /// Predicted density curve as `(x, density)` pairs, drawn dashed.
    pub curve: Vec<(f64, f64)>,
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 76.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 46.0;
const MARGIN_BOTTOM: f64 = 58.0;

fn grid_class_color(class: GridClass) -> &'static str {
    match class {
        GridClass::Feasible => Palette::FEASIBLE,
        GridClass::VoltageOnly => Palette::VOLTAGE,
        GridClass::OverloadOnly => Palette::OVERLOAD,
        GridClass::Both => Palette::BOTH,
    }
}

fn grid_class_label(class: GridClass) -> &'static str {
    match class {
        GridClass::Feasible => "feasible",
        GridClass::VoltageOnly => "voltage band violated",
        GridClass::OverloadOnly => "line overloaded",
        GridClass::Both => "voltage + overload",
    }
}

fn full_class_color(class: FullClass) -> &'static str {
    match class {
        FullClass::Feasible => Palette::FEASIBLE,
        FullClass::GridOnly => Palette::VOLTAGE,
        FullClass::InverterOnly => Palette::INVERTER,
        FullClass::Both => Palette::BOTH,
    }
}

fn full_class_label(class: FullClass) -> &'static str {
    match class {
        FullClass::Feasible => "feasible",
        FullClass::GridOnly => "grid constraints violated",
        FullClass::InverterOnly => "inverter circle violated",
        FullClass::Both => "both violated",
    }
}

/// Tick positions at a 1/2/5-decade step chosen for about `target` ticks.
fn nice_ticks(lo: f64, hi: f64, target: usize) -> Vec<f64> {
    let span = hi - lo;
    let raw = span / target.max(1) as f64;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| span / s <= target as f64 + 0.5)
        .unwrap_or(10.0 * mag);
    let mut ticks = Vec::new();
    let mut t = (lo / step).ceil() * step;
    // Snap values like -1.9999999 to the exact grid point.
    while t <= hi + 1e-9 * span {
        ticks.push(if t.abs() < 1e-12 * span { 0.0 } else { t });
        t += step;
    }
    ticks
}

fn tick_label(v: f64, step: f64) -> String {
    if step >= 1.0 {
        format!("{v:.0}")
    } else {
        let decimals = (-step.log10().floor()) as usize;
        format!("{v:.*}", decimals)
    }
}

/// Draws the frame, grid lines, ticks, and captions; returns the axis maps.
fn draw_frame(
    doc: &mut SvgDocument,
    spec: &PlotSpec,
    x_range: (f64, f64),
    y_range: (f64, f64),
) -> (AxisMap, AxisMap) {
    let x_map = AxisMap::new(x_range.0, x_range.1, MARGIN_LEFT, WIDTH - MARGIN_RIGHT);
    let y_map = AxisMap::new(y_range.0, y_range.1, HEIGHT - MARGIN_BOTTOM, MARGIN_TOP);
    doc.rect(0.0, 0.0, WIDTH, HEIGHT, "fill=\"#ffffff\"");

    let (x_lo, x_hi) = x_map.data_range();
    let (y_lo, y_hi) = y_map.data_range();
    let x_ticks = nice_ticks(x_lo, x_hi, 7);
    let y_ticks = nice_ticks(y_lo, y_hi, 6);
    let x_step = if x_ticks.len() >= 2 {
        x_ticks[1] - x_ticks[0]
    } else {
        1.0
    };
    let y_step = if y_ticks.len() >= 2 {
        y_ticks[1] - y_ticks[0]
    } else {
        1.0
    };

    for &t in &x_ticks {
        let px = x_map.to_px(t);
        doc.line(
            px,
            MARGIN_TOP,
            px,
            HEIGHT - MARGIN_BOTTOM,
            "stroke=\"#e0e0e0\" stroke-width=\"1\"",
        );
        doc.line(
            px,
            HEIGHT - MARGIN_BOTTOM,
            px,
            HEIGHT - MARGIN_BOTTOM + 5.0,
            "stroke=\"#424242\" stroke-width=\"1\"",
        );
        doc.text(
            px,
            HEIGHT - MARGIN_BOTTOM + 19.0,
            "text-anchor=\"middle\" font-size=\"12\" fill=\"#424242\"",
            &tick_label(t, x_step),
        );
    }
    for &t in &y_ticks {
        let py = y_map.to_px(t);
        doc.line(
            MARGIN_LEFT,
            py,
            WIDTH - MARGIN_RIGHT,
            py,
            "stroke=\"#e0e0e0\" stroke-width=\"1\"",
        );
        doc.line(
            MARGIN_LEFT - 5.0,
            py,
            MARGIN_LEFT,
            py,
            "stroke=\"#424242\" stroke-width=\"1\"",
        );
        doc.text(
            MARGIN_LEFT - 9.0,
            py + 4.0,
            "text-anchor=\"end\" font-size=\"12\" fill=\"#424242\"",
            &tick_label(t, y_step),
        );
    }

    doc.rect(
        MARGIN_LEFT,
        MARGIN_TOP,
        WIDTH - MARGIN_LEFT - MARGIN_RIGHT,
        HEIGHT - MARGIN_TOP - MARGIN_BOTTOM,
        "fill=\"none\" stroke=\"#424242\" stroke-width=\"1\"",
    );
    doc.text(
        WIDTH / 2.0,
        MARGIN_TOP - 16.0,
        "text-anchor=\"middle\" font-size=\"15\" font-weight=\"bold\" fill=\"#212121\"",
        &spec.title,
    );
    doc.text(
        MARGIN_LEFT + (WIDTH - MARGIN_LEFT - MARGIN_RIGHT) / 2.0,
        HEIGHT - 14.0,
        "text-anchor=\"middle\" font-size=\"13\" fill=\"#212121\"",
        &spec.x_label,
    );
    doc.vertical_text(
        20.0,
        MARGIN_TOP + (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM) / 2.0,
        "text-anchor=\"middle\" font-size=\"13\" fill=\"#212121\"",
        &spec.y_label,
    );
    (x_map, y_map)
}

fn draw_legend(doc: &mut SvgDocument, entries: &[(&'static str, String)]) {
    let x = MARGIN_LEFT + 12.0;
    let mut y = MARGIN_TOP + 16.0;
    for (color, label) in entries {
        doc.circle(x, y - 4.0, 4.0, &format!("fill=\"{color}\""));
        doc.text(
            x + 10.0,
            y,
            "font-size=\"12\" fill=\"#212121\"",
            label,
        );
        y += 17.0;
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    let pad = 0.05 * (hi - lo).max(1e-9);
    (lo - pad, hi + pad)
}

/// Renders the aggregate PQ operating points colored by their verdict.
pub fn render_scatter(
    spec: &PlotSpec,
    rows: &[ClassifiedScenario],
    scheme: ScatterScheme,
) -> String {
    let mut doc = SvgDocument::new(WIDTH, HEIGHT);
    let x_range = padded_range(rows.iter().map(|r| r.p_ipf_kw));
    let y_range = padded_range(rows.iter().map(|r| r.q_ipf_kvar));
    let (x_map, y_map) = draw_frame(&mut doc, spec, x_range, y_range);

    // Draw violated points first so the feasible region stays visible.
    let order = |row: &ClassifiedScenario| match row.classification {
        None => 0,
        Some(c) if !c.all_ok() => 1,
        Some(_) => 2,
    };
    let mut sorted: Vec<&ClassifiedScenario> = rows.iter().collect();
    sorted.sort_by_key(|r| (order(r), r.scenario_id));

    let mut counts: Vec<(&'static str, &'static str, usize)> = Vec::new();
    for row in sorted {
        let (color, label) = match (row.classification, scheme) {
            (None, _) => (Palette::UNCLASSIFIED, "not converged"),
            (Some(c), ScatterScheme::Grid) => (
                grid_class_color(c.grid_class()),
                grid_class_label(c.grid_class()),
            ),
            (Some(c), ScatterScheme::Full) => (
                full_class_color(c.full_class()),
                full_class_label(c.full_class()),
            ),
        };
        doc.circle(
            x_map.to_px(row.p_ipf_kw),
            y_map.to_px(row.q_ipf_kvar),
            1.8,
            &format!("fill=\"{color}\" fill-opacity=\"0.55\""),
        );
        match counts.iter_mut().find(|(_, l, _)| *l == label) {
            Some(entry) => entry.2 += 1,
            None => counts.push((color, label, 1)),
        }
    }

    let entries: Vec<(&'static str, String)> = counts
        .iter()
        .map(|&(color, label, n)| (color, format!("{label} ({n})")))
        .collect();
    draw_legend(&mut doc, &entries);
    doc.finish()
}

/// Renders one or more empirical densities (step outlines) against their
/// predicted curves (dashed) on a shared axis.
pub fn render_density_overlay(spec: &PlotSpec, series: &[DensitySeries]) -> String {
    let mut doc = SvgDocument::new(WIDTH, HEIGHT);
    let x_range = padded_range(
        series
            .iter()
            .flat_map(|s| s.bins.iter().flat_map(|b| [b.left, b.right])),
    );
    let y_hi = series
        .iter()
        .flat_map(|s| {
            s.bins
                .iter()
                .map(|b| b.empirical)
                .chain(s.curve.iter().map(|&(_, d)| d))
        })
        .fold(0.0f64, f64::max);
    let (x_map, y_map) = draw_frame(&mut doc, spec, x_range, (0.0, 1.08 * y_hi.max(1e-12)));

    for (i, s) in series.iter().enumerate() {
        let color = Palette::SERIES[i % Palette::SERIES.len()];
        let mut steps = Vec::with_capacity(2 * s.bins.len());
        for bin in &s.bins {
            steps.push((x_map.to_px(bin.left), y_map.to_px(bin.empirical)));
            steps.push((x_map.to_px(bin.right), y_map.to_px(bin.empirical)));
        }
        doc.polyline(
            &steps,
            &format!("fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\""),
        );
        let curve: Vec<(f64, f64)> = s
            .curve
            .iter()
            .map(|&(x, d)| (x_map.to_px(x), y_map.to_px(d)))
            .collect();
        doc.polyline(
            &curve,
            &format!(
                "fill=\"none\" stroke=\"{color}\" stroke-width=\"1.6\" \
                 stroke-dasharray=\"6 4\" stroke-opacity=\"0.85\""
            ),
        );
    }

    let mut entries: Vec<(&'static str, String)> = series
        .iter()
        .enumerate()
        .map(|(i, s)| {
            (
                Palette::SERIES[i % Palette::SERIES.len()],
                format!("{} (dashed: predicted)", s.label),
            )
        })
        .collect();
    if entries.len() == 1 {
        entries[0].1 = format!("{} (dashed: predicted)", series[0].label);
    }
    draw_legend(&mut doc, &entries);
    doc.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::Classification;

    fn row(id: u64, p: f64, q: f64, flags: Option<(bool, bool, bool)>) -> ClassifiedScenario {
        ClassifiedScenario {
            scenario_id: id,
            p_ipf_kw: p,
            q_ipf_kvar: q,
            min_v_pu: 1.0,
            max_v_pu: 1.0,
            max_line_loading_pct: 0.0,
            classification: flags.map(|(volt_ok, line_ok, inverter_ok)| Classification {
                volt_ok,
                line_ok,
                inverter_ok,
            }),
        }
    }

    #[test]
    fn axis_map_round_trips_within_a_hundredth_pixel() {
        let map = AxisMap::new(-230.0, 185.0, 76.0, 696.0);
        for i in 0..=100 {
            let px = 76.0 + i as f64 * 6.2;
            let back = map.to_px(map.to_data(px));
            assert!((back - px).abs() < 0.01, "px {px} round-tripped to {back}");
        }
        assert_eq!(map.to_px(-230.0), 76.0);
        assert_eq!(map.to_px(185.0), 696.0);
    }

    #[test]
    fn degenerate_axis_is_widened() {
        let map = AxisMap::new(5.0, 5.0, 0.0, 100.0);
        let (lo, hi) = map.data_range();
        assert!(lo < 5.0 && hi > 5.0);
        assert!(map.to_px(5.0) == 50.0);
    }

    #[test]
    fn ticks_use_round_steps_and_cover_the_range() {
        let ticks = nice_ticks(-230.0, 185.0, 7);
        assert!(ticks.contains(&0.0));
        assert!(ticks.len() >= 4 && ticks.len() <= 10);
        for pair in ticks.windows(2) {
            assert!(pair[1] > pair[0]);
        }
        assert!(ticks[0] >= -230.0 && *ticks.last().unwrap() <= 185.0 + 1e-9);

        let fine = nice_ticks(0.0, 0.04, 5);
        assert!(fine.contains(&0.0) && fine.contains(&0.04));
        assert_eq!(tick_label(0.03, 0.01), "0.03");
        assert_eq!(tick_label(-200.0, 100.0), "-200");
    }

    #[test]
    fn scatter_marks_every_row_and_legend_counts() {
        let rows = vec![
            row(0, 10.0, 5.0, Some((true, true, true))),
            row(1, -150.0, 80.0, Some((false, true, true))),
            row(2, 120.0, -60.0, Some((true, true, false))),
            row(3, 0.0, 0.0, None),
        ];
        let spec = PlotSpec {
            title: "scatter".into(),
            x_label: "P in kW".into(),
            y_label: "Q in kvar".into(),
        };
        let svg = render_scatter(&spec, &rows, ScatterScheme::Full);
        assert!(svg.contains("feasible (1)"));
        assert!(svg.contains("grid constraints violated (1)"));
        assert!(svg.contains("inverter circle violated (1)"));
        assert!(svg.contains("not converged (1)"));
        assert!(svg.contains(Palette::INVERTER));
        // 4 data points + 4 legend markers.
        assert_eq!(svg.matches("<circle").count(), 8);

        let svg = render_scatter(&spec, &rows, ScatterScheme::Grid);
        assert!(svg.contains("voltage band violated (1)"));
        assert!(!svg.contains("inverter circle"));
    }

    #[test]
    fn density_overlay_draws_steps_and_dashed_curves() {
        let bins = vec![
            DensityBin {
                left: -1.0,
                right: 0.0,
                empirical: 0.4,
                predicted: 0.5,
            },
            DensityBin {
                left: 0.0,
                right: 1.0,
                empirical: 0.6,
                predicted: 0.5,
            },
        ];
        let series = vec![DensitySeries {
            label: "N=1".into(),
            bins,
            curve: vec![(-1.0, 0.5), (0.0, 0.5), (1.0, 0.5)],
        }];
        let spec = PlotSpec {
            title: "density".into(),
            x_label: "P in kW".into(),
            y_label: "density".into(),
        };
        let svg = render_density_overlay(&spec, &series);
        assert_eq!(svg.matches("<polyline").count(), 2);
        assert!(svg.contains("stroke-dasharray"));
        assert!(svg.contains("N=1 (dashed: predicted)"));
    }
}
