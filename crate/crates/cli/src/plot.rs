//! Minimal SVG line chart: mean accuracy against training-set size with
//! ±1 std error bars.

use gik::evalharness::RatioAggregate;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 60.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn accuracy_curve(title: &str, aggregates: &[RatioAggregate]) -> String {
    let plot_w = WIDTH - LEFT - RIGHT;
    let plot_h = HEIGHT - TOP - BOTTOM;
    let xs: Vec<f64> = aggregates.iter().map(|a| a.train_count as f64).collect();
    let (x_min, x_max) = match (xs.iter().copied().reduce(f64::min), xs.iter().copied().reduce(f64::max)) {
        (Some(lo), Some(hi)) if hi > lo => (lo, hi),
        (Some(lo), _) => (lo - 1.0, lo + 1.0),
        _ => (0.0, 1.0),
    };
    let px = |x: f64| LEFT + (x - x_min) / (x_max - x_min) * plot_w;
    let py = |y: f64| TOP + (1.0 - y.clamp(0.0, 1.0)) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"14\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    ));

    // Axes and y grid.
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        TOP + plot_h,
        LEFT + plot_w,
        TOP + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{LEFT}\" y1=\"{TOP}\" x2=\"{LEFT}\" y2=\"{:.2}\" stroke=\"black\"/>\n",
        TOP + plot_h
    ));
    for tick in 0..=5 {
        let y = tick as f64 / 5.0;
        svg.push_str(&format!(
            "<line x1=\"{LEFT}\" y1=\"{0:.2}\" x2=\"{1:.2}\" y2=\"{0:.2}\" stroke=\"#ddd\"/>\n\
             <text x=\"{2:.2}\" y=\"{3:.2}\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">{4:.1}</text>\n",
            py(y),
            LEFT + plot_w,
            LEFT - 6.0,
            py(y) + 4.0,
            y
        ));
    }
    for a in aggregates {
        svg.push_str(&format!(
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"11\">{}</text>\n",
            px(a.train_count as f64),
            TOP + plot_h + 16.0,
            a.train_count
        ));
    }
    svg.push_str(&format!(
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">training images</text>\n",
        LEFT + plot_w / 2.0,
        HEIGHT - 10.0
    ));
    svg.push_str(&format!(
        "<text x=\"16\" y=\"{0:.2}\" transform=\"rotate(-90 16 {0:.2})\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">mean accuracy</text>\n",
        TOP + plot_h / 2.0
    ));

    for a in aggregates {
        let x = px(a.train_count as f64);
        let (lo, hi) = (py(a.mean - a.std), py(a.mean + a.std));
        svg.push_str(&format!(
            "<path d=\"M{x:.2} {lo:.2}V{hi:.2}M{0:.2} {lo:.2}H{1:.2}M{0:.2} {hi:.2}H{1:.2}\" stroke=\"#1f77b4\" fill=\"none\"/>\n",
            x - 4.0,
            x + 4.0
        ));
    }
    let points: Vec<String> = aggregates
        .iter()
        .map(|a| format!("{:.2},{:.2}", px(a.train_count as f64), py(a.mean)))
        .collect();
    svg.push_str(&format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n",
        points.join(" ")
    ));
    for a in aggregates {
        svg.push_str(&format!(
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"#1f77b4\"/>\n",
            px(a.train_count as f64),
            py(a.mean)
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use gik::evalharness::{aggregate, TrainRatio};

    #[test]
    fn one_marker_per_ratio() {
        let aggs: Vec<RatioAggregate> = (1..=3)
            .map(|i| aggregate(TrainRatio::from_permille(i * 100).unwrap(), i as usize * 4, 40, &[0.5, 0.7]))
            .collect();
        let svg = accuracy_curve("a < b", &aggs);
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("a &lt; b"));
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert_eq!(svg, accuracy_curve("a < b", &aggs));
    }

    #[test]
    fn single_point_does_not_divide_by_zero() {
        let aggs = vec![aggregate(TrainRatio::from_permille(100).unwrap(), 16, 144, &[0.8])];
        assert!(!accuracy_curve("x", &aggs).contains("NaN"));
    }
}
