//! Static SVG scatter plots.

use std::path::Path;

use plotters::prelude::*;

use crate::error::{Error, Result};

fn plot_err(path: &Path) -> impl Fn(String) -> Error + '_ {
    move |msg| Error::io(path, std::io::Error::other(msg))
}

fn x_range(points: &[(f64, f64)]) -> (f64, f64) {
    let lo = points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let hi = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max);
    if lo.is_finite() {
        (lo - 5.0, hi + 5.0)
    } else {
        (0.0, 100.0)
    }
}

/// Optimality ratio against problem size, with the theoretical bound and 1
/// drawn as horizontal lines.
pub fn plot_ratio(path: &Path, points: &[(f64, f64)], bound: f64) -> Result<()> {
    let err = plot_err(path);
    let (x0, x1) = x_range(points);
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Greedy / optimal mutual information", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(50)
        .build_cartesian_2d(x0..x1, 0.0..1.1)
        .map_err(|e| err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc("problem size L*R*P*Q")
        .y_desc("optimality ratio")
        .draw()
        .map_err(|e| err(e.to_string()))?;
    chart
        .draw_series(LineSeries::new([(x0, bound), (x1, bound)], RED.stroke_width(2)))
        .map_err(|e| err(e.to_string()))?;
    chart
        .draw_series(LineSeries::new([(x0, 1.0), (x1, 1.0)], BLACK.mix(0.4)))
        .map_err(|e| err(e.to_string()))?;
    chart
        .draw_series(points.iter().map(|&p| Circle::new(p, 3, BLUE.filled())))
        .map_err(|e| err(e.to_string()))?;
    root.present().map_err(|e| err(e.to_string()))
}

/// Mean greedy mutual information against problem size.
pub fn plot_utility(path: &Path, points: &[(f64, f64)]) -> Result<()> {
    let err = plot_err(path);
    let (x0, x1) = x_range(points);
    let y1 = points.iter().map(|p| p.1).fold(0.0, f64::max).max(1e-3) * 1.1;
    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(e.to_string()))?;
    let mut chart = ChartBuilder::on(&root)
        .caption("Mean greedy mutual information", ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(x0..x1, 0.0..y1)
        .map_err(|e| err(e.to_string()))?;
    chart
        .configure_mesh()
        .x_desc("problem size L*R*P*Q")
        .y_desc("mutual information (nats)")
        .draw()
        .map_err(|e| err(e.to_string()))?;
    chart
        .draw_series(points.iter().map(|&p| Circle::new(p, 4, GREEN.filled())))
        .map_err(|e| err(e.to_string()))?;
    root.present().map_err(|e| err(e.to_string()))
}
