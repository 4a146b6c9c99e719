//! SVG figures from run directories.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::runner::{TRACE_FILE, TRACKER_FILE};
use crate::error::{Error, Result};

const SIZE: (u32, u32) = (900, 560);

struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn read(path: &Path) -> Result<Option<Self>> {
        if !path.exists() {
            return Ok(None);
        }
        let mut reader = csv::Reader::from_path(path)?;
        let header = reader.headers()?.iter().map(String::from).collect();
        let rows = reader
            .records()
            .map(|r| r.map(|r| r.iter().map(String::from).collect()))
            .collect::<std::result::Result<Vec<Vec<String>>, _>>()?;
        Ok(Some(Self { header, rows }))
    }

    fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    fn value(&self, row: &[String], col: usize, path: &Path) -> Result<f64> {
        row[col].parse().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            message: format!("non-numeric value {:?} in column {}", row[col], self.header[col]),
        })
    }
}

type Series = BTreeMap<usize, Vec<(f64, f64)>>;

fn bounds(series: &[&Series]) -> ((f64, f64), (f64, f64)) {
    let pts = series.iter().flat_map(|s| s.values()).flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in pts {
        if x.is_finite() && y.is_finite() {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    let pad = ((y1 - y0) * 0.05).max(1e-6);
    ((x0, x1), (y0 - pad, y1 + pad))
}

fn plot_err(e: impl std::fmt::Display) -> Error {
    Error::Plot(e.to_string())
}

fn draw(path: &Path, title: &str, xlabel: &str, solid: &Series, dashed: Option<(&Series, &str)>) -> Result<()> {
    let all: Vec<&Series> = std::iter::once(solid).chain(dashed.map(|d| d.0)).collect();
    let ((x0, x1), (y0, y1)) = bounds(&all);
    let root = SVGBackend::new(path, SIZE).into_drawing_area();
    root.fill(&WHITE).map_err(plot_err)?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(70)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(plot_err)?;
    chart.configure_mesh().x_desc(xlabel).draw().map_err(plot_err)?;
    for (k, (agent, pts)) in solid.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        chart
            .draw_series(LineSeries::new(pts.iter().copied(), color.stroke_width(2)))
            .map_err(plot_err)?
            .label(format!("agent {agent}"))
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color));
    }
    if let Some((series, label)) = dashed {
        for (k, pts) in series.values().enumerate() {
            let color = Palette99::pick(k).mix(0.6);
            let style = color.stroke_width(1);
            let series = DashedLineSeries::new(pts.iter().copied(), 6, 4, style);
            let drawn = chart.draw_series(series).map_err(plot_err)?;
            if k == 0 {
                drawn
                    .label(label.to_string())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], BLACK.mix(0.6)));
            }
        }
    }
    if solid.len() <= 12 {
        chart
            .configure_series_labels()
            .background_style(WHITE.mix(0.8))
            .border_style(BLACK)
            .draw()
            .map_err(plot_err)?;
    }
    root.present().map_err(plot_err)
}

fn collect(table: &Table, path: &Path, x: usize, agent: usize, y: usize) -> Result<Series> {
    let mut series = Series::new();
    for row in &table.rows {
        let a: usize = table.value(row, agent, path)? as usize;
        let point = (table.value(row, x, path)?, table.value(row, y, path)?);
        series.entry(a).or_default().push(point);
    }
    Ok(series)
}

fn estimates_plot(dir: &Path, table: &Table, path: &Path) -> Result<PathBuf> {
    let missing = |c: &str| Error::Parse { path: path.to_path_buf(), message: format!("missing column {c}") };
    let (x, label) = match table.column("epoch") {
        Some(c) => (c, "epoch"),
        None => (table.column("iteration").ok_or_else(|| missing("epoch"))?, "iteration"),
    };
    let agent = table.column("agent").ok_or_else(|| missing("agent"))?;
    let y = table.column("x_0").ok_or_else(|| missing("x_0"))?;
    let series = collect(table, path, x, agent, y)?;
    let out = dir.join("estimates.svg");
    draw(&out, "agent estimates (first coordinate)", label, &series, None)?;
    Ok(out)
}

fn tracker_plot(dir: &Path, table: &Table, path: &Path) -> Result<PathBuf> {
    let missing = |c: &str| Error::Parse { path: path.to_path_buf(), message: format!("missing column {c}") };
    let tick = table.column("tick").ok_or_else(|| missing("tick"))?;
    let agent = table.column("agent").ok_or_else(|| missing("agent"))?;
    let out = dir.join("tracker.svg");
    if let Some(est) = table.column("estimate_0") {
        let tracker = collect(table, path, tick, agent, est)?;
        let naive = table.column("naive_0").map(|c| collect(table, path, tick, agent, c)).transpose()?;
        draw(&out, "tracker estimate vs naive partial average", "tick", &tracker, naive.as_ref().map(|n| (n, "naive")))?;
    } else {
        let r = table.column("r_0").ok_or_else(|| missing("r_0"))?;
        let s = table.column("s").ok_or_else(|| missing("s"))?;
        let mut series = Series::new();
        for row in &table.rows {
            let a = table.value(row, agent, path)? as usize;
            let sv = table.value(row, s, path)?;
            if sv.abs() > 1e-9 {
                series
                    .entry(a)
                    .or_default()
                    .push((table.value(row, tick, path)?, table.value(row, r, path)? / sv));
            }
        }
        draw(&out, "tracker ratio r/s (first coordinate)", "tick", &series, None)?;
    }
    Ok(out)
}

/// Renders every figure the run directory supports and returns the written paths.
pub fn emit_plots(dir: &Path) -> Result<Vec<PathBuf>> {
    let trace_path = dir.join(TRACE_FILE);
    let tracker_path = dir.join(TRACKER_FILE);
    let trace = Table::read(&trace_path)?;
    let tracker = Table::read(&tracker_path)?;
    if trace.is_none() && tracker.is_none() {
        return Err(Error::MissingTrace(format!("no {TRACE_FILE} or {TRACKER_FILE} in {}", dir.display())));
    }
    let mut written = Vec::new();
    if let Some(t) = trace {
        if t.rows.is_empty() {
            return Err(Error::MissingTrace(format!("{} has no rows", trace_path.display())));
        }
        written.push(estimates_plot(dir, &t, &trace_path)?);
    }
    if let Some(t) = tracker {
        if t.rows.is_empty() {
            return Err(Error::MissingTrace(format!("{} has no rows", tracker_path.display())));
        }
        written.push(tracker_plot(dir, &t, &tracker_path)?);
    }
    Ok(written)
}
