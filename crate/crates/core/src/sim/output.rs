//! Telemetry CSV, metrics JSON and SVG plots.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::metrics::Metrics;
use super::run::{RunMetadata, Telemetry};
use super::SimError;
use crate::raceline::RacingLine;

/// Version of the telemetry column layout.
pub const TELEMETRY_FORMAT_VERSION: u32 = 1;

pub const TELEMETRY_COLUMNS: [&str; 27] = [
    "t", "x", "y", "xdot", "ydot", "psi", "psidot", "delta", "throttle", "brake", "gear", "e1",
    "e1dot", "e2", "e2dot", "cte", "v_target", "bracket_index", "saturated", "active_line",
    "Caf_hat", "Car_hat", "alpha_f", "alpha_r", "Ff_meas", "Fr_meas", "updated",
];

pub const TELEMETRY_FILE: &str = "telemetry.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const PLOTS_FILE: &str = "plots.svg";

/// Contents of `metrics.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub metadata: RunMetadata,
    pub rows: usize,
    pub metrics: Metrics,
}

/// Writes the telemetry as CSV: a `#` comment line carrying the format
/// version and run metadata, a header row, then one row per control step.
pub fn write_telemetry<W: Write>(telemetry: &Telemetry, writer: W) -> Result<(), csv::Error> {
    let mut writer = writer;
    let m = &telemetry.metadata;
    writeln!(
        writer,
        "# racestack telemetry v{TELEMETRY_FORMAT_VERSION} scenario={} kind={} seed={} config={}",
        m.scenario, m.kind, m.seed, m.config_hash
    )?;
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(TELEMETRY_COLUMNS)?;
    for r in &telemetry.rows {
        let s = &r.state;
        let c = &r.command;
        let e = &r.error;
        wtr.write_record([
            r.t.to_string(),
            s.x.to_string(),
            s.y.to_string(),
            s.xdot.to_string(),
            s.ydot.to_string(),
            s.psi.to_string(),
            s.psidot.to_string(),
            c.delta.to_string(),
            c.throttle.to_string(),
            c.brake.to_string(),
            c.gear.to_string(),
            e.e1.to_string(),
            e.e1dot.to_string(),
            e.e2.to_string(),
            e.e2dot.to_string(),
            r.cte.to_string(),
            r.v_target.to_string(),
            r.bracket_index.to_string(),
            u8::from(r.saturated).to_string(),
            r.active_line.to_string(),
            r.caf_hat.to_string(),
            r.car_hat.to_string(),
            r.alpha_f.to_string(),
            r.alpha_r.to_string(),
            r.ff_meas.to_string(),
            r.fr_meas.to_string(),
            u8::from(r.updated).to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_summary(path: &Path) -> Result<RunSummary, SimError> {
    let text = std::fs::read_to_string(path).map_err(|e| SimError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| SimError::io(path, e))
}

/// Writes `telemetry.csv`, `metrics.json` and `plots.svg` into `out_dir`,
/// creating it if needed. Returns the written paths.
pub fn emit_outputs(
    telemetry: &Telemetry,
    metrics: &Metrics,
    line: &RacingLine,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, SimError> {
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::io(out_dir, e))?;

    let csv_path = out_dir.join(TELEMETRY_FILE);
    let file = std::fs::File::create(&csv_path).map_err(|e| SimError::io(&csv_path, e))?;
    write_telemetry(telemetry, std::io::BufWriter::new(file)).map_err(|e| SimError::io(&csv_path, e))?;

    let json_path = out_dir.join(METRICS_FILE);
    let summary = RunSummary {
        metadata: telemetry.metadata.clone(),
        rows: telemetry.rows.len(),
        metrics: *metrics,
    };
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    std::fs::write(&json_path, json + "\n").map_err(|e| SimError::io(&json_path, e))?;

    let svg_path = out_dir.join(PLOTS_FILE);
    std::fs::write(&svg_path, render_svg(telemetry, line)).map_err(|e| SimError::io(&svg_path, e))?;

    Ok(vec![csv_path, json_path, svg_path])
}

const PANEL_W: f64 = 760.0;
const PANEL_H: f64 = 240.0;
const MARGIN: f64 = 50.0;
const MAX_POINTS: usize = 2000;

struct Panel {
    top: f64,
    height: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Panel {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let (x0, x1) = self.x_range;
        let (y0, y1) = self.y_range;
        let px = MARGIN + (x - x0) / (x1 - x0) * PANEL_W;
        let py = self.top + self.height - (y - y0) / (y1 - y0) * self.height;
        (px, py)
    }

    fn polyline(&self, out: &mut String, points: impl Iterator<Item = (f64, f64)>, color: &str) {
        out.push_str("<polyline fill=\"none\" stroke-width=\"1.2\" stroke=\"");
        out.push_str(color);
        out.push_str("\" points=\"");
        for (x, y) in points {
            let (px, py) = self.map(x, y);
            let _ = write!(out, "{px:.2},{py:.2} ");
        }
        out.push_str("\"/>\n");
    }

    fn frame(&self, out: &mut String, title: &str, x_label: &str, y_label: &str) {
        let _ = writeln!(
            out,
            "<rect x=\"{MARGIN}\" y=\"{:.1}\" width=\"{PANEL_W}\" height=\"{:.1}\" fill=\"none\" stroke=\"#444\"/>",
            self.top, self.height
        );
        let _ = writeln!(
            out,
            "<text x=\"{MARGIN}\" y=\"{:.1}\" font-size=\"13\">{title}</text>",
            self.top - 6.0
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" font-size=\"11\" text-anchor=\"end\">{x_label} [{:.1}, {:.1}]</text>",
            MARGIN + PANEL_W,
            self.top + self.height + 14.0,
            self.x_range.0,
            self.x_range.1
        );
        let _ = writeln!(
            out,
            "<text x=\"4\" y=\"{:.1}\" font-size=\"11\">{y_label} [{:.2}, {:.2}]</text>",
            self.top + self.height + 28.0,
            self.y_range.0,
            self.y_range.1
        );
    }
}

fn padded_range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() || !hi.is_finite() {
        return (-1.0, 1.0);
    }
    let pad = ((hi - lo) * 0.05).max(1e-3);
    (lo - pad, hi + pad)
}

/// Three stacked panels: CTE against time, speed against time, and the
/// driven trace over the racing line.
pub fn render_svg(telemetry: &Telemetry, line: &RacingLine) -> String {
    let rows = &telemetry.rows;
    let stride = rows.len().div_ceil(MAX_POINTS).max(1);
    let thin = || rows.iter().step_by(stride);
    let t_range = padded_range(rows.iter().map(|r| r.t));

    let xy_height = 420.0;
    let total_h = 3.0 * 50.0 + 2.0 * PANEL_H + xy_height + 40.0;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{:.0}\" height=\"{total_h:.0}\" font-family=\"sans-serif\">",
        PANEL_W + 2.0 * MARGIN
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let cte = Panel {
        top: 40.0,
        height: PANEL_H,
        x_range: t_range,
        y_range: padded_range(rows.iter().map(|r| r.cte).chain([0.0])),
    };
    cte.frame(&mut out, "Cross-track error", "t (s)", "cte (m)");
    cte.polyline(&mut out, [(t_range.0, 0.0), (t_range.1, 0.0)].into_iter(), "#bbb");
    cte.polyline(&mut out, thin().map(|r| (r.t, r.cte)), "#c0392b");

    let speed = Panel {
        top: 40.0 + PANEL_H + 50.0,
        height: PANEL_H,
        x_range: t_range,
        y_range: padded_range(rows.iter().flat_map(|r| [r.state.xdot, r.v_target])),
    };
    speed.frame(&mut out, "Speed (target grey)", "t (s)", "v (m/s)");
    speed.polyline(&mut out, thin().map(|r| (r.t, r.v_target)), "#999");
    speed.polyline(&mut out, thin().map(|r| (r.t, r.state.xdot)), "#2471a3");

    // equal axis scaling for the map
    let lx = padded_range(line.samples().iter().map(|s| s.x).chain(rows.iter().map(|r| r.state.x)));
    let ly = padded_range(line.samples().iter().map(|s| s.y).chain(rows.iter().map(|r| r.state.y)));
    let scale = ((lx.1 - lx.0) / PANEL_W).max((ly.1 - ly.0) / xy_height);
    let (cx, cy) = (0.5 * (lx.0 + lx.1), 0.5 * (ly.0 + ly.1));
    let map = Panel {
        top: 40.0 + 2.0 * (PANEL_H + 50.0),
        height: xy_height,
        x_range: (cx - 0.5 * scale * PANEL_W, cx + 0.5 * scale * PANEL_W),
        y_range: (cy - 0.5 * scale * xy_height, cy + 0.5 * scale * xy_height),
    };
    map.frame(&mut out, "Trace (racing line grey)", "x (m)", "y (m)");
    let line_stride = line.len().div_ceil(MAX_POINTS).max(1);
    let first = line.samples()[0];
    map.polyline(
        &mut out,
        line.samples()
            .iter()
            .step_by(line_stride)
            .chain([&first])
            .map(|s| (s.x, s.y)),
        "#999",
    );
    map.polyline(&mut out, thin().map(|r| (r.state.x, r.state.y)), "#27ae60");

    out.push_str("</svg>\n");
    out
}
