//! Self-contained SVG convergence plots: log-scale distances over steps,
//! two polylines, no external assets. Output bytes are a pure function of
//! the input rows, so plots can be golden-tested.

use std::path::Path;

use crate::error::{Error, Result};
use crate::harness::TRACE_CSV_HEADER;
use crate::io::write_atomic;

/// Values at or below this are clipped on the log axis.
pub const LOG_FLOOR: f64 = 1e-16;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 24.0;
const MARGIN_TOP: f64 = 24.0;
const MARGIN_BOTTOM: f64 = 56.0;

#[derive(Debug, Clone, Copy)]
pub struct TraceRow {
    pub step: usize,
    pub dist_to_p: f64,
    pub adjoint_dist: f64,
}

/// Reads the columns the plot needs from a trace CSV.
pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_CSV_HEADER => {}
        other => {
            return Err(Error::Parse(format!(
                "bad trace header {:?} in {}",
                other,
                path.display()
            )))
        }
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(Error::Parse(format!(
                "line {}: expected 6 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let parse = |s: &str| -> Result<f64> {
            s.parse()
                .map_err(|_| Error::Parse(format!("line {}: bad float '{s}'", i + 2)))
        };
        rows.push(TraceRow {
            step: fields[0]
                .parse()
                .map_err(|_| Error::Parse(format!("line {}: bad step '{}'", i + 2, fields[0])))?,
            dist_to_p: parse(fields[3])?,
            adjoint_dist: parse(fields[4])?,
        });
    }
    if rows.is_empty() {
        return Err(Error::Parse(format!("{}: no data rows", path.display())));
    }
    Ok(rows)
}

fn fmt(x: f64) -> String {
    format!("{x:.2}")
}

/// Renders the SVG document for a trace.
pub fn render_svg(rows: &[TraceRow]) -> String {
    let max_step = rows.iter().map(|r| r.step).max().unwrap_or(0).max(1);
    let clipped = |v: f64| v.max(LOG_FLOOR);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for r in rows {
        for v in [clipped(r.dist_to_p), clipped(r.adjoint_dist)] {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    let mut dec_lo = lo.log10().floor() as i32;
    let mut dec_hi = hi.log10().ceil() as i32;
    if dec_hi <= dec_lo {
        dec_hi = dec_lo + 1;
    }
    dec_lo = dec_lo.max(-16);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |step: usize| MARGIN_LEFT + plot_w * step as f64 / max_step as f64;
    let y_of = |v: f64| {
        let t = (clipped(v).log10() - f64::from(dec_lo)) / f64::from(dec_hi - dec_lo);
        MARGIN_TOP + plot_h * (1.0 - t)
    };

    let polyline = |values: &dyn Fn(&TraceRow) -> f64, color: &str| {
        let points: Vec<String> = rows
            .iter()
            .map(|r| format!("{},{}", fmt(x_of(r.step)), fmt(y_of(values(r)))))
            .collect();
        format!(
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            points.join(" ")
        )
    };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    ));
    svg.push_str("  <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // Axes.
    let x0 = MARGIN_LEFT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y1 = MARGIN_TOP;
    svg.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(x0),
        fmt(y0),
        fmt(x1),
        fmt(y0)
    ));
    svg.push_str(&format!(
        "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(x0),
        fmt(y0),
        fmt(x0),
        fmt(y1)
    ));

    // X ticks: five evenly spaced steps, deduplicated for short traces.
    let ticks: std::collections::BTreeSet<usize> =
        (0..=4u32).map(|i| max_step * i as usize / 4).collect();
    for step in ticks {
        let x = x_of(step);
        svg.push_str(&format!(
            "  <line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\"/>\n",
            fmt(x),
            fmt(y0),
            fmt(y0 + 5.0)
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"middle\">{step}</text>\n",
            fmt(x),
            fmt(y0 + 20.0)
        ));
    }
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\">step</text>\n",
        fmt((x0 + x1) / 2.0),
        fmt(HEIGHT - 14.0)
    ));

    // Y ticks: one per decade, thinned to at most 9 labels.
    let decades = dec_hi - dec_lo;
    let stride = ((decades as usize) / 8).max(1);
    let mut dec = dec_lo;
    while dec <= dec_hi {
        let y = y_of(10f64.powi(dec));
        svg.push_str(&format!(
            "  <line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"black\"/>\n",
            fmt(x0 - 5.0),
            fmt(y),
            fmt(x0)
        ));
        svg.push_str(&format!(
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             text-anchor=\"end\">1e{dec}</text>\n",
            fmt(x0 - 9.0),
            fmt(y + 4.0)
        ));
        dec += stride as i32;
    }
    svg.push_str(&format!(
        "  <text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" \
         text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">distance</text>\n",
        fmt((y0 + y1) / 2.0),
        fmt((y0 + y1) / 2.0)
    ));

    svg.push_str(&polyline(&|r: &TraceRow| r.dist_to_p, "#1f77b4"));
    svg.push_str(&polyline(&|r: &TraceRow| r.adjoint_dist, "#ff7f0e"));

    // Legend.
    let lx = WIDTH - MARGIN_RIGHT - 170.0;
    svg.push_str(&format!(
        "  <line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#1f77b4\" stroke-width=\"1.5\"/>\n",
        fmt(lx),
        fmt(MARGIN_TOP + 12.0),
        fmt(lx + 24.0)
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">dist_to_P</text>\n",
        fmt(lx + 30.0),
        fmt(MARGIN_TOP + 16.0)
    ));
    svg.push_str(&format!(
        "  <line x1=\"{0}\" y1=\"{1}\" x2=\"{2}\" y2=\"{1}\" stroke=\"#ff7f0e\" stroke-width=\"1.5\"/>\n",
        fmt(lx),
        fmt(MARGIN_TOP + 30.0),
        fmt(lx + 24.0)
    ));
    svg.push_str(&format!(
        "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">adjoint_dist</text>\n",
        fmt(lx + 30.0),
        fmt(MARGIN_TOP + 34.0)
    ));

    svg.push_str("</svg>\n");
    svg
}

/// Reads a trace CSV and writes the SVG plot.
pub fn plot_trace(trace_path: &Path, out_path: &Path) -> Result<()> {
    let rows = read_trace_csv(trace_path)?;
    write_atomic(out_path, render_svg(&rows).as_bytes())
}
