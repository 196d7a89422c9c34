//! CSV and SVG emitters for the evaluation figures. The SVG output is
//! deliberately plain (fixed canvas, no styling options): enough to eyeball
//! score distributions, ROC curves, and F1 trends without a plotting stack.
//!
//! Floats are written with Rust's shortest round-trip formatting, so parsing
//! a CSV back yields bit-identical values.

use std::fmt::Write as _;
use std::path::Path;

use crate::Result;

use super::{HistogramPair, RocCurve, TrendPoint};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 48.0;

pub fn write_roc_csv(curve: &RocCurve, path: &Path) -> Result<()> {
    let mut out = String::from("threshold,false_positive_rate,true_positive_rate\n");
    for p in &curve.points {
        let threshold = p.threshold.map(|t| t.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{}",
            threshold, p.false_positive_rate, p.true_positive_rate
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_histogram_csv(hist: &HistogramPair, path: &Path) -> Result<()> {
    let mut out = String::from("bin_lo,bin_hi,nota_count,other_count\n");
    let width = (hist.hi - hist.lo) / hist.bins as f64;
    for b in 0..hist.bins {
        writeln!(
            out,
            "{},{},{},{}",
            hist.lo + width * b as f64,
            hist.lo + width * (b + 1) as f64,
            hist.nota_counts[b],
            hist.other_counts[b]
        )
        .expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_trend_csv(points: &[TrendPoint], path: &Path) -> Result<()> {
    let mut out = String::from("detector,x,average_f1\n");
    for p in points {
        writeln!(out, "{},{},{}", p.detector, p.x, p.average_f1).expect("string write");
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn svg_open(title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" text-anchor=\"middle\" font-family=\"sans-serif\" \
         font-size=\"16\">{title}</text>\n",
        WIDTH / 2.0
    )
}

fn svg_axes(out: &mut String) {
    let x0 = MARGIN;
    let y0 = HEIGHT - MARGIN;
    let x1 = WIDTH - MARGIN;
    writeln!(
        out,
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{MARGIN}\" x2=\"{x0}\" y2=\"{y0}\" stroke=\"black\"/>"
    )
    .expect("string write");
}

/// Maps a unit-square point into the plot area (y grows upward).
fn to_canvas(x: f64, y: f64) -> (f64, f64) {
    (
        MARGIN + x * (WIDTH - 2.0 * MARGIN),
        HEIGHT - MARGIN - y * (HEIGHT - 2.0 * MARGIN),
    )
}

pub fn write_roc_svg(curve: &RocCurve, path: &Path) -> Result<()> {
    let mut out = svg_open(&format!("ROC (AUC {:.4})", curve.auc));
    svg_axes(&mut out);
    let coords: Vec<String> = curve
        .points
        .iter()
        .map(|p| {
            let (cx, cy) = to_canvas(p.false_positive_rate, p.true_positive_rate);
            format!("{cx:.2},{cy:.2}")
        })
        .collect();
    writeln!(
        out,
        "<polyline points=\"{}\" fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\"/>",
        coords.join(" ")
    )
    .expect("string write");
    let (dx0, dy0) = to_canvas(0.0, 0.0);
    let (dx1, dy1) = to_canvas(1.0, 1.0);
    writeln!(
        out,
        "<line x1=\"{dx0}\" y1=\"{dy0}\" x2=\"{dx1}\" y2=\"{dy1}\" \
         stroke=\"gray\" stroke-dasharray=\"4\"/>\n</svg>"
    )
    .expect("string write");
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_histogram_svg(hist: &HistogramPair, path: &Path) -> Result<()> {
    let mut out = svg_open("Max-score distribution by class");
    svg_axes(&mut out);
    let peak = hist
        .nota_counts
        .iter()
        .chain(&hist.other_counts)
        .copied()
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let slot = 1.0 / hist.bins as f64;
    for b in 0..hist.bins {
        for (series, color, shift) in [
            (&hist.nota_counts, "indianred", 0.0f64),
            (&hist.other_counts, "steelblue", 0.5),
        ] {
            let h = series[b] as f64 / peak;
            let (x, y) = to_canvas((b as f64 + 0.05 + 0.45 * shift.ceil()) * slot, h);
            let (_, base) = to_canvas(0.0, 0.0);
            writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" \
                 fill=\"{color}\" fill-opacity=\"0.7\"/>",
                0.45 * slot * (WIDTH - 2.0 * MARGIN),
                base - y
            )
            .expect("string write");
        }
    }
    out.push_str("</svg>\n");
    std::fs::write(path, out)?;
    Ok(())
}

pub fn write_trend_svg(points: &[TrendPoint], path: &Path) -> Result<()> {
    let mut out = svg_open("Average F1 vs candidate count");
    svg_axes(&mut out);
    let mut detectors: Vec<String> = points.iter().map(|p| p.detector.clone()).collect();
    detectors.sort();
    detectors.dedup();
    let x_max = points.iter().map(|p| p.x).max().unwrap_or(1) as f64;
    let palette = ["steelblue", "indianred", "seagreen", "darkorange", "purple"];
    for (di, detector) in detectors.iter().enumerate() {
        let mut series: Vec<&TrendPoint> =
            points.iter().filter(|p| &p.detector == detector).collect();
        series.sort_by_key(|p| p.x);
        let coords: Vec<String> = series
            .iter()
            .map(|p| {
                let (cx, cy) = to_canvas(p.x as f64 / x_max, p.average_f1);
                format!("{cx:.2},{cy:.2}")
            })
            .collect();
        let color = palette[di % palette.len()];
        writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" \
             fill=\"{color}\">{detector}</text>",
            coords.join(" "),
            WIDTH - MARGIN + 4.0 - 120.0,
            MARGIN + 16.0 * di as f64
        )
        .expect("string write");
    }
    out.push_str("</svg>\n");
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::RocPoint;

    #[test]
    fn roc_csv_round_trips_float_values() {
        let curve = RocCurve {
            points: vec![
                RocPoint {
                    threshold: None,
                    false_positive_rate: 0.0,
                    true_positive_rate: 0.0,
                },
                RocPoint {
                    threshold: Some(0.1 + 0.2), // deliberately non-representable
                    false_positive_rate: 1.0 / 3.0,
                    true_positive_rate: 2.0 / 7.0,
                },
            ],
            auc: 0.5,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("roc.csv");
        write_roc_csv(&curve, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        for (line, point) in text.lines().skip(1).zip(&curve.points) {
            let fields: Vec<&str> = line.split(',').collect();
            let threshold = (!fields[0].is_empty()).then(|| fields[0].parse::<f64>().unwrap());
            assert_eq!(threshold, point.threshold);
            assert_eq!(fields[1].parse::<f64>().unwrap(), point.false_positive_rate);
            assert_eq!(fields[2].parse::<f64>().unwrap(), point.true_positive_rate);
        }
    }

    #[test]
    fn svg_files_are_wellformed_enough_to_open_and_close() {
        let dir = tempfile::tempdir().unwrap();
        let hist = HistogramPair {
            lo: 0.0,
            hi: 1.0,
            bins: 4,
            nota_counts: vec![1, 0, 2, 0],
            other_counts: vec![0, 3, 0, 1],
        };
        let path = dir.path().join("hist.svg");
        write_histogram_svg(&hist, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.trim_end().ends_with("</svg>"));
        assert_eq!(text.matches("<rect").count(), 1 + 8); // background + bars

        let trend = vec![
            TrendPoint {
                detector: "direct".into(),
                x: 2,
                average_f1: 0.9,
            },
            TrendPoint {
                detector: "direct".into(),
                x: 10,
                average_f1: 0.6,
            },
        ];
        let path = dir.path().join("trend.svg");
        write_trend_svg(&trend, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("polyline"));
        assert!(text.contains(">direct<"));
    }
}
