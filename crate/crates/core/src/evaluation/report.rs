//! Evaluation report files: a JSON document plus a ratio-histogram plot.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::raster::RasterImage;

use super::{DetectorSpec, EvalError, EvaluationOutcome};

#[derive(Serialize)]
struct ReferenceScores {
    term1: f64,
    term2: f64,
}

#[derive(Serialize)]
struct ReportDoc<'a> {
    term1: f64,
    term2: f64,
    m_effective: usize,
    skipped: usize,
    /// Scores of the original full-scale run on the real dataset, for
    /// context when comparing.
    full_scale_reference: ReferenceScores,
    mean_l1_predicted: f64,
    mean_l1_input: f64,
    /// Per-trio ratios above 1 indicate spurious detections; counted
    /// here rather than clamped.
    ratios_exceeding_one: usize,
    detector: &'a DetectorSpec,
    #[serde(skip_serializing_if = "Option::is_none")]
    config_fingerprint: Option<&'a str>,
    trios: &'a [super::TrioRow],
}

/// Paths produced by [`emit_report`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReportFiles {
    pub report_json: PathBuf,
    pub ratios_png: PathBuf,
}

/// Write `report.json` and `ratios.png` under `out_dir`.
pub fn emit_report(
    outcome: &EvaluationOutcome,
    detector: &DetectorSpec,
    fingerprint: Option<&str>,
    out_dir: &Path,
) -> Result<ReportFiles, EvalError> {
    fs::create_dir_all(out_dir).map_err(|e| EvalError::Io {
        path: out_dir.to_path_buf(),
        source: e,
    })?;

    let exceeding = outcome
        .rows
        .iter()
        .flat_map(|r| [r.input_ratio, r.predicted_ratio])
        .flatten()
        .filter(|&v| v > 1.0)
        .count();
    let doc = ReportDoc {
        term1: outcome.scores.term1,
        term2: outcome.scores.term2,
        m_effective: outcome.scores.m_effective,
        skipped: outcome.scores.skipped,
        full_scale_reference: ReferenceScores {
            term1: super::FULL_SCALE_REFERENCE_TERM1,
            term2: super::FULL_SCALE_REFERENCE_TERM2,
        },
        mean_l1_predicted: outcome.mean_l1_predicted,
        mean_l1_input: outcome.mean_l1_input,
        ratios_exceeding_one: exceeding,
        detector,
        config_fingerprint: fingerprint,
        trios: &outcome.rows,
    };
    let report_json = out_dir.join("report.json");
    let json = serde_json::to_string_pretty(&doc).expect("report serializes");
    fs::write(&report_json, json).map_err(|e| EvalError::Io {
        path: report_json.clone(),
        source: e,
    })?;

    let ratios_png = out_dir.join("ratios.png");
    let input_ratios: Vec<f64> = outcome.rows.iter().filter_map(|r| r.input_ratio).collect();
    let predicted_ratios: Vec<f64> = outcome
        .rows
        .iter()
        .filter_map(|r| r.predicted_ratio)
        .collect();
    let plot = ratio_histogram(&input_ratios, &predicted_ratios)?;
    plot.save_png(&ratios_png)
        .map_err(|e| EvalError::Plot(e.to_string()))?;

    Ok(ReportFiles {
        report_json,
        ratios_png,
    })
}

const PLOT_W: u32 = 640;
const PLOT_H: u32 = 360;
const N_BINS: usize = 12;
const MARGIN: u32 = 30;

const INPUT_COLOR: [f64; 3] = [0.30, 0.45, 0.75];
const PREDICTED_COLOR: [f64; 3] = [0.90, 0.55, 0.15];
const AXIS_COLOR: [f64; 3] = [0.15, 0.15, 0.15];

fn fill_rect(img: &mut RasterImage, x0: u32, y0: u32, x1: u32, y1: u32, rgb: [f64; 3]) {
    for y in y0..y1.min(img.height()) {
        for x in x0..x1.min(img.width()) {
            for (c, v) in rgb.iter().enumerate() {
                img.set(c, x, y, *v);
            }
        }
    }
}

/// Side-by-side per-bin bars of the input and predicted ratio
/// distributions over [0, max(1.05, observed max)].
fn ratio_histogram(input: &[f64], predicted: &[f64]) -> Result<RasterImage, EvalError> {
    let mut img =
        RasterImage::filled(PLOT_W, PLOT_H, 1.0).map_err(|e| EvalError::Plot(e.to_string()))?;

    let hi = input
        .iter()
        .chain(predicted)
        .fold(1.05_f64, |acc, &v| acc.max(v))
        * 1.0001;
    let mut bins_input = vec![0usize; N_BINS];
    let mut bins_predicted = vec![0usize; N_BINS];
    for &v in input {
        bins_input[((v / hi) * N_BINS as f64) as usize] += 1;
    }
    for &v in predicted {
        bins_predicted[((v / hi) * N_BINS as f64) as usize] += 1;
    }
    let peak = bins_input
        .iter()
        .chain(&bins_predicted)
        .copied()
        .max()
        .unwrap_or(0)
        .max(1) as f64;

    let plot_left = MARGIN;
    let plot_right = PLOT_W - MARGIN / 2;
    let plot_top = MARGIN / 2;
    let plot_bottom = PLOT_H - MARGIN;
    let bin_w = (plot_right - plot_left) / N_BINS as u32;
    let bar_w = (bin_w.saturating_sub(4)) / 2;

    for b in 0..N_BINS {
        let x = plot_left + b as u32 * bin_w;
        for (series, color, offset) in [
            (&bins_input, INPUT_COLOR, 1),
            (&bins_predicted, PREDICTED_COLOR, 2 + bar_w),
        ] {
            let count = series[b];
            if count == 0 {
                continue;
            }
            let height =
                ((count as f64 / peak) * (plot_bottom - plot_top) as f64).round() as u32;
            fill_rect(
                &mut img,
                x + offset,
                plot_bottom - height,
                x + offset + bar_w,
                plot_bottom,
                color,
            );
        }
    }

    // Axes.
    fill_rect(&mut img, plot_left - 1, plot_top, plot_left, plot_bottom + 1, AXIS_COLOR);
    fill_rect(&mut img, plot_left - 1, plot_bottom, plot_right, plot_bottom + 1, AXIS_COLOR);
    // Tick at ratio 1.0.
    let tick_x = plot_left + ((1.0 / hi) * (plot_right - plot_left) as f64) as u32;
    fill_rect(&mut img, tick_x, plot_bottom, tick_x + 1, plot_bottom + 6, AXIS_COLOR);

    // Legend swatches, top-right.
    fill_rect(&mut img, plot_right - 80, plot_top + 4, plot_right - 64, plot_top + 12, INPUT_COLOR);
    fill_rect(
        &mut img,
        plot_right - 80,
        plot_top + 18,
        plot_right - 64,
        plot_top + 26,
        PREDICTED_COLOR,
    );

    Ok(img)
}
