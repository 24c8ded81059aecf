//! Score exports and genuine/impostor histograms.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use vcanon_core::verify::{compute_eer, EvalReport};

use crate::error::{Error, Result};
use crate::harness::{Grid, GridCell};
use crate::records;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const MARGIN: f64 = 48.0;
const BINS: usize = 40;
const GENUINE_COLOUR: &str = "#1f77b4";
const IMPOSTOR_COLOUR: &str = "#ff7f0e";

/// Two-column `score,label` CSV, genuine rows first.
pub fn scores_csv(report: &EvalReport) -> String {
    let mut out = String::from("score,label\n");
    for s in &report.genuine_scores {
        let _ = writeln!(out, "{s},genuine");
    }
    for s in &report.impostor_scores {
        let _ = writeln!(out, "{s},impostor");
    }
    out
}

/// Reads a `score,label` CSV back into (genuine, impostor).
pub fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let bad = |reason: String| Error::Manifest { path: path.to_path_buf(), reason };
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let (mut genuine, mut impostor) = (Vec::new(), Vec::new());
    for (line, record) in reader.records().enumerate() {
        let r = record.map_err(|e| bad(e.to_string()))?;
        if r.len() != 2 {
            return Err(bad(format!("row {} has {} fields", line + 2, r.len())));
        }
        let score: f64 = r[0].parse().map_err(|_| bad(format!("row {}: bad score {:?}", line + 2, &r[0])))?;
        if !score.is_finite() {
            return Err(bad(format!("row {}: non-finite score", line + 2)));
        }
        match &r[1] {
            "genuine" => genuine.push(score),
            "impostor" => impostor.push(score),
            other => return Err(bad(format!("row {}: unknown label {other:?}", line + 2))),
        }
    }
    Ok((genuine, impostor))
}

fn histogram(scores: &[f64], lo: f64, hi: f64) -> Vec<f64> {
    let mut counts = vec![0.0; BINS];
    for s in scores {
        let pos = ((s - lo) / (hi - lo) * BINS as f64).floor();
        counts[(pos.max(0.0) as usize).min(BINS - 1)] += 1.0;
    }
    let total = scores.len().max(1) as f64;
    counts.iter().map(|c| c / total).collect()
}

/// Overlaid normalized histograms of both score sets with the EER threshold marked.
pub fn histogram_svg(title: &str, genuine: &[f64], impostor: &[f64], eer: f64, threshold: f64) -> String {
    let (lo, hi) = (-1.0, 1.0);
    let g = histogram(genuine, lo, hi);
    let i = histogram(impostor, lo, hi);
    let peak = g.iter().chain(&i).cloned().fold(0.0, f64::max).max(1e-9);
    let plot_w = WIDTH - 2.0 * MARGIN;
    let plot_h = HEIGHT - 2.0 * MARGIN;
    let x_of = |v: f64| MARGIN + (v - lo) / (hi - lo) * plot_w;
    let bin_w = plot_w / BINS as f64;
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#);
    let _ = writeln!(svg, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(svg, r#"<text x="{}" y="24" font-family="sans-serif" font-size="14" text-anchor="middle">{} (EER {:.2}%)</text>"#, WIDTH / 2.0, escape(title), 100.0 * eer);
    for (heights, colour) in [(&g, GENUINE_COLOUR), (&i, IMPOSTOR_COLOUR)] {
        for (b, h) in heights.iter().enumerate() {
            if *h == 0.0 {
                continue;
            }
            let bar = h / peak * plot_h;
            let _ = writeln!(
                svg,
                r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{colour}" fill-opacity="0.55"/>"#,
                MARGIN + b as f64 * bin_w,
                HEIGHT - MARGIN - bar,
                bin_w,
                bar
            );
        }
    }
    let _ = writeln!(svg, r#"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="black"/>"#, HEIGHT - MARGIN, WIDTH - MARGIN);
    for tick in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11" text-anchor="middle">{tick:.1}</text>"#,
            x_of(tick),
            HEIGHT - MARGIN + 16.0
        );
    }
    let tx = x_of(threshold.clamp(lo, hi));
    let _ = writeln!(
        svg,
        r#"<line x1="{tx:.2}" y1="{MARGIN}" x2="{tx:.2}" y2="{:.2}" stroke="black" stroke-dasharray="5,4"/>"#,
        HEIGHT - MARGIN
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-family="sans-serif" font-size="11">EER threshold {threshold:.4}</text>"#,
        tx + 4.0,
        MARGIN + 12.0
    );
    let legend_y = HEIGHT - 12.0;
    for (k, (label, colour)) in [("genuine", GENUINE_COLOUR), ("impostor", IMPOSTOR_COLOUR)].iter().enumerate() {
        let x = MARGIN + k as f64 * 110.0;
        let _ = writeln!(svg, r#"<rect x="{x}" y="{}" width="12" height="12" fill="{colour}" fill-opacity="0.55"/>"#, legend_y - 10.0);
        let _ = writeln!(svg, r#"<text x="{}" y="{legend_y}" font-family="sans-serif" font-size="11">{label}</text>"#, x + 16.0);
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// File stem of a cell's outputs: `{converter}_{strategy}_{attacker}`.
pub fn cell_name(cell: &GridCell) -> String {
    format!("{}_{}_{}", cell.converter, cell.strategy, cell.attacker)
}

/// Writes `results.csv`, `results.txt`, `scores/<cell>.csv` and
/// `reports/<cell>.json` for every successful cell.
pub fn write_results(grid: &Grid, dir: &Path) -> Result<()> {
    let scores = dir.join("scores");
    let reports = dir.join("reports");
    for d in [dir, &scores, &reports] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    let write = |path: PathBuf, text: String| fs::write(&path, text).map_err(|e| Error::io(&path, e));
    write(dir.join("results.csv"), grid.to_csv())?;
    write(dir.join("results.txt"), grid.to_text_table())?;
    for cell in &grid.cells {
        if let Ok(result) = &cell.outcome {
            let name = cell_name(cell);
            write(scores.join(format!("{name}.csv")), scores_csv(&result.report))?;
            records::persist(result, &reports.join(format!("{name}.json")))?;
        }
    }
    Ok(())
}

/// Renders one SVG per `scores/*.csv` under `results_dir` into `results_dir/plots`
/// and writes `summary.txt`. Returns the summary text.
pub fn render_reports(results_dir: &Path) -> Result<String> {
    let scores_dir = results_dir.join("scores");
    let mut files: Vec<PathBuf> = fs::read_dir(&scores_dir)
        .map_err(|e| Error::io(&scores_dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "csv"))
        .collect();
    if files.is_empty() {
        return Err(Error::Config(format!("no score files in {}", scores_dir.display())));
    }
    files.sort();
    let plots = results_dir.join("plots");
    fs::create_dir_all(&plots).map_err(|e| Error::io(&plots, e))?;
    let mut summary = String::from("cell                                        EER (%)  threshold  genuine  impostor\n");
    for f in &files {
        let name = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        let (genuine, impostor) = read_scores(f)?;
        let (eer, threshold) = compute_eer(&genuine, &impostor).map_err(|e| Error::Manifest {
            path: f.clone(),
            reason: e.to_string(),
        })?;
        let svg = histogram_svg(&name, &genuine, &impostor, eer, threshold);
        let out = plots.join(format!("{name}.svg"));
        fs::write(&out, svg).map_err(|e| Error::io(&out, e))?;
        let _ = writeln!(
            summary,
            "{name:<42}  {:>7.2}  {threshold:>9.4}  {:>7}  {:>8}",
            100.0 * eer,
            genuine.len(),
            impostor.len()
        );
    }
    let grid = results_dir.join("results.txt");
    if let Ok(table) = fs::read_to_string(&grid) {
        summary.push_str("\nEER (%) by attacker and converter/strategy\n");
        summary.push_str(&table);
    }
    let path = results_dir.join("summary.txt");
    fs::write(&path, &summary).map_err(|e| Error::io(&path, e))?;
    Ok(summary)
}
