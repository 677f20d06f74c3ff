//! Evaluation report files: per-run CSV, `summary.json` and an SVG box plot.

use std::fmt::Write as _;
use std::path::Path;

use affectgan_core::eval::{EvalReport, FiveNumber};
use serde::{Deserialize, Serialize};

use crate::error::{Error, IoContext, Result};

pub const REPORT_CSV: &str = "report.csv";
pub const SUMMARY_JSON: &str = "summary.json";
pub const BOXPLOT_SVG: &str = "boxplot.svg";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FiveNumberRecord {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl From<FiveNumber> for FiveNumberRecord {
    fn from(f: FiveNumber) -> Self {
        Self {
            min: f.min,
            q1: f.q1,
            median: f.median,
            q3: f.q3,
            max: f.max,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: usize,
    pub seeds: Vec<u64>,
    pub arousal: FiveNumberRecord,
    pub valence: FiveNumberRecord,
    pub config: serde_json::Value,
}

pub fn report_csv(report: &EvalReport) -> String {
    let mut s = String::from("run,ccc_arousal,ccc_valence\n");
    for r in &report.per_run {
        writeln!(s, "{},{},{}", r.run, r.ccc_arousal, r.ccc_valence).unwrap();
    }
    s
}

/// Two vertical boxes (arousal, valence) on a CCC axis spanning [-1, 1].
pub fn boxplot_svg(report: &EvalReport) -> String {
    const W: f64 = 360.0;
    const H: f64 = 320.0;
    const TOP: f64 = 20.0;
    const BOTTOM: f64 = 280.0;
    let y = |v: f64| BOTTOM - (v.clamp(-1.0, 1.0) + 1.0) / 2.0 * (BOTTOM - TOP);
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<line x1="50" y1="{TOP}" x2="50" y2="{BOTTOM}" stroke="black"/>"#).unwrap();
    for tick in [-1.0, -0.5, 0.0, 0.5, 1.0] {
        let ty = y(tick);
        writeln!(s, r##"<line x1="45" y1="{ty}" x2="{W}" y2="{ty}" stroke="#ddd"/>"##).unwrap();
        writeln!(s, r#"<text x="40" y="{}" text-anchor="end">{tick:.1}</text>"#, ty + 4.0).unwrap();
    }
    for (i, (name, f)) in [("arousal", report.arousal), ("valence", report.valence)]
        .into_iter()
        .enumerate()
    {
        let cx = 130.0 + 140.0 * i as f64;
        let (x0, x1) = (cx - 35.0, cx + 35.0);
        writeln!(
            s,
            r#"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#,
            y(f.max),
            y(f.q3)
        )
        .unwrap();
        writeln!(
            s,
            r#"<line x1="{cx}" y1="{}" x2="{cx}" y2="{}" stroke="black"/>"#,
            y(f.q1),
            y(f.min)
        )
        .unwrap();
        for v in [f.min, f.max] {
            writeln!(
                s,
                r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
                cx - 15.0,
                y(v),
                cx + 15.0,
                y(v)
            )
            .unwrap();
        }
        writeln!(
            s,
            r##"<rect x="{x0}" y="{}" width="{}" height="{}" fill="#9cc3e6" stroke="black"/>"##,
            y(f.q3),
            x1 - x0,
            y(f.q1) - y(f.q3)
        )
        .unwrap();
        writeln!(
            s,
            r#"<line x1="{x0}" y1="{m}" x2="{x1}" y2="{m}" stroke="black" stroke-width="2"/>"#,
            m = y(f.median)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="{cx}" y="{}" text-anchor="middle">{name}</text>"#,
            BOTTOM + 25.0
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

pub fn write_report(dir: &Path, report: &EvalReport, config: serde_json::Value, svg: bool) -> Result<Summary> {
    std::fs::create_dir_all(dir).at(dir)?;
    let csv_path = dir.join(REPORT_CSV);
    std::fs::write(&csv_path, report_csv(report)).at(&csv_path)?;
    let summary = Summary {
        runs: report.per_run.len(),
        seeds: report.per_run.iter().map(|r| r.seed).collect(),
        arousal: report.arousal.into(),
        valence: report.valence.into(),
        config,
    };
    let path = dir.join(SUMMARY_JSON);
    let json = serde_json::to_vec_pretty(&summary).map_err(|source| Error::Json {
        path: path.clone(),
        source,
    })?;
    std::fs::write(&path, json).at(&path)?;
    if svg {
        let path = dir.join(BOXPLOT_SVG);
        std::fs::write(&path, boxplot_svg(report)).at(&path)?;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use affectgan_core::eval::evaluate_runs;

    #[test]
    fn csv_has_one_row_per_run() {
        let report = evaluate_runs::<String>(3, 0, |i, _| Ok((0.1 * i as f64, 0.5))).unwrap();
        let csv = report_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "run,ccc_arousal,ccc_valence");
        assert_eq!(lines.len(), 4);
        assert_eq!(lines[3], "2,0.2,0.5");
    }

    #[test]
    fn svg_is_well_formed_enough() {
        let report = evaluate_runs::<String>(5, 0, |i, _| Ok((0.1 * i as f64, -0.2))).unwrap();
        let svg = boxplot_svg(&report);
        assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<rect").count(), 2);
    }
}
