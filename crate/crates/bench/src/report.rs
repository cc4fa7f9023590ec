//! Report files. Same report, same bytes.

use std::path::Path;
use std::str::FromStr;

use crate::accuracy::AccuracyReport;
use crate::load::LoadReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            other => Err(format!("unknown report format {other:?} (csv or json)")),
        }
    }
}

impl Format {
    /// Guesses from a file extension, defaulting to CSV.
    pub fn for_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
            _ => Format::Csv,
        }
    }
}

pub trait Report: serde::Serialize {
    fn to_csv(&self) -> String;

    fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("reports serialize");
        s.push('\n');
        s
    }

    fn render(&self, format: Format) -> String {
        match format {
            Format::Csv => self.to_csv(),
            Format::Json => self.to_json(),
        }
    }
}

fn csv_string(rows: Vec<Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.write_record(&row).expect("writing to a Vec cannot fail");
    }
    String::from_utf8(w.into_inner().expect("flush to Vec")).expect("csv is utf-8")
}

impl Report for LoadReport {
    /// `second,throughput_rps,avg_response_ms`, one row per second.
    fn to_csv(&self) -> String {
        let mut rows = vec![vec!["second".into(), "throughput_rps".into(), "avg_response_ms".into()]];
        rows.extend(self.series.iter().map(|s| {
            vec![
                s.second.to_string(),
                format!("{:.3}", s.throughput_rps),
                format!("{:.3}", s.avg_response_ms),
            ]
        }));
        csv_string(rows)
    }
}

impl Report for AccuracyReport {
    /// One row per experiment and a closing `avg` row.
    fn to_csv(&self) -> String {
        let header = [
            "volume_ml",
            "rate_ml_h",
            "experiment",
            "delivered_volume_ml",
            "pct_error_volume",
            "avg_infusion_rate_ml_h",
            "pct_error_rate",
        ];
        let mut rows = vec![header.iter().map(|h| h.to_string()).collect::<Vec<_>>()];
        for r in &self.rows {
            rows.push(vec![
                self.volume_ml.to_string(),
                self.rate_ml_h.to_string(),
                r.experiment.to_string(),
                format!("{:.2}", r.delivered_volume_ml),
                r.pct_error_volume.to_string(),
                format!("{:.2}", r.avg_rate_ml_h),
                r.pct_error_rate.to_string(),
            ]);
        }
        rows.push(vec![
            self.volume_ml.to_string(),
            self.rate_ml_h.to_string(),
            "avg".into(),
            String::new(),
            self.avg_pct_error_volume.to_string(),
            String::new(),
            self.avg_pct_error_rate.to_string(),
        ]);
        csv_string(rows)
    }
}

pub fn emit_report<R: Report>(report: &R, format: Format, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, report.render(format))
}
