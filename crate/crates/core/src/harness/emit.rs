use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::run::SweepResult;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
    Svg,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Svg => "svg",
        }
    }

    /// Parse a comma-separated list such as `csv,svg`.
    pub fn parse_list(s: &str) -> Result<Vec<Format>> {
        let mut out = Vec::new();
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let f: Format = part.parse()?;
            if !out.contains(&f) {
                out.push(f);
            }
        }
        if out.is_empty() {
            return Err(Error::Config("no output format given".into()));
        }
        Ok(out)
    }
}

impl FromStr for Format {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            "svg" => Ok(Format::Svg),
            other => Err(Error::Config(format!("unknown output format {other:?}"))),
        }
    }
}

/// One line of the results table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[allow(non_snake_case)]
pub struct CsvRow {
    pub algorithm: String,
    pub K: usize,
    pub M: usize,
    pub N: usize,
    pub ensemble: String,
    pub snr_db: Option<f64>,
    pub trials: u64,
    pub successes: u64,
    pub recon_prob: f64,
    pub seed: u64,
}

pub fn csv_rows(result: &SweepResult) -> Vec<CsvRow> {
    let spec = &result.spec;
    result
        .rows
        .iter()
        .map(|r| CsvRow {
            algorithm: r.algorithm.clone(),
            K: r.k,
            M: spec.m,
            N: spec.n,
            ensemble: spec.ensemble.name().to_owned(),
            snr_db: spec.snr_db,
            trials: r.trials,
            successes: r.successes,
            recon_prob: r.recon_prob,
            seed: spec.base_seed,
        })
        .collect()
}

const CSV_HEADER: [&str; 10] = [
    "algorithm",
    "K",
    "M",
    "N",
    "ensemble",
    "snr_db",
    "trials",
    "successes",
    "recon_prob",
    "seed",
];

pub fn to_csv(result: &SweepResult) -> Result<String> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    // written by hand so that an empty sweep still gets its header line
    w.write_record(CSV_HEADER)?;
    for row in csv_rows(result) {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

pub fn parse_csv(text: &str) -> Result<Vec<CsvRow>> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(Error::Config(format!("unexpected csv header {header:?}")));
    }
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

pub fn to_json(result: &SweepResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(result)?)
}

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// Reconstruction probability against `K`, one polyline per algorithm.
pub fn to_svg(result: &SweepResult) -> String {
    let (w, h) = (640.0, 420.0);
    let (left, right, top, bottom) = (60.0, 150.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let spec = &result.spec;
    let ks = &spec.k_values;
    let kmin = ks.iter().copied().min().unwrap_or(0) as f64;
    let kmax = ks.iter().copied().max().unwrap_or(1) as f64;
    let span = if kmax > kmin { kmax - kmin } else { 1.0 };
    let sx = |k: f64| left + (k - kmin) / span * pw;
    let sy = |p: f64| top + (1.0 - p) * ph;

    let mut s = String::new();
    s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let snr = spec.snr_db.map_or("noise-free".to_owned(), |d| format!("SNR {d} dB"));
    let _ = writeln!(
        s,
        "  <text x=\"{}\" y=\"22\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{}</text>",
        left + pw / 2.0,
        escape(&format!("N={}, M={}, {}, {}", spec.n, spec.m, spec.ensemble, snr))
    );
    let _ = writeln!(
        s,
        "  <rect x=\"{left}\" y=\"{top}\" width=\"{pw}\" height=\"{ph}\" fill=\"none\" stroke=\"#444\"/>"
    );
    for i in 0..=4 {
        let p = i as f64 / 4.0;
        let y = sy(p);
        let _ = writeln!(
            s,
            "  <line x1=\"{left}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>",
            left + pw
        );
        let _ = writeln!(
            s,
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{p:.2}</text>",
            left - 6.0,
            y + 4.0
        );
    }
    for &k in ks {
        let _ = writeln!(
            s,
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{k}</text>",
            sx(k as f64),
            top + ph + 16.0
        );
    }
    let _ = writeln!(
        s,
        "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">K</text>",
        left + pw / 2.0,
        h - 12.0
    );
    let _ = writeln!(
        s,
        "  <text x=\"16\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {})\">reconstruction probability</text>",
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (i, label) in result.labels().into_iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let points: Vec<String> = result
            .rows
            .iter()
            .filter(|r| r.algorithm == label)
            .map(|r| format!("{:.2},{:.2}", sx(r.k as f64), sy(r.recon_prob)))
            .collect();
        let _ = writeln!(
            s,
            "  <polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\" points=\"{}\"><title>{}</title></polyline>",
            points.join(" "),
            escape(label)
        );
        let ly = top + 10.0 + 18.0 * i as f64;
        let lx = left + pw + 14.0;
        let _ = writeln!(
            s,
            "  <line x1=\"{lx}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>",
            lx + 20.0
        );
        let _ = writeln!(
            s,
            "  <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            lx + 26.0,
            ly + 4.0,
            escape(label)
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Write `result` to `path` in `format`.
pub fn emit_results(result: &SweepResult, format: Format, path: &Path) -> Result<()> {
    let body = match format {
        Format::Csv => to_csv(result)?,
        Format::Json => to_json(result)?,
        Format::Svg => to_svg(result),
    };
    std::fs::write(path, body)?;
    Ok(())
}
