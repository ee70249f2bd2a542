//! Output plumbing: CSV (RFC 4180, 17 significant digits), native SVG
//! polyline plots, and the run manifest.

use crate::CliError;
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};

/// 17 significant digits, '.' decimal separator — round-trips any f64.
pub fn sig17(x: f64) -> String {
    format!("{x:.16e}")
}

/// RFC 4180 table: quoted-on-demand fields, CRLF records.
pub struct CsvDoc {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvDoc {
    pub fn new(header: &[&str]) -> Self {
        CsvDoc {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        fn field(s: &str) -> String {
            if s.contains([',', '"', '\n', '\r']) {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        }
        let mut out = String::new();
        for line in std::iter::once(&self.header).chain(&self.rows) {
            let encoded: Vec<String> = line.iter().map(|s| field(s)).collect();
            out.push_str(&encoded.join(","));
            out.push_str("\r\n");
        }
        out.into_bytes()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let digest = Sha256::digest(bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Minimal log-friendly line plot: one polyline per labelled series.
pub fn svg_polylines(series: &[(String, Vec<(f64, f64)>)], x_label: &str, y_label: &str) -> String {
    const W: f64 = 640.0;
    const H: f64 = 480.0;
    const M: f64 = 60.0;
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in &points {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !(x0 < x1) {
        x1 = x0 + 1.0;
    }
    if !(y0 < y1) {
        y1 = y0 + 1.0;
    }
    let sx = |x: f64| M + (x - x0) / (x1 - x0) * (W - 2.0 * M);
    let sy = |y: f64| H - M - (y - y0) / (y1 - y0) * (H - 2.0 * M);
    let palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" \
         viewBox=\"0 0 {W} {H}\">\n<rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n"
    );
    svg.push_str(&format!(
        "<line x1=\"{M}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n\
         <line x1=\"{M}\" y1=\"{M}\" x2=\"{M}\" y2=\"{}\" stroke=\"black\"/>\n",
        H - M,
        W - M,
        H - M,
        H - M
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"14\">{x_label}</text>\n\
         <text x=\"16\" y=\"{}\" font-size=\"14\" transform=\"rotate(-90 16 {})\" \
         text-anchor=\"middle\">{y_label}</text>\n",
        W / 2.0,
        H - 16.0,
        H / 2.0,
        H / 2.0
    ));
    for (tick, label_x) in [(x0, true), (x1, true), (y0, false), (y1, false)] {
        if label_x {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\" font-size=\"11\">{tick:.3}</text>\n",
                sx(tick),
                H - M + 18.0
            ));
        } else {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" text-anchor=\"end\" font-size=\"11\">{tick:.3}</text>\n",
                M - 6.0,
                sy(tick) + 4.0
            ));
        }
    }
    for (k, (label, pts)) in series.iter().enumerate() {
        let color = palette[k % palette.len()];
        let path: Vec<String> = pts
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            path.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{label}</text>\n",
            W - M + 4.0,
            M + 16.0 * k as f64
        ));
    }
    svg.push_str("</svg>\n");
    svg
}

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

/// Provenance record: rerunning with the same config hash and seed must
/// reproduce every listed file's numeric payload byte for byte.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub config_sha256: String,
    pub master_seed: u64,
    pub workers: usize,
    pub created_unix: u64,
    /// (stage, depth, seed) triples actually consumed.
    pub stage_seeds: Vec<(String, usize, u64)>,
    pub files: Vec<FileEntry>,
}

impl RunManifest {
    pub fn new(config_bytes: &[u8], master_seed: u64, workers: usize) -> Self {
        RunManifest {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            config_sha256: sha256_hex(config_bytes),
            master_seed,
            workers,
            created_unix: std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            stage_seeds: Vec::new(),
            files: Vec::new(),
        }
    }
}

/// Write a file under the output directory and record it in the manifest.
pub fn write_artifact(
    out_dir: &Path,
    name: &str,
    bytes: &[u8],
    manifest: &mut RunManifest,
) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", out_dir.display())))?;
    let path = out_dir.join(name);
    std::fs::write(&path, bytes)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))?;
    manifest.files.push(FileEntry {
        name: name.to_string(),
        bytes: bytes.len(),
        sha256: sha256_hex(bytes),
    });
    Ok(path)
}

pub fn write_manifest(out_dir: &Path, manifest: &RunManifest) -> Result<(), CliError> {
    let json = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    let path = out_dir.join("manifest.json");
    std::fs::write(&path, json)
        .map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}
