//! Output writers: delimited tables, 16-bit PGM images and summary reports.
//! Every file starts with the manifest echo so it is enough to re-run the
//! experiment.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::config::RunManifest;
use crate::error::{Error, Result};
use crate::series::Series;

/// `# `-prefixed manifest text plus derived quantities.
pub fn header_lines(manifest: &RunManifest) -> Vec<String> {
    let mut out = vec!["manifest:".to_string()];
    out.extend(manifest.to_toml().lines().map(str::to_owned));
    for (k, v) in manifest.derived() {
        out.push(format!("derived: {k} = {v}"));
    }
    out
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

/// Comma-separated table with a commented header.
pub fn format_csv(header: &[String], series: &Series) -> String {
    let mut s = String::new();
    for l in header {
        let _ = writeln!(s, "# {l}");
    }
    let _ = writeln!(s, "{}", series.columns.join(","));
    for row in &series.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

pub fn write_csv(path: &Path, header: &[String], series: &Series) -> Result<()> {
    write_file(path, format_csv(header, series).as_bytes())
}

/// Binary 16-bit PGM, max-normalised; the scale factor is stored in the header.
pub fn format_pgm(header: &[String], intensity: &Array2<f64>) -> Vec<u8> {
    let (h, w) = intensity.dim();
    let max = intensity.iter().cloned().fold(0.0, f64::max);
    let mut text = String::from("P5\n");
    for l in header {
        let _ = writeln!(text, "# {l}");
    }
    let _ = writeln!(text, "# scale: pixel 65535 = intensity {max:e}");
    let _ = write!(text, "{w} {h}\n65535\n");
    let mut bytes = text.into_bytes();
    bytes.reserve(2 * w * h);
    for &v in intensity.iter() {
        let q = if max > 0.0 { (v / max * 65535.0).round().clamp(0.0, 65535.0) as u16 } else { 0 };
        bytes.extend_from_slice(&q.to_be_bytes());
    }
    bytes
}

pub fn write_pgm(path: &Path, header: &[String], intensity: &Array2<f64>) -> Result<()> {
    write_file(path, &format_pgm(header, intensity))
}

/// Plain `key = value` report after the commented header.
pub fn write_summary(path: &Path, header: &[String], entries: &[(String, String)]) -> Result<()> {
    let mut s = String::new();
    for l in header {
        let _ = writeln!(s, "# {l}");
    }
    for (k, v) in entries {
        let _ = writeln!(s, "{k} = {v}");
    }
    write_file(path, s.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pgm_round_trip_of_scale() {
        let img = Array2::from_shape_fn((4, 3), |(r, c)| (r * 3 + c) as f64);
        let bytes = format_pgm(&["x".into()], &img);
        let text = String::from_utf8_lossy(&bytes);
        assert!(text.starts_with("P5\n# x\n# scale: pixel 65535 = intensity 1.1e1\n3 4\n65535\n"));
        let data = &bytes[bytes.len() - 24..];
        assert_eq!(u16::from_be_bytes([data[22], data[23]]), 65535);
        assert_eq!(u16::from_be_bytes([data[0], data[1]]), 0);
    }

    #[test]
    fn csv_has_header_and_rows() {
        let mut s = Series::new(["tau", "p"]);
        s.push(vec![1.0, 0.5]);
        let text = format_csv(&["a = 1".into()], &s);
        assert_eq!(text, "# a = 1\ntau,p\n1e0,5e-1\n");
    }
}
