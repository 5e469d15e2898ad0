//! Raster oracle masks from PGM images or delimited numeric grids.

use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{GridSpec, Plane};
use crate::optics::{PlateSpec, RasterMask};

/// Grey levels normalised to `[0, 1]`, row-major, square.
struct Levels {
    n: usize,
    values: Vec<f64>,
}

fn mask_err(path: &Path, message: impl Into<String>) -> Error {
    Error::Mask {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// Whitespace-separated PGM header tokens, skipping `#` comments.
fn pgm_tokens(bytes: &[u8], count: usize) -> Option<(Vec<String>, usize)> {
    let mut out = Vec::new();
    let mut i = 0;
    while out.len() < count {
        while i < bytes.len() && (bytes[i].is_ascii_whitespace() || bytes[i] == b'#') {
            if bytes[i] == b'#' {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            } else {
                i += 1;
            }
        }
        let start = i;
        while i < bytes.len() && !bytes[i].is_ascii_whitespace() {
            i += 1;
        }
        if start == i {
            return None;
        }
        out.push(String::from_utf8_lossy(&bytes[start..i]).into_owned());
    }
    Some((out, i))
}

fn read_pgm(path: &Path, bytes: &[u8]) -> Result<Levels> {
    let (tok, end) = pgm_tokens(bytes, 4).ok_or_else(|| mask_err(path, "truncated PGM header"))?;
    let parse = |s: &str, what: &str| -> Result<usize> {
        s.parse::<usize>().map_err(|_| mask_err(path, format!("bad PGM {what} `{s}`")))
    };
    let (w, h, maxval) = (parse(&tok[1], "width")?, parse(&tok[2], "height")?, parse(&tok[3], "maxval")?);
    if w != h {
        return Err(mask_err(path, format!("mask must be square, got {w}x{h}")));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(mask_err(path, format!("PGM maxval {maxval} out of range")));
    }
    let count = w * h;
    let raw: Vec<usize> = match tok[0].as_str() {
        "P5" => {
            let data = &bytes[(end + 1).min(bytes.len())..];
            let wide = maxval > 255;
            let need = count * if wide { 2 } else { 1 };
            if data.len() < need {
                return Err(mask_err(path, "PGM pixel data is truncated"));
            }
            if wide {
                data[..need].chunks(2).map(|c| ((c[0] as usize) << 8) | c[1] as usize).collect()
            } else {
                data[..need].iter().map(|&b| b as usize).collect()
            }
        }
        "P2" => {
            let text = String::from_utf8_lossy(&bytes[end..]);
            let v: std::result::Result<Vec<usize>, _> = text
                .lines()
                .map(|l| l.split('#').next().unwrap_or(""))
                .flat_map(|l| l.split_whitespace().map(str::to_owned).collect::<Vec<_>>())
                .map(|s| s.parse::<usize>())
                .collect();
            let v = v.map_err(|_| mask_err(path, "non-integer value in P2 data"))?;
            if v.len() < count {
                return Err(mask_err(path, "PGM pixel data is truncated"));
            }
            v[..count].to_vec()
        }
        other => return Err(mask_err(path, format!("unsupported image type `{other}` (need P2 or P5)"))),
    };
    if raw.iter().any(|&v| v > maxval) {
        return Err(mask_err(path, "pixel value exceeds maxval"));
    }
    Ok(Levels {
        n: w,
        values: raw.into_iter().map(|v| v as f64 / maxval as f64).collect(),
    })
}

/// Rows of numbers separated by commas, semicolons, tabs or spaces; values in `[0, 1]`.
fn read_delimited(path: &Path, text: &str) -> Result<Levels> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split(|c: char| c == ',' || c == ';' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| mask_err(path, format!("line {}: `{s}` is not a number", k + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(mask_err(path, "delimited mask must be a non-empty square grid"));
    }
    let values: Vec<f64> = rows.into_iter().flatten().collect();
    if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(mask_err(path, "delimited mask values must lie in [0, 1]"));
    }
    Ok(Levels { n, values })
}

/// Nearest-neighbour resampling onto an `m x m` grid.
fn resample(l: &Levels, m: usize) -> Levels {
    let values = (0..m * m)
        .map(|k| {
            let (r, c) = (k / m, k % m);
            let sr = ((r as f64 + 0.5) * l.n as f64 / m as f64).floor() as usize;
            let sc = ((c as f64 + 0.5) * l.n as f64 / m as f64).floor() as usize;
            l.values[sr.min(l.n - 1) * l.n + sc.min(l.n - 1)]
        })
        .collect();
    Levels { n: m, values }
}

/// Read an oracle mask and map grey levels linearly onto `[phase_min, phase_max]`
/// (phase per pass). Grid mismatch is an error unless `allow_resample`.
pub fn ingest_mask(
    path: &Path,
    grid: &GridSpec,
    phase_min: f64,
    phase_max: f64,
    passes: u32,
    allow_resample: bool,
) -> Result<PlateSpec> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let levels = if bytes.starts_with(b"P5") || bytes.starts_with(b"P2") {
        read_pgm(path, &bytes)?
    } else {
        let text = String::from_utf8(bytes).map_err(|_| mask_err(path, "neither a PGM nor UTF-8 text"))?;
        read_delimited(path, &text)?
    };
    let levels = if levels.n == grid.n() {
        levels
    } else if allow_resample {
        resample(&levels, grid.n())
    } else {
        return Err(Error::GridMismatch(format!(
            "mask {} is {}x{} but the grid is {}x{} (set oracle.resample = true to resample)",
            path.display(),
            levels.n,
            levels.n,
            grid.n(),
            grid.n()
        )));
    };
    let phases = levels
        .values
        .iter()
        .map(|v| phase_min + (phase_max - phase_min) * v)
        .collect();
    PlateSpec::with_raster(
        Plane::Image,
        RasterMask {
            n: levels.n,
            phases,
            background: phase_min,
        },
        passes,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(dir: &Path, name: &str, bytes: &[u8]) -> std::path::PathBuf {
        let p = dir.join(name);
        std::fs::File::create(&p).unwrap().write_all(bytes).unwrap();
        p
    }

    #[test]
    fn binary_and_ascii_pgm_agree() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new(64, 1e-5).unwrap();
        let mut p5 = b"P5\n# comment\n64 64\n255\n".to_vec();
        let mut p2 = String::from("P2\n64 64\n255\n");
        for k in 0..64 * 64 {
            let v = if (k / 64) == 10 && (k % 64) < 5 { 255u8 } else { 0 };
            p5.push(v);
            p2.push_str(&format!("{v} "));
        }
        let a = ingest_mask(&write(dir.path(), "a.pgm", &p5), &grid, 0.0, 1.5, 2, false).unwrap();
        let b = ingest_mask(&write(dir.path(), "b.pgm", p2.as_bytes()), &grid, 0.0, 1.5, 2, false).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.regions(&grid).unwrap().len(), 1);
    }

    #[test]
    fn mismatched_size_needs_resample() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new(64, 1e-5).unwrap();
        let text: String = (0..32).map(|_| vec!["0"; 32].join(",") + "\n").collect();
        let p = write(dir.path(), "m.csv", text.as_bytes());
        assert!(matches!(ingest_mask(&p, &grid, 0.0, 1.0, 2, false), Err(Error::GridMismatch(_))));
        let plate = ingest_mask(&p, &grid, 0.0, 1.0, 2, true).unwrap();
        assert!(plate.compile(&grid).unwrap().is_identity());
    }

    #[test]
    fn malformed_files_are_mask_errors() {
        let dir = tempfile::tempdir().unwrap();
        let grid = GridSpec::new(64, 1e-5).unwrap();
        let p = write(dir.path(), "bad.csv", b"0,1\n0\n");
        assert!(matches!(ingest_mask(&p, &grid, 0.0, 1.0, 2, true), Err(Error::Mask { .. })));
        let p = write(dir.path(), "bad.pgm", b"P5\n4 4\n255\n\x00\x00");
        assert!(matches!(ingest_mask(&p, &grid, 0.0, 1.0, 2, true), Err(Error::Mask { .. })));
    }
}
