//! CSV input/output for visibility curves, fringe scans and scan manifests.
//!
//! Files are comma separated with a mandatory header row; lines starting with `#` are comments.
//! Writes go to a temporary file in the destination directory and are then renamed into place.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::atomic_levels::Sublevel;
use crate::fringe_analysis::FringeSample;
use crate::halfint::HalfInt;
use crate::visibility_model::{SublevelPopulation, VisibilityPoint};

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Formats a number so that it reads back to the same `f64`, without locale effects.
pub fn fmt_num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || (1e-4..1e6).contains(&a) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

/// Writes `contents` to `path` atomically.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    let result = (|| {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
        std::fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result.map_err(io_err(path))
}

/// Rows of a CSV file with their 1-based line numbers, comments removed.
pub struct CsvTable {
    pub path: PathBuf,
    pub headers: Vec<String>,
    pub rows: Vec<(usize, Vec<String>)>,
}

impl CsvTable {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .flexible(false)
            .from_reader(text.as_bytes());
        let parse_err = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let headers: Vec<String> = reader
            .headers()
            .map_err(|e| parse_err(e.position().map_or(1, |p| p.line() as usize), e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        if headers.iter().all(String::is_empty) {
            return Err(parse_err(1, "missing header row".into()));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec.map_err(|e| parse_err(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line() as usize);
            rows.push((line, rec.iter().map(str::to_string).collect()));
        }
        Ok(CsvTable {
            path: path.to_path_buf(),
            headers,
            rows,
        })
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.headers.iter().position(|h| h == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column(name).ok_or_else(|| Error::Parse {
            path: self.path.clone(),
            line: 1,
            message: format!("missing column `{name}`"),
        })
    }

    pub fn number(&self, line: usize, row: &[String], col: usize) -> Result<f64> {
        let cell = &row[col];
        cell.parse::<f64>().map_err(|_| Error::Parse {
            path: self.path.clone(),
            line,
            message: format!("column `{}`: `{cell}` is not a number", self.headers[col]),
        })
    }
}

/// Reads `current_A, V_r[, phase_rad][, sigma_V_r][, sigma_phase_rad]`.
pub fn read_visibility_csv(path: &Path) -> Result<Vec<VisibilityPoint>> {
    let t = CsvTable::read(path)?;
    let ci = t.require_column("current_A")?;
    let cv = t.require_column("V_r")?;
    let cp = t.column("phase_rad");
    let cs = t.column("sigma_V_r");
    let csp = t.column("sigma_phase_rad");
    let opt = |line, row: &[String], c: Option<usize>| -> Result<Option<f64>> {
        match c {
            Some(c) if !row[c].is_empty() => t.number(line, row, c).map(Some),
            _ => Ok(None),
        }
    };
    t.rows
        .iter()
        .map(|(line, row)| {
            Ok(VisibilityPoint {
                current_a: t.number(*line, row, ci)?,
                v_r: t.number(*line, row, cv)?,
                phase_rad: opt(*line, row, cp)?.unwrap_or(0.0),
                sigma_v_r: opt(*line, row, cs)?,
                sigma_phase_rad: opt(*line, row, csp)?,
            })
        })
        .collect()
}

/// Visibility curve as CSV text; uncertainty columns appear when any point has them.
pub fn visibility_csv(points: &[VisibilityPoint]) -> String {
    let with_sigma = points.iter().any(|p| p.sigma_v_r.is_some() || p.sigma_phase_rad.is_some());
    let mut out = String::from("current_A,V_r,phase_rad");
    if with_sigma {
        out.push_str(",sigma_V_r,sigma_phase_rad");
    }
    out.push('\n');
    for p in points {
        out.push_str(&format!("{},{},{}", fmt_num(p.current_a), fmt_num(p.v_r), fmt_num(p.phase_rad)));
        if with_sigma {
            let s = |v: Option<f64>| v.map(fmt_num).unwrap_or_default();
            out.push_str(&format!(",{},{}", s(p.sigma_v_r), s(p.sigma_phase_rad)));
        }
        out.push('\n');
    }
    out
}

/// Reads a scan file with columns `x3_m, counts`.
pub fn read_scan_csv(path: &Path) -> Result<Vec<FringeSample>> {
    let t = CsvTable::read(path)?;
    let cx = t.require_column("x3_m")?;
    let cc = t.require_column("counts")?;
    t.rows
        .iter()
        .map(|(line, row)| {
            let counts = t.number(*line, row, cc)?;
            if !(counts >= 0.0) {
                return Err(Error::Parse {
                    path: t.path.clone(),
                    line: *line,
                    message: format!("negative counts {counts}"),
                });
            }
            Ok(FringeSample {
                x3_m: t.number(*line, row, cx)?,
                counts,
            })
        })
        .collect()
}

pub fn scan_csv(samples: &[FringeSample]) -> String {
    let mut out = String::from("x3_m,counts\n");
    for s in samples {
        out.push_str(&format!("{},{}\n", fmt_num(s.x3_m), fmt_num(s.counts)));
    }
    out
}

/// One row of a scan manifest.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    /// Path as written in the manifest, resolved against the manifest's directory.
    pub file: PathBuf,
    pub current_a: f64,
    pub timestamp_s: f64,
    pub is_reference: bool,
    pub line: usize,
}

/// Reads `file, current_A, timestamp_s, is_reference`.
pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let t = CsvTable::read(path)?;
    let cf = t.require_column("file")?;
    let ci = t.require_column("current_A")?;
    let ct = t.require_column("timestamp_s")?;
    let cr = t.require_column("is_reference")?;
    let base = path.parent().unwrap_or(Path::new(""));
    t.rows
        .iter()
        .map(|(line, row)| {
            let is_reference = match row[cr].to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" => true,
                "0" | "false" | "no" => false,
                other => {
                    return Err(Error::Parse {
                        path: t.path.clone(),
                        line: *line,
                        message: format!("is_reference must be true/false, got `{other}`"),
                    })
                }
            };
            Ok(ManifestEntry {
                file: base.join(&row[cf]),
                current_a: t.number(*line, row, ci)?,
                timestamp_s: t.number(*line, row, ct)?,
                is_reference,
                line: *line,
            })
        })
        .collect()
}

/// Reads a population table with columns `F, M_F, weight` (spins as `3/2`, `1`, ...).
pub fn read_population_csv(path: &Path) -> Result<SublevelPopulation> {
    let t = CsvTable::read(path)?;
    let cf = t.require_column("F")?;
    let cm = t.require_column("M_F")?;
    let cw = t.require_column("weight")?;
    let spin = |line: usize, cell: &str| -> Result<HalfInt> {
        cell.parse().map_err(|e: Error| Error::Parse {
            path: t.path.clone(),
            line,
            message: e.to_string(),
        })
    };
    let entries = t
        .rows
        .iter()
        .map(|(line, row)| {
            let s = Sublevel::new(spin(*line, &row[cf])?, spin(*line, &row[cm])?).map_err(|e| Error::Parse {
                path: t.path.clone(),
                line: *line,
                message: e.to_string(),
            })?;
            Ok((s, t.number(*line, row, cw)?))
        })
        .collect::<Result<Vec<_>>>()?;
    SublevelPopulation::new(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format_round_trips() {
        for x in [0.0, 1.0, 0.5, -3.25, 1e-21, 6.02e23, 0.333_333_333_333_333_3, 1065.0, 2.5e-5] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(1.2e-21), "1.2e-21");
    }

    #[test]
    fn visibility_round_trip_with_comments() {
        let pts = vec![
            VisibilityPoint::new(0.0, 1.0, 0.0),
            VisibilityPoint {
                sigma_v_r: Some(0.02),
                ..VisibilityPoint::new(1.5, 0.4321, -0.1)
            },
        ];
        let text = format!("# generated\n{}", visibility_csv(&pts));
        let dir = std::env::temp_dir().join(format!("gradphase-io-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("v.csv");
        write_atomic(&path, text.as_bytes()).unwrap();
        let back = read_visibility_csv(&path).unwrap();
        assert_eq!(back[1].v_r, 0.4321);
        assert_eq!(back[1].sigma_v_r, Some(0.02));
        assert_eq!(back[0].sigma_v_r, None);
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn population_table() {
        let dir = std::env::temp_dir().join(format!("gradphase-pop-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("pop.csv");
        std::fs::write(&path, "F,M_F,weight\n2,2,0.5\n2,-2,0.5\n").unwrap();
        let pop = read_population_csv(&path).unwrap();
        assert_eq!(pop.entries().len(), 2);
        assert!(pop.is_mirror_symmetric());
        std::fs::write(&path, "F,M_F,weight\n1,2,1\n").unwrap();
        assert!(read_population_csv(&path).is_err());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn malformed_row_names_its_line() {
        let text = "current_A,V_r\n# note\n0,1\n1,abc\n";
        let t = CsvTable::parse(text, Path::new("d.csv")).unwrap();
        let (line, row) = &t.rows[1];
        let e = t.number(*line, row, 1).unwrap_err().to_string();
        assert!(e.starts_with("d.csv:4:"), "{e}");
        let ragged = CsvTable::parse("a,b\n1,2\n3\n", Path::new("r.csv"));
        assert!(ragged.is_err());
    }
}
