use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::experiments::{CheckOutcome, SweepRecord};

/// Bit-exact header of `results.csv`.
pub const RESULTS_HEADER: &str = "σ,m,lambda_p,lambda_v,cw_lower,cw_upper,iv_lo,iv_hi,n_nodes,h,existence,wall_ms";

/// 17 significant digits in scientific notation; `nan`/`inf` spelled out.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

pub fn results_csv(records: &[SweepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(RESULTS_HEADER);
    out.push('\n');
    for r in records {
        let lv = r.lambda_v.map(format_float).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            format_float(r.sigma),
            format_float(r.m),
            format_float(r.lambda_p),
            lv,
            format_float(r.cw_lower),
            format_float(r.cw_upper),
            format_float(r.iv_lo),
            format_float(r.iv_hi),
            r.n_nodes,
            format_float(r.h),
            r.existence,
            format_float(r.wall_ms),
        );
    }
    out
}

pub fn checks_csv(checks: &[CheckOutcome]) -> String {
    let mut out = String::from("check,passed,value,threshold\n");
    for c in checks {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            c.name,
            c.passed,
            format_float(c.value),
            format_float(c.threshold)
        );
    }
    out
}

/// Two-column plot file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlotFile {
    pub name: String,
    pub columns: [String; 2],
    pub points: Vec<(f64, f64)>,
}

impl PlotFile {
    pub fn new(name: impl Into<String>, x: &str, y: &str, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            columns: [x.into(), y.into()],
            points,
        }
    }

    pub fn render(&self) -> String {
        let mut out = format!("# {} {}\n", self.columns[0], self.columns[1]);
        for (x, y) in &self.points {
            let _ = writeln!(out, "{} {}", format_float(*x), format_float(*y));
        }
        out
    }
}

/// Everything a run leaves on disk, collected before any file is touched.
#[derive(Debug, Clone, Default)]
pub struct Artifacts {
    pub records: Vec<SweepRecord>,
    pub plots: Vec<PlotFile>,
    /// Extra files relative to the output directory.
    pub extra: Vec<(String, String)>,
    pub manifest: serde_json::Value,
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Single writer: creates `dir` and writes every artifact.
pub fn write_artifacts(dir: &Path, art: &Artifacts) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let results = dir.join("results.csv");
    write_file(&results, &results_csv(&art.records))?;
    written.push(results);
    if !art.plots.is_empty() {
        let pd = dir.join("plotdata");
        fs::create_dir_all(&pd).map_err(|e| Error::io(&pd, e))?;
        for p in &art.plots {
            let path = pd.join(&p.name);
            write_file(&path, &p.render())?;
            written.push(path);
        }
    }
    for (name, body) in &art.extra {
        let path = dir.join(name);
        write_file(&path, body)?;
        written.push(path);
    }
    let manifest = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(&art.manifest)
        .map_err(|e| Error::InvalidArgument(format!("manifest serialization: {e}")))?;
    write_file(&manifest, &(text + "\n"))?;
    written.push(manifest);
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::Verdict;

    fn rec() -> SweepRecord {
        SweepRecord {
            sigma: 0.1,
            m: 2.0,
            lambda_p: 1.5,
            lambda_v: None,
            cw_lower: 1.4999999,
            cw_upper: 1.5000001,
            iv_lo: -1.0,
            iv_hi: 10.0,
            n_nodes: 160,
            h: 1.0 / 160.0,
            existence: Verdict::Eigenpair,
            converged: true,
            wall_ms: 3.25,
        }
    }

    #[test]
    fn csv_layout() {
        let text = results_csv(&[rec()]);
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some(RESULTS_HEADER));
        let row: Vec<&str> = lines.next().unwrap().split(',').collect();
        assert_eq!(row.len(), 12);
        assert_eq!(row[0], "1.0000000000000001e-1");
        assert_eq!(row[3], "");
        assert_eq!(row[8], "160");
        assert_eq!(row[10], "eigenpair");
    }

    #[test]
    fn floats_round_trip() {
        for v in [0.1, 1.0 / 3.0, -2.5e-300, 1e308, 5e-324] {
            assert_eq!(format_float(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(format_float(f64::NAN), "nan");
    }

    #[test]
    fn writes_everything() {
        let dir = tempfile::tempdir().unwrap();
        let art = Artifacts {
            records: vec![rec()],
            plots: vec![PlotFile::new("a.dat", "σ", "lambda_p", vec![(0.1, 1.5)])],
            extra: vec![("x.csv".into(), "a\n".into())],
            manifest: serde_json::json!({"tool": "nlspec"}),
        };
        let out = dir.path().join("nested");
        let files = write_artifacts(&out, &art).unwrap();
        assert_eq!(files.len(), 4);
        let dat = fs::read_to_string(out.join("plotdata/a.dat")).unwrap();
        assert_eq!(dat.lines().nth(1).unwrap().split(' ').count(), 2);
    }
}
