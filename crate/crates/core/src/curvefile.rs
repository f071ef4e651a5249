//! Curve files: delimiter-separated text, one row per evaluation point,
//! with the fully resolved run configuration echoed in a comment header.
//!
//! Rows stream to disk as points arrive so a crashed matrix keeps its
//! partial curves. Column order is fixed:
//! `data_count,grad_steps,phase,raw_score,norm_score,seed`.

use std::fs::File;
use std::io::{BufRead, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::engine::{EvalPoint, EvalSink, LearningCurve, Phase};
use crate::error::{Result, SeqEvalError};

pub const CURVE_COLUMNS: &str = "data_count,grad_steps,phase,raw_score,norm_score,seed";

/// Identity of one matrix cell, echoed into the file header next to the
/// resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveHeader {
    pub run_id: String,
    pub algorithm: String,
    pub dataset: String,
    pub mode: String,
    pub seed: u64,
    pub config: serde_json::Value,
}

/// Streaming curve writer implementing [`EvalSink`].
pub struct CurveWriter {
    path: PathBuf,
    out: BufWriter<File>,
    seed: u64,
}

impl CurveWriter {
    pub fn create(path: impl AsRef<Path>, header: &CurveHeader) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file =
            File::create(&path).map_err(|e| SeqEvalError::io(path.display().to_string(), e))?;
        let mut out = BufWriter::new(file);
        let header_json = serde_json::to_string(header).expect("header serializes");
        let io_err = |e| SeqEvalError::io(path.display().to_string(), e);
        writeln!(out, "# curve v1").map_err(io_err)?;
        writeln!(out, "# header: {header_json}").map_err(io_err)?;
        writeln!(out, "{CURVE_COLUMNS}").map_err(io_err)?;
        out.flush().map_err(io_err)?;
        Ok(CurveWriter {
            path,
            out,
            seed: header.seed,
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl EvalSink for CurveWriter {
    fn record(&mut self, p: &EvalPoint) -> Result<()> {
        let io_err = |e| SeqEvalError::io(self.path.display().to_string(), e);
        writeln!(
            self.out,
            "{},{},{},{},{},{}",
            p.data_count,
            p.grad_steps,
            p.phase.as_str(),
            p.raw_score,
            p.norm_score,
            self.seed
        )
        .map_err(io_err)?;
        // Flush per point: crash-safety beats throughput at this scale.
        self.out.flush().map_err(io_err)
    }
}

/// A parsed curve file.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveFile {
    pub header: CurveHeader,
    pub curve: LearningCurve,
}

pub fn read_curve_file(path: impl AsRef<Path>) -> Result<CurveFile> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| SeqEvalError::io(path.display().to_string(), e))?;
    parse_curve(std::io::BufReader::new(file), &path.display().to_string())
}

pub fn parse_curve(r: impl BufRead, path: &str) -> Result<CurveFile> {
    let fail = |line: usize, message: String| SeqEvalError::Format {
        path: path.to_string(),
        line,
        message,
    };
    let mut header: Option<CurveHeader> = None;
    let mut saw_columns = false;
    let mut points = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| SeqEvalError::io(path, e))?;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix("# header: ") {
            header = Some(
                serde_json::from_str(rest)
                    .map_err(|e| fail(lineno, format!("bad header json: {e}")))?,
            );
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        if !saw_columns {
            if line != CURVE_COLUMNS {
                return Err(fail(lineno, format!("unexpected column row '{line}'")));
            }
            saw_columns = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(fail(lineno, format!("expected 6 fields, found {}", fields.len())));
        }
        let phase = match fields[2] {
            "offline" => Phase::Offline,
            "online" => Phase::Online,
            other => return Err(fail(lineno, format!("unknown phase '{other}'"))),
        };
        points.push(EvalPoint {
            data_count: fields[0]
                .parse()
                .map_err(|_| fail(lineno, format!("bad data_count '{}'", fields[0])))?,
            grad_steps: fields[1]
                .parse()
                .map_err(|_| fail(lineno, format!("bad grad_steps '{}'", fields[1])))?,
            raw_score: fields[3]
                .parse()
                .map_err(|_| fail(lineno, format!("bad raw_score '{}'", fields[3])))?,
            norm_score: fields[4]
                .parse()
                .map_err(|_| fail(lineno, format!("bad norm_score '{}'", fields[4])))?,
            phase,
        });
    }
    let header = header.ok_or_else(|| fail(0, "missing header line".into()))?;
    if !saw_columns {
        return Err(fail(0, "missing column row".into()));
    }
    Ok(CurveFile {
        curve: LearningCurve {
            run_id: header.run_id.clone(),
            seed: header.seed,
            points,
        },
        header,
    })
}
