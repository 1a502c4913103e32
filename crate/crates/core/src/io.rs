//! File emission. Every artifact goes through a temp file in the target
//! directory and is renamed into place, so a failed write leaves no partial
//! file behind.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use tempfile::NamedTempFile;

use crate::colony::{Ant, DepositEvent, Locus};
use crate::config::RunConfig;
use crate::engine::{RunOutcome, StateSnapshot};
use crate::error::{Error, Result};
use crate::field::FieldSample;
use crate::graph::GraphSnapshot;
use crate::metrics::HistogramBin;
use crate::sweep::{CellAggregate, CellFailure, ContourPoint, RunMetrics, SweepGrid};

pub const METRICS_HEADER: &[&str] = &[
    "r_n_mm",
    "resolution",
    "lambda",
    "seed",
    "rn_rate",
    "convergence_ticks",
    "converged",
];
pub const AGGREGATE_HEADER: &[&str] = &[
    "r_n_mm",
    "resolution",
    "lambda",
    "runs",
    "converged",
    "mean_rn_rate",
    "std_rn_rate",
    "mean_convergence_ticks",
    "std_convergence_ticks",
];
pub const CONTOUR_HEADER: &[&str] = &["lambda", "r_n_mm", "mean_rn_rate"];
pub const HISTOGRAM_HEADER: &[&str] = &["bin_lo_mm", "bin_hi_mm", "count"];
pub const FIELD_HEADER: &[&str] = &["edge_id", "x_mm", "t", "value"];
pub const TRAJECTORY_HEADER: &[&str] = &["tick", "ant_id", "edge_id", "segment_j", "offset_mm", "node_id"];
pub const DEPOSIT_HEADER: &[&str] = &["tick", "edge", "segment", "time"];
pub const FAILURE_HEADER: &[&str] = &["r_n_mm", "resolution", "lambda", "seed", "message"];

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// A file being written under a temporary name next to its destination.
pub struct AtomicFile {
    tmp: NamedTempFile,
    dest: PathBuf,
}

impl AtomicFile {
    pub fn create(dest: &Path) -> Result<Self> {
        let dir = match dest.parent() {
            Some(p) if !p.as_os_str().is_empty() => p,
            _ => Path::new("."),
        };
        let tmp = NamedTempFile::new_in(dir).map_err(|e| Error::io(dir, e))?;
        Ok(Self {
            tmp,
            dest: dest.to_path_buf(),
        })
    }

    pub fn file(&mut self) -> &mut File {
        self.tmp.as_file_mut()
    }

    pub fn commit(self) -> Result<()> {
        let dest = self.dest;
        self.tmp.as_file().sync_all().map_err(|e| Error::io(&dest, e))?;
        #[cfg(unix)]
        {
            use std::os::unix::fs::PermissionsExt;
            self.tmp
                .as_file()
                .set_permissions(std::fs::Permissions::from_mode(0o644))
                .map_err(|e| Error::io(&dest, e))?;
        }
        self.tmp.persist(&dest).map_err(|e| Error::io(&dest, e.error))?;
        Ok(())
    }
}

pub fn write_atomic(dest: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = AtomicFile::create(dest)?;
    f.file().write_all(bytes).map_err(|e| Error::io(dest, e))?;
    f.commit()
}

pub fn write_json<T: Serialize>(dest: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|source| Error::Json {
        path: dest.to_path_buf(),
        source,
    })?;
    text.push('\n');
    write_atomic(dest, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|source| Error::Json {
        path: path.to_path_buf(),
        source,
    })
}

/// CSV writer with a fixed header, streaming into an [`AtomicFile`].
pub struct CsvSink {
    writer: csv::Writer<BufWriter<File>>,
    file: Option<AtomicFile>,
    width: usize,
}

impl CsvSink {
    pub fn create(dest: &Path, header: &[&str]) -> Result<Self> {
        let mut file = AtomicFile::create(dest)?;
        let handle = file.file().try_clone().map_err(|e| Error::io(dest, e))?;
        let mut writer = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(BufWriter::new(handle));
        writer.write_record(header)?;
        Ok(Self {
            writer,
            file: Some(file),
            width: header.len(),
        })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<()>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        let record: csv::ByteRecord = fields.into_iter().collect();
        if record.len() != self.width {
            return Err(Error::Internal(format!(
                "csv row has {} fields, header has {}",
                record.len(),
                self.width
            )));
        }
        self.writer.write_byte_record(&record)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        let file = self.file.take().expect("finish called once");
        self.writer.flush().map_err(|e| Error::io(&file.dest, e))?;
        file.commit()
    }
}

pub fn metrics_row(m: &RunMetrics) -> [String; 7] {
    [
        m.r_n_mm.to_string(),
        m.resolution.to_string(),
        m.lambda.to_string(),
        m.seed.to_string(),
        m.rn_rate.to_string(),
        opt(m.convergence_ticks),
        m.converged.to_string(),
    ]
}

pub fn write_metrics(dest: &Path, rows: &[RunMetrics]) -> Result<()> {
    let mut sink = CsvSink::create(dest, METRICS_HEADER)?;
    for m in rows {
        sink.row(metrics_row(m))?;
    }
    sink.finish()
}

pub fn write_aggregate(dest: &Path, cells: &[CellAggregate]) -> Result<()> {
    let mut sink = CsvSink::create(dest, AGGREGATE_HEADER)?;
    for c in cells {
        sink.row([
            c.r_n_mm.to_string(),
            c.resolution.to_string(),
            c.lambda.to_string(),
            c.runs.to_string(),
            c.converged.to_string(),
            c.mean_rn_rate.to_string(),
            c.std_rn_rate.to_string(),
            opt(c.mean_convergence_ticks),
            opt(c.std_convergence_ticks),
        ])?;
    }
    sink.finish()
}

pub fn write_contour(dest: &Path, points: &[ContourPoint]) -> Result<()> {
    let mut sink = CsvSink::create(dest, CONTOUR_HEADER)?;
    for p in points {
        sink.row([p.lambda.to_string(), p.r_n_mm.to_string(), p.mean_rn_rate.to_string()])?;
    }
    sink.finish()
}

pub fn write_failures(dest: &Path, failures: &[CellFailure]) -> Result<()> {
    let mut sink = CsvSink::create(dest, FAILURE_HEADER)?;
    for f in failures {
        sink.row([
            f.r_n_mm.to_string(),
            f.resolution.to_string(),
            f.lambda.to_string(),
            f.seed.to_string(),
            f.message.clone(),
        ])?;
    }
    sink.finish()
}

pub fn write_histogram(dest: &Path, bins: &[HistogramBin]) -> Result<()> {
    let mut sink = CsvSink::create(dest, HISTOGRAM_HEADER)?;
    for b in bins {
        sink.row([b.bin_lo_mm.to_string(), b.bin_hi_mm.to_string(), b.count.to_string()])?;
    }
    sink.finish()
}

pub fn write_field(dest: &Path, samples: &[FieldSample]) -> Result<()> {
    let mut sink = CsvSink::create(dest, FIELD_HEADER)?;
    for s in samples {
        sink.row([s.edge_id.to_string(), s.x_mm.to_string(), s.t.to_string(), s.value.to_string()])?;
    }
    sink.finish()
}

pub fn trajectory_row(tick: u64, ant: &Ant) -> [String; 6] {
    match ant.locus {
        Locus::AtNode(n) => [
            tick.to_string(),
            ant.id.to_string(),
            String::new(),
            String::new(),
            String::new(),
            n.0.to_string(),
        ],
        Locus::OnSegment { seg, offset } => [
            tick.to_string(),
            ant.id.to_string(),
            seg.edge.0.to_string(),
            seg.ordinal.to_string(),
            offset.to_string(),
            String::new(),
        ],
    }
}

pub fn deposit_row(tick: u64, d: &DepositEvent) -> [String; 4] {
    [
        tick.to_string(),
        d.seg.edge.0.to_string(),
        d.seg.ordinal.to_string(),
        d.time.to_string(),
    ]
}

/// Git-style object hash of the graph snapshot: SHA-256 over
/// `"blob <len>\0"` followed by the compact JSON document.
pub fn graph_hash(snap: &GraphSnapshot) -> String {
    let body = serde_json::to_vec(snap).expect("graph snapshot serializes");
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", body.len()).as_bytes());
    h.update(&body);
    format!("sha256:{}", hex::encode(h.finalize()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSummary {
    pub converged: bool,
    pub convergence_ticks: Option<u64>,
    pub ticks: u64,
    pub rn_rate: f64,
}

impl From<&RunOutcome> for RunSummary {
    fn from(o: &RunOutcome) -> Self {
        Self {
            converged: o.converged_at.is_some(),
            convergence_ticks: o.converged_at,
            ticks: o.ticks,
            rn_rate: o.rn_rate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub seed: u64,
    pub graph_hash: String,
    pub config: RunConfig,
    pub outcome: RunSummary,
    pub artifacts: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepManifest {
    pub config: RunConfig,
    pub grid: SweepGrid,
    pub rows: usize,
    pub failures: usize,
    pub artifacts: Vec<String>,
}

pub fn read_snapshot(path: &Path) -> Result<StateSnapshot> {
    read_json(path)
}
