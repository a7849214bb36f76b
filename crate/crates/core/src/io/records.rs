use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::Serialize;

use crate::bench::BenchRecord;
use crate::error::{Error, Result};
use crate::kernels::Method;

pub const RECORD_HEADER: [&str; 9] = [
    "method",
    "outlier_ratio",
    "mc_index",
    "rot_err_deg",
    "trans_err",
    "traj_rmse",
    "iters",
    "wall_ms",
    "stop_reason",
];

/// 17 significant digits, enough to read back the same `f64`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn record_row(r: &BenchRecord) -> [String; 9] {
    [
        r.method.name().to_string(),
        format_float(r.outlier_ratio),
        r.mc_index.to_string(),
        format_float(r.rotation_error_deg),
        format_float(r.translation_error),
        r.trajectory_rmse.map(format_float).unwrap_or_default(),
        r.iterations.to_string(),
        format_float(r.wall_time_ms),
        r.stop_reason.clone(),
    ]
}

/// Streaming writer; the header is written on creation.
pub struct RecordWriter<W: Write> {
    inner: csv::Writer<W>,
}

impl<W: Write> RecordWriter<W> {
    pub fn new(writer: W) -> Result<Self> {
        let mut inner = csv::Writer::from_writer(writer);
        inner.write_record(RECORD_HEADER)?;
        Ok(Self { inner })
    }

    pub fn write(&mut self, record: &BenchRecord) -> Result<()> {
        self.inner.write_record(record_row(record))?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush().map_err(|e| Error::io("<records>", e))?;
        self.inner
            .into_inner()
            .map_err(|e| Error::io("<records>", e.into_error()))
    }
}

pub fn records_to_csv_string(records: &[BenchRecord]) -> Result<String> {
    let mut w = RecordWriter::new(Vec::new())?;
    for r in records {
        w.write(r)?;
    }
    Ok(String::from_utf8(w.finish()?).expect("CSV output is UTF-8"))
}

pub fn write_records_csv(records: &[BenchRecord], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let text = records_to_csv_string(records)?;
    File::create(path)
        .and_then(|mut f| f.write_all(text.as_bytes()))
        .map_err(|e| Error::io(path, e))
}

pub fn parse_records_csv(reader: impl Read, path: &Path) -> Result<Vec<BenchRecord>> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(RECORD_HEADER) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!("unexpected header `{}`", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut out = Vec::new();
    for (k, row) in rdr.records().enumerate() {
        let row = row?;
        let line = k + 2;
        let perr = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let float = |i: usize| {
            row[i]
                .parse::<f64>()
                .map_err(|_| perr(format!("`{}` is not a number in column {}", &row[i], RECORD_HEADER[i])))
        };
        let int = |i: usize| {
            row[i]
                .parse::<usize>()
                .map_err(|_| perr(format!("`{}` is not an integer in column {}", &row[i], RECORD_HEADER[i])))
        };
        let method: Method = row[0].parse().map_err(|_| perr(format!("unknown method `{}`", &row[0])))?;
        out.push(BenchRecord {
            method,
            outlier_ratio: float(1)?,
            mc_index: int(2)?,
            rotation_error_deg: float(3)?,
            translation_error: float(4)?,
            trajectory_rmse: if row[5].is_empty() { None } else { Some(float(5)?) },
            iterations: int(6)?,
            wall_time_ms: float(7)?,
            stop_reason: row[8].to_string(),
        });
    }
    Ok(out)
}

pub fn read_records_csv(path: impl AsRef<Path>) -> Result<Vec<BenchRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_records_csv(file, path)
}

/// Reproducibility record of a run: no timestamps or host names, so equal
/// inputs give equal bytes.
#[derive(Clone, Debug, Serialize)]
pub struct RunManifest<C: Serialize> {
    pub library: &'static str,
    pub version: &'static str,
    pub command: String,
    pub seed: u64,
    pub os: &'static str,
    pub arch: &'static str,
    pub config: C,
}

impl<C: Serialize> RunManifest<C> {
    pub fn new(command: impl Into<String>, seed: u64, config: C) -> Self {
        Self {
            library: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command: command.into(),
            seed,
            os: std::env::consts::OS,
            arch: std::env::consts::ARCH,
            config,
        }
    }
}

pub fn write_manifest_json<C: Serialize>(manifest: &RunManifest<C>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut text = serde_json::to_string_pretty(manifest)?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}
