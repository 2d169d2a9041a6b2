//! Run manifests and CSV/JSON writers.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

pub const TIMESTAMP_ENV: &str = "ERRPROB_TIMESTAMP";

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: BTreeMap<String, Value>,
    pub tool_version: String,
    pub timestamp: String,
}

impl RunManifest {
    pub fn new<P: Serialize>(command: &str, params: &P) -> Self {
        let parameters = match serde_json::to_value(params) {
            Ok(Value::Object(m)) => m.into_iter().collect(),
            _ => BTreeMap::new(),
        };
        let timestamp = std::env::var(TIMESTAMP_ENV)
            .unwrap_or_else(|_| chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true));
        Self {
            command: command.to_string(),
            parameters,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp,
        }
    }
}

/// Floats with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn open_sink(path: Option<&Path>) -> io::Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

/// CSV with the manifest (and any extra JSON notes) as leading `#` lines.
pub fn write_csv(
    sink: &mut dyn Write,
    manifest: &RunManifest,
    notes: &[(&str, Value)],
    header: &[&str],
    rows: &[Vec<String>],
) -> io::Result<()> {
    // RFC 4180 line endings throughout, comment lines included.
    write!(sink, "# {}\r\n", serde_json::to_string(manifest)?)?;
    for (k, v) in notes {
        write!(sink, "# {k} {}\r\n", serde_json::to_string(v)?)?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(sink);
    w.write_record(header)?;
    for r in rows {
        w.write_record(r)?;
    }
    w.flush()?;
    Ok(())
}

/// `{"manifest": .., "result": ..}`, pretty-printed.
pub fn write_json<T: Serialize>(sink: &mut dyn Write, manifest: &RunManifest, result: &T) -> io::Result<()> {
    let doc = serde_json::json!({ "manifest": manifest, "result": result });
    serde_json::to_writer_pretty(&mut *sink, &doc)?;
    writeln!(sink)?;
    sink.flush()
}
