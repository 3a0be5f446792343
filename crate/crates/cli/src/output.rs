//! Run manifests and CSV artifacts.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use blockade_core::models::CavityNetwork;
use blockade_core::series::{CorrelationSeries, Engine};
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const SCHEMA: &str = "blockade-run/1";

/// Keys left out of the hash because they vary between identical runs.
const UNHASHED: [&str; 3] = ["manifest_sha256", "timestamp", "threads"];

pub struct Manifest {
    fields: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &str, engine: Option<Engine>) -> Self {
        let mut fields = Map::new();
        fields.insert("schema".into(), json!(SCHEMA));
        fields.insert("command".into(), json!(command));
        fields.insert("engine".into(), json!(engine.map(|e| e.as_str())));
        fields.insert("tool_version".into(), json!(env!("CARGO_PKG_VERSION")));
        fields.insert("build".into(), json!(env!("BLOCKADE_BUILD")));
        fields.insert("assumptions".into(), json!([]));
        Manifest { fields }
    }

    pub fn set(&mut self, key: &str, value: Value) {
        self.fields.insert(key.into(), value);
    }

    pub fn assume(&mut self, note: impl Into<String>) {
        if let Some(Value::Array(a)) = self.fields.get_mut("assumptions") {
            let note = Value::String(note.into());
            if !a.contains(&note) {
                a.push(note);
            }
        }
    }

    pub fn hash(&self) -> String {
        let mut hashed = self.fields.clone();
        for k in UNHASHED {
            hashed.remove(k);
        }
        // `Map` is ordered by key, so the serialization is canonical.
        let body = serde_json::to_vec(&Value::Object(hashed)).expect("manifest serializes");
        Sha256::digest(&body).iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Stamps hash, timestamp and thread count; returns the finished JSON.
    pub fn finish(mut self, threads: Option<usize>) -> (String, Value) {
        let hash = self.hash();
        let ts = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
        self.fields.insert("manifest_sha256".into(), json!(hash));
        self.fields.insert("timestamp".into(), json!(ts));
        self.fields.insert("threads".into(), json!(threads));
        (hash, Value::Object(self.fields))
    }
}

pub fn describe_network(net: &CavityNetwork) -> Value {
    json!({
        "name": net.name(),
        "n_sites": net.n_sites(),
        "units": net.units().label(),
        "couplings": net.couplings(),
        "detuning": net.detuning(),
        "loss": net.loss(),
        "kerr": net.kerr(),
        "cross_kerr": net.cross_kerr(),
        "drive_site": net.drive_site(),
        "drive_amplitude": [net.drive_amplitude().re, net.drive_amplitude().im],
        "signal_site": net.signal_site(),
        "assumptions": net.assumptions(),
    })
}

pub struct OutputDir {
    dir: PathBuf,
}

impl OutputDir {
    pub fn create(dir: PathBuf) -> Result<Self, CliError> {
        std::fs::create_dir_all(&dir).map_err(|e| CliError::io(dir.display(), e))?;
        Ok(OutputDir { dir })
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json(&self, name: &str, value: &Value) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let mut text = serde_json::to_string_pretty(value).expect("json serializes");
        text.push('\n');
        std::fs::write(&path, text).map_err(|e| CliError::io(path.display(), e))?;
        Ok(path)
    }

    /// Writes `# manifest_sha256: <hash>`, the header, then the rows.
    pub fn write_csv(&self, name: &str, hash: &str, header: &[&str], rows: &[Vec<String>]) -> Result<PathBuf, CliError> {
        let path = self.path(name);
        let io = |e: &dyn std::fmt::Display| CliError::io(path.display(), e);
        let mut file = BufWriter::new(File::create(&path).map_err(|e| io(&e))?);
        writeln!(file, "# manifest_sha256: {hash}").map_err(|e| io(&e))?;
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header).map_err(|e| io(&e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io(&e))?;
        }
        w.flush().map_err(|e| io(&e))?;
        Ok(path)
    }
}

/// Shortest representation that parses back to the same `f64`.
pub fn num(x: f64) -> String {
    format!("{x:?}")
}

pub fn series_rows(s: &CorrelationSeries) -> Vec<Vec<String>> {
    (0..s.len())
        .map(|k| {
            vec![
                num(s.tau()[k]),
                num(s.values()[k]),
                s.stderr().map(|e| num(e[k])).unwrap_or_default(),
            ]
        })
        .collect()
}

pub const TAU_HEADER: [&str; 3] = ["tau", "g2", "stderr"];
pub const SWEEP_HEADER: [&str; 3] = ["gamma", "delta", "g2_0"];
pub const OCCUPATION_HEADER: [&str; 4] = ["F_d", "n_signal", "g2_0", "stderr"];

/// Reads a `tau,g2,stderr` file. The engine tag comes from the sibling
/// manifest when present, otherwise from whether errors are recorded.
pub fn read_series(path: &Path) -> Result<CorrelationSeries, CliError> {
    let err = |e: &dyn std::fmt::Display| CliError::io(path.display(), e);
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| err(&e))?;
    let header = rdr.headers().map_err(|e| err(&e))?.clone();
    if header.iter().collect::<Vec<_>>() != TAU_HEADER {
        return Err(err(&format!("expected header `tau,g2,stderr`, found `{}`", header.iter().collect::<Vec<_>>().join(","))));
    }
    let (mut tau, mut g2, mut se) = (Vec::new(), Vec::new(), Vec::new());
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| err(&e))?;
        let parse = |k: usize| -> Result<f64, CliError> {
            rec[k]
                .parse::<f64>()
                .map_err(|e| err(&format!("row {}: column {}: {e}", line + 1, TAU_HEADER[k])))
        };
        tau.push(parse(0)?);
        g2.push(parse(1)?);
        se.push(if rec[2].is_empty() { None } else { Some(parse(2)?) });
    }
    let stderr = if se.iter().all(Option::is_some) && !se.is_empty() {
        Some(se.into_iter().flatten().collect())
    } else if se.iter().all(Option::is_none) {
        None
    } else {
        return Err(err(&"stderr column is only partly filled"));
    };
    let engine = manifest_engine(path).unwrap_or(if stderr.is_some() { Engine::Wfmc } else { Engine::Analytic });
    CorrelationSeries::new(tau, g2, stderr, engine).map_err(|e| CliError::engine(&path.display().to_string(), e))
}

pub fn manifest_path(csv: &Path) -> PathBuf {
    csv.with_extension("manifest.json")
}

fn manifest_engine(csv: &Path) -> Option<Engine> {
    let text = std::fs::read_to_string(manifest_path(csv)).ok()?;
    let v: Value = serde_json::from_str(&text).ok()?;
    v.get("engine")?.as_str()?.parse().ok()
}
