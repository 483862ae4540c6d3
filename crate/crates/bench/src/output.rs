//! CSV field files and JSON run manifests.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use kinuq_core::uq::{FieldSet, Quantity};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

pub const MANIFEST_SCHEMA: &str = "kinuq-manifest/1";
pub const MANIFEST_SCHEMA_JSON: &str = include_str!("../../../schemas/manifest.schema.json");

/// Hex SHA-256 of arbitrary bytes.
pub fn sha256_hex(bytes: &[u8]) -> String {
    let d = Sha256::digest(bytes);
    d.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    })
}

/// Content hash of a configuration and the software version. The output
/// directory and worker count cannot change results and are left out, as
/// is wall-clock data, so reruns reproduce it.
pub fn config_hash(cfg: &ExperimentConfig) -> String {
    let mut c = cfg.clone();
    c.output = PathBuf::new();
    c.workers = 0;
    let text = serde_json::to_string(&c).expect("config serializes");
    sha256_hex(format!("{}\n{text}", env!("CARGO_PKG_VERSION")).as_bytes())
}

/// 17 significant digits: enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Columns of a field CSV beyond the mean fields.
#[derive(Debug, Clone, Default)]
pub struct ExtraColumns<'a> {
    pub std: Option<&'a FieldSet>,
    pub err: Option<&'a FieldSet>,
}

const NAMES: [&str; 4] = ["rho", "ux", "uy", "T"];

pub fn fields_csv(x: &[f64], mean: &FieldSet, extra: &ExtraColumns, hash: &str) -> Result<String> {
    let n = mean.n_cells();
    if x.len() != n {
        bail!("{} centres for {n} cells", x.len());
    }
    for f in [extra.std, extra.err].into_iter().flatten() {
        if f.n_cells() != n {
            bail!("extra columns have {} cells, fields {n}", f.n_cells());
        }
    }
    let mut s = format!("# manifest-hash: {hash}\nx");
    for name in NAMES {
        let _ = write!(s, ",{name}");
    }
    if extra.std.is_some() {
        for name in NAMES {
            let _ = write!(s, ",std_{name}");
        }
    }
    if extra.err.is_some() {
        for name in NAMES {
            let _ = write!(s, ",err_{name}");
        }
    }
    s.push('\n');
    for i in 0..n {
        s.push_str(&fmt_f64(x[i]));
        for f in [Some(mean), extra.std, extra.err].into_iter().flatten() {
            for q in Quantity::ALL {
                s.push(',');
                s.push_str(&fmt_f64(f.quantity(q)[i]));
            }
        }
        s.push('\n');
    }
    Ok(s)
}

/// Parsed field CSV: cell centres, hash and one column per header name.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub hash: Option<String>,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl CsvTable {
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    /// Mean fields as a field set on a domain of `length`.
    pub fn fields(&self, length: f64) -> Result<FieldSet> {
        let mut v = Vec::with_capacity(4 * self.rows.len());
        for name in NAMES {
            v.extend(self.column(name).with_context(|| format!("missing column {name}"))?);
        }
        Ok(FieldSet::new(self.rows.len(), length, v)?)
    }
}

pub fn parse_csv(text: &str) -> Result<CsvTable> {
    let mut hash = None;
    let mut header = None;
    let mut rows = Vec::new();
    for line in text.lines() {
        if let Some(c) = line.strip_prefix('#') {
            if let Some(h) = c.trim().strip_prefix("manifest-hash:") {
                hash = Some(h.trim().to_string());
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        if header.is_none() {
            header = Some(line.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>());
            continue;
        }
        let row = line
            .split(',')
            .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad number {s:?}")))
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    let header = header.context("CSV has no header")?;
    if rows.iter().any(|r| r.len() != header.len()) {
        bail!("CSV rows and header differ in width");
    }
    Ok(CsvTable { hash, header, rows })
}

/// Everything needed to audit one command invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub version: String,
    pub command: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    /// Wall-clock seconds of each repetition of the main run.
    pub wall_seconds: Vec<f64>,
    /// Wall-clock seconds per named phase.
    pub phases: BTreeMap<String, f64>,
    /// Kinetic cell fraction after each hybrid step (first repetition).
    pub kinetic_fraction: Vec<f64>,
    pub partition_checks: u64,
    pub warnings: Vec<String>,
    pub error: Option<String>,
    /// Estimator-specific summary.
    pub estimator: Option<serde_json::Value>,
}

impl RunManifest {
    pub fn new(command: &str, cfg: &ExperimentConfig) -> Self {
        Self {
            schema: MANIFEST_SCHEMA.into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash(cfg),
            config: cfg.clone(),
            wall_seconds: Vec::new(),
            phases: BTreeMap::new(),
            kinetic_fraction: Vec::new(),
            partition_checks: 0,
            warnings: Vec::new(),
            error: None,
            estimator: None,
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_file(path, &serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Ok(serde_json::from_str(&text)?)
    }
}

/// Checks the required keys and types declared by the shipped schema.
pub fn validate_manifest_json(value: &serde_json::Value) -> Result<()> {
    let schema: serde_json::Value = serde_json::from_str(MANIFEST_SCHEMA_JSON)?;
    let obj = value.as_object().context("manifest is not an object")?;
    for key in schema["required"].as_array().context("schema lists required keys")? {
        let key = key.as_str().context("required key is a string")?;
        let v = obj.get(key).with_context(|| format!("manifest lacks {key}"))?;
        let want = &schema["properties"][key]["type"];
        let types: Vec<&str> = match want {
            serde_json::Value::String(s) => vec![s.as_str()],
            serde_json::Value::Array(a) => a.iter().filter_map(|t| t.as_str()).collect(),
            _ => continue,
        };
        let ok = types.iter().any(|t| match *t {
            "string" => v.is_string(),
            "array" => v.is_array(),
            "object" => v.is_object(),
            "integer" => v.is_u64() || v.is_i64(),
            "number" => v.is_number(),
            "null" => v.is_null(),
            _ => false,
        });
        if !ok {
            bail!("manifest key {key} should be {types:?}");
        }
    }
    if obj.get("schema").and_then(|s| s.as_str()) != Some(MANIFEST_SCHEMA) {
        bail!("manifest schema tag is not {MANIFEST_SCHEMA}");
    }
    Ok(())
}

pub fn write_file(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

/// Median of a non-empty list.
pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len();
    if n % 2 == 1 {
        s[n / 2]
    } else {
        0.5 * (s[n / 2 - 1] + s[n / 2])
    }
}

/// Speedup of the second run over the first: median wall-clock of the
/// full-kinetic manifest divided by that of the hybrid manifest.
pub fn timing_report(kinetic: &RunManifest, hybrid: &RunManifest) -> Result<f64> {
    if kinetic.wall_seconds.is_empty() || hybrid.wall_seconds.is_empty() {
        bail!("timing needs wall-clock samples in both manifests");
    }
    Ok(median(&kinetic.wall_seconds) / median(&hybrid.wall_seconds))
}
