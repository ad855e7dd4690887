//! CSV ingestion, artifact headers, and number formatting.

use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use nullmix::{Dataset64, Matrix};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const TOOL: &str = concat!("nullmix ", env!("CARGO_PKG_VERSION"));

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// First line of every artifact: tool version, command, seed, and the hash
/// of the canonical manifest JSON, plus any extra `key=value` pairs.
#[derive(Debug, Clone)]
pub struct ArtifactHeader {
    pub command: &'static str,
    pub seed: u64,
    pub manifest_hash: String,
    pub extra: Vec<(String, String)>,
}

impl ArtifactHeader {
    pub fn new<M: Serialize>(command: &'static str, seed: u64, manifest: &M) -> Result<Self> {
        let json = serde_json::to_string(manifest)?;
        Ok(Self {
            command,
            seed,
            manifest_hash: sha256_hex(json.as_bytes()),
            extra: Vec::new(),
        })
    }

    pub fn with(mut self, key: &str, value: impl ToString) -> Self {
        self.extra.push((key.to_string(), value.to_string()));
        self
    }

    pub fn line(&self) -> String {
        let mut s = format!(
            "# {TOOL} command={} seed={} manifest={}",
            self.command, self.seed, self.manifest_hash
        );
        for (k, v) in &self.extra {
            s.push_str(&format!(" {k}={v}"));
        }
        s
    }
}

/// Reads `key=value` from a header line written by [`ArtifactHeader`].
pub fn header_value(line: &str, key: &str) -> Option<String> {
    line.strip_prefix('#')?
        .split_whitespace()
        .find_map(|tok| tok.strip_prefix(key)?.strip_prefix('=').map(str::to_string))
}

pub fn write_csv(path: &Path, header: &ArtifactHeader, columns: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "{}", header.line())?;
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(columns)?;
        for r in rows {
            w.write_record(r)?;
        }
        w.flush()?;
    }
    fs::write(path, buf).with_context(|| format!("writing {}", path.display()))
}

/// Numeric table with a header row. Lines starting with `#` are skipped.
#[derive(Debug, Clone)]
pub struct Table {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }
}

pub fn read_table(path: &Path) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let names: Vec<String> = rdr
        .headers()
        .with_context(|| format!("{}: reading header row", path.display()))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.is_empty() {
        bail!("{}: empty header row", path.display());
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| anyhow!("{}: {e}", path.display()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let row = rec
            .iter()
            .zip(&names)
            .map(|(v, name)| {
                v.parse::<f64>()
                    .map_err(|_| anyhow!("{}: line {line}: column {name:?}: cannot parse {v:?} as a number", path.display()))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        bail!("{}: no data rows", path.display());
    }
    Ok(Table { names, rows })
}

/// Splits a table into the named response and the remaining predictor
/// columns. With `log_response` the response is replaced by its logarithm.
pub fn dataset_from_table(table: &Table, response: &str, log_response: bool) -> Result<(Dataset64, Vec<String>)> {
    let yi = table
        .column_index(response)
        .ok_or_else(|| anyhow!("response column {response:?} not found; columns are {:?}", table.names))?;
    let predictors: Vec<usize> = (0..table.names.len()).filter(|&j| j != yi).collect();
    if predictors.is_empty() {
        bail!("no predictor columns besides {response:?}");
    }
    let mut y: Vec<f64> = table.rows.iter().map(|r| r[yi]).collect();
    if log_response {
        if let Some(i) = y.iter().position(|&v| !(v > 0.0)) {
            bail!("cannot log-transform non-positive response {} in data row {}", y[i], i + 1);
        }
        y.iter_mut().for_each(|v| *v = v.ln());
    }
    let cols: Vec<Vec<f64>> = predictors
        .iter()
        .map(|&j| table.rows.iter().map(|r| r[j]).collect())
        .collect();
    let names = predictors.iter().map(|&j| table.names[j].clone()).collect();
    let data = Dataset64::new(Matrix::from_columns(&cols)?, y)?;
    Ok((data, names))
}

pub fn read_dataset(path: &Path, response: &str, log_response: bool) -> Result<(Dataset64, Vec<String>)> {
    let table = read_table(path)?;
    dataset_from_table(&table, response, log_response).with_context(|| format!("{}", path.display()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            assert_eq!(fmt_num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn header_fields() {
        let h = ArtifactHeader::new("cv", 42, &serde_json::json!({"a": 1})).unwrap().with("log_response", true);
        let line = h.line();
        assert_eq!(header_value(&line, "seed").as_deref(), Some("42"));
        assert_eq!(header_value(&line, "command").as_deref(), Some("cv"));
        assert_eq!(header_value(&line, "log_response").as_deref(), Some("true"));
        assert_eq!(header_value(&line, "manifest").unwrap().len(), 64);
    }

    #[test]
    fn malformed_csv_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.csv");
        fs::write(&p, "x,y\n1,2\n3,oops\n").unwrap();
        let err = read_table(&p).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        fs::write(&p, "x,y\n1,2\n3\n").unwrap();
        assert!(read_table(&p).is_err());
    }

    #[test]
    fn log_response_rejects_non_positive() {
        let t = Table { names: vec!["x".into(), "y".into()], rows: vec![vec![1.0, 2.0], vec![2.0, 0.0], vec![3.0, 1.0]] };
        assert!(dataset_from_table(&t, "y", true).is_err());
        let (d, names) = dataset_from_table(&t, "y", false).unwrap();
        assert_eq!(names, vec!["x"]);
        assert_eq!(d.y, vec![2.0, 0.0, 1.0]);
        assert!(dataset_from_table(&t, "z", false).is_err());
    }
}
