//! Output files are assembled in memory and written in one ordered pass once
//! every computation has succeeded.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::config::Format;
use crate::error::CliError;

/// Shortest round-trip representation, switching to exponent notation for
/// very small or very large magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

struct Artifact {
    name: String,
    bytes: Vec<u8>,
}

pub struct Artifacts {
    formats: BTreeSet<Format>,
    items: Vec<Artifact>,
}

impl Artifacts {
    pub fn new(formats: &BTreeSet<Format>) -> Self {
        Self {
            formats: formats.clone(),
            items: Vec::new(),
        }
    }

    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }

    pub fn names(&self) -> Vec<String> {
        self.items.iter().map(|a| a.name.clone()).collect()
    }

    fn push(&mut self, name: &str, bytes: Vec<u8>) {
        self.items.push(Artifact {
            name: name.to_string(),
            bytes,
        });
    }

    /// Numeric table; skipped when CSV output is disabled.
    pub fn csv<H, R>(&mut self, name: &str, header: H, rows: R) -> Result<(), CliError>
    where
        H: IntoIterator,
        H::Item: AsRef<str>,
        R: IntoIterator<Item = Vec<f64>>,
    {
        if !self.wants(Format::Csv) {
            return Ok(());
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        let ser = |e: csv::Error| CliError::Serialize(e.to_string());
        w.write_record(header.into_iter().map(|h| h.as_ref().to_string()))
            .map_err(ser)?;
        for row in rows {
            w.write_record(row.iter().map(|&v| fmt_f64(v))).map_err(ser)?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))?;
        self.push(name, bytes);
        Ok(())
    }

    /// Bulk data as JSON; skipped when JSON output is disabled.
    pub fn json_data<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        if self.wants(Format::Json) {
            self.summary(name, value)?;
        }
        Ok(())
    }

    /// Analysis results and manifests, always written.
    pub fn summary<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| CliError::Serialize(e.to_string()))?;
        bytes.push(b'\n');
        self.push(name, bytes);
        Ok(())
    }

    /// Gnuplot script plotting CSV files that are part of this run.
    pub fn gnuplot(&mut self, name: &str, body: &str) {
        if self.wants(Format::Csv) {
            let text = format!("set datafile separator ','\nset key autotitle columnhead\n{body}");
            self.push(name, text.into_bytes());
        }
    }

    pub fn write_all(&self, dir: &Path) -> Result<Vec<PathBuf>, CliError> {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("creating {}", dir.display()), e))?;
        let mut written = Vec::with_capacity(self.items.len());
        for a in &self.items {
            let p = dir.join(&a.name);
            fs::write(&p, &a.bytes).map_err(|e| CliError::io(format!("writing {}", p.display()), e))?;
            written.push(p);
        }
        Ok(written)
    }
}

/// `[re, im]` pairs.
pub fn complex_pairs<'a, I>(z: I) -> Vec<[f64; 2]>
where
    I: IntoIterator<Item = &'a Complex64>,
{
    z.into_iter().map(|c| [c.re, c.im]).collect()
}
