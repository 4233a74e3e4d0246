use anyhow::{Context, Result};
use serde::Serialize;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    parameters: &'a serde_json::Value,
    inputs: &'a [String],
    output: String,
    version: &'static str,
    wall_clock_seconds: f64,
}

/// Output directory of one command; every file gets a `<file>.manifest.json`.
pub struct Output {
    dir: PathBuf,
    command: &'static str,
    parameters: serde_json::Value,
    inputs: Vec<String>,
    start: Instant,
}

impl Output {
    pub fn new<P: Serialize>(dir: &Path, command: &'static str, parameters: &P) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command,
            parameters: serde_json::to_value(parameters)?,
            inputs: Vec::new(),
            start: Instant::now(),
        })
    }

    pub fn add_input(&mut self, path: &Path) {
        self.inputs.push(path.display().to_string());
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }

    pub fn write_json<V: Serialize>(&self, name: &str, value: &V) -> Result<PathBuf> {
        let path = self.path(name);
        fs::write(&path, serde_json::to_string_pretty(value)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        self.manifest(&path)?;
        Ok(path)
    }

    pub fn write_csv<I>(&self, name: &str, header: &[&str], rows: I) -> Result<PathBuf>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let path = self.path(name);
        let mut w = csv::Writer::from_path(&path).with_context(|| format!("writing {}", path.display()))?;
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        w.flush()?;
        self.manifest(&path)?;
        Ok(path)
    }

    fn manifest(&self, file: &Path) -> Result<()> {
        let m = RunManifest {
            command: self.command,
            parameters: &self.parameters,
            inputs: &self.inputs,
            output: file.display().to_string(),
            version: env!("CARGO_PKG_VERSION"),
            wall_clock_seconds: self.start.elapsed().as_secs_f64(),
        };
        let name = format!("{}.manifest.json", file.file_name().and_then(|s| s.to_str()).unwrap_or("output"));
        let path = self.dir.join(name);
        fs::write(&path, serde_json::to_string_pretty(&m)? + "\n").with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

/// Shortest round-trip formatting.
pub fn num(x: f64) -> String {
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&x.abs()) {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}
