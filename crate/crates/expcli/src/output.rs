//! Output directories, CSV files and run manifests.

use std::collections::BTreeMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

pub const LOCK_FILE: &str = ".proxyid.lock";

/// An output directory held exclusively for the lifetime of the value.
#[derive(Debug)]
pub struct OutputDir {
    path: PathBuf,
    lock: PathBuf,
}

impl OutputDir {
    /// Creates `path` if needed and takes its lock file. Fails if another
    /// run holds the lock.
    pub fn acquire(path: impl AsRef<Path>) -> io::Result<Self> {
        let path = path.as_ref().to_path_buf();
        fs::create_dir_all(&path)?;
        let lock = path.join(LOCK_FILE);
        let mut f = OpenOptions::new().write(true).create_new(true).open(&lock).map_err(|e| {
            if e.kind() == io::ErrorKind::AlreadyExists {
                io::Error::new(
                    e.kind(),
                    format!("{} is locked by another run (remove {} if stale)", path.display(), lock.display()),
                )
            } else {
                e
            }
        })?;
        writeln!(f, "{}", std::process::id())?;
        Ok(Self { path, lock })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    pub fn join(&self, name: &str) -> PathBuf {
        self.path.join(name)
    }

    pub fn write(&self, name: &str, contents: &str) -> io::Result<PathBuf> {
        let p = self.join(name);
        let mut f = File::create(&p)?;
        f.write_all(contents.as_bytes())?;
        Ok(p)
    }

    pub fn write_manifest(&self, manifest: &Manifest) -> io::Result<PathBuf> {
        let text = serde_json::to_string_pretty(manifest).map_err(io::Error::other)?;
        self.write("manifest.json", &(text + "\n"))
    }
}

impl Drop for OutputDir {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.lock);
    }
}

/// Where a design came from.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct DesignRecord {
    pub source: String,
    pub degree: usize,
    pub points: usize,
}

impl DesignRecord {
    pub fn from_design(d: &proxyid::design::DesignSet) -> Self {
        use proxyid::design::DesignSource;
        let source = match d.source() {
            DesignSource::File(p) => p.display().to_string(),
            DesignSource::Generated { iterations } => format!("generated ({iterations} iterations)"),
            DesignSource::Builtin(name) => format!("builtin {name}"),
        };
        Self { source, degree: d.degree(), points: d.len() }
    }
}

/// Everything needed to rerun an experiment.
#[derive(Clone, Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub tool_version: String,
    pub command_line: Vec<String>,
    pub seed: u64,
    pub config: serde_json::Value,
    pub designs: Vec<DesignRecord>,
    pub samples: BTreeMap<String, usize>,
    pub outputs: Vec<String>,
    pub wall_clock_seconds: f64,
}

impl Manifest {
    pub fn new(experiment: &str, seed: u64, config: serde_json::Value) -> Self {
        Self {
            experiment: experiment.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            command_line: std::env::args().collect(),
            seed,
            config,
            designs: Vec::new(),
            samples: BTreeMap::new(),
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    pub fn sample(mut self, name: &str, n: usize) -> Self {
        self.samples.insert(name.to_string(), n);
        self
    }

    pub fn elapsed(mut self, d: Duration) -> Self {
        self.wall_clock_seconds = d.as_secs_f64();
        self
    }
}

/// Builds a CSV with a header row and LF endings.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        let mut text = header.join(",");
        text.push('\n');
        Self { text }
    }

    pub fn row<I, S>(&mut self, fields: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut first = true;
        for f in fields {
            if !first {
                self.text.push(',');
            }
            self.text.push_str(f.as_ref());
            first = false;
        }
        self.text.push('\n');
    }

    /// A trailing `# ...` line.
    pub fn comment(&mut self, line: &str) {
        self.text.push_str("# ");
        self.text.push_str(line);
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lock_is_exclusive_and_released() {
        let dir = tempfile::tempdir().unwrap();
        let a = OutputDir::acquire(dir.path()).unwrap();
        assert!(OutputDir::acquire(dir.path()).is_err());
        drop(a);
        assert!(OutputDir::acquire(dir.path()).is_ok());
    }

    #[test]
    fn csv_layout() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(["1", "2"]);
        c.comment("done");
        assert_eq!(c.finish(), "a,b\n1,2\n# done\n");
    }
}
