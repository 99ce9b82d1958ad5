//! Artifact emission: atomic writes, fixed float formatting, manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

/// Floats with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Comma-separated rows under a header.
pub struct Csv {
    text: String,
}

impl Csv {
    pub fn new<S: AsRef<str>>(header: &[S]) -> Self {
        let h: Vec<&str> = header.iter().map(|s| s.as_ref()).collect();
        Csv { text: h.join(",") + "\n" }
    }

    pub fn row(&mut self, cells: &[String]) {
        self.text.push_str(&cells.join(","));
        self.text.push('\n');
    }

    pub fn nums(&mut self, xs: &[f64]) {
        let cells: Vec<String> = xs.iter().map(|&x| num(x)).collect();
        self.row(&cells);
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.text.into_bytes()
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("artifact");
    let tmp = dir.join(format!(".{name}.tmp{}", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    tool: &'a str,
    version: &'a str,
    config_sha256: &'a str,
    status: &'a str,
    exit_code: i32,
    threads: usize,
    wall_time_s: f64,
    files: &'a [String],
}

/// Output directory with the list of artifacts written so far.
pub struct Artifacts {
    pub dir: PathBuf,
    files: Vec<String>,
    started: Instant,
}

impl Artifacts {
    pub fn new(dir: PathBuf) -> Self {
        Artifacts { dir, files: Vec::new(), started: Instant::now() }
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        write_atomic(&self.dir.join(name), bytes)?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> std::io::Result<()> {
        let mut s = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
        s.push('\n');
        self.write(name, s.as_bytes())
    }

    pub fn manifest(&mut self, command: &str, sha: &str, status: &str, exit_code: i32) -> std::io::Result<()> {
        let files = self.files.clone();
        let m = Manifest {
            command,
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            config_sha256: sha,
            status,
            exit_code,
            threads: rayon::current_num_threads(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            files: &files,
        };
        self.json("manifest.json", &m)
    }
}
