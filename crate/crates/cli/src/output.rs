//! Output files. JSON documents are wrapped in an envelope carrying the
//! config hash and seed; CSV rows carry both as leading columns.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Serialize)]
struct Envelope<'a, T> {
    config_hash: &'a str,
    seed: u64,
    kind: &'a str,
    data: &'a T,
}

pub struct Writer {
    dir: PathBuf,
    pub config_hash: String,
    pub seed: u64,
    pub json: bool,
    pub csv: bool,
}

impl Writer {
    pub fn new(dir: &Path, config_hash: String, seed: u64, json: bool, csv: bool) -> std::io::Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), config_hash, seed, json, csv })
    }

    fn create(&mut self, name: &str) -> std::io::Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let f = File::create(&path)?;
        Ok(BufWriter::new(f))
    }

    pub fn json<T: Serialize>(&mut self, name: &str, kind: &str, data: &T) -> std::io::Result<()> {
        if !self.json {
            return Ok(());
        }
        let hash = self.config_hash.clone();
        let mut out = self.create(name)?;
        let env = Envelope { config_hash: &hash, seed: self.seed, kind, data };
        serde_json::to_writer_pretty(&mut out, &env)?;
        out.write_all(b"\n")?;
        out.flush()
    }

    /// Writes `header` and `rows`, prefixing every row with the hash and seed.
    pub fn csv(&mut self, name: &str, header: &[&str], rows: &[Vec<String>]) -> std::io::Result<()> {
        if !self.csv {
            return Ok(());
        }
        let out = self.create(name)?;
        let mut w = csv::Writer::from_writer(out);
        let mut head = vec!["config_hash", "seed"];
        head.extend_from_slice(header);
        w.write_record(&head)?;
        let seed = self.seed.to_string();
        for r in rows {
            let mut rec = vec![self.config_hash.as_str(), seed.as_str()];
            rec.extend(r.iter().map(String::as_str));
            w.write_record(&rec)?;
        }
        w.flush()
    }

    /// Raw bytes produced by a library writer.
    pub fn raw(&mut self, name: &str, bytes: &[u8]) -> std::io::Result<()> {
        let mut out = self.create(name)?;
        out.write_all(bytes)?;
        out.flush()
    }
}

/// Shortest round-trip representation.
pub fn num(x: f64) -> String {
    x.to_string()
}

/// Empty for `None`.
pub fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}
