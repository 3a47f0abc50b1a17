//! The run manifest: resolved configuration, input fingerprint and timing.

use std::io::Read;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

pub const FILE_NAME: &str = "manifest.txt";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fingerprint {
    pub bytes: u64,
    pub sha256: String,
}

pub fn fingerprint(path: &Path) -> Result<Fingerprint> {
    let mut f = std::fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 1 << 16];
    let mut bytes = 0u64;
    loop {
        let got = f.read(&mut buf).map_err(|e| CliError::io(path, e))?;
        if got == 0 {
            break;
        }
        bytes += got as u64;
        hasher.update(&buf[..got]);
    }
    let sha256 = hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();
    Ok(Fingerprint { bytes, sha256 })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RunManifest {
    pub command: String,
    /// Output of `RunConfig::to_config_text`.
    pub config: String,
    pub inputs: Vec<(String, Fingerprint)>,
    pub seed: u64,
    pub started: u64,
    pub finished: Option<u64>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn new(command: &str, config: String, seed: u64) -> Self {
        RunManifest {
            command: command.into(),
            config,
            inputs: Vec::new(),
            seed,
            started: unix_now(),
            finished: None,
        }
    }

    pub fn add_input(&mut self, label: &str, path: &Path) -> Result<()> {
        let fp = fingerprint(path)?;
        self.inputs.push((label.into(), fp));
        Ok(())
    }

    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!("tool = icc {}\n", env!("CARGO_PKG_VERSION")));
        s.push_str(&format!("command = {}\n", self.command));
        s.push_str(&format!("base_seed = {}\n", self.seed));
        for (label, fp) in &self.inputs {
            s.push_str(&format!("{label}.bytes = {}\n", fp.bytes));
            s.push_str(&format!("{label}.sha256 = {}\n", fp.sha256));
        }
        s.push_str("[config]\n");
        s.push_str(&self.config);
        s.push_str("[time]\n");
        s.push_str(&format!("started_unix = {}\n", self.started));
        match self.finished {
            Some(t) => s.push_str(&format!("finished_unix = {t}\n")),
            None => s.push_str("finished_unix = running\n"),
        }
        s
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        let path = dir.join(FILE_NAME);
        std::fs::write(&path, self.render()).map_err(|e| CliError::io(&path, e))
    }

    pub fn finish(&mut self, dir: &Path) -> Result<()> {
        self.finished = Some(unix_now().max(self.started));
        self.write(dir)
    }
}
