//! Provenance stamping: every artifact carries the tool version, a hash of
//! the inputs that produced it, and the seed.

use serde::Serialize;
use sha2::{Digest, Sha256};
use std::path::Path;

pub const TOOL: &str = "qcad";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug)]
pub struct Stamp {
    pub manifest_hash: String,
    pub seed: u64,
}

impl Stamp {
    /// Hashes the command name, its settings and the full text of every
    /// input (netlists, technology model). Output locations are not part of
    /// the settings, so reruns into another directory hash the same.
    pub fn new<S: Serialize>(command: &str, settings: &S, inputs: &[&str], seed: u64) -> Stamp {
        let mut h = Sha256::new();
        h.update(command.as_bytes());
        h.update([0]);
        h.update(serde_json::to_vec(settings).expect("settings serialize"));
        for text in inputs {
            h.update([0]);
            h.update(Sha256::digest(text.as_bytes()));
        }
        Stamp {
            manifest_hash: format!("{:x}", h.finalize()),
            seed,
        }
    }

    /// `# qcad <version> manifest=<hash> seed=<seed>`, for netlists and CSV.
    pub fn comment(&self) -> String {
        format!("# {TOOL} {VERSION} manifest={} seed={}", self.manifest_hash, self.seed)
    }

    pub fn json<T: Serialize>(&self, payload: &T) -> String {
        let env = Envelope {
            tool: TOOL,
            version: VERSION,
            manifest_hash: &self.manifest_hash,
            seed: self.seed,
            payload,
        };
        let mut s = serde_json::to_string_pretty(&env).expect("output serializes");
        s.push('\n');
        s
    }

    pub fn text(&self, body: &str) -> String {
        format!("{}\n{body}", self.comment())
    }
}

#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    manifest_hash: &'a str,
    seed: u64,
    #[serde(flatten)]
    payload: &'a T,
}

/// Writes to `path`, or stdout when there is none.
pub fn emit(path: Option<&Path>, text: &str) -> std::io::Result<()> {
    match path {
        Some(p) => std::fs::write(p, text),
        None => {
            use std::io::Write;
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes())?;
            out.flush()
        }
    }
}
