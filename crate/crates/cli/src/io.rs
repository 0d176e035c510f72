//! Input classification, digests, provenance lines and atomic writes.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use riskminer_core::textfmt::Meta;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const TOOL: &str = concat!("riskminer ", env!("CARGO_PKG_VERSION"));

/// Schema version of the line-delimited and CSV artifacts written here.
pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    Corpus,
    CorpusCsv,
    Tokens,
    Financial,
    Tfidf,
    Split,
    Embedding,
    Model,
    Metrics,
    Features,
}

impl InputKind {
    pub fn describe(self) -> &'static str {
        match self {
            InputKind::Corpus => "corpus (jsonl)",
            InputKind::CorpusCsv => "corpus (csv)",
            InputKind::Tokens => "tokenized corpus",
            InputKind::Financial => "financial records",
            InputKind::Tfidf => "tf-idf model",
            InputKind::Split => "data split",
            InputKind::Embedding => "embedding model",
            InputKind::Model => "trained model",
            InputKind::Metrics => "metrics report",
            InputKind::Features => "feature matrix",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Input {
    pub path: PathBuf,
    pub text: String,
    pub digest: String,
    pub kind: InputKind,
}

impl Input {
    pub fn name(&self) -> String {
        self.path.file_name().map_or_else(|| self.path.display().to_string(), |n| n.to_string_lossy().into_owned())
    }
}

pub fn read_input(path: &Path) -> CliResult<Input> {
    let bytes = fs::read(path).map_err(|e| CliError::data(format!("cannot read {}: {e}", path.display())))?;
    let digest = hex::encode(Sha256::digest(&bytes));
    let text = String::from_utf8(bytes).map_err(|_| CliError::data(format!("{} is not valid UTF-8", path.display())))?;
    let kind = classify(&text).ok_or_else(|| CliError::data(format!("cannot tell what kind of file {} is", path.display())))?;
    Ok(Input { path: path.to_path_buf(), text, digest, kind })
}

/// Recognizes a file by its header line or, for line-delimited JSON and CSV,
/// by the fields of its first record.
pub fn classify(text: &str) -> Option<InputKind> {
    let first = text.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'))?;
    let word = first.split_whitespace().next().unwrap_or("");
    let by_header = match word {
        "riskminer-tfidf" => Some(InputKind::Tfidf),
        "riskminer-split" => Some(InputKind::Split),
        "riskminer-embedding" => Some(InputKind::Embedding),
        "riskminer-model" => Some(InputKind::Model),
        "riskminer-metrics" => Some(InputKind::Metrics),
        "riskminer-features" => Some(InputKind::Features),
        _ => None,
    };
    if by_header.is_some() {
        return by_header;
    }
    if first.starts_with('{') {
        let v: serde_json::Value = serde_json::from_str(first).ok()?;
        return if v.get("tokens").is_some() {
            Some(InputKind::Tokens)
        } else if v.get("text").is_some() {
            Some(InputKind::Corpus)
        } else {
            None
        };
    }
    let cols: Vec<String> = first.split(',').map(|c| c.trim().to_ascii_lowercase()).collect();
    if cols.first().map(String::as_str) == Some("company") && cols.iter().any(|c| c == "liquidity_ratio") {
        Some(InputKind::Financial)
    } else if cols.iter().any(|c| c == "id") && cols.iter().any(|c| c == "text") {
        Some(InputKind::CorpusCsv)
    } else {
        None
    }
}

/// Classified inputs of one invocation, in command-line order.
pub struct Inputs {
    pub items: Vec<Input>,
}

impl Inputs {
    pub fn read(paths: &[PathBuf]) -> CliResult<Self> {
        Ok(Inputs { items: paths.iter().map(|p| read_input(p)).collect::<CliResult<_>>()? })
    }

    pub fn all(&self, kinds: &[InputKind]) -> Vec<&Input> {
        self.items.iter().filter(|i| kinds.contains(&i.kind)).collect()
    }

    /// At most one input of the given kinds.
    pub fn optional(&self, kinds: &[InputKind]) -> CliResult<Option<&Input>> {
        let found = self.all(kinds);
        match found.len() {
            0 => Ok(None),
            1 => Ok(Some(found[0])),
            _ => Err(CliError::usage(format!("expected one {} input, got {}", kinds[0].describe(), found.len()))),
        }
    }

    pub fn require(&self, kinds: &[InputKind]) -> CliResult<&Input> {
        self.optional(kinds)?.ok_or_else(|| CliError::usage(format!("missing {} input (--in)", kinds[0].describe())))
    }

    /// Fails on inputs that no role of the subcommand accepts.
    pub fn check_only(&self, accepted: &[InputKind]) -> CliResult<()> {
        match self.items.iter().find(|i| !accepted.contains(&i.kind)) {
            Some(i) => Err(CliError::usage(format!("{} ({}) is not an input of this subcommand", i.path.display(), i.kind.describe()))),
            None => Ok(()),
        }
    }
}

/// Provenance carried by every artifact: tool, seed, input digests and the
/// resolved stage parameters.
pub fn meta<'a>(seed: u64, inputs: &Inputs, params: impl Iterator<Item = (&'a str, &'a str)>) -> Meta {
    let mut m: Meta = vec![("tool".into(), TOOL.into()), ("seed".into(), seed.to_string())];
    for i in &inputs.items {
        m.push(("input".into(), format!("{} sha256={}", i.name(), i.digest)));
    }
    for (k, v) in params {
        if k != "seed" {
            m.push((format!("param.{k}"), v.to_string()));
        }
    }
    m
}

/// `# key=value` preamble for artifacts without a versioned header line.
pub fn preamble(artifact: &str, meta: &Meta) -> String {
    let mut s = format!("# artifact={artifact}\n# schema_version={ARTIFACT_SCHEMA_VERSION}\n");
    for (k, v) in meta {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s
}

pub struct Outputs {
    dir: PathBuf,
    pub written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path) -> CliResult<Self> {
        fs::create_dir_all(dir).map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Outputs { dir: dir.to_path_buf(), written: Vec::new() })
    }

    /// Writes through a temporary file in the output directory and renames it
    /// into place, so readers never see a partial file.
    pub fn write(&mut self, name: &str, contents: &str) -> CliResult<()> {
        let target = self.dir.join(name);
        let internal = |e: std::io::Error| CliError::Internal(format!("cannot write {}: {e}", target.display()));
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir).map_err(internal)?;
        tmp.write_all(contents.as_bytes()).map_err(internal)?;
        tmp.as_file().sync_all().map_err(internal)?;
        tmp.persist(&target).map_err(|e| internal(e.error))?;
        self.written.push(target);
        Ok(())
    }
}
