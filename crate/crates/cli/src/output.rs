//! CSV/JSON emission. Floats carry 17 significant digits so every value
//! round-trips; the `#` header embeds the resolved scenario.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::error::CliError;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub enum Field {
    F(f64),
    Opt(Option<f64>),
    U(usize),
    B(bool),
    S(String),
}

impl Field {
    fn render(&self, out: &mut String) {
        match self {
            Field::F(x) | Field::Opt(Some(x)) => write!(out, "{x:.16e}").unwrap(),
            Field::Opt(None) => {}
            Field::U(n) => write!(out, "{n}").unwrap(),
            Field::B(b) => write!(out, "{b}").unwrap(),
            Field::S(s) => {
                if s.contains([',', '"', '\n']) {
                    write!(out, "\"{}\"", s.replace('"', "\"\"")).unwrap()
                } else {
                    out.push_str(s)
                }
            }
        }
    }
}

/// Everything a command needs to label its output.
pub struct Context {
    pub command: &'static str,
    pub seed: u64,
    pub resolved: String,
    pub out_dir: PathBuf,
    pub notes: Vec<String>,
}

impl Context {
    pub fn header(&self) -> String {
        let mut h = format!("# sce {VERSION}\n# command: {}\n# seed: {}\n", self.command, self.seed);
        for n in &self.notes {
            h.push_str("# note: ");
            h.push_str(n);
            h.push('\n');
        }
        h.push_str("# config:\n");
        for line in self.resolved.lines() {
            h.push_str("#   ");
            h.push_str(line);
            h.push('\n');
        }
        h
    }

    pub fn csv(&self, columns: &[&str]) -> Csv {
        let mut buf = self.header();
        buf.push_str(&columns.join(","));
        buf.push('\n');
        Csv { buf, width: columns.len() }
    }

    pub fn path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }

    pub fn write(&self, name: &str, text: &str) -> Result<PathBuf, CliError> {
        write_file(&self.path(name), text)
    }

    pub fn write_json(&self, name: &str, value: &serde_json::Value) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("json values serialise");
        text.push('\n');
        self.write(name, &text)
    }
}

pub struct Csv {
    buf: String,
    width: usize,
}

impl Csv {
    pub fn row(&mut self, fields: &[Field]) {
        debug_assert_eq!(fields.len(), self.width);
        for (k, f) in fields.iter().enumerate() {
            if k > 0 {
                self.buf.push(',');
            }
            f.render(&mut self.buf);
        }
        self.buf.push('\n');
    }

    pub fn finish(self) -> String {
        self.buf
    }
}

fn write_file(path: &Path, text: &str) -> Result<PathBuf, CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(path.to_path_buf())
}
