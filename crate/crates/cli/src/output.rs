//! Deterministic CSV and JSON artifacts.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use fanlab_core::{Error, Result};

/// Fixed 17-significant-digit formatting; `-0` prints as `0`.
pub fn num(x: f64) -> String {
    let x = if x == 0.0 { 0.0 } else { x };
    format!("{x:.16e}")
}

/// CSV table with a configuration header comment.
pub struct Csv {
    text: String,
}

impl Csv {
    /// Starts a table: `# config: <json>` then the column names.
    pub fn new(config: &serde_json::Value, columns: &[String]) -> Self {
        let mut text = format!("# fanlab {}\n# config: {}\n", env!("CARGO_PKG_VERSION"), config);
        text.push_str(&columns.join(","));
        text.push('\n');
        Self { text }
    }

    pub fn row<I: IntoIterator<Item = String>>(&mut self, fields: I) {
        let fields: Vec<String> = fields.into_iter().collect();
        let _ = writeln!(self.text, "{}", fields.join(","));
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, &self.text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
    }
}

/// Numbered column names such as `V_1..V_n`.
pub fn indexed(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}_{i}")).collect()
}

pub fn nums<'a, I: IntoIterator<Item = &'a f64>>(values: I) -> impl Iterator<Item = String> + use<'a, I> {
    values.into_iter().map(|x| num(*x))
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}
