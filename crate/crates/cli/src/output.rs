//! CSV tables and JSON sidecars. Both files are written to temporaries in the
//! destination directory and renamed into place only once both are complete.

use std::io::Write;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use tempfile::NamedTempFile;

use crate::config::RunConfig;
use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn opt(x: Option<f64>) -> Cell {
        x.map_or(Cell::Empty, Cell::Num)
    }

    pub fn text(s: impl Into<String>) -> Cell {
        Cell::Text(s.into())
    }

    fn render(&self) -> String {
        match self {
            Cell::Num(x) => format_number(*x),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

/// 17 significant digits, which round-trips any f64.
pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table { header, rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width must match header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(vec![]);
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("in-memory write");
        }
        w.into_inner().expect("in-memory flush")
    }
}

/// Everything one command produces.
#[derive(Debug, Clone)]
pub struct Report {
    pub command: String,
    pub table: Table,
    pub params: Value,
    pub grid_settings: Value,
    pub outputs: Value,
    pub summary: String,
}

impl Report {
    pub fn sidecar(&self, config: &RunConfig) -> Value {
        json!({
            "tool_version": env!("CARGO_PKG_VERSION"),
            "command": self.command,
            "config": config.entries(),
            "params": self.params,
            "grid_settings": self.grid_settings,
            "outputs": self.outputs,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    /// CSV table plus a JSON sidecar with the same stem.
    Csv,
    /// JSON record only.
    Json,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn stage(path: &Path, bytes: &[u8]) -> Result<NamedTempFile, CliError> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = NamedTempFile::new_in(dir).map_err(|e| io_error(path, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.as_file().sync_all().map_err(|e| io_error(path, e))?;
    Ok(tmp)
}

/// Writes the report and returns the paths created. On failure nothing is left
/// behind: temporaries are dropped and an already renamed file is removed.
pub fn write_report(report: &Report, config: &RunConfig, out: &Path, format: Format) -> Result<Vec<PathBuf>, CliError> {
    let mut json_text = serde_json::to_string_pretty(&report.sidecar(config)).expect("JSON values serialize");
    json_text.push('\n');
    let mut files = vec![];
    match format {
        Format::Csv => {
            let json_path = sidecar_path(out);
            if json_path == out {
                return Err(CliError::Usage(format!(
                    "output {} would collide with its JSON sidecar; use a .csv name",
                    out.display()
                )));
            }
            files.push((out.to_path_buf(), report.table.to_csv()));
            files.push((json_path, json_text.into_bytes()));
        }
        Format::Json => files.push((out.to_path_buf(), json_text.into_bytes())),
    }
    let staged = files
        .iter()
        .map(|(p, bytes)| stage(p, bytes))
        .collect::<Result<Vec<_>, _>>()?;
    let mut done: Vec<PathBuf> = vec![];
    for (tmp, (path, _)) in staged.into_iter().zip(&files) {
        if let Err(e) = tmp.persist(path) {
            for p in &done {
                let _ = std::fs::remove_file(p);
            }
            return Err(io_error(path, e.error));
        }
        done.push(path.clone());
    }
    Ok(done)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> Report {
        let mut table = Table::new(vec!["x", "note"]);
        table.push(vec![Cell::Num(0.1), Cell::text("a, \"quoted\" note")]);
        table.push(vec![Cell::Num(3.0), Cell::Empty]);
        Report {
            command: "test".into(),
            table,
            params: json!({}),
            grid_settings: json!({}),
            outputs: json!({"v": 1.0}),
            summary: String::new(),
        }
    }

    #[test]
    fn csv_quoting_and_precision() {
        let text = String::from_utf8(report().table.to_csv()).unwrap();
        assert_eq!(text, "x,note\n1.0000000000000001e-1,\"a, \"\"quoted\"\" note\"\n3.0000000000000000e0,\n");
        let x: f64 = "1.0000000000000001e-1".parse().unwrap();
        assert_eq!(x, 0.1);
    }

    #[test]
    fn round_trip_seventeen_digits() {
        for x in [1.0 / 3.0, 2f64.sqrt(), 1e-300, -7.5e12, 0.0] {
            let s = format_number(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
            let mantissa = s.split('e').next().unwrap().trim_start_matches('-').replace('.', "");
            assert_eq!(mantissa.len(), 17);
        }
    }

    #[test]
    #[should_panic(expected = "row width")]
    fn ragged_rows_rejected() {
        Table::new(vec!["a", "b"]).push(vec![Cell::Empty]);
    }

    #[test]
    fn writes_both_files() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("r.csv");
        let files = write_report(&report(), &RunConfig::default(), &out, Format::Csv).unwrap();
        assert_eq!(files, vec![out.clone(), dir.path().join("r.json")]);
        let side: Value = serde_json::from_str(&std::fs::read_to_string(&files[1]).unwrap()).unwrap();
        for key in ["params", "outputs", "tool_version", "grid_settings"] {
            assert!(side.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn missing_directory_leaves_nothing() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("absent").join("r.csv");
        assert!(matches!(
            write_report(&report(), &RunConfig::default(), &out, Format::Csv),
            Err(CliError::Io(_))
        ));
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 0);
    }
}
