//! Plot-ready CSV artifacts: a `#` comment block carrying the resolved configuration, a header
//! row, then one record per row. Floats are written with 17 significant digits so that reading
//! a file back reproduces every value bit for bit.

use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
}

impl Cell {
    fn kind(&self) -> u8 {
        match self {
            Cell::Int(_) => 0,
            Cell::Float(_) => 1,
            Cell::Text(_) => 2,
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Int(v) => Some(*v as f64),
            Cell::Float(v) => Some(*v),
            Cell::Text(_) => None,
        }
    }

    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Text(s) => s.clone(),
        }
    }

    /// Integers, then floats, then text.
    fn parse(s: &str) -> Cell {
        if let Ok(v) = s.parse::<i64>() {
            Cell::Int(v)
        } else if let Ok(v) = s.parse::<f64>() {
            Cell::Float(v)
        } else {
            Cell::Text(s.to_string())
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// 17 significant digits in scientific notation, e.g. `1.2500000000000000e-1`.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Table {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    /// Appends a row; it must have one cell per column and match the kinds of earlier rows.
    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.columns.len() {
            return Err(Error::InvalidInput(format!(
                "row has {} cells, table has {} columns",
                row.len(),
                self.columns.len()
            )));
        }
        if let Some(first) = self.rows.first() {
            if let Some(j) = (0..row.len()).find(|&j| row[j].kind() != first[j].kind()) {
                return Err(Error::InvalidInput(format!(
                    "column '{}' mixes cell kinds",
                    self.columns[j]
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column_f64(&self, name: &str) -> Result<Vec<f64>> {
        let j = self
            .column(name)
            .ok_or_else(|| Error::InvalidInput(format!("no column '{name}'")))?;
        self.rows
            .iter()
            .map(|r| {
                r[j].as_f64()
                    .ok_or_else(|| Error::Parse(format!("column '{name}' is not numeric")))
            })
            .collect()
    }
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Parse(format!("{other:?}")),
    }
}

/// Serializes `table` with the comment block `header` (one `# ` line per input line).
pub fn write_csv<W: Write>(mut out: W, header: &str, table: &Table) -> Result<()> {
    for line in header.lines() {
        writeln!(out, "# {line}")?;
    }
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(out);
    w.write_record(&table.columns).map_err(csv_err)?;
    for row in &table.rows {
        w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes bytes next to `path` and renames them into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

pub fn emit_csv(path: &Path, header: &str, table: &Table) -> Result<()> {
    let mut buf = Vec::new();
    write_csv(&mut buf, header, table)?;
    write_atomic(path, &buf)
}

/// Reads a file written by [`emit_csv`]; returns the comment block (without `# `) and the table.
pub fn read_csv(path: &Path) -> Result<(String, Table)> {
    let text = std::fs::read_to_string(path)?;
    let mut header = String::new();
    let mut body_start = 0;
    for line in text.split_inclusive('\n') {
        if let Some(rest) = line.strip_prefix('#') {
            let rest = rest.strip_prefix(' ').unwrap_or(rest);
            header.push_str(rest.trim_end_matches(['\r', '\n']));
            header.push('\n');
            body_start += line.len();
        } else {
            break;
        }
    }
    let mut rdr = csv::ReaderBuilder::new().from_reader(text[body_start..].as_bytes());
    let columns: Vec<String> = rdr.headers().map_err(csv_err)?.iter().map(String::from).collect();
    let mut table = Table {
        columns,
        rows: Vec::new(),
    };
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        table.push(rec.iter().map(Cell::parse).collect())?;
    }
    Ok((header, table))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_table_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("e.csv");
        emit_csv(&p, "{\"k\": 1}", &Table::new(&["x", "U"])).unwrap();
        let text = std::fs::read_to_string(&p).unwrap();
        assert_eq!(text, "# {\"k\": 1}\nx,U\r\n");
        let (h, t) = read_csv(&p).unwrap();
        assert_eq!(h, "{\"k\": 1}\n");
        assert!(t.rows.is_empty());
    }

    #[test]
    fn one_row_gives_two_lines() {
        let mut t = Table::new(&["t", "component", "label"]);
        t.push(vec![0.1.into(), 2usize.into(), "a,\"b\"".into()]).unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, "line one\nline two", &t).unwrap();
        let s = String::from_utf8(buf).unwrap();
        let body: Vec<&str> = s.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(body, ["t,component,label", "1.0000000000000001e-1,2,\"a,\"\"b\"\"\""]);
        assert!(t.push(vec![1.0.into()]).is_err());
        assert!(t.push(vec![1usize.into(), 2usize.into(), "c".into()]).is_err());
    }

    #[test]
    fn floats_round_trip_bit_exactly() {
        let vals = [
            0.1,
            1.0 / 3.0,
            -2.5e-300,
            f64::MIN_POSITIVE,
            5e-324,
            f64::MAX,
            -0.0,
            std::f64::consts::PI * 1e17,
        ];
        let mut t = Table::new(&["v"]);
        for v in vals {
            t.push(vec![v.into()]).unwrap();
        }
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.csv");
        emit_csv(&p, "", &t).unwrap();
        let back = read_csv(&p).unwrap().1.column_f64("v").unwrap();
        for (a, b) in vals.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits(), "{a} vs {b}");
        }
    }
}
