use std::io::Write;
use std::path::Path;

/// Named columns of equal length.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Table {
    pub names: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(names: &[&str]) -> Self {
        Self { names: names.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.names.len());
        self.rows.push(row);
    }
}

/// Writes a gnuplot-readable file: a `#` header naming the columns, then one
/// whitespace-separated line per row.
pub fn emit_plotdata(table: &Table, path: &Path) -> std::io::Result<()> {
    let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidInput, m.to_string());
    if table.rows.is_empty() || table.names.is_empty() {
        return Err(bad("empty table"));
    }
    if table.rows.iter().any(|r| r.len() != table.names.len()) {
        return Err(bad("row length does not match the header"));
    }
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(w, "# {}", table.names.join(" "))?;
    for row in &table.rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
        writeln!(w, "{}", cells.join(" "))?;
    }
    w.flush()
}
