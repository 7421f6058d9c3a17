use crate::config::Format;
use crate::CliError;
use std::io::Write;
use std::path::Path;

#[derive(Debug, Clone, Copy)]
pub enum Cell {
    Int(i64),
    Float(f64),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:.11e}"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self { header: header.into_iter().map(Into::into).collect(), rows: vec![] }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, format: Format) -> String {
        let sep = match format {
            Format::Csv => ",",
            Format::Dat => " ",
        };
        let mut out = String::new();
        if format == Format::Dat {
            out.push_str("# ");
        }
        out.push_str(&self.header.join(sep));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join(sep));
            out.push('\n');
        }
        out
    }
}

/// Writes `text` to `path`, or to stdout when no path is given.
pub fn emit(text: &str, path: Option<&Path>) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError::Config(format!("cannot write output: {e}")))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn twelve_significant_digits() {
        let mut t = Table::new(["n", "x"]);
        t.push(vec![Cell::Int(2), Cell::Float(-0.5)]);
        t.push(vec![Cell::Int(3), Cell::Float(std::f64::consts::PI)]);
        assert_eq!(t.render(Format::Csv), "n,x\n2,-5.00000000000e-1\n3,3.14159265359e0\n");
        assert_eq!(t.render(Format::Dat), "# n x\n2 -5.00000000000e-1\n3 3.14159265359e0\n");
    }
}
