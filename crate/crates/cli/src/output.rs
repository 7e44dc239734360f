use std::fmt::Write as _;

use clap::ValueEnum;

use crate::{CliError, RunReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Table,
    Csv,
    Json,
}

/// Rows of strings with a header, shared by the table and CSV emitters.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Printed under the table in table mode only.
    pub notes: Vec<String>,
}

impl Table {
    pub fn new(headers: &[&str]) -> Self {
        Table { headers: headers.iter().map(|h| h.to_string()).collect(), ..Table::default() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn note(&mut self, note: impl Into<String>) {
        self.notes.push(note.into());
    }
}

#[macro_export]
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($x.to_string()),*] };
}

pub fn render(report: &RunReport, format: Format) -> Result<String, CliError> {
    match format {
        Format::Json => {
            let mut s = serde_json::to_string_pretty(report).map_err(|e| CliError::Output(e.to_string()))?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => csv_text(&report.payload.table(), report.seed),
        Format::Table => Ok(aligned(&report.payload.table())),
    }
}

fn csv_text(table: &Table, seed: u64) -> Result<String, CliError> {
    let mut out = format!("# seed {seed}\n");
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.headers).map_err(|e| CliError::Output(e.to_string()))?;
    for row in &table.rows {
        w.write_record(row).map_err(|e| CliError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).map_err(|e| CliError::Output(e.to_string()))?);
    Ok(out)
}

fn aligned(table: &Table) -> String {
    let mut widths: Vec<usize> = table.headers.iter().map(|h| h.chars().count()).collect();
    for row in &table.rows {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let line = |out: &mut String, cells: &[String]| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, &w)| format!("{c:>w$}")).collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&mut out, &table.headers);
    let rule: Vec<String> = widths.iter().map(|&w| "-".repeat(w)).collect();
    line(&mut out, &rule);
    for row in &table.rows {
        line(&mut out, row);
    }
    for note in &table.notes {
        let _ = writeln!(out, "{note}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn aligned_columns() {
        let mut t = Table::new(&["n", "fraction"]);
        t.push(row![1, "1/2"]);
        t.push(row![10, "1023/1024"]);
        t.note("done");
        assert_eq!(aligned(&t), " n   fraction\n--  ---------\n 1        1/2\n10  1023/1024\ndone\n");
    }

    #[test]
    fn csv_quotes_cells() {
        let mut t = Table::new(&["k", "members"]);
        t.push(row![3, "1,2"]);
        assert_eq!(csv_text(&t, 5).unwrap(), "# seed 5\nk,members\n3,\"1,2\"\n");
    }
}
