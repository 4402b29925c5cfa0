//! Report tables: a small column-ordered table type with CSV and Markdown
//! emission. CSV output is deterministic (no timing columns, fixed float
//! formatting upstream) so identical runs produce identical bytes.

use crate::{Error, Result};
use std::str::FromStr;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "markdown" | "md" => Ok(ReportFormat::Markdown),
            other => Err(Error::InvalidArgument(format!(
                "unknown format '{other}' (csv, markdown)"
            ))),
        }
    }
}

/// Column-ordered string table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push_row(&mut self, row: Vec<String>) {
        assert_eq!(row.len(), self.columns.len(), "row width mismatch");
        self.rows.push(row);
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Csv => self.to_csv(),
            ReportFormat::Markdown => self.to_markdown(),
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::new();
        s.push_str(&self.columns.join(","));
        s.push('\n');
        for row in &self.rows {
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }

    pub fn to_markdown(&self) -> String {
        let mut widths: Vec<usize> = self.columns.iter().map(|c| c.len()).collect();
        for row in &self.rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut s = String::new();
        let emit = |s: &mut String, cells: &[String]| {
            s.push('|');
            for (cell, w) in cells.iter().zip(&widths) {
                s.push(' ');
                s.push_str(cell);
                for _ in cell.len()..*w {
                    s.push(' ');
                }
                s.push_str(" |");
            }
            s.push('\n');
        };
        emit(&mut s, &self.columns);
        s.push('|');
        for w in &widths {
            s.push_str(&"-".repeat(w + 2));
            s.push('|');
        }
        s.push('\n');
        for row in &self.rows {
            emit(&mut s, row);
        }
        s
    }

    /// Parse a table previously written by [`to_csv`]. Cells are plain
    /// (no quoting): none of our values contain commas.
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or(Error::EmptyInput("csv text"))?;
        let columns: Vec<String> = header.split(',').map(|c| c.to_string()).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            let row: Vec<String> = line.split(',').map(|c| c.to_string()).collect();
            if row.len() != columns.len() {
                return Err(Error::Parse {
                    offset: 0,
                    message: format!(
                        "csv row {} has {} cells, expected {}",
                        i + 1,
                        row.len(),
                        columns.len()
                    ),
                });
            }
            rows.push(row);
        }
        Ok(Table { columns, rows })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Table {
        let mut t = Table::new(&["cycle", "recall"]);
        t.push_row(vec!["0".into(), "0.950000".into()]);
        t.push_row(vec!["1".into(), "0.945000".into()]);
        t
    }

    #[test]
    fn csv_roundtrip() {
        let t = sample();
        let csv = t.to_csv();
        assert_eq!(csv, "cycle,recall\n0,0.950000\n1,0.945000\n");
        assert_eq!(Table::from_csv(&csv).unwrap(), t);
    }

    #[test]
    fn markdown_has_header_separator() {
        let md = sample().to_markdown();
        let lines: Vec<&str> = md.lines().collect();
        assert_eq!(lines.len(), 4);
        assert!(lines[0].contains("cycle"));
        assert!(lines[1].chars().all(|c| matches!(c, '|' | '-')));
    }

    #[test]
    fn ragged_csv_rejected() {
        assert!(Table::from_csv("a,b\n1\n").is_err());
    }

    #[test]
    fn format_parsing() {
        assert_eq!("csv".parse::<ReportFormat>().unwrap(), ReportFormat::Csv);
        assert_eq!("md".parse::<ReportFormat>().unwrap(), ReportFormat::Markdown);
        assert!("xml".parse::<ReportFormat>().is_err());
    }
}
