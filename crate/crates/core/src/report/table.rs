//! Markdown and CSV rendering of the score table, and the CSV loader.

use std::io::Read;

use serde::{Deserialize, Serialize};

use super::{ReportError, Result};
use crate::evalkit::Metric;

/// Column titles after the model column, human column first.
pub const COLUMN_TITLES: [&str; 7] = [
    "Human Evaluation",
    "Visual Smooth",
    "Visual Motion",
    "Visual Appeal",
    "Text-Video Consistency",
    "Image-Video Consistency",
    "Character Consistency",
];

const HUMAN_KEY: &str = "human";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Markdown,
    Csv,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: String,
    pub human: Option<f64>,
    /// In [`Metric::ALL`] order.
    pub values: Vec<Option<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub has_human: bool,
    pub rows: Vec<TableRow>,
}

fn cell(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.2}"))
}

impl TableRow {
    fn fields(&self, has_human: bool) -> Vec<String> {
        let mut out = vec![self.model.clone()];
        if has_human {
            out.push(cell(self.human));
        }
        out.extend(self.values.iter().map(|&v| cell(v)));
        out
    }
}

impl Table {
    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Markdown => render_markdown(self),
            Format::Csv => render_csv(self),
        }
    }
}

pub fn render_markdown(table: &Table) -> String {
    let skip = usize::from(!table.has_human);
    let mut header = vec!["Model"];
    header.extend(&COLUMN_TITLES[skip..]);
    let mut out = format!("| {} |\n", header.join(" | "));
    out.push_str(&format!("|{}\n", ["---|"].repeat(header.len()).concat()));
    for row in &table.rows {
        out.push_str(&format!("| {} |\n", row.fields(table.has_human).join(" | ")));
    }
    out
}

pub fn render_csv(table: &Table) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["model"];
    if table.has_human {
        header.push(HUMAN_KEY);
    }
    header.extend(Metric::ALL.iter().map(|m| m.key()));
    w.write_record(&header).expect("in-memory write");
    for row in &table.rows {
        w.write_record(row.fields(table.has_human)).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is UTF-8")
}

fn parse_cell(s: &str, line: usize) -> Result<Option<f64>> {
    if s == "-" {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| ReportError::Table {
        line,
        reason: format!("not a number or '-': {s:?}"),
    })
}

/// Load a table written by [`render_csv`].
pub fn read_table_csv(reader: impl Read) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let has_human = header.get(1).map(String::as_str) == Some(HUMAN_KEY);
    let mut expected = vec!["model".to_string()];
    if has_human {
        expected.push(HUMAN_KEY.into());
    }
    expected.extend(Metric::ALL.iter().map(|m| m.key().to_string()));
    if header != expected {
        return Err(ReportError::Table {
            line: 1,
            reason: format!("header {header:?}, expected {expected:?}"),
        });
    }
    let mut rows = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let fields: Vec<&str> = record.iter().collect();
        let first_value = 1 + usize::from(has_human);
        rows.push(TableRow {
            model: fields[0].to_string(),
            human: if has_human { parse_cell(fields[1], line)? } else { None },
            values: fields[first_value..]
                .iter()
                .map(|f| parse_cell(f, line))
                .collect::<Result<_>>()?,
        });
    }
    Ok(Table { has_human, rows })
}
