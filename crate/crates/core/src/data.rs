//! Rectangular datasets with continuous, ordinal and text columns.
//!
//! CSV missing markers are the empty field and `NA`. Ordinal level orders come
//! from a sidecar map (column -> ordered level labels); any column that does
//! not parse as numbers is read as text.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Column {
    Continuous(Vec<Option<f64>>),
    Ordinal {
        levels: Vec<String>,
        codes: Vec<Option<usize>>,
    },
    Text(Vec<Option<String>>),
}

impl Column {
    pub fn len(&self) -> usize {
        match self {
            Column::Continuous(v) => v.len(),
            Column::Ordinal { codes, .. } => codes.len(),
            Column::Text(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_missing(&self, row: usize) -> bool {
        match self {
            Column::Continuous(v) => v[row].is_none(),
            Column::Ordinal { codes, .. } => codes[row].is_none(),
            Column::Text(v) => v[row].is_none(),
        }
    }

    pub fn as_continuous(&self) -> Option<&[Option<f64>]> {
        match self {
            Column::Continuous(v) => Some(v),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Column::Continuous(_) => "continuous",
            Column::Ordinal { .. } => "ordinal",
            Column::Text(_) => "text",
        }
    }

    fn take_rows(&self, rows: &[usize]) -> Column {
        match self {
            Column::Continuous(v) => Column::Continuous(rows.iter().map(|&r| v[r]).collect()),
            Column::Ordinal { levels, codes } => Column::Ordinal {
                levels: levels.clone(),
                codes: rows.iter().map(|&r| codes[r]).collect(),
            },
            Column::Text(v) => Column::Text(rows.iter().map(|&r| v[r].clone()).collect()),
        }
    }

    fn cell_string(&self, row: usize) -> String {
        match self {
            Column::Continuous(v) => v[row].map_or_else(|| "NA".to_string(), format_number),
            Column::Ordinal { levels, codes } => {
                codes[row].map_or_else(|| "NA".to_string(), |c| levels[c].clone())
            }
            Column::Text(v) => v[row].clone().unwrap_or_else(|| "NA".to_string()),
        }
    }
}

/// Shortest round-trip representation, so written CSVs read back bit-identically.
pub fn format_number(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{x:.1}")
    } else {
        format!("{x}")
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ColumnTable {
    names: Vec<String>,
    columns: Vec<Column>,
    nrows: usize,
}

impl ColumnTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_rows(nrows: usize) -> Self {
        Self {
            nrows,
            ..Self::default()
        }
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.columns.len()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn columns(&self) -> impl Iterator<Item = (&str, &Column)> {
        self.names.iter().map(String::as_str).zip(self.columns.iter())
    }

    pub fn has(&self, name: &str) -> bool {
        self.names.iter().any(|n| n == name)
    }

    pub fn position(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Column> {
        self.position(name).map(|i| &self.columns[i])
    }

    pub fn column(&self, name: &str) -> Result<&Column> {
        self.get(name)
            .ok_or_else(|| Error::Data(format!("no column named `{name}`")))
    }

    pub fn column_at(&self, idx: usize) -> &Column {
        &self.columns[idx]
    }

    pub fn continuous(&self, name: &str) -> Result<&[Option<f64>]> {
        self.column(name)?
            .as_continuous()
            .ok_or_else(|| Error::Data(format!("column `{name}` is not continuous")))
    }

    pub fn continuous_mut(&mut self, name: &str) -> Result<&mut Vec<Option<f64>>> {
        let idx = self
            .position(name)
            .ok_or_else(|| Error::Data(format!("no column named `{name}`")))?;
        match &mut self.columns[idx] {
            Column::Continuous(v) => Ok(v),
            _ => Err(Error::Data(format!("column `{name}` is not continuous"))),
        }
    }

    /// Adds or replaces a column. The first column fixes the row count of an empty table.
    pub fn insert(&mut self, name: &str, column: Column) -> Result<()> {
        if self.columns.is_empty() && self.nrows == 0 {
            self.nrows = column.len();
        }
        if column.len() != self.nrows {
            return Err(Error::Data(format!(
                "column `{name}` has {} rows, table has {}",
                column.len(),
                self.nrows
            )));
        }
        if let Column::Ordinal { levels, codes } = &column {
            if codes.iter().flatten().any(|&c| c >= levels.len()) {
                return Err(Error::Data(format!("ordinal code out of range in `{name}`")));
            }
        }
        match self.position(name) {
            Some(i) => self.columns[i] = column,
            None => {
                self.names.push(name.to_string());
                self.columns.push(column);
            }
        }
        Ok(())
    }

    pub fn insert_continuous(&mut self, name: &str, values: Vec<Option<f64>>) -> Result<()> {
        self.insert(name, Column::Continuous(values))
    }

    pub fn remove(&mut self, name: &str) -> Option<Column> {
        let i = self.position(name)?;
        self.names.remove(i);
        Some(self.columns.remove(i))
    }

    pub fn take_rows(&self, rows: &[usize]) -> ColumnTable {
        ColumnTable {
            names: self.names.clone(),
            columns: self.columns.iter().map(|c| c.take_rows(rows)).collect(),
            nrows: rows.len(),
        }
    }

    /// Rows whose text (or ordinal/number rendered as text) value in `column` is one of `values`.
    pub fn filter_rows(&self, column: &str, values: &[String]) -> Result<ColumnTable> {
        let col = self.column(column)?;
        let rows: Vec<usize> = (0..self.nrows)
            .filter(|&r| !col.is_missing(r) && values.contains(&col.cell_string(r)))
            .collect();
        Ok(self.take_rows(&rows))
    }

    pub fn text_value(&self, column: &str, row: usize) -> Result<Option<String>> {
        let col = self.column(column)?;
        Ok((!col.is_missing(row)).then(|| col.cell_string(row)))
    }

    /// Reads CSV with a header row. Columns named in `ordinal` become ordinal with the given levels.
    pub fn read_csv<R: Read>(reader: R, ordinal: &BTreeMap<String, Vec<String>>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let headers: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
        let mut raw: Vec<Vec<Option<String>>> = vec![Vec::new(); headers.len()];
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() != headers.len() {
                return Err(Error::Data(format!(
                    "row {} has {} fields, header has {}",
                    line + 2,
                    rec.len(),
                    headers.len()
                )));
            }
            for (j, field) in rec.iter().enumerate() {
                let f = field.trim();
                raw[j].push((!(f.is_empty() || f == "NA")).then(|| f.to_string()));
            }
        }
        let nrows = raw.first().map_or(0, Vec::len);
        let mut table = ColumnTable::with_rows(nrows);
        for (name, cells) in headers.iter().zip(raw) {
            let column = if let Some(levels) = ordinal.get(name) {
                let codes = cells
                    .iter()
                    .map(|c| match c {
                        None => Ok(None),
                        Some(s) => levels.iter().position(|l| l == s).map(Some).ok_or_else(|| {
                            Error::Data(format!("value `{s}` in `{name}` is not a declared level"))
                        }),
                    })
                    .collect::<Result<Vec<_>>>()?;
                Column::Ordinal {
                    levels: levels.clone(),
                    codes,
                }
            } else {
                let parsed: Option<Vec<Option<f64>>> = cells
                    .iter()
                    .map(|c| match c {
                        None => Some(None),
                        Some(s) => s.parse::<f64>().ok().map(Some),
                    })
                    .collect();
                match parsed {
                    Some(v) => Column::Continuous(v),
                    None => Column::Text(cells),
                }
            };
            table.insert(name, column)?;
        }
        for name in ordinal.keys() {
            if !table.has(name) {
                return Err(Error::Data(format!("ordinal column `{name}` not in data")));
            }
        }
        Ok(table)
    }

    pub fn read_csv_path(
        path: impl AsRef<Path>,
        ordinal: &BTreeMap<String, Vec<String>>,
    ) -> Result<Self> {
        let file = std::fs::File::open(path.as_ref()).map_err(|e| {
            Error::Data(format!("cannot open {}: {e}", path.as_ref().display()))
        })?;
        Self::read_csv(std::io::BufReader::new(file), ordinal)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(&self.names)?;
        for r in 0..self.nrows {
            w.write_record(self.columns.iter().map(|c| c.cell_string(r)))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Ordinal level declarations present in this table.
    pub fn ordinal_levels(&self) -> BTreeMap<String, Vec<String>> {
        self.columns()
            .filter_map(|(n, c)| match c {
                Column::Ordinal { levels, .. } => Some((n.to_string(), levels.clone())),
                _ => None,
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_with_missing_and_ordinal() {
        let text = "id,x,bin,zyg\n1,0.5,<low>,MZ\n2,NA,,DZ\n3,,<high>,MZ\n";
        let ord: BTreeMap<String, Vec<String>> =
            [("bin".to_string(), vec!["<low>".to_string(), "<high>".to_string()])].into();
        let t = ColumnTable::read_csv(text.as_bytes(), &ord).unwrap();
        assert_eq!(t.nrows(), 3);
        assert_eq!(t.continuous("x").unwrap(), &[Some(0.5), None, None]);
        assert!(matches!(t.column("zyg").unwrap(), Column::Text(_)));
        match t.column("bin").unwrap() {
            Column::Ordinal { codes, .. } => assert_eq!(codes, &vec![Some(0), None, Some(1)]),
            _ => panic!(),
        }
        let back = ColumnTable::read_csv(t.to_csv_string().unwrap().as_bytes(), &ord).unwrap();
        assert_eq!(back, t);
        let mz = t.filter_rows("zyg", &["MZ".to_string()]).unwrap();
        assert_eq!(mz.nrows(), 2);
    }

    #[test]
    fn undeclared_level_is_an_error() {
        let ord: BTreeMap<String, Vec<String>> =
            [("b".to_string(), vec!["lo".to_string()])].into();
        assert!(ColumnTable::read_csv("b\nhi\n".as_bytes(), &ord).is_err());
    }

    #[test]
    fn row_count_mismatch_rejected() {
        let mut t = ColumnTable::new();
        t.insert_continuous("a", vec![Some(1.0), None]).unwrap();
        assert!(t.insert_continuous("b", vec![Some(1.0)]).is_err());
    }
}
