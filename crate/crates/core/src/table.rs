//! CSV helpers for the per-sample artifact files.

use std::path::Path;
use std::str::FromStr;

use crate::{Error, Result};

pub(crate) fn write_csv<I, R>(path: &Path, header: &[String], rows: I) -> Result<()>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut w =
        csv::Writer::from_path(path).map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
    w.write_record(header)
        .map_err(|e| Error::Csv(e.to_string()))?;
    for row in rows {
        w.write_record(row).map_err(|e| Error::Csv(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Header and records of a CSV file.
pub(crate) struct Rows {
    pub header: Vec<String>,
    pub records: Vec<csv::StringRecord>,
    path: String,
}

impl Rows {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path)
            .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
        let header = r
            .headers()
            .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?
            .iter()
            .map(str::to_owned)
            .collect();
        let records = r
            .records()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::Csv(format!("{}: {e}", path.display())))?;
        Ok(Self {
            header,
            records,
            path: path.display().to_string(),
        })
    }

    pub fn expect_header(&self, prefix: &[&str]) -> Result<()> {
        if self.header.len() < prefix.len() || self.header.iter().zip(prefix).any(|(a, b)| a != b) {
            return Err(Error::Csv(format!(
                "{}: header {:?} does not start with {prefix:?}",
                self.path, self.header
            )));
        }
        Ok(())
    }

    pub fn column(&self, name: &str) -> Result<usize> {
        self.header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Csv(format!("{}: no column `{name}`", self.path)))
    }

    pub fn parse<T: FromStr>(&self, row: usize, col: usize) -> Result<T> {
        let raw = self.records[row].get(col).unwrap_or("");
        raw.parse().map_err(|_| {
            Error::Csv(format!(
                "{}: line {}: cannot parse `{raw}` in column `{}`",
                self.path,
                row + 2,
                self.header.get(col).map_or("?", String::as_str)
            ))
        })
    }

    pub fn parse_bool(&self, row: usize, col: usize) -> Result<bool> {
        Ok(self.parse::<u8>(row, col)? != 0)
    }
}

pub(crate) fn flag(b: bool) -> String {
    (b as u8).to_string()
}
