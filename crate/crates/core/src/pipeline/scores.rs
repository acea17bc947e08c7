//! Per-sample score files: `sample_id,is_wrong,<score columns...>`.

use std::path::Path;

use crate::table::{self, Rows};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub ids: Vec<u64>,
    pub is_wrong: Vec<bool>,
    pub columns: Vec<(String, Vec<f64>)>,
}

impl ScoreTable {
    pub fn new(ids: Vec<u64>, is_wrong: Vec<bool>) -> Self {
        Self {
            ids,
            is_wrong,
            columns: Vec::new(),
        }
    }

    pub fn with(mut self, name: &str, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.ids.len(), "column {name} length");
        self.columns.push((name.to_owned(), values));
        self
    }

    pub fn column(&self, name: &str) -> Result<&[f64]> {
        self.columns
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| Error::Csv(format!("score table has no column `{name}`")))
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let mut header = vec!["sample_id".to_string(), "is_wrong".to_string()];
        header.extend(self.columns.iter().map(|(n, _)| n.clone()));
        table::write_csv(
            path,
            &header,
            (0..self.ids.len()).map(|i| {
                [self.ids[i].to_string(), table::flag(self.is_wrong[i])]
                    .into_iter()
                    .chain(self.columns.iter().map(move |(_, v)| v[i].to_string()))
            }),
        )
    }

    pub fn read(path: &Path) -> Result<Self> {
        let t = Rows::read(path)?;
        t.expect_header(&["sample_id", "is_wrong"])?;
        let n = t.records.len();
        let ids = (0..n).map(|i| t.parse(i, 0)).collect::<Result<_>>()?;
        let is_wrong = (0..n).map(|i| t.parse_bool(i, 1)).collect::<Result<_>>()?;
        let columns = t.header[2..]
            .iter()
            .map(|name| {
                let c = t.column(name)?;
                Ok((
                    name.clone(),
                    (0..n).map(|i| t.parse(i, c)).collect::<Result<_>>()?,
                ))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            ids,
            is_wrong,
            columns,
        })
    }
}
