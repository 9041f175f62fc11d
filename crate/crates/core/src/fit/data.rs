//! Tabular data with numeric and categorical columns.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;

use super::FitError;

#[derive(Debug, Clone, PartialEq)]
pub enum Column {
    Numeric(Vec<f64>),
    /// Integer codes into `labels`, which are sorted.
    Categorical {
        codes: Vec<f64>,
        labels: Vec<String>,
    },
}

impl Column {
    pub fn values(&self) -> &[f64] {
        match self {
            Column::Numeric(v) => v,
            Column::Categorical { codes, .. } => codes,
        }
    }

    pub fn is_categorical(&self) -> bool {
        matches!(self, Column::Categorical { .. })
    }

    pub fn len(&self) -> usize {
        self.values().len()
    }

    pub fn is_empty(&self) -> bool {
        self.values().is_empty()
    }

    /// Codes labels by their rank among the distinct sorted labels.
    pub fn categorical<S: AsRef<str>>(raw: &[S]) -> Self {
        let labels: Vec<String> = raw
            .iter()
            .map(|s| s.as_ref().to_string())
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let rank: HashMap<&str, usize> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect();
        let codes = raw.iter().map(|s| rank[s.as_ref()] as f64).collect();
        Column::Categorical { codes, labels }
    }

    /// Display form of a value in this column.
    pub fn render(&self, v: f64) -> String {
        match self {
            Column::Categorical { labels, .. } => labels
                .get(v as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{v}")),
            Column::Numeric(_) => format!("{v}"),
        }
    }
}

/// A rectangular table after ingestion filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    names: Vec<String>,
    columns: Vec<Column>,
    rows: usize,
    dropped: usize,
}

impl Dataset {
    pub fn new(names: Vec<String>, columns: Vec<Column>) -> Result<Self, FitError> {
        if names.len() != columns.len() || names.is_empty() {
            return Err(FitError::Data(
                "need one name per column and at least one column".into(),
            ));
        }
        let rows = columns[0].len();
        if rows == 0 {
            return Err(FitError::Data("dataset has no rows".into()));
        }
        if let Some(i) = columns.iter().position(|c| c.len() != rows) {
            return Err(FitError::Data(format!(
                "column `{}` has {} rows, expected {rows}",
                names[i],
                columns[i].len()
            )));
        }
        if let Some(i) = columns
            .iter()
            .position(|c| c.values().iter().any(|v| !v.is_finite()))
        {
            return Err(FitError::Data(format!(
                "column `{}` has non-finite values",
                names[i]
            )));
        }
        Ok(Self {
            names,
            columns,
            rows,
            dropped: 0,
        })
    }

    /// Reads CSV with a header row, keeping the columns in `used`.
    ///
    /// Columns in `categorical` are read as labels. Any other column is
    /// numeric, unless none of its cells parses as a number, in which case it
    /// is read as labels too. Rows with an empty or unparseable cell in a used
    /// column are dropped and counted.
    pub fn from_csv<R: Read, S: AsRef<str>>(
        reader: R,
        used: &[S],
        categorical: &[S],
    ) -> Result<Self, FitError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let header = rdr
            .headers()
            .map_err(|e| FitError::Csv(e.to_string()))?
            .clone();
        let mut positions = Vec::with_capacity(used.len());
        for name in used {
            let name = name.as_ref();
            let pos = header
                .iter()
                .position(|h| h == name)
                .ok_or_else(|| FitError::MissingColumn(name.to_string()))?;
            positions.push(pos);
        }
        let mut raw: Vec<Vec<String>> = vec![Vec::new(); used.len()];
        for record in rdr.records() {
            let record = record.map_err(|e| FitError::Csv(e.to_string()))?;
            for (col, &pos) in raw.iter_mut().zip(&positions) {
                col.push(record.get(pos).unwrap_or("").to_string());
            }
        }
        let declared: Vec<bool> = used
            .iter()
            .map(|u| categorical.iter().any(|c| c.as_ref() == u.as_ref()))
            .collect();
        let is_cat: Vec<bool> = raw
            .iter()
            .zip(&declared)
            .map(|(col, &d)| d || !col.iter().any(|c| parse_real(c).is_some()))
            .collect();
        let total = raw.first().map_or(0, Vec::len);
        let keep: Vec<bool> = (0..total)
            .map(|r| {
                raw.iter().zip(&is_cat).all(|(col, &cat)| {
                    let cell = &col[r];
                    if cat {
                        !cell.is_empty()
                    } else {
                        parse_real(cell).is_some()
                    }
                })
            })
            .collect();
        let columns = raw
            .iter()
            .zip(&is_cat)
            .map(|(col, &cat)| {
                let kept = col
                    .iter()
                    .zip(&keep)
                    .filter(|(_, &k)| k)
                    .map(|(c, _)| c.as_str());
                if cat {
                    Column::categorical(&kept.collect::<Vec<_>>())
                } else {
                    Column::Numeric(kept.map(|c| parse_real(c).expect("filtered")).collect())
                }
            })
            .collect();
        let names = used.iter().map(|u| u.as_ref().to_string()).collect();
        let mut ds = Self::new(names, columns)?;
        ds.dropped = keep.iter().filter(|k| !**k).count();
        Ok(ds)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Rows removed during ingestion.
    pub fn dropped(&self) -> usize {
        self.dropped
    }

    pub fn column(&self, name: &str) -> Result<&Column, FitError> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|i| &self.columns[i])
            .ok_or_else(|| FitError::MissingColumn(name.to_string()))
    }
}

fn parse_real(cell: &str) -> Option<f64> {
    cell.parse::<f64>().ok().filter(|v| v.is_finite())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_ingestion_drops_bad_rows() {
        let text = "sex,age,income,unused\nM,30,10.5,x\nF,,9.0,y\nF,41,abc,z\nM,52,11.25,\n";
        let ds = Dataset::from_csv(text.as_bytes(), &["sex", "age", "income"], &[]).unwrap();
        assert_eq!(ds.rows(), 2);
        assert_eq!(ds.dropped(), 2);
        assert!(ds.column("sex").unwrap().is_categorical());
        assert_eq!(ds.column("income").unwrap().values(), &[10.5, 11.25]);
        assert!(matches!(
            ds.column("unused"),
            Err(FitError::MissingColumn(_))
        ));
    }

    #[test]
    fn declared_categorical_numbers() {
        let text = "g,y\n2,1\n1,2\n2,3\n";
        let ds = Dataset::from_csv(text.as_bytes(), &["g", "y"], &["g"]).unwrap();
        let g = ds.column("g").unwrap();
        assert_eq!(g.values(), &[1.0, 0.0, 1.0]);
        assert_eq!(g.render(1.0), "2");
    }

    #[test]
    fn missing_column_is_an_error() {
        let text = "a,b\n1,2\n";
        assert!(matches!(
            Dataset::from_csv(text.as_bytes(), &["a", "c"], &[]),
            Err(FitError::MissingColumn(c)) if c == "c"
        ));
    }

    #[test]
    fn all_rows_dropped() {
        let text = "a,b\n1,\n";
        assert!(Dataset::from_csv(text.as_bytes(), &["a", "b"], &[]).is_err());
    }
}
