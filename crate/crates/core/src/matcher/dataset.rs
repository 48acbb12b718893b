use std::io::{Read, Write};
use std::path::Path;

use crate::{Error, Result};

/// Sample indices `(i, j)` of a comparison.
pub type IndexPair = (usize, usize);

/// Labelled feature vectors of a common dimension.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Dataset {
    labels: Vec<String>,
    features: Vec<Vec<f64>>,
}

impl Dataset {
    pub fn new(labels: Vec<String>, features: Vec<Vec<f64>>) -> Result<Self> {
        if labels.len() != features.len() {
            return Err(Error::InvalidParameter(format!(
                "{} labels for {} feature rows",
                labels.len(),
                features.len()
            )));
        }
        if let Some(first) = features.first() {
            let d = first.len();
            if d == 0 {
                return Err(Error::InvalidParameter("empty feature rows".into()));
            }
            if let Some(i) = features.iter().position(|f| f.len() != d) {
                return Err(Error::InvalidParameter(format!(
                    "row {i} has {} features, expected {d}",
                    features[i].len()
                )));
            }
        }
        Ok(Self { labels, features })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn identity_count(&self) -> usize {
        let mut l: Vec<&String> = self.labels.iter().collect();
        l.sort();
        l.dedup();
        l.len()
    }

    /// Index pairs `(i, j)`, `i < j`, split into same-label and
    /// different-label pairs.
    pub fn pairs(&self) -> (Vec<IndexPair>, Vec<IndexPair>) {
        let mut genuine = Vec::new();
        let mut impostor = Vec::new();
        for i in 0..self.len() {
            for j in i + 1..self.len() {
                if self.labels[i] == self.labels[j] {
                    genuine.push((i, j));
                } else {
                    impostor.push((i, j));
                }
            }
        }
        (genuine, impostor)
    }

    /// Rows of `label,f1,...,fd`, no header.
    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let mut labels = Vec::new();
        let mut features = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| Error::Decode(format!("line {}: {e}", line + 1)))?;
            let mut fields = rec.iter();
            let label = fields
                .next()
                .filter(|l| !l.is_empty())
                .ok_or_else(|| Error::Decode(format!("line {}: missing label", line + 1)))?;
            let row = fields
                .map(|f| {
                    f.parse::<f64>()
                        .ok()
                        .filter(|x| x.is_finite())
                        .ok_or_else(|| {
                            Error::Decode(format!("line {}: bad feature {f:?}", line + 1))
                        })
                })
                .collect::<Result<Vec<_>>>()?;
            labels.push(label.to_string());
            features.push(row);
        }
        Self::new(labels, features).map_err(|e| Error::Decode(e.to_string()))
    }

    pub fn from_csv_path(path: &Path) -> Result<Self> {
        Self::from_csv_reader(std::fs::File::open(path)?)
    }

    pub fn to_csv_writer<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new()
            .has_headers(false)
            .from_writer(writer);
        for (label, row) in self.labels.iter().zip(&self.features) {
            let mut rec = Vec::with_capacity(row.len() + 1);
            rec.push(label.clone());
            rec.extend(row.iter().map(|x| format!("{x}")));
            w.write_record(&rec)
                .map_err(|e| Error::Io(std::io::Error::other(e)))?;
        }
        w.flush()?;
        Ok(())
    }
}
