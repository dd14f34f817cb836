use std::io::{Read, Write};

use super::FeatureError;

/// Dense documents x features matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    doc_ids: Vec<String>,
    feature_names: Vec<String>,
    values: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(doc_ids: Vec<String>, feature_names: Vec<String>, values: Vec<f64>) -> Result<Self, FeatureError> {
        let expected = doc_ids.len() * feature_names.len();
        if values.len() != expected {
            return Err(FeatureError::DimensionMismatch {
                expected,
                found: values.len(),
            });
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(FeatureError::DegenerateInput("NaN feature value".into()));
        }
        Ok(FeatureMatrix {
            doc_ids,
            feature_names,
            values,
        })
    }

    pub fn from_rows(doc_ids: Vec<String>, feature_names: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self, FeatureError> {
        let cols = feature_names.len();
        if rows.len() != doc_ids.len() {
            return Err(FeatureError::DimensionMismatch {
                expected: doc_ids.len(),
                found: rows.len(),
            });
        }
        let mut values = Vec::with_capacity(rows.len() * cols);
        for row in rows {
            if row.len() != cols {
                return Err(FeatureError::DimensionMismatch {
                    expected: cols,
                    found: row.len(),
                });
            }
            values.extend(row);
        }
        Self::new(doc_ids, feature_names, values)
    }

    pub fn rows(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn cols(&self) -> usize {
        self.feature_names.len()
    }

    pub fn doc_ids(&self) -> &[String] {
        &self.doc_ids
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.cols();
        &self.values[i * c..(i + 1) * c]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.cols() + j]
    }

    pub fn row_vecs(&self) -> Vec<Vec<f64>> {
        (0..self.rows()).map(|i| self.row(i).to_vec()).collect()
    }

    /// Rows at `indices`, in that order.
    pub fn select_rows(&self, indices: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(indices.len() * self.cols());
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix {
            doc_ids: indices.iter().map(|&i| self.doc_ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            values,
        }
    }

    /// Write as delimited text: header `doc_id,<features...>`, one row per doc.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), FeatureError> {
        let mut out = csv::Writer::from_writer(w);
        let to_io = |e: csv::Error| FeatureError::Io(std::io::Error::other(e));
        let header = std::iter::once("doc_id").chain(self.feature_names.iter().map(String::as_str));
        out.write_record(header).map_err(to_io)?;
        for (i, id) in self.doc_ids.iter().enumerate() {
            let row = std::iter::once(id.clone()).chain(self.row(i).iter().map(|v| v.to_string()));
            out.write_record(row).map_err(to_io)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, FeatureError> {
        let mut reader = csv::Reader::from_reader(r);
        let header = reader
            .headers()
            .map_err(|e| FeatureError::Format(e.to_string()))?
            .clone();
        if header.get(0) != Some("doc_id") {
            return Err(FeatureError::Format("first column must be doc_id".into()));
        }
        let feature_names: Vec<String> = header.iter().skip(1).map(String::from).collect();
        let mut doc_ids = Vec::new();
        let mut values = Vec::new();
        for (line, record) in reader.records().enumerate() {
            let record = record.map_err(|e| FeatureError::Format(e.to_string()))?;
            doc_ids.push(record[0].to_string());
            for field in record.iter().skip(1) {
                let v = field
                    .parse::<f64>()
                    .map_err(|_| FeatureError::Format(format!("row {}: bad value {field:?}", line + 2)))?;
                values.push(v);
            }
        }
        Self::new(doc_ids, feature_names, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn csv_roundtrip_is_bit_exact(vals in prop::collection::vec(-1e6f64..1e6, 6)) {
            let m = FeatureMatrix::new(
                vec!["d1".into(), "d,2".into()],
                vec!["risk".into(), "loss".into(), "gain".into()],
                vals,
            ).unwrap();
            let mut buf = Vec::new();
            m.write_csv(&mut buf).unwrap();
            let back = FeatureMatrix::read_csv(buf.as_slice()).unwrap();
            prop_assert_eq!(back, m);
        }
    }

    #[test]
    fn shape_checks() {
        assert!(FeatureMatrix::new(vec!["a".into()], vec!["x".into()], vec![]).is_err());
        assert!(FeatureMatrix::new(vec!["a".into()], vec!["x".into()], vec![f64::NAN]).is_err());
        let m = FeatureMatrix::from_rows(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            vec![vec![1.0], vec![2.0]],
        )
        .unwrap();
        assert_eq!(m.select_rows(&[1, 0]).values(), &[2.0, 1.0]);
    }
}
