use std::collections::HashSet;
use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Symmetric, non-negative, zero-diagonal distances between labelled items.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    data: Vec<f64>,
}

impl DistanceMatrix {
    /// `data` is row-major `n x n`.
    pub fn new(labels: Vec<String>, data: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if data.len() != n * n {
            return Err(Error::contract(format!(
                "{} labels need {} entries, got {}",
                n,
                n * n,
                data.len()
            )));
        }
        let mut seen = HashSet::new();
        if let Some(dup) = labels.iter().find(|l| !seen.insert(l.as_str())) {
            return Err(Error::contract(format!("duplicate label {dup}")));
        }
        for i in 0..n {
            if data[i * n + i] != 0.0 {
                return Err(Error::contract(format!("non-zero diagonal at {}", labels[i])));
            }
            for j in 0..n {
                let d = data[i * n + j];
                if !(d.is_finite() && d >= 0.0) {
                    return Err(Error::contract(format!(
                        "distance {}-{} = {d} is not finite and non-negative",
                        labels[i], labels[j]
                    )));
                }
                if d != data[j * n + i] {
                    return Err(Error::contract(format!(
                        "asymmetric distances between {} and {}",
                        labels[i], labels[j]
                    )));
                }
            }
        }
        Ok(DistanceMatrix { labels, data })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.len() + j]
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Square CSV with a header row and first column of labels.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        write_square(writer, &self.labels, &self.data)
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let (labels, data) = read_square(reader)?;
        DistanceMatrix::new(labels, data)
    }
}

pub(crate) fn write_square<W: Write>(writer: W, labels: &[String], data: &[f64]) -> Result<()> {
    let n = labels.len();
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(std::iter::once("station_id").chain(labels.iter().map(String::as_str)))?;
    for (i, label) in labels.iter().enumerate() {
        let row = data[i * n..(i + 1) * n].iter().map(|v| v.to_string());
        wtr.write_record(std::iter::once(label.clone()).chain(row))?;
    }
    wtr.flush().map_err(|e| Error::io("<matrix>", e))?;
    Ok(())
}

pub(crate) fn read_square<R: Read>(reader: R) -> Result<(Vec<String>, Vec<f64>)> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let labels: Vec<String> = rdr.headers()?.iter().skip(1).map(str::to_string).collect();
    let mut data = Vec::with_capacity(labels.len() * labels.len());
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        if labels.get(i).map(String::as_str) != record.get(0) {
            return Err(Error::Parse {
                line,
                message: "row label does not match header order".into(),
            });
        }
        for field in record.iter().skip(1) {
            data.push(field.parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("bad matrix entry {field:?}"),
            })?);
        }
    }
    Ok((labels, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_shapes() {
        let l = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        assert!(DistanceMatrix::new(l(&["a", "b"]), vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(DistanceMatrix::new(l(&["a", "b"]), vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(DistanceMatrix::new(l(&["a", "a"]), vec![0.0, 1.0, 1.0, 0.0]).is_err());
        assert!(DistanceMatrix::new(l(&["a", "b"]), vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(DistanceMatrix::new(l(&["a", "b"]), vec![0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let m = DistanceMatrix::new(
            vec!["AY".into(), "TH".into(), "WR".into()],
            vec![0.0, 0.1, 2.5, 0.1, 0.0, 1.0 / 3.0, 2.5, 1.0 / 3.0, 0.0],
        )
        .unwrap();
        let mut buf = Vec::new();
        m.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("station_id,AY,TH,WR\nAY,0,0.1,2.5\n"));
        assert_eq!(DistanceMatrix::read_csv(buf.as_slice()).unwrap(), m);
    }
}
