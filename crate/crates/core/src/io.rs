//! Instance files and result writers used by the command line.
//!
//! JSON inputs are `{"d": [[..]], "k": 1}`, `{"d": .., "w": ..}` or
//! `{"A": [[..]], "p": 4}`; a header-free CSV file holds a bare matrix.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::instance::{Embedding, Provenance, RankOne};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w: Option<Vec<Vec<f64>>>,
    #[serde(default, rename = "A", skip_serializing_if = "Option::is_none")]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<u32>,
    /// Matrix read from a CSV file; serves as `d` or `A`.
    #[serde(skip)]
    pub bare: Option<Vec<Vec<f64>>>,
}

impl InputFile {
    pub fn distances(&self) -> Result<&[Vec<f64>]> {
        self.d
            .as_deref()
            .or(self.bare.as_deref())
            .ok_or_else(|| Error::Parse("input has no distance matrix \"d\"".into()))
    }

    pub fn weights(&self) -> Result<&[Vec<f64>]> {
        self.w
            .as_deref()
            .or(self.bare.as_deref())
            .ok_or_else(|| Error::Parse("input has no weight matrix \"w\"".into()))
    }

    pub fn lra_matrix(&self) -> Result<&[Vec<f64>]> {
        self.a
            .as_deref()
            .or(self.bare.as_deref())
            .ok_or_else(|| Error::Parse("input has no matrix \"A\"".into()))
    }
}

/// Parses a header-free CSV matrix. Rows must have equal length.
pub fn parse_csv_matrix(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Parse(e.to_string()))?;
        let row = record
            .iter()
            .enumerate()
            .map(|(c, field)| {
                field
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("row {r}, column {c}: {field:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::DimensionMismatch {
                    expected: first.len(),
                    got: row.len(),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse("empty matrix".into()));
    }
    Ok(rows)
}

/// Parses JSON when the text starts with `{`, a CSV matrix otherwise.
pub fn parse_input(text: &str) -> Result<InputFile> {
    if text.trim_start().starts_with('{') {
        Ok(serde_json::from_str(text)?)
    } else {
        Ok(InputFile {
            bare: Some(parse_csv_matrix(text)?),
            ..InputFile::default()
        })
    }
}

pub fn read_input(path: &Path) -> Result<InputFile> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_input(&text)
}

#[derive(Serialize)]
struct EmbeddingJson<'a> {
    schema: u32,
    points: &'a [Vec<f64>],
    objective: f64,
    provenance: &'a Provenance,
}

#[derive(Serialize)]
struct RankOneJson<'a> {
    schema: u32,
    u: &'a [f64],
    v: &'a [f64],
    objective: f64,
    provenance: &'a Provenance,
}

pub fn embedding_json(e: &Embedding) -> Result<String> {
    let out = EmbeddingJson {
        schema: SCHEMA_VERSION,
        points: &e.points,
        objective: e.objective,
        provenance: &e.provenance,
    };
    Ok(serde_json::to_string_pretty(&out)? + "\n")
}

pub fn rank_one_json(r: &RankOne) -> Result<String> {
    let out = RankOneJson {
        schema: SCHEMA_VERSION,
        u: &r.u,
        v: &r.v,
        objective: r.objective,
        provenance: &r.provenance,
    };
    Ok(serde_json::to_string_pretty(&out)? + "\n")
}

/// One row per point: `index,x0,..,x{k-1}`.
pub fn embedding_csv(e: &Embedding) -> Result<String> {
    let k = e.points.first().map_or(0, Vec::len);
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["index".to_string()];
    header.extend((0..k).map(|c| format!("x{c}")));
    w.write_record(&header).map_err(csv_err)?;
    for (i, p) in e.points.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(p.iter().map(f64::to_string));
        w.write_record(&rec).map_err(csv_err)?;
    }
    finish_csv(w)
}

/// Rows `factor,index,value` for `u` then `v`.
pub fn rank_one_csv(r: &RankOne) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["factor", "index", "value"]).map_err(csv_err)?;
    for (name, xs) in [("u", &r.u), ("v", &r.v)] {
        for (i, x) in xs.iter().enumerate() {
            w.write_record([name.to_string(), i.to_string(), x.to_string()]).map_err(csv_err)?;
        }
    }
    finish_csv(w)
}

pub(crate) fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}

pub(crate) fn finish_csv(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Io(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_matrix() {
        let m = parse_csv_matrix("0, 1\n1 ,0\n").unwrap();
        assert_eq!(m, vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
        assert!(parse_csv_matrix("0,1\n1\n").is_err());
        assert!(matches!(parse_csv_matrix("0,x\n"), Err(Error::Parse(_))));
    }

    #[test]
    fn json_kinds() {
        let f = parse_input(r#"{"A": [[1, 2]], "p": 4}"#).unwrap();
        assert_eq!(f.p, Some(4));
        assert_eq!(f.lra_matrix().unwrap(), &[vec![1.0, 2.0]]);
        assert!(f.distances().is_err());
        let g = parse_input("0,2\n2,0").unwrap();
        assert_eq!(g.distances().unwrap(), g.lra_matrix().unwrap());
    }
}
