use std::io::{Read, Write};

use super::{GraphError, WeightedArc};
use crate::tensor::DenseMatrix;

fn csv_err(e: csv::Error) -> GraphError {
    let line = e.position().map_or(0, |p| p.line());
    GraphError::Csv {
        line,
        message: e.to_string(),
    }
}

fn parse<T: std::str::FromStr>(field: &str, line: u64, what: &str) -> Result<T, GraphError> {
    field.trim().parse().map_err(|_| GraphError::Csv {
        line,
        message: format!("cannot parse {what} from {field:?}"),
    })
}

fn expect_header(
    record: &csv::StringRecord,
    expected: &[&str],
    line: u64,
) -> Result<(), GraphError> {
    let got: Vec<&str> = record.iter().map(str::trim).collect();
    if got != expected {
        return Err(GraphError::Csv {
            line,
            message: format!("expected header {expected:?}, found {got:?}"),
        });
    }
    Ok(())
}

/// Reads `src,dst,weight` rows.
pub fn read_arcs_csv<R: Read>(reader: R) -> Result<Vec<WeightedArc>, GraphError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    expect_header(&header, &["src", "dst", "weight"], 1)?;
    let mut arcs = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 3 {
            return Err(GraphError::Csv {
                line,
                message: format!("expected 3 fields, found {}", rec.len()),
            });
        }
        arcs.push(WeightedArc::new(
            parse(&rec[0], line, "src")?,
            parse(&rec[1], line, "dst")?,
            parse(&rec[2], line, "weight")?,
        ));
    }
    Ok(arcs)
}

pub fn write_arcs_csv<W: Write>(writer: W, arcs: &[WeightedArc]) -> Result<(), GraphError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["src", "dst", "weight"]).map_err(csv_err)?;
    for a in arcs {
        w.write_record([a.src.to_string(), a.dst.to_string(), a.weight.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `node,f0,...,f{d-1}` rows. Node ids must be `0..N` in order.
pub fn read_features_csv<R: Read>(reader: R) -> Result<DenseMatrix, GraphError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let d = header.len().saturating_sub(1);
    let expected: Vec<String> = std::iter::once("node".to_string())
        .chain((0..d).map(|i| format!("f{i}")))
        .collect();
    let expected: Vec<&str> = expected.iter().map(String::as_str).collect();
    expect_header(&header, &expected, 1)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let node: usize = parse(&rec[0], line, "node")?;
        if node != rows.len() {
            return Err(GraphError::Csv {
                line,
                message: format!("expected node {}, found {node}", rows.len()),
            });
        }
        let row = (1..rec.len())
            .map(|i| parse(&rec[i], line, "feature"))
            .collect::<Result<Vec<f64>, _>>()?;
        rows.push(row);
    }
    DenseMatrix::from_rows(&rows)
        .map_err(|e| GraphError::DimensionMismatch(e.to_string()))
        .map(|m| {
            if rows.is_empty() {
                DenseMatrix::zeros(0, d)
            } else {
                m
            }
        })
}

pub fn write_features_csv<W: Write>(writer: W, features: &DenseMatrix) -> Result<(), GraphError> {
    let mut w = csv::Writer::from_writer(writer);
    let header: Vec<String> = std::iter::once("node".to_string())
        .chain((0..features.cols()).map(|i| format!("f{i}")))
        .collect();
    w.write_record(&header).map_err(csv_err)?;
    for r in 0..features.rows() {
        let rec: Vec<String> = std::iter::once(r.to_string())
            .chain(features.row(r).iter().map(|v| v.to_string()))
            .collect();
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads `node,label` rows. Node ids must be `0..N` in order.
pub fn read_labels_csv<R: Read>(reader: R) -> Result<Vec<usize>, GraphError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    expect_header(&header, &["node", "label"], 1)?;
    let mut labels = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        let node: usize = parse(&rec[0], line, "node")?;
        if node != labels.len() {
            return Err(GraphError::Csv {
                line,
                message: format!("expected node {}, found {node}", labels.len()),
            });
        }
        labels.push(parse(&rec[1], line, "label")?);
    }
    Ok(labels)
}

pub fn write_labels_csv<W: Write>(writer: W, labels: &[usize]) -> Result<(), GraphError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["node", "label"]).map_err(csv_err)?;
    for (n, l) in labels.iter().enumerate() {
        w.write_record([n.to_string(), l.to_string()])
            .map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}
