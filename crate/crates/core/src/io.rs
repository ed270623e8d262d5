//! CSV formats for every stage artifact.
//!
//! Floats are written with 17 significant digits so that a write/read cycle
//! reproduces each value bit for bit.

use std::path::Path;

use csv::{ReaderBuilder, StringRecord, Writer};
use ndarray::Array2;

use crate::embedding::DrugVectors;
use crate::graph::{EdgeRow, HeteroGraph, TargetRow};
use crate::pairs::PairFeatureTable;
use crate::ppr::PrunedPprMatrix;
use crate::{Error, Result};

pub const EDGE_HEADER: [&str; 4] = ["node_1", "type_1", "node_2", "type_2"];
pub const TARGET_HEADER: [&str; 3] = ["drug_1", "drug_2", "label"];
pub const PPR_HEADER: [&str; 3] = ["node_1", "node_2", "score"];

/// Formats `x` with 17 significant digits.
pub fn format_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn malformed(path: &Path, message: impl Into<String>) -> Error {
    Error::Malformed {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

fn open(path: &Path) -> Result<(csv::Reader<std::fs::File>, StringRecord)> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header = reader.headers()?.clone();
    Ok((reader, header))
}

/// Column positions of `names` in `header`.
fn locate<const N: usize>(path: &Path, header: &StringRecord, names: [&str; N]) -> Result<[usize; N]> {
    let mut out = [0; N];
    for (slot, name) in out.iter_mut().zip(names) {
        *slot = header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| malformed(path, format!("missing column {name:?}")))?;
    }
    Ok(out)
}

fn parse_f64(path: &Path, line: u64, s: &str) -> Result<f64> {
    s.parse::<f64>()
        .map_err(|_| malformed(path, format!("line {line}: invalid number {s:?}")))
}

fn parse_label(path: &Path, line: u64, s: &str) -> Result<u8> {
    match s {
        "0" => Ok(0),
        "1" => Ok(1),
        other => Err(malformed(path, format!("line {line}: label must be 0 or 1, got {other:?}"))),
    }
}

fn line_of(record: &StringRecord) -> u64 {
    record.position().map_or(0, |p| p.line())
}

pub fn read_edges(path: &Path) -> Result<Vec<EdgeRow>> {
    let (mut reader, header) = open(path)?;
    let [a, ta, b, tb] = locate(path, &header, EDGE_HEADER)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        rows.push(EdgeRow::new(&r[a], &r[ta], &r[b], &r[tb]));
    }
    Ok(rows)
}

pub fn write_edges(path: &Path, rows: &[EdgeRow]) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(EDGE_HEADER)?;
    for r in rows {
        w.write_record([&r.node_1, &r.type_1, &r.node_2, &r.type_2])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_targets(path: &Path) -> Result<Vec<TargetRow>> {
    let (mut reader, header) = open(path)?;
    let [a, b, l] = locate(path, &header, TARGET_HEADER)?;
    let mut rows = Vec::new();
    for record in reader.records() {
        let r = record?;
        let label = parse_label(path, line_of(&r), &r[l])?;
        rows.push(TargetRow::new(&r[a], &r[b], label));
    }
    Ok(rows)
}

pub fn write_targets(path: &Path, rows: &[TargetRow]) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(TARGET_HEADER)?;
    for r in rows {
        w.write_record([r.drug_1.as_str(), r.drug_2.as_str(), &r.label.to_string()])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One line per kept entry: drug id, entity id, score.
pub fn write_pruned(path: &Path, graph: &HeteroGraph, x: &PrunedPprMatrix) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    w.write_record(PPR_HEADER)?;
    for (d, row) in x.rows().iter().enumerate() {
        let drug = &graph.node(d).id;
        for &(j, s) in row {
            w.write_record([drug.as_str(), graph.node(j).id.as_str(), &format_f64(s)])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a pruned PPR export back into matrix form, using `graph` for the
/// index layout. Drugs without lines get empty rows.
pub fn read_pruned(path: &Path, graph: &HeteroGraph) -> Result<PrunedPprMatrix> {
    let (mut reader, header) = open(path)?;
    let [a, b, s] = locate(path, &header, PPR_HEADER)?;
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); graph.drug_count()];
    for record in reader.records() {
        let r = record?;
        let line = line_of(&r);
        let drug = graph.drug_index(&r[a])?;
        let entity = graph
            .index_of(&r[b])
            .ok_or_else(|| malformed(path, format!("line {line}: unknown node {:?}", &r[b])))?;
        let score = parse_f64(path, line, &r[s])?;
        rows[drug].push((entity, score));
    }
    for row in &mut rows {
        row.sort_by_key(|&(j, _)| j);
        if row.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(malformed(path, "duplicate (drug, entity) entry"));
        }
    }
    PrunedPprMatrix::from_rows(graph.node_count(), rows)
}

pub fn write_embedding(path: &Path, vectors: &DrugVectors) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    let mut header = vec!["node_id".to_string()];
    header.extend((0..vectors.dimensions()).map(|i| format!("x_{i}")));
    w.write_record(&header)?;
    for (id, row) in vectors.ids().iter().zip(vectors.vectors().rows()) {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|&v| format_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_embedding(path: &Path) -> Result<DrugVectors> {
    let (mut reader, header) = open(path)?;
    if header.get(0) != Some("node_id") {
        return Err(malformed(path, "first column must be node_id"));
    }
    let dims = header.len() - 1;
    for (i, h) in header.iter().skip(1).enumerate() {
        if h != format!("x_{i}") {
            return Err(malformed(path, format!("expected column x_{i}, found {h:?}")));
        }
    }
    let mut ids = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let r = record?;
        let line = line_of(&r);
        ids.push(r[0].to_string());
        for v in r.iter().skip(1) {
            values.push(parse_f64(path, line, v)?);
        }
    }
    let h = Array2::from_shape_vec((ids.len(), dims), values)
        .map_err(|e| malformed(path, e.to_string()))?;
    DrugVectors::new(ids, h)
}

pub fn write_features(path: &Path, table: &PairFeatureTable) -> Result<()> {
    let mut w = Writer::from_path(path)?;
    let mut header: Vec<String> = TARGET_HEADER.iter().map(|s| s.to_string()).collect();
    header.extend((0..table.width()).map(|i| format!("f_{i}")));
    w.write_record(&header)?;
    for (pair, row) in table.pairs.iter().zip(table.features.rows()) {
        let mut rec = vec![pair.drug_1.clone(), pair.drug_2.clone(), pair.label.to_string()];
        rec.extend(row.iter().map(|&v| format_f64(v)));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_features(path: &Path) -> Result<PairFeatureTable> {
    let (mut reader, header) = open(path)?;
    if header.iter().take(3).ne(TARGET_HEADER) {
        return Err(malformed(path, "expected columns drug_1,drug_2,label first"));
    }
    let width = header.len() - 3;
    for (i, h) in header.iter().skip(3).enumerate() {
        if h != format!("f_{i}") {
            return Err(malformed(path, format!("expected column f_{i}, found {h:?}")));
        }
    }
    let mut pairs = Vec::new();
    let mut values = Vec::new();
    for record in reader.records() {
        let r = record?;
        let line = line_of(&r);
        pairs.push(TargetRow::new(&r[0], &r[1], parse_label(path, line, &r[2])?));
        for v in r.iter().skip(3) {
            values.push(parse_f64(path, line, v)?);
        }
    }
    let features = Array2::from_shape_vec((pairs.len(), width), values)
        .map_err(|e| malformed(path, e.to_string()))?;
    PairFeatureTable::new(pairs, features, None)
}
