//! CSV formats for adjacency matrices, signal sets and community labels.
//!
//! * adjacency: `N` rows of `N` comma-separated decimals, no header;
//! * signals: header `node_0,...,node_{N-1}`, then one signal per row,
//!   written with 17 significant digits so a save/load round trip is exact;
//! * communities: one integer per line, no header.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};

use crate::data::{SignalDataset, Split};
use crate::error::{GadError, Result};
use crate::graph::Graph;

fn csv_err(path: &Path, line: u64, message: impl Into<String>) -> GadError {
    GadError::Csv { path: path.to_path_buf(), line, message: message.into() }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| GadError::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|e| GadError::io(parent, e))?;
        }
    }
    fs::write(path, text).map_err(|e| GadError::io(path, e))
}

/// Parses headerless numeric rows, returning each row with its 1-based line.
fn parse_rows(path: &Path, text: &str, skip_header: bool) -> Result<Vec<(u64, Vec<f64>)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(skip_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            csv_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        let values = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| csv_err(path, line, format!("column {}: non-numeric cell {cell:?}", col + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push((line, values));
    }
    Ok(rows)
}

pub fn adjacency_to_csv(graph: &Graph) -> String {
    let a = graph.adjacency();
    let mut out = String::new();
    for row in a.row_iter() {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn save_adjacency_csv(graph: &Graph, path: &Path) -> Result<()> {
    write_text(path, &adjacency_to_csv(graph))
}

pub fn parse_adjacency_csv(path: &Path, text: &str) -> Result<Graph> {
    let rows = parse_rows(path, text, false)?;
    let n = rows.len();
    if n == 0 {
        return Err(csv_err(path, 1, "empty adjacency file"));
    }
    let mut a = DMatrix::zeros(n, n);
    for (i, (line, values)) in rows.iter().enumerate() {
        if values.len() != n {
            return Err(csv_err(path, *line, format!("row has {} entries, expected {n}", values.len())));
        }
        for (j, v) in values.iter().enumerate() {
            a[(i, j)] = *v;
        }
    }
    Graph::new(a).map_err(|e| match e {
        GadError::Asymmetric { row, col, a, b } => csv_err(
            path,
            rows[row].0,
            format!("asymmetric adjacency: A[{row}][{col}] = {a} but A[{col}][{row}] = {b}"),
        ),
        GadError::IsolatedNode(i) => csv_err(path, rows[i].0, format!("node {i} has zero degree")),
        other => other,
    })
}

pub fn load_adjacency_csv(path: &Path) -> Result<Graph> {
    parse_adjacency_csv(path, &read_text(path)?)
}

pub fn signals_header(n: usize) -> String {
    (0..n).map(|i| format!("node_{i}")).collect::<Vec<_>>().join(",")
}

pub fn signals_to_csv(dataset: &SignalDataset) -> String {
    let mut out = signals_header(dataset.num_nodes());
    out.push('\n');
    for row in dataset.signals().row_iter() {
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                out.push(',');
            }
            write!(out, "{v:.16e}").expect("writing to a String cannot fail");
        }
        out.push('\n');
    }
    out
}

pub fn save_signals_csv(dataset: &SignalDataset, path: &Path) -> Result<()> {
    write_text(path, &signals_to_csv(dataset))
}

pub fn parse_signals_csv(path: &Path, text: &str, split: Split) -> Result<SignalDataset> {
    let header = text.lines().next().unwrap_or("").trim();
    let n = header.split(',').filter(|s| !s.trim().is_empty()).count();
    if n == 0 || header.trim() != signals_header(n) {
        return Err(csv_err(path, 1, "expected header node_0,...,node_{N-1}"));
    }
    let rows = parse_rows(path, text, true)?;
    if rows.is_empty() {
        return Err(csv_err(path, 2, "no signal rows"));
    }
    let mut m = DMatrix::zeros(rows.len(), n);
    for (i, (line, values)) in rows.iter().enumerate() {
        if values.len() != n {
            return Err(csv_err(path, *line, format!("signal row {} has {} entries, expected {n}", i, values.len())));
        }
        for (j, v) in values.iter().enumerate() {
            m[(i, j)] = *v;
        }
    }
    SignalDataset::new(m, split)
}

pub fn load_signals_csv(path: &Path, split: Split) -> Result<SignalDataset> {
    parse_signals_csv(path, &read_text(path)?, split)
}

/// Loads a graph and a signal set defined on it.
pub fn load_dataset_csv(adjacency_path: &Path, signals_path: &Path, split: Split) -> Result<(Graph, SignalDataset)> {
    let graph = load_adjacency_csv(adjacency_path)?;
    let signals = load_signals_csv(signals_path, split)?;
    signals.check_graph(graph.num_nodes())?;
    Ok((graph, signals))
}

pub fn save_communities_csv(communities: &[usize], path: &Path) -> Result<()> {
    let text: String = communities.iter().map(|c| format!("{c}\n")).collect();
    write_text(path, &text)
}

pub fn load_communities_csv(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<usize>()
                .map_err(|_| csv_err(path, i as u64 + 1, format!("not a community index: {l:?}")))
        })
        .collect()
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the adjacency file as written by [`save_adjacency_csv`].
pub fn graph_hash(graph: &Graph) -> String {
    sha256_hex(adjacency_to_csv(graph).as_bytes())
}

pub fn file_hash(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| GadError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}
