use std::collections::HashMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use super::{Edge, FilteredGraph, GraphKind};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// JSON sidecar for an edge-list file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub kind: GraphKind,
    pub n: usize,
    pub n_edges: usize,
    pub window_id: Option<usize>,
    pub tickers: Vec<String>,
}

/// Edge list as `src,dst,rho,dist` (ticker names) plus the JSON sidecar.
pub fn write_graph<W: Write, M: Write, T: Scalar>(
    edges_out: W,
    meta_out: M,
    g: &FilteredGraph<T>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(edges_out);
    w.write_record(["src", "dst", "rho", "dist"])?;
    for e in g.edges() {
        w.write_record([
            g.tickers()[e.i].as_str(),
            g.tickers()[e.j].as_str(),
            &e.rho.to_string(),
            &e.dist.to_string(),
        ])?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    let meta = GraphMeta {
        kind: g.kind(),
        n: g.n_vertices(),
        n_edges: g.edges().len(),
        window_id: g.window_id(),
        tickers: g.tickers().to_vec(),
    };
    serde_json::to_writer_pretty(meta_out, &meta)?;
    Ok(())
}

/// Reads an edge list back against its sidecar. The embedding is not stored.
pub fn read_graph_csv<R: Read, T: Scalar>(
    edges_in: R,
    meta: &GraphMeta,
) -> Result<FilteredGraph<T>> {
    let index: HashMap<&str, usize> = meta
        .tickers
        .iter()
        .enumerate()
        .map(|(i, t)| (t.as_str(), i))
        .collect();
    let lookup = |t: &str| {
        index
            .get(t)
            .copied()
            .ok_or_else(|| Error::UnknownTicker(t.to_string()))
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(edges_in);
    let mut edges = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let num = |k: usize| -> Result<T> {
            let raw = rec.get(k).unwrap_or("");
            raw.parse::<f64>().map(T::lit).map_err(|_| Error::Parse {
                location: format!("edge line {}", line + 2),
                message: format!("not a number: {raw:?}"),
            })
        };
        let (a, b) = (lookup(&rec[0])?, lookup(&rec[1])?);
        edges.push(Edge {
            i: a.min(b),
            j: a.max(b),
            rho: num(2)?,
            dist: num(3)?,
        });
    }
    if edges.len() != meta.n_edges {
        return Err(Error::DimensionMismatch {
            expected: meta.n_edges,
            actual: edges.len(),
        });
    }
    Ok(FilteredGraph::from_parts(
        meta.tickers.clone(),
        edges,
        meta.kind,
        None,
        meta.window_id,
    ))
}
