use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A flat partition of tickers into disjoint, non-empty clusters.
///
/// Labels are always dense (`0..n_clusters`).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Clustering {
    tickers: Vec<String>,
    labels: Vec<usize>,
    n_clusters: usize,
}

impl Clustering {
    /// Builds a clustering from arbitrary integer ids. Ids are compacted to
    /// `0..k` preserving their numeric order, so dense ids pass through unchanged.
    pub fn from_labels(tickers: Vec<String>, raw: Vec<usize>) -> Result<Self> {
        if tickers.len() != raw.len() {
            return Err(Error::DimensionMismatch {
                expected: tickers.len(),
                actual: raw.len(),
            });
        }
        if tickers.is_empty() {
            return Err(Error::invalid("clustering needs at least one ticker"));
        }
        let mut remap = BTreeMap::new();
        for &l in &raw {
            remap.insert(l, 0usize);
        }
        for (dense, v) in remap.values_mut().enumerate() {
            *v = dense;
        }
        let labels = raw.iter().map(|l| remap[l]).collect();
        Ok(Clustering {
            tickers,
            labels,
            n_clusters: remap.len(),
        })
    }

    /// Every ticker in one cluster.
    pub fn single(tickers: Vec<String>) -> Result<Self> {
        let n = tickers.len();
        Self::from_labels(tickers, vec![0; n])
    }

    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_clusters(&self) -> usize {
        self.n_clusters
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Member indices per cluster, each sorted ascending.
    pub fn clusters(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.n_clusters];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut out = vec![0; self.n_clusters];
        for &l in &self.labels {
            out[l] += 1;
        }
        out
    }

    /// Errors unless `other` covers the same tickers in the same order.
    pub fn check_same_tickers(&self, other: &[String]) -> Result<()> {
        if self.tickers.as_slice() == other {
            return Ok(());
        }
        if self.tickers.len() != other.len() {
            return Err(Error::TickerMismatch(format!(
                "{} vs {} tickers",
                self.tickers.len(),
                other.len()
            )));
        }
        let (a, b) = self
            .tickers
            .iter()
            .zip(other)
            .find(|(a, b)| a != b)
            .expect("differing slices of equal length");
        Err(Error::TickerMismatch(format!("{a} vs {b}")))
    }

    /// Reorders this clustering onto `order`, which must be a permutation of its tickers.
    pub fn reindexed(&self, order: &[String]) -> Result<Self> {
        let pos: BTreeMap<&str, usize> = self
            .tickers
            .iter()
            .enumerate()
            .map(|(i, t)| (t.as_str(), i))
            .collect();
        if order.len() != self.tickers.len() {
            return Err(Error::TickerMismatch(format!(
                "{} vs {} tickers",
                self.tickers.len(),
                order.len()
            )));
        }
        let mut labels = Vec::with_capacity(order.len());
        for t in order {
            let &i = pos
                .get(t.as_str())
                .ok_or_else(|| Error::UnknownTicker(t.clone()))?;
            labels.push(self.labels[i]);
        }
        Self::from_labels(order.to_vec(), labels)
    }
}

#[derive(Serialize, Deserialize)]
struct ClusterRow {
    ticker: String,
    cluster_id: usize,
}

/// Writes `ticker,cluster_id` rows in ticker order of the clustering.
pub fn write_clustering_csv<W: Write>(writer: W, c: &Clustering) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for (ticker, &cluster_id) in c.tickers.iter().zip(&c.labels) {
        w.serialize(ClusterRow {
            ticker: ticker.clone(),
            cluster_id,
        })?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn read_clustering_csv<R: Read>(reader: R) -> Result<Clustering> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut tickers = Vec::new();
    let mut labels = Vec::new();
    for row in rdr.deserialize() {
        let row: ClusterRow = row?;
        tickers.push(row.ticker);
        labels.push(row.cluster_id);
    }
    let mut seen = tickers.clone();
    seen.sort();
    if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::DuplicateTicker(w[0].clone()));
    }
    Clustering::from_labels(tickers, labels)
}

pub fn load_clustering(path: impl AsRef<Path>) -> Result<Clustering> {
    let path = path.as_ref();
    read_clustering_csv(File::open(path).map_err(|e| Error::io(path, e))?)
}
