//! Correlation-filtered networks: minimum spanning tree and planar maximally
//! filtered graph.

mod embedding;
mod io;
mod planarity;

pub use embedding::{faces, is_planar_embedding};
pub use io::{read_graph_csv, write_graph, GraphMeta};
pub use planarity::{is_planar, planar_embedding, Rotation};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimator::DistanceMatrix;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum GraphKind {
    Mst,
    Pmfg,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge<T: Scalar = f64> {
    pub i: usize,
    pub j: usize,
    pub rho: T,
    pub dist: T,
}

/// A filtered graph over the tickers of a distance matrix. Edges satisfy
/// `i < j` and are listed in the order the greedy construction accepted them.
#[derive(Debug, Clone, PartialEq)]
pub struct FilteredGraph<T: Scalar = f64> {
    tickers: Vec<String>,
    edges: Vec<Edge<T>>,
    kind: GraphKind,
    embedding: Option<Rotation>,
    window_id: Option<usize>,
}

impl<T: Scalar> FilteredGraph<T> {
    pub fn tickers(&self) -> &[String] {
        &self.tickers
    }

    pub fn edges(&self) -> &[Edge<T>] {
        &self.edges
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    /// Cyclic neighbour order per vertex (PMFG only).
    pub fn embedding(&self) -> Option<&Rotation> {
        self.embedding.as_ref()
    }

    pub fn window_id(&self) -> Option<usize> {
        self.window_id
    }

    pub fn n_vertices(&self) -> usize {
        self.tickers.len()
    }

    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|e| (e.i, e.j)).collect()
    }

    /// Sorted neighbour lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for e in &self.edges {
            adj[e.i].push(e.j);
            adj[e.j].push(e.i);
        }
        for a in adj.iter_mut() {
            a.sort_unstable();
        }
        adj
    }

    pub(crate) fn from_parts(
        tickers: Vec<String>,
        edges: Vec<Edge<T>>,
        kind: GraphKind,
        embedding: Option<Rotation>,
        window_id: Option<usize>,
    ) -> Self {
        FilteredGraph {
            tickers,
            edges,
            kind,
            embedding,
            window_id,
        }
    }
}

pub(crate) struct Dsu {
    parent: Vec<usize>,
    size: Vec<usize>,
    edges: Vec<usize>,
}

impl Dsu {
    pub(crate) fn new(n: usize) -> Self {
        Dsu {
            parent: (0..n).collect(),
            size: vec![1; n],
            edges: vec![0; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merges the components of `a` and `b` and counts the edge between them.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            self.edges[ra] += 1;
            return false;
        }
        let (big, small) = if self.size[ra] >= self.size[rb] {
            (ra, rb)
        } else {
            (rb, ra)
        };
        self.parent[small] = big;
        self.size[big] += self.size[small];
        self.edges[big] += self.edges[small] + 1;
        true
    }
}

/// All pairs `i < j` ordered by `(distance, i, j)`.
fn sorted_pairs<T: Scalar>(d: &DistanceMatrix<T>) -> Vec<(usize, usize)> {
    let n = d.len();
    let dv = d.d();
    let mut pairs = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            pairs.push((i, j));
        }
    }
    pairs.sort_by(|&(a, b), &(c, e)| {
        dv[[a, b]]
            .partial_cmp(&dv[[c, e]])
            .expect("distances are finite")
            .then((a, b).cmp(&(c, e)))
    });
    pairs
}

fn edge_of<T: Scalar>(d: &DistanceMatrix<T>, i: usize, j: usize) -> Edge<T> {
    Edge {
        i,
        j,
        rho: d.rho()[[i, j]],
        dist: d.d()[[i, j]],
    }
}

/// Kruskal's minimum spanning tree under the distance weights.
pub fn build_mst<T: Scalar>(d: &DistanceMatrix<T>) -> Result<FilteredGraph<T>> {
    let n = d.len();
    if n < 2 {
        return Err(Error::TooFewAssets {
            required: 2,
            actual: n,
        });
    }
    let mut dsu = Dsu::new(n);
    let mut edges = Vec::with_capacity(n - 1);
    for (i, j) in sorted_pairs(d) {
        if dsu.find(i) != dsu.find(j) {
            dsu.union(i, j);
            edges.push(edge_of(d, i, j));
            if edges.len() == n - 1 {
                break;
            }
        }
    }
    Ok(FilteredGraph::from_parts(
        d.tickers().to_vec(),
        edges,
        GraphKind::Mst,
        None,
        d.window_id(),
    ))
}

/// Greedy planar maximally filtered graph: pairs are taken by increasing
/// distance and kept whenever the graph stays planar, until `3(N − 2)` edges.
///
/// Planarity is decided incrementally: bridges and chords inside a face of the
/// current embedding are accepted directly, triangulated components reject
/// directly, and only the remaining candidates run a full left-right test on
/// the affected component.
pub fn build_pmfg<T: Scalar>(d: &DistanceMatrix<T>) -> Result<FilteredGraph<T>> {
    let n = d.len();
    if n < 3 {
        return Err(Error::TooFewAssets {
            required: 3,
            actual: n,
        });
    }
    let target = 3 * (n - 2);
    let mut rotation: Rotation = vec![Vec::new(); n];
    let mut dsu = Dsu::new(n);
    let mut accepted: Vec<(usize, usize)> = Vec::with_capacity(target);
    let mut edges = Vec::with_capacity(target);

    for (u, v) in sorted_pairs(d) {
        let (ru, rv) = (dsu.find(u), dsu.find(v));
        let accept = if ru != rv {
            rotation[u].push(v);
            rotation[v].push(u);
            true
        } else if dsu.size[ru] >= 3 && dsu.edges[ru] == 3 * dsu.size[ru] - 6 {
            false
        } else if insert_in_shared_face(&mut rotation, u, v) {
            true
        } else {
            retest_component(&mut rotation, &mut dsu, &accepted, u, v)
        };
        if accept {
            dsu.union(u, v);
            accepted.push((u, v));
            edges.push(edge_of(d, u, v));
            if edges.len() == target {
                break;
            }
        }
    }
    debug_assert_eq!(edges.len(), target);
    Ok(FilteredGraph::from_parts(
        d.tickers().to_vec(),
        edges,
        GraphKind::Pmfg,
        Some(rotation),
        d.window_id(),
    ))
}

/// If `u` and `v` lie on a common face, adds the chord through it and returns true.
fn insert_in_shared_face(rotation: &mut Rotation, u: usize, v: usize) -> bool {
    let deg = rotation[u].len();
    for k in 0..deg {
        // Face entered at the corner between rotation[u][k-1] and rotation[u][k].
        let start = (u, rotation[u][k]);
        let (mut a, mut b) = start;
        loop {
            if b == v {
                let c = embedding::successor(rotation, a, b);
                let pos_v = rotation[v].iter().position(|&x| x == c).expect("present");
                rotation[v].insert(pos_v, u);
                rotation[u].insert(k, v);
                return true;
            }
            let c = embedding::successor(rotation, a, b);
            a = b;
            b = c;
            if (a, b) == start {
                break;
            }
        }
    }
    false
}

/// Full planarity test of `u`'s component plus the edge `(u, v)`; on success
/// the component's rotation is replaced by the fresh embedding.
fn retest_component(
    rotation: &mut Rotation,
    dsu: &mut Dsu,
    accepted: &[(usize, usize)],
    u: usize,
    v: usize,
) -> bool {
    let n = rotation.len();
    let root = dsu.find(u);
    let mut local = vec![usize::MAX; n];
    let mut members = Vec::new();
    for x in 0..n {
        if dsu.find(x) == root {
            local[x] = members.len();
            members.push(x);
        }
    }
    let mut sub: Vec<(usize, usize)> = accepted
        .iter()
        .filter(|&&(a, _)| local[a] != usize::MAX)
        .map(|&(a, b)| (local[a], local[b]))
        .collect();
    sub.push((local[u], local[v]));
    match planar_embedding(members.len(), &sub) {
        Some(rot) => {
            for (li, r) in rot.into_iter().enumerate() {
                rotation[members[li]] = r.into_iter().map(|x| members[x]).collect();
            }
            true
        }
        None => false,
    }
}

/// Reference PMFG that re-runs a full planarity test on the whole graph for
/// every candidate edge.
pub fn build_pmfg_scratch<T: Scalar>(d: &DistanceMatrix<T>) -> Result<FilteredGraph<T>> {
    let n = d.len();
    if n < 3 {
        return Err(Error::TooFewAssets {
            required: 3,
            actual: n,
        });
    }
    let target = 3 * (n - 2);
    let mut accepted: Vec<(usize, usize)> = Vec::with_capacity(target);
    let mut edges = Vec::with_capacity(target);
    let mut last = None;
    for (u, v) in sorted_pairs(d) {
        accepted.push((u, v));
        match planar_embedding(n, &accepted) {
            Some(rot) => {
                edges.push(edge_of(d, u, v));
                last = Some(rot);
                if edges.len() == target {
                    break;
                }
            }
            None => {
                accepted.pop();
            }
        }
    }
    Ok(FilteredGraph::from_parts(
        d.tickers().to_vec(),
        edges,
        GraphKind::Pmfg,
        last,
        d.window_id(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ObstructionKind {
    K5,
    K33,
}

/// A subdivision of K5 or K3,3 contained in a non-planar graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Obstruction {
    pub kind: ObstructionKind,
    /// Branch vertices (degree ≥ 3 in the subdivision), sorted.
    pub vertices: Vec<usize>,
    /// Edges of the minimal non-planar subgraph.
    pub edges: Vec<(usize, usize)>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Planarity {
    Planar(Rotation),
    NonPlanar(Obstruction),
}

impl Planarity {
    pub fn is_planar(&self) -> bool {
        matches!(self, Planarity::Planar(_))
    }
}

/// Planarity with a certificate either way. Self-loops and repeated edges are
/// ignored.
pub fn check_planarity(n: usize, edges: &[(usize, usize)]) -> Result<Planarity> {
    let mut simple: Vec<(usize, usize)> = Vec::with_capacity(edges.len());
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::invalid(format!(
                "edge ({a}, {b}) outside {n} vertices"
            )));
        }
        if a != b {
            simple.push((a.min(b), a.max(b)));
        }
    }
    simple.sort_unstable();
    simple.dedup();
    if let Some(rot) = planar_embedding(n, &simple) {
        return Ok(Planarity::Planar(rot));
    }
    // Delete every edge whose removal keeps the graph non-planar; what remains
    // is an edge-minimal non-planar subgraph, i.e. a Kuratowski subdivision.
    let mut keep = simple;
    let mut k = 0;
    while k < keep.len() {
        let e = keep.remove(k);
        if is_planar(n, &keep) {
            keep.insert(k, e);
            k += 1;
        }
    }
    let mut deg = vec![0usize; n];
    for &(a, b) in &keep {
        deg[a] += 1;
        deg[b] += 1;
    }
    let vertices: Vec<usize> = (0..n).filter(|&v| deg[v] >= 3).collect();
    let kind = if vertices.len() == 5 && vertices.iter().all(|&v| deg[v] == 4) {
        ObstructionKind::K5
    } else {
        ObstructionKind::K33
    };
    Ok(Planarity::NonPlanar(Obstruction {
        kind,
        vertices,
        edges: keep,
    }))
}
