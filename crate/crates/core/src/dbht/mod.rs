//! Directed Bubble Hierarchical Tree clustering of a PMFG.
//!
//! The PMFG is cut at every separating 3-clique into bubbles, the bubble tree
//! is oriented by clique attachment strength, and converging bubbles seed the
//! clusters.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::estimator::DistanceMatrix;
use crate::filtergraph::{build_pmfg, FilteredGraph, GraphKind};
use crate::partition::Clustering;
use crate::scalar::Scalar;

/// Link between two bubbles sharing a separating 3-clique.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct TreeEdge {
    pub a: usize,
    pub b: usize,
    pub clique: [usize; 3],
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BubbleTree {
    /// Sorted vertex sets.
    pub bubbles: Vec<Vec<usize>>,
    pub tree_edges: Vec<TreeEdge>,
    /// Bubbles containing each vertex, ascending.
    pub membership: Vec<Vec<usize>>,
    /// For each PMFG edge (in graph order), the lowest-index bubble holding
    /// both endpoints. Clique edges shared by several bubbles are thereby
    /// counted once.
    pub edge_owner: Vec<usize>,
}

impl BubbleTree {
    pub fn n_bubbles(&self) -> usize {
        self.bubbles.len()
    }

    pub fn contains(&self, bubble: usize, v: usize) -> bool {
        self.bubbles[bubble].binary_search(&v).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum BubbleKind {
    Converging,
    Diverging,
    Passage,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DirectedBubbleTree {
    pub tree: BubbleTree,
    /// `(from, to)` per tree edge, aligned with `tree.tree_edges`.
    pub directions: Vec<(usize, usize)>,
    pub kinds: Vec<BubbleKind>,
}

impl DirectedBubbleTree {
    pub fn converging(&self) -> Vec<usize> {
        (0..self.kinds.len())
            .filter(|&b| self.kinds[b] == BubbleKind::Converging)
            .collect()
    }
}

/// Dense adjacency with similarity weights.
struct WeightedAdjacency<T> {
    n: usize,
    present: Vec<bool>,
    rho: Vec<T>,
    lists: Vec<Vec<usize>>,
}

impl<T: Scalar> WeightedAdjacency<T> {
    fn new(g: &FilteredGraph<T>) -> Self {
        let n = g.n_vertices();
        let mut present = vec![false; n * n];
        let mut rho = vec![T::zero(); n * n];
        for e in g.edges() {
            for (a, b) in [(e.i, e.j), (e.j, e.i)] {
                present[a * n + b] = true;
                rho[a * n + b] = e.rho;
            }
        }
        WeightedAdjacency {
            n,
            present,
            rho,
            lists: g.adjacency(),
        }
    }

    fn has(&self, a: usize, b: usize) -> bool {
        self.present[a * self.n + b]
    }

    fn weight(&self, a: usize, b: usize) -> T {
        self.rho[a * self.n + b]
    }

    /// Similarity-weighted degree of `v` towards `set` members, skipping `skip`.
    fn strength(&self, v: usize, set: &[usize], skip: &[usize]) -> T {
        self.lists[v]
            .iter()
            .filter(|u| set.binary_search(u).is_ok() && !skip.contains(u))
            .map(|&u| self.weight(v, u))
            .sum()
    }
}

/// Components of `piece` (sorted) after deleting `cut`, each sorted.
fn components_without<T: Scalar>(
    adj: &WeightedAdjacency<T>,
    piece: &[usize],
    cut: &[usize; 3],
) -> Vec<Vec<usize>> {
    let mut inside = vec![false; adj.n];
    for &v in piece {
        inside[v] = true;
    }
    for &c in cut {
        inside[c] = false;
    }
    let mut seen = vec![false; adj.n];
    let mut out = Vec::new();
    for &start in piece {
        if !inside[start] || seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(x) = queue.pop_front() {
            for &y in &adj.lists[x] {
                if inside[y] && !seen[y] {
                    seen[y] = true;
                    comp.push(y);
                    queue.push_back(y);
                }
            }
        }
        comp.sort_unstable();
        out.push(comp);
    }
    out
}

fn check_maximal_planar<T: Scalar>(pmfg: &FilteredGraph<T>) -> Result<()> {
    let n = pmfg.n_vertices();
    if pmfg.kind() != GraphKind::Pmfg {
        return Err(Error::NotMaximalPlanar("graph is not a PMFG".into()));
    }
    if n < 3 {
        return Err(Error::NotMaximalPlanar(format!("{n} vertices")));
    }
    if pmfg.edges().len() != 3 * (n - 2) {
        return Err(Error::NotMaximalPlanar(format!(
            "{} edges on {n} vertices, expected {}",
            pmfg.edges().len(),
            3 * (n - 2)
        )));
    }
    Ok(())
}

/// All 3-cliques `a < b < c` whose removal disconnects the graph.
fn separating_triangles<T: Scalar>(adj: &WeightedAdjacency<T>) -> Vec<[usize; 3]> {
    let all: Vec<usize> = (0..adj.n).collect();
    let mut out = Vec::new();
    for a in 0..adj.n {
        for &b in adj.lists[a].iter().filter(|&&b| b > a) {
            for &c in adj.lists[b].iter().filter(|&&c| c > b) {
                if adj.has(a, c) && components_without(adj, &all, &[a, b, c]).len() > 1 {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Splits the PMFG at its separating 3-cliques, replicating clique vertices
/// into both sides.
pub fn decompose_bubbles<T: Scalar>(pmfg: &FilteredGraph<T>) -> Result<BubbleTree> {
    check_maximal_planar(pmfg)?;
    let n = pmfg.n_vertices();
    let adj = WeightedAdjacency::new(pmfg);
    let mut bubbles: Vec<Vec<usize>> = vec![(0..n).collect()];
    let mut links: Vec<TreeEdge> = Vec::new();

    for t in separating_triangles(&adj) {
        let holder = (0..bubbles.len())
            .filter(|&p| t.iter().all(|v| bubbles[p].binary_search(v).is_ok()))
            .map(|p| (p, components_without(&adj, &bubbles[p], &t)))
            .find(|(_, comps)| comps.len() > 1);
        let Some((p, comps)) = holder else {
            return Err(Error::BubbleTree(format!(
                "separating clique {t:?} not separating in any bubble"
            )));
        };
        if comps.len() != 2 {
            return Err(Error::BubbleTree(format!(
                "clique {t:?} splits a bubble into {} parts",
                comps.len()
            )));
        }
        let with_clique = |c: &Vec<usize>| {
            let mut v = c.clone();
            v.extend_from_slice(&t);
            v.sort_unstable();
            v
        };
        let keep = with_clique(&comps[0]);
        let new = with_clique(&comps[1]);
        let new_idx = bubbles.len();
        for link in links.iter_mut() {
            for end in [&mut link.a, &mut link.b] {
                if *end == p && !link.clique.iter().all(|v| keep.binary_search(v).is_ok()) {
                    *end = new_idx;
                }
            }
        }
        bubbles[p] = keep;
        bubbles.push(new);
        links.push(TreeEdge {
            a: p,
            b: new_idx,
            clique: t,
        });
    }

    let mut membership = vec![Vec::new(); n];
    for (b, verts) in bubbles.iter().enumerate() {
        for &v in verts {
            membership[v].push(b);
        }
    }
    let edge_owner = pmfg
        .edges()
        .iter()
        .map(|e| {
            membership[e.i]
                .iter()
                .copied()
                .find(|b| membership[e.j].contains(b))
                .ok_or_else(|| Error::BubbleTree(format!("edge ({}, {}) in no bubble", e.i, e.j)))
        })
        .collect::<Result<Vec<_>>>()?;
    let tree = BubbleTree {
        bubbles,
        tree_edges: links,
        membership,
        edge_owner,
    };
    check_tree(&tree)?;
    Ok(tree)
}

fn check_tree(tree: &BubbleTree) -> Result<()> {
    let k = tree.n_bubbles();
    if tree.tree_edges.len() + 1 != k {
        return Err(Error::BubbleTree(format!(
            "{} links for {k} bubbles",
            tree.tree_edges.len()
        )));
    }
    let mut dsu = crate::filtergraph::Dsu::new(k);
    for e in &tree.tree_edges {
        if !dsu.union(e.a, e.b) {
            return Err(Error::BubbleTree("bubble links contain a cycle".into()));
        }
        for x in [e.a, e.b] {
            if !e.clique.iter().all(|&v| tree.contains(x, v)) {
                return Err(Error::BubbleTree(format!(
                    "bubble {x} lacks its link clique {:?}",
                    e.clique
                )));
            }
        }
    }
    Ok(())
}

/// Total similarity from the clique of `link` into each side of the split it
/// induces, `(side of a, side of b)`.
fn side_attachments<T: Scalar>(
    adj: &WeightedAdjacency<T>,
    all: &[usize],
    bt: &BubbleTree,
    link: &TreeEdge,
) -> Result<(T, T)> {
    let t = &link.clique;
    let sides = components_without(adj, all, t);
    if sides.len() != 2 {
        return Err(Error::BubbleTree(format!(
            "clique {t:?} leaves {} components",
            sides.len()
        )));
    }
    let anchor = bt.bubbles[link.a]
        .iter()
        .find(|v| !t.contains(v))
        .ok_or_else(|| Error::BubbleTree(format!("bubble {} is only a clique", link.a)))?;
    let side_a = usize::from(sides[0].binary_search(anchor).is_err());
    let into = |k: usize| t.iter().map(|&v| adj.strength(v, &sides[k], t)).sum::<T>();
    Ok((into(side_a), into(1 - side_a)))
}

/// Orients each link towards the side of the split to which its clique is
/// more strongly tied, and classifies bubbles as converging (no outgoing
/// link), diverging (only outgoing) or passage.
pub fn direct_bubble_tree<T: Scalar>(
    bt: BubbleTree,
    pmfg: &FilteredGraph<T>,
) -> Result<DirectedBubbleTree> {
    check_maximal_planar(pmfg)?;
    check_tree(&bt)?;
    let adj = WeightedAdjacency::new(pmfg);
    let all: Vec<usize> = (0..adj.n).collect();
    let k = bt.n_bubbles();
    let mut indeg = vec![0usize; k];
    let mut outdeg = vec![0usize; k];
    let mut directions = Vec::with_capacity(bt.tree_edges.len());
    for link in &bt.tree_edges {
        let (a, b) = (link.a, link.b);
        let (sa, sb) = side_attachments(&adj, &all, &bt, link)?;
        let (la, lb) = (bt.bubbles[a].len(), bt.bubbles[b].len());
        let to_a = if sa != sb {
            sa > sb
        } else if la != lb {
            la > lb
        } else {
            a < b
        };
        let (from, to) = if to_a { (b, a) } else { (a, b) };
        outdeg[from] += 1;
        indeg[to] += 1;
        directions.push((from, to));
    }
    let kinds = (0..k)
        .map(|b| match (indeg[b], outdeg[b]) {
            (_, 0) => BubbleKind::Converging,
            (0, _) => BubbleKind::Diverging,
            _ => BubbleKind::Passage,
        })
        .collect();
    Ok(DirectedBubbleTree {
        tree: bt,
        directions,
        kinds,
    })
}

/// Directed hop counts from every bubble (`None` when unreachable).
fn directed_distances(dbt: &DirectedBubbleTree) -> Vec<Vec<Option<usize>>> {
    let k = dbt.kinds.len();
    let mut out_adj = vec![Vec::new(); k];
    for &(f, t) in &dbt.directions {
        out_adj[f].push(t);
    }
    (0..k)
        .map(|s| {
            let mut dist = vec![None; k];
            dist[s] = Some(0);
            let mut q = VecDeque::from([s]);
            while let Some(x) = q.pop_front() {
                let dx = dist[x].expect("queued nodes have distance");
                for &y in &out_adj[x] {
                    if dist[y].is_none() {
                        dist[y] = Some(dx + 1);
                        q.push_back(y);
                    }
                }
            }
            dist
        })
        .collect()
}

/// One cluster per converging bubble. Vertices found only in a converging
/// bubble join it; every other vertex joins the reachable converging bubble
/// with the largest size-normalized attachment.
pub fn assign_clusters<T: Scalar>(
    dbt: &DirectedBubbleTree,
    pmfg: &FilteredGraph<T>,
) -> Result<Clustering> {
    check_maximal_planar(pmfg)?;
    let adj = WeightedAdjacency::new(pmfg);
    let tree = &dbt.tree;
    let converging = dbt.converging();
    if converging.is_empty() {
        return Err(Error::BubbleTree("no converging bubble".into()));
    }
    let cluster_of_bubble = |b: usize| converging.binary_search(&b).ok();
    let dist = directed_distances(dbt);

    let n = pmfg.n_vertices();
    let mut labels = Vec::with_capacity(n);
    for v in 0..n {
        let mem = &tree.membership[v];
        if let [only] = mem.as_slice() {
            if let Some(c) = cluster_of_bubble(*only) {
                labels.push(c);
                continue;
            }
        }
        let strengths: Vec<T> = mem
            .iter()
            .map(|&b| adj.strength(v, &tree.bubbles[b], &[]) / T::count(tree.bubbles[b].len()))
            .collect();
        let mut best: Option<(T, usize, usize)> = None;
        for (c, &cb) in converging.iter().enumerate() {
            let mut score = T::zero();
            let mut hops: Option<usize> = None;
            for (k, &b) in mem.iter().enumerate() {
                if let Some(h) = dist[b][cb] {
                    score = score + strengths[k];
                    hops = Some(hops.map_or(h, |x: usize| x.min(h)));
                }
            }
            let Some(hops) = hops else { continue };
            let better = match best {
                None => true,
                Some((s, h, _)) => score > s || (score == s && hops < h),
            };
            if better {
                best = Some((score, hops, c));
            }
        }
        let (_, _, c) = best
            .ok_or_else(|| Error::BubbleTree(format!("vertex {v} reaches no converging bubble")))?;
        labels.push(c);
    }
    Clustering::from_labels(pmfg.tickers().to_vec(), labels)
}

/// Everything produced by one DBHT run.
#[derive(Debug, Clone)]
pub struct DbhtOutcome<T: Scalar = f64> {
    pub pmfg: FilteredGraph<T>,
    pub tree: DirectedBubbleTree,
    pub clustering: Clustering,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BubbleStats {
    pub n_bubbles: usize,
    pub n_converging: usize,
    pub n_diverging: usize,
    pub n_passage: usize,
    pub largest_bubble: usize,
}

impl<T: Scalar> DbhtOutcome<T> {
    pub fn stats(&self) -> BubbleStats {
        let count = |k| self.tree.kinds.iter().filter(|&&x| x == k).count();
        BubbleStats {
            n_bubbles: self.tree.kinds.len(),
            n_converging: count(BubbleKind::Converging),
            n_diverging: count(BubbleKind::Diverging),
            n_passage: count(BubbleKind::Passage),
            largest_bubble: self
                .tree
                .tree
                .bubbles
                .iter()
                .map(Vec::len)
                .max()
                .unwrap_or(0),
        }
    }
}

/// PMFG → bubbles → directed tree → flat clusters.
pub fn dbht<T: Scalar>(d: &DistanceMatrix<T>) -> Result<DbhtOutcome<T>> {
    let pmfg = build_pmfg(d)?;
    let bt = decompose_bubbles(&pmfg)?;
    let tree = direct_bubble_tree(bt, &pmfg)?;
    let clustering = assign_clusters(&tree, &pmfg)?;
    Ok(DbhtOutcome {
        pmfg,
        tree,
        clustering,
    })
}

pub fn dbht_cluster<T: Scalar>(d: &DistanceMatrix<T>) -> Result<Clustering> {
    Ok(dbht(d)?.clustering)
}
