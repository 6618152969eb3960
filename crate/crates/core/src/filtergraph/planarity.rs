//! Left-right (de Fraysseix–Rosenstiehl) planarity test with embedding.
//!
//! Follows Brandes' formulation: a DFS orientation computes lowpoints and
//! nesting depths, a second DFS checks the left-right constraints with a stack
//! of conflict pairs, and a third DFS realises the rotation system.

use std::collections::HashMap;

/// Rotation system: for every vertex, its neighbours in cyclic order.
pub type Rotation = Vec<Vec<usize>>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct Interval {
    low: Option<usize>,
    high: Option<usize>,
}

impl Interval {
    fn is_empty(&self) -> bool {
        self.low.is_none() && self.high.is_none()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
struct ConflictPair {
    left: Interval,
    right: Interval,
}

impl ConflictPair {
    fn swap(&mut self) {
        std::mem::swap(&mut self.left, &mut self.right);
    }
}

struct LrState {
    n: usize,
    // Adjacency in compressed rows: neighbours of `v` are `adj[start[v]..start[v + 1]]`.
    start: Vec<usize>,
    adj: Vec<(usize, usize)>,
    // Per undirected edge id; `src → dst` is the DFS orientation.
    src: Vec<usize>,
    dst: Vec<usize>,
    oriented: Vec<bool>,
    height: Vec<Option<usize>>,
    parent_edge: Vec<Option<usize>>,
    lowpt: Vec<usize>,
    lowpt2: Vec<usize>,
    nesting_depth: Vec<i64>,
    // Outgoing edges share the row layout of `adj`; `out_len[v]` are in use.
    out_edges: Vec<usize>,
    out_len: Vec<usize>,
    roots: Vec<usize>,
    reference: Vec<Option<usize>>,
    side: Vec<i64>,
    stack: Vec<ConflictPair>,
    stack_bottom: Vec<usize>,
    lowpt_edge: Vec<Option<usize>>,
    left_ref: Vec<usize>,
    right_ref: Vec<usize>,
}

/// Returns a planar rotation system, or `None` when the graph is not planar.
///
/// `edges` must be simple (no loops, no duplicates) over vertices `0..n`.
pub fn planar_embedding(n: usize, edges: &[(usize, usize)]) -> Option<Rotation> {
    if n > 2 && edges.len() > 3 * n - 6 {
        return None;
    }
    let m = edges.len();
    let mut start = vec![0usize; n + 1];
    for &(u, v) in edges {
        debug_assert!(u != v && u < n && v < n);
        start[u + 1] += 1;
        start[v + 1] += 1;
    }
    for v in 0..n {
        start[v + 1] += start[v];
    }
    let mut fill = start.clone();
    let mut adj = vec![(0, 0); 2 * m];
    for (id, &(u, v)) in edges.iter().enumerate() {
        adj[fill[u]] = (v, id);
        fill[u] += 1;
        adj[fill[v]] = (u, id);
        fill[v] += 1;
    }
    let mut st = LrState {
        n,
        start,
        adj,
        src: vec![usize::MAX; m],
        dst: vec![usize::MAX; m],
        oriented: vec![false; m],
        height: vec![None; n],
        parent_edge: vec![None; n],
        lowpt: vec![0; m],
        lowpt2: vec![0; m],
        nesting_depth: vec![0; m],
        out_edges: vec![0; 2 * m],
        out_len: vec![0; n],
        roots: Vec::new(),
        reference: vec![None; m],
        side: vec![1; m],
        stack: Vec::new(),
        stack_bottom: vec![0; m],
        lowpt_edge: vec![None; m],
        left_ref: vec![usize::MAX; n],
        right_ref: vec![usize::MAX; n],
    };
    for v in 0..n {
        if st.height[v].is_none() {
            st.height[v] = Some(0);
            st.roots.push(v);
            st.orient(v);
        }
    }
    st.sort_out_edges();
    for i in 0..st.roots.len() {
        let r = st.roots[i];
        if !st.test(r) {
            return None;
        }
    }
    for e in 0..m {
        let s = st.sign(e);
        st.nesting_depth[e] *= s;
    }
    Some(st.embed())
}

pub fn is_planar(n: usize, edges: &[(usize, usize)]) -> bool {
    planar_embedding(n, edges).is_some()
}

impl LrState {
    fn out_range(&self, v: usize) -> std::ops::Range<usize> {
        self.start[v]..self.start[v] + self.out_len[v]
    }

    fn sort_out_edges(&mut self) {
        for v in 0..self.n {
            let range = self.out_range(v);
            let nd = &self.nesting_depth;
            self.out_edges[range].sort_by_key(|&e| nd[e]);
        }
    }

    fn orient(&mut self, v: usize) {
        let parent = self.parent_edge[v];
        let hv = self.height[v].expect("visited");
        for k in self.start[v]..self.start[v + 1] {
            let (w, e) = self.adj[k];
            if self.oriented[e] {
                continue;
            }
            self.oriented[e] = true;
            self.src[e] = v;
            self.dst[e] = w;
            self.out_edges[self.start[v] + self.out_len[v]] = e;
            self.out_len[v] += 1;
            self.lowpt[e] = hv;
            self.lowpt2[e] = hv;
            match self.height[w] {
                None => {
                    self.parent_edge[w] = Some(e);
                    self.height[w] = Some(hv + 1);
                    self.orient(w);
                }
                Some(hw) => self.lowpt[e] = hw,
            }
            self.nesting_depth[e] = 2 * self.lowpt[e] as i64;
            if self.lowpt2[e] < hv {
                self.nesting_depth[e] += 1;
            }
            if let Some(pe) = parent {
                if self.lowpt[e] < self.lowpt[pe] {
                    self.lowpt2[pe] = self.lowpt[pe].min(self.lowpt2[e]);
                    self.lowpt[pe] = self.lowpt[e];
                } else if self.lowpt[e] > self.lowpt[pe] {
                    self.lowpt2[pe] = self.lowpt2[pe].min(self.lowpt[e]);
                } else {
                    self.lowpt2[pe] = self.lowpt2[pe].min(self.lowpt2[e]);
                }
            }
        }
    }

    fn conflicting(&self, iv: &Interval, b: usize) -> bool {
        match iv.high {
            Some(h) => self.lowpt[h] > self.lowpt[b],
            None => false,
        }
    }

    fn lowest(&self, p: &ConflictPair) -> usize {
        match (p.left.low, p.right.low) {
            (None, Some(r)) => self.lowpt[r],
            (Some(l), None) => self.lowpt[l],
            (Some(l), Some(r)) => self.lowpt[l].min(self.lowpt[r]),
            (None, None) => usize::MAX,
        }
    }

    fn test(&mut self, v: usize) -> bool {
        let parent = self.parent_edge[v];
        let hv = self.height[v].expect("visited");
        let first = (self.out_len[v] > 0).then(|| self.out_edges[self.start[v]]);
        for k in self.out_range(v) {
            let ei = self.out_edges[k];
            let w = self.dst[ei];
            self.stack_bottom[ei] = self.stack.len();
            if self.parent_edge[w] == Some(ei) {
                if !self.test(w) {
                    return false;
                }
            } else {
                self.lowpt_edge[ei] = Some(ei);
                self.stack.push(ConflictPair {
                    left: Interval::default(),
                    right: Interval {
                        low: Some(ei),
                        high: Some(ei),
                    },
                });
            }
            if self.lowpt[ei] < hv {
                if Some(ei) == first {
                    if let Some(pe) = parent {
                        self.lowpt_edge[pe] = self.lowpt_edge[ei];
                    }
                } else if let Some(pe) = parent {
                    if !self.add_constraints(ei, pe) {
                        return false;
                    }
                }
            }
        }
        if let Some(pe) = parent {
            self.remove_back_edges(pe);
        }
        true
    }

    fn add_constraints(&mut self, ei: usize, e: usize) -> bool {
        let mut p = ConflictPair::default();
        loop {
            let mut q = self.stack.pop().expect("constraint stack underflow");
            if !q.left.is_empty() {
                q.swap();
            }
            if !q.left.is_empty() {
                return false;
            }
            let qrl = q.right.low.expect("non-empty right interval");
            if self.lowpt[qrl] > self.lowpt[e] {
                if p.right.is_empty() {
                    p.right = q.right;
                } else {
                    let prl = p.right.low.expect("non-empty");
                    self.reference[prl] = q.right.high;
                }
                p.right.low = q.right.low;
            } else {
                self.reference[qrl] = self.lowpt_edge[e];
            }
            if self.stack.len() == self.stack_bottom[ei] {
                break;
            }
        }
        while let Some(top) = self.stack.last() {
            if !(self.conflicting(&top.left, ei) || self.conflicting(&top.right, ei)) {
                break;
            }
            let mut q = self.stack.pop().expect("checked non-empty");
            if self.conflicting(&q.right, ei) {
                q.swap();
            }
            if self.conflicting(&q.right, ei) {
                return false;
            }
            if let Some(prl) = p.right.low {
                self.reference[prl] = q.right.high;
            }
            if q.right.low.is_some() {
                p.right.low = q.right.low;
            }
            if p.left.is_empty() {
                p.left = q.left;
            } else if let Some(pll) = p.left.low {
                self.reference[pll] = q.left.high;
            }
            p.left.low = q.left.low;
        }
        if !(p.left.is_empty() && p.right.is_empty()) {
            self.stack.push(p);
        }
        true
    }

    fn remove_back_edges(&mut self, e: usize) {
        let u = self.src[e];
        let hu = self.height[u].expect("visited");
        while let Some(top) = self.stack.last() {
            if self.lowest(top) != hu {
                break;
            }
            let p = self.stack.pop().expect("checked non-empty");
            if let Some(l) = p.left.low {
                self.side[l] = -1;
            }
        }
        if let Some(mut p) = self.stack.pop() {
            while let Some(h) = p.left.high {
                if self.dst[h] != u {
                    break;
                }
                p.left.high = self.reference[h];
            }
            if p.left.high.is_none() {
                if let Some(l) = p.left.low {
                    self.reference[l] = p.right.low;
                    self.side[l] = -1;
                    p.left.low = None;
                }
            }
            while let Some(h) = p.right.high {
                if self.dst[h] != u {
                    break;
                }
                p.right.high = self.reference[h];
            }
            if p.right.high.is_none() {
                if let Some(r) = p.right.low {
                    self.reference[r] = p.left.low;
                    self.side[r] = -1;
                    p.right.low = None;
                }
            }
            self.stack.push(p);
        }
        if self.lowpt[e] < hu {
            let top = self
                .stack
                .last()
                .expect("return edge implies a conflict pair");
            let (hl, hr) = (top.left.high, top.right.high);
            self.reference[e] = match (hl, hr) {
                (Some(l), Some(r)) if self.lowpt[l] > self.lowpt[r] => Some(l),
                (Some(l), None) => Some(l),
                _ => hr,
            };
        }
    }

    fn sign(&mut self, e: usize) -> i64 {
        // Iterative resolution of the reference chain.
        let mut chain = vec![e];
        let mut cur = e;
        while let Some(r) = self.reference[cur] {
            chain.push(r);
            cur = r;
        }
        let mut acc = self.side[cur];
        for &x in chain.iter().rev().skip(1) {
            acc *= self.side[x];
            self.side[x] = acc;
            self.reference[x] = None;
        }
        self.side[e]
    }

    fn embed(&mut self) -> Rotation {
        let mut emb = HalfEdges::default();
        self.sort_out_edges();
        for v in 0..self.n {
            let mut prev = None;
            for k in self.out_range(v) {
                let w = self.dst[self.out_edges[k]];
                emb.insert_cw(v, w, prev);
                prev = Some(w);
            }
        }
        for i in 0..self.roots.len() {
            let r = self.roots[i];
            self.embed_dfs(r, &mut emb);
        }
        (0..self.n).map(|v| emb.rotation(v)).collect()
    }

    fn embed_dfs(&mut self, v: usize, emb: &mut HalfEdges) {
        for k in self.out_range(v) {
            let ei = self.out_edges[k];
            let w = self.dst[ei];
            if self.parent_edge[w] == Some(ei) {
                emb.insert_first(w, v);
                self.left_ref[v] = w;
                self.right_ref[v] = w;
                self.embed_dfs(w, emb);
            } else if self.side[ei] == 1 {
                emb.insert_cw(w, v, Some(self.right_ref[w]));
            } else {
                emb.insert_ccw(w, v, self.left_ref[w]);
                self.left_ref[w] = v;
            }
        }
    }
}

/// Doubly linked cyclic neighbour lists keyed by half-edge.
#[derive(Default)]
struct HalfEdges {
    cw: HashMap<(usize, usize), usize>,
    ccw: HashMap<(usize, usize), usize>,
    first: HashMap<usize, usize>,
}

impl HalfEdges {
    fn insert_cw(&mut self, v: usize, w: usize, reference: Option<usize>) {
        match reference {
            None => {
                self.cw.insert((v, w), w);
                self.ccw.insert((v, w), w);
                self.first.insert(v, w);
            }
            Some(r) => {
                let next = self.cw[&(v, r)];
                self.cw.insert((v, r), w);
                self.cw.insert((v, w), next);
                self.ccw.insert((v, next), w);
                self.ccw.insert((v, w), r);
            }
        }
    }

    fn insert_ccw(&mut self, v: usize, w: usize, reference: usize) {
        let prev = self.ccw[&(v, reference)];
        self.insert_cw(v, w, Some(prev));
        if self.first.get(&v) == Some(&reference) {
            self.first.insert(v, w);
        }
    }

    fn insert_first(&mut self, v: usize, w: usize) {
        match self.first.get(&v).copied() {
            None => self.insert_cw(v, w, None),
            Some(f) => {
                self.insert_ccw(v, w, f);
                self.first.insert(v, w);
            }
        }
    }

    fn rotation(&self, v: usize) -> Vec<usize> {
        let Some(&start) = self.first.get(&v) else {
            return Vec::new();
        };
        let mut out = vec![start];
        let mut cur = self.cw[&(v, start)];
        while cur != start {
            out.push(cur);
            cur = self.cw[&(v, cur)];
        }
        out
    }
}
