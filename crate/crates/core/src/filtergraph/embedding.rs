use std::collections::HashMap;

use super::planarity::Rotation;

/// Next half-edge along a face: arriving at `b` from `a`, leave towards the
/// successor of `a` in `b`'s rotation.
pub(crate) fn successor(rotation: &Rotation, a: usize, b: usize) -> usize {
    let rot = &rotation[b];
    let k = rot
        .iter()
        .position(|&x| x == a)
        .expect("half-edge present in rotation");
    rot[(k + 1) % rot.len()]
}

/// Faces of a rotation system as closed vertex walks.
pub fn faces(rotation: &Rotation) -> Vec<Vec<usize>> {
    let mut seen: HashMap<(usize, usize), bool> = HashMap::new();
    let mut out = Vec::new();
    for (u, rot) in rotation.iter().enumerate() {
        for &v in rot {
            if seen.contains_key(&(u, v)) {
                continue;
            }
            let mut face = Vec::new();
            let (mut a, mut b) = (u, v);
            loop {
                seen.insert((a, b), true);
                face.push(a);
                let c = successor(rotation, a, b);
                a = b;
                b = c;
                if (a, b) == (u, v) {
                    break;
                }
            }
            out.push(face);
        }
    }
    out
}

/// Checks that `rotation` lists exactly the edges in `edges` and that Euler's
/// formula `V − E + F = 2` holds for every connected component with an edge,
/// i.e. the rotation system is a genus-0 embedding.
pub fn is_planar_embedding(n: usize, edges: &[(usize, usize)], rotation: &Rotation) -> bool {
    if rotation.len() != n {
        return false;
    }
    let mut expected: Vec<Vec<usize>> = vec![Vec::new(); n];
    for &(u, v) in edges {
        expected[u].push(v);
        expected[v].push(u);
    }
    for (e, r) in expected.iter_mut().zip(rotation) {
        let mut got = r.clone();
        got.sort_unstable();
        e.sort_unstable();
        if *e != got {
            return false;
        }
    }
    let faces = faces(rotation);
    let mut dsu = crate::filtergraph::Dsu::new(n);
    for &(u, v) in edges {
        dsu.union(u, v);
    }
    let mut verts: HashMap<usize, i64> = HashMap::new();
    let mut edge_count: HashMap<usize, i64> = HashMap::new();
    let mut face_count: HashMap<usize, i64> = HashMap::new();
    for v in 0..n {
        if !rotation[v].is_empty() {
            *verts.entry(dsu.find(v)).or_default() += 1;
        }
    }
    for &(u, _) in edges {
        *edge_count.entry(dsu.find(u)).or_default() += 1;
    }
    for f in &faces {
        *face_count.entry(dsu.find(f[0])).or_default() += 1;
    }
    verts.iter().all(|(root, &v)| {
        v - edge_count.get(root).copied().unwrap_or(0) + face_count.get(root).copied().unwrap_or(0)
            == 2
    })
}
