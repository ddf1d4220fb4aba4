//! Deterministic synthetic graphs for tests and benchmark sweeps.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::graph::{largest_connected_component, Graph};

fn build(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Graph {
    let mut g = Graph::empty(n);
    for (u, v) in edges {
        if u != v && !g.has_edge(u, v) {
            g.insert_edge(u, v).expect("checked above");
        }
    }
    g
}

pub fn path(n: usize) -> Graph {
    build(n, (1..n).map(|i| (i - 1, i)))
}

pub fn cycle(n: usize) -> Graph {
    build(n, (0..n).map(|i| (i, (i + 1) % n)))
}

/// Star with center 0 and `n - 1` leaves.
pub fn star(n: usize) -> Graph {
    build(n, (1..n).map(|i| (0, i)))
}

pub fn complete(n: usize) -> Graph {
    build(n, (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))))
}

pub fn grid(rows: usize, cols: usize) -> Graph {
    let id = |r: usize, c: usize| r * cols + c;
    let mut edges = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    build(rows * cols, edges)
}

/// Erdős–Rényi G(n, p).
pub fn gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.gen::<f64>() < p {
                edges.push((u, v));
            }
        }
    }
    build(n, edges)
}

/// G(n, p) resampled with successive seeds until connected.
pub fn connected_gnp(n: usize, p: f64, seed: u64) -> Graph {
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    loop {
        let g = gnp(n, p, s);
        if g.is_connected() {
            return g;
        }
        s = s.wrapping_add(1);
    }
}

/// Barabási–Albert preferential attachment: a clique on `per_node + 1`
/// seed nodes, then each new node attaches to `per_node` distinct targets
/// sampled proportionally to degree. `m = per_node * (n - per_node - 1) +
/// C(per_node + 1, 2)`.
pub fn preferential_attachment(n: usize, per_node: usize, seed: u64) -> Graph {
    assert!(per_node >= 1 && n > per_node);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let core = per_node + 1;
    let mut edges: Vec<(usize, usize)> = Vec::with_capacity(per_node * n);
    let mut ends: Vec<usize> = Vec::with_capacity(2 * per_node * n);
    for u in 0..core {
        for v in u + 1..core {
            edges.push((u, v));
            ends.push(u);
            ends.push(v);
        }
    }
    let mut targets = Vec::with_capacity(per_node);
    for u in core..n {
        targets.clear();
        while targets.len() < per_node {
            let t = ends[rng.gen_range(0..ends.len())];
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            edges.push((t, u));
            ends.push(t);
            ends.push(u);
        }
    }
    build(n, edges)
}

/// Watts–Strogatz ring lattice (each node joined to `half_k` neighbors on
/// each side) with rewiring probability `p`; the largest component is
/// returned.
pub fn watts_strogatz(n: usize, half_k: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n);
    let mut lattice = Vec::new();
    for u in 0..n {
        for j in 1..=half_k {
            lattice.push((u, (u + j) % n));
        }
    }
    for (u, v) in lattice {
        let (a, b) = if rng.gen::<f64>() < p {
            let mut w = rng.gen_range(0..n);
            let mut tries = 0;
            while (w == u || g.has_edge(u, w)) && tries < 32 {
                w = rng.gen_range(0..n);
                tries += 1;
            }
            (u, w)
        } else {
            (u, v)
        };
        if a != b && !g.has_edge(a, b) {
            g.insert_edge(a, b).expect("checked above");
        }
    }
    largest_connected_component(&g)
}

/// Random recursive tree plus `extra` random chords; always connected.
pub fn tree_plus_chords(n: usize, extra: usize, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut g = Graph::empty(n);
    for i in 1..n {
        let parent = order[rng.gen_range(0..i)];
        g.insert_edge(order[i], parent).expect("tree edge is new");
    }
    let mut added = 0;
    let mut attempts = 0;
    while added < extra && attempts < 100 * (extra + 1) {
        attempts += 1;
        let (u, v) = (rng.gen_range(0..n), rng.gen_range(0..n));
        if u != v && !g.has_edge(u, v) {
            g.insert_edge(u, v).expect("checked above");
            added += 1;
        }
    }
    g
}

/// Every connected graph on `n` nodes up to isomorphism, each in the
/// labelling with the smallest edge bitmask. Only small `n` is practical.
pub fn connected_graphs(n: usize) -> Vec<Graph> {
    assert!(n <= 7, "enumeration is exponential in n");
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|u| (u + 1..n).map(move |v| (u, v))).collect();
    let mut index = vec![vec![0usize; n]; n];
    for (i, &(u, v)) in pairs.iter().enumerate() {
        index[u][v] = i;
        index[v][u] = i;
    }
    let perms = permutations(n);
    let canon = |mask: u32| -> u32 {
        perms
            .iter()
            .map(|p| {
                pairs
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .fold(0u32, |acc, (_, &(u, v))| acc | 1 << index[p[u]][p[v]])
            })
            .min()
            .unwrap_or(mask)
    };
    let mut seen = std::collections::BTreeSet::new();
    for mask in 0u32..1 << pairs.len() {
        let edges: Vec<(usize, usize)> = (0..pairs.len()).filter(|i| mask >> i & 1 == 1).map(|i| pairs[i]).collect();
        if (mask.count_ones() as usize) + 1 < n || !build(n, edges).is_connected() {
            continue;
        }
        seen.insert(canon(mask));
    }
    seen.into_iter()
        .map(|mask| build(n, (0..pairs.len()).filter(|i| mask >> i & 1 == 1).map(|i| pairs[i])))
        .collect()
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

/// Parses `kind:arg:arg...` synthetic graph descriptors:
/// `ba:<n>:<per_node>:<seed>`, `gnp:<n>:<p>:<seed>`, `ws:<n>:<half_k>:<p>:<seed>`,
/// `grid:<rows>:<cols>`, `path:<n>`, `cycle:<n>`, `star:<n>`, `complete:<n>`.
pub fn from_descriptor(desc: &str) -> Option<Graph> {
    let parts: Vec<&str> = desc.split(':').collect();
    let us = |i: usize| parts.get(i).and_then(|s| s.parse::<usize>().ok());
    let fl = |i: usize| parts.get(i).and_then(|s| s.parse::<f64>().ok());
    let sd = |i: usize| parts.get(i).and_then(|s| s.parse::<u64>().ok()).unwrap_or(0);
    match parts[0] {
        "ba" if parts.len() >= 3 => {
            let (n, k) = (us(1)?, us(2)?);
            (k >= 1 && n > k).then(|| preferential_attachment(n, k, sd(3)))
        }
        "gnp" if parts.len() >= 3 => Some(largest_connected_component(&gnp(us(1)?, fl(2)?, sd(3)))),
        "ws" if parts.len() >= 4 => Some(watts_strogatz(us(1)?, us(2)?, fl(3)?, sd(4))),
        "grid" if parts.len() == 3 => Some(grid(us(1)?, us(2)?)),
        "path" => Some(path(us(1)?)),
        "cycle" => Some(cycle(us(1)?)),
        "star" => Some(star(us(1)?)),
        "complete" => Some(complete(us(1)?)),
        _ => None,
    }
}
