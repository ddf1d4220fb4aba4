//! Undirected simple graphs, edge-list ingestion, connected components and
//! hop eccentricities.
//!
//! Node ids are contiguous `0..n`. Every graph also carries the original
//! integer label of each node; the loader assigns ids in ascending label
//! order, so lexicographic order on ids agrees with lexicographic order on
//! labels.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::error::{KoptError, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<Vec<u32>>,
    edge_count: usize,
    labels: Vec<i64>,
}

impl Graph {
    /// Edgeless graph on `n` nodes labelled `0..n`.
    pub fn empty(n: usize) -> Self {
        Graph {
            adjacency: vec![Vec::new(); n],
            edge_count: 0,
            labels: (0..n as i64).collect(),
        }
    }

    /// Builds a graph from explicit pairs. Self-loops, duplicates and
    /// out-of-range ids are rejected; use [`load_edge_list`] for dirty input.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut g = Graph::empty(n);
        for &(u, v) in edges {
            g.insert_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn with_labels(mut self, labels: Vec<i64>) -> Result<Self> {
        if labels.len() != self.n() {
            return Err(KoptError::InvalidParameter(format!(
                "{} labels for {} nodes",
                labels.len(),
                self.n()
            )));
        }
        self.labels = labels;
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.adjacency.len()
    }

    pub fn m(&self) -> usize {
        self.edge_count
    }

    pub fn degree(&self, u: usize) -> usize {
        self.adjacency[u].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    /// Sorted neighbor list of `u`.
    pub fn neighbors(&self, u: usize) -> &[u32] {
        &self.adjacency[u]
    }

    pub fn label(&self, u: usize) -> i64 {
        self.labels[u]
    }

    pub fn labels(&self) -> &[i64] {
        &self.labels
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        if u >= self.n() || v >= self.n() || u == v {
            return false;
        }
        let (a, b) = if self.degree(u) <= self.degree(v) {
            (u, v)
        } else {
            (v, u)
        };
        self.adjacency[a].binary_search(&(b as u32)).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(u, nbrs)| {
            nbrs.iter()
                .map(|&v| v as usize)
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Size of the candidate set `(V x V) \ E`.
    pub fn candidate_count(&self) -> usize {
        let n = self.n();
        n * n.saturating_sub(1) / 2 - self.m()
    }

    /// Candidate pairs `(u, v)`, `u < v`, not joined by an edge, in
    /// lexicographic order.
    pub fn non_edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n()).flat_map(move |u| {
            let nbrs = &self.adjacency[u];
            let start = nbrs.partition_point(|&v| (v as usize) <= u);
            let mut it = nbrs[start..].iter().map(|&v| v as usize).peekable();
            (u + 1..self.n()).filter(move |&v| {
                while let Some(&w) = it.peek() {
                    if w < v {
                        it.next();
                    } else {
                        break;
                    }
                }
                it.peek() != Some(&v)
            })
            .map(move |v| (u, v))
        })
    }

    pub(crate) fn insert_edge(&mut self, u: usize, v: usize) -> Result<()> {
        let n = self.n();
        if u >= n {
            return Err(KoptError::NodeOutOfRange(u));
        }
        if v >= n {
            return Err(KoptError::NodeOutOfRange(v));
        }
        if u == v {
            return Err(KoptError::SelfPair(u));
        }
        let pos_u = match self.adjacency[u].binary_search(&(v as u32)) {
            Ok(_) => return Err(KoptError::EdgeExists(u.min(v), u.max(v))),
            Err(p) => p,
        };
        self.adjacency[u].insert(pos_u, v as u32);
        let pos_v = self.adjacency[v]
            .binary_search(&(u as u32))
            .expect_err("adjacency is symmetric");
        self.adjacency[v].insert(pos_v, u as u32);
        self.edge_count += 1;
        Ok(())
    }

    /// Copy of the graph with one extra edge.
    pub fn with_edge(&self, u: usize, v: usize) -> Result<Graph> {
        let mut g = self.clone();
        g.insert_edge(u, v)?;
        Ok(g)
    }

    pub fn with_edges(&self, extra: &[(usize, usize)]) -> Result<Graph> {
        let mut g = self.clone();
        for &(u, v) in extra {
            g.insert_edge(u, v)?;
        }
        Ok(g)
    }

    /// Hop distances from `source`; `u32::MAX` marks unreachable nodes.
    pub fn bfs(&self, source: usize) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.n()];
        let mut queue = VecDeque::new();
        bfs_into(self, source, &mut dist, &mut queue);
        dist
    }

    /// Component index per node, components numbered in order of their
    /// smallest node id.
    pub fn components(&self) -> (usize, Vec<usize>) {
        let n = self.n();
        let mut comp = vec![usize::MAX; n];
        let mut count = 0;
        let mut queue = VecDeque::new();
        for s in 0..n {
            if comp[s] != usize::MAX {
                continue;
            }
            comp[s] = count;
            queue.push_back(s);
            while let Some(u) = queue.pop_front() {
                for &w in &self.adjacency[u] {
                    let w = w as usize;
                    if comp[w] == usize::MAX {
                        comp[w] = count;
                        queue.push_back(w);
                    }
                }
            }
            count += 1;
        }
        (count, comp)
    }

    pub fn is_connected(&self) -> bool {
        self.n() > 0 && self.components().0 == 1
    }

    pub(crate) fn require_connected(&self) -> Result<()> {
        let (count, _) = self.components();
        if count != 1 {
            return Err(KoptError::Disconnected { components: count });
        }
        Ok(())
    }

    /// Stable content digest over node labels and edges, used to key
    /// sketch caches.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        h.update((self.n() as u64).to_le_bytes());
        for l in &self.labels {
            h.update(l.to_le_bytes());
        }
        for (u, v) in self.edges() {
            h.update((u as u64).to_le_bytes());
            h.update((v as u64).to_le_bytes());
        }
        h.finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn bfs_into(g: &Graph, source: usize, dist: &mut [u32], queue: &mut VecDeque<usize>) -> u32 {
    dist.iter_mut().for_each(|d| *d = u32::MAX);
    queue.clear();
    dist[source] = 0;
    queue.push_back(source);
    let mut far = 0;
    while let Some(u) = queue.pop_front() {
        let du = dist[u];
        far = du;
        for &w in &g.adjacency[u] {
            let w = w as usize;
            if dist[w] == u32::MAX {
                dist[w] = du + 1;
                queue.push_back(w);
            }
        }
    }
    far
}

/// Counts of lines dropped while cleaning an edge list.
#[derive(Clone, Debug, Default, PartialEq, Eq, serde::Serialize)]
pub struct LoadReport {
    pub edge_lines: usize,
    pub self_loops: usize,
    pub duplicates: usize,
}

impl LoadReport {
    pub fn dropped(&self) -> usize {
        self.self_loops + self.duplicates
    }
}

/// Parses a whitespace-separated edge list. Lines starting with `#` or `%`
/// are comments; tokens past the second (weights, timestamps) are ignored.
/// Labels are remapped to ids `0..n` in ascending label order.
pub fn load_edge_list<R: BufRead>(reader: R) -> Result<(Graph, LoadReport)> {
    let mut pairs: Vec<(i64, i64)> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let line_no = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') || trimmed.starts_with('%') {
            continue;
        }
        let mut tokens = trimmed
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty());
        let mut next = |which: &str| -> Result<i64> {
            let tok = tokens.next().ok_or_else(|| KoptError::Parse {
                line: line_no,
                message: format!("missing {which} endpoint"),
            })?;
            tok.parse::<i64>().map_err(|_| KoptError::Parse {
                line: line_no,
                message: format!("`{tok}` is not an integer"),
            })
        };
        let a = next("first")?;
        let b = next("second")?;
        pairs.push((a, b));
    }
    if pairs.is_empty() {
        return Err(KoptError::EmptyInput);
    }

    let mut labels: Vec<i64> = pairs.iter().flat_map(|&(a, b)| [a, b]).collect();
    labels.sort_unstable();
    labels.dedup();
    let id = |l: i64| labels.binary_search(&l).expect("label collected above");

    let mut report = LoadReport {
        edge_lines: pairs.len(),
        ..Default::default()
    };
    let mut edges: Vec<(u32, u32)> = Vec::with_capacity(pairs.len());
    for &(a, b) in &pairs {
        let (u, v) = (id(a), id(b));
        if u == v {
            report.self_loops += 1;
            continue;
        }
        edges.push((u.min(v) as u32, u.max(v) as u32));
    }
    let before = edges.len();
    edges.sort_unstable();
    edges.dedup();
    report.duplicates = before - edges.len();

    let n = labels.len();
    let mut adjacency = vec![Vec::new(); n];
    for &(u, v) in &edges {
        adjacency[u as usize].push(v);
        adjacency[v as usize].push(u);
    }
    for list in &mut adjacency {
        list.sort_unstable();
    }
    let graph = Graph {
        adjacency,
        edge_count: edges.len(),
        labels,
    };
    Ok((graph, report))
}

/// Opens `path` (gzip-decoded when it ends in `.gz`) and parses it.
pub fn load_edge_list_path(path: &Path) -> Result<(Graph, LoadReport)> {
    let file = File::open(path)?;
    let gz = path
        .extension()
        .map(|e| e.eq_ignore_ascii_case("gz"))
        .unwrap_or(false);
    if gz {
        load_edge_list(BufReader::new(MultiGzDecoder::new(file)))
    } else {
        load_edge_list(BufReader::new(file))
    }
}

/// Writes one `label label` line per edge.
pub fn write_edge_list<W: Write>(graph: &Graph, mut out: W) -> Result<()> {
    for (u, v) in graph.edges() {
        writeln!(out, "{} {}", graph.label(u), graph.label(v))?;
    }
    Ok(())
}

/// Induced subgraph on the largest component. Ties go to the component
/// holding the smallest label; relative node order is preserved.
pub fn largest_connected_component(graph: &Graph) -> Graph {
    let (count, comp) = graph.components();
    if count <= 1 {
        return graph.clone();
    }
    let mut sizes = vec![0usize; count];
    let mut min_label = vec![i64::MAX; count];
    for (u, &c) in comp.iter().enumerate() {
        sizes[c] += 1;
        min_label[c] = min_label[c].min(graph.label(u));
    }
    let best = (0..count)
        .max_by(|&a, &b| {
            sizes[a]
                .cmp(&sizes[b])
                .then(min_label[b].cmp(&min_label[a]))
        })
        .expect("at least one component");

    let mut new_id = vec![u32::MAX; graph.n()];
    let mut labels = Vec::with_capacity(sizes[best]);
    for u in 0..graph.n() {
        if comp[u] == best {
            new_id[u] = labels.len() as u32;
            labels.push(graph.label(u));
        }
    }
    let mut adjacency = Vec::with_capacity(labels.len());
    let mut edge_ends = 0;
    for u in 0..graph.n() {
        if comp[u] == best {
            let list: Vec<u32> = graph.adjacency[u]
                .iter()
                .map(|&w| new_id[w as usize])
                .collect();
            edge_ends += list.len();
            adjacency.push(list);
        }
    }
    Graph {
        adjacency,
        edge_count: edge_ends / 2,
        labels,
    }
}

/// Exact hop eccentricity of every node.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EccentricityTable {
    ecc: Vec<u32>,
}

impl EccentricityTable {
    pub fn new(ecc: Vec<u32>) -> Self {
        EccentricityTable { ecc }
    }

    pub fn get(&self, u: usize) -> u32 {
        self.ecc[u]
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.ecc
    }

    pub fn diameter(&self) -> u32 {
        self.ecc.iter().copied().max().unwrap_or(0)
    }

    pub fn radius(&self) -> u32 {
        self.ecc.iter().copied().min().unwrap_or(0)
    }
}

/// Graphs up to this size get one BFS per node.
pub const PLAIN_ECCENTRICITY_LIMIT: usize = 10_000;

pub fn eccentricities(graph: &Graph) -> Result<EccentricityTable> {
    graph.require_connected()?;
    if graph.n() <= PLAIN_ECCENTRICITY_LIMIT {
        Ok(EccentricityTable::new(all_source_eccentricities(graph)))
    } else {
        Ok(EccentricityTable::new(bounded_eccentricities(graph)))
    }
}

fn all_source_eccentricities(graph: &Graph) -> Vec<u32> {
    (0..graph.n())
        .into_par_iter()
        .map_init(
            || (vec![u32::MAX; graph.n()], VecDeque::new()),
            |(dist, queue), s| bfs_into(graph, s, dist, queue),
        )
        .collect()
}

/// Lower/upper bound refinement: every BFS from `v` tightens
/// `max(d, ecc(v) - d) <= ecc(w) <= ecc(v) + d` for all `w`. Sources
/// alternate between the largest upper bound and the smallest lower bound.
/// Degree-one nodes are settled from their neighbor (`ecc + 1`).
fn bounded_eccentricities(graph: &Graph) -> Vec<u32> {
    let n = graph.n();
    let mut lo = vec![0u32; n];
    let mut hi = vec![u32::MAX; n];
    let mut done = vec![false; n];
    let leaf = |u: usize| n > 2 && graph.degree(u) == 1;
    let mut open: Vec<usize> = (0..n).filter(|&u| !leaf(u)).collect();
    if open.is_empty() {
        open.push(0);
    }

    let mut dist = vec![u32::MAX; n];
    let mut queue = VecDeque::new();
    let mut pick_high = true;
    while !open.is_empty() {
        let key = |&u: &usize| (graph.degree(u), std::cmp::Reverse(u));
        let v = if pick_high {
            *open
                .iter()
                .max_by(|a, b| hi[**a].cmp(&hi[**b]).then(key(a).cmp(&key(b))))
                .unwrap()
        } else {
            *open
                .iter()
                .min_by(|a, b| lo[**a].cmp(&lo[**b]).then(key(b).cmp(&key(a))))
                .unwrap()
        };
        pick_high = !pick_high;
        let e = bfs_into(graph, v, &mut dist, &mut queue);
        lo[v] = e;
        hi[v] = e;
        done[v] = true;
        open.retain(|&w| {
            if done[w] {
                return false;
            }
            let d = dist[w];
            lo[w] = lo[w].max(d.max(e - d));
            hi[w] = hi[w].min(e + d);
            if lo[w] == hi[w] {
                done[w] = true;
                false
            } else {
                true
            }
        });
    }

    let mut ecc = lo;
    for u in 0..n {
        if !done[u] {
            let nb = graph.neighbors(u)[0] as usize;
            ecc[u] = ecc[nb] + 1;
        }
    }
    ecc
}

/// Nodes whose eccentricity is at least that of every neighbor. A node
/// with a strictly more eccentric neighbor is central and dropped.
pub fn prune_central_nodes(graph: &Graph, table: &EccentricityTable) -> Vec<usize> {
    (0..graph.n())
        .filter(|&u| {
            graph
                .neighbors(u)
                .iter()
                .all(|&w| table.get(u) >= table.get(w as usize))
        })
        .collect()
}
