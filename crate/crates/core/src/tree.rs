//! Minimum spanning trees over distance matrices, their topology metrics,
//! and edge-set comparison between trees.

use std::collections::{BTreeSet, VecDeque};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::rho::{to_distance, DistanceMatrix, RhoMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Edge {
    /// Node indices, `a < b`.
    pub a: usize,
    pub b: usize,
    pub distance: f64,
    pub rho: f64,
    pub significant: bool,
}

/// Spanning tree (or, after significance filtering, a forest).
#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    pub labels: Vec<String>,
    pub edges: Vec<Edge>,
    /// Nodes still present. Filtering drops nodes left without edges.
    pub active: Vec<bool>,
    pub scale: Option<usize>,
    pub q: Option<f64>,
    /// Threshold applied by filtering, if any.
    pub tau: Option<f64>,
}

impl Tree {
    pub fn n(&self) -> usize {
        self.labels.len()
    }

    pub fn node_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_filtered(&self) -> bool {
        self.tau.is_some()
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n()];
        for e in &self.edges {
            adj[e.a].push(e.b);
            adj[e.b].push(e.a);
        }
        adj
    }

    /// True when the edge set has no cycle.
    pub fn is_acyclic(&self) -> bool {
        let mut uf = UnionFind::new(self.n());
        self.edges.iter().all(|e| uf.union(e.a, e.b))
    }

    /// True when the tree spans every node with exactly `N - 1` edges.
    pub fn is_spanning_tree(&self) -> bool {
        self.edges.len() + 1 == self.n() && self.is_acyclic()
    }

    pub fn total_distance(&self) -> f64 {
        self.edges.iter().map(|e| e.distance).sum()
    }

    fn edge_key(&self, e: &Edge) -> (String, String) {
        let (x, y) = (&self.labels[e.a], &self.labels[e.b]);
        if x <= y {
            (x.clone(), y.clone())
        } else {
            (y.clone(), x.clone())
        }
    }

    /// Unordered label pairs of all edges.
    pub fn edge_set(&self) -> BTreeSet<(String, String)> {
        self.edges.iter().map(|e| self.edge_key(e)).collect()
    }
}

/// Disjoint sets with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    /// Merge the sets of `a` and `b`; false if they were already joined.
    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

/// Kruskal over the complete graph on `labels` with weights `weight(i, j)`.
///
/// Equal weights are ordered by `(min label, max label)`. Returns index pairs
/// `(a, b)` with `a < b`, in acceptance order.
pub fn minimum_spanning_edges(
    labels: &[String],
    weight: impl Fn(usize, usize) -> f64,
) -> Result<Vec<(usize, usize)>> {
    let n = labels.len();
    let mut candidates: Vec<(f64, usize, usize)> = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let w = weight(i, j);
            if !w.is_finite() {
                return Err(Error::NonFiniteDistance {
                    a: labels[i].clone(),
                    b: labels[j].clone(),
                });
            }
            candidates.push((w, i, j));
        }
    }
    let key = |i: usize, j: usize| {
        let (x, y) = (labels[i].as_str(), labels[j].as_str());
        if x <= y {
            (x, y)
        } else {
            (y, x)
        }
    };
    candidates.sort_by(|&(w1, i1, j1), &(w2, i2, j2)| {
        w1.total_cmp(&w2)
            .then_with(|| key(i1, j1).cmp(&key(i2, j2)))
    });
    let mut uf = UnionFind::new(n);
    let mut out = Vec::with_capacity(n.saturating_sub(1));
    for (_, i, j) in candidates {
        if uf.union(i, j) {
            out.push((i, j));
            if out.len() + 1 == n {
                break;
            }
        }
    }
    Ok(out)
}

/// Minimum spanning tree of a distance matrix. Edge `rho` is recovered as
/// `1 - d²/2`.
pub fn kruskal(d: &DistanceMatrix) -> Result<Tree> {
    let n = d.n();
    if n < 2 {
        return Err(Error::invalid("a tree needs at least two nodes"));
    }
    let edges = minimum_spanning_edges(d.labels(), |i, j| d.get(i, j))?
        .into_iter()
        .map(|(a, b)| {
            let distance = d.get(a, b);
            Edge {
                a,
                b,
                distance,
                rho: 1.0 - distance * distance / 2.0,
                significant: true,
            }
        })
        .collect();
    Ok(Tree {
        labels: d.labels().to_vec(),
        edges,
        active: vec![true; n],
        scale: d.scale,
        q: d.q,
        tau: None,
    })
}

/// Minimum spanning tree of the distances derived from `rho`, carrying the
/// exact `ρ` on each edge.
pub fn tree_from_rho(rho: &RhoMatrix) -> Result<Tree> {
    let mut tree = kruskal(&to_distance(rho)?)?;
    for e in &mut tree.edges {
        e.rho = rho.get(e.a, e.b);
    }
    Ok(tree)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TreeMetrics {
    pub nodes: usize,
    pub edges: usize,
    /// Degree of every label (removed nodes have degree 0).
    pub degrees: Vec<usize>,
    pub max_degree: usize,
    pub max_degree_node: Option<String>,
    /// Sizes of connected components among active nodes, largest first.
    pub component_sizes: Vec<usize>,
    /// Mean hop distance over unordered node pairs of the largest component.
    pub average_path_length: Option<f64>,
    pub path_length_convention: &'static str,
    pub total_distance: f64,
}

pub const PATH_LENGTH_CONVENTION: &str = "unweighted hops, largest component, unordered pairs";

pub fn metrics(tree: &Tree) -> TreeMetrics {
    let n = tree.n();
    let adj = tree.adjacency();
    let degrees: Vec<usize> = adj.iter().map(Vec::len).collect();
    let (max_degree, max_degree_node) = degrees
        .iter()
        .enumerate()
        .filter(|&(i, _)| tree.active[i])
        .fold((0, None), |(best, who), (i, &k)| {
            if who.is_none() || k > best {
                (k, Some(i))
            } else {
                (best, who)
            }
        });

    let mut comp = vec![usize::MAX; n];
    let mut components: Vec<Vec<usize>> = Vec::new();
    for start in 0..n {
        if !tree.active[start] || comp[start] != usize::MAX {
            continue;
        }
        let id = components.len();
        let mut members = vec![start];
        comp[start] = id;
        let mut queue = VecDeque::from([start]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = id;
                    members.push(v);
                    queue.push_back(v);
                }
            }
        }
        components.push(members);
    }

    // first largest component in index order
    let largest = components
        .iter()
        .fold(None::<&Vec<usize>>, |best, c| match best {
            Some(b) if b.len() >= c.len() => Some(b),
            _ => Some(c),
        });
    let average_path_length = largest.filter(|c| c.len() >= 2).map(|c| {
        let mut total: u64 = 0;
        let mut dist = vec![usize::MAX; n];
        for &src in c {
            for &m in c {
                dist[m] = usize::MAX;
            }
            dist[src] = 0;
            let mut queue = VecDeque::from([src]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if dist[v] == usize::MAX {
                        dist[v] = dist[u] + 1;
                        total += dist[v] as u64;
                        queue.push_back(v);
                    }
                }
            }
        }
        let k = c.len() as u64;
        // every unordered pair was counted from both ends
        (total / 2) as f64 / (k * (k - 1) / 2) as f64
    });

    let mut component_sizes: Vec<usize> = components.iter().map(Vec::len).collect();
    component_sizes.sort_unstable_by(|a, b| b.cmp(a));

    TreeMetrics {
        nodes: tree.node_count(),
        edges: tree.edge_count(),
        degrees,
        max_degree,
        max_degree_node: max_degree_node.map(|i| tree.labels[i].clone()),
        component_sizes,
        average_path_length,
        path_length_convention: PATH_LENGTH_CONVENTION,
        total_distance: tree.total_distance(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TreeComparison {
    pub common_edges: usize,
    /// `common / union`; 1 when both edge sets are empty.
    pub jaccard: f64,
}

/// Count edges joining the same pair of labels in both trees.
pub fn compare(a: &Tree, b: &Tree) -> TreeComparison {
    let ea = a.edge_set();
    let eb = b.edge_set();
    let common = ea.intersection(&eb).count();
    let union = ea.len() + eb.len() - common;
    TreeComparison {
        common_edges: common,
        jaccard: if union == 0 {
            1.0
        } else {
            common as f64 / union as f64
        },
    }
}
