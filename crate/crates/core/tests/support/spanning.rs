//! Spanning-tree oracles: Prüfer enumeration of every labeled tree and a
//! dense O(N²) Prim.

/// Decode a Prüfer sequence of length `n - 2` into `n - 1` edges.
pub fn prufer_edges(seq: &[usize], n: usize) -> Vec<(usize, usize)> {
    let mut degree = vec![1usize; n];
    for &v in seq {
        degree[v] += 1;
    }
    let mut edges = Vec::with_capacity(n - 1);
    for &v in seq {
        let leaf = (0..n).find(|&u| degree[u] == 1).unwrap();
        edges.push((leaf.min(v), leaf.max(v)));
        degree[leaf] -= 1;
        degree[v] -= 1;
    }
    let rest: Vec<usize> = (0..n).filter(|&u| degree[u] == 1).collect();
    edges.push((rest[0], rest[1]));
    edges
}

/// Call `f` with the edge list of each of the `n^(n-2)` labeled trees.
pub fn for_each_tree(n: usize, mut f: impl FnMut(&[(usize, usize)])) -> usize {
    let len = n - 2;
    let mut seq = vec![0usize; len];
    let mut count = 0;
    loop {
        f(&prufer_edges(&seq, n));
        count += 1;
        let mut k = 0;
        while k < len {
            seq[k] += 1;
            if seq[k] < n {
                break;
            }
            seq[k] = 0;
            k += 1;
        }
        if k == len {
            return count;
        }
    }
}

/// Minimum weight over every labeled spanning tree.
pub fn brute_force_min(d: &[Vec<f64>]) -> f64 {
    let n = d.len();
    let mut best = f64::INFINITY;
    for_each_tree(n, |edges| {
        let w: f64 = edges.iter().map(|&(a, b)| d[a][b]).sum();
        if w < best {
            best = w;
        }
    });
    best
}

/// Prim's algorithm from node 0; edges as sorted `(min, max)` pairs.
pub fn prim(d: &[Vec<f64>]) -> Vec<(usize, usize)> {
    let n = d.len();
    let mut in_tree = vec![false; n];
    let mut best = vec![f64::INFINITY; n];
    let mut parent = vec![usize::MAX; n];
    best[0] = 0.0;
    let mut edges = Vec::new();
    for _ in 0..n {
        let u = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&a, &b| best[a].partial_cmp(&best[b]).unwrap())
            .unwrap();
        in_tree[u] = true;
        if parent[u] != usize::MAX {
            edges.push((u.min(parent[u]), u.max(parent[u])));
        }
        for v in 0..n {
            if !in_tree[v] && d[u][v] < best[v] {
                best[v] = d[u][v];
                parent[v] = u;
            }
        }
    }
    edges.sort();
    edges
}
