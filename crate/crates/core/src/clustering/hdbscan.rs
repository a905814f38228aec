//! HDBSCAN: mutual-reachability MST, single-linkage hierarchy, condensed tree
//! and excess-of-mass cluster selection.
//!
//! Merges that happen at exactly the same mutual-reachability distance are
//! collapsed into one multi-way node before condensing. The hierarchy is then a
//! function of the threshold-graph components alone, so the result does not
//! depend on which of several equal-weight spanning trees was found. Ties are
//! common here because the clusterer is fed samples drawn with replacement.

use std::collections::{BTreeMap, HashMap, VecDeque};

use super::Matrix;
use crate::error::{Error, Result};

/// Label of rows that belong to no selected cluster.
pub const NOISE: i32 = -1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HdbscanParams {
    pub min_cluster_size: usize,
    /// Neighbour rank for core distances; the point itself counts as the first neighbour.
    pub min_samples: usize,
    /// Pairwise distances are divided by `alpha` before taking the mutual-reachability max.
    pub alpha: f64,
}

impl Default for HdbscanParams {
    fn default() -> Self {
        Self {
            min_cluster_size: 5,
            min_samples: 5,
            alpha: 1.0,
        }
    }
}

/// One row of the condensed tree. Children below `n` are data points, the rest clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct CondensedEdge {
    pub parent: usize,
    pub child: usize,
    pub lambda: f64,
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    pub data: Matrix,
    /// Per row: cluster id `>= 0` or [`NOISE`].
    pub labels: Vec<i32>,
    pub core_distances: Vec<f64>,
    pub params: HdbscanParams,
    /// Condensed hierarchy; cluster ids start at `n` (the root).
    pub condensed_tree: Vec<CondensedEdge>,
    /// Raw stability per condensed cluster, indexed by `id - n`.
    pub stability: Vec<f64>,
    /// Condensed cluster ids chosen as flat clusters; label `i` is `selected[i]`.
    pub selected: Vec<usize>,
}

impl ClusterModel {
    pub fn num_clusters(&self) -> usize {
        self.selected.len()
    }

    pub fn num_rows(&self) -> usize {
        self.labels.len()
    }
}

pub fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for (x, y) in a.iter().zip(b) {
        let d = x - y;
        s += d * d;
    }
    s.sqrt()
}

/// Full symmetric Euclidean distance matrix, `n × n` row-major.
///
/// Each entry is bit-identical to [`euclidean`] on the same pair: the
/// per-pair accumulation order over dimensions is unchanged, only pairs are
/// processed side by side.
fn pairwise_distances(data: &Matrix) -> Vec<f64> {
    let (n, d) = (data.rows(), data.cols());
    let mut cols = vec![0.0; n * d];
    for i in 0..n {
        for (k, v) in data.row(i).iter().enumerate() {
            cols[k * n + i] = *v;
        }
    }
    const BLOCK: usize = 8;
    let mut dist = vec![0.0; n * n];
    for i in 0..n {
        let mut j = i + 1;
        while j < n {
            let width = BLOCK.min(n - j);
            let mut acc = [0.0f64; BLOCK];
            for k in 0..d {
                let base = k * n;
                let xi = cols[base + i];
                for (a, x) in acc[..width].iter_mut().zip(&cols[base + j..base + j + width]) {
                    let t = x - xi;
                    *a += t * t;
                }
            }
            for (off, a) in acc[..width].iter().enumerate() {
                let v = a.sqrt();
                dist[i * n + j + off] = v;
                dist[(j + off) * n + i] = v;
            }
            j += width;
        }
    }
    dist
}

/// Distance from each row to its `k`-th nearest neighbour, the row itself included.
fn core_distances_plain(dist: &[f64], n: usize, k: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            let mut row = dist[i * n..(i + 1) * n].to_vec();
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

/// Pairwise mutual-reachability distances `max(core(a), core(b), d(a, b))`.
pub fn mutual_reachability(data: &Matrix, min_samples: usize) -> Result<Matrix> {
    let n = data.rows();
    if min_samples == 0 {
        return Err(Error::Contract("min_samples must be at least 1".into()));
    }
    if n < min_samples {
        return Err(Error::Contract(format!(
            "{n} rows is fewer than min_samples = {min_samples}"
        )));
    }
    let dist = pairwise_distances(data);
    let core = core_distances_plain(&dist, n, min_samples);
    let mut out = Matrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let v = if i == j { 0.0 } else { core[i].max(core[j]).max(dist[i * n + j]) };
            out.set(i, j, v);
        }
    }
    Ok(out)
}

/// Groups bit-identical rows. Returns `(members per unique row, unique index per row)`.
fn group_duplicates(data: &Matrix) -> (Vec<Vec<usize>>, Vec<usize>) {
    let mut index: HashMap<Vec<u64>, usize> = HashMap::with_capacity(data.rows());
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut owner = Vec::with_capacity(data.rows());
    for i in 0..data.rows() {
        let key: Vec<u64> = data.row(i).iter().map(|v| v.to_bits()).collect();
        let u = *index.entry(key).or_insert_with(|| {
            members.push(Vec::new());
            members.len() - 1
        });
        members[u].push(i);
        owner.push(u);
    }
    (members, owner)
}

struct Node {
    children: Vec<usize>,
    size: usize,
    height: f64,
}

struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) -> usize {
        let (a, b) = (self.find(a), self.find(b));
        if a == b {
            return a;
        }
        let (hi, lo) = if self.rank[a] >= self.rank[b] { (a, b) } else { (b, a) };
        self.parent[lo] = hi;
        if self.rank[hi] == self.rank[lo] {
            self.rank[hi] += 1;
        }
        hi
    }
}

/// Spanning tree of the mutual-reachability graph plus per-row core distances.
///
/// With `dedup`, bit-identical rows are collapsed first: copies of a row are
/// joined by star edges at their core distance (no edge leaving a copy can be
/// lighter), and Prim runs over the unique rows only.
fn spanning_tree(data: &Matrix, params: &HdbscanParams, dedup: bool) -> (Vec<(usize, usize, f64)>, Vec<f64>) {
    let n = data.rows();
    let k = params.min_samples.min(n);
    let (members, owner) = if dedup {
        group_duplicates(data)
    } else {
        ((0..n).map(|i| vec![i]).collect(), (0..n).collect())
    };
    let m = members.len();
    let reps: Vec<usize> = members.iter().map(|g| g[0]).collect();
    let unique = if m == n {
        data.clone()
    } else {
        Matrix::from_rows(&reps.iter().map(|&r| data.row(r)).collect::<Vec<_>>())
            .expect("rows share width")
    };
    let dist = pairwise_distances(&unique);

    // Core distance with multiplicities: the row's own copies sit at distance 0.
    let mult: Vec<usize> = members.iter().map(Vec::len).collect();
    let mut best: Vec<f64> = Vec::with_capacity(k);
    let core_u: Vec<f64> = (0..m)
        .map(|i| {
            if mult[i] >= k {
                return 0.0;
            }
            let need = k - mult[i];
            best.clear();
            let mut worst = f64::INFINITY;
            let row = &dist[i * m..(i + 1) * m];
            for (j, &d) in row.iter().enumerate() {
                if d >= worst || j == i {
                    continue;
                }
                for _ in 0..mult[j].min(need) {
                    let pos = best.partition_point(|b| *b <= d);
                    if best.len() == need {
                        if pos == need {
                            break;
                        }
                        best.pop();
                    }
                    best.insert(pos, d);
                }
                if best.len() == need {
                    worst = best[need - 1];
                }
            }
            best[need - 1]
        })
        .collect();

    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for (u, group) in members.iter().enumerate() {
        for &p in &group[1..] {
            edges.push((group[0], p, core_u[u]));
        }
    }
    // Prim over the vertices not yet in the tree, kept compact by swap-removal.
    let mut remaining: Vec<usize> = (1..m).collect();
    let mut best_w = vec![f64::INFINITY; m];
    let mut best_from = vec![0usize; m];
    let mut current = 0;
    let alpha = params.alpha;
    while !remaining.is_empty() {
        let row = &dist[current * m..(current + 1) * m];
        let core_c = core_u[current];
        let mut pick = 0;
        let mut pick_w = f64::INFINITY;
        for (slot, &v) in remaining.iter().enumerate() {
            let d = if alpha == 1.0 { row[v] } else { row[v] / alpha };
            let w = core_c.max(core_u[v]).max(d);
            if w < best_w[v] {
                best_w[v] = w;
                best_from[v] = current;
            }
            if best_w[v] < pick_w || slot == 0 {
                pick = slot;
                pick_w = best_w[v];
            }
        }
        let next = remaining.swap_remove(pick);
        edges.push((reps[best_from[next]], reps[next], pick_w));
        current = next;
    }
    let core = owner.iter().map(|&u| core_u[u]).collect();
    (edges, core)
}

/// Single-linkage hierarchy with equal-height merges collapsed. The root is the last node.
fn build_hierarchy(n: usize, mut edges: Vec<(usize, usize, f64)>) -> Vec<Node> {
    edges.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut nodes: Vec<Node> = (0..n)
        .map(|_| Node {
            children: Vec::new(),
            size: 1,
            height: 0.0,
        })
        .collect();
    let mut uf = UnionFind::new(n);
    let mut comp_node: Vec<usize> = (0..n).collect();
    let mut start = 0;
    while start < edges.len() {
        let w = edges[start].2;
        let mut end = start;
        while end < edges.len() && edges[end].2 == w {
            end += 1;
        }
        let mut pending: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for &(a, b, _) in &edges[start..end] {
            let (ra, rb) = (uf.find(a), uf.find(b));
            if ra == rb {
                continue;
            }
            let mut kids = pending.remove(&ra).unwrap_or_else(|| vec![comp_node[ra]]);
            kids.extend(pending.remove(&rb).unwrap_or_else(|| vec![comp_node[rb]]));
            let r = uf.union(ra, rb);
            pending.insert(r, kids);
        }
        for (root, mut kids) in pending {
            kids.sort_unstable();
            let size = kids.iter().map(|&c| nodes[c].size).sum();
            comp_node[root] = nodes.len();
            nodes.push(Node {
                children: kids,
                size,
                height: w,
            });
        }
        start = end;
    }
    nodes
}

fn lambda_of(height: f64) -> f64 {
    if height > 0.0 {
        1.0 / height
    } else {
        f64::INFINITY
    }
}

fn collect_leaves(nodes: &[Node], id: usize, out: &mut Vec<usize>) {
    let mut stack = vec![id];
    while let Some(x) = stack.pop() {
        if nodes[x].children.is_empty() {
            out.push(x);
        } else {
            stack.extend(nodes[x].children.iter().rev());
        }
    }
}

fn condense(nodes: &[Node], n: usize, min_cluster_size: usize) -> Vec<CondensedEdge> {
    let mut tree = Vec::new();
    let mut next_cluster = n + 1;
    let mut queue = VecDeque::from([(nodes.len() - 1, n)]);
    let mut leaves = Vec::new();
    while let Some((mut node, cluster)) = queue.pop_front() {
        loop {
            let current = &nodes[node];
            if current.children.is_empty() {
                // Only reachable when the whole dataset is a single point.
                tree.push(CondensedEdge { parent: cluster, child: node, lambda: f64::INFINITY, size: 1 });
                break;
            }
            let lambda = lambda_of(current.height);
            let big: Vec<usize> = current
                .children
                .iter()
                .copied()
                .filter(|&c| nodes[c].size >= min_cluster_size)
                .collect();
            let mut fall_out = |child: usize, tree: &mut Vec<CondensedEdge>| {
                leaves.clear();
                collect_leaves(nodes, child, &mut leaves);
                for &p in leaves.iter() {
                    tree.push(CondensedEdge { parent: cluster, child: p, lambda, size: 1 });
                }
            };
            if big.len() >= 2 {
                for &c in &current.children {
                    if nodes[c].size >= min_cluster_size {
                        tree.push(CondensedEdge {
                            parent: cluster,
                            child: next_cluster,
                            lambda,
                            size: nodes[c].size,
                        });
                        queue.push_back((c, next_cluster));
                        next_cluster += 1;
                    } else {
                        fall_out(c, &mut tree);
                    }
                }
                break;
            } else if big.len() == 1 {
                for &c in &current.children {
                    if c != big[0] {
                        fall_out(c, &mut tree);
                    }
                }
                node = big[0];
            } else {
                for &c in &current.children {
                    fall_out(c, &mut tree);
                }
                break;
            }
        }
    }
    tree
}

/// Excess-of-mass selection, root excluded. Returns `(raw stabilities, selected ids)`.
fn select_clusters(tree: &[CondensedEdge], n: usize) -> (Vec<f64>, Vec<usize>) {
    let num = tree
        .iter()
        .filter(|e| e.child >= n)
        .map(|e| e.child - n + 1)
        .max()
        .unwrap_or(1);
    let mut birth = vec![0.0; num];
    let mut parent = vec![usize::MAX; num];
    let mut children: Vec<Vec<usize>> = vec![Vec::new(); num];
    for e in tree.iter().filter(|e| e.child >= n) {
        birth[e.child - n] = e.lambda;
        parent[e.child - n] = e.parent - n;
        children[e.parent - n].push(e.child - n);
    }
    let mut stability = vec![0.0; num];
    for e in tree {
        stability[e.parent - n] += (e.lambda - birth[e.parent - n]) * e.size as f64;
    }
    let raw = stability.clone();
    let mut selected = vec![false; num];
    for c in (1..num).rev() {
        let subtree: f64 = children[c].iter().map(|&k| stability[k]).sum();
        if !children[c].is_empty() && subtree > stability[c] {
            stability[c] = subtree;
        } else {
            selected[c] = true;
            let mut stack = children[c].clone();
            while let Some(d) = stack.pop() {
                selected[d] = false;
                stack.extend(children[d].iter().copied());
            }
        }
    }
    let chosen = (1..num).filter(|&c| selected[c]).map(|c| c + n).collect();
    (raw, chosen)
}

fn label_points(tree: &[CondensedEdge], n: usize, selected: &[usize]) -> Vec<i32> {
    let mut cluster_parent: HashMap<usize, usize> = HashMap::new();
    let mut point_parent = vec![n; n];
    for e in tree {
        if e.child >= n {
            cluster_parent.insert(e.child, e.parent);
        } else {
            point_parent[e.child] = e.parent;
        }
    }
    let label_of: HashMap<usize, i32> = selected.iter().enumerate().map(|(i, &c)| (c, i as i32)).collect();
    point_parent
        .iter()
        .map(|&start| {
            let mut c = start;
            loop {
                if let Some(&l) = label_of.get(&c) {
                    return l;
                }
                match cluster_parent.get(&c) {
                    Some(&p) => c = p,
                    None => return NOISE,
                }
            }
        })
        .collect()
}

/// Fits HDBSCAN (Euclidean metric) and labels every row.
pub fn fit_hdbscan(data: &Matrix, params: HdbscanParams) -> Result<ClusterModel> {
    fit_impl(data, params, true)
}

pub(crate) fn fit_impl(data: &Matrix, params: HdbscanParams, dedup: bool) -> Result<ClusterModel> {
    let n = data.rows();
    if n < 2 {
        return Err(Error::Contract("HDBSCAN needs at least 2 rows".into()));
    }
    if params.min_cluster_size < 2 {
        return Err(Error::Config("min_cluster_size must be at least 2".into()));
    }
    if params.min_samples == 0 {
        return Err(Error::Config("min_samples must be at least 1".into()));
    }
    if !(params.alpha > 0.0 && params.alpha.is_finite()) {
        return Err(Error::Config("alpha must be positive".into()));
    }
    if !data.is_finite() {
        return Err(Error::NonFinite("clustering input".into()));
    }
    let (edges, core_distances) = spanning_tree(data, &params, dedup);
    let all_identical = edges.iter().all(|e| e.2 == 0.0);
    let nodes = build_hierarchy(n, edges);
    let condensed_tree = condense(&nodes, n, params.min_cluster_size);
    let (stability, mut selected) = select_clusters(&condensed_tree, n);
    let labels = if all_identical && n >= params.min_cluster_size {
        // Degenerate: a single indivisible blob is one cluster.
        selected = vec![n];
        vec![0; n]
    } else {
        label_points(&condensed_tree, n, &selected)
    };
    Ok(ClusterModel {
        data: data.clone(),
        labels,
        core_distances,
        params,
        condensed_tree,
        stability,
        selected,
    })
}
