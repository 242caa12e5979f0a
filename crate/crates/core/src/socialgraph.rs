//! Per-month interaction graphs and the measures derived from them:
//! neighbourhood overlap, per-user tie-strength, degree / betweenness /
//! eigenvector centrality, and density.
//!
//! Graphs are undirected and unweighted. Two users are connected when
//! they post in the same thread within `window` positions of each other
//! (threads linearised by `(timestamp, post_id)`).

use std::collections::{HashMap, HashSet, VecDeque};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::{CorpusStore, ThreadId, TimeBin, UserId};
use crate::error::{PipelineError, Result};

/// Undirected, unweighted per-bin user graph. Nodes are the bin's active
/// users; isolated nodes are allowed.
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    pub bin_index: usize,
    /// Sorted user ids; local node index = position in this vector.
    pub node_ids: Vec<UserId>,
    /// Sorted local neighbour lists; no self-loops, symmetric.
    pub adj: Vec<Vec<u32>>,
    pub n_edges: usize,
}

impl InteractionGraph {
    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn local_index(&self, u: UserId) -> Option<usize> {
        self.node_ids.binary_search(&u).ok()
    }

    pub fn degree(&self, local: usize) -> usize {
        self.adj[local].len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.adj[a].binary_search(&(b as u32)).is_ok()
    }

    /// Build a graph from an explicit edge list; nodes are deduplicated
    /// and sorted, self-loops dropped.
    pub fn from_edges(bin_index: usize, nodes: &[UserId], edges: &[(UserId, UserId)]) -> Self {
        let mut node_ids: Vec<UserId> = nodes.to_vec();
        node_ids.sort_unstable();
        node_ids.dedup();
        let index: HashMap<UserId, usize> =
            node_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); node_ids.len()];
        let mut seen: HashSet<(usize, usize)> = HashSet::new();
        for &(a, b) in edges {
            if a == b {
                continue;
            }
            let (ia, ib) = (index[&a], index[&b]);
            let key = (ia.min(ib), ia.max(ib));
            if seen.insert(key) {
                adj[ia].push(ib as u32);
                adj[ib].push(ia as u32);
            }
        }
        for l in &mut adj {
            l.sort_unstable();
        }
        let n_edges = seen.len();
        InteractionGraph {
            bin_index,
            node_ids,
            adj,
            n_edges,
        }
    }
}

/// Per-user tie-strength values for one bin, aligned with the graph's
/// sorted node ids. Values are in `[0, 1]`; isolated nodes get 0.
#[derive(Debug, Clone)]
pub struct TieStrengthMap {
    pub bin_index: usize,
    pub users: Vec<UserId>,
    pub values: Vec<f64>,
}

impl TieStrengthMap {
    pub fn get(&self, u: UserId) -> Option<f64> {
        self.users.binary_search(&u).ok().map(|i| self.values[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (UserId, f64)> + '_ {
        self.users.iter().copied().zip(self.values.iter().copied())
    }
}

/// Degree, betweenness and eigenvector centrality per user, aligned with
/// the graph's sorted node ids.
#[derive(Debug, Clone)]
pub struct CentralityMap {
    pub bin_index: usize,
    pub users: Vec<UserId>,
    /// deg(u) / (|V| - 1).
    pub degree: Vec<f64>,
    /// Brandes, unnormalised pair counts, endpoints excluded.
    pub betweenness: Vec<f64>,
    /// L2-normalised principal eigenvector; isolated nodes 0.
    pub eigenvector: Vec<f64>,
    pub eigenvector_converged: bool,
}

impl CentralityMap {
    pub fn index_of(&self, u: UserId) -> Option<usize> {
        self.users.binary_search(&u).ok()
    }
}

#[derive(Debug, Clone)]
pub struct CentralityOptions {
    /// Above this node count, betweenness switches to pivot sampling.
    pub approx_node_threshold: usize,
    pub approx_pivots: usize,
    pub seed: u64,
    pub eigen_tolerance: f64,
    pub eigen_max_iter: usize,
}

impl Default for CentralityOptions {
    fn default() -> Self {
        CentralityOptions {
            approx_node_threshold: 20_000,
            approx_pivots: 2_000,
            seed: 0,
            eigen_tolerance: 1e-6,
            eigen_max_iter: 1000,
        }
    }
}

/// Build the interaction graph of one bin: an edge (u, v) exists iff some
/// post by u and some post by v in the same thread are at most `window`
/// positions apart in the thread's `(timestamp, post_id)` order.
pub fn build_interaction_graph(store: &CorpusStore, bin: &TimeBin, window: usize) -> InteractionGraph {
    let posts = store.posts_in(bin);

    let mut node_ids: Vec<UserId> = bin.active_users.clone();
    node_ids.sort_unstable();
    let index: HashMap<UserId, usize> =
        node_ids.iter().enumerate().map(|(i, &u)| (u, i)).collect();

    // Posts are already globally sorted by (timestamp, post_id), so the
    // per-thread sequences inherit that order.
    let mut by_thread: HashMap<ThreadId, Vec<u32>> = HashMap::new();
    for p in posts {
        by_thread
            .entry(p.thread)
            .or_default()
            .push(index[&p.author] as u32);
    }

    let mut edges: HashSet<(u32, u32)> = HashSet::new();
    for seq in by_thread.values() {
        for i in 0..seq.len() {
            let hi = (i + window).min(seq.len().saturating_sub(1));
            for j in (i + 1)..=hi {
                let (a, b) = (seq[i], seq[j]);
                if a != b {
                    edges.insert((a.min(b), a.max(b)));
                }
            }
        }
    }

    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); node_ids.len()];
    for &(a, b) in &edges {
        adj[a as usize].push(b);
        adj[b as usize].push(a);
    }
    for l in &mut adj {
        l.sort_unstable();
    }

    InteractionGraph {
        bin_index: bin.index,
        node_ids,
        adj,
        n_edges: edges.len(),
    }
}

fn sorted_intersection_count(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}

pub(crate) fn overlap_local(g: &InteractionGraph, a: usize, b: usize) -> f64 {
    let n = sorted_intersection_count(&g.adj[a], &g.adj[b]) as f64;
    let denom = (g.degree(a) as f64 - 1.0) + (g.degree(b) as f64 - 1.0) - n;
    if denom <= 0.0 {
        // Both endpoints degree-1: no shared neighbourhood evidence.
        0.0
    } else {
        n / denom
    }
}

/// Neighbourhood overlap of an existing edge (i, j):
/// `n_ij / ((k_i - 1) + (k_j - 1) - n_ij)`.
pub fn neighborhood_overlap(g: &InteractionGraph, i: UserId, j: UserId) -> Result<f64> {
    let missing = || PipelineError::NoSuchEdge {
        a: format!("{:?}", i),
        b: format!("{:?}", j),
    };
    let a = g.local_index(i).ok_or_else(missing)?;
    let b = g.local_index(j).ok_or_else(missing)?;
    if !g.has_edge(a, b) {
        return Err(missing());
    }
    Ok(overlap_local(g, a, b))
}

/// Tie-strength of every node: the maximum overlap over incident edges;
/// isolated nodes get 0.
pub fn tie_strength(g: &InteractionGraph) -> TieStrengthMap {
    let n = g.n_nodes();
    let mut values = vec![0.0f64; n];
    for a in 0..n {
        for &b in &g.adj[a] {
            let b = b as usize;
            if b <= a {
                continue;
            }
            let o = overlap_local(g, a, b);
            if o > values[a] {
                values[a] = o;
            }
            if o > values[b] {
                values[b] = o;
            }
        }
    }
    TieStrengthMap {
        bin_index: g.bin_index,
        users: g.node_ids.clone(),
        values,
    }
}

/// Brandes' betweenness from the given source set; `scale` multiplies the
/// accumulated dependencies (1.0 for exact, n/#pivots for sampling).
fn brandes_accumulate(g: &InteractionGraph, sources: &[usize], scale: f64) -> Vec<f64> {
    let n = g.n_nodes();
    let mut betw = vec![0.0f64; n];
    let mut sigma = vec![0.0f64; n];
    let mut dist = vec![-1i32; n];
    let mut delta = vec![0.0f64; n];
    let mut pred: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut stack: Vec<u32> = Vec::with_capacity(n);
    let mut queue: VecDeque<u32> = VecDeque::new();

    for &s in sources {
        sigma.fill(0.0);
        dist.fill(-1);
        delta.fill(0.0);
        for p in &mut pred {
            p.clear();
        }
        stack.clear();

        sigma[s] = 1.0;
        dist[s] = 0;
        queue.push_back(s as u32);
        while let Some(v) = queue.pop_front() {
            stack.push(v);
            let dv = dist[v as usize];
            for &w in &g.adj[v as usize] {
                let wi = w as usize;
                if dist[wi] < 0 {
                    dist[wi] = dv + 1;
                    queue.push_back(w);
                }
                if dist[wi] == dv + 1 {
                    sigma[wi] += sigma[v as usize];
                    pred[wi].push(v);
                }
            }
        }
        while let Some(w) = stack.pop() {
            let wi = w as usize;
            let coeff = (1.0 + delta[wi]) / sigma[wi];
            for &v in &pred[wi] {
                delta[v as usize] += sigma[v as usize] * coeff;
            }
            if wi != s {
                betw[wi] += delta[wi] * scale;
            }
        }
    }
    betw
}

/// Exact Brandes betweenness (each unordered pair counted once).
pub fn betweenness(g: &InteractionGraph) -> Vec<f64> {
    let sources: Vec<usize> = (0..g.n_nodes()).collect();
    let mut b = brandes_accumulate(g, &sources, 1.0);
    for v in &mut b {
        *v /= 2.0;
    }
    b
}

/// Pivot-sampled Brandes betweenness; deterministic per seed.
pub fn betweenness_sampled(g: &InteractionGraph, pivots: usize, seed: u64) -> Vec<f64> {
    let n = g.n_nodes();
    let k = pivots.min(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sources: Vec<usize> = sample(&mut rng, n, k).into_iter().collect();
    sources.sort_unstable();
    let scale = n as f64 / k as f64;
    let mut b = brandes_accumulate(g, &sources, scale);
    for v in &mut b {
        *v /= 2.0;
    }
    b
}

/// Power iteration for the principal eigenvector. Iterates on `A + I`
/// (same principal eigenvector as `A` for a non-negative adjacency, and
/// the shift damps the oscillation of bipartite-like spectra). Returns
/// the L2-normalised vector and whether the tolerance was reached.
pub fn eigenvector_centrality(g: &InteractionGraph, tol: f64, max_iter: usize) -> (Vec<f64>, bool) {
    let n = g.n_nodes();
    if n == 0 {
        return (Vec::new(), true);
    }
    let non_isolated: Vec<usize> = (0..n).filter(|&v| !g.adj[v].is_empty()).collect();
    if non_isolated.is_empty() {
        return (vec![0.0; n], true);
    }
    let init = 1.0 / (non_isolated.len() as f64).sqrt();
    let mut x = vec![0.0f64; n];
    for &v in &non_isolated {
        x[v] = init;
    }
    let mut next = vec![0.0f64; n];
    for _ in 0..max_iter {
        for v in 0..n {
            let mut acc = x[v]; // the +I shift
            for &w in &g.adj[v] {
                acc += x[w as usize];
            }
            next[v] = acc;
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            return (vec![0.0; n], true);
        }
        for v in &mut next {
            *v /= norm;
        }
        let diff = x
            .iter()
            .zip(next.iter())
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        std::mem::swap(&mut x, &mut next);
        if diff < tol {
            return (x, true);
        }
    }
    (x, false)
}

/// All three centralities for one graph.
pub fn centralities(g: &InteractionGraph, opts: &CentralityOptions) -> CentralityMap {
    let n = g.n_nodes();
    let degree: Vec<f64> = if n >= 2 {
        (0..n).map(|v| g.degree(v) as f64 / (n as f64 - 1.0)).collect()
    } else {
        vec![0.0; n]
    };
    let betw = if n > opts.approx_node_threshold {
        betweenness_sampled(g, opts.approx_pivots, opts.seed)
    } else {
        betweenness(g)
    };
    let (eig, converged) = eigenvector_centrality(g, opts.eigen_tolerance, opts.eigen_max_iter);
    CentralityMap {
        bin_index: g.bin_index,
        users: g.node_ids.clone(),
        degree,
        betweenness: betw,
        eigenvector: eig,
        eigenvector_converged: converged,
    }
}

/// `2|E| / (|V| (|V|-1))`; 0 when fewer than two nodes.
pub fn graph_density(g: &InteractionGraph) -> f64 {
    let n = g.n_nodes() as f64;
    if n < 2.0 {
        return 0.0;
    }
    2.0 * g.n_edges as f64 / (n * (n - 1.0))
}

/// Probability mass per half-open interval `[k*w, (k+1)*w)`, last bin
/// closed at 1.0. Empty input yields an empty histogram.
pub fn tie_strength_histogram(values: &[f64], bin_width: f64) -> Vec<f64> {
    assert!(bin_width > 0.0 && bin_width <= 1.0);
    if values.is_empty() {
        return Vec::new();
    }
    let n_bins = (1.0 / bin_width).ceil() as usize;
    let mut mass = vec![0.0f64; n_bins];
    for &v in values {
        let idx = ((v / bin_width).floor() as usize).min(n_bins - 1);
        mass[idx] += 1.0;
    }
    let total = values.len() as f64;
    for m in &mut mass {
        *m /= total;
    }
    mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ingest_lines, IngestConfig};

    fn u(i: u32) -> UserId {
        UserId(i)
    }

    fn graph(n: u32, edges: &[(u32, u32)]) -> InteractionGraph {
        let nodes: Vec<UserId> = (0..n).map(u).collect();
        let edges: Vec<(UserId, UserId)> = edges.iter().map(|&(a, b)| (u(a), u(b))).collect();
        InteractionGraph::from_edges(0, &nodes, &edges)
    }

    /// Build a store whose single bin holds one thread with the given
    /// author sequence (timestamps strictly increasing).
    fn thread_store(authors: &[&str]) -> CorpusStore {
        let base = 1296518400i64; // 2011-02 UTC
        let lines: Vec<String> = authors
            .iter()
            .enumerate()
            .map(|(i, a)| {
                format!(
                    r#"{{"id":"p{i:03}","author":"{a}","link_id":"t3_x","created_utc":{},"body":"hello"}}"#,
                    base + i as i64
                )
            })
            .collect();
        let cfg = IngestConfig {
            min_active_users: 1,
            ..Default::default()
        };
        ingest_lines(lines, &cfg).unwrap().0
    }

    fn edge_set(store: &CorpusStore, g: &InteractionGraph) -> HashSet<(String, String)> {
        let mut out = HashSet::new();
        for a in 0..g.n_nodes() {
            for &b in &g.adj[a] {
                let b = b as usize;
                if b > a {
                    let mut pair = [
                        store.user_name(g.node_ids[a]).to_string(),
                        store.user_name(g.node_ids[b]).to_string(),
                    ];
                    pair.sort();
                    out.insert((pair[0].clone(), pair[1].clone()));
                }
            }
        }
        out
    }

    fn pair(a: &str, b: &str) -> (String, String) {
        let mut p = [a.to_string(), b.to_string()];
        p.sort();
        (p[0].clone(), p[1].clone())
    }

    #[test]
    fn window_two_links_all_pairs_in_short_thread() {
        let store = thread_store(&["a", "b", "c"]);
        let g = build_interaction_graph(&store, &store.bins[0], 2);
        let edges = edge_set(&store, &g);
        assert_eq!(
            edges,
            HashSet::from([pair("a", "b"), pair("a", "c"), pair("b", "c")])
        );
    }

    #[test]
    fn window_two_excludes_distance_three() {
        let store = thread_store(&["a", "b", "c", "d"]);
        let g = build_interaction_graph(&store, &store.bins[0], 2);
        let edges = edge_set(&store, &g);
        let expected = HashSet::from([
            pair("a", "b"),
            pair("a", "c"),
            pair("b", "c"),
            pair("b", "d"),
            pair("c", "d"),
        ]);
        assert_eq!(edges, expected);
    }

    #[test]
    fn no_self_loops() {
        let store = thread_store(&["a", "a", "a"]);
        let g = build_interaction_graph(&store, &store.bins[0], 2);
        assert_eq!(g.n_edges, 0);
    }

    #[test]
    fn overlap_examples() {
        // Path a-b-c: edge (a,b) has no common neighbours.
        let path = graph(3, &[(0, 1), (1, 2)]);
        assert_eq!(neighborhood_overlap(&path, u(0), u(1)).unwrap(), 0.0);

        // Triangle: identical neighbourhoods.
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(neighborhood_overlap(&tri, u(0), u(1)).unwrap(), 1.0);

        // {a-b, a-c, b-c, b-d}: O(a,b) = 1 / (1 + 2 - 1) = 0.5.
        let g = graph(4, &[(0, 1), (0, 2), (1, 2), (1, 3)]);
        assert_eq!(neighborhood_overlap(&g, u(0), u(1)).unwrap(), 0.5);

        assert!(neighborhood_overlap(&g, u(2), u(3)).is_err());
    }

    #[test]
    fn tie_strength_max_and_isolated() {
        // Triangle {0,1,2} plus pendant edge (1,3); node 4 isolated.
        // Edge (0,1): n=1, (k0-1)+(k1-1)-n = 1+2-1 -> 0.5, node 1's best.
        // Edge (0,2): n=1, 1+1-1 -> 1.0, node 0's best.
        let g = graph(5, &[(0, 1), (1, 2), (0, 2), (1, 3)]);
        let ts = tie_strength(&g);
        assert_eq!(ts.get(u(1)).unwrap(), 0.5);
        assert_eq!(ts.get(u(0)).unwrap(), 1.0);
        assert_eq!(ts.get(u(4)).unwrap(), 0.0);
        // Degree-1 node 3: its only edge has a common neighbour count 0
        // vs node 1's neighbours? adj(3)={1}, adj(1)={0,2,3}, n=0 -> 0/(0+2-0)=0.
        assert_eq!(ts.get(u(3)).unwrap(), 0.0);
    }

    #[test]
    fn star_and_path_centralities() {
        let star = graph(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let c = centralities(&star, &CentralityOptions::default());
        assert_eq!(c.degree[0], 1.0);
        assert_eq!(c.degree[1], 0.25);

        let path = graph(3, &[(0, 1), (1, 2)]);
        let c = centralities(&path, &CentralityOptions::default());
        assert!((c.betweenness[1] - 1.0).abs() < 1e-12);
        assert_eq!(c.betweenness[0], 0.0);
        assert_eq!(c.betweenness[2], 0.0);
    }

    #[test]
    fn density_examples() {
        let tri = graph(3, &[(0, 1), (1, 2), (0, 2)]);
        assert_eq!(graph_density(&tri), 1.0);
        let empty = graph(3, &[]);
        assert_eq!(graph_density(&empty), 0.0);
        let single = graph(1, &[]);
        assert_eq!(graph_density(&single), 0.0);
    }

    #[test]
    fn histogram_masses() {
        let h = tie_strength_histogram(&[0.05, 0.05, 0.95, 1.0], 0.1);
        assert_eq!(h.len(), 10);
        assert_eq!(h[0], 0.5);
        assert_eq!(h[9], 0.5);
        assert!(h[1..9].iter().all(|&m| m == 0.0));

        let zeros = tie_strength_histogram(&[0.0, 0.0], 0.1);
        assert_eq!(zeros[0], 1.0);

        assert!(tie_strength_histogram(&[], 0.1).is_empty());
    }

    #[test]
    fn eigenvector_isolated_zero_and_normalised() {
        let g = graph(4, &[(0, 1), (1, 2), (0, 2)]);
        let (eig, ok) = eigenvector_centrality(&g, 1e-10, 2000);
        assert!(ok);
        assert_eq!(eig[3], 0.0);
        let norm: f64 = eig.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((norm - 1.0).abs() < 1e-9);
        // Triangle symmetry.
        assert!((eig[0] - eig[1]).abs() < 1e-6);
    }
}
