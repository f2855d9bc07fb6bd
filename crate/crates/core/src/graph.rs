//! Undirected weighted graphs, random graph models and Laplacian shift operators.

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of fresh attempts a rejection-sampled generator gets before giving up
/// on producing a connected graph.
pub const MAX_GENERATION_ATTEMPTS: usize = 100;

/// A connected, undirected, weighted graph on vertices `0..n`.
///
/// Edges are stored once as `(u, v, w)` with `u < v`, sorted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GraphDoc", into = "GraphDoc")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    n: usize,
    edges: Vec<(usize, usize, f64)>,
}

impl TryFrom<GraphDoc> for Graph {
    type Error = Error;

    fn try_from(doc: GraphDoc) -> Result<Self> {
        Graph::new(doc.n, doc.edges)
    }
}

impl From<Graph> for GraphDoc {
    fn from(g: Graph) -> Self {
        GraphDoc {
            n: g.n,
            edges: g.edges,
        }
    }
}

/// Which Laplacian variant plays the role of the shift operator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShiftOperatorKind {
    /// `D − W`
    #[default]
    Combinatorial,
    /// `I − D^{-1/2} W D^{-1/2}`
    Normalized,
}

impl ShiftOperatorKind {
    pub fn name(self) -> &'static str {
        match self {
            ShiftOperatorKind::Combinatorial => "combinatorial",
            ShiftOperatorKind::Normalized => "normalized",
        }
    }
}

impl std::fmt::Display for ShiftOperatorKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl Graph {
    /// Builds a graph from an edge list, normalising each edge to `u < v`.
    ///
    /// Rejects self-loops, duplicate edges, non-positive or non-finite
    /// weights, out-of-range endpoints and disconnected graphs.
    pub fn new(n: usize, edges: Vec<(usize, usize, f64)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter(
                "graph needs at least one vertex".into(),
            ));
        }
        let mut seen = BTreeSet::new();
        let mut normalized = Vec::with_capacity(edges.len());
        for (a, b, w) in edges {
            if a >= n || b >= n {
                return Err(Error::VertexOutOfRange {
                    vertex: a.max(b),
                    n,
                });
            }
            if a == b {
                return Err(Error::InvalidParameter(format!("self-loop at vertex {a}")));
            }
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "edge ({a}, {b}) has non-positive weight {w}"
                )));
            }
            let (u, v) = if a < b { (a, b) } else { (b, a) };
            if !seen.insert((u, v)) {
                return Err(Error::InvalidParameter(format!(
                    "duplicate edge ({u}, {v})"
                )));
            }
            normalized.push((u, v, w));
        }
        normalized.sort_by_key(|e| (e.0, e.1));
        if !is_connected(n, normalized.iter().map(|&(u, v, _)| (u, v))) {
            return Err(Error::Disconnected);
        }
        Ok(Graph {
            n,
            edges: normalized,
        })
    }

    pub fn n_vertices(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize, f64)] {
        &self.edges
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Weighted degree of every vertex.
    pub fn degrees(&self) -> Vec<f64> {
        let mut deg = vec![0.0; self.n];
        for &(u, v, w) in &self.edges {
            deg[u] += w;
            deg[v] += w;
        }
        deg
    }

    /// Dense symmetric weight matrix `W`.
    pub fn adjacency(&self) -> DMatrix<f64> {
        let mut w = DMatrix::zeros(self.n, self.n);
        for &(u, v, weight) in &self.edges {
            w[(u, v)] = weight;
            w[(v, u)] = weight;
        }
        w
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

fn is_connected(n: usize, edges: impl Iterator<Item = (usize, usize)>) -> bool {
    let mut adj = vec![Vec::new(); n];
    for (u, v) in edges {
        adj[u].push(v);
        adj[v].push(u);
    }
    let mut visited = vec![false; n];
    let mut stack = vec![0];
    visited[0] = true;
    let mut count = 1;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !visited[v] {
                visited[v] = true;
                count += 1;
                stack.push(v);
            }
        }
    }
    count == n
}

fn check_probability(name: &str, p: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::InvalidParameter(format!(
            "{name}={p} is not a probability"
        )));
    }
    Ok(())
}

/// Draws independent Bernoulli edges with a pair-dependent probability,
/// retrying on a fresh stream of the same seed until the result is connected.
fn rejection_sample(
    model: &str,
    n: usize,
    seed: u64,
    prob: impl Fn(usize, usize) -> f64,
) -> Result<Graph> {
    for attempt in 0..MAX_GENERATION_ATTEMPTS {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(attempt as u64);
        let mut edges = Vec::new();
        for u in 0..n {
            for v in (u + 1)..n {
                if rng.random::<f64>() < prob(u, v) {
                    edges.push((u, v, 1.0));
                }
            }
        }
        if is_connected(n, edges.iter().map(|&(u, v, _)| (u, v))) {
            return Graph::new(n, edges);
        }
    }
    Err(Error::GenerationFailed {
        model: model.to_string(),
        n,
        attempts: MAX_GENERATION_ATTEMPTS,
    })
}

/// Erdős–Rényi `G(n, p)`, resampled until connected.
pub fn generate_er(n: usize, p: f64, seed: u64) -> Result<Graph> {
    if n < 2 {
        return Err(Error::InvalidParameter(format!("ER needs n >= 2, got {n}")));
    }
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "ER edge probability {p} not in (0, 1]"
        )));
    }
    rejection_sample(&format!("ER(p={p})"), n, seed, |_, _| p)
}

/// Barabási–Albert preferential attachment.
///
/// Starts from a clique on the first `m` vertices; every later vertex attaches
/// to `m` distinct earlier vertices drawn sequentially with probability
/// proportional to their current degree. The result always has
/// `m(m−1)/2 + m(n−m)` edges.
pub fn generate_ba(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m == 0 || n <= m {
        return Err(Error::InvalidParameter(format!(
            "BA needs n > m >= 1, got n={n}, m={m}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::with_capacity(m * (m - 1) / 2 + m * (n - m));
    let mut degree = vec![0.0_f64; n];
    for u in 0..m {
        for v in (u + 1)..m {
            edges.push((u, v, 1.0));
            degree[u] += 1.0;
            degree[v] += 1.0;
        }
    }
    for new in m..n {
        let mut weights = degree[..new].to_vec();
        let mut targets = Vec::with_capacity(m);
        for _ in 0..m {
            let t = draw_weighted(&mut rng, &weights);
            weights[t] = 0.0;
            targets.push(t);
        }
        // A single-vertex seed clique has zero degree; the uniform fallback in
        // `draw_weighted` covers it.
        for t in targets {
            edges.push((t, new, 1.0));
            degree[t] += 1.0;
            degree[new] += 1.0;
        }
    }
    Graph::new(n, edges)
}

/// Stochastic block model with `blocks` contiguous, near-equal groups.
pub fn generate_sbm(n: usize, blocks: usize, p_in: f64, p_out: f64, seed: u64) -> Result<Graph> {
    if blocks == 0 || blocks > n {
        return Err(Error::InvalidParameter(format!(
            "SBM needs 1 <= blocks <= n, got blocks={blocks}, n={n}"
        )));
    }
    if n < 2 {
        return Err(Error::InvalidParameter(format!(
            "SBM needs n >= 2, got {n}"
        )));
    }
    check_probability("p_in", p_in)?;
    check_probability("p_out", p_out)?;
    if p_in == 0.0 && p_out == 0.0 {
        return Err(Error::InvalidParameter(
            "p_in and p_out are both zero".into(),
        ));
    }
    let block_of = |v: usize| sbm_block(v, n, blocks);
    rejection_sample(
        &format!("SBM(blocks={blocks}, p_in={p_in}, p_out={p_out})"),
        n,
        seed,
        |u, v| {
            if block_of(u) == block_of(v) {
                p_in
            } else {
                p_out
            }
        },
    )
}

/// Block index of vertex `v` in an `n`-vertex SBM with `blocks` groups.
pub fn sbm_block(v: usize, n: usize, blocks: usize) -> usize {
    v * blocks / n
}

/// Index drawn with probability proportional to `weights`; uniform over all
/// indices when every weight is zero.
pub(crate) fn draw_weighted<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return rng.random_range(0..weights.len());
    }
    let target = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = i;
            if target < acc {
                return i;
            }
        }
    }
    last_positive
}

/// Dense shift operator of a connected graph.
///
/// The combinatorial Laplacian has exact zero row sums; both variants are
/// symmetrised after assembly.
pub fn shift_operator(g: &Graph, kind: ShiftOperatorKind) -> DMatrix<f64> {
    let n = g.n_vertices();
    let deg = g.degrees();
    let mut l = DMatrix::zeros(n, n);
    match kind {
        ShiftOperatorKind::Combinatorial => {
            for &(u, v, w) in g.edges() {
                l[(u, v)] -= w;
                l[(v, u)] -= w;
            }
            for (i, d) in deg.iter().enumerate() {
                l[(i, i)] = *d;
            }
        }
        ShiftOperatorKind::Normalized => {
            let inv_sqrt: Vec<f64> = deg.iter().map(|d| 1.0 / d.sqrt()).collect();
            for &(u, v, w) in g.edges() {
                let x = w * inv_sqrt[u] * inv_sqrt[v];
                l[(u, v)] -= x;
                l[(v, u)] -= x;
            }
            for i in 0..n {
                l[(i, i)] = 1.0;
            }
        }
    }
    (&l + l.transpose()) * 0.5
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path3() -> Graph {
        Graph::new(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap()
    }

    #[test]
    fn complete_graphs_at_p_one() {
        let g = generate_er(3, 1.0, 42).unwrap();
        assert_eq!(g.n_edges(), 3);
        let g = generate_er(2, 1.0, 9).unwrap();
        assert_eq!(g.edges(), &[(0, 1, 1.0)]);
    }

    #[test]
    fn er_rejects_bad_parameters() {
        assert!(generate_er(1, 0.5, 0).is_err());
        assert!(generate_er(10, 0.0, 0).is_err());
        assert!(generate_er(10, 1.5, 0).is_err());
    }

    #[test]
    fn er_gives_up_when_connection_is_hopeless() {
        let err = generate_er(200, 1e-6, 0).unwrap_err();
        assert!(
            matches!(err, Error::GenerationFailed { n: 200, .. }),
            "{err}"
        );
    }

    #[test]
    fn ba_single_arrival_makes_k4() {
        let g = generate_ba(4, 3, 11).unwrap();
        assert_eq!(g.n_edges(), 6);
    }

    #[test]
    fn ba_edge_count_formula() {
        let g = generate_ba(100, 3, 7).unwrap();
        assert_eq!(g.n_edges(), 3 + 3 * 97);
        let g = generate_ba(50, 1, 7).unwrap();
        assert_eq!(g.n_edges(), 49);
    }

    #[test]
    fn ba_rejects_n_not_above_m() {
        assert!(generate_ba(3, 3, 0).is_err());
        assert!(generate_ba(5, 0, 0).is_err());
    }

    #[test]
    fn sbm_trivial_cases() {
        let g = generate_sbm(4, 2, 1.0, 1.0, 5).unwrap();
        assert_eq!(g.n_edges(), 6);
        let err = generate_sbm(4, 2, 1.0, 0.0, 5).unwrap_err();
        assert!(matches!(err, Error::GenerationFailed { .. }));
        assert!(generate_sbm(4, 5, 0.5, 0.5, 0).is_err());
        assert!(generate_sbm(4, 2, 0.0, 0.0, 0).is_err());
        assert!(generate_sbm(4, 2, 1.2, 0.0, 0).is_err());
    }

    #[test]
    fn sbm_blocks_are_near_equal() {
        for (n, blocks) in [(100, 10), (103, 10), (7, 3), (5, 5)] {
            let mut sizes = vec![0usize; blocks];
            for v in 0..n {
                sizes[sbm_block(v, n, blocks)] += 1;
            }
            let lo = *sizes.iter().min().unwrap();
            let hi = *sizes.iter().max().unwrap();
            assert!(hi - lo <= 1, "{sizes:?}");
        }
    }

    #[test]
    fn graph_new_validates() {
        assert!(Graph::new(3, vec![(0, 0, 1.0), (1, 2, 1.0)]).is_err());
        assert!(Graph::new(3, vec![(0, 1, 1.0), (1, 0, 1.0), (1, 2, 1.0)]).is_err());
        assert!(Graph::new(3, vec![(0, 1, -1.0), (1, 2, 1.0)]).is_err());
        assert!(Graph::new(3, vec![(0, 3, 1.0)]).is_err());
        assert!(matches!(
            Graph::new(3, vec![(0, 1, 1.0)]),
            Err(Error::Disconnected)
        ));
        let g = Graph::new(3, vec![(2, 1, 1.0), (1, 0, 2.0)]).unwrap();
        assert_eq!(g.edges(), &[(0, 1, 2.0), (1, 2, 1.0)]);
    }

    #[test]
    fn json_document_shape() {
        let g = path3();
        let s = g.to_json().unwrap();
        assert_eq!(s, r#"{"n":3,"edges":[[0,1,1.0],[1,2,1.0]]}"#);
        assert_eq!(Graph::from_json(&s).unwrap(), g);
        assert!(Graph::from_json(r#"{"n":3,"edges":[[0,1,1.0]]}"#).is_err());
        assert!(Graph::from_json(r#"{"n":2,"edges":[[0,1,1.0]],"x":1}"#).is_err());
    }

    #[test]
    fn path_combinatorial_laplacian() {
        let l = shift_operator(&path3(), ShiftOperatorKind::Combinatorial);
        let expected = DMatrix::from_row_slice(3, 3, &[1., -1., 0., -1., 2., -1., 0., -1., 1.]);
        assert_eq!(l, expected);
    }

    #[test]
    fn triangle_laplacians() {
        let k3 = generate_er(3, 1.0, 0).unwrap();
        let l = shift_operator(&k3, ShiftOperatorKind::Combinatorial);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(l[(i, j)], if i == j { 2.0 } else { -1.0 });
            }
        }
        let ln = shift_operator(&k3, ShiftOperatorKind::Normalized);
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { -0.5 };
                assert!((ln[(i, j)] - want).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn weighted_normalized_laplacian() {
        let g = Graph::new(3, vec![(0, 1, 4.0), (1, 2, 1.0)]).unwrap();
        let l = shift_operator(&g, ShiftOperatorKind::Normalized);
        // degrees 4, 5, 1
        assert!((l[(0, 1)] + 4.0 / (4.0_f64 * 5.0).sqrt()).abs() < 1e-15);
        assert!((l[(1, 2)] + 1.0 / 5.0_f64.sqrt()).abs() < 1e-15);
        assert_eq!(l, l.transpose());
    }

    #[test]
    fn draw_weighted_skips_zero_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let i = draw_weighted(&mut rng, &[0.0, 2.0, 0.0, 1.0]);
            assert!(i == 1 || i == 3);
        }
        let i = draw_weighted(&mut rng, &[0.0, 0.0]);
        assert!(i < 2);
    }
}
