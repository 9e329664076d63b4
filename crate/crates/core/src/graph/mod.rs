//! Directed graphs with per-edge propagation probabilities.
//!
//! Node ids are dense `0..n`. Graphs loaded from edge lists keep the original
//! (sparse) ids as labels; labels are always sorted ascending, so dense order
//! and label order agree and lookups by label are a binary search.

pub mod generate;
mod io;

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cascade::{Distances, LazyEdges, Realization};
use crate::error::{domain, Error, Result};
use crate::rng::{stream_rng, Purpose};

pub use io::{format_probability, load_edge_list, write_edge_list};

pub type NodeId = u32;
pub type EdgeId = u32;

/// One adjacency entry: the node at the other end and the edge id.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Arc {
    pub node: NodeId,
    pub edge: EdgeId,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Graph {
    endpoints: Vec<(NodeId, NodeId)>,
    prob: Vec<f64>,
    out_offsets: Vec<usize>,
    out_arcs: Vec<Arc>,
    in_offsets: Vec<usize>,
    in_arcs: Vec<Arc>,
    labels: Vec<u64>,
}

impl Graph {
    /// Builds a graph on `node_count` nodes labelled `0..node_count`.
    ///
    /// Self-loops are dropped and a repeated `(u, v)` keeps the probability
    /// of its first occurrence. Edge ids follow the order of the surviving
    /// input edges.
    pub fn from_edges<I>(node_count: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        let labels = (0..node_count as u64).collect();
        Self::with_labels(labels, edges)
    }

    pub(crate) fn with_labels<I>(labels: Vec<u64>, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (NodeId, NodeId, f64)>,
    {
        let n = labels.len();
        if n > NodeId::MAX as usize {
            return domain(format!("{n} nodes exceed the supported maximum"));
        }
        debug_assert!(labels.windows(2).all(|w| w[0] < w[1]));

        let mut seen = HashSet::new();
        let mut endpoints = Vec::new();
        let mut prob = Vec::new();
        for (u, v, p) in edges {
            if u as usize >= n || v as usize >= n {
                return domain(format!("edge ({u}, {v}) references a node outside 0..{n}"));
            }
            check_probability(p)?;
            if u == v || !seen.insert((u, v)) {
                continue;
            }
            endpoints.push((u, v));
            prob.push(p);
        }
        if endpoints.len() > EdgeId::MAX as usize {
            return domain("edge count exceeds the supported maximum");
        }

        let (out_offsets, out_arcs) = adjacency(n, &endpoints, |&(u, v)| (u, v));
        let (in_offsets, in_arcs) = adjacency(n, &endpoints, |&(u, v)| (v, u));
        Ok(Graph {
            endpoints,
            prob,
            out_offsets,
            out_arcs,
            in_offsets,
            in_arcs,
            labels,
        })
    }

    pub fn node_count(&self) -> usize {
        self.labels.len()
    }

    pub fn edge_count(&self) -> usize {
        self.endpoints.len()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> {
        0..self.node_count() as NodeId
    }

    /// Outgoing arcs of `u`, in edge-id order.
    pub fn out_arcs(&self, u: NodeId) -> &[Arc] {
        let u = u as usize;
        &self.out_arcs[self.out_offsets[u]..self.out_offsets[u + 1]]
    }

    /// Incoming arcs of `v` (the arc's `node` is the source), in edge-id order.
    pub fn in_arcs(&self, v: NodeId) -> &[Arc] {
        let v = v as usize;
        &self.in_arcs[self.in_offsets[v]..self.in_offsets[v + 1]]
    }

    pub fn out_degree(&self, u: NodeId) -> usize {
        self.out_arcs(u).len()
    }

    pub fn in_degree(&self, v: NodeId) -> usize {
        self.in_arcs(v).len()
    }

    pub fn endpoints(&self, edge: EdgeId) -> (NodeId, NodeId) {
        self.endpoints[edge as usize]
    }

    pub fn probability(&self, edge: EdgeId) -> f64 {
        self.prob[edge as usize]
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.prob
    }

    /// Original id of a dense node.
    pub fn label(&self, v: NodeId) -> u64 {
        self.labels[v as usize]
    }

    pub fn labels(&self) -> &[u64] {
        &self.labels
    }

    /// Dense id of an original label.
    pub fn node_by_label(&self, label: u64) -> Option<NodeId> {
        self.labels.binary_search(&label).ok().map(|i| i as NodeId)
    }

    /// Same topology with the given per-edge probabilities.
    pub fn with_probabilities(&self, prob: Vec<f64>) -> Result<Graph> {
        if prob.len() != self.edge_count() {
            return domain(format!(
                "expected {} probabilities, got {}",
                self.edge_count(),
                prob.len()
            ));
        }
        for &p in &prob {
            check_probability(p)?;
        }
        Ok(Graph { prob, ..self.clone() })
    }

    /// Sets every edge probability to `p`.
    pub fn assign_uniform(&self, p: f64) -> Result<Graph> {
        check_probability(p)?;
        Ok(Graph {
            prob: vec![p; self.edge_count()],
            ..self.clone()
        })
    }

    /// Weighted-cascade probabilities: edge `(u, v)` gets `1 / in_degree(v)`.
    pub fn assign_weighted_cascade(&self) -> Graph {
        let prob = self
            .endpoints
            .iter()
            .map(|&(_, v)| 1.0 / self.in_degree(v) as f64)
            .collect();
        Graph { prob, ..self.clone() }
    }

    /// Nodes ordered by out-degree, highest first, smaller id first on ties.
    pub fn by_out_degree(&self) -> Vec<NodeId> {
        let mut nodes: Vec<NodeId> = self.nodes().collect();
        nodes.sort_by_key(|&v| (std::cmp::Reverse(self.out_degree(v)), v));
        nodes
    }
}

fn adjacency(
    n: usize,
    endpoints: &[(NodeId, NodeId)],
    orient: impl Fn(&(NodeId, NodeId)) -> (NodeId, NodeId),
) -> (Vec<usize>, Vec<Arc>) {
    let mut offsets = vec![0usize; n + 1];
    for e in endpoints {
        offsets[orient(e).0 as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut cursor = offsets.clone();
    let mut arcs = vec![Arc { node: 0, edge: 0 }; endpoints.len()];
    for (id, e) in endpoints.iter().enumerate() {
        let (from, to) = orient(e);
        let slot = &mut cursor[from as usize];
        arcs[*slot] = Arc {
            node: to,
            edge: id as EdgeId,
        };
        *slot += 1;
    }
    (offsets, arcs)
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p <= 1.0 {
        Ok(())
    } else {
        domain(format!("propagation probability {p} is outside (0, 1]"))
    }
}

/// How edges without an explicit probability get one.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ProbabilityModel {
    Uniform(f64),
    WeightedCascade,
    /// Every line must carry its own probability.
    FromFile,
}

impl FromStr for ProbabilityModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wc" | "weighted-cascade" => Ok(ProbabilityModel::WeightedCascade),
            "file" => Ok(ProbabilityModel::FromFile),
            _ => {
                let Some(p) = s.strip_prefix("uniform:") else {
                    return domain(format!(
                        "unknown probability model `{s}` (expected uniform:P, wc or file)"
                    ));
                };
                let p: f64 = p
                    .parse()
                    .map_err(|_| Error::Domain(format!("invalid probability in `{s}`")))?;
                check_probability(p)?;
                Ok(ProbabilityModel::Uniform(p))
            }
        }
    }
}

impl fmt::Display for ProbabilityModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbabilityModel::Uniform(p) => write!(f, "uniform:{p}"),
            ProbabilityModel::WeightedCascade => f.write_str("wc"),
            ProbabilityModel::FromFile => f.write_str("file"),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SeedRole {
    Misinformation,
    Positive,
}

/// A duplicate-free list of seed nodes. Order is preserved (rank or
/// selection order) but carries no meaning for the diffusion.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SeedSet {
    nodes: Vec<NodeId>,
    role: SeedRole,
}

impl SeedSet {
    pub fn new(nodes: Vec<NodeId>, role: SeedRole, node_count: usize) -> Result<SeedSet> {
        let mut sorted = nodes.clone();
        sorted.sort_unstable();
        if let Some(w) = sorted.windows(2).find(|w| w[0] == w[1]) {
            return domain(format!("seed node {} listed twice", w[0]));
        }
        if let Some(&v) = sorted.last() {
            if v as usize >= node_count {
                return domain(format!("seed node {v} is not in the graph"));
            }
        }
        Ok(SeedSet { nodes, role })
    }

    pub fn misinformation(nodes: Vec<NodeId>, graph: &Graph) -> Result<SeedSet> {
        Self::new(nodes, SeedRole::Misinformation, graph.node_count())
    }

    pub fn positive(nodes: Vec<NodeId>, graph: &Graph) -> Result<SeedSet> {
        Self::new(nodes, SeedRole::Positive, graph.node_count())
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn role(&self) -> SeedRole {
        self.role
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, v: NodeId) -> bool {
        self.nodes.contains(&v)
    }

    pub fn mask(&self, node_count: usize) -> Vec<bool> {
        let mut mask = vec![false; node_count];
        for &v in &self.nodes {
            mask[v as usize] = true;
        }
        mask
    }
}

/// Settings for ranking nodes by individual influence.
#[derive(Clone, Copy, Debug)]
pub struct InfluenceRanking {
    /// Single-cascade simulations per candidate.
    pub simulations: usize,
    /// Only the top `candidate_factor * count` nodes by out-degree are simulated.
    pub candidate_factor: usize,
}

impl Default for InfluenceRanking {
    fn default() -> Self {
        InfluenceRanking {
            simulations: 200,
            candidate_factor: 10,
        }
    }
}

/// Picks `count` misinformation seeds with the highest estimated
/// single-seed expected spread.
pub fn select_misinfo_seeds(
    graph: &Graph,
    count: usize,
    ranking: &InfluenceRanking,
    seed: u64,
) -> Result<SeedSet> {
    let n = graph.node_count();
    if count > n {
        return domain(format!("cannot pick {count} seeds from {n} nodes"));
    }
    if ranking.simulations == 0 {
        return domain("influence ranking needs at least one simulation");
    }
    let pool = count.saturating_mul(ranking.candidate_factor.max(1)).min(n);
    let candidates: Vec<NodeId> = graph.by_out_degree().into_iter().take(pool).collect();

    // Integer totals keep ties exact; every candidate gets its own stream.
    let mut scored: Vec<(u64, NodeId)> = candidates
        .par_iter()
        .map_init(
            || {
                (
                    Realization::new(graph.edge_count()),
                    Distances::new(graph.node_count()),
                )
            },
            |(realization, spread), &v| {
                let mut rng = stream_rng(seed, Purpose::MisinfoSelection, v as u64);
                let total: u64 = (0..ranking.simulations)
                    .map(|_| {
                        realization.reset();
                        spread.run(graph, &[v], &mut LazyEdges::new(realization, &mut rng));
                        spread.reached().len() as u64
                    })
                    .sum();
                (total, v)
            },
        )
        .collect();
    scored.sort_by_key(|&(total, v)| (std::cmp::Reverse(total), v));
    let nodes = scored.into_iter().take(count).map(|(_, v)| v).collect();
    SeedSet::new(nodes, SeedRole::Misinformation, n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edges(graph: &Graph) -> Vec<(NodeId, NodeId, f64)> {
        (0..graph.edge_count() as EdgeId)
            .map(|e| {
                let (u, v) = graph.endpoints(e);
                (u, v, graph.probability(e))
            })
            .collect()
    }

    #[test]
    fn adjacency_views_agree() {
        let g = Graph::from_edges(
            5,
            vec![(0, 1, 0.5), (1, 2, 0.5), (0, 2, 0.5), (3, 2, 0.5), (4, 0, 0.5)],
        )
        .unwrap();
        let mut out: Vec<(NodeId, NodeId, EdgeId)> = g
            .nodes()
            .flat_map(|u| g.out_arcs(u).iter().map(move |a| (u, a.node, a.edge)))
            .collect();
        let mut inn: Vec<(NodeId, NodeId, EdgeId)> = g
            .nodes()
            .flat_map(|v| g.in_arcs(v).iter().map(move |a| (a.node, v, a.edge)))
            .collect();
        out.sort_unstable();
        inn.sort_unstable();
        assert_eq!(out, inn);
        assert_eq!(g.in_degree(2), 3);
        assert_eq!(g.out_degree(0), 2);
    }

    #[test]
    fn duplicates_collapse_and_self_loops_drop() {
        let g = Graph::from_edges(3, vec![(0, 1, 0.5), (0, 1, 0.9), (2, 2, 0.3), (1, 2, 0.25)])
            .unwrap();
        assert_eq!(edges(&g), vec![(0, 1, 0.5), (1, 2, 0.25)]);
    }

    #[test]
    fn rejects_bad_probabilities() {
        assert!(Graph::from_edges(2, vec![(0, 1, 0.0)]).is_err());
        assert!(Graph::from_edges(2, vec![(0, 1, 1.5)]).is_err());
        assert!(Graph::from_edges(2, vec![(0, 1, f64::NAN)]).is_err());
        assert!(Graph::from_edges(2, vec![(0, 1, 1.0)]).is_ok());
    }

    #[test]
    fn uniform_assignment() {
        let g = Graph::from_edges(3, vec![(0, 1, 0.5), (1, 2, 0.7)]).unwrap();
        let a = g.assign_uniform(0.1).unwrap();
        assert!(a.probabilities().iter().all(|&p| p == 0.1));
        let b = g.assign_uniform(0.01).unwrap();
        assert!(b.probabilities().iter().all(|&p| p == 0.01));
        assert!(g.assign_uniform(0.0).is_err());
        assert!(g.assign_uniform(1.01).is_err());

        let empty = Graph::from_edges(0, vec![]).unwrap();
        assert_eq!(empty.assign_uniform(0.5).unwrap(), empty);
    }

    #[test]
    fn weighted_cascade_assignment() {
        let star = Graph::from_edges(4, vec![(1, 0, 0.5), (2, 0, 0.5), (3, 0, 0.5)]).unwrap();
        let wc = star.assign_weighted_cascade();
        assert!(wc.probabilities().iter().all(|&p| p == 1.0 / 3.0));

        let single = Graph::from_edges(2, vec![(0, 1, 0.3)]).unwrap();
        assert_eq!(single.assign_weighted_cascade().probabilities(), &[1.0]);

        let pair = Graph::from_edges(3, vec![(0, 2, 0.3), (1, 2, 0.3)]).unwrap();
        assert_eq!(pair.assign_weighted_cascade().probabilities(), &[0.5, 0.5]);
    }

    #[test]
    fn seed_sets_reject_duplicates_and_strangers() {
        let g = Graph::from_edges(3, vec![(0, 1, 1.0)]).unwrap();
        assert!(SeedSet::misinformation(vec![0, 0], &g).is_err());
        assert!(SeedSet::misinformation(vec![3], &g).is_err());
        let s = SeedSet::positive(vec![2, 0], &g).unwrap();
        assert_eq!(s.nodes(), &[2, 0]);
        assert_eq!(s.mask(3), vec![true, false, true]);
    }

    #[test]
    fn probability_model_parsing() {
        assert_eq!(
            "uniform:0.1".parse::<ProbabilityModel>().unwrap(),
            ProbabilityModel::Uniform(0.1)
        );
        assert_eq!(
            "wc".parse::<ProbabilityModel>().unwrap(),
            ProbabilityModel::WeightedCascade
        );
        assert!("uniform:2".parse::<ProbabilityModel>().is_err());
        assert!("linear".parse::<ProbabilityModel>().is_err());
    }

    #[test]
    fn misinfo_seed_selection() {
        let ranking = InfluenceRanking::default();

        let chain = Graph::from_edges(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let s = select_misinfo_seeds(&chain, 1, &ranking, 1).unwrap();
        assert_eq!(s.nodes(), &[0]);
        assert_eq!(s.role(), SeedRole::Misinformation);

        let isolated = Graph::from_edges(5, vec![]).unwrap();
        let s = select_misinfo_seeds(&isolated, 2, &ranking, 1).unwrap();
        assert_eq!(s.nodes(), &[0, 1]);

        let star =
            Graph::from_edges(5, vec![(4, 0, 1.0), (4, 1, 1.0), (4, 2, 1.0), (4, 3, 1.0)]).unwrap();
        let s = select_misinfo_seeds(&star, 1, &ranking, 1).unwrap();
        assert_eq!(s.nodes(), &[4]);

        assert!(select_misinfo_seeds(&chain, 4, &ranking, 1).is_err());
    }
}
