//! The event space of the independent cascade model.
//!
//! A [`Realization`] decides edge states lazily, each at most once; a
//! [`FullRealization`] fixes every edge up front. Both implement
//! [`EdgeStates`], so every traversal in the crate (forward spread, reverse
//! sampling, distance criteria, round simulation) runs unchanged against a
//! sampled world or an enumerated one.
//!
//! A node escapes the misinformation exactly when the positive seeds are
//! strictly closer to it than the misinformation seeds over live edges, or
//! the misinformation cannot reach it at all. Hop distance is plain BFS.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{domain, Result};
use crate::graph::{EdgeId, Graph, NodeId};
use crate::rng::{stream_rng, Purpose};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeState {
    Live,
    Blocked,
}

/// Read access to edge liveness. Lazy implementations may decide the edge
/// on first query.
pub trait EdgeStates {
    fn is_live(&mut self, graph: &Graph, edge: EdgeId) -> bool;
}

/// A lazily sampled realization. Clearing it with [`Realization::reset`] is
/// O(1), so one allocation serves many samples.
#[derive(Clone, Debug)]
pub struct Realization {
    stamp: Vec<u32>,
    live: Vec<bool>,
    epoch: u32,
    decided: usize,
}

impl Realization {
    pub fn new(edge_count: usize) -> Realization {
        Realization {
            stamp: vec![0; edge_count],
            live: vec![false; edge_count],
            epoch: 1,
            decided: 0,
        }
    }

    /// Forgets every decision.
    pub fn reset(&mut self) {
        if self.epoch == u32::MAX {
            self.stamp.fill(0);
            self.epoch = 0;
        }
        self.epoch += 1;
        self.decided = 0;
    }

    /// `None` while the edge is undetermined.
    pub fn state(&self, edge: EdgeId) -> Option<EdgeState> {
        let e = edge as usize;
        (self.stamp[e] == self.epoch).then(|| {
            if self.live[e] {
                EdgeState::Live
            } else {
                EdgeState::Blocked
            }
        })
    }

    /// Returns the edge's state, deciding it with one uniform draw if it is
    /// still undetermined.
    pub fn edge_state<R: Rng + ?Sized>(
        &mut self,
        graph: &Graph,
        edge: EdgeId,
        rng: &mut R,
    ) -> EdgeState {
        if let Some(state) = self.state(edge) {
            return state;
        }
        // draw from (0, 1] so that `draw <= p` has probability exactly p
        let draw = 1.0 - rng.gen::<f64>();
        let live = draw <= graph.probability(edge);
        let e = edge as usize;
        self.stamp[e] = self.epoch;
        self.live[e] = live;
        self.decided += 1;
        if live {
            EdgeState::Live
        } else {
            EdgeState::Blocked
        }
    }

    pub fn decided_count(&self) -> usize {
        self.decided
    }

    pub fn is_full(&self) -> bool {
        self.decided == self.stamp.len()
    }

    /// Extends this partial realization to a full one, sampling the
    /// undetermined edges.
    pub fn complete<R: Rng + ?Sized>(&self, graph: &Graph, rng: &mut R) -> FullRealization {
        let mut copy = self.clone();
        let live = (0..graph.edge_count() as EdgeId)
            .map(|e| copy.edge_state(graph, e, rng) == EdgeState::Live)
            .collect();
        FullRealization { live }
    }
}

/// A realization paired with the RNG that decides its open edges.
pub struct LazyEdges<'a, R: ?Sized> {
    pub realization: &'a mut Realization,
    pub rng: &'a mut R,
}

impl<'a, R: Rng + ?Sized> LazyEdges<'a, R> {
    pub fn new(realization: &'a mut Realization, rng: &'a mut R) -> Self {
        LazyEdges { realization, rng }
    }
}

impl<R: Rng + ?Sized> EdgeStates for LazyEdges<'_, R> {
    fn is_live(&mut self, graph: &Graph, edge: EdgeId) -> bool {
        self.realization.edge_state(graph, edge, self.rng) == EdgeState::Live
    }
}

/// Every edge decided.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FullRealization {
    live: Vec<bool>,
}

impl FullRealization {
    pub fn new(live: Vec<bool>) -> FullRealization {
        FullRealization { live }
    }

    /// Bit `e` of `mask` is the state of edge `e`.
    pub fn from_mask(edge_count: usize, mask: u64) -> FullRealization {
        assert!(edge_count <= 64);
        FullRealization {
            live: (0..edge_count).map(|e| mask >> e & 1 == 1).collect(),
        }
    }

    pub fn sample<R: Rng + ?Sized>(graph: &Graph, rng: &mut R) -> FullRealization {
        Realization::new(graph.edge_count()).complete(graph, rng)
    }

    pub fn live(&self, edge: EdgeId) -> bool {
        self.live[edge as usize]
    }

    pub fn set(&mut self, edge: EdgeId, live: bool) {
        self.live[edge as usize] = live;
    }
}

impl EdgeStates for FullRealization {
    fn is_live(&mut self, _graph: &Graph, edge: EdgeId) -> bool {
        self.live[edge as usize]
    }
}

/// Multi-source BFS hop distances over live edges, with reusable storage.
#[derive(Clone, Debug)]
pub struct Distances {
    dist: Vec<u32>,
    stamp: Vec<u32>,
    epoch: u32,
    order: Vec<NodeId>,
}

impl Distances {
    pub fn new(node_count: usize) -> Distances {
        Distances {
            dist: vec![0; node_count],
            stamp: vec![0; node_count],
            epoch: 0,
            order: Vec::new(),
        }
    }

    /// Runs the BFS and returns the number of edges examined. Edges into
    /// already-reached nodes are never queried, so on a lazy realization
    /// this is exactly an independent-cascade simulation from `sources`.
    pub fn run<E: EdgeStates + ?Sized>(
        &mut self,
        graph: &Graph,
        sources: &[NodeId],
        edges: &mut E,
    ) -> u64 {
        if self.epoch == u32::MAX {
            self.stamp.fill(0);
            self.epoch = 0;
        }
        self.epoch += 1;
        self.order.clear();
        for &s in sources {
            if self.stamp[s as usize] != self.epoch {
                self.stamp[s as usize] = self.epoch;
                self.dist[s as usize] = 0;
                self.order.push(s);
            }
        }
        let mut examined = 0;
        let mut head = 0;
        while head < self.order.len() {
            let u = self.order[head];
            head += 1;
            let next = self.dist[u as usize] + 1;
            for arc in graph.out_arcs(u) {
                if self.stamp[arc.node as usize] == self.epoch {
                    continue;
                }
                examined += 1;
                if edges.is_live(graph, arc.edge) {
                    self.stamp[arc.node as usize] = self.epoch;
                    self.dist[arc.node as usize] = next;
                    self.order.push(arc.node);
                }
            }
        }
        examined
    }

    /// `None` means unreachable.
    pub fn get(&self, v: NodeId) -> Option<u32> {
        (self.stamp[v as usize] == self.epoch).then(|| self.dist[v as usize])
    }

    /// Reached nodes in BFS order.
    pub fn reached(&self) -> &[NodeId] {
        &self.order
    }
}

/// Expected-value estimate with its standard error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl Estimate {
    /// From exact integer sums of the observations and their squares.
    pub(crate) fn from_sums(samples: u64, sum: u64, sum_sq: u128) -> Estimate {
        let count = samples as f64;
        let mean = sum as f64 / count;
        let std_error = if samples > 1 {
            // n * sum_sq - sum^2 is exact in integers
            let spread = samples as u128 * sum_sq - sum as u128 * sum as u128;
            let variance = spread as f64 / (count * (count - 1.0));
            (variance / count).sqrt()
        } else {
            0.0
        };
        Estimate {
            mean,
            std_error,
            samples,
        }
    }
}

/// The escape criterion: protected when positive distance is strictly
/// smaller, or the misinformation never arrives.
fn escapes(positive: Option<u32>, misinfo: Option<u32>) -> bool {
    match (positive, misinfo) {
        (_, None) => true,
        (Some(p), Some(r)) => p < r,
        (None, Some(_)) => false,
    }
}

/// Per-node protection status (`true` = not misinformation-active) in the
/// given realization, via the distance criterion.
pub fn protection_status<E: EdgeStates + ?Sized>(
    graph: &Graph,
    misinfo: &[NodeId],
    positive: &[NodeId],
    edges: &mut E,
) -> Vec<bool> {
    let n = graph.node_count();
    let mut from_misinfo = Distances::new(n);
    let mut from_positive = Distances::new(n);
    from_misinfo.run(graph, misinfo, edges);
    from_positive.run(graph, positive, edges);
    graph
        .nodes()
        .map(|v| escapes(from_positive.get(v), from_misinfo.get(v)))
        .collect()
}

/// Whether `v` escapes the misinformation in a full realization.
pub fn is_protected<E: EdgeStates + ?Sized>(
    graph: &Graph,
    misinfo: &[NodeId],
    positive: &[NodeId],
    edges: &mut E,
    v: NodeId,
) -> bool {
    protection_status(graph, misinfo, positive, edges)[v as usize]
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Activation {
    Inactive,
    Misinfo,
    Positive,
}

/// Round-by-round simulation of both cascades. Returns the mask of
/// misinformation-active nodes.
///
/// A node seeded by both cascades, or reached by both in the same round,
/// takes the misinformation.
pub fn simulate_competing<E: EdgeStates + ?Sized>(
    graph: &Graph,
    misinfo: &[NodeId],
    positive: &[NodeId],
    edges: &mut E,
) -> Vec<bool> {
    let n = graph.node_count();
    let mut state = vec![Activation::Inactive; n];
    let mut frontier = Vec::new();
    for &r in misinfo {
        if state[r as usize] == Activation::Inactive {
            state[r as usize] = Activation::Misinfo;
            frontier.push(r);
        }
    }
    for &s in positive {
        if state[s as usize] == Activation::Inactive {
            state[s as usize] = Activation::Positive;
            frontier.push(s);
        }
    }

    // Attempts of one round: best cascade reaching each node so far.
    let mut attempt = vec![Activation::Inactive; n];
    let mut touched = Vec::new();
    while !frontier.is_empty() {
        for &u in &frontier {
            let cascade = state[u as usize];
            for arc in graph.out_arcs(u) {
                let v = arc.node as usize;
                if state[v] != Activation::Inactive || attempt[v] == Activation::Misinfo {
                    continue;
                }
                if edges.is_live(graph, arc.edge) {
                    if attempt[v] == Activation::Inactive {
                        touched.push(arc.node);
                    }
                    if cascade == Activation::Misinfo || attempt[v] == Activation::Inactive {
                        attempt[v] = cascade;
                    }
                }
            }
        }
        frontier.clear();
        for v in touched.drain(..) {
            state[v as usize] = attempt[v as usize];
            attempt[v as usize] = Activation::Inactive;
            frontier.push(v);
        }
    }
    state.into_iter().map(|s| s == Activation::Misinfo).collect()
}

/// Scratch state for one evaluation worker.
pub(crate) struct EvalScratch {
    realization: Realization,
    from_misinfo: Distances,
    from_positive: Distances,
}

impl EvalScratch {
    pub(crate) fn new(graph: &Graph) -> EvalScratch {
        EvalScratch {
            realization: Realization::new(graph.edge_count()),
            from_misinfo: Distances::new(graph.node_count()),
            from_positive: Distances::new(graph.node_count()),
        }
    }

    /// Nodes that the misinformation reaches but the positive cascade saves,
    /// in one freshly sampled realization.
    pub(crate) fn prevented<R: Rng + ?Sized>(
        &mut self,
        graph: &Graph,
        misinfo: &[NodeId],
        positive: &[NodeId],
        rng: &mut R,
    ) -> u64 {
        self.realization.reset();
        let mut edges = LazyEdges::new(&mut self.realization, rng);
        self.from_misinfo.run(graph, misinfo, &mut edges);
        if positive.is_empty() {
            return 0;
        }
        self.from_positive.run(graph, positive, &mut edges);
        let from_positive = &self.from_positive;
        self.from_misinfo
            .reached()
            .iter()
            .filter(|&&v| {
                let r = self.from_misinfo.get(v);
                from_positive.get(v).is_some_and(|p| Some(p) < r)
            })
            .count() as u64
    }
}

/// Monte Carlo estimate of the prevention effect `f(S) - f(∅)`.
///
/// Both terms are read off the same sampled world: each simulation counts
/// the nodes the misinformation reaches that the positive seeds reach
/// strictly earlier. Simulation `i` uses its own stream of `seed`, so the
/// result does not depend on the thread count.
pub fn monte_carlo_f_star(
    graph: &Graph,
    misinfo: &[NodeId],
    positive: &[NodeId],
    simulations: u64,
    seed: u64,
) -> Result<Estimate> {
    if simulations == 0 {
        return domain("need at least one simulation");
    }
    if positive.is_empty() {
        return Ok(Estimate {
            mean: 0.0,
            std_error: 0.0,
            samples: simulations,
        });
    }
    let (sum, sum_sq) = (0..simulations)
        .into_par_iter()
        .map_init(
            || EvalScratch::new(graph),
            |scratch, i| {
                let mut rng = stream_rng(seed, Purpose::Evaluation, i);
                let c = scratch.prevented(graph, misinfo, positive, &mut rng);
                (c, c as u128 * c as u128)
            },
        )
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    Ok(Estimate::from_sums(simulations, sum, sum_sq))
}
