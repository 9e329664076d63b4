//! Hybrid sampling of protector sets, and the uniform reverse-sampling
//! baseline.
//!
//! One hybrid R-sample is produced in two phases over a single lazily
//! sampled realization:
//!
//! 1. forward: spread the misinformation from its seeds; the reached nodes
//!    are `V_r`;
//! 2. reverse: for each non-seed `v ∈ V_r` (ascending id), walk live edges
//!    backwards level by level from `v` until a level contains a
//!    misinformation seed. The nodes of the earlier levels form `P_v`,
//!    exactly the nodes strictly closer to `v` than any misinformation seed.
//!
//! No edge is decided twice, so the R-sample is a deterministic function of
//! one full realization, and the number of sets hit by `S` is an unbiased
//! estimate of the prevention effect of `S`.

pub mod dump;

use rand::Rng;
use rayon::prelude::*;

use crate::cascade::{Distances, EdgeStates, LazyEdges, Realization};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, SeedSet};
use crate::rng::{stream_rng, Purpose};

/// The family of protector sets from one hybrid-sampling run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RSample {
    /// One set per processed misinformation-reached node, in BFS order from
    /// that node (so a non-empty set starts with its source).
    pub sets: Vec<Vec<NodeId>>,
    /// `sources[i]` is the node that `sets[i]` protects.
    pub sources: Vec<NodeId>,
}

impl RSample {
    pub fn is_empty(&self) -> bool {
        self.sets.is_empty()
    }

    /// Total number of node entries over all sets.
    pub fn size(&self) -> usize {
        self.sets.iter().map(Vec::len).sum()
    }
}

/// Whether misinformation seeds reached in the forward phase get a reverse
/// pass of their own. Such a pass always returns the empty set, so both
/// settings give the same estimates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SeedRoots {
    #[default]
    Skip,
    /// Literal reading: every reached node, seeds included, gets a set.
    Include,
}

/// Result of a reverse search that may not meet a misinformation seed.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReverseOutcome {
    /// A level containing a seed was reached; the earlier levels are kept.
    Reached(Vec<NodeId>),
    /// The search ran out of live in-edges first; everything visited is kept.
    Exhausted(Vec<NodeId>),
}

/// One uniform reverse sample.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum UniformSample {
    /// The root is threatened; `set` holds the nodes that would save it.
    Protectors { root: NodeId, set: Vec<NodeId> },
    /// The root is itself a misinformation seed.
    SeedRoot { root: NodeId },
    /// The misinformation cannot reach the root.
    NoThreat { root: NodeId },
}

impl UniformSample {
    pub fn set(&self) -> &[NodeId] {
        match self {
            UniformSample::Protectors { set, .. } => set,
            _ => &[],
        }
    }

    pub fn is_empty(&self) -> bool {
        self.set().is_empty()
    }

    pub fn root(&self) -> NodeId {
        match *self {
            UniformSample::Protectors { root, .. }
            | UniformSample::SeedRoot { root }
            | UniformSample::NoThreat { root } => root,
        }
    }
}

/// Traversal buffers reused across samples.
#[derive(Clone, Debug)]
pub struct Scratch {
    forward: Distances,
    mark: Vec<u32>,
    epoch: u32,
    frontier: Vec<NodeId>,
    next: Vec<NodeId>,
    examined: u64,
}

impl Scratch {
    pub fn new(graph: &Graph) -> Scratch {
        Scratch {
            forward: Distances::new(graph.node_count()),
            mark: vec![0; graph.node_count()],
            epoch: 0,
            frontier: Vec::new(),
            next: Vec::new(),
            examined: 0,
        }
    }

    /// Edge examinations (memoized or not) since construction.
    pub fn edges_examined(&self) -> u64 {
        self.examined
    }

    fn new_search(&mut self) {
        if self.epoch == u32::MAX {
            self.mark.fill(0);
            self.epoch = 0;
        }
        self.epoch += 1;
    }

    fn marked(&self, v: NodeId) -> bool {
        self.mark[v as usize] == self.epoch
    }

    fn set_mark(&mut self, v: NodeId) {
        self.mark[v as usize] = self.epoch;
    }
}

/// A realization plus traversal buffers: everything one worker needs.
#[derive(Clone, Debug)]
pub struct Workspace {
    pub realization: Realization,
    pub scratch: Scratch,
}

impl Workspace {
    pub fn new(graph: &Graph) -> Workspace {
        Workspace {
            realization: Realization::new(graph.edge_count()),
            scratch: Scratch::new(graph),
        }
    }
}

/// Samplers bound to one graph and misinformation seed set.
#[derive(Clone, Debug)]
pub struct Sampler<'g> {
    graph: &'g Graph,
    misinfo: Vec<NodeId>,
    is_seed: Vec<bool>,
    seed_roots: SeedRoots,
}

impl<'g> Sampler<'g> {
    pub fn new(graph: &'g Graph, misinfo: &SeedSet) -> Sampler<'g> {
        Sampler {
            graph,
            misinfo: misinfo.nodes().to_vec(),
            is_seed: misinfo.mask(graph.node_count()),
            seed_roots: SeedRoots::Skip,
        }
    }

    pub fn with_seed_roots(mut self, seed_roots: SeedRoots) -> Self {
        self.seed_roots = seed_roots;
        self
    }

    pub fn graph(&self) -> &'g Graph {
        self.graph
    }

    pub fn workspace(&self) -> Workspace {
        Workspace::new(self.graph)
    }

    /// Spreads the misinformation alone and returns the reached nodes in
    /// ascending order. Only edges out of reached nodes into unreached ones
    /// are examined.
    pub fn forward<E: EdgeStates + ?Sized>(&self, scratch: &mut Scratch, edges: &mut E) -> Vec<NodeId> {
        scratch.examined += scratch.forward.run(self.graph, &self.misinfo, edges);
        let mut reached = scratch.forward.reached().to_vec();
        reached.sort_unstable();
        reached
    }

    /// Level-synchronous reverse BFS from `v` over live edges.
    pub fn reverse<E: EdgeStates + ?Sized>(
        &self,
        scratch: &mut Scratch,
        edges: &mut E,
        v: NodeId,
    ) -> ReverseOutcome {
        scratch.new_search();
        let mut collected = Vec::new();
        let mut frontier = std::mem::take(&mut scratch.frontier);
        let mut next = std::mem::take(&mut scratch.next);
        frontier.clear();
        frontier.push(v);
        scratch.set_mark(v);
        let outcome = loop {
            if frontier.iter().any(|&u| self.is_seed[u as usize]) {
                break ReverseOutcome::Reached(collected);
            }
            collected.extend_from_slice(&frontier);
            next.clear();
            for &target in &frontier {
                for arc in self.graph.in_arcs(target) {
                    // marked = already collected or already in the next level
                    if scratch.marked(arc.node) {
                        continue;
                    }
                    scratch.examined += 1;
                    if edges.is_live(self.graph, arc.edge) {
                        scratch.set_mark(arc.node);
                        next.push(arc.node);
                    }
                }
            }
            if next.is_empty() {
                break ReverseOutcome::Exhausted(collected);
            }
            std::mem::swap(&mut frontier, &mut next);
        };
        scratch.frontier = frontier;
        scratch.next = next;
        outcome
    }

    /// Protector set of a misinformation-reached node `v`.
    ///
    /// Fails if the reverse search never meets a misinformation seed, which
    /// means `v` was not reached by the misinformation in this realization.
    pub fn reverse_sample_from<E: EdgeStates + ?Sized>(
        &self,
        scratch: &mut Scratch,
        edges: &mut E,
        v: NodeId,
    ) -> Result<Vec<NodeId>> {
        match self.reverse(scratch, edges, v) {
            ReverseOutcome::Reached(set) => Ok(set),
            ReverseOutcome::Exhausted(_) => Err(Error::Invariant(format!(
                "reverse search from node {v} found no misinformation seed"
            ))),
        }
    }

    /// One R-sample against the given edge states.
    pub fn hybrid<E: EdgeStates + ?Sized>(&self, scratch: &mut Scratch, edges: &mut E) -> Result<RSample> {
        let reached = self.forward(scratch, edges);
        let mut sample = RSample::default();
        for v in reached {
            if self.is_seed[v as usize] {
                if self.seed_roots == SeedRoots::Include {
                    sample.sets.push(Vec::new());
                    sample.sources.push(v);
                }
                continue;
            }
            let set = self.reverse_sample_from(scratch, edges, v)?;
            sample.sets.push(set);
            sample.sources.push(v);
        }
        Ok(sample)
    }

    /// One R-sample on a fresh realization drawn from `rng`.
    pub fn hybrid_sample<R: Rng + ?Sized>(&self, workspace: &mut Workspace, rng: &mut R) -> Result<RSample> {
        workspace.realization.reset();
        let mut edges = LazyEdges::new(&mut workspace.realization, rng);
        self.hybrid(&mut workspace.scratch, &mut edges)
    }

    /// Uniform reverse sample: a uniformly random root, one reverse search on
    /// a fresh realization.
    pub fn uniform_sample<R: Rng + ?Sized>(&self, workspace: &mut Workspace, rng: &mut R) -> UniformSample {
        let root = rng.gen_range(0..self.graph.node_count()) as NodeId;
        if self.is_seed[root as usize] {
            return UniformSample::SeedRoot { root };
        }
        workspace.realization.reset();
        let mut edges = LazyEdges::new(&mut workspace.realization, rng);
        match self.reverse(&mut workspace.scratch, &mut edges, root) {
            ReverseOutcome::Reached(set) => UniformSample::Protectors { root, set },
            ReverseOutcome::Exhausted(_) => UniformSample::NoThreat { root },
        }
    }
}

/// Misinformation spread on a fresh realization: `(V_r, g*)`.
pub fn forward_sample<R: Rng + ?Sized>(
    graph: &Graph,
    misinfo: &SeedSet,
    rng: &mut R,
) -> (Vec<NodeId>, Realization) {
    let sampler = Sampler::new(graph, misinfo);
    let mut scratch = Scratch::new(graph);
    let mut realization = Realization::new(graph.edge_count());
    let reached = sampler.forward(&mut scratch, &mut LazyEdges::new(&mut realization, rng));
    (reached, realization)
}

/// Reverse sampling from `v`, extending `realization` with `rng`.
pub fn reverse_sample_from<R: Rng + ?Sized>(
    graph: &Graph,
    realization: &mut Realization,
    misinfo: &SeedSet,
    v: NodeId,
    rng: &mut R,
) -> Result<Vec<NodeId>> {
    let sampler = Sampler::new(graph, misinfo);
    let mut scratch = Scratch::new(graph);
    sampler.reverse_sample_from(&mut scratch, &mut LazyEdges::new(realization, rng), v)
}

pub fn hybrid_sample<R: Rng + ?Sized>(graph: &Graph, misinfo: &SeedSet, rng: &mut R) -> Result<RSample> {
    let sampler = Sampler::new(graph, misinfo);
    sampler.hybrid_sample(&mut sampler.workspace(), rng)
}

pub fn uniform_reverse_sample<R: Rng + ?Sized>(graph: &Graph, misinfo: &SeedSet, rng: &mut R) -> UniformSample {
    let sampler = Sampler::new(graph, misinfo);
    sampler.uniform_sample(&mut sampler.workspace(), rng)
}

/// A batch of samples with the total traversal work spent on it.
#[derive(Clone, Debug)]
pub struct Batch<T> {
    pub samples: Vec<T>,
    pub edges_examined: u64,
}

/// `count` hybrid R-samples; sample `i` uses stream `i` of
/// `(seed, purpose)`, so the batch is identical for any thread count.
pub fn hybrid_batch(
    sampler: &Sampler<'_>,
    count: usize,
    seed: u64,
    purpose: Purpose,
) -> Result<Batch<RSample>> {
    hybrid_range(sampler, 0..count as u64, seed, purpose)
}

/// Hybrid R-samples for the given stream indices.
pub fn hybrid_range(
    sampler: &Sampler<'_>,
    indices: std::ops::Range<u64>,
    seed: u64,
    purpose: Purpose,
) -> Result<Batch<RSample>> {
    let results: Vec<(RSample, u64)> = indices
        .into_par_iter()
        .map_init(
            || sampler.workspace(),
            |workspace, i| {
                let mut rng = stream_rng(seed, purpose, i);
                let before = workspace.scratch.edges_examined();
                let sample = sampler.hybrid_sample(workspace, &mut rng)?;
                Ok((sample, workspace.scratch.edges_examined() - before))
            },
        )
        .collect::<Result<_>>()?;
    Ok(collect_batch(results))
}

/// `count` uniform reverse samples, reproducible as for [`hybrid_batch`].
pub fn uniform_batch(sampler: &Sampler<'_>, count: usize, seed: u64) -> Batch<UniformSample> {
    let results: Vec<(UniformSample, u64)> = (0..count as u64)
        .into_par_iter()
        .map_init(
            || sampler.workspace(),
            |workspace, i| {
                let mut rng = stream_rng(seed, Purpose::UniformBaseline, i);
                let before = workspace.scratch.edges_examined();
                let sample = sampler.uniform_sample(workspace, &mut rng);
                (sample, workspace.scratch.edges_examined() - before)
            },
        )
        .collect();
    collect_batch(results)
}

fn collect_batch<T>(results: Vec<(T, u64)>) -> Batch<T> {
    let edges_examined = results.iter().map(|r| r.1).sum();
    Batch {
        samples: results.into_iter().map(|r| r.0).collect(),
        edges_examined,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::FullRealization;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn chain(p: f64) -> (Graph, SeedSet) {
        let g = Graph::from_edges(3, vec![(0, 1, p), (1, 2, p)]).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        (g, s)
    }

    fn sorted(mut v: Vec<NodeId>) -> Vec<NodeId> {
        v.sort_unstable();
        v
    }

    #[test]
    fn forward_on_certain_chain() {
        let (g, s) = chain(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (reached, realization) = forward_sample(&g, &s, &mut rng);
        assert_eq!(reached, vec![0, 1, 2]);
        assert_eq!(realization.decided_count(), 2);
    }

    #[test]
    fn forward_frequency_on_single_edge() {
        let g = Graph::from_edges(2, vec![(0, 1, 0.5)]).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        let sampler = Sampler::new(&g, &s);
        let mut ws = sampler.workspace();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let runs = 100_000;
        let mut hits = 0;
        for _ in 0..runs {
            ws.realization.reset();
            let reached = sampler.forward(
                &mut ws.scratch,
                &mut LazyEdges::new(&mut ws.realization, &mut rng),
            );
            if reached == [0, 1] {
                hits += 1;
            } else {
                assert_eq!(reached, [0]);
            }
        }
        let freq = hits as f64 / runs as f64;
        assert!((freq - 0.5).abs() <= 0.01, "{freq}");
    }

    #[test]
    fn saturated_seed_set_decides_nothing() {
        let (g, _) = chain(0.5);
        let all = SeedSet::misinformation(vec![0, 1, 2], &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (reached, realization) = forward_sample(&g, &all, &mut rng);
        assert_eq!(reached, vec![0, 1, 2]);
        assert_eq!(realization.decided_count(), 0);
    }

    #[test]
    fn reverse_examples() {
        let g = Graph::from_edges(2, vec![(0, 1, 1.0)]).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut r = Realization::new(1);
        assert_eq!(reverse_sample_from(&g, &mut r, &s, 1, &mut rng).unwrap(), vec![1]);
        assert_eq!(reverse_sample_from(&g, &mut r, &s, 0, &mut rng).unwrap(), Vec::<NodeId>::new());

        let (g, s) = chain(1.0);
        let mut r = Realization::new(2);
        assert_eq!(reverse_sample_from(&g, &mut r, &s, 2, &mut rng).unwrap(), vec![2, 1]);
    }

    #[test]
    fn reverse_without_seed_is_an_invariant_error() {
        let g = Graph::from_edges(3, vec![(0, 1, 1.0)]).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut r = Realization::new(1);
        let err = reverse_sample_from(&g, &mut r, &s, 2, &mut rng).unwrap_err();
        assert!(matches!(err, Error::Invariant(_)));
    }

    #[test]
    fn seed_frontier_is_discarded_whole() {
        // r=0 -> 2 and 1 -> 2: from v=3 via 2, the level {0, 1} holds a seed,
        // so node 1 is not collected even though it is not a seed.
        let g = Graph::from_edges(4, vec![(0, 2, 1.0), (1, 2, 1.0), (2, 3, 1.0)]).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let mut r = Realization::new(3);
        assert_eq!(reverse_sample_from(&g, &mut r, &s, 3, &mut rng).unwrap(), vec![3, 2]);
    }

    #[test]
    fn hybrid_on_certain_chain() {
        let (g, s) = chain(1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let sample = hybrid_sample(&g, &s, &mut rng).unwrap();
        assert_eq!(sample.sets, vec![vec![1], vec![2, 1]]);
        assert_eq!(sample.sources, vec![1, 2]);

        let strict = Sampler::new(&g, &s).with_seed_roots(SeedRoots::Include);
        let sample = strict.hybrid_sample(&mut strict.workspace(), &mut rng).unwrap();
        assert_eq!(sample.sets, vec![vec![], vec![1], vec![2, 1]]);
    }

    #[test]
    fn hybrid_without_spread_is_empty() {
        let g = Graph::from_edges(3, vec![(1, 2, 1.0), (1, 0, 1.0)]).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(hybrid_sample(&g, &s, &mut rng).unwrap().is_empty());
    }

    #[test]
    fn hybrid_single_edge_mean() {
        let g = Graph::from_edges(2, vec![(0, 1, 0.5)]).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        let sampler = Sampler::new(&g, &s);
        let batch = hybrid_batch(&sampler, 100_000, 3, Purpose::Framework).unwrap();
        let hits: Vec<f64> = batch
            .samples
            .iter()
            .map(|r| {
                assert!(r.sets.is_empty() || r.sets == vec![vec![1]]);
                r.sets.len() as f64
            })
            .collect();
        let mean = hits.iter().sum::<f64>() / hits.len() as f64;
        let se = 0.5 / (hits.len() as f64).sqrt();
        assert!((mean - 0.5).abs() <= 3.0 * se, "{mean}");
    }

    #[test]
    fn hybrid_sets_contain_their_source_and_no_seed() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..200 {
            let g = crate::graph::generate::gnp(9, 0.3, &mut rng)
                .unwrap()
                .assign_uniform(0.5)
                .unwrap();
            let s = SeedSet::misinformation(vec![0, 5], &g).unwrap();
            let sample = hybrid_sample(&g, &s, &mut rng).unwrap();
            for (set, &source) in sample.sets.iter().zip(&sample.sources) {
                assert_eq!(set.first(), Some(&source));
                assert!(!set.contains(&0) && !set.contains(&5));
            }
        }
    }

    #[test]
    fn each_edge_is_decided_at_most_once() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..100 {
            let g = crate::graph::generate::gnp(10, 0.35, &mut rng)
                .unwrap()
                .assign_uniform(0.7)
                .unwrap();
            let s = SeedSet::misinformation(vec![0], &g).unwrap();
            let sampler = Sampler::new(&g, &s);
            let mut ws = sampler.workspace();
            let sample = sampler.hybrid_sample(&mut ws, &mut rng).unwrap();
            assert!(ws.realization.decided_count() <= g.edge_count());
            // examinations can repeat (memoized), decisions cannot
            assert!(ws.scratch.edges_examined() as usize >= ws.realization.decided_count());
            let _ = sample;
        }
    }

    #[test]
    fn frozen_realization_reproduces_the_sample() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let g = crate::graph::generate::gnp(8, 0.3, &mut rng)
                .unwrap()
                .assign_uniform(0.5)
                .unwrap();
            let s = SeedSet::misinformation(vec![1], &g).unwrap();
            let sampler = Sampler::new(&g, &s);
            let mut ws = sampler.workspace();
            let lazy = sampler.hybrid_sample(&mut ws, &mut rng).unwrap();
            let mut full: FullRealization = ws.realization.complete(&g, &mut rng);
            let frozen = sampler.hybrid(&mut ws.scratch, &mut full).unwrap();
            assert_eq!(lazy, frozen);
        }
    }

    #[test]
    fn uniform_examples() {
        // 0 -> 1 -> 2, node 3 isolated
        let g = Graph::from_edges(4, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        let sampler = Sampler::new(&g, &s);
        let mut ws = sampler.workspace();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = [false; 4];
        for _ in 0..200 {
            let sample = sampler.uniform_sample(&mut ws, &mut rng);
            seen[sample.root() as usize] = true;
            match sample.root() {
                0 => assert_eq!(sample, UniformSample::SeedRoot { root: 0 }),
                1 => assert_eq!(sorted(sample.set().to_vec()), vec![1]),
                2 => assert_eq!(sample.set(), &[2, 1]),
                _ => assert_eq!(sample, UniformSample::NoThreat { root: 3 }),
            }
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn batches_do_not_depend_on_thread_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let g = crate::graph::generate::gnp(30, 0.15, &mut rng)
            .unwrap()
            .assign_uniform(0.4)
            .unwrap();
        let s = SeedSet::misinformation(vec![0, 1], &g).unwrap();
        let sampler = Sampler::new(&g, &s);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    let h = hybrid_batch(&sampler, 500, 77, Purpose::Framework).unwrap();
                    let u = uniform_batch(&sampler, 500, 77);
                    (h.samples, h.edges_examined, u.samples, u.edges_examined)
                })
        };
        assert_eq!(run(1), run(4));
    }
}
