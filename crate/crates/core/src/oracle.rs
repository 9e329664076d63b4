//! Exact values on tiny instances by enumerating every full realization in
//! rational arithmetic.
//!
//! Edge probabilities are taken at the exact value of their shortest decimal
//! representation (`0.1` is 1/10, not the nearest double).

use std::collections::HashMap;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rayon::prelude::*;

use crate::cascade::{protection_status, Distances, FullRealization};
use crate::coverage::{coverage, SampleStore};
use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId, SeedSet};
use crate::sampler::Sampler;

/// Largest edge count for expectations.
pub const MAX_EDGES: usize = 24;
/// Largest edge count for the exhaustive optimum.
pub const MAX_EDGES_OPT: usize = 20;
/// Largest number of candidate seed sets for the exhaustive optimum.
pub const MAX_SUBSETS: u64 = 100_000;

/// Edges fixed per parallel task.
const SPLIT_BITS: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TraceEntry {
    /// Bit `e` set iff edge `e` is live.
    pub mask: u64,
    pub probability: BigRational,
    pub contribution: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactResult {
    pub value: BigRational,
    /// Realizations with non-zero probability, by mask, when requested.
    pub trace: Option<Vec<TraceEntry>>,
}

impl ExactResult {
    pub fn to_f64(&self) -> f64 {
        ratio_to_f64(&self.value)
    }
}

pub fn ratio_to_f64(value: &BigRational) -> f64 {
    value.to_f64().unwrap_or(f64::NAN)
}

/// The exact rational written by the shortest decimal form of `p`.
pub fn exact_probability(p: f64) -> BigRational {
    let text = format!("{p}");
    let (whole, fraction) = text.split_once('.').unwrap_or((&text, ""));
    let numerator: BigInt = format!("{whole}{fraction}")
        .parse()
        .expect("finite f64 prints as a decimal");
    let denominator = num_traits::pow(BigInt::from(10u32), fraction.len());
    BigRational::new(numerator, denominator)
}

struct EdgeWeights {
    live: Vec<BigUint>,
    blocked: Vec<BigUint>,
    /// Product of the per-edge denominators.
    denominator: BigUint,
}

impl EdgeWeights {
    fn new(graph: &Graph) -> EdgeWeights {
        let mut weights = EdgeWeights {
            live: Vec::with_capacity(graph.edge_count()),
            blocked: Vec::with_capacity(graph.edge_count()),
            denominator: BigUint::one(),
        };
        for &p in graph.probabilities() {
            let p = exact_probability(p);
            let num = p.numer().to_biguint().expect("probability is positive");
            let den = p.denom().to_biguint().expect("denominator is positive");
            weights.blocked.push(&den - &num);
            weights.live.push(num);
            weights.denominator *= den;
        }
        weights
    }
}

fn check_edges(graph: &Graph, max: usize) -> Result<()> {
    if graph.edge_count() > max {
        return Err(Error::TooLarge(format!(
            "exhaustive enumeration needs at most {max} edges, the graph has {}",
            graph.edge_count()
        )));
    }
    Ok(())
}

/// Visits every full realization of non-zero probability with its weight
/// (probability times the common denominator). Each task folds into its own
/// accumulator; accumulators are merged in task order.
fn enumerate<A, I, F, M>(graph: &Graph, weights: &EdgeWeights, init: I, leaf: F, merge: M) -> A
where
    A: Send,
    I: Fn() -> A + Sync,
    F: Fn(&mut A, &mut FullRealization, u64, &BigUint) + Sync,
    M: Fn(A, A) -> A + Sync,
{
    let m = graph.edge_count();
    let split = m.min(SPLIT_BITS);
    let parts: Vec<A> = (0..1u64 << split)
        .into_par_iter()
        .map(|task| {
            let mut acc = init();
            let mut full = FullRealization::new(vec![false; m]);
            let mut weight = BigUint::one();
            for e in 0..split {
                let live = task >> e & 1 == 1;
                full.set(e as u32, live);
                weight *= if live { &weights.live[e] } else { &weights.blocked[e] };
            }
            if !weight.is_zero() {
                walk(weights, &leaf, &mut acc, &mut full, split, task, &weight);
            }
            acc
        })
        .collect();
    parts.into_iter().reduce(merge).expect("at least one task")
}

fn walk<A, F>(
    weights: &EdgeWeights,
    leaf: &F,
    acc: &mut A,
    full: &mut FullRealization,
    edge: usize,
    mask: u64,
    weight: &BigUint,
) where
    F: Fn(&mut A, &mut FullRealization, u64, &BigUint),
{
    if edge == weights.live.len() {
        leaf(acc, full, mask, weight);
        return;
    }
    for live in [false, true] {
        let factor = if live { &weights.live[edge] } else { &weights.blocked[edge] };
        if factor.is_zero() {
            continue;
        }
        full.set(edge as u32, live);
        let mask = if live { mask | 1 << edge } else { mask };
        walk(weights, leaf, acc, full, edge + 1, mask, &(weight * factor));
    }
}

/// Σ_g Pr[g] · c(g) for an integer-valued statistic `c`.
fn expectation<S, I, F>(graph: &Graph, traced: bool, init: I, statistic: F) -> ExactResult
where
    S: Send,
    I: Fn() -> S + Sync,
    F: Fn(&mut S, &mut FullRealization) -> u64 + Sync,
{
    let weights = EdgeWeights::new(graph);
    type Acc<S> = (S, Vec<BigUint>, Vec<(u64, BigUint, u64)>);
    let (_, bins, trace): Acc<S> = enumerate(
        graph,
        &weights,
        || (init(), Vec::new(), Vec::new()),
        |(scratch, bins, trace): &mut Acc<S>, full, mask, weight| {
            let c = statistic(scratch, full);
            if c as usize >= bins.len() {
                bins.resize(c as usize + 1, BigUint::zero());
            }
            bins[c as usize] += weight;
            if traced {
                trace.push((mask, weight.clone(), c));
            }
        },
        |(s, mut a, mut ta), (_, b, tb)| {
            if b.len() > a.len() {
                a.resize(b.len(), BigUint::zero());
            }
            for (x, y) in a.iter_mut().zip(b) {
                *x += y;
            }
            ta.extend(tb);
            (s, a, ta)
        },
    );
    let total: BigUint = bins
        .iter()
        .enumerate()
        .map(|(c, w)| w * BigUint::from(c))
        .sum();
    let denominator = BigInt::from(weights.denominator.clone());
    let trace = traced.then(|| {
        let mut entries: Vec<TraceEntry> = trace
            .into_iter()
            .map(|(mask, w, contribution)| TraceEntry {
                mask,
                probability: BigRational::new(w.into(), denominator.clone()),
                contribution,
            })
            .collect();
        entries.sort_by_key(|entry| entry.mask);
        entries
    });
    ExactResult {
        value: BigRational::new(total.into(), denominator),
        trace,
    }
}

/// Total probability of all realizations; exactly one.
pub fn probability_mass(graph: &Graph) -> Result<BigRational> {
    check_edges(graph, MAX_EDGES)?;
    Ok(expectation(graph, false, || (), |_, _| 1).value)
}

fn protected_count(graph: &Graph, misinfo: &[NodeId], positive: &[NodeId], full: &mut FullRealization) -> u64 {
    protection_status(graph, misinfo, positive, full)
        .into_iter()
        .filter(|&p| p)
        .count() as u64
}

/// Exact prevention effect `f(S) − f(∅)`.
pub fn exact_f_star(graph: &Graph, misinfo: &SeedSet, positive: &[NodeId]) -> Result<ExactResult> {
    exact_f_star_traced(graph, misinfo, positive, false)
}

pub fn exact_f_star_traced(
    graph: &Graph,
    misinfo: &SeedSet,
    positive: &[NodeId],
    traced: bool,
) -> Result<ExactResult> {
    check_edges(graph, MAX_EDGES)?;
    let r = misinfo.nodes();
    Ok(expectation(
        graph,
        traced,
        || (),
        |_, full| protected_count(graph, r, positive, full) - protected_count(graph, r, &[], full),
    ))
}

/// Exact expectation of the hybrid-sampling estimator `x(𝒫, S)`, running
/// the sampler on each frozen realization.
pub fn exact_expected_x(graph: &Graph, misinfo: &SeedSet, positive: &[NodeId]) -> Result<ExactResult> {
    check_edges(graph, MAX_EDGES)?;
    let sampler = Sampler::new(graph, misinfo);
    let mut failure = std::sync::Mutex::new(None);
    let result = expectation(
        graph,
        false,
        || sampler.workspace().scratch,
        |scratch, full| match sampler.hybrid(scratch, full) {
            Ok(sample) => coverage(&sample, positive) as u64,
            Err(e) => {
                failure.lock().unwrap().get_or_insert(e);
                0
            }
        },
    );
    match failure.get_mut().unwrap().take() {
        Some(e) => Err(e),
        None => Ok(result),
    }
}

/// Lexicographic iterator over the `k`-subsets of `0..n`.
#[derive(Clone, Debug)]
pub struct KSubsets {
    n: usize,
    current: Option<Vec<NodeId>>,
}

pub fn k_subsets(n: usize, k: usize) -> KSubsets {
    KSubsets {
        n,
        current: (k <= n).then(|| (0..k as NodeId).collect()),
    }
}

impl Iterator for KSubsets {
    type Item = Vec<NodeId>;

    fn next(&mut self) -> Option<Vec<NodeId>> {
        let current = self.current.take()?;
        let k = current.len();
        let mut next = current.clone();
        let mut i = k;
        while i > 0 {
            i -= 1;
            if (next[i] as usize) < self.n - k + i {
                next[i] += 1;
                for j in i + 1..k {
                    next[j] = next[j - 1] + 1;
                }
                self.current = Some(next);
                break;
            }
        }
        Some(current)
    }
}

fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u64, |acc, i| acc.saturating_mul((n - i) as u64) / (i as u64 + 1))
}

fn check_subsets(n: usize, k: usize) -> Result<()> {
    let count = binomial(n, k);
    if count > MAX_SUBSETS {
        return Err(Error::TooLarge(format!(
            "C({n}, {k}) = {count} candidate sets exceeds the limit of {MAX_SUBSETS}"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactOpt {
    pub seeds: Vec<NodeId>,
    pub value: BigRational,
}

/// The best `k`-set by exact prevention effect; the lexicographically
/// smallest among ties.
///
/// Each realization contributes, for every node the misinformation reaches,
/// the set of nodes strictly closer to it than any misinformation seed; a
/// seed set saves that node iff it hits the set. Weights are aggregated per
/// distinct set, so candidate sets are scored without re-enumerating.
pub fn exact_opt(graph: &Graph, misinfo: &SeedSet, k: usize) -> Result<ExactOpt> {
    check_edges(graph, MAX_EDGES_OPT)?;
    let n = graph.node_count();
    if n > 64 {
        return Err(Error::TooLarge(format!("exhaustive optimum needs at most 64 nodes, got {n}")));
    }
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
    }
    check_subsets(n, k)?;
    let weights = EdgeWeights::new(graph);
    let r = misinfo.nodes();
    let protector_weights: HashMap<u64, BigUint> = enumerate(
        graph,
        &weights,
        || (vec![Distances::new(n); n + 1], HashMap::new()),
        |(dist, acc): &mut (Vec<Distances>, HashMap<u64, BigUint>), full, _, weight| {
            for u in 0..n {
                dist[u].run(graph, &[u as NodeId], full);
            }
            dist[n].run(graph, r, full);
            for v in 0..n as NodeId {
                let Some(threat) = dist[n].get(v) else { continue };
                let protectors = (0..n)
                    .filter(|&u| dist[u].get(v).is_some_and(|d| d < threat))
                    .fold(0u64, |m, u| m | 1 << u);
                if protectors != 0 {
                    *acc.entry(protectors).or_insert_with(BigUint::zero) += weight;
                }
            }
        },
        |(d, mut a), (_, b)| {
            for (set, w) in b {
                *a.entry(set).or_insert_with(BigUint::zero) += w;
            }
            (d, a)
        },
    )
    .1;
    let mut sets: Vec<(u64, BigUint)> = protector_weights.into_iter().collect();
    sets.sort_unstable_by_key(|entry| entry.0);

    let mut best: Option<(Vec<NodeId>, BigUint)> = None;
    for seeds in k_subsets(n, k) {
        let mask = seeds.iter().fold(0u64, |m, &v| m | 1 << v);
        let score: BigUint = sets
            .iter()
            .filter(|(set, _)| set & mask != 0)
            .map(|(_, w)| w)
            .sum();
        if best.as_ref().map_or(true, |(_, b)| score > *b) {
            best = Some((seeds, score));
        }
    }
    let (seeds, score) = best.expect("k <= n gives at least one subset");
    Ok(ExactOpt {
        seeds,
        value: BigRational::new(score.into(), weights.denominator.into()),
    })
}

/// Brute-force maximum coverage of a sample store over all `k`-sets.
pub fn best_coverage(store: &SampleStore, k: usize) -> Result<(Vec<NodeId>, usize)> {
    let n = store.node_count();
    if k > n {
        return Err(Error::Domain(format!("k = {k} exceeds n = {n}")));
    }
    check_subsets(n, k)?;
    let mut best = (Vec::new(), 0);
    for (i, seeds) in k_subsets(n, k).enumerate() {
        let c = store.coverage(&seeds);
        if i == 0 || c > best.1 {
            best = (seeds, c);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cascade::simulate_competing;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn ratio(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn chain() -> (Graph, SeedSet) {
        let g = Graph::from_edges(3, vec![(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        (g, s)
    }

    /// Random instance with probabilities in {0.25, 0.5, 0.75, 1, 0.1}.
    fn random_instance(rng: &mut ChaCha8Rng, n: usize, max_edges: usize) -> (Graph, SeedSet) {
        let choices = [0.25, 0.5, 0.75, 1.0, 0.1];
        let mut edges = Vec::new();
        for _ in 0..rng.gen_range(0..=max_edges) {
            let u = rng.gen_range(0..n as NodeId);
            let v = rng.gen_range(0..n as NodeId);
            edges.push((u, v, choices[rng.gen_range(0..choices.len())]));
        }
        let g = Graph::from_edges(n, edges).unwrap();
        let seeds = rng.gen_range(1..=2);
        let s = SeedSet::misinformation((0..seeds).collect(), &g).unwrap();
        (g, s)
    }

    #[test]
    fn decimal_probabilities_are_exact() {
        assert_eq!(exact_probability(0.1), ratio(1, 10));
        assert_eq!(exact_probability(0.25), ratio(1, 4));
        assert_eq!(exact_probability(1.0), ratio(1, 1));
    }

    #[test]
    fn probability_mass_is_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let (g, _) = random_instance(&mut rng, 6, 12);
            assert_eq!(probability_mass(&g).unwrap(), BigRational::one());
        }
        let (g, s) = chain();
        let traced = exact_f_star_traced(&g, &s, &[1], true).unwrap();
        let trace = traced.trace.unwrap();
        assert_eq!(trace.len(), 1);
        assert_eq!(trace[0], TraceEntry { mask: 0b11, probability: ratio(1, 1), contribution: 2 });
    }

    #[test]
    fn f_star_examples() {
        let g = Graph::from_edges(2, vec![(0, 1, 0.5)]).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        assert_eq!(exact_f_star(&g, &s, &[1]).unwrap().value, ratio(1, 2));
        assert_eq!(exact_f_star(&g, &s, &[]).unwrap().value, BigRational::zero());
        let (g, s) = chain();
        assert_eq!(exact_f_star(&g, &s, &[1]).unwrap().value, ratio(2, 1));
        assert_eq!(exact_f_star(&g, &s, &[2]).unwrap().value, ratio(1, 1));
    }

    #[test]
    fn expected_x_matches_f_star() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let (g, s) = random_instance(&mut rng, 6, 10);
            let k = rng.gen_range(0..=3);
            let positive: Vec<NodeId> = (0..k).map(|_| rng.gen_range(0..6)).collect();
            let mut positive = positive;
            positive.sort_unstable();
            positive.dedup();
            let x = exact_expected_x(&g, &s, &positive).unwrap();
            let f = exact_f_star(&g, &s, &positive).unwrap();
            assert_eq!(x.value, f.value);
        }
        let (g, s) = chain();
        assert_eq!(exact_expected_x(&g, &s, &[]).unwrap().value, BigRational::zero());
        assert_eq!(exact_expected_x(&g, &s, &[2]).unwrap().value, ratio(1, 1));
    }

    #[test]
    fn classifier_agrees_with_simulation_on_every_realization() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let (g, s) = random_instance(&mut rng, 5, 8);
            let positive = [3, 4];
            for mask in 0..1u64 << g.edge_count() {
                let mut full = FullRealization::from_mask(g.edge_count(), mask);
                let status = protection_status(&g, s.nodes(), &positive, &mut full);
                let active = simulate_competing(&g, s.nodes(), &positive, &mut full);
                assert!(status.iter().zip(&active).all(|(p, a)| *p != *a));
            }
        }
    }

    #[test]
    fn opt_examples() {
        let (g, s) = chain();
        let opt = exact_opt(&g, &s, 1).unwrap();
        assert_eq!(opt.seeds, vec![1]);
        assert_eq!(opt.value, ratio(2, 1));
        let opt = exact_opt(&g, &s, 0).unwrap();
        assert_eq!(opt.seeds, Vec::<NodeId>::new());
        assert_eq!(opt.value, BigRational::zero());
    }

    #[test]
    fn opt_matches_exhaustive_f_star() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..40 {
            let (g, s) = random_instance(&mut rng, 6, 9);
            let k = rng.gen_range(1..=3);
            let opt = exact_opt(&g, &s, k).unwrap();
            let mut best: Option<(Vec<NodeId>, BigRational)> = None;
            for seeds in k_subsets(6, k) {
                let f = exact_f_star(&g, &s, &seeds).unwrap().value;
                if best.as_ref().map_or(true, |(_, b)| f > *b) {
                    best = Some((seeds, f));
                }
            }
            let (seeds, value) = best.unwrap();
            assert_eq!(opt.value, value);
            assert_eq!(opt.seeds, seeds);
        }
    }

    #[test]
    fn exact_f_star_is_monotone_and_submodular() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..15 {
            let (g, s) = random_instance(&mut rng, 5, 8);
            let mut values = HashMap::new();
            for mask in 0..1u32 << 5 {
                let seeds: Vec<NodeId> = (0..5).filter(|v| mask >> v & 1 == 1).collect();
                values.insert(mask, exact_f_star(&g, &s, &seeds).unwrap().value);
            }
            for a in 0..1u32 << 5 {
                for b in 0..1u32 << 5 {
                    if a & b != a {
                        continue;
                    }
                    assert!(values[&a] <= values[&b]);
                    for v in 0..5 {
                        if b >> v & 1 == 1 {
                            continue;
                        }
                        let gain_a = &values[&(a | 1 << v)] - &values[&a];
                        let gain_b = &values[&(b | 1 << v)] - &values[&b];
                        assert!(gain_a >= gain_b);
                    }
                }
            }
        }
    }

    #[test]
    fn subsets_are_lexicographic() {
        let all: Vec<Vec<NodeId>> = k_subsets(4, 2).collect();
        assert_eq!(all, vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(k_subsets(3, 0).collect::<Vec<_>>(), vec![Vec::<NodeId>::new()]);
        assert_eq!(k_subsets(2, 3).count(), 0);
        assert_eq!(k_subsets(10, 3).count() as u64, binomial(10, 3));
    }

    #[test]
    fn size_refusals() {
        let edges: Vec<(NodeId, NodeId, f64)> = (0..26).map(|i| (i, i + 1, 0.5)).collect();
        let g = Graph::from_edges(27, edges).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        assert!(matches!(exact_f_star(&g, &s, &[1]), Err(Error::TooLarge(_))));
        assert!(matches!(exact_opt(&g, &s, 1), Err(Error::TooLarge(_))));
        let g = Graph::from_edges(40, vec![(0, 1, 0.5)]).unwrap();
        let s = SeedSet::misinformation(vec![0], &g).unwrap();
        assert!(matches!(exact_opt(&g, &s, 10), Err(Error::TooLarge(_))));
    }
}
