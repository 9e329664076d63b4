//! The end-to-end selection pipeline: lower-bound estimation, sample-count
//! parameters, sampling and greedy coverage.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::coverage::{greedy, GreedySelection, SampleStoreBuilder};
use crate::error::{domain, Error, Result};
use crate::graph::{Graph, NodeId, SeedSet};
use crate::rng::{stream_rng, Purpose};
use crate::sampler::{hybrid_range, RSample, Sampler, SeedRoots};

/// 1 − 1/e.
pub const GREEDY_RATIO: f64 = 1.0 - 1.0 / std::f64::consts::E;

/// ln C(n, k) through log-gamma.
pub fn ln_binomial(n: u64, k: u64) -> f64 {
    statrs::function::factorial::ln_binomial(n, k)
}

/// The two sample-count terms `(l1, l2)`:
///
/// ```text
/// l1 = n (ln C(n,k) + ln N) (2 + ε11 (1 + ε)) / ε11²
/// l2 = 2 n ln N / ε12²
/// ```
pub fn compute_l1_l2(
    n: usize,
    k: usize,
    big_n: f64,
    epsilon: f64,
    eps11: f64,
    eps12: f64,
) -> Result<(f64, f64)> {
    if !(eps11 > 0.0 && eps12 > 0.0) {
        return domain(format!("eps11 and eps12 must be positive (got {eps11}, {eps12})"));
    }
    if k > n {
        return domain(format!("k = {k} exceeds n = {n}"));
    }
    let n_f = n as f64;
    let ln_n = big_n.ln();
    let l1 = n_f * (ln_binomial(n as u64, k as u64) + ln_n) * (2.0 + eps11 * (1.0 + epsilon)) / (eps11 * eps11);
    let l2 = 2.0 * n_f * ln_n / (eps12 * eps12);
    Ok((l1, l2))
}

/// `ε11` as forced by the accuracy constraint for a given `ε12`.
pub fn eps11_for(epsilon: f64, eps12: f64) -> f64 {
    (epsilon - GREEDY_RATIO * (1.0 + epsilon) * eps12) / (1.0 + epsilon)
}

/// Residual of `(1 − ε12(1+ε))(1 − 1/e) − ε11(1+ε) = 1 − 1/e − ε`.
pub fn constraint_residual(epsilon: f64, eps11: f64, eps12: f64) -> f64 {
    (1.0 - eps12 * (1.0 + epsilon)) * GREEDY_RATIO - eps11 * (1.0 + epsilon) - (GREEDY_RATIO - epsilon)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon < GREEDY_RATIO {
        Ok(())
    } else {
        domain(format!("epsilon = {epsilon} is outside the valid range (0, 1-1/e) = (0, {GREEDY_RATIO:.6})"))
    }
}

fn check_big_n(big_n: f64, min: f64) -> Result<()> {
    if big_n > min && big_n.is_finite() {
        Ok(())
    } else {
        domain(format!("N = {big_n} must be a finite number greater than {min}"))
    }
}

/// Splits `ε` into `(ε11, ε12)` minimizing `max(l1, l2)`.
///
/// `l1` grows and `l2` shrinks as `ε12` grows, so the maximum is unimodal in
/// `ε12` and a ternary search over the feasible interval finds it.
pub fn solve_epsilons(n: usize, k: usize, big_n: f64, epsilon: f64) -> Result<(f64, f64)> {
    check_epsilon(epsilon)?;
    check_big_n(big_n, 1.0)?;
    if k == 0 || k > n {
        return domain(format!("k = {k} must be in [1, n = {n}]"));
    }
    let objective = |eps12: f64| {
        let (l1, l2) = compute_l1_l2(n, k, big_n, epsilon, eps11_for(epsilon, eps12), eps12)
            .expect("interior point is feasible");
        l1.max(l2)
    };
    let upper = epsilon / (GREEDY_RATIO * (1.0 + epsilon));
    let (mut lo, mut hi) = (0.0, upper);
    for _ in 0..400 {
        if hi - lo <= 1e-9 * hi {
            break;
        }
        let a = lo + (hi - lo) / 3.0;
        let b = hi - (hi - lo) / 3.0;
        if objective(a) <= objective(b) {
            hi = b;
        } else {
            lo = a;
        }
    }
    let eps12 = 0.5 * (lo + hi);
    Ok((eps11_for(epsilon, eps12), eps12))
}

/// Seeds for the lower-bound estimate: out-neighbors of the misinformation
/// seeds, by out-degree, padded with the highest-out-degree other nodes.
pub fn choose_lower_bound_seeds(graph: &Graph, misinfo: &SeedSet, k: usize) -> Result<SeedSet> {
    let is_seed = misinfo.mask(graph.node_count());
    let available = is_seed.iter().filter(|&&s| !s).count();
    if k > available {
        return domain(format!(
            "k = {k} exceeds the {available} nodes that are not misinformation seeds"
        ));
    }
    let mut neighbor = vec![false; graph.node_count()];
    for &r in misinfo.nodes() {
        for arc in graph.out_arcs(r) {
            neighbor[arc.node as usize] = true;
        }
    }
    let ranked = graph.by_out_degree();
    let first = ranked.iter().filter(|&&v| neighbor[v as usize] && !is_seed[v as usize]);
    let rest = ranked.iter().filter(|&&v| !neighbor[v as usize] && !is_seed[v as usize]);
    let nodes: Vec<NodeId> = first.chain(rest).copied().take(k).collect();
    SeedSet::positive(nodes, graph)
}

/// Settings of the stopping-rule lower-bound estimator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StoppingRule {
    pub epsilon0: f64,
    pub big_n: f64,
    /// Give up after this many samples.
    pub budget: u64,
}

impl StoppingRule {
    /// `Υ = 1 + 4(e − 2)(1 + ε0) ln(2N) / ε0²`.
    pub fn threshold(&self) -> f64 {
        let e0 = self.epsilon0;
        1.0 + 4.0 * (std::f64::consts::E - 2.0) * (1.0 + e0) * (2.0 * self.big_n).ln() / (e0 * e0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LowerBound {
    pub opt_lower: f64,
    /// Samples consumed before the threshold was crossed.
    pub samples: u64,
    pub edges_examined: u64,
}

const FIRST_BATCH: u64 = 1 << 10;
const MAX_BATCH: u64 = 1 << 18;

/// Stopping-rule estimate of the prevention effect of `lower_seeds`.
///
/// Draws `X_i = x(𝒫_i, S_L) / n` until `Σ X_i ≥ Υ` and returns `n Υ / T`,
/// which lies within `(1 ± ε0)` of the true value with probability at least
/// `1 − 1/N`. Samples are generated in indexed batches and scanned in order,
/// so the result does not depend on the thread count.
pub fn estimate_lower_bound(
    sampler: &Sampler<'_>,
    lower_seeds: &SeedSet,
    rule: &StoppingRule,
    seed: u64,
) -> Result<LowerBound> {
    if !(rule.epsilon0 > 0.0 && rule.epsilon0 <= 1.0) {
        return domain(format!("epsilon0 = {} is outside (0, 1]", rule.epsilon0));
    }
    check_big_n(rule.big_n, 1.0)?;
    let graph = sampler.graph();
    let n = graph.node_count() as f64;
    let upsilon = rule.threshold();
    let target = upsilon * n;
    let in_lower = lower_seeds.mask(graph.node_count());

    let mut sum: u64 = 0;
    let mut used: u64 = 0;
    let mut edges: u64 = 0;
    let mut batch = FIRST_BATCH;
    while used < rule.budget {
        let end = (used + batch).min(rule.budget);
        let results: Vec<(u64, u64)> = (used..end)
            .into_par_iter()
            .map_init(
                || sampler.workspace(),
                |workspace, i| {
                    let mut rng = stream_rng(seed, Purpose::LowerBound, i);
                    let before = workspace.scratch.edges_examined();
                    let sample = sampler.hybrid_sample(workspace, &mut rng)?;
                    Ok((hits(&sample, &in_lower), workspace.scratch.edges_examined() - before))
                },
            )
            .collect::<Result<_>>()?;
        for (x, e) in results {
            sum += x;
            used += 1;
            edges += e;
            if sum as f64 >= target {
                return Ok(LowerBound {
                    opt_lower: n * upsilon / used as f64,
                    samples: used,
                    edges_examined: edges,
                });
            }
        }
        batch = (batch * 2).min(MAX_BATCH);
    }
    Err(Error::Degenerate(format!(
        "the lower-bound estimate did not converge within {} samples; the misinformation \
         seeds barely spread or the lower-bound seeds cannot protect anything",
        rule.budget
    )))
}

fn hits(sample: &RSample, mask: &[bool]) -> u64 {
    sample
        .sets
        .iter()
        .filter(|set| set.iter().any(|&v| mask[v as usize]))
        .count() as u64
}

/// Result of sampling plus greedy selection.
#[derive(Clone, Debug)]
pub struct Framework {
    pub selection: GreedySelection,
    pub edges_examined: u64,
    pub sampling_time: Duration,
    pub greedy_time: Duration,
}

const STORE_CHUNK: u64 = 1 << 16;

/// Generates `l` hybrid R-samples and greedily picks `k` seeds covering them.
pub fn framework(sampler: &Sampler<'_>, k: usize, l: u64, seed: u64) -> Result<Framework> {
    if l == 0 {
        return domain("the number of samples l must be at least 1");
    }
    let start = Instant::now();
    let mut builder = SampleStoreBuilder::new(sampler.graph().node_count());
    let mut edges_examined = 0;
    let mut next = 0;
    while next < l {
        let end = (next + STORE_CHUNK).min(l);
        let batch = hybrid_range(sampler, next..end, seed, Purpose::Framework)?;
        for sample in &batch.samples {
            builder.push_rsample(sample);
        }
        edges_examined += batch.edges_examined;
        next = end;
    }
    let store = builder.build();
    let sampling_time = start.elapsed();
    let start = Instant::now();
    let selection = greedy(&store, k)?;
    Ok(Framework {
        selection,
        edges_examined,
        sampling_time,
        greedy_time: start.elapsed(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct HmpConfig {
    pub k: usize,
    pub epsilon: f64,
    pub big_n: f64,
    pub seed: u64,
    /// Sample cap for the lower-bound phase.
    pub sample_budget: u64,
    /// Use `OPT_L = k` instead of failing when the lower-bound phase hits
    /// its cap. The approximation guarantee is lost in that case.
    pub fallback_on_degenerate: bool,
    pub seed_roots: SeedRoots,
}

impl HmpConfig {
    pub fn new(k: usize, epsilon: f64, big_n: f64, seed: u64) -> HmpConfig {
        HmpConfig {
            k,
            epsilon,
            big_n,
            seed,
            sample_budget: 100_000_000,
            fallback_on_degenerate: false,
            seed_roots: SeedRoots::Skip,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct HmpParams {
    pub epsilon: f64,
    pub big_n: f64,
    pub k: usize,
    pub epsilon0: f64,
    pub eps11: f64,
    pub eps12: f64,
    pub l1: f64,
    pub l2: f64,
    pub opt_lower: f64,
    pub l: u64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PhaseTimings {
    pub lower_bound: Duration,
    pub parameters: Duration,
    pub sampling: Duration,
    pub greedy: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Diagnostics {
    pub lower_bound_seeds: Vec<NodeId>,
    pub lower_bound_samples: u64,
    /// `OPT_L` came from the degenerate-instance fallback.
    pub fallback_used: bool,
    pub timings: PhaseTimings,
    pub edges_examined: u64,
}

#[derive(Clone, Debug)]
pub struct HmpOutcome {
    pub seeds: Vec<NodeId>,
    pub selection: GreedySelection,
    pub params: HmpParams,
    pub diagnostics: Diagnostics,
}

/// Selects `k` positive seeds whose prevention effect is at least
/// `(1 − 1/e − ε)` times the optimum with probability at least `1 − 3/N`.
pub fn hmp(graph: &Graph, misinfo: &SeedSet, config: &HmpConfig) -> Result<HmpOutcome> {
    check_epsilon(config.epsilon)?;
    check_big_n(config.big_n, 3.0)?;
    if misinfo.is_empty() {
        return domain("the misinformation seed set is empty");
    }
    if config.k == 0 {
        return domain("k must be at least 1");
    }
    let n = graph.node_count();
    let sampler = Sampler::new(graph, misinfo).with_seed_roots(config.seed_roots);
    let mut timings = PhaseTimings::default();

    let start = Instant::now();
    let lower_seeds = choose_lower_bound_seeds(graph, misinfo, config.k)?;
    let epsilon = config.epsilon;
    let rule = StoppingRule {
        epsilon0: (epsilon * epsilon + 2.0 * epsilon).min(1.0),
        big_n: config.big_n,
        budget: config.sample_budget,
    };
    let (opt_lower, lower_bound_samples, mut edges_examined, fallback_used) =
        match estimate_lower_bound(&sampler, &lower_seeds, &rule, config.seed) {
            Ok(lb) => (lb.opt_lower, lb.samples, lb.edges_examined, false),
            Err(Error::Degenerate(_)) if config.fallback_on_degenerate => {
                (config.k as f64, config.sample_budget, 0, true)
            }
            Err(e) => return Err(e),
        };
    timings.lower_bound = start.elapsed();

    let start = Instant::now();
    let (eps11, eps12) = solve_epsilons(n, config.k, config.big_n, epsilon)?;
    let (l1, l2) = compute_l1_l2(n, config.k, config.big_n, epsilon, eps11, eps12)?;
    let l = ((l1.max(l2) / opt_lower).ceil() as u64).max(1);
    timings.parameters = start.elapsed();

    let run = framework(&sampler, config.k, l, config.seed)?;
    timings.sampling = run.sampling_time;
    timings.greedy = run.greedy_time;
    edges_examined += run.edges_examined;

    Ok(HmpOutcome {
        seeds: run.selection.seeds.clone(),
        selection: run.selection,
        params: HmpParams {
            epsilon,
            big_n: config.big_n,
            k: config.k,
            epsilon0: rule.epsilon0,
            eps11,
            eps12,
            l1,
            l2,
            opt_lower,
            l,
        },
        diagnostics: Diagnostics {
            lower_bound_seeds: lower_seeds.nodes().to_vec(),
            lower_bound_samples,
            fallback_used,
            timings,
            edges_examined,
        },
    })
}
