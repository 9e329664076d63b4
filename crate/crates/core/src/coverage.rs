//! Coverage estimates over stored R-samples and greedy maximum coverage.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use crate::error::{domain, Result};
use crate::graph::NodeId;
use crate::sampler::{RSample, UniformSample};

/// Number of sets of `sample` hit by `seeds`.
pub fn coverage(sample: &RSample, seeds: &[NodeId]) -> usize {
    sample
        .sets
        .iter()
        .filter(|set| set.iter().any(|v| seeds.contains(v)))
        .count()
}

/// Accumulates R-samples into a [`SampleStore`].
#[derive(Clone, Debug)]
pub struct SampleStoreBuilder {
    node_count: usize,
    samples: usize,
    offsets: Vec<usize>,
    nodes: Vec<NodeId>,
    owners: Vec<u32>,
}

impl SampleStoreBuilder {
    pub fn new(node_count: usize) -> SampleStoreBuilder {
        SampleStoreBuilder {
            node_count,
            samples: 0,
            offsets: vec![0],
            nodes: Vec::new(),
            owners: Vec::new(),
        }
    }

    /// Adds one R-sample given as its sets. Empty sets are dropped since they
    /// can never be covered.
    pub fn push_sets<'a, I>(&mut self, sets: I) -> &mut Self
    where
        I: IntoIterator<Item = &'a [NodeId]>,
    {
        let owner = self.samples as u32;
        for set in sets {
            if set.is_empty() {
                continue;
            }
            debug_assert!(set.iter().all(|&v| (v as usize) < self.node_count));
            self.nodes.extend_from_slice(set);
            self.offsets.push(self.nodes.len());
            self.owners.push(owner);
        }
        self.samples += 1;
        self
    }

    pub fn push_rsample(&mut self, sample: &RSample) -> &mut Self {
        self.push_sets(sample.sets.iter().map(Vec::as_slice))
    }

    pub fn push_uniform(&mut self, sample: &UniformSample) -> &mut Self {
        self.push_sets([sample.set()])
    }

    pub fn build(self) -> SampleStore {
        let mut index_offsets = vec![0usize; self.node_count + 1];
        for &v in &self.nodes {
            index_offsets[v as usize + 1] += 1;
        }
        for i in 0..self.node_count {
            index_offsets[i + 1] += index_offsets[i];
        }
        let mut fill = index_offsets.clone();
        let mut index_sets = vec![0u32; self.nodes.len()];
        for set in 0..self.owners.len() {
            for &v in &self.nodes[self.offsets[set]..self.offsets[set + 1]] {
                index_sets[fill[v as usize]] = set as u32;
                fill[v as usize] += 1;
            }
        }
        SampleStore {
            node_count: self.node_count,
            samples: self.samples,
            set_offsets: self.offsets,
            set_nodes: self.nodes,
            owners: self.owners,
            index_offsets,
            index_sets,
        }
    }
}

/// Immutable flat store of protector sets with a node → sets index.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SampleStore {
    node_count: usize,
    samples: usize,
    set_offsets: Vec<usize>,
    set_nodes: Vec<NodeId>,
    owners: Vec<u32>,
    index_offsets: Vec<usize>,
    index_sets: Vec<u32>,
}

impl SampleStore {
    pub fn from_rsamples(node_count: usize, samples: &[RSample]) -> SampleStore {
        let mut builder = SampleStoreBuilder::new(node_count);
        for sample in samples {
            builder.push_rsample(sample);
        }
        builder.build()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Number of R-samples `l`.
    pub fn sample_count(&self) -> usize {
        self.samples
    }

    /// Number of stored (non-empty) sets.
    pub fn set_count(&self) -> usize {
        self.owners.len()
    }

    /// Total entries over all sets.
    pub fn total_size(&self) -> usize {
        self.set_nodes.len()
    }

    pub fn set(&self, id: usize) -> &[NodeId] {
        &self.set_nodes[self.set_offsets[id]..self.set_offsets[id + 1]]
    }

    /// The R-sample a set came from.
    pub fn owner(&self, id: usize) -> usize {
        self.owners[id] as usize
    }

    /// Ids of the sets containing `v`.
    pub fn sets_containing(&self, v: NodeId) -> &[u32] {
        &self.index_sets[self.index_offsets[v as usize]..self.index_offsets[v as usize + 1]]
    }

    /// Number of sets hit by `seeds`.
    pub fn coverage(&self, seeds: &[NodeId]) -> usize {
        let mut hit = vec![false; self.set_count()];
        let mut count = 0;
        for &v in seeds {
            for &set in self.sets_containing(v) {
                if !std::mem::replace(&mut hit[set as usize], true) {
                    count += 1;
                }
            }
        }
        count
    }

    /// Mean coverage per R-sample.
    pub fn mean_coverage(&self, seeds: &[NodeId]) -> Result<f64> {
        if self.samples == 0 {
            return domain("mean coverage of an empty sample store");
        }
        Ok(self.coverage(seeds) as f64 / self.samples as f64)
    }
}

/// Output of the greedy selectors.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GreedySelection {
    /// Seeds in selection order.
    pub seeds: Vec<NodeId>,
    /// Newly covered sets per selected seed.
    pub marginal_gains: Vec<u64>,
    /// Total sets covered by `seeds`.
    pub covered_sets: u64,
    /// Whether some seeds were added with zero gain to reach `k`.
    pub padded: bool,
}

fn check_k(store: &SampleStore, k: usize) -> Result<()> {
    if k == 0 {
        return domain("k must be at least 1");
    }
    if k > store.node_count {
        return domain(format!("k = {k} exceeds the node count {}", store.node_count));
    }
    Ok(())
}

/// Greedy maximum coverage by gain counting. Each round takes the node
/// covering the most uncovered sets, smallest id first on ties; total work is
/// linear in the store size plus `k·n` for the argmax scans.
pub fn greedy(store: &SampleStore, k: usize) -> Result<GreedySelection> {
    check_k(store, k)?;
    let n = store.node_count;
    let mut gain: Vec<u64> = (0..n as NodeId)
        .map(|v| store.sets_containing(v).len() as u64)
        .collect();
    let mut chosen = vec![false; n];
    let mut covered = vec![false; store.set_count()];
    let mut selection = GreedySelection {
        seeds: Vec::with_capacity(k),
        marginal_gains: Vec::with_capacity(k),
        covered_sets: 0,
        padded: false,
    };
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for v in 0..n {
            if !chosen[v] && best.map_or(true, |b| gain[v] > gain[b]) {
                best = Some(v);
            }
        }
        let best = best.expect("k <= n leaves a candidate");
        let g = gain[best];
        chosen[best] = true;
        for &set in store.sets_containing(best as NodeId) {
            if std::mem::replace(&mut covered[set as usize], true) {
                continue;
            }
            for &u in store.set(set as usize) {
                gain[u as usize] -= 1;
            }
        }
        selection.padded |= g == 0;
        selection.covered_sets += g;
        selection.seeds.push(best as NodeId);
        selection.marginal_gains.push(g);
    }
    Ok(selection)
}

/// Lazy (CELF) greedy. Gives the same seeds, gains and flags as [`greedy`].
pub fn greedy_lazy(store: &SampleStore, k: usize) -> Result<GreedySelection> {
    check_k(store, k)?;
    let mut covered = vec![false; store.set_count()];
    let fresh_gain = |v: NodeId, covered: &[bool]| {
        store
            .sets_containing(v)
            .iter()
            .filter(|&&s| !covered[s as usize])
            .count() as u64
    };
    // (gain bound, tie-break, round the bound was computed in)
    let mut heap: BinaryHeap<(u64, Reverse<NodeId>, usize)> = (0..store.node_count as NodeId)
        .map(|v| (store.sets_containing(v).len() as u64, Reverse(v), 0))
        .collect();
    let mut selection = GreedySelection {
        seeds: Vec::with_capacity(k),
        marginal_gains: Vec::with_capacity(k),
        covered_sets: 0,
        padded: false,
    };
    for round in 0..k {
        loop {
            let (bound, Reverse(v), stamp) = heap.pop().expect("k <= n leaves a candidate");
            if stamp != round {
                heap.push((fresh_gain(v, &covered), Reverse(v), round));
                continue;
            }
            for &set in store.sets_containing(v) {
                covered[set as usize] = true;
            }
            selection.padded |= bound == 0;
            selection.covered_sets += bound;
            selection.seeds.push(v);
            selection.marginal_gains.push(bound);
            break;
        }
    }
    Ok(selection)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::best_coverage;
    use proptest::prelude::*;

    fn store(n: usize, samples: &[Vec<Vec<NodeId>>]) -> SampleStore {
        let mut b = SampleStoreBuilder::new(n);
        for s in samples {
            b.push_sets(s.iter().map(Vec::as_slice));
        }
        b.build()
    }

    #[test]
    fn coverage_examples() {
        let r = RSample {
            sets: vec![vec![1], vec![2, 1]],
            sources: vec![1, 2],
        };
        assert_eq!(coverage(&r, &[1]), 2);
        assert_eq!(coverage(&r, &[]), 0);
        assert_eq!(coverage(&RSample::default(), &[1, 2]), 0);
    }

    #[test]
    fn mean_coverage_examples() {
        let s = store(3, &[vec![vec![1], vec![2, 1]], vec![vec![2]]]);
        assert_eq!(s.mean_coverage(&[1]).unwrap(), 1.0);
        assert_eq!(s.mean_coverage(&[]).unwrap(), 0.0);
        assert!(store(3, &[]).mean_coverage(&[1]).is_err());
    }

    #[test]
    fn index_is_the_transpose() {
        let s = store(4, &[vec![vec![0, 2], vec![3]], vec![vec![], vec![2, 3, 1]]]);
        assert_eq!(s.sample_count(), 2);
        assert_eq!(s.set_count(), 3);
        assert_eq!(s.sets_containing(2), &[0, 2]);
        assert_eq!(s.sets_containing(3), &[1, 2]);
        assert_eq!(s.owner(2), 1);
        for v in 0..4 {
            for set in 0..s.set_count() {
                assert_eq!(
                    s.set(set).contains(&v),
                    s.sets_containing(v).contains(&(set as u32))
                );
            }
        }
    }

    #[test]
    fn greedy_examples() {
        // {a}, {a, b}, {c} with a=0, b=1, c=2
        let s = store(3, &[vec![vec![0], vec![0, 1], vec![2]]]);
        let one = greedy(&s, 1).unwrap();
        assert_eq!(one.seeds, vec![0]);
        assert_eq!(one.covered_sets, 2);
        let two = greedy(&s, 2).unwrap();
        assert_eq!(two.seeds, vec![0, 2]);
        assert_eq!(two.marginal_gains, vec![2, 1]);
        assert!(!two.padded);
        let three = greedy(&s, 3).unwrap();
        assert_eq!(three.seeds, vec![0, 2, 1]);
        assert!(three.padded);
        assert!(greedy(&s, 4).is_err());
        assert!(greedy(&s, 0).is_err());
    }

    #[test]
    fn ties_go_to_the_smallest_id() {
        let s = store(4, &[vec![vec![3], vec![1]]]);
        assert_eq!(greedy(&s, 2).unwrap().seeds, vec![1, 3]);
        assert_eq!(greedy(&s, 4).unwrap().seeds, vec![1, 3, 0, 2]);
    }

    fn arb_store() -> impl Strategy<Value = SampleStore> {
        (1usize..=12).prop_flat_map(|n| {
            let set = prop::collection::btree_set(0..n as NodeId, 1..=n.min(5))
                .prop_map(|s| s.into_iter().collect::<Vec<_>>());
            let sample = prop::collection::vec(set, 0..4);
            prop::collection::vec(sample, 1..8).prop_map(move |samples| store(n, &samples))
        })
    }

    proptest! {
        #[test]
        fn monotone_and_submodular(
            s in arb_store(),
            picks in prop::collection::vec(any::<prop::sample::Index>(), 0..6),
            cut in any::<prop::sample::Index>(),
            extra in any::<prop::sample::Index>(),
        ) {
            let n = s.node_count();
            let mut chain: Vec<NodeId> = Vec::new();
            for p in picks {
                let v = p.index(n) as NodeId;
                if !chain.contains(&v) {
                    chain.push(v);
                }
            }
            let small = &chain[..cut.index(chain.len() + 1)];
            let v = extra.index(n) as NodeId;
            let x = |seeds: &[NodeId]| s.mean_coverage(seeds).unwrap();
            prop_assert!(x(small) <= x(&chain));
            if !chain.contains(&v) {
                let with = |base: &[NodeId]| [base, &[v]].concat();
                prop_assert!(x(&with(small)) - x(small) >= x(&with(&chain)) - x(&chain) - 1e-12);
            }
        }

        #[test]
        fn greedy_ratio_and_lazy_agreement(s in arb_store(), k in 1usize..=3) {
            let k = k.min(s.node_count());
            let g = greedy(&s, k).unwrap();
            prop_assert_eq!(&g, &greedy_lazy(&s, k).unwrap());
            prop_assert_eq!(g.covered_sets as usize, s.coverage(&g.seeds));
            let (_, best) = best_coverage(&s, k).unwrap();
            prop_assert!(g.covered_sets as f64 >= (1.0 - (-1.0f64).exp()) * best as f64);
        }
    }
}
