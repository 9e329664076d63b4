//! Synthetic graphs for tests and desk-scale benchmarks. All generators give
//! every edge probability 1; assign a probability model afterwards.

use rand::seq::SliceRandom;
use rand::Rng;

use super::{Graph, NodeId};
use crate::error::{domain, Result};

/// Barabási–Albert preferential attachment, symmetrized: each new node links
/// to `attach` distinct existing nodes chosen proportionally to degree, and
/// each link becomes a pair of opposite directed edges.
pub fn scale_free<R: Rng + ?Sized>(n: usize, attach: usize, rng: &mut R) -> Result<Graph> {
    if attach == 0 || n <= attach {
        return domain(format!("scale-free graph needs n > attach >= 1 (n={n}, attach={attach})"));
    }
    // Each endpoint appears once per incident link, so sampling from it is
    // degree-proportional.
    let mut endpoints: Vec<NodeId> = Vec::with_capacity(2 * n * attach);
    let mut links: Vec<(NodeId, NodeId)> = Vec::with_capacity(n * attach);

    // Start from a clique on attach + 1 nodes.
    for u in 0..=attach as NodeId {
        for v in 0..u {
            links.push((u, v));
            endpoints.extend([u, v]);
        }
    }
    let mut targets: Vec<NodeId> = Vec::with_capacity(attach);
    for u in (attach + 1) as NodeId..n as NodeId {
        targets.clear();
        while targets.len() < attach {
            let t = *endpoints.choose(rng).expect("non-empty after the clique");
            if !targets.contains(&t) {
                targets.push(t);
            }
        }
        for &t in &targets {
            links.push((u, t));
            endpoints.extend([u, t]);
        }
    }
    let edges = links
        .into_iter()
        .flat_map(|(u, v)| [(u, v, 1.0), (v, u, 1.0)]);
    Graph::from_edges(n, edges)
}

/// Directed G(n, p): every ordered pair of distinct nodes is an edge with
/// probability `density`.
pub fn gnp<R: Rng + ?Sized>(n: usize, density: f64, rng: &mut R) -> Result<Graph> {
    if !(0.0..=1.0).contains(&density) {
        return domain(format!("edge density {density} is outside [0, 1]"));
    }
    let mut edges = Vec::new();
    for u in 0..n as NodeId {
        for v in 0..n as NodeId {
            if u != v && rng.gen_bool(density) {
                edges.push((u, v, 1.0));
            }
        }
    }
    Graph::from_edges(n, edges)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn scale_free_shape() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = scale_free(500, 3, &mut rng).unwrap();
        assert_eq!(g.node_count(), 500);
        // clique of 4 nodes (6 links) plus 3 links per later node, both directions
        assert_eq!(g.edge_count(), 2 * (6 + 3 * 496));
        assert!(g.nodes().all(|v| g.out_degree(v) == g.in_degree(v) && g.out_degree(v) >= 3));
        let max = g.nodes().map(|v| g.out_degree(v)).max().unwrap();
        assert!(max > 20, "expected hubs, max degree {max}");
    }

    #[test]
    fn gnp_extremes() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(gnp(5, 0.0, &mut rng).unwrap().edge_count(), 0);
        assert_eq!(gnp(5, 1.0, &mut rng).unwrap().edge_count(), 20);
    }
}
