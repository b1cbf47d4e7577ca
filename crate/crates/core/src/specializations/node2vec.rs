use crate::graph_store::{CompactAdj, NodeId};
use crate::traversal::{Bias, BiasFn, BiasQuery, TraversalError};

/// Second-order bias: candidate `i` of `u`, with `prev` the node before `u`,
/// gets mass `p^{-[i = prev]} · q^{-[⟨A[prev], A[i]⟩ > 0]}`.
#[derive(Debug, Clone, Copy)]
pub struct N2vBias<'g> {
    adj: &'g CompactAdj,
    p: f64,
    q: f64,
}

impl<'g> N2vBias<'g> {
    pub fn new(adj: &'g CompactAdj, p: f64, q: f64) -> Result<Self, TraversalError> {
        if !(p > 0.0 && q > 0.0 && p.is_finite() && q.is_finite()) {
            return Err(TraversalError::Callback(format!("node2vec needs p, q > 0 (got p={p}, q={q})")));
        }
        Ok(Self { adj, p, q })
    }

    /// Unnormalized masses over `neighbors(u)` given the path before `u`.
    pub fn weights(&self, path: &[NodeId], u: NodeId, out: &mut Vec<f64>) -> Bias {
        let Some(&prev) = path.last() else { return Bias::Uniform };
        let (inv_p, inv_q) = (1.0 / self.p, 1.0 / self.q);
        out.extend(self.adj.neighbors(u).iter().map(|&i| {
            let mut w = 1.0;
            if i == prev {
                w *= inv_p;
            }
            if self.adj.mutual_neighbors(prev, i) > 0 {
                w *= inv_q;
            }
            w
        }));
        Bias::Weighted
    }
}

/// Convenience form returning the full weight vector (uniform ones on the first step).
pub fn n2v_bias(adj: &CompactAdj, path: &[NodeId], u: NodeId, p: f64, q: f64) -> Result<Vec<f64>, TraversalError> {
    let bias = N2vBias::new(adj, p, q)?;
    let mut out = Vec::new();
    if bias.weights(path, u, &mut out) == Bias::Uniform {
        out = vec![1.0; adj.degree(u)];
    }
    Ok(out)
}

impl<A: ?Sized> BiasFn<A> for N2vBias<'_> {
    fn bias(&mut self, _: &A, query: &BiasQuery<'_>, weights: &mut Vec<f64>) -> Result<Bias, TraversalError> {
        Ok(self.weights(query.path, query.node, weights))
    }

    fn fork(&self) -> Option<Self> {
        Some(*self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::{build_compact_adj, EdgeList};

    fn toy() -> CompactAdj {
        let el = EdgeList::undirected(5, &[(0, 1), (1, 2), (1, 3), (1, 4), (3, 4)]);
        build_compact_adj(&el, true).unwrap().0
    }

    #[test]
    fn unit_parameters_are_uniform() {
        let adj = toy();
        assert_eq!(n2v_bias(&adj, &[0], 1, 1.0, 1.0).unwrap(), vec![1.0; 4]);
        assert_eq!(n2v_bias(&adj, &[], 1, 3.0, 0.2).unwrap(), vec![1.0; 4]);
    }

    #[test]
    fn return_weight() {
        let adj = toy();
        // Neighbors of 1 are [0, 2, 3, 4]; candidate 0 is the previous node.
        // Node 0 shares neighbor 1 with itself, so with q = 1 only p applies.
        let w = n2v_bias(&adj, &[0], 1, 2.0, 1.0).unwrap();
        assert_eq!(w[0], 0.5);
    }

    #[test]
    fn mutual_neighbor_weight() {
        // Directed: 0 -> 1, 1 -> {2, 3}, 3 -> 1; node 2 gets a self-loop.
        let el = EdgeList::directed(4, &[(0, 1), (1, 2), (1, 3), (3, 1)]);
        let (adj, _) = build_compact_adj(&el, false).unwrap();
        // Candidate 3 shares neighbor 1 with the previous node 0; candidate 2 does not.
        assert_eq!(n2v_bias(&adj, &[0], 1, 1.0, 4.0).unwrap(), vec![1.0, 0.25]);
    }

    #[test]
    fn undirected_rows_always_share_the_current_node() {
        // Every candidate i of u and the previous node both neighbor u, so the q
        // factor is common to all candidates and only p changes the distribution.
        let adj = toy();
        assert_eq!(n2v_bias(&adj, &[3], 1, 1.0, 4.0).unwrap(), vec![0.25; 4]);
        assert_eq!(n2v_bias(&adj, &[3], 1, 2.0, 4.0).unwrap(), vec![0.25, 0.25, 0.125, 0.25]);
    }

    #[test]
    fn rejects_bad_parameters() {
        let adj = toy();
        assert!(N2vBias::new(&adj, 0.0, 1.0).is_err());
        assert!(N2vBias::new(&adj, 1.0, -1.0).is_err());
    }
}
