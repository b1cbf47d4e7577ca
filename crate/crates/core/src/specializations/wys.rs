use crate::graph_store::NodeId;
use crate::learning::table::{axpy, dot, Table};
use crate::specializations::deepwalk::{log_sigmoid, sigmoid};
use crate::traversal::{AccumulateFn, TraversalError, Visit};

/// Context-weighted accumulator over split tables `L`, `R` with trainable
/// per-position coefficients `Q`.
#[derive(Debug, Clone)]
pub struct WysAcc<'a> {
    l: &'a Table,
    r: &'a Table,
    q: &'a [f64],
    pub loss: f64,
    pub grad_l: Table,
    pub grad_r: Table,
    pub grad_q: Vec<f64>,
    pub positives: usize,
}

impl<'a> WysAcc<'a> {
    /// Start from the negative part `-Σ_{u∈B} log σ(-E_v[⟨R_u, L_v⟩ + ⟨R_v, L_u⟩])`
    /// with the expectation over uniform `v` taken exactly.
    pub fn new(l: &'a Table, r: &'a Table, q: &'a [f64], batch: &[NodeId]) -> Self {
        let n = l.rows();
        let mut acc = Self {
            l,
            r,
            q,
            loss: 0.0,
            grad_l: Table::zeros(n, l.cols()),
            grad_r: Table::zeros(n, r.cols()),
            grad_q: vec![0.0; q.len()],
            positives: 0,
        };
        let l_bar = l.column_mean();
        let r_bar = r.column_mean();
        let mut spread_l = vec![0.0; l.cols()];
        let mut spread_r = vec![0.0; r.cols()];
        for &u in batch {
            let s = dot(r.row(u), &l_bar) + dot(&r_bar, l.row(u));
            acc.loss -= log_sigmoid(-s);
            let g = sigmoid(s);
            axpy(acc.grad_r.row_mut(u), g, &l_bar);
            axpy(acc.grad_l.row_mut(u), g, &r_bar);
            axpy(&mut spread_l, g / n as f64, r.row(u));
            axpy(&mut spread_r, g / n as f64, l.row(u));
        }
        for v in 0..n {
            axpy(acc.grad_l.row_mut(v), 1.0, &spread_l);
            axpy(acc.grad_r.row_mut(v), 1.0, &spread_r);
        }
        acc
    }
}

impl AccumulateFn for WysAcc<'_> {
    fn accumulate(&mut self, visit: &Visit<'_>) -> Result<(), TraversalError> {
        if visit.path.len() != self.q.len() {
            return Ok(());
        }
        let (l, r, q) = (self.l, self.r, self.q);
        let t = visit.path[0];
        let context: Vec<NodeId> = visit.path[1..].iter().copied().chain([visit.node]).collect();
        let mut ctx_l = vec![0.0; l.cols()];
        let mut ctx_r = vec![0.0; r.cols()];
        for (j, &c) in context.iter().enumerate() {
            axpy(&mut ctx_l, q[j], l.row(c));
            axpy(&mut ctx_r, q[j], r.row(c));
        }
        let s = dot(r.row(t), &ctx_l) + dot(l.row(t), &ctx_r);
        self.loss -= log_sigmoid(s);
        self.positives += 1;
        let g = -sigmoid(-s);
        axpy(self.grad_r.row_mut(t), g, &ctx_l);
        axpy(self.grad_l.row_mut(t), g, &ctx_r);
        for (j, &c) in context.iter().enumerate() {
            axpy(self.grad_l.row_mut(c), g * q[j], r.row(t));
            axpy(self.grad_r.row_mut(c), g * q[j], l.row(t));
            self.grad_q[j] += g * (dot(r.row(t), l.row(c)) + dot(l.row(t), r.row(c)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph_store::{build_compact_adj, CompactAdj, EdgeList};
    use crate::rng::RngStream;
    use crate::traversal::{replay, traverse, FanoutSpec, NoAccumulate, TraverseOptions, UniformBias, WalkForest};
    use rand::SeedableRng;

    fn visit<'v>(path: &'v [NodeId], ids: &'v [usize], node: NodeId) -> Visit<'v> {
        Visit { path, path_ids: ids, node, id: 99, tree: 0, depth: path.len(), slot: 0, fanout: 1 }
    }

    #[test]
    fn short_paths_are_ignored() {
        let l = Table::zeros(3, 2);
        let q = [1.0, 0.5];
        let mut acc = WysAcc::new(&l, &l, &q, &[]);
        acc.accumulate(&visit(&[0], &[0], 1)).unwrap();
        assert_eq!(acc.positives, 0);
        assert_eq!(acc.loss, 0.0);
    }

    #[test]
    fn zero_tables_cost_log_two_per_positive() {
        let l = Table::zeros(3, 2);
        let q = [1.0];
        let mut acc = WysAcc::new(&l, &l, &q, &[]);
        acc.accumulate(&visit(&[0], &[0], 1)).unwrap();
        acc.accumulate(&visit(&[2], &[0], 1)).unwrap();
        assert!((acc.loss - 2.0 * std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn one_step_term() {
        // R_t·L_u = 1 and R_u·L_t = 1 give a score of 2.
        let l = Table::from_vec(2, 1, vec![1.0, 1.0]);
        let r = Table::from_vec(2, 1, vec![1.0, 1.0]);
        let q = [1.0];
        let mut acc = WysAcc::new(&l, &r, &q, &[]);
        acc.accumulate(&visit(&[0], &[0], 1)).unwrap();
        assert!((acc.loss + log_sigmoid(2.0)).abs() < 1e-15);
    }

    fn loss_at(l: &Table, r: &Table, q: &[f64], forest: &WalkForest, batch: &[NodeId]) -> f64 {
        let mut acc = WysAcc::new(l, r, q, batch);
        replay(forest, &mut acc).unwrap();
        acc.loss
    }

    fn graph() -> CompactAdj {
        let el = EdgeList::undirected(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (0, 3)]);
        build_compact_adj(&el, true).unwrap().0
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let adj = graph();
        let batch = [0, 4];
        let forest = traverse(
            &adj,
            &batch,
            &FanoutSpec::new(vec![2, 2]).unwrap(),
            &mut NoAccumulate,
            &mut UniformBias,
            &RngStream::new(3),
            &TraverseOptions::default(),
        )
        .unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let h = 1e-5;
        let close = |fd: f64, g: f64| (fd - g).abs() <= 1e-4 * g.abs().max(1e-3);
        for _ in 0..10 {
            let l = Table::uniform(6, 2, 0.7, &mut rng);
            let r = Table::uniform(6, 2, 0.7, &mut rng);
            let q = vec![0.8, 0.3];
            let mut acc = WysAcc::new(&l, &r, &q, &batch);
            replay(&forest, &mut acc).unwrap();
            for i in 0..l.as_slice().len() {
                let (mut lp, mut lm) = (l.clone(), l.clone());
                lp.as_mut_slice()[i] += h;
                lm.as_mut_slice()[i] -= h;
                let fd = (loss_at(&lp, &r, &q, &forest, &batch) - loss_at(&lm, &r, &q, &forest, &batch)) / (2.0 * h);
                assert!(close(fd, acc.grad_l.as_slice()[i]), "L {i}: {fd} vs {}", acc.grad_l.as_slice()[i]);
                let (mut rp, mut rm) = (r.clone(), r.clone());
                rp.as_mut_slice()[i] += h;
                rm.as_mut_slice()[i] -= h;
                let fd = (loss_at(&l, &rp, &q, &forest, &batch) - loss_at(&l, &rm, &q, &forest, &batch)) / (2.0 * h);
                assert!(close(fd, acc.grad_r.as_slice()[i]), "R {i}: {fd} vs {}", acc.grad_r.as_slice()[i]);
            }
            for j in 0..q.len() {
                let (mut qp, mut qm) = (q.clone(), q.clone());
                qp[j] += h;
                qm[j] -= h;
                let fd = (loss_at(&l, &r, &qp, &forest, &batch) - loss_at(&l, &r, &qm, &forest, &batch)) / (2.0 * h);
                assert!(close(fd, acc.grad_q[j]), "Q {j}: {fd} vs {}", acc.grad_q[j]);
            }
        }
    }
}
