//! Embedding tables, SGD, the trainer loop, and the linear-GCN ensemble check.

pub mod audits;
pub mod factorization;
pub mod gcn;
pub mod table;
pub mod train;

pub use audits::{audit_deepwalk_gradient, audit_factorization_gradient, GradientAuditConfig, GradientAuditReport};
pub use factorization::{factorization_gradient, factorization_loss};
pub use gcn::{ensemble_equivalence_check, linear_gcn_forward, EnsembleConfig, EnsembleReport, LinearGcnModel, Normalization};
pub use table::{SparseGrad, Table};
pub use train::{
    init_model, train_embeddings, EmbeddingModel, LossScale, Method, NegativeSampler, Schedule, TrainConfig, TrainOutput,
};

use thiserror::Error;

use crate::traversal::TraversalError;

#[derive(Debug, Error)]
pub enum LearningError {
    #[error(transparent)]
    Traversal(#[from] TraversalError),
    #[error(transparent)]
    Estimator(#[from] crate::estimators::EstimatorError),
    #[error("gradient contains NaN or infinite entries")]
    NonFiniteGradient,
    #[error("loss became {loss} at round {round} with learning rate {rate}; lower the learning rate")]
    Diverged { round: usize, rate: f64, loss: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("enumeration of {count} sampled adjacencies exceeds the limit of {limit}")]
    EnumerationGuard { count: f64, limit: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
}

/// `Z[r] -= rate * g[r]` for every touched row `r`; other rows are not written.
pub fn sgd_step(table: &mut Table, grad: &SparseGrad, rate: f64) -> Result<(), LearningError> {
    if !grad.is_finite() {
        return Err(LearningError::NonFiniteGradient);
    }
    if grad.cols() != table.cols() {
        return Err(LearningError::Shape(format!("gradient has {} columns, table {}", grad.cols(), table.cols())));
    }
    for (r, g) in grad.iter() {
        table::axpy(table.row_mut(r), -rate, g);
    }
    Ok(())
}

/// Dense variant of [`sgd_step`].
pub fn sgd_step_dense(table: &mut Table, grad: &Table, rate: f64) -> Result<(), LearningError> {
    if !grad.is_finite() {
        return Err(LearningError::NonFiniteGradient);
    }
    if grad.rows() != table.rows() || grad.cols() != table.cols() {
        return Err(LearningError::Shape("dense gradient and table differ in shape".into()));
    }
    table::axpy(table.as_mut_slice(), -rate, grad.as_slice());
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rate_is_identity() {
        let mut t = Table::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let before = t.clone();
        let mut g = SparseGrad::new(2);
        g.add(0, 1.0, &[5.0, 5.0]);
        sgd_step(&mut t, &g, 0.0).unwrap();
        assert_eq!(t, before);
    }

    #[test]
    fn gradient_equal_to_table_zeroes_it() {
        let mut t = Table::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let g = t.clone();
        sgd_step_dense(&mut t, &g, 1.0).unwrap();
        assert!(t.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn single_row_gradient_changes_one_row() {
        let mut t = Table::from_vec(3, 2, vec![1.0; 6]);
        let mut g = SparseGrad::new(2);
        g.add(1, 1.0, &[0.5, -0.5]);
        sgd_step(&mut t, &g, 0.1).unwrap();
        assert_eq!(t.row(0), &[1.0, 1.0]);
        assert_eq!(t.row(2), &[1.0, 1.0]);
        assert_eq!(t.row(1), &[0.95, 1.05]);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut t = Table::zeros(1, 1);
        let mut g = SparseGrad::new(1);
        g.add(0, 1.0, &[f64::NAN]);
        assert!(matches!(sgd_step(&mut t, &g, 0.1), Err(LearningError::NonFiniteGradient)));
    }
}
