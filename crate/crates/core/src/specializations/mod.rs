//! Accumulate and bias callbacks for message passing and node embeddings.

pub mod deepwalk;
pub mod node2vec;
pub mod rooted;
pub mod wys;

pub use deepwalk::{Contrastive, DeepWalkAcc};
pub use node2vec::{n2v_bias, N2vBias};
pub use rooted::{
    audit_message_passing, no_revisit_bias, renormalize, symmetric_normalized, MessagePassingAuditConfig,
    MessagePassingReport, NoRevisitBias, NormalizedAdjacency, RootedAdjacency, SelfLoops,
};
pub use wys::WysAcc;
