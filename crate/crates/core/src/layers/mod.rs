//! Forward semantics of the equivariant layer family: circular convolution,
//! radial activations, coarsening, upsampling and invariant global pooling.
//!
//! Every map here commutes with the G_n action (coarsening only with the
//! subgroup matching its stride), which the property tests check directly.

mod activation;
mod coarsen;
mod conv;
mod pool;

pub use activation::{activation_forward, Activation, ActivationKind, RadialProfile};
pub use coarsen::{coarsen_forward, upsample_forward, Aggregator, CoarsenMode, CoarsenSpec};
pub use conv::{circular_convolution, conv_forward, FilterBank};
pub use pool::{global_pool_forward, GlobalPoolSpec};

pub(crate) use activation::{activation_backward, apply_kind};
pub(crate) use coarsen::{coarsen_apply, upsample_apply};
pub(crate) use conv::{conv_apply, conv_backward};
pub(crate) use pool::{pool_apply, pool_backward, PoolCache};
