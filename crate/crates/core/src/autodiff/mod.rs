//! Reverse-mode gradients for sequential models, a central-difference
//! verifier, and recovery of the kernel behind a shift- and
//! rotation-equivariant linear map.

mod gradcheck;
mod kernel;
mod params;
mod tape;

pub use gradcheck::{finite_difference_check, finite_difference_check_subset, FdReport};
pub use kernel::{convolution_map, extract_convolution_kernel, KernelExtraction, KERNEL_TOLERANCE};
pub use params::{pack_complex, unpack_complex, ParamBlock, ParamKind, ParamOwner, ParamStore};
pub use tape::{forward_backward, forward_loss, Tape};
