//! Equivariant deep learning on closed contours.
//!
//! A contour is a `k`-channel complex signal on the cyclic group `Z_n`. The
//! group `Z_n x S^1` acts on it by cyclic shifts and by multiplication with a
//! unit complex number (a rotation of the plane). Every layer here commutes
//! with that action, so classifiers built from them are exactly rotation
//! invariant and per-node regressors are exactly shift equivariant.
//!
//! ```
//! use eqcontour::contour::{act, Contour, GroupElement};
//! use eqcontour::layers::{conv_forward, FilterBank};
//! use num_complex::Complex64;
//!
//! let x = Contour::from_points(&[(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)]).unwrap();
//! let bank = FilterBank::single(vec![Complex64::new(0.5, 0.0), Complex64::new(0.0, 0.25)]).unwrap();
//! let g = GroupElement::new(1, 0.7, 4).unwrap();
//! let lhs = conv_forward(&bank, &act(&g, &x)).unwrap();
//! let rhs = act(&g, &conv_forward(&bank, &x).unwrap());
//! assert!(lhs.max_abs_diff(&rhs) < 1e-12);
//! ```

pub mod autodiff;
pub mod checks;
pub mod contour;
pub mod data;
pub mod error;
pub mod layers;
pub mod model;
pub mod optim;
pub mod preprocess;

pub use contour::{act, normalize, recenter, Contour, GroupElement};
pub use error::{Error, Result};
pub use model::Model;
