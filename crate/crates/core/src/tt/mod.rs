//! Tensor-train containers and algebra.
//!
//! Dense conventions used throughout: a TT vector with mode sizes
//! `(n_1, …, n_D)` flattens to a dense array in row-major order (first mode
//! most significant), so the TT of `v ⊗ w` densifies to `kron(v, w)`. A TT
//! operator densifies to the matrix with that ordering on rows and columns.

mod block;
pub(crate) mod frame;
mod operator;
mod vector;

pub use block::{Block3, Block4};
pub use frame::{frame_reduce, ReducedSystem};
pub use operator::TtOperator;
pub use vector::{RoundingReport, TtVector};
pub(crate) use vector::gauss;

use crate::{Error, Result};

/// Default entry limit for densification (`4^11`).
pub const DEFAULT_DENSE_LIMIT: usize = 1 << 22;

/// Relative SVD truncation threshold plus an optional rank cap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPolicy {
    pub tolerance: f64,
    pub max_rank: Option<usize>,
}

impl TruncationPolicy {
    pub fn new(tolerance: f64) -> Result<Self> {
        Self::with_cap(tolerance, None)
    }

    pub fn with_cap(tolerance: f64, max_rank: Option<usize>) -> Result<Self> {
        if !(tolerance > 0.0 && tolerance < 1.0) {
            return Err(Error::InvalidArgument(format!("truncation tolerance {tolerance} not in (0, 1)")));
        }
        if max_rank == Some(0) {
            return Err(Error::InvalidArgument("rank cap must be positive".into()));
        }
        Ok(Self { tolerance, max_rank })
    }

    /// Per-bond absolute threshold: the global budget `ε·‖x‖` split evenly
    /// over the `D − 1` bonds in the squared sense.
    pub(crate) fn bond_threshold(&self, norm: f64, ndim: usize) -> f64 {
        let bonds = ndim.saturating_sub(1).max(1) as f64;
        self.tolerance * norm / bonds.sqrt()
    }
}

impl Default for TruncationPolicy {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_rank: None }
    }
}

/// Orthogonality marker: the first `left` blocks are left-orthonormal and the
/// last `right` blocks are right-orthonormal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Gauge {
    pub left: usize,
    pub right: usize,
}

impl Gauge {
    pub const NONE: Gauge = Gauge { left: 0, right: 0 };

    /// Mixed-canonical form centred on `pivot` for a train of `ndim` blocks.
    pub fn pivot(pivot: usize, ndim: usize) -> Self {
        Gauge { left: pivot, right: ndim - 1 - pivot }
    }

    /// Returns the pivot if the marker describes a mixed-canonical form.
    pub fn centre(&self, ndim: usize) -> Option<usize> {
        (self.left + self.right + 1 >= ndim).then_some(self.left.min(ndim - 1))
    }

    pub fn is_centred_at(&self, pivot: usize, ndim: usize) -> bool {
        self.left >= pivot && self.right + pivot + 1 >= ndim
    }
}
