use std::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IndexError {
    #[error("index {value} out of range for bound {bound}")]
    OutOfRange { value: usize, bound: usize },
    #[error("bound must be positive")]
    ZeroBound,
}

/// A natural number drawn from `0..bound`.
///
/// The bound is part of the value: two indices with the same number but
/// different bounds are distinct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoundedIndex {
    value: usize,
    bound: usize,
}

impl BoundedIndex {
    /// Builds an index, rejecting `value >= bound` instead of wrapping.
    pub fn new(value: usize, bound: usize) -> Result<Self, IndexError> {
        if bound == 0 {
            return Err(IndexError::ZeroBound);
        }
        if value >= bound {
            return Err(IndexError::OutOfRange { value, bound });
        }
        Ok(Self { value, bound })
    }

    pub fn value(self) -> usize {
        self.value
    }

    pub fn bound(self) -> usize {
        self.bound
    }

    /// Every index of the given bound, in ascending order.
    pub fn all(bound: usize) -> impl Iterator<Item = BoundedIndex> {
        (0..bound).map(move |value| BoundedIndex { value, bound })
    }
}

impl fmt::Display for BoundedIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// `mk_index(n, bound)`; see [`BoundedIndex::new`].
pub fn mk_index(value: usize, bound: usize) -> Result<BoundedIndex, IndexError> {
    BoundedIndex::new(value, bound)
}
