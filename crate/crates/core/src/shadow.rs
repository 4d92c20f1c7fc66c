//! Mergeable running sums of snapshot operators.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::fock::FockOperator;

/// Sum of `count` snapshots on an N-level space.
///
/// Storing the sum rather than the mean keeps [`Shadow::merge`] exact.
/// The estimate is Hermitian but in general not positive semidefinite.
#[derive(Clone, Debug, PartialEq)]
pub struct Shadow {
    sum: DMatrix<C64>,
    count: u64,
}

impl Shadow {
    pub fn new(dim: usize) -> Self {
        Self {
            sum: DMatrix::zeros(dim, dim),
            count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.nrows()
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn sum(&self) -> &DMatrix<C64> {
        &self.sum
    }

    pub fn add(&mut self, snapshot: &FockOperator) -> Result<()> {
        if snapshot.dim() != self.dim() {
            return Err(Error::DimensionMismatch(format!(
                "snapshot dimension {} vs shadow {}",
                snapshot.dim(),
                self.dim()
            )));
        }
        self.sum += snapshot.matrix();
        self.count += 1;
        Ok(())
    }

    /// Raw access for snapshot builders that accumulate in place; the caller
    /// must add exactly one snapshot per call to [`Shadow::bump`].
    pub(crate) fn sum_mut(&mut self) -> &mut DMatrix<C64> {
        &mut self.sum
    }

    pub(crate) fn bump(&mut self, n: u64) {
        self.count += n;
    }

    /// Records `n` zero snapshots (discarded outcomes that still count
    /// toward the sample size).
    pub fn add_zeros(&mut self, n: u64) {
        self.count += n;
    }

    pub fn merge(&self, other: &Shadow) -> Result<Shadow> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "cannot merge shadows of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        Ok(Shadow {
            sum: &self.sum + &other.sum,
            count: self.count + other.count,
        })
    }

    /// sum / count.
    pub fn estimate(&self) -> Result<FockOperator> {
        if self.count == 0 {
            return Err(Error::EmptySamples);
        }
        let m = &self.sum / C64::new(self.count as f64, 0.0);
        Ok(FockOperator::from_hermitian_unchecked(m))
    }
}
