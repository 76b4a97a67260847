//! Subproblem solvers for the alternating scheme.

mod coefficients;
mod spatial;
mod temporal;

pub use coefficients::update_coefficients;
pub use spatial::update_spatial;
pub use temporal::{CgSettings, CgSolution, TemporalProblem, ORACLE_CAP};

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};

/// Stacked VAR coefficients `[A_1 ... A_d]`, an `R x dR` matrix.
///
/// `A_0 = -I` is implied by the temporal loss and never stored.
#[derive(Debug, Clone, PartialEq)]
pub struct VarCoefficients {
    stacked: DMatrix<f64>,
    order: usize,
    diagonal: bool,
}

impl VarCoefficients {
    pub fn zeros(rank: usize, order: usize, diagonal: bool) -> Self {
        Self {
            stacked: DMatrix::zeros(rank, rank * order),
            order,
            diagonal,
        }
    }

    pub fn new(stacked: DMatrix<f64>, order: usize, diagonal: bool) -> Result<Self> {
        let rank = stacked.nrows();
        if order == 0 || stacked.ncols() != rank * order {
            return Err(Error::Dimension(format!(
                "coefficient matrix {:?} is not R x dR for d={order}",
                stacked.shape()
            )));
        }
        if diagonal {
            for k in 0..order {
                for c in 0..rank {
                    for r in 0..rank {
                        if r != c && stacked[(r, k * rank + c)] != 0.0 {
                            return Err(Error::Config(format!(
                                "diagonal coefficients have off-diagonal entry in block {}",
                                k + 1
                            )));
                        }
                    }
                }
            }
        }
        Ok(Self {
            stacked,
            order,
            diagonal,
        })
    }

    /// Builds from blocks `A_1 .. A_d`.
    pub fn from_blocks(blocks: &[DMatrix<f64>], diagonal: bool) -> Result<Self> {
        let Some(first) = blocks.first() else {
            return Err(Error::Config(
                "at least one coefficient block required".into(),
            ));
        };
        let rank = first.nrows();
        let mut stacked = DMatrix::zeros(rank, rank * blocks.len());
        for (k, b) in blocks.iter().enumerate() {
            if b.shape() != (rank, rank) {
                return Err(Error::Dimension(format!(
                    "block {} is {:?}, expected {rank}x{rank}",
                    k + 1,
                    b.shape()
                )));
            }
            stacked.columns_mut(k * rank, rank).copy_from(b);
        }
        Self::new(stacked, blocks.len(), diagonal)
    }

    pub fn rank(&self) -> usize {
        self.stacked.nrows()
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn is_diagonal(&self) -> bool {
        self.diagonal
    }

    pub fn stacked(&self) -> &DMatrix<f64> {
        &self.stacked
    }

    /// Block `A_k` for `k` in `1..=d`.
    pub fn block(&self, k: usize) -> DMatrixView<'_, f64> {
        assert!(
            k >= 1 && k <= self.order,
            "lag {k} outside 1..={}",
            self.order
        );
        let r = self.rank();
        self.stacked.columns((k - 1) * r, r)
    }
}
