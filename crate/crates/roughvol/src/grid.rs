//! Uniform time grid on [0, T].

use crate::error::{Result, RoughVolError};
use crate::real::Real;
use num_traits::Float;

/// Uniform grid t_i = i·T/n, i = 0..=n.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimeGrid<T: Real> {
    horizon: T,
    n: usize,
}

impl<T: Real> TimeGrid<T> {
    pub fn new(horizon: T, n: usize) -> Result<Self> {
        if !Float::is_finite(horizon) || horizon <= T::zero() {
            return Err(RoughVolError::InvalidGrid(format!(
                "horizon must be positive and finite, got {}",
                horizon.as_f64()
            )));
        }
        if n == 0 {
            return Err(RoughVolError::InvalidGrid("step count must be >= 1".into()));
        }
        Ok(Self { horizon, n })
    }

    #[inline]
    pub fn horizon(&self) -> T {
        self.horizon
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn dt(&self) -> T {
        self.horizon / T::lit(self.n as f64)
    }

    /// t_i, valid for i = 0..=n.
    #[inline]
    pub fn point(&self, i: usize) -> T {
        debug_assert!(i <= self.n);
        self.horizon * (T::lit(i as f64) / T::lit(self.n as f64))
    }

    /// The Gaussian-vector support t_1..t_n (t_0 = 0 is excluded: both
    /// processes start there deterministically).
    pub fn inner_points(&self) -> Vec<T> {
        (1..=self.n).map(|i| self.point(i)).collect()
    }

    /// Grid with the same horizon and n/stride steps.
    pub fn coarsen(&self, stride: usize) -> Result<Self> {
        if stride == 0 || self.n % stride != 0 {
            return Err(RoughVolError::BadStride { stride, n: self.n });
        }
        TimeGrid::new(self.horizon, self.n / stride)
    }
}
