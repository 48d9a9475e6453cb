//! Scalar abstraction: every numeric routine in this crate is generic over
//! [`Real`], instantiated at `f32` and `f64` (see the aliases at the crate
//! root). Special functions are evaluated through `f64` internally.

use nalgebra::RealField;
use num_traits::{Float, FromPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar usable throughout the library.
///
/// `RealField` powers the nalgebra decompositions, `Float` the scalar math.
/// Both traits export overlapping method names, so generic code in this
/// crate calls them UFCS-style (`Float::sqrt(x)`).
pub trait Real: RealField + Float + FromPrimitive + Copy + Send + Sync + 'static {
    /// Draw one standard normal variate.
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Convert an `f64` literal; panics only if the target type cannot
    /// represent any finite approximation (never for f32/f64).
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("f64 literal conversion")
    }

    /// Lossy view as `f64` for diagnostics and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("finite scalar")
    }
}

impl Real for f64 {
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
        StandardNormal.sample(rng)
    }
}

impl Real for f32 {
    #[inline]
    fn std_normal<R: Rng + ?Sized>(rng: &mut R) -> f32 {
        StandardNormal.sample(rng)
    }
}

/// Γ(x), evaluated in f64.
#[inline]
pub fn gamma_fn<T: Real>(x: T) -> T {
    T::lit(statrs::function::gamma::gamma(x.as_f64()))
}

/// Standard normal CDF, evaluated in f64.
#[inline]
pub fn std_normal_cdf<T: Real>(x: T) -> T {
    T::lit(0.5 * statrs::function::erf::erfc(-x.as_f64() / std::f64::consts::SQRT_2))
}

/// Neumaier-compensated accumulator; summation order is the caller's
/// contract (ascending index everywhere in this crate).
#[derive(Clone, Copy, Debug)]
pub struct CompensatedSum<T: Real> {
    sum: T,
    comp: T,
}

impl<T: Real> CompensatedSum<T> {
    #[inline]
    pub fn new() -> Self {
        Self { sum: T::zero(), comp: T::zero() }
    }

    #[inline]
    pub fn add(&mut self, x: T) {
        let t = self.sum + x;
        if Float::abs(self.sum) >= Float::abs(x) {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    /// Fold in another accumulator (used for fixed-order block merges).
    #[inline]
    pub fn merge(&mut self, other: &Self) {
        self.add(other.sum);
        self.add(other.comp);
    }

    #[inline]
    pub fn value(&self) -> T {
        self.sum + self.comp
    }
}

impl<T: Real> Default for CompensatedSum<T> {
    fn default() -> Self {
        Self::new()
    }
}
