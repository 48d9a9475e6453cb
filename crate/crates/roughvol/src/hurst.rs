//! Hurst parameter and the constants derived from it.

use crate::error::{Result, RoughVolError};
use crate::real::{gamma_fn, Real};
use num_traits::Float;

/// Validated Hurst parameter H ∈ (0, 1/2] plus derived constants.
///
/// H < 1/2 is the rough regime; H = 1/2 degenerates to standard Brownian
/// motion (handled by exact Brownian formulas downstream — `p` diverges
/// there and is reported as +∞).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HurstParams<T: Real> {
    h: T,
}

impl<T: Real> HurstParams<T> {
    pub fn new(h: T) -> Result<Self> {
        let half = T::lit(0.5);
        if !Float::is_finite(h) || h <= T::zero() || h > half {
            return Err(RoughVolError::InvalidHurst(h.as_f64()));
        }
        Ok(Self { h })
    }

    #[inline]
    pub fn h(&self) -> T {
        self.h
    }

    /// γ = 1/2 − H, the singularity exponent of the kernel.
    #[inline]
    pub fn gamma_exponent(&self) -> T {
        T::lit(0.5) - self.h
    }

    /// p = 2/(1 − 2H); +∞ at H = 1/2.
    #[inline]
    pub fn p(&self) -> T {
        if self.is_brownian() {
            return T::infinity();
        }
        T::lit(2.0) / (T::one() - T::lit(2.0) * self.h)
    }

    /// c_H = √(2H)/Γ(3/2 − H).
    #[inline]
    pub fn c_h(&self) -> T {
        Float::sqrt(T::lit(2.0) * self.h) / gamma_fn(T::lit(1.5) - self.h)
    }

    /// c̃_H = √(2H)/Γ(1/2 − H); 0 at H = 1/2 (the Γ pole).
    #[inline]
    pub fn c_tilde_h(&self) -> T {
        if self.is_brownian() {
            return T::zero();
        }
        Float::sqrt(T::lit(2.0) * self.h) / gamma_fn(self.gamma_exponent())
    }

    #[inline]
    pub fn is_brownian(&self) -> bool {
        self.h == T::lit(0.5)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hp(h: f64) -> HurstParams<f64> {
        HurstParams::new(h).unwrap()
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(HurstParams::new(0.0).is_err());
        assert!(HurstParams::new(-0.1).is_err());
        assert!(HurstParams::new(0.500001).is_err());
        assert!(HurstParams::new(f64::NAN).is_err());
        assert!(HurstParams::new(0.5).is_ok());
        assert!(HurstParams::new(1e-6).is_ok());
    }

    #[test]
    fn derived_constants_at_h_01() {
        let p = hp(0.1);
        assert_eq!(p.p(), 2.5);
        assert!((p.gamma_exponent() - 0.4).abs() < 1e-15);
        // frozen: sqrt(0.2)/Gamma(1.4)
        assert!((p.c_h() - 0.5040367776503044).abs() < 1e-14);
    }

    #[test]
    fn c_relation_and_range() {
        // c_H = c̃_H / (1/2 − H) for H < 1/2; 0 < c_H < 1 and increasing in H
        let mut prev = 0.0;
        for i in 1..20 {
            let h = i as f64 * 0.025; // 0.025 .. 0.475
            let p = hp(h);
            let ch = p.c_h();
            assert!(ch > 0.0 && ch < 1.0, "c_H out of range at H={h}");
            assert!(ch > prev, "c_H not increasing at H={h}");
            prev = ch;
            let rel = p.c_tilde_h() / (0.5 - h);
            assert!((ch - rel).abs() < 1e-12 * ch.max(1.0), "relation fails at H={h}");
        }
    }

    #[test]
    fn brownian_sentinels() {
        let p = hp(0.5);
        assert!(p.is_brownian());
        assert!(p.p().is_infinite());
        assert_eq!(p.c_tilde_h(), 0.0);
        assert!((p.c_h() - 1.0).abs() < 1e-14); // sqrt(1)/Γ(1)
    }

    #[test]
    fn p_exceeds_two_in_rough_regime() {
        for h in [0.01, 0.1, 0.25, 0.49] {
            assert!(hp(h).p() > 2.0);
        }
    }
}
