//! Payoff catalog, zero-rate Black–Scholes call pricing, and the
//! conditional (mixing) Monte Carlo price for stochastic-volatility models
//! driven by W^H.

use crate::error::{Result, RoughVolError};
use crate::real::{std_normal_cdf, CompensatedSum, Real};
use crate::sampler::PathBatch;
use crate::scheme::PsiSpec;
use num_traits::Float;
use rayon::prelude::*;

/// Terminal payoff φ(x).
#[derive(Clone, Debug, PartialEq)]
pub enum Payoff<T> {
    Square,
    Cube,
    /// 1_{x ≥ 0} (value at 0 fixed to 1 by convention)
    Heaviside,
    /// (x + shift)³
    ShiftedCube { shift: T },
    /// Σ_k coeffs[k]·x^k
    Polynomial { coeffs: Vec<T> },
    /// max(x − strike, 0)
    Call { strike: T },
}

pub fn eval_payoff<T: Real>(payoff: &Payoff<T>, x: T) -> T {
    match payoff {
        Payoff::Square => x * x,
        Payoff::Cube => x * x * x,
        Payoff::Heaviside => {
            if x >= T::zero() {
                T::one()
            } else {
                T::zero()
            }
        }
        Payoff::ShiftedCube { shift } => {
            let y = x + *shift;
            y * y * y
        }
        Payoff::Polynomial { coeffs } => {
            let mut acc = T::zero();
            for &c in coeffs.iter().rev() {
                acc = acc * x + c;
            }
            acc
        }
        Payoff::Call { strike } => Float::max(x - *strike, T::zero()),
    }
}

impl<T: Real> Payoff<T> {
    pub fn label(&self) -> String {
        match self {
            Payoff::Square => "square".to_string(),
            Payoff::Cube => "cube".to_string(),
            Payoff::Heaviside => "heaviside".to_string(),
            Payoff::ShiftedCube { shift } => format!("shifted_cube:{}", shift.as_f64()),
            Payoff::Polynomial { coeffs } => {
                let parts: Vec<String> =
                    coeffs.iter().map(|c| c.as_f64().to_string()).collect();
                format!("poly:{}", parts.join(","))
            }
            Payoff::Call { strike } => format!("call:{}", strike.as_f64()),
        }
    }
}

/// Zero-rate Black–Scholes call on total variance σ²T; the degenerate
/// total_var = 0 returns the intrinsic value.
pub fn black_scholes_call<T: Real>(s0: T, total_var: T, strike: T) -> T {
    debug_assert!(s0 > T::zero() && strike > T::zero());
    if total_var <= T::zero() {
        return Float::max(s0 - strike, T::zero());
    }
    let sd = Float::sqrt(total_var);
    let d1 = (Float::ln(s0 / strike) + total_var * T::lit(0.5)) / sd;
    let d2 = d1 - sd;
    s0 * std_normal_cdf(d1) - strike * std_normal_cdf(d2)
}

/// Conditional Monte Carlo call price under dS = S√v (ρdW + √(1−ρ²)dW⊥)
/// with v = ψ²(t, W^H_t): per path, the spot is shifted to
/// S0·exp(−ρ²/2·∫v + ρ∫√v dW) and the payoff priced by Black–Scholes on the
/// residual variance (1−ρ²)∫v. Time integrals use the left-endpoint rule and
/// the stochastic sum the same left-point scheme as the Euler driver.
///
/// When ψ does not depend on the path (η = 0), the conditional price equals
/// black_scholes_call(S0, ξT, K) identically — the Gaussian mixing integral
/// is carried out analytically — so the estimator returns it with SE 0.
pub fn romano_touzi_price<T: Real>(
    batch: &PathBatch<T>,
    psi: &PsiSpec<T>,
    rho: T,
    s0: T,
    strike: T,
) -> Result<(T, T)> {
    if !(rho >= -T::one() && rho <= T::one()) {
        return Err(RoughVolError::InvalidConfig(format!(
            "correlation must lie in [-1, 1], got {}",
            rho.as_f64()
        )));
    }
    if !(s0 > T::zero()) || !(strike > T::zero()) {
        return Err(RoughVolError::InvalidConfig(
            "spot and strike must be positive".into(),
        ));
    }
    let hp = &batch.hurst;
    let horizon = batch.grid.horizon();

    if psi.is_deterministic_variance() {
        let total_var = psi.variance(T::zero(), T::zero(), hp) * horizon;
        return Ok((black_scholes_call(s0, total_var, strike), T::zero()));
    }

    let m = batch.m();
    if m == 0 {
        return Err(RoughVolError::InvalidConfig(
            "pricing needs at least one path".into(),
        ));
    }
    let n = batch.n();
    let dt = batch.grid.point(1);
    let half = T::lit(0.5);
    let one = T::one();

    let block = 1024usize;
    let n_blocks = m.div_ceil(block);
    let partials: Result<Vec<(CompensatedSum<T>, CompensatedSum<T>)>> = (0..n_blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * block;
            let hi = usize::min(lo + block, m);
            let mut sum = CompensatedSum::<T>::new();
            let mut sum_sq = CompensatedSum::<T>::new();
            for j in lo..hi {
                let mut iv = CompensatedSum::<T>::new();
                let mut sdw = CompensatedSum::<T>::new();
                for i in 0..n {
                    let t = batch.grid.point(i);
                    let root_v = psi.eval(t, batch.wh[(i, j)], hp);
                    let v = root_v * root_v;
                    if v < T::zero() {
                        return Err(RoughVolError::NegativeVariance(v.as_f64()));
                    }
                    iv.add(v * dt);
                    sdw.add(root_v * (batch.w[(i + 1, j)] - batch.w[(i, j)]));
                }
                let iv = iv.value();
                let spot = s0 * Float::exp(-half * rho * rho * iv + rho * sdw.value());
                let total_var = (one - rho * rho) * iv;
                let price = black_scholes_call(spot, total_var, strike);
                sum.add(price);
                sum_sq.add(price * price);
            }
            Ok((sum, sum_sq))
        })
        .collect();

    let mut total = CompensatedSum::<T>::new();
    let mut total_sq = CompensatedSum::<T>::new();
    for (s, s2) in partials? {
        total.merge(&s);
        total_sq.merge(&s2);
    }
    let mf = T::lit(m as f64);
    let mean = total.value() / mf;
    let se = if m >= 2 {
        let var = Float::max(
            (total_sq.value() - total.value() * total.value() / mf) / (mf - one),
            T::zero(),
        );
        Float::sqrt(var / mf)
    } else {
        T::zero()
    };
    Ok((mean, se))
}
