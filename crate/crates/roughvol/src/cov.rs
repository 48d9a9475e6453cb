//! Covariance functions of the joint Gaussian pair (W^H, W) and assembly of
//! the joint covariance matrix over a time grid.
//!
//! W^H is the Riemann–Liouville fractional Brownian motion driven by the
//! same Brownian motion W: W^H_t = ∫₀^t K(t−s) dW_s with the power kernel
//! K(r) = √(2H)·r^{H−1/2}. All pairwise covariances reduce to 1-D integrals
//! with an endpoint power singularity; the primary evaluation path is the
//! composite Gauss–Jacobi scheme in [`crate::quad`], with a hypergeometric
//! closed form as cross-check.

use crate::error::{Result, RoughVolError};
use crate::grid::TimeGrid;
use crate::hurst::HurstParams;
use crate::quad::{integrate_power_singular, SingularRules};
use crate::real::{gamma_fn, Real};
use nalgebra::DMatrix;
use num_traits::Float;
use rayon::prelude::*;

/// Absolute tolerance on the quadrature error estimate for one covariance
/// entry; exceeding it is a hard error rather than a silent inaccuracy.
pub const QUAD_TOL: f64 = 1e-9;

/// Evaluation route for the fBm–fBm covariance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CovMethod {
    /// Composite Gauss–Jacobi quadrature (primary path).
    Quadrature,
    /// Hypergeometric closed form (cross-check path).
    ClosedForm,
}

/// The Riemann–Liouville kernel K(r) = √(2H)·r^{H−1/2}, r > 0.
pub fn rl_kernel<T: Real>(r: T, hp: &HurstParams<T>) -> Result<T> {
    if r <= T::zero() {
        return Err(RoughVolError::KernelDomain(r.as_f64()));
    }
    let two_h = T::lit(2.0) * hp.h();
    Ok(Float::sqrt(two_h) * Float::powf(r, hp.h() - T::lit(0.5)))
}

/// cov(W^H_t, W_s) = √(2H)/(H+1/2)·(t^{H+1/2} − (t − min(t,s))^{H+1/2})
/// = ∫₀^{min(t,s)} K(t−r) dr.
pub fn cov_fbm_bm<T: Real>(t: T, s: T, hp: &HurstParams<T>) -> T {
    debug_assert!(t >= T::zero() && s >= T::zero());
    if t <= T::zero() || s <= T::zero() {
        return T::zero();
    }
    let a = hp.h() + T::lit(0.5);
    let m = Float::min(t, s);
    let scale = Float::sqrt(T::lit(2.0) * hp.h()) / a;
    scale * (Float::powf(t, a) - Float::powf(t - m, a))
}

/// Reusable quadrature state for covariance evaluation at one H.
pub struct CovEngine<T: Real> {
    hp: HurstParams<T>,
    /// rules for the single-kernel exponent H − 1/2
    rules_kernel: SingularRules<T>,
    /// rules for the merged diagonal exponent 2H − 1
    rules_diag: SingularRules<T>,
}

impl<T: Real> CovEngine<T> {
    pub fn new(hp: HurstParams<T>) -> Self {
        let half = T::lit(0.5);
        Self {
            hp,
            rules_kernel: SingularRules::for_exponent(hp.h() - half),
            rules_diag: SingularRules::for_exponent(T::lit(2.0) * hp.h() - T::one()),
        }
    }

    pub fn hp(&self) -> &HurstParams<T> {
        &self.hp
    }

    /// cov(W^H_t, W^H_s) by quadrature:
    /// 2H·∫₀^{lo} u^{H−1/2}·(d+u)^{H−1/2} du with lo = min, d = |t−s|.
    /// The u^{H−1/2} endpoint singularity goes into the Gauss–Jacobi weight;
    /// d is the boundary-layer scale of the remaining smooth factor (on the
    /// diagonal the factors merge into a single exact Jacobi panel).
    pub fn fbm_fbm_quadrature(&self, t: T, s: T) -> Result<T> {
        if t <= T::zero() || s <= T::zero() {
            return Ok(T::zero());
        }
        let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
        let d = hi - lo;
        let two_h = T::lit(2.0) * self.hp.h();
        let exp_k = self.hp.h() - T::lit(0.5);
        let (val, est) = if d == T::zero() {
            integrate_power_singular(&self.rules_diag, lo, lo, |_| T::one())
        } else {
            integrate_power_singular(&self.rules_kernel, lo, d, |u| Float::powf(d + u, exp_k))
        };
        if est.as_f64() > QUAD_TOL {
            return Err(RoughVolError::QuadratureNonConvergence {
                est: est.as_f64(),
                tol: QUAD_TOL,
            });
        }
        Ok(two_h * val)
    }
}

/// ₂F₁(γ, 1; 2−γ; z) for γ ∈ [0, 1/2), z ∈ [0, 1): defining series for
/// z ≤ 1/2, Euler connection formula in 1−z above (its second term
/// collapses to an elementary power because b = 1). Coefficients carry
/// Γ(±2H), so cancellation limits very small H; certified for H ≥ 0.005.
fn hyp2f1_rough<T: Real>(gamma_exp: T, z: T) -> T {
    debug_assert!(z >= T::zero() && z < T::one());
    if gamma_exp == T::zero() {
        return T::one();
    }
    let one = T::one();
    let two = T::lit(2.0);
    let eps = T::epsilon();
    let series = |a: T, c: T, x: T| -> T {
        // Σ_k (a)_k (1)_k / ((c)_k k!) x^k, ratio (a+k)/(c+k)·x
        let mut term = one;
        let mut total = one;
        for k in 0..4096 {
            let kf = T::lit(k as f64);
            term = term * (a + kf) / (c + kf) * x;
            total += term;
            if Float::abs(term) < eps * Float::abs(total) {
                break;
            }
        }
        total
    };
    if z <= T::lit(0.5) {
        return series(gamma_exp, two - gamma_exp, z);
    }
    let w = one - z;
    let two_h = one - two * gamma_exp;
    let c = two - gamma_exp;
    let a_coef = gamma_fn(c) * gamma_fn(two_h) / (gamma_fn(two - two * gamma_exp) * gamma_fn(one - gamma_exp));
    let b_coef = gamma_fn(c) * gamma_fn(-two_h) / gamma_fn(gamma_exp);
    let f1 = series(gamma_exp, two * gamma_exp, w);
    // ₂F₁(2−2γ, 1−γ; 1+2H; w) = (1−w)^{−(1−γ)} since 1+2H = 2−2γ
    let f2 = Float::powf(one - w, -(one - gamma_exp));
    a_coef * f1 + b_coef * Float::powf(w, two_h) * f2
}

fn fbm_fbm_closed_form<T: Real>(t: T, s: T, hp: &HurstParams<T>) -> T {
    if t <= T::zero() || s <= T::zero() {
        return T::zero();
    }
    let two_h = T::lit(2.0) * hp.h();
    let (lo, hi) = if t <= s { (t, s) } else { (s, t) };
    if lo == hi {
        return Float::powf(lo, two_h);
    }
    let g = hp.gamma_exponent();
    let z = lo / hi;
    let f = hyp2f1_rough(g, z);
    two_h / (T::one() - g) * Float::powf(lo, two_h) * Float::powf(z, g) * f
}

/// cov(W^H_t, W^H_s) = 2H·∫₀^{min} (t−r)^{H−1/2}(s−r)^{H−1/2} dr.
pub fn cov_fbm_fbm<T: Real>(t: T, s: T, hp: &HurstParams<T>, method: CovMethod) -> Result<T> {
    debug_assert!(t >= T::zero() && s >= T::zero());
    match method {
        CovMethod::Quadrature => CovEngine::new(*hp).fbm_fbm_quadrature(t, s),
        CovMethod::ClosedForm => Ok(fbm_fbm_closed_form(t, s, hp)),
    }
}

/// The three covariance blocks over t_1..t_n and the assembled joint matrix.
#[derive(Clone, Debug)]
pub struct CovBlocks<T: Real> {
    /// cov(W^H, W^H), n×n
    pub s11: DMatrix<T>,
    /// cov(W^H, W), n×n (not symmetric)
    pub s12: DMatrix<T>,
    /// cov(W, W) = min(t_i, t_j), n×n
    pub s22: DMatrix<T>,
}

impl<T: Real> CovBlocks<T> {
    pub fn n(&self) -> usize {
        self.s11.nrows()
    }

    /// [[S11, S12], [S12ᵀ, S22]], 2n×2n.
    pub fn assemble(&self) -> DMatrix<T> {
        let n = self.n();
        let mut joint = DMatrix::<T>::zeros(2 * n, 2 * n);
        for j in 0..n {
            for i in 0..n {
                joint[(i, j)] = self.s11[(i, j)];
                joint[(i, n + j)] = self.s12[(i, j)];
                joint[(n + j, i)] = self.s12[(i, j)];
                joint[(n + i, n + j)] = self.s22[(i, j)];
            }
        }
        joint
    }
}

/// Build all blocks over the grid's inner points t_1..t_n. S11 entries are
/// evaluated by quadrature (rows in parallel; every entry independent, so
/// results are identical for any worker count).
pub fn build_joint_covariance<T: Real>(
    grid: &TimeGrid<T>,
    hp: &HurstParams<T>,
) -> Result<CovBlocks<T>> {
    let n = grid.n();
    let t = grid.inner_points();
    let engine = CovEngine::new(*hp);

    let upper_rows: Vec<Result<Vec<T>>> = (0..n)
        .into_par_iter()
        .map(|i| (i..n).map(|j| engine.fbm_fbm_quadrature(t[i], t[j])).collect())
        .collect();

    let mut s11 = DMatrix::<T>::zeros(n, n);
    for (i, row) in upper_rows.into_iter().enumerate() {
        for (off, v) in row?.into_iter().enumerate() {
            let j = i + off;
            s11[(i, j)] = v;
            s11[(j, i)] = v;
        }
    }

    let mut s12 = DMatrix::<T>::zeros(n, n);
    let mut s22 = DMatrix::<T>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            s12[(i, j)] = cov_fbm_bm(t[i], t[j], hp);
            s22[(i, j)] = Float::min(t[i], t[j]);
        }
    }
    Ok(CovBlocks { s11, s12, s22 })
}
