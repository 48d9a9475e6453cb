//! Affine Markovian surrogate of the rough driver: θ-quadrature grids over
//! mean-reversion speeds, exact joint simulation of the OU state vector with
//! Brownian increments, surrogate reconstruction Ŵ^H = c_H Σ_l Y^l Δθ_l, and
//! the tail/L² approximation-error diagnostics.
//!
//! Y_t(θ) = ∫₀^t e^{−(t−s)θ^p} dW_s with p = 2/(1−2H); superposing these OU
//! factors over a θ-grid on [0, L] reproduces W^H up to a quadrature error
//! (grid resolution) plus a tail error (mass above L).

use crate::cov::{build_joint_covariance, cov_fbm_bm};
use crate::error::{Result, RoughVolError};
use crate::grid::TimeGrid;
use crate::hurst::HurstParams;
use crate::psd::psd_factor;
use crate::quad::{integrate_power_singular, SingularRules};
use crate::real::{CompensatedSum, Real};
use crate::sampler::{gaussian_chunks, DEFAULT_STREAM_LAYOUT};
use nalgebra::DMatrix;
use num_traits::Float;
use rayon::prelude::*;

/// Node-placement rule for the θ-grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThetaRule {
    /// left-endpoint rule: θ_l = (l−1)·L/N_L, all weights L/N_L
    Uniform,
    /// log-spaced nodes on [L·10⁻⁶, L] with trapezoid weights
    Geometric,
}

/// Discretization of the θ-domain [0, L].
#[derive(Clone, Debug)]
pub struct QuadratureGrid<T: Real> {
    l: T,
    nodes: Vec<T>,
    weights: Vec<T>,
    hp: HurstParams<T>,
}

impl<T: Real> QuadratureGrid<T> {
    pub fn l(&self) -> T {
        self.l
    }

    pub fn n_l(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[T] {
        &self.nodes
    }

    pub fn weights(&self) -> &[T] {
        &self.weights
    }

    pub fn hp(&self) -> &HurstParams<T> {
        &self.hp
    }
}

/// Build a θ-grid. Requires L > 1 and N_L ≥ 1 (≥ 2 for the geometric rule,
/// which needs two distinct endpoints).
pub fn build_theta_grid<T: Real>(
    l: T,
    n_l: usize,
    rule: ThetaRule,
    hp: &HurstParams<T>,
) -> Result<QuadratureGrid<T>> {
    if !(l > T::one()) {
        return Err(RoughVolError::InvalidConfig(format!(
            "theta-domain cap L must exceed 1, got {}",
            l.as_f64()
        )));
    }
    if n_l == 0 {
        return Err(RoughVolError::InvalidConfig(
            "theta-grid needs at least one node".into(),
        ));
    }
    let (nodes, weights) = match rule {
        ThetaRule::Uniform => {
            let w = l / T::lit(n_l as f64);
            let nodes: Vec<T> = (0..n_l).map(|i| T::lit(i as f64) * w).collect();
            (nodes, vec![w; n_l])
        }
        ThetaRule::Geometric => {
            if n_l < 2 {
                return Err(RoughVolError::InvalidConfig(
                    "geometric theta-grid needs at least two nodes".into(),
                ));
            }
            let lo = l * T::lit(1e-6);
            let ratio = Float::powf(l / lo, T::one() / T::lit((n_l - 1) as f64));
            let nodes: Vec<T> = (0..n_l)
                .map(|i| lo * Float::powf(ratio, T::lit(i as f64)))
                .collect();
            let mut weights = vec![T::zero(); n_l];
            let half = T::lit(0.5);
            weights[0] = (nodes[1] - nodes[0]) * half;
            weights[n_l - 1] = (nodes[n_l - 1] - nodes[n_l - 2]) * half;
            for i in 1..n_l - 1 {
                weights[i] = (nodes[i + 1] - nodes[i - 1]) * half;
            }
            (nodes, weights)
        }
    };
    Ok(QuadratureGrid {
        l,
        nodes,
        weights,
        hp: *hp,
    })
}

fn reversion_speed<T: Real>(theta: T, hp: &HurstParams<T>) -> T {
    assert!(
        !hp.is_brownian(),
        "Markovian surrogate requires H < 1/2 (p diverges at H = 1/2)"
    );
    if theta == T::zero() {
        T::zero()
    } else {
        Float::powf(theta, hp.p())
    }
}

/// cov(Y_t(θ), Y_t(η)) = (1 − e^{−(θ^p+η^p)t})/(θ^p+η^p), with limit t at
/// θ = η = 0.
pub fn ou_cov<T: Real>(theta: T, eta: T, t: T, hp: &HurstParams<T>) -> T {
    let a = reversion_speed(theta, hp) + reversion_speed(eta, hp);
    if a == T::zero() {
        t
    } else {
        (T::one() - Float::exp(-a * t)) / a
    }
}

/// cov(Y_{t_i}(θ), Y_{t_j}(η)) across times: the common window [0, min]
/// contributes (1 − e^{−(θ^p+η^p)·min})/(θ^p+η^p), decayed by each factor's
/// remaining reversion.
pub fn ou_cov_cross<T: Real>(theta: T, eta: T, ti: T, tj: T, hp: &HurstParams<T>) -> T {
    let a = reversion_speed(theta, hp);
    let b = reversion_speed(eta, hp);
    let m = Float::min(ti, tj);
    let core = if a + b == T::zero() {
        m
    } else {
        (T::one() - Float::exp(-(a + b) * m)) / (a + b)
    };
    Float::exp(-(a * (ti - m) + b * (tj - m))) * core
}

/// cov(Y_{t_i}(θ), W_{t_{j+1}} − W_{t_j}) = ∫ over the overlap of [t_j, t_{j+1}]
/// with [0, t_i] of e^{−(t_i−r)θ^p} dr; zero when the increment starts at or
/// after t_i.
pub fn y_dw_cov<T: Real>(theta: T, ti: T, tj: T, tj1: T, hp: &HurstParams<T>) -> T {
    debug_assert!(tj1 >= tj);
    let hi = Float::min(tj1, ti);
    if hi <= tj {
        return T::zero();
    }
    let a = reversion_speed(theta, hp);
    if a == T::zero() {
        hi - tj
    } else {
        (Float::exp(-(ti - hi) * a) - Float::exp(-(ti - tj) * a)) / a
    }
}

/// Jointly sampled OU states and Brownian increments.
#[derive(Clone, Debug)]
pub struct ExtendedBatch<T: Real> {
    pub quadrature: QuadratureGrid<T>,
    pub grid: TimeGrid<T>,
    /// one (n+1)×M matrix per θ-node, row 0 all zeros
    pub y: Vec<DMatrix<T>>,
    /// n×M increments W_{t_{i+1}} − W_{t_i}
    pub dw: DMatrix<T>,
    pub seed: u64,
    pub stream_layout: usize,
}

impl<T: Real> ExtendedBatch<T> {
    pub fn m(&self) -> usize {
        self.dw.ncols()
    }
}

/// Exact Gaussian draw of all (Y^l_{t_i}, ΔW_{t_i}) via one PSD
/// factorization of the (N_L·n + n)-dimensional covariance. Coordinate
/// order: Y-blocks node by node (each over t_1..t_n), then the increments.
pub fn sample_extended<T: Real>(
    quadrature: &QuadratureGrid<T>,
    grid: &TimeGrid<T>,
    m: usize,
    seed: u64,
    stream_layout: usize,
) -> Result<ExtendedBatch<T>> {
    let n = grid.n();
    let n_l = quadrature.n_l();
    let hp = quadrature.hp;
    let t = grid.inner_points();
    let dim = n_l * n + n;
    let mut sigma = DMatrix::<T>::zeros(dim, dim);
    for k in 0..n_l {
        for l in k..n_l {
            for i in 0..n {
                for j in 0..n {
                    let v = ou_cov_cross(quadrature.nodes[k], quadrature.nodes[l], t[i], t[j], &hp);
                    sigma[(k * n + i, l * n + j)] = v;
                    sigma[(l * n + j, k * n + i)] = v;
                }
            }
        }
        for i in 0..n {
            for j in 0..n {
                let tj = grid.point(j);
                let tj1 = grid.point(j + 1);
                let v = y_dw_cov(quadrature.nodes[k], t[i], tj, tj1, &hp);
                sigma[(k * n + i, n_l * n + j)] = v;
                sigma[(n_l * n + j, k * n + i)] = v;
            }
        }
    }
    for j in 0..n {
        sigma[(n_l * n + j, n_l * n + j)] = grid.point(j + 1) - grid.point(j);
    }

    let factor = psd_factor(&sigma, T::lit(crate::psd::DEFAULT_CLIP_TOL))?;
    let mut y: Vec<DMatrix<T>> = (0..n_l).map(|_| DMatrix::zeros(n + 1, m)).collect();
    let mut dw = DMatrix::<T>::zeros(n, m);
    let chunks = gaussian_chunks(&factor.factor, m, seed, stream_layout, |_, start, x| {
        (start, x.clone())
    });
    for (start, x) in chunks {
        for c in 0..x.ncols() {
            let j = start + c;
            for (l, mat) in y.iter_mut().enumerate() {
                for i in 0..n {
                    mat[(i + 1, j)] = x[(l * n + i, c)];
                }
            }
            for i in 0..n {
                dw[(i, j)] = x[(n_l * n + i, c)];
            }
        }
    }
    Ok(ExtendedBatch {
        quadrature: quadrature.clone(),
        grid: *grid,
        y,
        dw,
        seed,
        stream_layout,
    })
}

/// Ŵ^H_{t_i} = c_H Σ_l Y^l_{t_i} Δθ_l per path; (n+1)×M with zero row 0.
pub fn surrogate_fbm<T: Real>(batch: &ExtendedBatch<T>) -> DMatrix<T> {
    let n = batch.grid.n();
    let m = batch.m();
    let c_h = batch.quadrature.hp.c_h();
    let mut out = DMatrix::<T>::zeros(n + 1, m);
    for (l, mat) in batch.y.iter().enumerate() {
        let w = batch.quadrature.weights[l];
        for j in 0..m {
            for i in 1..=n {
                out[(i, j)] += w * mat[(i, j)];
            }
        }
    }
    for v in out.iter_mut() {
        *v *= c_h;
    }
    out
}

/// Variance of the neglected tail c_H ∫_L^∞ Y_t(θ) dθ is bounded by
/// c_H²·(π/2)·L^{2−p}/(p−2); requires L ≥ 1 so the bound decays in L.
pub fn tail_variance_bound<T: Real>(l: T, hp: &HurstParams<T>) -> Result<T> {
    if !(l >= T::one()) {
        return Err(RoughVolError::InvalidConfig(format!(
            "tail bound needs L >= 1, got {}",
            l.as_f64()
        )));
    }
    if hp.is_brownian() {
        return Err(RoughVolError::InvalidConfig(
            "tail bound needs H < 1/2".into(),
        ));
    }
    let p = hp.p();
    let c_h = hp.c_h();
    let half_pi = T::lit(std::f64::consts::FRAC_PI_2);
    Ok(c_h * c_h * half_pi * Float::powf(l, T::lit(2.0) - p) / (p - T::lit(2.0)))
}

/// Quadrature state for the fBm–OU cross-covariances entering the coupled
/// L² error.
pub struct CrossCovEngine<T: Real> {
    hp: HurstParams<T>,
    /// rules with the kernel exponent H − 1/2 (singular branch)
    kernel: SingularRules<T>,
    /// exponent-0 rules (plain panels) for the smooth branch
    smooth: SingularRules<T>,
}

/// e^{−x} is numerically zero (relative to double precision) beyond this
/// many decay lengths; integrals against it are truncated there.
const EXP_CUTOFF: f64 = 40.0;

impl<T: Real> CrossCovEngine<T> {
    pub fn new(hp: HurstParams<T>) -> Self {
        Self {
            hp,
            kernel: SingularRules::for_exponent(hp.h() - T::lit(0.5)),
            smooth: SingularRules::for_exponent(T::zero()),
        }
    }

    /// cov(W^H_{t_i}, Y_{t_j}(θ)) = ∫₀^{min} K(t_i−r)·e^{−(t_j−r)θ^p} dr.
    ///
    /// For t_i ≤ t_j substitute u = t_i − r (kernel singularity at u = 0);
    /// for t_i > t_j substitute v = t_j − r (smooth integrand). Both
    /// branches are truncated where the exponential has fully decayed.
    pub fn fbm_ou(&self, ti: T, tj: T, theta: T) -> Result<T> {
        if ti <= T::zero() || tj <= T::zero() {
            return Ok(T::zero());
        }
        let a = reversion_speed(theta, &self.hp);
        if a == T::zero() {
            return Ok(cov_fbm_bm(ti, tj, &self.hp));
        }
        let sqrt_2h = Float::sqrt(T::lit(2.0) * self.hp.h());
        let exp_k = self.hp.h() - T::lit(0.5);
        let decay = T::one() / a;
        let cutoff = T::lit(EXP_CUTOFF) * decay;
        let (value, est) = if ti <= tj {
            let upper = Float::min(ti, cutoff);
            let (v, e) = integrate_power_singular(&self.kernel, upper, decay, |u| {
                Float::exp(-u * a)
            });
            (sqrt_2h * Float::exp(-(tj - ti) * a) * v, e)
        } else {
            let lo = ti - tj;
            let upper = Float::min(tj, cutoff);
            let layer = Float::min(lo, decay);
            let (v, e) = integrate_power_singular(&self.smooth, upper, layer, |u| {
                Float::powf(lo + u, exp_k) * Float::exp(-u * a)
            });
            (sqrt_2h * v, e)
        };
        if est.as_f64() > crate::cov::QUAD_TOL {
            return Err(RoughVolError::QuadratureNonConvergence {
                est: est.as_f64(),
                tol: crate::cov::QUAD_TOL,
            });
        }
        Ok(value)
    }
}

/// cov(W^H_{t_i}, Ŵ^H_{t_j}) for all grid pairs at once.
///
/// Exploits the uniform grid: every entry is a sum of per-step panel
/// integrals Q_l(k) = ∫₀^Δ (kΔ+w)^{H−1/2} e^{−a_l w} dw (a_l = θ_l^p), so one
/// n×N_L table of 1-D quadratures plus prefix/diagonal recursions replaces
/// n²·N_L separate singular integrals. Entry values match the direct
/// `CrossCovEngine::fbm_ou` evaluation to quadrature accuracy.
fn fbm_surrogate_block<T: Real>(
    grid: &TimeGrid<T>,
    quadrature: &QuadratureGrid<T>,
    speeds: &[T],
) -> Result<DMatrix<T>> {
    let hp = quadrature.hp;
    let n = grid.n();
    let n_l = quadrature.n_l();
    let dt = grid.point(1);
    let exp_k = hp.h() - T::lit(0.5);
    let kernel_rules = SingularRules::for_exponent(exp_k);
    let smooth_rules = SingularRules::for_exponent(T::zero());

    struct NodeTable<T> {
        /// Q(k) = ∫₀^Δ (kΔ+w)^{H−1/2} e^{−aw} dw, k = 0..n−1
        q: Vec<T>,
        /// e(r) = e^{−a·rΔ}, r = 0..n−1
        e: Vec<T>,
        err: T,
    }

    let tables: Vec<NodeTable<T>> = speeds
        .par_iter()
        .map(|&a| {
            let decay = if a == T::zero() {
                T::infinity()
            } else {
                T::one() / a
            };
            let upper = Float::min(dt, T::lit(EXP_CUTOFF) * decay);
            let mut q = Vec::with_capacity(n);
            let mut err = T::zero();
            for k in 0..n {
                let (v, est) = if k == 0 {
                    integrate_power_singular(&kernel_rules, upper, decay, |w| Float::exp(-a * w))
                } else {
                    let base = T::lit(k as f64) * dt;
                    integrate_power_singular(&smooth_rules, upper, decay, |w| {
                        Float::powf(base + w, exp_k) * Float::exp(-a * w)
                    })
                };
                q.push(v);
                err += est;
            }
            let e = (0..n)
                .map(|r| Float::exp(-a * T::lit(r as f64) * dt))
                .collect();
            NodeTable { q, e, err }
        })
        .collect();

    let worst = tables
        .iter()
        .fold(T::zero(), |acc, t| Float::max(acc, t.err));
    if worst.as_f64() > crate::cov::QUAD_TOL {
        return Err(RoughVolError::QuadratureNonConvergence {
            est: worst.as_f64(),
            tol: crate::cov::QUAD_TOL,
        });
    }

    let sqrt_2h = Float::sqrt(T::lit(2.0) * hp.h());
    let c_h = hp.c_h();
    let mut fh = DMatrix::<T>::zeros(n, n);
    for l in 0..n_l {
        let scale = c_h * quadrature.weights[l] * sqrt_2h;
        let t = &tables[l];
        // i ≤ j: cov = √(2H)·e^{−a(t_j−t_i)}·∫₀^{t_i} u^{H−1/2} e^{−au} du,
        // with the integral as a prefix sum of decayed panels
        let mut prefix = T::zero();
        for i in 1..=n {
            prefix += t.e[i - 1] * t.q[i - 1];
            for j in i..=n {
                fh[(i - 1, j - 1)] += scale * t.e[j - i] * prefix;
            }
        }
        // i > j: cov = √(2H)·∫₀^{t_j} ((t_i−t_j)+v)^{H−1/2} e^{−av} dv,
        // accumulated along each subdiagonal d = i−j
        for d in 1..n {
            let mut s = T::zero();
            for j in 1..=(n - d) {
                s += t.e[j - 1] * t.q[d + j - 1];
                fh[(d + j - 1, j - 1)] += scale * s;
            }
        }
    }
    Ok(fh)
}

/// Covariance of the surrogate pair values cov(Ŵ^H_{t_i}, Ŵ^H_{t_j}):
/// double θ-sum of `ou_cov_cross` with the exponentials factored out of the
/// inner loop.
fn surrogate_cov_entry<T: Real>(
    speeds: &[T],
    weights: &[T],
    ti: T,
    tj: T,
) -> T {
    let m = Float::min(ti, tj);
    let n_l = speeds.len();
    let mut p_row = Vec::with_capacity(n_l);
    let mut q_row = Vec::with_capacity(n_l);
    let mut r_col = Vec::with_capacity(n_l);
    let mut s_col = Vec::with_capacity(n_l);
    for l in 0..n_l {
        let e1 = Float::exp(-speeds[l] * (ti - m));
        let e2 = Float::exp(-speeds[l] * (tj - m));
        let f = Float::exp(-speeds[l] * m);
        p_row.push(weights[l] * e1);
        q_row.push(weights[l] * e1 * f);
        r_col.push(weights[l] * e2);
        s_col.push(weights[l] * e2 * f);
    }
    let mut acc = T::zero();
    for k in 0..n_l {
        let (pk, qk, ak) = (p_row[k], q_row[k], speeds[k]);
        for l in 0..n_l {
            let denom = ak + speeds[l];
            if denom == T::zero() {
                acc += pk * r_col[l] * m;
            } else {
                acc += (pk * r_col[l] - qk * s_col[l]) / denom;
            }
        }
    }
    acc
}

/// Per-grid-point L² distance between W^H and its surrogate under the
/// coupled construction: the pair (W^H_{t_i}, Ŵ^H_{t_i})_i is drawn from its
/// exact joint law (the OU components are marginalized into the surrogate's
/// covariance analytically — same law as summing sampled OU factors, one
/// 2n-dimensional factorization instead of an (N_L+1)·n-dimensional one)
/// and RMS_i = √(E[(Ŵ^H_{t_i} − W^H_{t_i})²]) is estimated over M paths.
///
/// The internal factorization clips at 1e−8·λmax: the marginalized matrix
/// carries N_L²-term summation noise and the difference process is nearly
/// degenerate, which pushes noise eigenvalues below the library-default
/// window; the induced law perturbation is orders below MC noise.
pub fn l2_error_profile<T: Real>(
    quadrature: &QuadratureGrid<T>,
    horizon: T,
    n_steps: usize,
    m: usize,
    seed: u64,
) -> Result<Vec<T>> {
    if n_steps == 0 {
        return Ok(Vec::new());
    }
    if m == 0 {
        return Err(RoughVolError::InvalidConfig(
            "l2_error needs at least one path".into(),
        ));
    }
    let hp = quadrature.hp;
    let grid = TimeGrid::new(horizon, n_steps)?;
    let n = grid.n();
    let t = grid.inner_points();
    let c_h = hp.c_h();

    let ff = build_joint_covariance(&grid, &hp)?.s11;

    let speeds: Vec<T> = quadrature
        .nodes
        .iter()
        .map(|&th| reversion_speed(th, &hp))
        .collect();
    let weights = &quadrature.weights;

    let fh = fbm_surrogate_block(&grid, quadrature, &speeds)?;

    let hh_rows: Vec<Vec<T>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (i..n)
                .map(|j| c_h * c_h * surrogate_cov_entry(&speeds, weights, t[i], t[j]))
                .collect()
        })
        .collect();

    let mut sigma = DMatrix::<T>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            sigma[(i, j)] = ff[(i, j)];
            sigma[(i, n + j)] = fh[(i, j)];
            sigma[(n + j, i)] = fh[(i, j)];
        }
    }
    for (i, row) in hh_rows.into_iter().enumerate() {
        for (off, v) in row.into_iter().enumerate() {
            let j = i + off;
            sigma[(n + i, n + j)] = v;
            sigma[(n + j, n + i)] = v;
        }
    }

    let factor = psd_factor(&sigma, T::lit(1e-8))?;
    let chunk_sums = gaussian_chunks(
        &factor.factor,
        m,
        seed,
        DEFAULT_STREAM_LAYOUT,
        |_, _, x| {
            let mut sums = vec![CompensatedSum::<T>::new(); n];
            for c in 0..x.ncols() {
                for (i, s) in sums.iter_mut().enumerate() {
                    let d = x[(n + i, c)] - x[(i, c)];
                    s.add(d * d);
                }
            }
            sums
        },
    );
    let mut totals = vec![CompensatedSum::<T>::new(); n];
    for chunk in chunk_sums {
        for (tot, part) in totals.iter_mut().zip(chunk) {
            tot.merge(&part);
        }
    }
    let mf = T::lit(m as f64);
    Ok(totals
        .into_iter()
        .map(|s| Float::sqrt(Float::max(s.value() / mf, T::zero())))
        .collect())
}

/// max over grid points of the coupled L² distance; 0 for an empty grid.
pub fn l2_error<T: Real>(
    quadrature: &QuadratureGrid<T>,
    horizon: T,
    n_steps: usize,
    m: usize,
    seed: u64,
) -> Result<T> {
    let profile = l2_error_profile(quadrature, horizon, n_steps, m, seed)?;
    Ok(profile
        .into_iter()
        .fold(T::zero(), |acc, v| Float::max(acc, v)))
}
