//! Left-point Euler scheme for X_T = ∫₀^T ψ(t, W^H_t) dW_t, the ψ catalog,
//! and analytic second-moment oracles from the Itô isometry.
//!
//! E[X̄_T(n)²] = Σ g(t_i)·Δt with g(s) = E[ψ²(s, s^H V)], V standard normal —
//! an exact discrete-level oracle that calibrates the whole sampling +
//! scheme pipeline to Monte Carlo noise.

use crate::hurst::HurstParams;
use crate::quad::gauss_hermite;
use crate::real::{CompensatedSum, Real};
use crate::sampler::BatchView;
use num_traits::Float;
use rayon::prelude::*;

/// Integrand family ψ(t, x).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PsiSpec<T> {
    /// ψ(t, x) = x (rough Stein–Stein driver)
    Linear,
    /// ψ(t, x) = √ξ·exp((η/2)x − (η²/4)t^{2H}); ψ² is the rough Bergomi
    /// variance with flat forward variance ξ
    RBergomi { xi: T, eta: T },
}

impl<T: Real> PsiSpec<T> {
    pub fn eval(&self, t: T, x: T, hp: &HurstParams<T>) -> T {
        match *self {
            PsiSpec::Linear => x,
            PsiSpec::RBergomi { xi, eta } => {
                let half = T::lit(0.5);
                let quarter = T::lit(0.25);
                let two_h = T::lit(2.0) * hp.h();
                Float::sqrt(xi)
                    * Float::exp(half * eta * x - quarter * eta * eta * Float::powf(t, two_h))
            }
        }
    }

    /// instantaneous variance ψ²(t, x)
    pub fn variance(&self, t: T, x: T, hp: &HurstParams<T>) -> T {
        let v = self.eval(t, x, hp);
        v * v
    }

    /// g(s) = E[ψ²(s, s^H V)]: s^{2H} for the linear kind; ξ for rbergomi
    /// (lognormal mean 1).
    pub fn g(&self, s: T, hp: &HurstParams<T>) -> T {
        match *self {
            PsiSpec::Linear => {
                if s == T::zero() {
                    T::zero()
                } else {
                    Float::powf(s, T::lit(2.0) * hp.h())
                }
            }
            PsiSpec::RBergomi { xi, .. } => xi,
        }
    }

    /// g(s) by 63-point Gauss–Hermite quadrature of E[ψ²(s, s^H V)]; a
    /// numerical cross-check of `g` that stays valid for future non-flat ξ.
    pub fn g_quadrature(&self, s: T, hp: &HurstParams<T>) -> T {
        let rule = gauss_hermite::<T>(63);
        let s_h = Float::powf(s, hp.h());
        let sqrt2 = Float::sqrt(T::lit(2.0));
        let mut acc = CompensatedSum::<T>::new();
        for (&node, &weight) in rule.nodes.iter().zip(rule.weights.iter()) {
            // nodes integrate against e^{−x²}; V = √2·x maps to the standard
            // normal with total mass √π
            let v = sqrt2 * node;
            acc.add(weight * self.variance(s, s_h * v, hp));
        }
        acc.value() / Float::sqrt(T::lit(std::f64::consts::PI))
    }

    /// true when ψ does not depend on the path (η = 0 rough Bergomi), so the
    /// variance process is deterministic
    pub fn is_deterministic_variance(&self) -> bool {
        matches!(*self, PsiSpec::RBergomi { eta, .. } if eta == T::zero())
    }

    pub fn label(&self) -> String {
        match *self {
            PsiSpec::Linear => "linear".to_string(),
            PsiSpec::RBergomi { xi, eta } => {
                format!("rbergomi:{},{}", xi.as_f64(), eta.as_f64())
            }
        }
    }
}

/// Terminal samples of the scheme on one grid resolution.
#[derive(Clone, Debug)]
pub struct EulerResult<T> {
    /// X̄_T per path
    pub values: Vec<T>,
    /// steps of the grid the scheme ran on
    pub n: usize,
    pub dt: T,
}

/// X̄_T = Σ_{i=0}^{n−1} ψ(t_i, W^H_{t_i})·(W_{t_{i+1}} − W_{t_i}) per path,
/// ascending i with compensated accumulation.
pub fn euler_left_point<T: Real>(
    view: &BatchView<'_, T>,
    psi: &PsiSpec<T>,
    hp: &HurstParams<T>,
) -> EulerResult<T> {
    let n = view.n();
    debug_assert!(n >= 1, "scheme needs at least two grid rows");
    let m = view.m();
    let values: Vec<T> = (0..m)
        .into_par_iter()
        .map(|j| {
            let mut acc = CompensatedSum::<T>::new();
            for i in 0..n {
                let coeff = psi.eval(view.t(i), view.wh(i, j), hp);
                acc.add(coeff * (view.w(i + 1, j) - view.w(i, j)));
            }
            acc.value()
        })
        .collect();
    EulerResult {
        values,
        n,
        dt: view.dt(),
    }
}

/// The scheme at the batch's own (finest) resolution — the reference X̄^ref_T
/// that stands in for X_T in weak-error differences.
pub fn reference_solution<T: Real>(
    view: &BatchView<'_, T>,
    psi: &PsiSpec<T>,
    hp: &HurstParams<T>,
) -> EulerResult<T> {
    debug_assert_eq!(view.stride(), 1, "reference runs on the finest grid");
    euler_left_point(view, psi, hp)
}

/// E[X_T²] = ∫₀^T g(s) ds: T^{2H+1}/(2H+1) for linear ψ, ξT for rbergomi.
pub fn exact_second_moment<T: Real>(psi: &PsiSpec<T>, hp: &HurstParams<T>, horizon: T) -> T {
    debug_assert!(horizon >= T::zero());
    match *psi {
        PsiSpec::Linear => {
            let e = T::lit(2.0) * hp.h() + T::one();
            Float::powf(horizon, e) / e
        }
        PsiSpec::RBergomi { xi, .. } => xi * horizon,
    }
}

/// E[X̄_T(n)²] = Σ_{i=0}^{n−1} g(t_i)·Δt — the discrete Itô isometry.
pub fn discrete_second_moment<T: Real>(
    psi: &PsiSpec<T>,
    hp: &HurstParams<T>,
    horizon: T,
    n: usize,
) -> T {
    assert!(n >= 1);
    let nf = T::lit(n as f64);
    let dt = horizon / nf;
    let mut acc = CompensatedSum::<T>::new();
    for i in 0..n {
        let t = horizon * T::lit(i as f64) / nf;
        acc.add(psi.g(t, hp) * dt);
    }
    acc.value()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cov::build_joint_covariance;
    use crate::grid::TimeGrid;
    use crate::psd::psd_factor;
    use crate::sampler::{sample_joint_paths, subsample, PathBatch, DEFAULT_STREAM_LAYOUT};
    use nalgebra::DMatrix;

    fn hp(h: f64) -> HurstParams<f64> {
        HurstParams::new(h).unwrap()
    }

    fn hand_batch(wh_vals: &[f64], w_vals: &[f64], horizon: f64) -> PathBatch<f64> {
        let n = wh_vals.len() - 1;
        PathBatch {
            grid: TimeGrid::new(horizon, n).unwrap(),
            hurst: hp(0.1),
            wh: DMatrix::from_column_slice(n + 1, 1, wh_vals),
            w: DMatrix::from_column_slice(n + 1, 1, w_vals),
            seed: 0,
            stream_layout: DEFAULT_STREAM_LAYOUT,
        }
    }

    fn sampled(h: f64, n: usize, m: usize, seed: u64) -> PathBatch<f64> {
        let grid = TimeGrid::new(1.0, n).unwrap();
        let p = hp(h);
        let sigma = build_joint_covariance(&grid, &p).unwrap().assemble();
        let factor = psd_factor(&sigma, 1e-10).unwrap();
        sample_joint_paths(&factor, &grid, &p, m, seed, DEFAULT_STREAM_LAYOUT)
    }

    #[test]
    fn linear_single_step_is_zero() {
        let b = sampled(0.1, 1, 64, 3);
        let view = subsample(&b, 1).unwrap();
        let r = euler_left_point(&view, &PsiSpec::Linear, &b.hurst);
        assert!(r.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn hand_path_two_steps() {
        // left values W^H = (0, 0.8), W increments (1, −1):
        // X̄ = 0·1 + 0.8·(−1) = −0.8
        let b = hand_batch(&[0.0, 0.8, 0.8], &[0.0, 1.0, 0.0], 1.0);
        let view = subsample(&b, 1).unwrap();
        let r = euler_left_point(&view, &PsiSpec::Linear, &b.hurst);
        assert_eq!(r.values.len(), 1);
        assert!((r.values[0] - -0.8).abs() < 1e-15);
        assert_eq!(r.n, 2);
        assert_eq!(r.dt, 0.5);
    }

    #[test]
    fn rbergomi_single_step_scales_terminal_brownian() {
        let b = sampled(0.1, 1, 32, 4);
        let view = subsample(&b, 1).unwrap();
        let psi = PsiSpec::RBergomi { xi: 0.04, eta: 1.9 };
        let r = euler_left_point(&view, &psi, &b.hurst);
        for (j, &v) in r.values.iter().enumerate() {
            let expect = 0.2 * b.w[(1, j)];
            assert!((v - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn reference_equals_stride_one_scheme() {
        let b = sampled(0.15, 8, 40, 5);
        let view = subsample(&b, 1).unwrap();
        let a = reference_solution(&view, &PsiSpec::Linear, &b.hurst);
        let c = euler_left_point(&view, &PsiSpec::Linear, &b.hurst);
        assert_eq!(a.values, c.values);
        // reference minus itself: exact zero
        for (x, y) in a.values.iter().zip(c.values.iter()) {
            assert_eq!(x - y, 0.0);
        }
    }

    #[test]
    fn coupled_subsample_uses_same_paths() {
        let b = sampled(0.15, 8, 20, 6);
        let fine = subsample(&b, 1).unwrap();
        let coarse = subsample(&b, 4).unwrap();
        assert_eq!(coarse.wh(1, 7), fine.wh(4, 7));
        assert_eq!(coarse.w(2, 3), fine.w(8, 3));
    }

    #[test]
    fn scaling_linear_psi_scales_output() {
        // c·ψ for linear ψ realized by scaling the W^H rows
        let b = sampled(0.1, 8, 16, 7);
        let view = subsample(&b, 1).unwrap();
        let base = euler_left_point(&view, &PsiSpec::Linear, &b.hurst);
        let mut scaled_batch = b.clone();
        scaled_batch.wh *= 3.0;
        let view_s = subsample(&scaled_batch, 1).unwrap();
        let scaled = euler_left_point(&view_s, &PsiSpec::Linear, &b.hurst);
        for (s, v) in scaled.values.iter().zip(base.values.iter()) {
            // compensated accumulation is linear only up to rounding
            assert!((s - 3.0 * v).abs() <= 1e-14 * v.abs().max(1.0), "{s} vs {v}");
        }
    }

    #[test]
    fn martingale_mean_near_zero() {
        let b = sampled(0.1, 16, 100_000, 8);
        let view = subsample(&b, 1).unwrap();
        for psi in [PsiSpec::Linear, PsiSpec::RBergomi { xi: 0.04, eta: 1.9 }] {
            let r = euler_left_point(&view, &psi, &b.hurst);
            let m = r.values.len() as f64;
            let mean: f64 = r.values.iter().sum::<f64>() / m;
            let var: f64 = r.values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (m - 1.0);
            let se = (var / m).sqrt();
            assert!(mean.abs() <= 5.0 * se, "{}: mean {mean} se {se}", psi.label());
        }
    }

    #[test]
    fn second_moment_matches_isometry_oracle() {
        // exact discrete oracle within 5 SE across (H, n) combinations
        for (h, n) in [(0.05, 4), (0.1, 16), (0.5, 64)] {
            let b = sampled(h, n, 100_000, 9);
            let view = subsample(&b, 1).unwrap();
            let r = euler_left_point(&view, &PsiSpec::Linear, &b.hurst);
            let m = r.values.len() as f64;
            let m2: f64 = r.values.iter().map(|v| v * v).sum::<f64>() / m;
            let m4: f64 = r.values.iter().map(|v| v.powi(4)).sum::<f64>() / m;
            let se = ((m4 - m2 * m2) / m).sqrt();
            let oracle = discrete_second_moment(&PsiSpec::Linear, &b.hurst, 1.0, n);
            assert!(
                (m2 - oracle).abs() <= 5.0 * se,
                "H={h} n={n}: {m2} vs {oracle} (se {se})"
            );
        }
    }

    #[test]
    fn exact_second_moment_values() {
        assert!((exact_second_moment(&PsiSpec::Linear, &hp(0.5), 1.0) - 0.5).abs() < 1e-15);
        let v = exact_second_moment(&PsiSpec::Linear, &hp(0.1), 1.0);
        assert!((v - 1.0 / 1.2).abs() < 1e-15);
        let rb = PsiSpec::RBergomi { xi: 0.04, eta: 1.9 };
        assert!((exact_second_moment(&rb, &hp(0.1), 1.0) - 0.04).abs() < 1e-15);
    }

    #[test]
    fn discrete_second_moment_values() {
        // (0 + 0.5^{2H})·Δt at H = 0.5: (0 + 0.5)·0.5
        let v = discrete_second_moment(&PsiSpec::Linear, &hp(0.5), 1.0, 2);
        assert!((v - 0.25).abs() < 1e-15);
        assert_eq!(discrete_second_moment(&PsiSpec::Linear, &hp(0.3), 1.0, 1), 0.0);
        let rb = PsiSpec::RBergomi { xi: 0.04, eta: 0.7 };
        for n in [1, 5, 64] {
            let v = discrete_second_moment(&rb, &hp(0.1), 1.0, n);
            assert!((v - 0.04).abs() < 1e-15, "n={n}");
        }
    }

    #[test]
    fn discrete_converges_to_exact() {
        let p = hp(0.1);
        let exact = exact_second_moment(&PsiSpec::Linear, &p, 1.0);
        let d1 = discrete_second_moment(&PsiSpec::Linear, &p, 1.0, 64);
        let d2 = discrete_second_moment(&PsiSpec::Linear, &p, 1.0, 4096);
        assert!((d2 - exact).abs() < (d1 - exact).abs());
        assert!((d2 - exact).abs() < 1e-3);
    }

    #[test]
    fn g_closed_form_matches_hermite_quadrature() {
        let p = hp(0.1);
        for psi in [
            PsiSpec::Linear,
            PsiSpec::RBergomi { xi: 0.04, eta: 1.9 },
            PsiSpec::RBergomi { xi: 0.09, eta: 0.0 },
        ] {
            for s in [0.1, 0.5, 1.0] {
                let a = psi.g(s, &p);
                let b = psi.g_quadrature(s, &p);
                assert!((a - b).abs() < 1e-10, "{} at s={s}: {a} vs {b}", psi.label());
            }
        }
    }

    #[test]
    fn labels_round_trip_pieces() {
        assert_eq!(PsiSpec::<f64>::Linear.label(), "linear");
        let rb = PsiSpec::RBergomi { xi: 0.04, eta: 1.9 };
        assert_eq!(rb.label(), "rbergomi:0.04,1.9");
        assert!(!PsiSpec::<f64>::Linear.is_deterministic_variance());
        assert!(PsiSpec::RBergomi { xi: 0.04, eta: 0.0 }.is_deterministic_variance());
        assert!(!rb.is_deterministic_variance());
    }
}
