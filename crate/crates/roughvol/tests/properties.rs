//! Randomized invariants over the public API: covariance structure,
//! factorization, parser round-trips, rate fitting on synthetic power laws,
//! and the deterministic second-moment oracles.

use proptest::prelude::*;
use roughvol::*;

fn hurst() -> impl Strategy<Value = f64> {
    // stay a hair off 0 where the kernel exponent degenerates
    (0.02f64..=0.5).prop_map(|h| (h * 1e6).round() / 1e6)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The assembled joint covariance is symmetric, factors without a
    /// NotPsd error, and the factor reproduces it within eigen-solver
    /// precision relative to the top eigenvalue.
    #[test]
    fn joint_covariance_is_symmetric_and_factorable(
        h in hurst(),
        n in 2usize..=12,
        horizon in 0.25f64..=2.0,
    ) {
        let hp = HurstParams64::new(h).unwrap();
        let grid = TimeGrid64::new(horizon, n).unwrap();
        let sigma = build_joint_covariance(&grid, &hp).unwrap().assemble();
        for i in 0..sigma.nrows() {
            for j in 0..i {
                prop_assert!((sigma[(i, j)] - sigma[(j, i)]).abs() <= 1e-12);
            }
        }
        let factor = psd_factor(&sigma, DEFAULT_CLIP_TOL).unwrap();
        let product = &factor.factor * factor.factor.transpose();
        let tol = 1e-10 * factor.lambda_max.max(1e-300);
        for i in 0..sigma.nrows() {
            for j in 0..sigma.ncols() {
                prop_assert!((product[(i, j)] - sigma[(i, j)]).abs() <= tol);
            }
        }
    }

    /// Diagonal of the fBm block is exactly t^{2H}; the fBm–BM cross block
    /// never exceeds either marginal scale (Cauchy–Schwarz).
    #[test]
    fn covariance_diagonal_and_cross_bounds(
        h in hurst(),
        n in 2usize..=10,
        horizon in 0.25f64..=2.0,
    ) {
        let hp = HurstParams64::new(h).unwrap();
        let grid = TimeGrid64::new(horizon, n).unwrap();
        let blocks = build_joint_covariance(&grid, &hp).unwrap();
        let t = grid.inner_points();
        for i in 0..n {
            let var = t[i].powf(2.0 * h);
            prop_assert!((blocks.s11[(i, i)] - var).abs() <= 1e-9 * var.max(1.0));
            for j in 0..n {
                let bound = (var * t[j]).sqrt() + 1e-12;
                prop_assert!(blocks.s12[(i, j)].abs() <= bound);
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// label → parse round-trip is the identity on the payoff catalog.
    #[test]
    fn payoff_label_parse_round_trip(
        shift in -3.0f64..=3.0,
        strike in 0.5f64..=150.0,
        coeffs in proptest::collection::vec(-4.0f64..=4.0, 1..5),
    ) {
        let catalog: Vec<Payoff64> = vec![
            Payoff::Square,
            Payoff::Cube,
            Payoff::Heaviside,
            Payoff::ShiftedCube { shift },
            Payoff::Polynomial { coeffs },
            Payoff::Call { strike },
        ];
        for payoff in catalog {
            let parsed: Payoff64 = parse_payoff(&payoff.label()).unwrap();
            prop_assert_eq!(parsed, payoff);
        }
    }

    /// The kernel is positive and decreasing in the lag for H < 1/2.
    #[test]
    fn kernel_positive_and_decreasing(
        h in 0.02f64..=0.49,
        r in 1e-3f64..=5.0,
        bump in 0.01f64..=1.0,
    ) {
        let hp = HurstParams64::new(h).unwrap();
        let k1 = rl_kernel(r, &hp).unwrap();
        let k2 = rl_kernel(r + bump, &hp).unwrap();
        prop_assert!(k1 > 0.0);
        prop_assert!(k2 > 0.0);
        prop_assert!(k2 < k1);
    }

    /// Left-rule second moments under-estimate the exact value and increase
    /// under dyadic refinement (the integrand s^{2H} is increasing).
    #[test]
    fn discrete_second_moment_increases_to_exact(
        h in hurst(),
        horizon in 0.25f64..=2.0,
        log2_n in 1u32..=8,
    ) {
        let hp = HurstParams64::new(h).unwrap();
        let psi = PsiSpec64::Linear;
        let n = 1usize << log2_n;
        let coarse = discrete_second_moment(&psi, &hp, horizon, n);
        let fine = discrete_second_moment(&psi, &hp, horizon, 2 * n);
        let exact = exact_second_moment(&psi, &hp, horizon);
        prop_assert!(coarse < fine);
        prop_assert!(fine < exact);
    }

    /// The surrogate tail bound is positive and decreasing in the cap L.
    #[test]
    fn tail_bound_positive_and_decreasing(
        h in 0.02f64..=0.45,
        l in 1.0f64..=100.0,
        bump in 0.5f64..=50.0,
    ) {
        let hp = HurstParams64::new(h).unwrap();
        let b1 = tail_variance_bound(l, &hp).unwrap();
        let b2 = tail_variance_bound(l + bump, &hp).unwrap();
        prop_assert!(b1 > 0.0);
        prop_assert!(b2 < b1);
    }

    /// fit_rate recovers the exponent of an exact synthetic power law
    /// err = c·dt^beta with non-straddling confidence intervals.
    #[test]
    fn fit_recovers_synthetic_power_law(
        beta in 0.2f64..=2.0,
        c in 0.1f64..=10.0,
        sign in proptest::bool::ANY,
    ) {
        let signum = if sign { 1.0 } else { -1.0 };
        let rows: Vec<ErrorRow<f64>> = (1..=6u32)
            .map(|j| {
                let n = 1usize << j;
                let dt = 1.0 / n as f64;
                let err = signum * c * dt.powf(beta);
                ErrorRow {
                    h: 0.1,
                    psi: "linear".into(),
                    payoff: "square".into(),
                    dt,
                    n,
                    mean_err: err,
                    se: err.abs() * 0.05,
                    ci_lo: err - err.abs() * 0.1,
                    ci_hi: err + err.abs() * 0.1,
                    m: 1000,
                    seed: 9,
                }
            })
            .collect();
        let report = WeakErrorReport { rows, config_lines: Vec::new() };
        let fits = fit_rate(&report).unwrap();
        prop_assert_eq!(fits.len(), 1);
        prop_assert!((fits[0].slope - beta).abs() <= 1e-9);
        prop_assert!((fits[0].r2 - 1.0).abs() <= 1e-9);
        let lo = fits[0].slope_lo.min(fits[0].slope_hi);
        let hi = fits[0].slope_lo.max(fits[0].slope_hi);
        prop_assert!(lo <= beta + 1e-9 && beta - 1e-9 <= hi);
    }

    /// Config echo lines parse back into a config with identical echo
    /// lines — the on-disk key set loses nothing.
    #[test]
    fn config_echo_round_trip(
        h in hurst(),
        log2_n_ref in 3u32..=10,
        m in 2usize..=5000,
        seed in 0u64..=u64::MAX / 2,
        xi in 0.01f64..=0.2,
        eta in 0.0f64..=2.5,
        linear in proptest::bool::ANY,
    ) {
        let config = RunConfig64 {
            h_list: vec![h],
            horizon: 1.5,
            log2_n_ref,
            log2_n_list: (1..=log2_n_ref.min(4)).collect(),
            m,
            seed,
            psi: if linear {
                PsiSpec::Linear
            } else {
                PsiSpec::RBergomi { xi, eta }
            },
            payoffs: vec![Payoff::Square, Payoff::ShiftedCube { shift: 1.5 }],
            out: None,
            mem_budget_mb: default_mem_budget_mb(),
            stream_layout: DEFAULT_STREAM_LAYOUT,
        };
        config.validate().unwrap();
        let mut rebuilt = RunConfig64::default();
        for line in config.echo_lines() {
            let body = line.strip_prefix("# ").unwrap();
            let (key, value) = body.split_once(" = ").unwrap();
            apply_key(&mut rebuilt, key, value).unwrap();
        }
        prop_assert_eq!(rebuilt.echo_lines(), config.echo_lines());
    }

    /// subsample accepts exactly the strides dividing n and exposes the
    /// decimated grid.
    #[test]
    fn subsample_stride_divisibility(
        log2_n in 2u32..=6,
        stride in 1usize..=20,
    ) {
        let n = 1usize << log2_n;
        let hp = HurstParams64::new(0.3).unwrap();
        let grid = TimeGrid64::new(1.0, n).unwrap();
        let sigma = build_joint_covariance(&grid, &hp).unwrap().assemble();
        let factor = psd_factor(&sigma, DEFAULT_CLIP_TOL).unwrap();
        let batch = sample_joint_paths(&factor, &grid, &hp, 3, 11, DEFAULT_STREAM_LAYOUT);
        let view = subsample(&batch, stride);
        if stride == 0 || n % stride != 0 {
            prop_assert!(view.is_err());
        } else {
            let view = view.unwrap();
            prop_assert_eq!(view.n(), n / stride);
            prop_assert!((view.dt() - stride as f64 / n as f64).abs() <= 1e-15);
        }
    }
}
