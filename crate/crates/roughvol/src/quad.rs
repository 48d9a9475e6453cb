//! Gaussian quadrature: Golub–Welsch construction of Gauss–Legendre,
//! Gauss–Jacobi and Gauss–Hermite rules, plus a composite integrator for
//! power-law endpoint singularities with boundary layers.

use crate::real::{CompensatedSum, Real};
use nalgebra::DMatrix;
use num_traits::Float;
use statrs::function::gamma::gamma;

/// Nodes and weights of an n-point rule. Legendre/Jacobi rules live on
/// [−1, 1]; Hermite on the whole line with weight e^{−x²}.
#[derive(Clone, Debug)]
pub struct GaussRule<T: Real> {
    pub nodes: Vec<T>,
    pub weights: Vec<T>,
}

impl<T: Real> GaussRule<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

/// Golub–Welsch: eigen-decompose the symmetric tridiagonal Jacobi matrix of
/// the three-term recurrence; eigenvalues are the nodes, weights come from
/// the first eigenvector components scaled by the weight-function mass μ0.
fn golub_welsch(diag: &[f64], offdiag_sq: &[f64], mu0: f64) -> (Vec<f64>, Vec<f64>) {
    let n = diag.len();
    assert!(n >= 1 && offdiag_sq.len() == n - 1);
    let mut j = DMatrix::<f64>::zeros(n, n);
    for (k, &d) in diag.iter().enumerate() {
        j[(k, k)] = d;
    }
    for (k, &b2) in offdiag_sq.iter().enumerate() {
        let b = b2.sqrt();
        j[(k, k + 1)] = b;
        j[(k + 1, k)] = b;
    }
    let eig = j.symmetric_eigen();
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let v0 = eig.eigenvectors[(0, i)];
            (eig.eigenvalues[i], mu0 * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite nodes"));
    pairs.into_iter().unzip()
}

/// n-point Gauss–Jacobi rule on [−1, 1] for weight (1−x)^α (1+x)^β,
/// α, β > −1.
pub fn gauss_jacobi<T: Real>(n: usize, alpha: f64, beta: f64) -> GaussRule<T> {
    assert!(n >= 1 && alpha > -1.0 && beta > -1.0);
    let ab = alpha + beta;
    let mut diag = Vec::with_capacity(n);
    let mut off = Vec::with_capacity(n.saturating_sub(1));
    diag.push((beta - alpha) / (ab + 2.0));
    for k in 1..n {
        let kf = k as f64;
        let denom = (2.0 * kf + ab) * (2.0 * kf + ab + 2.0);
        diag.push((beta * beta - alpha * alpha) / denom);
    }
    if n > 1 {
        off.push(4.0 * (alpha + 1.0) * (beta + 1.0) / ((ab + 2.0) * (ab + 2.0) * (ab + 3.0)));
        for k in 2..n {
            let kf = k as f64;
            let d = 2.0 * kf + ab;
            off.push(
                4.0 * kf * (kf + alpha) * (kf + beta) * (kf + ab)
                    / (d * d * (d + 1.0) * (d - 1.0)),
            );
        }
    }
    let mu0 = 2f64.powf(ab + 1.0) * gamma(alpha + 1.0) * gamma(beta + 1.0) / gamma(ab + 2.0);
    let (nodes, weights) = golub_welsch(&diag, &off, mu0);
    GaussRule {
        nodes: nodes.into_iter().map(T::lit).collect(),
        weights: weights.into_iter().map(T::lit).collect(),
    }
}

/// n-point Gauss–Legendre rule on [−1, 1].
pub fn gauss_legendre<T: Real>(n: usize) -> GaussRule<T> {
    gauss_jacobi(n, 0.0, 0.0)
}

/// n-point Gauss–Hermite rule (physicists' convention, weight e^{−x²}).
pub fn gauss_hermite<T: Real>(n: usize) -> GaussRule<T> {
    assert!(n >= 1);
    let diag = vec![0.0; n];
    let off: Vec<f64> = (1..n).map(|k| k as f64 / 2.0).collect();
    let (nodes, weights) = golub_welsch(&diag, &off, std::f64::consts::PI.sqrt());
    GaussRule {
        nodes: nodes.into_iter().map(T::lit).collect(),
        weights: weights.into_iter().map(T::lit).collect(),
    }
}

/// Rule bundle for one singular exponent c (weight u^c at the origin).
#[derive(Clone, Debug)]
pub struct SingularRules<T: Real> {
    pub exponent: T,
    pub jacobi: GaussRule<T>,
    pub legendre: GaussRule<T>,
    pub legendre_half: GaussRule<T>,
}

const JACOBI_NODES: usize = 24;
const LEGENDRE_NODES: usize = 16;

impl<T: Real> SingularRules<T> {
    pub fn for_exponent(c: T) -> Self {
        Self {
            exponent: c,
            jacobi: gauss_jacobi(JACOBI_NODES, 0.0, c.as_f64()),
            legendre: gauss_legendre(LEGENDRE_NODES),
            legendre_half: gauss_legendre(LEGENDRE_NODES / 2),
        }
    }
}

/// ∫₀^a u^c·f(u) du for c > −1, f smooth away from 0 with its fastest
/// variation on scale `layer` (e.g. the off-diagonal gap of a covariance
/// entry, or the decay length of an exponential factor).
///
/// The head panel [0, min(layer, a)] is Gauss–Jacobi with the u^c weight
/// absorbed; the remainder is covered by dyadically doubling Gauss–Legendre
/// panels, which keeps relative accuracy scale-invariant for power-law
/// integrands. Returns (value, error_estimate); the estimate compares each
/// Legendre panel against its embedded half-order rule.
pub fn integrate_power_singular<T: Real, F: Fn(T) -> T>(
    rules: &SingularRules<T>,
    a: T,
    layer: T,
    f: F,
) -> (T, T) {
    if a <= T::zero() {
        return (T::zero(), T::zero());
    }
    let c = rules.exponent;
    let two = T::lit(2.0);
    let s0 = if layer > T::zero() && layer < a { layer } else { a };

    let mut acc = CompensatedSum::<T>::new();
    let mut err = T::zero();

    // head: u = s0(1+x)/2, ∫₀^{s0} u^c f du = (s0/2)^{c+1} Σ w_i f(u_i)
    let half = s0 / two;
    let scale = Float::powf(half, c + T::one());
    let mut head = CompensatedSum::<T>::new();
    for (x, w) in rules.jacobi.nodes.iter().zip(&rules.jacobi.weights) {
        head.add(*w * f(half * (T::one() + *x)));
    }
    acc.add(scale * head.value());

    // dyadic Legendre panels [lo, min(2·lo, a)]
    let mut lo = s0;
    while lo < a {
        let hi = Float::min(lo * two, a);
        let mid = (lo + hi) / two;
        let rad = (hi - lo) / two;
        let eval = |rule: &GaussRule<T>| {
            let mut s = CompensatedSum::<T>::new();
            for (x, w) in rule.nodes.iter().zip(&rule.weights) {
                let u = mid + rad * *x;
                s.add(*w * Float::powf(u, c) * f(u));
            }
            rad * s.value()
        };
        let full = eval(&rules.legendre);
        let coarse = eval(&rules.legendre_half);
        err += Float::abs(full - coarse);
        acc.add(full);
        lo = hi;
    }
    (acc.value(), err)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_polynomial_exactness() {
        let r = gauss_legendre::<f64>(16);
        let total: f64 = r.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-14);
        // ∫ x^8 dx = 2/9; ∫ x^31 dx = 0 (odd, and still within degree 31)
        let i8: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(8)).sum();
        assert!((i8 - 2.0 / 9.0).abs() < 1e-14);
        let i31: f64 = r.nodes.iter().zip(&r.weights).map(|(x, w)| w * x.powi(31)).sum();
        assert!(i31.abs() < 1e-14);
    }

    #[test]
    fn jacobi_weight_mass() {
        // Σw = ∫ (1+x)^{−0.45} dx over [−1,1] = 2^{0.55}/0.55
        let r = gauss_jacobi::<f64>(24, 0.0, -0.45);
        let total: f64 = r.weights.iter().sum();
        assert!((total - 2f64.powf(0.55) / 0.55).abs() < 1e-13);
        assert!(r.nodes.windows(2).all(|p| p[0] < p[1]), "nodes sorted");
        assert!(r.nodes.iter().all(|&x| (-1.0..1.0).contains(&x)));
    }

    #[test]
    fn hermite_gaussian_moments() {
        // E[V^k] via (1/√π) Σ w f(√2 x): 1, 0, 1, 0, 3 for k = 0..4
        let r = gauss_hermite::<f64>(20);
        let moment = |k: i32| -> f64 {
            let s: f64 = r
                .nodes
                .iter()
                .zip(&r.weights)
                .map(|(x, w)| w * (std::f64::consts::SQRT_2 * x).powi(k))
                .sum();
            s / std::f64::consts::PI.sqrt()
        };
        assert!((moment(0) - 1.0).abs() < 1e-14);
        assert!(moment(1).abs() < 1e-14);
        assert!((moment(2) - 1.0).abs() < 1e-13);
        assert!((moment(4) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn singular_power_polynomial_exact() {
        // ∫₀^1 u^{−0.45}(1+u) du = 1/0.55 + 1/1.55
        let rules = SingularRules::<f64>::for_exponent(-0.45);
        let (v, _) = integrate_power_singular(&rules, 1.0, 1.0, |u| 1.0 + u);
        assert!((v - (1.0 / 0.55 + 1.0 / 1.55)).abs() < 1e-13);
    }

    #[test]
    fn singular_exponential_against_oracle() {
        // frozen mpmath: ∫₀^3 u^{−0.45} e^{−u} du
        let rules = SingularRules::<f64>::for_exponent(-0.45);
        let (v, e) = integrate_power_singular(&rules, 3.0, 1.0, |u: f64| (-u).exp());
        assert!((v - 1.58901108869728541).abs() < 1e-12, "got {v}");
        assert!(e < 1e-10);
    }

    #[test]
    fn singular_boundary_layer_against_oracle() {
        // frozen mpmath: ∫₀^1 u^{−0.4}(10⁻⁶+u)^{−0.4} du — layer at 1e−6
        let rules = SingularRules::<f64>::for_exponent(-0.4);
        let d = 1e-6;
        let (v, e) = integrate_power_singular(&rules, 1.0, d, |u: f64| (d + u).powf(-0.4));
        assert!((v - 4.75341549088579441).abs() < 1e-11, "got {v}");
        assert!(e < 1e-9);
    }

    #[test]
    fn singular_oscillatory_against_oracle() {
        // frozen mpmath: ∫₀^2 u^{−0.3} cos u du
        let rules = SingularRules::<f64>::for_exponent(-0.3);
        let (v, _) = integrate_power_singular(&rules, 2.0, 2.0, |u: f64| u.cos());
        assert!((v - 1.32740194278027236).abs() < 1e-12, "got {v}");
    }

    #[test]
    fn zero_length_interval() {
        let rules = SingularRules::<f64>::for_exponent(-0.4);
        let (v, e) = integrate_power_singular(&rules, 0.0, 1.0, |_| 1.0);
        assert_eq!(v, 0.0);
        assert_eq!(e, 0.0);
    }

    #[test]
    fn f32_rules_build() {
        let r = gauss_legendre::<f32>(8);
        let total: f32 = r.weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-5);
    }
}
