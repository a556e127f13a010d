//! Distributional checks of the driver against laws computed by `statrs`.

use levy_euler::levy_measure::{stable_scale_constant, AngularDensity, StableIndex};
use levy_euler::path_driver::{
    build_skeleton, exact_stable_increments, standard_symmetric_stable, DriverSpec, SmallJumpMode,
};
use levy_euler::rng::{stream_rng, Stream};
use statrs::distribution::{Cauchy, ChiSquared, ContinuousCDF, Discrete, Normal, Poisson};

/// Kolmogorov-Smirnov statistic of `xs` against `cdf`.
fn ks(mut xs: Vec<f64>, cdf: impl Fn(f64) -> f64) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// 1% critical value of the one-sample KS statistic.
fn ks_critical(n: usize) -> f64 {
    1.628 / (n as f64).sqrt()
}

fn spec(alpha: f64, truncated: bool, eps: f64, mode: SmallJumpMode) -> DriverSpec {
    DriverSpec::new(
        StableIndex::new(alpha, truncated).unwrap(),
        AngularDensity::isotropic(1).unwrap(),
        eps,
        mode,
        8,
    )
    .unwrap()
}

#[test]
fn cms_at_alpha_one_is_standard_cauchy() {
    let mut rng = stream_rng(41, 0, Stream::Probe);
    let xs: Vec<f64> = (0..50_000).map(|_| standard_symmetric_stable(&mut rng, 1.0)).collect();
    let law = Cauchy::new(0.0, 1.0).unwrap();
    let d = ks(xs.clone(), |x| law.cdf(x));
    assert!(d < ks_critical(xs.len()), "D = {d}");
}

#[test]
fn exact_marginal_at_time_one_is_cauchy_with_scale_pi() {
    // With ρ ≡ 1 in d = 1 and α = 1 the Lévy measure is dy / y², whose
    // characteristic exponent is π|u|.
    assert!((stable_scale_constant(1.0).unwrap() - std::f64::consts::PI).abs() < 1e-9);
    let s = DriverSpec::new(
        StableIndex::new(1.0, false).unwrap(),
        AngularDensity::isotropic(1).unwrap(),
        0.01,
        SmallJumpMode::GaussianSurrogate,
        6,
    )
    .unwrap()
    .with_exact_marginals(true)
    .unwrap();
    let xs: Vec<f64> = (0..20_000u64)
        .map(|i| exact_stable_increments(3, i, &s, 1).unwrap().total()[0])
        .collect();
    let law = Cauchy::new(0.0, std::f64::consts::PI).unwrap();
    let d = ks(xs.clone(), |x| law.cdf(x));
    assert!(d < ks_critical(xs.len()), "D = {d}");
}

#[test]
fn jump_counts_are_poisson() {
    // Truncated driver with ε = 0.5: jumps with 0.5 < |y| ≤ 1 at rate
    // 2 ∫_{0.5}^1 y^{-1-α} dy = 2 (0.5^{-α} - 1) / α.
    let alpha = 1.5;
    let s = spec(alpha, true, 0.5, SmallJumpMode::Drop);
    let lambda = 2.0 * (0.5f64.powf(-alpha) - 1.0) / alpha;
    let paths = 20_000u64;
    let mut counts = vec![0u64; 9];
    for i in 0..paths {
        let k = build_skeleton(17, i, &s).unwrap().jumps().len();
        counts[k.min(8)] += 1;
    }
    let law = Poisson::new(lambda).unwrap();
    let mut chi2 = 0.0;
    let mut tail = 1.0;
    for (k, &obs) in counts.iter().enumerate() {
        let p = if k == 8 { tail } else { law.pmf(k as u64) };
        tail -= p;
        let expected = p * paths as f64;
        chi2 += (obs as f64 - expected).powi(2) / expected;
    }
    let critical = ChiSquared::new(8.0).unwrap().inverse_cdf(0.99);
    assert!(chi2 < critical, "chi2 = {chi2}, critical {critical}");
}

#[test]
fn gaussian_surrogate_has_small_jump_variance() {
    // Σ(ε) = 2 ε^{2-α} / (2 - α) for ρ ≡ 1 in d = 1.
    let (alpha, eps) = (1.5, 0.01);
    let s = spec(alpha, true, eps, SmallJumpMode::GaussianSurrogate);
    let sigma = (2.0 * eps.powf(2.0 - alpha) / (2.0 - alpha)).sqrt();
    let xs: Vec<f64> = (0..20_000u64)
        .map(|i| build_skeleton(5, i, &s).unwrap().base_small_increments().iter().sum())
        .collect();
    let law = Normal::new(0.0, sigma).unwrap();
    let d = ks(xs.clone(), |x| law.cdf(x));
    assert!(d < ks_critical(xs.len()), "D = {d}");
}

#[test]
fn coarse_increments_are_block_sums_of_the_base_grid() {
    let s = spec(1.5, false, 0.05, SmallJumpMode::GaussianSurrogate);
    let base = build_skeleton(9, 4, &s).unwrap().base_increments();
    for n in [1usize, 4, 32, 256] {
        let coarse = base.aggregate(n).unwrap();
        let stride = base.cells / n;
        for k in 0..n {
            let direct: f64 = (k * stride..(k + 1) * stride).map(|j| base.cell(j)[0]).sum();
            assert!((coarse.cell(k)[0] - direct).abs() <= 1e-12 * (1.0 + direct.abs()));
        }
    }
}
