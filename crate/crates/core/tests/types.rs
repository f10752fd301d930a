use cutset_core::info::{conditional_mutual_information, l1_distance, JointPmf};
use cutset_core::linalg::min_eigenvalue;
use cutset_core::types_discrete::{
    continuity_xi, continuity_xi_for_support, discrete_certificate, modulus, CertificateError, DiscreteCertificate,
};
use cutset_core::types_gaussian::{
    cross_tail_tau, direct_product_exponent, empirical_correlation, gaussian_certificate, gaussian_product_prob_bound,
    gaussian_type, in_gamma, inverse_bound_check, noise_tail_tau, pair_product_cgf, product_bound_check,
    sample_gaussian_pair, typical_rejection_rate, typical_set_check,
};
use cutset_core::{Cut, DiscreteNetwork, GaussianNetwork, OptimizerConfig, RateMatrix};
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn normalize(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

#[test]
fn bsc_certificate_components() {
    let net = DiscreteNetwork::bsc(0.1).unwrap();
    let rates = RateMatrix::single(2, 0, 1, 0.45).unwrap();
    let c = discrete_certificate(&net, &rates, &OptimizerConfig::default()).unwrap();
    assert!(c.exponent > 0.0);
    assert!(c.exponent <= c.xi && c.exponent <= c.margin / 2.0);
    assert!((c.margin - (0.45 - 0.368_064_207_168_497_1)).abs() < 1e-6);
    assert!(c.log_bound(c.n0) < 0.0 && c.log_bound(c.n0 - 1) >= 0.0);
    let mut prev = c.log_bound(c.n0);
    for n in [c.n0 + 1, c.n0 * 2, c.n0 * 10, c.n0 * 100] {
        let b = c.log_bound(n);
        assert!(b < prev);
        prev = b;
    }
    assert!(c.bound(c.n0 * 1000) < 1e-100);
}

#[test]
fn inside_rates_have_no_certificate() {
    let net = DiscreteNetwork::bsc(0.1).unwrap();
    let rates = RateMatrix::single(2, 0, 1, 0.2).unwrap();
    let err = discrete_certificate(&net, &rates, &OptimizerConfig::default()).unwrap_err();
    assert!(matches!(err, CertificateError::Inside { .. }));
    assert!(err.to_string().starts_with("no certificate: rate inside cut-set bound"));
    let g = GaussianNetwork::scalar_link(1.0, 1.0, 1.0).unwrap();
    let err = gaussian_certificate(
        &g,
        &RateMatrix::single(2, 0, 1, 0.2).unwrap(),
        &OptimizerConfig::default(),
    )
    .unwrap_err();
    assert!(err.to_string().starts_with("no certificate"));
}

#[test]
fn bound_arithmetic() {
    let c = DiscreteCertificate::from_parts(0.02, 0.5, 4, Cut::new(1, 2).unwrap());
    assert_eq!(c.exponent, 0.01);
    let expected = 101f64.powi(4) * (-1.0f64).exp();
    assert!((c.bound(100) / expected - 1.0).abs() < 1e-12);
    assert!((c.bound(100) - 3.83e7).abs() < 1e5);
}

#[test]
fn xi_agrees_with_independent_root_finder() {
    // largest xi with 4 (d ln M + h(d)) <= delta / 2 at d = sqrt(2 xi)
    let target = |xi: f64| {
        let d = (2.0 * xi).sqrt().min(0.5);
        let h = -d * d.ln() - (1.0 - d) * (1.0 - d).ln();
        4.0 * ((2.0 * xi).sqrt() * 4f64.ln() + h) - 0.031936 / 2.0
    };
    let (mut lo, mut hi) = (1e-30f64, 1.0f64);
    for _ in 0..300 {
        let mid = (lo * hi).sqrt();
        if target(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let xi = continuity_xi_for_support(4.0, 0.031936).unwrap();
    assert!((xi / lo - 1.0).abs() < 1e-6);
    let net = DiscreteNetwork::bsc(0.1).unwrap();
    assert_eq!(
        continuity_xi(&net, 0.031936).unwrap(),
        continuity_xi_for_support(4.0, 0.031936).unwrap()
    );
}

#[test]
fn larger_support_shrinks_xi() {
    for delta in [1e-3, 0.03, 0.3] {
        let a = continuity_xi_for_support(4.0, delta).unwrap();
        let b = continuity_xi_for_support(8.0, delta).unwrap();
        assert!(b < a, "delta {delta}: {b} !< {a}");
    }
    assert!(modulus(0.1, 8.0) > modulus(0.1, 4.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn xi_is_monotone_in_margin(a in 1e-6f64..1.0, b in 1e-6f64..1.0, m in 2.0f64..64.0) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(continuity_xi_for_support(m, lo).unwrap() <= continuity_xi_for_support(m, hi).unwrap());
    }
}

#[test]
fn modulus_bounds_information_change() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut checked = 0;
    while checked < 10_000 {
        let sizes = [vec![2, 2, 2, 2], vec![2, 2, 4], vec![4, 4], vec![2, 3, 2]][rng.random_range(0..4)].clone();
        let support: usize = sizes.iter().product();
        let g = normalize(&(0..support).map(|_| rng.random::<f64>().powi(3)).collect::<Vec<_>>());
        let t = rng.random_range(0.0..1.0f64).powi(2);
        let other = normalize(&(0..support).map(|_| rng.random::<f64>()).collect::<Vec<_>>());
        let h: Vec<f64> = g.iter().zip(&other).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        let d = l1_distance(&g, &h);
        if d > 0.4 {
            continue;
        }
        // treat the last coordinate as the output block, the others as inputs
        let nodes = sizes.len() - 1;
        let cut = Cut::new(rng.random_range(0..(1u64 << nodes)), nodes).unwrap();
        let ig = cmi_on(&sizes, &g, &cut);
        let ih = cmi_on(&sizes, &h, &cut);
        assert!(
            (ig - ih).abs() <= modulus(d, support as f64) + 1e-12,
            "d {d}: {ig} vs {ih}"
        );
        checked += 1;
    }
}

/// `I(X_T; Y | X_Tc)` where `Y` is the last coordinate of the joint.
fn cmi_on(sizes: &[usize], p: &[f64], cut: &Cut) -> f64 {
    let joint = JointPmf::new(sizes.to_vec(), p.to_vec()).unwrap();
    conditional_mutual_information(&joint, cut)
}

#[test]
fn gaussian_type_blocks_are_psd() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..200 {
        let n = rng.random_range(1..40);
        let x = DMatrix::from_fn(3, n, |_, _| rng.random_range(-3.0..3.0));
        let y = DMatrix::from_fn(3, n, |_, _| rng.random_range(-3.0..3.0));
        let b = gaussian_type(&x, &y).unwrap();
        assert!(min_eigenvalue(b.matrix()) >= -1e-10);
    }
}

#[test]
fn correlation_matches_triple_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let x = DMatrix::from_fn(3, 50, |_, _| rng.random_range(-1.0..1.0));
    let y = DMatrix::from_fn(3, 50, |_, _| rng.random_range(-1.0..1.0));
    let r = empirical_correlation(&x, &y).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let mut s = 0.0;
            for k in 0..50 {
                s += x[(i, k)] * y[(j, k)];
            }
            assert!((r[(i, j)] - s / 50.0).abs() <= 1e-12);
        }
    }
}

fn three_node() -> GaussianNetwork {
    let gain = DMatrix::from_row_slice(3, 3, &[0.0, 0.3, -0.2, 0.8, 0.0, 0.5, 0.4, 0.6, 0.0]);
    let noise = DMatrix::from_row_slice(3, 3, &[1.0, 0.2, 0.0, 0.2, 0.8, 0.1, 0.0, 0.1, 0.6]);
    GaussianNetwork::new(gain, noise, vec![1.0, 2.0, 1.5]).unwrap()
}

/// Input sequence with autocorrelation exactly `K` and noise with exact
/// residual statistics: `x` and `z` built from orthonormal rows.
fn exact_pair(net: &GaussianNetwork, k: &DMatrix<f64>, n: usize, rng: &mut ChaCha8Rng) -> (DMatrix<f64>, DMatrix<f64>) {
    let nn = net.node_count();
    let raw = DMatrix::from_fn(n, 2 * nn, |_, _| rng.random_range(-1.0..1.0));
    let q = raw.qr().q();
    let rows = q.transpose() * (n as f64).sqrt();
    let u = rows.rows(0, nn).into_owned();
    let v = rows.rows(nn, nn).into_owned();
    let kx = k.clone().cholesky().unwrap().l();
    let ks = net.noise_cov().clone().cholesky().unwrap().l();
    let x = kx * u;
    let z = ks * v;
    let y = net.gain() * &x + z;
    (x, y)
}

#[test]
fn exact_pairs_are_typical_for_every_delta() {
    let net = three_node();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let k = DMatrix::from_row_slice(3, 3, &[0.8, 0.1, 0.0, 0.1, 1.5, 0.2, 0.0, 0.2, 1.0]);
    let (x, y) = exact_pair(&net, &k, 40, &mut rng);
    let b = gaussian_type(&x, &y).unwrap();
    for delta in [1e-9, 1e-3, 0.5] {
        assert!(typical_set_check(&b, delta, &net));
    }
    let noiseless = gaussian_type(&x, &(net.gain() * &x)).unwrap();
    assert!(!typical_set_check(&noiseless, 0.5, &net));
}

#[test]
fn direct_product_matches_entropy_on_exact_pairs() {
    let net = three_node();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let k = DMatrix::from_diagonal_element(3, 3, 0.7);
    let (x, y) = exact_pair(&net, &k, 60, &mut rng);
    for mask in 0..8u64 {
        let cut = Cut::new(mask, 3).unwrap();
        let tc = cut.complement_members();
        let s = cutset_core::linalg::submatrix(net.noise_cov(), &tc, &tc);
        let expected = if tc.is_empty() {
            0.0
        } else {
            0.5 * ((2.0 * std::f64::consts::PI * std::f64::consts::E).powi(tc.len() as i32) * s.determinant()).ln()
        };
        let direct = direct_product_exponent(&net, &cut, &x, &y);
        assert!((direct - expected).abs() <= 1e-9, "cut {mask}: {direct} vs {expected}");
        assert!(direct >= gaussian_product_prob_bound(&net, &cut, 0.01).exponent);
    }
}

#[test]
fn product_bound_holds_on_sampled_typical_pairs() {
    let net = three_node();
    let delta = 0.1;
    let variances: Vec<f64> = net.power().iter().map(|p| p / 2.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut checked = 0;
    let mut attempts = 0;
    while checked < 1000 {
        attempts += 1;
        assert!(attempts < 100_000, "too few typical samples");
        let (x, y) = sample_gaussian_pair(&net, &variances, 2000, &mut rng);
        let b = gaussian_type(&x, &y).unwrap();
        if !typical_set_check(&b, delta, &net) {
            continue;
        }
        for mask in 0..7u64 {
            let cut = Cut::new(mask, 3).unwrap();
            let direct = direct_product_exponent(&net, &cut, &x, &y);
            assert!(direct >= gaussian_product_prob_bound(&net, &cut, delta).exponent);
        }
        checked += 1;
    }
}

#[test]
fn typicality_propagates_to_outputs() {
    let net = three_node();
    let n = net.node_count() as f64;
    let delta = 0.1;
    let variances: Vec<f64> = net.power().iter().map(|p| p / 2.0).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    for _ in 0..3000 {
        let (x, y) = sample_gaussian_pair(&net, &variances, 500, &mut rng);
        let b = gaussian_type(&x, &y).unwrap();
        if !typical_set_check(&b, delta, &net) {
            continue;
        }
        let g = net.gain();
        let rx = b.xx();
        let yy_center = g * &rx * g.transpose() + net.noise_cov();
        assert!(in_gamma(&b.yy(), &yy_center, (2.0 * n * net.g_max() + 1.0) * delta).unwrap());
        assert!(in_gamma(&b.yx(), &(g * &rx), delta).unwrap());
        checked += 1;
    }
    assert!(checked > 100);
}

#[test]
fn typical_set_accepts_long_blocks() {
    let net = GaussianNetwork::scalar_link(1.0, 1.0, 1.0).unwrap();
    let r = typical_rejection_rate(&net, &[0.5, 0.5], 0.1, 10_000, 1000, 11);
    assert!(r.mean < 0.01, "rejection {}", r.mean);
}

#[test]
fn rejection_halves_with_doubled_blocklength() {
    let net = three_node();
    let variances: Vec<f64> = net.power().iter().map(|p| p / 2.0).collect();
    let rates: Vec<_> = [100usize, 200, 400]
        .iter()
        .map(|&n| typical_rejection_rate(&net, &variances, 0.25, n, 4000, 12 + n as u64))
        .collect();
    for w in rates.windows(2) {
        let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        assert!(w[1].mean <= w[0].mean + 3.0 * se);
    }
    assert!(rates[2].mean < rates[0].mean);
}

#[test]
fn matrix_bound_checks_hold_on_random_matrices() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..1000 {
        let d = rng.random_range(1..=5);
        let a = DMatrix::from_fn(d, d, |_, _| rng.random_range(-1.0..1.0));
        let k = &a * a.transpose() + DMatrix::identity(d, d) * rng.random_range(0.01..1.0);
        assert!(inverse_bound_check(&k).unwrap());
        let b = DMatrix::from_fn(d, rng.random_range(1..=4), |_, _| rng.random_range(-2.0..2.0));
        assert!(product_bound_check(&a, &b).unwrap());
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // f(lo) <= 0 < f(hi)
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if f(mid) <= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

#[test]
fn scalar_noise_tau_matches_independent_roots() {
    for (delta, var) in [(1.0, 1.0), (0.2, 1.0), (0.5, 2.5)] {
        // Chernoff exponent per unit t of +-(Z^2 - var) for Z ~ N(0, var)
        let upper = |t: f64| -0.5 * (1.0 - 2.0 * t * var).ln() / t - var - delta / 2.0;
        let lower = |t: f64| -0.5 * (1.0 + 2.0 * t * var).ln() / t + var - delta / 2.0;
        let t_up = bisect(upper, 1e-12, 0.5 / var * (1.0 - 1e-15));
        let t_low = if lower(1e12) <= 0.0 {
            1e12
        } else {
            bisect(lower, 1e-12, 1e12)
        };
        let expected = delta / 4.0 * t_up.min(t_low);
        let tau = noise_tail_tau(delta, &DMatrix::from_element(1, 1, var)).unwrap();
        assert!(
            (tau - expected).abs() <= 1e-9 * expected.max(1.0),
            "delta {delta}: {tau} vs {expected}"
        );
    }
}

#[test]
fn white_pair_cgf_has_closed_form() {
    let s = DMatrix::identity(2, 2);
    for t in [0.01, 0.3, 0.7, 0.99] {
        let closed = -0.5 * (1.0f64 - t * t).ln();
        assert!((pair_product_cgf(&s, 0, 1, t).unwrap() - closed).abs() <= 1e-12);
    }
    assert!(pair_product_cgf(&s, 0, 1, 1.0).is_none());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn tail_exponents_positive_and_monotone(a in 1e-3f64..2.0, b in 1e-3f64..2.0, c in -0.5f64..0.5) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let s = DMatrix::from_row_slice(2, 2, &[1.0, c, c, 1.5]);
        let t_lo = noise_tail_tau(lo, &s).unwrap();
        let t_hi = noise_tail_tau(hi, &s).unwrap();
        prop_assert!(t_lo > 0.0 && t_lo <= t_hi * (1.0 + 1e-9));
        let c_lo = cross_tail_tau(lo, &s, &[1.0, 2.0]);
        let c_hi = cross_tail_tau(hi, &s, &[1.0, 2.0]);
        prop_assert!(c_lo > 0.0 && c_lo <= c_hi);
    }
}

#[test]
fn scalar_gaussian_certificate() {
    let net = GaussianNetwork::scalar_link(1.0, 1.0, 1.0).unwrap();
    let rates = RateMatrix::single(2, 0, 1, 0.5).unwrap();
    let c = gaussian_certificate(&net, &rates, &OptimizerConfig::default()).unwrap();
    assert!(c.delta > 0.0 && c.eta > 0.0 && c.tau > 0.0);
    assert!(c.margin >= 2.0 * c.eta);
    assert!(c.n0.is_finite() && c.log_bound(c.n0) < 0.0);
    assert!(c.log_bound(10.0 * c.n0) < c.log_bound(c.n0));
}
