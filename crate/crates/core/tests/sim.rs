mod common;

use cutset_core::sim::{
    phase_transition_sweep, relay_chain_network, run_dmn, run_ensemble, run_gaussian, sample_noise, wilson_interval,
    BlockCodeKind, CodeFamily, GaussianCodeKind, GaussianPtpCode, NetworkCode, PtpBlockCode, RelayForwardCode,
    SimError,
};
use cutset_core::{DiscreteNetwork, GaussianNetwork, Network, OptimizerConfig, RateMatrix};
use nalgebra::DMatrix;
use statrs::distribution::{Binomial, ContinuousCDF, DiscreteCDF, Normal};

use common::network;

/// Wilson interval wide enough that a correct simulator essentially never
/// falls outside it.
fn wide(errors: u64, trials: u64) -> (f64, f64) {
    wilson_interval(errors, trials, 4.0)
}

/// Runs `inner` on a fixed permutation of time. Without feedback the
/// error probability over a memoryless channel cannot change.
struct TimePermuted<C> {
    inner: C,
    perm: Vec<usize>,
}

impl<C: NetworkCode<Symbol = usize>> NetworkCode for TimePermuted<C> {
    type Symbol = usize;

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn blocklength(&self) -> usize {
        self.inner.blocklength()
    }

    fn message_sizes(&self) -> &[u64] {
        self.inner.message_sizes()
    }

    fn encode(&self, node: usize, k: usize, own: &[u64], _past: &[usize]) -> usize {
        self.inner.encode(node, self.perm[k], own, &[])
    }

    fn decode(&self, node: usize, own: &[u64], received: &[usize]) -> Vec<u64> {
        let mut orig = vec![0; received.len()];
        for (k, &y) in received.iter().enumerate() {
            orig[self.perm[k]] = y;
        }
        self.inner.decode(node, own, &orig)
    }
}

/// Wraps a code and asserts that encoders only ever see strictly past
/// outputs.
struct Causal<C>(C);

impl<C: NetworkCode> NetworkCode for Causal<C> {
    type Symbol = C::Symbol;

    fn node_count(&self) -> usize {
        self.0.node_count()
    }

    fn blocklength(&self) -> usize {
        self.0.blocklength()
    }

    fn message_sizes(&self) -> &[u64] {
        self.0.message_sizes()
    }

    fn encode(&self, node: usize, k: usize, own: &[u64], past: &[C::Symbol]) -> C::Symbol {
        assert_eq!(past.len(), k, "node {node} saw {} outputs at time {k}", past.len());
        self.0.encode(node, k, own, past)
    }

    fn decode(&self, node: usize, own: &[u64], received: &[C::Symbol]) -> Vec<u64> {
        assert_eq!(received.len(), self.0.blocklength());
        self.0.decode(node, own, received)
    }
}

#[test]
fn runs_are_reproducible() {
    let net = DiscreteNetwork::bsc(0.2).unwrap();
    let code = PtpBlockCode::new(&net, 0, 1, 10, 6, BlockCodeKind::Random, 3).unwrap();
    let a = run_dmn(&net, &code, 5000, 42).unwrap();
    assert_eq!(a, run_dmn(&net, &code, 5000, 42).unwrap());
    let g = GaussianNetwork::scalar_link(1.0, 1.0, 1.0).unwrap();
    let gc = GaussianPtpCode::new(&g, 0, 1, 6, 4, GaussianCodeKind::Spherical, 3).unwrap();
    assert_eq!(
        run_gaussian(&g, &gc, 5000, 9).unwrap(),
        run_gaussian(&g, &gc, 5000, 9).unwrap()
    );
}

#[test]
fn time_permutation_leaves_error_rate_unchanged() {
    let net = DiscreteNetwork::bsc(0.15).unwrap();
    let code = PtpBlockCode::new(&net, 0, 1, 9, 8, BlockCodeKind::Random, 11).unwrap();
    let base = run_dmn(&net, &code, 200_000, 1).unwrap();
    let permuted = TimePermuted {
        inner: code.clone(),
        perm: vec![4, 7, 0, 2, 8, 1, 6, 3, 5],
    };
    let other = run_dmn(&net, &permuted, 200_000, 2).unwrap();
    let (p, q) = (base.errors as f64 / 2e5, other.errors as f64 / 2e5);
    let se = (p * (1.0 - p) / 2e5 + q * (1.0 - q) / 2e5).sqrt();
    assert!((p - q).abs() <= 4.0 * se, "{p} vs {q}");
}

#[test]
fn noise_has_configured_covariance() {
    let s = DMatrix::from_row_slice(3, 3, &[1.0, 0.4, -0.2, 0.4, 2.0, 0.3, -0.2, 0.3, 0.5]);
    let net = GaussianNetwork::new(DMatrix::zeros(3, 3), s.clone(), vec![1.0; 3]).unwrap();
    let count = 1_000_000;
    let z = sample_noise(&net, count, 7);
    let emp = &z * z.transpose() / count as f64;
    for i in 0..3 {
        for j in 0..3 {
            let tol = 0.01 * (s[(i, i)] * s[(j, j)]).sqrt();
            assert!(
                (emp[(i, j)] - s[(i, j)]).abs() <= tol,
                "({i},{j}): {} vs {}",
                emp[(i, j)],
                s[(i, j)]
            );
        }
    }
}

#[test]
fn repetition_code_matches_binomial_tail() {
    let net = DiscreteNetwork::bsc(0.1).unwrap();
    let code = PtpBlockCode::new(&net, 0, 1, 5, 2, BlockCodeKind::Repetition, 0).unwrap();
    let exact = Binomial::new(0.1, 5).unwrap().sf(2);
    assert!((exact - 0.00856).abs() < 1e-12);
    let c = run_dmn(&net, &code, 1_000_000, 5).unwrap();
    let (lo, hi) = wide(c.errors, c.trials);
    assert!(lo <= exact && exact <= hi, "{} not near {exact}", c.errors as f64 / 1e6);
}

#[test]
fn antipodal_code_matches_gaussian_tail() {
    let net = GaussianNetwork::scalar_link(1.0, 1.0, 1.0).unwrap();
    let code = GaussianPtpCode::new(&net, 0, 1, 1, 2, GaussianCodeKind::Antipodal, 0).unwrap();
    let exact = Normal::new(0.0, 1.0).unwrap().sf(1.0);
    assert!((exact - 0.158655).abs() < 1e-6);
    let c = run_gaussian(&net, &code, 1_000_000, 6).unwrap();
    let (lo, hi) = wide(c.errors, c.trials);
    assert!(lo <= exact && exact <= hi, "{} not near {exact}", c.errors as f64 / 1e6);
}

#[test]
fn silent_code_guesses() {
    let net = GaussianNetwork::scalar_link(1.0, 1.0, 1.0).unwrap();
    let code = GaussianPtpCode::new(&net, 0, 1, 4, 2, GaussianCodeKind::Zero, 0).unwrap();
    let c = run_gaussian(&net, &code, 100_000, 8).unwrap();
    let (lo, hi) = wide(c.errors, c.trials);
    assert!(lo <= 0.5 && 0.5 <= hi);
}

#[test]
fn useless_channel_errs_at_guessing_rate() {
    // outputs of node 1 ignore the input of node 0
    let row = [0.2, 0.5, 0.3];
    let net = DiscreteNetwork::new(vec![4, 1], vec![1, 3], [row; 4].concat()).unwrap();
    for m in [2u64, 3, 4] {
        let code = PtpBlockCode::new(&net, 0, 1, 1, m, BlockCodeKind::Identity, 0).unwrap();
        let c = run_dmn(&net, &code, 100_000, m).unwrap();
        let expected = (m - 1) as f64 / m as f64;
        let (lo, hi) = wide(c.errors, c.trials);
        assert!(lo <= expected && expected <= hi, "m {m}");
    }
}

#[test]
fn encoders_see_only_the_past() {
    let relay = relay_chain_network(0.1).unwrap();
    let code = Causal(RelayForwardCode::new(7, 2).unwrap());
    run_dmn(&relay, &code, 2000, 1).unwrap();
    let g = GaussianNetwork::scalar_link(1.0, 1.0, 1.0).unwrap();
    let gc = Causal(GaussianPtpCode::new(&g, 0, 1, 5, 3, GaussianCodeKind::Spherical, 1).unwrap());
    run_gaussian(&g, &gc, 2000, 1).unwrap();
}

/// Sends `scale` times the allowed amplitude in every slot.
struct Loud {
    sizes: Vec<u64>,
    scale: f64,
}

impl NetworkCode for Loud {
    type Symbol = f64;

    fn node_count(&self) -> usize {
        2
    }

    fn blocklength(&self) -> usize {
        3
    }

    fn message_sizes(&self) -> &[u64] {
        &self.sizes
    }

    fn encode(&self, _node: usize, _k: usize, _own: &[u64], _past: &[f64]) -> f64 {
        self.scale
    }

    fn decode(&self, _node: usize, _own: &[u64], _received: &[f64]) -> Vec<u64> {
        vec![0, 0]
    }
}

#[test]
fn power_constraint_is_enforced() {
    let net = GaussianNetwork::scalar_link(1.0, 1.0, 1.0).unwrap();
    let ok = Loud {
        sizes: vec![1; 4],
        scale: 1.0,
    };
    assert_eq!(run_gaussian(&net, &ok, 100, 0).unwrap().errors, 0);
    let loud = Loud {
        sizes: vec![1; 4],
        scale: 1.01,
    };
    assert!(matches!(
        run_gaussian(&net, &loud, 100, 0),
        Err(SimError::PowerViolation { .. })
    ));
}

#[test]
fn mismatched_codes_are_rejected() {
    let net = network(vec![2, 2, 2], vec![2, 2, 2], &[0.5]);
    let code = PtpBlockCode::new(
        &DiscreteNetwork::bsc(0.1).unwrap(),
        0,
        1,
        3,
        2,
        BlockCodeKind::Random,
        0,
    )
    .unwrap();
    assert!(matches!(
        run_dmn(&net, &code, 10, 0),
        Err(SimError::NodeMismatch { code: 2, network: 3 })
    ));
}

#[test]
fn sweep_edge_cases() {
    let net = Network::Discrete(DiscreteNetwork::bsc(0.1).unwrap());
    let rates = vec![RateMatrix::single(2, 0, 1, 0.6).unwrap()];
    let cfg = OptimizerConfig::default();
    let empty = phase_transition_sweep(&net, &rates, &[], CodeFamily::Random, 100, 0, &cfg).unwrap();
    assert!(empty.report.rows.is_empty());
    assert_eq!(empty.certificates.len(), 1);
    let none = phase_transition_sweep(&net, &rates, &[4, 8], CodeFamily::Random, 0, 0, &cfg).unwrap();
    assert!(none.report.rows.is_empty());
    assert_eq!(none.report.to_csv().lines().count(), 1);
    let wrong = phase_transition_sweep(&net, &rates, &[4], CodeFamily::Antipodal, 10, 0, &cfg);
    assert!(wrong.is_err());
}

#[test]
fn sweep_rows_respect_certificates() {
    let net = Network::Discrete(DiscreteNetwork::bsc(0.1).unwrap());
    let rates = vec![
        RateMatrix::single(2, 0, 1, 0.2).unwrap(),
        RateMatrix::single(2, 0, 1, 0.6).unwrap(),
    ];
    let cfg = OptimizerConfig::default();
    let s = phase_transition_sweep(&net, &rates, &[4, 8, 12], CodeFamily::Random, 5000, 3, &cfg).unwrap();
    assert!(s.certificates[0].is_none());
    assert!(s.certificates[1].is_some());
    assert_eq!(s.report.rows.len(), 6);
    for row in &s.report.rows {
        assert_eq!(row.bound.is_some(), row.rate_id == 1);
        assert!(row.bound.is_none_or(|b| b <= 1.0));
        assert!(row.respects_bound(), "{row:?}");
        assert!(row.ci_lo <= row.eps_hat && row.eps_hat <= row.ci_hi);
    }
    let capped = phase_transition_sweep(&net, &rates[1..], &[16], CodeFamily::Random, 10, 3, &cfg);
    assert!(capped.unwrap_err().to_string().starts_with("enumeration cap exceeded"));
}

#[test]
fn inside_rate_error_falls_with_blocklength() {
    let net = DiscreteNetwork::bsc(0.1).unwrap();
    let rates = RateMatrix::single(2, 0, 1, 0.1).unwrap();
    let eps: Vec<_> = [8usize, 14, 20]
        .iter()
        .map(|&n| {
            run_ensemble(300, 300, |c, trials| {
                let code = PtpBlockCode::for_rates(&net, &rates, n, BlockCodeKind::Random, 1000 * n as u64 + c as u64)?;
                run_dmn(&net, &code, trials, c as u64)
            })
            .unwrap()
        })
        .collect();
    for w in eps.windows(2) {
        let se = (w[0].std_error.powi(2) + w[1].std_error.powi(2)).sqrt();
        assert!(
            w[1].eps_hat <= w[0].eps_hat + 3.0 * se,
            "{} then {}",
            w[0].eps_hat,
            w[1].eps_hat
        );
    }
    assert!(eps[2].eps_hat < eps[0].eps_hat);
}
