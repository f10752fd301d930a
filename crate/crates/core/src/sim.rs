//! Monte Carlo simulation of codes over discrete and Gaussian networks.
//!
//! Every trial draws its randomness from its own ChaCha8 stream
//! (`seed`, stream = trial index), so results do not depend on the number
//! of threads.

use std::fmt::Write as _;
use std::str::FromStr;
use std::time::Instant;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{DiscreteNetwork, GaussianNetwork, ModelError, Network, RateMatrix};
use crate::par::map_chunks;
use crate::region::OptimizerConfig;
use crate::types_discrete::{discrete_certificate, CertificateError};
use crate::types_gaussian::gaussian_certificate;

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959963984540054;

/// Largest `M |X|^n` a point-to-point block code may enumerate.
pub const ENUMERATION_CAP: f64 = 1e8;

const TRIAL_CHUNK: u64 = 1024;
const POWER_SLACK: f64 = 1e-9;
/// Stream reserved for codebook generation.
const CODEBOOK_STREAM: u64 = u64::MAX;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("code has {code} nodes but the network has {network}")]
    NodeMismatch { code: usize, network: usize },
    #[error("node {node} sent symbol {symbol} at time {time}, alphabet size is {alphabet}")]
    SymbolOutOfRange {
        node: usize,
        time: usize,
        symbol: usize,
        alphabet: usize,
    },
    #[error("node {node} used energy {energy} in trial {trial}, limit n*P = {limit}")]
    PowerViolation {
        node: usize,
        trial: u64,
        energy: f64,
        limit: f64,
    },
    #[error("enumeration cap exceeded: {0}")]
    EnumerationCap(String),
    #[error("blocklength condition violated: {0}")]
    Blocklength(String),
    #[error("unsupported configuration: {0}")]
    Unsupported(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// An `(n, M)` code for an `N`-node network with feedback.
///
/// Messages are indexed row-major: `W[i*N + j]` goes from node `i` to node
/// `j`. An encoder sees only its own messages and its own past channel
/// outputs: at time `k` the `past` slice holds exactly `k` outputs.
pub trait NetworkCode: Sync {
    type Symbol: Copy + Send + Sync;

    fn node_count(&self) -> usize;

    fn blocklength(&self) -> usize;

    /// Flattened `N x N` message set sizes.
    fn message_sizes(&self) -> &[u64];

    /// Symbol sent by `node` at time `k`; `own[j]` is `W[node][j]`.
    fn encode(&self, node: usize, k: usize, own: &[u64], past: &[Self::Symbol]) -> Self::Symbol;

    /// Estimates of `W[j][node]` for every `j`; entries for pairs with a
    /// single message are ignored.
    fn decode(&self, node: usize, own: &[u64], received: &[Self::Symbol]) -> Vec<u64>;
}

/// Trial and error counts of one simulated configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SimCounts {
    pub trials: u64,
    pub errors: u64,
}

/// Wilson score interval at level `z`, widened if needed to contain the
/// point estimate.
pub fn wilson_interval(errors: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let m = trials as f64;
    let p = errors as f64 / m;
    let z2 = z * z;
    let denom = 1.0 + z2 / m;
    let center = (p + z2 / (2.0 * m)) / denom;
    let half = z / denom * (p * (1.0 - p) / m + z2 / (4.0 * m * m)).sqrt();
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

/// One row of a simulation report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimRow {
    pub rate_id: usize,
    pub n: usize,
    pub trials: u64,
    pub errors: u64,
    pub eps_hat: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    /// Certificate bound on the correct-decoding probability, capped at 1.
    pub bound: Option<f64>,
    /// Natural log of the uncapped bound.
    pub log_bound: Option<f64>,
    pub seed: u64,
}

impl SimRow {
    pub fn new(rate_id: usize, n: usize, counts: SimCounts, seed: u64, log_bound: Option<f64>) -> Self {
        let eps_hat = if counts.trials == 0 {
            0.0
        } else {
            counts.errors as f64 / counts.trials as f64
        };
        let (ci_lo, ci_hi) = wilson_interval(counts.errors, counts.trials, Z95);
        SimRow {
            rate_id,
            n,
            trials: counts.trials,
            errors: counts.errors,
            eps_hat,
            ci_lo,
            ci_hi,
            bound: log_bound.map(|l| l.exp().min(1.0)),
            log_bound,
            seed,
        }
    }

    /// Binomial standard error of `eps_hat`.
    pub fn std_error(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        (self.eps_hat * (1.0 - self.eps_hat) / self.trials as f64).sqrt()
    }

    /// `1 - eps_hat <= bound + 3 SE`; true when there is no bound.
    pub fn respects_bound(&self) -> bool {
        self.bound
            .is_none_or(|b| 1.0 - self.eps_hat <= b + 3.0 * self.std_error())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimReport {
    pub rows: Vec<SimRow>,
    pub wall_time_s: f64,
}

impl SimReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("rate_id,n,trials,errors,eps_hat,ci_lo,ci_hi,bound\n");
        for r in &self.rows {
            let bound = r.bound.map(|b| format!("{b:.9e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{},{},{:.9e},{:.9e},{:.9e},{}",
                r.rate_id, r.n, r.trials, r.errors, r.eps_hat, r.ci_lo, r.ci_hi, bound
            );
        }
        s
    }
}

fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

fn draw_messages(sizes: &[u64], rng: &mut ChaCha8Rng) -> Vec<u64> {
    sizes
        .iter()
        .map(|&m| if m > 1 { rng.random_range(0..m) } else { 0 })
        .collect()
}

fn decoding_failed<C: NetworkCode>(code: &C, w: &[u64], received: &[Vec<C::Symbol>]) -> bool {
    let nn = code.node_count();
    let sizes = code.message_sizes();
    (0..nn).any(|node| {
        let est = code.decode(node, &w[node * nn..(node + 1) * nn], &received[node]);
        (0..nn).any(|j| sizes[j * nn + node] > 1 && est.get(j) != Some(&w[j * nn + node]))
    })
}

fn sum_counts(parts: Vec<Result<u64, SimError>>, trials: u64) -> Result<SimCounts, SimError> {
    let mut errors = 0;
    for p in parts {
        errors += p?;
    }
    Ok(SimCounts { trials, errors })
}

/// Simulates `code` over a discrete memoryless network.
pub fn run_dmn<C>(net: &DiscreteNetwork, code: &C, trials: u64, seed: u64) -> Result<SimCounts, SimError>
where
    C: NetworkCode<Symbol = usize>,
{
    let nn = net.node_count();
    if code.node_count() != nn {
        return Err(SimError::NodeMismatch {
            code: code.node_count(),
            network: nn,
        });
    }
    let cdf: Vec<Vec<f64>> = (0..net.input_count())
        .map(|x| {
            let mut acc = 0.0;
            net.row(x)
                .iter()
                .map(|p| {
                    acc += p;
                    acc
                })
                .collect()
        })
        .collect();
    let n = code.blocklength();
    let parts = map_chunks(trials, TRIAL_CHUNK, |a, b| -> Result<u64, SimError> {
        let mut errors = 0;
        let mut x = vec![0usize; nn];
        for trial in a..b {
            let mut rng = trial_rng(seed, trial);
            let w = draw_messages(code.message_sizes(), &mut rng);
            let mut received: Vec<Vec<usize>> = vec![Vec::with_capacity(n); nn];
            for k in 0..n {
                for (i, xi) in x.iter_mut().enumerate() {
                    *xi = code.encode(i, k, &w[i * nn..(i + 1) * nn], &received[i]);
                    if *xi >= net.input_sizes()[i] {
                        return Err(SimError::SymbolOutOfRange {
                            node: i,
                            time: k,
                            symbol: *xi,
                            alphabet: net.input_sizes()[i],
                        });
                    }
                }
                let row = &cdf[net.input_index(&x)];
                let u: f64 = rng.random();
                let y = row.partition_point(|&c| c <= u).min(row.len() - 1);
                for (i, yi) in net.output_digits(y).into_iter().enumerate() {
                    received[i].push(yi);
                }
            }
            if decoding_failed(code, &w, &received) {
                errors += 1;
            }
        }
        Ok(errors)
    });
    sum_counts(parts, trials)
}

/// Error rate of a code ensemble: the mean over codebooks of each
/// codebook's error rate, with a standard error from the spread between
/// codebooks.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct EnsembleEstimate {
    pub counts: SimCounts,
    pub codebooks: usize,
    pub eps_hat: f64,
    pub std_error: f64,
}

/// Runs `per_code` trials on each of `codebooks` codes; `run(c)` simulates
/// codebook `c`.
pub fn run_ensemble<F>(codebooks: usize, per_code: u64, run: F) -> Result<EnsembleEstimate, SimError>
where
    F: Fn(usize, u64) -> Result<SimCounts, SimError> + Sync + Send,
{
    let per: Vec<Result<SimCounts, SimError>> = crate::par::map_indexed(codebooks, |c| run(c, per_code));
    let mut rates = Vec::with_capacity(codebooks);
    let mut counts = SimCounts { trials: 0, errors: 0 };
    for r in per {
        let c = r?;
        counts.trials += c.trials;
        counts.errors += c.errors;
        if c.trials > 0 {
            rates.push(c.errors as f64 / c.trials as f64);
        }
    }
    let k = rates.len() as f64;
    let eps_hat = if k > 0.0 { rates.iter().sum::<f64>() / k } else { 0.0 };
    let var = if k > 1.0 {
        rates.iter().map(|r| (r - eps_hat).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    Ok(EnsembleEstimate {
        counts,
        codebooks,
        eps_hat,
        std_error: (var / k.max(1.0)).sqrt(),
    })
}

/// One simulated block over a Gaussian network: transmit matrix `x`
/// (`N x n`), received matrix `y` and messages.
pub struct GaussianTrial {
    pub x: DMatrix<f64>,
    pub y: DMatrix<f64>,
    pub messages: Vec<u64>,
}

fn noise_factor(net: &GaussianNetwork) -> DMatrix<f64> {
    net.noise_cov()
        .clone()
        .cholesky()
        .expect("noise covariance is positive definite")
        .l()
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
}

fn gaussian_block<C>(
    net: &GaussianNetwork,
    chol: &DMatrix<f64>,
    code: &C,
    rng: &mut ChaCha8Rng,
) -> (Vec<u64>, Vec<Vec<f64>>, Vec<Vec<f64>>)
where
    C: NetworkCode<Symbol = f64>,
{
    let nn = net.node_count();
    let n = code.blocklength();
    let w = draw_messages(code.message_sizes(), rng);
    let mut sent: Vec<Vec<f64>> = vec![Vec::with_capacity(n); nn];
    let mut received: Vec<Vec<f64>> = vec![Vec::with_capacity(n); nn];
    let mut x = vec![0.0; nn];
    let mut z = vec![0.0; nn];
    for k in 0..n {
        for (i, xi) in x.iter_mut().enumerate() {
            *xi = code.encode(i, k, &w[i * nn..(i + 1) * nn], &received[i]);
            sent[i].push(*xi);
        }
        for zi in z.iter_mut() {
            *zi = standard_normal(rng);
        }
        for i in 0..nn {
            let mut yi = 0.0;
            for j in 0..nn {
                yi += net.gain()[(i, j)] * x[j] + chol[(i, j)] * z[j];
            }
            received[i].push(yi);
        }
    }
    (w, sent, received)
}

fn check_power(net: &GaussianNetwork, sent: &[Vec<f64>], trial: u64) -> Result<(), SimError> {
    for (i, xs) in sent.iter().enumerate() {
        let energy: f64 = xs.iter().map(|v| v * v).sum();
        let limit = xs.len() as f64 * net.power()[i];
        if energy > limit * (1.0 + POWER_SLACK) {
            return Err(SimError::PowerViolation {
                node: i,
                trial,
                energy,
                limit,
            });
        }
    }
    Ok(())
}

/// Simulates `code` over a Gaussian network, checking the peak power
/// constraint on every transmitted block.
pub fn run_gaussian<C>(net: &GaussianNetwork, code: &C, trials: u64, seed: u64) -> Result<SimCounts, SimError>
where
    C: NetworkCode<Symbol = f64>,
{
    if code.node_count() != net.node_count() {
        return Err(SimError::NodeMismatch {
            code: code.node_count(),
            network: net.node_count(),
        });
    }
    let chol = noise_factor(net);
    let parts = map_chunks(trials, TRIAL_CHUNK, |a, b| -> Result<u64, SimError> {
        let mut errors = 0;
        for trial in a..b {
            let mut rng = trial_rng(seed, trial);
            let (w, sent, received) = gaussian_block(net, &chol, code, &mut rng);
            check_power(net, &sent, trial)?;
            if decoding_failed(code, &w, &received) {
                errors += 1;
            }
        }
        Ok(errors)
    });
    sum_counts(parts, trials)
}

/// Replays trial `trial` of `run_gaussian(net, code, _, seed)` and returns
/// its transmissions and outputs.
pub fn sample_gaussian_trial<C>(
    net: &GaussianNetwork,
    code: &C,
    seed: u64,
    trial: u64,
) -> Result<GaussianTrial, SimError>
where
    C: NetworkCode<Symbol = f64>,
{
    if code.node_count() != net.node_count() {
        return Err(SimError::NodeMismatch {
            code: code.node_count(),
            network: net.node_count(),
        });
    }
    let chol = noise_factor(net);
    let mut rng = trial_rng(seed, trial);
    let (messages, sent, received) = gaussian_block(net, &chol, code, &mut rng);
    let nn = net.node_count();
    let n = code.blocklength();
    Ok(GaussianTrial {
        x: DMatrix::from_fn(nn, n, |i, k| sent[i][k]),
        y: DMatrix::from_fn(nn, n, |i, k| received[i][k]),
        messages,
    })
}

/// `count` noise vectors drawn exactly as the simulator draws them, as an
/// `N x count` matrix.
pub fn sample_noise(net: &GaussianNetwork, count: usize, seed: u64) -> DMatrix<f64> {
    let chol = noise_factor(net);
    let mut rng = trial_rng(seed, 0);
    let nn = net.node_count();
    let mut w = DMatrix::zeros(nn, count);
    for k in 0..count {
        for i in 0..nn {
            w[(i, k)] = standard_normal(&mut rng);
        }
    }
    chol * w
}

/// The unique pair carrying more than one message, or `(0, 1)` when no
/// pair does.
fn single_pair(sizes: &[u64], nodes: usize) -> Result<(usize, usize, u64), SimError> {
    let active: Vec<usize> = (0..sizes.len()).filter(|&k| sizes[k] > 1).collect();
    match active.as_slice() {
        [] => Ok((0, 1.min(nodes - 1), 1)),
        [k] => Ok((k / nodes, k % nodes, sizes[*k])),
        _ => Err(SimError::Unsupported(
            "point-to-point codes need exactly one pair with positive rate".into(),
        )),
    }
}

fn pair_sizes(nodes: usize, from: usize, to: usize, messages: u64) -> Vec<u64> {
    let mut sizes = vec![1u64; nodes * nodes];
    sizes[from * nodes + to] = messages;
    sizes
}

/// How a point-to-point block codebook is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockCodeKind {
    /// i.i.d. uniform symbols.
    Random,
    /// Message `m` is the symbol `m` repeated `n` times.
    Repetition,
    /// Message `m` is written in base `|X|` over the block.
    Identity,
}

/// Block code from `from` to `to` on a discrete network; other nodes send
/// symbol 0. The decoder is exhaustive maximum likelihood with ties broken
/// toward the lowest message index.
#[derive(Debug, Clone)]
pub struct PtpBlockCode {
    nodes: usize,
    from: usize,
    to: usize,
    n: usize,
    sizes: Vec<u64>,
    /// `M x n` codebook, row-major.
    codebook: Vec<usize>,
    /// `ln q(y_to | x_from)` indexed `[x * |Y_to| + y]`.
    loglik: Vec<f64>,
    out_size: usize,
}

impl PtpBlockCode {
    pub fn new(
        net: &DiscreteNetwork,
        from: usize,
        to: usize,
        n: usize,
        messages: u64,
        kind: BlockCodeKind,
        seed: u64,
    ) -> Result<Self, SimError> {
        let nodes = net.node_count();
        if from >= nodes || to >= nodes || from == to {
            return Err(SimError::Unsupported(format!("pair ({from}, {to})")));
        }
        let alphabet = net.input_sizes()[from];
        let work = messages as f64 * (alphabet as f64).powi(n as i32);
        if work > ENUMERATION_CAP {
            return Err(SimError::EnumerationCap(format!(
                "{messages} messages x {alphabet}^{n} sequences exceeds {ENUMERATION_CAP:e}"
            )));
        }
        let m = messages as usize;
        let codebook: Vec<usize> = match kind {
            BlockCodeKind::Random => {
                let mut rng = trial_rng(seed, CODEBOOK_STREAM);
                (0..m * n).map(|_| rng.random_range(0..alphabet)).collect()
            }
            BlockCodeKind::Repetition => {
                if m > alphabet {
                    return Err(SimError::Unsupported(format!(
                        "repetition code with {m} messages over alphabet {alphabet}"
                    )));
                }
                (0..m).flat_map(|w| std::iter::repeat_n(w, n)).collect()
            }
            BlockCodeKind::Identity => {
                if (m as f64) > (alphabet as f64).powi(n as i32) {
                    return Err(SimError::Unsupported(format!(
                        "{m} messages do not fit in {alphabet}^{n} sequences"
                    )));
                }
                (0..m)
                    .flat_map(|w| {
                        let mut v = w;
                        (0..n).map(move |_| {
                            let d = v % alphabet;
                            v /= alphabet;
                            d
                        })
                    })
                    .collect()
            }
        };
        let out_size = net.output_sizes()[to];
        let mut prob = vec![0.0; alphabet * out_size];
        let mut x = vec![0usize; nodes];
        for xs in 0..alphabet {
            x[from] = xs;
            for (y, p) in net.row(net.input_index(&x)).iter().enumerate() {
                prob[xs * out_size + net.output_digits(y)[to]] += p;
            }
        }
        Ok(PtpBlockCode {
            nodes,
            from,
            to,
            n,
            sizes: pair_sizes(nodes, from, to, messages),
            codebook,
            loglik: prob.iter().map(|p| p.ln()).collect(),
            out_size,
        })
    }

    /// Code for the single positive-rate pair of `rates` at blocklength `n`.
    pub fn for_rates(
        net: &DiscreteNetwork,
        rates: &RateMatrix,
        n: usize,
        kind: BlockCodeKind,
        seed: u64,
    ) -> Result<Self, SimError> {
        let sizes = rates.message_sizes(n)?;
        let (from, to, m) = single_pair(&sizes, net.node_count())?;
        PtpBlockCode::new(net, from, to, n, m, kind, seed)
    }

    pub fn codeword(&self, w: usize) -> &[usize] {
        &self.codebook[w * self.n..(w + 1) * self.n]
    }
}

impl NetworkCode for PtpBlockCode {
    type Symbol = usize;

    fn node_count(&self) -> usize {
        self.nodes
    }

    fn blocklength(&self) -> usize {
        self.n
    }

    fn message_sizes(&self) -> &[u64] {
        &self.sizes
    }

    fn encode(&self, node: usize, k: usize, own: &[u64], _past: &[usize]) -> usize {
        if node == self.from {
            self.codebook[own[self.to] as usize * self.n + k]
        } else {
            0
        }
    }

    fn decode(&self, node: usize, _own: &[u64], received: &[usize]) -> Vec<u64> {
        let mut est = vec![0u64; self.nodes];
        if node != self.to {
            return est;
        }
        let m = self.sizes[self.from * self.nodes + self.to] as usize;
        let mut best = f64::NEG_INFINITY;
        for w in 0..m {
            let score: f64 = self
                .codeword(w)
                .iter()
                .zip(received)
                .map(|(&x, &y)| self.loglik[x * self.out_size + y])
                .sum();
            if score > best {
                best = score;
                est[self.from] = w as u64;
            }
        }
        est
    }
}

/// Three-node chain `0 -> 1 -> 2` of binary symmetric channels with
/// crossover `p`: `Y_1 = X_0 + N_1`, `Y_2 = X_1 + N_2` (mod 2). Node 0
/// hears nothing and node 2 has a single input symbol.
pub fn relay_chain_network(p: f64) -> Result<DiscreteNetwork, ModelError> {
    let bsc = [[1.0 - p, p], [p, 1.0 - p]];
    let mut channel = Vec::with_capacity(4 * 4);
    for x0 in 0..2 {
        for x1 in 0..2 {
            for y1 in 0..2 {
                for y2 in 0..2 {
                    channel.push(bsc[x0][y1] * bsc[x1][y2]);
                }
            }
        }
    }
    DiscreteNetwork::new(vec![2, 2, 1], vec![1, 2, 2], channel)
}

/// One bit from node 0 to node 2 over a relay chain. The source repeats
/// its bit; the relay forwards the majority of what it has heard so far
/// (0 before anything arrives); the sink takes a majority vote over its
/// outputs from time 1 on.
#[derive(Debug, Clone)]
pub struct RelayForwardCode {
    n: usize,
    sizes: Vec<u64>,
}

impl RelayForwardCode {
    pub fn new(n: usize, messages: u64) -> Result<Self, SimError> {
        if messages > 2 {
            return Err(SimError::Unsupported(format!(
                "relay code carries one bit, asked for {messages} messages"
            )));
        }
        if n < 2 {
            return Err(SimError::Unsupported("relay code needs n >= 2".into()));
        }
        Ok(RelayForwardCode {
            n,
            sizes: pair_sizes(3, 0, 2, messages),
        })
    }

    pub fn for_rates(rates: &RateMatrix, n: usize) -> Result<Self, SimError> {
        let sizes = rates.message_sizes(n)?;
        let (from, to, m) = single_pair(&sizes, 3)?;
        if m > 1 && (from, to) != (0, 2) {
            return Err(SimError::Unsupported(
                "relay code carries a message from node 0 to node 2".into(),
            ));
        }
        RelayForwardCode::new(n, m)
    }
}

fn majority(bits: &[usize]) -> usize {
    usize::from(2 * bits.iter().filter(|&&b| b == 1).count() > bits.len())
}

impl NetworkCode for RelayForwardCode {
    type Symbol = usize;

    fn node_count(&self) -> usize {
        3
    }

    fn blocklength(&self) -> usize {
        self.n
    }

    fn message_sizes(&self) -> &[u64] {
        &self.sizes
    }

    fn encode(&self, node: usize, _k: usize, own: &[u64], past: &[usize]) -> usize {
        match node {
            0 => own[2] as usize,
            1 => majority(past),
            _ => 0,
        }
    }

    fn decode(&self, node: usize, _own: &[u64], received: &[usize]) -> Vec<u64> {
        let mut est = vec![0u64; 3];
        if node == 2 {
            est[0] = majority(&received[1..]) as u64;
        }
        est
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GaussianCodeKind {
    /// `+sqrt(P)` for message 0 and `-sqrt(P)` for message 1 in every slot.
    Antipodal,
    /// Gaussian codewords rescaled to energy exactly `n P`.
    Spherical,
    /// Every node is silent.
    Zero,
}

/// Block code from `from` to `to` over a Gaussian network. The decoder at
/// `to` picks the codeword whose image `g c` is nearest to its outputs,
/// ties toward the lowest index.
#[derive(Debug, Clone)]
pub struct GaussianPtpCode {
    nodes: usize,
    from: usize,
    to: usize,
    n: usize,
    sizes: Vec<u64>,
    codebook: Vec<f64>,
    gain: f64,
}

impl GaussianPtpCode {
    pub fn new(
        net: &GaussianNetwork,
        from: usize,
        to: usize,
        n: usize,
        messages: u64,
        kind: GaussianCodeKind,
        seed: u64,
    ) -> Result<Self, SimError> {
        let nodes = net.node_count();
        if from >= nodes || to >= nodes || from == to {
            return Err(SimError::Unsupported(format!("pair ({from}, {to})")));
        }
        if messages as f64 * n as f64 > ENUMERATION_CAP {
            return Err(SimError::EnumerationCap(format!("{messages} codewords of length {n}")));
        }
        let m = messages as usize;
        let amp = net.power()[from].sqrt();
        let codebook = match kind {
            GaussianCodeKind::Antipodal => {
                if m > 2 {
                    return Err(SimError::Unsupported(format!("antipodal code with {m} messages")));
                }
                (0..m)
                    .flat_map(|w| std::iter::repeat_n(if w == 0 { amp } else { -amp }, n))
                    .collect()
            }
            GaussianCodeKind::Spherical => spherical_codebook(m, n, net.power()[from], seed),
            GaussianCodeKind::Zero => vec![0.0; m * n],
        };
        Ok(GaussianPtpCode {
            nodes,
            from,
            to,
            n,
            sizes: pair_sizes(nodes, from, to, messages),
            codebook,
            gain: net.gain()[(to, from)],
        })
    }

    pub fn for_rates(
        net: &GaussianNetwork,
        rates: &RateMatrix,
        n: usize,
        kind: GaussianCodeKind,
        seed: u64,
    ) -> Result<Self, SimError> {
        let sizes = rates.message_sizes(n)?;
        let (from, to, m) = single_pair(&sizes, net.node_count())?;
        GaussianPtpCode::new(net, from, to, n, m, kind, seed)
    }
}

/// `m` codewords of length `n`, each uniform on the sphere of radius
/// `sqrt(n P)`.
fn spherical_codebook(m: usize, n: usize, power: f64, seed: u64) -> Vec<f64> {
    let mut rng = trial_rng(seed, CODEBOOK_STREAM);
    let radius = (n as f64 * power).sqrt();
    let mut book = Vec::with_capacity(m * n);
    for _ in 0..m {
        let v: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        book.extend(v.iter().map(|a| a * radius / norm));
    }
    book
}

fn nearest_codeword(book: &[f64], n: usize, m: usize, gain: f64, y: &[f64]) -> u64 {
    let mut best = f64::INFINITY;
    let mut arg = 0;
    for w in 0..m {
        let d: f64 = book[w * n..(w + 1) * n]
            .iter()
            .zip(y)
            .map(|(c, v)| (v - gain * c).powi(2))
            .sum();
        if d < best {
            best = d;
            arg = w;
        }
    }
    arg as u64
}

impl NetworkCode for GaussianPtpCode {
    type Symbol = f64;

    fn node_count(&self) -> usize {
        self.nodes
    }

    fn blocklength(&self) -> usize {
        self.n
    }

    fn message_sizes(&self) -> &[u64] {
        &self.sizes
    }

    fn encode(&self, node: usize, k: usize, own: &[u64], _past: &[f64]) -> f64 {
        if node == self.from {
            self.codebook[own[self.to] as usize * self.n + k]
        } else {
            0.0
        }
    }

    fn decode(&self, node: usize, _own: &[u64], received: &[f64]) -> Vec<u64> {
        let mut est = vec![0u64; self.nodes];
        if node == self.to {
            let m = self.sizes[self.from * self.nodes + self.to] as usize;
            est[self.from] = nearest_codeword(&self.codebook, self.n, m, self.gain, received);
        }
        est
    }
}

/// Every node `i` sends a message to `(i+1) mod N` with its own spherical
/// codebook; decoders treat interference as noise.
#[derive(Debug, Clone)]
pub struct GaussianRandomInputCode {
    nodes: usize,
    n: usize,
    sizes: Vec<u64>,
    books: Vec<Vec<f64>>,
    gains: Vec<f64>,
}

impl GaussianRandomInputCode {
    pub fn new(net: &GaussianNetwork, n: usize, messages: u64, seed: u64) -> Result<Self, SimError> {
        let nodes = net.node_count();
        if nodes < 2 {
            return Err(SimError::Unsupported("need at least two nodes".into()));
        }
        if messages as f64 * n as f64 * nodes as f64 > ENUMERATION_CAP {
            return Err(SimError::EnumerationCap(format!(
                "{nodes} x {messages} codewords of length {n}"
            )));
        }
        let mut sizes = vec![1u64; nodes * nodes];
        let mut books = Vec::with_capacity(nodes);
        let mut gains = Vec::with_capacity(nodes);
        for i in 0..nodes {
            let to = (i + 1) % nodes;
            sizes[i * nodes + to] = messages;
            books.push(spherical_codebook(
                messages as usize,
                n,
                net.power()[i],
                seed.wrapping_add(i as u64),
            ));
            gains.push(net.gain()[(to, i)]);
        }
        Ok(GaussianRandomInputCode {
            nodes,
            n,
            sizes,
            books,
            gains,
        })
    }
}

impl NetworkCode for GaussianRandomInputCode {
    type Symbol = f64;

    fn node_count(&self) -> usize {
        self.nodes
    }

    fn blocklength(&self) -> usize {
        self.n
    }

    fn message_sizes(&self) -> &[u64] {
        &self.sizes
    }

    fn encode(&self, node: usize, k: usize, own: &[u64], _past: &[f64]) -> f64 {
        let to = (node + 1) % self.nodes;
        self.books[node][own[to] as usize * self.n + k]
    }

    fn decode(&self, node: usize, _own: &[u64], received: &[f64]) -> Vec<u64> {
        let from = (node + self.nodes - 1) % self.nodes;
        let m = self.sizes[from * self.nodes + node] as usize;
        let mut est = vec![0u64; self.nodes];
        est[from] = nearest_codeword(&self.books[from], self.n, m, self.gains[from], received);
        est
    }
}

/// A code of length `n_bar` followed by `N` redundant slots: in slot
/// `n_bar + N - 1 - i` node `i` alone sends `sqrt(delta (n_bar + N) P_min)`.
/// Decoders ignore the extra slots.
#[derive(Debug, Clone)]
pub struct RedundantSlotCode<C> {
    inner: C,
    delta: f64,
    amplitude: f64,
}

/// Appends the redundant slots to `code`. Fails when the code carries
/// messages but `delta (n_bar + N) < N`, i.e. the shortened rate would
/// fall below `(1 - delta) R`.
pub fn append_redundant_slots<C: NetworkCode<Symbol = f64>>(
    code: C,
    delta: f64,
    p_min: f64,
) -> Result<RedundantSlotCode<C>, SimError> {
    if !(delta > 0.0 && delta < 1.0) || !(p_min > 0.0) {
        return Err(SimError::Unsupported(format!("delta = {delta}, P_min = {p_min}")));
    }
    let nodes = code.node_count();
    let n = code.blocklength() + nodes;
    let carries = code.message_sizes().iter().any(|&m| m > 1);
    if carries && delta * (n as f64) < nodes as f64 {
        return Err(SimError::Blocklength(format!(
            "n_bar = {} is below N (1 - delta) / delta = {}",
            code.blocklength(),
            nodes as f64 * (1.0 - delta) / delta
        )));
    }
    Ok(RedundantSlotCode {
        amplitude: (delta * n as f64 * p_min).sqrt(),
        inner: code,
        delta,
    })
}

impl<C> RedundantSlotCode<C> {
    pub fn inner(&self) -> &C {
        &self.inner
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }
}

impl<C: NetworkCode<Symbol = f64>> NetworkCode for RedundantSlotCode<C> {
    type Symbol = f64;

    fn node_count(&self) -> usize {
        self.inner.node_count()
    }

    fn blocklength(&self) -> usize {
        self.inner.blocklength() + self.inner.node_count()
    }

    fn message_sizes(&self) -> &[u64] {
        self.inner.message_sizes()
    }

    fn encode(&self, node: usize, k: usize, own: &[u64], past: &[f64]) -> f64 {
        let n_bar = self.inner.blocklength();
        if k < n_bar {
            self.inner.encode(node, k, own, past)
        } else if node == self.blocklength() - 1 - k {
            self.amplitude
        } else {
            0.0
        }
    }

    fn decode(&self, node: usize, own: &[u64], received: &[f64]) -> Vec<u64> {
        let n_bar = self.inner.blocklength();
        self.inner.decode(node, own, &received[..n_bar.min(received.len())])
    }
}

/// Code family used by [`phase_transition_sweep`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodeFamily {
    Random,
    Repetition,
    Identity,
    Relay,
    Antipodal,
    Spherical,
    Zero,
}

impl CodeFamily {
    pub const ALL: [CodeFamily; 7] = [
        CodeFamily::Random,
        CodeFamily::Repetition,
        CodeFamily::Identity,
        CodeFamily::Relay,
        CodeFamily::Antipodal,
        CodeFamily::Spherical,
        CodeFamily::Zero,
    ];

    pub fn name(self) -> &'static str {
        match self {
            CodeFamily::Random => "random",
            CodeFamily::Repetition => "repetition",
            CodeFamily::Identity => "identity",
            CodeFamily::Relay => "relay",
            CodeFamily::Antipodal => "antipodal",
            CodeFamily::Spherical => "spherical",
            CodeFamily::Zero => "zero",
        }
    }

    pub fn is_gaussian(self) -> bool {
        matches!(self, CodeFamily::Antipodal | CodeFamily::Spherical | CodeFamily::Zero)
    }
}

impl FromStr for CodeFamily {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        CodeFamily::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| SimError::Unsupported(format!("unknown code family '{s}'")))
    }
}

/// Seed of the row for rate `rate_id` at blocklength `n`.
pub fn row_seed(seed: u64, rate_id: usize, n: usize) -> u64 {
    seed.wrapping_add(1_000_003u64.wrapping_mul(rate_id as u64))
        .wrapping_add(n as u64)
}

/// Simulates one `(rates, n)` configuration of `family`. The codebook and
/// the trials share the row seed on disjoint streams.
pub fn simulate_family(
    net: &Network,
    rates: &RateMatrix,
    n: usize,
    family: CodeFamily,
    trials: u64,
    seed: u64,
) -> Result<SimCounts, SimError> {
    match (net, family) {
        (Network::Discrete(d), CodeFamily::Relay) => {
            if d.node_count() != 3 {
                return Err(SimError::Unsupported("relay family needs a 3-node network".into()));
            }
            run_dmn(d, &RelayForwardCode::for_rates(rates, n)?, trials, seed)
        }
        (Network::Discrete(d), f) if !f.is_gaussian() => {
            let kind = match f {
                CodeFamily::Random => BlockCodeKind::Random,
                CodeFamily::Repetition => BlockCodeKind::Repetition,
                _ => BlockCodeKind::Identity,
            };
            run_dmn(d, &PtpBlockCode::for_rates(d, rates, n, kind, seed)?, trials, seed)
        }
        (Network::Gaussian(g), f) if f.is_gaussian() => {
            let kind = match f {
                CodeFamily::Antipodal => GaussianCodeKind::Antipodal,
                CodeFamily::Spherical => GaussianCodeKind::Spherical,
                _ => GaussianCodeKind::Zero,
            };
            run_gaussian(g, &GaussianPtpCode::for_rates(g, rates, n, kind, seed)?, trials, seed)
        }
        (_, f) => Err(SimError::Unsupported(format!(
            "code family '{}' does not match the network kind",
            f.name()
        ))),
    }
}

/// Certificate overlay for one rate matrix.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Overlay {
    Discrete(crate::types_discrete::DiscreteCertificate),
    Gaussian(crate::types_gaussian::GaussianCertificate),
}

impl Overlay {
    /// Log bound on the correct-decoding probability of a length-`n`
    /// code. Gaussian codes are charged at `n + N`, the length after the
    /// redundant slots.
    pub fn log_bound(&self, n: usize) -> f64 {
        match self {
            Overlay::Discrete(c) => c.log_bound(n as u64),
            Overlay::Gaussian(c) => c.log_bound((n + c.node_count) as f64),
        }
    }
}

/// Certificate for `rates`, `None` when inside the region or uncertified.
pub fn certificate_overlay(
    net: &Network,
    rates: &RateMatrix,
    cfg: &OptimizerConfig,
) -> Result<Option<Overlay>, CertificateError> {
    let result = match net {
        Network::Discrete(d) => discrete_certificate(d, rates, cfg).map(Overlay::Discrete),
        Network::Gaussian(g) => gaussian_certificate(g, rates, cfg).map(Overlay::Gaussian),
    };
    match result {
        Ok(c) => Ok(Some(c)),
        Err(CertificateError::Inside { .. } | CertificateError::Uncertified { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub report: SimReport,
    pub certificates: Vec<Option<Overlay>>,
}

#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Certificate(#[from] CertificateError),
}

/// Runs `family` on every `(rate, n)` pair and overlays certificate bounds
/// for rates outside the cut-set region. Zero trials give an empty report.
pub fn phase_transition_sweep(
    net: &Network,
    rates: &[RateMatrix],
    ns: &[usize],
    family: CodeFamily,
    trials: u64,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<SweepReport, SweepError> {
    let start = Instant::now();
    let certificates = rates
        .iter()
        .map(|r| certificate_overlay(net, r, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let mut rows = Vec::new();
    if trials > 0 {
        for (rate_id, (r, cert)) in rates.iter().zip(&certificates).enumerate() {
            for &n in ns {
                let s = row_seed(seed, rate_id, n);
                let counts = simulate_family(net, r, n, family, trials, s)?;
                rows.push(SimRow::new(
                    rate_id,
                    n,
                    counts,
                    s,
                    cert.as_ref().map(|c| c.log_bound(n)),
                ));
            }
        }
    }
    Ok(SweepReport {
        report: SimReport {
            rows,
            wall_time_s: start.elapsed().as_secs_f64(),
        },
        certificates,
    })
}
