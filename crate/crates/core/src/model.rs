//! Network, rate, cut and channel types, plus ingestion of network
//! documents.
//!
//! Nodes are indexed `0..N` internally. Joint symbols over several nodes are
//! flattened in row-major mixed radix with node 0 as the most significant
//! digit. Channel tensors of discrete networks are stored as
//! `channel[x_index * |Y_I| + y_index]`.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Upper limit on the number of entries of a dense channel tensor.
pub const MAX_TENSOR_ENTRIES: usize = 10_000_000;

/// Largest node count for which all `2^N` cuts are enumerated.
pub const MAX_NODES: usize = 20;

const NORMALIZATION_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("malformed document at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("channel slice for input index {input} sums to {sum} instead of 1")]
    NotNormalized { input: usize, sum: f64 },
    #[error("channel entry {index} is negative or not finite ({value})")]
    InvalidProbability { index: usize, value: f64 },
    #[error("noise covariance not positive definite (smallest eigenvalue {min_eigenvalue})")]
    NotPositiveDefinite { min_eigenvalue: f64 },
    #[error("noise covariance not symmetric")]
    NotSymmetric,
    #[error("power of node {node} must be positive and finite, got {value}")]
    NonPositivePower { node: usize, value: f64 },
    #[error("channel tensor would hold {entries} entries (limit {MAX_TENSOR_ENTRIES})")]
    TooLarge { entries: usize },
    #[error("invalid rate matrix: {0}")]
    InvalidRates(String),
    #[error("message set for pair ({from}, {to}) does not fit in 64 bits at blocklength {n}")]
    MessageOverflow { from: usize, to: usize, n: usize },
}

impl From<serde_json::Error> for ModelError {
    fn from(e: serde_json::Error) -> Self {
        ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        }
    }
}

/// Flattens a tuple of digits in row-major mixed radix.
pub fn mixed_radix_index(digits: &[usize], sizes: &[usize]) -> usize {
    digits.iter().zip(sizes).fold(0usize, |acc, (&d, &s)| acc * s + d)
}

/// Inverse of [`mixed_radix_index`].
pub fn mixed_radix_digits(mut index: usize, sizes: &[usize]) -> Vec<usize> {
    let mut digits = vec![0; sizes.len()];
    for (d, &s) in digits.iter_mut().zip(sizes).rev() {
        *d = index % s;
        index /= s;
    }
    digits
}

/// A subset `T` of the nodes, the source side of a cut.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cut {
    mask: u64,
    nodes: usize,
}

impl Cut {
    pub fn new(mask: u64, nodes: usize) -> Result<Self, ModelError> {
        if nodes == 0 || nodes > MAX_NODES {
            return Err(ModelError::Schema(format!(
                "node count {nodes} outside 1..={MAX_NODES}"
            )));
        }
        if mask >> nodes != 0 {
            return Err(ModelError::Schema(format!(
                "cut mask {mask:#b} references nodes beyond {nodes}"
            )));
        }
        Ok(Cut { mask, nodes })
    }

    pub fn from_members(members: &[usize], nodes: usize) -> Result<Self, ModelError> {
        let mut mask = 0u64;
        for &m in members {
            if m >= nodes {
                return Err(ModelError::Schema(format!("node {m} out of range")));
            }
            mask |= 1 << m;
        }
        Cut::new(mask, nodes)
    }

    /// All `2^N` cuts in binary-counter order (empty set first).
    pub fn all(nodes: usize) -> impl Iterator<Item = Cut> {
        assert!((1..=MAX_NODES).contains(&nodes), "node count out of range");
        (0..(1u64 << nodes)).map(move |mask| Cut { mask, nodes })
    }

    pub fn mask(&self) -> u64 {
        self.mask
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn contains(&self, node: usize) -> bool {
        self.mask >> node & 1 == 1
    }

    pub fn members(&self) -> Vec<usize> {
        (0..self.nodes).filter(|&i| self.contains(i)).collect()
    }

    pub fn complement_members(&self) -> Vec<usize> {
        (0..self.nodes).filter(|&i| !self.contains(i)).collect()
    }

    pub fn complement(&self) -> Cut {
        let full = (1u64 << self.nodes) - 1;
        Cut {
            mask: !self.mask & full,
            nodes: self.nodes,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.mask == 0
    }

    pub fn is_full(&self) -> bool {
        self.mask == (1u64 << self.nodes) - 1
    }

    /// Whether both sides of the cut are nonempty.
    pub fn is_proper(&self) -> bool {
        !self.is_empty() && !self.is_full()
    }
}

/// Nonnegative `N x N` rate matrix in nats per channel use, zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateMatrix {
    nodes: usize,
    rates: Vec<f64>,
}

impl RateMatrix {
    pub fn new(nodes: usize, rates: Vec<f64>) -> Result<Self, ModelError> {
        if nodes == 0 || rates.len() != nodes * nodes {
            return Err(ModelError::InvalidRates(format!(
                "expected {} entries for {nodes} nodes, got {}",
                nodes * nodes,
                rates.len()
            )));
        }
        for (k, &r) in rates.iter().enumerate() {
            if !r.is_finite() || r < 0.0 {
                return Err(ModelError::InvalidRates(format!(
                    "entry {k} is {r}; rates must be finite and nonnegative"
                )));
            }
            if k / nodes == k % nodes && r != 0.0 {
                return Err(ModelError::InvalidRates(format!(
                    "diagonal entry ({0}, {0}) must be 0",
                    k / nodes
                )));
            }
        }
        Ok(RateMatrix { nodes, rates })
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn zeros(nodes: usize) -> Self {
        RateMatrix {
            nodes,
            rates: vec![0.0; nodes * nodes],
        }
    }

    /// Rate matrix with a single nonzero entry `R[from][to]`.
    pub fn single(nodes: usize, from: usize, to: usize, rate: f64) -> Result<Self, ModelError> {
        let mut rates = vec![0.0; nodes * nodes];
        if from >= nodes || to >= nodes {
            return Err(ModelError::InvalidRates("pair out of range".into()));
        }
        rates[from * nodes + to] = rate;
        RateMatrix::new(nodes, rates)
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn get(&self, from: usize, to: usize) -> f64 {
        self.rates[from * self.nodes + to]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.rates
    }

    /// Sum of `R[i][j]` over `(i, j)` in `T x T^c`.
    pub fn cut_sum(&self, cut: &Cut) -> f64 {
        let mut s = 0.0;
        for i in cut.members() {
            for j in cut.complement_members() {
                s += self.get(i, j);
            }
        }
        s
    }

    pub fn scaled(&self, factor: f64) -> RateMatrix {
        RateMatrix {
            nodes: self.nodes,
            rates: self.rates.iter().map(|r| r * factor).collect(),
        }
    }

    /// Entrywise `self <= other`.
    pub fn dominated_by(&self, other: &RateMatrix) -> bool {
        self.rates.iter().zip(&other.rates).all(|(a, b)| a <= b)
    }

    /// Message set sizes `ceil(exp(n R[i][j]))`, flattened row-major.
    ///
    /// A relative slack of 1e-12 absorbs rounding in `exp` so that, e.g.,
    /// `R = ln 2` at `n = 1` gives 2 rather than 3.
    pub fn message_sizes(&self, n: usize) -> Result<Vec<u64>, ModelError> {
        self.rates
            .iter()
            .enumerate()
            .map(|(k, &r)| {
                let v = (n as f64 * r).exp();
                let c = (v * (1.0 - 1e-12)).ceil().max(1.0);
                if !c.is_finite() || c >= u64::MAX as f64 {
                    Err(ModelError::MessageOverflow {
                        from: k / self.nodes,
                        to: k % self.nodes,
                        n,
                    })
                } else {
                    Ok(c as u64)
                }
            })
            .collect()
    }
}

/// Finite-alphabet network with a joint transition law `q(y_I | x_I)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteNetwork {
    input_sizes: Vec<usize>,
    output_sizes: Vec<usize>,
    channel: Vec<f64>,
}

impl DiscreteNetwork {
    pub fn new(input_sizes: Vec<usize>, output_sizes: Vec<usize>, channel: Vec<f64>) -> Result<Self, ModelError> {
        let nodes = input_sizes.len();
        if nodes == 0 || nodes > MAX_NODES {
            return Err(ModelError::Schema(format!(
                "node count {nodes} outside 1..={MAX_NODES}"
            )));
        }
        if output_sizes.len() != nodes {
            return Err(ModelError::Schema(format!(
                "{} output alphabets for {nodes} nodes",
                output_sizes.len()
            )));
        }
        if input_sizes.iter().chain(&output_sizes).any(|&s| s == 0) {
            return Err(ModelError::Schema("alphabet sizes must be >= 1".into()));
        }
        let x_count = checked_product(&input_sizes)?;
        let y_count = checked_product(&output_sizes)?;
        let entries = x_count
            .checked_mul(y_count)
            .filter(|&e| e <= MAX_TENSOR_ENTRIES)
            .ok_or(ModelError::TooLarge {
                entries: x_count.saturating_mul(y_count),
            })?;
        if channel.len() != entries {
            return Err(ModelError::Schema(format!(
                "channel has {} entries, expected {entries}",
                channel.len()
            )));
        }
        if let Some((index, &value)) = channel.iter().enumerate().find(|(_, &v)| !v.is_finite() || v < 0.0) {
            return Err(ModelError::InvalidProbability { index, value });
        }
        for (input, row) in channel.chunks(y_count).enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > NORMALIZATION_TOL {
                return Err(ModelError::NotNormalized { input, sum });
            }
        }
        Ok(DiscreteNetwork {
            input_sizes,
            output_sizes,
            channel,
        })
    }

    /// Two-node point-to-point network: node 0 transmits over `q(y|x)` to
    /// node 1. Node 0 hears nothing and node 1 has a single input symbol.
    pub fn point_to_point(input_size: usize, output_size: usize, rows: &[f64]) -> Result<Self, ModelError> {
        DiscreteNetwork::new(vec![input_size, 1], vec![1, output_size], rows.to_vec())
    }

    /// Binary symmetric channel with crossover `p` as a two-node network.
    pub fn bsc(p: f64) -> Result<Self, ModelError> {
        DiscreteNetwork::point_to_point(2, 2, &[1.0 - p, p, p, 1.0 - p])
    }

    pub fn node_count(&self) -> usize {
        self.input_sizes.len()
    }

    pub fn input_sizes(&self) -> &[usize] {
        &self.input_sizes
    }

    pub fn output_sizes(&self) -> &[usize] {
        &self.output_sizes
    }

    /// `|X_I|`.
    pub fn input_count(&self) -> usize {
        self.input_sizes.iter().product()
    }

    /// `|Y_I|`.
    pub fn output_count(&self) -> usize {
        self.output_sizes.iter().product()
    }

    pub fn channel(&self) -> &[f64] {
        &self.channel
    }

    pub fn row(&self, x_index: usize) -> &[f64] {
        let yc = self.output_count();
        &self.channel[x_index * yc..(x_index + 1) * yc]
    }

    pub fn input_index(&self, x: &[usize]) -> usize {
        mixed_radix_index(x, &self.input_sizes)
    }

    pub fn input_digits(&self, index: usize) -> Vec<usize> {
        mixed_radix_digits(index, &self.input_sizes)
    }

    pub fn output_index(&self, y: &[usize]) -> usize {
        mixed_radix_index(y, &self.output_sizes)
    }

    pub fn output_digits(&self, index: usize) -> Vec<usize> {
        mixed_radix_digits(index, &self.output_sizes)
    }

    /// The full transition law as a conditional pmf over all outputs.
    pub fn as_conditional(&self) -> ConditionalPmf {
        ConditionalPmf {
            input_count: self.input_count(),
            output_nodes: (0..self.node_count()).collect(),
            output_sizes: self.output_sizes.clone(),
            probs: self.channel.clone(),
        }
    }
}

fn checked_product(sizes: &[usize]) -> Result<usize, ModelError> {
    sizes
        .iter()
        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
        .filter(|&p| p <= MAX_TENSOR_ENTRIES)
        .ok_or(ModelError::TooLarge { entries: usize::MAX })
}

/// Conditional pmf `q(y_S | x_I)` for an ordered set `S` of output nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPmf {
    input_count: usize,
    output_nodes: Vec<usize>,
    output_sizes: Vec<usize>,
    probs: Vec<f64>,
}

impl ConditionalPmf {
    pub fn new(input_count: usize, output_size: usize, probs: Vec<f64>) -> Result<Self, ModelError> {
        if input_count == 0 || output_size == 0 || probs.len() != input_count * output_size {
            return Err(ModelError::Schema("conditional pmf shape mismatch".into()));
        }
        Ok(ConditionalPmf {
            input_count,
            output_nodes: vec![0],
            output_sizes: vec![output_size],
            probs,
        })
    }

    pub fn input_count(&self) -> usize {
        self.input_count
    }

    /// Number of joint output symbols (1 when no outputs remain).
    pub fn output_count(&self) -> usize {
        self.output_sizes.iter().product()
    }

    pub fn output_nodes(&self) -> &[usize] {
        &self.output_nodes
    }

    pub fn output_sizes(&self) -> &[usize] {
        &self.output_sizes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn row(&self, x_index: usize) -> &[f64] {
        let yc = self.output_count();
        &self.probs[x_index * yc..(x_index + 1) * yc]
    }

    /// Sums out every output node not listed in `keep`.
    pub fn marginalize_to(&self, keep: &[usize]) -> ConditionalPmf {
        let positions: Vec<usize> = self
            .output_nodes
            .iter()
            .enumerate()
            .filter(|(_, n)| keep.contains(n))
            .map(|(p, _)| p)
            .collect();
        let kept_nodes: Vec<usize> = positions.iter().map(|&p| self.output_nodes[p]).collect();
        let kept_sizes: Vec<usize> = positions.iter().map(|&p| self.output_sizes[p]).collect();
        let yc = self.output_count();
        let kc: usize = kept_sizes.iter().product();
        let map: Vec<usize> = (0..yc)
            .map(|y| {
                let digits = mixed_radix_digits(y, &self.output_sizes);
                let kept: Vec<usize> = positions.iter().map(|&p| digits[p]).collect();
                mixed_radix_index(&kept, &kept_sizes)
            })
            .collect();
        let mut probs = vec![0.0; self.input_count * kc];
        for x in 0..self.input_count {
            let out = &mut probs[x * kc..(x + 1) * kc];
            for (y, &p) in self.row(x).iter().enumerate() {
                out[map[y]] += p;
            }
        }
        ConditionalPmf {
            input_count: self.input_count,
            output_nodes: kept_nodes,
            output_sizes: kept_sizes,
            probs,
        }
    }
}

/// Returns `q(y_{T^c} | x_I)` obtained by summing `y_T` out of the network's
/// transition law.
pub fn marginalize_channel(net: &DiscreteNetwork, cut: &Cut) -> ConditionalPmf {
    net.as_conditional().marginalize_to(&cut.complement_members())
}

/// Gaussian network `Y = G X + Z`, `Z ~ N(0, Sigma)`, with peak powers `P`.
///
/// `gain[(i, j)]` is the gain from node `j` into the output of node `i`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianNetwork {
    gain: DMatrix<f64>,
    noise_cov: DMatrix<f64>,
    power: Vec<f64>,
    g_max: f64,
    sigma_min: f64,
    p_min: f64,
    p_max: f64,
}

impl GaussianNetwork {
    pub fn new(gain: DMatrix<f64>, noise_cov: DMatrix<f64>, power: Vec<f64>) -> Result<Self, ModelError> {
        let n = power.len();
        if n == 0 || n > MAX_NODES {
            return Err(ModelError::Schema(format!("node count {n} outside 1..={MAX_NODES}")));
        }
        if gain.shape() != (n, n) || noise_cov.shape() != (n, n) {
            return Err(ModelError::Schema(format!("gain and noise covariance must be {n}x{n}")));
        }
        if gain.iter().chain(noise_cov.iter()).any(|v| !v.is_finite()) {
            return Err(ModelError::Schema("non-finite matrix entry".into()));
        }
        for (node, &value) in power.iter().enumerate() {
            if !(value.is_finite() && value > 0.0) {
                return Err(ModelError::NonPositivePower { node, value });
            }
        }
        let scale = noise_cov.amax().max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (noise_cov[(i, j)] - noise_cov[(j, i)]).abs() > NORMALIZATION_TOL * scale {
                    return Err(ModelError::NotSymmetric);
                }
            }
        }
        let sym = (&noise_cov + noise_cov.transpose()) * 0.5;
        let sigma_min = SymmetricEigen::new(sym.clone()).eigenvalues.min();
        if !(sigma_min > 0.0) {
            return Err(ModelError::NotPositiveDefinite {
                min_eigenvalue: sigma_min,
            });
        }
        let g_max = gain.amax();
        let p_min = power.iter().cloned().fold(f64::INFINITY, f64::min);
        let p_max = power.iter().cloned().fold(0.0, f64::max);
        Ok(GaussianNetwork {
            gain,
            noise_cov: sym,
            power,
            g_max,
            sigma_min,
            p_min,
            p_max,
        })
    }

    /// Two-node scalar link: node 0 transmits to node 1 with gain `g`,
    /// both nodes see independent noise of variance `noise_var`, both have
    /// power `power`.
    pub fn scalar_link(g: f64, noise_var: f64, power: f64) -> Result<Self, ModelError> {
        GaussianNetwork::new(
            DMatrix::from_row_slice(2, 2, &[0.0, 0.0, g, 0.0]),
            DMatrix::from_diagonal_element(2, 2, noise_var),
            vec![power, power],
        )
    }

    pub fn node_count(&self) -> usize {
        self.power.len()
    }

    pub fn gain(&self) -> &DMatrix<f64> {
        &self.gain
    }

    pub fn noise_cov(&self) -> &DMatrix<f64> {
        &self.noise_cov
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }

    pub fn g_max(&self) -> f64 {
        self.g_max
    }

    pub fn sigma_min(&self) -> f64 {
        self.sigma_min
    }

    pub fn p_min(&self) -> f64 {
        self.p_min
    }

    pub fn p_max(&self) -> f64 {
        self.p_max
    }

    /// Same network with every power multiplied by `factor`.
    pub fn with_power_scaled(&self, factor: f64) -> Result<Self, ModelError> {
        GaussianNetwork::new(
            self.gain.clone(),
            self.noise_cov.clone(),
            self.power.iter().map(|p| p * factor).collect(),
        )
    }

    pub fn with_power(&self, power: Vec<f64>) -> Result<Self, ModelError> {
        GaussianNetwork::new(self.gain.clone(), self.noise_cov.clone(), power)
    }
}

/// A network of either kind.
#[derive(Debug, Clone, PartialEq)]
pub enum Network {
    Discrete(DiscreteNetwork),
    Gaussian(GaussianNetwork),
}

impl Network {
    pub fn node_count(&self) -> usize {
        match self {
            Network::Discrete(d) => d.node_count(),
            Network::Gaussian(g) => g.node_count(),
        }
    }

    pub fn to_document(&self) -> NetworkDocument {
        match self {
            Network::Discrete(d) => NetworkDocument {
                kind: NetworkKind::Discrete,
                n_nodes: d.node_count(),
                discrete: Some(DiscreteSection {
                    input_sizes: d.input_sizes.clone(),
                    output_sizes: d.output_sizes.clone(),
                    channel: d.channel.clone(),
                }),
                gaussian: None,
            },
            Network::Gaussian(g) => NetworkDocument {
                kind: NetworkKind::Gaussian,
                n_nodes: g.node_count(),
                discrete: None,
                gaussian: Some(GaussianSection {
                    gain: row_major(&g.gain),
                    noise_cov: row_major(&g.noise_cov),
                    power: g.power.clone(),
                }),
            },
        }
    }

    /// Canonical serialized form (pretty JSON, trailing newline).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_document()).expect("network documents always serialize");
        s.push('\n');
        s
    }
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    let (r, c) = m.shape();
    (0..r).flat_map(|i| (0..c).map(move |j| m[(i, j)])).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NetworkKind {
    Discrete,
    Gaussian,
}

/// On-disk network description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkDocument {
    pub kind: NetworkKind,
    pub n_nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub discrete: Option<DiscreteSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gaussian: Option<GaussianSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteSection {
    pub input_sizes: Vec<usize>,
    pub output_sizes: Vec<usize>,
    pub channel: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianSection {
    pub gain: Vec<f64>,
    pub noise_cov: Vec<f64>,
    pub power: Vec<f64>,
}

/// On-disk rate matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesDocument {
    pub rates: Vec<f64>,
}

impl NetworkDocument {
    pub fn into_network(self) -> Result<Network, ModelError> {
        let n = self.n_nodes;
        match self.kind {
            NetworkKind::Discrete => {
                if self.gaussian.is_some() {
                    return Err(ModelError::Schema(
                        "discrete network carries a \"gaussian\" section".into(),
                    ));
                }
                let d = self
                    .discrete
                    .ok_or_else(|| ModelError::Schema("missing \"discrete\" section".into()))?;
                if d.input_sizes.len() != n || d.output_sizes.len() != n {
                    return Err(ModelError::Schema(format!(
                        "alphabet lists must have n_nodes = {n} entries"
                    )));
                }
                Ok(Network::Discrete(DiscreteNetwork::new(
                    d.input_sizes,
                    d.output_sizes,
                    d.channel,
                )?))
            }
            NetworkKind::Gaussian => {
                if self.discrete.is_some() {
                    return Err(ModelError::Schema(
                        "gaussian network carries a \"discrete\" section".into(),
                    ));
                }
                let g = self
                    .gaussian
                    .ok_or_else(|| ModelError::Schema("missing \"gaussian\" section".into()))?;
                if g.gain.len() != n * n || g.noise_cov.len() != n * n || g.power.len() != n {
                    return Err(ModelError::Schema(format!(
                        "gain/noise_cov need {} entries and power {n}",
                        n * n
                    )));
                }
                Ok(Network::Gaussian(GaussianNetwork::new(
                    DMatrix::from_row_slice(n, n, &g.gain),
                    DMatrix::from_row_slice(n, n, &g.noise_cov),
                    g.power,
                )?))
            }
        }
    }
}

/// Parses and validates a network document.
pub fn load_network(text: &str) -> Result<Network, ModelError> {
    let doc: NetworkDocument = serde_json::from_str(text)?;
    doc.into_network()
}

/// Parses a rate document; the node count is inferred from its length.
pub fn load_rates(text: &str) -> Result<RateMatrix, ModelError> {
    let doc: RatesDocument = serde_json::from_str(text)?;
    let n = (doc.rates.len() as f64).sqrt().round() as usize;
    RateMatrix::new(n, doc.rates)
}

/// On-disk input distribution over `X_I` in mixed-radix order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistributionDocument {
    pub probs: Vec<f64>,
}

/// On-disk input covariance, row-major `N x N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceDocument {
    pub cov: Vec<f64>,
}

/// Parses an input distribution for a network with input alphabets `sizes`.
pub fn load_distribution(text: &str, sizes: &[usize]) -> Result<Vec<f64>, ModelError> {
    let doc: DistributionDocument = serde_json::from_str(text)?;
    let len: usize = sizes.iter().product();
    if doc.probs.len() != len {
        return Err(ModelError::Schema(format!(
            "distribution has {} entries, the input alphabet has {len}",
            doc.probs.len()
        )));
    }
    if let Some((index, &value)) = doc
        .probs
        .iter()
        .enumerate()
        .find(|(_, p)| !(p.is_finite() && **p >= 0.0))
    {
        return Err(ModelError::InvalidProbability { index, value });
    }
    let sum: f64 = doc.probs.iter().sum();
    if (sum - 1.0).abs() > NORMALIZATION_TOL {
        return Err(ModelError::Schema(format!("distribution sums to {sum} instead of 1")));
    }
    Ok(doc.probs)
}

/// Parses a symmetric positive semidefinite `n x n` input covariance.
pub fn load_covariance(text: &str, n: usize) -> Result<DMatrix<f64>, ModelError> {
    let doc: CovarianceDocument = serde_json::from_str(text)?;
    if doc.cov.len() != n * n || doc.cov.iter().any(|v| !v.is_finite()) {
        return Err(ModelError::Schema(format!("covariance needs {} finite entries", n * n)));
    }
    let k = DMatrix::from_row_slice(n, n, &doc.cov);
    if (&k - k.transpose()).amax() > 1e-12 {
        return Err(ModelError::Schema("covariance not symmetric".into()));
    }
    let min = SymmetricEigen::new(k.clone()).eigenvalues.min();
    if min < -1e-9 {
        return Err(ModelError::Schema(format!(
            "covariance not positive semidefinite (smallest eigenvalue {min})"
        )));
    }
    Ok(k)
}
