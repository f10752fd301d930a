//! Gaussian types, matrix quantizers, large-deviation exponents and the
//! Gaussian exponent certificate.

use nalgebra::DMatrix;
use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{
    clip_eigenvalues, max_abs, min_eigenvalue, pseudo_inverse_sym, sqrt_psd, submatrix, sym_eigenvalues,
};
use crate::model::{Cut, GaussianNetwork, Network, RateMatrix};
use crate::par::map_chunks;
use crate::region::{region_margin, OptimizerConfig};
use crate::types_discrete::CertificateError;

/// Largest `delta` considered by [`gaussian_certificate`].
pub const DELTA_MAX: f64 = 0.5;

const PSD_TOL: f64 = 1e-12;
const MC_CHUNK: u64 = 1024;

#[derive(Debug, Error)]
pub enum GaussianTypeError {
    #[error("sequence lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("empty sequences")]
    Empty,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("matrix is not positive definite (smallest eigenvalue {0})")]
    NotPositiveDefinite(f64),
    #[error("tail exponent search failed: {0}")]
    Tail(String),
}

/// `(1/n) sum_k x_k y_k^T` for `x` of shape `|T1| x n` and `y` of shape
/// `|T2| x n`.
pub fn empirical_correlation(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<DMatrix<f64>, GaussianTypeError> {
    if x.ncols() != y.ncols() {
        return Err(GaussianTypeError::LengthMismatch(x.ncols(), y.ncols()));
    }
    if x.ncols() == 0 {
        return Err(GaussianTypeError::Empty);
    }
    Ok(x * y.transpose() / x.ncols() as f64)
}

/// The `2N x 2N` block matrix of empirical correlations of `(x^n, y^n)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianTypeBlock {
    nodes: usize,
    matrix: DMatrix<f64>,
}

impl GaussianTypeBlock {
    pub fn from_matrix(matrix: DMatrix<f64>) -> Result<Self, GaussianTypeError> {
        let (r, c) = matrix.shape();
        if r != c || r % 2 != 0 {
            return Err(GaussianTypeError::Shape(format!("{r}x{c} is not 2N x 2N")));
        }
        Ok(GaussianTypeBlock { nodes: r / 2, matrix })
    }

    pub fn node_count(&self) -> usize {
        self.nodes
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    fn block(&self, r: usize, c: usize) -> DMatrix<f64> {
        let n = self.nodes;
        self.matrix.view((r * n, c * n), (n, n)).into_owned()
    }

    /// Autocorrelation of `x`.
    pub fn xx(&self) -> DMatrix<f64> {
        self.block(0, 0)
    }

    pub fn xy(&self) -> DMatrix<f64> {
        self.block(0, 1)
    }

    pub fn yx(&self) -> DMatrix<f64> {
        self.block(1, 0)
    }

    pub fn yy(&self) -> DMatrix<f64> {
        self.block(1, 1)
    }
}

/// Gaussian type of `(x^n, y^n)`, both of shape `N x n`.
pub fn gaussian_type(x: &DMatrix<f64>, y: &DMatrix<f64>) -> Result<GaussianTypeBlock, GaussianTypeError> {
    if x.nrows() != y.nrows() {
        return Err(GaussianTypeError::Shape(format!(
            "x has {} rows, y has {}",
            x.nrows(),
            y.nrows()
        )));
    }
    if x.ncols() != y.ncols() {
        return Err(GaussianTypeError::LengthMismatch(x.ncols(), y.ncols()));
    }
    let stacked = DMatrix::from_fn(2 * x.nrows(), x.ncols(), |i, k| {
        if i < x.nrows() {
            x[(i, k)]
        } else {
            y[(i - x.nrows(), k)]
        }
    });
    let m = empirical_correlation(&stacked, &stacked)?;
    GaussianTypeBlock::from_matrix(m)
}

/// Closed entrywise box test `|a_ij - c_ij| <= delta`.
pub fn in_gamma(a: &DMatrix<f64>, center: &DMatrix<f64>, delta: f64) -> Result<bool, GaussianTypeError> {
    if a.shape() != center.shape() {
        return Err(GaussianTypeError::Shape(format!(
            "{:?} vs {:?}",
            a.shape(),
            center.shape()
        )));
    }
    Ok(a.iter().zip(center.iter()).all(|(x, c)| (x - c).abs() <= delta))
}

/// `K` is PSD with `k_ii <= P_i` (up to rounding).
pub fn in_power_set(k: &DMatrix<f64>, power: &[f64]) -> bool {
    let scale = power.iter().cloned().fold(1.0, f64::max);
    (0..k.nrows()).all(|i| k[(i, i)] <= power[i] * (1.0 + PSD_TOL)) && min_eigenvalue(k) >= -PSD_TOL * scale
}

/// Membership of a Gaussian type in the typical set of slack `delta`.
pub fn typical_set_check(block: &GaussianTypeBlock, delta: f64, net: &GaussianNetwork) -> bool {
    let g = net.gain();
    let k11 = block.xx();
    let k12 = block.xy();
    let k21 = block.yx();
    let k22 = block.yy();
    let zero = DMatrix::zeros(k11.nrows(), k11.ncols());
    if !in_power_set(&k11, net.power()) {
        return false;
    }
    let c2 = &k12 - &k11 * g.transpose();
    let c3 = &k21 - g * &k11;
    let c4 = &k22 + g * &k11 * g.transpose() - g * &k12 - &k21 * g.transpose();
    in_gamma(&c2, &zero, delta).unwrap_or(false)
        && in_gamma(&c3, &zero, delta).unwrap_or(false)
        && in_gamma(&c4, net.noise_cov(), delta).unwrap_or(false)
}

/// Lower-left corner `Delta * floor(B / Delta)` of the cell containing `B`,
/// so that `Lambda <= B < Lambda + Delta` entrywise.
pub fn quantize(b: &DMatrix<f64>, delta: f64) -> DMatrix<f64> {
    assert!(delta > 0.0, "quantizer spacing must be positive");
    b.map(|v| {
        let mut k = (v / delta).floor();
        // floating-point division can land one cell off near boundaries
        while k * delta > v {
            k -= 1.0;
        }
        while (k + 1.0) * delta <= v {
            k += 1.0;
        }
        k * delta
    })
}

/// `prod_{i,j} (ceil(2 sqrt(P_i P_j) / Delta) + 1)`.
pub fn quantizer_count_bound(delta: f64, power: &[f64]) -> BigUint {
    assert!(delta > 0.0, "quantizer spacing must be positive");
    let mut total = BigUint::from(1u32);
    for &pi in power {
        for &pj in power {
            let c = (2.0 * (pi * pj).sqrt() / delta).ceil() as u64 + 1;
            total *= BigUint::from(c);
        }
    }
    total
}

/// Number of one-dimensional cells `[k Delta, (k+1) Delta)` that meet
/// `[gamma, P]`, counted by walking the lattice.
pub fn lattice_cells_1d(delta: f64, power: f64, gamma: f64) -> u64 {
    assert!(delta > 0.0 && gamma <= power);
    let start = (gamma / delta).floor() as i64 - 2;
    let end = (power / delta).floor() as i64 + 2;
    (start..=end)
        .filter(|&k| {
            let lo = k as f64 * delta;
            let hi = lo + delta;
            lo <= power && hi > gamma
        })
        .count() as u64
}

/// Representative covariance for the cell with corner `lambda`: the
/// nearest symmetric matrix with every eigenvalue at least `gamma`.
pub fn representative_type(lambda: &DMatrix<f64>, gamma: f64) -> DMatrix<f64> {
    clip_eigenvalues(lambda, gamma)
}

/// Checks `K^{-1}` lies in the box of radius `N / k_min` around 0.
pub fn inverse_bound_check(k: &DMatrix<f64>) -> Result<bool, GaussianTypeError> {
    let kmin = min_eigenvalue(k);
    if !(kmin > 0.0) {
        return Err(GaussianTypeError::NotPositiveDefinite(kmin));
    }
    let inv = k
        .clone()
        .try_inverse()
        .ok_or(GaussianTypeError::NotPositiveDefinite(kmin))?;
    Ok(max_abs(&inv) <= k.nrows() as f64 / kmin * (1.0 + 1e-12))
}

/// Checks that `A` in the box of radius `a` and `B` in the box of radius
/// `b` give `AB` in the box of radius `m a b`, `m` the inner dimension.
pub fn product_bound_check(a: &DMatrix<f64>, b: &DMatrix<f64>) -> Result<bool, GaussianTypeError> {
    if a.ncols() != b.nrows() {
        return Err(GaussianTypeError::Shape("inner dimensions differ".into()));
    }
    let ra = max_abs(a);
    let rb = max_abs(b);
    Ok(max_abs(&(a * b)) <= a.ncols() as f64 * ra * rb * (1.0 + 1e-12))
}

/// Cumulant generating function `ln E[exp(t z^T A z)]` for `z ~ N(0, S)`
/// from the eigenvalues `lam` of `S^{1/2} A S^{1/2}`; `None` past the
/// critical `t`.
fn quad_form_cgf(lam: &[f64], t: f64) -> Option<f64> {
    let mut s = 0.0;
    for &l in lam {
        let a = 1.0 - 2.0 * t * l;
        if a <= 0.0 {
            return None;
        }
        s -= 0.5 * a.ln();
    }
    Some(s)
}

/// Largest `t` with `cgf(t)/t - mean <= slack`, by bisection.
fn largest_chernoff_t(lam: &[f64], slack: f64) -> Result<f64, GaussianTypeError> {
    let mean: f64 = lam.iter().sum();
    let lmax = lam.iter().cloned().fold(0.0f64, f64::max);
    let mut hi = if lmax > 0.0 { 1.0 / (2.0 * lmax) } else { 1e12 };
    let ok = |t: f64| quad_form_cgf(lam, t).is_some_and(|c| c / t - mean <= slack);
    if ok(hi) {
        return Ok(hi);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if ok(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if lo > 0.0 {
        Ok(lo)
    } else {
        Err(GaussianTypeError::Tail(format!("no positive t for slack {slack}")))
    }
}

/// Tail exponent for the empirical noise autocorrelation leaving the box
/// of radius `delta` around `Sigma`: `(delta/4) min_{ij} t_ij`.
///
/// Each `t_ij` is the largest `t` whose Chernoff exponent for
/// `+-(Z_i Z_j - E[Z_i Z_j])` stays within `delta/2`; both tails are
/// bounded.
pub fn noise_tail_tau(delta: f64, sigma: &DMatrix<f64>) -> Result<f64, GaussianTypeError> {
    if !(delta > 0.0) {
        return Err(GaussianTypeError::Tail("delta must be positive".into()));
    }
    let n = sigma.nrows();
    let mut tmin = f64::INFINITY;
    for i in 0..n {
        for j in i..n {
            for sign in [1.0, -1.0] {
                let lam = pair_eigenvalues(sigma, i, j, sign);
                tmin = tmin.min(largest_chernoff_t(&lam, delta / 2.0)?);
            }
        }
    }
    Ok(delta / 4.0 * tmin)
}

/// Eigenvalues of `S^{1/2} A S^{1/2}` for `Z_i Z_j` (times `sign`).
fn pair_eigenvalues(sigma: &DMatrix<f64>, i: usize, j: usize, sign: f64) -> Vec<f64> {
    if i == j {
        return vec![sign * sigma[(i, i)]];
    }
    let s = submatrix(sigma, &[i, j], &[i, j]);
    let r = sqrt_psd(&s);
    let a = DMatrix::from_row_slice(2, 2, &[0.0, 0.5 * sign, 0.5 * sign, 0.0]);
    sym_eigenvalues(&(&r * a * &r))
}

/// `ln E[exp(t Z_i Z_j)]` for `Z ~ N(0, Sigma)`, `None` when infinite.
pub fn pair_product_cgf(sigma: &DMatrix<f64>, i: usize, j: usize, t: f64) -> Option<f64> {
    quad_form_cgf(&pair_eigenvalues(sigma, i, j, 1.0), t)
}

/// Tail exponent for the input/noise cross-correlation:
/// `delta^2 / (4 max_{ij} sigma_j^2 P_i)`.
pub fn cross_tail_tau(delta: f64, sigma: &DMatrix<f64>, power: &[f64]) -> f64 {
    let smax = (0..sigma.nrows()).map(|j| sigma[(j, j)]).fold(0.0, f64::max);
    let pmax = power.iter().cloned().fold(0.0, f64::max);
    delta * delta / (4.0 * smax * pmax)
}

/// Input policy whose next symbol may depend only on past noise samples.
pub trait CausalPolicy: Sync {
    fn next(&self, past_noise: &[f64]) -> f64;
}

pub struct ZeroPolicy;

impl CausalPolicy for ZeroPolicy {
    fn next(&self, _: &[f64]) -> f64 {
        0.0
    }
}

pub struct ConstantPolicy(pub f64);

impl CausalPolicy for ConstantPolicy {
    fn next(&self, _: &[f64]) -> f64 {
        self.0
    }
}

/// Sends `+1` first, then the sign of the previous noise sample.
pub struct SignFeedbackPolicy;

impl CausalPolicy for SignFeedbackPolicy {
    fn next(&self, past: &[f64]) -> f64 {
        match past.last() {
            Some(&z) if z < 0.0 => -1.0,
            _ => 1.0,
        }
    }
}

/// Sample mean and standard error of a Monte Carlo estimate.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
    pub trials: u64,
}

/// Estimates `E[exp(t sum X_k Z_k - t^2 sigma^2/2 sum X_k^2)]` with
/// `Z_k ~ N(0, sigma^2)` i.i.d.
pub fn mgf_martingale_check(
    policy: &dyn CausalPolicy,
    sigma2: f64,
    t: f64,
    n: usize,
    trials: u64,
    seed: u64,
) -> McEstimate {
    let sd = sigma2.sqrt();
    let parts = map_chunks(trials, MC_CHUNK, |a, b| {
        let mut s1 = 0.0;
        let mut s2 = 0.0;
        let mut z = Vec::with_capacity(n);
        for trial in a..b {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            z.clear();
            let mut expo = 0.0;
            for _ in 0..n {
                let x = policy.next(&z);
                let zk: f64 = sd * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, &mut rng);
                expo += t * x * zk - 0.5 * t * t * sigma2 * x * x;
                z.push(zk);
            }
            let v = expo.exp();
            s1 += v;
            s2 += v * v;
        }
        (s1, s2)
    });
    let (s1, s2) = parts.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let m = trials as f64;
    let mean = s1 / m;
    let var = (s2 / m - mean * mean).max(0.0) * m / (m - 1.0).max(1.0);
    McEstimate {
        mean,
        std_error: (var / m).sqrt(),
        trials,
    }
}

/// Per-symbol exponent `a_T` with `prod_k q(y_{T^c,k} | x_k) <= exp(-n a_T)`
/// on typical pairs of slack `delta`:
/// `1/2 ln((2 pi e)^{|T^c|} |Sigma_{T^c}|) - delta N^3 / (2 sigma_min)`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ProductBound {
    pub exponent: f64,
    /// True when the exponent is not positive and the bound says nothing.
    pub vacuous: bool,
}

pub fn gaussian_product_prob_bound(net: &GaussianNetwork, cut: &Cut, delta: f64) -> ProductBound {
    let tc = cut.complement_members();
    let d = tc.len() as f64;
    let s = submatrix(net.noise_cov(), &tc, &tc);
    let logdet: f64 = sym_eigenvalues(&s).iter().map(|l| l.ln()).sum();
    let n = net.node_count() as f64;
    let exponent = 0.5 * (d * (2.0 * std::f64::consts::PI * std::f64::consts::E).ln() + logdet)
        - delta * n.powi(3) / (2.0 * net.sigma_min());
    ProductBound {
        exponent,
        vacuous: exponent <= 0.0,
    }
}

/// `-(1/n) ln prod_k N(y_{T^c,k}; G_{T^c,I} x_k, Sigma_{T^c})` evaluated
/// directly. `x`, `y` are `N x n`.
pub fn direct_product_exponent(net: &GaussianNetwork, cut: &Cut, x: &DMatrix<f64>, y: &DMatrix<f64>) -> f64 {
    let tc = cut.complement_members();
    let all: Vec<usize> = (0..net.node_count()).collect();
    let d = tc.len();
    if d == 0 {
        return 0.0;
    }
    let s = submatrix(net.noise_cov(), &tc, &tc);
    let s_inv = pseudo_inverse_sym(&s);
    let logdet: f64 = sym_eigenvalues(&s).iter().map(|l| l.ln()).sum();
    let g = submatrix(net.gain(), &tc, &all);
    let n = x.ncols();
    let mut total = 0.0;
    for k in 0..n {
        let mean = &g * x.column(k);
        let r = DMatrix::from_fn(d, 1, |i, _| y[(tc[i], k)] - mean[i]);
        let q = (r.transpose() * &s_inv * &r)[(0, 0)];
        total += 0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + logdet + q);
    }
    total / n as f64
}

/// `eta(delta)`, the exponent of the type-class term.
pub fn eta(delta: f64, net: &GaussianNetwork) -> f64 {
    let n = net.node_count() as f64;
    let g = net.g_max();
    delta * n * n / (2.0 * net.sigma_min())
        * (delta * n
            + (2.0 * n * g + 1.0) * delta
            + 2.0 * n.powi(4) * g * (1.0 + delta) * net.p_max() / net.p_min()
            + 1.0)
}

/// `kappa(delta, Delta)` with `gamma = delta P_min`.
pub fn kappa(delta: f64, quant: f64, net: &GaussianNetwork) -> f64 {
    let n = net.node_count() as f64;
    let g = net.g_max();
    let gamma = delta * net.p_min();
    let c = (1.0 + delta) * net.p_max() / gamma;
    (2.0 * n * g + 1.0) * delta * delta
        + n * n * g * g * quant
        + 2.0 * n.powi(4) * g * (delta * delta + n * g * quant) * c
        + quant * (n.powi(4) * g * c).powi(2)
}

/// Certificate for a Gaussian rate matrix outside the cut-set region:
/// codes of length `n` (after appending `N` redundant slots) have
/// correct-decoding probability at most
/// `exp(-tau n) + n^{N^2} (2(1+delta) P_max + 1)^{N^2} exp(-n eta(delta))`.
#[derive(Debug, Clone, Serialize)]
pub struct GaussianCertificate {
    pub delta: f64,
    pub eta: f64,
    pub tau: f64,
    pub tau_noise: f64,
    pub tau_cross: f64,
    pub gamma: f64,
    /// Cut-set margin at rates `(1-delta) R` and powers `(1+delta) P`.
    pub margin: f64,
    pub node_count: usize,
    pub p_max: f64,
    /// Smallest `n` satisfying the blocklength conditions of the argument.
    pub n_valid: f64,
    /// Smallest `n` with bound below 1 (a float: it can be astronomically
    /// large).
    pub n0: f64,
}

impl GaussianCertificate {
    fn from_delta(net: &GaussianNetwork, delta: f64, margin: f64) -> Result<Self, GaussianTypeError> {
        let d2 = delta * delta;
        let tau_noise = noise_tail_tau(d2, net.noise_cov())?;
        let boosted: Vec<f64> = net.power().iter().map(|p| p * (1.0 + delta)).collect();
        let tau_cross = cross_tail_tau(d2, net.noise_cov(), &boosted);
        let mut cert = GaussianCertificate {
            delta,
            eta: eta(delta, net),
            tau: tau_noise.min(tau_cross),
            tau_noise,
            tau_cross,
            gamma: delta * net.p_min(),
            margin,
            node_count: net.node_count(),
            p_max: net.p_max(),
            n_valid: 0.0,
            n0: 0.0,
        };
        cert.n_valid = valid_blocklength(net, delta);
        cert.n0 = cert.first_nontrivial_n();
        Ok(cert)
    }

    /// `ln` of the bound at blocklength `n`.
    pub fn log_bound(&self, n: f64) -> f64 {
        let m = (self.node_count * self.node_count) as f64;
        let a = -self.tau * n;
        let b = m * n.ln() + m * (2.0 * (1.0 + self.delta) * self.p_max + 1.0).ln() - n * self.eta;
        let hi = a.max(b);
        hi + ((a - hi).exp() + (b - hi).exp()).ln()
    }

    pub fn bound(&self, n: f64) -> f64 {
        self.log_bound(n).exp()
    }

    /// Bound for a code of length `n_bar` before the redundant slots.
    pub fn bound_for_code_length(&self, n_bar: usize) -> f64 {
        self.bound((n_bar + self.node_count) as f64)
    }

    pub fn kappa_at(&self, net: &GaussianNetwork, n: f64) -> f64 {
        kappa(self.delta, 1.0 / n, net)
    }

    fn first_nontrivial_n(&self) -> f64 {
        let mut hi = 2.0f64;
        while self.log_bound(hi) >= 0.0 {
            hi *= 2.0;
            if !hi.is_finite() {
                return f64::INFINITY;
            }
        }
        let mut lo = (hi / 2.0).max(1.0);
        if self.log_bound(lo) < 0.0 {
            return lo;
        }
        while hi - lo > 1.0 && hi > lo * (1.0 + 1e-15) {
            let mid = (0.5 * (lo + hi)).floor();
            if mid <= lo || mid >= hi {
                break;
            }
            if self.log_bound(mid) < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Smallest `n` with both blocklength requirements: the quantization
/// slack condition and `delta (n - N) >= N (1 - delta)`.
pub fn valid_blocklength(net: &GaussianNetwork, delta: f64) -> f64 {
    let n = net.node_count() as f64;
    let g = net.g_max();
    let c = g * (1.0 + delta) * net.p_max() / (delta * net.p_min());
    let need = (n * n * g * g + 2.0 * n.powi(5) * c + n.powi(8) * c * c) / delta;
    let slots = n + n * (1.0 - delta) / delta;
    need.max(slots).ceil()
}

/// Searches `delta` in `(0, DELTA_MAX]` for the largest value with
/// margin `>= 2 eta(delta)` at rates `(1-delta) R` and powers
/// `(1+delta) P`, then assembles the certificate.
pub fn gaussian_certificate(
    net: &GaussianNetwork,
    rates: &RateMatrix,
    cfg: &OptimizerConfig,
) -> Result<GaussianCertificate, CertificateError> {
    let margin_at = |delta: f64| -> Result<(f64, bool, bool), CertificateError> {
        let boosted = net
            .with_power_scaled(1.0 + delta)
            .map_err(|e| CertificateError::Other(e.to_string()))?;
        let v = region_margin(&Network::Gaussian(boosted), &rates.scaled(1.0 - delta), cfg);
        Ok((v.margin, v.inside, v.certified))
    };
    let (m0, inside, certified) = margin_at(0.0)?;
    if inside {
        return Err(CertificateError::Inside { margin: m0 + 0.0 });
    }
    if !certified {
        return Err(CertificateError::Uncertified {
            margin: m0,
            lower: f64::NAN,
        });
    }
    let admissible = |delta: f64| -> Result<Option<f64>, CertificateError> {
        let (m, inside, certified) = margin_at(delta)?;
        Ok((certified && !inside && m >= 2.0 * eta(delta, net)).then_some(m))
    };
    let mut best = admissible(DELTA_MAX)?.map(|m| (DELTA_MAX, m));
    if best.is_none() {
        let (mut lo, mut hi) = (0.0f64, DELTA_MAX);
        for _ in 0..48 {
            let mid = 0.5 * (lo + hi);
            match admissible(mid)? {
                Some(m) => {
                    lo = mid;
                    best = Some((mid, m));
                }
                None => hi = mid,
            }
            if hi - lo <= 1e-12 * hi {
                break;
            }
        }
    }
    let (delta, margin) =
        best.ok_or_else(|| CertificateError::Other("no admissible delta: margin too small for eta(delta)".into()))?;
    GaussianCertificate::from_delta(net, delta, margin).map_err(|e| CertificateError::Other(e.to_string()))
}

/// Draws i.i.d. `N(0, v_i)` inputs, passes them through the network and
/// returns `(x, y)` of shape `N x n`.
pub fn sample_gaussian_pair(
    net: &GaussianNetwork,
    variances: &[f64],
    n: usize,
    rng: &mut ChaCha8Rng,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let nn = net.node_count();
    let chol = net
        .noise_cov()
        .clone()
        .cholesky()
        .expect("noise covariance is positive definite")
        .l();
    let x = DMatrix::from_fn(nn, n, |i, _| {
        variances[i].sqrt() * <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    });
    let w = DMatrix::from_fn(nn, n, |_, _| {
        <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
    });
    let y = net.gain() * &x + chol * w;
    (x, y)
}

/// Fraction of trials whose Gaussian type falls outside the typical set,
/// for i.i.d. Gaussian inputs of the given variances.
pub fn typical_rejection_rate(
    net: &GaussianNetwork,
    variances: &[f64],
    delta: f64,
    n: usize,
    trials: u64,
    seed: u64,
) -> McEstimate {
    let parts = map_chunks(trials, MC_CHUNK, |a, b| {
        let mut rejected = 0u64;
        for trial in a..b {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial);
            let (x, y) = sample_gaussian_pair(net, variances, n, &mut rng);
            let block = gaussian_type(&x, &y).expect("shapes agree");
            if !typical_set_check(&block, delta, net) {
                rejected += 1;
            }
        }
        rejected
    });
    let rejected: u64 = parts.iter().sum();
    let p = rejected as f64 / trials as f64;
    McEstimate {
        mean: p,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        trials,
    }
}
