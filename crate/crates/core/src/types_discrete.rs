//! Method of types over finite alphabets and the discrete exponent
//! certificate.

use num_bigint::BigUint;
use serde::Serialize;
use thiserror::Error;

use crate::info::{binary_entropy, kl_divergence_conditional};
use crate::model::{ConditionalPmf, Cut, DiscreteNetwork, Network, RateMatrix};
use crate::region::{region_margin, OptimizerConfig};

#[derive(Debug, Error)]
pub enum TypeError {
    #[error("empty sequence")]
    Empty,
    #[error("symbol {symbol} at position {position} outside alphabet of size {alphabet}")]
    OutOfRange {
        position: usize,
        symbol: usize,
        alphabet: usize,
    },
    #[error("sequences have lengths {0} and {1}")]
    LengthMismatch(usize, usize),
}

#[derive(Debug, Error)]
pub enum CertificateError {
    #[error("no certificate: rate inside cut-set bound (margin {margin:.3e})")]
    Inside { margin: f64 },
    #[error(
        "no certificate: membership search uncertified (best margin {margin:.6e}, proven lower bound {lower:.6e})"
    )]
    Uncertified { margin: f64, lower: f64 },
    #[error("no certificate: {0}")]
    Other(String),
}

/// Counts of each symbol in a sequence of length `n`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct TypeHistogram {
    pub counts: Vec<u64>,
    pub n: u64,
}

impl TypeHistogram {
    pub fn alphabet_size(&self) -> usize {
        self.counts.len()
    }

    pub fn pmf(&self) -> Vec<f64> {
        self.counts.iter().map(|&c| c as f64 / self.n as f64).collect()
    }
}

/// Type of `seq` over an alphabet of size `m`.
pub fn type_of(seq: &[usize], m: usize) -> Result<TypeHistogram, TypeError> {
    if seq.is_empty() {
        return Err(TypeError::Empty);
    }
    let mut counts = vec![0u64; m];
    for (position, &symbol) in seq.iter().enumerate() {
        if symbol >= m {
            return Err(TypeError::OutOfRange {
                position,
                symbol,
                alphabet: m,
            });
        }
        counts[symbol] += 1;
    }
    Ok(TypeHistogram {
        counts,
        n: seq.len() as u64,
    })
}

/// Joint type of paired sequences over `mx x my`, index `x * my + y`.
pub fn joint_type_of(xs: &[usize], ys: &[usize], mx: usize, my: usize) -> Result<TypeHistogram, TypeError> {
    if xs.len() != ys.len() {
        return Err(TypeError::LengthMismatch(xs.len(), ys.len()));
    }
    if let Some((position, &symbol)) = ys.iter().enumerate().find(|(_, &y)| y >= my) {
        return Err(TypeError::OutOfRange {
            position,
            symbol,
            alphabet: my,
        });
    }
    if let Some((position, &symbol)) = xs.iter().enumerate().find(|(_, &x)| x >= mx) {
        return Err(TypeError::OutOfRange {
            position,
            symbol,
            alphabet: mx,
        });
    }
    let paired: Vec<usize> = xs.iter().zip(ys).map(|(&x, &y)| x * my + y).collect();
    type_of(&paired, mx * my)
}

/// Exact number of types and the `(n+1)^m` bound.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeCount {
    pub exact: BigUint,
    pub bound: BigUint,
}

/// Number of types of length-`n` sequences over `m` symbols:
/// `C(n+m-1, m-1)`, together with `(n+1)^m`.
pub fn count_types(n: u64, m: u32) -> TypeCount {
    assert!(n >= 1 && m >= 1, "n and m must be positive");
    let k = u64::from(m) - 1;
    let mut exact = BigUint::from(1u32);
    for i in 1..=k {
        exact = exact * BigUint::from(n + i) / BigUint::from(i);
    }
    TypeCount {
        exact,
        bound: BigUint::from(n + 1).pow(m),
    }
}

/// `H_{rs}(Y|X) + D(s || q | r)`, so that the product of `q` over any pair
/// of sequences with joint type `r s` equals `exp(-n * value)`. Returns
/// `f64::INFINITY` when `q` vanishes somewhere on the support of `r s`.
pub fn product_probability_exponent(r: &[f64], s: &ConditionalPmf, q: &ConditionalPmf) -> f64 {
    let div = kl_divergence_conditional(s, q, r);
    if !div.finite {
        return f64::INFINITY;
    }
    let mut h = 0.0;
    for (x, &rx) in r.iter().enumerate() {
        for &sy in s.row(x) {
            if rx > 0.0 && sy > 0.0 {
                h -= rx * sy * sy.ln();
            }
        }
    }
    h + div.nats
}

/// Continuity modulus of conditional mutual information over joints with
/// `support` atoms: `|I(g) - I(h)| <= omega(d)` whenever `||g - h||_1 <= d`.
///
/// The information is a signed sum of four entropies of marginals, each of
/// which moves by at most `d ln(support) + h_b(min(d, 1/2))`.
pub fn modulus(d: f64, support: f64) -> f64 {
    4.0 * (d * support.ln() + binary_entropy(d.min(0.5)))
}

/// Largest `xi` in `(0, 2]` with `modulus(sqrt(2 xi), support) <= delta / 2`.
pub fn continuity_xi_for_support(support: f64, delta: f64) -> Result<f64, CertificateError> {
    if !(delta > 0.0) {
        return Err(CertificateError::Other(format!("margin {delta} is not positive")));
    }
    let ok = |xi: f64| modulus((2.0 * xi).sqrt(), support) <= delta / 2.0;
    let (mut lo, mut hi) = (0.0f64, 2.0f64);
    if ok(hi) {
        return Ok(hi);
    }
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
    Ok(lo)
}

/// [`continuity_xi_for_support`] with `support = |X_I| |Y_I|`.
pub fn continuity_xi(net: &DiscreteNetwork, delta: f64) -> Result<f64, CertificateError> {
    continuity_xi_for_support((net.input_count() * net.output_count()) as f64, delta)
}

/// Certificate that rates outside the cut-set region have correct-decoding
/// probability at most `(n+1)^a exp(-n E)`.
#[derive(Debug, Clone, Serialize)]
pub struct DiscreteCertificate {
    /// Proven lower bound on the margin, used as the rate slack.
    pub margin: f64,
    /// Margin achieved by the best witness (an upper bound).
    pub margin_witness: f64,
    pub xi: f64,
    pub exponent: f64,
    /// `a = |X_I| |Y_I|`.
    pub prefactor: u64,
    pub worst_cut: Cut,
    /// Smallest `n >= 1` with bound below 1.
    pub n0: u64,
}

impl DiscreteCertificate {
    pub fn from_parts(margin: f64, xi: f64, prefactor: u64, worst_cut: Cut) -> Self {
        let exponent = xi.min(margin / 2.0);
        let mut c = DiscreteCertificate {
            margin,
            margin_witness: margin,
            xi,
            exponent,
            prefactor,
            worst_cut,
            n0: 0,
        };
        c.n0 = c.first_nontrivial_n();
        c
    }

    /// `a ln(n+1) - n E`.
    pub fn log_bound(&self, n: u64) -> f64 {
        self.prefactor as f64 * ((n + 1) as f64).ln() - n as f64 * self.exponent
    }

    pub fn bound(&self, n: u64) -> f64 {
        self.log_bound(n).exp()
    }

    /// The log bound is concave and vanishes at 0, so the set of `n` where
    /// it is negative is an up-set; bisect for its first element.
    fn first_nontrivial_n(&self) -> u64 {
        if self.exponent <= 0.0 {
            return u64::MAX;
        }
        if self.log_bound(1) < 0.0 {
            return 1;
        }
        let mut hi = 2u64;
        while self.log_bound(hi) >= 0.0 {
            if hi > u64::MAX / 4 {
                return u64::MAX;
            }
            hi *= 2;
        }
        let mut lo = hi / 2;
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.log_bound(mid) < 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        hi
    }
}

/// Builds the certificate from a certified membership search.
pub fn discrete_certificate(
    net: &DiscreteNetwork,
    rates: &RateMatrix,
    cfg: &OptimizerConfig,
) -> Result<DiscreteCertificate, CertificateError> {
    let verdict = region_margin(&Network::Discrete(net.clone()), rates, cfg);
    if verdict.inside {
        return Err(CertificateError::Inside {
            margin: verdict.margin + 0.0,
        });
    }
    let lower = verdict.margin_lower_bound.unwrap_or(f64::NEG_INFINITY);
    if !verdict.certified || lower <= cfg.tol {
        return Err(CertificateError::Uncertified {
            margin: verdict.margin,
            lower,
        });
    }
    let xi = continuity_xi(net, lower)?;
    let mut cert = DiscreteCertificate::from_parts(
        lower,
        xi,
        (net.input_count() * net.output_count()) as u64,
        verdict.worst_cut,
    );
    cert.margin_witness = verdict.margin;
    Ok(cert)
}
