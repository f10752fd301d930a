//! Entropy, relative entropy and conditional mutual information, in nats,
//! plus the Gaussian log-det cut term.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::linalg::{inv_sqrt_sym, pseudo_inverse_sym, submatrix, sym_eigenvalues};
use crate::model::{mixed_radix_digits, mixed_radix_index, ConditionalPmf, Cut, GaussianNetwork};

const PMF_TOL: f64 = 1e-12;

/// Symmetric PSD matrix of input correlations.
pub type CovMatrix = DMatrix<f64>;

#[derive(Debug, Error)]
pub enum InfoError {
    #[error("pmf has {got} entries, support needs {expected}")]
    Shape { expected: usize, got: usize },
    #[error("pmf entry {index} is negative or not finite ({value})")]
    Entry { index: usize, value: f64 },
    #[error("pmf sums to {0}")]
    NotNormalized(f64),
}

/// Joint pmf over a product of finite alphabets, row-major mixed radix.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPmf {
    sizes: Vec<usize>,
    probs: Vec<f64>,
}

impl JointPmf {
    pub fn new(sizes: Vec<usize>, probs: Vec<f64>) -> Result<Self, InfoError> {
        let expected: usize = sizes.iter().product();
        if probs.len() != expected {
            return Err(InfoError::Shape {
                expected,
                got: probs.len(),
            });
        }
        if let Some((index, &value)) = probs.iter().enumerate().find(|(_, &v)| !v.is_finite() || v < 0.0) {
            return Err(InfoError::Entry { index, value });
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > PMF_TOL {
            return Err(InfoError::NotNormalized(s));
        }
        Ok(JointPmf { sizes, probs })
    }

    pub fn uniform(sizes: Vec<usize>) -> Self {
        let m: usize = sizes.iter().product();
        JointPmf {
            sizes,
            probs: vec![1.0 / m as f64; m],
        }
    }

    /// `p(x) w(y|x)` over the input alphabets followed by the output
    /// alphabets of `w`.
    pub fn compose(input_sizes: &[usize], p: &[f64], w: &ConditionalPmf) -> Result<Self, InfoError> {
        let yc = w.output_count();
        if p.len() != w.input_count() {
            return Err(InfoError::Shape {
                expected: w.input_count(),
                got: p.len(),
            });
        }
        let mut probs = Vec::with_capacity(p.len() * yc);
        for (x, &px) in p.iter().enumerate() {
            probs.extend(w.row(x).iter().map(|&q| px * q));
        }
        let mut sizes = input_sizes.to_vec();
        sizes.extend_from_slice(w.output_sizes());
        JointPmf::new(sizes, probs)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// Marginal over the listed coordinates (in the given order).
    pub fn marginal(&self, coords: &[usize]) -> JointPmf {
        let sizes: Vec<usize> = coords.iter().map(|&c| self.sizes[c]).collect();
        let mut probs = vec![0.0; sizes.iter().product()];
        for (i, &p) in self.probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let d = mixed_radix_digits(i, &self.sizes);
            let k: Vec<usize> = coords.iter().map(|&c| d[c]).collect();
            probs[mixed_radix_index(&k, &sizes)] += p;
        }
        JointPmf { sizes, probs }
    }
}

fn plogp_sum(probs: &[f64]) -> f64 {
    -probs.iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum::<f64>()
}

/// Shannon entropy `-sum p ln p` with `0 ln 0 = 0`.
pub fn entropy(p: &JointPmf) -> f64 {
    plogp_sum(&p.probs)
}

/// Entropy of a raw probability vector.
pub fn entropy_of(probs: &[f64]) -> f64 {
    plogp_sum(probs)
}

/// Binary entropy in nats.
pub fn binary_entropy(p: f64) -> f64 {
    entropy_of(&[p, 1.0 - p])
}

/// Relative entropy value with an explicit absolute-continuity flag.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Divergence {
    /// Nats, or `f64::INFINITY` when `finite` is false.
    pub nats: f64,
    pub finite: bool,
}

/// `D(s || q | r) = sum_x r(x) sum_y s(y|x) ln(s(y|x) / q(y|x))`.
pub fn kl_divergence_conditional(s: &ConditionalPmf, q: &ConditionalPmf, r: &[f64]) -> Divergence {
    assert_eq!(s.input_count(), q.input_count(), "conditioning alphabets differ");
    assert_eq!(s.output_count(), q.output_count(), "output alphabets differ");
    assert_eq!(r.len(), s.input_count(), "r has wrong length");
    let mut total = 0.0;
    for (x, &rx) in r.iter().enumerate() {
        if rx == 0.0 {
            continue;
        }
        for (&sy, &qy) in s.row(x).iter().zip(q.row(x)) {
            if sy == 0.0 {
                continue;
            }
            if qy == 0.0 {
                return Divergence {
                    nats: f64::INFINITY,
                    finite: false,
                };
            }
            total += rx * sy * (sy / qy).ln();
        }
    }
    Divergence {
        nats: total.max(0.0),
        finite: true,
    }
}

/// `I(X_T; Y | X_{T^c})` for a joint whose first `N = cut.node_count()`
/// coordinates are the node inputs and whose remaining coordinates are the
/// outputs `Y`.
///
/// Evaluated as `H(X_{T^c}, Y) - H(X_{T^c}) - H(X_I, Y) + H(X_I)`.
pub fn conditional_mutual_information(joint: &JointPmf, cut: &Cut) -> f64 {
    let n = cut.node_count();
    assert!(joint.sizes.len() >= n, "joint lacks input coordinates");
    if joint.sizes.len() == n {
        return 0.0;
    }
    let inputs: Vec<usize> = (0..n).collect();
    let outputs: Vec<usize> = (n..joint.sizes.len()).collect();
    let tc = cut.complement_members();
    let tc_y: Vec<usize> = tc.iter().chain(&outputs).copied().collect();
    let h_tc_y = entropy(&joint.marginal(&tc_y));
    let h_tc = entropy(&joint.marginal(&tc));
    let h_x = entropy(&joint.marginal(&inputs));
    let h_xy = entropy(joint);
    (h_tc_y - h_tc - h_xy + h_x).max(0.0)
}

/// Sum of absolute differences.
pub fn l1_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// L1 radius implied by a divergence bound `xi` through Pinsker's inequality.
pub fn pinsker_radius(xi: f64) -> f64 {
    assert!(xi >= 0.0, "divergence bound must be nonnegative");
    (2.0 * xi).sqrt()
}

/// Conditional covariance `K_TT - K_{T,Tc} K_{Tc,Tc}^+ K_{Tc,T}`.
pub fn schur_conditional_covariance(k: &CovMatrix, cut: &Cut) -> CovMatrix {
    let t = cut.members();
    let tc = cut.complement_members();
    schur_by_index(k, &t, &tc)
}

pub(crate) fn schur_by_index(k: &CovMatrix, t: &[usize], tc: &[usize]) -> CovMatrix {
    let ktt = submatrix(k, t, t);
    if tc.is_empty() || t.is_empty() {
        return ktt;
    }
    let ktc = submatrix(k, t, tc);
    let kcc = submatrix(k, tc, tc);
    let s = ktt - &ktc * pseudo_inverse_sym(&kcc) * ktc.transpose();
    (&s + s.transpose()) * 0.5
}

/// Precomputed pieces of the Gaussian cut term for one cut.
#[derive(Debug, Clone)]
pub struct GaussianCutTerm {
    t: Vec<usize>,
    tc: Vec<usize>,
    gain: DMatrix<f64>,
    noise_inv_sqrt: DMatrix<f64>,
}

impl GaussianCutTerm {
    pub fn new(net: &GaussianNetwork, cut: &Cut) -> Self {
        let t = cut.members();
        let tc = cut.complement_members();
        let gain = submatrix(net.gain(), &tc, &t);
        let noise_inv_sqrt = inv_sqrt_sym(&submatrix(net.noise_cov(), &tc, &tc));
        GaussianCutTerm {
            t,
            tc,
            gain,
            noise_inv_sqrt,
        }
    }

    pub fn is_trivial(&self) -> bool {
        self.t.is_empty() || self.tc.is_empty()
    }

    /// `1/2 ln det(I + S^{-1/2} G K_{T|Tc} G^T S^{-1/2})` via eigenvalues.
    pub fn value(&self, k: &CovMatrix) -> f64 {
        if self.is_trivial() {
            return 0.0;
        }
        let kc = schur_by_index(k, &self.t, &self.tc);
        let a = &self.noise_inv_sqrt * &self.gain;
        let m = &a * kc * a.transpose();
        0.5 * sym_eigenvalues(&m).into_iter().map(|l| l.max(0.0).ln_1p()).sum::<f64>()
    }
}

/// Gaussian cut term for covariance `K` and cut `T`.
pub fn gaussian_cut_value(net: &GaussianNetwork, k: &CovMatrix, cut: &Cut) -> f64 {
    GaussianCutTerm::new(net, cut).value(k)
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use crate::model::DiscreteNetwork;
    use approx::assert_abs_diff_eq;

    const BSC_CAP: f64 = 0.368_064_207_168_497_1;

    fn bsc_rows(p: f64) -> ConditionalPmf {
        ConditionalPmf::new(2, 2, vec![1.0 - p, p, p, 1.0 - p]).unwrap()
    }

    #[test]
    fn entropy_examples() {
        assert_abs_diff_eq!(entropy(&JointPmf::uniform(vec![2])), 2f64.ln(), epsilon = 1e-15);
        assert_eq!(entropy(&JointPmf::new(vec![3], vec![0.0, 1.0, 0.0]).unwrap()), 0.0);
        let h = entropy(&JointPmf::new(vec![2], vec![0.1, 0.9]).unwrap());
        assert_abs_diff_eq!(h, -(0.1f64 * 0.1f64.ln() + 0.9 * 0.9f64.ln()), epsilon = 1e-15);
        assert_abs_diff_eq!(h, 0.325083, epsilon = 1e-6);
    }

    #[test]
    fn kl_examples() {
        let r = [0.5, 0.5];
        let q = bsc_rows(0.1);
        assert_eq!(kl_divergence_conditional(&q, &q, &r).nats, 0.0);
        let det = ConditionalPmf::new(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        let d = kl_divergence_conditional(&det, &bsc_rows(0.5), &r);
        assert_abs_diff_eq!(d.nats, 2f64.ln(), epsilon = 1e-15);
        let d = kl_divergence_conditional(&bsc_rows(0.1), &bsc_rows(0.5), &r);
        assert_abs_diff_eq!(d.nats, BSC_CAP, epsilon = 1e-12);
        let d = kl_divergence_conditional(&bsc_rows(0.1), &det, &r);
        assert!(!d.finite && d.nats.is_infinite());
    }

    #[test]
    fn cmi_bsc_cut() {
        // node 1 -> node 2 over BSC(0.1), node 2's input ignored
        let bsc = [[0.9, 0.1], [0.1, 0.9]];
        let mut ch = Vec::new();
        for x0 in 0..2 {
            for _x1 in 0..2 {
                for y1 in 0..2 {
                    ch.push(bsc[x0][y1]);
                }
            }
        }
        let net = DiscreteNetwork::new(vec![2, 2], vec![1, 2], ch).unwrap();
        let cut = Cut::from_members(&[0], 2).unwrap();
        let w = crate::model::marginalize_channel(&net, &cut);
        let joint = JointPmf::compose(net.input_sizes(), &[0.25; 4], &w).unwrap();
        assert_eq!(joint.probs().len(), 8);
        assert_abs_diff_eq!(conditional_mutual_information(&joint, &cut), BSC_CAP, epsilon = 1e-12);
        let full = Cut::new(0b11, 2).unwrap();
        let w = crate::model::marginalize_channel(&net, &full);
        let joint = JointPmf::compose(net.input_sizes(), &[0.25; 4], &w).unwrap();
        assert_eq!(conditional_mutual_information(&joint, &full), 0.0);
        // X_2 is ignored by the channel
        let cut2 = Cut::from_members(&[1], 2).unwrap();
        let w = crate::model::marginalize_channel(&net, &cut2);
        let joint = JointPmf::compose(net.input_sizes(), &[0.25; 4], &w).unwrap();
        assert_abs_diff_eq!(conditional_mutual_information(&joint, &cut2), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn pinsker_examples() {
        assert_eq!(pinsker_radius(0.0), 0.0);
        assert_abs_diff_eq!(pinsker_radius(0.02), 0.2, epsilon = 1e-15);
        assert_eq!(pinsker_radius(0.5), 1.0);
    }

    #[test]
    fn schur_examples() {
        let rho = 0.6;
        let k = DMatrix::from_row_slice(2, 2, &[1.0, rho, rho, 1.0]);
        let s = schur_conditional_covariance(&k, &Cut::from_members(&[0], 2).unwrap());
        assert_abs_diff_eq!(s[(0, 0)], 1.0 - rho * rho, epsilon = 1e-14);
        let k = DMatrix::from_row_slice(3, 3, &[2.0, 0.3, 0.0, 0.3, 1.0, 0.0, 0.0, 0.0, 5.0]);
        let s = schur_conditional_covariance(&k, &Cut::from_members(&[0, 1], 3).unwrap());
        assert_abs_diff_eq!(s, submatrix(&k, &[0, 1], &[0, 1]), epsilon = 1e-14);
        let k = DMatrix::from_row_slice(2, 2, &[1.5, 0.0, 0.0, 0.0]);
        let s = schur_conditional_covariance(&k, &Cut::from_members(&[0], 2).unwrap());
        assert_abs_diff_eq!(s[(0, 0)], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn gaussian_cut_examples() {
        let net = GaussianNetwork::scalar_link(1.0, 1.0, 1.0).unwrap();
        let cut = Cut::from_members(&[0], 2).unwrap();
        let k = DMatrix::from_diagonal_element(2, 2, 1.0);
        assert_abs_diff_eq!(gaussian_cut_value(&net, &k, &cut), 0.5 * 2f64.ln(), epsilon = 1e-14);
        assert_eq!(gaussian_cut_value(&net, &DMatrix::zeros(2, 2), &cut), 0.0);
        assert_eq!(gaussian_cut_value(&net, &k, &Cut::new(0, 2).unwrap()), 0.0);
        assert_eq!(gaussian_cut_value(&net, &k, &Cut::new(3, 2).unwrap()), 0.0);
    }
}
