//! Cut-set region membership for discrete and Gaussian networks.
//!
//! The margin of a rate matrix `R` is
//! `min_w max_T (sum_{T x T^c} R - I_T(w))` over input laws `w` (pmfs or
//! feasible covariances) and all `2^N` cuts `T`. It is never negative
//! because the empty and full cuts contribute 0; a positive margin means
//! `R` is outside the region.
//!
//! Every cut term is concave in the witness, so the inner `min_T` is a
//! concave function and any local maximizer of it is global. The discrete
//! search additionally produces a dual lower bound on the margin from
//! supergradients, which certifies "outside" verdicts.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use serde::Serialize;

use crate::info::{conditional_mutual_information, GaussianCutTerm, JointPmf};
use crate::linalg::to_row_major;
use crate::model::{
    marginalize_channel, mixed_radix_digits, mixed_radix_index, ConditionalPmf, Cut, DiscreteNetwork, GaussianNetwork,
    Network, RateMatrix,
};
use crate::par::map_indexed;

const MU_SCHEDULE: [f64; 7] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7, 1e-8];
const GRAD_CLAMP: f64 = 1e3;
const ARMIJO_C: f64 = 1e-4;
const INTERIOR_MIX: f64 = 1e-10;

/// Search settings for [`region_margin`] and [`outer_region_margin`].
#[derive(Debug, Clone, Serialize)]
pub struct OptimizerConfig {
    /// Number of starting points (first ones are deterministic).
    pub restarts: usize,
    /// Ascent iterations per smoothing level.
    pub iterations: usize,
    /// Margins at or below `tol` count as inside.
    pub tol: f64,
    /// Gaussian restarts within this distance of the best margin count as
    /// agreeing.
    pub agreement_tol: f64,
    pub seed: u64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            restarts: 32,
            iterations: 200,
            tol: 1e-6,
            agreement_tol: 1e-6,
            seed: 0,
        }
    }
}

/// Best input law found by the search.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Witness {
    /// Joint input pmf over `X_I` in mixed-radix order.
    Pmf { probs: Vec<f64> },
    /// Input covariance, row-major `n x n`.
    Covariance { n: usize, entries: Vec<f64> },
}

impl Witness {
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        match self {
            Witness::Covariance { n, entries } => Some(DMatrix::from_row_slice(*n, *n, entries)),
            Witness::Pmf { .. } => None,
        }
    }

    pub fn pmf(&self) -> Option<&[f64]> {
        match self {
            Witness::Pmf { probs } => Some(probs),
            Witness::Covariance { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MembershipVerdict {
    pub inside: bool,
    /// Whether the verdict is backed by a certificate: a witness for
    /// "inside", a dual bound (discrete) or restart agreement (Gaussian) for
    /// "outside".
    pub certified: bool,
    /// Signed margin achieved by the witness; positive means outside.
    pub margin: f64,
    /// Proven lower bound on the true margin, when one is available.
    pub margin_lower_bound: Option<f64>,
    pub witness: Witness,
    /// Cut attaining the margin at the witness (lowest index on ties).
    pub worst_cut: Cut,
    /// Cut values at the witness for all cuts in binary-counter order.
    pub cut_values: Vec<f64>,
    /// Number of restarts whose margin agreed with the best one.
    pub agreeing_restarts: usize,
}

/// Cut value for a discrete network, input pmf `p` over `X_I` and cut `T`.
pub fn cut_value_discrete(net: &DiscreteNetwork, p: &JointPmf, cut: &Cut) -> f64 {
    let w = marginalize_channel(net, cut);
    let joint = JointPmf::compose(net.input_sizes(), p.probs(), &w)
        .expect("input pmf must match the network's input alphabets");
    conditional_mutual_information(&joint, cut)
}

/// Decides whether `R` lies in the cut-set region of `net`.
pub fn region_margin(net: &Network, rates: &RateMatrix, cfg: &OptimizerConfig) -> MembershipVerdict {
    assert_eq!(net.node_count(), rates.node_count(), "rate matrix size mismatch");
    match net {
        Network::Discrete(d) => DiscreteProblem::new(d, rates).region(cfg),
        Network::Gaussian(g) => GaussianProblem::new(g, rates).region(cfg),
    }
}

/// Membership in the swapped region `cap_T cup_w {R_T <= I_T(w)}`, whose
/// margin `max_T (R_T - max_w I_T(w))` never exceeds the cut-set margin.
pub fn outer_region_margin(net: &Network, rates: &RateMatrix, cfg: &OptimizerConfig) -> MembershipVerdict {
    assert_eq!(net.node_count(), rates.node_count(), "rate matrix size mismatch");
    match net {
        Network::Discrete(d) => DiscreteProblem::new(d, rates).outer(cfg),
        Network::Gaussian(g) => GaussianProblem::new(g, rates).outer(cfg),
    }
}

/// Softmin of cut slacks `s_T = I_T - R_T` and its weights.
fn softmin(slacks: &[f64], mu: f64) -> (f64, Vec<f64>) {
    let m = slacks.iter().cloned().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = slacks.iter().map(|&s| (-(s - m) / mu).exp()).collect();
    let z: f64 = e.iter().sum();
    (m - mu * z.ln(), e.into_iter().map(|v| v / z).collect())
}

/// Index of the largest `R_T - I_T`, lowest index on ties.
fn worst_cut_index(slacks: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in slacks.iter().enumerate() {
        if s < slacks[best] {
            best = i;
        }
    }
    best
}

struct Eval {
    exact: f64,
    smooth: f64,
    grad: Vec<f64>,
}

/// Projected gradient ascent with Armijo backtracking over a decreasing
/// smoothing schedule. Returns the iterate with the best exact objective.
fn ascend<P, E>(mut x: Vec<f64>, project: P, eval: E, iterations: usize, ceiling: f64) -> (Vec<f64>, f64)
where
    P: Fn(&mut [f64]),
    E: Fn(&[f64], f64) -> Eval,
{
    project(&mut x);
    let mut best_x = x.clone();
    let mut best = eval(&x, MU_SCHEDULE[0]).exact;
    for &mu in &MU_SCHEDULE {
        if best >= ceiling {
            break;
        }
        let mut cur = eval(&x, mu);
        let mut step = 1.0;
        for _ in 0..iterations {
            let mut alpha = step;
            let mut moved = false;
            for _ in 0..50 {
                let mut y: Vec<f64> = x.iter().zip(&cur.grad).map(|(a, g)| a + alpha * g).collect();
                project(&mut y);
                let dir: f64 = cur
                    .grad
                    .iter()
                    .zip(y.iter().zip(&x))
                    .map(|(g, (b, a))| g * (b - a))
                    .sum();
                if dir <= 1e-300 {
                    break;
                }
                let next = eval(&y, mu);
                if next.smooth >= cur.smooth + ARMIJO_C * dir {
                    x = y;
                    cur = next;
                    moved = true;
                    break;
                }
                alpha *= 0.5;
            }
            if !moved {
                break;
            }
            step = (alpha * 2.0).min(1e8);
            if cur.exact > best {
                best = cur.exact;
                best_x.clone_from(&x);
                if best >= ceiling {
                    break;
                }
            }
        }
        if cur.exact > best {
            best = cur.exact;
            best_x.clone_from(&x);
        }
    }
    (best_x, best)
}

/// Euclidean projection onto the probability simplex.
pub fn project_simplex(v: &mut [f64]) {
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i + 1) as f64;
        if ui - t > 0.0 {
            theta = t;
        }
    }
    for x in v.iter_mut() {
        *x = (*x - theta).max(0.0);
    }
    let s: f64 = v.iter().sum();
    for x in v.iter_mut() {
        *x /= s;
    }
}

fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

fn dirichlet(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..len).map(|_| rng.sample::<f64, _>(Exp1) + 1e-300).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// One cut's data for the discrete search: the channel `x_I -> y_{T^c}`
/// and the grouping of inputs by `x_{T^c}`.
struct DiscreteCut {
    cut: Cut,
    rate: f64,
    trivial: bool,
    w: ConditionalPmf,
    neg_h: Vec<f64>,
    group: Vec<usize>,
    groups: usize,
}

impl DiscreteCut {
    fn new(net: &DiscreteNetwork, rates: &RateMatrix, cut: Cut) -> Self {
        let w = marginalize_channel(net, &cut);
        let xc = net.input_count();
        let tc = cut.complement_members();
        let tc_sizes: Vec<usize> = tc.iter().map(|&i| net.input_sizes()[i]).collect();
        let group: Vec<usize> = (0..xc)
            .map(|x| {
                let d = net.input_digits(x);
                let k: Vec<usize> = tc.iter().map(|&i| d[i]).collect();
                mixed_radix_index(&k, &tc_sizes)
            })
            .collect();
        let neg_h = (0..xc)
            .map(|x| w.row(x).iter().filter(|&&q| q > 0.0).map(|&q| q * q.ln()).sum())
            .collect();
        DiscreteCut {
            trivial: !cut.is_proper(),
            rate: rates.cut_sum(&cut),
            cut,
            w,
            neg_h,
            group,
            groups: tc_sizes.iter().product(),
        }
    }

    /// Output marginals `m_g(y)` and group masses `p_g`.
    fn marginals(&self, p: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let yc = self.w.output_count();
        let mut m = vec![0.0; self.groups * yc];
        let mut pg = vec![0.0; self.groups];
        for (x, &px) in p.iter().enumerate() {
            if px == 0.0 {
                continue;
            }
            let g = self.group[x];
            pg[g] += px;
            for (mv, &q) in m[g * yc..(g + 1) * yc].iter_mut().zip(self.w.row(x)) {
                *mv += px * q;
            }
        }
        (m, pg)
    }

    fn value(&self, p: &[f64]) -> f64 {
        if self.trivial {
            return 0.0;
        }
        let (m, pg) = self.marginals(p);
        self.value_from(p, &m, &pg)
    }

    fn value_from(&self, p: &[f64], m: &[f64], pg: &[f64]) -> f64 {
        let yc = self.w.output_count();
        let mut v: f64 = p.iter().zip(&self.neg_h).map(|(a, b)| a * b).sum();
        for (g, &mass) in pg.iter().enumerate() {
            if mass == 0.0 {
                continue;
            }
            for &mv in &m[g * yc..(g + 1) * yc] {
                if mv > 0.0 {
                    v -= mv * (mv / mass).ln();
                }
            }
        }
        v.max(0.0)
    }

    /// Value and gradient `d/dp(x) = D(w(.|x) || m_g / p_g)`.
    fn value_grad(&self, p: &[f64]) -> (f64, Vec<f64>) {
        if self.trivial {
            return (0.0, vec![0.0; p.len()]);
        }
        let yc = self.w.output_count();
        let (m, pg) = self.marginals(p);
        let v = self.value_from(p, &m, &pg);
        let grad = (0..p.len())
            .map(|x| {
                let g = self.group[x];
                if pg[g] == 0.0 {
                    return 0.0;
                }
                let mut d = self.neg_h[x];
                for (&q, &mv) in self.w.row(x).iter().zip(&m[g * yc..(g + 1) * yc]) {
                    if q > 0.0 {
                        if mv <= 0.0 {
                            return GRAD_CLAMP;
                        }
                        d -= q * (mv / pg[g]).ln();
                    }
                }
                d.min(GRAD_CLAMP)
            })
            .collect();
        (v, grad)
    }

    /// Capacity bounds of the best sub-channel `x_T -> y_{T^c}` over fixed
    /// `x_{T^c}`, with the maximizing input pmf over `X_I`.
    fn best_subchannel(&self, input_count: usize) -> (f64, f64, Vec<f64>) {
        let mut best: Option<(f64, f64, Vec<f64>)> = None;
        for g in 0..self.groups {
            let members: Vec<usize> = (0..input_count).filter(|&x| self.group[x] == g).collect();
            let rows: Vec<&[f64]> = members.iter().map(|&x| self.w.row(x)).collect();
            let (lo, hi, r) = blahut_arimoto(&rows, 1e-12, 20_000);
            if best.as_ref().is_none_or(|b| hi > b.1) {
                let mut p = vec![0.0; input_count];
                for (&x, &rx) in members.iter().zip(&r) {
                    p[x] = rx;
                }
                best = Some((lo, hi, p));
            }
        }
        best.expect("at least one group")
    }
}

/// Capacity of the channel with the given rows. Returns a lower bound
/// `I(r; W)`, an upper bound `max_x D(W_x || rW)` and the final input pmf.
pub fn blahut_arimoto(rows: &[&[f64]], tol: f64, max_iter: usize) -> (f64, f64, Vec<f64>) {
    let k = rows.len();
    let yc = rows[0].len();
    let mut r = vec![1.0 / k as f64; k];
    let mut lo = 0.0;
    let mut hi = f64::INFINITY;
    let mut best_r = r.clone();
    for _ in 0..max_iter {
        let mut q = vec![0.0; yc];
        for (row, &rx) in rows.iter().zip(&r) {
            for (qv, &w) in q.iter_mut().zip(row.iter()) {
                *qv += rx * w;
            }
        }
        let d: Vec<f64> = rows
            .iter()
            .map(|row| {
                row.iter()
                    .zip(&q)
                    .filter(|(&w, _)| w > 0.0)
                    .map(|(&w, &qv)| w * (w / qv).ln())
                    .sum::<f64>()
            })
            .collect();
        let i_r: f64 = r.iter().zip(&d).map(|(a, b)| a * b).sum();
        let upper = d.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if i_r > lo {
            lo = i_r;
            best_r.clone_from(&r);
        }
        hi = hi.min(upper);
        if hi - lo <= tol {
            break;
        }
        let dmax = upper;
        let mut z = 0.0;
        for (rx, &dx) in r.iter_mut().zip(&d) {
            *rx *= (dx - dmax).exp();
            z += *rx;
        }
        r.iter_mut().for_each(|v| *v /= z);
    }
    (lo.max(0.0), hi.max(0.0), best_r)
}

struct DiscreteProblem<'a> {
    net: &'a DiscreteNetwork,
    cuts: Vec<DiscreteCut>,
}

impl<'a> DiscreteProblem<'a> {
    fn new(net: &'a DiscreteNetwork, rates: &RateMatrix) -> Self {
        let cuts = Cut::all(net.node_count())
            .map(|c| DiscreteCut::new(net, rates, c))
            .collect();
        DiscreteProblem { net, cuts }
    }

    fn slacks(&self, p: &[f64]) -> Vec<f64> {
        self.cuts.iter().map(|c| c.value(p) - c.rate).collect()
    }

    fn eval(&self, p: &[f64], mu: f64) -> Eval {
        let vg: Vec<(f64, Vec<f64>)> = self.cuts.iter().map(|c| c.value_grad(p)).collect();
        let slacks: Vec<f64> = vg.iter().zip(&self.cuts).map(|((v, _), c)| v - c.rate).collect();
        let exact = slacks.iter().cloned().fold(f64::INFINITY, f64::min);
        let (smooth, weights) = softmin(&slacks, mu);
        let mut grad = vec![0.0; p.len()];
        for ((_, g), &wt) in vg.iter().zip(&weights) {
            if wt > 0.0 {
                grad.iter_mut().zip(g).for_each(|(a, b)| *a += wt * b);
            }
        }
        Eval { exact, smooth, grad }
    }

    fn starts(&self, cfg: &OptimizerConfig) -> Vec<Vec<f64>> {
        let xc = self.net.input_count();
        let mut starts = vec![vec![1.0 / xc as f64; xc]];
        for c in self.cuts.iter().filter(|c| !c.trivial && c.rate > 0.0) {
            if starts.len() >= cfg.restarts {
                break;
            }
            starts.push(c.best_subchannel(xc).2);
        }
        let mut r = starts.len();
        while starts.len() < cfg.restarts.max(1) {
            starts.push(dirichlet(&mut restart_rng(cfg.seed, r), xc));
            r += 1;
        }
        starts.truncate(cfg.restarts.max(1));
        starts
    }

    fn region(&self, cfg: &OptimizerConfig) -> MembershipVerdict {
        let starts = self.starts(cfg);
        let runs = map_indexed(starts.len(), |i| {
            ascend(
                starts[i].clone(),
                project_simplex,
                |p, mu| self.eval(p, mu),
                cfg.iterations,
                0.0,
            )
        });
        let (best_i, _) = runs.iter().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, (_, f))| if *f > acc.1 { (i, *f) } else { acc },
        );
        let p = runs[best_i].0.clone();
        let slacks = self.slacks(&p);
        let margin = -slacks.iter().cloned().fold(f64::INFINITY, f64::min);
        let agreeing = runs
            .iter()
            .filter(|(_, f)| (-f - margin).abs() <= cfg.agreement_tol)
            .count();
        let lower = self.dual_lower_bound(&p, cfg.iterations);
        let inside = margin <= cfg.tol;
        MembershipVerdict {
            inside,
            certified: inside || lower > cfg.tol,
            margin,
            margin_lower_bound: Some(lower),
            worst_cut: self.cuts[worst_cut_index(&slacks)].cut,
            cut_values: self.cuts.iter().map(|c| c.value(&p)).collect(),
            witness: Witness::Pmf { probs: p },
            agreeing_restarts: agreeing,
        }
    }

    /// Lower bound on the margin from supergradients at an interior point
    /// near `p`:
    /// `margin >= -min_lambda [sum_T lambda_T (s_T(p') - <g_T, p'>) + max_x sum_T lambda_T g_T(x)]`.
    fn dual_lower_bound(&self, p: &[f64], iterations: usize) -> f64 {
        let xc = p.len();
        let pp: Vec<f64> = p
            .iter()
            .map(|&v| (1.0 - INTERIOR_MIX) * v + INTERIOR_MIX / xc as f64)
            .collect();
        let mut c = Vec::with_capacity(self.cuts.len());
        let mut g = Vec::with_capacity(self.cuts.len());
        for cut in &self.cuts {
            let (v, grad) = cut.value_grad(&pp);
            let dot: f64 = grad.iter().zip(&pp).map(|(a, b)| a * b).sum();
            c.push(v - cut.rate - dot);
            g.push(grad);
        }
        let k = self.cuts.len();
        let dual = |lam: &[f64]| -> f64 {
            let lin: f64 = lam.iter().zip(&c).map(|(a, b)| a * b).sum();
            let top = (0..xc)
                .map(|x| lam.iter().zip(&g).map(|(l, gt)| l * gt[x]).sum::<f64>())
                .fold(f64::NEG_INFINITY, f64::max);
            lin + top
        };
        let mut candidates: Vec<Vec<f64>> = (0..k)
            .map(|t| {
                let mut e = vec![0.0; k];
                e[t] = 1.0;
                e
            })
            .collect();
        let slacks: Vec<f64> = self.cuts.iter().map(|cut| cut.value(&pp) - cut.rate).collect();
        for &mu in &MU_SCHEDULE {
            candidates.push(softmin(&slacks, mu).1);
        }
        let mut best_lam = candidates[0].clone();
        let mut best = f64::INFINITY;
        for lam in candidates {
            let u = dual(&lam);
            if u < best {
                best = u;
                best_lam = lam;
            }
        }
        // Refine by descending the log-sum-exp smoothing of the max over x,
        // which upper-bounds the exact dual; the exact value is tracked.
        let smoothed = |lam: &[f64], nu: f64| -> Eval {
            let lin: f64 = lam.iter().zip(&c).map(|(a, b)| a * b).sum();
            let vals: Vec<f64> = (0..xc)
                .map(|x| lam.iter().zip(&g).map(|(l, gt)| l * gt[x]).sum::<f64>())
                .collect();
            let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = vals.iter().map(|&v| ((v - top) / nu).exp()).collect();
            let z: f64 = e.iter().sum();
            let pi: Vec<f64> = e.iter().map(|v| v / z).collect();
            let grad: Vec<f64> = (0..k)
                .map(|t| -(c[t] + pi.iter().zip(&g[t]).map(|(a, b)| a * b).sum::<f64>()))
                .collect();
            Eval {
                exact: -(lin + top),
                smooth: -(lin + top + nu * z.ln()),
                grad,
            }
        };
        let (lam, neg_u) = ascend(best_lam, project_simplex, smoothed, iterations, f64::INFINITY);
        let u = dual(&lam).min(-neg_u);
        0.0 - best.min(u)
    }

    fn outer(&self, cfg: &OptimizerConfig) -> MembershipVerdict {
        let xc = self.net.input_count();
        let per_cut: Vec<(f64, f64, Vec<f64>)> = self
            .cuts
            .iter()
            .map(|c| {
                if c.trivial {
                    (0.0, 0.0, vec![1.0 / xc as f64; xc])
                } else {
                    c.best_subchannel(xc)
                }
            })
            .collect();
        // Upper capacity bounds make this margin a lower bound on the true
        // outer margin.
        let slacks: Vec<f64> = per_cut
            .iter()
            .zip(&self.cuts)
            .map(|((_, hi, _), c)| hi - c.rate)
            .collect();
        let slacks_lo: Vec<f64> = per_cut
            .iter()
            .zip(&self.cuts)
            .map(|((lo, _, _), c)| lo - c.rate)
            .collect();
        let margin = -slacks.iter().cloned().fold(f64::INFINITY, f64::min);
        let margin_hi = -slacks_lo.iter().cloned().fold(f64::INFINITY, f64::min);
        let worst = worst_cut_index(&slacks);
        let inside = margin <= cfg.tol;
        MembershipVerdict {
            inside,
            certified: if inside { margin_hi <= cfg.tol } else { true },
            margin,
            margin_lower_bound: Some(margin),
            worst_cut: self.cuts[worst].cut,
            cut_values: per_cut.iter().map(|(_, hi, _)| *hi).collect(),
            witness: Witness::Pmf {
                probs: per_cut[worst].2.clone(),
            },
            agreeing_restarts: 1,
        }
    }
}

struct GaussianProblem<'a> {
    net: &'a GaussianNetwork,
    terms: Vec<GaussianCutTerm>,
    rates: Vec<f64>,
    cuts: Vec<Cut>,
}

/// Packs the lower triangle of `L` row by row.
fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

fn l_from_params(n: usize, theta: &[f64]) -> DMatrix<f64> {
    let mut l = DMatrix::zeros(n, n);
    let mut k = 0;
    for i in 0..n {
        for j in 0..=i {
            l[(i, j)] = theta[k];
            k += 1;
        }
    }
    l
}

fn params_from_l(l: &DMatrix<f64>) -> Vec<f64> {
    let n = l.nrows();
    let mut theta = Vec::with_capacity(tri_len(n));
    for i in 0..n {
        for j in 0..=i {
            theta.push(l[(i, j)]);
        }
    }
    theta
}

fn covariance_from_params(n: usize, theta: &[f64]) -> DMatrix<f64> {
    let l = l_from_params(n, theta);
    &l * l.transpose()
}

impl<'a> GaussianProblem<'a> {
    fn new(net: &'a GaussianNetwork, rates: &RateMatrix) -> Self {
        let cuts: Vec<Cut> = Cut::all(net.node_count()).collect();
        GaussianProblem {
            net,
            terms: cuts.iter().map(|c| GaussianCutTerm::new(net, c)).collect(),
            rates: cuts.iter().map(|c| rates.cut_sum(c)).collect(),
            cuts,
        }
    }

    /// Scales each row of `L` so that `diag(LL^T) <= P`; this is the
    /// Euclidean projection onto a product of balls.
    fn project(&self, theta: &mut [f64]) {
        let n = self.net.node_count();
        let mut k = 0;
        for i in 0..n {
            let row = &mut theta[k..k + i + 1];
            let norm2: f64 = row.iter().map(|v| v * v).sum();
            let cap = self.net.power()[i];
            if norm2 > cap {
                let s = (cap / norm2).sqrt();
                row.iter_mut().for_each(|v| *v *= s);
            }
            k += i + 1;
        }
    }

    fn slacks_for(&self, theta: &[f64], select: &[usize]) -> Vec<f64> {
        let k = covariance_from_params(self.net.node_count(), theta);
        select
            .iter()
            .map(|&t| self.terms[t].value(&k) - self.rates[t])
            .collect()
    }

    fn eval(&self, theta: &[f64], mu: f64, select: &[usize]) -> Eval {
        let slacks = self.slacks_for(theta, select);
        let exact = slacks.iter().cloned().fold(f64::INFINITY, f64::min);
        let smooth = softmin(&slacks, mu).0;
        let h = 1e-6;
        let mut probe = theta.to_vec();
        let grad = (0..theta.len())
            .map(|i| {
                let orig = probe[i];
                probe[i] = orig + h;
                let up = softmin(&self.slacks_for(&probe, select), mu).0;
                probe[i] = orig - h;
                let down = softmin(&self.slacks_for(&probe, select), mu).0;
                probe[i] = orig;
                (up - down) / (2.0 * h)
            })
            .collect();
        Eval { exact, smooth, grad }
    }

    fn starts(&self, cfg: &OptimizerConfig) -> Vec<Vec<f64>> {
        let n = self.net.node_count();
        let sqrt_p: Vec<f64> = self.net.power().iter().map(|p| p.sqrt()).collect();
        let indep = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(sqrt_p.clone()));
        let mut coherent = DMatrix::zeros(n, n);
        for i in 0..n {
            coherent[(i, 0)] = sqrt_p[i];
        }
        let mut starts = vec![params_from_l(&indep), params_from_l(&coherent)];
        let mut r = starts.len();
        while starts.len() < cfg.restarts.max(1) {
            let mut rng = restart_rng(cfg.seed, r);
            let mut l = DMatrix::zeros(n, n);
            for i in 0..n {
                for j in 0..=i {
                    l[(i, j)] = rng.sample::<f64, _>(StandardNormal);
                }
                let norm = l.row(i).norm().max(1e-12);
                let target = sqrt_p[i] * (0.5 + 0.5 * rng.random::<f64>());
                for j in 0..=i {
                    l[(i, j)] *= target / norm;
                }
            }
            starts.push(params_from_l(&l));
            r += 1;
        }
        starts.truncate(cfg.restarts.max(1));
        starts
    }

    fn run(&self, cfg: &OptimizerConfig, select: &[usize], ceiling: f64) -> Vec<(Vec<f64>, f64)> {
        let starts = self.starts(cfg);
        map_indexed(starts.len(), |i| {
            ascend(
                starts[i].clone(),
                |t| self.project(t),
                |t, mu| self.eval(t, mu, select),
                cfg.iterations,
                ceiling,
            )
        })
    }

    fn best(runs: &[(Vec<f64>, f64)]) -> usize {
        runs.iter()
            .enumerate()
            .fold(
                (0, f64::NEG_INFINITY),
                |acc, (i, (_, f))| if *f > acc.1 { (i, *f) } else { acc },
            )
            .0
    }

    fn witness(&self, theta: &[f64]) -> (DMatrix<f64>, Witness) {
        let n = self.net.node_count();
        let k = covariance_from_params(n, theta);
        let w = Witness::Covariance {
            n,
            entries: to_row_major(&k),
        };
        (k, w)
    }

    fn region(&self, cfg: &OptimizerConfig) -> MembershipVerdict {
        let all: Vec<usize> = (0..self.cuts.len()).collect();
        let runs = self.run(cfg, &all, 0.0);
        let b = Self::best(&runs);
        let (k, witness) = self.witness(&runs[b].0);
        let values: Vec<f64> = self.terms.iter().map(|t| t.value(&k)).collect();
        let slacks: Vec<f64> = values.iter().zip(&self.rates).map(|(v, r)| v - r).collect();
        let margin = -slacks.iter().cloned().fold(f64::INFINITY, f64::min);
        let agreeing = runs
            .iter()
            .filter(|(_, f)| (-f - margin).abs() <= cfg.agreement_tol)
            .count();
        let inside = margin <= cfg.tol;
        MembershipVerdict {
            inside,
            certified: inside || agreeing >= runs.len().min(3),
            margin,
            margin_lower_bound: None,
            worst_cut: self.cuts[worst_cut_index(&slacks)],
            cut_values: values,
            witness,
            agreeing_restarts: agreeing,
        }
    }

    fn outer(&self, cfg: &OptimizerConfig) -> MembershipVerdict {
        let mut per_cut = Vec::with_capacity(self.cuts.len());
        let mut agree_all = true;
        for (t, term) in self.terms.iter().enumerate() {
            if term.is_trivial() {
                per_cut.push((0.0, None));
                continue;
            }
            let runs = self.run(cfg, &[t], f64::INFINITY);
            let b = Self::best(&runs);
            let best = runs[b].1;
            let agreeing = runs
                .iter()
                .filter(|(_, f)| (best - f).abs() <= cfg.agreement_tol)
                .count();
            agree_all &= agreeing >= runs.len().min(3);
            per_cut.push((best + self.rates[t], Some(runs[b].0.clone())));
        }
        let slacks: Vec<f64> = per_cut.iter().zip(&self.rates).map(|((v, _), r)| v - r).collect();
        let margin = -slacks.iter().cloned().fold(f64::INFINITY, f64::min);
        let worst = worst_cut_index(&slacks);
        let theta = per_cut[worst]
            .1
            .clone()
            .unwrap_or_else(|| self.starts(cfg).swap_remove(0));
        let (_, witness) = self.witness(&theta);
        let inside = margin <= cfg.tol;
        MembershipVerdict {
            inside,
            certified: agree_all,
            margin,
            margin_lower_bound: None,
            worst_cut: self.cuts[worst],
            cut_values: per_cut.iter().map(|(v, _)| *v).collect(),
            witness,
            agreeing_restarts: if agree_all { cfg.restarts } else { 0 },
        }
    }
}

/// Cut values of all `2^N` cuts at input pmf `p`, in binary-counter order.
pub fn discrete_cut_values(net: &DiscreteNetwork, p: &[f64]) -> Vec<f64> {
    let zero = RateMatrix::zeros(net.node_count());
    DiscreteProblem::new(net, &zero).slacks(p)
}

/// Digits of input index `x` (re-exported convenience for witnesses).
pub fn witness_symbol(net: &DiscreteNetwork, x: usize) -> Vec<usize> {
    mixed_radix_digits(x, net.input_sizes())
}
