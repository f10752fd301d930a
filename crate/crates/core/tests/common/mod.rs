//! Oracles shared by the integration tests.
#![allow(dead_code)]

use cutset_core::model::{mixed_radix_digits, mixed_radix_index};
use cutset_core::{marginalize_channel, Cut, DiscreteNetwork};

pub fn pmf(weights: &[f64]) -> Vec<f64> {
    let s: f64 = weights.iter().sum();
    weights.iter().map(|w| w / s).collect()
}

/// Random network with the given alphabets and strictly positive entries.
pub fn network(inputs: Vec<usize>, outputs: Vec<usize>, weights: &[f64]) -> DiscreteNetwork {
    let xc: usize = inputs.iter().product();
    let yc: usize = outputs.iter().product();
    let mut channel = Vec::with_capacity(xc * yc);
    for x in 0..xc {
        channel.extend(pmf(&(0..yc)
            .map(|y| weights[(x * yc + y) % weights.len()] + 0.01 * (y + 1) as f64)
            .collect::<Vec<_>>()));
    }
    DiscreteNetwork::new(inputs, outputs, channel).unwrap()
}

/// `I(X_T; Y | X_Tc)` by expanding `sum p log(p(x,y) p(x_Tc) / (p(x_Tc,y) p(x)))`.
pub fn cmi_oracle(net: &DiscreteNetwork, p: &[f64], cut: &Cut) -> f64 {
    let w = marginalize_channel(net, cut);
    let tc = cut.complement_members();
    let xs = net.input_sizes();
    let yc = w.output_count();
    let tc_sizes: Vec<usize> = tc.iter().map(|&i| xs[i]).collect();
    let tc_count: usize = tc_sizes.iter().product();
    let key = |x: usize| -> usize {
        let d = mixed_radix_digits(x, xs);
        let sub: Vec<usize> = tc.iter().map(|&i| d[i]).collect();
        mixed_radix_index(&sub, &tc_sizes)
    };
    let mut p_tc = vec![0.0; tc_count];
    let mut p_tc_y = vec![0.0; tc_count * yc];
    for x in 0..p.len() {
        p_tc[key(x)] += p[x];
        for y in 0..yc {
            p_tc_y[key(x) * yc + y] += p[x] * w.row(x)[y];
        }
    }
    let mut i = 0.0;
    for x in 0..p.len() {
        for y in 0..yc {
            let pxy = p[x] * w.row(x)[y];
            if pxy > 0.0 {
                i += pxy * (pxy * p_tc[key(x)] / (p_tc_y[key(x) * yc + y] * p[x])).ln();
            }
        }
    }
    i
}
