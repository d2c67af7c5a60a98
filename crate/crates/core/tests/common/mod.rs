//! Independent reference implementations shared by the integration tests and
//! the acceptance binary.
#![allow(dead_code)]

use forage::mlp::{log_softmax, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-5;

/// Plain triple-loop forward pass reading the flat parameter vector directly.
pub fn dense_forward(net: &Mlp, x: &[f64]) -> Vec<f64> {
    let sizes = net.sizes();
    let p = net.params();
    let mut offset = 0;
    let mut act = x.to_vec();
    for l in 0..3 {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &p[offset..offset + n_in * n_out];
        let b = &p[offset + n_in * n_out..offset + n_in * n_out + n_out];
        offset += n_in * n_out + n_out;
        let mut next = vec![0.0; n_out];
        for o in 0..n_out {
            let mut s = b[o];
            for i in 0..n_in {
                s += w[o * n_in + i] * act[i];
            }
            next[o] = if l < 2 { s.max(0.0) } else { s };
        }
        act = next;
    }
    act
}

/// Scalar losses of the network output used for gradient checking.
#[derive(Debug, Clone, Copy)]
pub enum Loss {
    /// `sum_k w_k out_k`
    Linear,
    /// `0.5 sum_k (out_k - t_k)^2`
    Squared,
    /// `-log softmax(out)[a] * adv - beta * H`
    PolicyGradient,
}

pub struct Probe {
    pub input: Vec<f64>,
    pub weights: Vec<f64>,
    pub action: usize,
    pub advantage: f64,
}

pub fn loss_value(loss: Loss, out: &[f64], probe: &Probe) -> f64 {
    match loss {
        Loss::Linear => out.iter().zip(&probe.weights).map(|(o, w)| o * w).sum(),
        Loss::Squared => out.iter().zip(&probe.weights).map(|(o, t)| 0.5 * (o - t).powi(2)).sum(),
        Loss::PolicyGradient => {
            let lp = log_softmax(out).unwrap();
            let h: f64 = -lp.iter().map(|l| l.exp() * l).sum::<f64>();
            -lp[probe.action] * probe.advantage - 0.01 * h
        }
    }
}

/// dL/dout written out by hand for each loss.
pub fn loss_grad(loss: Loss, out: &[f64], probe: &Probe) -> Vec<f64> {
    match loss {
        Loss::Linear => probe.weights.clone(),
        Loss::Squared => out.iter().zip(&probe.weights).map(|(o, t)| o - t).collect(),
        Loss::PolicyGradient => {
            let lp = log_softmax(out).unwrap();
            let pi: Vec<f64> = lp.iter().map(|l| l.exp()).collect();
            let h: f64 = -pi.iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>();
            (0..out.len())
                .map(|k| {
                    let ind = if k == probe.action { 1.0 } else { 0.0 };
                    -probe.advantage * (ind - pi[k]) + 0.01 * pi[k] * (lp[k] + h)
                })
                .collect()
        }
    }
}

/// Largest relative error between backprop and central differences over all
/// parameters of `net` for one probe.
pub fn max_fd_relative_error(net: &Mlp, loss: Loss, probe: &Probe) -> f64 {
    let cache = net.forward(&probe.input).unwrap();
    let d_out = loss_grad(loss, &cache.output, probe);
    let analytic = net.backward(&cache, &d_out).unwrap();
    let mut worst: f64 = 0.0;
    let mut work = net.clone();
    for i in 0..net.num_params() {
        let orig = net.params()[i];
        work.update_params(|p| p[i] = orig + FD_STEP);
        let plus = loss_value(loss, &dense_forward(&work, &probe.input), probe);
        work.update_params(|p| p[i] = orig - FD_STEP);
        let minus = loss_value(loss, &dense_forward(&work, &probe.input), probe);
        work.update_params(|p| p[i] = orig);
        let numeric = (plus - minus) / (2.0 * FD_STEP);
        let a = analytic.as_slice()[i];
        let scale = a.abs().max(numeric.abs()).max(1e-7);
        worst = worst.max((a - numeric).abs() / scale);
    }
    worst
}

/// Five random networks of mixed widths, each checked under every loss.
pub fn gradient_check_suite() -> f64 {
    let shapes: [(usize, [usize; 2], usize); 5] = [
        (6, [64, 64], 3),
        (6, [64, 64], 1),
        (3, [8, 5], 2),
        (1, [4, 4], 3),
        (5, [16, 32], 4),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(20240611);
    let mut worst: f64 = 0.0;
    for (inputs, hidden, outputs) in shapes {
        let mut net = Mlp::init_orthogonal_with_hidden(inputs, hidden, outputs, 1.0, &mut rng);
        // non-zero biases so every layer's bias path is exercised
        net.update_params(|p| p.iter_mut().for_each(|v| *v += rng.random_range(-0.1..0.1)));
        for loss in [Loss::Linear, Loss::Squared, Loss::PolicyGradient] {
            let probe = Probe {
                input: (0..inputs).map(|_| rng.random_range(-1.0..1.0)).collect(),
                weights: (0..outputs).map(|_| rng.random_range(-1.0..1.0)).collect(),
                action: rng.random_range(0..outputs),
                advantage: rng.random_range(-2.0..2.0),
            };
            worst = worst.max(max_fd_relative_error(&net, loss, &probe));
        }
    }
    worst
}

/// Determinant and adjugate inverse of a 3x3 matrix.
pub fn invert3(m: [[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let c = |r0: usize, r1: usize, c0: usize, c1: usize| m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0];
    let cof = [
        [c(1, 2, 1, 2), -c(1, 2, 0, 2), c(1, 2, 0, 1)],
        [-c(0, 2, 1, 2), c(0, 2, 0, 2), -c(0, 2, 0, 1)],
        [c(0, 1, 1, 2), -c(0, 1, 0, 2), c(0, 1, 0, 1)],
    ];
    let det = m[0][0] * cof[0][0] + m[0][1] * cof[0][1] + m[0][2] * cof[0][2];
    let mut inv = [[0.0; 3]; 3];
    for (r, row) in inv.iter_mut().enumerate() {
        for (c, v) in row.iter_mut().enumerate() {
            *v = cof[c][r] / det;
        }
    }
    inv
}

/// `beta = (X'X)^-1 X'y`, `se_j = sqrt(sigma^2 [(X'X)^-1]_jj)` with
/// `X = [1, x1, x2]`.
pub fn normal_equations(x1: &[f64], x2: &[f64], y: &[f64]) -> ([f64; 3], [f64; 3]) {
    let n = y.len();
    let rows: Vec<[f64; 3]> = (0..n).map(|i| [1.0, x1[i], x2[i]]).collect();
    let mut xtx = [[0.0; 3]; 3];
    let mut xty = [0.0; 3];
    for (row, yi) in rows.iter().zip(y) {
        for a in 0..3 {
            xty[a] += row[a] * yi;
            for b in 0..3 {
                xtx[a][b] += row[a] * row[b];
            }
        }
    }
    let inv = invert3(xtx);
    let mut beta = [0.0; 3];
    for a in 0..3 {
        beta[a] = (0..3).map(|b| inv[a][b] * xty[b]).sum();
    }
    let rss: f64 = rows
        .iter()
        .zip(y)
        .map(|(row, yi)| (yi - (0..3).map(|a| row[a] * beta[a]).sum::<f64>()).powi(2))
        .sum();
    let sigma2 = rss / (n - 3) as f64;
    let se = [0, 1, 2].map(|j| (sigma2 * inv[j][j]).sqrt());
    (beta, se)
}

/// Relative difference with an absolute floor of 1.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
