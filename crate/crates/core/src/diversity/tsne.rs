use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::common::keyed_hash;
use crate::{Error, Result};

pub const MIN_POINTS: usize = 16;
pub const MAX_POINTS: usize = 2000;
pub const EXAGGERATION: f64 = 12.0;
const LEARNING_RATE: f64 = 200.0;
const MIN_GAIN: f64 = 0.01;

#[derive(Clone, Debug, PartialEq)]
pub struct Projection {
    pub points: Vec<[f64; 2]>,
    /// KL divergence of the unexaggerated objective after each iteration.
    pub kl_history: Vec<f64>,
    /// Index of the first iteration without early exaggeration.
    pub exaggeration_end: usize,
}

fn sq_dists(x: &[Vec<f64>]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = x[i].iter().zip(&x[j]).map(|(a, b)| (a - b) * (a - b)).sum();
            d[i * n + j] = v;
            d[j * n + i] = v;
        }
    }
    d
}

/// Symmetrized joint affinities with the per-point bandwidth set by bisection
/// so that each conditional distribution has the requested perplexity.
fn joint_affinities(d: &[f64], n: usize, perplexity: f64) -> Vec<f64> {
    let target = perplexity.ln();
    let mut p = vec![0.0; n * n];
    let mut row = vec![0.0; n];
    for i in 0..n {
        let (mut beta, mut lo, mut hi) = (1.0f64, 0.0f64, f64::INFINITY);
        let di = &d[i * n..(i + 1) * n];
        let dmin = di.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, &v)| v).fold(f64::INFINITY, f64::min);
        for _ in 0..100 {
            let mut sum = 0.0;
            let mut dot = 0.0;
            for j in 0..n {
                row[j] = if j == i { 0.0 } else { (-(di[j] - dmin) * beta).exp() };
                sum += row[j];
                dot += row[j] * (di[j] - dmin);
            }
            let entropy = sum.ln() + beta * dot / sum;
            let diff = entropy - target;
            if diff.abs() < 1e-10 {
                break;
            }
            if diff > 0.0 {
                lo = beta;
                beta = if hi.is_finite() { (beta + hi) / 2.0 } else { beta * 2.0 };
            } else {
                hi = beta;
                beta = (beta + lo) / 2.0;
            }
        }
        let sum: f64 = row.iter().sum();
        for j in 0..n {
            p[i * n + j] = row[j] / sum;
        }
    }
    let mut joint = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[i * n + j] = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }
    joint
}

/// Student-t kernel numerators `1 / (1 + |y_i - y_j|^2)` and their sum.
fn kernel(y: &[[f64; 2]]) -> (Vec<f64>, f64) {
    let n = y.len();
    let mut num = vec![0.0; n * n];
    let mut z = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let dx = y[i][0] - y[j][0];
            let dy = y[i][1] - y[j][1];
            let v = 1.0 / (1.0 + dx * dx + dy * dy);
            num[i * n + j] = v;
            num[j * n + i] = v;
            z += 2.0 * v;
        }
    }
    (num, z)
}

fn kl(p: &[f64], y: &[[f64; 2]]) -> f64 {
    let n = y.len();
    let (num, z) = kernel(y);
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let q = (num[i * n + j] / z).max(1e-12);
                s += p[i * n + j] * (p[i * n + j] / q).ln();
            }
        }
    }
    s
}

fn gradient(p: &[f64], y: &[[f64; 2]], exaggeration: f64) -> Vec<[f64; 2]> {
    let n = y.len();
    let (num, z) = kernel(y);
    let mut g = vec![[0.0; 2]; n];
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let w = num[i * n + j];
            let m = 4.0 * (exaggeration * p[i * n + j] - w / z) * w;
            g[i][0] += m * (y[i][0] - y[j][0]);
            g[i][1] += m * (y[i][1] - y[j][1]);
        }
    }
    g
}

/// One momentum step with per-coordinate adaptive gains.
fn descend(
    y: &[[f64; 2]],
    g: &[[f64; 2]],
    gains: &mut [[f64; 2]],
    velocity: &[[f64; 2]],
    momentum: f64,
    lr: f64,
) -> (Vec<[f64; 2]>, Vec<[f64; 2]>) {
    let mut new_v = velocity.to_vec();
    let mut new_y = y.to_vec();
    for i in 0..y.len() {
        for k in 0..2 {
            let same_sign = (g[i][k] > 0.0) == (velocity[i][k] > 0.0);
            gains[i][k] = if same_sign { gains[i][k] * 0.8 } else { gains[i][k] + 0.2 }.max(MIN_GAIN);
            new_v[i][k] = momentum * velocity[i][k] - lr * gains[i][k] * g[i][k];
            new_y[i][k] += new_v[i][k];
        }
    }
    (new_y, new_v)
}

/// Exact t-SNE to two dimensions.
///
/// Early exaggeration (x12) covers the first quarter of the iterations. After
/// that, a step that would raise the KL divergence is rejected: the learning
/// rate halves and the momentum buffer is cleared, so the objective never
/// increases over the remaining iterations.
pub fn project_embeddings(vectors: &[Vec<f64>], perplexity: f64, iterations: usize, seed: u64) -> Result<Projection> {
    let n = vectors.len();
    if n < MIN_POINTS {
        return Err(Error::TooFewPoints { got: n, min: MIN_POINTS });
    }
    if n > MAX_POINTS {
        return Err(Error::TooManyPoints { got: n, max: MAX_POINTS });
    }
    if !(perplexity >= 5.0 && perplexity < (n as f64 - 1.0) / 3.0) {
        return Err(Error::PerplexityInfeasible { perplexity, n });
    }
    let dim = vectors[0].len();
    if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
        return Err(Error::DimensionMismatch(dim, v.len()));
    }
    if vectors.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Config("embedding vectors must be finite".into()));
    }

    // Work in a canonical (lexicographic) point order and map back at the end,
    // so permuting the input permutes the output exactly.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        vectors[a].iter().zip(&vectors[b]).map(|(x, y)| x.total_cmp(y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let vectors: Vec<Vec<f64>> = order.iter().map(|&i| vectors[i].clone()).collect();
    let p = joint_affinities(&sq_dists(&vectors), n, perplexity);

    let normal = Normal::new(0.0, 1e-2).expect("valid std");
    let mut y: Vec<[f64; 2]> = vectors
        .iter()
        .map(|v| {
            let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
            let mut rng = ChaCha8Rng::seed_from_u64(keyed_hash(seed, &bytes));
            [normal.sample(&mut rng), normal.sample(&mut rng)]
        })
        .collect();

    let exaggeration_end = iterations / 4;
    let mut velocity = vec![[0.0; 2]; n];
    let mut gains = vec![[1.0; 2]; n];
    let mut lr = LEARNING_RATE;
    let mut history = Vec::with_capacity(iterations);
    let mut current_kl = f64::INFINITY;

    for it in 0..iterations {
        let exaggerated = it < exaggeration_end;
        let ex = if exaggerated { EXAGGERATION } else { 1.0 };
        let momentum = if exaggerated { 0.5 } else { 0.8 };
        let g = gradient(&p, &y, ex);

        if exaggerated {
            let (ny, nv) = descend(&y, &g, &mut gains, &velocity, momentum, lr);
            y = ny;
            velocity = nv;
            history.push(kl(&p, &y));
            continue;
        }

        if !current_kl.is_finite() {
            current_kl = kl(&p, &y);
        }
        let mut accepted = false;
        for _ in 0..30 {
            let mut trial_gains = gains.clone();
            let (ny, nv) = descend(&y, &g, &mut trial_gains, &velocity, momentum, lr);
            let new_kl = kl(&p, &ny);
            if new_kl <= current_kl {
                y = ny;
                velocity = nv;
                gains = trial_gains;
                current_kl = new_kl;
                accepted = true;
                break;
            }
            lr *= 0.5;
            velocity.iter_mut().for_each(|v| *v = [0.0; 2]);
        }
        if !accepted {
            velocity.iter_mut().for_each(|v| *v = [0.0; 2]);
        }
        history.push(current_kl);
    }

    // Centre the layout; translation does not change the objective.
    let (mx, my) = y.iter().fold((0.0, 0.0), |(a, b), p| (a + p[0], b + p[1]));
    let (mx, my) = (mx / n as f64, my / n as f64);
    let mut points = vec![[0.0; 2]; n];
    for (k, &i) in order.iter().enumerate() {
        points[i] = [y[k][0] - mx, y[k][1] - my];
    }
    Ok(Projection { points, kl_history: history, exaggeration_end })
}
