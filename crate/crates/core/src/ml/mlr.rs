use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

/// Per-feature z-scoring fitted on training rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &[Vec<f64>]) -> Self {
        let d = x.first().map_or(0, Vec::len);
        let n = x.len().max(1) as f64;
        let mut mean = vec![0.0; d];
        for row in x {
            for (m, v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut sd = vec![0.0; d];
        for row in x {
            for ((s, v), m) in sd.iter_mut().zip(row).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        sd.iter_mut().for_each(|s| *s = (*s / n).sqrt());
        Self { mean, sd }
    }

    /// Features with zero training spread map to 0.
    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                row.iter()
                    .zip(self.mean.iter().zip(&self.sd))
                    .map(|(v, (m, s))| if *s > 0.0 { (v - m) / s } else { 0.0 })
                    .collect()
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MlrParams {
    /// L2 penalty `½·strength·‖W‖²` on the weights (biases unpenalized).
    pub l2_strength: f64,
    pub grad_tol: f64,
    pub max_iter: usize,
}

impl Default for MlrParams {
    fn default() -> Self {
        Self {
            l2_strength: 1.0,
            grad_tol: 1e-6,
            max_iter: 500,
        }
    }
}

/// Softmax classifier; `weights[k]` is the coefficient row of class `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlrModel {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

impl MlrModel {
    pub fn n_classes(&self) -> usize {
        self.biases.len()
    }

    fn logits(&self, row: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| b + w.iter().zip(row).map(|(a, x)| a * x).sum::<f64>())
            .collect()
    }

    pub fn predict_proba(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter()
            .map(|row| {
                let mut z = self.logits(row);
                softmax_in_place(&mut z);
                z
            })
            .collect()
    }

    /// Arg-max class; ties go to the lower class index.
    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<usize> {
        x.iter()
            .map(|row| {
                let z = self.logits(row);
                let mut best = 0;
                for k in 1..z.len() {
                    if z[k] > z[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

/// Flat parameter vector: `K` rows of `D` weights followed by `K` biases.
struct Problem<'a> {
    x: &'a [Vec<f64>],
    y: &'a [usize],
    k: usize,
    d: usize,
    l2: f64,
}

impl Problem<'_> {
    fn loss(&self, theta: &[f64]) -> f64 {
        self.eval(theta, None)
    }

    fn eval(&self, theta: &[f64], mut grad: Option<&mut [f64]>) -> f64 {
        let (k, d) = (self.k, self.d);
        let (w, b) = theta.split_at(k * d);
        let mut loss = 0.5 * self.l2 * w.iter().map(|v| v * v).sum::<f64>();
        if let Some(g) = grad.as_deref_mut() {
            for (gi, wi) in g[..k * d].iter_mut().zip(w) {
                *gi = self.l2 * wi;
            }
            g[k * d..].fill(0.0);
        }
        let mut z = vec![0.0; k];
        for (row, &label) in self.x.iter().zip(self.y) {
            for c in 0..k {
                z[c] = b[c] + w[c * d..(c + 1) * d].iter().zip(row).map(|(a, v)| a * v).sum::<f64>();
            }
            let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
            loss += lse - z[label];
            if let Some(g) = grad.as_deref_mut() {
                for c in 0..k {
                    let resid = (z[c] - lse).exp() - if c == label { 1.0 } else { 0.0 };
                    for (gi, v) in g[c * d..(c + 1) * d].iter_mut().zip(row) {
                        *gi += resid * v;
                    }
                    g[k * d + c] += resid;
                }
            }
        }
        loss
    }
}

/// Fits a softmax regression by full-batch gradient descent with Armijo
/// backtracking, starting from zero. Labels must lie in `0..n_classes`.
pub fn train_mlr(x: &[Vec<f64>], y: &[usize], n_classes: usize, params: &MlrParams) -> MlrModel {
    let d = x.first().map_or(0, Vec::len);
    let k = n_classes;
    let problem = Problem {
        x,
        y,
        k,
        d,
        l2: params.l2_strength,
    };
    let mut theta = vec![0.0; k * d + k];
    let mut grad = vec![0.0; theta.len()];
    let mut trial = vec![0.0; theta.len()];
    let mut loss = problem.eval(&theta, Some(&mut grad));
    let mut step = 1.0 / (x.len().max(1) as f64);
    let mut converged = false;
    let mut iterations = 0;
    while iterations < params.max_iter {
        let gmax = grad.iter().fold(0.0f64, |m, g| m.max(g.abs()));
        if gmax < params.grad_tol {
            converged = true;
            break;
        }
        iterations += 1;
        let g2: f64 = grad.iter().map(|g| g * g).sum();
        let mut accepted = false;
        for _ in 0..60 {
            for ((t, th), g) in trial.iter_mut().zip(&theta).zip(&grad) {
                *t = th - step * g;
            }
            let new_loss = problem.loss(&trial);
            if new_loss <= loss - 0.5 * step * g2 {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if !accepted {
            break;
        }
        core::mem::swap(&mut theta, &mut trial);
        loss = problem.eval(&theta, Some(&mut grad));
        step *= 2.0;
    }
    if !converged {
        converged = grad.iter().fold(0.0f64, |m, g| m.max(g.abs())) < params.grad_tol;
    }
    let (w, b) = theta.split_at(k * d);
    MlrModel {
        weights: w.chunks(d.max(1)).take(k).map(<[f64]>::to_vec).collect(),
        biases: b.to_vec(),
        converged,
        iterations,
    }
}

/// Feature indices by descending L2 norm of their weight column; ties keep
/// the lower index first.
pub fn rank_features(model: &MlrModel) -> Vec<usize> {
    let d = model.weights.first().map_or(0, Vec::len);
    let norms: Vec<f64> = (0..d)
        .map(|j| model.weights.iter().map(|w| w[j] * w[j]).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| norms[b].total_cmp(&norms[a]).then(a.cmp(&b)));
    order
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ml::accuracy;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn blobs(per_class: usize, sigma: f64, seed: u64) -> (Vec<Vec<f64>>, Vec<usize>) {
        let centres = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0]];
        let noise = Normal::new(0.0, sigma).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for (c, centre) in centres.iter().enumerate() {
            for _ in 0..per_class {
                x.push(centre.iter().map(|m| m + noise.sample(&mut rng)).collect());
                y.push(c);
            }
        }
        (x, y)
    }

    #[test]
    fn separable_blobs_are_learned() {
        let (x, y) = blobs(40, 0.5, 1);
        let xs = Standardizer::fit(&x).transform(&x);
        let model = train_mlr(&xs, &y, 3, &MlrParams::default());
        assert!(accuracy(&model.predict(&xs), &y) >= 0.99);
        for p in model.predict_proba(&xs) {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (x, y) = blobs(5, 1.0, 2);
        let problem = Problem {
            x: &x,
            y: &y,
            k: 3,
            d: 2,
            l2: 1.0,
        };
        let theta: Vec<f64> = (0..9).map(|i| 0.1 * i as f64 - 0.3).collect();
        let mut grad = vec![0.0; 9];
        problem.eval(&theta, Some(&mut grad));
        for i in 0..9 {
            let mut hi = theta.clone();
            let mut lo = theta.clone();
            hi[i] += 1e-6;
            lo[i] -= 1e-6;
            let fd = (problem.loss(&hi) - problem.loss(&lo)) / 2e-6;
            assert!((fd - grad[i]).abs() < 1e-5, "{i}: {fd} vs {}", grad[i]);
        }
    }

    #[test]
    fn optimum_has_vanishing_gradient() {
        let (x, y) = blobs(20, 1.5, 3);
        let model = train_mlr(&x, &y, 3, &MlrParams::default());
        assert!(model.converged, "{} iterations", model.iterations);
    }

    #[test]
    fn duplicated_feature_keeps_predictions() {
        let (x, y) = blobs(30, 1.0, 4);
        let xs = Standardizer::fit(&x).transform(&x);
        let dup: Vec<Vec<f64>> = xs.iter().map(|r| vec![r[0], r[1], r[1]]).collect();
        let a = train_mlr(&xs, &y, 3, &MlrParams::default());
        let b = train_mlr(&dup, &y, 3, &MlrParams::default());
        assert_eq!(a.predict(&xs), b.predict(&dup));
        // The duplicated pair shares its weight equally.
        for w in &b.weights {
            assert!((w[1] - w[2]).abs() < 1e-6);
        }
    }

    #[test]
    fn ranking_rules() {
        let model = MlrModel {
            weights: vec![vec![0.1, 3.0, 0.0, 0.1], vec![-0.1, 1.0, 0.0, 0.1]],
            biases: vec![0.0, 0.0],
            converged: true,
            iterations: 0,
        };
        assert_eq!(rank_features(&model), vec![1, 0, 3, 2]);
        let scaled = MlrModel {
            weights: model.weights.iter().map(|r| r.iter().map(|v| v * 7.5).collect()).collect(),
            ..model.clone()
        };
        assert_eq!(rank_features(&scaled), rank_features(&model));
    }

    #[test]
    fn constant_features_standardize_to_zero() {
        let x = vec![vec![1.0, 2.0], vec![1.0, 4.0]];
        let s = Standardizer::fit(&x);
        assert_eq!(s.transform(&x), vec![vec![0.0, -1.0], vec![0.0, 1.0]]);
    }
}
