//! Hard-margin kernel classification through the origin.
//!
//! Solves the dual
//!
//! ```text
//! maximize   Σ_k α_k − ½ Σ_ij α_i α_j y_i y_j K_ij
//! subject to α ≥ 0
//! ```
//!
//! There is no equality constraint because the separating hyperplane
//! contains the origin. Samples with nonzero `α_k` are the support vectors.

use serde::{Deserialize, Serialize};

use crate::network::{sign_label, Label, LabeledDataset, Network};
use crate::pathspace::{self, GramMatrix, PathVector};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Convergence threshold on the largest KKT violation.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Dual objective beyond this value signals non-separable data.
    pub objective_cap: f64,
    /// Any coefficient beyond this value signals non-separable data.
    pub alpha_cap: f64,
    /// `α_k` counts as nonzero when above `support_threshold · max α`.
    pub support_threshold: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-8,
            max_sweeps: 1_000_000,
            objective_cap: 1e12,
            alpha_cap: 1e12,
            support_threshold: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginSolution {
    pub alphas: Vec<f64>,
    pub support_indices: Vec<usize>,
    /// Geometric margin `1 / ‖w̄‖` of the normalized separator.
    pub margin_value: f64,
    pub converged: bool,
    /// Completed sweeps over all coordinates.
    pub iterations: usize,
    /// Largest KKT violation at exit.
    pub kkt_residual: f64,
    pub objective: f64,
    pub tol: f64,
    pub gram_hash: String,
}

impl MarginSolution {
    pub fn support_count(&self) -> usize {
        self.support_indices.len()
    }

    /// Dual expansion `f(x) = Σ_k α_k y_k K(x, x_k)` from a kernel row.
    pub fn decision_value(&self, labels: &[Label], kernel_row: &[f64]) -> Result<f64> {
        let m = self.alphas.len();
        for len in [labels.len(), kernel_row.len()] {
            if len != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    actual: len,
                });
            }
        }
        Ok(self
            .alphas
            .iter()
            .zip(labels)
            .zip(kernel_row)
            .map(|((a, &y), k)| a * y as f64 * k)
            .sum())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn check_labels(labels: &[Label]) -> Result<()> {
    if let Some(bad) = labels.iter().find(|&&y| y != 1 && y != -1) {
        return Err(Error::InvalidInput(format!("label {bad} is not -1 or +1")));
    }
    Ok(())
}

/// Cyclic coordinate ascent on the origin-through hard-margin dual.
///
/// Iteration starts at the best uniform vector `α = t·1`, so exactly
/// symmetric ties are split evenly rather than by sweep order.
/// Each coordinate step is an exact line search clipped at `α_k = 0`.
/// After every sweep the iterate is also moved along the sweep's net
/// displacement by an exact (feasibility-clipped) line search; when that
/// direction is an unbounded ascent ray the data is reported
/// non-separable.
pub fn solve_hard_margin(gram: &GramMatrix, labels: &[Label], opts: &SolverOptions) -> Result<MarginSolution> {
    let m = gram.size();
    if labels.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            actual: labels.len(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidInput("empty training set".into()));
    }
    check_labels(labels)?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidConfig("solver tolerance must be positive".into()));
    }
    let y: Vec<f64> = labels.iter().map(|&l| l as f64).collect();
    let q = |i: usize, j: usize| y[i] * y[j] * gram.get(i, j);

    let mut max_diag: f64 = 0.0;
    for k in 0..m {
        let kk = gram.get(k, k);
        if kk < 0.0 {
            return Err(Error::InvalidInput(format!(
                "gram diagonal entry {k} is negative; kernel is not PSD"
            )));
        }
        if kk == 0.0 {
            return Err(Error::NonSeparable(format!(
                "sample {k} embeds to the zero vector and cannot attain a positive margin"
            )));
        }
        max_diag = max_diag.max(kk);
    }

    // Start from the exact line-search point along the all-ones direction.
    let ones_curv: f64 = (0..m).map(|i| (0..m).map(|j| q(i, j)).sum::<f64>()).sum();
    let t0 = if ones_curv > 0.0 { m as f64 / ones_curv } else { 0.0 };
    let mut alpha = vec![t0; m];
    let mut grad: Vec<f64> = (0..m)
        .map(|i| 1.0 - t0 * (0..m).map(|j| q(i, j)).sum::<f64>())
        .collect();
    let mut prev = alpha.clone();
    let mut iterations = 0;
    let mut converged = false;
    let mut residual = f64::INFINITY;

    let exact_grad = |alpha: &[f64], grad: &mut [f64]| {
        for (j, g) in grad.iter_mut().enumerate() {
            let mut s = 1.0;
            for (i, &a) in alpha.iter().enumerate() {
                if a != 0.0 {
                    s -= q(j, i) * a;
                }
            }
            *g = s;
        }
    };
    let kkt = |alpha: &[f64], grad: &[f64]| {
        alpha
            .iter()
            .zip(grad)
            .map(|(&a, &g)| if a > 0.0 { g.abs() } else { g.max(0.0) })
            .fold(0.0, f64::max)
    };
    let objective = |alpha: &[f64], grad: &[f64]| -> f64 {
        0.5 * alpha.iter().zip(grad).map(|(a, g)| a * (1.0 + g)).sum::<f64>()
    };

    while iterations < opts.max_sweeps {
        for k in 0..m {
            if alpha[k] == 0.0 && grad[k] <= 0.0 {
                continue;
            }
            let next = (alpha[k] + grad[k] / q(k, k)).max(0.0);
            let step = next - alpha[k];
            if step == 0.0 {
                continue;
            }
            alpha[k] = next;
            for (j, g) in grad.iter_mut().enumerate() {
                *g -= step * q(j, k);
            }
        }
        iterations += 1;

        if iterations % 64 == 0 {
            exact_grad(&alpha, &mut grad);
        }

        if iterations > 1 {
            extrapolate(&mut alpha, &mut grad, &prev, &q, max_diag)?;
        }
        prev.copy_from_slice(&alpha);

        let obj = objective(&alpha, &grad);
        let amax = alpha.iter().copied().fold(0.0, f64::max);
        if !obj.is_finite() || obj > opts.objective_cap || amax > opts.alpha_cap {
            return Err(Error::NonSeparable(format!(
                "dual objective {obj:.3e} (max alpha {amax:.3e}) exceeded its cap after {iterations} sweeps"
            )));
        }

        residual = kkt(&alpha, &grad);
        if residual <= opts.tol {
            exact_grad(&alpha, &mut grad);
            residual = kkt(&alpha, &grad);
            if residual <= opts.tol {
                converged = true;
                break;
            }
        }
    }

    exact_grad(&alpha, &mut grad);
    let quad: f64 = alpha.iter().zip(&grad).map(|(a, g)| a * (1.0 - g)).sum();
    let margin_value = if quad > 0.0 { 1.0 / quad.sqrt() } else { f64::INFINITY };
    let support_indices = support_set(&alpha, opts.support_threshold);
    Ok(MarginSolution {
        objective: objective(&alpha, &grad),
        alphas: alpha,
        support_indices,
        margin_value,
        converged,
        iterations,
        kkt_residual: residual,
        tol: opts.tol,
        gram_hash: gram.hash(),
    })
}

fn extrapolate<Q: Fn(usize, usize) -> f64>(
    alpha: &mut [f64],
    grad: &mut [f64],
    prev: &[f64],
    q: &Q,
    max_diag: f64,
) -> Result<()> {
    let m = alpha.len();
    let delta: Vec<f64> = alpha.iter().zip(prev).map(|(a, p)| a - p).collect();
    let slope: f64 = delta.iter().zip(grad.iter()).map(|(d, g)| d * g).sum();
    if !(slope > 0.0) {
        return Ok(());
    }
    let moved: Vec<usize> = (0..m).filter(|&i| delta[i] != 0.0).collect();
    let qd: Vec<f64> = (0..m)
        .map(|j| moved.iter().map(|&i| q(j, i) * delta[i]).sum())
        .collect();
    let curvature: f64 = delta.iter().zip(&qd).map(|(d, v)| d * v).sum();
    let t_max = moved
        .iter()
        .filter(|&&i| delta[i] < 0.0)
        .map(|&i| alpha[i] / -delta[i])
        .fold(f64::INFINITY, f64::min);
    let norm2: f64 = delta.iter().map(|d| d * d).sum();
    let t = if curvature > 1e-14 * norm2 * max_diag {
        (slope / curvature).min(t_max)
    } else {
        t_max
    };
    if t.is_infinite() {
        return Err(Error::NonSeparable(
            "found a nonnegative combination of embedded samples that cancels to zero".into(),
        ));
    }
    if t > 0.0 {
        for &i in &moved {
            alpha[i] = (alpha[i] + t * delta[i]).max(0.0);
        }
        for (g, v) in grad.iter_mut().zip(&qd) {
            *g -= t * v;
        }
    }
    Ok(())
}

fn support_set(alpha: &[f64], threshold: f64) -> Vec<usize> {
    let amax = alpha.iter().copied().fold(0.0, f64::max);
    if amax <= 0.0 {
        return Vec::new();
    }
    alpha
        .iter()
        .enumerate()
        .filter(|(_, &a)| a > threshold * amax)
        .map(|(k, _)| k)
        .collect()
}

/// `sign(Σ_k α_k y_k K(x, x_k))`, with `sign(0) = +1`.
pub fn margin_predict(sol: &MarginSolution, labels: &[Label], kernel_row: &[f64]) -> Result<Label> {
    Ok(sign_label(sol.decision_value(labels, kernel_row)?))
}

/// The network support vectors of a converged solution.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportSet {
    pub indices: Vec<usize>,
    pub samples: LabeledDataset,
    /// Number of samples that are not support vectors (`m − s`).
    pub complement_size: usize,
}

impl SupportSet {
    pub fn s(&self) -> usize {
        self.indices.len()
    }
}

pub fn extract_nsvs(sol: &MarginSolution, data: &LabeledDataset) -> Result<SupportSet> {
    if !sol.converged {
        return Err(Error::NotConverged(format!(
            "KKT residual {:.3e} after {} sweeps",
            sol.kkt_residual, sol.iterations
        )));
    }
    if sol.alphas.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: sol.alphas.len(),
            actual: data.len(),
        });
    }
    Ok(SupportSet {
        indices: sol.support_indices.clone(),
        samples: data.subset(&sol.support_indices),
        complement_size: data.len() - sol.support_indices.len(),
    })
}

#[derive(Debug, Clone)]
pub struct WbarReconstruction {
    pub wbar: PathVector,
    /// Cosine similarity between the reconstruction and `Λ(w)`.
    pub cosine_to_lambda: f64,
}

/// `Σ_k α_k y_k φ(x_k, w)` over explicit paths.
pub fn reconstruct_wbar(
    sol: &MarginSolution,
    data: &LabeledDataset,
    net: &Network,
    budget: usize,
) -> Result<WbarReconstruction> {
    if sol.alphas.len() != data.len() {
        return Err(Error::DimensionMismatch {
            expected: sol.alphas.len(),
            actual: data.len(),
        });
    }
    let layout = net.config().path_layout();
    layout.check_budget(budget)?;
    let mut wbar = PathVector::zeros(layout);
    for (a, s) in sol.alphas.iter().zip(data.samples()) {
        if *a != 0.0 {
            wbar.add_scaled(a * s.y as f64, &pathspace::embed(net, &s.x, budget)?)?;
        }
    }
    let lambda = net.path_products(budget)?;
    let cosine_to_lambda = wbar.cosine(&lambda)?;
    Ok(WbarReconstruction {
        wbar,
        cosine_to_lambda,
    })
}

/// Fraction of positions where two label sequences agree.
pub fn agreement(a: &[Label], b: &[Label]) -> Result<f64> {
    if a.is_empty() {
        return Err(Error::InvalidInput("agreement of empty sequences".into()));
    }
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            actual: b.len(),
        });
    }
    let same = a.iter().zip(b).filter(|(x, y)| x == y).count();
    Ok(same as f64 / a.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linear(xs: &[f64]) -> GramMatrix {
        GramMatrix::linear(&xs.iter().map(|&x| vec![x]).collect::<Vec<_>>())
    }

    #[test]
    fn hand_example_1d() {
        let g = linear(&[1.0, -2.0]);
        let sol = solve_hard_margin(&g, &[1, -1], &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.alphas[0] - 1.0).abs() < 1e-12);
        assert!(sol.alphas[1].abs() < 1e-12);
        assert_eq!(sol.support_indices, vec![0]);
        assert!((sol.margin_value - 1.0).abs() < 1e-12);
        // Evaluating on the support vector reproduces its label.
        assert_eq!(margin_predict(&sol, &[1, -1], g.row(0)).unwrap(), 1);
        let data = LabeledDataset::from_parts(vec![vec![1.0], vec![-2.0]], vec![1, -1]).unwrap();
        assert_eq!(extract_nsvs(&sol, &data).unwrap().s(), 1);
    }

    #[test]
    fn symmetric_pair_has_two_support_vectors() {
        let g = linear(&[1.0, -1.0]);
        let sol = solve_hard_margin(&g, &[1, -1], &SolverOptions::default()).unwrap();
        let data = LabeledDataset::from_parts(vec![vec![1.0], vec![-1.0]], vec![1, -1]).unwrap();
        let nsv = extract_nsvs(&sol, &data).unwrap();
        assert_eq!(nsv.s(), 2);
        assert_eq!(nsv.complement_size, 0);
    }

    #[test]
    fn duplicated_support_point_is_deterministic() {
        let g = linear(&[1.0, 1.0, -3.0]);
        let a = solve_hard_margin(&g, &[1, 1, -1], &SolverOptions::default()).unwrap();
        let b = solve_hard_margin(&g, &[1, 1, -1], &SolverOptions::default()).unwrap();
        assert!(a.converged);
        assert_eq!(a, b);
        assert!((a.alphas[0] + a.alphas[1] - 1.0).abs() < 1e-9);
        assert!(a.alphas[2].abs() < 1e-12);
    }

    #[test]
    fn one_class_positive_definite_is_separable() {
        let g = GramMatrix::from_rows(vec![vec![2.0, 0.5], vec![0.5, 1.0]]).unwrap();
        let sol = solve_hard_margin(&g, &[1, 1], &SolverOptions::default()).unwrap();
        assert!(sol.converged);
        for k in 0..2 {
            let f = sol.decision_value(&[1, 1], g.row(k)).unwrap();
            assert!(f >= 1.0 - 1e-8);
        }
    }

    #[test]
    fn xor_style_1d_is_non_separable() {
        // Same sign inputs with opposite labels: no line through the origin works.
        let g = linear(&[1.0, 2.0]);
        let err = solve_hard_margin(&g, &[1, -1], &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonSeparable(_)), "{err}");
        let g = linear(&[-1.0, 1.0, 2.0, -2.0]);
        let err = solve_hard_margin(&g, &[1, 1, -1, -1], &SolverOptions::default()).unwrap_err();
        assert!(matches!(err, Error::NonSeparable(_)), "{err}");
    }

    #[test]
    fn zero_embedding_is_non_separable() {
        let g = linear(&[0.0, 1.0]);
        assert!(matches!(
            solve_hard_margin(&g, &[1, 1], &SolverOptions::default()),
            Err(Error::NonSeparable(_))
        ));
    }

    #[test]
    fn input_validation() {
        let g = linear(&[1.0]);
        assert!(solve_hard_margin(&g, &[1, 1], &SolverOptions::default()).is_err());
        assert!(solve_hard_margin(&g, &[0], &SolverOptions::default()).is_err());
    }

    #[test]
    fn unconverged_solution_is_refused() {
        let g = linear(&[1.0, 1.5, -2.0, 0.7]);
        let opts = SolverOptions {
            max_sweeps: 1,
            ..SolverOptions::default()
        };
        let sol = solve_hard_margin(&g, &[1, 1, -1, 1], &opts).unwrap();
        let data = LabeledDataset::from_parts(
            vec![vec![1.0], vec![1.5], vec![-2.0], vec![0.7]],
            vec![1, 1, -1, 1],
        )
        .unwrap();
        if !sol.converged {
            assert!(matches!(extract_nsvs(&sol, &data), Err(Error::NotConverged(_))));
        }
    }

    #[test]
    fn predict_sign_conventions() {
        let sol = MarginSolution {
            alphas: vec![1.0, 2.0],
            support_indices: vec![0, 1],
            margin_value: 1.0,
            converged: true,
            iterations: 1,
            kkt_residual: 0.0,
            objective: 0.0,
            tol: 1e-8,
            gram_hash: String::new(),
        };
        assert_eq!(margin_predict(&sol, &[1, -1], &[0.0, 0.0]).unwrap(), 1);
        assert_eq!(margin_predict(&sol, &[1, -1], &[1.0, 1.0]).unwrap(), -1);
        assert!(margin_predict(&sol, &[1, -1], &[1.0]).is_err());
    }

    #[test]
    fn agreement_cases() {
        assert_eq!(agreement(&[1, -1, 1], &[1, -1, 1]).unwrap(), 1.0);
        assert_eq!(agreement(&[1, -1], &[-1, 1]).unwrap(), 0.0);
        assert_eq!(agreement(&[1, 1, 1, 1], &[1, -1, 1, 1]).unwrap(), 0.75);
        assert!(agreement(&[], &[]).is_err());
        assert!(agreement(&[1], &[1, 1]).is_err());
    }
}
