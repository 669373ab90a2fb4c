//! (mu/mu_w, lambda)-CMA-ES with box bounds handled by resampling.
//!
//! The search runs in coordinates normalized to the unit box so that one
//! step size fits every parameter.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_RESAMPLES: usize = 100;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub initial: Vec<f64>,
    /// Inclusive `(lo, hi)` per parameter.
    pub bounds: Vec<(f64, f64)>,
    /// Initial step size as a fraction of each bound width.
    #[serde(default = "default_sigma")]
    pub sigma0: f64,
    /// Offspring per generation; `None` uses 4 + floor(3 ln n).
    #[serde(default)]
    pub population: Option<usize>,
    #[serde(default = "default_max_evals")]
    pub max_evaluations: usize,
    /// Stop once the best objective is at or below this.
    #[serde(default)]
    pub target: f64,
    /// Stop once the normalized step size falls below this.
    #[serde(default = "default_tol_sigma")]
    pub tol_sigma: f64,
    #[serde(default)]
    pub seed: u64,
}

fn default_sigma() -> f64 {
    0.2
}
fn default_max_evals() -> usize {
    2000
}
fn default_tol_sigma() -> f64 {
    1e-10
}

impl OptimizerConfig {
    pub fn new(initial: Vec<f64>, bounds: Vec<(f64, f64)>) -> Self {
        Self {
            initial,
            bounds,
            sigma0: default_sigma(),
            population: None,
            max_evaluations: default_max_evals(),
            target: 0.0,
            tol_sigma: default_tol_sigma(),
            seed: 0,
        }
    }

    pub fn dimension(&self) -> usize {
        self.initial.len()
    }

    pub fn population_size(&self) -> usize {
        let n = self.dimension() as f64;
        self.population
            .unwrap_or(4 + (3.0 * n.ln()).floor() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.initial.is_empty() {
            return bad("optimizer needs at least one parameter".into());
        }
        if self.bounds.len() != self.initial.len() {
            return bad(format!(
                "{} bounds given for {} parameters",
                self.bounds.len(),
                self.initial.len()
            ));
        }
        for (i, (&x, &(lo, hi))) in self.initial.iter().zip(&self.bounds).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return bad(format!("parameter {i}: invalid bounds ({lo}, {hi})"));
            }
            if !(lo..=hi).contains(&x) {
                return bad(format!("parameter {i}: initial value {x} outside ({lo}, {hi})"));
            }
        }
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad(format!("sigma0 must be positive, got {}", self.sigma0));
        }
        if self.population_size() < 2 {
            return bad("population must be at least 2".into());
        }
        Ok(())
    }

    fn to_unit(&self, x: &[f64]) -> DVector<f64> {
        DVector::from_iterator(
            x.len(),
            x.iter().zip(&self.bounds).map(|(v, (lo, hi))| (v - lo) / (hi - lo)),
        )
    }

    fn from_unit(&self, y: &DVector<f64>) -> Vec<f64> {
        y.iter()
            .zip(&self.bounds)
            .map(|(v, (lo, hi))| lo + v.clamp(0.0, 1.0) * (hi - lo))
            .collect()
    }
}

/// One line of the optimizer history.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub generation: usize,
    pub evaluations: usize,
    /// Best objective seen so far.
    pub best: f64,
    /// Mean objective of this generation's offspring.
    pub mean: f64,
    /// Normalized step size after the update.
    pub sigma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    TargetReached,
    MaxEvaluations,
    StepSizeConverged,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizeResult {
    pub best_params: Vec<f64>,
    pub best_value: f64,
    pub evaluations: usize,
    pub history: Vec<GenerationRecord>,
    pub stop: StopReason,
}

impl OptimizeResult {
    /// History as JSON lines.
    pub fn history_jsonl(&self) -> String {
        self.history
            .iter()
            .map(|r| serde_json::to_string(r).expect("record serializes") + "\n")
            .collect()
    }
}

/// Minimizes `objective` inside the configured box. Offspring are evaluated
/// in parallel; results depend only on the seed. Failed evaluations count
/// as +inf.
pub fn cmaes_minimize<F>(objective: F, config: &OptimizerConfig) -> Result<OptimizeResult>
where
    F: Fn(&[f64]) -> Result<f64> + Sync,
{
    config.validate()?;
    let n = config.dimension();
    let nf = n as f64;
    let lambda = config.population_size();
    let mu = lambda / 2;

    let raw: Vec<f64> = (0..mu)
        .map(|i| ((lambda as f64 + 1.0) / 2.0).ln() - ((i + 1) as f64).ln())
        .collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut mean = config.to_unit(&config.initial);
    let mut sigma = config.sigma0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut basis = DMatrix::<f64>::identity(n, n);
    let mut scales = DVector::<f64>::from_element(n, 1.0);
    let mut pc = DVector::<f64>::zeros(n);
    let mut ps = DVector::<f64>::zeros(n);

    let first = objective(&config.initial).unwrap_or(f64::INFINITY);
    let mut evaluations = 1;
    let mut best_value = first;
    let mut best_params = config.initial.clone();
    let mut history = Vec::new();
    let mut generation = 0;

    let stop = loop {
        if best_value <= config.target {
            break StopReason::TargetReached;
        }
        if evaluations >= config.max_evaluations {
            break StopReason::MaxEvaluations;
        }
        if sigma * scales.max() < config.tol_sigma {
            break StopReason::StepSizeConverged;
        }
        generation += 1;

        // Sample in the unit box; out-of-box draws are redrawn.
        let mut steps = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let mut accepted = None;
            for _ in 0..MAX_RESAMPLES {
                let z = DVector::<f64>::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
                let d = &basis * z.component_mul(&scales);
                let y = &mean + sigma * &d;
                if y.iter().all(|v| (0.0..=1.0).contains(v)) {
                    accepted = Some(d);
                    break;
                }
            }
            match accepted {
                Some(d) => steps.push(d),
                None => {
                    return Err(Error::Optimizer(format!(
                        "generation {generation}: no in-bounds sample after {MAX_RESAMPLES} draws"
                    )))
                }
            }
        }
        let candidates: Vec<Vec<f64>> = steps
            .iter()
            .map(|d| config.from_unit(&(&mean + sigma * d)))
            .collect();
        let values: Vec<f64> = candidates
            .par_iter()
            .map(|x| match objective(x) {
                Ok(v) if !v.is_nan() => v,
                _ => f64::INFINITY,
            })
            .collect();
        evaluations += lambda;

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        if values[order[0]] < best_value {
            best_value = values[order[0]];
            best_params = candidates[order[0]].clone();
        }

        // Recombination.
        let mut shift = DVector::<f64>::zeros(n);
        for (w, &i) in weights.iter().zip(&order) {
            shift += *w * &steps[i];
        }
        mean += sigma * &shift;

        // Step-size path uses C^{-1/2} = B D^{-1} B^T.
        let inv_sqrt = &basis * DMatrix::from_diagonal(&scales.map(|s| 1.0 / s)) * basis.transpose();
        ps = (1.0 - cs) * &ps + (cs * (2.0 - cs) * mueff).sqrt() * (&inv_sqrt * &shift);
        let gen_f = generation as f64;
        let hsig = ps.norm() / (1.0 - (1.0 - cs).powf(2.0 * gen_f)).sqrt() / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let hs = if hsig { 1.0 } else { 0.0 };
        pc = (1.0 - cc) * &pc + hs * (cc * (2.0 - cc) * mueff).sqrt() * &shift;

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (w, &i) in weights.iter().zip(&order) {
            rank_mu += *w * &steps[i] * steps[i].transpose();
        }
        cov = (1.0 - c1 - cmu) * &cov
            + c1 * (&pc * pc.transpose() + (1.0 - hs) * cc * (2.0 - cc) * &cov)
            + cmu * rank_mu;
        sigma *= ((cs / damps) * (ps.norm() / chi_n - 1.0)).exp();
        sigma = sigma.min(1.0);

        cov = 0.5 * (&cov + cov.transpose());
        let eig = SymmetricEigen::new(cov.clone());
        basis = eig.eigenvectors;
        scales = eig.eigenvalues.map(|v| v.max(1e-300).sqrt());

        let finite: Vec<f64> = values.iter().copied().filter(|v| v.is_finite()).collect();
        let gen_mean = if finite.is_empty() {
            f64::INFINITY
        } else {
            finite.iter().sum::<f64>() / finite.len() as f64
        };
        history.push(GenerationRecord {
            generation,
            evaluations,
            best: best_value,
            mean: gen_mean,
            sigma,
        });
    };

    Ok(OptimizeResult {
        best_params,
        best_value,
        evaluations,
        history,
        stop,
    })
}
