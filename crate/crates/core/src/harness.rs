//! Monte-Carlo experiments: MSE against set size, Fiedler prefix curves and
//! participant restriction for real-world style data.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{mse_upper_bound, BoundInputs, Theorem};
use crate::comparisons::{fiedler_prefix_curve, unbiased_fiedler, Dataset, Observation, Weight};
use crate::error::{Error, Result};
use crate::estimators::{estimate, mse, EstimatorConfig, Method};
use crate::noise::NoiseModel;
use crate::sampler::{
    sample_dataset_with, sample_two_class_theta, substream, ComparisonDesign, ParamVector,
};

/// How the true strengths are chosen for each repetition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum ThetaStar {
    Zero,
    /// Half the items at `+b`, half at `−b`, redrawn per repetition.
    TwoClass {
        b: f64,
    },
    /// Uniform on `[−radius, radius]^n` projected onto the zero-sum box.
    Random {
        radius: f64,
    },
    Fixed {
        theta: Vec<f64>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub n: usize,
    pub m: usize,
    pub k_values: Vec<usize>,
    pub repetitions: usize,
    pub model: NoiseModel,
    pub theta_star: ThetaStar,
    pub method: Method,
    /// Box radius of the estimator.
    pub b: f64,
    pub seed: u64,
    pub tol_grad: f64,
    pub max_iter: usize,
}

impl ExperimentSpec {
    /// Uniformly drawn `k`-sets, `θ* = 0`, maximum likelihood with `b = 5`.
    pub fn new(
        n: usize,
        m: usize,
        k_values: Vec<usize>,
        repetitions: usize,
        model: NoiseModel,
    ) -> Self {
        ExperimentSpec {
            n,
            m,
            k_values,
            repetitions,
            model,
            theta_star: ThetaStar::Zero,
            method: Method::Mle,
            b: 5.0,
            seed: 0,
            tol_grad: 1e-8,
            max_iter: 10_000,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.repetitions == 0 {
            return Err(Error::validation("repetitions must be at least 1"));
        }
        if self.m == 0 {
            return Err(Error::validation("m must be at least 1"));
        }
        if self.k_values.is_empty() {
            return Err(Error::validation("no set sizes given"));
        }
        if let Some(k) = self.k_values.iter().find(|&&k| k < 2 || k > self.n) {
            return Err(Error::validation(format!(
                "set size {k} outside 2..={}",
                self.n
            )));
        }
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::validation(format!(
                "b must be positive, got {}",
                self.b
            )));
        }
        match &self.theta_star {
            ThetaStar::TwoClass { b } if *b > self.b => Err(Error::validation(
                "two-class strengths lie outside the estimator box",
            )),
            ThetaStar::Random { radius } if !(*radius >= 0.0 && *radius <= self.b) => Err(
                Error::validation("random strength radius must lie in [0, b]"),
            ),
            ThetaStar::Fixed { theta } => ParamVector::new(theta.clone(), self.b).and_then(|p| {
                if p.n() == self.n {
                    Ok(())
                } else {
                    Err(Error::validation("fixed strengths have the wrong length"))
                }
            }),
            _ => Ok(()),
        }
    }
}

/// Outcome of one repetition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Repetition {
    pub rep: usize,
    /// `None` when the estimator failed outright.
    pub mse: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentRow {
    pub k: usize,
    pub mse_mean: f64,
    pub mse_stderr: f64,
    pub ci95_half_width: f64,
    pub bound_theorem: Option<Theorem>,
    pub bound_value: Option<f64>,
    /// Repetitions that hit the iteration cap or failed.
    pub flagged: usize,
    pub repetitions: Vec<Repetition>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentResult {
    pub spec: ExperimentSpec,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentResult {
    pub fn to_tsv(&self) -> String {
        let mut out =
            String::from("k\tmse_mean\tmse_stderr\tci95_half_width\tbound_value\tflagged\n");
        for r in &self.rows {
            let bound = r
                .bound_value
                .map_or_else(|| "NA".to_string(), |v| format!("{v:e}"));
            let _ = writeln!(
                out,
                "{}\t{:e}\t{:e}\t{:e}\t{}\t{}",
                r.k, r.mse_mean, r.mse_stderr, r.ci95_half_width, bound, r.flagged
            );
        }
        out
    }
}

/// Pairwise (cascade) summation, independent of thread scheduling.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        return v.iter().sum();
    }
    let (a, b) = v.split_at(v.len() / 2);
    pairwise_sum(a) + pairwise_sum(b)
}

/// Mean and standard error of the mean (sample standard deviation / √r).
pub fn mean_stderr(v: &[f64]) -> (f64, f64) {
    let r = v.len();
    if r == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = pairwise_sum(v) / r as f64;
    if r == 1 {
        return (mean, 0.0);
    }
    let dev: Vec<f64> = v.iter().map(|x| (x - mean).powi(2)).collect();
    let var = pairwise_sum(&dev) / (r - 1) as f64;
    (mean, (var / r as f64).sqrt())
}

fn task_stream(seed: u64, k: usize, rep: usize) -> rand_chacha::ChaCha8Rng {
    substream(seed, ((k as u64) << 32) | rep as u64)
}

fn run_repetition(spec: &ExperimentSpec, k: usize, rep: usize) -> Repetition {
    let outcome = (|| -> Result<(f64, bool)> {
        let mut rng = task_stream(spec.seed, k, rep);
        let theta = match &spec.theta_star {
            ThetaStar::Zero => ParamVector::zeros(spec.n, spec.b)?,
            ThetaStar::TwoClass { b } => {
                let t = sample_two_class_theta(spec.n, *b, rng.random())?;
                ParamVector::new(t.theta.into_vec(), spec.b)?
            }
            ThetaStar::Random { radius } => ParamVector::random(spec.n, *radius, spec.b, &mut rng)?,
            ThetaStar::Fixed { theta } => ParamVector::new(theta.clone(), spec.b)?,
        };
        let design = ComparisonDesign::uniform(spec.n, k)?;
        let ds = sample_dataset_with(&spec.model, &theta, &design, spec.m, &mut rng)?;
        let mut cfg = EstimatorConfig::new(spec.method, spec.model, spec.b);
        cfg.tol_grad = spec.tol_grad;
        cfg.max_iter = spec.max_iter;
        cfg.seed = rng.random();
        let rep = estimate(&ds, &cfg)?;
        Ok((
            mse(rep.theta_hat.as_slice(), theta.as_slice())?,
            rep.converged,
        ))
    })();
    match outcome {
        Ok((v, converged)) => Repetition {
            rep,
            mse: Some(v),
            converged,
            error: None,
        },
        Err(e) => Repetition {
            rep,
            mse: None,
            converged: false,
            error: Some(e.to_string()),
        },
    }
}

/// The Luce bound for all sets of size `k` or the general-model bound,
/// evaluated on the expected comparison matrix of uniformly drawn `k`-sets.
fn row_bound(spec: &ExperimentSpec, k: usize) -> (Option<Theorem>, Option<f64>) {
    let mix = BTreeMap::from([(k, 1.0)]);
    let (theorem, weight) = if spec.model.is_luce() {
        (Theorem::LuceFull, Weight::Unit)
    } else {
        (Theorem::General, Weight::Optimal(spec.model))
    };
    let value = unbiased_fiedler(spec.n, &mix, &weight).and_then(|fiedler| {
        let inputs = BoundInputs {
            n: spec.n,
            m: spec.m,
            k,
            b: spec.b,
            model: spec.model,
            fiedler,
            set_sizes: vec![k],
        };
        mse_upper_bound(theorem, &inputs, None)
    });
    match value {
        Ok(r) => (Some(theorem), Some(r.bound_value)),
        Err(e) => {
            log::warn!("no {theorem} bound for k = {k}: {e}");
            (Some(theorem), None)
        }
    }
}

/// Runs `repetitions` independent (dataset, estimate, MSE) trials per set
/// size. Every trial draws from its own substream, so results do not depend
/// on the thread count.
pub fn run_mse_vs_k(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate()?;
    let tasks: Vec<(usize, usize)> = spec
        .k_values
        .iter()
        .flat_map(|&k| (0..spec.repetitions).map(move |r| (k, r)))
        .collect();
    let reps: Vec<Repetition> = tasks
        .par_iter()
        .map(|&(k, r)| run_repetition(spec, k, r))
        .collect();
    let bounds: Vec<(Option<Theorem>, Option<f64>)> = spec
        .k_values
        .par_iter()
        .map(|&k| row_bound(spec, k))
        .collect();
    let rows = spec
        .k_values
        .iter()
        .zip(reps.chunks(spec.repetitions))
        .zip(bounds)
        .map(|((&k, chunk), (bound_theorem, bound_value))| {
            let values: Vec<f64> = chunk.iter().filter_map(|r| r.mse).collect();
            let flagged = chunk.iter().filter(|r| !r.converged).count();
            if flagged > 0 {
                log::warn!("k = {k}: {flagged} of {} repetitions flagged", chunk.len());
            }
            let (mse_mean, mse_stderr) = mean_stderr(&values);
            ExperimentRow {
                k,
                mse_mean,
                mse_stderr,
                ci95_half_width: 1.96 * mse_stderr,
                bound_theorem,
                bound_value,
                flagged,
                repetitions: chunk.to_vec(),
            }
        })
        .collect();
    Ok(ExperimentResult {
        spec: spec.clone(),
        rows,
    })
}

/// Fiedler prefix curve as TSV with header `prefix_m\tfiedler`.
pub fn run_fiedler_curve(ds: &Dataset, weight: &Weight, step: usize) -> Result<String> {
    let mut out = String::from("prefix_m\tfiedler\n");
    for (m, f) in fiedler_prefix_curve(ds, weight, step)? {
        let _ = writeln!(out, "{m}\t{f:.12}");
    }
    Ok(out)
}

/// Keeps the `top_n` items that appear in the most observations (ties go to
/// the earlier first appearance), restricts every set to them and drops
/// observations left with fewer than two items or without their winner.
pub fn top_n_restriction(ds: &Dataset, top_n: usize) -> Result<Dataset> {
    if top_n < 2 {
        return Err(Error::validation(format!(
            "top-n must be at least 2, got {top_n}"
        )));
    }
    let n = ds.n_items();
    if top_n >= n {
        return Ok(ds.clone());
    }
    let mut count = vec![0usize; n];
    let mut first = vec![usize::MAX; n];
    for (t, obs) in ds.observations().iter().enumerate() {
        for &i in obs.set() {
            count[i] += 1;
            first[i] = first[i].min(t);
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        count[b]
            .cmp(&count[a])
            .then(first[a].cmp(&first[b]))
            .then(a.cmp(&b))
    });
    let mut kept: Vec<usize> = order[..top_n].to_vec();
    kept.sort_unstable();
    let mut new_index = vec![None; n];
    for (j, &i) in kept.iter().enumerate() {
        new_index[i] = Some(j);
    }
    let labels = kept.iter().map(|&i| ds.item_labels()[i].clone()).collect();
    let mut observations = Vec::new();
    for obs in ds.observations() {
        let Some(winner) = new_index[obs.winner()] else {
            continue;
        };
        let set: Vec<usize> = obs.set().iter().filter_map(|&i| new_index[i]).collect();
        if set.len() >= 2 {
            observations.push(Observation::new(set, winner)?);
        }
    }
    Dataset::new(labels, observations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseKind;

    #[test]
    fn pairwise_sum_matches_naive_sum() {
        let v: Vec<f64> = (1..=1000).map(|i| 1.0 / i as f64).collect();
        let naive: f64 = v.iter().sum();
        assert!((pairwise_sum(&v) - naive).abs() < 1e-12);
        assert_eq!(pairwise_sum(&[]), 0.0);
    }

    #[test]
    fn mean_and_stderr_against_streaming_pass() {
        let v = [0.1, 0.4, 0.35, 0.2, 0.05, 0.9, 0.3];
        let (mean, se) = mean_stderr(&v);
        // Welford's update as an independent pass.
        let (mut mu, mut m2) = (0.0, 0.0);
        for (i, x) in v.iter().enumerate() {
            let d = x - mu;
            mu += d / (i + 1) as f64;
            m2 += d * (x - mu);
        }
        let se2 = (m2 / (v.len() - 1) as f64 / v.len() as f64).sqrt();
        assert!((mean - mu).abs() < 1e-12);
        assert!((se - se2).abs() < 1e-12);
        assert_eq!(mean_stderr(&[2.0]), (2.0, 0.0));
    }

    #[test]
    fn spec_validation() {
        let model = NoiseModel::unit_variance(NoiseKind::DoubleExponential);
        assert!(ExperimentSpec::new(5, 10, vec![2, 6], 1, model)
            .validate()
            .is_err());
        assert!(ExperimentSpec::new(5, 10, vec![2], 0, model)
            .validate()
            .is_err());
        assert!(ExperimentSpec::new(5, 10, vec![1], 1, model)
            .validate()
            .is_err());
        assert!(ExperimentSpec::new(5, 10, vec![2, 5], 1, model)
            .validate()
            .is_ok());
    }

    #[test]
    fn small_experiment_is_deterministic() {
        let model = NoiseModel::unit_variance(NoiseKind::DoubleExponential);
        let mut spec = ExperimentSpec::new(5, 40, vec![2, 3], 3, model);
        spec.seed = 11;
        let a = run_mse_vs_k(&spec).unwrap();
        let b = run_mse_vs_k(&spec).unwrap();
        assert_eq!(a, b);
        for row in &a.rows {
            assert!(row.mse_mean >= 0.0);
            assert_eq!(row.ci95_half_width, 1.96 * row.mse_stderr);
            assert_eq!(row.bound_theorem, Some(Theorem::LuceFull));
            assert!(row.bound_value.unwrap() > row.mse_mean);
        }
        assert!(a.to_tsv().starts_with("k\tmse_mean"));
    }

    fn labelled(labels: &[&str], obs: &[(&[usize], usize)]) -> Dataset {
        Dataset::new(
            labels.iter().map(|s| s.to_string()).collect(),
            obs.iter()
                .map(|(s, w)| Observation::new(s.to_vec(), *w).unwrap())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn top_n_drops_the_rarest_item() {
        let ds = labelled(
            &["a", "b", "c"],
            &[
                (&[0, 1, 2], 0),
                (&[0, 1], 0),
                (&[0, 1], 1),
                (&[0, 2], 2),
                (&[0, 1], 1),
            ],
        );
        // counts: a = 5, b = 4, c = 2
        let r = top_n_restriction(&ds, 2).unwrap();
        assert_eq!(r.item_labels(), &["a".to_string(), "b".to_string()]);
        // (0,2) won by c is dropped; (0,1,2) shrinks to (0,1).
        assert_eq!(r.m(), 4);
        assert_eq!(r.observations()[0].set(), &[0, 1]);
        assert_eq!(top_n_restriction(&ds, 3).unwrap(), ds);
        assert!(top_n_restriction(&ds, 1).is_err());
    }

    #[test]
    fn fiedler_curve_single_point_for_large_step() {
        let ds = labelled(&["a", "b"], &[(&[0, 1], 0), (&[0, 1], 1)]);
        let tsv = run_fiedler_curve(&ds, &Weight::Unit, 10).unwrap();
        let lines: Vec<&str> = tsv.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[1].starts_with("2\t"));
    }
}
