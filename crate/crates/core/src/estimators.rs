//! Maximum-likelihood and rank-breaking estimation of strength vectors.
//!
//! `Mle` maximizes the full top-1 likelihood. `RankAll` replaces every
//! observation `(S, y)` by the pairs `(y beats z)`, `z ∈ S∖{y}`; `RankOne`
//! keeps a single such pair with `z` drawn uniformly. Both rank-breaking
//! methods then maximize the pair likelihood as if the pairs were independent.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comparisons::{Dataset, Observation, Weight, WeightedAdjacency, FIEDLER_THRESHOLD};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;
use crate::optim::{maximize, OptimOptions};
use crate::sampler::ParamVector;

/// Choice probabilities are floored here before taking logs.
pub const PROB_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Mle,
    RankAll,
    RankOne,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Mle => "mle",
            Method::RankAll => "rank-all",
            Method::RankOne => "rank-one",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "mle" => Ok(Method::Mle),
            "rank-all" => Ok(Method::RankAll),
            "rank-one" => Ok(Method::RankOne),
            other => Err(Error::validation(format!(
                "unknown method '{other}'; expected mle, rank-all or rank-one"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub method: Method,
    pub model: NoiseModel,
    /// Box radius of Θ.
    pub b: f64,
    pub tol_grad: f64,
    pub max_iter: usize,
    /// Seeds the opponent draws of `RankOne`.
    pub seed: u64,
}

impl EstimatorConfig {
    pub fn new(method: Method, model: NoiseModel, b: f64) -> Self {
        EstimatorConfig {
            method,
            model,
            b,
            tol_grad: 1e-8,
            max_iter: 10_000,
            seed: 0,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::validation(format!(
                "box radius must be positive, got {}",
                self.b
            )));
        }
        if !(self.tol_grad > 0.0) {
            return Err(Error::validation("tol_grad must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::validation("max_iter must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimateReport {
    pub theta_hat: ParamVector,
    /// Log-likelihood (or pseudo log-likelihood) at `theta_hat`, summed over observations.
    pub loglik: f64,
    /// Projected gradient norm of the per-observation average objective.
    pub grad_norm: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Items whose estimate sits on the box boundary.
    pub active_box: Vec<usize>,
    /// Number of probability evaluations floored at [`PROB_FLOOR`] at the optimum.
    pub clamped: usize,
    pub method: Method,
    pub model: NoiseModel,
}

/// Distinct (set, winner) pairs with their multiplicities.
struct Terms {
    sets: Vec<Vec<usize>>,
    winners: Vec<usize>,
    counts: Vec<f64>,
    total: f64,
}

impl Terms {
    fn from_observations<'a>(obs: impl Iterator<Item = (&'a [usize], usize)>) -> Terms {
        let mut index: HashMap<(Vec<usize>, usize), usize> = HashMap::new();
        let mut t = Terms {
            sets: Vec::new(),
            winners: Vec::new(),
            counts: Vec::new(),
            total: 0.0,
        };
        for (set, winner) in obs {
            let mut key = set.to_vec();
            key.sort_unstable();
            let next = t.sets.len();
            let i = *index.entry((key.clone(), winner)).or_insert(next);
            if i == next {
                t.sets.push(key);
                t.winners.push(winner);
                t.counts.push(0.0);
            }
            t.counts[i] += 1.0;
            t.total += 1.0;
        }
        t
    }

    fn from_dataset(ds: &Dataset) -> Terms {
        Terms::from_observations(ds.observations().iter().map(|o| (o.set(), o.winner())))
    }
}

struct Evaluation {
    value: f64,
    grad: Vec<f64>,
    clamped: usize,
}

fn evaluate(
    terms: &Terms,
    n: usize,
    model: &NoiseModel,
    theta: &[f64],
    with_grad: bool,
) -> Result<Evaluation> {
    let mut value = 0.0;
    let mut grad = vec![0.0; if with_grad { n } else { 0 }];
    let mut clamped = 0;
    let beta = model.scale();
    let mut cache: HashMap<Vec<u64>, (f64, Vec<f64>)> = HashMap::new();
    let mut x = Vec::new();
    let mut others = Vec::new();
    for ((set, &y), &c) in terms.sets.iter().zip(&terms.winners).zip(&terms.counts) {
        if model.is_luce() {
            // log p = θ_y/β − log Σ_{s∈S} e^{θ_s/β}
            let max = set
                .iter()
                .map(|&s| theta[s])
                .fold(f64::NEG_INFINITY, f64::max);
            let denom: f64 = set.iter().map(|&s| ((theta[s] - max) / beta).exp()).sum();
            let log_denom = max / beta + denom.ln();
            let mut logp = theta[y] / beta - log_denom;
            if logp < PROB_FLOOR.ln() {
                logp = PROB_FLOOR.ln();
                clamped += 1;
            }
            value += c * logp;
            if with_grad {
                for &s in set {
                    let ps = (theta[s] / beta - log_denom).exp();
                    grad[s] -= c * ps / beta;
                }
                grad[y] += c / beta;
            }
            continue;
        }
        x.clear();
        others.clear();
        for &s in set {
            if s != y {
                x.push(theta[y] - theta[s]);
                others.push(s);
            }
        }
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let (p, g) = match cache.get(&key) {
            Some(hit) => hit.clone(),
            None => {
                let r = model.choice_prob_with_grad(&x, with_grad)?;
                cache.insert(key, r.clone());
                r
            }
        };
        let p = if p < PROB_FLOOR {
            clamped += 1;
            PROB_FLOOR
        } else {
            p
        };
        value += c * p.ln();
        if with_grad {
            for (&s, gv) in others.iter().zip(&g) {
                let d = c * gv / p;
                grad[y] += d;
                grad[s] -= d;
            }
        }
    }
    Ok(Evaluation {
        value,
        grad,
        clamped,
    })
}

fn check_theta(ds: &Dataset, theta: &ParamVector) -> Result<()> {
    if ds.m() == 0 {
        return Err(Error::EmptyDataset);
    }
    if theta.n() != ds.n_items() {
        return Err(Error::validation(format!(
            "strength vector has {} entries but the dataset has {} items",
            theta.n(),
            ds.n_items()
        )));
    }
    Ok(())
}

/// `ℓ(θ) = Σ_t log p_{y_t, S_t}(θ)`.
pub fn loglik(ds: &Dataset, model: &NoiseModel, theta: &ParamVector) -> Result<f64> {
    check_theta(ds, theta)?;
    let terms = Terms::from_dataset(ds);
    Ok(evaluate(&terms, ds.n_items(), model, theta.as_slice(), false)?.value)
}

/// Gradient of [`loglik`] with respect to θ.
pub fn loglik_grad(ds: &Dataset, model: &NoiseModel, theta: &ParamVector) -> Result<Vec<f64>> {
    check_theta(ds, theta)?;
    let terms = Terms::from_dataset(ds);
    Ok(evaluate(&terms, ds.n_items(), model, theta.as_slice(), true)?.grad)
}

/// Hessian of the Luce log-likelihood: `Σ_t p_i p_j / β²` off the diagonal,
/// rows summing to zero.
pub fn loglik_hessian_luce(
    ds: &Dataset,
    model: &NoiseModel,
    theta: &ParamVector,
) -> Result<DMatrix<f64>> {
    if !model.is_luce() {
        return Err(Error::Unsupported(format!(
            "closed-form Hessian needs double-exponential noise, got {model}"
        )));
    }
    check_theta(ds, theta)?;
    let n = ds.n_items();
    let beta = model.scale();
    let th = theta.as_slice();
    let mut h = DMatrix::zeros(n, n);
    let mut probs = Vec::new();
    for obs in ds.observations() {
        let set = obs.set();
        let max = set.iter().map(|&s| th[s]).fold(f64::NEG_INFINITY, f64::max);
        probs.clear();
        probs.extend(set.iter().map(|&s| ((th[s] - max) / beta).exp()));
        let z: f64 = probs.iter().sum();
        probs.iter_mut().for_each(|p| *p /= z);
        for a in 0..set.len() {
            for c in a + 1..set.len() {
                let v = probs[a] * probs[c] / (beta * beta);
                h[(set[a], set[c])] += v;
                h[(set[c], set[a])] += v;
            }
        }
    }
    for i in 0..n {
        let row: f64 = h.row(i).sum();
        h[(i, i)] = -row;
    }
    Ok(h)
}

/// The pair dataset a rank-breaking method optimizes; `Mle` returns the input.
pub fn reduce(ds: &Dataset, method: Method, seed: u64) -> Result<Dataset> {
    let obs = match method {
        Method::Mle => return Ok(ds.clone()),
        Method::RankAll => ds
            .observations()
            .iter()
            .flat_map(|o| {
                let y = o.winner();
                o.set()
                    .iter()
                    .filter(move |&&z| z != y)
                    .map(move |&z| Observation::new(vec![y, z], y))
            })
            .collect::<Result<Vec<_>>>()?,
        Method::RankOne => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            ds.observations()
                .iter()
                .map(|o| {
                    let y = o.winner();
                    let losers: Vec<usize> = o.set().iter().copied().filter(|&z| z != y).collect();
                    let z = losers[rng.random_range(0..losers.len())];
                    Observation::new(vec![y, z], y)
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Dataset::new(ds.item_labels().to_vec(), obs)
}

fn ensure_connected(ds: &Dataset, what: &str) -> Result<()> {
    let a = WeightedAdjacency::from_dataset(ds, &Weight::Unit)?;
    if a.fiedler()? > FIEDLER_THRESHOLD {
        return Ok(());
    }
    Err(Error::Disconnected(format!(
        "{what} splits into components {}",
        ds.describe_components()
    )))
}

/// Maximizes the (pseudo) log-likelihood of `cfg.method` over Θ.
pub fn estimate(ds: &Dataset, cfg: &EstimatorConfig) -> Result<EstimateReport> {
    cfg.validate()?;
    if ds.m() == 0 {
        return Err(Error::EmptyDataset);
    }
    if ds.n_items() < 2 {
        return Err(Error::validation("need at least two items"));
    }
    ensure_connected(ds, "comparison graph")?;
    let reduced = reduce(ds, cfg.method, cfg.seed)?;
    if cfg.method != Method::Mle {
        ensure_connected(&reduced, "rank-broken comparison graph")?;
    }
    let n = ds.n_items();
    let terms = Terms::from_dataset(&reduced);
    let scale = 1.0 / terms.total;
    let opts = OptimOptions {
        tol_grad: cfg.tol_grad,
        max_iter: cfg.max_iter,
    };
    let out = maximize(
        |theta| {
            let e = evaluate(&terms, n, &cfg.model, theta, true)?;
            Ok((
                e.value * scale,
                e.grad.into_iter().map(|g| g * scale).collect(),
            ))
        },
        &vec![0.0; n],
        cfg.b,
        opts,
    )?;
    let last = evaluate(&terms, n, &cfg.model, &out.x, false)?;
    if last.clamped > 0 {
        log::warn!(
            "{} choice probabilities fell below {PROB_FLOOR:e} and were clamped",
            last.clamped
        );
    }
    if !out.converged {
        log::warn!(
            "optimizer stopped after {} iterations with projected gradient {:.3e}",
            out.iterations,
            out.grad_norm
        );
    }
    let active_box = out
        .x
        .iter()
        .enumerate()
        .filter(|(_, v)| v.abs() >= cfg.b * (1.0 - 1e-12))
        .map(|(i, _)| i)
        .collect();
    Ok(EstimateReport {
        theta_hat: ParamVector::new(out.x, cfg.b)?,
        loglik: last.value,
        grad_norm: out.grad_norm,
        iterations: out.iterations,
        converged: out.converged,
        active_box,
        clamped: last.clamped,
        method: cfg.method,
        model: cfg.model,
    })
}

/// `(1/n) ‖θ̂ − θ*‖²`.
pub fn mse(theta_hat: &[f64], theta_star: &[f64]) -> Result<f64> {
    if theta_hat.len() != theta_star.len() {
        return Err(Error::validation(format!(
            "dimension mismatch: {} vs {}",
            theta_hat.len(),
            theta_star.len()
        )));
    }
    if theta_hat.is_empty() {
        return Err(Error::validation("vectors are empty"));
    }
    let s: f64 = theta_hat
        .iter()
        .zip(theta_star)
        .map(|(a, b)| (a - b).powi(2))
        .sum();
    Ok(s / theta_hat.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise::NoiseKind;
    use crate::sampler::{sample_dataset, ComparisonDesign};

    fn obs(set: &[usize], w: usize) -> Observation {
        Observation::new(set.to_vec(), w).unwrap()
    }

    fn three_one() -> Dataset {
        Dataset::with_numbered_items(
            2,
            vec![
                obs(&[0, 1], 0),
                obs(&[0, 1], 0),
                obs(&[1, 0], 0),
                obs(&[0, 1], 1),
            ],
        )
        .unwrap()
    }

    #[test]
    fn loglik_at_zero_is_m_log_inverse_k() {
        for kind in [
            NoiseKind::Gaussian,
            NoiseKind::DoubleExponential,
            NoiseKind::Laplace,
            NoiseKind::Uniform,
        ] {
            let model = NoiseModel::unit_variance(kind);
            let ds = Dataset::with_numbered_items(4, vec![obs(&[0, 1, 2], 0), obs(&[1, 2, 3], 3)])
                .unwrap();
            let l = loglik(&ds, &model, &ParamVector::zeros(4, 1.0).unwrap()).unwrap();
            assert!(
                (l - 2.0 * (1.0_f64 / 3.0).ln()).abs() < 1e-9,
                "{model}: {l}"
            );
        }
    }

    #[test]
    fn luce_pair_loglik() {
        let ds = Dataset::with_numbered_items(2, vec![obs(&[0, 1], 0)]).unwrap();
        let h = 3.0_f64.ln() / 2.0;
        let th = ParamVector::new(vec![h, -h], 1.0).unwrap();
        let l = loglik(&ds, &NoiseModel::gumbel(1.0).unwrap(), &th).unwrap();
        assert!((l - 0.75_f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn luce_gradient_example() {
        let ds = Dataset::with_numbered_items(3, vec![obs(&[0, 1, 2], 0)]).unwrap();
        let g = loglik_grad(
            &ds,
            &NoiseModel::gumbel(1.0).unwrap(),
            &ParamVector::zeros(3, 1.0).unwrap(),
        )
        .unwrap();
        for (a, b) in g.iter().zip([2.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0]) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn balanced_pairs_have_zero_gradient_at_zero() {
        let ds = Dataset::with_numbered_items(
            3,
            vec![
                obs(&[0, 1], 0),
                obs(&[0, 1], 1),
                obs(&[1, 2], 2),
                obs(&[1, 2], 1),
            ],
        )
        .unwrap();
        let model = NoiseModel::unit_variance(NoiseKind::Gaussian);
        let g = loglik_grad(&ds, &model, &ParamVector::zeros(3, 1.0).unwrap()).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn luce_hessian_examples() {
        let model = NoiseModel::gumbel(1.0).unwrap();
        let ds = Dataset::with_numbered_items(3, vec![obs(&[0, 1], 0)]).unwrap();
        let h = loglik_hessian_luce(&ds, &model, &ParamVector::zeros(3, 1.0).unwrap()).unwrap();
        assert!((h[(0, 1)] - 0.25).abs() < 1e-15);
        assert!((h[(0, 0)] + 0.25).abs() < 1e-15);
        assert_eq!(h[(0, 2)], 0.0);
        let other = NoiseModel::gaussian(1.0).unwrap();
        assert!(matches!(
            loglik_hessian_luce(&ds, &other, &ParamVector::zeros(3, 1.0).unwrap()),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn two_item_mle_matches_closed_form() {
        let ds = three_one();
        let model = NoiseModel::gumbel(1.0).unwrap();
        let h = 3.0_f64.ln() / 2.0;
        let mut previous: Option<Vec<f64>> = None;
        for method in [Method::Mle, Method::RankAll, Method::RankOne] {
            let r = estimate(&ds, &EstimatorConfig::new(method, model, 2.0)).unwrap();
            assert!(r.converged);
            let th = r.theta_hat.as_slice();
            assert!(
                (th[0] - h).abs() < 1e-6 && (th[1] + h).abs() < 1e-6,
                "{th:?}"
            );
            if let Some(p) = &previous {
                for (a, b) in p.iter().zip(th) {
                    assert!((a - b).abs() < 1e-8);
                }
            }
            previous = Some(th.to_vec());
        }
    }

    #[test]
    fn never_losing_item_hits_the_box() {
        let ds = Dataset::with_numbered_items(2, vec![obs(&[0, 1], 0), obs(&[0, 1], 0)]).unwrap();
        let r = estimate(
            &ds,
            &EstimatorConfig::new(Method::Mle, NoiseModel::gumbel(1.0).unwrap(), 1.5),
        )
        .unwrap();
        assert_eq!(r.active_box, vec![0, 1]);
        assert!((r.theta_hat.as_slice()[0] - 1.5).abs() < 1e-12);
    }

    #[test]
    fn disconnected_data_is_rejected() {
        let ds = Dataset::with_numbered_items(4, vec![obs(&[0, 1], 0), obs(&[2, 3], 2)]).unwrap();
        let err = estimate(
            &ds,
            &EstimatorConfig::new(Method::Mle, NoiseModel::gumbel(1.0).unwrap(), 1.0),
        )
        .unwrap_err();
        match err {
            Error::Disconnected(msg) => assert!(msg.contains("{0, 1} | {2, 3}"), "{msg}"),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rank_breaking_reductions() {
        let ds =
            Dataset::with_numbered_items(4, vec![obs(&[0, 1, 2], 1), obs(&[1, 2, 3], 3)]).unwrap();
        let all = reduce(&ds, Method::RankAll, 0).unwrap();
        let sets: Vec<(Vec<usize>, usize)> = all
            .observations()
            .iter()
            .map(|o| (o.set().to_vec(), o.winner()))
            .collect();
        assert_eq!(
            sets,
            vec![
                (vec![1, 0], 1),
                (vec![1, 2], 1),
                (vec![3, 1], 3),
                (vec![3, 2], 3)
            ]
        );
        let one_a = reduce(&ds, Method::RankOne, 7).unwrap();
        let one_b = reduce(&ds, Method::RankOne, 7).unwrap();
        assert_eq!(one_a, one_b);
        assert_eq!(one_a.m(), 2);
        for (o, orig) in one_a.observations().iter().zip(ds.observations()) {
            assert_eq!(o.winner(), orig.winner());
            assert!(orig.set().contains(&o.set()[1]));
        }
    }

    #[test]
    fn large_sample_estimate_is_close() {
        let model = NoiseModel::gumbel(1.0).unwrap();
        let theta = ParamVector::zeros(5, 1.0).unwrap();
        let ds = sample_dataset(
            &model,
            &theta,
            &ComparisonDesign::uniform(5, 3).unwrap(),
            10_000,
            11,
        )
        .unwrap();
        let r = estimate(&ds, &EstimatorConfig::new(Method::Mle, model, 5.0)).unwrap();
        assert!(r.converged);
        assert!(mse(r.theta_hat.as_slice(), theta.as_slice()).unwrap() < 0.01);
    }

    #[test]
    fn non_luce_estimate_recovers_order() {
        let model = NoiseModel::unit_variance(NoiseKind::Uniform);
        let theta = ParamVector::new(vec![0.6, 0.0, -0.6], 1.0).unwrap();
        let ds = sample_dataset(
            &model,
            &theta,
            &ComparisonDesign::uniform(3, 3).unwrap(),
            3000,
            5,
        )
        .unwrap();
        let r = estimate(&ds, &EstimatorConfig::new(Method::Mle, model, 2.0)).unwrap();
        assert!(r.converged, "{r:?}");
        let th = r.theta_hat.as_slice();
        assert!(th[0] > th[1] && th[1] > th[2], "{th:?}");
        assert!(mse(th, theta.as_slice()).unwrap() < 0.02);
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse(&[0.3, -0.3], &[0.3, -0.3]).unwrap(), 0.0);
        assert_eq!(mse(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0);
        let a = [0.4, -0.1, -0.3];
        let b = [0.1, 0.2, -0.3];
        let scaled = |v: &[f64]| v.iter().map(|x| 3.0 * x).collect::<Vec<_>>();
        assert!(
            (mse(&scaled(&a), &scaled(&b)).unwrap() - 9.0 * mse(&a, &b).unwrap()).abs() < 1e-14
        );
        assert!(mse(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn method_names() {
        for m in [Method::Mle, Method::RankAll, Method::RankOne] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert_eq!("rank_one".parse::<Method>().unwrap(), Method::RankOne);
        assert!("em".parse::<Method>().is_err());
    }
}
