//! Point-score classification of items into a high and a low class, and the
//! number of observations needed for it to succeed.

use serde::Serialize;

use crate::comparisons::Dataset;
use crate::error::{Error, Result};
use crate::linalg::symmetric_spectral_norm;
use crate::noise::{DiffVector, NoiseModel};

/// Quasi-random points used to estimate the Hessian-norm side condition.
pub const HESSIAN_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ClassificationResult {
    /// The `n/2` items with the highest point scores, ascending.
    pub high_class: Vec<usize>,
    pub low_class: Vec<usize>,
    /// Number of observations each item won.
    pub scores: Vec<usize>,
}

/// Ranks items by point score (ties to the lower index) and splits the
/// ranking in half.
pub fn point_score_classify(ds: &Dataset) -> Result<ClassificationResult> {
    let n = ds.n_items();
    if n < 2 || n % 2 == 1 {
        return Err(Error::validation(format!(
            "classification needs an even number of items, got {n}"
        )));
    }
    let mut scores = vec![0usize; n];
    for obs in ds.observations() {
        scores[obs.winner()] += 1;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[b].cmp(&scores[a]).then(a.cmp(&b)));
    let mut high_class = order[..n / 2].to_vec();
    let mut low_class = order[n / 2..].to_vec();
    high_class.sort_unstable();
    low_class.sort_unstable();
    Ok(ClassificationResult {
        high_class,
        low_class,
        scores,
    })
}

/// Side conditions of the sample-complexity statements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SideConditions {
    /// `4 / (k² ∂p_k(0)/∂x_1)`, the largest `b` covered by the sufficient condition.
    pub b_limit_sufficient: f64,
    pub b_within_sufficient_limit: bool,
    /// `1 / (6 k² ∂p_k(0)/∂x_1)`, the largest `b` covered by the necessary condition.
    pub b_limit_necessary: f64,
    pub b_within_necessary_limit: bool,
    /// `b · max ‖∇²p_k(x)‖₂` over sampled `x ∈ [−2b, 2b]^{k−1}`.
    pub hessian_term: f64,
    /// `hessian_term ≤ ∂p_k(0)/∂x_1`.
    pub hessian_condition: bool,
    pub hessian_samples: usize,
    /// Always false: the maximum is sampled, not certified.
    pub certified: bool,
    /// The necessary condition is stated for `n ≥ 16`.
    pub n_at_least_16: bool,
    /// The necessary condition is stated for `δ ≤ 1/4`.
    pub delta_at_most_quarter: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleComplexity {
    pub model: NoiseModel,
    pub k: usize,
    pub b: f64,
    pub n: usize,
    pub delta: f64,
    pub dpk0: f64,
    pub gamma: f64,
    /// Observations sufficient for the point-score method to classify every
    /// item correctly with probability at least `1 − δ`.
    pub sufficient_m: f64,
    /// Observations below which no method can achieve that.
    pub necessary_m: f64,
    pub conditions: SideConditions,
}

/// Radical inverse of `i` in base `base`: the `i`-th Halton coordinate.
pub(crate) fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut f = inv;
    let mut r = 0.0;
    while i > 0 {
        r += f * (i % base) as f64;
        i /= base;
        f *= inv;
    }
    r
}

pub(crate) fn primes(count: usize) -> Vec<u64> {
    let mut out = Vec::with_capacity(count);
    let mut c = 2u64;
    while out.len() < count {
        if out.iter().all(|p| !c.is_multiple_of(*p)) {
            out.push(c);
        }
        c += 1;
    }
    out
}

/// Largest spectral norm of `∇²p_k` over the origin and `samples` Halton
/// points of `[−r, r]^{k−1}`.
pub fn sampled_hessian_norm(model: &NoiseModel, k: usize, r: f64, samples: usize) -> Result<f64> {
    if k < 2 {
        return Err(Error::validation("comparison-set size must be >= 2"));
    }
    let dim = k - 1;
    let bases = primes(dim);
    let mut best = symmetric_spectral_norm(&model.choice_prob_hessian(&DiffVector::zeros(dim)?)?)?;
    for i in 1..=samples as u64 {
        let x: Vec<f64> = bases
            .iter()
            .map(|&p| r * (2.0 * radical_inverse(i, p) - 1.0))
            .collect();
        let h = model.choice_prob_hessian(&DiffVector::new(x)?)?;
        best = best.max(symmetric_spectral_norm(&h)?);
    }
    Ok(best)
}

/// `m ≥ 64 (1/b²)(1 − 1/k) γ_{F,k} n (ln n + ln(1/δ))` suffices; the same
/// expression with coefficient `1/62` is necessary.
pub fn classify_sample_complexity(
    model: &NoiseModel,
    k: usize,
    b: f64,
    n: usize,
    delta: f64,
) -> Result<SampleComplexity> {
    classify_sample_complexity_with(model, k, b, n, delta, HESSIAN_SAMPLES)
}

/// As [`classify_sample_complexity`] with a chosen number of Hessian samples.
pub fn classify_sample_complexity_with(
    model: &NoiseModel,
    k: usize,
    b: f64,
    n: usize,
    delta: f64,
    samples: usize,
) -> Result<SampleComplexity> {
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::validation(format!("b must be positive, got {b}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::validation(format!(
            "delta must lie in (0, 1], got {delta}"
        )));
    }
    if n < 2 {
        return Err(Error::validation("need at least two items"));
    }
    let dpk0 = model.dpk0(k)?;
    let gamma = model.gamma_fk(k)?;
    let kf = k as f64;
    let nf = n as f64;
    let base = (1.0 / (b * b)) * (1.0 - 1.0 / kf) * gamma * nf * (nf.ln() + (1.0 / delta).ln());
    let b_limit_sufficient = 4.0 / (kf * kf * dpk0);
    let b_limit_necessary = 1.0 / (6.0 * kf * kf * dpk0);
    let hessian_term = b * sampled_hessian_norm(model, k, 2.0 * b, samples)?;
    Ok(SampleComplexity {
        model: *model,
        k,
        b,
        n,
        delta,
        dpk0,
        gamma,
        sufficient_m: 64.0 * base,
        necessary_m: base / 62.0,
        conditions: SideConditions {
            b_limit_sufficient,
            b_within_sufficient_limit: b <= b_limit_sufficient,
            b_limit_necessary,
            b_within_necessary_limit: b <= b_limit_necessary,
            hessian_term,
            hessian_condition: hessian_term <= dpk0,
            hessian_samples: samples,
            certified: false,
            n_at_least_16: n >= 16,
            delta_at_most_quarter: delta <= 0.25,
        },
    })
}
