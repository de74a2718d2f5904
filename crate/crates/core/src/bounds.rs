//! Mean-squared-error bounds for the estimators and the constants they
//! depend on.
//!
//! The Luce-specific theorems are stated for `β = 1`. For other `β` the
//! strengths are rescaled: estimating `θ` under noise scale `β` is estimating
//! `θ/β` under unit scale with box radius `b/β`, so `D` is evaluated at
//! `b/β` and multiplied by `β`.

use std::fmt;
use std::str::FromStr;

use serde::Serialize;

use crate::classifier::{primes, radical_inverse};
use crate::comparisons::{WeightedAdjacency, FIEDLER_THRESHOLD};
use crate::error::{Error, Result};
use crate::noise::{DiffVector, NoiseModel};

/// Quasi-random samples per set size when constants are estimated numerically.
pub const CONSTANT_SAMPLES: usize = 512;
/// Grid points on `[−2b, 2b]` for the pair-comparison constants.
const PAIR_GRID: usize = 2001;
/// Cube vertices are added to the samples up to this set size.
const MAX_VERTEX_K: usize = 10;

/// Constants of the regularity conditions on the choice probabilities.
///
/// For pairs, `a` and `b` are the curvature and slope bounds of `log p_2`
/// on `[−2b, 2b]`. For general sets they are the constants `A`, `B`, `C`
/// and `Ã`, `C̃` comparing Hessians, gradient norms and probabilities at
/// `θ ∈ [−b, b]^n` with their values at `θ = 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelConstants {
    pub model: NoiseModel,
    /// Box radius the constants hold for.
    pub radius: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "C")]
    pub c: Option<f64>,
    #[serde(rename = "A_tilde")]
    pub a_tilde: Option<f64>,
    #[serde(rename = "C_tilde")]
    pub c_tilde: Option<f64>,
    /// A valid upper bound on `max_k 1/γ_{F,k}`, when known in closed form.
    pub sigma_bound: Option<f64>,
    /// False when the constants are sampled extremes rather than proven bounds.
    pub certified: bool,
}

/// Bradley–Terry pair constants: `A = e^{−2b/β}/[β²(1+e^{−2b/β})²]`,
/// `B = 1/[β(1+e^{−2b/β})]`.
pub fn bt_pair_constants(beta: f64, b: f64) -> Result<ModelConstants> {
    let model = NoiseModel::gumbel(beta)?;
    check_radius(b)?;
    let e = (-2.0 * b / beta).exp();
    Ok(ModelConstants {
        model,
        radius: b,
        a: e / (beta * beta * (1.0 + e).powi(2)),
        b: 1.0 / (beta * (1.0 + e)),
        c: None,
        a_tilde: None,
        c_tilde: None,
        sigma_bound: None,
        certified: true,
    })
}

/// `D = B/A = β(e^{2b/β} + 1)` for Bradley–Terry pairs.
pub fn bt_pair_d(beta: f64, b: f64) -> f64 {
    beta * ((2.0 * b / beta).exp() + 1.0)
}

/// Luce constants: `A = e^{−4b/β}`, `B = 4`, `C = e^{−2b/β}`,
/// `Ã = e^{4b/β}`, `C̃ = e^{2b/β}`, `σ_{F,K} ≤ 1/β²`.
pub fn luce_constants(beta: f64, b: f64) -> Result<ModelConstants> {
    let model = NoiseModel::gumbel(beta)?;
    check_radius(b)?;
    Ok(ModelConstants {
        model,
        radius: b,
        a: (-4.0 * b / beta).exp(),
        b: 4.0,
        c: Some((-2.0 * b / beta).exp()),
        a_tilde: Some((4.0 * b / beta).exp()),
        c_tilde: Some((2.0 * b / beta).exp()),
        sigma_bound: Some(1.0 / (beta * beta)),
        certified: true,
    })
}

fn check_radius(b: f64) -> Result<()> {
    if !(b.is_finite() && b >= 0.0) {
        return Err(Error::validation(format!(
            "box radius must be non-negative, got {b}"
        )));
    }
    Ok(())
}

/// Pair constants for any model from a grid on `[−2b, 2b]`:
/// `A = min −(log p_2)''`, `B = max (log p_2)'`.
pub fn numeric_pair_constants(model: &NoiseModel, b: f64) -> Result<ModelConstants> {
    check_radius(b)?;
    let mut a = f64::INFINITY;
    let mut bb: f64 = 0.0;
    for i in 0..PAIR_GRID {
        let x = if PAIR_GRID == 1 {
            0.0
        } else {
            -2.0 * b + 4.0 * b * i as f64 / (PAIR_GRID - 1) as f64
        };
        let dv = DiffVector::new(vec![x])?;
        let (p, g) = model.choice_prob_with_grad(&[x], true)?;
        let h = model.choice_prob_hessian(&dv)?[(0, 0)];
        if p <= 0.0 {
            a = 0.0;
            bb = f64::INFINITY;
            break;
        }
        let d1 = g[0] / p;
        let d2 = h / p - d1 * d1;
        a = a.min(-d2);
        bb = bb.max(d1);
    }
    Ok(ModelConstants {
        model: *model,
        radius: b,
        a,
        b: bb,
        c: None,
        a_tilde: None,
        c_tilde: None,
        sigma_bound: None,
        certified: false,
    })
}

/// Probability, θ-gradient and θ-Hessian of `−log p_{y,S}` with the chosen
/// item at position 0 of `theta`.
struct LocalDerivatives {
    p: f64,
    grad_p_norm: f64,
    /// Off-diagonal entries of `∇²(−log p)`, row-major over `i < j`.
    neg_log_hess_offdiag: Vec<f64>,
}

fn local_derivatives(model: &NoiseModel, theta: &[f64]) -> Result<LocalDerivatives> {
    let k = theta.len();
    let x: Vec<f64> = theta[1..].iter().map(|t| theta[0] - t).collect();
    let (p, gx) = model.choice_prob_with_grad(&x, true)?;
    let hx = model.choice_prob_hessian(&DiffVector::new(x)?)?;
    // Chain rule from x_v = θ_0 − θ_v.
    let mut gp = vec![0.0; k];
    gp[0] = gx.iter().sum();
    for v in 1..k {
        gp[v] = -gx[v - 1];
    }
    let hp = |i: usize, j: usize| -> f64 {
        match (i, j) {
            (0, 0) => hx.sum(),
            (0, v) | (v, 0) => -hx.column(v - 1).sum(),
            (u, v) => hx[(u - 1, v - 1)],
        }
    };
    let grad_p_norm = gp.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut off = Vec::with_capacity(k * (k - 1) / 2);
    for i in 0..k {
        for j in i + 1..k {
            off.push(if p > 0.0 {
                -hp(i, j) / p + gp[i] * gp[j] / (p * p)
            } else {
                f64::NAN
            });
        }
    }
    Ok(LocalDerivatives {
        p,
        grad_p_norm,
        neg_log_hess_offdiag: off,
    })
}

/// Sampled constants `A`, `B`, `C`, `Ã`, `C̃` over `θ ∈ [−b, b]^k` for each
/// set size in `sizes`: cube vertices (for `k ≤ 10`) plus `samples` Halton
/// points. The extremes are sampled, not certified.
pub fn numeric_constants(
    model: &NoiseModel,
    b: f64,
    sizes: &[usize],
    samples: usize,
) -> Result<ModelConstants> {
    check_radius(b)?;
    if sizes.is_empty() {
        return Err(Error::validation("no set sizes given"));
    }
    let (mut a, mut a_t) = (f64::INFINITY, 0.0_f64);
    let (mut c, mut c_t) = (f64::INFINITY, 0.0_f64);
    let mut bb = 0.0_f64;
    for &k in sizes {
        if k < 2 {
            return Err(Error::validation(format!("set size {k} is below 2")));
        }
        let base = local_derivatives(model, &vec![0.0; k])?;
        let mut points: Vec<Vec<f64>> = Vec::new();
        if k <= MAX_VERTEX_K {
            for mask in 0..(1u32 << k) {
                points.push(
                    (0..k)
                        .map(|i| if mask >> i & 1 == 1 { b } else { -b })
                        .collect(),
                );
            }
        }
        let primes = primes(k);
        for i in 1..=samples as u64 {
            points.push(
                primes
                    .iter()
                    .map(|&p| b * (2.0 * radical_inverse(i, p) - 1.0))
                    .collect(),
            );
        }
        for theta in &points {
            let d = local_derivatives(model, theta)?;
            let ratio_p = d.p / base.p;
            c = c.min(ratio_p);
            c_t = c_t.max(ratio_p);
            bb = bb.max(d.grad_p_norm / base.grad_p_norm);
            if d.p <= 0.0 {
                a = 0.0;
                continue;
            }
            for (h, h0) in d
                .neg_log_hess_offdiag
                .iter()
                .zip(&base.neg_log_hess_offdiag)
            {
                let r = h / h0;
                a = a.min(r);
                a_t = a_t.max(r);
            }
        }
    }
    Ok(ModelConstants {
        model: *model,
        radius: b,
        a,
        b: bb,
        c: Some(c),
        a_tilde: Some(a_t),
        c_tilde: Some(c_t),
        sigma_bound: None,
        certified: false,
    })
}

/// Closed forms for the Luce model, sampled constants otherwise.
pub fn model_constants(model: &NoiseModel, b: f64, sizes: &[usize]) -> Result<ModelConstants> {
    if model.is_luce() {
        luce_constants(model.scale(), b)
    } else {
        numeric_constants(model, b, sizes, CONSTANT_SAMPLES)
    }
}

/// `σ_{F,K} = max_{k ∈ K} 1/γ_{F,k}`.
pub fn sigma_fk(model: &NoiseModel, sizes: &[usize]) -> Result<f64> {
    if sizes.is_empty() {
        return Err(Error::validation("no set sizes given"));
    }
    sizes
        .iter()
        .map(|&k| model.gamma_fk(k).map(|g| 1.0 / g))
        .try_fold(0.0_f64, |acc, v| Ok(acc.max(v?)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Theorem {
    /// Pair comparisons, any model satisfying the log-concavity conditions.
    Pair,
    /// Luce model, all sets of size `k`.
    LuceFull,
    /// General Thurstone model, mixed set sizes.
    General,
    /// Rank breaking into all `k − 1` pairs.
    RankAll,
    /// Rank breaking into one random pair.
    RankOne,
}

impl fmt::Display for Theorem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Theorem::Pair => "pair",
            Theorem::LuceFull => "luce-full",
            Theorem::General => "general",
            Theorem::RankAll => "rank-all",
            Theorem::RankOne => "rank-one",
        })
    }
}

impl FromStr for Theorem {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "pair" => Ok(Theorem::Pair),
            "luce-full" | "full" => Ok(Theorem::LuceFull),
            "general" => Ok(Theorem::General),
            "rank-all" => Ok(Theorem::RankAll),
            "rank-one" => Ok(Theorem::RankOne),
            other => Err(Error::validation(format!(
                "unknown theorem '{other}'; expected pair, luce-full, general, rank-all or rank-one"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundInputs {
    pub n: usize,
    pub m: usize,
    /// Comparison-set size (the largest one for mixed data).
    pub k: usize,
    pub b: f64,
    pub model: NoiseModel,
    /// Fiedler value of the matrix the theorem is stated for.
    pub fiedler: f64,
    /// Set sizes present in the data; defaults to `[k]` when empty.
    pub set_sizes: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Precondition {
    pub name: String,
    /// Smallest Fiedler value (or observation count) the condition asks for.
    pub required: f64,
    pub actual: f64,
    pub met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundReport {
    pub theorem: String,
    pub bound_value: f64,
    #[serde(rename = "D")]
    pub d: Option<f64>,
    pub preconditions: Vec<Precondition>,
    pub preconditions_met: bool,
    pub inputs: BoundInputs,
    pub constants: Option<ModelConstants>,
}

fn finish(
    theorem: String,
    bound_value: f64,
    d: Option<f64>,
    preconditions: Vec<Precondition>,
    inputs: BoundInputs,
    constants: Option<ModelConstants>,
) -> Result<BoundReport> {
    if !bound_value.is_finite() {
        return Err(Error::Numerical(format!(
            "{theorem} bound is not finite; the model constants degenerate at b = {}",
            inputs.b
        )));
    }
    let preconditions_met = preconditions.iter().all(|p| p.met);
    Ok(BoundReport {
        theorem,
        bound_value,
        d,
        preconditions,
        preconditions_met,
        inputs,
        constants,
    })
}

fn fiedler_precondition(required: f64, actual: f64) -> Precondition {
    Precondition {
        name: "fiedler".into(),
        required,
        actual,
        met: actual >= required,
    }
}

/// Evaluates a theorem's MSE upper bound. Preconditions are reported, not
/// enforced. `constants` overrides the closed-form or sampled constants the
/// pair and general theorems would otherwise compute.
pub fn mse_upper_bound(
    theorem: Theorem,
    inputs: &BoundInputs,
    constants: Option<&ModelConstants>,
) -> Result<BoundReport> {
    let BoundInputs {
        n,
        m,
        k,
        b,
        fiedler,
        ..
    } = *inputs;
    let model = inputs.model;
    if !(fiedler > FIEDLER_THRESHOLD) {
        return Err(Error::Disconnected(format!(
            "bound undefined for Fiedler value {fiedler}"
        )));
    }
    if n < 2 || m == 0 || k < 2 {
        return Err(Error::validation("bounds need n >= 2, m >= 1 and k >= 2"));
    }
    check_radius(b)?;
    let (nf, mf, kf) = (n as f64, m as f64, k as f64);
    let rate = nf * (nf.ln() + 2.0) / (fiedler * fiedler) / mf;
    let log_term = nf * nf.ln() / mf;
    let beta = model.scale();
    let luce_only = |name: &str| -> Result<()> {
        if model.is_luce() {
            Ok(())
        } else {
            Err(Error::Unsupported(format!(
                "the {name} bound is stated for the Luce model only, got {model}"
            )))
        }
    };
    let positive = vec![fiedler_precondition(FIEDLER_THRESHOLD, fiedler)];
    match theorem {
        Theorem::Pair => {
            let c = match constants {
                Some(c) => c.clone(),
                None if model.is_luce() => bt_pair_constants(beta, b)?,
                None => numeric_pair_constants(&model, b)?,
            };
            let d = c.b / c.a;
            finish(
                theorem.to_string(),
                d * d * rate,
                Some(d),
                positive,
                inputs.clone(),
                Some(c),
            )
        }
        Theorem::LuceFull => {
            luce_only("luce-full")?;
            let d = beta * 4.0 * kf * kf * (4.0 * b / beta).exp();
            finish(
                theorem.to_string(),
                d * d * rate,
                Some(d),
                positive,
                inputs.clone(),
                None,
            )
        }
        Theorem::RankAll => {
            luce_only("rank-all")?;
            let e = (2.0 * b / beta).exp();
            let d = beta * 16.0 * 2.0_f64.sqrt() * (kf * (kf - 1.0).powi(3)).sqrt() * e;
            let pre = fiedler_precondition(128.0 * (kf - 1.0).powi(2) * e * log_term, fiedler);
            finish(
                theorem.to_string(),
                d * d * rate,
                Some(d),
                vec![pre],
                inputs.clone(),
                None,
            )
        }
        Theorem::RankOne => {
            luce_only("rank-one")?;
            let e = (2.0 * b / beta).exp();
            let d = beta * 4.0 * kf * (kf - 1.0) * e;
            let pre = fiedler_precondition(8.0 * kf * (kf - 1.0) * e * log_term, fiedler);
            finish(
                theorem.to_string(),
                d * d * rate,
                Some(d),
                vec![pre],
                inputs.clone(),
                None,
            )
        }
        Theorem::General => {
            let sizes = if inputs.set_sizes.is_empty() {
                vec![k]
            } else {
                inputs.set_sizes.clone()
            };
            let c = match constants {
                Some(c) => c.clone(),
                None => model_constants(&model, b, &sizes)?,
            };
            let cc =
                c.c.ok_or_else(|| Error::validation("general bound needs constant C"))?;
            let sigma = sigma_fk(&model, &sizes)?;
            let d = c.b / (c.a * cc);
            let pre = fiedler_precondition(32.0 * (sigma / cc) * log_term, fiedler);
            finish(
                theorem.to_string(),
                32.0 * d * d * sigma * rate,
                Some(d),
                vec![pre],
                inputs.clone(),
                Some(c),
            )
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CramerRaoReport {
    pub variant: String,
    pub bound_value: f64,
    /// `Σ_{i≥2} 1/λ_i` of the expected Laplacian, when the variant uses it.
    pub spectral_sum: Option<f64>,
    pub m: usize,
    pub a_tilde: f64,
    pub c_tilde: f64,
}

fn tilde_constants(constants: &ModelConstants) -> Result<(f64, f64)> {
    match (constants.a_tilde, constants.c_tilde) {
        (Some(a), Some(c)) if a > 0.0 && c > 0.0 => Ok((a, c)),
        _ => Err(Error::validation(
            "the lower bound needs positive constants Ã and C̃",
        )),
    }
}

fn spectral_sum(expected: &WeightedAdjacency) -> Result<f64> {
    let s = expected.spectrum()?;
    if !(s.fiedler > FIEDLER_THRESHOLD) {
        return Err(Error::Disconnected(
            "expected comparison design is disconnected".into(),
        ));
    }
    Ok(s.eigenvalues[1..].iter().map(|l| 1.0 / l).sum())
}

/// `(1/(ÃC̃)) Σ_{i≥2} 1/λ_i(L_{M̄_{w*}}) / m` for any unbiased estimator.
pub fn cramer_rao_lower_bound(
    expected_wstar: &WeightedAdjacency,
    m: usize,
    constants: &ModelConstants,
) -> Result<CramerRaoReport> {
    let (at, ct) = tilde_constants(constants)?;
    if m == 0 {
        return Err(Error::validation("m must be at least 1"));
    }
    let s = spectral_sum(expected_wstar)?;
    Ok(CramerRaoReport {
        variant: "spectral".into(),
        bound_value: s / (at * ct * m as f64),
        spectral_sum: Some(s),
        m,
        a_tilde: at,
        c_tilde: ct,
    })
}

/// Fixed set size `k`: `(1/(ÃC̃)) (1 − 1/k) γ_{F,k} Σ_{i≥2} 1/λ_i(L_{M̄_{1/k²}}) / m`.
pub fn cramer_rao_fixed_k(
    model: &NoiseModel,
    k: usize,
    expected_inverse_square: &WeightedAdjacency,
    m: usize,
    constants: &ModelConstants,
) -> Result<CramerRaoReport> {
    let (at, ct) = tilde_constants(constants)?;
    if m == 0 {
        return Err(Error::validation("m must be at least 1"));
    }
    let s = spectral_sum(expected_inverse_square)?;
    let gamma = model.gamma_fk(k)?;
    Ok(CramerRaoReport {
        variant: "fixed-k".into(),
        bound_value: (1.0 - 1.0 / k as f64) * gamma * s / (at * ct * m as f64),
        spectral_sum: Some(s),
        m,
        a_tilde: at,
        c_tilde: ct,
    })
}

/// Uniformly random `k`-sets: `(1/(ÃC̃)) (1 − 1/n)² γ_{F,k} n / m`.
pub fn cramer_rao_uniform(
    model: &NoiseModel,
    k: usize,
    n: usize,
    m: usize,
    constants: &ModelConstants,
) -> Result<CramerRaoReport> {
    let (at, ct) = tilde_constants(constants)?;
    if m == 0 || n < 2 {
        return Err(Error::validation("need n >= 2 and m >= 1"));
    }
    let nf = n as f64;
    let gamma = model.gamma_fk(k)?;
    Ok(CramerRaoReport {
        variant: "uniform".into(),
        bound_value: (1.0 - 1.0 / nf).powi(2) * gamma * nf / (at * ct * m as f64),
        spectral_sum: None,
        m,
        a_tilde: at,
        c_tilde: ct,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::comparisons::Weight;
    use crate::noise::NoiseKind;
    use std::collections::BTreeMap;
    use std::f64::consts::E;

    fn inputs(n: usize, m: usize, k: usize, b: f64, fiedler: f64) -> BoundInputs {
        BoundInputs {
            n,
            m,
            k,
            b,
            model: NoiseModel::gumbel(1.0).unwrap(),
            fiedler,
            set_sizes: vec![],
        }
    }

    #[test]
    fn bradley_terry_constants() {
        let c = bt_pair_constants(1.0, 1.0).unwrap();
        assert!((c.b / c.a - (E * E + 1.0)).abs() < 1e-12);
        assert!((bt_pair_d(1.0, 1.0) - 8.389056).abs() < 1e-6);
        let c = bt_pair_constants(1.0, 0.0).unwrap();
        assert_eq!((c.a, c.b), (0.25, 0.5));
        assert!((bt_pair_d(1.0, 0.0) - 2.0).abs() < 1e-15);
        assert!((bt_pair_d(0.7, 1e-9) - 1.4).abs() < 1e-8);
        for (beta, b) in [(0.5, 0.3), (2.0, 1.7), (1.0, 4.0)] {
            let c = bt_pair_constants(beta, b).unwrap();
            assert!((c.b / c.a - bt_pair_d(beta, b)).abs() <= 1e-12 * bt_pair_d(beta, b));
        }
    }

    #[test]
    fn numeric_pair_constants_match_bradley_terry() {
        let model = NoiseModel::gumbel(1.0).unwrap();
        let num = numeric_pair_constants(&model, 0.8).unwrap();
        let exact = bt_pair_constants(1.0, 0.8).unwrap();
        assert!((num.a - exact.a).abs() < 1e-9);
        assert!((num.b - exact.b).abs() < 1e-9);
    }

    #[test]
    fn luce_closed_forms() {
        let c = luce_constants(1.0, 1.0).unwrap();
        assert!((c.a - (-4.0_f64).exp()).abs() < 1e-15);
        assert_eq!(c.b, 4.0);
        assert!((c.c.unwrap() - (-2.0_f64).exp()).abs() < 1e-15);
        let c = luce_constants(1.0, 0.0).unwrap();
        assert_eq!((c.a, c.c), (1.0, Some(1.0)));
        let c = luce_constants(2.0, 1.0).unwrap();
        assert!((c.a_tilde.unwrap() - E * E).abs() < 1e-12);
    }

    #[test]
    fn sampled_luce_constants_respect_the_closed_form_bounds() {
        let model = NoiseModel::gumbel(1.0).unwrap();
        let b = 0.6;
        let num = numeric_constants(&model, b, &[2, 3], 64).unwrap();
        let exact = luce_constants(1.0, b).unwrap();
        assert!(num.a >= exact.a - 1e-12 && num.a <= 1.0);
        assert!(num.c.unwrap() >= exact.c.unwrap() - 1e-12 && num.c.unwrap() <= 1.0);
        assert!(num.a_tilde.unwrap() <= exact.a_tilde.unwrap() + 1e-12);
        assert!(num.c_tilde.unwrap() <= exact.c_tilde.unwrap() + 1e-12);
        assert!(num.b >= 1.0 && num.b <= exact.b);
        assert!(!num.certified);
        // Pairs attain C at a vertex: p(−2b)/p(0) = 2/(1 + e^{2b}).
        let pair = numeric_constants(&model, b, &[2], 0).unwrap();
        assert!((pair.c.unwrap() - 2.0 / (1.0 + (2.0 * b).exp())).abs() < 1e-12);
    }

    #[test]
    fn sampled_constants_approach_one_for_small_radius() {
        for kind in [NoiseKind::Gaussian, NoiseKind::Laplace, NoiseKind::Uniform] {
            let model = NoiseModel::unit_variance(kind);
            let c = numeric_constants(&model, 1e-3, &[3], 16).unwrap();
            for v in [c.b, c.c.unwrap(), c.c_tilde.unwrap()] {
                assert!((v - 1.0).abs() < 0.05, "{model}: {c:?}");
            }
            // Uniform p_k is not twice differentiable at the origin.
            if kind != NoiseKind::Uniform {
                for v in [c.a, c.a_tilde.unwrap()] {
                    assert!((v - 1.0).abs() < 0.05, "{model}: {c:?}");
                }
            }
        }
    }

    #[test]
    fn luce_full_example() {
        let r = mse_upper_bound(Theorem::LuceFull, &inputs(10, 100, 2, 0.0, 1.8), None).unwrap();
        assert_eq!(r.d, Some(16.0));
        let expected = 256.0 * 10.0 * (10.0_f64.ln() + 2.0) / (1.8 * 1.8) / 100.0;
        assert!((r.bound_value - expected).abs() < 1e-12);
        assert!((r.bound_value - 33.99).abs() < 0.01);
    }

    #[test]
    fn rank_breaking_d_ratio() {
        for k in 2..8 {
            let i = inputs(20, 500, k, 0.5, 3.0);
            let one = mse_upper_bound(Theorem::RankOne, &i, None).unwrap();
            let all = mse_upper_bound(Theorem::RankAll, &i, None).unwrap();
            let kf = k as f64;
            let ratio = one.bound_value / all.bound_value;
            assert!((ratio - kf / (32.0 * (kf - 1.0))).abs() < 1e-12);
        }
    }

    #[test]
    fn bounds_scale_as_inverse_m() {
        for t in [
            Theorem::Pair,
            Theorem::LuceFull,
            Theorem::General,
            Theorem::RankAll,
            Theorem::RankOne,
        ] {
            let a = mse_upper_bound(t, &inputs(10, 400, 2, 0.5, 2.0), None).unwrap();
            let b = mse_upper_bound(t, &inputs(10, 800, 2, 0.5, 2.0), None).unwrap();
            assert!((a.bound_value / b.bound_value - 2.0).abs() < 1e-12, "{t}");
        }
    }

    #[test]
    fn preconditions_are_flagged_not_enforced() {
        let r = mse_upper_bound(Theorem::RankAll, &inputs(10, 10, 4, 1.0, 0.5), None).unwrap();
        assert!(!r.preconditions_met);
        assert!(r.bound_value > 0.0);
        assert!(mse_upper_bound(Theorem::Pair, &inputs(10, 10, 2, 1.0, 0.0), None).is_err());
        let mut g = inputs(10, 10, 2, 1.0, 1.0);
        g.model = NoiseModel::gaussian(1.0).unwrap();
        assert!(matches!(
            mse_upper_bound(Theorem::LuceFull, &g, None),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn general_bound_for_luce_uses_closed_form_constants() {
        let i = inputs(10, 1000, 3, 0.5, 1.0);
        let r = mse_upper_bound(Theorem::General, &i, None).unwrap();
        let c = luce_constants(1.0, 0.5).unwrap();
        let d = c.b / (c.a * c.c.unwrap());
        let sigma = 1.0 / NoiseModel::gumbel(1.0).unwrap().gamma_fk(3).unwrap();
        let expected = 32.0 * d * d * sigma * 10.0 * (10.0_f64.ln() + 2.0) / 1000.0;
        assert!((r.bound_value - expected).abs() < 1e-9 * expected);
    }

    #[test]
    fn cramer_rao_uniform_example() {
        let model = NoiseModel::gumbel(1.0).unwrap();
        let c = luce_constants(1.0, 0.0).unwrap();
        let r = cramer_rao_uniform(&model, 2, 10, 1000, &c).unwrap();
        assert!((r.bound_value - 0.0162).abs() < 1e-12);
    }

    #[test]
    fn cramer_rao_variants_agree_for_uniform_designs() {
        let model = NoiseModel::unit_variance(NoiseKind::Laplace);
        let c = ModelConstants {
            a_tilde: Some(1.3),
            c_tilde: Some(1.1),
            ..luce_constants(1.0, 0.0).unwrap()
        };
        for (n, k) in [(10, 2), (12, 3), (8, 5)] {
            let mix = BTreeMap::from([(k, 1.0)]);
            let wstar =
                WeightedAdjacency::expected_unbiased(n, &mix, &Weight::Optimal(model)).unwrap();
            let inv_sq =
                WeightedAdjacency::expected_unbiased(n, &mix, &Weight::InverseSquare).unwrap();
            let full = cramer_rao_lower_bound(&wstar, 500, &c).unwrap().bound_value;
            let fixed = cramer_rao_fixed_k(&model, k, &inv_sq, 500, &c)
                .unwrap()
                .bound_value;
            let uni = cramer_rao_uniform(&model, k, n, 500, &c)
                .unwrap()
                .bound_value;
            assert!(
                (full - uni).abs() < 1e-9 * full,
                "n={n} k={k}: {full} vs {uni}"
            );
            assert!(
                (full - fixed).abs() < 1e-9 * full,
                "n={n} k={k}: {full} vs {fixed}"
            );
        }
    }

    #[test]
    fn cramer_rao_spectral_sum_of_equal_pair_design() {
        // Equal entries c: Laplacian eigenvalues n·c, so Σ_{i≥2} 1/λ_i = (n−1)/(n c).
        let n = 7;
        let cval = 0.3;
        let m = nalgebra::DMatrix::from_fn(n, n, |i, j| if i == j { 0.0 } else { cval });
        let a = WeightedAdjacency::from_matrix(m).unwrap();
        let consts = luce_constants(1.0, 0.0).unwrap();
        let r = cramer_rao_lower_bound(&a, 1, &consts).unwrap();
        assert!((r.spectral_sum.unwrap() - (n as f64 - 1.0) / (n as f64 * cval)).abs() < 1e-10);
        let big = cramer_rao_lower_bound(&a, 1_000_000, &consts).unwrap();
        assert!(big.bound_value < 1e-5);
    }

    #[test]
    fn theorem_names() {
        for t in [
            Theorem::Pair,
            Theorem::LuceFull,
            Theorem::General,
            Theorem::RankAll,
            Theorem::RankOne,
        ] {
            assert_eq!(t.to_string().parse::<Theorem>().unwrap(), t);
        }
    }
}
