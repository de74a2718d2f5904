//! Synthetic data from a Thurstone model: strength vectors, comparison-set
//! designs and sampled choices.
//!
//! All randomness comes from ChaCha8 seeded with a `u64`; repetition `r` of an
//! experiment with seed `s` uses the stream seeded with `s + r` (wrapping).

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::comparisons::{Dataset, Observation};
use crate::error::{Error, Result};
use crate::noise::NoiseModel;

/// Tolerance on `Σθ = 0`.
pub const ZERO_SUM_TOL: f64 = 1e-9;
/// Slack allowed beyond the box radius.
pub const BOX_TOL: f64 = 1e-12;

/// The generator used for repetition `rep` of a run seeded with `seed`.
pub fn substream(seed: u64, rep: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep))
}

/// A strength vector in `Θ = {θ ∈ [−b, b]^n : Σθ = 0}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamVector {
    theta: Vec<f64>,
    b: f64,
}

impl ParamVector {
    pub fn new(theta: Vec<f64>, b: f64) -> Result<Self> {
        if !(b.is_finite() && b > 0.0) {
            return Err(Error::validation(format!(
                "box radius must be positive, got {b}"
            )));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("strength vector has non-finite entries"));
        }
        let sum: f64 = theta.iter().sum();
        if sum.abs() > ZERO_SUM_TOL {
            return Err(Error::validation(format!(
                "strengths must sum to zero, sum is {sum:e}"
            )));
        }
        if let Some(v) = theta.iter().find(|v| v.abs() > b + BOX_TOL) {
            return Err(Error::validation(format!(
                "strength {v} lies outside [-{b}, {b}]"
            )));
        }
        Ok(ParamVector { theta, b })
    }

    pub fn zeros(n: usize, b: f64) -> Result<Self> {
        ParamVector::new(vec![0.0; n], b)
    }

    /// The point of Θ closest to `v` in Euclidean distance.
    pub fn projected(v: &[f64], b: f64) -> Result<Self> {
        ParamVector::new(project_zero_sum_box(v, b), b)
    }

    /// Independent uniform draws on `[−radius, radius]`, then projected onto Θ.
    pub fn random<R: Rng + ?Sized>(n: usize, radius: f64, b: f64, rng: &mut R) -> Result<Self> {
        let v: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..=radius)).collect();
        ParamVector::projected(&v, b)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.theta
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.theta
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }
}

/// Euclidean projection onto `{θ : Σθ = 0, |θ_i| ≤ b}`.
///
/// The solution has the form `θ_i = clip(v_i − τ, −b, b)`; `τ` is found by
/// bisection on the monotone map `τ ↦ Σ clip(v_i − τ)` and then solved exactly
/// on the resulting set of free coordinates.
pub fn project_zero_sum_box(v: &[f64], b: f64) -> Vec<f64> {
    let n = v.len();
    if n == 0 {
        return Vec::new();
    }
    let clip = |x: f64| x.clamp(-b, b);
    let total = |tau: f64| v.iter().map(|&x| clip(x - tau)).sum::<f64>();
    let (mut lo, mut hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &x| {
            (l.min(x), h.max(x))
        });
    lo -= b;
    hi += b;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if total(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let tau = 0.5 * (lo + hi);
    let mut out: Vec<f64> = v.iter().map(|&x| clip(x - tau)).collect();
    // Exact shift on the free coordinates removes the bisection residue.
    let free: Vec<usize> = (0..n).filter(|&i| out[i].abs() < b).collect();
    if !free.is_empty() {
        let fixed: f64 = (0..n).filter(|i| out[*i].abs() >= b).map(|i| out[i]).sum();
        let free_sum: f64 = free.iter().map(|&i| v[i]).sum();
        let tau = (free_sum + fixed) / free.len() as f64;
        for &i in &free {
            out[i] = clip(v[i] - tau);
        }
    }
    out
}

/// How comparison sets are generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DesignKind {
    /// Independent uniform `k`-subsets.
    UniformWithoutReplacement { k: usize },
    /// Every pair once per round, in lexicographic order; odd rounds swap
    /// the listed order of the two members.
    RoundRobin { rounds: usize },
    /// The listed sets, cycled if more observations are requested.
    Explicit { sets: Vec<Vec<usize>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonDesign {
    pub n: usize,
    #[serde(flatten)]
    pub kind: DesignKind,
}

impl ComparisonDesign {
    pub fn uniform(n: usize, k: usize) -> Result<Self> {
        ComparisonDesign::new(n, DesignKind::UniformWithoutReplacement { k })
    }

    pub fn round_robin(n: usize, rounds: usize) -> Result<Self> {
        ComparisonDesign::new(n, DesignKind::RoundRobin { rounds })
    }

    pub fn explicit(n: usize, sets: Vec<Vec<usize>>) -> Result<Self> {
        ComparisonDesign::new(n, DesignKind::Explicit { sets })
    }

    pub fn new(n: usize, kind: DesignKind) -> Result<Self> {
        match &kind {
            DesignKind::UniformWithoutReplacement { k } => {
                if *k < 2 || *k > n {
                    return Err(Error::validation(format!(
                        "set size {k} must lie in 2..={n}"
                    )));
                }
            }
            DesignKind::RoundRobin { rounds } => {
                if *rounds == 0 || n < 2 {
                    return Err(Error::validation(
                        "round robin needs n >= 2 and at least one round",
                    ));
                }
            }
            DesignKind::Explicit { sets } => {
                if sets.is_empty() {
                    return Err(Error::validation("explicit design lists no sets"));
                }
                for set in sets {
                    Observation::new(set.clone(), set.first().copied().unwrap_or(0))?;
                    if set.iter().any(|&i| i >= n) {
                        return Err(Error::validation(format!(
                            "explicit set {set:?} references items beyond n = {n}"
                        )));
                    }
                }
            }
        }
        Ok(ComparisonDesign { n, kind })
    }

    /// Number of observations that completes the design once, if it has one.
    pub fn natural_m(&self) -> Option<usize> {
        match &self.kind {
            DesignKind::UniformWithoutReplacement { .. } => None,
            DesignKind::RoundRobin { rounds } => Some(rounds * self.n * (self.n - 1) / 2),
            DesignKind::Explicit { sets } => Some(sets.len()),
        }
    }

    fn sets<R: Rng + ?Sized>(&self, m: usize, rng: &mut R) -> Vec<Vec<usize>> {
        match &self.kind {
            DesignKind::UniformWithoutReplacement { k } => (0..m)
                .map(|_| {
                    let mut s = index::sample(rng, self.n, *k).into_vec();
                    s.sort_unstable();
                    s
                })
                .collect(),
            DesignKind::RoundRobin { .. } => {
                let n = self.n;
                let pairs: Vec<(usize, usize)> = (0..n)
                    .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
                    .collect();
                (0..m)
                    .map(|t| {
                        let (i, j) = pairs[t % pairs.len()];
                        if (t / pairs.len()) % 2 == 0 {
                            vec![i, j]
                        } else {
                            vec![j, i]
                        }
                    })
                    .collect()
            }
            DesignKind::Explicit { sets } => (0..m).map(|t| sets[t % sets.len()].clone()).collect(),
        }
    }
}

/// Winner of one comparison: the member with the largest `θ_i + ε_i`.
/// Exact ties go to the lowest item index.
pub fn sample_choice<R: Rng + ?Sized>(
    model: &NoiseModel,
    theta: &[f64],
    set: &[usize],
    rng: &mut R,
) -> usize {
    let mut best = set[0];
    let mut best_val = f64::NEG_INFINITY;
    for &i in set {
        let val = theta[i] + model.sample(rng);
        if val > best_val || (val == best_val && i < best) {
            best = i;
            best_val = val;
        }
    }
    best
}

/// `m` observations from the design with choices drawn from the model.
/// Identical arguments give identical datasets.
pub fn sample_dataset(
    model: &NoiseModel,
    theta: &ParamVector,
    design: &ComparisonDesign,
    m: usize,
    seed: u64,
) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_dataset_with(model, theta, design, m, &mut rng)
}

/// As [`sample_dataset`], drawing from a caller-supplied generator.
pub fn sample_dataset_with<R: Rng + ?Sized>(
    model: &NoiseModel,
    theta: &ParamVector,
    design: &ComparisonDesign,
    m: usize,
    rng: &mut R,
) -> Result<Dataset> {
    if m == 0 {
        return Err(Error::validation(
            "number of observations must be at least 1",
        ));
    }
    if theta.n() != design.n {
        return Err(Error::validation(format!(
            "strength vector has {} items but the design has {}",
            theta.n(),
            design.n
        )));
    }
    let observations = design
        .sets(m, rng)
        .into_iter()
        .map(|set| {
            let winner = sample_choice(model, theta.as_slice(), &set, rng);
            Observation::new(set, winner)
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::with_numbered_items(design.n, observations)
}

/// Two-class strengths: half the items at `+b`, half at `−b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoClassTheta {
    pub theta: ParamVector,
    /// `permutation[r]` is the item holding rank `r`; ranks `0..n/2` are the high class.
    pub permutation: Vec<usize>,
}

impl TwoClassTheta {
    /// Items with strength `+b`, ascending.
    pub fn high_class(&self) -> Vec<usize> {
        let half = self.permutation.len() / 2;
        let mut v = self.permutation[..half].to_vec();
        v.sort_unstable();
        v
    }
}

pub fn sample_two_class_theta(n: usize, b: f64, seed: u64) -> Result<TwoClassTheta> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::validation(format!(
            "two-class strengths need an even, positive number of items, got {n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let permutation = index::sample(&mut rng, n, n).into_vec();
    let mut theta = vec![0.0; n];
    for (rank, &item) in permutation.iter().enumerate() {
        theta[item] = if rank < n / 2 { b } else { -b };
    }
    Ok(TwoClassTheta {
        theta: ParamVector::new(theta, b)?,
        permutation,
    })
}
