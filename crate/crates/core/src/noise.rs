//! Noise distributions of the random-utility model and the choice
//! probability `p_k(x) = ∫ ∏_v F(x_v + z) f(z) dz` built from them.
//!
//! The double-exponential (Gumbel) model has closed forms for everything and
//! corresponds to the Luce / Bradley–Terry model. The other three models are
//! evaluated by adaptive quadrature, with the kinks of their densities and
//! distribution functions passed to the integrator as breakpoints.

use std::f64::consts::{PI, SQRT_2};
use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use statrs::function::erf::{erfc, erfc_inv};

use crate::error::{Error, Result};
use crate::quadrature::{integrate, integrate_vec, Tolerance};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_860_606_512_090_082;

/// Largest comparison-set size accepted by closed-form expressions.
pub const MAX_K_CLOSED_FORM: usize = 1_000_000;
/// Largest comparison-set size accepted by quadrature-based expressions.
pub const MAX_K_QUADRATURE: usize = 1_000;

/// Half-width of the truncated integration domain, in standard deviations.
const TRUNCATION_SDS: f64 = 12.0;
/// Exponential tails are additionally extended to where they fall below e^-40.
const EXP_TAIL_SCALES: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    DoubleExponential,
    Laplace,
    Uniform,
}

impl NoiseKind {
    fn param_name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "sigma",
            NoiseKind::DoubleExponential | NoiseKind::Laplace => "beta",
            NoiseKind::Uniform => "a",
        }
    }

    fn spec_name(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::DoubleExponential => "gumbel",
            NoiseKind::Laplace => "laplace",
            NoiseKind::Uniform => "uniform",
        }
    }

    /// Whether the density is an even function.
    pub fn has_even_density(self) -> bool {
        !matches!(self, NoiseKind::DoubleExponential)
    }
}

impl FromStr for NoiseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => Ok(NoiseKind::Gaussian),
            "gumbel" | "double-exponential" | "double_exponential" | "luce" => {
                Ok(NoiseKind::DoubleExponential)
            }
            "laplace" => Ok(NoiseKind::Laplace),
            "uniform" => Ok(NoiseKind::Uniform),
            other => Err(Error::validation(format!("unknown noise kind '{other}'"))),
        }
    }
}

/// A zero-mean noise distribution: its kind and scale parameter
/// (σ for Gaussian, β for double-exponential and Laplace, a for uniform).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    scale: f64,
}

/// Pairwise strength differences `θ_i − θ_j`, `j ∈ S∖{i}`, for a comparison
/// set of size `k = len + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffVector(Vec<f64>);

impl DiffVector {
    pub fn new(entries: Vec<f64>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::validation(
                "difference vector must have at least one entry",
            ));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation(
                "difference vector has non-finite entries",
            ));
        }
        Ok(DiffVector(entries))
    }

    /// Differences between the strength of `chosen` and every other member of `set`.
    pub fn from_strengths(theta: &[f64], set: &[usize], chosen: usize) -> Result<Self> {
        let entries = set
            .iter()
            .filter(|&&v| v != chosen)
            .map(|&v| theta[chosen] - theta[v])
            .collect();
        DiffVector::new(entries)
    }

    pub fn zeros(len: usize) -> Result<Self> {
        DiffVector::new(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Size of the comparison set this vector describes.
    pub fn set_size(&self) -> usize {
        self.0.len() + 1
    }
}

/// The alternative representations of `∂p_k(0)/∂x_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Dpk0Forms {
    /// `∫ f(x)² F(x)^{k−2} dx`.
    pub direct: f64,
    /// `(1/(k−1)) ∫ f dF^{k−1}`, evaluated in quantile coordinates.
    pub max_form: f64,
    /// `f(a)/(k−1) + (1/(k(k−1))) ∫ (−f') dF^k`; compact support only.
    pub boundary_form: Option<f64>,
    /// `∫_0^∞ f² (F^{k−2} + (1−F)^{k−2}) dx`; even densities only.
    pub even_form: Option<f64>,
}

fn check_k(k: usize, cap: usize) -> Result<()> {
    if k < 2 {
        return Err(Error::validation(format!(
            "comparison-set size must be >= 2, got {k}"
        )));
    }
    if k > cap {
        return Err(Error::validation(format!(
            "comparison-set size {k} exceeds the supported maximum {cap}"
        )));
    }
    Ok(())
}

/// Open-interval uniform draw in (0, 1).
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    ((rng.random::<u64>() >> 11) as f64 + 0.5) / (1u64 << 53) as f64
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, scale: f64) -> Result<Self> {
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::validation(format!(
                "noise scale must be positive and finite, got {scale}"
            )));
        }
        Ok(NoiseModel { kind, scale })
    }

    pub fn gaussian(sigma: f64) -> Result<Self> {
        NoiseModel::new(NoiseKind::Gaussian, sigma)
    }

    pub fn gumbel(beta: f64) -> Result<Self> {
        NoiseModel::new(NoiseKind::DoubleExponential, beta)
    }

    pub fn laplace(beta: f64) -> Result<Self> {
        NoiseModel::new(NoiseKind::Laplace, beta)
    }

    pub fn uniform(a: f64) -> Result<Self> {
        NoiseModel::new(NoiseKind::Uniform, a)
    }

    /// The model of the given kind whose noise has variance one.
    pub fn unit_variance(kind: NoiseKind) -> Self {
        let scale = match kind {
            NoiseKind::Gaussian => 1.0,
            NoiseKind::DoubleExponential => 6.0_f64.sqrt() / PI,
            NoiseKind::Laplace => 1.0 / SQRT_2,
            NoiseKind::Uniform => 3.0_f64.sqrt(),
        };
        NoiseModel { kind, scale }
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Double-exponential noise, i.e. the Luce choice model.
    pub fn is_luce(&self) -> bool {
        self.kind == NoiseKind::DoubleExponential
    }

    pub fn variance(&self) -> f64 {
        let s = self.scale;
        match self.kind {
            NoiseKind::Gaussian => s * s,
            NoiseKind::DoubleExponential => PI * PI * s * s / 6.0,
            NoiseKind::Laplace => 2.0 * s * s,
            NoiseKind::Uniform => s * s / 3.0,
        }
    }

    pub fn std_dev(&self) -> f64 {
        self.variance().sqrt()
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.kind {
            NoiseKind::Gaussian => 0.5 * erfc(-x / (s * SQRT_2)),
            NoiseKind::DoubleExponential => (-(-(x + s * EULER_GAMMA) / s).exp()).exp(),
            NoiseKind::Laplace => {
                if x < 0.0 {
                    0.5 * (x / s).exp()
                } else {
                    1.0 - 0.5 * (-x / s).exp()
                }
            }
            NoiseKind::Uniform => ((x + s) / (2.0 * s)).clamp(0.0, 1.0),
        }
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.kind {
            NoiseKind::Gaussian => (-0.5 * (x / s).powi(2)).exp() / (s * (2.0 * PI).sqrt()),
            NoiseKind::DoubleExponential => {
                let t = (x + s * EULER_GAMMA) / s;
                (-t - (-t).exp()).exp() / s
            }
            NoiseKind::Laplace => (-x.abs() / s).exp() / (2.0 * s),
            NoiseKind::Uniform => {
                if x.abs() <= s {
                    0.5 / s
                } else {
                    0.0
                }
            }
        }
    }

    /// Derivative of the density. Kinks (Laplace at 0, uniform at ±a) take the value 0.
    pub fn pdf_deriv(&self, x: f64) -> f64 {
        let s = self.scale;
        match self.kind {
            NoiseKind::Gaussian => -x / (s * s) * self.pdf(x),
            NoiseKind::DoubleExponential => {
                let f = self.pdf(x);
                if f == 0.0 {
                    return 0.0;
                }
                let t = (x + s * EULER_GAMMA) / s;
                f * ((-t).exp() - 1.0) / s
            }
            NoiseKind::Laplace => {
                if x > 0.0 {
                    -self.pdf(x) / s
                } else if x < 0.0 {
                    self.pdf(x) / s
                } else {
                    0.0
                }
            }
            NoiseKind::Uniform => 0.0,
        }
    }

    /// Inverse distribution function for `u ∈ (0, 1)`.
    pub fn quantile(&self, u: f64) -> f64 {
        let s = self.scale;
        match self.kind {
            NoiseKind::Gaussian => {
                // Polish the inverse with Newton steps on the standard normal cdf.
                let mut z = -SQRT_2 * erfc_inv(2.0 * u);
                for _ in 0..2 {
                    let phi = (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
                    if phi <= 0.0 {
                        break;
                    }
                    let c = if z < 0.0 {
                        0.5 * erfc(-z / SQRT_2) - u
                    } else {
                        (1.0 - u) - 0.5 * erfc(z / SQRT_2)
                    };
                    z -= c / phi;
                }
                s * z
            }
            NoiseKind::DoubleExponential => -s * (-u.ln()).ln() - s * EULER_GAMMA,
            NoiseKind::Laplace => {
                if u < 0.5 {
                    s * (2.0 * u).ln()
                } else {
                    -s * (2.0 * (1.0 - u)).ln()
                }
            }
            NoiseKind::Uniform => s * (2.0 * u - 1.0),
        }
    }

    /// `f(F⁻¹(u))`, closed form where available.
    pub fn density_at_quantile(&self, u: f64) -> f64 {
        let s = self.scale;
        match self.kind {
            NoiseKind::Gaussian => self.pdf(self.quantile(u)),
            NoiseKind::DoubleExponential => u * (-u.ln()) / s,
            NoiseKind::Laplace => u.min(1.0 - u) / s,
            NoiseKind::Uniform => 0.5 / s,
        }
    }

    /// One noise draw. Gaussian uses a standard-normal transform; the others
    /// invert the distribution function.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self.kind {
            NoiseKind::Gaussian => {
                let z: f64 = rng.sample(StandardNormal);
                self.scale * z
            }
            _ => self.quantile(open_unit(rng)),
        }
    }

    /// Integration domain outside which the noise carries negligible mass.
    pub fn support(&self) -> (f64, f64) {
        let s = self.scale;
        let sd = self.std_dev();
        match self.kind {
            NoiseKind::Gaussian => (-TRUNCATION_SDS * sd, TRUNCATION_SDS * sd),
            NoiseKind::DoubleExponential => (
                -TRUNCATION_SDS * sd,
                (TRUNCATION_SDS * sd).max(s * (EXP_TAIL_SCALES - EULER_GAMMA)),
            ),
            NoiseKind::Laplace => {
                let h = (TRUNCATION_SDS * sd).max(s * EXP_TAIL_SCALES);
                (-h, h)
            }
            NoiseKind::Uniform => (-s, s),
        }
    }

    fn has_compact_support(&self) -> bool {
        self.kind == NoiseKind::Uniform
    }

    /// Points where the density or distribution function is not smooth.
    pub fn kinks(&self) -> Vec<f64> {
        match self.kind {
            NoiseKind::Laplace => vec![0.0],
            NoiseKind::Uniform => vec![-self.scale, self.scale],
            _ => Vec::new(),
        }
    }

    /// Jump discontinuities of the density as `(location, f(c+) − f(c−))`.
    pub fn density_jumps(&self) -> Vec<(f64, f64)> {
        match self.kind {
            NoiseKind::Uniform => {
                let h = 0.5 / self.scale;
                vec![(-self.scale, h), (self.scale, -h)]
            }
            _ => Vec::new(),
        }
    }

    /// Integration range and breakpoints for integrands of the form
    /// `f(z) · g(F(x_v + z), f(x_v + z), ...)`.
    fn shifted_domain(&self, x: &[f64]) -> (f64, f64, Vec<f64>) {
        let (lo, hi) = self.support();
        let lo_eff = x.iter().fold(lo, |acc, &xv| acc.max(lo - xv));
        let kinks = self.kinks();
        let mut breaks = kinks.clone();
        for &xv in x {
            breaks.extend(kinks.iter().map(|c| c - xv));
        }
        (lo_eff, hi, breaks)
    }

    /// `p_k(x)`: probability that the item with differences `x` to the
    /// other members is chosen.
    pub fn choice_prob(&self, x: &DiffVector) -> Result<f64> {
        Ok(self.choice_prob_with_grad(x.as_slice(), false)?.0)
    }

    /// Gradient of `p_k` with respect to the difference vector.
    pub fn choice_prob_grad(&self, x: &DiffVector) -> Result<Vec<f64>> {
        Ok(self.choice_prob_with_grad(x.as_slice(), true)?.1)
    }

    /// `p_k(x)` together with its gradient (empty when `with_grad` is false).
    pub fn choice_prob_with_grad(&self, x: &[f64], with_grad: bool) -> Result<(f64, Vec<f64>)> {
        if self.is_luce() {
            return Ok(luce_prob_grad(self.scale, x, with_grad));
        }
        let k1 = x.len();
        let (lo, hi, breaks) = self.shifted_domain(x);
        if lo >= hi {
            return Ok((0.0, vec![0.0; if with_grad { k1 } else { 0 }]));
        }
        let dim = if with_grad { 1 + k1 } else { 1 };
        let mut cdfs = vec![0.0; k1];
        let mut suffix = vec![1.0; k1 + 1];
        let integrand = |z: f64, out: &mut [f64]| {
            let w = self.pdf(z);
            if w == 0.0 {
                out.iter_mut().for_each(|o| *o = 0.0);
                return;
            }
            for (c, &xv) in cdfs.iter_mut().zip(x) {
                *c = self.cdf(xv + z);
            }
            for v in (0..k1).rev() {
                suffix[v] = suffix[v + 1] * cdfs[v];
            }
            out[0] = w * suffix[0];
            if with_grad {
                let mut prefix = 1.0;
                for v in 0..k1 {
                    out[1 + v] = w * self.pdf(x[v] + z) * prefix * suffix[v + 1];
                    prefix *= cdfs[v];
                }
            }
        };
        let vals = integrate_vec(integrand, dim, lo, hi, &breaks, Tolerance::default())?;
        let p = vals[0].clamp(0.0, 1.0);
        let grad = if with_grad {
            vals[1..].to_vec()
        } else {
            Vec::new()
        };
        Ok((p, grad))
    }

    /// Hessian of `p_k` with respect to the difference vector.
    pub fn choice_prob_hessian(&self, x: &DiffVector) -> Result<DMatrix<f64>> {
        let x = x.as_slice();
        let k1 = x.len();
        if self.is_luce() {
            return Ok(luce_hessian(self.scale, x));
        }
        let (lo, hi, breaks) = self.shifted_domain(x);
        if lo >= hi {
            return Ok(DMatrix::zeros(k1, k1));
        }
        let index = |u: usize, v: usize| -> usize {
            let (i, j) = if u <= v { (u, v) } else { (v, u) };
            i * k1 - i * (i + 1) / 2 + j
        };
        let dim = k1 * (k1 + 1) / 2;
        let mut cdfs = vec![0.0; k1];
        let mut pdfs = vec![0.0; k1];
        let integrand = |z: f64, out: &mut [f64]| {
            let w = self.pdf(z);
            out.iter_mut().for_each(|o| *o = 0.0);
            if w == 0.0 {
                return;
            }
            for v in 0..k1 {
                cdfs[v] = self.cdf(x[v] + z);
                pdfs[v] = self.pdf(x[v] + z);
            }
            for u in 0..k1 {
                for v in u..k1 {
                    let mut prod = w;
                    for (r, &c) in cdfs.iter().enumerate() {
                        if r != u && r != v {
                            prod *= c;
                        }
                    }
                    out[index(u, v)] = if u == v {
                        prod * self.pdf_deriv(x[u] + z)
                    } else {
                        prod * pdfs[u] * pdfs[v]
                    };
                }
            }
        };
        let vals = integrate_vec(integrand, dim, lo, hi, &breaks, Tolerance::default())?;
        let mut h = DMatrix::from_fn(k1, k1, |u, v| vals[index(u, v)]);
        // A jump in f contributes a point mass to f' on the diagonal.
        for (u, &xu) in x.iter().enumerate() {
            for (c, jump) in self.density_jumps() {
                let z = c - xu;
                let others: f64 = x
                    .iter()
                    .enumerate()
                    .filter(|&(r, _)| r != u)
                    .map(|(_, &xr)| self.cdf(xr + z))
                    .product();
                h[(u, u)] += jump * self.pdf(z) * others;
            }
        }
        Ok(h)
    }

    /// `∂p_k(0)/∂x_1`, closed form where one exists and quadrature otherwise.
    pub fn dpk0(&self, k: usize) -> Result<f64> {
        let s = self.scale;
        let kf = k as f64;
        match self.kind {
            NoiseKind::Gaussian => self.dpk0_direct(k),
            NoiseKind::DoubleExponential => {
                check_k(k, MAX_K_CLOSED_FORM)?;
                Ok(1.0 / (s * kf * kf))
            }
            NoiseKind::Laplace => {
                check_k(k, MAX_K_CLOSED_FORM)?;
                Ok((1.0 - 0.5_f64.powi(k as i32 - 1)) / (s * kf * (kf - 1.0)))
            }
            NoiseKind::Uniform => {
                check_k(k, MAX_K_CLOSED_FORM)?;
                Ok(1.0 / (2.0 * s * (kf - 1.0)))
            }
        }
    }

    /// Quadrature of `∫ f(x)² F(x)^{k−2} dx`.
    pub fn dpk0_direct(&self, k: usize) -> Result<f64> {
        check_k(k, MAX_K_QUADRATURE)?;
        let (lo, hi) = self.support();
        let p = (k - 2) as i32;
        integrate(
            |x| self.pdf(x).powi(2) * self.cdf(x).powi(p),
            lo,
            hi,
            &self.kinks(),
            Tolerance::new(1e-14, 1e-12),
        )
    }

    /// `(1/(k−1)) ∫ f dF^{k−1}` written as `∫_0^1 f(F⁻¹(u)) u^{k−2} du`.
    pub fn dpk0_max_form(&self, k: usize) -> Result<f64> {
        check_k(k, MAX_K_QUADRATURE)?;
        let p = (k - 2) as i32;
        integrate(
            |u| self.density_at_quantile(u) * u.powi(p),
            0.0,
            1.0,
            &[0.5],
            Tolerance::new(1e-14, 1e-12),
        )
    }

    /// `A_{F,k} + B_{F,k}`, defined only for compactly supported noise.
    pub fn dpk0_boundary_form(&self, k: usize) -> Result<f64> {
        check_k(k, MAX_K_QUADRATURE)?;
        if !self.has_compact_support() {
            return Err(Error::Unsupported(format!(
                "boundary form requires compact support; {} noise is unbounded",
                self.kind.spec_name()
            )));
        }
        let (lo, hi) = self.support();
        let kf = k as f64;
        let edge = 0.5 / self.scale;
        let a_term = edge / (kf - 1.0);
        let p = (k - 1) as i32;
        let b_integral = integrate(
            |x| -self.pdf_deriv(x) * kf * self.cdf(x).powi(p) * self.pdf(x),
            lo,
            hi,
            &self.kinks(),
            Tolerance::new(1e-14, 1e-12),
        )?;
        Ok(a_term + b_integral / (kf * (kf - 1.0)))
    }

    /// `∫_0^∞ f² (F^{k−2} + (1−F)^{k−2}) dx`, defined only for even densities.
    pub fn dpk0_even_form(&self, k: usize) -> Result<f64> {
        check_k(k, MAX_K_QUADRATURE)?;
        if !self.kind.has_even_density() {
            return Err(Error::Unsupported(format!(
                "even form requires an even density; {} noise is skewed",
                self.kind.spec_name()
            )));
        }
        let (_, hi) = self.support();
        let p = (k - 2) as i32;
        integrate(
            |x| {
                let f = self.pdf(x);
                f * f * (self.cdf(x).powi(p) + self.cdf(-x).powi(p))
            },
            0.0,
            hi,
            &self.kinks(),
            Tolerance::new(1e-14, 1e-12),
        )
    }

    pub fn dpk0_characterizations(&self, k: usize) -> Result<Dpk0Forms> {
        Ok(Dpk0Forms {
            direct: self.dpk0_direct(k)?,
            max_form: self.dpk0_max_form(k)?,
            boundary_form: if self.has_compact_support() {
                Some(self.dpk0_boundary_form(k)?)
            } else {
                None
            },
            even_form: if self.kind.has_even_density() {
                Some(self.dpk0_even_form(k)?)
            } else {
                None
            },
        })
    }

    /// `γ_{F,k} = 1 / (k³ (k−1) (∂p_k(0)/∂x_1)²)`.
    pub fn gamma_fk(&self, k: usize) -> Result<f64> {
        let d = self.dpk0(k)?;
        let kf = k as f64;
        Ok(1.0 / (kf.powi(3) * (kf - 1.0) * d * d))
    }

    /// `w*(k) = (k ∂p_k(0)/∂x_1)²`.
    pub fn weight_star(&self, k: usize) -> Result<f64> {
        let d = self.dpk0(k)?;
        Ok((k as f64 * d).powi(2))
    }
}

/// Luce closed form `1/(1 + Σ e^{−x_i/β})` evaluated in log space.
fn luce_prob_grad(beta: f64, x: &[f64], with_grad: bool) -> (f64, Vec<f64>) {
    let exps: Vec<f64> = x.iter().map(|v| -v / beta).collect();
    let max = exps.iter().cloned().fold(0.0_f64, f64::max);
    let sum: f64 = (-max).exp() + exps.iter().map(|e| (e - max).exp()).sum::<f64>();
    let log_denom = max + sum.ln();
    let p = (-log_denom).exp();
    let grad = if with_grad {
        exps.iter()
            .map(|e| (e - 2.0 * log_denom).exp() / beta)
            .collect()
    } else {
        Vec::new()
    };
    (p, grad)
}

fn luce_hessian(beta: f64, x: &[f64]) -> DMatrix<f64> {
    let k1 = x.len();
    let exps: Vec<f64> = x.iter().map(|v| -v / beta).collect();
    let max = exps.iter().cloned().fold(0.0_f64, f64::max);
    let sum: f64 = (-max).exp() + exps.iter().map(|e| (e - max).exp()).sum::<f64>();
    let log_denom = max + sum.ln();
    let b2 = beta * beta;
    DMatrix::from_fn(k1, k1, |u, v| {
        let cross = 2.0 * (exps[u] + exps[v] - 3.0 * log_denom).exp() / b2;
        if u == v {
            cross - (exps[u] - 2.0 * log_denom).exp() / b2
        } else {
            cross
        }
    })
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}:{}={}",
            self.kind.spec_name(),
            self.kind.param_name(),
            self.scale
        )
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    /// Parses `<kind>:<param>=<value>` or `<kind>:unit-variance`.
    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = s.split_once(':').ok_or_else(|| {
            Error::validation(format!("noise spec '{s}' must look like kind:param=value"))
        })?;
        let kind: NoiseKind = kind.parse()?;
        let param = param.trim();
        if param.eq_ignore_ascii_case("unit-variance") {
            return Ok(NoiseModel::unit_variance(kind));
        }
        let (name, value) = param.split_once('=').ok_or_else(|| {
            Error::validation(format!(
                "noise parameter '{param}' must look like name=value"
            ))
        })?;
        if name.trim() != kind.param_name() {
            return Err(Error::validation(format!(
                "{} noise takes parameter '{}', got '{}'",
                kind.spec_name(),
                kind.param_name(),
                name.trim()
            )));
        }
        let value: f64 = value.trim().parse().map_err(|_| {
            Error::validation(format!("noise parameter value '{value}' is not a number"))
        })?;
        NoiseModel::new(kind, value)
    }
}

impl Serialize for NoiseModel {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for NoiseModel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn all_unit() -> Vec<NoiseModel> {
        [
            NoiseKind::Gaussian,
            NoiseKind::DoubleExponential,
            NoiseKind::Laplace,
            NoiseKind::Uniform,
        ]
        .into_iter()
        .map(NoiseModel::unit_variance)
        .collect()
    }

    #[test]
    fn cdf_examples() {
        assert_eq!(NoiseModel::uniform(1.0).unwrap().cdf(0.0), 0.5);
        assert_eq!(NoiseModel::laplace(1.0).unwrap().cdf(0.0), 0.5);
        let g = NoiseModel::gumbel(1.0).unwrap();
        assert!((g.cdf(-EULER_GAMMA) - (-1.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn pdf_examples() {
        assert_eq!(NoiseModel::uniform(2.0).unwrap().pdf(0.0), 0.25);
        let g = NoiseModel::gaussian(1.0).unwrap();
        assert!((g.pdf(0.0) - 1.0 / (2.0 * PI).sqrt()).abs() < 1e-15);
        let l = NoiseModel::laplace(1.0).unwrap();
        assert!((l.pdf(1.0) - 0.5 * (-1.0_f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn densities_integrate_to_one_and_have_zero_mean() {
        for m in all_unit() {
            let (lo, hi) = m.support();
            let tol = Tolerance::new(1e-13, 1e-12);
            let mass = integrate(|x| m.pdf(x), lo, hi, &m.kinks(), tol).unwrap();
            let mean = integrate(|x| x * m.pdf(x), lo, hi, &m.kinks(), tol).unwrap();
            let var = integrate(|x| x * x * m.pdf(x), lo, hi, &m.kinks(), tol).unwrap();
            assert!((mass - 1.0).abs() < 1e-10, "{m}: mass {mass}");
            assert!(mean.abs() < 1e-9, "{m}: mean {mean}");
            assert!((var - m.variance()).abs() < 1e-8, "{m}: var {var}");
        }
    }

    #[test]
    fn pdf_deriv_matches_differences_away_from_kinks() {
        for m in all_unit() {
            for &x in &[-1.3, -0.4, 0.37, 0.9, 2.1] {
                if m.kinks().iter().any(|c| (c - x).abs() < 1e-3) {
                    continue;
                }
                let h = 1e-6;
                let fd = (m.pdf(x + h) - m.pdf(x - h)) / (2.0 * h);
                assert!((fd - m.pdf_deriv(x)).abs() < 1e-7, "{m} at {x}");
            }
        }
        let u = NoiseModel::uniform(1.0).unwrap();
        assert_eq!(u.pdf_deriv(1.0), 0.0);
        assert_eq!(u.pdf_deriv(-1.0), 0.0);
    }

    #[test]
    fn quantile_inverts_cdf() {
        for m in all_unit() {
            for &u in &[1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
                let x = m.quantile(u);
                assert!((m.cdf(x) - u).abs() < 1e-12, "{m} at {u}: {}", m.cdf(x) - u);
                assert!((m.density_at_quantile(u) - m.pdf(x)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn choice_prob_examples() {
        for m in all_unit() {
            for k in 2..=6 {
                let p = m.choice_prob(&DiffVector::zeros(k - 1).unwrap()).unwrap();
                assert!((p - 1.0 / k as f64).abs() < 1e-9, "{m} k={k}: {p}");
            }
        }
        let g = NoiseModel::gumbel(1.0).unwrap();
        let p = g
            .choice_prob(&DiffVector::new(vec![3.0_f64.ln()]).unwrap())
            .unwrap();
        assert!((p - 0.75).abs() < 1e-15);
    }

    #[test]
    fn gaussian_pair_probability_is_convolution_of_two_noises() {
        // X1 − X2 ~ N(0, 2σ²), so p_2(x) = Φ(x / (√2 σ)).
        let g = NoiseModel::gaussian(1.0).unwrap();
        let p = g.choice_prob(&DiffVector::new(vec![0.5]).unwrap()).unwrap();
        let expected = 0.5 * erfc(-0.5 / 2.0);
        assert!((p - expected).abs() < 1e-10, "{p} vs {expected}");
        assert!((p - 0.6382).abs() < 1e-4);
    }

    #[test]
    fn gradient_examples() {
        let g = NoiseModel::gumbel(1.0).unwrap();
        let grad = g.choice_prob_grad(&DiffVector::zeros(2).unwrap()).unwrap();
        for v in grad {
            assert!((v - 1.0 / 9.0).abs() < 1e-15);
        }
        let u = NoiseModel::uniform(1.0).unwrap();
        let grad = u.choice_prob_grad(&DiffVector::zeros(1).unwrap()).unwrap();
        assert!((grad[0] - 0.5).abs() < 1e-12);
        let n = NoiseModel::gaussian(1.0).unwrap();
        let grad = n.choice_prob_grad(&DiffVector::zeros(1).unwrap()).unwrap();
        assert!((grad[0] - 0.5 / PI.sqrt()).abs() < 1e-10);
    }

    #[test]
    fn uniform_pairs_with_disjoint_supports_are_certain() {
        let u = NoiseModel::uniform(1.0).unwrap();
        assert_eq!(
            u.choice_prob(&DiffVector::new(vec![2.5]).unwrap()).unwrap(),
            1.0
        );
        assert_eq!(
            u.choice_prob(&DiffVector::new(vec![-2.5]).unwrap())
                .unwrap(),
            0.0
        );
    }

    #[test]
    fn hessian_matches_gradient_differences() {
        for m in all_unit() {
            let x = DiffVector::new(vec![0.3, -0.45, 0.8]).unwrap();
            let h = m.choice_prob_hessian(&x).unwrap();
            let step = 1e-5;
            for v in 0..3 {
                let mut up = x.as_slice().to_vec();
                let mut dn = x.as_slice().to_vec();
                up[v] += step;
                dn[v] -= step;
                let gu = m.choice_prob_with_grad(&up, true).unwrap().1;
                let gd = m.choice_prob_with_grad(&dn, true).unwrap().1;
                for u in 0..3 {
                    let fd = (gu[u] - gd[u]) / (2.0 * step);
                    assert!(
                        (fd - h[(u, v)]).abs() < 1e-5,
                        "{m} ({u},{v}): {fd} vs {}",
                        h[(u, v)]
                    );
                }
            }
        }
    }

    #[test]
    fn table_values() {
        let g = NoiseModel::gumbel(1.0).unwrap();
        assert!((g.dpk0(3).unwrap() - 1.0 / 9.0).abs() < 1e-15);
        assert!((g.gamma_fk(2).unwrap() - 2.0).abs() < 1e-12);
        let u = NoiseModel::uniform(1.0).unwrap();
        assert!((u.dpk0(4).unwrap() - 1.0 / 6.0).abs() < 1e-15);
        assert!((u.gamma_fk(2).unwrap() - 0.5).abs() < 1e-12);
        let l = NoiseModel::laplace(1.0).unwrap();
        assert!((l.dpk0(2).unwrap() - 0.25).abs() < 1e-15);
        assert!((l.gamma_fk(2).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gamma_and_weight_identity() {
        for m in all_unit() {
            for k in 2..=12 {
                let lhs = 1.0 / m.gamma_fk(k).unwrap();
                let rhs = (k * (k - 1)) as f64 * m.weight_star(k).unwrap();
                assert!((lhs - rhs).abs() <= 1e-12 * lhs, "{m} k={k}");
            }
        }
    }

    #[test]
    fn characterization_forms() {
        let u = NoiseModel::uniform(1.0).unwrap();
        let forms = u.dpk0_characterizations(3).unwrap();
        assert!((forms.direct - 0.25).abs() < 1e-12);
        assert!((forms.boundary_form.unwrap() - 0.25).abs() < 1e-12);
        let l = NoiseModel::laplace(1.0).unwrap();
        assert!((l.dpk0_even_form(2).unwrap() - 0.25).abs() < 1e-12);
        let g = NoiseModel::gaussian(1.0).unwrap();
        let forms = g.dpk0_characterizations(2).unwrap();
        assert!((forms.direct - 0.5 / PI.sqrt()).abs() < 1e-10);
        assert!((forms.even_form.unwrap() - forms.direct).abs() < 1e-10);
    }

    #[test]
    fn unsupported_forms_are_errors() {
        let g = NoiseModel::gaussian(1.0).unwrap();
        assert!(matches!(
            g.dpk0_boundary_form(3),
            Err(Error::Unsupported(_))
        ));
        let gu = NoiseModel::gumbel(1.0).unwrap();
        assert!(matches!(gu.dpk0_even_form(3), Err(Error::Unsupported(_))));
    }

    #[test]
    fn k_limits() {
        let g = NoiseModel::gumbel(1.0).unwrap();
        assert!(g.dpk0(1).is_err());
        assert!(g.dpk0(MAX_K_CLOSED_FORM).is_ok());
        assert!(g.dpk0(MAX_K_CLOSED_FORM + 1).is_err());
        let n = NoiseModel::gaussian(1.0).unwrap();
        assert!(n.dpk0(MAX_K_QUADRATURE + 1).is_err());
    }

    #[test]
    fn spec_strings_round_trip() {
        for s in [
            "gumbel:beta=1",
            "gaussian:sigma=1",
            "laplace:beta=0.5",
            "uniform:a=1",
        ] {
            let m: NoiseModel = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        let m: NoiseModel = "uniform:unit-variance".parse().unwrap();
        assert!((m.variance() - 1.0).abs() < 1e-15);
        let m: NoiseModel = "gumbel:unit-variance".parse().unwrap();
        assert!((m.variance() - 1.0).abs() < 1e-15);
        assert!("gaussian:beta=1".parse::<NoiseModel>().is_err());
        assert!("uniform:a=-1".parse::<NoiseModel>().is_err());
        assert!("cauchy:scale=1".parse::<NoiseModel>().is_err());
        assert!("gumbel".parse::<NoiseModel>().is_err());
    }
}
