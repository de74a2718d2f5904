//! Adaptive Gauss–Kronrod (7/15) quadrature over finite intervals.
//!
//! Integrands may be vector valued: every component is integrated on the same
//! mesh and the mesh is refined until each component meets its tolerance.
//! Known non-smooth points of the integrand can be passed as breakpoints so
//! that no panel straddles a kink.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

/// Abscissae of the 15-point Kronrod rule on [-1, 1] (non-negative half).
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

/// Weights of the embedded 7-point Gauss rule (nodes XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

const MAX_PANELS: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-10,
            rel: 1e-9,
        }
    }
}

impl Tolerance {
    pub fn new(abs: f64, rel: f64) -> Self {
        Tolerance { abs, rel }
    }

    fn allowed(&self, value: f64) -> f64 {
        self.abs.max(self.rel * value.abs())
    }
}

struct Panel {
    a: f64,
    b: f64,
    value: Vec<f64>,
    err: Vec<f64>,
    priority: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        scaled = res_asc * (200.0 * scaled / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

/// One application of the 15-point Kronrod rule with its embedded Gauss estimate.
fn kronrod15<F>(f: &mut F, dim: usize, a: f64, b: f64, buf: &mut [f64]) -> Panel
where
    F: FnMut(f64, &mut [f64]),
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fvals = vec![0.0; 15 * dim];

    // Node order: center, then symmetric pairs (j = 0..7).
    f(center, buf);
    fvals[..dim].copy_from_slice(buf);
    for j in 0..7 {
        let dx = half * XGK[j];
        f(center - dx, buf);
        fvals[(1 + 2 * j) * dim..(2 + 2 * j) * dim].copy_from_slice(buf);
        f(center + dx, buf);
        fvals[(2 + 2 * j) * dim..(3 + 2 * j) * dim].copy_from_slice(buf);
    }

    let mut value = vec![0.0; dim];
    let mut err = vec![0.0; dim];
    for c in 0..dim {
        let fc = fvals[c];
        let mut kron = WGK[7] * fc;
        let mut gauss = WG[3] * fc;
        let mut res_abs = (WGK[7] * fc).abs();
        for j in 0..7 {
            let lo = fvals[(1 + 2 * j) * dim + c];
            let hi = fvals[(2 + 2 * j) * dim + c];
            kron += WGK[j] * (lo + hi);
            res_abs += WGK[j] * (lo.abs() + hi.abs());
            if j % 2 == 1 {
                gauss += WG[j / 2] * (lo + hi);
            }
        }
        let mean = 0.5 * kron;
        let mut res_asc = WGK[7] * (fc - mean).abs();
        for j in 0..7 {
            let lo = fvals[(1 + 2 * j) * dim + c];
            let hi = fvals[(2 + 2 * j) * dim + c];
            res_asc += WGK[j] * ((lo - mean).abs() + (hi - mean).abs());
        }
        let scale = half.abs();
        value[c] = kron * half;
        err[c] = rescale_error((kron - gauss) * half, res_abs * scale, res_asc * scale);
    }
    let priority = err.iter().cloned().fold(0.0, f64::max);
    Panel {
        a,
        b,
        value,
        err,
        priority,
    }
}

/// Integrate a vector-valued function over `[a, b]`.
///
/// `f(x, out)` must write `dim` components into `out`. Breakpoints outside
/// `(a, b)` are ignored.
pub fn integrate_vec<F>(
    mut f: F,
    dim: usize,
    a: f64,
    b: f64,
    breakpoints: &[f64],
    tol: Tolerance,
) -> Result<Vec<f64>>
where
    F: FnMut(f64, &mut [f64]),
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::validation("integration limits must be finite"));
    }
    if b <= a {
        return Ok(vec![0.0; dim]);
    }

    let mut cuts: Vec<f64> = breakpoints
        .iter()
        .copied()
        .filter(|&x| x > a && x < b)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(a);
    edges.extend(cuts);
    edges.push(b);

    let mut buf = vec![0.0; dim];
    let mut heap = BinaryHeap::new();
    let mut total = vec![0.0; dim];
    let mut total_err = vec![0.0; dim];
    for w in edges.windows(2) {
        let panel = kronrod15(&mut f, dim, w[0], w[1], &mut buf);
        for c in 0..dim {
            total[c] += panel.value[c];
            total_err[c] += panel.err[c];
        }
        heap.push(panel);
    }

    let min_width = (b - a) * 1e-13;
    let mut frozen_err = vec![0.0; dim];
    let mut panels = heap.len();
    loop {
        let converged = (0..dim).all(|c| total_err[c] <= tol.allowed(total[c]));
        if converged {
            return Ok(total);
        }
        let worst = match heap.pop() {
            Some(p) => p,
            None => break,
        };
        let mid = 0.5 * (worst.a + worst.b);
        if worst.b - worst.a < min_width {
            // Cannot refine further; keep its contribution as-is.
            for c in 0..dim {
                frozen_err[c] += worst.err[c];
            }
            continue;
        }
        if panels >= MAX_PANELS {
            heap.push(worst);
            break;
        }
        let left = kronrod15(&mut f, dim, worst.a, mid, &mut buf);
        let right = kronrod15(&mut f, dim, mid, worst.b, &mut buf);
        for c in 0..dim {
            total[c] += left.value[c] + right.value[c] - worst.value[c];
            total_err[c] += left.err[c] + right.err[c] - worst.err[c];
        }
        heap.push(left);
        heap.push(right);
        panels += 1;
    }

    // Recompute the error sum directly to shed accumulated cancellation.
    let mut worst: Option<(f64, f64)> = None;
    for c in 0..dim {
        let err: f64 = heap.iter().map(|p| p.err[c]).sum::<f64>() + frozen_err[c];
        let allowed = tol.allowed(total[c]);
        if err > allowed && worst.is_none_or(|(e, a)| err / allowed > e / a) {
            worst = Some((err, allowed));
        }
    }
    match worst {
        Some((achieved, requested)) => Err(Error::Quadrature {
            achieved,
            requested,
        }),
        None => Ok(total),
    }
}

/// Integrate a scalar function over `[a, b]`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, breakpoints: &[f64], tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    integrate_vec(|x, out| out[0] = f(x), 1, a, b, breakpoints, tol).map(|v| v[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_are_exact_on_polynomials() {
        // K15 is exact through degree 22, G7 through degree 13.
        let tol = Tolerance::default();
        for deg in [0_i32, 1, 5, 13, 22] {
            let v = integrate(|x| x.powi(deg), 0.0, 1.0, &[], tol).unwrap();
            assert!(
                (v - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14,
                "deg {deg}: {v}"
            );
        }
        let wsum: f64 = WGK[7] + 2.0 * WGK[..7].iter().sum::<f64>();
        assert!((wsum - 2.0).abs() < 1e-15);
        let gsum: f64 = WG[3] + 2.0 * WG[..3].iter().sum::<f64>();
        assert!((gsum - 2.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_and_kinked_integrands() {
        let tol = Tolerance::new(1e-12, 1e-12);
        let v = integrate(|x| (-x * x).exp(), -10.0, 10.0, &[], tol).unwrap();
        assert!((v - std::f64::consts::PI.sqrt()).abs() < 1e-11);

        let v = integrate(|x: f64| x.abs(), -1.0, 2.0, &[0.0], tol).unwrap();
        assert!((v - 2.5).abs() < 1e-14);
        let v = integrate(|x: f64| x.abs(), -1.0, 2.0, &[], tol).unwrap();
        assert!((v - 2.5).abs() < 1e-10);
    }

    #[test]
    fn vector_components_share_the_mesh() {
        let v = integrate_vec(
            |x, out| {
                out[0] = x.sin();
                out[1] = x.cos();
            },
            2,
            0.0,
            std::f64::consts::PI,
            &[],
            Tolerance::default(),
        )
        .unwrap();
        assert!((v[0] - 2.0).abs() < 1e-10);
        assert!(v[1].abs() < 1e-10);
    }

    #[test]
    fn empty_and_reversed_ranges_integrate_to_zero() {
        let v = integrate(|_| 1.0, 1.0, 1.0, &[], Tolerance::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn non_finite_limits_are_rejected() {
        assert!(integrate(|_| 1.0, 0.0, f64::INFINITY, &[], Tolerance::default()).is_err());
    }
}
