//! Numerical quadrature: adaptive Gauss-Kronrod (7/15) on finite intervals
//! and fixed composite Gauss-Legendre rules.

use std::collections::BinaryHeap;
use std::cmp::Ordering;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QuadError {
    #[error("integrand is not finite at x = {x}")]
    NonFinite { x: f64 },
    #[error("tolerance not reached after {intervals} subintervals (estimate {value}, error {error})")]
    MaxSubdivisions { intervals: usize, value: f64, error: f64 },
    #[error("invalid interval [{a}, {b}]")]
    BadInterval { a: f64, b: f64 },
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy)]
struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64), QuadError>
where
    F: FnMut(f64) -> f64,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut eval = |x: f64| -> Result<f64, QuadError> {
        let y = f(x);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(QuadError::NonFinite { x })
        }
    };
    let fc = eval(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK.iter().zip(WGK.iter()).take(7).enumerate() {
        let dx = half * x;
        let f1 = eval(center - dx)?;
        let f2 = eval(center + dx)?;
        kronrod += w * (f1 + f2);
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    // |K15 - G7| bounds the error of the embedded Gauss rule, so it is a
    // conservative estimate for the Kronrod value.
    let error = ((kronrod - gauss) * half).abs();
    Ok((value, error))
}

/// Adaptive integration of `f` over `[a, b]`, stopping when the summed error
/// estimate is below `max(abs_tol, rel_tol * |I|)`.
pub fn integrate<F>(mut f: F, a: f64, b: f64, abs_tol: f64, rel_tol: f64) -> Result<Integral, QuadError>
where
    F: FnMut(f64) -> f64,
{
    integrate_limited(&mut f, a, b, abs_tol, rel_tol, 2000)
}

pub fn integrate_limited<F>(
    f: &mut F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
    max_segments: usize,
) -> Result<Integral, QuadError>
where
    F: FnMut(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) || b < a {
        return Err(QuadError::BadInterval { a, b });
    }
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0, evaluations: 0 });
    }
    let (v0, e0) = gk15(f, a, b)?;
    let mut evaluations = 15;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value: v0, error: e0 });
    let mut total = v0;
    let mut total_err = e0;
    loop {
        let tol = abs_tol
            .max(rel_tol * total.abs())
            .max(100.0 * f64::EPSILON * total.abs());
        if total_err <= tol {
            break;
        }
        if heap.len() >= max_segments {
            return Err(QuadError::MaxSubdivisions {
                intervals: heap.len(),
                value: total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // interval cannot be split further in floating point
            heap.push(worst);
            return Err(QuadError::MaxSubdivisions {
                intervals: heap.len(),
                value: total,
                error: total_err,
            });
        }
        let (vl, el) = gk15(f, worst.a, mid)?;
        let (vr, er) = gk15(f, mid, worst.b)?;
        evaluations += 30;
        total += vl + vr - worst.value;
        total_err += el + er - worst.error;
        heap.push(Segment { a: worst.a, b: mid, value: vl, error: el });
        heap.push(Segment { a: mid, b: worst.b, value: vr, error: er });
    }
    // re-sum to shed accumulated cancellation from the running updates
    let value: f64 = heap.iter().map(|s| s.value).sum();
    let error: f64 = heap.iter().map(|s| s.error).sum();
    Ok(Integral { value, error, evaluations })
}

/// Integrate over consecutive breakpoints `pts[0] < pts[1] < ...`, summing the pieces.
pub fn integrate_pieces<F>(mut f: F, pts: &[f64], abs_tol: f64, rel_tol: f64) -> Result<Integral, QuadError>
where
    F: FnMut(f64) -> f64,
{
    let mut out = Integral { value: 0.0, error: 0.0, evaluations: 0 };
    let pieces = pts.len().saturating_sub(1).max(1) as f64;
    for w in pts.windows(2) {
        let r = integrate_limited(&mut f, w[0], w[1], abs_tol / pieces, rel_tol, 2000)?;
        out.value += r.value;
        out.error += r.error;
        out.evaluations += r.evaluations;
    }
    Ok(out)
}

/// Gauss-Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        if d != 0.0 {
            dp = d;
        }
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// A composite Gauss-Legendre rule over a partition of an interval.
#[derive(Debug, Clone)]
pub struct CompositeRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl CompositeRule {
    /// `order` nodes per panel on each panel of `breaks`.
    pub fn new(breaks: &[f64], order: usize) -> Self {
        let (x, w) = gauss_legendre(order);
        let mut nodes = Vec::with_capacity(order * breaks.len());
        let mut weights = Vec::with_capacity(order * breaks.len());
        for p in breaks.windows(2) {
            let c = 0.5 * (p[0] + p[1]);
            let h = 0.5 * (p[1] - p[0]);
            for (xi, wi) in x.iter().zip(&w) {
                nodes.push(c + h * xi);
                weights.push(h * wi);
            }
        }
        Self { nodes, weights }
    }

    /// Uniform panels on `[a, b]` with extra forced breakpoints (kinks of the integrand).
    pub fn with_breaks(a: f64, b: f64, panels: usize, forced: &[f64], order: usize) -> Self {
        let mut breaks: Vec<f64> = (0..=panels)
            .map(|i| a + (b - a) * i as f64 / panels as f64)
            .collect();
        for &x in forced {
            if x > a && x < b {
                breaks.push(x);
            }
        }
        breaks.sort_by(f64::total_cmp);
        breaks.dedup_by(|x, y| (*x - *y).abs() <= 1e-14 * (b - a).abs());
        Self::new(&breaks, order)
    }

    pub fn apply<F: FnMut(f64) -> f64>(&self, mut f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * f(x)).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gk_polynomial_exact() {
        let r = integrate(|x| x.powi(5) - 3.0 * x * x, -1.0, 2.0, 1e-14, 1e-14).unwrap();
        let exact = (64.0 - 1.0) / 6.0 - (8.0 + 1.0);
        assert!((r.value - exact).abs() < 1e-12);
    }

    #[test]
    fn gk_sqrt_singularity() {
        let r = integrate(|x: f64| x.sqrt(), 0.0, 1.0, 1e-12, 1e-12).unwrap();
        assert!((r.value - 2.0 / 3.0).abs() < 1e-10, "{}", r.value);
    }

    #[test]
    fn gk_reports_nonfinite() {
        let e = integrate(|x| 1.0 / x, 0.0, 1.0, 1e-8, 1e-8).unwrap_err();
        assert!(matches!(e, QuadError::NonFinite { .. }));
    }

    #[test]
    fn legendre_rule_integrates_exactly() {
        for n in 1..12 {
            let (x, w) = gauss_legendre(n);
            let deg = 2 * n - 1;
            let approx: f64 = x.iter().zip(&w).map(|(xi, wi)| wi * xi.powi(deg as i32 - 1)).sum();
            let p = deg - 1;
            let exact = if p % 2 == 0 { 2.0 / (p as f64 + 1.0) } else { 0.0 };
            assert!((approx - exact).abs() < 1e-13, "n={n}: {approx} vs {exact}");
        }
    }

    #[test]
    fn composite_rule_with_kink() {
        let rule = CompositeRule::with_breaks(-1.0, 2.0, 3, &[0.3], 8);
        let v = rule.apply(|x: f64| (x - 0.3).abs());
        let exact = 0.5 * 1.3f64.powi(2) + 0.5 * 1.7f64.powi(2);
        assert!((v - exact).abs() < 1e-13);
    }
}
