//! Monotone piecewise cubic Hermite interpolation (Fritsch-Carlson / PCHIP).

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InterpError {
    #[error("need at least two samples, got {0}")]
    TooFewPoints(usize),
    #[error("abscissae must be strictly increasing (index {0})")]
    NotIncreasing(usize),
    #[error("sample arrays differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("{x} is outside the sampled range [{lo}, {hi}]")]
    OutOfRange { x: f64, lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Pchip {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
}

fn end_slope(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
    if d.signum() != m0.signum() {
        0.0
    } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
        3.0 * m0
    } else {
        d
    }
}

impl Pchip {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Result<Self, InterpError> {
        if x.len() != y.len() {
            return Err(InterpError::LengthMismatch(x.len(), y.len()));
        }
        let n = x.len();
        if n < 2 {
            return Err(InterpError::TooFewPoints(n));
        }
        for i in 0..n {
            if !x[i].is_finite() || !y[i].is_finite() {
                return Err(InterpError::NonFinite(i));
            }
            if i > 0 && x[i] <= x[i - 1] {
                return Err(InterpError::NotIncreasing(i));
            }
        }
        let h: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
        let m: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / h[i]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = m[0];
            d[1] = m[0];
        } else {
            for i in 1..n - 1 {
                if m[i - 1] * m[i] > 0.0 {
                    let w1 = 2.0 * h[i] + h[i - 1];
                    let w2 = h[i] + 2.0 * h[i - 1];
                    d[i] = (w1 + w2) / (w1 / m[i - 1] + w2 / m[i]);
                }
            }
            d[0] = end_slope(h[0], h[1], m[0], m[1]);
            d[n - 1] = end_slope(h[n - 2], h[n - 3], m[n - 2], m[n - 3]);
        }
        Ok(Self { x, y, d })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.x[0], *self.x.last().expect("non-empty"))
    }

    pub fn knots(&self) -> &[f64] {
        &self.x
    }

    pub fn values(&self) -> &[f64] {
        &self.y
    }

    fn locate(&self, t: f64) -> Result<usize, InterpError> {
        let (lo, hi) = self.domain();
        if !(t >= lo && t <= hi) {
            return Err(InterpError::OutOfRange { x: t, lo, hi });
        }
        let i = self.x.partition_point(|&v| v <= t);
        Ok(i.clamp(1, self.x.len() - 1) - 1)
    }

    /// Value and first derivative at `t`.
    pub fn eval_with_deriv(&self, t: f64) -> Result<(f64, f64), InterpError> {
        let i = self.locate(t)?;
        let h = self.x[i + 1] - self.x[i];
        let s = (t - self.x[i]) / h;
        let (y0, y1, d0, d1) = (self.y[i], self.y[i + 1], self.d[i], self.d[i + 1]);
        let h00 = (1.0 + 2.0 * s) * (1.0 - s) * (1.0 - s);
        let h10 = s * (1.0 - s) * (1.0 - s);
        let h01 = s * s * (3.0 - 2.0 * s);
        let h11 = s * s * (s - 1.0);
        let v = h00 * y0 + h10 * h * d0 + h01 * y1 + h11 * h * d1;
        let dh00 = 6.0 * s * (s - 1.0);
        let dh10 = (1.0 - s) * (1.0 - 3.0 * s);
        let dh01 = -dh00;
        let dh11 = s * (3.0 * s - 2.0);
        let dv = (dh00 * y0 + dh01 * y1) / h + dh10 * d0 + dh11 * d1;
        Ok((v, dv))
    }

    pub fn eval(&self, t: f64) -> Result<f64, InterpError> {
        self.eval_with_deriv(t).map(|p| p.0)
    }
}
