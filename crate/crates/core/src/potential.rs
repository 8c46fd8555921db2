//! External potentials `V_i(x)` and their derivatives.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, PartialEq)]
pub enum Potential {
    Zero,
    /// `V(x) = A (1 - exp(-k (x - x0)^2))`.
    GaussianWell {
        amplitude: f64,
        sharpness: f64,
        center: f64,
    },
    /// Samples interpolated with a monotone (PCHIP) cubic, so `V'` is continuous.
    Tabulated(MonotoneCubic),
}

impl Potential {
    /// The well `1 - exp(-120 x^2)` used by the single-well experiments.
    pub fn standard_well() -> Self {
        Potential::GaussianWell { amplitude: 1.0, sharpness: 120.0, center: 0.0 }
    }

    pub fn tabulated(xs: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        MonotoneCubic::new(xs, values).map(Potential::Tabulated)
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Potential::Zero)
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::GaussianWell { amplitude, sharpness, center } => {
                let s = x - center;
                amplitude * (1.0 - math::exp(-sharpness * s * s))
            }
            Potential::Tabulated(t) => t.value(x),
        }
    }

    pub fn derivative(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::GaussianWell { amplitude, sharpness, center } => {
                let s = x - center;
                amplitude * 2.0 * sharpness * s * math::exp(-sharpness * s * s)
            }
            Potential::Tabulated(t) => t.derivative(x),
        }
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::GaussianWell { amplitude, sharpness, center } => {
                let s = x - center;
                let k = *sharpness;
                amplitude * 2.0 * k * (1.0 - 2.0 * k * s * s) * math::exp(-k * s * s)
            }
            Potential::Tabulated(t) => t.second_derivative(x),
        }
    }

    /// Sampled `(sup|V|, sup|V'|, sup|V''|)` over `samples + 1` equispaced points of `[a, b]`.
    pub fn sup_bounds(&self, a: f64, b: f64, samples: usize) -> (f64, f64, f64) {
        let samples = samples.max(1);
        let mut out = (0.0f64, 0.0f64, 0.0f64);
        for k in 0..=samples {
            let x = a + (b - a) * k as f64 / samples as f64;
            out.0 = out.0.max(self.value(x).abs());
            out.1 = out.1.max(self.derivative(x).abs());
            out.2 = out.2.max(self.second_derivative(x).abs());
        }
        out
    }
}

/// Piecewise cubic Hermite interpolant with Fritsch–Carlson limited slopes.
/// Outside the sample range the end intervals' cubics are continued.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.len() < 2 {
            return Err(Error::InvalidParams(
                "tabulated potential needs at least two (x, V) samples of equal length".into(),
            ));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) || xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(Error::InvalidParams(
                "tabulated potential abscissae must be finite and strictly increasing".into(),
            ));
        }
        let slopes = pchip_slopes(&xs, &ys);
        Ok(Self { xs, ys, slopes })
    }

    pub fn samples(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    fn interval(&self, x: f64) -> usize {
        let n = self.xs.len();
        // partition_point gives the first index with xs[k] > x.
        let k = self.xs.partition_point(|&xk| xk <= x);
        k.clamp(1, n - 1) - 1
    }

    fn hermite(&self, x: f64) -> (f64, f64, f64) {
        let k = self.interval(x);
        let h = self.xs[k + 1] - self.xs[k];
        let t = (x - self.xs[k]) / h;
        let (y0, y1) = (self.ys[k], self.ys[k + 1]);
        let (d0, d1) = (self.slopes[k] * h, self.slopes[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let value =
            (2.0 * t3 - 3.0 * t2 + 1.0) * y0 + (t3 - 2.0 * t2 + t) * d0 + (-2.0 * t3 + 3.0 * t2) * y1 + (t3 - t2) * d1;
        let dvalue = (6.0 * t2 - 6.0 * t) * y0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * y1
            + (3.0 * t2 - 2.0 * t) * d1;
        let ddvalue = (12.0 * t - 6.0) * y0 + (6.0 * t - 4.0) * d0 + (-12.0 * t + 6.0) * y1 + (6.0 * t - 2.0) * d1;
        (value, dvalue / h, ddvalue / (h * h))
    }

    pub fn value(&self, x: f64) -> f64 {
        self.hermite(x).0
    }

    pub fn derivative(&self, x: f64) -> f64 {
        self.hermite(x).1
    }

    pub fn second_derivative(&self, x: f64) -> f64 {
        self.hermite(x).2
    }
}

fn pchip_slopes(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
    let delta: Vec<f64> = (0..n - 1).map(|k| (ys[k + 1] - ys[k]) / h[k]).collect();
    if n == 2 {
        return alloc::vec![delta[0], delta[0]];
    }
    let mut d = alloc::vec![0.0; n];
    for k in 1..n - 1 {
        if delta[k - 1] * delta[k] > 0.0 {
            let w1 = 2.0 * h[k] + h[k - 1];
            let w2 = h[k] + 2.0 * h[k - 1];
            d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
        }
    }
    d[0] = end_slope(h[0], h[1], delta[0], delta[1]);
    d[n - 1] = end_slope(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
    d
}

// Shape-preserving three-point end condition.
fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d * del0 <= 0.0 {
        0.0
    } else if del0 * del1 <= 0.0 && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}
