//! Standard normal functions and the truncated-normal sampler used for
//! conditional Monte Carlo.

use rand::Rng;
use libm::erfc;
use statrs::function::erf::erfc_inv;

use crate::error::{Error, Result};
use crate::linalg;

const SQRT_2: f64 = std::f64::consts::SQRT_2;
const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Largest truncation point the conditional sampler accepts.
pub const MAX_TRUNCATION: f64 = 8.0;

/// Standard normal density.
pub fn pdf(x: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * x * x).exp()
}

/// Standard normal cdf.
pub fn cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// Upper tail `Pr[g >= x]`.
pub fn tail(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Inverse cdf on `(0, 1)`.
pub fn quantile(p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::Domain(format!("quantile argument {p} outside (0,1)")));
    }
    if p > 0.5 {
        return tail_quantile(1.0 - p);
    }
    Ok(-tail_quantile(p)?)
}

/// Inverse of the upper tail: the `x` with `tail(x) = q`.
pub fn tail_quantile(q: f64) -> Result<f64> {
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::Domain(format!("tail quantile argument {q} outside (0,1)")));
    }
    if q > 0.5 {
        return Ok(-tail_quantile(1.0 - q)?);
    }
    // the series inverse is only good to ~1e-10; polish with Newton on the
    // accurate tail
    let mut x = SQRT_2 * erfc_inv(2.0 * q);
    for _ in 0..3 {
        let d = pdf(x);
        if d <= 0.0 {
            break;
        }
        x += (tail(x) - q) / d;
    }
    Ok(x)
}

/// Mills-ratio sandwich `(1/t - 1/t^3) pdf(t) <= tail(t) <= pdf(t)/t`.
pub fn tail_bounds(t: f64) -> (f64, f64) {
    let d = pdf(t);
    ((1.0 / t - 1.0 / t.powi(3)) * d, d / t)
}

/// Draws `s` from the standard normal conditioned on `s >= t`.
pub fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, t: f64) -> Result<f64> {
    if t > MAX_TRUNCATION {
        return Err(Error::TruncationUnderflow(t));
    }
    let mass = tail(t);
    // u in (0, 1]; u * mass stays in (0, mass]
    let u = 1.0 - rng.random::<f64>();
    let s = tail_quantile((u * mass).min(1.0 - 1e-16))?;
    Ok(s.max(t))
}

/// Sampler of `r ~ N(0, I)` conditioned on `r . v >= t`.
#[derive(Debug, Clone)]
pub struct ConditionalGaussian {
    v: Vec<f64>,
    t: f64,
}

impl ConditionalGaussian {
    pub fn new(v: &[f64], t: f64) -> Result<Self> {
        if (linalg::norm(v) - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidInput("conditioning vector is not unit".into()));
        }
        if t > MAX_TRUNCATION {
            return Err(Error::TruncationUnderflow(t));
        }
        Ok(ConditionalGaussian { v: v.to_vec(), t })
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }

    /// Fills `out` with one draw and returns `r . v`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) -> Result<f64> {
        crate::rng::fill_gaussian(rng, out);
        let along = linalg::dot(out, &self.v);
        let s = truncated_normal(rng, self.t)?;
        linalg::axpy(out, s - along, &self.v);
        Ok(s)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.v.len()];
        self.sample_into(rng, &mut out)?;
        Ok(out)
    }
}

/// `Pr[X >= a, Y >= b]` for a standard bivariate normal with correlation
/// `rho`, by Gauss-Legendre quadrature over the conditional tail.
pub fn bivariate_upper(a: f64, b: f64, rho: f64) -> f64 {
    if rho.abs() >= 1.0 - 1e-12 {
        return if rho > 0.0 {
            tail(a.max(b))
        } else if -b > a {
            // Y = -X: a <= X <= -b
            cdf(-b) - cdf(a)
        } else {
            0.0
        };
    }
    let s = (1.0 - rho * rho).sqrt();
    // integrate pdf(x) * tail((b - rho x)/s) over x in [a, a + 12]
    let (lo, hi) = (a.max(-12.0), 12.0f64.max(a + 1.0));
    let panels = 400;
    let h = (hi - lo) / panels as f64;
    let (nodes, weights) = gauss_legendre_5();
    let mut total = 0.0;
    for p in 0..panels {
        let mid = lo + (p as f64 + 0.5) * h;
        for (x, w) in nodes.iter().zip(weights.iter()) {
            let xx = mid + 0.5 * h * x;
            total += 0.5 * h * w * pdf(xx) * tail((b - rho * xx) / s);
        }
    }
    total
}

fn gauss_legendre_5() -> ([f64; 5], [f64; 5]) {
    (
        [
            0.0,
            -0.538_469_310_105_683,
            0.538_469_310_105_683,
            -0.906_179_845_938_664,
            0.906_179_845_938_664,
        ],
        [
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
            0.236_926_885_056_189,
        ],
    )
}
