//! Numeric evaluation of the threshold constants η₀(c), λ₀(c, c′) and the
//! exponents they induce, plus a grid search over `(c, c′)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const GOLDEN: f64 = 0.618_033_988_749_894_9;

/// `(9 - 3α - 6 sqrt((1-α²) c)) / (4 sqrt(1 - (1/4 + 3α/4)²))`.
pub fn two_step_coefficient(alpha: f64, c: f64) -> f64 {
    let beta = 0.25 + 0.75 * alpha;
    (9.0 - 3.0 * alpha - 6.0 * ((1.0 - alpha * alpha).max(0.0) * c).sqrt())
        / (4.0 * (1.0 - beta * beta).sqrt())
}

/// `c / (1 + c)`.
pub fn window(c: f64) -> f64 {
    c / (1.0 + c)
}

/// Minimizes `f` on `[a, b]` by golden-section search.
fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut x1 = b - GOLDEN * (b - a);
    let mut x2 = a + GOLDEN * (b - a);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while b - a > tol {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - GOLDEN * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + GOLDEN * (b - a);
            f2 = f(x2);
        }
    }
    let (fa, fb) = (f(a), f(b));
    [(x1, f1), (x2, f2), (a, fa), (b, fb)]
        .into_iter()
        .min_by(|p, q| p.1.total_cmp(&q.1))
        .expect("nonempty")
}

/// Grid scan of `f` on `[lo, hi]` followed by golden refinement around the
/// best grid point. Returns `(argmin, min)`.
fn scan_min(f: impl Fn(f64) -> f64, lo: f64, hi: f64, grid: usize, tol: f64) -> (f64, f64) {
    if hi <= lo {
        return (lo, f(lo));
    }
    let h = (hi - lo) / grid as f64;
    let mut best = (lo, f(lo));
    for k in 1..=grid {
        let x = lo + h * k as f64;
        let y = f(x);
        if y < best.1 {
            best = (x, y);
        }
    }
    let (a, b) = ((best.0 - h).max(lo), (best.0 + h).min(hi));
    let refined = golden_min(&f, a, b, tol);
    if refined.1 < best.1 {
        refined
    } else {
        best
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Infimum {
    pub value: f64,
    pub argmin: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Infimum2 {
    pub value: f64,
    pub beta: f64,
    pub gamma: f64,
}

fn check_c(c: f64, what: &str) -> Result<()> {
    if !(c >= 0.0) || !c.is_finite() {
        return Err(Error::Domain(format!("{what} = {c} must be a finite nonnegative number")));
    }
    Ok(())
}

/// `inf_{α ∈ [0, c/(1+c)]}` of [`two_step_coefficient`].
pub fn eta0(c: f64) -> Result<Infimum> {
    eta0_with(c, 10_000)
}

pub fn eta0_with(c: f64, grid: usize) -> Result<Infimum> {
    check_c(c, "c")?;
    let (argmin, value) = scan_min(|a| two_step_coefficient(a, c), 0.0, window(c), grid, 1e-12);
    Ok(Infimum { value, argmin })
}

/// The quotient minimized by λ₀ at `(β, γ)`.
pub fn lambda0_objective(beta: f64, gamma: f64, c_prime: f64, eta0: f64) -> f64 {
    let r3 = 3f64.sqrt();
    let s = (1.0 - beta * beta).sqrt();
    let inner = (1.0 - gamma * gamma / (1.0 - beta * beta)).max(0.0).sqrt();
    let num = (0.5 * s + r3 / 2.0 * beta / s * gamma - r3 / 2.0 * c_prime.sqrt() * inner) * eta0 + 1.5;
    let dot = -0.5 * beta + r3 / 2.0 * gamma;
    num / (1.0 - dot * dot).sqrt()
}

/// β range `[1/4, 1/4 + 3c/(4(1+c))]`.
pub fn beta_range(c: f64) -> (f64, f64) {
    (0.25, 0.25 + 0.75 * window(c))
}

/// γ range `[-3√3 c/(4(1+c)), √3 c/(2(1+c))]`.
pub fn gamma_range(c: f64) -> (f64, f64) {
    let r3 = 3f64.sqrt();
    (-0.75 * r3 * window(c), 0.5 * r3 * window(c))
}

pub fn lambda0(c: f64, c_prime: f64) -> Result<Infimum2> {
    lambda0_with(c, c_prime, 300)
}

/// 2-D grid of `grid × grid` cells, then nested golden refinement inside the
/// best cell's neighborhood.
pub fn lambda0_with(c: f64, c_prime: f64, grid: usize) -> Result<Infimum2> {
    check_c(c, "c")?;
    check_c(c_prime, "c'")?;
    let e0 = eta0(c)?.value;
    lambda0_given_eta(c, c_prime, e0, grid)
}

fn lambda0_given_eta(c: f64, c_prime: f64, e0: f64, grid: usize) -> Result<Infimum2> {
    let (b0, b1) = beta_range(c);
    let (g0, g1) = gamma_range(c);
    let f = |b: f64, g: f64| lambda0_objective(b, g, c_prime, e0);
    let grid = grid.max(1);
    let (hb, hg) = ((b1 - b0) / grid as f64, (g1 - g0) / grid as f64);
    let mut best = Infimum2 {
        value: f(b0, g0),
        beta: b0,
        gamma: g0,
    };
    for p in 0..=grid {
        let b = b0 + hb * p as f64;
        for q in 0..=grid {
            let g = g0 + hg * q as f64;
            let v = f(b, g);
            if v < best.value {
                best = Infimum2 {
                    value: v,
                    beta: b,
                    gamma: g,
                };
            }
        }
    }
    if hb == 0.0 && hg == 0.0 {
        return Ok(best);
    }
    let (ba, bb) = ((best.beta - hb).max(b0), (best.beta + hb).min(b1));
    let (ga, gb) = ((best.gamma - hg).max(g0), (best.gamma + hg).min(g1));
    let inner = |b: f64| golden_min(|g| f(b, g), ga, gb, 1e-13);
    let (b, v) = golden_min(|b| inner(b).1, ba, bb, 1e-13);
    if v < best.value {
        best = Infimum2 {
            value: v,
            beta: b,
            gamma: inner(b).0,
        };
    }
    Ok(best)
}

/// `Δ = n^((3+3c)/(5+3c))`.
pub fn delta_exponent(c: f64) -> f64 {
    (3.0 + 3.0 * c) / (5.0 + 3.0 * c)
}

pub fn coloring_exponent(c: f64) -> f64 {
    1.0 / (5.0 + 3.0 * c)
}

/// Independent-set exponent (in n) needed for progress: `(4+3c)/(5+3c)`.
pub fn progress_exponent(c: f64) -> f64 {
    (4.0 + 3.0 * c) / (5.0 + 3.0 * c)
}

/// κ of the third-level negative conditioning: `(5-c)/(2-2c)`.
pub fn third_level_kappa(c: f64) -> f64 {
    (5.0 - c) / (2.0 - 2.0 * c)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParamPoint {
    pub c: f64,
    pub c_prime: f64,
    pub eta0: f64,
    pub lambda0: f64,
    /// Exponents of Δ.
    pub f_exponent: f64,
    pub g_exponent: f64,
    /// The same in units of n.
    pub f_n: f64,
    pub g_n: f64,
    pub n_exponent: f64,
    pub coloring_exponent: f64,
    pub progress_exponent: f64,
}

impl ParamPoint {
    /// `min(f_n, g_n) - progress`.
    pub fn margin(&self) -> f64 {
        self.n_exponent - self.progress_exponent
    }

    pub fn clears_target(&self) -> bool {
        self.margin() >= 0.0
    }

    pub const CSV_HEADER: &'static str = "c,c_prime,eta0,lambda0,f_n,g_n,min,coloring_exponent";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{:.10},{:.10},{:.10},{:.10},{:.10},{:.10}",
            self.c, self.c_prime, self.eta0, self.lambda0, self.f_n, self.g_n, self.n_exponent, self.coloring_exponent
        )
    }
}

pub fn exponents(c: f64, c_prime: f64) -> Result<ParamPoint> {
    exponents_with(c, c_prime, 300)
}

pub fn exponents_with(c: f64, c_prime: f64, grid: usize) -> Result<ParamPoint> {
    check_c(c, "c")?;
    check_c(c_prime, "c'")?;
    let e0 = eta0(c)?.value;
    let l0 = lambda0_given_eta(c, c_prime, e0, grid)?.value;
    Ok(point_from(c, c_prime, e0, l0))
}

fn point_from(c: f64, c_prime: f64, e0: f64, l0: f64) -> ParamPoint {
    let f = e0 * e0 * (1.0 + c_prime) / (3.0 * (1.0 + c));
    let g = l0 * l0 / (3.0 * (1.0 + c)) - (1.0 + 3.0 * c) / (5.0 - c);
    let d = delta_exponent(c);
    ParamPoint {
        c,
        c_prime,
        eta0: e0,
        lambda0: l0,
        f_exponent: f,
        g_exponent: g,
        f_n: f * d,
        g_n: g * d,
        n_exponent: (f * d).min(g * d),
        coloring_exponent: coloring_exponent(c),
        progress_exponent: progress_exponent(c),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimum {
    /// Feasible point with the largest `c` (smallest coloring exponent); ties
    /// go to the larger margin.
    pub best: Option<ParamPoint>,
    pub evaluated: usize,
    pub feasible: usize,
}

/// Grid search for the largest `c` admitting some `c′` whose guaranteed
/// exponent `min(f_n, g_n)` clears `(4+3c)/(5+3c)`.
pub fn optimize(c_grid: &[f64], c_prime_grid: &[f64]) -> Result<Optimum> {
    let mut out = Optimum {
        best: None,
        evaluated: 0,
        feasible: 0,
    };
    for &c in c_grid {
        check_c(c, "c")?;
        let e0 = eta0(c)?.value;
        for &cp in c_prime_grid {
            check_c(cp, "c'")?;
            let l0 = lambda0_given_eta(c, cp, e0, 40)?.value;
            let p = point_from(c, cp, e0, l0);
            out.evaluated += 1;
            if !p.clears_target() {
                continue;
            }
            out.feasible += 1;
            let better = match &out.best {
                None => true,
                Some(b) => p.c > b.c || p.c == b.c && p.margin() > b.margin(),
            };
            if better {
                out.best = Some(p);
            }
        }
    }
    Ok(out)
}

/// `n` evenly spaced points on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|k| lo + (hi - lo) * k as f64 / (n - 1) as f64).collect(),
    }
}
