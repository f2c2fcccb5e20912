//! Orthogonal projections `v_ij` and vector colorings obtained by conditioning
//! an SoS solution on one vertex being red.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Color, Graph};
use crate::linalg::{self, Vectors};
use crate::sos::{extract_vector3, SosSolution, StrictVector3Coloring};

/// Unit vectors on a vertex subset with a claimed vector chromatic bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VectorColoring {
    /// Sorted vertex ids; row `k` of `vectors` belongs to `vertices[k]`.
    pub vertices: Vec<usize>,
    pub vectors: Vectors,
    pub kappa: f64,
    /// Largest inner product over induced edges (`-inf` when there are none).
    pub worst: f64,
    /// Vertices dropped because their conditioned vector vanished.
    #[serde(default)]
    pub excluded: Vec<usize>,
}

impl VectorColoring {
    pub fn new(g: &Graph, vertices: Vec<usize>, vectors: Vectors, kappa: f64) -> Result<Self> {
        if vertices.len() != vectors.len() {
            return Err(Error::InvalidInput(format!(
                "{} vertices but {} vectors",
                vertices.len(),
                vectors.len()
            )));
        }
        if vertices.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidInput("vertex list must be strictly increasing".into()));
        }
        if !(kappa >= 2.0) {
            return Err(Error::InvalidInput(format!("kappa {kappa} < 2")));
        }
        for &v in &vertices {
            g.check_vertex(v)?;
        }
        let mut vc = VectorColoring {
            vertices,
            vectors,
            kappa,
            worst: f64::NEG_INFINITY,
            excluded: Vec::new(),
        };
        vc.worst = vc.worst_edge(g).map_or(f64::NEG_INFINITY, |w| w.2);
        Ok(vc)
    }

    /// Every vertex of `g`, claimed kappa 3.
    pub fn from_strict(g: &Graph, s: &StrictVector3Coloring) -> Result<Self> {
        Self::new(g, (0..s.n()).collect(), s.vectors.clone(), 3.0)
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    /// Edge bound `-1/(kappa-1)`.
    pub fn bound(&self) -> f64 {
        -1.0 / (self.kappa - 1.0)
    }

    pub fn position(&self, v: usize) -> Option<usize> {
        self.vertices.binary_search(&v).ok()
    }

    pub fn vector_of(&self, v: usize) -> Option<&[f64]> {
        self.position(v).map(|k| self.vectors.row(k))
    }

    /// Induced edge with the largest inner product.
    pub fn worst_edge(&self, g: &Graph) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for (a, &u) in self.vertices.iter().enumerate() {
            for &w in g.neighbors(u) {
                if w <= u {
                    continue;
                }
                if let Some(b) = self.position(w) {
                    let d = linalg::dot(self.vectors.row(a), self.vectors.row(b));
                    if best.is_none_or(|x| d > x.2) {
                        best = Some((u, w, d));
                    }
                }
            }
        }
        best
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Result of checking a vector coloring against a graph.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ColoringReport {
    pub max_edge_inner: f64,
    pub worst_edge: Option<(usize, usize)>,
    pub max_unit_residual: f64,
    pub bound: f64,
    /// `bound - max_edge_inner`; negative when violated.
    pub slack: f64,
    pub pass: bool,
}

pub fn validate_vector_coloring(g: &Graph, vc: &VectorColoring, tol: f64) -> ColoringReport {
    let worst = vc.worst_edge(g);
    let max_edge_inner = worst.map_or(f64::NEG_INFINITY, |w| w.2);
    let bound = vc.bound();
    let unit = vc.vectors.max_unit_residual();
    ColoringReport {
        max_edge_inner,
        worst_edge: worst.map(|w| (w.0, w.1)),
        max_unit_residual: unit,
        bound,
        slack: bound - max_edge_inner,
        pass: max_edge_inner <= bound + tol && unit <= tol.max(1e-9),
    }
}

/// `v_j` split along unit `v_i`: `v_j = t v_i + sqrt(1-t^2) v_ij`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionPair {
    pub base: Vec<f64>,
    pub target: Vec<f64>,
    pub t: f64,
    pub residual: Vec<f64>,
}

impl ProjectionPair {
    /// Largest deviation in `v_j = t v_i + sqrt(1-t^2) v_ij` and `v_ij . v_i`.
    pub fn identity_residual(&self) -> f64 {
        let s = (1.0 - self.t * self.t).sqrt();
        let rebuilt: Vec<f64> = self
            .base
            .iter()
            .zip(&self.residual)
            .map(|(b, r)| self.t * b + s * r)
            .collect();
        linalg::max_abs_diff(&rebuilt, &self.target).max(linalg::dot(&self.base, &self.residual).abs())
    }
}

pub fn project_orth(v_i: &[f64], v_j: &[f64]) -> Result<ProjectionPair> {
    let t = linalg::dot(v_i, v_j);
    if t.abs() >= 1.0 - 1e-9 {
        return Err(Error::DegenerateProjection { inner: t });
    }
    let raw = linalg::add_scaled(v_j, -t, v_i);
    let residual = linalg::normalized(&raw, 0.0).ok_or(Error::DegenerateProjection { inner: t })?;
    Ok(ProjectionPair {
        base: v_i.to_vec(),
        target: v_j.to_vec(),
        t,
        residual,
    })
}

/// The unit vector `v_ij` alone.
pub fn v_orth(v_i: &[f64], v_j: &[f64]) -> Result<Vec<f64>> {
    Ok(project_orth(v_i, v_j)?.residual)
}

/// Norm below which a conditioned vector is treated as vanished.
const DEGENERATE_NORM: f64 = 1e-9;

fn sorted_targets(g: &Graph, targets: &[usize]) -> Result<Vec<usize>> {
    let mut t = targets.to_vec();
    t.sort_unstable();
    t.dedup();
    for &v in &t {
        g.check_vertex(v)?;
    }
    Ok(t)
}

fn require_round(s: &SosSolution, k: usize) -> Result<()> {
    if s.round() < k {
        return Err(Error::UnsupportedRound {
            requested: k,
            round: s.round(),
        });
    }
    Ok(())
}

/// Builds the coloring from per-target raw vectors, dropping vanished ones.
fn assemble(
    s: &SosSolution,
    targets: Vec<usize>,
    kappa: f64,
    mut raw: impl FnMut(usize) -> Vec<f64>,
) -> Result<VectorColoring> {
    let mut vertices = Vec::new();
    let mut excluded = Vec::new();
    let mut vectors = Vectors::new(s.dimension());
    for j in targets {
        match linalg::normalized(&raw(j), DEGENERATE_NORM) {
            Some(u) => {
                vertices.push(j);
                vectors.push(&u)?;
            }
            None => excluded.push(j),
        }
    }
    let mut vc = VectorColoring::new(s.graph(), vertices, vectors, kappa)?;
    vc.excluded = excluded;
    Ok(vc)
}

fn check_inner_window(
    strict: &StrictVector3Coloring,
    i: usize,
    targets: &[usize],
    ok: impl Fn(f64) -> bool,
    what: &str,
) -> Result<()> {
    let bad: Vec<usize> = targets
        .iter()
        .copied()
        .filter(|&j| !ok(strict.inner(i, j)))
        .collect();
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::PreconditionViolated {
            what: what.to_string(),
            vertices: bad,
        })
    }
}

/// Conditioning on `i = R` for targets with `v_i . v_j <= t <= 0`:
/// `u_j ∝ v_{(i,R),(j,G)} - v_{(i,R),(j,B)}`, a vector
/// `(3-6t)/(1-4t)`-coloring.
pub fn conditioned_coloring_negative(
    s: &SosSolution,
    i: usize,
    t: f64,
    targets: &[usize],
    tol: f64,
) -> Result<VectorColoring> {
    if t > 0.0 || t < -0.5 {
        return Err(Error::InvalidInput(format!("t = {t} outside [-1/2, 0]")));
    }
    require_round(s, 3)?;
    s.graph().check_vertex(i)?;
    let targets = sorted_targets(s.graph(), targets)?;
    let strict = extract_vector3(s)?;
    check_inner_window(&strict, i, &targets, |x| x <= t + tol, "v_i . v_j <= t")?;
    let kappa = (3.0 - 6.0 * t) / (1.0 - 4.0 * t);
    let ir = (i, Color::R);
    assemble(s, targets, kappa, |j| {
        let g = s.vector(&[ir, (j, Color::G)]).expect("round checked");
        let b = s.vector(&[ir, (j, Color::B)]).expect("round checked");
        linalg::add_scaled(&g, -1.0, &b)
    })
}

/// Conditioning on `i = R` for targets with `v_i . v_j >= t`, `t` in
/// `[1/16, 1/4]`: `u_j = sqrt 3 (v_{iR,jR} - v_{iR,jG} - v_{iR,jB})`, a vector
/// `(4+8t)/(1+8t)`-coloring.
pub fn conditioned_coloring_positive(
    s: &SosSolution,
    i: usize,
    t: f64,
    targets: &[usize],
    tol: f64,
) -> Result<VectorColoring> {
    if !(1.0 / 16.0..=0.25).contains(&t) {
        return Err(Error::InvalidInput(format!("t = {t} outside [1/16, 1/4]")));
    }
    require_round(s, 3)?;
    s.graph().check_vertex(i)?;
    let targets = sorted_targets(s.graph(), targets)?;
    let strict = extract_vector3(s)?;
    check_inner_window(&strict, i, &targets, |x| x >= t - tol, "v_i . v_j >= t")?;
    let kappa = (4.0 + 8.0 * t) / (1.0 + 8.0 * t);
    let ir = (i, Color::R);
    let root3 = 3f64.sqrt();
    assemble(s, targets, kappa, |j| {
        let r = s.vector(&[ir, (j, Color::R)]).expect("round checked");
        let g = s.vector(&[ir, (j, Color::G)]).expect("round checked");
        let b = s.vector(&[ir, (j, Color::B)]).expect("round checked");
        r.iter()
            .zip(&g)
            .zip(&b)
            .map(|((r, g), b)| root3 * (r - g - b))
            .collect()
    })
}

/// Claimed kappa of the low-red-marginal construction: `(5-12e)/(2-8e)`.
pub fn kappa_52(epsilon: f64) -> f64 {
    (5.0 - 12.0 * epsilon) / (2.0 - 8.0 * epsilon)
}

/// For solutions with `sum_i |v_(i,R)|^2 <= n/4`: on
/// `A = {i : |v_(i,R)|^2 <= 1/4 + e}` the vectors `u_i ∝ v_(i,G) - v_(i,B)`
/// have edge products at most `-(2-8e)/(3-4e)`.
pub fn combinatorial_52_coloring(
    s: &SosSolution,
    epsilon: f64,
    tol: f64,
) -> Result<(Vec<usize>, VectorColoring)> {
    if !(epsilon > 0.0 && epsilon < 0.25) {
        return Err(Error::InvalidInput(format!("epsilon {epsilon} outside (0, 1/4)")));
    }
    require_round(s, 2)?;
    let n = s.n();
    let red: Vec<f64> = (0..n)
        .map(|i| s.local_prob(&[(i, Color::R)]).expect("round checked"))
        .collect();
    let total: f64 = red.iter().sum();
    if total > n as f64 / 4.0 + tol {
        return Err(Error::Precondition(format!(
            "sum of red marginals {total} exceeds n/4 = {}",
            n as f64 / 4.0
        )));
    }
    let a: Vec<usize> = (0..n).filter(|&i| red[i] <= 0.25 + epsilon).collect();
    let vc = assemble(s, a.clone(), kappa_52(epsilon), |i| {
        let g = s.vector(&[(i, Color::G)]).expect("round checked");
        let b = s.vector(&[(i, Color::B)]).expect("round checked");
        linalg::add_scaled(&g, -1.0, &b)
    })?;
    Ok((a, vc))
}
