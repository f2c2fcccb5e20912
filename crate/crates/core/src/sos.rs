//! Feasible points of the k-round SoS relaxation built from distributions over
//! proper colorings, the strict vector 3-coloring they induce, and numerical
//! solvers for the plain vector-coloring SDP.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ConstraintFamily, Error, Result};
use crate::graph::{Color, Graph};
use crate::linalg::{self, Vectors};
use crate::rng;

/// A single `(vertex, color)` assignment.
pub type Assignment = (usize, Color);

const PERMUTATIONS: [[u8; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureEntry {
    pub coloring: Vec<u8>,
    pub weight: f64,
}

/// Probability distribution over 3-colorings of `0..n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColoringMixture {
    support: Vec<MixtureEntry>,
    symmetrized: bool,
}

impl ColoringMixture {
    pub fn new(support: Vec<MixtureEntry>) -> Result<Self> {
        let Some(first) = support.first() else {
            return Err(Error::InvalidInput("empty mixture support".into()));
        };
        let n = first.coloring.len();
        let mut total = 0.0;
        for e in &support {
            if e.coloring.len() != n {
                return Err(Error::InvalidInput("colorings of different lengths".into()));
            }
            if e.coloring.iter().any(|&c| c > 2) {
                return Err(Error::InvalidInput("color index above 2".into()));
            }
            if !(e.weight > 0.0) {
                return Err(Error::InvalidInput(format!("non-positive weight {}", e.weight)));
            }
            total += e.weight;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidInput(format!("weights sum to {total}")));
        }
        Ok(ColoringMixture {
            support,
            symmetrized: false,
        })
    }

    /// Uniform distribution over the given colorings (duplicates merged).
    pub fn uniform(colorings: &[Vec<u8>]) -> Result<Self> {
        let mut counts: BTreeMap<&[u8], usize> = BTreeMap::new();
        for c in colorings {
            *counts.entry(c.as_slice()).or_default() += 1;
        }
        let total = colorings.len() as f64;
        Self::new(
            counts
                .into_iter()
                .map(|(c, k)| MixtureEntry {
                    coloring: c.to_vec(),
                    weight: k as f64 / total,
                })
                .collect(),
        )
    }

    pub fn single(coloring: Vec<u8>) -> Result<Self> {
        Self::new(vec![MixtureEntry {
            coloring,
            weight: 1.0,
        }])
    }

    /// Closes the support under the 6 color permutations, each image getting
    /// a sixth of the original weight.
    pub fn symmetrize(&self) -> Self {
        let mut merged: BTreeMap<Vec<u8>, f64> = BTreeMap::new();
        for e in &self.support {
            for p in &PERMUTATIONS {
                let image: Vec<u8> = e.coloring.iter().map(|&c| p[c as usize]).collect();
                *merged.entry(image).or_default() += e.weight / 6.0;
            }
        }
        ColoringMixture {
            support: merged
                .into_iter()
                .map(|(coloring, weight)| MixtureEntry { coloring, weight })
                .collect(),
            symmetrized: true,
        }
    }

    pub fn n(&self) -> usize {
        self.support[0].coloring.len()
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    pub fn is_symmetrized(&self) -> bool {
        self.symmetrized
    }

    pub fn support(&self) -> &[MixtureEntry] {
        &self.support
    }

    /// First edge that some support coloring leaves monochromatic.
    pub fn check_proper(&self, g: &Graph) -> Result<()> {
        if self.n() != g.n() {
            return Err(Error::InvalidInput(format!(
                "mixture over {} vertices, graph has {}",
                self.n(),
                g.n()
            )));
        }
        for e in &self.support {
            if let Some((u, v)) = crate::graph::coloring_conflict(g, &e.coloring) {
                return Err(Error::ImproperColoring(u, v));
            }
        }
        Ok(())
    }

    /// Direct evaluation of `Pr[every assignment holds]`.
    pub fn prob(&self, assignments: &[Assignment]) -> f64 {
        self.support
            .iter()
            .filter(|e| satisfies(&e.coloring, assignments))
            .map(|e| e.weight)
            .sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&self.support)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let support: Vec<MixtureEntry> = serde_json::from_str(text)?;
        Self::new(support)
    }
}

fn satisfies(coloring: &[u8], assignments: &[Assignment]) -> bool {
    assignments
        .iter()
        .all(|&(v, c)| coloring[v] == c.index())
}

fn canonical(assignments: &[Assignment]) -> Vec<Assignment> {
    let mut s = assignments.to_vec();
    s.sort_unstable();
    s.dedup();
    s
}

/// Round-`k` SoS vectors realized by a coloring mixture. Vectors are produced
/// on demand: the coordinate of `v_S` for support coloring `chi` is
/// `sqrt(w(chi))` when `chi` satisfies all of `S` and 0 otherwise.
#[derive(Debug, Clone)]
pub struct SosSolution {
    round: usize,
    graph: Graph,
    mixture: ColoringMixture,
    sqrt_weights: Vec<f64>,
}

pub fn mixture_to_sos(g: &Graph, mixture: &ColoringMixture, k: usize) -> Result<SosSolution> {
    if k == 0 {
        return Err(Error::InvalidInput("round must be at least 1".into()));
    }
    mixture.check_proper(g)?;
    Ok(SosSolution {
        round: k,
        graph: g.clone(),
        sqrt_weights: mixture.support.iter().map(|e| e.weight.sqrt()).collect(),
        mixture: mixture.clone(),
    })
}

/// Worst residual per relaxation constraint family.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ResidualReport {
    pub unit_empty: f64,
    pub vertex_sum: f64,
    pub same_vertex_orthogonal: f64,
    pub edge_orthogonal: f64,
    pub consistency: f64,
    pub consistency_checks: usize,
    /// Only measured for color-symmetric solutions.
    pub color_symmetry: Option<f64>,
}

impl ResidualReport {
    pub fn families(&self) -> Vec<(ConstraintFamily, f64)> {
        let mut out = vec![
            (ConstraintFamily::UnitEmpty, self.unit_empty),
            (ConstraintFamily::VertexSum, self.vertex_sum),
            (ConstraintFamily::SameVertexOrthogonal, self.same_vertex_orthogonal),
            (ConstraintFamily::EdgeOrthogonal, self.edge_orthogonal),
            (ConstraintFamily::Consistency, self.consistency),
        ];
        if let Some(c) = self.color_symmetry {
            out.push((ConstraintFamily::ColorSymmetry, c));
        }
        out
    }

    pub fn max(&self) -> f64 {
        self.families().iter().map(|f| f.1).fold(0.0, f64::max)
    }

    /// Errors with the first family whose residual reaches `tol`.
    pub fn check(&self, tol: f64) -> Result<()> {
        for (family, residual) in self.families() {
            if !(residual < tol) {
                return Err(Error::ConstraintResidual {
                    family,
                    residual,
                    tol,
                });
            }
        }
        Ok(())
    }
}

impl SosSolution {
    pub fn round(&self) -> usize {
        self.round
    }

    pub fn dimension(&self) -> usize {
        self.sqrt_weights.len()
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn mixture(&self) -> &ColoringMixture {
        &self.mixture
    }

    pub fn n(&self) -> usize {
        self.graph.n()
    }

    fn check_size(&self, s: &[Assignment]) -> Result<Vec<Assignment>> {
        let s = canonical(s);
        if s.len() > self.round {
            return Err(Error::UnsupportedRound {
                requested: s.len(),
                round: self.round,
            });
        }
        for &(v, _) in &s {
            self.graph.check_vertex(v)?;
        }
        Ok(s)
    }

    /// `v_S`; the empty set gives `v_∅`.
    pub fn vector(&self, s: &[Assignment]) -> Result<Vec<f64>> {
        let s = self.check_size(s)?;
        Ok(self.vector_unchecked(&s))
    }

    fn vector_unchecked(&self, s: &[Assignment]) -> Vec<f64> {
        self.mixture
            .support
            .iter()
            .zip(&self.sqrt_weights)
            .map(|(e, w)| if satisfies(&e.coloring, s) { *w } else { 0.0 })
            .collect()
    }

    pub fn empty_vector(&self) -> Vec<f64> {
        self.sqrt_weights.clone()
    }

    /// `v_{S1} . v_{S2}`.
    pub fn inner(&self, s1: &[Assignment], s2: &[Assignment]) -> Result<f64> {
        Ok(linalg::dot(&self.vector(s1)?, &self.vector(s2)?))
    }

    /// Probability of the joint assignment under the local distribution,
    /// evaluated as an inner product of the two halves of the set.
    pub fn local_prob(&self, assignments: &[Assignment]) -> Result<f64> {
        let s = self.check_size(assignments)?;
        let (a, b) = s.split_at(s.len() / 2);
        let p = linalg::dot(&self.vector_unchecked(a), &self.vector_unchecked(b));
        Ok(p.clamp(0.0, 1.0))
    }

    /// Residuals of every constraint family, with `quadruples` random
    /// consistency checks.
    pub fn residuals(&self, quadruples: usize, seed: u64) -> ResidualReport {
        let mut rep = ResidualReport {
            unit_empty: (linalg::dot(&self.sqrt_weights, &self.sqrt_weights) - 1.0).abs(),
            ..Default::default()
        };
        let empty = self.empty_vector();
        let per_vertex: Vec<[Vec<f64>; 3]> = (0..self.n())
            .map(|i| Color::ALL.map(|c| self.vector_unchecked(&[(i, c)])))
            .collect();
        for vs in &per_vertex {
            let mut resid = 0.0f64;
            for (d, e) in empty.iter().enumerate() {
                resid = resid.max((vs[0][d] + vs[1][d] + vs[2][d] - e).abs());
            }
            rep.vertex_sum = rep.vertex_sum.max(resid);
            for a in 0..3 {
                for b in (a + 1)..3 {
                    rep.same_vertex_orthogonal =
                        rep.same_vertex_orthogonal.max(linalg::dot(&vs[a], &vs[b]).abs());
                }
            }
        }
        for (u, v) in self.graph.edges() {
            for c in 0..3 {
                rep.edge_orthogonal = rep
                    .edge_orthogonal
                    .max(linalg::dot(&per_vertex[u][c], &per_vertex[v][c]).abs());
            }
        }
        if self.mixture.symmetrized {
            let mut worst = 0.0f64;
            for vs in &per_vertex {
                for v in vs {
                    worst = worst.max((linalg::dot(v, v) - 1.0 / 3.0).abs());
                }
            }
            rep.color_symmetry = Some(worst);
        }
        if self.n() > 0 {
            let mut r = rng::stream(seed, 0);
            for _ in 0..quadruples {
                let (lhs, rhs) = self.random_consistency_pair(&mut r);
                rep.consistency = rep.consistency.max((lhs - rhs).abs());
                rep.consistency_checks += 1;
            }
        }
        rep
    }

    fn random_consistency_pair<R: Rng>(&self, r: &mut R) -> (f64, f64) {
        let size = r.random_range(1..=self.round);
        let vertices: Vec<usize> = (0..self.n()).collect();
        let union: Vec<Assignment> = (0..size)
            .map(|_| {
                let v = *vertices.choose(r).unwrap();
                (v, Color::ALL[r.random_range(0..3)])
            })
            .collect();
        let union = canonical(&union);
        let split = |r: &mut R| {
            let (mut a, mut b) = (Vec::new(), Vec::new());
            for &x in &union {
                match r.random_range(0..3) {
                    0 => a.push(x),
                    1 => b.push(x),
                    _ => {
                        a.push(x);
                        b.push(x);
                    }
                }
            }
            linalg::dot(&self.vector_unchecked(&a), &self.vector_unchecked(&b))
        };
        (split(r), split(r))
    }
}

/// Unit vectors with `v_i . v_j = -1/2` on every edge.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrictVector3Coloring {
    pub vectors: Vectors,
}

impl StrictVector3Coloring {
    pub fn n(&self) -> usize {
        self.vectors.len()
    }

    pub fn dim(&self) -> usize {
        self.vectors.dim()
    }

    pub fn vector(&self, i: usize) -> &[f64] {
        self.vectors.row(i)
    }

    pub fn inner(&self, i: usize, j: usize) -> f64 {
        linalg::dot(self.vectors.row(i), self.vectors.row(j))
    }

    /// Largest `|v_i . v_j + 1/2|` over edges.
    pub fn edge_residual(&self, g: &Graph) -> f64 {
        g.edges()
            .map(|(u, v)| (self.inner(u, v) + 0.5).abs())
            .fold(0.0, f64::max)
    }
}

/// `v_i = (3/sqrt 2)(v_(i,R) - v_∅/3)`.
pub fn extract_vector3(s: &SosSolution) -> Result<StrictVector3Coloring> {
    let report = s.residuals(50, 0);
    report.check(1e-6)?;
    if report.color_symmetry.is_none() {
        let worst = (0..s.n())
            .map(|i| (s.local_prob(&[(i, Color::R)]).unwrap_or(0.0) - 1.0 / 3.0).abs())
            .fold(0.0, f64::max);
        if worst >= 1e-6 {
            return Err(Error::ConstraintResidual {
                family: ConstraintFamily::ColorSymmetry,
                residual: worst,
                tol: 1e-6,
            });
        }
    }
    let empty = s.empty_vector();
    let scale = 3.0 / std::f64::consts::SQRT_2;
    let mut vectors = Vectors::new(s.dimension());
    for i in 0..s.n() {
        let red = s.vector_unchecked(&[(i, Color::R)]);
        let v: Vec<f64> = red
            .iter()
            .zip(&empty)
            .map(|(r, e)| scale * (r - e / 3.0))
            .collect();
        vectors.push(&v)?;
    }
    Ok(StrictVector3Coloring { vectors })
}

/// Exact strict vector 3-coloring of a planted instance: the three classes
/// get the vertices of a planar equilateral triangle.
pub fn planted_simplex(planted: &[u8]) -> StrictVector3Coloring {
    let simplex = simplex_vectors();
    let mut vectors = Vectors::new(2);
    for &c in planted {
        vectors.push(&simplex[c as usize]).expect("dimension 2");
    }
    StrictVector3Coloring { vectors }
}

pub fn simplex_vectors() -> [[f64; 2]; 3] {
    let h = 3f64.sqrt() / 2.0;
    [[1.0, 0.0], [-0.5, h], [-0.5, -h]]
}

/// Outcome of a numerical vector-coloring solve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SdpReport {
    pub max_edge_violation: f64,
    pub iters: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SdpSolution {
    pub vectors: Vectors,
    pub kappa: f64,
    pub report: SdpReport,
}

impl SdpSolution {
    /// Smallest kappa the returned vectors actually certify.
    pub fn achieved_kappa(&self, g: &Graph) -> f64 {
        let worst = g
            .edges()
            .map(|(u, v)| linalg::dot(self.vectors.row(u), self.vectors.row(v)))
            .fold(f64::NEG_INFINITY, f64::max);
        if worst == f64::NEG_INFINITY {
            2.0
        } else if worst >= 0.0 {
            f64::INFINITY
        } else {
            (1.0 - 1.0 / worst).max(2.0)
        }
    }
}

fn max_edge_violation(g: &Graph, vectors: &Vectors, theta: f64) -> f64 {
    g.edges()
        .map(|(u, v)| linalg::dot(vectors.row(u), vectors.row(v)) + theta)
        .fold(0.0, f64::max)
}

/// Alternating projections between the PSD cone and the set of matrices
/// with unit diagonal and edge entries capped at `-1/(kappa-1)`.
pub fn solve_vector_coloring_sdp(
    g: &Graph,
    kappa: f64,
    tol: f64,
    max_iter: usize,
    seed: u64,
) -> Result<SdpSolution> {
    let n = g.n();
    if n == 0 {
        return Err(Error::InvalidInput("empty graph".into()));
    }
    if !(kappa >= 2.0) {
        return Err(Error::InvalidInput(format!("kappa {kappa} < 2")));
    }
    let theta = 1.0 / (kappa - 1.0);
    let mut r = rng::stream(seed, 0);
    let start = Vectors::from_flat(n, rng::gaussian_vector(&mut r, n * n))?;
    let mut x = DMatrix::from_fn(n, n, |i, j| linalg::dot(start.row(i), start.row(j)));
    normalize_diagonal(&mut x);
    let edges: Vec<(usize, usize)> = g.edges().collect();

    let mut best: Option<(f64, Vectors)> = None;
    let mut iters = 0;
    for it in 1..=max_iter {
        iters = it;
        // affine / inequality side
        for i in 0..n {
            x[(i, i)] = 1.0;
        }
        for &(u, v) in &edges {
            let cap = x[(u, v)].min(-theta);
            x[(u, v)] = cap;
            x[(v, u)] = cap;
        }
        x.iter_mut().for_each(|e| *e = e.clamp(-1.0, 1.0));
        // PSD side
        let eig = SymmetricEigen::new(x.clone());
        let lam = eig.eigenvalues.map(|l| l.max(0.0));
        x = &eig.eigenvectors * DMatrix::from_diagonal(&lam) * eig.eigenvectors.transpose();
        // measure on the unit-diagonal rescaling of the PSD iterate
        let mut scaled = x.clone();
        normalize_diagonal(&mut scaled);
        let vectors = factor_rows(&scaled, 1e-12);
        let viol = max_edge_violation(g, &vectors, theta);
        if best.as_ref().is_none_or(|(b, _)| viol < *b) {
            best = Some((viol, vectors));
        }
        if viol <= tol {
            break;
        }
    }
    let (viol, vectors) = best.expect("at least one iteration");
    Ok(SdpSolution {
        vectors,
        kappa,
        report: SdpReport {
            max_edge_violation: viol,
            iters,
            converged: viol <= tol,
        },
    })
}

/// Low-rank solver for large graphs: unit vectors in `dim` dimensions,
/// refined by block-coordinate gradient steps on the penalty
/// `sum over edges of max(0, v_i . v_j + 1/(kappa-1))^2`.
pub fn solve_vector_coloring_lowrank(
    g: &Graph,
    kappa: f64,
    dim: usize,
    tol: f64,
    max_sweeps: usize,
    seed: u64,
) -> Result<SdpSolution> {
    let n = g.n();
    if n == 0 {
        return Err(Error::InvalidInput("empty graph".into()));
    }
    if !(kappa >= 2.0) || dim == 0 {
        return Err(Error::InvalidInput(format!("kappa {kappa} < 2 or dim 0")));
    }
    let theta = 1.0 / (kappa - 1.0);
    let mut r = rng::stream(seed, 0);
    let mut v = Vectors::new(dim);
    for _ in 0..n {
        let x = rng::gaussian_vector(&mut r, dim);
        v.push(&linalg::normalized(&x, 0.0).unwrap_or_else(|| unit(dim)))?;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let mut grad = vec![0.0; dim];
    // a few sweeps of v_i <- -normalize(sum of neighbors) spread neighbors
    // apart before the penalty phase
    for _ in 0..10 {
        for &i in &order {
            grad.iter_mut().for_each(|x| *x = 0.0);
            for &j in g.neighbors(i) {
                linalg::axpy(&mut grad, -1.0, v.row(j));
            }
            if let Some(u) = linalg::normalized(&grad, 1e-12) {
                v.row_mut(i).copy_from_slice(&u);
            }
        }
    }
    let mut best = (max_edge_violation(g, &v, theta), v.clone());
    let mut sweeps = 0;
    for sweep in 1..=max_sweeps {
        sweeps = sweep;
        order.shuffle(&mut r);
        for &i in &order {
            let deg = g.degree(i);
            if deg == 0 {
                continue;
            }
            grad.iter_mut().for_each(|x| *x = 0.0);
            let mut active = 0;
            for &j in g.neighbors(i) {
                let excess = linalg::dot(v.row(i), v.row(j)) + theta;
                if excess > 0.0 {
                    linalg::axpy(&mut grad, excess, v.row(j));
                    active += 1;
                }
            }
            if active == 0 {
                continue;
            }
            let step = 1.0 / active as f64;
            let row = v.row_mut(i);
            linalg::axpy(row, -step, &grad);
            if let Some(u) = linalg::normalized(row, 1e-12) {
                row.copy_from_slice(&u);
            }
        }
        let viol = max_edge_violation(g, &v, theta);
        if viol < best.0 {
            best = (viol, v.clone());
        }
        if viol <= tol {
            break;
        }
    }
    let (viol, vectors) = best;
    Ok(SdpSolution {
        vectors,
        kappa,
        report: SdpReport {
            max_edge_violation: viol,
            iters: sweeps,
            converged: viol <= tol,
        },
    })
}

fn unit(dim: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[0] = 1.0;
    e
}

fn normalize_diagonal(x: &mut DMatrix<f64>) {
    let n = x.nrows();
    let d: Vec<f64> = (0..n)
        .map(|i| {
            let v = x[(i, i)];
            if v > 1e-300 { 1.0 / v.sqrt() } else { 0.0 }
        })
        .collect();
    for i in 0..n {
        for j in 0..n {
            x[(i, j)] *= d[i] * d[j];
        }
    }
    for i in 0..n {
        if d[i] == 0.0 {
            x[(i, i)] = 1.0;
        }
    }
}

/// Factorization of a PSD matrix `X = V V^T`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GramFactor {
    pub vectors: Vectors,
    pub reconstruction_error: f64,
    pub rank: usize,
}

/// Eigen-factorization `X = V V^T`; rows of `V` are the vectors. Eigenvalues
/// in `[-rank_tol, 0)` are clipped, anything more negative is rejected.
pub fn gram_factor(x: &DMatrix<f64>, rank_tol: f64) -> Result<GramFactor> {
    if !x.is_square() {
        return Err(Error::InvalidInput("Gram matrix must be square".into()));
    }
    let n = x.nrows();
    let asym = (0..n)
        .flat_map(|i| (0..n).map(move |j| (i, j)))
        .map(|(i, j)| (x[(i, j)] - x[(j, i)]).abs())
        .fold(0.0, f64::max);
    if asym > rank_tol {
        return Err(Error::InvalidInput(format!("matrix not symmetric ({asym:e})")));
    }
    let eig = SymmetricEigen::new(x.clone());
    if let Some(&min) = eig
        .eigenvalues
        .iter()
        .min_by(|a, b| a.partial_cmp(b).unwrap())
    {
        if min < -rank_tol {
            return Err(Error::NotPsd {
                eigenvalue: min,
                rank_tol,
            });
        }
    }
    let vectors = factor_from_eigen(&eig, rank_tol);
    let mut err = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            err = err.max((linalg::dot(vectors.row(i), vectors.row(j)) - x[(i, j)]).abs());
        }
    }
    let rank = vectors.dim();
    Ok(GramFactor {
        vectors,
        reconstruction_error: err,
        rank,
    })
}

fn factor_rows(x: &DMatrix<f64>, rank_tol: f64) -> Vectors {
    factor_from_eigen(&SymmetricEigen::new(x.clone()), rank_tol)
}

fn factor_from_eigen(eig: &SymmetricEigen<f64, nalgebra::Dyn>, rank_tol: f64) -> Vectors {
    let n = eig.eigenvalues.len();
    let keep: Vec<usize> = (0..n).filter(|&k| eig.eigenvalues[k] > rank_tol).collect();
    let dim = keep.len().max(1);
    let mut data = vec![0.0; n * dim];
    for i in 0..n {
        for (col, &k) in keep.iter().enumerate() {
            data[i * dim + col] = eig.eigenvectors[(i, k)] * eig.eigenvalues[k].sqrt();
        }
    }
    Vectors::from_flat(dim, data).expect("consistent shape")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::generate_planted;

    fn k3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn mixture_validation() {
        assert!(ColoringMixture::new(vec![]).is_err());
        let bad = vec![MixtureEntry {
            coloring: vec![0, 1],
            weight: 0.5,
        }];
        assert!(ColoringMixture::new(bad).is_err());
        let m = ColoringMixture::single(vec![0, 0, 1]).unwrap();
        assert!(matches!(
            mixture_to_sos(&k3(), &m, 2),
            Err(Error::ImproperColoring(0, 1))
        ));
    }

    #[test]
    fn symmetrize_merges_and_balances() {
        let m = ColoringMixture::single(vec![0, 1, 2]).unwrap().symmetrize();
        assert_eq!(m.len(), 6);
        for e in m.support() {
            assert!((e.weight - 1.0 / 6.0).abs() < 1e-15);
        }
        // a coloring using one color has only 3 distinct images
        let m = ColoringMixture::single(vec![1, 1]).unwrap().symmetrize();
        assert_eq!(m.len(), 3);
        assert!((m.prob(&[(0, Color::R)]) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sure_event_and_marginals() {
        let m = ColoringMixture::single(vec![0, 1, 2]).unwrap();
        let s = mixture_to_sos(&k3(), &m, 3).unwrap();
        let v = s.vector(&[(0, Color::R)]).unwrap();
        assert!((linalg::dot(&v, &v) - 1.0).abs() < 1e-15);
        let sym = mixture_to_sos(&k3(), &m.symmetrize(), 3).unwrap();
        let v = sym.vector(&[(1, Color::R)]).unwrap();
        assert!((linalg::dot(&v, &v) - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(sym.inner(&[(0, Color::R)], &[(1, Color::R)]).unwrap(), 0.0);
    }

    #[test]
    fn local_prob_examples() {
        let m = ColoringMixture::new(vec![
            MixtureEntry {
                coloring: vec![0, 1, 2],
                weight: 0.25,
            },
            MixtureEntry {
                coloring: vec![1, 2, 0],
                weight: 0.75,
            },
        ])
        .unwrap();
        let s = mixture_to_sos(&k3(), &m, 2).unwrap();
        assert!((s.local_prob(&[]).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(s.local_prob(&[(0, Color::R), (0, Color::G)]).unwrap(), 0.0);
        assert!((s.local_prob(&[(0, Color::G), (1, Color::B)]).unwrap() - 0.75).abs() < 1e-15);
        assert!(matches!(
            s.local_prob(&[(0, Color::G), (1, Color::B), (2, Color::R)]),
            Err(Error::UnsupportedRound { requested: 3, round: 2 })
        ));
    }

    #[test]
    fn residuals_vanish_on_planted_mixtures() {
        let inst = generate_planted(30, [1.0 / 3.0; 3], 0.2, 4).unwrap();
        let cols = crate::graph::sample_proper_colorings(&inst.graph, 5, 2);
        let m = ColoringMixture::uniform(&cols).unwrap().symmetrize();
        let s = mixture_to_sos(&inst.graph, &m, 3).unwrap();
        let rep = s.residuals(200, 9);
        assert_eq!(rep.consistency_checks, 200);
        assert!(rep.max() < 1e-12, "{rep:?}");
        assert!(rep.check(1e-10).is_ok());
    }

    #[test]
    fn extract_vector3_examples() {
        let inst = generate_planted(12, [1.0 / 3.0; 3], 0.6, 1).unwrap();
        let m = ColoringMixture::single(inst.planted.clone()).unwrap();
        let sol = mixture_to_sos(&inst.graph, &m, 2).unwrap();
        assert!(matches!(
            extract_vector3(&sol),
            Err(Error::ConstraintResidual {
                family: ConstraintFamily::ColorSymmetry,
                ..
            })
        ));
        let s = mixture_to_sos(&inst.graph, &m.symmetrize(), 2).unwrap();
        let v = extract_vector3(&s).unwrap();
        assert!(v.vectors.max_unit_residual() < 1e-12);
        assert!(v.edge_residual(&inst.graph) < 1e-12);
        for a in 0..12 {
            for b in 0..12 {
                if inst.planted[a] == inst.planted[b] {
                    assert!((v.inner(a, b) - 1.0).abs() < 1e-12);
                }
            }
        }
        // all 6 colorings of K3: pairwise -1/2
        let all: Vec<Vec<u8>> = PERMUTATIONS.iter().map(|p| p.to_vec()).collect();
        let s = mixture_to_sos(&k3(), &ColoringMixture::uniform(&all).unwrap(), 2).unwrap();
        let v = extract_vector3(&s).unwrap();
        for (a, b) in [(0, 1), (1, 2), (0, 2)] {
            assert!((v.inner(a, b) + 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_factor_examples() {
        let f = gram_factor(&DMatrix::identity(3, 3), 1e-12).unwrap();
        assert_eq!(f.rank, 3);
        assert!(f.reconstruction_error < 1e-14);
        let f = gram_factor(&DMatrix::from_element(2, 2, 1.0), 1e-12).unwrap();
        assert_eq!(f.rank, 1);
        assert!(linalg::max_abs_diff(f.vectors.row(0), f.vectors.row(1)) < 1e-14);
        let simplex = DMatrix::from_fn(3, 3, |i, j| if i == j { 1.0 } else { -0.5 });
        let f = gram_factor(&simplex, 1e-12).unwrap();
        assert_eq!(f.rank, 2);
        assert!(f.reconstruction_error < 1e-10);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(gram_factor(&bad, 1e-9), Err(Error::NotPsd { .. })));
    }

    #[test]
    fn sdp_small_cases() {
        let sol = solve_vector_coloring_sdp(&k3(), 3.0, 1e-7, 5000, 1).unwrap();
        assert!(sol.report.converged, "{:?}", sol.report);
        assert!(sol.vectors.max_unit_residual() < 1e-9);
        let edge = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let sol = solve_vector_coloring_sdp(&edge, 2.0, 1e-7, 5000, 1).unwrap();
        assert!(sol.report.converged);
        let d = linalg::dot(sol.vectors.row(0), sol.vectors.row(1));
        assert!((d + 1.0).abs() < 1e-7);
        let k4: Vec<(usize, usize)> = (0..4)
            .flat_map(|a| ((a + 1)..4).map(move |b| (a, b)))
            .collect();
        let k4 = Graph::from_edges(4, &k4).unwrap();
        let sol = solve_vector_coloring_sdp(&k4, 3.0, 1e-7, 500, 1).unwrap();
        assert!(!sol.report.converged);
        // m unit vectors have average pairwise product >= -1/(m-1) = -1/3
        assert!(sol.report.max_edge_violation >= 0.5 - 1.0 / 3.0 - 1e-6);
    }

    #[test]
    fn lowrank_recovers_planted_structure() {
        let inst = generate_planted(300, [1.0 / 3.0; 3], 0.1, 3).unwrap();
        let sol = solve_vector_coloring_lowrank(&inst.graph, 3.0, 8, 1e-4, 500, 1).unwrap();
        assert!(sol.report.converged, "{:?}", sol.report);
        assert!(sol.vectors.max_unit_residual() < 1e-12);
        assert!(sol.achieved_kappa(&inst.graph) < 3.001);
        let path = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let sol = solve_vector_coloring_lowrank(&path, 2.0, 4, 1e-8, 2000, 5).unwrap();
        assert!(sol.report.converged, "{:?}", sol.report);
    }
}
