//! Threshold rounding of vector colorings: KMS (keep isolated selected
//! vertices) and KMS' (drop a maximal matching of the selected set), plus
//! conditional Monte Carlo estimates of the KMS' failure probabilities.

use std::collections::{HashMap, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::covers::{PackingMeasure, Provenance};
use crate::error::{Error, Result};
use crate::gaussian::{self, ConditionalGaussian};
use crate::graph::{self, Graph};
use crate::linalg;
use crate::rng;
use crate::stats::Estimate;
use crate::vector_coloring::VectorColoring;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdOrigin {
    Kappa,
    Inefficient,
    Explicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdParams {
    pub t: f64,
    pub origin: ThresholdOrigin,
    pub kappa: Option<f64>,
    pub c: Option<f64>,
    pub delta: Option<f64>,
}

impl ThresholdParams {
    pub fn explicit(t: f64) -> Self {
        ThresholdParams {
            t,
            origin: ThresholdOrigin::Explicit,
            kappa: None,
            c: None,
            delta: None,
        }
    }
}

/// `t = sqrt(2 (kappa-2)/kappa ln Δ)`.
pub fn kms_threshold(kappa: f64, delta: f64) -> Result<ThresholdParams> {
    if !(delta >= 2.0) {
        return Err(Error::DegenerateThreshold(format!("max degree {delta} < 2")));
    }
    if !(kappa >= 2.0) {
        return Err(Error::InvalidInput(format!("kappa {kappa} < 2")));
    }
    let t = (2.0 * ((kappa - 2.0) / kappa) * delta.ln()).sqrt();
    Ok(ThresholdParams {
        t,
        origin: ThresholdOrigin::Kappa,
        kappa: Some(kappa),
        c: None,
        delta: Some(delta),
    })
}

/// The `t` with `tail(t) = Δ^(-1/(3(1+c)))`.
pub fn inefficient_threshold(c: f64, delta: f64) -> Result<ThresholdParams> {
    if !(delta >= 2.0) {
        return Err(Error::DegenerateThreshold(format!("max degree {delta} < 2")));
    }
    if !(c >= 0.0) {
        return Err(Error::InvalidInput(format!("c = {c} < 0")));
    }
    let mass = inefficient_mass(c, delta);
    if mass >= 0.5 {
        return Err(Error::DegenerateThreshold(format!(
            "target tail mass {mass} >= 1/2 gives a non-positive threshold"
        )));
    }
    Ok(ThresholdParams {
        t: gaussian::tail_quantile(mass)?,
        origin: ThresholdOrigin::Inefficient,
        kappa: None,
        c: Some(c),
        delta: Some(delta),
    })
}

pub fn inefficient_mass(c: f64, delta: f64) -> f64 {
    delta.powf(-1.0 / (3.0 * (1.0 + c)))
}

/// Max degree used for a coloring's threshold: the degree inside the
/// coloring's vertex set, floored at 2 so the formula stays defined.
pub fn threshold_degree(g: &Graph, vc: &VectorColoring) -> usize {
    g.induced_max_degree(&vc.vertices).max(2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundingOutcome {
    pub seed: u64,
    pub t: f64,
    pub selected: Vec<usize>,
    pub matching: Vec<(usize, usize)>,
    pub returned: Vec<usize>,
    /// Selected vertices that were not returned.
    pub removed: Vec<usize>,
}

#[derive(Serialize)]
struct OutcomeSummary<'a> {
    seed: u64,
    t: f64,
    selected: usize,
    matched_edges: usize,
    returned: &'a [usize],
}

impl RoundingOutcome {
    pub fn summary_json(&self) -> Result<String> {
        Ok(serde_json::to_string(&OutcomeSummary {
            seed: self.seed,
            t: self.t,
            selected: self.selected.len(),
            matched_edges: self.matching.len(),
            returned: &self.returned,
        })?)
    }
}

fn assert_independent(g: &Graph, set: &[usize]) {
    assert!(
        graph::is_independent_set(g, set),
        "rounding returned a dependent set"
    );
}

/// Vertices of the coloring with `r . u >= t` for a fresh Gaussian `r`.
fn select<R: Rng>(vc: &VectorColoring, t: f64, r: &mut R) -> Vec<usize> {
    let dir = rng::gaussian_vector(r, vc.dim());
    let mut proj = Vec::new();
    vc.vectors.project(&dir, &mut proj);
    vc.vertices
        .iter()
        .zip(&proj)
        .filter(|&(_, &p)| p >= t)
        .map(|(&v, _)| v)
        .collect()
}

/// KMS with the kappa-based threshold for this coloring.
pub fn kms_round(g: &Graph, vc: &VectorColoring, seed: u64) -> Result<RoundingOutcome> {
    let th = kms_threshold(vc.kappa, threshold_degree(g, vc) as f64)?;
    kms_round_with(g, vc, th.t, seed)
}

/// KMS at an explicit threshold: returns the isolated vertices of `S`.
pub fn kms_round_with(g: &Graph, vc: &VectorColoring, t: f64, seed: u64) -> Result<RoundingOutcome> {
    let mut r = rng::stream(seed, 0);
    let selected = select(vc, t, &mut r);
    let mut in_s = vec![false; g.n()];
    for &v in &selected {
        in_s[v] = true;
    }
    let (returned, removed): (Vec<usize>, Vec<usize>) = selected
        .iter()
        .partition(|&&v| g.neighbors(v).iter().all(|&w| !in_s[w]));
    assert_independent(g, &returned);
    Ok(RoundingOutcome {
        seed,
        t,
        selected,
        matching: Vec::new(),
        returned,
        removed,
    })
}

/// KMS': drops every vertex covered by a maximal matching of `S`.
pub fn kms_prime_round(
    g: &Graph,
    vc: &VectorColoring,
    t: &ThresholdParams,
    seed: u64,
) -> Result<RoundingOutcome> {
    let mut r = rng::stream(seed, 0);
    let selected = select(vc, t.t, &mut r);
    let matching = graph::maximal_matching(g, &selected, rng::child_seed(seed, 1));
    let mut matched = vec![false; g.n()];
    for &(u, v) in &matching {
        matched[u] = true;
        matched[v] = true;
    }
    let (removed, returned): (Vec<usize>, Vec<usize>) =
        selected.iter().partition(|&&v| matched[v]);
    assert_independent(g, &returned);
    Ok(RoundingOutcome {
        seed,
        t: t.t,
        selected,
        matching,
        returned,
        removed,
    })
}

/// Draws `r` conditioned on `r . v_i >= t` and runs KMS' on the connected
/// component of `i` inside `S` only; returns `i`'s matching partner, if any.
/// Greedy matching under a uniformly random edge order decomposes over the
/// components of `S`, so this has the same law as the global procedure.
pub struct KmsPrimeSampler<'a> {
    g: &'a Graph,
    vc: &'a VectorColoring,
    t: f64,
}

impl<'a> KmsPrimeSampler<'a> {
    pub fn new(g: &'a Graph, vc: &'a VectorColoring, t: f64) -> Self {
        KmsPrimeSampler { g, vc, t }
    }

    /// Matching partners of vertex `i` over `samples` conditional draws.
    pub fn partners(&self, i: usize, samples: usize, seed: u64) -> Result<Vec<Option<usize>>> {
        let pos = self
            .vc
            .position(i)
            .ok_or_else(|| Error::InvalidInput(format!("vertex {i} not in coloring")))?;
        let cg = ConditionalGaussian::new(self.vc.vectors.row(pos), self.t)?;
        let mut r = rng::stream(seed, i as u64);
        let mut dir = vec![0.0; self.vc.dim()];
        let mut out = Vec::with_capacity(samples);
        let mut status: HashMap<usize, bool> = HashMap::new();
        let mut queue = VecDeque::new();
        let mut edges = Vec::new();
        for _ in 0..samples {
            cg.sample_into(&mut r, &mut dir)?;
            status.clear();
            queue.clear();
            edges.clear();
            status.insert(i, true);
            queue.push_back(i);
            while let Some(u) = queue.pop_front() {
                for &w in self.g.neighbors(u) {
                    let sel = match status.get(&w) {
                        Some(&s) => s,
                        None => {
                            let s = self
                                .vc
                                .vector_of(w)
                                .is_some_and(|v| linalg::dot(v, &dir) >= self.t);
                            status.insert(w, s);
                            if s {
                                queue.push_back(w);
                            }
                            s
                        }
                    };
                    if sel && u < w {
                        edges.push((u, w));
                    }
                }
            }
            if edges.is_empty() {
                out.push(None);
                continue;
            }
            edges.shuffle(&mut r);
            out.push(partner_in_greedy_matching(&edges, i));
        }
        Ok(out)
    }
}

fn partner_in_greedy_matching(edges: &[(usize, usize)], i: usize) -> Option<usize> {
    let mut used: HashMap<usize, ()> = HashMap::new();
    for &(u, v) in edges {
        if !used.contains_key(&u) && !used.contains_key(&v) {
            if u == i {
                return Some(v);
            }
            if v == i {
                return Some(u);
            }
            used.insert(u, ());
            used.insert(v, ());
        }
    }
    None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VertexFailure {
    pub vertex: usize,
    pub estimate: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureReport {
    pub t: f64,
    pub samples: usize,
    pub seed: u64,
    pub per_vertex: Vec<VertexFailure>,
    /// Vertices with estimated removal probability at least 1/2.
    pub failing: usize,
    pub unestimated: Vec<usize>,
    /// KMS' fails when at least half the vertices have `p_i >= 1/2`.
    pub fails: bool,
}

/// Per-vertex `Pr[i removed | r . v_i >= t]` for KMS'.
pub fn estimate_failure(
    g: &Graph,
    vc: &VectorColoring,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<FailureReport> {
    if samples < 100 {
        return Err(Error::InvalidInput(format!("samples = {samples} < 100")));
    }
    let sampler = KmsPrimeSampler::new(g, vc, t);
    let mut per_vertex = Vec::with_capacity(vc.len());
    let mut unestimated = Vec::new();
    let mut failing = 0;
    for &i in &vc.vertices {
        match sampler.partners(i, samples, seed) {
            Ok(p) => {
                let hits = p.iter().filter(|x| x.is_some()).count();
                let e = Estimate::new(hits as u64, samples as u64);
                if e.p >= 0.5 {
                    failing += 1;
                }
                per_vertex.push(VertexFailure {
                    vertex: i,
                    estimate: Some(e),
                });
            }
            Err(Error::TruncationUnderflow(_)) => {
                unestimated.push(i);
                per_vertex.push(VertexFailure {
                    vertex: i,
                    estimate: None,
                });
            }
            Err(e) => return Err(e),
        }
    }
    Ok(FailureReport {
        t,
        samples,
        seed,
        failing,
        fails: !vc.is_empty() && 2 * failing >= vc.len(),
        per_vertex,
        unestimated,
    })
}

/// `μ_i(j) = Pr[{i,j} in M | r . v_i >= t]` over the neighbors of `i` in the
/// coloring. Index `j` of the packing stands for the vector `v_ij`; the
/// packing threshold is `sqrt 3 t`, exact for strict colorings.
pub fn packing_from_kms_prime(
    g: &Graph,
    vc: &VectorColoring,
    i: usize,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<PackingMeasure> {
    let nbrs: Vec<usize> = g
        .neighbors(i)
        .iter()
        .copied()
        .filter(|&j| vc.position(j).is_some())
        .collect();
    if nbrs.is_empty() {
        return Err(Error::Precondition(format!("vertex {i} has no neighbor in the coloring")));
    }
    let partners = KmsPrimeSampler::new(g, vc, t).partners(i, samples, seed)?;
    let mut counts = vec![0u64; nbrs.len()];
    for j in partners.into_iter().flatten() {
        let k = nbrs.binary_search(&j).expect("partner is a neighbor");
        counts[k] += 1;
    }
    let weights = counts.iter().map(|&c| c as f64 / samples as f64).collect();
    PackingMeasure::new(nbrs, weights, 3f64.sqrt() * t, samples as u64, seed, Provenance::KmsPrime)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{bivariate_upper, tail};
    use crate::linalg::Vectors;

    fn edge_coloring(v: &[[f64; 2]; 2], kappa: f64) -> (Graph, VectorColoring) {
        let g = Graph::from_edges(2, &[(0, 1)]).unwrap();
        let vc = VectorColoring::new(&g, vec![0, 1], Vectors::from_rows(v).unwrap(), kappa).unwrap();
        (g, vc)
    }

    #[test]
    fn thresholds() {
        assert_eq!(kms_threshold(2.0, 50.0).unwrap().t, 0.0);
        let t = kms_threshold(3.0, 3f64.exp()).unwrap().t;
        assert!((t - 2f64.sqrt()).abs() < 1e-12);
        assert!((kms_threshold(3.0, 1000.0).unwrap().t - 2.145_966).abs() < 1e-6);
        assert!(kms_threshold(3.0, 1.0).is_err());
        let th = inefficient_threshold(0.0, 1e6).unwrap();
        assert!((tail(th.t) - 0.01).abs() < 1e-12);
        assert!((th.t - 2.326_347_874).abs() < 1e-8);
        let th = inefficient_threshold(0.039_324_1, 1e6).unwrap();
        assert!((tail(th.t) - inefficient_mass(0.039_324_1, 1e6)).abs() < 1e-9);
        assert!((th.t - 2.26).abs() < 0.01);
        assert!(inefficient_threshold(1e9, 1e6).is_err());
    }

    #[test]
    fn antipodal_edge_selects_exactly_one() {
        let (g, vc) = edge_coloring(&[[1.0, 0.0], [-1.0, 0.0]], 2.0);
        for seed in 0..50 {
            let out = kms_round(&g, &vc, seed).unwrap();
            assert_eq!(out.t, 0.0);
            assert_eq!(out.selected.len(), 1);
            assert_eq!(out.returned, out.selected);
        }
    }

    #[test]
    fn single_vertex_frequency() {
        let g = Graph::empty(1);
        let vc = VectorColoring::new(&g, vec![0], Vectors::from_rows(&[[0.0, 1.0]]).unwrap(), 3.0).unwrap();
        let t = 1.0;
        let n = 10_000;
        let hits = (0..n)
            .filter(|&s| !kms_round_with(&g, &vc, t, s).unwrap().returned.is_empty())
            .count();
        let p = tail(t);
        let sd = (p * (1.0 - p) / n as f64).sqrt();
        assert!((hits as f64 / n as f64 - p).abs() < 3.0 * sd);
    }

    #[test]
    fn kms_prime_triangle_and_independent() {
        let g = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let same = Vectors::from_rows(&[[1.0], [1.0], [1.0]]).unwrap();
        let vc = VectorColoring::new(&g, vec![0, 1, 2], same, 2.0).unwrap();
        let out = kms_prime_round(&g, &vc, &ThresholdParams::explicit(-10.0), 4).unwrap();
        assert_eq!(out.selected.len(), 3);
        assert_eq!(out.matching.len(), 1);
        assert_eq!(out.returned.len(), 1);
        let e = Graph::empty(3);
        let vc = VectorColoring::new(&e, vec![0, 1, 2], Vectors::from_rows(&[[1.0], [1.0], [1.0]]).unwrap(), 2.0).unwrap();
        let out = kms_prime_round(&e, &vc, &ThresholdParams::explicit(-10.0), 4).unwrap();
        assert!(out.matching.is_empty());
        assert_eq!(out.returned, vec![0, 1, 2]);
    }

    #[test]
    fn failure_examples() {
        let e = Graph::empty(2);
        let vc = VectorColoring::new(&e, vec![0, 1], Vectors::from_rows(&[[1.0], [1.0]]).unwrap(), 2.0).unwrap();
        let rep = estimate_failure(&e, &vc, 0.5, 200, 1).unwrap();
        assert!(!rep.fails);
        assert!(rep.per_vertex.iter().all(|v| v.estimate.unwrap().successes == 0));
        let (g, vc) = edge_coloring(&[[1.0, 0.0], [-1.0, 0.0]], 2.0);
        let rep = estimate_failure(&g, &vc, 0.0, 500, 1).unwrap();
        assert_eq!(rep.failing, 0);
        assert!(estimate_failure(&g, &vc, 0.0, 50, 1).is_err());
        let rep = estimate_failure(&g, &vc, 9.0, 100, 1).unwrap();
        assert_eq!(rep.unestimated, vec![0, 1]);
    }

    #[test]
    fn edge_packing_matches_orthant_oracle() {
        let h = 3f64.sqrt() / 2.0;
        let (g, vc) = edge_coloring(&[[1.0, 0.0], [-0.5, h]], 3.0);
        let n = 20_000;
        let mu = packing_from_kms_prime(&g, &vc, 0, 0.0, n, 3).unwrap();
        let want = bivariate_upper(0.0, 0.0, -0.5) / 0.5;
        assert!((want - 1.0 / 3.0).abs() < 1e-10);
        let sd = (want * (1.0 - want) / n as f64).sqrt();
        assert!((mu.weight(1).unwrap() - want).abs() < 3.0 * sd);
        assert_eq!(mu.total(), mu.weight(1).unwrap());
    }
}
