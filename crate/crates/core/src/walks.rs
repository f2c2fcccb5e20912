//! Second- and third-level neighborhood walks: weighted pruning of the KMS'
//! packings, the `W_ij` windows, good-k scoring, center selection and the
//! independent-set extraction of both levels.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::covers::{self, estimate_cover_prob, estimate_cover_prob_thresholds, PackingMeasure, PruneSchedule};
use crate::error::{Error, Result};
use crate::gaussian;
use crate::graph::{self, Graph};
use crate::linalg::{self, Vectors};
use crate::params;
use crate::rounding::{self, RoundingOutcome, ThresholdParams};
use crate::sos::{SosSolution, StrictVector3Coloring};
use crate::stats::Estimate;
use crate::vector_coloring::{self, v_orth, VectorColoring};

const ROOT3: f64 = 1.732_050_807_568_877_2;
/// Tolerance on decomposition identities before they are reported as errors.
const DECOMP_TOL: f64 = 1e-6;

/// Explicit stand-ins for the asymptotic slack terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SlackConfig {
    /// Additive slack on inner-product windows.
    pub eps_dot: f64,
    /// Packing-mass floor.
    pub mass_floor: f64,
    /// Incident-weight threshold of the weighted pruning.
    pub prune_r: f64,
    /// Subtracted from two-step cover thresholds.
    pub threshold_slack: f64,
    /// Constant in the spread exponent `exp(-c' ε² s²)`; only reported.
    pub spread_constant: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Default for SlackConfig {
    fn default() -> Self {
        SlackConfig {
            eps_dot: 0.05,
            mass_floor: 0.02,
            prune_r: 0.05,
            threshold_slack: 0.0,
            spread_constant: 0.05,
            samples: 2000,
            seed: 0,
        }
    }
}

impl SlackConfig {
    pub fn validate(&self) -> Result<()> {
        let pos = [
            ("eps_dot", self.eps_dot),
            ("mass_floor", self.mass_floor),
            ("prune_r", self.prune_r),
            ("spread_constant", self.spread_constant),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!("{name} = {v} must be positive")));
            }
        }
        if self.mass_floor > 1.0 {
            return Err(Error::InvalidInput(format!("mass_floor = {} > 1", self.mass_floor)));
        }
        if !(self.threshold_slack >= 0.0) {
            return Err(Error::InvalidInput("threshold_slack must be nonnegative".into()));
        }
        Ok(())
    }
}

/// Symmetric nonnegative edge weights keyed by `(min, max)`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EdgeWeights {
    map: BTreeMap<(usize, usize), f64>,
}

impl EdgeWeights {
    pub fn new() -> Self {
        Self::default()
    }

    fn key(i: usize, j: usize) -> (usize, usize) {
        (i.min(j), i.max(j))
    }

    pub fn set(&mut self, i: usize, j: usize, w: f64) -> Result<()> {
        if i == j || !(w >= 0.0) {
            return Err(Error::InvalidInput(format!("bad weight {w} on ({i}, {j})")));
        }
        self.map.insert(Self::key(i, j), w);
        Ok(())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.map.get(&Self::key(i, j)).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.map.values().sum()
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// `Σ_{j ∈ N_g(i)} w(i, j)`.
    pub fn incident(&self, g: &Graph, i: usize) -> f64 {
        g.neighbors(i).iter().map(|&j| self.get(i, j)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = ((usize, usize), f64)> + '_ {
        self.map.iter().map(|(&k, &v)| (k, v))
    }
}

/// Fixpoint of the weighted peeling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrunedGraph {
    /// Same vertex ids as the input; only edges among survivors remain.
    pub graph: Graph,
    pub alive: Vec<bool>,
    pub removal_order: Vec<usize>,
}

impl PrunedGraph {
    pub fn vertices(&self) -> Vec<usize> {
        (0..self.alive.len()).filter(|&v| self.alive[v]).collect()
    }
}

/// Subgraph of `g` keeping only edges among `alive` vertices (and not in `drop`).
fn restrict(g: &Graph, alive: &[bool], drop: &BTreeSet<(usize, usize)>) -> Graph {
    let edges: Vec<(usize, usize)> = g
        .edges()
        .filter(|&(u, v)| alive[u] && alive[v] && !drop.contains(&(u, v)))
        .collect();
    Graph::from_edges(g.n(), &edges).expect("subgraph of a valid graph")
}

/// Repeatedly deletes the lowest-id vertex whose incident weight (among
/// surviving neighbors) is below `r`. Vertices without edges are deleted too.
pub fn prune_weighted_graph(g: &Graph, w: &EdgeWeights, r: f64) -> Result<PrunedGraph> {
    if !(r > 0.0) {
        return Err(Error::InvalidInput(format!("r = {r} must be positive")));
    }
    let n = g.n();
    let mut alive = vec![true; n];
    let mut inc: Vec<f64> = (0..n).map(|i| w.incident(g, i)).collect();
    let mut work: BTreeSet<usize> = (0..n).filter(|&i| inc[i] < r).collect();
    let mut removal_order = Vec::new();
    while let Some(v) = work.pop_first() {
        if !alive[v] {
            continue;
        }
        alive[v] = false;
        removal_order.push(v);
        for &u in g.neighbors(v) {
            if alive[u] {
                inc[u] -= w.get(u, v);
                if inc[u] < r {
                    work.insert(u);
                }
            }
        }
    }
    if !alive.iter().any(|&a| a) {
        return Err(Error::PruneExhausted {
            stage: "weighted-prune".into(),
        });
    }
    let graph = restrict(g, &alive, &BTreeSet::new());
    debug_assert!((0..n).all(|i| !alive[i] || w.incident(&graph, i) >= r));
    Ok(PrunedGraph {
        graph,
        alive,
        removal_order,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageTrace {
    pub stage: String,
    /// Edges deleted directly by the stage (before its re-prune).
    pub removed_edges: usize,
    /// Vertices deleted by the stage's re-prune.
    pub removed_vertices: Vec<usize>,
    pub vertices_after: usize,
    pub edges_after: usize,
}

/// Neighbors of `j` whose `E_ij` triggered an edge-bundle removal, and the
/// norm certificate `|Σ_p v_{j i_p}|² >= 0` replayed on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterTriggers {
    pub j: usize,
    pub triggers: Vec<usize>,
    pub norm_sq: f64,
    /// Largest pairwise `v_{j i_p} . v_{j i_q}`; below `-eps_dot` by construction.
    pub max_pair_inner: Option<f64>,
}

impl ClusterTriggers {
    /// `q < 1/eps_dot + 1`, the consequence of `0 <= q - q(q-1) eps_dot`.
    pub fn certificate_holds(&self, eps_dot: f64) -> bool {
        let q = self.triggers.len() as f64;
        self.norm_sq >= -1e-9
            && self.max_pair_inner.is_none_or(|m| m < -eps_dot)
            && q < 1.0 / eps_dot + 1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoostSummary {
    pub vertex: usize,
    pub before: usize,
    pub kept: usize,
    pub iterations: usize,
    pub exhausted: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PruneTrace {
    pub stages: Vec<StageTrace>,
    pub boosts: Vec<BoostSummary>,
    /// Set when stage 2 could not run (threshold at most 1, or `c = 0`).
    pub boost_skipped: Option<String>,
    pub schedule_alpha_floor: Option<f64>,
    pub clusters: Vec<ClusterTriggers>,
    pub failing_vertices: usize,
}

/// Frozen state shared by the walk operations.
#[derive(Debug, Clone)]
pub struct WalkContext {
    pub graph: Graph,
    pub strict: StrictVector3Coloring,
    pub threshold: ThresholdParams,
    /// Inefficiency parameter used for all windows.
    pub c: f64,
    pub slack: SlackConfig,
    /// Symmetric `μ_i(j) = μ_j(i)`.
    pub mu: EdgeWeights,
    /// Per-vertex estimated KMS' removal probability (empty for explicit μ).
    pub p_hat: Vec<f64>,
    pub pruned: Graph,
    pub alive: Vec<bool>,
    /// `W_ij` for every directed edge `(i, j)` of the pruned graph.
    pub w_sets: BTreeMap<(usize, usize), Vec<usize>>,
    pub trace: PruneTrace,
    orth: BTreeMap<(usize, usize), Vec<f64>>,
}

impl WalkContext {
    pub fn t(&self) -> f64 {
        self.threshold.t
    }

    pub fn vertices(&self) -> Vec<usize> {
        (0..self.alive.len()).filter(|&v| self.alive[v]).collect()
    }

    pub fn is_empty(&self) -> bool {
        !self.alive.iter().any(|&a| a)
    }

    pub fn v(&self, i: usize) -> &[f64] {
        self.strict.vector(i)
    }

    /// `v_ij`, cached for the edges of the base graph.
    pub fn vij(&self, i: usize, j: usize) -> Result<Vec<f64>> {
        match self.orth.get(&(i, j)) {
            Some(v) => Ok(v.clone()),
            None => v_orth(self.v(i), self.v(j)),
        }
    }

    fn vij_ref(&self, i: usize, j: usize) -> &[f64] {
        self.orth.get(&(i, j)).expect("edge of the base graph")
    }

    pub fn mu(&self, i: usize, j: usize) -> f64 {
        self.mu.get(i, j)
    }

    /// `μ_i(N_{G'}(i))`.
    pub fn mass(&self, i: usize) -> f64 {
        self.mu.incident(&self.pruned, i)
    }

    pub fn window(&self) -> f64 {
        params::window(self.c)
    }

    pub fn w_set(&self, i: usize, j: usize) -> &[usize] {
        self.w_sets.get(&(i, j)).map_or(&[], Vec::as_slice)
    }

    /// `μ_j(W_ij)`.
    pub fn w_mass(&self, i: usize, j: usize) -> f64 {
        self.w_set(i, j).iter().map(|&k| self.mu(j, k)).sum()
    }

    pub fn checkpoint(&self) -> WalkCheckpoint {
        let mu = (0..self.graph.n())
            .filter(|&i| self.graph.degree(i) > 0)
            .map(|i| MuTable {
                vertex: i,
                neighbors: self.graph.neighbors(i).to_vec(),
                weights: self.graph.neighbors(i).iter().map(|&j| self.mu(i, j)).collect(),
            })
            .collect();
        WalkCheckpoint {
            graph: GraphRef::of(&self.graph),
            threshold: self.threshold,
            c: self.c,
            slack: self.slack,
            p_hat: self.p_hat.clone(),
            mu,
            vertices: self.vertices(),
            pruned_edges: self.pruned.edges().collect(),
            w_sets: self
                .w_sets
                .iter()
                .map(|(&(i, j), m)| WEntry {
                    i,
                    j,
                    members: m.clone(),
                })
                .collect(),
            trace: self.trace.clone(),
        }
    }

    /// Rebuilds a context from a checkpoint without re-sampling.
    pub fn from_checkpoint(g: &Graph, strict: &StrictVector3Coloring, cp: &WalkCheckpoint) -> Result<Self> {
        let r = GraphRef::of(g);
        if r != cp.graph {
            return Err(Error::InvalidInput("checkpoint was taken on a different graph".into()));
        }
        check_strict_size(g, strict)?;
        let mut mu = EdgeWeights::new();
        for t in &cp.mu {
            if t.neighbors.len() != t.weights.len() {
                return Err(Error::InvalidInput("malformed mu table".into()));
            }
            for (&j, &w) in t.neighbors.iter().zip(&t.weights) {
                if !g.has_edge(t.vertex, j) {
                    return Err(Error::InvalidInput(format!("mu on non-edge ({}, {j})", t.vertex)));
                }
                mu.set(t.vertex, j, w)?;
            }
        }
        let mut alive = vec![false; g.n()];
        for &v in &cp.vertices {
            g.check_vertex(v)?;
            alive[v] = true;
        }
        let pruned = Graph::from_edges(g.n(), &cp.pruned_edges)?;
        let w_sets = cp.w_sets.iter().map(|e| ((e.i, e.j), e.members.clone())).collect();
        Ok(WalkContext {
            orth: orth_cache(g, strict)?,
            graph: g.clone(),
            strict: strict.clone(),
            threshold: cp.threshold,
            c: cp.c,
            slack: cp.slack,
            mu,
            p_hat: cp.p_hat.clone(),
            pruned,
            alive,
            w_sets,
            trace: cp.trace.clone(),
        })
    }
}

/// Identifies a graph by size and an FNV-1a hash of its sorted edge list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphRef {
    pub n: usize,
    pub edges: usize,
    pub fingerprint: String,
}

impl GraphRef {
    pub fn of(g: &Graph) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        let mut eat = |x: u64| {
            for b in x.to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x0100_0000_01b3);
            }
        };
        eat(g.n() as u64);
        for (u, v) in g.edges() {
            eat(u as u64);
            eat(v as u64);
        }
        GraphRef {
            n: g.n(),
            edges: g.edge_count(),
            fingerprint: format!("{h:016x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MuTable {
    pub vertex: usize,
    pub neighbors: Vec<usize>,
    pub weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WEntry {
    pub i: usize,
    pub j: usize,
    pub members: Vec<usize>,
}

/// Replayable JSON bundle of a [`WalkContext`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkCheckpoint {
    pub graph: GraphRef,
    pub threshold: ThresholdParams,
    pub c: f64,
    pub slack: SlackConfig,
    pub p_hat: Vec<f64>,
    pub mu: Vec<MuTable>,
    pub vertices: Vec<usize>,
    pub pruned_edges: Vec<(usize, usize)>,
    pub w_sets: Vec<WEntry>,
    pub trace: PruneTrace,
}

impl WalkCheckpoint {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

fn check_strict_size(g: &Graph, strict: &StrictVector3Coloring) -> Result<()> {
    if strict.n() != g.n() {
        return Err(Error::InvalidInput(format!(
            "coloring has {} vectors for {} vertices",
            strict.n(),
            g.n()
        )));
    }
    Ok(())
}

fn orth_cache(g: &Graph, strict: &StrictVector3Coloring) -> Result<BTreeMap<(usize, usize), Vec<f64>>> {
    let mut m = BTreeMap::new();
    for (u, v) in g.edges() {
        m.insert((u, v), v_orth(strict.vector(u), strict.vector(v))?);
        m.insert((v, u), v_orth(strict.vector(v), strict.vector(u))?);
    }
    Ok(m)
}

/// Monte Carlo KMS' packings, symmetrized as `(μ̂_i(j) + μ̂_j(i)) / 2`.
/// Also returns `p̂_i = Σ_j μ̂_i(j)`.
pub fn estimate_packings(
    g: &Graph,
    strict: &StrictVector3Coloring,
    t: f64,
    samples: usize,
    seed: u64,
) -> Result<(EdgeWeights, Vec<f64>)> {
    check_strict_size(g, strict)?;
    let vc = VectorColoring::from_strict(g, strict)?;
    let mut raw: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut p_hat = vec![0.0; g.n()];
    for i in 0..g.n() {
        if g.degree(i) == 0 {
            continue;
        }
        let mu = rounding::packing_from_kms_prime(g, &vc, i, t, samples, seed)?;
        p_hat[i] = mu.total();
        for (&j, &w) in mu.indices.iter().zip(&mu.weights) {
            raw.insert((i, j), w);
        }
    }
    let mut w = EdgeWeights::new();
    for (u, v) in g.edges() {
        let a = raw.get(&(u, v)).copied().unwrap_or(0.0);
        let b = raw.get(&(v, u)).copied().unwrap_or(0.0);
        w.set(u, v, (a + b) / 2.0)?;
    }
    Ok((w, p_hat))
}

/// Monte Carlo packings, failure check, then the three pruning stages.
pub fn second_level_prune(
    g: &Graph,
    strict: &StrictVector3Coloring,
    threshold: ThresholdParams,
    c: f64,
    slack: SlackConfig,
) -> Result<WalkContext> {
    slack.validate()?;
    let (mu, p_hat) = estimate_packings(g, strict, threshold.t, slack.samples, slack.seed)?;
    let failing = p_hat.iter().filter(|&&p| p >= 0.5).count();
    if g.n() == 0 || 2 * failing < g.n() {
        return Err(Error::Precondition(format!(
            "KMS' does not fail: {failing} of {} vertices have removal probability >= 1/2",
            g.n()
        )));
    }
    let mut ctx = prune_with_weights(g, strict, threshold, c, slack, mu)?;
    ctx.trace.failing_vertices = failing;
    ctx.p_hat = p_hat;
    Ok(ctx)
}

/// The three pruning stages on explicit symmetric weights (no sampling and
/// no failure precondition).
pub fn prune_with_weights(
    g: &Graph,
    strict: &StrictVector3Coloring,
    threshold: ThresholdParams,
    c: f64,
    slack: SlackConfig,
    mu: EdgeWeights,
) -> Result<WalkContext> {
    slack.validate()?;
    check_strict_size(g, strict)?;
    if !(c >= 0.0 && c < 1.0) {
        return Err(Error::Domain(format!("c = {c} outside [0, 1)")));
    }
    for ((u, v), _) in mu.iter() {
        if !g.has_edge(u, v) {
            return Err(Error::InvalidInput(format!("weight on non-edge ({u}, {v})")));
        }
    }
    let orth = orth_cache(g, strict)?;
    let mut trace = PruneTrace::default();
    let stage_err = |stage: &'static str| move |e: Error| match e {
        Error::PruneExhausted { .. } => Error::PruneExhausted { stage: stage.into() },
        other => other,
    };

    // stage 1
    let p1 = prune_weighted_graph(g, &mu, slack.prune_r).map_err(stage_err("1-weight"))?;
    trace.stages.push(StageTrace {
        stage: "1-weight".into(),
        removed_edges: 0,
        removed_vertices: p1.removal_order.clone(),
        vertices_after: p1.vertices().len(),
        edges_after: p1.graph.edge_count(),
    });

    // stage 2: per-vertex spread boosting
    let t = threshold.t;
    let cc = params::window(c);
    let mut drop: BTreeSet<(usize, usize)> = BTreeSet::new();
    if t <= 1.0 || c == 0.0 {
        trace.boost_skipped = Some(format!("schedule undefined at t = {t}, c = {c}"));
    } else {
        let eps = t.ln().powi(2) / t;
        let lambda1 = (cc * (1.0 + eps)).sqrt();
        for i in p1.vertices() {
            let nbrs = p1.graph.neighbors(i);
            let mut x = Vectors::new(strict.dim());
            for &j in nbrs {
                x.push(&orth[&(i, j)])?;
            }
            let weights: Vec<f64> = nbrs.iter().map(|&j| mu.get(i, j)).collect();
            let pm = PackingMeasure::explicit(weights, ROOT3 * t)?;
            let rows: Vec<usize> = (0..nbrs.len()).collect();
            let p = covers::measured_spread(&x, &pm.weights, &rows, lambda1);
            let sched = PruneSchedule::new(t, c, lambda1, p)?;
            if trace.schedule_alpha_floor.is_none() {
                let s = t;
                let floor = std::f64::consts::E / 2.0
                    * (-slack.spread_constant * sched.epsilon.powi(2) * s * s / sched.sigma as f64).exp();
                trace.schedule_alpha_floor = Some(floor);
            }
            let out = covers::boost_spread(&x, &pm, lambda1, p, sched.sigma, sched.alpha, sched.lambda_prime)?;
            if out.kept.len() < nbrs.len() {
                let kept: BTreeSet<usize> = out.kept.iter().map(|&k| nbrs[k]).collect();
                for &j in nbrs {
                    if !kept.contains(&j) {
                        drop.insert((i.min(j), i.max(j)));
                    }
                }
            }
            trace.boosts.push(BoostSummary {
                vertex: i,
                before: nbrs.len(),
                kept: out.kept.len(),
                iterations: out.iterations,
                exhausted: out.exhausted,
            });
        }
    }
    let g2_raw = restrict(&p1.graph, &p1.alive, &drop);
    let p2 = prune_weighted_graph(&g2_raw, &mu, slack.prune_r).map_err(stage_err("2-spread"))?;
    trace.stages.push(StageTrace {
        stage: "2-spread".into(),
        removed_edges: drop.len(),
        removed_vertices: p2
            .removal_order
            .iter()
            .copied()
            .filter(|&v| p1.alive[v])
            .collect(),
        vertices_after: p2.vertices().len(),
        edges_after: p2.graph.edge_count(),
    });

    // stage 3: clustered E_ij bundles
    let mut adj: Vec<BTreeSet<usize>> = (0..g.n())
        .map(|v| p2.graph.neighbors(v).iter().copied().collect())
        .collect();
    let mut triggers: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut removed3 = 0;
    loop {
        let mut changed = false;
        for j in 0..g.n() {
            let mut idx = 0;
            loop {
                let Some(&i) = adj[j].iter().nth(idx) else { break };
                let vji = &orth[&(j, i)];
                let e: Vec<usize> = adj[j]
                    .iter()
                    .copied()
                    .filter(|&k| linalg::dot(vji, &orth[&(j, k)]) >= -slack.eps_dot)
                    .collect();
                let m: f64 = e.iter().map(|&k| mu.get(j, k)).sum();
                if m < slack.mass_floor {
                    for &k in &e {
                        adj[j].remove(&k);
                        adj[k].remove(&j);
                        removed3 += 1;
                    }
                    triggers.entry(j).or_default().push(i);
                    changed = true;
                    // i itself is in E_ij, so the scan position now holds the next neighbor
                } else {
                    idx += 1;
                }
            }
        }
        if !changed {
            break;
        }
    }
    for (&j, tr) in &triggers {
        let mut sum = vec![0.0; strict.dim()];
        let mut max_pair: Option<f64> = None;
        for (a, &p) in tr.iter().enumerate() {
            linalg::axpy(&mut sum, 1.0, &orth[&(j, p)]);
            for &q in &tr[a + 1..] {
                let d = linalg::dot(&orth[&(j, p)], &orth[&(j, q)]);
                max_pair = Some(max_pair.map_or(d, |m: f64| m.max(d)));
            }
        }
        trace.clusters.push(ClusterTriggers {
            j,
            triggers: tr.clone(),
            norm_sq: linalg::dot(&sum, &sum),
            max_pair_inner: max_pair,
        });
    }
    let edges3: Vec<(usize, usize)> = (0..g.n())
        .flat_map(|u| adj[u].iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
        .collect();
    let g3_raw = Graph::from_edges(g.n(), &edges3)?;
    let p3 = prune_weighted_graph(&g3_raw, &mu, slack.prune_r).map_err(stage_err("3-cluster"))?;
    trace.stages.push(StageTrace {
        stage: "3-cluster".into(),
        removed_edges: removed3,
        removed_vertices: p3
            .removal_order
            .iter()
            .copied()
            .filter(|&v| p2.alive[v])
            .collect(),
        vertices_after: p3.vertices().len(),
        edges_after: p3.graph.edge_count(),
    });

    let mut ctx = WalkContext {
        graph: g.clone(),
        strict: strict.clone(),
        threshold,
        c,
        slack,
        mu,
        p_hat: Vec::new(),
        pruned: p3.graph,
        alive: p3.alive,
        w_sets: BTreeMap::new(),
        trace,
        orth,
    };
    ctx.w_sets = build_w_sets(&ctx);
    Ok(ctx)
}

/// `W_ij = {k ∈ N_{G'}(j) : -eps <= v_ji . v_jk <= c/(1+c) + eps}`.
fn build_w_sets(ctx: &WalkContext) -> BTreeMap<(usize, usize), Vec<usize>> {
    let hi = ctx.window() + ctx.slack.eps_dot;
    let lo = -ctx.slack.eps_dot;
    let mut out = BTreeMap::new();
    for i in ctx.vertices() {
        for &j in ctx.pruned.neighbors(i) {
            let vji = ctx.vij_ref(j, i);
            let members = ctx
                .pruned
                .neighbors(j)
                .iter()
                .copied()
                .filter(|&k| {
                    let a = linalg::dot(vji, ctx.vij_ref(j, k));
                    (lo..=hi).contains(&a)
                })
                .collect();
            out.insert((i, j), members);
        }
    }
    out
}

/// Components of `v_k` along `v_i`, `v_ij` and `v_jk - α v_ji`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepDecomposition {
    pub alpha: f64,
    pub beta: f64,
    pub components: [Vec<f64>; 3],
    /// Largest pairwise inner product between the three components.
    pub orthogonality: f64,
    /// Max-norm of `v_k` minus the sum of the components.
    pub reconstruction: f64,
    /// `|v_i . v_k - (1/4 + 3α/4)|`.
    pub beta_residual: f64,
}

/// `v_k = (1/4 + 3α/4) v_i - (√3/4)(1-α) v_ij + (√3/2)(v_jk - α v_ji)`
/// for a walk `i - j - k` of a strict coloring.
pub fn two_step_decomposition(vi: &[f64], vj: &[f64], vk: &[f64]) -> Result<TwoStepDecomposition> {
    let vij = v_orth(vi, vj)?;
    let vji = v_orth(vj, vi)?;
    let vjk = v_orth(vj, vk)?;
    let alpha = linalg::dot(&vji, &vjk);
    let beta = linalg::dot(vi, vk);
    let a = linalg::scaled(vi, 0.25 + 0.75 * alpha);
    let b = linalg::scaled(&vij, -ROOT3 / 4.0 * (1.0 - alpha));
    let c = linalg::scaled(&linalg::add_scaled(&vjk, -alpha, &vji), ROOT3 / 2.0);
    let sum: Vec<f64> = a.iter().zip(&b).zip(&c).map(|((x, y), z)| x + y + z).collect();
    let orthogonality = linalg::dot(&a, &b)
        .abs()
        .max(linalg::dot(&a, &c).abs())
        .max(linalg::dot(&b, &c).abs());
    Ok(TwoStepDecomposition {
        alpha,
        beta,
        reconstruction: linalg::max_abs_diff(&sum, vk),
        beta_residual: (beta - 0.25 - 0.75 * alpha).abs(),
        orthogonality,
        components: [a, b, c],
    })
}

fn check_decomposition(what: &str, residual: f64) -> Result<()> {
    if residual > DECOMP_TOL {
        return Err(Error::Decomposition {
            what: what.to_string(),
            residual,
            tol: DECOMP_TOL,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepEntry {
    pub k: usize,
    /// The `j` through which `k` was reached (lowest id).
    pub via: usize,
    pub alpha: f64,
    pub coefficient: f64,
    pub threshold: f64,
    pub orthogonality: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStepCover {
    pub center: usize,
    pub entries: Vec<TwoStepEntry>,
    /// `μ_i(S)`.
    pub delta1: f64,
    /// `min_j μ_j(S_j)`.
    pub delta2: f64,
    pub estimate: Option<Estimate>,
    /// `δ1 / 2`.
    pub target: f64,
    pub pass: bool,
}

/// Cover of `{v_ik : k ∈ ∪ S_j}` with the two-step thresholds.
pub fn two_step_cover(
    ctx: &WalkContext,
    i: usize,
    s: &[usize],
    s_sets: &BTreeMap<usize, Vec<usize>>,
) -> Result<TwoStepCover> {
    let t = ctx.t();
    let mut by_k: BTreeMap<usize, usize> = BTreeMap::new();
    for &j in s {
        if !ctx.pruned.has_edge(i, j) {
            return Err(Error::PreconditionViolated {
                what: "S must lie in the pruned neighborhood of i".into(),
                vertices: vec![j],
            });
        }
        let allowed = ctx.w_set(i, j);
        for &k in s_sets.get(&j).map_or(&[][..], Vec::as_slice) {
            if !allowed.contains(&k) {
                return Err(Error::PreconditionViolated {
                    what: format!("S_{j} must lie in W_{i}{j}"),
                    vertices: vec![k],
                });
            }
            by_k.entry(k).or_insert(j);
        }
    }
    let delta1: f64 = s.iter().map(|&j| ctx.mu(i, j)).sum();
    let delta2 = s
        .iter()
        .map(|&j| s_sets.get(&j).map_or(0.0, |sj| sj.iter().map(|&k| ctx.mu(j, k)).sum()))
        .fold(f64::INFINITY, f64::min);
    let mut entries = Vec::new();
    let mut fam = Vectors::new(ctx.strict.dim());
    for (&k, &j) in &by_k {
        let d = two_step_decomposition(ctx.v(i), ctx.v(j), ctx.v(k))?;
        check_decomposition("two-step reconstruction", d.reconstruction)?;
        check_decomposition("two-step orthogonality", d.orthogonality)?;
        let coefficient = params::two_step_coefficient(d.alpha, ctx.c);
        fam.push(&v_orth(ctx.v(i), ctx.v(k))?)?;
        entries.push(TwoStepEntry {
            k,
            via: j,
            alpha: d.alpha,
            coefficient,
            threshold: coefficient * t - ctx.slack.threshold_slack,
            orthogonality: d.orthogonality,
        });
    }
    let estimate = if entries.is_empty() {
        None
    } else {
        let th: Vec<f64> = entries.iter().map(|e| e.threshold).collect();
        Some(estimate_cover_prob_thresholds(&fam, &th, ctx.slack.samples.max(1000), ctx.slack.seed)?)
    };
    let target = delta1 / 2.0;
    Ok(TwoStepCover {
        center: i,
        pass: estimate.is_some_and(|e| e.hi >= target),
        entries,
        delta1,
        delta2: if delta2.is_finite() { delta2 } else { 0.0 },
        estimate,
        target,
    })
}

/// [`two_step_cover`] with `S = N_{G'}(i)` and `S_j = W_ij`.
pub fn two_step_cover_full(ctx: &WalkContext, i: usize) -> Result<TwoStepCover> {
    let s = ctx.pruned.neighbors(i).to_vec();
    let sets = s.iter().map(|&j| (j, ctx.w_set(i, j).to_vec())).collect();
    two_step_cover(ctx, i, &s, &sets)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractionRoute {
    /// Conditioned SoS vectors.
    Conditioned,
    /// No SoS solution available: plain KMS on the strict vectors.
    StrictFallback,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtractedSet {
    pub targets: Vec<usize>,
    /// Targets outside the conditioning window.
    pub dropped: Vec<usize>,
    pub route: ExtractionRoute,
    pub conditioning_t: f64,
    pub kappa: f64,
    pub outcome: Option<RoundingOutcome>,
    pub set: Vec<usize>,
}

impl ExtractedSet {
    fn empty(route: ExtractionRoute, conditioning_t: f64, kappa: f64) -> Self {
        ExtractedSet {
            targets: Vec::new(),
            dropped: Vec::new(),
            route,
            conditioning_t,
            kappa,
            outcome: None,
            set: Vec::new(),
        }
    }
}

fn finish_round(g: &Graph, vc: &VectorColoring, seed: u64) -> Result<(Option<RoundingOutcome>, Vec<usize>)> {
    if vc.is_empty() {
        return Ok((None, Vec::new()));
    }
    let out = rounding::kms_round(g, vc, seed)?;
    assert!(graph::is_independent_set(g, &out.returned), "extraction returned a dependent set");
    let set = out.returned.clone();
    Ok((Some(out), set))
}

fn strict_restricted(g: &Graph, strict: &StrictVector3Coloring, targets: &[usize]) -> Result<VectorColoring> {
    VectorColoring::new(g, targets.to_vec(), strict.vectors.select(targets), 3.0)
}

/// Conditions on `i` with the positive window `v_i . v_k >= 1/4 - eps` and
/// rounds the result with KMS.
fn extract_positive(
    ctx: &WalkContext,
    i: usize,
    targets: Vec<usize>,
    sos: Option<&SosSolution>,
    seed: u64,
) -> Result<ExtractedSet> {
    let tc = 0.25 - ctx.slack.eps_dot;
    let kappa = (4.0 + 8.0 * tc) / (1.0 + 8.0 * tc);
    let route = if sos.is_some() { ExtractionRoute::Conditioned } else { ExtractionRoute::StrictFallback };
    if targets.is_empty() {
        return Ok(ExtractedSet::empty(route, tc, kappa));
    }
    let (keep, dropped): (Vec<usize>, Vec<usize>) = targets
        .iter()
        .partition(|&&k| linalg::dot(ctx.v(i), ctx.v(k)) >= tc);
    let vc = match sos {
        Some(s) => vector_coloring::conditioned_coloring_positive(s, i, tc.max(1.0 / 16.0), &keep, 1e-9)?,
        None => strict_restricted(&ctx.graph, &ctx.strict, &keep)?,
    };
    let (outcome, set) = finish_round(&ctx.graph, &vc, seed)?;
    Ok(ExtractedSet {
        targets,
        dropped,
        route,
        conditioning_t: tc,
        kappa: vc.kappa,
        outcome,
        set,
    })
}

/// Union `U = ∪_j W_ij`, conditioned on `i` at `1/4 - eps` and KMS-rounded.
pub fn second_level_independent_set(
    ctx: &WalkContext,
    i: usize,
    sos: Option<&SosSolution>,
    seed: u64,
) -> Result<ExtractedSet> {
    let u: BTreeSet<usize> = ctx
        .pruned
        .neighbors(i)
        .iter()
        .flat_map(|&j| ctx.w_set(i, j).iter().copied())
        .collect();
    extract_positive(ctx, i, u.into_iter().collect(), sos, seed)
}

/// `k` good for `(i, j)`: `v_ji . v_jk ∈ [0, c/(1+c)]` and enough `μ_k` mass
/// on `{ℓ : v_kℓ . v_kj ∈ [0, c/(1+c)], |v_kℓ . v_ji| <= c/(1+c)}`, all
/// windows widened by `eps_dot`.
pub fn good_k_check(ctx: &WalkContext, i: usize, j: usize, k: usize) -> bool {
    good_k_mass(ctx, i, j, k).is_some_and(|m| m >= ctx.slack.mass_floor)
}

/// `μ_k` mass of the good-`ℓ` set, or `None` when the `α` window fails.
pub fn good_k_mass(ctx: &WalkContext, i: usize, j: usize, k: usize) -> Option<f64> {
    if !ctx.pruned.has_edge(i, j) || !ctx.pruned.has_edge(j, k) || i == k {
        return None;
    }
    let (cc, e) = (ctx.window(), ctx.slack.eps_dot);
    let vji = ctx.vij_ref(j, i);
    let alpha = linalg::dot(vji, ctx.vij_ref(j, k));
    if !(-e..=cc + e).contains(&alpha) {
        return None;
    }
    let vkj = ctx.vij_ref(k, j);
    let m = ctx
        .pruned
        .neighbors(k)
        .iter()
        .filter(|&&l| {
            let vkl = ctx.vij_ref(k, l);
            let a = linalg::dot(vkl, vkj);
            let b = linalg::dot(vkl, vji);
            (-e..=cc + e).contains(&a) && (-cc - e..=cc + e).contains(&b)
        })
        .map(|&l| ctx.mu(k, l))
        .sum();
    Some(m)
}

/// Good `k` for `(i, j)`, ascending.
pub fn good_ks(ctx: &WalkContext, i: usize, j: usize) -> Vec<usize> {
    ctx.pruned
        .neighbors(j)
        .iter()
        .copied()
        .filter(|&k| good_k_check(ctx, i, j, k))
        .collect()
}

/// `ν(i, j) = μ_i(j) Σ_{k good for (i, j)} μ_j(k)`.
pub fn score_nu(ctx: &WalkContext, i: usize, j: usize) -> f64 {
    ctx.mu(i, j) * good_ks(ctx, i, j).iter().map(|&k| ctx.mu(j, k)).sum::<f64>()
}

/// `Σ_i Σ_{j ∈ N(i)} ν(i, j)`.
pub fn nu_total_by_center(ctx: &WalkContext) -> f64 {
    ctx.vertices()
        .into_iter()
        .flat_map(|i| ctx.pruned.neighbors(i).iter().map(move |&j| (i, j)))
        .map(|(i, j)| score_nu(ctx, i, j))
        .sum()
}

/// The same sum grouped by edge `{j, k}`:
/// `Σ_j Σ_k μ_j(k) Σ_{i ∈ N(j), k good for (i, j)} μ_j(i)`.
pub fn nu_total_by_edge(ctx: &WalkContext) -> f64 {
    let mut total = 0.0;
    for j in ctx.vertices() {
        for &k in ctx.pruned.neighbors(j) {
            let inner: f64 = ctx
                .pruned
                .neighbors(j)
                .iter()
                .filter(|&&i| good_k_check(ctx, i, j, k))
                .map(|&i| ctx.mu(j, i))
                .sum();
            total += ctx.mu(j, k) * inner;
        }
    }
    total
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenterChoice {
    pub center: usize,
    /// `S = {j : ν(i, j) >= μ_i(j) mass_floor / 2}`.
    pub s: Vec<usize>,
    pub mass: f64,
    /// `mass >= mass_floor / 12.5`.
    pub clears: bool,
}

pub fn qualifying_set(ctx: &WalkContext, i: usize) -> (Vec<usize>, f64) {
    let half = ctx.slack.mass_floor / 2.0;
    let s: Vec<usize> = ctx
        .pruned
        .neighbors(i)
        .iter()
        .copied()
        .filter(|&j| score_nu(ctx, i, j) >= ctx.mu(i, j) * half)
        .collect();
    let m = s.iter().map(|&j| ctx.mu(i, j)).sum();
    (s, m)
}

/// The vertex maximizing the qualifying mass, lowest id on ties.
pub fn select_center(ctx: &WalkContext) -> Result<CenterChoice> {
    let mut best: Option<CenterChoice> = None;
    for i in ctx.vertices() {
        let (s, mass) = qualifying_set(ctx, i);
        if best.as_ref().is_none_or(|b| mass > b.mass) {
            best = Some(CenterChoice {
                center: i,
                s,
                mass,
                clears: mass >= ctx.slack.mass_floor / 12.5,
            });
        }
    }
    best.ok_or_else(|| Error::Precondition("empty walk context".into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GammaEntry {
    pub l: usize,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WEntryInfo {
    pub k: usize,
    pub via: usize,
    pub alpha: f64,
    pub beta: f64,
    pub v_ik: Vec<GammaEntry>,
    /// Cover estimate of `{v_kℓ : ℓ ∈ V_ik}` at `√3 t`.
    pub cover: Option<Estimate>,
    pub cover_clears: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdLevelSets {
    pub center: usize,
    pub s: Vec<usize>,
    pub w: Vec<WEntryInfo>,
    /// Members of `W` whose `β` left its window.
    pub beta_violations: Vec<usize>,
}

impl ThirdLevelSets {
    pub fn w_vertices(&self) -> Vec<usize> {
        self.w.iter().map(|e| e.k).collect()
    }

    /// `∪_k V_ik`, ascending.
    pub fn union_v(&self) -> Vec<usize> {
        let u: BTreeSet<usize> = self.w.iter().flat_map(|e| e.v_ik.iter().map(|g| g.l)).collect();
        u.into_iter().collect()
    }
}

/// `γ` window `[-(3√3/4) c/(1+c) - eps, (√3/2) c/(1+c) + eps]`.
pub fn gamma_window(c: f64, eps: f64) -> (f64, f64) {
    let cc = params::window(c);
    (-0.75 * ROOT3 * cc - eps, 0.5 * ROOT3 * cc + eps)
}

/// `W`, the `V_ik` and their dot-product records, plus per-`k` cover checks.
pub fn third_level_sets(ctx: &WalkContext, i: usize, s: &[usize]) -> Result<ThirdLevelSets> {
    let mut via: BTreeMap<usize, usize> = BTreeMap::new();
    for &j in s {
        for k in good_ks(ctx, i, j) {
            via.entry(k).or_insert(j);
        }
    }
    let (glo, ghi) = gamma_window(ctx.c, ctx.slack.eps_dot);
    let (e, cc) = (ctx.slack.eps_dot, ctx.window());
    let t = ctx.t();
    let mut w = Vec::new();
    let mut beta_violations = Vec::new();
    for (&k, &j) in &via {
        let alpha = linalg::dot(ctx.vij_ref(j, i), ctx.vij_ref(j, k));
        let beta = linalg::dot(ctx.v(i), ctx.v(k));
        if (beta - 0.25 - 0.75 * alpha).abs() > DECOMP_TOL || !(-e..=cc + e).contains(&alpha) {
            beta_violations.push(k);
        }
        let v_ik: Vec<GammaEntry> = ctx
            .pruned
            .neighbors(k)
            .iter()
            .map(|&l| GammaEntry {
                l,
                gamma: linalg::dot(ctx.vij_ref(k, l), ctx.v(i)),
            })
            .filter(|g| (glo..=ghi).contains(&g.gamma))
            .collect();
        let cover = if v_ik.is_empty() {
            None
        } else {
            let mut fam = Vectors::new(ctx.strict.dim());
            for g in &v_ik {
                fam.push(ctx.vij_ref(k, g.l))?;
            }
            Some(estimate_cover_prob(&fam, ROOT3 * t, ctx.slack.samples.max(1000), ctx.slack.seed)?)
        };
        w.push(WEntryInfo {
            k,
            via: j,
            alpha,
            beta,
            cover_clears: cover.is_some_and(|c| c.hi >= ctx.slack.mass_floor / 2.0),
            cover,
            v_ik,
        });
    }
    Ok(ThirdLevelSets {
        center: i,
        s: s.to_vec(),
        w,
        beta_violations,
    })
}

/// Components of `v_ℓ` along `v_i`, `v_ik` and the residual
/// `(√3/2)(v_kℓ - γ/sqrt(1-β²) v_ki)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdDecomposition {
    pub beta: f64,
    pub gamma: f64,
    pub components: [Vec<f64>; 3],
    pub orthogonality: f64,
    pub reconstruction: f64,
    /// `|v_ℓ . v_i - (-β/2 + (√3/2) γ)|`.
    pub identity_residual: f64,
    /// `|residual . v_ki|`.
    pub residual_vs_vki: f64,
    pub vl_dot_vi: f64,
}

impl ThirdDecomposition {
    /// `v_ℓ . v_i <= -1/8 + 3c/(4(1+c))` whenever `β >= 1/4` and
    /// `γ <= (√3/2) c/(1+c)`; `None` when those windows do not hold.
    pub fn upper_bound_holds(&self, c: f64) -> Option<bool> {
        let cc = params::window(c);
        if self.beta >= 0.25 && self.gamma <= 0.5 * ROOT3 * cc {
            Some(self.vl_dot_vi <= -0.125 + 0.75 * cc + 1e-12)
        } else {
            None
        }
    }
}

pub fn third_level_decomposition(
    strict: &StrictVector3Coloring,
    i: usize,
    k: usize,
    l: usize,
) -> Result<ThirdDecomposition> {
    let (vi, vk, vl) = (strict.vector(i), strict.vector(k), strict.vector(l));
    let vik = v_orth(vi, vk)?;
    let vki = v_orth(vk, vi)?;
    let vkl = v_orth(vk, vl)?;
    let beta = linalg::dot(vi, vk);
    let gamma = linalg::dot(&vkl, vi);
    let sb = (1.0 - beta * beta).sqrt();
    let a = linalg::scaled(vi, -0.5 * beta + ROOT3 / 2.0 * gamma);
    let b = linalg::scaled(&vik, -0.5 * sb - ROOT3 / 2.0 * beta / sb * gamma);
    let r = linalg::add_scaled(&vkl, -gamma / sb, &vki);
    let c = linalg::scaled(&r, ROOT3 / 2.0);
    let sum: Vec<f64> = a.iter().zip(&b).zip(&c).map(|((x, y), z)| x + y + z).collect();
    let vl_dot_vi = linalg::dot(vl, vi);
    let orthogonality = linalg::dot(&a, &b)
        .abs()
        .max(linalg::dot(&a, &c).abs())
        .max(linalg::dot(&b, &c).abs());
    let d = ThirdDecomposition {
        beta,
        gamma,
        reconstruction: linalg::max_abs_diff(&sum, vl),
        identity_residual: (vl_dot_vi - (-0.5 * beta + ROOT3 / 2.0 * gamma)).abs(),
        residual_vs_vki: linalg::dot(&r, &vki).abs(),
        orthogonality,
        vl_dot_vi,
        components: [a, b, c],
    };
    check_decomposition("three-step reconstruction", d.reconstruction)?;
    Ok(d)
}

/// Max-norm residual of
/// `v_ℓ = -v_i/8 + (√3/8) v_ij - (√3/4) v_jk + (√3/2) v_kℓ`.
pub fn three_step_expansion(strict: &StrictVector3Coloring, i: usize, j: usize, k: usize, l: usize) -> Result<f64> {
    let vi = strict.vector(i);
    let vij = v_orth(vi, strict.vector(j))?;
    let vjk = v_orth(strict.vector(j), strict.vector(k))?;
    let vkl = v_orth(strict.vector(k), strict.vector(l))?;
    let rebuilt: Vec<f64> = (0..vi.len())
        .map(|d| -vi[d] / 8.0 + ROOT3 / 8.0 * vij[d] - ROOT3 / 4.0 * vjk[d] + ROOT3 / 2.0 * vkl[d])
        .collect();
    Ok(linalg::max_abs_diff(&rebuilt, strict.vector(l)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Branch {
    /// `|W|` is large: extract from `W` with the positive conditioning.
    A,
    /// `|W|` is small: negative conditioning on `∪ V_ik`.
    B,
}

/// `Φ̄(η₀ t)^(-(1+c'))`.
pub fn w_size_threshold(eta0: f64, t: f64, c_prime: f64) -> f64 {
    gaussian::tail(eta0 * t).powf(-(1.0 + c_prime))
}

pub fn choose_branch(w_len: usize, eta0: f64, t: f64, c_prime: f64) -> Branch {
    if w_len as f64 >= w_size_threshold(eta0, t, c_prime) {
        Branch::A
    } else {
        Branch::B
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThirdLevelResult {
    pub sets: ThirdLevelSets,
    pub eta0: f64,
    pub w_threshold: f64,
    pub branch: Branch,
    /// `(5-c)/(2-2c)`.
    pub kappa_formula: f64,
    /// `|∪ V_ik| Δ^(-(1+3c)/(5-c))` for branch B.
    pub expected_size: Option<f64>,
    pub extracted: ExtractedSet,
}

impl ThirdLevelResult {
    pub fn set(&self) -> &[usize] {
        &self.extracted.set
    }
}

/// Win-win extraction on the third-level sets.
pub fn third_level_independent_set(
    ctx: &WalkContext,
    sets: ThirdLevelSets,
    c_prime: f64,
    sos: Option<&SosSolution>,
    seed: u64,
) -> Result<ThirdLevelResult> {
    if sets.w.is_empty() {
        return Err(Error::Precondition("third-level set W is empty".into()));
    }
    let c = ctx.c;
    let eta0 = params::eta0(c)?.value;
    let t = ctx.t();
    let w_threshold = w_size_threshold(eta0, t, c_prime);
    let branch = choose_branch(sets.w.len(), eta0, t, c_prime);
    let i = sets.center;
    let (extracted, expected_size) = match branch {
        Branch::A => (extract_positive(ctx, i, sets.w_vertices(), sos, seed)?, None),
        Branch::B => {
            let targets = sets.union_v();
            let tn = -0.125 + 0.75 * params::window(c) + ctx.slack.eps_dot;
            let (keep, dropped): (Vec<usize>, Vec<usize>) = targets
                .iter()
                .partition(|&&l| linalg::dot(ctx.v(i), ctx.v(l)) <= tn);
            let delta = ctx.graph.induced_max_degree(&targets).max(2) as f64;
            let expected = targets.len() as f64 * delta.powf(-(1.0 + 3.0 * c) / (5.0 - c));
            let (route, vc) = match sos {
                Some(s) => (
                    ExtractionRoute::Conditioned,
                    vector_coloring::conditioned_coloring_negative(s, i, tn.clamp(-0.5, 0.0), &keep, 1e-9)?,
                ),
                None => (ExtractionRoute::StrictFallback, strict_restricted(&ctx.graph, &ctx.strict, &keep)?),
            };
            let (outcome, set) = finish_round(&ctx.graph, &vc, seed)?;
            (
                ExtractedSet {
                    targets,
                    dropped,
                    route,
                    conditioning_t: tn,
                    kappa: vc.kappa,
                    outcome,
                    set,
                },
                Some(expected),
            )
        }
    };
    Ok(ThirdLevelResult {
        sets,
        eta0,
        w_threshold,
        branch,
        kappa_formula: params::third_level_kappa(c),
        expected_size,
        extracted,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sos::planted_simplex;

    fn unit_weights(g: &Graph, w: f64) -> EdgeWeights {
        let mut m = EdgeWeights::new();
        for (u, v) in g.edges() {
            m.set(u, v, w).unwrap();
        }
        m
    }

    #[test]
    fn prune_examples() {
        let tri = Graph::from_edges(3, &[(0, 1), (1, 2), (0, 2)]).unwrap();
        let p = prune_weighted_graph(&tri, &unit_weights(&tri, 1.0), 0.5).unwrap();
        assert_eq!(p.vertices(), vec![0, 1, 2]);
        assert_eq!(p.graph.edge_count(), 3);
        let star = Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        match prune_weighted_graph(&star, &unit_weights(&star, 1.0), 1.5) {
            Err(Error::PruneExhausted { .. }) => {}
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn simplex_has_no_good_pairs() {
        // path 0 - 1 - 2 with classes 0, 1, 0 and 0 - 1 - 3 with 3 in class 2
        let g = Graph::from_edges(4, &[(0, 1), (1, 2), (1, 3), (2, 3)]).unwrap();
        let strict = planted_simplex(&[0, 1, 0, 2]);
        let ctx = prune_with_weights(
            &g,
            &strict,
            ThresholdParams::explicit(1.0),
            0.04,
            SlackConfig::default(),
            unit_weights(&g, 0.5),
        )
        .unwrap();
        let vji_vjk = |i, j, k| linalg::dot(&ctx.vij(j, i).unwrap(), &ctx.vij(j, k).unwrap());
        assert!((vji_vjk(0, 1, 2) - 1.0).abs() < 1e-12);
        assert!((vji_vjk(0, 1, 3) + 1.0).abs() < 1e-12);
        assert!(!good_k_check(&ctx, 0, 1, 2));
        assert!(!good_k_check(&ctx, 0, 1, 3));
        assert_eq!(score_nu(&ctx, 0, 1), 0.0);
    }

    #[test]
    fn coefficient_at_zero() {
        assert!((params::two_step_coefficient(0.0, 0.0) - 9.0 / 15f64.sqrt()).abs() < 1e-15);
        assert_eq!(params::third_level_kappa(0.0), 2.5);
        let k = params::third_level_kappa(0.039_324_1);
        assert!((k - 4.960_675_9 / 1.921_351_8).abs() < 1e-12);
        assert!((k - 2.58187).abs() < 1e-5);
    }

    #[test]
    fn branch_boundary() {
        let (eta, t, cp) = (2.0, 1.0, 0.1);
        let th = w_size_threshold(eta, t, cp);
        let at = th.ceil() as usize;
        assert_eq!(choose_branch(at, eta, t, cp), Branch::A);
        assert_eq!(choose_branch(at - 1, eta, t, cp), Branch::B);
    }

    #[test]
    fn third_decomposition_trivial() {
        // β = 1/4, γ = 0 → v_ℓ . v_i = -1/8
        let b: f64 = 0.25;
        let sb = (1.0 - b * b).sqrt();
        let vi = vec![1.0, 0.0, 0.0, 0.0];
        let vk = vec![b, sb, 0.0, 0.0];
        // v_kℓ ⊥ v_k and ⊥ v_i: take e3
        let vl: Vec<f64> = (0..4).map(|d| -0.5 * vk[d] + ROOT3 / 2.0 * [0.0, 0.0, 1.0, 0.0][d]).collect();
        let strict = StrictVector3Coloring {
            vectors: Vectors::from_rows(&[vi, vk, vl]).unwrap(),
        };
        let d = third_level_decomposition(&strict, 0, 1, 2).unwrap();
        assert!(d.gamma.abs() < 1e-15);
        assert!((d.vl_dot_vi + 0.125).abs() < 1e-15);
        assert!(d.orthogonality < 1e-15);
        assert_eq!(d.upper_bound_holds(0.0), Some(true));
    }
}
