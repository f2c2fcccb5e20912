//! End-to-end coloring driver and the experiment harness.
//!
//! The driver peels independent sets one color at a time. Dense steps
//! 2-color a high-degree neighborhood; sparse steps walk the ladder
//! third level, second level, KMS', KMS and finally greedy.

use std::collections::VecDeque;
use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, ColorAssignment, Graph};
use crate::linalg::{self, Vectors};
use crate::rng;
use crate::rounding::{self, RoundingOutcome, ThresholdParams};
use crate::sos::{self, StrictVector3Coloring};
use crate::vector_coloring::VectorColoring;
use crate::walks::{self, Branch, SlackConfig, WalkContext};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProgressKind {
    LargeIs,
    SmallNbhd,
    SameColor,
    Wigderson2Color,
    Recurse,
}

/// One step of the coloring. Each class is independent in the input graph
/// and receives the next fresh color, in order, starting at `first_color`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProgressEvent {
    pub kind: ProgressKind,
    pub classes: Vec<Vec<usize>>,
    /// Center of a dense step.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor: Option<usize>,
    /// Vertex pair of a same-color merge.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair: Option<(usize, usize)>,
    pub source: String,
    pub first_color: usize,
}

impl ProgressEvent {
    pub fn colors_consumed(&self) -> usize {
        self.classes.len()
    }

    pub fn vertex_count(&self) -> usize {
        self.classes.iter().map(Vec::len).sum()
    }

    fn relabel(mut self, map: &[usize]) -> Self {
        for class in &mut self.classes {
            for v in class.iter_mut() {
                *v = map[*v];
            }
            class.sort_unstable();
        }
        self.anchor = self.anchor.map(|a| map[a]);
        self.pair = self.pair.map(|(a, b)| (map[a], map[b]));
        self
    }
}

/// Odd cycle in `N(center)`, as a vertex sequence (closing edge implied).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub center: usize,
    pub cycle: Vec<usize>,
}

impl Witness {
    /// The cycle is odd, closed, and lies in the neighborhood of the center.
    pub fn verify(&self, g: &Graph) -> bool {
        let k = self.cycle.len();
        k % 2 == 1
            && k >= 3
            && self.cycle.iter().all(|&v| g.has_edge(self.center, v))
            && (0..k).all(|a| g.has_edge(self.cycle[a], self.cycle[(a + 1) % k]))
    }
}

/// BFS 2-coloring of `g[vertices]`; an odd cycle on failure.
pub fn two_color(g: &Graph, vertices: &[usize]) -> std::result::Result<[Vec<usize>; 2], Vec<usize>> {
    let (h, map) = g.induced_subgraph(vertices);
    let mut side = vec![u8::MAX; h.n()];
    let mut parent = vec![usize::MAX; h.n()];
    for root in 0..h.n() {
        if side[root] != u8::MAX {
            continue;
        }
        side[root] = 0;
        let mut queue = VecDeque::from([root]);
        while let Some(u) = queue.pop_front() {
            for &w in h.neighbors(u) {
                if side[w] == u8::MAX {
                    side[w] = 1 - side[u];
                    parent[w] = u;
                    queue.push_back(w);
                } else if side[w] == side[u] {
                    return Err(odd_cycle(&parent, u, w).into_iter().map(|v| map[v]).collect());
                }
            }
        }
    }
    let mut out = [Vec::new(), Vec::new()];
    for (v, &s) in side.iter().enumerate() {
        out[s as usize].push(map[v]);
    }
    out[0].sort_unstable();
    out[1].sort_unstable();
    Ok(out)
}

/// Tree paths from `u` and `w` up to their common ancestor, joined by `u-w`.
fn odd_cycle(parent: &[usize], u: usize, w: usize) -> Vec<usize> {
    let path = |mut x: usize| {
        let mut p = vec![x];
        while parent[x] != usize::MAX {
            x = parent[x];
            p.push(x);
        }
        p
    };
    let (pu, pw) = (path(u), path(w));
    let lca = *pu.iter().find(|x| pw.contains(x)).expect("same BFS tree");
    let mut cycle: Vec<usize> = pu.iter().copied().take_while(|&x| x != lca).collect();
    cycle.push(lca);
    let tail: Vec<usize> = pw.iter().copied().take_while(|&x| x != lca).collect();
    cycle.extend(tail.into_iter().rev());
    cycle
}

/// If some vertex has degree at least `threshold`, 2-colors the neighborhood
/// of the lowest such vertex of maximum degree.
pub fn wigderson_dense_step(g: &Graph, threshold: f64) -> Result<Option<ProgressEvent>> {
    let Some(center) = (0..g.n())
        .filter(|&v| g.degree(v) as f64 >= threshold && g.degree(v) > 0)
        .max_by(|&a, &b| g.degree(a).cmp(&g.degree(b)).then(b.cmp(&a)))
    else {
        return Ok(None);
    };
    match two_color(g, g.neighbors(center)) {
        Ok(sides) => Ok(Some(ProgressEvent {
            kind: ProgressKind::Wigderson2Color,
            classes: sides.into_iter().filter(|s| !s.is_empty()).collect(),
            anchor: Some(center),
            pair: None,
            source: "wigderson".into(),
            first_color: 0,
        })),
        Err(cycle) => Err(Error::NotThreeColorable { center, witness: cycle }),
    }
}

/// `n^((3+3c)/(5+3c))`.
pub fn default_degree_threshold(n: usize, c: f64) -> f64 {
    (n as f64).powf((3.0 + 3.0 * c) / (5.0 + 3.0 * c))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ThresholdPolicy {
    /// KMS threshold from the coloring's kappa.
    Kappa,
    /// c-inefficient threshold `tail(t) = Δ^(-1/(3(1+c)))`.
    Inefficient,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum VectorSource {
    /// Exact simplex embedding of the planted coloring.
    Planted,
    /// Low-rank penalty solver at kappa 3.
    Lowrank { dim: usize, tol: f64, max_sweeps: usize },
}

impl Default for VectorSource {
    fn default() -> Self {
        VectorSource::Lowrank {
            dim: 3,
            tol: 1e-9,
            max_sweeps: 400,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ColorConfig {
    pub c: f64,
    pub c_prime: f64,
    pub t_policy: ThresholdPolicy,
    /// Dense-step degree threshold; `n^((3+3c)/(5+3c))` of the remaining
    /// graph when unset.
    pub degree_threshold: Option<f64>,
    pub slack: SlackConfig,
    /// Rounding draws per rung; the largest set wins.
    pub draws: usize,
    /// The walk rungs run only on remainders of at most this many vertices.
    pub walk_max_n: usize,
    pub seed: u64,
}

impl Default for ColorConfig {
    fn default() -> Self {
        ColorConfig {
            c: 0.039_324_1,
            c_prime: 0.025_818_7,
            t_policy: ThresholdPolicy::Inefficient,
            degree_threshold: None,
            slack: SlackConfig::default(),
            draws: 8,
            walk_max_n: 150,
            seed: 0,
        }
    }
}

impl ColorConfig {
    pub fn validate(&self) -> Result<()> {
        self.slack.validate()?;
        if !(0.0..1.0).contains(&self.c) || !(self.c_prime >= 0.0) {
            return Err(Error::InvalidInput(format!("c = {}, c' = {}", self.c, self.c_prime)));
        }
        if self.draws == 0 {
            return Err(Error::InvalidInput("draws must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub round: usize,
    pub rung: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColoringRun {
    pub assignment: ColorAssignment,
    pub events: Vec<ProgressEvent>,
    pub diagnostics: Vec<Diagnostic>,
    pub witnesses: Vec<Witness>,
    pub vector_report: Option<sos::SdpReport>,
}

impl ColoringRun {
    pub fn num_colors(&self) -> usize {
        self.assignment.num_colors()
    }

    /// Events counted by source.
    pub fn source_counts(&self) -> Vec<(String, usize)> {
        let mut m: std::collections::BTreeMap<String, usize> = Default::default();
        for e in &self.events {
            *m.entry(e.source.clone()).or_default() += 1;
        }
        m.into_iter().collect()
    }
}

/// Applies the log to an uncolored graph of `n` vertices.
pub fn replay(n: usize, events: &[ProgressEvent]) -> Result<ColorAssignment> {
    let mut out = ColorAssignment::new(n);
    let mut next = 0;
    for e in events {
        if e.first_color != next {
            return Err(Error::InvalidInput(format!(
                "event expects first color {} but {next} is next",
                e.first_color
            )));
        }
        for class in &e.classes {
            for &v in class {
                if v >= n || out.get(v).is_some() {
                    return Err(Error::InvalidInput(format!("vertex {v} recolored or out of range")));
                }
                out.assign(v, next);
            }
            next += 1;
        }
    }
    Ok(out)
}

/// Solves for vectors and colors `g`.
pub fn color_graph(g: &Graph, cfg: &ColorConfig) -> Result<ColoringRun> {
    cfg.validate()?;
    if g.edge_count() == 0 {
        return color_graph_with(g, None, cfg);
    }
    let VectorSource::Lowrank { dim, tol, max_sweeps } = VectorSource::default() else {
        unreachable!()
    };
    let sol = sos::solve_vector_coloring_lowrank(g, 3.0, dim, tol, max_sweeps, rng::child_seed(cfg.seed, 11))?;
    let mut run = color_graph_with(g, Some(&sol.vectors), cfg)?;
    run.vector_report = Some(sol.report);
    Ok(run)
}

struct Driver<'a> {
    g: &'a Graph,
    cfg: &'a ColorConfig,
    vectors: Option<&'a Vectors>,
    run: ColoringRun,
    next_color: usize,
    round: usize,
}

impl Driver<'_> {
    fn diag(&mut self, rung: &str, message: impl Into<String>) {
        self.run.diagnostics.push(Diagnostic {
            round: self.round,
            rung: rung.into(),
            message: message.into(),
        });
    }

    fn emit(&mut self, mut e: ProgressEvent) {
        let before = self.run.assignment.colored_count();
        e.first_color = self.next_color;
        for class in &e.classes {
            assert!(graph::is_independent_set(self.g, class), "event class is not independent");
            for &v in class {
                assert!(self.run.assignment.get(v).is_none(), "vertex {v} colored twice");
                self.run.assignment.assign(v, self.next_color);
            }
            self.next_color += 1;
        }
        assert!(self.run.assignment.colored_count() > before, "event made no progress");
        self.run.events.push(e);
    }

    fn large_is(&mut self, set: Vec<usize>, source: &str) {
        self.emit(ProgressEvent {
            kind: ProgressKind::LargeIs,
            classes: vec![set],
            anchor: None,
            pair: None,
            source: source.into(),
            first_color: 0,
        });
    }

    /// Greedy classes of `g[vertices]`, one event per class.
    fn greedy(&mut self, vertices: &[usize], source: &str) {
        let (h, map) = self.g.induced_subgraph(vertices);
        let a = graph::greedy_coloring(&h);
        for c in 0..a.num_colors() {
            let class: Vec<usize> = (0..h.n()).filter(|&v| a.get(v) == Some(c)).map(|v| map[v]).collect();
            if !class.is_empty() {
                self.large_is(class, source);
            }
        }
    }

    fn remaining(&self) -> Vec<usize> {
        (0..self.g.n()).filter(|&v| self.run.assignment.get(v).is_none()).collect()
    }

    fn step(&mut self, rest: &[usize]) -> Result<()> {
        let (h, map) = self.g.induced_subgraph(rest);
        if h.edge_count() == 0 {
            self.large_is(rest.to_vec(), "edgeless");
            return Ok(());
        }
        let threshold = self
            .cfg
            .degree_threshold
            .unwrap_or_else(|| default_degree_threshold(h.n(), self.cfg.c));
        match wigderson_dense_step(&h, threshold) {
            Ok(Some(e)) => {
                self.emit(e.relabel(&map));
                return Ok(());
            }
            Ok(None) => {}
            Err(Error::NotThreeColorable { center, witness }) => {
                let w = Witness {
                    center: map[center],
                    cycle: witness.iter().map(|&v| map[v]).collect(),
                };
                self.diag("wigderson", format!("odd cycle {:?} around {}", w.cycle, w.center));
                self.run.witnesses.push(w);
                let nbrs: Vec<usize> = h.neighbors(center).iter().map(|&v| map[v]).collect();
                self.greedy(&nbrs, "greedy-witness");
                return Ok(());
            }
            Err(e) => return Err(e),
        }
        match self.ladder(&h) {
            Some((set, source)) => {
                let set = set.into_iter().map(|v| map[v]).collect();
                self.large_is(set, &source);
            }
            None => {
                self.diag("greedy", "every rounding rung came back empty");
                self.greedy(rest, "greedy");
            }
        }
        Ok(())
    }

    /// Tries the rungs in order on the relabelled remainder `h`; returns the
    /// first nonempty set (local ids) and its source tag.
    fn ladder(&mut self, h: &Graph) -> Option<(Vec<usize>, String)> {
        let rest = self.remaining();
        let vectors = self.vectors?.select(&rest);
        let worst = h
            .edges()
            .map(|(u, v)| linalg::dot(vectors.row(u), vectors.row(v)))
            .fold(f64::NEG_INFINITY, f64::max);
        if worst >= 0.0 {
            self.diag("vectors", format!("edge inner product {worst} >= 0: no vector coloring"));
            return None;
        }
        let kappa = if worst <= -0.5 + 1e-9 { 3.0 } else { (1.0 - 1.0 / worst).max(2.0) };
        let strict = (worst - -0.5).abs() < 1e-6
            && h.edges()
                .all(|(u, v)| (linalg::dot(vectors.row(u), vectors.row(v)) + 0.5).abs() < 1e-6);
        let vc = match VectorColoring::new(h, (0..h.n()).collect(), vectors.clone(), kappa) {
            Ok(vc) => vc,
            Err(e) => {
                self.diag("vectors", e.to_string());
                return None;
            }
        };
        let delta = h.max_degree().max(2) as f64;
        let seed = rng::child_seed(self.cfg.seed, 1000 + self.round as u64);

        if strict && h.n() <= self.cfg.walk_max_n {
            match self.walk_rungs(h, StrictVector3Coloring { vectors }, delta, seed) {
                Ok(Some(found)) => return Some(found),
                Ok(None) => {}
                Err(e) => self.diag("walks", e.to_string()),
            }
        } else if !strict {
            self.diag("walks", "vectors are not a strict 3-coloring");
        }

        let threshold = match self.threshold(kappa, delta) {
            Ok(t) => t,
            Err(e) => {
                self.diag("kms-prime", e.to_string());
                rounding::kms_threshold(kappa, delta).ok()?
            }
        };
        let best = |f: &dyn Fn(u64) -> Result<RoundingOutcome>| -> Result<Vec<usize>> {
            let mut best = Vec::new();
            for d in 0..self.cfg.draws {
                let out = f(rng::child_seed(seed, d as u64))?;
                if out.returned.len() > best.len() {
                    best = out.returned;
                }
            }
            Ok(best)
        };
        match best(&|s| rounding::kms_prime_round(h, &vc, &threshold, s)) {
            Ok(set) if !set.is_empty() => return Some((set, "kms-prime".into())),
            Ok(_) => self.diag("kms-prime", "empty"),
            Err(e) => self.diag("kms-prime", e.to_string()),
        }
        match best(&|s| rounding::kms_round(h, &vc, s)) {
            Ok(set) if !set.is_empty() => return Some((set, "kms".into())),
            Ok(_) => self.diag("kms", "empty"),
            Err(e) => self.diag("kms", e.to_string()),
        }
        None
    }

    fn threshold(&self, kappa: f64, delta: f64) -> Result<ThresholdParams> {
        match self.cfg.t_policy {
            ThresholdPolicy::Kappa => rounding::kms_threshold(kappa, delta),
            ThresholdPolicy::Inefficient => rounding::inefficient_threshold(self.cfg.c, delta),
        }
    }

    fn walk_rungs(
        &mut self,
        h: &Graph,
        strict: StrictVector3Coloring,
        delta: f64,
        seed: u64,
    ) -> Result<Option<(Vec<usize>, String)>> {
        let th = rounding::inefficient_threshold(self.cfg.c, delta)?;
        let slack = SlackConfig { seed, ..self.cfg.slack };
        let ctx = walks::second_level_prune(h, &strict, th, self.cfg.c, slack)?;
        let walk = run_walks(&ctx, self.cfg.c_prime, seed)?;
        for (rung, msg) in &walk.notes {
            self.diag(rung, msg.clone());
        }
        if let Some((set, tag)) = walk.level3.filter(|(s, _)| !s.is_empty()) {
            return Ok(Some((set, tag)));
        }
        Ok(walk.level2.filter(|s| !s.is_empty()).map(|s| (s, "level2".to_string())))
    }
}

/// Sets extracted by the two walk levels from one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkSets {
    pub center: usize,
    pub branch: Option<Branch>,
    pub level2: Option<Vec<usize>>,
    /// Set and its source tag (`level3-a` or `level3-b`).
    pub level3: Option<(Vec<usize>, String)>,
    pub notes: Vec<(String, String)>,
}

/// Center selection, then third level and second level on that center.
pub fn run_walks(ctx: &WalkContext, c_prime: f64, seed: u64) -> Result<WalkSets> {
    let center = walks::select_center(ctx)?;
    let mut notes = Vec::new();
    let mut out = WalkSets {
        center: center.center,
        branch: None,
        level2: None,
        level3: None,
        notes: Vec::new(),
    };
    let sets = walks::third_level_sets(ctx, center.center, &center.s)?;
    if sets.w.is_empty() {
        notes.push(("level3".into(), "W is empty".into()));
    } else {
        let res = walks::third_level_independent_set(ctx, sets, c_prime, None, seed)?;
        out.branch = Some(res.branch);
        let tag = match res.branch {
            Branch::A => "level3-a",
            Branch::B => "level3-b",
        };
        out.level3 = Some((res.extracted.set, tag.into()));
    }
    match walks::second_level_independent_set(ctx, center.center, None, seed) {
        Ok(e) => out.level2 = Some(e.set),
        Err(e) => notes.push(("level2".into(), e.to_string())),
    }
    out.notes = notes;
    Ok(out)
}

/// Colors `g` with the given vectors (`None` skips every vector rung).
pub fn color_graph_with(g: &Graph, vectors: Option<&Vectors>, cfg: &ColorConfig) -> Result<ColoringRun> {
    cfg.validate()?;
    if let Some(v) = vectors {
        if v.len() != g.n() {
            return Err(Error::InvalidInput(format!("{} vectors for {} vertices", v.len(), g.n())));
        }
    }
    let mut d = Driver {
        g,
        cfg,
        vectors,
        run: ColoringRun {
            assignment: ColorAssignment::new(g.n()),
            events: Vec::new(),
            diagnostics: Vec::new(),
            witnesses: Vec::new(),
            vector_report: None,
        },
        next_color: 0,
        round: 0,
    };
    loop {
        let rest = d.remaining();
        if rest.is_empty() {
            break;
        }
        d.step(&rest)?;
        d.round += 1;
    }
    if let Some((u, v)) = d.run.assignment.conflict(g) {
        return Err(Error::ImproperColoring(u, v));
    }
    Ok(d.run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub n: usize,
    /// Target expected degrees; one instance per degree and seed.
    pub degrees: Vec<f64>,
    pub class_weights: [f64; 3],
    pub seeds: Vec<u64>,
    pub vectors: VectorSource,
    pub color: ColorConfig,
    /// Record wall-clock columns (breaks byte-for-byte reproducibility).
    pub timings: bool,
    pub dry_run: bool,
    pub output: Option<String>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 300,
            degrees: vec![20.0],
            class_weights: [1.0 / 3.0; 3],
            seeds: vec![0],
            vectors: VectorSource::Planted,
            color: ColorConfig::default(),
            timings: false,
            dry_run: false,
            output: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::InvalidInput("seeds must be nonempty".into()));
        }
        if self.degrees.is_empty() {
            return Err(Error::InvalidInput("degrees must be nonempty".into()));
        }
        self.color.validate()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRow {
    pub seed: u64,
    pub n: usize,
    pub m: usize,
    pub degree: f64,
    pub delta: usize,
    pub t: f64,
    pub branch: String,
    pub is_kms: f64,
    pub is_kms_prime: f64,
    pub is_level2: Option<usize>,
    pub is_level3: Option<usize>,
    pub ms_vectors: Option<f64>,
    pub ms_kms: Option<f64>,
    pub ms_kms_prime: Option<f64>,
    pub ms_walks: Option<f64>,
}

pub const EXPERIMENT_HEADER: &str = "seed,n,m,degree,delta,t,branch,is_kms,is_kms_prime,is_level2,is_level3";
const TIMING_HEADER: &str = ",ms_vectors,ms_kms,ms_kms_prime,ms_walks";

fn opt<T: std::fmt::Display>(x: Option<T>) -> String {
    x.map_or(String::new(), |v| v.to_string())
}

impl ExperimentRow {
    pub fn csv(&self, timings: bool) -> String {
        let mut s = format!(
            "{},{},{},{},{},{:.6},{},{:.4},{:.4},{},{}",
            self.seed,
            self.n,
            self.m,
            self.degree,
            self.delta,
            self.t,
            self.branch,
            self.is_kms,
            self.is_kms_prime,
            opt(self.is_level2),
            opt(self.is_level3)
        );
        if timings {
            let ms = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.3}"));
            let _ = write!(
                s,
                ",{},{},{},{}",
                ms(self.ms_vectors),
                ms(self.ms_kms),
                ms(self.ms_kms_prime),
                ms(self.ms_walks)
            );
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentOutput {
    pub timings: bool,
    pub rows: Vec<ExperimentRow>,
}

impl ExperimentOutput {
    pub fn header(&self) -> String {
        if self.timings {
            format!("{EXPERIMENT_HEADER}{TIMING_HEADER}")
        } else {
            EXPERIMENT_HEADER.to_string()
        }
    }

    pub fn to_csv(&self) -> String {
        let mut s = self.header();
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.csv(self.timings));
            s.push('\n');
        }
        s
    }

    /// Least-squares slope of `ln mean is_kms` against `ln mean Δ`, grouped
    /// by target degree. `None` with fewer than two usable groups.
    pub fn kms_slope(&self) -> Option<f64> {
        let mut groups: Vec<(f64, Vec<&ExperimentRow>)> = Vec::new();
        for r in &self.rows {
            match groups.iter_mut().find(|(d, _)| *d == r.degree) {
                Some((_, g)) => g.push(r),
                None => groups.push((r.degree, vec![r])),
            }
        }
        let pts: Vec<(f64, f64)> = groups
            .iter()
            .filter_map(|(_, g)| {
                let k = g.len() as f64;
                let is = g.iter().map(|r| r.is_kms).sum::<f64>() / k;
                let delta = g.iter().map(|r| r.delta as f64).sum::<f64>() / k;
                (is > 0.0).then(|| (delta.ln(), is.ln()))
            })
            .collect();
        regression_slope(&pts)
    }
}

/// Ordinary least-squares slope.
pub fn regression_slope(pts: &[(f64, f64)]) -> Option<f64> {
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn mean_size(g: &Graph, draws: usize, seed: u64, f: impl Fn(u64) -> Result<RoundingOutcome>) -> Result<f64> {
    let mut total = 0usize;
    for d in 0..draws {
        let out = f(rng::child_seed(seed, d as u64))?;
        assert!(graph::is_independent_set(g, &out.returned));
        total += out.returned.len();
    }
    Ok(total as f64 / draws as f64)
}

/// One row per (degree, seed); deterministic given the config unless
/// `timings` is set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut out = ExperimentOutput {
        timings: cfg.timings,
        rows: Vec::new(),
    };
    if cfg.dry_run {
        return Ok(out);
    }
    let cc = &cfg.color;
    let ms = |t: Instant| cfg.timings.then(|| t.elapsed().as_secs_f64() * 1e3);
    for &degree in &cfg.degrees {
        for &seed in &cfg.seeds {
            let p = graph::edge_prob_for_degree(cfg.n, degree);
            let inst = graph::generate_planted(cfg.n, cfg.class_weights, p, seed)?;
            let g = &inst.graph;
            let clock = Instant::now();
            let vectors = match cfg.vectors {
                VectorSource::Planted => sos::planted_simplex(&inst.planted).vectors,
                VectorSource::Lowrank { dim, tol, max_sweeps } => {
                    sos::solve_vector_coloring_lowrank(g, 3.0, dim, tol, max_sweeps, rng::child_seed(seed, 11))?
                        .vectors
                }
            };
            let ms_vectors = ms(clock);
            let vc = VectorColoring::new(g, (0..g.n()).collect(), vectors.clone(), 3.0)?;
            let delta = g.max_degree();
            let d = delta.max(2) as f64;
            let th = match cc.t_policy {
                ThresholdPolicy::Kappa => rounding::kms_threshold(3.0, d)?,
                ThresholdPolicy::Inefficient => rounding::inefficient_threshold(cc.c, d)?,
            };
            let base = rng::child_seed(seed, 21);
            let clock = Instant::now();
            let is_kms = mean_size(g, cc.draws, base, |s| rounding::kms_round(g, &vc, s))?;
            let ms_kms = ms(clock);
            let clock = Instant::now();
            let is_kms_prime = mean_size(g, cc.draws, base, |s| rounding::kms_prime_round(g, &vc, &th, s))?;
            let ms_kms_prime = ms(clock);

            let clock = Instant::now();
            let strict = StrictVector3Coloring { vectors };
            let (branch, is_level2, is_level3) = if cfg.n > cc.walk_max_n {
                ("skipped".to_string(), None, None)
            } else if strict.edge_residual(g) > 1e-6 {
                ("not-strict".to_string(), None, None)
            } else {
                let slack = SlackConfig { seed: base, ..cc.slack };
                match walks::second_level_prune(g, &strict, th, cc.c, slack) {
                    Ok(ctx) => {
                        let w = run_walks(&ctx, cc.c_prime, base)?;
                        let tag = match w.branch {
                            Some(Branch::A) => "A",
                            Some(Branch::B) => "B",
                            None => "empty-w",
                        };
                        (tag.to_string(), w.level2.map(|s| s.len()), w.level3.map(|s| s.0.len()))
                    }
                    Err(Error::Precondition(_)) => ("kms-prime-succeeds".to_string(), None, None),
                    Err(Error::PruneExhausted { stage }) => (format!("exhausted-{stage}"), None, None),
                    Err(e) => return Err(e),
                }
            };
            let ms_walks = ms(clock);
            out.rows.push(ExperimentRow {
                seed,
                n: cfg.n,
                m: g.edge_count(),
                degree,
                delta,
                t: th.t,
                branch,
                is_kms,
                is_kms_prime,
                is_level2,
                is_level3,
                ms_vectors,
                ms_kms,
                ms_kms_prime,
                ms_walks,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_leaves_share_a_color() {
        let g = Graph::from_edges(6, &[(0, 1), (0, 2), (0, 3), (0, 4), (0, 5)]).unwrap();
        let e = wigderson_dense_step(&g, 3.0).unwrap().unwrap();
        assert_eq!(e.anchor, Some(0));
        assert_eq!(e.classes, vec![vec![1, 2, 3, 4, 5]]);
    }

    #[test]
    fn triangle_in_neighborhood_is_a_witness() {
        let g = Graph::from_edges(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (2, 3), (1, 3)]).unwrap();
        match wigderson_dense_step(&g, 3.0) {
            Err(Error::NotThreeColorable { center, witness }) => {
                let w = Witness { center, cycle: witness };
                assert!(w.verify(&g), "{w:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn empty_graph_uses_no_colors() {
        let run = color_graph(&Graph::empty(0), &ColorConfig::default()).unwrap();
        assert_eq!(run.num_colors(), 0);
        let run = color_graph(&Graph::empty(4), &ColorConfig::default()).unwrap();
        assert_eq!(run.num_colors(), 1);
    }

    #[test]
    fn dry_run_is_header_only() {
        let cfg = ExperimentConfig {
            dry_run: true,
            ..Default::default()
        };
        assert_eq!(run_experiment(&cfg).unwrap().to_csv(), format!("{EXPERIMENT_HEADER}\n"));
    }
}
