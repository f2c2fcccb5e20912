//! Undirected simple graphs, planted 3-colorable instances and the small
//! combinatorial helpers the rounding and walk code lean on.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// One of the three planted colors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Color {
    R = 0,
    G = 1,
    B = 2,
}

impl Color {
    pub const ALL: [Color; 3] = [Color::R, Color::G, Color::B];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Result<Color> {
        match i {
            0 => Ok(Color::R),
            1 => Ok(Color::G),
            2 => Ok(Color::B),
            _ => Err(Error::InvalidInput(format!("color index {i} not in 0..3"))),
        }
    }
}

/// Immutable undirected simple graph on vertices `0..n`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Graph {
    n: usize,
    adjacency: Vec<Vec<usize>>,
    edge_count: usize,
}

impl Graph {
    pub fn empty(n: usize) -> Self {
        Graph {
            n,
            adjacency: vec![Vec::new(); n],
            edge_count: 0,
        }
    }

    /// Builds a graph from an edge list. Self-loops and out-of-range endpoints
    /// are rejected; repeated edges collapse into one.
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Result<Self> {
        let mut adjacency = vec![Vec::new(); n];
        for &(u, v) in edges {
            for w in [u, v] {
                if w >= n {
                    return Err(Error::VertexOutOfRange { vertex: w, n });
                }
            }
            if u == v {
                return Err(Error::InvalidInput(format!("self-loop at {u}")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        let mut twice = 0;
        for list in &mut adjacency {
            list.sort_unstable();
            list.dedup();
            twice += list.len();
        }
        Ok(Graph {
            n,
            adjacency,
            edge_count: twice / 2,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn max_degree(&self) -> usize {
        self.adjacency.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        u < self.n && self.adjacency[u].binary_search(&v).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, list)| list.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    pub fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n })
        }
    }

    /// Edges with both endpoints in `subset` (which need not be sorted).
    pub fn induced_edges(&self, subset: &[usize]) -> Vec<(usize, usize)> {
        let mut member = vec![false; self.n];
        for &v in subset {
            member[v] = true;
        }
        let mut out = Vec::new();
        for &u in subset {
            for &v in &self.adjacency[u] {
                if u < v && member[v] {
                    out.push((u, v));
                }
            }
        }
        out.sort_unstable();
        out.dedup();
        out
    }

    /// Induced subgraph on `vertices` (relabelled `0..k` in the given order)
    /// together with the map back to original ids.
    pub fn induced_subgraph(&self, vertices: &[usize]) -> (Graph, Vec<usize>) {
        let mut local = vec![usize::MAX; self.n];
        for (k, &v) in vertices.iter().enumerate() {
            local[v] = k;
        }
        let mut adjacency = vec![Vec::new(); vertices.len()];
        let mut twice = 0;
        for (k, &v) in vertices.iter().enumerate() {
            for &w in &self.adjacency[v] {
                if local[w] != usize::MAX {
                    adjacency[k].push(local[w]);
                }
            }
            adjacency[k].sort_unstable();
            twice += adjacency[k].len();
        }
        (
            Graph {
                n: vertices.len(),
                adjacency,
                edge_count: twice / 2,
            },
            vertices.to_vec(),
        )
    }

    /// Max degree inside the subgraph induced by `subset`.
    pub fn induced_max_degree(&self, subset: &[usize]) -> usize {
        let mut member = vec![false; self.n];
        for &v in subset {
            member[v] = true;
        }
        subset
            .iter()
            .map(|&u| self.adjacency[u].iter().filter(|&&v| member[v]).count())
            .max()
            .unwrap_or(0)
    }

    /// Reads the `p n m` / `e i j` / `c i col` text format. Returns the graph
    /// and the planted coloring when every vertex carries a `c` line.
    pub fn read_text<R: BufRead>(reader: R) -> Result<(Graph, Option<Vec<u8>>)> {
        let mut header: Option<(usize, usize)> = None;
        let mut edges = Vec::new();
        let mut colors: Vec<Option<u8>> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line_no = lineno + 1;
            let parse_err = |msg: &str| Error::Parse {
                line: line_no,
                msg: msg.to_string(),
            };
            let mut it = line.split_whitespace();
            let Some(tag) = it.next() else { continue };
            let mut num = |what: &str| -> Result<usize> {
                it.next()
                    .ok_or_else(|| parse_err(&format!("missing {what}")))?
                    .parse::<usize>()
                    .map_err(|e| parse_err(&format!("bad {what}: {e}")))
            };
            match tag {
                "p" => {
                    if header.is_some() {
                        return Err(parse_err("duplicate header"));
                    }
                    let n = num("vertex count")?;
                    let m = num("edge count")?;
                    header = Some((n, m));
                    colors = vec![None; n];
                }
                "e" => {
                    if header.is_none() {
                        return Err(parse_err("edge before header"));
                    }
                    edges.push((num("endpoint")?, num("endpoint")?));
                }
                "c" => {
                    let Some((n, _)) = header else {
                        return Err(parse_err("color before header"));
                    };
                    let v = num("vertex")?;
                    let c = num("color")?;
                    if v >= n || c > 2 {
                        return Err(parse_err("color line out of range"));
                    }
                    colors[v] = Some(c as u8);
                }
                _ if tag.starts_with('#') => {}
                _ => return Err(parse_err(&format!("unknown tag '{tag}'"))),
            }
        }
        let (n, m) = header.ok_or(Error::Parse {
            line: 0,
            msg: "missing 'p' header".into(),
        })?;
        let g = Graph::from_edges(n, &edges)?;
        if g.edge_count() != m {
            return Err(Error::Parse {
                line: 1,
                msg: format!("header declares {m} edges, found {}", g.edge_count()),
            });
        }
        let planted = if n > 0 && colors.iter().all(Option::is_some) {
            Some(colors.into_iter().map(Option::unwrap).collect())
        } else {
            None
        };
        Ok((g, planted))
    }

    pub fn to_text(&self, planted: Option<&[u8]>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "p {} {}", self.n, self.edge_count);
        for (u, v) in self.edges() {
            let _ = writeln!(s, "e {u} {v}");
        }
        if let Some(colors) = planted {
            for (v, c) in colors.iter().enumerate() {
                let _ = writeln!(s, "c {v} {c}");
            }
        }
        s
    }
}

/// Parameters of the cross-class Erdős–Rényi planted model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedModel {
    pub n: usize,
    pub class_weights: [f64; 3],
    pub edge_prob: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PlantedInstance {
    pub graph: Graph,
    /// Planted color index (0, 1, 2) per vertex.
    pub planted: Vec<u8>,
    pub seed: u64,
    pub model: PlantedModel,
}

impl PlantedInstance {
    pub fn class(&self, c: u8) -> Vec<usize> {
        (0..self.graph.n()).filter(|&v| self.planted[v] == c).collect()
    }
}

/// Edge probability giving expected degree `d` in a balanced planted model.
pub fn edge_prob_for_degree(n: usize, d: f64) -> f64 {
    let cross = n as f64 - n as f64 / 3.0;
    (d / cross).clamp(0.0, 1.0)
}

/// Class sizes from weights by largest remainder.
fn class_sizes(n: usize, w: [f64; 3]) -> [usize; 3] {
    let raw: Vec<f64> = w.iter().map(|x| x * n as f64).collect();
    let mut sizes = [0usize; 3];
    for k in 0..3 {
        sizes[k] = raw[k].floor() as usize;
    }
    let mut rest = n - sizes.iter().sum::<usize>();
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    for &k in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        sizes[k] += 1;
        rest -= 1;
    }
    sizes
}

pub fn generate_planted(
    n: usize,
    class_weights: [f64; 3],
    edge_prob: f64,
    seed: u64,
) -> Result<PlantedInstance> {
    if n < 3 {
        return Err(Error::InvalidInput(format!("n = {n} < 3")));
    }
    if class_weights.iter().any(|w| !(0.0..=1.0).contains(w))
        || (class_weights.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        return Err(Error::InvalidInput(format!(
            "class weights {class_weights:?} must be nonnegative and sum to 1"
        )));
    }
    if !(0.0..=1.0).contains(&edge_prob) {
        return Err(Error::InvalidInput(format!("edge_prob {edge_prob} not in [0,1]")));
    }
    let sizes = class_sizes(n, class_weights);
    if edge_prob > 0.0 && sizes.contains(&0) {
        return Err(Error::InvalidInput(format!(
            "class sizes {sizes:?} leave a class empty"
        )));
    }
    let mut r = rng::stream(seed, 0);
    let mut labels: Vec<u8> = Vec::with_capacity(n);
    for (c, &s) in sizes.iter().enumerate() {
        labels.extend(std::iter::repeat_n(c as u8, s));
    }
    labels.shuffle(&mut r);
    let mut edges = Vec::new();
    if edge_prob > 0.0 {
        for u in 0..n {
            for v in (u + 1)..n {
                if labels[u] != labels[v] && r.random::<f64>() < edge_prob {
                    edges.push((u, v));
                }
            }
        }
    }
    Ok(PlantedInstance {
        graph: Graph::from_edges(n, &edges)?,
        planted: labels,
        seed,
        model: PlantedModel {
            n,
            class_weights,
            edge_prob,
        },
    })
}

/// `N^(level)(i)`: the neighborhood operator applied `level` times
/// (not the distance-`level` shell).
pub fn neighborhood(g: &Graph, i: usize, level: usize) -> Result<Vec<usize>> {
    g.check_vertex(i)?;
    if level == 0 {
        return Err(Error::InvalidInput("neighborhood level must be >= 1".into()));
    }
    let mut current: BTreeSet<usize> = [i].into_iter().collect();
    for _ in 0..level {
        current = neighborhood_of_set(g, &current);
    }
    Ok(current.into_iter().collect())
}

pub fn neighborhood_of_set(g: &Graph, set: &BTreeSet<usize>) -> BTreeSet<usize> {
    set.iter()
        .flat_map(|&v| g.neighbors(v).iter().copied())
        .collect()
}

/// Greedy maximal matching of the subgraph induced by `subset`, scanning the
/// induced edges in a seed-shuffled order.
pub fn maximal_matching(g: &Graph, subset: &[usize], seed: u64) -> Vec<(usize, usize)> {
    let mut edges = g.induced_edges(subset);
    let mut r = rng::stream(seed, 0);
    edges.shuffle(&mut r);
    greedy_matching(g.n(), &edges)
}

pub(crate) fn greedy_matching(n: usize, edges: &[(usize, usize)]) -> Vec<(usize, usize)> {
    let mut used = vec![false; n];
    let mut m = Vec::new();
    for &(u, v) in edges {
        if !used[u] && !used[v] {
            used[u] = true;
            used[v] = true;
            m.push((u, v));
        }
    }
    m
}

pub fn is_matching(m: &[(usize, usize)]) -> bool {
    let mut seen = BTreeSet::new();
    m.iter().all(|&(u, v)| seen.insert(u) && seen.insert(v))
}

/// Every induced edge of `subset` touches a matched vertex.
pub fn is_maximal_matching(g: &Graph, subset: &[usize], m: &[(usize, usize)]) -> bool {
    let matched: BTreeSet<usize> = m.iter().flat_map(|&(u, v)| [u, v]).collect();
    is_matching(m)
        && m.iter().all(|&(u, v)| g.has_edge(u, v))
        && g.induced_edges(subset)
            .iter()
            .all(|(u, v)| matched.contains(u) || matched.contains(v))
}

pub fn is_independent_set(g: &Graph, set: &[usize]) -> bool {
    g.induced_edges(set).is_empty()
}

/// Partial proper coloring with an unbounded palette.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorAssignment {
    assignment: Vec<Option<usize>>,
    colored_count: usize,
}

impl ColorAssignment {
    pub fn new(n: usize) -> Self {
        ColorAssignment {
            assignment: vec![None; n],
            colored_count: 0,
        }
    }

    pub fn get(&self, v: usize) -> Option<usize> {
        self.assignment[v]
    }

    pub fn colored_count(&self) -> usize {
        self.colored_count
    }

    pub fn n(&self) -> usize {
        self.assignment.len()
    }

    pub fn assign(&mut self, v: usize, color: usize) {
        if self.assignment[v].is_none() {
            self.colored_count += 1;
        }
        self.assignment[v] = Some(color);
    }

    pub fn num_colors(&self) -> usize {
        self.assignment
            .iter()
            .flatten()
            .collect::<BTreeSet<_>>()
            .len()
    }

    pub fn as_slice(&self) -> &[Option<usize>] {
        &self.assignment
    }

    /// First edge whose endpoints share a color, if any.
    pub fn conflict(&self, g: &Graph) -> Option<(usize, usize)> {
        g.edges().find(|&(u, v)| match (self.assignment[u], self.assignment[v]) {
            (Some(a), Some(b)) => a == b,
            _ => false,
        })
    }

    pub fn is_proper(&self, g: &Graph) -> bool {
        self.conflict(g).is_none()
    }
}

/// First-fit greedy coloring in vertex order; the comparison baseline.
pub fn greedy_coloring(g: &Graph) -> ColorAssignment {
    let mut out = ColorAssignment::new(g.n());
    let mut taken = Vec::new();
    for v in 0..g.n() {
        taken.clear();
        taken.extend(g.neighbors(v).iter().filter_map(|&w| out.get(w)));
        taken.sort_unstable();
        taken.dedup();
        let mut c = 0;
        for &t in &taken {
            if t == c {
                c += 1;
            } else if t > c {
                break;
            }
        }
        out.assign(v, c);
    }
    out
}

/// Random proper 3-colorings found by randomized backtracking (small graphs).
/// Returns at most `count` distinct colorings; fewer when the graph has fewer
/// or the node budget runs out.
pub fn sample_proper_colorings(g: &Graph, count: usize, seed: u64) -> Vec<Vec<u8>> {
    let mut r = rng::stream(seed, 0);
    let mut found: BTreeSet<Vec<u8>> = BTreeSet::new();
    let mut attempts = 0;
    while found.len() < count && attempts < count * 20 {
        attempts += 1;
        let mut order: Vec<usize> = (0..g.n()).collect();
        order.shuffle(&mut r);
        let perms: Vec<[u8; 3]> = (0..g.n())
            .map(|_| {
                let mut p = [0u8, 1, 2];
                p.shuffle(&mut r);
                p
            })
            .collect();
        let mut colors = vec![u8::MAX; g.n()];
        let mut budget = 200_000usize;
        if backtrack(g, &order, &perms, 0, &mut colors, &mut budget) {
            found.insert(colors);
        }
    }
    found.into_iter().collect()
}

fn backtrack(
    g: &Graph,
    order: &[usize],
    perms: &[[u8; 3]],
    pos: usize,
    colors: &mut [u8],
    budget: &mut usize,
) -> bool {
    if pos == order.len() {
        return true;
    }
    if *budget == 0 {
        return false;
    }
    *budget -= 1;
    let v = order[pos];
    for &c in &perms[v] {
        if g.neighbors(v).iter().all(|&w| colors[w] != c) {
            colors[v] = c;
            if backtrack(g, order, perms, pos + 1, colors, budget) {
                return true;
            }
        }
    }
    colors[v] = u8::MAX;
    false
}

/// Proper 3-coloring check for a full color vector.
pub fn coloring_conflict(g: &Graph, colors: &[u8]) -> Option<(usize, usize)> {
    g.edges().find(|&(u, v)| colors[u] == colors[v])
}

/// Random subset of `0..n` where each vertex is kept independently with `p`.
pub fn random_subset<R: Rng + ?Sized>(rng: &mut R, n: usize, p: f64) -> Vec<usize> {
    (0..n).filter(|_| rng.random::<f64>() < p).collect()
}
