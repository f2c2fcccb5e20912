#![allow(dead_code)]

use rand::Rng;
use tricolor::graph::{self, Graph};
use tricolor::linalg::Vectors;
use tricolor::rng;
use tricolor::sos::{self, ColoringMixture, SosSolution, StrictVector3Coloring};
use tricolor::walks::EdgeWeights;

pub const H: f64 = 0.866_025_403_784_438_6;

pub fn weights(list: &[(usize, usize, f64)]) -> EdgeWeights {
    let mut w = EdgeWeights::new();
    for &(u, v, x) in list {
        w.set(u, v, x).unwrap();
    }
    w
}

/// Twelve vertices in classes {0..3}, {4..7}, {8..11}: an octahedron core
/// on {0,1,4,5,8,9} (weight 0.1 per edge) plus a light pendant chain 0-10-6,
/// a bridge 1-7-11-5 and the vertex 3 hanging off 9 and 5.
pub fn fixture12() -> (Graph, StrictVector3Coloring, EdgeWeights) {
    let core = [(0, 4), (0, 5), (0, 8), (0, 9), (1, 4), (1, 5), (1, 8), (1, 9), (4, 8), (4, 9), (5, 8), (5, 9)];
    let mut list: Vec<(usize, usize, f64)> = core.iter().map(|&(u, v)| (u, v, 0.1)).collect();
    list.extend([
        (0, 10, 0.01),
        (6, 10, 0.03),
        (1, 7, 0.015),
        (7, 11, 0.2),
        (5, 11, 0.2),
        (3, 9, 0.01),
        (3, 5, 0.045),
    ]);
    let edges: Vec<(usize, usize)> = list.iter().map(|&(u, v, _)| (u, v)).collect();
    let g = Graph::from_edges(12, &edges).unwrap();
    let planted: Vec<u8> = (0..12).map(|v| (v / 4) as u8).collect();
    (g, sos::planted_simplex(&planted), weights(&list))
}

/// Path 0-1-2-3 with `v_1 = e0`, `v_0 = -e0/2 + h e1`, `v_2 = -e0/2 + h e2`,
/// `v_3 = -v_2/2 + h e3`: both `α` values are 0 and every `ℓ` window holds.
pub fn orthogonal_path() -> (Graph, StrictVector3Coloring) {
    let g = Graph::from_edges(4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
    let v2 = [-0.5, 0.0, H, 0.0];
    let rows = vec![
        vec![-0.5, H, 0.0, 0.0],
        vec![1.0, 0.0, 0.0, 0.0],
        v2.to_vec(),
        vec![0.25, 0.0, -0.5 * H, H],
    ];
    (g, StrictVector3Coloring { vectors: Vectors::from_rows(&rows).unwrap() })
}

/// Round-3 solution of a symmetrized mixture of proper colorings of a
/// planted instance, with its strict vector 3-coloring.
pub fn mixture_instance(n: usize, p: f64, colorings: usize, seed: u64) -> (Graph, SosSolution, StrictVector3Coloring) {
    let inst = graph::generate_planted(n, [1.0 / 3.0; 3], p, seed).unwrap();
    let mut cols = graph::sample_proper_colorings(&inst.graph, colorings, seed + 1);
    if cols.is_empty() {
        cols.push(inst.planted.clone());
    }
    let m = ColoringMixture::uniform(&cols).unwrap().symmetrize();
    let s = sos::mixture_to_sos(&inst.graph, &m, 3).unwrap();
    let strict = sos::extract_vector3(&s).unwrap();
    (inst.graph, s, strict)
}

/// Random walks `i - j - k - ℓ` with `i != k` and `j != ℓ`.
pub fn random_walks(g: &Graph, count: usize, seed: u64) -> Vec<[usize; 4]> {
    let mut r = rng::stream(seed, 0);
    let starts: Vec<usize> = (0..g.n()).filter(|&v| g.degree(v) > 0).collect();
    let mut out = Vec::new();
    let mut guard = 0;
    while out.len() < count && guard < 100 * count {
        guard += 1;
        let i = starts[r.random_range(0..starts.len())];
        let step = |r: &mut rng::StreamRng, v: usize| g.neighbors(v)[r.random_range(0..g.degree(v))];
        let j = step(&mut r, i);
        let k = step(&mut r, j);
        let l = step(&mut r, k);
        if i != k && j != l {
            out.push([i, j, k, l]);
        }
    }
    out
}

/// Uniform random symmetric weights in `[0, 1)` on every edge.
pub fn random_weights(g: &Graph, seed: u64) -> EdgeWeights {
    let mut r = rng::stream(seed, 7);
    let mut w = EdgeWeights::new();
    for (u, v) in g.edges() {
        w.set(u, v, r.random::<f64>()).unwrap();
    }
    w
}

/// `K_{a,a}` with `v_u = (±x + p_u)/sqrt 2` for orthonormal private `p_u`:
/// a strict coloring on which KMS' fails at negative thresholds.
pub fn balanced_biclique(a: usize) -> (Graph, StrictVector3Coloring) {
    let n = 2 * a;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|v| {
            let mut r = vec![0.0; n + 1];
            r[0] = if v < a { s } else { -s };
            r[1 + v] = s;
            r
        })
        .collect();
    let edges: Vec<(usize, usize)> = (0..a).flat_map(|u| (a..n).map(move |w| (u, w))).collect();
    (Graph::from_edges(n, &edges).unwrap(), StrictVector3Coloring { vectors: Vectors::from_rows(&rows).unwrap() })
}
