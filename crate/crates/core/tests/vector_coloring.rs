use rand::Rng;
use tricolor::graph::{self, Color, Graph};
use tricolor::linalg;
use tricolor::rng;
use tricolor::sos::{self, ColoringMixture, MixtureEntry};
use tricolor::vector_coloring::{self as vcol, VectorColoring};

fn assert_unit(vc: &VectorColoring) {
    for k in 0..vc.len() {
        assert!((linalg::norm(vc.vectors.row(k)) - 1.0).abs() < 1e-9);
    }
}

#[test]
fn constructions_respect_their_bounds() {
    let (mut neg, mut pos, mut low) = (0, 0, 0);
    for seed in 0..100u64 {
        let mut r = rng::stream(seed, 31);
        let n = r.random_range(6..=40);
        let inst = graph::generate_planted(n, [0.2, 0.4, 0.4], r.random_range(0.1..0.6), seed).unwrap();
        let g = &inst.graph;
        let mut cols = vec![inst.planted.clone()];
        for c in graph::sample_proper_colorings(g, 4, seed) {
            // relabel so red is the rarest class
            let mut counts = [0usize; 3];
            c.iter().for_each(|&x| counts[x as usize] += 1);
            let rare = (0..3).min_by_key(|&k| counts[k]).unwrap() as u8;
            cols.push(c.iter().map(|&x| if x == rare { 0 } else if x == 0 { rare } else { x }).collect());
        }
        let m = ColoringMixture::uniform(&cols).unwrap();
        let sym = sos::mixture_to_sos(g, &m.symmetrize(), 3).unwrap();
        let strict = sos::extract_vector3(&sym).unwrap();
        let tn = r.random_range(-0.5..0.0);
        let tp = r.random_range(0.0625..=0.25);
        for i in 0..n {
            let targets: Vec<usize> = (0..n).filter(|&j| j != i && strict.inner(i, j) <= tn).collect();
            let vc = vcol::conditioned_coloring_negative(&sym, i, tn, &targets, 1e-9).unwrap();
            assert_unit(&vc);
            if let Some((_, _, w)) = vc.worst_edge(g) {
                assert!(w <= -(1.0 - 4.0 * tn) / (2.0 - 2.0 * tn) + 1e-8);
                neg += 1;
            }
            let targets: Vec<usize> = (0..n).filter(|&j| j != i && strict.inner(i, j) >= tp).collect();
            let vc = vcol::conditioned_coloring_positive(&sym, i, tp, &targets, 1e-9).unwrap();
            assert_unit(&vc);
            if let Some((_, _, w)) = vc.worst_edge(g) {
                assert!(w <= -(1.0 + 8.0 * tp) / 3.0 + 1e-8);
                pos += 1;
            }
        }

        // red is the light class, so the unsymmetrized mixture may qualify
        let raw = sos::mixture_to_sos(g, &m, 2).unwrap();
        let eps = 0.05;
        if let Ok((_, vc)) = vcol::combinatorial_52_coloring(&raw, eps, 1e-9) {
            assert_unit(&vc);
            if let Some((_, _, w)) = vc.worst_edge(g) {
                assert!(w <= -(2.0 - 8.0 * eps) / (3.0 - 4.0 * eps) + 1e-8);
                low += 1;
            }
        }
    }
    assert!(neg > 100 && pos > 20 && low > 10, "{neg} {pos} {low}");
}

/// `i` isolated, edge `{j, l}`; each endpoint shares `i`'s color with
/// probability `q`, never both.
fn tight_instance(q: f64) -> (Graph, sos::SosSolution) {
    let g = Graph::from_edges(3, &[(1, 2)]).unwrap();
    let mut support = Vec::new();
    for (c, w) in [(vec![0u8, 0, 1], q), (vec![0, 1, 0], q), (vec![0, 1, 2], 1.0 - 2.0 * q)] {
        if w > 0.0 {
            support.push(MixtureEntry { coloring: c, weight: w });
        }
    }
    let m = ColoringMixture::new(support).unwrap().symmetrize();
    (g.clone(), sos::mixture_to_sos(&g, &m, 3).unwrap())
}

#[test]
fn negative_bound_is_tight() {
    for t in [-0.5, -0.3, -0.1, 0.0] {
        let q = (1.0 + 2.0 * t) / 3.0;
        let (g, s) = tight_instance(q);
        let rr = s.local_prob(&[(0, Color::R), (1, Color::R)]).unwrap();
        assert!((rr - (1.0 + 2.0 * t) / 9.0).abs() < 1e-12);
        let vc = vcol::conditioned_coloring_negative(&s, 0, t, &[1, 2], 1e-9).unwrap();
        let (_, _, w) = vc.worst_edge(&g).unwrap();
        let bound = -(1.0 - 4.0 * t) / (2.0 - 2.0 * t);
        assert!((w - bound).abs() < 1e-6, "t = {t}: {w} vs {bound}");
    }
}

#[test]
fn exchange_identity() {
    use Color::{B, G, R};
    for seed in 0..40u64 {
        let inst = graph::generate_planted(15, [1.0 / 3.0; 3], 0.4, seed).unwrap();
        let g = &inst.graph;
        let mut cols = graph::sample_proper_colorings(g, 5, seed);
        cols.push(inst.planted.clone());
        let m = ColoringMixture::uniform(&cols).unwrap().symmetrize();
        let s = sos::mixture_to_sos(g, &m, 3).unwrap();
        for i in 0..g.n() {
            for (j, l) in g.edges() {
                if i == j || i == l {
                    continue;
                }
                let lhs = s.local_prob(&[(i, R), (j, G), (l, B)]).unwrap() + s.local_prob(&[(i, R), (j, B), (l, G)]).unwrap();
                let rhs = 1.0 / 3.0 - s.local_prob(&[(i, R), (j, R)]).unwrap() - s.local_prob(&[(i, R), (l, R)]).unwrap();
                assert!((lhs - rhs).abs() < 1e-12, "seed {seed}: {lhs} vs {rhs}");
                let direct = m.prob(&[(i, R), (j, G), (l, B)]) + m.prob(&[(i, R), (j, B), (l, G)]);
                assert!((lhs - direct).abs() < 1e-12);
            }
        }
    }
}
