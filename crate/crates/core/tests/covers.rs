use rand::Rng;
use tricolor::covers::{self, PackingMeasure};
use tricolor::gaussian;
use tricolor::linalg::{self, Vectors};
use tricolor::rng;

fn random_family(seed: u64, len: usize, dim: usize) -> Vectors {
    let mut r = rng::stream(seed, 51);
    let rows: Vec<Vec<f64>> = (0..len)
        .map(|_| linalg::normalized(&rng::gaussian_vector(&mut r, dim), 1e-9).unwrap())
        .collect();
    Vectors::from_rows(&rows).unwrap()
}

#[test]
fn cover_size_lower_bound() {
    for seed in 0..40u64 {
        let mut r = rng::stream(seed, 52);
        let x = random_family(seed, r.random_range(1..30), r.random_range(2..12));
        let s = r.random_range(0.5..3.0);
        let est = covers::estimate_cover_prob(&x, s, 4000, seed).unwrap();
        let bound = est.lo / gaussian::tail(s);
        assert!(x.len() as f64 >= bound, "seed {seed}: |X| = {} < {bound}", x.len());
        assert!(covers::cover_lower_bound_holds(x.len(), s, &est));
    }
}

#[test]
fn greedy_packing_total_is_cover_estimate() {
    for seed in 0..20u64 {
        let x = random_family(seed, 15, 6);
        let (mu, est) = covers::greedy_packing(&x, 1.2, 3000, seed).unwrap();
        let cover = covers::estimate_cover_prob(&x, 1.2, 3000, seed).unwrap();
        let hits: u64 = mu.weights.iter().map(|w| (w * 3000.0).round() as u64).sum();
        assert_eq!(hits, cover.successes);
        assert_eq!(est.successes, cover.successes);
    }
}

#[test]
fn pruning_is_monotone_and_step_mass_bounded() {
    for seed in 0..40u64 {
        let mut r = rng::stream(seed, 53);
        let x = random_family(seed, 25, 4);
        let w: Vec<f64> = (0..x.len()).map(|_| r.random_range(0.0..0.04)).collect();
        let mu = PackingMeasure::explicit(w.clone(), 1.0).unwrap();
        let rows: Vec<usize> = (0..x.len()).collect();
        let lambda = r.random_range(0.3..0.9);
        let p = covers::measured_spread(&x, &w, &rows, lambda);
        let alpha = r.random_range(0.005..0.05);
        let out = covers::boost_spread(&x, &mu, lambda, p, 4, alpha, lambda * 0.8).unwrap();
        assert!(out.kept.iter().all(|k| rows.contains(k)));
        assert!(out.kept.windows(2).all(|p| p[0] < p[1]));
        assert!(out.max_step_mass <= p + 1e-12, "{} > {p}", out.max_step_mass);

        let x2 = random_family(seed + 1000, 20, 4);
        let mu2 = PackingMeasure::explicit((0..20).map(|_| r.random_range(0.0..0.05)).collect(), 1.0).unwrap();
        let out = covers::prune_against(&x, &mu, &x2, &mu2, lambda, p, 4, alpha, 0.5).unwrap();
        assert!(out.kept.iter().all(|k| rows.contains(k)));
        assert!(out.max_step_mass <= p + 1e-12);
        if !out.exhausted {
            assert!(covers::prune_postcondition(&x, &out.kept, &x2, &mu2, 0.5, alpha).pass);
        }
    }
}
