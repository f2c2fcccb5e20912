//! Covers, packings and spread: Monte Carlo estimates of
//! `Pr[exists x in X : r . x >= s]`, packing measures certifying them, and
//! the spread-boosting / pruning procedures that work on packings.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian;
use crate::linalg::{self, Vectors};
use crate::rng;
use crate::stats::Estimate;

pub use crate::rounding::packing_from_kms_prime;

/// Samples per deterministic stream; estimators draw batch `b` from
/// `stream(seed, b)`.
const BATCH: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    GreedyArgmax,
    KmsPrime,
    Explicit,
}

/// Nonnegative weights over an indexed vector family. `indices[k]` labels
/// row `k` of the family the measure is used with.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingMeasure {
    pub indices: Vec<usize>,
    pub weights: Vec<f64>,
    pub s: f64,
    pub samples: u64,
    pub seed: u64,
    pub provenance: Provenance,
}

impl PackingMeasure {
    pub fn new(
        indices: Vec<usize>,
        weights: Vec<f64>,
        s: f64,
        samples: u64,
        seed: u64,
        provenance: Provenance,
    ) -> Result<Self> {
        if indices.len() != weights.len() {
            return Err(Error::InvalidInput("indices and weights differ in length".into()));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::InvalidInput("negative packing weight".into()));
        }
        Ok(PackingMeasure {
            indices,
            weights,
            s,
            samples,
            seed,
            provenance,
        })
    }

    /// Measure with the given weights on rows `0..len`.
    pub fn explicit(weights: Vec<f64>, s: f64) -> Result<Self> {
        let idx = (0..weights.len()).collect();
        Self::new(idx, weights, s, 0, 0, Provenance::Explicit)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Weight of the row labelled `index`.
    pub fn weight(&self, index: usize) -> Option<f64> {
        self.indices
            .iter()
            .position(|&i| i == index)
            .map(|k| self.weights[k])
    }

    /// Mass of the given row positions.
    pub fn mass(&self, rows: &[usize]) -> f64 {
        rows.iter().map(|&k| self.weights[k]).sum()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// A vector family with its estimated cover probability at `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverSpec {
    pub vectors: Vectors,
    pub s: f64,
    pub delta_hat: Estimate,
    pub samples: usize,
    pub seed: u64,
}

impl CoverSpec {
    pub fn estimate(vectors: Vectors, s: f64, samples: usize, seed: u64) -> Result<Self> {
        let delta_hat = estimate_cover_prob(&vectors, s, samples, seed)?;
        Ok(CoverSpec {
            vectors,
            s,
            delta_hat,
            samples,
            seed,
        })
    }
}

/// Runs `f(projections)` on `samples` Gaussian directions, batch by batch.
fn for_each_projection(
    x: &Vectors,
    samples: usize,
    seed: u64,
    mut f: impl FnMut(&[f64]),
) {
    let mut dir = vec![0.0; x.dim()];
    let mut proj = Vec::with_capacity(x.len());
    let mut left = samples;
    let mut batch = 0u64;
    while left > 0 {
        let take = left.min(BATCH);
        let mut r = rng::stream(seed, batch);
        for _ in 0..take {
            rng::fill_gaussian(&mut r, &mut dir);
            x.project(&dir, &mut proj);
            f(&proj);
        }
        left -= take;
        batch += 1;
    }
}

/// Monte Carlo estimate of `Pr[exists x : r . x >= s]`.
pub fn estimate_cover_prob(x: &Vectors, s: f64, samples: usize, seed: u64) -> Result<Estimate> {
    let th = vec![s; x.len()];
    estimate_cover_prob_thresholds(x, &th, samples, seed)
}

/// Same with a threshold per vector.
pub fn estimate_cover_prob_thresholds(
    x: &Vectors,
    thresholds: &[f64],
    samples: usize,
    seed: u64,
) -> Result<Estimate> {
    if samples < 1000 {
        return Err(Error::InvalidInput(format!("samples = {samples} < 1000")));
    }
    if thresholds.len() != x.len() {
        return Err(Error::InvalidInput("one threshold per vector required".into()));
    }
    let mut hits = 0u64;
    for_each_projection(x, samples, seed, |p| {
        if p.iter().zip(thresholds).any(|(a, t)| a >= t) {
            hits += 1;
        }
    });
    Ok(Estimate::new(hits, samples as u64))
}

/// `c` with `|X| = tail(s)^-(1+c)`.
pub fn inefficiency(size: usize, s: f64) -> Result<f64> {
    if size == 0 || !(s > 0.0) {
        return Err(Error::Domain(format!("inefficiency needs |X| >= 1 and s > 0 (s = {s})")));
    }
    let tail = gaussian::tail(s);
    Ok((size as f64).ln() / (1.0 / tail).ln() - 1.0)
}

/// Union bound: an `(s, δ)`-cover has at least `δ / tail(s)` vectors. Checked
/// at the lower confidence end of the estimate.
pub fn cover_lower_bound_holds(size: usize, s: f64, delta_hat: &Estimate) -> bool {
    size as f64 >= delta_hat.lo / gaussian::tail(s)
}

/// `μ(x) = Pr[r . x >= s and x attains the maximum]`, ties to the lowest
/// index. Uses the same streams as [`estimate_cover_prob`], so the total
/// equals that estimate exactly.
pub fn greedy_packing(x: &Vectors, s: f64, samples: usize, seed: u64) -> Result<(PackingMeasure, Estimate)> {
    if samples < 1000 {
        return Err(Error::InvalidInput(format!("samples = {samples} < 1000")));
    }
    let mut counts = vec![0u64; x.len()];
    let mut hits = 0u64;
    for_each_projection(x, samples, seed, |p| {
        let mut best: Option<(usize, f64)> = None;
        for (k, &v) in p.iter().enumerate() {
            if best.is_none_or(|b| v > b.1) {
                best = Some((k, v));
            }
        }
        if let Some((k, v)) = best {
            if v >= s {
                counts[k] += 1;
                hits += 1;
            }
        }
    });
    let weights = counts.iter().map(|&c| c as f64 / samples as f64).collect();
    let mu = PackingMeasure::new(
        (0..x.len()).collect(),
        weights,
        s,
        samples as u64,
        seed,
        Provenance::GreedyArgmax,
    )?;
    Ok((mu, Estimate::new(hits, samples as u64)))
}

/// Subsets on which the packing property is spot-checked: every subset when
/// `len <= 15`, otherwise all singletons, up to 200 pairs, and 20 random
/// 10% subsets.
pub fn packing_test_subsets(len: usize, seed: u64) -> Vec<Vec<usize>> {
    if len == 0 {
        return Vec::new();
    }
    if len <= 15 {
        return (1u32..(1 << len))
            .map(|mask| (0..len).filter(|&k| mask >> k & 1 == 1).collect())
            .collect();
    }
    let mut r = rng::stream(seed, 0);
    let mut out: Vec<Vec<usize>> = (0..len).map(|k| vec![k]).collect();
    for _ in 0..200 {
        let a = r.random_range(0..len);
        let b = r.random_range(0..len);
        if a != b {
            out.push(vec![a.min(b), a.max(b)]);
        }
    }
    let size = (len / 10).max(2);
    let mut all: Vec<usize> = (0..len).collect();
    for _ in 0..20 {
        all.shuffle(&mut r);
        let mut s = all[..size].to_vec();
        s.sort_unstable();
        out.push(s);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PackingCheck {
    pub subsets: usize,
    pub violations: usize,
    /// Largest `μ(X') - (p̂(X') + radius)`; nonpositive when all pass.
    pub worst_excess: f64,
}

/// Statistical check of `μ(X') <= Pr[exists x in X' : r . x >= s]`.
pub fn verify_packing(
    x: &Vectors,
    mu: &PackingMeasure,
    subsets: &[Vec<usize>],
    samples: usize,
    seed: u64,
) -> Result<PackingCheck> {
    if mu.len() != x.len() {
        return Err(Error::InvalidInput("packing does not match the family".into()));
    }
    let mut hits = vec![0u64; subsets.len()];
    for_each_projection(x, samples, seed, |p| {
        for (h, sub) in hits.iter_mut().zip(subsets) {
            if sub.iter().any(|&k| p[k] >= mu.s) {
                *h += 1;
            }
        }
    });
    let mut worst = f64::NEG_INFINITY;
    let mut violations = 0;
    for (h, sub) in hits.iter().zip(subsets) {
        let e = Estimate::new(*h, samples as u64);
        let excess = mu.mass(sub) - e.hi;
        if excess > 0.0 {
            violations += 1;
        }
        worst = worst.max(excess);
    }
    Ok(PackingCheck {
        subsets: subsets.len(),
        violations,
        worst_excess: worst,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpreadReport {
    pub lambda: f64,
    pub p: f64,
    /// Mass of `{x : v . x >= λ}` per direction `v`.
    pub masses: Vec<f64>,
    pub worst_direction: Option<usize>,
    pub worst_mass: f64,
    pub pass: bool,
}

/// Mass of `{x in rows : u . x >= lambda}`.
fn cap_mass(x: &Vectors, mu: &[f64], rows: &[usize], u: &[f64], lambda: f64) -> f64 {
    rows.iter()
        .filter(|&&k| linalg::dot(u, x.row(k)) >= lambda)
        .map(|&k| mu[k])
        .sum()
}

/// `(λ, p, V)`-spread check of `(X, μ)` over the rows of `directions`.
pub fn check_spread(
    x: &Vectors,
    mu: &PackingMeasure,
    lambda: f64,
    p: f64,
    directions: &Vectors,
) -> Result<SpreadReport> {
    if directions.is_empty() {
        return Err(Error::InvalidInput("no directions".into()));
    }
    let rows: Vec<usize> = (0..x.len()).collect();
    Ok(spread_on(x, &mu.weights, &rows, lambda, p, directions.iter()))
}

fn spread_on<'a>(
    x: &Vectors,
    mu: &[f64],
    rows: &[usize],
    lambda: f64,
    p: f64,
    directions: impl Iterator<Item = &'a [f64]>,
) -> SpreadReport {
    let masses: Vec<f64> = directions.map(|u| cap_mass(x, mu, rows, u, lambda)).collect();
    let mut worst_direction = None;
    let mut worst_mass = 0.0;
    for (k, &m) in masses.iter().enumerate() {
        if worst_direction.is_none() || m > worst_mass {
            worst_mass = m;
            worst_direction = Some(k);
        }
    }
    SpreadReport {
        lambda,
        p,
        pass: worst_mass <= p,
        masses,
        worst_direction,
        worst_mass,
    }
}

/// Worst spread mass of `(X, μ)` restricted to `rows`, over directions
/// `rows` themselves: the smallest `p` for which it is `(λ, p, X)`-spread.
pub fn measured_spread(x: &Vectors, mu: &[f64], rows: &[usize], lambda: f64) -> f64 {
    rows.iter()
        .map(|&k| cap_mass(x, mu, rows, x.row(k), lambda))
        .fold(0.0, f64::max)
}

/// `λ' = sqrt(λ c/(1+c) (1+ε)(1 + 1/(λσ)))`.
pub fn boosted_lambda(lambda: f64, c: f64, epsilon: f64, sigma: usize) -> f64 {
    (lambda * c / (1.0 + c) * (1.0 + epsilon) * (1.0 + 1.0 / (lambda * sigma as f64))).sqrt()
}

/// Trace of an iterative pruning run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PruneOutcome {
    /// Surviving row positions of the pruned family, ascending.
    pub kept: Vec<usize>,
    /// Trigger vectors `T`, in selection order.
    pub triggers: Vec<usize>,
    pub iterations: usize,
    pub cap: usize,
    pub removed_mass: f64,
    /// Largest mass deleted in one iteration.
    pub max_step_mass: f64,
    pub exhausted: bool,
}

fn iteration_cap(sigma: usize, alpha: f64) -> usize {
    (sigma as f64 / alpha).ceil().max(1.0) as usize
}

/// Shared loop: repeatedly take the lowest surviving `u` whose trigger mass
/// reaches `2α`, then delete every surviving `u'` with `u . u' >= λ`.
fn prune_loop(
    x1: &Vectors,
    mu1: &[f64],
    rows: &[usize],
    lambda: f64,
    cap: usize,
    mut triggers: impl FnMut(&[f64]) -> bool,
) -> PruneOutcome {
    let mut alive: Vec<usize> = rows.to_vec();
    let mut out = PruneOutcome {
        kept: Vec::new(),
        triggers: Vec::new(),
        iterations: 0,
        cap,
        removed_mass: 0.0,
        max_step_mass: 0.0,
        exhausted: false,
    };
    loop {
        let Some(&u) = alive.iter().find(|&&u| triggers(x1.row(u))) else {
            break;
        };
        if out.iterations == cap {
            out.exhausted = true;
            break;
        }
        let (gone, stay): (Vec<usize>, Vec<usize>) = alive
            .iter()
            .partition(|&&w| linalg::dot(x1.row(u), x1.row(w)) >= lambda);
        let m: f64 = gone.iter().map(|&k| mu1[k]).sum();
        out.removed_mass += m;
        out.max_step_mass = out.max_step_mass.max(m);
        out.triggers.push(u);
        out.iterations += 1;
        alive = stay;
    }
    out.kept = alive;
    out
}

/// Spread boosting of `(X, μ)` against itself. Requires the
/// `(λ, p, X)`-spread precondition.
pub fn boost_spread(
    x: &Vectors,
    mu: &PackingMeasure,
    lambda: f64,
    p: f64,
    sigma: usize,
    alpha: f64,
    lambda_prime: f64,
) -> Result<PruneOutcome> {
    let rows: Vec<usize> = (0..x.len()).collect();
    boost_spread_rows(x, &mu.weights, &rows, lambda, p, sigma, alpha, lambda_prime)
}

#[allow(clippy::too_many_arguments)]
fn boost_spread_rows(
    x: &Vectors,
    mu: &[f64],
    rows: &[usize],
    lambda: f64,
    p: f64,
    sigma: usize,
    alpha: f64,
    lambda_prime: f64,
) -> Result<PruneOutcome> {
    check_prune_params(sigma, alpha)?;
    let pre = measured_spread(x, mu, rows, lambda);
    if pre > p + 1e-12 {
        return Err(Error::Precondition(format!(
            "family is not ({lambda}, {p})-spread: worst mass {pre}"
        )));
    }
    let cap = iteration_cap(sigma, alpha);
    Ok(prune_loop(x, mu, rows, lambda, cap, |u| {
        cap_mass(x, mu, rows, u, lambda_prime) >= 2.0 * alpha
    }))
}

fn check_prune_params(sigma: usize, alpha: f64) -> Result<()> {
    if sigma == 0 || !(alpha > 0.0) {
        return Err(Error::InvalidInput(format!("need sigma >= 1 and alpha > 0 (got {sigma}, {alpha})")));
    }
    Ok(())
}

/// Prunes `X1` until `(X2, μ2)` is `(λ', 2α, X1')`-spread.
#[allow(clippy::too_many_arguments)]
pub fn prune_against(
    x1: &Vectors,
    mu1: &PackingMeasure,
    x2: &Vectors,
    mu2: &PackingMeasure,
    lambda: f64,
    p: f64,
    sigma: usize,
    alpha: f64,
    lambda_prime: f64,
) -> Result<PruneOutcome> {
    let rows: Vec<usize> = (0..x1.len()).collect();
    prune_against_rows(x1, &mu1.weights, &rows, x2, &mu2.weights, lambda, p, sigma, alpha, lambda_prime)
}

#[allow(clippy::too_many_arguments)]
fn prune_against_rows(
    x1: &Vectors,
    mu1: &[f64],
    rows: &[usize],
    x2: &Vectors,
    mu2: &[f64],
    lambda: f64,
    p: f64,
    sigma: usize,
    alpha: f64,
    lambda_prime: f64,
) -> Result<PruneOutcome> {
    check_prune_params(sigma, alpha)?;
    if x1.dim() != x2.dim() {
        return Err(Error::InvalidInput("families of different dimension".into()));
    }
    let pre = measured_spread(x1, mu1, rows, lambda);
    if pre > p + 1e-12 {
        return Err(Error::Precondition(format!(
            "X1 is not ({lambda}, {p})-spread: worst mass {pre}"
        )));
    }
    let all2: Vec<usize> = (0..x2.len()).collect();
    let cap = iteration_cap(sigma, alpha);
    Ok(prune_loop(x1, mu1, rows, lambda, cap, |u| {
        cap_mass(x2, mu2, &all2, u, lambda_prime) >= 2.0 * alpha
    }))
}

/// Verifies that `(X2, μ2)` is `(λ', 2α)`-spread along the kept rows of `X1`.
pub fn prune_postcondition(
    x1: &Vectors,
    kept: &[usize],
    x2: &Vectors,
    mu2: &PackingMeasure,
    lambda_prime: f64,
    alpha: f64,
) -> SpreadReport {
    let all2: Vec<usize> = (0..x2.len()).collect();
    spread_on(x2, &mu2.weights, &all2, lambda_prime, 2.0 * alpha, kept.iter().map(|&k| x1.row(k)))
}

/// Schedule used by [`symmetric_prune`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PruneSchedule {
    pub sigma: usize,
    pub epsilon: f64,
    pub lambda1: f64,
    pub p1: f64,
    pub alpha: f64,
    pub lambda_prime: f64,
}

impl PruneSchedule {
    /// `σ = ⌊ln s⌋` (at least 1), `ε = ln²s / s`, `α = 2 p σ ln s` and the
    /// boosted `λ'`; `p` is the measured spread mass at `λ1`.
    pub fn new(s: f64, c: f64, lambda1: f64, p1: f64) -> Result<Self> {
        if !(s > 1.0) {
            return Err(Error::Domain(format!("schedule needs s > 1 (s = {s})")));
        }
        let ln = s.ln();
        let sigma = (ln.floor() as usize).max(1);
        let epsilon = ln * ln / s;
        // a zero measured spread still needs a positive trigger level
        let alpha = (2.0 * p1 * sigma as f64 * ln).max(f64::MIN_POSITIVE);
        Ok(PruneSchedule {
            sigma,
            epsilon,
            lambda1,
            p1,
            alpha,
            lambda_prime: boosted_lambda(lambda1, c, epsilon, sigma),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SymmetricPruneOutcome {
    pub schedule: PruneSchedule,
    /// Rows of `X1` kept (both `x` and `-x` survived).
    pub kept: Vec<usize>,
    pub boost: PruneOutcome,
    pub against: PruneOutcome,
    /// Spread of `(X2, μ2)` along `X1' ∪ -X1'`.
    pub post: SpreadReport,
    pub exhausted: bool,
}

/// `Y = X1 ∪ -X1` with entry `k` standing for `x_k` and `m + k` for `-x_k`.
pub fn symmetric_family(x1: &Vectors, mu1: &PackingMeasure) -> (Vectors, Vec<f64>) {
    let mut y = x1.clone();
    for row in x1.negated().iter() {
        y.push(row).expect("same dimension");
    }
    let mut w: Vec<f64> = mu1.weights.iter().map(|m| m / 2.0).collect();
    w.extend(mu1.weights.iter().map(|m| m / 2.0));
    (y, w)
}

/// Symmetric pruning of `X1` against `X2`: boost `Y = X1 ∪ -X1`, keep the
/// pairs that survive on both signs, prune them against `X2`, and return the
/// rows of `X1` whose pair survived.
pub fn symmetric_prune(
    x1: &Vectors,
    mu1: &PackingMeasure,
    x2: &Vectors,
    mu2: &PackingMeasure,
    s: f64,
    c: f64,
    lambda1: f64,
) -> Result<SymmetricPruneOutcome> {
    let m = x1.len();
    let (y, mu_y) = symmetric_family(x1, mu1);
    let all: Vec<usize> = (0..2 * m).collect();
    let p1 = measured_spread(&y, &mu_y, &all, lambda1);
    let schedule = PruneSchedule::new(s, c, lambda1, p1)?;
    let boost = boost_spread_rows(
        &y,
        &mu_y,
        &all,
        lambda1,
        p1,
        schedule.sigma,
        schedule.alpha,
        schedule.lambda_prime,
    )?;
    let alive: Vec<bool> = {
        let mut a = vec![false; 2 * m];
        for &k in &boost.kept {
            a[k] = true;
        }
        a
    };
    let paired: Vec<usize> = (0..2 * m).filter(|&k| alive[k] && alive[(k + m) % (2 * m)]).collect();
    let p_pair = measured_spread(&y, &mu_y, &paired, lambda1);
    let against = prune_against_rows(
        &y,
        &mu_y,
        &paired,
        x2,
        &mu2.weights,
        lambda1,
        p_pair.max(0.0),
        schedule.sigma,
        schedule.alpha,
        schedule.lambda_prime,
    )?;
    let mut survived = vec![false; 2 * m];
    for &k in &against.kept {
        survived[k] = true;
    }
    let kept: Vec<usize> = (0..m).filter(|&k| survived[k] && survived[k + m]).collect();
    let closure: Vec<usize> = kept.iter().flat_map(|&k| [k, k + m]).collect();
    let post = prune_postcondition(&y, &closure, x2, mu2, schedule.lambda_prime, schedule.alpha);
    Ok(SymmetricPruneOutcome {
        schedule,
        exhausted: boost.exhausted || against.exhausted,
        kept,
        boost,
        against,
        post,
    })
}

/// Among `k` subsets with `Σ μ(X_i) >= 2ℓ` (and `μ(X) <= 1`), finds `ℓ` of them
/// whose intersection has mass at least `(4ℓ/(e k))^ℓ`. Exhaustive for
/// `k <= 20`, greedy otherwise. Returns the chosen subset indices and the
/// intersection mass, or `None` if the search found nothing meeting the bound.
pub fn find_intersection_subset(
    mu: &[f64],
    subsets: &[Vec<usize>],
    ell: usize,
) -> Result<Option<(Vec<usize>, f64)>> {
    let k = subsets.len();
    if ell == 0 || ell > k {
        return Err(Error::InvalidInput(format!("need 1 <= ell <= k (ell = {ell}, k = {k})")));
    }
    let total: f64 = mu.iter().sum();
    let sum: f64 = subsets.iter().map(|s| s.iter().map(|&x| mu[x]).sum::<f64>()).sum();
    if total > 1.0 + 1e-12 || sum < 2.0 * ell as f64 - 1e-12 {
        return Err(Error::Precondition(format!(
            "need mu(X) <= 1 and sum of subset masses >= 2 ell (got {total}, {sum})"
        )));
    }
    let bound = intersection_bound(ell, k);
    let members: Vec<Vec<bool>> = subsets
        .iter()
        .map(|s| {
            let mut m = vec![false; mu.len()];
            for &x in s {
                m[x] = true;
            }
            m
        })
        .collect();
    let inter_mass = |choice: &[usize]| -> f64 {
        (0..mu.len())
            .filter(|&x| choice.iter().all(|&c| members[c][x]))
            .map(|x| mu[x])
            .sum()
    };
    let best = if k <= 20 {
        let mut best: Option<(Vec<usize>, f64)> = None;
        let mut choice: Vec<usize> = (0..ell).collect();
        loop {
            let m = inter_mass(&choice);
            if best.as_ref().is_none_or(|b| m > b.1) {
                best = Some((choice.clone(), m));
            }
            if !next_combination(&mut choice, k) {
                break;
            }
        }
        best
    } else {
        let mut choice: Vec<usize> = Vec::new();
        for _ in 0..ell {
            let next = (0..k)
                .filter(|c| !choice.contains(c))
                .max_by(|&a, &b| {
                    let mut ca = choice.clone();
                    ca.push(a);
                    let mut cb = choice.clone();
                    cb.push(b);
                    inter_mass(&ca).partial_cmp(&inter_mass(&cb)).unwrap().then(b.cmp(&a))
                })
                .expect("ell <= k");
            choice.push(next);
        }
        choice.sort_unstable();
        let m = inter_mass(&choice);
        Some((choice, m))
    };
    Ok(best.filter(|b| b.1 >= bound - 1e-12))
}

/// `(4ℓ/(e k))^ℓ`.
pub fn intersection_bound(ell: usize, k: usize) -> f64 {
    (4.0 * ell as f64 / (std::f64::consts::E * k as f64)).powi(ell as i32)
}

fn next_combination(c: &mut [usize], k: usize) -> bool {
    let l = c.len();
    for pos in (0..l).rev() {
        if c[pos] < k - l + pos {
            c[pos] += 1;
            for q in pos + 1..l {
                c[q] = c[q - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Result of the empirical cover-composition check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionCheck {
    pub a: f64,
    pub delta1_hat: Estimate,
    pub delta2_hats: Vec<Estimate>,
    pub joint: Estimate,
    /// `|X| tail(s1) tail(sqrt(c(1+1/s1)) s1)`.
    pub loss_term: f64,
    /// Inefficiency of `X` at `s1` as measured from its size.
    pub measured_c: f64,
    /// `joint.hi >= delta1_hat.lo - loss_term`.
    pub lemma_bound_holds: bool,
    /// `joint.hi >= delta1_hat.lo`: no loss at all, up to sampling error.
    pub full_bound_holds: bool,
}

/// `a = sqrt(c(1+1/s1)) s1 - Φ^-1(δ2)`.
pub fn composition_shift(c: f64, s1: f64, delta2: f64) -> Result<f64> {
    Ok((c * (1.0 + 1.0 / s1)).sqrt() * s1 - gaussian::quantile(delta2)?)
}

/// Estimates `Pr[exists i, j : r . v_i >= s1 and r . u_ij >= s2 - a |u_ij|]`
/// and compares it with `δ̂1` and with the lemma's explicit loss term.
#[allow(clippy::too_many_arguments)]
pub fn compose_covers_check(
    x: &Vectors,
    ys: &[Vectors],
    c: f64,
    s1: f64,
    s2: f64,
    delta2: f64,
    samples: usize,
    seed: u64,
) -> Result<CompositionCheck> {
    if ys.len() != x.len() {
        return Err(Error::InvalidInput("one Y family per cover vector required".into()));
    }
    for (i, y) in ys.iter().enumerate() {
        if y.dim() != x.dim() {
            return Err(Error::InvalidInput("dimension mismatch".into()));
        }
        for u in y.iter() {
            let d = linalg::dot(u, x.row(i));
            if d.abs() > 1e-8 {
                return Err(Error::PreconditionViolated {
                    what: format!("Y_{i} not orthogonal to v_{i} ({d:e})"),
                    vertices: vec![i],
                });
            }
        }
    }
    let a = composition_shift(c, s1, delta2)?;
    let delta2_hats = ys
        .iter()
        .enumerate()
        .map(|(i, y)| estimate_cover_prob(y, s2, samples, rng::child_seed(seed, i as u64 + 1)))
        .collect::<Result<Vec<_>>>()?;
    let low: Vec<Vec<f64>> = ys
        .iter()
        .map(|y| y.iter().map(|u| s2 - a * linalg::norm(u)).collect())
        .collect();
    let (mut first, mut joint) = (0u64, 0u64);
    let mut dir = vec![0.0; x.dim()];
    let mut proj = Vec::new();
    let mut py = Vec::new();
    let mut left = samples;
    let mut batch = 0u64;
    while left > 0 {
        let take = left.min(BATCH);
        let mut r = rng::stream(seed, batch);
        for _ in 0..take {
            rng::fill_gaussian(&mut r, &mut dir);
            x.project(&dir, &mut proj);
            let mut any_first = false;
            let mut any_joint = false;
            for (i, &pi) in proj.iter().enumerate() {
                if pi < s1 {
                    continue;
                }
                any_first = true;
                ys[i].project(&dir, &mut py);
                if py.iter().zip(&low[i]).any(|(p, l)| p >= l) {
                    any_joint = true;
                    break;
                }
            }
            first += any_first as u64;
            joint += any_joint as u64;
        }
        left -= take;
        batch += 1;
    }
    let delta1_hat = Estimate::new(first, samples as u64);
    let joint = Estimate::new(joint, samples as u64);
    let loss_term = x.len() as f64
        * gaussian::tail(s1)
        * gaussian::tail((c * (1.0 + 1.0 / s1)).sqrt() * s1);
    Ok(CompositionCheck {
        a,
        delta2_hats,
        measured_c: inefficiency(x.len(), s1)?,
        lemma_bound_holds: joint.hi >= delta1_hat.lo - loss_term,
        full_bound_holds: joint.hi >= delta1_hat.lo,
        loss_term,
        delta1_hat,
        joint,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionCheck {
    pub before: Estimate,
    pub after: Estimate,
    pub drop: f64,
    pub allowed: f64,
    /// `drop <= 2 tail(ρ) + joint radius`.
    pub holds: bool,
}

/// Removing the `v0` component costs at most `2 tail(ρ)` of cover
/// probability when the threshold is lowered by `ρ`.
pub fn projection_check(
    x: &Vectors,
    v0: &[f64],
    s: f64,
    rho: f64,
    samples: usize,
    seed: u64,
) -> Result<ProjectionCheck> {
    let mut projected = Vectors::new(x.dim());
    for v in x.iter() {
        projected.push(&linalg::add_scaled(v, -linalg::dot(v, v0), v0))?;
    }
    let before = estimate_cover_prob(x, s, samples, seed)?;
    let after = estimate_cover_prob(&projected, s - rho, samples, seed)?;
    let drop = before.p - after.p;
    let allowed = 2.0 * gaussian::tail(rho);
    Ok(ProjectionCheck {
        holds: drop <= allowed + before.radius() + after.radius(),
        before,
        after,
        drop,
        allowed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::tail;

    fn basis(k: usize, dim: usize) -> Vectors {
        let mut v = Vectors::new(dim);
        for i in 0..k {
            let mut e = vec![0.0; dim];
            e[i] = 1.0;
            v.push(&e).unwrap();
        }
        v
    }

    #[test]
    fn cover_examples() {
        let s = 1.5;
        let e = estimate_cover_prob(&basis(1, 3), s, 20_000, 1).unwrap();
        assert!(e.contains(tail(s)), "{e:?}");
        let mut pm = basis(1, 3);
        pm.push(&[-1.0, 0.0, 0.0]).unwrap();
        let e = estimate_cover_prob(&pm, s, 20_000, 2).unwrap();
        assert!(e.contains(2.0 * tail(s)), "{e:?}");
        let k = 5;
        let e = estimate_cover_prob(&basis(k, 5), s, 20_000, 3).unwrap();
        assert!(e.contains(1.0 - (1.0 - tail(s)).powi(k as i32)), "{e:?}");
        assert!(estimate_cover_prob(&basis(1, 1), s, 10, 3).is_err());
    }

    #[test]
    fn inefficiency_examples() {
        let s: f64 = 2.0;
        let q = 1.0 / tail(s);
        // sizes are integers; compare through the continuous formula
        let c0 = (q).ln() / q.ln() - 1.0;
        assert_eq!(c0, 0.0);
        let c = inefficiency(q.round() as usize, s).unwrap();
        assert!(c.abs() < 0.01);
        let c = inefficiency((q * q).round() as usize, s).unwrap();
        assert!((c - 1.0).abs() < 0.01);
        assert!(inefficiency(3, 0.0).is_err());
    }

    #[test]
    fn greedy_packing_examples() {
        let s = 1.0;
        let (mu, cov) = greedy_packing(&basis(1, 2), s, 20_000, 4).unwrap();
        assert!(cov.contains(tail(s)));
        assert_eq!(mu.total(), cov.p);
        let mut twin = basis(1, 2);
        twin.push(&[1.0, 0.0]).unwrap();
        let (mu, _) = greedy_packing(&twin, s, 5_000, 4).unwrap();
        assert_eq!(mu.weights[1], 0.0);
        let (mu, cov) = greedy_packing(&basis(2, 2), s, 40_000, 5).unwrap();
        assert!((mu.total() - cov.p).abs() < 1e-15);
        let a = Estimate::new((mu.weights[0] * 40_000.0).round() as u64, 40_000);
        assert!(a.contains(mu.weights[1]) || (mu.weights[0] - mu.weights[1]).abs() < 2.0 * a.radius());
        let subs = packing_test_subsets(2, 0);
        assert_eq!(subs.len(), 3);
        let chk = verify_packing(&basis(2, 2), &mu, &subs, 20_000, 77).unwrap();
        assert_eq!(chk.violations, 0, "{chk:?}");
    }

    #[test]
    fn spread_examples() {
        let x = basis(4, 4);
        let mu = PackingMeasure::explicit(vec![0.25; 4], 1.0).unwrap();
        let rep = check_spread(&x, &mu, 0.5, 0.25, &x).unwrap();
        assert!(rep.pass);
        assert!(rep.masses.iter().all(|&m| (m - 0.25).abs() < 1e-15));
        let clustered = Vectors::from_rows(&[[1.0, 0.0], [1.0, 0.0], [1.0, 0.0]]).unwrap();
        let mu = PackingMeasure::explicit(vec![0.1; 3], 1.0).unwrap();
        let rep = check_spread(&clustered, &mu, 0.9, 0.2, &clustered).unwrap();
        assert!(!rep.pass);
        assert!((rep.worst_mass - 0.3).abs() < 1e-15);
        // v_x = sqrt(c/(1+c)) v0 + sqrt(1/(1+c)) v_x^perp
        let c: f64 = 0.1;
        let a = (c / (1.0 + c)).sqrt();
        let b = (1.0 / (1.0 + c)).sqrt();
        let m = 6;
        let mut fam = Vectors::new(m + 1);
        for k in 0..m {
            let mut v = vec![0.0; m + 1];
            v[0] = a;
            v[k + 1] = b;
            fam.push(&v).unwrap();
        }
        let mu = PackingMeasure::explicit(vec![1.0 / m as f64; m], 2.0).unwrap();
        let v0 = basis(1, m + 1);
        assert!(!check_spread(&fam, &mu, a - 1e-6, 0.5, &v0).unwrap().pass);
        assert!(check_spread(&fam, &mu, a + 1e-6, 0.5, &v0).unwrap().pass);
    }

    #[test]
    fn boost_examples() {
        let x = basis(4, 4);
        let mu = PackingMeasure::explicit(vec![0.1; 4], 1.0).unwrap();
        let out = boost_spread(&x, &mu, 0.5, 0.1, 2, 0.2, 0.5).unwrap();
        assert_eq!(out.kept, vec![0, 1, 2, 3]);
        assert_eq!(out.iterations, 0);
        // two clusters: 3 copies near e0 (heavy) and singles on e1, e2
        let h = 0.05f64;
        let r = (1.0 - h * h).sqrt();
        let x = Vectors::from_rows(&[
            [1.0, 0.0, 0.0],
            [r, h, 0.0],
            [r, 0.0, h],
            [0.0, 1.0, 0.0],
            [0.0, 0.0, 1.0],
        ])
        .unwrap();
        let mu = PackingMeasure::explicit(vec![0.2, 0.2, 0.2, 0.05, 0.05], 1.0).unwrap();
        let p = measured_spread(&x, &mu.weights, &[0, 1, 2, 3, 4], 0.9);
        assert!((p - 0.6).abs() < 1e-12);
        let out = boost_spread(&x, &mu, 0.9, p, 3, 0.2, 0.9).unwrap();
        assert_eq!(out.kept, vec![3, 4]);
        assert_eq!(out.iterations, 1);
        assert!(out.removed_mass <= p * out.iterations as f64 + 1e-12);
        assert!(boost_spread(&x, &mu, 0.9, 0.1, 3, 0.2, 0.9).is_err());
    }

    #[test]
    fn prune_against_examples() {
        let x1 = basis(3, 3);
        let mu1 = PackingMeasure::explicit(vec![0.1; 3], 1.0).unwrap();
        let x2 = basis(3, 3);
        let mu2 = PackingMeasure::explicit(vec![0.01; 3], 1.0).unwrap();
        let out = prune_against(&x1, &mu1, &x2, &mu2, 0.5, 0.1, 2, 0.1, 0.5).unwrap();
        assert_eq!(out.kept, vec![0, 1, 2]);
        // X2 concentrated along e1
        let h = 0.1f64;
        let r = (1.0 - h * h).sqrt();
        let x2 = Vectors::from_rows(&[[0.0, 1.0, 0.0], [0.0, r, h], [h, r, 0.0]]).unwrap();
        let mu2 = PackingMeasure::explicit(vec![0.2; 3], 1.0).unwrap();
        let out = prune_against(&x1, &mu1, &x2, &mu2, 0.5, 0.1, 2, 0.1, 0.8).unwrap();
        assert_eq!(out.kept, vec![0, 2]);
        assert_eq!(out.triggers, vec![1]);
        let post = prune_postcondition(&x1, &out.kept, &x2, &mu2, 0.8, 0.1);
        assert!(post.pass);
    }

    #[test]
    fn symmetric_prune_examples() {
        let x1 = basis(4, 6);
        let mu1 = PackingMeasure::explicit(vec![0.05; 4], 2.0).unwrap();
        let (y, w) = symmetric_family(&x1, &mu1);
        for k in 0..4 {
            assert_eq!(w[k], w[k + 4]);
            assert_eq!(y.row(k + 4)[k], -1.0);
        }
        let x2 = basis(6, 6);
        let mu2 = PackingMeasure::explicit(vec![0.01; 6], 2.0).unwrap();
        let out = symmetric_prune(&x1, &mu1, &x2, &mu2, 3.0, 0.05, 0.3).unwrap();
        assert_eq!(out.kept, vec![0, 1, 2, 3]);
        assert!(out.post.pass);
        assert!(!out.exhausted);
    }

    #[test]
    fn intersection_examples() {
        let mu = vec![0.5, 0.5];
        let all = vec![vec![0, 1]; 4];
        let (s, m) = find_intersection_subset(&mu, &all, 2).unwrap().unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(m, 1.0);
        assert!(intersection_bound(2, 4) <= 1.0);
        let sets = vec![vec![0], vec![0, 1], vec![1]];
        // total subset mass 2 < 2 ell for ell = 2; total mass above 1
        assert!(find_intersection_subset(&[0.6, 0.4], &sets, 2).is_err());
        assert!(find_intersection_subset(&[1.0, 1.0], &sets, 1).is_err());
        let sets = vec![vec![0, 1], vec![0, 1], vec![0]];
        let (s, _) = find_intersection_subset(&[0.5, 0.5], &sets, 1).unwrap().unwrap();
        assert_eq!(s, vec![0]);
    }

    #[test]
    fn composition_shift_at_half() {
        let a = composition_shift(0.3, 2.0, 0.5).unwrap();
        assert!((a - (0.3f64 * 1.5).sqrt() * 2.0).abs() < 1e-15);
    }
}
