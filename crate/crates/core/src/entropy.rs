//! Empirical entropy of Hellinger balls `ℋ_q(ε) = {√(f/f*) : h(f, f*) ≤ ε}`
//! and of weighted classes `𝒟_q = {d_f}`, measured by greedy packing in
//! `L²(f* dμ)`.
//!
//! Bracketing numbers are not computable, so packing counts stand in for
//! them. A `δ`-packing never exceeds a `δ/2`-cover, which never exceeds the
//! `δ`-bracketing number, so packing counts are lower bounds.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::Exp1;

use crate::density::{MixtureParams, ParamBall};
use crate::divergence::{QuadratureGrid, HELLINGER_FLOOR};
use crate::error::{Error, Result};
use crate::math;
use crate::rng;
use crate::stats::{self, LinearFit};

/// Below this acceptance rate the class is declared unreachable.
pub const MIN_ACCEPTANCE: f64 = 1e-4;
/// Candidates drawn before the acceptance-rate guard applies.
pub const GUARD_CANDIDATES: u64 = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ClassKind {
    HellingerBall { q: usize, epsilon: f64 },
    WeightedClass { q: usize },
}

impl ClassKind {
    pub fn q(&self) -> usize {
        match *self {
            ClassKind::HellingerBall { q, .. } | ClassKind::WeightedClass { q } => q,
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ClassKind::HellingerBall { q, epsilon } if q == 0 || !(epsilon > 0.0) => {
                Err(Error::invalid("Hellinger ball needs q ≥ 1 and ε > 0"))
            }
            ClassKind::WeightedClass { q: 0 } => Err(Error::invalid("q must be at least 1")),
            _ => Ok(()),
        }
    }
}

/// Functions evaluated at the grid nodes. Rows are stored multiplied by
/// `√(f* weight)` so the `L²(f* dμ)` distance is the Euclidean one.
#[derive(Debug, Clone, PartialEq)]
pub struct FunctionCloud {
    kind: ClassKind,
    width: usize,
    rows: Vec<f64>,
    params: Vec<MixtureParams>,
    hellinger: Vec<f64>,
    candidates: u64,
    seed: u64,
}

impl FunctionCloud {
    /// Cloud from explicit node values (unscaled) and `h(f, f*)` per row.
    pub fn from_values(kind: ClassKind, grid: &QuadratureGrid, values: &[Vec<f64>], hellinger: Vec<f64>) -> Result<FunctionCloud> {
        if values.len() != hellinger.len() {
            return Err(Error::invalid("one Hellinger value per row"));
        }
        let sw: Vec<f64> = grid.fstar_weights().iter().map(|w| math::sqrt(*w)).collect();
        let mut rows = Vec::with_capacity(values.len() * sw.len());
        for v in values {
            if v.len() != sw.len() {
                return Err(Error::invalid("row length must match the grid"));
            }
            rows.extend(v.iter().zip(&sw).map(|(a, b)| a * b));
        }
        Ok(FunctionCloud { kind, width: sw.len(), rows, params: Vec::new(), hellinger, candidates: values.len() as u64, seed: 0 })
    }

    pub fn kind(&self) -> ClassKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.hellinger.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hellinger.is_empty()
    }

    /// Scaled row `i`.
    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i * self.width..(i + 1) * self.width]
    }

    /// Generating parameters (empty for clouds built from raw values).
    pub fn params(&self) -> &[MixtureParams] {
        &self.params
    }

    /// `h(f, f*)` of each row's generating density.
    pub fn hellinger(&self) -> &[f64] {
        &self.hellinger
    }

    pub fn candidates(&self) -> u64 {
        self.candidates
    }

    pub fn acceptance_rate(&self) -> f64 {
        self.len() as f64 / self.candidates.max(1) as f64
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// `L²(f* dμ)` norm of row `i`.
    pub fn row_norm(&self, i: usize) -> f64 {
        math::sqrt(self.row(i).iter().map(|v| v * v).sum())
    }

    pub fn distance(&self, i: usize, j: usize) -> f64 {
        math::sqrt(dist_sq(self.row(i), self.row(j)))
    }

    /// Rows whose density lies within `h ≤ δ` of `f*`, in original order.
    /// On a Hellinger-ball cloud this is a cloud for the smaller ball.
    pub fn restrict(&self, delta: f64) -> Result<FunctionCloud> {
        let ClassKind::HellingerBall { q, epsilon } = self.kind else {
            return Err(Error::invalid("restriction applies to Hellinger-ball clouds"));
        };
        if !(delta > 0.0 && delta <= epsilon) {
            return Err(Error::invalid("restriction radius must lie in (0, ε]"));
        }
        let mut out = FunctionCloud {
            kind: ClassKind::HellingerBall { q, epsilon: delta },
            width: self.width,
            rows: Vec::new(),
            params: Vec::new(),
            hellinger: Vec::new(),
            candidates: self.candidates,
            seed: self.seed,
        };
        for i in 0..self.len() {
            if self.hellinger[i] <= delta {
                out.rows.extend_from_slice(self.row(i));
                out.hellinger.push(self.hellinger[i]);
                if let Some(p) = self.params.get(i) {
                    out.params.push(p.clone());
                }
            }
        }
        Ok(out)
    }
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// `‖a − b‖² ≤ limit`, stopping as soon as the partial sum exceeds it.
fn within(a: &[f64], b: &[f64], limit: f64) -> bool {
    let mut s = 0.0;
    for (chunk_a, chunk_b) in a.chunks(8).zip(b.chunks(8)) {
        s += dist_sq(chunk_a, chunk_b);
        if s > limit {
            return false;
        }
    }
    true
}

/// Draws candidate mixtures (weights uniform on the simplex, locations
/// uniform in the ball) and evaluates them on the grid. Candidate `c` uses
/// stream `(seed, "cloud", c)`, so candidates can be evaluated in any order.
pub struct CloudSampler<'a> {
    kind: ClassKind,
    grid: &'a QuadratureGrid,
    ball: ParamBall,
    seed: u64,
    sqrt_w: Vec<f64>,
}

/// Accepted candidate: parameters, scaled row, `h(f, f*)`.
pub type Accepted = (MixtureParams, Vec<f64>, f64);

impl<'a> CloudSampler<'a> {
    pub fn new(kind: ClassKind, grid: &'a QuadratureGrid, ball: ParamBall, seed: u64) -> Result<Self> {
        kind.validate()?;
        let sqrt_w = grid.fstar_weights().iter().map(|w| math::sqrt(*w)).collect();
        Ok(CloudSampler { kind, grid, ball, seed, sqrt_w })
    }

    pub fn candidate(&self, c: u64) -> Option<Accepted> {
        let mut rng = rng::stream(self.seed, "cloud", c);
        let q = self.kind.q();
        let d = self.grid.dim();
        let mut weights: Vec<f64> = (0..q).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let mut locs = vec![0.0; q * d];
        for k in 0..q {
            self.ball.sample_uniform(&mut rng, &mut locs[k * d..(k + 1) * d]);
        }
        // Normalized above; construction cannot fail.
        let mix = MixtureParams::normalized(weights, locs, d).ok()?;
        let lf = self.grid.log_density_at_nodes(&mix);
        let centered: Vec<f64> = lf.iter().zip(self.grid.log_fstar()).map(|(a, b)| math::expm1(0.5 * (a - b))).collect();
        let h2: f64 = centered.iter().zip(self.grid.fstar_weights()).map(|(v, w)| w * v * v).sum();
        let h = math::sqrt(h2);
        let row = match self.kind {
            ClassKind::HellingerBall { epsilon, .. } => {
                if h > epsilon {
                    return None;
                }
                centered.iter().zip(&self.sqrt_w).map(|(v, s)| (1.0 + v) * s).collect()
            }
            ClassKind::WeightedClass { .. } => {
                if h <= HELLINGER_FLOOR {
                    return None;
                }
                centered.iter().zip(&self.sqrt_w).map(|(v, s)| v / h * s).collect()
            }
        };
        Some((mix, row, h))
    }

    pub fn builder(&self, n_functions: usize, max_candidates: u64) -> Result<CloudBuilder> {
        if n_functions < 100 {
            return Err(Error::invalid("a cloud needs at least 100 functions"));
        }
        if max_candidates == 0 {
            return Err(Error::invalid("rejection budget must be positive"));
        }
        Ok(CloudBuilder {
            cloud: FunctionCloud {
                kind: self.kind,
                width: self.sqrt_w.len(),
                rows: Vec::with_capacity(n_functions * self.sqrt_w.len()),
                params: Vec::with_capacity(n_functions),
                hellinger: Vec::with_capacity(n_functions),
                candidates: 0,
                seed: self.seed,
            },
            target: n_functions,
            max_candidates,
        })
    }
}

/// Consumes candidate outcomes in index order and applies the acceptance
/// guard; the result is independent of how candidates were evaluated.
pub struct CloudBuilder {
    cloud: FunctionCloud,
    target: usize,
    max_candidates: u64,
}

impl CloudBuilder {
    /// Feed the outcome of the next candidate; `Ok(true)` once complete.
    pub fn push(&mut self, outcome: Option<Accepted>) -> Result<bool> {
        if self.is_done() {
            return Ok(true);
        }
        self.cloud.candidates += 1;
        if let Some((p, row, h)) = outcome {
            self.cloud.params.push(p);
            self.cloud.rows.extend(row);
            self.cloud.hellinger.push(h);
        }
        if self.is_done() {
            return Ok(true);
        }
        let rate = self.cloud.acceptance_rate();
        if (self.cloud.candidates >= GUARD_CANDIDATES && rate < MIN_ACCEPTANCE) || self.cloud.candidates >= self.max_candidates {
            return Err(Error::BallTooSmall { acceptance_rate: rate });
        }
        Ok(false)
    }

    pub fn is_done(&self) -> bool {
        self.cloud.len() >= self.target
    }

    /// Index of the next candidate to feed.
    pub fn next_index(&self) -> u64 {
        self.cloud.candidates
    }

    pub fn finish(self) -> Result<FunctionCloud> {
        if !self.is_done() {
            return Err(Error::invalid("cloud is incomplete"));
        }
        Ok(self.cloud)
    }
}

/// Rejection-sample `n_functions` members of the class.
pub fn sample_class(
    kind: ClassKind,
    grid: &QuadratureGrid,
    ball: &ParamBall,
    n_functions: usize,
    seed: u64,
    max_candidates: u64,
) -> Result<FunctionCloud> {
    let sampler = CloudSampler::new(kind, grid, *ball, seed)?;
    let mut builder = sampler.builder(n_functions, max_candidates)?;
    let mut c = 0;
    while !builder.push(sampler.candidate(c))? {
        c += 1;
    }
    builder.finish()
}

/// Size of the greedy `δ`-packing (pairwise distances `> δ`) built by
/// scanning rows in order.
pub fn greedy_packing(cloud: &FunctionCloud, delta: f64) -> Result<usize> {
    if !(delta > 0.0) {
        return Err(Error::invalid("δ must be positive"));
    }
    Ok(extend_packing(cloud, delta, Vec::new()).len())
}

fn extend_packing(cloud: &FunctionCloud, delta: f64, mut centers: Vec<usize>) -> Vec<usize> {
    let limit = delta * delta;
    let mut is_center = vec![false; cloud.len()];
    for c in &centers {
        is_center[*c] = true;
    }
    for i in 0..cloud.len() {
        if is_center[i] {
            continue;
        }
        let row = cloud.row(i);
        if centers.iter().all(|c| !within(row, cloud.row(*c), limit)) {
            centers.push(i);
            is_center[i] = true;
        }
    }
    centers
}

/// Greedy set cover of the cloud by closed `δ`-balls centered at cloud
/// members. Quadratic in the cloud size.
pub fn greedy_covering(cloud: &FunctionCloud, delta: f64) -> Result<usize> {
    if !(delta > 0.0) {
        return Err(Error::invalid("δ must be positive"));
    }
    let m = cloud.len();
    let limit = delta * delta;
    let mut neighbors: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..m {
        neighbors[i].push(i);
        for j in 0..i {
            if within(cloud.row(i), cloud.row(j), limit) {
                neighbors[i].push(j);
                neighbors[j].push(i);
            }
        }
    }
    let mut covered = vec![false; m];
    let mut gain: Vec<usize> = neighbors.iter().map(Vec::len).collect();
    let mut left = m;
    let mut count = 0;
    while left > 0 {
        let mut best = 0;
        for i in 1..m {
            if gain[i] > gain[best] {
                best = i;
            }
        }
        count += 1;
        for &j in &neighbors[best].clone() {
            if !covered[j] {
                covered[j] = true;
                left -= 1;
                for &k in &neighbors[j] {
                    gain[k] -= 1;
                }
            }
        }
    }
    Ok(count)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PackingResult {
    pub deltas: Vec<f64>,
    pub counts: Vec<usize>,
    /// Seed of the cloud whose row order drove the greedy scan.
    pub order_seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentFit {
    /// `η̂`, the slope of `log M` against `log(ε/δ)`.
    pub eta_hat: f64,
    /// Intercept `log K̂`.
    pub log_k_hat: f64,
    pub r2: f64,
    pub residual_rms: f64,
    pub delta_min: f64,
    pub delta_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EntropyCurve {
    pub packing: PackingResult,
    pub fit: ExponentFit,
    /// `18(d+1)q + 1`.
    pub exponent_bound: f64,
    /// `η̂` above the bound: a red flag, not an error.
    pub exceeds_bound: bool,
}

/// Packing counts on nested greedy packings over `deltas`, largest first:
/// each packing extends the previous one, so counts are nonincreasing in `δ`.
pub fn packing_counts(cloud: &FunctionCloud, deltas: &[f64]) -> Result<Vec<usize>> {
    if deltas.iter().any(|d| !(*d > 0.0)) {
        return Err(Error::invalid("δ must be positive"));
    }
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|a, b| deltas[*b].total_cmp(&deltas[*a]));
    let mut counts = vec![0; deltas.len()];
    let mut centers = Vec::new();
    for i in order {
        centers = extend_packing(cloud, deltas[i], centers);
        counts[i] = centers.len();
    }
    Ok(counts)
}

fn check_geometric(deltas: &[f64]) -> Result<()> {
    if deltas.len() < 4 {
        return Err(Error::invalid("exponent fit needs at least four δ values"));
    }
    let r0 = deltas[1] / deltas[0];
    let geometric = deltas.windows(2).all(|w| math::abs(w[1] / w[0] - r0) <= 1e-9 * r0);
    if !geometric || r0 == 1.0 || !(r0 > 0.0) {
        return Err(Error::invalid("δ-grid must be geometric"));
    }
    Ok(())
}

/// `δ_k = ε·ratio^k` for `k = 0 … points − 1`, with `0 < ratio < 1`.
pub fn geometric_deltas(epsilon: f64, ratio: f64, points: usize) -> Vec<f64> {
    (0..points).map(|k| epsilon * math::pow(ratio, k as f64)).collect()
}

/// Packing counts over a geometric `δ`-grid in `(0, ε]` and the least
/// squares fit `log M(δ) ≈ η̂·log(ε/δ) + log K̂`. For weighted classes `ε`
/// is taken as 1. `dim` enters only the exponent bound.
pub fn entropy_curve(cloud: &FunctionCloud, deltas: &[f64], dim: usize) -> Result<EntropyCurve> {
    check_geometric(deltas)?;
    let (q, eps) = match cloud.kind() {
        ClassKind::HellingerBall { q, epsilon } => (q, epsilon),
        ClassKind::WeightedClass { q } => (q, 1.0),
    };
    if deltas.iter().any(|d| !(*d > 0.0) || (matches!(cloud.kind(), ClassKind::HellingerBall { .. }) && *d > eps)) {
        return Err(Error::invalid("δ-grid must lie in (0, ε]"));
    }
    let counts = packing_counts(cloud, deltas)?;
    if counts.iter().all(|c| *c == counts[0]) {
        return Err(Error::InsufficientResolution);
    }
    let x: Vec<f64> = deltas.iter().map(|d| math::ln(eps / d)).collect();
    let y: Vec<f64> = counts.iter().map(|c| math::ln(*c as f64)).collect();
    let LinearFit { slope, intercept, r2, residual_rms, .. } = stats::linear_fit(&x, &y).ok_or(Error::InsufficientResolution)?;
    let exponent_bound = 18.0 * (dim as f64 + 1.0) * q as f64 + 1.0;
    let exceeds_bound = slope > exponent_bound;
    if exceeds_bound {
        log::warn!("fitted entropy exponent {slope:.3} exceeds the bound {exponent_bound}");
    }
    let fit = ExponentFit {
        eta_hat: slope,
        log_k_hat: intercept,
        r2,
        residual_rms,
        delta_min: deltas.iter().copied().fold(f64::INFINITY, f64::min),
        delta_max: deltas.iter().copied().fold(0.0, f64::max),
    };
    Ok(EntropyCurve { packing: PackingResult { deltas: deltas.to_vec(), counts, order_seed: cloud.seed() }, fit, exponent_bound, exceeds_bound })
}

/// Constants of a global bound `N(𝒟, ε) ≤ (C₀/ε)^q̂` for `ε ≤ ε₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalConstants {
    pub exponent: f64,
    pub c0: f64,
    pub eps0: f64,
    pub curve: EntropyCurve,
}

/// Fit the weighted-class exponent on `eps_grid`, then take the smallest
/// `C₀ ≥ 1` with `M(ε/2) ≤ (C₀/ε)^q̂` at every grid point. The packing at
/// `ε/2` is the bracketing proxy, which absorbs the factor-2 gap between
/// packing and bracketing.
pub fn global_constants(weighted: &FunctionCloud, eps_grid: &[f64], dim: usize) -> Result<GlobalConstants> {
    if !matches!(weighted.kind(), ClassKind::WeightedClass { .. }) {
        return Err(Error::invalid("global constants come from a weighted-class cloud"));
    }
    let curve = entropy_curve(weighted, eps_grid, dim)?;
    let exponent = curve.fit.eta_hat;
    if !(exponent > 0.0) {
        return Err(Error::InsufficientResolution);
    }
    let halves: Vec<f64> = eps_grid.iter().map(|e| e / 2.0).collect();
    let counts = packing_counts(weighted, &halves)?;
    let mut c0: f64 = 1.0;
    for (e, m) in eps_grid.iter().zip(counts) {
        c0 = c0.max(e * math::pow(m as f64, 1.0 / exponent));
    }
    let eps0 = eps_grid.iter().copied().fold(0.0, f64::max);
    Ok(GlobalConstants { exponent, c0, eps0, curve })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalGlobalCase {
    pub delta: f64,
    pub rho: f64,
    pub packing: usize,
    /// `(C₁δ/ρ)^{q̂+1}`.
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalGlobalReport {
    pub exponent: f64,
    pub c0: f64,
    pub eps0: f64,
    pub c1: f64,
    pub r_norm: f64,
    pub cases: Vec<LocalGlobalCase>,
}

impl LocalGlobalReport {
    pub fn all_hold(&self) -> bool {
        self.cases.iter().all(|c| c.holds)
    }
}

/// Admissible widths: `ρ/δ < 4 ∧ 2‖R‖₂`.
pub fn local_global_admissible(delta: f64, rho: f64, r_norm: f64) -> bool {
    delta > 0.0 && rho > 0.0 && rho / delta < 4.0f64.min(2.0 * r_norm)
}

/// Check `M(ℋ(δ), ρ) ≤ (C₁δ/ρ)^{q̂+1}` with `C₁ = 8C₀(1 ∨ ‖R‖₂/4ε₀)` for
/// each `(δ, ρ)`. `ball` is a Hellinger-ball cloud with radius at least every
/// `δ`; `ℋ(δ)` is its restriction. `r_norm` is `‖R‖₂` for an envelope
/// `R ≥ sup |d_f|`.
pub fn check_local_global(
    constants: &GlobalConstants,
    ball: &FunctionCloud,
    r_norm: f64,
    pairs: &[(f64, f64)],
) -> Result<LocalGlobalReport> {
    if !(r_norm > 0.0) {
        return Err(Error::invalid("envelope norm must be positive"));
    }
    for (delta, rho) in pairs {
        if !local_global_admissible(*delta, *rho, r_norm) {
            return Err(Error::invalid("need ρ/δ < 4 ∧ 2‖R‖₂"));
        }
    }
    let c1 = 8.0 * constants.c0 * (1.0f64).max(r_norm / (4.0 * constants.eps0));
    let mut cases = Vec::with_capacity(pairs.len());
    for &(delta, rho) in pairs {
        let sub = ball.restrict(delta)?;
        let packing = greedy_packing(&sub, rho)?;
        let bound = math::pow(c1 * delta / rho, constants.exponent + 1.0);
        cases.push(LocalGlobalCase { delta, rho, packing, bound, holds: packing as f64 <= bound });
    }
    Ok(LocalGlobalReport { exponent: constants.exponent, c0: constants.c0, eps0: constants.eps0, c1, r_norm, cases })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::LocationFamily;
    use crate::divergence::{build_grid, Scheme};

    fn setup() -> QuadratureGrid {
        let fstar = MixtureParams::single(&[0.0]).unwrap();
        build_grid(&fstar, &LocationFamily::standard(1), Scheme::TensorGaussHermite { order: 40, scale: Some(1.5) }).unwrap()
    }

    #[test]
    fn whole_space_ball_accepts_everything() {
        let grid = setup();
        let ball = ParamBall::new(2.0).unwrap();
        let cloud = sample_class(ClassKind::HellingerBall { q: 1, epsilon: 1.5 }, &grid, &ball, 100, 1, 1000).unwrap();
        assert_eq!(cloud.candidates(), 100);
    }

    #[test]
    fn membership_matches_closed_form() {
        let grid = setup();
        let ball = ParamBall::new(2.0).unwrap();
        let cloud = sample_class(ClassKind::HellingerBall { q: 1, epsilon: 0.2 }, &grid, &ball, 200, 3, 100_000).unwrap();
        let limit = (8.0 * -(1.0 - 0.02f64).ln()).sqrt();
        for p in cloud.params() {
            assert!(p.location(0)[0].abs() <= limit + 1e-9);
        }
        let rate = cloud.acceptance_rate();
        assert!((rate - limit / 2.0).abs() < 0.1, "{rate}");
    }

    #[test]
    fn weighted_rows_have_unit_norm() {
        let grid = setup();
        let ball = ParamBall::new(1.0).unwrap();
        let cloud = sample_class(ClassKind::WeightedClass { q: 2 }, &grid, &ball, 100, 5, 1000).unwrap();
        for i in 0..cloud.len() {
            assert!((cloud.row_norm(i) - 1.0).abs() < 1e-4);
        }
    }

    #[test]
    fn unreachable_ball_is_reported() {
        let grid = setup();
        let ball = ParamBall::new(2.0).unwrap();
        let err = sample_class(ClassKind::HellingerBall { q: 3, epsilon: 1e-6 }, &grid, &ball, 100, 0, 1_000_000).unwrap_err();
        assert!(matches!(err, Error::BallTooSmall { .. }));
    }

    #[test]
    fn packing_small_cases() {
        let grid = setup();
        let m = grid.len();
        let unit = 1.0 / grid.fstar_weights().iter().sum::<f64>().sqrt();
        let a = vec![0.0; m];
        let b = vec![0.5 * unit; m];
        let cloud = FunctionCloud::from_values(ClassKind::WeightedClass { q: 1 }, &grid, &[a, b], vec![1.0, 1.0]).unwrap();
        assert!((cloud.distance(0, 1) - 0.5).abs() < 1e-12);
        assert_eq!(greedy_packing(&cloud, 0.4).unwrap(), 2);
        assert_eq!(greedy_packing(&cloud, 0.6).unwrap(), 1);
        assert!(greedy_packing(&cloud, 0.0).is_err());
        assert_eq!(greedy_covering(&cloud, 0.6).unwrap(), 1);
    }

    #[test]
    fn identical_functions_give_insufficient_resolution() {
        let grid = setup();
        let rows = vec![vec![1.0; grid.len()]; 10];
        let cloud = FunctionCloud::from_values(ClassKind::HellingerBall { q: 1, epsilon: 0.2 }, &grid, &rows, vec![0.0; 10]).unwrap();
        let deltas = geometric_deltas(0.2, 0.7, 5);
        assert!(matches!(entropy_curve(&cloud, &deltas, 1), Err(Error::InsufficientResolution)));
    }

    #[test]
    fn local_global_boundary() {
        assert!(local_global_admissible(1.0, 3.999, 10.0));
        assert!(!local_global_admissible(1.0, 4.0, 10.0));
        assert!(!local_global_admissible(1.0, 4.001, 10.0));
        assert!(!local_global_admissible(1.0, 1.0, 0.5));
    }

    #[test]
    fn geometric_grid_check() {
        assert!(check_geometric(&geometric_deltas(0.2, 0.8, 6)).is_ok());
        assert!(check_geometric(&[0.2, 0.1, 0.05]).is_err());
        assert!(check_geometric(&[0.2, 0.1, 0.05, 0.02]).is_err());
    }
}
