//! Constrained maximum likelihood over mixtures with locations in a ball,
//! by multi-start EM with projection, plus likelihood-ratio statistics and
//! their `log log n` normalized trajectories.
//!
//! For isotropic Gaussian components the projected M-step is the exact
//! maximizer of the EM surrogate over the ball, so the loglik cannot
//! decrease except by rounding. A decrease still freezes the run.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

use crate::density::{self, Dataset, LocationFamily, MixtureParams, ParamBall};
use crate::error::{Error, Result};
use crate::math;
use crate::rng;
use crate::stats::{self, LinearFit};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub starts: usize,
    /// A run stops once one iteration gains less than this.
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions { starts: 20, tol: 1e-6, max_iter: 1000, seed: 0 }
    }
}

impl FitOptions {
    pub fn validate(&self) -> Result<()> {
        if self.starts == 0 {
            return Err(Error::invalid("at least one EM start is required"));
        }
        if !(self.tol >= 0.0) || self.max_iter == 0 {
            return Err(Error::invalid("tol must be nonnegative and max_iter positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub params: MixtureParams,
    /// `log_likelihood(params, data)`, recomputed after the run.
    pub loglik: f64,
    pub iterations: usize,
    pub converged: bool,
    pub starts_used: usize,
    pub best_start_index: usize,
}

/// One EM run from a given initial point.
#[derive(Debug, Clone, PartialEq)]
pub struct EmRun {
    pub params: MixtureParams,
    pub iterations: usize,
    pub converged: bool,
    /// Loglik before each M-step, in order.
    pub trace: Vec<f64>,
}

/// `ℓ_n(f) = Σ_k log f(X_k)`.
pub fn log_likelihood(mix: &MixtureParams, family: &LocationFamily, data: &Dataset) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if mix.dim() != data.dim() || family.dim != data.dim() {
        return Err(Error::invalid("dimension mismatch"));
    }
    Ok(data.iter().map(|x| density::log_density_unchecked(mix, family, x)).sum())
}

/// Run projected EM from `init` and keep the per-iteration loglik.
pub fn run_em(
    data: &Dataset,
    family: &LocationFamily,
    ball: &ParamBall,
    init: &MixtureParams,
    tol: f64,
    max_iter: usize,
) -> Result<EmRun> {
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    if init.dim() != data.dim() || family.dim != data.dim() {
        return Err(Error::invalid("dimension mismatch"));
    }
    let q = init.order();
    let d = data.dim();
    let n = data.len() as f64;
    let c0 = family.max_log_f0();
    let inv2s2 = 0.5 / (family.sigma() * family.sigma());

    let mut weights = init.weights().to_vec();
    let mut locs = init.locations().to_vec();
    for k in 0..q {
        ball.project_in_place(&mut locs[k * d..(k + 1) * d]);
    }
    let mut prev_weights = weights.clone();
    let mut prev_locs = locs.clone();
    let mut prev_ll = f64::NEG_INFINITY;
    let mut trace = Vec::new();
    let mut resp = vec![0.0; q];
    let mut lnw = vec![0.0; q];
    let mut mass = vec![0.0; q];
    let mut sums = vec![0.0; q * d];
    let mut converged = false;
    let mut iterations = 0;

    loop {
        for (l, w) in lnw.iter_mut().zip(&weights) {
            *l = if *w > 0.0 { math::ln(*w) } else { f64::NEG_INFINITY };
        }
        mass.iter_mut().for_each(|v| *v = 0.0);
        sums.iter_mut().for_each(|v| *v = 0.0);
        let mut ll = 0.0;
        for x in data.iter() {
            let mut max = f64::NEG_INFINITY;
            for k in 0..q {
                let v = lnw[k] + c0 - inv2s2 * math::dist_sq(x, &locs[k * d..(k + 1) * d]);
                resp[k] = v;
                if v > max {
                    max = v;
                }
            }
            let mut s = 0.0;
            for r in resp.iter_mut() {
                *r = math::exp(*r - max);
                s += *r;
            }
            ll += max + math::ln(s);
            for k in 0..q {
                let r = resp[k] / s;
                mass[k] += r;
                for j in 0..d {
                    sums[k * d + j] += r * x[j];
                }
            }
        }
        if ll < prev_ll {
            // Keep the previous iterate; a drop beyond `tol` is a real failure.
            weights = prev_weights;
            locs = prev_locs;
            converged = prev_ll - ll <= tol;
            break;
        }
        trace.push(ll);
        if ll - prev_ll < tol {
            converged = true;
            break;
        }
        if iterations == max_iter {
            break;
        }
        prev_ll = ll;
        prev_weights.copy_from_slice(&weights);
        prev_locs.copy_from_slice(&locs);
        for k in 0..q {
            weights[k] = mass[k] / n;
            if mass[k] > 0.0 {
                let theta = &mut locs[k * d..(k + 1) * d];
                for j in 0..d {
                    theta[j] = sums[k * d + j] / mass[k];
                }
                ball.project_in_place(theta);
            }
        }
        iterations += 1;
    }
    let params = MixtureParams::normalized(weights, locs, d)?;
    Ok(EmRun { params, iterations, converged, trace })
}

/// k-means++ style seeding: first center uniform over the data, the rest
/// drawn with probability proportional to squared distance to the nearest
/// chosen center. Centers are projected onto the ball; weights are uniform.
fn kmeanspp_start<R: Rng + ?Sized>(rng: &mut R, data: &Dataset, q: usize, ball: &ParamBall) -> Result<MixtureParams> {
    let d = data.dim();
    let n = data.len();
    let mut locs = Vec::with_capacity(q * d);
    locs.extend_from_slice(data.point(rng.random_range(0..n)));
    let mut dist: Vec<f64> = data.iter().map(|x| math::dist_sq(x, &locs[..d])).collect();
    for _ in 1..q {
        let total: f64 = dist.iter().sum();
        let pick = if total > 0.0 {
            let mut u = rng.random::<f64>() * total;
            let mut idx = n - 1;
            for (i, v) in dist.iter().enumerate() {
                if u < *v {
                    idx = i;
                    break;
                }
                u -= v;
            }
            idx
        } else {
            rng.random_range(0..n)
        };
        let c = data.point(pick).to_vec();
        for (dv, x) in dist.iter_mut().zip(data.iter()) {
            *dv = dv.min(math::dist_sq(x, &c));
        }
        locs.extend_from_slice(&c);
    }
    for k in 0..q {
        ball.project_in_place(&mut locs[k * d..(k + 1) * d]);
    }
    MixtureParams::normalized(vec![1.0; q], locs, d)
}

fn uniform_start<R: Rng + ?Sized>(rng: &mut R, d: usize, q: usize, ball: &ParamBall) -> Result<MixtureParams> {
    let mut locs = vec![0.0; q * d];
    for k in 0..q {
        ball.sample_uniform(rng, &mut locs[k * d..(k + 1) * d]);
    }
    MixtureParams::normalized(vec![1.0; q], locs, d)
}

/// Initial point of start `j` out of `starts`: the first `⌈starts/2⌉` use
/// data seeding, the rest are uniform in the ball. Each start owns the stream
/// `(seed, "em-start", j)`.
pub fn start_params(q: usize, data: &Dataset, ball: &ParamBall, starts: usize, seed: u64, j: usize) -> Result<MixtureParams> {
    let mut rng = rng::stream(seed, "em-start", j as u64);
    if j < starts.div_ceil(2) {
        kmeanspp_start(&mut rng, data, q, ball)
    } else {
        uniform_start(&mut rng, data.dim(), q, ball)
    }
}

/// Evaluate one start; `Ok` carries the run and its recomputed loglik.
pub fn fit_start(
    data: &Dataset,
    family: &LocationFamily,
    ball: &ParamBall,
    init: &MixtureParams,
    opts: &FitOptions,
) -> Result<(EmRun, f64)> {
    let run = run_em(data, family, ball, init, opts.tol, opts.max_iter)?;
    let ll = log_likelihood(&run.params, family, data)?;
    Ok((run, ll))
}

/// Best of a list of evaluated starts, ties to the lower index.
pub fn select_best(runs: Vec<(EmRun, f64)>) -> Result<FitResult> {
    let starts_used = runs.len();
    let mut best: Option<(usize, EmRun, f64)> = None;
    for (i, (run, ll)) in runs.into_iter().enumerate() {
        if best.as_ref().is_none_or(|(_, _, b)| ll > *b) {
            best = Some((i, run, ll));
        }
    }
    let (idx, run, loglik) = best.ok_or_else(|| Error::invalid("no EM starts"))?;
    if !loglik.is_finite() {
        return Err(Error::Divergent);
    }
    Ok(FitResult {
        params: run.params,
        loglik,
        iterations: run.iterations,
        converged: run.converged,
        starts_used,
        best_start_index: idx,
    })
}

/// Every initial point for a fit: `warm` first, then the seeded starts.
pub fn initial_points(
    q: usize,
    data: &Dataset,
    ball: &ParamBall,
    opts: &FitOptions,
    warm: &[MixtureParams],
) -> Result<Vec<MixtureParams>> {
    opts.validate()?;
    if q == 0 {
        return Err(Error::invalid("q must be at least 1"));
    }
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let mut inits = Vec::with_capacity(warm.len() + opts.starts);
    for w in warm {
        if w.order() != q || w.dim() != data.dim() {
            return Err(Error::invalid("warm start has the wrong order or dimension"));
        }
        inits.push(w.clone());
    }
    for j in 0..opts.starts {
        inits.push(start_params(q, data, ball, opts.starts, opts.seed, j)?);
    }
    Ok(inits)
}

/// `sup` of the loglik over `q`-component mixtures with locations in the
/// ball, approximated by the best of the multi-start EM runs.
pub fn fit_constrained(
    q: usize,
    data: &Dataset,
    family: &LocationFamily,
    ball: &ParamBall,
    opts: &FitOptions,
) -> Result<FitResult> {
    fit_constrained_warm(q, data, family, ball, opts, &[])
}

/// As [`fit_constrained`], with extra initial points tried before the
/// seeded ones.
pub fn fit_constrained_warm(
    q: usize,
    data: &Dataset,
    family: &LocationFamily,
    ball: &ParamBall,
    opts: &FitOptions,
    warm: &[MixtureParams],
) -> Result<FitResult> {
    family.validate()?;
    let inits = initial_points(q, data, ball, opts, warm)?;
    let runs = inits.iter().map(|init| fit_start(data, family, ball, init, opts)).collect::<Result<Vec<_>>>()?;
    select_best(runs)
}

/// Warm starts of order `q` grown from a lower-order optimum. The first is
/// the exact split of the heaviest component (same density, so a fit from it
/// can only improve on `params`). Two identical components are a fixed point
/// of EM, so the others split component `k` into `θ_k ± σ/2` along the first
/// axis before padding with exact splits.
pub fn grow_starts(params: &MixtureParams, q: usize, family: &LocationFamily, ball: &ParamBall) -> Vec<MixtureParams> {
    let pad = |mut p: MixtureParams| {
        while p.order() < q {
            p = p.split_heaviest();
        }
        p
    };
    if params.order() >= q {
        return Vec::new();
    }
    let mut out = vec![pad(params.clone())];
    let d = params.dim();
    let offset = 0.5 * family.sigma();
    for k in 0..params.order() {
        let mut weights = params.weights().to_vec();
        weights[k] *= 0.5;
        weights.push(weights[k]);
        let mut locs = params.locations().to_vec();
        let mut twin = params.location(k).to_vec();
        locs[k * d] -= offset;
        twin[0] += offset;
        locs.extend_from_slice(&twin);
        let m = locs.len() / d;
        for j in 0..m {
            ball.project_in_place(&mut locs[j * d..(j + 1) * d]);
        }
        if let Ok(p) = MixtureParams::normalized(weights, locs, d) {
            out.push(pad(p));
        }
    }
    out
}

/// Fits for every order `1..=q_max`, each warm-started from splits of the
/// previous optimum so that scores are nondecreasing in `q`.
pub fn fit_nested(
    q_max: usize,
    data: &Dataset,
    family: &LocationFamily,
    ball: &ParamBall,
    opts: &FitOptions,
) -> Result<Vec<FitResult>> {
    let mut out: Vec<FitResult> = Vec::with_capacity(q_max);
    for q in 1..=q_max {
        let warm = out.last().map(|f| grow_starts(&f.params, q, family, ball)).unwrap_or_default();
        out.push(fit_constrained_warm(q, data, family, ball, opts, &warm)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrStatistic {
    /// `max(raw, 0)`.
    pub value: f64,
    /// `score(q) − score(q_ref)` before clamping.
    pub raw: f64,
}

/// Clamp a likelihood-ratio difference at zero, logging negative values.
pub fn clamp_lr(raw: f64) -> LrStatistic {
    if raw < 0.0 {
        log::warn!("negative likelihood ratio {raw:.3e}; optimizer slack, clamped to 0");
    }
    LrStatistic { value: raw.max(0.0), raw }
}

/// `score(q) − score(q_ref)` for `q ≥ q_ref`. The larger model is
/// warm-started from splits of the smaller optimum.
pub fn lr_statistic(
    q: usize,
    q_ref: usize,
    data: &Dataset,
    family: &LocationFamily,
    ball: &ParamBall,
    opts: &FitOptions,
) -> Result<LrStatistic> {
    if q < q_ref || q_ref == 0 {
        return Err(Error::invalid("need q ≥ q_ref ≥ 1"));
    }
    let small = fit_constrained(q_ref, data, family, ball, opts)?;
    if q == q_ref {
        return Ok(clamp_lr(0.0));
    }
    let warm = grow_starts(&small.params, q, family, ball);
    let big = fit_constrained_warm(q, data, family, ball, opts, &warm)?;
    Ok(clamp_lr(big.loglik - small.loglik))
}

/// The pair of nested models compared along a sample path.
#[derive(Debug, Clone, PartialEq)]
pub enum LilModel {
    /// Known `f*` against one free location in the ball: the regular case,
    /// where the statistic is `n‖x̄ − θ*‖²/2` before truncation.
    RegularMean { fstar: MixtureParams },
    /// `q`-component fit against `q_star`-component fit.
    Mixture { q: usize, q_star: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LilTrajectory {
    pub n: Vec<usize>,
    /// `W_n = LR_n / log log n`.
    pub w: Vec<f64>,
    /// Unclamped `LR_n`.
    pub lr_raw: Vec<f64>,
    pub q: usize,
    pub q_star: usize,
}

impl LilTrajectory {
    pub fn max_w(&self) -> f64 {
        self.w.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Least-squares fit of `W` on `log n`.
    pub fn slope_fit(&self) -> Option<LinearFit> {
        let x: Vec<f64> = self.n.iter().map(|n| math::ln(*n as f64)).collect();
        stats::linear_fit(&x, &self.w)
    }
}

/// `W` at every prefix length in `schedule`, all on the one sample path
/// `data`. Mixture fits at `n_k` are warm-started from the fits at `n_{k−1}`.
pub fn lil_trajectory(
    data: &Dataset,
    family: &LocationFamily,
    ball: &ParamBall,
    model: &LilModel,
    schedule: &[usize],
    opts: &FitOptions,
) -> Result<LilTrajectory> {
    if schedule.is_empty() {
        return Err(Error::invalid("empty schedule"));
    }
    for (i, n) in schedule.iter().enumerate() {
        if *n < 16 {
            return Err(Error::invalid("trajectory sample sizes must be at least 16"));
        }
        if i > 0 && *n <= schedule[i - 1] {
            return Err(Error::invalid("trajectory sample sizes must increase strictly"));
        }
    }
    if *schedule.last().unwrap_or(&0) > data.len() {
        return Err(Error::invalid("schedule exceeds the sample path"));
    }
    let (q, q_star) = match model {
        LilModel::RegularMean { fstar } => {
            if fstar.order() != 1 {
                return Err(Error::invalid("regular model needs a single-component truth"));
            }
            (1, 0)
        }
        LilModel::Mixture { q, q_star } => {
            if *q_star == 0 || q <= q_star {
                return Err(Error::invalid("mixture trajectory needs q > q* ≥ 1"));
            }
            (*q, *q_star)
        }
    };
    let mut w = Vec::with_capacity(schedule.len());
    let mut lr_raw = Vec::with_capacity(schedule.len());
    let mut prev: Option<(MixtureParams, MixtureParams)> = None;
    for &n in schedule {
        let prefix = data.prefix(n)?;
        let raw = match model {
            LilModel::RegularMean { fstar } => {
                let free = fit_constrained(1, &prefix, family, ball, opts)?;
                free.loglik - log_likelihood(fstar, family, &prefix)?
            }
            LilModel::Mixture { .. } => {
                let warm_small: Vec<MixtureParams> = prev.iter().map(|p| p.0.clone()).collect();
                let small = fit_constrained_warm(q_star, &prefix, family, ball, opts, &warm_small)?;
                let mut warm_big = grow_starts(&small.params, q, family, ball);
                if let Some(p) = &prev {
                    warm_big.push(p.1.clone());
                }
                let big = fit_constrained_warm(q, &prefix, family, ball, opts, &warm_big)?;
                let raw = big.loglik - small.loglik;
                prev = Some((small.params, big.params));
                raw
            }
        };
        let lr = clamp_lr(raw);
        lr_raw.push(lr.raw);
        w.push(lr.value / math::ln_ln(n as f64));
    }
    Ok(LilTrajectory { n: schedule.to_vec(), w, lr_raw, q, q_star })
}
