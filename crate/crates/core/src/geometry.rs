//! Local geometry of a mixture class around a nondegenerate truth `f*`:
//! the partition `A₀ … A_{q*}`, the pseudodistance `N`, the envelopes
//! `H₀ … H₃` with the derived `S` and `D = 2S`, and the empirical study of
//! the ratio `h(f, f*)/N(f)`.

use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::density::{self, LocationFamily, MixtureParams, ParamBall};
use crate::divergence::{self, QuadratureGrid, HELLINGER_FLOOR};
use crate::error::{Error, Result};
use crate::math;
use crate::rng;
use crate::stats;

const MAX_ROTATION_TRIES: usize = 64;

/// Balls `A_i = B(θ_i*, radius)` around the true centers together with the
/// directions `u_1 … u_d` along which their projections are disjoint.
/// `A₀` is the complement of their union.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    dim: usize,
    centers: Vec<f64>,
    weights: Vec<f64>,
    /// Row `j` is `u_j`.
    directions: Vec<f64>,
    epsilon: f64,
    radius: f64,
}

impl Partition {
    pub fn order(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    /// Smallest projected gap between true centers (`+∞` for `q* = 1`).
    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn center(&self, i: usize) -> &[f64] {
        &self.centers[i * self.dim..(i + 1) * self.dim]
    }

    pub fn direction(&self, j: usize) -> &[f64] {
        &self.directions[j * self.dim..(j + 1) * self.dim]
    }

    /// Same centers and directions with another ball radius. Fails when the
    /// projections would overlap.
    pub fn with_radius(&self, radius: f64) -> Result<Partition> {
        if !(radius > 0.0) {
            return Err(Error::invalid("partition radius must be positive"));
        }
        let p = Partition { radius, ..self.clone() };
        if !p.projections_disjoint() {
            return Err(Error::invalid("radius makes projected cells overlap"));
        }
        Ok(p)
    }

    /// Cell index of `θ`: `0` for `A₀`, `i ≥ 1` for `A_i`.
    pub fn cell_of(&self, theta: &[f64]) -> usize {
        for i in 0..self.order() {
            if math::sqrt(math::dist_sq(theta, self.center(i))) < self.radius {
                return i + 1;
            }
        }
        0
    }

    /// Interval check: along each `u_j` the open intervals
    /// `⟨θ_i*, u_j⟩ ± radius` are pairwise disjoint.
    pub fn projections_disjoint(&self) -> bool {
        for j in 0..self.dim {
            let u = self.direction(j);
            let proj: Vec<f64> = (0..self.order()).map(|i| dot(self.center(i), u)).collect();
            for a in 0..proj.len() {
                for b in 0..a {
                    if math::abs(proj[a] - proj[b]) < 2.0 * self.radius {
                        return false;
                    }
                }
            }
        }
        true
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Haar-random rotation; rows are orthonormal with determinant +1.
fn random_rotation<R: Rng + ?Sized>(rng: &mut R, d: usize) -> Vec<f64> {
    if d == 1 {
        return vec![1.0];
    }
    loop {
        let mut m: Vec<f64> = (0..d * d).map(|_| rng.sample(StandardNormal)).collect();
        let mut ok = true;
        for i in 0..d {
            for k in 0..i {
                let proj = dot(&m[i * d..(i + 1) * d], &m[k * d..(k + 1) * d]);
                for c in 0..d {
                    m[i * d + c] -= proj * m[k * d + c];
                }
            }
            let nrm = math::norm(&m[i * d..(i + 1) * d]);
            if nrm < 1e-10 {
                ok = false;
                break;
            }
            m[i * d..(i + 1) * d].iter_mut().for_each(|v| *v /= nrm);
        }
        if !ok {
            continue;
        }
        if determinant(&m, d) < 0.0 {
            m[..d].iter_mut().for_each(|v| *v = -*v);
        }
        return m;
    }
}

fn determinant(m: &[f64], d: usize) -> f64 {
    let mut a = m.to_vec();
    let mut det = 1.0;
    for c in 0..d {
        let mut piv = c;
        for r in c + 1..d {
            if math::abs(a[r * d + c]) > math::abs(a[piv * d + c]) {
                piv = r;
            }
        }
        if a[piv * d + c] == 0.0 {
            return 0.0;
        }
        if piv != c {
            for k in 0..d {
                a.swap(c * d + k, piv * d + k);
            }
            det = -det;
        }
        det *= a[c * d + c];
        for r in c + 1..d {
            let f = a[r * d + c] / a[c * d + c];
            for k in c..d {
                a[r * d + k] -= f * a[c * d + k];
            }
        }
    }
    det
}

/// Draw directions from a random rotation until every direction separates
/// all true centers, then take `A_i = B(θ_i*, ε/4)` with
/// `ε = min_k min_{i≠j} |⟨θ_i* − θ_j*, u_k⟩|`. For `q* = 1` the single cell
/// is all of ℝ^d.
pub fn build_partition(fstar: &MixtureParams, seed: u64) -> Result<Partition> {
    fstar.check_nondegenerate()?;
    let d = fstar.dim();
    let q = fstar.order();
    let mut rng = rng::stream(seed, "partition", 0);
    for _ in 0..MAX_ROTATION_TRIES {
        let directions = random_rotation(&mut rng, d);
        let mut epsilon = f64::INFINITY;
        for k in 0..d {
            let u = &directions[k * d..(k + 1) * d];
            for i in 0..q {
                for j in 0..i {
                    let gap = math::abs(dot(fstar.location(i), u) - dot(fstar.location(j), u));
                    epsilon = epsilon.min(gap);
                }
            }
        }
        if epsilon > 0.0 {
            return Ok(Partition {
                dim: d,
                centers: fstar.locations().to_vec(),
                weights: fstar.weights().to_vec(),
                directions,
                epsilon,
                radius: epsilon / 4.0,
            });
        }
    }
    Err(Error::InvalidModel("no rotation separates the true centers".into()))
}

/// `N(f) = Σ_{θ_j∈A₀} π_j + Σ_i { |Σ_{A_i} π_j − π_i*| + ‖Σ_{A_i} π_j(θ_j − θ_i*)‖
/// + ½ Σ_{A_i} π_j ‖θ_j − θ_i*‖² }`.
pub fn pseudodistance(f: &MixtureParams, part: &Partition) -> Result<f64> {
    if f.dim() != part.dim {
        return Err(Error::invalid("dimension mismatch"));
    }
    let q = part.order();
    let d = part.dim;
    let mut stray = 0.0;
    let mut mass = vec![0.0; q];
    let mut first = vec![0.0; q * d];
    let mut second = vec![0.0; q];
    for (w, theta) in f.components() {
        match part.cell_of(theta) {
            0 => stray += w,
            c => {
                let i = c - 1;
                mass[i] += w;
                let center = part.center(i);
                for k in 0..d {
                    first[i * d + k] += w * (theta[k] - center[k]);
                }
                second[i] += 0.5 * w * math::dist_sq(theta, center);
            }
        }
    }
    let mut total = stray;
    for i in 0..q {
        total += math::abs(mass[i] - part.weights[i]) + math::norm(&first[i * d..(i + 1) * d]) + second[i];
    }
    Ok(total)
}

/// Norms of the envelopes in `L^p(f* dμ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeNorms {
    pub h0_l4: f64,
    pub h1_l4: f64,
    pub h2_l4: f64,
    pub h3_l2: f64,
}

impl EnvelopeNorms {
    /// Integrability part of Assumption A: all four norms finite.
    pub fn assumption_a(&self) -> bool {
        [self.h0_l4, self.h1_l4, self.h2_l4, self.h3_l2].iter().all(|v| v.is_finite())
    }
}

/// `H_k(x) = sup_{θ∈Θ} max |∂^k f_θ(x)/∂θ^k| / f*(x)` over the ball `Θ`.
#[derive(Debug, Clone)]
pub struct EnvelopeSet {
    family: LocationFamily,
    fstar: MixtureParams,
    ball: ParamBall,
    norms: EnvelopeNorms,
}

const RAY_SCAN: usize = 65;

impl EnvelopeSet {
    pub fn norms(&self) -> EnvelopeNorms {
        self.norms
    }

    pub fn ball(&self) -> ParamBall {
        self.ball
    }

    pub fn dim(&self) -> usize {
        self.family.dim
    }

    /// `log H_k(x)` for `k ∈ {0, 1, 2, 3}`.
    ///
    /// `H₀` is exact: the sup of a radially decreasing `f₀(x − θ)` sits at the
    /// projection of `x` onto the ball. For `k ≥ 1` the sup is taken along the
    /// ray `θ = t·x/‖x‖, |t| ≤ T` (coarse scan, then golden section), which is
    /// exact in one dimension and a lower bound otherwise.
    pub fn log_h(&self, k: usize, x: &[f64]) -> f64 {
        let log_fstar = density::log_density_unchecked(&self.fstar, &self.family, x);
        self.log_h_sup(k, x) - log_fstar
    }

    pub fn h(&self, k: usize, x: &[f64]) -> f64 {
        math::exp(self.log_h(k, x))
    }

    fn log_h_sup(&self, k: usize, x: &[f64]) -> f64 {
        let fam = &self.family;
        if k == 0 {
            let theta = self.ball.project(x);
            return fam.log_f0_shifted(x, &theta);
        }
        let d = fam.dim;
        let t_max = self.ball.radius();
        let r = math::norm(x);
        let mut u = vec![0.0; d];
        if r > 0.0 {
            u.iter_mut().zip(x).for_each(|(a, b)| *a = b / r);
        } else {
            u[0] = 1.0;
        }
        let mut y = vec![0.0; d];
        let mut objective = |t: f64| -> f64 {
            for j in 0..d {
                y[j] = x[j] - t * u[j];
            }
            let ratio = fam.derivative_ratio_max(k, &y);
            if ratio <= 0.0 {
                return f64::NEG_INFINITY;
            }
            fam.log_f0(&y) + math::ln(ratio)
        };
        if t_max == 0.0 {
            return objective(0.0);
        }
        let step = 2.0 * t_max / (RAY_SCAN - 1) as f64;
        let mut best = 0;
        let mut best_val = f64::NEG_INFINITY;
        for i in 0..RAY_SCAN {
            let v = objective(-t_max + i as f64 * step);
            if v > best_val {
                best_val = v;
                best = i;
            }
        }
        let lo = -t_max + best.saturating_sub(1) as f64 * step;
        let hi = -t_max + (best + 1).min(RAY_SCAN - 1) as f64 * step;
        let refined = golden_max(&mut objective, lo, hi, 1e-12);
        refined.max(best_val)
    }
}

fn golden_max<F: FnMut(f64) -> f64>(f: &mut F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.618_033_988_749_894_8;
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while b - a > tol * (1.0 + math::abs(a) + math::abs(b)) {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    let mid = f(0.5 * (a + b));
    mid.max(fc).max(fd)
}

pub fn build_envelopes(
    fstar: &MixtureParams,
    family: &LocationFamily,
    ball: &ParamBall,
    grid: &QuadratureGrid,
) -> Result<EnvelopeSet> {
    family.validate()?;
    if grid.fstar() != fstar || grid.family() != family {
        return Err(Error::invalid("grid was built for a different f* or family"));
    }
    let mut env = EnvelopeSet {
        family: *family,
        fstar: fstar.clone(),
        ball: *ball,
        norms: EnvelopeNorms { h0_l4: 0.0, h1_l4: 0.0, h2_l4: 0.0, h3_l2: 0.0 },
    };
    let mut logs: [Vec<f64>; 4] = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (x, lf) in grid.nodes().zip(grid.log_fstar()) {
        for (k, out) in logs.iter_mut().enumerate() {
            out.push(env.log_h_sup(k, x) - lf);
        }
    }
    env.norms = EnvelopeNorms {
        h0_l4: grid.lp_norm_log(&logs[0], 4.0),
        h1_l4: grid.lp_norm_log(&logs[1], 4.0),
        h2_l4: grid.lp_norm_log(&logs[2], 4.0),
        h3_l2: grid.lp_norm_log(&logs[3], 2.0),
    };
    Ok(env)
}

/// `S = (H₀ + H₁ + H₂)·d/c*` and `D = 2S`.
#[derive(Debug, Clone)]
pub struct SdEnvelope {
    env: EnvelopeSet,
    cstar: f64,
}

impl SdEnvelope {
    pub fn cstar(&self) -> f64 {
        self.cstar
    }

    pub fn log_s(&self, x: &[f64]) -> f64 {
        let lf = density::log_density_unchecked(&self.env.fstar, &self.env.family, x);
        let terms = [self.env.log_h_sup(0, x), self.env.log_h_sup(1, x), self.env.log_h_sup(2, x)];
        math::log_sum_exp(&terms) - lf + math::ln(self.env.dim() as f64) - math::ln(self.cstar)
    }

    pub fn s(&self, x: &[f64]) -> f64 {
        math::exp(self.log_s(x))
    }

    pub fn d(&self, x: &[f64]) -> f64 {
        2.0 * self.s(x)
    }

    /// `‖S‖_p` in `L^p(f* dμ)`.
    pub fn s_norm(&self, grid: &QuadratureGrid, p: f64) -> f64 {
        let logs: Vec<f64> = grid.nodes().map(|x| self.log_s(x)).collect();
        grid.lp_norm_log(&logs, p)
    }

    /// `‖D‖_p = 2‖S‖_p`.
    pub fn d_norm(&self, grid: &QuadratureGrid, p: f64) -> f64 {
        2.0 * self.s_norm(grid, p)
    }
}

pub fn envelope_s_d(env: &EnvelopeSet, cstar: f64) -> Result<SdEnvelope> {
    if !(cstar > 0.0 && cstar.is_finite()) {
        return Err(Error::invalid("c* must be positive"));
    }
    Ok(SdEnvelope { env: env.clone(), cstar })
}

/// Parameter region for the ratio study: weights uniform on the simplex,
/// every location coordinate uniform on `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplerBox {
    pub q: usize,
    pub dim: usize,
    pub lo: f64,
    pub hi: f64,
}

impl SamplerBox {
    pub fn validate(&self) -> Result<()> {
        if self.q == 0 || self.dim == 0 || !(self.lo < self.hi) || !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::invalid("sampler box must be bounded with q, d ≥ 1"));
        }
        Ok(())
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> MixtureParams {
        let mut weights: Vec<f64> = (0..self.q).map(|_| rng.sample::<f64, _>(Exp1)).collect();
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        let locations = (0..self.q * self.dim).map(|_| self.lo + (self.hi - self.lo) * rng.random::<f64>()).collect();
        // The simplex draw is normalized above, so this cannot fail.
        MixtureParams::normalized(weights, locations, self.dim).expect("valid simplex draw")
    }

    /// Shrink toward `center` by `factor ∈ (0, 1]`.
    pub fn shrink(&self, center: f64, factor: f64) -> SamplerBox {
        SamplerBox { lo: center + (self.lo - center) * factor, hi: center + (self.hi - center) * factor, ..*self }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatioSample {
    pub params: MixtureParams,
    pub hellinger: f64,
    pub pseudodistance: f64,
    /// `‖f − f*‖₁`; its ratio to `N` gives the `c*` used by `S`.
    pub l1: f64,
}

impl RatioSample {
    pub fn excluded(&self) -> bool {
        self.pseudodistance <= 0.0 || self.hellinger <= HELLINGER_FLOOR
    }

    pub fn ratio(&self) -> Option<f64> {
        (!self.excluded()).then(|| self.hellinger / self.pseudodistance)
    }
}

pub const REPORT_QUANTILES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Summary of `h/N` (and `‖f − f*‖₁/N`) over the sampled parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct GeometryReport {
    pub samples: Vec<RatioSample>,
    pub excluded: usize,
    pub ratio_min: f64,
    pub ratio_max: f64,
    pub quantiles: [f64; 5],
    pub l1_ratio_min: f64,
    pub l1_ratio_max: f64,
}

impl GeometryReport {
    pub fn from_samples(samples: Vec<RatioSample>) -> GeometryReport {
        let mut ratios = Vec::with_capacity(samples.len());
        let mut l1_min = f64::INFINITY;
        let mut l1_max: f64 = 0.0;
        let mut excluded = 0;
        for s in &samples {
            match s.ratio() {
                Some(r) => {
                    ratios.push(r);
                    let l = s.l1 / s.pseudodistance;
                    l1_min = l1_min.min(l);
                    l1_max = l1_max.max(l);
                }
                None => excluded += 1,
            }
        }
        let sorted = stats::sorted(&ratios);
        let mut quantiles = [f64::NAN; 5];
        for (q, p) in quantiles.iter_mut().zip(REPORT_QUANTILES) {
            *q = stats::quantile_sorted(&sorted, p);
        }
        GeometryReport {
            excluded,
            ratio_min: sorted.first().copied().unwrap_or(f64::NAN),
            ratio_max: sorted.last().copied().unwrap_or(f64::NAN),
            quantiles,
            l1_ratio_min: l1_min,
            l1_ratio_max: l1_max,
            samples,
        }
    }

    /// Largest/smallest ratio (`r_max/r_min`).
    pub fn spread(&self) -> f64 {
        self.ratio_max / self.ratio_min
    }
}

/// One ratio study: each sample index draws from its own stream, so any
/// subset of indices can be evaluated independently and reassembled.
pub struct RatioStudy<'a> {
    pub grid: &'a QuadratureGrid,
    pub partition: &'a Partition,
    pub sampler: SamplerBox,
    pub seed: u64,
}

impl RatioStudy<'_> {
    pub fn new<'a>(grid: &'a QuadratureGrid, partition: &'a Partition, sampler: SamplerBox, seed: u64) -> Result<RatioStudy<'a>> {
        sampler.validate()?;
        if sampler.dim != grid.dim() || partition.dim() != grid.dim() {
            return Err(Error::invalid("dimension mismatch"));
        }
        Ok(RatioStudy { grid, partition, sampler, seed })
    }

    pub fn evaluate(&self, params: MixtureParams) -> RatioSample {
        let lf = self.grid.log_density_at_nodes(&params);
        let hellinger = divergence::hellinger_from_logs(self.grid, &lf, self.grid.log_fstar());
        let l1 = divergence::l1_from_logs(self.grid, &lf);
        // Dimensions were checked in `new`.
        let pseudodistance = pseudodistance(&params, self.partition).unwrap_or(f64::NAN);
        RatioSample { params, hellinger, pseudodistance, l1 }
    }

    pub fn sample(&self, index: usize) -> RatioSample {
        let mut rng = rng::stream(self.seed, "ratio", index as u64);
        self.evaluate(self.sampler.draw(&mut rng))
    }

    pub fn run(&self, n_samples: usize) -> Result<GeometryReport> {
        if n_samples < 1000 {
            return Err(Error::invalid("ratio study needs at least 10^3 samples"));
        }
        Ok(GeometryReport::from_samples((0..n_samples).map(|i| self.sample(i)).collect()))
    }
}

pub fn ratio_study(
    grid: &QuadratureGrid,
    partition: &Partition,
    sampler: SamplerBox,
    n_samples: usize,
    seed: u64,
) -> Result<GeometryReport> {
    RatioStudy::new(grid, partition, sampler, seed)?.run(n_samples)
}

/// Values of `h` and `N` on a regular `(p, θ₁, θ₂)` lattice for two-component
/// mixtures in one dimension. Index `(i, j, k)` is stored at
/// `(i·r + j)·r + k` with `r` the resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSetGrid {
    pub resolution: usize,
    pub p_range: (f64, f64),
    pub theta_range: (f64, f64),
    pub hellinger: Vec<f64>,
    pub pseudodistance: Vec<f64>,
}

/// Default lattice resolution per axis.
pub const LEVEL_SET_RESOLUTION: usize = 101;

impl LevelSetGrid {
    pub fn coords(&self, idx: usize) -> (f64, f64, f64) {
        let r = self.resolution;
        let (i, j, k) = (idx / (r * r), (idx / r) % r, idx % r);
        (axis_value(self.p_range, r, i), axis_value(self.theta_range, r, j), axis_value(self.theta_range, r, k))
    }

    pub fn len(&self) -> usize {
        self.hellinger.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hellinger.is_empty()
    }

    pub fn member_h(&self, eps: f64) -> Vec<bool> {
        self.hellinger.iter().map(|h| *h <= eps).collect()
    }

    pub fn member_n(&self, eps: f64) -> Vec<bool> {
        self.pseudodistance.iter().map(|n| *n <= eps).collect()
    }

    /// `(min, max)` of `h/N` over lattice points with `N > 0` and `h` above
    /// the floor.
    pub fn ratio_bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi: f64 = 0.0;
        for (h, n) in self.hellinger.iter().zip(&self.pseudodistance) {
            if *n > 0.0 && *h > HELLINGER_FLOOR {
                let r = h / n;
                lo = lo.min(r);
                hi = hi.max(r);
            }
        }
        (lo, hi)
    }
}

fn axis_value(range: (f64, f64), r: usize, i: usize) -> f64 {
    if r == 1 {
        return range.0;
    }
    range.0 + (range.1 - range.0) * i as f64 / (r - 1) as f64
}

/// Lattice evaluator; planes of constant `p` are independent.
pub struct LevelSetBuilder<'a> {
    grid: &'a QuadratureGrid,
    partition: &'a Partition,
    resolution: usize,
    p_range: (f64, f64),
    theta_range: (f64, f64),
    /// `log f₀(x_k − θ_j)` for lattice value `j` and node `k`.
    table: Vec<f64>,
}

impl<'a> LevelSetBuilder<'a> {
    pub fn new(grid: &'a QuadratureGrid, partition: &'a Partition, sampler: SamplerBox, resolution: usize) -> Result<Self> {
        sampler.validate()?;
        if sampler.q != 2 || sampler.dim != 1 || grid.dim() != 1 {
            return Err(Error::invalid("level-set lattice is defined for two-component mixtures in one dimension"));
        }
        if resolution < 2 {
            return Err(Error::invalid("resolution must be at least 2"));
        }
        let theta_range = (sampler.lo, sampler.hi);
        let fam = grid.family();
        let mut table = Vec::with_capacity(resolution * grid.len());
        for j in 0..resolution {
            let t = axis_value(theta_range, resolution, j);
            for x in grid.nodes() {
                table.push(fam.log_f0_shifted(x, &[t]));
            }
        }
        Ok(LevelSetBuilder { grid, partition, resolution, p_range: (0.0, 1.0), theta_range, table })
    }

    /// `(h, N)` for every `(j, k)` at the `i`-th value of `p`.
    pub fn plane(&self, i: usize) -> (Vec<f64>, Vec<f64>) {
        let r = self.resolution;
        let m = self.grid.len();
        let p = axis_value(self.p_range, r, i);
        let (lp, lq) = (math::ln(p), math::ln(1.0 - p));
        let mut hs = Vec::with_capacity(r * r);
        let mut ns = Vec::with_capacity(r * r);
        let mut lf = vec![0.0; m];
        for j in 0..r {
            let a = &self.table[j * m..(j + 1) * m];
            for k in 0..r {
                let b = &self.table[k * m..(k + 1) * m];
                for ((out, x), y) in lf.iter_mut().zip(a).zip(b) {
                    *out = log_add(lp + x, lq + y);
                }
                hs.push(divergence::hellinger_from_logs(self.grid, &lf, self.grid.log_fstar()));
                let t1 = axis_value(self.theta_range, r, j);
                let t2 = axis_value(self.theta_range, r, k);
                let n = pseudodistance_two(p, t1, t2, self.partition);
                ns.push(n);
            }
        }
        (hs, ns)
    }

    pub fn assemble(&self, planes: Vec<(Vec<f64>, Vec<f64>)>) -> LevelSetGrid {
        let mut hellinger = Vec::with_capacity(self.resolution.pow(3));
        let mut pseudo = Vec::with_capacity(self.resolution.pow(3));
        for (h, n) in planes {
            hellinger.extend(h);
            pseudo.extend(n);
        }
        LevelSetGrid { resolution: self.resolution, p_range: self.p_range, theta_range: self.theta_range, hellinger, pseudodistance: pseudo }
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn build(&self) -> LevelSetGrid {
        self.assemble((0..self.resolution).map(|i| self.plane(i)).collect())
    }
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + math::log1p(math::exp(lo - hi))
}

fn pseudodistance_two(p: f64, t1: f64, t2: f64, part: &Partition) -> f64 {
    // Weights p, 1 − p always sum to one; the constructor cannot fail.
    let mix = MixtureParams::new(vec![p, 1.0 - p], vec![t1, t2], 1).expect("two-point mixture");
    pseudodistance(&mix, part).unwrap_or(f64::NAN)
}
