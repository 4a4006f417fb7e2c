//! Location families, mixture parameters, sampling, the parameter ball and
//! sieve schedules.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::math::{self, LN_2PI};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FamilyKind {
    GaussianStandard,
    GaussianScaled { sigma: f64 },
}

/// Translates `f_θ(x) = f₀(x − θ)` of an isotropic Gaussian base density on ℝ^d.
///
/// Every quantity the geometry needs (the density, its first three
/// derivatives) is available in closed form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocationFamily {
    pub kind: FamilyKind,
    pub dim: usize,
}

impl LocationFamily {
    pub fn standard(dim: usize) -> Self {
        LocationFamily { kind: FamilyKind::GaussianStandard, dim }
    }

    pub fn scaled(sigma: f64, dim: usize) -> Result<Self> {
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(Error::invalid("sigma must be positive and finite"));
        }
        Ok(LocationFamily { kind: FamilyKind::GaussianScaled { sigma }, dim })
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        if let FamilyKind::GaussianScaled { sigma } = self.kind {
            if !(sigma.is_finite() && sigma > 0.0) {
                return Err(Error::invalid("sigma must be positive and finite"));
            }
        }
        Ok(())
    }

    pub fn sigma(&self) -> f64 {
        match self.kind {
            FamilyKind::GaussianStandard => 1.0,
            FamilyKind::GaussianScaled { sigma } => sigma,
        }
    }

    /// `log f₀(0)`, the maximum of the log base density.
    pub fn max_log_f0(&self) -> f64 {
        let s = self.sigma();
        -0.5 * self.dim as f64 * (LN_2PI + 2.0 * math::ln(s))
    }

    pub fn log_f0(&self, y: &[f64]) -> f64 {
        let s2 = self.sigma() * self.sigma();
        let r2: f64 = y.iter().map(|v| v * v).sum();
        self.max_log_f0() - 0.5 * r2 / s2
    }

    /// `log f₀(x − θ)` without allocating.
    pub fn log_f0_shifted(&self, x: &[f64], theta: &[f64]) -> f64 {
        let s2 = self.sigma() * self.sigma();
        self.max_log_f0() - 0.5 * math::dist_sq(x, theta) / s2
    }

    pub fn f0(&self, y: &[f64]) -> f64 {
        math::exp(self.log_f0(y))
    }

    /// Gradient `D₁f₀(y)`.
    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        let s2 = self.sigma() * self.sigma();
        let f = self.f0(y);
        y.iter().map(|&yi| -f * yi / s2).collect()
    }

    /// Hessian `D₂f₀(y)`, row-major d×d.
    pub fn hessian(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let s2 = self.sigma() * self.sigma();
        let f = self.f0(y);
        let mut out = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                let delta = if i == j { 1.0 } else { 0.0 };
                out[i * d + j] = f * (y[i] * y[j] / (s2 * s2) - delta / s2);
            }
        }
        out
    }

    /// Third derivatives `D₃f₀(y)`, flattened d×d×d.
    pub fn third(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let s2 = self.sigma() * self.sigma();
        let f = self.f0(y);
        let mut out = vec![0.0; d * d * d];
        for i in 0..d {
            for j in 0..d {
                for k in 0..d {
                    out[(i * d + j) * d + k] = f * third_factor(y, i, j, k, s2);
                }
            }
        }
        out
    }

    /// `max |∂^order f₀(y)| / f₀(y)` over all index tuples of the given order
    /// (0 ≤ order ≤ 3). Derivatives in θ of `f₀(x − θ)` differ only in sign,
    /// so this is also the ratio needed by the envelopes.
    pub fn derivative_ratio_max(&self, order: usize, y: &[f64]) -> f64 {
        let d = self.dim;
        let s2 = self.sigma() * self.sigma();
        match order {
            0 => 1.0,
            1 => y.iter().fold(0.0, |m: f64, v| m.max(math::abs(*v) / s2)),
            2 => {
                let mut m: f64 = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        let delta = if i == j { 1.0 } else { 0.0 };
                        m = m.max(math::abs(y[i] * y[j] / (s2 * s2) - delta / s2));
                    }
                }
                m
            }
            3 => {
                let mut m: f64 = 0.0;
                for i in 0..d {
                    for j in 0..d {
                        for k in 0..d {
                            m = m.max(math::abs(third_factor(y, i, j, k, s2)));
                        }
                    }
                }
                m
            }
            _ => f64::NAN,
        }
    }

    /// Draw `out = σ·Z` for standard normal `Z`.
    pub fn sample_base<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let s = self.sigma();
        for v in out.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *v = s * z;
        }
    }

    /// Probability that one component centered at `center` falls outside the
    /// box `[lo, hi]^d` (union bound over coordinates).
    pub fn outside_box_mass(&self, center: &[f64], lo: &[f64], hi: &[f64]) -> f64 {
        let s = self.sigma();
        center
            .iter()
            .enumerate()
            .map(|(j, c)| math::normal_sf((c - lo[j]) / s) + math::normal_sf((hi[j] - c) / s))
            .sum()
    }
}

fn third_factor(y: &[f64], i: usize, j: usize, k: usize, s2: f64) -> f64 {
    let kd = |a: usize, b: usize| if a == b { 1.0 } else { 0.0 };
    -y[i] * y[j] * y[k] / (s2 * s2 * s2) + (kd(i, j) * y[k] + kd(i, k) * y[j] + kd(j, k) * y[i]) / (s2 * s2)
}

/// Mixing weights on the simplex and component locations in ℝ^d.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureParams {
    weights: Vec<f64>,
    /// Row-major, `q × dim`.
    locations: Vec<f64>,
    dim: usize,
}

impl MixtureParams {
    pub fn new(weights: Vec<f64>, locations: Vec<f64>, dim: usize) -> Result<Self> {
        let q = weights.len();
        if q == 0 {
            return Err(Error::invalid("a mixture needs at least one component"));
        }
        if dim == 0 || locations.len() != q * dim {
            return Err(Error::invalid("locations must hold q·d coordinates"));
        }
        if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::invalid("weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if math::abs(total - 1.0) > 1e-12 {
            return Err(Error::invalid("weights must sum to one"));
        }
        if locations.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("locations must be finite"));
        }
        Ok(MixtureParams { weights, locations, dim })
    }

    /// Like [`MixtureParams::new`] but rescales the weights to sum to one.
    pub fn normalized(mut weights: Vec<f64>, locations: Vec<f64>, dim: usize) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total.is_finite() && total > 0.0) {
            return Err(Error::invalid("weights must have positive finite sum"));
        }
        for w in weights.iter_mut() {
            *w /= total;
        }
        Self::new(weights, locations, dim)
    }

    pub fn single(location: &[f64]) -> Result<Self> {
        Self::new(vec![1.0], location.to_vec(), location.len())
    }

    pub fn order(&self) -> usize {
        self.weights.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn locations(&self) -> &[f64] {
        &self.locations
    }

    pub fn location(&self, i: usize) -> &[f64] {
        &self.locations[i * self.dim..(i + 1) * self.dim]
    }

    pub fn components(&self) -> impl Iterator<Item = (f64, &[f64])> + '_ {
        self.weights.iter().copied().zip(self.locations.chunks_exact(self.dim))
    }

    /// Positive weights and pairwise distinct centers.
    pub fn check_nondegenerate(&self) -> Result<()> {
        if self.weights.iter().any(|w| *w <= 0.0) {
            return Err(Error::InvalidModel("true mixture has a zero weight".into()));
        }
        for i in 0..self.order() {
            for j in 0..i {
                if math::dist_sq(self.location(i), self.location(j)) == 0.0 {
                    return Err(Error::InvalidModel("true mixture has duplicate centers".into()));
                }
            }
        }
        Ok(())
    }

    /// Largest `‖θ_i‖`.
    pub fn max_location_norm(&self) -> f64 {
        self.locations.chunks_exact(self.dim).map(math::norm).fold(0.0, f64::max)
    }

    /// Split the heaviest component into two identical halves. The density is
    /// unchanged; used to seed a `q + 1` fit from a `q` optimum.
    pub fn split_heaviest(&self) -> MixtureParams {
        let mut k = 0;
        for (i, w) in self.weights.iter().enumerate() {
            if *w > self.weights[k] {
                k = i;
            }
        }
        let mut weights = self.weights.clone();
        weights[k] *= 0.5;
        weights.push(weights[k]);
        let mut locations = self.locations.clone();
        locations.extend_from_slice(self.location(k));
        MixtureParams { weights, locations, dim: self.dim }
    }
}

/// `log Σ_i π_i f₀(x − θ_i)` with log-sum-exp stabilization.
pub fn eval_log_density(mix: &MixtureParams, family: &LocationFamily, x: &[f64]) -> Result<f64> {
    if x.len() != mix.dim() || family.dim != mix.dim() {
        return Err(Error::invalid("dimension mismatch"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("point must be finite"));
    }
    Ok(log_density_unchecked(mix, family, x))
}

/// Hot-path variant without validation. Zero-weight components are skipped.
pub(crate) fn log_density_unchecked(mix: &MixtureParams, family: &LocationFamily, x: &[f64]) -> f64 {
    let s2 = family.sigma() * family.sigma();
    let c = family.max_log_f0();
    if mix.order() == 1 {
        return c - 0.5 * math::dist_sq(x, mix.location(0)) / s2;
    }
    let mut max = f64::NEG_INFINITY;
    let mut terms = [0.0f64; 16];
    let mut heap: Vec<f64> = Vec::new();
    let buf: &mut [f64] = if mix.order() <= 16 {
        &mut terms[..mix.order()]
    } else {
        heap.resize(mix.order(), 0.0);
        &mut heap
    };
    for (slot, (w, theta)) in buf.iter_mut().zip(mix.components()) {
        *slot = if w > 0.0 {
            math::ln(w) + c - 0.5 * math::dist_sq(x, theta) / s2
        } else {
            f64::NEG_INFINITY
        };
        if *slot > max {
            max = *slot;
        }
    }
    let mut acc = 0.0;
    for v in buf.iter() {
        acc += math::exp(v - max);
    }
    max + math::ln(acc)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Provenance {
    Simulated { seed: u64 },
    Ingested { path: String },
}

/// Raw observations in ℝ^d, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    points: Vec<f64>,
    dim: usize,
    pub provenance: Provenance,
}

impl Dataset {
    pub fn new(points: Vec<f64>, dim: usize, provenance: Provenance) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(Error::invalid("dataset needs n ≥ 1 rows of d coordinates"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("dataset coordinates must be finite"));
        }
        Ok(Dataset { points, dim, provenance })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    pub fn raw(&self) -> &[f64] {
        &self.points
    }

    /// First `n` observations; the provenance is kept.
    pub fn prefix(&self, n: usize) -> Result<Dataset> {
        if n == 0 || n > self.len() {
            return Err(Error::invalid("prefix length out of range"));
        }
        Ok(Dataset { points: self.points[..n * self.dim].to_vec(), dim: self.dim, provenance: self.provenance.clone() })
    }

    pub fn mean(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.dim];
        for p in self.iter() {
            for (a, b) in m.iter_mut().zip(p) {
                *a += b;
            }
        }
        let n = self.len() as f64;
        m.iter_mut().for_each(|v| *v /= n);
        m
    }
}

/// Draw `n` i.i.d. observations: a component by weight, then a shifted base
/// draw. Points are generated sequentially from one stream, so the first `m`
/// points of `sample(.., n, seed)` equal `sample(.., m, seed)`.
pub fn sample(mix: &MixtureParams, family: &LocationFamily, n: usize, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("sample size must be positive"));
    }
    if family.dim != mix.dim() {
        return Err(Error::invalid("dimension mismatch"));
    }
    let d = mix.dim();
    let mut rng = rng::stream(seed, "sample", 0);
    let picker = WeightedIndex::new(mix.weights()).map_err(|_| Error::invalid("weights cannot be sampled"))?;
    let mut points = vec![0.0; n * d];
    for row in points.chunks_exact_mut(d) {
        let k = picker.sample(&mut rng);
        family.sample_base(&mut rng, row);
        for (v, t) in row.iter_mut().zip(mix.location(k)) {
            *v += t;
        }
    }
    Dataset::new(points, d, Provenance::Simulated { seed })
}

/// Closed Euclidean ball `{‖θ‖ ≤ T}` centered at the origin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParamBall {
    radius: f64,
}

impl ParamBall {
    pub fn new(radius: f64) -> Result<Self> {
        if !(radius >= 0.0) || radius.is_nan() {
            return Err(Error::invalid("ball radius must be nonnegative"));
        }
        Ok(ParamBall { radius })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        math::norm(theta) <= self.radius
    }

    /// Nearest point of the ball (radial scaling outside).
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        let mut out = theta.to_vec();
        self.project_in_place(&mut out);
        out
    }

    pub fn project_in_place(&self, theta: &mut [f64]) {
        let r = math::norm(theta);
        if r > self.radius {
            let s = if r > 0.0 { self.radius / r } else { 0.0 };
            theta.iter_mut().for_each(|v| *v *= s);
        }
    }

    /// Uniform draw from the ball.
    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let d = out.len();
        loop {
            for v in out.iter_mut() {
                *v = rng.sample(StandardNormal);
            }
            let r = math::norm(out);
            if r > 0.0 {
                let u: f64 = rng.random();
                let scale = self.radius * math::pow(u, 1.0 / d as f64) / r;
                out.iter_mut().for_each(|v| *v *= scale);
                return;
            }
        }
    }
}

pub fn project_to_ball(theta: &[f64], ball: &ParamBall) -> Vec<f64> {
    ball.project(theta)
}

/// Sieve radius `T(n)` as a function of the sample size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SieveSchedule {
    Constant(f64),
    /// `c·√(log log n)`.
    SqrtLogLog { c: f64 },
    /// `c·(log n)^exponent` with `exponent < 1/2`, i.e. `o(√log n)`.
    LogPower { c: f64, exponent: f64 },
}

impl SieveSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            SieveSchedule::Constant(t) if t > 0.0 && t.is_finite() => Ok(()),
            SieveSchedule::SqrtLogLog { c } if c > 0.0 && c.is_finite() => Ok(()),
            SieveSchedule::LogPower { c, exponent } if c > 0.0 && exponent > 0.0 && exponent < 0.5 => Ok(()),
            _ => Err(Error::invalid("sieve parameters must be positive (log-power exponent in (0, 1/2))")),
        }
    }

    pub fn radius(&self, n: usize) -> Result<f64> {
        self.validate()?;
        match *self {
            SieveSchedule::Constant(t) => Ok(t),
            SieveSchedule::SqrtLogLog { c } => {
                if n < 3 {
                    return Err(Error::invalid("log log n needs n ≥ 3"));
                }
                Ok(c * math::sqrt(math::ln_ln(n as f64)))
            }
            SieveSchedule::LogPower { c, exponent } => {
                if n < 3 {
                    return Err(Error::invalid("log-power sieve needs n ≥ 3"));
                }
                Ok(c * math::pow(math::ln(n as f64), exponent))
            }
        }
    }
}

pub fn sieve_radius(sched: &SieveSchedule, n: usize) -> Result<f64> {
    sched.radius(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        math::abs(a - b) <= tol
    }

    #[test]
    fn log_density_closed_forms() {
        let fam = LocationFamily::standard(1);
        let one = MixtureParams::single(&[0.0]).unwrap();
        assert!(close(eval_log_density(&one, &fam, &[0.0]).unwrap(), -0.918_938_533_204_672_7, 1e-12));
        let two = MixtureParams::new(vec![0.5, 0.5], vec![-1.0, 1.0], 1).unwrap();
        assert!(close(eval_log_density(&two, &fam, &[0.0]).unwrap(), -1.418_938_533_204_672_7, 1e-12));
    }

    #[test]
    fn degenerate_weights_match_single_component() {
        let fam = LocationFamily::standard(1);
        let mix = MixtureParams::new(vec![1.0, 0.0], vec![0.3, -2.0], 1).unwrap();
        let one = MixtureParams::single(&[0.3]).unwrap();
        for x in [-3.0, 0.0, 1.7] {
            assert_eq!(eval_log_density(&mix, &fam, &[x]).unwrap(), eval_log_density(&one, &fam, &[x]).unwrap());
        }
    }

    #[test]
    fn non_finite_point_rejected() {
        let fam = LocationFamily::standard(1);
        let one = MixtureParams::single(&[0.0]).unwrap();
        assert!(matches!(eval_log_density(&one, &fam, &[f64::NAN]), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn tail_points_do_not_underflow() {
        let fam = LocationFamily::standard(1);
        let two = MixtureParams::new(vec![0.5, 0.5], vec![-1.0, 1.0], 1).unwrap();
        let v = eval_log_density(&two, &fam, &[60.0]).unwrap();
        assert!(v.is_finite() && v < -1000.0);
    }

    #[test]
    fn mixture_validation() {
        assert!(MixtureParams::new(vec![0.5, 0.6], vec![0.0, 1.0], 1).is_err());
        assert!(MixtureParams::new(vec![], vec![], 1).is_err());
        assert!(MixtureParams::new(vec![1.0], vec![f64::INFINITY], 1).is_err());
        let dup = MixtureParams::new(vec![0.5, 0.5], vec![1.0, 1.0], 1).unwrap();
        assert!(matches!(dup.check_nondegenerate(), Err(Error::InvalidModel(_))));
    }

    #[test]
    fn sampling_is_deterministic_and_respects_zero_weights() {
        let fam = LocationFamily::standard(1);
        let mix = MixtureParams::new(vec![1.0, 0.0], vec![-50.0, 50.0], 1).unwrap();
        let a = sample(&mix, &fam, 500, 11).unwrap();
        let b = sample(&mix, &fam, 500, 11).unwrap();
        assert_eq!(a, b);
        assert!(a.iter().all(|p| p[0] < 0.0));
        assert!(sample(&mix, &fam, 0, 1).is_err());
        let prefix = sample(&mix, &fam, 123, 11).unwrap();
        assert_eq!(prefix.raw(), &a.raw()[..123]);
    }

    #[test]
    fn projection_examples() {
        let ten = ParamBall::new(10.0).unwrap();
        let one = ParamBall::new(1.0).unwrap();
        assert_eq!(project_to_ball(&[3.0, 4.0], &ten), vec![3.0, 4.0]);
        let p = project_to_ball(&[3.0, 4.0], &one);
        assert!(close(p[0], 0.6, 1e-15) && close(p[1], 0.8, 1e-15));
        assert_eq!(project_to_ball(&[0.0, 0.0], &ParamBall::new(0.0).unwrap()), vec![0.0, 0.0]);
        assert!(ParamBall::new(-1.0).is_err());
    }

    #[test]
    fn sieve_examples() {
        assert_eq!(sieve_radius(&SieveSchedule::Constant(10.0), 500).unwrap(), 10.0);
        let r = sieve_radius(&SieveSchedule::SqrtLogLog { c: 2.0 }, 1_000_000).unwrap();
        assert!(close(r, 3.240_85, 1e-5));
        let n = math::exp(10.0).round() as usize;
        let r = sieve_radius(&SieveSchedule::LogPower { c: 1.0, exponent: 0.4 }, n).unwrap();
        assert!(close(r, 2.511_89, 1e-5));
        assert!(sieve_radius(&SieveSchedule::SqrtLogLog { c: 2.0 }, 2).is_err());
        assert!(SieveSchedule::LogPower { c: 1.0, exponent: 0.5 }.validate().is_err());
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let fam = LocationFamily::scaled(0.7, 2).unwrap();
        let y = [0.3, -0.8];
        let h = 1e-5;
        let g = fam.gradient(&y);
        for i in 0..2 {
            let mut a = y;
            let mut b = y;
            a[i] += h;
            b[i] -= h;
            let fd = (fam.f0(&a) - fam.f0(&b)) / (2.0 * h);
            assert!(close(g[i], fd, 1e-8));
        }
        let hs = fam.hessian(&y);
        for i in 0..2 {
            let mut a = y;
            let mut b = y;
            a[i] += h;
            b[i] -= h;
            let (ga, gb) = (fam.gradient(&a), fam.gradient(&b));
            for j in 0..2 {
                assert!(close(hs[j * 2 + i], (ga[j] - gb[j]) / (2.0 * h), 1e-7));
            }
        }
        let t = fam.third(&y);
        for k in 0..2 {
            let mut a = y;
            let mut b = y;
            a[k] += h;
            b[k] -= h;
            let (ha, hb) = (fam.hessian(&a), fam.hessian(&b));
            for ij in 0..4 {
                assert!(close(t[ij * 2 + k], (ha[ij] - hb[ij]) / (2.0 * h), 1e-6));
            }
        }
        let f = fam.f0(&y);
        let max3 = t.iter().fold(0.0f64, |m, v| m.max(math::abs(*v))) / f;
        assert!(close(fam.derivative_ratio_max(3, &y), max3, 1e-12));
    }
}
