use alloc::vec;
use alloc::vec::Vec;

use super::hermite::gauss_hermite;
use crate::density::{self, LocationFamily, MixtureParams};
use crate::error::{Error, Result};
use crate::math;

/// Excluded tail mass above which a grid is refused.
pub const MAX_TAIL_MASS: f64 = 1e-10;
const NORMALIZATION_TOL: f64 = 1e-9;
const MAX_NODES: usize = 20_000_000;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scheme {
    /// Tensor Gauss–Hermite rule centered at the mean of `f*`. The scale
    /// defaults to `√(σ² + largest per-coordinate variance of the centers)`.
    TensorGaussHermite { order: usize, scale: Option<f64> },
    /// Trapezoid rule on `[−radius, radius]^d`.
    UniformGrid { step: f64, radius: f64 },
    /// Importance sample from `f*` itself (for `d ≥ 3`); weights `1/(N f*)`.
    MonteCarlo { samples: usize, seed: u64 },
}

/// Nodes and weights realizing `∫ · dμ` and the `L²(f* dμ)` inner product.
///
/// `weights` integrate against Lebesgue measure; `fstar_weights` are
/// `weights · f*(node)` and integrate against `f* dμ`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    dim: usize,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    log_fstar: Vec<f64>,
    fstar_weights: Vec<f64>,
    truncation_radius: f64,
    tail_mass: f64,
    scheme: Scheme,
    fstar: MixtureParams,
    family: LocationFamily,
}

/// `max‖θ_i*‖ + T + 10σ`.
pub fn default_truncation_radius(fstar: &MixtureParams, family: &LocationFamily, ball_radius: f64) -> f64 {
    fstar.max_location_norm() + ball_radius + 10.0 * family.sigma()
}

pub fn build_grid(fstar: &MixtureParams, family: &LocationFamily, scheme: Scheme) -> Result<QuadratureGrid> {
    family.validate()?;
    if family.dim != fstar.dim() {
        return Err(Error::invalid("dimension mismatch between family and f*"));
    }
    let d = fstar.dim();
    let (nodes, weights, lo, hi) = match scheme {
        Scheme::UniformGrid { step, radius } => {
            if !(step > 0.0 && radius > 0.0 && step.is_finite() && radius.is_finite()) {
                return Err(Error::invalid("uniform grid needs positive step and radius"));
            }
            let m = math::ceil_div_f64(2.0 * radius, step);
            let h = 2.0 * radius / m as f64;
            let axis: Vec<f64> = (0..=m).map(|k| -radius + k as f64 * h).collect();
            let axis_w: Vec<f64> = (0..=m).map(|k| if k == 0 || k == m { 0.5 * h } else { h }).collect();
            let (nodes, weights) = tensor(&[axis], &[axis_w], d)?;
            (nodes, weights, vec![-radius; d], vec![radius; d])
        }
        Scheme::TensorGaussHermite { order, scale } => {
            if order < 2 {
                return Err(Error::invalid("Gauss–Hermite order must be at least 2"));
            }
            let sigma = family.sigma();
            let mut center = vec![0.0; d];
            for (w, theta) in fstar.components() {
                for (c, t) in center.iter_mut().zip(theta) {
                    *c += w * t;
                }
            }
            let mut spread: f64 = 0.0;
            for j in 0..d {
                let var: f64 = fstar.components().map(|(w, th)| w * (th[j] - center[j]) * (th[j] - center[j])).sum();
                spread = spread.max(var);
            }
            let s = scale.unwrap_or_else(|| math::sqrt(sigma * sigma + spread));
            if !(s > 0.0 && s.is_finite()) {
                return Err(Error::invalid("Gauss–Hermite scale must be positive"));
            }
            let rule = gauss_hermite(order);
            let k = core::f64::consts::SQRT_2 * s;
            let mut axes = Vec::with_capacity(d);
            let mut axes_w = Vec::with_capacity(d);
            for c in center.iter() {
                axes.push(rule.nodes.iter().map(|t| c + k * t).collect::<Vec<_>>());
                axes_w.push(rule.log_lebesgue_weights.iter().map(|lw| k * math::exp(*lw)).collect::<Vec<_>>());
            }
            let (nodes, weights) = tensor(&axes, &axes_w, d)?;
            let tmax = rule.nodes[order - 1];
            let lo = center.iter().map(|c| c - k * tmax).collect();
            let hi = center.iter().map(|c| c + k * tmax).collect();
            (nodes, weights, lo, hi)
        }
        Scheme::MonteCarlo { samples, seed } => {
            if samples == 0 {
                return Err(Error::invalid("Monte Carlo grid needs samples"));
            }
            let data = density::sample(fstar, family, samples, seed)?;
            let nodes = data.raw().to_vec();
            let weights = data
                .iter()
                .map(|x| 1.0 / (samples as f64 * math::exp(density::log_density_unchecked(fstar, family, x))))
                .collect();
            (nodes, weights, vec![f64::NEG_INFINITY; d], vec![f64::INFINITY; d])
        }
    };
    let tail_mass: f64 = if matches!(scheme, Scheme::MonteCarlo { .. }) {
        0.0
    } else {
        fstar.components().map(|(w, th)| w * family.outside_box_mass(th, &lo, &hi)).sum()
    };
    if tail_mass > MAX_TAIL_MASS {
        return Err(Error::GridTooSmall { tail_mass });
    }
    let log_fstar: Vec<f64> = nodes.chunks_exact(d).map(|x| density::log_density_unchecked(fstar, family, x)).collect();
    let fstar_weights: Vec<f64> = weights.iter().zip(&log_fstar).map(|(w, l)| w * math::exp(*l)).collect();
    let total: f64 = fstar_weights.iter().sum();
    if math::abs(total - 1.0) > NORMALIZATION_TOL {
        return Err(Error::invalid("grid fails the normalization check for f*; refine the resolution"));
    }
    let truncation_radius = nodes.iter().fold(0.0f64, |m, v| m.max(math::abs(*v)));
    Ok(QuadratureGrid {
        dim: d,
        nodes,
        weights,
        log_fstar,
        fstar_weights,
        truncation_radius,
        tail_mass,
        scheme,
        fstar: fstar.clone(),
        family: *family,
    })
}

fn tensor(axes: &[Vec<f64>], axes_w: &[Vec<f64>], d: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let axis = |j: usize| if axes.len() == 1 { 0 } else { j };
    let mut count: usize = 1;
    for j in 0..d {
        count = count.saturating_mul(axes[axis(j)].len());
    }
    if count > MAX_NODES {
        return Err(Error::invalid("tensor grid too large; use Monte Carlo for high dimension"));
    }
    let mut nodes = Vec::with_capacity(count * d);
    let mut weights = Vec::with_capacity(count);
    let mut idx = vec![0usize; d];
    for _ in 0..count {
        let mut w = 1.0;
        for j in 0..d {
            nodes.push(axes[axis(j)][idx[j]]);
            w *= axes_w[axis(j)][idx[j]];
        }
        weights.push(w);
        for j in (0..d).rev() {
            idx[j] += 1;
            if idx[j] < axes[axis(j)].len() {
                break;
            }
            idx[j] = 0;
        }
    }
    Ok((nodes, weights))
}

impl QuadratureGrid {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn node(&self, k: usize) -> &[f64] {
        &self.nodes[k * self.dim..(k + 1) * self.dim]
    }

    pub fn nodes(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.nodes.chunks_exact(self.dim)
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn fstar_weights(&self) -> &[f64] {
        &self.fstar_weights
    }

    pub fn log_fstar(&self) -> &[f64] {
        &self.log_fstar
    }

    pub fn truncation_radius(&self) -> f64 {
        self.truncation_radius
    }

    /// Mass of `f*` outside the covered box (zero for Monte Carlo grids).
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn fstar(&self) -> &MixtureParams {
        &self.fstar
    }

    pub fn family(&self) -> &LocationFamily {
        &self.family
    }

    /// `∫ g dμ`.
    pub fn integrate<F: Fn(&[f64]) -> f64>(&self, g: F) -> f64 {
        self.nodes().zip(&self.weights).map(|(x, w)| w * g(x)).sum()
    }

    /// `∫ g f* dμ`, i.e. `E*[g]`.
    pub fn expect<F: Fn(&[f64]) -> f64>(&self, g: F) -> f64 {
        self.nodes().zip(&self.fstar_weights).map(|(x, w)| w * g(x)).sum()
    }

    /// `L²(f* dμ)` inner product of two node-value vectors.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.fstar_weights.iter().zip(a).zip(b).map(|((w, x), y)| w * x * y).sum()
    }

    /// `L^p(f* dμ)` norm of node values.
    pub fn lp_norm(&self, values: &[f64], p: f64) -> f64 {
        let s: f64 = self.fstar_weights.iter().zip(values).map(|(w, v)| w * math::pow(math::abs(*v), p)).sum();
        math::pow(s, 1.0 / p)
    }

    /// `L^p(f* dμ)` norm of `exp(log_values)`, evaluated in log space so
    /// large envelopes at tail nodes do not overflow.
    pub fn lp_norm_log(&self, log_values: &[f64], p: f64) -> f64 {
        let terms: Vec<f64> = self
            .weights
            .iter()
            .zip(&self.log_fstar)
            .zip(log_values)
            .map(|((w, lf), lv)| math::ln(*w) + lf + p * lv)
            .collect();
        math::exp(math::log_sum_exp(&terms) / p)
    }

    /// `log f` at every node.
    pub fn log_density_at_nodes(&self, mix: &MixtureParams) -> Vec<f64> {
        self.nodes().map(|x| density::log_density_unchecked(mix, &self.family, x)).collect()
    }

    /// Monte Carlo standard error of `∫ g dμ` (zero for deterministic rules).
    pub fn standard_error<F: Fn(&[f64]) -> f64>(&self, g: F) -> f64 {
        if !matches!(self.scheme, Scheme::MonteCarlo { .. }) {
            return 0.0;
        }
        let n = self.len() as f64;
        let vals: Vec<f64> = self.nodes().zip(&self.weights).map(|(x, w)| w * n * g(x)).collect();
        let mean = vals.iter().sum::<f64>() / n;
        let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0).max(1.0);
        math::sqrt(var / n)
    }
}
