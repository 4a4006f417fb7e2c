//! Population divergences by quadrature, weighted densities `d_f`, and the
//! empirical process.
//!
//! Hellinger distance follows `h(f,g)² = ∫(√f − √g)² dμ`, so `h ∈ [0, √2]`.
//! All integrands are formed from log densities; the square-root differences
//! use `expm1` of half the log ratio to avoid cancellation near `f ≈ g`.

mod grid;
mod hermite;

pub use grid::{build_grid, default_truncation_radius, QuadratureGrid, Scheme, MAX_TAIL_MASS};
pub use hermite::{gauss_hermite, HermiteRule};

use alloc::vec::Vec;

use crate::density::{self, Dataset, LocationFamily, MixtureParams};
use crate::error::{Error, Result};
use crate::math;

/// Below this Hellinger distance `d_f` is treated as undefined.
pub const HELLINGER_FLOOR: f64 = 1e-12;

fn check_dims(mix: &MixtureParams, grid: &QuadratureGrid) -> Result<()> {
    if mix.dim() != grid.dim() {
        return Err(Error::invalid("mixture and grid dimensions differ"));
    }
    Ok(())
}

/// Hellinger distance from precomputed node log densities.
pub fn hellinger_from_logs(grid: &QuadratureGrid, lf: &[f64], lg: &[f64]) -> f64 {
    let mut acc = 0.0;
    for ((w, a), b) in grid.weights().iter().zip(lf).zip(lg) {
        let (hi, lo) = if a >= b { (*a, *b) } else { (*b, *a) };
        if hi == f64::NEG_INFINITY {
            continue;
        }
        let e = math::expm1(0.5 * (lo - hi));
        acc += w * math::exp(hi) * e * e;
    }
    math::sqrt(acc)
}

pub fn hellinger(f: &MixtureParams, g: &MixtureParams, grid: &QuadratureGrid) -> Result<f64> {
    check_dims(f, grid)?;
    check_dims(g, grid)?;
    if f == g {
        return Ok(0.0);
    }
    let lf = grid.log_density_at_nodes(f);
    let lg = grid.log_density_at_nodes(g);
    Ok(hellinger_from_logs(grid, &lf, &lg))
}

/// `h(f, f*)` reusing the grid's cached `log f*`.
pub fn hellinger_to_fstar(f: &MixtureParams, grid: &QuadratureGrid) -> Result<f64> {
    check_dims(f, grid)?;
    Ok(hellinger_from_logs(grid, &grid.log_density_at_nodes(f), grid.log_fstar()))
}

/// `χ²(f, f*) = ‖f/f* − 1‖₂²` in `L²(f* dμ)`, against the grid's `f*`.
pub fn chi_square(f: &MixtureParams, grid: &QuadratureGrid) -> Result<f64> {
    check_dims(f, grid)?;
    let lf = grid.log_density_at_nodes(f);
    let mut acc = 0.0;
    for ((w, a), b) in grid.fstar_weights().iter().zip(&lf).zip(grid.log_fstar()) {
        let e = math::expm1(a - b);
        let term = w * e * e;
        if !term.is_finite() {
            return Err(Error::Divergent);
        }
        acc += term;
    }
    if !acc.is_finite() {
        return Err(Error::Divergent);
    }
    Ok(acc)
}

/// Relative entropy `D(f*‖f) = ∫ log(f*/f) f* dμ`.
pub fn kl(f: &MixtureParams, grid: &QuadratureGrid) -> Result<f64> {
    check_dims(f, grid)?;
    let lf = grid.log_density_at_nodes(f);
    Ok(grid.fstar_weights().iter().zip(&lf).zip(grid.log_fstar()).map(|((w, a), b)| w * (b - a)).sum())
}

/// `‖f − f*‖₁ = ∫|f − f*| dμ`.
pub fn l1_to_fstar(f: &MixtureParams, grid: &QuadratureGrid) -> Result<f64> {
    check_dims(f, grid)?;
    let lf = grid.log_density_at_nodes(f);
    Ok(l1_from_logs(grid, &lf))
}

pub fn l1_from_logs(grid: &QuadratureGrid, lf: &[f64]) -> f64 {
    grid.fstar_weights().iter().zip(lf).zip(grid.log_fstar()).map(|((w, a), b)| w * math::abs(math::expm1(a - b))).sum()
}

/// `d_f = (√(f/f*) − 1)/h(f, f*)`, a unit vector in `L²(f* dμ)`.
#[derive(Debug, Clone)]
pub struct WeightedDensity {
    f: MixtureParams,
    fstar: MixtureParams,
    family: LocationFamily,
    hellinger: f64,
}

impl WeightedDensity {
    pub fn hellinger(&self) -> f64 {
        self.hellinger
    }

    pub fn f(&self) -> &MixtureParams {
        &self.f
    }

    pub fn fstar(&self) -> &MixtureParams {
        &self.fstar
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let lf = density::log_density_unchecked(&self.f, &self.family, x);
        let ls = density::log_density_unchecked(&self.fstar, &self.family, x);
        math::expm1(0.5 * (lf - ls)) / self.hellinger
    }

    /// Values at the grid nodes (grid must be built for the same `f*`).
    pub fn values(&self, grid: &QuadratureGrid) -> Vec<f64> {
        grid.log_density_at_nodes(&self.f)
            .iter()
            .zip(grid.log_fstar())
            .map(|(a, b)| math::expm1(0.5 * (a - b)) / self.hellinger)
            .collect()
    }

    pub fn norm(&self, grid: &QuadratureGrid) -> f64 {
        grid.lp_norm(&self.values(grid), 2.0)
    }

    /// `⟨1, d_f⟩ = E*[d_f]`.
    pub fn mean(&self, grid: &QuadratureGrid) -> f64 {
        grid.fstar_weights().iter().zip(self.values(grid)).map(|(w, v)| w * v).sum()
    }
}

pub fn weighted_density(f: &MixtureParams, grid: &QuadratureGrid) -> Result<WeightedDensity> {
    let h = hellinger_to_fstar(f, grid)?;
    if !(h > HELLINGER_FLOOR) {
        return Err(Error::DegenerateWeighting { hellinger: h });
    }
    Ok(WeightedDensity { f: f.clone(), fstar: grid.fstar().clone(), family: *grid.family(), hellinger: h })
}

/// `ν_n(g) = n^{-1/2} Σ_k {g(X_k) − E g}` with the mean supplied by the caller.
pub fn empirical_process<G: Fn(&[f64]) -> f64>(g: G, data: &Dataset, mean_g: f64) -> f64 {
    let n = data.len() as f64;
    let s: f64 = data.iter().map(|x| g(x) - mean_g).sum();
    s / math::sqrt(n)
}

/// `I_n(g) = ν_n(g) / √(2 log log n)`; requires `n ≥ 3`.
pub fn strassen_normalized<G: Fn(&[f64]) -> f64>(g: G, data: &Dataset, mean_g: f64) -> Result<f64> {
    let n = data.len();
    if n < 3 {
        return Err(Error::invalid("Strassen normalization needs n ≥ 3"));
    }
    let nu = empirical_process(g, data, mean_g);
    Ok(nu / math::sqrt(2.0 * math::ln_ln(n as f64)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::density::Provenance;

    fn std_grid(fstar: &MixtureParams) -> QuadratureGrid {
        build_grid(fstar, &LocationFamily::standard(1), Scheme::UniformGrid { step: 0.01, radius: 20.0 }).unwrap()
    }

    #[test]
    fn grid_normalizes_standard_gaussian() {
        let fstar = MixtureParams::single(&[0.0]).unwrap();
        let g = build_grid(&fstar, &LocationFamily::standard(1), Scheme::UniformGrid { step: 0.01, radius: 10.0 }).unwrap();
        let total: f64 = g.fstar_weights().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
        let again = build_grid(&fstar, &LocationFamily::standard(1), Scheme::UniformGrid { step: 0.01, radius: 10.0 }).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn small_grid_refused() {
        let fstar = MixtureParams::single(&[0.0]).unwrap();
        let r = build_grid(&fstar, &LocationFamily::standard(1), Scheme::UniformGrid { step: 0.01, radius: 1.0 });
        match r {
            Err(Error::GridTooSmall { tail_mass }) => assert!((tail_mass - 0.3173).abs() < 1e-3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn gauss_hermite_grid_matches_uniform() {
        let fam = LocationFamily::standard(1);
        let fstar = MixtureParams::new(alloc::vec![0.5, 0.5], alloc::vec![-1.0, 1.0], 1).unwrap();
        let gh = build_grid(&fstar, &fam, Scheme::TensorGaussHermite { order: 60, scale: None }).unwrap();
        let un = std_grid(&fstar);
        let f = MixtureParams::new(alloc::vec![0.3, 0.7], alloc::vec![-0.4, 1.6], 1).unwrap();
        let a = hellinger_to_fstar(&f, &gh).unwrap();
        let b = hellinger_to_fstar(&f, &un).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn two_dimensional_tensor_grid() {
        let fam = LocationFamily::standard(2);
        let fstar = MixtureParams::single(&[0.0, 0.0]).unwrap();
        let gh = build_grid(&fstar, &fam, Scheme::TensorGaussHermite { order: 30, scale: None }).unwrap();
        assert_eq!(gh.len(), 900);
        let f = MixtureParams::single(&[0.6, 0.8]).unwrap();
        let expect = math::sqrt(2.0 * (1.0 - math::exp(-1.0 / 8.0)));
        assert!((hellinger_to_fstar(&f, &gh).unwrap() - expect).abs() < 1e-10);
    }

    #[test]
    fn monte_carlo_grid_reports_error() {
        let fam = LocationFamily::standard(3);
        let fstar = MixtureParams::single(&[0.0, 0.0, 0.0]).unwrap();
        let mc = build_grid(&fstar, &fam, Scheme::MonteCarlo { samples: 20_000, seed: 3 }).unwrap();
        let f = MixtureParams::single(&[0.5, 0.0, 0.0]).unwrap();
        let expect = 2.0 * (1.0 - math::exp(-0.25 / 8.0));
        let h2 = hellinger_to_fstar(&f, &mc).unwrap().powi(2);
        let lf = |x: &[f64]| math::exp(density::log_density_unchecked(&f, &fam, x));
        let ls = |x: &[f64]| math::exp(density::log_density_unchecked(&fstar, &fam, x));
        let se = mc.standard_error(|x| (math::sqrt(lf(x)) - math::sqrt(ls(x))).powi(2));
        assert!(se > 0.0);
        assert!((h2 - expect).abs() < 5.0 * se);
    }

    #[test]
    fn hellinger_identities() {
        let fstar = MixtureParams::single(&[0.0]).unwrap();
        let grid = std_grid(&fstar);
        let f = MixtureParams::single(&[1.0]).unwrap();
        assert_eq!(hellinger(&f, &f, &grid).unwrap(), 0.0);
        let h = hellinger(&f, &fstar, &grid).unwrap();
        assert!((h - 0.484_775).abs() < 1e-6);
        assert_eq!(h, hellinger(&fstar, &f, &grid).unwrap());
    }

    #[test]
    fn chi_square_and_kl_closed_forms() {
        let fstar = MixtureParams::single(&[0.0]).unwrap();
        let grid = std_grid(&fstar);
        assert_eq!(chi_square(&fstar, &grid).unwrap(), 0.0);
        assert_eq!(kl(&fstar, &grid).unwrap(), 0.0);
        let half = MixtureParams::single(&[0.5]).unwrap();
        assert!((chi_square(&half, &grid).unwrap() - 0.284_025_4).abs() < 1e-7);
        let one = MixtureParams::single(&[1.0]).unwrap();
        assert!((chi_square(&one, &grid).unwrap() - 1.718_281_8).abs() < 1e-7);
        assert!((kl(&one, &grid).unwrap() - 0.5).abs() < 1e-8);
    }

    #[test]
    fn chi_square_reports_divergence() {
        let fstar = MixtureParams::single(&[0.0]).unwrap();
        let grid = build_grid(&fstar, &LocationFamily::standard(1), Scheme::UniformGrid { step: 0.05, radius: 400.0 }).unwrap();
        let far = MixtureParams::single(&[40.0]).unwrap();
        assert_eq!(chi_square(&far, &grid), Err(Error::Divergent));
    }

    #[test]
    fn weighted_density_rejects_fstar() {
        let fstar = MixtureParams::single(&[0.0]).unwrap();
        let grid = std_grid(&fstar);
        assert!(matches!(weighted_density(&fstar, &grid), Err(Error::DegenerateWeighting { .. })));
        let f = MixtureParams::new(alloc::vec![0.4, 0.6], alloc::vec![-0.3, 0.9], 1).unwrap();
        let d = weighted_density(&f, &grid).unwrap();
        assert!((d.norm(&grid) - 1.0).abs() < 1e-9);
        assert!((d.mean(&grid) + d.hellinger() / 2.0).abs() < 1e-9);
    }

    #[test]
    fn empirical_process_definitions() {
        let data = Dataset::new(alloc::vec![0.5, 1.5, -2.0, 4.0], 1, Provenance::Simulated { seed: 0 }).unwrap();
        assert_eq!(empirical_process(|_| 3.0, &data, 3.0), 0.0);
        let one = data.prefix(1).unwrap();
        assert_eq!(empirical_process(|x| x[0] * 2.0, &one, 0.25), 0.75);
        let nu = empirical_process(|x| x[0], &data, 0.1);
        let i = strassen_normalized(|x| x[0], &data, 0.1).unwrap();
        assert!((i - nu / math::sqrt(2.0 * math::ln_ln(4.0))).abs() < 1e-15);
        assert!(strassen_normalized(|x| x[0], &data.prefix(2).unwrap(), 0.0).is_err());
    }

    #[test]
    fn strassen_at_sixteen_points() {
        let pts: Vec<f64> = (0..16).map(|k| k as f64 * 0.25 - 1.0).collect();
        let data = Dataset::new(pts.clone(), 1, Provenance::Simulated { seed: 0 }).unwrap();
        let i = strassen_normalized(|x| x[0] * x[0], &data, 1.0).unwrap();
        // independent evaluation: Σ(g − m)/√(2·n·log log n)
        let s: f64 = pts.iter().map(|x| x * x - 1.0).sum();
        let expect = s / (2.0 * 16.0 * (16f64).ln().ln()).sqrt();
        assert!((i - expect).abs() < 1e-13);
    }
}
