//! Penalties and the penalized-likelihood order estimator
//! `q̂ = argmax_q { sup ℓ_n − pen(n, q) }`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::density::{Dataset, LocationFamily, ParamBall, SieveSchedule};
use crate::em::{self, FitOptions};
use crate::error::{Error, Result};
use crate::math;

/// Default cap on the scanned orders.
pub const DEFAULT_Q_CAP: usize = 32;

/// Growth rate `ω(n)` or `ϖ(n)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateSpec {
    /// `n^a` with `0 < a < 1`.
    Power(f64),
    Log,
    LogLog,
    Constant(f64),
}

impl RateSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            RateSpec::Power(a) if !(a > 0.0 && a < 1.0) => Err(Error::invalid("power rate needs 0 < a < 1")),
            RateSpec::Constant(c) if !(c > 0.0 && c.is_finite()) => Err(Error::invalid("constant rate must be positive")),
            _ => Ok(()),
        }
    }

    pub fn value(&self, n: usize) -> Result<f64> {
        self.validate()?;
        let nf = n as f64;
        match *self {
            RateSpec::Power(a) => Ok(math::pow(nf, a)),
            RateSpec::Log if n >= 2 => Ok(math::ln(nf)),
            RateSpec::LogLog if n >= 3 => Ok(math::ln_ln(nf)),
            RateSpec::Constant(c) => Ok(c),
            _ => Err(Error::invalid("rate undefined at this sample size")),
        }
    }

    pub fn id(&self) -> String {
        match self {
            RateSpec::Power(a) => format!("power{a}"),
            RateSpec::Log => "log".into(),
            RateSpec::LogLog => "loglog".into(),
            RateSpec::Constant(c) => format!("const{c}"),
        }
    }
}

/// `η(q)`; all variants are strictly increasing with `η(q) ≥ q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaSpec {
    Identity,
    /// `slope·q + intercept` with `slope ≥ 1`, `intercept ≥ 0`.
    Affine { slope: f64, intercept: f64 },
    /// `18(d+1)q + 1`, the entropy exponent bound for `d`-dimensional
    /// location mixtures.
    MixtureBound { d: usize },
}

impl EtaSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            EtaSpec::Affine { slope, intercept } if !(slope >= 1.0 && intercept >= 0.0 && slope.is_finite() && intercept.is_finite()) => {
                Err(Error::invalid("affine η needs slope ≥ 1 and intercept ≥ 0"))
            }
            EtaSpec::MixtureBound { d: 0 } => Err(Error::invalid("dimension must be positive")),
            _ => Ok(()),
        }
    }

    pub fn value(&self, q: usize) -> f64 {
        let qf = q as f64;
        match *self {
            EtaSpec::Identity => qf,
            EtaSpec::Affine { slope, intercept } => slope * qf + intercept,
            EtaSpec::MixtureBound { d } => 18.0 * (d as f64 + 1.0) * qf + 1.0,
        }
    }

    pub fn id(&self) -> String {
        match self {
            EtaSpec::Identity => "q".into(),
            EtaSpec::Affine { slope, intercept } => format!("{slope}q+{intercept}"),
            EtaSpec::MixtureBound { d } => format!("bound{d}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Penalty {
    /// `((dq + q − 1)/2)·log n`.
    Bic,
    /// `q·ω(n)`.
    LinearQ(RateSpec),
    /// `C·q·log log n`.
    LogLog { c: f64 },
    /// `η(q)·ϖ(n)`.
    EtaVarpi { eta: EtaSpec, varpi: RateSpec },
}

impl Penalty {
    pub fn bic() -> Penalty {
        Penalty::Bic
    }

    pub fn linear_q(rate: RateSpec) -> Result<Penalty> {
        let p = Penalty::LinearQ(rate);
        p.validate()?;
        Ok(p)
    }

    pub fn loglog(c: f64) -> Result<Penalty> {
        let p = Penalty::LogLog { c };
        p.validate()?;
        Ok(p)
    }

    pub fn eta_varpi(eta: EtaSpec, varpi: RateSpec) -> Result<Penalty> {
        let p = Penalty::EtaVarpi { eta, varpi };
        p.validate()?;
        Ok(p)
    }

    /// Rejects penalties that are not strictly increasing in `q`.
    pub fn validate(&self) -> Result<()> {
        match self {
            Penalty::Bic => Ok(()),
            Penalty::LinearQ(r) => r.validate(),
            Penalty::LogLog { c } => {
                if *c > 0.0 && c.is_finite() {
                    Ok(())
                } else {
                    Err(Error::invalid("log log penalty constant must be positive"))
                }
            }
            Penalty::EtaVarpi { eta, varpi } => {
                eta.validate()?;
                varpi.validate()
            }
        }
    }

    pub fn value(&self, n: usize, q: usize, d: usize) -> Result<f64> {
        penalty_value(self, n, q, d)
    }

    /// Short label used in tables, e.g. `bic`, `loglog:0.05`, `linear:loglog`.
    pub fn id(&self) -> String {
        match self {
            Penalty::Bic => "bic".into(),
            Penalty::LinearQ(r) => format!("linear:{}", r.id()),
            Penalty::LogLog { c } => format!("loglog:{c}"),
            Penalty::EtaVarpi { eta, varpi } => format!("eta:{}:{}", eta.id(), varpi.id()),
        }
    }
}

pub fn penalty_value(pen: &Penalty, n: usize, q: usize, d: usize) -> Result<f64> {
    pen.validate()?;
    if q == 0 || d == 0 || n == 0 {
        return Err(Error::invalid("q, d and n must be positive"));
    }
    let qf = q as f64;
    match pen {
        Penalty::Bic => {
            if n < 2 {
                return Err(Error::invalid("BIC needs n ≥ 2"));
            }
            Ok(((d as f64) * qf + qf - 1.0) / 2.0 * math::ln(n as f64))
        }
        Penalty::LinearQ(rate) => Ok(qf * rate.value(n)?),
        Penalty::LogLog { c } => {
            if n < 3 {
                return Err(Error::invalid("log log penalty needs n ≥ 3"));
            }
            Ok(c * qf * math::ln_ln(n as f64))
        }
        Penalty::EtaVarpi { eta, varpi } => Ok(eta.value(q) * varpi.value(n)?),
    }
}

/// Largest order worth fitting: the smallest `q_b` with
/// `pen(q_b) − pen(1) > n·log f₀(0) − score₁`, or `q_cap` if none.
/// Since `ℓ_n ≤ n·log f₀(0)` for every location mixture, no order past
/// `q_b` can beat `q = 1`.
pub fn scan_bound(family: &LocationFamily, pen: &Penalty, n: usize, d: usize, score_1: f64, q_cap: usize) -> Result<usize> {
    if q_cap == 0 {
        return Err(Error::invalid("q_cap must be at least 1"));
    }
    let gap = (n as f64 * family.max_log_f0() - score_1).max(0.0);
    let base = penalty_value(pen, n, 1, d)?;
    for q in 2..=q_cap {
        if penalty_value(pen, n, q, d)? - base > gap {
            return Ok(q);
        }
    }
    Ok(q_cap)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderRow {
    pub q: usize,
    pub score: f64,
    pub penalty: f64,
    pub criterion: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OrderEstimate {
    pub q_hat: usize,
    pub rows: Vec<OrderRow>,
    pub scan_bound: usize,
    pub sieve_radius: f64,
}

/// Apply `pen` to scores for `q = 1, 2, …` (index `q − 1`). Ties go to the
/// smaller `q`.
pub fn select_from_scores(scores: &[f64], pen: &Penalty, n: usize, d: usize, sieve_radius: f64) -> Result<OrderEstimate> {
    if scores.is_empty() {
        return Err(Error::invalid("no scores"));
    }
    let mut rows = Vec::with_capacity(scores.len());
    let mut q_hat = 1;
    let mut best = f64::NEG_INFINITY;
    for (i, s) in scores.iter().enumerate() {
        let q = i + 1;
        let penalty = penalty_value(pen, n, q, d)?;
        let criterion = s - penalty;
        if criterion > best {
            best = criterion;
            q_hat = q;
        }
        rows.push(OrderRow { q, score: *s, penalty, criterion });
    }
    Ok(OrderEstimate { q_hat, rows, scan_bound: scores.len(), sieve_radius })
}

/// Fit `q = 1, 2, …` up to the scan bound in the sieve ball `T(n)` and pick
/// the penalized maximizer.
pub fn estimate_order(
    data: &Dataset,
    family: &LocationFamily,
    pen: &Penalty,
    sieve: &SieveSchedule,
    opts: &FitOptions,
    q_cap: usize,
) -> Result<OrderEstimate> {
    pen.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("empty dataset"));
    }
    let n = data.len();
    let d = data.dim();
    let radius = sieve.radius(n)?;
    let ball = ParamBall::new(radius)?;
    let first = em::fit_constrained(1, data, family, &ball, opts)?;
    let bound = scan_bound(family, pen, n, d, first.loglik, q_cap)?;
    let mut scores = Vec::with_capacity(bound);
    scores.push(first.loglik);
    let mut prev = first.params;
    for q in 2..=bound {
        let fit = em::fit_constrained_warm(q, data, family, &ball, opts, &em::grow_starts(&prev, q, family, &ball))?;
        scores.push(fit.loglik);
        prev = fit.params;
    }
    select_from_scores(&scores, pen, n, d, radius)
}
