//! Compact string forms for penalties, rates and sieve schedules.
//!
//! Penalties: `bic`, `loglog:C`, `linear:RATE`, `eta:ETA:RATE`, where RATE is
//! `log`, `loglog`, `power<a>` or `const<c>` and ETA is `q`, `<a>q+<b>` or
//! `bound<d>`. These are exactly the strings produced by `Penalty::id`.
//!
//! Sieves: `const:T`, `sqrt-loglog:c`, `log-power:c:exponent`.

use mixsel_core::order::{EtaSpec, Penalty, RateSpec};
use mixsel_core::SieveSchedule;

use crate::error::{MixselError, Result};

fn bad(what: &str, s: &str) -> MixselError {
    MixselError::Config(format!("invalid {what} `{s}`"))
}

fn num(s: &str, what: &str, whole: &str) -> Result<f64> {
    s.parse::<f64>().map_err(|_| bad(what, whole))
}

pub fn parse_rate(s: &str) -> Result<RateSpec> {
    let rate = match s {
        "log" => RateSpec::Log,
        "loglog" => RateSpec::LogLog,
        _ if s.starts_with("power") => RateSpec::Power(num(&s[5..], "rate", s)?),
        _ if s.starts_with("const") => RateSpec::Constant(num(&s[5..], "rate", s)?),
        _ => return Err(bad("rate", s)),
    };
    rate.validate().map_err(|e| MixselError::Config(format!("rate `{s}`: {e}")))?;
    Ok(rate)
}

pub fn parse_eta(s: &str) -> Result<EtaSpec> {
    if s == "q" {
        return Ok(EtaSpec::Identity);
    }
    if let Some(d) = s.strip_prefix("bound") {
        return Ok(EtaSpec::MixtureBound { d: d.parse().map_err(|_| bad("eta", s))? });
    }
    let (a, b) = s.split_once("q+").ok_or_else(|| bad("eta", s))?;
    Ok(EtaSpec::Affine { slope: num(a, "eta", s)?, intercept: num(b, "eta", s)? })
}

pub fn parse_penalty(s: &str) -> Result<Penalty> {
    let parts: Vec<&str> = s.split(':').collect();
    let pen = match parts.as_slice() {
        ["bic"] => Ok(Penalty::Bic),
        ["loglog", c] => Penalty::loglog(num(c, "penalty", s)?),
        ["linear", rate] => Penalty::linear_q(parse_rate(rate)?),
        ["eta", eta, rate] => Penalty::eta_varpi(parse_eta(eta)?, parse_rate(rate)?),
        _ => return Err(bad("penalty", s)),
    };
    pen.map_err(|e| MixselError::Config(format!("penalty `{s}`: {e}")))
}

pub fn parse_sieve(s: &str) -> Result<SieveSchedule> {
    let parts: Vec<&str> = s.split(':').collect();
    let sieve = match parts.as_slice() {
        ["const", t] => SieveSchedule::Constant(num(t, "sieve", s)?),
        ["sqrt-loglog", c] => SieveSchedule::SqrtLogLog { c: num(c, "sieve", s)? },
        ["log-power", c, e] => SieveSchedule::LogPower { c: num(c, "sieve", s)?, exponent: num(e, "sieve", s)? },
        _ => return Err(bad("sieve", s)),
    };
    sieve.validate().map_err(|e| MixselError::Config(format!("sieve `{s}`: {e}")))?;
    Ok(sieve)
}

pub fn sieve_id(s: &SieveSchedule) -> String {
    match s {
        SieveSchedule::Constant(t) => format!("const:{t}"),
        SieveSchedule::SqrtLogLog { c } => format!("sqrt-loglog:{c}"),
        SieveSchedule::LogPower { c, exponent } => format!("log-power:{c}:{exponent}"),
    }
}
