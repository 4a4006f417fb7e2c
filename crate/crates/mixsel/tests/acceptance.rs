//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p mixsel --test acceptance`. Set `ACCEPTANCE_ONLY`
//! to a comma-separated list of criterion numbers to run a subset.
//!
//! A failing sub-check listed in `KNOWN_UNATTAINABLE` is still printed as
//! FAIL but does not fail the process; any other failure does.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use mixsel::config::{LilModelKind, RunConfig};
use mixsel::experiments::{self, StudyResult};
use mixsel_core::divergence::{self, build_grid, Scheme};
use mixsel_core::entropy;
use mixsel_core::geometry::SamplerBox;
use mixsel_core::rng::{derive_seed, stream};
use mixsel_core::{density, LocationFamily, MixtureParams};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

/// `(criterion, sub-check)` pairs whose failure is analysed and expected.
/// The scaled inclusion `{N ≤ ε·r_min} ⊆ {h ≤ ε}` only follows from the
/// ratio bounds when `r_min·r_max ≤ 1`; on this family `r_max` is about 3.
const KNOWN_UNATTAINABLE: &[(u8, &str)] = &[(4, "scaled lower inclusion")];

struct Check {
    name: &'static str,
    pass: bool,
    detail: String,
}

fn check(name: &'static str, pass: bool, detail: impl Into<String>) -> Check {
    Check { name, pass, detail: detail.into() }
}

struct Criterion {
    id: u8,
    title: &'static str,
    limit: Duration,
    run: fn(&mut Shared) -> Vec<Check>,
}

/// Results reused across criteria.
#[derive(Default)]
struct Shared {
    selection: Option<(experiments::StudyRun, Duration)>,
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn load(name: &str) -> RunConfig {
    RunConfig::load(&configs().join(name)).expect("shipped config parses")
}

fn run(cfg: &RunConfig, threads: usize) -> experiments::StudyRun {
    experiments::run_study(cfg, threads).expect("study runs")
}

// ---------------------------------------------------------------------------

fn c1_divergence_oracles(_: &mut Shared) -> Vec<Check> {
    let fam = LocationFamily::standard(1);
    let fstar = MixtureParams::single(&[0.0]).unwrap();
    let grid = build_grid(&fstar, &fam, Scheme::UniformGrid { step: 0.01, radius: 20.0 }).unwrap();
    let mut h_err: f64 = 0.0;
    let mut chi_err: f64 = 0.0;
    for k in 1..=50 {
        let delta = k as f64 / 10.0;
        let f = MixtureParams::single(&[delta]).unwrap();
        let h = divergence::hellinger_to_fstar(&f, &grid).unwrap();
        let h_true = (2.0 * (1.0 - (-delta * delta / 8.0).exp())).sqrt();
        h_err = h_err.max((h - h_true).abs());
        let chi = divergence::chi_square(&f, &grid).unwrap();
        let chi_true = (delta * delta).exp_m1();
        chi_err = chi_err.max((chi - chi_true).abs() / chi_true.max(1.0));
    }
    vec![
        check("hellinger", h_err <= 1e-8, format!("max |h − closed form| = {h_err:.2e}")),
        check("chi-square", chi_err <= 1e-7, format!("max relative χ² error = {chi_err:.2e}")),
    ]
}

fn random_mixture(i: usize, seed: u64) -> MixtureParams {
    let sampler = SamplerBox { q: 1 + i % 3, dim: 1, lo: -2.0, hi: 2.0 };
    sampler.draw(&mut stream(seed, "acceptance-mixture", i as u64))
}

fn c2_weighted_density(_: &mut Shared) -> Vec<Check> {
    let fam = LocationFamily::standard(1);
    let fstar = MixtureParams::single(&[0.0]).unwrap();
    let grid = build_grid(&fstar, &fam, Scheme::UniformGrid { step: 0.01, radius: 20.0 }).unwrap();
    let (mut norm_err, mut mean_err): (f64, f64) = (0.0, 0.0);
    let mut tested = 0;
    for i in 0..100 {
        let f = random_mixture(i, 2);
        let Ok(d) = divergence::weighted_density(&f, &grid) else { continue };
        tested += 1;
        norm_err = norm_err.max((d.norm(&grid) - 1.0).abs());
        mean_err = mean_err.max((d.mean(&grid) + d.hellinger() / 2.0).abs());
    }
    vec![
        check("count", tested == 100, format!("{tested} mixtures")),
        check("unit norm", norm_err <= 1e-6, format!("max |‖d_f‖₂ − 1| = {norm_err:.2e}")),
        check("mean identity", mean_err <= 1e-6, format!("max |⟨1,d_f⟩ + h/2| = {mean_err:.2e}")),
    ]
}

/// Log-density of a unit-variance mixture, computed with statrs.
fn oracle_log_density(f: &MixtureParams, x: f64) -> f64 {
    let terms: Vec<f64> = f
        .components()
        .map(|(w, loc)| w.ln() + statrs::distribution::Continuous::ln_pdf(&Normal::new(loc[0], 1.0).unwrap(), x))
        .collect();
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    m + terms.iter().map(|t| (t - m).exp()).sum::<f64>().ln()
}

fn c3_likelihood_inequality(_: &mut Shared) -> Vec<Check> {
    let fam = LocationFamily::standard(1);
    let fstar = MixtureParams::single(&[0.0]).unwrap();
    let grid = build_grid(&fstar, &fam, Scheme::UniformGrid { step: 0.01, radius: 20.0 }).unwrap();
    let mut min_slack = f64::INFINITY;
    for i in 0..100 {
        let f = random_mixture(i, 3);
        let data = density::sample(&fstar, &fam, 500, derive_seed(3, "acceptance-data", i as u64)).unwrap();
        let d = divergence::weighted_density(&f, &grid).unwrap();
        let h = d.hellinger();
        let mut diff = 0.0;
        let mut sum_d = 0.0;
        for x in data.iter() {
            let (lf, ls) = (oracle_log_density(&f, x[0]), oracle_log_density(&fstar, x[0]));
            diff += lf - ls;
            sum_d += (0.5 * (lf - ls)).exp_m1() / h;
        }
        let n = data.len() as f64;
        let nu = (sum_d - n * d.mean(&grid)) / n.sqrt();
        min_slack = min_slack.min(nu * nu - diff);
    }
    vec![check("slack", min_slack >= -1e-6, format!("min ν_n(d_f)² − (ℓ_n(f) − ℓ_n(f*)) = {min_slack:.3e} over 100 pairs"))]
}

fn read_lattice(path: &Path) -> Vec<f64> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse().unwrap()).collect()
}

fn c4_sandwich_geometry(_: &mut Shared) -> Vec<Check> {
    let cfg = load("figure1.cfg");
    let dir = tempfile::tempdir().unwrap();
    let first = run(&cfg, 1);
    experiments::write_run(&cfg, &first, dir.path()).unwrap();
    let mut second_cfg = cfg.clone();
    second_cfg.seed = 2;
    if let Some(g) = second_cfg.geometry.as_mut() {
        g.resolution = 0;
    }
    let second = run(&second_cfg, 1);
    let (StudyResult::Geometry(a), StudyResult::Geometry(b)) = (&first.result, &second.result) else { unreachable!() };
    let g = cfg.geometry.as_ref().unwrap();
    let eps = g.epsilon;

    // Membership is evaluated on the emitted files, with r_min and r_max
    // recomputed from the same run.
    let hs = read_lattice(&dir.path().join("levelset_h.csv"));
    let ns = read_lattice(&dir.path().join("levelset_n.csv"));
    let mut r_min = a.ratio.ratio_min;
    let mut r_max = a.ratio.ratio_max;
    for (h, n) in hs.iter().zip(&ns) {
        if *n > 0.0 && *h > divergence::HELLINGER_FLOOR {
            r_min = r_min.min(h / n);
            r_max = r_max.max(h / n);
        }
    }
    let (mut scaled, mut lower, mut upper, mut in_h) = (0, 0, 0, 0);
    for (h, n) in hs.iter().zip(&ns) {
        let inside = *h <= eps;
        in_h += inside as usize;
        scaled += (*n <= eps * r_min && !inside) as usize;
        lower += (*n <= eps / r_max && !inside) as usize;
        upper += (inside && *n > eps / r_min) as usize;
    }
    let spread_a = a.ratio.spread();
    let spread_b = b.ratio.spread();
    let drift = (spread_a - spread_b).abs() / spread_a;
    let expected = g.resolution.pow(3);
    vec![
        check("samples", a.ratio.samples.len() == 100_000 && b.ratio.samples.len() == 100_000, "10⁵ samples per seed"),
        check("r_min positive", a.ratio.ratio_min > 0.0 && b.ratio.ratio_min > 0.0, format!("r_min {:.4} / {:.4}", a.ratio.ratio_min, b.ratio.ratio_min)),
        check("spread stable", drift <= 0.10, format!("r_max/r_min {spread_a:.4} vs {spread_b:.4} ({:.1}%)", 100.0 * drift)),
        check("lattice size", hs.len() == expected && ns.len() == expected, format!("{} lattice points, {in_h} in {{h ≤ {eps}}}", hs.len())),
        check("scaled lower inclusion", scaled == 0, format!("{{N ≤ ε·r_min}} ⊄ {{h ≤ ε}} at {scaled} points (r_min·r_max = {:.3})", r_min * r_max)),
        check("lower inclusion", lower == 0, format!("{{N ≤ ε/r_max}} ⊆ {{h ≤ ε}}: {lower} violations")),
        check("upper inclusion", upper == 0, format!("{{h ≤ ε}} ⊆ {{N ≤ ε/r_min}}: {upper} violations")),
    ]
}

fn c5_entropy_scaling(_: &mut Shared) -> Vec<Check> {
    let cfg = load("entropy.cfg");
    let out = run(&cfg, 1);
    let StudyResult::Entropy(rep) = &out.result else { unreachable!() };
    let qs = &cfg.entropy.as_ref().unwrap().q;
    let etas: Vec<f64> = qs.iter().map(|q| rep.curve(*q).unwrap().fit.eta_hat).collect();
    let r2s: Vec<f64> = qs.iter().map(|q| rep.curve(*q).unwrap().fit.r2).collect();
    let bounds_ok = qs.iter().zip(&etas).all(|(q, e)| *e <= 18.0 * 2.0 * *q as f64 + 1.0);
    // Independent recount of one packing number.
    let c1 = rep.curve(1).unwrap();
    let deltas = entropy::geometric_deltas(0.2, 0.75, 10);
    let deltas_ok = deltas.iter().zip(&c1.packing.deltas).all(|(a, b)| (a - b).abs() < 1e-15)
        && deltas.iter().enumerate().all(|(k, d)| (d - 0.2 * 0.75f64.powi(k as i32)).abs() < 1e-15);
    vec![
        check("three fits", etas.len() == 3 && out.artifact("fit.csv").is_some(), format!("q = {qs:?}")),
        check("affine", r2s.iter().all(|r| *r >= 0.95), format!("R² = {}", fmt_list(&r2s))),
        check("increasing", etas.windows(2).all(|w| w[1] > w[0]), format!("η̂ = {}", fmt_list(&etas))),
        check("bound", bounds_ok, "η̂(q) ≤ 36q + 1"),
        check("delta grid", deltas_ok, "geometric δ-grid ε·0.75^k"),
    ]
}

fn fmt_list(xs: &[f64]) -> String {
    xs.iter().map(|x| format!("{x:.3}")).collect::<Vec<_>>().join(", ")
}

fn c6_local_global(_: &mut Shared) -> Vec<Check> {
    let cfg = load("local_global.cfg");
    let out = run(&cfg, 1);
    let StudyResult::Entropy(rep) = &out.result else { unreachable!() };
    let mut checks = vec![check("ran", rep.local_global.len() == 1, "one order")];
    let Some((_, lg)) = rep.local_global.first() else { return checks };
    let c1 = 8.0 * lg.c0 * (lg.r_norm / (4.0 * lg.eps0)).max(1.0);
    let mut worst: f64 = 0.0;
    let mut admissible = true;
    let mut holds = true;
    for c in &lg.cases {
        admissible &= c.rho / c.delta < 4.0f64.min(2.0 * lg.r_norm);
        let bound = (c1 * c.delta / c.rho).powf(lg.exponent + 1.0);
        holds &= c.packing as f64 <= bound;
        worst = worst.max(c.packing as f64 / bound);
    }
    checks.push(check("constant", (c1 - lg.c1).abs() <= 1e-9 * c1, format!("C₀ {:.3}, ε₀ {}, ‖R‖₂ {:.2}, C₁ {:.1}", lg.c0, lg.eps0, lg.r_norm, c1)));
    checks.push(check("admissible", admissible, format!("{} (δ, ρ) pairs with ρ/δ < 4 ∧ 2‖R‖₂", lg.cases.len())));
    checks.push(check("bound", holds, format!("max packing/bound = {worst:.2e}, exponent {:.3}", lg.exponent)));
    checks
}

fn selection(shared: &mut Shared) -> &(experiments::StudyRun, Duration) {
    if shared.selection.is_none() {
        let cfg = load("inconsistency.cfg");
        let t0 = Instant::now();
        let out = run(&cfg, 1);
        shared.selection = Some((out, t0.elapsed()));
    }
    shared.selection.as_ref().unwrap()
}

fn c7_consistency(shared: &mut Shared) -> Vec<Check> {
    let (out, took) = selection(shared);
    let StudyResult::Selection(rep) = &out.result else { unreachable!() };
    let grid = [200, 500, 1000, 2000];
    let rows: Vec<_> = grid.iter().map(|n| rep.row(*n, "bic").unwrap()).collect();
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut min_p: f64 = 1.0;
    for w in rows.windows(2) {
        // One-sided two-proportion test of a decrease from w[0] to w[1].
        let (x1, x2) = (w[0].correct as f64, w[1].correct as f64);
        let (n1, n2) = (w[0].replicates as f64, w[1].replicates as f64);
        let pooled = (x1 + x2) / (n1 + n2);
        let se = (pooled * (1.0 - pooled) * (1.0 / n1 + 1.0 / n2)).sqrt();
        let z = if se > 0.0 { (x1 / n1 - x2 / n2) / se } else { 0.0 };
        min_p = min_p.min(1.0 - normal.cdf(z));
    }
    let fracs: Vec<f64> = rows.iter().map(|r| r.frac_correct()).collect();
    let partition = rep.summary.iter().all(|r| r.under + r.correct + r.over == r.replicates && r.replicates == 100);
    let paired = rep.records.iter().all(|r| r.q_hat.len() == rep.penalties.len());
    vec![
        check("replicates", partition && paired, format!("100 paired replicates per n ({:.0}s of fits, shared with #8)", took.as_secs_f64())),
        check("monotone trend", min_p >= 0.05, format!("correct fraction {} ; smallest one-sided p = {min_p:.3}", fmt_list(&fracs))),
        check("improves", fracs[3] > fracs[0], format!("{:.2} at n = 2000 vs {:.2} at n = 200", fracs[3], fracs[0])),
    ]
}

fn c8_inconsistency(shared: &mut Shared) -> Vec<Check> {
    let (out, _) = selection(shared);
    let StudyResult::Selection(rep) = &out.result else { unreachable!() };
    let k_small = rep.penalties.iter().position(|p| p.id() == "loglog:0.05").unwrap();
    let k_bic = rep.penalties.iter().position(|p| p.id() == "bic").unwrap();
    // Recount the discordant pairs from the per-replicate records.
    let (mut b, mut c) = (0i64, 0i64);
    for r in rep.records.iter().filter(|r| r.n == 2000) {
        let small_over = r.q_hat[k_small] > rep.q_star;
        let bic_over = r.q_hat[k_bic] > rep.q_star;
        b += (small_over && !bic_over) as i64;
        c += (bic_over && !small_over) as i64;
    }
    let row = rep.contrast_row(2000, "loglog:0.05").unwrap();
    vec![
        check("recount", row.discordance() == b - c, format!("{b} replicates overestimate only under loglog:0.05, {c} only under BIC")),
        check("contrast", b - c > 0 && row.over > row.bic_over, format!("overestimation {} vs {} of {}", row.over, row.bic_over, row.replicates)),
    ]
}

fn c9_lil(_: &mut Shared) -> Vec<Check> {
    let cfg = load("lil.cfg");
    let out = run(&cfg, 1);
    let StudyResult::Lil(rep) = &out.result else { unreachable!() };
    let lil = cfg.lil.as_ref().unwrap();
    let t19 = StudentsT::new(0.0, 1.0, (lil.replicates - 1) as f64).unwrap();
    let mut checks = Vec::new();

    // Closed-form regular statistic on replicate 0: sup over the ball of
    // the Gaussian loglik ratio is n(‖x̄‖² − (‖x̄‖ − T)₊²)/2.
    let fam = cfg.family().unwrap();
    let zero = MixtureParams::single(&[0.0]).unwrap();
    let path = density::sample(&zero, &fam, 1 << lil.max_exp, derive_seed(cfg.seed, "lil-regular", 0)).unwrap();
    let (_, _, traj) = rep.trajectories.iter().find(|(m, r, _)| *m == LilModelKind::Regular && *r == 0).unwrap();
    let mut err: f64 = 0.0;
    for (i, n) in traj.n.iter().enumerate() {
        let mean = path.iter().take(*n).map(|x| x[0]).sum::<f64>() / *n as f64;
        let excess = (mean.abs() - lil.radius).max(0.0);
        let lr = *n as f64 * (mean * mean - excess * excess) / 2.0;
        err = err.max((traj.lr_raw[i] - lr).abs() / lr.max(1.0));
    }
    checks.push(check("regular closed form", err <= 1e-6, format!("max relative LR error {err:.1e}")));

    for (model, name_max, name_slope) in [
        (LilModelKind::Regular, "regular bounded", "regular no growth"),
        (LilModelKind::Mixture, "mixture bounded", "mixture no growth"),
    ] {
        let s = rep.summary(model).unwrap();
        let slopes = rep.slopes(model);
        let k = slopes.len() as f64;
        let mean = slopes.iter().sum::<f64>() / k;
        let sd = (slopes.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt();
        let t = mean / (sd / k.sqrt());
        let p = 1.0 - t19.cdf(t);
        checks.push(check(name_max, s.replicates == 20 && s.max_w <= 5.0, format!("max W {:.3} over {} replicates", s.max_w, s.replicates)));
        checks.push(check(name_slope, p >= 0.05 && (t - s.slope_t).abs() < 1e-9, format!("mean slope {mean:.4}, t = {t:.2}, one-sided p = {p:.3}")));
    }
    checks
}

fn c10_determinism(_: &mut Shared) -> Vec<Check> {
    let reduced = [
        r#"
study = "inconsistency"
seed = 11
[truth]
weights = [0.5, 0.5]
locations = [[-1.0], [1.0]]
[fit]
starts = 3
max_iter = 200
[selection]
n_grid = [100, 200]
replicates = 6
penalties = ["bic", "loglog:0.05"]
sieve = "const:10"
q_cap = 3
"#,
        r#"
study = "lil"
seed = 11
[truth]
weights = [0.5, 0.5]
locations = [[-1.0], [1.0]]
[fit]
starts = 2
max_iter = 100
[lil]
replicates = 3
min_exp = 6
max_exp = 9
radius = 3.0
models = ["regular", "mixture"]
"#,
        r#"
study = "geometry"
seed = 11
[truth]
weights = [1.0]
locations = [[0.5]]
sigma = 0.5
[geometry]
q = 2
box_lo = 0.0
box_hi = 1.0
samples = 5000
resolution = 15
epsilon = 0.05
"#,
        r#"
study = "entropy"
seed = 11
[truth]
weights = [1.0]
locations = [[0.0]]
sigma = 0.5
[entropy]
q = [1, 2]
epsilon = 0.2
radius = 0.5
functions = 2000
ratio = 0.75
points = 6
[entropy.local_global]
weighted_functions = 2000
eps_max = 1.0
eps_ratio = 0.75
eps_points = 6
ratio_samples = 2000
pairs = [[0.1, 0.05], [0.2, 0.2]]
"#,
    ];
    let mut checks = Vec::new();
    for text in reduced {
        let cfg = RunConfig::from_toml(text).unwrap();
        let a = run(&cfg, 1);
        let b = run(&cfg, 3);
        let mut same = a.artifacts.len() == b.artifacts.len();
        let mut compared = Vec::new();
        for (x, y) in a.artifacts.iter().zip(&b.artifacts) {
            same &= x.name == y.name && strip_timing(&x.name, &x.contents) == strip_timing(&y.name, &y.contents);
            compared.push(x.name.clone());
        }
        let name = match cfg.study.name() {
            "inconsistency" => "selection",
            "lil" => "lil",
            "geometry" => "geometry",
            _ => "entropy",
        };
        checks.push(check(name, same, format!("{} identical with 1 and 3 threads", compared.join(", "))));
    }
    checks
}

/// Drop the wall-clock column of the per-replicate records.
fn strip_timing(name: &str, contents: &str) -> String {
    if name != "records.csv" {
        return contents.to_string();
    }
    contents.lines().map(|l| l.rsplit_once(',').map_or(l, |(head, _)| head)).collect::<Vec<_>>().join("\n")
}

fn main() {
    let criteria = [
        Criterion { id: 1, title: "closed-form divergence oracles", limit: Duration::from_secs(5), run: c1_divergence_oracles },
        Criterion { id: 2, title: "weighted-density identities", limit: Duration::from_secs(30), run: c2_weighted_density },
        Criterion { id: 3, title: "likelihood inequality", limit: Duration::from_secs(60), run: c3_likelihood_inequality },
        Criterion { id: 4, title: "hellinger vs pseudodistance geometry", limit: Duration::from_secs(300), run: c4_sandwich_geometry },
        Criterion { id: 5, title: "entropy scaling", limit: Duration::from_secs(600), run: c5_entropy_scaling },
        Criterion { id: 6, title: "local-global transfer", limit: Duration::from_secs(600), run: c6_local_global },
        Criterion { id: 7, title: "consistency", limit: Duration::from_secs(900), run: c7_consistency },
        Criterion { id: 8, title: "inconsistency contrast", limit: Duration::from_secs(900), run: c8_inconsistency },
        Criterion { id: 9, title: "LIL boundedness", limit: Duration::from_secs(1200), run: c9_lil },
        Criterion { id: 10, title: "determinism", limit: Duration::from_secs(120), run: c10_determinism },
    ];
    let only: Option<Vec<u8>> =
        std::env::var("ACCEPTANCE_ONLY").ok().map(|s| s.split(',').filter_map(|t| t.trim().parse().ok()).collect());
    let mut shared = Shared::default();
    let mut unexpected = 0;
    for c in &criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&c.id)) {
            continue;
        }
        let t0 = Instant::now();
        let mut checks = (c.run)(&mut shared);
        let took = t0.elapsed();
        checks.push(check("runtime", took <= c.limit, format!("{:.1}s of {}s", took.as_secs_f64(), c.limit.as_secs())));
        let failed: Vec<&Check> = checks.iter().filter(|k| !k.pass).collect();
        let status = if failed.is_empty() { "PASS" } else { "FAIL" };
        let known = failed.iter().all(|k| KNOWN_UNATTAINABLE.contains(&(c.id, k.name)));
        if !failed.is_empty() && !known {
            unexpected += 1;
        }
        let detail: Vec<String> = checks.iter().map(|k| format!("{}{}: {}", if k.pass { "" } else { "✗ " }, k.name, k.detail)).collect();
        let note = if !failed.is_empty() && known { " [known unattainable]" } else { "" };
        println!("{status} {:>2} {}{note} | {}", c.id, c.title, detail.join("; "));
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criterion/criteria failed unexpectedly");
        std::process::exit(1);
    }
}
