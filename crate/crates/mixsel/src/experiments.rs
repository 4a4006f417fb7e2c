//! Study drivers. Replicates are the unit of parallelism: each owns seeds
//! derived from the master seed and its index, and results are collected in
//! index order, so every output is independent of the thread count.

use std::path::Path;
use std::time::Instant;

use mixsel_core::divergence::{build_grid, QuadratureGrid};
use mixsel_core::em::{self, LilModel, LilTrajectory};
use mixsel_core::entropy::{self, ClassKind, CloudSampler, EntropyCurve, FunctionCloud, LocalGlobalReport};
use mixsel_core::geometry::{
    self, EnvelopeNorms, GeometryReport, LevelSetBuilder, LevelSetGrid, Partition, RatioSample, RatioStudy, SamplerBox,
};
use mixsel_core::order::{self, Penalty};
use mixsel_core::rng::derive_seed;
use mixsel_core::{density, LocationFamily, MixtureParams, ParamBall, SieveSchedule};
use rayon::prelude::*;

use crate::config::{LilModelKind, RunConfig, Study};
use crate::error::{MixselError, Result};
use crate::io;
use crate::manifest::build_manifest;

/// One output file, held in memory until written.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub enum StudyResult {
    Selection(SelectionReport),
    Lil(LilReport),
    Geometry(Box<GeometryStudyReport>),
    Entropy(EntropyStudyReport),
}

#[derive(Debug, Clone)]
pub struct StudyRun {
    pub study: Study,
    pub artifacts: Vec<Artifact>,
    /// Top-level `(label, index)` streams drawn from the master seed.
    pub seeds: Vec<(String, u64)>,
    pub result: StudyResult,
}

impl StudyRun {
    pub fn artifact(&self, name: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.name == name)
    }
}

/// Thread count: explicit value, then `MIXSEL_THREADS`, then the config,
/// then the machine's parallelism.
pub fn resolve_threads(explicit: Option<usize>, cfg: &RunConfig) -> Result<usize> {
    let from_env = match std::env::var("MIXSEL_THREADS") {
        Ok(v) => Some(v.trim().parse::<usize>().map_err(|_| MixselError::Config(format!("MIXSEL_THREADS={v} is not a count")))?),
        Err(_) => None,
    };
    let n = explicit
        .or(from_env)
        .or(cfg.threads)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if n == 0 {
        return Err(MixselError::Config("thread count must be positive".into()));
    }
    Ok(n)
}

/// Run the configured study on a pool of `threads` workers.
pub fn run_study(cfg: &RunConfig, threads: usize) -> Result<StudyRun> {
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| MixselError::Config(format!("thread pool: {e}")))?;
    log::info!("running {} study with {threads} thread(s)", cfg.study.name());
    let t0 = Instant::now();
    let run = pool.install(|| match cfg.study {
        Study::Consistency | Study::Inconsistency => run_selection(cfg),
        Study::Lil => run_lil(cfg),
        Study::Geometry => run_geometry(cfg),
        Study::Entropy => run_entropy(cfg),
    })?;
    log::info!("{} study finished in {:.1?}", cfg.study.name(), t0.elapsed());
    Ok(run)
}

/// Write every artifact and `manifest.json` into `dir`.
pub fn write_run(cfg: &RunConfig, run: &StudyRun, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| MixselError::io(dir, e))?;
    for a in &run.artifacts {
        io::write_file(&dir.join(&a.name), &a.contents)?;
    }
    io::write_file(&dir.join("manifest.json"), &build_manifest(cfg, run).to_json())
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8")
}

fn join<T: ToString>(xs: impl IntoIterator<Item = T>) -> String {
    xs.into_iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn grid_for(cfg: &RunConfig, fstar: &MixtureParams, family: &LocationFamily) -> Result<QuadratureGrid> {
    Ok(build_grid(fstar, family, cfg.scheme(derive_seed(cfg.seed, "quadrature", 0)))?)
}

// ---------------------------------------------------------------------------
// Consistency and inconsistency

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub n: usize,
    pub seed: u64,
    /// Maximized loglik for `q = 1, 2, …`; shared by every penalty.
    pub scores: Vec<f64>,
    /// Selected order per penalty, in penalty order.
    pub q_hat: Vec<usize>,
    pub wall_ms: u128,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub n: usize,
    pub penalty_id: String,
    pub under: usize,
    pub correct: usize,
    pub over: usize,
    pub replicates: usize,
}

impl SummaryRow {
    pub fn frac_under(&self) -> f64 {
        self.under as f64 / self.replicates as f64
    }
    pub fn frac_correct(&self) -> f64 {
        self.correct as f64 / self.replicates as f64
    }
    pub fn frac_over(&self) -> f64 {
        self.over as f64 / self.replicates as f64
    }
}

/// Paired overestimation counts of one penalty against BIC at one `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastRow {
    pub n: usize,
    pub penalty_id: String,
    pub over: usize,
    pub bic_over: usize,
    /// Replicates where the penalty overestimates and BIC does not.
    pub only_penalty: usize,
    /// Replicates where BIC overestimates and the penalty does not.
    pub only_bic: usize,
    pub replicates: usize,
}

impl ContrastRow {
    /// `only_penalty − only_bic`.
    pub fn discordance(&self) -> i64 {
        self.only_penalty as i64 - self.only_bic as i64
    }

    pub fn over_ratio(&self) -> f64 {
        self.over as f64 / self.bic_over as f64
    }
}

#[derive(Debug, Clone)]
pub struct SelectionReport {
    pub q_star: usize,
    pub penalties: Vec<Penalty>,
    pub records: Vec<ReplicateRecord>,
    pub summary: Vec<SummaryRow>,
    pub contrast: Vec<ContrastRow>,
}

impl SelectionReport {
    pub fn row(&self, n: usize, penalty_id: &str) -> Option<&SummaryRow> {
        self.summary.iter().find(|r| r.n == n && r.penalty_id == penalty_id)
    }

    pub fn contrast_row(&self, n: usize, penalty_id: &str) -> Option<&ContrastRow> {
        self.contrast.iter().find(|r| r.n == n && r.penalty_id == penalty_id)
    }
}

struct SelectionCtx<'a> {
    cfg: &'a RunConfig,
    truth: MixtureParams,
    family: LocationFamily,
    sieve: SieveSchedule,
    penalties: Vec<Penalty>,
    q_cap: usize,
}

/// Seed of the dataset for replicate `r` at size `n`.
pub fn selection_seed(master: u64, r: usize, n: usize) -> u64 {
    derive_seed(derive_seed(master, "replicate", r as u64), "n", n as u64)
}

fn selection_job(ctx: &SelectionCtx, r: usize, n: usize) -> Result<ReplicateRecord> {
    let t0 = Instant::now();
    let seed = selection_seed(ctx.cfg.seed, r, n);
    let data = density::sample(&ctx.truth, &ctx.family, n, seed)?;
    let d = data.dim();
    let radius = ctx.sieve.radius(n)?;
    let ball = ParamBall::new(radius)?;
    let opts = ctx.cfg.fit.options(derive_seed(seed, "fit", 0));
    let first = em::fit_constrained(1, &data, &ctx.family, &ball, &opts)?;
    let bounds = ctx
        .penalties
        .iter()
        .map(|p| order::scan_bound(&ctx.family, p, n, d, first.loglik, ctx.q_cap))
        .collect::<mixsel_core::Result<Vec<_>>>()?;
    let q_fit = bounds.iter().copied().max().unwrap_or(1);
    let mut scores = vec![first.loglik];
    let mut prev = first.params;
    for q in 2..=q_fit {
        let warm = em::grow_starts(&prev, q, &ctx.family, &ball);
        let fit = em::fit_constrained_warm(q, &data, &ctx.family, &ball, &opts, &warm)?;
        scores.push(fit.loglik);
        prev = fit.params;
    }
    let q_hat = ctx
        .penalties
        .iter()
        .zip(&bounds)
        .map(|(p, b)| order::select_from_scores(&scores[..*b], p, n, d, radius).map(|e| e.q_hat))
        .collect::<mixsel_core::Result<Vec<_>>>()?;
    log::debug!("replicate {r} n {n}: q_hat {q_hat:?}");
    Ok(ReplicateRecord { replicate: r, n, seed, scores, q_hat, wall_ms: t0.elapsed().as_millis() })
}

fn run_selection(cfg: &RunConfig) -> Result<StudyRun> {
    let sel = cfg.selection()?;
    let truth = cfg.truth()?;
    let q_star = truth.order();
    let mut penalties = cfg.penalties()?;
    // The contrast needs BIC on the same fits.
    if cfg.study == Study::Inconsistency && !penalties.contains(&Penalty::Bic) {
        penalties.push(Penalty::Bic);
    }
    let ctx = SelectionCtx { cfg, truth, family: cfg.family()?, sieve: cfg.sieve()?, penalties, q_cap: sel.q_cap };
    let jobs: Vec<(usize, usize)> = sel.n_grid.iter().flat_map(|n| (0..sel.replicates).map(move |r| (*n, r))).collect();
    let records = jobs.par_iter().map(|(n, r)| selection_job(&ctx, *r, *n)).collect::<Result<Vec<_>>>()?;

    let ids: Vec<String> = ctx.penalties.iter().map(Penalty::id).collect();
    let mut summary = Vec::new();
    for n in &sel.n_grid {
        let at_n: Vec<&ReplicateRecord> = records.iter().filter(|r| r.n == *n).collect();
        for (k, id) in ids.iter().enumerate() {
            let mut row = SummaryRow { n: *n, penalty_id: id.clone(), under: 0, correct: 0, over: 0, replicates: at_n.len() };
            for rec in &at_n {
                match rec.q_hat[k].cmp(&q_star) {
                    std::cmp::Ordering::Less => row.under += 1,
                    std::cmp::Ordering::Equal => row.correct += 1,
                    std::cmp::Ordering::Greater => row.over += 1,
                }
            }
            summary.push(row);
        }
    }

    let mut contrast = Vec::new();
    if cfg.study == Study::Inconsistency {
        let bic = ctx.penalties.iter().position(|p| *p == Penalty::Bic).unwrap_or(0);
        for n in &sel.n_grid {
            let at_n: Vec<&ReplicateRecord> = records.iter().filter(|r| r.n == *n).collect();
            for (k, id) in ids.iter().enumerate() {
                if k == bic {
                    continue;
                }
                let mut row = ContrastRow {
                    n: *n,
                    penalty_id: id.clone(),
                    over: 0,
                    bic_over: 0,
                    only_penalty: 0,
                    only_bic: 0,
                    replicates: at_n.len(),
                };
                for rec in &at_n {
                    let (a, b) = (rec.q_hat[k] > q_star, rec.q_hat[bic] > q_star);
                    row.over += a as usize;
                    row.bic_over += b as usize;
                    row.only_penalty += (a && !b) as usize;
                    row.only_bic += (b && !a) as usize;
                }
                contrast.push(row);
            }
        }
    }

    let study = cfg.study.name();
    let mut artifacts = vec![
        Artifact {
            name: "summary.csv".into(),
            contents: csv_string(
                &["study", "n", "penalty_id", "frac_under", "frac_correct", "frac_over", "replicates"],
                summary.iter().map(|r| {
                    vec![
                        study.to_string(),
                        r.n.to_string(),
                        r.penalty_id.clone(),
                        r.frac_under().to_string(),
                        r.frac_correct().to_string(),
                        r.frac_over().to_string(),
                        r.replicates.to_string(),
                    ]
                }),
            ),
        },
        Artifact { name: "records.csv".into(), contents: records_csv(&records, &ids) },
    ];
    if cfg.study == Study::Inconsistency {
        artifacts.push(Artifact {
            name: "contrast.csv".into(),
            contents: csv_string(
                &["n", "penalty_id", "frac_over", "bic_frac_over", "over_ratio", "only_penalty", "only_bic", "replicates"],
                contrast.iter().map(|c| {
                    vec![
                        c.n.to_string(),
                        c.penalty_id.clone(),
                        (c.over as f64 / c.replicates as f64).to_string(),
                        (c.bic_over as f64 / c.replicates as f64).to_string(),
                        c.over_ratio().to_string(),
                        c.only_penalty.to_string(),
                        c.only_bic.to_string(),
                        c.replicates.to_string(),
                    ]
                }),
            ),
        });
    }
    let seeds = (0..sel.replicates).map(|r| ("replicate".to_string(), r as u64)).collect();
    Ok(StudyRun {
        study: cfg.study,
        artifacts,
        seeds,
        result: StudyResult::Selection(SelectionReport { q_star, penalties: ctx.penalties, records, summary, contrast }),
    })
}

fn records_csv(records: &[ReplicateRecord], ids: &[String]) -> String {
    let mut header = vec!["replicate".to_string(), "n".into(), "seed".into(), "scores".into()];
    header.extend(ids.iter().map(|id| format!("q_hat[{id}]")));
    header.push("wall_ms".into());
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    csv_string(
        &header_refs,
        records.iter().map(|r| {
            let mut row = vec![r.replicate.to_string(), r.n.to_string(), r.seed.to_string(), join(&r.scores)];
            row.extend(r.q_hat.iter().map(usize::to_string));
            row.push(r.wall_ms.to_string());
            row
        }),
    )
}

// ---------------------------------------------------------------------------
// LIL trajectories

#[derive(Debug, Clone, PartialEq)]
pub struct LilModelSummary {
    pub model: LilModelKind,
    pub replicates: usize,
    /// Largest `W` over every replicate and sample size.
    pub max_w: f64,
    pub mean_slope: f64,
    pub slope_sd: f64,
    /// `mean_slope / (slope_sd/√replicates)`.
    pub slope_t: f64,
}

#[derive(Debug, Clone)]
pub struct LilReport {
    pub trajectories: Vec<(LilModelKind, usize, LilTrajectory)>,
    pub summaries: Vec<LilModelSummary>,
}

impl LilReport {
    pub fn summary(&self, model: LilModelKind) -> Option<&LilModelSummary> {
        self.summaries.iter().find(|s| s.model == model)
    }

    pub fn slopes(&self, model: LilModelKind) -> Vec<f64> {
        self.trajectories
            .iter()
            .filter(|(m, _, _)| *m == model)
            .filter_map(|(_, _, t)| t.slope_fit().map(|f| f.slope))
            .collect()
    }
}

fn model_name(m: LilModelKind) -> &'static str {
    match m {
        LilModelKind::Regular => "regular",
        LilModelKind::Mixture => "mixture",
    }
}

fn run_lil(cfg: &RunConfig) -> Result<StudyRun> {
    let lil = cfg.lil.as_ref().ok_or_else(|| MixselError::Config("missing [lil] section".into()))?;
    let truth = cfg.truth()?;
    let family = cfg.family()?;
    let ball = ParamBall::new(lil.radius)?;
    let schedule: Vec<usize> = (lil.min_exp..=lil.max_exp).map(|e| 1usize << e).collect();
    let n_max = *schedule.last().unwrap_or(&0);
    let q_star = truth.order();
    let q = lil.q.unwrap_or(q_star + 1);
    let regular_fstar = MixtureParams::single(&vec![0.0; truth.dim()])?;

    let jobs: Vec<(LilModelKind, usize)> = lil.models.iter().flat_map(|m| (0..lil.replicates).map(move |r| (*m, r))).collect();
    let trajectories = jobs
        .par_iter()
        .map(|(m, r)| {
            let (label, fstar, model) = match m {
                LilModelKind::Regular => ("lil-regular", &regular_fstar, LilModel::RegularMean { fstar: regular_fstar.clone() }),
                LilModelKind::Mixture => ("lil-mixture", &truth, LilModel::Mixture { q, q_star }),
            };
            let seed = derive_seed(cfg.seed, label, *r as u64);
            let path = density::sample(fstar, &family, n_max, seed)?;
            let opts = cfg.fit.options(derive_seed(seed, "fit", 0));
            let t = em::lil_trajectory(&path, &family, &ball, &model, &schedule, &opts)?;
            log::debug!("{label} replicate {r}: max W {:.3}", t.max_w());
            Ok((*m, *r, t))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut summaries = Vec::new();
    for m in &lil.models {
        let mine: Vec<&LilTrajectory> = trajectories.iter().filter(|(k, _, _)| k == m).map(|(_, _, t)| t).collect();
        let max_w = mine.iter().map(|t| t.max_w()).fold(f64::NEG_INFINITY, f64::max);
        let slopes: Vec<f64> = mine.iter().filter_map(|t| t.slope_fit().map(|f| f.slope)).collect();
        let k = slopes.len() as f64;
        let mean = slopes.iter().sum::<f64>() / k;
        let sd = if slopes.len() > 1 {
            (slopes.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (k - 1.0)).sqrt()
        } else {
            f64::NAN
        };
        summaries.push(LilModelSummary {
            model: *m,
            replicates: mine.len(),
            max_w,
            mean_slope: mean,
            slope_sd: sd,
            slope_t: mean / (sd / k.sqrt()),
        });
    }

    let mut traj_rows = Vec::new();
    for (m, r, t) in &trajectories {
        for i in 0..t.n.len() {
            traj_rows.push(vec![
                model_name(*m).to_string(),
                r.to_string(),
                t.n[i].to_string(),
                t.w[i].to_string(),
                t.lr_raw[i].to_string(),
            ]);
        }
    }
    let artifacts = vec![
        Artifact { name: "trajectories.csv".into(), contents: csv_string(&["model", "replicate", "n", "w", "lr_raw"], traj_rows) },
        Artifact {
            name: "lil_summary.csv".into(),
            contents: csv_string(
                &["model", "replicates", "max_w", "mean_slope", "slope_sd", "slope_t"],
                summaries.iter().map(|s| {
                    vec![
                        model_name(s.model).to_string(),
                        s.replicates.to_string(),
                        s.max_w.to_string(),
                        s.mean_slope.to_string(),
                        s.slope_sd.to_string(),
                        s.slope_t.to_string(),
                    ]
                }),
            ),
        },
    ];
    let seeds = jobs.iter().map(|(m, r)| (format!("lil-{}", model_name(*m)), *r as u64)).collect();
    Ok(StudyRun { study: Study::Lil, artifacts, seeds, result: StudyResult::Lil(LilReport { trajectories, summaries }) })
}

// ---------------------------------------------------------------------------
// Geometry

/// Level-set inclusions at one `ε`, counted over the lattice.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub epsilon: f64,
    /// Extremes of `h/N` over the ratio samples and the lattice together.
    pub r_min: f64,
    pub r_max: f64,
    pub in_h: usize,
    /// Points of `{N ≤ ε·r_min}` outside `{h ≤ ε}`.
    pub scaled_lower_violations: usize,
    /// Points of `{N ≤ ε/r_max}` outside `{h ≤ ε}`.
    pub lower_violations: usize,
    /// Points of `{h ≤ ε}` outside `{N ≤ ε/r_min}`.
    pub upper_violations: usize,
}

impl Sandwich {
    pub fn compute(grid: &LevelSetGrid, epsilon: f64, r_min: f64, r_max: f64) -> Sandwich {
        let mut s = Sandwich {
            epsilon,
            r_min,
            r_max,
            in_h: 0,
            scaled_lower_violations: 0,
            lower_violations: 0,
            upper_violations: 0,
        };
        for (h, n) in grid.hellinger.iter().zip(&grid.pseudodistance) {
            let in_h = *h <= epsilon;
            s.in_h += in_h as usize;
            s.scaled_lower_violations += (*n <= epsilon * r_min && !in_h) as usize;
            s.lower_violations += (*n <= epsilon / r_max && !in_h) as usize;
            s.upper_violations += (in_h && *n > epsilon / r_min) as usize;
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct GeometryStudyReport {
    pub partition: Partition,
    pub ratio: GeometryReport,
    pub lattice: Option<LevelSetGrid>,
    pub sandwich: Option<Sandwich>,
    pub envelope: Option<EnvelopeNorms>,
}

fn run_geometry(cfg: &RunConfig) -> Result<StudyRun> {
    let g = cfg.geometry.as_ref().ok_or_else(|| MixselError::Config("missing [geometry] section".into()))?;
    let fstar = cfg.truth()?;
    let family = cfg.family()?;
    let grid = grid_for(cfg, &fstar, &family)?;
    let mut partition = geometry::build_partition(&fstar, derive_seed(cfg.seed, "partition", 0))?;
    if let Some(r) = g.partition_radius {
        partition = partition.with_radius(r)?;
    }
    let sampler = SamplerBox { q: g.q, dim: fstar.dim(), lo: g.box_lo, hi: g.box_hi };
    let study = RatioStudy::new(&grid, &partition, sampler, derive_seed(cfg.seed, "ratio", 0))?;
    let samples: Vec<RatioSample> = (0..g.samples).into_par_iter().map(|i| study.sample(i)).collect();
    let ratio = GeometryReport::from_samples(samples);
    log::info!("ratio h/N in [{:.4}, {:.4}], {} excluded", ratio.ratio_min, ratio.ratio_max, ratio.excluded);

    let lattice = if g.resolution >= 2 {
        let builder = LevelSetBuilder::new(&grid, &partition, sampler, g.resolution)?;
        let planes = (0..builder.resolution()).into_par_iter().map(|i| builder.plane(i)).collect();
        Some(builder.assemble(planes))
    } else {
        None
    };
    let sandwich = lattice.as_ref().map(|l| {
        let (lo, hi) = l.ratio_bounds();
        Sandwich::compute(l, g.epsilon, ratio.ratio_min.min(lo), ratio.ratio_max.max(hi))
    });
    let envelope = match g.envelope_radius {
        Some(t) => Some(geometry::build_envelopes(&fstar, &family, &ParamBall::new(t)?, &grid)?.norms()),
        None => None,
    };

    let mut artifacts = vec![
        Artifact { name: "geometry_summary.csv".into(), contents: geometry_summary_csv(cfg.seed, &ratio, lattice.as_ref(), sandwich.as_ref(), envelope.as_ref()) },
        Artifact {
            name: "ratios.csv".into(),
            contents: csv_string(
                &["index", "weights", "locations", "hellinger", "pseudodistance", "l1", "ratio"],
                ratio.samples.iter().enumerate().map(|(i, s)| {
                    vec![
                        i.to_string(),
                        join(s.params.weights()),
                        join(s.params.locations()),
                        s.hellinger.to_string(),
                        s.pseudodistance.to_string(),
                        s.l1.to_string(),
                        s.ratio().map_or_else(String::new, |r| r.to_string()),
                    ]
                }),
            ),
        },
    ];
    if let Some(l) = &lattice {
        artifacts.push(Artifact { name: "levelset_h.csv".into(), contents: lattice_csv(l, &l.hellinger, "h") });
        artifacts.push(Artifact { name: "levelset_n.csv".into(), contents: lattice_csv(l, &l.pseudodistance, "n") });
    }
    Ok(StudyRun {
        study: Study::Geometry,
        artifacts,
        seeds: vec![("partition".into(), 0), ("ratio".into(), 0)],
        result: StudyResult::Geometry(Box::new(GeometryStudyReport { partition, ratio, lattice, sandwich, envelope })),
    })
}

fn lattice_csv(l: &LevelSetGrid, values: &[f64], name: &str) -> String {
    let mut out = format!("p,theta1,theta2,{name}\n");
    for (i, v) in values.iter().enumerate() {
        let (p, a, b) = l.coords(i);
        out.push_str(&format!("{p},{a},{b},{v}\n"));
    }
    out
}

fn geometry_summary_csv(
    seed: u64,
    r: &GeometryReport,
    lattice: Option<&LevelSetGrid>,
    s: Option<&Sandwich>,
    env: Option<&EnvelopeNorms>,
) -> String {
    let mut rows: Vec<(String, String)> = vec![
        ("seed".into(), seed.to_string()),
        ("samples".into(), r.samples.len().to_string()),
        ("excluded".into(), r.excluded.to_string()),
        ("ratio_min".into(), r.ratio_min.to_string()),
        ("ratio_max".into(), r.ratio_max.to_string()),
        ("spread".into(), r.spread().to_string()),
    ];
    for (p, q) in geometry::REPORT_QUANTILES.iter().zip(r.quantiles) {
        rows.push((format!("quantile_{p}"), q.to_string()));
    }
    rows.push(("l1_ratio_min".into(), r.l1_ratio_min.to_string()));
    rows.push(("l1_ratio_max".into(), r.l1_ratio_max.to_string()));
    if let Some(l) = lattice {
        let (lo, hi) = l.ratio_bounds();
        rows.push(("lattice_resolution".into(), l.resolution.to_string()));
        rows.push(("lattice_ratio_min".into(), lo.to_string()));
        rows.push(("lattice_ratio_max".into(), hi.to_string()));
    }
    if let Some(s) = s {
        rows.push(("epsilon".into(), s.epsilon.to_string()));
        rows.push(("r_min".into(), s.r_min.to_string()));
        rows.push(("r_max".into(), s.r_max.to_string()));
        rows.push(("in_h".into(), s.in_h.to_string()));
        rows.push(("scaled_lower_violations".into(), s.scaled_lower_violations.to_string()));
        rows.push(("lower_violations".into(), s.lower_violations.to_string()));
        rows.push(("upper_violations".into(), s.upper_violations.to_string()));
    }
    if let Some(e) = env {
        rows.push(("h0_l4".into(), e.h0_l4.to_string()));
        rows.push(("h1_l4".into(), e.h1_l4.to_string()));
        rows.push(("h2_l4".into(), e.h2_l4.to_string()));
        rows.push(("h3_l2".into(), e.h3_l2.to_string()));
    }
    csv_string(&["metric", "value"], rows.into_iter().map(|(k, v)| vec![k, v]))
}

// ---------------------------------------------------------------------------
// Entropy

#[derive(Debug, Clone)]
pub struct EntropyStudyReport {
    pub curves: Vec<(usize, EntropyCurve)>,
    pub local_global: Vec<(usize, LocalGlobalReport)>,
}

impl EntropyStudyReport {
    pub fn curve(&self, q: usize) -> Option<&EntropyCurve> {
        self.curves.iter().find(|(k, _)| *k == q).map(|(_, c)| c)
    }
}

const CANDIDATE_BATCH: u64 = 4096;

/// Rejection-sample a cloud, evaluating candidates in parallel batches and
/// feeding them to the builder in index order.
pub fn parallel_cloud(sampler: &CloudSampler, n_functions: usize, max_candidates: u64) -> Result<FunctionCloud> {
    let mut builder = sampler.builder(n_functions, max_candidates)?;
    loop {
        let start = builder.next_index();
        let batch: Vec<_> = (start..start + CANDIDATE_BATCH).into_par_iter().map(|c| sampler.candidate(c)).collect();
        for outcome in batch {
            if builder.push(outcome)? {
                return Ok(builder.finish()?);
            }
        }
    }
}

fn run_entropy(cfg: &RunConfig) -> Result<StudyRun> {
    let e = cfg.entropy.as_ref().ok_or_else(|| MixselError::Config("missing [entropy] section".into()))?;
    let fstar = cfg.truth()?;
    let family = cfg.family()?;
    let d = fstar.dim();
    let mut curves = Vec::new();
    let mut local_global = Vec::new();
    let mut seeds = Vec::new();
    if !e.q.is_empty() {
        let grid = grid_for(cfg, &fstar, &family)?;
        let ball = ParamBall::new(e.radius)?;
        let deltas = entropy::geometric_deltas(e.epsilon, e.ratio, e.points);
        for &q in &e.q {
            seeds.push(("entropy-ball".to_string(), q as u64));
            let kind = ClassKind::HellingerBall { q, epsilon: e.epsilon };
            let sampler = CloudSampler::new(kind, &grid, ball, derive_seed(cfg.seed, "entropy-ball", q as u64))?;
            let cloud = parallel_cloud(&sampler, e.functions, e.max_candidates)?;
            let curve = entropy::entropy_curve(&cloud, &deltas, d)?;
            log::info!("q = {q}: exponent {:.3} (R² {:.4})", curve.fit.eta_hat, curve.fit.r2);
            if let Some(lg) = &e.local_global {
                seeds.push(("entropy-weighted".to_string(), q as u64));
                local_global.push((q, local_global_case(cfg, lg, &grid, &fstar, &family, &ball, q, &cloud)?));
            }
            curves.push((q, curve));
        }
    }

    let mut artifacts = Vec::new();
    if !curves.is_empty() {
        let mut curve_rows = Vec::new();
        for (q, c) in &curves {
            for (delta, count) in c.packing.deltas.iter().zip(&c.packing.counts) {
                curve_rows.push(vec![q.to_string(), e.epsilon.to_string(), delta.to_string(), count.to_string()]);
            }
        }
        artifacts.push(Artifact { name: "curve.csv".into(), contents: csv_string(&["q", "epsilon", "delta", "packing_count"], curve_rows) });
        artifacts.push(Artifact {
            name: "fit.csv".into(),
            contents: csv_string(
                &["q", "eta_hat", "logK_hat", "r2", "residual_rms", "exponent_bound", "exceeds_bound"],
                curves.iter().map(|(q, c)| {
                    vec![
                        q.to_string(),
                        c.fit.eta_hat.to_string(),
                        c.fit.log_k_hat.to_string(),
                        c.fit.r2.to_string(),
                        c.fit.residual_rms.to_string(),
                        c.exponent_bound.to_string(),
                        c.exceeds_bound.to_string(),
                    ]
                }),
            ),
        });
    }
    if !local_global.is_empty() {
        let mut rows = Vec::new();
        for (q, r) in &local_global {
            for c in &r.cases {
                rows.push(vec![
                    q.to_string(),
                    c.delta.to_string(),
                    c.rho.to_string(),
                    c.packing.to_string(),
                    c.bound.to_string(),
                    c.holds.to_string(),
                    r.exponent.to_string(),
                    r.c0.to_string(),
                    r.eps0.to_string(),
                    r.c1.to_string(),
                    r.r_norm.to_string(),
                ]);
            }
        }
        artifacts.push(Artifact {
            name: "local_global.csv".into(),
            contents: csv_string(&["q", "delta", "rho", "packing", "bound", "holds", "exponent", "c0", "eps0", "c1", "r_norm"], rows),
        });
    }
    Ok(StudyRun { study: Study::Entropy, artifacts, seeds, result: StudyResult::Entropy(EntropyStudyReport { curves, local_global }) })
}

/// Measure the global constants on the weighted class, the envelope norm
/// `‖R‖₂` with `R = D`, and check the local bound on the Hellinger-ball cloud.
#[allow(clippy::too_many_arguments)]
fn local_global_case(
    cfg: &RunConfig,
    lg: &crate::config::LocalGlobalConfig,
    grid: &QuadratureGrid,
    fstar: &MixtureParams,
    family: &LocationFamily,
    ball: &ParamBall,
    q: usize,
    ball_cloud: &FunctionCloud,
) -> Result<LocalGlobalReport> {
    let sampler = CloudSampler::new(ClassKind::WeightedClass { q }, grid, *ball, derive_seed(cfg.seed, "entropy-weighted", q as u64))?;
    let weighted = parallel_cloud(&sampler, lg.weighted_functions, u64::MAX)?;
    let eps_grid = entropy::geometric_deltas(lg.eps_max, lg.eps_ratio, lg.eps_points);
    let constants = entropy::global_constants(&weighted, &eps_grid, fstar.dim())?;

    let partition = geometry::build_partition(fstar, derive_seed(cfg.seed, "partition", 0))?;
    let t = ball.radius();
    let sampler_box = SamplerBox { q, dim: fstar.dim(), lo: -t, hi: t };
    let study = RatioStudy::new(grid, &partition, sampler_box, derive_seed(cfg.seed, "lg-ratio", q as u64))?;
    let samples: Vec<RatioSample> = (0..lg.ratio_samples).into_par_iter().map(|i| study.sample(i)).collect();
    let cstar = GeometryReport::from_samples(samples).l1_ratio_min;
    let env = geometry::build_envelopes(fstar, family, ball, grid)?;
    let r_norm = geometry::envelope_s_d(&env, cstar)?.d_norm(grid, 2.0);
    log::info!("q = {q}: c* {cstar:.4}, ‖R‖₂ {r_norm:.3}, C₀ {:.3}", constants.c0);
    let pairs: Vec<(f64, f64)> = lg.pairs.iter().map(|[d, r]| (*d, *r)).collect();
    Ok(entropy::check_local_global(&constants, ball_cloud, r_norm, &pairs)?)
}
