//! Dispatch of a [`RunConfig`] to the library, artifact emission and the
//! manifest.
//!
//! Artifacts are written under `--out`; `manifest.json` lists each one with
//! its SHA-256 digest. Artifact contents depend only on the config, so the
//! digests are stable across reruns and thread counts. The manifest itself
//! also records timing and is not digested.

use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};
use steinhaus::blaschke::{criterion_sum, phi_lambda};
use steinhaus::criteria::{carleson_counterexample, carleson_csv, evaluate_criteria_with_tol, stolz_cover_greedy, CriterionReport};
use steinhaus::majorant::{alpha_lambda_normalized, build_psi, certify_majorant, poisson_norm_band, DiscreteMeasure};
use steinhaus::quad::QuadOptions;
use steinhaus::sequences::sample_sequence;
use steinhaus::stochastic::{
    battery_csv, cochran_check, criterion_distributions, diagonal_bound_check, offdiagonal_bound_check,
    offdiagonal_pairs, rosenthal_check, Distribution, LemmaVerdict, Method, COCHRAN_TOL,
};
use steinhaus::{DiskPoint, LabError, RadiusProfile};

use crate::config::{Dist, Format, Lemma, RunConfig, Task};

/// Band for `max/min` of the normalized Poisson norms.
pub const POISSON_BAND: f64 = 4.0;
/// Relative tolerance for the reproduced Carleson `ln ρ`.
pub const CARLESON_TOL: f64 = 1e-10;
/// Smallest depth of the atoms of random duality measures.
pub const MEASURE_MIN_DEPTH: f64 = 1e-4;

/// Whether a failed task changes the exit status unconditionally or only
/// under `--strict`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    Always,
    Strict,
}

#[derive(Clone, Debug, Serialize)]
pub struct TaskRecord {
    pub name: String,
    /// Largest error estimate among the task's numbers (quadrature error,
    /// standard error, or negative certificate margin).
    pub achieved_error: f64,
    pub pass: Option<bool>,
    pub gate: Gate,
}

#[derive(Clone, Debug, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub artifact: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub started_unix_ms: u128,
    pub wall_clock_seconds: f64,
    pub tasks: Vec<TaskRecord>,
    pub files: Vec<FileDigest>,
    pub exit_code: i32,
}

#[derive(Debug)]
pub enum RunError {
    /// Parameters rejected by the library.
    Invalid(String),
    Failed(String),
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Invalid(m) => write!(f, "invalid configuration: {m}"),
            RunError::Failed(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl std::error::Error for RunError {}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Invalid(_) => 2,
            RunError::Failed(_) => 1,
        }
    }
}

impl From<LabError> for RunError {
    fn from(e: LabError) -> Self {
        match e {
            LabError::InvalidParameter(_) | LabError::InvalidProfile(_) | LabError::OutsideDisk { .. } => {
                RunError::Invalid(e.to_string())
            }
            _ => RunError::Failed(e.to_string()),
        }
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Failed(e.to_string())
    }
}

type Result<T> = std::result::Result<T, RunError>;

struct Sink {
    dir: PathBuf,
    format: Format,
    files: Vec<FileDigest>,
}

impl Sink {
    fn put(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes)?;
        self.files.push(FileDigest {
            path: name.to_string(),
            sha256: hex::encode(Sha256::digest(bytes)),
            bytes: bytes.len() as u64,
        });
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, stem: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::Failed(e.to_string()))?;
        text.push('\n');
        self.put(&format!("{stem}.json"), text.as_bytes())
    }

    /// A table in the requested format.
    fn table<T: Serialize + ?Sized>(&mut self, stem: &str, csv: impl FnOnce() -> String, rows: &T) -> Result<()> {
        match self.format {
            Format::Csv => self.put(&format!("{stem}.csv"), csv().as_bytes()),
            Format::Json => self.json(stem, rows),
        }
    }
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    sink: Sink,
    tasks: Vec<TaskRecord>,
}

impl Ctx<'_> {
    fn record(&mut self, name: impl Into<String>, achieved_error: f64, pass: Option<bool>, gate: Gate) {
        self.tasks.push(TaskRecord { name: name.into(), achieved_error, pass, gate });
    }

    fn quad(&self) -> QuadOptions {
        QuadOptions::with_rel_tol(self.cfg.quad_tol)
    }

    fn profile(&self) -> &RadiusProfile {
        &self.cfg.parsed_profiles[0]
    }
}

/// Runs the configured task, writes artifacts and `manifest.json`.
pub fn run(cfg: &RunConfig) -> Result<RunManifest> {
    let started = Instant::now();
    let started_unix_ms = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis()).unwrap_or(0);
    std::fs::create_dir_all(&cfg.out)?;
    let mut ctx = Ctx { cfg, sink: Sink { dir: cfg.out.clone(), format: cfg.format, files: Vec::new() }, tasks: Vec::new() };
    match cfg.task {
        Task::Sample => sample(&mut ctx)?,
        Task::Criteria => criteria(&mut ctx)?,
        Task::VerifyLemma(lemma) => match lemma {
            Lemma::Cochran => cochran(&mut ctx)?,
            Lemma::Diagonal => diagonal(&mut ctx)?,
            Lemma::Offdiagonal => offdiagonal(&mut ctx)?,
            Lemma::Rosenthal => rosenthal(&mut ctx)?,
            Lemma::PoissonNorm => poisson_norm(&mut ctx)?,
            Lemma::AlphaLambda => alpha_lambda(&mut ctx)?,
        },
        Task::Majorant => majorant(&mut ctx)?,
        Task::CriterionDist => criterion_dist(&mut ctx)?,
        Task::StolzCover => stolz_cover(&mut ctx)?,
        Task::CarlesonDemo => carleson(&mut ctx)?,
        Task::Sweep => sweep(&mut ctx)?,
    }
    let failed = ctx
        .tasks
        .iter()
        .any(|t| t.pass == Some(false) && (t.gate == Gate::Always || cfg.strict));
    let manifest = RunManifest {
        artifact: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        command: cfg.task.to_string(),
        config: cfg.clone(),
        started_unix_ms,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        tasks: ctx.tasks,
        files: ctx.sink.files,
        exit_code: i32::from(failed),
    };
    let mut text = serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Failed(e.to_string()))?;
    text.push('\n');
    std::fs::write(cfg.out.join("manifest.json"), text)?;
    Ok(manifest)
}

fn quoted(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn fmt_p(p: f64) -> String {
    format!("{p}")
}

fn max_of(values: impl IntoIterator<Item = f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

fn sample(ctx: &mut Ctx) -> Result<()> {
    let profile = ctx.profile().clone();
    for &seed in &ctx.cfg.seeds {
        let s = sample_sequence(&profile, seed);
        let csv = || {
            let mut out = String::from("n,r,theta,log_depth\n");
            for (i, z) in s.points.iter().enumerate() {
                let _ = writeln!(out, "{},{},{},{}", i + 1, z.modulus(), z.angle(), z.log_depth());
            }
            out
        };
        ctx.sink.table(&format!("sample_seed{seed}"), csv, &s)?;
        ctx.record(format!("sample seed={seed}"), 0.0, None, Gate::Strict);
    }
    Ok(())
}

fn reports(ctx: &Ctx, profile: &RadiusProfile) -> Result<Vec<CriterionReport>> {
    let cfg = ctx.cfg;
    Ok(cfg
        .seeds
        .par_iter()
        .map(|&seed| evaluate_criteria_with_tol(&sample_sequence(profile, seed), &cfg.p_list, cfg.cert_tol))
        .collect::<steinhaus::Result<Vec<_>>>()?)
}

fn margin_error(r: &CriterionReport) -> f64 {
    r.certificate.as_ref().map_or(0.0, |c| (-c.min_margin).max(0.0))
}

fn criteria(ctx: &mut Ctx) -> Result<()> {
    let profile = ctx.profile().clone();
    for report in reports(ctx, &profile)? {
        let seed = report.seed;
        let table = phi_lambda(&sample_sequence(&profile, seed));
        ctx.sink.json(&format!("criteria_seed{seed}"), &report)?;
        ctx.sink.table(&format!("phi_lambda_seed{seed}"), || table.to_csv(), &table)?;
        ctx.record(format!("criteria seed={seed}"), margin_error(&report), Some(report.verdicts.all_pass()), Gate::Strict);
    }
    Ok(())
}

fn sweep(ctx: &mut Ctx) -> Result<()> {
    let ps = ctx.cfg.p_list.clone();
    let mut header = String::from("profile,seed,n_points,blaschke_sum,x_1");
    for p in &ps {
        let _ = write!(header, ",X_p{}", fmt_p(*p));
    }
    header.push_str(",naftalevic_sup,weak_separation,min_margin,blaschke,smirnov");
    for p in &ps {
        let _ = write!(header, ",hp_criterion_p{0},hp_certified_p{0}", fmt_p(*p));
    }
    header.push('\n');
    let mut all = Vec::new();
    for profile in ctx.cfg.parsed_profiles.clone() {
        for r in reports(ctx, &profile)? {
            ctx.record(
                format!("sweep {} seed={}", r.profile, r.seed),
                margin_error(&r),
                Some(r.verdicts.all_pass()),
                Gate::Strict,
            );
            all.push(r);
        }
    }
    let csv = || {
        let mut out = header;
        for r in &all {
            let _ = write!(out, "{},{},{},{},{}", quoted(&r.profile), r.seed, r.n_points, r.blaschke_sum, r.x_1);
            for c in &r.criteria {
                let _ = write!(out, ",{}", c.x_p);
            }
            let min_margin = r.certificate.as_ref().map_or(f64::NAN, |c| c.min_margin);
            let _ = write!(
                out,
                ",{},{},{},{},{}",
                r.naftalevic_sup, r.separation.weak, min_margin, r.verdicts.blaschke, r.verdicts.smirnov
            );
            for (c, h) in r.verdicts.hp_criterion.iter().zip(&r.verdicts.hp_certified) {
                let _ = write!(out, ",{c},{h}");
            }
            out.push('\n');
        }
        out
    };
    ctx.sink.table("sweep", csv, &all)
}

fn record_verdicts(ctx: &mut Ctx, verdicts: &[LemmaVerdict]) {
    for v in verdicts {
        let method = v.rows.first().map_or("", |r| r.method.as_str());
        let p = v.rows.first().map_or(f64::NAN, |r| r.p);
        ctx.record(
            format!("{} p={} {method}", v.lemma_id, fmt_p(p)),
            max_of(v.rows.iter().map(|r| r.error)),
            Some(v.pass),
            Gate::Always,
        );
    }
}

fn write_verdicts(ctx: &mut Ctx, stem: &str, verdicts: Vec<LemmaVerdict>) -> Result<()> {
    record_verdicts(ctx, &verdicts);
    let rows: Vec<_> = verdicts.iter().flat_map(|v| v.rows.iter().cloned()).collect();
    ctx.sink.table(stem, || battery_csv(&rows), &verdicts)
}

fn cochran(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let quad = cochran_check(&cfg.grid, &Method::Quadrature(ctx.quad()), COCHRAN_TOL)?;
    // the Monte Carlo rows compare deviation / 3σ against the tolerance
    let mc_method = Method::MonteCarlo { n: cfg.mc_n, seed: cfg.seeds[0] };
    let mc = cochran_check(&cfg.grid, &mc_method, COCHRAN_TOL * cfg.mc_sigma / 3.0)?;
    write_verdicts(ctx, "verify_cochran", vec![quad, mc])
}

fn diagonal(ctx: &mut Ctx) -> Result<()> {
    let method = Method::Quadrature(ctx.quad());
    let verdicts = ctx
        .cfg
        .p_list
        .iter()
        .map(|&p| diagonal_bound_check(p, &ctx.cfg.grid, &method))
        .collect::<steinhaus::Result<Vec<_>>>()?;
    write_verdicts(ctx, "verify_diagonal", verdicts)
}

fn offdiagonal(ctx: &mut Ctx) -> Result<()> {
    let method = Method::Quadrature(ctx.quad());
    let pairs = offdiagonal_pairs(ctx.cfg.levels, ctx.cfg.min_gap..=ctx.cfg.max_gap);
    let verdicts = ctx
        .cfg
        .p_list
        .iter()
        .map(|&p| offdiagonal_bound_check(p, &pairs, &method))
        .collect::<steinhaus::Result<Vec<_>>>()?;
    write_verdicts(ctx, "verify_offdiagonal", verdicts)
}

/// A Rosenthal run judged with the configured Monte Carlo band.
#[derive(Clone, Debug, Serialize)]
pub struct RosenthalRow {
    #[serde(flatten)]
    pub report: steinhaus::stochastic::RosenthalReport,
    /// `|LHS - E(ΣX)^p| ≤ band · se` when the closed form is known.
    pub exact_within_band: Option<bool>,
    pub pass: bool,
}

pub fn distribution_of(d: Dist) -> Distribution {
    match d {
        Dist::Exponential => Distribution::Exponential { rate: 1.0 },
        Dist::Lognormal => Distribution::LogNormal { mu: 0.0, sigma: 1.0 },
    }
}

fn rosenthal(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let mut jobs = Vec::new();
    for &d in &cfg.dists {
        for &k in &cfg.vars {
            for &p in &cfg.p_list {
                jobs.push((distribution_of(d), k, p));
            }
        }
    }
    if jobs.len() > usize::from(u16::MAX) {
        return Err(RunError::Invalid("too many Rosenthal tasks".into()));
    }
    let seed = cfg.seeds[0];
    let mut rows = Vec::with_capacity(jobs.len());
    for (task, (d, k, p)) in jobs.into_iter().enumerate() {
        let report = rosenthal_check(&d, k, p, cfg.mc_n, seed, task as u16)?;
        let band = cfg.mc_sigma;
        let exact_within_band = report.lhs_exact.map(|e| (report.lhs - e).abs() <= band * report.lhs_error);
        let finite = [report.lhs, report.lhs_error, report.rhs, report.rhs_error].iter().all(|v| v.is_finite());
        let bound = finite && report.lhs <= report.rhs + band * report.lhs_error.hypot(report.rhs_error);
        let pass = bound && exact_within_band != Some(false);
        ctx.record(
            format!("rosenthal {} k={k} p={}", d_name(&d), fmt_p(p)),
            report.lhs_error,
            Some(pass),
            Gate::Always,
        );
        rows.push(RosenthalRow { report, exact_within_band, pass });
    }
    let csv = || {
        let mut out = String::from(
            "distribution,k,p,n,lhs,lhs_error,lhs_exact,exact_within_band,sum_of_moments,power_of_sum,rhs,rhs_error,pass\n",
        );
        for r in &rows {
            let t = &r.report;
            let exact = t.lhs_exact.map_or(String::new(), |e| e.to_string());
            let within = r.exact_within_band.map_or(String::new(), |b| b.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{exact},{within},{},{},{},{},{}",
                d_name(&t.distribution),
                t.k,
                t.p,
                t.n,
                t.lhs,
                t.lhs_error,
                t.sum_of_moments,
                t.power_of_sum,
                t.rhs,
                t.rhs_error,
                r.pass
            );
        }
        out
    };
    ctx.sink.table("verify_rosenthal", csv, &rows)
}

fn d_name(d: &Distribution) -> &'static str {
    match d {
        Distribution::Exponential { .. } => "exponential",
        Distribution::LogNormal { .. } => "lognormal",
        Distribution::Constant { .. } => "constant",
        Distribution::LogInvRho { .. } => "log_inv_rho",
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PoissonNormRow {
    pub q: f64,
    pub depth: f64,
    /// `(1 - |z|)^{q-1} ‖P_z‖_q^q`
    pub product: f64,
    pub error: f64,
    /// `(1 + r²)/(1 - r²)` for `q = 2`.
    pub parseval_exact: Option<f64>,
    pub parseval_rel_error: Option<f64>,
    pub pass: bool,
}

/// Exact `‖P_z‖_2^2` at depth `g = 1 - |z|`.
pub fn parseval_exact(depth: f64) -> f64 {
    let r = 1.0 - depth;
    (1.0 + r * r) / (depth * (2.0 - depth))
}

fn poisson_norm(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let mut rows = Vec::new();
    for &q in &cfg.q_list {
        let band = poisson_norm_band(q, &cfg.depths, &ctx.quad())?;
        let band_ok = band.spread <= POISSON_BAND;
        let mut all = band_ok;
        for ((&depth, &product), &error) in band.depths.iter().zip(&band.products).zip(&band.errors) {
            let (exact, rel) = if q == 2.0 {
                let e = parseval_exact(depth);
                (Some(e), Some((product / depth - e).abs() / e))
            } else {
                (None, None)
            };
            let pass = band_ok && rel.is_none_or(|r| r <= cfg.quad_tol);
            all &= pass;
            rows.push(PoissonNormRow { q, depth, product, error, parseval_exact: exact, parseval_rel_error: rel, pass });
        }
        ctx.record(format!("poisson-norm q={} spread={}", fmt_p(q), band.spread), max_of(band.errors), Some(all), Gate::Always);
    }
    let csv = || {
        let mut out = String::from("q,depth,product,error,parseval_exact,parseval_rel_error,pass\n");
        for r in &rows {
            let opt = |v: Option<f64>| v.map_or(String::new(), |v| v.to_string());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.q,
                r.depth,
                r.product,
                r.error,
                opt(r.parseval_exact),
                opt(r.parseval_rel_error),
                r.pass
            );
        }
        out
    };
    ctx.sink.table("verify_poisson_norm", csv, &rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaLambdaRow {
    /// `random` for the battery, `single` for one atom at the given depth.
    pub kind: String,
    pub q: f64,
    pub index: usize,
    pub depth: f64,
    pub norm: f64,
    pub norm_error: f64,
    pub s: f64,
}

fn alpha_lambda(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let opts = ctx.quad();
    let seed = cfg.seeds[0];
    let mut rows = Vec::new();
    for &q in &cfg.q_list {
        let batch = (0..cfg.measures)
            .into_par_iter()
            .map(|i| {
                let mu = DiscreteMeasure::random(seed, i as u32, cfg.atoms, MEASURE_MIN_DEPTH);
                let rep = alpha_lambda_normalized(&mu, q, &opts)?;
                let depth = mu.atoms().iter().map(|(z, _)| z.depth()).fold(1.0, f64::min);
                Ok(AlphaLambdaRow {
                    kind: "random".into(),
                    q,
                    index: i,
                    depth,
                    norm: rep.norm,
                    norm_error: rep.norm_error,
                    s: rep.s.unwrap_or(f64::NAN),
                })
            })
            .collect::<steinhaus::Result<Vec<_>>>()?;
        let max_s = batch.iter().map(|r| r.s).fold(f64::NEG_INFINITY, f64::max);
        let finite = batch.iter().all(|r| r.s.is_finite() && r.s > 0.0);
        ctx.record(
            format!("alpha-lambda q={} max S={max_s}", fmt_p(q)),
            max_of(batch.iter().map(|r| r.norm_error)),
            Some(finite),
            Gate::Always,
        );
        rows.extend(batch);

        // one atom: S = 1/product of the Poisson band
        let mut singles = Vec::new();
        for (i, &g) in cfg.depths.iter().enumerate() {
            let mu = DiscreteMeasure::new(vec![(DiskPoint::from_depth(g, 0.0)?, 1.0)])?;
            let rep = alpha_lambda_normalized(&mu, q, &opts)?;
            singles.push(AlphaLambdaRow {
                kind: "single".into(),
                q,
                index: i,
                depth: g,
                norm: rep.norm,
                norm_error: rep.norm_error,
                s: rep.s.unwrap_or(f64::NAN),
            });
        }
        let band = poisson_norm_band(q, &cfg.depths, &opts)?;
        let reciprocal = singles
            .iter()
            .zip(&band.products)
            .all(|(r, &prod)| (r.s * prod - 1.0).abs() <= 1e-6);
        let hi = singles.iter().map(|r| r.s).fold(f64::NEG_INFINITY, f64::max);
        let lo = singles.iter().map(|r| r.s).fold(f64::INFINITY, f64::min);
        let spread = hi / lo;
        ctx.record(
            format!("alpha-lambda single atom q={} spread={spread}", fmt_p(q)),
            max_of(singles.iter().map(|r| r.norm_error)),
            Some(reciprocal && spread <= POISSON_BAND),
            Gate::Always,
        );
        rows.extend(singles);
    }
    let csv = || {
        let mut out = String::from("kind,q,index,depth,norm,norm_error,S\n");
        for r in &rows {
            let _ = writeln!(out, "{},{},{},{},{},{},{}", r.kind, r.q, r.index, r.depth, r.norm, r.norm_error, r.s);
        }
        out
    };
    ctx.sink.table("verify_alpha_lambda", csv, &rows)
}

#[derive(Clone, Debug, Serialize)]
pub struct MajorantRow {
    pub seed: u64,
    pub p: f64,
    pub n_points: usize,
    pub min_margin: f64,
    pub psi_l1: f64,
    pub psi_lp: f64,
    #[serde(rename = "sup_K")]
    pub sup_k: f64,
    pub x_1: f64,
    /// `sup K · X_1/π`
    pub l1_bound: f64,
    pub l1_bound_holds: bool,
    pub valid: bool,
}

impl MajorantRow {
    pub fn pass(&self) -> bool {
        self.valid && self.l1_bound_holds && self.psi_l1.is_finite() && self.psi_lp.is_finite()
    }
}

/// Builds ψ for one sample and certifies it at each exponent.
pub fn majorant_rows(profile: &RadiusProfile, seed: u64, ps: &[f64], tol: f64) -> steinhaus::Result<Vec<MajorantRow>> {
    let sample = sample_sequence(profile, seed);
    let table = phi_lambda(&sample);
    let x_1 = criterion_sum(&table, 1.0)?;
    let psi = match build_psi(&table) {
        Ok(psi) => psi,
        Err(LabError::DuplicatePoints) => {
            return Ok(ps
                .iter()
                .map(|&p| MajorantRow {
                    seed,
                    p,
                    n_points: sample.len(),
                    min_margin: f64::NEG_INFINITY,
                    psi_l1: f64::NAN,
                    psi_lp: f64::NAN,
                    sup_k: f64::NAN,
                    x_1,
                    l1_bound: f64::NAN,
                    l1_bound_holds: false,
                    valid: false,
                })
                .collect())
        }
        Err(e) => return Err(e),
    };
    Ok(ps
        .iter()
        .map(|&p| {
            let cert = certify_majorant(&table, &psi, p, tol);
            let l1_bound = cert.sup_k * x_1 / std::f64::consts::PI;
            MajorantRow {
                seed,
                p,
                n_points: sample.len(),
                min_margin: cert.min_margin(),
                psi_l1: cert.psi_l1,
                psi_lp: cert.psi_lp,
                sup_k: cert.sup_k,
                x_1,
                l1_bound,
                l1_bound_holds: cert.psi_l1 <= l1_bound * (1.0 + 1e-12),
                valid: cert.valid,
            }
        })
        .collect())
}

fn majorant(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let profile = ctx.profile().clone();
    let rows: Vec<MajorantRow> = cfg
        .seeds
        .par_iter()
        .map(|&seed| majorant_rows(&profile, seed, &cfg.p_list, cfg.cert_tol))
        .collect::<steinhaus::Result<Vec<_>>>()?
        .into_iter()
        .flatten()
        .collect();
    for r in &rows {
        ctx.record(
            format!("majorant seed={} p={}", r.seed, fmt_p(r.p)),
            (-r.min_margin).max(0.0),
            Some(r.pass()),
            Gate::Always,
        );
    }
    let csv = || {
        let mut out = String::from("seed,p,n_points,min_margin,psi_l1,psi_lp,sup_K,x_1,l1_bound,l1_bound_holds,valid\n");
        for r in &rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.seed, r.p, r.n_points, r.min_margin, r.psi_l1, r.psi_lp, r.sup_k, r.x_1, r.l1_bound, r.l1_bound_holds, r.valid
            );
        }
        out
    };
    ctx.sink.table("majorant", csv, &rows)
}

fn criterion_dist(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let dists = criterion_distributions(ctx.profile(), &cfg.p_list, &cfg.seeds, &cfg.checkpoints)?;
    let mut summary = String::from("p,N,mean_increment,median_increment\n");
    for d in &dists {
        ctx.sink.table(&format!("criterion_dist_p{}", fmt_p(d.p)), || d.to_csv(), d)?;
        for ((n, mean), median) in d.checkpoints.iter().zip(&d.mean_increments).zip(&d.median_increments) {
            let _ = writeln!(summary, "{},{n},{mean},{median}", d.p);
        }
        ctx.record(
            format!("criterion-dist p={} medians decreasing", fmt_p(d.p)),
            0.0,
            Some(d.medians_strictly_decreasing()),
            Gate::Strict,
        );
    }
    ctx.sink.table("criterion_dist_summary", || summary, &dists)
}

fn stolz_cover(ctx: &mut Ctx) -> Result<()> {
    let cfg = ctx.cfg;
    let profile = ctx.profile().clone();
    let reports = cfg
        .seeds
        .iter()
        .map(|&seed| stolz_cover_greedy(&sample_sequence(&profile, seed).points, cfg.k, cfg.alpha, cfg.m).map(|r| (seed, r)))
        .collect::<steinhaus::Result<Vec<_>>>()?;
    for (seed, r) in &reports {
        ctx.record(format!("stolz-cover seed={seed} uncovered={}", r.uncovered_fraction), 0.0, None, Gate::Strict);
    }
    let csv = || {
        let mut out = String::from("seed,K,alpha,M,covered_fraction,uncovered_fraction\n");
        for (seed, r) in &reports {
            let _ = writeln!(out, "{seed},{},{},{},{},{}", r.k, r.alpha, r.candidates, r.covered_fraction, r.uncovered_fraction);
        }
        out
    };
    let json: Vec<_> = reports.iter().map(|(seed, r)| serde_json::json!({ "seed": seed, "report": r })).collect();
    ctx.sink.table("stolz_cover", csv, &json)
}

fn carleson(ctx: &mut Ctx) -> Result<()> {
    let rows = carleson_counterexample(ctx.cfg.n_max)?;
    let rho_ok = rows.iter().all(|r| r.rho_rel_error() <= CARLESON_TOL);
    let product_ok = rows.iter().all(|r| r.naftalevic_product == f64::from(r.n));
    let ratio_ok = rows.iter().all(|r| r.lower_over_ceiling() == f64::from(r.n) / 2.0 && (r.n < 3 || r.lower_over_ceiling() > 1.0));
    ctx.record(
        "carleson-demo",
        max_of(rows.iter().map(|r| r.rho_rel_error())),
        Some(rho_ok && product_ok && ratio_ok),
        Gate::Always,
    );
    ctx.sink.table("carleson", || carleson_csv(&rows), &rows)
}
