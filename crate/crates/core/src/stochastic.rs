//! Monte Carlo and quadrature checks of the expectation estimates behind the
//! random model.
//!
//! For `λ = r e^{iθ₁}`, `μ = s e^{iθ₂}` with independent uniform arguments,
//! rotation invariance reduces `E[log^p 1/ρ(λ, μ)]` to
//!
//! ```text
//! (1/π) ∫_0^π log^p 1/ρ(r, s e^{iθ}) dθ,
//! ```
//!
//! which is integrated with panels refined geometrically towards `θ = 0`
//! (logarithmic singularity when `r = s`), or sampled directly.
//!
//! Monte Carlo work is split into chunks of [`MC_CHUNK`] draws. Chunk `c`
//! reads its own stream, chunk statistics are merged in chunk order, and
//! the result is therefore bit-identical for any number of threads.

use std::fmt::Write as _;
use std::f64::consts::{PI, TAU};

use rand_distr::{Distribution as _, Exp, LogNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blaschke::{sorted_sum, PrefixBlocks, PrefixCriterion};
use crate::error::{LabError, Result};
use crate::geometry::{annulus_index, log_inv_rho, DiskPoint};
use crate::quad::{geometric_ladder, integrate, QuadOptions};
use crate::rng;
use crate::sequences::{sample_sequence, ProfileKind, RadiusProfile};

/// Draws per Monte Carlo chunk.
pub const MC_CHUNK: usize = 1 << 16;

/// Running mean and centered second moment (Welford), mergeable (Chan et al.).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Moments {
    pub n: u64,
    pub mean: f64,
    m2: f64,
}

impl Moments {
    pub fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
    }

    pub fn merge(&mut self, other: &Moments) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let d = other.mean - self.mean;
        self.mean += d * other.n as f64 / n as f64;
        self.m2 += other.m2 + d * d * (self.n as f64 * other.n as f64 / n as f64);
        self.n = n;
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.n == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.n as f64).sqrt()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodKind {
    MonteCarlo,
    Quadrature,
}

impl MethodKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            MethodKind::MonteCarlo => "monte_carlo",
            MethodKind::Quadrature => "quadrature",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Method {
    MonteCarlo { n: usize, seed: u64 },
    Quadrature(QuadOptions),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorResult {
    pub mean: f64,
    /// Sample standard deviation over `√n`; zero for quadrature.
    pub std_error: f64,
    pub n_samples: u64,
    pub method: MethodKind,
    /// The standard error for Monte Carlo, the error estimate for quadrature.
    pub achieved_error: f64,
}

fn check_radius(x: f64, name: &str) -> Result<()> {
    if !(0.0..1.0).contains(&x) {
        return Err(LabError::param(format!("{name} = {x} must lie in [0, 1)")));
    }
    Ok(())
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(LabError::param(format!("exponent must satisfy p ≥ 1, got {p}")));
    }
    Ok(())
}

/// `log^p 1/ρ(r, s e^{iθ})`.
fn integrand(a: &DiskPoint, s: f64, p: f64, theta: f64) -> f64 {
    let b = DiskPoint::from_parts(1.0 - s, (-s).ln_1p(), theta);
    log_inv_rho(a, &b).powf(p)
}

/// Estimates `E[log^p 1/ρ(r e^{iθ₁}, s e^{iθ₂})]`.
pub fn expect_logp_rho(r: f64, s: f64, p: f64, method: &Method) -> Result<EstimatorResult> {
    check_radius(r, "r")?;
    check_radius(s, "s")?;
    check_exponent(p)?;
    let a = DiskPoint::from_polar(r, 0.0)?;
    match *method {
        Method::Quadrature(opts) => {
            let finest = ((1.0 - r) * (1.0 - r) * 1e-4).max(1e-300);
            let pts = geometric_ladder(0.0, PI, 0.0, finest);
            let res = integrate(|t| integrand(&a, s, p, t), &pts, &opts);
            if !res.converged {
                return Err(LabError::QuadratureNotConverged { value: res.value / PI, error: res.error / PI, evals: res.evals });
            }
            Ok(EstimatorResult {
                mean: res.value / PI,
                std_error: 0.0,
                n_samples: res.evals as u64,
                method: MethodKind::Quadrature,
                achieved_error: res.error / PI,
            })
        }
        Method::MonteCarlo { n, seed } => {
            let m = monte_carlo(n, |chunk, len| {
                let mut acc = Moments::default();
                let mut g = rng::stream(seed, rng::TAG_LOG_RHO, chunk);
                for _ in 0..len {
                    acc.push(integrand(&a, s, p, TAU * rng::unit_f64(&mut g)));
                }
                acc
            })?;
            Ok(EstimatorResult {
                mean: m.mean,
                std_error: m.std_error(),
                n_samples: m.n,
                method: MethodKind::MonteCarlo,
                achieved_error: m.std_error(),
            })
        }
    }
}

/// Runs `work(chunk_index, chunk_len)` over `n` draws and merges in order.
fn monte_carlo<F>(n: usize, work: F) -> Result<Moments>
where
    F: Fn(u32, usize) -> Moments + Sync,
{
    if n == 0 {
        return Err(LabError::param("Monte Carlo needs at least one draw"));
    }
    let chunks = n.div_ceil(MC_CHUNK);
    let chunks_u32 = u32::try_from(chunks).map_err(|_| LabError::param("too many Monte Carlo draws"))?;
    let parts: Vec<Moments> = (0..chunks_u32)
        .into_par_iter()
        .map(|c| {
            let len = MC_CHUNK.min(n - c as usize * MC_CHUNK);
            work(c, len)
        })
        .collect();
    let mut total = Moments::default();
    for part in &parts {
        total.merge(part);
    }
    Ok(total)
}

/// Which aggregate decides a [`LemmaVerdict`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerdictRule {
    /// Every row's ratio is at most the bound.
    RatiosAtMost,
    /// Within every series, `max ratio / min ratio` is at most the bound.
    SpreadAtMost,
}

/// One line of a battery.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatteryRow {
    pub lemma: String,
    pub p: f64,
    pub r: f64,
    pub s: f64,
    pub method: MethodKind,
    pub estimate: f64,
    pub error: f64,
    /// The reference quantity the estimate is compared with.
    pub bound_ref: f64,
    pub ratio: f64,
    pub pass: bool,
    /// Rows sharing a series are compared with each other.
    #[serde(skip)]
    pub series: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LemmaVerdict {
    pub lemma_id: String,
    pub grid: String,
    pub rows: Vec<BatteryRow>,
    pub rule: VerdictRule,
    pub bound_constant: f64,
    /// `max/min` of the ratios within each series (`SpreadAtMost` only).
    pub spreads: Vec<f64>,
    pub pass: bool,
}

impl LemmaVerdict {
    pub fn ratios(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.ratio).collect()
    }

    pub fn max_ratio(&self) -> f64 {
        self.rows.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV with columns `lemma,p,r,s,method,estimate,error,bound_ref,ratio,pass`.
    pub fn to_csv(&self) -> String {
        battery_csv(&self.rows)
    }

    fn from_rows(lemma_id: &str, grid: String, mut rows: Vec<BatteryRow>, rule: VerdictRule, bound: f64) -> Self {
        let mut spreads = Vec::new();
        match rule {
            VerdictRule::RatiosAtMost => {
                for row in &mut rows {
                    row.pass = row.ratio.is_finite() && row.ratio <= bound;
                }
            }
            VerdictRule::SpreadAtMost => {
                let n_series = rows.iter().map(|r| r.series + 1).max().unwrap_or(0);
                for k in 0..n_series {
                    let ratios: Vec<f64> = rows.iter().filter(|r| r.series == k).map(|r| r.ratio).collect();
                    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
                    let spread = if min > 0.0 { max / min } else { f64::INFINITY };
                    spreads.push(spread);
                    for row in rows.iter_mut().filter(|r| r.series == k) {
                        row.pass = row.ratio.is_finite() && row.ratio > 0.0 && spread <= bound;
                    }
                }
            }
        }
        let pass = rows.iter().all(|r| r.pass);
        Self { lemma_id: lemma_id.to_string(), grid, rows, rule, bound_constant: bound, spreads, pass }
    }
}

pub fn battery_csv(rows: &[BatteryRow]) -> String {
    let mut out = String::from("lemma,p,r,s,method,estimate,error,bound_ref,ratio,pass\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            row.lemma,
            row.p,
            row.r,
            row.s,
            row.method.as_str(),
            row.estimate,
            row.error,
            row.bound_ref,
            row.ratio,
            row.pass
        );
    }
    out
}

/// Default tolerance of the Cochran identity check.
pub const COCHRAN_TOL: f64 = 1e-7;

/// Compares `E[log 1/ρ]` with `-max(log r, log s)` on every grid pair.
///
/// Rows carry the absolute deviation as `ratio` and the tolerance as the
/// bound. The pair `r = s = 0` is skipped: both points sit at the origin and
/// both sides are infinite.
pub fn cochran_check(grid: &[f64], method: &Method, tol: f64) -> Result<LemmaVerdict> {
    let pairs: Vec<(f64, f64)> = grid
        .iter()
        .flat_map(|&r| grid.iter().map(move |&s| (r, s)))
        .filter(|&(r, s)| r.max(s) > 0.0)
        .collect();
    let rows = pairs
        .par_iter()
        .map(|&(r, s)| {
            let est = expect_logp_rho(r, s, 1.0, method)?;
            let exact = -(r.max(s)).ln();
            let deviation = (est.mean - exact).abs();
            let ratio = match est.method {
                MethodKind::Quadrature => deviation,
                // for sampling, the deviation in units of the standard error
                MethodKind::MonteCarlo => deviation / (3.0 * est.std_error).max(f64::MIN_POSITIVE) * tol,
            };
            Ok(BatteryRow {
                lemma: "cochran".into(),
                p: 1.0,
                r,
                s,
                method: est.method,
                estimate: est.mean,
                error: est.achieved_error,
                bound_ref: exact,
                ratio,
                pass: false,
                series: 0,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(LemmaVerdict::from_rows("cochran", format!("{grid:?}^2"), rows, VerdictRule::RatiosAtMost, tol))
}

/// Default `r`-grid of the diagonal battery.
pub const DIAGONAL_GRID: [f64; 4] = [0.9, 0.99, 0.999, 0.9999];
/// Companion depths `(1 - s)/(1 - r)` of the diagonal battery.
pub const DIAGONAL_COMPANIONS: [f64; 3] = [0.5, 1.0, 2.0];
/// Band for the `max/min` spread of ratios within a series.
pub const SPREAD_BOUND: f64 = 10.0;

/// Ratios `E[log^p 1/ρ]/(1 - r²)` for `r` on the grid and `1 - s` in
/// `{(1-r)/2, 1-r, 2(1-r)}`, one series per companion regime.
pub fn diagonal_bound_check(p: f64, r_grid: &[f64], method: &Method) -> Result<LemmaVerdict> {
    if let Some(r) = r_grid.iter().find(|&&r| !(0.5..1.0).contains(&r)) {
        return Err(LabError::param(format!("diagonal grid needs 1/2 ≤ r < 1, got {r}")));
    }
    let tasks: Vec<(usize, f64, f64)> = DIAGONAL_COMPANIONS
        .iter()
        .enumerate()
        .flat_map(|(k, &f)| r_grid.iter().map(move |&r| (k, r, 1.0 - f * (1.0 - r))))
        .collect();
    let rows = tasks
        .par_iter()
        .map(|&(series, r, s)| {
            let est = expect_logp_rho(r, s, p, method)?;
            let bound_ref = 1.0 - r * r;
            Ok(BatteryRow {
                lemma: "diagonal".into(),
                p,
                r,
                s,
                method: est.method,
                estimate: est.mean,
                error: est.achieved_error,
                bound_ref,
                ratio: est.mean / bound_ref,
                pass: false,
                series,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = format!("r in {r_grid:?}, (1-s)/(1-r) in {DIAGONAL_COMPANIONS:?}");
    Ok(LemmaVerdict::from_rows("diagonal", grid, rows, VerdictRule::SpreadAtMost, SPREAD_BOUND))
}

/// A pair of radii for the off-diagonal battery, with its series label.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusPair {
    pub r: f64,
    pub s: f64,
    pub series: usize,
}

/// The standard off-diagonal battery: `r = 1 - 2^{-l}` for `l = 1..=levels`
/// against `s = 1 - 2^{-(l+gap)}` for each gap, one series per gap, plus the
/// degenerate pair `r = 0`, `s = 0.96875` as its own series.
pub fn offdiagonal_pairs(levels: u32, gaps: std::ops::RangeInclusive<u32>) -> Vec<RadiusPair> {
    let mut out = Vec::new();
    for (k, gap) in gaps.enumerate() {
        for l in 1..=levels {
            out.push(RadiusPair { r: 1.0 - 0.5f64.powi(l as i32), s: 1.0 - 0.5f64.powi((l + gap) as i32), series: k });
        }
    }
    let series = out.iter().map(|p| p.series + 1).max().unwrap_or(0);
    out.push(RadiusPair { r: 0.0, s: 0.96875, series });
    out
}

/// Ratios `E[log^p 1/ρ]/min(1 - r, 1 - s)` for pairs in annuli at least two
/// apart; adjacent annuli belong to the diagonal battery.
pub fn offdiagonal_bound_check(p: f64, pairs: &[RadiusPair], method: &Method) -> Result<LemmaVerdict> {
    for pair in pairs {
        let a = annulus_index(&DiskPoint::from_polar(pair.r, 0.0)?);
        let b = annulus_index(&DiskPoint::from_polar(pair.s, 0.0)?);
        if a.abs_diff(b) < 2 {
            return Err(LabError::param(format!(
                "pair ({}, {}) lies in annuli {a} and {b}; use the diagonal check",
                pair.r, pair.s
            )));
        }
    }
    let rows = pairs
        .par_iter()
        .map(|pair| {
            let est = expect_logp_rho(pair.r, pair.s, p, method)?;
            let bound_ref = (1.0 - pair.r).min(1.0 - pair.s);
            Ok(BatteryRow {
                lemma: "offdiagonal".into(),
                p,
                r: pair.r,
                s: pair.s,
                method: est.method,
                estimate: est.mean,
                error: est.achieved_error,
                bound_ref,
                ratio: est.mean / bound_ref,
                pass: false,
                series: pair.series,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = format!("{} pairs, series by annulus gap", pairs.len());
    Ok(LemmaVerdict::from_rows("offdiagonal", grid, rows, VerdictRule::SpreadAtMost, SPREAD_BOUND))
}

/// Nonnegative laws for the Rosenthal battery.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Distribution {
    Exponential { rate: f64 },
    LogNormal { mu: f64, sigma: f64 },
    Constant { value: f64 },
    /// `log 1/ρ(r, s e^{iθ})` with `θ` uniform.
    LogInvRho { r: f64, s: f64 },
}

impl Distribution {
    fn validate(&self) -> Result<()> {
        let ok = match *self {
            Distribution::Exponential { rate } => rate > 0.0 && rate.is_finite(),
            Distribution::LogNormal { mu, sigma } => mu.is_finite() && sigma > 0.0 && sigma.is_finite(),
            Distribution::Constant { value } => value >= 0.0 && value.is_finite(),
            Distribution::LogInvRho { r, s } => (0.0..1.0).contains(&r) && (0.0..1.0).contains(&s) && r != s,
        };
        if ok {
            Ok(())
        } else {
            Err(LabError::param(format!("invalid distribution {self:?}")))
        }
    }

    /// `E[X^p]` where a closed form exists.
    pub fn moment(&self, p: f64) -> Option<f64> {
        match *self {
            Distribution::Exponential { rate } => Some(libm::tgamma(p + 1.0) / rate.powf(p)),
            Distribution::LogNormal { mu, sigma } => Some((p * mu + 0.5 * p * p * sigma * sigma).exp()),
            Distribution::Constant { value } => Some(value.powf(p)),
            Distribution::LogInvRho { .. } => None,
        }
    }

    /// `E[(X_1 + ... + X_k)^p]` for i.i.d. copies, where a closed form exists.
    pub fn sum_moment(&self, k: usize, p: f64) -> Option<f64> {
        match *self {
            // the sum is Gamma(k, rate)
            Distribution::Exponential { rate } => {
                let k = k as f64;
                Some((libm::lgamma(k + p) - libm::lgamma(k)).exp() / rate.powf(p))
            }
            Distribution::Constant { value } => Some((k as f64 * value).powf(p)),
            _ => None,
        }
    }
}

enum Sampler {
    Exp(Exp<f64>),
    LogNormal(LogNormal<f64>),
    Constant(f64),
    LogInvRho(DiskPoint, f64),
}

impl Sampler {
    fn new(d: &Distribution) -> Result<Self> {
        Ok(match *d {
            Distribution::Exponential { rate } => Sampler::Exp(Exp::new(rate).map_err(|e| LabError::param(e.to_string()))?),
            Distribution::LogNormal { mu, sigma } => {
                Sampler::LogNormal(LogNormal::new(mu, sigma).map_err(|e| LabError::param(e.to_string()))?)
            }
            Distribution::Constant { value } => Sampler::Constant(value),
            Distribution::LogInvRho { r, s } => Sampler::LogInvRho(DiskPoint::from_polar(r, 0.0)?, s),
        })
    }

    fn draw(&self, g: &mut rand_chacha::ChaCha8Rng) -> f64 {
        match self {
            Sampler::Exp(d) => d.sample(g),
            Sampler::LogNormal(d) => d.sample(g),
            Sampler::Constant(c) => *c,
            Sampler::LogInvRho(a, s) => integrand(a, *s, 1.0, TAU * rng::unit_f64(g)),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RosenthalReport {
    pub distribution: Distribution,
    pub k: usize,
    pub p: f64,
    pub n: usize,
    /// Monte Carlo `E[(Σ X_m)^p]`.
    pub lhs: f64,
    pub lhs_error: f64,
    /// Closed form of the left side, when available.
    pub lhs_exact: Option<f64>,
    /// `Σ E[X_m^p]`
    pub sum_of_moments: f64,
    /// `(Σ E[X_m])^p`
    pub power_of_sum: f64,
    /// `2^{p²} max(Σ E[X_m^p], (Σ E[X_m])^p)`
    pub rhs: f64,
    pub rhs_error: f64,
    pub pass: bool,
}

/// Trials per Rosenthal chunk.
const ROSENTHAL_CHUNK: usize = 1 << 13;

/// Monte Carlo check of `E[(Σ X_m)^p] ≤ 2^{p²} max(Σ E[X_m^p], (Σ E[X_m])^p)`
/// for `k` i.i.d. copies. Chunk `c` of task `task` reads stream
/// `(seed, TAG_ROSENTHAL, task·2^16 + c)`.
pub fn rosenthal_check(dist: &Distribution, k: usize, p: f64, n: usize, seed: u64, task: u16) -> Result<RosenthalReport> {
    dist.validate()?;
    if !(p > 1.0) || !p.is_finite() {
        return Err(LabError::param(format!("Rosenthal exponent must satisfy p > 1, got {p}")));
    }
    if k == 0 || k > 64 {
        return Err(LabError::param(format!("number of variables must be in 1..=64, got {k}")));
    }
    if n == 0 {
        return Err(LabError::param("Monte Carlo needs at least one trial"));
    }
    let sampler = Sampler::new(dist)?;
    let chunks = n.div_ceil(ROSENTHAL_CHUNK);
    if chunks > 1 << 16 {
        return Err(LabError::param("too many Rosenthal trials"));
    }
    let parts: Vec<[Moments; 3]> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let len = ROSENTHAL_CHUNK.min(n - c * ROSENTHAL_CHUNK);
            let mut g = rng::stream(seed, rng::TAG_ROSENTHAL, (u32::from(task) << 16) | c as u32);
            let mut acc = [Moments::default(); 3];
            let mut xs = vec![0.0; k];
            for _ in 0..len {
                for x in xs.iter_mut() {
                    *x = sampler.draw(&mut g);
                }
                let sum = sorted_sum(&mut xs.clone());
                acc[0].push(sum.powf(p));
                for &x in &xs {
                    acc[1].push(x.powf(p));
                    acc[2].push(x);
                }
            }
            acc
        })
        .collect();
    let mut tot = [Moments::default(); 3];
    for part in &parts {
        for (t, q) in tot.iter_mut().zip(part) {
            t.merge(q);
        }
    }
    let [lhs_m, xp, x1] = tot;
    let kf = k as f64;
    let sum_of_moments = kf * xp.mean;
    let sum_se = kf * xp.std_error();
    let mean_sum = kf * x1.mean;
    let power_of_sum = mean_sum.powf(p);
    // delta method for (k m)^p
    let power_se = p * mean_sum.powf(p - 1.0) * kf * x1.std_error();
    let factor = (p * p).exp2();
    let (core, core_se) = if sum_of_moments >= power_of_sum { (sum_of_moments, sum_se) } else { (power_of_sum, power_se) };
    let rhs = factor * core;
    let rhs_error = factor * core_se;
    let lhs = lhs_m.mean;
    let lhs_error = lhs_m.std_error();
    let finite = [lhs, lhs_error, rhs, rhs_error].iter().all(|v| v.is_finite());
    let combined = lhs_error.hypot(rhs_error);
    Ok(RosenthalReport {
        distribution: *dist,
        k,
        p,
        n,
        lhs,
        lhs_error,
        lhs_exact: dist.sum_moment(k, p),
        sum_of_moments,
        power_of_sum,
        rhs,
        rhs_error,
        pass: finite && lhs <= rhs + 3.0 * combined,
    })
}

/// The deterministic quantities `(n - 1)(1 - r_n)` and `Σ_{m>n} (1 - r_m)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Driver {
    pub n: usize,
    pub lead: f64,
    pub tail: f64,
    /// Whether `tail` is the full infinite tail (closed form) rather than a
    /// sum over the truncation.
    pub tail_exact: bool,
}

/// Drivers for `n = 1..=n_max`.
///
/// Geometric profiles use the closed tail `q^{n+1}/(1 - q)`; other profiles
/// sum the tail over `n < m ≤ count`.
pub fn drivers(profile: &RadiusProfile, n_max: usize) -> Vec<Driver> {
    if let ProfileKind::Geometric { q } = *profile.kind() {
        return (1..=n_max)
            .map(|n| {
                let g = q.powi(n as i32);
                Driver { n, lead: (n as f64 - 1.0) * g, tail: g * q / (1.0 - q), tail_exact: true }
            })
            .collect();
    }
    let depths: Vec<f64> = profile.depths().iter().map(|d| d.value).collect();
    (1..=n_max.min(depths.len()))
        .map(|n| {
            let lead = (n as f64 - 1.0) * depths[n - 1];
            let tail = sorted_sum(&mut depths[n..].to_vec());
            Driver { n, lead, tail, tail_exact: false }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedCriteria {
    pub seed: u64,
    pub rows: Vec<PrefixCriterion>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionDistribution {
    pub profile: String,
    pub tail_convergent: bool,
    pub p: f64,
    pub checkpoints: Vec<usize>,
    pub per_seed: Vec<SeedCriteria>,
    /// Cross-seed mean of `X_p(N) - X_p(N/2)` per checkpoint.
    pub mean_increments: Vec<f64>,
    pub median_increments: Vec<f64>,
    pub drivers: Vec<Driver>,
}

impl CriterionDistribution {
    pub fn medians_strictly_decreasing(&self) -> bool {
        self.median_increments.windows(2).all(|w| w[1] < w[0])
    }

    /// CSV with columns `seed,N,X_p,increment`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("seed,N,X_p,increment\n");
        for s in &self.per_seed {
            for row in &s.rows {
                let _ = writeln!(out, "{},{},{},{}", s.seed, row.n, row.x_p, row.increment);
            }
        }
        out
    }
}

pub(crate) fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// `X_p` and its increments at the checkpoints for every seed.
pub fn criterion_distribution(
    profile: &RadiusProfile,
    p: f64,
    seeds: &[u64],
    checkpoints: &[usize],
) -> Result<CriterionDistribution> {
    Ok(criterion_distributions(profile, &[p], seeds, checkpoints)?.remove(0))
}

/// [`criterion_distribution`] for several exponents, sharing the pairwise
/// work between them.
pub fn criterion_distributions(
    profile: &RadiusProfile,
    ps: &[f64],
    seeds: &[u64],
    checkpoints: &[usize],
) -> Result<Vec<CriterionDistribution>> {
    for &p in ps {
        check_exponent(p)?;
    }
    let top = checkpoints.iter().copied().max().unwrap_or(0);
    let full = profile.with_count(top);
    // per_seed[seed][p]
    let per_seed: Vec<Vec<SeedCriteria>> = seeds
        .par_iter()
        .map(|&seed| {
            let sample = sample_sequence(&full, seed);
            let blocks = PrefixBlocks::new(&sample.points, checkpoints);
            ps.iter()
                .map(|&p| {
                    let rows = checkpoints.iter().map(|&n| blocks.evaluate(n, p)).collect::<Result<Vec<_>>>()?;
                    Ok(SeedCriteria { seed, rows })
                })
                .collect::<Result<Vec<_>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let driver_rows = drivers(profile, top.min(64));
    Ok(ps
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let seeds_p: Vec<SeedCriteria> = per_seed.iter().map(|v| v[i].clone()).collect();
            let mut mean_increments = Vec::with_capacity(checkpoints.len());
            let mut median_increments = Vec::with_capacity(checkpoints.len());
            for k in 0..checkpoints.len() {
                let mut incs: Vec<f64> = seeds_p.iter().map(|s| s.rows[k].increment).collect();
                mean_increments.push(sorted_sum(&mut incs.clone()) / incs.len().max(1) as f64);
                median_increments.push(median(&mut incs));
            }
            CriterionDistribution {
                profile: profile.to_string(),
                tail_convergent: profile.tail_convergent(),
                p,
                checkpoints: checkpoints.to_vec(),
                per_seed: seeds_p,
                mean_increments,
                median_increments,
                drivers: driver_rows.clone(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn quad() -> Method {
        Method::Quadrature(QuadOptions::with_rel_tol(1e-10))
    }

    #[test]
    fn closed_form_examples() {
        let e = expect_logp_rho(0.5, 0.8, 1.0, &quad()).unwrap();
        assert!((e.mean - (1.25f64).ln()).abs() < 1e-9, "{e:?}");
        let e = expect_logp_rho(0.0, 0.7, 1.0, &quad()).unwrap();
        assert!((e.mean - (1.0f64 / 0.7).ln()).abs() < 1e-12);
        let e = expect_logp_rho(0.0, 0.7, 2.5, &quad()).unwrap();
        assert!((e.mean - (1.0f64 / 0.7).ln().powf(2.5)).abs() < 1e-12);
        let e = expect_logp_rho(0.9, 0.9, 1.0, &quad()).unwrap();
        assert!((e.mean + (0.9f64).ln()).abs() < 1e-8, "{e:?}");
        assert!(expect_logp_rho(0.5, 0.5, 0.5, &quad()).is_err());
        assert!(expect_logp_rho(1.0, 0.5, 1.0, &quad()).is_err());
    }

    #[test]
    fn monte_carlo_agrees_with_quadrature() {
        let q = expect_logp_rho(0.99, 0.99, 2.0, &quad()).unwrap();
        let mc = expect_logp_rho(0.99, 0.99, 2.0, &Method::MonteCarlo { n: 200_000, seed: 5 }).unwrap();
        assert_eq!(mc.n_samples, 200_000);
        assert!((q.mean - mc.mean).abs() <= 3.0 * mc.std_error, "{q:?} {mc:?}");
        let again = expect_logp_rho(0.99, 0.99, 2.0, &Method::MonteCarlo { n: 200_000, seed: 5 }).unwrap();
        assert_eq!(mc.mean.to_bits(), again.mean.to_bits());
    }

    #[test]
    fn welford_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..1000).map(|i| ((i * 7919) % 1009) as f64 / 17.0).collect();
        let mut all = Moments::default();
        xs.iter().for_each(|&x| all.push(x));
        let mut a = Moments::default();
        let mut b = Moments::default();
        xs[..313].iter().for_each(|&x| a.push(x));
        xs[313..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert_relative_eq!(a.mean, all.mean, max_relative = 1e-14);
        assert_relative_eq!(a.variance(), all.variance(), max_relative = 1e-12);
        let mean = xs.iter().sum::<f64>() / 1000.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 999.0;
        assert_relative_eq!(all.variance(), var, max_relative = 1e-12);
    }

    #[test]
    fn cochran_battery() {
        let v = cochran_check(&[0.5, 0.9, 0.99], &quad(), COCHRAN_TOL).unwrap();
        assert_eq!(v.rows.len(), 9);
        assert!(v.pass, "{v:#?}");
        let v0 = cochran_check(&[0.0, 0.3], &quad(), 1e-14).unwrap();
        assert_eq!(v0.rows.len(), 3);
        assert!(v0.rows.iter().filter(|r| r.r == 0.0).all(|r| r.pass));
    }

    #[test]
    fn diagonal_and_offdiagonal_batteries() {
        for p in [1.0, 2.0, 3.0] {
            let v = diagonal_bound_check(p, &DIAGONAL_GRID, &quad()).unwrap();
            assert_eq!(v.rows.len(), 12);
            assert!(v.pass, "p = {p}: {:?}", v.spreads);
        }
        for p in [1.0, 2.0] {
            let v = offdiagonal_bound_check(p, &offdiagonal_pairs(12, 2..=8), &quad()).unwrap();
            assert!(v.pass, "p = {p}: {:?}", v.spreads);
        }
        assert!(diagonal_bound_check(1.0, &[0.3], &quad()).is_err());
        let adjacent = [RadiusPair { r: 0.5, s: 0.75, series: 0 }];
        assert!(offdiagonal_bound_check(1.0, &adjacent, &quad()).is_err());
    }

    #[test]
    fn p_one_is_implied_by_cochran() {
        for &r in &DIAGONAL_GRID {
            for &f in &DIAGONAL_COMPANIONS {
                let s = 1.0 - f * (1.0 - r);
                let e = expect_logp_rho(r, s, 1.0, &quad()).unwrap().mean;
                assert!(e <= 2.0 * (1.0 - r * r), "r = {r}, s = {s}");
            }
        }
    }

    #[test]
    fn rosenthal_examples() {
        let exp = Distribution::Exponential { rate: 1.0 };
        let rep = rosenthal_check(&exp, 16, 2.0, 100_000, 11, 0).unwrap();
        assert_relative_eq!(rep.lhs_exact.unwrap(), 16.0 * 17.0, max_relative = 1e-12);
        assert!((rep.lhs - 272.0).abs() <= 3.0 * rep.lhs_error, "{rep:?}");
        assert!(rep.pass);

        let c = Distribution::Constant { value: 0.5 };
        let rep = rosenthal_check(&c, 8, 3.0, 1000, 1, 1).unwrap();
        assert_eq!(rep.lhs, 64.0);
        assert_eq!(rep.rhs, 512.0 * 64.0);
        assert!(rep.pass);

        let rep = rosenthal_check(&exp, 1, 1.5, 10_000, 3, 2).unwrap();
        assert!(rep.pass);
        assert!(rosenthal_check(&exp, 0, 2.0, 10, 0, 0).is_err());
        assert!(rosenthal_check(&exp, 65, 2.0, 10, 0, 0).is_err());
        assert!(rosenthal_check(&exp, 2, 1.0, 10, 0, 0).is_err());
    }

    #[test]
    fn closed_form_moments() {
        let e = Distribution::Exponential { rate: 2.0 };
        assert_relative_eq!(e.moment(3.0).unwrap(), 6.0 / 8.0, max_relative = 1e-14);
        let ln = Distribution::LogNormal { mu: 0.1, sigma: 0.5 };
        assert_relative_eq!(ln.moment(2.0).unwrap(), (0.2f64 + 0.5).exp(), max_relative = 1e-14);
        // k = 1 reduces to the single moment
        assert_relative_eq!(e.sum_moment(1, 2.5).unwrap(), e.moment(2.5).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn geometric_drivers() {
        let d = drivers(&RadiusProfile::geometric(0.5, 10).unwrap(), 40);
        assert_eq!(d.len(), 40);
        assert_eq!(d[29].n, 30);
        assert_eq!(d[29].lead, 29.0 * 0.5f64.powi(30));
        assert_eq!(d[29].tail, 0.5f64.powi(30));
        assert!(d[1..].windows(2).all(|w| w[1].lead <= w[0].lead && w[1].tail < w[0].tail));
    }

    #[test]
    fn median_of_even_and_odd() {
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), 2.5);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn power_means_increase_with_p(r in 0.5f64..0.999, s in 0.5f64..0.999, seed in 0u64..1000) {
            let method = Method::MonteCarlo { n: 4000, seed };
            let mut prev = 0.0;
            for p in [1.0, 1.5, 2.0, 3.0, 4.0] {
                let m = expect_logp_rho(r, s, p, &method).unwrap().mean.powf(1.0 / p);
                prop_assert!(m >= prev * (1.0 - 1e-12));
                prev = m;
            }
        }

        #[test]
        fn estimators_are_reproducible(r in 0.0f64..0.99, s in 0.0f64..0.99, seed in 0u64..1000) {
            let method = Method::MonteCarlo { n: 70_000, seed };
            let a = expect_logp_rho(r, s, 2.0, &method).unwrap();
            let b = expect_logp_rho(r, s, 2.0, &method).unwrap();
            prop_assert_eq!(a.mean.to_bits(), b.mean.to_bits());
            prop_assert_eq!(a.std_error.to_bits(), b.std_error.to_bits());
        }
    }
}
