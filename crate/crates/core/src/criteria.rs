//! End-to-end interpolation verdicts, Stolz-angle covering and the Carleson
//! counterexample.

use std::f64::consts::TAU;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::blaschke::{criterion_sum, naftalevic_sup, phi_lambda_points, prefix_criteria, separation, SeparationReport};
use crate::error::{LabError, Result};
use crate::geometry::{stolz_contains, DiskPoint, StolzAngle};
use crate::majorant::{build_psi, certify_majorant, CERTIFICATE_TOL};
use crate::sequences::{blaschke_sum, SequenceSample};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionValue {
    pub p: f64,
    pub x_p: f64,
    /// `X_p(N/2) - X_p(N/4)` and `X_p(N) - X_p(N/2)`.
    pub increments: [f64; 2],
    /// `X_p` finite and the later increment not larger than the earlier one.
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CertificateSummary {
    pub valid: bool,
    pub min_margin: f64,
    pub psi_l1: f64,
    pub psi_lp: f64,
    pub p: f64,
    pub sup_k: f64,
    /// `‖ψ‖_1 ≤ sup K · X_1/π`
    pub l1_bound_holds: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    /// The untruncated profile satisfies the Blaschke condition.
    pub blaschke: bool,
    /// Per requested `p`: `X_p` finite with decaying increments.
    pub hp_criterion: Vec<bool>,
    /// `X_1` finite and the majorant certificate valid.
    pub smirnov: bool,
    /// Per requested `p`: Blaschke, criterion and certificate all positive.
    pub hp_certified: Vec<bool>,
}

impl Verdicts {
    pub fn all_pass(&self) -> bool {
        self.blaschke && self.smirnov && self.hp_criterion.iter().all(|&v| v) && self.hp_certified.iter().all(|&v| v)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub profile: String,
    pub seed: u64,
    pub n_points: usize,
    pub blaschke_sum: f64,
    pub tail_convergent: bool,
    pub x_1: f64,
    pub criteria: Vec<CriterionValue>,
    pub naftalevic_sup: f64,
    pub separation: SeparationReport,
    pub has_duplicates: bool,
    pub certificate: Option<CertificateSummary>,
    pub verdicts: Verdicts,
}

/// Points sorted by decreasing depth, ties by argument. Every quantity of
/// [`evaluate_criteria`] is computed on this order, so the report does not
/// depend on how the sample is listed.
fn canonical_points(points: &[DiskPoint]) -> Vec<DiskPoint> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| b.log_depth().total_cmp(&a.log_depth()).then(a.angle().total_cmp(&b.angle())));
    pts
}

/// Assembles sums, separation, the ψ certificate and the verdicts.
pub fn evaluate_criteria(sample: &SequenceSample, p_list: &[f64]) -> Result<CriterionReport> {
    evaluate_criteria_with_tol(sample, p_list, CERTIFICATE_TOL)
}

/// [`evaluate_criteria`] with an explicit tolerance for negative certificate margins.
pub fn evaluate_criteria_with_tol(sample: &SequenceSample, p_list: &[f64], cert_tol: f64) -> Result<CriterionReport> {
    let points = canonical_points(&sample.points);
    let n = points.len();
    let table = phi_lambda_points(&points);
    let x_1 = criterion_sum(&table, 1.0)?;
    let checkpoints = [n / 2, n];
    let mut criteria = Vec::with_capacity(p_list.len());
    for &p in p_list {
        let x_p = criterion_sum(&table, p)?;
        let (increments, decaying) = if table.has_duplicates {
            ([f64::INFINITY; 2], false)
        } else {
            let rows = prefix_criteria(&points, p, &checkpoints)?;
            let inc = [rows[0].increment, rows[1].increment];
            (inc, n < 4 || inc[1] <= inc[0])
        };
        criteria.push(CriterionValue { p, x_p, increments, pass: x_p.is_finite() && decaying });
    }
    let certificate = if table.has_duplicates {
        None
    } else {
        let p_cert = p_list.iter().copied().fold(1.0, f64::max);
        let psi = build_psi(&table)?;
        let cert = certify_majorant(&table, &psi, p_cert, cert_tol);
        let bound = cert.sup_k * x_1 / std::f64::consts::PI;
        Some(CertificateSummary {
            valid: cert.valid,
            min_margin: cert.min_margin(),
            psi_l1: cert.psi_l1,
            psi_lp: cert.psi_lp,
            p: p_cert,
            sup_k: cert.sup_k,
            l1_bound_holds: cert.psi_l1 <= bound * (1.0 + 1e-12),
        })
    };
    let valid = certificate.as_ref().is_some_and(|c| c.valid);
    let blaschke = sample.profile.tail_convergent();
    let hp_criterion: Vec<bool> = criteria.iter().map(|c| c.pass).collect();
    let verdicts = Verdicts {
        blaschke,
        smirnov: x_1.is_finite() && valid,
        hp_certified: hp_criterion.iter().map(|&c| blaschke && c && valid).collect(),
        hp_criterion,
    };
    Ok(CriterionReport {
        profile: sample.profile.to_string(),
        seed: sample.seed,
        n_points: n,
        blaschke_sum: blaschke_sum(&sample.profile).partial_sum,
        tail_convergent: blaschke,
        x_1,
        criteria,
        naftalevic_sup: naftalevic_sup(&table),
        separation: separation(&table),
        has_duplicates: table.has_duplicates,
        certificate,
        verdicts,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StolzCoverReport {
    #[serde(rename = "K")]
    pub k: usize,
    pub alpha: f64,
    pub candidates: usize,
    pub chosen_vertices: Vec<f64>,
    pub covered_fraction: f64,
    pub uncovered_fraction: f64,
    /// Points covered after each greedy step.
    pub covered_after_step: Vec<usize>,
}

/// For each point, the candidate vertices `2πj/M` whose Stolz angle of
/// aperture `alpha` contains it.
fn covering_candidates(points: &[DiskPoint], alpha: f64, m: usize) -> Vec<Vec<usize>> {
    let step = TAU / m as f64;
    points
        .iter()
        .map(|z| {
            // 4|z| sin²(Δ/2) ≤ (α² - 1) g² bounds the angular window
            let bound = ((alpha * alpha - 1.0) / (4.0 * z.modulus())).sqrt() * z.depth();
            let window = if bound >= 1.0 || z.modulus() == 0.0 { f64::INFINITY } else { 2.0 * bound.asin() };
            let range: Vec<usize> = if window >= std::f64::consts::PI {
                (0..m).collect()
            } else {
                let lo = ((z.angle() - window) / step).floor() as i64 - 1;
                let hi = ((z.angle() + window) / step).ceil() as i64 + 1;
                let mut v: Vec<usize> = (lo..=hi).map(|j| j.rem_euclid(m as i64) as usize).collect();
                v.sort_unstable();
                v.dedup();
                v
            };
            range
                .into_iter()
                .filter(|&j| {
                    let a = StolzAngle::new(step * j as f64, alpha).expect("aperture checked");
                    stolz_contains(&a, z)
                })
                .collect()
        })
        .collect()
}

/// Greedy choice of `k` vertices among `m` equispaced candidates, each step
/// taking the vertex that covers the most new points (lowest index on ties).
pub fn stolz_cover_greedy(points: &[DiskPoint], k: usize, alpha: f64, m: usize) -> Result<StolzCoverReport> {
    if !(alpha > 1.0) || !alpha.is_finite() {
        return Err(LabError::param(format!("Stolz aperture must exceed 1, got {alpha}")));
    }
    if m == 0 {
        return Err(LabError::param("need at least one candidate vertex"));
    }
    let cover = covering_candidates(points, alpha, m);
    let mut by_vertex: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, js) in cover.iter().enumerate() {
        for &j in js {
            by_vertex[j].push(i);
        }
    }
    let mut covered = vec![false; points.len()];
    let mut gain: Vec<usize> = by_vertex.iter().map(Vec::len).collect();
    let mut chosen = Vec::new();
    let mut covered_after_step = Vec::new();
    let mut total = 0usize;
    for _ in 0..k {
        let (best, &g) = gain.iter().enumerate().max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0))).expect("m > 0");
        chosen.push(best);
        if g > 0 {
            for &i in &by_vertex[best] {
                if !covered[i] {
                    covered[i] = true;
                    total += 1;
                    for &j in &cover[i] {
                        gain[j] -= 1;
                    }
                }
            }
        }
        covered_after_step.push(total);
    }
    let n = points.len();
    let covered_fraction = if n == 0 { 0.0 } else { total as f64 / n as f64 };
    Ok(StolzCoverReport {
        k,
        alpha,
        candidates: m,
        chosen_vertices: chosen.iter().map(|&j| TAU * j as f64 / m as f64).collect(),
        covered_fraction,
        uncovered_fraction: if n == 0 { 0.0 } else { 1.0 - covered_fraction },
        covered_after_step,
    })
}

/// Fraction of `points` inside at least one of the given Stolz angles.
pub fn covered_fraction(points: &[DiskPoint], vertices: &[f64], alpha: f64) -> Result<f64> {
    let angles = vertices.iter().map(|&v| StolzAngle::new(v, alpha)).collect::<Result<Vec<_>>>()?;
    if points.is_empty() {
        return Ok(0.0);
    }
    let hit = points.iter().filter(|z| angles.iter().any(|a| stolz_contains(a, z))).count();
    Ok(hit as f64 / points.len() as f64)
}

/// One level of the Carleson counterexample.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CarlesonRow {
    pub n: u32,
    /// `r_n = 1 - 2^{-n}`
    pub r: f64,
    /// `ln(s_n - r_n)` for the radial companion `μ_n = s_n`.
    pub s_log_gap: f64,
    /// `ln ρ(λ_n, μ_n)` recomputed from `r_n` and `s_log_gap`.
    pub log_rho: f64,
    /// `n 2^n ≤ log 1/|B_n(λ_n)|`
    pub log_b_lower: f64,
    /// `2 · 2^n ≥ (1 + r_n)/(1 - r_n)`, Harnack for `h(0) = 1`.
    pub harnack_ceiling: f64,
    /// `(1 - r_n) n 2^n = n`
    pub naftalevic_product: f64,
}

impl CarlesonRow {
    /// Relative error of the reproduced `ln ρ` against `-n 2^n`.
    pub fn rho_rel_error(&self) -> f64 {
        (self.log_rho + self.log_b_lower).abs() / self.log_b_lower
    }

    pub fn lower_over_ceiling(&self) -> f64 {
        self.log_b_lower / self.harnack_ceiling
    }
}

pub const CARLESON_MAX_N: u32 = 40;

/// Builds `λ_n = 1 - 2^{-n}` and the radial companions `μ_n` with
/// `ρ(λ_n, μ_n) = ε_n = e^{-n 2^n}`, for `n = 1..=n_max`.
///
/// With `s = (r + ε)/(1 + rε)` one has `s - r = ε (1 - r²)/(1 + rε)`, which is
/// kept as a logarithm: `ε` itself underflows from `n = 10` on.
pub fn carleson_counterexample(n_max: u32) -> Result<Vec<CarlesonRow>> {
    if n_max > CARLESON_MAX_N {
        return Err(LabError::param(format!("n_max must not exceed {CARLESON_MAX_N}, got {n_max}")));
    }
    Ok((1..=n_max)
        .map(|n| {
            let two_n = (n as f64).exp2();
            let depth = 1.0 / two_n;
            let r = 1.0 - depth;
            let log_eps = -(n as f64) * two_n;
            let log_one_minus_r2 = depth.ln() + (2.0 - depth).ln();
            let s_log_gap = log_eps + log_one_minus_r2 - (r * log_eps.exp()).ln_1p();
            // ρ = (s - r)/(1 - rs) with 1 - rs = (1 - r²) - r(s - r)
            let rel_gap = (s_log_gap - log_one_minus_r2).exp();
            let log_rho = s_log_gap - log_one_minus_r2 - (-r * rel_gap).ln_1p();
            CarlesonRow {
                n,
                r,
                s_log_gap,
                log_rho,
                log_b_lower: n as f64 * two_n,
                harnack_ceiling: 2.0 * two_n,
                naftalevic_product: depth * (n as f64 * two_n),
            }
        })
        .collect())
}

/// CSV with columns `n,r,s_log_gap,logB_lower,harnack_ceiling,naftalevic_product`.
pub fn carleson_csv(rows: &[CarlesonRow]) -> String {
    let mut out = String::from("n,r,s_log_gap,logB_lower,harnack_ceiling,naftalevic_product\n");
    for row in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            row.n, row.r, row.s_log_gap, row.log_b_lower, row.harnack_ceiling, row.naftalevic_product
        );
    }
    out
}
