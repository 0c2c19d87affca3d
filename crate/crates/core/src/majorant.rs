//! Poisson kernel analytics and explicit harmonic majorants.
//!
//! The majorant of `φ_Λ` is the Poisson integral of the step function
//!
//! ```text
//! ψ = Σ_λ K_λ log(1/|B_λ(λ)|) χ_{I_λ},     K_λ = 1/ω(λ, I_λ),
//! ```
//!
//! where `I_λ` is the shadow arc centered at `λ/|λ|` of half-length `1 - |λ|`.
//! The factor `K_λ` makes the term belonging to `λ` contribute exactly
//! `log 1/|B_λ(λ)|` at `λ`; every other term is nonnegative, so `P[ψ] ≥ φ_Λ`
//! on the sample. The origin gets the arc of half-length 1 centered at angle
//! 0 like any other point, hence `K_0 = π`, and `2 < K_λ ≤ π` throughout.
//!
//! `P[ψ]` is evaluated term by term with the closed-form harmonic measure, and
//! the `L^p` norms of ψ by an exact sweep over arc endpoints.

use std::f64::consts::{PI, TAU};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::blaschke::{sorted_sum, PhiLambdaTable};
use crate::error::{LabError, Result};
use crate::geometry::{harmonic_measure, BoundaryArc, DiskPoint};
use crate::quad::{geometric_ladder, integrate, normalize_breakpoints, QuadOptions, QuadResult};
use crate::rng;

/// `|e^{iθ} - z|²`, from the depth.
fn boundary_gap_sq(z: &DiskPoint, angle: f64) -> f64 {
    let g = z.depth();
    let h = (0.5 * (angle - z.angle())).sin();
    g * g + 4.0 * z.modulus() * h * h
}

/// `P_z(e^{iθ}) = (1 - |z|²)/|e^{iθ} - z|²`.
pub fn poisson_kernel(z: &DiskPoint, angle: f64) -> f64 {
    z.one_minus_modulus_sq() / boundary_gap_sq(z, angle)
}

/// `‖P_z‖_q^q = ∫_T P_z^q dm`.
///
/// `q = 1` returns exactly 1. Otherwise the integral over the offset from
/// `arg z` is taken on `[0, π]` (the kernel is even) with panels refined
/// geometrically down to `(1 - |z|)/64` next to the peak.
pub fn poisson_lq_norm(z: &DiskPoint, q: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(LabError::param(format!("Lebesgue exponent must satisfy q ≥ 1, got {q}")));
    }
    if q == 1.0 {
        return Ok(QuadResult { value: 1.0, error: 0.0, evals: 0, converged: true });
    }
    if z.is_origin() {
        return Ok(QuadResult { value: 1.0, error: 0.0, evals: 0, converged: true });
    }
    let (g, r) = (z.depth(), z.modulus());
    let num = g * (2.0 - g);
    let f = |u: f64| {
        let h = (0.5 * u).sin();
        (num / (g * g + 4.0 * r * h * h)).powf(q)
    };
    let pts = geometric_ladder(0.0, PI, 0.0, g / 64.0);
    let res = integrate(f, &pts, opts);
    Ok(QuadResult { value: res.value / PI, error: res.error / PI, ..res })
}

/// A finitely supported positive measure `μ = Σ α_λ δ_λ` on the disk.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    atoms: Vec<(DiskPoint, f64)>,
}

impl DiscreteMeasure {
    pub fn new(atoms: Vec<(DiskPoint, f64)>) -> Result<Self> {
        if let Some((_, w)) = atoms.iter().find(|(_, w)| !(*w > 0.0 && w.is_finite())) {
            return Err(LabError::param(format!("atom weights must be positive, got {w}")));
        }
        Ok(Self { atoms })
    }

    pub fn atoms(&self) -> &[(DiskPoint, f64)] {
        &self.atoms
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        sorted_sum(&mut self.atoms.iter().map(|a| a.1).collect::<Vec<_>>())
    }

    /// The same atoms with every weight multiplied by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self { atoms: self.atoms.iter().map(|&(z, w)| (z, w * factor)).collect() }
    }

    /// `n` atoms with `ln(1 - |λ|)` uniform on `[ln min_depth, 0]`, uniform
    /// arguments and weights uniform on `(0, 1]`, drawn from stream
    /// `(seed, TAG_MEASURES, index)`.
    pub fn random(seed: u64, index: u32, n: usize, min_depth: f64) -> Self {
        let u = rng::unit_block(seed, rng::TAG_MEASURES, index, 0, 3 * n);
        let atoms = u
            .chunks_exact(3)
            .map(|c| {
                let log_depth = c[0] * min_depth.ln();
                let z = DiskPoint::from_log_depth(log_depth, TAU * c[1]).expect("log-depth ≤ 0");
                (z, 1.0 - c[2])
            })
            .collect();
        Self { atoms }
    }
}

/// Balayage `Bμ(e^{iθ}) = Σ α_λ P_λ(e^{iθ})`.
pub fn balayage(mu: &DiscreteMeasure, angle: f64) -> f64 {
    sorted_sum(&mut mu.atoms.iter().map(|(z, w)| w * poisson_kernel(z, angle)).collect::<Vec<_>>())
}

/// `‖Bμ‖_{L^q}` (the norm itself, not its `q`-th power).
pub fn balayage_lq_norm(mu: &DiscreteMeasure, q: f64, opts: &QuadOptions) -> Result<QuadResult> {
    if !(q >= 1.0) || !q.is_finite() {
        return Err(LabError::param(format!("Lebesgue exponent must satisfy q ≥ 1, got {q}")));
    }
    if mu.is_empty() {
        return Ok(QuadResult { value: 0.0, error: 0.0, evals: 0, converged: true });
    }
    if q == 1.0 {
        // ∫ P_λ dm = 1 for every atom
        return Ok(QuadResult { value: mu.total_mass(), error: 0.0, evals: 0, converged: true });
    }
    let mut pts = vec![0.0, TAU];
    for (z, _) in &mu.atoms {
        for shift in [-TAU, 0.0, TAU] {
            let c = z.angle() + shift;
            let lo = (c - PI).max(0.0);
            let hi = (c + PI).min(TAU);
            if lo < hi {
                pts.extend(geometric_ladder(lo, hi, c.clamp(lo, hi), z.depth().max(1e-300) / 64.0));
            }
        }
    }
    let pts = normalize_breakpoints(pts);
    let res = integrate(|t| balayage(mu, t).powf(q), &pts, opts);
    let mean = res.value / TAU;
    let norm = mean.powf(1.0 / q);
    // first-order propagation of the quadrature error through the q-th root
    let error = if mean > 0.0 { norm * res.error / TAU / (q * mean) } else { res.error };
    Ok(QuadResult { value: norm, error, ..res })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaLambdaReport {
    pub q: f64,
    /// `‖Bμ‖_{L^q}`
    pub norm: f64,
    pub norm_error: f64,
    /// `S = Σ α^q (1 - |λ|)^{1-q}`, present when `‖Bμ‖_q ≤ 1`.
    pub s: Option<f64>,
}

/// Evaluates `‖Bμ‖_q` and, when it is at most 1, the sum `S`.
pub fn alpha_lambda_check(mu: &DiscreteMeasure, q: f64, opts: &QuadOptions) -> Result<AlphaLambdaReport> {
    if !(q > 1.0) {
        return Err(LabError::param(format!("the duality check needs q > 1, got {q}")));
    }
    let norm = balayage_lq_norm(mu, q, opts)?;
    if !norm.converged {
        return Err(LabError::QuadratureNotConverged { value: norm.value, error: norm.error, evals: norm.evals });
    }
    let s = (norm.value <= 1.0).then(|| alpha_sum(mu, q));
    Ok(AlphaLambdaReport { q, norm: norm.value, norm_error: norm.error, s })
}

fn alpha_sum(mu: &DiscreteMeasure, q: f64) -> f64 {
    let mut terms: Vec<f64> = mu.atoms.iter().map(|(z, w)| (q * w.ln() + (1.0 - q) * z.log_depth()).exp()).collect();
    sorted_sum(&mut terms)
}

/// Rescales `mu` so that `‖Bμ‖_q = 1` and runs [`alpha_lambda_check`].
pub fn alpha_lambda_normalized(mu: &DiscreteMeasure, q: f64, opts: &QuadOptions) -> Result<AlphaLambdaReport> {
    if mu.is_empty() {
        return alpha_lambda_check(mu, q, opts);
    }
    let norm = balayage_lq_norm(mu, q, opts)?;
    if !norm.converged {
        return Err(LabError::QuadratureNotConverged { value: norm.value, error: norm.error, evals: norm.evals });
    }
    let scaled = mu.scaled(1.0 / norm.value);
    let s = alpha_sum(&scaled, q);
    Ok(AlphaLambdaReport { q, norm: 1.0, norm_error: norm.error / norm.value, s: Some(s) })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArcTerm {
    pub arc: BoundaryArc,
    pub weight: f64,
}

/// A nonnegative finite combination of arc indicators.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub terms: Vec<ArcTerm>,
}

impl StepFunction {
    pub fn new(terms: Vec<ArcTerm>) -> Result<Self> {
        if let Some(t) = terms.iter().find(|t| !(t.weight >= 0.0 && t.weight.is_finite())) {
            return Err(LabError::param(format!("step weights must be nonnegative, got {}", t.weight)));
        }
        Ok(Self { terms })
    }

    pub fn value_at(&self, angle: f64) -> f64 {
        let mut v: Vec<f64> = self.terms.iter().filter(|t| t.arc.contains_angle(angle)).map(|t| t.weight).collect();
        sorted_sum(&mut v)
    }

    /// `‖ψ‖_1 = Σ w m(I)`, exact since the terms are nonnegative.
    pub fn l1_norm(&self) -> f64 {
        sorted_sum(&mut self.terms.iter().map(|t| t.weight * t.arc.measure()).collect::<Vec<_>>())
    }

    /// `‖ψ‖_p` by sweeping the arc endpoints: on each elementary interval the
    /// active weights are summed afresh, so no running sum drifts.
    pub fn lp_norm(&self, p: f64) -> f64 {
        if p == 1.0 {
            return self.l1_norm();
        }
        let mut events: Vec<(f64, usize)> = Vec::new();
        let mut active_from_start = Vec::new();
        for (i, t) in self.terms.iter().enumerate() {
            if t.arc.is_full() {
                active_from_start.push(i);
                continue;
            }
            let a = t.arc.start().rem_euclid(TAU);
            let b = (a + 2.0 * t.arc.half_length()).rem_euclid(TAU);
            if a >= TAU || b >= TAU || a == b {
                // measure below the resolution of absolute angles
                continue;
            }
            events.push((a, i));
            events.push((b, i));
            if b < a {
                active_from_start.push(i);
            }
        }
        events.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)));
        let mut active = vec![false; self.terms.len()];
        for &i in &active_from_start {
            active[i] = true;
        }
        let mut pieces = Vec::with_capacity(events.len() + 1);
        let mut prev = 0.0;
        let mut k = 0;
        loop {
            let next = if k < events.len() { events[k].0 } else { TAU };
            if next > prev {
                let mut w: Vec<f64> =
                    self.terms.iter().zip(&active).filter(|(_, &on)| on).map(|(t, _)| t.weight).collect();
                let v = sorted_sum(&mut w);
                if v > 0.0 {
                    pieces.push((next - prev) / TAU * v.powf(p));
                }
                prev = next;
            }
            if k >= events.len() {
                break;
            }
            let x = events[k].0;
            while k < events.len() && events[k].0 == x {
                let i = events[k].1;
                active[i] = !active[i];
                k += 1;
            }
        }
        sorted_sum(&mut pieces).powf(1.0 / p)
    }
}

/// The majorant density ψ together with its normalizing factors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psi {
    pub step: StepFunction,
    /// `K_λ` for every table entry (also for entries with value 0, which emit
    /// no term).
    pub k_factors: Vec<f64>,
    /// For each table entry, the index of its term in `step`, if any.
    pub term_of_entry: Vec<Option<usize>>,
}

impl Psi {
    pub fn sup_k(&self) -> f64 {
        self.k_factors.iter().copied().fold(0.0, f64::max)
    }
}

/// The shadow arc `I_λ` of a point.
pub fn shadow_arc(z: &DiskPoint) -> BoundaryArc {
    let half = z.depth().clamp(f64::MIN_POSITIVE, 1.0);
    BoundaryArc::new(z.angle(), half).expect("half-length in (0, 1]")
}

/// Builds ψ from a table with finite values.
pub fn build_psi(table: &PhiLambdaTable) -> Result<Psi> {
    if table.has_duplicates {
        return Err(LabError::DuplicatePoints);
    }
    let mut terms = Vec::new();
    let mut k_factors = Vec::with_capacity(table.len());
    let mut term_of_entry = Vec::with_capacity(table.len());
    for e in &table.entries {
        let arc = shadow_arc(&e.point);
        let k = 1.0 / harmonic_measure(&e.point, &arc);
        k_factors.push(k);
        if e.value > 0.0 {
            term_of_entry.push(Some(terms.len()));
            terms.push(ArcTerm { arc, weight: k * e.value });
        } else {
            term_of_entry.push(None);
        }
    }
    Ok(Psi { step: StepFunction { terms }, k_factors, term_of_entry })
}

/// `P[ψ](z) = Σ w ω(z, I)`.
pub fn poisson_extension_step(psi: &StepFunction, z: &DiskPoint) -> f64 {
    let mut v: Vec<f64> = psi.terms.iter().map(|t| t.weight * harmonic_measure(z, &t.arc)).collect();
    sorted_sum(&mut v)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorantCertificate {
    /// `P[ψ](λ_n) - φ_Λ(λ_n)`
    pub margins: Vec<f64>,
    pub psi_l1: f64,
    pub psi_lp: f64,
    pub p: f64,
    #[serde(rename = "sup_K")]
    pub sup_k: f64,
    pub valid: bool,
}

impl MajorantCertificate {
    pub fn min_margin(&self) -> f64 {
        self.margins.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Default tolerance for negative margins.
pub const CERTIFICATE_TOL: f64 = 1e-9;

/// Checks `P[ψ] ≥ φ_Λ` at every point of the table and reports the norms of ψ.
pub fn certify_majorant(table: &PhiLambdaTable, psi: &Psi, p: f64, tol: f64) -> MajorantCertificate {
    let margins: Vec<f64> = table
        .entries
        .par_iter()
        .map(|e| poisson_extension_step(&psi.step, &e.point) - e.value)
        .collect();
    let valid = !table.has_duplicates && margins.iter().all(|&m| m >= -tol);
    MajorantCertificate {
        psi_l1: psi.step.l1_norm(),
        psi_lp: psi.step.lp_norm(p),
        p,
        sup_k: psi.sup_k(),
        valid,
        margins,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct HarnackPoint {
    pub r: f64,
    /// `h(r e^{iθ})/h(0)` for `h = P[ψ]`.
    pub ratio: f64,
    /// `(1 + r)/(1 - r)`
    pub ceiling: f64,
}

/// Harnack's inequality for `P[ψ]` along the ray at `angle`, at the depths given.
pub fn harnack_profile(psi: &StepFunction, angle: f64, depths: &[f64]) -> Result<Vec<HarnackPoint>> {
    let h0 = poisson_extension_step(psi, &DiskPoint::ORIGIN);
    if !(h0 > 0.0) {
        return Err(LabError::param("Harnack profile needs a nonzero majorant"));
    }
    depths
        .iter()
        .map(|&g| {
            let z = DiskPoint::from_depth(g, angle)?;
            let ratio = poisson_extension_step(psi, &z) / h0;
            Ok(HarnackPoint { r: z.modulus(), ratio, ceiling: (2.0 - g) / g })
        })
        .collect()
}

/// Products `(1 - |z|)^{q-1} ‖P_z‖_q^q` over a set of depths, with the band
/// `max/min` they span.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PoissonNormBand {
    pub q: f64,
    pub depths: Vec<f64>,
    pub products: Vec<f64>,
    pub errors: Vec<f64>,
    pub spread: f64,
}

pub fn poisson_norm_band(q: f64, depths: &[f64], opts: &QuadOptions) -> Result<PoissonNormBand> {
    let mut products = Vec::with_capacity(depths.len());
    let mut errors = Vec::with_capacity(depths.len());
    for &g in depths {
        let z = DiskPoint::from_depth(g, 0.0)?;
        let n = poisson_lq_norm(&z, q, opts)?;
        if !n.converged {
            return Err(LabError::QuadratureNotConverged { value: n.value, error: n.error, evals: n.evals });
        }
        let scale = g.powf(q - 1.0);
        products.push(scale * n.value);
        errors.push(scale * n.error);
    }
    let max = products.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = products.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(PoissonNormBand { q, depths: depths.to_vec(), products, errors, spread: max / min })
}
