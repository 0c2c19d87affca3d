//! The counting function `φ_Λ(λ_n) = log 1/|B_n(λ_n)|` on a finite sample and
//! the sums built from it.
//!
//! `B_n` is the Blaschke product of the sample with `λ_n` removed, so
//! `log 1/|B_n(λ_n)| = Σ_{m≠n} log 1/ρ(λ_n, λ_m)`. Each row is summed in
//! ascending order of its terms: the result depends only on the multiset of
//! terms, which makes every quantity here exactly invariant under reordering
//! of the sample and monotone under adding points.
//!
//! Weights `(1 - |λ|) v^p` are formed as `exp(ln(1 - |λ|) + p ln v)`, so
//! points whose depth underflows still contribute correctly (usually zero).

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{log_inv_rho, DiskPoint};
use crate::sequences::SequenceSample;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiEntry {
    /// Zero-based position in the sample.
    pub index: usize,
    pub point: DiskPoint,
    /// `log 1/|B_n(λ_n)|`, `+∞` if another point coincides with this one.
    pub value: f64,
    /// Largest single term `max_{m≠n} log 1/ρ(λ_n, λ_m)`, zero for a lone point.
    pub nearest: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhiLambdaTable {
    pub entries: Vec<PhiEntry>,
    pub has_duplicates: bool,
}

impl PhiLambdaTable {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn values(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.value).collect()
    }

    /// CSV with columns `n,r,theta,log_inv_B`, `n` counted from 1.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,r,theta,log_inv_B\n");
        for e in &self.entries {
            let _ = writeln!(out, "{},{},{},{}", e.index + 1, e.point.modulus(), e.point.angle(), e.value);
        }
        out
    }
}

/// Ascending sequential sum.
pub(crate) fn sorted_sum(terms: &mut [f64]) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

fn row_terms(points: &[DiskPoint], n: usize, range: std::ops::Range<usize>) -> Vec<f64> {
    let a = &points[n];
    range.filter(|&m| m != n).map(|m| log_inv_rho(a, &points[m])).collect()
}

/// `φ_Λ` at every point of the sample.
pub fn phi_lambda(sample: &SequenceSample) -> PhiLambdaTable {
    phi_lambda_points(&sample.points)
}

/// `φ_Λ` for an arbitrary finite point list.
pub fn phi_lambda_points(points: &[DiskPoint]) -> PhiLambdaTable {
    let entries: Vec<PhiEntry> = (0..points.len())
        .into_par_iter()
        .map(|n| {
            let mut terms = row_terms(points, n, 0..points.len());
            let nearest = terms.iter().copied().fold(0.0, f64::max);
            let value = sorted_sum(&mut terms);
            PhiEntry { index: n, point: points[n], value, nearest }
        })
        .collect();
    let has_duplicates = entries.iter().any(|e| e.value.is_infinite());
    PhiLambdaTable { entries, has_duplicates }
}

/// `(1 - |λ|) v^p` without forming the depth as a float.
pub(crate) fn weighted_power(point: &DiskPoint, v: f64, p: f64) -> f64 {
    if v == 0.0 {
        return 0.0;
    }
    if v.is_infinite() {
        return f64::INFINITY;
    }
    (point.log_depth() + p * v.ln()).exp()
}

fn check_p(p: f64) -> Result<()> {
    if !(p >= 1.0) || !p.is_finite() {
        return Err(LabError::param(format!("criterion exponent must satisfy p ≥ 1, got {p}")));
    }
    Ok(())
}

/// `X_p = Σ_n (1 - |λ_n|) log^p 1/|B_n(λ_n)|`, `+∞` when the table has
/// duplicates.
pub fn criterion_sum(table: &PhiLambdaTable, p: f64) -> Result<f64> {
    check_p(p)?;
    let mut terms: Vec<f64> = table.entries.iter().map(|e| weighted_power(&e.point, e.value, p)).collect();
    Ok(sorted_sum(&mut terms))
}

/// `sup_n (1 - |λ_n|) log 1/|B_n(λ_n)|` over the truncation.
pub fn naftalevic_sup(table: &PhiLambdaTable) -> f64 {
    table.entries.iter().map(|e| weighted_power(&e.point, e.value, 1.0)).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeparationReport {
    /// `inf_{μ≠λ} ρ(λ, μ)`
    pub weak: f64,
    /// `inf_λ Π_{μ≠λ} ρ(λ, μ) = inf_λ |B_λ(λ)|`
    pub strong: f64,
    /// Fewer than two points; both constants are then 1 by convention.
    pub degenerate: bool,
}

pub fn separation(table: &PhiLambdaTable) -> SeparationReport {
    if table.len() < 2 {
        return SeparationReport { weak: 1.0, strong: 1.0, degenerate: true };
    }
    let max_term = table.entries.iter().map(|e| e.nearest).fold(0.0, f64::max);
    let max_value = table.entries.iter().map(|e| e.value).fold(0.0, f64::max);
    SeparationReport { weak: (-max_term).exp(), strong: (-max_value).exp(), degenerate: false }
}

/// `X_p` on nested prefixes of one sample, with the increments
/// `X_p(N) - X_p(⌊N/2⌋)` computed without cancellation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrefixCriterion {
    pub n: usize,
    pub x_p: f64,
    pub increment: f64,
}

/// Row sums of one sample split into blocks at a set of checkpoints and their
/// halves, reusable for any exponent.
#[derive(Clone, Debug)]
pub struct PrefixBlocks<'a> {
    points: &'a [DiskPoint],
    blocks: Vec<std::ops::Range<usize>>,
    /// `sums[n][b]`: contribution of block `b` to row `n`
    sums: Vec<Vec<f64>>,
}

impl<'a> PrefixBlocks<'a> {
    pub fn new(points: &'a [DiskPoint], checkpoints: &[usize]) -> Self {
        let mut bounds: Vec<usize> = checkpoints
            .iter()
            .flat_map(|&n| [n.min(points.len()), (n / 2).min(points.len())])
            .chain([0])
            .collect();
        bounds.sort_unstable();
        bounds.dedup();
        let top = *bounds.last().unwrap_or(&0);
        let blocks: Vec<std::ops::Range<usize>> = bounds.windows(2).map(|w| w[0]..w[1]).collect();
        let sums = (0..top)
            .into_par_iter()
            .map(|n| blocks.iter().map(|b| sorted_sum(&mut row_terms(points, n, b.clone()))).collect())
            .collect();
        Self { points, blocks, sums }
    }

    /// Sum of the blocks of row `n` lying inside `lo..hi`.
    fn partial(&self, n: usize, lo: usize, hi: usize) -> f64 {
        let mut parts: Vec<f64> = self
            .blocks
            .iter()
            .zip(&self.sums[n])
            .filter(|(b, _)| b.start >= lo && b.end <= hi)
            .map(|(_, &s)| s)
            .collect();
        sorted_sum(&mut parts)
    }

    /// `X_p(N)` and `X_p(N) - X_p(⌊N/2⌋)` for a checkpoint `N` given to [`Self::new`].
    pub fn evaluate(&self, n_full: usize, p: f64) -> Result<PrefixCriterion> {
        check_p(p)?;
        let n_full = n_full.min(self.points.len());
        let half = n_full / 2;
        if n_full > 0 && (n_full > self.sums.len() || !self.blocks.iter().any(|b| b.end == n_full)) {
            return Err(LabError::param(format!("{n_full} is not a checkpoint of these blocks")));
        }
        let mut x_terms = Vec::with_capacity(n_full);
        let mut inc_terms = Vec::with_capacity(n_full);
        for n in 0..n_full {
            let point = &self.points[n];
            let v_full = self.partial(n, 0, n_full);
            x_terms.push(weighted_power(point, v_full, p));
            if n >= half {
                inc_terms.push(weighted_power(point, v_full, p));
            } else {
                let v_old = self.partial(n, 0, half);
                let delta = self.partial(n, half, n_full);
                inc_terms.push(power_increment(point, v_old, delta, p));
            }
        }
        Ok(PrefixCriterion { n: n_full, x_p: sorted_sum(&mut x_terms), increment: sorted_sum(&mut inc_terms) })
    }
}

/// Evaluates `X_p` at every checkpoint `N` together with its increment over
/// the half-length prefix.
///
/// Rows are summed block by block, the blocks being the gaps between the
/// checkpoints and their halves. For an old point the change of its term is
/// `g v^p ((1 + δ/v)^p - 1)` with `δ` the contribution of the new block, which
/// is evaluated through `expm1`/`log1p`; new points contribute in full. The
/// increment therefore keeps full relative accuracy even when it is many
/// orders of magnitude below `X_p`.
pub fn prefix_criteria(points: &[DiskPoint], p: f64, checkpoints: &[usize]) -> Result<Vec<PrefixCriterion>> {
    check_p(p)?;
    let blocks = PrefixBlocks::new(points, checkpoints);
    checkpoints.iter().map(|&n| blocks.evaluate(n, p)).collect()
}

/// `g ((v + δ)^p - v^p)` for `δ ≥ 0`.
fn power_increment(point: &DiskPoint, v: f64, delta: f64, p: f64) -> f64 {
    if delta == 0.0 {
        return 0.0;
    }
    if v == 0.0 || v.is_infinite() || delta.is_infinite() {
        return weighted_power(point, v + delta, p) - weighted_power(point, v, p);
    }
    let growth = (p * (delta / v).ln_1p()).exp_m1();
    (point.log_depth() + p * v.ln() + growth.ln()).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequences::{sample_sequence, RadiusProfile};
    use approx::assert_relative_eq;
    use std::f64::consts::LN_2;

    fn real(x: f64) -> DiskPoint {
        DiskPoint::new(x, 0.0).unwrap()
    }

    #[test]
    fn small_tables() {
        let t = phi_lambda_points(&[real(0.3)]);
        assert_eq!(t.entries[0].value, 0.0);
        assert_eq!(criterion_sum(&t, 2.0).unwrap(), 0.0);
        assert_eq!(naftalevic_sup(&t), 0.0);

        let t = phi_lambda_points(&[DiskPoint::ORIGIN, real(0.5)]);
        assert_relative_eq!(t.entries[0].value, LN_2, epsilon = 1e-15);
        assert_relative_eq!(t.entries[1].value, LN_2, epsilon = 1e-15);
        assert_relative_eq!(criterion_sum(&t, 1.0).unwrap(), 1.5 * LN_2, epsilon = 1e-15);
        assert_relative_eq!(naftalevic_sup(&t), LN_2, epsilon = 1e-15);

        let t = phi_lambda_points(&[DiskPoint::ORIGIN, real(0.5), real(0.8)]);
        assert_relative_eq!(t.entries[0].value, (2.0f64).ln() + (1.25f64).ln(), epsilon = 1e-15);
    }

    #[test]
    fn duplicates_give_sentinel() {
        let t = phi_lambda_points(&[real(0.4), real(0.1), real(0.4)]);
        assert!(t.has_duplicates);
        assert!(t.entries[0].value.is_infinite());
        assert!(t.entries[1].value.is_finite());
        assert!(criterion_sum(&t, 1.0).unwrap().is_infinite());
        assert_eq!(separation(&t).weak, 0.0);
    }

    #[test]
    fn p_below_one_is_rejected() {
        let t = phi_lambda_points(&[real(0.4)]);
        assert!(criterion_sum(&t, 0.5).is_err());
        assert!(criterion_sum(&t, f64::NAN).is_err());
    }

    #[test]
    fn separation_examples() {
        let t = phi_lambda_points(&[real(0.2), DiskPoint::new(-0.3, 0.4).unwrap()]);
        let s = separation(&t);
        let rho = crate::geometry::pseudo_distance(&t.entries[0].point, &t.entries[1].point);
        assert_relative_eq!(s.weak, rho, epsilon = 1e-14);
        assert_relative_eq!(s.strong, rho, epsilon = 1e-14);
        assert!(separation(&phi_lambda_points(&[real(0.2)])).degenerate);

        // radial geometric points: adjacent ρ decreases to 1/3
        let pts: Vec<DiskPoint> = (1..=30).map(|n| DiskPoint::from_depth(0.5f64.powi(n), 0.0).unwrap()).collect();
        let s = separation(&phi_lambda_points(&pts));
        let (r, q) = (1.0 - 0.5f64.powi(29), 1.0 - 0.5f64.powi(30));
        let adjacent = (q - r) / (1.0 - r * q);
        assert_relative_eq!(s.weak, adjacent, max_relative = 1e-9);
        assert!(s.weak > 1.0 / 3.0 && s.weak < 1.0 / 3.0 + 1e-8);
        assert!(s.strong <= s.weak);
    }

    #[test]
    fn csv_layout() {
        let t = phi_lambda_points(&[DiskPoint::ORIGIN, real(0.5)]);
        let csv = t.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("n,r,theta,log_inv_B"));
        assert!(lines.next().unwrap().starts_with("1,0,0,0.69314"));
        assert_eq!(lines.count(), 1);
    }

    #[test]
    fn prefix_criteria_match_direct_sums() {
        let profile = RadiusProfile::power(1.0, 2.0, 400).unwrap();
        let sample = sample_sequence(&profile, 3);
        let rows = prefix_criteria(&sample.points, 2.0, &[100, 400]).unwrap();
        for row in rows {
            let full = criterion_sum(&phi_lambda_points(&sample.points[..row.n]), 2.0).unwrap();
            let half = criterion_sum(&phi_lambda_points(&sample.points[..row.n / 2]), 2.0).unwrap();
            assert_relative_eq!(row.x_p, full, max_relative = 1e-13);
            assert_relative_eq!(row.increment, full - half, max_relative = 1e-9);
        }
    }

    #[test]
    fn increments_survive_deep_truncations() {
        // at N = 2000 the increment is about 2^{-1000}, far below X_p
        let sample = sample_sequence(&RadiusProfile::geometric(0.5, 2000).unwrap(), 1);
        let rows = prefix_criteria(&sample.points, 1.0, &[250, 2000]).unwrap();
        assert!(rows[0].increment > 0.0);
        assert!(rows[1].increment > 0.0 && rows[1].increment < 1e-290);
        assert!(rows[1].increment < rows[0].increment);
    }
}
