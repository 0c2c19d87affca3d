//! Radius profiles and the Steinhaus model `Λ(ω) = (r_n e^{iθ_n(ω)})`.
//!
//! A profile is an infinite radius sequence truncated to `count` points. The
//! numerics only see the truncation; whether the full sequence satisfies the
//! Blaschke condition is decided symbolically from the profile kind and
//! reported as `tail_convergent`.
//!
//! Profiles have a textual form used by the command line:
//!
//! ```text
//! geometric:q=0.5,N=200        r_n = 1 - q^n
//! power:c=1,beta=2,N=500       r_n = 1 - c n^{-β}, clamped to [0, 1)
//! dyadic:counts=n,N=140        N_n points at 1 - (3/4) 2^{-n}
//! explicit:file=radii.csv      one radius per line
//! ```
//!
//! Dyadic count laws are `n`, `n^K`, `B^n`, or an explicit `;`-separated list.

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, TAU};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::geometry::{annulus_index, pow2_neg, DiskPoint};
use crate::rng;

/// Levels beyond this are not generated for dyadic profiles.
const MAX_DYADIC_LEVEL: u32 = 100_000;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum CountRule {
    /// `N_n = n`
    Linear,
    /// `N_n = ⌊n^K⌋`
    Power(f64),
    /// `N_n = ⌊B^n⌋`
    Exponential(f64),
    /// `N_n = list[n]`, zero past the end.
    Explicit(Vec<u64>),
}

impl CountRule {
    pub fn count_at(&self, level: u32) -> u64 {
        let n = f64::from(level);
        match self {
            CountRule::Linear => u64::from(level),
            CountRule::Power(k) => {
                if level == 0 {
                    0
                } else {
                    n.powf(*k).floor() as u64
                }
            }
            CountRule::Exponential(b) => b.powf(n).floor().min(u64::MAX as f64) as u64,
            CountRule::Explicit(list) => list.get(level as usize).copied().unwrap_or(0),
        }
    }

    /// Ratio test for `Σ N_n 2^{-n}`.
    fn sum_converges(&self) -> bool {
        match self {
            CountRule::Linear | CountRule::Power(_) | CountRule::Explicit(_) => true,
            // lim N_{n+1}/(2 N_n) = B/2; at B = 2 every term is 1
            CountRule::Exponential(b) => *b < 2.0,
        }
    }

    fn parse(text: &str) -> Result<Self> {
        let t = text.trim();
        if t == "n" {
            return Ok(CountRule::Linear);
        }
        if let Some(k) = t.strip_prefix("n^") {
            let k: f64 = parse_num(k, "count exponent")?;
            if !(k > 0.0) {
                return Err(LabError::profile("count exponent must be positive"));
            }
            return Ok(CountRule::Power(k));
        }
        if let Some(b) = t.strip_suffix("^n") {
            let b: f64 = parse_num(b, "count base")?;
            if !(b > 0.0) || !b.is_finite() {
                return Err(LabError::profile("count base must be positive"));
            }
            return Ok(CountRule::Exponential(b));
        }
        if t.contains(';') {
            let list = t
                .split(';')
                .map(|c| c.trim().parse::<u64>().map_err(|_| LabError::profile(format!("bad count {c:?}"))))
                .collect::<Result<Vec<_>>>()?;
            return Ok(CountRule::Explicit(list));
        }
        Err(LabError::profile(format!("unknown count law {t:?}; use n, n^K, B^n or a;b;c")))
    }
}

impl fmt::Display for CountRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CountRule::Linear => write!(f, "n"),
            CountRule::Power(k) => write!(f, "n^{k}"),
            CountRule::Exponential(b) => write!(f, "{b}^n"),
            CountRule::Explicit(list) => {
                let parts: Vec<String> = list.iter().map(u64::to_string).collect();
                write!(f, "{}", parts.join(";"))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum ProfileKind {
    Geometric { q: f64 },
    Power { c: f64, beta: f64 },
    DyadicCounts(CountRule),
    Explicit { radii: Vec<f64> },
}

/// A radius sequence truncated to `count` points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadiusProfile {
    kind: ProfileKind,
    count: usize,
}

/// Depth `1 - r` of one radius, with its exact logarithm.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialDepth {
    pub value: f64,
    pub log: f64,
}

impl RadialDepth {
    fn from_value(value: f64) -> Self {
        Self { value, log: value.ln() }
    }
}

impl RadiusProfile {
    pub fn geometric(q: f64, count: usize) -> Result<Self> {
        if !(q > 0.0 && q < 1.0) {
            return Err(LabError::profile(format!("geometric ratio q={q} must lie in (0, 1)")));
        }
        Ok(Self { kind: ProfileKind::Geometric { q }, count })
    }

    pub fn power(c: f64, beta: f64, count: usize) -> Result<Self> {
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(LabError::profile(format!("power exponent beta={beta} must be positive")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(LabError::profile(format!("power scale c={c} must be positive")));
        }
        Ok(Self { kind: ProfileKind::Power { c, beta }, count })
    }

    pub fn dyadic(rule: CountRule, count: usize) -> Result<Self> {
        let available: u64 = (0..=MAX_DYADIC_LEVEL).map(|n| rule.count_at(n)).fold(0u64, u64::saturating_add);
        if (count as u64) > available {
            return Err(LabError::profile(format!(
                "count law {rule} supplies only {available} points, {count} requested"
            )));
        }
        Ok(Self { kind: ProfileKind::DyadicCounts(rule), count })
    }

    /// Explicit radii; they are sorted into non-decreasing order.
    pub fn explicit(mut radii: Vec<f64>) -> Result<Self> {
        if let Some(bad) = radii.iter().find(|r| !(0.0..1.0).contains(*r)) {
            return Err(LabError::profile(format!("radius {bad} outside [0, 1)")));
        }
        radii.sort_by(f64::total_cmp);
        let count = radii.len();
        Ok(Self { kind: ProfileKind::Explicit { radii }, count })
    }

    /// Reads one decimal radius per line; blank lines and `#` comments are skipped.
    pub fn explicit_from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let radii = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| parse_num(l, "radius"))
            .collect::<Result<Vec<f64>>>()?;
        Self::explicit(radii)
    }

    /// Parses the textual profile grammar. Relative `file=` paths resolve
    /// against `base_dir` when given.
    pub fn parse(spec: &str, base_dir: Option<&Path>) -> Result<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| LabError::profile(format!("{spec:?}: expected kind:key=value,...")))?;
        let mut params = BTreeMap::new();
        for item in rest.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            let (k, v) = item
                .split_once('=')
                .ok_or_else(|| LabError::profile(format!("{item:?}: expected key=value")))?;
            if params.insert(k.trim().to_string(), v.trim().to_string()).is_some() {
                return Err(LabError::profile(format!("duplicate key {k:?}")));
            }
        }
        let allowed: &[&str] = match kind.trim() {
            "geometric" => &["q", "N"],
            "power" => &["c", "beta", "N"],
            "dyadic" => &["counts", "N"],
            "explicit" => &["file"],
            other => return Err(LabError::profile(format!("unknown profile kind {other:?}"))),
        };
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(LabError::profile(format!("unknown key {k:?} for {kind} profile")));
        }
        let get = |key: &str| params.get(key).ok_or_else(|| LabError::profile(format!("missing key {key:?}")));
        let count = || -> Result<usize> {
            let n: usize = get("N")?.parse().map_err(|_| LabError::profile("N must be a non-negative integer"))?;
            Ok(n)
        };
        // law parameters are checked before the count, so `power:beta=0` is
        // reported as a bad exponent
        match kind.trim() {
            "geometric" => Ok(Self::geometric(parse_num(get("q")?, "q")?, 0)?.with_count(count()?)),
            "power" => {
                let c = params.get("c").map(|c| parse_num(c, "c")).transpose()?.unwrap_or(1.0);
                Ok(Self::power(c, parse_num(get("beta")?, "beta")?, 0)?.with_count(count()?))
            }
            "dyadic" => Ok(Self::dyadic(CountRule::parse(get("counts")?)?, 0)?.with_count(count()?)),
            "explicit" => {
                let file = Path::new(get("file")?);
                let path = match base_dir {
                    Some(dir) if file.is_relative() => dir.join(file),
                    _ => file.to_path_buf(),
                };
                Self::explicit_from_file(&path)
            }
            _ => unreachable!(),
        }
    }

    pub fn kind(&self) -> &ProfileKind {
        &self.kind
    }

    pub fn count(&self) -> usize {
        self.count
    }

    /// The same law truncated to a different length (explicit profiles keep
    /// at most their own radii).
    pub fn with_count(&self, count: usize) -> Self {
        let count = match &self.kind {
            ProfileKind::Explicit { radii } => count.min(radii.len()),
            _ => count,
        };
        Self { kind: self.kind.clone(), count }
    }

    /// Whether the untruncated sequence satisfies `Σ (1 - r_n) < ∞`.
    pub fn tail_convergent(&self) -> bool {
        match &self.kind {
            ProfileKind::Geometric { .. } => true,
            ProfileKind::Power { beta, .. } => *beta > 1.0,
            ProfileKind::DyadicCounts(rule) => rule.sum_converges(),
            ProfileKind::Explicit { .. } => true,
        }
    }

    /// Depths `1 - r_n` for `n = 1..=count`, non-increasing.
    pub fn depths(&self) -> Vec<RadialDepth> {
        match &self.kind {
            ProfileKind::Geometric { q } => {
                let ln_q = q.ln();
                let mut value = 1.0;
                (1..=self.count)
                    .map(|n| {
                        value *= q;
                        RadialDepth { value, log: n as f64 * ln_q }
                    })
                    .collect()
            }
            ProfileKind::Power { c, beta } => (1..=self.count)
                .map(|n| {
                    let value = c * (n as f64).powf(-beta);
                    if value >= 1.0 {
                        RadialDepth { value: 1.0, log: 0.0 }
                    } else if value >= f64::MIN_POSITIVE {
                        RadialDepth::from_value(value)
                    } else {
                        RadialDepth { value, log: c.ln() - beta * (n as f64).ln() }
                    }
                })
                .collect(),
            ProfileKind::DyadicCounts(rule) => {
                let mut out = Vec::with_capacity(self.count);
                let mut level = 0u32;
                while out.len() < self.count && level <= MAX_DYADIC_LEVEL {
                    let n_here = rule.count_at(level).min((self.count - out.len()) as u64);
                    let depth = RadialDepth {
                        value: 0.75 * pow2_neg(level),
                        log: (0.75f64).ln() - f64::from(level) * LN_2,
                    };
                    out.extend(std::iter::repeat_n(depth, n_here as usize));
                    level += 1;
                }
                out
            }
            ProfileKind::Explicit { radii } => {
                radii.iter().take(self.count).map(|r| RadialDepth::from_value(1.0 - r)).collect()
            }
        }
    }
}

impl fmt::Display for RadiusProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ProfileKind::Geometric { q } => write!(f, "geometric:q={q},N={}", self.count),
            ProfileKind::Power { c, beta } => write!(f, "power:c={c},beta={beta},N={}", self.count),
            ProfileKind::DyadicCounts(rule) => write!(f, "dyadic:counts={rule},N={}", self.count),
            ProfileKind::Explicit { .. } => write!(f, "explicit:N={}", self.count),
        }
    }
}

fn parse_num(text: &str, what: &str) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| LabError::profile(format!("{what}: cannot parse {text:?}")))?;
    if !v.is_finite() {
        return Err(LabError::profile(format!("{what} must be finite")));
    }
    Ok(v)
}

/// Radii `r_n = 1 - depth_n`, non-decreasing.
pub fn make_radii(profile: &RadiusProfile) -> Vec<f64> {
    profile.depths().iter().map(|d| 1.0 - d.value).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlaschkeSum {
    /// `Σ (1 - r_n)` over the truncation.
    pub partial_sum: f64,
    pub tail_convergent: bool,
}

pub fn blaschke_sum(profile: &RadiusProfile) -> BlaschkeSum {
    let depths: Vec<f64> = profile.depths().iter().map(|d| d.value).collect();
    BlaschkeSum { partial_sum: sum_ascending(depths), tail_convergent: profile.tail_convergent() }
}

/// Sum of non-negative terms, smallest first.
pub(crate) fn sum_ascending(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// One realization of the random model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceSample {
    pub profile: RadiusProfile,
    pub seed: u64,
    pub points: Vec<DiskPoint>,
}

/// Draws `θ_k` for every radius of the profile.
///
/// Angle `k` is the `k`-th uniform of stream `(seed, TAG_SAMPLE_ANGLES, 0)`,
/// so any prefix or slice of a sample can be regenerated independently.
pub fn sample_sequence(profile: &RadiusProfile, seed: u64) -> SequenceSample {
    let depths = profile.depths();
    let units = rng::unit_block(seed, rng::TAG_SAMPLE_ANGLES, 0, 0, depths.len());
    let points = depths
        .iter()
        .zip(units)
        .map(|(d, u)| DiskPoint::from_parts(d.value, d.log, TAU * u))
        .collect();
    SequenceSample { profile: profile.clone(), seed, points }
}

impl SequenceSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// The first `n` points (a prefix of the same realization).
    pub fn truncated(&self, n: usize) -> SequenceSample {
        let n = n.min(self.points.len());
        SequenceSample {
            profile: self.profile.with_count(n),
            seed: self.seed,
            points: self.points[..n].to_vec(),
        }
    }
}

/// Occupation numbers `N_n = #(A_n ∩ Λ)` of the dyadic annuli.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DyadicProfile {
    pub counts: BTreeMap<u32, u64>,
    /// `Σ N_n 2^{-n}`
    pub weighted_sum: f64,
    /// `Σ (1 - r_n)` over the same points.
    pub blaschke_sum: f64,
    /// `½ Σ N_n 2^{-n}`, a lower bound for `blaschke_sum`.
    pub lower_bound: f64,
    /// `Σ N_n 2^{-n}`, an upper bound for `blaschke_sum`.
    pub upper_bound: f64,
}

impl DyadicProfile {
    pub fn total(&self) -> u64 {
        self.counts.values().sum()
    }
}

pub fn dyadic_counts(points: &[DiskPoint]) -> DyadicProfile {
    let mut counts = BTreeMap::new();
    for p in points {
        *counts.entry(annulus_index(p)).or_insert(0u64) += 1;
    }
    let weighted: Vec<f64> = counts
        .iter()
        .map(|(&n, &c)| c as f64 * pow2_neg(n))
        .collect();
    let weighted_sum = sum_ascending(weighted);
    let blaschke_sum = sum_ascending(points.iter().map(DiskPoint::depth).collect());
    DyadicProfile { counts, weighted_sum, blaschke_sum, lower_bound: 0.5 * weighted_sum, upper_bound: weighted_sum }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn radii_examples() {
        assert_eq!(make_radii(&RadiusProfile::geometric(0.5, 3).unwrap()), vec![0.5, 0.75, 0.875]);
        let p = make_radii(&RadiusProfile::power(1.0, 1.0, 3).unwrap());
        assert_eq!(p[0], 0.0);
        assert_eq!(p[1], 0.5);
        assert_relative_eq!(p[2], 2.0 / 3.0, epsilon = 1e-16);
        let d = make_radii(&RadiusProfile::dyadic(CountRule::Linear, 6).unwrap());
        assert_eq!(d, vec![0.625, 0.8125, 0.8125, 0.90625, 0.90625, 0.90625]);
    }

    #[test]
    fn invalid_profiles_are_rejected() {
        assert!(RadiusProfile::geometric(1.0, 3).is_err());
        assert!(RadiusProfile::geometric(0.0, 3).is_err());
        assert!(RadiusProfile::power(1.0, 0.0, 3).is_err());
        assert!(RadiusProfile::power(-1.0, 2.0, 3).is_err());
        assert!(RadiusProfile::explicit(vec![0.2, 1.0]).is_err());
        assert!(RadiusProfile::explicit(vec![-0.1]).is_err());
        assert!(RadiusProfile::dyadic(CountRule::Explicit(vec![0, 1, 1]), 3).is_err());
    }

    #[test]
    fn grammar_round_trip() {
        for spec in ["geometric:q=0.5,N=200", "power:c=1,beta=2,N=500", "dyadic:counts=n,N=140", "dyadic:counts=1.5^n,N=10"] {
            let p = RadiusProfile::parse(spec, None).unwrap();
            assert_eq!(p.to_string(), spec);
        }
        let p = RadiusProfile::parse("power:beta=2,N=5", None).unwrap();
        assert_eq!(p.kind(), &ProfileKind::Power { c: 1.0, beta: 2.0 });
        let p = RadiusProfile::parse("dyadic:counts=1;0;4,N=5", None).unwrap();
        assert_eq!(p.kind(), &ProfileKind::DyadicCounts(CountRule::Explicit(vec![1, 0, 4])));
        for bad in ["power:beta=0,N=3", "geometric:q=0.5", "geometric:q=0.5,N=3,x=1", "circle:N=3", "geometric", "dyadic:counts=zz,N=2"] {
            assert!(RadiusProfile::parse(bad, None).is_err(), "{bad}");
        }
    }

    #[test]
    fn explicit_file_profile() {
        let dir = std::env::temp_dir().join(format!("steinhaus-radii-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("radii.csv"), "0.9\n# comment\n0.5\n\n0.75\n").unwrap();
        let p = RadiusProfile::parse("explicit:file=radii.csv", Some(&dir)).unwrap();
        assert_eq!(make_radii(&p), vec![0.5, 0.75, 0.9]);
        std::fs::write(dir.join("bad.csv"), "0.5\n1.5\n").unwrap();
        assert!(RadiusProfile::parse("explicit:file=bad.csv", Some(&dir)).is_err());
    }

    #[test]
    fn blaschke_sum_examples() {
        for n in [1, 5, 30, 60] {
            let s = blaschke_sum(&RadiusProfile::geometric(0.5, n).unwrap());
            assert_eq!(s.partial_sum, 1.0 - pow2_neg(n as u32));
            assert!(s.tail_convergent);
        }
        assert!(!blaschke_sum(&RadiusProfile::power(1.0, 1.0, 100).unwrap()).tail_convergent);
        assert!(!RadiusProfile::dyadic(CountRule::Exponential(2.0), 10).unwrap().tail_convergent());
        assert!(RadiusProfile::dyadic(CountRule::Exponential(1.9), 10).unwrap().tail_convergent());
    }

    #[test]
    fn power_partial_sums_increase_towards_zeta_two() {
        // independent oracle: direct partial sums of 1/n²
        let mut prev = 0.0;
        for n in [10usize, 100, 1000, 10000] {
            let s = blaschke_sum(&RadiusProfile::power(1.0, 2.0, n).unwrap()).partial_sum;
            let oracle: f64 = (1..=n).rev().map(|k| 1.0 / (k as f64 * k as f64)).sum();
            assert_relative_eq!(s, oracle, max_relative = 1e-13);
            assert!(s > prev && s < std::f64::consts::PI.powi(2) / 6.0);
            prev = s;
        }
        assert!(std::f64::consts::PI.powi(2) / 6.0 - prev < 1.1e-4);
    }

    #[test]
    fn sampling_is_deterministic() {
        let p = RadiusProfile::geometric(0.5, 50).unwrap();
        assert_eq!(sample_sequence(&p, 9), sample_sequence(&p, 9));
        assert_ne!(sample_sequence(&p, 9).points, sample_sequence(&p, 10).points);
        assert!(sample_sequence(&RadiusProfile::geometric(0.5, 0).unwrap(), 1).is_empty());
        // a prefix of a longer sample is the shorter sample
        let long = sample_sequence(&p.with_count(200), 9);
        assert_eq!(long.truncated(50).points, sample_sequence(&p, 9).points);
    }

    #[test]
    fn deep_geometric_points_exist() {
        let s = sample_sequence(&RadiusProfile::geometric(0.5, 2000).unwrap(), 3);
        let last = s.points.last().unwrap();
        assert_eq!(last.depth(), 0.0);
        assert_relative_eq!(last.log_depth(), -2000.0 * LN_2, max_relative = 1e-15);
        assert_eq!(annulus_index(last), 2000);
    }

    #[test]
    fn dyadic_count_examples() {
        let s = sample_sequence(&RadiusProfile::geometric(0.5, 40).unwrap(), 1);
        let d = dyadic_counts(&s.points);
        assert_eq!(d.counts.len(), 40);
        assert!(d.counts.iter().all(|(&n, &c)| c == 1 && (1..=40).contains(&n)));
        let empty = dyadic_counts(&[]);
        assert!(empty.counts.is_empty());
        assert_eq!(empty.weighted_sum, 0.0);

        let s = sample_sequence(&RadiusProfile::dyadic(CountRule::Linear, 100).unwrap(), 1);
        let d = dyadic_counts(&s.points);
        assert_eq!(d.total(), 100);
        for n in 1..=12u32 {
            assert_eq!(d.counts[&n], u64::from(n));
        }
        // 1 + ... + 13 = 91, so level 14 is truncated at 9 points
        assert_eq!(d.counts[&13], 13);
        assert_eq!(d.counts[&14], 9);
        assert!(!d.counts.contains_key(&0));
    }

    #[test]
    fn blaschke_and_dyadic_sums_are_comparable() {
        let profiles = [
            RadiusProfile::geometric(0.3, 300).unwrap(),
            RadiusProfile::power(2.0, 1.5, 500).unwrap(),
            RadiusProfile::dyadic(CountRule::Power(1.5), 800).unwrap(),
            RadiusProfile::explicit(vec![0.0, 0.1, 0.5, 0.75, 0.999]).unwrap(),
        ];
        for p in profiles {
            let d = dyadic_counts(&sample_sequence(&p, 4).points);
            assert!(d.lower_bound <= d.blaschke_sum && d.blaschke_sum <= d.upper_bound, "{p}: {d:?}");
        }
    }
}
