//! Hyperbolic geometry of the unit disk.
//!
//! All pairwise quantities are evaluated from the polar data of the two
//! points, never from `1 - |z|` recomputed out of Cartesian coordinates:
//!
//! ```text
//! |a - b|^2     = (g_b - g_a)^2            + 4 r_a r_b sin^2(Δ/2)
//! |1 - ā b|^2   = (g_a + g_b - g_a g_b)^2  + 4 r_a r_b sin^2(Δ/2)
//! 1 - ρ(a,b)^2  = g_a (2 - g_a) g_b (2 - g_b) / |1 - ā b|^2
//! ```
//!
//! where `g = 1 - |z|` is the depth and `Δ` the angular separation.

use std::f64::consts::{LN_2, PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Below this depth the pairwise kernels switch to log-domain arithmetic.
const LINEAR_DEPTH_FLOOR: f64 = 1e-60;

/// A point of the open unit disk.
///
/// Stored as argument plus depth `g = 1 - |z|`, with the depth also kept as
/// `ln g`. The logarithm is authoritative: depths like `2^{-2000}` underflow
/// to zero as `f64` but remain exact in `log_depth`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiskPoint {
    angle: f64,
    depth: f64,
    log_depth: f64,
}

impl DiskPoint {
    pub const ORIGIN: DiskPoint = DiskPoint { angle: 0.0, depth: 1.0, log_depth: 0.0 };

    /// From Cartesian coordinates.
    pub fn new(re: f64, im: f64) -> Result<Self> {
        let r = re.hypot(im);
        if !(r < 1.0) || !re.is_finite() || !im.is_finite() {
            return Err(LabError::OutsideDisk { re, im });
        }
        let angle = if r == 0.0 { 0.0 } else { im.atan2(re).rem_euclid(TAU) };
        let depth = 1.0 - r;
        Ok(Self { angle: angle_or_zero(angle), depth, log_depth: depth.ln() })
    }

    pub fn from_complex(z: Complex64) -> Result<Self> {
        Self::new(z.re, z.im)
    }

    pub fn from_polar(r: f64, angle: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&r) || !angle.is_finite() {
            return Err(LabError::OutsideDisk { re: r * angle.cos(), im: r * angle.sin() });
        }
        Self::from_depth(1.0 - r, angle)
    }

    /// From the depth `g = 1 - |z| ∈ (0, 1]`.
    pub fn from_depth(depth: f64, angle: f64) -> Result<Self> {
        if !(depth > 0.0 && depth <= 1.0) || !angle.is_finite() {
            return Err(LabError::OutsideDisk { re: (1.0 - depth) * angle.cos(), im: (1.0 - depth) * angle.sin() });
        }
        Ok(Self::from_parts(depth, depth.ln(), angle))
    }

    /// From `ln(1 - |z|) ≤ 0`; accepts depths far below `f64::MIN_POSITIVE`.
    pub fn from_log_depth(log_depth: f64, angle: f64) -> Result<Self> {
        if !(log_depth <= 0.0) || log_depth == f64::NEG_INFINITY || !angle.is_finite() {
            return Err(LabError::OutsideDisk { re: angle.cos(), im: angle.sin() });
        }
        Ok(Self::from_parts(log_depth.exp(), log_depth, angle))
    }

    /// Trusted constructor for depths produced by a profile: `depth` is the
    /// (possibly underflowed) value and `log_depth` its exact logarithm.
    pub(crate) fn from_parts(depth: f64, log_depth: f64, angle: f64) -> Self {
        let angle = if depth >= 1.0 { 0.0 } else { angle.rem_euclid(TAU) };
        Self { angle: angle_or_zero(angle), depth, log_depth }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// `1 - |z|`, zero when it underflows.
    pub fn depth(&self) -> f64 {
        self.depth
    }

    pub fn log_depth(&self) -> f64 {
        self.log_depth
    }

    pub fn modulus(&self) -> f64 {
        1.0 - self.depth
    }

    pub fn re(&self) -> f64 {
        self.modulus() * self.angle.cos()
    }

    pub fn im(&self) -> f64 {
        self.modulus() * self.angle.sin()
    }

    pub fn to_complex(&self) -> Complex64 {
        Complex64::from_polar(self.modulus(), self.angle)
    }

    pub fn is_origin(&self) -> bool {
        self.depth >= 1.0
    }

    /// `ln |z|`, `-∞` at the origin.
    pub fn log_modulus(&self) -> f64 {
        (-self.depth).ln_1p()
    }

    /// The point multiplied by `e^{iα}`.
    pub fn rotated(&self, alpha: f64) -> Self {
        Self::from_parts(self.depth, self.log_depth, self.angle + alpha)
    }

    /// `1 - |z|^2`, from the depth.
    pub fn one_minus_modulus_sq(&self) -> f64 {
        self.depth * (2.0 - self.depth)
    }
}

fn angle_or_zero(angle: f64) -> f64 {
    // rem_euclid can return TAU itself for tiny negative inputs
    if angle >= TAU {
        0.0
    } else {
        angle
    }
}

/// `ln(e^x + e^y)` tolerating `-∞` arguments.
pub(crate) fn log_add_exp(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if hi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    hi + (lo - hi).exp().ln_1p()
}

/// `ln |e^x - e^y|`, `-∞` when equal.
fn log_sub_abs(x: f64, y: f64) -> f64 {
    let (hi, lo) = if x >= y { (x, y) } else { (y, x) };
    if hi == lo {
        return f64::NEG_INFINITY;
    }
    hi + (-(lo - hi).exp_m1()).ln()
}

/// Half the angular gap between two arguments, as `|sin(Δ/2)|`.
fn half_sine(a: &DiskPoint, b: &DiskPoint) -> f64 {
    (0.5 * (b.angle - a.angle)).sin().abs()
}

/// `log(1/ρ(a, b))`, `+∞` for coincident points.
///
/// Evaluated as `-½ ln ρ²` while `ρ² < ½`, and as `-½ ln(1 - (1 - ρ²))` with
/// the factored `1 - ρ²` once `ρ` approaches 1, so neither regime loses
/// relative accuracy.
pub fn log_inv_rho(a: &DiskPoint, b: &DiskPoint) -> f64 {
    if a.depth > LINEAR_DEPTH_FLOOR && b.depth > LINEAR_DEPTH_FLOOR {
        log_inv_rho_linear(a, b)
    } else {
        log_inv_rho_logdomain(a, b)
    }
}

fn log_inv_rho_linear(a: &DiskPoint, b: &DiskPoint) -> f64 {
    let (ga, gb) = (a.depth, b.depth);
    let h = half_sine(a, b);
    let t = 4.0 * (1.0 - ga) * (1.0 - gb) * h * h;
    let s = ga + gb - ga * gb;
    let dr = gb - ga;
    let num = dr * dr + t;
    let den = s * s + t;
    if num == 0.0 {
        return f64::INFINITY;
    }
    if num < 0.5 * den {
        -0.5 * (num / den).ln()
    } else {
        let gap = ga * (2.0 - ga) * gb * (2.0 - gb) / den;
        -0.5 * (-gap).ln_1p()
    }
}

fn log_inv_rho_logdomain(a: &DiskPoint, b: &DiskPoint) -> f64 {
    let (la, lb) = (a.log_depth, b.log_depth);
    let ln_ra = a.log_modulus();
    let ln_rb = b.log_modulus();
    let h = half_sine(a, b);
    let ln_t = (4.0f64).ln() + ln_ra + ln_rb + 2.0 * h.ln();
    let ln_s = log_add_exp(la, lb + ln_ra);
    let ln_den = log_add_exp(2.0 * ln_s, ln_t);
    let ln_num = log_add_exp(2.0 * log_sub_abs(la, lb), ln_t);
    if ln_num == f64::NEG_INFINITY {
        return f64::INFINITY;
    }
    let ln_rho_sq = ln_num - ln_den;
    if ln_rho_sq < -LN_2 {
        -0.5 * ln_rho_sq
    } else {
        let ln_gap = la + (2.0 - a.depth).ln() + lb + (2.0 - b.depth).ln() - ln_den;
        -0.5 * (-ln_gap.exp()).ln_1p()
    }
}

/// Pseudohyperbolic distance `|(a - b)/(1 - ā b)|`.
pub fn pseudo_distance(a: &DiskPoint, b: &DiskPoint) -> f64 {
    (-log_inv_rho(a, b)).exp()
}

/// The disk automorphism `φ_c(z) = (z - c)/(1 - c̄ z)`, evaluated in
/// Cartesian arithmetic.
pub fn mobius(c: &DiskPoint, z: &DiskPoint) -> Result<DiskPoint> {
    let (c, z) = (c.to_complex(), z.to_complex());
    DiskPoint::from_complex((z - c) / (Complex64::new(1.0, 0.0) - c.conj() * z))
}

/// Normalized Blaschke factor `b_λ(z) = (|λ|/λ)(z - λ)/(1 - λ̄ z)`, and
/// `b_0(z) = z`.
pub fn blaschke_factor(center: &DiskPoint, z: &DiskPoint) -> Complex64 {
    let zc = z.to_complex();
    if center.is_origin() {
        return zc;
    }
    let lam = center.to_complex();
    let unimodular = Complex64::from_polar(1.0, -center.angle);
    unimodular * (zc - lam) / (Complex64::new(1.0, 0.0) - lam.conj() * zc)
}

/// Exact `2^{-n}` for `n ≤ 1074`.
pub(crate) fn pow2_neg(n: u32) -> f64 {
    if n <= 1022 {
        f64::from_bits(u64::from(1023 - n) << 52)
    } else if n <= 1074 {
        f64::from_bits(1u64 << (1074 - n))
    } else {
        0.0
    }
}

/// Index `n` of the dyadic annulus `1 - 2^{-n} ≤ |z| < 1 - 2^{-(n+1)}`.
pub fn annulus_index(z: &DiskPoint) -> u32 {
    annulus_index_of_depth(z.depth, z.log_depth)
}

/// Annulus index from the depth `g = 1 - |z|`: the `n` with
/// `2^{-(n+1)} < g ≤ 2^{-n}`.
pub fn annulus_index_of_depth(depth: f64, log_depth: f64) -> u32 {
    if depth >= 1.0 {
        return 0;
    }
    if !(depth >= f64::MIN_POSITIVE) {
        // underflowed depth: only the logarithm is available, and `n ln 2`
        // itself carries rounding, so boundaries are read with a relative slack
        let x = -log_depth / LN_2;
        return (x * (1.0 + 8.0 * f64::EPSILON)).floor().max(0.0) as u32;
    }
    let mut n = (-depth.log2()).floor().max(0.0) as u32;
    while n > 0 && depth > pow2_neg(n) {
        n -= 1;
    }
    while depth <= pow2_neg(n + 1) {
        n += 1;
    }
    n
}

/// A closed arc of the unit circle.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundaryArc {
    center_angle: f64,
    half_length: f64,
}

impl BoundaryArc {
    pub fn new(center_angle: f64, half_length: f64) -> Result<Self> {
        if !(half_length > 0.0 && half_length <= PI) || !center_angle.is_finite() {
            return Err(LabError::param(format!("arc half-length {half_length} not in (0, π]")));
        }
        Ok(Self { center_angle: angle_or_zero(center_angle.rem_euclid(TAU)), half_length })
    }

    pub fn full_circle() -> Self {
        Self { center_angle: 0.0, half_length: PI }
    }

    /// Arc from `start` counterclockwise to `end` (lengths taken mod 2π).
    pub fn between(start: f64, end: f64) -> Result<Self> {
        let len = (end - start).rem_euclid(TAU);
        let len = if len == 0.0 { TAU } else { len };
        Self::new(start + 0.5 * len, 0.5 * len)
    }

    pub fn center_angle(&self) -> f64 {
        self.center_angle
    }

    pub fn half_length(&self) -> f64 {
        self.half_length
    }

    pub fn is_full(&self) -> bool {
        self.half_length >= PI
    }

    /// Normalized Lebesgue measure `m(I) = half_length/π`.
    pub fn measure(&self) -> f64 {
        self.half_length / PI
    }

    pub fn start(&self) -> f64 {
        self.center_angle - self.half_length
    }

    pub fn contains_angle(&self, angle: f64) -> bool {
        let d = (angle - self.center_angle).rem_euclid(TAU);
        let d = d.min(TAU - d);
        d <= self.half_length
    }
}

/// Antiderivative of `P_r(u)/2` on `[-π, π]`:
/// `arctan(((1+r)/(1-r)) tan(u/2))`, written with the depth so that it stays
/// accurate as `r → 1`.
fn poisson_primitive(r: f64, depth: f64, u: f64) -> f64 {
    let half = 0.5 * u;
    ((1.0 + r) * half.sin()).atan2(depth * half.cos())
}

/// Harmonic measure `ω(z, I) = ∫_I P_z dm` of a boundary arc.
///
/// Closed form: the disk automorphism sending `z` to the origin carries `I`
/// to an arc whose normalized length is `ω(z, I)`. Written through the
/// Poisson primitive this is `(F(u_b) - F(u_a))/π` with the endpoints
/// measured from `arg z`, split once at `±π` when the arc straddles the
/// antipode of `z`.
pub fn harmonic_measure(z: &DiskPoint, arc: &BoundaryArc) -> f64 {
    if arc.is_full() {
        return 1.0;
    }
    let r = z.modulus();
    let g = z.depth;
    // offset of the arc center first, so arcs far narrower than an ulp of
    // their absolute angle keep their width
    let mut offset = (arc.center_angle - z.angle).rem_euclid(TAU);
    if offset >= PI {
        offset -= TAU;
    }
    let mut ua = offset - arc.half_length;
    if ua < -PI {
        ua += TAU;
    }
    let ub = ua + 2.0 * arc.half_length;
    let f = |u| poisson_primitive(r, g, u);
    let w = if ub <= PI {
        (f(ub) - f(ua)) / PI
    } else {
        (PI + f(ub - TAU) - f(ua)) / PI
    };
    w.clamp(0.0, 1.0)
}

/// Non-tangential approach region `Γ_α(ζ) = {z : |ζ - z| ≤ α(1 - |z|)}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StolzAngle {
    vertex_angle: f64,
    aperture: f64,
}

impl StolzAngle {
    pub fn new(vertex_angle: f64, aperture: f64) -> Result<Self> {
        if !(aperture > 1.0) || !aperture.is_finite() || !vertex_angle.is_finite() {
            return Err(LabError::param(format!("Stolz aperture must exceed 1, got {aperture}")));
        }
        Ok(Self { vertex_angle, aperture })
    }

    pub fn vertex_angle(&self) -> f64 {
        self.vertex_angle
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    /// `|ζ - z| ≤ α(1 - |z|)`, i.e. `4|z| sin²(Δ/2) ≤ (α² - 1) g²`.
    pub fn contains(&self, z: &DiskPoint) -> bool {
        stolz_contains(self, z)
    }
}

pub fn stolz_contains(angle: &StolzAngle, z: &DiskPoint) -> bool {
    let h = (0.5 * (z.angle - angle.vertex_angle)).sin().abs();
    let lhs = (4.0f64).ln() + z.log_modulus() + 2.0 * h.ln();
    let rhs = (angle.aperture * angle.aperture - 1.0).ln() + 2.0 * z.log_depth;
    lhs <= rhs
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn pt(re: f64, im: f64) -> DiskPoint {
        DiskPoint::new(re, im).unwrap()
    }

    fn naive_rho(a: Complex64, b: Complex64) -> f64 {
        ((a - b) / (Complex64::new(1.0, 0.0) - a.conj() * b)).norm()
    }

    #[test]
    fn rejects_points_off_the_disk() {
        assert!(matches!(DiskPoint::new(1.0, 0.0), Err(LabError::OutsideDisk { .. })));
        assert!(DiskPoint::new(0.8, 0.7).is_err());
        assert!(DiskPoint::new(f64::NAN, 0.0).is_err());
        assert!(DiskPoint::from_polar(1.0, 0.3).is_err());
        assert!(DiskPoint::from_depth(0.0, 0.3).is_err());
        assert!(DiskPoint::from_log_depth(0.1, 0.3).is_err());
    }

    #[test]
    fn distance_examples() {
        for theta in [0.0, 1.0, 2.5, 4.0] {
            let b = DiskPoint::from_polar(0.7, theta).unwrap();
            assert_relative_eq!(pseudo_distance(&DiskPoint::ORIGIN, &b), 0.7, epsilon = 1e-15);
        }
        let a = pt(0.3, -0.2);
        assert_eq!(pseudo_distance(&a, &a), 0.0);
        assert_relative_eq!(pseudo_distance(&pt(0.5, 0.0), &pt(-0.5, 0.0)), 0.8, epsilon = 1e-15);
    }

    #[test]
    fn log_inv_rho_examples() {
        assert_relative_eq!(log_inv_rho(&DiskPoint::ORIGIN, &pt(0.5, 0.0)), LN_2, epsilon = 1e-15);
        let a = pt(0.2, 0.4);
        assert_eq!(log_inv_rho(&a, &a), f64::INFINITY);
        let a = DiskPoint::from_polar(0.9, 0.0).unwrap();
        let b = DiskPoint::from_polar(0.9, PI).unwrap();
        let direct = -naive_rho(a.to_complex(), b.to_complex()).ln();
        assert_relative_eq!(log_inv_rho(&a, &b), direct, max_relative = 1e-12);
    }

    #[test]
    fn log_domain_branch_agrees_with_linear_branch() {
        let cases = [(0.3, 0.0, 0.5, 1.0), (1e-3, 0.1, 2e-3, 0.1004), (1e-9, 2.0, 1e-9, 2.0 + 1e-9), (0.7, 0.0, 0.01, 3.0)];
        for (ga, ta, gb, tb) in cases {
            let a = DiskPoint::from_depth(ga, ta).unwrap();
            let b = DiskPoint::from_depth(gb, tb).unwrap();
            let lin = log_inv_rho_linear(&a, &b);
            let log = log_inv_rho_logdomain(&a, &b);
            assert_relative_eq!(lin, log, max_relative = 1e-11);
        }
    }

    #[test]
    fn near_boundary_keeps_relative_accuracy() {
        // two points at depth 2^-500 separated by one radian: 1 - ρ² ≈ g_a g_b · 4/|1-e^{i}|²
        let g = 2f64.powi(-500);
        let a = DiskPoint::from_depth(g, 0.0).unwrap();
        let b = DiskPoint::from_depth(g, 1.0).unwrap();
        let expect = 0.5 * (4.0 * g * g) / (4.0 * (0.5f64).sin().powi(2));
        assert_relative_eq!(log_inv_rho(&a, &b), expect, max_relative = 1e-12);
        // depths that do not exist as f64
        let a = DiskPoint::from_log_depth(-2000.0 * LN_2, 0.0).unwrap();
        let b = DiskPoint::from_log_depth(-1999.0 * LN_2, 0.0).unwrap();
        // radial pair with g_b = 2 g_a: ρ = g_a/(3 g_a - 2 g_a²) → 1/3
        assert_relative_eq!(pseudo_distance(&a, &b), 1.0 / 3.0, max_relative = 1e-12);
    }

    #[test]
    fn blaschke_factor_examples() {
        let z = pt(0.3, 0.55);
        assert_eq!(blaschke_factor(&DiskPoint::ORIGIN, &z), z.to_complex());
        let c = pt(-0.4, 0.2);
        assert!(blaschke_factor(&c, &c).norm() < 1e-15);
        // b_λ(0) = (|λ|/λ)(-λ) = -|λ|
        let b0 = blaschke_factor(&c, &DiskPoint::ORIGIN);
        assert_relative_eq!(b0.re, -c.modulus(), epsilon = 1e-15);
        assert!(b0.im.abs() < 1e-15);
    }

    #[test]
    fn blaschke_modulus_is_pseudo_distance() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let a = DiskPoint::from_polar(rng.random::<f64>() * 0.99, rng.random::<f64>() * TAU).unwrap();
            let b = DiskPoint::from_polar(rng.random::<f64>() * 0.99, rng.random::<f64>() * TAU).unwrap();
            let diff = (blaschke_factor(&a, &b).norm() - pseudo_distance(&a, &b)).abs();
            assert!(diff < 1e-14, "{diff}");
        }
    }

    #[test]
    fn annulus_examples() {
        assert_eq!(annulus_index(&DiskPoint::ORIGIN), 0);
        assert_eq!(annulus_index(&DiskPoint::from_polar(0.5, 1.0).unwrap()), 1);
        assert_eq!(annulus_index(&DiskPoint::from_polar(0.9, 1.0).unwrap()), 3);
        assert_eq!(annulus_index(&DiskPoint::from_polar(0.49, 1.0).unwrap()), 0);
        assert_eq!(annulus_index(&DiskPoint::from_polar(0.875, 1.0).unwrap()), 3);
        assert_eq!(annulus_index(&DiskPoint::from_polar(0.8749, 1.0).unwrap()), 2);
        let deep = DiskPoint::from_log_depth(-1500.5 * LN_2, 0.0).unwrap();
        assert_eq!(annulus_index(&deep), 1500);
    }

    #[test]
    fn annulus_boundaries_are_exact() {
        for n in 0..1000u32 {
            let g = pow2_neg(n);
            assert_eq!(annulus_index_of_depth(g, g.ln()), n);
            let inside = g * 0.75;
            assert_eq!(annulus_index_of_depth(inside, inside.ln()), n);
        }
    }

    #[test]
    fn stolz_examples() {
        for v in [0.0, 1.3, 5.0] {
            assert!(StolzAngle::new(v, 1.5).unwrap().contains(&DiskPoint::ORIGIN));
            let radial = DiskPoint::from_polar(0.999, v).unwrap();
            assert!(StolzAngle::new(v, 1.0001).unwrap().contains(&radial));
        }
        let s = StolzAngle::new(0.7, 2.0).unwrap();
        assert!(!s.contains(&DiskPoint::from_polar(0.99, 1.2).unwrap()));
        assert!(StolzAngle::new(0.0, 1.0).is_err());
    }

    #[test]
    fn harmonic_measure_examples() {
        let arc = BoundaryArc::new(1.0, 0.4).unwrap();
        assert_relative_eq!(harmonic_measure(&DiskPoint::ORIGIN, &arc), 0.4 / PI, epsilon = 1e-15);
        let z = pt(0.6, -0.3);
        assert_eq!(harmonic_measure(&z, &BoundaryArc::full_circle()), 1.0);
        assert!(BoundaryArc::new(0.0, 0.0).is_err());
        assert!(BoundaryArc::new(0.0, 3.2).is_err());
    }

    #[test]
    fn harmonic_measure_matches_poisson_quadrature() {
        use crate::quad::{integrate, normalize_breakpoints, QuadOptions};
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let opts = QuadOptions { rel_tol: 1e-13, abs_tol: 1e-14, max_evals: 1 << 20 };
        for _ in 0..50 {
            let z = DiskPoint::from_polar(rng.random::<f64>() * 0.98, rng.random::<f64>() * TAU).unwrap();
            let arc = BoundaryArc::new(rng.random::<f64>() * TAU, 0.01 + rng.random::<f64>() * 3.0).unwrap();
            let (r, theta) = (z.modulus(), z.angle());
            let kernel = |t: f64| (1.0 - r * r) / (1.0 - 2.0 * r * (t - theta).cos() + r * r) / TAU;
            let a = arc.start();
            let b = a + 2.0 * arc.half_length();
            // break the range at the kernel peak if it falls inside the arc
            let mut pts = vec![a, b];
            for k in -1..=2 {
                let peak = theta + k as f64 * TAU;
                if peak > a && peak < b {
                    pts.push(peak);
                }
            }
            let q = integrate(kernel, &normalize_breakpoints(pts), &opts);
            assert!((harmonic_measure(&z, &arc) - q.value).abs() < 1e-10, "{z:?} {arc:?}");
        }
    }

    #[test]
    fn harmonic_measure_partition_sums_to_one() {
        let z = DiskPoint::from_polar(0.97, 2.0).unwrap();
        let cuts = [0.0, 0.3, 1.9, 1.99, 2.01, 4.0, 6.0];
        let mut total = 0.0;
        for i in 0..cuts.len() {
            let next = if i + 1 < cuts.len() { cuts[i + 1] } else { TAU };
            total += harmonic_measure(&z, &BoundaryArc::between(cuts[i], next).unwrap());
        }
        assert_relative_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn deep_point_sees_half_of_its_shadow() {
        // ω(λ, I_λ) → (2/π) arctan(1) = 1/2 as the depth vanishes
        for k in [10, 40, 200, 900] {
            let g = 2f64.powi(-k);
            let z = DiskPoint::from_depth(g, 3.0).unwrap();
            let arc = BoundaryArc::new(3.0, g).unwrap();
            assert_relative_eq!(harmonic_measure(&z, &arc), 0.5, epsilon = 1e-3);
        }
    }

    proptest! {
        #[test]
        fn symmetric_distance(r1 in 0.0..0.999f64, t1 in 0.0..TAU, r2 in 0.0..0.999f64, t2 in 0.0..TAU) {
            let a = DiskPoint::from_polar(r1, t1).unwrap();
            let b = DiskPoint::from_polar(r2, t2).unwrap();
            let (x, y) = (pseudo_distance(&a, &b), pseudo_distance(&b, &a));
            prop_assert!((x - y).abs() <= 1e-15);
            prop_assert!((0.0..1.0).contains(&x));
        }

        #[test]
        fn mobius_invariance(r1 in 0.0..0.95f64, t1 in 0.0..TAU, r2 in 0.0..0.95f64, t2 in 0.0..TAU,
                             rc in 0.0..0.9f64, tc in 0.0..TAU) {
            let a = DiskPoint::from_polar(r1, t1).unwrap();
            let b = DiskPoint::from_polar(r2, t2).unwrap();
            let c = DiskPoint::from_polar(rc, tc).unwrap();
            let before = pseudo_distance(&a, &b);
            let after = pseudo_distance(&mobius(&c, &a).unwrap(), &mobius(&c, &b).unwrap());
            prop_assert!((before - after).abs() < 1e-12, "{} vs {}", before, after);
        }

        #[test]
        fn annuli_partition(r in 0.0..0.999999f64) {
            let n = annulus_index(&DiskPoint::from_polar(r, 0.0).unwrap());
            let hits = (0..64u32).filter(|&k| 1.0 - pow2_neg(k) <= r && r < 1.0 - pow2_neg(k + 1)).count();
            prop_assert_eq!(hits, 1);
            prop_assert!(1.0 - pow2_neg(n) <= r && r < 1.0 - pow2_neg(n + 1));
        }

        #[test]
        fn harmonic_measure_additive_and_monotone(r in 0.0..0.999f64, t in 0.0..TAU,
                                                  start in 0.0..TAU, l1 in 0.001..3.0f64, l2 in 0.001..3.0f64) {
            let z = DiskPoint::from_polar(r, t).unwrap();
            let left = BoundaryArc::between(start, start + l1).unwrap();
            let right = BoundaryArc::between(start + l1, start + l1 + l2).unwrap();
            let whole = BoundaryArc::between(start, start + l1 + l2).unwrap();
            let (wl, wr, ww) = (harmonic_measure(&z, &left), harmonic_measure(&z, &right), harmonic_measure(&z, &whole));
            prop_assert!((wl + wr - ww).abs() < 1e-12);
            prop_assert!(ww + 1e-12 >= wl.max(wr));
        }
    }

    #[test]
    fn same_annulus_radial_extremes_are_bounded_apart() {
        // dyadic annuli have bounded pseudohyperbolic diameter along a ray
        for n in 0..60u32 {
            let a = DiskPoint::from_depth(pow2_neg(n), 0.4).unwrap();
            let b = DiskPoint::from_depth(pow2_neg(n + 1) * (1.0 + 1e-12), 0.4).unwrap();
            assert!(pseudo_distance(&a, &b) <= 0.95);
        }
    }
}
