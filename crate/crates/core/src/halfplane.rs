//! Upper half-plane primitives.
//!
//! Resolvents of self-adjoint operators map `ℍ = {Im z > 0}` into itself, so
//! every resolvent value in the crate is carried by a [`HalfPlanePoint`]. This
//! module also provides the two deterministic fixed points the random
//! recursions are compared against: the semicircle transform `Γ(z)`, which
//! solves `Γ = -(z + Γ)^{-1}`, and the modified Kesten-McKay transform
//! `Γ⋆(z) = -(z + ρ Γ(z))^{-1}`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::adaptive_simpson;

/// A complex number with strictly positive imaginary part.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[repr(transparent)]
#[serde(into = "[f64; 2]")]
pub struct HalfPlanePoint(Complex64);

impl From<HalfPlanePoint> for [f64; 2] {
    fn from(p: HalfPlanePoint) -> Self {
        [p.re(), p.im()]
    }
}

impl<'de> Deserialize<'de> for HalfPlanePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let [re, im] = <[f64; 2]>::deserialize(d)?;
        HalfPlanePoint::new(re, im).map_err(serde::de::Error::custom)
    }
}

impl HalfPlanePoint {
    pub const I: HalfPlanePoint = HalfPlanePoint(Complex64 { re: 0.0, im: 1.0 });

    pub fn new(re: f64, im: f64) -> Result<Self> {
        Self::from_complex(Complex64::new(re, im))
    }

    pub fn from_complex(c: Complex64) -> Result<Self> {
        if c.im > 0.0 && c.re.is_finite() && c.im.is_finite() {
            Ok(HalfPlanePoint(c))
        } else {
            Err(Error::NotInHalfPlane { re: c.re, im: c.im })
        }
    }

    /// For values in `ℍ` by construction (images of `ℍ` under `w ↦ -1/w`).
    #[inline]
    pub(crate) fn new_unchecked(c: Complex64) -> Self {
        debug_assert!(c.im > 0.0, "{c} not in the half-plane");
        HalfPlanePoint(c)
    }

    #[inline]
    pub fn re(self) -> f64 {
        self.0.re
    }

    #[inline]
    pub fn im(self) -> f64 {
        self.0.im
    }

    #[inline]
    pub fn value(self) -> Complex64 {
        self.0
    }

    /// `-(w)^{-1}` for `w` in `ℍ`, which lands back in `ℍ`.
    #[inline]
    pub fn neg_inv(w: Complex64) -> Result<Self> {
        Self::from_complex(-w.inv())
    }
}

impl From<HalfPlanePoint> for Complex64 {
    fn from(p: HalfPlanePoint) -> Self {
        p.0
    }
}

/// Spectral window `ℍ_E` or `ℍ_B`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum SpectralStrip {
    /// `{ Re z ∈ (-E, E), 0 < Im z ≤ max_im }`, `0 < E < 2`.
    Strip { half_width: f64, max_im: f64 },
    /// `{ Re z ∈ B, 0 < Im z ≤ max_im }` with `B` a union of disjoint sorted
    /// open intervals.
    Borel { intervals: Vec<(f64, f64)>, max_im: f64 },
}

impl SpectralStrip {
    pub fn strip(half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width < 2.0) {
            return Err(Error::param("E", format!("{half_width} is not in (0, 2)")));
        }
        Ok(SpectralStrip::Strip { half_width, max_im: 1.0 })
    }

    pub fn borel(intervals: Vec<(f64, f64)>) -> Result<Self> {
        for (i, &(lo, hi)) in intervals.iter().enumerate() {
            if !(lo < hi) {
                return Err(Error::param("intervals", format!("empty interval ({lo}, {hi})")));
            }
            if i > 0 && intervals[i - 1].1 > lo {
                return Err(Error::param("intervals", "intervals must be sorted and disjoint"));
            }
        }
        Ok(SpectralStrip::Borel { intervals, max_im: 1.0 })
    }

    pub fn contains_real(&self, x: f64) -> bool {
        match self {
            SpectralStrip::Strip { half_width, .. } => x > -half_width && x < *half_width,
            SpectralStrip::Borel { intervals, .. } => {
                let k = intervals.partition_point(|&(lo, _)| lo < x);
                k > 0 && x < intervals[k - 1].1
            }
        }
    }

    pub fn contains(&self, z: HalfPlanePoint) -> bool {
        let max_im = match self {
            SpectralStrip::Strip { max_im, .. } | SpectralStrip::Borel { max_im, .. } => *max_im,
        };
        z.im() <= max_im && self.contains_real(z.re())
    }
}

/// `γ(g, h) = |g - h|² / (Im g · Im h)`.
#[inline]
pub fn gamma(g: HalfPlanePoint, h: HalfPlanePoint) -> f64 {
    (g.0 - h.0).norm_sqr() / (g.0.im * h.0.im)
}

/// Poincaré half-plane distance, `cosh⁻¹(1 + γ/2)`.
pub fn hyperbolic_distance(g: HalfPlanePoint, h: HalfPlanePoint) -> f64 {
    (1.0 + 0.5 * gamma(g, h)).acosh()
}

/// Cauchy-Stieltjes transform of the semicircle law, the root in `ℍ` of
/// `Γ² + zΓ + 1 = 0`.
pub fn semicircle_transform(z: HalfPlanePoint) -> HalfPlanePoint {
    let z = z.0;
    let mut s = (z * z - 4.0).sqrt();
    // The root in ℍ is (-z + s)/2 once s is taken on the branch with Im s ≥ 0.
    if s.im < 0.0 {
        s = -s;
    }
    // The two roots multiply to 1; evaluate the larger one without
    // cancellation and recover the other as its reciprocal.
    let plus = 0.5 * (-z + s);
    let minus = 0.5 * (-z - s);
    let big = if plus.norm_sqr() >= minus.norm_sqr() { plus } else { minus };
    let mut g = if big.im > 0.0 { big } else { big.inv() };
    if !(g.im > 0.0) {
        // Outside the band with tiny Im z: use Im Γ = Im z |Γ|² / (1 - |Γ|²).
        let m = g.norm_sqr();
        g.im = z.im * m / (1.0 - m).max(f64::MIN_POSITIVE);
    }
    HalfPlanePoint::new_unchecked(g)
}

/// `Γ⋆(z) = -(z + ρ Γ(z))^{-1}`.
pub fn kesten_mckay_transform(z: HalfPlanePoint, rho: f64) -> HalfPlanePoint {
    assert!(rho > 0.0, "rho must be positive");
    let g = semicircle_transform(z);
    HalfPlanePoint::new_unchecked(-(z.0 + rho * g.0).inv())
}

/// Boundary value of `Γ` on the cut `(-2, 2)`.
#[inline]
fn semicircle_on_cut(x: f64) -> Complex64 {
    Complex64::new(-0.5 * x, 0.5 * (4.0 - x * x).max(0.0).sqrt())
}

/// Density of the modified Kesten-McKay law with ratio `rho`, obtained from
/// `Im Γ⋆(x + i0) / π` with the closed-form cut value of `Γ`.
///
/// For `ρ ≤ 2` this is a probability density on `[-2, 2]`; for `ρ > 2` the
/// law also carries atoms at `±ρ/√(ρ-1)` which are not included here.
pub fn limiting_density(x: f64, rho: f64) -> f64 {
    assert!(rho > 0.0, "rho must be positive");
    if x.abs() >= 2.0 {
        return 0.0;
    }
    let w = x + rho * semicircle_on_cut(x);
    (w.im / w.norm_sqr()).max(0.0) / PI
}

/// `∫_a^b limiting_density(x, ρ) dx`, with the square-root edges removed by
/// the substitution `x = 2 sin θ`.
pub fn limiting_mass(a: f64, b: f64, rho: f64) -> f64 {
    let a = a.clamp(-2.0, 2.0);
    let b = b.clamp(-2.0, 2.0);
    if b <= a {
        return 0.0;
    }
    let ta = (a / 2.0).asin();
    let tb = (b / 2.0).asin();
    // density(2 sin t) * 2 cos t, simplified so the edges stay finite.
    let f = |t: f64| {
        let (s, c) = t.sin_cos();
        let den = rho * rho * c * c + (2.0 - rho) * (2.0 - rho) * s * s;
        if den == 0.0 {
            0.0
        } else {
            2.0 * rho * c * c / (PI * den)
        }
    };
    adaptive_simpson(&f, ta, tb, 1e-12)
}

/// Right-hand sides of the hyperbolic-to-Euclidean bounds:
/// `|g-h|² ≤ |h|²(4γ² + 2γ)` and `1/Im g ≤ (4γ + 2)/Im h`.
pub fn hyperbolic_to_euclidean(g: HalfPlanePoint, h: HalfPlanePoint) -> (f64, f64) {
    let gm = gamma(g, h);
    (h.0.norm_sqr() * (4.0 * gm * gm + 2.0 * gm), (4.0 * gm + 2.0) / h.0.im)
}

/// `cos(arg(a · conj(b)))` with the convention `arg 0 = π/2`.
#[inline]
pub fn cos_angle(a: Complex64, b: Complex64) -> f64 {
    let w = a * b.conj();
    if w.re == 0.0 && w.im == 0.0 {
        0.0
    } else {
        w.im.atan2(w.re).cos()
    }
}

/// `arg(a · conj(b))` in `(-π, π]` with the convention `arg 0 = π/2`.
#[inline]
pub fn angle(a: Complex64, b: Complex64) -> f64 {
    let w = a * b.conj();
    if w.re == 0.0 && w.im == 0.0 {
        PI / 2.0
    } else {
        w.im.atan2(w.re)
    }
}

/// `max(cos α, 0)`.
#[inline]
pub fn cos_plus(alpha: f64) -> f64 {
    alpha.cos().max(0.0)
}

/// Right-hand side of the exact expansion
/// `γ(mean h) = (1/n) Σ_{i,j} cos α_ij √(q_i γ_i) √(q_j γ_j)` with
/// `q_i = Im h_i / Σ Im h_j`, every `γ` measured against `gamma_ref`.
pub fn barycenter_expansion(h: &[HalfPlanePoint], gamma_ref: HalfPlanePoint) -> f64 {
    let n = h.len() as f64;
    let total_im: f64 = h.iter().map(|x| x.im()).sum();
    let w: Vec<f64> = h.iter().map(|&x| (x.im() / total_im * gamma(x, gamma_ref)).sqrt()).collect();
    let mut acc = 0.0;
    for (i, hi) in h.iter().enumerate() {
        for (j, hj) in h.iter().enumerate() {
            acc += cos_angle(hi.0 - gamma_ref.0, hj.0 - gamma_ref.0) * w[i] * w[j];
        }
    }
    acc / n
}

#[inline]
fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        (num / den).clamp(0.0, 1.0)
    }
}

/// Concentration statistics of a configuration `(h_1..h_n, h_l)` measured
/// against a reference point (normally `Γ(z)`).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GammaStats {
    pub q_s: f64,
    pub q_2: f64,
    pub q_l: f64,
    pub beta_2: f64,
    pub beta_l: f64,
    /// `γ(h_s)` where `h_s` is the mean of the list.
    pub gamma_s: f64,
    /// `E_s γ_i^{p/2}`.
    pub mean_gamma_half: f64,
    /// `E_s γ_i^p`.
    pub mean_gamma_p: f64,
    /// `γ_l^p`.
    pub gamma_l_p: f64,
    /// `cos α_i` for `α_i = arg (h_i - Γ) conj(h_l - Γ)`.
    pub cos_alpha: Vec<f64>,
    /// `cos α_s` for the barycenter `h_s`.
    pub cos_alpha_s: f64,
}

impl GammaStats {
    /// `(γ_l^p + E_s γ_i^p) / 2`.
    pub fn mean_mass(&self) -> f64 {
        0.5 * (self.gamma_l_p + self.mean_gamma_p)
    }
}

pub fn mean_point(h: &[HalfPlanePoint]) -> HalfPlanePoint {
    let n = h.len() as f64;
    HalfPlanePoint::new_unchecked(h.iter().map(|x| x.0).sum::<Complex64>() / n)
}

pub fn gamma_statistics(
    h_list: &[HalfPlanePoint],
    h_l: HalfPlanePoint,
    gamma_ref: HalfPlanePoint,
    p: f64,
) -> Result<GammaStats> {
    if h_list.is_empty() {
        return Err(Error::param("h_list", "must be non-empty"));
    }
    if !(p >= 2.0) {
        return Err(Error::param("p", format!("{p} < 2")));
    }
    let n = h_list.len() as f64;
    let gammas: Vec<f64> = h_list.iter().map(|&h| gamma(h, gamma_ref)).collect();
    let gamma_l = gamma(h_l, gamma_ref);
    let h_s = mean_point(h_list);
    let gamma_s = gamma(h_s, gamma_ref);

    let mean_gamma_half = gammas.iter().map(|g| g.powf(0.5 * p)).sum::<f64>() / n;
    let mean_gamma_p = gammas.iter().map(|g| g.powf(p)).sum::<f64>() / n;
    let gamma_l_p = gamma_l.powf(p);

    let q_s = ratio(gamma_s.powf(0.5 * p), mean_gamma_half);
    let q_2 = ratio(mean_gamma_half, mean_gamma_p.sqrt());
    let q_l = ratio(2.0 * (gamma_l_p * mean_gamma_p).sqrt(), gamma_l_p + mean_gamma_p);

    let dl = h_l.0 - gamma_ref.0;
    let cos_alpha = h_list.iter().map(|h| cos_angle(h.0 - gamma_ref.0, dl)).collect();
    let cos_alpha_s = cos_angle(h_s.0 - gamma_ref.0, dl);

    Ok(GammaStats {
        q_s,
        q_2,
        q_l,
        beta_2: (1.0 - q_2 * q_2).max(0.0).sqrt(),
        beta_l: (1.0 - q_l * q_l).max(0.0).sqrt(),
        gamma_s,
        mean_gamma_half,
        mean_gamma_p,
        gamma_l_p,
        cos_alpha,
        cos_alpha_s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(re: f64, im: f64) -> HalfPlanePoint {
        HalfPlanePoint::new(re, im).unwrap()
    }

    #[test]
    fn barycenter_expansion_matches_direct_gamma() {
        let g = semicircle_transform(pt(0.3, 0.2));
        let cases = [
            vec![pt(0.1, 0.5), pt(-0.4, 1.2), pt(2.0, 0.05)],
            vec![pt(0.0, 1.0)],
            vec![pt(-3.0, 0.3), pt(3.0, 0.3), pt(0.2, 4.0), pt(0.7, 0.9)],
        ];
        for h in &cases {
            let direct = gamma(mean_point(h), g);
            assert!((barycenter_expansion(h, g) - direct).abs() <= 1e-10 * direct.max(1.0));
        }
    }

    #[test]
    fn construction_rejects_closed_lower_half_plane() {
        assert!(HalfPlanePoint::new(0.0, 0.0).is_err());
        assert!(HalfPlanePoint::new(1.0, -1e-300).is_err());
        assert!(HalfPlanePoint::new(f64::NAN, 1.0).is_err());
        assert!(HalfPlanePoint::new(0.0, 1e-300).is_ok());
    }

    #[test]
    fn gamma_examples() {
        assert_eq!(gamma(pt(0.0, 1.0), pt(0.0, 1.0)), 0.0);
        assert_eq!(gamma(pt(0.0, 2.0), pt(0.0, 1.0)), 0.5);
        assert_eq!(gamma(pt(1.0, 1.0), pt(0.0, 1.0)), 1.0);
    }

    #[test]
    fn hyperbolic_distance_examples() {
        assert_eq!(hyperbolic_distance(pt(0.0, 1.0), pt(0.0, 1.0)), 0.0);
        assert!((hyperbolic_distance(pt(0.0, 2.0), pt(0.0, 1.0)) - 1.25f64.acosh()).abs() < 1e-15);
        assert!((hyperbolic_distance(pt(0.0, 2.0), pt(0.0, 1.0)) - std::f64::consts::LN_2).abs() < 1e-15);
        assert!((hyperbolic_distance(pt(1.0, 1.0), pt(0.0, 1.0)) - 0.96242).abs() < 1e-5);
    }

    #[test]
    fn semicircle_at_i_and_near_zero() {
        let g = semicircle_transform(HalfPlanePoint::I);
        assert!(g.re().abs() < 1e-15);
        assert!((g.im() - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-15);
        let fp = g.value() + (HalfPlanePoint::I.value() + g.value()).inv();
        assert!(fp.norm() < 1e-15);

        let g0 = semicircle_transform(pt(0.0, 1e-9));
        assert!((g0.value() - Complex64::i()).norm() < 1e-8);
        assert!((g0.im() / PI - limiting_density(0.0, 1.0)).abs() < 1e-8);
    }

    #[test]
    fn semicircle_stays_in_half_plane_left_of_origin() {
        // The principal square root alone would give Im Γ < 0 here.
        let g = semicircle_transform(pt(-1.0, 1e-3));
        assert!(g.im() > 0.8);
        let g = semicircle_transform(pt(-50.0, 1e-6));
        assert!(g.im() > 0.0 && g.value().norm() < 0.05);
    }

    #[test]
    fn kesten_mckay_examples() {
        let z = pt(0.3, 0.4);
        assert!((kesten_mckay_transform(z, 1.0).value() - semicircle_transform(z).value()).norm() < 1e-15);
        let g = kesten_mckay_transform(HalfPlanePoint::I, 2.0);
        let gamma_i = (5f64.sqrt() - 1.0) / 2.0;
        assert!(g.re().abs() < 1e-15);
        assert!((g.im() - 1.0 / (1.0 + 2.0 * gamma_i)).abs() < 1e-15);
        assert!((g.im() - 0.44721).abs() < 1e-5);
    }

    #[test]
    fn limiting_density_examples() {
        assert!((limiting_density(0.0, 1.0) - 1.0 / PI).abs() < 1e-15);
        assert!((limiting_density(0.0, 2.0) - 1.0 / (2.0 * PI)).abs() < 1e-15);
        for rho in [0.5, 1.0, 1.5, 3.0] {
            assert_eq!(limiting_density(2.0, rho), 0.0);
            assert_eq!(limiting_density(-2.0, rho), 0.0);
        }
        // The ratio form of the density after inverting Γ⋆.
        for &(x, rho) in &[(0.7f64, 1.5f64), (-1.2, 0.8), (1.9, 2.0)] {
            let closed = 2.0 * rho * (4.0 - x * x).sqrt()
                / (PI * (rho * rho * (4.0 - x * x) + x * x * (2.0 - rho) * (2.0 - rho)));
            assert!((limiting_density(x, rho) - closed).abs() < 1e-14);
        }
    }

    #[test]
    fn limiting_mass_is_one_for_rho_up_to_two() {
        for rho in [0.3, 1.0, 1.5, 2.0] {
            assert!((limiting_mass(-2.0, 2.0, rho) - 1.0).abs() < 1e-9, "rho={rho}");
        }
    }

    #[test]
    fn euclidean_bounds_examples() {
        let (a, b) = hyperbolic_to_euclidean(pt(0.0, 1.0), pt(0.0, 1.0));
        assert_eq!((a, b), (0.0, 2.0));
        let (a, b) = hyperbolic_to_euclidean(pt(0.0, 2.0), pt(0.0, 1.0));
        assert_eq!((a, b), (2.0, 4.0));
    }

    #[test]
    fn gamma_statistics_degenerate_cases() {
        let z = pt(0.2, 0.1);
        let g = semicircle_transform(z);
        let h = pt(1.0, 0.5);
        let s = gamma_statistics(&[h, h, h], h, g, 2.0).unwrap();
        assert!((s.q_s - 1.0).abs() < 1e-12);
        assert!((s.q_2 - 1.0).abs() < 1e-12);
        assert!((s.q_l - 1.0).abs() < 1e-12);
        assert!(s.beta_2 < 1e-6 && s.beta_l < 1e-6);

        let s = gamma_statistics(&[g], h, g, 2.0).unwrap();
        assert_eq!(s.q_s, 0.0);
        assert_eq!(s.q_2, 0.0);
        assert_eq!(s.cos_alpha, vec![0.0]);
        assert!(gamma_statistics(&[], h, g, 2.0).is_err());
    }

    #[test]
    fn strip_membership() {
        let s = SpectralStrip::strip(1.5).unwrap();
        assert!(s.contains(pt(1.0, 0.5)));
        assert!(!s.contains(pt(1.0, 1.5)));
        assert!(!s.contains(pt(1.5, 0.5)));
        let b = SpectralStrip::borel(vec![(-1.0, -0.5), (0.5, 1.0)]).unwrap();
        assert!(b.contains(pt(0.7, 0.1)));
        assert!(!b.contains(pt(0.0, 0.1)));
        assert!(SpectralStrip::borel(vec![(0.0, 1.0), (0.5, 2.0)]).is_err());
        assert!(SpectralStrip::strip(2.0).is_err());
    }
}
