//! Numerical checks of the asymmetric contraction machinery.
//!
//! A configuration is a list `h_1..h_n`, a fixed point `h_l`, perturbations
//! `u ∈ ℝ`, `v ∈ ℍ ∪ {0}` with `|u|, |v| ≤ λ`, and `z ∈ ℍ_E`. From it
//! `ĥ = -(z + (1+u)/n Σ h_i + v)^{-1}` and the random point `h_r`, equal to
//! each `h_i` with probability `1/(2n)` and to `ĥ` with probability `1/2`.
//! Expectations over `h_r` are exact sums over these `n+1` atoms.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halfplane::{
    angle, cos_plus, gamma, gamma_statistics, mean_point, semicircle_transform, GammaStats, HalfPlanePoint,
};
use crate::par::{map_indexed, Exec};
use crate::rng::{self, tag};

pub const CALIBRATION_VERSION: u32 = 1;
const TRIAL_BLOCK: usize = 1024;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContractionConfig {
    pub h_list: Vec<HalfPlanePoint>,
    pub h_l: HalfPlanePoint,
    pub u: f64,
    pub v: Complex64,
    pub z: HalfPlanePoint,
    pub p: f64,
    pub lambda: f64,
}

impl ContractionConfig {
    /// Unperturbed configuration (`u = v = λ = 0`).
    pub fn plain(h_list: Vec<HalfPlanePoint>, h_l: HalfPlanePoint, z: HalfPlanePoint, p: f64) -> Self {
        ContractionConfig { h_list, h_l, u: 0.0, v: Complex64::new(0.0, 0.0), z, p, lambda: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.h_list.is_empty() {
            return Err(Error::param("h_list", "must be non-empty"));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::param("lambda", "must lie in [0, 1)"));
        }
        if self.u.abs() > self.lambda || self.v.norm() > self.lambda || self.v.im < 0.0 {
            return Err(Error::param("u, v", "need |u|, |v| ≤ λ and Im v ≥ 0"));
        }
        if !(self.p >= 2.0) {
            return Err(Error::param("p", "must be at least 2"));
        }
        Ok(())
    }

    pub fn n(&self) -> usize {
        self.h_list.len()
    }

    /// `Γ(z)`.
    pub fn gamma_ref(&self) -> HalfPlanePoint {
        semicircle_transform(self.z)
    }

    pub fn h_s(&self) -> HalfPlanePoint {
        mean_point(&self.h_list)
    }

    pub fn stats(&self) -> GammaStats {
        gamma_statistics(&self.h_list, self.h_l, self.gamma_ref(), self.p).expect("validated configuration")
    }

    /// `(γ_l^p + E_s γ_i^p) / 2`.
    pub fn mass(&self) -> f64 {
        let g = self.gamma_ref();
        let mean: f64 = self.h_list.iter().map(|&h| gamma(h, g).powf(self.p)).sum::<f64>() / self.n() as f64;
        0.5 * (gamma(self.h_l, g).powf(self.p) + mean)
    }
}

pub fn h_hat(cfg: &ContractionConfig) -> HalfPlanePoint {
    let s = cfg.h_s().value() * (1.0 + cfg.u);
    HalfPlanePoint::new_unchecked(-(cfg.z.value() + s + cfg.v).inv())
}

/// `ĥ - Γ = (w - Γ) / ((z + w)(z + Γ))` with `w = (1+u) h_s + v`, free of
/// the cancellation in the direct difference when `ĥ` is close to `Γ`.
pub fn h_hat_minus_gamma(cfg: &ContractionConfig) -> Complex64 {
    let g = cfg.gamma_ref().value();
    let n = cfg.n() as f64;
    let ds = cfg.h_list.iter().map(|h| h.value() - g).sum::<Complex64>() / n;
    let w_minus_g = ds * (1.0 + cfg.u) + cfg.u * g + cfg.v;
    let w = w_minus_g + g;
    let z = cfg.z.value();
    w_minus_g / ((z + w) * (z + g))
}

/// The `n + 1` atoms of `h_r` with their probabilities.
pub fn h_r_atoms(cfg: &ContractionConfig) -> Vec<(f64, HalfPlanePoint)> {
    let w = 0.5 / cfg.n() as f64;
    let mut out: Vec<(f64, HalfPlanePoint)> = cfg.h_list.iter().map(|&h| (w, h)).collect();
    out.push((0.5, h_hat(cfg)));
    out
}

pub fn sample_h_r<R: Rng + ?Sized>(cfg: &ContractionConfig, rng: &mut R) -> HalfPlanePoint {
    if rng.random::<bool>() {
        h_hat(cfg)
    } else {
        cfg.h_list[rng.random_range(0..cfg.n())]
    }
}

/// `E γ^p((h_l + h_r)/2, Γ)`, summed over the atoms.
pub fn expected_mid_gamma_p(cfg: &ContractionConfig) -> f64 {
    let g = cfg.gamma_ref();
    h_r_atoms(cfg)
        .into_iter()
        .map(|(w, h)| w * gamma(HalfPlanePoint::new_unchecked(0.5 * (h.value() + cfg.h_l.value())), g).powf(cfg.p))
        .sum()
}

/// `E γ^p(h_r, Γ)`.
pub fn expected_gamma_r_p(cfg: &ContractionConfig) -> f64 {
    let g = cfg.gamma_ref();
    h_r_atoms(cfg).into_iter().map(|(w, h)| w * gamma(h, g).powf(cfg.p)).sum()
}

/// Random configurations: `|h|` log-uniform on `modulus_range`, `arg h`
/// uniform on `(0, π)`; a fraction `near_fixed_point` of the lists instead
/// sits at `Γ + Im Γ · r e^{iφ}` with `r` log-uniform on `[1e-6, 0.9]`.
/// `Re z` is uniform on `(-E, E)` and `Im z` log-uniform on `eta_range`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigSampler {
    pub e: f64,
    pub p: f64,
    pub lambda: f64,
    pub n_max: usize,
    pub modulus_range: (f64, f64),
    pub eta_range: (f64, f64),
    pub near_fixed_point: f64,
}

impl ConfigSampler {
    pub fn new(e: f64, p: f64, lambda: f64) -> Self {
        ConfigSampler {
            e,
            p,
            lambda,
            n_max: 16,
            modulus_range: (1e-3, 1e3),
            eta_range: (1e-4, 1.0),
            near_fixed_point: 0.25,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0 && self.e < 2.0) {
            return Err(Error::param("e", "must lie in (0, 2)"));
        }
        if self.n_max == 0 {
            return Err(Error::param("n_max", "must be positive"));
        }
        if !(0.0..1.0).contains(&self.lambda) {
            return Err(Error::param("lambda", "must lie in [0, 1)"));
        }
        if !(self.eta_range.0 > 0.0 && self.eta_range.0 <= self.eta_range.1) {
            return Err(Error::param("eta_range", "needs 0 < lo ≤ hi"));
        }
        if !(self.modulus_range.0 > 0.0 && self.modulus_range.0 <= self.modulus_range.1) {
            return Err(Error::param("modulus_range", "needs 0 < lo ≤ hi"));
        }
        if !(self.p >= 2.0) {
            return Err(Error::param("p", "must be at least 2"));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> ContractionConfig {
        let log_uniform = |rng: &mut R, lo: f64, hi: f64| (lo.ln() + rng.random::<f64>() * (hi / lo).ln()).exp();
        let re = self.e * (2.0 * rng.random::<f64>() - 1.0);
        let eta = log_uniform(rng, self.eta_range.0, self.eta_range.1);
        let z = HalfPlanePoint::new_unchecked(Complex64::new(re, eta));
        let g = semicircle_transform(z);
        let near = rng.random::<f64>() < self.near_fixed_point;
        let draw = |rng: &mut R| -> HalfPlanePoint {
            let c = if near {
                let r = log_uniform(rng, 1e-6, 0.9);
                g.value() + g.im() * Complex64::from_polar(r, PI * (2.0 * rng.random::<f64>() - 1.0))
            } else {
                let m = log_uniform(rng, self.modulus_range.0, self.modulus_range.1);
                Complex64::from_polar(m, PI * rng.random::<f64>())
            };
            if c.im > 0.0 {
                HalfPlanePoint::new_unchecked(c)
            } else {
                HalfPlanePoint::new_unchecked(Complex64::new(c.re, 1e-300))
            }
        };
        let n = rng.random_range(1..=self.n_max);
        let h_list: Vec<HalfPlanePoint> = (0..n).map(|_| draw(rng)).collect();
        let h_l = draw(rng);
        let u = self.lambda * (2.0 * rng.random::<f64>() - 1.0);
        let v = Complex64::from_polar(self.lambda * rng.random::<f64>(), PI * rng.random::<f64>());
        ContractionConfig { h_list, h_l, u, v, z, p: self.p, lambda: self.lambda }
    }
}

/// Runs `f` on `trials` sampled configurations, blocked for stream keying.
fn over_configs<T: Send>(
    sampler: &ConfigSampler,
    trials: usize,
    seed: u64,
    exec: Exec,
    f: impl Fn(&ContractionConfig, &mut rng::Stream) -> T + Sync + Send,
) -> Vec<T> {
    let nblocks = trials.div_ceil(TRIAL_BLOCK);
    map_indexed(exec, nblocks, |b| {
        let mut r = rng::stream(seed, &[tag::CONTRACTION, b as u64]);
        let len = TRIAL_BLOCK.min(trials - b * TRIAL_BLOCK);
        (0..len)
            .map(|_| {
                let c = sampler.sample(&mut r);
                f(&c, &mut r)
            })
            .collect::<Vec<T>>()
    })
    .into_iter()
    .flatten()
    .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct ContractionReport {
    pub trials: usize,
    /// `max E γ^p((h_l+h_r)/2) / mass` over configurations with positive mass.
    pub worst_ratio: f64,
    /// `1 - worst_ratio`: the largest `ε` consistent with every sample when `R = 0`.
    pub tightest_eps: f64,
    /// `min (mass - lhs)`.
    pub worst_margin: f64,
    /// Smallest `R` making `lhs ≤ (1 - eps_for_r) mass + R` hold on every sample.
    pub fitted_r: f64,
    pub eps_for_r: f64,
    #[serde(skip)]
    pub margins: Vec<f64>,
}

/// Exact `(lhs, mass)` for one configuration.
pub fn contraction_sides(cfg: &ContractionConfig) -> (f64, f64) {
    (expected_mid_gamma_p(cfg), cfg.mass())
}

/// Tests `E γ^p((h_l+h_r)/2) ≤ (1-ε) mass + R(λ)` on random configurations.
/// `R` is fitted for the supplied `eps_for_r`.
pub fn check_asymmetric_contraction(
    sampler: &ConfigSampler,
    trials: usize,
    eps_for_r: f64,
    seed: u64,
    exec: Exec,
) -> Result<ContractionReport> {
    sampler.validate()?;
    if trials == 0 {
        return Err(Error::param("trials", "must be positive"));
    }
    let sides = over_configs(sampler, trials, seed, exec, |c, _| contraction_sides(c));
    let mut worst_ratio: f64 = 0.0;
    let mut fitted_r: f64 = 0.0;
    let mut margins = Vec::with_capacity(trials);
    for (lhs, mass) in sides {
        if mass > 0.0 && mass.is_finite() {
            worst_ratio = worst_ratio.max(lhs / mass);
        }
        fitted_r = fitted_r.max(lhs - (1.0 - eps_for_r) * mass);
        margins.push(mass - lhs);
    }
    let worst_margin = margins.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ContractionReport {
        trials,
        worst_ratio,
        tightest_eps: 1.0 - worst_ratio,
        worst_margin,
        fitted_r,
        eps_for_r,
        margins,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ConvexityMargin {
    pub lhs: f64,
    pub bound: f64,
    pub q_product: f64,
    /// `bound - lhs`.
    pub margin: f64,
}

impl ConvexityMargin {
    pub fn holds(&self, rel: f64) -> bool {
        self.margin >= -rel * self.bound.abs().max(f64::MIN_POSITIVE)
    }
}

/// `E γ^p((h_r+h_l)/2) ≤ ((3 + Q_s Q_2 Q_l)/4) mass`, valid at `λ = 0`.
pub fn check_convexity_lemma(cfg: &ContractionConfig) -> Result<ConvexityMargin> {
    cfg.validate()?;
    if cfg.lambda != 0.0 {
        return Err(Error::param("lambda", "the convexity bound is checked at λ = 0"));
    }
    let st = cfg.stats();
    let q = st.q_s * st.q_2 * st.q_l;
    let lhs = expected_mid_gamma_p(cfg);
    let bound = 0.25 * (3.0 + q) * st.mean_mass();
    Ok(ConvexityMargin { lhs, bound, q_product: q, margin: bound - lhs })
}

#[derive(Clone, Debug, Serialize)]
pub struct ConvexityReport {
    pub trials: usize,
    pub violations: usize,
    /// `min margin / bound`.
    pub worst_relative_margin: f64,
}

pub fn check_convexity_random(
    sampler: &ConfigSampler,
    trials: usize,
    rel_slack: f64,
    seed: u64,
    exec: Exec,
) -> Result<ConvexityReport> {
    sampler.validate()?;
    let mut s = sampler.clone();
    s.lambda = 0.0;
    let margins = over_configs(&s, trials, seed, exec, |c, _| check_convexity_lemma(c).expect("λ = 0 sampler"));
    let violations = margins.iter().filter(|m| !m.holds(rel_slack)).count();
    let worst = margins.iter().filter(|m| m.bound > 0.0).map(|m| m.margin / m.bound).fold(f64::INFINITY, f64::min);
    Ok(ConvexityReport { trials, violations, worst_relative_margin: worst })
}

/// `(γ^q((1+u)h + v) - γ^q(h)) / (1 + γ^q(h))`.
pub fn regularity_excess(h: HalfPlanePoint, u: f64, v: Complex64, z: HalfPlanePoint, q: f64) -> f64 {
    let g = semicircle_transform(z);
    let moved = HalfPlanePoint::new_unchecked(h.value() * (1.0 + u) + v);
    let base = gamma(h, g).powf(q);
    (gamma(moved, g).powf(q) - base) / (1.0 + base)
}

/// `γ^p(μh + v) / [(1 + |v|^{2p}) (μ + 1/μ)^p (γ^p(h) + 1)]`; the constant
/// of the scaling bound is the supremum of this ratio.
pub fn regularity_scale_ratio(h: HalfPlanePoint, mu: f64, v: Complex64, z: HalfPlanePoint, p: f64) -> f64 {
    let g = semicircle_transform(z);
    let moved = HalfPlanePoint::new_unchecked(h.value() * mu + v);
    let num = gamma(moved, g).powf(p);
    num / ((1.0 + v.norm().powf(2.0 * p)) * (mu + 1.0 / mu).powf(p) * (gamma(h, g).powf(p) + 1.0))
}

#[derive(Clone, Debug, Serialize)]
pub struct RegularityFit {
    pub q: f64,
    pub lambdas: Vec<f64>,
    /// Supremum of [`regularity_excess`] at each `λ`.
    pub sups: Vec<f64>,
    /// `sup / λ`, the envelope slope.
    pub slopes: Vec<f64>,
    /// Supremum of [`regularity_scale_ratio`] over the same samples.
    pub scale_constant: f64,
    /// Exact identity check at `λ = 0`.
    pub identity_error: f64,
}

/// Sweeps `λ`, fitting the linear envelope of the perturbation bound and
/// the constant of the scaling bound on `trials` random `(h, u, v, z, μ)`.
pub fn check_regularity(
    sampler: &ConfigSampler,
    lambdas: &[f64],
    q: f64,
    trials: usize,
    seed: u64,
    exec: Exec,
) -> Result<RegularityFit> {
    sampler.validate()?;
    if !(q >= 1.0 && q <= sampler.p) {
        return Err(Error::param("q", "must lie in [1, p]"));
    }
    let mut sups = Vec::with_capacity(lambdas.len());
    let mut scale_constant: f64 = 0.0;
    let mut identity_error: f64 = 0.0;
    for (k, &lam) in lambdas.iter().enumerate() {
        let mut s = sampler.clone();
        s.lambda = lam;
        let vals = over_configs(&s, trials, rng::key(seed, &[k as u64]), exec, |c, r| {
            let h = c.h_list[0];
            let excess = regularity_excess(h, c.u, c.v, c.z, q);
            let ident = regularity_excess(h, 0.0, Complex64::new(0.0, 0.0), c.z, q).abs();
            let mu = 10f64.powf(4.0 * r.random::<f64>() - 2.0);
            let ratio = regularity_scale_ratio(h, mu, c.v, c.z, c.p);
            (excess, ident, ratio)
        });
        let mut sup: f64 = 0.0;
        for (e, i, r) in vals {
            sup = sup.max(e);
            identity_error = identity_error.max(i);
            if r.is_finite() {
                scale_constant = scale_constant.max(r);
            }
        }
        sups.push(sup);
    }
    let slopes = lambdas.iter().zip(&sups).map(|(l, s)| if *l > 0.0 { s / l } else { 0.0 }).collect();
    Ok(RegularityFit { q, lambdas: lambdas.to_vec(), sups, slopes, scale_constant, identity_error })
}

/// Pieces of `α̂ = θ + α_s + α_e` with `θ = arg ĥΓ`, all measured against `h_l`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AngleDecomposition {
    pub alpha_hat: f64,
    pub theta: f64,
    pub alpha_s: f64,
    pub alpha_e: f64,
    /// `|θ + α_s + α_e - α̂|` reduced to `[0, π]`.
    pub residual: f64,
}

fn wrap(x: f64) -> f64 {
    let r = x.rem_euclid(2.0 * PI);
    if r > PI {
        r - 2.0 * PI
    } else {
        r
    }
}

/// `None` when `h_s = Γ` or `h_l = Γ`, where the decomposition is void.
pub fn angle_decomposition(cfg: &ContractionConfig) -> Option<AngleDecomposition> {
    let g = cfg.gamma_ref().value();
    let hs = cfg.h_list.iter().map(|h| h.value() - g).sum::<Complex64>() / cfg.n() as f64;
    let dl = cfg.h_l.value() - g;
    if hs == Complex64::new(0.0, 0.0) || dl == Complex64::new(0.0, 0.0) {
        return None;
    }
    let hh = h_hat(cfg).value();
    let alpha_hat = angle(h_hat_minus_gamma(cfg), dl);
    let theta = angle(hh * g, Complex64::new(1.0, 0.0));
    let alpha_s = angle(hs, dl);
    let e = Complex64::new(1.0, 0.0) + (cfg.v + cfg.u * g) / ((1.0 + cfg.u) * hs);
    let alpha_e = angle(e, Complex64::new(1.0, 0.0));
    let residual = wrap(theta + alpha_s + alpha_e - alpha_hat).abs();
    Some(AngleDecomposition { alpha_hat, theta, alpha_s, alpha_e, residual })
}

/// `E cos⁺ α_rl = ½ cos⁺ α̂ + ½ E_s cos⁺ α_i`.
pub fn expected_cos_plus(cfg: &ContractionConfig) -> f64 {
    let g = cfg.gamma_ref().value();
    let dl = cfg.h_l.value() - g;
    let hat = cos_plus(angle(h_hat_minus_gamma(cfg), dl));
    let s: f64 = cfg.h_list.iter().map(|h| cos_plus(angle(h.value() - g, dl))).sum::<f64>() / cfg.n() as f64;
    0.5 * hat + 0.5 * s
}

#[derive(Clone, Debug, Serialize)]
pub struct NonAlignmentReport {
    pub trials: usize,
    /// Configurations with `Q_s Q_2 Q_l ≥ 1/2`.
    pub filtered: usize,
    /// Mass thresholds and `1 - max E cos⁺ α_rl` above each.
    pub thresholds: Vec<f64>,
    pub delta_hat: Vec<f64>,
    /// Smallest threshold whose `δ̂` is positive, with that `δ̂`.
    pub threshold: Option<f64>,
    pub fitted_delta: f64,
    /// Largest residual of the angle identity.
    pub identity_max_residual: f64,
    /// Configurations with `h_s = Γ` or `h_l = Γ`.
    pub degenerate: usize,
}

pub fn check_non_alignment(
    sampler: &ConfigSampler,
    trials: usize,
    thresholds: &[f64],
    seed: u64,
    exec: Exec,
) -> Result<NonAlignmentReport> {
    sampler.validate()?;
    let rows = over_configs(sampler, trials, seed, exec, |c, _| {
        let st = c.stats();
        let q = st.q_s * st.q_2 * st.q_l;
        (q, st.mean_mass(), expected_cos_plus(c), angle_decomposition(c).map(|a| a.residual))
    });
    let mut identity_max_residual: f64 = 0.0;
    let mut degenerate = 0;
    let mut kept: Vec<(f64, f64)> = Vec::new();
    for (q, mass, ec, res) in rows {
        match res {
            Some(r) => identity_max_residual = identity_max_residual.max(r),
            None => degenerate += 1,
        }
        if q >= 0.5 {
            kept.push((mass, ec));
        }
    }
    let delta_hat: Vec<f64> = thresholds
        .iter()
        .map(|&t| 1.0 - kept.iter().filter(|(m, _)| *m >= t).map(|(_, e)| *e).fold(0.0, f64::max))
        .collect();
    let pick = thresholds.iter().zip(&delta_hat).find(|(_, d)| **d > 0.0);
    Ok(NonAlignmentReport {
        trials,
        filtered: kept.len(),
        thresholds: thresholds.to_vec(),
        threshold: pick.map(|(t, _)| *t),
        fitted_delta: pick.map_or(0.0, |(_, d)| *d),
        delta_hat,
        identity_max_residual,
        degenerate,
    })
}

/// `ψ^{-1}(t) = t² / (Im Γ (Im Γ - t))` on `[0, Im Γ)`.
pub fn psi_inverse(t: f64, gamma_ref: HalfPlanePoint) -> f64 {
    let i = gamma_ref.im();
    t * t / (i * (i - t))
}

/// `ψ(r) = inf{|h - Γ| : γ(h, Γ) ≥ r}`, from the Euclidean circle
/// `γ(·, Γ) = r`: centre `Re Γ + i Im Γ (1 + r/2)`, radius
/// `Im Γ √((1 + r/2)² - 1)`. `Γ` lies inside, at distance `r Im Γ / 2`
/// from the centre.
pub fn psi_geometric(r: f64, gamma_ref: HalfPlanePoint) -> f64 {
    let i = gamma_ref.im();
    let c = 1.0 + 0.5 * r;
    i * (c * c - 1.0).sqrt() - 0.5 * r * i
}

/// The point `h*` on the vertical through `Γ` with `γ(h*, Γ) = r`.
pub fn psi_witness(r: f64, gamma_ref: HalfPlanePoint) -> HalfPlanePoint {
    let t = psi_geometric(r, gamma_ref);
    HalfPlanePoint::new_unchecked(Complex64::new(gamma_ref.re(), gamma_ref.im() - t))
}

/// Residuals of `β_2² + Q_2² = 1`, `max{a,b} = mass (1+β_l)` and
/// `min{a,b} = mass (1-β_l)` for `a = γ_l^p`, `b = E_s γ_i^p`.
pub fn beta_identity_residuals(st: &GammaStats) -> [f64; 3] {
    let (a, b) = (st.gamma_l_p, st.mean_gamma_p);
    let m = st.mean_mass();
    let scale = m.max(f64::MIN_POSITIVE);
    let r1 = if st.mean_gamma_p > 0.0 { (st.beta_2 * st.beta_2 + st.q_2 * st.q_2 - 1.0).abs() } else { 0.0 };
    [r1, (a.max(b) - m * (1.0 + st.beta_l)).abs() / scale, (a.min(b) - m * (1.0 - st.beta_l)).abs() / scale]
}

/// `θ_0 = min over the grid of min(arg Γ, π - arg Γ)` on `ℍ_E`.
pub fn theta0_witness(e: f64, re_points: usize, etas: &[f64]) -> f64 {
    let mut best = f64::INFINITY;
    for k in 0..re_points {
        let re = if re_points == 1 { 0.0 } else { -e + 2.0 * e * k as f64 / (re_points - 1) as f64 };
        for &eta in etas {
            let g = semicircle_transform(HalfPlanePoint::new_unchecked(Complex64::new(re, eta)));
            let a = g.im().atan2(g.re());
            best = best.min(a.min(PI - a));
        }
    }
    best
}

/// `θ_0 = arccos(E/2)`, the value of `arg Γ(±E + i0)`.
pub fn theta0_closed_form(e: f64) -> f64 {
    (e / 2.0).acos()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub version: u32,
    pub lemma: String,
    pub params: serde_json::Value,
    pub trials: usize,
    pub worst_margin: f64,
    pub fitted_constants: BTreeMap<String, f64>,
}

impl CalibrationReport {
    pub fn new(lemma: &str, params: serde_json::Value, trials: usize, worst_margin: f64) -> Self {
        CalibrationReport {
            version: CALIBRATION_VERSION,
            lemma: lemma.to_string(),
            params,
            trials,
            worst_margin,
            fitted_constants: BTreeMap::new(),
        }
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.fitted_constants.insert(name.to_string(), value);
        self
    }
}

/// Frozen calibration baselines shipped with the crate.
pub fn baseline() -> Vec<CalibrationReport> {
    serde_json::from_str(include_str!("../calibration/baseline.json")).expect("baseline file parses")
}

pub fn baseline_constant(lemma: &str, name: &str) -> Option<f64> {
    baseline().into_iter().find(|r| r.lemma == lemma).and_then(|r| r.fitted_constants.get(name).copied())
}

/// Runs every check for `(E, p)` and collects calibration reports.
pub fn calibrate(e: f64, p: f64, trials: usize, seed: u64, exec: Exec) -> Result<Vec<CalibrationReport>> {
    let params = serde_json::json!({ "e": e, "p": p, "seed": seed });
    let s0 = ConfigSampler::new(e, p, 0.0);
    let ace = check_asymmetric_contraction(&s0, trials, 0.0, seed, exec)?;
    let conv = check_convexity_random(&s0, trials, 1e-10, rng::key(seed, &[1]), exec)?;
    let lambdas = [0.01, 0.02, 0.05];
    let reg = check_regularity(&s0, &lambdas, p, trials, rng::key(seed, &[2]), exec)?;
    let thresholds = [0.0, 1e-2, 1.0, 1e2, 1e4];
    let na = check_non_alignment(&s0, trials, &thresholds, rng::key(seed, &[3]), exec)?;
    let mut out = vec![
        CalibrationReport::new("asymmetric_contraction", params.clone(), trials, ace.worst_margin)
            .with("eps", ace.tightest_eps)
            .with("worst_ratio", ace.worst_ratio),
        CalibrationReport::new("convexity", params.clone(), trials, conv.worst_relative_margin)
            .with("violations", conv.violations as f64),
        CalibrationReport::new("non_alignment", params.clone(), trials, na.fitted_delta)
            .with("delta_hat", na.fitted_delta)
            .with("threshold", na.threshold.unwrap_or(f64::NAN))
            .with("identity_residual", na.identity_max_residual),
    ];
    let mut r = CalibrationReport::new("regularity", params, trials, -reg.identity_error)
        .with("scale_constant", reg.scale_constant);
    for (l, s) in lambdas.iter().zip(&reg.slopes) {
        r = r.with(&format!("slope_{l}"), *s);
    }
    out.push(r);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(re: f64, im: f64) -> HalfPlanePoint {
        HalfPlanePoint::new(re, im).unwrap()
    }

    #[test]
    fn fixed_point_and_single_step() {
        let z = pt(0.4, 0.05);
        let g = semicircle_transform(z);
        let cfg = ContractionConfig::plain(vec![g, g, g], g, z, 2.0);
        assert!((h_hat(&cfg).value() - g.value()).norm() < 1e-12);
        assert!(expected_mid_gamma_p(&cfg) < 1e-20 && cfg.mass() < 1e-20);

        let h1 = pt(-1.3, 0.4);
        let cfg = ContractionConfig::plain(vec![h1], h1, z, 2.0);
        let hh = h_hat(&cfg);
        assert!((hh.value() + (z.value() + h1.value()).inv()).norm() < 1e-15);
        assert!(gamma(hh, g) <= gamma(h1, g));
    }

    #[test]
    fn h_r_frequencies() {
        let z = pt(0.1, 0.3);
        let cfg = ContractionConfig::plain(vec![pt(1.0, 1.0)], pt(0.0, 2.0), z, 2.0);
        let mut r = rng::stream(5, &[]);
        let m = 100_000;
        let hits = (0..m).filter(|_| sample_h_r(&cfg, &mut r) == cfg.h_list[0]).count() as f64 / m as f64;
        assert!((hits - 0.5).abs() <= 3.0 * (0.25 / m as f64).sqrt());
    }

    #[test]
    fn psi_round_trip() {
        let g = semicircle_transform(pt(0.7, 0.01));
        for k in 1..100 {
            let t = g.im() * k as f64 / 100.0;
            assert!((psi_geometric(psi_inverse(t, g), g) - t).abs() < 1e-10);
        }
        let h = psi_witness(2.5, g);
        assert!((gamma(h, g) - 2.5).abs() < 1e-10);
    }

    #[test]
    fn theta0_matches_closed_form() {
        let w = theta0_witness(1.5, 61, &[1e-6, 1e-3, 0.1, 1.0]);
        assert!(w > 0.0 && (w - theta0_closed_form(1.5)).abs() < 1e-3);
    }

    #[test]
    fn degenerate_convexity_cases() {
        let z = pt(0.2, 0.1);
        let g = semicircle_transform(z);
        let c = check_convexity_lemma(&ContractionConfig::plain(vec![g], pt(1.0, 1.0), z, 2.0)).unwrap();
        assert!(c.holds(1e-10));
        let h = pt(-0.5, 0.8);
        let c = check_convexity_lemma(&ContractionConfig::plain(vec![h, h], h, z, 2.0)).unwrap();
        assert!((c.q_product - 1.0).abs() < 1e-12 && c.holds(1e-10));
    }
}
