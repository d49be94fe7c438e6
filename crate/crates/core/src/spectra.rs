//! Spectral densities from root populations, distances to the limiting laws,
//! AC-mass lower bounds and the three replication pipelines.
//!
//! Grid points are independent jobs. Job `i` seeds its solver with
//! `key(seed, [GRID, i])`, so results do not depend on how many jobs run at
//! once. Inside a job the sweeps use the execution strategy of the `RdeSpec`.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::forbidden::{build_forbidden, ForbiddenSet};
use crate::halfplane::{kesten_mckay_transform, HalfPlanePoint, SpectralStrip};
use crate::offspring::{control_params, ControlParams, OffspringLaw, PotentialModel, SkeletonSplitLaw};
use crate::quad::{adaptive_simpson, trapezoid_weights};
use crate::rde::{eta_continuation, Estimate, LevelResult, RdeSpec};
use crate::rng::{self, tag};

/// Ratio between the largest and smallest level of a trace still called bounded.
pub const TRACE_FACTOR: f64 = 2.0;
/// `λ` of the event `E_λ` used when certifying a Poisson run.
pub const CERT_LAMBDA: f64 = 0.5;
/// A Poisson run is certified only when `α_p(CERT_LAMBDA)` is below this.
pub const CERT_ALPHA_MAX: f64 = 1.0;
/// Absolute slack added to `3 SE` when a pool is deterministic (zero SE) and
/// the only error left is the finite number of sweeps.
pub const DETERMINISTIC_FLOOR: f64 = 1e-8;

#[derive(Clone, Debug, Serialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    /// Quadrature weights on `grid`.
    pub weights: Vec<f64>,
    pub eta: f64,
    /// `E Im g_o(x + iη) / π`.
    pub f_values: Vec<f64>,
    pub se: Vec<f64>,
    pub converged: Vec<bool>,
}

impl DensityEstimate {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn all_converged(&self) -> bool {
        self.converged.iter().all(|c| *c)
    }

    /// `Σ w_i f_i`.
    pub fn mass(&self) -> f64 {
        self.weights.iter().zip(&self.f_values).map(|(w, f)| w * f).sum()
    }

    pub fn min_value(&self) -> f64 {
        self.f_values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest `|f - ref| / (3 SE + floor)` over the grid; at most 1 means
    /// agreement within three standard errors.
    pub fn max_normalized_deviation(&self, reference: impl Fn(f64) -> f64, floor: f64) -> f64 {
        self.grid
            .iter()
            .zip(self.f_values.iter().zip(&self.se))
            .map(|(&x, (&f, &s))| (f - reference(x)).abs() / (3.0 * s + floor))
            .fold(0.0, f64::max)
    }

    /// `x,eta,f,se` rows.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,eta,f,se\n");
        for i in 0..self.len() {
            out.push_str(&format!(
                "{:.10e},{:.6e},{:.10e},{:.6e}\n",
                self.grid[i], self.eta, self.f_values[i], self.se[i]
            ));
        }
        out
    }
}

/// All levels of the continuation at every grid point.
#[derive(Clone, Debug, Serialize)]
pub struct Scan {
    pub grid: Vec<f64>,
    pub weights: Vec<f64>,
    pub levels: Vec<Vec<LevelResult>>,
}

impl Scan {
    pub fn etas(&self) -> Vec<f64> {
        self.levels.first().map(|l| l.iter().map(|r| r.eta).collect()).unwrap_or_default()
    }

    /// Every grid point passed the drift test at the target level.
    pub fn converged(&self) -> bool {
        self.levels.iter().all(|ls| ls.last().is_some_and(|l| l.converged))
    }

    /// Density at level `k` of the schedule.
    pub fn density_at(&self, k: usize) -> DensityEstimate {
        let eta = self.levels.first().map_or(0.0, |l| l[k].eta);
        let mut f_values = Vec::with_capacity(self.grid.len());
        let mut se = Vec::with_capacity(self.grid.len());
        let mut converged = Vec::with_capacity(self.grid.len());
        for ls in &self.levels {
            let l = &ls[k];
            f_values.push((l.root_mean.im / PI).max(0.0));
            se.push(l.root.e_im.se / PI);
            converged.push(l.converged);
        }
        DensityEstimate { grid: self.grid.clone(), weights: self.weights.clone(), eta, f_values, se, converged }
    }

    pub fn density(&self) -> DensityEstimate {
        self.density_at(self.etas().len().saturating_sub(1))
    }

    fn integrate(&self, k: usize, pick: impl Fn(&LevelResult) -> Estimate) -> Estimate {
        let (mut m, mut v) = (0.0, 0.0);
        for (w, ls) in self.weights.iter().zip(&self.levels) {
            let e = pick(&ls[k]);
            m += w * e.mean;
            v += (w * e.se).powi(2);
        }
        Estimate { mean: m, se: v.sqrt() }
    }

    /// `∫ E|g_o|^p dλ` per level.
    pub fn simon_klein_trace(&self) -> Trace {
        Trace::new((0..self.etas().len()).map(|k| (self.etas()[k], self.integrate(k, |l| l.root_abs_p))).collect())
    }

    /// Grid average of `E (Im g_o)^{-p}` per level.
    pub fn inv_im_trace(&self) -> Trace {
        let total: f64 = self.weights.iter().sum();
        let etas = self.etas();
        Trace::new(
            (0..etas.len())
                .map(|k| {
                    let e = self.integrate(k, |l| l.root.e_inv_im_p);
                    (etas[k], Estimate { mean: e.mean / total, se: e.se / total })
                })
                .collect(),
        )
    }
}

/// A quantity followed down the `η` schedule.
#[derive(Clone, Debug, Serialize)]
pub struct Trace {
    pub points: Vec<(f64, Estimate)>,
}

impl Trace {
    pub fn new(points: Vec<(f64, Estimate)>) -> Self {
        Trace { points }
    }

    /// `max / min` of the level means.
    pub fn spread(&self) -> f64 {
        let (lo, hi) =
            self.points.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), (_, e)| (lo.min(e.mean), hi.max(e.mean)));
        if self.points.is_empty() {
            1.0
        } else {
            hi / lo
        }
    }

    /// Spread within [`TRACE_FACTOR`].
    pub fn bounded(&self) -> bool {
        self.spread() <= TRACE_FACTOR
    }

    /// `eta,integral_p,se,flag` rows; the flag marks levels within
    /// [`TRACE_FACTOR`] of the first one.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("eta,integral_p,se,flag\n");
        let first = self.points.first().map_or(1.0, |p| p.1.mean);
        for (eta, e) in &self.points {
            let r = e.mean / first;
            let ok = (1.0 / TRACE_FACTOR..=TRACE_FACTOR).contains(&r);
            out.push_str(&format!("{:.6e},{:.10e},{:.6e},{}\n", eta, e.mean, e.se, u8::from(ok)));
        }
        out
    }
}

/// The schedule of `spec` cut at `eta`, with `eta` as its last level.
pub fn schedule_to(spec: &[f64], eta: f64) -> Vec<f64> {
    let mut s: Vec<f64> = spec.iter().copied().filter(|e| *e > eta).collect();
    s.push(eta);
    s
}

/// Runs the continuation at every grid point with quadrature weights `weights`.
pub fn scan(spec: &RdeSpec, grid: &[f64], weights: &[f64]) -> Result<Scan> {
    if grid.len() != weights.len() {
        return Err(Error::param("grid", "grid and weights differ in length"));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::param("grid", "must be strictly increasing"));
    }
    spec.validate()?;
    let mut levels = Vec::with_capacity(grid.len());
    for (i, &x) in grid.iter().enumerate() {
        let mut job = spec.clone();
        job.seed = rng::key(spec.seed, &[tag::GRID, i as u64]);
        levels.push(eta_continuation(&job, x)?.levels);
    }
    Ok(Scan { grid: grid.to_vec(), weights: weights.to_vec(), levels })
}

/// Density at `x + iη` on `grid` (trapezoid weights).
pub fn density_on_grid(spec: &RdeSpec, grid: &[f64], eta: f64) -> Result<DensityEstimate> {
    if grid.is_empty() {
        return Ok(DensityEstimate {
            grid: vec![],
            weights: vec![],
            eta,
            f_values: vec![],
            se: vec![],
            converged: vec![],
        });
    }
    let mut s = spec.clone();
    s.eta_schedule = schedule_to(&spec.eta_schedule, eta);
    Ok(scan(&s, grid, &trapezoid_weights(grid))?.density())
}

/// Midpoints of `n` equal cells of `(-e, e)` and the cell width.
pub fn midpoint_grid(e: f64, n: usize) -> (Vec<f64>, Vec<f64>) {
    let h = 2.0 * e / n as f64;
    ((0..n).map(|i| -e + (i as f64 + 0.5) * h).collect(), vec![h; n])
}

/// Quadrature on `B ∩ (-e, e)`: each of `n` equal cells gets the measure of
/// its allowed part as weight and the centre of its longest allowed piece as
/// node. Cells with nothing allowed are dropped.
pub fn allowed_grid(e: f64, n: usize, forbidden: &ForbiddenSet) -> (Vec<f64>, Vec<f64>) {
    let pieces = match allowed_set(e, forbidden) {
        Ok(SpectralStrip::Borel { intervals, .. }) => intervals,
        _ => return (vec![], vec![]),
    };
    let h = 2.0 * e / n as f64;
    let mut grid = Vec::new();
    let mut weights = Vec::new();
    for i in 0..n {
        let (a, b) = (-e + i as f64 * h, -e + (i + 1) as f64 * h);
        let mut total = 0.0;
        let mut best = (0.0, 0.0);
        for &(lo, hi) in &pieces {
            let (lo, hi) = (lo.max(a), hi.min(b));
            if hi > lo {
                total += hi - lo;
                if hi - lo > best.1 - best.0 {
                    best = (lo, hi);
                }
            }
        }
        if total > 0.0 {
            grid.push(0.5 * (best.0 + best.1));
            weights.push(total);
        }
    }
    (grid, weights)
}

/// The allowed set `(-e, e)` minus the excluded intervals.
pub fn allowed_set(e: f64, forbidden: &ForbiddenSet) -> Result<SpectralStrip> {
    let mut out = Vec::new();
    let mut lo = -e;
    for &[a, b] in &forbidden.intervals {
        if b <= lo || a >= e {
            continue;
        }
        if a > lo {
            out.push((lo, a));
        }
        lo = lo.max(b);
    }
    if lo < e {
        out.push((lo, e));
    }
    SpectralStrip::borel(out)
}

/// `Im Γ⋆(x + iη) / π`, the reference density smoothed at the same `η`.
pub fn smoothed_reference(x: f64, eta: f64, rho: f64) -> f64 {
    let z = HalfPlanePoint::new_unchecked(Complex64::new(x, eta));
    kesten_mckay_transform(z, rho).im() / PI
}

/// Poisson-kernel convolution `∫ η/π / ((x-t)² + η²) μ⋆(dt)` by quadrature
/// (no atoms, so `ρ ≤ 2`).
pub fn poisson_smoothed_density(x: f64, eta: f64, rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 2.0) {
        return Err(Error::param("rho", "the quadrature covers 0 < ρ ≤ 2 only"));
    }
    // t = 2 sin θ removes the square-root edges.
    let f = |th: f64| {
        let (s, c) = th.sin_cos();
        let t = 2.0 * s;
        let den = rho * rho * c * c + (2.0 - rho) * (2.0 - rho) * s * s;
        let dens = if den == 0.0 { 0.0 } else { 2.0 * rho * c * c / (PI * den) };
        dens * eta / (PI * ((x - t).powi(2) + eta * eta))
    };
    // Split at the kernel peak so the adaptive rule sees it.
    let peak = (x / 2.0).clamp(-1.0, 1.0).asin();
    let h = PI / 2.0;
    Ok(adaptive_simpson(&f, -h, peak, 1e-12) + adaptive_simpson(&f, peak, h, 1e-12))
}

/// `(∫ |f - f_ref|^p, SE)` with the estimate's quadrature weights.
pub fn lp_distance(est: &DensityEstimate, reference: impl Fn(f64) -> f64, p: f64) -> (f64, f64) {
    let (mut s, mut v) = (0.0, 0.0);
    for i in 0..est.len() {
        let diff = (est.f_values[i] - reference(est.grid[i])).abs();
        s += est.weights[i] * diff.powf(p);
        // Delta method; at p = 1 the derivative is the sign.
        let deriv = if p == 1.0 { 1.0 } else { p * diff.powf(p - 1.0) };
        v += (est.weights[i] * deriv * est.se[i]).powi(2);
    }
    (s, v.sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct AcMassReport {
    /// `clamp(∫ f_ref - ∫ |f - f_ref|, 0, 1)`.
    pub lower_bound: f64,
    pub unclipped: f64,
    pub l1_distance_to_reference: f64,
    pub se: f64,
    pub reference_mass: f64,
    pub interval_or_set: SpectralStrip,
    pub eta: f64,
    /// `(η, unclipped bound)` per level, when known.
    pub eta_trace: Vec<(f64, f64)>,
}

/// AC-mass lower bound over the estimate's grid, which is assumed to cover
/// `set`.
pub fn ac_mass_lower_bound(est: &DensityEstimate, reference: impl Fn(f64) -> f64, set: SpectralStrip) -> AcMassReport {
    let ref_mass: f64 = est.grid.iter().zip(&est.weights).map(|(x, w)| w * reference(*x)).sum();
    let (l1, se) = lp_distance(est, &reference, 1.0);
    let unclipped = ref_mass - l1;
    AcMassReport {
        lower_bound: unclipped.clamp(0.0, 1.0),
        unclipped,
        l1_distance_to_reference: l1,
        se,
        reference_mass: ref_mass,
        interval_or_set: set,
        eta: est.eta,
        eta_trace: vec![(est.eta, unclipped)],
    }
}

/// AC-mass bound at the last level with the trace over all levels; the
/// reference is smoothed at each level's `η`.
pub fn ac_mass_from_scan(scan: &Scan, rho: f64, set: SpectralStrip) -> AcMassReport {
    let etas = scan.etas();
    let trace = (0..etas.len())
        .map(|k| {
            let d = scan.density_at(k);
            (etas[k], ac_mass_lower_bound(&d, |x| smoothed_reference(x, etas[k], rho), set.clone()).unclipped)
        })
        .collect();
    let d = scan.density();
    let mut r = ac_mass_lower_bound(&d, |x| smoothed_reference(x, d.eta, rho), set);
    r.eta_trace = trace;
    r
}

/// `∫_{-E}^{E} E|g_o|^p dλ` per level on a uniform midpoint grid.
pub fn simon_klein_diagnostic(spec: &RdeSpec, e: f64, grid_size: usize) -> Result<Trace> {
    if !(spec.p > 1.0) {
        return Err(Error::param("p", "must exceed 1"));
    }
    let (g, w) = midpoint_grid(e, grid_size);
    Ok(scan(spec, &g, &w)?.simon_klein_trace())
}

/// Shared solver settings of the pipelines.
#[derive(Clone, Debug, Serialize)]
pub struct ScanParams {
    pub e: f64,
    pub grid_size: usize,
    pub pool_size: usize,
    pub eta_schedule: Vec<f64>,
    /// Sweep cap per level above the target.
    pub sweeps: usize,
    /// Sweeps run at the target level.
    pub hold_sweeps: usize,
    pub p: f64,
    pub seed: u64,
}

impl ScanParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.e > 0.0 && self.e < 2.0) {
            return Err(Error::param("E", format!("{} is not in (0, 2)", self.e)));
        }
        if self.grid_size == 0 {
            return Err(Error::param("grid_size", "must be positive"));
        }
        Ok(())
    }

    fn apply(&self, spec: &mut RdeSpec) {
        spec.pool_size = self.pool_size;
        spec.eta_schedule = self.eta_schedule.clone();
        spec.max_iters = self.sweeps;
        spec.hold_iters = self.hold_sweeps;
        spec.p = self.p;
        spec.seed = self.seed;
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PoissonAcResult {
    pub d: f64,
    pub d_s: f64,
    pub pi_e: f64,
    pub epsilon: f64,
    pub forbidden: ForbiddenSet,
    pub control: ControlParams,
    pub density: DensityEstimate,
    pub acmass: AcMassReport,
    pub l1_se: f64,
    pub simon_klein: Trace,
    pub converged: bool,
    pub certified: bool,
}

/// Poisson(`d`) conditioned on survival: skeleton recursion with pending
/// trees, grid on `B(ε) ∩ (-E, E)` in the variable rescaled by `√d_s`,
/// compared with the semicircle.
pub fn poisson_ac(
    d: f64,
    epsilon: f64,
    k_max: usize,
    params: &ScanParams,
    tree_cap: usize,
    exec: crate::par::Exec,
) -> Result<PoissonAcResult> {
    params.validate().map_err(|e| e.at("poisson_ac"))?;
    let law = OffspringLaw::poisson(d).map_err(|e| e.at("law"))?;
    let split = SkeletonSplitLaw::new(law.clone(), law).map_err(|e| e.at("skeleton"))?;
    let d_s = split.d_s();
    let pi_e = split.extinction_prob();
    let forbidden = build_forbidden(epsilon, d_s, k_max).map_err(|e| e.at("forbidden_set"))?;
    let skel = OffspringLaw::empirical(split.skeleton_pmf()).map_err(|e| e.at("control"))?;
    let control = control_params(&skel, &skel, &PotentialModel::Zero, CERT_LAMBDA, params.p.max(2.0), 0, params.seed)
        .map_err(|e| e.at("control"))?;

    let mut spec = RdeSpec::skeleton(split, tree_cap);
    params.apply(&mut spec);
    spec.exec = exec;
    let (grid, weights) = allowed_grid(params.e, params.grid_size, &forbidden);
    let s = scan(&spec, &grid, &weights).map_err(|e| e.at("rde"))?;
    let set = allowed_set(params.e, &forbidden).map_err(|e| e.at("acmass"))?;
    let acmass = ac_mass_from_scan(&s, 1.0, set);
    let density = s.density();
    let converged = s.converged();
    let certified = converged && control.alpha <= CERT_ALPHA_MAX && acmass.unclipped > 0.0;
    Ok(PoissonAcResult {
        d,
        d_s,
        pi_e,
        epsilon,
        forbidden,
        control,
        l1_se: acmass.se,
        simon_klein: s.simon_klein_trace(),
        density,
        acmass,
        converged,
        certified,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct KsCoreResult {
    pub d: f64,
    pub root_mean: f64,
    pub bulk_mean: f64,
    pub density: DensityEstimate,
    pub simon_klein: Trace,
    pub inv_im: Trace,
    pub min_density: f64,
    pub converged: bool,
}

/// `UGW(Q_d)` with `Q_d = Poisson(d)` conditioned on at least two children:
/// root law `Q_d`, bulk law its size bias, on `(-E, E)`.
pub fn ks_core(d: f64, params: &ScanParams, exec: crate::par::Exec) -> Result<KsCoreResult> {
    params.validate().map_err(|e| e.at("ks_core"))?;
    let q = OffspringLaw::poisson(d).and_then(|l| l.conditioned(2)).map_err(|e| e.at("law"))?;
    let bulk = q.size_bias().map_err(|e| e.at("law"))?;
    let mut spec = RdeSpec::plain(bulk.clone(), q.clone(), PotentialModel::Zero);
    params.apply(&mut spec);
    spec.exec = exec;
    let (grid, weights) = midpoint_grid(params.e, params.grid_size);
    let s = scan(&spec, &grid, &weights).map_err(|e| e.at("rde"))?;
    let density = s.density();
    Ok(KsCoreResult {
        d,
        root_mean: q.mean(),
        bulk_mean: bulk.mean(),
        min_density: density.min_value(),
        simon_klein: s.simon_klein_trace(),
        inv_im: s.inv_im_trace(),
        converged: s.converged(),
        density,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct AndersonRun {
    pub d: u32,
    pub lambda: f64,
    pub lambda_over_sqrt_d: f64,
    pub density: DensityEstimate,
    pub inv_im: Trace,
    /// Largest `|f - f_KM| / (3 SE + floor)` at the target `η`.
    pub km_deviation: f64,
    pub converged: bool,
}

impl AndersonRun {
    pub fn eta_stable(&self) -> bool {
        self.inv_im.bounded()
    }
}

/// Anderson model on the `d`-regular tree (root `d`, bulk `d - 1`, scale
/// `d - 1`) for every pair of `ds × lambdas`, compared with `μ⋆` at
/// `ρ = d/(d-1)`.
pub fn anderson(
    ds: &[u32],
    lambdas: &[f64],
    disorder: crate::offspring::Disorder,
    params: &ScanParams,
    exec: crate::par::Exec,
) -> Result<Vec<AndersonRun>> {
    params.validate().map_err(|e| e.at("anderson"))?;
    let mut out = Vec::new();
    for (j, &d) in ds.iter().enumerate() {
        if d < 2 {
            return Err(Error::param("d", "needs d ≥ 2").at("anderson"));
        }
        let root = OffspringLaw::dirac(d).map_err(|e| e.at("law"))?;
        let bulk = OffspringLaw::dirac(d - 1).map_err(|e| e.at("law"))?;
        let scale = (d - 1) as f64;
        let rho = d as f64 / scale;
        for (k, &lambda) in lambdas.iter().enumerate() {
            let model = PotentialModel::Anderson { disorder, lambda, scale };
            let mut spec = RdeSpec::plain(bulk.clone(), root.clone(), model);
            params.apply(&mut spec);
            spec.seed = rng::key(params.seed, &[j as u64, k as u64]);
            spec.exec = exec;
            let (grid, weights) = midpoint_grid(params.e, params.grid_size);
            let s = scan(&spec, &grid, &weights).map_err(|e| e.at("rde"))?;
            let density = s.density();
            let eta = density.eta;
            out.push(AndersonRun {
                d,
                lambda,
                lambda_over_sqrt_d: lambda / (d as f64).sqrt(),
                km_deviation: density
                    .max_normalized_deviation(|x| smoothed_reference(x, eta, rho), DETERMINISTIC_FLOOR),
                inv_im: s.inv_im_trace(),
                converged: s.converged(),
                density,
            });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::halfplane::limiting_mass;
    use crate::par::Exec;

    fn regular3(pool: usize) -> RdeSpec {
        let mut s =
            RdeSpec::plain(OffspringLaw::dirac(2).unwrap(), OffspringLaw::dirac(3).unwrap(), PotentialModel::Zero);
        s.pool_size = pool;
        s.eta_schedule = vec![1.0, 0.3, 0.1, 0.03, 0.01];
        s.max_iters = 200;
        s.hold_iters = 3000;
        s.exec = Exec::Sequential;
        s
    }

    #[test]
    fn regular_tree_density_matches_smoothed_kesten_mckay() {
        let grid: Vec<f64> = (0..9).map(|i| -1.6 + 0.4 * i as f64).collect();
        let est = density_on_grid(&regular3(64), &grid, 0.01).unwrap();
        assert!(est.max_normalized_deviation(|x| smoothed_reference(x, 0.01, 1.5), DETERMINISTIC_FLOOR) <= 1.0);
        let (l1, se) = lp_distance(&est, |x| smoothed_reference(x, 0.01, 1.5), 1.0);
        assert!(l1 <= 3.0 * se + DETERMINISTIC_FLOOR);
        // Poisson-kernel convolution of μ⋆ by quadrature.
        for (x, f) in est.grid.iter().zip(&est.f_values) {
            assert!((f - poisson_smoothed_density(*x, 0.01, 1.5).unwrap()).abs() < 1e-7, "x = {x}");
        }
    }

    #[test]
    fn empty_grid_gives_empty_estimate() {
        let est = density_on_grid(&regular3(8), &[], 1e-3).unwrap();
        assert!(est.is_empty());
        assert_eq!(lp_distance(&est, |_| 1.0, 1.0).0, 0.0);
    }

    #[test]
    fn total_mass_is_one_on_a_wide_grid() {
        let mut s = regular3(8);
        s.eta_schedule = vec![1.0, 0.3];
        s.hold_iters = 400;
        // x = 2 tan θ on a uniform θ grid reaches |x| ≈ 2000.
        let n = 240;
        let grid: Vec<f64> = (0..n)
            .map(|i| {
                let th = -PI / 2.0 + 1e-3 + (PI - 2e-3) * i as f64 / (n - 1) as f64;
                2.0 * th.tan()
            })
            .collect();
        let est = density_on_grid(&s, &grid, 0.3).unwrap();
        assert!((est.mass() - 1.0).abs() < 1e-2, "mass {}", est.mass());
    }

    #[test]
    fn ac_bound_is_clipped_and_exact_for_the_reference() {
        let grid: Vec<f64> = (0..2001).map(|i| -1.999 + 1.999e-3 * i as f64).collect();
        let weights = trapezoid_weights(&grid);
        let f: Vec<f64> = grid.iter().map(|x| crate::halfplane::limiting_density(*x, 1.0)).collect();
        let est = DensityEstimate {
            se: vec![0.0; grid.len()],
            converged: vec![true; grid.len()],
            grid,
            weights,
            eta: 0.0,
            f_values: f,
        };
        let r = ac_mass_lower_bound(
            &est,
            |x| crate::halfplane::limiting_density(x, 1.0),
            SpectralStrip::strip(1.999).unwrap(),
        );
        let want = limiting_mass(-1.999, 1.999, 1.0);
        assert!((r.lower_bound - want).abs() < 1e-4, "{} vs {want}", r.lower_bound);
        let far = ac_mass_lower_bound(&est, |_| 0.0, SpectralStrip::strip(1.999).unwrap());
        assert_eq!(far.lower_bound, 0.0);
        assert!(far.unclipped < 0.0);
    }

    #[test]
    fn allowed_set_complements_the_forbidden_intervals() {
        let fs = build_forbidden(0.1, 10.0, 6).unwrap();
        let set = allowed_set(1.5, &fs).unwrap();
        for i in 0..3000 {
            let x = -1.5 + 1e-3 * i as f64 + 1e-4;
            assert_eq!(set.contains_real(x), !fs.is_excluded(x), "x = {x}");
        }
        let (g, w) = allowed_grid(1.5, 512, &fs);
        assert!(g.iter().all(|x| !fs.is_excluded(*x)));
        let measure: f64 = fs.intervals.iter().map(|[a, b]| (b.min(1.5) - a.max(-1.5)).max(0.0)).sum();
        assert!((w.iter().sum::<f64>() - (3.0 - measure)).abs() < 1e-12);
    }

    #[test]
    fn simon_klein_trace_of_regular_tree_is_constant() {
        let mut s = regular3(8);
        s.eta_schedule = vec![0.1, 0.05, 0.02];
        s.max_iters = 3000;
        s.min_iters = 3000;
        let tr = simon_klein_diagnostic(&s, 1.5, 16).unwrap();
        let (g, w) = midpoint_grid(1.5, 16);
        for (eta, e) in &tr.points {
            let want: f64 = g
                .iter()
                .zip(&w)
                .map(|(x, w)| {
                    w * kesten_mckay_transform(HalfPlanePoint::new(*x, *eta).unwrap(), 1.5).value().norm_sqr()
                })
                .sum();
            assert!((e.mean - want).abs() < 1e-6, "eta {eta}: {} vs {want}", e.mean);
        }
        assert!(tr.bounded());
    }
}
