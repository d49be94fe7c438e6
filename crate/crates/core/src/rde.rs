//! Population dynamics for the resolvent recursion
//! `g = -(z + (1/d) Σ_{i≤N} g_i + v)^{-1}`.
//!
//! A pool of `M` samples stands in for the law of `g(z)`. Each sweep builds a
//! fresh pool from the previous one (synchronous generations, resampling with
//! replacement). Slots are grouped in blocks of [`BLOCK`] and each block
//! draws from its own stream keyed by `(seed, generation, block)`.

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halfplane::{kesten_mckay_transform, semicircle_transform, HalfPlanePoint};
use crate::offspring::{OffspringLaw, PotentialModel, PotentialSampler, SkeletonSplitLaw};
use crate::par::{map_indexed, Exec};
use crate::rng::{self, tag, Stream};
use crate::tree::pending_sum;

pub const BLOCK: usize = 1024;
pub const DEFAULT_POOL: usize = 100_000;
pub const DEFAULT_SWEEPS: usize = 200;
pub const CHECKPOINT_EVERY: usize = 20;
/// Jackknife blocks for standard errors.
pub const JACKKNIFE_BLOCKS: usize = 32;
/// Drift tolerance of the convergence test, in standard errors.
pub const DRIFT_SE: f64 = 3.0;
/// Relative drift always accepted, so exact collapses count as converged.
pub const DRIFT_REL_FLOOR: f64 = 1e-3;

#[derive(Clone, Debug)]
pub struct Population {
    pub samples: Vec<HalfPlanePoint>,
    pub z: HalfPlanePoint,
    pub generation: u64,
    /// Pending trees redrawn because they exceeded the vertex cap.
    pub pending_redraws: u64,
}

impl Population {
    /// Pool of `m` copies of `i`.
    pub fn new(z: HalfPlanePoint, m: usize) -> Result<Self> {
        Self::filled(z, m, HalfPlanePoint::I)
    }

    pub fn filled(z: HalfPlanePoint, m: usize, g: HalfPlanePoint) -> Result<Self> {
        if m < 2 {
            return Err(Error::param("pool_size", "must be at least 2"));
        }
        Ok(Population { samples: vec![g; m], z, generation: 0, pending_redraws: 0 })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Moves the pool to a new spectral parameter (warm start).
    pub fn at(mut self, z: HalfPlanePoint) -> Self {
        self.z = z;
        self
    }

    pub fn mean(&self) -> Complex64 {
        self.samples.iter().map(|g| g.value()).sum::<Complex64>() / self.len() as f64
    }
}

/// Where the additive term `v` comes from.
#[derive(Clone, Debug)]
pub enum RdePotential {
    Model(PotentialModel),
    /// Skeleton recursion: offspring are the skeleton children and `v(z)` is
    /// the resolvent sum of the pending extinct trees.
    PendingTree {
        split: Box<SkeletonSplitLaw>,
        cap: usize,
    },
}

#[derive(Clone, Debug)]
pub struct RdeSpec {
    /// `P`; ignored by the skeleton variant, which draws from its split.
    pub law: OffspringLaw,
    /// `P⋆`.
    pub root_law: OffspringLaw,
    pub scale_d: f64,
    pub potential: RdePotential,
    pub pool_size: usize,
    /// Sweeps per `η` level.
    pub max_iters: usize,
    /// Sweeps before the convergence test may stop a level early.
    pub min_iters: usize,
    /// Sweeps always run at the last level (the slow mode near the real
    /// axis relaxes at rate about `1 - η` per sweep).
    pub hold_iters: usize,
    pub eta_schedule: Vec<f64>,
    pub p: f64,
    pub seed: u64,
    pub exec: Exec,
}

impl RdeSpec {
    /// Plain recursion with `scale_d = E N`.
    pub fn plain(law: OffspringLaw, root_law: OffspringLaw, potential: PotentialModel) -> Self {
        let scale_d = law.mean();
        RdeSpec {
            law,
            root_law,
            scale_d,
            potential: RdePotential::Model(potential),
            pool_size: DEFAULT_POOL,
            max_iters: DEFAULT_SWEEPS,
            min_iters: 2 * CHECKPOINT_EVERY,
            hold_iters: 0,
            eta_schedule: vec![1e-2],
            p: 2.0,
            seed: 0,
            exec: Exec::default(),
        }
    }

    /// Skeleton recursion with `scale_d = d_s = E N^s`.
    pub fn skeleton(split: SkeletonSplitLaw, cap: usize) -> Self {
        let mut s = Self::plain(split.base().clone(), split.root().clone(), PotentialModel::Zero);
        s.scale_d = split.d_s();
        s.potential = RdePotential::PendingTree { split: Box::new(split), cap };
        s
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale_d > 0.0 && self.scale_d.is_finite()) {
            return Err(Error::param("scale_d", "must be positive"));
        }
        if self.pool_size < 2 {
            return Err(Error::param("pool_size", "must be at least 2"));
        }
        if self.max_iters == 0 {
            return Err(Error::param("max_iters", "must be positive"));
        }
        if !(self.p >= 1.0) {
            return Err(Error::param("p", "must be at least 1"));
        }
        if self.eta_schedule.is_empty() || self.eta_schedule.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(Error::param("eta_schedule", "needs positive entries"));
        }
        if self.eta_schedule.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::param("eta_schedule", "must be strictly decreasing"));
        }
        if let RdePotential::Model(m) = &self.potential {
            m.validate()?;
        }
        Ok(())
    }

    /// Reference point for the bulk: `Γ(z)`.
    pub fn bulk_reference(&self, z: HalfPlanePoint) -> HalfPlanePoint {
        semicircle_transform(z)
    }

    /// Reference point for the root: `Γ⋆(z)` with `ρ = E N⋆ / scale_d`.
    pub fn root_reference(&self, z: HalfPlanePoint) -> HalfPlanePoint {
        let rho = match &self.potential {
            RdePotential::PendingTree { split, .. } => split.d_s_root() / self.scale_d,
            RdePotential::Model(_) => self.root_law.mean() / self.scale_d,
        };
        kesten_mckay_transform(z, rho)
    }
}

/// Geometric ladder of `levels` values from `start` down to `end`.
pub fn geometric_schedule(start: f64, end: f64, levels: usize) -> Vec<f64> {
    if levels <= 1 {
        return vec![end];
    }
    let r = (end / start).powf(1.0 / (levels - 1) as f64);
    (0..levels).map(|i| if i + 1 == levels { end } else { start * r.powi(i as i32) }).collect()
}

#[derive(Clone, Copy)]
enum Step {
    Bulk,
    Root,
}

fn sweep(pop: &Population, spec: &RdeSpec, step: Step) -> Result<Population> {
    let m = pop.len();
    let z = pop.z;
    let zc = z.value();
    let inv_d = 1.0 / spec.scale_d;
    let prev = &pop.samples;
    let generation = pop.generation;
    let nblocks = m.div_ceil(BLOCK);
    let stream_tag = match step {
        Step::Bulk => tag::EVOLVE,
        Step::Root => tag::ROOT,
    };
    let blocks = map_indexed(spec.exec, nblocks, |b| -> Result<(Vec<HalfPlanePoint>, u64)> {
        let mut r: Stream = rng::stream(spec.seed, &[stream_tag, generation, b as u64]);
        let len = BLOCK.min(m - b * BLOCK);
        let mut out = Vec::with_capacity(len);
        let mut redraws = 0u64;
        for _ in 0..len {
            let (n, v) = match &spec.potential {
                RdePotential::Model(model) => {
                    let is_root = matches!(step, Step::Root);
                    let law = if is_root { &spec.root_law } else { &spec.law };
                    let n = law.sample(&mut r);
                    let v = if model.is_zero() { 0.0 } else { model.sample_potential(n, is_root, &mut r) };
                    (n, Complex64::new(v, 0.0))
                }
                RdePotential::PendingTree { split, cap } => {
                    let (ns, ne) = match step {
                        Step::Bulk => split.sample(&mut r)?,
                        Step::Root => split.sample_root(&mut r)?,
                    };
                    let (v, k) = pending_sum(split, ne, z, spec.scale_d, *cap, &mut r)?;
                    redraws += k;
                    (ns, v)
                }
            };
            let mut s = Complex64::new(0.0, 0.0);
            for _ in 0..n {
                s += prev[r.random_range(0..m)].value();
            }
            let g = -(zc + s * inv_d + v).inv();
            if !(g.im > 0.0 && g.re.is_finite()) {
                return Err(Error::LeftHalfPlane { generation: generation + 1 });
            }
            out.push(HalfPlanePoint::new_unchecked(g));
        }
        Ok((out, redraws))
    });
    let mut samples = Vec::with_capacity(m);
    let mut redraws = pop.pending_redraws;
    for blk in blocks {
        let (v, k) = blk?;
        samples.extend(v);
        redraws += k;
    }
    Ok(Population { samples, z, generation: generation + 1, pending_redraws: redraws })
}

/// `iters` synchronous bulk sweeps.
pub fn evolve(mut pop: Population, spec: &RdeSpec, iters: usize) -> Result<Population> {
    for _ in 0..iters {
        pop = sweep(&pop, spec, Step::Bulk)?;
    }
    Ok(pop)
}

/// One root step from a converged bulk pool: samples of `g_o(z)`.
pub fn evolve_root(pop: &Population, spec: &RdeSpec) -> Result<Population> {
    sweep(pop, spec, Step::Root)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
}

impl Estimate {
    pub fn is_finite(&self) -> bool {
        self.mean.is_finite() && self.se.is_finite()
    }
}

/// Mean with a delete-one-block jackknife standard error.
pub fn jackknife_mean(xs: &[f64]) -> Estimate {
    let n = xs.len();
    let total: f64 = xs.iter().sum();
    let mean = total / n as f64;
    let b = JACKKNIFE_BLOCKS.min(n);
    if b < 2 {
        return Estimate { mean, se: 0.0 };
    }
    let mut loo = Vec::with_capacity(b);
    for k in 0..b {
        let (lo, hi) = (k * n / b, (k + 1) * n / b);
        let s: f64 = xs[lo..hi].iter().sum();
        loo.push((total - s) / (n - (hi - lo)) as f64);
    }
    let bar = loo.iter().sum::<f64>() / b as f64;
    let var = loo.iter().map(|x| (x - bar).powi(2)).sum::<f64>() * (b - 1) as f64 / b as f64;
    Estimate { mean, se: var.sqrt() }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    Gamma,
    GammaStar,
    Other,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentReport {
    pub p: f64,
    pub reference: HalfPlanePoint,
    pub reference_kind: Reference,
    /// `E γ^p(g, ref)`.
    pub e_gamma_p: Estimate,
    /// `E |g - ref|^p`.
    pub e_abs_diff_p: Estimate,
    /// `E (Im g)^{-p}`.
    pub e_inv_im_p: Estimate,
    /// `E Im g`, for density read-outs.
    pub e_im: Estimate,
}

pub fn moment_report(pop: &Population, reference: HalfPlanePoint, p: f64) -> MomentReport {
    moment_report_kind(pop, reference, Reference::Other, p)
}

pub fn moment_report_kind(pop: &Population, reference: HalfPlanePoint, kind: Reference, p: f64) -> MomentReport {
    let r = reference.value();
    let ri = reference.im();
    let mut ga = Vec::with_capacity(pop.len());
    let mut ad = Vec::with_capacity(pop.len());
    let mut ii = Vec::with_capacity(pop.len());
    let mut im = Vec::with_capacity(pop.len());
    for g in &pop.samples {
        let diff = (g.value() - r).norm();
        let gam = diff * diff / (g.im() * ri);
        ga.push(gam.powf(p));
        ad.push(diff.powf(p));
        ii.push(g.im().powf(-p));
        im.push(g.im());
    }
    MomentReport {
        p,
        reference,
        reference_kind: kind,
        e_gamma_p: jackknife_mean(&ga),
        e_abs_diff_p: jackknife_mean(&ad),
        e_inv_im_p: jackknife_mean(&ii),
        e_im: jackknife_mean(&im),
    }
}

fn drifted(a: Estimate, b: Estimate) -> bool {
    if !(a.is_finite() && b.is_finite()) {
        return true;
    }
    let tol = DRIFT_SE * (a.se * a.se + b.se * b.se).sqrt() + DRIFT_REL_FLOOR * a.mean.abs().max(b.mean.abs());
    (a.mean - b.mean).abs() > tol
}

/// `true` when no reported moment moved by more than the drift tolerance.
pub fn is_stable(prev: &MomentReport, cur: &MomentReport) -> bool {
    !(drifted(prev.e_gamma_p, cur.e_gamma_p)
        || drifted(prev.e_abs_diff_p, cur.e_abs_diff_p)
        || drifted(prev.e_inv_im_p, cur.e_inv_im_p))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CsvRow {
    pub re_z: f64,
    pub eta: f64,
    pub generation: u64,
    pub report: MomentReport,
    pub converged: bool,
}

pub const CSV_HEADER: &str =
    "re_z,eta,generation,p,e_gamma_p,se_gamma_p,e_abs_diff_p,se_abs_diff_p,e_inv_im_p,se_inv_im_p,converged";

impl CsvRow {
    pub fn to_csv(&self) -> String {
        let r = &self.report;
        format!(
            "{},{},{},{},{:e},{:e},{:e},{:e},{:e},{:e},{}",
            self.re_z,
            self.eta,
            self.generation,
            r.p,
            r.e_gamma_p.mean,
            r.e_gamma_p.se,
            r.e_abs_diff_p.mean,
            r.e_abs_diff_p.se,
            r.e_inv_im_p.mean,
            r.e_inv_im_p.se,
            u8::from(self.converged)
        )
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelResult {
    pub eta: f64,
    pub sweeps: usize,
    pub converged: bool,
    pub bulk: MomentReport,
    pub root: MomentReport,
    /// `E |g_o|^p`.
    pub root_abs_p: Estimate,
    /// `E g_o(z)` from the root pool.
    pub root_mean: Complex64,
    pub rows: Vec<CsvRow>,
}

#[derive(Clone, Debug)]
pub struct Continuation {
    pub re_z: f64,
    pub levels: Vec<LevelResult>,
    pub pool: Population,
    pub root_pool: Population,
}

impl Continuation {
    pub fn last(&self) -> &LevelResult {
        self.levels.last().expect("schedule is non-empty")
    }

    pub fn converged(&self) -> bool {
        self.levels.iter().all(|l| l.converged)
    }
}

/// Bulk and root read-outs at one checkpoint.
#[derive(Clone)]
struct Snapshot {
    bulk: MomentReport,
    root: MomentReport,
    abs_p: Estimate,
    root_mean: Complex64,
}

impl Snapshot {
    fn take(bulk: &MomentReport, root_pool: &Population, rref: HalfPlanePoint, p: f64) -> Self {
        let abs_p: Vec<f64> = root_pool.samples.iter().map(|g| g.value().norm().powf(p)).collect();
        Snapshot {
            bulk: bulk.clone(),
            root: moment_report_kind(root_pool, rref, Reference::GammaStar, p),
            abs_p: jackknife_mean(&abs_p),
            root_mean: root_pool.mean(),
        }
    }

    /// Average over checkpoints. Successive pools are correlated over about
    /// `1/η` sweeps, so the spread between checkpoints counts as `n_eff`
    /// independent draws.
    fn average(snaps: &[Snapshot], n_eff: f64) -> Snapshot {
        let avg = |f: &dyn Fn(&Snapshot) -> Estimate| -> Estimate {
            let n = snaps.len() as f64;
            let mean = snaps.iter().map(|s| f(s).mean).sum::<f64>() / n;
            let within = snaps.iter().map(|s| f(s).se.powi(2)).sum::<f64>() / n;
            let between = if snaps.len() > 1 {
                snaps.iter().map(|s| (f(s).mean - mean).powi(2)).sum::<f64>() / (n - 1.0)
            } else {
                0.0
            };
            Estimate { mean, se: (between / n_eff + within / n).sqrt() }
        };
        let report = |f: &dyn Fn(&Snapshot) -> &MomentReport| -> MomentReport {
            let first = f(&snaps[0]);
            MomentReport {
                p: first.p,
                reference: first.reference,
                reference_kind: first.reference_kind,
                e_gamma_p: avg(&|s| f(s).e_gamma_p),
                e_abs_diff_p: avg(&|s| f(s).e_abs_diff_p),
                e_inv_im_p: avg(&|s| f(s).e_inv_im_p),
                e_im: avg(&|s| f(s).e_im),
            }
        };
        Snapshot {
            bulk: report(&|s| &s.bulk),
            root: report(&|s| &s.root),
            abs_p: avg(&|s| s.abs_p),
            root_mean: snaps.iter().map(|s| s.root_mean).sum::<Complex64>() / snaps.len() as f64,
        }
    }
}

/// Anneals `Im z` down the schedule at fixed `Re z`, warm-starting each
/// level from the previous pool, and reports bulk and root moments per level.
pub fn eta_continuation(spec: &RdeSpec, re_z: f64) -> Result<Continuation> {
    spec.validate()?;
    let z0 = HalfPlanePoint::new(re_z, spec.eta_schedule[0])?;
    let mut pop = Population::new(z0, spec.pool_size)?;
    let mut levels = Vec::with_capacity(spec.eta_schedule.len());
    let mut root_pool = pop.clone();
    let last = spec.eta_schedule.len() - 1;
    for (k, &eta) in spec.eta_schedule.iter().enumerate() {
        let z = HalfPlanePoint::new(re_z, eta)?;
        let (min_iters, max_iters) = if k == last {
            (spec.min_iters.max(spec.hold_iters), spec.max_iters.max(spec.hold_iters))
        } else {
            (spec.min_iters, spec.max_iters)
        };
        pop = pop.at(z);
        let bref = spec.bulk_reference(z);
        let rref = spec.root_reference(z);
        // At a held last level, the second half of the sweeps is averaged.
        let window_from = if k == last && spec.hold_iters > 0 { max_iters / 2 } else { usize::MAX };
        let mut window: Vec<Snapshot> = Vec::new();
        let mut rows: Vec<CsvRow> = Vec::new();
        let mut sweeps = 0;
        let mut converged = false;
        let mut prev: Option<MomentReport> = None;
        while sweeps < max_iters {
            let k = CHECKPOINT_EVERY.min(max_iters - sweeps);
            pop = evolve(pop, spec, k)?;
            sweeps += k;
            let rep = moment_report_kind(&pop, bref, Reference::Gamma, spec.p);
            converged = prev.as_ref().is_some_and(|p| is_stable(p, &rep));
            if sweeps > window_from {
                root_pool = evolve_root(&pop, spec)?;
                window.push(Snapshot::take(&rep, &root_pool, rref, spec.p));
            }
            rows.push(CsvRow { re_z, eta, generation: pop.generation, report: rep.clone(), converged });
            if converged && sweeps >= min_iters {
                break;
            }
            prev = Some(rep);
        }
        let level = if window.len() >= 2 {
            let n_eff = ((window.len() * CHECKPOINT_EVERY) as f64 * eta).clamp(1.0, window.len() as f64);
            let avg = Snapshot::average(&window, n_eff);
            let h = window.len() / 2;
            let n_half = (n_eff / 2.0).max(1.0);
            let (a, b) = (Snapshot::average(&window[..h], n_half), Snapshot::average(&window[h..], n_half));
            converged = is_stable(&a.bulk, &b.bulk);
            if let Some(last_row) = rows.last_mut() {
                last_row.converged = converged;
            }
            LevelResult {
                eta,
                sweeps,
                converged,
                bulk: avg.bulk,
                root: avg.root,
                root_abs_p: avg.abs_p,
                root_mean: avg.root_mean,
                rows,
            }
        } else {
            root_pool = evolve_root(&pop, spec)?;
            let snap = Snapshot::take(
                rows.last().map(|r| &r.report).expect("at least one checkpoint"),
                &root_pool,
                rref,
                spec.p,
            );
            LevelResult {
                eta,
                sweeps,
                converged,
                bulk: snap.bulk,
                root: snap.root,
                root_abs_p: snap.abs_p,
                root_mean: snap.root_mean,
                rows,
            }
        };
        levels.push(level);
    }
    Ok(Continuation { re_z, levels, pool: pop, root_pool })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::Disorder;

    fn small(mut s: RdeSpec) -> RdeSpec {
        s.pool_size = 4096;
        s.seed = 11;
        s
    }

    #[test]
    fn regular_tree_collapses_to_gamma() {
        let d = OffspringLaw::dirac(3).unwrap();
        let spec = small(RdeSpec::plain(d.clone(), d, PotentialModel::Zero));
        let z = HalfPlanePoint::new(0.3, 1.0).unwrap();
        let pop = evolve(Population::new(z, spec.pool_size).unwrap(), &spec, 100).unwrap();
        let g = semicircle_transform(z).value();
        assert!(pop.samples.iter().all(|x| (x.value() - g).norm() <= 1e-10));
    }

    #[test]
    fn one_sweep_at_unit_imaginary_part_is_bounded() {
        let law = OffspringLaw::poisson(4.0).unwrap();
        let mut spec = small(RdeSpec::plain(
            law.clone(),
            law,
            PotentialModel::Anderson { disorder: Disorder::Gaussian, lambda: 2.0, scale: 4.0 },
        ));
        spec.pool_size = 500;
        let z = HalfPlanePoint::new(-0.7, 1.0).unwrap();
        let start = Population::filled(z, 500, HalfPlanePoint::new(3.0, 0.001).unwrap()).unwrap();
        let pop = evolve(start, &spec, 1).unwrap();
        assert!(pop.samples.iter().all(|g| g.value().norm() <= 1.0 + 1e-12));
    }

    #[test]
    fn root_step_with_dirac_root_gives_kesten_mckay() {
        let spec = small(RdeSpec::plain(
            OffspringLaw::dirac(2).unwrap(),
            OffspringLaw::dirac(3).unwrap(),
            PotentialModel::Zero,
        ));
        let z = HalfPlanePoint::new(0.5, 0.2).unwrap();
        let pop = Population::filled(z, 64, semicircle_transform(z)).unwrap();
        let root = evolve_root(&pop, &spec).unwrap();
        let want = kesten_mckay_transform(z, 1.5).value();
        assert!(root.samples.iter().all(|g| (g.value() - want).norm() < 1e-14));
        assert!((spec.root_reference(z).value() - want).norm() < 1e-15);
    }

    #[test]
    fn report_on_constant_pool() {
        let z = HalfPlanePoint::new(0.2, 0.4).unwrap();
        let g = semicircle_transform(z);
        let pop = Population::filled(z, 100, g).unwrap();
        let r = moment_report(&pop, g, 2.0);
        assert_eq!(r.e_gamma_p.mean, 0.0);
        assert_eq!(r.e_abs_diff_p.mean, 0.0);
        assert!((r.e_inv_im_p.mean - g.im().powi(-2)).abs() < 1e-12 * g.im().powi(-2));
    }

    #[test]
    fn schedules() {
        let s = geometric_schedule(1e-1, 1e-3, 3);
        assert!((s[1] - 1e-2).abs() < 1e-15 && s[2] == 1e-3);
        let d = OffspringLaw::dirac(3).unwrap();
        let mut spec = RdeSpec::plain(d.clone(), d, PotentialModel::Zero);
        spec.eta_schedule = vec![0.1, 0.1];
        assert!(spec.validate().is_err());
        spec.eta_schedule = vec![0.1, -0.1];
        assert!(spec.validate().is_err());
    }

    #[test]
    fn deterministic_across_strategies() {
        let law = OffspringLaw::poisson(3.0).unwrap();
        let mut spec = small(RdeSpec::plain(law.clone(), law, PotentialModel::Zero));
        spec.pool_size = 5000;
        let z = HalfPlanePoint::new(0.1, 0.1).unwrap();
        let a = evolve(Population::new(z, 5000).unwrap(), &spec, 5).unwrap();
        spec.exec = Exec::Sequential;
        let b = evolve(Population::new(z, 5000).unwrap(), &spec, 5).unwrap();
        assert_eq!(a.samples, b.samples);
    }
}
