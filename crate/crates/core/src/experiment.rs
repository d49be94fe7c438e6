//! Flat JSON experiment configs, their hashes, and the files each pipeline
//! writes.
//!
//! Every output starts with (CSV, text) or contains (JSON) the config hash,
//! a SHA-256 over the config with `workers` and `output_dir` removed. Nothing
//! time- or machine-dependent is written, so a rerun of `manifest.json`
//! reproduces every file byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::contraction::calibrate;
use crate::error::{Error, Result};
use crate::forbidden::build_forbidden;
use crate::offspring::{Disorder, LawSpec, OffspringLaw, PotentialModel};
use crate::par::{with_workers, Exec};
use crate::rde::{eta_continuation, RdeSpec, CSV_HEADER, DEFAULT_POOL, DEFAULT_SWEEPS};
use crate::rng::{self, tag};
use crate::spectra::{self, ScanParams, Trace};
use crate::tree::{sample_tree, TruncationSpec, DEFAULT_VERTEX_CAP};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pipeline {
    PoissonAc,
    KsCore,
    Anderson,
    Density,
    SolveRde,
    SampleTree,
    ContractionLab,
    ForbiddenSet,
}

impl Pipeline {
    pub fn name(self) -> &'static str {
        match self {
            Pipeline::PoissonAc => "poisson_ac",
            Pipeline::KsCore => "ks_core",
            Pipeline::Anderson => "anderson",
            Pipeline::Density => "density",
            Pipeline::SolveRde => "solve_rde",
            Pipeline::SampleTree => "sample_tree",
            Pipeline::ContractionLab => "contraction_lab",
            Pipeline::ForbiddenSet => "forbidden_set",
        }
    }
}

fn default_e() -> f64 {
    1.5
}
fn default_epsilon() -> f64 {
    0.1
}
fn default_k_max() -> usize {
    12
}
fn default_pool() -> usize {
    DEFAULT_POOL
}
fn default_schedule() -> Vec<f64> {
    vec![1.0, 0.3, 0.1, 0.03, 0.01, 3e-3, 1e-3]
}
fn default_sweeps() -> usize {
    DEFAULT_SWEEPS
}
fn default_hold() -> usize {
    1000
}
fn default_grid() -> usize {
    512
}
fn default_p() -> f64 {
    2.0
}
fn default_trials() -> usize {
    100_000
}
fn default_count() -> usize {
    1
}
fn default_cap() -> usize {
    DEFAULT_VERTEX_CAP
}

/// One experiment. Unknown fields are rejected and `seed` has no default.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub pipeline: Pipeline,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub law: Option<LawSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_law: Option<LawSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<PotentialModel>,
    /// Mean degree for `poisson_ac` and `ks_core`; degree for `anderson`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    /// Degrees swept by `anderson` (overrides `d`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ds: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disorder: Option<Disorder>,
    #[serde(rename = "E", default = "default_e")]
    pub e: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Scale of the excluded set for `forbidden_set`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d_s: Option<f64>,
    #[serde(default = "default_pool")]
    pub pool_size: usize,
    #[serde(default = "default_schedule")]
    pub eta_schedule: Vec<f64>,
    #[serde(default = "default_sweeps")]
    pub sweeps: usize,
    #[serde(default = "default_hold")]
    pub hold_sweeps: usize,
    #[serde(default = "default_grid")]
    pub grid_size: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    /// `Re z` for `solve_rde`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub re_z: Option<f64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<u32>,
    #[serde(default = "default_count")]
    pub count: usize,
    #[serde(default = "default_cap")]
    pub tree_cap: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn new(pipeline: Pipeline, seed: u64) -> Self {
        serde_json::from_value(serde_json::json!({ "pipeline": pipeline, "seed": seed })).expect("defaults deserialize")
    }

    /// Parses a config, or the `config` member of a manifest.
    pub fn from_json(text: &str) -> Result<Self> {
        let v: serde_json::Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let v = match v.get("config") {
            Some(c) if v.get("config_hash").is_some() => c.clone(),
            _ => v,
        };
        serde_json::from_value(v).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// The config without the fields that must not change any output.
    pub fn replay_view(&self) -> Self {
        ExperimentConfig { workers: None, output_dir: None, ..self.clone() }
    }

    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(&self.replay_view()).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    fn scan_params(&self) -> ScanParams {
        ScanParams {
            e: self.e,
            grid_size: self.grid_size,
            pool_size: self.pool_size,
            eta_schedule: self.eta_schedule.clone(),
            sweeps: self.sweeps,
            hold_sweeps: self.hold_sweeps,
            p: self.p,
            seed: self.seed,
        }
    }

    fn law(&self) -> Result<OffspringLaw> {
        let spec = self.law.clone().ok_or_else(|| Error::Config("`law` is required".into()))?;
        OffspringLaw::try_from(spec).map_err(|e| e.at("law"))
    }

    fn root_law(&self) -> Result<OffspringLaw> {
        match &self.root_law {
            Some(s) => OffspringLaw::try_from(s.clone()).map_err(|e| e.at("root_law")),
            None => self.law(),
        }
    }

    fn need_d(&self) -> Result<f64> {
        self.d.ok_or_else(|| Error::Config(format!("`d` is required by {}", self.pipeline.name())))
    }

    fn rde_spec(&self) -> Result<RdeSpec> {
        let law = self.law()?;
        let root = self.root_law()?;
        let mut spec = RdeSpec::plain(law, root, self.potential.clone().unwrap_or(PotentialModel::Zero));
        spec.pool_size = self.pool_size;
        spec.eta_schedule = self.eta_schedule.clone();
        spec.max_iters = self.sweeps;
        spec.hold_iters = self.hold_sweeps;
        spec.p = self.p;
        spec.seed = self.seed;
        Ok(spec)
    }

    /// Checks everything a pipeline needs before any compute.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.pool_size < 2 {
            return bad("`pool_size` must be at least 2");
        }
        if self.eta_schedule.is_empty()
            || self.eta_schedule.iter().any(|e| !(*e > 0.0 && e.is_finite()))
            || self.eta_schedule.windows(2).any(|w| w[1] >= w[0])
        {
            return bad("`eta_schedule` must be positive and strictly decreasing");
        }
        if self.sweeps == 0 {
            return bad("`sweeps` must be positive");
        }
        if self.workers == Some(0) {
            return bad("`workers` must be positive");
        }
        if let Some(p) = &self.potential {
            p.validate()?;
        }
        match self.pipeline {
            Pipeline::PoissonAc | Pipeline::KsCore => {
                let d = self.need_d()?;
                OffspringLaw::poisson(d)?;
                self.scan_params().validate()?;
                if self.pipeline == Pipeline::PoissonAc {
                    if !(self.epsilon > 0.0) {
                        return bad("`epsilon` must be positive");
                    }
                    if !(1..=crate::forbidden::K_MAX_CAP).contains(&self.k_max) {
                        return bad("`k_max` out of range");
                    }
                    if d <= 1.0 {
                        return bad("poisson_ac needs a supercritical law, d > 1");
                    }
                }
            }
            Pipeline::Anderson => {
                let ds = self.anderson_ds()?;
                if ds.iter().any(|d| *d < 2) {
                    return bad("anderson needs d ≥ 2");
                }
                if self.anderson_lambdas().iter().any(|l| !(l.is_finite() && *l >= 0.0)) {
                    return bad("`lambda` must be finite and non-negative");
                }
                self.scan_params().validate()?;
            }
            Pipeline::Density => {
                self.rde_spec()?.validate()?;
                self.scan_params().validate()?;
            }
            Pipeline::SolveRde => {
                self.rde_spec()?.validate()?;
                if self.re_z.is_none() {
                    return bad("`re_z` is required by solve_rde");
                }
            }
            Pipeline::SampleTree => {
                self.law()?;
                self.root_law()?;
                if self.count == 0 {
                    return bad("`count` must be positive");
                }
            }
            Pipeline::ContractionLab => {
                crate::contraction::ConfigSampler::new(self.e, self.p, 0.0).validate()?;
                if self.trials == 0 {
                    return bad("`trials` must be positive");
                }
            }
            Pipeline::ForbiddenSet => {
                if !(self.epsilon > 0.0) {
                    return bad("`epsilon` must be positive");
                }
                if !(1..=crate::forbidden::K_MAX_CAP).contains(&self.k_max) {
                    return bad("`k_max` out of range");
                }
                if self.d_s.is_some_and(|d| !(d > 0.0)) {
                    return bad("`d_s` must be positive");
                }
            }
        }
        Ok(())
    }

    fn anderson_ds(&self) -> Result<Vec<u32>> {
        match (&self.ds, self.d) {
            (Some(ds), _) if !ds.is_empty() => Ok(ds.clone()),
            (_, Some(d)) if d.fract() == 0.0 && d >= 0.0 => Ok(vec![d as u32]),
            _ => Err(Error::Config("anderson needs integer `d` or `ds`".into())),
        }
    }

    fn anderson_lambdas(&self) -> Vec<f64> {
        match (&self.lambdas, self.lambda) {
            (Some(l), _) if !l.is_empty() => l.clone(),
            (_, Some(l)) => vec![l],
            _ => vec![0.0],
        }
    }
}

/// What a run produced.
#[derive(Clone, Debug, Serialize)]
pub struct Outcome {
    pub config_hash: String,
    pub converged: bool,
    pub files: Vec<String>,
    pub summary: serde_json::Value,
}

struct Writer {
    dir: PathBuf,
    hash: String,
    files: Vec<String>,
}

impl Writer {
    fn csv(&mut self, name: &str, body: &str) -> Result<()> {
        self.put(name, format!("# config_hash={}\n{body}", self.hash))
    }

    fn json(&mut self, name: &str, value: serde_json::Value) -> Result<()> {
        let mut v = serde_json::json!({ "config_hash": self.hash });
        if let (Some(obj), serde_json::Value::Object(extra)) = (v.as_object_mut(), value) {
            obj.extend(extra);
        }
        self.put(name, serde_json::to_string_pretty(&v)? + "\n")
    }

    fn put(&mut self, name: &str, text: String) -> Result<()> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, text)?;
        self.files.push(name.to_string());
        Ok(())
    }
}

fn trace_json(t: &Trace) -> serde_json::Value {
    serde_json::json!({ "spread": t.spread(), "bounded": t.bounded() })
}

/// Validates, runs the pipeline on `workers` threads and writes its files to
/// `dir`. Validation errors leave `dir` untouched.
pub fn run(config: &ExperimentConfig, dir: &Path) -> Result<Outcome> {
    config.validate()?;
    let hash = config.hash();
    let mut w = Writer { dir: dir.to_path_buf(), hash: hash.clone(), files: Vec::new() };
    let exec = Exec::Parallel;
    let (converged, summary) = with_workers(config.workers, || execute(config, &mut w, exec))?;
    let manifest = serde_json::json!({
        "pipeline": config.pipeline.name(),
        "config": config.replay_view(),
        "converged": converged,
        "summary": summary,
        "files": w.files.clone(),
    });
    w.json("manifest.json", manifest)?;
    Ok(Outcome { config_hash: hash, converged, files: w.files, summary })
}

fn execute(c: &ExperimentConfig, w: &mut Writer, exec: Exec) -> Result<(bool, serde_json::Value)> {
    match c.pipeline {
        Pipeline::PoissonAc => {
            let d = c.need_d()?;
            let r = spectra::poisson_ac(d, c.epsilon, c.k_max, &c.scan_params(), c.tree_cap, exec)?;
            w.csv("density.csv", &r.density.to_csv())?;
            w.csv(
                "acmass.csv",
                &format!(
                    "E,epsilon,d,bound,l1\n{},{},{},{:.10e},{:.10e}\n",
                    c.e, c.epsilon, d, r.acmass.lower_bound, r.acmass.l1_distance_to_reference
                ),
            )?;
            w.csv("diagnostic.csv", &r.simon_klein.to_csv())?;
            let summary = serde_json::json!({
                "d_s": r.d_s,
                "pi_e": r.pi_e,
                "forbidden_measure": r.forbidden.measure(),
                "control": r.control,
                "acmass": r.acmass,
                "simon_klein": trace_json(&r.simon_klein),
                "certified": r.certified,
            });
            Ok((r.converged, summary))
        }
        Pipeline::KsCore => {
            let r = spectra::ks_core(c.need_d()?, &c.scan_params(), exec)?;
            w.csv("density.csv", &r.density.to_csv())?;
            w.csv("diagnostic.csv", &r.simon_klein.to_csv())?;
            let summary = serde_json::json!({
                "root_mean": r.root_mean,
                "bulk_mean": r.bulk_mean,
                "min_density": r.min_density,
                "simon_klein": trace_json(&r.simon_klein),
                "inv_im": r.inv_im,
                "inv_im_bounded": r.inv_im.bounded(),
            });
            Ok((r.converged, summary))
        }
        Pipeline::Anderson => {
            let runs = spectra::anderson(
                &c.anderson_ds()?,
                &c.anderson_lambdas(),
                c.disorder.unwrap_or(Disorder::Uniform),
                &c.scan_params(),
                exec,
            )?;
            let mut dens = String::from("d,lambda,x,eta,f,se\n");
            let mut diag = String::from("d,lambda,eta,integral_p,se,flag\n");
            let mut rows = Vec::new();
            for r in &runs {
                for line in r.density.to_csv().lines().skip(1) {
                    dens.push_str(&format!("{},{},{line}\n", r.d, r.lambda));
                }
                for line in r.inv_im.to_csv().lines().skip(1) {
                    diag.push_str(&format!("{},{},{line}\n", r.d, r.lambda));
                }
                rows.push(serde_json::json!({
                    "d": r.d,
                    "lambda": r.lambda,
                    "lambda_over_sqrt_d": r.lambda_over_sqrt_d,
                    "km_deviation": r.km_deviation,
                    "eta_stable": r.eta_stable(),
                    "inv_im_spread": r.inv_im.spread(),
                }));
            }
            w.csv("density.csv", &dens)?;
            w.csv("diagnostic.csv", &diag)?;
            Ok((runs.iter().all(|r| r.converged), serde_json::json!({ "runs": rows })))
        }
        Pipeline::Density => {
            let mut spec = c.rde_spec()?;
            spec.exec = exec;
            let (g, wts) = spectra::midpoint_grid(c.e, c.grid_size);
            let s = spectra::scan(&spec, &g, &wts).map_err(|e| e.at("rde"))?;
            let d = s.density();
            let sk = s.simon_klein_trace();
            w.csv("density.csv", &d.to_csv())?;
            w.csv("diagnostic.csv", &sk.to_csv())?;
            let summary = serde_json::json!({
                "mass": d.mass(),
                "min_density": d.min_value(),
                "simon_klein": trace_json(&sk),
            });
            Ok((s.converged(), summary))
        }
        Pipeline::SolveRde => {
            let mut spec = c.rde_spec()?;
            spec.exec = exec;
            let re_z = c.re_z.expect("validated");
            let cont = eta_continuation(&spec, re_z).map_err(|e| e.at("rde"))?;
            let mut body = format!("{CSV_HEADER}\n");
            for l in &cont.levels {
                for r in &l.rows {
                    body.push_str(&r.to_csv());
                    body.push('\n');
                }
            }
            w.csv("rde.csv", &body)?;
            let levels: Vec<_> = cont
                .levels
                .iter()
                .map(|l| serde_json::json!({ "eta": l.eta, "sweeps": l.sweeps, "converged": l.converged, "root": l.root, "bulk": l.bulk }))
                .collect();
            Ok((cont.converged(), serde_json::json!({ "levels": levels })))
        }
        Pipeline::SampleTree => {
            let law = c.law()?;
            let root = c.root_law()?;
            let potential = c.potential.clone().unwrap_or(PotentialModel::Zero);
            let trunc = match c.depth {
                Some(m) => TruncationSpec::depth(m),
                None => TruncationSpec::none(),
            };
            let mut sizes = Vec::with_capacity(c.count);
            for i in 0..c.count {
                let mut r = rng::stream(c.seed, &[tag::TREE, i as u64]);
                let t = sample_tree(&root, &law, &potential, &trunc, c.tree_cap, &mut r)
                    .map_err(|e| e.at("sample_tree"))?;
                sizes.push(t.len());
                w.put(
                    &format!("trees/tree_{i:04}.txt"),
                    t.to_text(&format!("config_hash={} law={law} index={i}", w.hash)),
                )?;
            }
            Ok((true, serde_json::json!({ "sizes": sizes })))
        }
        Pipeline::ContractionLab => {
            let reports = calibrate(c.e, c.p, c.trials, c.seed, exec).map_err(|e| e.at("contraction"))?;
            let eps = reports.iter().find_map(|r| r.fitted_constants.get("eps").copied()).unwrap_or(f64::NAN);
            w.json("calibration.json", serde_json::json!({ "reports": reports }))?;
            Ok((true, serde_json::json!({ "epsilon": eps, "positive": eps > 0.0 })))
        }
        Pipeline::ForbiddenSet => {
            let fs = build_forbidden(c.epsilon, c.d_s.unwrap_or(1.0), c.k_max).map_err(|e| e.at("forbidden_set"))?;
            w.json("forbidden.json", serde_json::to_value(&fs)?)?;
            Ok((true, serde_json::json!({ "measure": fs.measure(), "intervals": fs.intervals.len() })))
        }
    }
}
