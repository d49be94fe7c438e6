//! Offspring laws and the quantities derived from them.
//!
//! An [`OffspringLaw`] is one of four families with two optional modifiers
//! (conditioning on `N ≥ k`, and the truncation `min(N, cap)`). The pmf is
//! materialized once at construction; sampling is inverse-CDF on that table,
//! so the same uniform draw always maps to the same integer.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{self, tag, Stream};

/// Poisson and binomial tables are cut once the remaining mass drops below this.
const TAIL_CUT: f64 = 1e-14;
/// Attempts allowed to rejection samplers before they give up.
pub const MAX_REJECTIONS: u64 = 1_000_000;

#[derive(Clone, Debug, PartialEq)]
pub enum LawKind {
    Dirac { d: u32 },
    Poisson { d: f64 },
    Binomial { n: u32, p: f64 },
    Empirical { weights: Vec<f64> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "LawSpec", into = "LawSpec")]
pub struct OffspringLaw {
    kind: LawKind,
    conditioned_at_least: u32,
    truncation_cap: Option<u32>,
    pmf: Vec<f64>,
    cdf: Vec<f64>,
    /// Unconditioned probabilities of `0..k` when conditioned on `N ≥ k`.
    head: Vec<f64>,
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    let mut acc = 0.0;
    out.push(0.0);
    for k in 1..=n {
        acc += (k as f64).ln();
        out.push(acc);
    }
    out
}

fn poisson_pmf(d: f64) -> Vec<f64> {
    let ln_d = d.ln();
    let mut pmf = Vec::new();
    let mut ln_fact = 0.0;
    for k in 0usize.. {
        if k > 0 {
            ln_fact += (k as f64).ln();
        }
        let pk = (k as f64 * ln_d - d - ln_fact).exp();
        pmf.push(pk);
        // Beyond the mean the tail is dominated by a geometric series.
        let kf = k as f64;
        if kf > d && pk * (kf + 1.0) / (kf + 1.0 - d) < TAIL_CUT {
            break;
        }
    }
    pmf
}

fn binomial_pmf(n: u32, p: f64) -> Vec<f64> {
    if p == 0.0 {
        return vec![1.0];
    }
    if p == 1.0 {
        let mut v = vec![0.0; n as usize + 1];
        v[n as usize] = 1.0;
        return v;
    }
    let lf = ln_factorials(n as usize);
    let (lp, lq) = (p.ln(), (1.0 - p).ln());
    let mean = n as f64 * p;
    let mut pmf = Vec::with_capacity(n as usize + 1);
    for k in 0..=n as usize {
        let ln_c = lf[n as usize] - lf[k] - lf[n as usize - k];
        let pk = (ln_c + k as f64 * lp + (n as usize - k) as f64 * lq).exp();
        pmf.push(pk);
        let ratio = (n as usize - k) as f64 / (k + 1) as f64 * p / (1.0 - p);
        if k as f64 > mean && ratio < 1.0 && pk * ratio / (1.0 - ratio) < TAIL_CUT {
            break;
        }
    }
    pmf
}

fn fold_to_unit_mass(pmf: &mut [f64]) {
    let s: f64 = pmf.iter().sum();
    if let Some(last) = pmf.last_mut() {
        *last += (1.0 - s).max(0.0);
    }
    let s: f64 = pmf.iter().sum();
    for p in pmf.iter_mut() {
        *p /= s;
    }
}

impl OffspringLaw {
    pub fn new(kind: LawKind, conditioned_at_least: u32, truncation_cap: Option<u32>) -> Result<Self> {
        let mut pmf = match &kind {
            LawKind::Dirac { d } => {
                let mut v = vec![0.0; *d as usize + 1];
                v[*d as usize] = 1.0;
                v
            }
            LawKind::Poisson { d } => {
                if !(d.is_finite() && *d > 0.0) {
                    return Err(Error::InvalidLaw(format!("poisson mean {d} must be positive")));
                }
                poisson_pmf(*d)
            }
            LawKind::Binomial { n, p } => {
                if !(*n >= 1 && (0.0..=1.0).contains(p)) {
                    return Err(Error::InvalidLaw(format!("binomial({n}, {p}) needs n ≥ 1 and p in [0, 1]")));
                }
                binomial_pmf(*n, *p)
            }
            LawKind::Empirical { weights } => {
                if weights.is_empty() || weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::InvalidLaw("empirical weights must be finite and non-negative".into()));
                }
                let s: f64 = weights.iter().sum();
                if !(s > 0.0) {
                    return Err(Error::InvalidLaw("empirical weights sum to zero".into()));
                }
                weights.iter().map(|w| w / s).collect()
            }
        };
        fold_to_unit_mass(&mut pmf);

        let k = conditioned_at_least as usize;
        let head: Vec<f64> = (0..k).map(|j| pmf.get(j).copied().unwrap_or(0.0)).collect();
        if k > 0 {
            let kept: f64 = pmf.iter().skip(k).sum();
            if !(kept > 0.0) {
                return Err(Error::InvalidLaw(format!("P(N ≥ {k}) = 0")));
            }
            for (j, p) in pmf.iter_mut().enumerate() {
                *p = if j < k { 0.0 } else { *p / kept };
            }
        }
        if let Some(cap) = truncation_cap {
            let cap = cap as usize;
            if cap < k {
                return Err(Error::InvalidLaw(format!("truncation cap {cap} below conditioning level {k}")));
            }
            if pmf.len() > cap + 1 {
                let tail: f64 = pmf[cap..].iter().sum();
                pmf.truncate(cap + 1);
                pmf[cap] = tail;
            }
        }
        while pmf.len() > 1 && *pmf.last().unwrap() == 0.0 {
            pmf.pop();
        }
        let mean: f64 = pmf.iter().enumerate().map(|(j, p)| j as f64 * p).sum();
        if !(mean > 0.0) {
            return Err(Error::InvalidLaw("mean must be positive".into()));
        }
        let mut cdf = Vec::with_capacity(pmf.len());
        let mut acc = 0.0;
        for p in &pmf {
            acc += p;
            cdf.push(acc);
        }
        Ok(OffspringLaw { kind, conditioned_at_least, truncation_cap, pmf, cdf, head })
    }

    pub fn dirac(d: u32) -> Result<Self> {
        Self::new(LawKind::Dirac { d }, 0, None)
    }

    pub fn poisson(d: f64) -> Result<Self> {
        Self::new(LawKind::Poisson { d }, 0, None)
    }

    pub fn binomial(n: u32, p: f64) -> Result<Self> {
        Self::new(LawKind::Binomial { n, p }, 0, None)
    }

    pub fn empirical(weights: Vec<f64>) -> Result<Self> {
        Self::new(LawKind::Empirical { weights }, 0, None)
    }

    /// The same family conditioned on `N ≥ k`.
    pub fn conditioned(&self, k: u32) -> Result<Self> {
        Self::new(self.kind.clone(), k, self.truncation_cap)
    }

    /// The law of `min(N, cap)`.
    pub fn truncated(&self, cap: u32) -> Result<Self> {
        Self::new(self.kind.clone(), self.conditioned_at_least, Some(cap))
    }

    pub fn kind(&self) -> &LawKind {
        &self.kind
    }

    pub fn conditioned_at_least(&self) -> u32 {
        self.conditioned_at_least
    }

    pub fn truncation_cap(&self) -> Option<u32> {
        self.truncation_cap
    }

    /// `P(N = k)` for `k` in the table; zero beyond it.
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn prob(&self, k: usize) -> f64 {
        self.pmf.get(k).copied().unwrap_or(0.0)
    }

    pub fn max_support(&self) -> usize {
        self.pmf.len() - 1
    }

    fn is_plain(&self) -> bool {
        self.conditioned_at_least == 0 && self.truncation_cap.is_none()
    }

    /// `E N`.
    pub fn mean(&self) -> f64 {
        match (&self.kind, self.is_plain()) {
            (LawKind::Dirac { d }, _) => *d as f64,
            (LawKind::Poisson { d }, true) => *d,
            (LawKind::Binomial { n, p }, true) => *n as f64 * p,
            _ => self.moment(1),
        }
    }

    /// `E N^m`, summed over the table (exact for Dirac).
    pub fn moment(&self, m: u32) -> f64 {
        if let (LawKind::Dirac { d }, true) = (&self.kind, self.is_plain()) {
            return (*d as f64).powi(m as i32);
        }
        self.pmf.iter().enumerate().map(|(k, p)| p * (k as f64).powi(m as i32)).sum()
    }

    /// `E (N/d + d/N)^m` with `d = E N`. Infinite if `P(N = 0) > 0`.
    pub fn ratio_moment(&self, m: f64) -> f64 {
        let d = self.mean();
        if self.pmf[0] > 0.0 {
            return f64::INFINITY;
        }
        self.pmf
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, p)| **p > 0.0)
            .map(|(k, p)| p * (k as f64 / d + d / k as f64).powf(m))
            .sum()
    }

    fn mgf_plain(&self, x: f64) -> Option<f64> {
        match &self.kind {
            LawKind::Dirac { d } => Some(x.powi(*d as i32)),
            LawKind::Poisson { d } => Some((d * (x - 1.0)).exp()),
            LawKind::Binomial { n, p } => Some((1.0 - p + p * x).powi(*n as i32)),
            LawKind::Empirical { .. } => None,
        }
    }

    /// `φ(x) = E x^N`. Analytic for the closed-form families (also when
    /// conditioned); evaluated on the table otherwise. Valid for any `x ≥ 0`
    /// with a finite value.
    pub fn mgf(&self, x: f64) -> f64 {
        if self.truncation_cap.is_none() {
            if let Some(full) = self.mgf_plain(x) {
                if self.head.is_empty() {
                    return full;
                }
                let head_mass: f64 = self.head.iter().sum();
                return (full - horner(&self.head, x)) / (1.0 - head_mass);
            }
        }
        horner(&self.pmf, x)
    }

    /// `φ'(x)`.
    pub fn mgf_derivative(&self, x: f64) -> f64 {
        if self.is_plain() {
            match &self.kind {
                LawKind::Dirac { d } => return *d as f64 * x.powi(*d as i32 - 1),
                LawKind::Poisson { d } => return d * (d * (x - 1.0)).exp(),
                LawKind::Binomial { n, p } => return *n as f64 * p * (1.0 - p + p * x).powi(*n as i32 - 1),
                LawKind::Empirical { .. } => {}
            }
        }
        let coeffs: Vec<f64> = self.pmf.iter().enumerate().skip(1).map(|(k, p)| k as f64 * p).collect();
        horner(&coeffs, x)
    }

    /// Draws one offspring count.
    #[inline]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        if let (LawKind::Dirac { d }, true) = (&self.kind, self.is_plain()) {
            return *d;
        }
        let u: f64 = rng.random();
        let k = self.cdf.partition_point(|&c| c <= u);
        k.min(self.pmf.len() - 1) as u32
    }

    /// The size-biased law `P(k) = (k+1) P⋆(k+1) / d⋆`.
    pub fn size_bias(&self) -> Result<Self> {
        let k = self.conditioned_at_least.saturating_sub(1);
        if self.truncation_cap.is_none() {
            match &self.kind {
                LawKind::Dirac { d } => {
                    if *d < 1 {
                        return Err(Error::InvalidLaw("size-bias of a zero-mean law".into()));
                    }
                    return Self::new(LawKind::Dirac { d: d - 1 }, k.min(d - 1), None);
                }
                LawKind::Poisson { d } => return Self::new(LawKind::Poisson { d: *d }, k, None),
                LawKind::Binomial { n, p } if *n >= 2 => {
                    return Self::new(LawKind::Binomial { n: n - 1, p: *p }, k, None)
                }
                _ => {}
            }
        }
        let d = self.mean();
        let weights: Vec<f64> = self.pmf.iter().enumerate().skip(1).map(|(j, p)| j as f64 * p / d).collect();
        Self::new(LawKind::Empirical { weights }, 0, None)
    }

    /// Smallest fixed point of `φ` in `[0, 1]`.
    pub fn extinction_probability(&self) -> f64 {
        if self.pmf[0] == 0.0 {
            return 0.0;
        }
        if self.mean() <= 1.0 {
            return 1.0;
        }
        let mut x = 0.0;
        for _ in 0..1_000_000 {
            let next = self.mgf(x);
            let done = (next - x).abs() <= 1e-13;
            x = next;
            if done {
                break;
            }
        }
        // φ(x) - x is convex, positive below π_e and negative on (π_e, 1).
        let f = |t: f64| self.mgf(t) - t;
        let mut lo = x;
        while lo > 0.0 && f(lo) <= 0.0 {
            lo = (lo - 1e-9).max(0.0);
        }
        let mut step = 1e-12;
        let mut hi = lo + step;
        while f(hi) > 0.0 {
            step *= 2.0;
            hi = lo + step;
            if hi >= 1.0 {
                return x;
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    /// Offspring law of a tree conditioned on extinction, `P(k) π_e^{k-1}`
    /// (moment generating function `φ(π_e x)/π_e`).
    pub fn extinct_law(&self, pi_e: f64) -> Result<Self> {
        if !(pi_e > 0.0 && pi_e <= 1.0) {
            return Err(Error::param("pi_e", format!("{pi_e} is not in (0, 1]")));
        }
        if self.is_plain() {
            match &self.kind {
                LawKind::Poisson { d } => return Self::poisson(d * pi_e),
                LawKind::Binomial { n, p } => {
                    let q = p * pi_e / (1.0 - p + p * pi_e);
                    return Self::binomial(*n, q);
                }
                _ => {}
            }
        }
        let mut w = Vec::with_capacity(self.pmf.len());
        let mut pow = 1.0 / pi_e;
        for p in &self.pmf {
            w.push(p * pow);
            pow *= pi_e;
        }
        Self::empirical(w)
    }

    pub fn spec(&self) -> LawSpec {
        self.clone().into()
    }
}

fn horner(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

impl fmt::Display for OffspringLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            LawKind::Dirac { d } => write!(f, "dirac:{d}")?,
            LawKind::Poisson { d } => write!(f, "poisson:{d}")?,
            LawKind::Binomial { n, p } => write!(f, "binomial:{n},{p}")?,
            LawKind::Empirical { weights } => {
                let w: Vec<String> = weights.iter().map(|x| x.to_string()).collect();
                write!(f, "empirical:{}", w.join(","))?
            }
        }
        if self.conditioned_at_least > 0 {
            write!(f, ":min={}", self.conditioned_at_least)?;
        }
        if let Some(c) = self.truncation_cap {
            write!(f, ":cap={c}")?;
        }
        Ok(())
    }
}

/// Parses `kind:params[:min=k][:cap=n]`, e.g. `poisson:2`, `dirac:3`,
/// `binomial:10,0.3`, `empirical:0.2,0.3,0.5`, `poisson:30:min=2`.
impl FromStr for OffspringLaw {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| Error::InvalidLaw(format!("`{s}`: {why}"));
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
        let params = parts.next().ok_or_else(|| bad("missing parameters"))?;
        let nums = |n: usize| -> Result<Vec<f64>> {
            let v: Vec<f64> = params
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad("parameters must be numbers"))?;
            if n > 0 && v.len() != n {
                return Err(bad(&format!("expected {n} parameter(s)")));
            }
            Ok(v)
        };
        let as_u32 = |x: f64| -> Result<u32> {
            if x >= 0.0 && x.fract() == 0.0 && x <= u32::MAX as f64 {
                Ok(x as u32)
            } else {
                Err(bad("expected a non-negative integer"))
            }
        };
        let kind = match kind.as_str() {
            "dirac" => LawKind::Dirac { d: as_u32(nums(1)?[0])? },
            "poisson" => LawKind::Poisson { d: nums(1)?[0] },
            "binomial" => {
                let v = nums(2)?;
                LawKind::Binomial { n: as_u32(v[0])?, p: v[1] }
            }
            "empirical" => LawKind::Empirical { weights: nums(0)? },
            other => return Err(bad(&format!("unknown kind `{other}`"))),
        };
        let mut min = 0;
        let mut cap = None;
        for m in parts {
            match m.split_once('=') {
                Some(("min", v)) => min = v.parse().map_err(|_| bad("bad min"))?,
                Some(("cap", v)) => cap = Some(v.parse().map_err(|_| bad("bad cap"))?),
                _ => return Err(bad(&format!("unknown modifier `{m}`"))),
            }
        }
        OffspringLaw::new(kind, min, cap)
    }
}

/// JSON form: `{"kind": "poisson", "params": {"d": 2.0}, "conditioned_at_least": 0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LawSpec {
    pub kind: String,
    pub params: serde_json::Value,
    #[serde(default)]
    pub conditioned_at_least: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation_cap: Option<u32>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DiracParams {
    d: u32,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoissonParams {
    d: f64,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct BinomialParams {
    n: u32,
    p: f64,
}
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EmpiricalParams {
    weights: Vec<f64>,
}

impl TryFrom<LawSpec> for OffspringLaw {
    type Error = Error;

    fn try_from(s: LawSpec) -> Result<Self> {
        let p = s.params;
        let kind = match s.kind.as_str() {
            "dirac" => LawKind::Dirac { d: serde_json::from_value::<DiracParams>(p)?.d },
            "poisson" => LawKind::Poisson { d: serde_json::from_value::<PoissonParams>(p)?.d },
            "binomial" => {
                let b: BinomialParams = serde_json::from_value(p)?;
                LawKind::Binomial { n: b.n, p: b.p }
            }
            "empirical" => LawKind::Empirical { weights: serde_json::from_value::<EmpiricalParams>(p)?.weights },
            other => return Err(Error::InvalidLaw(format!("unknown kind `{other}`"))),
        };
        OffspringLaw::new(kind, s.conditioned_at_least, s.truncation_cap)
    }
}

impl From<OffspringLaw> for LawSpec {
    fn from(l: OffspringLaw) -> Self {
        let (kind, params) = match l.kind {
            LawKind::Dirac { d } => ("dirac", serde_json::json!({ "d": d })),
            LawKind::Poisson { d } => ("poisson", serde_json::json!({ "d": d })),
            LawKind::Binomial { n, p } => ("binomial", serde_json::json!({ "n": n, "p": p })),
            LawKind::Empirical { weights } => ("empirical", serde_json::json!({ "weights": weights })),
        };
        LawSpec {
            kind: kind.to_string(),
            params,
            conditioned_at_least: l.conditioned_at_least,
            truncation_cap: l.truncation_cap,
        }
    }
}

/// Two-type split of a supercritical law into offspring with infinite
/// descent (`N^s`) and offspring whose subtree dies out (`N^e`), conditioned
/// on `N^s ≥ 1`.
#[derive(Clone, Debug)]
pub struct SkeletonSplitLaw {
    base: OffspringLaw,
    root: OffspringLaw,
    pi_e: f64,
    extinct: Option<OffspringLaw>,
}

impl SkeletonSplitLaw {
    /// `base` is the law `P` of non-root vertices, `root` the root law `P⋆`
    /// (pass `base` again when they coincide).
    pub fn new(base: OffspringLaw, root: OffspringLaw) -> Result<Self> {
        let pi_e = base.extinction_probability();
        if pi_e >= 1.0 {
            return Err(Error::InvalidLaw(format!("law {base} is not supercritical")));
        }
        if root.mgf(pi_e) >= 1.0 {
            return Err(Error::InvalidLaw("root law gives a skeleton of probability zero".into()));
        }
        let extinct = if pi_e > 0.0 { Some(base.extinct_law(pi_e)?) } else { None };
        Ok(SkeletonSplitLaw { base, root, pi_e, extinct })
    }

    pub fn base(&self) -> &OffspringLaw {
        &self.base
    }

    pub fn root(&self) -> &OffspringLaw {
        &self.root
    }

    pub fn extinction_prob(&self) -> f64 {
        self.pi_e
    }

    /// Offspring law of the trees hanging off the skeleton, if any exist.
    pub fn extinct_law(&self) -> Option<&OffspringLaw> {
        self.extinct.as_ref()
    }

    /// `E N^s`, the scale of the skeleton recursion. Equals `E N`.
    pub fn d_s(&self) -> f64 {
        (1.0 - self.pi_e) * self.base.mean() / (1.0 - self.base.mgf(self.pi_e))
    }

    /// `E N⋆^s`.
    pub fn d_s_root(&self) -> f64 {
        (1.0 - self.pi_e) * self.root.mean() / (1.0 - self.root.mgf(self.pi_e))
    }

    /// `φ'(1 - π_e)`, the lower-bound proxy for the skeleton scale.
    pub fn phi_prime_at_survival(&self) -> f64 {
        self.base.mgf_derivative(1.0 - self.pi_e)
    }

    fn joint(law: &OffspringLaw, pi_e: f64, x: f64, y: f64) -> f64 {
        let den = 1.0 - law.mgf(pi_e * y);
        (law.mgf((1.0 - pi_e) * x + pi_e * y) - law.mgf(pi_e * y)) / den
    }

    /// `E x^{N^s} y^{N^e}`.
    pub fn joint_mgf(&self, x: f64, y: f64) -> f64 {
        Self::joint(&self.base, self.pi_e, x, y)
    }

    /// `E x^{N⋆^s} y^{N⋆^e}`.
    pub fn joint_mgf_root(&self, x: f64, y: f64) -> f64 {
        Self::joint(&self.root, self.pi_e, x, y)
    }

    /// Exact pmf of `N^s` (index 0 has mass 0).
    pub fn skeleton_pmf(&self) -> Vec<f64> {
        thinned_pmf(&self.base, self.pi_e)
    }

    fn draw<R: Rng + ?Sized>(law: &OffspringLaw, pi_e: f64, rng: &mut R) -> Result<(u32, u32)> {
        for _ in 0..MAX_REJECTIONS {
            let n = law.sample(rng);
            let mut e = 0;
            if pi_e > 0.0 {
                for _ in 0..n {
                    if rng.random::<f64>() < pi_e {
                        e += 1;
                    }
                }
            }
            if n > e {
                return Ok((n - e, e));
            }
        }
        Err(Error::RejectionExhausted { what: "skeleton split N^s ≥ 1", attempts: MAX_REJECTIONS })
    }

    /// One draw of `(N^s, N^e)`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(u32, u32)> {
        Self::draw(&self.base, self.pi_e, rng)
    }

    /// One draw of `(N⋆^s, N⋆^e)`.
    pub fn sample_root<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<(u32, u32)> {
        Self::draw(&self.root, self.pi_e, rng)
    }
}

/// Pmf of `Σ_{i≤N} (1-ε_i)` conditioned on being at least one, `ε_i ~ Bernoulli(π)`.
fn thinned_pmf(law: &OffspringLaw, pi: f64) -> Vec<f64> {
    let n_max = law.max_support();
    let lf = ln_factorials(n_max);
    let mut out = vec![0.0; n_max + 1];
    for (k, pk) in law.pmf().iter().enumerate() {
        if *pk == 0.0 {
            continue;
        }
        for (j, o) in out.iter_mut().enumerate().take(k + 1).skip(1) {
            let ln_c = lf[k] - lf[j] - lf[k - j];
            let mut term = ln_c + j as f64 * (1.0 - pi).ln();
            if k > j {
                term += (k - j) as f64 * pi.ln();
            }
            *o += pk * term.exp();
        }
    }
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= s);
    out
}

/// Distribution of the Anderson disorder `X`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Disorder {
    /// Uniform on `[-1/2, 1/2]`.
    Uniform,
    /// Standard normal.
    Gaussian,
}

impl Disorder {
    pub fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            Disorder::Uniform => rng.random::<f64>() - 0.5,
            Disorder::Gaussian => StandardNormal.sample(rng),
        }
    }

    pub fn fourth_moment(self) -> f64 {
        match self {
            Disorder::Uniform => 1.0 / 80.0,
            Disorder::Gaussian => 3.0,
        }
    }
}

/// Something that attaches a real potential `V_u` to a vertex given its
/// offspring count and whether it is the root.
pub trait PotentialSampler: Sync {
    fn sample_potential(&self, offspring: u32, is_root: bool, rng: &mut Stream) -> f64;
    fn is_zero(&self) -> bool {
        false
    }
}

/// Real potentials `V_u = f(X_u, N_u, 1_{u≠o})` of the operator `A/√d - V`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum PotentialModel {
    Zero,
    /// The Anderson operator `A + λ V` rescaled by `1/√scale`; in the
    /// `A/√scale - V` convention the potential is `-λ X / √scale`.
    Anderson {
        disorder: Disorder,
        lambda: f64,
        scale: f64,
    },
    /// `V_u = (deg(u) - d)/√d`.
    Laplacian {
        d: f64,
    },
}

impl PotentialSampler for PotentialModel {
    #[inline]
    fn sample_potential(&self, offspring: u32, is_root: bool, rng: &mut Stream) -> f64 {
        match self {
            PotentialModel::Zero => 0.0,
            PotentialModel::Anderson { disorder, lambda, scale } => -lambda * disorder.sample(rng) / scale.sqrt(),
            PotentialModel::Laplacian { d } => {
                let deg = offspring as f64 + if is_root { 0.0 } else { 1.0 };
                (deg - d) / d.sqrt()
            }
        }
    }

    fn is_zero(&self) -> bool {
        matches!(self, PotentialModel::Zero)
            || matches!(self, PotentialModel::Anderson { lambda, .. } if *lambda == 0.0)
    }
}

impl PotentialModel {
    pub fn validate(&self) -> Result<()> {
        match self {
            PotentialModel::Zero => Ok(()),
            PotentialModel::Anderson { lambda, scale, .. } => {
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return Err(Error::param("lambda", "must be finite and non-negative"));
                }
                if !(*scale > 0.0) {
                    return Err(Error::param("scale", "must be positive"));
                }
                Ok(())
            }
            PotentialModel::Laplacian { d } if *d > 0.0 => Ok(()),
            PotentialModel::Laplacian { .. } => Err(Error::param("d", "must be positive")),
        }
    }
}

/// `α_p(λ)` and `β_p(λ)` with their Monte Carlo standard errors.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ControlParams {
    pub lambda: f64,
    pub p: f64,
    pub alpha: f64,
    pub alpha_se: f64,
    pub beta: f64,
    pub beta_se: f64,
    /// `P(E_λ^c)`.
    pub prob_event_c: f64,
    /// Right-hand side of the Hölder bound on `α_2(λ)`, when `p = 2`.
    pub holder_bound: Option<f64>,
    /// Number of samples; 0 when every quantity was summed exactly.
    pub samples: usize,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 || !m.is_finite() {
        return (m, 0.0);
    }
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[inline]
fn in_event(n: u32, v: f64, d: f64, lambda: f64) -> bool {
    let r = n as f64 / d;
    v.abs() < lambda && n >= 2 && r > 1.0 - lambda && r < 1.0 + lambda
}

#[inline]
fn in_root_event(n: u32, v: f64, d_star: f64, rho: f64, lambda: f64) -> bool {
    let r = n as f64 / d_star;
    (v / rho).abs() < lambda && r > 1.0 - lambda && r < 1.0 + lambda
}

#[inline]
fn weight(n: u32, v: f64, d: f64, p: f64) -> f64 {
    if n == 0 {
        return f64::INFINITY;
    }
    let r = n as f64 / d;
    (1.0 + v.abs()).powf(2.0 * p) * (r + 1.0 / r).powf(p)
}

/// Estimates `α_p(λ)` for `(N, v)` with `N ~ bulk`, and `β_p(λ)` for the root
/// pair `(N⋆, v⋆)` with `N⋆ ~ root`. With a zero potential both are summed
/// exactly over the pmf; otherwise `samples` draws keyed by `seed` are used,
/// so repeated calls with the same seed share their draws across `λ` and the
/// estimates are monotone in `λ`.
pub fn control_params(
    bulk: &OffspringLaw,
    root: &OffspringLaw,
    potential: &dyn PotentialSampler,
    lambda: f64,
    p: f64,
    samples: usize,
    seed: u64,
) -> Result<ControlParams> {
    if !(lambda > 0.0 && lambda < 1.0) {
        return Err(Error::param("lambda", format!("{lambda} is not in (0, 1)")));
    }
    if !(p >= 2.0) {
        return Err(Error::param("p", format!("{p} < 2")));
    }
    let d = bulk.mean();
    let d_star = root.mean();
    let rho = d_star / d;

    if potential.is_zero() {
        let mut alpha = 0.0;
        let mut pc = 0.0;
        let mut w12 = 0.0;
        for (k, pk) in bulk.pmf().iter().enumerate() {
            if *pk == 0.0 {
                continue;
            }
            let k = k as u32;
            if !in_event(k, 0.0, d, lambda) {
                alpha += pk * weight(k, 0.0, d, p);
                pc += pk;
            }
            w12 += pk * weight(k, 0.0, d, 12.0);
        }
        let mut beta = 0.0;
        for (k, pk) in root.pmf().iter().enumerate() {
            if *pk > 0.0 && !in_root_event(k as u32, 0.0, d_star, rho, lambda) {
                beta += pk * weight(k as u32, 0.0, d_star, p);
            }
        }
        let holder = (p == 2.0).then(|| pc.sqrt() * w12.powf(1.0 / 6.0));
        return Ok(ControlParams {
            lambda,
            p,
            alpha,
            alpha_se: 0.0,
            beta,
            beta_se: 0.0,
            prob_event_c: pc,
            holder_bound: holder,
            samples: 0,
        });
    }

    if samples < 2 {
        return Err(Error::param("samples", "need at least 2 Monte Carlo samples"));
    }
    let mut rng = rng::stream(seed, &[tag::CONTROL]);
    let mut a = Vec::with_capacity(samples);
    let mut b = Vec::with_capacity(samples);
    let mut ind = Vec::with_capacity(samples);
    let (mut v12, mut r12) = (0.0, 0.0);
    for _ in 0..samples {
        let n = bulk.sample(&mut rng);
        let v = potential.sample_potential(n, false, &mut rng);
        let out = !in_event(n, v, d, lambda);
        a.push(if out { weight(n, v, d, p) } else { 0.0 });
        ind.push(if out { 1.0 } else { 0.0 });
        v12 += (1.0 + v.abs()).powi(12);
        r12 += if n == 0 { f64::INFINITY } else { (n as f64 / d + d / n as f64).powi(12) };

        let ns = root.sample(&mut rng);
        let vs = potential.sample_potential(ns, true, &mut rng);
        let out = !in_root_event(ns, vs, d_star, rho, lambda);
        b.push(if out { weight(ns, vs / rho, d_star, p) } else { 0.0 });
    }
    let (alpha, alpha_se) = mean_se(&a);
    let (beta, beta_se) = mean_se(&b);
    let (pc, _) = mean_se(&ind);
    let n = samples as f64;
    let holder = (p == 2.0).then(|| pc.sqrt() * (v12 / n).powf(1.0 / 3.0) * (r12 / n).powf(1.0 / 6.0));
    Ok(ControlParams { lambda, p, alpha, alpha_se, beta, beta_se, prob_event_c: pc, holder_bound: holder, samples })
}

/// `h(u) = (1+u) ln(1+u) - u`.
pub fn bennett_h(u: f64) -> f64 {
    (1.0 + u) * u.ln_1p() - u
}

/// `2 exp(-d h(λ))`, a bound on `P(|Z - d| ≥ λ d)` for binomial `Z` of mean `d`.
pub fn bennett_tail(d: f64, lambda: f64) -> f64 {
    2.0 * (-d * bennett_h(lambda)).exp()
}

/// `ρ (ψ(ρ)/ρ)^k`, a bound on `P(Z ≥ k)` for the total progeny `Z` of a
/// `GW(Q)` tree, valid when `ψ(ρ) ≤ ρ` and `ρ ≥ 1`.
pub fn progeny_tail_bound(q: &OffspringLaw, rho: f64, k: u32) -> Result<f64> {
    if !(rho >= 1.0) {
        return Err(Error::param("rho", format!("{rho} < 1")));
    }
    let psi = q.mgf(rho);
    if !(psi <= rho) {
        return Err(Error::param("rho", format!("ψ({rho}) = {psi} exceeds ρ")));
    }
    Ok(rho * (psi / rho).powi(k as i32))
}

/// The `ρ ≥ 1` minimising `ψ(ρ)/ρ` over `[1, rho_max]` (golden section; the
/// ratio is log-convex in `ρ`).
pub fn optimal_progeny_rho(q: &OffspringLaw, rho_max: f64) -> f64 {
    let f = |r: f64| q.mgf(r).ln() - r.ln();
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let (mut a, mut b) = (1.0, rho_max.max(1.0));
    let mut c = b - g * (b - a);
    let mut e = a + g * (b - a);
    for _ in 0..200 {
        if f(c) < f(e) {
            b = e;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        e = a + g * (b - a);
        if b - a < 1e-12 {
            break;
        }
    }
    0.5 * (a + b)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExtinctProgenyBound {
    pub bound: f64,
    /// `q ≤ 2^{-n/(n-1)}`; when false the bound is returned but is not guaranteed.
    pub precondition_met: bool,
    pub q: f64,
}

/// `(q^{1/n}/π_e) (2 q^{1-1/n})^k` with `q = P(N < n)`: a bound on
/// `P(Z ≥ k)` for the size `Z` of a tree conditioned on extinction.
pub fn extinct_progeny_bound(law: &OffspringLaw, n: u32, k: u32) -> Result<ExtinctProgenyBound> {
    if n < 2 {
        return Err(Error::param("n", "must be at least 2"));
    }
    let pi_e = law.extinction_probability();
    if !(pi_e > 0.0) {
        return Err(Error::param("law", "extinction probability is zero"));
    }
    let q: f64 = (0..n as usize).map(|j| law.prob(j)).sum();
    let nf = n as f64;
    let bound = q.powf(1.0 / nf) / pi_e * (2.0 * q.powf(1.0 - 1.0 / nf)).powi(k as i32);
    Ok(ExtinctProgenyBound { bound, precondition_met: q <= 2f64.powf(-nf / (nf - 1.0)), q })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn size_bias_closed_forms() {
        assert_eq!(OffspringLaw::poisson(2.5).unwrap().size_bias().unwrap().kind(), &LawKind::Poisson { d: 2.5 });
        assert_eq!(OffspringLaw::dirac(4).unwrap().size_bias().unwrap().kind(), &LawKind::Dirac { d: 3 });
        let b = OffspringLaw::binomial(10, 0.3).unwrap().size_bias().unwrap();
        assert_eq!(b.kind(), &LawKind::Binomial { n: 9, p: 0.3 });
        let c = OffspringLaw::binomial(10, 0.3).unwrap().conditioned(2).unwrap().size_bias().unwrap();
        assert_eq!(c.conditioned_at_least(), 1);
    }

    #[test]
    fn size_bias_matches_generic_formula() {
        for law in [
            OffspringLaw::poisson(3.0).unwrap(),
            OffspringLaw::binomial(12, 0.4).unwrap().conditioned(2).unwrap(),
            OffspringLaw::poisson(5.0).unwrap().conditioned(2).unwrap(),
        ] {
            let sb = law.size_bias().unwrap();
            let d = law.mean();
            for k in 0..15 {
                let want = (k + 1) as f64 * law.prob(k + 1) / d;
                assert!((sb.prob(k) - want).abs() < 1e-12, "{law} k={k}");
            }
            let d_hat = (law.moment(2) - law.moment(1)) / law.moment(1);
            assert!((sb.mean() - d_hat).abs() < 1e-10);
        }
    }

    #[test]
    fn mgf_and_moments() {
        let p = OffspringLaw::poisson(2.0).unwrap();
        assert!((p.mgf(0.0) - (-2f64).exp()).abs() < 1e-16);
        assert!((p.mgf(0.0) - 0.13534).abs() < 1e-5);
        assert!((horner(p.pmf(), 0.7) - p.mgf(0.7)).abs() < 1e-13);
        assert_eq!(OffspringLaw::dirac(5).unwrap().moment(3), 125.0);
        assert_eq!(OffspringLaw::dirac(7).unwrap().ratio_moment(3.0), 8.0);
        assert!(p.ratio_moment(2.0).is_infinite());
        let c = p.conditioned(2).unwrap();
        assert!((horner(c.pmf(), 0.4) - c.mgf(0.4)).abs() < 1e-13);
    }

    #[test]
    fn pmf_sums_to_one() {
        for law in [
            OffspringLaw::poisson(0.3).unwrap(),
            OffspringLaw::poisson(100.0).unwrap(),
            OffspringLaw::binomial(1000, 0.03).unwrap(),
            OffspringLaw::poisson(30.0).unwrap().conditioned(2).unwrap().truncated(40).unwrap(),
        ] {
            let s: f64 = law.pmf().iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extinction_examples() {
        assert_eq!(OffspringLaw::dirac(2).unwrap().extinction_probability(), 0.0);
        assert_eq!(OffspringLaw::dirac(1).unwrap().extinction_probability(), 0.0);
        assert_eq!(OffspringLaw::poisson(0.5).unwrap().extinction_probability(), 1.0);
        let p = OffspringLaw::poisson(2.0).unwrap();
        let pi = p.extinction_probability();
        assert!((pi - 0.2031878699).abs() < 1e-9);
        assert!((p.mgf(pi) - pi).abs() < 1e-14);
        let near = OffspringLaw::poisson(1.05).unwrap();
        let pi = near.extinction_probability();
        assert!((near.mgf(pi) - pi).abs() < 1e-13 && pi < 1.0 && pi > 0.8);
    }

    #[test]
    fn extinct_law_matches_generic_weights() {
        for law in [OffspringLaw::poisson(2.0).unwrap(), OffspringLaw::binomial(9, 0.3).unwrap()] {
            let pi = law.extinction_probability();
            let e = law.extinct_law(pi).unwrap();
            for k in 0..10 {
                let want = law.prob(k) * pi.powi(k as i32 - 1);
                assert!((e.prob(k) - want).abs() < 1e-12, "{law} k={k}");
            }
        }
    }

    #[test]
    fn skeleton_scale_and_mgf() {
        let law = OffspringLaw::poisson(3.0).unwrap();
        let s = SkeletonSplitLaw::new(law.clone(), law.clone()).unwrap();
        assert!((s.d_s() - 3.0).abs() < 1e-12);
        assert!(s.phi_prime_at_survival() >= 1.5);
        assert!((s.joint_mgf(1.0, 1.0) - 1.0).abs() < 1e-12);
        let pmf = s.skeleton_pmf();
        let via_mgf = s.joint_mgf(0.5, 1.0);
        assert!((horner(&pmf, 0.5) - via_mgf).abs() < 1e-12);

        let dir = SkeletonSplitLaw::new(OffspringLaw::dirac(3).unwrap(), OffspringLaw::dirac(4).unwrap()).unwrap();
        let mut rng = rng::stream(1, &[]);
        for _ in 0..100 {
            assert_eq!(dir.sample(&mut rng).unwrap(), (3, 0));
            assert_eq!(dir.sample_root(&mut rng).unwrap(), (4, 0));
        }
        assert!(dir.extinct_law().is_none());
    }

    #[test]
    fn control_params_examples() {
        let dir = OffspringLaw::dirac(3).unwrap();
        let c = control_params(&dir, &dir, &PotentialModel::Zero, 0.2, 2.0, 0, 0).unwrap();
        assert_eq!((c.alpha, c.beta, c.prob_event_c), (0.0, 0.0, 0.0));
        let small = OffspringLaw::poisson(10.0).unwrap().conditioned(1).unwrap();
        let big = OffspringLaw::poisson(200.0).unwrap().conditioned(1).unwrap();
        let a_small = control_params(&small, &small, &PotentialModel::Zero, 0.5, 2.0, 0, 0).unwrap();
        let a_big = control_params(&big, &big, &PotentialModel::Zero, 0.5, 2.0, 0, 0).unwrap();
        assert!(a_big.alpha < a_small.alpha);
        assert!(a_small.alpha >= a_small.prob_event_c);
        assert!(a_small.holder_bound.unwrap() >= a_small.alpha);
    }

    #[test]
    fn bennett_examples() {
        assert!((bennett_h(0.5) - 0.108198).abs() < 1e-6);
        assert!((bennett_tail(30.0, 0.5) - 0.0779).abs() < 1e-4);
        assert!((bennett_tail(5.0, 1e-9) - 2.0).abs() < 1e-9);
    }

    #[test]
    fn progeny_bounds() {
        let q = OffspringLaw::poisson(0.5).unwrap();
        assert!(progeny_tail_bound(&q, 1.0, 3).unwrap() <= 1.0);
        let rho = optimal_progeny_rho(&q, 50.0);
        assert!((rho - 2.0).abs() < 1e-6);
        let pois = OffspringLaw::poisson(2.0).unwrap();
        let c = extinct_progeny_bound(&pois, 2, 20).unwrap();
        assert!(!c.precondition_met);
        assert!((c.q - 3.0 * (-2f64).exp()).abs() < 1e-14);
        assert!(c.bound.is_finite());
    }

    #[test]
    fn parse_and_json_round_trip() {
        for s in ["poisson:2", "dirac:3", "binomial:10,0.3", "poisson:30:min=2", "empirical:0.2,0.8:cap=1"] {
            let law: OffspringLaw = s.parse().unwrap();
            let json = serde_json::to_string(&law).unwrap();
            let back: OffspringLaw = serde_json::from_str(&json).unwrap();
            assert_eq!(law, back, "{s}");
            assert_eq!(law, law.to_string().parse().unwrap());
        }
        assert!("poisson".parse::<OffspringLaw>().is_err());
        assert!("poisson:-1".parse::<OffspringLaw>().is_err());
        assert!("gamma:1".parse::<OffspringLaw>().is_err());
        assert!(serde_json::from_str::<OffspringLaw>(r#"{"kind":"poisson","params":{"mean":2}}"#).is_err());
        let l: OffspringLaw =
            serde_json::from_str(r#"{"kind":"poisson","params":{"d":30},"conditioned_at_least":2}"#).unwrap();
        assert_eq!(l.prob(1), 0.0);
    }
}
