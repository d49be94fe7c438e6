//! Finite rooted trees: sampling, exact root resolvents, a dense oracle and
//! Karp-Sipser leaf removal.
//!
//! Vertices are stored breadth first, so a parent always precedes its
//! children and the children of `u` occupy a contiguous index range. The
//! bottom-up resolvent recursion is then one reverse sweep over the arrays.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};
use std::fmt::Write as _;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::halfplane::{semicircle_transform, HalfPlanePoint};
use crate::offspring::{OffspringLaw, PotentialSampler, SkeletonSplitLaw, MAX_REJECTIONS};
use crate::rng::Stream;

pub const DEFAULT_VERTEX_CAP: usize = 10_000_000;
pub const DENSE_ORACLE_LIMIT: usize = 2000;
const NO_PARENT: u32 = u32::MAX;

/// Value assumed for the resolvents of the hidden children of a truncated vertex.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Zero,
    #[default]
    Semicircle,
    Custom(HalfPlanePoint),
}

impl Boundary {
    pub fn value(self, z: HalfPlanePoint) -> Complex64 {
        match self {
            Boundary::Zero => Complex64::new(0.0, 0.0),
            Boundary::Semicircle => semicircle_transform(z).value(),
            Boundary::Custom(h) => h.value(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruncationSpec {
    /// Vertices at this depth keep their drawn offspring count but their
    /// children are not materialized. `None` samples the whole tree.
    pub max_depth: Option<u32>,
    pub boundary: Boundary,
}

impl TruncationSpec {
    pub fn depth(max_depth: u32) -> Self {
        TruncationSpec { max_depth: Some(max_depth), boundary: Boundary::Semicircle }
    }

    pub fn none() -> Self {
        TruncationSpec { max_depth: None, boundary: Boundary::Semicircle }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiniteTree {
    parent: Vec<u32>,
    first_child: Vec<u32>,
    offspring: Vec<u32>,
    potential: Vec<f64>,
    truncated: Vec<bool>,
}

impl FiniteTree {
    pub fn single(potential: f64) -> Self {
        FiniteTree {
            parent: vec![NO_PARENT],
            first_child: vec![1],
            offspring: vec![0],
            potential: vec![potential],
            truncated: vec![false],
        }
    }

    /// Builds a tree from a breadth-first parent array (`None` for the root).
    pub fn from_parents(parents: &[Option<usize>], potential: &[f64]) -> Result<Self> {
        let n = parents.len();
        let fmt = |line: usize, r: &str| Error::TreeFormat { line, reason: r.to_string() };
        if n == 0 || potential.len() != n {
            return Err(fmt(0, "need one potential per vertex and at least one vertex"));
        }
        if parents[0].is_some() {
            return Err(fmt(1, "vertex 0 must be the root"));
        }
        let mut offspring = vec![0u32; n];
        let mut first_child = vec![u32::MAX; n];
        let mut last_parent = 0usize;
        for (u, p) in parents.iter().enumerate().skip(1) {
            let p = p.ok_or_else(|| fmt(u + 1, "second root"))?;
            if p >= u || p < last_parent {
                return Err(fmt(u + 1, "parents must precede children in breadth-first order"));
            }
            last_parent = p;
            if offspring[p] == 0 {
                first_child[p] = u as u32;
            }
            offspring[p] += 1;
        }
        let mut next = n as u32;
        for u in (0..n).rev() {
            if offspring[u] == 0 {
                first_child[u] = next;
            } else {
                next = first_child[u];
            }
        }
        Ok(FiniteTree {
            parent: parents.iter().map(|p| p.map_or(NO_PARENT, |x| x as u32)).collect(),
            first_child,
            offspring,
            potential: potential.to_vec(),
            truncated: vec![false; n],
        })
    }

    pub fn len(&self) -> usize {
        self.parent.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parent.is_empty()
    }

    pub fn parent(&self, u: usize) -> Option<usize> {
        let p = self.parent[u];
        (p != NO_PARENT).then_some(p as usize)
    }

    /// Materialized children of `u`.
    pub fn children(&self, u: usize) -> std::ops::Range<usize> {
        if self.truncated[u] {
            return 0..0;
        }
        let f = self.first_child[u] as usize;
        f..f + self.offspring[u] as usize
    }

    /// Drawn offspring count `N_u` (including hidden children of truncated vertices).
    pub fn offspring(&self, u: usize) -> u32 {
        self.offspring[u]
    }

    pub fn potential(&self, u: usize) -> f64 {
        self.potential[u]
    }

    pub fn potentials(&self) -> &[f64] {
        &self.potential
    }

    pub fn is_truncated(&self, u: usize) -> bool {
        self.truncated[u]
    }

    pub fn has_truncation(&self) -> bool {
        self.truncated.iter().any(|&t| t)
    }

    /// Number of materialized neighbours.
    pub fn degree(&self, u: usize) -> usize {
        self.children(u).len() + usize::from(u != 0)
    }

    pub fn depths(&self) -> Vec<u32> {
        let mut d = vec![0u32; self.len()];
        for u in 1..self.len() {
            d[u] = d[self.parent[u] as usize] + 1;
        }
        d
    }

    /// Number of vertices at each depth.
    pub fn generation_sizes(&self) -> Vec<usize> {
        let mut out: Vec<usize> = Vec::new();
        for d in self.depths() {
            let d = d as usize;
            if out.len() <= d {
                out.resize(d + 1, 0);
            }
            out[d] += 1;
        }
        out
    }

    /// Subtree induced by `keep`, rooted at `top`, which must be an ancestor
    /// of every kept vertex reachable through kept edges.
    fn induced(&self, keep: &[bool], top: usize) -> FiniteTree {
        let mut order = vec![top];
        let mut parents: Vec<Option<usize>> = vec![None];
        let mut index = vec![usize::MAX; self.len()];
        index[top] = 0;
        let mut head = 0;
        while head < order.len() {
            let u = order[head];
            for c in self.children(u) {
                if keep[c] {
                    index[c] = order.len();
                    order.push(c);
                    parents.push(Some(index[u]));
                }
            }
            head += 1;
        }
        let pot: Vec<f64> = order.iter().map(|&u| self.potential[u]).collect();
        let mut t = FiniteTree::from_parents(&parents, &pot).expect("induced subtree is breadth first");
        for (i, &u) in order.iter().enumerate() {
            if self.truncated[u] {
                t.truncated[i] = true;
                t.offspring[i] = self.offspring[u];
            }
        }
        t
    }

    /// Exact `(H - z)^{-1}_{oo}` for `H = A/√d - V`, evaluated bottom-up.
    /// Truncated vertices see their hidden children through `boundary`.
    pub fn root_resolvent(&self, z: HalfPlanePoint, scale_d: f64, boundary: Boundary) -> HalfPlanePoint {
        let g = self.resolvents(z, scale_d, boundary);
        HalfPlanePoint::new_unchecked(g[0])
    }

    /// `g_u` for every vertex (each for the subtree below `u`).
    pub fn resolvents(&self, z: HalfPlanePoint, scale_d: f64, boundary: Boundary) -> Vec<Complex64> {
        let zc = z.value();
        let inv_d = 1.0 / scale_d;
        let b = if self.has_truncation() { boundary.value(z) } else { Complex64::new(0.0, 0.0) };
        let mut g = vec![Complex64::new(0.0, 0.0); self.len()];
        for u in (0..self.len()).rev() {
            let s = if self.truncated[u] {
                b * self.offspring[u] as f64
            } else {
                self.children(u).map(|c| g[c]).sum::<Complex64>()
            };
            g[u] = -(zc + s * inv_d + self.potential[u]).inv();
        }
        g
    }

    /// Root entry of `(H - z)^{-1}` from a dense Gaussian elimination with
    /// partial pivoting (vertices ordered leaves first).
    pub fn dense_oracle(&self, z: HalfPlanePoint, scale_d: f64, boundary: Boundary) -> Result<HalfPlanePoint> {
        let n = self.len();
        if n > DENSE_ORACLE_LIMIT {
            return Err(Error::OracleTooLarge { n, limit: DENSE_ORACLE_LIMIT });
        }
        let zero = Complex64::new(0.0, 0.0);
        let b = boundary.value(z);
        let hop = Complex64::new(1.0 / scale_d.sqrt(), 0.0);
        let idx = |u: usize| n - 1 - u;
        let mut m = vec![zero; n * n];
        for u in 0..n {
            let i = idx(u);
            let mut diag = -z.value() - self.potential[u];
            if self.truncated[u] {
                diag -= b * self.offspring[u] as f64 / scale_d;
            }
            m[i * n + i] = diag;
            if let Some(p) = self.parent(u) {
                let j = idx(p);
                m[i * n + j] = hop;
                m[j * n + i] = hop;
            }
        }
        let mut rhs = vec![zero; n];
        rhs[idx(0)] = Complex64::new(1.0, 0.0);

        for k in 0..n {
            let mut piv = k;
            let mut best = m[k * n + k].norm();
            for r in k + 1..n {
                let v = m[r * n + k].norm();
                if v > best {
                    best = v;
                    piv = r;
                }
            }
            if best == 0.0 {
                return Err(Error::param("z", "singular system in dense oracle"));
            }
            if piv != k {
                for c in 0..n {
                    m.swap(k * n + c, piv * n + c);
                }
                rhs.swap(k, piv);
            }
            let pivot = m[k * n + k];
            let nz: Vec<usize> = (k + 1..n).filter(|&c| m[k * n + c] != zero).collect();
            for r in k + 1..n {
                let a = m[r * n + k];
                if a == zero {
                    continue;
                }
                let f = a / pivot;
                m[r * n + k] = zero;
                for &c in &nz {
                    let v = m[k * n + c];
                    m[r * n + c] -= f * v;
                }
                let rk = rhs[k];
                rhs[r] -= f * rk;
            }
        }
        let mut x = vec![zero; n];
        for k in (0..n).rev() {
            let mut s = rhs[k];
            for c in k + 1..n {
                let v = m[k * n + c];
                if v != zero {
                    s -= v * x[c];
                }
            }
            x[k] = s / m[k * n + k];
        }
        HalfPlanePoint::from_complex(x[idx(0)])
    }

    /// Text form: a `#` header line followed by `parent offspring potential
    /// truncated` per vertex in breadth-first order (`-1` marks the root).
    pub fn to_text(&self, header: &str) -> String {
        let mut s = String::with_capacity(self.len() * 16);
        let _ = writeln!(s, "# {} vertices={}", header.replace('\n', " "), self.len());
        for u in 0..self.len() {
            let p = self.parent(u).map_or(-1i64, |p| p as i64);
            let _ = writeln!(s, "{} {} {} {}", p, self.offspring[u], self.potential[u], u8::from(self.truncated[u]));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut parents = Vec::new();
        let mut pot = Vec::new();
        let mut off = Vec::new();
        let mut trunc = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let bad = |r: &str| Error::TreeFormat { line: i + 1, reason: r.to_string() };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 4 {
                return Err(bad("expected 4 columns"));
            }
            let p: i64 = f[0].parse().map_err(|_| bad("bad parent"))?;
            parents.push(if p < 0 { None } else { Some(p as usize) });
            off.push(f[1].parse::<u32>().map_err(|_| bad("bad offspring"))?);
            pot.push(f[2].parse::<f64>().map_err(|_| bad("bad potential"))?);
            trunc.push(match f[3] {
                "0" => false,
                "1" => true,
                _ => return Err(bad("bad truncation flag")),
            });
        }
        let mut t = FiniteTree::from_parents(&parents, &pot)?;
        for u in 0..t.len() {
            if trunc[u] {
                if t.offspring[u] != 0 {
                    return Err(Error::TreeFormat { line: u + 1, reason: "truncated vertex with children".into() });
                }
                t.truncated[u] = true;
                t.offspring[u] = off[u];
            } else if t.offspring[u] != off[u] {
                return Err(Error::TreeFormat { line: u + 1, reason: "offspring count mismatch".into() });
            }
        }
        Ok(t)
    }
}

/// Samples a tree whose root draws from `p_star` and other vertices from
/// `p`, cut at `trunc.max_depth`, with potentials attached on the way.
pub fn sample_tree(
    p_star: &OffspringLaw,
    p: &OffspringLaw,
    potential: &dyn PotentialSampler,
    trunc: &TruncationSpec,
    cap: usize,
    rng: &mut Stream,
) -> Result<FiniteTree> {
    let mut parent = vec![NO_PARENT];
    let mut first_child = Vec::new();
    let mut offspring = Vec::new();
    let mut pot = Vec::new();
    let mut truncated = Vec::new();
    let mut depth = vec![0u32];
    let mut u = 0;
    while u < parent.len() {
        let law = if u == 0 { p_star } else { p };
        let n = law.sample(rng);
        offspring.push(n);
        pot.push(potential.sample_potential(n, u == 0, rng));
        let cut = trunc.max_depth.is_some_and(|m| depth[u] >= m) && n > 0;
        truncated.push(cut);
        first_child.push(parent.len() as u32);
        if !cut {
            if parent.len() + n as usize > cap {
                return Err(Error::TreeTooLarge { cap });
            }
            for _ in 0..n {
                parent.push(u as u32);
                depth.push(depth[u] + 1);
            }
        }
        u += 1;
    }
    Ok(FiniteTree { parent, first_child, offspring, potential: pot, truncated })
}

/// `GW(law)` tree, for pending trees and extinction experiments. Fails with
/// [`Error::TreeTooLarge`] once `cap` vertices are exceeded.
pub fn sample_gw_tree(
    law: &OffspringLaw,
    potential: &dyn PotentialSampler,
    cap: usize,
    rng: &mut Stream,
) -> Result<FiniteTree> {
    sample_tree(law, law, potential, &TruncationSpec::none(), cap, rng)
}

/// Root resolvent of a `GW(law)` tree with zero potential, sampled depth
/// first and reduced on the fly. Returns `None` if the tree exceeds `cap`
/// vertices, otherwise the resolvent and the vertex count.
pub fn sample_gw_resolvent(
    law: &OffspringLaw,
    z: Complex64,
    scale_d: f64,
    cap: usize,
    rng: &mut Stream,
) -> Option<(Complex64, usize)> {
    struct Frame {
        left: u32,
        sum: Complex64,
    }
    let inv_d = 1.0 / scale_d;
    let mut stack = vec![Frame { left: law.sample(rng), sum: Complex64::new(0.0, 0.0) }];
    let mut size = 1usize;
    loop {
        let top = stack.last_mut().expect("stack holds the root until the end");
        if top.left > 0 {
            top.left -= 1;
            size += 1;
            if size > cap {
                return None;
            }
            stack.push(Frame { left: law.sample(rng), sum: Complex64::new(0.0, 0.0) });
            continue;
        }
        let f = stack.pop().expect("non-empty");
        let g = -(z + f.sum * inv_d).inv();
        match stack.last_mut() {
            Some(p) => p.sum += g,
            None => return Some((g, size)),
        }
    }
}

/// `v(z) = (1/d_s) Σ_{i ≤ n_e} g^e_i(z)` over `n_e` independent trees
/// conditioned on extinction. Trees above `cap` vertices are redrawn; the
/// second value counts those redraws.
pub fn pending_sum(
    split: &SkeletonSplitLaw,
    n_e: u32,
    z: HalfPlanePoint,
    d_s: f64,
    cap: usize,
    rng: &mut Stream,
) -> Result<(Complex64, u64)> {
    let mut v = Complex64::new(0.0, 0.0);
    if n_e == 0 {
        return Ok((v, 0));
    }
    let law = split
        .extinct_law()
        .ok_or_else(|| Error::param("n_e", "pending trees requested for a law without extinction"))?;
    let mut redraws = 0u64;
    for _ in 0..n_e {
        loop {
            if let Some((g, _)) = sample_gw_resolvent(law, z.value(), d_s, cap, rng) {
                v += g;
                break;
            }
            redraws += 1;
            if redraws >= MAX_REJECTIONS {
                return Err(Error::RejectionExhausted { what: "pending tree under the vertex cap", attempts: redraws });
            }
        }
    }
    Ok((v / d_s, redraws))
}

/// Draws `N^e` from the skeleton split and returns `v(z)` with the redraw count.
pub fn pending_tree_potential(
    split: &SkeletonSplitLaw,
    z: HalfPlanePoint,
    d_s: f64,
    cap: usize,
    rng: &mut Stream,
) -> Result<(Complex64, u64)> {
    let (_, n_e) = split.sample(rng)?;
    pending_sum(split, n_e, z, d_s, cap, rng)
}

/// Karp-Sipser leaf removal with the lowest-index leaf first. Truncated
/// vertices stand for unexplored territory: they are never removed, and a
/// leaf hanging off one is left in place. Returns the surviving components
/// with isolated vertices discarded.
pub fn karp_sipser_core(tree: &FiniteTree) -> Vec<FiniteTree> {
    let order: Vec<usize> = (0..tree.len()).collect();
    karp_sipser_with_priority(tree, &order)
}

/// Vertex sets left by leaf removal when leaves are taken in increasing
/// `rank[u]`.
pub fn karp_sipser_survivors(tree: &FiniteTree, rank: &[usize]) -> Vec<bool> {
    let n = tree.len();
    let mut alive = vec![true; n];
    let mut deg: Vec<usize> = (0..n).map(|u| tree.degree(u)).collect();
    let neighbours = |u: usize| tree.parent(u).into_iter().chain(tree.children(u));
    let mut heap: BinaryHeap<Reverse<(usize, usize)>> =
        (0..n).filter(|&u| deg[u] == 1 && !tree.truncated[u]).map(|u| Reverse((rank[u], u))).collect();
    while let Some(Reverse((_, u))) = heap.pop() {
        if !alive[u] || deg[u] != 1 || tree.truncated[u] {
            continue;
        }
        let w = neighbours(u).find(|&x| alive[x]).expect("leaf has one live neighbour");
        if tree.truncated[w] {
            continue;
        }
        alive[u] = false;
        alive[w] = false;
        for x in neighbours(w) {
            if alive[x] {
                deg[x] -= 1;
                if deg[x] == 1 && !tree.truncated[x] {
                    heap.push(Reverse((rank[x], x)));
                }
            }
        }
        deg[u] = 0;
        deg[w] = 0;
    }
    for u in 0..n {
        if alive[u] && deg[u] == 0 {
            alive[u] = false;
        }
    }
    alive
}

pub fn karp_sipser_with_priority(tree: &FiniteTree, rank: &[usize]) -> Vec<FiniteTree> {
    let alive = karp_sipser_survivors(tree, rank);
    // In breadth-first order the first live vertex met in a component is its top.
    let mut seen = vec![false; tree.len()];
    let mut out = Vec::new();
    for top in 0..tree.len() {
        if !alive[top] || seen[top] {
            continue;
        }
        let mut q = VecDeque::from([top]);
        seen[top] = true;
        while let Some(u) = q.pop_front() {
            for c in tree.children(u) {
                if alive[c] && !seen[c] {
                    seen[c] = true;
                    q.push_back(c);
                }
            }
        }
        out.push(tree.induced(&alive, top));
    }
    out
}

/// Uniformly random priority vector, for order-independence checks.
pub fn random_rank<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut r: Vec<usize> = (0..n).collect();
    r.shuffle(rng);
    r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::offspring::PotentialModel;
    use crate::rng;

    fn path(n: usize) -> FiniteTree {
        let parents: Vec<Option<usize>> = (0..n).map(|i| i.checked_sub(1)).collect();
        FiniteTree::from_parents(&parents, &vec![0.0; n]).unwrap()
    }

    #[test]
    fn regular_tree_count() {
        let mut r = rng::stream(1, &[]);
        let t = sample_tree(
            &OffspringLaw::dirac(3).unwrap(),
            &OffspringLaw::dirac(2).unwrap(),
            &PotentialModel::Zero,
            &TruncationSpec { max_depth: Some(2), boundary: Boundary::Zero },
            DEFAULT_VERTEX_CAP,
            &mut r,
        )
        .unwrap();
        assert_eq!(t.len(), 10);
        assert_eq!(t.generation_sizes(), vec![1, 3, 6]);
    }

    #[test]
    fn small_resolvents() {
        let i = HalfPlanePoint::I;
        let g = FiniteTree::single(0.0).root_resolvent(i, 1.0, Boundary::Zero);
        assert!((g.value() - Complex64::i()).norm() < 1e-15);
        let z = HalfPlanePoint::new(0.3, 0.7).unwrap();
        let two = path(2).root_resolvent(z, 1.0, Boundary::Zero).value();
        let want = z.value() / (1.0 - z.value() * z.value());
        assert!((two - want).norm() < 1e-14);
        let three = path(3);
        let s2 = 2f64.sqrt();
        let want = 0.5 / (0.0 - i.value()) + 0.25 / (s2 - i.value()) + 0.25 / (-s2 - i.value());
        assert!((three.root_resolvent(i, 1.0, Boundary::Zero).value() - want).norm() < 1e-14);
        assert!((three.dense_oracle(i, 1.0, Boundary::Zero).unwrap().value() - want).norm() < 1e-14);
    }

    #[test]
    fn oracle_agrees_on_truncated_random_trees() {
        let mut r = rng::stream(2, &[]);
        let law = OffspringLaw::poisson(1.6).unwrap();
        let pot = PotentialModel::Anderson { disorder: crate::offspring::Disorder::Uniform, lambda: 1.0, scale: 1.6 };
        for k in 0..30 {
            let t = sample_tree(&law, &law, &pot, &TruncationSpec::depth(6), 2000, &mut r).unwrap();
            let z = HalfPlanePoint::new(-1.0 + 0.07 * k as f64, 0.05 + 0.02 * k as f64).unwrap();
            let a = t.root_resolvent(z, 1.6, Boundary::Semicircle).value();
            let b = t.dense_oracle(z, 1.6, Boundary::Semicircle).unwrap().value();
            assert!((a - b).norm() <= 1e-10 * a.norm().max(1.0));
        }
    }

    #[test]
    fn text_round_trip() {
        let mut r = rng::stream(3, &[]);
        let law = OffspringLaw::poisson(2.0).unwrap();
        let pot = PotentialModel::Anderson { disorder: crate::offspring::Disorder::Gaussian, lambda: 0.3, scale: 2.0 };
        let t = sample_tree(&law, &law, &pot, &TruncationSpec::depth(4), 10_000, &mut r).unwrap();
        let s = t.to_text("law=poisson:2 seed=3");
        assert!(s.starts_with("# law=poisson:2 seed=3"));
        assert_eq!(FiniteTree::from_text(&s).unwrap(), t);
        assert!(FiniteTree::from_text("-1 0 0\n").is_err());
        assert!(FiniteTree::from_text("-1 1 0 0\n0 0 0 0\n0 0 0 0\n").is_err());
    }

    #[test]
    fn karp_sipser_small_cases() {
        assert!(karp_sipser_core(&path(3)).is_empty());
        let star = FiniteTree::from_parents(&[None, Some(0), Some(0), Some(0)], &[0.0; 4]).unwrap();
        assert!(karp_sipser_core(&star).is_empty());
        assert!(karp_sipser_core(&path(6)).is_empty());
    }

    #[test]
    fn karp_sipser_keeps_boundary_structure() {
        // A root with three children, each truncated with hidden offspring:
        // no leaf can be removed because every leaf hangs off the root only
        // through unremovable vertices.
        let mut t = FiniteTree::from_parents(&[None, Some(0), Some(0), Some(0)], &[0.0; 4]).unwrap();
        for u in 1..4 {
            t.truncated[u] = true;
            t.offspring[u] = 2;
        }
        let core = karp_sipser_core(&t);
        assert_eq!(core.len(), 1);
        assert_eq!(core[0].len(), 4);
    }

    #[test]
    fn karp_sipser_order_independent() {
        let law = OffspringLaw::poisson(2.5).unwrap();
        let mut r = rng::stream(9, &[]);
        for _ in 0..40 {
            let t = sample_tree(&law, &law, &PotentialModel::Zero, &TruncationSpec::depth(5), 100_000, &mut r).unwrap();
            let base = karp_sipser_survivors(&t, &(0..t.len()).collect::<Vec<_>>());
            for _ in 0..5 {
                let rank = random_rank(t.len(), &mut r);
                assert_eq!(karp_sipser_survivors(&t, &rank), base);
            }
        }
    }

    #[test]
    fn pending_potential_examples() {
        let dir = OffspringLaw::dirac(3).unwrap();
        let split = SkeletonSplitLaw::new(dir.clone(), dir).unwrap();
        let mut r = rng::stream(4, &[]);
        let (v, _) = pending_tree_potential(&split, HalfPlanePoint::I, 3.0, 100, &mut r).unwrap();
        assert_eq!(v, Complex64::new(0.0, 0.0));

        // Two single-vertex pending trees at z = i with d_s = 2 give v = i.
        let g = -(Complex64::i()).inv();
        assert!(((g + g) / 2.0 - Complex64::i()).norm() < 1e-15);

        let pois = OffspringLaw::poisson(2.0).unwrap();
        let split = SkeletonSplitLaw::new(pois.clone(), pois).unwrap();
        let z = HalfPlanePoint::new(0.4, 0.2).unwrap();
        for _ in 0..200 {
            let (v, _) = pending_tree_potential(&split, z, 2.0, 1000, &mut r).unwrap();
            assert!(v.im >= 0.0);
        }
    }

    #[test]
    fn depth_first_resolvent_matches_tree() {
        let law = OffspringLaw::poisson(0.9).unwrap();
        let z = HalfPlanePoint::new(0.2, 0.3).unwrap();
        for s in 0..50u64 {
            let mut r1 = rng::stream(s, &[]);
            let (g, size) = sample_gw_resolvent(&law, z.value(), 2.0, 100_000, &mut r1).unwrap();
            assert!(g.im > 0.0 && size >= 1);
        }
    }
}
