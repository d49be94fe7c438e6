//! Adjacency spectra of small free trees and the excluded set `B(ε)`.
//!
//! A pending tree with `k` vertices has eigenvalues in `Λ_k/√d_s`, so its
//! root resolvent is bounded once `Re z` stays away from those points. The
//! excluded set spends an `ε·2^{-k}` measure budget on each `k`.

use std::collections::HashSet;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::par::{map_indexed, Exec};
use crate::tree::FiniteTree;

pub const K_MAX_CAP: usize = 14;
pub const DEFAULT_K_MAX: usize = 12;
/// Eigenvalues closer than this are identified.
pub const DEDUP_TOL: f64 = 1e-9;

/// Unlabeled tree with vertices in breadth-first order from a center.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct FreeTree {
    parents: Vec<Option<usize>>,
}

impl FreeTree {
    pub fn len(&self) -> usize {
        self.parents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parents.is_empty()
    }

    pub fn parents(&self) -> &[Option<usize>] {
        &self.parents
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.parents.iter().enumerate().filter_map(|(u, p)| p.map(|p| (p, u)))
    }

    pub fn to_finite_tree(&self) -> FiniteTree {
        FiniteTree::from_parents(&self.parents, &vec![0.0; self.len()]).expect("stored in breadth-first order")
    }

    pub fn adjacency_eigenvalues(&self) -> Vec<f64> {
        let n = self.len();
        let mut a = DMatrix::<f64>::zeros(n, n);
        for (p, c) in self.edges() {
            a[(p, c)] = 1.0;
            a[(c, p)] = 1.0;
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(a).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for (p, c) in self.edges() {
            adj[p].push(c);
            adj[c].push(p);
        }
        adj
    }
}

/// One or two centers, found by stripping leaves.
fn centers(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut deg: Vec<usize> = adj.iter().map(Vec::len).collect();
    let mut layer: Vec<usize> = (0..n).filter(|&u| deg[u] == 1).collect();
    let mut left = n;
    while left > 2 {
        left -= layer.len();
        let mut next = Vec::new();
        for &u in &layer {
            for &w in &adj[u] {
                if deg[w] > 1 {
                    deg[w] -= 1;
                    if deg[w] == 1 {
                        next.push(w);
                    }
                }
            }
            deg[u] = 0;
        }
        layer = next;
    }
    layer.sort_unstable();
    layer
}

fn rooted_code(adj: &[Vec<usize>], u: usize, parent: usize) -> String {
    let mut parts: Vec<String> = adj[u].iter().filter(|&&w| w != parent).map(|&w| rooted_code(adj, w, u)).collect();
    parts.sort_unstable();
    let mut s = String::with_capacity(2 + parts.iter().map(String::len).sum::<usize>());
    s.push('(');
    for p in parts {
        s.push_str(&p);
    }
    s.push(')');
    s
}

/// Canonical parenthesis code: the smaller of the codes rooted at the centers.
pub fn canonical_code(adj: &[Vec<usize>]) -> String {
    centers(adj).into_iter().map(|c| rooted_code(adj, c, usize::MAX)).min().expect("non-empty tree")
}

/// Rebuilds a tree from a parenthesis code, numbering vertices breadth first.
fn from_code(code: &str) -> FreeTree {
    let mut children: Vec<Vec<usize>> = Vec::new();
    let mut stack: Vec<usize> = Vec::new();
    for ch in code.bytes() {
        if ch == b'(' {
            let v = children.len();
            children.push(Vec::new());
            if let Some(&p) = stack.last() {
                children[p].push(v);
            }
            stack.push(v);
        } else {
            stack.pop();
        }
    }
    let mut order = vec![0usize];
    let mut parents = vec![None];
    let mut head = 0;
    while head < order.len() {
        let u = order[head];
        for &c in &children[u] {
            parents.push(Some(head));
            order.push(c);
        }
        head += 1;
    }
    FreeTree { parents }
}

/// All free trees with `k` vertices, each exactly once, grown by attaching a
/// leaf to every vertex of every `(k-1)`-vertex tree and keeping one
/// representative per canonical code.
pub fn enumerate_trees(k: usize) -> Result<Vec<FreeTree>> {
    if k == 0 || k > K_MAX_CAP {
        return Err(Error::param("k", format!("must lie in 1..={K_MAX_CAP}")));
    }
    let mut level = vec![String::from("()")];
    for _ in 1..k {
        let mut seen = HashSet::new();
        let mut next = Vec::new();
        for code in &level {
            let t = from_code(code);
            let base = t.adjacency();
            for u in 0..t.len() {
                let mut adj = base.clone();
                let leaf = adj.len();
                adj.push(vec![u]);
                adj[u].push(leaf);
                let c = canonical_code(&adj);
                if seen.insert(c.clone()) {
                    next.push(c);
                }
            }
        }
        next.sort_unstable();
        level = next;
    }
    Ok(level.iter().map(|c| from_code(c)).collect())
}

/// Sorted distinct adjacency eigenvalues over all `k`-vertex trees.
/// Values are merged at [`DEDUP_TOL`] and mirrored so that `Λ_k = -Λ_k`.
pub fn lambda_k(k: usize) -> Result<Vec<f64>> {
    lambda_k_with(k, Exec::default())
}

pub fn lambda_k_with(k: usize, exec: Exec) -> Result<Vec<f64>> {
    let trees = enumerate_trees(k)?;
    let spectra = map_indexed(exec, trees.len(), |i| trees[i].adjacency_eigenvalues());
    let radius = 2.0 * ((k as f64) - 1.0).max(0.0).sqrt();
    let mut abs: Vec<f64> = spectra.into_iter().flatten().map(f64::abs).collect();
    abs.sort_by(f64::total_cmp);
    let mut reps: Vec<f64> = Vec::new();
    for a in abs {
        debug_assert!(a <= radius + 1e-9);
        match reps.last() {
            Some(&r) if a - r <= DEDUP_TOL => {}
            _ => reps.push(a),
        }
    }
    if reps.first().is_some_and(|&r| r <= DEDUP_TOL) {
        reps[0] = 0.0;
    }
    let mut out: Vec<f64> = reps.iter().rev().filter(|&&r| r > 0.0).map(|&r| -r).collect();
    out.extend(reps);
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ForbiddenSet {
    pub epsilon: f64,
    pub d_s: f64,
    pub k_max: usize,
    #[serde(skip)]
    pub lambda_sets: Vec<Vec<f64>>,
    pub intervals: Vec<[f64; 2]>,
}

/// Excluded set `B = ∪_{k ≤ k_max} {x : ∃λ ∈ Λ_k, |λ/√d_s - x| ≤ ε 2^{-k-1}/|Λ_k|}`.
pub fn build_forbidden(epsilon: f64, d_s: f64, k_max: usize) -> Result<ForbiddenSet> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    if !(d_s > 0.0 && d_s.is_finite()) {
        return Err(Error::param("d_s", "must be positive"));
    }
    let lambda_sets = (1..=k_max).map(lambda_k).collect::<Result<Vec<_>>>()?;
    let sd = d_s.sqrt();
    let mut raw: Vec<[f64; 2]> = Vec::new();
    for (i, set) in lambda_sets.iter().enumerate() {
        let w = half_width(epsilon, i + 1, set.len());
        raw.extend(set.iter().map(|l| [l / sd - w, l / sd + w]));
    }
    raw.sort_by(|a, b| a[0].total_cmp(&b[0]));
    let mut intervals: Vec<[f64; 2]> = Vec::new();
    for iv in raw {
        match intervals.last_mut() {
            Some(last) if iv[0] <= last[1] => last[1] = last[1].max(iv[1]),
            _ => intervals.push(iv),
        }
    }
    Ok(ForbiddenSet { epsilon, d_s, k_max, lambda_sets, intervals })
}

fn half_width(epsilon: f64, k: usize, size: usize) -> f64 {
    epsilon * 0.5f64.powi(k as i32 + 1) / size as f64
}

impl ForbiddenSet {
    /// Lebesgue measure of the merged excluded set.
    pub fn measure(&self) -> f64 {
        self.intervals.iter().map(|iv| iv[1] - iv[0]).sum()
    }

    /// Budget used by `Λ_k` before merging (`ε 2^{-k}`).
    pub fn contribution(&self, k: usize) -> f64 {
        let n = self.lambda_sets[k - 1].len();
        2.0 * half_width(self.epsilon, k, n) * n as f64
    }

    pub fn is_excluded(&self, x: f64) -> bool {
        let i = self.intervals.partition_point(|iv| iv[1] < x);
        i < self.intervals.len() && self.intervals[i][0] <= x
    }

    /// Distance from `x` to the nearest excluded interval (0 inside).
    pub fn distance(&self, x: f64) -> f64 {
        let i = self.intervals.partition_point(|iv| iv[1] < x);
        let right = self.intervals.get(i).map_or(f64::INFINITY, |iv| (iv[0] - x).max(0.0));
        let left = i.checked_sub(1).map_or(f64::INFINITY, |j| x - self.intervals[j][1]);
        right.min(left)
    }

    /// `|g_o(z)| ≤ 2^{k+1}|Λ_k|/ε` for `k`-vertex trees when `Re z ∉ B`.
    pub fn resolvent_bound(&self, k: usize) -> f64 {
        2f64.powi(k as i32 + 1) * self.lambda_sets[k - 1].len() as f64 / self.epsilon
    }

    /// `max_k |Λ_k|^{1/k}` over the stored sets.
    pub fn growth_constant(&self) -> f64 {
        self.lambda_sets
            .iter()
            .enumerate()
            .map(|(i, s)| (s.len() as f64).powf(1.0 / (i + 1) as f64))
            .fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain numbers serialize")
    }
}

pub fn resolvent_bound_on_b(k: usize, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(Error::param("epsilon", "must be positive"));
    }
    Ok(2f64.powi(k as i32 + 1) * lambda_k(k)?.len() as f64 / epsilon)
}
