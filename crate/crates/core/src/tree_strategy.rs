//! Lazy interval trees with layered pruning.
//!
//! A vertex at height `n` owns a closed interval of length `l R^-n`; its `[R]`
//! children tile the left end of it. Dangerous intervals are attached per
//! level and per layer (the homogeneous set first, the shifted overlay
//! second). Statuses are computed bottom-up, and only children whose
//! interval can meet a deeper dangerous interval are ever materialized: every
//! other child heads a full, untouched subtree and is kept.

use std::collections::{BTreeSet, HashMap};

use num_bigint::BigInt;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dangerous_sets::{DeltaInterval, DualLine, TaggedPoint};
use crate::exact_arith::{ceil_rat, floor_rat, ri, Rat};
use crate::problem_model::{Interval, Weights};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TreeError {
    #[error("pruning removed the root")]
    RootEliminated,
    #[error("two shifted candidates meet the interval of vertex {path:?} at level {level}")]
    InhomUniquenessViolated { path: Vec<u32>, level: u32 },
    #[error("child index {index} exceeds the branching factor {branching}")]
    BadIndex { index: u32, branching: u64 },
}

/// Left-aligned layout of the child intervals.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntervalAssignment {
    pub a0: Interval,
    #[serde(with = "crate::serial::rat_str")]
    pub r: Rat,
    #[serde(with = "crate::serial::rat_str")]
    pub l: Rat,
    pub branching: u64,
}

impl IntervalAssignment {
    pub fn new(a0: Interval, r: Rat) -> Self {
        let l = a0.len();
        let branching = floor_rat(&r).to_u64().expect("[R] too large");
        IntervalAssignment { a0, r, l, branching }
    }

    /// `l R^-n`.
    pub fn width(&self, n: u32) -> Rat {
        &self.l / self.r.pow(n as i32)
    }

    pub fn interval_of(&self, path: &[u32]) -> Interval {
        let mut lo = self.a0.lo.clone();
        for (h, &ix) in path.iter().enumerate() {
            assert!((ix as u64) < self.branching, "child index out of range");
            lo += self.width(h as u32 + 1) * ri(ix);
        }
        let hi = &lo + self.width(path.len() as u32);
        Interval::new(lo, hi)
    }

    /// Child interval of a vertex whose interval starts at `lo`, at height `h + 1`.
    pub fn child_of(&self, lo: &Rat, h: u32, j: u32) -> Interval {
        let w = self.width(h + 1);
        let a = lo + &w * ri(j);
        let b = &a + &w;
        Interval::new(a, b)
    }

    /// Children of a height-`h` vertex starting at `lo` whose intervals can
    /// meet the open interval `(olo, ohi)`.
    pub fn child_range(&self, lo: &Rat, h: u32, olo: &Rat, ohi: &Rat) -> Option<(u32, u32)> {
        let w = self.width(h + 1);
        let jmin = floor_rat(&((olo - lo) / &w)).max(BigInt::zero());
        let jmax: BigInt = ceil_rat(&((ohi - lo) / &w)) - BigInt::one();
        let jmax = jmax.min(BigInt::from(self.branching - 1));
        if jmin > jmax {
            None
        } else {
            Some((jmin.to_u32().unwrap(), jmax.to_u32().unwrap()))
        }
    }
}

/// Dangerous intervals of one layer, indexed by level (entry 0 is level 1),
/// and the minimum number of kept children.
#[derive(Clone, Debug)]
pub struct Layer {
    pub hazards: Vec<Vec<DeltaInterval>>,
    pub min_degree: u64,
}

impl Layer {
    fn at(&self, level: u32) -> &[DeltaInterval] {
        if level == 0 {
            return &[];
        }
        self.hazards.get(level as usize - 1).map(|v| v.as_slice()).unwrap_or(&[])
    }
}

/// Handle to one dangerous interval: (layer, level, index).
type HazardRef = (usize, u32, usize);

/// Finite-depth pruned tree. `status(path)[k]` says whether the vertex
/// survives layers `0..=k`: it avoids their dangerous intervals at its own
/// level, survives layer `k - 1`, and (below the horizon) keeps at least
/// `min_degree` children in layer `k`.
pub struct LayeredTree {
    pub assign: IntervalAssignment,
    pub layers: Vec<Layer>,
    pub depth: u32,
    memo: HashMap<Vec<u32>, Vec<bool>>,
    suspicious: HashMap<Vec<u32>, Vec<u32>>,
}

impl LayeredTree {
    pub fn new(assign: IntervalAssignment, layers: Vec<Layer>, depth: u32) -> Self {
        for l in &layers {
            assert!(l.min_degree <= assign.branching, "minimum degree above the branching factor");
        }
        LayeredTree { assign, layers, depth, memo: HashMap::new(), suspicious: HashMap::new() }
    }

    pub fn branching(&self) -> u64 {
        self.assign.branching
    }

    fn hazard(&self, h: &HazardRef) -> &DeltaInterval {
        &self.layers[h.0].at(h.1)[h.2]
    }

    fn relevant_for(&self, iv: &Interval, from_level: u32, within: Option<&[HazardRef]>) -> Vec<HazardRef> {
        let mut out = Vec::new();
        match within {
            Some(list) => {
                for h in list {
                    if h.1 >= from_level && self.hazard(h).may_meet(&iv.lo, &iv.hi) {
                        out.push(*h);
                    }
                }
            }
            None => {
                for (li, layer) in self.layers.iter().enumerate() {
                    for lv in from_level.max(1)..=self.depth {
                        for (ix, d) in layer.at(lv).iter().enumerate() {
                            if d.may_meet(&iv.lo, &iv.hi) {
                                out.push((li, lv, ix));
                            }
                        }
                    }
                }
            }
        }
        out
    }

    /// Per-layer survival of the vertex at `path`.
    pub fn status(&mut self, path: &[u32]) -> Vec<bool> {
        if let Some(s) = self.memo.get(path) {
            return s.clone();
        }
        let iv = self.assign.interval_of(path);
        let rel = self.relevant_for(&iv, path.len() as u32, None);
        self.status_inner(path.to_vec(), &iv, &rel)
    }

    fn status_inner(&mut self, path: Vec<u32>, iv: &Interval, rel: &[HazardRef]) -> Vec<bool> {
        if let Some(s) = self.memo.get(&path) {
            return s.clone();
        }
        let nl = self.layers.len();
        let h = path.len() as u32;
        if rel.is_empty() {
            return vec![true; nl];
        }
        let mut alive = vec![true; nl];
        for r in rel {
            if r.1 == h && self.hazard(r).meets(&iv.lo, &iv.hi) {
                alive[r.0] = false;
            }
        }
        let mut status = vec![true; nl];
        let mut prev = true;
        for k in 0..nl {
            prev = prev && alive[k];
            status[k] = prev;
        }
        if h < self.depth && status.iter().any(|&s| s) {
            let kids = self.suspicious_children(&path, iv, rel);
            let mut lost = vec![0u64; nl];
            for &j in &kids {
                let civ = self.assign.child_of(&iv.lo, h, j);
                let crel = self.relevant_for(&civ, h + 1, Some(rel));
                let mut cpath = path.clone();
                cpath.push(j);
                let cs = self.status_inner(cpath, &civ, &crel);
                for k in 0..nl {
                    if !cs[k] {
                        lost[k] += 1;
                    }
                }
            }
            let n = self.branching();
            let mut prev = true;
            for k in 0..nl {
                prev = prev && status[k] && n - lost[k] >= self.layers[k].min_degree;
                status[k] = prev;
            }
        }
        self.memo.insert(path, status.clone());
        status
    }

    fn suspicious_children(&mut self, path: &[u32], iv: &Interval, rel: &[HazardRef]) -> Vec<u32> {
        if let Some(s) = self.suspicious.get(path) {
            return s.clone();
        }
        let h = path.len() as u32;
        let mut set = BTreeSet::new();
        for r in rel {
            if r.1 > h {
                let d = self.hazard(r);
                if let Some((a, b)) = self.assign.child_range(&iv.lo, h, &d.outer_lo, &d.outer_hi) {
                    set.extend(a..=b);
                }
            }
        }
        let v: Vec<u32> = set.into_iter().collect();
        self.suspicious.insert(path.to_vec(), v.clone());
        v
    }

    /// Survives every layer.
    pub fn kept(&mut self, path: &[u32]) -> bool {
        *self.status(path).last().unwrap_or(&true)
    }

    /// Survives layer `layer` and all before it.
    pub fn kept_in(&mut self, path: &[u32], layer: usize) -> bool {
        self.status(path)[layer]
    }

    pub fn check_root(&mut self) -> Result<(), TreeError> {
        if self.kept(&[]) {
            Ok(())
        } else {
            Err(TreeError::RootEliminated)
        }
    }

    /// Children of `parent` cut in the final layer.
    pub fn dangerous_children(&mut self, parent: &[u32]) -> Vec<u32> {
        let h = parent.len() as u32;
        if h >= self.depth {
            return vec![];
        }
        let iv = self.assign.interval_of(parent);
        let rel = self.relevant_for(&iv, h, None);
        let kids = self.suspicious_children(parent, &iv, &rel);
        let mut out = Vec::new();
        for j in kids {
            let mut c = parent.to_vec();
            c.push(j);
            if !self.kept(&c) {
                out.push(j);
            }
        }
        out
    }

    /// Intervals of the dangerous children.
    pub fn dangerous_child_intervals(&mut self, parent: &[u32]) -> Vec<Interval> {
        let lo = self.assign.interval_of(parent).lo;
        let h = parent.len() as u32;
        self.dangerous_children(parent).into_iter().map(|j| self.assign.child_of(&lo, h, j)).collect()
    }

    /// Does the vertex avoid layer-`layer` dangerous intervals at its own level
    /// and all its ancestors' levels (membership in the unpruned avoidance tree)?
    pub fn in_avoidance_tree(&self, path: &[u32], layer: usize) -> bool {
        for h in 1..=path.len() {
            let iv = self.assign.interval_of(&path[..h]);
            if self.layers[layer].at(h as u32).iter().any(|d| d.meets(&iv.lo, &iv.hi)) {
                return false;
            }
        }
        true
    }

    /// Number of vertices at each level `1..=depth` of the unpruned
    /// avoidance tree of layer 0.
    pub fn avoidance_counts(&self) -> Vec<BigInt> {
        let mut out = vec![BigInt::zero(); self.depth as usize];
        let iv = self.assign.a0.clone();
        let rel: Vec<HazardRef> = self.relevant_for(&iv, 1, None).into_iter().filter(|r| r.0 == 0).collect();
        self.count_rec(0, &iv, &rel, &mut out);
        out
    }

    fn count_rec(&self, h: u32, iv: &Interval, rel: &[HazardRef], out: &mut [BigInt]) {
        let n = BigInt::from(self.branching());
        if rel.is_empty() {
            let mut m = BigInt::one();
            for lv in h + 1..=self.depth {
                m *= &n;
                out[lv as usize - 1] += &m;
            }
            return;
        }
        if h == self.depth {
            return;
        }
        let mut sus = BTreeSet::new();
        for r in rel {
            let d = self.hazard(r);
            if let Some((a, b)) = self.assign.child_range(&iv.lo, h, &d.outer_lo, &d.outer_hi) {
                sus.extend(a..=b);
            }
        }
        // untouched children head full subtrees
        let free = BigInt::from(self.branching() - sus.len() as u64);
        let mut m = free.clone();
        for lv in h + 1..=self.depth {
            out[lv as usize - 1] += &m;
            m *= &n;
        }
        for j in sus {
            let civ = self.assign.child_of(&iv.lo, h, j);
            if rel.iter().any(|r| r.1 == h + 1 && self.hazard(r).meets(&civ.lo, &civ.hi)) {
                continue;
            }
            let crel: Vec<HazardRef> =
                rel.iter().copied().filter(|r| r.1 > h + 1 && self.hazard(r).may_meet(&civ.lo, &civ.hi)).collect();
            out[h as usize] += 1;
            self.count_rec(h + 1, &civ, &crel, out);
        }
    }

    /// Memoized vertex count (for diagnostics).
    pub fn materialized(&self) -> usize {
        self.memo.len()
    }

    /// Materialized vertices with their per-layer status, sorted by path.
    pub fn materialized_vertices(&self) -> Vec<(Vec<u32>, Vec<bool>)> {
        let mut v: Vec<_> = self.memo.iter().map(|(k, s)| (k.clone(), s.clone())).collect();
        v.sort();
        v
    }
}

/// Paths of all level-`n` vertices whose interval meets some of `hazards`.
pub fn vertices_meeting(assign: &IntervalAssignment, n: u32, hazards: &[DeltaInterval]) -> Vec<Vec<u32>> {
    let mut out = Vec::new();
    let mut stack: Vec<(Vec<u32>, Rat)> = vec![(vec![], assign.a0.lo.clone())];
    while let Some((path, lo)) = stack.pop() {
        let h = path.len() as u32;
        let iv = Interval::new(lo.clone(), &lo + assign.width(h));
        if !hazards.iter().any(|d| d.meets(&iv.lo, &iv.hi)) {
            continue;
        }
        if h == n {
            out.push(path);
            continue;
        }
        let mut kids = BTreeSet::new();
        for d in hazards {
            if let Some((a, b)) = assign.child_range(&lo, h, &d.outer_lo, &d.outer_hi) {
                kids.extend(a..=b);
            }
        }
        for j in kids {
            let mut c = path.clone();
            c.push(j);
            stack.push((c, assign.child_of(&lo, h, j).lo));
        }
    }
    out.sort();
    out
}

/// One row of the class-count check: for `tau` at level `n - max(k, 1)`,
/// how many level-`n` vertices meet the union of `Delta(P)` over the class-`k`
/// level-`n` points whose interval meets `I(tau)`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCount {
    pub n: u32,
    pub k: u32,
    pub tau: Vec<u32>,
    pub points: usize,
    pub hits: usize,
    pub bound: usize,
    /// All points of the group share one dual line.
    pub one_line: bool,
}

/// Class counts for every level `n <= depth`, class `k`, and every vertex
/// `tau` of the avoidance tree (layer 0) at level `n - max(k, 1)` meeting a
/// class-`k` interval. `bound(k)` gives the allowed count.
pub fn class_counts(
    tree: &LayeredTree,
    points_by_level: &[Vec<TaggedPoint>],
    c: &Rat,
    w: &Weights,
    bound: impl Fn(u32) -> usize,
) -> Vec<ClassCount> {
    let assign = &tree.assign;
    let mut out = Vec::new();
    for (ix, pts) in points_by_level.iter().enumerate() {
        let n = ix as u32 + 1;
        if n > tree.depth {
            break;
        }
        let classes: BTreeSet<u32> = pts.iter().map(|p| p.class_index).collect();
        for k in classes {
            let group: Vec<(&TaggedPoint, DeltaInterval)> =
                pts.iter().filter(|p| p.class_index == k).map(|p| (p, p.delta(c, w))).collect();
            let up = n.saturating_sub(k.max(1));
            let deltas: Vec<DeltaInterval> = group.iter().map(|g| g.1.clone()).collect();
            for tau in vertices_meeting(assign, up, &deltas) {
                if !tree.in_avoidance_tree(&tau, 0) {
                    continue;
                }
                let iv = assign.interval_of(&tau);
                let sub: Vec<&(&TaggedPoint, DeltaInterval)> =
                    group.iter().filter(|g| g.1.meets(&iv.lo, &iv.hi)).collect();
                let lines: BTreeSet<DualLine> = sub.iter().map(|g| g.0.line).collect();
                let ds: Vec<DeltaInterval> = sub.iter().map(|g| g.1.clone()).collect();
                let hits = vertices_meeting(assign, n, &ds).len();
                out.push(ClassCount {
                    n,
                    k,
                    tau,
                    points: sub.len(),
                    hits,
                    bound: bound(k),
                    one_line: lines.len() <= 1,
                });
            }
        }
    }
    out
}

/// Counts `a_n` of an adversarially sampled `width`-regular subtree that
/// survive in the avoidance tree (layer 0), for `n = 0..=depth`.
///
/// At each surviving vertex the sampler first takes children cut at the next
/// level, then fills up with random other children.
pub fn sampled_regular_counts(tree: &LayeredTree, width: usize, seed: u64) -> Vec<u64> {
    let assign = &tree.assign;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = vec![1u64];
    let mut frontier: Vec<Vec<u32>> = vec![vec![]];
    for h in 0..tree.depth {
        let hazards = tree.layers[0].at(h + 1);
        let mut next = Vec::new();
        for path in &frontier {
            let lo = assign.interval_of(path).lo;
            let mut cut = BTreeSet::new();
            for d in hazards {
                if let Some((a, b)) = assign.child_range(&lo, h, &d.outer_lo, &d.outer_hi) {
                    for j in a..=b {
                        let civ = assign.child_of(&lo, h, j);
                        if d.meets(&civ.lo, &civ.hi) {
                            cut.insert(j);
                        }
                    }
                }
            }
            let mut chosen: Vec<u32> = cut.iter().copied().take(width).collect();
            let mut pool: Vec<u32> = Vec::new();
            // sample the remainder without materializing all children
            while chosen.len() + pool.len() < width {
                let j = rand::Rng::gen_range(&mut rng, 0..assign.branching) as u32;
                if !cut.contains(&j) && !pool.contains(&j) {
                    pool.push(j);
                }
            }
            pool.shuffle(&mut rng);
            chosen.extend(pool);
            for j in chosen {
                if !cut.contains(&j) {
                    let mut c = path.clone();
                    c.push(j);
                    next.push(c);
                }
            }
        }
        counts.push(next.len() as u64);
        frontier = next;
    }
    counts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::{rat, PowProd};

    fn assign4() -> IntervalAssignment {
        IntervalAssignment::new(Interval::new(ri(0), ri(1)), ri(4))
    }

    fn hz(center: Rat, radius: Rat) -> DeltaInterval {
        DeltaInterval::new(center, PowProd::rat(radius))
    }

    #[test]
    fn layout_examples() {
        let a = assign4();
        assert_eq!(a.interval_of(&[]), Interval::new(ri(0), ri(1)));
        assert_eq!(a.interval_of(&[2]), Interval::new(rat(1, 2), rat(3, 4)));
        assert_eq!(a.interval_of(&[2, 1]), Interval::new(rat(9, 16), rat(5, 8)));
        // slack sits on the right when R is not an integer
        let b = IntervalAssignment::new(Interval::new(ri(0), ri(1)), rat(9, 2));
        assert_eq!(b.branching, 4);
        assert_eq!(b.interval_of(&[3]).hi, rat(8, 9));
    }

    #[test]
    fn no_hazards_keeps_everything() {
        let layer = Layer { hazards: vec![vec![], vec![]], min_degree: 4 };
        let mut t = LayeredTree::new(assign4(), vec![layer], 2);
        assert!(t.kept(&[]));
        assert!(t.dangerous_children(&[]).is_empty());
        assert_eq!(t.avoidance_counts(), vec![BigInt::from(4), BigInt::from(16)]);
    }

    #[test]
    fn hazard_covering_a0_removes_level_one() {
        let layer = Layer { hazards: vec![vec![hz(rat(1, 2), ri(1))]], min_degree: 1 };
        let mut t = LayeredTree::new(assign4(), vec![layer], 1);
        assert_eq!(t.avoidance_counts(), vec![BigInt::zero()]);
        assert_eq!(t.check_root(), Err(TreeError::RootEliminated));
    }

    #[test]
    fn vertex_without_children_is_cut() {
        // R = 3, m = 2: a level-2 hazard covering all of child 0's interval
        let a = IntervalAssignment::new(Interval::new(ri(0), ri(1)), ri(3));
        let layer = Layer { hazards: vec![vec![], vec![hz(rat(1, 6), rat(1, 6))]], min_degree: 2 };
        let mut t = LayeredTree::new(a, vec![layer], 2);
        assert!(!t.kept(&[0]));
        assert!(t.kept(&[1]));
        assert!(t.kept(&[]));
        assert_eq!(t.dangerous_children(&[]), vec![0]);
    }

    #[test]
    fn second_layer_inherits_first() {
        let a = assign4();
        let l0 = Layer { hazards: vec![vec![hz(rat(1, 8), rat(1, 100))]], min_degree: 3 };
        let l1 = Layer { hazards: vec![vec![hz(rat(5, 8), rat(1, 100))]], min_degree: 2 };
        let mut t = LayeredTree::new(a, vec![l0, l1], 1);
        assert_eq!(t.status(&[0]), vec![false, false]);
        assert_eq!(t.status(&[2]), vec![true, false]);
        assert_eq!(t.status(&[]), vec![true, true]);
        assert_eq!(t.dangerous_children(&[]), vec![0, 2]);
    }

    #[test]
    fn meeting_vertices_found_by_descent() {
        let a = assign4();
        let d = hz(rat(1, 2), rat(1, 100));
        assert_eq!(vertices_meeting(&a, 1, std::slice::from_ref(&d)), vec![vec![1], vec![2]]);
        assert_eq!(vertices_meeting(&a, 2, &[d]), vec![vec![1, 3], vec![2, 0]]);
    }
}
