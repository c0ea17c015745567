//! The game in the full plane: colored square trees over Q(sqrt 2), type-I
//! pruning, Alice's inscribed-disc strategy and strip counting.

use std::cmp::Ordering;
use std::collections::HashMap;

use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dangerous_sets::{
    enumerate_plane_levels, plane_delta, plane_delta_theta, DangerError, DualLine, InhomCandidate, Rect, TaggedPoint,
};
use crate::exact_arith::{ri, PowProd, Rat, Surd2};
use crate::game_engine::MoveViolation;
use crate::problem_model::{derive_plane_constants, Anchor, ConstantsMode, ModelError, PlaneConstants, Weights};
use crate::tree_strategy::TreeError;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum Game2DError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Danger(#[from] DangerError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("{who} made an invalid move: {violation:?}")]
    InvalidMove { who: String, violation: MoveViolation },
    #[error("no color block fits inside Bob's disc at level {0}")]
    NoBlockFits(u32),
    #[error("type-I representative missing at level {0}")]
    NoRepresentative(u32),
}

/// Closed axis-aligned square `[x0, x0 + side] x [y0, y0 + side]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Square {
    #[serde(with = "crate::serial::surd_str")]
    pub x0: Surd2,
    #[serde(with = "crate::serial::surd_str")]
    pub y0: Surd2,
    #[serde(with = "crate::serial::surd_str")]
    pub side: Surd2,
}

impl Square {
    pub fn contains_square(&self, o: &Square) -> bool {
        self.x0 <= o.x0
            && self.y0 <= o.y0
            && &o.x0 + &o.side <= &self.x0 + &self.side
            && &o.y0 + &o.side <= &self.y0 + &self.side
    }

    pub fn inscribed_disc(&self) -> Ball2D {
        let h = self.side.scale(&Rat::new(1.into(), 2.into()));
        Ball2D { cx: &self.x0 + &h, cy: &self.y0 + &h, diameter: self.side.clone() }
    }

    pub fn meets_rect(&self, r: &Rect) -> bool {
        !boxes_apart(&r.hull, &self.approx()) && r.meets_square(&self.x0, &self.y0, &self.side)
    }

    /// `[x0, x1, y0, y1]` in floating point, for prefiltering only.
    pub fn approx(&self) -> [f64; 4] {
        let x = self.x0.to_f64();
        let y = self.y0.to_f64();
        let s = self.side.to_f64();
        [x, x + s, y, y + s]
    }
}

/// Closed disc.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Ball2D {
    #[serde(with = "crate::serial::surd_str")]
    pub cx: Surd2,
    #[serde(with = "crate::serial::surd_str")]
    pub cy: Surd2,
    #[serde(with = "crate::serial::surd_str")]
    pub diameter: Surd2,
}

impl Ball2D {
    pub fn inscribed_square(&self) -> Square {
        let side = &self.diameter * &Surd2::new(Rat::zero(), Rat::new(1.into(), 2.into()));
        let h = side.scale(&Rat::new(1.into(), 2.into()));
        Square { x0: &self.cx - &h, y0: &self.cy - &h, side }
    }

    pub fn circumscribed_square(&self) -> Square {
        let h = self.diameter.scale(&Rat::new(1.into(), 2.into()));
        Square { x0: &self.cx - &h, y0: &self.cy - &h, side: self.diameter.clone() }
    }

    /// `inner` lies in this disc: `|c - c'| <= r - r'`.
    pub fn contains_ball(&self, inner: &Ball2D) -> bool {
        let gap = (&self.diameter - &inner.diameter).scale(&Rat::new(1.into(), 2.into()));
        if gap.signum() < 0 {
            return false;
        }
        let dx = &self.cx - &inner.cx;
        let dy = &self.cy - &inner.cy;
        &(&dx * &dx) + &(&dy * &dy) <= &gap * &gap
    }
}

pub fn validate_move_2d(prev: &Ball2D, next: &Ball2D, ratio: &Surd2) -> Result<(), MoveViolation> {
    if next.diameter != &prev.diameter * ratio {
        return Err(MoveViolation::WrongDiameter);
    }
    if !prev.contains_ball(next) {
        return Err(MoveViolation::NotContained);
    }
    Ok(())
}

fn surd_ceil(x: &Surd2) -> i64 {
    (-(-x.clone()).floor()).to_i64().expect("ceiling too large")
}

/// The map from tree addresses to squares: the successor super-square is
/// bottom-left aligned in the parent, color blocks tile it row by row and
/// cells tile each block row by row.
#[derive(Clone, Debug)]
pub struct ColoredAssignment {
    pub sigma0: Square,
    pub r: Surd2,
    pub m: u64,
    pub blocks_per_side: u64,
    sides: Vec<Surd2>,
}

impl ColoredAssignment {
    pub fn new(sigma0: Square, r: Surd2, m: u64, blocks_per_side: u64, depth: u32) -> Self {
        let r_inv = r.inv().expect("R > 0");
        let mut sides = vec![sigma0.side.clone()];
        for n in 1..=depth as usize {
            let s = &sides[n - 1] * &r_inv;
            sides.push(s);
        }
        ColoredAssignment { sigma0, r, m, blocks_per_side, sides }
    }

    pub fn colors(&self) -> u64 {
        self.blocks_per_side * self.blocks_per_side
    }

    pub fn cells_per_color(&self) -> u64 {
        self.m * self.m
    }

    pub fn branching(&self) -> u64 {
        self.cells_per_color() * self.colors()
    }

    pub fn color_of(&self, j: u32) -> u64 {
        j as u64 / self.cells_per_color()
    }

    /// Child index of `cell` within `color`.
    pub fn index(&self, color: u64, cell: u64) -> u32 {
        (color * self.cells_per_color() + cell) as u32
    }

    /// Side `l R^-n`.
    pub fn side(&self, n: u32) -> Surd2 {
        match self.sides.get(n as usize) {
            Some(s) => s.clone(),
            None => &self.sigma0.side * &self.r.powi(-(n as i64)),
        }
    }

    /// Offset of child `j` in units of the child side.
    pub fn cell_offset(&self, j: u32) -> (u64, u64) {
        let color = self.color_of(j);
        let cell = j as u64 % self.cells_per_color();
        let (bx, by) = (color % self.blocks_per_side, color / self.blocks_per_side);
        (bx * self.m + cell % self.m, by * self.m + cell / self.m)
    }

    pub fn child(&self, parent: &Square, level: u32, j: u32) -> Square {
        let s = self.side(level);
        let (ox, oy) = self.cell_offset(j);
        Square { x0: &parent.x0 + &s.scale(&ri(ox)), y0: &parent.y0 + &s.scale(&ri(oy)), side: s }
    }

    pub fn phi(&self, path: &[u32]) -> Square {
        let mut sq = self.sigma0.clone();
        for (h, &j) in path.iter().enumerate() {
            sq = self.child(&sq, h as u32 + 1, j);
        }
        sq
    }

    /// Union of the children of one color, a square of side `m l R^-level`.
    pub fn block(&self, parent: &Square, level: u32, color: u64) -> Square {
        let s = self.side(level).scale(&ri(self.m));
        let (bx, by) = (color % self.blocks_per_side, color / self.blocks_per_side);
        Square { x0: &parent.x0 + &s.scale(&ri(bx)), y0: &parent.y0 + &s.scale(&ri(by)), side: s }
    }

    /// A color whose block lies in `target`, scanning the aligned grid position.
    pub fn block_inside(&self, parent: &Square, level: u32, target: &Square) -> Option<u64> {
        let s = self.side(level).scale(&ri(self.m));
        let s_inv = s.inv().expect("side > 0");
        let kx = surd_ceil(&(&(&target.x0 - &parent.x0) * &s_inv)).max(0) as u64;
        let ky = surd_ceil(&(&(&target.y0 - &parent.y0) * &s_inv)).max(0) as u64;
        if kx >= self.blocks_per_side || ky >= self.blocks_per_side {
            return None;
        }
        let color = ky * self.blocks_per_side + kx;
        target.contains_square(&self.block(parent, level, color)).then_some(color)
    }
}

const EPS: f64 = 1e-12;

fn rect_box(r: &Rect) -> [f64; 4] {
    r.hull
}

fn boxes_apart(a: &[f64; 4], b: &[f64; 4]) -> bool {
    a[1] < b[0] - EPS || b[1] < a[0] - EPS || a[3] < b[2] - EPS || b[3] < a[2] - EPS
}

/// The surviving tree `S` (squares missing every level's rectangles) and its
/// finite-depth type-I core, both evaluated lazily.
pub struct PlaneTree {
    pub assign: ColoredAssignment,
    pub depth: u32,
    /// Rectangles of level `n` at index `n - 1`: `Delta(P)` then `Delta_theta(v)`.
    pub hazards: Vec<Vec<Rect>>,
    boxes: Vec<Vec<[f64; 4]>>,
    relevant: HashMap<Vec<u32>, Vec<usize>>,
    in_s: HashMap<Vec<u32>, bool>,
    type1: HashMap<Vec<u32>, bool>,
}

impl PlaneTree {
    pub fn new(assign: ColoredAssignment, hazards: Vec<Vec<Rect>>, depth: u32) -> Self {
        let boxes = hazards.iter().map(|lv| lv.iter().map(rect_box).collect()).collect();
        PlaneTree {
            assign,
            depth,
            hazards,
            boxes,
            relevant: HashMap::new(),
            in_s: HashMap::new(),
            type1: HashMap::new(),
        }
    }

    /// Indices of level `|path| + 1` rectangles possibly meeting `Phi(path)`.
    fn relevant_ids(&mut self, path: &[u32]) -> Vec<usize> {
        if let Some(v) = self.relevant.get(path) {
            return v.clone();
        }
        let lv = path.len();
        let ids: Vec<usize> = if lv >= self.hazards.len() {
            vec![]
        } else {
            let sq = self.assign.phi(path).approx();
            (0..self.hazards[lv].len()).filter(|&i| !boxes_apart(&self.boxes[lv][i], &sq)).collect()
        };
        self.relevant.insert(path.to_vec(), ids.clone());
        ids
    }

    /// Does `Phi(path)` meet a rectangle of its own level?
    pub fn hit(&mut self, path: &[u32]) -> bool {
        let Some((_, parent)) = path.split_last() else { return false };
        let lv = path.len() - 1;
        let ids = self.relevant_ids(parent);
        let sq = self.assign.phi(path);
        let ab = sq.approx();
        ids.iter().any(|&i| !boxes_apart(&self.boxes[lv][i], &ab) && sq.meets_rect(&self.hazards[lv][i]))
    }

    /// Membership in `S`: no square on the path meets its level's rectangles.
    pub fn in_s(&mut self, path: &[u32]) -> bool {
        if path.is_empty() {
            return true;
        }
        if let Some(&b) = self.in_s.get(path) {
            return b;
        }
        let b = self.in_s(&path[..path.len() - 1]) && !self.hit(path);
        self.in_s.insert(path.to_vec(), b);
        b
    }

    /// Survives the type-I pruning: in `S` and, above the leaves, has a
    /// surviving child of every color.
    pub fn type1(&mut self, path: &[u32]) -> bool {
        if let Some(&b) = self.type1.get(path) {
            return b;
        }
        let b = self.in_s(path)
            && (path.len() as u32 >= self.depth
                || (0..self.assign.colors()).all(|c| self.representative(path, c).is_some()));
        self.type1.insert(path.to_vec(), b);
        b
    }

    /// Lowest cell of `color` under `path` that survives the pruning.
    pub fn representative(&mut self, path: &[u32], color: u64) -> Option<u32> {
        let mut child = path.to_vec();
        child.push(0);
        for cell in 0..self.assign.cells_per_color() {
            let j = self.assign.index(color, cell);
            *child.last_mut().unwrap() = j;
            if self.type1(&child) {
                return Some(j);
            }
        }
        None
    }

    pub fn check_root(&mut self) -> Result<(), TreeError> {
        if self.type1(&[]) {
            Ok(())
        } else {
            Err(TreeError::RootEliminated)
        }
    }

    pub fn materialized(&self) -> Vec<Vec<u32>> {
        let mut v: Vec<Vec<u32>> = self.in_s.keys().cloned().collect();
        v.sort();
        v
    }
}

/// A type-II subtree: every vertex keeps exactly the cells of one color,
/// chosen pseudo-randomly from the address.
#[derive(Clone, Copy, Debug)]
pub struct TypeIISample {
    pub seed: u64,
}

impl TypeIISample {
    pub fn color(&self, path: &[u32], colors: u64) -> u64 {
        let mut h = self.seed ^ 0x9E37_79B9_7F4A_7C15;
        for &j in path {
            h = h.rotate_left(17).wrapping_mul(0xBF58_476D_1CE4_E5B9) ^ (j as u64 + 1);
        }
        ChaCha8Rng::seed_from_u64(h).gen_range(0..colors)
    }

    pub fn children(&self, path: &[u32], a: &ColoredAssignment) -> Vec<u32> {
        let col = self.color(path, a.colors());
        (0..a.cells_per_color()).map(|cell| a.index(col, cell)).collect()
    }
}

/// `a_n = #(R ∩ S)_n` together with `#U_n` for a sampled type-II subtree `R`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TypeIIReport {
    pub a: Vec<u64>,
    pub u: Vec<u64>,
    /// Largest number of hit successors of a single level-0 vertex (`n = 1`).
    pub max_hits_level1: u64,
}

impl TypeIIReport {
    /// `a_n > 112 a_{n-1}` for every level.
    pub fn growth_holds(&self, factor: u64) -> bool {
        self.a.windows(2).all(|w| w[1] > factor * w[0])
    }

    /// `#U_n <= 2(3m-2) a_{n-1} + sum_{k>=2} (3m-2)^k a_{n-k}`.
    pub fn u_bound_holds(&self, m: u64) -> bool {
        let t = 3 * m - 2;
        (1..self.a.len()).all(|n| {
            let mut bound = 2 * t as u128 * self.a[n - 1] as u128;
            for k in 2..=n {
                bound += (t as u128).pow(k as u32) * self.a[n - k] as u128;
            }
            self.u[n - 1] as u128 <= bound
        })
    }
}

pub fn type2_counts(tree: &mut PlaneTree, sample: &TypeIISample) -> TypeIIReport {
    let (levels, u, max_hits_level1) = type2_walk(tree, sample);
    TypeIIReport { a: levels.iter().map(|l| l.len() as u64).collect(), u, max_hits_level1 }
}

/// Vertices of `R ∩ S` by level, hits per level, and the largest per-vertex
/// hit count at level 1.
fn type2_walk(tree: &mut PlaneTree, sample: &TypeIISample) -> (Vec<Vec<Vec<u32>>>, Vec<u64>, u64) {
    let mut levels: Vec<Vec<Vec<u32>>> = vec![vec![vec![]]];
    let mut u = vec![];
    let mut max_hits_level1 = 0;
    for n in 1..=tree.depth {
        let mut next = Vec::new();
        let mut hits = 0u64;
        for tau in levels.last().expect("root level") {
            let mut local = 0;
            for j in sample.children(tau, &tree.assign) {
                let mut c = tau.clone();
                c.push(j);
                if tree.in_s(&c) {
                    next.push(c);
                } else {
                    local += 1;
                }
            }
            hits += local;
            if n == 1 {
                max_hits_level1 = max_hits_level1.max(local);
            }
        }
        u.push(hits);
        levels.push(next);
    }
    (levels, u, max_hits_level1)
}

/// Level-`n` squares of a type-II sample meeting the strip around one
/// dual-line group of level-`n` rectangles, seen from `tau` at level `n - k`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StripCount {
    pub n: u32,
    pub k: u32,
    pub tau: Vec<u32>,
    pub line: DualLine,
    pub points: usize,
    pub hits: u64,
    pub bound: u64,
}

/// Strip counts for every level `n`, every `k` in `1..=n` and every vertex
/// `tau` of `R ∩ S` at level `n - k`. Points are grouped by dual line; the
/// allowed count is `2(3m-2)` for `k = 1` and `(3m-2)^k` above.
pub fn strip_class_counts(setup: &mut PlaneSetup, sample: &TypeIISample) -> Vec<StripCount> {
    let (levels, _, _) = type2_walk(&mut setup.tree, sample);
    let t = 3 * setup.constants.m - 2;
    let (c, w) = (setup.constants.c.clone(), setup.constants.weights.clone());
    let tree = &setup.tree;
    let mut out = Vec::new();
    for n in 1..=tree.depth {
        let pts = &setup.points[n as usize - 1];
        // the first pts.len() rectangles of a level are the Delta(P)
        let rects = &tree.hazards[n as usize - 1][..pts.len()];
        let side = tree.assign.side(n);
        let limit_sq = (&side * &side).bounds(64).1;
        for k in 1..=n {
            let bound = if k == 1 { 2 * t } else { t.pow(k) };
            for tau in &levels[(n - k) as usize] {
                let sq = tree.assign.phi(tau);
                let ab = sq.approx();
                let mut groups: HashMap<DualLine, Vec<&TaggedPoint>> = HashMap::new();
                for (p, r) in pts.iter().zip(rects) {
                    if !boxes_apart(&r.hull, &ab) && sq.meets_rect(r) {
                        groups.entry(p.line).or_default().push(p);
                    }
                }
                let mut groups: Vec<_> = groups.into_iter().collect();
                groups.sort_by_key(|(l, _)| *l);
                for (line, g) in groups {
                    let hull = strip_hull(&g, &c, &w, &limit_sq).expect("group shares a line");
                    let hits = count_strip_hits(tree, sample, tau, k, &hull.strip);
                    out.push(StripCount { n, k, tau: tau.clone(), line, points: g.len(), hits, bound });
                }
            }
        }
    }
    out
}

/// `{x : |x . normal - offset| <= width / 2 * |normal|}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Strip {
    pub normal: (Rat, Rat),
    pub offset: Rat,
    pub width: Surd2,
}

impl Strip {
    /// The strip of the given width centered on the line `A x + B y + C = 0`.
    pub fn around_line(line: &DualLine, width: Surd2) -> Self {
        Strip { normal: (ri(line.a), ri(line.b)), offset: ri(-line.c), width }
    }

    /// `(width / 2)^2 |normal|^2`.
    fn half_width_sq(&self) -> Surd2 {
        let n2 = &self.normal.0 * &self.normal.0 + &self.normal.1 * &self.normal.1;
        let h = self.width.scale(&Rat::new(1.into(), 2.into()));
        (&h * &h).scale(&n2)
    }

    pub fn meets_square(&self, sq: &Square) -> bool {
        let (a, b) = &self.normal;
        let neg = a.clone().min(Rat::zero()) + b.clone().min(Rat::zero());
        let pos = a.clone().max(Rat::zero()) + b.clone().max(Rat::zero());
        // quick decision in floating point when far from the boundary
        let f = |r: &Rat| r.to_f64().unwrap_or(f64::NAN);
        let [x0, _, y0, _] = sq.approx();
        let sf = sq.side.to_f64();
        let bf = x0 * f(a) + y0 * f(b) - f(&self.offset);
        let (lf, hf) = (bf + sf * f(&neg), bf + sf * f(&pos));
        let wf = self.width.to_f64() / 2.0 * (f(a) * f(a) + f(b) * f(b)).sqrt();
        let tol = 1e-9 * (1.0 + wf + lf.abs() + hf.abs());
        if lf > wf + tol || hf < -wf - tol {
            return false;
        }
        if lf < wf - tol && hf > -wf + tol {
            return true;
        }
        // range of x . normal - offset over the square
        let base = &(&sq.x0.scale(a) + &sq.y0.scale(b)) - &Surd2::from_rat(self.offset.clone());
        let lo = &base + &sq.side.scale(&neg);
        let hi = &base + &sq.side.scale(&pos);
        let w2 = self.half_width_sq();
        let below = lo.signum() <= 0 || &lo * &lo <= w2;
        let above = hi.signum() >= 0 || &hi * &hi <= w2;
        below && above
    }
}

/// Result of fitting a strip around rectangles sharing one dual line.
#[derive(Clone, Debug)]
pub struct StripHull {
    pub strip: Strip,
    /// The minimal width is at most `limit` (decided exactly).
    pub within_limit: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StripError {
    #[error("points do not share one dual line")]
    MixedLines,
    #[error("empty group")]
    Empty,
}

/// `sign(x - y)` for a sum of power products against a rational, refining
/// until decided.
fn cmp_sum_rat(terms: &[PowProd], y: &Rat) -> Ordering {
    for bits in [64u32, 128, 256, 512] {
        let (mut lo, mut hi) = (Rat::zero(), Rat::zero());
        for t in terms {
            let (a, b) = t.bounds(bits);
            lo += a;
            hi += b;
        }
        if &hi < y {
            return Ordering::Less;
        }
        if &lo > y {
            return Ordering::Greater;
        }
        if lo == hi {
            return lo.cmp(y);
        }
    }
    Ordering::Equal
}

/// Minimal strip with normal `(A, B)` containing every rectangle of the group,
/// checking its width against `limit` (whose square must be rational).
pub fn strip_hull(group: &[&TaggedPoint], c: &Rat, w: &Weights, limit_sq: &Rat) -> Result<StripHull, StripError> {
    let first = group.first().ok_or(StripError::Empty)?;
    let line = first.line;
    if group.iter().any(|p| p.line != line) {
        return Err(StripError::MixedLines);
    }
    let n2 = ri(line.a * line.a + line.b * line.b);
    // half extent along the normal, times |normal|: |A| hx + |B| hy
    let mut worst: Option<(Vec<PowProd>, Rat)> = None;
    let mut within = true;
    for p in group {
        let q = ri(p.point.q);
        let hx = PowProd::pow(q.clone(), -(Rat::one() + &w.i)).times_rat(&(c * ri(line.a.abs())));
        let hy = PowProd::pow(q, -(Rat::one() + &w.j)).times_rat(&(c * ri(line.b.abs())));
        let terms: Vec<PowProd> = [hx, hy].into_iter().filter(|t| t.signum() != 0).collect();
        // (2 e)^2 <= limit^2 |n|^2  <=>  e <= limit |n| / 2, compared after squaring
        let (_, e_hi) = sum_bounds(&terms, 48);
        if (ri(4) * &e_hi * &e_hi) > limit_sq * &n2 {
            let bound_sq = limit_sq * &n2 / ri(4);
            let sq_terms = square_terms(&terms);
            if cmp_sum_rat(&sq_terms, &bound_sq) == Ordering::Greater {
                within = false;
            }
        }
        if worst.as_ref().is_none_or(|(_, b)| &e_hi > b) {
            worst = Some((terms, e_hi));
        }
    }
    let (_, e_hi) = worst.expect("nonempty group");
    // reported width uses the rational upper bound of the extent
    let norm_inv_sq = Rat::one() / &n2;
    let width_sq = ri(4) * &e_hi * &e_hi * norm_inv_sq;
    let width = Surd2::from_rat(sqrt_upper(&width_sq));
    Ok(StripHull { strip: Strip::around_line(&line, width), within_limit: within })
}

fn sum_bounds(terms: &[PowProd], bits: u32) -> (Rat, Rat) {
    terms.iter().fold((Rat::zero(), Rat::zero()), |(lo, hi), t| {
        let (a, b) = t.bounds(bits);
        (lo + a, hi + b)
    })
}

/// Expand `(sum t)^2` into power products.
fn square_terms(terms: &[PowProd]) -> Vec<PowProd> {
    let mut out = Vec::new();
    for (i, a) in terms.iter().enumerate() {
        for (j, b) in terms.iter().enumerate() {
            if i <= j {
                let p = a.mul(b);
                out.push(if i == j { p } else { p.times_rat(&ri(2)) });
            }
        }
    }
    out
}

/// A rational at least `sqrt(x)`, within a relative `2^-40`.
fn sqrt_upper(x: &Rat) -> Rat {
    let f = x.to_f64().unwrap_or(0.0).sqrt() * (1.0 + 1e-12);
    let mut r = Rat::from_float(f).unwrap_or_else(Rat::zero);
    while &(&r * &r) < x {
        r *= Rat::new(1_000_001.into(), 1_000_000.into());
    }
    r
}

/// Level-`depth` squares of `R` below `tau` meeting the strip.
pub fn count_strip_hits(tree: &PlaneTree, sample: &TypeIISample, tau: &[u32], k: u32, strip: &Strip) -> u64 {
    let a = &tree.assign;
    let mut frontier = vec![(tau.to_vec(), a.phi(tau))];
    for _ in 0..k {
        let mut next = Vec::new();
        for (p, sq) in &frontier {
            // a subtree whose square misses the strip contributes nothing
            if !strip.meets_square(sq) {
                continue;
            }
            for j in sample.children(p, a) {
                let mut c = p.clone();
                c.push(j);
                let csq = a.child(sq, c.len() as u32, j);
                next.push((c, csq));
            }
        }
        frontier = next;
    }
    frontier.iter().filter(|(_, sq)| strip.meets_square(sq)).count() as u64
}

/// Shifted candidates of level `n` whose rectangles meet `Phi(tau)`, and
/// whether each has its thin side at most `(2/3) l R^-n`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Strip2Report {
    pub hits: usize,
    pub thin_ok: bool,
}

pub fn check_strip2(
    tree: &PlaneTree,
    n: u32,
    tau: &[u32],
    cands: &[InhomCandidate],
    anchor: &Anchor,
    k: &PlaneConstants,
) -> Strip2Report {
    let sq = tree.assign.phi(tau);
    let limit = tree.assign.side(n).scale(&Rat::new(2.into(), 3.into()));
    let e = Rat::one() + k.weights.max();
    let mut hits = 0;
    let mut thin_ok = true;
    for v in cands {
        if sq.meets_rect(&plane_delta_theta(v, anchor, &k.c_prime, &k.weights)) {
            hits += 1;
        }
        let thin = PowProd::pow(ri(v.q), -e.clone()).times_rat(&(ri(2) * &k.c_prime));
        if limit.cmp_powprod(&thin) == Ordering::Less {
            thin_ok = false;
        }
    }
    Strip2Report { hits, thin_ok }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaneConfig {
    pub weights: Weights,
    #[serde(with = "crate::serial::rat_str")]
    pub beta: Rat,
    pub anchor: Anchor,
    pub levels: u32,
    pub mode: ConstantsMode,
    pub b0: Ball2D,
}

impl PlaneConfig {
    /// Equal weights, `beta = 1/2`, a first disc of diameter `(15/4) sqrt 2`
    /// centered at `(1/2, 1/2)`, so that `l = 1/8`.
    pub fn demo(levels: u32) -> Self {
        PlaneConfig {
            weights: Weights::half(),
            beta: Rat::new(1.into(), 2.into()),
            anchor: Anchor::zero(),
            levels,
            mode: ConstantsMode::Demo,
            b0: Ball2D {
                cx: Surd2::from_rat(Rat::new(1.into(), 2.into())),
                cy: Surd2::from_rat(Rat::new(1.into(), 2.into())),
                diameter: Surd2::new(Rat::zero(), Rat::new(15.into(), 4.into())),
            },
        }
    }
}

/// Constants, enumerated rectangles and the tree for one `A0`.
pub struct PlaneSetup {
    pub a0: Ball2D,
    pub constants: PlaneConstants,
    pub points: Vec<Vec<TaggedPoint>>,
    pub candidates: Vec<Vec<InhomCandidate>>,
    pub tree: PlaneTree,
}

impl PlaneSetup {
    pub fn new(cfg: &PlaneConfig) -> Result<Self, Game2DError> {
        let alpha0 = Surd2::new(Rat::zero(), Rat::new(1.into(), 60.into()));
        let a0 = Ball2D { cx: cfg.b0.cx.clone(), cy: cfg.b0.cy.clone(), diameter: &cfg.b0.diameter * &alpha0 };
        let mut k = derive_plane_constants(&cfg.weights, &cfg.beta, &a0.diameter, cfg.mode)?;
        if cfg.mode == ConstantsMode::Demo {
            k.q_cap = Some(Rat::from_integer(k.level_implied_q(cfg.levels.max(1))));
        }
        let sigma0 = a0.circumscribed_square();
        let levels = enumerate_plane_levels(cfg.levels, &k, &cfg.anchor, (&sigma0.x0, &sigma0.y0), &sigma0.side)?;
        let points: Vec<Vec<TaggedPoint>> = levels.iter().map(|l| l.points.clone()).collect();
        let candidates: Vec<Vec<InhomCandidate>> = levels.into_iter().map(|l| l.candidates).collect();
        let hazards = points
            .iter()
            .zip(&candidates)
            .map(|(ps, vs)| {
                ps.iter()
                    .map(|p| plane_delta(&p.point, &k.c, &k.weights))
                    .chain(vs.iter().map(|v| plane_delta_theta(v, &cfg.anchor, &k.c_prime, &k.weights)))
                    .collect()
            })
            .collect();
        let assign = ColoredAssignment::new(sigma0, k.r.clone(), k.m, k.blocks_per_side(), cfg.levels);
        let tree = PlaneTree::new(assign, hazards, cfg.levels);
        Ok(PlaneSetup { a0, constants: k, points, candidates, tree })
    }

    /// Is the square disjoint from every enumerated rectangle?
    pub fn square_avoids_all(&self, sq: &Square) -> bool {
        let ab = sq.approx();
        self.tree.hazards.iter().flatten().all(|r| boxes_apart(&rect_box(r), &ab) || !sq.meets_rect(r))
    }
}

pub trait Bob2D {
    fn name(&self) -> String;
    fn respond(&mut self, a: &Ball2D, beta: &Rat) -> Ball2D;
}

/// Center offsets on a grid of step `1/64` of the available slack.
pub struct Bob2DRandom {
    rng: ChaCha8Rng,
    seed: u64,
}

impl Bob2DRandom {
    pub fn new(seed: u64) -> Self {
        Bob2DRandom { rng: ChaCha8Rng::seed_from_u64(seed), seed }
    }
}

impl Bob2D for Bob2DRandom {
    fn name(&self) -> String {
        format!("random:{}", self.seed)
    }

    fn respond(&mut self, a: &Ball2D, beta: &Rat) -> Ball2D {
        let d = a.diameter.scale(beta);
        let slack = (&a.diameter - &d).scale(&Rat::new(1.into(), 2.into()));
        let (u, v) = loop {
            let u: i64 = self.rng.gen_range(-64..=64);
            let v: i64 = self.rng.gen_range(-64..=64);
            if u * u + v * v <= 64 * 64 {
                break (u, v);
            }
        };
        Ball2D {
            cx: &a.cx + &slack.scale(&Rat::new(u.into(), 64.into())),
            cy: &a.cy + &slack.scale(&Rat::new(v.into(), 64.into())),
            diameter: d,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move2D {
    pub mover: crate::game_engine::Mover,
    pub level: u32,
    pub ball: Ball2D,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript2D {
    pub bob: String,
    pub moves: Vec<Move2D>,
    pub path: Vec<u32>,
    /// Inscribed-square identity per level, checked exactly.
    pub identities: Vec<bool>,
    pub final_square: Square,
    pub final_enclosure: Ball2D,
}

/// Alice's answer to Bob's disc `b` at `level`, given her current vertex.
pub fn alice_2d_move(tree: &mut PlaneTree, path: &[u32], level: u32, b: &Ball2D) -> Result<(u32, Ball2D), Game2DError> {
    let parent = tree.assign.phi(path);
    let target = b.inscribed_square();
    let color = tree.assign.block_inside(&parent, level, &target).ok_or(Game2DError::NoBlockFits(level))?;
    let j = tree.representative(path, color).ok_or(Game2DError::NoRepresentative(level))?;
    let sq = tree.assign.child(&parent, level, j);
    Ok((j, sq.inscribed_disc()))
}

pub fn run_game_2d(
    cfg: &PlaneConfig,
    setup: &mut PlaneSetup,
    bob: &mut dyn Bob2D,
) -> Result<Transcript2D, Game2DError> {
    let alpha0 = setup.constants.alpha0.clone();
    let beta = Surd2::from_rat(cfg.beta.clone());
    let m = setup.constants.m;
    let mut moves = vec![
        Move2D { mover: crate::game_engine::Mover::Bob, level: 0, ball: cfg.b0.clone() },
        Move2D { mover: crate::game_engine::Mover::Alice, level: 0, ball: setup.a0.clone() },
    ];
    check2(&cfg.b0, &setup.a0, &alpha0, "Alice")?;
    if cfg.levels > 0 {
        setup.tree.check_root()?;
    }
    let mut a = setup.a0.clone();
    let mut path = vec![];
    let mut identities = vec![];
    for n in 1..=cfg.levels {
        let b = bob.respond(&a, &cfg.beta);
        check2(&a, &b, &beta, "Bob")?;
        moves.push(Move2D { mover: crate::game_engine::Mover::Bob, level: n, ball: b.clone() });
        let lhs = &(&a.diameter * &beta) * &Surd2::new(Rat::zero(), Rat::new(1.into(), 2.into()));
        let rhs = setup.tree.assign.side(n).scale(&ri(2 * m));
        identities.push(lhs == rhs && b.inscribed_square().side == rhs);
        let (j, next) = alice_2d_move(&mut setup.tree, &path, n, &b)?;
        check2(&b, &next, &alpha0, "Alice")?;
        path.push(j);
        moves.push(Move2D { mover: crate::game_engine::Mover::Alice, level: n, ball: next.clone() });
        a = next;
    }
    Ok(Transcript2D {
        bob: bob.name(),
        moves,
        final_square: setup.tree.assign.phi(&path),
        path,
        identities,
        final_enclosure: a,
    })
}

fn check2(prev: &Ball2D, next: &Ball2D, ratio: &Surd2, who: &str) -> Result<(), Game2DError> {
    validate_move_2d(prev, next, ratio)
        .map_err(|violation| Game2DError::InvalidMove { who: who.to_string(), violation })
}

/// Group points by their dual line.
pub fn group_by_line(points: &[TaggedPoint]) -> Vec<(DualLine, Vec<&TaggedPoint>)> {
    let mut map: HashMap<DualLine, Vec<&TaggedPoint>> = HashMap::new();
    for p in points {
        map.entry(p.line).or_default().push(p);
    }
    let mut v: Vec<_> = map.into_iter().collect();
    v.sort_by_key(|(l, _)| *l);
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::rat;

    fn s(x: Rat) -> Surd2 {
        Surd2::from_rat(x)
    }

    fn demo_assign(depth: u32) -> ColoredAssignment {
        let k = derive_plane_constants(&Weights::half(), &rat(1, 2), &s(rat(1, 8)), ConstantsMode::Demo).unwrap();
        let sigma0 = Square { x0: s(rat(7, 16)), y0: s(rat(7, 16)), side: s(rat(1, 8)) };
        ColoredAssignment::new(sigma0, k.r.clone(), k.m, k.blocks_per_side(), depth)
    }

    #[test]
    fn layout_example() {
        let a = demo_assign(2);
        assert_eq!(a.colors(), 25);
        assert_eq!(a.branching(), 5625);
        let color = 3 * 5 + 2;
        let sq = a.phi(&[a.index(color, 0)]);
        let s1 = a.side(1);
        assert_eq!(sq.x0, &a.sigma0.x0 + &s1.scale(&ri(30)));
        assert_eq!(sq.y0, &a.sigma0.y0 + &s1.scale(&ri(45)));
        assert_eq!(a.phi(&[]), a.sigma0);
    }

    #[test]
    fn coloring_is_regular_and_blocks_tile() {
        let a = demo_assign(1);
        let mut per = [0u64; 25];
        for j in 0..a.branching() as u32 {
            per[a.color_of(j) as usize] += 1;
        }
        assert!(per.iter().all(|&c| c == 225));
        for color in [0u64, 7, 24] {
            let blk = a.block(&a.sigma0, 1, color);
            for cell in [0u64, 14, 100, 224] {
                assert!(blk.contains_square(&a.phi(&[a.index(color, cell)])));
            }
        }
        let nested = a.phi(&[5000, 17]);
        assert!(a.phi(&[5000]).contains_square(&nested));
        assert_eq!(nested.side, a.side(2));
    }

    #[test]
    fn aligned_block_is_chosen() {
        let a = demo_assign(1);
        let blk = a.block(&a.sigma0, 1, 12);
        let target = Square { x0: blk.x0.clone(), y0: blk.y0.clone(), side: blk.side.scale(&ri(2)) };
        assert_eq!(a.block_inside(&a.sigma0, 1, &target), Some(12));
    }

    #[test]
    fn disc_validation() {
        let a = Ball2D { cx: s(ri(0)), cy: s(ri(0)), diameter: s(ri(2)) };
        let b = Ball2D { cx: s(rat(1, 2)), cy: s(ri(0)), diameter: s(ri(1)) };
        assert_eq!(validate_move_2d(&a, &b, &s(rat(1, 2))), Ok(()));
        let b = Ball2D { cx: s(rat(1, 2)), cy: s(rat(1, 10)), diameter: s(ri(1)) };
        assert_eq!(validate_move_2d(&a, &b, &s(rat(1, 2))), Err(MoveViolation::NotContained));
    }

    #[test]
    fn strip_square_meeting() {
        // x = 1/2 with width 1/10
        let st = Strip { normal: (ri(1), ri(0)), offset: rat(1, 2), width: s(rat(1, 10)) };
        let near = Square { x0: s(rat(54, 100)), y0: s(ri(0)), side: s(rat(1, 100)) };
        let far = Square { x0: s(rat(56, 100)), y0: s(ri(0)), side: s(rat(1, 100)) };
        assert!(st.meets_square(&near));
        assert!(!st.meets_square(&far));
        // touching the boundary counts
        let edge = Square { x0: s(rat(55, 100)), y0: s(ri(0)), side: s(rat(1, 100)) };
        assert!(st.meets_square(&edge));
    }

    #[test]
    fn strip2_width_identity() {
        let k = derive_plane_constants(&Weights::half(), &rat(1, 2), &s(rat(1, 8)), ConstantsMode::Demo).unwrap();
        let lhs = k.h_prime(2).inv().unwrap().scale(&(ri(2) * &k.c_prime));
        assert_eq!(lhs, k.side(2).scale(&rat(2, 3)));
    }

    #[test]
    fn demo_game_avoids() {
        let cfg = PlaneConfig::demo(2);
        let mut setup = PlaneSetup::new(&cfg).unwrap();
        for seed in 0..3 {
            let t = run_game_2d(&cfg, &mut setup, &mut Bob2DRandom::new(seed)).unwrap();
            assert!(t.identities.iter().all(|&b| b));
            assert!(setup.square_avoids_all(&t.final_square));
        }
    }
}
