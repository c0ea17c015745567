//! The one-dimensional game: exact move validation, Alice's tree-guided
//! halving strategy for curves and lines, and a few Bob adversaries.

use std::collections::HashMap;

use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dangerous_sets::{
    delta_interval, delta_theta_interval, enumerate_p_level, enumerate_p_line_level, enumerate_v_level,
    enumerate_v_line_level, DangerError, DeltaInterval, InhomCandidate, TaggedPoint,
};
use crate::exact_arith::{floor_rat, ri, Rat};
use crate::problem_model::{
    derive_curve_constants, derive_line_constants, Anchor, ConstantsMode, CurveConstants, CurveSpec, Interval,
    LineConstants, LineSpec, ModelError, Weights,
};
use crate::tree_strategy::{IntervalAssignment, Layer, LayeredTree, TreeError};

/// A closed interval played as a ball.
pub type Ball1D = Interval;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum MoveViolation {
    NotContained,
    WrongDiameter,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GameError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Danger(#[from] DangerError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("strategy broken at level {level}, sub-round {t}: {count} dangerous intervals, allowed {allowed}")]
    StrategyBroken { level: u32, t: u32, count: usize, allowed: usize },
    #[error("{who} made an invalid move: {violation:?}")]
    InvalidMove { who: String, violation: MoveViolation },
    #[error("no kept child interval fits inside Bob's ball at level {0}")]
    NoKeptChild(u32),
}

/// `next` is inside `prev` with diameter exactly `ratio` times as large.
pub fn validate_move(prev: &Ball1D, next: &Ball1D, ratio: &Rat) -> Result<(), MoveViolation> {
    if next.len() != ratio * prev.len() {
        return Err(MoveViolation::WrongDiameter);
    }
    if !prev.contains_interval(next) {
        return Err(MoveViolation::NotContained);
    }
    Ok(())
}

/// Same center, half the diameter.
pub fn alice_open(b: &Ball1D) -> Ball1D {
    let q = b.len() / ri(4);
    Interval::new(&b.lo + &q, &b.hi - &q)
}

/// Same center, diameter scaled by `ratio`.
pub fn shrink_centered(b: &Ball1D, ratio: &Rat) -> Ball1D {
    let m = b.mid();
    let h = b.len() * ratio / ri(2);
    Interval::new(&m - &h, &m + &h)
}

/// Which problem the game is played against.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regime {
    Curve { curve: CurveSpec },
    Line { line: LineSpec },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GameConfig {
    pub weights: Weights,
    #[serde(with = "crate::serial::rat_str")]
    pub beta: Rat,
    pub regime: Regime,
    pub anchor: Anchor,
    pub levels: u32,
    pub mode: ConstantsMode,
    /// Bob's opening ball.
    pub b0: Ball1D,
}

impl GameConfig {
    /// Parabola on `[1/10, 9/10]`, equal weights, `beta = 1/2`, Bob opening
    /// with the whole interval.
    pub fn demo_curve(levels: u32, anchor: Anchor) -> Self {
        GameConfig {
            weights: Weights::half(),
            beta: Rat::new(1.into(), 2.into()),
            regime: Regime::Curve {
                curve: CurveSpec::parabola(Rat::new(1.into(), 10.into()), Rat::new(9.into(), 10.into()))
                    .expect("parabola is nondegenerate"),
            },
            anchor,
            levels,
            mode: ConstantsMode::Demo,
            b0: Interval::new(Rat::new(1.into(), 10.into()), Rat::new(9.into(), 10.into())),
        }
    }

    /// The line `y = x/2 + 1/3` with `c0 = 1/2` checked up to `q = 5`,
    /// Bob opening with `[0, 1]`.
    pub fn demo_line(levels: u32, anchor: Anchor) -> Self {
        let w = Weights::half();
        let line = LineSpec::new(
            Rat::new(1.into(), 2.into()),
            Rat::new(1.into(), 3.into()),
            Rat::zero(),
            Rat::new(1.into(), 2.into()),
            5,
            &w,
        )
        .expect("demo c0 passes its scan");
        GameConfig {
            weights: w,
            beta: Rat::new(1.into(), 2.into()),
            regime: Regime::Line { line },
            anchor,
            levels,
            mode: ConstantsMode::Demo,
            b0: Interval::new(Rat::zero(), Rat::one()),
        }
    }

    pub fn alpha(&self) -> Rat {
        Rat::new(1.into(), 2.into())
    }

    /// Sub-rounds per level: the exponent in `R = (2/beta)^s`.
    pub fn sub_rounds(&self) -> u32 {
        match self.regime {
            Regime::Curve { .. } => 5,
            Regime::Line { .. } => 4,
        }
    }

    /// Allowed dangerous children per vertex in the homogeneous and shifted layers.
    pub fn thresholds(&self) -> (u64, u64) {
        match self.regime {
            Regime::Curve { .. } => (10, 12),
            Regime::Line { .. } => (5, 7),
        }
    }

    /// Threshold of the final layer.
    pub fn threshold(&self) -> u64 {
        let (h, i) = self.thresholds();
        if self.anchor.is_zero() {
            h
        } else {
            i
        }
    }
}

/// Constants of either regime.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
#[allow(clippy::large_enum_variant)] // built once per setup
pub enum RegimeConstants {
    Curve(CurveConstants),
    Line(LineConstants),
}

impl RegimeConstants {
    pub fn r(&self) -> &Rat {
        match self {
            RegimeConstants::Curve(k) => &k.r,
            RegimeConstants::Line(k) => &k.r,
        }
    }

    pub fn c(&self) -> &Rat {
        match self {
            RegimeConstants::Curve(k) => &k.c,
            RegimeConstants::Line(k) => &k.c,
        }
    }

    pub fn c_prime(&self) -> &Rat {
        match self {
            RegimeConstants::Curve(k) => &k.c_prime,
            RegimeConstants::Line(k) => &k.c_prime,
        }
    }

    pub fn kappa(&self) -> &Rat {
        match self {
            RegimeConstants::Curve(k) => &k.kappa,
            RegimeConstants::Line(k) => &k.kappa,
        }
    }

    /// Denominator cap used by the enumeration, if any.
    pub fn q_cap(&self) -> Option<Rat> {
        match self {
            RegimeConstants::Curve(k) => k.q_cap.clone(),
            RegimeConstants::Line(k) => k.q_cap.clone(),
        }
    }
}

impl RegimeConstants {
    pub fn h_prime(&self, n: u32) -> Rat {
        match self {
            RegimeConstants::Curve(k) => k.h_prime(n),
            RegimeConstants::Line(k) => k.h_prime(n),
        }
    }

    /// Largest `q` with `q^(1 + max(i, j)) < H'_{levels+1}`, the denominators
    /// a shifted candidate of level at most `levels` can have.
    pub fn shifted_q(&self, w: &Weights, levels: u32) -> u64 {
        let h = self.h_prime(levels + 1);
        let e = Rat::one() + w.max();
        let mut q = 0u64;
        while h > Rat::zero() && crate::exact_arith::cmp_pow(&h, &ri(q + 1), &e) == std::cmp::Ordering::Greater {
            q += 1;
        }
        q
    }
}

/// Everything that depends only on `A0`: constants, enumerated sets and the tree.
pub struct Setup {
    pub a0: Ball1D,
    pub constants: RegimeConstants,
    pub points: Vec<Vec<TaggedPoint>>,
    pub candidates: Vec<Vec<InhomCandidate>>,
    pub deltas: Vec<Vec<DeltaInterval>>,
    pub theta_deltas: Vec<Vec<DeltaInterval>>,
    pub tree: LayeredTree,
}

/// Derive constants for `A0` and apply the DEMO denominator cap.
pub fn derive_constants(cfg: &GameConfig, a0: &Ball1D) -> Result<RegimeConstants, GameError> {
    Ok(match &cfg.regime {
        Regime::Curve { curve } => {
            let k = derive_curve_constants(&cfg.weights, &cfg.beta, curve, a0, cfg.mode)?;
            let k = if cfg.mode == ConstantsMode::Demo { k.with_level_cap(cfg.levels.max(1)) } else { k };
            RegimeConstants::Curve(k)
        }
        Regime::Line { line } => RegimeConstants::Line(derive_line_constants(
            &cfg.weights,
            &cfg.beta,
            line,
            a0,
            cfg.mode,
            cfg.levels.max(1),
        )?),
    })
}

impl Setup {
    pub fn new(cfg: &GameConfig, a0: &Ball1D) -> Result<Self, GameError> {
        let constants = derive_constants(cfg, a0)?;
        let w = &cfg.weights;
        let mut points = Vec::new();
        let mut candidates = Vec::new();
        for n in 1..=cfg.levels {
            match (&cfg.regime, &constants) {
                (Regime::Curve { curve }, RegimeConstants::Curve(k)) => {
                    points.push(enumerate_p_level(n, curve, k, Some(a0))?);
                    candidates.push(if cfg.anchor.is_zero() {
                        vec![]
                    } else {
                        enumerate_v_level(n, curve, k, &cfg.anchor, Some(a0))?
                    });
                }
                (Regime::Line { line }, RegimeConstants::Line(k)) => {
                    points.push(enumerate_p_line_level(n, line, k, a0)?);
                    candidates.push(if cfg.anchor.is_zero() {
                        vec![]
                    } else {
                        enumerate_v_line_level(n, line, k, &cfg.anchor, a0)?
                    });
                }
                _ => unreachable!("constants follow the regime"),
            }
        }
        let c = constants.c().clone();
        let deltas: Vec<Vec<DeltaInterval>> =
            points.iter().map(|lv| lv.iter().map(|p| delta_interval(&p.point, &c, w)).collect()).collect();
        let theta_deltas: Vec<Vec<DeltaInterval>> = candidates
            .iter()
            .map(|lv| lv.iter().map(|v| delta_theta_interval(v, &cfg.anchor, constants.c_prime(), w)).collect())
            .collect();
        let assign = IntervalAssignment::new(a0.clone(), constants.r().clone());
        let n = assign.branching;
        let (t_hom, t_inh) = cfg.thresholds();
        let mut layers = vec![Layer { hazards: deltas.clone(), min_degree: n.saturating_sub(t_hom) }];
        if !cfg.anchor.is_zero() {
            layers.push(Layer { hazards: theta_deltas.clone(), min_degree: n.saturating_sub(t_inh) });
        }
        let tree = LayeredTree::new(assign, layers, cfg.levels);
        Ok(Setup { a0: a0.clone(), constants, points, candidates, deltas, theta_deltas, tree })
    }

    /// At most one shifted candidate meets `I(tau)` for each kept `tau` on
    /// the given path at the level below it.
    pub fn check_inhom_uniqueness(&self, path: &[u32]) -> Result<(), TreeError> {
        for n in 1..=path.len().min(self.theta_deltas.len()) {
            let iv = self.tree.assign.interval_of(&path[..n - 1]);
            let hits = self.theta_deltas[n - 1].iter().filter(|d| d.meets(&iv.lo, &iv.hi)).count();
            if hits > 1 {
                return Err(TreeError::InhomUniquenessViolated { path: path[..n - 1].to_vec(), level: n as u32 });
            }
        }
        Ok(())
    }
}

/// Bob's side of the game.
pub trait Bob {
    fn name(&self) -> String;
    /// A ball inside `a` with diameter `beta * rho(a)`.
    fn respond(&mut self, a: &Ball1D, beta: &Rat) -> Ball1D;
}

/// Uniform placement on a grid of 1024 steps.
pub struct BobRandom {
    rng: ChaCha8Rng,
    seed: u64,
}

impl BobRandom {
    pub fn new(seed: u64) -> Self {
        BobRandom { rng: ChaCha8Rng::seed_from_u64(seed), seed }
    }
}

pub const BOB_GRID: u32 = 1024;

impl Bob for BobRandom {
    fn name(&self) -> String {
        format!("random:{}", self.seed)
    }

    fn respond(&mut self, a: &Ball1D, beta: &Rat) -> Ball1D {
        let len = a.len() * beta;
        let slack = a.len() - &len;
        let k = self.rng.gen_range(0..=BOB_GRID);
        let lo = &a.lo + slack * Rat::new(k.into(), BOB_GRID.into());
        Interval::new(lo.clone(), lo + len)
    }
}

/// Centers its ball on a target point, switching targets (at random among
/// those still inside Alice's ball) when the current one is lost.
pub struct BobTarget {
    targets: Vec<Rat>,
    current: Option<Rat>,
    rng: ChaCha8Rng,
    seed: u64,
}

impl BobTarget {
    pub fn new(targets: Vec<Rat>, seed: u64) -> Self {
        BobTarget { targets, current: None, rng: ChaCha8Rng::seed_from_u64(seed), seed }
    }
}

/// Ball of length `len` inside `a`, centered at `x` when possible.
pub fn place_near(a: &Ball1D, len: &Rat, x: &Rat) -> Ball1D {
    let half = len / ri(2);
    let lo = (x - &half).max(a.lo.clone()).min(&a.hi - len);
    Interval::new(lo.clone(), lo + len)
}

impl Bob for BobTarget {
    fn name(&self) -> String {
        format!("target:{}", self.seed)
    }

    fn respond(&mut self, a: &Ball1D, beta: &Rat) -> Ball1D {
        let keep = self.current.as_ref().is_some_and(|t| a.contains(t));
        if !keep {
            let inside: Vec<&Rat> = self.targets.iter().filter(|t| a.contains(t)).collect();
            self.current = if inside.is_empty() {
                let m = a.mid();
                self.targets.iter().min_by_key(|t| (*t - &m).abs_sub_zero()).cloned()
            } else {
                Some(inside[self.rng.gen_range(0..inside.len())].clone())
            };
        }
        let len = a.len() * beta;
        match &self.current {
            Some(t) => place_near(a, &len, t),
            None => shrink_centered(a, beta),
        }
    }
}

trait AbsSubZero {
    fn abs_sub_zero(&self) -> Rat;
}

impl AbsSubZero for Rat {
    fn abs_sub_zero(&self) -> Rat {
        if self < &Rat::zero() {
            -self.clone()
        } else {
            self.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mover {
    Alice,
    Bob,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "phase", rename_all = "lowercase")]
pub enum Phase {
    Open,
    Preliminary {
        round: u32,
    },
    /// Start of the tree phase: `A0` and `l` are fixed from here on.
    Relabel,
    Level {
        level: u32,
        t: u32,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Move {
    pub mover: Mover,
    #[serde(flatten)]
    pub phase: Phase,
    pub ball: Ball1D,
}

/// Count of dangerous intervals inside Bob's ball at one sub-round.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountEntry {
    pub level: u32,
    pub t: u32,
    pub count: usize,
    pub allowed: usize,
}

/// The vertex Alice reached at a level and how many dangerous sets it avoids.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelCertificate {
    pub level: u32,
    pub path: Vec<u32>,
    pub interval: Interval,
    pub avoided_points: usize,
    pub avoided_candidates: usize,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transcript {
    pub bob: String,
    pub moves: Vec<Move>,
    pub counts: Vec<CountEntry>,
    pub certificates: Vec<LevelCertificate>,
    pub a0: Ball1D,
    pub final_enclosure: Ball1D,
}

impl Transcript {
    /// Every move validated against the previous one.
    pub fn validate(&self, alpha: &Rat, beta: &Rat) -> Result<(), MoveViolation> {
        for w in self.moves.windows(2) {
            let ratio = match w[1].mover {
                Mover::Alice => alpha,
                Mover::Bob => beta,
            };
            validate_move(&w[0].ball, &w[1].ball, ratio)?;
        }
        Ok(())
    }
}

/// Runs games sharing the per-`A0` setup.
pub struct GameEngine {
    pub config: GameConfig,
    setups: HashMap<Interval, Setup>,
}

fn preliminary_needed(cfg: &GameConfig, rho_b: &Rat, kappa: &Rat, r: &Rat) -> bool {
    cfg.mode == ConstantsMode::Faithful && ri(6) * kappa * rho_b * r * r >= Rat::one()
}

impl GameEngine {
    pub fn new(config: GameConfig) -> Self {
        GameEngine { config, setups: HashMap::new() }
    }

    /// `kappa` and `R` do not depend on `A0`, so they are available before the shrink.
    fn kappa_r(&self) -> Result<(Rat, Rat), GameError> {
        let cfg = &self.config;
        Ok(match &cfg.regime {
            Regime::Curve { curve } => {
                (crate::problem_model::kappa_for_curve(curve)?, crate::problem_model::r_from_beta(&cfg.beta, 5))
            }
            Regime::Line { line } => {
                (line.a.abs_sub_zero() + Rat::one(), crate::problem_model::r_from_beta(&cfg.beta, 4))
            }
        })
    }

    pub fn setup(&mut self, a0: &Ball1D) -> Result<&mut Setup, GameError> {
        if !self.setups.contains_key(a0) {
            let s = Setup::new(&self.config, a0)?;
            self.setups.insert(a0.clone(), s);
        }
        Ok(self.setups.get_mut(a0).unwrap())
    }

    /// Play one game against `bob` with Alice following the tree strategy.
    pub fn run(&mut self, bob: &mut dyn Bob) -> Result<Transcript, GameError> {
        let cfg = self.config.clone();
        let alpha = cfg.alpha();
        let beta = cfg.beta.clone();
        let mut moves = vec![Move { mover: Mover::Bob, phase: Phase::Open, ball: cfg.b0.clone() }];
        let (kappa, r) = self.kappa_r()?;
        // preliminary shrink: same-center halving until 6 kappa rho(B) R^2 < 1
        let mut b = cfg.b0.clone();
        let mut round = 0;
        while preliminary_needed(&cfg, &b.len(), &kappa, &r) {
            let a = alice_open(&b);
            moves.push(Move { mover: Mover::Alice, phase: Phase::Preliminary { round }, ball: a.clone() });
            b = bob.respond(&a, &beta);
            check(&a, &b, &beta, "Bob")?;
            round += 1;
            moves.push(Move { mover: Mover::Bob, phase: Phase::Preliminary { round }, ball: b.clone() });
        }
        let a0 = alice_open(&b);
        moves.push(Move { mover: Mover::Alice, phase: Phase::Relabel, ball: a0.clone() });
        let s_rounds = cfg.sub_rounds();
        let threshold = cfg.threshold() as usize;
        let setup = self.setup(&a0)?;
        let mut counts = Vec::new();
        let mut certificates = Vec::new();
        if cfg.levels > 0 {
            setup.tree.check_root()?;
        }
        let mut path: Vec<u32> = vec![];
        let mut a = a0.clone();
        for level in 0..cfg.levels {
            let dangerous = setup.tree.dangerous_child_intervals(&path);
            for t in 0..s_rounds {
                let bb = bob.respond(&a, &beta);
                check(&a, &bb, &beta, "Bob")?;
                moves.push(Move { mover: Mover::Bob, phase: Phase::Level { level: level + 1, t }, ball: bb.clone() });
                let count = dangerous.iter().filter(|d| bb.contains_interval(d)).count();
                let allowed = threshold >> t;
                counts.push(CountEntry { level: level + 1, t, count, allowed });
                if count > allowed {
                    return Err(GameError::StrategyBroken { level: level + 1, t, count, allowed });
                }
                let next = if t + 1 < s_rounds {
                    let m = bb.mid();
                    let left = Interval::new(bb.lo.clone(), m.clone());
                    let right = Interval::new(m, bb.hi.clone());
                    let cl = dangerous.iter().filter(|d| left.contains_interval(d)).count();
                    let cr = dangerous.iter().filter(|d| right.contains_interval(d)).count();
                    if cr < cl {
                        right
                    } else {
                        left
                    }
                } else {
                    let j =
                        leftmost_kept_child(&mut setup.tree, &path, &bb).ok_or(GameError::NoKeptChild(level + 1))?;
                    path.push(j);
                    setup.tree.assign.interval_of(&path)
                };
                check(&bb, &next, &alpha, "Alice")?;
                moves.push(Move {
                    mover: Mover::Alice,
                    phase: Phase::Level { level: level + 1, t },
                    ball: next.clone(),
                });
                a = next;
            }
            let lv = level as usize;
            certificates.push(LevelCertificate {
                level: level + 1,
                path: path.clone(),
                interval: a.clone(),
                avoided_points: setup.deltas[lv].len(),
                avoided_candidates: setup.theta_deltas[lv].len(),
            });
        }
        if !cfg.anchor.is_zero() {
            setup.check_inhom_uniqueness(&path)?;
        }
        Ok(Transcript { bob: bob.name(), moves, counts, certificates, a0, final_enclosure: a })
    }

    /// The same protocol with Alice always answering by the centered half.
    pub fn run_naive(&mut self, bob: &mut dyn Bob) -> Result<Transcript, GameError> {
        let cfg = self.config.clone();
        let alpha = cfg.alpha();
        let beta = cfg.beta.clone();
        let mut moves = vec![Move { mover: Mover::Bob, phase: Phase::Open, ball: cfg.b0.clone() }];
        let a0 = alice_open(&cfg.b0);
        moves.push(Move { mover: Mover::Alice, phase: Phase::Relabel, ball: a0.clone() });
        let mut a = a0.clone();
        for level in 0..cfg.levels {
            for t in 0..cfg.sub_rounds() {
                let bb = bob.respond(&a, &beta);
                check(&a, &bb, &beta, "Bob")?;
                moves.push(Move { mover: Mover::Bob, phase: Phase::Level { level: level + 1, t }, ball: bb.clone() });
                a = shrink_centered(&bb, &alpha);
                moves.push(Move { mover: Mover::Alice, phase: Phase::Level { level: level + 1, t }, ball: a.clone() });
            }
        }
        Ok(Transcript { bob: bob.name(), moves, counts: vec![], certificates: vec![], a0, final_enclosure: a })
    }
}

fn check(prev: &Ball1D, next: &Ball1D, ratio: &Rat, who: &str) -> Result<(), GameError> {
    validate_move(prev, next, ratio).map_err(|violation| GameError::InvalidMove { who: who.to_string(), violation })
}

/// Leftmost child of `path` whose interval lies in `b` and which is kept.
fn leftmost_kept_child(tree: &mut LayeredTree, path: &[u32], b: &Ball1D) -> Option<u32> {
    let h = path.len() as u32;
    let lo = tree.assign.interval_of(path).lo;
    let w = tree.assign.width(h + 1);
    let first = crate::exact_arith::ceil_rat(&((&b.lo - &lo) / &w));
    let first: i64 = num_traits::ToPrimitive::to_i64(&first).unwrap_or(0).max(0);
    let mut j = first as u64;
    while j < tree.branching() {
        let civ = tree.assign.child_of(&lo, h, j as u32);
        if civ.hi > b.hi {
            break;
        }
        let mut c = path.to_vec();
        c.push(j as u32);
        if tree.kept(&c) {
            return Some(j as u32);
        }
        j += 1;
    }
    None
}

/// Number of preliminary rounds the faithful strategy plays before the tree phase.
pub fn alice_preliminary_rounds(kappa: &Rat, r: &Rat, rho_b0: &Rat, alpha_beta: &Rat) -> u32 {
    crate::problem_model::preliminary_rounds(kappa, r, rho_b0, alpha_beta)
}

/// Every enumerated dangerous interval missed by the closed interval.
pub fn enclosure_avoids(enclosure: &Ball1D, deltas: &[Vec<DeltaInterval>]) -> bool {
    deltas.iter().flatten().all(|d| !d.meets(&enclosure.lo, &enclosure.hi))
}

/// Does the interval meet any of the given dangerous intervals?
pub fn meets_any(enclosure: &Ball1D, deltas: &[Vec<DeltaInterval>]) -> bool {
    !enclosure_avoids(enclosure, deltas)
}

/// What a finished game proves about its enclosure.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Certificate {
    pub bob: String,
    pub final_enclosure: Ball1D,
    #[serde(with = "crate::serial::rat_str")]
    pub midpoint: Rat,
    pub avoided_points: usize,
    pub avoided_candidates: usize,
    /// Exact disjointness from every enumerated dangerous interval.
    pub avoids_all: bool,
    pub homogeneous: crate::verifier::BadnessReport,
    pub shifted: Option<crate::verifier::BadnessReport>,
}

impl Certificate {
    pub fn passes(&self) -> bool {
        self.avoids_all && self.homogeneous.passes && self.shifted.as_ref().is_none_or(|r| r.passes)
    }
}

/// Recheck a transcript of this engine against the enumeration and the
/// independent badness scan at the enclosure midpoint.
pub fn certify(engine: &mut GameEngine, t: &Transcript) -> Result<Certificate, GameError> {
    let cfg = engine.config.clone();
    let setup = engine.setup(&t.a0)?;
    let x = t.final_enclosure.mid();
    let y = match &cfg.regime {
        Regime::Curve { curve } => curve.f.eval(&x),
        Regime::Line { line } => &line.a * &x + &line.b,
    };
    let avoids_all = enclosure_avoids(&t.final_enclosure, &setup.deltas)
        && enclosure_avoids(&t.final_enclosure, &setup.theta_deltas);
    let q_cap = setup.constants.q_cap().map(|q| floor_rat(&q).to_u64().unwrap_or(0)).unwrap_or(0);
    let homogeneous = crate::verifier::check_avoids(&x, &y, &cfg.weights, &Anchor::zero(), setup.constants.c(), q_cap);
    let shifted = (!cfg.anchor.is_zero()).then(|| {
        let q = setup.constants.shifted_q(&cfg.weights, cfg.levels);
        crate::verifier::check_avoids(&x, &y, &cfg.weights, &cfg.anchor, setup.constants.c_prime(), q)
    });
    Ok(Certificate {
        bob: t.bob.clone(),
        final_enclosure: t.final_enclosure.clone(),
        midpoint: x,
        avoided_points: setup.deltas.iter().map(Vec::len).sum(),
        avoided_candidates: setup.theta_deltas.iter().map(Vec::len).sum(),
        avoids_all,
        homogeneous,
        shifted,
    })
}

/// `floor(R)` helper for callers that only hold the constants.
pub fn branching_of(c: &RegimeConstants) -> u64 {
    num_traits::ToPrimitive::to_u64(&floor_rat(c.r())).unwrap_or(0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exact_arith::rat;

    #[test]
    fn validate_examples() {
        let b = Interval::new(ri(0), ri(1));
        let h = rat(1, 2);
        assert_eq!(validate_move(&b, &Interval::new(rat(1, 4), rat(3, 4)), &h), Ok(()));
        assert_eq!(validate_move(&b, &Interval::new(ri(0), rat(3, 5)), &h), Err(MoveViolation::WrongDiameter));
        assert_eq!(validate_move(&b, &Interval::new(rat(3, 4), rat(5, 4)), &h), Err(MoveViolation::NotContained));
    }

    #[test]
    fn open_examples() {
        assert_eq!(alice_open(&Interval::new(ri(0), ri(1))), Interval::new(rat(1, 4), rat(3, 4)));
        assert_eq!(alice_open(&Interval::new(ri(-1), ri(1))), Interval::new(rat(-1, 2), rat(1, 2)));
    }

    #[test]
    fn preliminary_example() {
        assert_eq!(alice_preliminary_rounds(&ri(2), &ri(4), &ri(1), &rat(1, 4)), 4);
        assert_eq!(alice_preliminary_rounds(&ri(2), &ri(4), &rat(1, 1000), &rat(1, 4)), 0);
    }

    #[test]
    fn random_bob_is_reproducible() {
        let a = Interval::new(ri(0), ri(1));
        let mut b1 = BobRandom::new(7);
        let mut b2 = BobRandom::new(7);
        for _ in 0..5 {
            let x = b1.respond(&a, &rat(1, 2));
            assert_eq!(x, b2.respond(&a, &rat(1, 2)));
            assert_eq!(validate_move(&a, &x, &rat(1, 2)), Ok(()));
        }
    }

    #[test]
    fn target_bob_covers_target() {
        let a = Interval::new(ri(0), ri(1));
        let mut b = BobTarget::new(vec![rat(1, 3)], 1);
        let x = b.respond(&a, &rat(1, 2));
        assert!(x.contains(&rat(1, 3)));
        let mut b = BobTarget::new(vec![rat(1, 100)], 1);
        let x = b.respond(&a, &rat(1, 2));
        assert_eq!(x.lo, ri(0));
    }

    fn demo_curve(levels: u32) -> GameConfig {
        GameConfig {
            weights: Weights::half(),
            beta: rat(1, 2),
            regime: Regime::Curve { curve: CurveSpec::parabola(rat(1, 10), rat(9, 10)).unwrap() },
            anchor: Anchor::zero(),
            levels,
            mode: ConstantsMode::Demo,
            b0: Interval::new(rat(1, 10), rat(9, 10)),
        }
    }

    #[test]
    fn zero_levels_ends_at_a0() {
        let mut e = GameEngine::new(demo_curve(0));
        let t = e.run(&mut BobRandom::new(1)).unwrap();
        assert_eq!(t.final_enclosure, Interval::new(rat(3, 10), rat(7, 10)));
    }

    #[test]
    fn demo_curve_game_avoids_and_is_deterministic() {
        let mut e = GameEngine::new(demo_curve(2));
        let t1 = e.run(&mut BobRandom::new(3)).unwrap();
        let t2 = e.run(&mut BobRandom::new(3)).unwrap();
        assert_eq!(t1, t2);
        t1.validate(&rat(1, 2), &rat(1, 2)).unwrap();
        let s = e.setup(&t1.a0).unwrap();
        assert!(enclosure_avoids(&t1.final_enclosure, &s.deltas));
        // diameter identity: 2 levels of 5 sub-rounds
        assert_eq!(t1.final_enclosure.len(), rat(2, 5) / ri(1024 * 1024));
    }
}
