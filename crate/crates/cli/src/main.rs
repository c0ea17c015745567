use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use schmidt_core::dangerous_sets::{HeightKind, TaggedPoint};
use schmidt_core::exact_arith::{parse_rat, Rat, Surd2};
use schmidt_core::game2d::{run_game_2d, type2_counts, Bob2DRandom, PlaneConfig, PlaneSetup, TypeIISample};
use schmidt_core::game_engine::{
    alice_open, certify, derive_constants, Bob, BobRandom, BobTarget, GameConfig, GameEngine, Regime, RegimeConstants,
    Setup,
};
use schmidt_core::poly::Poly;
use schmidt_core::problem_model::{
    derive_plane_constants, Anchor, ConstantsMode, CurveSpec, Interval, LineSpec, Weights,
};
use schmidt_core::verifier::{check_avoids, dio_condition_scan};

#[derive(Parser)]
#[command(
    name = "schmidt",
    version,
    about = "Exact simulations of the badly approximable game on curves, lines and the plane"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive the constants of a regime.
    Constants(ProblemArgs),
    /// List the dangerous points and shifted candidates of each level.
    Enumerate {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Also write the points as CSV to this file.
        #[arg(long)]
        csv: Option<PathBuf>,
    },
    /// Summarize the pruned tree along its leftmost kept path.
    Tree {
        #[command(flatten)]
        problem: ProblemArgs,
        /// Seed of the sampled type-II subtree (plane only).
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Play one game and print its transcript.
    Play {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, value_enum, default_value_t = BobKind::Random)]
        bob: BobKind,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Alice answers with the centered half instead of following the tree.
        #[arg(long)]
        naive: bool,
        /// Write the transcript to this file instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Play many games and certify each final enclosure.
    Construct {
        #[command(flatten)]
        problem: ProblemArgs,
        #[arg(long, default_value_t = 10)]
        games: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Worker threads; results are reported in seed order regardless.
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Scan denominators for a simultaneous approximation at a rational point.
    Verify {
        #[arg(long)]
        x: String,
        #[arg(long)]
        y: String,
        #[arg(long)]
        c: String,
        #[arg(long = "Q")]
        q_cap: u64,
        #[arg(long, default_value = "1/2")]
        i: String,
        #[arg(long, default_value = "1/2")]
        j: String,
        #[arg(long, default_value = "0")]
        gamma: String,
        #[arg(long, default_value = "0")]
        delta: String,
    },
    /// Minimum of q^(1/sigma - epsilon) max(||qa||, ||qb||) over q <= Q.
    ScanDio {
        #[arg(long)]
        a: String,
        #[arg(long)]
        b: String,
        #[arg(long, default_value = "1/2")]
        sigma: String,
        #[arg(long, default_value = "0")]
        epsilon: String,
        #[arg(long = "Q")]
        q_cap: u64,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegimeKind {
    Curve,
    Line,
    Plane,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum BobKind {
    Random,
    Target,
}

#[derive(Args, Clone)]
struct ProblemArgs {
    #[arg(long, value_enum, default_value_t = RegimeKind::Curve)]
    regime: RegimeKind,
    /// JSON game configuration; flags given explicitly override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    i: Option<String>,
    #[arg(long)]
    j: Option<String>,
    #[arg(long)]
    beta: Option<String>,
    #[arg(long)]
    mode: Option<ConstantsMode>,
    #[arg(long)]
    levels: Option<u32>,
    /// Inhomogeneous shift as `gamma,delta`.
    #[arg(long)]
    anchor: Option<String>,
    /// Curve coefficients, constant term first, e.g. `0,0,1`.
    #[arg(long)]
    poly: Option<String>,
    /// Curve domain `lo,hi`.
    #[arg(long)]
    interval: Option<String>,
    /// Bob's opening interval `lo,hi`.
    #[arg(long)]
    b0: Option<String>,
    #[arg(long)]
    a: Option<String>,
    #[arg(long)]
    b: Option<String>,
    #[arg(long)]
    c0: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    #[arg(long)]
    scan_cap: Option<u64>,
}

enum Failure {
    Usage(String),
    Violation(Value),
}

type CmdResult = Result<Value, Failure>;

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn violation<E: std::fmt::Display>(kind: &str, e: E) -> Failure {
    Failure::Violation(json!({ "violation": kind, "detail": e.to_string() }))
}

fn rat(s: &str) -> Result<Rat, Failure> {
    parse_rat(s).ok_or_else(|| usage(format!("not a rational number: {s:?}")))
}

fn pair(s: &str) -> Result<(Rat, Rat), Failure> {
    let (a, b) = s.split_once(',').ok_or_else(|| usage(format!("expected two values separated by a comma: {s:?}")))?;
    Ok((rat(a)?, rat(b)?))
}

impl ProblemArgs {
    fn weights(&self, base: &Weights) -> Result<Weights, Failure> {
        let i = self.i.as_deref().map(rat).transpose()?.unwrap_or_else(|| base.i.clone());
        let j = self.j.as_deref().map(rat).transpose()?.unwrap_or_else(|| base.j.clone());
        Weights::new(i, j).map_err(usage)
    }

    fn load<T: serde::de::DeserializeOwned>(&self) -> Result<Option<T>, Failure> {
        match &self.config {
            None => Ok(None),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(usage)?;
                serde_json::from_str(&text).map(Some).map_err(usage)
            }
        }
    }

    fn game_config(&self) -> Result<GameConfig, Failure> {
        let anchor = self.anchor.as_deref().map(pair).transpose()?;
        let mut cfg = match self.load::<GameConfig>()? {
            Some(c) => c,
            None => match self.regime {
                RegimeKind::Curve => GameConfig::demo_curve(3, Anchor::zero()),
                RegimeKind::Line => GameConfig::demo_line(2, Anchor::zero()),
                RegimeKind::Plane => return Err(usage("the plane regime has its own configuration")),
            },
        };
        cfg.weights = self.weights(&cfg.weights)?;
        if let Some(b) = &self.beta {
            cfg.beta = rat(b)?;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(l) = self.levels {
            cfg.levels = l;
        }
        if let Some((g, d)) = anchor {
            cfg.anchor = Anchor::new(g, d);
        }
        if let Some(b0) = &self.b0 {
            let (lo, hi) = pair(b0)?;
            if lo >= hi {
                return Err(usage("b0 must have lo < hi"));
            }
            cfg.b0 = Interval::new(lo, hi);
        }
        match &mut cfg.regime {
            Regime::Curve { curve } => {
                if self.poly.is_some() || self.interval.is_some() {
                    let f = match &self.poly {
                        Some(p) => Poly::new(p.split(',').map(rat).collect::<Result<_, _>>()?),
                        None => curve.f.clone(),
                    };
                    let iv = match &self.interval {
                        Some(s) => {
                            let (lo, hi) = pair(s)?;
                            if lo >= hi {
                                return Err(usage("interval must have lo < hi"));
                            }
                            Interval::new(lo, hi)
                        }
                        None => curve.interval.clone(),
                    };
                    *curve = CurveSpec::new(f, iv).map_err(usage)?;
                }
            }
            Regime::Line { line } => {
                let get = |o: &Option<String>, d: &Rat| {
                    o.as_deref().map(rat).transpose().map(|v| v.unwrap_or_else(|| d.clone()))
                };
                let a = get(&self.a, &line.a)?;
                let b = get(&self.b, &line.b)?;
                let c0 = get(&self.c0, &line.c0)?;
                let eps = get(&self.epsilon, &line.epsilon)?;
                let cap = self.scan_cap.unwrap_or(line.scan_cap);
                *line = LineSpec::new(a, b, eps, c0, cap, &cfg.weights).map_err(usage)?;
            }
        }
        Ok(cfg)
    }

    fn plane_config(&self) -> Result<PlaneConfig, Failure> {
        let mut cfg = self.load::<PlaneConfig>()?.unwrap_or_else(|| PlaneConfig::demo(2));
        cfg.weights = self.weights(&cfg.weights)?;
        if let Some(b) = &self.beta {
            cfg.beta = rat(b)?;
        }
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(l) = self.levels {
            cfg.levels = l;
        }
        if let Some((g, d)) = self.anchor.as_deref().map(pair).transpose()? {
            cfg.anchor = Anchor::new(g, d);
        }
        Ok(cfg)
    }
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("domain values serialize")
}

fn cmd_constants(p: &ProblemArgs) -> CmdResult {
    if p.regime == RegimeKind::Plane {
        let cfg = p.plane_config()?;
        let l = &cfg.b0.diameter * &Surd2::new(Rat::from_integer(0.into()), Rat::new(1.into(), 60.into()));
        let mut k = derive_plane_constants(&cfg.weights, &cfg.beta, &l, cfg.mode).map_err(usage)?;
        if cfg.mode == ConstantsMode::Demo {
            k.q_cap = Some(Rat::from_integer(k.level_implied_q(cfg.levels.max(1))));
        }
        return Ok(json!({
            "regime": "plane",
            "constants": to_value(&k),
            "branching": k.branching(),
            "colors": k.colors(),
            "checks": to_value(&k.checks()),
        }));
    }
    let cfg = p.game_config()?;
    let a0 = alice_open(&cfg.b0);
    let k = derive_constants(&cfg, &a0).map_err(|e| violation("constants", e))?;
    let (checks, q_implied) = match &k {
        RegimeConstants::Curve(c) => (to_value(&c.checks()), c.level_implied_q(cfg.levels.max(1))),
        RegimeConstants::Line(c) => (to_value(&c.checks()), c.level_implied_q(cfg.levels.max(1))),
    };
    Ok(json!({
        "a0": to_value(&a0),
        "constants": to_value(&k),
        "checks": checks,
        "level_implied_q": q_implied.to_string(),
    }))
}

fn kind_str(k: HeightKind) -> &'static str {
    match k {
        HeightKind::Star => "star",
        HeightKind::NonStar => "nonstar",
    }
}

fn write_csv(path: &PathBuf, levels: &[Vec<TaggedPoint>]) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path).map_err(usage)?;
    w.write_record(["level", "class", "p", "r", "q", "A", "B", "C", "kind", "qE"]).map_err(usage)?;
    for lv in levels {
        for t in lv {
            w.write_record([
                t.level.to_string(),
                t.class_index.to_string(),
                t.point.p.to_string(),
                t.point.r.to_string(),
                t.point.q.to_string(),
                t.line.a.to_string(),
                t.line.b.to_string(),
                t.line.c.to_string(),
                kind_str(t.kind).to_string(),
                t.qe.to_string(),
            ])
            .map_err(usage)?;
        }
    }
    w.flush().map_err(usage)
}

fn cmd_enumerate(p: &ProblemArgs, csv: &Option<PathBuf>) -> CmdResult {
    let (points, candidates) = if p.regime == RegimeKind::Plane {
        let cfg = p.plane_config()?;
        let s = PlaneSetup::new(&cfg).map_err(|e| violation("enumerate", e))?;
        (s.points, s.candidates)
    } else {
        let cfg = p.game_config()?;
        let s = Setup::new(&cfg, &alice_open(&cfg.b0)).map_err(|e| violation("enumerate", e))?;
        (s.points, s.candidates)
    };
    if let Some(path) = csv {
        write_csv(path, &points)?;
    }
    Ok(json!({
        "counts": points.iter().map(Vec::len).collect::<Vec<_>>(),
        "candidate_counts": candidates.iter().map(Vec::len).collect::<Vec<_>>(),
        "points": to_value(&points),
        "candidates": to_value(&candidates),
    }))
}

fn cmd_tree(p: &ProblemArgs, seed: u64) -> CmdResult {
    if p.regime == RegimeKind::Plane {
        let cfg = p.plane_config()?;
        let mut s = PlaneSetup::new(&cfg).map_err(|e| violation("tree", e))?;
        let root = s.tree.check_root();
        let report = type2_counts(&mut s.tree, &TypeIISample { seed });
        let out = json!({
            "branching": s.tree.assign.branching(),
            "colors": s.tree.assign.colors(),
            "depth": s.tree.depth,
            "root_kept": root.is_ok(),
            "type2": to_value(&report),
            "growth_holds": report.growth_holds(112),
            "vertices": s.tree.materialized().len(),
        });
        return if root.is_ok() { Ok(out) } else { Err(Failure::Violation(out)) };
    }
    let cfg = p.game_config()?;
    let mut s = Setup::new(&cfg, &alice_open(&cfg.b0)).map_err(|e| violation("tree", e))?;
    let root = s.tree.check_root();
    let mut path = vec![];
    let mut walk = vec![];
    if root.is_ok() {
        for _ in 0..cfg.levels {
            let dangerous = s.tree.dangerous_children(&path);
            let next = (0..s.tree.branching() as u32).find(|&j| {
                let mut c = path.clone();
                c.push(j);
                s.tree.kept(&c)
            });
            walk.push(json!({ "path": path.clone(), "dangerous_children": dangerous }));
            match next {
                Some(j) => path.push(j),
                None => break,
            }
        }
    }
    let out = json!({
        "branching": s.tree.branching(),
        "depth": cfg.levels,
        "root_kept": root.is_ok(),
        "avoidance_counts": s.tree.avoidance_counts().iter().map(|c| c.to_string()).collect::<Vec<_>>(),
        "leftmost_path": walk,
        "materialized": s.tree.materialized(),
    });
    if root.is_ok() {
        Ok(out)
    } else {
        Err(Failure::Violation(out))
    }
}

/// Dangerous-set centers inside `A0`, the targets of the targeting Bob.
fn targets(s: &Setup) -> Vec<Rat> {
    s.deltas.iter().flatten().map(|d| d.center.clone()).filter(|x| s.a0.contains(x)).collect()
}

fn make_bob(kind: BobKind, seed: u64, engine: &mut GameEngine) -> Result<Box<dyn Bob>, Failure> {
    Ok(match kind {
        BobKind::Random => Box::new(BobRandom::new(seed)),
        BobKind::Target => {
            let a0 = alice_open(&engine.config.b0);
            let s = engine.setup(&a0).map_err(|e| violation("setup", e))?;
            Box::new(BobTarget::new(targets(s), seed))
        }
    })
}

fn cmd_play(p: &ProblemArgs, bob: BobKind, seed: u64, naive: bool) -> CmdResult {
    if p.regime == RegimeKind::Plane {
        let cfg = p.plane_config()?;
        let mut s = PlaneSetup::new(&cfg).map_err(|e| violation("setup", e))?;
        let t = run_game_2d(&cfg, &mut s, &mut Bob2DRandom::new(seed)).map_err(|e| violation("game", e))?;
        return Ok(to_value(&t));
    }
    let cfg = p.game_config()?;
    let mut engine = GameEngine::new(cfg);
    let mut b = make_bob(bob, seed, &mut engine)?;
    let t = if naive { engine.run_naive(b.as_mut()) } else { engine.run(b.as_mut()) };
    let t = t.map_err(|e| violation("game", e))?;
    Ok(to_value(&t))
}

fn cmd_construct(p: &ProblemArgs, games: u64, seed: u64, workers: usize) -> CmdResult {
    let cfg = p.game_config()?;
    let workers = workers.max(1) as u64;
    let results: Vec<Result<Value, String>> = std::thread::scope(|sc| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let cfg = cfg.clone();
                sc.spawn(move || {
                    let mut engine = GameEngine::new(cfg);
                    (0..games)
                        .filter(|g| g % workers == w)
                        .map(|g| {
                            let mut bob = BobRandom::new(seed + g);
                            let t = engine.run(&mut bob).map_err(|e| e.to_string())?;
                            let c = certify(&mut engine, &t).map_err(|e| e.to_string())?;
                            Ok((g, to_value(&c), c.passes()))
                        })
                        .collect::<Vec<Result<(u64, Value, bool), String>>>()
                })
            })
            .collect();
        let mut all: Vec<Result<(u64, Value, bool), String>> =
            handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect();
        all.sort_by_key(|r| r.as_ref().map(|x| x.0).unwrap_or(u64::MAX));
        all.into_iter().map(|r| r.and_then(|(_, v, ok)| if ok { Ok(v) } else { Err(v.to_string()) })).collect()
    });
    let failed = results.iter().filter(|r| r.is_err()).count();
    let out = json!({
        "games": games,
        "passed": games as usize - failed,
        "certificates": results.iter().map(|r| match r {
            Ok(v) => v.clone(),
            Err(e) => json!({ "error": e }),
        }).collect::<Vec<_>>(),
    });
    if failed == 0 {
        Ok(out)
    } else {
        Err(Failure::Violation(out))
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(x: &str, y: &str, c: &str, q_cap: u64, i: &str, j: &str, gamma: &str, delta: &str) -> CmdResult {
    let w = Weights::new(rat(i)?, rat(j)?).map_err(usage)?;
    let c = rat(c)?;
    if c < Rat::from_integer(0.into()) {
        return Err(usage("c must be nonnegative"));
    }
    let r = check_avoids(&rat(x)?, &rat(y)?, &w, &Anchor::new(rat(gamma)?, rat(delta)?), &c, q_cap);
    let v = to_value(&r);
    if r.passes {
        Ok(v)
    } else {
        Err(Failure::Violation(v))
    }
}

fn cmd_scan_dio(a: &str, b: &str, sigma: &str, epsilon: &str, q_cap: u64) -> CmdResult {
    let (a, b, sigma, eps) = (rat(a)?, rat(b)?, rat(sigma)?, rat(epsilon)?);
    let zero = Rat::from_integer(0.into());
    if sigma <= zero || sigma > Rat::new(1.into(), 2.into()) || eps < zero || q_cap == 0 {
        return Err(usage("need 0 < sigma <= 1/2, epsilon >= 0 and Q >= 1"));
    }
    let s = dio_condition_scan(&a, &b, &sigma, &eps, q_cap);
    Ok(json!({
        "min": s.min.to_string(),
        "approx": format!("{:.6e}", s.min.approx_f64()),
        "argmin": s.argmin,
    }))
}

/// Writes `v` to `path` when given and returns a short pointer to it.
fn write_out(v: Value, path: &Option<PathBuf>) -> CmdResult {
    let Some(path) = path else { return Ok(v) };
    let text = serde_json::to_string_pretty(&v).expect("json");
    fs::write(path, text).map_err(usage)?;
    Ok(json!({ "written": path.display().to_string() }))
}

/// Pretty JSON on stdout. A reader that closes the pipe early is not an error.
fn emit(v: &Value) {
    let mut out = io::stdout().lock();
    let text = serde_json::to_string_pretty(v).expect("json");
    if let Err(e) = writeln!(out, "{text}") {
        if e.kind() != io::ErrorKind::BrokenPipe {
            eprintln!("error: writing output: {e}");
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.cmd {
        Command::Constants(p) => cmd_constants(p),
        Command::Enumerate { problem, csv } => cmd_enumerate(problem, csv),
        Command::Tree { problem, seed } => cmd_tree(problem, *seed),
        Command::Play { problem, bob, seed, naive, out } => {
            cmd_play(problem, *bob, *seed, *naive).and_then(|v| write_out(v, out))
        }
        Command::Construct { problem, games, seed, workers } => cmd_construct(problem, *games, *seed, *workers),
        Command::Verify { x, y, c, q_cap, i, j, gamma, delta } => cmd_verify(x, y, c, *q_cap, i, j, gamma, delta),
        Command::ScanDio { a, b, sigma, epsilon, q_cap } => cmd_scan_dio(a, b, sigma, epsilon, *q_cap),
    };
    match result {
        Ok(v) => {
            emit(&v);
            ExitCode::SUCCESS
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Violation(v)) => {
            emit(&v);
            eprintln!("{}", serde_json::to_string(&json!({ "violation": v })).expect("json"));
            ExitCode::from(2)
        }
    }
}
