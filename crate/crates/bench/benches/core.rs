use criterion::{black_box, criterion_group, criterion_main, Criterion};

use schmidt_core::dangerous_sets::{assign_dual_line, enumerate_p_levels, RationalPoint};
use schmidt_core::exact_arith::rat;
use schmidt_core::game2d::{PlaneConfig, PlaneSetup};
use schmidt_core::game_engine::*;
use schmidt_core::problem_model::{Anchor, Weights};
use schmidt_core::verifier::check_avoids;

fn curve_engine() -> GameEngine {
    GameEngine::new(GameConfig::demo_curve(3, Anchor::zero()))
}

fn enumeration(c: &mut Criterion) {
    let mut e = curve_engine();
    let a0 = alice_open(&e.config.b0);
    let Regime::Curve { curve } = e.config.regime.clone() else { unreachable!() };
    let RegimeConstants::Curve(k) = e.setup(&a0).unwrap().constants.clone() else { unreachable!() };
    let mut g = c.benchmark_group("enumeration");
    g.sample_size(10);
    g.bench_function("curve, 3 levels", |b| b.iter(|| enumerate_p_levels(3, &curve, &k, None).unwrap()));
    g.finish();
}

fn dual_lines(c: &mut Criterion) {
    let w = Weights::half();
    let pts: Vec<RationalPoint> = (1..=200i64)
        .flat_map(|q| [(1, 1), (q / 3, q / 2 + 1), (q - 1, 2)].map(|(p, r)| RationalPoint { p, r, q }))
        .filter(|p| RationalPoint::new(p.p, p.r, p.q).is_ok())
        .collect();
    c.bench_function("dual line assignment", |b| {
        b.iter(|| pts.iter().map(|p| assign_dual_line(black_box(p), &w).unwrap().a).sum::<i64>())
    });
}

fn games(c: &mut Criterion) {
    let mut e = curve_engine();
    let mut seed = 0;
    e.run(&mut BobRandom::new(0)).unwrap();
    c.bench_function("curve game, 3 levels", |b| {
        b.iter(|| {
            seed += 1;
            e.run(&mut BobRandom::new(seed)).unwrap()
        })
    });
}

fn scan(c: &mut Criterion) {
    let (x, y) = (rat(1_276_491_049, 2_684_354_560), rat(2, 7));
    let w = Weights::half();
    c.bench_function("check_avoids to q = 351", |b| {
        b.iter(|| check_avoids(&x, &y, &w, &Anchor::zero(), &rat(1, 1 << 37), black_box(351)))
    });
}

fn plane(c: &mut Criterion) {
    let cfg = PlaneConfig::demo(2);
    let mut g = c.benchmark_group("plane");
    g.sample_size(10);
    g.bench_function("setup, 2 levels", |b| b.iter(|| PlaneSetup::new(&cfg).unwrap()));
    g.finish();
}

criterion_group!(benches, enumeration, dual_lines, games, scan, plane);
criterion_main!(benches);
