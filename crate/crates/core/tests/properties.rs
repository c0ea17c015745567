use std::sync::{Mutex, OnceLock};

use num_traits::{Signed, Zero};
use proptest::prelude::*;

use schmidt_core::exact_arith::*;
use schmidt_core::game2d::ColoredAssignment;
use schmidt_core::game2d::Square;
use schmidt_core::game_engine::*;
use schmidt_core::problem_model::*;
use schmidt_core::tree_strategy::IntervalAssignment;

fn small_rat() -> impl Strategy<Value = Rat> {
    (-200i64..=200, 1i64..=60).prop_map(|(n, d)| rat(n, d))
}

fn pos_rat() -> impl Strategy<Value = Rat> {
    (1i64..=500, 1i64..=500).prop_map(|(n, d)| rat(n, d))
}

fn surd() -> impl Strategy<Value = Surd2> {
    (small_rat(), small_rat()).prop_map(|(a, b)| Surd2::new(a, b))
}

fn curve_engine() -> &'static Mutex<GameEngine> {
    static E: OnceLock<Mutex<GameEngine>> = OnceLock::new();
    E.get_or_init(|| Mutex::new(GameEngine::new(GameConfig::demo_curve(3, Anchor::zero()))))
}

fn line_engine() -> &'static Mutex<GameEngine> {
    static E: OnceLock<Mutex<GameEngine>> = OnceLock::new();
    E.get_or_init(|| Mutex::new(GameEngine::new(GameConfig::demo_line(2, Anchor::zero()))))
}

proptest! {
    #[test]
    fn powprod_bounds_contain_value(c in pos_rat(), b1 in pos_rat(), e1 in small_rat(), b2 in pos_rat(), e2 in small_rat()) {
        let m = PowProd::rat(c).times_pow(b1, e1).times_pow(b2, e2);
        let (lo, hi) = m.bounds(40);
        prop_assert!(lo <= hi);
        prop_assert_ne!(m.cmp_rat(&lo), std::cmp::Ordering::Less);
        prop_assert_ne!(m.cmp_rat(&hi), std::cmp::Ordering::Greater);
    }

    #[test]
    fn powprod_order_agrees_with_f64(b1 in pos_rat(), e1 in small_rat(), b2 in pos_rat(), e2 in small_rat()) {
        let x = PowProd::pow(b1, e1);
        let y = PowProd::pow(b2, e2);
        let (fx, fy) = (x.approx_f64(), y.approx_f64());
        prop_assume!(fx.is_finite() && fy.is_finite() && fx > 0.0 && fy > 0.0);
        prop_assume!((fx / fy - 1.0).abs() > 1e-6);
        prop_assert_eq!(x.cmp(&y), fx.partial_cmp(&fy).unwrap());
    }

    #[test]
    fn surd_field_identities(x in surd(), y in surd(), z in surd()) {
        prop_assert_eq!(&(&x + &y) * &z, &(&x * &z) + &(&y * &z));
        prop_assert_eq!(&(&x - &y) + &y, x.clone());
        if !x.is_zero() {
            prop_assert_eq!(&x * &x.inv().unwrap(), Surd2::one());
            prop_assert_eq!(x.norm(), (&x * &x.conj()).a);
        }
        prop_assert!(x.inv().is_ok() || x.is_zero());
    }

    #[test]
    fn surd_bounds_and_floor(x in surd()) {
        let (lo, hi) = x.bounds(50);
        prop_assert!(Surd2::from_rat(lo.clone()) <= x && x <= Surd2::from_rat(hi.clone()));
        let f = Surd2::from_rat(ri(x.floor()));
        prop_assert!(f <= x && x < &f + &Surd2::one());
        if lo.is_positive() {
            prop_assert_eq!(x.signum(), 1);
        }
        if hi.is_negative() {
            prop_assert_eq!(x.signum(), -1);
        }
    }

    #[test]
    fn dyadic_below_is_within_factor_two(b in pos_rat()) {
        prop_assume!(b <= ri(1));
        let c = dyadic_below(&b, false);
        prop_assert!(c <= b && b < &c * ri(2));
        let s = dyadic_below(&b, true);
        prop_assert!(s < b && b <= &s * ri(2));
        prop_assert_eq!(dyadic_below_pow(&PowProd::rat(b.clone()), false), c);
    }

    #[test]
    fn nearest_int_distance_is_at_most_half(x in small_rat()) {
        let d = dist_to_nearest_int(&x);
        prop_assert!(!d.is_negative() && d <= rat(1, 2));
        prop_assert!(((&x - &d).fract().is_zero()) || ((&x + &d).fract().is_zero()));
    }

    #[test]
    fn grid_property_of_interval_assignment(n in 1u32..=3, start in 0u32..1000, frac in 0u32..1000) {
        let a = IntervalAssignment::new(Interval::new(rat(3, 10), rat(7, 10)), ri(7));
        let parent_path: Vec<u32> = (0..n - 1).map(|h| (start + h) % 7).collect();
        let parent = a.interval_of(&parent_path);
        // any closed subinterval of length 2 l R^-n inside the parent contains a child
        let len = a.width(n) * ri(2);
        let lo = &parent.lo + (parent.len() - &len) * rat(frac as i64, 999);
        let hi = &lo + &len;
        let h = n - 1;
        let found = (0..a.branching as u32).any(|j| {
            let ch = a.child_of(&parent.lo, h, j);
            lo <= ch.lo && ch.hi <= hi
        });
        prop_assert!(found);
    }

    #[test]
    fn children_tile_their_parent(path in proptest::collection::vec(0u32..7, 0..4)) {
        let a = IntervalAssignment::new(Interval::new(rat(1, 4), rat(3, 4)), ri(7));
        let p = a.interval_of(&path);
        let mut v = path.clone();
        v.push(0);
        for j in 0..7 {
            *v.last_mut().unwrap() = j;
            let ch = a.interval_of(&v);
            prop_assert!(p.contains_interval(&ch));
            prop_assert_eq!(ch.len(), a.width(path.len() as u32 + 1));
        }
    }

    #[test]
    fn shrink_and_bob_moves_validate(lo in small_rat(), len in pos_rat(), ratio in (1i64..10, 2i64..11), seed in any::<u64>()) {
        prop_assume!(ratio.0 < ratio.1);
        let ratio = rat(ratio.0, ratio.1);
        let b = Interval::new(lo.clone(), &lo + &len);
        let s = shrink_centered(&b, &ratio);
        prop_assert!(validate_move(&b, &s, &ratio).is_ok());
        prop_assert_eq!(s.mid(), b.mid());
        prop_assert!(validate_move(&b, &alice_open(&b), &rat(1, 2)).is_ok());
        let mut bob = BobRandom::new(seed);
        let r = bob.respond(&b, &ratio);
        prop_assert!(validate_move(&b, &r, &ratio).is_ok());
        prop_assert!(validate_move(&b, &r, &(ratio + rat(1, 1000))).is_err());
    }

    #[test]
    fn plane_children_nest_and_colors_are_balanced(path in proptest::collection::vec(0u32..(25 * 225), 0..3)) {
        let sigma0 = Square { x0: Surd2::from_rat(rat(7, 16)), y0: Surd2::from_rat(rat(7, 16)), side: Surd2::from_rat(rat(1, 8)) };
        let a = ColoredAssignment::new(sigma0, Surd2::new(ri(0), ri(60)), 15, 5, 3);
        prop_assert_eq!(a.branching(), 5625);
        let mut per = vec![0u64; a.colors() as usize];
        for j in 0..a.branching() as u32 {
            per[a.color_of(j) as usize] += 1;
        }
        prop_assert!(per.iter().all(|&c| c == 225));
        let parent = a.phi(&path);
        let lvl = path.len() as u32 + 1;
        for j in [0u32, 224, 225, 5624] {
            let mut v = path.clone();
            v.push(j);
            let ch = a.phi(&v);
            prop_assert!(parent.contains_square(&ch));
            prop_assert!(a.block(&parent, lvl, a.color_of(j)).contains_square(&ch));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn curve_games_validate_and_avoid(seed in any::<u64>()) {
        let mut e = curve_engine().lock().unwrap();
        let (alpha, beta) = (e.config.alpha(), e.config.beta.clone());
        let t = e.run(&mut BobRandom::new(seed)).unwrap();
        prop_assert!(t.validate(&alpha, &beta).is_ok());
        prop_assert!(certify(&mut e, &t).unwrap().passes());
        prop_assert!(t.counts.iter().all(|c| c.count <= c.allowed));
    }

    #[test]
    fn line_games_validate_and_avoid(seed in any::<u64>()) {
        let mut e = line_engine().lock().unwrap();
        let (alpha, beta) = (e.config.alpha(), e.config.beta.clone());
        let t = e.run(&mut BobRandom::new(seed)).unwrap();
        prop_assert!(t.validate(&alpha, &beta).is_ok());
        prop_assert!(certify(&mut e, &t).unwrap().passes());
    }

    #[test]
    fn replay_is_deterministic_and_round_trips(seed in any::<u64>()) {
        let mut e = curve_engine().lock().unwrap();
        let t1 = e.run(&mut BobRandom::new(seed)).unwrap();
        let t2 = e.run(&mut BobRandom::new(seed)).unwrap();
        prop_assert_eq!(&t1, &t2);
        let json = serde_json::to_string(&t1).unwrap();
        let back: Transcript = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, t1);
    }
}

#[test]
fn level_thresholds_are_positive() {
    let e = curve_engine().lock().unwrap();
    assert!(e.config.threshold() > 0);
    let cfg = GameConfig::demo_curve(3, Anchor::zero());
    let k = derive_constants(&cfg, &alice_open(&cfg.b0)).unwrap();
    assert!(k.c().is_positive() && !k.c().is_zero());
}
