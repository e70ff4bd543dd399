use fpp_core::diagnostics::{exp_bound_tail_of, wandering_tail_of, Thresholds};
use fpp_core::envelope::{upper_regular_envelope, GriddedFunction};
use fpp_core::estimators::growth_exponent;
use fpp_core::geometry::natural_cylinder;
use fpp_core::{ConstantWeights, Distribution, Frame, GeodesicEngine, Region, ShapeModel, Site, WeightField, Window};
use proptest::prelude::*;

fn unit_dir() -> impl Strategy<Value = [f64; 2]> {
    (0.0..core::f64::consts::TAU).prop_map(|a| [libm::cos(a), libm::sin(a)])
}

fn shape() -> impl Strategy<Value = ShapeModel> {
    prop_oneof![Just(ShapeModel::L2), Just(ShapeModel::L1)]
}

fn site(lo: i64, hi: i64) -> impl Strategy<Value = Site> {
    (lo..=hi, lo..=hi).prop_map(|(a, b)| Site::from([a, b]))
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn phi_is_linear(th in unit_dir(), s in shape(), u in prop::array::uniform2(-50.0..50.0f64),
                     v in prop::array::uniform2(-50.0..50.0f64), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let f = Frame::new(&s, &th).unwrap();
        let w = [a * u[0] + b * v[0], a * u[1] + b * v[1]];
        prop_assert!(close(f.phi(&w), a * f.phi(&u) + b * f.phi(&v)));
    }

    #[test]
    fn projection_is_idempotent(th in unit_dir(), s in shape(), u in prop::array::uniform2(-50.0..50.0f64)) {
        let f = Frame::new(&s, &th).unwrap();
        let p = f.project(&u);
        let pp = f.project(&p);
        prop_assert!(close(p[0], pp[0]) && close(p[1], pp[1]));
        prop_assert!(close(f.phi(&p), f.phi(&u)));
    }

    #[test]
    fn natural_cylinder_translates(x in site(-5, 5), d in site(-8, 8), t in site(-20, 20),
                                   u in prop::array::uniform2(-15.0..15.0f64), radius in 0.5..4.0f64) {
        prop_assume!(d.l1_norm() > 0);
        let y = x.offset(&d);
        let c = natural_cylinder(&x, &y, radius, &ShapeModel::L2).unwrap();
        let ct = natural_cylinder(&x.offset(&t), &y.offset(&t), radius, &ShapeModel::L2).unwrap();
        let tc = t.to_point();
        let shifted = [u[0] + tc[0], u[1] + tc[1]];
        // skip points within rounding of the boundary
        let margin = (c.axis_distance(&u) - radius).abs().min((c.slab().phi(&u) - c.slab().lo()).abs())
            .min((c.slab().phi(&u) - c.slab().hi()).abs());
        prop_assume!(margin > 1e-6);
        prop_assert_eq!(c.contains(&u), ct.contains(&shifted));
    }

    #[test]
    fn passage_times_are_a_metric(seed in 0u64..1_000, rep in 0u64..50, a in site(0, 5), b in site(0, 5), c in site(0, 5)) {
        let field = WeightField::new(seed, rep, Distribution::Exponential { rate: 1.0 }).unwrap();
        let mut e = GeodesicEngine::new(Window::cube(2, -2, 7).unwrap());
        let all = Region::All;
        let ab = e.passage_time(&field, &a, &b, &all).unwrap().time;
        let ba = e.passage_time(&field, &b, &a, &all).unwrap().time;
        let bc = e.passage_time(&field, &b, &c, &all).unwrap().time;
        let ac = e.passage_time(&field, &a, &c, &all).unwrap().time;
        prop_assert!(ab >= 0.0);
        prop_assert!(close(ab, ba));
        prop_assert!(ac <= ab + bc + 1e-12);
    }

    #[test]
    fn restriction_never_shortens(seed in 0u64..1_000, x in site(2, 6), th in unit_dir()) {
        let field = WeightField::new(seed, 0, Distribution::Uniform { a: 0.5, b: 1.5 }).unwrap();
        let mut e = GeodesicEngine::new(Window::cube(2, -3, 9).unwrap());
        let o = Site::origin(2);
        let free = e.passage_time(&field, &o, &x, &Region::All).unwrap();
        let f = Frame::new(&ShapeModel::L2, &th).unwrap();
        let hs = fpp_core::geometry::Halfspace { frame: f, origin: vec![0.0, 0.0], level: -1.0, side: fpp_core::geometry::Side::Upper };
        let r = e.passage_time(&field, &o, &x, &Region::Halfspace(hs));
        if let Ok(r) = r {
            prop_assert!(r.time >= free.time - 1e-12);
        }
    }

    #[test]
    fn constant_weights_give_l1_distance(a in site(-4, 4), b in site(-4, 4), w in 0.1..5.0f64) {
        let mut e = GeodesicEngine::new(Window::cube(2, -5, 5).unwrap());
        let t = e.passage_time(&ConstantWeights(w), &a, &b, &Region::All).unwrap().time;
        prop_assert!(close(t, w * a.l1_distance(&b) as f64));
    }

    #[test]
    fn growth_exponent_is_scale_equivariant(vals in prop::collection::vec(0.1..10.0f64, 6), c in 0.01..100.0f64, p in 0.2..3.0f64) {
        let pts: Vec<(f64, f64)> = vals.iter().enumerate().map(|(i, v)| (libm::exp2(i as f64 + 2.0), *v)).collect();
        let base = growth_exponent(&pts, None).unwrap().chi_hat;
        let scaled: Vec<(f64, f64)> = pts.iter().map(|q| (q.0, c * q.1)).collect();
        let powered: Vec<(f64, f64)> = pts.iter().map(|q| (q.0, libm::pow(q.1, p))).collect();
        prop_assert!((growth_exponent(&scaled, None).unwrap().chi_hat - base).abs() < 1e-9);
        prop_assert!((growth_exponent(&powered, None).unwrap().chi_hat - p * base).abs() < 1e-9);
    }

    #[test]
    fn envelope_dominates(vals in prop::collection::vec(0.05..20.0f64, 4..24)) {
        let knots: Vec<f64> = (0..vals.len()).map(|i| libm::pow(1.5, i as f64)).collect();
        let f = GriddedFunction::new(knots, vals.clone()).unwrap();
        let env = upper_regular_envelope(&f).unwrap();
        for (up, v) in env.f_up.values().iter().zip(&vals) {
            prop_assert!(*up >= *v * (1.0 - 1e-12));
        }
        prop_assert!(env.min_ratio <= env.ratio_bound * (1.0 + 1e-9));
    }

    #[test]
    fn tail_probabilities_are_monotone(xs in prop::collection::vec(-10.0..10.0f64, 3..80),
                                       grid in prop::collection::vec(0.0..4.0f64, 1..8)) {
        prop_assume!(xs.iter().any(|x| (x - xs[0]).abs() > 1e-6));
        let rep = exp_bound_tail_of(&xs, &grid, Thresholds::default()).unwrap();
        prop_assert!(rep.is_monotone());
        prop_assert!(rep.points.iter().all(|p| (0.0..=1.0).contains(&p.estimate) && p.se >= 0.0));
        let abs: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
        prop_assert!(wandering_tail_of(&abs, &grid, Thresholds::default()).unwrap().is_monotone());
        prop_assert_eq!(rep.rederive().1, rep.verdict);
    }
}
