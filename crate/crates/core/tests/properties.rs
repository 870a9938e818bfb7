use ametric_core::prelude::*;
use proptest::prelude::*;

fn arity(t: usize) -> Arity {
    Arity::new(t).unwrap()
}

fn line(t: usize) -> AMetricSpace {
    make_absdiff_space(arity(t), 1, None).unwrap()
}

fn pairs(space: &AMetricSpace, seed: u64, n: usize) -> SampleSet {
    Sampler::new(seed)
        .with_near_equal(false)
        .tuples(space.carrier(), 2, n)
        .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn delta_is_below_one_and_dominates_a(
        t in 2usize..10,
        a in 0.0f64..1.0,
        bf in 0.0f64..1.0,
        cf in 0.0f64..1.0,
    ) {
        let tf = t as f64;
        let (b, c) = (bf / tf, cf / tf);
        let d = compute_delta(a, b, c, arity(t)).unwrap();
        prop_assert!(d < 1.0);
        prop_assert!(d >= a);
        prop_assert!(d >= b && d >= c);
    }

    #[test]
    fn delta_is_monotone(
        t in 2usize..6,
        a in 0.0f64..0.9,
        bf in 0.0f64..0.9,
        cf in 0.0f64..0.9,
        bump in 0.0f64..0.09,
    ) {
        let tf = t as f64;
        let base = compute_delta(a, bf / tf, cf / tf, arity(t)).unwrap();
        prop_assert!(compute_delta(a + bump, bf / tf, cf / tf, arity(t)).unwrap() >= base);
        prop_assert!(compute_delta(a, (bf + bump) / tf, cf / tf, arity(t)).unwrap() >= base);
        prop_assert!(compute_delta(a, bf / tf, (cf + bump) / tf, arity(t)).unwrap() >= base);
    }

    #[test]
    fn out_of_range_constants_are_rejected(t in 2usize..6, over in 0.0f64..2.0) {
        let tf = t as f64;
        prop_assert!(compute_delta(1.0 + over, 0.0, 0.0, arity(t)).is_err());
        prop_assert!(compute_delta(0.0, (1.0 + over) / tf, 0.0, arity(t)).is_err());
        prop_assert!(compute_delta(0.0, 0.0, (1.0 + over) / tf, arity(t)).is_err());
    }

    #[test]
    fn scaling_map_classifies_with_its_factor(t in 2usize..7, lambda in 0.01f64..0.99, seed in any::<u64>()) {
        let s = line(t);
        let f = make_map(MapSpec::LinearScale { lambda }, &s).unwrap();
        let cert = classify(&s, &f, &pairs(&s, seed, 200)).unwrap();
        prop_assert!(cert.valid);
        prop_assert!((cert.a - lambda).abs() <= 1e-12 * (1.0 + lambda), "a = {} for {}", cert.a, lambda);
        prop_assert_eq!(cert.b, 0.0);
        prop_assert_eq!(cert.c, 0.0);
    }

    #[test]
    fn distance_scales_with_the_map(t in 2usize..7, lambda in -3.0f64..3.0, xs in prop::collection::vec(-50.0f64..50.0, 8)) {
        let s = line(t);
        let pts: Vec<Point> = xs[..t].iter().map(|&x| Point::scalar(x)).collect();
        let scaled: Vec<Point> = xs[..t].iter().map(|&x| Point::scalar(lambda * x)).collect();
        let d = s.eval(&pts).unwrap();
        let ds = s.eval(&scaled).unwrap();
        prop_assert!((ds - lambda.abs() * d).abs() <= 1e-12 * (1.0 + ds.abs()));
    }

    #[test]
    fn two_argument_case_is_the_plain_metric(x in -1e3f64..1e3, y in -1e3f64..1e3) {
        let s = line(2);
        let (px, py) = (Point::scalar(x), Point::scalar(y));
        prop_assert_eq!(s.rep(&px, &py), (x - y).abs());
        prop_assert_eq!(s.rep(&px, &py), s.rep(&py, &px));
    }

    #[test]
    fn rep_scales_with_t_minus_one(t in 2usize..9, x in -1e3f64..1e3, y in -1e3f64..1e3) {
        let s = line(t);
        let r = s.rep(&Point::scalar(x), &Point::scalar(y));
        let want = (t as f64 - 1.0) * (x - y).abs();
        prop_assert!((r - want).abs() <= 1e-12 * (1.0 + want));
    }

    #[test]
    fn lifted_l1_tables_pass_the_axiom_gate(
        coords in prop::collection::btree_set((-9i32..10, -9i32..10), 2..8),
        t in 2usize..5,
    ) {
        let pts: Vec<(i32, i32)> = coords.into_iter().collect();
        let table: Vec<Vec<f64>> = pts
            .iter()
            .map(|a| pts.iter().map(|b| f64::from((a.0 - b.0).abs() + (a.1 - b.1).abs())).collect())
            .collect();
        prop_assert!(make_lifted_space(arity(t), table).is_ok());
    }

    #[test]
    fn affine_contractions_decay_inside_their_envelopes(
        t in 2usize..6,
        alpha in -0.95f64..0.95,
        beta in -5.0f64..5.0,
        x0 in -100.0f64..100.0,
    ) {
        let s = line(t);
        let f = make_map(MapSpec::Affine { alpha, beta }, &s).unwrap();
        let cert = classify(&s, &f, &pairs(&s, 17, 200)).unwrap();
        prop_assert!(cert.valid);
        let delta = cert.delta_with_margin(1e-9).unwrap();
        let rule = StopRule::new(1e-10, 10_000).unwrap();
        let trace = picard_run(&s, &f, &Point::scalar(x0), delta, &rule).unwrap();
        prop_assert_eq!(trace.status, Status::Converged);
        let tol = Tolerance::new(1e-9);
        prop_assert!(verify_decay(&trace, tol).unwrap().passed);
        prop_assert!(verify_cauchy(&trace, &s, tol).unwrap().passed);
        let p = trace.limit.unwrap().coords()[0];
        let fixed = beta / (1.0 - alpha);
        prop_assert!((p - fixed).abs() <= 1e-8 * (1.0 + fixed.abs()));
    }
}
