use gwspectra_core::forbidden::build_forbidden;
use gwspectra_core::halfplane::{gamma, hyperbolic_distance, kesten_mckay_transform, semicircle_transform};
use gwspectra_core::offspring::PotentialModel;
use gwspectra_core::rde::{evolve, jackknife_mean, Population, RdeSpec};
use gwspectra_core::tree::{Boundary, FiniteTree};
use gwspectra_core::{Complex64, Exec, HalfPlanePoint, OffspringLaw};
use proptest::prelude::*;

fn point() -> impl Strategy<Value = HalfPlanePoint> {
    (-50.0..50.0f64, -6.0..2.0f64).prop_map(|(re, lim)| HalfPlanePoint::new(re, 10f64.powf(lim)).unwrap())
}

fn law() -> impl Strategy<Value = OffspringLaw> {
    prop_oneof![
        (1u32..6).prop_map(|d| OffspringLaw::dirac(d).unwrap()),
        (0.2..8.0f64).prop_map(|d| OffspringLaw::poisson(d).unwrap()),
        (1u32..20, 0.05..0.95f64).prop_map(|(n, p)| OffspringLaw::binomial(n, p).unwrap()),
        prop::collection::vec(0.0..1.0f64, 2..8)
            .prop_filter("nonzero mass", |w| w[1..].iter().sum::<f64>() > 1e-3)
            .prop_map(|w| OffspringLaw::empirical(w).unwrap()),
    ]
}

fn parents() -> impl Strategy<Value = Vec<Option<usize>>> {
    prop::collection::vec(any::<prop::sample::Index>(), 0..40).prop_map(|ix| {
        // Breadth-first: parents are nondecreasing and precede their children.
        let mut p = vec![None];
        let mut last = 0;
        for (i, x) in ix.iter().enumerate() {
            last += x.index(i + 1 - last);
            p.push(Some(last));
        }
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn gamma_is_a_symmetric_premetric(g in point(), h in point()) {
        prop_assert!(gamma(g, h) >= 0.0);
        prop_assert_eq!(gamma(g, g), 0.0);
        let (a, b) = (gamma(g, h), gamma(h, g));
        prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
    }

    #[test]
    fn hyperbolic_triangle_inequality(a in point(), b in point(), c in point()) {
        let (ab, bc, ac) = (hyperbolic_distance(a, b), hyperbolic_distance(b, c), hyperbolic_distance(a, c));
        prop_assert!(ac <= (ab + bc) * (1.0 + 1e-9) + 1e-9);
    }

    #[test]
    fn neg_inv_shift_does_not_expand(z in point(), g in point(), h in point()) {
        let f = |x: HalfPlanePoint| HalfPlanePoint::neg_inv(z.value() + x.value()).unwrap();
        let before = gamma(g, h);
        prop_assert!(gamma(f(g), f(h)) <= before * (1.0 + 1e-9) + 1e-300);
    }

    #[test]
    fn fixed_points_solve_their_equations(z in point(), rho in 0.1..4.0f64) {
        let g = semicircle_transform(z).value();
        let zc = z.value();
        prop_assert!((g * g + zc * g + 1.0).norm() <= 1e-10 * (1.0 + zc.norm()));
        prop_assert!(g.im > 0.0 && g.norm() <= 1.0 + 1e-12);
        let s = kesten_mckay_transform(z, rho).value();
        prop_assert!(s.im > 0.0);
        prop_assert!((s * (zc + rho * g) + 1.0).norm() <= 1e-10);
    }

    #[test]
    fn laws_are_normalized(l in law(), k in 0u32..3) {
        let total: f64 = l.pmf().iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-9);
        prop_assert!((l.mgf(1.0) - 1.0).abs() <= 1e-9);
        if let Ok(c) = l.conditioned(k) {
            prop_assert!((0..k as usize).all(|j| c.prob(j) == 0.0));
            prop_assert!(c.mean() >= l.mean() - 1e-9);
        }
    }

    #[test]
    fn extinction_probability_is_the_smallest_fixed_point(l in law()) {
        let q = l.extinction_probability();
        prop_assert!((0.0..=1.0).contains(&q));
        prop_assert!((l.mgf(q) - q).abs() <= 1e-9);
        if l.mean() > 1.0 + 1e-6 && l.prob(0) > 0.0 {
            prop_assert!(q < 1.0);
        }
        if l.mean() <= 1.0 && l.prob(1) < 1.0 {
            prop_assert!(q > 1.0 - 1e-4);
        }
    }

    #[test]
    fn recursion_matches_dense_resolvent(p in parents(), z in point(), seed in any::<u64>()) {
        let pot: Vec<f64> = (0..p.len()).map(|i| ((seed.wrapping_add(i as u64) % 97) as f64 / 97.0) - 0.5).collect();
        let t = FiniteTree::from_parents(&p, &pot).unwrap();
        let a = t.root_resolvent(z, 2.0, Boundary::Zero).value();
        let b = t.dense_oracle(z, 2.0, Boundary::Zero).unwrap().value();
        prop_assert!((a - b).norm() <= 1e-8 * a.norm().max(1.0) / z.im().min(1.0));
    }

    #[test]
    fn excluded_set_respects_its_budget(eps in 0.01..0.5f64, d_s in 1.1..20.0f64, k in 1usize..8) {
        let fs = build_forbidden(eps, d_s, k).unwrap();
        prop_assert!(fs.measure() <= eps + 1e-12);
        for w in fs.intervals.windows(2) {
            prop_assert!(w[0][1] <= w[1][0]);
        }
    }

    #[test]
    fn jackknife_of_a_constant_has_no_error(c in -1e3..1e3f64, n in 1usize..500) {
        let e = jackknife_mean(&vec![c; n]);
        prop_assert!((e.mean - c).abs() <= 1e-12 * c.abs().max(1.0));
        prop_assert!(e.se.abs() <= 1e-9 * c.abs().max(1.0));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn sweeps_do_not_depend_on_the_executor(l in law(), seed in any::<u64>(), re in -2.0..2.0f64, m in 1usize..3000) {
        let z = HalfPlanePoint::new(re, 0.05).unwrap();
        let mut spec = RdeSpec::plain(l.clone(), l, PotentialModel::Zero);
        spec.seed = seed;
        let run = |exec| {
            let mut s = spec.clone();
            s.exec = exec;
            evolve(Population::new(z, m).unwrap(), &s, 3).unwrap().samples
        };
        let (a, b) = (run(Exec::Sequential), run(Exec::Parallel));
        prop_assert!(a == b);
        prop_assert!(a.iter().all(|g| g.im() > 0.0 && g.value().is_finite()));
    }
}

#[test]
fn half_plane_points_reject_the_closed_lower_half() {
    assert!(HalfPlanePoint::new(0.0, 0.0).is_err());
    assert!(HalfPlanePoint::from_complex(Complex64::new(1.0, -1e-3)).is_err());
}
