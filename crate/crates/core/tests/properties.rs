use std::f64::consts::PI;

use proptest::prelude::*;

use cusplab::geometry::GeometryCtx;
use cusplab::mesh::{build_graded_mesh, read_mesh, write_mesh};
use cusplab::probe::{annulus_masses_and_fit, holder_seminorm, AnnulusOptions, ProbeField, Region};
use cusplab::profiles::ProfileSpec;
use cusplab::surface::localize;
use cusplab::thresholds::{
    circ_div, holder_exponent, homogeneous_thresholds, main_p_interval, no_gain, sobolev_exponents, XReal,
};

fn xreal() -> impl Strategy<Value = XReal> {
    prop_oneof![
        (0.0..100.0f64).prop_map(XReal::Finite),
        (0.0..100.0f64).prop_map(XReal::Above),
        Just(XReal::ArbitraryLarge),
        Just(XReal::Infinite),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn m_is_squeezed_between_quadratics(theta in 0.05..=1.0f64, t in -0.999..0.999f64) {
        let ctx = GeometryCtx::new(&ProfileSpec::power(theta, 1.0), 2).unwrap();
        let z = t * ctx.top();
        prop_assume!(z.abs() > 1e-9);
        let m = ctx.big_m(z).unwrap();
        let tol = 1e-12 * z * z;
        prop_assert!(theta * z * z <= 2.0 * m + tol);
        prop_assert!(2.0 * m <= z * z + tol);
        prop_assert!(ctx.mu(z) / z >= theta * (1.0 - 1e-12));
        prop_assert_eq!(m, ctx.big_m(-z).unwrap());
    }

    #[test]
    fn m_inverse_is_monotone_and_bracketed(theta in 0.05..=1.0f64, a in 1e-6..0.99f64, b in 1e-6..0.99f64) {
        let ctx = GeometryCtx::new(&ProfileSpec::power(theta, 1.0), 2).unwrap();
        let top = ctx.big_m(0.999 * ctx.top()).unwrap();
        let (lo, hi) = (a.min(b) * top, a.max(b) * top);
        let (zl, zh) = (ctx.m_inv_plus(lo).unwrap(), ctx.m_inv_plus(hi).unwrap());
        prop_assert!(zl <= zh);
        prop_assert!(zl >= (2.0 * lo).sqrt() * (1.0 - 1e-12));
        prop_assert!(zl <= (2.0 * lo / theta).sqrt() * (1.0 + 1e-12));
    }

    #[test]
    fn grad_g_stays_in_band(theta in 0.1..=1.0f64, x in -0.99..0.99f64, y in -0.99..0.99f64) {
        prop_assume!(x.hypot(y) > 1e-3);
        let ctx = GeometryCtx::new(&ProfileSpec::power(theta, 1.0), 2).unwrap();
        let g = ctx.g_field(&[x, y]).unwrap();
        let s2 = std::f64::consts::SQRT_2;
        prop_assert!(g.grad_norm >= theta / s2 * (1.0 - 1e-12));
        prop_assert!(g.grad_norm <= 1.0 / (s2 * theta) * (1.0 + 1e-12));
    }

    #[test]
    fn xreal_order_is_total_and_min_max_agree(a in xreal(), b in xreal()) {
        prop_assert!(a <= b || b <= a);
        prop_assert!(a.min(b) <= a.max(b));
        prop_assert!(a.min(b) == a || a.min(b) == b);
        if let (XReal::Finite(x), XReal::Finite(y)) = (a, b) {
            prop_assert_eq!(a < b, x < y);
        }
        prop_assert!(a <= XReal::Infinite);
    }

    #[test]
    fn circ_div_follows_denominator_sign(x in 1e-3..10.0f64, y in -10.0..10.0f64) {
        let v = circ_div(x, y);
        if y > 0.0 {
            prop_assert_eq!(v, XReal::Finite(x / y));
        } else if y == 0.0 {
            prop_assert_eq!(v, XReal::ArbitraryLarge);
        } else {
            prop_assert_eq!(v, XReal::Infinite);
        }
    }

    #[test]
    fn r2_grows_with_theta_and_alpha(d in 2usize..=3, t1 in 0.05..=1.0f64, t2 in 0.05..=1.0f64,
                                     a1 in 0.05..=1.0f64, a2 in 0.05..=1.0f64, p0 in 2.1..12.0f64) {
        let p0 = XReal::Finite(p0);
        let r2 = |t, a| homogeneous_thresholds(d, t, p0, a).unwrap().r2;
        let (tl, th) = (t1.min(t2), t1.max(t2));
        let (al, ah) = (a1.min(a2), a1.max(a2));
        prop_assert!(r2(tl, al) <= r2(th, al));
        prop_assert!(r2(tl, al) <= r2(tl, ah));
    }

    #[test]
    fn theta_one_gives_equal_thresholds(d in 2usize..=3, a in 0.05..=1.0f64, p0 in 2.1..12.0f64) {
        let h = homogeneous_thresholds(d, 1.0, XReal::Finite(p0), a).unwrap();
        prop_assert_eq!(h.r1, h.r2);
        prop_assert_eq!(h.q1, h.q2);
    }

    #[test]
    fn no_gain_regime_caps_the_cusp_bound(theta in 0.01..=1.0f64, p0 in 2.01..20.0f64, a in 0.01..0.99f64) {
        if no_gain(2, theta, p0, a) {
            prop_assert!((1.0 + theta) / (1.0 - a) <= p0 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn holder_forms_coincide(d in 2usize..=3, a in 0.01..=1.0f64, s in 0.51..50.0f64) {
        let df = d as f64;
        let s0 = df * s;
        prop_assume!((s0 - df).abs() > 1e-9);
        let lam = holder_exponent(a, XReal::Finite(s0), d).unwrap();
        prop_assert!((lam - a.min(2.0 - df / s0)).abs() <= 1e-12);
        let star = sobolev_exponents(XReal::Finite(s0), d).unwrap().p_star;
        let via_star = match star {
            XReal::Finite(v) => a.min(1.0 - df / v),
            _ => a.min(1.0),
        };
        prop_assert!((lam - via_star).abs() <= 1e-12);
    }

    #[test]
    fn p_interval_emptiness(d in 2usize..=4, p0 in 1.01..10.0f64) {
        let iv = main_p_interval(d, XReal::Finite(p0));
        let df = d as f64;
        let lower = (df / (df - 1.0)).max(p0 / (p0 - 1.0));
        prop_assert_eq!(iv.empty, !(p0 > lower));
    }

    #[test]
    fn partition_of_unity_in_three_dimensions(theta in 0.2..=1.0f64, phi in 0.0..(2.0 * PI)) {
        let loc = localize(3, &ProfileSpec::power(theta, 1.0)).unwrap();
        let eta = loc.partition(&[phi.cos(), phi.sin()]).unwrap();
        prop_assert_eq!(eta.len(), loc.m + 1);
        prop_assert!((eta.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
        prop_assert!(eta.iter().all(|&e| (0.0..=1.0 + 1e-15).contains(&e)));
    }

    #[test]
    fn holder_seminorm_is_homogeneous(c in -5.0..5.0f64, lambda in 0.1..=1.0f64) {
        let pts: Vec<[f64; 2]> = (0..200).map(|i| {
            let t = i as f64 / 200.0;
            [t * (7.0 * t).cos(), t * (5.0 * t).sin()]
        }).collect();
        let u: Vec<f64> = pts.iter().map(|p| p[0].hypot(p[1]).sqrt() + p[0]).collect();
        let cu: Vec<f64> = u.iter().map(|v| c * v).collect();
        let a = holder_seminorm(&pts, &u, lambda, 1).unwrap().value;
        let b = holder_seminorm(&pts, &cu, lambda, 1).unwrap().value;
        prop_assert!((b - c.abs() * a).abs() <= 1e-12 * (1.0 + a));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn exponent_estimate_is_independent_of_p(s in 0.1..1.5f64, p in 1.0..4.0f64) {
        let f = move |x: [f64; 2]| x[0].hypot(x[1]).powf(-s);
        let opts = AnnulusOptions::analytic(1.0, 10);
        let prof = annulus_masses_and_fit(&ProbeField::Analytic(&f), p, Region::Both, &opts).unwrap();
        prop_assert!((prof.s - s).abs() <= 0.01 * s);
        prop_assert!(prof.r_squared > 0.999);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn mesh_file_round_trip_and_ring_partition(theta in 0.3..=1.0f64, levels in 2usize..=4) {
        let m = build_graded_mesh(&ProfileSpec::power(theta, 1.0), 0.2, 0.5, levels).unwrap();
        let mut buf = Vec::new();
        write_mesh(&m, &mut buf).unwrap();
        let back = read_mesh(buf.as_slice()).unwrap();
        prop_assert_eq!(&back.nodes, &m.nodes);
        prop_assert_eq!(&back.triangles, &m.triangles);
        prop_assert_eq!(&back.regions, &m.regions);

        let radii: Vec<f64> = (0..6).map(|k| 0.5f64.powi(k)).collect();
        let part = m.annulus_partition(&radii).unwrap();
        let mut seen = vec![0u8; m.triangles.len()];
        for &t in part.outer.iter().chain(part.rings.iter().flatten()).chain(&part.inner) {
            seen[t] += 1;
        }
        prop_assert!(seen.iter().all(|&c| c == 1));
        for (k, ring) in part.rings.iter().enumerate() {
            for &t in ring {
                let c = m.centroid(t);
                let r = c[0].hypot(c[1]);
                prop_assert!(radii[k + 1] <= r && r < radii[k]);
            }
        }
    }
}
