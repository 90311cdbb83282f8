use std::f64::consts::PI;

use explosion_core::geometry::{
    build_grid, builtin_flow, flow_from_stream_function, nonlinearity, phi_transform, stream_function, DomainSpec, FlowField, Nonlinearity,
    StreamFunction, FLOW_CATALOG, STREAM_CATALOG,
};
use explosion_core::{CatalogEntry, Error};
use proptest::prelude::*;

fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut acc = f(a) + f(b);
    for k in 1..n {
        acc += if k % 2 == 1 { 4.0 } else { 2.0 } * f(a + k as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn rectangle_node_counts() {
    let g = build_grid(&DomainSpec::Rectangle { lx: 1.0, ly: 1.0 }, 65).unwrap();
    assert_eq!((g.nx() + 1, g.ny() + 1), (65, 65));
    assert_eq!(g.interior_count(), 63 * 63);
}

#[test]
fn disk_area_ratio() {
    let g = build_grid(&DomainSpec::Disk { radius: 1.0 }, 65).unwrap();
    let ratio = g.interior_count() as f64 / (g.nx() * g.ny()) as f64;
    assert!((ratio / (PI / 4.0) - 1.0).abs() < 0.03, "ratio {ratio}");
    assert_eq!(g.origin(), [-1.0, -1.0]);
}

#[test]
fn four_cell_domain() {
    let g = build_grid(&DomainSpec::square(2.0 * PI), 32).unwrap();
    assert_eq!(g.nx(), 31);
    assert!((g.x(g.nx()) - 2.0 * PI).abs() < 1e-12);
    let s = stream_function(&CatalogEntry::new("fig2")).unwrap();
    let f = flow_from_stream_function(&s, &g).unwrap();
    assert!(f.max_divergence() < 1e-6 * f.max_speed());
}

#[test]
fn degenerate_domain_is_rejected() {
    assert!(matches!(
        build_grid(&DomainSpec::Union { rects: vec![] }, 9),
        Err(Error::DegenerateDomain(..))
    ));
    assert!(matches!(build_grid(&DomainSpec::unit_square(), 4), Err(Error::InvalidInput(..))));
}

#[test]
fn sinsin_velocity_oracles() {
    let g = build_grid(&DomainSpec::unit_square(), 65).unwrap();
    let f = builtin_flow(&CatalogEntry::new("sinsin"), &g).unwrap();
    let c = g.nearest_node(0.5, 0.5);
    assert!(f.u()[c].abs() < 1e-14 && f.v()[c].abs() < 1e-14);
    let q = g.nearest_node(0.5, 0.25);
    assert!((f.u()[q] - PI / 2f64.sqrt()).abs() < 1e-12);
    assert!(f.v()[q].abs() < 1e-12);
}

#[test]
fn stream_flows_are_discretely_divergence_free() {
    for (name, dom) in [
        ("sinsin", DomainSpec::unit_square()),
        ("sinsin", DomainSpec::square(2.0)),
        ("fig2", DomainSpec::square(2.0 * PI)),
    ] {
        let g = build_grid(&dom, 97).unwrap();
        let f = builtin_flow(&CatalogEntry::new(name), &g).unwrap();
        assert!(f.is_incompressible());
        for &k in g.interior_nodes() {
            assert!(f.divergence_at(k).abs() <= 1e-6 * f.max_speed(), "{name}");
        }
    }
}

#[test]
fn radial_and_shear_flows() {
    let d = build_grid(&DomainSpec::Disk { radius: 1.0 }, 33).unwrap();
    let r = builtin_flow(&CatalogEntry::new("radial").with("n", 1.0), &d).unwrap();
    let k = d.nearest_node(0.5, 0.0);
    assert_eq!((r.u()[k], r.v()[k]), (2.0, 0.0));
    assert!(!r.is_incompressible());

    let s = build_grid(&DomainSpec::unit_square(), 17).unwrap();
    let z = builtin_flow(&CatalogEntry::new("shear").with("c", 0.0), &s).unwrap();
    assert!(z.u().iter().chain(z.v()).all(|w| *w == 0.0));
    let sh = builtin_flow(&CatalogEntry::new("shear").with("c", 1.0), &s).unwrap();
    assert!(sh.is_incompressible());
    // shear crosses the boundary; recorded, not rejected
    assert!(!sh.is_tangent_at_boundary());
}

#[test]
fn sinsin_on_two_square_has_alternating_cells() {
    let s = stream_function(&CatalogEntry::new("sinsin")).unwrap();
    let signs: Vec<f64> = [(0.5, 0.5), (1.5, 0.5), (0.5, 1.5), (1.5, 1.5)]
        .iter()
        .map(|&(x, y)| s.eval(x, y).signum())
        .collect();
    assert_eq!(signs, vec![1.0, -1.0, -1.0, 1.0]);
}

#[test]
fn unknown_catalog_names() {
    let g = build_grid(&DomainSpec::unit_square(), 17).unwrap();
    match builtin_flow(&CatalogEntry::new("vortex"), &g) {
        Err(Error::UnknownName { name, expected }) => {
            assert_eq!(name, "vortex");
            for n in FLOW_CATALOG {
                assert!(expected.contains(n));
            }
        }
        other => panic!("unexpected {other:?}"),
    }
    assert!(stream_function(&CatalogEntry::new("nope")).is_err());
    assert!(nonlinearity(&CatalogEntry::new("nope")).is_err());
    assert!(builtin_flow(&CatalogEntry::new("shear").with("speed", 1.0), &g).is_err());
}

#[test]
fn incompressible_formula_flow_is_checked() {
    let g = build_grid(&DomainSpec::unit_square(), 17).unwrap();
    assert!(matches!(
        FlowField::from_formula(&g, "stretch", |x, _| [x, 0.0], true),
        Err(Error::Divergence { .. })
    ));
    assert!(FlowField::from_formula(&g, "stretch", |x, _| [x, 0.0], false).is_ok());
}

#[test]
fn nonlinearity_h_against_quadrature() {
    let e = Nonlinearity::exponential();
    let p = Nonlinearity::power(2.0).unwrap();
    for s in [0.0, 0.3, 1.0, 4.0, 12.0] {
        assert!((e.h(s) - simpson(|t| (-t).exp(), 0.0, s, 2000)).abs() < 1e-10);
        assert!((p.h(s) - simpson(|t| 1.0 / (1.0 + t).powi(2), 0.0, s, 2000)).abs() < 1e-9);
        assert!((p.h(s) - s / (1.0 + s)).abs() < 1e-14);
    }
    assert_eq!(e.h_infinity(), 1.0);
    assert!((p.h_infinity() - 1.0).abs() < 1e-15);
    assert_eq!(e.h(0.0), 0.0);
    assert_eq!(p.h(0.0), 0.0);
}

#[test]
fn nonlinearity_validation() {
    assert!(Nonlinearity::power(1.0).is_err());
    assert!(Nonlinearity::custom("neg", |s| s - 1.0, |_| 1.0).is_err());
    assert!(Nonlinearity::custom("concave", |s| (1.0 + s).sqrt(), |s| 0.5 / (1.0 + s).sqrt()).is_err());
    let c = Nonlinearity::custom("cubic", |s| (1.0 + s).powi(3), |s| 3.0 * (1.0 + s).powi(2)).unwrap();
    assert!((c.h_infinity() - 0.5).abs() < 1e-9);
}

#[test]
fn phi_transform_examples() {
    let e = Nonlinearity::exponential();
    assert_eq!(phi_transform(&e, 1.0, 2.0, 0.0).unwrap(), 0.0);
    let far = phi_transform(&e, 1.0, 2.0, 60.0).unwrap();
    assert!((far - 2f64.ln()).abs() < 1e-12);
    assert!(phi_transform(&e, 2.0, 1.0, 1.0).is_err());
    assert!(phi_transform(&e, 1.0, 2.0, -1.0).is_err());
    // K(δ) closed form at δ = 0.5
    assert!((e.uniform_bound(0.5) + 0.4f64.ln()).abs() < 1e-12);
}

#[test]
fn phi_transform_derivative_identity() {
    let r = 0.37;
    for g in [
        Nonlinearity::exponential(),
        Nonlinearity::power(2.0).unwrap(),
        Nonlinearity::power(3.5).unwrap(),
    ] {
        for k in 0..40 {
            let s = 0.05 + 0.25 * k as f64;
            let d = 1e-5;
            let fd = (phi_transform(&g, r, 1.0, s + d).unwrap() - phi_transform(&g, r, 1.0, s - d).unwrap()) / (2.0 * d);
            let phi = phi_transform(&g, r, 1.0, s).unwrap();
            let exact = r * g.g(phi) / g.g(s);
            assert!((fd - exact).abs() < 1e-6, "{} s={s}: {fd} vs {exact}", g.name());
        }
    }
}

#[test]
fn analytic_gradients_match_differences() {
    for name in STREAM_CATALOG {
        let s: StreamFunction = stream_function(&CatalogEntry::new(*name)).unwrap();
        assert!(s.is_analytic());
        for k in 0..25 {
            let x = 0.1 + 0.23 * k as f64 % 1.7;
            let y = 0.05 + 0.31 * k as f64 % 1.9;
            let d = 1e-5;
            let fx = (s.eval(x + d, y) - s.eval(x - d, y)) / (2.0 * d);
            let fy = (s.eval(x, y + d) - s.eval(x, y - d)) / (2.0 * d);
            let g = s.grad(x, y);
            assert!((g[0] - fx).abs() < 1e-8 && (g[1] - fy).abs() < 1e-8, "{name} at ({x}, {y})");
            let lap = (s.eval(x + 1e-3, y) + s.eval(x - 1e-3, y) + s.eval(x, y + 1e-3) + s.eval(x, y - 1e-3) - 4.0 * s.eval(x, y)) / 1e-6;
            assert!((s.laplacian(x, y) - lap).abs() < 1e-4 * (1.0 + lap.abs()), "{name} laplacian");
        }
    }
}

fn catalog() -> Vec<Nonlinearity> {
    vec![
        Nonlinearity::exponential(),
        Nonlinearity::power(2.0).unwrap(),
        Nonlinearity::power(4.0).unwrap(),
    ]
}

proptest! {
    #[test]
    fn g_is_bounded_below_by_g0(s in 0.0f64..50.0) {
        for g in catalog() {
            prop_assert!(g.g(s) >= g.g(0.0) && g.g(0.0) > 0.0);
        }
    }

    #[test]
    fn h_inverse_round_trip(s in 0.0f64..50.0) {
        for g in catalog() {
            let y = g.h(s);
            prop_assert!((g.h(g.h_inv(y)) - y).abs() < 1e-10);
        }
    }

    #[test]
    fn phi_is_monotone_with_bounded_slope(s1 in 0.0f64..30.0, ds in 1e-3f64..10.0, r in 0.05f64..0.95) {
        let s2 = s1 + ds;
        for g in catalog() {
            let a = phi_transform(&g, r, 1.0, s1).unwrap();
            let b = phi_transform(&g, r, 1.0, s2).unwrap();
            prop_assert!(b - a > 0.0);
            prop_assert!(b - a <= r * (s2 - s1) * (1.0 + 1e-9));
            prop_assert!(a <= s1);
            prop_assert!(b <= g.h_inv(r * g.h_infinity()) + 1e-12);
        }
    }
}
