use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wgfem::analysis::identity_residuals;
use wgfem::basis::monomial_exponents;
use wgfem::geometry::{Curve, CurvedPolygonMesh, EdgeTag, ParametricEdge, Vec2};
use wgfem::quadrature::{edge_rule, gauss_legendre};
use wgfem::space::WeakSpace;
use wgfem::weakgrad::{project_cell, project_edge, project_gradient};
use wgfem_meshgen as gen;

fn poly_at(exps: &[(usize, usize)], c: &[f64], s: Vec2) -> f64 {
    exps.iter()
        .zip(c)
        .map(|(&(a, b), c)| c * s.x.powi(a as i32) * s.y.powi(b as i32))
        .sum()
}

fn poly_grad(exps: &[(usize, usize)], c: &[f64], s: Vec2, h: f64) -> Vec2 {
    let mut g = Vec2::zeros();
    for (&(a, b), c) in exps.iter().zip(c) {
        if a > 0 {
            g.x += c * a as f64 * s.x.powi(a as i32 - 1) * s.y.powi(b as i32);
        }
        if b > 0 {
            g.y += c * b as f64 * s.x.powi(a as i32) * s.y.powi(b as i32 - 1);
        }
    }
    g / h
}

/// Local weak function `(p, trace p)` for `p` given as a plain function.
fn local_weak(space: &WeakSpace, e: usize, cell: Vec<f64>, f: impl Fn(&Vec2) -> f64) -> Vec<f64> {
    let mut v = cell;
    for le in &space.mesh.elements[e].edges {
        v.extend(project_edge(
            &space.edges[le.edge],
            &space.mesh.edges[le.edge],
            &f,
        ));
    }
    v
}

fn random_space(seed: u64, k: usize, curved: f64) -> WeakSpace {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = rng.gen_range(0.05..2.0);
    let offset = Vec2::new(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
    WeakSpace::new(gen::random_element(&mut rng, curved, size, offset), k).unwrap()
}

fn sample_points(space: &WeakSpace, e: usize) -> Vec<Vec2> {
    space.fan_rule(e, 2).unwrap().points
}

#[test]
fn weak_gradient_of_constant_vanishes() {
    for k in 1..=3 {
        for mesh in [gen::unit_square(), gen::disc_single(), gen::bricks(2)] {
            let space = WeakSpace::new(mesh, k).unwrap();
            for e in 0..space.mesh.elements.len() {
                let mut cell = vec![0.0; space.cells[e].dim()];
                cell[0] = 3.5;
                let v = local_weak(&space, e, cell, |_| 3.5);
                let g = space.operators[e].apply(&v);
                assert!(g.iter().all(|x| x.abs() < 1e-12), "k={k}: {g:?}");
            }
        }
    }
}

#[test]
fn weak_gradient_square_examples() {
    let space = WeakSpace::new(gen::unit_square(), 1).unwrap();
    let c = space.cells[0].center;
    let h = space.cells[0].scale;
    let x_cell = vec![c.x, h, 0.0];

    let v = local_weak(&space, 0, x_cell.clone(), |p| p.x);
    let g = space.operators[0].apply(&v);
    let field = space.gradients[0].eval_field(&g, &Vec2::new(0.3, 0.7));
    assert!((field - Vec2::new(1.0, 0.0)).norm() < 1e-12, "{field:?}");

    let mut v = x_cell;
    v.resize(space.operators[0].local_dim(), 0.0);
    let g = space.operators[0].apply(&v);
    assert!(g.iter().all(|x| x.abs() < 1e-12), "{g:?}");
}

#[test]
fn operator_shapes() {
    for k in 1..=3 {
        let space = WeakSpace::new(gen::disc(4), k).unwrap();
        for op in &space.operators {
            assert_eq!(op.matrix.nrows(), k * (k + 1));
            assert_eq!(op.matrix.ncols(), op.local_dim());
        }
    }
}

#[test]
fn cell_projection_examples() {
    let space = WeakSpace::new(gen::unit_square(), 1).unwrap();
    let c = space.project_cell(0, &|_| 1.0).unwrap();
    assert!((c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12 && c[2].abs() < 1e-12);

    for k in 2..=3 {
        let space = WeakSpace::new(gen::unit_square(), k).unwrap();
        let cell = space.cells[0].clone();
        let idx = cell.exponents.iter().position(|&e| e == (1, 1)).unwrap();
        let c = space
            .project_cell(0, &|p: &Vec2| {
                let s = cell.scaled(p);
                s.x * s.y
            })
            .unwrap();
        for (i, v) in c.iter().enumerate() {
            let want = if i == idx { 1.0 } else { 0.0 };
            assert!((v - want).abs() < 1e-12, "k={k} i={i} {v}");
        }
    }

    let f = |p: &Vec2| (PI * p.x).sin();
    let c = space.project_cell(0, &f).unwrap();
    let cell = &space.cells[0];
    let rule = space.fan_rule(0, 12).unwrap();
    for i in 0..cell.dim() {
        let r = rule.integrate(|p| (f(p) - cell.eval_combination(&c, p)) * cell.eval(p)[i]);
        assert!(r.abs() < 1e-9, "{i}: {r}");
    }
}

#[test]
fn edge_projection_examples() {
    let mesh = gen::disc(4);
    for k in 1..=3 {
        let space = WeakSpace::new(mesh.clone(), k).unwrap();
        for (i, basis) in space.edges.iter().enumerate() {
            let edge = &space.mesh.edges[i];
            let c = project_edge(basis, edge, |_| 1.0);
            for &t in &[0.0, 0.21, 0.5, 0.93, 1.0] {
                let p = edge.curve.eval(t);
                assert!((basis.eval_combination(&c, &p) - 1.0).abs() < 1e-12);
            }
            if edge.is_straight() {
                let a = edge.curve.eval(0.0);
                let len = basis.length;
                let g = |p: &Vec2| 2.0 - 3.0 * (p - a).norm() / len;
                let c = project_edge(basis, edge, g);
                for &t in &[0.0, 0.37, 1.0] {
                    let p = edge.curve.eval(t);
                    assert!((basis.eval_combination(&c, &p) - g(&p)).abs() < 1e-12);
                }
            }
        }
    }
}

#[test]
fn gradient_projection_reproduces_its_range() {
    let space = WeakSpace::new(gen::unit_square(), 3).unwrap();
    let rule = space.fan_rule(0, 10).unwrap();
    let w = |p: &Vec2| Vec2::new(2.0 * p.x * p.y, p.x * p.x);
    let c = project_gradient(&space.gradients[0], &rule, w).unwrap();
    for p in sample_points(&space, 0) {
        assert!((space.gradients[0].eval_field(&c, &p) - w(&p)).norm() < 1e-11);
    }
}

#[test]
fn straight_edge_trace_dimension_and_arc_rank() {
    let seg = ParametricEdge::new(
        [0, 1],
        Curve::segment(Vec2::zeros(), Vec2::new(1.0, 0.0)),
        EdgeTag::Boundary,
    );
    for k in 1..=4 {
        assert_eq!(
            wgfem::basis::build_edge_basis(&seg, 0, k).unwrap().dim(),
            k + 1
        );
    }
    let arc = ParametricEdge::new(
        [0, 1],
        Curve::arc(Vec2::zeros(), 1.0, 0.0, PI / 2.0).unwrap(),
        EdgeTag::Boundary,
    );
    assert_eq!(wgfem::basis::build_edge_basis(&arc, 0, 1).unwrap().dim(), 3);
}

#[test]
fn arc_and_segment_rules_are_exact_in_the_parameter() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let edges = [
        ParametricEdge::new(
            [0, 1],
            Curve::segment(Vec2::new(-1.0, 2.0), Vec2::new(3.0, 0.5)),
            EdgeTag::Boundary,
        ),
        ParametricEdge::new(
            [0, 1],
            Curve::arc(Vec2::new(1.0, 1.0), 2.5, 0.3, 2.0).unwrap(),
            EdgeTag::Boundary,
        ),
        ParametricEdge::new(
            [0, 1],
            Curve::arc(Vec2::zeros(), 1.0, PI, 0.5).unwrap(),
            EdgeTag::Boundary,
        ),
    ];
    for edge in &edges {
        let speed = edge.speed(0.4);
        for order in 1..=12 {
            let coeffs: Vec<f64> = (0..=order).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = |t: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * t + c);
            let exact: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| c / (i + 1) as f64)
                .sum::<f64>()
                * speed;
            let q = edge_rule(edge, order);
            let approx: f64 = q.t.iter().zip(&q.weights).map(|(&t, w)| w * p(t)).sum();
            let scale = coeffs.iter().map(|c| c.abs()).sum::<f64>() * speed;
            assert!(
                (approx - exact).abs() <= 1e-12 * scale,
                "order {order}: {approx} vs {exact}"
            );
            assert!(q.weights.iter().all(|&w| w >= 0.0));
        }
    }
}

#[test]
fn gauss_rule_has_the_requested_size() {
    for n in 1..10 {
        let (x, w) = gauss_legendre(n);
        assert_eq!(x.len(), n);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }
}

fn check_polynomial_exactness(space: &WeakSpace, coeffs: &[f64]) {
    let k = space.k;
    let exps = monomial_exponents(k);
    let cell = &space.cells[0];
    let h = cell.scale;
    let f = |p: &Vec2| poly_at(&exps, coeffs, cell.scaled(p));
    let v = local_weak(space, 0, coeffs.to_vec(), f);
    let g = space.operators[0].apply(&v);
    let scale = coeffs.iter().map(|c| c.abs()).sum::<f64>() / h;
    for p in sample_points(space, 0) {
        let want = poly_grad(&exps, coeffs, cell.scaled(&p), h);
        let got = space.gradients[0].eval_field(&g, &p);
        assert!(
            (got - want).norm() <= 1e-10 * scale,
            "k={k}: {got:?} vs {want:?}"
        );
    }
}

fn moment_fan_gap(space: &WeakSpace) -> f64 {
    let k = space.k;
    let cell = &space.cells[0];
    let rule = space.fan_rule(0, 2 * k + 2).unwrap();
    let mut worst: f64 = 0.0;
    for d in 0..=2 * k + 2 {
        for b in 0..=d {
            let a = d - b;
            let fan = rule.integrate(|p| {
                let s = cell.scaled(p);
                s.x.powi(a as i32) * s.y.powi(b as i32)
            });
            let m = cell.moment(a, b);
            worst = worst.max((fan - m).abs() / m.abs().max(1.0));
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn weak_gradient_is_exact_on_polynomials(seed in any::<u64>(), k in 1usize..=3) {
        let space = random_space(seed, k, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let coeffs: Vec<f64> = (0..space.cells[0].dim()).map(|_| rng.gen_range(-1.0..1.0)).collect();
        check_polynomial_exactness(&space, &coeffs);
    }

    #[test]
    fn projection_identity_holds(seed in any::<u64>(), k in 1usize..=3, straight in any::<bool>()) {
        let space = random_space(seed, k, if straight { 0.0 } else { 0.7 });
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
        let xi: Vec<f64> = monomial_exponents(k + 1).iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let r = identity_residuals(&space, 0, &xi).unwrap();
        prop_assert!(r.identity <= 1e-9, "identity residual {}", r.identity);
        if straight {
            let remark = r.straight_edges.expect("all edges straight");
            prop_assert!(remark <= 1e-10, "edge term {}", remark);
        }
    }

    #[test]
    fn lower_degree_traces_are_reproduced_on_straight_edges(seed in any::<u64>(), k in 1usize..=4) {
        let space = random_space(seed, k, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(3));
        let exps = monomial_exponents(k - 1);
        let coeffs: Vec<f64> = exps.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cell = &space.cells[0];
        let f = |p: &Vec2| poly_at(&exps, &coeffs, cell.scaled(p));
        for (i, basis) in space.edges.iter().enumerate() {
            let edge = &space.mesh.edges[i];
            let c = project_edge(basis, edge, f);
            for j in 0..=6 {
                let p = edge.curve.eval(j as f64 / 6.0);
                prop_assert!((basis.eval_combination(&c, &p) - f(&p)).abs() <= 1e-11 * coeffs.iter().map(|c| c.abs()).sum::<f64>());
            }
        }
    }

    #[test]
    fn projections_are_idempotent(seed in any::<u64>(), k in 1usize..=3) {
        let space = random_space(seed, k, 0.5);
        let cell = space.cells[0].clone();
        let f = |p: &Vec2| (p.x * 1.7).sin() + (p.y * 0.9).cos() * p.x;
        let c1 = space.project_cell(0, &f).unwrap();
        let c2 = space.project_cell(0, &|p: &Vec2| cell.eval_combination(&c1, p)).unwrap();
        let scale = c1.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in c1.iter().zip(&c2) {
            prop_assert!((a - b).abs() <= 1e-11 * scale);
        }

        for (i, basis) in space.edges.iter().enumerate() {
            let edge = &space.mesh.edges[i];
            let c1 = project_edge(basis, edge, f);
            let c2 = project_edge(basis, edge, |p| basis.eval_combination(&c1, p));
            let scale = c1.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
            for (a, b) in c1.iter().zip(&c2) {
                prop_assert!((a - b).abs() <= 1e-11 * scale);
            }
        }

        let grad = &space.gradients[0];
        let rule = space.fan_rule(0, 2 * k + 4).unwrap();
        let w = |p: &Vec2| Vec2::new(p.y.sin(), p.x * p.y);
        let g1 = project_gradient(grad, &rule, w).unwrap();
        let g2 = project_gradient(grad, &rule, |p| grad.eval_field(&g1, p)).unwrap();
        let scale = g1.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
        for (a, b) in g1.iter().zip(&g2) {
            prop_assert!((a - b).abs() <= 1e-11 * scale);
        }
    }

    #[test]
    fn fan_rule_matches_exact_moments(seed in any::<u64>(), k in 1usize..=3) {
        let space = random_space(seed, k, 0.5);
        let gap = moment_fan_gap(&space);
        prop_assert!(gap <= 1e-9, "gap {}", gap);
    }

    #[test]
    fn edge_bases_are_orthonormal(seed in any::<u64>(), k in 1usize..=3) {
        let space = random_space(seed, k, 0.7);
        for (i, basis) in space.edges.iter().enumerate() {
            let q = edge_rule(&space.mesh.edges[i], 4 * k + 12);
            let n = basis.dim();
            prop_assert!(n <= (k + 1) * (k + 2) / 2);
            let mut gram = vec![0.0; n * n];
            for (p, w) in q.points.iter().zip(&q.weights) {
                let v = basis.eval(p);
                for r in 0..n {
                    for s in 0..n {
                        gram[r * n + s] += w * v[r] * v[s];
                    }
                }
            }
            for r in 0..n {
                for s in 0..n {
                    let want = if r == s { 1.0 } else { 0.0 };
                    prop_assert!((gram[r * n + s] - want).abs() <= 1e-10);
                }
            }
        }
    }
}

#[test]
fn fan_rule_matches_moments_on_family_meshes() {
    let meshes: Vec<CurvedPolygonMesh> = vec![
        gen::disc(8),
        gen::interface_ogrid(4, 0.5),
        gen::distorted_quads(4, 0.1),
    ];
    for mesh in meshes {
        for k in 1..=3 {
            let space = WeakSpace::new(mesh.clone(), k).unwrap();
            for e in 0..space.mesh.elements.len() {
                let cell = &space.cells[e];
                let rule = space.fan_rule(e, 2 * k + 2).unwrap();
                for (a, b) in monomial_exponents(2 * k + 2) {
                    let fan = rule.integrate(|p| {
                        let s = cell.scaled(p);
                        s.x.powi(a as i32) * s.y.powi(b as i32)
                    });
                    let m = cell.moment(a, b);
                    assert!(
                        (fan - m).abs() <= 1e-9 * m.abs().max(1.0),
                        "e={e} ({a},{b}): {fan} vs {m}"
                    );
                }
            }
        }
    }
}

#[test]
fn cell_projection_matches_moments_for_polynomials() {
    let space = WeakSpace::new(gen::disc(6), 2).unwrap();
    for e in 0..space.mesh.elements.len() {
        let cell = &space.cells[e];
        let exps = monomial_exponents(3);
        let coeffs: Vec<f64> = (0..exps.len()).map(|i| (i as f64 * 0.7).sin()).collect();
        let exact = wgfem::weakgrad::project_cell_polynomial(cell, &exps, &coeffs).unwrap();
        let rule = space.fan_rule(e, 10).unwrap();
        let fan = project_cell(cell, &rule, |p| poly_at(&exps, &coeffs, cell.scaled(p))).unwrap();
        for (a, b) in exact.iter().zip(&fan) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
}
