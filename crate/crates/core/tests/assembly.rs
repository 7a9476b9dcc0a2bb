use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wgfem::assembly::{
    apply_dirichlet, assemble_load, assemble_stabilization, assemble_stiffness, assemble_system,
    build_dof_map, discretize, local_stabilization, local_stiffness, ProblemSpec,
};
use wgfem::geometry::{CurvedPolygonMesh, EdgeTag, Vec2};
use wgfem::solver::{solve_system, SolveOptions};
use wgfem::space::WeakSpace;
use wgfem::weakgrad::project_edge;
use wgfem::WgError;
use wgfem_meshgen::{self as gen, MeshBuilder};

fn zero() -> wgfem::assembly::ScalarField {
    Arc::new(|_: &Vec2| 0.0)
}

fn constant(c: f64) -> wgfem::assembly::ScalarField {
    Arc::new(move |_: &Vec2| c)
}

fn square(side: f64) -> CurvedPolygonMesh {
    let mut b = MeshBuilder::new();
    let v = [
        b.vertex(Vec2::new(0.0, 0.0)),
        b.vertex(Vec2::new(side, 0.0)),
        b.vertex(Vec2::new(side, side)),
        b.vertex(Vec2::new(0.0, side)),
    ];
    b.element(v.to_vec(), 0);
    b.build()
}

fn quad(m: &nalgebra::DMatrix<f64>, v: &[f64]) -> f64 {
    let v = nalgebra::DVector::from_column_slice(v);
    (v.transpose() * m * &v)[(0, 0)]
}

/// `(p, trace p)` restricted to one element.
fn local_trace(space: &WeakSpace, e: usize, cell: Vec<f64>, f: impl Fn(&Vec2) -> f64) -> Vec<f64> {
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

#[test]
fn dof_counts() {
    let space = WeakSpace::new(gen::unit_square(), 1).unwrap();
    assert_eq!(space.dofs.total(), 11);
    assert_eq!(space.dofs.num_free(), 3);
    assert_eq!(space.dofs.constrained.iter().filter(|&&c| c).count(), 8);

    let space = WeakSpace::new(gen::two_squares(), 1).unwrap();
    assert_eq!(space.dofs.total(), 20);
    assert_eq!(space.dofs.num_free(), 8);

    let space = WeakSpace::new(CurvedPolygonMesh::default(), 1).unwrap();
    assert_eq!(space.num_dofs(), 0);
    assert_eq!(
        build_dof_map(&CurvedPolygonMesh::default(), &[], &[]).total(),
        0
    );
}

#[test]
fn dof_map_partitions_and_constraints() {
    for mesh in [gen::disc(8), gen::interface_ogrid(4, 0.5), gen::bricks(3)] {
        for k in 1..=3 {
            let space = WeakSpace::new(mesh.clone(), k).unwrap();
            let d = &space.dofs;
            let mut seen = vec![0; d.total()];
            for e in 0..mesh.num_elements() {
                for i in d.cell_range(e) {
                    seen[i] += 1;
                    assert!(!d.constrained[i]);
                }
            }
            for (i, edge) in mesh.edges.iter().enumerate() {
                for j in d.edge_range(i) {
                    seen[j] += 1;
                    assert_eq!(d.constrained[j], edge.tag == EdgeTag::Boundary);
                }
            }
            assert!(seen.iter().all(|&s| s == 1));
            for (pos, &dof) in d.free_dofs.iter().enumerate() {
                assert_eq!(d.free_index[dof], Some(pos));
            }
        }
    }
}

#[test]
fn stiffness_kills_constants() {
    for k in 1..=3 {
        for mesh in [gen::distorted_quads(4, 0.1), gen::disc(8)] {
            let space = WeakSpace::new(mesh, k).unwrap();
            let a = assemble_stiffness(&space, &ProblemSpec::poisson(zero()))
                .unwrap()
                .to_csr();
            let one = space.interpolate(&|_| 1.0).unwrap();
            assert!(a.quadratic_form(&one).abs() < 1e-12);
        }
    }
}

#[test]
fn stiffness_of_linear_function_on_square() {
    let space = WeakSpace::new(gen::unit_square(), 1).unwrap();
    let c = space.cells[0].center;
    let h = space.cells[0].scale;
    let v = local_trace(&space, 0, vec![c.x, h, 0.0], |p| p.x);
    assert!((quad(&local_stiffness(&space, 0, 1.0), &v) - 1.0).abs() < 1e-12);
    assert!(quad(&local_stabilization(&space, 0), &v).abs() < 1e-12);
}

#[test]
fn equal_coefficients_reproduce_poisson() {
    let space = WeakSpace::new(gen::interface_ogrid(4, 0.5), 2).unwrap();
    let a = assemble_stiffness(&space, &ProblemSpec::poisson(zero()))
        .unwrap()
        .to_csr();
    let b = assemble_stiffness(&space, &ProblemSpec::interface(1.0, 1.0, zero(), zero()))
        .unwrap()
        .to_csr();
    assert_eq!(a.nnz(), b.nnz());
    for i in 0..a.nrows {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            assert!((v - b.get(i, j)).abs() <= 1e-14);
        }
    }
}

#[test]
fn stabilization_single_edge() {
    for k in 1..=3 {
        for side in [1.0, 0.5, 0.125] {
            let space = WeakSpace::new(square(side), k).unwrap();
            let s = local_stabilization(&space, 0);
            let mut v = vec![0.0; space.operators[0].local_dim()];
            let first = &space.mesh.elements[0].edges[0];
            let c = project_edge(
                &space.edges[first.edge],
                &space.mesh.edges[first.edge],
                |_| 1.0,
            );
            let start = space.cells[0].dim();
            v[start..start + c.len()].copy_from_slice(&c);
            let value = quad(&s, &v);
            assert!(
                (value - 0.5f64.sqrt()).abs() < 1e-12,
                "k={k} side={side}: {value}"
            );
        }
    }
}

#[test]
fn stabilization_vanishes_on_polynomials() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for k in 1..=3 {
        for (mesh, tol) in [
            (gen::distorted_quads(4, 0.1), 1e-11),
            (gen::disc(8), 1e-10),
            (gen::disc_single(), 1e-10),
        ] {
            let space = WeakSpace::new(mesh, k).unwrap();
            let s = assemble_stabilization(&space).to_csr();
            let coeffs: Vec<f64> = (0..=k).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let p = move |q: &Vec2| {
                coeffs
                    .iter()
                    .enumerate()
                    .map(|(i, c)| c * q.x.powi(i as i32) + c * q.y)
                    .sum::<f64>()
            };
            let v = space.interpolate(&p).unwrap();
            assert!(s.quadratic_form(&v).abs() < tol, "k={k}");
        }
    }
}

#[test]
fn load_examples() {
    let space = WeakSpace::new(gen::unit_square(), 2).unwrap();
    let zero_load = assemble_load(&space, &ProblemSpec::poisson(zero())).unwrap();
    assert!(zero_load.iter().all(|&x| x == 0.0));
    let load = assemble_load(&space, &ProblemSpec::poisson(constant(1.0))).unwrap();
    assert!((load[0] - 1.0).abs() < 1e-12);

    let space = WeakSpace::new(gen::interface_ogrid(4, 0.5), 1).unwrap();
    let load = assemble_load(&space, &ProblemSpec::interface(1.0, 2.0, zero(), zero())).unwrap();
    assert!(load.iter().all(|&x| x == 0.0));
    let load = assemble_load(
        &space,
        &ProblemSpec::interface(1.0, 2.0, zero(), constant(1.0)),
    )
    .unwrap();
    let mut seen = 0;
    for (i, edge) in space.mesh.edges.iter().enumerate() {
        let r = space.dofs.edge_range(i);
        if edge.tag == EdgeTag::Interface {
            let len = space.edges[i].length;
            assert!((load[r.start] - len.sqrt()).abs() < 1e-12);
            for d in r.skip(1) {
                assert!(load[d].abs() < 1e-12);
            }
            seen += 1;
        } else {
            assert!(r.into_iter().all(|d| load[d] == 0.0));
        }
    }
    assert_eq!(seen, 16);
}

#[test]
fn problem_validation() {
    let square = gen::unit_square();
    let two = gen::interface_ogrid(4, 0.5);
    let mut jumpy = ProblemSpec::poisson(zero());
    jumpy.flux_jump = Some(zero());
    assert!(matches!(jumpy.validate(&square), Err(WgError::Spec(_))));
    assert!(ProblemSpec::interface(0.0, 1.0, zero(), zero())
        .validate(&two)
        .is_err());
    assert!(ProblemSpec::interface(1.0, -2.0, zero(), zero())
        .validate(&two)
        .is_err());
    assert!(ProblemSpec::interface(1.0, 2.0, zero(), zero())
        .validate(&square)
        .is_err());
    assert!(ProblemSpec::interface(1.0, 2.0, zero(), zero())
        .validate(&two)
        .is_ok());
    let mut three = two.clone();
    three.elements[0].region = 3;
    assert!(ProblemSpec::interface(1.0, 2.0, zero(), zero())
        .validate(&three)
        .is_err());

    let space = WeakSpace::new(square, 1).unwrap();
    assert!(assemble_load(&space, &jumpy).is_err());
    assert!(assemble_stiffness(&space, &ProblemSpec::interface(1.0, 2.0, zero(), zero())).is_err());
}

#[test]
fn dirichlet_elimination() {
    let space = WeakSpace::new(gen::unit_square(), 1).unwrap();
    let spec = ProblemSpec::poisson(constant(1.0));
    let (matrix, load) = assemble_system(&space, &spec).unwrap();
    let system = apply_dirichlet(&space, &matrix, &load, &spec);
    assert_eq!(system.matrix.nrows, 3);
    assert_eq!(system.rhs.len(), 3);
    for (pos, &d) in system.free_dofs.iter().enumerate() {
        assert_eq!(system.rhs[pos], load[d]);
    }
}

#[test]
fn constant_boundary_data_gives_constant_solution() {
    for (mesh, k) in [
        (gen::distorted_quads(4, 0.1), 1),
        (gen::disc(8), 2),
        (gen::bricks(3), 3),
    ] {
        let space = WeakSpace::new(mesh, k).unwrap();
        let spec = ProblemSpec::poisson(zero()).with_dirichlet(constant(2.5));
        let system = discretize(&space, &spec).unwrap();
        let (u, report) = solve_system(&system, SolveOptions::default()).unwrap();
        assert!(report.converged);
        for e in 0..space.mesh.num_elements() {
            let r = space.dofs.cell_range(e);
            assert!((u[r.start] - 2.5).abs() < 1e-9);
            for d in r.skip(1) {
                assert!(u[d].abs() < 1e-9);
            }
        }
    }
}

#[test]
fn matrices_are_symmetric_and_coercive() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let cases = [
        (gen::distorted_quads(4, 0.1), ProblemSpec::poisson(zero())),
        (gen::disc(8), ProblemSpec::poisson(zero())),
        (
            gen::interface_ogrid(4, 0.5),
            ProblemSpec::interface(1.0, 1000.0, zero(), zero()),
        ),
    ];
    for (mesh, spec) in cases {
        for k in 1..=3 {
            let space = WeakSpace::new(mesh.clone(), k).unwrap();
            let (full, _) = assemble_system(&space, &spec).unwrap();
            assert!(full.relative_asymmetry() <= 1e-12);
            let system = discretize(&space, &spec).unwrap();
            assert!(system.matrix.relative_asymmetry() <= 1e-12);
            for _ in 0..100 {
                let v: Vec<f64> = (0..system.matrix.nrows)
                    .map(|_| rng.gen_range(-1.0..1.0))
                    .collect();
                assert!(system.matrix.quadratic_form(&v) > 0.0);
            }
        }
    }
}

#[test]
fn assembly_is_bit_for_bit_repeatable() {
    let f: wgfem::assembly::ScalarField = Arc::new(|p: &Vec2| (3.0 * p.x).sin() * p.y);
    let spec = ProblemSpec::interface(2.0, 7.0, f, constant(0.3))
        .with_dirichlet(Arc::new(|p: &Vec2| p.x * p.y));
    let space = WeakSpace::new(gen::interface_ogrid(8, 0.5), 2).unwrap();
    let a = discretize(&space, &spec).unwrap();
    for _ in 0..3 {
        let b = discretize(&space, &spec).unwrap();
        assert_eq!(a.matrix, b.matrix);
        assert_eq!(a.rhs, b.rhs);
        assert_eq!(a.constrained_values, b.constrained_values);
    }
}
