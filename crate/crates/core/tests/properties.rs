use iopeg_core::assembly::{assemble_matrix, assemble_rhs, jump_avg, ModelProblem, PenaltyParams};
use iopeg_core::mesh::{FacetClass, TriMesh};
use iopeg_core::postprocess::phi_construct;
use iopeg_core::solver::{
    build_block_preconditioner, minres, MinresOptions, PrecondMode, Preconditioner,
};
use iopeg_core::spaces::{EGFunction, EGSpace, FiniteElementSpace};
use iopeg_core::sparse::{dot, SparseSymMatrix, TripletBuilder};
use iopeg_core::study::{read_csv, write_csv, StudyRow};
use proptest::prelude::*;

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() {
            (sum - t) + v
        } else {
            (v - t) + sum
        };
        sum = t;
    }
    sum + comp
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn mesh_counts_and_geometry(n in 1usize..=128) {
        let m = TriMesh::structured(n).unwrap();
        prop_assert_eq!(m.num_vertices(), (n + 1) * (n + 1));
        prop_assert_eq!(m.num_cells(), 2 * n * n);
        prop_assert_eq!(m.num_facets(), 3 * n * n + 2 * n);
        prop_assert_eq!(m.num_boundary_facets(), 4 * n);
        let area = neumaier_sum((0..m.num_cells()).map(|c| m.cell_area(c)));
        prop_assert!((area - 1.0).abs() < 1e-13);
        prop_assert!((m.h_max() - 2f64.sqrt() / n as f64).abs() < 1e-15);
    }

    #[test]
    fn facet_normals_opposite_across_interior(n in 1usize..=24) {
        let m = TriMesh::structured(n).unwrap();
        for (f, rec) in m.facets().iter().enumerate() {
            prop_assert!((rec.normal[0].hypot(rec.normal[1]) - 1.0).abs() < 1e-14);
            prop_assert_eq!(rec.class == FacetClass::Interior, rec.cell_minus.is_some());
            let np = m.outward_normal(rec.cell_plus, f);
            prop_assert!((np[0] - rec.normal[0]).abs() < 1e-13 && (np[1] - rec.normal[1]).abs() < 1e-13);
            if let Some(cm) = rec.cell_minus {
                prop_assert!(rec.cell_plus < cm);
                let nm = m.outward_normal(cm, f);
                prop_assert!((np[0] + nm[0]).abs() < 1e-13 && (np[1] + nm[1]).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn jump_avg_definitions(qp in -10.0f64..10.0, qm in -10.0f64..10.0, theta in 0.0f64..6.3) {
        let n = [theta.cos(), theta.sin()];
        let (j, a) = jump_avg(qp, Some(qm), n);
        prop_assert!((j[0] - (qp - qm) * n[0]).abs() < 1e-12 && (j[1] - (qp - qm) * n[1]).abs() < 1e-12);
        prop_assert!((a - 0.5 * (qp + qm)).abs() < 1e-12);
        let (jb, ab) = jump_avg(qp, None, n);
        prop_assert_eq!(jb, [qp * n[0], qp * n[1]]);
        prop_assert_eq!(ab, qp);
    }

    #[test]
    fn assembled_matrix_symmetric_with_kernel(
        n in 1usize..6,
        k in 1usize..=2,
        alpha in 0.0f64..2.5,
        kappa0 in 0.1f64..20.0,
        gi in 1.0f64..300.0,
        gb in 1.0f64..50.0,
    ) {
        let mesh = TriMesh::structured(n).unwrap();
        let space = EGSpace::new(&mesh, k).unwrap();
        let p = ModelProblem::new(kappa0, |x| x[0] - x[1]).unwrap();
        let a = assemble_matrix(&mesh, &space, &p, &PenaltyParams::split(gi, gb, alpha).unwrap()).unwrap();
        prop_assert!(a.asymmetry() <= 1e-12 * a.max_abs());
        let kv = space.kernel_vector();
        let ak = a.matvec(&kv);
        prop_assert!(ak.iter().all(|v| v.abs() <= 1e-12 * a.max_abs()));
        // With u_D = 0 the load tested against the kernel is (f, 1) - (f, 1).
        let b = assemble_rhs(&mesh, &space, &p, &PenaltyParams::split(gi, gb, alpha).unwrap()).unwrap();
        prop_assert!(dot(&b, &kv).abs() <= 1e-13);
    }

    #[test]
    fn representation_shift_is_invisible(c in -5.0f64..5.0, k in 1usize..=2, seed in 0u64..1000) {
        let mesh = TriMesh::structured(3).unwrap();
        let space = EGSpace::new(&mesh, k).unwrap();
        let base: Vec<f64> = (0..space.total_ndofs()).map(|i| (((i as u64 * 2654435761 + seed) % 1000) as f64) / 500.0 - 1.0).collect();
        let shifted: Vec<f64> = base.iter().zip(space.kernel_vector()).map(|(v, kv)| v + c * kv).collect();
        let (u, v) = (EGFunction::new(&space, base).unwrap(), EGFunction::new(&space, shifted).unwrap());
        for cell in 0..mesh.num_cells() {
            for xh in [[0.1, 0.2], [1.0 / 3.0, 1.0 / 3.0], [0.0, 1.0]] {
                prop_assert!((u.value(&space, cell, xh) - v.value(&space, cell, xh)).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn interpolation_identity_at_nodes(k in 1usize..=2, n in 1usize..6, a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let mesh = TriMesh::structured(n).unwrap();
        let space = EGSpace::new(&mesh, k).unwrap();
        let f = move |x: [f64; 2]| (a * x[0]).sin() + b * x[1] * x[1];
        let coeffs = space.cont.interpolate(&mesh, &f);
        for (d, x) in space.cont.nodes().iter().enumerate() {
            prop_assert!((coeffs[d] - f(*x)).abs() < 1e-15);
        }
    }

    #[test]
    fn preconditioner_is_symmetric_linear(seed in 0u64..500, n in 2usize..8, mode_ix in 0usize..3) {
        let mode = [PrecondMode::ExactBlock, PrecondMode::JacobiBlock, PrecondMode::None][mode_ix];
        let mesh = TriMesh::structured(n).unwrap();
        let space = EGSpace::new(&mesh, 1).unwrap();
        let p = ModelProblem::new(2.0, |_| 0.0).unwrap();
        let a = assemble_matrix(&mesh, &space, &p, &PenaltyParams::default()).unwrap();
        let nc = space.n_cont();
        let pc = build_block_preconditioner(&a.principal_block(0..nc), &a.principal_block(nc..a.dim()), mode).unwrap();
        let dim = pc.dim();
        let x: Vec<f64> = (0..dim).map(|i| (((i as u64 + 1) * (seed + 7) * 7919) % 997) as f64 / 498.5 - 1.0).collect();
        let y: Vec<f64> = (0..dim).map(|i| (((i as u64 + 3) * (seed + 11) * 104729) % 991) as f64 / 495.5 - 1.0).collect();
        let (mut px, mut py) = (vec![0.0; dim], vec![0.0; dim]);
        pc.apply(&x, &mut px);
        pc.apply(&y, &mut py);
        let (l, r) = (dot(&y, &px), dot(&x, &py));
        prop_assert!((l - r).abs() <= 1e-12 * l.abs().max(r.abs()).max(1.0));
        let xy: Vec<f64> = x.iter().zip(&y).map(|(a, b)| 2.0 * a - 3.0 * b).collect();
        let mut pxy = vec![0.0; dim];
        pc.apply(&xy, &mut pxy);
        for i in 0..dim {
            prop_assert!((pxy[i] - (2.0 * px[i] - 3.0 * py[i])).abs() <= 1e-10 * (1.0 + px[i].abs() + py[i].abs()));
        }
    }

    #[test]
    fn minres_residuals_monotone(diag in prop::collection::vec(-5.0f64..5.0, 3..40), seed in 0u64..100) {
        // Symmetric indefinite tridiagonal system.
        let n = diag.len();
        let mut b = TripletBuilder::new(n);
        for (i, d) in diag.iter().enumerate() {
            b.push(i, i, *d + if *d >= 0.0 { 1.0 } else { -1.0 });
            if i + 1 < n {
                b.push_sym(i, i + 1, 0.3);
            }
        }
        let a: SparseSymMatrix = b.build();
        let rhs: Vec<f64> = (0..n).map(|i| ((i as u64 * 31 + seed) % 17) as f64 - 8.0).collect();
        let pc = iopeg_core::solver::BlockPreconditioner::identity(n);
        let (_, rep) = minres(&a, &rhs, &pc, &MinresOptions::default()).unwrap();
        let h = &rep.residual_history;
        prop_assert!(h.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-14)));
    }

    #[test]
    fn phi_of_constant_vanishes(c in -100.0f64..100.0, n in 1usize..10, cell_frac in 0.0f64..1.0) {
        let mesh = TriMesh::structured(n).unwrap();
        let cell = ((mesh.num_cells() as f64 - 1.0) * cell_frac) as usize;
        let phi = phi_construct(&vec![c; mesh.num_cells()], cell, &mesh).unwrap();
        prop_assert!(phi.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn csv_round_trip(rows in prop::collection::vec(arb_row(), 0..6)) {
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        prop_assert_eq!(read_csv(buf.as_slice()).unwrap(), rows.clone());
        let mut again = Vec::new();
        write_csv(&rows, &mut again).unwrap();
        prop_assert_eq!(buf, again);
    }
}

fn arb_row() -> impl Strategy<Value = StudyRow> {
    (
        (
            0.1f64..100.0,
            1usize..=2,
            1usize..512,
            1e-30f64..1.0,
            prop::option::of(-5.0f64..5.0),
        ),
        (
            1e-300f64..1e3,
            any::<bool>(),
            0usize..10_000,
            0.0f64..3.0,
            1.0f64..500.0,
        ),
    )
        .prop_map(
            |((kappa0, k, n, e, rate), (cons, converged, iterations, alpha, gamma))| StudyRow {
                kappa0,
                k,
                n,
                h_max: 2f64.sqrt() / n as f64,
                l2_error: e,
                l2_rate: rate,
                ah_error: e * 3.0,
                ah_rate: rate.map(|r| r / 2.0),
                flux_error: e.sqrt(),
                flux_rate: None,
                cons_residual: cons,
                iterations,
                converged,
                alpha,
                gamma_int: gamma,
                gamma_bdy: 10.0,
            },
        )
}
