use std::f64::consts::PI;

use fmg_eig::eigsolver::{
    aligned_energy_error, augmented_ritz, coarse_eigensolve, direct_level_solve, full_multigrid_trace,
    one_correction_step, prolongate_approx, EigenApprox, SolverConfig,
};
use fmg_eig::fem::ConstantCoefficients;
use fmg_eig::linalg::{generalized_eig_dense, orthonormality_defect};
use fmg_eig::mesh::{build_hierarchy, unit_square_mesh};
use fmg_eig::multigrid::{build_mg_context, MgContext};
use fmg_eig::Error;

fn model_ctx(nx: usize, levels: usize) -> MgContext {
    let h = build_hierarchy(unit_square_mesh(nx).unwrap(), levels).unwrap();
    build_mg_context(&h, &ConstantCoefficients::laplace(), 2).unwrap()
}

fn dense_pairs(ctx: &MgContext, level: usize, q: usize) -> EigenApprox {
    let pairs = generalized_eig_dense(&ctx.stiffness(level).to_dense(), &ctx.mass(level).to_dense(), q).unwrap();
    EigenApprox {
        level,
        eigenvalues: pairs.iter().map(|p| p.value).collect(),
        vectors: pairs.into_iter().map(|p| p.vector).collect(),
    }
}

#[test]
fn exact_eigenpair_is_a_fixed_point() {
    let ctx = model_ctx(4, 2);
    let exact = dense_pairs(&ctx, 1, 1);
    let next = one_correction_step(&ctx, &exact, &SolverConfig::default()).unwrap();
    assert!((next.eigenvalues[0] - exact.eigenvalues[0]).abs() <= 1e-12 * exact.eigenvalues[0]);
    let err = aligned_energy_error(ctx.stiffness(1), ctx.mass(1), &next.vectors[0], &exact.vectors[0]).unwrap();
    assert!(err <= 1e-8, "{err}");
}

#[test]
fn duplicated_augmentation_is_dropped() {
    let ctx = model_ctx(4, 2);
    let start = prolongate_approx(&ctx, &coarse_eigensolve(&ctx, 1).unwrap()).unwrap();
    let u = start.vectors[0].clone();
    let (single, info1) = augmented_ritz(&ctx, 1, 0, std::slice::from_ref(&u), 1, 1e-12).unwrap();
    let (double, info2) = augmented_ritz(&ctx, 1, 0, &[u.clone(), u], 1, 1e-12).unwrap();
    assert!(info1.dropped.len() <= 1);
    assert!(!info2.dropped.is_empty());
    assert!((single.eigenvalues[0] - double.eigenvalues[0]).abs() <= 1e-12 * single.eigenvalues[0]);
}

#[test]
fn repeated_corrections_contract_monotonically() {
    let ctx = model_ctx(4, 4);
    let level = 3;
    let exact = direct_level_solve(&ctx, level, 1, 1e-12).unwrap();
    let config = SolverConfig { m: 1, nu: 1, ..SolverConfig::default() };
    let mut approx = coarse_eigensolve(&ctx, 1).unwrap();
    for _ in 0..level {
        approx = prolongate_approx(&ctx, &approx).unwrap();
    }
    let (a, b) = (ctx.stiffness(level), ctx.mass(level));
    let mut err = aligned_energy_error(a, b, &approx.vectors[0], &exact.vectors[0]).unwrap();
    let mut lambda = approx.eigenvalues[0];
    for step in 0..4 {
        approx = one_correction_step(&ctx, &approx, &config).unwrap();
        let next = aligned_energy_error(a, b, &approx.vectors[0], &exact.vectors[0]).unwrap();
        assert!(next < 0.5 * err, "step {step}: {next} vs {err}");
        assert!(approx.eigenvalues[0] >= exact.eigenvalues[0] * (1.0 - 1e-12));
        if step > 0 {
            assert!(approx.eigenvalues[0] <= lambda * (1.0 + 1e-12));
        }
        err = next;
        lambda = approx.eigenvalues[0];
    }
}

#[test]
fn fmg_eigenvalues_bound_exact_and_decrease() {
    let ctx = model_ctx(4, 5);
    let trace = full_multigrid_trace(&ctx, &SolverConfig::default()).unwrap();
    let lam1 = 2.0 * PI * PI;
    for w in trace.windows(2) {
        assert!(w[1].approx.eigenvalues[0] <= w[0].approx.eigenvalues[0]);
    }
    for r in &trace {
        assert!(r.approx.eigenvalues[0] >= lam1);
        let d = orthonormality_defect(ctx.mass(r.approx.level), &r.approx.vectors).unwrap();
        assert!(d <= 1e-10);
    }
}

#[test]
fn operations_keep_mass_orthonormality() {
    let ctx = model_ctx(3, 4);
    let config = SolverConfig { q: 4, ..SolverConfig::default() };
    let mut approx = coarse_eigensolve(&ctx, 4).unwrap();
    let defect = |a: &EigenApprox| orthonormality_defect(ctx.mass(a.level), &a.vectors).unwrap();
    assert!(defect(&approx) <= 1e-10);
    for _ in 1..4 {
        approx = prolongate_approx(&ctx, &approx).unwrap();
        assert!(defect(&approx) <= 1e-10);
        approx = one_correction_step(&ctx, &approx, &config).unwrap();
        assert!(defect(&approx) <= 1e-10);
    }
}

#[test]
fn direct_solver_matches_dense() {
    let ctx = model_ctx(4, 3);
    let direct = direct_level_solve(&ctx, 2, 6, 1e-11).unwrap();
    let dense = dense_pairs(&ctx, 2, 6);
    for (d, e) in direct.eigenvalues.iter().zip(&dense.eigenvalues) {
        assert!((d - e).abs() <= 1e-9 * e, "{d} vs {e}");
    }
}

#[test]
fn six_direct_eigenvalues_approach_exact() {
    let ctx = model_ctx(8, 3);
    let exact: Vec<f64> = [2.0, 5.0, 5.0, 8.0, 10.0, 10.0].iter().map(|c| c * PI * PI).collect();
    let errs: Vec<Vec<f64>> = (1..3)
        .map(|k| {
            let d = direct_level_solve(&ctx, k, 6, 1e-10).unwrap();
            d.eigenvalues.iter().zip(&exact).map(|(l, e)| l - e).collect()
        })
        .collect();
    for j in 0..6 {
        assert!(errs[1][j] > 0.0);
        let ratio = errs[0][j] / errs[1][j];
        assert!((3.0..=5.0).contains(&ratio), "eigenvalue {j}: ratio {ratio}");
    }
}

#[test]
fn degenerate_requests_are_rejected() {
    let ctx = model_ctx(2, 2);
    assert!(matches!(coarse_eigensolve(&ctx, 2), Err(Error::InvalidArgument(_))));
    let approx = coarse_eigensolve(&ctx, 1).unwrap();
    assert!(one_correction_step(&ctx, &approx, &SolverConfig::default()).is_err());
    let bad = SolverConfig { p: 0, ..SolverConfig::default() };
    assert!(full_multigrid_trace(&ctx, &bad).is_err());
    assert!(matches!(direct_level_solve(&ctx, 5, 1, 1e-8), Err(Error::LevelOutOfRange { .. })));
}
