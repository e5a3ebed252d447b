use fmg_eig::fem::{norm_a, ConstantCoefficients};
use fmg_eig::linalg::{cg_solve, cholesky_dense, CsrMatrix};
use fmg_eig::mesh::{build_hierarchy, unit_square_mesh};
use fmg_eig::multigrid::{build_mg_context, mg_solve, v_cycle, MgContext, Smoother};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn model_ctx(nx: usize, levels: usize) -> MgContext {
    let h = build_hierarchy(unit_square_mesh(nx).unwrap(), levels).unwrap();
    build_mg_context(&h, &ConstantCoefficients::laplace(), 2).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn reference_solve(a: &CsrMatrix, f: &[f64]) -> Vec<f64> {
    cg_solve(a, f, &vec![0.0; f.len()], 10_000, 1e-14).unwrap().x
}

fn energy_dist(a: &CsrMatrix, x: &[f64], y: &[f64]) -> f64 {
    let d: Vec<f64> = x.iter().zip(y).map(|(p, q)| p - q).collect();
    norm_a(a, &d).unwrap()
}

/// Worst per-cycle energy contraction over random right-hand sides and guesses.
fn measured_theta(ctx: &MgContext, seed: u64) -> f64 {
    let level = ctx.finest_level();
    let a = ctx.stiffness(level);
    let n = ctx.n_dofs(level);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..4 {
        let f = random_vec(&mut rng, n);
        let exact = reference_solve(a, &f);
        let mut x = random_vec(&mut rng, n);
        for _ in 0..3 {
            let before = energy_dist(a, &x, &exact);
            x = v_cycle(ctx, level, &f, &x).unwrap();
            let after = energy_dist(a, &x, &exact);
            worst = worst.max(after / before);
        }
    }
    worst
}

#[test]
fn galerkin_property_of_transfers() {
    let ctx = model_ctx(4, 3);
    for k in 0..2 {
        let p = ctx.transfer(k);
        let galerkin = p.transpose().matmul(&ctx.stiffness(k + 1).matmul(p).unwrap()).unwrap();
        let coarse = ctx.stiffness(k);
        let scale = coarse.max_abs();
        for i in 0..coarse.n_rows() {
            for j in 0..coarse.n_cols() {
                assert!((galerkin.get(i, j) - coarse.get(i, j)).abs() <= 1e-10 * scale);
            }
        }
    }
}

#[test]
fn v_cycle_contraction_bound() {
    let theta = measured_theta(&model_ctx(4, 4), 7);
    println!("theta (4 levels, nu=2) = {theta:.4}");
    assert!(theta <= 0.35, "theta = {theta}");
}

#[test]
fn contraction_is_mesh_independent() {
    let thetas: Vec<f64> = [3, 4, 5].iter().map(|&l| measured_theta(&model_ctx(4, l), 11)).collect();
    println!("theta by level count: {thetas:?}");
    let spread = thetas.iter().cloned().fold(f64::MIN, f64::max) - thetas.iter().cloned().fold(f64::MAX, f64::min);
    assert!(thetas.iter().all(|&t| t < 1.0));
    assert!(spread < 0.1, "spread {spread}");
}

#[test]
fn exact_solution_is_preserved() {
    let ctx = model_ctx(4, 3);
    let level = 2;
    let a = ctx.stiffness(level);
    let dense = cholesky_dense(&a.to_dense()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let f = random_vec(&mut rng, ctx.n_dofs(level));
    let exact = dense.solve(&f);
    let x = v_cycle(&ctx, level, &f, &exact).unwrap();
    let y = mg_solve(&ctx, level, &f, &exact, 3).unwrap();
    for ((a, b), c) in x.iter().zip(&exact).zip(&y) {
        assert!((a - b).abs() < 1e-12);
        assert!((c - b).abs() < 1e-12);
    }
}

#[test]
fn mg_solve_matches_dense_solve() {
    let ctx = model_ctx(4, 3);
    let level = 2;
    let a = ctx.stiffness(level);
    let dense = cholesky_dense(&a.to_dense()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = random_vec(&mut rng, ctx.n_dofs(level));
    let exact = dense.solve(&f);
    let theta = measured_theta(&ctx, 5);
    let m = ((1e-12f64).ln() / theta.ln()).ceil() as usize;
    let x = mg_solve(&ctx, level, &f, &vec![0.0; f.len()], m).unwrap();
    for (p, q) in x.iter().zip(&exact) {
        assert!((p - q).abs() < 1e-9, "{p} vs {q} after {m} cycles");
    }
}

#[test]
fn two_cycles_reduce_by_theta_squared() {
    let ctx = model_ctx(4, 4);
    let level = ctx.finest_level();
    let a = ctx.stiffness(level);
    let theta = measured_theta(&ctx, 17);
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    for _ in 0..3 {
        let f = random_vec(&mut rng, ctx.n_dofs(level));
        let exact = reference_solve(a, &f);
        let x0 = random_vec(&mut rng, f.len());
        let x2 = mg_solve(&ctx, level, &f, &x0, 2).unwrap();
        let ratio = energy_dist(a, &x2, &exact) / energy_dist(a, &x0, &exact);
        assert!(ratio <= theta * theta * 1.05, "{ratio} > {}", theta * theta);
    }
}

#[test]
fn gauss_seidel_cycle_is_homogeneous() {
    let h = build_hierarchy(unit_square_mesh(4).unwrap(), 3).unwrap();
    let ctx = build_mg_context(&h, &ConstantCoefficients::laplace(), 2)
        .unwrap()
        .with_smoother(Smoother::SymmetricGaussSeidel);
    let level = 2;
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let f = random_vec(&mut rng, ctx.n_dofs(level));
    let zero = vec![0.0; f.len()];
    let x = v_cycle(&ctx, level, &f, &zero).unwrap();
    let f4: Vec<f64> = f.iter().map(|v| 4.0 * v).collect();
    let x4 = v_cycle(&ctx, level, &f4, &zero).unwrap();
    for (a, b) in x.iter().zip(&x4) {
        // scaling by a power of two is exact in binary floating point
        assert_eq!(4.0 * a, *b);
    }
}

#[test]
fn gauss_seidel_cycle_contracts() {
    let h = build_hierarchy(unit_square_mesh(4).unwrap(), 4).unwrap();
    let ctx = build_mg_context(&h, &ConstantCoefficients::laplace(), 2)
        .unwrap()
        .with_smoother(Smoother::SymmetricGaussSeidel);
    let theta = measured_theta(&ctx, 29);
    assert!(theta < 0.5, "{theta}");
}
