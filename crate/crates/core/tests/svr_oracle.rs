mod common;

use climrisk::data::{build_claims_features, generate_synthetic, SynthConfig};
use climrisk::kernel::{gram_matrix, KernelSpec};
use climrisk::svr::{fit_detailed, solve_dual, SolverConfig, SvrHyperparams};
use climrisk::DesignMatrix;
use common::*;

#[test]
fn projection_is_feasible_and_idempotent() {
    let mut r = rng(5);
    for _ in 0..200 {
        use rand::Rng;
        let n = r.random_range(1..6);
        let c = r.random_range(0.1..5.0);
        let mut v: Vec<f64> = (0..2 * n).map(|_| r.random_range(-3.0..8.0)).collect();
        project_box_hyperplane(&mut v, n, c);
        let s: f64 = v[..n].iter().sum::<f64>() - v[n..].iter().sum::<f64>();
        assert!(s.abs() < 1e-10, "sum {s}");
        assert!(v.iter().all(|&x| (0.0..=c).contains(&x)));
        let mut again = v.clone();
        project_box_hyperplane(&mut again, n, c);
        for (a, b) in v.iter().zip(&again) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn solver_matches_projected_ascent() {
    let mut r = rng(2024);
    for case in 0..60 {
        let inst = random_svr_instance(&mut r);
        let k = kernel_matrix(&inst.x, inst.sigma2);
        let oracle = svr_dual_oracle(&k, &inst.y, inst.c, inst.eps);
        assert!(
            oracle.duality_gap.abs() <= 1e-10 * (1.0 + oracle.objective.abs()),
            "case {case}: oracle not converged, gap {}",
            oracle.duality_gap
        );

        let x = DesignMatrix::from_rows(&inst.x).unwrap();
        let spec = match inst.sigma2 {
            Some(s2) => KernelSpec::rbf(s2).unwrap(),
            None => KernelSpec::Linear,
        };
        let gram = gram_matrix(&x, &spec).unwrap();
        let tight = SolverConfig {
            tol: 1e-9,
            ..SolverConfig::default()
        };
        let sol = solve_dual(&gram, &inst.y, inst.c, inst.eps, &tight).unwrap();
        let diff = (sol.objective - oracle.objective).abs();
        assert!(
            diff <= 1e-7 * (1.0 + oracle.objective.abs()),
            "case {case}: solver {} vs oracle {}",
            sol.objective,
            oracle.objective
        );
        let direct = dual_value(&k, &inst.y, inst.eps, &sol.alpha, &sol.alpha_star);
        assert!((direct - sol.objective).abs() <= 1e-9 * (1.0 + direct.abs()));
    }
}

#[test]
fn fitted_models_satisfy_optimality_structure() {
    let series = generate_synthetic(&SynthConfig {
        weeks: 120,
        seed: 8,
        ..SynthConfig::default()
    })
    .unwrap();
    let (x, y) = build_claims_features(&series).unwrap();
    for c in [0.1, 1.0, 100.0] {
        for s2 in [0.05, 1.0, 10.0] {
            for eps in [0.0, 0.1, 0.8] {
                let fit = fit_detailed(&x, &y, &SvrHyperparams::rbf(c, s2, eps), &SolverConfig::default()).unwrap();
                assert!(fit.solution.kkt_violation <= 1e-3);
                if let Err(e) = fit.verify_kkt(1e-3) {
                    panic!("C={c} σ²={s2} ε={eps}: {e}");
                }
            }
        }
    }
}
