//! Interlaced solvers and scenario generators, checked against the oracle
//! applied to the explicit product `UV`.

use ikz::dense::{dist_sq, norm_sq, DenseMatrix, DenseVector};
use ikz::driver::RunOptions;
use ikz::experiment::{run_experiment, ExperimentResult, MethodTag, RunConfig, SystemInput};
use ikz::factored::{run_interlaced, FactoredSystem, Pair};
use ikz::oracle::{explicit_product, svd, FactoredOracle, DEFAULT_RANK_TOL};
use ikz::sampling::{generation_rng, trial_rng};
use ikz::systems::{
    generate, load_factored, load_factored_dir, save_factored, Generated, Scenario, ScenarioSpec,
    RESIDUAL_RATIO,
};
use ikz::textio::{write_matrix, write_vector};
use ikz::Error;

fn instance(scenario: Scenario, m: usize, n: usize, k: usize, seed: u64) -> Generated {
    let spec = ScenarioSpec::new(scenario, m, n, k, seed).unwrap();
    generate(&spec, &mut generation_rng(seed)).unwrap()
}

fn trials(pair: Pair, sys: &FactoredSystem, count: usize, budget: u64) -> ExperimentResult {
    let cfg = RunConfig::new(MethodTag::Interlaced(pair), count, budget, 31);
    run_experiment(&cfg, SystemInput::Factored(sys)).unwrap()
}

#[test]
fn rkrk_recovers_s1_solution() {
    let g = instance(Scenario::S1, 60, 40, 20, 21);
    let res = trials(Pair::RK_RK, &g.system, 40, 30_000);
    assert!(res.final_relative_error() < 1e-8, "{}", res.final_relative_error());
}

#[test]
fn rkrk_misses_s2_solution() {
    let g = instance(Scenario::S2, 40, 60, 50, 22);
    let res = trials(Pair::RK_RK, &g.system, 4, 50_000);
    // converged to something, just not the least-norm solution of the product
    let tail: Vec<f64> = res.summary.iter().rev().take(5).map(|r| r.mean_error_sq).collect();
    assert!(tail.iter().all(|e| (e / tail[0] - 1.0).abs() < 1e-6));
    assert!(res.final_relative_error().sqrt() > 0.01);
}

#[test]
fn extended_pairs_recover_s3b_solution() {
    let g = instance(Scenario::S3b, 120, 75, 50, 23);
    for pair in [Pair::REK_RK, Pair::REK_REK] {
        let res = trials(pair, &g.system, 40, 50_000);
        assert!(res.final_relative_error() < 1e-6, "{pair}: {}", res.final_relative_error());
    }
}

/// White cells converge, gray cells do not; every shape relation of the
/// three-by-three taxonomy that admits a Gaussian instance.
#[test]
fn white_and_gray_cells() {
    let cells = [
        (Scenario::S1, 40, 60, 20, Pair::RK_RK, true),
        (Scenario::S1, 60, 40, 20, Pair::RK_RK, true),
        (Scenario::S1, 120, 50, 80, Pair::RK_RK, true),
        (Scenario::S3b, 120, 75, 50, Pair::REK_RK, true),
        (Scenario::S2, 40, 60, 50, Pair::RK_RK, false),
        (Scenario::S2, 40, 30, 50, Pair::RK_RK, false),
        (Scenario::S3a, 120, 50, 80, Pair::REK_RK, false),
    ];
    for (scenario, m, n, k, pair, white) in cells {
        let g = instance(scenario, m, n, k, 24);
        let rel = trials(pair, &g.system, 8, 60_000).final_relative_error();
        if white {
            assert!(rel < 1e-6, "{scenario} {m}/{n}/{k}: {rel}");
        } else {
            assert!(rel > 1e-4, "{scenario} {m}/{n}/{k}: {rel}");
        }
    }
}

#[test]
fn residual_stop_gates_on_both_subsystems() {
    let g = instance(Scenario::S1, 30, 20, 10, 25);
    let opts = RunOptions::budget(200_000).with_tolerance(1e-10);
    let report = run_interlaced(Pair::RK_RK, &g.system, &opts, &mut trial_rng(25, 0), None).unwrap();
    assert!(report.stopped_early);
    assert_eq!(report.state.t % 30, 0);
    let ux = g.system.u().matvec(&report.state.x).unwrap();
    assert!(dist_sq(&ux, g.system.y()).sqrt() <= 1e-10);
    let vb = g.system.v().matvec(&report.state.b).unwrap();
    assert!(dist_sq(&vb, &report.state.x).sqrt() <= 1e-10);
}

#[test]
fn flops_accumulate_per_pair() {
    let g = instance(Scenario::S3b, 30, 20, 8, 26);
    for pair in Pair::SUPPORTED {
        let report =
            run_interlaced(pair, &g.system, &RunOptions::budget(101), &mut trial_rng(1, 0), None).unwrap();
        assert_eq!(report.state.flops, 101 * pair.step_cost(30, 20, 8), "{pair}");
    }
}

#[test]
fn conditioning_ordering_on_theorem_shapes() {
    // holds with margin on the k < min(m, n) shapes used in the experiments
    for (scenario, m, n, k) in [(Scenario::S1, 60, 40, 20), (Scenario::S3b, 120, 75, 50)] {
        for seed in 0..10 {
            let g = instance(scenario, m, n, k, seed);
            let o = FactoredOracle::analyze(&g.system).unwrap();
            assert!(o.u.alpha <= o.x.alpha && o.v.alpha <= o.x.alpha, "{scenario} seed {seed}");
        }
    }
}

#[test]
fn conditioning_ordering_can_fail() {
    // tall V with k > n: X = UV has rank one and alpha_X = 0, while U has
    // two equal singular values and alpha_U = 1/2
    let u = DenseMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0], [0.0, 0.0]]).unwrap();
    let v = DenseMatrix::from_rows(&[[1.0], [10.0]]).unwrap();
    let y = DenseVector::new(vec![1.0, 10.0, 0.0]).unwrap();
    let sys = FactoredSystem::new(u, v, y, Scenario::Custom).unwrap();
    let o = FactoredOracle::analyze(&sys).unwrap();
    assert!(o.x.alpha.abs() < 1e-15);
    assert!((o.u.alpha - 0.5).abs() < 1e-15);
    assert!(o.u.alpha > o.x.alpha);
}

#[test]
fn generated_consistent_systems_are_solved_by_the_oracle() {
    for (scenario, m, n, k) in [(Scenario::S1, 60, 40, 20), (Scenario::S1, 40, 60, 20), (Scenario::S2, 40, 60, 50)] {
        let g = instance(scenario, m, n, k, 27);
        let o = FactoredOracle::analyze(&g.system).unwrap();
        let x = explicit_product(&g.system);
        let fitted = x.matvec(&o.beta_star).unwrap();
        let y = g.system.y();
        assert!(dist_sq(&fitted, y).sqrt() <= 1e-9 * norm_sq(y).sqrt(), "{scenario}");
    }
}

#[test]
fn generated_factors_have_full_rank() {
    for (scenario, m, n, k) in [(Scenario::S1, 60, 40, 20), (Scenario::S3b, 120, 75, 50)] {
        for seed in 0..3 {
            let g = instance(scenario, m, n, k, seed);
            let o = FactoredOracle::analyze(&g.system).unwrap();
            assert_eq!((o.rank_u, o.rank_v, o.rank_x), (k, k, k));
        }
    }
}

fn residual_of(g: &Generated) -> Vec<f64> {
    let s = &g.system;
    let signal = s.u().matvec(&s.v().matvec(&g.beta).unwrap()).unwrap();
    s.y().iter().zip(&signal).map(|(y, v)| y - v).collect()
}

#[test]
fn inconsistent_residual_is_in_the_left_null_space() {
    for (scenario, m, n, k) in [(Scenario::S3b, 120, 75, 50), (Scenario::S3a, 120, 50, 80), (Scenario::S3b, 12, 8, 3)] {
        let g = instance(scenario, m, n, k, 28);
        let r = residual_of(&g);
        let x = explicit_product(&g.system);
        let xtr = x.matvec_adjoint(&r).unwrap();
        let rn = norm_sq(&r).sqrt();
        assert!(rn > 0.0);
        assert!(norm_sq(&xtr).sqrt() <= 1e-9 * x.frob_sq().sqrt() * rn, "{scenario}");
        let signal: Vec<f64> = g.system.y().iter().zip(&r).map(|(y, ri)| y - ri).collect();
        assert!((rn / norm_sq(&signal).sqrt() - RESIDUAL_RATIO).abs() < 1e-12);
    }
}

#[test]
fn s3b_u_subsystem_inconsistent_v_subsystem_consistent() {
    let g = instance(Scenario::S3b, 120, 75, 50, 29);
    let r = residual_of(&g);
    let u_cols = svd(g.system.u(), DEFAULT_RANK_TOL).col_space_projector();
    let off = u_cols.complement(&r).unwrap();
    assert!(norm_sq(&off).sqrt() > 0.1 * norm_sq(&r).sqrt());

    let o = FactoredOracle::analyze(&g.system).unwrap();
    let v_cols = svd(g.system.v(), DEFAULT_RANK_TOL).col_space_projector();
    let miss = v_cols.complement(&o.x_star).unwrap();
    assert!(norm_sq(&miss).sqrt() <= 1e-9 * norm_sq(&o.x_star).sqrt());
}

#[test]
fn save_load_round_trip_is_bit_exact() {
    let g = instance(Scenario::S3b, 12, 8, 3, 30);
    let dir = tempfile::tempdir().unwrap();
    save_factored(dir.path(), &g.system).unwrap();
    let back = load_factored_dir(dir.path()).unwrap();
    assert_eq!(back.scenario(), Scenario::Custom);
    assert_eq!(back.u().data(), g.system.u().data());
    assert_eq!(back.v().data(), g.system.v().data());
    assert_eq!(back.y().as_slice(), g.system.y().as_slice());
}

#[test]
fn load_checks_inner_dimensions() {
    let dir = tempfile::tempdir().unwrap();
    let p = |name: &str| dir.path().join(name);
    let u = DenseMatrix::from_fn(3, 2, |i, j| (i + j) as f64 + 1.0).unwrap();
    write_matrix(&p("U.mat"), &u).unwrap();
    write_matrix(&p("V.mat"), &DenseMatrix::from_fn(2, 4, |i, j| (i * j) as f64 + 0.5).unwrap()).unwrap();
    write_matrix(&p("V3.mat"), &DenseMatrix::from_fn(3, 4, |_, _| 1.0).unwrap()).unwrap();
    write_vector(&p("y.vec"), &[1.0, 2.0, 3.0]).unwrap();

    let sys = load_factored(&p("U.mat"), &p("V.mat"), &p("y.vec")).unwrap();
    assert_eq!((sys.m(), sys.k(), sys.n()), (3, 2, 4));
    assert!(matches!(load_factored(&p("U.mat"), &p("V3.mat"), &p("y.vec")), Err(Error::Dimension(_))));
    assert!(matches!(load_factored(&p("U.mat"), &p("missing"), &p("y.vec")), Err(Error::Io { .. })));
}
