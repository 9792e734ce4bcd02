use lsqp::benchmarks::{BenchmarkName, ProblemDescription};
use lsqp::harness::{
    initial_guesses, read_trials_csv, run_experiment, run_experiment_on, summarize, write_curves_csv,
    write_trials_csv, ExperimentConfig, GuessQuality, HarnessError, Outcome,
};
use lsqp::problem::{check_positivity, evaluate_point};
use lsqp::report::{markdown_table, summary_from_csv};
use lsqp::Algorithm;

fn config(name: BenchmarkName, quality: GuessQuality, trials: usize, seed: u64) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(name, quality);
    c.trials_per_cell = trials;
    c.rng_seed = seed;
    c
}

#[test]
fn same_seed_same_summary_any_worker_count() {
    let mut c = config(BenchmarkName::Rosenbrock, GuessQuality::Poor, 30, 11);
    c.worker_count = 1;
    let a = run_experiment(&c).unwrap();
    c.worker_count = 4;
    let b = run_experiment(&c).unwrap();
    assert_eq!(a.summary, b.summary);
    assert_eq!(a.summary.to_json().unwrap(), b.summary.to_json().unwrap());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.trial_index, x.algorithm, &x.x0, &x.x_final), (y.trial_index, y.algorithm, &y.x0, &y.x_final));
    }

    c.rng_seed = 12;
    assert_ne!(run_experiment(&c).unwrap().summary, a.summary);
}

#[test]
fn algorithms_share_initial_guesses() {
    let c = config(BenchmarkName::Floudas, GuessQuality::Poor, 20, 3);
    let out = run_experiment(&c).unwrap();
    let sqp: Vec<_> = out.records.iter().filter(|r| r.algorithm == Algorithm::Sqp).collect();
    let lsqp: Vec<_> = out.records.iter().filter(|r| r.algorithm == Algorithm::Lsqp).collect();
    assert_eq!(sqp.len(), 20);
    for (a, b) in sqp.iter().zip(&lsqp) {
        assert_eq!(a.trial_index, b.trial_index);
        assert_eq!(a.x0, b.x0);
    }
    // trial i's guess does not depend on how many trials run
    let longer = initial_guesses(&BenchmarkName::Floudas.case(), &config(BenchmarkName::Floudas, GuessQuality::Poor, 40, 3));
    assert_eq!(&longer[..20], &sqp.iter().map(|r| r.x0.clone()).collect::<Vec<_>>()[..]);
}

#[test]
fn guesses_are_in_the_box_and_log_transformable() {
    for name in BenchmarkName::ALL {
        let case = name.case();
        for (quality, delta) in [(GuessQuality::Good, 0.1), (GuessQuality::Poor, 0.8)] {
            for x0 in initial_guesses(&case, &config(name, quality, 50, 1)) {
                for ((x, s), lb) in x0.iter().zip(&case.known_optimum.x_star).zip(case.problem.lower_bounds()) {
                    assert!(*x >= lb.max(s * (1.0 - delta)) * (1.0 - 1e-12) && *x <= s * (1.0 + delta) * (1.0 + 1e-12));
                }
                let ev = evaluate_point(&case.problem, &x0).unwrap();
                assert!(check_positivity(&ev).is_log_transformable());
            }
        }
    }
}

#[test]
fn curves_and_counts_are_consistent() {
    for name in [BenchmarkName::Rosenbrock, BenchmarkName::Floudas] {
        let c = config(name, GuessQuality::Poor, 40, 8);
        let out = run_experiment(&c).unwrap();
        for a in &out.summary.algorithms {
            assert_eq!(a.convergence_curve.len(), c.max_iter);
            assert!(a.convergence_curve.windows(2).all(|w| w[0] <= w[1]), "curve decreases");
            let last = *a.convergence_curve.last().unwrap();
            assert!((last - (1.0 - a.failure_rate)).abs() <= 1e-12);
            assert_eq!(a.outcome_counts.values().sum::<usize>(), a.trials);
            assert_eq!(a.count(Outcome::Success), a.successes);
            assert_eq!(a.successes + a.failures, a.trials);
        }
    }
}

#[test]
fn success_iff_classified() {
    let c = config(BenchmarkName::Rosenbrock, GuessQuality::Poor, 40, 2);
    let case = BenchmarkName::Rosenbrock.case();
    let out = run_experiment(&c).unwrap();
    for r in &out.records {
        let near = case.is_near_optimum(&r.x_final, r.f_final);
        assert_eq!(r.outcome == Outcome::Success, near && r.termination.is_converged(), "{r:?}");
    }
}

#[test]
fn csv_round_trip_reproduces_table() {
    let case = BenchmarkName::Boyd.case();
    let c = config(BenchmarkName::Boyd, GuessQuality::Poor, 25, 4);
    let out = run_experiment(&c).unwrap();

    let mut buf = Vec::new();
    write_trials_csv(&mut buf, &case, &c, &out.records).unwrap();
    let records = read_trials_csv(buf.as_slice(), 3).unwrap();
    assert_eq!(records.len(), out.records.len());
    for (a, b) in records.iter().zip(&out.records) {
        assert_eq!((a.algorithm, a.trial_index, a.outcome, a.iterations, a.termination), (b.algorithm, b.trial_index, b.outcome, b.iterations, b.termination));
        assert_eq!(a.f_final, b.f_final);
        assert_eq!(a.x_final, b.x_final);
        assert_eq!(a.x0, b.x0);
    }
    let rebuilt = summary_from_csv(&case, &c, buf.as_slice()).unwrap();
    assert_eq!(rebuilt, out.summary);
    assert_eq!(markdown_table(&rebuilt), markdown_table(&out.summary));
    assert!(matches!(read_trials_csv(buf.as_slice(), 4), Err(HarnessError::MalformedCsv(_))));

    let mut curves = Vec::new();
    write_curves_csv(&mut curves, &out.summary).unwrap();
    let text = String::from_utf8(curves).unwrap();
    assert_eq!(text.lines().next(), Some("k,SQP,LSQP"));
    assert_eq!(text.lines().count(), 1 + c.max_iter);
}

#[test]
fn single_trial_summary_is_the_trial() {
    let c = config(BenchmarkName::Boyd, GuessQuality::Good, 1, 9);
    let out = run_experiment(&c).unwrap();
    let case = BenchmarkName::Boyd.case();
    assert_eq!(summarize(&case, &c, &out.records), out.summary);
    for (a, r) in out.summary.algorithms.iter().zip(&out.records) {
        assert_eq!(a.trials, 1);
        if r.outcome == Outcome::Success {
            assert_eq!(a.mean_iterations, Some(r.iterations as f64));
            assert_eq!(a.mean_objective, Some(r.f_final));
            assert_eq!(a.mean_variables, r.x_final);
        } else {
            assert_eq!(a.mean_iterations, None);
        }
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let mut c = config(BenchmarkName::Boyd, GuessQuality::Good, 0, 0);
    assert!(matches!(run_experiment(&c), Err(HarnessError::InvalidConfig(_))));
    c.trials_per_cell = 1;
    c.worker_count = 0;
    assert!(matches!(run_experiment(&c), Err(HarnessError::InvalidConfig(_))));
    c.worker_count = 1;
    c.algorithms.clear();
    assert!(matches!(run_experiment(&c), Err(HarnessError::InvalidConfig(_))));
    let c = config(BenchmarkName::Boyd, GuessQuality::Good, 1, 0);
    assert!(matches!(
        run_experiment_on(&BenchmarkName::Floudas.case(), &c),
        Err(HarnessError::BenchmarkMismatch { .. })
    ));
}

#[test]
fn boyd_good_sqp_iterations() {
    let out = run_experiment(&config(BenchmarkName::Boyd, GuessQuality::Good, 100, 21)).unwrap();
    let sqp = out.summary.algorithm(Algorithm::Sqp).unwrap();
    let lsqp = out.summary.algorithm(Algorithm::Lsqp).unwrap();
    let m = sqp.mean_iterations.unwrap();
    assert!((4.0..=10.0).contains(&m), "SQP mean {m}");
    assert_eq!(sqp.failures, 0);
    // every LSQP trial converges within 10 iterations
    assert_eq!(lsqp.converged_within(10), 1.0);
}

#[test]
fn boyd_poor_lsqp_halves_iterations() {
    let out = run_experiment(&config(BenchmarkName::Boyd, GuessQuality::Poor, 100, 22)).unwrap();
    let sqp = out.summary.algorithm(Algorithm::Sqp).unwrap();
    let lsqp = out.summary.algorithm(Algorithm::Lsqp).unwrap();
    assert_eq!(lsqp.failures, 0);
    assert!(lsqp.mean_iterations.unwrap() <= 0.5 * sqp.mean_iterations.unwrap());
    assert!((2.0..=8.0).contains(&lsqp.mean_iterations.unwrap()));
}

#[test]
fn rosenbrock_good_lsqp_is_slower() {
    let out = run_experiment(&config(BenchmarkName::Rosenbrock, GuessQuality::Good, 100, 23)).unwrap();
    let sqp = out.summary.algorithm(Algorithm::Sqp).unwrap().mean_iterations.unwrap();
    let lsqp = out.summary.algorithm(Algorithm::Lsqp).unwrap().mean_iterations.unwrap();
    assert!(lsqp >= 1.2 * sqp, "{lsqp} vs {sqp}");
}

#[test]
fn floudas_poor_lsqp_hits_transform_failures() {
    let mut c = config(BenchmarkName::Floudas, GuessQuality::Poor, 100, 24);
    c.algorithms = vec![Algorithm::Lsqp];
    c.enforce_positivity = Some(false);
    let out = run_experiment(&c).unwrap();
    let lsqp = out.summary.algorithm(Algorithm::Lsqp).unwrap();
    assert!(lsqp.count(Outcome::TransformFailure) > 0);
    // the guesses themselves are log-transformable: failures come from iterates
    let case = BenchmarkName::Floudas.case();
    for r in out.records.iter().filter(|r| r.outcome == Outcome::TransformFailure) {
        let ev = evaluate_point(&case.problem, &r.x0).unwrap();
        assert!(check_positivity(&ev).is_log_transformable());
    }
}

#[test]
fn kirschen_ozturk_poor_lsqp() {
    let mut c = config(BenchmarkName::KirschenOzturk, GuessQuality::Poor, 100, 25);
    c.algorithms = vec![Algorithm::Lsqp];
    let out = run_experiment(&c).unwrap();
    let lsqp = out.summary.algorithm(Algorithm::Lsqp).unwrap();
    assert!(lsqp.failure_rate <= 0.05);
    let w_f = lsqp.mean_objective.unwrap();
    assert!(((w_f - 755.9) / 755.9).abs() <= 1e-3, "{w_f}");
}

#[test]
fn description_builds_the_experiment_case() {
    let desc = ProblemDescription::from_json(r#"{"constants": {"A_wall": 50.0}}"#).unwrap();
    let case = desc.build(BenchmarkName::Boyd).unwrap();
    let out = run_experiment_on(&case, &config(BenchmarkName::Boyd, GuessQuality::Good, 10, 1)).unwrap();
    assert_eq!(out.summary.optimum_x, case.known_optimum.x_star);
    assert_eq!(out.summary.algorithm(Algorithm::Lsqp).unwrap().failures, 0);
}
