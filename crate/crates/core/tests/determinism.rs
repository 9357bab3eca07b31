use multapprox_core::convergence::{run_multiplicative_convergence, ApproximationConfig, PartitionLadder};
use multapprox_core::market::{simulate, JumpLaw, ModelSpec, TimeGrid};
use multapprox_core::portfolio::{FractionStrategy, PartitionRule, SimplexVector};

fn model() -> ModelSpec {
    ModelSpec::merton_1d(0.07, 0.2, 1.0, 1.0, JumpLaw::TwoPoint { low: -0.4, high: 0.25, p_low: 0.5 })
}

fn pool<T: Send>(n: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap().install(f)
}

#[test]
fn paths_do_not_depend_on_threads_or_ensemble_size() {
    let grid = TimeGrid::new(1.0, 128).unwrap();
    let a = pool(1, || simulate(&model(), grid, 200, 5).unwrap());
    let b = pool(4, || simulate(&model(), grid, 200, 5).unwrap());
    assert_eq!(a, b);
    let prefix = simulate(&model(), grid, 50, 5).unwrap();
    for p in 0..50 {
        assert_eq!(prefix.path(p).row(128), a.path(p).row(128));
    }
    let other = simulate(&model(), grid, 200, 6).unwrap();
    assert_ne!(other.path(0).row(128), a.path(0).row(128));
}

#[test]
fn convergence_report_is_reproducible() {
    let cfg = ApproximationConfig {
        model: model(),
        grid: TimeGrid::new(1.0, 256).unwrap(),
        strategy: FractionStrategy::constant(SimplexVector::new(vec![0.6]).unwrap()),
        x: 1.0,
        n_paths: 500,
        seed: 8,
        relative_epsilons: vec![0.01],
        record_timing: false,
    };
    let ladder = PartitionLadder::new(vec![PartitionRule::Uniform(4), PartitionRule::Uniform(64)]).unwrap();
    let a = pool(1, || run_multiplicative_convergence(&cfg, &ladder).unwrap());
    let b = pool(3, || run_multiplicative_convergence(&cfg, &ladder).unwrap());
    assert_eq!(a, b);
}
