use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use incompat::construction::build_optimal_task;
use incompat::discrimination::{
    default_parent_sizes, psg_best_lo, psg_compatible_seesaw, random_task, Mode, SeesawOptions,
};
use incompat::incompatibility::{compute_roi, compute_roi_with, RoiOptions};
use incompat::measurements::{random_projective_set, random_set, sigma_xz_set, MeasurementSet};
use incompat::oracle::{brute_force_psg_with, simulate_game_with};
use incompat::par::{self, Execution};

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn brute_force(c: &mut Criterion) {
    let task = random_task(&[2, 2], 2, 3, 1).unwrap();
    let a = random_set(2, 2, 3, 2).unwrap();
    let b = random_set(2, 2, 3, 3).unwrap();
    let sets = [a, b];
    let mut g = c.benchmark_group("brute_force_locc1");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| brute_force_psg_with(&task, &sets, Mode::Locc1, exec).unwrap())
        });
    }
    g.finish();
}

fn simulate(c: &mut Criterion) {
    let task = random_task(&[2, 2], 2, 3, 4).unwrap();
    let xz = sigma_xz_set();
    let strategy = psg_best_lo(&task, &xz, &xz).unwrap().1;
    let mut g = c.benchmark_group("simulate_1e6");
    g.sample_size(10);
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| simulate_game_with(&task, &xz, &xz, &strategy, 1_000_000, 5, exec).unwrap())
        });
    }
    g.finish();
}

fn seesaw(c: &mut Criterion) {
    let a = random_projective_set(2, 2, 2, 6).unwrap();
    let b = random_projective_set(2, 2, 2, 7).unwrap();
    let bundle = build_optimal_task(&compute_roi(&a).unwrap(), &compute_roi(&b).unwrap()).unwrap();
    let mut g = c.benchmark_group("seesaw_8_restarts");
    g.sample_size(10);
    for (name, exec) in MODES {
        let mut opts = SeesawOptions::new(default_parent_sizes(&a, &b).unwrap());
        opts.restarts = 8;
        opts.execution = exec;
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| psg_compatible_seesaw(&bundle.task, &opts, &[]).unwrap())
        });
    }
    g.finish();
}

fn batch_roi(c: &mut Criterion) {
    let sets: Vec<MeasurementSet> = (0..8)
        .map(|i| random_projective_set(3, 2, 3, 10 + i).unwrap())
        .collect();
    let mut g = c.benchmark_group("batch_roi_8_qutrit_sets");
    g.sample_size(10);
    for (name, exec) in MODES {
        let opts = RoiOptions {
            execution: exec,
            ..RoiOptions::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |bench| {
            bench.iter(|| par::map_indices(exec, sets.len(), |i| compute_roi_with(&sets[i], &opts).unwrap().roi))
        });
    }
    g.finish();
}

criterion_group!(benches, brute_force, simulate, seesaw, batch_roi);
criterion_main!(benches);
