use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use weakmeter_core::exec::Execution;
use weakmeter_core::formulas::conditional_variance_growth;
use weakmeter_core::numdiff::{fd_conditional_variance_growth, DEFAULT_LEVELS, DEFAULT_STEP};
use weakmeter_core::random::{random_scenario, MeterChoice, StateChoice};
use weakmeter_core::report::scan_rows;

const MODES: [(&str, Execution); 2] = [
    ("sequential", Execution::Sequential),
    ("parallel", Execution::Parallel),
];

fn bench_scan_rows(c: &mut Criterion) {
    let sc = random_scenario(11, MeterChoice::GaussianCv, StateChoice::Mixed, true).unwrap();
    let mut group = c.benchmark_group("scan_rows");
    for n in [16usize, 128] {
        let s_values: Vec<f64> = (0..n).map(|i| 0.5 * i as f64 / n as f64).collect();
        for (name, exec) in MODES {
            group.bench_with_input(BenchmarkId::new(name, n), &s_values, |b, s| {
                b.iter(|| scan_rows(black_box(&sc), s, exec).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_oracle_batch(c: &mut Criterion) {
    let scenarios: Vec<_> = (0..32)
        .map(|seed| {
            let meter = if seed % 2 == 0 {
                MeterChoice::Qubit
            } else {
                MeterChoice::GaussianCv
            };
            random_scenario(seed, meter, StateChoice::Either, true).unwrap()
        })
        .collect();
    let mut group = c.benchmark_group("growth_vs_oracle_batch");
    group.sample_size(20);
    for (name, exec) in MODES {
        group.bench_function(name, |b| {
            b.iter(|| {
                exec.map(&scenarios, |sc| {
                    let total = conditional_variance_growth(sc).unwrap().total;
                    let fd =
                        fd_conditional_variance_growth(sc, DEFAULT_STEP, DEFAULT_LEVELS).unwrap();
                    (total - fd.value).abs()
                })
            })
        });
    }
    group.finish();
}

criterion_group!(benches, bench_scan_rows, bench_oracle_batch);
criterion_main!(benches);
