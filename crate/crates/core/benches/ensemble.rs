use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use kirchhoff::scenarios;
use kirchhoff::{Execution, Stepper, StepperConfig};

fn ensemble(c: &mut Criterion) {
    let s = scenarios::cubic_double_well();
    let stepper = Stepper::new(&s.domain, &s.coeffs, StepperConfig::with_dt(0.02)).unwrap();
    let mut group = c.benchmark_group("ensemble");
    group.sample_size(10);
    for members in [4usize, 16, 64] {
        let ics = scenarios::random_ics(&s.domain, members, 6, 2.0, 1);
        for (label, exec) in [
            ("sequential", Execution::Sequential),
            ("parallel", Execution::Parallel),
        ] {
            group.bench_with_input(BenchmarkId::new(label, members), &ics, |b, ics| {
                b.iter(|| {
                    exec.map(ics, |ic| {
                        stepper.simulate(ic, 5.0, 25).unwrap().last().clone()
                    })
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, ensemble);
criterion_main!(benches);
