//! Parallel against sequential execution of the data-parallel kernels.
//! Both modes do the same arithmetic; only the scheduling differs.

use std::collections::BTreeMap;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gradient_lab::conditions::{self, SampleRegion};
use gradient_lab::expr::parse;
use gradient_lab::solver::{apply_discrete_generator, evolve, Advection, Grid, ScalarField, SolverConfig};
use gradient_lab::{presets, EtaMode, Execution, OperatorFamily};

fn example41() -> OperatorFamily {
    OperatorFamily::build(&presets::instantiate("example41", &BTreeMap::new()).unwrap()).unwrap()
}

const MODES: [(&str, Execution); 2] = [("parallel", Execution::Parallel), ("sequential", Execution::Sequential)];

fn generator(c: &mut Criterion) {
    let op = example41();
    let grid = Grid::new(3, 41, 3.0).unwrap();
    let f = parse("exp(-norm2(x))", 3).unwrap();
    let field = ScalarField::sample(&grid, &f, 1.0).unwrap();
    let mut g = c.benchmark_group("discrete_generator");
    for (name, exec) in MODES {
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| apply_discrete_generator(&op, &field, 1.0, Advection::Upwind, exec).unwrap())
        });
    }
    g.finish();
}

fn implicit_solve(c: &mut Criterion) {
    let op = example41();
    let grid = Grid::new(3, 31, 3.0).unwrap();
    let f = parse("exp(-norm2(x))", 3).unwrap();
    let mut g = c.benchmark_group("evolve");
    g.sample_size(10);
    for (name, exec) in MODES {
        let config = SolverConfig {
            execution: exec,
            snapshots: 2,
            ..SolverConfig::default()
        };
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| evolve(&op, &f, 1.0, 1.05, &grid, &config).unwrap())
        });
    }
    g.finish();
}

fn sampling(c: &mut Criterion) {
    let op = example41();
    let mut g = c.benchmark_group("estimate_c0");
    g.sample_size(10);
    for (name, exec) in MODES {
        let region = SampleRegion::cube(3, 2.0, (1.0, 2.0)).unwrap().with_execution(exec);
        g.bench_function(BenchmarkId::from_parameter(name), |b| {
            b.iter(|| conditions::estimate_c0(&op, &region, EtaMode::UserExpression).unwrap())
        });
    }
    g.finish();
}

criterion_group!(benches, generator, implicit_solve, sampling);
criterion_main!(benches);
