//! Benchmarks for the numerical kernels that dominate end-to-end runs:
//! measure discretization + Lanczos chain mapping, one RK4 step of the
//! correlation-matrix equation of motion, the tail correlation function,
//! and one evaluation of the closure fit model.

use criterion::{black_box, criterion_group, criterion_main, Criterion};

use fermichain::chainmap::chain_coefficients;
use fermichain::closure::{c_semicircle, closure_ttcf, rescale_closure, Fill, UniversalClosure};
use fermichain::gaussian::{assemble, evolve, AssemblySpec, CorrelationMatrix, Ramp, ReferenceMode};
use fermichain::specdens::{Interval, SpectralDensity};
use nalgebra::Complex;

type Complex64 = Complex<f64>;

fn semicircle() -> SpectralDensity {
    SpectralDensity::semicircle(
        1.0 / (10.0 * std::f64::consts::PI),
        Interval::new(0.0, 2.0).unwrap(),
    )
    .unwrap()
}

/// A small hand-built closure table (valid shape, not a converged fit) so the
/// benchmarks do not depend on fit runtime or on data files.
fn toy_closure(n: usize) -> UniversalClosure {
    let alpha = (0..n)
        .map(|k| Complex64::new(-0.3 - 0.05 * k as f64, 0.2 * k as f64 - 0.4))
        .collect();
    let beta = (0..n - 1).map(|k| Complex64::new(0.0, 0.3 + 0.02 * k as f64)).collect();
    let norm = (n as f64).sqrt();
    let w = (0..n)
        .map(|k| {
            if k % 2 == 0 {
                Complex64::new(1.0 / norm, 0.0)
            } else {
                Complex64::new(0.0, 1.0 / norm)
            }
        })
        .collect();
    UniversalClosure {
        alpha,
        beta,
        w,
        fit_residual: f64::NAN,
    }
}

fn bench_chain_coefficients(c: &mut Criterion) {
    let j = semicircle();
    c.bench_function("chain_coefficients_40_sites_20k_nodes", |b| {
        b.iter(|| chain_coefficients(black_box(&j), 40, 20_000).unwrap())
    });
}

fn bench_evolve_step(c: &mut Criterion) {
    let chain = chain_coefficients(&semicircle(), 12, 20_000).unwrap();
    let u = toy_closure(6);
    let empty = rescale_closure(&u, 1.0, 0.5, Fill::Empty).unwrap();
    let filled = rescale_closure(&u, 1.0, 0.5, Fill::Filled).unwrap();
    let sys = assemble(&AssemblySpec {
        system_energy: -0.4,
        empty_chain: &chain,
        filled_chain: &chain,
        n_env: 8,
        empty_closure: &empty,
        filled_closure: &filled,
        mode: ReferenceMode::Fmc,
        ramp: Ramp::Constant,
    })
    .unwrap();
    let c0 = CorrelationMatrix::initial_state(&sys.layout, sys.dim(), true);
    c.bench_function("evolve_100_rk4_steps_dim31", |b| {
        b.iter(|| evolve(black_box(&sys), &c0, 0.1, 1e-3, 1000).unwrap())
    });
}

fn bench_c_semicircle(c: &mut Criterion) {
    c.bench_function("c_semicircle_grid_1001", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 0..1001 {
                acc += c_semicircle(black_box(k as f64 * 0.1));
            }
            acc
        })
    });
}

fn bench_closure_model(c: &mut Criterion) {
    let u = toy_closure(6);
    let params = rescale_closure(&u, 0.0, 0.5, Fill::Empty).unwrap();
    let times: Vec<f64> = (0..1001).map(|k| k as f64 * 0.1).collect();
    c.bench_function("closure_ttcf_grid_1001_n6", |b| {
        b.iter(|| closure_ttcf(black_box(&params), &times).unwrap())
    });
}

criterion_group!(
    kernels,
    bench_chain_coefficients,
    bench_evolve_step,
    bench_c_semicircle,
    bench_closure_model
);
criterion_main!(kernels);
