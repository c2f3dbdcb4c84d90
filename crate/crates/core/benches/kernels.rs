//! Parallel against single-threaded timings of the heavy kernels.
//!
//! With the `parallel` feature the "serial" rows run the same rayon code in a
//! one-thread pool. `cargo bench --no-default-features` times the plain
//! sequential fallback instead.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use oamtrace::diagnostics::stripe_count;
use oamtrace::make_grid;
use oamtrace::propagate::{angular_spectrum, astigmatic_focus_image, fourier_focus, LensSpec};
use oamtrace::sources::{lg_mode, BeamSpec};

fn pools() -> Vec<(&'static str, rayon::ThreadPool)> {
    let all = rayon::ThreadPoolBuilder::new().build().unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    vec![("parallel", all), ("serial", one)]
}

fn kernels(c: &mut Criterion) {
    let lens = LensSpec { focal_m: 1.0, tilt_deg: 45.0 };
    let w = lens.conversion_waist_mm(420.0).unwrap();
    let pools = pools();

    let mut g = c.benchmark_group("angular_spectrum");
    g.sample_size(10);
    for n in [256, 512] {
        let f = lg_mode(make_grid(n, 8.0).unwrap(), BeamSpec::new(0.5, 780.0, 1)).unwrap();
        for (name, pool) in &pools {
            g.bench_with_input(BenchmarkId::new(*name, n), &f, |b, f| {
                b.iter(|| pool.install(|| angular_spectrum(f, 0.1).unwrap()))
            });
        }
    }
    g.finish();

    let mut g = c.benchmark_group("fourier_focus");
    g.sample_size(10);
    let f = lg_mode(make_grid(512, 8.0).unwrap(), BeamSpec::new(0.5, 780.0, 1)).unwrap();
    let out = make_grid(512, 0.8).unwrap();
    for (name, pool) in &pools {
        g.bench_function(*name, |b| b.iter(|| pool.install(|| fourier_focus(&f, 0.2, out).unwrap())));
    }
    g.finish();

    let mut g = c.benchmark_group("tilted_lens_stripes");
    g.sample_size(10);
    let f = lg_mode(make_grid(512, 16.0 * w).unwrap(), BeamSpec::new(w, 420.0, 2)).unwrap();
    let img = astigmatic_focus_image(&f, lens).unwrap();
    for (name, pool) in &pools {
        g.bench_function(BenchmarkId::new("image", name), |b| {
            b.iter(|| pool.install(|| astigmatic_focus_image(&f, lens).unwrap()))
        });
        g.bench_function(BenchmarkId::new("count", name), |b| {
            b.iter(|| pool.install(|| stripe_count(&img, lens).unwrap()))
        });
    }
    g.finish();
}

criterion_group!(benches, kernels);
criterion_main!(benches);
