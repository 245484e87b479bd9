use criterion::{criterion_group, criterion_main, Criterion};
use qcal_core::numerics::{
    damped_cos, levenberg_marquardt, lorentzian, nelder_mead, oscillation_seed,
};

fn bench_levenberg_marquardt(c: &mut Criterion) {
    let model = lorentzian();
    let truth = [1.0, 5.0e9, 2.0e6, 0.1];
    let xs: Vec<f64> = (0..200)
        .map(|i| 5.0e9 - 10.0e6 + i as f64 * 0.1e6)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| model.eval(&truth, x)).collect();
    let seed = [1.1, 5.0e9 + 0.2e6, 2.2e6, 0.11];
    c.bench_function("lm_lorentzian_200pts", |b| {
        b.iter(|| levenberg_marquardt(&model, &seed, &xs, &ys).unwrap())
    });

    let damped = damped_cos();
    let truth = [0.5, 0.002, 0.4, 5_000.0, 0.5];
    let xs: Vec<f64> = (0..120).map(|i| i as f64 * 25.0).collect();
    let ys: Vec<f64> = xs.iter().map(|&x| damped.eval(&truth, x)).collect();
    let seed = [0.55, 0.0022, 0.43, 5_400.0, 0.52];
    c.bench_function("lm_damped_cos_120pts", |b| {
        b.iter(|| levenberg_marquardt(&damped, &seed, &xs, &ys).unwrap())
    });
}

fn bench_nelder_mead(c: &mut Criterion) {
    c.bench_function("nelder_mead_quadratic_4d", |b| {
        b.iter(|| {
            let mut f = |x: &[f64]| x.iter().map(|v| (v - 0.3) * (v - 0.3)).sum::<f64>();
            nelder_mead(&mut f, &[0.0; 4], &[0.5; 4], 2000, 1e-12).unwrap()
        })
    });
}

fn bench_oscillation_seed(c: &mut Criterion) {
    let xs: Vec<f64> = (0..128).map(|i| i as f64).collect();
    let ys: Vec<f64> = xs
        .iter()
        .map(|&x| 0.5 + 0.4 * (0.13 * x + 0.7).cos())
        .collect();
    c.bench_function("oscillation_seed_128pts", |b| {
        b.iter(|| oscillation_seed(&xs, &ys).unwrap())
    });
}

criterion_group!(
    benches,
    bench_levenberg_marquardt,
    bench_nelder_mead,
    bench_oscillation_seed
);
criterion_main!(benches);
