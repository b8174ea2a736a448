use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};

use blocknet::linalg::gemm;
use blocknet::{
    build_dataset, compose, forward, forward_block, gen_spec, init_network, mlp_specs, rasterize, BaseModel, BlockSpec,
    Matrix, Rng, Task,
};

fn random(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = Rng::new(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.uniform(-1.0, 1.0)).collect())
}

fn kernels(c: &mut Criterion) {
    let a = random(64, 1024, 1);
    let w = random(200, 1024, 2);
    c.bench_function("gemm 64x1024 * 1024x200", |b| {
        let mut out = Matrix::zeros(64, 200);
        b.iter(|| gemm(1.0, a.view(), w.view().t(), 0.0, out.view_mut()));
    });

    let net = init_network(&mlp_specs(1024, &[200, 100, 50]), 3).unwrap();
    c.bench_function("forward NN-200-100-50 batch 64", |b| {
        b.iter(|| forward(&net, black_box(&a)).unwrap())
    });

    let bases: Vec<BaseModel> = (0..5)
        .map(|i| {
            BaseModel::new(
                Task::ALL[i],
                init_network(&mlp_specs(1024, &[200, 100, 50]), i as u64).unwrap(),
            )
        })
        .collect();
    let bn = compose(&bases, BlockSpec::BA_0_50_50, 4).unwrap();
    c.bench_function("forward BA-0-50-50 m=5 batch 64", |b| {
        b.iter(|| forward_block(&bn, black_box(&a)).unwrap())
    });

    c.bench_function("gen_spec + rasterize ang_tri_ln", |b| {
        b.iter_batched(
            || Rng::new(5),
            |mut rng| {
                let spec = gen_spec(Task::AngTriLn, 1, &mut rng).unwrap();
                rasterize(&spec, &mut rng).unwrap()
            },
            BatchSize::SmallInput,
        )
    });

    c.bench_function("build_dataset 256 crs_ncrs", |b| {
        b.iter(|| build_dataset(Task::CrsNcrs, 256, 6).unwrap())
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
