use criterion::{criterion_group, criterion_main, Criterion};

use langevin_core::noise::NoiseStream;
use langevin_core::resnet::{
    generate_ellipses, probability_grid, Architecture, EllipseSpec, Scheme, Split, VerletNet, PARAM_COUNT,
};

fn random_net(scheme: Scheme) -> VerletNet {
    let mut s = NoiseStream::for_init(3, 0);
    let params = (0..PARAM_COUNT).map(|_| 0.5 * s.standard_normal()).collect();
    VerletNet::new(Architecture::standard(scheme), params).unwrap()
}

fn loss_and_grad(c: &mut Criterion) {
    let batch = generate_ellipses(&EllipseSpec::default(), 1).batch(Split::Train);
    let mut group = c.benchmark_group("full_batch_loss_and_grad");
    group.sample_size(20);
    for scheme in [Scheme::Verlet, Scheme::Euler] {
        let net = random_net(scheme);
        group.bench_function(scheme.as_str(), |b| b.iter(|| net.loss_and_grad(&batch)));
    }
    group.finish();
}

fn grid(c: &mut Criterion) {
    let net = random_net(Scheme::Verlet);
    let mut group = c.benchmark_group("probability_grid");
    group.sample_size(10);
    group.bench_function("verlet_81x81", |b| {
        b.iter(|| probability_grid(&net, (-2.0, 2.0), (-4.0, 4.0), (81, 81)))
    });
    group.finish();
}

criterion_group!(benches, loss_and_grad, grid);
criterion_main!(benches);
