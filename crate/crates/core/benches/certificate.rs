use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use num_complex::Complex64;

use hopf_biherm::certificate::{run_certificate, CertificateConfig};
use hopf_biherm::deformation::positivity_sweep;
use hopf_biherm::groups::{cyclic_generator, fundamental_annulus_sample, ContractionParams, HopfGroupData, HopfGroupDocument};
use hopf_biherm::parallel::Execution;
use hopf_biherm::potentials::FlowSpec;

fn case_b() -> CertificateConfig {
    let data = HopfGroupData {
        contraction: ContractionParams::diagonal(Complex64::new(0.5, 0.0), Complex64::new(0.6, 0.0)),
        h_generators: vec![cyclic_generator(3)],
    };
    let mut cfg = CertificateConfig::new(HopfGroupDocument::from_data(&data));
    cfg.samples = 16;
    cfg.t = Some(0.1);
    cfg
}

fn certificate(c: &mut Criterion) {
    let mut group = c.benchmark_group("certificate_case_b_16");
    group.sample_size(10);
    for (name, mode) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        let mut cfg = case_b();
        cfg.execution = mode;
        group.bench_function(name, |b| b.iter(|| black_box(run_certificate(&cfg).unwrap().pass)));
    }
    group.finish();
}

fn sweep(c: &mut Criterion) {
    let cp = ContractionParams::diagonal(Complex64::new(0.5, 0.0), Complex64::new(0.6, 0.0));
    let spec = FlowSpec::from_contraction(&cp);
    let samples = fundamental_annulus_sample(7, &cp, 200);
    let grid: Vec<f64> = (0..=20).map(|k| k as f64 / 100.0).collect();
    let mut group = c.benchmark_group("sweep_case_b_200x21");
    group.sample_size(10);
    for (name, mode) in [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)] {
        group.bench_function(name, |b| b.iter(|| black_box(positivity_sweep(&spec, &grid, &samples, 1e-10, mode).unwrap())));
    }
    group.finish();
}

criterion_group!(benches, certificate, sweep);
criterion_main!(benches);
