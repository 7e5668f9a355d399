use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use squeeze_core::oracle::{gaussian_kraus_measure, EnsembleState};
use squeeze_core::protocol::{compare_preparations, run_protocol};
use squeeze_core::spin::{prepare_fiducial, Fiducial};
use squeeze_core::{Preparation, ProtocolConfig, SpinQuantum};

fn protocol(c: &mut Criterion) {
    let f = SpinQuantum::integer(4).unwrap();
    for p in Preparation::ALL {
        let cfg = ProtocolConfig::new(f, p, 300.0, 3.0);
        c.bench_function(&format!("run_protocol/{p}/3000_steps"), |b| b.iter(|| run_protocol(black_box(&cfg)).unwrap()));
    }
    let base = ProtocolConfig::new(f, Preparation::Scs, 300.0, 2.0);
    let fs: Vec<SpinQuantum> = (1..=4).map(|v| SpinQuantum::integer(v).unwrap()).collect();
    c.bench_function("compare_preparations/f1-4", |b| {
        b.iter(|| compare_preparations(black_box(&base), &Preparation::ALL, &fs).unwrap())
    });
}

fn oracle(c: &mut Criterion) {
    for (fv, n) in [(1, 4), (2, 3), (4, 3)] {
        let f = SpinQuantum::integer(fv).unwrap();
        let s = EnsembleState::product(&prepare_fiducial(Fiducial::Cat, f, None).unwrap(), n).unwrap();
        c.bench_function(&format!("kraus_measure/f{fv}_n{n}"), |b| {
            b.iter(|| gaussian_kraus_measure(black_box(&s), 0.1, 0.0).unwrap())
        });
    }
}

criterion_group!(benches, protocol, oracle);
criterion_main!(benches);
