use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use srp_core::branching::{total_population_law, GwProcess, OffspringLaw};
use srp_core::decay::minimal_invariant_closure;
use srp_core::exact::{
    closed_histogram, count_closed_by_cycle_cover, saw_census, DEFAULT_NODE_CAP, DEFAULT_SAW_BUDGET,
};
use srp_core::lattice::reflection_group;
use srp_core::regen::{cylinder_problem, extract_regen_chain};
use srp_core::samplers::{
    cylinder_windows, graph_windows, sample_closed_chains, sample_open_chains, Certification, MoveSet, SamplerConfig,
};
use srp_core::{CylinderLattice, Graph, GraphPermutation, VertexSet};

fn enumeration(c: &mut Criterion) {
    let g = Graph::grid(3, 3);
    c.bench_function("closed_histogram grid 3x3", |b| {
        b.iter(|| closed_histogram(black_box(&g), DEFAULT_NODE_CAP).unwrap())
    });
    let g = Graph::grid(4, 4);
    c.bench_function("cycle cover count grid 4x4", |b| {
        b.iter(|| count_closed_by_cycle_cover(black_box(&g)).unwrap())
    });
    let (patch, centre) = Graph::square_patch(10);
    c.bench_function("saw census Z2 length 10", |b| {
        b.iter(|| saw_census(black_box(&patch), centre, 10, true, DEFAULT_SAW_BUDGET).unwrap())
    });
}

fn sampling(c: &mut Criterion) {
    let g = Graph::grid(8, 8);
    let windows = graph_windows(&g, &g.all_vertices(), MoveSet::Windowed);
    let cfg = SamplerConfig {
        alpha: 1.0,
        sweeps: 100,
        burn_in: Some(0),
        ..Default::default()
    };
    c.bench_function("closed window chain grid 8x8, 100 sweeps", |b| {
        b.iter(|| sample_closed_chains(&g, &windows, &cfg, |img| img[0]))
    });
}

fn open_sample(lat: &CylinderLattice) -> srp_core::OpenCycleConfig {
    let problem = cylinder_problem(lat);
    let windows = cylinder_windows(lat, &problem.domain, MoveSet::Windowed);
    let cfg = SamplerConfig {
        alpha: 2.0,
        sweeps: 1,
        ..Default::default()
    };
    sample_open_chains(lat.graph(), &problem, &windows, &cfg, &Certification::Unsafe, |c| {
        c.clone()
    })
    .unwrap()
    .remove(0)
    .remove(0)
}

fn regeneration(c: &mut Criterion) {
    let lat = CylinderLattice::rect(16, 8, 2, 1 << 12).unwrap();
    let config = open_sample(&lat);
    c.bench_function("regeneration chain cylinder 16x8", |b| {
        b.iter(|| extract_regen_chain(&lat, black_box(&config)).unwrap())
    });

    let centre = lat.index_of(&[8, 0]).unwrap();
    let phi = reflection_group(&lat, centre);
    let g = lat.graph();
    let windows = cylinder_windows(&lat, &g.all_vertices(), MoveSet::Windowed);
    let cfg = SamplerConfig {
        alpha: 0.5,
        sweeps: 1,
        ..Default::default()
    };
    let image = sample_closed_chains(g, &windows, &cfg, |img| img.to_vec())
        .remove(0)
        .remove(0);
    let p = GraphPermutation::new(g, image).unwrap();
    let a = VertexSet::from_iter(lat.vertex_count(), [centre]);
    c.bench_function("invariant closure cylinder 16x8", |b| {
        b.iter_batched(
            || a.clone(),
            |a| minimal_invariant_closure(&p, &phi, &a),
            BatchSize::SmallInput,
        )
    });
}

fn branching(c: &mut Criterion) {
    let p = GwProcess::new(OffspringLaw::from_weights(vec![2, 1, 1]).unwrap(), 3);
    c.bench_function("total population law to 200", |b| {
        b.iter(|| total_population_law(black_box(&p), 200, false).unwrap())
    });
}

criterion_group!(benches, enumeration, sampling, regeneration, branching);
criterion_main!(benches);
