use fracperim::domain::{make_domain, seed_cluster, volumes, BoundaryMode, LabelGrid, SeedDescriptor, SoftCluster, VolumeVector};
use fracperim::energy::{cluster_perimeter, ClusterState};
use fracperim::kernel::{build_kernel, KernelOptions};
use fracperim::solver::{
    anneal, binarize, constraint_residual, exhaustive_min, minimize, project_constraints, repair_volumes, AnnealSchedule, RepairOptions,
    SolveConfig,
};
use fracperim::{Error, Grid, Kernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn kernel(n: usize, p: usize, mode: BoundaryMode, s: f64) -> Kernel {
    let d = make_domain(n, &vec![p; n], 1.0, mode, s).unwrap();
    build_kernel(&d, KernelOptions::default()).unwrap()
}

fn cells(k: &Kernel, c: usize) -> f64 {
    c as f64 * k.domain().cell_volume()
}

#[test]
fn projection_is_idempotent_on_feasible_input() {
    let k = kernel(2, 16, BoundaryMode::Periodic, 0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fields: Vec<Vec<f64>> = (0..2).map(|_| (0..256).map(|_| rng.random_range(0.0..0.5)).collect()).collect();
    let sc = SoftCluster { domain: k.domain().clone(), fields };
    let m = sc.masses();
    let p = project_constraints(&sc, &m).unwrap();
    let worst = sc.fields.iter().flatten().zip(p.fields.iter().flatten()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
    assert!(worst <= 1e-12, "{worst}");
}

#[test]
fn uniform_fields_project_to_uniform_fields() {
    let k = kernel(2, 16, BoundaryMode::Periodic, 0.5);
    let sc = SoftCluster { domain: k.domain().clone(), fields: vec![vec![0.5; 256], vec![0.1; 256]] };
    let p = project_constraints(&sc, &[0.2, 0.3]).unwrap();
    for (f, want) in p.fields.iter().zip([0.2, 0.3]) {
        assert!(f.iter().all(|&x| (x - want).abs() < 1e-12));
    }
}

#[test]
fn random_infeasible_input_projects_within_tolerance() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for mode in [BoundaryMode::Periodic, BoundaryMode::Free] {
        let k = kernel(2, 16, mode, 0.5);
        for _ in 0..5 {
            let fields: Vec<Vec<f64>> = (0..3).map(|_| (0..256).map(|_| rng.random_range(-0.5..1.5)).collect()).collect();
            let sc = SoftCluster { domain: k.domain().clone(), fields };
            let m = [cells(&k, 40), cells(&k, 25), cells(&k, 60)];
            let p = project_constraints(&sc, &m).unwrap();
            assert!(constraint_residual(&p, &m) <= 1e-10, "{mode:?}");
            let again = project_constraints(&p, &m).unwrap();
            let moved = p.fields.iter().flatten().zip(again.fields.iter().flatten()).fold(0.0f64, |a, (x, y)| a.max((x - y).abs()));
            assert!(moved <= 1e-10);
            if mode == BoundaryMode::Free {
                for i in (0..256).filter(|&i| k.domain().on_outer_layer(i)) {
                    assert!(p.fields.iter().all(|f| f[i] == 0.0));
                }
            }
        }
    }
    let k = kernel(1, 16, BoundaryMode::Periodic, 0.5);
    let sc = SoftCluster { domain: k.domain().clone(), fields: vec![vec![0.0; 16]] };
    assert!(matches!(project_constraints(&sc, &[1.5]), Err(Error::Infeasible(_))));
}

#[test]
fn binarize_takes_the_argmax_with_low_index_ties() {
    let k = kernel(1, 8, BoundaryMode::Periodic, 0.5);
    let d = k.domain().clone();
    let g = LabelGrid::new(d.clone(), 2, vec![0, 1, 2, 2, 1, 0, 0, 1]).unwrap();
    assert_eq!(binarize(&SoftCluster::from_grid(&g)), g);
    let tie = SoftCluster { domain: d.clone(), fields: vec![vec![1.0 / 3.0; 8], vec![1.0 / 3.0; 8]] };
    assert!(binarize(&tie).labels().iter().all(|&l| l == 0));
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let fields: Vec<Vec<f64>> = (0..2).map(|_| (0..8).map(|_| rng.random_range(0.0..0.5)).collect()).collect();
    let sc = SoftCluster { domain: d, fields };
    let b = binarize(&sc);
    for i in 0..8 {
        let vals = [1.0 - sc.fields[0][i] - sc.fields[1][i], sc.fields[0][i], sc.fields[1][i]];
        let want = (0..3).fold(0, |best, h| if vals[h] > vals[best] { h } else { best });
        assert_eq!(b.label(i), want);
    }
}

#[test]
fn repair_is_identity_on_correct_volumes() {
    let k = kernel(2, 16, BoundaryMode::Periodic, 0.5);
    let d = k.domain().clone();
    let m = vec![cells(&k, 21)];
    let g = seed_cluster(&d, 1, &SeedDescriptor::Balls { centers: vec![vec![0.5, 0.5]], volumes: m.clone() }).unwrap();
    let r = repair_volumes(&g, &VolumeVector::new(m, &d).unwrap(), &k, RepairOptions::default()).unwrap();
    assert_eq!(r.grid, g);
    assert_eq!(r.delta_energy, 0.0);
    assert!(r.moves.is_empty());
}

#[test]
fn one_cell_surplus_is_a_single_flip() {
    let k = kernel(2, 16, BoundaryMode::Free, 0.5);
    let d = k.domain().clone();
    let g = seed_cluster(&d, 1, &SeedDescriptor::Balls { centers: vec![vec![0.5, 0.5]], volumes: vec![cells(&k, 21)] }).unwrap();
    let st = ClusterState::new(g.clone(), &k).unwrap();
    let m = VolumeVector::new(vec![cells(&k, 20)], &d).unwrap();
    let r = repair_volumes(&g, &m, &k, RepairOptions::default()).unwrap();
    assert_eq!(r.moves.len(), 1);
    let mv = &r.moves[0];
    assert_eq!((mv.from, mv.to), (1, 0));
    let before = cluster_perimeter(&g, &k).unwrap().total;
    let after = cluster_perimeter(&r.grid, &k).unwrap().total;
    assert!((after - before - st.relabel_delta(mv.cell, 0)).abs() < 1e-10 * before);
    assert!((r.delta_energy - (after - before)).abs() < 1e-10 * before);
    assert!(r.certified);
}

#[test]
fn repair_restores_exact_volumes_reproducibly() {
    let k = kernel(2, 16, BoundaryMode::Periodic, 0.4);
    let d = k.domain().clone();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for trial in 0..4 {
        let m = vec![cells(&k, 60), cells(&k, 70)];
        let mut g =
            seed_cluster(&d, 2, &SeedDescriptor::Balls { centers: vec![vec![0.3, 0.3], vec![0.72, 0.7]], volumes: m.clone() }).unwrap();
        // Perturb up to three boundary cells per chamber.
        for h in 1..=2 {
            for _ in 0..rng.random_range(1..=3) {
                let b = fracperim::domain::boundary_cells(&g, h);
                let i = (0..256).filter(|&i| b[i]).nth(trial).unwrap();
                g.set(i, 0);
            }
        }
        let vv = VolumeVector::new(m.clone(), &d).unwrap();
        let r1 = repair_volumes(&g, &vv, &k, RepairOptions::default()).unwrap();
        let r2 = repair_volumes(&g, &vv, &k, RepairOptions::default()).unwrap();
        assert_eq!(volumes(&r1.grid), m);
        assert_eq!(r1.moves, r2.moves);
        assert_eq!(r1.grid, r2.grid);
    }
    let g = seed_cluster(&d, 1, &SeedDescriptor::Balls { centers: vec![vec![0.5, 0.5]], volumes: vec![cells(&k, 40)] }).unwrap();
    let far_off = VolumeVector::new(vec![cells(&k, 20)], &d).unwrap();
    assert!(matches!(repair_volumes(&g, &far_off, &k, RepairOptions::default()), Err(Error::VolumeBudget { .. })));
}

#[test]
fn exhaustive_minimizers_of_small_instances() {
    let k = kernel(1, 8, BoundaryMode::Periodic, 0.5);
    let (g, e) = exhaustive_min(&k, &[cells(&k, 3)]).unwrap();
    let ones: Vec<usize> = (0..8).filter(|&i| g.label(i) == 1).collect();
    let contiguous = (0..8).any(|start| (0..3).all(|t| ones.contains(&((start + t) % 8))));
    assert!(contiguous, "{:?}", g.labels());
    assert!((e - cluster_perimeter(&g, &k).unwrap().total).abs() < 1e-12 * e);

    let k = kernel(2, 4, BoundaryMode::Periodic, 0.5);
    let (g, _) = exhaustive_min(&k, &[cells(&k, 4)]).unwrap();
    let ones: Vec<[usize; 3]> = (0..16).filter(|&i| g.label(i) == 1).map(|i| g.domain().coords(i)).collect();
    let block = (0..4).any(|r| (0..4).any(|c| ones.iter().all(|x| (x[0] + 4 - r) % 4 < 2 && (x[1] + 4 - c) % 4 < 2)));
    assert!(block, "{:?}", g.labels());

    let (g, e) = exhaustive_min(&k, &[0.0]).unwrap();
    assert!(g.labels().iter().all(|&l| l == 0));
    assert!(e.abs() < 1e-9);

    let big = kernel(2, 8, BoundaryMode::Periodic, 0.5);
    assert!(matches!(exhaustive_min(&big, &[cells(&big, 20)]), Err(Error::SearchSpace(_))));
}

fn random_counts_grid(k: &Kernel, counts: &[usize], seed: u64) -> Grid {
    let d = k.domain();
    let m: Vec<f64> = counts.iter().map(|&c| cells(k, c)).collect();
    seed_cluster(d, counts.len(), &SeedDescriptor::Random { volumes: Some(m), seed }).unwrap()
}

#[test]
fn anneal_reaches_the_enumerated_optimum_on_tiny_grids() {
    for (n, p, counts) in [(2usize, 4usize, vec![4usize]), (2, 4, vec![3, 5]), (1, 12, vec![3, 4])] {
        let k = kernel(n, p, BoundaryMode::Periodic, 0.5);
        let m: Vec<f64> = counts.iter().map(|&c| cells(&k, c)).collect();
        let (_, best) = exhaustive_min(&k, &m).unwrap();
        let vv = VolumeVector::new(m, k.domain()).unwrap();
        for seed in 0..3 {
            let g = random_counts_grid(&k, &counts, seed);
            let out = anneal(&g, &vv, &k, AnnealSchedule::default(), seed).unwrap();
            assert_eq!(out.counts(), g.counts());
            let e = cluster_perimeter(&out, &k).unwrap().total;
            assert!((e - best).abs() <= 1e-9 * best, "n={n} {counts:?} seed {seed}: {e} vs {best}");
        }
    }
}

#[test]
fn zero_temperature_anneal_leaves_optima_alone_and_is_deterministic() {
    let k = kernel(2, 4, BoundaryMode::Periodic, 0.5);
    let m = vec![cells(&k, 4)];
    let (opt, _) = exhaustive_min(&k, &m).unwrap();
    let vv = VolumeVector::new(m, k.domain()).unwrap();
    let cold = AnnealSchedule { steps: 0, t0: 0.0, tail: 500, polish: false };
    assert_eq!(anneal(&opt, &vv, &k, cold, 7).unwrap(), opt);

    let k = kernel(2, 16, BoundaryMode::Periodic, 0.5);
    let g = random_counts_grid(&k, &[30, 30], 5);
    let vv = VolumeVector::new(volumes(&g), k.domain()).unwrap();
    let sched = AnnealSchedule { steps: 3000, t0: 0.3, tail: 1000, polish: false };
    let a = anneal(&g, &vv, &k, sched, 42).unwrap();
    let b = anneal(&g, &vv, &k, sched, 42).unwrap();
    assert_eq!(a, b);
    assert!(cluster_perimeter(&a, &k).unwrap().total <= cluster_perimeter(&g, &k).unwrap().total);
}

#[test]
fn zero_iteration_budget_returns_the_repaired_seed() {
    let k = kernel(2, 16, BoundaryMode::Periodic, 0.5);
    let m = vec![cells(&k, 30)];
    let init = SeedDescriptor::Balls { centers: vec![vec![0.5, 0.5]], volumes: m.clone() };
    let mut cfg = SolveConfig::new(m, init.clone());
    cfg.max_iters = 0;
    let r = minimize(&cfg, &k).unwrap();
    assert_eq!(r.grid, seed_cluster(k.domain(), 1, &init).unwrap());
    assert_eq!(r.trace.len(), 1);
}

#[test]
fn single_chamber_from_a_ball_stays_a_disk() {
    let k = kernel(2, 64, BoundaryMode::Periodic, 0.5);
    let m = vec![0.1];
    let init = SeedDescriptor::Balls { centers: vec![vec![0.5, 0.5]], volumes: m.clone() };
    let disk = seed_cluster(k.domain(), 1, &init).unwrap();
    let disk_e = cluster_perimeter(&disk, &k).unwrap().total;
    let r = minimize(&SolveConfig::new(m.clone(), init), &k).unwrap();
    assert_eq!(r.grid.counts(), disk.counts());
    assert!((r.energy - disk_e).abs() <= 0.03 * disk_e, "{} vs {disk_e}", r.energy);
    assert!(r.trace.windows(2).all(|w| w[1].energy <= w[0].energy + 1e-12 * w[0].energy.abs()));
    // Every chamber cell lies within two cells of the disk of equal area.
    let d = k.domain();
    let radius = (0.1 / std::f64::consts::PI).sqrt();
    let h = d.cell_size();
    for i in 0..d.len() {
        let dist = d.point_distance(i, &[0.5, 0.5]);
        if r.grid.label(i) == 1 {
            assert!(dist <= radius + 2.0 * h);
        } else {
            assert!(dist >= radius - 2.0 * h);
        }
    }
}

#[test]
fn two_equal_chambers_merge_into_a_double_bubble() {
    let k = kernel(2, 32, BoundaryMode::Free, 0.5);
    let m = vec![0.06, 0.06];
    // Balls just touching.
    let centers = vec![vec![0.3615, 0.5], vec![0.6385, 0.5]];
    let init = SeedDescriptor::Balls { centers, volumes: m.clone() };
    let seed = seed_cluster(k.domain(), 2, &init).unwrap();
    let e0 = cluster_perimeter(&seed, &k).unwrap().total;
    let r = minimize(&SolveConfig::new(m, init), &k).unwrap();
    assert!(r.energy < e0, "{} vs {e0}", r.energy);
    let b = cluster_perimeter(&r.grid, &k).unwrap();
    assert!(b.pairwise[1][2] > 0.0);
    let d = k.domain();
    let touching = (0..d.len()).any(|i| {
        r.grid.label(i) == 1 && (0..2).any(|a| [-1, 1].iter().any(|&s| d.neighbor(i, a, s).is_some_and(|j| r.grid.label(j) == 2)))
    });
    assert!(touching, "chambers share no interface");
}

#[test]
fn repair_regrows_an_erased_chamber() {
    let k = kernel(1, 12, BoundaryMode::Periodic, 0.5);
    let g = LabelGrid::new(k.domain().clone(), 1, vec![0; 12]).unwrap();
    let vv = VolumeVector::new(vec![cells(&k, 3)], k.domain()).unwrap();
    let opts = RepairOptions { budget: 1.0, ..RepairOptions::default() };
    let r = repair_volumes(&g, &vv, &k, opts).unwrap();
    assert_eq!(r.grid.counts(), vec![9, 3]);
    let ones: Vec<usize> = (0..12).filter(|&i| r.grid.label(i) == 1).collect();
    assert!((0..12).any(|s| (0..3).all(|t| ones.contains(&((s + t) % 12)))), "{ones:?}");
}
