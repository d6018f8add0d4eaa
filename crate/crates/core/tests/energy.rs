use fracperim::domain::{make_domain, BoundaryMode, LabelGrid, SoftCluster};
use fracperim::energy::{
    cluster_perimeter, flip_delta, interaction, perimeter, potential, relative_perimeter, soft_energy, soft_energy_and_gradient,
    ClusterState,
};
use fracperim::kernel::{build_kernel, KernelOptions};
use fracperim::{Error, Grid, Kernel};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    if b == 0.0 {
        a.abs()
    } else {
        (a - b).abs() / b.abs()
    }
}

fn kernel(n: usize, p: usize, l: f64, mode: BoundaryMode, s: f64) -> Kernel {
    let d = make_domain(n, &vec![p; n], l, mode, s).unwrap();
    build_kernel(&d, KernelOptions::default()).unwrap()
}

fn line_mask(len: usize, cells: &[usize]) -> Vec<bool> {
    let mut m = vec![false; len];
    for &c in cells {
        m[c] = true;
    }
    m
}

/// Labels in 0..=chambers, keeping the free-mode outer layer exterior.
fn random_grid(k: &Kernel, chambers: usize, rng: &mut ChaCha8Rng) -> Grid {
    let d = k.domain().clone();
    let labels =
        (0..d.len()).map(|i| if !d.is_periodic() && d.on_outer_layer(i) { 0 } else { rng.random_range(0..=chambers as u8) }).collect();
    LabelGrid::new(d, chambers, labels).unwrap()
}

fn random_mask(k: &Kernel, p: f64, rng: &mut ChaCha8Rng) -> Vec<bool> {
    let d = k.domain();
    (0..d.len()).map(|i| (d.is_periodic() || !d.on_outer_layer(i)) && rng.random_bool(p)).collect()
}

/// Σ_{i∈E} Σ_{j∈F} K(i-j), by explicit double loop.
fn brute_interaction(k: &Kernel, e: &[bool], f: &[bool]) -> f64 {
    let mut t = 0.0;
    for i in 0..e.len() {
        for j in 0..f.len() {
            if e[i] && f[j] {
                t += k.pair(i, j);
            }
        }
    }
    t
}

fn brute_perimeter(k: &Kernel, e: &[bool]) -> f64 {
    let c: Vec<bool> = e.iter().map(|&b| !b).collect();
    let far: f64 = (0..e.len()).filter(|&i| e[i]).map(|i| k.far_or_zero(i)).sum();
    brute_interaction(k, e, &c) + far
}

#[test]
fn unit_interval_and_its_double_match_closed_forms() {
    let k = kernel(1, 16, 16.0, BoundaryMode::Free, 0.5);
    let p1 = perimeter(&line_mask(16, &[6]), &k).unwrap();
    let p2 = perimeter(&line_mask(16, &[6, 7]), &k).unwrap();
    assert!(rel(p1, 8.0) < 1e-8, "{p1}");
    assert!(rel(p2, 8.0 * 2f64.sqrt()) < 1e-8, "{p2}");
    // Inclusion-exclusion against the adjacent-cell weight 8 - 4√2.
    assert!(rel(p2, 16.0 - 2.0 * (8.0 - 4.0 * 2f64.sqrt())) < 1e-8);
    let i = interaction(&line_mask(16, &[4]), &line_mask(16, &[6]), &k).unwrap();
    assert!(rel(i, 4.0 * (2.0 * 2f64.sqrt() - 1.0 - 3f64.sqrt())) < 1e-12);
}

#[test]
fn single_cell_cluster_has_energy_eight() {
    let k = kernel(1, 16, 16.0, BoundaryMode::Free, 0.5);
    let mut labels = vec![0u8; 16];
    labels[6] = 1;
    let g = LabelGrid::new(k.domain().clone(), 1, labels.clone()).unwrap();
    let b = cluster_perimeter(&g, &k).unwrap();
    assert!(rel(b.total, 8.0) < 1e-8);
    let g2 = LabelGrid::new(k.domain().clone(), 2, labels).unwrap();
    let b2 = cluster_perimeter(&g2, &k).unwrap();
    assert_eq!(b2.per_chamber[2], 0.0);
    assert_eq!(b2.pairwise[1][2], 0.0);
    assert!(rel(b2.total, b.total) < 1e-15);
    let sc = SoftCluster::from_grid(&g);
    assert!(rel(soft_energy(&sc, &k).unwrap(), 8.0) < 1e-8);
}

#[test]
fn empty_and_disjointness_rules() {
    let k = kernel(2, 8, 1.0, BoundaryMode::Free, 0.5);
    let empty = vec![false; 64];
    let mut e = empty.clone();
    e[9] = true;
    e[10] = true;
    assert_eq!(interaction(&e, &empty, &k).unwrap(), 0.0);
    assert_eq!(perimeter(&empty, &k).unwrap(), 0.0);
    assert!(potential(&empty, &k).unwrap().iter().all(|&v| v == 0.0));
    assert!(matches!(interaction(&e, &e, &k), Err(Error::NotDisjoint(9))));
    let mut edge = empty.clone();
    edge[3] = true;
    assert!(matches!(perimeter(&edge, &k), Err(Error::OuterLayer(3))));
}

#[test]
fn cluster_energy_matches_double_sum_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for mode in [BoundaryMode::Periodic, BoundaryMode::Free] {
        for (n, p) in [(1usize, 16usize), (2, 8)] {
            let k = kernel(n, p, 1.0, mode, 0.35);
            for _ in 0..3 {
                let g = random_grid(&k, 3, &mut rng);
                let b = cluster_perimeter(&g, &k).unwrap();
                let mut per = vec![];
                for h in 0..=3 {
                    let m = g.mask(h);
                    let want = if h == 0 && mode == BoundaryMode::Free {
                        brute_perimeter(&k, &m.iter().map(|&x| !x).collect::<Vec<_>>())
                    } else {
                        brute_perimeter(&k, &m)
                    };
                    assert!(rel(b.per_chamber[h], want) < 1e-10, "{mode:?} n={n} h={h}");
                    per.push(want);
                    let row: f64 = (0..=3).filter(|&j| j != h).map(|j| b.pairwise[h][j]).sum();
                    assert!(rel(row, b.per_chamber[h]) < 1e-9);
                }
                let half: f64 = b.per_chamber.iter().sum::<f64>() * 0.5;
                assert_eq!(half, b.total);
                assert!(rel(b.total, 0.5 * per.iter().sum::<f64>()) < 1e-10);
            }
        }
    }
}

#[test]
fn periodic_complement_symmetry_and_full_torus() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let k = kernel(2, 8, 1.0, BoundaryMode::Periodic, 0.6);
    let e = random_mask(&k, 0.4, &mut rng);
    let c: Vec<bool> = e.iter().map(|&b| !b).collect();
    assert!(rel(perimeter(&e, &k).unwrap(), perimeter(&c, &k).unwrap()) < 1e-12);
    assert!(perimeter(&vec![true; 64], &k).unwrap().abs() < 1e-9);
}

#[test]
fn flip_deltas_match_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for mode in [BoundaryMode::Periodic, BoundaryMode::Free] {
        let k = kernel(2, 8, 1.0, mode, 0.5);
        let mut e = random_mask(&k, 0.3, &mut rng);
        for _ in 0..20 {
            let i = loop {
                let i = rng.random_range(0..64);
                if mode == BoundaryMode::Periodic || !k.domain().on_outer_layer(i) {
                    break i;
                }
            };
            let before = perimeter(&e, &k).unwrap();
            let v = potential(&e, &k).unwrap();
            let delta = flip_delta(&e, &v, i, &k);
            e[i] = !e[i];
            let after = perimeter(&e, &k).unwrap();
            assert!((after - before - delta).abs() <= 1e-9 * before.max(1.0), "{mode:?}");
        }
    }
}

#[test]
fn potential_decays_away_from_the_set() {
    let k = kernel(2, 16, 1.0, BoundaryMode::Free, 0.5);
    let d = k.domain().clone();
    let mut e = vec![false; d.len()];
    e[d.index(&[3, 3])] = true;
    let v = potential(&e, &k).unwrap();
    let along: Vec<f64> = (4..15).map(|x| v[d.index(&[3, x])]).collect();
    assert!(along.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn cluster_state_deltas_match_recomputation() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for mode in [BoundaryMode::Periodic, BoundaryMode::Free] {
        let k = kernel(2, 8, 1.0, mode, 0.4);
        let g = random_grid(&k, 2, &mut rng);
        let mut st = ClusterState::new(g, &k).unwrap();
        let inner: Vec<usize> = (0..64).filter(|&i| mode == BoundaryMode::Periodic || !k.domain().on_outer_layer(i)).collect();
        for step in 0..30 {
            let before = st.energy();
            let i = inner[rng.random_range(0..inner.len())];
            let predicted = if step % 2 == 0 {
                let to = rng.random_range(0..=2);
                let p = st.relabel_delta(i, to);
                assert_eq!(st.relabel(i, to), p);
                p
            } else {
                let j = inner[rng.random_range(0..inner.len())];
                let p = st.swap_delta(i, j);
                let applied = st.swap(i, j);
                assert!((applied - p).abs() <= 1e-12 * before);
                p
            };
            let fresh = cluster_perimeter(st.grid(), &k).unwrap().total;
            assert!((fresh - before - predicted).abs() <= 1e-9 * before, "{mode:?} step {step}");
            assert!((st.energy() - fresh).abs() <= 1e-9 * fresh);
        }
    }
}

#[test]
fn localization_identity_of_the_relative_perimeter() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for mode in [BoundaryMode::Periodic, BoundaryMode::Free] {
        let k = kernel(2, 8, 1.0, mode, 0.5);
        for _ in 0..5 {
            let e = random_mask(&k, 0.4, &mut rng);
            let omega: Vec<bool> = (0..64).map(|_| rng.random_bool(0.5)).collect();
            let mut f = e.clone();
            for i in 0..64 {
                if omega[i] && (mode == BoundaryMode::Periodic || !k.domain().on_outer_layer(i)) {
                    f[i] = rng.random_bool(0.5);
                }
            }
            let lhs = perimeter(&e, &k).unwrap() - perimeter(&f, &k).unwrap();
            let rhs = relative_perimeter(&e, &omega, &k).unwrap() - relative_perimeter(&f, &omega, &k).unwrap();
            assert!((lhs - rhs).abs() <= 1e-9 * perimeter(&e, &k).unwrap());
        }
        let e = random_mask(&k, 0.4, &mut rng);
        assert_eq!(relative_perimeter(&e, &[false; 64], &k).unwrap(), 0.0);
        let full = relative_perimeter(&e, &[true; 64], &k).unwrap();
        assert!(rel(full, perimeter(&e, &k).unwrap()) < 1e-12);
    }
}

#[test]
fn perimeter_scales_with_the_box() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for mode in [BoundaryMode::Periodic, BoundaryMode::Free] {
        let k = kernel(2, 8, 1.0, mode, 0.3);
        let lambda: f64 = 2.75;
        let k2 = build_kernel(&k.domain().rescaled(lambda).unwrap(), KernelOptions::default()).unwrap();
        let e = random_mask(&k, 0.5, &mut rng);
        let ratio = perimeter(&e, &k2).unwrap() / perimeter(&e, &k).unwrap();
        assert!(rel(ratio, lambda.powf(2.0 - 0.3)) < 1e-6);
    }
}

#[test]
fn cut_inequalities_hold() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let k = kernel(2, 8, 1.0, BoundaryMode::Free, 0.5);
    for _ in 0..10 {
        let e = random_mask(&k, 0.5, &mut rng);
        let f = random_mask(&k, 0.5, &mut rng);
        let p = |m: Vec<bool>| perimeter(&m, &k).unwrap();
        let cap: Vec<bool> = (0..64).map(|i| e[i] && f[i]).collect();
        let minus: Vec<bool> = (0..64).map(|i| e[i] && !f[i]).collect();
        let cup: Vec<bool> = (0..64).map(|i| e[i] || f[i]).collect();
        let (pe, pf) = (p(e.clone()), p(f.clone()));
        let slack = 1e-12 * (pe + pf);
        assert!(p(cap.clone()) + p(minus) <= pe + 2.0 * pf + slack);
        assert!(p(cap) + p(cup) <= pe + pf + slack);
    }
}

#[test]
fn relaxed_energy_bridges_to_the_cluster_energy() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for mode in [BoundaryMode::Periodic, BoundaryMode::Free] {
        for (n, p) in [(1usize, 32usize), (2, 8)] {
            let k = kernel(n, p, 1.0, mode, 0.45);
            let g = random_grid(&k, 3, &mut rng);
            let sc = SoftCluster::from_grid(&g);
            let soft = soft_energy(&sc, &k).unwrap();
            let hard = cluster_perimeter(&g, &k).unwrap().total;
            assert!(rel(soft, hard) < 1e-10, "{mode:?} n={n}: {soft} vs {hard}");
        }
    }
}

#[test]
fn constant_fields_cost_nothing_on_the_torus() {
    let k = kernel(2, 8, 1.0, BoundaryMode::Periodic, 0.5);
    let sc = SoftCluster { domain: k.domain().clone(), fields: vec![vec![0.3; 64], vec![0.25; 64]] };
    let (e, g) = soft_energy_and_gradient(&sc, &k).unwrap();
    let scale = k.row_sums()[0];
    assert!(e.abs() < 1e-12 * scale);
    assert!(g.iter().flatten().all(|x| x.abs() < 1e-12 * scale));
}

#[test]
fn gradient_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for mode in [BoundaryMode::Periodic, BoundaryMode::Free] {
        let k = kernel(2, 8, 1.0, mode, 0.5);
        let fields: Vec<Vec<f64>> = (0..2).map(|_| (0..64).map(|_| rng.random_range(0.05..0.45)).collect()).collect();
        let sc = SoftCluster { domain: k.domain().clone(), fields };
        let (_, grad) = soft_energy_and_gradient(&sc, &k).unwrap();
        let scale = grad.iter().flatten().fold(0.0f64, |m, x| m.max(x.abs()));
        let step = 1e-6;
        let mut worst = 0.0f64;
        for h in 0..2 {
            for i in (0..64).step_by(5) {
                let mut up = sc.clone();
                up.fields[h][i] += step;
                let mut dn = sc.clone();
                dn.fields[h][i] -= step;
                let fd = (soft_energy(&up, &k).unwrap() - soft_energy(&dn, &k).unwrap()) / (2.0 * step);
                worst = worst.max((fd - grad[h][i]).abs() / scale);
            }
        }
        assert!(worst <= 1e-5, "{mode:?}: {worst}");
    }
}

#[test]
fn constraint_violations_are_rejected() {
    let k = kernel(1, 16, 1.0, BoundaryMode::Periodic, 0.5);
    let sc = SoftCluster { domain: k.domain().clone(), fields: vec![vec![0.7; 16], vec![0.6; 16]] };
    assert!(matches!(soft_energy(&sc, &k), Err(Error::Constraint(_))));
}

#[test]
fn breakdown_exports_seventeen_digits() {
    let k = kernel(1, 16, 16.0, BoundaryMode::Free, 0.5);
    let mut labels = vec![0u8; 16];
    labels[6] = 1;
    let g = LabelGrid::new(k.domain().clone(), 1, labels).unwrap();
    let b = cluster_perimeter(&g, &k).unwrap();
    let json: serde_json::Value = serde_json::from_str(&b.to_json()).unwrap();
    assert!(rel(json["total"].as_f64().unwrap(), 8.0) < 1e-8);
    assert_eq!(json["perChamber"].as_array().unwrap().len(), 2);
    assert_eq!(json["pairwise"][0][1].as_f64().unwrap(), b.pairwise[0][1]);
    let csv = b.to_csv();
    assert!(csv.starts_with("quantity,h,k,value\ntotal,,,"));
    assert_eq!(csv.lines().count(), 1 + 1 + 2 + 1);
}
