use fracperim::domain::{
    boundary_cells, make_domain, parse_grid, parse_soft, relative_distance, seed_cluster, serialize_grid, serialize_soft, volumes,
    BoundaryMode, LabelGrid, SeedDescriptor, SoftCluster, VolumeVector,
};
use fracperim::{Domain, Error, Grid, GridF32};
use proptest::prelude::*;

fn domain(n: usize, p: usize, l: f64, mode: BoundaryMode) -> Domain {
    make_domain(n, &vec![p; n], l, mode, 0.5).unwrap()
}

fn arb_grid() -> impl Strategy<Value = Grid> {
    (1usize..=3, 2usize..=6, 0usize..=4, any::<bool>(), 0.1f64..10.0).prop_flat_map(|(n, p, chambers, free, l)| {
        let mode = if free { BoundaryMode::Free } else { BoundaryMode::Periodic };
        let d = domain(n, p, l, mode);
        let len = d.len();
        proptest::collection::vec(0..=chambers as u8, len).prop_map(move |mut labels| {
            for (i, x) in labels.iter_mut().enumerate() {
                if free && d.on_outer_layer(i) {
                    *x = 0;
                }
            }
            LabelGrid::new(d.clone(), chambers, labels).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn grids_round_trip(g in arb_grid()) {
        let bytes = serialize_grid(&g);
        let back: Grid = parse_grid(&bytes).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(serialize_grid(&back), bytes);
    }

    #[test]
    fn soft_clusters_round_trip(g in arb_grid(), w in 0.0f64..1.0) {
        let mut sc = SoftCluster::from_grid(&g);
        for f in &mut sc.fields {
            for x in f.iter_mut() {
                *x *= w;
            }
        }
        let back: SoftCluster<f64> = parse_soft(&serialize_soft(&sc)).unwrap();
        prop_assert_eq!(&back.domain, &sc.domain);
        prop_assert_eq!(&back.fields, &sc.fields);
    }

    #[test]
    fn relative_distance_counts_both_labels(g in arb_grid(), flips in proptest::collection::vec(any::<prop::sample::Index>(), 0..5)) {
        let mut other = g.clone();
        let d = g.domain();
        let movable: Vec<usize> = (0..d.len()).filter(|&i| d.is_periodic() || !d.on_outer_layer(i)).collect();
        if g.chambers() > 0 && !movable.is_empty() {
            for f in &flips {
                let i = movable[f.index(movable.len())];
                other.set(i, (other.label(i) + 1) % (g.chambers() + 1));
            }
        }
        let changed = (0..d.len()).filter(|&i| g.label(i) != other.label(i)).count();
        let dist = relative_distance(&g, &other, &vec![true; d.len()]).unwrap();
        prop_assert!((dist - 2.0 * changed as f64 * d.cell_volume()).abs() < 1e-12);
    }
}

#[test]
fn single_precision_grids_share_the_format() {
    let d = domain(2, 4, 1.0, BoundaryMode::Periodic);
    let g = LabelGrid::new(d, 1, (0..16).map(|i| (i % 2) as u8).collect()).unwrap();
    let g32: GridF32 = parse_grid(&serialize_grid(&g)).unwrap();
    assert_eq!(g32.labels(), g.labels());
    assert_eq!(serialize_grid(&g32), serialize_grid(&g));
}

#[test]
fn make_domain_rejects_bad_inputs() {
    let ok = |n: usize, dims: &[usize], l: f64, s: f64| make_domain(n, dims, l, BoundaryMode::Periodic, s);
    assert!(matches!(ok(4, &[2; 4], 1.0, 0.5), Err(Error::Domain(_))));
    assert!(matches!(ok(2, &[4], 1.0, 0.5), Err(Error::Domain(_))));
    assert!(matches!(ok(2, &[4, 8], 1.0, 0.5), Err(Error::Domain(_))));
    assert!(matches!(ok(1, &[1], 1.0, 0.5), Err(Error::Domain(_))));
    assert!(matches!(ok(1, &[4], 1.0, 1.0), Err(Error::Range { name: "s", .. })));
    assert!(matches!(ok(1, &[4], 1.0, 0.0), Err(Error::Range { name: "s", .. })));
    assert!(matches!(ok(1, &[4], 0.0, 0.5), Err(Error::Range { name: "L", .. })));
    assert!(matches!(ok(1, &[4], f64::INFINITY, 0.5), Err(Error::Range { name: "L", .. })));
    let d = ok(3, &[4, 4, 4], 2.0, 0.3).unwrap();
    assert_eq!((d.len(), d.cell_size(), d.cell_volume()), (64, 0.5, 0.125));
}

#[test]
fn label_grids_validate_labels_and_the_outer_layer() {
    let free = domain(2, 4, 1.0, BoundaryMode::Free);
    assert!(matches!(LabelGrid::new(free.clone(), 1, vec![0; 15]), Err(Error::Truncated { expected: 16, found: 15 })));
    let mut labels = vec![0u8; 16];
    labels[5] = 2;
    assert!(matches!(LabelGrid::new(free.clone(), 1, labels.clone()), Err(Error::LabelOutOfRange { label: 2, n: 1 })));
    labels[5] = 0;
    labels[0] = 1;
    assert!(matches!(LabelGrid::new(free.clone(), 1, labels.clone()), Err(Error::OuterLayer(0))));
    assert!(LabelGrid::new(free.with_mode(BoundaryMode::Periodic), 1, labels).is_ok());
}

#[test]
fn corrupt_files_are_rejected() {
    let d = domain(1, 8, 1.0, BoundaryMode::Periodic);
    let g = LabelGrid::new(d, 2, vec![0, 1, 2, 0, 1, 2, 0, 1]).unwrap();
    let bytes = serialize_grid(&g);
    assert!(matches!(parse_grid::<f64>(&bytes[..bytes.len() - 1]), Err(Error::Truncated { .. })));
    let mut extra = bytes.clone();
    extra.push(0);
    assert!(matches!(parse_grid::<f64>(&extra), Err(Error::Format(_))));
    let mut magic = bytes.clone();
    magic[3] = b'S';
    assert!(matches!(parse_grid::<f64>(&magic), Err(Error::Format(_))));
    let mut label = bytes.clone();
    *label.last_mut().unwrap() = 7;
    assert!(matches!(parse_grid::<f64>(&label), Err(Error::LabelOutOfRange { .. })));
    assert!(parse_soft::<f64>(&bytes).is_err());
}

#[test]
fn ball_seeds_hit_their_cell_counts() {
    let d = domain(2, 32, 1.0, BoundaryMode::Free);
    let m = vec![0.05, 0.08];
    let g = seed_cluster(&d, 2, &SeedDescriptor::Balls { centers: vec![vec![0.3, 0.5], vec![0.7, 0.5]], volumes: m.clone() }).unwrap();
    let want = VolumeVector::new(m, &d).unwrap().cell_counts(&d).unwrap();
    assert_eq!(g.counts()[1..], want[..]);
    // Each chamber is one contiguous blob around its center.
    for (h, c) in [(1, [0.3, 0.5]), (2, [0.7, 0.5])] {
        let far = (0..d.len()).filter(|&i| g.label(i) == h).map(|i| d.point_distance(i, &c)).fold(0.0, f64::max);
        assert!(far < 0.2, "chamber {h} reaches {far}");
    }
}

#[test]
fn random_seeds_are_reproducible() {
    let d = domain(2, 16, 1.0, BoundaryMode::Periodic);
    let desc = |seed| SeedDescriptor::Random { volumes: Some(vec![0.25, 0.125]), seed };
    let a = seed_cluster(&d, 2, &desc(3)).unwrap();
    assert_eq!(a, seed_cluster(&d, 2, &desc(3)).unwrap());
    assert_ne!(a, seed_cluster(&d, 2, &desc(4)).unwrap());
    assert_eq!(a.counts(), vec![160, 64, 32]);
    assert_eq!(volumes(&a), vec![0.25, 0.125]);
}

#[test]
fn volume_vectors_check_feasibility() {
    let d = domain(2, 8, 1.0, BoundaryMode::Free);
    assert!(matches!(VolumeVector::new(vec![0.0], &d), Err(Error::Infeasible(_))));
    assert!(matches!(VolumeVector::new(vec![0.6, 0.5], &d), Err(Error::Infeasible(_))));
    // 36 interior cells of 64.
    let big = VolumeVector::new(vec![0.6], &d).unwrap();
    assert!(matches!(big.cell_counts(&d), Err(Error::Infeasible(_))));
    let p = domain(2, 8, 1.0, BoundaryMode::Periodic);
    assert_eq!(VolumeVector::new(vec![1.0], &p).unwrap().cell_counts(&p).unwrap(), vec![64]);
}

#[test]
fn boundary_cells_of_a_block() {
    let d = domain(2, 6, 1.0, BoundaryMode::Free);
    let block = |i: usize| {
        let c = d.coords(i);
        u8::from((1..4).contains(&c[0]) && (1..4).contains(&c[1]))
    };
    let g = LabelGrid::new(d.clone(), 1, (0..36).map(block).collect()).unwrap();
    let b = boundary_cells(&g, 1);
    assert_eq!(b.iter().filter(|&&x| x).count(), 8);
    assert!(!b[d.index(&[2, 2])]);
}
