use fracperim::domain::{make_domain, BoundaryMode};
use fracperim::kernel::{build_kernel, cell_interaction, unit_kernel, KernelOptions};
use fracperim::special::gamma;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn max_rel(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

#[test]
fn unit_cells_in_one_dimension_match_closed_forms() {
    let d = make_domain(1, &[16], 16.0, BoundaryMode::Free, 0.5).unwrap();
    let k1: f64 = cell_interaction(&[1], &d).unwrap();
    let k2: f64 = cell_interaction(&[2], &d).unwrap();
    let r2 = 2f64.sqrt();
    assert!(rel(k1, 8.0 - 4.0 * r2) < 1e-14);
    assert!(rel(k2, 4.0 * (2.0 * r2 - 1.0 - 3f64.sqrt())) < 1e-14);
}

#[test]
fn planar_near_field_matches_polar_quadrature() {
    // Frozen from an independent 20-digit polar-coordinate quadrature about the singular point.
    let oracle = [
        ([1i64, 0], 3.64708751547324),
        ([1, 1], 0.676008398656892),
        ([2, 0], 0.203287672141628),
        ([2, 1], 0.15031451202016),
        ([2, 2], 0.0798081700962363),
    ];
    let uk = unit_kernel(2, 0.5);
    for (d, want) in oracle {
        assert!(rel(uk.eval(&d), want) < 1e-9, "{d:?}: {} vs {want}", uk.eval(&d));
    }
}

/// Σ_{δ'} K⁽ⁿ⁾(δ₁, δ') = π^{(n-1)/2} Γ((1+s)/2)/Γ((n+s)/2) · K⁽¹⁾(δ₁): integrating out the transverse axes.
fn transverse_sum(n: usize, s: f64, d1: i64, r: i64) -> f64 {
    let uk = unit_kernel(n, s);
    let alpha = n as f64 + s;
    let mut total = 0.0;
    if n == 2 {
        for j in -r..=r {
            total += uk.eval(&[d1, j]);
        }
        // Remaining columns by the continuum integral 2∫_{R+1/2}^∞ (d₁²+z²)^{-α/2} dz.
        let a = (d1 * d1) as f64;
        let z0 = r as f64 + 0.5;
        let mut f = |t: f64| {
            let z = z0 / t;
            (a + z * z).powf(-alpha / 2.0) * z0 / (t * t)
        };
        total += 2.0 * gauss_legendre_01(&mut f);
    } else {
        for j in -r..=r {
            for k in -r..=r {
                total += uk.eval(&[d1, j, k]);
            }
        }
        // Plane integral of (d₁²+|z|²)^{-α/2} minus its value over the summed square.
        let a = (d1 * d1) as f64;
        let plane = 2.0 * std::f64::consts::PI * a.powf(1.0 - alpha / 2.0) / (alpha - 2.0);
        let z0 = r as f64 + 0.5;
        let square = 4.0 * double_integral(&mut |x, y| (a + x * x + y * y).powf(-alpha / 2.0), z0);
        total += plane - square;
    }
    total
}

fn gauss_legendre_01(f: &mut impl FnMut(f64) -> f64) -> f64 {
    // Composite midpoint-free Gauss: 200 panels of 8 points on (0,1].
    let nodes = [
        (-0.9602898564975363, 0.1012285362903763),
        (-0.7966664774136267, 0.2223810344533745),
        (-0.5255324099163290, 0.3137066458778873),
        (-0.1834346424956498, 0.3626837833783620),
        (0.1834346424956498, 0.3626837833783620),
        (0.5255324099163290, 0.3137066458778873),
        (0.7966664774136267, 0.2223810344533745),
        (0.9602898564975363, 0.1012285362903763),
    ];
    let panels = 200;
    let h = 1.0 / panels as f64;
    let mut sum = 0.0;
    for p in 0..panels {
        let c = (p as f64 + 0.5) * h;
        for &(x, w) in &nodes {
            sum += 0.5 * h * w * f(c + 0.5 * h * x);
        }
    }
    sum
}

fn double_integral(f: &mut impl FnMut(f64, f64) -> f64, z0: f64) -> f64 {
    // ∫₀^{z0}∫₀^{z0} with panels graded toward the origin where the integrand varies fastest.
    let edges: Vec<f64> = {
        let mut e = vec![0.0];
        let mut x = 0.25;
        while x < z0 {
            e.push(x);
            x *= 1.5;
        }
        e.push(z0);
        e
    };
    let nodes = [
        (-0.9602898564975363, 0.1012285362903763),
        (-0.7966664774136267, 0.2223810344533745),
        (-0.5255324099163290, 0.3137066458778873),
        (-0.1834346424956498, 0.3626837833783620),
        (0.1834346424956498, 0.3626837833783620),
        (0.5255324099163290, 0.3137066458778873),
        (0.7966664774136267, 0.2223810344533745),
        (0.9602898564975363, 0.1012285362903763),
    ];
    let mut sum = 0.0;
    for wx in edges.windows(2) {
        for wy in edges.windows(2) {
            let (cx, hx) = (0.5 * (wx[0] + wx[1]), 0.5 * (wx[1] - wx[0]));
            let (cy, hy) = (0.5 * (wy[0] + wy[1]), 0.5 * (wy[1] - wy[0]));
            for &(x, a) in &nodes {
                for &(y, b) in &nodes {
                    sum += hx * hy * a * b * f(cx + hx * x, cy + hy * y);
                }
            }
        }
    }
    sum
}

#[test]
fn transverse_sum_rule_ties_higher_dimensions_to_the_line() {
    for (n, s, r) in [(2usize, 0.5, 2000i64), (2, 0.3, 2000), (3, 0.5, 150)] {
        let c = std::f64::consts::PI.powf((n as f64 - 1.0) / 2.0) * gamma((1.0 + s) / 2.0) / gamma((n as f64 + s) / 2.0);
        let line = unit_kernel(1, s);
        for d1 in [1i64, 2] {
            let got = transverse_sum(n, s, d1, r);
            let want = c * line.eval(&[d1]);
            assert!(rel(got, want) < 3e-8, "n={n} s={s} δ₁={d1}: {got} vs {want}");
        }
    }
}

#[test]
fn kernel_is_even_and_permutation_symmetric() {
    let uk = unit_kernel(3, 0.37);
    for d in [[1i64, 2, 0], [2, 1, 1], [3, 0, 1], [5, 4, 2]] {
        let base = uk.eval(&d);
        assert_eq!(uk.eval(&[-d[0], -d[1], -d[2]]), base);
        assert_eq!(uk.eval(&[d[2], d[0], d[1]]), base);
        assert_eq!(uk.eval(&[d[1], -d[2], d[0]]), base);
    }
}

#[test]
fn midpoint_bracketing_beyond_five_cells() {
    for n in 1..=3usize {
        for s in [0.2, 0.5, 0.8] {
            let uk = unit_kernel(n, s);
            let alpha = n as f64 + s;
            let mut worst: f64 = 0.0;
            for a in 0..8i64 {
                for b in 0..8i64 {
                    let d = [a, if n > 1 { b } else { 0 }, if n > 2 { (a + b) % 5 } else { 0 }];
                    let r = (d.iter().map(|x| x * x).sum::<i64>() as f64).sqrt();
                    if r < 3.0 {
                        continue;
                    }
                    let dev = (uk.eval(&d[..n]) / r.powf(-alpha) - 1.0).abs();
                    // Between three and five cells the curvature term α(s+2)/(12r²) can reach 8%.
                    assert!(dev < if r < 5.0 { 0.08 } else { 0.05 }, "n={n} s={s} {d:?}: {dev}");
                    worst = worst.max(dev);
                }
            }
            println!("n={n} s={s}: worst midpoint deviation {worst:.4}");
        }
    }
}

#[test]
fn kernel_decreases_along_axes_far_out() {
    let uk = unit_kernel(2, 0.5);
    let vals: Vec<f64> = (3..200).map(|k| uk.eval(&[k, 0])).collect();
    assert!(vals.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn periodic_kernel_dominates_the_free_kernel() {
    let d = make_domain(1, &[32], 1.0, BoundaryMode::Periodic, 0.5).unwrap();
    let k = build_kernel(&d, KernelOptions::default()).unwrap();
    for off in 1..=16isize {
        let free: f64 = cell_interaction(&[off], &d).unwrap();
        assert!(k.k(&[off]) > free, "offset {off}");
    }
}

#[test]
fn delta_field_reproduces_the_table() {
    for (n, p, mode) in
        [(1usize, 16usize, BoundaryMode::Periodic), (2, 8, BoundaryMode::Free), (2, 8, BoundaryMode::Periodic), (3, 4, BoundaryMode::Free)]
    {
        let d = make_domain(n, &vec![p; n], 1.0, mode, 0.5).unwrap();
        let k = build_kernel(&d, KernelOptions::default()).unwrap();
        let i = d.len() / 3;
        let mut delta = vec![0.0; d.len()];
        delta[i] = 1.0;
        let got = k.correlate(&delta).unwrap();
        let want: Vec<f64> = (0..d.len()).map(|j| k.pair(j, i)).collect();
        assert!(max_rel(&got, &want) < 1e-12, "n={n} {mode:?}");
    }
}

#[test]
fn correlate_matches_direct_double_loop() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for (n, p) in [(1usize, 16usize), (2, 8), (2, 16), (3, 4)] {
        for mode in [BoundaryMode::Periodic, BoundaryMode::Free] {
            let d = make_domain(n, &vec![p; n], 2.0, mode, 0.4).unwrap();
            let k = build_kernel(&d, KernelOptions::default()).unwrap();
            let field: Vec<f64> = (0..d.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
            let fast = k.correlate(&field).unwrap();
            let slow = k.correlate_direct(&field);
            assert!(max_rel(&fast, &slow) < 1e-10, "n={n} p={p} {mode:?}");
        }
    }
}

#[test]
fn correlate_is_linear_and_maps_constants_to_row_sums() {
    let d = make_domain(2, &[8, 8], 1.0, BoundaryMode::Periodic, 0.6).unwrap();
    let k = build_kernel(&d, KernelOptions::default()).unwrap();
    let zero = k.correlate(&vec![0.0; 64]).unwrap();
    assert!(zero.iter().all(|&x| x == 0.0));
    let c = k.correlate(&vec![2.5; 64]).unwrap();
    let dsum = k.row_sums()[0];
    assert!(c.iter().all(|&x| rel(x, 2.5 * dsum) < 1e-13));
    assert!(k.correlate(&vec![0.0; 63]).is_err());
}

#[test]
fn homogeneity_under_rescaling() {
    for mode in [BoundaryMode::Free, BoundaryMode::Periodic] {
        let d = make_domain(2, &[8, 8], 1.0, mode, 0.3).unwrap();
        let k = build_kernel(&d, KernelOptions::default()).unwrap();
        let lambda: f64 = 2.7;
        let k2 = build_kernel(&d.rescaled(lambda).unwrap(), KernelOptions::default()).unwrap();
        let f = lambda.powf(2.0 - 0.3);
        for off in [[1isize, 0], [3, 2], [4, 4], [-2, 1]] {
            assert!(rel(k2.k(&off), f * k.k(&off)) < 1e-6);
        }
        if let (Some(a), Some(b)) = (k.far(), k2.far()) {
            assert!(a.iter().zip(b).all(|(x, y)| rel(*y, f * x) < 1e-6));
        }
    }
}

#[test]
fn raising_the_lattice_cutoff_stays_within_the_tail_bound() {
    for (n, p) in [(1usize, 16usize), (2, 8)] {
        let d = make_domain(n, &vec![p; n], 1.0f64, BoundaryMode::Periodic, 0.5).unwrap();
        let lo = build_kernel(&d, KernelOptions { lattice_cutoff: Some(3), tail_tolerance: 1.0 }).unwrap();
        let hi = build_kernel(&d, KernelOptions { lattice_cutoff: Some(12), tail_tolerance: 1.0 }).unwrap();
        let bound = lo.tail_bound();
        for j in 1..d.len() {
            let off = d.offset(j, 0);
            assert!((lo.k(&off) - hi.k(&off)).abs() <= bound, "n={n} offset {off:?}");
        }
    }
}

#[test]
fn unattainable_tail_tolerance_is_reported() {
    let d = make_domain(2, &[8, 8], 1.0, BoundaryMode::Periodic, 0.5).unwrap();
    let r = build_kernel::<f64>(&d, KernelOptions { lattice_cutoff: Some(1), tail_tolerance: 1e-12 });
    assert!(matches!(r, Err(fracperim::Error::TailBound { .. })));
}

#[test]
fn far_weight_in_one_dimension_is_the_one_sided_closed_form() {
    let d = make_domain(1, &[64], 1.0f64, BoundaryMode::Free, 0.5).unwrap();
    let k = build_kernel(&d, KernelOptions::default()).unwrap();
    let h: f64 = 1.0 / 64.0;
    // Cell [0,h]: ∫₀^h∫_{-∞}^0 + ∫₀^h∫_1^∞ of |x-y|^{-3/2}.
    let left = 2.0 * 2.0 * h.sqrt();
    let right = 4.0 * (1.0 - (1.0 - h).sqrt());
    assert!(rel(k.far().unwrap()[0], left + right) < 1e-12);
}

#[test]
fn far_weight_plus_row_sum_is_the_unit_cell_perimeter_everywhere() {
    // Every lattice cell other than i is either inside the box or outside it.
    for (n, p) in [(1usize, 32usize), (2, 12), (3, 6)] {
        let d = make_domain(n, &vec![p; n], p as f64, BoundaryMode::Free, 0.5).unwrap();
        let k = build_kernel(&d, KernelOptions::default()).unwrap();
        let tot: Vec<f64> = (0..d.len()).map(|i| k.row_sums()[i] + k.far().unwrap()[i]).collect();
        let mean = tot.iter().sum::<f64>() / tot.len() as f64;
        let spread = tot.iter().fold(0.0f64, |m, &x| m.max(rel(x, mean)));
        assert!(spread < 1e-8, "n={n}: spread {spread:e}");
        if n == 1 {
            assert!(rel(mean, 8.0) < 1e-12);
        }
    }
}

#[test]
fn single_precision_kernel_tracks_double() {
    let d64 = make_domain(2, &[8, 8], 1.0f64, BoundaryMode::Free, 0.5).unwrap();
    let d32 = make_domain(2, &[8, 8], 1.0f32, BoundaryMode::Free, 0.5).unwrap();
    let k64 = build_kernel(&d64, KernelOptions::default()).unwrap();
    let k32 = build_kernel(&d32, KernelOptions::default()).unwrap();
    for i in 0..64 {
        assert!(rel(k32.row_sums()[i] as f64, k64.row_sums()[i]) < 1e-5);
    }
}
