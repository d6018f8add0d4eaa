use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{BoundaryMode, DomainSpec, LabelGrid, VolumeVector};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::unit_ball_volume;

#[derive(Clone, Debug, PartialEq)]
pub enum SeedDescriptor<T> {
    /// One ball per chamber, each holding exactly the cell count of its volume.
    Balls { centers: Vec<Vec<T>>, volumes: Vec<T> },
    /// Random labels; with volumes the counts are exact, otherwise labels are iid uniform.
    Random { volumes: Option<Vec<T>>, seed: u64 },
}

fn allowed<T: Real>(d: &DomainSpec<T>) -> Vec<usize> {
    (0..d.len()).filter(|&i| d.mode() == BoundaryMode::Periodic || !d.on_outer_layer(i)).collect()
}

pub fn seed_cluster<T: Real>(domain: &DomainSpec<T>, chambers: usize, desc: &SeedDescriptor<T>) -> Result<LabelGrid<T>> {
    let mut grid = LabelGrid::empty(domain.clone(), chambers);
    match desc {
        SeedDescriptor::Balls { centers, volumes } => {
            if centers.len() != chambers || volumes.len() != chambers {
                return Err(Error::Infeasible(format!("{} centers and {} volumes for {chambers} chambers", centers.len(), volumes.len())));
            }
            let vv = VolumeVector::new(volumes.clone(), domain)?;
            let counts = vv.cell_counts(domain)?;
            let n = domain.n();
            let radii: Vec<f64> = volumes.iter().map(|m| (m.f64() / unit_ball_volume(n)).powf(1.0 / n as f64)).collect();
            for a in 0..chambers {
                if centers[a].len() != n {
                    return Err(Error::Infeasible(format!("center {a} has {} coordinates", centers[a].len())));
                }
                for b in 0..a {
                    let mut d2 = 0.0;
                    for k in 0..n {
                        let mut v = centers[a][k].f64() - centers[b][k].f64();
                        if domain.is_periodic() {
                            let l = domain.side_length().f64();
                            v -= (v / l).round() * l;
                        }
                        d2 += v * v;
                    }
                    if d2.sqrt() < radii[a] + radii[b] {
                        return Err(Error::Overlap(format!("balls {} and {} intersect", b + 1, a + 1)));
                    }
                }
            }
            for (h, c) in centers.iter().enumerate() {
                let mut order: Vec<(T, usize)> = (0..domain.len()).map(|i| (domain.point_distance(i, c), i)).collect();
                order.sort_by(|x, y| x.0.partial_cmp(&y.0).expect("finite distances").then(x.1.cmp(&y.1)));
                for &(_, i) in &order[..counts[h]] {
                    if grid.label(i) != 0 {
                        return Err(Error::Overlap(format!("rasterized balls share cell {i}")));
                    }
                    if domain.mode() == BoundaryMode::Free && domain.on_outer_layer(i) {
                        return Err(Error::Infeasible(format!("ball {} reaches the outer layer", h + 1)));
                    }
                    grid.set(i, h + 1);
                }
            }
        }
        SeedDescriptor::Random { volumes, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut cells = allowed(domain);
            match volumes {
                Some(m) => {
                    if m.len() != chambers {
                        return Err(Error::Infeasible(format!("{} volumes for {chambers} chambers", m.len())));
                    }
                    let counts = VolumeVector::new(m.clone(), domain)?.cell_counts(domain)?;
                    cells.shuffle(&mut rng);
                    let mut it = cells.into_iter();
                    for (h, &c) in counts.iter().enumerate() {
                        for i in it.by_ref().take(c) {
                            grid.set(i, h + 1);
                        }
                    }
                }
                None => {
                    for i in cells {
                        grid.set(i, rng.random_range(0..=chambers));
                    }
                }
            }
        }
    }
    Ok(grid)
}
