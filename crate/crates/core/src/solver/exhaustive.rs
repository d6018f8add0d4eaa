//! Exact discrete minimizer by enumeration of all labelings with prescribed cell counts.

use crate::domain::LabelGrid;
use crate::energy::cluster_perimeter;
use crate::error::{Error, Result};
use crate::kernel::KernelTensor;
use crate::scalar::Real;

pub const MAX_LABELINGS: f64 = 1e7;

/// Number of ways to place `counts` (plus the exterior remainder) on `cells` cells.
fn multinomial(cells: usize, counts: &[usize]) -> f64 {
    let ln_fact = |k: usize| (1..=k).map(|x| (x as f64).ln()).sum::<f64>();
    let used: usize = counts.iter().sum();
    let mut ln = ln_fact(cells) - ln_fact(cells - used);
    for &c in counts {
        ln -= ln_fact(c);
    }
    ln.exp().round()
}

struct Search<'a> {
    k: &'a [Vec<f64>],
    ext: &'a [f64],
    labels: Vec<usize>,
    left: Vec<usize>,
    best: f64,
    best_labels: Vec<usize>,
}

impl Search<'_> {
    fn go(&mut self, pos: usize, energy: f64) {
        let m = self.ext.len();
        if pos == m {
            if energy < self.best {
                self.best = energy;
                self.best_labels.clone_from(&self.labels);
            }
            return;
        }
        let cells_left = m - pos;
        let needed: usize = self.left[1..].iter().sum();
        for h in 0..self.left.len() {
            if h == 0 && needed >= cells_left {
                continue;
            }
            if h > 0 && self.left[h] == 0 {
                continue;
            }
            let mut add = if h > 0 { self.ext[pos] } else { 0.0 };
            for j in 0..pos {
                if self.labels[j] != h {
                    add += self.k[pos][j];
                }
            }
            self.labels[pos] = h;
            self.left[h] = self.left[h].wrapping_sub(usize::from(h > 0));
            self.go(pos + 1, energy + add);
            self.left[h] += usize::from(h > 0);
        }
    }
}

/// Global minimizer over all labelings whose chamber h holds round(m_h / cellVolume) cells.
/// Ties keep the first labeling in enumeration order.
pub fn exhaustive_min<T: Real>(kernel: &KernelTensor<T>, m: &[T]) -> Result<(LabelGrid<T>, T)> {
    let d = kernel.domain().clone();
    let v = d.cell_volume();
    let counts: Vec<usize> = m.iter().map(|&x| (x / v).round().to_usize().unwrap_or(0)).collect();
    let allowed = super::project::allowed_cells(&d);
    let cells: Vec<usize> = (0..d.len()).filter(|&i| allowed[i]).collect();
    if counts.iter().sum::<usize>() > cells.len() {
        return Err(Error::Infeasible(format!("{} cells requested, {} available", counts.iter().sum::<usize>(), cells.len())));
    }
    let space = multinomial(cells.len(), &counts);
    if space > MAX_LABELINGS {
        return Err(Error::SearchSpace(space));
    }
    let k: Vec<Vec<f64>> = cells.iter().map(|&i| cells.iter().map(|&j| kernel.pair(i, j).f64()).collect()).collect();
    // Interaction with the fixed exterior cells and the far field, paid when a cell joins a chamber.
    let ext: Vec<f64> = cells
        .iter()
        .map(|&i| (0..d.len()).filter(|&j| !allowed[j]).map(|j| kernel.pair(i, j).f64()).sum::<f64>() + kernel.far_or_zero(i).f64())
        .collect();
    let mut left = vec![usize::MAX; counts.len() + 1];
    left[1..].copy_from_slice(&counts);
    let mut s = Search { k: &k, ext: &ext, labels: vec![0; cells.len()], left, best: f64::INFINITY, best_labels: vec![0; cells.len()] };
    s.go(0, 0.0);
    let mut grid = LabelGrid::empty(d, counts.len());
    for (x, &i) in cells.iter().enumerate() {
        grid.set(i, s.best_labels[x]);
    }
    let e = cluster_perimeter(&grid, kernel)?.total;
    Ok((grid, e))
}
