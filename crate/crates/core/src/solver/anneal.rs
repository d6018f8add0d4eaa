//! Volume-preserving Metropolis refinement by pairwise label swaps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::domain::{LabelGrid, VolumeVector};
use crate::energy::ClusterState;
use crate::error::{Error, Result};
use crate::kernel::KernelTensor;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnnealSchedule {
    /// Metropolis steps with linearly decreasing temperature.
    pub steps: usize,
    /// Initial temperature relative to the mean |ΔE| of interface swaps at the start.
    pub t0: f64,
    /// Zero-temperature steps after cooling.
    pub tail: usize,
    /// Finish with best-improvement swap scans until no swap lowers the energy.
    pub polish: bool,
}

impl Default for AnnealSchedule {
    fn default() -> Self {
        AnnealSchedule { steps: 20_000, t0: 0.3, tail: 5_000, polish: true }
    }
}

/// Cells grouped by label with O(1) membership updates.
struct Buckets {
    cells: Vec<Vec<usize>>,
    slot: Vec<usize>,
}

impl Buckets {
    fn new<T: Real>(grid: &LabelGrid<T>, allowed: &[bool]) -> Self {
        let mut cells = vec![Vec::new(); grid.chambers() + 1];
        let mut slot = vec![usize::MAX; allowed.len()];
        for i in 0..allowed.len() {
            if allowed[i] {
                let h = grid.label(i);
                slot[i] = cells[h].len();
                cells[h].push(i);
            }
        }
        Buckets { cells, slot }
    }

    fn relabel(&mut self, i: usize, from: usize, to: usize) {
        let k = self.slot[i];
        let last = *self.cells[from].last().expect("nonempty bucket");
        self.cells[from].swap_remove(k);
        if last != i {
            self.slot[last] = k;
        }
        self.slot[i] = self.cells[to].len();
        self.cells[to].push(i);
    }
}

fn touches<T: Real>(grid: &LabelGrid<T>, i: usize, h: usize) -> bool {
    let d = grid.domain();
    (0..d.n()).any(|a| [-1, 1].iter().any(|&dir| d.neighbor(i, a, dir).is_some_and(|j| grid.label(j) == h)))
}

/// Draws a swap (i, j) across an interface: i borders chamber label(j) and j borders label(i).
fn propose<T: Real>(state: &ClusterState<T>, buckets: &Buckets, rng: &mut ChaCha8Rng, allowed: &[bool]) -> Option<(usize, usize)> {
    let g = state.grid();
    let d = g.domain();
    for _ in 0..64 {
        let i = rng.random_range(0..d.len());
        if !allowed[i] {
            continue;
        }
        let axis = rng.random_range(0..d.n());
        let dir = if rng.random_bool(0.5) { 1 } else { -1 };
        let Some(nb) = d.neighbor(i, axis, dir) else { continue };
        let (a, b) = (g.label(i), g.label(nb));
        if a == b || !allowed[nb] {
            continue;
        }
        let pool = &buckets.cells[b];
        for _ in 0..16 {
            let j = pool[rng.random_range(0..pool.len())];
            if touches(g, j, a) {
                return Some((i, j));
            }
        }
    }
    None
}

fn apply<T: Real>(state: &mut ClusterState<T>, buckets: &mut Buckets, i: usize, j: usize) {
    let (a, b) = (state.grid().label(i), state.grid().label(j));
    state.swap(i, j);
    buckets.relabel(i, a, b);
    buckets.relabel(j, b, a);
}

/// Repeats the best strictly improving swap until none is left. Small grids scan all pairs,
/// larger ones only interface cells.
pub(crate) fn polish<T: Real>(state: &mut ClusterState<T>, allowed: &[bool]) {
    let len = allowed.len();
    loop {
        let g = state.grid();
        let cand: Vec<usize> =
            (0..len).filter(|&i| allowed[i] && (len <= 256 || (0..=g.chambers()).any(|h| h != g.label(i) && touches(g, i, h)))).collect();
        let floor = T::lit(-1e-12) * state.energy().mag().max(T::min_positive_value());
        let mut best: Option<(T, usize, usize)> = None;
        for (x, &i) in cand.iter().enumerate() {
            for &j in &cand[x + 1..] {
                if g.label(i) == g.label(j) {
                    continue;
                }
                let delta = state.swap_delta(i, j);
                if delta < floor && best.is_none_or(|(b, _, _)| delta < b) {
                    best = Some((delta, i, j));
                }
            }
        }
        match best {
            Some((_, i, j)) => {
                state.swap(i, j);
            }
            None => break,
        }
    }
}

/// Metropolis swaps with linear cooling, a zero-temperature tail and an optional polish.
/// Volumes are preserved exactly at every step.
pub fn anneal<T: Real>(
    grid: &LabelGrid<T>,
    m: &VolumeVector<T>,
    kernel: &KernelTensor<T>,
    schedule: AnnealSchedule,
    seed: u64,
) -> Result<LabelGrid<T>> {
    let targets = super::repair::target_counts(grid, m)?;
    if grid.counts()[1..] != targets[..] {
        return Err(Error::Precondition(format!("grid counts {:?} differ from targets {:?}", &grid.counts()[1..], targets)));
    }
    let allowed = super::project::allowed_cells(grid.domain());
    let mut state = ClusterState::new(grid.clone(), kernel)?;
    let mut buckets = Buckets::new(grid, &allowed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = (state.energy(), grid.labels().to_vec());
    // Swaps that only shuffle rounding noise never count as downhill.
    let floor = T::lit(-1e-12) * state.energy().mag();
    let mut scale = T::zero();
    let mut seen = 0usize;
    for _ in 0..64 {
        if let Some((i, j)) = propose(&state, &buckets, &mut rng, &allowed) {
            scale += state.swap_delta(i, j).mag();
            seen += 1;
        }
    }
    if seen > 0 {
        scale /= T::of_usize(seen);
        let t0 = T::lit(schedule.t0) * scale;
        let total = schedule.steps + schedule.tail;
        for step in 0..total {
            let Some((i, j)) = propose(&state, &buckets, &mut rng, &allowed) else { break };
            let delta = state.swap_delta(i, j);
            let temp =
                if step < schedule.steps { t0 * T::of_usize(schedule.steps - step) / T::of_usize(schedule.steps) } else { T::zero() };
            // The uniform draw happens every step so trajectories do not depend on the branch taken.
            let draw = T::lit(rng.random::<f64>());
            let accept = delta < floor || (temp > T::zero() && draw < (-delta / temp).exp());
            if accept {
                apply(&mut state, &mut buckets, i, j);
                if state.energy() < best.0 {
                    best = (state.energy(), state.grid().labels().to_vec());
                }
            }
        }
    }
    // Never hand back something worse than the best labeling visited.
    if state.refresh()? > best.0 {
        let g = LabelGrid::new(grid.domain().clone(), grid.chambers(), best.1)?;
        state = ClusterState::new(g, kernel)?;
    }
    if schedule.polish {
        polish(&mut state, &allowed);
    }
    Ok(state.into_grid())
}
