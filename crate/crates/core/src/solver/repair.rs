//! Discrete volume fixing by greedy interface relabels.

use serde::Serialize;

use crate::domain::{LabelGrid, VolumeVector};
use crate::energy::ClusterState;
use crate::error::{Error, Result};
use crate::kernel::KernelTensor;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepairOptions {
    /// Largest correctable error per chamber as a fraction of its target cell count (at least one cell).
    pub budget: f64,
    /// Constant C of the certificate ΔE ≤ C·P_s(𝓔)·Σ_h |Δm_h|.
    pub constant: f64,
}

impl Default for RepairOptions {
    fn default() -> Self {
        RepairOptions { budget: 0.05, constant: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RepairMove {
    pub cell: usize,
    pub from: usize,
    pub to: usize,
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct RepairReport<T> {
    pub grid: LabelGrid<T>,
    pub moves: Vec<RepairMove>,
    /// Energy after minus energy before.
    pub delta_energy: T,
    /// C·P_s(𝓔)·Σ_h |Δm_h| with P_s(𝓔) the energy before repair.
    pub bound: T,
    pub certified: bool,
}

/// Target cell counts for chambers 1..=N.
pub(crate) fn target_counts<T: Real>(grid: &LabelGrid<T>, m: &VolumeVector<T>) -> Result<Vec<usize>> {
    if m.len() != grid.chambers() {
        return Err(Error::Infeasible(format!("{} volumes for {} chambers", m.len(), grid.chambers())));
    }
    m.cell_counts(grid.domain())
}

/// Relabels interface cells, cheapest exact energy change first, until every chamber holds its
/// target cell count.
pub fn repair_volumes<T: Real>(
    grid: &LabelGrid<T>,
    m: &VolumeVector<T>,
    kernel: &KernelTensor<T>,
    opts: RepairOptions,
) -> Result<RepairReport<T>> {
    let targets = target_counts(grid, m)?;
    let big_n = grid.chambers();
    let d = grid.domain().clone();
    let counts = grid.counts();
    // err[h] > 0 means surplus; err[0] balances the rest.
    let mut err = vec![0i64; big_n + 1];
    for h in 1..=big_n {
        err[h] = counts[h] as i64 - targets[h - 1] as i64;
        let budget = ((opts.budget * targets[h - 1] as f64).round() as i64).max(1);
        if err[h].abs() > budget {
            return Err(Error::VolumeBudget { chamber: h, error: err[h], budget });
        }
        err[0] -= err[h];
    }
    let mut state = ClusterState::new(grid.clone(), kernel)?;
    let start = state.energy();
    let mut moves = Vec::new();
    let allowed = super::project::allowed_cells(&d);
    let v = d.cell_volume();
    let dm: T = err[1..].iter().map(|&e| T::of_usize(e.unsigned_abs() as usize) * v).sum();
    while err[1..].iter().any(|&e| e != 0) {
        let pick = |state: &ClusterState<T>, ok: &dyn Fn(usize, usize) -> bool| -> Option<(T, usize, usize)> {
            let g = state.grid();
            let mut best: Option<(T, usize, usize)> = None;
            for i in 0..d.len() {
                let a = g.label(i);
                for axis in 0..d.n() {
                    for dir in [-1, 1] {
                        let Some(j) = d.neighbor(i, axis, dir) else { continue };
                        let b = g.label(j);
                        if b == a || !ok(a, b) || (b != 0 && !allowed[i]) {
                            continue;
                        }
                        let delta = state.relabel_delta(i, b);
                        let better = match best {
                            None => true,
                            Some((bd, bi, bb)) => delta < bd || (delta == bd && (i, b) < (bi, bb)),
                        };
                        if better {
                            best = Some((delta, i, b));
                        }
                    }
                }
            }
            best
        };
        let e = err.clone();
        let direct = pick(&state, &|a, b| e[a] > 0 && e[b] < 0);
        // Without a shared interface the exterior chamber relays the volume.
        let relay = || pick(&state, &|a, b| (a != 0 && e[a] > 0 && b == 0) || (a == 0 && b != 0 && e[b] < 0));
        // A deficit chamber with no interface left (binarization can erase it) regrows from its
        // cheapest cell.
        let regrow = || {
            let g = state.grid();
            let mut best: Option<(T, usize, usize)> = None;
            for b in (1..=big_n).filter(|&b| e[b] < 0) {
                for i in (0..d.len()).filter(|&i| allowed[i]) {
                    let a = g.label(i);
                    if a == b || !(a == 0 || e[a] > 0) {
                        continue;
                    }
                    let delta = state.relabel_delta(i, b);
                    if best.is_none_or(|(bd, _, _)| delta < bd) {
                        best = Some((delta, i, b));
                    }
                }
            }
            best
        };
        let Some((_, i, b)) = direct.or_else(relay).or_else(regrow) else {
            let from = (1..=big_n).find(|&h| err[h] > 0).unwrap_or(0);
            let to = (1..=big_n).find(|&h| err[h] < 0).unwrap_or(0);
            return Err(Error::Deadlock { from, to });
        };
        let a = state.grid().label(i);
        let delta = state.relabel(i, b);
        err[a] -= 1;
        err[b] += 1;
        moves.push(RepairMove { cell: i, from: a, to: b, delta: delta.f64() });
    }
    let end = state.refresh()?;
    let delta_energy = end - start;
    let bound = T::lit(opts.constant) * start * dm;
    Ok(RepairReport { grid: state.into_grid(), moves, delta_energy, bound, certified: delta_energy <= bound })
}
