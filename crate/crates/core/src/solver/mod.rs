//! Volume-constrained minimization of the cluster energy.
//!
//! Pipeline: seed, projected gradient on the relaxed energy, binarize, repair volumes, and
//! optionally anneal. The relaxed objective adds μ·½Σ_h Σ_i d_i u_h(i)(1 - u_h(i)) to the
//! Gagliardo energy. At μ = 1 this is the multilinear extension of the cluster energy, whose
//! minimizers sit at or next to binary fields; the plain convex relaxation prefers diffuse
//! fields that binarize poorly.

mod anneal;
mod exhaustive;
mod project;
mod repair;

use std::time::Instant;

use serde::Serialize;

pub use anneal::{anneal, AnnealSchedule};
pub use exhaustive::{exhaustive_min, MAX_LABELINGS};
pub use project::{constraint_residual, project_constraints, MAX_SWEEPS};
pub use repair::{repair_volumes, RepairMove, RepairOptions, RepairReport};

use crate::domain::{seed_cluster, LabelGrid, SeedDescriptor, SoftCluster, VolumeVector};
use crate::energy::{cluster_perimeter, soft_energy_and_gradient};
use crate::error::{Error, Result};
use crate::kernel::KernelTensor;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig<T> {
    pub chambers: usize,
    pub volumes: Vec<T>,
    pub init: SeedDescriptor<T>,
    pub max_iters: usize,
    /// Initial step as a multiple of 1/max_i d_i.
    pub step: f64,
    /// Stop when an accepted step lowers the objective by less than this fraction.
    pub energy_tol: f64,
    /// Weight μ of the concave penalty.
    pub concavity: f64,
    pub binarize: bool,
    pub repair: bool,
    pub repair_options: RepairOptions,
    pub anneal: Option<AnnealSchedule>,
    pub seed: u64,
}

impl<T: Real> SolveConfig<T> {
    pub fn new(volumes: Vec<T>, init: SeedDescriptor<T>) -> Self {
        SolveConfig {
            chambers: volumes.len(),
            volumes,
            init,
            max_iters: 300,
            step: 1.0,
            energy_tol: 1e-9,
            concavity: 1.0,
            binarize: true,
            repair: true,
            repair_options: RepairOptions::default(),
            anneal: None,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum Termination {
    Converged,
    Stationary,
    MaxIterations,
    StepCollapse,
}

impl Termination {
    pub fn as_str(self) -> &'static str {
        match self {
            Termination::Converged => "converged",
            Termination::Stationary => "stationary",
            Termination::MaxIterations => "maxIterations",
            Termination::StepCollapse => "stepCollapse",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    /// Relaxed objective (Gagliardo energy plus concave penalty).
    pub energy: f64,
    /// Mass residual in cell units.
    pub residual: f64,
    pub step: f64,
}

#[derive(Clone, Debug)]
pub struct SolveResult<T> {
    pub grid: LabelGrid<T>,
    pub soft: SoftCluster<T>,
    pub trace: Vec<TraceRow>,
    pub volumes: Vec<T>,
    /// Cluster energy of the final labeled grid.
    pub energy: T,
    pub wall_clock: f64,
    pub termination: Termination,
    pub repair: Option<RepairReport<T>>,
}

/// Per-cell argmax over (u_0, u_1, ..., u_N), ties to the lowest chamber. Free-mode outer-layer
/// cells always go to the exterior.
pub fn binarize<T: Real>(sc: &SoftCluster<T>) -> LabelGrid<T> {
    let d = &sc.domain;
    let u0 = sc.exterior();
    let allowed = project::allowed_cells(d);
    let mut g = LabelGrid::empty(d.clone(), sc.chambers());
    for i in 0..d.len() {
        if !allowed[i] {
            continue;
        }
        let mut best = (u0[i], 0);
        for (h, f) in sc.fields.iter().enumerate() {
            if f[i] > best.0 {
                best = (f[i], h + 1);
            }
        }
        g.set(i, best.1);
    }
    g
}

/// Relaxed objective and its gradient.
fn objective<T: Real>(sc: &SoftCluster<T>, kernel: &KernelTensor<T>, mu: T) -> Result<(T, Vec<Vec<T>>)> {
    let (mut e, mut g) = soft_energy_and_gradient(sc, kernel)?;
    if mu == T::zero() {
        return Ok((e, g));
    }
    let d = kernel.row_sums();
    let u0 = sc.exterior();
    let half = T::lit(0.5);
    let mut pen = T::zero();
    for i in 0..u0.len() {
        pen += d[i] * u0[i] * (T::one() - u0[i]);
    }
    for (h, f) in sc.fields.iter().enumerate() {
        for i in 0..f.len() {
            pen += d[i] * f[i] * (T::one() - f[i]);
            g[h][i] += mu * d[i] * (u0[i] - f[i]);
        }
    }
    e += mu * half * pen;
    Ok((e, g))
}

fn project_to_counts<T: Real>(fields: &[Vec<T>], counts: &[T], allowed: &[bool]) -> Result<(Vec<Vec<T>>, T)> {
    let p = project::Problem { y: fields, target: counts, allowed };
    let (u, r, _) = p.solve(project::mass_tolerance(allowed.len()))?;
    Ok((u, r))
}

pub fn minimize<T: Real>(cfg: &SolveConfig<T>, kernel: &KernelTensor<T>) -> Result<SolveResult<T>> {
    let clock = Instant::now();
    let d = kernel.domain().clone();
    if cfg.volumes.len() != cfg.chambers {
        return Err(Error::Infeasible(format!("{} volumes for {} chambers", cfg.volumes.len(), cfg.chambers)));
    }
    if !(cfg.step > 0.0) {
        return Err(Error::Range { name: "solver.step", value: cfg.step, why: "must be positive" });
    }
    let m = VolumeVector::new(cfg.volumes.clone(), &d)?;
    let counts = m.cell_counts(&d)?;
    let targets: Vec<T> = counts.iter().map(|&c| T::of_usize(c)).collect();
    let allowed = project::allowed_cells(&d);
    let init = seed_cluster(&d, cfg.chambers, &cfg.init)?;
    let mu = T::lit(cfg.concavity);

    let (fields, residual) = project_to_counts(&SoftCluster::from_grid(&init).fields, &targets, &allowed)?;
    let mut sc = SoftCluster { domain: d.clone(), fields };
    let (mut energy, mut grad) = objective(&sc, kernel, mu)?;
    let dmax = kernel.row_sums().iter().fold(T::zero(), |a, &b| a.max(b));
    let tau0 = T::lit(cfg.step) / dmax;
    let mut tau = tau0;
    let mut trace = vec![TraceRow { iteration: 0, energy: energy.f64(), residual: residual.f64(), step: 0.0 }];
    let mut termination = if cfg.max_iters == 0 { Termination::Converged } else { Termination::MaxIterations };
    let sigma = T::lit(1e-4);
    let tiny = T::lit(1e-12);
    'outer: for it in 1..=cfg.max_iters {
        loop {
            let y: Vec<Vec<T>> = sc.fields.iter().zip(&grad).map(|(u, g)| u.iter().zip(g).map(|(&a, &b)| a - tau * b).collect()).collect();
            let (fields, residual) = project_to_counts(&y, &targets, &allowed)?;
            let trial = SoftCluster { domain: d.clone(), fields };
            let mut slope = T::zero();
            let mut move_max = T::zero();
            for h in 0..trial.fields.len() {
                for i in 0..d.len() {
                    let dx = trial.fields[h][i] - sc.fields[h][i];
                    slope += grad[h][i] * dx;
                    move_max = move_max.max(dx.mag());
                }
            }
            if move_max <= tiny {
                termination = Termination::Stationary;
                break 'outer;
            }
            let (e_trial, g_trial) = objective(&trial, kernel, mu)?;
            if e_trial <= energy + sigma * slope.min(T::zero()) && slope < T::zero() {
                let drop = energy - e_trial;
                sc = trial;
                energy = e_trial;
                grad = g_trial;
                trace.push(TraceRow { iteration: it, energy: energy.f64(), residual: residual.f64(), step: tau.f64() });
                tau = (tau + tau).min(tau0 * T::lit(64.0));
                if drop <= T::lit(cfg.energy_tol) * energy.mag() {
                    termination = Termination::Converged;
                    break 'outer;
                }
                break;
            }
            tau *= T::lit(0.5);
            if tau < T::lit(1e-14) * tau0 {
                termination = Termination::StepCollapse;
                break 'outer;
            }
        }
    }

    let mut grid = if cfg.binarize { binarize(&sc) } else { init };
    let mut report = None;
    if cfg.repair {
        let r = repair_volumes(&grid, &m, kernel, cfg.repair_options)?;
        grid = r.grid.clone();
        report = Some(r);
    }
    if let Some(schedule) = cfg.anneal {
        grid = anneal(&grid, &m, kernel, schedule, cfg.seed)?;
    }
    let energy = cluster_perimeter(&grid, kernel)?.total;
    Ok(SolveResult {
        volumes: crate::domain::volumes(&grid),
        grid,
        soft: sc,
        trace,
        energy,
        wall_clock: clock.elapsed().as_secs_f64(),
        termination,
        repair: report,
    })
}
