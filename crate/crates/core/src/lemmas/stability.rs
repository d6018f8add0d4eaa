//! Randomized audit of (Λ, r₀)-minimality.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::domain::{cluster_boundary, mask_indices, relative_distance, LabelGrid};
use crate::energy::cluster_relative_perimeter;
use crate::error::{Error, Result};
use crate::kernel::KernelTensor;
use crate::scalar::Real;

use super::density::{label_at, shifted, sorted_offsets};
use super::CheckReport;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Perturbation {
    /// One cell takes the label of a differing axis neighbor.
    Flip,
    /// A sub-ball takes one label present in the ball.
    Blob,
}

struct Trial {
    kind: Perturbation,
    center: usize,
    radius: f64,
    changed: usize,
    slack: f64,
    lhs: f64,
    rhs: f64,
}

/// Draws `trials` competitors 𝓕 with 𝓕 Δ 𝓔 inside a ball A = B_ρ(x), x an interface cell and
/// ρ < r₀, alternating flips and blobs, and evaluates
/// slack = P_s(𝓕; A) + Λ/(1-s)·d(𝓔,𝓕) - P_s(𝓔; A).
/// Passes when every slack is ≥ -1e-9·P_s(𝓔; A). The empirical Λ is the smallest value making
/// all observed slacks nonnegative. Free-mode outer-layer cells are never changed.
pub fn local_stability<T: Real>(
    grid: &LabelGrid<T>,
    lambda: f64,
    r0: f64,
    trials: usize,
    seed: u64,
    kernel: &KernelTensor<T>,
) -> Result<CheckReport> {
    let d = grid.domain();
    d.check_same(kernel.domain(), "grid", "kernel")?;
    if trials == 0 {
        return Err(Error::Precondition("local_stability needs at least one trial".into()));
    }
    if !(lambda >= 0.0) {
        return Err(Error::Range { name: "lambda", value: lambda, why: "must be nonnegative" });
    }
    if !(r0 > 0.0) {
        return Err(Error::Range { name: "r0", value: r0, why: "must be positive" });
    }
    let h = d.cell_size().f64();
    let s = d.s().f64();
    let movable = |i: usize| d.is_periodic() || !d.on_outer_layer(i);
    let mut centers: Vec<usize> = mask_indices(&cluster_boundary(grid)).into_iter().filter(|&i| movable(i)).collect();
    if centers.is_empty() {
        centers = (0..d.len()).filter(|&i| movable(i)).collect();
    }
    if centers.is_empty() {
        return Err(Error::Precondition("no cell may be perturbed".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lo = h.min(0.5 * r0);
    let mut worst: Option<Trial> = None;
    let mut lambda_emp = 0f64;
    let mut effective = 0usize;
    for t in 0..trials {
        let kind = if t % 2 == 0 { Perturbation::Flip } else { Perturbation::Blob };
        let center = centers[rng.random_range(0..centers.len())];
        let radius = lo + (r0 - lo) * rng.random::<f64>();
        let ball: Vec<usize> = sorted_offsets(d.n(), radius / h).iter().filter_map(|(o, _)| shifted(d, center, o)).collect();
        let mut omega = vec![false; d.len()];
        for &i in &ball {
            omega[i] = true;
        }
        let inside: Vec<usize> = ball.iter().copied().filter(|&i| movable(i)).collect();
        let mut f = grid.clone();
        match kind {
            Perturbation::Flip => {
                let i = inside[rng.random_range(0..inside.len())];
                let own = grid.label(i);
                let mut options = Vec::new();
                for a in 0..d.n() {
                    for dir in [-1, 1] {
                        let l = label_at(grid, d.neighbor(i, a, dir));
                        if l != own && !options.contains(&l) {
                            options.push(l);
                        }
                    }
                }
                let to = if options.is_empty() {
                    (own + 1 + rng.random_range(0..grid.chambers())) % (grid.chambers() + 1)
                } else {
                    options[rng.random_range(0..options.len())]
                };
                f.set(i, to);
            }
            Perturbation::Blob => {
                let seed_cell = inside[rng.random_range(0..inside.len())];
                let mut present: Vec<usize> = ball.iter().map(|&i| grid.label(i)).collect();
                present.sort_unstable();
                present.dedup();
                let to = present[rng.random_range(0..present.len())];
                let sub = h + (0.5 * radius - h).max(0.0) * rng.random::<f64>();
                for (o, _) in sorted_offsets(d.n(), sub / h) {
                    if let Some(j) = shifted(d, seed_cell, &o) {
                        if omega[j] && movable(j) {
                            f.set(j, to);
                        }
                    }
                }
            }
        }
        let changed = (0..d.len()).filter(|&i| f.label(i) != grid.label(i)).count();
        if changed == 0 {
            continue;
        }
        effective += 1;
        let pe = cluster_relative_perimeter(grid, &omega, kernel)?.f64();
        let pf = cluster_relative_perimeter(&f, &omega, kernel)?.f64();
        let dist = relative_distance(grid, &f, &omega)?.f64();
        let rhs = pf + lambda / (1.0 - s) * dist;
        let slack = rhs - pe;
        if dist > 0.0 {
            lambda_emp = lambda_emp.max((1.0 - s) * (pe - pf) / dist);
        }
        let trial = Trial { kind, center, radius, changed, slack, lhs: pe, rhs };
        if worst.as_ref().is_none_or(|w| trial.slack < w.slack) {
            worst = Some(trial);
        }
    }
    let mut r = CheckReport::new("local_stability", 1e-9);
    r.note("trials", trials).note("effective", effective).note("seed", seed).note("r0", r0);
    let Some(w) = worst else {
        r.diagnostic = true;
        r.note("reason", "no trial changed a label");
        return Ok(r);
    };
    r.measure("slack.min", w.slack).bound("slack.min", 0.0);
    r.measure("lambda.empirical", lambda_emp).bound("lambda", lambda);
    r.measure("worst.lhs", w.lhs).measure("worst.rhs", w.rhs);
    r.note(
        "worst",
        serde_json::json!({
            "kind": w.kind,
            "cell": w.center,
            "point": d.center(w.center)[..d.n()].iter().map(|x| x.f64()).collect::<Vec<_>>(),
            "radius": w.radius,
            "changed": w.changed,
        }),
    );
    r.fail_if(w.slack < -1e-9 * w.lhs.abs());
    Ok(r)
}
