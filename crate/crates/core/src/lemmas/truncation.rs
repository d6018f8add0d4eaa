//! Truncation of a cluster at a level set of the distance to a reference set.

use serde::Serialize;

use crate::domain::{relative_distance, LabelGrid};
use crate::energy::{cluster_perimeter, fmt17};
use crate::error::{Error, Result};
use crate::kernel::KernelTensor;
use crate::scalar::Real;

use super::edt::distance_to;
use super::PaperConstants;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct TruncationRow {
    pub radius: f64,
    /// (1-s) P_s(𝓔′).
    pub lhs: f64,
    /// (1-s) P_s(𝓔) - d(𝓔,𝓔′)/(C₂ τ^{s/n}).
    pub rhs: f64,
    pub distance: f64,
    pub holds: bool,
}

#[derive(Clone, Debug)]
pub struct Truncation<T> {
    pub r0: f64,
    /// C₁ τ^{1/n}.
    pub radius_cap: f64,
    pub degenerate: bool,
    pub grid: LabelGrid<T>,
    pub energy_before: f64,
    pub energy_after: f64,
    pub distance: f64,
    pub table: Vec<TruncationRow>,
}

fn render(table: &[TruncationRow]) -> String {
    let mut out = String::from("radius,lhs,rhs,distance,holds\n");
    for r in table {
        out += &format!("{},{},{},{},{}\n", fmt17(r.radius), fmt17(r.lhs), fmt17(r.rhs), fmt17(r.distance), r.holds);
    }
    out
}

/// Smallest r₀ ∈ [0, C₁τ^{1/n}] for which 𝓔′(h) = 𝓔(h) ∩ {dist(·,F) ≤ r₀} satisfies
/// (1-s)P_s(𝓔′) ≤ (1-s)P_s(𝓔) - d(𝓔,𝓔′)/(C₂τ^{s/n}). The truncated cluster only changes at
/// distance values of chamber cells, so those (and 0) are the radii scanned. When every chamber
/// cell already lies within C₁τ^{1/n} of F, r₀ = C₁τ^{1/n} and 𝓔′ = 𝓔.
pub fn truncate<T: Real>(
    grid: &LabelGrid<T>,
    f: &[bool],
    tau: f64,
    kernel: &KernelTensor<T>,
    constants: &PaperConstants,
) -> Result<Truncation<T>> {
    let d = grid.domain();
    d.check_same(kernel.domain(), "grid", "kernel")?;
    if f.len() != d.len() {
        return Err(Error::DomainMismatch("F", "grid"));
    }
    if !f.iter().any(|&b| b) {
        return Err(Error::Precondition("F must be nonempty".into()));
    }
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(Error::Range { name: "tau", value: tau, why: "must be positive and finite" });
    }
    let v = d.cell_volume().f64();
    let leak = (0..d.len()).filter(|&i| grid.label(i) != 0 && !f[i]).count() as f64 * v;
    if leak > tau * (1.0 + 1e-12) {
        return Err(Error::Precondition(format!("Σ|𝓔(h) ∖ F| = {leak} exceeds tau = {tau}")));
    }
    let n = d.n() as f64;
    let s = d.s().f64();
    let cap = constants.c1 * tau.powf(1.0 / n);
    let u: Vec<f64> = distance_to(d, f).into_iter().map(|x| x.f64()).collect();
    let before = cluster_perimeter(grid, kernel)?.total.f64();
    let chamber_cells: Vec<usize> = (0..d.len()).filter(|&i| grid.label(i) != 0).collect();
    if chamber_cells.iter().all(|&i| u[i] <= cap) {
        let row = TruncationRow { radius: cap, lhs: (1.0 - s) * before, rhs: (1.0 - s) * before, distance: 0.0, holds: true };
        return Ok(Truncation {
            r0: cap,
            radius_cap: cap,
            degenerate: true,
            grid: grid.clone(),
            energy_before: before,
            energy_after: before,
            distance: 0.0,
            table: vec![row],
        });
    }
    let mut radii: Vec<f64> = chamber_cells.iter().map(|&i| u[i]).filter(|&x| x <= cap).collect();
    radii.push(0.0);
    radii.sort_by(f64::total_cmp);
    radii.dedup();
    let scale = constants.c2 * tau.powf(s / n);
    let all = vec![true; d.len()];
    let mut table = Vec::new();
    for &r in &radii {
        let mut g = grid.clone();
        for &i in &chamber_cells {
            if u[i] > r {
                g.set(i, 0);
            }
        }
        let after = cluster_perimeter(&g, kernel)?.total.f64();
        let dist = relative_distance(grid, &g, &all)?.f64();
        let lhs = (1.0 - s) * after;
        let rhs = (1.0 - s) * before - dist / scale;
        let holds = lhs <= rhs + 1e-12 * (1.0 - s) * before;
        table.push(TruncationRow { radius: r, lhs, rhs, distance: dist, holds });
        if holds {
            return Ok(Truncation {
                r0: r,
                radius_cap: cap,
                degenerate: false,
                grid: g,
                energy_before: before,
                energy_after: after,
                distance: dist,
                table,
            });
        }
    }
    Err(Error::NoRadius(render(&table)))
}
