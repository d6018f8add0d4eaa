//! Subadditivity sandwich, the L-set union bound and the nonlocal isoperimetric inequality.

use crate::domain::{mask_count, mask_indices, DomainSpec};
use crate::energy::{interaction, perimeter};
use crate::error::{Error, Result};
use crate::kernel::KernelTensor;
use crate::scalar::Real;
use crate::special::unit_ball_volume;

use super::CheckReport;

/// Relative floating-point allowance on top of the certified bounds.
const ROUNDING: f64 = 1e-10;

fn free_only<T: Real>(kernel: &KernelTensor<T>, check: &str) -> Result<()> {
    if kernel.domain().is_periodic() {
        return Err(Error::Unsupported(format!("{check} compares with the whole-space bounds and needs free mode")));
    }
    Ok(())
}

/// Smallest and largest center distance between two cell lists, in physical units.
fn center_extremes<T: Real>(d: &DomainSpec<T>, a: &[usize], b: &[usize]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = 0f64;
    for &i in a {
        for &j in b {
            let r = d.center_distance(i, j).f64();
            lo = lo.min(r);
            hi = hi.max(r);
        }
    }
    (lo, hi)
}

/// Checks P(E)+P(F) - 2|E||F|/dist^{n+s} ≤ P(E∪F) ≤ P(E)+P(F) - 2|E||F|/diam^{n+s} for every pair
/// and P(∪F_i) ≥ Σ P(F_i) - 2L² max|F_i|²/D^{n+s} for the family. dist and D are certified from
/// below by the center distance minus one cell diagonal h√n, diam from above by the center
/// diameter plus h√n.
pub fn check_sandwich<T: Real>(sets: &[Vec<bool>], kernel: &KernelTensor<T>) -> Result<CheckReport> {
    free_only(kernel, "check_sandwich")?;
    if sets.len() < 2 {
        return Err(Error::Precondition("the sandwich needs at least two sets".into()));
    }
    let d = kernel.domain();
    let len = d.len();
    for s in sets {
        if s.len() != len {
            return Err(Error::DomainMismatch("set", "kernel"));
        }
    }
    for a in 0..sets.len() {
        for b in a + 1..sets.len() {
            if let Some(i) = (0..len).find(|&i| sets[a][i] && sets[b][i]) {
                return Err(Error::NotDisjoint(i));
            }
        }
    }
    let nf = d.n() as f64;
    let expo = nf + d.s().f64();
    let diag = d.cell_size().f64() * nf.sqrt();
    let v = d.cell_volume().f64();
    let cells: Vec<Vec<usize>> = sets.iter().map(|m| mask_indices(m)).collect();
    let vols: Vec<f64> = cells.iter().map(|c| c.len() as f64 * v).collect();
    let pers: Vec<f64> = sets.iter().map(|m| perimeter(m, kernel).map(|p| p.f64())).collect::<Result<_>>()?;

    let mut r = CheckReport::new("sandwich", ROUNDING);
    r.note("certification", "dist ≥ centerDist - h√n, diam ≤ centerDiam + h√n");
    let mut worst_lower = f64::INFINITY;
    let mut worst_upper = f64::INFINITY;
    let mut big_d = f64::INFINITY;
    for a in 0..sets.len() {
        for b in a + 1..sets.len() {
            let i_ab = interaction(&sets[a], &sets[b], kernel)?.f64();
            let middle = pers[a] + pers[b] - 2.0 * i_ab;
            let (near, _) = center_extremes(d, &cells[a], &cells[b]);
            let mut union = cells[a].clone();
            union.extend_from_slice(&cells[b]);
            let (_, far) = center_extremes(d, &union, &union);
            let dist = (near - diag).max(0.0);
            let diam = far + diag;
            big_d = big_d.min(dist);
            let lower = if dist > 0.0 { pers[a] + pers[b] - 2.0 * vols[a] * vols[b] / dist.powf(expo) } else { f64::NEG_INFINITY };
            let upper = pers[a] + pers[b] - 2.0 * vols[a] * vols[b] / diam.powf(expo);
            let allow = ROUNDING * (pers[a] + pers[b]);
            let key = format!("pair({a},{b})");
            r.measure(&format!("{key}.middle"), middle);
            r.bound(&format!("{key}.lower"), lower);
            r.bound(&format!("{key}.upper"), upper);
            r.fail_if(middle < lower - allow || middle > upper + allow);
            worst_lower = worst_lower.min(middle - lower);
            worst_upper = worst_upper.min(upper - middle);
        }
    }
    let l = sets.len() as f64;
    let all: Vec<bool> = (0..len).map(|i| sets.iter().any(|m| m[i])).collect();
    let p_union = perimeter(&all, kernel)?.f64();
    let sum: f64 = pers.iter().sum();
    let vmax = vols.iter().copied().fold(0.0, f64::max);
    let union_lower = if big_d > 0.0 { sum - 2.0 * l * l * vmax * vmax / big_d.powf(expo) } else { f64::NEG_INFINITY };
    r.measure("union.perimeter", p_union);
    r.bound("union.lower", union_lower);
    r.fail_if(p_union < union_lower - ROUNDING * sum);
    r.measure("slack.lower", worst_lower);
    r.measure("slack.upper", worst_upper);
    r.measure("slack.union", p_union - union_lower);
    r.note("sets", sets.len());
    r.note("D", big_d);
    Ok(r)
}

/// Relative slack of the isoperimetric check: two cell layers against the radius of the ball
/// with the same volume, 2·n·h / (|E|/|B|)^{1/n}.
pub fn isoperimetric_slack<T: Real>(domain: &DomainSpec<T>, volume: f64) -> f64 {
    let n = domain.n();
    let radius = (volume / unit_ball_volume(n)).powf(1.0 / n as f64);
    2.0 * n as f64 * domain.cell_size().f64() / radius
}

/// P_s(E) ≥ P_s(B)|B|^{(s-n)/n}|E|^{(n-s)/n}, within the slack of [`isoperimetric_slack`].
/// `ps_ball` is P_s(B_1) at the kernel's order.
pub fn check_isoperimetric<T: Real>(e: &[bool], kernel: &KernelTensor<T>, ps_ball: f64) -> Result<CheckReport> {
    free_only(kernel, "check_isoperimetric")?;
    let d = kernel.domain();
    let count = mask_count(e);
    if count == 0 {
        return Err(Error::Precondition("isoperimetric check needs |E| > 0".into()));
    }
    let n = d.n() as f64;
    let s = d.s().f64();
    let vol = count as f64 * d.cell_volume().f64();
    let rhs = ps_ball * unit_ball_volume(d.n()).powf((s - n) / n) * vol.powf((n - s) / n);
    let p = perimeter(e, kernel)?.f64();
    let tol = isoperimetric_slack(d, vol);
    let mut r = CheckReport::new("isoperimetric", tol);
    r.measure("perimeter", p).bound("perimeter", rhs).measure("deficit", p / rhs - 1.0).measure("volume", vol);
    r.note("slack", "2·n·h/(|E|/|B|)^{1/n}");
    r.fail_if(p < (1.0 - tol) * rhs);
    Ok(r)
}
