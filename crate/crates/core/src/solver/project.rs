//! Euclidean projection onto {0 ≤ u_h, Σ_h u_h ≤ 1, Σ_i u_h(i) = c_h}.
//!
//! For fixed multipliers λ the problem splits into one capped-simplex projection per cell of
//! y(i) - λ. The multipliers are found by semismooth Newton sweeps on the dual, with a
//! per-chamber safeguarded line solve as the fallback sweep.

use nalgebra::{DMatrix, DVector};

use crate::domain::{BoundaryMode, SoftCluster};
use crate::error::{Error, Result};
use crate::scalar::Real;

pub const MAX_SWEEPS: usize = 50;

/// Projects `z` onto {u ≥ 0, Σ u ≤ 1} in place; returns the free-set size when the sum
/// constraint is active.
fn project_cell<T: Real>(z: &mut [T], scratch: &mut Vec<T>) -> Option<usize> {
    let clipped: T = z.iter().map(|&x| x.max(T::zero())).sum();
    if clipped <= T::one() {
        for x in z.iter_mut() {
            *x = x.max(T::zero());
        }
        return None;
    }
    scratch.clear();
    scratch.extend_from_slice(z);
    scratch.sort_by(|a, b| b.partial_cmp(a).expect("finite field values"));
    let mut cum = T::zero();
    let mut theta = T::zero();
    let mut rho = 0;
    for (k, &v) in scratch.iter().enumerate() {
        cum += v;
        let t = (cum - T::one()) / T::of_usize(k + 1);
        if v - t > T::zero() {
            theta = t;
            rho = k + 1;
        }
    }
    for x in z.iter_mut() {
        *x = (*x - theta).max(T::zero());
    }
    Some(rho)
}

pub(crate) struct Problem<'a, T> {
    pub y: &'a [Vec<T>],
    pub target: &'a [T],
    pub allowed: &'a [bool],
}

struct Eval<T> {
    u: Vec<Vec<T>>,
    mass: Vec<T>,
    jac: DMatrix<f64>,
}

impl<T: Real> Problem<'_, T> {
    fn chambers(&self) -> usize {
        self.y.len()
    }

    fn eval(&self, lambda: &[T], want_u: bool) -> Eval<T> {
        let nc = self.chambers();
        let len = self.allowed.len();
        let mut u = if want_u { vec![vec![T::zero(); len]; nc] } else { Vec::new() };
        let mut mass = vec![T::zero(); nc];
        let mut jac = DMatrix::<f64>::zeros(nc, nc);
        let mut z = vec![T::zero(); nc];
        let mut scratch = Vec::with_capacity(nc);
        for i in 0..len {
            if !self.allowed[i] {
                continue;
            }
            for h in 0..nc {
                z[h] = self.y[h][i] - lambda[h];
            }
            let active = project_cell(&mut z, &mut scratch);
            match active {
                None => {
                    for h in 0..nc {
                        if z[h] > T::zero() {
                            jac[(h, h)] -= 1.0;
                        }
                    }
                }
                Some(f) => {
                    let inv = 1.0 / f as f64;
                    for h in 0..nc {
                        if z[h] > T::zero() {
                            jac[(h, h)] -= 1.0;
                            for k in 0..nc {
                                if z[k] > T::zero() {
                                    jac[(h, k)] += inv;
                                }
                            }
                        }
                    }
                }
            }
            for h in 0..nc {
                mass[h] += z[h];
                if want_u {
                    u[h][i] = z[h];
                }
            }
        }
        Eval { u, mass, jac }
    }

    fn residual(&self, mass: &[T]) -> T {
        mass.iter().zip(self.target).fold(T::zero(), |m, (&a, &b)| m.max((a - b).mag()))
    }

    fn l1(&self, mass: &[T]) -> T {
        mass.iter().zip(self.target).map(|(&a, &b)| (a - b).mag()).sum()
    }

    /// Solves mass_h(λ_h) = target_h with the other multipliers fixed.
    fn line_solve(&self, lambda: &mut [T], h: usize, tol: T) {
        let c = self.target[h];
        let m_at = |lambda: &[T]| self.eval(lambda, false).mass[h];
        let mut m = m_at(lambda);
        if (m - c).mag() <= tol {
            return;
        }
        // Mass is nonincreasing in λ_h: walk outward until the target is bracketed.
        let mut step = T::one();
        let (mut lo, mut hi) = (lambda[h], lambda[h]);
        let (mut m_lo, mut m_hi) = (m, m);
        for _ in 0..200 {
            if m_lo >= c && m_hi <= c {
                break;
            }
            if m_lo < c {
                lo -= step;
                lambda[h] = lo;
                m_lo = m_at(lambda);
            }
            if m_hi > c {
                hi += step;
                lambda[h] = hi;
                m_hi = m_at(lambda);
            }
            step = step + step;
        }
        // Regula falsi (Illinois) on the piecewise-linear mass, with bisection as a floor.
        let mut side = 0i8;
        for it in 0..200 {
            let x = if m_lo != m_hi && it % 8 != 7 { lo + (m_lo - c) * (hi - lo) / (m_lo - m_hi) } else { (lo + hi) * T::lit(0.5) };
            let x = if x > lo && x < hi { x } else { (lo + hi) * T::lit(0.5) };
            lambda[h] = x;
            m = m_at(lambda);
            if (m - c).mag() <= tol || !(x > lo && x < hi) {
                return;
            }
            if m > c {
                lo = x;
                m_lo = m;
                if side == -1 {
                    m_hi = c + (m_hi - c) * T::lit(0.5);
                }
                side = -1;
            } else {
                hi = x;
                m_hi = m;
                if side == 1 {
                    m_lo = c + (m_lo - c) * T::lit(0.5);
                }
                side = 1;
            }
        }
    }

    pub fn solve(&self, tol: T) -> Result<(Vec<Vec<T>>, T, usize)> {
        let nc = self.chambers();
        let free = self.allowed.iter().filter(|&&b| b).count().max(1);
        let mut lambda: Vec<T> = (0..nc)
            .map(|h| {
                let total: T = (0..self.allowed.len()).filter(|&i| self.allowed[i]).map(|i| self.y[h][i]).sum();
                (total - self.target[h]) / T::of_usize(free)
            })
            .collect();
        let mut ev = self.eval(&lambda, false);
        for sweep in 0..MAX_SWEEPS {
            if self.residual(&ev.mass) <= tol {
                let out = self.eval(&lambda, true);
                let r = self.residual(&out.mass);
                return Ok((out.u, r, sweep));
            }
            let rhs = DVector::from_iterator(nc, (0..nc).map(|h| (self.target[h] - ev.mass[h]).f64()));
            let newton = ev.jac.clone().svd(true, true).solve(&rhs, 1e-12).ok();
            let before = self.l1(&ev.mass);
            let mut accepted = false;
            if let Some(dir) = newton {
                let mut t = 1.0;
                for _ in 0..30 {
                    let trial: Vec<T> = (0..nc).map(|h| lambda[h] + T::lit(t * dir[h])).collect();
                    let e = self.eval(&trial, false);
                    if self.l1(&e.mass) < before {
                        lambda = trial;
                        ev = e;
                        accepted = true;
                        break;
                    }
                    t *= 0.5;
                }
            }
            if !accepted {
                for h in 0..nc {
                    self.line_solve(&mut lambda, h, tol);
                }
                ev = self.eval(&lambda, false);
            }
        }
        let out = self.eval(&lambda, true);
        let r = self.residual(&out.mass);
        if r <= tol {
            Ok((out.u, r, MAX_SWEEPS))
        } else {
            Err(Error::ProjectionStalled(r.f64()))
        }
    }
}

/// Mass tolerance in cell units.
pub(crate) fn mass_tolerance<T: Real>(len: usize) -> T {
    T::lit(1e-10).max(T::epsilon() * T::of_usize(64 * len))
}

/// Cells allowed to carry chambers 1..=N.
pub(crate) fn allowed_cells<T: Real>(domain: &crate::domain::DomainSpec<T>) -> Vec<bool> {
    (0..domain.len()).map(|i| domain.mode() == BoundaryMode::Periodic || !domain.on_outer_layer(i)).collect()
}

/// Projects a soft cluster onto the box, simplex and volume constraints for volumes `m`.
pub fn project_constraints<T: Real>(sc: &SoftCluster<T>, m: &[T]) -> Result<SoftCluster<T>> {
    let d = &sc.domain;
    if m.len() != sc.chambers() {
        return Err(Error::Infeasible(format!("{} volumes for {} chambers", m.len(), sc.chambers())));
    }
    let v = d.cell_volume();
    let allowed = allowed_cells(d);
    let cap = T::of_usize(allowed.iter().filter(|&&b| b).count());
    let target: Vec<T> = m.iter().map(|&x| x / v).collect();
    let total: T = target.iter().copied().sum();
    if target.iter().any(|&c| !(c >= T::zero())) || total > cap * (T::one() + T::epsilon() * T::lit(16.0)) {
        return Err(Error::Infeasible(format!("volumes need {total} cells, {cap} available")));
    }
    let (fields, _, _) = Problem { y: &sc.fields, target: &target, allowed: &allowed }.solve(mass_tolerance(d.len()))?;
    Ok(SoftCluster { domain: d.clone(), fields })
}

/// Largest mass residual in cell units together with the box violation.
pub fn constraint_residual<T: Real>(sc: &SoftCluster<T>, m: &[T]) -> T {
    let v = sc.domain.cell_volume();
    let mass = sc.masses();
    let r = mass.iter().zip(m).fold(T::zero(), |acc, (&a, &b)| acc.max(((a - b) / v).mag()));
    r.max(sc.box_violation())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_projection_cases() {
        let mut s = Vec::new();
        let mut z = [0.2, -0.1, 0.3];
        assert_eq!(project_cell(&mut z, &mut s), None);
        assert_eq!(z, [0.2, 0.0, 0.3]);
        let mut z: [f64; 3] = [0.9, 0.6, -1.0];
        assert_eq!(project_cell(&mut z, &mut s), Some(2));
        assert!((z[0] - 0.65).abs() < 1e-15 && (z[1] - 0.35).abs() < 1e-15 && z[2] == 0.0);
        let mut z = [3.0, 0.5];
        assert_eq!(project_cell(&mut z, &mut s), Some(1));
        assert_eq!(z, [1.0, 0.0]);
    }
}
