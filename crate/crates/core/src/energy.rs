//! Interaction energies, perimeters, potentials and the relaxed cluster energy.
//!
//! Every quantity is a finite kernel sum over cells. In free mode the exterior chamber also
//! owns everything outside the box; its share enters through the far-field weights.

use serde::Serialize;

use crate::domain::{LabelGrid, SoftCluster};
use crate::error::{Error, Result};
use crate::kernel::KernelTensor;
use crate::scalar::Real;

fn check_mask<T: Real>(m: &[bool], kernel: &KernelTensor<T>, what: &'static str) -> Result<()> {
    if m.len() != kernel.domain().len() {
        return Err(Error::DomainMismatch(what, "kernel"));
    }
    Ok(())
}

fn indicator<T: Real>(m: &[bool]) -> Vec<T> {
    m.iter().map(|&b| if b { T::one() } else { T::zero() }).collect()
}

fn sum_over<T: Real>(values: &[T], m: &[bool]) -> T {
    values.iter().zip(m).filter(|(_, &b)| b).map(|(&v, _)| v).sum()
}

fn outer_layer_check<T: Real>(m: &[bool], kernel: &KernelTensor<T>) -> Result<()> {
    let d = kernel.domain();
    if !d.is_periodic() {
        if let Some(i) = (0..m.len()).find(|&i| m[i] && d.on_outer_layer(i)) {
            return Err(Error::OuterLayer(i));
        }
    }
    Ok(())
}

/// Discrete potential v_E(i) = Σ_{j≠i} K(i-j) 1_E(j).
pub fn potential<T: Real>(e: &[bool], kernel: &KernelTensor<T>) -> Result<Vec<T>> {
    check_mask(e, kernel, "E")?;
    kernel.correlate(&indicator(e))
}

/// I_s(E, F) = Σ_{i∈E, j∈F} K(i-j) for disjoint cell sets inside the box.
pub fn interaction<T: Real>(e: &[bool], f: &[bool], kernel: &KernelTensor<T>) -> Result<T> {
    check_mask(e, kernel, "E")?;
    check_mask(f, kernel, "F")?;
    if let Some(i) = (0..e.len()).find(|&i| e[i] && f[i]) {
        return Err(Error::NotDisjoint(i));
    }
    if !f.iter().any(|&b| b) || !e.iter().any(|&b| b) {
        return Ok(T::zero());
    }
    let v = potential(e, kernel)?;
    Ok(sum_over(&v, f))
}

/// P_s(E) = I_s(E, E^c); in free mode E^c includes everything outside the box.
pub fn perimeter<T: Real>(e: &[bool], kernel: &KernelTensor<T>) -> Result<T> {
    check_mask(e, kernel, "E")?;
    outer_layer_check(e, kernel)?;
    perimeter_unchecked(e, kernel)
}

/// P_s(E) for any cell set of the box, outer layer included.
pub(crate) fn perimeter_unchecked<T: Real>(e: &[bool], kernel: &KernelTensor<T>) -> Result<T> {
    if !e.iter().any(|&b| b) {
        return Ok(T::zero());
    }
    let comp: Vec<bool> = e.iter().map(|&b| !b).collect();
    let v = kernel.correlate(&indicator(&comp))?;
    let mut total = T::zero();
    for i in 0..e.len() {
        if e[i] {
            total += v[i] + kernel.far_or_zero(i);
        }
    }
    Ok(total)
}

/// Change of P_s(E) when cell `i` switches membership, from the potential of E.
pub fn flip_delta<T: Real>(e: &[bool], v_e: &[T], i: usize, kernel: &KernelTensor<T>) -> T {
    let gain = kernel.row_sums()[i] + kernel.far_or_zero(i) - v_e[i] - v_e[i];
    if e[i] {
        -gain
    } else {
        gain
    }
}

/// P_s(E; Ω): the part of P_s(E) seen by the cell set Ω. The far field lies outside Ω.
pub fn relative_perimeter<T: Real>(e: &[bool], omega: &[bool], kernel: &KernelTensor<T>) -> Result<T> {
    check_mask(e, kernel, "E")?;
    check_mask(omega, kernel, "Omega")?;
    let len = e.len();
    let pick = |ein: bool, oin: bool| -> Vec<bool> { (0..len).map(|i| e[i] == ein && omega[i] == oin).collect() };
    let e_in = pick(true, true);
    let c_in = pick(false, true);
    let e_out = pick(true, false);
    let c_out = pick(false, false);
    let mut total = T::zero();
    if e_in.iter().any(|&b| b) {
        let v_c_in = kernel.correlate(&indicator(&c_in))?;
        let v_c_out = kernel.correlate(&indicator(&c_out))?;
        for i in 0..len {
            if e_in[i] {
                total += v_c_in[i] + v_c_out[i] + kernel.far_or_zero(i);
            }
        }
    }
    if e_out.iter().any(|&b| b) {
        let v_e_out = kernel.correlate(&indicator(&e_out))?;
        total += sum_over(&v_e_out, &c_in);
    }
    Ok(total)
}

/// ½ Σ_h P_s(𝓔(h); Ω).
pub fn cluster_relative_perimeter<T: Real>(grid: &LabelGrid<T>, omega: &[bool], kernel: &KernelTensor<T>) -> Result<T> {
    grid.domain().check_same(kernel.domain(), "grid", "kernel")?;
    let mut total = T::zero();
    for h in 0..=grid.chambers() {
        total += relative_perimeter(&grid.mask(h), omega, kernel)?;
    }
    Ok(total * T::lit(0.5))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct EnergyBreakdown<T> {
    pub total: T,
    /// P_s(𝓔(h)) for h = 0..=N.
    pub per_chamber: Vec<T>,
    /// Symmetric (N+1)² matrix of I_s(𝓔(h), 𝓔(k)) with zero diagonal.
    pub pairwise: Vec<Vec<T>>,
}

impl<T: Real> EnergyBreakdown<T> {
    pub fn to_json(&self) -> String {
        let row = |v: &[T]| format!("[{}]", v.iter().map(|x| fmt17(x.f64())).collect::<Vec<_>>().join(","));
        let pairs: Vec<String> = self.pairwise.iter().map(|r| row(r)).collect();
        format!("{{\"total\":{},\"perChamber\":{},\"pairwise\":[{}]}}", fmt17(self.total.f64()), row(&self.per_chamber), pairs.join(","))
    }

    /// Rows `quantity,h,k,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("quantity,h,k,value\n");
        out += &format!("total,,,{}\n", fmt17(self.total.f64()));
        for (h, v) in self.per_chamber.iter().enumerate() {
            out += &format!("perChamber,{h},,{}\n", fmt17(v.f64()));
        }
        for h in 0..self.pairwise.len() {
            for k in h + 1..self.pairwise.len() {
                out += &format!("pairwise,{h},{k},{}\n", fmt17(self.pairwise[h][k].f64()));
            }
        }
        out
    }
}

/// Decimal rendering with 17 significant digits.
pub fn fmt17(x: f64) -> String {
    if !x.is_finite() {
        return if x.is_nan() {
            "null".into()
        } else if x > 0.0 {
            "1e308".into()
        } else {
            "-1e308".into()
        };
    }
    if x == 0.0 {
        return "0.0000000000000000".into();
    }
    let sci = format!("{x:.16e}");
    let (mant, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-6..=20).contains(&exp) {
        return sci;
    }
    let (sign, mant) = mant.strip_prefix('-').map_or(("", mant), |m| ("-", m));
    let digits: String = mant.chars().filter(|c| c.is_ascii_digit()).collect();
    let point = exp + 1;
    let body = if point <= 0 {
        format!("0.{}{}", "0".repeat((-point) as usize), digits)
    } else if point as usize >= digits.len() {
        format!("{}{}.0", digits, "0".repeat(point as usize - digits.len()))
    } else {
        format!("{}.{}", &digits[..point as usize], &digits[point as usize..])
    };
    format!("{sign}{body}")
}

/// Cluster energy ½ Σ_h P_s(𝓔(h)) with its per-chamber and pairwise parts.
pub fn cluster_perimeter<T: Real>(grid: &LabelGrid<T>, kernel: &KernelTensor<T>) -> Result<EnergyBreakdown<T>> {
    grid.domain().check_same(kernel.domain(), "grid", "kernel")?;
    let big_n = grid.chambers();
    let masks: Vec<Vec<bool>> = (0..=big_n).map(|h| grid.mask(h)).collect();
    let pots: Vec<Vec<T>> = masks
        .iter()
        .map(|m| if m.iter().any(|&b| b) { kernel.correlate(&indicator(m)) } else { Ok(vec![T::zero(); m.len()]) })
        .collect::<Result<_>>()?;
    let mut pairwise = vec![vec![T::zero(); big_n + 1]; big_n + 1];
    for h in 0..=big_n {
        for k in h + 1..=big_n {
            let mut v = sum_over(&pots[h], &masks[k]);
            if h == 0 {
                if let Some(w) = kernel.far() {
                    v += sum_over(w, &masks[k]);
                }
            }
            pairwise[h][k] = v;
            pairwise[k][h] = v;
        }
    }
    let mut per_chamber = Vec::with_capacity(big_n + 1);
    if kernel.domain().is_periodic() {
        for m in &masks {
            per_chamber.push(perimeter(m, kernel)?);
        }
    } else {
        // The exterior chamber is unbounded; use P_s(𝓔(0)) = P_s(∪_{h≥1} 𝓔(h)).
        let inner: Vec<bool> = masks[0].iter().map(|&b| !b).collect();
        per_chamber.push(perimeter(&inner, kernel)?);
        for m in &masks[1..] {
            per_chamber.push(perimeter(m, kernel)?);
        }
    }
    let total = per_chamber.iter().copied().sum::<T>() * T::lit(0.5);
    Ok(EnergyBreakdown { total, per_chamber, pairwise })
}

/// Labeled grid together with one potential per chamber, giving O(1) relabel and swap
/// deltas and O(cells) updates.
#[derive(Clone, Debug)]
pub struct ClusterState<'k, T: Real> {
    kernel: &'k KernelTensor<T>,
    grid: LabelGrid<T>,
    pots: Vec<Vec<T>>,
    energy: T,
}

impl<'k, T: Real> ClusterState<'k, T> {
    pub fn new(grid: LabelGrid<T>, kernel: &'k KernelTensor<T>) -> Result<Self> {
        let energy = cluster_perimeter(&grid, kernel)?.total;
        let pots = (0..=grid.chambers()).map(|h| kernel.correlate(&indicator(&grid.mask(h)))).collect::<Result<_>>()?;
        Ok(ClusterState { kernel, grid, pots, energy })
    }

    pub fn grid(&self) -> &LabelGrid<T> {
        &self.grid
    }

    pub fn into_grid(self) -> LabelGrid<T> {
        self.grid
    }

    pub fn kernel(&self) -> &'k KernelTensor<T> {
        self.kernel
    }

    /// Energy tracked through accepted moves.
    pub fn energy(&self) -> T {
        self.energy
    }

    pub fn potential(&self, h: usize) -> &[T] {
        &self.pots[h]
    }

    fn far_sign(&self, i: usize, from: usize, to: usize) -> T {
        let w = self.kernel.far_or_zero(i);
        match (from == 0, to == 0) {
            (true, false) => w,
            (false, true) => -w,
            _ => T::zero(),
        }
    }

    /// Energy change of relabeling cell `i` to chamber `to`.
    pub fn relabel_delta(&self, i: usize, to: usize) -> T {
        let from = self.grid.label(i);
        if from == to {
            return T::zero();
        }
        self.pots[from][i] - self.pots[to][i] + self.far_sign(i, from, to)
    }

    /// Energy change of exchanging the labels of cells `i` and `j`.
    pub fn swap_delta(&self, i: usize, j: usize) -> T {
        let (a, b) = (self.grid.label(i), self.grid.label(j));
        if a == b {
            return T::zero();
        }
        let k = self.kernel.pair(i, j);
        self.pots[a][i] - self.pots[b][i] + self.pots[b][j] - self.pots[a][j] + k + k + self.far_sign(i, a, b) + self.far_sign(j, b, a)
    }

    /// Applies a relabel and returns its energy change.
    pub fn relabel(&mut self, i: usize, to: usize) -> T {
        let from = self.grid.label(i);
        if from == to {
            return T::zero();
        }
        let delta = self.relabel_delta(i, to);
        let d = self.kernel.domain();
        for x in 0..d.len() {
            let k = self.kernel.pair(x, i);
            self.pots[from][x] -= k;
            self.pots[to][x] += k;
        }
        self.grid.set(i, to);
        self.energy += delta;
        delta
    }

    pub fn swap(&mut self, i: usize, j: usize) -> T {
        let (a, b) = (self.grid.label(i), self.grid.label(j));
        self.relabel(i, b) + self.relabel(j, a)
    }

    /// Replaces the tracked energy by a fresh evaluation, removing accumulated drift.
    pub fn refresh(&mut self) -> Result<T> {
        self.energy = cluster_perimeter(&self.grid, self.kernel)?.total;
        Ok(self.energy)
    }
}

/// 𝓙(u) = ½ Σ_{i≠j} K(i-j)(u_i - u_j)² and the correlation K⋆u it was built from.
fn gagliardo<T: Real>(u: &[T], kernel: &KernelTensor<T>) -> Result<(T, Vec<T>)> {
    let ku = kernel.correlate(u)?;
    let d = kernel.row_sums();
    let j = (0..u.len()).map(|i| u[i] * (d[i] * u[i] - ku[i])).sum();
    Ok((j, ku))
}

fn check_soft<T: Real>(sc: &SoftCluster<T>, kernel: &KernelTensor<T>) -> Result<()> {
    sc.domain.check_same(kernel.domain(), "soft cluster", "kernel")?;
    if sc.fields.iter().any(|f| f.len() != sc.domain.len()) {
        return Err(Error::DomainMismatch("soft field", "domain"));
    }
    let v = sc.box_violation();
    if v > T::lit(1e-9) {
        return Err(Error::Constraint(v.f64()));
    }
    Ok(())
}

/// ½ Σ_{h=0}^N 𝓙(u_h) plus the free-mode far-field term Σ_i wFar(i) Σ_{h≥1} u_h(i).
pub fn soft_energy<T: Real>(sc: &SoftCluster<T>, kernel: &KernelTensor<T>) -> Result<T> {
    check_soft(sc, kernel)?;
    let mut total = T::zero();
    for u in sc.all_fields() {
        total += gagliardo(&u, kernel)?.0;
    }
    total *= T::lit(0.5);
    if let Some(w) = kernel.far() {
        for f in &sc.fields {
            total += f.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>();
        }
    }
    Ok(total)
}

/// Energy and gradient with respect to u_1..u_N (u_0 = 1 - Σ u_h eliminated).
pub fn soft_energy_and_gradient<T: Real>(sc: &SoftCluster<T>, kernel: &KernelTensor<T>) -> Result<(T, Vec<Vec<T>>)> {
    check_soft(sc, kernel)?;
    let d = kernel.row_sums();
    let len = sc.domain.len();
    let mut total = T::zero();
    let mut parts = Vec::with_capacity(sc.chambers() + 1);
    for u in sc.all_fields() {
        let (j, ku) = gagliardo(&u, kernel)?;
        total += j;
        let g: Vec<T> = (0..len).map(|i| d[i] * u[i] - ku[i]).collect();
        parts.push(g);
    }
    total *= T::lit(0.5);
    let far = kernel.far();
    if let Some(w) = far {
        for f in &sc.fields {
            total += f.iter().zip(w).map(|(&a, &b)| a * b).sum::<T>();
        }
    }
    let g0 = &parts[0];
    let grads = parts[1..].iter().map(|gh| (0..len).map(|i| gh[i] - g0[i] + far.map_or(T::zero(), |w| w[i])).collect()).collect();
    Ok((total, grads))
}

pub fn soft_gradient<T: Real>(sc: &SoftCluster<T>, kernel: &KernelTensor<T>) -> Result<Vec<Vec<T>>> {
    Ok(soft_energy_and_gradient(sc, kernel)?.1)
}
