//! Grids, cluster representations and their bookkeeping.

mod io;
mod seed;

pub(crate) use io::write_header;
pub use io::{parse_grid, parse_soft, serialize_grid, serialize_soft};
pub use seed::{seed_cluster, SeedDescriptor};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Per-cell membership flags, row-major like the labels.
pub type Mask = Vec<bool>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryMode {
    Periodic,
    Free,
}

impl BoundaryMode {
    pub fn as_str(self) -> &'static str {
        match self {
            BoundaryMode::Periodic => "periodic",
            BoundaryMode::Free => "free",
        }
    }
}

impl std::str::FromStr for BoundaryMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "periodic" => Ok(BoundaryMode::Periodic),
            "free" => Ok(BoundaryMode::Free),
            other => Err(Error::Domain(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DomainSpec<T> {
    n: usize,
    dims: Vec<usize>,
    l: T,
    cell: T,
    mode: BoundaryMode,
    s: T,
}

pub fn make_domain<T: Real>(n: usize, dims: &[usize], l: T, mode: BoundaryMode, s: T) -> Result<DomainSpec<T>> {
    if !(1..=3).contains(&n) {
        return Err(Error::Domain(format!("dimension {n} not in 1..=3")));
    }
    if dims.len() != n {
        return Err(Error::Domain(format!("{} dims given for n = {n}", dims.len())));
    }
    if !(s > T::zero() && s < T::one()) {
        return Err(Error::Range { name: "s", value: s.f64(), why: "must lie in (0,1)" });
    }
    if !(l > T::zero()) || !l.is_finite() {
        return Err(Error::Range { name: "L", value: l.f64(), why: "must be positive and finite" });
    }
    if let Some(&d) = dims.iter().find(|&&d| d < 2) {
        return Err(Error::Domain(format!("axis with {d} cells; every axis needs at least 2")));
    }
    if dims.iter().any(|&d| d != dims[0]) {
        return Err(Error::Domain(format!("non-uniform cellSize: dims {dims:?} with a single side length")));
    }
    if dims.iter().product::<usize>() > u32::MAX as usize {
        return Err(Error::Domain("grid too large".into()));
    }
    Ok(DomainSpec { n, dims: dims.to_vec(), l, cell: l / T::of_usize(dims[0]), mode, s })
}

impl<T: Real> DomainSpec<T> {
    pub fn n(&self) -> usize {
        self.n
    }
    pub fn dims(&self) -> &[usize] {
        &self.dims
    }
    /// Cells per axis (all axes agree).
    pub fn side(&self) -> usize {
        self.dims[0]
    }
    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }
    pub fn is_empty(&self) -> bool {
        false
    }
    pub fn side_length(&self) -> T {
        self.l
    }
    pub fn cell_size(&self) -> T {
        self.cell
    }
    pub fn mode(&self) -> BoundaryMode {
        self.mode
    }
    pub fn s(&self) -> T {
        self.s
    }
    pub fn is_periodic(&self) -> bool {
        self.mode == BoundaryMode::Periodic
    }
    pub fn cell_volume(&self) -> T {
        self.cell.powi(self.n as i32)
    }
    pub fn total_volume(&self) -> T {
        self.l.powi(self.n as i32)
    }

    /// Same domain with every length multiplied by `lambda`.
    pub fn rescaled(&self, lambda: T) -> Result<Self> {
        make_domain(self.n, &self.dims, self.l * lambda, self.mode, self.s)
    }

    pub fn with_s(&self, s: T) -> Result<Self> {
        make_domain(self.n, &self.dims, self.l, self.mode, s)
    }

    pub fn with_mode(&self, mode: BoundaryMode) -> Self {
        DomainSpec { mode, ..self.clone() }
    }

    /// Bitwise equality of every header field.
    pub fn same_as(&self, other: &Self) -> bool {
        self.n == other.n
            && self.dims == other.dims
            && self.l.f64().to_bits() == other.l.f64().to_bits()
            && self.s.f64().to_bits() == other.s.f64().to_bits()
            && self.mode == other.mode
    }

    pub fn coords(&self, mut idx: usize) -> [usize; 3] {
        let p = self.side();
        let mut c = [0usize; 3];
        for a in (0..self.n).rev() {
            c[a] = idx % p;
            idx /= p;
        }
        c
    }

    pub fn index(&self, c: &[usize]) -> usize {
        let p = self.side();
        c[..self.n].iter().fold(0, |acc, &x| acc * p + x)
    }

    /// Neighbor along `axis` in direction `dir` (±1); `None` leaves the box in free mode.
    pub fn neighbor(&self, idx: usize, axis: usize, dir: isize) -> Option<usize> {
        let p = self.side() as isize;
        let mut c = self.coords(idx);
        let x = c[axis] as isize + dir;
        let x = if (0..p).contains(&x) {
            x
        } else if self.is_periodic() {
            x.rem_euclid(p)
        } else {
            return None;
        };
        c[axis] = x as usize;
        Some(self.index(&c))
    }

    pub fn on_outer_layer(&self, idx: usize) -> bool {
        let p = self.side();
        let c = self.coords(idx);
        c[..self.n].iter().any(|&x| x == 0 || x + 1 == p)
    }

    /// Physical center of a cell, origin at the box corner.
    pub fn center(&self, idx: usize) -> [T; 3] {
        let c = self.coords(idx);
        let half = T::lit(0.5);
        let mut x = [T::zero(); 3];
        for a in 0..self.n {
            x[a] = (T::of_usize(c[a]) + half) * self.cell;
        }
        x
    }

    /// Signed cell offset from `j` to `i`, using the minimal image on the torus.
    pub fn offset(&self, i: usize, j: usize) -> [isize; 3] {
        let (ci, cj) = (self.coords(i), self.coords(j));
        let p = self.side() as isize;
        let mut d = [0isize; 3];
        for a in 0..self.n {
            let mut x = ci[a] as isize - cj[a] as isize;
            if self.is_periodic() {
                x = x.rem_euclid(p);
                if x > p / 2 {
                    x -= p;
                }
            }
            d[a] = x;
        }
        d
    }

    /// Displacement from the center of cell `idx` to physical point `x` (minimal image when periodic).
    pub fn displacement(&self, idx: usize, x: &[T]) -> [T; 3] {
        let c = self.center(idx);
        let mut d = [T::zero(); 3];
        for a in 0..self.n {
            let mut v = x[a] - c[a];
            if self.is_periodic() {
                v = v - (v / self.l).round() * self.l;
            }
            d[a] = v;
        }
        d
    }

    pub fn center_distance(&self, i: usize, j: usize) -> T {
        let o = self.offset(i, j);
        let d2: T = o[..self.n].iter().map(|&x| T::lit((x * x) as f64)).sum();
        d2.sqrt() * self.cell
    }

    pub fn point_distance(&self, idx: usize, x: &[T]) -> T {
        let d = self.displacement(idx, x);
        d[..self.n].iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub(crate) fn check_same(&self, other: &Self, a: &'static str, b: &'static str) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(Error::DomainMismatch(a, b))
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LabelGrid<T> {
    domain: DomainSpec<T>,
    chambers: usize,
    labels: Vec<u8>,
}

impl<T: Real> LabelGrid<T> {
    pub fn new(domain: DomainSpec<T>, chambers: usize, labels: Vec<u8>) -> Result<Self> {
        if chambers > u8::MAX as usize {
            return Err(Error::Domain(format!("{chambers} chambers exceed the byte label range")));
        }
        if labels.len() != domain.len() {
            return Err(Error::Truncated { expected: domain.len(), found: labels.len() });
        }
        if let Some(&l) = labels.iter().find(|&&l| l as usize > chambers) {
            return Err(Error::LabelOutOfRange { label: l, n: chambers });
        }
        if domain.mode() == BoundaryMode::Free {
            if let Some(i) = (0..labels.len()).find(|&i| labels[i] != 0 && domain.on_outer_layer(i)) {
                return Err(Error::OuterLayer(i));
            }
        }
        Ok(LabelGrid { domain, chambers, labels })
    }

    pub fn empty(domain: DomainSpec<T>, chambers: usize) -> Self {
        let len = domain.len();
        LabelGrid { domain, chambers, labels: vec![0; len] }
    }

    pub fn domain(&self) -> &DomainSpec<T> {
        &self.domain
    }
    pub fn chambers(&self) -> usize {
        self.chambers
    }
    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    /// Relabel one cell; callers keep the free-mode outer layer clean.
    pub fn set(&mut self, i: usize, h: usize) {
        debug_assert!(h <= self.chambers);
        self.labels[i] = h as u8;
    }

    pub fn mask(&self, h: usize) -> Mask {
        self.labels.iter().map(|&l| l as usize == h).collect()
    }

    pub fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.chambers + 1];
        for &l in &self.labels {
            c[l as usize] += 1;
        }
        c
    }

    /// Same labels seen on a rescaled copy of the domain.
    pub fn on_domain(&self, domain: DomainSpec<T>) -> Result<Self> {
        LabelGrid::new(domain, self.chambers, self.labels.clone())
    }
}

/// Relaxed cluster: `fields[h-1]` is u_h, and u_0 = 1 - Σ u_h is implicit.
#[derive(Clone, Debug, PartialEq)]
pub struct SoftCluster<T> {
    pub domain: DomainSpec<T>,
    pub fields: Vec<Vec<T>>,
}

impl<T: Real> SoftCluster<T> {
    pub fn chambers(&self) -> usize {
        self.fields.len()
    }

    pub fn from_grid(grid: &LabelGrid<T>) -> Self {
        let fields = (1..=grid.chambers())
            .map(|h| grid.labels().iter().map(|&l| if l as usize == h { T::one() } else { T::zero() }).collect())
            .collect();
        SoftCluster { domain: grid.domain().clone(), fields }
    }

    pub fn exterior(&self) -> Vec<T> {
        let mut u0 = vec![T::one(); self.domain.len()];
        for f in &self.fields {
            for (a, &b) in u0.iter_mut().zip(f) {
                *a -= b;
            }
        }
        u0
    }

    /// u_h for h = 0..=N.
    pub fn all_fields(&self) -> Vec<Vec<T>> {
        let mut v = Vec::with_capacity(self.fields.len() + 1);
        v.push(self.exterior());
        v.extend(self.fields.iter().cloned());
        v
    }

    /// Largest violation of 0 ≤ u_h ≤ 1, Σ u_h ≤ 1.
    pub fn box_violation(&self) -> T {
        let mut worst = T::zero();
        for i in 0..self.domain.len() {
            let mut sum = T::zero();
            for f in &self.fields {
                worst = worst.max(-f[i]).max(f[i] - T::one());
                sum += f[i];
            }
            worst = worst.max(sum - T::one());
        }
        worst
    }

    pub fn masses(&self) -> Vec<T> {
        let v = self.domain.cell_volume();
        self.fields.iter().map(|f| f.iter().copied().sum::<T>() * v).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VolumeVector<T>(pub Vec<T>);

impl<T: Real> VolumeVector<T> {
    pub fn new(m: Vec<T>, domain: &DomainSpec<T>) -> Result<Self> {
        if let Some(&bad) = m.iter().find(|&&x| !(x > T::zero()) || !x.is_finite()) {
            return Err(Error::Infeasible(format!("volume {bad} must be positive")));
        }
        let total: T = m.iter().copied().sum();
        let cap = domain.total_volume();
        let ok = match domain.mode() {
            BoundaryMode::Periodic => total <= cap,
            BoundaryMode::Free => total < cap,
        };
        if !ok {
            return Err(Error::Infeasible(format!("total volume {total} exceeds box volume {cap}")));
        }
        Ok(VolumeVector(m))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Target cell counts, rounding each volume to whole cells.
    pub fn cell_counts(&self, domain: &DomainSpec<T>) -> Result<Vec<usize>> {
        let v = domain.cell_volume();
        let counts: Vec<usize> = self.0.iter().map(|&m| (m / v).round().to_usize().unwrap_or(0)).collect();
        let avail = match domain.mode() {
            BoundaryMode::Periodic => domain.len(),
            BoundaryMode::Free => (domain.side() - 2).pow(domain.n() as u32),
        };
        let total: usize = counts.iter().sum();
        if total > avail {
            return Err(Error::Infeasible(format!("{total} cells requested, {avail} available")));
        }
        Ok(counts)
    }
}

/// Volume vector (m_1, ..., m_N) of a labeled grid.
pub fn volumes<T: Real>(grid: &LabelGrid<T>) -> Vec<T> {
    let v = grid.domain().cell_volume();
    grid.counts()[1..].iter().map(|&c| T::of_usize(c) * v).collect()
}

/// Σ_h |Ω ∩ (A(h) Δ B(h))| over h = 0..=N.
pub fn relative_distance<T: Real>(a: &LabelGrid<T>, b: &LabelGrid<T>, region: &[bool]) -> Result<T> {
    a.domain().check_same(b.domain(), "A", "B")?;
    if a.chambers() != b.chambers() {
        return Err(Error::DomainMismatch("A chamber count", "B chamber count"));
    }
    if region.len() != a.labels().len() {
        return Err(Error::DomainMismatch("region", "grid"));
    }
    // A differing cell sits in A(h)ΔB(h) for both its old and new label.
    let differing = (0..region.len()).filter(|&i| region[i] && a.labels[i] != b.labels[i]).count();
    Ok(T::of_usize(2 * differing) * a.domain().cell_volume())
}

/// Cells of chamber `h` with an axis neighbor of a different label.
pub fn boundary_cells<T: Real>(grid: &LabelGrid<T>, h: usize) -> Mask {
    let d = grid.domain();
    (0..d.len())
        .map(|i| {
            grid.label(i) == h
                && (0..d.n()).any(|a| {
                    [-1, 1].iter().any(|&dir| match d.neighbor(i, a, dir) {
                        Some(j) => grid.label(j) != h,
                        None => h != 0,
                    })
                })
        })
        .collect()
}

/// Union of the boundaries of chambers 1..=N.
pub fn cluster_boundary<T: Real>(grid: &LabelGrid<T>) -> Mask {
    let mut m = vec![false; grid.domain().len()];
    for h in 1..=grid.chambers() {
        for (a, b) in m.iter_mut().zip(boundary_cells(grid, h)) {
            *a |= b;
        }
    }
    m
}

pub fn mask_indices(m: &[bool]) -> Vec<usize> {
    (0..m.len()).filter(|&i| m[i]).collect()
}

pub fn mask_count(m: &[bool]) -> usize {
    m.iter().filter(|&&b| b).count()
}
