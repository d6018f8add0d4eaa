//! Quantitative lemmas of the regularity theory as executable checks.
//!
//! Every check returns a [`CheckReport`] with the measured values, the bounds they were held
//! to and the tolerance used. Geometric checks allow one cell layer of rasterization slack;
//! the exact formula is recorded in the report context.

mod blowup;
mod bounds;
mod density;
mod edt;
mod nucleation;
mod stability;
mod truncation;

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

pub use blowup::{blowup, BlowupClass, BlowupReport, ScaleReport};
pub use bounds::{check_isoperimetric, check_sandwich, isoperimetric_slack};
pub(crate) use density::chambers_at;
pub use density::{check_density, check_infiltration, DensityBounds};
pub use edt::distance_to;
pub use nucleation::{nucleate, nucleation_epsilon_bound, Nucleation};
pub use stability::{local_stability, Perturbation};
pub use truncation::{truncate, Truncation, TruncationRow};

use crate::domain::DomainSpec;
use crate::energy::perimeter;
use crate::error::{Error, Result};
use crate::kernel::{build_kernel, KernelOptions};
use crate::scalar::Real;
use crate::special::unit_ball_volume;

/// Default Besicovitch constants ξ(1), ξ(2), ξ(3).
pub const XI_DEFAULT: [f64; 3] = [2.0, 19.0, 87.0];

pub fn default_xi(n: usize) -> f64 {
    XI_DEFAULT[n.clamp(1, 3) - 1]
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct BallPerimeter {
    pub value: f64,
    pub error: f64,
}

/// (|B| - γ(r))/r for the covariogram γ of the unit ball, 0 < r ≤ 2.
fn covariogram_deficit(n: usize, r: f64) -> f64 {
    match n {
        1 => 1.0,
        2 => (2.0 * (0.5 * r).asin() + 0.5 * r * (4.0 - r * r).max(0.0).sqrt()) / r,
        _ => std::f64::consts::PI * (1.0 - r * r / 12.0),
    }
}

fn midpoint(f: &dyn Fn(f64) -> f64, m: usize) -> f64 {
    let h = 1.0 / m as f64;
    (0..m).map(|k| f((k as f64 + 0.5) * h)).sum::<f64>() * h
}

/// P_s(B_1) in ℝⁿ from the covariogram identity
/// P_s(B) = |∂B| (∫₀² (|B| - γ(r)) r^{-1-s} dr + |B| 2^{-s}/s),
/// with midpoint panels at `resolution` and twice that, Richardson-extrapolated.
pub fn ball_perimeter_s(n: usize, s: f64, resolution: usize) -> Result<BallPerimeter> {
    if !(1..=3).contains(&n) {
        return Err(Error::Domain(format!("dimension {n} not in 1..=3")));
    }
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::Range { name: "s", value: s, why: "must lie in (0, 1)" });
    }
    let m = resolution.max(8);
    let q = 1.0 / (1.0 - s);
    // [0,1] with r = v^q flattens r^{-s}; [1,2] with r = 2 - t² flattens √(2-r).
    let near = |v: f64| q * covariogram_deficit(n, v.powf(q));
    let far = |t: f64| {
        let r = 2.0 - t * t;
        covariogram_deficit(n, r) * r.powf(-s) * 2.0 * t
    };
    let integral = |m: usize| midpoint(&near, m) + midpoint(&far, m);
    let (coarse, fine) = (integral(m), integral(2 * m));
    let extrapolated = (4.0 * fine - coarse) / 3.0;
    let vol = unit_ball_volume(n);
    let sphere = n as f64 * vol;
    let tail = vol * 2f64.powf(-s) / s;
    Ok(BallPerimeter { value: sphere * (extrapolated + tail), error: sphere * (extrapolated - fine).abs() })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct PaperConstants {
    pub n: usize,
    pub s: f64,
    pub chambers: usize,
    pub lambda: f64,
    pub r0: f64,
    pub xi: f64,
    /// |B| = ω_n.
    pub ball_volume: f64,
    /// P(B) = n ω_n.
    pub ball_perimeter: f64,
    /// P_s(B) and its quadrature error.
    pub ps_ball: f64,
    pub ps_ball_error: f64,
    pub c1: f64,
    pub c2: f64,
    pub chi1: f64,
    pub chi2: f64,
    pub r1: f64,
    pub c0: f64,
    pub sigma0: f64,
    /// Perimeter growth constant (2N+1) P_s(B) + Λ |B| r₀ˢ / (1-s).
    pub c0_perimeter: f64,
}

pub fn paper_constants(n: usize, s: f64, chambers: usize, lambda: f64, r0: f64, xi: f64) -> Result<PaperConstants> {
    if !(lambda >= 0.0) {
        return Err(Error::Range { name: "lambda", value: lambda, why: "must be nonnegative" });
    }
    if !(r0 > 0.0) {
        return Err(Error::Range { name: "r0", value: r0, why: "must be positive" });
    }
    if !(xi >= 1.0) {
        return Err(Error::Range { name: "xi", value: xi, why: "must be at least 1" });
    }
    if chambers == 0 {
        return Err(Error::Range { name: "N", value: 0.0, why: "need at least one chamber" });
    }
    let ps = ball_perimeter_s(n, s, 2048)?;
    let nf = n as f64;
    let b = unit_ball_volume(n);
    let pb = nf * b;
    let psb = ps.value;
    let bpow = b.powf((nf - s) / nf);
    let c1 = 2f64.powf(1.0 + (nf - s) / s) * (4.0 * bpow * pb / (s * (1.0 - s) * psb)).powf(1.0 / s);
    let c2 = 2.0 * bpow / ((1.0 - s) * psb);
    let chi1 = (1.0 - s) * psb / (4.0 * bpow * xi);
    let chi2 = 2f64.powf(3.0 + nf / s) * bpow * pb / (s * (1.0 - s) * psb);
    let r1 = if lambda == 0.0 { r0 } else { r0.min(((1.0 - s) * psb / (chambers as f64 * lambda * b)).powf(1.0 / s)) };
    let c0 = (s * (1.0 - s) * psb / (4.0 * (chambers as f64 + 1.0) * b * 2f64.powf(nf / s) * pb)).powf(nf / s);
    let lambda_term = if lambda == 0.0 { 0.0 } else { lambda * b * r0.powf(s) / (1.0 - s) };
    Ok(PaperConstants {
        n,
        s,
        chambers,
        lambda,
        r0,
        xi,
        ball_volume: b,
        ball_perimeter: pb,
        ps_ball: psb,
        ps_ball_error: ps.error,
        c1,
        c2,
        chi1,
        chi2,
        r1,
        c0,
        sigma0: c0 * b,
        c0_perimeter: (2.0 * chambers as f64 + 1.0) * psb + lambda_term,
    })
}

impl PaperConstants {
    /// Relative defects of C₂(1-s)P_s(B) = 2|B|^{(n-s)/n} and χ₁·4|B|^{(n-s)/n}ξ = (1-s)P_s(B).
    pub fn identity_defects(&self) -> [f64; 2] {
        let nf = self.n as f64;
        let bpow = self.ball_volume.powf((nf - self.s) / nf);
        let a = self.c2 * (1.0 - self.s) * self.ps_ball / (2.0 * bpow) - 1.0;
        let b = self.chi1 * 4.0 * bpow * self.xi / ((1.0 - self.s) * self.ps_ball) - 1.0;
        [a.abs(), b.abs()]
    }
}

/// Outcome of one check, self-describing and serializable.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckReport {
    pub check: String,
    pub pass: bool,
    /// Diagnostic reports never make a suite fail.
    pub diagnostic: bool,
    pub tolerance: f64,
    pub measured: BTreeMap<String, f64>,
    pub bounds: BTreeMap<String, f64>,
    pub context: BTreeMap<String, Value>,
}

impl CheckReport {
    pub fn new(check: &str, tolerance: f64) -> Self {
        CheckReport {
            check: check.into(),
            pass: true,
            diagnostic: false,
            tolerance,
            measured: BTreeMap::new(),
            bounds: BTreeMap::new(),
            context: BTreeMap::new(),
        }
    }

    pub fn measure(&mut self, key: &str, value: f64) -> &mut Self {
        self.measured.insert(key.into(), value);
        self
    }

    pub fn bound(&mut self, key: &str, value: f64) -> &mut Self {
        self.bounds.insert(key.into(), value);
        self
    }

    pub fn note(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.context.insert(key.into(), value.into());
        self
    }

    pub fn fail_if(&mut self, violated: bool) -> &mut Self {
        self.pass &= !violated;
        self
    }

    pub fn to_ndjson(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }

    /// Rows `check,pass,quantity,measured,bound`, one per measured key.
    pub fn to_csv_rows(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.measured {
            let b = self.bounds.get(k).map(|b| format!("{b:e}")).unwrap_or_default();
            out += &format!("{},{},{},{:e},{}\n", self.check, self.pass, k, v, b);
        }
        out
    }
}

pub const CSV_HEADER: &str = "check,pass,quantity,measured,bound\n";

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct GammaTrend {
    pub s: Vec<f64>,
    /// (1-s) P_s(E) / P(E) per order.
    pub ratio: Vec<f64>,
    pub differences: Vec<f64>,
    pub shrinking: bool,
    /// Linear extrapolation of the last two ratios to s = 1.
    pub limit: f64,
}

/// (1-s) P_s(E)/P(E) for one cell set over a list of orders, with `classical` the perimeter P(E).
pub fn gamma_trend<T: Real>(domain: &DomainSpec<T>, e: &[bool], classical: f64, orders: &[f64]) -> Result<GammaTrend> {
    if orders.len() < 3 {
        return Err(Error::Precondition("need at least three orders".into()));
    }
    let mut ratio = Vec::with_capacity(orders.len());
    for &s in orders {
        let d = domain.with_s(T::lit(s))?;
        let k = build_kernel(&d, KernelOptions::default())?;
        ratio.push((1.0 - s) * perimeter(e, &k)?.f64() / classical);
    }
    let differences: Vec<f64> = ratio.windows(2).map(|w| w[1] - w[0]).collect();
    let shrinking = differences.windows(2).all(|w| w[1].abs() < w[0].abs());
    let k = orders.len();
    let slope = (ratio[k - 1] - ratio[k - 2]) / (orders[k - 1] - orders[k - 2]);
    let limit = ratio[k - 1] + slope * (1.0 - orders[k - 1]);
    Ok(GammaTrend { s: orders.to_vec(), ratio, differences, shrinking, limit })
}
