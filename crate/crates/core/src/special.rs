//! Closed-form pieces shared by the kernel tails and the extension integrals.

use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::gamma::ln_gamma;

/// S_β(t) = ∫₀ᵗ (1+σ²)^{-β} dσ for β > 1/2, with its complement to S_β(∞).
#[derive(Clone, Copy, Debug)]
pub struct CauchyPower {
    beta: f64,
    full: f64,
}

impl CauchyPower {
    pub fn new(beta: f64) -> Self {
        assert!(beta > 0.5, "S_beta needs beta > 1/2");
        CauchyPower { beta, full: 0.5 * ln_beta(0.5, beta - 0.5).exp() }
    }

    /// S_β(∞) = B(1/2, β-1/2)/2.
    pub fn full(&self) -> f64 {
        self.full
    }

    /// ∫_t^∞ (1+σ²)^{-β} dσ for t ≥ 0, accurate for large t.
    fn tail(&self, t: f64) -> f64 {
        if t == 0.0 {
            return self.full;
        }
        if !t.is_finite() {
            return 0.0;
        }
        let y = 1.0 / (1.0 + t * t);
        self.full * beta_reg(self.beta - 0.5, 0.5, y)
    }

    pub fn eval(&self, t: f64) -> f64 {
        if t < 0.0 {
            return -self.eval(-t);
        }
        if t <= 1.0 {
            let x = t * t / (1.0 + t * t);
            self.full * beta_reg(0.5, self.beta - 0.5, x)
        } else {
            self.full - self.tail(t)
        }
    }

    /// ∫_c^d (1+σ²)^{-β} dσ without cancellation when both ends are far out.
    pub fn between(&self, c: f64, d: f64) -> f64 {
        if c > d {
            return -self.between(d, c);
        }
        if c >= 0.0 {
            if c > 1.0 {
                self.tail(c) - self.tail(d)
            } else {
                self.eval(d) - self.eval(c)
            }
        } else if d <= 0.0 {
            self.between(-d, -c)
        } else {
            self.eval(d) + self.eval(-c)
        }
    }
}

/// ∫_c^d (q² + t²)^{-β} dt for q > 0.
pub fn line_power(sd: &CauchyPower, q: f64, c: f64, d: f64) -> f64 {
    q.powf(1.0 - 2.0 * sd.beta) * sd.between(c / q, d / q)
}

pub fn gamma(x: f64) -> f64 {
    ln_gamma(x).exp()
}

/// Volume of the unit ball in ℝⁿ.
pub fn unit_ball_volume(n: usize) -> f64 {
    std::f64::consts::PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0 + 1.0)
}
