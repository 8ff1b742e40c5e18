use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Even double-well potential: exactly `(|t| - 1)² / (2 C₀)` for
/// `|t| ≥ 1 - δ₀` and an even quartic `a + b t² + c t⁴` inside, matched to
/// second order at `|t| = 1 - δ₀`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Potential {
    c0: f64,
    delta0: f64,
    a: f64,
    b: f64,
    c: f64,
}

pub fn build_potential(c0: f64, delta0: f64) -> Result<Potential> {
    Potential::new(c0, delta0)
}

impl Default for Potential {
    fn default() -> Self {
        Potential::new(1.0, 0.5).expect("default potential is admissible")
    }
}

impl Potential {
    pub fn new(c0: f64, delta0: f64) -> Result<Self> {
        if !(c0.is_finite() && c0 > 0.0) {
            return Err(invalid("c0", format!("{c0} must be positive")));
        }
        if !(delta0 > 0.0 && delta0 < 1.0) {
            return Err(invalid("delta0", format!("{delta0} must lie in (0, 1)")));
        }
        let tau = 1.0 - delta0;
        let c = 1.0 / (8.0 * c0 * tau.powi(3));
        let b = -(delta0 + 0.5) / (2.0 * c0 * tau);
        let a = delta0 * delta0 / (2.0 * c0) - b * tau * tau - c * tau.powi(4);
        let w = Potential {
            c0,
            delta0,
            a,
            b,
            c,
        };
        w.check_shape()?;
        Ok(w)
    }

    /// Sampled check that the bridge is positive and strictly decreasing on
    /// `[0, 1 - δ₀]`.
    fn check_shape(&self) -> Result<()> {
        let tau = self.threshold();
        let samples = 4096;
        let mut prev = self.value(0.0);
        for k in 1..=samples {
            let t = tau * k as f64 / samples as f64;
            let w = self.value(t);
            if !(w < prev) || self.derivative(t) >= 0.0 || w <= 0.0 {
                return Err(invalid(
                    "delta0",
                    format!("bridge is not strictly decreasing near t = {t}"),
                ));
            }
            prev = w;
        }
        Ok(())
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn delta0(&self) -> f64 {
        self.delta0
    }

    /// `1 - δ₀`, where the quadratic well takes over.
    pub fn threshold(&self) -> f64 {
        1.0 - self.delta0
    }

    pub fn bridge_coefficients(&self) -> (f64, f64, f64) {
        (self.a, self.b, self.c)
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = t.abs();
        if x >= self.threshold() {
            let y = x - 1.0;
            y * y / (2.0 * self.c0)
        } else {
            let x2 = x * x;
            self.a + x2 * (self.b + self.c * x2)
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        let x = t.abs();
        let d = if x >= self.threshold() {
            (x - 1.0) / self.c0
        } else {
            x * (2.0 * self.b + 4.0 * self.c * x * x)
        };
        if t < 0.0 {
            -d
        } else {
            d
        }
    }

    pub fn second_derivative(&self, t: f64) -> f64 {
        let x = t.abs();
        if x >= self.threshold() {
            1.0 / self.c0
        } else {
            2.0 * self.b + 12.0 * self.c * x * x
        }
    }

    /// `sup W'' = 1/C₀`, attained on the quadratic wells.
    pub fn max_curvature(&self) -> f64 {
        1.0 / self.c0
    }

    /// `W(t + δ) - W(t)` without cancellation when `δ` is small.
    pub fn difference(&self, t: f64, delta: f64) -> f64 {
        let u = t + delta;
        let (x, y) = (u.abs(), t.abs());
        let tau = self.threshold();
        if x >= tau && y >= tau {
            // (x-1)² - (y-1)² = (x-y)(x+y-2)
            (x - y) * (x + y - 2.0) / (2.0 * self.c0)
        } else if x < tau && y < tau {
            let dx = x - y;
            let s = x + y;
            dx * s * (self.b + self.c * (x * x + y * y))
        } else {
            self.value(u) - self.value(t)
        }
    }
}
