//! Closed-form reference laws and inverse-CDF samplers.

use rand::RngCore;
use statrs::distribution::{ContinuousCDF, Continuous, Normal, StudentsT};
use statrs::function::beta::beta;

use crate::error::{Error, Result};

/// A continuous law on ℝ with the pieces the population checks need.
pub trait Law: Sync {
    fn pdf(&self, x: f64) -> f64;
    fn cdf(&self, x: f64) -> f64;
    fn quantile(&self, p: f64) -> f64;
    /// `∫_{−∞}^x F`, when available in closed form.
    fn cdf_primitive(&self, _x: f64) -> Option<f64> {
        None
    }
    /// `E X`, when finite and known.
    fn mean(&self) -> Option<f64> {
        None
    }

    /// `n` draws by inversion.
    fn sample(&self, rng: &mut dyn RngCore, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.quantile(open_unit(rng))).collect()
    }
}

/// Uniform on the open interval (0, 1) with 53-bit resolution.
pub fn open_unit(rng: &mut dyn RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// `q_τ(x) = (τ−1)/(2(τ−2)) · (1 + |x|/(τ−2))^{−τ}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QTauFamily {
    tau: f64,
}

impl QTauFamily {
    pub fn new(tau: f64) -> Result<Self> {
        if !(tau > 2.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("q_tau needs tau > 2, got {tau}")));
        }
        Ok(Self { tau })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    fn a(&self) -> f64 {
        self.tau - 2.0
    }

    /// `E|X|^l = (τ−1)·a^l·B(l+1, τ−1−l)`, finite for `l < τ−1`.
    pub fn abs_moment(&self, l: f64) -> Result<f64> {
        if !(l >= 0.0) || l >= self.tau - 1.0 {
            return Err(Error::Integrability { order: l as u32, limit: self.tau - 1.0 });
        }
        if l == 0.0 {
            return Ok(1.0);
        }
        Ok((self.tau - 1.0) * self.a().powf(l) * beta(l + 1.0, self.tau - 1.0 - l))
    }
}

impl Law for QTauFamily {
    fn pdf(&self, x: f64) -> f64 {
        let a = self.a();
        (self.tau - 1.0) / (2.0 * a) * (1.0 + x.abs() / a).powf(-self.tau)
    }

    fn cdf(&self, x: f64) -> f64 {
        let tail = 0.5 * (1.0 + x.abs() / self.a()).powf(1.0 - self.tau);
        if x <= 0.0 {
            tail
        } else {
            1.0 - tail
        }
    }

    fn quantile(&self, p: f64) -> f64 {
        let lower = p.min(1.0 - p);
        let x = self.a() * (1.0 - (2.0 * lower).powf(-1.0 / (self.tau - 1.0)));
        if p <= 0.5 {
            x
        } else {
            -x
        }
    }

    fn cdf_primitive(&self, x: f64) -> Option<f64> {
        let a = self.a();
        let tail = 0.5 * (1.0 + x.abs() / a).powf(2.0 - self.tau);
        Some(if x <= 0.0 { tail } else { x + tail })
    }

    fn mean(&self) -> Option<f64> {
        Some(0.0)
    }
}

pub fn qtau_pdf(tau: f64, x: f64) -> Result<f64> {
    Ok(QTauFamily::new(tau)?.pdf(x))
}

pub fn qtau_cdf(tau: f64, x: f64) -> Result<f64> {
    Ok(QTauFamily::new(tau)?.cdf(x))
}

pub fn qtau_quantile(tau: f64, p: f64) -> Result<f64> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::InvalidParameter(format!("quantile level {p} outside (0, 1)")));
    }
    Ok(QTauFamily::new(tau)?.quantile(p))
}

pub fn moments_qtau(tau: f64, l: f64) -> Result<f64> {
    QTauFamily::new(tau)?.abs_moment(l)
}

/// The Rényi projection of `q_τ` at index `s`: the member `q_{−1/s}`.
pub fn renyi_projection_oracle(tau: f64, s: f64) -> Result<QTauFamily> {
    QTauFamily::new(tau)?;
    if !(s < 0.0 && s > -1.0 / tau) {
        return Err(Error::InvalidParameter(format!(
            "projection of q_{tau} needs -1/tau = {:.6} < s < 0, got s = {s}",
            -1.0 / tau
        )));
    }
    let r = -1.0 / s;
    if !(r > 2.0) {
        return Err(Error::InvalidParameter(format!("-1/s = {r} must exceed 2")));
    }
    QTauFamily::new(r)
}

/// The Rényi projection of `q_τ` for any `s ∈ (−1, 0)`: `q_τ` itself when it is
/// already `s`-concave (`s ≤ −1/τ`), otherwise `q_{−1/s}`.
pub fn renyi_projection(tau: f64, s: f64) -> Result<QTauFamily> {
    let q = QTauFamily::new(tau)?;
    if !(s > -1.0 && s < 0.0) {
        return Err(Error::InvalidIndex { s });
    }
    if s <= -1.0 / tau {
        Ok(q)
    } else {
        renyi_projection_oracle(tau, s)
    }
}

/// Standard Student-t with `ν` degrees of freedom.
#[derive(Clone, Debug)]
pub struct StudentT {
    nu: f64,
    inner: StudentsT,
}

impl StudentT {
    pub fn new(nu: f64) -> Result<Self> {
        let inner = StudentsT::new(0.0, 1.0, nu).map_err(|e| Error::InvalidParameter(format!("student t: {e}")))?;
        Ok(Self { nu, inner })
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    /// The largest `s` for which the density is `s`-concave, `−1/(ν+1)`.
    pub fn concavity_index(&self) -> f64 {
        -1.0 / (self.nu + 1.0)
    }
}

impl Law for StudentT {
    fn pdf(&self, x: f64) -> f64 {
        self.inner.pdf(x)
    }
    fn cdf(&self, x: f64) -> f64 {
        self.inner.cdf(x)
    }
    fn quantile(&self, p: f64) -> f64 {
        self.inner.inverse_cdf(p)
    }
    fn mean(&self) -> Option<f64> {
        (self.nu > 1.0).then_some(0.0)
    }
}

#[derive(Clone, Debug)]
pub struct StandardNormal(Normal);

impl Default for StandardNormal {
    fn default() -> Self {
        Self(Normal::standard())
    }
}

impl Law for StandardNormal {
    fn pdf(&self, x: f64) -> f64 {
        self.0.pdf(x)
    }
    fn cdf(&self, x: f64) -> f64 {
        self.0.cdf(x)
    }
    fn quantile(&self, p: f64) -> f64 {
        self.0.inverse_cdf(p)
    }
    fn mean(&self) -> Option<f64> {
        Some(0.0)
    }
}
