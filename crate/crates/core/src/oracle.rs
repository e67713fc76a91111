//! Independent verification paths.
//!
//! Everything here deliberately avoids the primary numerical routes: the
//! reference integrator is composite Simpson with Richardson extrapolation
//! (not Gauss–Kronrod), the noise matrix is rebuilt by direct 2×2 matrix
//! quadrature of the propagator integral, and symplectic spectra come from
//! a general eigen-decomposition instead of determinant invariants.

use nalgebra::Matrix2;
use serde::Serialize;

use crate::coefficients::EnvironmentParams;
use crate::dynamics::rotation;
use crate::error::{Error, Result};

const MAX_SIMPSON_PANELS: usize = 1 << 24;

/// Composite Simpson rule on `[a, b]`, doubling the panel count until the
/// Richardson error estimate `|S₂ₙ − Sₙ|/15` drops below `tol` (absolute).
pub fn quad_reference<F>(f: F, a: f64, b: f64, tol: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::domain("reference quadrature needs finite bounds"));
    }
    if !(tol > 0.0) {
        return Err(Error::domain(format!("tolerance must be positive, got {tol}")));
    }
    if a == b {
        return Ok(0.0);
    }
    let mut n = 64;
    let mut prev = simpson(&f, a, b, n);
    loop {
        n *= 2;
        let cur = simpson(&f, a, b, n);
        let err = (cur - prev).abs() / 15.0;
        if err <= tol && n >= 128 {
            return Ok(cur + (cur - prev) / 15.0);
        }
        if n >= MAX_SIMPSON_PANELS {
            return Err(Error::Quadrature(format!(
                "Simpson reference did not reach {tol:e} on [{a}, {b}] (last error {err:e})"
            )));
        }
        prev = cur;
    }
}

fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut odd = 0.0;
    let mut even = 0.0;
    for i in 1..n {
        let x = a + h * i as f64;
        if i % 2 == 1 {
            odd += f(x);
        } else {
            even += f(x);
        }
    }
    h / 3.0 * (f(a) + f(b) + 4.0 * odd + 2.0 * even)
}

/// Central difference `(f(τ+h) − f(τ−h)) / 2h`, falling back to a forward
/// difference when `τ − h < 0`.
pub fn finite_diff<F>(f: F, tau: f64, h: f64) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    if !(h > 0.0) {
        return Err(Error::domain(format!("step must be positive, got {h}")));
    }
    if tau - h < 0.0 {
        return Ok((f(tau + h)? - f(tau)?) / h);
    }
    Ok((f(tau + h)? - f(tau - h)?) / (2.0 * h))
}

/// Uniform grid of `n` cells on `[0, tau]` holding the running integrals of
/// `γ`, `Δ` and `Π`, accumulated with the composite Simpson rule.
struct SimpsonTable {
    h: f64,
    gamma: Vec<f64>,
    delta: Vec<f64>,
    pi: Vec<f64>,
    big_gamma: Vec<f64>,
}

impl SimpsonTable {
    fn build(env: &EnvironmentParams, tau: f64, n: usize) -> Result<Self> {
        // integrands evaluated on a half-step grid so each cell gets a Simpson panel
        let h = tau / n as f64;
        let m = 2 * n + 1;
        let spec = env.spectral();
        let temp = env.temperature();
        let mut fg = Vec::with_capacity(m);
        let mut fd = Vec::with_capacity(m);
        let mut fp = Vec::with_capacity(m);
        for i in 0..m {
            let s = 0.5 * h * i as f64;
            let ks = spec.kernel_sin(s)?;
            let kc = spec.kernel_cos_thermal(s, temp)?;
            fg.push(s.sin() * ks);
            fd.push(s.cos() * kc);
            fp.push(s.sin() * kc);
        }
        let cumulate = |f: &[f64]| -> Vec<f64> {
            let mut out = Vec::with_capacity(n + 1);
            out.push(0.0);
            for k in 0..n {
                let cell = h / 6.0 * (f[2 * k] + 4.0 * f[2 * k + 1] + f[2 * k + 2]);
                out.push(out[k] + cell);
            }
            out
        };
        let gamma = cumulate(&fg);
        let delta = cumulate(&fd);
        let pi = cumulate(&fp);
        // Γ = 2∫γ needs γ at cell midpoints as well; take them from a
        // half-cell Simpson step off the left node.
        let mut big_gamma = Vec::with_capacity(n + 1);
        big_gamma.push(0.0);
        for k in 0..n {
            let s0 = h * k as f64;
            let g_mid = gamma[k] + half_cell(&|s| Ok(s.sin() * spec.kernel_sin(s)?), s0, 0.5 * h)?;
            let cell = h / 6.0 * (gamma[k] + 4.0 * g_mid + gamma[k + 1]);
            big_gamma.push(big_gamma[k] + 2.0 * cell);
        }
        Ok(Self {
            h,
            gamma,
            delta,
            pi,
            big_gamma,
        })
    }
}

fn half_cell<F: Fn(f64) -> Result<f64>>(f: &F, a: f64, w: f64) -> Result<f64> {
    // 4-panel Simpson on a half cell
    let q = w / 4.0;
    let v: Vec<f64> = (0..5).map(|i| f(a + q * i as f64)).collect::<Result<_>>()?;
    Ok(q / 3.0 * (v[0] + 4.0 * v[1] + 2.0 * v[2] + 4.0 * v[3] + v[4]))
}

/// Rebuilds `W̄(τ) = e^{−Γ(τ)} R(τ)⁻ᵀ W(τ) R(τ)⁻¹` with
/// `W(τ) = ∫₀^τ e^{Γ(s)} R(s)ᵀ M(s) R(s) ds` and
/// `M = [[Δ, −Π/2], [−Π/2, 0]]`, by Simpson quadrature on a uniform grid of
/// `grid_n` cells. `Δ`, `Π` and `Γ` are integrated numerically on the same
/// grid from the exact band kernels.
pub fn propagate_w_matrix(env: &EnvironmentParams, tau: f64, grid_n: usize) -> Result<Matrix2<f64>> {
    if grid_n < 256 {
        return Err(Error::domain(format!("grid_n must be at least 256, got {grid_n}")));
    }
    if tau < 0.0 || !tau.is_finite() {
        return Err(Error::domain(format!("tau must be non-negative, got {tau}")));
    }
    if tau == 0.0 {
        return Ok(Matrix2::zeros());
    }
    let n = grid_n + grid_n % 2;
    let table = SimpsonTable::build(env, tau, n)?;
    let g_end = table.big_gamma[n];
    let integrand = |k: usize| -> Matrix2<f64> {
        let s = table.h * k as f64;
        let m = Matrix2::new(table.delta[k], -0.5 * table.pi[k], -0.5 * table.pi[k], 0.0);
        let r = rotation(s);
        r.transpose() * m * r * (table.big_gamma[k] - g_end).exp()
    };
    let mut w = Matrix2::zeros();
    for k in 0..=n {
        let weight = if k == 0 || k == n {
            1.0
        } else if k % 2 == 1 {
            4.0
        } else {
            2.0
        };
        w += integrand(k) * weight;
    }
    w *= table.h / 3.0;
    let r_inv = rotation(tau).transpose();
    // the e^{−Γ(τ)} factor is already folded into the integrand
    Ok(r_inv.transpose() * w * r_inv)
}

/// Returns the grid values `(γ, Γ)` at `τ` from the Simpson table; used to
/// cross-check `Γ′ = 2γ` without touching the adaptive integrator.
pub fn reference_gamma_pair(env: &EnvironmentParams, tau: f64, grid_n: usize) -> Result<(f64, f64)> {
    if tau == 0.0 {
        return Ok((0.0, 0.0));
    }
    let n = grid_n.max(2);
    let t = SimpsonTable::build(env, tau, n)?;
    Ok((t.gamma[n], t.big_gamma[n]))
}

/// One row of a verification table.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct OracleReport {
    pub quantity: String,
    pub primary: f64,
    pub oracle: f64,
    pub abs_dev: f64,
    pub rel_dev: f64,
    pub tolerance: f64,
    /// `"abs"` or `"rel"`: which deviation the tolerance applies to.
    pub criterion: &'static str,
    pub pass: bool,
}

impl OracleReport {
    pub fn relative(quantity: impl Into<String>, primary: f64, oracle: f64, tolerance: f64) -> Self {
        Self::build(quantity.into(), primary, oracle, tolerance, "rel")
    }

    pub fn absolute(quantity: impl Into<String>, primary: f64, oracle: f64, tolerance: f64) -> Self {
        Self::build(quantity.into(), primary, oracle, tolerance, "abs")
    }

    /// The same comparison judged against a different tolerance.
    pub fn with_tolerance(&self, tolerance: f64) -> Self {
        Self::build(self.quantity.clone(), self.primary, self.oracle, tolerance, self.criterion)
    }

    fn build(quantity: String, primary: f64, oracle: f64, tolerance: f64, criterion: &'static str) -> Self {
        let abs_dev = (primary - oracle).abs();
        let rel_dev = if oracle != 0.0 {
            abs_dev / oracle.abs()
        } else if abs_dev == 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        let dev = if criterion == "abs" { abs_dev } else { rel_dev };
        Self {
            quantity,
            primary,
            oracle,
            abs_dev,
            rel_dev,
            tolerance,
            criterion,
            pass: tolerance > 0.0 && dev.is_finite() && dev <= tolerance,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{SpectralDensity, Temperature};
    use std::f64::consts::PI;

    #[test]
    fn reference_integrals() {
        assert!((quad_reference(|s| s, 0.0, 1.0, 1e-14).unwrap() - 0.5).abs() < 1e-15);
        assert!((quad_reference(f64::sin, 0.0, PI, 1e-13).unwrap() - 2.0).abs() < 1e-13);
        assert!(quad_reference(|s| s, 0.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn finite_differences() {
        let d = finite_diff(|t| Ok(t * t), 1.0, 1e-4).unwrap();
        assert!((d - 2.0).abs() < 1e-7);
        // forward fallback near zero
        let d = finite_diff(|t| Ok(t * t), 0.0, 1e-6).unwrap();
        assert!((d - 1e-6).abs() < 1e-12);
        assert!(finite_diff(|t| Ok(t), 1.0, 0.0).is_err());
    }

    #[test]
    fn w_matrix_vanishes_at_zero() {
        let env = EnvironmentParams::new(SpectralDensity::new(1.0, 1.0, 1e-3).unwrap(), Temperature::LowT);
        assert_eq!(propagate_w_matrix(&env, 0.0, 256).unwrap(), Matrix2::zeros());
        assert!(propagate_w_matrix(&env, 1.0, 100).is_err());
    }

    #[test]
    fn report_pass_flags() {
        assert!(OracleReport::relative("x", 1.0, 1.0 + 1e-12, 1e-9).pass);
        assert!(!OracleReport::relative("x", 1.0, 1.1, 1e-9).pass);
        assert!(!OracleReport::absolute("x", 1.0, 1.0 + 1e-12, 0.0).pass);
        assert!(OracleReport::absolute("x", 0.0, 0.0, 1e-12).pass);
    }
}
