//! Finite-bandwidth spectral densities and their frequency integrals.
//!
//! The environment spectrum is a rectangular band of height `j0` on
//! `[omega_lo, omega_lo + delta)`. The two kernels below are the inner
//! frequency integrals appearing in every master-equation coefficient:
//!
//! * `kernel_sin(s)  = ∫ J(ω) sin(ωs) dω`
//! * `kernel_cos_thermal(s) = ∫ coth(βω/2) J(ω) cos(ωs) dω`
//!
//! Frequencies and times are dimensionless, in units of the system
//! frequency ω₀.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::{integrate_vec_with_breaks, Tolerance};

/// Below this value of `s·(Ω+δ)` the closed-form kernels switch to their
/// Taylor series.
pub const SERIES_CROSSOVER: f64 = 1e-4;

/// Rectangular band `J(ω) = j0 · 1[Ω ≤ ω < Ω+δ]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    j0: f64,
    omega_lo: f64,
    delta: f64,
}

impl SpectralDensity {
    pub fn new(j0: f64, omega_lo: f64, delta: f64) -> Result<Self> {
        if !(j0 > 0.0 && j0.is_finite()) {
            return Err(Error::domain(format!("j0 must be positive, got {j0}")));
        }
        if !(delta > 0.0 && delta.is_finite()) {
            return Err(Error::domain(format!("delta must be positive, got {delta}")));
        }
        if !(omega_lo >= 0.0 && omega_lo.is_finite()) {
            return Err(Error::domain(format!(
                "omega_lo must be non-negative, got {omega_lo}"
            )));
        }
        Ok(Self { j0, omega_lo, delta })
    }

    pub fn j0(&self) -> f64 {
        self.j0
    }

    pub fn omega_lo(&self) -> f64 {
        self.omega_lo
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn omega_hi(&self) -> f64 {
        self.omega_lo + self.delta
    }

    /// The product `j0·δ`, the only combination the diffusion terms see.
    pub fn j0_delta(&self) -> f64 {
        self.j0 * self.delta
    }

    pub fn evaluate(&self, omega: f64) -> Result<f64> {
        if omega < 0.0 || omega.is_nan() {
            return Err(Error::domain(format!("frequency must be non-negative, got {omega}")));
        }
        Ok(if omega >= self.omega_lo && omega < self.omega_hi() {
            self.j0
        } else {
            0.0
        })
    }

    /// `∫₀^∞ J(ω) sin(ωs) dω`.
    pub fn kernel_sin(&self, s: f64) -> Result<f64> {
        check_time(s)?;
        let (a, b) = (self.omega_lo, self.omega_hi());
        if s * b < SERIES_CROSSOVER {
            let d2 = self.delta * (a + b); // b² − a²
            let d4 = d2 * (a * a + b * b); // b⁴ − a⁴
            return Ok(self.j0 * (0.5 * s * d2 - s.powi(3) * d4 / 24.0));
        }
        // cos(as) − cos(bs) written as a product to avoid cancellation for thin bands
        let mid = a + 0.5 * self.delta;
        Ok(2.0 * self.j0 * (mid * s).sin() * (0.5 * self.delta * s).sin() / s)
    }

    /// `∫₀^∞ coth(βω/2) J(ω) cos(ωs) dω`, with `coth → 1` in the low-temperature limit.
    pub fn kernel_cos_thermal(&self, s: f64, temperature: Temperature) -> Result<f64> {
        check_time(s)?;
        match temperature {
            Temperature::LowT => Ok(self.kernel_cos_low_t(s)),
            Temperature::Beta(beta) => self.kernel_cos_finite_beta(s, beta),
        }
    }

    fn kernel_cos_low_t(&self, s: f64) -> f64 {
        let (a, b) = (self.omega_lo, self.omega_hi());
        if s * b < SERIES_CROSSOVER {
            let d3 = self.delta * (a * a + a * b + b * b); // b³ − a³
            return self.j0 * (self.delta - s * s * d3 / 6.0);
        }
        if s == 0.0 {
            return self.j0 * self.delta;
        }
        let mid = a + 0.5 * self.delta;
        2.0 * self.j0 * (mid * s).cos() * (0.5 * self.delta * s).sin() / s
    }

    fn kernel_cos_finite_beta(&self, s: f64, beta: f64) -> Result<f64> {
        if !(beta > 0.0) {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        if self.omega_lo == 0.0 {
            return Err(Error::domain(
                "coth(βω/2)·J(ω) is not integrable at ω = 0; finite β needs omega_lo > 0",
            ));
        }
        let (a, b) = (self.omega_lo, self.omega_hi());
        // one breakpoint per oscillation period of cos(ωs)
        let pieces = if s > 0.0 {
            ((b - a) * s / (2.0 * std::f64::consts::PI)).ceil().clamp(1.0, 4096.0) as usize
        } else {
            1
        };
        let breaks: Vec<f64> = (0..=pieces)
            .map(|i| a + (b - a) * i as f64 / pieces as f64)
            .collect();
        let est = integrate_vec_with_breaks(
            |w| [coth_half(beta, w) * (w * s).cos()],
            &breaks,
            Tolerance::default(),
        )?;
        Ok(self.j0 * est.value[0])
    }
}

/// `coth(βω/2) = 2N(ω) + 1`.
pub fn coth_half(beta: f64, omega: f64) -> f64 {
    1.0 / (0.5 * beta * omega).tanh()
}

fn check_time(s: f64) -> Result<()> {
    if s < 0.0 || !s.is_finite() {
        return Err(Error::domain(format!("time must be finite and non-negative, got {s}")));
    }
    Ok(())
}

/// Bath temperature: either a finite inverse temperature or the `T → 0`
/// limit in which `coth(βω/2) → 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Temperature {
    LowT,
    Beta(f64),
}

impl Temperature {
    pub fn beta(beta: f64) -> Result<Self> {
        if !(beta > 0.0) || beta.is_nan() {
            return Err(Error::domain(format!("beta must be positive, got {beta}")));
        }
        Ok(Temperature::Beta(beta))
    }

    pub fn is_low_t(&self) -> bool {
        matches!(self, Temperature::LowT)
    }
}

impl std::fmt::Display for Temperature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Temperature::LowT => write!(f, "low-T"),
            Temperature::Beta(b) => write!(f, "beta={b}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::quad_reference;
    use std::f64::consts::PI;

    fn band(j0: f64, lo: f64, d: f64) -> SpectralDensity {
        SpectralDensity::new(j0, lo, d).unwrap()
    }

    #[test]
    fn evaluate_band() {
        assert_eq!(band(1.0, 1.0, 0.5).evaluate(1.25).unwrap(), 1.0);
        assert_eq!(band(1.0, 1.0, 0.5).evaluate(0.5).unwrap(), 0.0);
        assert_eq!(band(2.0, 3.0, 1e-3).evaluate(3.0005).unwrap(), 2.0);
        // left-closed, right-open
        assert_eq!(band(1.0, 1.0, 0.5).evaluate(1.0).unwrap(), 1.0);
        assert_eq!(band(1.0, 1.0, 0.5).evaluate(1.5).unwrap(), 0.0);
        assert!(matches!(band(1.0, 1.0, 0.5).evaluate(-0.1), Err(Error::Domain(_))));
    }

    #[test]
    fn construction_rejects_bad_parameters() {
        assert!(SpectralDensity::new(0.0, 1.0, 1.0).is_err());
        assert!(SpectralDensity::new(1.0, -1.0, 1.0).is_err());
        assert!(SpectralDensity::new(1.0, 1.0, 0.0).is_err());
        assert!(SpectralDensity::new(1.0, 0.0, 1.0).is_ok());
    }

    #[test]
    fn kernel_sin_examples() {
        let j = band(1.0, 1.0, 1.0);
        assert_eq!(j.kernel_sin(0.0).unwrap(), 0.0);
        assert!(j.kernel_sin(1e-12).unwrap().abs() < 1e-11);
        // oracle: ∫₁² sin(πω) dω by composite Simpson
        let oracle = quad_reference(|w| (PI * w).sin(), 1.0, 2.0, 1e-13).unwrap();
        assert!((oracle + 2.0 / PI).abs() < 1e-12);
        assert!((j.kernel_sin(PI).unwrap() - oracle).abs() < 1e-12);
        let j2 = band(2.0, 1.0, 1.0);
        assert!((j2.kernel_sin(PI).unwrap() + 4.0 / PI).abs() < 1e-12);
        assert!(j.kernel_sin(-1.0).is_err());
    }

    #[test]
    fn kernel_cos_examples() {
        let j = band(1.0, 1.0, 1e-3);
        assert!((j.kernel_cos_thermal(0.0, Temperature::LowT).unwrap() - 1e-3).abs() < 1e-18);
        let j = band(1.0, 1.0, 1.0);
        assert!(j.kernel_cos_thermal(PI, Temperature::LowT).unwrap().abs() < 1e-15);

        let warm = j.kernel_cos_thermal(1.0, Temperature::Beta(10.0)).unwrap();
        let cold = j.kernel_cos_thermal(1.0, Temperature::LowT).unwrap();
        let oracle = quad_reference(|w| (cos_h(10.0, w)) * w.cos(), 1.0, 2.0, 1e-13).unwrap();
        assert!((warm - oracle).abs() < 1e-11);
        assert!(warm > cold);
    }

    fn cos_h(beta: f64, w: f64) -> f64 {
        (0.5 * beta * w).cosh() / (0.5 * beta * w).sinh()
    }

    #[test]
    fn finite_beta_errors() {
        let j = band(1.0, 1.0, 1.0);
        assert!(j.kernel_cos_thermal(1.0, Temperature::Beta(0.0)).is_err());
        assert!(Temperature::beta(-1.0).is_err());
        let j0 = band(1.0, 0.0, 1.0);
        assert!(j0.kernel_cos_thermal(1.0, Temperature::Beta(1.0)).is_err());
    }

    #[test]
    fn series_branch_is_continuous_at_crossover() {
        for (lo, d) in [(1.0, 1e-3), (0.1, 1.0), (10.0, 1e-4)] {
            let j = band(1.0, lo, d);
            let s_c = SERIES_CROSSOVER / (lo + d);
            let below = j.kernel_sin(s_c * (1.0 - 1e-9)).unwrap();
            let above = j.kernel_sin(s_c * (1.0 + 1e-9)).unwrap();
            // K_s grows linearly, so the two sides differ by the 2e-9 step itself
            assert!((below - above).abs() <= 3e-9 * above.abs());
            let below = j.kernel_cos_thermal(s_c * (1.0 - 1e-9), Temperature::LowT).unwrap();
            let above = j.kernel_cos_thermal(s_c * (1.0 + 1e-9), Temperature::LowT).unwrap();
            assert!((below - above).abs() <= 1e-12 * above.abs());
        }
    }

    #[test]
    fn closed_forms_match_brute_force_quadrature() {
        for &lo in &[0.1, 1.0, 10.0] {
            for &d in &[1e-4, 1e-3, 1.0] {
                let j = band(1.0, lo, d);
                for &s in &[0.01, 0.1, 1.0, 10.0] {
                    let ks = j.kernel_sin(s).unwrap();
                    let os = quad_reference(|w| (w * s).sin(), lo, lo + d, 1e-16).unwrap();
                    let floor = 1e-15 * d;
                    assert!((ks - os).abs() <= 1e-9 * os.abs() + floor, "sin {lo} {d} {s}: {ks} vs {os}");
                    let kc = j.kernel_cos_thermal(s, Temperature::LowT).unwrap();
                    let oc = quad_reference(|w| (w * s).cos(), lo, lo + d, 1e-16).unwrap();
                    assert!((kc - oc).abs() <= 1e-9 * oc.abs() + floor, "cos {lo} {d} {s}: {kc} vs {oc}");
                }
            }
        }
    }

    #[test]
    fn finite_beta_approaches_low_t() {
        for &lo in &[0.1, 1.0, 10.0] {
            let j = band(1.0, lo, 1e-3);
            let beta = 1e4 / lo;
            for i in 0..=20 {
                let s = 0.5 * i as f64;
                let cold = j.kernel_cos_thermal(s, Temperature::LowT).unwrap();
                let warm = j.kernel_cos_thermal(s, Temperature::Beta(beta)).unwrap();
                assert!((warm - cold).abs() <= 1e-6 * cold.abs() + 1e-15, "{lo} {s}");
            }
        }
    }

    proptest::proptest! {
        #[test]
        fn kernel_sin_amplitude_bound(lo in 0.0f64..20.0, d in 1e-5f64..5.0, s in 1e-3f64..50.0) {
            let j = band(1.3, lo, d);
            let k = j.kernel_sin(s).unwrap();
            proptest::prop_assert!(k.abs() <= 1.3 * d.min(2.0 / s) * (1.0 + 1e-12));
        }
    }
}
