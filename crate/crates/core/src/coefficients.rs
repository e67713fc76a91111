//! Time-dependent master-equation coefficients.
//!
//! With ω₀ = 1 the four coefficients are single integrals over the band
//! kernels of [`SpectralDensity`]:
//!
//! | coefficient | integrand            |
//! |-------------|----------------------|
//! | γ (damping) | `sin s · kernel_sin` |
//! | Δ (diffusion) | `cos s · kernel_cos` |
//! | Π (anomalous diffusion) | `sin s · kernel_cos` |
//! | r (energy shift) | `cos s · kernel_sin` |
//!
//! From these follow the accumulated damping `Γ = 2∫γ`, the weighted
//! diffusion `Δ_Γ` and the four secular coefficients. Two evaluation
//! methods are offered: [`Method::ClosedForm`] uses the leading-order
//! short-time, low-temperature expressions; [`Method::Quadrature`]
//! integrates the definitions numerically.

use serde::{Deserialize, Serialize};

use crate::dynamics::ChannelSnapshot;
use crate::error::{Error, Result};
use std::cell::RefCell;

use crate::quadrature::{integrate_vec, integrate_vec_with_breaks, Tolerance};
use crate::spectral::{SpectralDensity, Temperature};

/// Spectral density plus bath temperature, in units of the system frequency.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentParams {
    spectral: SpectralDensity,
    temperature: Temperature,
}

impl EnvironmentParams {
    pub fn new(spectral: SpectralDensity, temperature: Temperature) -> Self {
        Self {
            spectral,
            temperature,
        }
    }

    /// Low-temperature environment with a rectangular band.
    pub fn low_t(j0: f64, omega_lo: f64, delta: f64) -> Result<Self> {
        Ok(Self::new(SpectralDensity::new(j0, omega_lo, delta)?, Temperature::LowT))
    }

    pub fn spectral(&self) -> &SpectralDensity {
        &self.spectral
    }

    pub fn temperature(&self) -> Temperature {
        self.temperature
    }

    /// The four coefficient integrands `[γ′, Δ′, Π′, r′]` at time `s`.
    pub fn integrands(&self, s: f64) -> Result<[f64; 4]> {
        let ks = self.spectral.kernel_sin(s)?;
        let kc = self.spectral.kernel_cos_thermal(s, self.temperature)?;
        let (sin, cos) = s.sin_cos();
        Ok([sin * ks, cos * kc, sin * kc, cos * ks])
    }

    fn max_frequency(&self) -> f64 {
        1.0 + self.spectral.omega_hi()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[serde(alias = "closed")]
    ClosedForm,
    #[serde(alias = "quad")]
    Quadrature,
}

impl Method {
    pub fn tag(&self) -> &'static str {
        match self {
            Method::ClosedForm => "closed-form",
            Method::Quadrature => "quadrature",
        }
    }

    fn check(&self, env: &EnvironmentParams) -> Result<()> {
        if *self == Method::ClosedForm && !env.temperature.is_low_t() {
            return Err(Error::usage(
                "method",
                "closed-form coefficients exist only in the low-temperature limit; use quadrature for finite beta",
            ));
        }
        Ok(())
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "closed" | "closed-form" => Ok(Method::ClosedForm),
            "quad" | "quadrature" => Ok(Method::Quadrature),
            other => Err(Error::usage(
                "method",
                format!("unknown method `{other}` (expected closed or quad)"),
            )),
        }
    }
}

/// `(Δ_co, Δ_si, Π_co, Π_si)`: `e^{−Γ(τ)}∫₀^τ e^{Γ(s)} X(s) trig(2(τ−s)) ds`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct SecularCoefficients {
    pub delta_co: f64,
    pub delta_si: f64,
    pub pi_co: f64,
    pub pi_si: f64,
}

impl SecularCoefficients {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn max_abs(&self) -> f64 {
        [self.delta_co, self.delta_si, self.pi_co, self.pi_si]
            .into_iter()
            .map(f64::abs)
            .fold(0.0, f64::max)
    }
}

/// Leading-order short-time forms at low temperature.
pub mod closed {
    use super::EnvironmentParams;

    pub fn gamma(env: &EnvironmentParams, tau: f64) -> f64 {
        let j = env.spectral();
        j.j0_delta() * j.omega_lo() * tau.powi(3) / 3.0
    }

    pub fn delta(env: &EnvironmentParams, tau: f64) -> f64 {
        env.spectral().j0_delta() * tau
    }

    pub fn pi(env: &EnvironmentParams, tau: f64) -> f64 {
        0.5 * env.spectral().j0_delta() * tau * tau
    }

    pub fn r_shift(env: &EnvironmentParams, tau: f64) -> f64 {
        let j = env.spectral();
        0.5 * j.j0_delta() * j.omega_lo() * tau * tau
    }

    pub fn big_gamma(env: &EnvironmentParams, tau: f64) -> f64 {
        let j = env.spectral();
        j.j0_delta() * j.omega_lo() * tau.powi(4) / 6.0
    }

    pub fn delta_gamma(env: &EnvironmentParams, tau: f64) -> f64 {
        0.5 * env.spectral().j0_delta() * tau * tau
    }
}

/// Carries the first error out of an infallible integrand closure.
struct Trap(RefCell<Option<Error>>);

impl Trap {
    fn new() -> Self {
        Trap(RefCell::new(None))
    }

    fn take<const N: usize>(&self, r: Result<[f64; N]>) -> [f64; N] {
        r.unwrap_or_else(|e| {
            self.0.borrow_mut().get_or_insert(e);
            [f64::NAN; N]
        })
    }

    fn finish<T>(self, r: Result<T>) -> Result<T> {
        match self.0.into_inner() {
            Some(e) => Err(e),
            None => r,
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if tau < 0.0 || !tau.is_finite() {
        return Err(Error::domain(format!("tau must be finite and non-negative, got {tau}")));
    }
    Ok(())
}

/// Breakpoints on `[0, tau]` spaced by at most half an oscillation period.
fn oscillation_breaks(env: &EnvironmentParams, tau: f64) -> Vec<f64> {
    let pieces = (tau * env.max_frequency() / std::f64::consts::PI).ceil().max(1.0) as usize;
    (0..=pieces).map(|i| tau * i as f64 / pieces as f64).collect()
}

fn quad_component(env: &EnvironmentParams, tau: f64, k: usize) -> Result<f64> {
    check_tau(tau)?;
    if tau == 0.0 {
        return Ok(0.0);
    }
    let breaks = oscillation_breaks(env, tau);
    let trap = Trap::new();
    let est = integrate_vec_with_breaks(
        |s| trap.take(env.integrands(s).map(|v| [v[k]])),
        &breaks,
        Tolerance::default(),
    );
    let est = trap.finish(est)?;
    finite(est.value[0], "coefficient quadrature")
}

fn finite(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::NumericDomain(format!("{what} produced a non-finite value")))
    }
}

/// Damping `γ(τ) = ∫₀^τ sin s · kernel_sin(s) ds`.
pub fn gamma_quad(env: &EnvironmentParams, tau: f64) -> Result<f64> {
    quad_component(env, tau, 0)
}

/// Diffusion `Δ(τ) = ∫₀^τ cos s · kernel_cos(s) ds`.
pub fn delta_quad(env: &EnvironmentParams, tau: f64) -> Result<f64> {
    quad_component(env, tau, 1)
}

/// Anomalous diffusion `Π(τ) = ∫₀^τ sin s · kernel_cos(s) ds`.
pub fn pi_quad(env: &EnvironmentParams, tau: f64) -> Result<f64> {
    quad_component(env, tau, 2)
}

/// Energy shift `r(τ) = ∫₀^τ cos s · kernel_sin(s) ds`. Diagnostic only; it
/// never enters the propagation.
pub fn r_quad(env: &EnvironmentParams, tau: f64) -> Result<f64> {
    quad_component(env, tau, 3)
}

/// Accumulated damping `Γ(τ) = 2∫₀^τ γ`.
pub fn gamma_int(env: &EnvironmentParams, tau: f64, method: Method) -> Result<f64> {
    check_tau(tau)?;
    method.check(env)?;
    match method {
        Method::ClosedForm => Ok(closed::big_gamma(env, tau)),
        Method::Quadrature => {
            if tau == 0.0 {
                return Ok(0.0);
            }
            // 2∫₀^τ∫₀^s f(u) du ds = 2∫₀^τ (τ − u) f(u) du
            let breaks = oscillation_breaks(env, tau);
            let trap = Trap::new();
            let est = integrate_vec_with_breaks(
                |u| trap.take(env.integrands(u).map(|v| [2.0 * (tau - u) * v[0]])),
                &breaks,
                Tolerance::default(),
            );
            let est = trap.finish(est)?;
            finite(est.value[0], "Γ quadrature")
        }
    }
}

/// Weighted diffusion `Δ_Γ(τ) = e^{−Γ(τ)}∫₀^τ e^{Γ(s)} Δ(s) ds`.
pub fn delta_gamma(env: &EnvironmentParams, tau: f64, method: Method) -> Result<f64> {
    check_tau(tau)?;
    method.check(env)?;
    match method {
        Method::ClosedForm => Ok(closed::delta_gamma(env, tau)),
        Method::Quadrature => Ok(Channel::new(*env, method, tau)?.snapshot(tau)?.delta_gamma),
    }
}

pub fn secular_coeffs(env: &EnvironmentParams, tau: f64, method: Method) -> Result<SecularCoefficients> {
    check_tau(tau)?;
    Ok(Channel::new(*env, method, tau)?.snapshot(tau)?.secular)
}

/// Dense table of `γ, Δ, Π, r` and `Γ` on a uniform grid, interpolated with
/// cubic Hermite polynomials whose slopes are the exact integrands.
#[derive(Debug, Clone)]
struct CoefficientTable {
    h: f64,
    values: Vec<[f64; 4]>,
    slopes: Vec<[f64; 4]>,
    big_gamma: Vec<f64>,
}

const MAX_TABLE_CELLS: usize = 1 << 20;

impl CoefficientTable {
    fn build(env: &EnvironmentParams, tau_max: f64) -> Result<Self> {
        let h_target = (tau_max / 2048.0).min(0.02 / env.max_frequency());
        let n = ((tau_max / h_target).ceil() as usize).clamp(1, MAX_TABLE_CELLS);
        let h = tau_max / n as f64;
        let cell_tol = Tolerance::new(1e-12 / n as f64, 1e-10);

        let mut values = Vec::with_capacity(n + 1);
        let mut slopes = Vec::with_capacity(n + 1);
        let mut big_gamma = Vec::with_capacity(n + 1);
        values.push([0.0; 4]);
        slopes.push(env.integrands(0.0)?);
        big_gamma.push(0.0);

        for k in 0..n {
            let (a, b) = (h * k as f64, h * (k + 1) as f64);
            let trap = Trap::new();
            let est = integrate_vec(|s| trap.take(env.integrands(s)), a, b, cell_tol);
            let est = trap.finish(est)?;
            let prev = values[k];
            let next: [f64; 4] = std::array::from_fn(|i| prev[i] + est.value[i]);
            let slope = env.integrands(b)?;
            // derivative-corrected trapezoid for Γ = 2∫γ
            let cell = 0.5 * h * (prev[0] + next[0]) + h * h * (slopes[k][0] - slope[0]) / 12.0;
            big_gamma.push(big_gamma[k] + 2.0 * cell);
            values.push(next);
            slopes.push(slope);
        }
        Ok(Self {
            h,
            values,
            slopes,
            big_gamma,
        })
    }

    fn locate(&self, s: f64) -> (usize, f64) {
        let n = self.values.len() - 1;
        let x = (s / self.h).max(0.0);
        let k = (x.floor() as usize).min(n - 1);
        (k, (x - k as f64).clamp(0.0, 1.0))
    }

    fn hermite(t: f64, h: f64, y0: f64, d0: f64, y1: f64, d1: f64) -> f64 {
        let t2 = t * t;
        let t3 = t2 * t;
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
            + (t3 - 2.0 * t2 + t) * h * d0
            + (-2.0 * t3 + 3.0 * t2) * y1
            + (t3 - t2) * h * d1
    }

    /// `[γ, Δ, Π, r]` at `s`.
    fn coefficients(&self, s: f64) -> [f64; 4] {
        let (k, t) = self.locate(s);
        std::array::from_fn(|i| {
            Self::hermite(
                t,
                self.h,
                self.values[k][i],
                self.slopes[k][i],
                self.values[k + 1][i],
                self.slopes[k + 1][i],
            )
        })
    }

    fn big_gamma(&self, s: f64) -> f64 {
        let (k, t) = self.locate(s);
        Self::hermite(
            t,
            self.h,
            self.big_gamma[k],
            2.0 * self.values[k][0],
            self.big_gamma[k + 1],
            2.0 * self.values[k + 1][0],
        )
    }
}

#[derive(Debug, Clone)]
enum Source {
    Closed,
    Table(CoefficientTable),
}

/// Evaluates `Γ`, `Δ_Γ` and the secular coefficients along ascending times.
///
/// The weighted integrals are advanced with
/// `I(τ₂) = e^{−(Γ₂−Γ₁)} e^{2i(τ₂−τ₁)} I(τ₁) + ∫_{τ₁}^{τ₂} e^{Γ(s)−Γ₂} X(s) e^{2i(τ₂−s)} ds`
/// so no `e^{Γ}` factor is ever formed on its own.
#[derive(Debug, Clone)]
pub struct Channel {
    env: EnvironmentParams,
    method: Method,
    tau_max: f64,
    source: Source,
}

const CLOSED_CHUNK: f64 = 0.1;

impl Channel {
    /// Prepares a channel valid on `[0, tau_max]`. For quadrature this
    /// tabulates the coefficients up front.
    pub fn new(env: EnvironmentParams, method: Method, tau_max: f64) -> Result<Self> {
        check_tau(tau_max)?;
        method.check(&env)?;
        let source = match method {
            Method::ClosedForm => Source::Closed,
            Method::Quadrature => Source::Table(CoefficientTable::build(&env, tau_max.max(1e-6))?),
        };
        Ok(Self {
            env,
            method,
            tau_max,
            source,
        })
    }

    pub fn env(&self) -> &EnvironmentParams {
        &self.env
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_max
    }

    /// `[γ, Δ, Π, r]` at `s`.
    pub fn coefficients(&self, s: f64) -> [f64; 4] {
        match &self.source {
            Source::Closed => [
                closed::gamma(&self.env, s),
                closed::delta(&self.env, s),
                closed::pi(&self.env, s),
                closed::r_shift(&self.env, s),
            ],
            Source::Table(t) => t.coefficients(s),
        }
    }

    pub fn big_gamma(&self, s: f64) -> f64 {
        match &self.source {
            Source::Closed => closed::big_gamma(&self.env, s),
            Source::Table(t) => t.big_gamma(s),
        }
    }

    fn chunk_breaks(&self, a: f64, b: f64) -> Vec<f64> {
        let mut breaks = vec![a];
        match &self.source {
            Source::Closed => {
                let pieces = ((b - a) / CLOSED_CHUNK).ceil().max(1.0) as usize;
                breaks.extend((1..pieces).map(|i| a + (b - a) * i as f64 / pieces as f64));
            }
            Source::Table(t) => {
                // align with the Hermite knots
                let first = (a / t.h).floor() as usize + 1;
                let mut k = first;
                while (k as f64) * t.h < b {
                    let x = k as f64 * t.h;
                    if x > a {
                        breaks.push(x);
                    }
                    k += 1;
                }
            }
        }
        breaks.push(b);
        breaks
    }

    /// Snapshots at each of the ascending, non-negative `taus`.
    pub fn snapshots(&self, taus: &[f64]) -> Result<Vec<ChannelSnapshot>> {
        let mut prev = 0.0;
        for &t in taus {
            check_tau(t)?;
            if t < prev {
                return Err(Error::domain("tau grid must be ascending"));
            }
            if t > self.tau_max * (1.0 + 1e-12) {
                return Err(Error::domain(format!(
                    "tau = {t} beyond the prepared range {}",
                    self.tau_max
                )));
            }
            prev = t;
        }

        // relative only: coefficients scale with J₀δ, which can be tiny
        let tol = Tolerance::new(0.0, 1e-11);
        // [Δ_Γ, Δ_co, Δ_si, Π_co, Π_si] at `cur`
        let mut state = [0.0f64; 5];
        let mut cur = 0.0f64;
        let mut g_cur = 0.0;
        let mut out = Vec::with_capacity(taus.len());

        for &target in taus {
            let breaks = self.chunk_breaks(cur, target);
            for w in breaks.windows(2) {
                let (a, b) = (w[0], w[1]);
                if b <= a {
                    continue;
                }
                let g_b = self.big_gamma(b);
                let local = integrate_vec(
                    |s| {
                        let c = self.coefficients(s);
                        let weight = (self.big_gamma(s) - g_b).exp();
                        let (sin, cos) = (2.0 * (b - s)).sin_cos();
                        let (d, p) = (weight * c[1], weight * c[2]);
                        [d, d * cos, d * sin, p * cos, p * sin]
                    },
                    a,
                    b,
                    tol,
                )?;
                let decay = (g_cur - g_b).exp();
                let (rs, rc) = (2.0 * (b - a)).sin_cos();
                let rotate = |re: f64, im: f64| (decay * (rc * re - rs * im), decay * (rs * re + rc * im));
                let (dc, ds) = rotate(state[1], state[2]);
                let (pc, ps) = rotate(state[3], state[4]);
                state = [
                    decay * state[0] + local.value[0],
                    dc + local.value[1],
                    ds + local.value[2],
                    pc + local.value[3],
                    ps + local.value[4],
                ];
                cur = b;
                g_cur = g_b;
            }
            if state.iter().any(|v| !v.is_finite()) {
                return Err(Error::NumericDomain(format!(
                    "weighted coefficient integrals overflowed at tau = {target}"
                )));
            }
            let big_gamma = self.big_gamma(target);
            let delta_gamma = match self.source {
                Source::Closed => closed::delta_gamma(&self.env, target),
                Source::Table(_) => state[0],
            };
            out.push(ChannelSnapshot {
                tau: target,
                big_gamma,
                delta_gamma,
                secular: SecularCoefficients {
                    delta_co: state[1],
                    delta_si: state[2],
                    pi_co: state[3],
                    pi_si: state[4],
                },
                angle: target,
            });
        }
        Ok(out)
    }

    pub fn snapshot(&self, tau: f64) -> Result<ChannelSnapshot> {
        Ok(self.snapshots(&[tau])?.remove(0))
    }
}

/// All coefficients sampled on one time grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoefficientTrace {
    pub tau_grid: Vec<f64>,
    pub gamma: Vec<f64>,
    pub delta_coef: Vec<f64>,
    pub pi_coef: Vec<f64>,
    pub r_shift: Vec<f64>,
    pub gamma_int: Vec<f64>,
    pub delta_gamma: Vec<f64>,
    pub sec_delta_co: Vec<f64>,
    pub sec_delta_si: Vec<f64>,
    pub sec_pi_co: Vec<f64>,
    pub sec_pi_si: Vec<f64>,
    pub method: Method,
}

impl CoefficientTrace {
    pub fn compute(env: &EnvironmentParams, tau_grid: &[f64], method: Method) -> Result<Self> {
        if tau_grid.is_empty() {
            return Err(Error::usage("tau_grid", "empty time grid"));
        }
        let tau_max = tau_grid.iter().copied().fold(0.0, f64::max);
        let channel = Channel::new(*env, method, tau_max)?;
        let snaps = channel.snapshots(tau_grid)?;
        let n = tau_grid.len();
        let mut trace = Self {
            tau_grid: tau_grid.to_vec(),
            gamma: Vec::with_capacity(n),
            delta_coef: Vec::with_capacity(n),
            pi_coef: Vec::with_capacity(n),
            r_shift: Vec::with_capacity(n),
            gamma_int: Vec::with_capacity(n),
            delta_gamma: Vec::with_capacity(n),
            sec_delta_co: Vec::with_capacity(n),
            sec_delta_si: Vec::with_capacity(n),
            sec_pi_co: Vec::with_capacity(n),
            sec_pi_si: Vec::with_capacity(n),
            method,
        };
        for snap in &snaps {
            let c = channel.coefficients(snap.tau);
            trace.gamma.push(c[0]);
            trace.delta_coef.push(c[1]);
            trace.pi_coef.push(c[2]);
            trace.r_shift.push(c[3]);
            trace.gamma_int.push(snap.big_gamma);
            trace.delta_gamma.push(snap.delta_gamma);
            trace.sec_delta_co.push(snap.secular.delta_co);
            trace.sec_delta_si.push(snap.secular.delta_si);
            trace.sec_pi_co.push(snap.secular.pi_co);
            trace.sec_pi_si.push(snap.secular.pi_si);
        }
        Ok(trace)
    }

    pub fn len(&self) -> usize {
        self.tau_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tau_grid.is_empty()
    }
}
