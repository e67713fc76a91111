//! Two-mode Gaussian states and their evolution through the noisy channel.
//!
//! Both modes see identical, independent environments. Covariance matrices
//! use the convention in which the vacuum is the identity, so a twin beam
//! has `a = cosh 2r` and `c = sinh 2r`.

use nalgebra::{Complex, Matrix2, Matrix4, SymmetricEigen, Vector4};
use serde::{Deserialize, Serialize};

use crate::coefficients::{Channel, EnvironmentParams, Method, SecularCoefficients};
use crate::error::{Error, Result};

const SYMMETRY_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-10;
const UNCERTAINTY_TOL: f64 = 1e-8;

/// Direct sum of two `[[0, 1], [−1, 0]]` blocks.
pub fn symplectic_form() -> Matrix4<f64> {
    Matrix4::new(
        0.0, 1.0, 0.0, 0.0, //
        -1.0, 0.0, 0.0, 0.0, //
        0.0, 0.0, 0.0, 1.0, //
        0.0, 0.0, -1.0, 0.0,
    )
}

/// Free rotation `R(τ) = [[cos τ, sin τ], [−sin τ, cos τ]]`.
pub fn rotation(tau: f64) -> Matrix2<f64> {
    let (s, c) = tau.sin_cos();
    Matrix2::new(c, s, -s, c)
}

fn direct_sum(a: &Matrix2<f64>, b: &Matrix2<f64>) -> Matrix4<f64> {
    let mut m = Matrix4::zeros();
    m.fixed_view_mut::<2, 2>(0, 0).copy_from(a);
    m.fixed_view_mut::<2, 2>(2, 2).copy_from(b);
    m
}

fn from_blocks(a: &Matrix2<f64>, b: &Matrix2<f64>, c: &Matrix2<f64>) -> Matrix4<f64> {
    let mut m = direct_sum(a, b);
    m.fixed_view_mut::<2, 2>(0, 2).copy_from(c);
    m.fixed_view_mut::<2, 2>(2, 0).copy_from(&c.transpose());
    m
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Secular terms dropped: `A_t = A₀e^{−Γ} + Δ_Γ·I`.
    Secular,
    /// Secular terms kept.
    Full,
}

impl Mode {
    pub fn tag(&self) -> &'static str {
        match self {
            Mode::Secular => "secular",
            Mode::Full => "full",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

/// Mean vector `(x₁, p₁, x₂, p₂)` and 4×4 covariance matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoModeGaussianState {
    mean: Vector4<f64>,
    cm: Matrix4<f64>,
}

impl TwoModeGaussianState {
    /// Validates symmetry, positivity and the uncertainty relation
    /// `σ + iΩ ≥ 0`.
    pub fn new(mean: Vector4<f64>, cm: Matrix4<f64>) -> Result<Self> {
        let state = Self::from_raw(mean, cm)?;
        state.check_physical()?;
        Ok(state)
    }

    /// Only checks symmetry. Evolved states go through here: the
    /// short-time closed forms do not guarantee a physical channel at late
    /// times.
    pub fn from_raw(mean: Vector4<f64>, cm: Matrix4<f64>) -> Result<Self> {
        if cm.iter().chain(mean.iter()).any(|v| !v.is_finite()) {
            return Err(Error::domain("state has non-finite entries"));
        }
        let asym = (cm - cm.transpose()).abs().max();
        if asym > SYMMETRY_TOL * cm.abs().max().max(1.0) {
            return Err(Error::domain(format!("covariance matrix not symmetric (|σ − σᵀ| = {asym:e})")));
        }
        Ok(Self {
            mean,
            cm: 0.5 * (cm + cm.transpose()),
        })
    }

    pub fn check_physical(&self) -> Result<()> {
        // eigenvalue roundoff grows with the entries (cosh 2r for a TWB)
        let scale = self.cm.abs().max().max(1.0);
        let min_eig = self.min_eigenvalue();
        if min_eig < -PSD_TOL * scale {
            return Err(Error::domain(format!(
                "covariance matrix not positive semidefinite (min eigenvalue {min_eig:e})"
            )));
        }
        let min_unc = self.min_uncertainty_eigenvalue();
        if min_unc < -UNCERTAINTY_TOL * scale {
            return Err(Error::domain(format!(
                "uncertainty relation violated (min eigenvalue of σ + iΩ is {min_unc:e})"
            )));
        }
        Ok(())
    }

    pub fn is_physical(&self) -> bool {
        self.check_physical().is_ok()
    }

    pub fn min_eigenvalue(&self) -> f64 {
        SymmetricEigen::new(self.cm).eigenvalues.min()
    }

    /// Smallest eigenvalue of the Hermitian matrix `σ + iΩ`.
    pub fn min_uncertainty_eigenvalue(&self) -> f64 {
        let omega = symplectic_form();
        let h = self.cm.map(|v| Complex::new(v, 0.0)) + omega.map(|v| Complex::new(0.0, v));
        SymmetricEigen::new(h).eigenvalues.min()
    }

    pub fn mean(&self) -> &Vector4<f64> {
        &self.mean
    }

    pub fn cm(&self) -> &Matrix4<f64> {
        &self.cm
    }

    pub fn block_a(&self) -> Matrix2<f64> {
        self.cm.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn block_b(&self) -> Matrix2<f64> {
        self.cm.fixed_view::<2, 2>(2, 2).into_owned()
    }

    pub fn block_c(&self) -> Matrix2<f64> {
        self.cm.fixed_view::<2, 2>(0, 2).into_owned()
    }

    /// Rescales the covariance matrix by `factor` (and the mean by its
    /// square root), i.e. re-expresses the state in units where the vacuum
    /// variance is `factor`. The result is not re-validated.
    pub fn rescaled(&self, factor: f64) -> Self {
        Self {
            mean: self.mean * factor.sqrt(),
            cm: self.cm * factor,
        }
    }

    /// Returns `(a, c)` if the state has the twin-beam block form
    /// `A = B = a·I`, `C = diag(c, −c)`.
    fn twb_parameters(&self) -> Result<(f64, f64)> {
        let (a, b, c) = (self.block_a(), self.block_b(), self.block_c());
        let tol = SYMMETRY_TOL * self.cm.abs().max().max(1.0);
        let av = a[(0, 0)];
        let cv = c[(0, 0)];
        let ok = (a[(1, 1)] - av).abs() <= tol
            && a[(0, 1)].abs() <= tol
            && (b - a).abs().max() <= tol
            && (c[(1, 1)] + cv).abs() <= tol
            && c[(0, 1)].abs() <= tol
            && c[(1, 0)].abs() <= tol;
        if !ok {
            return Err(Error::UnsupportedState(
                "channel evolution needs A = B = a·I and C = diag(c, −c)".into(),
            ));
        }
        Ok((av, cv))
    }
}

/// Twin-beam (two-mode squeezed vacuum) preparation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TwbSpec {
    pub r: f64,
}

impl TwbSpec {
    pub fn new(r: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::domain(format!("squeezing r must be non-negative, got {r}")));
        }
        Ok(Self { r })
    }

    pub fn a(&self) -> f64 {
        (2.0 * self.r).cosh()
    }

    pub fn c(&self) -> f64 {
        (2.0 * self.r).sinh()
    }
}

/// `A₀ = B₀ = cosh(2r)·I`, `C₀ = diag(sinh 2r, −sinh 2r)`, zero mean.
pub fn make_twb(spec: TwbSpec) -> Result<TwoModeGaussianState> {
    let spec = TwbSpec::new(spec.r)?;
    let (a, c) = (spec.a(), spec.c());
    let cm = from_blocks(
        &(Matrix2::identity() * a),
        &(Matrix2::identity() * a),
        &Matrix2::new(c, 0.0, 0.0, -c),
    );
    TwoModeGaussianState::new(Vector4::zeros(), cm)
}

/// Channel parameters at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ChannelSnapshot {
    pub tau: f64,
    /// Accumulated damping Γ(τ).
    pub big_gamma: f64,
    pub delta_gamma: f64,
    pub secular: SecularCoefficients,
    /// Free-rotation angle ω₀τ.
    pub angle: f64,
}

impl ChannelSnapshot {
    /// Pure rotation by `tau` with damping `big_gamma` and no noise.
    pub fn noiseless(tau: f64, big_gamma: f64) -> Self {
        Self {
            tau,
            big_gamma,
            delta_gamma: 0.0,
            secular: SecularCoefficients::zero(),
            angle: tau,
        }
    }

    pub fn without_secular(&self) -> Self {
        Self {
            secular: SecularCoefficients::zero(),
            ..*self
        }
    }

    /// Additive noise block `2W̄` for one mode:
    /// `Δ_Γ·I + [[Δ_co − Π_si, −(Δ_si + Π_co)], [−(Δ_si + Π_co), −(Δ_co − Π_si)]]`.
    pub fn noise_block(&self) -> Matrix2<f64> {
        let s = &self.secular;
        let diag = s.delta_co - s.pi_si;
        let off = -(s.delta_si + s.pi_co);
        Matrix2::new(
            self.delta_gamma + diag,
            off,
            off,
            self.delta_gamma - diag,
        )
    }
}

/// `e^{−Γ/2}(R ⊕ R)·mean`.
pub fn evolve_mean(state: &TwoModeGaussianState, snapshot: &ChannelSnapshot) -> Vector4<f64> {
    let r = rotation(snapshot.angle);
    direct_sum(&r, &r) * state.mean * (-0.5 * snapshot.big_gamma).exp()
}

/// Covariance evolution with the secular terms.
///
/// `A_t = a·e^{−Γ}·I + 2W̄` on both diagonal blocks and
/// `C_t = c·e^{−Γ}·[[cos 2τ, −sin 2τ], [−sin 2τ, −cos 2τ]]`, which is
/// `R C₀ Rᵀ` for `C₀ = diag(c, −c)`.
pub fn evolve_cm_full(state: &TwoModeGaussianState, snapshot: &ChannelSnapshot) -> Result<TwoModeGaussianState> {
    let (a, c) = state.twb_parameters()?;
    let damp = (-snapshot.big_gamma).exp();
    let a_t = Matrix2::identity() * (a * damp) + snapshot.noise_block();
    let (s2, c2) = (2.0 * snapshot.angle).sin_cos();
    let c_t = Matrix2::new(c2, -s2, -s2, -c2) * (c * damp);
    TwoModeGaussianState::from_raw(evolve_mean(state, snapshot), from_blocks(&a_t, &a_t, &c_t))
}

/// Covariance evolution in the secular approximation: `A_t = A₀e^{−Γ} + Δ_Γ·I`.
pub fn evolve_cm_secular(
    state: &TwoModeGaussianState,
    snapshot: &ChannelSnapshot,
) -> Result<TwoModeGaussianState> {
    evolve_cm_full(state, &snapshot.without_secular())
}

pub fn evolve_cm(state: &TwoModeGaussianState, snapshot: &ChannelSnapshot, mode: Mode) -> Result<TwoModeGaussianState> {
    match mode {
        Mode::Secular => evolve_cm_secular(state, snapshot),
        Mode::Full => evolve_cm_full(state, snapshot),
    }
}

/// One-shot evolution to time `tau`.
pub fn evolve(
    state: &TwoModeGaussianState,
    env: &EnvironmentParams,
    tau: f64,
    method: Method,
    mode: Mode,
) -> Result<TwoModeGaussianState> {
    let snap = Channel::new(*env, method, tau)?.snapshot(tau)?;
    evolve_cm(state, &snap, mode)
}
