//! Symplectic invariants, minimum partially-transposed symplectic
//! eigenvalue, logarithmic negativity and sudden-death times.
//!
//! Three κ routes are available and are never mixed within one curve:
//!
//! * [`kappa_secular_paper`]: closed form for a twin beam in the secular
//!   approximation with closed-form coefficients. It treats the initial
//!   state in units where the vacuum variance is ½.
//! * [`kappa_symmetric`]: `√2·√(I₁ − I₃ − √((I₁−I₃)² − I₄))` from the
//!   determinant invariants of a symmetric state.
//! * [`nu_min_pt`]: eigen-decomposition of `iΩσ̃`, independent of any
//!   invariant formula.
//!
//! [`KappaSource::Paper`] applies the closed form's normalization to any
//! evolved state, so that with and without secular terms can be compared on
//! the same scale.

use nalgebra::Matrix4;
use serde::{Deserialize, Serialize};

use crate::coefficients::{Channel, EnvironmentParams, Method};
use crate::dynamics::{evolve_cm, make_twb, symplectic_form, ChannelSnapshot, Mode, TwbSpec, TwoModeGaussianState};
use crate::error::{Error, Result};

const RADICAND_TOL: f64 = 1e-12;

/// Default sudden-death search horizon.
pub const DEFAULT_HORIZON: f64 = 100.0;

/// `κ` below which the state is entangled.
pub const KAPPA_THRESHOLD: f64 = 1.0;

/// `I₁ = det A`, `I₃ = det C`, `I₄ = det σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymplecticInvariants {
    pub i1: f64,
    pub i3: f64,
    pub i4: f64,
}

pub fn invariants(state: &TwoModeGaussianState) -> Result<SymplecticInvariants> {
    let (a, b) = (state.block_a(), state.block_b());
    let scale = state.cm().abs().max().max(1.0);
    if (a - b).abs().max() > 1e-12 * scale {
        return Err(Error::UnsupportedState(
            "symmetric-state invariants need identical diagonal blocks".into(),
        ));
    }
    Ok(SymplecticInvariants {
        i1: a.determinant(),
        i3: state.block_c().determinant(),
        i4: state.cm().determinant(),
    })
}

/// `√(I₁ − I₃ − √((I₁−I₃)² − I₄))`, clamping round-off negatives.
fn invariant_root(inv: &SymplecticInvariants) -> Result<f64> {
    let sum = inv.i1 - inv.i3;
    let scale = sum.abs().max(1.0);
    let mut inner = sum * sum - inv.i4;
    if inner < 0.0 {
        if inner < -RADICAND_TOL * scale * scale {
            return Err(Error::NumericDomain(format!(
                "(I₁ − I₃)² − I₄ = {inner:e} is negative"
            )));
        }
        inner = 0.0;
    }
    // sum − √inner cancels when I₄ ≪ sum², so use I₄ / (sum + √inner)
    let mut outer = if sum > 0.0 {
        inv.i4 / (sum + inner.sqrt())
    } else {
        sum - inner.sqrt()
    };
    if outer < 0.0 {
        if outer < -RADICAND_TOL * scale {
            return Err(Error::NumericDomain(format!(
                "κ radicand {outer:e} is negative"
            )));
        }
        outer = 0.0;
    }
    Ok(outer.sqrt())
}

/// `κ = √2·√(I₁ − I₃ − √((I₁−I₃)² − I₄))`.
pub fn kappa_symmetric(inv: &SymplecticInvariants) -> Result<f64> {
    Ok(std::f64::consts::SQRT_2 * invariant_root(inv)?)
}

/// Secular-approximation κ for a twin beam:
/// `κ = ½(τ²J₀δ + e^{−2r − τ⁴J₀δΩ/6})`.
pub fn kappa_secular_paper(r: f64, j0_delta: f64, omega_lo: f64, tau: f64) -> Result<f64> {
    for (name, v) in [("r", r), ("j0_delta", j0_delta), ("omega_lo", omega_lo), ("tau", tau)] {
        if !(v >= 0.0) || !v.is_finite() {
            return Err(Error::domain(format!("{name} must be non-negative, got {v}")));
        }
    }
    let t2 = tau * tau;
    Ok(0.5 * (t2 * j0_delta + (-2.0 * r - t2 * t2 * j0_delta * omega_lo / 6.0).exp()))
}

/// Minimum symplectic eigenvalue of the partial transpose, from the
/// spectrum of `Ω σ̃` (eigenvalues `±iν`).
pub fn nu_min_pt(state: &TwoModeGaussianState) -> Result<f64> {
    // partial transposition flips p₂
    let flip = Matrix4::from_diagonal(&nalgebra::Vector4::new(1.0, 1.0, 1.0, -1.0));
    let pt = flip * state.cm() * flip;
    let m = symplectic_form() * pt;
    let eig = m.complex_eigenvalues();
    if eig.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Eigen("non-finite eigenvalue of Ωσ̃".into()));
    }
    Ok(eig.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min))
}

/// `E_N = max(0, −2 ln κ)`.
pub fn negativity(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0) {
        return Err(Error::domain(format!("kappa must be positive, got {kappa}")));
    }
    Ok((-2.0 * kappa.ln()).max(0.0))
}

/// Which κ formula a curve reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KappaSource {
    /// The closed-form normalization (vacuum variance ½).
    #[serde(alias = "secular-paper")]
    Paper,
    /// `kappa_symmetric` on the state as evolved.
    #[serde(alias = "symmetric-invariants")]
    Symmetric,
    /// `nu_min_pt` on the state as evolved.
    #[serde(alias = "pt-oracle")]
    Oracle,
}

impl KappaSource {
    pub fn tag(&self) -> &'static str {
        match self {
            KappaSource::Paper => "paper",
            KappaSource::Symmetric => "symmetric",
            KappaSource::Oracle => "oracle",
        }
    }
}

impl std::fmt::Display for KappaSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.tag())
    }
}

impl std::str::FromStr for KappaSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" | "secular-paper" => Ok(KappaSource::Paper),
            "symmetric" | "symmetric-invariants" => Ok(KappaSource::Symmetric),
            "oracle" | "pt-oracle" => Ok(KappaSource::Oracle),
            other => Err(Error::usage(
                "kappa",
                format!("unknown kappa source `{other}` (expected paper, symmetric or oracle)"),
            )),
        }
    }
}

/// κ of an evolved state in the closed-form normalization: the state is
/// re-expressed with vacuum variance ½ before the channel acts.
pub fn kappa_paper_normalized(
    initial: &TwoModeGaussianState,
    snapshot: &ChannelSnapshot,
    mode: Mode,
) -> Result<f64> {
    let evolved = evolve_cm(&initial.rescaled(0.5), snapshot, mode)?;
    Ok(kappa_symmetric(&invariants(&evolved)?)? / std::f64::consts::SQRT_2)
}

/// κ of `initial` after the channel in `snapshot`, by the chosen route.
pub fn kappa_of(
    initial: &TwoModeGaussianState,
    snapshot: &ChannelSnapshot,
    mode: Mode,
    source: KappaSource,
) -> Result<f64> {
    match source {
        KappaSource::Paper => kappa_paper_normalized(initial, snapshot, mode),
        KappaSource::Symmetric => kappa_symmetric(&invariants(&evolve_cm(initial, snapshot, mode)?)?),
        KappaSource::Oracle => nu_min_pt(&evolve_cm(initial, snapshot, mode)?),
    }
}

#[derive(Debug, Clone)]
enum CurveKind {
    /// The printed closed form; needs only `J₀δ` and `Ω`.
    Formula { j0_delta: f64, omega_lo: f64 },
    Channel {
        channel: Channel,
        mode: Mode,
        source: KappaSource,
    },
}

/// κ(τ) for a twin beam of squeezing `r` under one fixed route.
#[derive(Debug, Clone)]
pub struct KappaCurve {
    initial: TwoModeGaussianState,
    r: f64,
    kind: CurveKind,
}

impl KappaCurve {
    /// The closed-form secular curve.
    pub fn secular_formula(r: f64, j0_delta: f64, omega_lo: f64) -> Result<Self> {
        kappa_secular_paper(r, j0_delta, omega_lo, 0.0)?;
        Ok(Self {
            initial: make_twb(TwbSpec::new(r)?)?,
            r,
            kind: CurveKind::Formula { j0_delta, omega_lo },
        })
    }

    /// A curve evaluated through the covariance matrix, valid on
    /// `[0, tau_max]`. With `Paper`, `Secular` and closed-form coefficients
    /// this reduces to [`KappaCurve::secular_formula`].
    pub fn new(
        r: f64,
        env: EnvironmentParams,
        method: Method,
        mode: Mode,
        source: KappaSource,
        tau_max: f64,
    ) -> Result<Self> {
        let initial = make_twb(TwbSpec::new(r)?)?;
        if source == KappaSource::Paper && mode == Mode::Secular && method == Method::ClosedForm {
            let j = env.spectral();
            return Self::secular_formula(r, j.j0_delta(), j.omega_lo());
        }
        Ok(Self {
            initial,
            r,
            kind: CurveKind::Channel {
                channel: Channel::new(env, method, tau_max)?,
                mode,
                source,
            },
        })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    /// Largest time this curve can be evaluated at.
    pub fn tau_max(&self) -> f64 {
        match &self.kind {
            CurveKind::Formula { .. } => f64::INFINITY,
            CurveKind::Channel { channel, .. } => channel.tau_max(),
        }
    }


    /// κ at each of the ascending times in `taus`.
    pub fn values(&self, taus: &[f64]) -> Result<Vec<f64>> {
        match &self.kind {
            CurveKind::Formula { j0_delta, omega_lo } => taus
                .iter()
                .map(|&t| kappa_secular_paper(self.r, *j0_delta, *omega_lo, t))
                .collect(),
            CurveKind::Channel { channel, mode, source } => channel
                .snapshots(taus)?
                .iter()
                .map(|s| kappa_of(&self.initial, s, *mode, *source))
                .collect(),
        }
    }

    pub fn value(&self, tau: f64) -> Result<f64> {
        Ok(self.values(&[tau])?[0])
    }
}

/// Sudden-death time: the start of the final stretch on `[0, horizon]`
/// where `κ ≥ 1` (so `E_N = 0`). `None` if the state is still entangled at
/// the horizon; `Some(0.0)` if it never was.
pub fn sudden_death_time(curve: &KappaCurve, horizon: f64) -> Result<Option<f64>> {
    if !(horizon > 0.0) || !horizon.is_finite() {
        return Err(Error::domain(format!("horizon must be positive, got {horizon}")));
    }
    if horizon > curve.tau_max() * (1.0 + 1e-12) {
        return Err(Error::domain(format!(
            "horizon {horizon} beyond the curve's range {}",
            curve.tau_max()
        )));
    }
    let n = ((40.0 * horizon).ceil() as usize).max(2000);
    let grid: Vec<f64> = (0..=n).map(|i| horizon * i as f64 / n as f64).collect();
    let kappa = curve.values(&grid)?;
    let last_entangled = match kappa.iter().rposition(|&k| k < KAPPA_THRESHOLD) {
        None => return Ok(Some(0.0)),
        Some(i) if i == n => return Ok(None),
        Some(i) => i,
    };
    let (mut lo, mut hi) = (grid[last_entangled], grid[last_entangled + 1]);
    while hi - lo >= 1e-7 {
        let mid = 0.5 * (lo + hi);
        if curve.value(mid)? < KAPPA_THRESHOLD {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Some(0.5 * (lo + hi)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::evolve;
    use nalgebra::Vector4;

    fn twb(r: f64) -> TwoModeGaussianState {
        make_twb(TwbSpec::new(r).unwrap()).unwrap()
    }

    #[test]
    fn invariants_of_twin_beams() {
        let v = invariants(&twb(0.0)).unwrap();
        assert!((v.i1 - 1.0).abs() < 1e-15 && v.i3.abs() < 1e-15 && (v.i4 - 1.0).abs() < 1e-15);
        for r in [0.1, 0.5, 1.0, 2.0] {
            let v = invariants(&twb(r)).unwrap();
            let (ch, sh) = ((2.0 * r).cosh(), (2.0 * r).sinh());
            assert!((v.i1 - ch * ch).abs() < 1e-12 * ch * ch);
            assert!((v.i3 + sh * sh).abs() < 1e-12 * ch * ch);
            assert!((v.i4 - 1.0).abs() < 1e-9 * ch.powi(4));
        }
        let v = invariants(&twb(1.0)).unwrap();
        assert!((v.i1 - 14.154).abs() < 1e-3 && (v.i3 + 13.154).abs() < 1e-3);
    }

    #[test]
    fn invariants_reject_asymmetric_blocks() {
        let mut cm = *twb(0.5).cm();
        cm[(2, 2)] += 0.2;
        let s = TwoModeGaussianState::new(Vector4::zeros(), cm).unwrap();
        assert!(matches!(invariants(&s), Err(Error::UnsupportedState(_))));
    }

    #[test]
    fn kappa_symmetric_examples() {
        let vac = SymplecticInvariants { i1: 1.0, i3: 0.0, i4: 1.0 };
        assert!((kappa_symmetric(&vac).unwrap() - 2f64.sqrt()).abs() < 1e-15);
        let k = kappa_symmetric(&invariants(&twb(1.0)).unwrap()).unwrap();
        assert!((k - 2f64.sqrt() * (-2.0f64).exp()).abs() < 1e-8);
        assert!((k - 0.19139).abs() < 1e-5);
        // inner root vanishes
        let edge = SymplecticInvariants { i1: 3.0, i3: 1.0, i4: 4.0 };
        assert!((kappa_symmetric(&edge).unwrap() - 2f64.sqrt() * 2f64.sqrt()).abs() < 1e-15);
        let bad = SymplecticInvariants { i1: 1.0, i3: 0.0, i4: 4.0 };
        assert!(matches!(kappa_symmetric(&bad), Err(Error::NumericDomain(_))));
    }

    #[test]
    fn secular_formula_examples() {
        assert!((kappa_secular_paper(0.9, 1e-4, 1.0, 0.0).unwrap() - 0.5 * (-1.8f64).exp()).abs() < 1e-16);
        assert!((kappa_secular_paper(0.9, 1e-4, 1.0, 0.0).unwrap() - 0.08264).abs() < 1e-5);
        let k = kappa_secular_paper(1.0, 0.01, 1.0, 10.0).unwrap();
        assert!((k - 0.5 * (1.0 + (-2.0 - 100.0 / 6.0f64).exp())).abs() < 1e-15);
        for tau in [0.0, 1.0, 30.0] {
            let k = kappa_secular_paper(0.7, 0.0, 2.0, tau).unwrap();
            assert!((k - 0.5 * (-1.4f64).exp()).abs() < 1e-16);
        }
        assert!(kappa_secular_paper(-1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn pt_oracle_spectrum() {
        assert!((nu_min_pt(&twb(0.0)).unwrap() - 1.0).abs() < 1e-12);
        for r in [0.0, 0.1, 0.5, 1.0, 2.0] {
            let nu = nu_min_pt(&twb(r)).unwrap();
            assert!((nu - (-2.0 * r).exp()).abs() < 1e-10, "r = {r}: {nu}");
        }
        assert!((nu_min_pt(&twb(0.5)).unwrap() - 0.36788).abs() < 1e-5);
    }

    #[test]
    fn negativity_examples() {
        assert_eq!(negativity(1.0).unwrap(), 0.0);
        assert!((negativity((-1.0f64).exp()).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(negativity(2.0).unwrap(), 0.0);
        assert!(negativity(0.0).is_err());
        assert!(negativity(-1.0).is_err());
    }

    #[test]
    fn paper_normalization_reduces_to_closed_form() {
        let env = EnvironmentParams::low_t(1.0, 3.0, 1e-3).unwrap();
        let channel = Channel::new(env, Method::ClosedForm, 30.0).unwrap();
        let taus: Vec<f64> = (0..=30).map(|i| i as f64).collect();
        for r in [0.01, 0.5, 0.9] {
            let s0 = twb(r);
            for snap in channel.snapshots(&taus).unwrap() {
                let via_cm = kappa_paper_normalized(&s0, &snap, Mode::Secular).unwrap();
                let formula = kappa_secular_paper(r, 1e-3, 3.0, snap.tau).unwrap();
                // once C_t has decayed, (I₁ − I₃)² − I₄ cancels to round-off and its
                // square root costs about half the digits
                assert!((via_cm - formula).abs() <= 1e-7 * formula, "{r} {}", snap.tau);
            }
        }
    }

    #[test]
    fn routes_agree_on_evolved_states() {
        let env = EnvironmentParams::low_t(1.0, 1.0, 1e-2).unwrap();
        for tau in [0.5, 3.0, 8.0] {
            let s = evolve(&twb(0.8), &env, tau, Method::ClosedForm, Mode::Full).unwrap();
            let sym = kappa_symmetric(&invariants(&s).unwrap()).unwrap();
            let pt = nu_min_pt(&s).unwrap();
            assert!((sym / 2f64.sqrt() - pt).abs() < 1e-9 * pt.max(1e-3), "{tau}");
        }
    }

    #[test]
    fn free_rotation_keeps_kappa() {
        // Γ = Δ_Γ = 0: pure rotation
        let s = twb(0.6);
        let k0 = kappa_symmetric(&invariants(&s).unwrap()).unwrap();
        for tau in [0.3, 1.7, 12.0] {
            let out = evolve_cm(&s, &ChannelSnapshot::noiseless(tau, 0.0), Mode::Full).unwrap();
            let k = kappa_symmetric(&invariants(&out).unwrap()).unwrap();
            assert!((k - k0).abs() < 1e-12);
        }
    }

    #[test]
    fn sudden_death_of_closed_form() {
        let none = KappaCurve::secular_formula(1.0, 0.0, 1.0).unwrap();
        assert_eq!(sudden_death_time(&none, DEFAULT_HORIZON).unwrap(), None);

        let c = KappaCurve::secular_formula(1.0, 0.01, 1.0).unwrap();
        let t = sudden_death_time(&c, DEFAULT_HORIZON).unwrap().unwrap();
        assert!((t - 200f64.sqrt()).abs() < 0.1 * 200f64.sqrt());
        assert!((kappa_secular_paper(1.0, 0.01, 1.0, t).unwrap() - 1.0).abs() < 1e-6);

        let t10 = sudden_death_time(&KappaCurve::secular_formula(10.0, 0.01, 1.0).unwrap(), 100.0).unwrap().unwrap();
        let t05 = sudden_death_time(&KappaCurve::secular_formula(0.5, 0.01, 1.0).unwrap(), 100.0).unwrap().unwrap();
        assert!((t10 - t05).abs() / t05 < 0.05);
    }

    #[test]
    fn sudden_death_ordering_follows_kappa() {
        // pointwise smaller κ ⇒ later (or equal) death
        let small = KappaCurve::secular_formula(1.0, 0.005, 1.0).unwrap();
        let large = KappaCurve::secular_formula(1.0, 0.02, 1.0).unwrap();
        let ts = sudden_death_time(&small, 100.0).unwrap().unwrap();
        let tl = sudden_death_time(&large, 100.0).unwrap().unwrap();
        assert!(ts >= tl);
    }

    #[test]
    fn never_entangled_dies_at_zero() {
        // literal symmetric κ of the vacuum is √2 > 1 and noise only raises it
        let env = EnvironmentParams::low_t(1.0, 1.0, 1e-2).unwrap();
        let c = KappaCurve::new(0.0, env, Method::Quadrature, Mode::Full, KappaSource::Symmetric, 5.0).unwrap();
        assert_eq!(sudden_death_time(&c, 5.0).unwrap(), Some(0.0));
        assert!(sudden_death_time(&c, 50.0).is_err());
    }

    #[test]
    fn kappa_source_parsing() {
        assert_eq!("paper".parse::<KappaSource>().unwrap(), KappaSource::Paper);
        assert_eq!("pt-oracle".parse::<KappaSource>().unwrap(), KappaSource::Oracle);
        assert!("log".parse::<KappaSource>().is_err());
    }
}
