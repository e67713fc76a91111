//! Run configuration shared by every subcommand, plus the figure presets.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::coefficients::{EnvironmentParams, Method};
use crate::dynamics::Mode;
use crate::entanglement::KappaSource;
use crate::error::{Error, Result};
use crate::spectral::{SpectralDensity, Temperature};

/// Below this `Ω·β` the low-T forms are a poor approximation.
pub const LOW_T_WARN_PRODUCT: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeChoice {
    Secular,
    Full,
    Both,
}

impl ModeChoice {
    pub fn modes(&self) -> Vec<Mode> {
        match self {
            ModeChoice::Secular => vec![Mode::Secular],
            ModeChoice::Full => vec![Mode::Full],
            ModeChoice::Both => vec![Mode::Secular, Mode::Full],
        }
    }
}

impl std::str::FromStr for ModeChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "secular" => Ok(ModeChoice::Secular),
            "full" => Ok(ModeChoice::Full),
            "both" => Ok(ModeChoice::Both),
            other => Err(Error::usage(
                "mode",
                format!("unknown mode `{other}` (expected secular, full or both)"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Panel {
    A,
    B,
    C,
}

impl std::str::FromStr for Panel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "a" => Ok(Panel::A),
            "b" => Ok(Panel::B),
            "c" => Ok(Panel::C),
            other => Err(Error::usage("panel", format!("unknown panel `{other}` (expected a, b or c)"))),
        }
    }
}

impl std::fmt::Display for Panel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Panel::A => "a",
            Panel::B => "b",
            Panel::C => "c",
        })
    }
}

/// Parameter grid for a run. Every list is swept as a Cartesian product in
/// the order `j0 × delta × omega × r`, keeping each list's own order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepScenario {
    pub tau_start: f64,
    pub tau_stop: f64,
    /// Number of grid points, both ends included.
    pub tau_steps: usize,
    /// Explicit times; replaces the uniform grid when present.
    pub tau_points: Option<Vec<f64>>,
    pub r: Vec<f64>,
    pub j0: Vec<f64>,
    pub delta: Vec<f64>,
    pub omega: Vec<f64>,
    pub beta: Option<f64>,
    pub low_t: bool,
    pub mode: ModeChoice,
    pub method: Method,
    pub kappa: KappaSource,
    /// Overrides every tolerance in `verify`.
    pub tolerance: Option<f64>,
    pub out: Option<PathBuf>,
}

impl Default for SweepScenario {
    fn default() -> Self {
        Self {
            tau_start: 0.0,
            tau_stop: 30.0,
            tau_steps: 600,
            tau_points: None,
            r: vec![1.0],
            j0: vec![1.0],
            delta: vec![1e-3],
            omega: vec![1.0],
            beta: None,
            low_t: true,
            mode: ModeChoice::Both,
            method: Method::ClosedForm,
            kappa: KappaSource::Paper,
            tolerance: None,
            out: None,
        }
    }
}

/// One point of the parameter product.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Combo {
    pub j0: f64,
    pub delta: f64,
    pub omega: f64,
    pub r: f64,
}

impl SweepScenario {
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::usage("config", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        match &self.tau_points {
            Some(points) => {
                if points.is_empty() {
                    return Err(Error::usage("tau_points", "τ grid is empty"));
                }
                if points.iter().any(|t| !t.is_finite() || *t < 0.0) {
                    return Err(Error::usage("tau_points", "times must be finite and non-negative"));
                }
                if points.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::usage("tau_points", "times must be strictly ascending"));
                }
            }
            None => {
                if self.tau_steps < 2 {
                    return Err(Error::usage(
                        "tau_steps",
                        format!("need at least 2 grid points, got {}", self.tau_steps),
                    ));
                }
                if !(self.tau_start >= 0.0) || !self.tau_start.is_finite() {
                    return Err(Error::usage("tau_start", "must be finite and non-negative"));
                }
                if !(self.tau_stop > self.tau_start) || !self.tau_stop.is_finite() {
                    return Err(Error::usage("tau_stop", "must be finite and greater than tau_start"));
                }
            }
        }
        let lists: [(&str, &[f64], bool); 4] = [
            ("r", &self.r, true),
            ("j0", &self.j0, true),
            ("delta", &self.delta, false),
            ("omega", &self.omega, true),
        ];
        for (name, values, zero_ok) in lists {
            if values.is_empty() {
                return Err(Error::usage(name, "list is empty"));
            }
            for &v in values {
                let ok = v.is_finite() && if zero_ok { v >= 0.0 } else { v > 0.0 };
                if !ok {
                    let bound = if zero_ok { "non-negative" } else { "positive" };
                    return Err(Error::usage(name, format!("{v} is not finite and {bound}")));
                }
            }
        }
        if let Some(b) = self.beta {
            if !(b > 0.0) || !b.is_finite() {
                return Err(Error::usage("beta", format!("must be positive and finite, got {b}")));
            }
        }
        if let Some(t) = self.tolerance {
            if !(t >= 0.0) {
                return Err(Error::usage("tolerance", format!("must be non-negative, got {t}")));
            }
        }
        Ok(())
    }

    pub fn tau_grid(&self) -> Vec<f64> {
        if let Some(points) = &self.tau_points {
            return points.clone();
        }
        let n = self.tau_steps - 1;
        let span = self.tau_stop - self.tau_start;
        (0..=n)
            .map(|i| if i == n { self.tau_stop } else { self.tau_start + span * i as f64 / n as f64 })
            .collect()
    }

    pub fn tau_max(&self) -> f64 {
        self.tau_grid().last().copied().unwrap_or(0.0)
    }

    /// Resolves the bath temperature. With `strict`, setting both `low_t`
    /// and `beta` is a conflict; otherwise the low-T forms win and a warning
    /// is returned when `min(Ω)·β` is small.
    pub fn temperature(&self, strict: bool) -> Result<(Temperature, Option<String>)> {
        match (self.low_t, self.beta) {
            (true, None) => Ok((Temperature::LowT, None)),
            (false, Some(b)) => Ok((Temperature::beta(b)?, None)),
            (false, None) => Err(Error::usage("beta", "set beta or enable low_t")),
            (true, Some(b)) => {
                if strict {
                    return Err(Error::Conflict(format!("low_t and beta = {b} are both set")));
                }
                let omega_min = self.omega.iter().copied().fold(f64::INFINITY, f64::min);
                let warning = (omega_min * b < LOW_T_WARN_PRODUCT).then(|| {
                    format!(
                        "low-T forms used with Ω·β = {} < {LOW_T_WARN_PRODUCT}; beta is ignored",
                        omega_min * b
                    )
                });
                Ok((Temperature::LowT, warning))
            }
        }
    }

    pub fn combos(&self) -> Vec<Combo> {
        let mut out = Vec::with_capacity(self.j0.len() * self.delta.len() * self.omega.len() * self.r.len());
        for &j0 in &self.j0 {
            for &delta in &self.delta {
                for &omega in &self.omega {
                    for &r in &self.r {
                        out.push(Combo { j0, delta, omega, r });
                    }
                }
            }
        }
        out
    }

    /// Distinct environments, ignoring `r`.
    pub fn environments(&self, temperature: Temperature) -> Result<Vec<(Combo, EnvironmentParams)>> {
        let mut out = Vec::new();
        for &j0 in &self.j0 {
            for &delta in &self.delta {
                for &omega in &self.omega {
                    let combo = Combo { j0, delta, omega, r: 0.0 };
                    out.push((combo, combo.environment(temperature)?));
                }
            }
        }
        Ok(out)
    }

    /// Fig. 1 preset: κ with and without secular terms.
    pub fn fig1(panel: Panel) -> Self {
        let (delta, omega) = match panel {
            Panel::A => (1e-4, 1.0),
            Panel::B => (1e-3, 1.0),
            Panel::C => (1e-3, 3.0),
        };
        Self {
            r: vec![0.01, 0.1, 0.3, 0.5, 0.9],
            delta: vec![delta],
            omega: vec![omega],
            mode: ModeChoice::Both,
            ..Self::default()
        }
    }

    /// Fig. 2 preset: negativity against one varied parameter (J₀ = 1, so
    /// `delta` carries J₀δ).
    pub fn fig2(panel: Panel) -> Self {
        let base = Self {
            mode: ModeChoice::Secular,
            ..Self::default()
        };
        match panel {
            Panel::A => Self {
                r: vec![10.0, 2.0, 1.0, 0.5, 0.1],
                delta: vec![0.01],
                omega: vec![1.0],
                ..base
            },
            Panel::B => Self {
                r: vec![1.0],
                delta: vec![1e-3, 10f64.powf(-2.5), 1e-2, 10f64.powf(-1.5), 1e-1],
                omega: vec![1.0],
                ..base
            },
            Panel::C => Self {
                r: vec![1.0],
                delta: vec![0.01],
                omega: vec![10.0, 2.0, 1.0, 0.5, 0.1],
                ..base
            },
        }
    }
}

impl Combo {
    pub fn environment(&self, temperature: Temperature) -> Result<EnvironmentParams> {
        Ok(EnvironmentParams::new(
            SpectralDensity::new(self.j0, self.omega, self.delta)?,
            temperature,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn usage_field(e: Error) -> String {
        match e {
            Error::Usage { field, .. } => field,
            other => panic!("expected a usage error, got {other}"),
        }
    }

    #[test]
    fn default_grid() {
        let s = SweepScenario::default();
        s.validate().unwrap();
        let g = s.tau_grid();
        assert_eq!(g.len(), 600);
        assert_eq!((g[0], g[599]), (0.0, 30.0));
    }

    #[test]
    fn invalid_fields_are_named() {
        let bad = |f: fn(&mut SweepScenario)| {
            let mut s = SweepScenario::default();
            f(&mut s);
            usage_field(s.validate().unwrap_err())
        };
        assert_eq!(bad(|s| s.tau_steps = 1), "tau_steps");
        assert_eq!(bad(|s| s.tau_stop = 0.0), "tau_stop");
        assert_eq!(bad(|s| s.tau_start = -1.0), "tau_start");
        assert_eq!(bad(|s| s.r.clear()), "r");
        assert_eq!(bad(|s| s.delta = vec![0.0]), "delta");
        assert_eq!(bad(|s| s.tau_points = Some(vec![])), "tau_points");
        assert_eq!(bad(|s| s.tau_points = Some(vec![1.0, 1.0])), "tau_points");
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let s = SweepScenario::from_json(r#"{"r": [0.5, 1], "mode": "full", "method": "quad", "kappa": "pt-oracle"}"#)
            .unwrap();
        assert_eq!(s.r, vec![0.5, 1.0]);
        assert_eq!(s.mode, ModeChoice::Full);
        assert_eq!(s.method, Method::Quadrature);
        assert_eq!(s.kappa, KappaSource::Oracle);
        let back = SweepScenario::from_json(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
        assert_eq!(usage_field(SweepScenario::from_json(r#"{"tau": 1}"#).unwrap_err()), "config");
    }

    #[test]
    fn temperature_rules() {
        let mut s = SweepScenario::default();
        assert_eq!(s.temperature(true).unwrap(), (Temperature::LowT, None));
        s.beta = Some(10.0);
        assert!(matches!(s.temperature(true), Err(Error::Conflict(_))));
        let (t, warn) = s.temperature(false).unwrap();
        assert_eq!(t, Temperature::LowT);
        assert!(warn.is_some());
        s.beta = Some(1000.0);
        assert!(s.temperature(false).unwrap().1.is_none());
        s.low_t = false;
        assert_eq!(s.temperature(true).unwrap().0, Temperature::Beta(1000.0));
        s.beta = None;
        assert_eq!(usage_field(s.temperature(false).unwrap_err()), "beta");
    }

    #[test]
    fn combos_keep_list_order() {
        let s = SweepScenario::fig2(Panel::A);
        let rs: Vec<f64> = s.combos().iter().map(|c| c.r).collect();
        assert_eq!(rs, vec![10.0, 2.0, 1.0, 0.5, 0.1]);
        assert_eq!(SweepScenario::fig1(Panel::C).omega, vec![3.0]);
        assert_eq!(SweepScenario::fig2(Panel::B).delta.len(), 5);
    }
}
