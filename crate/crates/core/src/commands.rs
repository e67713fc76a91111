//! Subcommand bodies. Each returns a [`Report`] holding the CSV table and
//! its metadata; rows are computed in parallel but always emitted in
//! scenario order (parameter tuple, then τ).

use std::io::Write;
use std::path::{Path, PathBuf};

use nalgebra::Matrix2;
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::coefficients::{gamma_int, gamma_quad, Channel, CoefficientTrace, EnvironmentParams, Method};
use crate::dynamics::{evolve_cm, evolve_cm_full, make_twb, Mode, TwbSpec};
use crate::entanglement::{
    invariants, kappa_of, kappa_secular_paper, kappa_symmetric, negativity, nu_min_pt, sudden_death_time,
    KappaCurve, DEFAULT_HORIZON,
};
use crate::error::{Error, Result};
use crate::oracle::{finite_diff, propagate_w_matrix, quad_reference, reference_gamma_pair, OracleReport};
use crate::scenario::{Combo, Panel, SweepScenario};
use crate::spectral::{coth_half, Temperature};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Times at which `verify` runs the time-dependent checks.
const VERIFY_TIMES: [f64; 4] = [0.5, 1.0, 2.0, 5.0];
const ORACLE_GRID: usize = 4096;

/// 17 significant digits, round-trippable.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn temperature_tag(t: Temperature) -> String {
    match t {
        Temperature::LowT => "low-t".into(),
        Temperature::Beta(b) => num(b),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Csv {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Csv {
    fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn render(&self) -> String {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        w.write_record(&self.header).expect("in-memory write");
        for row in &self.rows {
            w.write_record(row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("cells are UTF-8")
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    pub csv: Csv,
    pub meta: Value,
    pub warnings: Vec<String>,
    /// False only when a `verify` row failed.
    pub passed: bool,
}

impl Report {
    fn new(command: &str, scenario: &SweepScenario, csv: Csv, warnings: Vec<String>, extra: Value) -> Self {
        let grid = match &scenario.tau_points {
            Some(p) => json!({ "kind": "explicit", "points": p.len() }),
            None => json!({
                "kind": "uniform, both ends included",
                "start": scenario.tau_start,
                "stop": scenario.tau_stop,
                "points": scenario.tau_steps,
            }),
        };
        let meta = json!({
            "tool": "fbnoise",
            "version": VERSION,
            "command": command,
            "log_base": "natural",
            "tau_grid": grid,
            "scenario": scenario,
            "details": extra,
        });
        Self {
            csv,
            meta,
            warnings,
            passed: true,
        }
    }

    /// Writes the CSV to `out` plus a `.meta` sidecar next to it, or the
    /// CSV alone to `stdout` when no path is given.
    pub fn write(&self, out: Option<&Path>, stdout: &mut dyn Write) -> Result<()> {
        match out {
            Some(path) => {
                std::fs::write(path, self.csv.render())?;
                let mut meta = serde_json::to_string_pretty(&self.meta)?;
                meta.push('\n');
                std::fs::write(meta_path(path), meta)?;
            }
            None => stdout.write_all(self.csv.render().as_bytes())?,
        }
        Ok(())
    }
}

pub fn meta_path(csv: &Path) -> PathBuf {
    csv.with_extension("meta")
}

fn collect_rows(blocks: Vec<Result<Vec<Vec<String>>>>) -> Result<Vec<Vec<String>>> {
    let mut rows = Vec::new();
    for b in blocks {
        rows.extend(b?);
    }
    Ok(rows)
}

/// γ, Δ, Π, r, Γ, Δ_Γ and the secular coefficients for each environment.
pub fn cmd_coefficients(scenario: &SweepScenario) -> Result<Report> {
    scenario.validate()?;
    let (temperature, _) = scenario.temperature(true)?;
    let grid = scenario.tau_grid();
    let envs = scenario.environments(temperature)?;
    let tag = temperature_tag(temperature);

    let blocks: Vec<Result<Vec<Vec<String>>>> = envs
        .par_iter()
        .map(|(c, env)| {
            let t = CoefficientTrace::compute(env, &grid, scenario.method)?;
            Ok((0..t.len())
                .map(|i| {
                    let mut row = vec![num(c.j0), num(c.delta), num(c.omega), tag.clone(), num(t.tau_grid[i])];
                    row.extend(
                        [
                            t.gamma[i],
                            t.delta_coef[i],
                            t.pi_coef[i],
                            t.r_shift[i],
                            t.gamma_int[i],
                            t.delta_gamma[i],
                            t.sec_delta_co[i],
                            t.sec_delta_si[i],
                            t.sec_pi_co[i],
                            t.sec_pi_si[i],
                        ]
                        .map(num),
                    );
                    row.push(t.method.tag().into());
                    row
                })
                .collect())
        })
        .collect();

    let mut csv = Csv::new(vec![
        "j0",
        "delta",
        "omega",
        "temperature",
        "tau",
        "gamma",
        "delta_coef",
        "pi_coef",
        "r_shift",
        "gamma_int",
        "delta_gamma",
        "sec_delta_co",
        "sec_delta_si",
        "sec_pi_co",
        "sec_pi_si",
        "method",
    ]);
    csv.rows = collect_rows(blocks)?;
    Ok(Report::new("coefficients", scenario, csv, Vec::new(), Value::Null))
}

/// Covariance blocks, κ and E_N of the evolved twin beam.
pub fn cmd_evolve(scenario: &SweepScenario) -> Result<Report> {
    scenario.validate()?;
    let (temperature, warning) = scenario.temperature(false)?;
    let grid = scenario.tau_grid();
    let envs = scenario.environments(temperature)?;
    let tag = temperature_tag(temperature);
    let modes = scenario.mode.modes();

    let blocks: Vec<Result<Vec<Vec<String>>>> = envs
        .par_iter()
        .map(|(c, env)| {
            let snaps = Channel::new(*env, scenario.method, scenario.tau_max())?.snapshots(&grid)?;
            let mut rows = Vec::new();
            for &r in &scenario.r {
                let initial = make_twb(TwbSpec::new(r)?)?;
                for &mode in &modes {
                    for snap in &snaps {
                        let s = evolve_cm(&initial, snap, mode)?;
                        let kappa = kappa_of(&initial, snap, mode, scenario.kappa)?;
                        let (a, b, cc) = (s.block_a(), s.block_b(), s.block_c());
                        let mut row = vec![
                            num(c.j0),
                            num(c.delta),
                            num(c.omega),
                            num(r),
                            tag.clone(),
                            mode.tag().into(),
                            scenario.method.tag().into(),
                            scenario.kappa.tag().into(),
                            num(snap.tau),
                        ];
                        row.extend(
                            [
                                a[(0, 0)],
                                a[(0, 1)],
                                a[(1, 1)],
                                b[(0, 0)],
                                b[(0, 1)],
                                b[(1, 1)],
                                cc[(0, 0)],
                                cc[(0, 1)],
                                cc[(1, 0)],
                                cc[(1, 1)],
                                kappa,
                                negativity(kappa)?,
                            ]
                            .map(num),
                        );
                        rows.push(row);
                    }
                }
            }
            Ok(rows)
        })
        .collect();

    let mut csv = Csv::new(vec![
        "j0",
        "delta",
        "omega",
        "r",
        "temperature",
        "mode",
        "method",
        "kappa_source",
        "tau",
        "a11",
        "a12",
        "a22",
        "b11",
        "b12",
        "b22",
        "c11",
        "c12",
        "c21",
        "c22",
        "kappa",
        "e_n",
    ]);
    csv.rows = collect_rows(blocks)?;
    Ok(Report::new("evolve", scenario, csv, warning.into_iter().collect(), Value::Null))
}

type CurveResult = (Combo, Mode, Vec<f64>, Option<f64>);

/// κ(τ) and E_N(τ) for every combo and mode, followed by one sudden-death
/// row per curve; `τ_SD` is searched on `[0, horizon]`.
struct CurveRows<'a> {
    scenario: &'a SweepScenario,
    temperature: Temperature,
    horizon: f64,
}

impl CurveRows<'_> {
    fn curve(&self, combo: &Combo, mode: Mode) -> Result<KappaCurve> {
        let env = combo.environment(self.temperature)?;
        KappaCurve::new(combo.r, env, self.scenario.method, mode, self.scenario.kappa, self.horizon)
    }

    /// `(combo, mode, κ values, τ_SD)` in scenario order.
    fn compute(&self) -> Result<Vec<CurveResult>> {
        let grid = self.scenario.tau_grid();
        let jobs: Vec<(Combo, Mode)> = self
            .scenario
            .combos()
            .into_iter()
            .flat_map(|c| self.scenario.mode.modes().into_iter().map(move |m| (c, m)))
            .collect();
        jobs.into_par_iter()
            .map(|(c, m)| {
                let curve = self.curve(&c, m)?;
                let values = curve.values(&grid)?;
                let sd = sudden_death_time(&curve, self.horizon)?;
                Ok((c, m, values, sd))
            })
            .collect()
    }
}

fn sd_cell(sd: Option<f64>) -> String {
    sd.map(num).unwrap_or_else(|| "none".into())
}

/// Arbitrary sweep of κ, E_N and sudden-death times.
pub fn cmd_sweep(scenario: &SweepScenario) -> Result<Report> {
    scenario.validate()?;
    let (temperature, warning) = scenario.temperature(false)?;
    let grid = scenario.tau_grid();
    let job = CurveRows {
        scenario,
        temperature,
        horizon: scenario.tau_max(),
    };
    let tag = temperature_tag(temperature);
    let mut csv = Csv::new(vec![
        "row",
        "j0",
        "delta",
        "omega",
        "r",
        "temperature",
        "mode",
        "method",
        "kappa_source",
        "tau",
        "kappa",
        "e_n",
    ]);
    for (c, mode, values, sd) in job.compute()? {
        let prefix = |kind: &str| {
            vec![
                kind.to_string(),
                num(c.j0),
                num(c.delta),
                num(c.omega),
                num(c.r),
                tag.clone(),
                mode.tag().into(),
                scenario.method.tag().into(),
                scenario.kappa.tag().into(),
            ]
        };
        for (&tau, &k) in grid.iter().zip(&values) {
            let mut row = prefix("curve");
            row.extend([num(tau), num(k), num(negativity(k)?)]);
            csv.rows.push(row);
        }
        let mut row = prefix("sudden_death");
        row.extend([sd_cell(sd), String::new(), String::new()]);
        csv.rows.push(row);
    }
    let extra = json!({ "sudden_death_horizon": job.horizon });
    Ok(Report::new("sweep", scenario, csv, warning.into_iter().collect(), extra))
}

/// κ with and without the secular terms for one Fig. 1 panel. `scenario`
/// normally comes from [`SweepScenario::fig1`] with CLI overrides applied.
pub fn cmd_fig1(panel: Panel, scenario: &SweepScenario) -> Result<Report> {
    scenario.validate()?;
    let (temperature, warning) = scenario.temperature(false)?;
    let grid = scenario.tau_grid();
    let tau_max = scenario.tau_max();

    let blocks: Vec<Result<Vec<Vec<String>>>> = scenario
        .combos()
        .par_iter()
        .map(|c| {
            let env = c.environment(temperature)?;
            let full = KappaCurve::new(c.r, env, scenario.method, Mode::Full, scenario.kappa, tau_max)?.values(&grid)?;
            grid.iter()
                .zip(full)
                .map(|(&tau, k_full)| {
                    let k_sec = kappa_secular_paper(c.r, c.j0 * c.delta, c.omega, tau)?;
                    Ok(vec![
                        panel.to_string(),
                        num(c.j0),
                        num(c.delta),
                        num(c.omega),
                        num(c.r),
                        num(tau),
                        num(k_sec),
                        num(k_full),
                        scenario.method.tag().into(),
                        scenario.kappa.tag().into(),
                    ])
                })
                .collect()
        })
        .collect();

    let mut csv = Csv::new(vec![
        "panel",
        "j0",
        "delta",
        "omega",
        "r",
        "tau",
        "kappa_secular",
        "kappa_full",
        "method",
        "kappa_source",
    ]);
    csv.rows = collect_rows(blocks)?;
    let extra = json!({
        "panel": panel,
        "kappa_secular": "closed-form secular curve",
        "kappa_full": "secular terms kept, route given by kappa_source",
    });
    Ok(Report::new("fig1", scenario, csv, warning.into_iter().collect(), extra))
}

/// Negativity against the panel's varied parameter, plus one sudden-death
/// row per curve searched up to `max(τ_max, DEFAULT_HORIZON)`.
pub fn cmd_fig2(panel: Panel, scenario: &SweepScenario) -> Result<Report> {
    scenario.validate()?;
    let (temperature, warning) = scenario.temperature(false)?;
    let grid = scenario.tau_grid();
    let job = CurveRows {
        scenario,
        temperature,
        horizon: scenario.tau_max().max(DEFAULT_HORIZON),
    };
    let param = match panel {
        Panel::A => "r",
        Panel::B => "j0_delta",
        Panel::C => "omega",
    };
    let mut csv = Csv::new(vec![
        "panel",
        "row",
        "param",
        "value",
        "r",
        "j0_delta",
        "omega",
        "mode",
        "method",
        "kappa_source",
        "tau",
        "kappa",
        "e_n",
    ]);
    for (c, mode, values, sd) in job.compute()? {
        let value = match panel {
            Panel::A => c.r,
            Panel::B => c.j0 * c.delta,
            Panel::C => c.omega,
        };
        let prefix = |kind: &str| {
            vec![
                panel.to_string(),
                kind.to_string(),
                param.to_string(),
                num(value),
                num(c.r),
                num(c.j0 * c.delta),
                num(c.omega),
                mode.tag().into(),
                scenario.method.tag().into(),
                scenario.kappa.tag().into(),
            ]
        };
        for (&tau, &k) in grid.iter().zip(&values) {
            let mut row = prefix("curve");
            row.extend([num(tau), num(k), num(negativity(k)?)]);
            csv.rows.push(row);
        }
        let mut row = prefix("sudden_death");
        row.extend([sd_cell(sd), String::new(), String::new()]);
        csv.rows.push(row);
    }
    let extra = json!({ "panel": panel, "sudden_death_horizon": job.horizon });
    Ok(Report::new("fig2", scenario, csv, warning.into_iter().collect(), extra))
}

fn verify_environment(
    env: &EnvironmentParams,
    scenario: &SweepScenario,
    times: &[f64],
) -> Result<Vec<OracleReport>> {
    let spec = *env.spectral();
    let temperature = env.temperature();
    let (lo, hi) = (spec.omega_lo(), spec.omega_hi());
    let mut out = Vec::new();

    for s in [0.5, 5.0] {
        let oracle = quad_reference(|w| spec.j0() * (w * s).sin(), lo, hi, 1e-15)?;
        out.push(OracleReport::relative(format!("kernel_sin(s={s})"), spec.kernel_sin(s)?, oracle, 1e-9));
        let coth = |w: f64| match temperature {
            Temperature::LowT => 1.0,
            Temperature::Beta(b) => coth_half(b, w),
        };
        let oracle = quad_reference(|w| coth(w) * spec.j0() * (w * s).cos(), lo, hi, 1e-15)?;
        out.push(OracleReport::relative(
            format!("kernel_cos(s={s})"),
            spec.kernel_cos_thermal(s, temperature)?,
            oracle,
            1e-8,
        ));
    }

    let tau_max = times.last().copied().unwrap_or(0.0);
    let snaps = Channel::new(*env, Method::Quadrature, tau_max)?.snapshots(times)?;
    let r = scenario.r[0];
    let initial = make_twb(TwbSpec::new(r)?)?;
    for (snap, &tau) in snaps.iter().zip(times) {
        let w = propagate_w_matrix(env, tau, ORACLE_GRID)?;
        let (_, g_ref) = reference_gamma_pair(env, tau, ORACLE_GRID)?;
        let a0 = initial.cm()[(0, 0)];
        let a_ref: Matrix2<f64> = Matrix2::identity() * (a0 * (-g_ref).exp()) + w * 2.0;
        let a_t = evolve_cm_full(&initial, snap)?.block_a();
        for (i, j) in [(0, 0), (0, 1), (1, 1)] {
            out.push(OracleReport::absolute(
                format!("A_t[{}{}](tau={tau} r={r})", i + 1, j + 1),
                a_t[(i, j)],
                a_ref[(i, j)],
                1e-6,
            ));
        }
        out.push(OracleReport::relative(format!("Gamma(tau={tau})"), snap.big_gamma, g_ref, 1e-6));

        let d = finite_diff(|t| gamma_int(env, t, Method::Quadrature), tau, 1e-3)?;
        out.push(OracleReport::relative(
            format!("dGamma/dtau vs 2 gamma(tau={tau})"),
            d,
            2.0 * gamma_quad(env, tau)?,
            1e-4,
        ));

        for &r in &scenario.r {
            let state = evolve_cm_full(&make_twb(TwbSpec::new(r)?)?, snap)?;
            let sym = kappa_symmetric(&invariants(&state)?)? / std::f64::consts::SQRT_2;
            out.push(OracleReport::relative(
                format!("nu_pt vs invariants(tau={tau} r={r})"),
                sym,
                nu_min_pt(&state)?,
                1e-8,
            ));
        }
    }
    Ok(out)
}

/// Runs the oracle suite; `Report::passed` is false if any row fails.
pub fn cmd_verify(scenario: &SweepScenario) -> Result<Report> {
    scenario.validate()?;
    let (temperature, warning) = scenario.temperature(false)?;
    let tau_max = scenario.tau_max();
    let mut times: Vec<f64> = VERIFY_TIMES.iter().copied().filter(|&t| t <= tau_max).collect();
    if times.is_empty() {
        if tau_max <= 0.0 {
            return Err(Error::usage("tau_stop", "verify needs a positive time"));
        }
        times.push(tau_max);
    }

    let envs = scenario.environments(temperature)?;
    let blocks: Vec<Result<Vec<OracleReport>>> = envs
        .par_iter()
        .map(|(_, env)| verify_environment(env, scenario, &times))
        .collect();

    // state-only checks carry no environment
    let mut rows: Vec<(Option<Combo>, OracleReport)> = Vec::new();
    for &r in &scenario.r {
        let nu = nu_min_pt(&make_twb(TwbSpec::new(r)?)?)?;
        rows.push((None, OracleReport::absolute(format!("nu_pt(TWB r={r})"), nu, (-2.0 * r).exp(), 1e-10)));
    }
    for ((c, _), block) in envs.iter().zip(blocks) {
        rows.extend(block?.into_iter().map(|rep| (Some(*c), rep)));
    }
    if let Some(tol) = scenario.tolerance {
        for (_, rep) in &mut rows {
            *rep = rep.with_tolerance(tol);
        }
    }

    let tag = temperature_tag(temperature);
    let mut csv = Csv::new(vec![
        "quantity",
        "j0",
        "delta",
        "omega",
        "temperature",
        "primary",
        "oracle",
        "abs_dev",
        "rel_dev",
        "tolerance",
        "criterion",
        "pass",
    ]);
    for (c, rep) in &rows {
        let env_cells = match c {
            Some(c) => [num(c.j0), num(c.delta), num(c.omega), tag.clone()],
            None => Default::default(),
        };
        let mut row = vec![rep.quantity.clone()];
        row.extend(env_cells);
        row.extend([
            num(rep.primary),
            num(rep.oracle),
            num(rep.abs_dev),
            num(rep.rel_dev),
            num(rep.tolerance),
            rep.criterion.into(),
            rep.pass.to_string(),
        ]);
        csv.rows.push(row);
    }
    let passed = !rows.is_empty() && rows.iter().all(|(_, rep)| rep.pass);
    let failed = rows.iter().filter(|(_, rep)| !rep.pass).count();
    let extra = json!({ "rows": rows.len(), "failed": failed, "times": times });
    let mut report = Report::new("verify", scenario, csv, warning.into_iter().collect(), extra);
    report.passed = passed;
    Ok(report)
}
