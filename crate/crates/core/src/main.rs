use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fbnoise::commands::{self, Report};
use fbnoise::scenario::{ModeChoice, Panel, SweepScenario};
use fbnoise::{Error, KappaSource, Method, Result};

#[derive(Parser)]
#[command(name = "fbnoise", version, about = "Twin-beam entanglement under finite-bandwidth non-Markovian noise")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Master-equation coefficients on a τ grid.
    Coefficients(Common),
    /// Evolved covariance matrices, κ and negativity.
    Evolve(Common),
    /// κ with and without the secular terms.
    Fig1(FigArgs),
    /// Negativity and sudden-death times against one varied parameter.
    Fig2(FigArgs),
    /// κ, negativity and sudden death over a parameter grid.
    Sweep(Common),
    /// Cross-check the numerics against independent oracles.
    Verify(Common),
}

#[derive(Args)]
struct FigArgs {
    /// a | b | c
    #[arg(long, value_parser = parse::<Panel>)]
    panel: Panel,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct Common {
    /// JSON scenario file; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination; a `.meta` sidecar is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    /// secular | full | both
    #[arg(long, value_parser = parse::<ModeChoice>)]
    mode: Option<ModeChoice>,
    /// closed | quad
    #[arg(long, value_parser = parse::<Method>)]
    method: Option<Method>,
    /// symmetric | paper | oracle
    #[arg(long, value_parser = parse::<KappaSource>)]
    kappa: Option<KappaSource>,
    /// End of the τ grid (the grid starts at the scenario's tau_start).
    #[arg(long)]
    tau_max: Option<f64>,
    /// Number of τ points, both ends included.
    #[arg(long)]
    tau_steps: Option<usize>,
    /// Zero-temperature bath (coth → 1).
    #[arg(long)]
    low_t: bool,
    /// Inverse bath temperature.
    #[arg(long)]
    beta: Option<f64>,
    /// Worker threads (default: all cores).
    #[arg(long)]
    jobs: Option<usize>,
}

fn parse<T: std::str::FromStr<Err = Error>>(s: &str) -> std::result::Result<T, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

impl Common {
    fn scenario(&self, base: SweepScenario) -> Result<SweepScenario> {
        let mut s = match &self.config {
            Some(path) => SweepScenario::from_path(path)?,
            None => base,
        };
        if let Some(m) = self.mode {
            s.mode = m;
        }
        if let Some(m) = self.method {
            s.method = m;
        }
        if let Some(k) = self.kappa {
            s.kappa = k;
        }
        if let Some(t) = self.tau_max {
            s.tau_stop = t;
            s.tau_points = None;
        }
        if let Some(n) = self.tau_steps {
            s.tau_steps = n;
            s.tau_points = None;
        }
        if let Some(b) = self.beta {
            s.beta = Some(b);
            if !self.low_t {
                s.low_t = false;
            }
        }
        if self.low_t {
            s.low_t = true;
        }
        if self.out.is_some() {
            s.out = self.out.clone();
        }
        Ok(s)
    }
}

fn run(cli: Cli) -> Result<Report> {
    let (common, scenario, body): (&Common, SweepScenario, fn(&SweepScenario, Option<Panel>) -> Result<Report>) =
        match &cli.command {
            Command::Coefficients(c) => (c, c.scenario(SweepScenario::default())?, |s, _| commands::cmd_coefficients(s)),
            Command::Evolve(c) => (c, c.scenario(SweepScenario::default())?, |s, _| commands::cmd_evolve(s)),
            Command::Sweep(c) => (c, c.scenario(SweepScenario::default())?, |s, _| commands::cmd_sweep(s)),
            Command::Verify(c) => (c, c.scenario(SweepScenario::default())?, |s, _| commands::cmd_verify(s)),
            Command::Fig1(f) => (&f.common, f.common.scenario(SweepScenario::fig1(f.panel))?, |s, p| {
                commands::cmd_fig1(p.expect("panel"), s)
            }),
            Command::Fig2(f) => (&f.common, f.common.scenario(SweepScenario::fig2(f.panel))?, |s, p| {
                commands::cmd_fig2(p.expect("panel"), s)
            }),
        };
    let panel = match &cli.command {
        Command::Fig1(f) | Command::Fig2(f) => Some(f.panel),
        _ => None,
    };

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = common.jobs {
        if n == 0 {
            return Err(Error::Usage {
                field: "jobs".into(),
                message: "must be at least 1".into(),
            });
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| Error::Usage { field: "jobs".into(), message: e.to_string() })?;
    let report = pool.install(|| body(&scenario, panel))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    report.write(scenario.out.as_deref(), &mut std::io::stdout().lock())?;
    Ok(report)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(report) if report.passed => ExitCode::SUCCESS,
        Ok(_) => {
            eprintln!("verify: one or more checks failed");
            ExitCode::FAILURE
        }
        Err(e) => {
            eprintln!("error: {e}");
            let usage = matches!(e, Error::Usage { .. } | Error::Conflict(_));
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
