//! Command-line front end: solve, verify, sweep, simulate and demand.
//!
//! Exit statuses: 0 success, 2 usage, 3 convergence failure, 4 failed
//! verification (1 for I/O errors).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod table;

use std::fmt;
use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};
use invexit::mc::{simulate_policy, PathConfig, PolicySpec};
use invexit::{
    demand_to_params, p_invest, solve_thresholds, sweep_row, tech_switch, verify, FiniteDifference,
    Outcome, Params, Salvage, Solution, Solved, SolverConfig, Statics,
};
use rayon::prelude::*;

use crate::table::{real, Table};

#[derive(Debug, Parser)]
#[command(
    name = "invexit",
    version,
    about = "Exit and investment thresholds for a Brownian profit stream"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve for the thresholds and check their optimality.
    Solve {
        #[command(flatten)]
        model: ModelArgs,
        /// Write the result as a one-row CSV here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the optimality checks on the solver's thresholds or on given ones.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, allow_negative_numbers = true, requires = "xi_i")]
        xi_e: Option<f64>,
        #[arg(long, allow_negative_numbers = true, requires = "xi_e")]
        xi_i: Option<f64>,
        /// Points in each verification grid.
        #[arg(long, default_value_t = 2000)]
        grid: usize,
    },
    /// Thresholds and their sensitivities over a parameter grid, as CSV.
    Sweep {
        #[command(flatten)]
        model: ModelArgs,
        /// `var:lo:hi:steps` with var one of b, g, sigma2, mu; steps counts points.
        #[arg(long, allow_hyphen_values = true)]
        sweep: SweepSpec,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write a gnuplot script plotting the CSV given by --out.
        #[arg(long, requires = "out")]
        gnuplot: Option<PathBuf>,
        /// Relative finite-difference step.
        #[arg(long, default_value_t = 1e-4)]
        fd_step: f64,
        #[arg(long)]
        richardson: bool,
    },
    /// Compare simulated returns of the optimal policy with the closed forms.
    Simulate {
        #[command(flatten)]
        model: ModelArgs,
        /// Start rates (comma separated); defaults to xi_E + 0.1, x+, xi_I - 0.1.
        #[arg(long, allow_hyphen_values = true, value_delimiter = ',')]
        x0: Vec<f64>,
        #[arg(long, default_value_t = 20_000)]
        paths: usize,
        /// Time step; defaults to 1e-4 / alpha.
        #[arg(long)]
        dt: Option<f64>,
        /// Truncation time; defaults to 40 / alpha.
        #[arg(long)]
        horizon: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Map demand `D` with drift to a profit rate `price * D - cost` and solve.
    Demand {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        price: f64,
        #[arg(long, allow_negative_numbers = true)]
        cost: f64,
        #[arg(long, allow_negative_numbers = true)]
        demand_drift: f64,
        #[arg(long, allow_negative_numbers = true)]
        demand0: f64,
    },
}

#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// Discount rate.
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    pub alpha: f64,
    /// Drift of the profit rate before investing.
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    pub mu: f64,
    /// Variance rate of the profit rate.
    #[arg(long, default_value_t = 0.5, allow_negative_numbers = true)]
    pub sigma2: f64,
    /// Drift improvement from investing.
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub delta: f64,
    /// Jump in the profit rate from investing.
    #[arg(
        long = "b",
        default_value_t = 1.0,
        allow_negative_numbers = true,
        conflicts_with = "g"
    )]
    pub b: f64,
    /// Net gain `b + delta/alpha - alpha k`; sets b.
    #[arg(long = "g", allow_negative_numbers = true)]
    pub g: Option<f64>,
    /// Investment cost.
    #[arg(long = "k", default_value_t = 0.5, allow_negative_numbers = true)]
    pub k: f64,
    /// Lump sum received on exit.
    #[arg(long = "s", default_value_t = 0.0, allow_negative_numbers = true)]
    pub s: f64,
}

impl ModelArgs {
    pub fn params(&self) -> Result<Params, CliError> {
        let p = match self.g {
            Some(g) => Params::from_gain(self.alpha, self.mu, self.sigma2, self.delta, g, self.k),
            None => Params::new(self.alpha, self.mu, self.sigma2, self.delta, self.b, self.k),
        };
        p.map_err(|e| CliError::Usage(e.to_string()))
    }

    fn salvage(&self) -> Result<Salvage, CliError> {
        Salvage::new(self.s).map_err(|e| CliError::Usage(e.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepVar {
    B,
    G,
    Sigma2,
    Mu,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSpec {
    pub var: SweepVar,
    pub lo: f64,
    pub hi: f64,
    pub steps: usize,
}

impl SweepSpec {
    pub fn values(&self) -> Vec<f64> {
        match self.steps {
            0 => Vec::new(),
            1 => vec![self.lo],
            n => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }

    fn apply(&self, p: &Params, v: f64) -> invexit::Result<Params> {
        match self.var {
            SweepVar::B => p.with_b(v),
            SweepVar::G => p.with_gain(v),
            SweepVar::Sigma2 => p.with_sigma2(v),
            SweepVar::Mu => p.with_mu(v),
        }
    }
}

impl FromStr for SweepSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [var, lo, hi, steps] = parts[..] else {
            return Err(format!("expected var:lo:hi:steps, got `{s}`"));
        };
        let var = match var {
            "b" => SweepVar::B,
            "g" => SweepVar::G,
            "sigma2" => SweepVar::Sigma2,
            "mu" => SweepVar::Mu,
            other => {
                return Err(format!(
                    "unknown sweep variable `{other}` (b, g, sigma2, mu)"
                ))
            }
        };
        let num = |t: &str| {
            t.parse::<f64>()
                .map_err(|e| format!("bad bound `{t}`: {e}"))
        };
        let (lo, hi) = (num(lo)?, num(hi)?);
        let steps = steps
            .parse::<usize>()
            .map_err(|e| format!("bad step count `{steps}`: {e}"))?;
        if !lo.is_finite() || !hi.is_finite() {
            return Err("sweep bounds must be finite".into());
        }
        if steps > 1 && !(hi > lo) {
            return Err(format!("sweep grid must be increasing, got {lo}..{hi}"));
        }
        Ok(SweepSpec { var, lo, hi, steps })
    }
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Convergence(String),
    Verification(String),
    Io(io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Convergence(_) => 3,
            CliError::Verification(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Convergence(m) => write!(f, "solver did not converge: {m}"),
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Io(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.into())
    }
}

impl From<invexit::Error> for CliError {
    fn from(e: invexit::Error) -> Self {
        use invexit::Error as E;
        match e {
            E::Convergence { .. } | E::DegenerateInterval { .. } | E::Perturbed { .. } => {
                CliError::Convergence(e.to_string())
            }
            _ => CliError::Usage(e.to_string()),
        }
    }
}

pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Solve { model, out } => cmd_solve(&model, out.as_deref(), stdout),
        Command::Verify {
            model,
            xi_e,
            xi_i,
            grid,
        } => cmd_verify(&model, xi_e.zip(xi_i), grid, stdout),
        Command::Sweep {
            model,
            sweep,
            out,
            gnuplot,
            fd_step,
            richardson,
        } => {
            let fd = FiniteDifference {
                relative: fd_step,
                richardson,
            };
            cmd_sweep(
                &model,
                &sweep,
                &fd,
                out.as_deref(),
                gnuplot.as_deref(),
                stdout,
            )
        }
        Command::Simulate {
            model,
            x0,
            paths,
            dt,
            horizon,
            seed,
            out,
        } => {
            let sim = SimOptions {
                x0,
                paths,
                dt,
                horizon,
                seed,
            };
            cmd_simulate(&model, &sim, out.as_deref(), stdout)
        }
        Command::Demand {
            model,
            price,
            cost,
            demand_drift,
            demand0,
        } => cmd_demand(&model, price, cost, demand_drift, demand0, stdout),
    }
}

fn sink<'a>(out: Option<&Path>, stdout: &'a mut dyn Write) -> io::Result<Box<dyn Write + 'a>> {
    Ok(match out {
        Some(path) => Box::new(io::BufWriter::new(File::create(path)?)),
        None => Box::new(stdout),
    })
}

fn describe_params(p: &Params) -> String {
    format!(
        "alpha = {}, mu = {}, sigma2 = {}, delta = {}, b = {}, k = {}",
        p.alpha(),
        p.mu(),
        p.sigma2(),
        p.delta(),
        p.b(),
        p.k()
    )
}

const SOLVE_HEADER: [&str; 15] = [
    "alpha", "mu", "sigma2", "delta", "b", "k", "g", "xi_0", "xi_1", "x_plus", "xi_E", "xi_I",
    "a1", "a2", "status",
];

fn solve(p: &Params, cfg: &SolverConfig) -> Result<Outcome, CliError> {
    Ok(solve_thresholds(p, cfg)?)
}

pub fn cmd_solve(
    model: &ModelArgs,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let p = model.params()?;
    let salvage = model.salvage()?;
    let outcome = solve(&p, &SolverConfig::default())?;
    let t = invexit::investment_terms(&p)?;
    writeln!(stdout, "parameters: {}", describe_params(&p))?;
    writeln!(stdout, "g      = {:.10}", t.g)?;
    writeln!(stdout, "xi_0   = {:.10}", t.xi0)?;
    writeln!(stdout, "xi_1   = {:.10}", t.xi1)?;
    writeln!(stdout, "x_plus = {:.10}", t.x_plus)?;
    let nan = f64::NAN;
    let (fields, failed) = match &outcome {
        Outcome::NeverInvest { xi0, .. } => {
            writeln!(stdout, "never-invest; exit threshold xi_0 = {xi0:.10}")?;
            if salvage.s != 0.0 {
                let (_, xi) = invexit::salvage_exit(&p.base_exit(), &salvage, 0.0);
                writeln!(
                    stdout,
                    "with salvage s = {}: exit threshold {xi:.10}",
                    salvage.s
                )?;
            }
            ([t.xi0, f64::INFINITY, nan, nan], None)
        }
        Outcome::Invest(s) => {
            let sol = &s.solution;
            writeln!(stdout, "xi_E   = {:.10}", sol.xi_e)?;
            writeln!(stdout, "xi_I   = {:.10}", sol.xi_i)?;
            writeln!(stdout, "a1     = {:.10e}", sol.a1)?;
            writeln!(stdout, "a2     = {:.10e}", sol.a2)?;
            if s.sign_changes > 1 {
                writeln!(
                    stdout,
                    "note: {} candidate roots found; first verified one reported",
                    s.sign_changes
                )?;
            }
            if salvage.s != 0.0 {
                let (_, xi_i, xi_e) = tech_switch(sol, &salvage, 0.0);
                writeln!(
                    stdout,
                    "with salvage s = {}: xi_E = {xi_e:.10}, xi_I = {xi_i:.10}",
                    salvage.s
                )?;
            }
            write_report(s, stdout)?;
            let failed = (!s.report.passed()).then(|| s.report.failures().join(", "));
            ([sol.xi_e, sol.xi_i, sol.a1, sol.a2], failed)
        }
    };
    let status = match (&outcome, &failed) {
        (Outcome::NeverInvest { .. }, _) => "never_invest",
        (_, Some(_)) => "verification_failed",
        _ => "ok",
    };
    if out.is_none() {
        writeln!(stdout)?;
    }
    let mut table = Table::new(sink(out, stdout)?, &SOLVE_HEADER)?;
    let mut row: Vec<String> = [
        p.alpha(),
        p.mu(),
        p.sigma2(),
        p.delta(),
        p.b(),
        p.k(),
        t.g,
        t.xi0,
        t.xi1,
        t.x_plus,
    ]
    .into_iter()
    .chain(fields)
    .map(real)
    .collect();
    row.push(status.into());
    table.row(&row)?;
    table.finish()?;
    match failed {
        Some(which) => Err(CliError::Verification(which)),
        None => Ok(()),
    }
}

fn write_report(s: &Solved, stdout: &mut dyn Write) -> io::Result<()> {
    let verdict = if s.report.passed() { "PASS" } else { "FAIL" };
    writeln!(stdout, "verification: {verdict}")?;
    writeln!(stdout, "{}", s.report)
}

pub fn cmd_verify(
    model: &ModelArgs,
    thresholds: Option<(f64, f64)>,
    grid: usize,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let p = model.params()?;
    let cfg = SolverConfig {
        grid_points: grid.max(3),
        ..SolverConfig::default()
    };
    let solution = match thresholds {
        Some((xi_e, xi_i)) => Solution::value_matched(&p, xi_e, xi_i)?,
        None => match solve(&p, &cfg)? {
            Outcome::Invest(s) => s.solution,
            Outcome::NeverInvest { xi0, .. } => {
                writeln!(stdout, "never-invest; exit threshold xi_0 = {xi0:.10}")?;
                return Ok(());
            }
        },
    };
    let report = verify(&solution, &cfg);
    writeln!(
        stdout,
        "xi_E = {:.10}, xi_I = {:.10}",
        solution.xi_e, solution.xi_i
    )?;
    let verdict = if report.passed() { "PASS" } else { "FAIL" };
    writeln!(stdout, "verification: {verdict}")?;
    writeln!(stdout, "{report}")?;
    if report.passed() {
        Ok(())
    } else {
        Err(CliError::Verification(report.failures().join(", ")))
    }
}

pub const SWEEP_HEADER: [&str; 10] = [
    "g",
    "b",
    "xi_0",
    "xi_1",
    "xi_E",
    "xi_I",
    "d_xiE_dsigma2",
    "d_xiI_dsigma2",
    "d_xiI_dmu",
    "solver_status",
];

fn sweep_record(row: &Statics) -> Vec<String> {
    let mut r: Vec<String> = [
        row.g,
        row.params.b(),
        row.xi0,
        row.xi1,
        row.xi_e,
        row.xi_i,
        row.d_xi_e_dsigma2,
        row.d_xi_i_dsigma2,
        row.d_xi_i_dmu,
    ]
    .into_iter()
    .map(real)
    .collect();
    r.push(row.status.to_string());
    r
}

pub fn cmd_sweep(
    model: &ModelArgs,
    spec: &SweepSpec,
    fd: &FiniteDifference,
    out: Option<&Path>,
    gnuplot: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    if !(fd.relative > 0.0) {
        return Err(CliError::Usage(format!(
            "--fd-step must be positive, got {}",
            fd.relative
        )));
    }
    let base = model.params()?;
    let points = spec
        .values()
        .into_iter()
        .map(|v| spec.apply(&base, v))
        .collect::<invexit::Result<Vec<_>>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let cfg = SolverConfig::default();
    let rows: Vec<Statics> = points.par_iter().map(|p| sweep_row(p, fd, &cfg)).collect();

    let mut table = Table::new(sink(out, stdout)?, &SWEEP_HEADER)?;
    for row in &rows {
        table.row(sweep_record(row))?;
    }
    table.finish()?;
    if let (Some(script), Some(data)) = (gnuplot, out) {
        std::fs::write(script, gnuplot_script(data))?;
    }
    let failures: Vec<String> = rows
        .iter()
        .filter(|r| r.status.is_convergence_failure())
        .map(|r| format!("g = {}: {}", r.g, r.status))
        .collect();
    if failures.is_empty() {
        Ok(())
    } else {
        Err(CliError::Convergence(failures.join("; ")))
    }
}

fn gnuplot_script(data: &Path) -> String {
    let file = data.display();
    format!(
        "set datafile separator ','\n\
         set key autotitle columnhead\n\
         set xlabel 'g'\n\
         set multiplot layout 1,2\n\
         set title 'Thresholds'\n\
         plot '{file}' using 1:3 with lines, '' using 1:5 with lines, '' using 1:6 with lines\n\
         set title 'Threshold derivatives'\n\
         plot '{file}' using 1:7 with lines, '' using 1:8 with lines, '' using 1:9 with lines\n\
         unset multiplot\n"
    )
}

pub struct SimOptions {
    pub x0: Vec<f64>,
    pub paths: usize,
    pub dt: Option<f64>,
    pub horizon: Option<f64>,
    pub seed: u64,
}

pub const SIMULATE_HEADER: [&str; 7] = [
    "x0",
    "analytic_value",
    "mc_mean",
    "mc_se",
    "p_invest_closed",
    "p_invest_mc",
    "z_score",
];

fn z_score(diff: f64, se: f64) -> f64 {
    if diff == 0.0 {
        0.0
    } else {
        diff / se
    }
}

type RateFn = Box<dyn Fn(f64) -> f64>;

pub fn cmd_simulate(
    model: &ModelArgs,
    sim: &SimOptions,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let p = model.params()?;
    let outcome = solve(&p, &SolverConfig::default())?;
    let (policy, value, prob, defaults): (PolicySpec, RateFn, RateFn, Vec<f64>) = match outcome {
        Outcome::Invest(s) => {
            let sol = s.solution;
            let prob = move |x: f64| {
                if x <= sol.xi_e {
                    0.0
                } else if x >= sol.xi_i {
                    1.0
                } else {
                    p_invest(&sol, x).unwrap_or(f64::NAN)
                }
            };
            (
                PolicySpec::from_solution(&sol),
                Box::new(move |x| sol.value(x)),
                Box::new(prob),
                vec![sol.xi_e + 0.1, sol.x_plus, sol.xi_i - 0.1],
            )
        }
        Outcome::NeverInvest { xi0, .. } => {
            let exit = p.base_exit();
            (
                PolicySpec::exit_only(xi0)?,
                Box::new(move |x| exit.value(x)),
                Box::new(|_| 0.0),
                vec![xi0 + 0.1, xi0 + 0.5],
            )
        }
    };
    let starts = if sim.x0.is_empty() {
        defaults
    } else {
        sim.x0.clone()
    };
    let base = PathConfig::new(p.alpha(), 0.0, sim.paths, sim.seed);
    let cfg = PathConfig {
        dt: sim.dt.unwrap_or(base.dt),
        horizon: sim.horizon.unwrap_or(base.horizon),
        ..base
    };

    let mut table = Table::new(sink(out, stdout)?, &SIMULATE_HEADER)?;
    for x0 in starts {
        let est = simulate_policy(&p, &policy, &PathConfig { x0, ..cfg })?;
        let exact = value(x0);
        let fields = [
            x0,
            exact,
            est.mean,
            est.std_error,
            prob(x0),
            est.p_invest_hat,
            z_score(est.mean - exact, est.std_error),
        ];
        table.row(fields.map(real))?;
    }
    table.finish()?;
    Ok(())
}

pub fn cmd_demand(
    model: &ModelArgs,
    price: f64,
    cost: f64,
    demand_drift: f64,
    demand0: f64,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let (mu, x0) = demand_to_params(price, cost, demand_drift, demand0)?;
    let model = ModelArgs {
        mu,
        ..model.clone()
    };
    let p = model.params()?;
    writeln!(
        stdout,
        "profit drift mu = {mu:.10}, current profit rate x0 = {x0:.10}"
    )?;
    writeln!(stdout, "parameters: {}", describe_params(&p))?;
    match solve(&p, &SolverConfig::default())? {
        Outcome::NeverInvest { xi0, .. } => {
            writeln!(stdout, "never-invest; exit threshold xi_0 = {xi0:.10}")?;
            let action = if x0 <= xi0 { "exit" } else { "continue" };
            writeln!(stdout, "action at x0: {action}")?;
        }
        Outcome::Invest(s) => {
            let sol = &s.solution;
            writeln!(stdout, "xi_E = {:.10}, xi_I = {:.10}", sol.xi_e, sol.xi_i)?;
            let action = if x0 <= sol.xi_e {
                "exit"
            } else if x0 >= sol.xi_i {
                "invest"
            } else {
                "wait"
            };
            writeln!(stdout, "action at x0: {action}")?;
            writeln!(stdout, "value at x0: {:.10}", sol.value(x0))?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> ModelArgs {
        ModelArgs {
            alpha: 1.0,
            mu: -1.0,
            sigma2: 0.5,
            delta: 0.1,
            b: 1.0,
            g: None,
            k: 0.5,
            s: 0.0,
        }
    }

    #[test]
    fn sweep_spec_parsing() {
        let s: SweepSpec = "g:0.05:2:40".parse().unwrap();
        assert_eq!((s.var, s.lo, s.hi, s.steps), (SweepVar::G, 0.05, 2.0, 40));
        let v = s.values();
        assert_eq!(v.len(), 40);
        assert_eq!((v[0], v[39]), (0.05, 2.0));
        assert!("mu:-2:-0.5:3".parse::<SweepSpec>().is_ok());
        assert!("x:0:1:3".parse::<SweepSpec>().is_err());
        assert!("g:1:0:3".parse::<SweepSpec>().is_err());
        assert!("g:0:1".parse::<SweepSpec>().is_err());
        assert!("g:0:inf:3".parse::<SweepSpec>().is_err());
        assert!("g:0:1:0".parse::<SweepSpec>().unwrap().values().is_empty());
        assert_eq!("b:2:2:1".parse::<SweepSpec>().unwrap().values(), vec![2.0]);
    }

    #[test]
    fn gain_flag_sets_boost() {
        let p = ModelArgs {
            g: Some(0.96),
            ..defaults()
        }
        .params()
        .unwrap();
        assert!((p.b() - 1.36).abs() < 1e-12);
    }

    #[test]
    fn bad_parameters_are_usage_errors() {
        let e = ModelArgs {
            sigma2: -0.5,
            ..defaults()
        }
        .params()
        .unwrap_err();
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn solve_prints_closed_forms() {
        let mut buf = Vec::new();
        cmd_solve(&defaults(), None, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.contains("xi_0   = -0.2071067812"));
        assert!(text.contains("g      = 0.6000000000"));
        assert!(text.contains("verification: PASS"));
    }

    #[test]
    fn zero_score_for_exact_zero() {
        assert_eq!(z_score(0.0, 0.0), 0.0);
        assert_eq!(z_score(1.0, 0.0), f64::INFINITY);
        assert_eq!(z_score(1.0, 0.5), 2.0);
    }

    #[test]
    fn model_errors_map_to_exit_codes() {
        let conv: CliError = invexit::Error::Convergence {
            stage: "x",
            detail: String::new(),
        }
        .into();
        assert_eq!(conv.exit_code(), 3);
        let dom: CliError = invexit::Error::Config("bad".into()).into();
        assert_eq!(dom.exit_code(), 2);
    }
}
