use std::path::PathBuf;
use std::process::ExitCode;

use bfstar_cli::config::{GradingSpec, MuSpec, RunConfig, SweepSpec};
use bfstar_cli::output::fmt_f64;
use bfstar_cli::{run_single, run_sweep, run_verify, CliError};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bfstar", version, about = "Boson-fermion stars with a massive dilaton")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one configuration and write its profile.
    Solve(Overrides),
    /// Continue a solution across a parameter range.
    Sweep(Overrides),
    /// Mesh refinement, far-field and Jacobian checks for one configuration.
    Verify(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML file with [physics], [numerics], [guess], [sweep], [output] sections.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long)]
    sigma_c: Option<f64>,
    #[arg(long)]
    mu_c: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    b: Option<f64>,
    /// Number of mesh intervals.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    x_inf: Option<f64>,
    /// uniform, surface or condensed:<strength>
    #[arg(long)]
    grading: Option<GradingSpec>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    tau_min: Option<f64>,
    /// frozen, linearized, hybrid or hybrid:<delta>
    #[arg(long)]
    mu_treatment: Option<MuSpec>,
    /// parameter:start:stop:step, e.g. sigma_c:0.1:0.9:0.05
    #[arg(long)]
    sweep: Option<SweepSpec>,
    /// Solve sweep points independently and in parallel.
    #[arg(long)]
    parallel: bool,
    #[arg(long, env = "BFSTAR_OUT")]
    out: Option<PathBuf>,
    #[arg(long)]
    emit_plots: bool,
    /// Keep a profile for every sweep point.
    #[arg(long)]
    sweep_profiles: bool,
}

impl Overrides {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let p = &mut cfg.physics;
        for (slot, value) in [
            (&mut p.sigma_c, self.sigma_c),
            (&mut p.mu_c, self.mu_c),
            (&mut p.lambda, self.lambda),
            (&mut p.gamma, self.gamma),
            (&mut p.b, self.b),
        ] {
            if let Some(v) = value {
                *slot = v;
            }
        }
        let num = &mut cfg.numerics;
        if let Some(v) = self.n {
            num.n = v;
        }
        if let Some(v) = self.x_inf {
            num.x_inf = v;
        }
        if let Some(v) = self.grading {
            num.grading = v;
        }
        if let Some(v) = self.eps {
            num.eps = v;
        }
        if let Some(v) = self.max_iter {
            num.max_iter = v;
        }
        if let Some(v) = self.tau_min {
            num.tau_min = v;
        }
        if let Some(v) = self.mu_treatment {
            num.mu = v;
        }
        if let Some(v) = self.sweep {
            cfg.sweep = Some(v);
        }
        if self.parallel {
            if let Some(s) = cfg.sweep.as_mut() {
                s.parallel = true;
            }
        }
        if let Some(v) = &self.out {
            cfg.output.directory = v.clone();
        }
        cfg.output.emit_plots |= self.emit_plots;
        cfg.output.sweep_profiles |= self.sweep_profiles;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Solve(o) => {
            let cfg = o.resolve()?;
            let out = run_single(&cfg)?;
            let r = &out.record;
            println!(
                "R_s = {}  Omega = {}  Omega exp(-nu(0)/2) = {}  iterations = {}  residual = {:.3e}",
                fmt_f64(r.r_s),
                fmt_f64(r.omega),
                fmt_f64(r.omega_scaled),
                r.iterations,
                out.report.final_residual()
            );
            println!("wrote {}", cfg.output.directory.display());
            out.into_result().map(|_| ())
        }
        Command::Sweep(o) => {
            let cfg = o.resolve()?;
            let out = run_sweep(&cfg)?;
            for row in &out.rows {
                match &row.failure {
                    None => println!(
                        "{:>10.5}  R_s = {:.8}  Omega = {:.8}  scaled = {:.8}  it = {}",
                        row.value, row.r_s, row.omega, row.scaled_frequency, row.iterations
                    ),
                    Some(why) => println!("{:>10.5}  FAILED: {why}", row.value),
                }
            }
            println!("wrote {}", cfg.output.directory.display());
            if out.all_converged() {
                Ok(())
            } else {
                let failed = out.rows.iter().filter(|r| !r.converged).count();
                Err(CliError::NotConverged(format!(
                    "{failed} sweep point(s) failed{}",
                    if out.aborted { ", sweep aborted" } else { "" }
                )))
            }
        }
        Command::Verify(o) => {
            let cfg = o.resolve()?;
            let report = run_verify(&cfg)?;
            if let Some(r) = &report.runge {
                for row in &r.rows {
                    let p = row.order.map_or("undefined".to_string(), |p| format!("{p:.3}"));
                    println!("runge  {:<9} p = {p:<10} {}", row.observable, verdict(row.pass));
                }
            }
            if let Some(f) = &report.farfield {
                let ratios: Vec<String> = f.ratios.iter().map(|r| format!("{r:.4}")).collect();
                println!("farfield ratios [{}] {}", ratios.join(", "), verdict(f.pass));
            }
            if let Some(v) = report.first_integral {
                println!("first integral residual {v:.3e}");
            }
            if let Some(j) = &report.jacobian {
                println!("jacobian audit max error {:.3e} {}", j.max_error.iter().fold(0.0_f64, |a, &b| a.max(b)), verdict(j.pass));
            }
            for f in &report.failures {
                println!("not completed: {f}");
            }
            if !report.failures.is_empty() {
                Err(CliError::NotConverged(report.failures.join("; ")))
            } else if report.pass {
                Ok(())
            } else {
                Err(CliError::VerificationFailed("see verify.json".into()))
            }
        }
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(3) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bfstar: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
