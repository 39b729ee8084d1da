use std::sync::Arc;

use bfstar_core::canm::{default_initial_guess, solve, FieldState, SolveReport, Termination};
use bfstar_core::diagnostics::{boundary_slope, first_integral_residual};
use bfstar_core::model::{NU, PHI, SIGMA};
use bfstar_core::prelude::{build_grid, Grid};
use serde::Serialize;

use crate::config::RunConfig;
use crate::output::{self, scaled_frequency};
use crate::CliError;

/// Scalar summary of one solve, as written to `report.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveRecord {
    pub converged: bool,
    pub termination: String,
    pub iterations: usize,
    pub r_s: f64,
    pub omega: f64,
    pub omega_scaled: f64,
    pub nu_center: f64,
    pub phi_center: f64,
    pub sigma_center: f64,
    pub nu_surface: f64,
    pub phi_surface: f64,
    pub sigma_surface: f64,
    /// `nu'(X_inf)`.
    pub farfield_slope: f64,
    pub first_integral_residual: f64,
    pub residual_history: Vec<f64>,
    pub tau_history: Vec<f64>,
}

impl SolveRecord {
    pub fn new(state: &FieldState, report: &SolveReport) -> Self {
        let c = state.center();
        let s = state.surface();
        Self {
            converged: report.converged,
            termination: describe(&report.termination),
            iterations: report.iterations,
            r_s: state.pair.r_s,
            omega: state.pair.omega,
            omega_scaled: scaled_frequency(state),
            nu_center: c[NU],
            phi_center: c[PHI],
            sigma_center: c[SIGMA],
            nu_surface: s[NU],
            phi_surface: s[PHI],
            sigma_surface: s[SIGMA],
            farfield_slope: boundary_slope(state),
            first_integral_residual: first_integral_residual(state),
            residual_history: report.residual_history.clone(),
            tau_history: report.tau_history.clone(),
        }
    }
}

pub fn describe(t: &Termination) -> String {
    match t {
        Termination::Converged => "converged".into(),
        Termination::MaxIterations => "iteration limit reached".into(),
        Termination::LinearSolve(m) => format!("linear solve failed: {m}"),
        Termination::Diverged(m) => format!("diverged: {m}"),
    }
}

#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub state: FieldState,
    pub report: SolveReport,
    pub record: SolveRecord,
}

impl SolveOutcome {
    pub fn into_result(self) -> Result<Self, CliError> {
        if self.record.converged {
            Ok(self)
        } else {
            Err(CliError::NotConverged(format!(
                "{} after {} iterations (residual {:e})",
                self.record.termination,
                self.record.iterations,
                self.report.final_residual()
            )))
        }
    }
}

pub fn grid_for(cfg: &RunConfig) -> Result<Arc<Grid>, CliError> {
    let n = &cfg.numerics;
    build_grid(n.n, n.x_inf, n.grading.0)
        .map(Arc::new)
        .map_err(|e| CliError::Config(format!("numerics: {e}")))
}

/// Solves from `initial`, or from the configured analytic guess.
pub fn solve_config(cfg: &RunConfig, initial: Option<FieldState>) -> Result<SolveOutcome, CliError> {
    let model = cfg.physics.model();
    let initial = match initial {
        Some(s) => s.with_model(model),
        None => default_initial_guess(&model, grid_for(cfg)?, &cfg.guess.into()),
    };
    let (state, report) = match solve(initial, &cfg.numerics.options()) {
        Ok(r) => r,
        Err(e) => return Err(CliError::NotConverged(format!("initial state rejected: {e}"))),
    };
    let record = SolveRecord::new(&state, &report);
    Ok(SolveOutcome { state, report, record })
}

#[derive(Serialize)]
struct SolveFile<'a> {
    config: &'a RunConfig,
    result: &'a SolveRecord,
}

/// Writes the profile, the JSON report and optionally a plot script.
pub fn write_solve_artifacts(cfg: &RunConfig, out: &SolveOutcome) -> Result<(), CliError> {
    let dir = &cfg.output.directory;
    output::write_text(dir, output::PROFILE_FILE, &output::profile_table(cfg, &out.state, out.record.converged))?;
    output::write_json(
        dir,
        output::REPORT_FILE,
        &SolveFile {
            config: cfg,
            result: &out.record,
        },
    )?;
    if cfg.output.emit_plots {
        output::write_text(dir, "profile.gp", &output::profile_plot_script(output::PROFILE_FILE))?;
    }
    Ok(())
}

/// Validates, solves cold, and writes artifacts whether or not the
/// iteration converged.
pub fn run_single(cfg: &RunConfig) -> Result<SolveOutcome, CliError> {
    cfg.validate()?;
    let out = solve_config(cfg, None)?;
    write_solve_artifacts(cfg, &out)?;
    Ok(out)
}
