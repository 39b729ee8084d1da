//! Parameter sweeps. The default mode is natural continuation: each point
//! starts from the previous converged state, and a failed step is retried
//! with halved increments. The parallel mode solves every point cold.

use bfstar_core::canm::FieldState;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{RunConfig, SweepSpec};
use crate::output;
use crate::solve::{solve_config, write_solve_artifacts, SolveOutcome};
use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub converged: bool,
    pub r_s: f64,
    pub omega: f64,
    pub nu_center: f64,
    pub nu_surface: f64,
    pub phi_center: f64,
    pub scaled_frequency: f64,
    /// Iterations of the solve that produced this point.
    pub iterations: usize,
    /// Intermediate continuation points inserted by step bisection.
    pub substeps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

impl SweepRow {
    fn solved(value: f64, out: &SolveOutcome, substeps: usize) -> Self {
        let r = &out.record;
        Self {
            value,
            converged: true,
            r_s: r.r_s,
            omega: r.omega,
            nu_center: r.nu_center,
            nu_surface: r.nu_surface,
            phi_center: r.phi_center,
            scaled_frequency: r.omega_scaled,
            iterations: r.iterations,
            substeps,
            failure: None,
        }
    }

    fn failed(value: f64, reason: String, iterations: usize) -> Self {
        Self {
            value,
            converged: false,
            r_s: f64::NAN,
            omega: f64::NAN,
            nu_center: f64::NAN,
            nu_surface: f64::NAN,
            phi_center: f64::NAN,
            scaled_frequency: f64::NAN,
            iterations,
            substeps: 0,
            failure: Some(reason),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    pub rows: Vec<SweepRow>,
    /// Set when the sweep stopped early after repeated failures.
    pub aborted: bool,
}

impl SweepOutcome {
    pub fn all_converged(&self) -> bool {
        !self.aborted && self.rows.iter().all(|r| r.converged)
    }
}

fn point_config(cfg: &RunConfig, spec: &SweepSpec, value: f64) -> RunConfig {
    let mut c = cfg.clone();
    c.physics = cfg.physics.with(spec.parameter, value);
    c.sweep = None;
    c
}

fn failure_reason(out: &SolveOutcome) -> String {
    format!("{} after {} iterations", out.record.termination, out.record.iterations)
}

/// Moves from a converged `(from, state)` to `target`, halving the
/// increment on failure. Returns the final outcome and the number of
/// intermediate points used.
fn continue_to(
    cfg: &RunConfig,
    spec: &SweepSpec,
    from: f64,
    state: &FieldState,
    target: f64,
) -> Result<(SolveOutcome, usize), (String, usize)> {
    let mut current = (from, state.clone());
    let mut step = target - from;
    let mut halvings = 0;
    let mut substeps = 0;
    let mut last_iterations = 0;
    loop {
        let remaining = target - current.0;
        let next = if remaining.abs() <= step.abs() * (1.0 + 1e-12) {
            target
        } else {
            current.0 + step
        };
        let attempt = solve_config(&point_config(cfg, spec, next), Some(current.1.clone()));
        match attempt {
            Ok(out) if out.record.converged => {
                if next == target {
                    return Ok((out, substeps));
                }
                substeps += 1;
                current = (next, out.state);
            }
            other => {
                let reason = match other {
                    Ok(out) => {
                        last_iterations = out.record.iterations;
                        failure_reason(&out)
                    }
                    Err(e) => e.to_string(),
                };
                halvings += 1;
                if halvings > spec.max_bisections {
                    return Err((format!("{reason} (step {step:e} after {} halvings)", halvings - 1), last_iterations));
                }
                step *= 0.5;
            }
        }
    }
}

fn sequential(cfg: &RunConfig, spec: &SweepSpec) -> Result<SweepOutcome, CliError> {
    let mut rows = Vec::new();
    let mut previous: Option<(f64, FieldState)> = None;
    let mut consecutive = 0;
    for value in spec.values() {
        let pc = point_config(cfg, spec, value);
        let result = match &previous {
            None => match solve_config(&pc, None)? {
                out if out.record.converged => Ok((out, 0)),
                out => Err((failure_reason(&out), out.record.iterations)),
            },
            Some((from, state)) => continue_to(cfg, spec, *from, state, value),
        };
        match result {
            Ok((out, substeps)) => {
                rows.push(SweepRow::solved(value, &out, substeps));
                if cfg.output.sweep_profiles {
                    write_point(&pc, rows.len() - 1, &out)?;
                }
                previous = Some((value, out.state));
                consecutive = 0;
            }
            Err((reason, iterations)) => {
                rows.push(SweepRow::failed(value, reason, iterations));
                consecutive += 1;
                if consecutive >= spec.max_failures {
                    return Ok(SweepOutcome { rows, aborted: true });
                }
            }
        }
    }
    Ok(SweepOutcome { rows, aborted: false })
}

fn parallel(cfg: &RunConfig, spec: &SweepSpec) -> Result<SweepOutcome, CliError> {
    let results: Vec<Result<SweepRow, CliError>> = spec
        .values()
        .into_par_iter()
        .enumerate()
        .map(|(k, value)| {
            let pc = point_config(cfg, spec, value);
            let out = solve_config(&pc, None)?;
            if !out.record.converged {
                return Ok(SweepRow::failed(value, failure_reason(&out), out.record.iterations));
            }
            if cfg.output.sweep_profiles {
                write_point(&pc, k, &out)?;
            }
            Ok(SweepRow::solved(value, &out, 0))
        })
        .collect();
    let rows = results.into_iter().collect::<Result<_, _>>()?;
    Ok(SweepOutcome { rows, aborted: false })
}

fn write_point(pc: &RunConfig, index: usize, out: &SolveOutcome) -> Result<(), CliError> {
    let mut c = pc.clone();
    c.output.directory = pc.output.directory.join(format!("point_{index:03}"));
    write_solve_artifacts(&c, out)
}

#[derive(Serialize)]
struct SweepFile<'a> {
    config: &'a RunConfig,
    #[serde(flatten)]
    outcome: &'a SweepOutcome,
}

/// Runs the configured sweep and writes `sweep.tsv` and `sweep.json`.
pub fn run_sweep(cfg: &RunConfig) -> Result<SweepOutcome, CliError> {
    cfg.validate()?;
    let spec = cfg
        .sweep
        .ok_or_else(|| CliError::Config("no sweep configured (use --sweep or a [sweep] section)".into()))?;
    let outcome = if spec.parallel {
        parallel(cfg, &spec)?
    } else {
        sequential(cfg, &spec)?
    };
    let dir = &cfg.output.directory;
    output::write_text(dir, output::SWEEP_FILE, &output::sweep_table(cfg, &outcome.rows))?;
    output::write_json(
        dir,
        output::SWEEP_REPORT_FILE,
        &SweepFile {
            config: cfg,
            outcome: &outcome,
        },
    )?;
    if cfg.output.emit_plots {
        output::write_text(
            dir,
            "sweep.gp",
            &output::sweep_plot_script(output::SWEEP_FILE, spec.parameter.name()),
        )?;
    }
    Ok(outcome)
}
