//! Verification studies run against one configuration: the Runge order on
//! nested meshes, the far-field law under `X_inf` doubling, the first
//! integral at the solution, and an audit of the analytic Jacobian.

use std::ops::RangeInclusive;
use std::sync::Arc;

use bfstar_core::canm::FieldState;
use bfstar_core::collocation::collocation_points;
use bfstar_core::diagnostics::{boundary_slope, farfield_decay, first_integral_residual, RungeTriple};
use bfstar_core::model::{frechet_derivatives, rhs_f, Jacobian, PointState, SpectralPair, NU, PHI, SIGMA};
use bfstar_core::prelude::build_grid;
use bfstar_core::Vec3;
use serde::Serialize;

use crate::config::RunConfig;
use crate::output;
use crate::solve::{solve_config, SolveOutcome};
use crate::CliError;

pub const RUNGE_ORDER: RangeInclusive<f64> = 3.5..=4.5;
pub const DECAY_RATIO: RangeInclusive<f64> = 3.8..=4.3;
pub const FIELD_DRIFT: f64 = 1e-4;
pub const FIRST_INTEGRAL: f64 = 1e-12;
pub const JACOBIAN: f64 = 1e-6;

#[derive(Debug, Clone, Serialize)]
pub struct RungeRow {
    pub observable: &'static str,
    pub values: [f64; 3],
    pub order: Option<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RungeStudy {
    pub intervals: [usize; 3],
    pub rows: Vec<RungeRow>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FarFieldStudy {
    pub x_inf: Vec<f64>,
    pub slope: Vec<f64>,
    pub coefficient: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Relative change of `phi(1)` between successive `X_inf`.
    pub phi_drift: Vec<f64>,
    pub sigma_drift: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct JacobianAudit {
    pub points: usize,
    /// Largest scaled discrepancy per block: `dF/dy`, `dF/dy'`, `dF/dR_s`,
    /// `dF/dOmega`, `dF/dmu`.
    pub max_error: [f64; 5],
    pub pass: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub runge: Option<RungeStudy>,
    pub farfield: Option<FarFieldStudy>,
    pub first_integral: Option<f64>,
    pub jacobian: Option<JacobianAudit>,
    /// Sub-studies that could not be completed.
    pub failures: Vec<String>,
    pub pass: bool,
}

const OBSERVABLES: [&str; 5] = ["nu(1)", "phi(1)", "sigma(1)", "R_s", "Omega"];

fn observables(state: &FieldState) -> [f64; 5] {
    let s = state.surface();
    [s[NU], s[PHI], s[SIGMA], state.pair.r_s, state.pair.omega]
}

fn converged(cfg: &RunConfig, initial: Option<FieldState>, what: &str) -> Result<SolveOutcome, String> {
    match solve_config(cfg, initial) {
        Ok(out) if out.record.converged => Ok(out),
        Ok(out) => Err(format!("{what}: {}", out.record.termination)),
        Err(e) => Err(format!("{what}: {e}")),
    }
}

/// Orders on `n, 2n, 4n`; each finer mesh starts from the coarser solution.
pub fn runge_study(cfg: &RunConfig, base: &SolveOutcome) -> Result<RungeStudy, String> {
    let n = cfg.numerics.n;
    let mut states = vec![base.state.clone()];
    for k in 1..3 {
        let mut c = cfg.clone();
        c.numerics.n = n << k;
        let grid = build_grid(c.numerics.n, c.numerics.x_inf, c.numerics.grading.0).map_err(|e| e.to_string())?;
        let start = states[k - 1].resample(Arc::new(grid));
        states.push(converged(&c, Some(start), &format!("Runge mesh n = {}", c.numerics.n))?.state);
    }
    let obs: Vec<[f64; 5]> = states.iter().map(observables).collect();
    let rows = OBSERVABLES
        .iter()
        .enumerate()
        .map(|(j, &name)| {
            let values = [obs[0][j], obs[1][j], obs[2][j]];
            let order = RungeTriple::new(values[0], values[1], values[2]).runge_order().ok();
            RungeRow {
                observable: name,
                values,
                order,
                pass: order.is_some_and(|p| RUNGE_ORDER.contains(&p)),
            }
        })
        .collect();
    Ok(RungeStudy {
        intervals: [n, 2 * n, 4 * n],
        rows,
    })
}

/// Solves at `X/4, X/2, X, 2X` with the mesh step held fixed.
pub fn farfield_study(cfg: &RunConfig, base: &SolveOutcome) -> Result<FarFieldStudy, String> {
    let x = cfg.numerics.x_inf;
    let n = cfg.numerics.n;
    if n % 4 != 0 || x / 4.0 <= 1.0 {
        return Err(format!("X_inf doubling needs n divisible by 4 and X_inf > 4 (n = {n}, X_inf = {x})"));
    }
    let solve_at = |factor: f64, from: &FieldState| -> Result<FieldState, String> {
        let mut c = cfg.clone();
        c.numerics.x_inf = x * factor;
        c.numerics.n = (n as f64 * factor).round() as usize;
        let grid = build_grid(c.numerics.n, c.numerics.x_inf, c.numerics.grading.0).map_err(|e| e.to_string())?;
        Ok(converged(&c, Some(from.resample(Arc::new(grid))), &format!("X_inf = {}", c.numerics.x_inf))?.state)
    };
    let half = solve_at(0.5, &base.state)?;
    let quarter = solve_at(0.25, &half)?;
    let double = solve_at(2.0, &base.state)?;
    let states = [quarter, half, base.state.clone(), double];

    let entries: Vec<(f64, f64)> = states.iter().map(|s| (s.grid().x_inf(), boundary_slope(s))).collect();
    let decay = farfield_decay(&entries).map_err(|e| e.to_string())?;
    let drift = |k: usize| -> Vec<f64> {
        states
            .windows(2)
            .map(|w| ((w[1].surface()[k] - w[0].surface()[k]) / w[0].surface()[k]).abs())
            .collect()
    };
    let phi_drift = drift(PHI);
    let sigma_drift = drift(SIGMA);
    let pass = decay.ratios.iter().all(|r| DECAY_RATIO.contains(r))
        && phi_drift.iter().chain(&sigma_drift).all(|&d| d < FIELD_DRIFT);
    Ok(FarFieldStudy {
        x_inf: decay.x_inf,
        slope: decay.slope,
        coefficient: decay.coefficient,
        ratios: decay.ratios,
        phi_drift,
        sigma_drift,
        pass,
    })
}

/// Central differences with one Richardson extrapolation. Variables are
/// numbered `0..3` for `y`, `3..6` for `y'`, then `R_s`, `Omega`, `mu`.
fn fd_column(state: &FieldState, pt: &PointState, pair: SpectralPair, var: usize, h: f64) -> Option<Vec3> {
    let eval = |delta: f64| {
        let mut p = *pt;
        let mut s = pair;
        match var {
            0..=2 => p.y[var] += delta,
            3..=5 => p.dy[var - 3] += delta,
            6 => s.r_s += delta,
            7 => s.omega += delta,
            _ => p.mu += delta,
        }
        rhs_f(&state.model, &p, s).ok()
    };
    let cd = |h: f64| -> Option<Vec3> {
        let (a, b) = (eval(h)?, eval(-h)?);
        Some(std::array::from_fn(|k| (a[k] - b[k]) / (2.0 * h)))
    };
    let (c1, c2) = (cd(h)?, cd(h / 2.0)?);
    Some(std::array::from_fn(|k| (4.0 * c2[k] - c1[k]) / 3.0))
}

fn analytic_column(jac: &Jacobian, var: usize) -> Vec3 {
    match var {
        0..=2 => std::array::from_fn(|k| jac.dy[k][var]),
        3..=5 => std::array::from_fn(|k| jac.ddy[k][var - 3]),
        6 => jac.dr,
        7 => jac.domega,
        _ => jac.dmu,
    }
}

/// Compares the analytic Frechet derivatives with finite differences at
/// every `stride`-th collocation point of `state`.
pub fn jacobian_audit(state: &FieldState, stride: usize) -> JacobianAudit {
    let mut max_error = [0.0_f64; 5];
    let mut points = 0;
    for cp in collocation_points(state.grid()).step_by(stride.max(1)) {
        let sp = state.y.eval_local(cp.interval, cp.theta);
        let pt = PointState {
            x: cp.x,
            y: sp.value,
            dy: sp.d1,
            mu: state.mu_at(cp.x, &sp.value),
        };
        let Ok((_, jac)) = frechet_derivatives(&state.model, &pt, state.pair) else {
            continue;
        };
        points += 1;
        // mu enters through a square root; differences straddling zero are meaningless.
        let vars = if pt.mu > 1e-3 { 9 } else { 8 };
        for var in 0..vars {
            let an = analytic_column(&jac, var);
            let Some(fd) = fd_column(state, &pt, state.pair, var, 1e-4) else {
                max_error[block(var)] = f64::INFINITY;
                continue;
            };
            let scale = fd.iter().chain(&an).fold(1e-3_f64, |s, v| s.max(v.abs()));
            for k in 0..3 {
                let e = (fd[k] - an[k]).abs() / scale;
                let b = block(var);
                max_error[b] = max_error[b].max(e);
            }
        }
    }
    JacobianAudit {
        points,
        max_error,
        pass: points > 0 && max_error.iter().all(|&e| e <= JACOBIAN),
    }
}

fn block(var: usize) -> usize {
    match var {
        0..=2 => 0,
        3..=5 => 1,
        6 => 2,
        7 => 3,
        _ => 4,
    }
}

/// Runs every study, writes `verify.json`, and reports the aggregate.
pub fn run_verify(cfg: &RunConfig) -> Result<VerifyReport, CliError> {
    cfg.validate()?;
    let mut report = VerifyReport {
        runge: None,
        farfield: None,
        first_integral: None,
        jacobian: None,
        failures: Vec::new(),
        pass: false,
    };
    match converged(cfg, None, "base solve") {
        Ok(base) => {
            report.first_integral = Some(first_integral_residual(&base.state));
            let stride = (base.state.grid().intervals() / 100).max(1);
            report.jacobian = Some(jacobian_audit(&base.state, stride));
            match runge_study(cfg, &base) {
                Ok(r) => report.runge = Some(r),
                Err(e) => report.failures.push(e),
            }
            match farfield_study(cfg, &base) {
                Ok(f) => report.farfield = Some(f),
                Err(e) => report.failures.push(e),
            }
        }
        Err(e) => report.failures.push(e),
    }
    report.pass = report.failures.is_empty()
        && report.runge.as_ref().is_some_and(|r| r.rows.iter().all(|row| row.pass))
        && report.farfield.as_ref().is_some_and(|f| f.pass)
        && report.first_integral.is_some_and(|v| v <= FIRST_INTEGRAL)
        && report.jacobian.as_ref().is_some_and(|j| j.pass);
    output::write_json(&cfg.output.directory, output::VERIFY_FILE, &report)?;
    Ok(report)
}
