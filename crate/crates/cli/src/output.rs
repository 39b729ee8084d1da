//! Text artifacts: profile tables, sweep summaries, JSON reports and
//! gnuplot scripts. Floats are written with 12 significant digits.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use bfstar_core::canm::FieldState;
use bfstar_core::model::{metric_lambda, PointState, NU};
use serde::Serialize;

use crate::config::RunConfig;
use crate::sweep::SweepRow;
use crate::CliError;

pub const PROFILE_FILE: &str = "profile.tsv";
pub const REPORT_FILE: &str = "report.json";
pub const SWEEP_FILE: &str = "sweep.tsv";
pub const SWEEP_REPORT_FILE: &str = "sweep.json";
pub const VERIFY_FILE: &str = "verify.json";

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.11e}")
}

/// `Omega exp(-nu(0)/2)`, the frequency seen by a distant observer when
/// the lapse is normalized at the center.
pub fn scaled_frequency(state: &FieldState) -> f64 {
    state.pair.omega * (-0.5 * state.center()[NU]).exp()
}

pub fn profile_table(cfg: &RunConfig, state: &FieldState, converged: bool) -> String {
    let mut out = String::new();
    out.push_str("# bfstar profile\n");
    for line in cfg.problem_toml().lines() {
        let _ = writeln!(out, "# {line}");
    }
    let _ = writeln!(out, "# converged = {converged}");
    let _ = writeln!(out, "# r_s = {}", fmt_f64(state.pair.r_s));
    let _ = writeln!(out, "# omega = {}", fmt_f64(state.pair.omega));
    let _ = writeln!(out, "# omega_scaled = {}", fmt_f64(scaled_frequency(state)));
    out.push_str("x\tnu\tphi\tsigma\tmu\texp_lambda\n");
    let grid = state.grid();
    for (i, &x) in grid.nodes().iter().enumerate() {
        let y = state.y.value_at_node(i);
        let point = PointState {
            x,
            y,
            dy: state.y.moment_at_node(i),
            mu: state.mu[i],
        };
        let e = metric_lambda(&state.model, &point, state.pair).unwrap_or(f64::NAN);
        let row = [x, y[0], y[1], y[2], state.mu[i], e].map(fmt_f64);
        out.push_str(&row.join("\t"));
        out.push('\n');
    }
    out
}

pub fn sweep_table(cfg: &RunConfig, rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str("# bfstar sweep\n");
    for line in cfg.to_toml().lines() {
        let _ = writeln!(out, "# {line}");
    }
    let name = cfg.sweep.map_or("value", |s| s.parameter.name());
    let _ = writeln!(
        out,
        "{name}\tconverged\tr_s\tomega\tnu_0\tnu_1\tphi_0\tomega_scaled\titerations"
    );
    for r in rows {
        let nums = [r.r_s, r.omega, r.nu_center, r.nu_surface, r.phi_center, r.scaled_frequency].map(fmt_f64);
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}",
            fmt_f64(r.value),
            r.converged,
            nums.join("\t"),
            r.iterations
        );
    }
    out
}

pub fn profile_plot_script(profile: &str) -> String {
    format!(
        "set terminal pngcairo size 900,600\n\
         set output 'profile.png'\n\
         set xlabel 'x = r / R_s'\n\
         set xrange [0:5]\n\
         set key right center\n\
         set grid\n\
         plot '{profile}' using 1:2 with lines title 'nu', \\\n\
         \x20    '' using 1:3 with lines title 'phi', \\\n\
         \x20    '' using 1:4 with lines title 'sigma', \\\n\
         \x20    '' using 1:5 with lines title 'mu'\n"
    )
}

pub fn sweep_plot_script(sweep: &str, parameter: &str) -> String {
    format!(
        "set terminal pngcairo size 900,900\n\
         set output 'sweep.png'\n\
         set multiplot layout 2,1\n\
         set grid\n\
         set xlabel '{parameter}'\n\
         set ylabel 'R_s'\n\
         plot '{sweep}' using 1:(strcol(2) eq \"true\" ? $3 : NaN) with linespoints notitle\n\
         set ylabel 'Omega exp(-nu(0)/2)'\n\
         plot '{sweep}' using 1:(strcol(2) eq \"true\" ? $8 : NaN) with linespoints notitle\n\
         unset multiplot\n"
    )
}

pub fn write_text(dir: &Path, name: &str, text: &str) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let path = dir.join(name);
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_text(dir, name, &text)
}
