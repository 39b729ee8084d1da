//! Damped Newton iteration in the continuous-analogue form.
//!
//! Each iteration linearizes `-x y'' - y' + F = 0` around the current fields
//! with the Fermi momentum frozen. The correction is split as
//! `z = u + rho v + omega w`, where `u`, `v`, `w` solve three linear BVPs with
//! one shared operator; `rho` and `omega` (the rates for `R_s` and `Omega`)
//! come from linearizing the two extra conditions `sigma(0) = sigma_c` and
//! `mu(1) = 0`, the latter through the first integral
//!
//! ```text
//! ln[(1 + mu(x)) A^2(phi(x))] + nu(x) = const
//! ```
//!
//! The step length is chosen from the residuals of the full and the empty
//! step, `tau = delta(0) / (delta(0) + delta(1))`.

use std::sync::Arc;

use crate::collocation::{assemble, collocation_points, factor_and_solve, PointCoefficients, SplineFunction};
use crate::mesh::Grid;
use crate::model::{frechet_derivatives, rhs_f, PointState, SpectralPair, StarModel, NU, PHI, SIGMA};
use crate::{ModelError, SolveError, Vec3};

/// Current iterate: fields, Fermi momentum at the nodes, and the spectral pair.
#[derive(Debug, Clone)]
pub struct FieldState {
    pub y: SplineFunction,
    /// Fermi momentum per node; zero beyond the surface node.
    pub mu: Vec<f64>,
    pub pair: SpectralPair,
    pub model: StarModel,
}

impl FieldState {
    /// Builds a state and fills `mu` from the first integral.
    pub fn new(y: SplineFunction, pair: SpectralPair, model: StarModel) -> Self {
        let mu = mu_update(&y, &model);
        Self { y, mu, pair, model }
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.y.grid()
    }

    pub fn center(&self) -> Vec3 {
        self.y.value_at_node(0)
    }

    pub fn surface(&self) -> Vec3 {
        self.y.value_at_node(self.grid().n_star())
    }

    /// Fermi momentum at an arbitrary point from the first integral, clipped
    /// at zero; zero outside the star.
    pub fn mu_at(&self, x: f64, y: &Vec3) -> f64 {
        if x >= 1.0 {
            return 0.0;
        }
        let c = self.center();
        first_integral_mu(&self.model, c[NU], c[PHI], y[NU], y[PHI]).max(0.0)
    }

    /// Same physics with different parameters; used for continuation.
    pub fn with_model(&self, model: StarModel) -> Self {
        Self::new(self.y.clone(), self.pair, model)
    }

    /// Interpolates the fields onto another grid. Beyond the old domain `nu`
    /// continues with its `1/x` far-field slope and the other fields vanish.
    /// The equations only see `Omega^2 e^{-nu}` and derivatives of `nu`, so
    /// `nu` is shifted to vanish at the new outer node and `Omega` rescaled
    /// to match.
    pub fn resample(&self, grid: Arc<Grid>) -> Self {
        let old = self.grid();
        let end = old.x_inf();
        let nu_end = self.y.value_at_node(old.intervals())[NU];
        let c = self.y.moment_at_node(old.intervals())[NU] * end * end;
        let nu_ext = |x: f64| nu_end + c * (1.0 / end - 1.0 / x);
        let new_end = grid.x_inf();
        let shift = if new_end > end {
            -nu_ext(new_end)
        } else {
            -self.y.eval(new_end).expect("inside old domain").value[NU]
        };
        let y = SplineFunction::interpolate(grid, |x| {
            if x <= end {
                let p = self.y.eval(x).expect("inside old domain");
                ([p.value[NU] + shift, p.value[PHI], p.value[SIGMA]], p.d1)
            } else {
                ([nu_ext(x) + shift, 0.0, 0.0], [c / (x * x), 0.0, 0.0])
            }
        });
        let pair = SpectralPair {
            r_s: self.pair.r_s,
            omega: self.pair.omega * (0.5 * shift).exp(),
        };
        Self::new(y, pair, self.model.clone())
    }

    fn point(&self, interval: usize, theta: f64, x: f64) -> (PointState, f64) {
        let p = self.y.eval_local(interval, theta);
        let mu = self.mu_at(x, &p.value);
        (
            PointState {
                x,
                y: p.value,
                dy: p.d1,
                mu,
            },
            x * p.d2[0],
        )
    }

    fn advanced(&self, dir: &NewtonDirection, tau: f64) -> Self {
        let y = self.y.combine(&[
            (tau, &dir.u),
            (tau * dir.rho, &dir.v),
            (tau * dir.omega, &dir.w),
            (tau * dir.zeta[0], &dir.p),
            (tau * dir.zeta[1], &dir.q),
        ]);
        let pair = SpectralPair {
            r_s: self.pair.r_s + tau * dir.rho,
            omega: self.pair.omega + tau * dir.omega,
        };
        Self::new(y, pair, self.model.clone())
    }
}

fn first_integral_mu(model: &StarModel, nu0: f64, phi0: f64, nu: f64, phi: f64) -> f64 {
    let c = &*model.coupling;
    let ratio = c.a(phi0) / c.a(phi);
    (1.0 + model.params.mu_c) * ratio * ratio * (nu0 - nu).exp() - 1.0
}

/// Fermi momentum at every node from the first integral anchored at the
/// center: exact `mu_c` at node 0, zero from the surface node outwards.
pub fn mu_update(y: &SplineFunction, model: &StarModel) -> Vec<f64> {
    let grid = y.grid();
    let [nu0, phi0, _] = y.value_at_node(0);
    let ns = grid.n_star();
    y.values()
        .iter()
        .enumerate()
        .map(|(i, v)| match i {
            0 => model.params.mu_c,
            i if i >= ns => 0.0,
            _ => first_integral_mu(model, nu0, phi0, v[NU], v[PHI]),
        })
        .collect()
}

/// Residual of the surface condition `mu(1) = 0` written through the first
/// integral between the center and the surface.
pub fn surface_condition(state: &FieldState) -> f64 {
    let c = &*state.model.coupling;
    let (y0, y1) = (state.center(), state.surface());
    (1.0 + state.model.params.mu_c).ln() - (y1[NU] - y0[NU]) - 2.0 * (c.a(y1[PHI]) / c.a(y0[PHI])).ln()
}

/// Residual of `sigma(0) = sigma_c`.
pub fn center_condition(state: &FieldState) -> f64 {
    state.model.params.sigma_c - state.center()[SIGMA]
}

/// Residual `x y'' + y' - F` at every Gauss point, in grid order, paired with
/// the quadrature weight `h/2` of the point.
pub fn collocation_residual(state: &FieldState) -> Result<Vec<(f64, Vec3)>, ModelError> {
    collocation_points(state.grid())
        .map(|pt| {
            let p = state.y.eval_local(pt.interval, pt.theta);
            let (ps, _) = state.point(pt.interval, pt.theta, pt.x);
            let f = rhs_f(&state.model, &ps, state.pair)?;
            Ok((0.5 * pt.h, std::array::from_fn(|k| pt.x * p.d2[k] + p.d1[k] - f[k])))
        })
        .collect()
}

fn weighted_square(weight: f64, r: &Vec3) -> f64 {
    weight * r.iter().map(|v| v * v).sum::<f64>()
}

/// Residual measures of a state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residual {
    /// Two-point Gauss approximation of the `L2` norm of the residual
    /// function over `[0, X_inf]`.
    pub delta_f: f64,
    pub center: f64,
    pub surface: f64,
}

impl Residual {
    /// `max(delta_f, |center|, |surface|)`.
    pub fn delta(&self) -> f64 {
        self.delta_f.max(self.center.abs()).max(self.surface.abs())
    }
}

pub fn residual(state: &FieldState) -> Result<Residual, ModelError> {
    let r = collocation_residual(state)?;
    let delta_f = r.iter().map(|(w, v)| weighted_square(*w, v)).sum::<f64>().sqrt();
    Ok(Residual {
        delta_f,
        center: center_condition(state),
        surface: surface_condition(state),
    })
}

/// How the linearization treats the Fermi momentum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MuTreatment {
    /// `mu` is a fixed coefficient of the linear problems and is refreshed
    /// only after each update; convergence is then linear.
    Frozen,
    /// `mu` is differentiated through the first integral, including its
    /// dependence on the central values `nu(0)` and `phi(0)`.
    Linearized,
    /// Frozen while `delta >= switch_below`, linearized afterwards. The
    /// frozen iteration is the more robust one far from a solution.
    Hybrid { switch_below: f64 },
}

impl Default for MuTreatment {
    fn default() -> Self {
        MuTreatment::Hybrid { switch_below: 1e-2 }
    }
}

impl MuTreatment {
    fn linearize(self, delta: f64) -> bool {
        match self {
            MuTreatment::Frozen => false,
            MuTreatment::Linearized => true,
            MuTreatment::Hybrid { switch_below } => delta < switch_below,
        }
    }
}

/// Newton correction for one iteration:
/// `z = u + rho v + omega w + zeta_nu p + zeta_phi q`.
#[derive(Debug, Clone)]
pub struct NewtonDirection {
    pub u: SplineFunction,
    pub v: SplineFunction,
    pub w: SplineFunction,
    /// Responses to unit changes of `nu(0)` and `phi(0)` through `mu`.
    pub p: SplineFunction,
    pub q: SplineFunction,
    pub rho: f64,
    pub omega: f64,
    /// `z_nu(0)` and `z_phi(0)`.
    pub zeta: [f64; 2],
    /// Residual norm of the `u` right-hand side at the current state.
    pub delta_f: f64,
}

/// Solves the linear problems at `state`; `linearize_mu` selects whether the
/// Fermi momentum is differentiated or frozen.
pub fn linearized_step(state: &FieldState, linearize_mu: bool) -> Result<NewtonDirection, SolveError> {
    let grid = Arc::clone(state.grid());
    let c = &*state.model.coupling;
    let (y0, y1) = (state.center(), state.surface());
    let (al0, al1) = (c.alpha(y0[PHI]), c.alpha(y1[PHI]));
    let mut sq = 0.0;
    let sys = assemble(
        &grid,
        |pt| -> Result<PointCoefficients<5>, ModelError> {
            let (ps, _) = state.point(pt.interval, pt.theta, pt.x);
            let p = state.y.eval_local(pt.interval, pt.theta);
            let (f, mut jac) = frechet_derivatives(&state.model, &ps, state.pair)?;
            let ru: Vec3 = std::array::from_fn(|k| pt.x * p.d2[k] + p.d1[k] - f[k]);
            sq += weighted_square(0.5 * pt.h, &ru);
            let (mut rp, mut rq) = ([0.0; 3], [0.0; 3]);
            if linearize_mu && ps.mu > 0.0 {
                // d mu = (1 + mu) (d nu0 - d nu + 2 alpha0 d phi0 - 2 alpha d phi)
                let opm = 1.0 + ps.mu;
                let al = c.alpha(ps.y[PHI]);
                for k in 0..3 {
                    jac.dy[k][NU] -= jac.dmu[k] * opm;
                    jac.dy[k][PHI] -= jac.dmu[k] * 2.0 * al * opm;
                    rp[k] = -jac.dmu[k] * opm;
                    rq[k] = -jac.dmu[k] * 2.0 * al0 * opm;
                }
            }
            Ok(PointCoefficients {
                jac_y: jac.dy,
                jac_dy: jac.ddy,
                rhs: [ru, jac.dr.map(|v| -v), jac.domega.map(|v| -v), rp, rq],
            })
        },
        [state.y.moment_at_node(0).map(|v| -v), [0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3]],
        [state.y.value_at_node(grid.intervals()).map(|v| -v), [0.0; 3], [0.0; 3], [0.0; 3], [0.0; 3]],
    )?;
    let [u, v, w, p, q] = factor_and_solve(sys)?;

    let ns = grid.n_star();
    let surface_rate = |s: &SplineFunction| {
        let (s0, s1) = (s.value_at_node(0), s.value_at_node(ns));
        s1[NU] - s0[NU] + 2.0 * al1 * s1[PHI] - 2.0 * al0 * s0[PHI]
    };
    let at0 = |s: &SplineFunction, k: usize| s.value_at_node(0)[k];
    // Unknowns (rho, omega, zeta_nu, zeta_phi).
    let mut m = [
        [surface_rate(&v), surface_rate(&w), surface_rate(&p), surface_rate(&q)],
        [at0(&v, SIGMA), at0(&w, SIGMA), at0(&p, SIGMA), at0(&q, SIGMA)],
        [at0(&v, NU), at0(&w, NU), at0(&p, NU) - 1.0, at0(&q, NU)],
        [at0(&v, PHI), at0(&w, PHI), at0(&p, PHI), at0(&q, PHI) - 1.0],
    ];
    let mut rhs = [
        surface_condition(state) - surface_rate(&u),
        center_condition(state) - at0(&u, SIGMA),
        -at0(&u, NU),
        -at0(&u, PHI),
    ];
    let sol = solve_dense4(&mut m, &mut rhs)?;
    Ok(NewtonDirection {
        u,
        v,
        w,
        p,
        q,
        rho: sol[0],
        omega: sol[1],
        zeta: [sol[2], sol[3]],
        delta_f: sq.sqrt(),
    })
}

/// Gaussian elimination with partial pivoting. Fails when the determinant is
/// negligible against the product of the row norms.
fn solve_dense4(m: &mut [[f64; 4]; 4], b: &mut [f64; 4]) -> Result<[f64; 4], SolveError> {
    let scale: f64 = m.iter().map(|r| r.iter().map(|v| v * v).sum::<f64>().sqrt()).product();
    let mut det = 1.0;
    for j in 0..4 {
        let p = (j..4).max_by(|&a, &b| m[a][j].abs().total_cmp(&m[b][j].abs())).unwrap();
        if p != j {
            m.swap(p, j);
            b.swap(p, j);
            det = -det;
        }
        det *= m[j][j];
        if m[j][j] == 0.0 {
            break;
        }
        for i in j + 1..4 {
            let l = m[i][j] / m[j][j];
            for c in j..4 {
                m[i][c] -= l * m[j][c];
            }
            b[i] -= l * b[j];
        }
    }
    if !(det.abs() > 1e-13 * scale) || !det.is_finite() {
        return Err(SolveError::DegenerateEigenSystem { det });
    }
    let mut x = [0.0; 4];
    for j in (0..4).rev() {
        let s: f64 = (j + 1..4).map(|c| m[j][c] * x[c]).sum();
        x[j] = (b[j] - s) / m[j][j];
    }
    Ok(x)
}

/// `delta(0) / (delta(0) + delta(1))`, clipped into `[tau_min, 1]`.
pub fn kalitkin_tau(delta0: f64, delta1: f64, tau_min: f64) -> f64 {
    let tau = if delta0 + delta1 > 0.0 {
        delta0 / (delta0 + delta1)
    } else {
        1.0
    };
    tau.clamp(tau_min, 1.0)
}

/// Chosen step and the state it produces.
#[derive(Debug, Clone)]
pub struct StepChoice {
    pub tau: f64,
    pub state: FieldState,
    pub residual: Residual,
}

/// Picks the step length for `dir`. The full step is probed first and halved
/// while the trial state is not evaluable; the Kalitkin-Ermakov estimate is
/// then scaled to the probed length. If the resulting residual exceeds
/// `delta0` the step is halved a few more times.
pub fn optimal_tau(
    state: &FieldState,
    dir: &NewtonDirection,
    delta0: f64,
    tau_min: f64,
) -> Result<StepChoice, SolveError> {
    let mut probe = 1.0;
    let (probe_state, probe_res) = loop {
        let trial = state.advanced(dir, probe);
        match trial_residual(&trial) {
            Ok(r) => break (trial, r),
            Err(e) => {
                probe *= 0.5;
                if probe < tau_min {
                    return Err(e.into());
                }
            }
        }
    };
    let mut tau = (probe * kalitkin_tau(delta0, probe_res.delta(), tau_min)).max(tau_min);
    let mut best = if tau == probe {
        StepChoice {
            tau,
            state: probe_state,
            residual: probe_res,
        }
    } else {
        evaluate_step(state, dir, tau)?
    };
    for _ in 0..8 {
        if best.residual.delta() <= delta0 || tau * 0.5 < tau_min {
            break;
        }
        tau *= 0.5;
        let next = evaluate_step(state, dir, tau)?;
        if next.residual.delta() < best.residual.delta() {
            best = next;
        }
    }
    Ok(best)
}

fn trial_residual(state: &FieldState) -> Result<Residual, ModelError> {
    if !(state.pair.r_s > 0.0) {
        return Err(ModelError::InvalidParameter {
            name: "r_s",
            value: state.pair.r_s,
            reason: "star radius must stay positive",
        });
    }
    residual(state)
}

fn evaluate_step(state: &FieldState, dir: &NewtonDirection, mut tau: f64) -> Result<StepChoice, SolveError> {
    loop {
        let trial = state.advanced(dir, tau);
        match trial_residual(&trial) {
            Ok(residual) => {
                return Ok(StepChoice {
                    tau,
                    state: trial,
                    residual,
                })
            }
            Err(e) if tau < 1e-6 => return Err(e.into()),
            Err(_) => tau *= 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveOptions {
    pub eps: f64,
    pub max_iter: usize,
    pub tau_min: f64,
    pub mu: MuTreatment,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps: 1e-10,
            max_iter: 100,
            tau_min: 1e-3,
            mu: MuTreatment::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Termination {
    Converged,
    MaxIterations,
    /// The linearized problem could not be solved.
    LinearSolve(String),
    /// No evaluable step was found.
    Diverged(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub iterations: usize,
    /// `delta` of the initial state followed by `delta(tau_opt)` per iteration.
    pub residual_history: Vec<f64>,
    pub tau_history: Vec<f64>,
    /// `(R_s, Omega)` of the initial state and after each iteration.
    pub eigen_history: Vec<(f64, f64)>,
    pub converged: bool,
    pub termination: Termination,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.residual_history.last().unwrap()
    }
}

/// Runs the iteration from `initial`. Failure to converge is reported through
/// [`SolveReport::termination`]; an error is returned only when the initial
/// state cannot be evaluated.
pub fn solve(initial: FieldState, opts: &SolveOptions) -> Result<(FieldState, SolveReport), SolveError> {
    initial.model.params.validate()?;
    let mut state = FieldState::new(initial.y, initial.pair, initial.model);
    let mut delta = residual(&state)?.delta();
    let mut report = SolveReport {
        iterations: 0,
        residual_history: vec![delta],
        tau_history: Vec::new(),
        eigen_history: vec![(state.pair.r_s, state.pair.omega)],
        converged: false,
        termination: Termination::MaxIterations,
    };
    if delta < opts.eps {
        report.converged = true;
        report.termination = Termination::Converged;
        return Ok((state, report));
    }

    for _ in 0..opts.max_iter {
        let dir = match linearized_step(&state, opts.mu.linearize(delta)) {
            Ok(d) => d,
            Err(e) => {
                report.termination = Termination::LinearSolve(e.to_string());
                return Ok((state, report));
            }
        };
        let step = match optimal_tau(&state, &dir, delta, opts.tau_min) {
            Ok(s) => s,
            Err(e) => {
                report.termination = Termination::Diverged(e.to_string());
                return Ok((state, report));
            }
        };
        state = step.state;
        delta = step.residual.delta();
        report.iterations += 1;
        report.residual_history.push(delta);
        report.tau_history.push(step.tau);
        report.eigen_history.push((state.pair.r_s, state.pair.omega));
        if !delta.is_finite() {
            report.termination = Termination::Diverged("non-finite residual".into());
            return Ok((state, report));
        }
        if delta < opts.eps {
            report.converged = true;
            report.termination = Termination::Converged;
            return Ok((state, report));
        }
    }
    Ok((state, report))
}

/// Shape of the analytic starting guess `y(x) = y_c exp(-(x/width)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InitialGuess {
    pub nu_c: f64,
    pub phi_c: f64,
    pub width: f64,
    pub r_s: f64,
    pub omega: f64,
}

impl Default for InitialGuess {
    fn default() -> Self {
        Self {
            nu_c: -1.0,
            phi_c: -0.05,
            width: 1.0,
            r_s: 1.0,
            omega: 0.9,
        }
    }
}

/// Gaussian profiles with `sigma(0) = sigma_c`, zero slope at the center.
pub fn default_initial_guess(model: &StarModel, grid: Arc<Grid>, guess: &InitialGuess) -> FieldState {
    let centre = [guess.nu_c, guess.phi_c, model.params.sigma_c];
    let w = guess.width;
    let y = SplineFunction::interpolate(grid, |x| {
        let s = x / w;
        let g = (-s * s).exp();
        let dg = -2.0 * s / w * g;
        (centre.map(|c| c * g), centre.map(|c| c * dg))
    });
    FieldState::new(
        y,
        SpectralPair {
            r_s: guess.r_s,
            omega: guess.omega,
        },
        model.clone(),
    )
}
