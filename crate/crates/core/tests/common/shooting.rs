//! Independent initial-value integration of the field equations in the
//! radial coordinate `r`, used as a cross-check of the collocation solver.
//!
//! Nothing here calls into the solver's model code: the stress components,
//! `e^lambda` and the second-order equations are written out again from the
//! component formulas, and the Fermi momentum follows its own ODE instead of
//! the first integral.

#![allow(dead_code)]

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

#[derive(Debug, Clone, Copy)]
pub struct ShootingParams {
    pub mu_c: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub b: f64,
    pub omega: f64,
}

/// `[nu, nu', phi, phi', sigma, sigma', mu]`.
pub type State = [f64; 7];

fn fermi(mu: f64) -> (f64, f64) {
    let mu = mu.max(0.0);
    let root = (mu + mu * mu).sqrt();
    let ln = (mu.sqrt() + (1.0 + mu).sqrt()).ln();
    let f = 0.125 * ((2.0 * mu - 3.0) * root + 3.0 * ln);
    let g = 0.125 * ((6.0 * mu + 3.0) * root - 3.0 * ln);
    (f, g)
}

struct Sources {
    /// `T0 - T1 - 2 T2` summed over both species, minus `gamma^2 V`.
    nu: f64,
    phi: f64,
    sigma: f64,
    /// `T_1 + gamma^2 V`.
    t1v: f64,
    e_lambda: f64,
}

fn sources(p: &ShootingParams, r: f64, s: &State) -> Sources {
    let [nu, dnu, phi, dphi, sigma, dsigma, mu] = *s;
    let a = (phi * INV_SQRT3).exp();
    let (a2, a4) = (a * a, a.powi(4));
    let alpha = INV_SQRT3;
    let v = (1.0 - 1.0 / a).powi(2);
    let vp = 2.0 * (1.0 - 1.0 / a) * alpha / a;
    let s2 = sigma * sigma;
    let w = -0.5 * (s2 + 0.5 * p.lambda * s2 * s2);
    let wp = -0.5 * (1.0 + p.lambda * s2);
    let g2 = p.gamma * p.gamma;
    let (f, g) = fermi(mu);

    let t_f = [p.b * a4 * g, -p.b * a4 * f, -p.b * a4 * f];
    let kin_t = 0.5 * p.omega * p.omega * a2 * (-nu).exp() * s2;
    let num = 1.0 + r * dnu - r * r * dphi * dphi - 0.5 * a2 * r * r * dsigma * dsigma;
    let den = 1.0 - r * r * (t_f[1] + 0.5 * g2 * v - kin_t - a4 * w);
    let e_lambda = num / den;
    let kin_r = 0.5 * a2 * dsigma * dsigma / e_lambda;
    let t_b = [kin_t + kin_r - a4 * w, -kin_t - kin_r - a4 * w, -kin_t + kin_r - a4 * w];
    let trace_f = t_f[0] + t_f[1] + 2.0 * t_f[2];
    let trace_b = t_b[0] + t_b[1] + 2.0 * t_b[2];
    Sources {
        nu: (t_f[0] - t_f[1] - 2.0 * t_f[2] + t_b[0] - t_b[1] - 2.0 * t_b[2]) - g2 * v,
        phi: 0.5 * alpha * (trace_f + trace_b) + 0.25 * g2 * vp,
        sigma: -2.0 * a2 * wp * sigma - p.omega * p.omega * (-nu).exp() * sigma,
        t1v: t_f[0] + t_f[1] + t_b[0] + t_b[1] + g2 * v,
        e_lambda,
    }
}

fn derivative(p: &ShootingParams, r: f64, s: &State) -> State {
    let [_, dnu, _, dphi, _, dsigma, mu] = *s;
    let src = sources(p, r, s);
    let e = src.e_lambda;
    let half = 0.5 * r * src.t1v;
    let ddnu = -dnu / r + (-dnu / r + src.nu + half * dnu) * e;
    let ddphi = -dphi / r + (-dphi / r + src.phi + half * dphi) * e;
    let ddsigma = -dsigma / r - 2.0 * INV_SQRT3 * dphi * dsigma + (-dsigma / r + src.sigma + half * dsigma) * e;
    // (g + f) / f' = 2 (1 + mu) for the free Fermi gas
    let dmu = if mu > 0.0 { -2.0 * (1.0 + mu) * (0.5 * dnu + INV_SQRT3 * dphi) } else { 0.0 };
    [dnu, ddnu, dphi, ddphi, dsigma, ddsigma, dmu]
}

/// Regular series start: `y = y_c + y''(0) r^2 / 2`, with `3 y''(0)` equal to
/// the central source.
fn series_start(p: &ShootingParams, centre: [f64; 3], r0: f64) -> State {
    let s0: State = [centre[0], 0.0, centre[1], 0.0, centre[2], 0.0, p.mu_c];
    let src = sources(p, 0.0, &s0);
    let c = [src.nu / 3.0, src.phi / 3.0, src.sigma / 3.0];
    let mu = p.mu_c - (1.0 + p.mu_c) * (0.5 * c[0] + INV_SQRT3 * c[1]) * r0 * r0;
    [
        centre[0] + 0.5 * c[0] * r0 * r0,
        c[0] * r0,
        centre[1] + 0.5 * c[1] * r0 * r0,
        c[1] * r0,
        centre[2] + 0.5 * c[2] * r0 * r0,
        c[2] * r0,
        mu,
    ]
}

/// Integrates from the center values `(nu, phi, sigma)` out to `r_end` with
/// classical RK4 and returns the final state.
pub fn shoot(p: &ShootingParams, centre: [f64; 3], r_end: f64, steps: usize) -> State {
    let r0 = 1e-4 * r_end;
    let mut s = series_start(p, centre, r0);
    let h = (r_end - r0) / steps as f64;
    let add = |s: &State, k: &State, c: f64| -> State { std::array::from_fn(|i| s[i] + c * k[i]) };
    for i in 0..steps {
        let r = r0 + i as f64 * h;
        let k1 = derivative(p, r, &s);
        let k2 = derivative(p, r + 0.5 * h, &add(&s, &k1, 0.5 * h));
        let k3 = derivative(p, r + 0.5 * h, &add(&s, &k2, 0.5 * h));
        let k4 = derivative(p, r + h, &add(&s, &k3, h));
        s = std::array::from_fn(|j| s[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j]));
    }
    s
}
