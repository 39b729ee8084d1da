//! Physics closures for the static boson-fermion star.
//!
//! Everything here is written in the scaled radial coordinate `x = r / R_s`.
//! Field vectors are ordered `(nu, phi, sigma)`: metric function, dilaton,
//! boson amplitude. Radial derivatives are always x-derivatives; the
//! conversion `d/dr = (1/R_s) d/dx` happens inside the closures.
//!
//! The reduced second-order system is written as
//!
//! ```text
//! -x y'' - y' + F(x, y, y', mu, R_s, Omega) = 0
//! ```
//!
//! where `F` is the right-hand side of the radial field equations multiplied
//! by `R_s^2 x`. After eliminating `e^lambda` it splits as `F = e^lambda G + H`
//! with `H` collecting the two terms in which `e^lambda` cancels.

use std::sync::Arc;

use crate::{ModelError, Vec3};

pub type Mat3 = [[f64; 3]; 3];

pub const NU: usize = 0;
pub const PHI: usize = 1;
pub const SIGMA: usize = 2;

/// The five governing dimensionless parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Central boson amplitude `sigma(0)`.
    pub sigma_c: f64,
    /// Central Fermi momentum `mu(0)`.
    pub mu_c: f64,
    /// Boson self-coupling.
    pub lambda: f64,
    /// Dilaton to boson mass ratio.
    pub gamma: f64,
    /// Fermionic scale `kappa eps_0 / m_B^2`.
    pub b: f64,
}

impl PhysicalParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fields = [
            ("sigma_c", self.sigma_c),
            ("mu_c", self.mu_c),
            ("lambda", self.lambda),
            ("gamma", self.gamma),
            ("b", self.b),
        ];
        for (name, value) in fields {
            if !value.is_finite() {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be finite",
                });
            }
        }
        if self.mu_c <= 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "mu_c",
                value: self.mu_c,
                reason: "must be positive so that a fermionic surface exists",
            });
        }
        if self.b <= 0.0 {
            return Err(ModelError::InvalidParameter {
                name: "b",
                value: self.b,
                reason: "must be positive",
            });
        }
        for (name, value) in [("sigma_c", self.sigma_c), ("lambda", self.lambda), ("gamma", self.gamma)] {
            if value < 0.0 {
                return Err(ModelError::InvalidParameter {
                    name,
                    value,
                    reason: "must be non-negative",
                });
            }
        }
        Ok(())
    }
}

/// Unknown star radius and boson frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralPair {
    pub r_s: f64,
    pub omega: f64,
}

/// Theory-dependent model functions: matter coupling `A(phi)` and dilaton
/// potential `V(phi)`.
pub trait CouplingModel: Send + Sync + std::fmt::Debug {
    fn a(&self, phi: f64) -> f64;
    /// `d ln A / d phi`.
    fn alpha(&self, phi: f64) -> f64;
    /// `d alpha / d phi`.
    fn alpha_prime(&self, phi: f64) -> f64;
    fn v(&self, phi: f64) -> f64;
    fn v_prime(&self, phi: f64) -> f64;
    fn v_second(&self, phi: f64) -> f64;
}

/// `A = exp(phi / sqrt 3)`, `V = (1 - 1/A)^2`.
#[derive(Debug, Clone, Copy, Default)]
pub struct MinimalDilaton;

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

impl CouplingModel for MinimalDilaton {
    fn a(&self, phi: f64) -> f64 {
        (phi * INV_SQRT3).exp()
    }

    fn alpha(&self, _phi: f64) -> f64 {
        INV_SQRT3
    }

    fn alpha_prime(&self, _phi: f64) -> f64 {
        0.0
    }

    fn v(&self, phi: f64) -> f64 {
        let s = -(-phi * INV_SQRT3).exp_m1();
        s * s
    }

    fn v_prime(&self, phi: f64) -> f64 {
        let e = (-phi * INV_SQRT3).exp();
        2.0 * INV_SQRT3 * (1.0 - e) * e
    }

    fn v_second(&self, phi: f64) -> f64 {
        let e = (-phi * INV_SQRT3).exp();
        (2.0 / 3.0) * e * (2.0 * e - 1.0)
    }
}

/// Physical parameters together with the coupling model they are used with.
#[derive(Debug, Clone)]
pub struct StarModel {
    pub params: PhysicalParams,
    pub coupling: Arc<dyn CouplingModel>,
}

impl StarModel {
    pub fn new(params: PhysicalParams) -> Self {
        Self {
            params,
            coupling: Arc::new(MinimalDilaton),
        }
    }

    pub fn with_coupling(params: PhysicalParams, coupling: Arc<dyn CouplingModel>) -> Self {
        Self { params, coupling }
    }
}

/// `A(phi)` for the default model.
pub fn coupling_a(phi: f64) -> f64 {
    MinimalDilaton.a(phi)
}

/// `d ln A / d phi` for the default model.
pub fn coupling_alpha(phi: f64) -> f64 {
    MinimalDilaton.alpha(phi)
}

/// `(V, V')` for the default model.
pub fn dilaton_potential(phi: f64) -> (f64, f64) {
    (MinimalDilaton.v(phi), MinimalDilaton.v_prime(phi))
}

/// `(W, dW/d(sigma^2))` for the quartic boson potential.
pub fn boson_potential(sigma_sq: f64, lambda: f64) -> (f64, f64) {
    let w = -0.5 * (sigma_sq + 0.5 * lambda * sigma_sq * sigma_sq);
    let dw = -0.5 * (1.0 + lambda * sigma_sq);
    (w, dw)
}

/// Zero-temperature Fermi gas state functions at Fermi momentum `mu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FermiState {
    /// Pressure function.
    pub f: f64,
    /// Energy density function.
    pub g: f64,
    /// `df/dmu`.
    pub df: f64,
    /// `dg/dmu`.
    pub dg: f64,
    /// `f + g`.
    pub f_plus_g: f64,
}

pub fn fermi_state(mu: f64) -> Result<FermiState, ModelError> {
    if !(mu >= 0.0) || !mu.is_finite() {
        return Err(ModelError::NegativeFermiMomentum(mu));
    }
    let root = (mu * (1.0 + mu)).sqrt();
    let f_plus_g = mu * root;
    let df = if mu == 0.0 { 0.0 } else { 0.5 * mu * mu / root };
    let df_plus_g = root * (1.5 + 2.0 * mu) / (1.0 + mu);
    // The closed form cancels catastrophically near zero, where f ~ mu^(5/2).
    let f = if mu < 1e-3 {
        mu * mu * mu.sqrt() * (1.0 / 5.0 - mu / 14.0 + mu * mu / 24.0 - 5.0 * mu * mu * mu / 176.0)
    } else {
        let asinh = (mu.sqrt() + (1.0 + mu).sqrt()).ln();
        0.125 * ((2.0 * mu - 3.0) * root + 3.0 * asinh)
    };
    Ok(FermiState {
        f,
        g: f_plus_g - f,
        df,
        dg: df_plus_g - df,
        f_plus_g,
    })
}

/// Diagonal energy-momentum components `(T_0, T_1, T_2)` of both matter
/// species, their traces, and the combination `T_1 = T0^F + T1^F + T0^B + T1^B`
/// that enters the reduced equations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StressBundle {
    pub fermion: [f64; 3],
    pub boson: [f64; 3],
    pub fermion_trace: f64,
    pub boson_trace: f64,
    pub t1: f64,
}

/// A point of the scaled domain together with the local field data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointState {
    pub x: f64,
    pub y: Vec3,
    pub dy: Vec3,
    /// Fermi momentum; zero outside the star.
    pub mu: f64,
}

impl PointState {
    pub fn vacuum(x: f64) -> Self {
        Self {
            x,
            y: [0.0; 3],
            dy: [0.0; 3],
            mu: 0.0,
        }
    }
}

pub fn stress_components(
    model: &StarModel,
    y: &Vec3,
    dy: &Vec3,
    mu: f64,
    exp_lambda: f64,
    pair: SpectralPair,
) -> Result<StressBundle, ModelError> {
    let p = &model.params;
    let c = &*model.coupling;
    let fermi = fermi_state(mu)?;
    let a2 = c.a(y[PHI]).powi(2);
    let a4 = a2 * a2;
    let (w, _) = boson_potential(y[SIGMA] * y[SIGMA], p.lambda);
    let kinetic_t = 0.5 * pair.omega * pair.omega * a2 * (-y[NU]).exp() * y[SIGMA] * y[SIGMA];
    let ds_r = dy[SIGMA] / pair.r_s;
    let kinetic_r = 0.5 * a2 * ds_r * ds_r / exp_lambda;
    let potential = a4 * w;

    let fermion = [p.b * a4 * fermi.g, -p.b * a4 * fermi.f, -p.b * a4 * fermi.f];
    let boson = [
        kinetic_t + kinetic_r - potential,
        -kinetic_t - kinetic_r - potential,
        -kinetic_t + kinetic_r - potential,
    ];
    let boson_trace = -2.0 * kinetic_t + 2.0 * kinetic_r - 4.0 * potential;
    let fermion_trace = p.b * a4 * (fermi.g - 3.0 * fermi.f);
    Ok(StressBundle {
        fermion,
        boson,
        fermion_trace,
        boson_trace,
        t1: fermion[0] + fermion[1] + boson[0] + boson[1],
    })
}

/// Closed-form `e^lambda` from the `G_1^1` Einstein equation.
pub fn metric_lambda(model: &StarModel, point: &PointState, pair: SpectralPair) -> Result<f64, ModelError> {
    let locals = Locals::new(model, point, pair)?;
    Ok(locals.e)
}

/// The scaled right-hand side `F`.
pub fn rhs_f(model: &StarModel, point: &PointState, pair: SpectralPair) -> Result<Vec3, ModelError> {
    Ok(Locals::new(model, point, pair)?.rhs())
}

/// Frechet derivatives of `F`. The field columns hold `mu` fixed; its own
/// influence is reported separately in `dmu`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jacobian {
    /// `dF_k / dy_n`.
    pub dy: Mat3,
    /// `dF_k / dy'_n`.
    pub ddy: Mat3,
    /// Total `dF/dR_s`. Since `F` carries the factor `R_s^2`, this equals
    /// `(2/R_s) F + R_s^2 x d(rhs)/dR_s`.
    pub dr: Vec3,
    pub domega: Vec3,
    pub dmu: Vec3,
}

pub fn frechet_derivatives(
    model: &StarModel,
    point: &PointState,
    pair: SpectralPair,
) -> Result<(Vec3, Jacobian), ModelError> {
    let locals = Locals::new(model, point, pair)?;
    Ok((locals.rhs(), locals.jacobian()))
}

/// Partial derivatives of the building blocks with respect to one variable.
#[derive(Default)]
struct Partial {
    n: f64,
    d: f64,
    g: Vec3,
    h: Vec3,
}

/// Pointwise intermediates shared by `F` and its Jacobian.
struct Locals {
    x: f64,
    y: Vec3,
    dy: Vec3,
    r: f64,
    omega: f64,
    lambda: f64,
    gamma2: f64,
    b: f64,
    fermi: FermiState,
    a2: f64,
    a4: f64,
    alpha: f64,
    alpha_prime: f64,
    vp: f64,
    vpp: f64,
    w: f64,
    wp: f64,
    en: f64,
    /// `A^2 e^{-nu} sigma^2`.
    bos: f64,
    n: f64,
    p: f64,
    d: f64,
    e: f64,
    q: f64,
    s_nu: f64,
    tr0: f64,
    s_phi: f64,
    k_sigma: f64,
    g: Vec3,
    h: Vec3,
}

impl Locals {
    fn new(model: &StarModel, point: &PointState, pair: SpectralPair) -> Result<Self, ModelError> {
        let prm = &model.params;
        let c = &*model.coupling;
        let PointState { x, y, dy, mu } = *point;
        let [nu, phi, sigma] = y;
        let [dnu, dphi, dsigma] = dy;
        let fermi = fermi_state(mu)?;
        let a = c.a(phi);
        let a2 = a * a;
        let a4 = a2 * a2;
        let alpha = c.alpha(phi);
        let v = c.v(phi);
        let vp = c.v_prime(phi);
        let s2 = sigma * sigma;
        let (w, wp) = boson_potential(s2, prm.lambda);
        let en = (-nu).exp();
        let bos = a2 * en * s2;
        let om2 = pair.omega * pair.omega;
        let gamma2 = prm.gamma * prm.gamma;
        let b = prm.b;
        let r2 = pair.r_s * pair.r_s;
        let x2 = x * x;

        let n = 1.0 + x * dnu - x2 * dphi * dphi - 0.5 * a2 * x2 * dsigma * dsigma;
        let p = -b * a4 * fermi.f + 0.5 * gamma2 * v - 0.5 * om2 * bos - a4 * w;
        let d = 1.0 - r2 * x2 * p;
        if !(d > 0.0) || !(n > 0.0) {
            return Err(ModelError::MetricBreakdown {
                x,
                numerator: n,
                denominator: d,
            });
        }
        let e = n / d;
        let q = b * a4 * (fermi.g - fermi.f) - 2.0 * a4 * w + gamma2 * v;
        let s_nu = b * a4 * (fermi.g + 3.0 * fermi.f) + 2.0 * om2 * bos + 2.0 * a4 * w - gamma2 * v;
        let tr0 = b * a4 * (fermi.g - 3.0 * fermi.f) - om2 * bos - 4.0 * a4 * w;
        let s_phi = 0.5 * alpha * tr0 + 0.25 * gamma2 * vp;
        let k_sigma = -2.0 * a2 * wp - om2 * en;
        let half = 0.5 * r2 * x2 * q;
        let g = [
            -dnu + r2 * x * s_nu + half * dnu,
            -dphi + r2 * x * s_phi + half * dphi,
            -dsigma + r2 * x * sigma * k_sigma + half * dsigma,
        ];
        let h = [0.0, 0.5 * alpha * x * a2 * dsigma * dsigma, -2.0 * alpha * x * dphi * dsigma];

        Ok(Self {
            x,
            y,
            dy,
            r: pair.r_s,
            omega: pair.omega,
            lambda: prm.lambda,
            gamma2,
            b,
            fermi,
            a2,
            a4,
            alpha,
            alpha_prime: c.alpha_prime(phi),
            vp,
            vpp: c.v_second(phi),
            w,
            wp,
            en,
            bos,
            n,
            p,
            d,
            e,
            q,
            s_nu,
            tr0,
            s_phi,
            k_sigma,
            g,
            h,
        })
    }

    fn rhs(&self) -> Vec3 {
        std::array::from_fn(|k| self.e * self.g[k] + self.h[k])
    }

    /// Contribution of matter-quantity partials to `dG`, for a variable that
    /// does not enter through the derivatives `y'`.
    fn matter_g(&self, q: f64, s_nu: f64, s_phi: f64, sigma_k: f64) -> Vec3 {
        let r2 = self.r * self.r;
        let x = self.x;
        let half = 0.5 * r2 * x * x * q;
        [
            r2 * x * s_nu + half * self.dy[NU],
            r2 * x * s_phi + half * self.dy[PHI],
            r2 * x * sigma_k + half * self.dy[SIGMA],
        ]
    }

    fn partials(&self) -> [Partial; 9] {
        let x = self.x;
        let x2 = x * x;
        let r2 = self.r * self.r;
        let om2 = self.omega * self.omega;
        let (b, a2, a4, al) = (self.b, self.a2, self.a4, self.alpha);
        let f = &self.fermi;
        let sigma = self.y[SIGMA];
        let [_, dphi, dsigma] = self.dy;
        let d_of = |p_q: f64| -r2 * x2 * p_q;

        // nu
        let p_nu = 0.5 * om2 * self.bos;
        let tr0_nu = om2 * self.bos;
        let nu = Partial {
            n: 0.0,
            d: d_of(p_nu),
            g: self.matter_g(0.0, -2.0 * om2 * self.bos, 0.5 * al * tr0_nu, sigma * om2 * self.en),
            h: [0.0; 3],
        };

        // phi
        let p_phi = -4.0 * al * b * a4 * f.f + 0.5 * self.gamma2 * self.vp - al * om2 * self.bos - 4.0 * al * a4 * self.w;
        let q_phi = 4.0 * al * (b * a4 * (f.g - f.f) - 2.0 * a4 * self.w) + self.gamma2 * self.vp;
        let s_nu_phi = 4.0 * al * b * a4 * (f.g + 3.0 * f.f) + 4.0 * al * om2 * self.bos + 8.0 * al * a4 * self.w
            - self.gamma2 * self.vp;
        let tr0_phi = 4.0 * al * b * a4 * (f.g - 3.0 * f.f) - 2.0 * al * om2 * self.bos - 16.0 * al * a4 * self.w;
        let s_phi_phi = 0.5 * self.alpha_prime * self.tr0 + 0.5 * al * tr0_phi + 0.25 * self.gamma2 * self.vpp;
        let k_sigma_phi = -4.0 * al * a2 * self.wp;
        let phi = Partial {
            n: -al * a2 * x2 * dsigma * dsigma,
            d: d_of(p_phi),
            g: self.matter_g(q_phi, s_nu_phi, s_phi_phi, sigma * k_sigma_phi),
            h: [
                0.0,
                0.5 * x * dsigma * dsigma * a2 * (self.alpha_prime + 2.0 * al * al),
                -2.0 * self.alpha_prime * x * dphi * dsigma,
            ],
        };

        // sigma
        let bos_s = 2.0 * a2 * self.en * sigma;
        let w_s = 2.0 * sigma * self.wp;
        let p_s = -0.5 * om2 * bos_s - a4 * w_s;
        let q_s = -2.0 * a4 * w_s;
        let s_nu_s = 2.0 * om2 * bos_s + 2.0 * a4 * w_s;
        let tr0_s = -om2 * bos_s - 4.0 * a4 * w_s;
        let k_sigma_s = 2.0 * a2 * self.lambda * sigma;
        let sig = Partial {
            n: 0.0,
            d: d_of(p_s),
            g: self.matter_g(q_s, s_nu_s, 0.5 * al * tr0_s, self.k_sigma + sigma * k_sigma_s),
            h: [0.0; 3],
        };

        // derivatives y'
        let diag = -1.0 + 0.5 * r2 * x2 * self.q;
        let dnu_p = Partial {
            n: x,
            d: 0.0,
            g: [diag, 0.0, 0.0],
            h: [0.0; 3],
        };
        let dphi_p = Partial {
            n: -2.0 * x2 * dphi,
            d: 0.0,
            g: [0.0, diag, 0.0],
            h: [0.0, 0.0, -2.0 * al * x * dsigma],
        };
        let dsigma_p = Partial {
            n: -a2 * x2 * dsigma,
            d: 0.0,
            g: [0.0, 0.0, diag],
            h: [0.0, al * x * a2 * dsigma, -2.0 * al * x * dphi],
        };

        // R_s
        let r = self.r;
        let r_p = Partial {
            n: 0.0,
            d: -2.0 * r * x2 * self.p,
            g: [
                2.0 * r * x * self.s_nu + r * x2 * self.dy[NU] * self.q,
                2.0 * r * x * self.s_phi + r * x2 * dphi * self.q,
                2.0 * r * x * sigma * self.k_sigma + r * x2 * dsigma * self.q,
            ],
            h: [0.0; 3],
        };

        // Omega
        let om = self.omega;
        let om_p = Partial {
            n: 0.0,
            d: d_of(-om * self.bos),
            g: self.matter_g(0.0, 4.0 * om * self.bos, -al * om * self.bos, -2.0 * om * self.en * sigma),
            h: [0.0; 3],
        };

        // mu
        let p_mu = -b * a4 * f.df;
        let q_mu = b * a4 * (f.dg - f.df);
        let s_nu_mu = b * a4 * (f.dg + 3.0 * f.df);
        let tr0_mu = b * a4 * (f.dg - 3.0 * f.df);
        let mu_p = Partial {
            n: 0.0,
            d: d_of(p_mu),
            g: self.matter_g(q_mu, s_nu_mu, 0.5 * al * tr0_mu, 0.0),
            h: [0.0; 3],
        };

        [nu, phi, sig, dnu_p, dphi_p, dsigma_p, r_p, om_p, mu_p]
    }

    fn jacobian(&self) -> Jacobian {
        let columns = self.partials().map(|pq| {
            let de = self.e * (pq.n / self.n - pq.d / self.d);
            let col: Vec3 = std::array::from_fn(|k| de * self.g[k] + self.e * pq.g[k] + pq.h[k]);
            col
        });
        let mut jac = Jacobian {
            dy: [[0.0; 3]; 3],
            ddy: [[0.0; 3]; 3],
            dr: columns[6],
            domega: columns[7],
            dmu: columns[8],
        };
        for k in 0..3 {
            for n in 0..3 {
                jac.dy[k][n] = columns[n][k];
                jac.ddy[k][n] = columns[3 + n][k];
            }
        }
        jac
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};

    fn reference_model() -> StarModel {
        StarModel::new(PhysicalParams {
            sigma_c: 0.8,
            mu_c: 1.0,
            lambda: 0.01,
            gamma: 1.0,
            b: 1.0,
        })
    }

    fn pair() -> SpectralPair {
        SpectralPair {
            r_s: 1.16,
            omega: 0.8,
        }
    }

    #[test]
    fn coupling_values() {
        assert_eq!(coupling_a(0.0), 1.0);
        assert_relative_eq!(coupling_a(3f64.sqrt()), std::f64::consts::E, max_relative = 1e-14);
        assert_relative_eq!(coupling_alpha(-2.3), 0.577_350_269_2, epsilon = 1e-10);
    }

    #[test]
    fn dilaton_potential_limits_and_derivative() {
        assert_eq!(dilaton_potential(0.0), (0.0, 0.0));
        assert_relative_eq!(dilaton_potential(200.0).0, 1.0, epsilon = 1e-40_f64.max(1e-15));
        for &phi in &[-0.7, -0.05, 0.3, 1.9] {
            let h = 1e-3;
            let fd = |h: f64| (dilaton_potential(phi + h).0 - dilaton_potential(phi - h).0) / (2.0 * h);
            // Richardson extrapolation of the central difference.
            let rich = (4.0 * fd(h / 2.0) - fd(h)) / 3.0;
            assert_relative_eq!(dilaton_potential(phi).1, rich, max_relative = 1e-8);
            let fd2 = (MinimalDilaton.v_prime(phi + 1e-5) - MinimalDilaton.v_prime(phi - 1e-5)) / 2e-5;
            assert_relative_eq!(MinimalDilaton.v_second(phi), fd2, max_relative = 1e-7);
        }
    }

    #[test]
    fn boson_potential_values() {
        assert_eq!(boson_potential(0.0, 3.0), (0.0, -0.5));
        assert_eq!(boson_potential(1.0, 0.0), (-0.5, -0.5));
        let (s2, l) = (0.64, 0.01);
        let h = 1e-4;
        let fd = (boson_potential(s2 + h, l).0 - boson_potential(s2 - h, l).0) / (2.0 * h);
        assert!((boson_potential(s2, l).1 - fd).abs() < 1e-10);
        assert!((boson_potential(s2, l).0 - (-0.5 * (0.64 + 0.005 * 0.64 * 0.64))).abs() < 1e-15);
    }

    #[test]
    fn fermi_state_reference_values() {
        let z = fermi_state(0.0).unwrap();
        assert_eq!((z.f, z.g, z.df), (0.0, 0.0, 0.0));
        // mpmath, 30 digits: (1/8)(-sqrt2 + 3 asinh 1) and (1/8)(9 sqrt2 - 3 asinh 1)
        let one = fermi_state(1.0).unwrap();
        assert_relative_eq!(one.f, 0.153_738_399_835_691_75, max_relative = 1e-13);
        assert_relative_eq!(one.g, 1.260_475_162_537_403_3, max_relative = 1e-13);
        assert!(matches!(fermi_state(-1e-9), Err(ModelError::NegativeFermiMomentum(_))));
    }

    #[test]
    fn fermi_closed_forms_match_direct_evaluation() {
        let direct_f = |mu: f64| {
            let root = (mu + mu * mu).sqrt();
            0.125 * ((2.0 * mu - 3.0) * root + 3.0 * (mu.sqrt() + (1.0 + mu).sqrt()).ln())
        };
        let direct_g = |mu: f64| {
            let root = (mu + mu * mu).sqrt();
            0.125 * ((6.0 * mu + 3.0) * root - 3.0 * (mu.sqrt() + (1.0 + mu).sqrt()).ln())
        };
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..100 {
            let mu: f64 = rng.gen_range(0.05..5.0);
            let s = fermi_state(mu).unwrap();
            assert_relative_eq!(s.f_plus_g, direct_f(mu) + direct_g(mu), max_relative = 1e-12);
            let h = 1e-4 * mu;
            let fd = |h: f64| (direct_f(mu + h) - direct_f(mu - h)) / (2.0 * h);
            let rich = (4.0 * fd(h / 2.0) - fd(h)) / 3.0;
            assert_relative_eq!(s.df, rich, max_relative = 1e-8);
            let fd_g = |h: f64| (direct_g(mu + h) - direct_g(mu - h)) / (2.0 * h);
            assert_relative_eq!(s.dg, (4.0 * fd_g(h / 2.0) - fd_g(h)) / 3.0, max_relative = 1e-8);
            // ratio used by the first integral
            assert_relative_eq!(s.f_plus_g / s.df, 2.0 * (1.0 + mu), max_relative = 1e-12);
        }
        // series branch joins the closed form
        let lo = fermi_state(0.999_999e-3).unwrap();
        assert_relative_eq!(lo.f, direct_f(0.999_999e-3), max_relative = 1e-8);
    }

    #[test]
    fn vacuum_is_a_fixed_point() {
        let m = reference_model();
        for &x in &[0.0, 0.3, 1.0, 17.0, 128.0] {
            let pt = PointState::vacuum(x);
            assert_eq!(metric_lambda(&m, &pt, pair()).unwrap(), 1.0);
            assert_eq!(rhs_f(&m, &pt, pair()).unwrap(), [0.0; 3]);
            let (_, jac) = frechet_derivatives(&m, &pt, pair()).unwrap();
            assert_eq!(jac.domega, [0.0; 3]);
        }
    }

    #[test]
    fn regular_center() {
        let m = reference_model();
        let pt = PointState {
            x: 0.0,
            y: [-1.7, -0.1, 0.8],
            dy: [0.0; 3],
            mu: 1.0,
        };
        assert_eq!(metric_lambda(&m, &pt, pair()).unwrap(), 1.0);
        assert_eq!(rhs_f(&m, &pt, pair()).unwrap(), [0.0; 3]);
    }

    #[test]
    fn stress_vacuum_and_boson_only() {
        let m = reference_model();
        let s = stress_components(&m, &[0.0; 3], &[0.0; 3], 0.0, 1.0, pair()).unwrap();
        assert_eq!(s.fermion, [0.0; 3]);
        assert_eq!(s.boson, [0.0; 3]);
        assert_eq!((s.fermion_trace, s.boson_trace, s.t1), (0.0, 0.0, 0.0));

        let s = stress_components(&m, &[-0.4, 0.1, 0.5], &[0.2, 0.0, -0.3], 0.0, 1.3, pair()).unwrap();
        assert_eq!(s.fermion, [0.0, -0.0, -0.0]);
        assert!(s.boson[0] > 0.0);
    }

    #[test]
    fn stress_trace_identities() {
        let m = reference_model();
        let mut rng = rand::rngs::StdRng::seed_from_u64(11);
        for _ in 0..200 {
            let y = [rng.gen_range(-2.0..0.5), rng.gen_range(-0.5..0.5), rng.gen_range(0.0..1.0)];
            let dy = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
            let s = stress_components(&m, &y, &dy, rng.gen_range(0.0..2.0), rng.gen_range(0.5..3.0), pair()).unwrap();
            let scale = 1.0 + s.boson.iter().chain(&s.fermion).map(|v| v.abs()).sum::<f64>();
            assert!((s.fermion_trace - (s.fermion[0] + 3.0 * s.fermion[1])).abs() < 1e-12 * scale);
            assert!((s.boson_trace - (s.boson[0] + s.boson[1] + 2.0 * s.boson[2])).abs() < 1e-12 * scale);
        }
    }

    /// `e^lambda` agrees with `G_1^1` written with the stress bundle.
    #[test]
    fn metric_closure_satisfies_radial_einstein_equation() {
        let m = reference_model();
        let pt = PointState {
            x: 0.6,
            y: [-1.3, -0.08, 0.6],
            dy: [0.9, 0.05, -0.4],
            mu: 0.4,
        };
        let pr = pair();
        let e = metric_lambda(&m, &pt, pr).unwrap();
        let s = stress_components(&m, &pt.y, &pt.dy, pt.mu, e, pr).unwrap();
        let r = pr.r_s * pt.x;
        let (dnu, dphi) = (pt.dy[NU] / pr.r_s, pt.dy[PHI] / pr.r_s);
        let g11 = 1.0 / (r * r) - (1.0 / (r * r) + dnu / r) / e;
        let v = MinimalDilaton.v(pt.y[PHI]);
        let source = s.fermion[1] + s.boson[1] - dphi * dphi / e + 0.5 * m.params.gamma.powi(2) * v;
        assert_relative_eq!(g11, source, max_relative = 1e-12);
    }

    #[test]
    fn metric_breakdown_is_reported() {
        let m = reference_model();
        let pt = PointState {
            x: 3.0,
            y: [0.0; 3],
            dy: [-1.0, 0.0, 0.0],
            mu: 0.0,
        };
        assert!(matches!(metric_lambda(&m, &pt, pair()), Err(ModelError::MetricBreakdown { .. })));
    }

    fn random_state(rng: &mut impl Rng) -> (PointState, SpectralPair) {
        let x = rng.gen_range(0.05..3.0);
        (
            PointState {
                x,
                y: [rng.gen_range(-1.8..-0.2), rng.gen_range(-0.3..0.1), rng.gen_range(0.0..0.9)],
                dy: [rng.gen_range(0.0..0.6), rng.gen_range(-0.1..0.1), rng.gen_range(-0.6..0.0)],
                mu: if x < 1.0 { rng.gen_range(0.0..1.0) } else { 0.0 },
            },
            SpectralPair {
                r_s: rng.gen_range(0.6..1.6),
                omega: rng.gen_range(0.5..1.0),
            },
        )
    }

    /// Central differences with one Richardson step, per variable index
    /// (0..3 y, 3..6 y', 6 R_s, 7 Omega, 8 mu).
    fn fd_column(m: &StarModel, pt: &PointState, pr: SpectralPair, var: usize, h: f64) -> Vec3 {
        let eval = |delta: f64| {
            let mut p = *pt;
            let mut s = pr;
            match var {
                0..=2 => p.y[var] += delta,
                3..=5 => p.dy[var - 3] += delta,
                6 => s.r_s += delta,
                7 => s.omega += delta,
                _ => p.mu += delta,
            }
            rhs_f(m, &p, s).unwrap()
        };
        let cd = |h: f64| -> Vec3 {
            let (a, b) = (eval(h), eval(-h));
            std::array::from_fn(|k| (a[k] - b[k]) / (2.0 * h))
        };
        let (c1, c2) = (cd(h), cd(h / 2.0));
        std::array::from_fn(|k| (4.0 * c2[k] - c1[k]) / 3.0)
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

    #[test]
    fn frechet_blocks_match_finite_differences() {
        let m = StarModel::new(PhysicalParams {
            sigma_c: 0.5,
            mu_c: 0.5,
            lambda: 10.0,
            gamma: 3.0,
            b: 1.0,
        });
        let mut rng = rand::rngs::StdRng::seed_from_u64(3);
        let mut checked = 0;
        while checked < 50 {
            let (pt, pr) = random_state(&mut rng);
            let Ok((_, jac)) = frechet_derivatives(&m, &pt, pr) else { continue };
            let vars = if pt.mu > 1e-3 { 9 } else { 8 };
            for var in 0..vars {
                let fd = fd_column(&m, &pt, pr, var, 1e-4);
                let an = analytic_column(&jac, var);
                let scale = fd.iter().chain(&an).fold(1e-3_f64, |s, v| s.max(v.abs()));
                for k in 0..3 {
                    assert!(
                        (fd[k] - an[k]).abs() <= 1e-6 * scale,
                        "var {var} comp {k}: fd {} analytic {} at {pt:?}",
                        fd[k],
                        an[k]
                    );
                }
            }
            checked += 1;
        }
    }

    #[test]
    fn taylor_remainder_is_second_order() {
        let m = reference_model();
        let pt = PointState {
            x: 0.7,
            y: [-1.2, -0.05, 0.55],
            dy: [0.8, 0.02, -0.5],
            mu: 0.3,
        };
        let pr = pair();
        let (f0, jac) = frechet_derivatives(&m, &pt, pr).unwrap();
        let remainder = |delta: f64| {
            let mut p = pt;
            p.y[NU] += delta;
            let f = rhs_f(&m, &p, pr).unwrap();
            (0..3).map(|k| (f[k] - f0[k] - jac.dy[k][NU] * delta).abs()).fold(0.0, f64::max)
        };
        let (r1, r2) = (remainder(1e-2), remainder(5e-3));
        let ratio = r1 / r2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn params_validation() {
        let mut p = reference_model().params;
        assert!(p.validate().is_ok());
        p.mu_c = 0.0;
        assert!(p.validate().is_err());
        p.mu_c = 1.0;
        p.gamma = f64::NAN;
        assert!(p.validate().is_err());
    }
}
