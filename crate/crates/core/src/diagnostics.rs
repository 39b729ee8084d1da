//! Post-solution checks: observed convergence order, far-field decay of the
//! metric, and the first integral of hydrostatic equilibrium.

use crate::canm::FieldState;
use crate::model::{coupling_a, NU, PHI};
use crate::DiagnosticsError;

/// A quantity computed on three meshes with steps `h`, `h/2`, `h/4`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RungeTriple {
    pub coarse: f64,
    pub medium: f64,
    pub fine: f64,
}

impl RungeTriple {
    pub fn new(coarse: f64, medium: f64, fine: f64) -> Self {
        Self { coarse, medium, fine }
    }

    /// `log2((q_h - q_h/2) / (q_h/2 - q_h/4))`.
    pub fn runge_order(&self) -> Result<f64, DiagnosticsError> {
        let den = self.medium - self.fine;
        if den == 0.0 {
            return Err(DiagnosticsError::ZeroDenominator);
        }
        let ratio = (self.coarse - self.medium) / den;
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(DiagnosticsError::OrderUndefined { ratio });
        }
        Ok(ratio.log2())
    }

    /// Richardson extrapolation assuming order `p`.
    pub fn extrapolate(&self, p: f64) -> f64 {
        let k = 2f64.powf(p);
        self.fine + (self.fine - self.medium) / (k - 1.0)
    }
}

/// `C = nu'(X) X^2` for a sequence of domain lengths, with consecutive ratios.
#[derive(Debug, Clone, PartialEq)]
pub struct FarFieldDecay {
    pub x_inf: Vec<f64>,
    pub slope: Vec<f64>,
    pub coefficient: Vec<f64>,
    /// `slope[k] / slope[k + 1]`; close to 4 for `1/x` decay under doubling.
    pub ratios: Vec<f64>,
}

pub fn farfield_decay(entries: &[(f64, f64)]) -> Result<FarFieldDecay, DiagnosticsError> {
    if entries.len() < 2 {
        return Err(DiagnosticsError::TooFewEntries {
            needed: 2,
            got: entries.len(),
        });
    }
    let mut ratios = Vec::with_capacity(entries.len() - 1);
    for w in entries.windows(2) {
        if w[1].1 == 0.0 {
            return Err(DiagnosticsError::ZeroDenominator);
        }
        ratios.push(w[0].1 / w[1].1);
    }
    Ok(FarFieldDecay {
        x_inf: entries.iter().map(|e| e.0).collect(),
        slope: entries.iter().map(|e| e.1).collect(),
        coefficient: entries.iter().map(|&(x, s)| s * x * x).collect(),
        ratios,
    })
}

/// `nu'(X_inf)` of a solved state.
pub fn boundary_slope(state: &FieldState) -> f64 {
    let g = state.grid();
    state.y.moment_at_node(g.intervals())[NU]
}

/// Largest deviation of `ln[(1 + mu) A^2(phi)] + nu` from its central value
/// over the nodes strictly inside the star.
pub fn first_integral_residual(state: &FieldState) -> f64 {
    let c = state.center();
    let reference = ((1.0 + state.mu[0]) * coupling_a(c[PHI]).powi(2)).ln() + c[NU];
    (0..state.grid().n_star())
        .map(|i| {
            let y = state.y.value_at_node(i);
            let v = ((1.0 + state.mu[i]) * coupling_a(y[PHI]).powi(2)).ln() + y[NU];
            (v - reference).abs()
        })
        .fold(0.0, f64::max)
}
