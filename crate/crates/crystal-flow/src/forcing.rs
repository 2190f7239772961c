//! Two-phase 1-periodic layered forcing: g takes the value alpha (< 0) where
//! dist(x/eps, Z) <= 1/4 and beta (> 0) elsewhere, with exact integrals and
//! phase-length decomposition of intervals.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for interface-lattice membership of |x/eps mod 1 -+ 1/4|.
pub const INTERFACE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterfaceClass {
    /// x ≡ eps/4 mod eps: alpha on the left, beta on the right.
    AlphaBeta,
    /// x ≡ -eps/4 mod eps: beta on the left, alpha on the right.
    BetaAlpha,
    NotOnInterface,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Phase {
    Alpha,
    Beta,
    Interface(InterfaceClass),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForcingField {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
}

#[derive(Debug, Error)]
pub enum ForcingError {
    #[error("need alpha < 0 < beta, got alpha={alpha}, beta={beta}")]
    BadSigns { alpha: f64, beta: f64 },
    #[error("epsilon must satisfy 0 < epsilon < 8/(beta-alpha) = {limit}, got {epsilon}")]
    BadEpsilon { epsilon: f64, limit: f64 },
}

/// Interval phase content: remainders after removing whole periods.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseDecomposition {
    pub ell: f64,
    /// Alpha-phase remainder, in [0, eps/2].
    pub ell_alpha: f64,
    /// Beta-phase remainder, in [0, eps/2].
    pub ell_beta: f64,
    /// Exact integral of g_eps over the interval.
    pub integral: f64,
}

impl ForcingField {
    pub fn new(alpha: f64, beta: f64, epsilon: f64) -> Result<Self, ForcingError> {
        if !(alpha < 0.0 && beta > 0.0) {
            return Err(ForcingError::BadSigns { alpha, beta });
        }
        let limit = 8.0 / (beta - alpha);
        if !(epsilon > 0.0 && epsilon < limit) {
            return Err(ForcingError::BadEpsilon { epsilon, limit });
        }
        Ok(ForcingField {
            alpha,
            beta,
            epsilon,
        })
    }

    /// Pointwise forcing value; interface points get the alpha value (the
    /// alpha set is closed), which is immaterial for integrals.
    pub fn g(&self, x: f64) -> f64 {
        match self.phase_at(x) {
            Phase::Beta => self.beta,
            _ => self.alpha,
        }
    }

    pub fn phase_at(&self, x: f64) -> Phase {
        let u = x / self.epsilon;
        let frac = u - u.round(); // in [-1/2, 1/2], distance to Z is |frac|
        if (frac - 0.25).abs() < INTERFACE_TOL / self.epsilon.min(1.0) {
            Phase::Interface(InterfaceClass::AlphaBeta)
        } else if (frac + 0.25).abs() < INTERFACE_TOL / self.epsilon.min(1.0) {
            Phase::Interface(InterfaceClass::BetaAlpha)
        } else if frac.abs() < 0.25 {
            Phase::Alpha
        } else {
            Phase::Beta
        }
    }

    pub fn interface_class(&self, x: f64) -> InterfaceClass {
        match self.phase_at(x) {
            Phase::Interface(c) => c,
            _ => InterfaceClass::NotOnInterface,
        }
    }

    /// Signed measure of the alpha set within [0, x].
    pub fn alpha_measure_from_origin(&self, x: f64) -> f64 {
        // The alpha set is symmetric about 0, so the measure is odd in x.
        let u = x.abs() / self.epsilon;
        let k = u.floor();
        let r = u - k;
        // Per unit period [0,1): alpha on [0,1/4] and [3/4,1).
        let a = k / 2.0 + r.min(0.25) + (r - 0.75).clamp(0.0, 0.25);
        self.epsilon * a * x.signum()
    }

    /// Exact closed-form integral of g_eps over [a, b].
    pub fn integral_g(&self, a: f64, b: f64) -> f64 {
        debug_assert!(a <= b);
        let m_alpha = self.alpha_measure_from_origin(b) - self.alpha_measure_from_origin(a);
        let m_beta = (b - a) - m_alpha;
        self.alpha * m_alpha + self.beta * m_beta
    }

    /// Phase remainders of [a, b] after removing floor(ell/eps) whole periods.
    pub fn decompose(&self, a: f64, b: f64) -> PhaseDecomposition {
        debug_assert!(a <= b);
        let ell = b - a;
        let eps = self.epsilon;
        let periods = (ell / eps).floor();
        // Rounding in eps * periods can push the remainder one ulp outside
        // [0, eps], which would invert the clamp bounds below.
        let r = (ell - eps * periods).clamp(0.0, eps);
        let m_alpha = self.alpha_measure_from_origin(b) - self.alpha_measure_from_origin(a);
        let lo = (r - eps / 2.0).max(0.0);
        let hi = r.min(eps / 2.0);
        let ell_alpha = (m_alpha - (eps / 2.0) * periods).clamp(lo, hi);
        let ell_beta = r - ell_alpha;
        PhaseDecomposition {
            ell,
            ell_alpha,
            ell_beta,
            integral: self.integral_g(a, b),
        }
    }

    /// Interface abscissa x_N = (N + 1/4) eps; lies on the AlphaBeta lattice.
    pub fn x_n(&self, n: i64) -> f64 {
        (n as f64 + 0.25) * self.epsilon
    }

    /// Nearest lattice point of the given class at or left of x / right of x /
    /// nearest overall (ties broken toward the smaller abscissa).
    pub fn snap_to_interface(&self, x: f64, which: InterfaceClass, dir: SnapDirection) -> f64 {
        let eps = self.epsilon;
        let off = match which {
            InterfaceClass::AlphaBeta => 0.25 * eps,
            InterfaceClass::BetaAlpha => -0.25 * eps,
            InterfaceClass::NotOnInterface => panic!("cannot snap to NotOnInterface"),
        };
        let u = (x - off) / eps;
        let k = match dir {
            SnapDirection::Left => (u + INTERFACE_TOL / eps).floor(),
            SnapDirection::Right => (u - INTERFACE_TOL / eps).ceil(),
            SnapDirection::Nearest => u.round(),
        };
        off + k * eps
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapDirection {
    Left,
    Right,
    Nearest,
}
