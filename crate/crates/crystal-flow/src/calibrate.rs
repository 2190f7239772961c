//! Calibrability of horizontal edges: candidate profiles for the first
//! component of the Cahn-Hoffmann field, analytic decision criteria, edge
//! velocities, vertical-edge velocities with pinning, and the thresholds and
//! split points used by facet breaking.

use crate::forcing::{ForcingField, InterfaceClass, Phase, SnapDirection, INTERFACE_TOL};
use crate::geometry::{Axis, Edge, VertexFieldValue};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Constraint slack: an edge is calibrable iff max|n| <= 1 + CONSTRAINT_TOL.
pub const CONSTRAINT_TOL: f64 = 1e-8;
/// Inputs within this distance of a calibrability boundary are flagged marginal.
pub const MARGINAL_BAND: f64 = 1e-6;

/// Horizontal edge data sufficient for calibration: abscissas, convexity
/// factor, and (for chi = 0) the shared endpoint value n0 of the profile.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct HorizontalEdge {
    pub p: f64,
    pub q: f64,
    pub chi: i8,
    /// Endpoint value for chi = 0 edges; ignored otherwise.
    pub n0: i8,
}

#[derive(Debug, Error)]
pub enum CalibrateError {
    #[error("expected a horizontal edge")]
    NotHorizontal,
    #[error("chi=0 edge with inconsistent endpoint values (s1 differs: {0} vs {1})")]
    InconsistentEndpoints(i8, i8),
    #[error("velocity undefined: edge not calibrable (must be broken first)")]
    NotCalibrable,
    #[error("break_points called off-threshold (report not marginal)")]
    OffThreshold,
}

impl HorizontalEdge {
    pub fn new(p: f64, q: f64, chi: i8, n0: i8) -> Self {
        debug_assert!(p < q);
        HorizontalEdge { p, q, chi, n0 }
    }

    pub fn from_geometry(e: &Edge) -> Result<Self, CalibrateError> {
        if e.axis != Axis::Horizontal {
            return Err(CalibrateError::NotHorizontal);
        }
        Ok(HorizontalEdge {
            p: e.p.x,
            q: e.q.x,
            chi: e.chi,
            n0: e.n0,
        })
    }

    pub fn length(&self) -> f64 {
        self.q - self.p
    }
}

/// Endpoint values of the profile: (-1, 1) for chi = +1, (1, -1) for chi = -1,
/// (n0, n0) for chi = 0.
pub fn boundary_conditions(
    chi: i8,
    vf_p: VertexFieldValue,
    vf_q: VertexFieldValue,
) -> Result<(f64, f64), CalibrateError> {
    match chi {
        1 => Ok((-1.0, 1.0)),
        -1 => Ok((1.0, -1.0)),
        _ => {
            if vf_p.s1 != vf_q.s1 {
                return Err(CalibrateError::InconsistentEndpoints(vf_p.s1, vf_q.s1));
            }
            let n0 = vf_p.s1 as f64;
            Ok((n0, n0))
        }
    }
}

/// Endpoint profile values implied by chi (and n0 for flat edges).
pub fn endpoint_values(edge: &HorizontalEdge) -> (f64, f64) {
    bc_values(edge)
}

fn bc_values(edge: &HorizontalEdge) -> (f64, f64) {
    match edge.chi {
        1 => (-1.0, 1.0),
        -1 => (1.0, -1.0),
        _ => (edge.n0 as f64, edge.n0 as f64),
    }
}

/// Piecewise-affine profile on [p, q]; extrema occur at breakpoints.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CahnHoffmannProfile {
    pub breakpoints: Vec<f64>,
    pub values: Vec<f64>,
}

impl CahnHoffmannProfile {
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// First breakpoint (left to right) where the constraint |n| <= 1 fails.
    pub fn first_violation(&self, tol: f64) -> Option<f64> {
        self.breakpoints
            .iter()
            .zip(&self.values)
            .find(|(_, v)| v.abs() > 1.0 + tol)
            .map(|(x, _)| *x)
    }

    pub fn eval(&self, x: f64) -> f64 {
        let bp = &self.breakpoints;
        match bp.iter().position(|&b| b >= x) {
            None => *self.values.last().unwrap(),
            Some(0) => self.values[0],
            Some(i) => {
                let t = (x - bp[i - 1]) / (bp[i] - bp[i - 1]);
                self.values[i - 1] * (1.0 - t) + self.values[i] * t
            }
        }
    }
}

/// The two phase slopes of the candidate profile.
pub fn phase_slopes(edge: &HorizontalEdge, f: &ForcingField) -> (f64, f64) {
    let ell = edge.length();
    let d = f.decompose(edge.p, edge.q);
    let chi = edge.chi as f64;
    let ba = f.beta - f.alpha;
    let slope_alpha = (4.0 * chi + ba * (ell - d.ell_alpha + d.ell_beta)) / (2.0 * ell);
    let slope_beta = (4.0 * chi - ba * (ell + d.ell_alpha - d.ell_beta)) / (2.0 * ell);
    (slope_alpha, slope_beta)
}

/// The unique candidate profile: starts at n(p), per-phase slopes, ends at
/// n(q) exactly by construction.
pub fn candidate_profile(edge: &HorizontalEdge, f: &ForcingField) -> CahnHoffmannProfile {
    let (np, _nq) = bc_values(edge);
    let (slope_alpha, slope_beta) = phase_slopes(edge, f);
    let eps = f.epsilon;
    // Interface lattice points (both classes alternate with spacing eps/2).
    let mut breakpoints = vec![edge.p];
    let first = ((edge.p - 0.25 * eps) / (0.5 * eps)).floor() as i64 + 1;
    let mut k = first;
    loop {
        let x = 0.25 * eps + 0.5 * eps * k as f64;
        if x >= edge.q - INTERFACE_TOL {
            break;
        }
        if x > edge.p + INTERFACE_TOL {
            breakpoints.push(x);
        }
        k += 1;
    }
    breakpoints.push(edge.q);
    let mut values = vec![np];
    for w in breakpoints.windows(2) {
        let mid = 0.5 * (w[0] + w[1]);
        let slope = match f.phase_at(mid) {
            Phase::Beta => slope_beta,
            _ => slope_alpha,
        };
        values.push(values.last().unwrap() + slope * (w[1] - w[0]));
    }
    CahnHoffmannProfile {
        breakpoints,
        values,
    }
}

/// Which analytic proposition decided calibrability.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Criterion {
    /// chi = 0, length < eps: phase-order decomposition test.
    ZeroCurvShort,
    /// chi = 0, length >= eps: endpoints on the matching interface lattice.
    ZeroCurvLong,
    /// |chi| = 1 with the curvature term dominant (short edges).
    CurvatureDominant,
    /// Endpoints on the favorable interfaces; always calibrable.
    CEdge,
    /// Long chi = +1 edge, general endpoint position analysis.
    LongPositive,
    /// Long chi = -1 edge, mirrored analysis.
    LongNegative,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CalibrabilityReport {
    pub calibrable: bool,
    pub velocity: Option<f64>,
    pub max_abs_n: f64,
    pub failure_point: Option<f64>,
    pub criterion: Criterion,
    pub marginal: bool,
    pub sigma1: Option<f64>,
    pub sigma2: Option<f64>,
    pub sigma_star: Option<f64>,
    pub sigma_tilde: Option<f64>,
}

/// Raw velocity formula: v = chi 2/l + mean of g over the edge. Only
/// meaningful when the edge is calibrable.
pub fn velocity_formula(edge: &HorizontalEdge, f: &ForcingField) -> f64 {
    let ell = edge.length();
    edge.chi as f64 * 2.0 / ell + f.integral_g(edge.p, edge.q) / ell
}

/// Velocity of a calibrable horizontal edge; error otherwise.
pub fn horizontal_velocity(edge: &HorizontalEdge, f: &ForcingField) -> Result<f64, CalibrateError> {
    let r = is_calibrable(edge, f);
    r.velocity.ok_or(CalibrateError::NotCalibrable)
}

fn alpha_measure(f: &ForcingField, a: f64, b: f64) -> f64 {
    f.alpha_measure_from_origin(b) - f.alpha_measure_from_origin(a)
}

/// Distance of x to the nearest interface lattice point (either class).
fn dist_to_lattice(f: &ForcingField, x: f64) -> f64 {
    let eps = f.epsilon;
    let u = (x - 0.25 * eps) / (0.5 * eps);
    (u - u.round()).abs() * 0.5 * eps
}

struct Decision {
    calibrable: bool,
    criterion: Criterion,
    /// Distance to the nearest calibrability boundary, in the branch's
    /// natural units; negative margins never occur (absolute distance).
    margin: f64,
    sigma1: Option<f64>,
    sigma2: Option<f64>,
    sigma_star: Option<f64>,
    sigma_tilde: Option<f64>,
}

impl Decision {
    fn plain(calibrable: bool, criterion: Criterion, margin: f64) -> Self {
        Decision {
            calibrable,
            criterion,
            margin,
            sigma1: None,
            sigma2: None,
            sigma_star: None,
            sigma_tilde: None,
        }
    }
}

/// Full calibrability decision: analytic criterion cross-validated against the
/// direct constraint check on the candidate profile.
pub fn is_calibrable(edge: &HorizontalEdge, f: &ForcingField) -> CalibrabilityReport {
    let profile = candidate_profile(edge, f);
    let max_abs_n = profile.max_abs();
    let direct = max_abs_n <= 1.0 + CONSTRAINT_TOL;
    let failure_point = profile.first_violation(CONSTRAINT_TOL);
    let d = analytic_decision(edge, f, direct);
    // An endpoint close to (but not on) an interface makes the classification
    // itself unstable; flag marginal.
    let endpoint_unstable = [edge.p, edge.q].iter().any(|&x| {
        let dl = dist_to_lattice(f, x);
        dl > INTERFACE_TOL && dl < MARGINAL_BAND
    });
    let marginal = endpoint_unstable || d.margin < MARGINAL_BAND;
    debug_assert!(
        marginal || d.calibrable == direct,
        "analytic/direct disagreement off the marginal band: {edge:?} {f:?} \
         analytic={} direct={} max|n|={max_abs_n}",
        d.calibrable,
        direct
    );
    let velocity = if d.calibrable {
        Some(velocity_formula(edge, f))
    } else {
        None
    };
    CalibrabilityReport {
        calibrable: d.calibrable,
        velocity,
        max_abs_n,
        failure_point,
        criterion: d.criterion,
        marginal,
        sigma1: d.sigma1,
        sigma2: d.sigma2,
        sigma_star: d.sigma_star,
        sigma_tilde: d.sigma_tilde,
    }
}

fn analytic_decision(edge: &HorizontalEdge, f: &ForcingField, direct: bool) -> Decision {
    let ell = edge.length();
    let eps = f.epsilon;
    let ba = f.beta - f.alpha;
    let t4 = 4.0 / ba;
    let d = f.decompose(edge.p, edge.q);
    match edge.chi {
        0 => {
            if ell < eps - INTERFACE_TOL {
                // Short flat edge: the interval must split into the favorable
                // phase first, then the other (either part possibly empty),
                // with the junction on an interface. Misplaced phase measure
                // is the margin.
                let m_alpha = alpha_measure(f, edge.p, edge.q);
                let m_beta = ell - m_alpha;
                let defect = if edge.n0 == 1 {
                    // beta part then alpha part
                    alpha_measure(f, edge.p, edge.p + m_beta)
                } else {
                    // alpha part then beta part
                    (edge.p + m_alpha - edge.p) - alpha_measure(f, edge.p, edge.p + m_alpha)
                };
                let ok = defect <= INTERFACE_TOL;
                // Calibrable flat edges are robust under the flow's own
                // dynamics (their endpoints ride on lattice points); only
                // near-miss defects are marginal.
                let margin = if ok { 1.0 } else { defect };
                Decision::plain(ok, Criterion::ZeroCurvShort, margin)
            } else {
                // Long flat edge: both endpoints must sit on the interface
                // lattice matching n0.
                let class = if edge.n0 == 1 {
                    InterfaceClass::AlphaBeta
                } else {
                    InterfaceClass::BetaAlpha
                };
                let dp = (edge.p - f.snap_to_interface(edge.p, class, SnapDirection::Nearest)).abs();
                let dq = (edge.q - f.snap_to_interface(edge.q, class, SnapDirection::Nearest)).abs();
                let off = dp.max(dq);
                let ok = off <= INTERFACE_TOL;
                let margin = if ok { 1.0 } else { off };
                Decision::plain(ok, Criterion::ZeroCurvLong, margin)
            }
        }
        1 => {
            let load = ell + d.ell_alpha - d.ell_beta;
            if load <= t4 {
                return Decision::plain(true, Criterion::CurvatureDominant, 1.0);
            }
            let pc = f.phase_at(edge.p);
            let qc = f.phase_at(edge.q);
            let p_good = pc == Phase::Interface(InterfaceClass::BetaAlpha);
            let q_good = qc == Phase::Interface(InterfaceClass::AlphaBeta);
            if p_good && q_good {
                return Decision::plain(true, Criterion::CEdge, 1.0);
            }
            long_edge_decision(edge, f, direct, true, pc, qc, p_good, q_good, load - t4)
        }
        _ => {
            let load = ell - d.ell_alpha + d.ell_beta;
            if load <= t4 {
                return Decision::plain(true, Criterion::CurvatureDominant, 1.0);
            }
            let pc = f.phase_at(edge.p);
            let qc = f.phase_at(edge.q);
            let p_good = pc == Phase::Interface(InterfaceClass::AlphaBeta);
            let q_good = qc == Phase::Interface(InterfaceClass::BetaAlpha);
            if p_good && q_good {
                return Decision::plain(true, Criterion::CEdge, 1.0);
            }
            long_edge_decision(edge, f, direct, false, pc, qc, p_good, q_good, load - t4)
        }
    }
}

/// General position analysis for long curved edges past the curvature-dominant
/// threshold. `positive` selects chi = +1 (alpha is the favorable interior
/// phase); chi = -1 is the mirror image with the roles of the phases swapped.
#[allow(clippy::too_many_arguments)]
fn long_edge_decision(
    edge: &HorizontalEdge,
    f: &ForcingField,
    direct: bool,
    positive: bool,
    pc: Phase,
    qc: Phase,
    p_good: bool,
    q_good: bool,
    load_excess: f64,
) -> Decision {
    let eps = f.epsilon;
    let ba = f.beta - f.alpha;
    let criterion = if positive {
        Criterion::LongPositive
    } else {
        Criterion::LongNegative
    };
    let good_phase = if positive { Phase::Alpha } else { Phase::Beta };
    let p_interior = pc == good_phase;
    let q_interior = qc == good_phase;
    // Bad endpoint: wrong-phase interior or the hostile interface class.
    if !(p_good || p_interior) || !(q_good || q_interior) {
        let m = [edge.p, edge.q]
            .iter()
            .map(|&x| dist_to_lattice(f, x))
            .fold(load_excess.min(1.0), f64::min);
        return Decision::plain(false, criterion, m.max(INTERFACE_TOL * 2.0));
    }
    // Inner interfaces flanking each interior endpoint.
    let (inner_p_class, inner_q_class) = if positive {
        (InterfaceClass::BetaAlpha, InterfaceClass::AlphaBeta)
    } else {
        (InterfaceClass::AlphaBeta, InterfaceClass::BetaAlpha)
    };
    let sigma1 = if p_interior {
        Some(f.snap_to_interface(edge.p, inner_p_class, SnapDirection::Right) - edge.p - eps / 2.0)
    } else {
        None
    };
    let sigma2 = if q_interior {
        Some(edge.q - f.snap_to_interface(edge.q, inner_q_class, SnapDirection::Left) - eps / 2.0)
    } else {
        None
    };
    match (sigma1, sigma2) {
        (Some(s1), Some(s2)) => {
            let l_tilde = edge.length() - eps - s1 - s2;
            if l_tilde < 0.0 {
                // The two inner interfaces are out of order; the analytic
                // formulas are outside their hypotheses, fall back to the
                // direct constraint check.
                return Decision {
                    calibrable: direct,
                    criterion,
                    margin: load_excess.min(1.0),
                    sigma1,
                    sigma2,
                    sigma_star: None,
                    sigma_tilde: None,
                };
            }
            let denom = ba * (l_tilde + eps / 2.0) + 4.0;
            let m = eps * ba / denom;
            let h = (eps / 2.0) * (ba * (l_tilde + eps / 2.0) - 4.0) / denom;
            let thresholds = Thresholds::new(*f);
            let calibrable = s1 >= m * s2 + h && s2 >= m * s1 + h;
            let margin = (s1 - (m * s2 + h)).abs().min((s2 - (m * s1 + h)).abs());
            Decision {
                calibrable,
                criterion,
                margin,
                sigma1,
                sigma2,
                sigma_star: None,
                sigma_tilde: Some(thresholds.sigma_tilde(l_tilde)),
            }
        }
        (sigma1, sigma2) => {
            // Mixed case: one endpoint on its favorable interface, the other
            // in the favorable phase interior at offset sigma.
            let (sigma, l_star) = if let Some(s1) = sigma1 {
                // q on its interface; inner interface near p.
                (s1, edge.q - (edge.p + eps / 2.0 + s1))
            } else {
                let s2 = sigma2.unwrap();
                (s2, (edge.q - eps / 2.0 - s2) - edge.p)
            };
            if l_star < 0.0 {
                // Inner interface past the far endpoint: the one-sided
                // threshold formula is outside its hypotheses (its
                // denominator changes sign), fall back to the direct check.
                return Decision {
                    calibrable: direct,
                    criterion,
                    margin: load_excess.min(1.0),
                    sigma1,
                    sigma2,
                    sigma_star: None,
                    sigma_tilde: None,
                };
            }
            let sigma_star = Thresholds::new(*f).sigma_star(l_star);
            Decision {
                calibrable: sigma >= sigma_star,
                criterion,
                margin: (sigma - sigma_star).abs(),
                sigma1,
                sigma2,
                sigma_star: Some(sigma_star),
                sigma_tilde: None,
            }
        }
    }
}

/// Outcome for a vertical edge at abscissa x with outward normal
/// `normal_sign * e1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum VerticalMotion {
    /// Unique velocity; positive moves the edge opposite its outward normal.
    Moving(f64),
    /// On a stable interface with length at or above the pinning threshold.
    Pinned,
    /// On an unstable interface above threshold: both branches are
    /// self-consistent; selection is deferred to the flow's branch policy.
    NonUnique { inward: f64, outward: f64 },
}

/// Velocity of a vertical edge. Every vertical edge is calibrable; on
/// interface abscissas the forcing is multivalued and the admissible velocity
/// interval is [chi 2/l + alpha, chi 2/l + beta].
pub fn vertical_velocity(chi: i8, ell: f64, x: f64, normal_sign: i8, f: &ForcingField) -> VerticalMotion {
    let curv = chi as f64 * 2.0 / ell;
    match f.phase_at(x) {
        Phase::Alpha => VerticalMotion::Moving(curv + f.alpha),
        Phase::Beta => VerticalMotion::Moving(curv + f.beta),
        Phase::Interface(class) => {
            let stable = matches!(
                (normal_sign, class),
                (1, InterfaceClass::AlphaBeta) | (-1, InterfaceClass::BetaAlpha)
            );
            let zero_admissible = curv + f.alpha <= 0.0 && curv + f.beta >= 0.0;
            if chi == 0 {
                // Zero curvature: velocity 0 is always admissible on an
                // interface; the edge waits there.
                return VerticalMotion::Pinned;
            }
            if stable {
                if zero_admissible {
                    VerticalMotion::Pinned
                } else {
                    // Below the pinning threshold the edge crosses
                    // transversally into the phase on its inward side
                    // (alpha for the stable pairing).
                    VerticalMotion::Moving(curv + f.alpha)
                }
            } else if zero_admissible {
                // Unstable interface above threshold: both escape branches
                // are self-consistent.
                VerticalMotion::NonUnique {
                    inward: curv + f.beta,
                    outward: curv + f.alpha,
                }
            } else {
                // Below threshold only the inward branch (beta side) is
                // consistent: transversal crossing.
                VerticalMotion::Moving(curv + f.beta)
            }
        }
    }
}

/// Pinning threshold for a vertical edge of the given convexity factor.
pub fn pinning_threshold(chi: i8, f: &ForcingField) -> f64 {
    match chi {
        1 => -2.0 / f.alpha,
        -1 => 2.0 / f.beta,
        _ => 0.0,
    }
}

/// Breaking thresholds for symmetric edges and the general sigma thresholds.
#[derive(Clone, Copy, Debug)]
pub struct Thresholds {
    pub field: ForcingField,
}

impl Thresholds {
    pub fn new(field: ForcingField) -> Self {
        Thresholds { field }
    }

    /// Smallest N with 2 x_N + eps/2 > 4/(beta - alpha).
    pub fn n_bar(&self) -> i64 {
        let f = &self.field;
        let u = 4.0 / (f.beta - f.alpha) / (2.0 * f.epsilon) - 0.5;
        ((u.floor() as i64) + 1).max(0)
    }

    /// Critical half-length excess delta(N) past x_N for symmetric edges.
    pub fn delta_of_n(&self, n: i64) -> f64 {
        let f = &self.field;
        let x = f.x_n(n);
        let ba = f.beta - f.alpha;
        x * ba * f.epsilon / (2.0 + (2.0 * x - f.epsilon / 2.0) * ba / 2.0)
    }

    /// Index N with l/2 = x_N + delta, 0 <= delta < eps.
    pub fn n_of_length(&self, ell: f64) -> i64 {
        (ell / (2.0 * self.field.epsilon) - 0.25).floor() as i64
    }

    /// The excess delta = l/2 - x_N for N = n_of_length(l).
    pub fn delta_of_length(&self, ell: f64) -> f64 {
        ell / 2.0 - self.field.x_n(self.n_of_length(ell))
    }

    /// Symmetric calibrability threshold sigma~ for inner length l~.
    pub fn sigma_tilde(&self, l_tilde: f64) -> f64 {
        let f = &self.field;
        let ba = f.beta - f.alpha;
        (f.epsilon / 2.0) * (ba * (l_tilde + f.epsilon / 2.0) - 4.0)
            / (ba * (l_tilde - f.epsilon / 2.0) + 4.0)
    }

    /// One-sided threshold sigma* for inner length l*.
    pub fn sigma_star(&self, l_star: f64) -> f64 {
        // Same expression as the symmetric threshold with l* in place of l~.
        self.sigma_tilde(l_star)
    }
}

/// Split abscissas of an edge at its calibrability threshold: the interior
/// interface points where the candidate profile touches |n| = 1 tangentially.
/// Sub-edges produced by splitting there are each calibrable with equal
/// velocity at this instant.
pub fn break_points(edge: &HorizontalEdge, f: &ForcingField) -> Result<Vec<f64>, CalibrateError> {
    let report = is_calibrable(edge, f);
    if !report.marginal && report.max_abs_n < 1.0 - MARGINAL_BAND {
        return Err(CalibrateError::OffThreshold);
    }
    let profile = candidate_profile(edge, f);
    let mut pts: Vec<f64> = profile
        .breakpoints
        .iter()
        .zip(&profile.values)
        .skip(1)
        .take(profile.breakpoints.len().saturating_sub(2))
        .filter(|(_, v)| v.abs() >= 1.0 - MARGINAL_BAND)
        .map(|(x, _)| *x)
        .collect();
    pts.dedup_by(|a, b| (*a - *b).abs() < INTERFACE_TOL);
    if pts.is_empty() {
        return Err(CalibrateError::OffThreshold);
    }
    Ok(pts)
}
