//! Experiment orchestration: convergence sweeps, comparison-principle
//! checks, phase portraits, and trajectory output files.

use std::io::Write as _;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig};
use crate::flow_eff::{self, EffectiveLaw, RectTrajectoryEff};
use crate::flow_eps::{self, EpsTrajectory, FlowEpsError};
use crate::forcing::ForcingField;
use crate::geometry::{boundary_gap, contains, hausdorff_distance, Polyrectangle};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Flow(#[from] FlowEpsError),
    #[error("effective flow error: {0}")]
    Eff(#[from] flow_eff::FlowEffError),
    #[error("forcing error: {0}")]
    Forcing(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Builds a rayon pool honouring the CRYSTAL_FLOW_THREADS cap; falls back to
/// the global pool if a dedicated one cannot be built.
pub fn run_parallel<T: Send, F: Fn() -> T + Send>(f: F) -> T {
    let cap = std::env::var("CRYSTAL_FLOW_THREADS")
        .ok()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|&n| n > 0);
    match cap {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(f),
            Err(_) => f(),
        },
        None => f(),
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergeRow {
    pub epsilon: f64,
    pub sup_hausdorff: f64,
    pub bound: f64,
    pub within_bound: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConvergeReport {
    pub rows: Vec<ConvergeRow>,
    /// Log-log slope of error vs epsilon (empirical order).
    pub order: f64,
    pub monotone: bool,
    pub pass: bool,
}

/// Runs the oscillatory flow for each epsilon (snapped onto the calibrable
/// class first) against the effective flow of the same snapped datum and
/// reports sup-in-time Hausdorff errors. Using the snapped shape as the
/// common initial set isolates the homogenization error from the O(eps)
/// snap displacement, which otherwise can cancel it and spoil monotonicity.
pub fn converge_experiment(cfg: &ExperimentConfig) -> Result<ConvergeReport, HarnessError> {
    let shape = cfg.shape.to_polyrectangle()?;
    let law = EffectiveLaw::new(cfg.alpha, cfg.beta).map_err(|e| HarnessError::Forcing(e.to_string()))?;
    let rows: Vec<Result<ConvergeRow, HarnessError>> = run_parallel(|| {
        cfg.epsilons
            .par_iter()
            .map(|&eps| {
                let f = ForcingField::new(cfg.alpha, cfg.beta, eps)
                    .map_err(|e| HarnessError::Forcing(e.to_string()))?;
                let start = flow_eps::snap_to_c(&shape, &f)
                    .map_err(|e| HarnessError::Forcing(e.to_string()))?;
                let eff = flow_eff::poly_flow(&law, &start, cfg.t_max, cfg.dt, cfg.samples)?;
                let traj = flow_eps::eps_flow(
                    &f,
                    &start,
                    cfg.t_max,
                    cfg.dt,
                    cfg.samples,
                    cfg.branch_policy,
                )?;
                let mut sup: f64 = 0.0;
                for (t, s) in &traj.samples {
                    sup = sup.max(hausdorff_distance(s, eff.shape_at(*t)));
                }
                Ok(ConvergeRow {
                    epsilon: eps,
                    sup_hausdorff: sup,
                    bound: 3.0 * eps,
                    within_bound: sup <= 3.0 * eps,
                })
            })
            .collect()
    });
    let rows: Result<Vec<_>, _> = rows.into_iter().collect();
    let rows = rows?;
    let monotone = rows.windows(2).all(|w| w[1].sup_hausdorff <= w[0].sup_hausdorff + 1e-12);
    let order = if rows.len() >= 2 {
        let a = rows.first().unwrap();
        let b = rows.last().unwrap();
        ((a.sup_hausdorff.max(1e-300) / b.sup_hausdorff.max(1e-300)).ln())
            / ((a.epsilon / b.epsilon).ln())
    } else {
        f64::NAN
    };
    let pass = monotone && rows.iter().all(|r| r.within_bound);
    Ok(ConvergeReport {
        rows,
        order,
        monotone,
        pass,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareViolation {
    pub t: f64,
    pub what: String,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CompareReport {
    pub samples_checked: usize,
    pub initial_gap: f64,
    pub violations: Vec<CompareViolation>,
    pub pass: bool,
}

/// Runs the flows of two nested shapes under the same forcing and checks the
/// comparison principle: containment at every sample, the boundary gap never
/// drops below its initial value, and it never decreases by more than one
/// period between samples.
pub fn compare_experiment(cfg: &ExperimentConfig) -> Result<CompareReport, HarnessError> {
    let inner = cfg.shape.to_polyrectangle()?;
    let outer = cfg
        .outer_shape
        .as_ref()
        .ok_or_else(|| HarnessError::Forcing("compare experiment needs outer_shape".into()))?
        .to_polyrectangle()?;
    let eps = *cfg
        .epsilons
        .first()
        .ok_or_else(|| HarnessError::Forcing("compare experiment needs one epsilon".into()))?;
    let f = ForcingField::new(cfg.alpha, cfg.beta, eps)
        .map_err(|e| HarnessError::Forcing(e.to_string()))?;
    let inner = flow_eps::snap_to_c(&inner, &f).map_err(|e| HarnessError::Forcing(e.to_string()))?;
    let outer = flow_eps::snap_to_c(&outer, &f).map_err(|e| HarnessError::Forcing(e.to_string()))?;
    compare_pair(&f, &inner, &outer, cfg.t_max, cfg.dt, cfg.samples, cfg.branch_policy)
}

pub fn compare_pair(
    f: &ForcingField,
    inner: &Polyrectangle,
    outer: &Polyrectangle,
    t_max: f64,
    dt: f64,
    samples: usize,
    policy: flow_eps::BranchPolicy,
) -> Result<CompareReport, HarnessError> {
    let mut violations = Vec::new();
    if !contains(outer, inner) {
        violations.push(CompareViolation {
            t: 0.0,
            what: "initial shapes are not nested".into(),
        });
    }
    let ti = flow_eps::eps_flow(f, inner, t_max, dt, samples, policy)?;
    let to = flow_eps::eps_flow(f, outer, t_max, dt, samples, policy)?;
    let gap0 = boundary_gap(inner, outer);
    let mut checked = 0usize;
    let mut gaps: Vec<(f64, f64)> = Vec::new();
    for (t, si) in &ti.samples {
        // The inner flow may go extinct first; nothing to check afterwards.
        let so_opt = to.samples.iter().find(|(s, _)| (s - t).abs() < 1e-9);
        let Some((_, so)) = so_opt else { continue };
        checked += 1;
        if !contains(so, si) {
            violations.push(CompareViolation {
                t: *t,
                what: "containment violated".into(),
            });
            continue;
        }
        let g = boundary_gap(si, so);
        if g < gap0 - 1e-6 {
            violations.push(CompareViolation {
                t: *t,
                what: format!("gap {g} below initial gap {gap0}"),
            });
        }
        gaps.push((*t, g));
    }
    for w in gaps.windows(2) {
        let ((t1, g1), (_, g2)) = (w[0], w[1]);
        if g1 < g2 - f.epsilon - 1e-6 {
            violations.push(CompareViolation {
                t: t1,
                what: format!("gap decreased by more than one period: {g1} vs later {g2}"),
            });
        }
    }
    let pass = violations.is_empty();
    Ok(CompareReport {
        samples_checked: checked,
        initial_gap: gap0,
        violations,
        pass,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Extinction,
    PinnedThenExtinction,
    Equilibrium,
    Expansion,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PortraitRow {
    pub l1: f64,
    pub l2: f64,
    pub regime: Regime,
    pub extinction_time: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PortraitReport {
    pub rows: Vec<PortraitRow>,
}

fn classify(law: &EffectiveLaw, traj: &RectTrajectoryEff, l10: f64, l20: f64) -> Regime {
    let last = traj.samples.last().unwrap();
    if traj.extinction_time.is_some() {
        let pinned_phase = l20 > law.pinning_length()
            && traj
                .samples
                .iter()
                .take_while(|s| s.l2 > law.pinning_length())
                .all(|s| (s.l1 - l10).abs() < 1e-9);
        if pinned_phase && l20 > law.pinning_length() {
            Regime::PinnedThenExtinction
        } else {
            Regime::Extinction
        }
    } else if (last.l1 - l10).abs() < 1e-6 && (last.l2 - l20).abs() < 1e-6 {
        Regime::Equilibrium
    } else if last.l1 >= l10 && last.l2 >= l20 {
        Regime::Expansion
    } else {
        Regime::Extinction
    }
}

/// Sweeps a grid of initial rectangles under the effective law and
/// classifies the qualitative regime of each trajectory.
pub fn portrait_experiment(
    law: &EffectiveLaw,
    l1_grid: &[f64],
    l2_grid: &[f64],
    t_max: f64,
    dt: f64,
) -> Result<PortraitReport, HarnessError> {
    let cells: Vec<(f64, f64)> = l1_grid
        .iter()
        .flat_map(|&a| l2_grid.iter().map(move |&b| (a, b)))
        .collect();
    let rows: Vec<Result<PortraitRow, HarnessError>> = run_parallel(|| {
        cells
            .par_iter()
            .map(|&(l1, l2)| {
                let traj = flow_eff::rectangle_flow(law, l1, l2, t_max, dt)?;
                Ok(PortraitRow {
                    l1,
                    l2,
                    regime: classify(law, &traj, l1, l2),
                    extinction_time: traj.extinction_time,
                })
            })
            .collect()
    });
    let rows: Result<Vec<_>, _> = rows.into_iter().collect();
    Ok(PortraitReport { rows: rows? })
}

pub fn portrait_csv(report: &PortraitReport) -> String {
    let mut out = String::from("l1,l2,regime,extinction_time\n");
    for r in &report.rows {
        let regime = match r.regime {
            Regime::Extinction => "extinction",
            Regime::PinnedThenExtinction => "pinned_then_extinction",
            Regime::Equilibrium => "equilibrium",
            Regime::Expansion => "expansion",
        };
        let te = r
            .extinction_time
            .map(|t| format!("{t:.9}"))
            .unwrap_or_default();
        out.push_str(&format!("{:.9},{:.9},{},{}\n", r.l1, r.l2, regime, te));
    }
    out
}

/// Writes one JSON object per sampled state.
pub fn write_traj_jsonl(prefix: &str, traj: &EpsTrajectory) -> Result<(), HarnessError> {
    let path = format!("{prefix}.traj.jsonl");
    let mut file = std::fs::File::create(Path::new(&path))?;
    for (t, shape) in &traj.samples {
        let line = serde_json::to_string(&serde_json::json!({"t": t, "vertices": shape.vertices()}))?;
        writeln!(file, "{line}")?;
    }
    Ok(())
}

pub fn write_events_json(prefix: &str, traj: &EpsTrajectory) -> Result<(), HarnessError> {
    let path = format!("{prefix}.events.json");
    let text = serde_json::to_string_pretty(&traj.events)?;
    std::fs::write(path, text)?;
    Ok(())
}

/// CSV with t followed by per-edge lengths in canonical edge order.
pub fn traj_csv(traj: &EpsTrajectory) -> String {
    let mut out = String::from("t,edge_lengths...\n");
    for (t, shape) in &traj.samples {
        out.push_str(&format!("{t:.9}"));
        for e in shape.edges() {
            out.push_str(&format!(",{:.9}", e.length()));
        }
        out.push('\n');
    }
    out
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AgreementReport {
    pub total: usize,
    pub compared: usize,
    pub skipped_marginal: usize,
    pub disagreements: usize,
    pub agreement_rate: f64,
    pub pass: bool,
}

/// Randomized corpus comparing the analytic calibrability decision against
/// the discretized variational (taut-string) oracle. Marginal inputs are
/// excluded; everything else must agree exactly.
pub fn oracle_agreement(n_edges: usize, m_per_period: usize, seed: u64) -> AgreementReport {
    use rand::{Rng, SeedableRng};
    let cases: Vec<(f64, f64, f64, f64, f64, i8, i8)> = {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        (0..n_edges)
            .map(|_| {
                let alpha = -rng.gen_range(0.2..2.0);
                let beta = rng.gen_range(0.2..2.0);
                let eps = rng.gen_range(0.05..0.95) * 8.0 / (beta - alpha) * 0.99;
                let chi = *[-1i8, 0, 1].get(rng.gen_range(0..3)).unwrap();
                let n0 = if rng.gen_bool(0.5) { 1i8 } else { -1 };
                let p = rng.gen_range(-3.0..3.0) * eps;
                let ell = rng.gen_range(0.1..6.0) * eps;
                (alpha, beta, eps, p, ell, chi, n0)
            })
            .collect()
    };
    let results: Vec<Option<bool>> = run_parallel(|| {
        cases
            .par_iter()
            .map(|&(alpha, beta, eps, p, ell, chi, n0)| {
                let f = ForcingField::new(alpha, beta, eps).ok()?;
                let edge = crate::calibrate::HorizontalEdge { p, q: p + ell, chi, n0 };
                let rep = crate::calibrate::is_calibrable(&edge, &f);
                if rep.marginal {
                    return None;
                }
                let oracle = crate::oracle::is_calibrable_oracle(&edge, &f, m_per_period);
                Some(rep.calibrable == oracle)
            })
            .collect()
    });
    let compared = results.iter().filter(|r| r.is_some()).count();
    let disagreements = results.iter().filter(|r| **r == Some(false)).count();
    let rate = if compared > 0 {
        1.0 - disagreements as f64 / compared as f64
    } else {
        1.0
    };
    AgreementReport {
        total: n_edges,
        compared,
        skipped_marginal: n_edges - compared,
        disagreements,
        agreement_rate: rate,
        pass: disagreements == 0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentKind;
    use crate::flow_eps::BranchPolicy;

    #[test]
    fn oracle_agreement_small_corpus() {
        let rep = oracle_agreement(40, 200, 7);
        assert!(rep.pass, "{rep:?}");
        assert!(rep.compared > 10);
    }

    fn converge_cfg() -> ExperimentConfig {
        ExperimentConfig::from_json(
            r#"{
                "alpha": -1.0, "beta": 1.0, "kind": "converge",
                "shape": {"type": "rectangle", "l1": 1.5, "l2": 1.5},
                "epsilons": [0.2, 0.1], "t_max": 0.2, "samples": 21
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn converge_report_passes_on_standard_datum() {
        let cfg = converge_cfg();
        assert_eq!(cfg.kind, ExperimentKind::Converge);
        let rep = converge_experiment(&cfg).unwrap();
        assert!(rep.pass, "rows: {:?}", rep.rows);
        assert!(rep.order > 0.0);
    }

    #[test]
    fn nested_rectangles_stay_nested() {
        let f = ForcingField::new(-1.0, 1.0, 1.0).unwrap();
        let inner = flow_eps::snap_to_c(&Polyrectangle::centered(0.6, 1.5), &f).unwrap();
        let outer = flow_eps::snap_to_c(&Polyrectangle::centered(4.6, 3.5), &f).unwrap();
        let rep = compare_pair(&f, &inner, &outer, 0.05, 1e-3, 6, BranchPolicy::Cross).unwrap();
        assert!(rep.pass, "violations: {:?}", rep.violations);
        assert!(rep.samples_checked > 0);
    }

    #[test]
    fn identical_shapes_have_zero_gap_forever() {
        let f = ForcingField::new(-1.0, 1.0, 1.0).unwrap();
        let s = flow_eps::snap_to_c(&Polyrectangle::centered(2.6, 1.5), &f).unwrap();
        let rep = compare_pair(&f, &s, &s, 0.05, 1e-3, 6, BranchPolicy::Cross).unwrap();
        assert!(rep.pass);
        assert!(rep.initial_gap.abs() < 1e-12);
    }

    #[test]
    fn portrait_finds_equilibrium_half_line() {
        let law = EffectiveLaw::new(-2.0, 1.0).unwrap();
        let rep = portrait_experiment(&law, &[3.0, 4.0, 5.0], &[0.5, 1.0, 2.0, 5.0], 1.5, 1e-3)
            .unwrap();
        for r in &rep.rows {
            let want_eq = (r.l1 - 4.0).abs() < 1e-12 && r.l2 >= 1.0;
            assert_eq!(
                r.regime == Regime::Equilibrium,
                want_eq,
                "l1={} l2={} regime={:?}",
                r.l1,
                r.l2,
                r.regime
            );
        }
        let csv = portrait_csv(&rep);
        assert!(csv.lines().count() == rep.rows.len() + 1);
    }

    #[test]
    fn zero_mean_portrait_regimes() {
        let law = EffectiveLaw::new(-1.0, 1.0).unwrap();
        let rep = portrait_experiment(&law, &[1.5, 3.0], &[1.0, 3.0], 6.0, 1e-3).unwrap();
        for r in &rep.rows {
            assert!(r.extinction_time.is_some(), "l1={} l2={}", r.l1, r.l2);
            if r.l2 > 2.0 {
                assert_eq!(r.regime, Regime::PinnedThenExtinction);
            } else {
                assert_eq!(r.regime, Regime::Extinction);
            }
        }
    }
}
