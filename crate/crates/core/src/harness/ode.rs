use super::config::{ExperimentConfig, OdeVariantKind};
use crate::dynamics::{
    find_rest_point, integrate, perturb, start_state, Classification, OdeStart, OdeSystem, RestPointOptions, RestPointReport,
    StepControl, Trajectory, Variant,
};
use crate::error::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct ReturnCheck {
    pub perturbation: f64,
    pub t_end: f64,
    /// Policy-space sup distance from the rest point at `t_end`.
    pub final_distance: f64,
    pub trajectory: Trajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeRun {
    pub start: OdeStart,
    pub report: RestPointReport,
    /// Present for attractors only.
    pub return_check: Option<ReturnCheck>,
}

pub fn ode_system(cfg: &ExperimentConfig) -> Result<OdeSystem> {
    let variant = match cfg.ode.variant {
        OdeVariantKind::QValues => Variant::QValues,
        OdeVariantKind::Policy => Variant::Policy,
    };
    OdeSystem::new(cfg.grid()?, cfg.bias()?, cfg.ode.tau, cfg.ode.epsilon, variant)
}

/// Named starts followed by `random_starts` random ones seeded `seed + i`.
pub fn ode_starts(cfg: &ExperimentConfig) -> Result<Vec<OdeStart>> {
    let mut out = cfg.ode.starts.iter().map(|s| s.parse()).collect::<Result<Vec<OdeStart>>>()?;
    out.extend((0..cfg.ode.random_starts as u64).map(|i| OdeStart::Random(cfg.seed.wrapping_add(i))));
    Ok(out)
}

/// Integrates from a perturbation of `point` and measures how far the policy
/// ends from the rest point's policy.
pub fn return_check(sys: &OdeSystem, point: &RestPointReport, size: f64, t_end: f64, h: f64, seed: u64) -> Result<ReturnCheck> {
    let start = perturb(sys, &point.point, size, seed);
    let ctl = StepControl { h, sample_every: 1.0, ..StepControl::default() };
    let trajectory = integrate(sys, &start, t_end, &ctl)?;
    let target = sys.as_policy(&point.point);
    let final_distance = sys.as_policy(trajectory.last()).sup_distance(&target);
    Ok(ReturnCheck { perturbation: size, t_end, final_distance, trajectory })
}

pub fn analyze_start(sys: &OdeSystem, start: OdeStart, cfg: &ExperimentConfig) -> Result<OdeRun> {
    let s0 = start_state(sys, start)?;
    let report = find_rest_point(sys, &s0, &RestPointOptions::default())?;
    let return_check = if report.classification == Classification::Attractor {
        Some(return_check(sys, &report, cfg.ode.perturbation, cfg.ode.t_end, cfg.ode.h, cfg.seed)?)
    } else {
        None
    };
    Ok(OdeRun { start, report, return_check })
}

/// Rest-point search, classification and, for attractors, a perturbation
/// return check from every configured start.
pub fn run_ode_analysis(cfg: &ExperimentConfig) -> Result<Vec<OdeRun>> {
    let sys = ode_system(cfg)?;
    ode_starts(cfg)?.into_iter().map(|start| analyze_start(&sys, start, cfg)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn starts_from_config() {
        let mut cfg = ExperimentConfig::default();
        cfg.seed = 10;
        cfg.ode.random_starts = 2;
        assert_eq!(
            ode_starts(&cfg).unwrap(),
            vec![OdeStart::Babbling, OdeStart::WorstCase, OdeStart::Random(10), OdeStart::Random(11)]
        );
        cfg.ode.starts = vec!["nowhere".into()];
        assert!(ode_starts(&cfg).is_err());
    }

    #[test]
    fn small_grid_analysis_runs() {
        let mut cfg = ExperimentConfig::default();
        cfg.k = 3;
        cfg.ode.starts = vec!["babbling".into()];
        let runs = run_ode_analysis(&cfg).unwrap();
        assert_eq!(runs.len(), 1);
        assert!(runs[0].report.settled);
    }
}
