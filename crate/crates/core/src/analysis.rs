//! Scenario studies on top of the sweep: procurement splits, control-shape
//! classification, rate and efficacy sensitivity grids, and the
//! single-vaccine versus two-vaccine infected comparison.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{trapezoid, ControlSchedule, TimeGrid};
use crate::model::{ControlPoint, ModelParams, StatePoint, COST_PER_EFFICACY};
use crate::sweep::{evaluate_schedule, run_sweep, Availability, SweepConfig, SweepResult};

/// Controls whose peak stays below this value never count as active.
pub const ACTIVITY_FLOOR: f64 = 1.0e-6;

/// Fraction of nodes at which both controls must be active for
/// [`ControlShape::SimultaneousThroughout`].
pub const SIMULTANEOUS_FRACTION: f64 = 0.95;

/// A fully specified optimization problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub label: String,
    pub params: ModelParams,
    pub x0: StatePoint,
    pub grid: TimeGrid,
    pub sweep: SweepConfig,
    /// When set, changing an efficacy also resets its cost weight to
    /// `theta_i * 1e4`. Cleared when costs are given explicitly.
    pub costs_follow_efficacy: bool,
}

impl Scenario {
    pub const DEFAULT_DT: f64 = 0.1;

    /// Published parameters and initial conditions for one efficacy pair.
    pub fn paper(theta1: f64, theta2: f64, horizon_days: f64) -> Result<Self> {
        Ok(Self {
            label: format!("theta1={theta1} theta2={theta2} T={horizon_days}"),
            params: ModelParams::paper(theta1, theta2, horizon_days),
            x0: StatePoint::paper_initial(),
            grid: TimeGrid::horizon(horizon_days, Self::DEFAULT_DT)?,
            sweep: SweepConfig::default(),
            costs_follow_efficacy: true,
        })
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.sweep.validate()?;
        if self.grid.t0 != 0.0 || self.grid.t_end != self.params.horizon_days {
            return Err(Error::Domain(format!(
                "grid [{}, {}] does not span the campaign [0, {}]",
                self.grid.t0, self.grid.t_end, self.params.horizon_days
            )));
        }
        if self.x0.n() <= 0.0 {
            return Err(Error::Singular { n: self.x0.n() });
        }
        self.x0.check_nonnegative(0.0)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Same scenario over a different campaign length, keeping the step size.
    pub fn with_horizon(&self, horizon_days: f64) -> Result<Self> {
        let mut s = self.clone();
        s.params.horizon_days = horizon_days;
        s.grid = TimeGrid::horizon(horizon_days, self.grid.dt)?;
        s.sweep.initial_guess = None;
        Ok(s)
    }

    pub fn with_efficacies(&self, theta1: f64, theta2: f64) -> Self {
        let mut s = self.clone();
        s.params.theta1 = theta1;
        s.params.theta2 = theta2;
        if s.costs_follow_efficacy {
            s.params.b1 = theta1 * COST_PER_EFFICACY;
            s.params.b2 = theta2 * COST_PER_EFFICACY;
        }
        s
    }

    pub fn with_availability(&self, availability: Availability) -> Self {
        let mut s = self.clone();
        s.sweep.availability = availability;
        s
    }

    pub fn solve(&self) -> Result<SweepResult> {
        self.validate()?;
        run_sweep(self.x0, &self.params, &self.grid, &self.sweep)
    }

    /// The campaign without vaccination, `u = 0`.
    pub fn uncontrolled(&self) -> Result<SweepResult> {
        self.validate()?;
        evaluate_schedule(
            self.x0,
            &self.params,
            ControlSchedule::constant(self.grid, ControlPoint::zero()),
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    /// A control is active where it exceeds this fraction of its own peak.
    pub activity_threshold: f64,
    /// Worker threads for grid cells; 0 uses all cores.
    pub parallelism: usize,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            activity_threshold: 0.05,
            parallelism: 0,
        }
    }
}

/// Purchase shares in percent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProcurementSplit {
    pub share_v1: f64,
    pub share_v2: f64,
}

/// Splits procurement in proportion to the time integrals of the two
/// vaccinated compartments.
pub fn procurement_split(result: &SweepResult) -> Result<ProcurementSplit> {
    let dt = result.grid().dt;
    let v1: Vec<f64> = result.states.values().iter().map(|x| x.v1).collect();
    let v2: Vec<f64> = result.states.values().iter().map(|x| x.v2).collect();
    let a1 = trapezoid(&v1, dt)?;
    let a2 = trapezoid(&v2, dt)?;
    let total = a1 + a2;
    if total.is_nan() || total <= 0.0 {
        return Err(Error::UndefinedSplit);
    }
    Ok(ProcurementSplit {
        share_v1: 100.0 * a1 / total,
        share_v2: 100.0 * a2 / total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControlShape {
    /// The second vaccine is never in use.
    V1Only,
    /// Both vaccines in use at nearly every node.
    SimultaneousThroughout,
    /// The first vaccine alone on an initial stretch, then both.
    V1ThenSimultaneous,
    Other,
}

impl ControlShape {
    pub fn as_str(self) -> &'static str {
        match self {
            ControlShape::V1Only => "v1-only",
            ControlShape::SimultaneousThroughout => "simultaneous-throughout",
            ControlShape::V1ThenSimultaneous => "v1-then-simultaneous",
            ControlShape::Other => "other",
        }
    }
}

impl std::fmt::Display for ControlShape {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Classification {
    pub shape: ControlShape,
    /// First day the second vaccine becomes active, for
    /// [`ControlShape::V1ThenSimultaneous`].
    pub crossover_day: Option<f64>,
}

fn activity(values: &[f64], threshold: f64) -> Vec<bool> {
    let peak = values.iter().copied().fold(0.0_f64, f64::max);
    if peak < ACTIVITY_FLOOR {
        return vec![false; values.len()];
    }
    values.iter().map(|&u| u > threshold * peak).collect()
}

fn fraction(flags: &[bool]) -> f64 {
    if flags.is_empty() {
        return 0.0;
    }
    flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64
}

/// Tags the shape of a control schedule from the relative activity of each
/// control.
pub fn classify_control(controls: &ControlSchedule, activity_threshold: f64) -> Classification {
    let u1: Vec<f64> = controls.values().iter().map(|u| u.u1).collect();
    let u2: Vec<f64> = controls.values().iter().map(|u| u.u2).collect();
    let a1 = activity(&u1, activity_threshold);
    let a2 = activity(&u2, activity_threshold);

    let plain = |shape| Classification {
        shape,
        crossover_day: None,
    };

    let Some(first) = a2.iter().position(|&b| b) else {
        return plain(ControlShape::V1Only);
    };
    let both: Vec<bool> = a1.iter().zip(&a2).map(|(&x, &y)| x && y).collect();
    if fraction(&both) >= SIMULTANEOUS_FRACTION {
        return plain(ControlShape::SimultaneousThroughout);
    }
    if first > 0 && fraction(&a1[..first]) > 0.5 && fraction(&a2[first..]) > 0.5 {
        return Classification {
            shape: ControlShape::V1ThenSimultaneous,
            crossover_day: Some(controls.grid().time(first)),
        };
    }
    plain(ControlShape::Other)
}

/// One optimized scenario inside a sensitivity study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityCell {
    pub label: String,
    pub params: ModelParams,
    pub result: SweepResult,
    pub classification: Classification,
    /// `None` when nobody was vaccinated.
    pub procurement: Option<ProcurementSplit>,
}

impl SensitivityCell {
    pub fn evaluate(label: String, scenario: &Scenario, opts: &AnalysisOptions) -> Result<Self> {
        let result = scenario.solve()?;
        if !result.converged {
            log::warn!("cell {label}: sweep did not converge in {} iterations", result.iterations);
        }
        let classification = classify_control(&result.controls, opts.activity_threshold);
        let procurement = match procurement_split(&result) {
            Ok(split) => Some(split),
            Err(Error::UndefinedSplit) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            label,
            params: scenario.params,
            result,
            classification,
            procurement,
        })
    }
}

fn run_cells(cells: Vec<(String, Scenario)>, opts: &AnalysisOptions) -> Result<Vec<SensitivityCell>> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    pool.install(|| {
        cells
            .into_par_iter()
            .map(|(label, scenario)| SensitivityCell::evaluate(label, &scenario, opts))
            .collect()
    })
}

/// Ordering of the immunity rates and of the return rates between the two
/// vaccines; the perturbation widens the stated gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatePattern {
    pub alpha1_greater: bool,
    pub eps1_greater: bool,
}

impl RatePattern {
    pub const ALL: [RatePattern; 4] = [
        RatePattern { alpha1_greater: true, eps1_greater: true },
        RatePattern { alpha1_greater: false, eps1_greater: false },
        RatePattern { alpha1_greater: true, eps1_greater: false },
        RatePattern { alpha1_greater: false, eps1_greater: true },
    ];

    fn label(self) -> String {
        let rel = |g| if g { '>' } else { '<' };
        format!(
            "alpha1{}alpha2 eps1{}eps2",
            rel(self.alpha1_greater),
            rel(self.eps1_greater)
        )
    }

    /// Scales one rate of each pair by `1 + change`. An increase applies to
    /// the rate that should end up larger, a decrease to the one that
    /// should end up smaller.
    pub fn apply(self, base: &ModelParams, change: f64) -> ModelParams {
        let mut p = *base;
        let factor = 1.0 + change;
        let up = change > 0.0;
        if self.alpha1_greater == up {
            p.alpha1 = base.alpha1 * factor;
        } else {
            p.alpha2 = base.alpha2 * factor;
        }
        if self.eps1_greater == up {
            p.eps1 = base.eps1 * factor;
        } else {
            p.eps2 = base.eps2 * factor;
        }
        p
    }
}

/// Relative changes of the immunity/return-rate grid, in grid row order.
pub const RATE_CHANGES: [f64; 4] = [0.10, 0.20, -0.10, -0.20];

fn rate_cell(base: &Scenario, pattern: RatePattern, change: f64) -> (String, Scenario) {
    let mut s = base.clone();
    s.params = pattern.apply(&base.params, change);
    let label = format!("{} {:+.0}%", pattern.label(), 100.0 * change);
    s.label = label.clone();
    (label, s)
}

/// The baseline followed by the 16 perturbed cells (4 rate orderings times
/// +10%, +20%, -10%, -20%).
pub fn rate_sensitivity_grid(base: &Scenario, opts: &AnalysisOptions) -> Result<Vec<SensitivityCell>> {
    base.validate()?;
    let mut cells = vec![("baseline".to_string(), base.clone())];
    for change in RATE_CHANGES {
        for pattern in RatePattern::ALL {
            cells.push(rate_cell(base, pattern, change));
        }
    }
    run_cells(cells, opts)
}

/// Cells at 19% and 20% reduction for the ordering `alpha1 > alpha2`,
/// `eps1 < eps2`, bracketing the reported shape change.
pub fn reduction_threshold_probe(base: &Scenario, opts: &AnalysisOptions) -> Result<Vec<SensitivityCell>> {
    base.validate()?;
    let pattern = RatePattern {
        alpha1_greater: true,
        eps1_greater: false,
    };
    let cells = [-0.19, -0.20]
        .into_iter()
        .map(|c| rate_cell(base, pattern, c))
        .collect();
    run_cells(cells, opts)
}

/// Which efficacy stays fixed during an efficacy sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FixedEfficacy {
    Theta1,
    Theta2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfficacySweep {
    pub fixed: FixedEfficacy,
    pub baseline: SensitivityCell,
    pub cells: Vec<SensitivityCell>,
    /// Values rejected because they violate `theta2 < theta1`.
    pub skipped: Vec<f64>,
    /// Last swept value (in sweep order) that keeps the baseline shape.
    pub last_unchanged: Option<f64>,
    /// First swept value whose shape differs from the baseline.
    pub first_changed: Option<f64>,
}

impl EfficacySweep {
    /// True if every cell after the first change also differs from the baseline.
    pub fn change_is_persistent(&self) -> bool {
        let base = self.baseline.classification.shape;
        match self.cells.iter().position(|c| c.classification.shape != base) {
            Some(k) => self.cells[k..].iter().all(|c| c.classification.shape != base),
            None => true,
        }
    }
}

/// Re-optimizes with the free efficacy set to each of `values` in turn and
/// reports where the control shape departs from the baseline.
pub fn efficacy_sensitivity_sweep(
    base: &Scenario,
    fixed: FixedEfficacy,
    values: &[f64],
    opts: &AnalysisOptions,
) -> Result<EfficacySweep> {
    base.validate()?;
    let mut skipped = Vec::new();
    let mut jobs = vec![("baseline".to_string(), base.clone())];
    for &v in values {
        let (t1, t2) = match fixed {
            FixedEfficacy::Theta2 => (v, base.params.theta2),
            FixedEfficacy::Theta1 => (base.params.theta1, v),
        };
        let s = base.with_efficacies(t1, t2);
        if let Err(e) = s.params.validate() {
            log::warn!("skipping efficacy value {v}: {e}");
            skipped.push(v);
            continue;
        }
        let label = match fixed {
            FixedEfficacy::Theta2 => format!("theta1={v}"),
            FixedEfficacy::Theta1 => format!("theta2={v}"),
        };
        jobs.push((label.clone(), s.with_label(label)));
    }
    let mut cells = run_cells(jobs, opts)?;
    let baseline = cells.remove(0);
    let base_shape = baseline.classification.shape;
    let swept: Vec<f64> = cells
        .iter()
        .map(|c| match fixed {
            FixedEfficacy::Theta2 => c.params.theta1,
            FixedEfficacy::Theta1 => c.params.theta2,
        })
        .collect();
    let change = cells
        .iter()
        .position(|c| c.classification.shape != base_shape);
    let (last_unchanged, first_changed) = match change {
        Some(0) => (None, Some(swept[0])),
        Some(k) => (Some(swept[k - 1]), Some(swept[k])),
        None => (swept.last().copied(), None),
    };
    Ok(EfficacySweep {
        fixed,
        baseline,
        cells,
        skipped,
        last_unchanged,
        first_changed,
    })
}

/// Vaccines available to the optimizer in the infected comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    OnlyV1,
    Both,
    OnlyV2,
    /// Diagnostic: both controls forced to zero.
    Neither,
}

impl Policy {
    pub fn availability(self) -> Availability {
        match self {
            Policy::OnlyV1 => Availability::OnlyV1,
            Policy::Both => Availability::Both,
            Policy::OnlyV2 => Availability::OnlyV2,
            Policy::Neither => Availability::Neither,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Policy::OnlyV1 => "only_v1",
            Policy::Both => "both",
            Policy::OnlyV2 => "only_v2",
            Policy::Neither => "neither",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyRun {
    pub policy: Policy,
    pub result: SweepResult,
    /// Trapezoidal integral of `I` over the campaign.
    pub cumulative_infected: f64,
}

impl PolicyRun {
    pub fn infected(&self) -> Vec<f64> {
        self.result.states.values().iter().map(|x| x.i).collect()
    }
}

/// Optimizes `base` with only the given vaccines available.
pub fn policy_run(base: &Scenario, policy: Policy) -> Result<PolicyRun> {
    let result = base.with_availability(policy.availability()).solve()?;
    let infected: Vec<f64> = result.states.values().iter().map(|x| x.i).collect();
    let cumulative_infected = trapezoid(&infected, result.grid().dt)?;
    Ok(PolicyRun {
        policy,
        result,
        cumulative_infected,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfectedComparison {
    pub runs: Vec<PolicyRun>,
}

impl InfectedComparison {
    pub fn get(&self, policy: Policy) -> Option<&PolicyRun> {
        self.runs.iter().find(|r| r.policy == policy)
    }
}

/// Optimized campaigns with only V1, with both vaccines, and with only V2.
pub fn infected_comparison(base: &Scenario, opts: &AnalysisOptions) -> Result<InfectedComparison> {
    base.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.parallelism)
        .build()
        .map_err(|e| Error::Usage(format!("cannot start worker pool: {e}")))?;
    let runs = pool.install(|| {
        [Policy::OnlyV1, Policy::Both, Policy::OnlyV2]
            .into_par_iter()
            .map(|policy| policy_run(base, policy))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(InfectedComparison { runs })
}
