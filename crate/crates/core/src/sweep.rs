//! Forward-backward sweep for the two-vaccine control problem.
//!
//! Each iteration integrates the state forward under the current controls,
//! integrates the adjoints backward from the zero terminal condition, maps
//! the result through the clamped optimality condition and mixes the
//! candidate with the previous controls.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrate::{
    integrate_backward, integrate_forward, trapezoid, AdjointTrajectory, ControlSchedule,
    StateTrajectory, TimeGrid, Trajectory,
};
use crate::model::{objective_integrand, AdjointPoint, ControlPoint, ModelParams, StatePoint};

/// Below this L1 mass a control is treated as identically zero by the
/// convergence test, which then falls back to an absolute criterion.
const ZERO_MASS: f64 = 1.0e-12;

/// Which vaccines the optimizer may use. Excluded controls are held at zero
/// in every iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Availability {
    #[default]
    Both,
    OnlyV1,
    OnlyV2,
    Neither,
}

impl Availability {
    pub fn allows_v1(self) -> bool {
        matches!(self, Availability::Both | Availability::OnlyV1)
    }

    pub fn allows_v2(self) -> bool {
        matches!(self, Availability::Both | Availability::OnlyV2)
    }

    fn mask(self, u: ControlPoint) -> ControlPoint {
        ControlPoint::new(
            if self.allows_v1() { u.u1 } else { 0.0 },
            if self.allows_v2() { u.u2 } else { 0.0 },
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub max_iterations: usize,
    /// Relative L1 tolerance on successive control iterates.
    pub convergence_tol: f64,
    /// Weight of the new candidate when mixing with the previous controls.
    pub relaxation: f64,
    /// Starting controls; `None` means `u = 0`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_guess: Option<ControlSchedule>,
    #[serde(default)]
    pub availability: Availability,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            convergence_tol: 1.0e-6,
            relaxation: 0.5,
            initial_guess: None,
            availability: Availability::Both,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(Error::Domain("max_iterations must be at least 1".into()));
        }
        if !(self.convergence_tol.is_finite() && self.convergence_tol > 0.0) {
            return Err(Error::Domain(format!(
                "convergence_tol must be positive, got {}",
                self.convergence_tol
            )));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 1.0) {
            return Err(Error::Domain(format!(
                "relaxation must lie in (0, 1], got {}",
                self.relaxation
            )));
        }
        if let Some(guess) = &self.initial_guess {
            if !guess.values().iter().all(ControlPoint::in_bounds) {
                return Err(Error::Domain(
                    "initial guess must lie in [0, 1] at every node".into(),
                ));
            }
        }
        Ok(())
    }
}

/// Output of one optimization. States and adjoints are integrated under the
/// returned controls, and `objective` is evaluated on them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub states: StateTrajectory,
    pub adjoints: AdjointTrajectory,
    pub controls: ControlSchedule,
    pub objective: f64,
    pub iterations: usize,
    pub converged: bool,
}

impl SweepResult {
    pub fn grid(&self) -> &TimeGrid {
        self.states.grid()
    }

    /// `dH/du_i = 2 b_i u_i + S (lambda_Vi - lambda_S)` at node `k`.
    pub fn control_gradient(&self, k: usize, p: &ModelParams) -> (f64, f64) {
        let x = self.states.at(k);
        let l = self.adjoints.at(k);
        let u = self.controls.at(k);
        (
            2.0 * p.b1 * u.u1 + x.s * (l.l_v1 - l.l_s),
            2.0 * p.b2 * u.u2 + x.s * (l.l_v2 - l.l_s),
        )
    }
}

/// Clamped stationarity condition of the Hamiltonian, node by node:
/// `u_i = min(1, max(0, S (lambda_S - lambda_Vi) / (2 b_i)))`.
pub fn optimality_update(
    states: &StateTrajectory,
    adjoints: &AdjointTrajectory,
    p: &ModelParams,
) -> Result<ControlSchedule> {
    states.same_grid(adjoints, "optimality update")?;
    let values = states
        .values()
        .iter()
        .zip(adjoints.values())
        .map(|(x, l)| {
            let raw1 = x.s * (l.l_s - l.l_v1) / (2.0 * p.b1);
            let raw2 = x.s * (l.l_s - l.l_v2) / (2.0 * p.b2);
            ControlPoint::new(raw1.clamp(0.0, 1.0), raw2.clamp(0.0, 1.0))
        })
        .collect::<Vec<_>>();
    if let Some(k) = values
        .iter()
        .position(|u| !(u.u1.is_finite() && u.u2.is_finite()))
    {
        return Err(Error::NonFinite {
            context: "control update",
            t: states.grid().time(k),
        });
    }
    Trajectory::new(*states.grid(), values)
}

/// Trapezoidal integral of the running cost over the grid.
pub fn evaluate_objective(
    states: &StateTrajectory,
    controls: &ControlSchedule,
    p: &ModelParams,
) -> Result<f64> {
    states.same_grid(controls, "objective")?;
    let integrand: Vec<f64> = states
        .values()
        .iter()
        .zip(controls.values())
        .map(|(x, u)| objective_integrand(x, u, p))
        .collect();
    trapezoid(&integrand, states.grid().dt)
}

/// Integrates states and adjoints under a fixed schedule, without optimizing.
pub fn evaluate_schedule(
    x0: StatePoint,
    p: &ModelParams,
    controls: ControlSchedule,
) -> Result<SweepResult> {
    let grid = *controls.grid();
    let states = integrate_forward(x0, &controls, p, &grid)?;
    let adjoints = integrate_backward(AdjointPoint::zero(), &states, &controls, p, &grid)?;
    let objective = evaluate_objective(&states, &controls, p)?;
    Ok(SweepResult {
        states,
        adjoints,
        controls,
        objective,
        iterations: 0,
        converged: true,
    })
}

fn l1_change(new: &ControlSchedule, old: &ControlSchedule, pick: fn(&ControlPoint) -> f64) -> (f64, f64) {
    let diff = new
        .values()
        .iter()
        .zip(old.values())
        .map(|(a, b)| (pick(a) - pick(b)).abs())
        .sum();
    let mass = new.values().iter().map(|a| pick(a).abs()).sum();
    (diff, mass)
}

fn has_converged(new: &ControlSchedule, old: &ControlSchedule, tol: f64) -> bool {
    [|u: &ControlPoint| u.u1, |u: &ControlPoint| u.u2]
        .into_iter()
        .all(|pick| {
            let (diff, mass) = l1_change(new, old, pick);
            if mass < ZERO_MASS {
                diff <= tol
            } else {
                diff <= tol * mass
            }
        })
}

/// Runs the forward-backward sweep until the controls settle or the
/// iteration budget is spent.
///
/// Once the relative L1 change of both controls drops below the tolerance,
/// the controls are replaced by the unrelaxed optimality map of the last
/// sweep, so saturated nodes sit exactly on their bounds, and states and
/// adjoints are integrated once more under them. Running out of iterations
/// is reported through `converged = false`, not as an error.
pub fn run_sweep(
    x0: StatePoint,
    p: &ModelParams,
    grid: &TimeGrid,
    cfg: &SweepConfig,
) -> Result<SweepResult> {
    cfg.validate()?;
    let mask = cfg.availability;
    let mut controls = match &cfg.initial_guess {
        Some(guess) => {
            if guess.grid() != grid {
                return Err(Error::Usage(
                    "initial guess is not defined on the sweep grid".into(),
                ));
            }
            guess.map(|u| mask.mask(*u))
        }
        None => ControlSchedule::constant(*grid, ControlPoint::zero()),
    };

    let w = cfg.relaxation;
    let mut converged = false;
    let mut iterations = 0;
    let mut candidate = controls.clone();
    while iterations < cfg.max_iterations {
        iterations += 1;
        let states = integrate_forward(x0, &controls, p, grid)?;
        let adjoints = integrate_backward(AdjointPoint::zero(), &states, &controls, p, grid)?;
        candidate = optimality_update(&states, &adjoints, p)?.map(|u| mask.mask(*u));
        let mixed = Trajectory::new(
            *grid,
            candidate
                .values()
                .iter()
                .zip(controls.values())
                .map(|(c, old)| {
                    ControlPoint::new(
                        (w * c.u1 + (1.0 - w) * old.u1).clamp(0.0, 1.0),
                        (w * c.u2 + (1.0 - w) * old.u2).clamp(0.0, 1.0),
                    )
                })
                .collect(),
        )?;
        converged = has_converged(&mixed, &controls, cfg.convergence_tol);
        controls = mixed;
        if converged {
            break;
        }
    }
    if converged {
        controls = candidate;
    } else {
        log::debug!(
            "sweep stopped after {} iterations without meeting tol {}",
            iterations,
            cfg.convergence_tol
        );
    }

    let mut result = evaluate_schedule(x0, p, controls)?;
    result.iterations = iterations;
    result.converged = converged;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid60() -> TimeGrid {
        TimeGrid::horizon(60.0, 0.1).unwrap()
    }

    #[test]
    fn equal_costates_give_zero_control() {
        let g = grid60();
        let p = ModelParams::paper(0.91, 0.51, 60.0);
        let x = StateTrajectory::constant(g, StatePoint::paper_initial());
        let l = AdjointTrajectory::constant(
            g,
            AdjointPoint {
                l_s: 3.0,
                l_v1: 3.0,
                l_v2: 3.0,
                ..AdjointPoint::zero()
            },
        );
        let u = optimality_update(&x, &l, &p).unwrap();
        assert!(u.values().iter().all(|u| u.u1 == 0.0 && u.u2 == 0.0));
    }

    #[test]
    fn optimality_update_examples() {
        let g = TimeGrid::horizon(1.0, 1.0).unwrap();
        let p = ModelParams::paper(0.91, 0.51, 1.0);
        let x = StateTrajectory::constant(g, StatePoint::new(1.0e6, 0.0, 0.0, 0.0, 0.0, 0.0));

        // S (lambda_S - lambda_V1) = 2 b1 exactly.
        let l = AdjointTrajectory::constant(
            g,
            AdjointPoint {
                l_s: 2.0 * p.b1 / 1.0e6,
                ..AdjointPoint::zero()
            },
        );
        assert_eq!(optimality_update(&x, &l, &p).unwrap().at(0).u1, 1.0);

        let l = AdjointTrajectory::constant(
            g,
            AdjointPoint {
                l_s: 0.01,
                ..AdjointPoint::zero()
            },
        );
        let u = optimality_update(&x, &l, &p).unwrap().at(0);
        // 1e6 * 0.01 / (2 * 9100)
        assert!((u.u1 - 10_000.0 / 18_200.0).abs() < 1e-12);
        assert!((u.u1 - 0.5495).abs() < 1e-4);

        let l = AdjointTrajectory::constant(
            g,
            AdjointPoint {
                l_s: -1.0,
                ..AdjointPoint::zero()
            },
        );
        assert_eq!(optimality_update(&x, &l, &p).unwrap().at(0).u2, 0.0);
    }

    #[test]
    fn objective_examples() {
        let g = grid60();
        let p = ModelParams::paper(0.91, 0.51, 60.0);
        let healthy = StateTrajectory::constant(g, StatePoint::new(1.0, 0.0, 0.0, 0.0, 0.0, 0.0));
        let zero = ControlSchedule::constant(g, ControlPoint::zero());
        assert_eq!(evaluate_objective(&healthy, &zero, &p).unwrap(), 0.0);

        let one_infected = StateTrajectory::constant(g, StatePoint::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0));
        let j = evaluate_objective(&one_infected, &zero, &p).unwrap();
        assert!((j - 60.0).abs() < 1e-9);

        let v1 = ControlSchedule::constant(g, ControlPoint::new(1.0, 0.0));
        let j = evaluate_objective(&healthy, &v1, &p).unwrap();
        assert!((j - 546_000.0).abs() < 1e-6);
    }

    #[test]
    fn config_validation() {
        assert!(SweepConfig::default().validate().is_ok());
        let bad = [
            SweepConfig {
                max_iterations: 0,
                ..Default::default()
            },
            SweepConfig {
                convergence_tol: 0.0,
                ..Default::default()
            },
            SweepConfig {
                relaxation: 0.0,
                ..Default::default()
            },
            SweepConfig {
                relaxation: 1.5,
                ..Default::default()
            },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn convergence_uses_absolute_fallback_for_zero_controls() {
        let g = TimeGrid::horizon(1.0, 0.5).unwrap();
        let zero = ControlSchedule::constant(g, ControlPoint::zero());
        assert!(has_converged(&zero, &zero, 1e-3));
        let tiny = ControlSchedule::constant(g, ControlPoint::new(1e-14, 0.0));
        assert!(has_converged(&tiny, &zero, 1e-3));
        let small = ControlSchedule::constant(g, ControlPoint::new(0.1, 0.0));
        assert!(!has_converged(&small, &zero, 1e-3));
    }

    #[test]
    fn non_convergence_is_reported_not_raised() {
        let p = ModelParams::paper(0.91, 0.74, 20.0);
        let g = TimeGrid::horizon(20.0, 0.1).unwrap();
        let cfg = SweepConfig {
            max_iterations: 2,
            convergence_tol: 1e-12,
            ..Default::default()
        };
        let r = run_sweep(StatePoint::paper_initial(), &p, &g, &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 2);
    }

    #[test]
    fn masked_controls_stay_zero() {
        let p = ModelParams::paper(0.74, 0.67, 20.0);
        let g = TimeGrid::horizon(20.0, 0.1).unwrap();
        for availability in [Availability::OnlyV1, Availability::OnlyV2, Availability::Neither] {
            let cfg = SweepConfig {
                availability,
                ..Default::default()
            };
            let r = run_sweep(StatePoint::paper_initial(), &p, &g, &cfg).unwrap();
            for u in r.controls.values() {
                if !availability.allows_v1() {
                    assert_eq!(u.u1, 0.0);
                }
                if !availability.allows_v2() {
                    assert_eq!(u.u2, 0.0);
                }
            }
        }
    }
}
