mod common;

use common::{max_population_drift, vaccination_effort};
use proptest::prelude::*;
use seirv_core::{
    classify_control, efficacy_sensitivity_sweep, evaluate_schedule, policy_run,
    procurement_split, rate_sensitivity_grid, AdjointPoint, AnalysisOptions, ControlPoint,
    ControlSchedule, FixedEfficacy, ModelParams, Policy, Scenario, StatePoint, TimeGrid,
};

#[test]
fn forcing_both_controls_off_reproduces_the_uncontrolled_epidemic() {
    let s = Scenario::paper(0.74, 0.67, 60.0).unwrap();
    let forced = policy_run(&s, Policy::Neither).unwrap();
    let free = s.uncontrolled().unwrap();
    assert_eq!(forced.result.states, free.states);
    assert_eq!(forced.result.adjoints, free.adjoints);
    assert_eq!(forced.result.objective, free.objective);
}

#[test]
fn tenfold_costs_do_not_increase_vaccination_effort() {
    let s = Scenario::paper(0.74, 0.67, 60.0).unwrap();
    let mut dear = s.clone();
    dear.params.b1 *= 10.0;
    dear.params.b2 *= 10.0;
    dear.costs_follow_efficacy = false;
    let base = vaccination_effort(&s.solve().unwrap());
    let costly = vaccination_effort(&dear.solve().unwrap());
    assert!(costly <= 1.01 * base, "{costly} > {base}");
}

#[test]
fn every_rate_grid_cell_respects_the_invariants() {
    let s = Scenario::paper(0.74, 0.67, 60.0).unwrap();
    let cells = rate_sensitivity_grid(&s, &AnalysisOptions::default()).unwrap();
    assert_eq!(cells.len(), 17);
    assert_eq!(cells[0].label, "baseline");
    let mut labels: Vec<&str> = cells.iter().map(|c| c.label.as_str()).collect();
    labels.sort();
    labels.dedup();
    assert_eq!(labels.len(), 17);
    for c in &cells {
        let r = &c.result;
        assert!(r.controls.values().iter().all(ControlPoint::in_bounds), "{}", c.label);
        assert_eq!(r.adjoints.last(), AdjointPoint::zero(), "{}", c.label);
        assert!(max_population_drift(r) < 1e-9, "{}", c.label);
        let split = c.procurement.expect("vaccination happened");
        assert!((split.share_v1 + split.share_v2 - 100.0).abs() < 1e-9);
    }
}

#[test]
fn efficacy_sweep_skips_values_that_break_the_ordering() {
    let s = Scenario::paper(0.74, 0.67, 60.0).unwrap();
    let sweep = efficacy_sensitivity_sweep(
        &s,
        FixedEfficacy::Theta1,
        &[0.66, 0.74, 0.80],
        &AnalysisOptions::default(),
    )
    .unwrap();
    assert_eq!(sweep.skipped, vec![0.74, 0.80]);
    assert_eq!(sweep.cells.len(), 1);
    assert_eq!(sweep.cells[0].params.theta2, 0.66);
    assert_eq!(sweep.cells[0].params.b2, 0.66 * 1e4);
}

fn schedule_from(knots: &[(f64, f64)]) -> ControlSchedule {
    let grid = TimeGrid::horizon(60.0, 0.5).unwrap();
    let last = (knots.len() - 1) as f64;
    ControlSchedule::from_fn(grid, |t| {
        let k = ((t / 60.0) * last).round() as usize;
        ControlPoint::new(knots[k].0, knots[k].1)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn procurement_shares_sum_to_one_hundred(
        u1 in 0.0..=1.0f64, u2 in 0.0..=1.0f64, switch in 0.0..60.0f64,
        theta1 in 0.5..0.95f64, frac in 0.1..0.99f64,
    ) {
        prop_assume!(u1 + u2 > 0.0);
        let p = ModelParams::paper(theta1, theta1 * frac, 60.0);
        let grid = TimeGrid::horizon(60.0, 0.5).unwrap();
        let controls = ControlSchedule::from_fn(grid, |t| {
            if t < switch { ControlPoint::new(u1, 0.0) } else { ControlPoint::new(u1, u2) }
        });
        let r = evaluate_schedule(StatePoint::paper_initial(), &p, controls).unwrap();
        let split = procurement_split(&r).unwrap();
        prop_assert!(split.share_v1 >= 0.0 && split.share_v2 >= 0.0);
        prop_assert!((split.share_v1 + split.share_v2 - 100.0).abs() < 1e-9);
    }

    #[test]
    fn classification_ignores_the_units_of_each_control(
        knots in prop::collection::vec((0.0..=1.0f64, 0.0..=1.0f64), 2..12),
        k1 in -8i32..8, k2 in -8i32..8,
    ) {
        let base = schedule_from(&knots);
        // Powers of two keep the rescaling exact; stay clear of the activity floor.
        let peak = |f: fn(&ControlPoint) -> f64| base.values().iter().map(f).fold(0.0, f64::max);
        prop_assume!(peak(|u| u.u1) * 2f64.powi(k1.min(0)) > 1e-5 || peak(|u| u.u1) == 0.0);
        prop_assume!(peak(|u| u.u2) * 2f64.powi(k2.min(0)) > 1e-5 || peak(|u| u.u2) == 0.0);
        let scaled = base.map(|u| ControlPoint::new(u.u1 * 2f64.powi(k1), u.u2 * 2f64.powi(k2)));
        prop_assert_eq!(classify_control(&base, 0.05), classify_control(&scaled, 0.05));
    }
}
