//! Fixed-step RK4 on a uniform grid shared by the forward (state) and
//! backward (adjoint) passes.
//!
//! Stored trajectories are sampled at grid nodes only. RK4 half-step stages
//! take the midpoint of the two adjacent nodes, which is linear
//! interpolation evaluated at the half step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    adjoint_rhs, state_rhs, AdjointPoint, ControlPoint, ModelParams, StatePoint,
};

/// Uniform time grid `t0, t0 + dt, ..., t_end`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    pub n_steps: usize,
}

impl TimeGrid {
    /// Builds a grid with `round((t_end - t0) / dt)` steps. The stored `dt`
    /// is the span divided by the step count, so the last node is `t_end`.
    pub fn new(t0: f64, t_end: f64, dt: f64) -> Result<Self> {
        if !(t0.is_finite() && t_end.is_finite() && t_end > t0) {
            return Err(Error::Domain(format!(
                "time grid needs t_end > t0, got [{t0}, {t_end}]"
            )));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain(format!("step size must be positive, got {dt}")));
        }
        let span = t_end - t0;
        let n_steps = (span / dt).round().max(1.0) as usize;
        Ok(Self {
            t0,
            t_end,
            dt: span / n_steps as f64,
            n_steps,
        })
    }

    /// Grid on `[0, horizon]`.
    pub fn horizon(horizon_days: f64, dt: f64) -> Result<Self> {
        Self::new(0.0, horizon_days, dt)
    }

    /// Number of nodes, `n_steps + 1`.
    pub fn n_nodes(&self) -> usize {
        self.n_steps + 1
    }

    /// Time of node `k`.
    pub fn time(&self, k: usize) -> f64 {
        if k == self.n_steps {
            self.t_end
        } else {
            self.t0 + k as f64 * self.dt
        }
    }

    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_nodes()).map(|k| self.time(k))
    }
}

/// Values that can be linearly interpolated between grid nodes.
pub trait Lerp: Copy {
    fn lerp(&self, other: &Self, w: f64) -> Self;
}

fn lerp6(a: [f64; 6], b: [f64; 6], w: f64) -> [f64; 6] {
    std::array::from_fn(|j| a[j] + w * (b[j] - a[j]))
}

impl Lerp for StatePoint {
    fn lerp(&self, other: &Self, w: f64) -> Self {
        StatePoint::from_array(lerp6(self.to_array(), other.to_array(), w))
    }
}

impl Lerp for AdjointPoint {
    fn lerp(&self, other: &Self, w: f64) -> Self {
        AdjointPoint::from_array(lerp6(self.to_array(), other.to_array(), w))
    }
}

impl Lerp for ControlPoint {
    fn lerp(&self, other: &Self, w: f64) -> Self {
        ControlPoint::new(
            self.u1 + w * (other.u1 - self.u1),
            self.u2 + w * (other.u2 - self.u2),
        )
    }
}

impl Lerp for f64 {
    fn lerp(&self, other: &Self, w: f64) -> Self {
        self + w * (other - self)
    }
}

/// One value per grid node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory<P> {
    grid: TimeGrid,
    values: Vec<P>,
}

pub type StateTrajectory = Trajectory<StatePoint>;
pub type AdjointTrajectory = Trajectory<AdjointPoint>;
pub type ControlSchedule = Trajectory<ControlPoint>;

impl<P: Copy> Trajectory<P> {
    pub fn new(grid: TimeGrid, values: Vec<P>) -> Result<Self> {
        if values.len() != grid.n_nodes() {
            return Err(Error::Usage(format!(
                "trajectory has {} values but the grid has {} nodes",
                values.len(),
                grid.n_nodes()
            )));
        }
        Ok(Self { grid, values })
    }

    /// The same value at every node.
    pub fn constant(grid: TimeGrid, value: P) -> Self {
        Self {
            grid,
            values: vec![value; grid.n_nodes()],
        }
    }

    pub fn from_fn(grid: TimeGrid, mut f: impl FnMut(f64) -> P) -> Self {
        let values = grid.times().map(&mut f).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn values(&self) -> &[P] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Value at node `k`.
    pub fn at(&self, k: usize) -> P {
        self.values[k]
    }

    pub fn first(&self) -> P {
        self.values[0]
    }

    pub fn last(&self) -> P {
        self.values[self.values.len() - 1]
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, &P)> + '_ {
        self.grid.times().zip(self.values.iter())
    }

    pub fn map<Q: Copy>(&self, f: impl FnMut(&P) -> Q) -> Trajectory<Q> {
        Trajectory {
            grid: self.grid,
            values: self.values.iter().map(f).collect(),
        }
    }

    pub fn into_values(self) -> Vec<P> {
        self.values
    }

    pub(crate) fn same_grid<Q>(&self, other: &Trajectory<Q>, what: &str) -> Result<()> {
        if self.grid != other.grid || self.values.len() != other.values.len() {
            return Err(Error::Usage(format!("{what}: trajectories are on different grids")));
        }
        Ok(())
    }
}

impl<P: Lerp> Trajectory<P> {
    /// Linear interpolation at time `t`. Grid nodes return the stored value.
    pub fn interpolate(&self, t: f64) -> P {
        let g = &self.grid;
        if t <= g.t0 {
            return self.values[0];
        }
        if t >= g.t_end {
            return self.last();
        }
        let pos = (t - g.t0) / g.dt;
        let nearest = pos.round();
        if (pos - nearest).abs() < 1e-9 {
            return self.values[(nearest as usize).min(g.n_steps)];
        }
        let k = (pos.floor() as usize).min(g.n_steps - 1);
        self.values[k].lerp(&self.values[k + 1], pos - k as f64)
    }
}

/// One classical RK4 step of size `h` from `y`. The three contexts are
/// passed to `f` at the start, middle and end of the step.
pub fn rk4_step<const D: usize, C>(
    y: &[f64; D],
    h: f64,
    ctx: [&C; 3],
    f: impl Fn(&[f64; D], &C) -> Result<[f64; D]>,
) -> Result<[f64; D]> {
    let shift = |base: &[f64; D], k: &[f64; D], s: f64| -> [f64; D] {
        std::array::from_fn(|j| base[j] + s * k[j])
    };
    let k1 = f(y, ctx[0])?;
    let k2 = f(&shift(y, &k1, 0.5 * h), ctx[1])?;
    let k3 = f(&shift(y, &k2, 0.5 * h), ctx[1])?;
    let k4 = f(&shift(y, &k3, h), ctx[2])?;
    Ok(std::array::from_fn(|j| {
        y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    }))
}

/// Integrates the state system forward from `x0` under the given controls.
pub fn integrate_forward(
    x0: StatePoint,
    controls: &ControlSchedule,
    p: &ModelParams,
    grid: &TimeGrid,
) -> Result<StateTrajectory> {
    if controls.grid() != grid {
        return Err(Error::Usage(
            "controls are not defined on the integration grid".into(),
        ));
    }
    x0.check_nonnegative(grid.t0)?;
    let h = grid.dt;
    let mut values = Vec::with_capacity(grid.n_nodes());
    values.push(x0);
    let mut y = x0.to_array();
    for k in 0..grid.n_steps {
        let t = grid.time(k);
        let u0 = controls.at(k);
        let u1 = controls.at(k + 1);
        let um = u0.lerp(&u1, 0.5);
        let stages = [(t, u0), (t + 0.5 * h, um), (t + h, u1)];
        y = rk4_step(&y, h, [&stages[0], &stages[1], &stages[2]], |y, (t, u)| {
            state_rhs(*t, &StatePoint::from_array(*y), u, p).map(StatePoint::to_array)
        })?;
        let x = StatePoint::from_array(y);
        x.check_nonnegative(grid.time(k + 1))?;
        values.push(x);
    }
    Ok(Trajectory {
        grid: *grid,
        values,
    })
}

/// Integrates the adjoint system backward from `lam_t` at `t_end` along the
/// stored state trajectory.
pub fn integrate_backward(
    lam_t: AdjointPoint,
    states: &StateTrajectory,
    controls: &ControlSchedule,
    p: &ModelParams,
    grid: &TimeGrid,
) -> Result<AdjointTrajectory> {
    if states.grid() != grid || controls.grid() != grid {
        return Err(Error::Usage(
            "states and controls must share the integration grid".into(),
        ));
    }
    let h = -grid.dt;
    let mut values = vec![AdjointPoint::zero(); grid.n_nodes()];
    values[grid.n_steps] = lam_t;
    let mut y = lam_t.to_array();
    for k in (1..=grid.n_steps).rev() {
        let t = grid.time(k);
        let start = (t, states.at(k), controls.at(k));
        let mid = (
            t + 0.5 * h,
            states.at(k).lerp(&states.at(k - 1), 0.5),
            controls.at(k).lerp(&controls.at(k - 1), 0.5),
        );
        let end = (t + h, states.at(k - 1), controls.at(k - 1));
        y = rk4_step(&y, h, [&start, &mid, &end], |y, (t, x, u)| {
            adjoint_rhs(*t, &AdjointPoint::from_array(*y), x, u, p).map(AdjointPoint::to_array)
        })?;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: "adjoint",
                t: grid.time(k - 1),
            });
        }
        values[k - 1] = AdjointPoint::from_array(y);
    }
    Ok(Trajectory {
        grid: *grid,
        values,
    })
}

/// Composite trapezoidal rule over uniformly spaced samples.
pub fn trapezoid(values: &[f64], dt: f64) -> Result<f64> {
    if values.len() < 2 {
        return Err(Error::Usage(format!(
            "trapezoid needs at least 2 samples, got {}",
            values.len()
        )));
    }
    let interior: f64 = values[1..values.len() - 1].iter().sum();
    let ends = 0.5 * (values[0] + values[values.len() - 1]);
    Ok(dt * (ends + interior))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_construction() {
        let g = TimeGrid::horizon(60.0, 0.1).unwrap();
        assert_eq!(g.n_steps, 600);
        assert_eq!(g.n_nodes(), 601);
        assert_eq!(g.time(0), 0.0);
        assert_eq!(g.time(600), 60.0);
        assert!(TimeGrid::new(1.0, 1.0, 0.1).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 0.0).is_err());
        assert!(TimeGrid::new(0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn grid_with_non_dividing_step_ends_at_t_end() {
        let g = TimeGrid::new(0.0, 1.0, 0.3).unwrap();
        assert_eq!(g.n_steps, 3);
        assert_eq!(g.time(3), 1.0);
        assert!((g.dt - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn trapezoid_examples() {
        assert_eq!(trapezoid(&[0.0, 0.0, 0.0], 1.0).unwrap(), 0.0);
        assert_eq!(trapezoid(&[1.0, 1.0, 1.0, 1.0], 1.0).unwrap(), 3.0);
        assert_eq!(trapezoid(&[0.0, 1.0, 2.0], 0.5).unwrap(), 1.0);
        assert!(matches!(trapezoid(&[1.0], 1.0), Err(Error::Usage(_))));
        assert!(trapezoid(&[], 1.0).is_err());
    }

    #[test]
    fn interpolation_is_exact_at_nodes() {
        let g = TimeGrid::horizon(1.0, 0.1).unwrap();
        let tr = Trajectory::from_fn(g, |t| t * t);
        for (k, t) in g.times().enumerate() {
            assert_eq!(tr.interpolate(t), tr.at(k));
        }
        let mid = tr.interpolate(0.05);
        assert!((mid - 0.5 * (0.0 + tr.at(1))).abs() < 1e-15);
    }

    #[test]
    fn trajectory_length_must_match_grid() {
        let g = TimeGrid::horizon(1.0, 0.5).unwrap();
        assert!(Trajectory::new(g, vec![0.0; 2]).is_err());
        assert!(Trajectory::new(g, vec![0.0; 3]).is_ok());
    }

    #[test]
    fn backward_rejects_grid_mismatch() {
        let p = ModelParams::paper(0.91, 0.51, 10.0);
        let g = TimeGrid::horizon(10.0, 0.1).unwrap();
        let other = TimeGrid::horizon(10.0, 0.2).unwrap();
        let u = ControlSchedule::constant(g, ControlPoint::zero());
        let x = integrate_forward(StatePoint::paper_initial(), &u, &p, &g).unwrap();
        let bad_u = ControlSchedule::constant(other, ControlPoint::zero());
        assert!(matches!(
            integrate_backward(AdjointPoint::zero(), &x, &bad_u, &p, &g),
            Err(Error::Usage(_))
        ));
        assert!(integrate_forward(StatePoint::paper_initial(), &bad_u, &p, &g).is_err());
    }

    #[test]
    fn forward_reports_negativity_time() {
        // A huge recovery rate overshoots with a coarse step.
        let mut p = ModelParams::paper(0.91, 0.51, 10.0);
        p.gamma = 50.0;
        let g = TimeGrid::horizon(10.0, 0.5).unwrap();
        let u = ControlSchedule::constant(g, ControlPoint::zero());
        match integrate_forward(StatePoint::paper_initial(), &u, &p, &g) {
            Err(Error::Negativity { t, .. }) => assert!(t > 0.0),
            Err(Error::NonFinite { .. }) => {}
            other => panic!("expected a negativity abort, got {other:?}"),
        }
    }
}
