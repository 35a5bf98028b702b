#![allow(dead_code)]

use seirv_core::{ModelParams, Scenario, SweepResult, TransmissionRule};

pub const PAIRS: [(f64, f64); 6] = [
    (0.91, 0.74),
    (0.91, 0.67),
    (0.91, 0.51),
    (0.74, 0.67),
    (0.74, 0.51),
    (0.67, 0.51),
];

pub const HORIZONS: [f64; 3] = [60.0, 120.0, 180.0];

/// Parameter sets tried in order for the published-figure checks: the
/// default model, the same with beta = 0.485, then the complement rule for
/// the vaccinated transmission rates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Primary,
    Beta0485,
    Complement,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Primary, Variant::Beta0485, Variant::Complement];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Primary => "primary (beta=0.45, beta_i=beta(1-theta_i))",
            Variant::Beta0485 => "secondary (beta=0.485)",
            Variant::Complement => "secondary (beta_i=1-theta_i)",
        }
    }

    pub fn apply(self, mut s: Scenario) -> Scenario {
        match self {
            Variant::Primary => {}
            Variant::Beta0485 => s.params.beta = 0.485,
            Variant::Complement => s.params.transmission = TransmissionRule::Complement,
        }
        s
    }

    pub fn scenario(self, theta1: f64, theta2: f64, horizon: f64) -> Scenario {
        self.apply(Scenario::paper(theta1, theta2, horizon).unwrap())
    }
}

pub fn max_population_drift(r: &SweepResult) -> f64 {
    let n0 = r.states.first().n();
    r.states
        .values()
        .iter()
        .map(|x| (x.n() - n0).abs() / n0)
        .fold(0.0, f64::max)
}

/// Total vaccination effort `sum_i int u_i S dt`.
pub fn vaccination_effort(r: &SweepResult) -> f64 {
    let dt = r.grid().dt;
    let f: Vec<f64> = r
        .states
        .values()
        .iter()
        .zip(r.controls.values())
        .map(|(x, u)| (u.u1 + u.u2) * x.s)
        .collect();
    seirv_core::trapezoid(&f, dt).unwrap()
}

pub fn integral_of(values: impl Iterator<Item = f64>, dt: f64) -> f64 {
    let v: Vec<f64> = values.collect();
    seirv_core::trapezoid(&v, dt).unwrap()
}

/// Hamiltonian written out term by term, independent of the crate's version.
pub fn reference_hamiltonian(x: [f64; 6], l: [f64; 6], u: [f64; 2], p: &ModelParams) -> f64 {
    let [s, v1, v2, e, i, r] = x;
    let [ls, lv1, lv2, le, li, lr] = l;
    let n = s + v1 + v2 + e + i + r;
    let (b1, b2) = match p.transmission {
        TransmissionRule::Scaled => (p.beta * (1.0 - p.theta1), p.beta * (1.0 - p.theta2)),
        TransmissionRule::Complement => (1.0 - p.theta1, 1.0 - p.theta2),
    };
    i + p.b1 * u[0] * u[0]
        + p.b2 * u[1] * u[1]
        + u[0] * s * (lv1 - ls)
        + u[1] * s * (lv2 - ls)
        + p.beta * s * i / n * (le - ls)
        + b1 * v1 * i / n * (le - lv1)
        + b2 * v2 * i / n * (le - lv2)
        + p.eps1 * v1 * (ls - lv1)
        + p.eps2 * v2 * (ls - lv2)
        + p.alpha1 * v1 * (lr - lv1)
        + p.alpha2 * v2 * (lr - lv2)
        + p.sigma * e * (li - le)
        + p.delta * r * (ls - lr)
        + p.gamma * i * (lr - li)
}

/// Fourth-order central difference of `f` along `x[j]`.
pub fn central_diff(f: impl Fn(&[f64; 6]) -> f64, x: &[f64; 6], j: usize) -> f64 {
    let h = 1.0e-3 * x[j].abs().max(1.0);
    let at = |d: f64| {
        let mut y = *x;
        y[j] += d;
        f(&y)
    };
    (-at(2.0 * h) + 8.0 * at(h) - 8.0 * at(-h) + at(-2.0 * h)) / (12.0 * h)
}

