//! SEIRV dynamics with two vaccines, the associated adjoint system and the
//! Hamiltonian of the vaccination-cost problem.
//!
//! All functions here are pure. The total population `N` is recomputed from
//! the state on every evaluation, so drift in `N` shows up in trajectories
//! instead of being masked by a cached constant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Cost weight per unit efficacy used by the default cost rule `b_i = theta_i * 1e4`.
pub const COST_PER_EFFICACY: f64 = 1.0e4;

/// Relative tolerance for nonnegativity of state components (fraction of `N`).
pub const NEGATIVITY_TOLERANCE: f64 = 1.0e-6;

/// How the transmission rate of a vaccinated class is obtained from the
/// vaccine efficacy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TransmissionRule {
    /// `beta_i = beta * (1 - theta_i)`: efficacy scales the attack rate.
    #[default]
    Scaled,
    /// `beta_i = 1 - theta_i`, independent of `beta`.
    Complement,
}

/// Epidemiological rates (per day), vaccine efficacies, control cost weights
/// and campaign length for one scenario.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelParams {
    pub beta: f64,
    pub sigma: f64,
    pub gamma: f64,
    pub delta: f64,
    pub alpha1: f64,
    pub alpha2: f64,
    pub eps1: f64,
    pub eps2: f64,
    pub theta1: f64,
    pub theta2: f64,
    pub b1: f64,
    pub b2: f64,
    pub horizon_days: f64,
    #[serde(default)]
    pub transmission: TransmissionRule,
}

impl ModelParams {
    /// Published rate values with `b_i = theta_i * 1e4`.
    pub fn paper(theta1: f64, theta2: f64, horizon_days: f64) -> Self {
        Self {
            beta: 0.45,
            sigma: 0.25,
            gamma: 0.07,
            delta: 0.65,
            alpha1: 0.08,
            alpha2: 0.08,
            eps1: 0.54,
            eps2: 0.54,
            theta1,
            theta2,
            b1: theta1 * COST_PER_EFFICACY,
            b2: theta2 * COST_PER_EFFICACY,
            horizon_days,
            transmission: TransmissionRule::Scaled,
        }
    }

    /// Total control cost `B = b1 + b2`.
    pub fn b_total(&self) -> f64 {
        self.b1 + self.b2
    }

    /// Transmission rates `(beta_1, beta_2)` of the two vaccinated classes.
    pub fn vaccinated_rates(&self) -> Result<(f64, f64)> {
        match self.transmission {
            TransmissionRule::Scaled => Ok((
                derived_transmission_rate(self.beta, self.theta1)?,
                derived_transmission_rate(self.beta, self.theta2)?,
            )),
            TransmissionRule::Complement => {
                check_efficacy(self.theta1)?;
                check_efficacy(self.theta2)?;
                Ok((1.0 - self.theta1, 1.0 - self.theta2))
            }
        }
    }

    /// Checks the standing assumptions: nonnegative rates,
    /// `0 <= theta2 < theta1 < 1`, positive costs and horizon.
    pub fn validate(&self) -> Result<()> {
        let rates = [
            ("beta", self.beta),
            ("sigma", self.sigma),
            ("gamma", self.gamma),
            ("delta", self.delta),
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("eps1", self.eps1),
            ("eps2", self.eps2),
        ];
        for (name, value) in rates {
            if !value.is_finite() || value < 0.0 {
                return Err(Error::Domain(format!(
                    "{name} must be a finite nonnegative rate, got {value}"
                )));
            }
        }
        if !(self.theta1.is_finite() && self.theta2.is_finite()) {
            return Err(Error::Domain("efficacies must be finite".into()));
        }
        if !(0.0 <= self.theta2 && self.theta2 < self.theta1 && self.theta1 < 1.0) {
            return Err(Error::Domain(format!(
                "efficacies must satisfy 0 <= theta2 < theta1 < 1, got theta1 = {}, theta2 = {}",
                self.theta1, self.theta2
            )));
        }
        for (name, value) in [("b1", self.b1), ("b2", self.b2)] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::Domain(format!(
                    "{name} must be a finite positive cost weight, got {value}"
                )));
            }
        }
        if !self.horizon_days.is_finite() || self.horizon_days <= 0.0 {
            return Err(Error::Domain(format!(
                "horizon_days must be positive, got {}",
                self.horizon_days
            )));
        }
        Ok(())
    }
}

/// Population counts of the six compartments.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StatePoint {
    pub s: f64,
    pub v1: f64,
    pub v2: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
}

impl StatePoint {
    pub const NAMES: [&'static str; 6] = ["S", "V1", "V2", "E", "I", "R"];

    pub fn new(s: f64, v1: f64, v2: f64, e: f64, i: f64, r: f64) -> Self {
        Self { s, v1, v2, e, i, r }
    }

    /// Brazil, 8 May 2020: no vaccinated individuals yet.
    pub fn paper_initial() -> Self {
        Self::new(2.0e8, 0.0, 0.0, 65124.0, 76603.0, 65124.0)
    }

    /// Total population.
    pub fn n(&self) -> f64 {
        self.s + self.v1 + self.v2 + self.e + self.i + self.r
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.s, self.v1, self.v2, self.e, self.i, self.r]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4], a[5])
    }

    /// Fails if any component is below `-NEGATIVITY_TOLERANCE * N` or not finite.
    pub fn check_nonnegative(&self, t: f64) -> Result<()> {
        let n = self.n();
        let tolerance = -NEGATIVITY_TOLERANCE * n.abs();
        for (component, value) in Self::NAMES.into_iter().zip(self.to_array()) {
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    context: "state",
                    t,
                });
            }
            if value < tolerance {
                return Err(Error::Negativity {
                    t,
                    component,
                    value,
                    tolerance,
                });
            }
        }
        Ok(())
    }
}

/// Costate values, one per compartment.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct AdjointPoint {
    pub l_s: f64,
    pub l_v1: f64,
    pub l_v2: f64,
    pub l_e: f64,
    pub l_i: f64,
    pub l_r: f64,
}

impl AdjointPoint {
    pub const NAMES: [&'static str; 6] = [
        "lambda_S",
        "lambda_V1",
        "lambda_V2",
        "lambda_E",
        "lambda_I",
        "lambda_R",
    ];

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn to_array(self) -> [f64; 6] {
        [self.l_s, self.l_v1, self.l_v2, self.l_e, self.l_i, self.l_r]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self {
            l_s: a[0],
            l_v1: a[1],
            l_v2: a[2],
            l_e: a[3],
            l_i: a[4],
            l_r: a[5],
        }
    }
}

/// Vaccination rates of the two vaccines, each in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlPoint {
    pub u1: f64,
    pub u2: f64,
}

impl ControlPoint {
    pub fn new(u1: f64, u2: f64) -> Self {
        Self { u1, u2 }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn in_bounds(&self) -> bool {
        (0.0..=1.0).contains(&self.u1) && (0.0..=1.0).contains(&self.u2)
    }
}

fn check_efficacy(theta: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain(format!(
            "efficacy must lie in [0, 1], got {theta}"
        )));
    }
    Ok(())
}

/// Transmission rate of a vaccinated class, `beta * (1 - theta)`.
pub fn derived_transmission_rate(beta: f64, theta: f64) -> Result<f64> {
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(Error::Domain(format!(
            "transmission rate must be finite and nonnegative, got {beta}"
        )));
    }
    check_efficacy(theta)?;
    Ok(beta * (1.0 - theta))
}

fn population(x: &StatePoint) -> Result<f64> {
    let n = x.n();
    if n > 0.0 {
        Ok(n)
    } else {
        Err(Error::Singular { n })
    }
}

/// Right-hand side of the state system. The model is autonomous; `t` is
/// accepted for interface uniformity.
pub fn state_rhs(_t: f64, x: &StatePoint, u: &ControlPoint, p: &ModelParams) -> Result<StatePoint> {
    let n = population(x)?;
    let (beta1, beta2) = p.vaccinated_rates()?;

    let inf_s = p.beta * x.s * x.i / n;
    let inf_v1 = beta1 * x.v1 * x.i / n;
    let inf_v2 = beta2 * x.v2 * x.i / n;
    let vac1 = u.u1 * x.s;
    let vac2 = u.u2 * x.s;
    let ret1 = p.eps1 * x.v1;
    let ret2 = p.eps2 * x.v2;
    let imm1 = p.alpha1 * x.v1;
    let imm2 = p.alpha2 * x.v2;
    let latent = p.sigma * x.e;
    let recover = p.gamma * x.i;
    let reinfect = p.delta * x.r;

    Ok(StatePoint {
        s: -inf_s - vac1 - vac2 + ret1 + ret2 + reinfect,
        v1: vac1 - inf_v1 - ret1 - imm1,
        v2: vac2 - inf_v2 - ret2 - imm2,
        e: inf_s + inf_v1 + inf_v2 - latent,
        i: latent - recover,
        r: recover - reinfect + imm1 + imm2,
    })
}

/// Right-hand side of the adjoint (costate) system, `d(lambda)/dt = -dH/dx`.
pub fn adjoint_rhs(
    _t: f64,
    lam: &AdjointPoint,
    x: &StatePoint,
    u: &ControlPoint,
    p: &ModelParams,
) -> Result<AdjointPoint> {
    let n = population(x)?;
    let (beta1, beta2) = p.vaccinated_rates()?;
    let k = x.i / (n * n);

    // Infection flows weighted by the costate jump they cause.
    let flow_s = p.beta * x.s * (lam.l_e - lam.l_s);
    let flow_v1 = beta1 * x.v1 * (lam.l_e - lam.l_v1);
    let flow_v2 = beta2 * x.v2 * (lam.l_e - lam.l_v2);

    Ok(AdjointPoint {
        l_s: k * (flow_v1 + flow_v2 + p.beta * (n - x.s) * (lam.l_s - lam.l_e))
            + u.u1 * (lam.l_s - lam.l_v1)
            + u.u2 * (lam.l_s - lam.l_v2),
        l_v1: k * (flow_s + flow_v2 + beta1 * (n - x.v1) * (lam.l_v1 - lam.l_e))
            + p.eps1 * (lam.l_v1 - lam.l_s)
            + p.alpha1 * (lam.l_v1 - lam.l_r),
        l_v2: k * (flow_s + flow_v1 + beta2 * (n - x.v2) * (lam.l_v2 - lam.l_e))
            + p.eps2 * (lam.l_v2 - lam.l_s)
            + p.alpha2 * (lam.l_v2 - lam.l_r),
        l_e: k * (flow_s + flow_v1 + flow_v2) + p.sigma * (lam.l_e - lam.l_i),
        l_i: -(n - x.i) / (n * n) * (flow_s + flow_v1 + flow_v2)
            + p.gamma * (lam.l_i - lam.l_r)
            - 1.0,
        l_r: k * (flow_s + flow_v1 + flow_v2) + p.delta * (lam.l_r - lam.l_s),
    })
}

/// Hamiltonian of the control problem.
pub fn hamiltonian(
    x: &StatePoint,
    lam: &AdjointPoint,
    u: &ControlPoint,
    p: &ModelParams,
) -> Result<f64> {
    let n = population(x)?;
    let (beta1, beta2) = p.vaccinated_rates()?;
    Ok(objective_integrand(x, u, p)
        + u.u1 * x.s * (lam.l_v1 - lam.l_s)
        + u.u2 * x.s * (lam.l_v2 - lam.l_s)
        + p.beta * x.s * x.i / n * (lam.l_e - lam.l_s)
        + beta1 * x.v1 * x.i / n * (lam.l_e - lam.l_v1)
        + beta2 * x.v2 * x.i / n * (lam.l_e - lam.l_v2)
        + p.eps1 * x.v1 * (lam.l_s - lam.l_v1)
        + p.eps2 * x.v2 * (lam.l_s - lam.l_v2)
        + p.alpha1 * x.v1 * (lam.l_r - lam.l_v1)
        + p.alpha2 * x.v2 * (lam.l_r - lam.l_v2)
        + p.sigma * x.e * (lam.l_i - lam.l_e)
        + p.delta * x.r * (lam.l_s - lam.l_r)
        + p.gamma * x.i * (lam.l_r - lam.l_i))
}

/// Running cost `I + b1 u1^2 + b2 u2^2`.
pub fn objective_integrand(x: &StatePoint, u: &ControlPoint, p: &ModelParams) -> f64 {
    x.i + p.b1 * u.u1 * u.u1 + p.b2 * u.u2 * u.u2
}
