//! TOML scenario configuration.
//!
//! Only `params.theta1` and `params.theta2` are required. Everything else
//! falls back to the published parameter set, with `b_i = theta_i * 1e4`
//! unless a cost weight is given explicitly.

use std::path::Path;

use serde::{Deserialize, Serialize};

use seirv_core::{
    AnalysisOptions, Availability, FixedEfficacy, ModelParams, Scenario, StatePoint, SweepConfig,
    TimeGrid, TransmissionRule,
};

use crate::error::CliError;

pub const DEFAULT_HORIZON: f64 = 60.0;
pub const DEFAULT_EFFICACY_VALUES: [f64; 5] = [0.75, 0.76, 0.77, 0.78, 0.80];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_days: Option<f64>,
    pub params: ParamsSection,
    #[serde(default)]
    pub initial: InitialSection,
    #[serde(default)]
    pub grid: GridSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub efficacy_sweep: Option<EfficacySweepSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub theta1: f64,
    pub theta2: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps2: Option<f64>,
    /// Cost weights. When absent they follow the efficacies.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transmission: Option<TransmissionRule>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub i: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub convergence_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub availability: Option<Availability>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activity_threshold: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parallelism: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EfficacySweepSection {
    /// The efficacy held at its configured value; the other one is swept.
    pub fixed: FixedEfficacy,
    pub values: Vec<f64>,
}

impl Default for EfficacySweepSection {
    fn default() -> Self {
        Self {
            fixed: FixedEfficacy::Theta2,
            values: DEFAULT_EFFICACY_VALUES.to_vec(),
        }
    }
}

/// Command-line settings that take precedence over the file.
#[derive(Debug, Clone, Copy, Default)]
pub struct Overrides {
    pub dt: Option<f64>,
    pub tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub relaxation: Option<f64>,
    pub parallelism: Option<usize>,
}

/// Everything a command needs, with defaults applied and checked.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub scenario: Scenario,
    pub analysis: AnalysisOptions,
    pub efficacy_sweep: EfficacySweepSection,
    /// The configuration with every default written out.
    pub config: Config,
}

impl Config {
    pub fn parse(text: &str, origin: &Path) -> Result<Self, CliError> {
        toml::from_str(text)
            .map_err(|e| CliError::Config(format!("{}: {}", origin.display(), e.to_string().trim_end())))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if o.dt.is_some() {
            self.grid.dt = o.dt;
        }
        if o.tol.is_some() {
            self.sweep.convergence_tol = o.tol;
        }
        if o.max_iters.is_some() {
            self.sweep.max_iterations = o.max_iters;
        }
        if o.relaxation.is_some() {
            self.sweep.relaxation = o.relaxation;
        }
        if o.parallelism.is_some() {
            self.analysis.parallelism = o.parallelism;
        }
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let horizon = self.horizon_days.unwrap_or(DEFAULT_HORIZON);
        let p = &self.params;
        let mut params = ModelParams::paper(p.theta1, p.theta2, horizon);
        let rates = [
            (&mut params.beta, p.beta),
            (&mut params.sigma, p.sigma),
            (&mut params.gamma, p.gamma),
            (&mut params.delta, p.delta),
            (&mut params.alpha1, p.alpha1),
            (&mut params.alpha2, p.alpha2),
            (&mut params.eps1, p.eps1),
            (&mut params.eps2, p.eps2),
        ];
        for (slot, value) in rates {
            if let Some(v) = value {
                *slot = v;
            }
        }
        if let Some(b) = p.b1 {
            params.b1 = b;
        }
        if let Some(b) = p.b2 {
            params.b2 = b;
        }
        if let Some(t) = p.transmission {
            params.transmission = t;
        }
        params
            .validate()
            .map_err(|e| CliError::Config(format!("[params]: {e}")))?;

        let d = StatePoint::paper_initial();
        let ini = &self.initial;
        let x0 = StatePoint::new(
            ini.s.unwrap_or(d.s),
            ini.v1.unwrap_or(d.v1),
            ini.v2.unwrap_or(d.v2),
            ini.e.unwrap_or(d.e),
            ini.i.unwrap_or(d.i),
            ini.r.unwrap_or(d.r),
        );
        for (name, v) in StatePoint::NAMES.iter().zip(x0.to_array()) {
            if !(v.is_finite() && v >= 0.0) {
                return Err(CliError::Config(format!(
                    "[initial] {}: must be a finite nonnegative count, got {v}",
                    name.to_lowercase()
                )));
            }
        }
        if x0.n() <= 0.0 {
            return Err(CliError::Config(
                "[initial]: total population must be positive".into(),
            ));
        }

        let dt = self.grid.dt.unwrap_or(Scenario::DEFAULT_DT);
        if !(dt.is_finite() && dt > 0.0 && dt <= horizon) {
            return Err(CliError::Config(format!(
                "[grid] dt: must lie in (0, horizon_days], got {dt}"
            )));
        }
        let grid = TimeGrid::horizon(horizon, dt)
            .map_err(|e| CliError::Config(format!("[grid]: {e}")))?;

        let defaults = SweepConfig::default();
        let sweep = SweepConfig {
            max_iterations: self.sweep.max_iterations.unwrap_or(defaults.max_iterations),
            convergence_tol: self.sweep.convergence_tol.unwrap_or(defaults.convergence_tol),
            relaxation: self.sweep.relaxation.unwrap_or(defaults.relaxation),
            initial_guess: None,
            availability: self.sweep.availability.unwrap_or_default(),
        };
        sweep
            .validate()
            .map_err(|e| CliError::Config(format!("[sweep]: {e}")))?;

        let analysis = AnalysisOptions {
            activity_threshold: self
                .analysis
                .activity_threshold
                .unwrap_or(AnalysisOptions::default().activity_threshold),
            parallelism: self.analysis.parallelism.unwrap_or(0),
        };
        if !(analysis.activity_threshold > 0.0 && analysis.activity_threshold < 1.0) {
            return Err(CliError::Config(format!(
                "[analysis] activity_threshold: must lie in (0, 1), got {}",
                analysis.activity_threshold
            )));
        }

        let efficacy_sweep = self.efficacy_sweep.clone().unwrap_or_default();
        if let Some(v) = efficacy_sweep
            .values
            .iter()
            .find(|v| !(v.is_finite() && **v > 0.0 && **v < 1.0))
        {
            return Err(CliError::Config(format!(
                "[efficacy_sweep] values: each value must lie in (0, 1), got {v}"
            )));
        }

        let label = self
            .label
            .clone()
            .unwrap_or_else(|| format!("theta1={} theta2={} T={horizon}", p.theta1, p.theta2));
        let scenario = Scenario {
            label: label.clone(),
            params,
            x0,
            grid,
            sweep: sweep.clone(),
            costs_follow_efficacy: p.b1.is_none() && p.b2.is_none(),
        };

        let config = Config {
            label: Some(label),
            horizon_days: Some(horizon),
            params: ParamsSection {
                theta1: params.theta1,
                theta2: params.theta2,
                beta: Some(params.beta),
                sigma: Some(params.sigma),
                gamma: Some(params.gamma),
                delta: Some(params.delta),
                alpha1: Some(params.alpha1),
                alpha2: Some(params.alpha2),
                eps1: Some(params.eps1),
                eps2: Some(params.eps2),
                b1: p.b1,
                b2: p.b2,
                transmission: Some(params.transmission),
            },
            initial: InitialSection {
                s: Some(x0.s),
                v1: Some(x0.v1),
                v2: Some(x0.v2),
                e: Some(x0.e),
                i: Some(x0.i),
                r: Some(x0.r),
            },
            grid: GridSection { dt: Some(dt) },
            sweep: SweepSection {
                max_iterations: Some(sweep.max_iterations),
                convergence_tol: Some(sweep.convergence_tol),
                relaxation: Some(sweep.relaxation),
                availability: Some(sweep.availability),
            },
            analysis: AnalysisSection {
                activity_threshold: Some(analysis.activity_threshold),
                parallelism: Some(analysis.parallelism),
            },
            efficacy_sweep: Some(efficacy_sweep.clone()),
        };

        Ok(Resolved {
            scenario,
            analysis,
            efficacy_sweep,
            config,
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str) -> Result<Resolved, CliError> {
        Config::parse(text, Path::new("test.toml"))?.resolve()
    }

    #[test]
    fn defaults_follow_published_values() {
        let r = load("[params]\ntheta1 = 0.91\ntheta2 = 0.51\n").unwrap();
        let p = r.scenario.params;
        assert_eq!(
            [p.beta, p.sigma, p.gamma, p.delta, p.alpha1, p.alpha2, p.eps1, p.eps2],
            [0.45, 0.25, 0.07, 0.65, 0.08, 0.08, 0.54, 0.54]
        );
        assert_eq!((p.b1, p.b2), (9100.0, 5100.0));
        assert_eq!(p.horizon_days, 60.0);
        let x = r.scenario.x0;
        assert_eq!([x.s, x.e, x.i, x.r], [2.0e8, 65124.0, 76603.0, 65124.0]);
        assert_eq!(r.scenario.grid.dt, 0.1);
        assert!(r.scenario.costs_follow_efficacy);
    }

    #[test]
    fn explicit_cost_wins() {
        let r = load("[params]\ntheta1 = 0.91\ntheta2 = 0.51\nb1 = 7400\n").unwrap();
        assert_eq!(r.scenario.params.b1, 7400.0);
        assert_eq!(r.scenario.params.b2, 5100.0);
        assert!(!r.scenario.costs_follow_efficacy);
    }

    #[test]
    fn rejects_inverted_efficacies() {
        let e = load("[params]\ntheta1 = 0.5\ntheta2 = 0.6\n").unwrap_err();
        let msg = e.to_string();
        assert!(msg.contains("theta2 < theta1"), "{msg}");
        assert_eq!(e.exit_code(), 2);
    }

    #[test]
    fn rejects_unknown_keys_by_name() {
        let e = load("[params]\ntheta1 = 0.91\ntheta2 = 0.51\nbeta_typo = 1\n").unwrap_err();
        assert!(e.to_string().contains("beta_typo"), "{e}");
        let e = load("horizon = 60\n[params]\ntheta1 = 0.91\ntheta2 = 0.51\n").unwrap_err();
        assert!(e.to_string().contains("horizon"), "{e}");
    }

    #[test]
    fn requires_efficacies() {
        let e = load("[params]\ntheta1 = 0.91\n").unwrap_err();
        assert!(e.to_string().contains("theta2"), "{e}");
    }

    #[test]
    fn overrides_take_precedence() {
        let mut c = Config::parse(
            "[params]\ntheta1 = 0.91\ntheta2 = 0.51\n[grid]\ndt = 0.2\n",
            Path::new("x"),
        )
        .unwrap();
        c.apply(&Overrides {
            dt: Some(0.05),
            max_iters: Some(7),
            ..Default::default()
        });
        let r = c.resolve().unwrap();
        assert_eq!(r.scenario.grid.dt, 0.05);
        assert_eq!(r.scenario.sweep.max_iterations, 7);
    }

    #[test]
    fn resolved_config_round_trips() {
        let r = load("horizon_days = 120\n[params]\ntheta1 = 0.74\ntheta2 = 0.67\ntransmission = \"complement\"\n")
            .unwrap();
        let text = r.config.to_toml();
        let again = Config::parse(&text, Path::new("resolved")).unwrap();
        assert_eq!(again, r.config);
        let r2 = again.resolve().unwrap();
        assert_eq!(r2.scenario, r.scenario);
        assert_eq!(r2.config, r.config);
    }

    #[test]
    fn rejects_bad_sweep_and_grid_settings() {
        for extra in [
            "[sweep]\nrelaxation = 0\n",
            "[sweep]\nmax_iterations = 0\n",
            "[grid]\ndt = -1\n",
            "[analysis]\nactivity_threshold = 2\n",
            "[efficacy_sweep]\nfixed = \"theta2\"\nvalues = [1.5]\n",
            "[initial]\ns = -5\n",
        ] {
            let text = format!("[params]\ntheta1 = 0.91\ntheta2 = 0.51\n{extra}");
            assert!(load(&text).is_err(), "{extra}");
        }
    }
}
