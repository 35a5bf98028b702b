use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use seirv_core::{
    classify_control, efficacy_sensitivity_sweep, infected_comparison, procurement_split,
    rate_sensitivity_grid, reduction_threshold_probe, trapezoid, AnalysisOptions, Classification,
    Error, FixedEfficacy, ModelParams, Policy, ProcurementSplit, SensitivityCell, StatePoint,
    SweepConfig, SweepResult, TimeGrid,
};

use crate::config::{Config, Overrides, Resolved};
use crate::error::CliError;
use crate::output::{num, OutputDir};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    SweepRates,
    SweepEfficacy,
    CompareInfected,
    Baseline,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::SweepRates => "sweep-rates",
            Command::SweepEfficacy => "sweep-efficacy",
            Command::CompareInfected => "compare-infected",
            Command::Baseline => "baseline",
        }
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'static str,
    label: &'a str,
    params: ModelParams,
    initial: StatePoint,
    grid: TimeGrid,
    sweep: &'a SweepConfig,
    analysis: AnalysisOptions,
    costs_follow_efficacy: bool,
    config_path: String,
    config_sha256: String,
    outputs: Vec<String>,
    timestamp: String,
    version: &'static str,
    settings: &'a Config,
}

#[derive(Serialize)]
struct RunSummary<'a> {
    command: &'static str,
    label: &'a str,
    objective: f64,
    iterations: usize,
    converged: bool,
    procurement: Option<ProcurementSplit>,
    classification: Classification,
    activity_threshold: f64,
    cumulative_infected: f64,
    final_state: StatePoint,
}

#[derive(Serialize)]
struct CellSummary<'a> {
    label: &'a str,
    shape: &'static str,
    crossover_day: Option<f64>,
    procurement: Option<ProcurementSplit>,
    objective: f64,
    iterations: usize,
    converged: bool,
}

impl<'a> From<&'a SensitivityCell> for CellSummary<'a> {
    fn from(c: &'a SensitivityCell) -> Self {
        Self {
            label: &c.label,
            shape: c.classification.shape.as_str(),
            crossover_day: c.classification.crossover_day,
            procurement: c.procurement,
            objective: c.result.objective,
            iterations: c.result.iterations,
            converged: c.result.converged,
        }
    }
}

fn unconverged<'a>(cells: impl IntoIterator<Item = &'a SensitivityCell>) -> Vec<&'a str> {
    cells
        .into_iter()
        .filter(|c| !c.result.converged)
        .map(|c| c.label.as_str())
        .collect()
}

fn cumulative_infected(r: &SweepResult) -> Result<f64, CliError> {
    let i: Vec<f64> = r.states.values().iter().map(|x| x.i).collect();
    Ok(trapezoid(&i, r.grid().dt)?)
}

pub fn run(
    command: Command,
    config_path: &Path,
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<(), CliError> {
    let bytes = std::fs::read(config_path).map_err(|e| {
        CliError::Config(format!("cannot read {}: {e}", config_path.display()))
    })?;
    let text = std::str::from_utf8(&bytes).map_err(|_| {
        CliError::Config(format!("{} is not valid UTF-8", config_path.display()))
    })?;
    let mut config = Config::parse(text, config_path)?;
    config.apply(overrides);
    let resolved = config.resolve()?;
    log::info!("{}: {}", command.name(), resolved.scenario.label);

    let mut out = OutputDir::create(out_dir)?;
    match command {
        Command::Solve => single_run(command, &resolved, &mut out, true)?,
        Command::Baseline => single_run(command, &resolved, &mut out, false)?,
        Command::SweepRates => sweep_rates(&resolved, &mut out)?,
        Command::SweepEfficacy => sweep_efficacy(&resolved, &mut out)?,
        Command::CompareInfected => compare_infected(&resolved, &mut out)?,
    }
    out.write_bytes("config.resolved.toml", resolved.config.to_toml().as_bytes())?;

    let s = &resolved.scenario;
    let manifest = Manifest {
        command: command.name(),
        label: &s.label,
        params: s.params,
        initial: s.x0,
        grid: s.grid,
        sweep: &s.sweep,
        analysis: resolved.analysis,
        costs_follow_efficacy: s.costs_follow_efficacy,
        config_path: config_path.display().to_string(),
        config_sha256: hex::encode(Sha256::digest(&bytes)),
        outputs: out.written().to_vec(),
        timestamp: chrono::Utc::now().to_rfc3339(),
        version: env!("CARGO_PKG_VERSION"),
        settings: &resolved.config,
    };
    out.write_json("manifest.json", &manifest)
}

fn single_run(
    command: Command,
    resolved: &Resolved,
    out: &mut OutputDir,
    optimize: bool,
) -> Result<(), CliError> {
    let s = &resolved.scenario;
    let r = if optimize { s.solve()? } else { s.uncontrolled()? };
    if !r.converged {
        log::warn!("sweep did not converge in {} iterations", r.iterations);
    }
    out.write_states(&r.states)?;
    out.write_controls(&r.controls)?;
    out.write_adjoints(&r.adjoints)?;
    let procurement = match procurement_split(&r) {
        Ok(split) => Some(split),
        Err(Error::UndefinedSplit) => None,
        Err(e) => return Err(e.into()),
    };
    let summary = RunSummary {
        command: command.name(),
        label: &s.label,
        objective: r.objective,
        iterations: r.iterations,
        converged: r.converged,
        procurement,
        classification: classify_control(&r.controls, resolved.analysis.activity_threshold),
        activity_threshold: resolved.analysis.activity_threshold,
        cumulative_infected: cumulative_infected(&r)?,
        final_state: r.states.last(),
    };
    out.write_json("summary.json", &summary)
}

fn sweep_rates(resolved: &Resolved, out: &mut OutputDir) -> Result<(), CliError> {
    let s = &resolved.scenario;
    let cells = rate_sensitivity_grid(s, &resolved.analysis)?;
    let probe = reduction_threshold_probe(s, &resolved.analysis)?;
    out.write_cells(&cells.iter().collect::<Vec<_>>())?;

    #[derive(Serialize)]
    struct Summary<'a> {
        command: &'static str,
        label: &'a str,
        activity_threshold: f64,
        baseline_shape: &'static str,
        cells: Vec<CellSummary<'a>>,
        unconverged: Vec<&'a str>,
        reduction_probe: Vec<CellSummary<'a>>,
    }
    let summary = Summary {
        command: Command::SweepRates.name(),
        label: &s.label,
        activity_threshold: resolved.analysis.activity_threshold,
        baseline_shape: cells[0].classification.shape.as_str(),
        cells: cells.iter().map(CellSummary::from).collect(),
        unconverged: unconverged(cells.iter().chain(&probe)),
        reduction_probe: probe.iter().map(CellSummary::from).collect(),
    };
    out.write_json("summary.json", &summary)
}

fn sweep_efficacy(resolved: &Resolved, out: &mut OutputDir) -> Result<(), CliError> {
    let s = &resolved.scenario;
    let spec = &resolved.efficacy_sweep;
    let sweep = efficacy_sensitivity_sweep(s, spec.fixed, &spec.values, &resolved.analysis)?;
    let rows: Vec<&SensitivityCell> = std::iter::once(&sweep.baseline).chain(&sweep.cells).collect();
    out.write_cells(&rows)?;

    #[derive(Serialize)]
    struct Summary<'a> {
        command: &'static str,
        label: &'a str,
        fixed: FixedEfficacy,
        values: &'a [f64],
        skipped: &'a [f64],
        activity_threshold: f64,
        baseline_shape: &'static str,
        last_unchanged: Option<f64>,
        first_changed: Option<f64>,
        /// Midpoint of the last unchanged and first changed values.
        threshold_estimate: Option<f64>,
        change_is_persistent: bool,
        cells: Vec<CellSummary<'a>>,
        unconverged: Vec<&'a str>,
    }
    let threshold_estimate = match (sweep.last_unchanged, sweep.first_changed) {
        (Some(a), Some(b)) => Some(0.5 * (a + b)),
        _ => None,
    };
    let summary = Summary {
        command: Command::SweepEfficacy.name(),
        label: &s.label,
        fixed: sweep.fixed,
        values: &spec.values,
        skipped: &sweep.skipped,
        activity_threshold: resolved.analysis.activity_threshold,
        baseline_shape: sweep.baseline.classification.shape.as_str(),
        last_unchanged: sweep.last_unchanged,
        first_changed: sweep.first_changed,
        threshold_estimate,
        change_is_persistent: sweep.change_is_persistent(),
        cells: rows.iter().map(|c| CellSummary::from(*c)).collect(),
        unconverged: unconverged(rows.iter().copied()),
    };
    out.write_json("summary.json", &summary)
}

fn compare_infected(resolved: &Resolved, out: &mut OutputDir) -> Result<(), CliError> {
    let s = &resolved.scenario;
    let cmp = infected_comparison(s, &resolved.analysis)?;
    let order = [Policy::OnlyV1, Policy::Both, Policy::OnlyV2];
    let runs: Vec<_> = order
        .iter()
        .map(|p| cmp.get(*p).expect("all three policies are run"))
        .collect();

    let mut header = vec!["t"];
    header.extend(order.iter().map(|p| p.as_str()));
    let rows = s.grid.times().enumerate().map(|(k, t)| {
        std::iter::once(num(t))
            .chain(runs.iter().map(|r| num(r.result.states.at(k).i)))
            .collect::<Vec<_>>()
    });
    out.write_csv("infected.csv", &header, rows)?;

    #[derive(Serialize)]
    struct PolicySummary {
        policy: &'static str,
        cumulative_infected: f64,
        peak_infected: f64,
        objective: f64,
        iterations: usize,
        converged: bool,
    }
    #[derive(Serialize)]
    struct Summary<'a> {
        command: &'static str,
        label: &'a str,
        policies: Vec<PolicySummary>,
    }
    let summary = Summary {
        command: Command::CompareInfected.name(),
        label: &s.label,
        policies: runs
            .iter()
            .map(|r| PolicySummary {
                policy: r.policy.as_str(),
                cumulative_infected: r.cumulative_infected,
                peak_infected: r.infected().into_iter().fold(0.0, f64::max),
                objective: r.result.objective,
                iterations: r.result.iterations,
                converged: r.result.converged,
            })
            .collect(),
    };
    out.write_json("summary.json", &summary)
}
