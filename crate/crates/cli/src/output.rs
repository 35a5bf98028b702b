//! Output files. Every file is written to a temporary sibling and renamed
//! into place, and numbers carry 17 significant digits.

use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use seirv_core::{
    AdjointPoint, AdjointTrajectory, ControlSchedule, SensitivityCell, StatePoint, StateTrajectory,
};

use crate::error::CliError;

pub const STATES_HEADER: [&str; 8] = ["t", "S", "V1", "V2", "E", "I", "R", "N"];
pub const CONTROLS_HEADER: [&str; 3] = ["t", "u1", "u2"];
pub const CELLS_HEADER: [&str; 17] = [
    "label",
    "theta1",
    "theta2",
    "alpha1",
    "alpha2",
    "eps1",
    "eps2",
    "b1",
    "b2",
    "shape",
    "crossover_day",
    "share_v1",
    "share_v2",
    "objective",
    "iterations",
    "converged",
    "transmission",
];

pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Output directory that remembers what it wrote, for the manifest.
pub struct OutputDir {
    dir: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(dir: &Path) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir)
            .with_context(|| format!("cannot create output directory {}", dir.display()))?;
        Ok(Self {
            dir: dir.to_path_buf(),
            written: Vec::new(),
        })
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let target = self.dir.join(name);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)
            .with_context(|| format!("cannot create temporary file in {}", self.dir.display()))?;
        tmp.write_all(bytes)
            .and_then(|_| tmp.as_file().sync_all())
            .with_context(|| format!("cannot write {}", target.display()))?;
        tmp.persist(&target)
            .map_err(|e| e.error)
            .with_context(|| format!("cannot move output into place at {}", target.display()))?;
        if !self.written.iter().any(|w| w == name) {
            self.written.push(name.to_string());
        }
        Ok(())
    }

    pub fn write_csv<I, R>(&mut self, name: &str, header: &[&str], rows: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = R>,
        R: IntoIterator<Item = String>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header).context("csv header")?;
        for row in rows {
            w.write_record(row).context("csv row")?;
        }
        let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv flush: {e}"))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).context("serialize json")?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn write_states(&mut self, states: &StateTrajectory) -> Result<(), CliError> {
        let rows = states.iter().map(|(t, x): (f64, &StatePoint)| {
            std::iter::once(t)
                .chain(x.to_array())
                .chain(std::iter::once(x.n()))
                .map(num)
                .collect::<Vec<_>>()
        });
        self.write_csv("states.csv", &STATES_HEADER, rows)
    }

    pub fn write_controls(&mut self, controls: &ControlSchedule) -> Result<(), CliError> {
        let rows = controls
            .iter()
            .map(|(t, u)| vec![num(t), num(u.u1), num(u.u2)]);
        self.write_csv("controls.csv", &CONTROLS_HEADER, rows)
    }

    pub fn write_adjoints(&mut self, adjoints: &AdjointTrajectory) -> Result<(), CliError> {
        let mut header = vec!["t"];
        header.extend(AdjointPoint::NAMES);
        let rows = adjoints.iter().map(|(t, l)| {
            std::iter::once(t)
                .chain(l.to_array())
                .map(num)
                .collect::<Vec<_>>()
        });
        self.write_csv("adjoints.csv", &header, rows)
    }

    pub fn write_cells(&mut self, cells: &[&SensitivityCell]) -> Result<(), CliError> {
        let rows = cells.iter().map(|c| {
            let p = &c.params;
            vec![
                c.label.clone(),
                num(p.theta1),
                num(p.theta2),
                num(p.alpha1),
                num(p.alpha2),
                num(p.eps1),
                num(p.eps2),
                num(p.b1),
                num(p.b2),
                c.classification.shape.to_string(),
                opt_num(c.classification.crossover_day),
                opt_num(c.procurement.map(|s| s.share_v1)),
                opt_num(c.procurement.map(|s| s.share_v2)),
                num(c.result.objective),
                c.result.iterations.to_string(),
                c.result.converged.to_string(),
                serde_json::to_value(p.transmission)
                    .ok()
                    .and_then(|v| v.as_str().map(str::to_string))
                    .unwrap_or_default(),
            ]
        });
        self.write_csv("cells.csv", &CELLS_HEADER, rows)
    }
}
