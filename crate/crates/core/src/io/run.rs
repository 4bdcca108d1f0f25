//! Drives a configured run to completion and writes its snapshots.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::io::config::RunConfig;
use crate::io::snapshot::{Snapshot, SnapshotWriter};
use crate::postproc::{vertical_velocity_field, Model};
use crate::stepper::{Simulation, StepReport};

#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub steps: u64,
    pub t: f64,
    pub files: Vec<PathBuf>,
}

fn capture(sim: &Simulation, with_w: bool) -> Result<Snapshot> {
    let profiles = if with_w && sim.steps() > 0 {
        let model = Model {
            grid: sim.grid(),
            layers: sim.layers(),
            params: sim.params(),
            reactions: sim.reactions(),
        };
        Some(vertical_velocity_field(sim.previous(), sim.state(), sim.last_dt(), &model)?)
    } else {
        None
    };
    Snapshot::capture(sim.state(), sim.steps(), sim.grid(), sim.layers(), sim.params(), profiles.as_deref())
}

/// Runs `config` writing snapshots to `dir`: the initial state (w = 0), every
/// `snapshot_every` steps and the final state. `progress` sees every step.
pub fn run_to_directory(
    config: &RunConfig,
    dir: &Path,
    mut progress: impl FnMut(&StepReport),
) -> Result<RunSummary> {
    let mut sim = config.build()?;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let every = config.time.snapshot_every;
    let formats = config.output.formats.clone();
    let write = !formats.is_empty();
    let mut writer = SnapshotWriter::spawn(dir.to_path_buf(), formats);
    let mut index = 0;
    if write {
        writer.submit(index, capture(&sim, false)?)?;
        index += 1;
    }
    let mut last_written = 0;
    sim.run(|sim, report| {
        progress(report);
        let due = (every > 0 && report.step % every == 0) || sim.finished();
        if write && due {
            writer.submit(index, capture(sim, true)?)?;
            index += 1;
            last_written = report.step;
        }
        Ok(())
    })?;
    let files = writer.finish()?;
    debug_assert!(!write || sim.steps() == 0 || last_written == sim.steps());
    Ok(RunSummary { steps: sim.steps(), t: sim.state().t, files })
}
