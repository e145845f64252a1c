//! Campaigns: the bench steps for one scenario run in order, each into its
//! own subdirectory, with a top-level manifest that records the hashes of
//! every step manifest. Independent scenarios run in parallel.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use log::info;

use crate::artifacts::{ArtifactDir, Manifest};
use crate::commands::{
    compare, iterate, load_points, reference, run_tuning, run_wall_time, simulate, tuned_scenario, write_comparison,
    write_iterative, write_reference, write_simulation, write_tuning, IsolaSeedFile, NamedBranch,
};
use crate::error::{validation, BenchError, Result};
use crate::grid::GridSegment;
use crate::io::{read_text, sha256_hex};
use crate::metrics::ReferenceSet;
use crate::scenario::{CampaignStep, Scenario};
use crate::schedule::ScheduleFile;

pub const TUNE_DIR: &str = "tune";
pub const HARMONIZED_DIR: &str = "simulate-harmonized";
pub const UNCONTROLLED_DIR: &str = "simulate-uncontrolled";
pub const REFERENCE_DIR: &str = "reference";
pub const ITERATE_DIR: &str = "iterate";
pub const COMPARE_DIR: &str = "compare";

/// A scenario with the schedules its campaign section points to.
#[derive(Debug, Clone)]
pub struct CampaignInput {
    pub scenario: Scenario,
    pub schedule: Option<ScheduleFile>,
    pub iterative_schedule: Option<ScheduleFile>,
}

impl CampaignInput {
    /// Loads a scenario file; schedule paths resolve against its directory.
    /// `schedule` overrides the file named in the scenario.
    pub fn load(path: &Path, schedule: Option<&Path>) -> Result<Self> {
        let scenario = Scenario::load(path)?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |f: &Option<String>| f.as_ref().map(|f| base.join(f));
        let main = schedule.map(Path::to_path_buf).or_else(|| resolve(&scenario.campaign.schedule_file));
        let iter = resolve(&scenario.campaign.iterative_schedule_file);
        let load = |p: Option<PathBuf>| p.map(|p| ScheduleFile::load(&p)).transpose();
        Ok(Self { schedule: load(main)?, iterative_schedule: load(iter)?, scenario })
    }

    fn validate(&self) -> Result<()> {
        let steps = &self.scenario.campaign.steps;
        let needs = |s: CampaignStep| steps.contains(&s);
        if (needs(CampaignStep::Simulate) || needs(CampaignStep::Iterate)) && self.schedule.is_none() {
            return Err(validation(format!("campaign `{}` needs a schedule file", self.scenario.name)));
        }
        if needs(CampaignStep::Compare) && !needs(CampaignStep::Simulate) {
            return Err(validation("the compare step needs the simulate step"));
        }
        let mut seen = HashSet::new();
        if !steps.iter().all(|s| seen.insert(*s)) {
            return Err(validation("campaign steps must not repeat"));
        }
        Ok(())
    }
}

fn reference_window(scn: &Scenario) -> Vec<GridSegment> {
    let r = &scn.reference;
    vec![GridSegment {
        start_omega_ratio: r.omega_min_ratio,
        stop_omega_ratio: r.omega_max_ratio,
        step_omega_ratio: r.omega_max_ratio - r.omega_min_ratio,
    }]
}

/// Runs the campaign of one scenario into `dir`. Steps run in the order
/// tune, simulate (with and without harmonization), reference, iterate,
/// compare, whatever their order in the file. A step that fails with a
/// numerical error stops the campaign; the artifacts written so far remain
/// and the top-level manifest records the failure.
pub fn run_campaign(input: &CampaignInput, dir: &Path) -> Result<Manifest> {
    input.validate()?;
    let base = &input.scenario;
    let steps = &base.campaign.steps;
    let mut out = ArtifactDir::new(dir, "campaign");
    out.config("scenario", &base.name, "scenario.toml", &base.to_toml())?;
    if let Some(s) = &input.schedule {
        out.config("schedule", "schedule", "schedule.toml", &s.to_toml())?;
    }
    if let Some(s) = &input.iterative_schedule {
        out.config("schedule", "iterative", "iterative_schedule.toml", &s.to_toml())?;
    }
    out.seed("noise", base.seed);
    match run_steps(input, dir, &mut out) {
        Ok(()) => {}
        Err(BenchError::Numerical(m)) => {
            out.mark_failed();
            out.note(format!("campaign stopped: {m}"));
        }
        Err(e) => return Err(e),
    }
    if steps.is_empty() {
        out.note("no steps requested");
    }
    out.finish()
}

fn record_step(out: &mut ArtifactDir, sub: &str, manifest: &Manifest) -> Result<()> {
    let file = format!("{sub}/manifest.json");
    let text = read_text(&out.path().join(&file))?;
    out.record(&file, sha256_hex(text.as_bytes()));
    if manifest.status != "ok" {
        out.mark_failed();
        out.note(format!("{sub}: {}", manifest.status));
    }
    Ok(())
}

fn run_steps(input: &CampaignInput, dir: &Path, out: &mut ArtifactDir) -> Result<()> {
    let steps = &input.scenario.campaign.steps;
    let has = |s: CampaignStep| steps.contains(&s);
    let mut scn = input.scenario.clone();

    if has(CampaignStep::Tune) {
        info!("{}: tuning", scn.name);
        let report = run_tuning(&scn)?;
        let m = write_tuning(&dir.join(TUNE_DIR), &scn, &report)?;
        record_step(out, TUNE_DIR, &m)?;
        if scn.campaign.apply_tuned_gains {
            scn = tuned_scenario(&scn, &report);
            out.note("simulations use the tuned cutoff and gains");
        }
    }

    let mut seed: Option<IsolaSeedFile> = None;
    if has(CampaignStep::Simulate) {
        let sched = input.schedule.as_ref().expect("validated");
        let uncontrolled = scn.without_harmonization();
        let (a, b) = std::thread::scope(|s| {
            let a = s.spawn(|| simulate(&scn, sched, None));
            let b = s.spawn(|| simulate(&uncontrolled, sched, None));
            (a.join().expect("simulation thread panicked"), b.join().expect("simulation thread panicked"))
        });
        info!("{}: simulations done", scn.name);
        let (runs, _) = a?;
        let m = write_simulation(&dir.join(HARMONIZED_DIR), &scn, sched, &runs, None)?;
        record_step(out, HARMONIZED_DIR, &m)?;
        let (runs_u, _) = b?;
        let m = write_simulation(&dir.join(UNCONTROLLED_DIR), &uncontrolled, sched, &runs_u, None)?;
        record_step(out, UNCONTROLLED_DIR, &m)?;
        seed = first_seed(&dir.join(HARMONIZED_DIR), sched)?;
    }

    let mut branches: Option<Vec<NamedBranch>> = None;
    if has(CampaignStep::Reference) {
        info!("{}: reference branches", scn.name);
        let grid = reference_window(&scn);
        let b = reference(&scn, &grid, seed.as_ref())?;
        let m = write_reference(&dir.join(REFERENCE_DIR), &scn, &grid, &b)?;
        record_step(out, REFERENCE_DIR, &m)?;
        branches = Some(b);
    }

    if has(CampaignStep::Iterate) {
        info!("{}: iterative baseline", scn.name);
        let sched = input.iterative_schedule.as_ref().or(input.schedule.as_ref()).expect("validated");
        let runs = iterate(&scn, sched)?;
        let m = write_iterative(&dir.join(ITERATE_DIR), &scn, sched, &runs)?;
        record_step(out, ITERATE_DIR, &m)?;
    }

    if has(CampaignStep::Compare) {
        info!("{}: comparison", scn.name);
        let harmonized = load_points(&dir.join(HARMONIZED_DIR))?;
        let iterative = if has(CampaignStep::Iterate) { Some(load_points(&dir.join(ITERATE_DIR))?) } else { None };
        let set = match branches {
            Some(b) => Some(ReferenceSet {
                model: scn.reference_model()?,
                branches: b.into_iter().filter(|b| b.name != "seed-rejected").map(|b| (b.name, b.branch)).collect(),
            }),
            None => None,
        };
        let rows = compare(&harmonized, iterative.as_deref(), set.as_ref(), scn.control.target_level_n_or_m_s2);
        let mut times = vec![(HARMONIZED_DIR.to_string(), run_wall_time(&dir.join(HARMONIZED_DIR)))];
        if iterative.is_some() {
            times.push((ITERATE_DIR.to_string(), run_wall_time(&dir.join(ITERATE_DIR))));
        }
        let m = write_comparison(&dir.join(COMPARE_DIR), &scn, &rows, &times)?;
        record_step(out, COMPARE_DIR, &m)?;
    }
    Ok(())
}

/// Seed file of the first sweep with a jump, if one was written.
fn first_seed(dir: &Path, sched: &ScheduleFile) -> Result<Option<IsolaSeedFile>> {
    for s in sched.sweeps.iter().filter(|s| s.jump.is_some()) {
        let p = dir.join(format!("isola_seed_{}.json", s.name));
        if p.exists() {
            return crate::io::read_json(&p).map(Some);
        }
    }
    Ok(None)
}

/// Runs several campaigns in parallel, each into `dir/<scenario name>`.
pub fn run_campaigns(inputs: &[CampaignInput], dir: &Path) -> Vec<Result<Manifest>> {
    let mut names = HashSet::new();
    if !inputs.iter().all(|i| names.insert(i.scenario.name.as_str())) {
        return vec![Err(validation("scenario names must be unique within a campaign"))];
    }
    if inputs.len() == 1 {
        return vec![run_campaign(&inputs[0], dir)];
    }
    std::thread::scope(|s| {
        let handles: Vec<_> = inputs
            .iter()
            .map(|i| s.spawn(move || run_campaign(i, &dir.join(&i.scenario.name))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("campaign thread panicked")).collect()
    })
}
