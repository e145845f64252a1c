//! Command-line interface.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::info;

use crate::campaign::{run_campaigns, CampaignInput};
use crate::commands::{
    check_status, compare, iterate, load_points, load_reference, load_seed, reference, run_tuning, run_wall_time,
    simulate, stability, write_comparison, write_iterative, write_reference, write_simulation, write_stability,
    write_tuning,
};
use crate::error::{validation, BenchError, Result};
use crate::grid::{parse_grid, GridSegment};
use crate::scenario::Scenario;
use crate::schedule::ScheduleFile;

#[derive(Debug, Parser)]
#[command(name = "harmonize", version, about = "Virtual vibration-test bench with per-harmonic excitation control")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Scenario file; the built-in beam when omitted.
    #[arg(long)]
    pub scenario: Option<PathBuf>,
    /// Overrides the scenario seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stepped-sine sweeps with the closed-loop controller.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        schedule: PathBuf,
        /// Keep the last periods of every hold in a columnar dump.
        #[arg(long)]
        dump_periods: Option<usize>,
    },
    /// Periodic-orbit branches under ideal forcing.
    Reference {
        #[command(flatten)]
        common: Common,
        /// Frequency window `start:stop:step,...` as ratios to the first mode.
        #[arg(long)]
        grid: Option<String>,
        /// Seed file written by a sweep with a jump.
        #[arg(long)]
        isola_seed: Option<PathBuf>,
    },
    /// Closed-loop stability screening of drive points.
    Stability {
        #[command(flatten)]
        common: Common,
        /// Comma-separated drive locations.
        #[arg(long, default_value = "x1,x2")]
        drive: String,
        #[arg(long, default_value = "0.5:8:0.005")]
        grid: String,
    },
    /// Cutoff and gain selection at the representative point.
    Tune {
        #[command(flatten)]
        common: Common,
    },
    /// Iterative Newton/Broyden baseline sweeps.
    Iterate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        schedule: PathBuf,
    },
    /// Compares a run with an optional second run and a reference.
    Compare {
        #[command(flatten)]
        common: Common,
        /// One or two run directories (harmonized first).
        #[arg(long, num_args = 1..=2, required = true)]
        runs: Vec<PathBuf>,
        /// Directory written by `reference`.
        #[arg(long)]
        reference: Option<PathBuf>,
    },
    /// Tune, simulate, reference, iterate and compare for one or more scenarios.
    Campaign {
        /// Scenario files; several run in parallel.
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
        /// Overrides the schedule named in every scenario.
        #[arg(long)]
        schedule: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_scenario(common: &Common) -> Result<Scenario> {
    let mut s = match &common.scenario {
        Some(p) => Scenario::load(p)?,
        None => Scenario::default(),
    };
    if let Some(seed) = common.seed {
        s.seed = seed;
    }
    Ok(s)
}

fn grid_or_window(grid: Option<&str>, scn: &Scenario) -> Result<Vec<GridSegment>> {
    match grid {
        Some(g) => parse_grid(g),
        None => {
            let r = &scn.reference;
            Ok(vec![GridSegment {
                start_omega_ratio: r.omega_min_ratio,
                stop_omega_ratio: r.omega_max_ratio,
                step_omega_ratio: r.omega_max_ratio - r.omega_min_ratio,
            }])
        }
    }
}

fn scenario_of_run(dir: &Path) -> Result<Scenario> {
    Scenario::load(&dir.join("scenario.toml"))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { common, schedule, dump_periods } => {
            let scn = load_scenario(&common)?;
            let sched = ScheduleFile::load(&schedule)?;
            let (runs, series) = simulate(&scn, &sched, dump_periods)?;
            check_status(&write_simulation(&common.out, &scn, &sched, &runs, series.as_ref())?)
        }
        Command::Reference { common, grid, isola_seed } => {
            let scn = load_scenario(&common)?;
            let grid = grid_or_window(grid.as_deref(), &scn)?;
            let seed = isola_seed.as_deref().map(load_seed).transpose()?;
            let branches = reference(&scn, &grid, seed.as_ref())?;
            check_status(&write_reference(&common.out, &scn, &grid, &branches)?)
        }
        Command::Stability { common, drive, grid } => {
            let scn = load_scenario(&common)?;
            let grid = parse_grid(&grid)?;
            let drives: Vec<String> = drive.split(',').map(|d| d.trim().to_string()).filter(|d| !d.is_empty()).collect();
            if drives.is_empty() {
                return Err(validation("no drive locations given"));
            }
            let (report, verdicts) = stability(&scn, &drives, &grid)?;
            check_status(&write_stability(&common.out, &scn, &grid, &report, &verdicts)?)
        }
        Command::Tune { common } => {
            let scn = load_scenario(&common)?;
            let report = run_tuning(&scn)?;
            check_status(&write_tuning(&common.out, &scn, &report)?)
        }
        Command::Iterate { common, schedule } => {
            let scn = load_scenario(&common)?;
            let sched = ScheduleFile::load(&schedule)?;
            let runs = iterate(&scn, &sched)?;
            check_status(&write_iterative(&common.out, &scn, &sched, &runs)?)
        }
        Command::Compare { common, runs, reference: ref_dir } => {
            let scn = match &common.scenario {
                Some(_) => load_scenario(&common)?,
                None => scenario_of_run(&runs[0])?,
            };
            let primary = load_points(&runs[0])?;
            let twin = runs.get(1).map(|d| load_points(d)).transpose()?;
            let set = ref_dir.as_deref().map(load_reference).transpose()?;
            let rows = compare(&primary, twin.as_deref(), set.as_ref(), scn.control.target_level_n_or_m_s2);
            let times: Vec<_> = runs.iter().map(|d| (d.display().to_string(), run_wall_time(d))).collect();
            check_status(&write_comparison(&common.out, &scn, &rows, &times)?)
        }
        Command::Campaign { scenario, schedule, seed, out } => {
            let inputs = scenario
                .iter()
                .map(|p| {
                    let mut i = CampaignInput::load(p, schedule.as_deref())?;
                    if let Some(s) = seed {
                        i.scenario.seed = s;
                    }
                    Ok(i)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut first_err: Option<BenchError> = None;
            for (i, r) in inputs.iter().zip(run_campaigns(&inputs, &out)) {
                let r = r.and_then(|m| check_status(&m));
                match r {
                    Ok(()) => info!("campaign `{}` finished", i.scenario.name),
                    Err(e) => {
                        log::error!("campaign `{}`: {e}", i.scenario.name);
                        first_err.get_or_insert(e);
                    }
                }
            }
            first_err.map_or(Ok(()), Err)
        }
    }
}
