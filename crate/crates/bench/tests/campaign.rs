use std::fs;
use std::path::Path;

use harmonize_bench::artifacts::Manifest;
use harmonize_bench::campaign::{run_campaign, run_campaigns, CampaignInput};
use harmonize_bench::io::read_json;
use harmonize_bench::scenario::Scenario;
use harmonize_bench::schedule::ScheduleFile;

fn input(steps: &str) -> CampaignInput {
    let scenario = Scenario::from_toml(&format!("[campaign]\nsteps = [{steps}]\n")).unwrap();
    let schedule = ScheduleFile::from_toml(
        "[[sweeps]]\nname = \"a\"\nhold_periods = 60\nwindow_periods = 30\n\
         grid = [{ start_omega_ratio = 0.9, stop_omega_ratio = 0.92, step_omega_ratio = 0.02 }]\n",
    )
    .unwrap();
    CampaignInput { scenario, schedule: Some(schedule), iterative_schedule: None }
}

fn files(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> = fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().into_string().unwrap()).collect();
    v.sort();
    v
}

#[test]
fn empty_step_list_writes_manifest_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut i = input("");
    i.schedule = None;
    let m = run_campaign(&i, dir.path()).unwrap();
    assert_eq!(m.status, "ok");
    assert_eq!(files(dir.path()), ["manifest.json", "scenario.toml"]);
    assert_eq!(m.artifacts.len(), 1);
}

#[test]
fn same_seed_gives_identical_manifests() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let i = input("\"simulate\", \"compare\"");
    run_campaign(&i, a.path()).unwrap();
    run_campaign(&i, b.path()).unwrap();
    let read = |d: &Path| fs::read(d.join("manifest.json")).unwrap();
    assert_eq!(read(a.path()), read(b.path()));
    for sub in ["simulate-harmonized", "simulate-uncontrolled", "compare"] {
        assert_eq!(read(&a.path().join(sub)), read(&b.path().join(sub)), "{sub}");
    }
    let m: Manifest = read_json(&a.path().join("manifest.json")).unwrap();
    assert!(m.artifacts.iter().any(|x| x.file == "compare/manifest.json"));
    // Wall times are kept out of the hashes.
    let sub: Manifest = read_json(&a.path().join("simulate-harmonized/manifest.json")).unwrap();
    let timing = sub.artifacts.iter().find(|x| x.file == "timing.csv").unwrap();
    assert!(timing.volatile && timing.sha256.is_none());
}

#[test]
fn seed_changes_the_noise_stream() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut i = input("\"simulate\"");
    i.scenario.simulation.noise_std_dev_n_or_m_s2 = 0.01;
    run_campaign(&i, a.path()).unwrap();
    i.scenario.seed = 2;
    run_campaign(&i, b.path()).unwrap();
    let read = |d: &Path| fs::read(d.join("simulate-harmonized/points.csv")).unwrap();
    assert_ne!(read(a.path()), read(b.path()));
}

#[test]
fn invalid_step_lists_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_campaign(&input("\"compare\""), dir.path()).is_err());
    assert!(run_campaign(&input("\"simulate\", \"simulate\""), dir.path()).is_err());
    let mut i = input("\"simulate\"");
    i.schedule = None;
    assert!(run_campaign(&i, dir.path()).is_err());
    assert!(Scenario::from_toml("[campaign]\nsteps = [\"plot\"]\n").is_err());
}

#[test]
fn scenarios_run_side_by_side() {
    let dir = tempfile::tempdir().unwrap();
    let a = input("");
    let mut b = input("");
    b.scenario.name = "other".into();
    let results = run_campaigns(&[a.clone(), b], dir.path());
    assert!(results.iter().all(|r| r.is_ok()));
    assert!(dir.path().join("shaw-beam/manifest.json").exists());
    assert!(dir.path().join("other/manifest.json").exists());
    assert!(run_campaigns(&[a.clone(), a], dir.path())[0].is_err());
}
