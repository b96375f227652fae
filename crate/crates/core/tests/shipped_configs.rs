use std::path::PathBuf;

use cohevo::config::RunConfig;
use cohevo::harness::{shipped_scenarios, StudySpec};

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn config_files_match_the_shipped_scenarios() {
    for (name, cfg) in shipped_scenarios() {
        let path = configs_dir().join(format!("{name}.json"));
        let on_disk = RunConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        assert_eq!(on_disk, cfg, "{name}.json is stale");
        on_disk.scenario().unwrap();
    }
}

#[test]
fn study_files_resolve_and_validate() {
    for name in ["study_rod_linear", "study_plate_scalar"] {
        let spec = StudySpec::load(&configs_dir().join(format!("{name}.json"))).unwrap();
        assert!(spec.levels.len() >= 3, "{name}");
    }
}
