use shmked::config::RunConfig;
use shmked::esmda::MdaSchedule;

fn bundled() -> RunConfig {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/twin.json")).unwrap();
    RunConfig::from_json(&text).unwrap()
}

#[test]
fn bundled_config_is_valid() {
    let cfg = bundled();
    assert_eq!(cfg.problems(), Vec::<String>::new());
    let exp = cfg.experiment().unwrap();
    assert_eq!(exp.grid.active_count(), 1200);
    assert_eq!(cfg.assimilation.mda.alphas, vec![8.0; 8]);
}

#[test]
fn json_round_trip() {
    let cfg = bundled();
    assert_eq!(RunConfig::from_json(&cfg.to_json()).unwrap(), cfg);
}

#[test]
fn dictionary_defaults_follow_ensemble_and_state_size() {
    let cfg = bundled();
    assert_eq!(cfg.atoms(), 4 * cfg.ensemble_size);
    // 2% of 1200 cells
    assert_eq!(cfg.sparsity(1200), 24);
    assert_eq!(cfg.sparsity(1201), 25);
}

#[test]
fn unknown_fields_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(&bundled().to_json()).unwrap();
    v["grid"]["nw"] = serde_json::json!(3);
    assert!(RunConfig::from_json(&v.to_string()).is_err());
}

#[test]
fn every_problem_is_reported() {
    let mut cfg = bundled();
    cfg.ensemble_size = 1;
    cfg.assimilation.mda = MdaSchedule { alphas: vec![4.0, 4.0] };
    cfg.assimilation.energy = 1.5;
    cfg.dictionary.sweeps = 0;
    cfg.lnk_bounds = [3.0, 2.0];
    cfg.schedule.survey_times = vec![2880.0];
    let problems = cfg.problems();
    assert_eq!(problems.len(), 6, "{problems:#?}");
    assert!(cfg.validate().is_err());
}

#[test]
fn sparsity_above_atom_count_is_invalid() {
    let mut cfg = bundled();
    cfg.dictionary.atoms = Some(10);
    cfg.dictionary.sparsity = Some(11);
    assert_eq!(cfg.problems().len(), 1);
    cfg.dictionary.sparsity = Some(10);
    assert!(cfg.problems().is_empty());
}
