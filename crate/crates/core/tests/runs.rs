use hymad::scenario::{Protocol, ScenarioConfig};
use hymad::sim::run_protocol;

fn small() -> ScenarioConfig {
    let mut s = ScenarioConfig::rwp(15, 2000.0, 2000.0, 400.0, 200.0);
    s.cooldown = 100.0;
    s.message_interval = 2.0;
    s.audit = true;
    s
}

#[test]
fn same_seed_reproduces_every_protocol() {
    let cfg = small();
    for p in Protocol::ALL {
        let a = run_protocol(&cfg, p, 7, &[], true).unwrap();
        let b = run_protocol(&cfg, p, 7, &[], true).unwrap();
        assert_eq!(a.metrics, b.metrics, "{p:?}");
        assert_eq!(a.groups, b.groups, "{p:?}");
    }
}

#[test]
fn seeds_change_the_outcome() {
    let cfg = small();
    let a = run_protocol(&cfg, Protocol::Hymad, 1, &[], false).unwrap().metrics;
    let b = run_protocol(&cfg, Protocol::Hymad, 2, &[], false).unwrap().metrics;
    assert_ne!(a.dynamics, b.dynamics);
}

#[test]
fn copy_counting_runs_conserve() {
    let cfg = small();
    for p in [Protocol::SprayAndWait, Protocol::Hymad] {
        let m = run_protocol(&cfg, p, 3, &[], false).unwrap().metrics;
        assert!(m.audits > 0);
        assert_eq!(m.conservation_violations, 0, "{p:?}");
    }
}

#[test]
fn scenario_survives_toml_round_trip() {
    let mut cfg = small();
    cfg.ttl = Some(120.0);
    cfg.seeds = vec![4, 5];
    let back = ScenarioConfig::from_toml(&cfg.to_toml()).unwrap();
    assert_eq!(back, cfg);
}
